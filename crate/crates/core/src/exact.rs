//! Order-independent floating point summation.
//!
//! [`ExactSum`] keeps the running total as a list of non-overlapping partials
//! (Shewchuk's expansion arithmetic), so the represented value is the exact
//! real sum of every input. [`ExactSum::value`] rounds that exact value once,
//! correctly. Two accumulators fed the same multiset of inputs in any order,
//! or merged from any chunking, therefore report bit-identical totals.
//!
//! Every spend total in this crate goes through this type, which is what makes
//! sequential replay, segment aggregation and thread-count changes agree to
//! the last bit.

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        debug_assert!(x.is_finite());
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Adds every partial of `other`; the result is the exact sum of both.
    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// Correctly rounded value of the exact sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round-half-even correction when the tail pushes past a tie.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }

    pub fn is_zero(&self) -> bool {
        self.partials.is_empty() || self.value() == 0.0
    }
}

impl std::iter::FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// A K-vector of exact accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactVec {
    sums: Vec<ExactSum>,
}

impl ExactVec {
    pub fn zeros(k: usize) -> Self {
        Self {
            sums: vec![ExactSum::new(); k],
        }
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    /// Adds the nonzero entries of `increments`.
    pub fn add_dense(&mut self, increments: &[f64]) {
        debug_assert_eq!(increments.len(), self.sums.len());
        for (s, &x) in self.sums.iter_mut().zip(increments) {
            if x != 0.0 {
                s.add(x);
            }
        }
    }

    pub fn add_at(&mut self, c: usize, x: f64) {
        if x != 0.0 {
            self.sums[c].add(x);
        }
    }

    pub fn merge(&mut self, other: &ExactVec) {
        for (s, o) in self.sums.iter_mut().zip(&other.sums) {
            s.merge(o);
        }
    }

    pub fn get(&self, c: usize) -> &ExactSum {
        &self.sums[c]
    }

    pub fn value(&self, c: usize) -> f64 {
        self.sums[c].value()
    }

    pub fn values(&self) -> Vec<f64> {
        self.sums.iter().map(ExactSum::value).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cancellation_is_exact() {
        let s: ExactSum = [1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.value(), 1.0);
        let s: ExactSum = [0.1; 10].into_iter().collect();
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(ExactSum::new().value(), 0.0);
        assert!(ExactSum::new().is_zero());
    }

    #[test]
    fn half_even_tie() {
        // 1 + 2^-53 is a tie; the extra tiny term decides the rounding direction.
        let s: ExactSum = [1.0, 2f64.powi(-53), 2f64.powi(-80)].into_iter().collect();
        assert_eq!(s.value(), 1.0 + f64::EPSILON);
        let s: ExactSum = [1.0, 2f64.powi(-53)].into_iter().collect();
        assert_eq!(s.value(), 1.0);
    }

    proptest! {
        #[test]
        fn order_and_chunking_do_not_matter(
            xs in proptest::collection::vec(0.0f64..1.0, 1..200),
            split in 0usize..200,
            seed in any::<u64>(),
        ) {
            let forward: ExactSum = xs.iter().copied().collect();
            let mut shuffled = xs.clone();
            // deterministic permutation from the seed
            let n = shuffled.len();
            let mut state = seed | 1;
            for i in (1..n).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                shuffled.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let reversed: ExactSum = shuffled.iter().copied().collect();
            let cut = split.min(n);
            let mut left: ExactSum = xs[..cut].iter().copied().collect();
            let right: ExactSum = xs[cut..].iter().copied().collect();
            left.merge(&right);
            prop_assert_eq!(forward.value().to_bits(), reversed.value().to_bits());
            prop_assert_eq!(forward.value().to_bits(), left.value().to_bits());
        }
    }
}
