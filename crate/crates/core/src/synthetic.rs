//! Synthetic first-price environment with embedding-based valuations.
//!
//! * a base embedding `e_base ~ N(0, I_d)` is drawn once per seed;
//! * event `i` has embedding `(e_base + 3 xi_i) / 4` with `xi_i ~ N(0, I_d)`;
//! * campaign `c` has embedding `r_c ~ N(0, I_d)`;
//! * valuations are `min(exp(<r_c, e_i> / (2 sqrt d)) / 10, 1)`;
//! * the highest active valuation wins and pays itself;
//! * budgets grow linearly with the campaign index, `b^c = c * b_base`.
//!
//! Normal draws use `rand_distr::StandardNormal` (ziggurat) on ChaCha8
//! streams, one stream per event and per campaign, so instances are identical
//! across platforms and thread counts.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::model::{ActivationVector, AuctionRule, CampaignSet, Event};
use crate::rng::{derive_seed, rng, substream, tags};
use crate::sequential::simulate_sequential;

pub type Embedding = Vec<f64>;
pub type SyntheticEvent = Event<Embedding>;

/// Default limit on precomputed valuation entries (K * N).
pub const DEFAULT_TABLE_CAP: usize = 1 << 24;

/// Written as a number or `"auto"` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BaseBudgetRepr", into = "BaseBudgetRepr")]
pub enum BaseBudget {
    Fixed(f64),
    /// Calibrate so that about half of the campaigns cap.
    Auto,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BaseBudgetRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<BaseBudgetRepr> for BaseBudget {
    type Error = String;

    fn try_from(r: BaseBudgetRepr) -> std::result::Result<Self, String> {
        match r {
            BaseBudgetRepr::Number(b) => Ok(Self::Fixed(b)),
            BaseBudgetRepr::Text(s) => s.parse(),
        }
    }
}

impl From<BaseBudget> for BaseBudgetRepr {
    fn from(b: BaseBudget) -> Self {
        match b {
            BaseBudget::Fixed(x) => Self::Number(x),
            BaseBudget::Auto => Self::Text("auto".into()),
        }
    }
}

impl std::str::FromStr for BaseBudget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.parse::<f64>()
            .map(Self::Fixed)
            .map_err(|_| format!("base budget must be a number or \"auto\", got `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub b_base: BaseBudget,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            k: 20,
            d: 10,
            b_base: BaseBudget::Auto,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("N", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(invalid("K", "must be at least 1"));
        }
        if self.d == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        if let BaseBudget::Fixed(b) = self.b_base {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid("b_base", "must be positive"));
            }
        }
        Ok(())
    }
}

fn normal_vec(r: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

pub fn base_embedding(cfg: &SyntheticConfig) -> Embedding {
    normal_vec(&mut rng(derive_seed(cfg.seed, tags::BASE)), cfg.d)
}

pub fn generate_events(cfg: &SyntheticConfig) -> Result<Vec<SyntheticEvent>> {
    generate_events_with_noise(cfg, 1.0)
}

/// Event generation with the perturbation multiplied by `noise_scale`
/// (`1.0` is the standard generator, `0.0` collapses every event onto
/// `e_base / 4`).
pub fn generate_events_with_noise(cfg: &SyntheticConfig, noise_scale: f64) -> Result<Vec<SyntheticEvent>> {
    cfg.validate()?;
    let base = base_embedding(cfg);
    let seed = derive_seed(cfg.seed, tags::EVENTS);
    Ok((0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut r = substream(seed, i as u64);
            let xi = normal_vec(&mut r, cfg.d);
            let payload = base
                .iter()
                .zip(&xi)
                .map(|(b, x)| (b + 3.0 * noise_scale * x) / 4.0)
                .collect();
            Event { id: i, payload }
        })
        .collect())
}

pub fn generate_campaigns(cfg: &SyntheticConfig) -> Result<Vec<Embedding>> {
    cfg.validate()?;
    let seed = derive_seed(cfg.seed, tags::CAMPAIGNS);
    Ok((0..cfg.k)
        .map(|c| normal_vec(&mut substream(seed, c as u64), cfg.d))
        .collect())
}

#[inline]
fn valuation_unchecked(r: &[f64], e: &[f64]) -> f64 {
    let dot: f64 = r.iter().zip(e).map(|(a, b)| a * b).sum();
    let d = r.len() as f64;
    ((dot / (2.0 * d.sqrt())).exp() / 10.0).min(1.0)
}

/// `min(exp(<r, e> / (2 sqrt d)) / 10, 1)`.
pub fn valuation(r: &[f64], e: &[f64]) -> Result<f64> {
    if r.len() != e.len() {
        return Err(SimError::DimensionMismatch {
            expected: r.len(),
            got: e.len(),
        });
    }
    Ok(valuation_unchecked(r, e))
}

/// `b^c = c * b_base` for `c = 1..=K`.
pub fn assign_budgets(k: usize, b_base: f64) -> Result<Vec<f64>> {
    if !(b_base > 0.0 && b_base.is_finite()) {
        return Err(invalid("b_base", "must be positive"));
    }
    if k == 0 {
        return Err(invalid("K", "must be at least 1"));
    }
    Ok((1..=k).map(|c| c as f64 * b_base).collect())
}

/// Truthful first-price auction over embedding valuations. Ties go to the
/// lowest campaign index.
#[derive(Debug, Clone)]
pub struct FirstPriceRule {
    campaigns: Vec<Embedding>,
    /// Row `event.id` holds the K valuations, when precomputed.
    table: Option<Vec<f64>>,
}

impl FirstPriceRule {
    /// Computes valuations on the fly.
    pub fn new(campaigns: Vec<Embedding>) -> Self {
        Self {
            campaigns,
            table: None,
        }
    }

    /// Precomputes the valuation table when `K * N <= table_cap`.
    pub fn with_table(campaigns: Vec<Embedding>, events: &[SyntheticEvent], table_cap: usize) -> Self {
        let k = campaigns.len();
        let fits = k.saturating_mul(events.len()) <= table_cap
            && events.iter().enumerate().all(|(i, e)| e.id == i);
        let table = fits.then(|| {
            let mut t = vec![0.0; k * events.len()];
            t.par_chunks_mut(k).zip(events).for_each(|(row, e)| {
                for (v, r) in row.iter_mut().zip(&campaigns) {
                    *v = valuation_unchecked(r, &e.payload);
                }
            });
            t
        });
        Self { campaigns, table }
    }

    pub fn has_table(&self) -> bool {
        self.table.is_some()
    }

    pub fn campaigns(&self) -> &[Embedding] {
        &self.campaigns
    }

    fn winner(&self, event: &SyntheticEvent, active: &ActivationVector) -> Option<(usize, f64)> {
        let k = self.campaigns.len();
        let mut best: Option<(usize, f64)> = None;
        let mut consider = |c: usize, v: f64| {
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((c, v));
            }
        };
        match &self.table {
            Some(t) => {
                let row = &t[event.id * k..(event.id + 1) * k];
                for c in active.active_indices() {
                    consider(c, row[c]);
                }
            }
            None => {
                for c in active.active_indices() {
                    consider(c, valuation_unchecked(&self.campaigns[c], &event.payload));
                }
            }
        }
        best
    }
}

impl AuctionRule for FirstPriceRule {
    type Payload = Embedding;

    fn num_campaigns(&self) -> usize {
        self.campaigns.len()
    }

    /// Valuations never exceed 1, so `C = N`.
    fn max_increment(&self) -> f64 {
        1.0
    }

    fn spend(&self, event: &SyntheticEvent, active: &ActivationVector, out: &mut [f64]) {
        out.fill(0.0);
        if let Some((c, v)) = self.winner(event, active) {
            out[c] = v;
        }
    }
}

/// Result of a budget calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub scale: f64,
    pub capped_fraction: f64,
    /// `(scale, capped fraction)` for every oracle run, in probe order.
    pub probes: Vec<(f64, f64)>,
    /// Whether the probes were consistent with a nonincreasing capped
    /// fraction.
    pub monotone: bool,
}

/// Bisection on a budget scale: `budgets(scale)` must produce budgets that
/// grow with `scale`. Each probe runs the sequential oracle.
pub fn calibrate_scale<R: AuctionRule>(
    events: &[Event<R::Payload>],
    rule: &R,
    budgets: impl Fn(f64) -> Result<Vec<f64>>,
    target_fraction: f64,
    tolerance: f64,
    bracket: (f64, f64),
) -> Result<Calibration> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(invalid("target_fraction", "must lie in (0, 1)"));
    }
    if !(tolerance >= 0.0) {
        return Err(invalid("tolerance", "must be nonnegative"));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid("bracket", "need 0 < lo < hi"));
    }
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut probe = |scale: f64| -> Result<f64> {
        let campaigns = CampaignSet::new(budgets(scale)?)?;
        let t = simulate_sequential(events, &campaigns, rule, Default::default())?;
        let f = t.capped_fraction();
        probes.push((scale, f));
        Ok(f)
    };
    let f_lo = probe(lo)?;
    let f_hi = probe(hi)?;
    if f_lo < target_fraction - tolerance || f_hi > target_fraction + tolerance {
        return Err(SimError::Calibration(format!(
            "bracket [{lo}, {hi}] gives capped fractions [{f_lo}, {f_hi}], target {target_fraction}"
        )));
    }
    let mut best = if (f_lo - target_fraction).abs() <= (f_hi - target_fraction).abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    for _ in 0..100 {
        if (best.1 - target_fraction).abs() <= tolerance {
            break;
        }
        let mid = (lo * hi).sqrt();
        let f = probe(mid)?;
        if (f - target_fraction).abs() < (best.1 - target_fraction).abs() {
            best = (mid, f);
        }
        if f > target_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
    }
    if (best.1 - target_fraction).abs() > tolerance {
        return Err(SimError::Calibration(format!(
            "closest capped fraction {} at scale {}, target {target_fraction} +/- {tolerance}",
            best.1, best.0
        )));
    }
    let mut sorted = probes.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(Calibration {
        scale: best.0,
        capped_fraction: best.1,
        probes,
        monotone,
    })
}

/// Base budget for linear budgets such that the oracle caps
/// `target_fraction +/- tolerance` of the campaigns.
pub fn calibrate_base_budget<R: AuctionRule>(
    events: &[Event<R::Payload>],
    rule: &R,
    target_fraction: f64,
    tolerance: f64,
) -> Result<Calibration> {
    let k = rule.num_campaigns();
    // nobody can outspend N * max increment, so the smallest budget at that
    // base never binds
    let hi = events.len() as f64 * rule.max_increment() * 1.01;
    calibrate_scale(
        events,
        rule,
        |b| assign_budgets(k, b),
        target_fraction,
        tolerance,
        (hi * 1e-9, hi),
    )
}

/// A fully generated synthetic instance.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub config: SyntheticConfig,
    pub base: Embedding,
    pub events: Vec<SyntheticEvent>,
    pub campaign_embeddings: Vec<Embedding>,
    pub b_base: f64,
    pub campaigns: CampaignSet,
}

impl SyntheticInstance {
    /// Generates events and campaigns; `BaseBudget::Auto` calibrates to
    /// `0.5 +/- 0.1` capped.
    pub fn generate(cfg: &SyntheticConfig) -> Result<Self> {
        let events = generate_events(cfg)?;
        let campaign_embeddings = generate_campaigns(cfg)?;
        let b_base = match cfg.b_base {
            BaseBudget::Fixed(b) => b,
            BaseBudget::Auto => {
                let rule = FirstPriceRule::with_table(campaign_embeddings.clone(), &events, DEFAULT_TABLE_CAP);
                calibrate_base_budget(&events, &rule, 0.5, 0.1)?.scale
            }
        };
        let campaigns = CampaignSet::new(assign_budgets(cfg.k, b_base)?)?;
        Ok(Self {
            config: cfg.clone(),
            base: base_embedding(cfg),
            events,
            campaign_embeddings,
            b_base,
            campaigns,
        })
    }

    pub fn rule(&self) -> FirstPriceRule {
        FirstPriceRule::with_table(self.campaign_embeddings.clone(), &self.events, DEFAULT_TABLE_CAP)
    }

    pub fn with_b_base(&self, b_base: f64) -> Result<Self> {
        let mut out = self.clone();
        out.b_base = b_base;
        out.config.b_base = BaseBudget::Fixed(b_base);
        out.campaigns = CampaignSet::new(assign_budgets(self.config.k, b_base)?)?;
        Ok(out)
    }

    /// Writes the instance as text:
    ///
    /// ```text
    /// # burnout-instance v1 N=<n> K=<k> d=<d> seed=<seed> b_base=<b>
    /// kind,index,budget,x0,...,x{d-1}
    /// base,0,,...
    /// campaign,<c>,<budget>,...
    /// event,<i>,,...
    /// ```
    ///
    /// Floats use shortest round-trip formatting, so reading the file back
    /// reproduces the instance bit for bit.
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let cfg = &self.config;
        let mut w = BufWriter::new(w);
        writeln!(
            w,
            "# burnout-instance v1 N={} K={} d={} seed={} b_base={}",
            cfg.n, cfg.k, cfg.d, cfg.seed, self.b_base
        )?;
        write!(w, "kind,index,budget")?;
        for j in 0..cfg.d {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        let row = |w: &mut BufWriter<W>, kind: &str, idx: usize, budget: Option<f64>, v: &[f64]| -> std::io::Result<()> {
            write!(w, "{kind},{idx},")?;
            if let Some(b) = budget {
                write!(w, "{b}")?;
            }
            for x in v {
                write!(w, ",{x}")?;
            }
            writeln!(w)
        };
        row(&mut w, "base", 0, None, &self.base)?;
        for (c, r) in self.campaign_embeddings.iter().enumerate() {
            row(&mut w, "campaign", c, Some(self.campaigns.budget(c)), r)?;
        }
        for e in &self.events {
            row(&mut w, "event", e.id, None, &e.payload)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(std::fs::File::create(path)?)
    }

    pub fn read<R: Read>(r: R, label: &str) -> Result<Self> {
        let err = |line: usize, reason: String| SimError::Parse {
            path: label.to_string(),
            line,
            reason,
        };
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| err(1, "missing header".into()))??;
        let mut fields = std::collections::HashMap::new();
        let rest = header
            .strip_prefix("# burnout-instance v1")
            .ok_or_else(|| err(1, "not a burnout instance file".into()))?;
        for kv in rest.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| err(1, format!("bad header field `{kv}`")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| -> Result<&String> {
            fields.get(k).ok_or_else(|| err(1, format!("header lacks `{k}`")))
        };
        let parse_usize = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|e| err(1, format!("{k}: {e}")))
        };
        let n = parse_usize("N")?;
        let k = parse_usize("K")?;
        let d = parse_usize("d")?;
        let seed: u64 = get("seed")?.parse().map_err(|e| err(1, format!("seed: {e}")))?;
        let b_base: f64 = get("b_base")?.parse().map_err(|e| err(1, format!("b_base: {e}")))?;
        lines.next().ok_or_else(|| err(2, "missing column header".into()))??;

        let mut base = None;
        let mut camps = vec![None; k];
        let mut budgets = vec![0.0; k];
        let mut events: Vec<Option<SyntheticEvent>> = vec![None; n];
        for (i, line) in lines.enumerate() {
            let lineno = i + 3;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 + d {
                return Err(err(lineno, format!("expected {} columns, got {}", 3 + d, cols.len())));
            }
            let idx: usize = cols[1].parse().map_err(|e| err(lineno, format!("index: {e}")))?;
            let v: Vec<f64> = cols[3..]
                .iter()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(lineno, format!("value: {e}")))?;
            match cols[0] {
                "base" => base = Some(v),
                "campaign" if idx < k => {
                    budgets[idx] = cols[2].parse().map_err(|e| err(lineno, format!("budget: {e}")))?;
                    camps[idx] = Some(v);
                }
                "event" if idx < n => events[idx] = Some(Event { id: idx, payload: v }),
                other => return Err(err(lineno, format!("unexpected row `{other}` index {idx}"))),
            }
        }
        let base = base.ok_or_else(|| err(0, "missing base row".into()))?;
        let campaign_embeddings = camps
            .into_iter()
            .enumerate()
            .map(|(c, r)| r.ok_or_else(|| err(0, format!("missing campaign {c}"))))
            .collect::<Result<Vec<_>>>()?;
        let events = events
            .into_iter()
            .enumerate()
            .map(|(i, e)| e.ok_or_else(|| err(0, format!("missing event {i}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: SyntheticConfig {
                n,
                k,
                d,
                b_base: BaseBudget::Fixed(b_base),
                seed,
            },
            base,
            events,
            campaign_embeddings,
            b_base,
            campaigns: CampaignSet::new(budgets)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, k: usize, d: usize, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            n,
            k,
            d,
            b_base: BaseBudget::Fixed(1.0),
            seed,
        }
    }

    #[test]
    fn zero_noise_collapses_to_quarter_base() {
        let c = cfg(5, 2, 1, 3);
        let base = base_embedding(&c);
        for e in generate_events_with_noise(&c, 0.0).unwrap() {
            assert_eq!(e.payload, vec![base[0] / 4.0]);
        }
    }

    #[test]
    fn event_mean_approaches_quarter_base() {
        let c = cfg(100_000, 1, 3, 11);
        let base = base_embedding(&c);
        let events = generate_events(&c).unwrap();
        for j in 0..3 {
            let mean = events.iter().map(|e| e.payload[j]).sum::<f64>() / c.n as f64;
            // each coordinate has sd 3/4; 3 sigma of the sample mean
            let tol = 3.0 * 0.75 / (c.n as f64).sqrt();
            assert!((mean - base[j] / 4.0).abs() < tol, "coord {j}: {mean} vs {}", base[j] / 4.0);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let c = cfg(200, 4, 5, 42);
        assert_eq!(generate_events(&c).unwrap(), generate_events(&c).unwrap());
        assert_eq!(generate_campaigns(&c).unwrap(), generate_campaigns(&c).unwrap());
        let other = cfg(200, 4, 5, 43);
        assert_ne!(generate_events(&c).unwrap(), generate_events(&other).unwrap());
    }

    #[test]
    fn campaign_covariance_is_identity() {
        let c = cfg(1, 20_000, 3, 5);
        let rs = generate_campaigns(&c).unwrap();
        let m = rs.len() as f64;
        for a in 0..3 {
            for b in 0..3 {
                let cov = rs.iter().map(|r| r[a] * r[b]).sum::<f64>() / m;
                let expect = if a == b { 1.0 } else { 0.0 };
                // sd of the entry is about sqrt(2/m) on the diagonal, sqrt(1/m) off it
                assert!((cov - expect).abs() < 5.0 * (2.0 / m).sqrt(), "({a},{b}) = {cov}");
            }
        }
    }

    #[test]
    fn zero_campaigns_rejected() {
        assert!(generate_campaigns(&cfg(10, 0, 2, 0)).is_err());
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(valuation(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.1);
        let d = 4.0f64;
        let s = 2.0 * d.sqrt() * 10f64.ln();
        assert_eq!(valuation(&[s, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(valuation(&[1e3, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]).unwrap(), 1.0);
        let tiny = valuation(&[-50.0], &[10.0]).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-50);
        assert!(valuation(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn first_price_winner_and_reallocation() {
        // valuations on the single event: c0 = 0.1, c1 = 0.1 * e^{0.5}, c2 = 0.1 * e^{-0.5}
        let camps = vec![vec![0.0], vec![1.0], vec![-1.0]];
        let ev = vec![Event { id: 0, payload: vec![1.0] }];
        for rule in [FirstPriceRule::new(camps.clone()), FirstPriceRule::with_table(camps.clone(), &ev, 100)] {
            let mut out = vec![0.0; 3];
            rule.spend(&ev[0], &ActivationVector::all_active(3), &mut out);
            assert_eq!(out, vec![0.0, valuation(&[1.0], &[1.0]).unwrap(), 0.0]);
            rule.spend(&ev[0], &ActivationVector::from_bits(vec![true, false, true]), &mut out);
            assert_eq!(out, vec![0.1, 0.0, 0.0]);
            rule.spend(&ev[0], &ActivationVector::from_bits(vec![false, false, true]), &mut out);
            assert_eq!(out[2], valuation(&[-1.0], &[1.0]).unwrap());
            rule.spend(&ev[0], &ActivationVector::none_active(3), &mut out);
            assert_eq!(out, vec![0.0; 3]);
        }
    }

    #[test]
    fn budgets_are_linear() {
        assert_eq!(assign_budgets(3, 70.0).unwrap(), vec![70.0, 140.0, 210.0]);
        assert_eq!(assign_budgets(1, 2.5).unwrap(), vec![2.5]);
        let b = assign_budgets(50, 0.3).unwrap();
        assert!(b.windows(2).all(|w| w[1] > w[0]));
        assert!(assign_budgets(3, 0.0).is_err());
    }

    #[test]
    fn table_and_on_the_fly_agree() {
        let c = cfg(300, 6, 4, 8);
        let events = generate_events(&c).unwrap();
        let camps = generate_campaigns(&c).unwrap();
        let a = FirstPriceRule::new(camps.clone());
        let b = FirstPriceRule::with_table(camps, &events, usize::MAX);
        assert!(b.has_table() && !a.has_table());
        let act = ActivationVector::from_bits(vec![true, false, true, true, false, true]);
        let (mut x, mut y) = (vec![0.0; 6], vec![0.0; 6]);
        for e in &events {
            a.spend(e, &act, &mut x);
            b.spend(e, &act, &mut y);
            assert_eq!(x, y);
        }
    }

    #[test]
    fn calibration_hits_target() {
        let c = SyntheticConfig {
            b_base: BaseBudget::Auto,
            ..cfg(5_000, 10, 5, 2)
        };
        let inst = SyntheticInstance::generate(&c).unwrap();
        let rule = inst.rule();
        let t = simulate_sequential(&inst.events, &inst.campaigns, &rule, Default::default()).unwrap();
        assert!((0.4..=0.6).contains(&t.capped_fraction()), "{}", t.capped_fraction());
    }

    #[test]
    fn instance_file_roundtrip() {
        let inst = SyntheticInstance::generate(&cfg(50, 3, 2, 9)).unwrap();
        let mut buf = Vec::new();
        inst.write(&mut buf).unwrap();
        let back = SyntheticInstance::read(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.events, inst.events);
        assert_eq!(back.campaign_embeddings, inst.campaign_embeddings);
        assert_eq!(back.campaigns, inst.campaigns);
        assert_eq!(back.base, inst.base);
        assert_eq!(back.config, inst.config);
    }

    #[test]
    fn instance_parse_errors_carry_line_numbers() {
        let text = "# burnout-instance v1 N=1 K=1 d=1 seed=0 b_base=1\nkind,index,budget,x0\nbase,0,,0.5\ncampaign,0,1,zz\n";
        match SyntheticInstance::read(text.as_bytes(), "bad.csv") {
            Err(SimError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
