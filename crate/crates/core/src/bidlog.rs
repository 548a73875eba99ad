//! Keyword bid logs and the day-shift experiment.
//!
//! Logs are CSV files with header `day,advertiser_id,keyword_id,bid,count`.
//! Ids are arbitrary strings, mapped to dense indices in order of first
//! appearance. Each (keyword, advertiser) pair bids a constant amount per
//! day: the count-weighted mean of its logged bids. Keywords are drawn with
//! probability proportional to their total logged count.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample_weighted;
use rand::Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::estimator::{EstimatorConfig, PiInit, PiVector};
use crate::metrics::{relative_error, spend_weighted_error};
use crate::model::{ActivationVector, AuctionRule, CampaignSet, Event, Trajectory};
use crate::rng::{derive_seed, rng, tags};
use crate::s2a::{sort2aggregate, AggregateReport, S2aConfig};
use crate::sequential::simulate_sequential;
use crate::synthetic::{calibrate_scale, Calibration};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidRecord {
    pub day: u32,
    pub advertiser: usize,
    pub keyword: usize,
    pub bid: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BidLog {
    pub records: Vec<BidRecord>,
    pub advertiser_ids: Vec<String>,
    pub keyword_ids: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    day: u32,
    advertiser_id: String,
    keyword_id: String,
    bid: f64,
    count: u64,
}

fn intern(map: &mut HashMap<String, usize>, ids: &mut Vec<String>, id: String) -> usize {
    *map.entry(id.clone()).or_insert_with(|| {
        ids.push(id);
        ids.len() - 1
    })
}

impl BidLog {
    pub fn num_advertisers(&self) -> usize {
        self.advertiser_ids.len()
    }

    pub fn num_keywords(&self) -> usize {
        self.keyword_ids.len()
    }

    pub fn days(&self) -> Vec<u32> {
        let mut d: Vec<u32> = self.records.iter().map(|r| r.day).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    pub fn read<R: Read>(r: R, label: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut log = BidLog::default();
        let (mut adv, mut kw) = (HashMap::new(), HashMap::new());
        let mut record = csv::StringRecord::new();
        loop {
            let line = reader.position().line() as usize;
            let err = |reason: String| SimError::Parse {
                path: label.to_string(),
                line,
                reason,
            };
            match reader.read_record(&mut record) {
                Ok(false) => break,
                Ok(true) => {}
                Err(e) => return Err(err(e.to_string())),
            }
            let line = record.position().map_or(line, |p| p.line() as usize);
            let err = |reason: String| SimError::Parse {
                path: label.to_string(),
                line,
                reason,
            };
            let row: RawRow = record
                .deserialize(Some(reader.headers().map_err(|e| err(e.to_string()))?))
                .map_err(|e| err(e.to_string()))?;
            if !(row.bid > 0.0 && row.bid.is_finite()) {
                return Err(err(format!("bid {} is not positive", row.bid)));
            }
            if row.count == 0 {
                return Err(err("count must be positive".into()));
            }
            let advertiser = intern(&mut adv, &mut log.advertiser_ids, row.advertiser_id);
            let keyword = intern(&mut kw, &mut log.keyword_ids, row.keyword_id);
            log.records.push(BidRecord {
                day: row.day,
                advertiser,
                keyword,
                bid: row.bid,
                count: row.count,
            });
        }
        Ok(log)
    }

    pub fn write<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["day", "advertiser_id", "keyword_id", "bid", "count"])?;
        for r in &self.records {
            out.write_record([
                r.day.to_string(),
                self.advertiser_ids[r.advertiser].clone(),
                self.keyword_ids[r.keyword].clone(),
                r.bid.to_string(),
                r.count.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(std::fs::File::create(path)?)
    }
}

pub fn load_bid_log(path: &Path) -> Result<BidLog> {
    BidLog::read(std::fs::File::open(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeywordBid {
    pub advertiser: usize,
    pub bid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub id: String,
    pub frequency: f64,
    /// Sorted by decreasing bid, then increasing advertiser index.
    pub bids: Vec<KeywordBid>,
}

/// One day's keyword distribution and constant bids. Advertiser indices are
/// shared by every day of the source log, so budgets line up across days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordModel {
    pub day: u32,
    pub advertiser_ids: Vec<String>,
    pub keywords: Vec<KeywordEntry>,
}

impl KeywordModel {
    pub fn num_advertisers(&self) -> usize {
        self.advertiser_ids.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn build_keyword_model(log: &BidLog, day: u32) -> Result<KeywordModel> {
    // keyword -> (total count, advertiser -> (sum bid*count, sum count))
    let mut per_kw: Vec<Option<(u64, HashMap<usize, (f64, u64)>)>> = vec![None; log.num_keywords()];
    for r in log.records.iter().filter(|r| r.day == day) {
        let (total, bids) = per_kw[r.keyword].get_or_insert_with(Default::default);
        *total += r.count;
        let e = bids.entry(r.advertiser).or_insert((0.0, 0));
        e.0 += r.bid * r.count as f64;
        e.1 += r.count;
    }
    let grand: u64 = per_kw.iter().flatten().map(|(t, _)| t).sum();
    if grand == 0 {
        return Err(invalid("day", format!("no records for day {day}")));
    }
    let keywords = per_kw
        .into_iter()
        .enumerate()
        .filter_map(|(w, entry)| {
            let (total, bids) = entry?;
            let mut bids: Vec<KeywordBid> = bids
                .into_iter()
                .map(|(advertiser, (s, n))| KeywordBid {
                    advertiser,
                    bid: s / n as f64,
                })
                .collect();
            bids.sort_by(|a, b| b.bid.total_cmp(&a.bid).then(a.advertiser.cmp(&b.advertiser)));
            Some(KeywordEntry {
                id: log.keyword_ids[w].clone(),
                frequency: total as f64 / grand as f64,
                bids,
            })
        })
        .collect();
    Ok(KeywordModel {
        day,
        advertiser_ids: log.advertiser_ids.clone(),
        keywords,
    })
}

/// `n` i.i.d. keyword draws; the payload is the keyword's index in
/// `model.keywords`.
pub fn sample_event_stream(model: &KeywordModel, n: usize, seed: u64) -> Result<Vec<Event<usize>>> {
    if n == 0 {
        return Err(invalid("N", "must be at least 1"));
    }
    if model.keywords.is_empty() {
        return Err(SimError::Empty("keyword model"));
    }
    let dist = WeightedIndex::new(model.keywords.iter().map(|k| k.frequency))
        .map_err(|e| invalid("frequencies", e.to_string()))?;
    let mut r = rng(derive_seed(seed, tags::STREAM));
    Ok((0..n)
        .map(|id| Event {
            id,
            payload: dist.sample(&mut r),
        })
        .collect())
}

/// First-price replay of keyword auctions: the highest active bidder on the
/// event's keyword pays its bid.
#[derive(Debug, Clone)]
pub struct KeywordRule {
    k: usize,
    bidders: Vec<Vec<KeywordBid>>,
    max_bid: f64,
}

pub fn keyword_first_price_rule(model: &KeywordModel) -> Result<KeywordRule> {
    if model.keywords.is_empty() || model.num_advertisers() == 0 {
        return Err(SimError::Empty("keyword model"));
    }
    let bidders: Vec<Vec<KeywordBid>> = model.keywords.iter().map(|k| k.bids.clone()).collect();
    let max_bid = bidders.iter().flatten().map(|b| b.bid).fold(0.0, f64::max);
    Ok(KeywordRule {
        k: model.num_advertisers(),
        bidders,
        max_bid,
    })
}

impl AuctionRule for KeywordRule {
    type Payload = usize;

    fn num_campaigns(&self) -> usize {
        self.k
    }

    fn max_increment(&self) -> f64 {
        self.max_bid
    }

    fn spend(&self, event: &Event<usize>, active: &ActivationVector, out: &mut [f64]) {
        out.fill(0.0);
        let Some(list) = self.bidders.get(event.payload) else {
            return;
        };
        if let Some(b) = list.iter().find(|b| active.is_active(b.advertiser)) {
            out[b.advertiser] = b.bid;
        }
    }
}

/// Uniform budget such that the oracle caps `target_fraction +/- tolerance`
/// of the advertisers.
pub fn calibrate_uniform_budget<R: AuctionRule>(
    events: &[Event<R::Payload>],
    rule: &R,
    target_fraction: f64,
    tolerance: f64,
) -> Result<Calibration> {
    let k = rule.num_campaigns();
    let hi = events.len() as f64 * rule.max_increment() * 1.01;
    calibrate_scale(events, rule, |b| Ok(vec![b; k]), target_fraction, tolerance, (hi * 1e-9, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub keywords: usize,
    pub advertisers: usize,
    pub days: u32,
    pub min_bidders: usize,
    pub max_bidders: usize,
    pub seed: u64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            keywords: 1000,
            advertisers: 60,
            days: 2,
            min_bidders: 2,
            max_bidders: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayManifest {
    pub day: u32,
    pub keywords: usize,
    pub advertisers: usize,
    pub records: usize,
    pub total_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub config: FixtureConfig,
    pub keywords: usize,
    pub advertisers: usize,
    pub records: usize,
    pub days: Vec<DayManifest>,
    /// Per day, per keyword id: total logged count.
    pub keyword_counts: Vec<Vec<(String, u64)>>,
}

/// Synthetic keyword log. Keyword popularity, advertiser size and base bids
/// are log-normal; larger advertisers bid on more keywords and bid higher.
/// Every advertiser bids on at least one keyword; each (keyword, advertiser)
/// pair logs one or two bids per day around its base bid.
pub fn generate_fixture(cfg: &FixtureConfig) -> Result<(BidLog, FixtureManifest)> {
    if cfg.keywords == 0 || cfg.advertisers == 0 || cfg.days == 0 {
        return Err(invalid("fixture", "keywords, advertisers and days must be positive"));
    }
    if cfg.min_bidders == 0 || cfg.min_bidders > cfg.max_bidders || cfg.max_bidders > cfg.advertisers {
        return Err(invalid("fixture", "need 1 <= min_bidders <= max_bidders <= advertisers"));
    }
    let mut r = rng(derive_seed(cfg.seed, tags::FIXTURE));
    let popularity = LogNormal::new(0.0, 1.0).expect("valid");
    let base_bid = LogNormal::new(0.0, 0.5).expect("valid");
    let size_dist = LogNormal::new(0.0, 1.2).expect("valid");
    let sizes: Vec<f64> = (0..cfg.advertisers).map(|_| size_dist.sample(&mut r)).collect();
    let mut log = BidLog {
        records: Vec::new(),
        advertiser_ids: (0..cfg.advertisers).map(|a| format!("adv{a:04}")).collect(),
        keyword_ids: (0..cfg.keywords).map(|w| format!("kw{w:05}")).collect(),
    };
    let mut structure = Vec::with_capacity(cfg.keywords);
    for w in 0..cfg.keywords {
        let pop: f64 = popularity.sample(&mut r);
        let m = r.random_range(cfg.min_bidders..=cfg.max_bidders);
        let mut set: Vec<usize> = sample_weighted(&mut r, cfg.advertisers, |a| sizes[a], m)
            .map_err(|e| invalid("fixture", e.to_string()))?
            .into_vec();
        let anchor = w % cfg.advertisers;
        if !set.contains(&anchor) {
            set[0] = anchor;
        }
        set.sort_unstable();
        let bids: Vec<(usize, f64)> = set
            .into_iter()
            .map(|a| (a, base_bid.sample(&mut r) * sizes[a].sqrt()))
            .collect();
        structure.push((pop, bids));
    }
    for day in 1..=cfg.days {
        for (w, (pop, bids)) in structure.iter().enumerate() {
            for &(a, b) in bids {
                for _ in 0..r.random_range(1..=2) {
                    let bid = b * r.random_range(0.8..1.2);
                    let count = ((pop * 10.0 * r.random_range(0.5..1.5)).ceil() as u64).max(1);
                    log.records.push(BidRecord {
                        day,
                        advertiser: a,
                        keyword: w,
                        bid,
                        count,
                    });
                }
            }
        }
    }
    let log = first_appearance_order(log);
    let manifest = manifest_for(cfg, &log);
    Ok((log, manifest))
}

/// Renumbers ids the way [`BidLog::read`] assigns them.
fn first_appearance_order(log: BidLog) -> BidLog {
    let (mut adv, mut kw) = (HashMap::new(), HashMap::new());
    let mut out = BidLog::default();
    for r in &log.records {
        let advertiser = intern(&mut adv, &mut out.advertiser_ids, log.advertiser_ids[r.advertiser].clone());
        let keyword = intern(&mut kw, &mut out.keyword_ids, log.keyword_ids[r.keyword].clone());
        out.records.push(BidRecord { advertiser, keyword, ..*r });
    }
    out
}

fn manifest_for(cfg: &FixtureConfig, log: &BidLog) -> FixtureManifest {
    let mut days = Vec::new();
    let mut keyword_counts = Vec::new();
    for day in log.days() {
        let rows: Vec<&BidRecord> = log.records.iter().filter(|r| r.day == day).collect();
        let mut kw = vec![0u64; log.num_keywords()];
        let mut adv = vec![false; log.num_advertisers()];
        for r in &rows {
            kw[r.keyword] += r.count;
            adv[r.advertiser] = true;
        }
        days.push(DayManifest {
            day,
            keywords: kw.iter().filter(|&&c| c > 0).count(),
            advertisers: adv.iter().filter(|&&b| b).count(),
            records: rows.len(),
            total_count: kw.iter().sum(),
        });
        keyword_counts.push(
            kw.iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(w, &c)| (log.keyword_ids[w].clone(), c))
                .collect(),
        );
    }
    FixtureManifest {
        config: cfg.clone(),
        keywords: log.num_keywords(),
        advertisers: log.num_advertisers(),
        records: log.records.len(),
        days,
        keyword_counts,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DayShiftConfig {
    pub seed: u64,
    /// Initialisation is replaced by the day-1 capping times.
    pub estimator: EstimatorConfig,
    pub s2a: S2aConfig,
    /// Draw day 2 from the day-1 stream seed, so day 2 starts with the day-1
    /// events (and equals them when `n2 == n1` and the model is shared).
    pub shared_stream: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Campaigns included, by decreasing true spend.
    pub campaigns: usize,
    pub spend_share: f64,
    /// Weighted error accumulated over the included campaigns.
    pub weighted_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub predicted: Vec<f64>,
    pub spend_weighted_error: f64,
    pub relative_errors: Vec<Option<f64>>,
    pub curve: Vec<CurvePoint>,
}

impl MethodResult {
    fn score(method: &str, predicted: Vec<f64>, truth: &[f64]) -> Result<Self> {
        let (spend_weighted_error, _) = spend_weighted_error(truth, &predicted)?;
        let relative_errors = truth.iter().zip(&predicted).map(|(&s, &e)| relative_error(s, e)).collect();
        let total: f64 = truth.iter().sum();
        let mut order: Vec<usize> = (0..truth.len()).filter(|&c| truth[c] != 0.0).collect();
        order.sort_by(|&a, &b| truth[b].total_cmp(&truth[a]).then(a.cmp(&b)));
        let (mut share, mut err) = (0.0, 0.0);
        let curve = order
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                share += truth[c] / total;
                err += (predicted[c] - truth[c]).abs() / total;
                CurvePoint {
                    campaigns: i + 1,
                    spend_share: share,
                    weighted_error: err,
                }
            })
            .collect();
        Ok(Self {
            method: method.to_string(),
            predicted,
            spend_weighted_error,
            relative_errors,
            curve,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayShiftReport {
    pub n1: usize,
    pub n2: usize,
    pub budgets: Vec<f64>,
    pub day1: Trajectory,
    pub day2: Trajectory,
    pub warm_start: Vec<f64>,
    /// As-is, rescaled, sort2aggregate.
    pub methods: Vec<MethodResult>,
    pub zero_spend_excluded: usize,
    pub s2a_checks_pass: bool,
}

impl DayShiftReport {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub const AS_IS: &str = "as-is";
pub const RESCALED: &str = "rescaled";
pub const SORT2AGGREGATE: &str = "sort2aggregate";

/// Predicts day-2 spends from day 1 three ways and scores them against the
/// day-2 oracle. Day 2 draws `n2` events from `day2` when given, else from
/// the day-1 model.
pub fn day_shift_experiment(
    model_day1: &KeywordModel,
    day2: Option<&KeywordModel>,
    n1: usize,
    n2: usize,
    budgets: &[f64],
    cfg: &DayShiftConfig,
) -> Result<DayShiftReport> {
    let model_day2 = day2.unwrap_or(model_day1);
    if model_day2.num_advertisers() != model_day1.num_advertisers() {
        return Err(SimError::DimensionMismatch {
            expected: model_day1.num_advertisers(),
            got: model_day2.num_advertisers(),
        });
    }
    let campaigns = CampaignSet::new(budgets.to_vec())?;
    let rule1 = keyword_first_price_rule(model_day1)?;
    let rule2 = keyword_first_price_rule(model_day2)?;
    let events1 = sample_event_stream(model_day1, n1, derive_seed(cfg.seed, 1))?;
    let tag2 = if cfg.shared_stream { 1 } else { 2 };
    let events2 = sample_event_stream(model_day2, n2, derive_seed(cfg.seed, tag2))?;
    let day1 = simulate_sequential(&events1, &campaigns, &rule1, Default::default())?;
    let day2 = simulate_sequential(&events2, &campaigns, &rule2, Default::default())?;

    let warm: Vec<f64> = day1
        .capping_times
        .iter()
        .map(|t| t.map_or(1.0, |t| t as f64 / n1 as f64))
        .collect();
    let mut est = cfg.estimator.clone();
    est.init = PiInit::WarmStart(PiVector::new(warm.clone())?);
    let s2a: AggregateReport = sort2aggregate(&events2, &campaigns, &rule2, &est, &cfg.s2a)?;

    let truth = &day2.final_spends;
    let ratio = n2 as f64 / n1 as f64;
    let rescaled = day1
        .final_spends
        .iter()
        .zip(budgets)
        .map(|(s, b)| (s * ratio).min(*b))
        .collect();
    let methods = vec![
        MethodResult::score(AS_IS, day1.final_spends.clone(), truth)?,
        MethodResult::score(RESCALED, rescaled, truth)?,
        MethodResult::score(SORT2AGGREGATE, s2a.trajectory.final_spends.clone(), truth)?,
    ];
    Ok(DayShiftReport {
        n1,
        n2,
        budgets: budgets.to_vec(),
        zero_spend_excluded: truth.iter().filter(|s| **s == 0.0).count(),
        s2a_checks_pass: s2a.all_checks_pass(),
        day1,
        day2,
        warm_start: warm,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG: &str = "day,advertiser_id,keyword_id,bid,count\n\
        1,a,k1,10,3\n\
        1,a,k1,20,3\n\
        1,b,k1,12,2\n\
        1,b,k2,5,4\n\
        2,c,k2,7,1\n";

    fn log() -> BidLog {
        BidLog::read(LOG.as_bytes(), "mem").unwrap()
    }

    #[test]
    fn parses_and_maps_ids() {
        let l = log();
        assert_eq!(l.records.len(), 5);
        assert_eq!(l.advertiser_ids, vec!["a", "b", "c"]);
        assert_eq!(l.keyword_ids, vec!["k1", "k2"]);
        assert_eq!(l.days(), vec![1, 2]);
    }

    #[test]
    fn empty_file_is_empty_log() {
        let l = BidLog::read("".as_bytes(), "empty").unwrap();
        assert!(l.records.is_empty());
        assert!(build_keyword_model(&l, 1).is_err());
    }

    #[test]
    fn bad_rows_report_line() {
        let text = "day,advertiser_id,keyword_id,bid,count\n1,a,k,1.0,1\n1,a,k,-2,1\n";
        match BidLog::read(text.as_bytes(), "x") {
            Err(SimError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "day,advertiser_id,keyword_id,bid,count\n1,a,k,abc,1\n";
        assert!(matches!(BidLog::read(text.as_bytes(), "x"), Err(SimError::Parse { line: 2, .. })));
        let text = "day,advertiser_id,keyword_id,bid,count\n1,a,k,1.0,0\n";
        assert!(BidLog::read(text.as_bytes(), "x").is_err());
    }

    #[test]
    fn averaging_and_frequencies() {
        let m = build_keyword_model(&log(), 1).unwrap();
        assert_eq!(m.keywords.len(), 2);
        let k1 = &m.keywords[0];
        assert_eq!(k1.frequency, 8.0 / 12.0);
        assert_eq!(k1.bids[0], KeywordBid { advertiser: 0, bid: 15.0 });
        assert_eq!(k1.bids[1], KeywordBid { advertiser: 1, bid: 12.0 });
        let total: f64 = m.keywords.iter().map(|k| k.frequency).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let d2 = build_keyword_model(&log(), 2).unwrap();
        assert_eq!(d2.keywords.len(), 1);
        assert_eq!(d2.keywords[0].frequency, 1.0);
        assert_eq!(d2.num_advertisers(), 3);
        assert!(build_keyword_model(&log(), 9).is_err());
    }

    #[test]
    fn model_json_roundtrip_is_exact() {
        let (l, _) = generate_fixture(&FixtureConfig {
            keywords: 50,
            advertisers: 10,
            ..Default::default()
        })
        .unwrap();
        let m = build_keyword_model(&l, 1).unwrap();
        assert_eq!(KeywordModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn log_csv_roundtrip() {
        let (l, _) = generate_fixture(&FixtureConfig {
            keywords: 30,
            advertisers: 5,
            max_bidders: 4,
            ..Default::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        l.write(&mut buf).unwrap();
        assert_eq!(BidLog::read(buf.as_slice(), "mem").unwrap(), l);
    }

    #[test]
    fn fixture_matches_manifest() {
        let (l, man) = generate_fixture(&FixtureConfig::default()).unwrap();
        assert_eq!(man.keywords, 1000);
        assert_eq!(man.advertisers, 60);
        assert_eq!(l.num_keywords(), man.keywords);
        assert_eq!(l.num_advertisers(), man.advertisers);
        for (d, counts) in man.days.iter().zip(&man.keyword_counts) {
            assert_eq!(d.advertisers, 60);
            let m = build_keyword_model(&l, d.day).unwrap();
            assert_eq!(m.keywords.len(), d.keywords);
            for (entry, (id, c)) in m.keywords.iter().zip(counts) {
                assert_eq!(&entry.id, id);
                assert_eq!(entry.frequency, *c as f64 / d.total_count as f64);
            }
        }
    }

    #[test]
    fn sampled_frequencies_within_multinomial_bounds() {
        let m = build_keyword_model(&log(), 1).unwrap();
        let n = 20_000;
        let ev = sample_event_stream(&m, n, 3).unwrap();
        for (w, k) in m.keywords.iter().enumerate() {
            let hits = ev.iter().filter(|e| e.payload == w).count() as f64;
            let sd = (n as f64 * k.frequency * (1.0 - k.frequency)).sqrt();
            assert!((hits - n as f64 * k.frequency).abs() <= 3.0 * sd);
        }
        assert_eq!(sample_event_stream(&m, 1, 0).unwrap().len(), 1);
        assert_eq!(sample_event_stream(&m, 50, 8).unwrap(), sample_event_stream(&m, 50, 8).unwrap());
    }

    #[test]
    fn keyword_rule_winner_and_runner_up() {
        let m = build_keyword_model(&log(), 1).unwrap();
        let rule = keyword_first_price_rule(&m).unwrap();
        assert_eq!(rule.max_increment(), 15.0);
        let mut out = vec![0.0; 3];
        let e = Event { id: 0, payload: 0 };
        rule.spend(&e, &ActivationVector::all_active(3), &mut out);
        assert_eq!(out, vec![15.0, 0.0, 0.0]);
        rule.spend(&e, &ActivationVector::from_bits(vec![false, true, true]), &mut out);
        assert_eq!(out, vec![0.0, 12.0, 0.0]);
        rule.spend(&e, &ActivationVector::from_bits(vec![false, false, true]), &mut out);
        assert_eq!(out, vec![0.0; 3]);
        rule.spend(&Event { id: 0, payload: 1 }, &ActivationVector::all_active(3), &mut out);
        assert_eq!(out, vec![0.0, 5.0, 0.0]);
        rule.spend(&Event { id: 0, payload: 99 }, &ActivationVector::all_active(3), &mut out);
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn same_volume_as_is_is_exact() {
        let (l, _) = generate_fixture(&FixtureConfig {
            keywords: 100,
            advertisers: 10,
            ..Default::default()
        })
        .unwrap();
        let m = build_keyword_model(&l, 1).unwrap();
        let cfg = DayShiftConfig {
            shared_stream: true,
            ..Default::default()
        };
        let r = day_shift_experiment(&m, None, 2000, 2000, &[50.0; 10], &cfg).unwrap();
        assert_eq!(r.day1, r.day2);
        assert_eq!(r.method(AS_IS).unwrap().spend_weighted_error, 0.0);
        assert_eq!(r.warm_start.len(), 10);
    }

    #[test]
    fn uncapped_rescaling_is_close() {
        let (l, _) = generate_fixture(&FixtureConfig {
            keywords: 200,
            advertisers: 8,
            ..Default::default()
        })
        .unwrap();
        let m = build_keyword_model(&l, 1).unwrap();
        let r = day_shift_experiment(&m, None, 20_000, 30_000, &[1e9; 8], &DayShiftConfig::default()).unwrap();
        assert!(r.day2.capping_order.is_empty());
        let b = r.method(RESCALED).unwrap();
        assert!(b.spend_weighted_error < 0.05, "{}", b.spend_weighted_error);
        assert_eq!(r.method(SORT2AGGREGATE).unwrap().spend_weighted_error, 0.0);
    }
}
