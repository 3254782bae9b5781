//! Threshold-sweep evaluation of binary malignancy scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("the {0} set is empty")]
    EmptySet(&'static str),
    #[error("no scores to evaluate")]
    NoScores,
    #[error("every item failed; first error: {0}")]
    AllFailed(String),
    #[error("invalid score {score} for {item_id}")]
    InvalidScore { item_id: String, score: f64 },
    #[error("invalid threshold {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    Benign,
    Malignant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub item_id: String,
    pub truth: Truth,
    /// Malignancy probability.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub item_id: String,
    pub truth: Truth,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoredSet {
    pub scores: Vec<LabeledScore>,
    pub failures: Vec<ItemFailure>,
}

/// Score every item, in parallel. Failures are recorded per item; the call only
/// fails when a set is empty or nothing could be scored.
pub fn score_dataset<T, I, F>(benign: &[T], malignant: &[T], item_id: I, score: F) -> Result<ScoredSet, EvalError>
where
    T: Sync,
    I: Fn(&T) -> String + Sync,
    F: Fn(&T) -> Result<f64, String> + Sync,
{
    if benign.is_empty() {
        return Err(EvalError::EmptySet("benign"));
    }
    if malignant.is_empty() {
        return Err(EvalError::EmptySet("malignant"));
    }
    let items: Vec<(&T, Truth)> = benign
        .iter()
        .map(|t| (t, Truth::Benign))
        .chain(malignant.iter().map(|t| (t, Truth::Malignant)))
        .collect();
    let results: Vec<Result<LabeledScore, ItemFailure>> = items
        .par_iter()
        .map(|&(item, truth)| {
            let id = item_id(item);
            match score(item) {
                Ok(s) if s.is_finite() && (0.0..=1.0).contains(&s) => Ok(LabeledScore { item_id: id, truth, score: s }),
                Ok(s) => Err(ItemFailure { item_id: id, truth, error: format!("score {s} outside [0, 1]") }),
                Err(error) => Err(ItemFailure { item_id: id, truth, error }),
            }
        })
        .collect();
    let mut set = ScoredSet::default();
    for r in results {
        match r {
            Ok(s) => set.scores.push(s),
            Err(f) => set.failures.push(f),
        }
    }
    if set.scores.is_empty() {
        return Err(EvalError::AllFailed(set.failures[0].error.clone()));
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    /// Malignant iff score ≥ t.
    pub fn at(scores: &[LabeledScore], t: f64) -> Self {
        let mut c = Confusion::default();
        for s in scores {
            match (s.truth, s.score >= t) {
                (Truth::Malignant, true) => c.tp += 1,
                (Truth::Malignant, false) => c.fn_ += 1,
                (Truth::Benign, true) => c.fp += 1,
                (Truth::Benign, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub t: f64,
    #[serde(flatten)]
    pub counts: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub fpr: f64,
    pub tpr: f64,
    /// Metrics whose denominator was zero; they are reported as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

impl ThresholdMetrics {
    pub fn from_confusion(t: f64, c: Confusion) -> Self {
        let mut undefined = Vec::new();
        let mut ratio = |name: &str, num: usize, den: usize| {
            if den == 0 {
                undefined.push(name.to_string());
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio("precision", c.tp, c.tp + c.fp);
        let recall = ratio("recall", c.tp, c.tp + c.fn_);
        let specificity = ratio("specificity", c.tn, c.tn + c.fp);
        let accuracy = ratio("accuracy", c.tp + c.tn, c.total());
        let f1 = ratio("f1", 2 * c.tp, 2 * c.tp + c.fp + c.fn_);
        let fpr = ratio("fpr", c.fp, c.fp + c.tn);
        let tpr = ratio("tpr", c.tp, c.tp + c.fn_);
        Self { t, counts: c, precision, recall, specificity, accuracy, f1, fpr, tpr, undefined }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_items: usize,
    pub n_benign: usize,
    pub n_malignant: usize,
    pub per_threshold: Vec<ThresholdMetrics>,
    /// One point per distinct score, by decreasing threshold, from (0,0) to (1,1).
    pub roc_points: Vec<RocPoint>,
    pub pr_points: Vec<PrPoint>,
    pub roc_auc: f64,
    #[serde(default)]
    pub failures: Vec<ItemFailure>,
}

/// 0.00, 0.01, …, 1.00.
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

fn validate_scores(scores: &[LabeledScore]) -> Result<(), EvalError> {
    if scores.is_empty() {
        return Err(EvalError::NoScores);
    }
    if let Some(s) = scores.iter().find(|s| !(s.score.is_finite() && (0.0..=1.0).contains(&s.score))) {
        return Err(EvalError::InvalidScore { item_id: s.item_id.clone(), score: s.score });
    }
    Ok(())
}

/// Exact ROC: the curve through every distinct score used as a threshold.
pub fn roc_curve(scores: &[LabeledScore]) -> Vec<RocPoint> {
    let mut sorted: Vec<&LabeledScore> = scores.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let pos = scores.iter().filter(|s| s.truth == Truth::Malignant).count();
    let neg = scores.len() - pos;
    let rate = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        while i < sorted.len() && sorted[i].score == t {
            match sorted[i].truth {
                Truth::Malignant => tp += 1,
                Truth::Benign => fp += 1,
            }
            i += 1;
        }
        points.push(RocPoint { threshold: t, fpr: rate(fp, neg), tpr: rate(tp, pos) });
    }
    points
}

/// Precision–recall pairs at every distinct score threshold.
pub fn pr_curve(scores: &[LabeledScore]) -> Vec<PrPoint> {
    let mut thresholds: Vec<f64> = scores.iter().map(|s| s.score).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    thresholds
        .into_iter()
        .filter_map(|t| {
            let m = ThresholdMetrics::from_confusion(t, Confusion::at(scores, t));
            (m.counts.tp + m.counts.fp > 0).then_some(PrPoint { threshold: t, recall: m.recall, precision: m.precision })
        })
        .collect()
}

/// Trapezoidal area under (fpr, tpr) points; (0,0) and (1,1) are added when absent.
pub fn roc_auc(points: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    if !pts.contains(&(0.0, 0.0)) {
        pts.push((0.0, 0.0));
    }
    if !pts.contains(&(1.0, 1.0)) {
        pts.push((1.0, 1.0));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

pub fn sweep(scores: &[LabeledScore], thresholds: &[f64]) -> Result<EvalReport, EvalError> {
    validate_scores(scores)?;
    if let Some(&t) = thresholds.iter().find(|t| !t.is_finite()) {
        return Err(EvalError::InvalidThreshold(t));
    }
    let per_threshold =
        thresholds.iter().map(|&t| ThresholdMetrics::from_confusion(t, Confusion::at(scores, t))).collect();
    let roc_points = roc_curve(scores);
    let auc = roc_auc(&roc_points.iter().map(|p| (p.fpr, p.tpr)).collect::<Vec<_>>());
    let n_malignant = scores.iter().filter(|s| s.truth == Truth::Malignant).count();
    Ok(EvalReport {
        n_items: scores.len(),
        n_benign: scores.len() - n_malignant,
        n_malignant,
        per_threshold,
        roc_points,
        pr_points: pr_curve(scores),
        roc_auc: auc,
        failures: Vec::new(),
    })
}

/// Sweep a scored set over the default grid and attach its failures.
pub fn evaluate(set: &ScoredSet) -> Result<EvalReport, EvalError> {
    let mut report = sweep(&set.scores, &default_thresholds())?;
    report.failures = set.failures.clone();
    Ok(report)
}

/// Per-threshold table as CSV.
pub fn per_threshold_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "tp", "fp", "tn", "fn", "precision", "recall", "specificity", "accuracy", "f1", "fpr", "tpr"])
        .expect("in-memory write");
    for m in &report.per_threshold {
        let c = m.counts;
        w.write_record(
            [m.t, c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64, m.precision, m.recall, m.specificity, m.accuracy, m.f1, m.fpr, m.tpr]
                .iter()
                .map(f64::to_string),
        )
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ls(id: usize, truth: Truth, score: f64) -> LabeledScore {
        LabeledScore { item_id: format!("i{id}"), truth, score }
    }

    fn separated() -> Vec<LabeledScore> {
        (0..10)
            .map(|i| ls(i, Truth::Benign, 0.02 * i as f64))
            .chain((0..10).map(|i| ls(100 + i, Truth::Malignant, 0.75 + 0.02 * i as f64)))
            .collect()
    }

    #[test]
    fn perfect_separation() {
        let r = sweep(&separated(), &default_thresholds()).unwrap();
        let m = &r.per_threshold[50];
        assert_eq!(m.t, 0.5);
        assert_eq!((m.precision, m.recall, m.accuracy, m.fpr), (1.0, 1.0, 1.0, 0.0));
        assert_eq!(r.roc_auc, 1.0);
        let at0 = &r.per_threshold[0];
        assert_eq!((at0.recall, at0.specificity), (1.0, 0.0));
    }

    #[test]
    fn four_item_fixture() {
        let s = vec![ls(0, Truth::Malignant, 0.9), ls(1, Truth::Benign, 0.6), ls(2, Truth::Benign, 0.1), ls(3, Truth::Malignant, 0.2)];
        let r = sweep(&s, &[0.5]).unwrap();
        let m = &r.per_threshold[0];
        assert_eq!(m.counts, Confusion { tp: 1, fp: 1, tn: 1, fn_: 1 });
        assert_eq!((m.precision, m.recall, m.accuracy, m.f1), (0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn threshold_is_inclusive() {
        let s = vec![ls(0, Truth::Malignant, 0.5), ls(1, Truth::Benign, 0.49)];
        let m = &sweep(&s, &[0.5]).unwrap().per_threshold[0];
        assert_eq!(m.counts.tp, 1);
        assert_eq!(m.counts.fp, 0);
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let s = vec![ls(0, Truth::Benign, 0.3), ls(1, Truth::Benign, 0.4)];
        let r = sweep(&s, &[0.9]).unwrap();
        let m = &r.per_threshold[0];
        assert_eq!(m.precision, 0.0);
        assert!(m.undefined.contains(&"precision".to_string()));
        assert!(m.undefined.contains(&"recall".to_string()));
        assert!(!m.undefined.contains(&"specificity".to_string()));
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("NaN"));
    }

    #[test]
    fn auc_trapezoid_cases() {
        assert_eq!(roc_auc(&[(0.0, 0.0), (1.0, 1.0)]), 0.5);
        assert_eq!(roc_auc(&[]), 0.5);
        assert_eq!(roc_auc(&[(0.0, 1.0)]), 1.0);
        assert!((roc_auc(&[(0.5, 0.5)]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn random_scores_give_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<LabeledScore> = (0..20_000)
            .map(|i| ls(i, if rng.gen_bool(0.5) { Truth::Malignant } else { Truth::Benign }, rng.gen::<f64>()))
            .collect();
        let auc = sweep(&s, &default_thresholds()).unwrap().roc_auc;
        assert!((auc - 0.5).abs() <= 0.05, "{auc}");
    }

    #[test]
    fn auc_matches_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s: Vec<LabeledScore> = (0..300)
            .map(|i| {
                let truth = if i % 3 == 0 { Truth::Malignant } else { Truth::Benign };
                let base = if truth == Truth::Malignant { 0.2 } else { 0.0 };
                ls(i, truth, ((base + rng.gen::<f64>() * 0.8) * 20.0).round() / 20.0)
            })
            .collect();
        // Mann–Whitney statistic with half credit for ties
        let (pos, neg): (Vec<_>, Vec<_>) = s.iter().partition(|x| x.truth == Truth::Malignant);
        let mut wins = 0.0;
        for p in &pos {
            for n in &neg {
                wins += if p.score > n.score { 1.0 } else if p.score == n.score { 0.5 } else { 0.0 };
            }
        }
        let expected = wins / (pos.len() * neg.len()) as f64;
        let auc = sweep(&s, &[0.5]).unwrap().roc_auc;
        assert!((auc - expected).abs() < 1e-12, "{auc} vs {expected}");
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<LabeledScore> = (0..200)
            .map(|i| ls(i, if rng.gen_bool(0.4) { Truth::Malignant } else { Truth::Benign }, rng.gen::<f64>()))
            .collect();
        let t: Vec<LabeledScore> = s.iter().map(|x| LabeledScore { score: x.score.powi(5), ..x.clone() }).collect();
        let a = sweep(&s, &default_thresholds()).unwrap().roc_auc;
        let b = sweep(&t, &default_thresholds()).unwrap().roc_auc;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn curves_are_monotone_and_counts_add_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<LabeledScore> = (0..150)
            .map(|i| ls(i, if rng.gen_bool(0.5) { Truth::Malignant } else { Truth::Benign }, rng.gen::<f64>()))
            .collect();
        let r = sweep(&s, &default_thresholds()).unwrap();
        assert!(r.per_threshold.iter().all(|m| m.counts.total() == s.len()));
        assert!(r.per_threshold.windows(2).all(|w| w[1].recall <= w[0].recall && w[1].specificity >= w[0].specificity));
        assert!(r.roc_points.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));
        let last = r.roc_points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn metrics_match_independent_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s: Vec<LabeledScore> = (0..80)
            .map(|i| ls(i, if rng.gen_bool(0.3) { Truth::Malignant } else { Truth::Benign }, rng.gen::<f64>()))
            .collect();
        for m in sweep(&s, &default_thresholds()).unwrap().per_threshold {
            let (tp, fp, tn, fnn) = (m.counts.tp as f64, m.counts.fp as f64, m.counts.tn as f64, m.counts.fn_ as f64);
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let r = if tp + fnn > 0.0 { tp / (tp + fnn) } else { 0.0 };
            let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            assert!((m.precision - p).abs() < 1e-12);
            assert!((m.recall - r).abs() < 1e-12);
            assert!((m.f1 - f1).abs() < 1e-12);
            assert!((m.accuracy - (tp + tn) / 80.0).abs() < 1e-12);
            assert!((m.fpr - (1.0 - m.specificity)).abs() < 1e-12 || tn + fp == 0.0);
        }
    }

    #[test]
    fn score_dataset_records_failures() {
        let benign = vec![1, 2, 3];
        let malignant = vec![10, 11];
        let set = score_dataset(&benign, &malignant, |i| format!("img{i}"), |&i| {
            if i == 2 {
                Err("decode failed".into())
            } else {
                Ok(if i >= 10 { 0.9 } else { 0.1 })
            }
        })
        .unwrap();
        assert_eq!(set.scores.len(), 4);
        assert_eq!(set.failures, vec![ItemFailure { item_id: "img2".into(), truth: Truth::Benign, error: "decode failed".into() }]);
        let report = evaluate(&set).unwrap();
        assert_eq!(report.n_items, 4);
        assert_eq!(report.failures.len(), 1);

        let constant = score_dataset(&benign, &malignant, |i| i.to_string(), |_| Ok(0.5)).unwrap();
        assert!(constant.scores.iter().all(|s| s.score == 0.5));
        assert_eq!(score_dataset(&[], &malignant, |i: &i32| i.to_string(), |_| Ok(0.5)).unwrap_err(), EvalError::EmptySet("benign"));
        assert!(matches!(
            score_dataset(&benign, &malignant, |i| i.to_string(), |_| Err("x".into())),
            Err(EvalError::AllFailed(_))
        ));
    }

    #[test]
    fn csv_export_has_all_rows() {
        let r = sweep(&separated(), &default_thresholds()).unwrap();
        let csv = per_threshold_csv(&r);
        assert_eq!(csv.lines().count(), 102);
        assert!(csv.starts_with("t,tp,fp,tn,fn,"));
    }
}
