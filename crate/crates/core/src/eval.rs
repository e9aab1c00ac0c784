//! Confusion counts, sensitivity / specificity / PPV / NPV, ROC curves and AUC.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("scores contain NaN"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::validation("labels must be 0 or 1"));
    }
    Ok(())
}

/// Predicts positive iff `score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionCounts> {
    check_inputs(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::validation("confusion needs at least one score"));
    }
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// A ratio that is undefined when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio(pub Option<f64>);

impl Ratio {
    pub fn of(num: u64, den: u64) -> Self {
        Ratio((den > 0).then(|| num as f64 / den as f64))
    }

    pub fn value(self) -> Option<f64> {
        self.0
    }

    pub fn is_undefined(self) -> bool {
        self.0.is_none()
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.3}"),
            None => f.write_str("N/A"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: Ratio,
    pub specificity: Ratio,
    pub ppv: Ratio,
    pub npv: Ratio,
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    Metrics {
        sensitivity: Ratio::of(c.tp, c.tp + c.fn_),
        specificity: Ratio::of(c.tn, c.tn + c.fp),
        ppv: Ratio::of(c.tp, c.tp + c.fp),
        npv: Ratio::of(c.tn, c.tn + c.fn_),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are predicted positive; `+inf` for the origin.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

impl RocPoint {
    pub fn sensitivity(&self) -> f64 {
        self.tpr
    }

    pub fn specificity(&self) -> f64 {
        1.0 - self.fpr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve swept over distinct scores in descending order; tied scores move
/// together as one diagonal step. The trapezoidal area is accumulated in
/// integers, so it equals the rank statistic with ties counted one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::validation("AUC is undefined unless both classes are present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area times n_pos * n_neg
    let mut doubled_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        doubled_area += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    let auc = doubled_area as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocCurve { points, auc })
}

/// AUC only; `None` when one class is absent.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<Option<f64>> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Ok(None);
    }
    roc_auc(scores, labels).map(|c| Some(c.auc))
}

impl RocCurve {
    /// Rows `threshold<TAB>sensitivity<TAB>specificity<TAB>fpr`.
    pub fn write_tsv<W: Write>(&self, mut w: W, extra_header: &[(&str, String)]) -> std::io::Result<()> {
        for (k, v) in extra_header {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "# auc={}", self.auc)?;
        writeln!(w, "threshold\tsensitivity\tspecificity\tfpr")?;
        for p in &self.points {
            writeln!(w, "{}\t{}\t{}\t{}", p.threshold, p.sensitivity(), p.specificity(), p.fpr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub auc: Option<f64>,
}

pub fn metrics_report(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport> {
    let counts = confusion(scores, labels, threshold)?;
    Ok(MetricsReport {
        threshold,
        counts,
        metrics: metrics(&counts),
        auc: auc(scores, labels)?,
    })
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.counts;
        let m = &self.metrics;
        writeln!(f, "threshold = {}", self.threshold)?;
        writeln!(f, "tp = {}, fp = {}, tn = {}, fn = {}", c.tp, c.fp, c.tn, c.fn_)?;
        writeln!(
            f,
            "sens = {}, spec = {}, ppv = {}, npv = {}",
            m.sensitivity, m.specificity, m.ppv, m.npv
        )?;
        match self.auc {
            Some(a) => writeln!(f, "auc = {a:.4}"),
            None => writeln!(f, "auc = N/A"),
        }
    }
}
