//! Spearman rank correlation between per-pair metric values and binary human
//! labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::PairKey;
use crate::hallu_stats::DocFlags;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CorrelationError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two items, got {0}")]
    TooShort(usize),
    #[error("a series is constant; rank correlation is undefined")]
    DegenerateSeries,
    #[error("non-finite metric value for {0}")]
    NonFinite(PairKey),
    #[error("no metric value for {0}")]
    MissingScore(PairKey),
}

/// Ranks starting at 1, ties receiving the mean of the ranks they span.
pub fn rank_average(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn check_lengths(xs: &[f64], ys: &[f64]) -> Result<(), CorrelationError> {
    if xs.len() != ys.len() {
        return Err(CorrelationError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(CorrelationError::TooShort(xs.len()));
    }
    Ok(())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, CorrelationError> {
    check_lengths(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::DegenerateSeries);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the average-tie ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, CorrelationError> {
    check_lengths(xs, ys)?;
    pearson(&rank_average(xs), &rank_average(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Faithful,
    Factual,
}

impl LabelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelKind::Faithful => "faithful",
            LabelKind::Factual => "factual",
        }
    }
}

impl std::str::FromStr for LabelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "faithful" => Ok(LabelKind::Faithful),
            "factual" => Ok(LabelKind::Factual),
            other => Err(format!("unknown label kind {other:?} (faithful|factual)")),
        }
    }
}

/// Binary human labels per pair.
///
/// Faithful labels cover every annotated pair. Factual labels exist only for
/// hallucinated pairs that carry a full set of verdicts.
pub fn human_labels(flags: &BTreeMap<PairKey, DocFlags>, kind: LabelKind) -> BTreeMap<PairKey, bool> {
    flags
        .iter()
        .filter_map(|(pair, f)| match kind {
            LabelKind::Faithful => Some((pair.clone(), f.faithful)),
            LabelKind::Factual => f.factual.map(|v| (pair.clone(), v)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedItem {
    pub pair: PairKey,
    pub metric: f64,
    pub label: bool,
}

/// Metric values aligned with human labels, one item per pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedSeries {
    pub items: Vec<PairedItem>,
}

impl PairedSeries {
    /// Aligns on the labelled pairs; every labelled pair needs a metric value.
    pub fn align(
        metric: &BTreeMap<PairKey, f64>,
        labels: &BTreeMap<PairKey, bool>,
    ) -> Result<Self, CorrelationError> {
        let items = labels
            .iter()
            .map(|(pair, &label)| {
                let &value = metric
                    .get(pair)
                    .ok_or_else(|| CorrelationError::MissingScore(pair.clone()))?;
                if !value.is_finite() {
                    return Err(CorrelationError::NonFinite(pair.clone()));
                }
                Ok(PairedItem {
                    pair: pair.clone(),
                    metric: value,
                    label,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PairedSeries { items })
    }

    pub fn spearman(&self) -> Result<f64, CorrelationError> {
        let xs: Vec<f64> = self.items.iter().map(|i| i.metric).collect();
        let ys: Vec<f64> = self.items.iter().map(|i| f64::from(u8::from(i.label))).collect();
        spearman(&xs, &ys)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Pooled,
    PerSystem,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    /// `"all"` when pooled, otherwise the system id.
    pub scope: String,
    pub n: usize,
    pub abs_rho: f64,
}

/// |Spearman| between a metric and human labels, pooled or per system.
pub fn metric_correlations(
    metric: &BTreeMap<PairKey, f64>,
    labels: &BTreeMap<PairKey, bool>,
    pooling: Pooling,
) -> Result<Vec<CorrelationRow>, CorrelationError> {
    let row = |scope: String, labels: &BTreeMap<PairKey, bool>| {
        let series = PairedSeries::align(metric, labels)?;
        Ok(CorrelationRow {
            scope,
            n: series.items.len(),
            abs_rho: series.spearman()?.abs(),
        })
    };
    match pooling {
        Pooling::Pooled => Ok(vec![row("all".to_string(), labels)?]),
        Pooling::PerSystem => {
            let systems: BTreeSet<&str> = labels.keys().map(|p| p.system_id.as_str()).collect();
            systems
                .into_iter()
                .map(|s| {
                    let subset: BTreeMap<PairKey, bool> = labels
                        .iter()
                        .filter(|(p, _)| p.system_id == s)
                        .map(|(p, &l)| (p.clone(), l))
                        .collect();
                    row(s.to_string(), &subset)
                })
                .collect()
        }
    }
}
