//! Evaluation quantities: rank agreement between predictions and true returns,
//! the true-return percentile of the surrogate's pick, per-round improvement
//! series, and steps-to-threshold on learning curves.

use thiserror::Error;

use crate::search::RoundTrace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
}

/// Spearman's rho. `degenerate` is set when either input is constant, in which
/// case `rho` is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    pub degenerate: bool,
}

/// Ranks starting at 1, tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricsError::TooShort { needed: 2, got: x.len() });
    }
    Ok(match pearson(&average_ranks(x), &average_ranks(y)) {
        Some(rho) => Spearman { rho, degenerate: false },
        None => Spearman {
            rho: 0.0,
            degenerate: true,
        },
    })
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Percentage of the pool whose true return strictly beats the candidate with
/// the highest prediction. 0 means the pick was (one of) the true best.
pub fn top1_percentile(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), truth.len()));
    }
    let chosen = argmax(pred).ok_or(MetricsError::TooShort { needed: 1, got: 0 })?;
    Ok(percentile_of(chosen, truth))
}

/// Percentile of `truth[index]` under the same strict-greater counting.
pub fn percentile_of(index: usize, truth: &[f64]) -> f64 {
    let better = truth.iter().filter(|&&t| t > truth[index]).count();
    100.0 * better as f64 / truth.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankReport {
    pub spearman: Spearman,
    pub top1_percentile: f64,
    pub pool_size: usize,
}

pub fn rank_report(pred: &[f64], truth: &[f64]) -> Result<RankReport, MetricsError> {
    Ok(RankReport {
        spearman: spearman(pred, truth)?,
        top1_percentile: top1_percentile(pred, truth)?,
        pool_size: pred.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    /// `y_n - y0` per inner iteration, where `y0` is the best initial-context return.
    pub deltas: Vec<f64>,
    /// Largest entry of `deltas`, or `None` for a round without inner iterations.
    pub best: Option<f64>,
}

pub fn improvement_series(trace: &RoundTrace) -> Improvement {
    let deltas: Vec<f64> = trace.iterations.iter().map(|it| it.delta).collect();
    let best = deltas.iter().copied().reduce(f64::max);
    Improvement { deltas, best }
}

/// First step whose value reaches `fraction * final`, where `final` is the last
/// value of the curve. Falls back to the last step if never reached.
pub fn steps_to_fraction(curve: &[(u64, f64)], fraction: f64) -> Result<u64, MetricsError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(MetricsError::BadFraction(fraction));
    }
    let &(last_step, final_value) = curve.last().ok_or(MetricsError::TooShort { needed: 1, got: 0 })?;
    let target = fraction * final_value;
    Ok(curve
        .iter()
        .find(|(_, v)| *v >= target)
        .map(|(s, _)| *s)
        .unwrap_or(last_step))
}
