//! Surrogate models fitted fresh on each round's context set.
//!
//! A [`SurrogateKind`] is fitted on a [`ContextSet`] and yields a [`Predictor`]
//! over subspace coordinates. The built-in kinds are an inverse-distance-weighted
//! interpolator, a ridge regressor, an "oracle" that queries the true objective
//! (for analysis only), and a remote model reached over the newline-delimited
//! JSON protocol in [`remote`].

mod idw;
pub mod remote;
mod ridge;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::objectives::Objective;
use crate::subspace::SubspaceBasis;

pub use idw::{IdwConfig, IdwModel};
pub use remote::{RemoteClient, RemoteError, RemoteSurrogate, Transport};
pub use ridge::RidgeModel;

/// Floor applied to the target standard deviation during normalization.
pub const MIN_TARGET_SCALE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("context set is empty")]
    EmptyContext,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("linear system is singular")]
    Singular,
    #[error("remote surrogate: {0}")]
    Remote(#[from] RemoteError),
    #[error("objective evaluation failed: {0}")]
    Objective(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextEntry {
    pub z: Vec<f64>,
    pub y: f64,
}

/// Append-only list of subspace coordinates with their true returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextSet {
    dim: usize,
    entries: Vec<ContextEntry>,
}

impl ContextSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    pub fn push(&mut self, z: Vec<f64>, y: f64) -> Result<(), SurrogateError> {
        if z.len() != self.dim {
            return Err(SurrogateError::DimensionMismatch {
                expected: self.dim,
                actual: z.len(),
            });
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(SurrogateError::NonFinite("context coordinates"));
        }
        if !y.is_finite() {
            return Err(SurrogateError::NonFinite("context target"));
        }
        self.entries.push(ContextEntry { z, y });
        Ok(())
    }

    /// Index of the highest return, earliest entry on ties.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            match best {
                Some(b) if self.entries[b].y >= e.y => {}
                _ => best = Some(i),
            }
        }
        best
    }

    pub fn best(&self) -> Option<&ContextEntry> {
        self.best_index().map(|i| &self.entries[i])
    }

    pub fn targets(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.y).collect()
    }

    /// Collapses entries with identical coordinates into one, averaging their
    /// targets. Order of first occurrence is kept.
    pub fn merged(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(self.entries.len());
        let mut sums: Vec<(f64, usize)> = Vec::with_capacity(self.entries.len());
        let mut conflicting = 0usize;
        for e in &self.entries {
            match xs.iter().position(|x| x == &e.z) {
                Some(i) => {
                    if sums[i].0 / sums[i].1 as f64 != e.y {
                        conflicting += 1;
                    }
                    sums[i].0 += e.y;
                    sums[i].1 += 1;
                }
                None => {
                    xs.push(e.z.clone());
                    sums.push((e.y, 1));
                }
            }
        }
        if conflicting > 0 {
            log::warn!("{conflicting} duplicate context coordinates with conflicting targets were averaged");
        }
        let ys = sums.into_iter().map(|(s, n)| s / n as f64).collect();
        (xs, ys)
    }
}

/// Affine map used to standardize targets before fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetStats {
    pub mean: f64,
    pub scale: f64,
}

impl TargetStats {
    /// Sample mean and population standard deviation, the latter clamped to
    /// [`MIN_TARGET_SCALE`].
    pub fn from_targets(ys: &[f64]) -> Result<Self, SurrogateError> {
        if ys.is_empty() {
            return Err(SurrogateError::EmptyContext);
        }
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        Ok(Self {
            mean,
            scale: var.sqrt().max(MIN_TARGET_SCALE),
        })
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.mean) / self.scale
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        self.mean + self.scale * y
    }
}

/// Returns a copy of `context` with standardized targets, plus the statistics
/// needed to map predictions back.
pub fn normalize_targets(context: &ContextSet) -> Result<(ContextSet, TargetStats), SurrogateError> {
    let stats = TargetStats::from_targets(&context.targets())?;
    let entries = context
        .entries
        .iter()
        .map(|e| ContextEntry {
            z: e.z.clone(),
            y: stats.normalize(e.y),
        })
        .collect();
    Ok((
        ContextSet {
            dim: context.dim,
            entries,
        },
        stats,
    ))
}

/// A fitted model. Predictions are a pure function of the fitted state.
pub trait Predictor {
    fn predict(&self, queries: &[Vec<f64>]) -> Result<Vec<f64>, SurrogateError>;
}

/// Predictions with non-finite outputs replaced by `-inf` so they never win an argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Screened {
    pub values: Vec<f64>,
    pub non_finite: usize,
}

pub fn screen_predictions(raw: Vec<f64>) -> Screened {
    let mut non_finite = 0;
    let values = raw
        .into_iter()
        .map(|v| {
            if v.is_finite() {
                v
            } else {
                non_finite += 1;
                f64::NEG_INFINITY
            }
        })
        .collect();
    Screened { values, non_finite }
}

/// What a surrogate may know about the round it is fitted in. Only the oracle
/// kind looks at it.
#[derive(Clone, Copy)]
pub struct RoundSpace<'a> {
    pub basis: &'a SubspaceBasis,
    pub objective: &'a dyn Objective,
}

#[derive(Clone)]
pub enum SurrogateKind {
    Idw(IdwConfig),
    Ridge { lambda: f64 },
    Remote(RemoteSurrogate),
    /// Noise-free true objective; used to bound what a perfect model could do.
    Oracle,
}

impl Default for SurrogateKind {
    fn default() -> Self {
        SurrogateKind::Idw(IdwConfig::default())
    }
}

impl fmt::Debug for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurrogateKind::Idw(c) => f.debug_tuple("Idw").field(c).finish(),
            SurrogateKind::Ridge { lambda } => f.debug_struct("Ridge").field("lambda", lambda).finish(),
            SurrogateKind::Remote(_) => f.write_str("Remote"),
            SurrogateKind::Oracle => f.write_str("Oracle"),
        }
    }
}

impl SurrogateKind {
    pub fn name(&self) -> &'static str {
        match self {
            SurrogateKind::Idw(_) => "idw",
            SurrogateKind::Ridge { .. } => "ridge",
            SurrogateKind::Remote(_) => "remote",
            SurrogateKind::Oracle => "oracle",
        }
    }

    pub fn fit<'a>(
        &'a self,
        context: &ContextSet,
        space: RoundSpace<'a>,
    ) -> Result<Box<dyn Predictor + 'a>, SurrogateError> {
        if context.is_empty() {
            return Err(SurrogateError::EmptyContext);
        }
        Ok(match self {
            SurrogateKind::Idw(cfg) => Box::new(IdwModel::fit(context, *cfg)?),
            SurrogateKind::Ridge { lambda } => Box::new(RidgeModel::fit(context, *lambda)?),
            SurrogateKind::Remote(remote) => Box::new(remote.fit(context)?),
            SurrogateKind::Oracle => Box::new(OracleModel { space }),
        })
    }
}

struct OracleModel<'a> {
    space: RoundSpace<'a>,
}

impl Predictor for OracleModel<'_> {
    fn predict(&self, queries: &[Vec<f64>]) -> Result<Vec<f64>, SurrogateError> {
        queries
            .iter()
            .map(|z| {
                let theta = self
                    .space
                    .basis
                    .lift(z)
                    .map_err(|e| SurrogateError::Objective(e.to_string()))?;
                Ok(self.space.objective.value(&theta))
            })
            .collect()
    }
}

fn check_queries(queries: &[Vec<f64>], dim: usize) -> Result<(), SurrogateError> {
    for q in queries {
        if q.len() != dim {
            return Err(SurrogateError::DimensionMismatch {
                expected: dim,
                actual: q.len(),
            });
        }
    }
    Ok(())
}
