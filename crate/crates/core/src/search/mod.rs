//! Surrogate-guided global search rounds inside a gradient-derived subspace, the
//! random-search and one-shot baselines, and the driver that interleaves rounds
//! with local gradient ascent ([`interleave`]).
//!
//! A round:
//! 1. builds the basis from the gradient window;
//! 2. evaluates the anchor (`z = 0`) and `K - 1` Gaussian samples around it;
//! 3. `T` times: fits the surrogate on the context, samples `N` candidates around
//!    the incumbent, evaluates only the top-predicted one, and appends it;
//! 4. returns the lifted best entry of the whole context.

mod evaluator;
pub mod interleave;

use serde::Serialize;
use thiserror::Error;

use crate::metrics::argmax;
use crate::objectives::ObjectiveError;
use crate::sampler::{gaussian_sample, RngStream, TrustRegion};
use crate::subspace::{build_basis, GradientWindow, ParameterVector, SubspaceBasis, SubspaceError};
use crate::surrogate::{
    screen_predictions, ContextSet, IdwConfig, IdwModel, Predictor, RoundSpace, SurrogateError, SurrogateKind,
};

pub use evaluator::{EvalEvent, Evaluator, Phase};
pub use interleave::{interleave, Adam, GradientAscent, LocalOptimizer, Method, RoundRecord, RunSpec, TrainingTrace};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("evaluation of {phase} candidate {candidate} failed: {source}")]
    Objective {
        phase: Phase,
        candidate: usize,
        #[source]
        source: ObjectiveError,
    },
    #[error("local phase failed: {0}")]
    Local(#[source] ObjectiveError),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// Round hyperparameters. `warmup` and `period` are measured in objective
/// evaluations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub rank: usize,
    pub inner_iterations: usize,
    pub context_size: usize,
    pub pool_size: usize,
    pub radius: f64,
    pub sigma: f64,
    pub warmup: u64,
    pub period: u64,
    pub window: usize,
    pub rank_threshold: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            rank: 15,
            inner_iterations: 16,
            context_size: 16,
            pool_size: 256,
            radius: 0.01,
            sigma: 0.005,
            warmup: 150_000,
            period: 10_000,
            window: 32,
            rank_threshold: crate::subspace::DEFAULT_RANK_THRESHOLD,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.to_string()));
        if self.rank == 0 || self.context_size == 0 || self.pool_size == 0 || self.window == 0 {
            return bad("rank, context_size, pool_size and window must be at least 1");
        }
        if self.period == 0 {
            return bad("period must be at least 1");
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad("radius must be positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be non-negative");
        }
        if !(self.rank_threshold >= 0.0 && self.rank_threshold < 1.0) {
            return bad("rank_threshold must lie in [0, 1)");
        }
        Ok(())
    }

    /// True evaluations consumed by a full round.
    pub fn round_budget(&self) -> usize {
        self.context_size + self.inner_iterations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    /// Context index of the incumbent the pool was centered on.
    pub center_index: usize,
    pub z: Vec<f64>,
    pub predicted: f64,
    pub actual: f64,
    /// `actual - y0`.
    pub delta: f64,
    pub non_finite_predictions: usize,
    /// The configured surrogate failed and IDW was used instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrace {
    pub skipped: Option<String>,
    pub rank_effective: usize,
    /// Stored evaluation of the anchor, when the round evaluated it.
    pub anchor_value: Option<f64>,
    /// Best return among the initial context.
    pub y0: f64,
    pub iterations: Vec<IterationRecord>,
    pub z_best: Vec<f64>,
    pub y_best: f64,
    pub rollout_count: usize,
    pub context: ContextSet,
}

impl RoundTrace {
    pub fn empty(dim: usize) -> Self {
        Self {
            skipped: None,
            rank_effective: dim,
            anchor_value: None,
            y0: f64::NEG_INFINITY,
            iterations: Vec::new(),
            z_best: vec![0.0; dim],
            y_best: f64::NEG_INFINITY,
            rollout_count: 0,
            context: ContextSet::new(dim),
        }
    }

    fn skipped(reason: String) -> Self {
        Self {
            skipped: Some(reason),
            ..Self::empty(0)
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub theta: ParameterVector,
    pub trace: RoundTrace,
}

/// Everything a pool inspector can see at one inner iteration.
pub struct PoolView<'a> {
    pub iteration: usize,
    pub pool: &'a [Vec<f64>],
    pub predictions: &'a [f64],
    pub chosen: usize,
    pub space: RoundSpace<'a>,
}

/// Hook for analyses that need the full candidate pool (e.g. rank agreement).
pub trait PoolObserver {
    fn observe(&mut self, view: PoolView<'_>);
}

#[derive(Debug, Clone)]
pub struct GlobalSearch {
    pub config: SearchConfig,
    pub surrogate: SurrogateKind,
}

impl GlobalSearch {
    pub fn new(config: SearchConfig, surrogate: SurrogateKind) -> Result<Self, SearchError> {
        config.validate()?;
        Ok(Self { config, surrogate })
    }

    fn region(&self, center: Vec<f64>) -> TrustRegion {
        TrustRegion::new(center, self.config.radius, self.config.sigma)
    }

    /// Anchor plus `K - 1` samples around it, all truly evaluated.
    pub fn init_context(
        &self,
        basis: &SubspaceBasis,
        evaluator: &mut Evaluator<'_>,
        rng: &mut RngStream,
    ) -> Result<ContextSet, SearchError> {
        let dim = basis.rank_effective();
        let mut points = vec![vec![0.0; dim]];
        points.extend(gaussian_sample(
            &self.region(vec![0.0; dim]),
            self.config.context_size - 1,
            rng,
        ));
        let mut context = ContextSet::new(dim);
        for (i, z) in points.into_iter().enumerate() {
            let y = evaluate_candidate(basis, &z, evaluator, Phase::RoundInit, i)?;
            context.push(z, y)?;
        }
        Ok(context)
    }

    /// One fit / sample / predict / pick / evaluate / append cycle.
    pub fn inner_iteration(
        &self,
        context: &mut ContextSet,
        basis: &SubspaceBasis,
        evaluator: &mut Evaluator<'_>,
        rng: &mut RngStream,
        observer: Option<&mut dyn PoolObserver>,
    ) -> Result<IterationRecord, SearchError> {
        let y0 = context.best().map(|e| e.y).ok_or(SurrogateError::EmptyContext)?;
        self.inner_iteration_against(context, basis, evaluator, rng, observer, y0)
    }

    fn inner_iteration_against(
        &self,
        context: &mut ContextSet,
        basis: &SubspaceBasis,
        evaluator: &mut Evaluator<'_>,
        rng: &mut RngStream,
        observer: Option<&mut dyn PoolObserver>,
        y0: f64,
    ) -> Result<IterationRecord, SearchError> {
        let space = RoundSpace {
            basis,
            objective: evaluator.objective(),
        };
        let center_index = context.best_index().ok_or(SurrogateError::EmptyContext)?;
        let center = context.entries()[center_index].z.clone();
        let pool = gaussian_sample(&self.region(center), self.config.pool_size, rng);

        let (raw, fallback) = match self
            .surrogate
            .fit(context, space)
            .and_then(|model| model.predict(&pool))
        {
            Ok(p) => (p, false),
            Err(e) => {
                log::warn!("{} surrogate failed ({e}); using IDW for this iteration", self.surrogate.name());
                (IdwModel::fit(context, IdwConfig::default())?.predict(&pool)?, true)
            }
        };
        let screened = screen_predictions(raw);
        let chosen = argmax(&screened.values).expect("pool is non-empty");
        if let Some(obs) = observer {
            obs.observe(PoolView {
                iteration: context.len(),
                pool: &pool,
                predictions: &screened.values,
                chosen,
                space,
            });
        }

        let z = pool[chosen].clone();
        let actual = evaluate_candidate(basis, &z, evaluator, Phase::RoundInner, context.len())?;
        context.push(z.clone(), actual)?;
        Ok(IterationRecord {
            center_index,
            z,
            predicted: screened.values[chosen],
            actual,
            delta: actual - y0,
            non_finite_predictions: screened.non_finite,
            fallback,
        })
    }

    pub fn run_round(
        &self,
        theta_base: &ParameterVector,
        window: &GradientWindow,
        evaluator: &mut Evaluator<'_>,
        rng: &mut RngStream,
    ) -> Result<RoundOutcome, SearchError> {
        self.guided_round(theta_base, window, evaluator, rng, self.config.inner_iterations, None)
    }

    pub fn run_round_observed(
        &self,
        theta_base: &ParameterVector,
        window: &GradientWindow,
        evaluator: &mut Evaluator<'_>,
        rng: &mut RngStream,
        observer: &mut dyn PoolObserver,
    ) -> Result<RoundOutcome, SearchError> {
        self.guided_round(
            theta_base,
            window,
            evaluator,
            rng,
            self.config.inner_iterations,
            Some(observer),
        )
    }

    /// Ablation: `K` initial evaluations followed by a single guided one.
    pub fn one_shot_round(
        &self,
        theta_base: &ParameterVector,
        window: &GradientWindow,
        evaluator: &mut Evaluator<'_>,
        rng: &mut RngStream,
    ) -> Result<RoundOutcome, SearchError> {
        self.guided_round(theta_base, window, evaluator, rng, 1, None)
    }

    fn basis_or_skip(&self, theta_base: &ParameterVector, window: &GradientWindow) -> Result<SubspaceBasis, RoundOutcome> {
        match build_basis(window, theta_base.clone(), self.config.rank, self.config.rank_threshold) {
            Ok(b) => Ok(b),
            Err(e) => {
                log::info!("search round skipped: {e}");
                Err(RoundOutcome {
                    theta: theta_base.clone(),
                    trace: RoundTrace::skipped(e.to_string()),
                })
            }
        }
    }

    fn guided_round(
        &self,
        theta_base: &ParameterVector,
        window: &GradientWindow,
        evaluator: &mut Evaluator<'_>,
        rng: &mut RngStream,
        inner_iterations: usize,
        mut observer: Option<&mut dyn PoolObserver>,
    ) -> Result<RoundOutcome, SearchError> {
        let basis = match self.basis_or_skip(theta_base, window) {
            Ok(b) => b,
            Err(skipped) => return Ok(skipped),
        };
        let mut context = self.init_context(&basis, evaluator, rng)?;
        let y0 = context.best().expect("context has the anchor").y;
        let anchor_value = context.entries()[0].y;

        let mut iterations = Vec::with_capacity(inner_iterations);
        for _ in 0..inner_iterations {
            let obs = observer.as_mut().map(|o| &mut **o as &mut dyn PoolObserver);
            iterations.push(self.inner_iteration_against(&mut context, &basis, evaluator, rng, obs, y0)?);
        }
        finish(basis, context, iterations, Some(anchor_value), y0)
    }

    /// Baseline: `K + T` Gaussian samples around the anchor, every one evaluated.
    pub fn random_round(
        &self,
        theta_base: &ParameterVector,
        window: &GradientWindow,
        evaluator: &mut Evaluator<'_>,
        rng: &mut RngStream,
    ) -> Result<RoundOutcome, SearchError> {
        let basis = match self.basis_or_skip(theta_base, window) {
            Ok(b) => b,
            Err(skipped) => return Ok(skipped),
        };
        let dim = basis.rank_effective();
        let points = gaussian_sample(&self.region(vec![0.0; dim]), self.config.round_budget(), rng);
        let mut context = ContextSet::new(dim);
        for (i, z) in points.into_iter().enumerate() {
            let y = evaluate_candidate(&basis, &z, evaluator, Phase::RoundInit, i)?;
            context.push(z, y)?;
        }
        let y0 = context.best().expect("round budget is positive").y;
        finish(basis, context, Vec::new(), None, y0)
    }
}

fn evaluate_candidate(
    basis: &SubspaceBasis,
    z: &[f64],
    evaluator: &mut Evaluator<'_>,
    phase: Phase,
    candidate: usize,
) -> Result<f64, SearchError> {
    let theta = basis.lift(z)?;
    evaluator
        .evaluate(&theta, phase)
        .map_err(|source| SearchError::Objective {
            phase,
            candidate,
            source,
        })
}

fn finish(
    basis: SubspaceBasis,
    context: ContextSet,
    iterations: Vec<IterationRecord>,
    anchor_value: Option<f64>,
    y0: f64,
) -> Result<RoundOutcome, SearchError> {
    let best = context.best().expect("context is non-empty").clone();
    let theta = basis.lift(&best.z)?;
    Ok(RoundOutcome {
        theta,
        trace: RoundTrace {
            skipped: None,
            rank_effective: basis.rank_effective(),
            anchor_value,
            y0,
            iterations,
            z_best: best.z,
            y_best: best.y,
            rollout_count: context.len(),
            context,
        },
    })
}

#[cfg(test)]
mod tests;
