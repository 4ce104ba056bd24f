//! Local gradient ascent with periodic global search rounds.
//!
//! Every local step costs one evaluation (the return of the current parameters)
//! and pushes the raw gradient into the window. With `m` the number of
//! evaluations spent so far, a round fires after a local step whenever
//! `m >= warmup` and `(m - warmup) % period == 0`. Round evaluations count
//! toward `m` and toward the total budget. A round that does not fit in the
//! remaining budget is recorded as triggered but not executed.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{Evaluator, GlobalSearch, Phase, PoolObserver, RoundOutcome, RoundTrace, SearchError};
use crate::objectives::Objective;
use crate::sampler::RngStream;
use crate::subspace::{GradientWindow, ParameterVector, SubspaceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Full,
    OneShot,
    RandomSearch,
    LocalOnly,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Full, Method::OneShot, Method::RandomSearch, Method::LocalOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::OneShot => "one_shot",
            Method::RandomSearch => "random_search",
            Method::LocalOnly => "local_only",
        }
    }

    /// Evaluations one round of this method consumes, `None` if it has no rounds.
    pub fn round_budget(self, search: &GlobalSearch) -> Option<u64> {
        let cfg = &search.config;
        match self {
            Method::Full | Method::RandomSearch => Some(cfg.round_budget() as u64),
            Method::OneShot => Some(cfg.context_size as u64 + 1),
            Method::LocalOnly => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected full, one_shot, random_search or local_only)"))
    }
}

pub trait LocalOptimizer {
    /// Applies one update given the raw gradient at `theta`.
    fn step(&mut self, theta: &mut ParameterVector, gradient: &[f64]) -> Result<(), SubspaceError>;
}

/// Plain gradient ascent, `theta += lr * g`.
#[derive(Debug, Clone, Copy)]
pub struct GradientAscent {
    pub learning_rate: f64,
}

impl LocalOptimizer for GradientAscent {
    fn step(&mut self, theta: &mut ParameterVector, gradient: &[f64]) -> Result<(), SubspaceError> {
        theta.add_scaled(self.learning_rate, gradient)
    }
}

/// Adam ascent with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }
}

impl LocalOptimizer for Adam {
    fn step(&mut self, theta: &mut ParameterVector, gradient: &[f64]) -> Result<(), SubspaceError> {
        if gradient.len() != theta.dim() {
            return Err(SubspaceError::DimensionMismatch {
                expected: theta.dim(),
                actual: gradient.len(),
            });
        }
        if self.m.len() != gradient.len() {
            self.m = vec![0.0; gradient.len()];
            self.v = vec![0.0; gradient.len()];
            self.t = 0;
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let update: Vec<f64> = gradient
            .iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(&g, (m, v))| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                (*m / c1) / ((*v / c2).sqrt() + self.epsilon)
            })
            .collect();
        theta.add_scaled(self.learning_rate, &update)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Evaluations spent when the round fired.
    pub trigger: u64,
    pub executed: bool,
    pub note: Option<String>,
    pub trace: Option<RoundTrace>,
}

#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub method: Method,
    pub events: Vec<super::EvalEvent>,
    pub rounds: Vec<RoundRecord>,
    pub final_theta: ParameterVector,
    pub final_value: f64,
    pub local_steps: u64,
    pub step_cost: u64,
}

impl TrainingTrace {
    /// `(eval index, current return)` pairs, the learning curve.
    pub fn curve(&self) -> Vec<(u64, f64)> {
        self.events.iter().map(|e| (e.index, e.current)).collect()
    }

    pub fn executed_rounds(&self) -> impl Iterator<Item = &RoundTrace> {
        self.rounds.iter().filter_map(|r| r.trace.as_ref().filter(|t| !t.is_skipped()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunSpec {
    pub method: Method,
    /// Total true evaluations, local and round combined.
    pub budget: u64,
    pub seed: u64,
}

pub fn interleave(
    search: &GlobalSearch,
    spec: RunSpec,
    objective: &dyn Objective,
    optimizer: &mut dyn LocalOptimizer,
    initial: ParameterVector,
    mut observer: Option<&mut dyn PoolObserver>,
) -> Result<TrainingTrace, SearchError> {
    if initial.dim() != objective.dim() {
        return Err(SubspaceError::DimensionMismatch {
            expected: objective.dim(),
            actual: initial.dim(),
        }
        .into());
    }
    let cfg = &search.config;
    let round_cost = spec.method.round_budget(search);
    let round_streams = RngStream::new(spec.seed);
    let mut evaluator = Evaluator::new(objective, spec.seed);
    let mut window = GradientWindow::new(objective.dim(), cfg.window)?;
    let mut theta = initial;
    let mut rounds = Vec::new();
    let mut local_steps = 0u64;

    while evaluator.count() < spec.budget {
        evaluator.evaluate(&theta, Phase::Local).map_err(SearchError::Local)?;
        let gradient = objective.gradient(&theta).map_err(SearchError::Local)?;
        window.push(&gradient)?;
        optimizer.step(&mut theta, &gradient)?;
        local_steps += 1;

        let Some(cost) = round_cost else { continue };
        let m = evaluator.count();
        if m < cfg.warmup || (m - cfg.warmup) % cfg.period != 0 {
            continue;
        }
        let index = rounds.len();
        if spec.budget - m < cost {
            rounds.push(RoundRecord {
                round: index,
                trigger: m,
                executed: false,
                note: Some(format!("needs {cost} evaluations, {} left", spec.budget - m)),
                trace: None,
            });
            continue;
        }

        let mut rng = round_streams.derive(index as u64);
        let obs = observer.as_mut().map(|o| &mut **o as &mut dyn PoolObserver);
        let result = match (spec.method, obs) {
            (Method::Full, Some(o)) => search.run_round_observed(&theta, &window, &mut evaluator, &mut rng, o),
            (Method::Full, None) => search.run_round(&theta, &window, &mut evaluator, &mut rng),
            (Method::OneShot, _) => search.one_shot_round(&theta, &window, &mut evaluator, &mut rng),
            (Method::RandomSearch, _) => search.random_round(&theta, &window, &mut evaluator, &mut rng),
            (Method::LocalOnly, _) => unreachable!("local-only runs have no rounds"),
        };
        match result {
            Ok(RoundOutcome { theta: next, trace }) => {
                if !trace.is_skipped() {
                    theta = next;
                    evaluator.set_current(trace.y_best);
                }
                rounds.push(RoundRecord {
                    round: index,
                    trigger: m,
                    executed: !trace.is_skipped(),
                    note: trace.skipped.clone(),
                    trace: Some(trace),
                });
            }
            Err(e) => {
                log::warn!("round {index} failed at evaluation {m}: {e}");
                rounds.push(RoundRecord {
                    round: index,
                    trigger: m,
                    executed: false,
                    note: Some(e.to_string()),
                    trace: None,
                });
            }
        }
    }

    let final_value = evaluator.current();
    Ok(TrainingTrace {
        method: spec.method,
        events: evaluator.into_events(),
        rounds,
        final_theta: theta,
        final_value,
        local_steps,
        step_cost: objective.step_cost(),
    })
}
