use std::fmt;

use serde::Serialize;

use crate::objectives::{Objective, ObjectiveError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Local,
    RoundInit,
    RoundInner,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Local => "local",
            Phase::RoundInit => "round-init",
            Phase::RoundInner => "round-inner",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalEvent {
    /// Zero-based position on the global evaluation axis.
    pub index: u64,
    pub phase: Phase,
    /// Return observed by this evaluation.
    pub value: f64,
    /// Last known return of the parameters being trained.
    pub current: f64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Counts every true evaluation and logs it. Evaluation `i` of a run with
/// seed `s` always gets the same noise seed, whatever produced it.
pub struct Evaluator<'a> {
    objective: &'a dyn Objective,
    seed: u64,
    events: Vec<EvalEvent>,
    current: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(objective: &'a dyn Objective, seed: u64) -> Self {
        Self {
            objective,
            seed,
            events: Vec::new(),
            current: f64::NAN,
        }
    }

    pub fn objective(&self) -> &'a dyn Objective {
        self.objective
    }

    pub fn count(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn events(&self) -> &[EvalEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<EvalEvent> {
        self.events
    }

    pub fn eval_seed(&self, index: u64) -> u64 {
        splitmix64(splitmix64(self.seed) ^ index)
    }

    pub fn evaluate(&mut self, theta: &[f64], phase: Phase) -> Result<f64, ObjectiveError> {
        let index = self.count();
        let value = self.objective.evaluate(theta, self.eval_seed(index))?;
        if phase == Phase::Local {
            self.current = value;
        }
        self.events.push(EvalEvent {
            index,
            phase,
            value,
            current: self.current,
        });
        Ok(value)
    }

    /// Records that the trained parameters were replaced by ones with return `value`.
    pub fn set_current(&mut self, value: f64) {
        self.current = value;
        if let Some(last) = self.events.last_mut() {
            last.current = value;
        }
    }

    pub fn current(&self) -> f64 {
        self.current
    }
}
