use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use subspace_search::metrics::rank_report;
use subspace_search::search::{LocalOptimizer, PoolObserver, PoolView};
use subspace_search::{
    interleave, Adam, GlobalSearch, GradientAscent, Method, ParameterVector, RunSpec, TrainingTrace,
};

use crate::config::{ExperimentConfig, OptimizerChoice, SurrogateChoice};

/// Brute-force ranking of one candidate pool against the noise-free objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankRow {
    pub round: usize,
    pub iteration: usize,
    pub spearman: f64,
    pub degenerate: bool,
    pub top1_percentile: f64,
    pub pool_size: usize,
}

/// Scores the first `limit` candidates of every pool it sees.
#[derive(Debug, Default)]
pub struct RankObserver {
    pub limit: usize,
    pub rows: Vec<RankRow>,
    round: usize,
    last_iteration: Option<usize>,
}

impl RankObserver {
    pub fn new(limit: usize) -> Self {
        Self {
            limit,
            ..Self::default()
        }
    }
}

impl PoolObserver for RankObserver {
    fn observe(&mut self, view: PoolView<'_>) {
        if let Some(prev) = self.last_iteration {
            if view.iteration <= prev {
                self.round += 1;
            }
        }
        self.last_iteration = Some(view.iteration);

        let n = self.limit.min(view.pool.len());
        let mut truth = Vec::with_capacity(n);
        for z in &view.pool[..n] {
            let value = view
                .space
                .basis
                .lift(z)
                .ok()
                .map(|theta| view.space.objective.value(&theta))
                .filter(|v| v.is_finite())
                .unwrap_or(f64::NEG_INFINITY);
            truth.push(value);
        }
        match rank_report(&view.predictions[..n], &truth) {
            Ok(r) => self.rows.push(RankRow {
                round: self.round,
                iteration: view.iteration,
                spearman: r.spearman.rho,
                degenerate: r.spearman.degenerate,
                top1_percentile: r.top1_percentile,
                pool_size: r.pool_size,
            }),
            Err(e) => log::warn!("rank analysis skipped: {e}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub method: Method,
    pub seed: u64,
    pub budget: u64,
    pub surrogate: SurrogateChoice,
    pub trace: TrainingTrace,
    pub rank: Vec<RankRow>,
}

impl RunResult {
    /// `current - current_at_first_eval`, the curve used for steps-to-threshold.
    pub fn improvement_curve(&self) -> Vec<(u64, f64)> {
        improvement(&self.trace.curve())
    }
}

pub fn improvement(curve: &[(u64, f64)]) -> Vec<(u64, f64)> {
    let start = curve.first().map(|c| c.1).unwrap_or(0.0);
    curve.iter().map(|&(i, v)| (i, v - start)).collect()
}

pub fn run_single(cfg: &ExperimentConfig, method: Method, seed: u64, rank_analysis: bool) -> Result<RunResult> {
    let objective = cfg.objective.build()?;
    let search = GlobalSearch::new(cfg.search.clone(), cfg.surrogate_kind()?)?;
    let mut optimizer: Box<dyn LocalOptimizer> = match cfg.optimizer {
        OptimizerChoice::Sgd => Box::new(GradientAscent {
            learning_rate: cfg.learning_rate,
        }),
        OptimizerChoice::Adam => Box::new(Adam::new(cfg.learning_rate)),
    };
    let mut observer = RankObserver::new(cfg.rank_pool);
    let trace = interleave(
        &search,
        RunSpec {
            method,
            budget: cfg.budget,
            seed,
        },
        objective.as_ref(),
        optimizer.as_mut(),
        ParameterVector::zeros(objective.dim()),
        rank_analysis.then_some(&mut observer as &mut dyn PoolObserver),
    )
    .with_context(|| format!("method {method}, seed {seed}"))?;
    Ok(RunResult {
        method,
        seed,
        budget: cfg.budget,
        surrogate: cfg.surrogate,
        trace,
        rank: observer.rows,
    })
}

/// Runs every `(method, seed)` pair. Results come back in method-major,
/// seed-minor order regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, methods: &[Method], rank_analysis: bool) -> Result<Vec<RunResult>> {
    let jobs: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    if cfg.surrogate == SurrogateChoice::Remote {
        jobs.iter().map(|&(m, s)| run_single(cfg, m, s, rank_analysis)).collect()
    } else {
        jobs.par_iter().map(|&(m, s)| run_single(cfg, m, s, rank_analysis)).collect()
    }
}

pub fn run_paths(out: &Path, method: Method, seed: u64) -> (PathBuf, PathBuf) {
    let dir = out.join(method.as_str());
    (dir.join(format!("seed_{seed}.jsonl")), dir.join(format!("seed_{seed}.csv")))
}

/// Writes the JSON-lines event log and the per-evaluation CSV of one run.
pub fn write_run(out: &Path, run: &RunResult) -> Result<()> {
    let (jsonl, csv) = run_paths(out, run.method, run.seed);
    fs::create_dir_all(jsonl.parent().expect("has parent"))?;

    let mut w = BufWriter::new(fs::File::create(&jsonl).with_context(|| format!("creating {}", jsonl.display()))?);
    let mut line = |v: serde_json::Value| -> Result<()> {
        serde_json::to_writer(&mut w, &v)?;
        w.write_all(b"\n")?;
        Ok(())
    };
    line(json!({
        "type": "run",
        "method": run.method,
        "seed": run.seed,
        "budget": run.budget,
        "surrogate": run.surrogate.to_string(),
        "step_cost": run.trace.step_cost,
    }))?;
    let mut rounds = run.trace.rounds.iter().peekable();
    for e in &run.trace.events {
        line(json!({"type": "eval", "index": e.index, "phase": e.phase, "value": e.value, "current": e.current}))?;
        while let Some(r) = rounds.next_if(|r| {
            let end = r.trigger + r.trace.as_ref().map_or(0, |t| t.rollout_count as u64);
            end == e.index + 1
        }) {
            let t = r.trace.as_ref();
            line(json!({
                "type": "round",
                "round": r.round,
                "trigger": r.trigger,
                "executed": r.executed,
                "note": r.note,
                "rank_effective": t.map(|t| t.rank_effective),
                "anchor_value": t.and_then(|t| t.anchor_value),
                "y0": t.map(|t| t.y0),
                "y_best": t.map(|t| t.y_best),
                "z_best": t.map(|t| &t.z_best),
                "rollout_count": t.map(|t| t.rollout_count),
                "iterations": t.map(|t| &t.iterations),
            }))?;
        }
    }
    for r in rounds {
        line(json!({"type": "round", "round": r.round, "trigger": r.trigger, "executed": r.executed, "note": r.note}))?;
    }
    for row in &run.rank {
        line(json!({"type": "rank", "row": row}))?;
    }
    line(json!({
        "type": "final",
        "final_value": run.trace.final_value,
        "local_steps": run.trace.local_steps,
        "evaluations": run.trace.events.len(),
        "executed_rounds": run.trace.executed_rounds().count(),
    }))?;
    w.flush()?;

    let mut c = BufWriter::new(fs::File::create(&csv).with_context(|| format!("creating {}", csv.display()))?);
    writeln!(c, "eval_index,phase,value,current")?;
    for e in &run.trace.events {
        writeln!(c, "{},{},{},{}", e.index, e.phase, e.value, e.current)?;
    }
    c.flush()?;
    Ok(())
}
