//! Experiment harness around `subspace_search`: configuration files, batch
//! runs over seeds and methods, JSON-lines and CSV logs, summaries, the
//! pool-ranking analysis, and a conformance check for surrogate servers.

pub mod config;
pub mod run;
pub mod summary;

use std::time::Duration;

use anyhow::{bail, Context, Result};
use subspace_search::surrogate::{RemoteClient, Transport};

pub use config::{ExperimentConfig, ObjectiveSpec, OptimizerChoice, SurrogateChoice};
pub use run::{run_experiment, run_single, write_run, RankObserver, RankRow, RunResult};
pub use summary::{summarize_dir, summary_table, MethodSummary};

/// Talks to a surrogate server: ping, fit a small linear data set, predict at
/// the training points and at fresh points. Returns one line per step.
pub fn protocol_check(transport: &Transport, timeout: Option<Duration>) -> Result<Vec<String>> {
    let mut client = RemoteClient::connect(transport, timeout).with_context(|| format!("connecting to {transport}"))?;
    let mut log = Vec::new();

    client.ping().context("ping")?;
    log.push(format!("ping ok (id {})", client.last_id()));

    let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.25, 1.0 - i as f64 * 0.1]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x[0] - x[1]).collect();
    client.fit(&xs, &ys).context("fit")?;
    log.push(format!("fit ok on {} points (id {})", xs.len(), client.last_id()));

    let pred = client.predict(&xs).context("predict at training points")?;
    if pred.iter().any(|p| !p.is_finite()) {
        bail!("server returned non-finite predictions at training points");
    }
    log.push(format!("predict ok, {} values (id {})", pred.len(), client.last_id()));

    let fresh = vec![vec![0.3, 0.3], vec![-1.0, 2.0], vec![5.0, 5.0]];
    let pred = client.predict(&fresh).context("predict at fresh points")?;
    log.push(format!("predict ok at fresh points: {pred:?} (id {})", client.last_id()));
    Ok(log)
}
