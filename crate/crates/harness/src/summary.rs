use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use subspace_search::metrics::steps_to_fraction;

use crate::run::improvement;

/// One run's learning curve as read back from its CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFile {
    pub seed: u64,
    pub curve: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub seeds: usize,
    pub mean_final: f64,
    /// Population standard deviation of the finals as a percentage of |mean|.
    pub std_pct: f64,
    /// Mean over seeds of the first evaluation reaching 90% of the final
    /// improvement over the initial return, as a percentage of the budget.
    pub steps90_pct: f64,
    /// `(eval index, mean, std)` across seeds.
    pub curve: Vec<(u64, f64, f64)>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn read_curve(path: &Path) -> Result<Vec<(u64, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some("eval_index,phase,value,current") {
        bail!("{}: unexpected header", path.display());
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 4 {
                bail!("{}:{}: expected 4 columns", path.display(), i + 2);
            }
            let idx = cols[0].parse().map_err(|e| anyhow!("{}:{}: {e}", path.display(), i + 2))?;
            let cur = cols[3].parse().map_err(|e| anyhow!("{}:{}: {e}", path.display(), i + 2))?;
            Ok((idx, cur))
        })
        .collect()
}

pub fn summarize_method(method: &str, runs: &[CurveFile]) -> Result<MethodSummary> {
    if runs.is_empty() {
        bail!("{method}: no runs");
    }
    let len = runs[0].curve.len();
    if len == 0 || runs.iter().any(|r| r.curve.len() != len) {
        bail!("{method}: runs have empty or unequal curves");
    }
    let finals: Vec<f64> = runs.iter().map(|r| r.curve[len - 1].1).collect();
    let (mean_final, std) = mean_std(&finals);
    let std_pct = if mean_final == 0.0 { 0.0 } else { 100.0 * std / mean_final.abs() };

    let budget = len as f64;
    let mut steps = Vec::with_capacity(runs.len());
    for r in runs {
        let imp = improvement(&r.curve);
        let s = if imp[len - 1].1 > 0.0 {
            steps_to_fraction(&imp, 0.9)?
        } else {
            imp[len - 1].0
        };
        steps.push(100.0 * (s + 1) as f64 / budget);
    }
    let steps90_pct = mean_std(&steps).0;

    let curve = (0..len)
        .map(|i| {
            let col: Vec<f64> = runs.iter().map(|r| r.curve[i].1).collect();
            let (m, s) = mean_std(&col);
            (runs[0].curve[i].0, m, s)
        })
        .collect();
    Ok(MethodSummary {
        method: method.to_string(),
        seeds: runs.len(),
        mean_final,
        std_pct,
        steps90_pct,
        curve,
    })
}

/// Reads every `<dir>/<method>/seed_<n>.csv`, writes `summary.csv` and
/// `curve_<method>.csv` into `dir`, and returns the rows sorted by method name.
pub fn summarize_dir(dir: &Path) -> Result<Vec<MethodSummary>> {
    let mut by_method: BTreeMap<String, Vec<CurveFile>> = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let method = entry.file_name().to_string_lossy().into_owned();
        for f in fs::read_dir(entry.path())? {
            let path = f?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            let Some(seed) = name.strip_prefix("seed_").and_then(|s| s.strip_suffix(".csv")) else {
                continue;
            };
            let seed = seed.parse().with_context(|| format!("bad seed in {}", path.display()))?;
            by_method.entry(method.clone()).or_default().push(CurveFile {
                seed,
                curve: read_curve(&path)?,
            });
        }
    }
    if by_method.is_empty() {
        bail!("no run CSVs under {}", dir.display());
    }

    let mut rows = Vec::new();
    for (method, mut runs) in by_method {
        runs.sort_by_key(|r| r.seed);
        let s = summarize_method(&method, &runs)?;
        let mut text = String::from("eval_index,mean,std\n");
        for (i, m, sd) in &s.curve {
            writeln!(text, "{i},{m},{sd}").unwrap();
        }
        fs::write(dir.join(format!("curve_{method}.csv")), text)?;
        rows.push(s);
    }
    fs::write(dir.join("summary.csv"), summary_csv(&rows))?;
    Ok(rows)
}

pub fn summary_csv(rows: &[MethodSummary]) -> String {
    let mut text = String::from("method,seeds,mean_final,std_pct,steps90_pct\n");
    for r in rows {
        writeln!(text, "{},{},{},{},{}", r.method, r.seeds, r.mean_final, r.std_pct, r.steps90_pct).unwrap();
    }
    text
}

pub fn summary_table(rows: &[MethodSummary]) -> String {
    let mut text = format!(
        "{:<14} {:>5} {:>16} {:>9} {:>12}\n",
        "method", "seeds", "final return", "std %", "steps90 %"
    );
    for r in rows {
        writeln!(
            text,
            "{:<14} {:>5} {:>16.6} {:>9.2} {:>12.2}",
            r.method, r.seeds, r.mean_final, r.std_pct, r.steps90_pct
        )
        .unwrap();
    }
    text
}
