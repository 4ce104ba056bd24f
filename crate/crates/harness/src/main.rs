use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use subspace_search::surrogate::Transport;
use subspace_search::Method;
use subspace_search_harness::{
    protocol_check, run_experiment, summarize_dir, summary_table, write_run, ExperimentConfig, SurrogateChoice,
};

#[derive(Parser)]
#[command(name = "subsearch", version, about = "Run and analyse subspace search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more methods over the configured seeds and write logs.
    Run(RunArgs),
    /// Aggregate the run CSVs under a results directory.
    Summarize {
        dir: PathBuf,
    },
    /// Score every candidate pool of the full method against the true objective.
    Rankcheck(RunArgs),
    /// Check that a surrogate server speaks the wire protocol.
    ProtocolTest {
        /// `tcp:HOST:PORT` or `stdio:COMMAND [ARGS...]`
        transport: String,
        /// Read timeout in seconds (TCP only).
        #[arg(long, default_value_t = 30)]
        timeout: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only these seeds (repeatable).
    #[arg(long)]
    seed: Vec<u64>,
    /// `full`, `one_shot`, `random_search`, `local_only` or `all`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    surrogate: Option<SurrogateChoice>,
    /// Surrogate server address when `--surrogate remote`.
    #[arg(long)]
    remote: Option<String>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(self) -> Result<(ExperimentConfig, Vec<Method>)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.seed.is_empty() {
            cfg.seeds = self.seed;
        }
        if let Some(s) = self.surrogate {
            cfg.surrogate = s;
        }
        if let Some(r) = self.remote {
            cfg.remote = Some(r);
        }
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        if let Some(o) = self.out {
            cfg.out = o;
        }
        let methods = match self.method.as_deref() {
            Some("all") => Method::ALL.to_vec(),
            Some(m) => vec![m.parse().map_err(anyhow::Error::msg)?],
            None => vec![cfg.method],
        };
        cfg.method = methods[0];
        cfg.validate()?;
        Ok((cfg, methods))
    }
}

fn run(args: RunArgs) -> Result<()> {
    let (cfg, methods) = args.resolve()?;
    let results = run_experiment(&cfg, &methods, false)?;
    for r in &results {
        write_run(&cfg.out, r)?;
        println!(
            "{:<14} seed {:<4} final {:<14.6} rounds {}/{}",
            r.method.as_str(),
            r.seed,
            r.trace.final_value,
            r.trace.executed_rounds().count(),
            r.trace.rounds.len()
        );
    }
    let rows = summarize_dir(&cfg.out)?;
    print!("{}", summary_table(&rows));
    Ok(())
}

fn rankcheck(args: RunArgs) -> Result<()> {
    let (cfg, _) = args.resolve()?;
    let results = run_experiment(&cfg, &[Method::Full], true)?;
    let mut rows = Vec::new();
    for r in &results {
        write_run(&cfg.out, r)?;
        rows.extend(r.rank.iter().copied());
    }
    if rows.is_empty() {
        anyhow::bail!("no search round executed; nothing to rank");
    }
    let mut csv = String::from("seed,round,iteration,spearman,degenerate,top1_percentile,pool_size\n");
    for r in &results {
        for row in &r.rank {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.seed, row.round, row.iteration, row.spearman, row.degenerate, row.top1_percentile, row.pool_size
            ));
        }
    }
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.out.join("rank.csv"), csv)?;

    let n = rows.len() as f64;
    let rho = rows.iter().map(|r| r.spearman).sum::<f64>() / n;
    let top20 = rows.iter().filter(|r| r.top1_percentile < 20.0).count() as f64 / n;
    let pct = rows.iter().map(|r| r.top1_percentile).sum::<f64>() / n;
    println!("pools scored        {}", rows.len());
    println!("mean spearman       {rho:.4}");
    println!("mean top-1 pct      {pct:.2}");
    println!("pick in top 20%     {:.1}%", 100.0 * top20);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Rankcheck(args) => rankcheck(args),
        Command::Summarize { dir } => summarize_dir(&dir).map(|rows| print!("{}", summary_table(&rows))),
        Command::ProtocolTest { transport, timeout } => transport
            .parse::<Transport>()
            .map_err(anyhow::Error::from)
            .and_then(|t| protocol_check(&t, Some(Duration::from_secs(timeout))))
            .map(|lines| lines.iter().for_each(|l| println!("{l}"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
