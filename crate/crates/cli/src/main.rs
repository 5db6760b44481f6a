use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use shapfair::exact::ExactOracle;
use shapfair::experiment::{
    num, run_experiment, run_sweep,
    verify::{run_suite, SUITES},
    write_outputs, write_sweep, ExperimentConfig,
};
use shapfair::game::{load_table, make_synthetic, SyntheticGame};
use shapfair::{Coalition, Error, Result};

const THREADS_ENV: &str = "SHAPFAIR_THREADS";
const VERIFY_FAILED: u8 = 5;

#[derive(Parser)]
#[command(
    name = "shapfair",
    version,
    about = "Shapley value estimation with fidelity and fairness diagnostics"
)]
struct Cli {
    /// Worker threads for parallel trials (SHAPFAIR_THREADS overrides).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Shapley values and per-cardinality moments of a small game.
    Exact(ExactArgs),
    /// Run every configured estimator for every trial and write reports.
    Estimate(RunArgs),
    /// Run the sweep section of a config and write sweep.csv.
    Sweep(RunArgs),
    /// Run a named self-check suite ("all" runs every suite).
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve a game table over the subprocess line protocol on stdin/stdout.
    ServeTable { path: PathBuf },
}

#[derive(Args)]
struct ExactArgs {
    /// Built-in family: glove, majority, additive, airport, random.
    #[arg(long, conflicts_with_all = ["table", "config"])]
    builtin: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated weights (additive) or costs (airport).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, conflicts_with = "config")]
    table: Option<PathBuf>,
    /// Take the game from an experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Subset formula only: skips the permutation cross-check and allows up to 20 players.
    #[arg(long)]
    phi_only: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn builtin(name: &str, a: &ExactArgs) -> Result<SyntheticGame> {
    let n = a.n;
    let need_n = || n.ok_or_else(|| Error::Config(vec![format!("--n is required for {name}")]));
    let need_values = || {
        if a.values.is_empty() {
            Err(Error::Config(vec![format!(
                "--values is required for {name}"
            )]))
        } else {
            Ok(a.values.clone())
        }
    };
    Ok(match name {
        "glove" => {
            let n = n.unwrap_or(3);
            if n < 2 {
                return Err(Error::Config(vec!["--n must be >= 2 for glove".into()]));
            }
            SyntheticGame::Glove {
                left: (0..n - 1).collect(),
                right: vec![n - 1],
            }
        }
        "majority" => SyntheticGame::Majority {
            n: need_n()?,
            quota: None,
        },
        "random" => SyntheticGame::Random {
            n: need_n()?,
            seed: a.seed,
            low: -1.0,
            high: 1.0,
        },
        "additive" => SyntheticGame::Additive {
            weights: need_values()?,
        },
        "airport" => SyntheticGame::Airport {
            costs: need_values()?,
        },
        other => {
            return Err(Error::Config(vec![format!(
                "unknown builtin {other:?}; expected glove, majority, additive, airport or random"
            )]))
        }
    })
}

fn cmd_exact(a: &ExactArgs) -> Result<()> {
    let game = match (&a.builtin, &a.table, &a.config) {
        (Some(name), _, _) => make_synthetic(&builtin(name, a)?)?,
        (None, Some(path), _) => load_table(path)?,
        (None, None, Some(path)) => ExperimentConfig::load(path)?.game.build()?,
        _ => {
            return Err(Error::Config(vec![
                "one of --builtin, --table or --config is required".into(),
            ]))
        }
    };
    let oracle = ExactOracle::from_game(&game)?;
    let phi = if a.phi_only {
        oracle.shapley_by_subsets()
    } else {
        let by_perm = oracle.shapley_by_permutations()?;
        let by_subset = oracle.shapley_by_subsets();
        let scale = by_perm
            .iter()
            .chain(oracle.values())
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(1.0);
        if let Some(i) = (0..game.n()).find(|&i| (by_perm[i] - by_subset[i]).abs() > 1e-12 * scale)
        {
            return Err(Error::Unsupported(format!(
                "exact routes disagree for player {i}: {} vs {}",
                by_perm[i], by_subset[i]
            )));
        }
        by_subset
    };
    let mut out = json!({"game": game.label(), "n": game.n(), "phi": phi.iter().map(|&x| num(x)).collect::<Vec<_>>()});
    if !a.phi_only {
        let p = oracle.moments()?;
        let rows = |m: &[Vec<f64>]| {
            m.iter()
                .map(|r| r.iter().map(|&x| num(x)).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        out["profile"] = json!({
            "variance_uniform": p.variance_uniform.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "mean_by_cardinality": rows(&p.mean_by_cardinality),
            "mean_sq_by_cardinality": rows(&p.mean_sq_by_cardinality),
        });
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&out).map_err(|e| Error::Format(e.to_string()))?
    );
    Ok(())
}

fn load_run_config(a: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &a.out {
        cfg.outputs = Some(out.clone());
    }
    let dir = cfg
        .outputs
        .clone()
        .ok_or_else(|| Error::Config(vec!["outputs: set it in the config or pass --out".into()]))?;
    Ok((cfg, dir))
}

fn cmd_estimate(a: &RunArgs) -> Result<()> {
    let (cfg, dir) = load_run_config(a)?;
    let report = run_experiment(&cfg)?;
    for path in write_outputs(&report, &dir)? {
        println!("wrote {}", path.display());
    }
    for agg in report
        .aggregates
        .iter()
        .filter(|a| matches!(a.metric, "min_fs" | "a2_violation_rate" | "mse"))
    {
        let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!(
            "{:<24} {:<20} mean {} se {}",
            agg.estimator,
            agg.metric,
            show(agg.mean),
            show(agg.std_err)
        );
    }
    Ok(())
}

fn cmd_sweep(a: &RunArgs) -> Result<()> {
    let (cfg, dir) = load_run_config(a)?;
    let report = run_sweep(&cfg)?;
    let path = write_sweep(&report, &dir)?;
    println!("wrote {} ({} rows)", path.display(), report.rows.len());
    Ok(())
}

fn cmd_verify(suite: &str, seed: u64) -> Result<bool> {
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut all = true;
    for name in names {
        let report = run_suite(name, seed)?;
        for c in &report.checks {
            println!(
                "[{}] {name}: {}: {} (tolerance {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance
            );
        }
        all &= report.pass();
    }
    Ok(all)
}

fn serve_table(path: &Path) -> Result<()> {
    let game = load_table(path)?;
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| Error::Format(format!("stdin: {e}")))?;
        let line = line.trim();
        if line == "QUIT" {
            break;
        }
        let bits: u64 = line
            .strip_prefix("EVAL ")
            .and_then(|b| b.trim().parse().ok())
            .ok_or_else(|| Error::Format(format!("malformed request {line:?}")))?;
        let v = game.evaluate(Coalition::from_bits(bits))?;
        writeln!(stdout, "VALUE {v}")
            .and_then(|_| stdout.flush())
            .map_err(|e| Error::Format(format!("stdout: {e}")))?;
    }
    Ok(())
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .map(Some)
            .ok_or_else(|| {
                Error::Config(vec![format!(
                    "{THREADS_ENV}: expected a positive integer, got {v:?}"
                )])
            }),
        Err(_) => match flag {
            Some(0) => Err(Error::Config(vec!["--threads: must be >= 1".into()])),
            other => Ok(other),
        },
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(k) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Config(vec![format!("thread pool: {e}")]))?;
    }
    match &cli.command {
        Command::Exact(a) => cmd_exact(a).map(|_| true),
        Command::Estimate(a) => cmd_estimate(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Verify { suite, seed } => cmd_verify(suite, *seed),
        Command::ServeTable { path } => serve_table(path).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(VERIFY_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
