//! `wpcn`: run sweeps, reproduce figure presets, inspect single solves and
//! cross-check the solver against the grid oracle.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use wpcn_core::baselines::GridSpec;
use wpcn_core::experiment::{self, oracle_checks, preset, run_sweep, solve_once, write_all, ExperimentConfig, Method, PRESETS};
use wpcn_core::ProblemKind;

/// Exit status when the run completed but some trials failed numerically or
/// some oracle checks disagreed.
const EXIT_FLAGGED: u8 = 3;

#[derive(Parser)]
#[command(name = "wpcn", version, about = "Wireless-powered cooperation: optimal allocation experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "WPCN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run one of the canned figure sweeps.
    Figure {
        /// Preset name; see --list.
        name: Option<String>,
        /// Print the preset names and exit.
        #[arg(long)]
        list: bool,
        /// Print the preset as a config file instead of running it.
        #[arg(long)]
        dump_config: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve one instance and print every diagnostic.
    SolveOnce {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Take the setup from a preset instead of a file.
        #[arg(long, default_value = "wsr_vs_ps1")]
        preset: String,
        /// Channel seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Index of the sweep point whose parameters are used.
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// joint, joint_fixed or joint_flexible.
        #[arg(long, default_value = "joint")]
        method: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compare the solver with the brute-force grid oracle on two-antenna
    /// instances.
    OracleCheck {
        /// Number of instances.
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Problem::All)]
        problem: Problem,
        /// Time divisions of the finest grid (must be divisible by 4).
        #[arg(long, default_value_t = GridSpec::STANDARD.tau_div)]
        tau_div: usize,
        /// Beam-angle divisions per quarter turn.
        #[arg(long, default_value_t = GridSpec::STANDARD.theta_div)]
        theta_div: usize,
        /// Power-split divisions.
        #[arg(long, default_value_t = GridSpec::STANDARD.power_div)]
        power_div: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory for the CSV, plot and metadata files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Skip the SVG plot.
    #[arg(long)]
    no_plot: bool,
    /// Also write per-trial results.
    #[arg(long)]
    trial_log: bool,
    /// Format of the summary echoed to stdout.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Problem {
    P1,
    P2,
    P3,
    All,
}

/// Writes to stdout; a closed pipe (`wpcn ... | head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn parse_method(s: &str) -> Result<Method> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).with_context(|| format!("unknown method '{s}'"))
}

fn run(mut cfg: ExperimentConfig, args: &RunArgs) -> Result<u8> {
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(d) = &args.out_dir {
        cfg.output.dir = d.clone();
    }
    cfg.output.plot &= !args.no_plot;
    cfg.output.trial_log |= args.trial_log;
    cfg.validate()?;

    let out = run_sweep(&cfg)?;
    let written = write_all(&cfg, &out, &cfg.output.dir)?;
    match args.format {
        Format::Csv => emit(&experiment::summary_csv(&cfg, &out))?,
        Format::Json => emit(&(serde_json::to_string_pretty(&out.rows)? + "\n"))?,
        Format::Text => {
            let mut s = String::new();
            for r in &out.rows {
                let mean = r.mean.map_or("-".to_string(), |m| format!("{m:.4}"));
                s += &format!(
                    "{:>10} {:<15} {mean:>10}  ok {:>4}  infeasible {:>4}  failed {:>4}\n",
                    r.sweep_value,
                    r.method.name(),
                    r.n_ok,
                    r.n_infeasible,
                    r.n_failed
                );
            }
            emit(&s)?;
        }
    }
    eprintln!("wrote {}", written.csv.display());
    let failed = out.failures();
    if failed > 0 {
        eprintln!("{failed} trial(s) failed numerically; see {}", written.meta.display());
        return Ok(EXIT_FLAGGED);
    }
    Ok(0)
}

fn oracle(problem: Problem, first: u64, count: u64, grid: GridSpec, format: Format) -> Result<u8> {
    let kinds = match problem {
        Problem::P1 => vec![ProblemKind::P1],
        Problem::P2 => vec![ProblemKind::P2],
        Problem::P3 => vec![ProblemKind::P3],
        Problem::All => vec![ProblemKind::P1, ProblemKind::P2, ProblemKind::P3],
    };
    let params = wpcn_core::SystemParams { antennas: 2, ..Default::default() };
    let seeds: Vec<u64> = (first..first + count).collect();
    let mut all = Vec::new();
    for kind in kinds {
        all.extend(oracle_checks(kind, &params, &seeds, grid, &Default::default())?);
    }
    let bad = all.iter().filter(|c| !c.agrees).count();
    match format {
        Format::Json => emit(&(serde_json::to_string_pretty(&all)? + "\n"))?,
        _ => {
            let mut s = String::new();
            for c in &all {
                let show = |v: Option<f64>| v.map_or("infeasible".to_string(), |x| format!("{x:.6}"));
                s += &format!(
                    "seed {:>3} {:?}: solver {} oracle {} gap {} bound {} {}\n",
                    c.seed,
                    c.kind,
                    show(c.solver),
                    show(c.oracle.values[0]),
                    c.gap.map_or("-".into(), |g| format!("{g:.3e}")),
                    c.oracle.bound.map_or("-".into(), |b| format!("{b:.3e}")),
                    if c.agrees { "agree" } else { "DISAGREE" }
                );
            }
            s += &format!("{} of {} instances agree\n", all.len() - bad, all.len());
            emit(&s)?;
        }
    }
    Ok(if bad > 0 { EXIT_FLAGGED } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting worker pool")?;
    }
    match cli.command {
        Command::Sweep { config, run: args } => run(ExperimentConfig::load(&config)?, &args),
        Command::Figure { name, list, dump_config, run: args } => {
            if list {
                emit(&(PRESETS.join("\n") + "\n"))?;
                return Ok(0);
            }
            let Some(name) = name else { bail!("missing preset name; available: {}", PRESETS.join(", ")) };
            let cfg = preset(&name)?;
            if dump_config {
                emit(&cfg.to_toml()?)?;
                return Ok(0);
            }
            run(cfg, &args)
        }
        Command::SolveOnce { config, preset: name, seed, point, method, format } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => preset(&name)?,
            };
            let s = solve_once(&cfg, point, seed, parse_method(&method)?)?;
            match format {
                Format::Json => emit(&(serde_json::to_string_pretty(&s)? + "\n"))?,
                _ => emit(&s.to_text())?,
            }
            Ok(0)
        }
        Command::OracleCheck { seeds, seed, problem, tau_div, theta_div, power_div, format } => {
            oracle(problem, seed, seeds, GridSpec { tau_div, theta_div, power_div }, format)
        }
    }
}
