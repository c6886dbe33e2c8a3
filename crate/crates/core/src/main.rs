use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use relwalk::config::ExperimentConfig;
use relwalk::report::{run, Command, RunOptions};
use relwalk::Budget;

/// Random walks on free products: return probabilities, Green functions,
/// first-return kernels, pressure and verification reports.
#[derive(Parser, Debug)]
#[command(name = "relwalk", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `out_dir` from the config, then `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Resource budget: ELEMENTS or ELEMENTS,SECONDS.
    #[arg(long, global = true, value_parser = parse_budget)]
    budget: Option<Budget>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Seed for sampled experiments; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Record wall-clock time in the report (breaks byte-for-byte reproducibility).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// p_n(e,e) for n = 0..=walk.horizon, to walk.csv.
    Walk,
    /// G(e,e|r) and G'(e,e|r) on the grid.
    Green {
        /// Absolute values of r, replacing the configured grid.
        #[arg(long = "r", value_delimiter = ',')]
        r: Vec<f64>,
    },
    /// I1(r), I2(r) and their asymptotic ratios.
    Isums,
    /// Spectral degeneracy verdict at R̂.
    Degeneracy,
    /// Pressure ladder of the Green potential.
    Pressure,
    /// Ancona-inequality audit.
    Ancona,
    /// Local limit exponent fit.
    Llt,
    /// Every experiment, into report.json.
    Report,
}

fn parse_budget(s: &str) -> Result<Budget, String> {
    let mut parts = s.split(',');
    let elements: usize = parts
        .next()
        .unwrap_or("")
        .trim()
        .parse()
        .map_err(|_| format!("budget {s:?}: expected ELEMENTS or ELEMENTS,SECONDS"))?;
    let time = match parts.next() {
        Some(t) => Some(Duration::from_secs_f64(
            t.trim()
                .parse()
                .map_err(|_| format!("budget {s:?}: seconds must be a number"))?,
        )),
        None => None,
    };
    if parts.next().is_some() || elements == 0 {
        return Err(format!("budget {s:?}: expected ELEMENTS or ELEMENTS,SECONDS"));
    }
    Ok(Budget::new(elements, time))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> relwalk::Result<()> {
    #[cfg(feature = "parallel")]
    if cli.threads > 0 {
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let path = cli
        .config
        .ok_or_else(|| relwalk::Error::InvalidArgument("--config is required".into()))?;
    let config = ExperimentConfig::load(&path)?;
    let out_dir = cli
        .out
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let (command, r_values) = match cli.command {
        Cmd::Walk => (Command::Walk, vec![]),
        Cmd::Green { r } => (Command::Green, r),
        Cmd::Isums => (Command::Isums, vec![]),
        Cmd::Degeneracy => (Command::Degeneracy, vec![]),
        Cmd::Pressure => (Command::Pressure, vec![]),
        Cmd::Ancona => (Command::Ancona, vec![]),
        Cmd::Llt => (Command::Llt, vec![]),
        Cmd::Report => (Command::Report, vec![]),
    };
    let opts = RunOptions {
        out_dir: out_dir.clone(),
        budget: cli.budget.unwrap_or_default(),
        seed: cli.seed,
        r_values,
        timing: cli.timing,
    };
    let report = run(command, &config, &opts)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}: {} experiment(s), report in {}",
        command.name(),
        report.experiments.len(),
        out_dir.join(format!("{}.json", command.name())).display()
    );
    Ok(())
}
