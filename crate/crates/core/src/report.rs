//! Named experiments driven by an [`ExperimentConfig`], and the reports they emit.
//!
//! Every report is JSON with a `report_schema` version and the config hash; tables
//! also go to CSV. Wall-clock time is only recorded on request, so that the same
//! config and version produce byte-identical files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::green::{
    estimate_radius, green_table, i_sums, i_sums_generic, BallGreen, GreenOracle, RadialGreen,
    RadialGreenOptions,
};
use crate::group::{FreeProduct, GroupElement};
use crate::parabolic::{degeneracy_test, DegeneracyReport, Verdict};
use crate::thermo::pressure;
use crate::verify::{ancona_audit, llt_fit, ratio_report, AnconaOptions};
use crate::walk::{detect_period, is_radial, return_probabilities, return_probabilities_float, StepMeasure};
use crate::Budget;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Walk,
    Green,
    Isums,
    Degeneracy,
    Pressure,
    Ancona,
    Llt,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Walk => "walk",
            Command::Green => "green",
            Command::Isums => "isums",
            Command::Degeneracy => "degeneracy",
            Command::Pressure => "pressure",
            Command::Ancona => "ancona",
            Command::Llt => "llt",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub command: String,
    /// How the numbers were obtained.
    pub method: String,
    pub result: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub report_schema: u32,
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_name: Option<String>,
    pub experiments: Vec<ExperimentResult>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

/// Per-run knobs that do not belong in the config file.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub budget: Budget,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Absolute `r` values for `green`, replacing the grid.
    pub r_values: Vec<f64>,
    pub timing: bool,
}

/// The group, measure and Green oracle shared by the experiments.
pub struct Setup {
    pub group: FreeProduct,
    pub mu: StepMeasure,
    pub radial: Option<RadialGreen>,
    pub ball: Option<BallGreen>,
    pub warnings: Vec<String>,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let group = config.build_group()?;
        let mu = config.build_measure(&group)?;
        let mut warnings: Vec<String> = group.warnings().to_vec();
        warnings.extend(mu.warnings().iter().cloned());
        Ok(Setup {
            group,
            mu,
            radial: None,
            ball: None,
            warnings,
        })
    }

    /// Builds the Green oracle: the radial engine when the measure allows it, the
    /// killed-ball engine otherwise.
    pub fn prepare(&mut self, config: &ExperimentConfig, budget: &Budget) -> Result<()> {
        if self.radial.is_none() && self.ball.is_none() {
            if is_radial(&self.group, &self.mu).is_some() {
                let options = RadialGreenOptions {
                    estimate_horizon: config.green.estimate_horizon,
                    max_horizon: config.green.max_horizon,
                    r_hat: config.green.r_hat,
                };
                self.radial = Some(RadialGreen::new(&self.group, &self.mu, options)?);
            } else {
                let r_hat = match config.green.r_hat {
                    Some(r) => r,
                    None => {
                        let est = estimate_radius(&self.group, &self.mu, config.green.ball_estimate_horizon, budget)?;
                        self.warnings.push(format!(
                            "R̂ = {:.6} extrapolated from {} convolution steps; set green.r_hat to override",
                            est.r_hat, config.green.ball_estimate_horizon
                        ));
                        est.r_hat
                    }
                };
                self.ball = Some(BallGreen::new(&self.group, &self.mu, config.green.ball_radius, r_hat, budget)?);
            }
        }
        Ok(())
    }

    /// The oracle built by [`Setup::prepare`].
    pub fn oracle(&self) -> &dyn GreenOracle {
        match (&self.radial, &self.ball) {
            (Some(r), _) => r,
            (_, Some(b)) => b,
            _ => panic!("Setup::prepare was not called"),
        }
    }

    fn method(&self) -> &'static str {
        if self.radial.is_some() {
            "radial distance chain"
        } else {
            "killed word ball"
        }
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn experiment(command: Command, method: impl Into<String>, result: impl Serialize) -> Result<ExperimentResult> {
    Ok(ExperimentResult {
        command: command.name().into(),
        method: method.into(),
        result: serde_json::to_value(result)?,
    })
}

fn grid(config_grid: &[f64], r_hat: f64) -> Vec<f64> {
    config_grid.iter().map(|q| q * r_hat).collect()
}

fn run_walk(config: &ExperimentConfig, setup: &Setup, opts: &RunOptions) -> Result<ExperimentResult> {
    let p = return_probabilities(&setup.group, &setup.mu, config.walk.horizon, config.walk.method, &opts.budget)?;
    p.write_csv(std::fs::File::create(opts.out_dir.join("walk.csv"))?)?;
    let logs = p.log_values();
    let positive: Vec<bool> = p.positivity();
    let period = detect_period(&positive).map(|i| i.period).ok();
    let result = json!({
        "horizon": config.walk.horizon,
        "csv": "walk.csv",
        "period": period,
        "ln_p": logs,
        "truncation_log10": match &p {
            crate::walk::ReturnProbabilities::Radial { log10_error, .. } => Some(*log10_error),
            _ => None,
        },
    });
    experiment(Command::Walk, format!("{:?}", p.method()).to_lowercase(), result)
}

fn run_green(config: &ExperimentConfig, setup: &mut Setup, opts: &RunOptions) -> Result<ExperimentResult> {
    setup.prepare(config, &opts.budget)?;
    let oracle = setup.oracle();
    let r_hat = oracle.r_hat();
    let points = if opts.r_values.is_empty() {
        grid(&config.green.grid, r_hat)
    } else {
        opts.r_values.clone()
    };
    if let Some(rg) = &setup.radial {
        let rows = green_table(rg, &points)?;
        write_csv(&opts.out_dir.join("green.csv"), &rows)?;
        let est = rg.estimate();
        return experiment(
            Command::Green,
            setup.method(),
            json!({ "r_hat": r_hat, "estimate": est, "rows": rows, "csv": "green.csv" }),
        );
    }
    let e = GroupElement::identity();
    let rows = points
        .iter()
        .map(|&r| oracle.green(&e, &e, r).map(|v| json!({ "r": r, "g": v })))
        .collect::<Result<Vec<_>>>()?;
    experiment(Command::Green, setup.method(), json!({ "r_hat": r_hat, "rows": rows }))
}

fn run_isums(config: &ExperimentConfig, setup: &mut Setup, opts: &RunOptions) -> Result<ExperimentResult> {
    setup.prepare(config, &opts.budget)?;
    let r_hat = setup.oracle().r_hat();
    let points = grid(&config.green.grid, r_hat);
    let sums = match &setup.radial {
        Some(rg) => points.iter().map(|&r| i_sums(rg, r, 1e-8)).collect::<Result<Vec<_>>>()?,
        None => {
            let oracle = setup.ball.as_ref().expect("oracle built");
            points
                .iter()
                .map(|&r| i_sums_generic(oracle, r, oracle.reach() / 2, oracle.reach() / 2, 1e-8, &opts.budget))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let rows: Vec<Value> = sums
        .iter()
        .map(|s| json!({ "r": s.r, "i1": s.i1, "i1_tail": s.i1_tail, "i2": s.i2, "i2_tail": s.i2_tail, "ratio": s.ratio() }))
        .collect();
    write_csv(
        &opts.out_dir.join("isums.csv"),
        &sums.iter().map(|s| (s.r, s.i1, s.i1_tail, s.i2, s.i2_tail)).collect::<Vec<_>>(),
    )?;
    let mut result = json!({ "r_hat": r_hat, "rows": rows, "detail": sums, "csv": "isums.csv" });
    if let Some(rg) = &setup.radial {
        let fractions: Vec<f64> = config.green.grid.iter().copied().filter(|&q| q < 1.0).collect();
        if !fractions.is_empty() {
            result["ratios"] = serde_json::to_value(ratio_report(rg, &grid(&fractions, r_hat))?)?;
        }
    }
    experiment(Command::Isums, setup.method(), result)
}

fn run_degeneracy(
    config: &ExperimentConfig,
    setup: &mut Setup,
    opts: &RunOptions,
    warnings: &mut Vec<String>,
) -> Result<ExperimentResult> {
    // only R̂ is needed, so an override avoids building a Green engine at all
    let r_hat = match config.green.r_hat {
        Some(r) => r,
        None => {
            setup.prepare(config, &opts.budget)?;
            setup.oracle().r_hat()
        }
    };
    let method = "first-return kernel ladder";
    match degeneracy_test(&setup.group, &setup.mu, r_hat, &config.degeneracy, &opts.budget) {
        Ok(report) => {
            if report.verdict == Verdict::Inconclusive {
                let notes: Vec<String> = report
                    .factors
                    .iter()
                    .flat_map(|f| f.notes.iter().map(move |n| format!("factor {}: {n}", f.factor)))
                    .collect();
                warnings.push(format!("degeneracy verdict is inconclusive ({})", notes.join("; ")));
            }
            experiment(Command::Degeneracy, method, report)
        }
        Err(Error::BudgetExceeded(msg)) => {
            let w = format!("degeneracy test stopped by the budget ({msg}); verdict is inconclusive");
            log::warn!("{w}");
            warnings.push(w);
            let report = DegeneracyReport {
                r: r_hat,
                factors: Vec::new(),
                verdict: Verdict::Inconclusive,
            };
            experiment(Command::Degeneracy, method, report)
        }
        Err(e) => Err(e),
    }
}

fn run_pressure(config: &ExperimentConfig, setup: &mut Setup, opts: &RunOptions) -> Result<ExperimentResult> {
    setup.prepare(config, &opts.budget)?;
    let oracle = setup.oracle();
    let r_hat = oracle.r_hat();
    let estimates = grid(&config.pressure.grid, r_hat)
        .into_iter()
        .map(|r| pressure(oracle, r, &config.pressure.ladder))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<(f64, f64, f64, bool)> = estimates
        .iter()
        .map(|e| (e.r, e.pressure, e.lambda, e.stabilized))
        .collect();
    write_csv(&opts.out_dir.join("pressure.csv"), &rows)?;
    experiment(
        Command::Pressure,
        format!("truncated transfer matrix ladder over {}", setup.method()),
        json!({ "r_hat": r_hat, "estimates": estimates, "csv": "pressure.csv" }),
    )
}

fn run_ancona(config: &ExperimentConfig, setup: &mut Setup, opts: &RunOptions) -> Result<ExperimentResult> {
    setup.prepare(config, &opts.budget)?;
    let oracle = setup.oracle();
    let a = &config.ancona;
    let options = AnconaOptions {
        triples: a.triples,
        max_rel_dist: a.max_rel_dist,
        max_shared: a.max_shared,
        pairs_per_length: a.pairs_per_length,
        seed: opts.seed.unwrap_or(config.seed),
    };
    let report = ancona_audit(oracle, a.fraction * oracle.r_hat(), &options)?;
    write_csv(&opts.out_dir.join("ancona_strong.csv"), &report.strong)?;
    experiment(Command::Ancona, setup.method(), report)
}

fn run_llt(config: &ExperimentConfig, setup: &mut Setup, opts: &RunOptions) -> Result<ExperimentResult> {
    setup.prepare(config, &opts.budget)?;
    let r_hat = setup.oracle().r_hat();
    let horizon = config.llt.horizon;
    let (log_p, period, method) = match is_radial(&setup.group, &setup.mu) {
        Some(chain) => {
            let (mut t, _) = chain.log_return_table(&[0], horizon);
            (t.swap_remove(0), chain.period(), "radial distance chain")
        }
        None => {
            let p = return_probabilities_float(&setup.group, &setup.mu, horizon, &opts.budget)?;
            let positive: Vec<bool> = p.iter().map(|&x| x > 0.0).collect();
            let period = detect_period(&positive)?.period;
            (p.iter().map(|x| x.ln()).collect(), period, "pruned convolution")
        }
    };
    let fit = llt_fit(&log_p, period, r_hat, config.llt.window)?;
    experiment(Command::Llt, method, fit)
}

/// Runs one command (or all of them for `report`) and writes `<command>.json`.
pub fn run(command: Command, config: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut setup = Setup::new(config)?;
    let mut warnings = Vec::new();
    let mut experiments = Vec::new();
    let all = [
        Command::Walk,
        Command::Green,
        Command::Isums,
        Command::Degeneracy,
        Command::Pressure,
        Command::Ancona,
        Command::Llt,
    ];
    let commands: Vec<Command> = if command == Command::Report { all.to_vec() } else { vec![command] };
    for c in commands {
        let result = match c {
            Command::Walk => run_walk(config, &setup, opts),
            Command::Green => run_green(config, &mut setup, opts),
            Command::Isums => run_isums(config, &mut setup, opts),
            Command::Degeneracy => run_degeneracy(config, &mut setup, opts, &mut warnings),
            Command::Pressure => run_pressure(config, &mut setup, opts),
            Command::Ancona => run_ancona(config, &mut setup, opts),
            Command::Llt => run_llt(config, &mut setup, opts),
            Command::Report => unreachable!("expanded above"),
        };
        match result {
            Ok(r) => experiments.push(r),
            // the combined report records failures instead of stopping
            Err(e) if command == Command::Report => warnings.push(format!("{}: {e}", c.name())),
            Err(e) => return Err(e),
        }
    }
    warnings.splice(0..0, setup.warnings.iter().cloned());
    let report = RunReport {
        report_schema: REPORT_SCHEMA,
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config.hash()?,
        config_name: config.name.clone(),
        experiments,
        warnings,
        wall_clock_seconds: opts.timing.then(|| start.elapsed().as_secs_f64()),
    };
    let path = opts.out_dir.join(format!("{}.json", command.name()));
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}
