//! Spectral-degeneracy verdicts from a ladder of truncations.

use crate::error::Result;
use crate::group::FreeProduct;
use crate::walk::{is_radial, StepMeasure};
use crate::Budget;

use super::induced::{induced_green, kernel_spectral_radius};
use super::kernel::{first_return_kernel, radial_return_kernel, KernelMethod, ReturnKernel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NonDegenerate,
    Degenerate,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegeneracyOptions {
    /// Path-length cutoffs `L` (one per rung).
    pub lengths: Vec<usize>,
    /// Word-ball radii `B` for the path dynamic program (ignored by the lumped one).
    pub ball_radii: Vec<u32>,
    /// Box half-widths for lattice factors.
    pub box_radii: Vec<u32>,
    /// `ρ̂ ≥ 1 − degenerate_tol` counts as degenerate.
    pub degenerate_tol: f64,
    pub power_tol: f64,
    pub power_max_iters: usize,
    /// Restrict to one factor.
    pub factor: Option<usize>,
}

impl Default for DegeneracyOptions {
    fn default() -> Self {
        DegeneracyOptions {
            lengths: vec![64, 128, 256, 512, 1024],
            ball_radii: vec![4, 6, 8, 10, 12],
            box_radii: vec![8, 16, 32, 64, 128],
            degenerate_tol: 1e-3,
            power_tol: 1e-7,
            power_max_iters: 400_000,
            factor: None,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct LadderRung {
    pub max_length: usize,
    pub ball_radius: Option<u32>,
    pub box_radius: Option<u32>,
    pub kernel_mass: f64,
    pub tail_bound: f64,
    pub rho_hat: f64,
    pub rho_lower: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FactorVerdict {
    pub factor: usize,
    pub method: KernelMethod,
    pub ladder: Vec<LadderRung>,
    pub rho_hat: f64,
    /// `ρ̂` plus the estimated truncation slack.
    pub rho_upper: f64,
    /// `1 − rho_upper`.
    pub margin: f64,
    pub stabilized: bool,
    /// Row mass plus tail: an upper bound on the spectral radius of the untruncated kernel.
    pub row_mass_bound: f64,
    /// Whether the Neumann series `G_{k,r}(e, e | 1)` converged on the last rung.
    pub neumann_converges: bool,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct DegeneracyReport {
    pub r: f64,
    pub factors: Vec<FactorVerdict>,
    pub verdict: Verdict,
}

fn combine(verdicts: impl Iterator<Item = Verdict>) -> Verdict {
    let mut all_non = true;
    for v in verdicts {
        match v {
            Verdict::Degenerate => return Verdict::Degenerate,
            Verdict::Inconclusive => all_non = false,
            Verdict::NonDegenerate => {}
        }
    }
    if all_non {
        Verdict::NonDegenerate
    } else {
        Verdict::Inconclusive
    }
}

/// Computes the kernel of one rung.
fn rung_kernel(
    group: &FreeProduct,
    mu: &StepMeasure,
    k: usize,
    r: f64,
    lumped: bool,
    length: usize,
    ball: u32,
    budget: &Budget,
) -> Result<ReturnKernel> {
    if lumped {
        let chain = is_radial(group, mu).expect("checked by caller");
        radial_return_kernel(group, mu, &chain, k, r, length)
    } else {
        first_return_kernel(group, mu, k, r, length, ball, budget)
    }
}

/// Estimated distance from the last rung to the limit of the ladder.
///
/// `ρ̂` only grows along the ladder; when the last increments shrink geometrically
/// with ratio `q < 1` the remaining growth is about `Δ·q/(1−q)`. The lumped kernel
/// adds its certified tail. Without geometric decay the ladder is not stabilized.
fn ladder_slack(ladder: &[LadderRung], lumped: bool) -> (f64, bool) {
    let n = ladder.len();
    if n < 3 {
        return (f64::INFINITY, false);
    }
    let d1 = (ladder[n - 2].rho_hat - ladder[n - 3].rho_hat).abs();
    let d2 = (ladder[n - 1].rho_hat - ladder[n - 2].rho_hat).abs();
    let tail = if lumped { ladder[n - 1].tail_bound } else { 0.0 };
    if d2 == 0.0 {
        return (tail, true);
    }
    let q = d2 / d1;
    if q >= 0.9 {
        return (f64::INFINITY, false);
    }
    (tail + d2 * q / (1.0 - q), true)
}

/// Decides, factor by factor, whether `ρ(p_{k,r}) < 1` at `r` (normally `R̂_μ`).
///
/// A factor is non-degenerate when the ladder increments decay geometrically and
/// `ρ̂ + slack < 1`; degenerate when `ρ̂ ≥ 1 − degenerate_tol`; inconclusive otherwise.
pub fn degeneracy_test(
    group: &FreeProduct,
    mu: &StepMeasure,
    r: f64,
    opts: &DegeneracyOptions,
    budget: &Budget,
) -> Result<DegeneracyReport> {
    let lumped = is_radial(group, mu).is_some()
        && mu.support().iter().all(|x| x.rel_length() <= 1);
    let rungs = opts
        .lengths
        .len()
        .min(if lumped { usize::MAX } else { opts.ball_radii.len() });
    let mut factors = Vec::new();
    for (k, spec) in group.factors().iter().enumerate() {
        if opts.factor.is_some_and(|f| f != k) {
            continue;
        }
        let mut ladder = Vec::new();
        let mut notes = Vec::new();
        let mut last_kernel = None;
        for i in 0..rungs {
            let length = opts.lengths[i];
            let ball = opts.ball_radii.get(i).copied().unwrap_or(0);
            let boxr = if spec.is_finite() {
                0
            } else {
                opts.box_radii[i.min(opts.box_radii.len() - 1)]
            };
            let kernel = match rung_kernel(group, mu, k, r, lumped, length, ball, budget) {
                Ok(k) => k,
                Err(e) => {
                    notes.push(format!("ladder stopped at rung {i}: {e}"));
                    break;
                }
            };
            let spec_r =
                kernel_spectral_radius(spec, &kernel, boxr, opts.power_tol, opts.power_max_iters)?;
            if !spec_r.converged {
                notes.push(format!("power iteration did not converge at rung {i}"));
            }
            ladder.push(LadderRung {
                max_length: length,
                ball_radius: (!lumped).then_some(ball),
                box_radius: (!spec.is_finite()).then_some(boxr),
                kernel_mass: kernel.mass(),
                tail_bound: kernel.tail_bound,
                rho_hat: spec_r.rho_hat,
                rho_lower: spec_r.rho_lower,
                iterations: spec_r.iterations,
                converged: spec_r.converged,
            });
            last_kernel = Some((kernel, boxr));
        }
        let method = if lumped {
            KernelMethod::RadialLumped
        } else {
            KernelMethod::PathDp
        };
        let Some(last) = ladder.last().cloned() else {
            notes.push("no rung completed".into());
            factors.push(FactorVerdict {
                factor: k,
                method,
                ladder,
                rho_hat: f64::NAN,
                rho_upper: f64::NAN,
                margin: f64::NAN,
                stabilized: false,
                row_mass_bound: f64::NAN,
                neumann_converges: false,
                verdict: Verdict::Inconclusive,
                notes,
            });
            continue;
        };
        let (slack, stabilized) = ladder_slack(&ladder, lumped);
        let rho_upper = last.rho_hat + slack;
        let margin = 1.0 - rho_upper;
        let stabilized = stabilized && last.converged;
        let row_mass_bound = last.kernel_mass + last.tail_bound;
        let neumann_converges = match &last_kernel {
            Some((kernel, boxr)) => induced_green(spec, kernel, 1.0, *boxr, 1e-12, 100_000).is_ok(),
            None => false,
        };
        if neumann_converges != (last.rho_hat < 1.0) {
            notes.push("Neumann-series test and power iteration disagree".into());
        }
        if row_mass_bound < 1.0 && last.rho_hat > row_mass_bound + 1e-9 {
            notes.push("power-iteration estimate exceeds the row-mass bound".into());
        }
        let verdict = if last.rho_hat >= 1.0 - opts.degenerate_tol {
            Verdict::Degenerate
        } else if stabilized && margin > 0.0 {
            Verdict::NonDegenerate
        } else {
            Verdict::Inconclusive
        };
        factors.push(FactorVerdict {
            factor: k,
            method,
            ladder,
            rho_hat: last.rho_hat,
            rho_upper,
            margin,
            stabilized,
            row_mass_bound,
            neumann_converges,
            verdict,
            notes,
        });
    }
    let verdict = combine(factors.iter().map(|f| f.verdict));
    Ok(DegeneracyReport {
        r,
        factors,
        verdict,
    })
}
