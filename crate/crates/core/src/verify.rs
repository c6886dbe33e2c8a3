//! Headline checks: Ancona-type audits, local-limit exponents, asymptotic ratios.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::green::{green_table, i_sums, neville, GreenOracle, RadialGreen};
use crate::group::{FactorElement, FreeProduct, GroupElement};
use crate::numeric::least_squares;

/// A uniformly chosen alternating path of `len` syllables, whose first syllable avoids
/// factor `avoid`. Infinite factors contribute their generators only.
fn random_normal_form(
    group: &FreeProduct,
    len: usize,
    avoid: Option<usize>,
    rng: &mut impl Rng,
) -> GroupElement {
    let mut path: Vec<FactorElement> = Vec::with_capacity(len);
    let mut last = avoid;
    for _ in 0..len {
        let options: Vec<FactorElement> = group
            .factors()
            .iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != last)
            .flat_map(|(_, f)| f.nontrivial_elements(Some(1)).unwrap_or_default())
            .collect();
        let s = *options.choose(rng).expect("at least two factors");
        last = Some(s.factor_id());
        path.push(s);
    }
    GroupElement::from_path(&path)
}

#[derive(Clone, Debug)]
pub struct AnconaOptions {
    pub triples: usize,
    /// Largest relative distance `d̂(x, z)`.
    pub max_rel_dist: usize,
    /// Longest shared segment in the strong-form audit.
    pub max_shared: usize,
    /// Quadruples per shared length.
    pub pairs_per_length: usize,
    pub seed: u64,
}

impl Default for AnconaOptions {
    fn default() -> Self {
        AnconaOptions {
            triples: 200,
            max_rel_dist: 6,
            max_shared: 4,
            pairs_per_length: 20,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct AnconaTriple {
    pub x: String,
    pub y: String,
    pub z: String,
    /// `G(x,z) G(y,y) / (G(x,y) G(y,z))`.
    pub ratio: f64,
    /// Relative error of the ratio implied by the Green tails.
    pub tolerance: f64,
}

/// Largest deviation of the cross ratio from 1 at one shared length.
#[derive(Clone, Debug, serde::Serialize)]
pub struct StrongRow {
    pub shared: usize,
    pub pairs: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct AnconaReport {
    pub r: f64,
    pub seed: u64,
    pub triples: Vec<AnconaTriple>,
    /// Triples dropped because a Green value could not be evaluated.
    pub skipped: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Triples with ratio below `1 - tolerance`.
    pub lower_bound_violations: usize,
    pub strong: Vec<StrongRow>,
    /// Fit `max_deviation ≈ c ρ^n`; `ρ = 0` when every deviation vanishes.
    pub strong_c: f64,
    pub strong_rho: f64,
    /// Fellow-travel constant of the strong form (shared prefix points).
    pub fellow_travel_constant: u32,
}

fn green_pair(oracle: &dyn GreenOracle, x: &GroupElement, y: &GroupElement, r: f64) -> Result<(f64, f64)> {
    let v = oracle.green(x, y, r)?;
    if !v.value.is_finite() || v.value <= 0.0 || !v.tail.is_finite() {
        return Err(Error::Divergence(format!("G = {} with tail {}", v.value, v.tail)));
    }
    Ok((v.value, v.relative_tail()))
}

/// `G(x,z|r) G(y,y|r) ≥ G(x,y|r) G(y,z|r)` for `y` on a relative geodesic from `x`
/// to `z`, and the strong form: for `x, x'` behind and `y, y'` beyond a shared
/// segment of `n` syllables, `G(x,y)G(x',y') / (G(x',y)G(x,y'))` tends to 1 with `n`.
pub fn ancona_audit(oracle: &dyn GreenOracle, r: f64, opts: &AnconaOptions) -> Result<AnconaReport> {
    if r > oracle.r_hat() * (1.0 + 1e-6) || r < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "r = {r} lies outside [0, R̂ = {}]",
            oracle.r_hat()
        )));
    }
    let group = oracle.group();
    if group.n_factors() < 2 {
        return Err(Error::InvalidArgument("relative geodesics need at least two factors".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut triples = Vec::new();
    let mut skipped = 0;
    for _ in 0..opts.triples {
        let x = random_normal_form(group, rng.gen_range(0..=2), None, &mut rng);
        let d = rng.gen_range(1..=opts.max_rel_dist.max(1));
        let step = random_normal_form(group, d, x.last_factor(), &mut rng);
        let z = group.mul(&x, &step);
        let geo = group.rel_geodesic(&x, &z);
        let y = geo.vertices[rng.gen_range(0..geo.vertices.len())].clone();
        let eval = || -> Result<(f64, f64)> {
            let (xz, exz) = green_pair(oracle, &x, &z, r)?;
            let (yy, eyy) = green_pair(oracle, &y, &y, r)?;
            let (xy, exy) = green_pair(oracle, &x, &y, r)?;
            let (yz, eyz) = green_pair(oracle, &y, &z, r)?;
            Ok((xz * yy / (xy * yz), exz + eyy + exy + eyz))
        };
        match eval() {
            Ok((ratio, tolerance)) => triples.push(AnconaTriple {
                x: group.format(&x),
                y: group.format(&y),
                z: group.format(&z),
                ratio,
                tolerance,
            }),
            Err(_) => skipped += 1,
        }
    }
    let min_ratio = triples.iter().map(|t| t.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = triples.iter().map(|t| t.ratio).fold(0.0, f64::max);
    let lower_bound_violations = triples
        .iter()
        .filter(|t| t.ratio < 1.0 - t.tolerance - 1e-12)
        .count();

    let mut strong = Vec::new();
    for n in 1..=opts.max_shared {
        let mut worst: f64 = 0.0;
        let mut tol: f64 = 0.0;
        let mut pairs = 0;
        for _ in 0..opts.pairs_per_length {
            let m = random_normal_form(group, n, None, &mut rng);
            let first = m.syllables()[0].factor_id();
            let last = m.last_factor();
            // x⁻¹ = a, so x = a⁻¹ and x⁻¹ m is reduced when a avoids m's first factor
            let behind = |rng: &mut ChaCha8Rng| {
                let a = random_normal_form(group, 2, Some(first), rng);
                group.invert(&GroupElement::from_path(
                    &a.syllables().iter().rev().copied().collect::<Vec<_>>(),
                ))
            };
            let x = behind(&mut rng);
            let x2 = behind(&mut rng);
            let y = group.mul(&m, &random_normal_form(group, 2, last, &mut rng));
            let y2 = group.mul(&m, &random_normal_form(group, 2, last, &mut rng));
            if x == x2 || y == y2 {
                continue;
            }
            let eval = || -> Result<(f64, f64)> {
                let (a, ea) = green_pair(oracle, &x, &y, r)?;
                let (b, eb) = green_pair(oracle, &x2, &y2, r)?;
                let (c, ec) = green_pair(oracle, &x2, &y, r)?;
                let (d, ed) = green_pair(oracle, &x, &y2, r)?;
                Ok((a * b / (c * d), ea + eb + ec + ed))
            };
            match eval() {
                Ok((cross, t)) => {
                    pairs += 1;
                    worst = worst.max((cross - 1.0).abs());
                    tol = tol.max(t);
                }
                Err(_) => skipped += 1,
            }
        }
        strong.push(StrongRow {
            shared: n,
            pairs,
            max_deviation: worst,
            tolerance: tol,
        });
    }
    let (strong_c, strong_rho) = geometric_fit(
        &strong
            .iter()
            .filter(|s| s.pairs > 0)
            .map(|s| (s.shared as f64, s.max_deviation))
            .collect::<Vec<_>>(),
    );
    Ok(AnconaReport {
        r,
        seed: opts.seed,
        triples,
        skipped,
        min_ratio,
        max_ratio,
        lower_bound_violations,
        strong,
        strong_c,
        strong_rho,
        fellow_travel_constant: 0,
    })
}

/// Least-squares fit of `v ≈ c ρ^n` to the positive points; `(max, 0)` when fewer than two.
pub fn geometric_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 1e-14).copied().collect();
    if pts.len() < 2 {
        return (points.iter().map(|p| p.1).fold(0.0, f64::max), 0.0);
    }
    let x: Vec<Vec<f64>> = pts.iter().map(|p| vec![1.0, p.0]).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    match least_squares(&x, &y) {
        Some((b, _)) => (b[0].exp(), b[1].exp()),
        None => (f64::NAN, f64::NAN),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LltMethod {
    LogRegression,
    RatioRichardson,
    Joint,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct LltEstimate {
    pub method: LltMethod,
    pub alpha: f64,
    /// Two standard errors (plus, for the plain regression, its distance to the
    /// ratio estimate); the Richardson spread for the ratio method.
    pub band: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct LltFit {
    pub period: usize,
    pub r_hat: f64,
    pub window: (usize, usize),
    pub points: usize,
    /// `ln p_n + n ln R̂ + α̂ ln n` regressed on `ln n`.
    pub regression: LltEstimate,
    pub ratio: LltEstimate,
    /// Free `R`, `α` and constant.
    pub joint: LltEstimate,
    pub joint_r: f64,
    pub max_residual: f64,
    /// Disagreements beyond the bands.
    pub warnings: Vec<String>,
}

impl LltFit {
    pub fn alpha(&self) -> f64 {
        self.regression.alpha
    }
}

/// Fits `p_n ≈ C R̂^{-n} n^{-α}` on the lattice `n ≡ 0 mod period` inside `window`.
pub fn llt_fit(log_p: &[f64], period: usize, r_hat: f64, window: (usize, usize)) -> Result<LltFit> {
    let period = period.max(1);
    let (lo, hi) = window;
    let ns: Vec<usize> = (lo.max(1)..=hi.min(log_p.len().saturating_sub(1)))
        .filter(|&n| n % period == 0 && log_p[n].is_finite())
        .collect();
    if ns.len() < 50 {
        return Err(Error::TooFewTerms(format!(
            "window {lo}..{hi} holds {} usable lattice points, need 50",
            ns.len()
        )));
    }
    let lr = r_hat.ln();
    let x: Vec<Vec<f64>> = ns.iter().map(|&n| vec![1.0, (n as f64).ln()]).collect();
    let y: Vec<f64> = ns.iter().map(|&n| log_p[n] + n as f64 * lr).collect();
    let (b, se) = least_squares(&x, &y).ok_or_else(|| Error::DegenerateInput("singular regression".into()))?;
    let alpha = -b[1];
    let max_residual = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| (yi - b[0] - b[1] * xi[1]).abs())
        .fold(0.0, f64::max);
    let se_alpha = se[1];

    // α_n = -(ln p_{n+s} - ln p_n + s ln R̂) / ln(1 + s/n), extrapolated in 1/n
    let s = period;
    let local: Vec<(f64, f64)> = ns
        .iter()
        .filter(|&&n| n + s < log_p.len() && log_p[n + s].is_finite() && n + s <= hi)
        .map(|&n| {
            let a = -(log_p[n + s] - log_p[n] + s as f64 * lr) / (1.0 + s as f64 / n as f64).ln();
            (1.0 / (n as f64 + 0.5 * s as f64), a)
        })
        .collect();
    let k = local.len();
    let picks = [k - 1, (3 * k) / 4, k / 2];
    let h: Vec<f64> = picks.iter().map(|&i| local[i].0).collect();
    let v: Vec<f64> = picks.iter().map(|&i| local[i].1).collect();
    let table = neville(&h, &v);
    let ratio = LltEstimate {
        method: LltMethod::RatioRichardson,
        alpha: table[2][0],
        band: (table[2][0] - table[1][0]).abs(),
    };
    // the plain regression ignores the 1/n corrections that the Richardson step
    // removes, so their difference is part of its uncertainty
    let regression = LltEstimate {
        method: LltMethod::LogRegression,
        alpha,
        band: 2.0 * se_alpha + (alpha - ratio.alpha).abs(),
    };

    // centred columns keep the normal equations well conditioned
    let n_mid = ns.iter().sum::<usize>() as f64 / ns.len() as f64;
    let l_mid = ns.iter().map(|&n| (n as f64).ln()).sum::<f64>() / ns.len() as f64;
    let xj: Vec<Vec<f64>> = ns
        .iter()
        .map(|&n| vec![1.0, (n as f64 - n_mid) / n_mid, (n as f64).ln() - l_mid])
        .collect();
    let yj: Vec<f64> = ns.iter().map(|&n| log_p[n]).collect();
    let (bj, sej) = least_squares(&xj, &yj).ok_or_else(|| Error::DegenerateInput("singular joint regression".into()))?;
    let joint_r = (-bj[1] / n_mid).exp();
    let joint = LltEstimate {
        method: LltMethod::Joint,
        alpha: -bj[2],
        band: 2.0 * sej[2],
    };
    if (joint_r / r_hat - 1.0).abs() > 1e-2 {
        return Err(Error::DegenerateInput(format!(
            "R̂ = {r_hat} is inconsistent with the sequence: the free fit gives R = {joint_r}"
        )));
    }
    let mut warnings = Vec::new();
    for other in [&joint] {
        let band = regression.band + other.band;
        if (other.alpha - alpha).abs() > band.max(1e-6) {
            warnings.push(format!(
                "{:?} gives α = {:.4}, {:.2e} from the regression (bands sum to {:.2e})",
                other.method,
                other.alpha,
                (other.alpha - alpha).abs(),
                band
            ));
        }
    }
    Ok(LltFit {
        period,
        r_hat,
        window,
        points: ns.len(),
        regression,
        ratio,
        joint,
        joint_r,
        max_residual,
        warnings,
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RatioRow {
    pub r: f64,
    pub i1: f64,
    pub i2: f64,
    /// `I2 / I1³`.
    pub ratio: f64,
    /// `I1 √(R̂ - r)`.
    pub i1_scaled: f64,
    /// `G'(e,e|r) √(R̂ - r)`.
    pub g_prime_scaled: f64,
    /// Relative tails of I1 and I2 combined.
    pub tolerance: f64,
    /// The tail is a sizeable part of the value.
    pub tail_dominated: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RatioReport {
    pub r_hat: f64,
    pub rows: Vec<RatioRow>,
    /// `max / min - 1` of each column over the grid.
    pub ratio_band: f64,
    pub i1_scaled_band: f64,
    pub g_prime_scaled_band: f64,
    /// Grid points where a scaled column moves against the trend of its neighbours.
    pub non_monotone: Vec<f64>,
}

fn band(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
    hi / lo - 1.0
}

/// Tabulates the ratios that the theory predicts to stay bounded as `r → R_μ`.
pub fn ratio_report(green: &RadialGreen, grid: &[f64]) -> Result<RatioReport> {
    let r_hat = green.r_hat();
    let mut rows = Vec::new();
    for &r in grid {
        if !(0.0..r_hat).contains(&r) {
            return Err(Error::InvalidArgument(format!("grid point {r} outside [0, R̂ = {r_hat})")));
        }
        let s = i_sums(green, r, 1e-8)?;
        let g = green_table(green, &[r])?.remove(0);
        let root = (r_hat - r).sqrt();
        let tolerance = s.i1_tail / s.i1 * 3.0 + s.i2_tail / s.i2;
        rows.push(RatioRow {
            r,
            i1: s.i1,
            i2: s.i2,
            ratio: s.ratio(),
            i1_scaled: s.i1 * root,
            g_prime_scaled: g.g_prime * root,
            tolerance,
            tail_dominated: !(tolerance < 0.1),
        });
    }
    let non_monotone = rows
        .windows(3)
        .filter(|w| {
            let d1 = w[1].ratio - w[0].ratio;
            let d2 = w[2].ratio - w[1].ratio;
            d1 * d2 < 0.0
        })
        .map(|w| w[1].r)
        .collect();
    Ok(RatioReport {
        r_hat,
        ratio_band: band(rows.iter().map(|x| x.ratio)),
        i1_scaled_band: band(rows.iter().map(|x| x.i1_scaled)),
        g_prime_scaled_band: band(rows.iter().filter(|x| x.r > 0.0).map(|x| x.g_prime_scaled)),
        rows,
        non_monotone,
    })
}
