//! Sources of Green-function values for arbitrary pairs of group elements.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::series::{GreenSeries, GreenValue, TailMethod};
use super::spectral::{spectral_radius, SpectralRadiusEstimate};
use crate::error::{Error, Result};
use crate::group::{FreeProduct, GroupElement, IndexedBall, OUTSIDE};
use crate::walk::{detect_period, is_radial, return_probabilities_float, RadialChain, StepMeasure};
use crate::Budget;

/// Anything that can evaluate `G(x, y | r)`.
pub trait GreenOracle: Send + Sync {
    fn group(&self) -> &FreeProduct;

    /// The radius of convergence used to reject `r` beyond it.
    fn r_hat(&self) -> f64;

    fn green(&self, x: &GroupElement, y: &GroupElement, r: f64) -> Result<GreenValue>;

    /// `G(e, γ | r)`.
    fn green_from_origin(&self, gamma: &GroupElement, r: f64) -> Result<GreenValue> {
        self.green(&GroupElement::identity(), gamma, r)
    }
}

fn check_radius(r: f64, r_hat: f64) -> Result<()> {
    if !(0.0..=r_hat * (1.0 + 1e-6)).contains(&r) {
        return Err(Error::Divergence(format!(
            "r = {r} lies outside [0, R̂ = {r_hat}]"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RadialGreenOptions {
    /// Horizon used to estimate R̂ from `p_n(e,e)`.
    pub estimate_horizon: usize,
    /// Largest horizon used for any series (reached only at r = R̂).
    pub max_horizon: usize,
    /// Use this radius instead of the extrapolated one (the estimate is still reported).
    pub r_hat: Option<f64>,
}

impl Default for RadialGreenOptions {
    fn default() -> Self {
        RadialGreenOptions {
            estimate_horizon: 20_000,
            max_horizon: 200_000,
            r_hat: None,
        }
    }
}

/// Green values of a radial walk at every distance `0..=m_max`, for one `r`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RadialRow {
    pub r: f64,
    /// `g[u] = G(e, γ | r)` for any `|γ| = u`.
    pub g: Vec<GreenValue>,
    /// `d/dr (r g[u])`.
    pub drg: Vec<GreenValue>,
    pub horizon: usize,
    /// log10 of the chain-truncation indicator.
    pub boundary_log10: f64,
}

/// Green functions of a radial walk via its distance chain.
///
/// Because `p_n(x, y) = P^n(|x⁻¹y|, 0)`, one backward pass of the chain gives
/// `G(x, y | r)` for every pair at once.
pub struct RadialGreen {
    group: FreeProduct,
    chain: RadialChain,
    estimate: SpectralRadiusEstimate,
    options: RadialGreenOptions,
    cache: Mutex<HashMap<u64, Arc<RadialRow>>>,
}

impl RadialGreen {
    pub fn new(group: &FreeProduct, mu: &StepMeasure, options: RadialGreenOptions) -> Result<Self> {
        let chain = is_radial(group, mu)
            .ok_or_else(|| Error::NotRadial("RadialGreen needs a radial measure".into()))?;
        let (table, _) = chain.log_return_table(&[0], options.estimate_horizon);
        let mut estimate = spectral_radius(&table[0], chain.period())?;
        if let Some(r) = options.r_hat {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!("R̂ override {r} must be positive")));
            }
            estimate.r_hat = r;
            estimate.rho_hat = 1.0 / r;
            estimate.consistent = estimate.rho_lower <= estimate.rho_hat * (1.0 + 1e-12);
        }
        Ok(RadialGreen {
            group: group.clone(),
            chain,
            estimate,
            options,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn chain(&self) -> &RadialChain {
        &self.chain
    }

    pub fn estimate(&self) -> &SpectralRadiusEstimate {
        &self.estimate
    }

    /// Enough terms that `(r/R̂)^N` is negligible, capped at `max_horizon`.
    pub fn horizon_for(&self, r: f64) -> usize {
        let q = r / self.estimate.r_hat;
        if q >= 1.0 - 1e-9 {
            return self.options.max_horizon;
        }
        let n = 300.0 + 40.0 / (-q.ln());
        (n.min(self.options.max_horizon as f64)) as usize
    }

    /// The coefficient sequence of `G(e, γ)` for `|γ| = m`, as a standalone series.
    pub fn series(&self, m: usize, horizon: usize) -> GreenSeries {
        let (mut table, _) = self.chain.log_return_table(&[m], horizon);
        GreenSeries::new(
            format!("|γ|={m}"),
            table.swap_remove(0),
            self.chain.period(),
            Some(self.estimate.r_hat),
        )
    }

    /// Green values at every distance up to `m_max`.
    pub fn row(&self, r: f64, m_max: usize) -> Result<Arc<RadialRow>> {
        check_radius(r, self.estimate.r_hat)?;
        let key = r.to_bits();
        let mut width = m_max.max(64);
        if let Some(row) = self.cache.lock().expect("cache").get(&key) {
            if row.g.len() > m_max {
                return Ok(row.clone());
            }
            // grow geometrically so a sweep over distances recomputes only a few times
            width = width.max(2 * row.g.len());
        }
        let row = Arc::new(self.compute_row(r, width, self.horizon_for(r)));
        self.cache
            .lock()
            .expect("cache")
            .insert(key, row.clone());
        Ok(row)
    }

    /// Row at an explicit horizon (not cached).
    pub fn row_with_horizon(&self, r: f64, m_max: usize, horizon: usize) -> Result<RadialRow> {
        check_radius(r, self.estimate.r_hat)?;
        Ok(self.compute_row(r, m_max, horizon))
    }

    fn compute_row(&self, r: f64, m_max: usize, horizon: usize) -> RadialRow {
        let p = self.chain.period();
        let width = m_max + 1;
        let mut g = vec![0.0; width];
        let mut d = vec![0.0; width];
        // terms at three well-separated times near the horizon, one slot per residue
        // mod p, for the remainder estimate
        let gap = p * (horizon / (8 * p)).max(1);
        let probe = |n: usize| -> Option<(usize, usize)> {
            (0..3).find_map(|k| {
                let base = horizon.checked_sub(k * gap)?;
                let j = base.checked_sub(n)?;
                (j < p).then_some((2 - k, j))
            })
        };
        let mut probes = vec![[[0.0f64; 3]; 2]; width * p];
        let lr = if r > 0.0 { r.ln() } else { f64::NEG_INFINITY };
        let boundary = self.chain.backward_iterate(m_max, horizon, |n, v, ls| {
            let scale = if n == 0 { 1.0 } else { (ls + n as f64 * lr).exp() };
            let slot = probe(n);
            for m in 0..v.len() {
                let t = v[m] * scale;
                g[m] += t;
                d[m] += (n + 1) as f64 * t;
                if let Some((k, j)) = slot {
                    probes[m * p + j][0][k] = t;
                    probes[m * p + j][1][k] = (n + 1) as f64 * t;
                }
            }
        });
        let remainder = |m: usize, which: usize| -> f64 {
            let Some(j) = (0..p).find(|&j| probes[m * p + j][which][2] > 0.0) else {
                return 0.0;
            };
            let t = probes[m * p + j][which];
            let xs = [0, 1, 2].map(|k| (horizon - j - (2 - k) * gap) as f64);
            series_remainder(xs, t, p as f64)
        };
        let value = |v: f64, rem: f64| GreenValue {
            value: if rem.is_finite() { v + rem } else { v },
            tail: rem,
            horizon,
            method: TailMethod::EmpiricalGeometric,
        };
        RadialRow {
            r,
            g: (0..width).map(|m| value(g[m], remainder(m, 0))).collect(),
            drg: (0..width).map(|m| value(d[m], remainder(m, 1))).collect(),
            horizon,
            boundary_log10: boundary,
        }
    }
}

/// Remainder `Σ_{k ≥ 1} t(x_3 + k s)` of a series whose terms follow
/// `ln t(x) = a + b ln x + c x`, fitted through three sampled terms.
///
/// Returns `inf` when the fitted terms do not decay summably.
fn series_remainder(xs: [f64; 3], ts: [f64; 3], step: f64) -> f64 {
    if ts.iter().any(|&t| t <= 0.0) {
        return if ts[2] > 0.0 { f64::INFINITY } else { 0.0 };
    }
    let ys = ts.map(f64::ln);
    let ls = xs.map(f64::ln);
    // eliminate a, then solve the 2×2 system for (b, c)
    let (l1, l2) = (ls[1] - ls[0], ls[2] - ls[1]);
    let (x1, x2) = (xs[1] - xs[0], xs[2] - xs[1]);
    let (y1, y2) = (ys[1] - ys[0], ys[2] - ys[1]);
    let det = l1 * x2 - l2 * x1;
    if det.abs() < 1e-300 {
        return f64::INFINITY;
    }
    let b = (y1 * x2 - y2 * x1) / det;
    let c = (l1 * y2 - l2 * y1) / det;
    let n = xs[2];
    if c > 1e-12 / n || (c > -1e-12 / n && b >= -1.0) {
        return f64::INFINITY;
    }
    let t_n = ts[2];
    let t = |x: f64| t_n * (b * (x / n).ln() + c * (x - n)).exp();
    // ∫_n^∞ t(x) dx with x = n e^u, Simpson in u
    let h = 0.01;
    let mut integral = 0.0;
    let mut u = 0.0;
    loop {
        let f = |u: f64| t(n * u.exp()) * n * u.exp();
        let piece = h / 6.0 * (f(u) + 4.0 * f(u + h / 2.0) + f(u + h));
        integral += piece;
        u += h;
        if piece < 1e-18 * integral || u > 80.0 {
            break;
        }
    }
    // Euler–Maclaurin: the lattice sum beyond n from the integral
    (integral / step - 0.5 * t_n).max(0.0)
}

impl GreenOracle for RadialGreen {
    fn group(&self) -> &FreeProduct {
        &self.group
    }

    fn r_hat(&self) -> f64 {
        self.estimate.r_hat
    }

    fn green(&self, x: &GroupElement, y: &GroupElement, r: f64) -> Result<GreenValue> {
        let m = self.group.dist(x, y) as usize;
        let row = self.row(r, m)?;
        Ok(row.g[m])
    }
}

/// Estimates R̂ for any measure from a pruned floating-point convolution.
pub fn estimate_radius(
    group: &FreeProduct,
    mu: &StepMeasure,
    horizon: usize,
    budget: &Budget,
) -> Result<SpectralRadiusEstimate> {
    let p = return_probabilities_float(group, mu, horizon, budget)?;
    let positive: Vec<bool> = p.iter().map(|&x| x > 0.0).collect();
    let period = detect_period(&positive)?.period;
    let lp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    spectral_radius(&lp, period)
}

struct BallRow {
    g: Vec<f64>,
    g_inner: Vec<f64>,
    neumann_tail: f64,
    iterations: usize,
}

/// Green functions of an arbitrary measure from the walk killed outside a word ball.
///
/// Values are reported with the difference to the same computation on a smaller
/// ball as part of the tail, so truncation is visible.
pub struct BallGreen {
    group: FreeProduct,
    ball: IndexedBall,
    /// `pred[y * k + j]`: index of `y s_j⁻¹`, or OUTSIDE.
    pred: Vec<u32>,
    weights: Vec<f64>,
    inner_radius: u32,
    r_hat: f64,
    cache: Mutex<HashMap<u64, Arc<BallRow>>>,
}

impl BallGreen {
    /// `radius` is the killing radius; pairs are answered when `|x⁻¹y| ≤ radius - margin`,
    /// where the margin is twice the largest step.
    pub fn new(
        group: &FreeProduct,
        mu: &StepMeasure,
        radius: u32,
        r_hat: f64,
        budget: &Budget,
    ) -> Result<Self> {
        let ball = IndexedBall::new(group, radius, budget)?;
        let inverse_steps: Vec<GroupElement> =
            mu.support().iter().map(|s| group.invert(s)).collect();
        let pred = ball.step_table(group, &inverse_steps);
        let margin = 2 * mu.max_step_length().max(1);
        if radius <= margin {
            return Err(Error::InvalidArgument(format!(
                "ball radius {radius} must exceed the margin {margin}"
            )));
        }
        Ok(BallGreen {
            group: group.clone(),
            ball,
            pred,
            weights: mu.weights_f64(),
            inner_radius: radius - margin,
            r_hat,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Largest `|x⁻¹y|` answered.
    pub fn reach(&self) -> u32 {
        self.inner_radius
    }

    fn killed_green(&self, r: f64, kill: u32) -> Result<(Vec<f64>, f64, usize)> {
        let n = self.ball.len();
        let k = self.weights.len();
        let alive: Vec<bool> = (0..n).map(|i| self.ball.word_length(i) <= kill).collect();
        let mut u = vec![0.0; n];
        u[0] = 1.0;
        let mut g = u.clone();
        let mut prev_mass = 1.0;
        let mut ratio = 0.0;
        for it in 1..=200_000 {
            let next = |y: usize| -> f64 {
                if !alive[y] {
                    return 0.0;
                }
                let mut acc = 0.0;
                for j in 0..k {
                    let x = self.pred[y * k + j];
                    if x != OUTSIDE && alive[x as usize] {
                        acc += u[x as usize] * self.weights[j];
                    }
                }
                r * acc
            };
            #[cfg(feature = "parallel")]
            let v: Vec<f64> = {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(next).collect()
            };
            #[cfg(not(feature = "parallel"))]
            let v: Vec<f64> = (0..n).map(next).collect();
            u = v;
            let mass: f64 = u.iter().sum();
            for (gi, ui) in g.iter_mut().zip(&u) {
                *gi += ui;
            }
            if mass == 0.0 {
                return Ok((g, 0.0, it));
            }
            ratio = mass / prev_mass;
            prev_mass = mass;
            if it > 20 && ratio < 1.0 && mass * ratio / (1.0 - ratio) < 1e-15 * g[0] {
                return Ok((g, mass * ratio / (1.0 - ratio), it));
            }
        }
        Err(Error::NonConvergence(format!(
            "killed-ball Green series at r = {r} still growing (last mass ratio {ratio})"
        )))
    }

    fn row(&self, r: f64) -> Result<Arc<BallRow>> {
        check_radius(r, self.r_hat)?;
        let key = r.to_bits();
        if let Some(row) = self.cache.lock().expect("cache").get(&key) {
            return Ok(row.clone());
        }
        let (g, tail, iterations) = self.killed_green(r, self.ball.radius)?;
        let (g_inner, _, _) = self.killed_green(r, self.inner_radius)?;
        let row = Arc::new(BallRow {
            g,
            g_inner,
            neumann_tail: tail,
            iterations,
        });
        self.cache.lock().expect("cache").insert(key, row.clone());
        Ok(row)
    }
}

impl GreenOracle for BallGreen {
    fn group(&self) -> &FreeProduct {
        &self.group
    }

    fn r_hat(&self) -> f64 {
        self.r_hat
    }

    fn green(&self, x: &GroupElement, y: &GroupElement, r: f64) -> Result<GreenValue> {
        let z = self.group.mul(&self.group.invert(x), y);
        if self.group.word_length(&z) > self.inner_radius {
            return Err(Error::InvalidArgument(format!(
                "|x⁻¹y| = {} exceeds the reach {} of the killed ball",
                self.group.word_length(&z),
                self.inner_radius
            )));
        }
        let i = self.ball.index_of(&z).expect("inside the ball");
        let row = self.row(r)?;
        Ok(GreenValue {
            value: row.g[i],
            tail: row.neumann_tail + (row.g[i] - row.g_inner[i]).abs(),
            horizon: row.iterations,
            method: TailMethod::KilledBall,
        })
    }
}
