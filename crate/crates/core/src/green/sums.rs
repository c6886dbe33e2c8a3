//! Derivative identities and the sums I^(1), I^(2), I^(k)_H.

use super::oracle::{GreenOracle, RadialGreen};
use super::series::{GreenValue, TailMethod};
use crate::error::{Error, Result};
use crate::group::{word_ball_layers, FreeProduct, GroupElement, SphereCensus, WordSpheres};
use crate::Budget;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeMode {
    /// Differentiate the truncated power series.
    Series,
    /// Evaluate `Σ_γ G(x,γ|r) G(γ,y|r)` on a growing ball.
    Identity,
}

/// Contribution of one relative sphere `Ŝ_m`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SphereSum {
    pub m: usize,
    /// `Σ_{Ŝ_m} H(e,γ|r)`.
    pub h_sum: f64,
    /// `Σ_{Ŝ_m} Φ(γ) G(γ,e|r)`, this sphere's share of I2.
    pub i2_part: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ISums {
    pub r: f64,
    pub i1: f64,
    pub i2: f64,
    pub i1_tail: f64,
    pub i2_tail: f64,
    pub spheres: Vec<SphereSum>,
    /// Word-length truncation of the outer sum.
    pub word_radius: u32,
    /// Relative spheres reported before one fell below the stop tolerance.
    pub relative_radius: usize,
    pub stop_reason: String,
}

impl ISums {
    pub fn ratio(&self) -> f64 {
        self.i2 / self.i1.powi(3)
    }
}

/// Sums `Σ_w c_w` over word lengths with terms from `term(w)`, growing `W` until the
/// geometric tail estimate is below `tol` relative. Returns (sum, tail, W).
fn grow_until_small(
    start: u32,
    limit: u32,
    tol: f64,
    mut terms: impl FnMut(u32) -> Result<Vec<f64>>,
) -> Result<(Vec<f64>, f64, u32)> {
    let mut w_max = start;
    loop {
        let t = terms(w_max)?;
        let total: f64 = t.iter().sum();
        let k = t.len() - 1;
        let (a1, a0) = (t[k], t[k - 1]);
        let tail = if a1 == 0.0 {
            0.0
        } else if a0 > 0.0 && a1 < a0 {
            let q = a1 / a0;
            a1 * q / (1.0 - q)
        } else {
            f64::INFINITY
        };
        if tail <= tol * total {
            return Ok((t, tail, w_max));
        }
        if w_max >= limit {
            let shown: Vec<String> = t.iter().rev().take(8).map(|x| format!("{x:.3e}")).collect();
            return Err(Error::NonConvergence(format!(
                "word-length terms still significant at W = {w_max} (last terms, newest first: {})",
                shown.join(", ")
            )));
        }
        w_max = (w_max * 2).min(limit);
    }
}

/// Largest word length whose sphere count stays finite in f64.
fn census_limit(group: &FreeProduct) -> u32 {
    let c = SphereCensus::new(group, 64);
    let growth = (c.word_sphere(64) / c.word_sphere(32)).powf(1.0 / 32.0).max(1.0001);
    ((700.0 / growth.ln()) as u32).clamp(64, 4096)
}

/// `I1(r) = Σ_γ H(e,γ|r)` and `I2(r) = Σ_γ Φ(γ) G(γ,e|r)` for a radial walk.
///
/// `Φ(γ) = Σ_{γ'} G(e,γ'|r) G(γ',γ|r)` is the inner sum; by the first-derivative
/// identity it equals `d/dr (r G(e,γ|r))`, which the radial row provides directly.
pub fn i_sums(green: &RadialGreen, r: f64, sphere_stop_tol: f64) -> Result<ISums> {
    let group = green.group();
    let limit = census_limit(group);
    let census_cell = std::cell::RefCell::new(SphereCensus::new(group, 64));
    let mut row_cell = None;
    let (t1, tail1, w_max) = grow_until_small(32, limit, sphere_stop_tol * 1e-3, |w| {
        let row = green.row(r, w as usize)?;
        if census_cell.borrow().max_word_length < w {
            *census_cell.borrow_mut() = SphereCensus::new(group, w);
        }
        let census = census_cell.borrow();
        let t = (0..=w)
            .map(|u| census.word_sphere(u) * row.g[u as usize].value.powi(2))
            .collect();
        row_cell = Some(row);
        Ok(t)
    })?;
    let row = row_cell.expect("at least one row");
    let census = census_cell.into_inner();
    let t2: Vec<f64> = (0..=w_max)
        .map(|u| census.word_sphere(u) * row.g[u as usize].value * row.drg[u as usize].value)
        .collect();
    let i1: f64 = t1.iter().sum();
    let i2: f64 = t2.iter().sum();
    let k = t2.len() - 1;
    let tail2 = if t2[k] > 0.0 && t2[k] < t2[k - 1] {
        let q = t2[k] / t2[k - 1];
        t2[k] * q / (1.0 - q)
    } else {
        f64::INFINITY
    };
    let mut spheres = Vec::new();
    let mut relative_radius = 0;
    let mut stop_reason = format!("all {} relative spheres within W = {w_max}", census.max_syllables() + 1);
    for m in 0..=census.max_syllables().min(w_max as usize) {
        let mut h = 0.0;
        let mut part = 0.0;
        for u in m as u32..=w_max {
            let n = census.count(m, u);
            h += n * row.g[u as usize].value.powi(2);
            part += n * row.g[u as usize].value * row.drg[u as usize].value;
        }
        spheres.push(SphereSum { m, h_sum: h, i2_part: part });
        relative_radius = m;
        if m > 0 && h < sphere_stop_tol * i1 {
            stop_reason = format!("relative sphere {m} contributes < {sphere_stop_tol:e} of I1");
            break;
        }
    }
    Ok(ISums {
        r,
        i1,
        i2,
        i1_tail: tail1,
        i2_tail: tail2,
        spheres,
        word_radius: w_max,
        relative_radius,
        stop_reason,
    })
}

/// `d/dr (r G(x,y|r))` in either mode, for a radial walk.
pub fn green_derivative(
    green: &RadialGreen,
    x: &GroupElement,
    y: &GroupElement,
    r: f64,
    mode: DerivativeMode,
) -> Result<GreenValue> {
    let group = green.group();
    let m = group.dist(x, y) as usize;
    match mode {
        DerivativeMode::Series => Ok(green.row(r, m.max(16))?.drg[m]),
        DerivativeMode::Identity if m == 0 => {
            let s = i_sums(green, r, 1e-12)?;
            Ok(GreenValue {
                value: s.i1,
                tail: s.i1_tail,
                horizon: s.word_radius as usize,
                method: TailMethod::EmpiricalGeometric,
            })
        }
        DerivativeMode::Identity => {
            derivative_identity(green, x, y, r, 1e-9, 64, &Budget::default())
        }
    }
}

/// `Σ_γ G(x,γ|r) G(γ,y|r)` over word spheres around `x`, for any oracle.
pub fn derivative_identity(
    oracle: &dyn GreenOracle,
    x: &GroupElement,
    y: &GroupElement,
    r: f64,
    tol: f64,
    max_radius: u32,
    budget: &Budget,
) -> Result<GreenValue> {
    let group = oracle.group();
    let mut total = 0.0;
    let mut last = Vec::new();
    let mut count = 0;
    for (w, layer) in WordSpheres::new(group).take(max_radius as usize + 1).enumerate() {
        count += layer.len();
        budget.check(count, "derivative identity")?;
        let mut s = 0.0;
        for d in &layer {
            let gamma = group.mul(x, d);
            let a = oracle.green(x, &gamma, r);
            let b = oracle.green(&gamma, y, r);
            match (a, b) {
                (Ok(a), Ok(b)) => s += a.value * b.value,
                (Err(Error::InvalidArgument(_)), _) | (_, Err(Error::InvalidArgument(_))) => {
                    return finish(total, &last, w);
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        total += s;
        last.push(s);
        if w > 4 && s < tol * total {
            return finish(total, &last, w);
        }
    }
    finish(total, &last, max_radius as usize)
}

fn finish(total: f64, last: &[f64], w: usize) -> Result<GreenValue> {
    let k = last.len();
    let tail = if k >= 2 && last[k - 1] < last[k - 2] && last[k - 2] > 0.0 {
        let q = last[k - 1] / last[k - 2];
        last[k - 1] * q / (1.0 - q)
    } else if k >= 1 && last[k - 1] == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(GreenValue {
        value: total,
        tail,
        horizon: w,
        method: TailMethod::EmpiricalGeometric,
    })
}

/// `I1` and `I2` for any oracle by direct ball sums; the inner sum of I2 grows its
/// radius until the increment is below `inner_tol` (1% by default in reports).
/// Quadratic cost, for small radii.
pub fn i_sums_generic(
    oracle: &dyn GreenOracle,
    r: f64,
    outer_radius: u32,
    inner_max: u32,
    inner_tol: f64,
    budget: &Budget,
) -> Result<ISums> {
    let group = oracle.group();
    let e = GroupElement::identity();
    let outer: Vec<GroupElement> = word_ball_layers(group, outer_radius, budget)?
        .into_iter()
        .flatten()
        .collect();
    let inner_layers = word_ball_layers(group, inner_max, budget)?;
    let mut spheres: Vec<SphereSum> = Vec::new();
    let (mut i1, mut i2) = (0.0, 0.0);
    for gamma in &outer {
        let g_to = oracle.green(&e, gamma, r)?.value;
        let g_back = oracle.green(gamma, &e, r)?.value;
        let mut phi = 0.0;
        for layer in &inner_layers {
            let mut inc = 0.0;
            for gp in layer {
                match (oracle.green(&e, gp, r), oracle.green(gp, gamma, r)) {
                    (Ok(a), Ok(b)) => inc += a.value * b.value,
                    _ => continue,
                }
            }
            phi += inc;
            if inc < inner_tol * phi {
                break;
            }
        }
        let m = gamma.rel_length();
        if spheres.len() <= m {
            spheres.resize_with(m + 1, || SphereSum { m: 0, h_sum: 0.0, i2_part: 0.0 });
        }
        spheres[m].m = m;
        spheres[m].h_sum += g_to * g_back;
        spheres[m].i2_part += phi * g_back;
        i1 += g_to * g_back;
        i2 += phi * g_back;
    }
    Ok(ISums {
        r,
        i1,
        i2,
        i1_tail: f64::NAN,
        i2_tail: f64::NAN,
        relative_radius: spheres.len().saturating_sub(1),
        spheres,
        word_radius: outer_radius,
        stop_reason: format!("word ball of radius {outer_radius}"),
    })
}

/// A sum restricted to one factor subgroup, with its truncation ladder.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ParabolicSum {
    pub factor: usize,
    pub order: usize,
    pub r: f64,
    pub value: f64,
    /// `(factor word-length cap, partial sum)`.
    pub ladder: Vec<(u32, f64)>,
    pub converged: bool,
}

/// `I^(1)_H = Σ_{h∈H} G(e,h)G(h,e)` or `I^(2)_H = Σ_{h,h'∈H} G(e,h')G(h',h)G(h,e)`.
pub fn parabolic_i_sums(
    oracle: &dyn GreenOracle,
    factor: usize,
    r: f64,
    order: usize,
    tol: f64,
) -> Result<ParabolicSum> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidArgument(format!("order must be 1 or 2, got {order}")));
    }
    let group = oracle.group();
    let f = group
        .factors()
        .get(factor)
        .ok_or_else(|| Error::InvalidArgument(format!("no factor {factor}")))?;
    let e = GroupElement::identity();
    let mut ladder = Vec::new();
    let mut cap = 4u32;
    let max_cap = if f.is_finite() { f.generators().len() as u32 + 64 } else { 256 };
    loop {
        let mut elems = vec![e.clone()];
        let all = if f.is_finite() {
            f.nontrivial_elements(None)?
        } else {
            f.nontrivial_elements(Some(cap))?
        };
        elems.extend(all.into_iter().map(GroupElement::single));
        let g0: Vec<f64> = elems
            .iter()
            .map(|h| oracle.green(&e, h, r).map(|v| v.value))
            .collect::<Result<_>>()?;
        let value = if order == 1 {
            let back: Vec<f64> = elems
                .iter()
                .map(|h| oracle.green(h, &e, r).map(|v| v.value))
                .collect::<Result<_>>()?;
            g0.iter().zip(&back).map(|(a, b)| a * b).sum::<f64>()
        } else {
            let mut s = 0.0;
            for (hp, a) in elems.iter().zip(&g0) {
                for h in &elems {
                    s += a * oracle.green(hp, h, r)?.value * oracle.green(h, &e, r)?.value;
                }
            }
            s
        };
        ladder.push((cap, value));
        let n = ladder.len();
        let converged = f.is_finite()
            || (n >= 2 && (ladder[n - 1].1 - ladder[n - 2].1).abs() <= tol * value);
        if converged || cap >= max_cap {
            return Ok(ParabolicSum {
                factor,
                order,
                r,
                value,
                ladder,
                converged,
            });
        }
        cap *= 2;
    }
}
