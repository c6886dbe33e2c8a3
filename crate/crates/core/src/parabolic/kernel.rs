//! First-return kernels of the `r`-weighted walk to a factor subgroup `H_k`.
//!
//! By equivariance `p_{k,r}(h, h') = p_{k,r}(e, h⁻¹h')`, so a kernel is stored as
//! its row at `e`.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::group::{FactorElement, FreeProduct, GroupElement, IndexedBall, OUTSIDE};
use crate::numeric::rational_to_f64;
use crate::walk::{RadialChain, StepMeasure};
use crate::Budget;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMethod {
    /// Dynamic program over group elements outside `H_k` inside a word ball.
    PathDp,
    /// The distance chain of a radial walk, with excursions lumped by distance.
    RadialLumped,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ReturnKernel {
    pub factor: usize,
    pub r: f64,
    /// Path length cutoff `L`.
    pub max_length: usize,
    /// Word-ball radius `B` of the intermediate states (path DP only).
    pub ball_radius: Option<u32>,
    /// `p_{k,r}(e, h)` for the `h` that received mass, in canonical order.
    #[serde(serialize_with = "ser_entries")]
    pub entries: Vec<(FactorElement, f64)>,
    /// Weighted mass of paths killed on leaving the ball.
    pub escaped: f64,
    /// Weighted mass of paths still outside `H_k` after `L` steps.
    pub alive: f64,
    /// Bound on the mass the truncation misses (see `tail_method`).
    pub tail_bound: f64,
    pub tail_method: String,
    pub method: KernelMethod,
}

fn ser_entries<S: serde::Serializer>(
    entries: &[(FactorElement, f64)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(entries.len()))?;
    for (h, w) in entries {
        seq.serialize_element(&(h.factor_id(), h.payload, w))?;
    }
    seq.end()
}

impl ReturnKernel {
    pub fn zero(factor: usize, r: f64) -> Self {
        ReturnKernel {
            factor,
            r,
            max_length: 0,
            ball_radius: None,
            entries: Vec::new(),
            escaped: 0.0,
            alive: 0.0,
            tail_bound: 0.0,
            tail_method: "none".into(),
            method: KernelMethod::PathDp,
        }
    }

    /// `Σ_h p_{k,r}(e, h)`.
    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }

    /// `p_{k,r}(e, h)`.
    pub fn entry(&self, h: &FactorElement) -> f64 {
        self.entries
            .binary_search_by(|(x, _)| x.cmp(h))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// `p_{k,r}(h, h')` via equivariance.
    pub fn entry_between(&self, group: &FreeProduct, h: &FactorElement, hp: &FactorElement) -> f64 {
        let f = group.factor(self.factor);
        self.entry(&f.mul(&f.inv(h), hp))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|(_, w)| *w == 0.0)
    }
}

/// The factor element `γ` represents when `γ ∈ H_k`.
fn in_factor(x: &GroupElement, k: usize) -> Option<FactorElement> {
    match x.syllables() {
        [] => Some(FactorElement::identity(k)),
        [s] if s.factor_id() == k => Some(*s),
        _ => None,
    }
}

fn check_factor(group: &FreeProduct, k: usize) -> Result<()> {
    if k >= group.n_factors() {
        return Err(Error::InvalidArgument(format!(
            "factor {k} does not exist (the product has {})",
            group.n_factors()
        )));
    }
    Ok(())
}

/// Floating-point first-return kernel by the path dynamic program.
///
/// Intermediate states are the elements outside `H_k` of word length at most `B`;
/// paths are followed for at most `L` steps.
pub fn first_return_kernel(
    group: &FreeProduct,
    mu: &StepMeasure,
    k: usize,
    r: f64,
    max_length: usize,
    ball_radius: u32,
    budget: &Budget,
) -> Result<ReturnKernel> {
    check_factor(group, k)?;
    if r == 0.0 || max_length == 0 {
        return Ok(ReturnKernel {
            max_length,
            ball_radius: Some(ball_radius),
            ..ReturnKernel::zero(k, r)
        });
    }
    let ball = IndexedBall::new(group, ball_radius, budget)?;
    let n = ball.len();
    let steps = mu.support();
    let w: Vec<f64> = mu.weights_f64().into_iter().map(|x| x * r).collect();
    let ns = steps.len();
    let table = ball.step_table(group, steps);
    let member: Vec<Option<FactorElement>> =
        ball.elements().iter().map(|x| in_factor(x, k)).collect();
    let mut row: BTreeMap<FactorElement, f64> = BTreeMap::new();
    let mut escaped = 0.0;
    // first step from e
    let mut alive = vec![0.0; n];
    for j in 0..ns {
        let y = table[j];
        if y == OUTSIDE {
            escaped += w[j];
        } else if let Some(h) = member[y as usize] {
            *row.entry(h).or_insert(0.0) += w[j];
        } else {
            alive[y as usize] += w[j];
        }
    }
    let w_total: f64 = w.iter().sum();
    for _ in 1..max_length {
        let mut next = vec![0.0; n];
        let mass: f64 = alive.iter().sum();
        if mass == 0.0 {
            break;
        }
        let mut kept = 0.0;
        for x in 0..n {
            let m = alive[x];
            if m == 0.0 {
                continue;
            }
            for j in 0..ns {
                let y = table[x * ns + j];
                if y == OUTSIDE {
                    continue;
                }
                let add = m * w[j];
                kept += add;
                if let Some(h) = member[y as usize] {
                    *row.entry(h).or_insert(0.0) += add;
                } else {
                    next[y as usize] += add;
                }
            }
        }
        escaped += mass * w_total - kept;
        alive = next;
        budget.check(0, "first-return kernel")?;
    }
    let alive_mass: f64 = alive.iter().sum();
    Ok(ReturnKernel {
        factor: k,
        r,
        max_length,
        ball_radius: Some(ball_radius),
        entries: row.into_iter().collect(),
        escaped,
        alive: alive_mass,
        tail_bound: escaped + alive_mass,
        // a path outside H_k returns through a single point of H_k, so for a
        // symmetric measure at r ≤ R its future weight is at most F ≤ 1
        tail_method: "escaped + alive mass".into(),
        method: KernelMethod::PathDp,
    })
}

/// Exact first-return kernel for rational `r`.
#[derive(Clone, Debug)]
pub struct ExactReturnKernel {
    pub entries: BTreeMap<FactorElement, BigRational>,
    pub escaped: BigRational,
    pub alive: BigRational,
}

impl ExactReturnKernel {
    pub fn mass(&self) -> BigRational {
        self.entries.values().sum()
    }
}

pub fn first_return_kernel_exact(
    group: &FreeProduct,
    mu: &StepMeasure,
    k: usize,
    r: &BigRational,
    max_length: usize,
    ball_radius: u32,
    budget: &Budget,
) -> Result<ExactReturnKernel> {
    check_factor(group, k)?;
    if r.is_zero() {
        return Ok(ExactReturnKernel {
            entries: BTreeMap::new(),
            escaped: BigRational::zero(),
            alive: BigRational::zero(),
        });
    }
    // weights r μ(s) = num_s / den over a common denominator
    let r_num = r.numer().to_biguint().ok_or_else(|| {
        Error::InvalidArgument("r must be non-negative".into())
    })?;
    let den = r.denom().to_biguint().expect("positive") * mu.denominator();
    let nums: Vec<BigUint> = mu.numerators().iter().map(|m| m * &r_num).collect();
    let mut scale = BigUint::one();
    let mut row: BTreeMap<FactorElement, BigUint> = BTreeMap::new();
    let mut escaped = BigUint::zero();
    let mut alive: HashMap<GroupElement, BigUint> =
        HashMap::from([(GroupElement::identity(), BigUint::one())]);
    for _ in 0..max_length {
        let mut next: HashMap<GroupElement, BigUint> = HashMap::new();
        // rescale everything already recorded to the new denominator
        for v in row.values_mut() {
            *v *= &den;
        }
        escaped *= &den;
        scale *= &den;
        for (x, m) in &alive {
            for (s, w) in mu.support().iter().zip(&nums) {
                let y = group.mul(x, s);
                let add = m * w;
                if group.word_length(&y) > ball_radius {
                    escaped += add;
                } else if let Some(h) = in_factor(&y, k) {
                    *row.entry(h).or_insert_with(BigUint::zero) += add;
                } else {
                    next.insert(y.clone(), next.get(&y).cloned().unwrap_or_default() + add);
                }
            }
        }
        budget.check(next.len(), "exact first-return kernel")?;
        alive = next;
    }
    let q = |x: BigUint| BigRational::new(BigInt::from(x), BigInt::from(scale.clone()));
    Ok(ExactReturnKernel {
        entries: row.into_iter().map(|(h, v)| (h, q(v))).collect(),
        escaped: q(escaped),
        alive: q(alive.into_values().sum()),
    })
}

/// Checks that `μ` charges only `e` and single syllables, which makes every
/// excursion out of `H_k` come back through its starting point.
fn factor_supported(mu: &StepMeasure) -> bool {
    mu.support().iter().all(|x| x.rel_length() <= 1)
}

/// First-return kernel of a radial walk, lumping excursions by distance.
///
/// A path leaving `H_k` from `h` enters a branch `h·H_j·…` and can only come back
/// through `h`, so the off-factor steps feed the `e` entry with the first-passage
/// series from distance 1 to 0, which the distance chain computes exactly. The mass
/// still at distance `d` after `L` steps returns with weight `F(r)^d`, which gives
/// the tail bound.
pub fn radial_return_kernel(
    group: &FreeProduct,
    mu: &StepMeasure,
    chain: &RadialChain,
    k: usize,
    r: f64,
    max_length: usize,
) -> Result<ReturnKernel> {
    check_factor(group, k)?;
    if !factor_supported(mu) {
        return Err(Error::InvalidArgument(
            "the lumped kernel needs a measure supported on the factors".into(),
        ));
    }
    if r == 0.0 || max_length == 0 {
        return Ok(ReturnKernel {
            max_length,
            method: KernelMethod::RadialLumped,
            ..ReturnKernel::zero(k, r)
        });
    }
    let mut row: BTreeMap<FactorElement, f64> = BTreeMap::new();
    let mut off = 0.0;
    for (x, w) in mu.iter() {
        let w = r * rational_to_f64(w);
        match in_factor(x, k) {
            Some(h) => *row.entry(h).or_insert(0.0) += w,
            None => off += w,
        }
    }
    let b = chain.down.to_f64().unwrap_or(0.0) * r;
    let c = chain.stay.to_f64().unwrap_or(0.0) * r;
    let a = chain.up.to_f64().unwrap_or(0.0) * r;
    // mass at distance d ≥ 1, absorbed on reaching 0
    let mut v = vec![0.0; max_length + 2];
    v[1] = off;
    let mut absorbed = 0.0;
    for t in 1..max_length {
        absorbed += b * v[1];
        let top = (t + 1).min(max_length);
        let mut w = vec![0.0; max_length + 2];
        for d in 1..=top {
            let from_below = if d >= 2 { a * v[d - 1] } else { 0.0 };
            w[d] = from_below + c * v[d] + b * v[d + 1];
        }
        v = w;
    }
    let q = chain.first_passage_down(r).unwrap_or(1.0).min(1.0);
    let alive: f64 = v.iter().sum();
    let tail: f64 = v
        .iter()
        .enumerate()
        .skip(1)
        .map(|(d, m)| m * q.powi(d as i32))
        .sum();
    *row.entry(FactorElement::identity(k)).or_insert(0.0) += absorbed;
    Ok(ReturnKernel {
        factor: k,
        r,
        max_length,
        ball_radius: None,
        entries: row.into_iter().collect(),
        escaped: 0.0,
        alive,
        tail_bound: tail,
        tail_method: format!("Σ_d alive(d)·q^d with q = {q}"),
        method: KernelMethod::RadialLumped,
    })
}

/// The lumped kernel in exact arithmetic; returns the row and the alive mass by distance.
pub fn radial_return_kernel_exact(
    group: &FreeProduct,
    mu: &StepMeasure,
    chain: &RadialChain,
    k: usize,
    r: &BigRational,
    max_length: usize,
) -> Result<(BTreeMap<FactorElement, BigRational>, Vec<BigRational>)> {
    check_factor(group, k)?;
    if !factor_supported(mu) {
        return Err(Error::InvalidArgument(
            "the lumped kernel needs a measure supported on the factors".into(),
        ));
    }
    let mut row: BTreeMap<FactorElement, BigRational> = BTreeMap::new();
    let mut off = BigRational::zero();
    for (x, w) in mu.iter() {
        let w = r * w;
        match in_factor(x, k) {
            Some(h) => *row.entry(h).or_insert_with(BigRational::zero) += w,
            None => off += w,
        }
    }
    let b = &chain.down * r;
    let c = &chain.stay * r;
    let a = &chain.up * r;
    let mut v = vec![BigRational::zero(); max_length + 2];
    v[1] = off;
    let mut absorbed = BigRational::zero();
    for t in 1..max_length {
        absorbed += &b * &v[1];
        let top = (t + 1).min(max_length);
        let mut w = vec![BigRational::zero(); max_length + 2];
        for d in 1..=top {
            let mut x = &c * &v[d] + &b * &v[d + 1];
            if d >= 2 {
                x += &a * &v[d - 1];
            }
            w[d] = x;
        }
        v = w;
    }
    *row.entry(FactorElement::identity(k))
        .or_insert_with(BigRational::zero) += absorbed;
    Ok((row, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::is_radial;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn zero_parameter_gives_zero_kernel() {
        let f2 = FreeProduct::free_group(2).unwrap();
        let mu = StepMeasure::simple_random_walk(&f2).unwrap();
        let k = first_return_kernel(&f2, &mu, 0, 0.0, 10, 5, &Budget::default()).unwrap();
        assert!(k.is_zero());
    }

    #[test]
    fn path_dp_and_lumped_dp_agree() {
        let f2 = FreeProduct::free_group(2).unwrap();
        let mu = StepMeasure::simple_random_walk(&f2).unwrap();
        let chain = is_radial(&f2, &mu).unwrap();
        // with B ≥ L nothing can escape, so both truncations see the same paths
        let a = first_return_kernel(&f2, &mu, 0, 1.0, 12, 12, &Budget::default()).unwrap();
        let b = radial_return_kernel(&f2, &mu, &chain, 0, 1.0, 12).unwrap();
        assert_eq!(a.escaped, 0.0);
        for (h, w) in &b.entries {
            assert!((a.entry(h) - w).abs() < 1e-14, "{h:?}");
        }
    }

    #[test]
    fn exact_dp_variants_agree() {
        let f2 = FreeProduct::free_group(2).unwrap();
        let mu = StepMeasure::simple_random_walk(&f2).unwrap();
        let chain = is_radial(&f2, &mu).unwrap();
        let a = first_return_kernel_exact(&f2, &mu, 1, &q(1, 1), 9, 9, &Budget::default()).unwrap();
        let (b, _) = radial_return_kernel_exact(&f2, &mu, &chain, 1, &q(1, 1), 9).unwrap();
        assert_eq!(a.entries, b);
        assert_eq!(a.entries[&FactorElement::lattice(1, &[1]).unwrap()], q(1, 4));
    }

    #[test]
    fn entries_grow_with_truncation_and_r() {
        let f2 = FreeProduct::free_group(2).unwrap();
        let mu = StepMeasure::simple_random_walk(&f2).unwrap();
        let e = FactorElement::identity(0);
        let k1 = first_return_kernel(&f2, &mu, 0, 1.0, 8, 6, &Budget::default()).unwrap();
        let k2 = first_return_kernel(&f2, &mu, 0, 1.0, 10, 8, &Budget::default()).unwrap();
        let k3 = first_return_kernel(&f2, &mu, 0, 1.1, 10, 8, &Budget::default()).unwrap();
        assert!(k1.entry(&e) <= k2.entry(&e) && k2.entry(&e) <= k3.entry(&e));
    }

    #[test]
    fn equivariance() {
        let f2 = FreeProduct::free_group(2).unwrap();
        let mu = StepMeasure::simple_random_walk(&f2).unwrap();
        let k = first_return_kernel(&f2, &mu, 0, 1.0, 10, 8, &Budget::default()).unwrap();
        let h = FactorElement::lattice(0, &[3]).unwrap();
        let hp = FactorElement::lattice(0, &[4]).unwrap();
        let a = FactorElement::lattice(0, &[1]).unwrap();
        assert_eq!(k.entry_between(&f2, &h, &hp), k.entry(&a));
    }
}
