//! Exact convolution powers with a common denominator.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::measure::StepMeasure;
use crate::error::Result;
use crate::group::{FreeProduct, GroupElement, SphereCensus};
use crate::Budget;

/// The law of `X_n` restricted to a word ball, as integer numerators over `D^n`.
#[derive(Clone, Debug)]
pub struct Distribution {
    pub n: usize,
    pub ball_bound: u32,
    denominator: BigUint,
    masses: BTreeMap<GroupElement, BigUint>,
    escaped: BigUint,
}

impl Distribution {
    pub fn point_mass() -> Self {
        Distribution {
            n: 0,
            ball_bound: 0,
            denominator: BigUint::one(),
            masses: BTreeMap::from([(GroupElement::identity(), BigUint::one())]),
            escaped: BigUint::zero(),
        }
    }

    pub fn mass(&self, x: &GroupElement) -> BigRational {
        self.masses
            .get(x)
            .map(|m| ratio(m, &self.denominator))
            .unwrap_or_else(BigRational::zero)
    }

    pub fn total(&self) -> BigRational {
        ratio(&self.masses.values().sum(), &self.denominator)
    }

    /// Mass that left the ball (counted once, when it left).
    pub fn escaped_mass(&self) -> BigRational {
        ratio(&self.escaped, &self.denominator)
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Elements with positive mass, in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, BigRational)> + '_ {
        self.masses.iter().map(|(x, m)| (x, ratio(m, &self.denominator)))
    }
}

fn ratio(num: &BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

type Masses = HashMap<GroupElement, BigUint>;

/// One convolution step: `new(x s) += old(x) μ(s)`. States rejected by `keep`
/// are dropped and their mass is returned separately.
fn step(
    group: &FreeProduct,
    mu: &StepMeasure,
    current: &Masses,
    keep: &(impl Fn(&GroupElement) -> bool + Sync),
) -> (Masses, BigUint) {
    let work = |chunk: &[(&GroupElement, &BigUint)]| {
        let mut out: Masses = HashMap::new();
        let mut lost = BigUint::zero();
        for &(x, m) in chunk {
            for (s, w) in mu.support().iter().zip(mu.numerators()) {
                let y = group.mul(x, s);
                let add = m * w;
                if keep(&y) {
                    *out.entry(y).or_insert_with(BigUint::zero) += add;
                } else {
                    lost += add;
                }
            }
        }
        (out, lost)
    };
    let entries: Vec<(&GroupElement, &BigUint)> = current.iter().collect();
    #[cfg(feature = "parallel")]
    let parts: Vec<(Masses, BigUint)> = {
        use rayon::prelude::*;
        let chunk = (entries.len() / (4 * rayon::current_num_threads())).max(256);
        entries.par_chunks(chunk).map(work).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts = vec![work(&entries)];
    // integer addition is exact, so the merge order cannot change the result
    let mut iter = parts.into_iter();
    let (mut out, mut lost) = iter.next().unwrap_or_default();
    for (part, l) in iter {
        lost += l;
        for (y, m) in part {
            *out.entry(y).or_insert_with(BigUint::zero) += m;
        }
    }
    (out, lost)
}

/// Exact law of `X_n` started at `e`, restricted to the word ball of `ball_bound`.
///
/// Defaults to `n * max_step_length`, in which case nothing escapes.
pub fn convolve_power(
    group: &FreeProduct,
    mu: &StepMeasure,
    n: usize,
    ball_bound: Option<u32>,
    budget: &Budget,
) -> Result<Distribution> {
    let bound = ball_bound.unwrap_or(n as u32 * mu.max_step_length());
    let mut current: Masses = HashMap::from([(GroupElement::identity(), BigUint::one())]);
    let mut denominator = BigUint::one();
    let mut escaped = BigUint::zero();
    let keep = |y: &GroupElement| group.word_length(y) <= bound;
    for _ in 0..n {
        let (next, lost) = step(group, mu, &current, &keep);
        budget.check(next.len(), "convolution")?;
        escaped = escaped * mu.denominator() + lost;
        denominator *= mu.denominator();
        current = next;
    }
    Ok(Distribution {
        n,
        ball_bound: bound,
        denominator,
        masses: current.into_iter().collect(),
        escaped,
    })
}

/// Fails before any work when the pruned support would outgrow the budget. The
/// support at time `t` fills the word ball of radius `min(t, horizon - t) · max_step`,
/// so the peak is the ball of radius `horizon/2 · max_step`.
fn check_peak(group: &FreeProduct, mu: &StepMeasure, horizon: usize, budget: &Budget) -> Result<()> {
    let need = (horizon / 2) as u64 * mu.max_step_length() as u64;
    let mut w: u64 = 8;
    loop {
        let radius = w.min(need) as u32;
        let census = SphereCensus::new(group, radius);
        let size: f64 = (0..=radius).map(|u| census.word_sphere(u)).sum();
        if size > budget.max_elements as f64 {
            return Err(crate::error::Error::BudgetExceeded(format!(
                "{horizon} convolution steps reach a word ball of radius {need}; radius {radius} already holds {size:.3e} elements (limit {})",
                budget.max_elements
            )));
        }
        // the census is cubic in the radius; past 512 the growth is polynomial anyway
        if radius as u64 >= need || w >= 512 {
            return Ok(());
        }
        w *= 2;
    }
}

/// Exact `p_n(e,e)` for `n = 0..=horizon`.
///
/// At time `t` only states that can still return by the horizon are kept:
/// `|γ| ≤ (horizon - t) · max_step`.
pub fn return_probabilities_exact(
    group: &FreeProduct,
    mu: &StepMeasure,
    horizon: usize,
    budget: &Budget,
) -> Result<Vec<BigRational>> {
    check_peak(group, mu, horizon, budget)?;
    let lmax = mu.max_step_length() as usize;
    let e = GroupElement::identity();
    let mut current: Masses = HashMap::from([(e.clone(), BigUint::one())]);
    let mut denominator = BigUint::one();
    let mut out = vec![BigRational::one()];
    for t in 1..=horizon {
        let reach = (horizon - t) * lmax;
        let keep = |y: &GroupElement| group.word_length(y) as usize <= reach;
        let (next, _) = step(group, mu, &current, &keep);
        budget.check(next.len(), "return probabilities")?;
        denominator *= mu.denominator();
        out.push(
            next.get(&e)
                .map(|m| ratio(m, &denominator))
                .unwrap_or_else(BigRational::zero),
        );
        current = next;
    }
    Ok(out)
}

/// Floating-point `p_n(e,e)` by the same pruned convolution, for measures
/// whose exact denominators would be prohibitive.
pub fn return_probabilities_float(
    group: &FreeProduct,
    mu: &StepMeasure,
    horizon: usize,
    budget: &Budget,
) -> Result<Vec<f64>> {
    check_peak(group, mu, horizon, budget)?;
    let lmax = mu.max_step_length() as usize;
    let w = mu.weights_f64();
    let e = GroupElement::identity();
    let mut current: HashMap<GroupElement, f64> = HashMap::from([(e.clone(), 1.0)]);
    let mut out = vec![1.0];
    for t in 1..=horizon {
        let reach = (horizon - t) * lmax;
        let mut next: HashMap<GroupElement, f64> = HashMap::with_capacity(current.len() * 2);
        for (x, m) in &current {
            for (s, ws) in mu.support().iter().zip(&w) {
                let y = group.mul(x, s);
                if group.word_length(&y) as usize <= reach {
                    *next.entry(y).or_insert(0.0) += m * ws;
                }
            }
        }
        budget.check(next.len(), "return probabilities")?;
        out.push(next.get(&e).copied().unwrap_or(0.0));
        current = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn zero_steps_is_a_point_mass() {
        let f2 = FreeProduct::free_group(2).unwrap();
        let mu = StepMeasure::simple_random_walk(&f2).unwrap();
        let d = convolve_power(&f2, &mu, 0, None, &Budget::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.mass(&GroupElement::identity()), q(1, 1));
    }

    #[test]
    fn mass_is_conserved_without_truncation() {
        let g = FreeProduct::cyclic_product(&[2, 3]).unwrap();
        let mu = StepMeasure::simple_random_walk(&g).unwrap();
        let d = convolve_power(&g, &mu, 7, None, &Budget::default()).unwrap();
        assert_eq!(d.total(), q(1, 1));
        assert!(d.escaped_mass().is_zero());
    }

    #[test]
    fn truncation_records_escaped_mass() {
        let f2 = FreeProduct::free_group(2).unwrap();
        let mu = StepMeasure::simple_random_walk(&f2).unwrap();
        let d = convolve_power(&f2, &mu, 4, Some(2), &Budget::default()).unwrap();
        assert!(d.escaped_mass() > BigRational::zero());
        assert!(d.total() + d.escaped_mass() <= q(1, 1));
    }

    #[test]
    fn pruned_returns_match_full_convolution() {
        let g = FreeProduct::cyclic_product(&[2, 2, 2]).unwrap();
        let mu = StepMeasure::simple_random_walk(&g).unwrap();
        let p = return_probabilities_exact(&g, &mu, 8, &Budget::default()).unwrap();
        for (n, pn) in p.iter().enumerate() {
            let d = convolve_power(&g, &mu, n, None, &Budget::default()).unwrap();
            assert_eq!(*pn, d.mass(&GroupElement::identity()), "n={n}");
        }
        assert_eq!(p[2], q(1, 3));
        let pf = return_probabilities_float(&g, &mu, 8, &Budget::default()).unwrap();
        for (a, b) in p.iter().zip(&pf) {
            assert!((crate::numeric::rational_to_f64(a) - b).abs() < 1e-15);
        }
    }
}
