//! Distance projection for radially symmetric nearest-neighbour walks.
//!
//! When every step changes the word length by at most one and the chance of
//! going down (or staying) is the same from every non-trivial element, the
//! distance `|X_n|` is itself a birth–death chain. For symmetric walks this gives
//! `p_n(x, y) = P^n(|x⁻¹y|, 0)` for every pair, not just for returns.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::measure::StepMeasure;
use crate::group::{FreeProduct, GroupElement};

#[derive(Clone, Debug, serde::Serialize)]
pub struct RadialChain {
    /// Holding probability at distance 0, i.e. `μ(e)`.
    #[serde(serialize_with = "ser_rational")]
    pub hold_at_origin: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub down: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub stay: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub up: BigRational,
    /// Number of (factor, element) pairs on which the sphere condition was checked.
    pub certificate: usize,
}

fn ser_rational<S: serde::Serializer>(x: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

/// Returns the distance chain if `μ` is radial, `None` otherwise.
pub fn is_radial(group: &FreeProduct, mu: &StepMeasure) -> Option<RadialChain> {
    if !mu.is_symmetric() {
        return None;
    }
    let mut mu_e = BigRational::zero();
    for (x, w) in mu.iter() {
        if x.is_identity() {
            mu_e = w.clone();
        } else if !group.generators().contains(x) {
            return None;
        }
    }
    let mut expected: Option<(BigRational, BigRational)> = None;
    let mut checked = 0;
    for (k, f) in group.factors().iter().enumerate() {
        let steps: Vec<_> = mu
            .iter()
            .filter(|(x, _)| x.last_factor() == Some(k))
            .map(|(x, w)| (x.syllables()[0], w.clone()))
            .collect();
        for h in f.length_change_representatives() {
            let lh = f.word_length(&h);
            let mut down = BigRational::zero();
            let mut stay = mu_e.clone();
            for (s, w) in &steps {
                let l = f.word_length(&f.mul(&h, s));
                if l + 1 == lh {
                    down += w;
                } else if l == lh {
                    stay += w;
                }
            }
            checked += 1;
            match &expected {
                None => expected = Some((down, stay)),
                Some((d, s)) if *d == down && *s == stay => {}
                Some(_) => return None,
            }
        }
    }
    let (down, stay) = expected?;
    let up = BigRational::one() - &down - &stay;
    Some(RadialChain {
        hold_at_origin: mu_e,
        down,
        stay,
        up,
        certificate: checked,
    })
}

impl RadialChain {
    fn floats(&self) -> [f64; 4] {
        let f = |x: &BigRational| x.to_f64().unwrap_or(0.0);
        [f(&self.hold_at_origin), f(&self.down), f(&self.stay), f(&self.up)]
    }

    /// Gcd of the return times: 2 when the chain cannot hold anywhere.
    pub fn period(&self) -> usize {
        if self.hold_at_origin.is_zero() && self.stay.is_zero() {
            2
        } else {
            1
        }
    }

    /// `F(r) = Σ_n r^n P(first hit of j-1 from j at time n)` for `j ≥ 1`.
    ///
    /// Smallest root of `r·up·F² + (r·stay − 1)·F + r·down = 0`; `None` past the
    /// chain's radius of convergence. An `r` overshooting the radius by ~1e-8
    /// relative (the accuracy of an extrapolated R̂) gets the value at the radius.
    pub fn first_passage_down(&self, r: f64) -> Option<f64> {
        let [_, b, c, a] = self.floats();
        if r == 0.0 {
            return Some(0.0);
        }
        let p = 1.0 - c * r;
        let disc = p * p - 4.0 * a * b * r * r;
        if disc < -1e-8 || p <= 0.0 {
            return None;
        }
        if a == 0.0 {
            return Some(b * r / p);
        }
        Some((p - disc.max(0.0).sqrt()) / (2.0 * a * r))
    }

    /// Exact `P^n(0, 0)` for `n = 0..=horizon`.
    pub fn exact_return_probabilities(&self, horizon: usize) -> Vec<BigRational> {
        let den = [&self.hold_at_origin, &self.down, &self.stay, &self.up]
            .iter()
            .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let num = |x: &BigRational| {
            (x.numer() * &den / x.denom())
                .to_biguint()
                .expect("non-negative")
        };
        let (h0, b, c, a) = (
            num(&self.hold_at_origin),
            num(&self.down),
            num(&self.stay),
            num(&self.up),
        );
        let up0 = num(&(BigRational::one() - &self.hold_at_origin));
        let den = den.to_biguint().expect("positive");
        let cap = horizon / 2 + 2;
        let mut v = vec![BigUint::zero(); cap + 2];
        v[0] = BigUint::one();
        let mut scale = BigUint::one();
        let mut out = vec![BigRational::one()];
        for t in 1..=horizon {
            // states above horizon - t can no longer return in time
            let reach = (horizon - t).min(cap);
            let mut w = vec![BigUint::zero(); cap + 2];
            w[0] = &v[0] * &h0 + &v[1] * &b;
            for j in 1..=reach {
                let from_below = if j == 1 { &v[0] * &up0 } else { &v[j - 1] * &a };
                w[j] = from_below + &v[j] * &c + &v[j + 1] * &b;
            }
            v = w;
            scale *= &den;
            out.push(BigRational::new(v[0].clone().into(), scale.clone().into()));
        }
        out
    }

    /// Backward iteration `v_n(j) = P^n(j, 0)` for `n = 0..=horizon`.
    ///
    /// `visit(n, v, log_scale)` sees the vector scaled so that the true values are
    /// `v[j] · exp(log_scale)`; entries `0..=m_max` are meaningful. States beyond an
    /// adaptive cap (about `m_max + 10√horizon`) are dropped; the returned value is
    /// `log10` of the largest ratio between the mass at the cap and at the targets,
    /// an indicator of the relative error that dropping them causes.
    pub fn backward_iterate(
        &self,
        m_max: usize,
        horizon: usize,
        mut visit: impl FnMut(usize, &[f64], f64),
    ) -> f64 {
        let [h0, b, c, a] = self.floats();
        let up0 = 1.0 - h0;
        let exact_cap = (horizon + m_max) / 2 + 1;
        let cap = exact_cap.min(m_max + 20 + (10.0 * (horizon as f64).sqrt()) as usize);
        // iterate u[j] = v[j] s^j with s = √(up/down): the symmetrized chain keeps every
        // state at a comparable scale, where v itself decays geometrically in j and
        // would underflow long before the cap
        let ls = if a > 0.0 && b > 0.0 { 0.5 * (a / b).ln() } else { 0.0 };
        let s = ls.exp();
        let (lo, hi) = (b * s, a / s);
        let targets = m_max.min(cap);
        let unscale: Vec<f64> = (0..=targets).map(|j| (-(j as f64) * ls).exp()).collect();
        let mut u = vec![0.0f64; cap + 2];
        let mut w = vec![0.0f64; cap + 2];
        let mut out = vec![0.0f64; targets + 1];
        u[0] = 1.0;
        let mut log_scale = 0.0;
        let mut boundary = f64::NEG_INFINITY;
        out[0] = 1.0;
        visit(0, &out, log_scale);
        for n in 1..=horizon {
            w[0] = h0 * u[0] + up0 / s * u[1];
            for j in 1..=cap {
                w[j] = lo * u[j - 1] + c * u[j] + hi * u[j + 1];
            }
            std::mem::swap(&mut u, &mut w);
            let top = u[..=targets].iter().copied().fold(0.0, f64::max);
            if top > 0.0 {
                if cap < exact_cap && u[cap] > 0.0 {
                    boundary = boundary.max((u[cap] / top).log10());
                }
                if !(1e-100..=1e100).contains(&top) {
                    for x in u.iter_mut().take(cap + 1) {
                        *x /= top;
                    }
                    log_scale += top.ln();
                }
            }
            for (o, (x, f)) in out.iter_mut().zip(u.iter().zip(&unscale)) {
                *o = x * f;
            }
            visit(n, &out, log_scale);
        }
        boundary
    }

    /// `ln P^n(m, 0)` for each target `m` and `n = 0..=horizon`, plus the boundary indicator.
    pub fn log_return_table(&self, targets: &[usize], horizon: usize) -> (Vec<Vec<f64>>, f64) {
        let m_max = targets.iter().copied().max().unwrap_or(0);
        let mut table = vec![Vec::with_capacity(horizon + 1); targets.len()];
        let boundary = self.backward_iterate(m_max, horizon, |_, v, ls| {
            for (row, &m) in table.iter_mut().zip(targets) {
                row.push(if v[m] > 0.0 { v[m].ln() + ls } else { f64::NEG_INFINITY });
            }
        });
        (table, boundary)
    }
}

/// Word length of `x⁻¹ y`: the chain state for the pair `(x, y)`.
pub fn radial_state(group: &FreeProduct, x: &GroupElement, y: &GroupElement) -> usize {
    group.dist(x, y) as usize
}
