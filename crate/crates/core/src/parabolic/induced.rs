//! The kernel as a matrix on a finite piece of `H_k`: induced Green functions and
//! spectral radii.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::group::{FactorElement, FactorKind, FactorSpec};

use super::kernel::ReturnKernel;

/// The states of a truncated kernel matrix: all of a finite factor, or the box
/// `[-B, B]^d` of a lattice factor.
#[derive(Clone, Debug)]
pub struct FactorSpace {
    pub elements: Vec<FactorElement>,
    index: HashMap<FactorElement, usize>,
    pub box_half: Option<u32>,
}

impl FactorSpace {
    pub fn new(factor: &FactorSpec, box_half: u32) -> Result<Self> {
        let elements = match &factor.kind {
            FactorKind::Finite(_) => {
                let mut v = vec![factor.identity()];
                v.extend(factor.nontrivial_elements(None)?);
                v
            }
            FactorKind::FreeAbelian { rank } => {
                let b = box_half as i64;
                let side = (2 * b + 1) as usize;
                let n = side.checked_pow(*rank as u32).filter(|&n| n <= 50_000_000).ok_or_else(
                    || Error::BudgetExceeded(format!("box of half-width {b} in rank {rank}")),
                )?;
                let mut v = Vec::with_capacity(n);
                let mut c = vec![-b; *rank];
                for _ in 0..n {
                    v.push(FactorElement::lattice(factor.id, &c)?);
                    for x in c.iter_mut() {
                        *x += 1;
                        if *x <= b {
                            break;
                        }
                        *x = -b;
                    }
                }
                v
            }
        };
        let index = elements.iter().enumerate().map(|(i, h)| (*h, i)).collect();
        let box_half = (!factor.is_finite()).then_some(box_half);
        Ok(FactorSpace {
            elements,
            index,
            box_half,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn index_of(&self, h: &FactorElement) -> Option<usize> {
        self.index.get(h).copied()
    }
}

/// Sparse rows `i → [(j, p(h_i, h_j))]` of the kernel restricted to `space`.
pub fn kernel_matrix(
    factor: &FactorSpec,
    kernel: &ReturnKernel,
    space: &FactorSpace,
) -> Vec<Vec<(usize, f64)>> {
    space
        .elements
        .iter()
        .map(|h| {
            kernel
                .entries
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .filter_map(|(g, w)| space.index_of(&factor.mul(h, g)).map(|j| (j, *w)))
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct InducedGreen {
    pub t: f64,
    /// `G_{k,r}(e, h | t)` over the space.
    #[serde(skip)]
    pub values: Vec<(FactorElement, f64)>,
    pub terms: usize,
    pub last_term: f64,
}

impl InducedGreen {
    pub fn at(&self, h: &FactorElement) -> f64 {
        self.values
            .iter()
            .find(|(x, _)| x == h)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }
}

/// `Σ_n t^n p^{(n)}(e, ·)` over the truncated kernel, stopping once the `ℓ¹` mass of
/// a term drops below `tol`.
///
/// Fails with a divergence error if the terms stop shrinking geometrically.
pub fn induced_green(
    factor: &FactorSpec,
    kernel: &ReturnKernel,
    t: f64,
    box_half: u32,
    tol: f64,
    max_terms: usize,
) -> Result<InducedGreen> {
    let space = FactorSpace::new(factor, box_half)?;
    let rows = kernel_matrix(factor, kernel, &space);
    let n = space.len();
    let e = space.index_of(&factor.identity()).expect("identity is a state");
    let mut term = vec![0.0; n];
    term[e] = 1.0;
    let mut sum = term.clone();
    let mut last = 1.0;
    let mut terms = 1;
    while last > tol {
        if terms >= max_terms {
            return Err(Error::Divergence(format!(
                "induced Green series at t = {t}: term {terms} still has mass {last:.3e}"
            )));
        }
        let mut next = vec![0.0; n];
        for (i, &m) in term.iter().enumerate() {
            if m != 0.0 {
                for &(j, w) in &rows[i] {
                    next[j] += m * w * t;
                }
            }
        }
        let mass: f64 = next.iter().sum();
        if terms > 50 && mass >= last {
            return Err(Error::Divergence(format!(
                "induced Green series at t = {t}: term mass stopped decreasing ({mass:.3e})"
            )));
        }
        for (s, x) in sum.iter_mut().zip(&next) {
            *s += x;
        }
        last = mass;
        term = next;
        terms += 1;
    }
    Ok(InducedGreen {
        t,
        values: space.elements.iter().copied().zip(sum).collect(),
        terms,
        last_term: last,
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct KernelSpectrum {
    /// Power-iteration estimate: the upper Collatz–Wielandt bound at the last iterate.
    pub rho_hat: f64,
    /// Lower Collatz–Wielandt bound `min_i (Kv)_i / v_i`.
    pub rho_lower: f64,
    /// Largest row mass of the full kernel row, an upper bound on its spectral radius.
    pub row_mass: f64,
    pub states: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl KernelSpectrum {
    /// `R̂_k = 1/ρ̂`.
    pub fn radius(&self) -> f64 {
        1.0 / self.rho_hat
    }
}

/// Power iteration on the truncated kernel matrix.
///
/// For a positive vector `v`, `min_i (Kv)_i/v_i ≤ ρ ≤ max_i (Kv)_i/v_i`; iteration
/// stops when the bracket is narrower than `tol` relative to its top.
pub fn kernel_spectral_radius(
    factor: &FactorSpec,
    kernel: &ReturnKernel,
    box_half: u32,
    tol: f64,
    max_iters: usize,
) -> Result<KernelSpectrum> {
    let row_mass = kernel.mass();
    if kernel.is_zero() {
        return Ok(KernelSpectrum {
            rho_hat: 0.0,
            rho_lower: 0.0,
            row_mass,
            states: 0,
            iterations: 0,
            converged: true,
        });
    }
    let space = FactorSpace::new(factor, box_half)?;
    let rows = kernel_matrix(factor, kernel, &space);
    let n = space.len();
    // mixing in the identity keeps the iteration aperiodic without moving the top eigenvector
    let shift = 0.5;
    let mut v = vec![1.0; n];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let kv: Vec<f64> = rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * v[j]).sum())
            .collect();
        lo = f64::INFINITY;
        hi = 0.0;
        for (a, b) in kv.iter().zip(&v) {
            let q = a / b;
            lo = f64::min(lo, q);
            hi = f64::max(hi, q);
        }
        if hi - lo <= tol * hi {
            converged = true;
            break;
        }
        let mut norm = 0.0;
        for (x, a) in v.iter_mut().zip(&kv) {
            *x = shift * *x + a;
            norm = f64::max(norm, *x);
        }
        if norm == 0.0 {
            break;
        }
        for x in v.iter_mut() {
            *x = (*x / norm).max(1e-300);
        }
    }
    Ok(KernelSpectrum {
        rho_hat: hi,
        rho_lower: lo.max(0.0),
        row_mass,
        states: n,
        iterations,
        converged,
    })
}
