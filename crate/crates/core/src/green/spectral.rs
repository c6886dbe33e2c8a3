//! Spectral radius from a prefix of return probabilities.

use crate::error::{Error, Result};

#[derive(Clone, Debug, serde::Serialize)]
pub struct SpectralRadiusEstimate {
    /// Extrapolated radius of convergence R̂ = 1/ρ̂.
    pub r_hat: f64,
    /// Extrapolated spectral radius ρ̂.
    pub rho_hat: f64,
    /// `sup_n p_n^{1/n}` over the lattice: a lower bound for ρ when μ is symmetric.
    pub rho_lower: f64,
    /// Difference between the two highest Richardson orders.
    pub error_estimate: f64,
    /// Order of the polynomial correction in 1/n.
    pub order: usize,
    /// `n` at which the ratio sequence ends.
    pub n_max: usize,
    /// Per-stride ratios `p_{n+s}/p_n`, as `(n, ratio)`.
    pub ratios: Vec<(usize, f64)>,
    /// Neville table: `table[j][i]` is the order-`j` value built from points `i..=i+j`.
    pub richardson: Vec<Vec<f64>>,
    /// The lower bound sits below the extrapolated value, as it must.
    pub consistent: bool,
}

impl SpectralRadiusEstimate {
    /// `R̂ > 1`, as expected for a non-amenable group.
    pub fn exceeds_one(&self) -> bool {
        self.r_hat > 1.0
    }

    /// R̂ computed from the rigorous side instead of the extrapolation.
    pub fn r_upper(&self) -> f64 {
        1.0 / self.rho_lower
    }
}

/// Polynomial extrapolation to `h = 0` through the points `(h_i, y_i)`.
pub fn neville(h: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
    let n = h.len();
    let mut table = vec![y.to_vec()];
    for j in 1..n {
        let prev = &table[j - 1];
        let row = (0..n - j)
            .map(|i| (h[i + j] * prev[i] - h[i] * prev[i + 1]) / (h[i + j] - h[i]))
            .collect();
        table.push(row);
    }
    table
}

/// Estimates ρ from `ln p_n` (`-inf` for zero terms).
///
/// The ratio `p_{n+s}/p_n` along the stride `s` behaves like `ρ^s (1 + c_1/n + c_2/n² + ...)`
/// when `p_n ~ C ρ^n n^{-α}`, so a short Richardson extrapolation in `1/n` removes the
/// polynomial correction. The stride is the period, doubled if odd, to wash out
/// near-bipartite oscillation.
pub fn spectral_radius(log_p: &[f64], period: usize) -> Result<SpectralRadiusEstimate> {
    let period = period.max(1);
    let stride = if period % 2 == 0 { period } else { 2 * period };
    let lattice: Vec<usize> = (1..log_p.len())
        .filter(|&n| n % stride == 0 && log_p[n].is_finite())
        .collect();
    if lattice.len() < 10 {
        return Err(Error::TooFewTerms(format!(
            "spectral radius needs at least 10 non-zero lattice terms, got {}",
            lattice.len()
        )));
    }
    let rho_lower = lattice
        .iter()
        .map(|&n| (log_p[n] / n as f64).exp())
        .fold(0.0, f64::max);
    let ratios: Vec<(usize, f64)> = lattice
        .windows(2)
        .filter(|w| w[1] == w[0] + stride)
        .map(|w| (w[0], (log_p[w[1]] - log_p[w[0]]).exp()))
        .collect();
    let k = ratios.len();
    if k < 8 {
        return Err(Error::TooFewTerms("ratio sequence too short".into()));
    }
    // well-separated points: the last ratio, and those at 3/4 and 1/2 of the range
    let picks = [k - 1, (3 * k) / 4, k / 2];
    let h: Vec<f64> = picks.iter().map(|&i| 1.0 / ratios[i].0 as f64).collect();
    let y: Vec<f64> = picks.iter().map(|&i| ratios[i].1).collect();
    let richardson = neville(&h, &y);
    let order = richardson.len() - 1;
    let top = richardson[order][0];
    let error_estimate = (top - richardson[order - 1][0]).abs();
    let rho_hat = top.powf(1.0 / stride as f64);
    let n_max = ratios[k - 1].0 + stride;
    Ok(SpectralRadiusEstimate {
        r_hat: 1.0 / rho_hat,
        rho_hat,
        rho_lower,
        error_estimate: error_estimate / stride as f64,
        order,
        n_max,
        ratios,
        richardson,
        consistent: rho_lower <= rho_hat * (1.0 + 1e-12),
    })
}
