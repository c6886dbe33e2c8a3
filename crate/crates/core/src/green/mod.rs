//! Green functions, first-passage series, spectral radius and the I-sums.

mod oracle;
mod passage;
mod series;
mod spectral;
mod sums;

pub use oracle::{
    estimate_radius, BallGreen, GreenOracle, RadialGreen, RadialGreenOptions, RadialRow,
};
pub use passage::first_passage_from_logs;
pub use series::{GreenSeries, GreenValue, TailMethod};
pub use spectral::{neville, spectral_radius, SpectralRadiusEstimate};
pub use sums::{
    derivative_identity, green_derivative, i_sums, i_sums_generic, parabolic_i_sums,
    DerivativeMode, ISums, ParabolicSum, SphereSum,
};

use std::io::Write;

use crate::error::Result;
use crate::group::GroupElement;

/// `F(x, y | r)` for a radial walk, by deconvolving `p_n(x,y)` against `p_n(y,y)`.
pub fn first_passage(
    green: &RadialGreen,
    x: &GroupElement,
    y: &GroupElement,
    r: f64,
    horizon: usize,
) -> Result<GreenValue> {
    if x == y {
        return Ok(GreenValue::exact(1.0));
    }
    let m = green.group().dist(x, y) as usize;
    let (table, _) = green.chain().log_return_table(&[m, 0], horizon);
    first_passage_from_logs(&table[0], &table[1], r, green.chain().period())
}

/// One line of the Green CSV report.
#[derive(Clone, Debug, serde::Serialize)]
pub struct GreenRow {
    pub r: f64,
    pub g: f64,
    pub g_tail: f64,
    pub g_prime: f64,
    pub g_prime_tail: f64,
    pub horizon: usize,
}

/// `G(e,e|r)` and `G'(e,e|r)` on a grid, from the radial engine.
pub fn green_table(green: &RadialGreen, grid: &[f64]) -> Result<Vec<GreenRow>> {
    grid.iter()
        .map(|&r| {
            let row = green.row(r, 16)?;
            let (g, d) = (row.g[0], row.drg[0]);
            // G' = (d/dr(rG) - G) / r
            let (gp, gpt) = if r > 0.0 {
                ((d.value - g.value) / r, (d.tail + g.tail) / r)
            } else {
                (0.0, 0.0)
            };
            Ok(GreenRow {
                r,
                g: g.value,
                g_tail: g.tail,
                g_prime: gp,
                g_prime_tail: gpt,
                horizon: row.horizon,
            })
        })
        .collect()
}

pub fn write_green_csv<W: Write>(rows: &[GreenRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
