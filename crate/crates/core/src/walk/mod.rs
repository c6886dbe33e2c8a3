//! Step measures, exact convolution powers, the radial fast path and period detection.

mod convolve;
mod measure;
mod period;
mod radial;

pub use convolve::{
    convolve_power, return_probabilities_exact, return_probabilities_float, Distribution,
};
pub use measure::StepMeasure;
pub use period::{detect_period, PeriodInfo};
pub use radial::{is_radial, radial_state, RadialChain};

use std::io::Write;

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::group::FreeProduct;
use crate::numeric::ln_rational;
use crate::Budget;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Radial,
}

/// `p_n(e,e)` for `n = 0..=N`.
#[derive(Clone, Debug)]
pub enum ReturnProbabilities {
    Exact(Vec<BigRational>),
    Radial {
        log_p: Vec<f64>,
        /// log10 of the boundary-mass indicator of the truncated chain.
        log10_error: f64,
    },
}

impl ReturnProbabilities {
    pub fn len(&self) -> usize {
        match self {
            ReturnProbabilities::Exact(v) => v.len(),
            ReturnProbabilities::Radial { log_p, .. } => log_p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Natural logs of the terms (`-inf` for zeros).
    pub fn log_values(&self) -> Vec<f64> {
        match self {
            ReturnProbabilities::Exact(v) => v.iter().map(ln_rational).collect(),
            ReturnProbabilities::Radial { log_p, .. } => log_p.clone(),
        }
    }

    pub fn positivity(&self) -> Vec<bool> {
        match self {
            ReturnProbabilities::Exact(v) => v.iter().map(|x| !x.is_zero()).collect(),
            ReturnProbabilities::Radial { log_p, .. } => {
                log_p.iter().map(|x| x.is_finite()).collect()
            }
        }
    }

    pub fn method(&self) -> Method {
        match self {
            ReturnProbabilities::Exact(_) => Method::Exact,
            ReturnProbabilities::Radial { .. } => Method::Radial,
        }
    }

    /// CSV with columns `n, p_n_exact, p_n, ln_p_n`; the exact column is empty for the radial path.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "p_n_exact", "p_n", "ln_p_n"])?;
        let logs = self.log_values();
        for (n, lp) in logs.iter().enumerate() {
            let exact = match self {
                ReturnProbabilities::Exact(v) => v[n].to_string(),
                ReturnProbabilities::Radial { .. } => String::new(),
            };
            w.write_record([
                n.to_string(),
                exact,
                format!("{:.17e}", lp.exp()),
                format!("{lp:.17e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn return_probabilities(
    group: &FreeProduct,
    mu: &StepMeasure,
    horizon: usize,
    method: Method,
    budget: &Budget,
) -> Result<ReturnProbabilities> {
    match method {
        Method::Exact => Ok(ReturnProbabilities::Exact(return_probabilities_exact(
            group, mu, horizon, budget,
        )?)),
        Method::Radial => {
            let chain = is_radial(group, mu).ok_or_else(|| {
                Error::NotRadial(
                    "the radial path needs a symmetric measure on S ∪ {e} with the same down/stay weights from every syllable".into(),
                )
            })?;
            let (mut table, log10_error) = chain.log_return_table(&[0], horizon);
            Ok(ReturnProbabilities::Radial {
                log_p: table.swap_remove(0),
                log10_error,
            })
        }
    }
}
