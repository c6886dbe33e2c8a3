use crate::error::{Error, Result};

/// How a tail estimate was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMethod {
    /// Geometric continuation of the last measured term ratio.
    EmpiricalGeometric,
    /// Geometric continuation of the last Neumann-series increments on a killed ball.
    KilledBall,
    /// Sum of absolute differences between two truncations.
    TruncationLadder,
}

/// A truncated value with its (reported, never hidden) tail estimate.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct GreenValue {
    pub value: f64,
    /// Estimated remainder; `inf` when the terms are not decaying.
    pub tail: f64,
    pub horizon: usize,
    pub method: TailMethod,
}

impl GreenValue {
    pub fn exact(value: f64) -> Self {
        GreenValue {
            value,
            tail: 0.0,
            horizon: 0,
            method: TailMethod::EmpiricalGeometric,
        }
    }

    pub fn relative_tail(&self) -> f64 {
        if self.value == 0.0 {
            if self.tail == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.tail / self.value.abs()
        }
    }
}

/// Coefficients `p_n(x,y)`, stored as logarithms so long horizons near R_μ do not underflow.
#[derive(Clone, Debug)]
pub struct GreenSeries {
    pub label: String,
    log_p: Vec<f64>,
    period: usize,
    radius: Option<f64>,
}

impl GreenSeries {
    pub fn new(label: impl Into<String>, log_p: Vec<f64>, period: usize, radius: Option<f64>) -> Self {
        GreenSeries {
            label: label.into(),
            log_p,
            period: period.max(1),
            radius,
        }
    }

    pub fn horizon(&self) -> usize {
        self.log_p.len().saturating_sub(1)
    }

    pub fn log_coefficients(&self) -> &[f64] {
        &self.log_p
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    /// `G(x,y|r) = Σ_n p_n r^n`.
    pub fn evaluate(&self, r: f64) -> Result<GreenValue> {
        self.weighted(r, |_| 1.0)
    }

    /// `d/dr (r G(x,y|r)) = Σ_n (n+1) p_n r^n`.
    pub fn evaluate_derivative_of_rg(&self, r: f64) -> Result<GreenValue> {
        self.weighted(r, |n| (n + 1) as f64)
    }

    /// `G'(x,y|r) = Σ_n n p_n r^{n-1}`.
    pub fn evaluate_derivative(&self, r: f64) -> Result<GreenValue> {
        if r == 0.0 {
            let p1 = self.log_p.get(1).map(|x| x.exp()).unwrap_or(0.0);
            return Ok(GreenValue::exact(p1));
        }
        let v = self.weighted(r, |n| n as f64)?;
        Ok(GreenValue {
            value: v.value / r,
            tail: v.tail / r,
            ..v
        })
    }

    pub fn weighted(&self, r: f64, weight: impl Fn(usize) -> f64) -> Result<GreenValue> {
        if r < 0.0 {
            return Err(Error::InvalidArgument(format!("r = {r} is negative")));
        }
        if let Some(radius) = self.radius {
            if r > radius * (1.0 + 1e-6) {
                return Err(Error::Divergence(format!(
                    "{}: r = {r} exceeds the estimated radius {radius}",
                    self.label
                )));
            }
        }
        if r == 0.0 {
            let p0 = self.log_p.first().map(|x| x.exp()).unwrap_or(0.0);
            return Ok(GreenValue::exact(weight(0) * p0));
        }
        let lr = r.ln();
        let term = |n: usize| -> f64 {
            let lp = self.log_p[n];
            if lp == f64::NEG_INFINITY {
                0.0
            } else {
                weight(n) * (lp + n as f64 * lr).exp()
            }
        };
        let n_max = self.horizon();
        let value: f64 = (0..=n_max).map(term).sum();
        let tail = self.tail_from(n_max, &term);
        Ok(GreenValue {
            value,
            tail,
            horizon: n_max,
            method: TailMethod::EmpiricalGeometric,
        })
    }

    fn tail_from(&self, n_max: usize, term: &impl Fn(usize) -> f64) -> f64 {
        // last two non-zero terms one period apart
        let p = self.period;
        let last = (0..=n_max).rev().find(|&n| term(n) > 0.0);
        let Some(n1) = last else { return 0.0 };
        if n1 < p {
            return 0.0;
        }
        let (t1, t0) = (term(n1), term(n1 - p));
        if t0 <= 0.0 {
            return f64::INFINITY;
        }
        let rho = t1 / t0;
        if rho >= 1.0 {
            f64::INFINITY
        } else {
            t1 * rho / (1.0 - rho)
        }
    }
}
