use super::series::{GreenValue, TailMethod};
use crate::error::{Error, Result};

/// First-visit generating function `F(x,y|r)` by renewal deconvolution.
///
/// With `a_n = p_n(x,y) r^n` and `b_n = p_n(y,y) r^n`, the first-visit terms satisfy
/// `a_n = Σ_k f_k b_{n-k}`, so `f_n = a_n - Σ_{k<n} f_k b_{n-k}` (using `b_0 = 1`).
/// For `x = y` this gives `F = 1`: the visit at time 0.
pub fn first_passage_from_logs(
    log_a: &[f64],
    log_b: &[f64],
    r: f64,
    period: usize,
) -> Result<GreenValue> {
    let n = log_a.len().min(log_b.len());
    if n == 0 {
        return Err(Error::TooFewTerms("empty coefficient sequences".into()));
    }
    if r <= 0.0 {
        let f0 = log_a[0].exp();
        return Ok(GreenValue::exact(f0));
    }
    let lr = r.ln();
    let scaled = |lp: f64, k: usize| {
        if lp == f64::NEG_INFINITY {
            0.0
        } else {
            (lp + k as f64 * lr).exp()
        }
    };
    let a: Vec<f64> = (0..n).map(|k| scaled(log_a[k], k)).collect();
    let b: Vec<f64> = (0..n).map(|k| scaled(log_b[k], k)).collect();
    let b0 = b[0];
    if b0 <= 0.0 {
        return Err(Error::DegenerateInput("p_0(y,y) must be 1".into()));
    }
    let mut f = vec![0.0; n];
    for m in 0..n {
        let conv: f64 = (0..m).map(|k| f[k] * b[m - k]).sum();
        // roundoff can push an exact zero slightly negative
        f[m] = ((a[m] - conv) / b0).max(0.0);
    }
    let value: f64 = f.iter().sum();
    let p = period.max(1);
    let tail = match (0..n).rev().find(|&k| f[k] > 0.0) {
        Some(k1) if k1 >= p && f[k1 - p] > 0.0 => {
            let rho = f[k1] / f[k1 - p];
            if rho >= 1.0 {
                f64::INFINITY
            } else {
                f[k1] * rho / (1.0 - rho)
            }
        }
        _ => 0.0,
    };
    Ok(GreenValue {
        value,
        tail,
        horizon: n - 1,
        method: TailMethod::EmpiricalGeometric,
    })
}
