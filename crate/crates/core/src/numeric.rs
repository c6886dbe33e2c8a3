//! Small numerical helpers shared across modules.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Natural log of a big unsigned integer; `-inf` for zero.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("finite for < 1000 bits").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit value");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of `num / den`.
pub fn ln_ratio(num: &BigUint, den: &BigUint) -> f64 {
    ln_biguint(num) - ln_biguint(den)
}

/// Natural log of a non-negative rational.
pub fn ln_rational(x: &BigRational) -> f64 {
    assert!(!x.is_negative(), "log of a negative rational");
    ln_ratio(&to_biguint(x.numer()), &to_biguint(x.denom()))
}

/// Float value of a rational that may be far below the f64 range of `numer/denom`.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let sign = if x.is_negative() { -1.0 } else { 1.0 };
    sign * ln_rational(&x.abs()).exp()
}

fn to_biguint(x: &BigInt) -> BigUint {
    x.magnitude().clone()
}

/// `ln(Σ exp(v_i))` without overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Ordinary least squares of `y` on the columns of `x` (with no implicit intercept).
///
/// Returns coefficients and their standard errors.
pub fn least_squares(x: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let p = x.first()?.len();
    if n <= p {
        return None;
    }
    // normal equations, solved by Gauss-Jordan on the small p×p system
    let mut a = vec![vec![0.0; 2 * p]; p];
    let mut b = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            b[i] += row[i] * yi;
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[p + i] = 1.0;
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for i in 0..p {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..2 * p {
                        a[i][j] -= f * a[col][j];
                    }
                }
            }
        }
    }
    let coef: Vec<f64> = (0..p)
        .map(|i| (0..p).map(|j| a[i][p + j] * b[j]).sum())
        .collect();
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let fit: f64 = row.iter().zip(&coef).map(|(u, c)| u * c).sum();
            (yi - fit).powi(2)
        })
        .sum();
    let sigma2 = rss / (n - p) as f64;
    let se = (0..p).map(|i| (sigma2 * a[i][p + i]).max(0.0).sqrt()).collect();
    Some((coef, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn logs_of_huge_integers() {
        let x = BigUint::from(3u32).pow(2000);
        assert!((ln_biguint(&x) - 2000.0 * 3f64.ln()).abs() < 1e-9);
        let q = BigRational::new(BigInt::from(7), BigInt::from(64));
        assert!((rational_to_f64(&q) - 7.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn line_fit_is_exact_on_a_line() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 - 0.5 * i as f64).collect();
        let (c, se) = least_squares(&x, &y).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] + 0.5).abs() < 1e-12);
        assert!(se[1] < 1e-6);
    }
}
