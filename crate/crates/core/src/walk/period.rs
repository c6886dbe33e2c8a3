use num_integer::Integer;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct PeriodInfo {
    /// gcd of the return times seen.
    pub period: usize,
    /// First `n ≥ 1` with `p_n(e,e) > 0`.
    pub first_return: usize,
}

/// Period of the walk from the positivity pattern of `p_0, p_1, ...`.
pub fn detect_period(positive: &[bool]) -> Result<PeriodInfo> {
    if positive.len() < 5 {
        return Err(Error::TooFewTerms(format!(
            "period detection needs p_0..p_4, got {} terms",
            positive.len()
        )));
    }
    let times: Vec<usize> = (1..positive.len()).filter(|&n| positive[n]).collect();
    let Some(&first_return) = times.first() else {
        return Err(Error::DegenerateInput("p_n(e,e) = 0 for every n ≥ 1".into()));
    };
    let period = times.iter().fold(0, |g, &n| g.gcd(&n));
    Ok(PeriodInfo {
        period,
        first_return,
    })
}
