use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `C exp(C exp(C sqrt t))`.
pub fn envelope(c: f64, t: f64) -> f64 {
    c * (c * (c * t.sqrt()).exp()).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub c: f64,
    /// `max_i (v_i - envelope(C, t_i)) / v_i`; nonpositive once fitted.
    pub residual: f64,
    /// Index of the sample that fixes `C`.
    pub binding: usize,
}

impl EnvelopeFit {
    pub fn violations(&self, times: &[f64], values: &[f64]) -> usize {
        times
            .iter()
            .zip(values)
            .filter(|(t, v)| **v > envelope(self.c, **t))
            .count()
    }
}

/// Smallest `C` with `v(t) <= envelope(C, t)` at every sample.
///
/// The envelope is increasing in `C`, so each sample gives its own threshold
/// by bisection and the fit is their maximum.
pub fn fit_growth_envelope(times: &[f64], values: &[f64]) -> Result<EnvelopeFit> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::TooFewSamples(format!(
            "{} times against {} values",
            times.len(),
            values.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < 0.0 {
        return Err(Error::Unordered);
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Invalid(format!(
            "growth series must be positive and finite, found {v}"
        )));
    }
    let mut best = (0.0, 0);
    for (i, (&t, &v)) in times.iter().zip(values).enumerate() {
        let c = threshold(t, v);
        if c > best.0 {
            best = (c, i);
        }
    }
    let c = best.0;
    let residual = times
        .iter()
        .zip(values)
        .map(|(t, v)| (v - envelope(c, *t)) / v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EnvelopeFit {
        c,
        residual,
        binding: best.1,
    })
}

fn threshold(t: f64, v: f64) -> f64 {
    let mut hi = 1.0;
    while envelope(hi, t) < v {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if envelope(mid, t) >= v {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series() {
        let t: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let v = vec![3.0; t.len()];
        let fit = fit_growth_envelope(&t, &v).unwrap();
        assert!(fit.residual <= 0.0);
        assert_eq!(fit.violations(&t, &v), 0);
        assert_eq!(fit.binding, 0);
        assert!((envelope(fit.c, 0.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_series() {
        let t: Vec<f64> = (0..50).map(|i| 0.2 * i as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| t.exp()).collect();
        let fit = fit_growth_envelope(&t, &v).unwrap();
        assert!(fit.residual <= 0.0);
        assert_eq!(fit.violations(&t, &v), 0);
    }

    #[test]
    fn rejects_bad_series() {
        assert!(fit_growth_envelope(&[0.0, 1.0], &[1.0, 0.0]).is_err());
        assert!(fit_growth_envelope(&[1.0, 0.5], &[1.0, 1.0]).is_err());
        assert!(fit_growth_envelope(&[], &[]).is_err());
    }
}
