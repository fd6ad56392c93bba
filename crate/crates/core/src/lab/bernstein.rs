use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::random::{annulus_field, ball_field, trial_seed};
use super::report::{RatioReport, RatioRow};
use super::LabSetup;
use crate::error::{Error, Result};
use crate::norms::lp_norm;
use crate::spectral::{derivative, heat_propagate, SpectralField};

/// `|D^k u|_{L^q} = sum_{|alpha| = k} |d^alpha u|_{L^q}`.
pub fn derivative_norm(u: &SpectralField, k: u32, q: f64) -> f64 {
    (0..=k)
        .map(|a| lp_norm(&derivative(u, [a, k - a]), q))
        .sum()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BernsteinReport {
    /// `|D^k u|_q / (lambda^{k + 2(1/p - 1/q)} |u|_p)` for ball-localized `u`.
    pub direct: RatioReport,
    /// `lambda^k |u|_p / |D^k u|_p` for annulus-localized `u`.
    pub reverse: RatioReport,
    /// `(max - min) / min` of the per-scale maximal direct ratio.
    pub scale_drift: f64,
}

/// Bernstein inequalities over the scales `lambda = 2^j`, `j` in `scales`.
pub fn check_bernstein(
    setup: &LabSetup,
    k: u32,
    p: f64,
    q: f64,
    trials: usize,
    scales: std::ops::RangeInclusive<i32>,
) -> Result<BernsteinReport> {
    if !(p >= 1.0 && q >= p) {
        return Err(Error::Exponent(format!("need 1 <= p <= q, got p = {p}, q = {q}")));
    }
    if trials == 0 {
        return Err(Error::Invalid("at least one trial".into()));
    }
    let top = setup.ladder.j_max() - 1;
    if *scales.end() > top || scales.is_empty() {
        return Err(Error::BlockIndex {
            j: *scales.end(),
            min: setup.ladder.j_min(),
            max: top,
        });
    }
    let g = &setup.grid;
    let jobs: Vec<(usize, i32)> = (0..trials)
        .flat_map(|t| scales.clone().map(move |j| (t, j)))
        .collect();
    let rows: Vec<(RatioRow, RatioRow)> = jobs
        .par_iter()
        .map(|&(t, j)| {
            let seed = trial_seed(setup.seed, t);
            let lambda = 2f64.powi(j);
            let u = ball_field(g, j, seed);
            let lhs = derivative_norm(&u, k, q);
            let rhs = lambda.powf(k as f64 + 2.0 * (1.0 / p - 1.0 / q)) * lp_norm(&u, p);
            let direct = RatioRow::new(t, seed, Some(j), lhs, rhs);
            let v = annulus_field(g, j, seed);
            let lhs = lambda.powi(k as i32) * lp_norm(&v, p);
            let rhs = derivative_norm(&v, k, p);
            (direct, RatioRow::new(t, seed, Some(j), lhs, rhs))
        })
        .collect();
    let config = format!("k={k},p={p},q={q},n={}", g.n());
    let mut direct = RatioReport::new("bernstein", config.clone());
    let mut reverse = RatioReport::new("bernstein-reverse", config);
    for (d, r) in rows {
        direct.push(d);
        reverse.push(r);
    }
    let per_scale: Vec<f64> = scales
        .map(|j| {
            direct
                .rows
                .iter()
                .filter(|r| r.j == Some(j))
                .map(|r| r.ratio)
                .fold(0.0, f64::max)
        })
        .collect();
    let lo = per_scale.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = per_scale.iter().cloned().fold(0.0, f64::max);
    Ok(BernsteinReport {
        direct,
        reverse,
        scale_drift: if lo > 0.0 { (hi - lo) / lo } else { f64::INFINITY },
    })
}

/// Least-squares fit `log |e^{t Delta} u|_p ≈ log C0 - c lambda^2 t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatFit {
    pub slope: f64,
    /// Decay constant `c = -slope / lambda^2`.
    pub c: f64,
    /// Smallest `C` with `|e^{t Delta} u|_p <= C e^{-c t lambda^2} |u|_p` at the samples.
    pub big_c: f64,
}

/// Lower and upper decay constants allowed by the annulus `[3/4, 8/3]`.
pub const HEAT_WINDOW: (f64, f64) = (9.0 / 16.0, 64.0 / 9.0);

impl HeatFit {
    pub fn in_window(&self) -> bool {
        self.c >= HEAT_WINDOW.0 && self.c <= HEAT_WINDOW.1
    }
}

/// Fits the decay of `t -> |e^{t Delta} u|_p`.
pub fn fit_heat_decay(u: &SpectralField, lambda: f64, times: &[f64], p: f64) -> Result<HeatFit> {
    if times.len() < 3 {
        return Err(Error::TooFewSamples(format!(
            "{} times, the fit needs at least 3",
            times.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Unordered);
    }
    let n0 = lp_norm(u, p);
    if n0 == 0.0 {
        return Err(Error::Invalid("zero data".into()));
    }
    let logs: Vec<f64> = times
        .iter()
        .map(|&t| lp_norm(&heat_propagate(u, 1.0, t), p).ln())
        .collect();
    let m = times.len() as f64;
    let tm = times.iter().sum::<f64>() / m;
    let lm = logs.iter().sum::<f64>() / m;
    let sxy: f64 = times.iter().zip(&logs).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let sxx: f64 = times.iter().map(|t| (t - tm) * (t - tm)).sum();
    let slope = sxy / sxx;
    let c = -slope / (lambda * lambda);
    let big_c = times
        .iter()
        .zip(&logs)
        .map(|(t, l)| (l - n0.ln() + c * lambda * lambda * t).exp())
        .fold(0.0, f64::max);
    Ok(HeatFit { slope, c, big_c })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeatReport {
    pub j: i32,
    pub fits: Vec<HeatFit>,
    /// Rows `|e^{t Delta} u|_p` against `e^{-c t lambda^2} |u|_p` with the fitted `c`.
    pub report: RatioReport,
}

impl HeatReport {
    pub fn all_in_window(&self) -> bool {
        self.fits.iter().all(HeatFit::in_window)
    }
}

/// Default sample times `t_i = i / (4 lambda^2)`, `i = 0..8`.
pub fn default_heat_times(j: i32) -> Vec<f64> {
    let l2 = 4f64.powi(j);
    (0..=8).map(|i| i as f64 / (4.0 * l2)).collect()
}

/// Heat decay of annulus-localized random data at scale `2^j`.
pub fn check_heat_decay(
    setup: &LabSetup,
    j: i32,
    times: &[f64],
    p: f64,
    trials: usize,
) -> Result<HeatReport> {
    if j >= setup.ladder.j_max() {
        return Err(Error::BlockIndex {
            j,
            min: setup.ladder.j_min(),
            max: setup.ladder.j_max() - 1,
        });
    }
    let lambda = 2f64.powi(j);
    let fits: Vec<(u64, SpectralField, HeatFit)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(setup.seed, t);
            let u = annulus_field(&setup.grid, j, seed);
            let fit = fit_heat_decay(&u, lambda, times, p)?;
            Ok((seed, u, fit))
        })
        .collect::<Result<_>>()?;
    let mut report = RatioReport::new("heat", format!("j={j},p={p},n={}", setup.grid.n()));
    for (trial, (seed, u, fit)) in fits.iter().enumerate() {
        let n0 = lp_norm(u, p);
        for &t in times {
            let lhs = lp_norm(&heat_propagate(u, 1.0, t), p);
            let rhs = (-fit.c * t * lambda * lambda).exp() * n0;
            report.push(RatioRow::new(trial, *seed, Some(j), lhs, rhs));
        }
    }
    Ok(HeatReport {
        j,
        fits: fits.into_iter().map(|(_, _, f)| f).collect(),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn axis_mode_saturates() {
        let s = LabSetup::new(64, std::f64::consts::TAU, 1).unwrap();
        let u = SpectralField::single_mode(&s.grid, 5, 0, Complex64::new(1.0, 0.0)).unwrap();
        for k in 1..4 {
            let r = derivative_norm(&u, k, 2.0) / (5f64.powi(k as i32) * lp_norm(&u, 2.0));
            assert!((r - 1.0).abs() < 1e-12, "{r}");
        }
        let l = s.grid.length();
        assert!((lp_norm(&u, f64::INFINITY) / lp_norm(&u, 2.0) - 1.0 / l).abs() < 1e-14);
    }

    #[test]
    fn single_mode_heat_slope() {
        let s = LabSetup::new(64, std::f64::consts::TAU, 1).unwrap();
        let j = 3;
        let u = SpectralField::single_mode(&s.grid, 7, 8, Complex64::new(1.0, 0.0)).unwrap();
        let lambda = 8.0;
        let fit = fit_heat_decay(&u, lambda, &default_heat_times(j), 2.0).unwrap();
        assert!((fit.slope + 113.0).abs() < 1e-9);
        assert!(fit.in_window());
        assert!((fit.big_c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn heat_errors() {
        let s = LabSetup::new(32, std::f64::consts::TAU, 1).unwrap();
        let u = annulus_field(&s.grid, 2, 1);
        assert!(matches!(
            fit_heat_decay(&u, 4.0, &[0.0, 0.1], 2.0),
            Err(Error::TooFewSamples(_))
        ));
        assert!(check_bernstein(&s, 1, 3.0, 2.0, 1, 1..=2).is_err());
    }

    #[test]
    fn gain_in_integrability_is_bounded() {
        let s = LabSetup::new(64, std::f64::consts::TAU, 5).unwrap();
        let r = check_bernstein(&s, 1, 2.0, 4.0, 4, 1..=4).unwrap();
        assert!(r.direct.is_valid() && r.direct.max() < 2.0, "{}", r.direct.max());
    }

    #[test]
    fn random_bernstein_is_scale_stable() {
        let s = LabSetup::new(64, std::f64::consts::TAU, 5).unwrap();
        let r = check_bernstein(&s, 1, 2.0, 2.0, 4, 2..=4).unwrap();
        assert!(r.direct.is_valid() && r.reverse.is_valid());
        assert!(r.scale_drift < 0.3, "{}", r.scale_drift);
    }
}
