use serde::{Deserialize, Serialize};

use super::report::{RatioReport, RatioRow};
use crate::dyadic::DyadicLadder;
use crate::error::{Error, Result};
use crate::evolution::{
    check_divergence, semi_lagrangian_values, transport_step, StateSnapshot, TransportScheme,
};
use crate::norms::{block_profile, besov_norm_vector_mean_free, time_norm, BesovSpec, BlockProfile};
use crate::spectral::{Grid, SpectralField, VectorField};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportEstimate {
    /// Smallest `C` with `|a|_{L̃^∞_t(Ḃ^{2/q}_{q,1})} <= |a0| e^{C U(t)}` at every snapshot.
    pub c: f64,
    pub times: Vec<f64>,
    /// `U(t) = |u|_{L^1_t(Ḃ^{2/p+1}_{p,1})}`.
    pub u_integral: Vec<f64>,
    /// One row per snapshot, right side evaluated with the fitted `C`.
    pub report: RatioReport,
    /// One row per `m` at the final time, `j = m`.
    pub high_frequency: RatioReport,
}

/// Blockwise running sup, aggregated in `l^1` after each push.
struct RunningSup {
    sup: Option<BlockProfile>,
}

impl RunningSup {
    fn push(&mut self, p: &BlockProfile) -> f64 {
        let s = match self.sup.take() {
            None => p.clone(),
            Some(mut s) => {
                s.values
                    .iter_mut()
                    .zip(&p.values)
                    .for_each(|(a, b)| *a = a.max(*b));
                s
            }
        };
        let total = s.aggregate(1.0);
        self.sup = Some(s);
        total
    }
}

/// Measures the transport estimate and its high-frequency variant along `snapshots`.
///
/// Norms of `a` are taken on the mean-free part.
pub fn check_transport_estimate(
    snapshots: &[StateSnapshot],
    p: f64,
    q: f64,
    ms: &[i32],
) -> Result<TransportEstimate> {
    if snapshots.len() < 2 {
        return Err(Error::TooFewSamples(format!(
            "{} snapshots, the estimate needs at least 2",
            snapshots.len()
        )));
    }
    if !(p >= 1.0 && q >= 1.0) || 1.0 / q - 1.0 / p > 0.5 {
        return Err(Error::Exponent(format!(
            "transport estimate needs 1/q - 1/p <= 1/2, got p={p}, q={q}"
        )));
    }
    let grid = snapshots[0].a.grid().clone();
    let ladder = DyadicLadder::new(&grid)?;
    let sa = BesovSpec::critical(q, 0.0)?;
    let su = BesovSpec::critical(p, 1.0)?;
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    let mut rates = Vec::with_capacity(snapshots.len());
    let mut sup = RunningSup { sup: None };
    let mut lhs = Vec::with_capacity(snapshots.len());
    let mut highs: Vec<RunningSup> = ms.iter().map(|_| RunningSup { sup: None }).collect();
    let mut high_lhs = vec![0.0; ms.len()];
    for s in snapshots {
        check_divergence(&s.u)?;
        rates.push(besov_norm_vector_mean_free(&s.u, &su, &ladder)?);
        let a = s.a.without_mean();
        lhs.push(sup.push(&block_profile(&a, &sa, &ladder)?));
        for ((m, acc), out) in ms.iter().zip(&mut highs).zip(&mut high_lhs) {
            let tail = &a - &ladder.low_pass(&a, *m)?;
            *out = acc.push(&block_profile(&tail, &sa, &ladder)?);
        }
    }
    let mut u_integral = vec![0.0];
    for i in 1..times.len() {
        u_integral.push(time_norm(&times[..=i], &rates[..=i], 1.0)?);
    }
    let a0_profile = block_profile(&snapshots[0].a.without_mean(), &sa, &ladder)?;
    let a0 = a0_profile.aggregate(1.0);
    let c = lhs
        .iter()
        .zip(&u_integral)
        .map(|(l, u)| {
            if *l <= a0 * (1.0 + 1e-12) {
                0.0
            } else if *u > 0.0 {
                (l / a0).ln() / u
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    let config = format!("p={p},q={q},n={}", grid.n());
    let mut report = RatioReport::new("transport", config.clone());
    for (i, (l, u)) in lhs.iter().zip(&u_integral).enumerate() {
        report.push(RatioRow::new(i, 0, None, *l, a0 * (c * u).exp()));
    }
    let mut high_frequency = RatioReport::new("transport-high", config);
    let u_final = *u_integral.last().expect("at least two snapshots");
    for (i, (m, l)) in ms.iter().zip(&high_lhs).enumerate() {
        let tail: f64 = a0_profile
            .entries()
            .filter(|(j, _)| j >= m)
            .map(|(_, v)| v)
            .sum();
        let rhs = tail + a0 * (c * u_final).exp_m1();
        high_frequency.push(RatioRow::new(i, 0, Some(*m), *l, rhs));
    }
    Ok(TransportEstimate {
        c,
        times,
        u_integral,
        report,
        high_frequency,
    })
}

/// `a0 = 0.5 cos x + 0.2 cos 2y` and the shear `u = (sin y, 0)` on `[0, 2pi)^2`.
pub fn shear_initial_data(n: usize) -> Result<(SpectralField, VectorField)> {
    let g = Grid::periodic(n)?;
    let a0 = SpectralField::from_fn(&g, |x, y| 0.5 * x.cos() + 0.2 * (2.0 * y).cos());
    let u = VectorField::from_fn(&g, |_, y| [y.sin(), 0.0]);
    Ok((a0, u))
}

/// Transports the shear benchmark to `t_end`, keeping every `every`-th state.
///
/// Semi-Lagrangian schemes step nodal values directly. The second value is
/// the largest one-sided range excess per unit time seen at the nodes.
pub fn shear_benchmark(
    n: usize,
    dt: f64,
    t_end: f64,
    scheme: TransportScheme,
    every: usize,
) -> Result<(Vec<StateSnapshot>, f64)> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::Invalid(format!("need dt > 0 and t_end > 0, got {dt}, {t_end}")));
    }
    let (a0, u) = shear_initial_data(n)?;
    let g = a0.grid().clone();
    let steps = (t_end / dt).round().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let every = every.max(1);
    let v0 = a0.to_physical();
    let (lo0, hi0) = range(&v0);
    let mut snapshots = vec![StateSnapshot::new(0.0, a0.clone(), u.clone())?];
    let mut a = a0;
    let mut nodal = v0;
    let mut drift = 0.0f64;
    for k in 1..=steps {
        let t = k as f64 * dt;
        match scheme {
            TransportScheme::SpectralRk3 => {
                a = transport_step(&a, &u, dt, scheme)?;
                nodal = a.to_physical();
            }
            _ => {
                if k == 1 {
                    transport_step(&a, &u, dt, scheme)?;
                }
                let monotone = scheme == TransportScheme::SemiLagrangianMonotone;
                nodal = semi_lagrangian_values(&nodal, &u, dt, monotone);
            }
        }
        let (lo, hi) = range(&nodal);
        drift = drift.max((hi - hi0).max(lo0 - lo).max(0.0) / t);
        if k % every == 0 || k == steps {
            if scheme != TransportScheme::SpectralRk3 {
                a = SpectralField::from_physical(&g, &nodal)?;
            }
            snapshots.push(StateSnapshot::new(t, a.clone(), u.clone())?);
        }
    }
    Ok((snapshots, drift))
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_data_needs_no_growth() {
        let (a0, _) = shear_initial_data(32).unwrap();
        let u = VectorField::zeros(a0.grid());
        let snaps: Vec<StateSnapshot> = (0..3)
            .map(|i| StateSnapshot::new(0.1 * i as f64, a0.clone(), u.clone()).unwrap())
            .collect();
        let est = check_transport_estimate(&snaps, 2.0, 2.0, &[1, 2]).unwrap();
        assert_eq!(est.c, 0.0);
        assert!(est.report.rows.iter().all(|r| (r.ratio - 1.0).abs() < 1e-14));
        assert!(est.high_frequency.is_valid());
    }

    #[test]
    fn translation_keeps_norms() {
        let g = Grid::periodic(32).unwrap();
        let u = VectorField::from_fn(&g, |_, _| [1.0, 0.0]);
        let snaps: Vec<StateSnapshot> = (0..4)
            .map(|i| {
                let t = 0.3 * i as f64;
                let a = SpectralField::from_fn(&g, |x, y| (x - t).cos() + 0.5 * (2.0 * y).sin());
                StateSnapshot::new(t, a, u.clone()).unwrap()
            })
            .collect();
        let est = check_transport_estimate(&snaps, 2.0, 2.0, &[]).unwrap();
        assert!(est.report.rows.iter().all(|r| (r.lhs - r.rhs).abs() < 1e-12 * r.rhs));
        assert!(est.u_integral.iter().all(|u| *u == 0.0));
    }

    #[test]
    fn shear_monotone_never_leaves_range() {
        let (snaps, drift) =
            shear_benchmark(32, 0.05, 0.5, TransportScheme::SemiLagrangianMonotone, 5).unwrap();
        assert_eq!(drift, 0.0);
        assert_eq!(snaps.len(), 3);
        let est = check_transport_estimate(&snaps, 2.0, 2.0, &[1]).unwrap();
        assert!(est.c.is_finite() && est.report.is_valid());
    }

    #[test]
    fn needs_two_snapshots() {
        let (a0, u) = shear_initial_data(16).unwrap();
        let s = vec![StateSnapshot::new(0.0, a0, u).unwrap()];
        assert!(matches!(
            check_transport_estimate(&s, 2.0, 2.0, &[]),
            Err(Error::TooFewSamples(_))
        ));
    }
}
