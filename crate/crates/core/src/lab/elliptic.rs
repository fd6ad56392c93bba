use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::random::{gaussian_field, gaussian_vector, trial_seed, with_max, GaussianEnsemble};
use super::report::{block_envelope, RatioReport, RatioRow};
use super::{lower_threshold, upper_threshold, LabSetup};
use crate::dyadic::DyadicLadder;
use crate::elliptic::solve_pressure;
use crate::error::{Error, Result};
use crate::norms::{
    besov_norm_mean_free, besov_norm_vector, block_profile, lp_norm, BesovSpec,
};
use crate::paraproduct::commutator_block;
use crate::spectral::{divergence, gradient, gradient_part, Grid, SpectralField, VectorField};

/// Slack on `kappa |grad Pi|_{L^2} <= |QF|_{L^2}`.
pub const L2_SLACK: f64 = 1e-6;

/// Which bound on `I_j` applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IjRegime {
    /// `p` in `((1 + sqrt 17)/4, 2]`, `1/p - 1/q <= 1/2`, with `|a|_{Ḃ^{2/q}_{q,1}} |grad Pi|_{L^2}`.
    Mixed,
    /// `q = p < 2`, with `|a|_{Ḃ^{2/p}_{p,1}} |grad Pi|_{L^2}`.
    Lebesgue,
    /// `q = p` in `[2, 4)`, with `|a|_{Ḃ^{2/p}_{p,1}} |grad Pi|_{Ḃ^{2/p-1}_{p,2}}`.
    Besov,
}

pub fn ij_regime(p: f64, q: f64) -> Result<IjRegime> {
    if p > lower_threshold() && p <= 2.0 && q >= 1.0 && q.is_finite() && 1.0 / p - 1.0 / q <= 0.5
    {
        Ok(IjRegime::Mixed)
    } else if q == p && p > 1.0 && p < 2.0 {
        Ok(IjRegime::Lebesgue)
    } else if q == p && (2.0..4.0).contains(&p) {
        Ok(IjRegime::Besov)
    } else {
        Err(Error::Exponent(format!(
            "integral commutator bound needs p in ((1+sqrt17)/4, 2] with 1/p-1/q <= 1/2, \
             or q = p in (1, 4); got p={p}, q={q}"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IjMeasurement {
    pub j: i32,
    pub regime: IjRegime,
    /// `int div([Δ̇_j, a] grad Pi) |Δ̇_j Pi|^{p-2} Δ̇_j Pi`.
    pub divergence_form: f64,
    /// `-(p-1) int [Δ̇_j, a] grad Pi . |Δ̇_j Pi|^{p-2} grad Δ̇_j Pi`.
    pub by_parts: f64,
    pub rhs: f64,
}

impl IjMeasurement {
    pub fn ratio(&self) -> f64 {
        RatioRow::new(0, 0, None, self.divergence_form.abs(), self.rhs).ratio
    }

    /// Relative gap between the two quadratures.
    pub fn route_gap(&self) -> f64 {
        let scale = self.divergence_form.abs().max(self.by_parts.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.divergence_form - self.by_parts).abs() / scale
        }
    }
}

fn fine_values(f: &SpectralField, fine: &Grid) -> Result<Vec<f64>> {
    Ok(f.resample(fine)?.to_physical())
}

/// Evaluates `I_j` by two quadratures and the matching right side.
///
/// Integrals use nodes of the grid refined twice; `d_j` comes from the block
/// envelope of `a`.
pub fn check_ij_bound(
    a: &SpectralField,
    pi: &SpectralField,
    p: f64,
    q: f64,
    j: i32,
    ladder: &DyadicLadder,
) -> Result<IjMeasurement> {
    let regime = ij_regime(p, q)?;
    let grid = a.grid();
    if pi.grid() != grid || ladder.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let fine = Grid::new(2 * grid.n(), grid.length())?;
    let a = a.without_mean();
    let grad = gradient(pi);
    let b = ladder.block(pi, j)?;
    let gb = gradient(&b);
    let comm = commutator_block(&a, &grad, j, ladder)?;
    let div = fine_values(&divergence(&comm), &fine)?;
    let bv = fine_values(&b, &fine)?;
    let (cx, cy) = (fine_values(&comm.x, &fine)?, fine_values(&comm.y, &fine)?);
    let (gx, gy) = (fine_values(&gb.x, &fine)?, fine_values(&gb.y, &fine)?);
    let weight = |v: f64| if v == 0.0 { 0.0 } else { v.abs().powf(p - 2.0) };
    let area = fine.cell_area();
    let mut divergence_form = 0.0;
    let mut by_parts = 0.0;
    for i in 0..bv.len() {
        let w = weight(bv[i]);
        divergence_form += div[i] * w * bv[i];
        by_parts += (cx[i] * gx[i] + cy[i] * gy[i]) * w;
    }
    divergence_form *= area;
    by_parts *= -(p - 1.0) * area;

    let q_eff = if regime == IjRegime::Mixed { q } else { p };
    let sa = BesovSpec::critical(q_eff, 0.0)?;
    let profile = block_profile(&a, &sa, ladder)?;
    let d = block_envelope(&profile).get(j).unwrap_or(0.0);
    let a_norm = profile.aggregate(1.0);
    let pi_norm = match regime {
        IjRegime::Besov => {
            besov_norm_vector(&grad, &BesovSpec::homogeneous(2.0 / p - 1.0, p, 2.0)?, ladder)?.0
        }
        _ => grad.coefficient_norm() * grid.length(),
    };
    let rhs = d
        * 2f64.powf(j as f64 * (2.0 - 2.0 / p))
        * a_norm
        * pi_norm
        * lp_norm(&b, p).powf(p - 1.0);
    Ok(IjMeasurement {
        j,
        regime,
        divergence_form,
        by_parts,
        rhs,
    })
}

/// Coefficient with `|a|_inf = amplitude` drawn from a smooth broadband ensemble.
pub fn random_coefficient(grid: &Grid, seed: u64, amplitude: f64) -> Result<SpectralField> {
    with_max(
        &gaussian_field(grid, &GaussianEnsemble::broadband(grid, 1.5), seed),
        amplitude,
    )
}

/// `I_j` over all blocks for random `(a, Pi)`; returns the report and the largest route gap.
pub fn check_ij_sweep(
    setup: &LabSetup,
    p: f64,
    q: f64,
    trials: usize,
) -> Result<(RatioReport, f64)> {
    ij_regime(p, q)?;
    let ladder = &setup.ladder;
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(setup.seed, t);
            let a = random_coefficient(&setup.grid, seed, 0.5)?;
            let pi = gaussian_field(
                &setup.grid,
                &GaussianEnsemble::broadband(&setup.grid, 2.0),
                seed ^ 3,
            );
            ladder
                .indices()
                .map(|j| {
                    let m = check_ij_bound(&a, &pi, p, q, j, ladder)?;
                    Ok((
                        RatioRow::new(t, seed, Some(j), m.divergence_form.abs(), m.rhs),
                        m.route_gap(),
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = RatioReport::new("ij", format!("p={p},q={q},n={}", setup.grid.n()));
    let mut gap = 0.0f64;
    for (row, g) in per_trial.into_iter().flatten() {
        gap = gap.max(g);
        report.push(row);
    }
    Ok((report, gap))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticEstimate {
    pub p: f64,
    /// Power on `1 + |a|_{Ḃ^{2/p}_{p,1}}`.
    pub k: i32,
    /// `|grad Pi|_{Ḃ^{2/p-1}_{p,1}}`.
    pub lhs: f64,
    /// `(1 + |a|_{Ḃ^{2/p}_{p,1}})^k |QF|_{Ḃ^{2/p-1}_{p,1}}`.
    pub rhs: f64,
    pub ratio: f64,
    /// The same ratio in `Ḃ^{2/p-1}_{p,2}` with power 1, where that bound applies with `q = p`.
    pub variant: Option<f64>,
    pub kappa: f64,
    /// `kappa |grad Pi|_{L^2} / |QF|_{L^2}`.
    pub l2_ratio: f64,
}

impl EllipticEstimate {
    pub fn l2_holds(&self) -> bool {
        self.l2_ratio <= 1.0 + L2_SLACK
    }
}

/// Measures the Besov bound on a computed pressure gradient, plus the `L^2` bound.
pub fn check_elliptic_estimate(
    a: &SpectralField,
    f: &VectorField,
    grad_pi: &VectorField,
    p: f64,
    ladder: &DyadicLadder,
) -> Result<EllipticEstimate> {
    if !(p > 1.0 && p < 4.0) {
        return Err(Error::Exponent(format!("elliptic estimate needs p in (1, 4), got {p}")));
    }
    let k = if p <= 2.0 { 1 } else { 2 };
    let qf = gradient_part(f);
    let s1 = BesovSpec::critical(p, -1.0)?;
    let a_norm = besov_norm_mean_free(a, &BesovSpec::critical(p, 0.0)?, ladder)?;
    let lhs = besov_norm_vector(grad_pi, &s1, ladder)?.0;
    let rhs = (1.0 + a_norm).powi(k) * besov_norm_vector(&qf, &s1, ladder)?.0;
    let in_variant =
        (p > lower_threshold() && p < 2.0) || (p > 2.0 && p < upper_threshold() && 2.0 / p >= 0.5);
    let variant = if in_variant {
        let s2 = BesovSpec::homogeneous(2.0 / p - 1.0, p, 2.0)?;
        let l = besov_norm_vector(grad_pi, &s2, ladder)?.0;
        let r = (1.0 + a_norm) * besov_norm_vector(&qf, &s2, ladder)?.0;
        Some(RatioRow::new(0, 0, None, l, r).ratio)
    } else {
        None
    };
    let kappa = 1.0 + a.min_max().0;
    let qn = qf.coefficient_norm();
    let l2_ratio = if qn == 0.0 {
        0.0
    } else {
        kappa * grad_pi.coefficient_norm() / qn
    };
    Ok(EllipticEstimate {
        p,
        k,
        lhs,
        rhs,
        ratio: RatioRow::new(0, 0, None, lhs, rhs).ratio,
        variant,
        kappa,
        l2_ratio,
    })
}

/// Solves random pressure problems with `|a|_inf = amplitude` and measures each estimate.
pub fn check_elliptic_sweep(
    setup: &LabSetup,
    p: f64,
    trials: usize,
    amplitude: f64,
) -> Result<(RatioReport, Vec<EllipticEstimate>)> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::Invalid(format!(
            "coefficient amplitude must lie in [0, 1), got {amplitude}"
        )));
    }
    let g = &setup.grid;
    let results = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(setup.seed, t);
            let a = random_coefficient(g, seed, amplitude)?;
            let f = gaussian_vector(g, &GaussianEnsemble::broadband(g, 1.0), seed ^ 5);
            let (grad_pi, _) = solve_pressure(&a, &f, 1e-12, 4000)?;
            Ok((seed, check_elliptic_estimate(&a, &f, &grad_pi, p, &setup.ladder)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = RatioReport::new(
        "elliptic",
        format!("p={p},amplitude={amplitude},n={}", g.n()),
    );
    let mut out = Vec::with_capacity(results.len());
    for (t, (seed, e)) in results.into_iter().enumerate() {
        report.push(RatioRow::new(t, seed, None, e.lhs, e.rhs));
        out.push(e);
    }
    Ok((report, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> LabSetup {
        LabSetup::new(32, std::f64::consts::TAU, 8).unwrap()
    }

    #[test]
    fn regimes() {
        assert_eq!(ij_regime(2.0, 2.0).unwrap(), IjRegime::Mixed);
        assert_eq!(ij_regime(1.1, 1.1).unwrap(), IjRegime::Lebesgue);
        assert_eq!(ij_regime(2.5, 2.5).unwrap(), IjRegime::Besov);
        assert!(ij_regime(2.5, 3.0).is_err());
        assert!(ij_regime(4.0, 4.0).is_err());
    }

    #[test]
    fn constant_coefficient_has_no_commutator() {
        let s = setup();
        let a = SpectralField::constant(&s.grid, 0.3);
        let pi = gaussian_field(&s.grid, &GaussianEnsemble::broadband(&s.grid, 2.0), 1);
        let m = check_ij_bound(&a, &pi, 2.0, 2.0, 2, &s.ladder).unwrap();
        assert!(m.divergence_form.abs() < 1e-14);
        assert_eq!(m.ratio(), 0.0);
    }

    #[test]
    fn quadratures_agree_at_p2() {
        let s = setup();
        let (r, gap) = check_ij_sweep(&s, 2.0, 2.0, 2).unwrap();
        assert!(gap < 1e-8, "{gap}");
        assert!(r.is_valid());
    }

    #[test]
    fn zero_coefficient_is_exact() {
        let s = setup();
        let a = SpectralField::zeros(&s.grid);
        let f = gaussian_vector(&s.grid, &GaussianEnsemble::broadband(&s.grid, 1.0), 2);
        let (gp, _) = solve_pressure(&a, &f, 1e-12, 100).unwrap();
        let e = check_elliptic_estimate(&a, &f, &gp, 2.0, &s.ladder).unwrap();
        assert!((e.ratio - 1.0).abs() < 1e-10, "{}", e.ratio);
        assert!((e.l2_ratio - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_coefficient_divides() {
        let s = setup();
        let a = SpectralField::constant(&s.grid, 0.5);
        let f = gaussian_vector(&s.grid, &GaussianEnsemble::broadband(&s.grid, 1.0), 2);
        let (gp, _) = solve_pressure(&a, &f, 1e-12, 100).unwrap();
        let e = check_elliptic_estimate(&a, &f, &gp, 2.0, &s.ladder).unwrap();
        assert!((e.kappa - 1.5).abs() < 1e-14);
        assert!((e.l2_ratio - 1.0).abs() < 1e-9);
        assert!(e.l2_holds());
        assert!(check_elliptic_estimate(&a, &f, &gp, 4.0, &s.ladder).is_err());
    }

    #[test]
    fn random_sweep_respects_l2_bound() {
        let (r, est) = check_elliptic_sweep(&setup(), 3.0, 3, 0.7).unwrap();
        assert!(r.is_valid());
        assert!(est.iter().all(|e| e.l2_holds() && e.k == 2));
    }
}
