use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicLadder;
use crate::error::{Error, Result};
use crate::spectral::{heat_propagate_vector, leray_project, SpectralField, VectorField};

/// Truncated initial data together with the `L^inf` control of `a`.
#[derive(Clone, Debug)]
pub struct MollifiedData {
    pub a: SpectralField,
    pub u: VectorField,
    /// `|a0n|_inf / |a0|_inf`.
    pub linf_ratio: f64,
    /// Whether `|a0n|_inf <= 2 |a0|_inf`.
    pub linf_bound_holds: bool,
    pub kappa: f64,
    pub min_coefficient: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TruncationReport {
    pub level: i32,
    pub linf_ratio: f64,
    pub min_coefficient: f64,
}

fn linf(f: &SpectralField) -> f64 {
    let (lo, hi) = f.min_max();
    lo.abs().max(hi.abs())
}

/// `a0n = Ṡ_level a0`, `u0n = P Ṡ_level u0`; rejects levels that let `1 + a0n` drop below `kappa / 2`.
pub fn mollify_initial_data(
    a0: &SpectralField,
    u0: &VectorField,
    level: i32,
    ladder: &DyadicLadder,
) -> Result<MollifiedData> {
    let (lo, _) = a0.min_max();
    let kappa = 1.0 + lo;
    if !(kappa > 0.0) {
        return Err(Error::Coefficient(kappa));
    }
    let a = ladder.low_pass(a0, level)?;
    let u = leray_project(&ladder.low_pass_vector(u0, level)?);
    let (lo_n, _) = a.min_max();
    if 1.0 + lo_n < 0.5 * kappa {
        return Err(Error::Truncation {
            found: 1.0 + lo_n,
            bound: 0.5 * kappa,
        });
    }
    let base = linf(a0);
    let linf_ratio = if base > 0.0 { linf(&a) / base } else { 0.0 };
    Ok(MollifiedData {
        a,
        u,
        linf_ratio,
        linf_bound_holds: linf_ratio <= 2.0,
        kappa,
        min_coefficient: 1.0 + lo_n,
    })
}

/// `u_L(t) = exp(mu t Delta) u0`.
pub fn free_heat_reference(u0: &VectorField, mu: f64, t: f64) -> Result<VectorField> {
    if !(mu > 0.0) {
        return Err(Error::Invalid(format!("viscosity {mu} must be positive")));
    }
    if !(t >= 0.0) {
        return Err(Error::Invalid(format!("time {t} must be nonnegative")));
    }
    Ok(heat_propagate_vector(u0, mu, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use num_complex::Complex64;

    #[test]
    fn high_level_is_identity() {
        let g = Grid::periodic(32).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let a0 = SpectralField::from_fn(&g, |x, y| 0.3 * (x + 7.0 * y).sin());
        let u0 = leray_project(&VectorField::from_fn(&g, |x, y| [(3.0 * y).sin(), (5.0 * x).cos()]));
        let m = mollify_initial_data(&a0, &u0, l.j_max() + 1, &l).unwrap();
        assert!((&m.a - &a0).max_coefficient() < 1e-15);
        assert!((&m.u - &u0).max_coefficient() < 1e-15);
        assert!(m.linf_bound_holds);
    }

    #[test]
    fn high_mode_is_removed() {
        let g = Grid::periodic(32).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let a0 = SpectralField::single_mode(&g, 12, 0, Complex64::new(0.1, 0.0)).unwrap();
        let m = mollify_initial_data(&a0, &VectorField::zeros(&g), 2, &l).unwrap();
        assert_eq!(m.a.max_coefficient(), 0.0);
    }

    #[test]
    fn heat_reference_at_zero_time() {
        let g = Grid::periodic(16).unwrap();
        let u0 = VectorField::from_fn(&g, |x, y| [y.sin(), x.cos()]);
        let r = free_heat_reference(&u0, 0.3, 0.0).unwrap();
        assert_eq!((&r - &u0).max_coefficient(), 0.0);
        let r = free_heat_reference(&u0, 0.3, 1.0).unwrap();
        assert!((r.x.mode(0, 1).im + 0.5 * (-0.3f64).exp()).abs() < 1e-15);
        assert!(free_heat_reference(&u0, 0.0, 1.0).is_err());
    }
}
