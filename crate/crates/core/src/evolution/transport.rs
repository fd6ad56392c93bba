use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::PeriodicSampler;
use crate::spectral::{advect, divergence, gradient, SpectralField, VectorField};

/// Largest accepted `dt |u|_inf n / L`.
pub const CFL_LIMIT: f64 = 0.5;
/// Largest accepted `|div u|_{L^2} / |grad u|_{L^2}`.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportScheme {
    /// Dealiased pseudo-spectral SSP-RK3.
    #[default]
    SpectralRk3,
    /// Semi-Lagrangian with bicubic interpolation.
    SemiLagrangian,
    /// Semi-Lagrangian clipped to the departure cell, so no new extrema appear.
    SemiLagrangianMonotone,
}

/// `dt |u|_inf n / L`.
pub fn cfl_number(u: &VectorField, dt: f64) -> f64 {
    let umax = u.magnitude_physical().into_iter().fold(0.0f64, f64::max);
    let g = u.grid();
    dt * umax * g.n() as f64 / g.length()
}

/// `|div u|_{L^2} / |grad u|_{L^2}` (zero for constant `u`).
pub fn relative_divergence(u: &VectorField) -> f64 {
    let d = divergence(u).coefficient_norm();
    if d == 0.0 {
        return 0.0;
    }
    let g = gradient(&u.x)
        .coefficient_norm()
        .hypot(gradient(&u.y).coefficient_norm());
    d / g
}

pub fn check_divergence(u: &VectorField) -> Result<()> {
    let r = relative_divergence(u);
    if r > DIVERGENCE_TOLERANCE {
        return Err(Error::NotSolenoidal(r));
    }
    Ok(())
}

/// Advances `a_t + u . grad a = 0` by `dt` with `u` frozen.
pub fn transport_step(
    a: &SpectralField,
    u: &VectorField,
    dt: f64,
    scheme: TransportScheme,
) -> Result<SpectralField> {
    if a.grid() != u.grid() {
        return Err(Error::GridMismatch);
    }
    check_divergence(u)?;
    let c = cfl_number(u, dt);
    if c > CFL_LIMIT {
        return Err(Error::Cfl(c));
    }
    if u.max_coefficient() == 0.0 || dt == 0.0 {
        return Ok(a.clone());
    }
    match scheme {
        TransportScheme::SpectralRk3 => spectral_rk3(a, u, dt),
        TransportScheme::SemiLagrangian => semi_lagrangian(a, u, dt, false),
        TransportScheme::SemiLagrangianMonotone => semi_lagrangian(a, u, dt, true),
    }
}

fn rhs(a: &SpectralField, u: &VectorField) -> Result<SpectralField> {
    Ok(advect(u, a)?.scale(-1.0))
}

fn spectral_rk3(a: &SpectralField, u: &VectorField, dt: f64) -> Result<SpectralField> {
    let mut a1 = a.clone();
    a1.axpy(dt, &rhs(a, u)?);
    let mut a2 = a.scale(0.75);
    a2.axpy(0.25, &a1);
    a2.axpy(0.25 * dt, &rhs(&a1, u)?);
    let mut out = a.scale(1.0 / 3.0);
    out.axpy(2.0 / 3.0, &a2);
    out.axpy(2.0 / 3.0 * dt, &rhs(&a2, u)?);
    Ok(out)
}

fn semi_lagrangian(
    a: &SpectralField,
    u: &VectorField,
    dt: f64,
    monotone: bool,
) -> Result<SpectralField> {
    let vals = semi_lagrangian_values(&a.to_physical(), u, dt, monotone);
    SpectralField::from_physical(a.grid(), &vals)
}

/// Semi-Lagrangian update of nodal values, with RK2 departure points.
///
/// Working on nodal values keeps the monotone variant exactly inside the
/// initial range.
pub fn semi_lagrangian_values(
    values: &[f64],
    u: &VectorField,
    dt: f64,
    monotone: bool,
) -> Vec<f64> {
    let g = u.grid();
    let n = g.n();
    let sa = PeriodicSampler::new(n, g.length(), values.to_vec());
    let ux_vals = u.x.to_physical();
    let uy_vals = u.y.to_physical();
    let sx = PeriodicSampler::new(n, g.length(), ux_vals.clone());
    let sy = PeriodicSampler::new(n, g.length(), uy_vals.clone());
    let mut out = Vec::with_capacity(g.len());
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            let [x, y] = g.node(ix, iy);
            let xm = x - 0.5 * dt * ux_vals[idx];
            let ym = y - 0.5 * dt * uy_vals[idx];
            let xd = x - dt * sx.eval(xm, ym);
            let yd = y - dt * sy.eval(xm, ym);
            out.push(if monotone {
                sa.eval_monotone(xd, yd)
            } else {
                sa.eval(xd, yd)
            });
        }
    }
    out
}

/// One-sided range excess per unit time: how far `a_t` leaves `[min a0, max a0]`, divided by `t`.
pub fn range_drift(a0: &SpectralField, at: &SpectralField, t: f64) -> f64 {
    let (lo0, hi0) = a0.min_max();
    let (lo, hi) = at.min_max();
    let excess = (hi - hi0).max(lo0 - lo).max(0.0);
    if t > 0.0 {
        excess / t
    } else {
        excess
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn bump(g: &Grid) -> SpectralField {
        SpectralField::from_fn(g, |x, y| 0.5 * x.cos() + 0.2 * (2.0 * y).cos())
    }

    #[test]
    fn zero_velocity_is_identity() {
        let g = Grid::periodic(32).unwrap();
        let a = bump(&g);
        for s in [
            TransportScheme::SpectralRk3,
            TransportScheme::SemiLagrangian,
            TransportScheme::SemiLagrangianMonotone,
        ] {
            let b = transport_step(&a, &VectorField::zeros(&g), 0.1, s).unwrap();
            assert_eq!((&b - &a).max_coefficient(), 0.0);
        }
    }

    #[test]
    fn constant_velocity_translates() {
        let g = Grid::periodic(64).unwrap();
        let a = bump(&g);
        let u = VectorField::from_fn(&g, |_, _| [0.7, -0.3]);
        let dt = 0.01;
        let exact = SpectralField::from_fn(&g, |x, y| {
            0.5 * (x - 0.7 * dt).cos() + 0.2 * (2.0 * (y + 0.3 * dt)).cos()
        });
        for (s, tol) in [
            (TransportScheme::SpectralRk3, 1e-9),
            (TransportScheme::SemiLagrangian, 2e-6),
        ] {
            let b = transport_step(&a, &u, dt, s).unwrap();
            let e = (&b - &exact).max_coefficient();
            assert!(e < tol, "{s:?}: {e}");
        }
    }

    #[test]
    fn rejects_cfl_and_divergence() {
        let g = Grid::periodic(32).unwrap();
        let a = bump(&g);
        let u = VectorField::from_fn(&g, |_, y| [y.sin(), 0.0]);
        assert!(matches!(
            transport_step(&a, &u, 1.0, TransportScheme::SpectralRk3),
            Err(Error::Cfl(_))
        ));
        let w = VectorField::from_fn(&g, |x, _| [x.sin(), 0.0]);
        assert!(matches!(
            transport_step(&a, &w, 0.01, TransportScheme::SpectralRk3),
            Err(Error::NotSolenoidal(_))
        ));
    }

    #[test]
    fn monotone_values_never_leave_range() {
        let g = Grid::periodic(64).unwrap();
        let mut v = bump(&g).to_physical();
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
        let u = VectorField::from_fn(&g, |_, y| [y.sin(), 0.0]);
        for _ in 0..20 {
            v = semi_lagrangian_values(&v, &u, 0.04, true);
        }
        assert!(v.iter().all(|x| *x >= lo && *x <= hi));
    }

    #[test]
    fn monotone_scheme_keeps_range() {
        let g = Grid::periodic(64).unwrap();
        let mut a = bump(&g);
        let a0 = a.clone();
        let u = VectorField::from_fn(&g, |_, y| [y.sin(), 0.0]);
        for _ in 0..20 {
            a = transport_step(&a, &u, 0.04, TransportScheme::SemiLagrangianMonotone).unwrap();
        }
        assert!(range_drift(&a0, &a, 1.0) <= 1e-12);
    }
}
