//! Fourier-multiplier operators: derivatives, projectors, heat semigroup.

use num_complex::Complex64;

use super::field::{SpectralField, VectorField};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Tolerance on the mean mode accepted by [`inverse_laplacian`].
pub const MEAN_TOLERANCE: f64 = 1e-12;

/// Applies `(ik)^alpha`. Odd orders use the wavenumber table with the
/// Nyquist entry zeroed.
pub fn derivative(f: &SpectralField, alpha: [u32; 2]) -> SpectralField {
    if alpha == [0, 0] {
        return f.clone();
    }
    let grid = f.grid().clone();
    let kx_tab = if alpha[0] % 2 == 1 {
        grid.wavenumbers_odd()
    } else {
        grid.wavenumbers()
    };
    let ky_tab = if alpha[1] % 2 == 1 {
        grid.wavenumbers_odd()
    } else {
        grid.wavenumbers()
    };
    let n = grid.n();
    let total = alpha[0] + alpha[1];
    let phase = I.powu(total);
    let mut out = f.clone();
    for (idx, c) in out.modes_mut().iter_mut().enumerate() {
        let kx = kx_tab[idx % n];
        let ky = ky_tab[idx / n];
        *c *= phase * (kx.powi(alpha[0] as i32) * ky.powi(alpha[1] as i32));
    }
    out
}

/// `d/dx` of a scalar field.
pub fn dx(f: &SpectralField) -> SpectralField {
    derivative(f, [1, 0])
}

/// `d/dy` of a scalar field.
pub fn dy(f: &SpectralField) -> SpectralField {
    derivative(f, [0, 1])
}

pub fn gradient(f: &SpectralField) -> VectorField {
    VectorField { x: dx(f), y: dy(f) }
}

pub fn divergence(u: &VectorField) -> SpectralField {
    let grid = u.grid().clone();
    let mut out = u.x.clone();
    out.set_real(u.x.is_real() && u.y.is_real());
    let (mx, my) = (u.x.modes(), u.y.modes());
    for (idx, c) in out.modes_mut().iter_mut().enumerate() {
        let [kx, ky] = grid.k_odd_at(idx);
        *c = I * (mx[idx] * kx + my[idx] * ky);
    }
    out
}

/// Scalar vorticity `d1 u2 - d2 u1`.
pub fn curl(u: &VectorField) -> SpectralField {
    &dx(&u.y) - &dy(&u.x)
}

pub fn laplacian(f: &SpectralField) -> SpectralField {
    f.apply_symbol(|[kx, ky]| -(kx * kx + ky * ky))
}

/// Solves `Delta g = f` for mean-zero `f`; the mean of `g` is zero.
pub fn inverse_laplacian(f: &SpectralField) -> Result<SpectralField> {
    let mean = f.mean().norm();
    if mean > MEAN_TOLERANCE {
        return Err(Error::NonZeroMean(mean));
    }
    Ok(f.apply_symbol(|[kx, ky]| {
        let k2 = kx * kx + ky * ky;
        if k2 == 0.0 {
            0.0
        } else {
            -1.0 / k2
        }
    }))
}

/// Multiplies mode `k` by `exp(-nu t |k|^2)`.
pub fn heat_propagate(f: &SpectralField, nu: f64, t: f64) -> SpectralField {
    let s = nu * t;
    if s == 0.0 {
        return f.clone();
    }
    f.apply_symbol(|[kx, ky]| (-s * (kx * kx + ky * ky)).exp())
}

pub fn heat_propagate_vector(u: &VectorField, nu: f64, t: f64) -> VectorField {
    u.map(|c| heat_propagate(c, nu, t))
}

/// Gradient part `Q u = -grad (-Delta)^{-1} div u`; zero mean.
pub fn gradient_part(u: &VectorField) -> VectorField {
    let grid = u.grid().clone();
    let mut qx = u.x.clone();
    let mut qy = u.y.clone();
    let (mx, my) = (u.x.modes(), u.y.modes());
    let (ox, oy) = (qx.modes_mut(), qy.modes_mut());
    for idx in 0..grid.len() {
        let [kx, ky] = grid.k_odd_at(idx);
        let k2 = kx * kx + ky * ky;
        if k2 == 0.0 {
            ox[idx] = Complex64::default();
            oy[idx] = Complex64::default();
        } else {
            let p = (mx[idx] * kx + my[idx] * ky) / k2;
            ox[idx] = p * kx;
            oy[idx] = p * ky;
        }
    }
    VectorField { x: qx, y: qy }
}

/// Leray projection `P u = u - Q u`; keeps the mean.
pub fn leray_project(u: &VectorField) -> VectorField {
    u - &gradient_part(u)
}

/// `u . grad v` for scalar `v`, dealiased.
pub fn advect(u: &VectorField, v: &SpectralField) -> Result<SpectralField> {
    let g = gradient(v);
    SpectralField::product_sum(&[(&u.x, &g.x), (&u.y, &g.y)])
}

/// `(u . grad) v` for vector `v`, dealiased.
pub fn advect_vector(u: &VectorField, v: &VectorField) -> Result<VectorField> {
    let px = u.x.padded_physical();
    let py = u.y.padded_physical();
    let comp = |c: &SpectralField| {
        let gx = dx(c).padded_physical();
        let gy = dy(c).padded_physical();
        let buf: Vec<Complex64> = gx
            .iter()
            .zip(&gy)
            .zip(px.iter().zip(&py))
            .map(|((a, b), (x, y))| a * x + b * y)
            .collect();
        SpectralField::from_padded_physical(c.grid(), buf, c.is_real() && u.x.is_real())
    };
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(VectorField {
        x: comp(&v.x),
        y: comp(&v.y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn max_abs_diff(a: &SpectralField, b: &SpectralField) -> f64 {
        a.modes()
            .iter()
            .zip(b.modes())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
    }

    #[test]
    fn derivative_of_sine() {
        let g = Grid::periodic(32).unwrap();
        let f = SpectralField::from_fn(&g, |x, _| x.sin());
        let d = derivative(&f, [1, 0]).to_physical();
        let expect = SpectralField::from_fn(&g, |x, _| x.cos()).to_physical();
        for (a, b) in d.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_of_mode() {
        let g = Grid::periodic(16).unwrap();
        let f = SpectralField::single_mode(&g, 2, 1, Complex64::new(1.0, 0.0)).unwrap();
        let d = derivative(&f, [0, 2]);
        assert!((d.mode(2, 1) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn leray_kills_gradients() {
        let g = Grid::periodic(32).unwrap();
        let phi = SpectralField::from_fn(&g, |x, y| (x + y).sin());
        let p = leray_project(&gradient(&phi));
        assert!(p.max_coefficient() <= 1e-13);
    }

    #[test]
    fn leray_keeps_taylor_green() {
        let g = Grid::periodic(32).unwrap();
        let u = VectorField::from_fn(&g, |x, y| [x.cos() * y.sin(), -x.sin() * y.cos()]);
        let p = leray_project(&u);
        assert!((&p - &u).max_coefficient() <= 1e-15);
    }

    #[test]
    fn leray_keeps_mean() {
        let g = Grid::periodic(8).unwrap();
        let u = VectorField::from_fn(&g, |_, _| [1.0, -2.0]);
        let p = leray_project(&u);
        assert!((p.x.mean().re - 1.0).abs() < 1e-15);
        assert!(gradient_part(&u).max_coefficient() == 0.0);
    }

    #[test]
    fn heat_mode_decay() {
        let g = Grid::periodic(16).unwrap();
        let f = SpectralField::single_mode(&g, 2, 0, Complex64::new(1.0, 0.0)).unwrap();
        let h = heat_propagate(&f, 1.0, 0.5);
        assert!((h.mode(2, 0).re - (-2.0f64).exp()).abs() < 1e-15);
        assert!(max_abs_diff(&heat_propagate(&f, 1.0, 0.0), &f) == 0.0);
    }

    #[test]
    fn inverse_laplacian_of_mode() {
        let g = Grid::periodic(16).unwrap();
        let f = SpectralField::single_mode(&g, 2, 0, Complex64::new(-4.0, 0.0)).unwrap();
        let u = inverse_laplacian(&f).unwrap();
        assert!((u.mode(2, 0).re - 1.0).abs() < 1e-15);
        let one = SpectralField::constant(&g, 1.0);
        assert!(matches!(
            inverse_laplacian(&one),
            Err(Error::NonZeroMean(_))
        ));
    }

    #[test]
    fn divergence_of_leray_is_zero() {
        let g = Grid::periodic(16).unwrap();
        let u = VectorField::from_fn(&g, |x, y| {
            [(x + 2.0 * y).sin() + x.cos(), (3.0 * x).cos() * y.sin()]
        });
        let d = divergence(&leray_project(&u));
        assert!(d.max_coefficient() < 1e-15);
    }
}
