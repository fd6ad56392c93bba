use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Scalar field stored by its Fourier coefficients on a [`Grid`].
///
/// Coefficients are normalized so that `f(x) = sum_k c_k exp(i k.x)`.
/// `real` records that the physical values are real, i.e. the coefficients
/// are Hermitian-symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    modes: Vec<Complex64>,
    real: bool,
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        SpectralField {
            grid: grid.clone(),
            modes: vec![Complex64::default(); grid.len()],
            real: true,
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.modes[0] = Complex64::new(value, 0.0);
        f
    }

    pub fn from_modes(grid: &Grid, modes: Vec<Complex64>, real: bool) -> Result<Self> {
        if modes.len() != grid.len() {
            return Err(Error::Invalid(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                modes.len()
            )));
        }
        Ok(SpectralField {
            grid: grid.clone(),
            modes,
            real,
        })
    }

    pub fn from_physical(grid: &Grid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Invalid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.forward(&mut buf);
        let norm = 1.0 / grid.len() as f64;
        buf.iter_mut().for_each(|c| *c *= norm);
        Ok(SpectralField {
            grid: grid.clone(),
            modes: buf,
            real: true,
        })
    }

    pub fn from_physical_complex(grid: &Grid, values: &[Complex64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Invalid("sample count does not match grid".into()));
        }
        let mut buf = values.to_vec();
        grid.forward(&mut buf);
        let norm = 1.0 / grid.len() as f64;
        buf.iter_mut().for_each(|c| *c *= norm);
        Ok(SpectralField {
            grid: grid.clone(),
            modes: buf,
            real: false,
        })
    }

    /// Samples a real function at the grid nodes.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..n {
            for ix in 0..n {
                let [x, y] = grid.node(ix, iy);
                values.push(f(x, y));
            }
        }
        Self::from_physical(grid, &values).expect("sizes agree")
    }

    /// Single Fourier mode `amplitude * exp(i (mx x + my y) 2 pi / L)`.
    pub fn single_mode(grid: &Grid, mx: i64, my: i64, amplitude: Complex64) -> Result<Self> {
        let (ix, iy) = match (grid.index_of(mx), grid.index_of(my)) {
            (Some(ix), Some(iy)) => (ix, iy),
            _ => {
                return Err(Error::Invalid(format!(
                    "mode ({mx}, {my}) is not on the lattice"
                )))
            }
        };
        let mut f = Self::zeros(grid);
        f.modes[iy * grid.n() + ix] = amplitude;
        f.real = mx == 0 && my == 0 && amplitude.im == 0.0;
        Ok(f)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    #[inline]
    pub fn modes_mut(&mut self) -> &mut [Complex64] {
        &mut self.modes
    }

    pub fn into_modes(self) -> Vec<Complex64> {
        self.modes
    }

    #[inline]
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn set_real(&mut self, real: bool) {
        self.real = real;
    }

    /// Coefficient of integer mode `(mx, my)`; zero off-lattice.
    pub fn mode(&self, mx: i64, my: i64) -> Complex64 {
        match (self.grid.index_of(mx), self.grid.index_of(my)) {
            (Some(ix), Some(iy)) => self.modes[iy * self.grid.n() + ix],
            _ => Complex64::default(),
        }
    }

    pub fn mean(&self) -> Complex64 {
        self.modes[0]
    }

    /// Copy with the mean mode removed.
    pub fn without_mean(&self) -> Self {
        let mut f = self.clone();
        f.modes[0] = Complex64::default();
        f
    }

    pub fn to_physical_complex(&self) -> Vec<Complex64> {
        let mut buf = self.modes.clone();
        self.grid.inverse(&mut buf);
        buf
    }

    /// Physical values (real part).
    pub fn to_physical(&self) -> Vec<f64> {
        self.to_physical_complex()
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    /// Largest deviation from Hermitian symmetry relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n();
        let scale = self.modes.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for iy in 0..n {
            for ix in 0..n {
                let jx = (n - ix) % n;
                let jy = (n - iy) % n;
                let d = (self.modes[iy * n + ix] - self.modes[jy * n + jx].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }

    /// Spectral l2 norm `sqrt(sum |c_k|^2)`.
    pub fn coefficient_norm(&self) -> f64 {
        self.modes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_coefficient(&self) -> f64 {
        self.modes.iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }

    /// `integral f * conj(g)` over the box, computed from coefficients.
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_same_grid(&self.grid, &other.grid);
        let area = self.grid.length() * self.grid.length();
        self.modes
            .iter()
            .zip(&other.modes)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * area
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut f = self.clone();
        f.modes.iter_mut().for_each(|c| *c *= s);
        f
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        let mut f = self.clone();
        f.modes.iter_mut().for_each(|c| *c *= s);
        f.real = self.real && s.im == 0.0;
        f
    }

    /// `self + s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert_same_grid(&self.grid, &other.grid);
        for (a, b) in self.modes.iter_mut().zip(&other.modes) {
            *a += b * s;
        }
        self.real &= other.real;
    }

    /// Multiplies every coefficient by a real radial-or-not symbol of the wavevector.
    pub fn apply_symbol(&self, symbol: impl Fn([f64; 2]) -> f64) -> Self {
        let mut f = self.clone();
        for (idx, c) in f.modes.iter_mut().enumerate() {
            *c *= symbol(self.grid.k_at(idx));
        }
        f
    }

    /// Multiplies by a tabulated real mask (one entry per mode).
    pub fn apply_mask(&self, mask: &[f64]) -> Self {
        debug_assert_eq!(mask.len(), self.modes.len());
        let mut f = self.clone();
        for (c, m) in f.modes.iter_mut().zip(mask) {
            *c *= *m;
        }
        f
    }

    /// Zeroes the Nyquist row and column.
    pub fn without_nyquist(&self) -> Self {
        let mut f = self.clone();
        for (idx, c) in f.modes.iter_mut().enumerate() {
            if self.grid.is_nyquist(idx) {
                *c = Complex64::default();
            }
        }
        f
    }

    /// Physical values on the 2x refined grid of the trigonometric interpolant.
    ///
    /// The Nyquist coefficient is split evenly between `-n/2` and `+n/2` so real
    /// fields stay real on the fine grid.
    pub fn padded_physical(&self) -> Vec<Complex64> {
        let n = self.grid.n();
        let m = 2 * n;
        let mut buf = vec![Complex64::default(); m * m];
        let targets = |i: usize| -> [(usize, f64); 2] {
            let k = self.grid.integer_k(i);
            if i == n / 2 {
                // k = -n/2 on the coarse lattice; split between -n/2 and +n/2.
                [((m as i64 + k) as usize, 0.5), ((-k) as usize, 0.5)]
            } else {
                (k.rem_euclid(m as i64) as usize, 1.0).into_pair()
            }
        };
        for iy in 0..n {
            let ty = targets(iy);
            for ix in 0..n {
                let c = self.modes[iy * n + ix];
                if c == Complex64::default() {
                    continue;
                }
                let tx = targets(ix);
                for &(jy, wy) in &ty {
                    if wy == 0.0 {
                        continue;
                    }
                    for &(jx, wx) in &tx {
                        if wx == 0.0 {
                            continue;
                        }
                        buf[jy * m + jx] += c * (wx * wy);
                    }
                }
            }
        }
        self.grid.inverse_padded(&mut buf);
        buf
    }

    /// Inverse of [`padded_physical`] followed by truncation to the coarse
    /// lattice; Nyquist modes of the result are zeroed.
    pub fn from_padded_physical(grid: &Grid, mut buf: Vec<Complex64>, real: bool) -> Self {
        let n = grid.n();
        let m = 2 * n;
        debug_assert_eq!(buf.len(), m * m);
        grid.forward_padded(&mut buf);
        let norm = 1.0 / (m * m) as f64;
        let mut modes = vec![Complex64::default(); n * n];
        for iy in 0..n {
            if iy == n / 2 {
                continue;
            }
            let jy = grid.integer_k(iy).rem_euclid(m as i64) as usize;
            for ix in 0..n {
                if ix == n / 2 {
                    continue;
                }
                let jx = grid.integer_k(ix).rem_euclid(m as i64) as usize;
                modes[iy * n + ix] = buf[jy * m + jx] * norm;
            }
        }
        SpectralField {
            grid: grid.clone(),
            modes,
            real,
        }
    }

    /// Dealiased product with a factor given by its values on the padded grid.
    pub fn times_padded(&self, weights: &[Complex64], real: bool) -> Self {
        let mut b = self.padded_physical();
        b.iter_mut().zip(weights).for_each(|(x, w)| *x *= w);
        Self::from_padded_physical(&self.grid, b, self.real && real)
    }

    /// Dealiased product: pointwise multiplication on the 2x padded grid.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let mut a = self.padded_physical();
        let b = other.padded_physical();
        a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
        Ok(Self::from_padded_physical(
            &self.grid,
            a,
            self.real && other.real,
        ))
    }

    /// `sum_i lhs_i * rhs_i` with a single forward transform.
    pub fn product_sum(pairs: &[(&Self, &Self)]) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::Invalid("empty product sum".into()))?;
        let grid = first.0.grid.clone();
        let m = 2 * grid.n();
        let mut acc = vec![Complex64::default(); m * m];
        let mut real = true;
        for (u, v) in pairs {
            if u.grid != grid || v.grid != grid {
                return Err(Error::GridMismatch);
            }
            real &= u.real && v.real;
            let a = u.padded_physical();
            let b = v.padded_physical();
            for ((s, x), y) in acc.iter_mut().zip(&a).zip(&b) {
                *s += x * y;
            }
        }
        Ok(Self::from_padded_physical(&grid, acc, real))
    }

    /// Applies a pointwise function to the physical values (no dealiasing;
    /// intended for smooth coefficient maps such as viscosity laws).
    pub fn map_physical(&self, f: impl Fn(f64) -> f64) -> Self {
        let vals: Vec<f64> = self.to_physical().into_iter().map(f).collect();
        Self::from_physical(&self.grid, &vals).expect("sizes agree")
    }

    /// Trigonometric interpolant re-expressed on another grid with the same box.
    ///
    /// Refining splits the Nyquist coefficients evenly so real fields stay
    /// real; coarsening drops the modes that do not fit.
    pub fn resample(&self, target: &Grid) -> Result<Self> {
        if target.length() != self.grid.length() {
            return Err(Error::GridMismatch);
        }
        let (n, m) = (self.grid.n(), target.n());
        let mut modes = vec![Complex64::default(); m * m];
        let place = |i: usize| -> Vec<(usize, f64)> {
            let k = self.grid.integer_k(i);
            if m > n && i == n / 2 {
                vec![(target.index_of(k).unwrap(), 0.5), (target.index_of(-k).unwrap(), 0.5)]
            } else {
                match target.index_of(k) {
                    Some(j) if !(m < n && j == m / 2) => vec![(j, 1.0)],
                    _ => vec![],
                }
            }
        };
        let targets: Vec<Vec<(usize, f64)>> = (0..n).map(place).collect();
        for iy in 0..n {
            for ix in 0..n {
                let c = self.modes[iy * n + ix];
                if c == Complex64::default() {
                    continue;
                }
                for &(jy, wy) in &targets[iy] {
                    for &(jx, wx) in &targets[ix] {
                        modes[jy * m + jx] += c * (wx * wy);
                    }
                }
            }
        }
        Ok(SpectralField {
            grid: target.clone(),
            modes,
            real: self.real,
        })
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.to_physical()
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }
}

trait IntoPair {
    fn into_pair(self) -> [(usize, f64); 2];
}

impl IntoPair for (usize, f64) {
    fn into_pair(self) -> [(usize, f64); 2] {
        [self, (0, 0.0)]
    }
}

pub(crate) fn assert_same_grid(a: &Grid, b: &Grid) {
    assert!(a == b, "fields live on different grids");
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        self.axpy(-1.0, rhs);
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, s: f64) -> SpectralField {
        self.scale(s)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

/// Two-component field on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub x: SpectralField,
    pub y: SpectralField,
}

impl VectorField {
    pub fn new(x: SpectralField, y: SpectralField) -> Result<Self> {
        if x.grid() != y.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { x, y })
    }

    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            x: SpectralField::zeros(grid),
            y: SpectralField::zeros(grid),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        VectorField {
            x: SpectralField::from_fn(grid, |x, y| f(x, y)[0]),
            y: SpectralField::from_fn(grid, |x, y| f(x, y)[1]),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.x.grid()
    }

    pub fn components(&self) -> [&SpectralField; 2] {
        [&self.x, &self.y]
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        VectorField {
            x: f(&self.x),
            y: f(&self.y),
        }
    }

    pub fn try_map(&self, f: impl Fn(&SpectralField) -> Result<SpectralField>) -> Result<Self> {
        Ok(VectorField {
            x: f(&self.x)?,
            y: f(&self.y)?,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|c| c.scale(s))
    }

    pub fn axpy(&mut self, s: f64, other: &Self) {
        self.x.axpy(s, &other.x);
        self.y.axpy(s, &other.y);
    }

    pub fn coefficient_norm(&self) -> f64 {
        self.x.coefficient_norm().hypot(self.y.coefficient_norm())
    }

    pub fn max_coefficient(&self) -> f64 {
        self.x.max_coefficient().max(self.y.max_coefficient())
    }

    /// `integral u . conj(v)`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.x.inner(&other.x) + self.y.inner(&other.y)
    }

    /// Dealiased product with a scalar coefficient, `a * u`.
    pub fn times(&self, a: &SpectralField) -> Result<Self> {
        if a.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let pa = a.padded_physical();
        let mul = |c: &SpectralField| {
            let mut b = c.padded_physical();
            b.iter_mut().zip(&pa).for_each(|(x, y)| *x *= y);
            SpectralField::from_padded_physical(c.grid(), b, c.is_real() && a.is_real())
        };
        Ok(VectorField {
            x: mul(&self.x),
            y: mul(&self.y),
        })
    }

    /// Pointwise Euclidean magnitude at the grid nodes.
    pub fn magnitude_physical(&self) -> Vec<f64> {
        let px = self.x.to_physical_complex();
        let py = self.y.to_physical_complex();
        px.iter()
            .zip(&py)
            .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt())
            .collect()
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        VectorField {
            x: &self.x + &rhs.x,
            y: &self.y + &rhs.y,
        }
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        VectorField {
            x: &self.x - &rhs.x,
            y: &self.y - &rhs.y,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn round_trip_physical() {
        let g = Grid::periodic(32).unwrap();
        let f = SpectralField::from_fn(&g, |x, y| (x + 2.0 * y).sin() + 0.3 * (3.0 * x).cos());
        let vals = f.to_physical();
        let back = SpectralField::from_physical(&g, &vals).unwrap();
        let d = (&back - &f).coefficient_norm();
        assert!(d < 1e-14, "{d}");
        assert!(f.hermitian_defect() < 1e-13);
    }

    #[test]
    fn single_mode_coefficient() {
        let g = Grid::periodic(16).unwrap();
        let f = SpectralField::from_fn(&g, |x, _| x.cos());
        assert!((f.mode(1, 0).re - 0.5).abs() < 1e-14);
        assert!((f.mode(-1, 0).re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn product_of_modes_is_exact() {
        let g = Grid::periodic(16).unwrap();
        let a = SpectralField::from_fn(&g, |x, y| (5.0 * x + 3.0 * y).cos());
        let b = SpectralField::from_fn(&g, |x, y| (6.0 * x - 4.0 * y).sin());
        // 5+6 = 11 would alias on a 16 grid without padding; padded product truncates it
        let p = a.product(&b).unwrap();
        assert!(p.mode(11, -1).norm() == 0.0);
        // difference mode (1, -7): sin(A - B) part: cos a sin b = (sin(a+b) - sin(a-b))/2
        let expected = SpectralField::from_fn(&g, |x, y| -0.5 * (-(x) + 7.0 * y).sin());
        let d = (&p - &expected).coefficient_norm();
        assert!(d < 1e-14, "{d}");
    }

    #[test]
    fn padded_round_trip_drops_only_nyquist() {
        let g = Grid::periodic(8).unwrap();
        let f = SpectralField::from_fn(&g, |x, y| (x + y).sin() + (4.0 * x).cos());
        let back = SpectralField::from_padded_physical(&g, f.padded_physical(), true);
        let expected = f.without_nyquist();
        assert!((&back - &expected).coefficient_norm() < 1e-14);
        assert!(f.mode(-4, 0).norm() > 0.5);
    }

    #[test]
    fn inner_product_matches_quadrature() {
        let g = Grid::new(16, 3.0).unwrap();
        let f = SpectralField::from_fn(&g, |x, _| (2.0 * PI * x / 3.0).sin());
        let l2 = f.inner(&f).re;
        assert!((l2 - 4.5).abs() < 1e-12, "{l2}");
    }
}
