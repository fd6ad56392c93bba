use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on the square `[0, L)^2` with `n` points per side.
///
/// Spectral coefficients are stored row-major with index `iy * n + ix`;
/// the integer wavenumber of index `i` is `i` for `i < n/2` and `i - n`
/// otherwise, so the lattice per axis is `-n/2 ..= n/2 - 1`.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    n: usize,
    length: f64,
    /// Physical wavenumber `2*pi*m/L` per index.
    k: Vec<f64>,
    /// Same as `k` with the Nyquist index zeroed (odd-order derivatives).
    k_odd: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n())
            .field("length", &self.length())
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.n() == other.n() && self.length() == other.length())
    }
}

/// Builds a grid, rejecting sizes that are not powers of two or below 8.
pub fn make_grid(n: usize, length: f64) -> Result<Grid> {
    Grid::new(n, length)
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::GridSize(n));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::BoxLength(length));
        }
        let scale = 2.0 * std::f64::consts::PI / length;
        let k: Vec<f64> = (0..n)
            .map(|i| integer_wavenumber(i, n) as f64 * scale)
            .collect();
        let mut k_odd = k.clone();
        k_odd[n / 2] = 0.0;
        let mut planner = FftPlanner::new();
        let inner = GridInner {
            n,
            length,
            k,
            k_odd,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd2: planner.plan_fft_forward(2 * n),
            inv2: planner.plan_fft_inverse(2 * n),
        };
        Ok(Grid {
            inner: Arc::new(inner),
        })
    }

    /// Standard `[0, 2*pi)^2` box.
    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * std::f64::consts::PI)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    #[inline]
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.inner.length
    }

    /// Grid spacing `L/n`.
    pub fn spacing(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    /// Quadrature weight of one grid cell, `(L/n)^2`.
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Fundamental wavenumber `2*pi/L`.
    pub fn k_unit(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.inner.length
    }

    /// Per-axis physical wavenumbers.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.k
    }

    pub fn wavenumbers_odd(&self) -> &[f64] {
        &self.inner.k_odd
    }

    /// Integer wavenumber of per-axis index `i`.
    pub fn integer_k(&self, i: usize) -> i64 {
        integer_wavenumber(i, self.inner.n)
    }

    /// Index of integer wavenumber `m`, if it lies on the lattice.
    pub fn index_of(&self, m: i64) -> Option<usize> {
        let n = self.inner.n as i64;
        if m < -n / 2 || m >= n / 2 {
            return None;
        }
        Some(m.rem_euclid(n) as usize)
    }

    /// Physical wavevector of flat index `idx`.
    #[inline]
    pub fn k_at(&self, idx: usize) -> [f64; 2] {
        let n = self.inner.n;
        [self.inner.k[idx % n], self.inner.k[idx / n]]
    }

    #[inline]
    pub fn k_odd_at(&self, idx: usize) -> [f64; 2] {
        let n = self.inner.n;
        [self.inner.k_odd[idx % n], self.inner.k_odd[idx / n]]
    }

    #[inline]
    pub fn k_norm_at(&self, idx: usize) -> f64 {
        let [kx, ky] = self.k_at(idx);
        kx.hypot(ky)
    }

    /// True for modes on the Nyquist row or column.
    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let n = self.inner.n;
        idx % n == n / 2 || idx / n == n / 2
    }

    /// Largest `|k|` over the lattice (the corner mode).
    pub fn max_k(&self) -> f64 {
        let half = (self.inner.n / 2) as f64 * self.k_unit();
        half * std::f64::consts::SQRT_2
    }

    /// Largest per-axis `|k|`.
    pub fn max_axis_k(&self) -> f64 {
        (self.inner.n / 2) as f64 * self.k_unit()
    }

    /// Coordinates of grid node `(ix, iy)`.
    pub fn node(&self, ix: usize, iy: usize) -> [f64; 2] {
        let h = self.spacing();
        [ix as f64 * h, iy as f64 * h]
    }

    /// In-place unnormalized forward 2-D transform of an `n x n` buffer.
    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        fft2(buf, self.inner.n, self.inner.fwd.as_ref());
    }

    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        fft2(buf, self.inner.n, self.inner.inv.as_ref());
    }

    pub(crate) fn forward_padded(&self, buf: &mut [Complex64]) {
        fft2(buf, 2 * self.inner.n, self.inner.fwd2.as_ref());
    }

    pub(crate) fn inverse_padded(&self, buf: &mut [Complex64]) {
        fft2(buf, 2 * self.inner.n, self.inner.inv2.as_ref());
    }
}

fn integer_wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn fft2(buf: &mut [Complex64], n: usize, fft: &dyn Fft<f64>) {
    debug_assert_eq!(buf.len(), n * n);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    transpose_in_place(buf, n);
    fft.process_with_scratch(buf, &mut scratch);
    transpose_in_place(buf, n);
}

fn transpose_in_place(buf: &mut [Complex64], n: usize) {
    const BLOCK: usize = 16;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + BLOCK).min(n) {
                    buf.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_for_eight_points() {
        let g = make_grid(8, 2.0 * std::f64::consts::PI).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.integer_k(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        let mut sorted = g.wavenumbers().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (m, k) in (-4..=3).zip(sorted) {
            assert!((k - m as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn max_axis_wavenumber() {
        let g = make_grid(256, 2.0 * std::f64::consts::PI).unwrap();
        let kmax = g.wavenumbers().iter().fold(0.0f64, |m, k| m.max(k.abs()));
        assert_eq!(kmax, 128.0);
        assert_eq!(g.max_axis_k(), 128.0);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(make_grid(12, 1.0), Err(Error::GridSize(12))));
        assert!(matches!(make_grid(4, 1.0), Err(Error::GridSize(4))));
        assert!(matches!(make_grid(16, 0.0), Err(Error::BoxLength(_))));
        assert!(matches!(make_grid(16, -2.0), Err(Error::BoxLength(_))));
    }

    #[test]
    fn transpose_round_trip() {
        let n = 40;
        let orig: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let mut b = orig.clone();
        transpose_in_place(&mut b, n);
        assert_eq!(b[1], orig[n]);
        transpose_in_place(&mut b, n);
        assert_eq!(b, orig);
    }
}
