//! Periodic bicubic (4-point Lagrange) interpolation of grid values.

use crate::error::Result;
use crate::spectral::{Grid, SpectralField};

/// Grid values on `[0, L)^2` ready for off-node evaluation.
#[derive(Clone, Debug)]
pub struct PeriodicSampler {
    n: usize,
    length: f64,
    inv_h: f64,
    values: Vec<f64>,
}

#[inline]
fn weights(t: f64) -> [f64; 4] {
    let (tm, tp, t2) = (t - 1.0, t + 1.0, t - 2.0);
    [
        -t * tm * t2 / 6.0,
        tp * tm * t2 / 2.0,
        -tp * t * t2 / 2.0,
        tp * t * tm / 6.0,
    ]
}

impl PeriodicSampler {
    pub fn new(n: usize, length: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * n);
        PeriodicSampler {
            n,
            length,
            inv_h: n as f64 / length,
            values,
        }
    }

    /// Samples the field at the nodes of its own grid.
    pub fn from_field(f: &SpectralField) -> Self {
        let g = f.grid();
        Self::new(g.n(), g.length(), f.to_physical())
    }

    /// Samples the trigonometric interpolant on a grid refined by `factor`.
    pub fn upsampled(f: &SpectralField, factor: usize) -> Result<Self> {
        if factor <= 1 {
            return Ok(Self::from_field(f));
        }
        let g = f.grid();
        let fine = Grid::new(g.n() * factor, g.length())?;
        Ok(Self::from_field(&f.resample(&fine)?))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x * self.inv_h).rem_euclid(self.n as f64);
        let i = s.floor();
        let t = s - i;
        ((i as usize) % self.n, t)
    }

    #[inline]
    fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.n + ix]
    }

    /// Bicubic value at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let n = self.n;
        let (ix, tx) = self.locate(x);
        let (iy, ty) = self.locate(y);
        let wx = weights(tx);
        let wy = weights(ty);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let jy = (iy + n + b - 1) % n;
            let row = &self.values[jy * n..(jy + 1) * n];
            let mut r = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                r += wxa * row[(ix + n + a - 1) % n];
            }
            acc += wyb * r;
        }
        acc
    }

    /// Bicubic value clipped to the range of the four surrounding nodes.
    pub fn eval_monotone(&self, x: f64, y: f64) -> f64 {
        let n = self.n;
        let (ix, _) = self.locate(x);
        let (iy, _) = self.locate(y);
        let (ix1, iy1) = ((ix + 1) % n, (iy + 1) % n);
        let c = [
            self.at(ix, iy),
            self.at(ix1, iy),
            self.at(ix, iy1),
            self.at(ix1, iy1),
        ];
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.eval(x, y).clamp(lo, hi)
    }
}
