//! Seeded Gaussian random fields.
//!
//! Coefficients are drawn in a fixed lattice order that does not depend on
//! `n`, so the same seed gives the same function on every grid that resolves
//! the band.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dyadic::{INNER, OUTER};
use crate::error::{Error, Result};
use crate::spectral::{leray_project, Grid, SpectralField, VectorField};

/// Radial band `k_min <= |k| <= k_max` in physical wavenumbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub k_min: f64,
    pub k_max: f64,
}

impl Band {
    /// Support of `φ(2^{-j} ·)`.
    pub fn annulus(j: i32) -> Self {
        let lambda = 2f64.powi(j);
        Band {
            k_min: INNER * lambda,
            k_max: 2.0 * OUTER * lambda,
        }
    }

    /// Support of `χ(2^{-j} ·)` without the mean.
    pub fn ball(j: i32) -> Self {
        Band {
            k_min: 0.0,
            k_max: OUTER * 2f64.powi(j),
        }
    }
}

/// Gaussian coefficients with amplitude `|k|^{-slope}` on a band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianEnsemble {
    pub band: Band,
    pub slope: f64,
}

impl GaussianEnsemble {
    pub fn new(k_min: f64, k_max: f64, slope: f64) -> Self {
        GaussianEnsemble {
            band: Band { k_min, k_max },
            slope,
        }
    }

    /// Broadband ensemble resolved on `grid`: `1 <= |k| <= min(12, n/3)` in lattice units.
    pub fn broadband(grid: &Grid, slope: f64) -> Self {
        let top = (grid.n() as f64 / 3.0).min(12.0);
        GaussianEnsemble::new(grid.k_unit(), top * grid.k_unit(), slope)
    }
}

/// Real mean-free Gaussian field; Nyquist modes stay zero.
pub fn gaussian_field(grid: &Grid, ens: &GaussianEnsemble, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = grid.k_unit();
    let reach = (ens.band.k_max / unit).floor() as i64;
    let half = grid.n() as i64 / 2;
    let mut modes = vec![Complex64::new(0.0, 0.0); grid.len()];
    for my in 0..=reach {
        for mx in -reach..=reach {
            if my == 0 && mx <= 0 {
                continue;
            }
            let k = unit * ((mx * mx + my * my) as f64).sqrt();
            if k < ens.band.k_min || k > ens.band.k_max || k == 0.0 {
                continue;
            }
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            if mx.abs() >= half || my >= half {
                continue;
            }
            let c = Complex64::new(re, im) * k.powf(-ens.slope);
            let (i, ic) = (index(grid, mx, my), index(grid, -mx, -my));
            modes[i] = c;
            modes[ic] = c.conj();
        }
    }
    SpectralField::from_modes(grid, modes, true).expect("length matches grid")
}

fn index(grid: &Grid, mx: i64, my: i64) -> usize {
    let n = grid.n();
    let ix = grid.index_of(mx).expect("mode inside lattice");
    let iy = grid.index_of(my).expect("mode inside lattice");
    iy * n + ix
}

/// Two independent components.
pub fn gaussian_vector(grid: &Grid, ens: &GaussianEnsemble, seed: u64) -> VectorField {
    VectorField {
        x: gaussian_field(grid, ens, seed),
        y: gaussian_field(grid, ens, seed ^ 0x9e37_79b9_7f4a_7c15),
    }
}

pub fn solenoidal_field(grid: &Grid, ens: &GaussianEnsemble, seed: u64) -> VectorField {
    leray_project(&gaussian_vector(grid, ens, seed))
}

/// Random field with spectrum in the annulus of block `j`.
pub fn annulus_field(grid: &Grid, j: i32, seed: u64) -> SpectralField {
    gaussian_field(
        grid,
        &GaussianEnsemble {
            band: Band::annulus(j),
            slope: 0.0,
        },
        seed,
    )
}

/// Random field with spectrum in the ball of radius `(4/3) 2^j`.
pub fn ball_field(grid: &Grid, j: i32, seed: u64) -> SpectralField {
    gaussian_field(
        grid,
        &GaussianEnsemble {
            band: Band::ball(j),
            slope: 0.0,
        },
        seed,
    )
}

/// Rescales `f` so that its largest nodal magnitude is `amplitude`.
pub fn with_max(f: &SpectralField, amplitude: f64) -> Result<SpectralField> {
    let (lo, hi) = f.min_max();
    let m = lo.abs().max(hi.abs());
    if m == 0.0 {
        return Err(Error::Invalid("cannot rescale the zero field".into()));
    }
    Ok(f.scale(amplitude / m))
}

/// Per-trial seed derived from a base seed.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add((trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}
