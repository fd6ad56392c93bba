//! Radial cutoffs and Littlewood–Paley blocks on a periodic grid.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField, VectorField};

/// Inner radius of the transition region of `chi`.
pub const INNER: f64 = 3.0 / 4.0;
/// Outer radius of the support of `chi`.
pub const OUTER: f64 = 4.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutoffKind {
    DefaultSmooth,
}

impl FromStr for CutoffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default-smooth" | "default" => Ok(CutoffKind::DefaultSmooth),
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }
}

/// The pair `(chi, phi)` with `phi(r) = chi(r/2) - chi(r)`.
///
/// `chi` equals 1 on `[0, 3/4]`, vanishes beyond `4/3` and decreases smoothly
/// in between through the `exp(-1/x)` gluing function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutoffPair {
    kind: CutoffKind,
}

pub fn build_cutoffs(kind: &str) -> Result<CutoffPair> {
    Ok(CutoffPair {
        kind: kind.parse()?,
    })
}

impl Default for CutoffPair {
    fn default() -> Self {
        CutoffPair {
            kind: CutoffKind::DefaultSmooth,
        }
    }
}

fn glue(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

impl CutoffPair {
    pub fn kind(&self) -> CutoffKind {
        self.kind
    }

    pub fn chi(&self, r: f64) -> f64 {
        match self.kind {
            CutoffKind::DefaultSmooth => {
                if r <= INNER {
                    1.0
                } else if r >= OUTER {
                    0.0
                } else {
                    let t = (r - INNER) / (OUTER - INNER);
                    let a = glue(1.0 - t);
                    a / (a + glue(t))
                }
            }
        }
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.chi(0.5 * r) - self.chi(r)
    }
}

/// Dyadic blocks `Δ̇_j`, `j_min <= j <= j_max`, tabulated on a grid.
#[derive(Clone, Debug)]
pub struct DyadicLadder {
    grid: Grid,
    cutoffs: CutoffPair,
    j_min: i32,
    j_max: i32,
    radius: Vec<f64>,
    masks: Vec<Vec<f64>>,
}

/// Tabulates the ladder supported by `grid`.
///
/// `j_max` is the largest `j` with `2^j * 3/4` below the corner wavenumber;
/// `j_min` the smallest `j` whose annulus reaches the fundamental wavenumber.
pub fn build_ladder(grid: &Grid, cutoffs: CutoffPair) -> Result<DyadicLadder> {
    let kmax = grid.max_k();
    let kmin = grid.k_unit();
    let mut j_max = (kmax / INNER).log2().floor() as i32;
    while 2f64.powi(j_max + 1) * INNER <= kmax {
        j_max += 1;
    }
    while 2f64.powi(j_max) * INNER > kmax {
        j_max -= 1;
    }
    let upper = 2.0 * OUTER;
    let mut j_min = (kmin / upper).log2().ceil() as i32;
    while 2f64.powi(j_min - 1) * upper >= kmin {
        j_min -= 1;
    }
    while 2f64.powi(j_min) * upper < kmin {
        j_min += 1;
    }
    let count = j_max - j_min + 1;
    if count < 3 {
        return Err(Error::LadderTooShort(count.max(0)));
    }
    let radius: Vec<f64> = (0..grid.len()).map(|i| grid.k_norm_at(i)).collect();
    let masks = (j_min..=j_max)
        .map(|j| {
            let s = 2f64.powi(-j);
            radius.iter().map(|&r| cutoffs.phi(s * r)).collect()
        })
        .collect();
    Ok(DyadicLadder {
        grid: grid.clone(),
        cutoffs,
        j_min,
        j_max,
        radius,
        masks,
    })
}

impl DyadicLadder {
    pub fn new(grid: &Grid) -> Result<Self> {
        build_ladder(grid, CutoffPair::default())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cutoffs(&self) -> &CutoffPair {
        &self.cutoffs
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    pub fn contains(&self, j: i32) -> bool {
        (self.j_min..=self.j_max).contains(&j)
    }

    fn check(&self, j: i32) -> Result<()> {
        if self.contains(j) {
            Ok(())
        } else {
            Err(Error::BlockIndex {
                j,
                min: self.j_min,
                max: self.j_max,
            })
        }
    }

    fn check_grid(&self, u: &SpectralField) -> Result<()> {
        if u.grid() != &self.grid {
            Err(Error::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// Multiplier table of `Δ̇_j`.
    pub fn mask(&self, j: i32) -> Result<&[f64]> {
        self.check(j)?;
        Ok(&self.masks[(j - self.j_min) as usize])
    }

    /// Multiplier table of `Ṡ_j = chi(2^{-j} D)` for any `j`.
    pub fn low_mask(&self, j: i32) -> Vec<f64> {
        let s = 2f64.powi(-j);
        self.radius
            .iter()
            .map(|&r| self.cutoffs.chi(s * r))
            .collect()
    }

    /// `Δ̇_j u`.
    pub fn block(&self, u: &SpectralField, j: i32) -> Result<SpectralField> {
        self.check_grid(u)?;
        Ok(u.apply_mask(self.mask(j)?))
    }

    pub fn block_vector(&self, u: &VectorField, j: i32) -> Result<VectorField> {
        Ok(VectorField {
            x: self.block(&u.x, j)?,
            y: self.block(&u.y, j)?,
        })
    }

    /// `Ṡ_j u`.
    pub fn low_pass(&self, u: &SpectralField, j: i32) -> Result<SpectralField> {
        self.check_grid(u)?;
        Ok(u.apply_mask(&self.low_mask(j)))
    }

    pub fn low_pass_vector(&self, u: &VectorField, j: i32) -> Result<VectorField> {
        Ok(VectorField {
            x: self.low_pass(&u.x, j)?,
            y: self.low_pass(&u.y, j)?,
        })
    }

    /// The part of `u` below every annulus, `Ṡ_{j_min} u`.
    pub fn low_block(&self, u: &SpectralField) -> Result<SpectralField> {
        self.low_pass(u, self.j_min)
    }

    /// Inhomogeneous block: `Δ_{-1} = S_0`, `Δ_j = Δ̇_j` for `j >= 0`.
    pub fn inhomogeneous_block(&self, u: &SpectralField, j: i32) -> Result<SpectralField> {
        if j == -1 {
            return self.low_pass(u, 0);
        }
        if j < -1 || j > self.j_max {
            return Err(Error::BlockIndex {
                j,
                min: -1,
                max: self.j_max,
            });
        }
        self.block(u, j)
    }

    /// All blocks `(j, Δ̇_j u)` over the ladder.
    pub fn blocks(&self, u: &SpectralField) -> Result<Vec<(i32, SpectralField)>> {
        self.check_grid(u)?;
        Ok(self
            .indices()
            .map(|j| (j, u.apply_mask(&self.masks[(j - self.j_min) as usize])))
            .collect())
    }

    /// Inhomogeneous index range `-1..=j_max`.
    pub fn inhomogeneous_indices(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.j_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn cutoff_values() {
        let c = build_cutoffs("default-smooth").unwrap();
        assert!((c.phi(1.4) - 1.0).abs() < 1e-12);
        assert_eq!(c.phi(0.7), 0.0);
        assert!((c.chi(1.0) + c.phi(1.0) - 1.0).abs() < 1e-15);
        assert!(matches!(
            build_cutoffs("gauss"),
            Err(Error::UnknownProfile(_))
        ));
    }

    #[test]
    fn partition_of_unity_on_radii() {
        let c = CutoffPair::default();
        for i in 0..10_000 {
            let r = 1e-3 + i as f64 * 0.05;
            let mut inhom = c.chi(r);
            let mut j = 0;
            while 2f64.powi(j) * INNER < r * 2.0 {
                inhom += c.phi(r / 2f64.powi(j));
                j += 1;
            }
            assert!((inhom - 1.0).abs() < 1e-12, "r = {r}");
            let hom: f64 = (-20..=20).map(|j| c.phi(r * 2f64.powi(-j))).sum();
            assert!((hom - 1.0).abs() < 1e-12, "r = {r}");
        }
    }

    #[test]
    fn ladder_ranges() {
        let g = Grid::periodic(256).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        assert_eq!((l.j_min(), l.j_max()), (-1, 7));
        let g8 = Grid::periodic(8).unwrap();
        let l8 = DyadicLadder::new(&g8).unwrap();
        assert!(l8.j_max() - l8.j_min() + 1 >= 3);
    }

    #[test]
    fn single_mode_blocks() {
        let g = Grid::periodic(64).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        // |k| = sqrt(34), |k| / 4 lies where phi is identically one
        let u = SpectralField::single_mode(&g, 3, 5, Complex64::new(1.0, 0.0)).unwrap();
        let b2 = l.block(&u, 2).unwrap();
        assert_eq!((&b2 - &u).max_coefficient(), 0.0);
        for j in l.indices().filter(|j| (j - 2).abs() >= 1) {
            assert_eq!(l.block(&u, j).unwrap().max_coefficient(), 0.0);
        }
        assert!(matches!(l.block(&u, 40), Err(Error::BlockIndex { .. })));
    }

    #[test]
    fn constants_live_in_low_block() {
        let g = Grid::periodic(32).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let c = SpectralField::constant(&g, 3.0);
        for (_, b) in l.blocks(&c).unwrap() {
            assert_eq!(b.max_coefficient(), 0.0);
        }
        let low = l.inhomogeneous_block(&c, -1).unwrap();
        assert!((low.mean().re - 3.0).abs() < 1e-15);
    }
}
