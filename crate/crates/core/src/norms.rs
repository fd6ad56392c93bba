//! Quadrature `L^p` norms, Besov norms and Chemin–Lerner time-space norms.

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicLadder;
use crate::error::{Error, Result};
use crate::spectral::{SpectralField, VectorField};

/// Mean tolerance (relative to the largest coefficient) for homogeneous norms.
pub const HOMOGENEOUS_MEAN_TOLERANCE: f64 = 1e-10;

fn check_exponent(name: &str, p: f64) -> Result<()> {
    if p >= 1.0 && !p.is_nan() {
        Ok(())
    } else {
        Err(Error::Exponent(format!("{name} = {p} is not in [1, inf]")))
    }
}

/// Quadrature `L^p` norm of grid values, `(sum |f_i|^p h^2)^{1/p}`; max for `p = inf`.
pub fn lp_of_values(values: impl IntoIterator<Item = f64>, p: f64, cell_area: f64) -> f64 {
    if p.is_infinite() {
        return values.into_iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    if p == 1.0 {
        return values.into_iter().map(f64::abs).sum::<f64>() * cell_area;
    }
    if p == 2.0 {
        return (values.into_iter().map(|v| v * v).sum::<f64>() * cell_area).sqrt();
    }
    let vals: Vec<f64> = values.into_iter().map(f64::abs).collect();
    let m = vals.iter().fold(0.0f64, |m, v| m.max(*v));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = vals.iter().map(|v| (v / m).powf(p)).sum();
    m * (s * cell_area).powf(1.0 / p)
}

pub fn lp_norm(f: &SpectralField, p: f64) -> f64 {
    let area = f.grid().cell_area();
    lp_of_values(
        f.to_physical_complex().into_iter().map(|c| c.norm()),
        p,
        area,
    )
}

/// `L^p` norm of the pointwise Euclidean magnitude.
pub fn lp_norm_vector(u: &VectorField, p: f64) -> f64 {
    lp_of_values(u.magnitude_physical(), p, u.grid().cell_area())
}

/// `sum |x_j|^r` to the power `1/r`; sup for `r = inf`.
pub fn lr_sum(values: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    } else if r == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else {
        values
            .iter()
            .map(|v| v.abs().powf(r))
            .sum::<f64>()
            .powf(1.0 / r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovSpec {
    pub s: f64,
    pub p: f64,
    pub r: f64,
    pub homogeneous: bool,
}

impl BesovSpec {
    pub fn new(s: f64, p: f64, r: f64, homogeneous: bool) -> Result<Self> {
        check_exponent("p", p)?;
        check_exponent("r", r)?;
        if !s.is_finite() {
            return Err(Error::Exponent(format!("s = {s} is not finite")));
        }
        Ok(BesovSpec {
            s,
            p,
            r,
            homogeneous,
        })
    }

    /// Homogeneous `Ḃ^s_{p,r}`.
    pub fn homogeneous(s: f64, p: f64, r: f64) -> Result<Self> {
        Self::new(s, p, r, true)
    }

    pub fn inhomogeneous(s: f64, p: f64, r: f64) -> Result<Self> {
        Self::new(s, p, r, false)
    }

    /// Critical space `Ḃ^{2/p + shift}_{p,1}`.
    pub fn critical(p: f64, shift: f64) -> Result<Self> {
        Self::homogeneous(2.0 / p + shift, p, 1.0)
    }
}

/// Weighted block norms `2^{js} ||Δ̇_j u||_{L^p}` for consecutive `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockProfile {
    pub j_min: i32,
    pub values: Vec<f64>,
}

impl BlockProfile {
    pub fn j_max(&self) -> i32 {
        self.j_min + self.values.len() as i32 - 1
    }

    pub fn get(&self, j: i32) -> Option<f64> {
        if j < self.j_min {
            return None;
        }
        self.values.get((j - self.j_min) as usize).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.j_min + i as i32, *v))
    }

    pub fn aggregate(&self, r: f64) -> f64 {
        lr_sum(&self.values, r)
    }

    /// Same blocks with the regularity weight shifted by `ds`.
    pub fn reweighted(&self, ds: f64) -> BlockProfile {
        BlockProfile {
            j_min: self.j_min,
            values: self
                .entries()
                .map(|(j, v)| v * 2f64.powf(j as f64 * ds))
                .collect(),
        }
    }

    /// Profile divided by its `l^1` total (the `d_j` sequence); zero stays zero.
    pub fn normalized(&self) -> BlockProfile {
        let total: f64 = self.values.iter().sum();
        let values = if total > 0.0 {
            self.values.iter().map(|v| v / total).collect()
        } else {
            self.values.clone()
        };
        BlockProfile {
            j_min: self.j_min,
            values,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,value\n");
        for (j, v) in self.entries() {
            out.push_str(&format!("{j},{v:.17e}\n"));
        }
        out
    }
}

fn block_range(spec: &BesovSpec, ladder: &DyadicLadder) -> (i32, i32) {
    if spec.homogeneous {
        (ladder.j_min(), ladder.j_max())
    } else {
        (-1, ladder.j_max())
    }
}

fn check_mean(spec: &BesovSpec, means: &[f64], scale: f64) -> Result<()> {
    if spec.homogeneous {
        let m = means.iter().fold(0.0f64, |a, b| a.max(*b));
        if m > HOMOGENEOUS_MEAN_TOLERANCE * scale.max(1.0) {
            return Err(Error::HomogeneousMean(m));
        }
    }
    Ok(())
}

/// Block profile of a scalar field.
pub fn block_profile(
    u: &SpectralField,
    spec: &BesovSpec,
    ladder: &DyadicLadder,
) -> Result<BlockProfile> {
    check_mean(spec, &[u.mean().norm()], u.max_coefficient())?;
    let (lo, hi) = block_range(spec, ladder);
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    for j in lo..=hi {
        let b = if spec.homogeneous {
            ladder.block(u, j)?
        } else {
            ladder.inhomogeneous_block(u, j)?
        };
        let v = if b.max_coefficient() == 0.0 {
            0.0
        } else {
            lp_norm(&b, spec.p)
        };
        values.push(2f64.powf(j as f64 * spec.s) * v);
    }
    Ok(BlockProfile { j_min: lo, values })
}

/// Block profile of a vector field, using the pointwise Euclidean magnitude.
pub fn block_profile_vector(
    u: &VectorField,
    spec: &BesovSpec,
    ladder: &DyadicLadder,
) -> Result<BlockProfile> {
    check_mean(
        spec,
        &[u.x.mean().norm(), u.y.mean().norm()],
        u.max_coefficient(),
    )?;
    let (lo, hi) = block_range(spec, ladder);
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    for j in lo..=hi {
        let (bx, by) = if spec.homogeneous {
            (ladder.block(&u.x, j)?, ladder.block(&u.y, j)?)
        } else {
            (
                ladder.inhomogeneous_block(&u.x, j)?,
                ladder.inhomogeneous_block(&u.y, j)?,
            )
        };
        let b = VectorField { x: bx, y: by };
        let v = if b.max_coefficient() == 0.0 {
            0.0
        } else {
            lp_norm_vector(&b, spec.p)
        };
        values.push(2f64.powf(j as f64 * spec.s) * v);
    }
    Ok(BlockProfile { j_min: lo, values })
}

/// Besov norm together with the block profile it aggregates.
pub fn besov_norm(
    u: &SpectralField,
    spec: &BesovSpec,
    ladder: &DyadicLadder,
) -> Result<(f64, BlockProfile)> {
    let profile = block_profile(u, spec, ladder)?;
    Ok((profile.aggregate(spec.r), profile))
}

pub fn besov_norm_vector(
    u: &VectorField,
    spec: &BesovSpec,
    ladder: &DyadicLadder,
) -> Result<(f64, BlockProfile)> {
    let profile = block_profile_vector(u, spec, ladder)?;
    Ok((profile.aggregate(spec.r), profile))
}

/// Besov norm of the mean-free part.
pub fn besov_norm_mean_free(
    u: &SpectralField,
    spec: &BesovSpec,
    ladder: &DyadicLadder,
) -> Result<f64> {
    Ok(besov_norm(&u.without_mean(), spec, ladder)?.0)
}

pub fn besov_norm_vector_mean_free(
    u: &VectorField,
    spec: &BesovSpec,
    ladder: &DyadicLadder,
) -> Result<f64> {
    let v = VectorField {
        x: u.x.without_mean(),
        y: u.y.without_mean(),
    };
    Ok(besov_norm_vector(&v, spec, ladder)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeNormSpec {
    pub besov: BesovSpec,
    pub sigma: f64,
    pub horizon: f64,
}

impl TimeNormSpec {
    pub fn new(besov: BesovSpec, sigma: f64, horizon: f64) -> Result<Self> {
        check_exponent("sigma", sigma)?;
        if !(horizon > 0.0) {
            return Err(Error::Invalid(format!(
                "horizon T = {horizon} must be positive"
            )));
        }
        Ok(TimeNormSpec {
            besov,
            sigma,
            horizon,
        })
    }
}

/// `L^sigma(0, T)` norm of a sampled function by the trapezoid rule.
pub fn time_norm(times: &[f64], values: &[f64], sigma: f64) -> Result<f64> {
    check_times(times)?;
    if sigma.is_infinite() {
        return Ok(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let mut acc = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        acc += 0.5 * dt * (values[i - 1].abs().powf(sigma) + values[i].abs().powf(sigma));
    }
    Ok(acc.powf(1.0 / sigma))
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::TooFewSamples(format!(
            "{} time samples, need at least 2",
            times.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Unordered);
    }
    Ok(())
}

fn snapshot_profiles(
    snapshots: &[(f64, SpectralField)],
    spec: &TimeNormSpec,
    ladder: &DyadicLadder,
) -> Result<(Vec<f64>, Vec<BlockProfile>)> {
    let times: Vec<f64> = snapshots.iter().map(|(t, _)| *t).collect();
    check_times(&times)?;
    let profiles = snapshots
        .iter()
        .map(|(_, u)| block_profile(u, &spec.besov, ladder))
        .collect::<Result<Vec<_>>>()?;
    Ok((times, profiles))
}

/// `||u||_{L̃^sigma_T(B^s_{p,r})}`: time norm per block, then `l^r` over blocks.
pub fn chemin_lerner(
    snapshots: &[(f64, SpectralField)],
    spec: &TimeNormSpec,
    ladder: &DyadicLadder,
) -> Result<f64> {
    let (times, profiles) = snapshot_profiles(snapshots, spec, ladder)?;
    let mut acc = BlockAccumulator::new(spec.sigma);
    for (t, p) in times.iter().zip(&profiles) {
        acc.push(*t, p)?;
    }
    acc.chemin_lerner(spec.besov.r)
}

/// `||u||_{L^sigma_T(B^s_{p,r})}`: Besov norm per time, then the time norm.
pub fn lebesgue_besov(
    snapshots: &[(f64, SpectralField)],
    spec: &TimeNormSpec,
    ladder: &DyadicLadder,
) -> Result<f64> {
    let (times, profiles) = snapshot_profiles(snapshots, spec, ladder)?;
    let series: Vec<f64> = profiles.iter().map(|p| p.aggregate(spec.besov.r)).collect();
    time_norm(&times, &series, spec.sigma)
}

/// Streaming accumulator of per-block time norms.
///
/// Keeps, per block, the sup and the trapezoid integral of the `sigma`-th
/// power, so trajectories need not be stored.
#[derive(Clone, Debug)]
pub struct BlockAccumulator {
    sigma: f64,
    j_min: Option<i32>,
    last: Option<(f64, Vec<f64>)>,
    sup: Vec<f64>,
    integral: Vec<f64>,
    samples: usize,
}

impl BlockAccumulator {
    pub fn new(sigma: f64) -> Self {
        BlockAccumulator {
            sigma,
            j_min: None,
            last: None,
            sup: Vec::new(),
            integral: Vec::new(),
            samples: 0,
        }
    }

    pub fn push(&mut self, t: f64, profile: &BlockProfile) -> Result<()> {
        match self.j_min {
            None => {
                self.j_min = Some(profile.j_min);
                self.sup = vec![0.0; profile.values.len()];
                self.integral = vec![0.0; profile.values.len()];
            }
            Some(j) if j != profile.j_min || self.sup.len() != profile.values.len() => {
                return Err(Error::Invalid(
                    "block profiles have different ranges".into(),
                ))
            }
            _ => {}
        }
        let powered: Vec<f64> = if self.sigma.is_infinite() {
            profile.values.clone()
        } else {
            profile.values.iter().map(|v| v.powf(self.sigma)).collect()
        };
        if let Some((t0, prev)) = &self.last {
            if !(t > *t0) {
                return Err(Error::Unordered);
            }
            let dt = t - t0;
            for ((acc, a), b) in self.integral.iter_mut().zip(prev).zip(&powered) {
                *acc += 0.5 * dt * (a + b);
            }
        }
        for (s, v) in self.sup.iter_mut().zip(&profile.values) {
            *s = s.max(*v);
        }
        self.last = Some((t, powered));
        self.samples += 1;
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Per-block time norms.
    pub fn block_norms(&self) -> Result<BlockProfile> {
        if self.samples < 2 {
            return Err(Error::TooFewSamples(format!(
                "{} time samples, need at least 2",
                self.samples
            )));
        }
        let values = if self.sigma.is_infinite() {
            self.sup.clone()
        } else {
            self.integral
                .iter()
                .map(|v| v.powf(1.0 / self.sigma))
                .collect()
        };
        Ok(BlockProfile {
            j_min: self.j_min.unwrap_or(0),
            values,
        })
    }

    /// Per-block sup over time.
    pub fn sup_profile(&self) -> BlockProfile {
        BlockProfile {
            j_min: self.j_min.unwrap_or(0),
            values: self.sup.clone(),
        }
    }

    pub fn chemin_lerner(&self, r: f64) -> Result<f64> {
        Ok(self.block_norms()?.aggregate(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn lp_of_constant_and_sine() {
        let g = Grid::periodic(32).unwrap();
        let one = SpectralField::constant(&g, 1.0);
        assert!((lp_norm(&one, 2.0) - 2.0 * PI).abs() < 1e-12);
        let s = SpectralField::from_fn(&g, |x, _| x.sin());
        assert!((lp_norm(&s, f64::INFINITY) - 1.0).abs() < 1e-6);
        assert_eq!(lp_norm(&SpectralField::zeros(&g), 3.0), 0.0);
    }

    #[test]
    fn single_block_besov() {
        let g = Grid::periodic(64).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let u = SpectralField::single_mode(&g, 3, 5, Complex64::new(1.0, 0.0)).unwrap();
        for &p in &[1.0, 2.0, 4.0] {
            let spec = BesovSpec::homogeneous(0.7, p, 1.0).unwrap();
            let (v, prof) = besov_norm(&u, &spec, &l).unwrap();
            let expect = 2f64.powf(2.0 * 0.7) * (2.0 * PI).powf(2.0 / p);
            assert!(
                (v - expect).abs() < 1e-10 * expect,
                "p={p}: {v} vs {expect}"
            );
            assert_eq!(prof.entries().filter(|(_, x)| *x > 0.0).count(), 1);
        }
    }

    #[test]
    fn homogeneous_rejects_mean() {
        let g = Grid::periodic(16).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let u = SpectralField::constant(&g, 1.0);
        let spec = BesovSpec::homogeneous(0.0, 2.0, 1.0).unwrap();
        assert!(matches!(
            besov_norm(&u, &spec, &l),
            Err(Error::HomogeneousMean(_))
        ));
        let inh = BesovSpec::inhomogeneous(0.0, 2.0, 1.0).unwrap();
        assert!(besov_norm(&u, &inh, &l).unwrap().0 > 0.0);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(BesovSpec::homogeneous(0.0, 0.5, 1.0).is_err());
        assert!(BesovSpec::homogeneous(0.0, 2.0, f64::NAN).is_err());
        assert!(BesovSpec::homogeneous(0.0, f64::INFINITY, f64::INFINITY).is_ok());
    }

    #[test]
    fn chemin_lerner_constant_in_time() {
        let g = Grid::periodic(32).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let u = SpectralField::from_fn(&g, |x, y| (x + y).sin() + (4.0 * x).cos());
        let b = BesovSpec::homogeneous(0.5, 2.0, 1.0).unwrap();
        let spec = TimeNormSpec::new(b, f64::INFINITY, 1.0).unwrap();
        let snaps = vec![(0.0, u.clone()), (0.5, u.clone()), (1.0, u.clone())];
        let cl = chemin_lerner(&snaps, &spec, &l).unwrap();
        let bn = besov_norm(&u, &b, &l).unwrap().0;
        assert!((cl - bn).abs() < 1e-12 * bn);
    }

    #[test]
    fn chemin_lerner_rejects_unordered() {
        let g = Grid::periodic(16).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let u = SpectralField::zeros(&g);
        let b = BesovSpec::homogeneous(0.0, 2.0, 1.0).unwrap();
        let spec = TimeNormSpec::new(b, 1.0, 1.0).unwrap();
        let snaps = vec![(0.5, u.clone()), (0.1, u.clone())];
        assert!(matches!(
            chemin_lerner(&snaps, &spec, &l),
            Err(Error::Unordered)
        ));
    }

    #[test]
    fn trapezoid_time_norm() {
        let t = [0.0, 0.5, 1.0];
        let v = [1.0, 1.0, 1.0];
        assert!((time_norm(&t, &v, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            time_norm(&[0.0], &[1.0], 1.0),
            Err(Error::TooFewSamples(_))
        ));
    }
}
