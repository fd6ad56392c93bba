use serde::{Deserialize, Serialize};

use super::momentum::StateSnapshot;
use super::viscosity::ViscosityLaw;
use crate::error::{Error, Result};
use crate::norms::lp_norm_vector;
use crate::spectral::{advect_vector, gradient, heat_propagate_vector, laplacian, VectorField};

/// Energy quantities of `ubar = u - u_F` at one sample, `u_F(t) = exp(mu (t - t1) Delta) u(t1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    /// `int rho |ubar|^2`.
    pub e0: f64,
    /// `int |grad ubar|^2`.
    pub e1: f64,
    /// `int rho |d_t ubar|^2`, centered difference; zero at the ends of the window.
    pub e2: f64,
    /// `int ubar . G`.
    pub forcing: f64,
    /// `|1/2 dE0/dt + mu E1 - int ubar . G|`, centered difference; `None` at the ends.
    pub defect: Option<f64>,
    /// Defect over the largest of the three balance terms (zero when all vanish).
    pub relative_defect: Option<f64>,
    /// `|u_F . grad u_F|_{L^2}`.
    pub convection: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub t1: f64,
    pub mu: f64,
    pub rows: Vec<EnergyRow>,
    /// `1 / (1 + |a(t1)|_inf)` and `1 / kappa` with `kappa = 1 + min a(t1)`.
    pub rho_bounds: (f64, f64),
}

impl EnergySeries {
    pub fn max_defect(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.defect)
            .fold(0.0, f64::max)
    }

    pub fn max_relative_defect(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.relative_defect)
            .fold(0.0, f64::max)
    }

    /// Largest defect over the largest balance term met anywhere in the series.
    pub fn peak_normalized_defect(&self) -> f64 {
        let scale = self
            .rows
            .iter()
            .map(|r| (self.mu * r.e1).max(r.forcing.abs()))
            .fold(0.0, f64::max);
        if scale > 0.0 {
            self.max_defect() / scale
        } else {
            0.0
        }
    }

    /// Extremes of `rho` over all rows.
    pub fn rho_range(&self) -> (f64, f64) {
        self.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.rho_min), hi.max(r.rho_max))
        })
    }

    /// Whether `rho` stayed inside the bounds up to the relative slack `tol`.
    pub fn rho_within_bounds(&self, tol: f64) -> bool {
        let (lo, hi) = self.rho_range();
        lo >= self.rho_bounds.0 * (1.0 - tol) && hi <= self.rho_bounds.1 * (1.0 + tol)
    }

    pub fn convection_finite(&self) -> bool {
        self.rows.iter().all(|r| r.convection.is_finite())
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("t,e0,e1,e2,forcing,defect,relative_defect,convection,rho_min,rho_max\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{:.17e},{:.17e},{:.17e}\n",
                r.t,
                r.e0,
                r.e1,
                r.e2,
                r.forcing,
                opt(r.defect),
                opt(r.relative_defect),
                r.convection,
                r.rho_min,
                r.rho_max
            ));
        }
        out
    }
}

struct Sample {
    t: f64,
    e0: f64,
    ubar: VectorField,
    rho: Vec<f64>,
}

fn weighted_square(rho: &[f64], v: &VectorField, cell: f64) -> f64 {
    let vx = v.x.to_physical();
    let vy = v.y.to_physical();
    rho.iter()
        .zip(vx.iter().zip(&vy))
        .map(|(r, (x, y))| r * (x * x + y * y))
        .sum::<f64>()
        * cell
}

/// Streaming evaluation of the energy balance; feed consecutive states with [`EnergyMonitor::push`].
pub struct EnergyMonitor {
    t1: f64,
    mu: f64,
    anchor: Option<VectorField>,
    prev: Option<Sample>,
    current: Option<(Sample, EnergyRow)>,
    series: EnergySeries,
}

impl EnergyMonitor {
    pub fn new(t1: f64, visc: &ViscosityLaw) -> Result<Self> {
        if !visc.is_constant() {
            return Err(Error::VariableViscosity);
        }
        let mu = visc.mu0();
        if !(mu > 0.0) {
            return Err(Error::Viscosity(mu));
        }
        if !(t1 >= 0.0) {
            return Err(Error::TimeRange(t1));
        }
        Ok(EnergyMonitor {
            t1,
            mu,
            anchor: None,
            prev: None,
            current: None,
            series: EnergySeries {
                t1,
                mu,
                ..EnergySeries::default()
            },
        })
    }

    /// Takes the next state; states before `t1` are skipped, the first one at or after it fixes `u(t1)`.
    pub fn push(&mut self, state: &StateSnapshot) -> Result<()> {
        if let Some((s, _)) = &self.current {
            if !(state.t > s.t) {
                return Err(Error::Unordered);
            }
        }
        if self.anchor.is_none() {
            if state.t < self.t1 - 1e-12 * self.t1.max(1.0) {
                return Ok(());
            }
            self.anchor = Some(state.u.clone());
            let (lo, hi) = state.a.min_max();
            let amax = lo.abs().max(hi.abs());
            self.series.rho_bounds = (1.0 / (1.0 + amax), 1.0 / (1.0 + lo));
        }
        let anchor = self.anchor.as_ref().expect("anchor set above");
        let cell = state.a.grid().cell_area();
        let uf = heat_propagate_vector(anchor, self.mu, state.t - self.t1);
        let ubar = &state.u - &uf;
        let rho = state.density();
        let e0 = weighted_square(&rho, &ubar, cell);
        let (gx, gy) = (gradient(&ubar.x), gradient(&ubar.y));
        let e1 = gx.inner(&gx).re + gy.inner(&gy).re;

        let lap = uf.map(laplacian).scale(self.mu);
        let conv = advect_vector(&uf, &uf)?;
        let w = &lap + &advect_vector(&state.u, &uf)?;
        let (lx, ly) = (lap.x.to_physical(), lap.y.to_physical());
        let (wx, wy) = (w.x.to_physical(), w.y.to_physical());
        let (bx, by) = (ubar.x.to_physical(), ubar.y.to_physical());
        let mut forcing = 0.0;
        for i in 0..rho.len() {
            let gx = lx[i] - rho[i] * wx[i];
            let gy = ly[i] - rho[i] * wy[i];
            forcing += bx[i] * gx + by[i] * gy;
        }
        forcing *= cell;

        let (rho_min, rho_max) = rho
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(*r), h.max(*r)));
        let row = EnergyRow {
            t: state.t,
            e0,
            e1,
            e2: 0.0,
            forcing,
            defect: None,
            relative_defect: None,
            convection: lp_norm_vector(&conv, 2.0),
            rho_min,
            rho_max,
        };
        let sample = Sample {
            t: state.t,
            e0,
            ubar,
            rho,
        };

        if let Some((mid, mut mid_row)) = self.current.take() {
            if let Some(prev) = &self.prev {
                let span = sample.t - prev.t;
                let de0 = 0.5 * (sample.e0 - prev.e0) / span;
                let viscous = self.mu * mid_row.e1;
                let defect = (de0 + viscous - mid_row.forcing).abs();
                let scale = de0.abs().max(viscous).max(mid_row.forcing.abs());
                mid_row.defect = Some(defect);
                mid_row.relative_defect = Some(if scale > 0.0 { defect / scale } else { 0.0 });
                let dudt = (&sample.ubar - &prev.ubar).scale(1.0 / span);
                mid_row.e2 = weighted_square(&mid.rho, &dudt, cell);
            }
            self.series.rows.push(mid_row);
            self.prev = Some(mid);
        }
        self.current = Some((sample, row));
        Ok(())
    }

    pub fn finish(mut self) -> EnergySeries {
        if let Some((_, row)) = self.current.take() {
            self.series.rows.push(row);
        }
        self.series
    }
}

/// Energy balance of `ubar` along a dense trajectory covering `[t1, T]`.
pub fn energy_diagnostics(
    trajectory: &[StateSnapshot],
    t1: f64,
    visc: &ViscosityLaw,
) -> Result<EnergySeries> {
    let last = trajectory
        .last()
        .ok_or_else(|| Error::TooFewSamples("empty trajectory".into()))?;
    if trajectory[0].t > t1 || last.t < t1 {
        return Err(Error::TimeRange(t1));
    }
    let mut m = EnergyMonitor::new(t1, visc)?;
    for s in trajectory {
        m.push(s)?;
    }
    Ok(m.finish())
}
