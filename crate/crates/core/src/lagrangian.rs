//! Flow maps, Lagrangian pullbacks and the inverse-Jacobian algebra.
//!
//! The flow is stored as the periodic displacement `X(t, y) - y`. Matrix
//! fields hold nodal values; entry `(i, j)` of `Dv` is `d_j v^i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicLadder;
use crate::elliptic::potential;
use crate::error::{Error, Result};
use crate::evolution::{check_divergence, StateSnapshot};
use crate::interp::PeriodicSampler;
use crate::lab::{RatioReport, RatioRow};
use crate::norms::{besov_norm_mean_free, time_norm, BesovSpec};
use crate::spectral::{divergence, dx, dy, Grid, SpectralField, VectorField};

/// Refinement of the velocity samplers used along characteristics.
pub const UPSAMPLE: usize = 4;
/// Relative size below which a series term ends the summation.
pub const SERIES_TOLERANCE: f64 = 1e-17;

/// 2x2 matrix per grid node, row-major `[xx, xy, yx, yy]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    grid: Grid,
    pub entries: [Vec<f64>; 4],
}

type Mat = [f64; 4];

fn mat_mul(a: Mat, b: Mat) -> Mat {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn mat_inv(a: Mat) -> Mat {
    let d = a[0] * a[3] - a[1] * a[2];
    [a[3] / d, -a[1] / d, -a[2] / d, a[0] / d]
}

impl MatrixField {
    pub fn identity(grid: &Grid) -> Self {
        let one = vec![1.0; grid.len()];
        let zero = vec![0.0; grid.len()];
        MatrixField {
            grid: grid.clone(),
            entries: [one.clone(), zero.clone(), zero, one],
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        let zero = vec![0.0; grid.len()];
        MatrixField {
            grid: grid.clone(),
            entries: [zero.clone(), zero.clone(), zero.clone(), zero],
        }
    }

    /// `Du` with `(Du)^{ij} = d_j u^i`.
    pub fn gradient_of(u: &VectorField) -> Self {
        MatrixField {
            grid: u.grid().clone(),
            entries: [
                dx(&u.x).to_physical(),
                dy(&u.x).to_physical(),
                dx(&u.y).to_physical(),
                dy(&u.y).to_physical(),
            ],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn at(&self, i: usize) -> Mat {
        [
            self.entries[0][i],
            self.entries[1][i],
            self.entries[2][i],
            self.entries[3][i],
        ]
    }

    fn from_fn(grid: &Grid, f: impl Fn(usize) -> Mat + Sync + Send) -> Self {
        let vals: Vec<Mat> = (0..grid.len()).into_par_iter().map(f).collect();
        let mut entries: [Vec<f64>; 4] = Default::default();
        for (k, e) in entries.iter_mut().enumerate() {
            *e = vals.iter().map(|m| m[k]).collect();
        }
        MatrixField {
            grid: grid.clone(),
            entries,
        }
    }

    pub fn det(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| {
                let m = self.at(i);
                m[0] * m[3] - m[1] * m[2]
            })
            .collect()
    }

    /// Nodewise inverse.
    pub fn inverse(&self) -> Self {
        Self::from_fn(&self.grid, |i| mat_inv(self.at(i)))
    }

    /// Nodewise product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        Self::from_fn(&self.grid, |i| mat_mul(self.at(i), other.at(i)))
    }

    pub fn add(&self, other: &Self, s: f64) -> Self {
        Self::from_fn(&self.grid, |i| {
            let (a, b) = (self.at(i), other.at(i));
            [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]]
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_fn(&self.grid, |i| self.at(i).map(|v| s * v))
    }

    pub fn trace(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| self.entries[0][i] + self.entries[3][i])
            .collect()
    }

    /// Nodewise `M v`.
    pub fn apply(&self, v: &VectorField) -> Result<VectorField> {
        let (vx, vy) = (v.x.to_physical(), v.y.to_physical());
        let (ox, oy): (Vec<f64>, Vec<f64>) = (0..self.grid.len())
            .map(|i| {
                let m = self.at(i);
                (m[0] * vx[i] + m[1] * vy[i], m[2] * vx[i] + m[3] * vy[i])
            })
            .unzip();
        VectorField::new(
            SpectralField::from_physical(&self.grid, &ox)?,
            SpectralField::from_physical(&self.grid, &oy)?,
        )
    }

    /// Largest nodal Frobenius norm.
    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.at(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn entry_fields(&self) -> Result<[SpectralField; 4]> {
        let f = |k: usize| SpectralField::from_physical(&self.grid, &self.entries[k]);
        Ok([f(0)?, f(1)?, f(2)?, f(3)?])
    }

    /// Sum over entries of the mean-free Besov norm.
    pub fn besov_norm(&self, spec: &BesovSpec, ladder: &DyadicLadder) -> Result<f64> {
        self.entry_fields()?
            .iter()
            .map(|e| besov_norm_mean_free(e, spec, ladder))
            .sum()
    }
}

/// Flow map sampled at the velocity snapshot times.
#[derive(Clone, Debug)]
pub struct FlowMap {
    pub times: Vec<f64>,
    /// `X(t, y) - y`.
    pub displacement: Vec<VectorField>,
    /// `D_y X`.
    pub jacobian: Vec<MatrixField>,
    /// `A = (D_y X)^{-1}`.
    pub inverse: Vec<MatrixField>,
}

impl FlowMap {
    fn push(&mut self, t: f64, disp: VectorField) {
        let jac = MatrixField::gradient_of(&disp).add(&MatrixField::identity(disp.grid()), 1.0);
        self.inverse.push(jac.inverse());
        self.jacobian.push(jac);
        self.times.push(t);
        self.displacement.push(disp);
    }

    /// Index of the stored time equal to `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-12 * (1.0 + t.abs());
        self.times
            .iter()
            .position(|s| (s - t).abs() <= tol)
            .ok_or(Error::TimeRange(t))
    }

    /// `max |det D_y X - 1|` at stored time `k`.
    pub fn volume_defect(&self, k: usize) -> f64 {
        self.jacobian[k]
            .det()
            .iter()
            .fold(0.0, |m, d| m.max((d - 1.0).abs()))
    }

    /// `max |A D_y X - Id|` at stored time `k`.
    pub fn inverse_defect(&self, k: usize) -> f64 {
        self.inverse[k]
            .mul(&self.jacobian[k])
            .add(&MatrixField::identity(self.jacobian[k].grid()), -1.0)
            .max_norm()
    }
}

struct Samplers {
    x: PeriodicSampler,
    y: PeriodicSampler,
}

impl Samplers {
    fn new(u: &VectorField) -> Result<Self> {
        Ok(Samplers {
            x: PeriodicSampler::upsampled(&u.x, UPSAMPLE)?,
            y: PeriodicSampler::upsampled(&u.y, UPSAMPLE)?,
        })
    }

    fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        [self.x.eval(p[0], p[1]), self.y.eval(p[0], p[1])]
    }
}

/// Integrates `dX/dt = u(t, X)` from every node by RK4.
///
/// Each snapshot interval is split into equal steps no longer than `dt`;
/// `u` is linear in time between snapshots. The map is recorded at every
/// snapshot time.
pub fn integrate_flow(snapshots: &[StateSnapshot], dt: f64) -> Result<FlowMap> {
    if snapshots.len() < 2 {
        return Err(Error::TooFewSamples(format!(
            "{} velocity snapshots, the flow needs at least 2",
            snapshots.len()
        )));
    }
    if snapshots.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::Unordered);
    }
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("time step {dt} must be positive")));
    }
    let spacing = snapshots
        .windows(2)
        .map(|w| w[1].t - w[0].t)
        .fold(f64::INFINITY, f64::min);
    if dt > spacing * (1.0 + 1e-12) {
        return Err(Error::Invalid(format!(
            "time step {dt} exceeds the snapshot spacing {spacing}"
        )));
    }
    for s in snapshots {
        check_divergence(&s.u)?;
    }
    let grid = snapshots[0].u.grid().clone();
    let n = grid.n();
    let nodes: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.node(i % n, i / n)).collect();
    let mut disp = vec![[0.0; 2]; grid.len()];
    let mut flow = FlowMap {
        times: Vec::new(),
        displacement: Vec::new(),
        jacobian: Vec::new(),
        inverse: Vec::new(),
    };
    flow.push(snapshots[0].t, VectorField::zeros(&grid));
    let mut lo = Samplers::new(&snapshots[0].u)?;
    for w in snapshots.windows(2) {
        let hi = Samplers::new(&w[1].u)?;
        let span = w[1].t - w[0].t;
        let steps = (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for s in 0..steps {
            let th0 = s as f64 / steps as f64;
            let dth = 1.0 / steps as f64;
            let vel = |p: [f64; 2], th: f64| {
                let a = lo.eval(p);
                let b = hi.eval(p);
                [(1.0 - th) * a[0] + th * b[0], (1.0 - th) * a[1] + th * b[1]]
            };
            disp.par_iter_mut().zip(&nodes).for_each(|(d, y)| {
                let p = [y[0] + d[0], y[1] + d[1]];
                let k1 = vel(p, th0);
                let k2 = vel([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]], th0 + 0.5 * dth);
                let k3 = vel([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]], th0 + 0.5 * dth);
                let k4 = vel([p[0] + h * k3[0], p[1] + h * k3[1]], th0 + dth);
                for c in 0..2 {
                    d[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                }
            });
        }
        let dxv: Vec<f64> = disp.iter().map(|d| d[0]).collect();
        let dyv: Vec<f64> = disp.iter().map(|d| d[1]).collect();
        flow.push(
            w[1].t,
            VectorField::new(
                SpectralField::from_physical(&grid, &dxv)?,
                SpectralField::from_physical(&grid, &dyv)?,
            )?,
        );
        lo = hi;
    }
    Ok(flow)
}

fn compose(f: &SpectralField, disp: &VectorField) -> Result<SpectralField> {
    let g = f.grid();
    let n = g.n();
    let s = PeriodicSampler::upsampled(f, UPSAMPLE)?;
    let (dxv, dyv) = (disp.x.to_physical(), disp.y.to_physical());
    let vals: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let [x, y] = g.node(i % n, i / n);
            s.eval(x + dxv[i], y + dyv[i])
        })
        .collect();
    SpectralField::from_physical(g, &vals)
}

/// `(eta, v, P) = (a, u, Pi)(t, X(t, y))`.
#[derive(Clone, Debug)]
pub struct LagrangianState {
    pub t: f64,
    pub eta: SpectralField,
    pub v: VectorField,
    pub p: SpectralField,
}

impl LagrangianState {
    /// `|eta - a0|_{L^2} / |a0|_{L^2}`.
    pub fn eta_residual(&self, a0: &SpectralField) -> f64 {
        let d = (&self.eta - a0).coefficient_norm();
        let s = a0.coefficient_norm();
        if s == 0.0 {
            d
        } else {
            d / s
        }
    }
}

/// Pulls a state back along the flow at the matching stored time.
pub fn to_lagrangian(state: &StateSnapshot, flow: &FlowMap) -> Result<LagrangianState> {
    let k = flow.index_of(state.t)?;
    let disp = &flow.displacement[k];
    if disp.grid() != state.a.grid() {
        return Err(Error::GridMismatch);
    }
    let pi = potential(&state.grad_pi)?;
    Ok(LagrangianState {
        t: state.t,
        eta: compose(&state.a, disp)?,
        v: VectorField::new(compose(&state.u.x, disp)?, compose(&state.u.y, disp)?)?,
        p: compose(&pi, disp)?,
    })
}

/// Residuals of `div_x u(X) = Tr(D_y v A) = div_y(A v)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivIdentity {
    /// `|div_x u(X) - Tr(D_y v A)|_{L^2} / |D_y v|_{L^2}`.
    pub trace: f64,
    /// `|div_x u(X) - div_y(A v)|_{L^2} / |D_y v|_{L^2}`.
    pub piola: f64,
}

pub fn check_div_identity(state: &StateSnapshot, flow: &FlowMap) -> Result<DivIdentity> {
    let k = flow.index_of(state.t)?;
    let disp = &flow.displacement[k];
    let a = &flow.inverse[k];
    let lhs = compose(&divergence(&state.u), disp)?.to_physical();
    let v = VectorField::new(compose(&state.u.x, disp)?, compose(&state.u.y, disp)?)?;
    let dv = MatrixField::gradient_of(&v);
    let trace = dv.mul(a).trace();
    let piola = divergence(&a.apply(&v)?).to_physical();
    let l2 = |vals: &mut dyn Iterator<Item = f64>| vals.map(|x| x * x).sum::<f64>().sqrt();
    let scale = l2(&mut dv.entries.iter().flatten().copied());
    let rel = |d: f64| if scale == 0.0 { d } else { d / scale };
    Ok(DivIdentity {
        trace: rel(l2(&mut lhs.iter().zip(&trace).map(|(a, b)| a - b))),
        piola: rel(l2(&mut lhs.iter().zip(&piola).map(|(a, b)| a - b))),
    })
}

/// Neumann series for `(Id + M)^{-1}` and its comparison with direct inversion.
#[derive(Clone, Debug)]
pub struct JacobianSeries {
    /// `Id + sum_{k >= 1} (-1)^k M^k`.
    pub a: MatrixField,
    pub terms: usize,
    /// `max |series - (Id + M)^{-1}|`.
    pub agreement: f64,
    /// Largest nodal norm of `M`.
    pub monitor: f64,
}

/// `M = int_0^t Dv` by the trapezoid rule over the samples up to `t`.
pub fn integrated_gradient(v: &[(f64, VectorField)], t: f64) -> Result<MatrixField> {
    let first = v.first().ok_or(Error::TooFewSamples("empty trajectory".into()))?;
    if v.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Unordered);
    }
    let tol = 1e-12 * (1.0 + t.abs());
    if t < first.0 - tol || t > v.last().expect("nonempty").0 + tol {
        return Err(Error::TimeRange(t));
    }
    let grid = first.1.grid();
    let mut m = MatrixField::zeros(grid);
    let mut prev = MatrixField::gradient_of(&first.1);
    for w in v.windows(2) {
        if w[0].0 >= t - tol {
            break;
        }
        let next = MatrixField::gradient_of(&w[1].1);
        let (t0, t1) = (w[0].0, w[1].0.min(t));
        let th = (t1 - t0) / (w[1].0 - w[0].0);
        let end = prev.scale(1.0 - th).add(&next, th);
        m = m.add(&prev.add(&end, 1.0), 0.5 * (t1 - t0));
        prev = next;
    }
    Ok(m)
}

/// Sums the Neumann series of `A(t) = (Id + int_0^t Dv)^{-1}` up to `k_max` terms.
pub fn jacobian_series(v: &[(f64, VectorField)], t: f64, k_max: usize) -> Result<JacobianSeries> {
    let m = integrated_gradient(v, t)?;
    neumann(&m, k_max)
}

fn neumann(m: &MatrixField, k_max: usize) -> Result<JacobianSeries> {
    let grid = m.grid();
    let id = MatrixField::identity(grid);
    let mut sum = id.clone();
    let mut term = id.clone();
    let mut terms = 0;
    let mut prev = f64::INFINITY;
    let mut growth = 0;
    for k in 1..=k_max {
        term = term.mul(m).scale(-1.0);
        let size = term.max_norm();
        sum = sum.add(&term, 1.0);
        terms = k;
        if size <= SERIES_TOLERANCE * sum.max_norm() {
            break;
        }
        growth = if size > prev { growth + 1 } else { 0 };
        if growth >= 3 && size > 1.0 {
            return Err(Error::Divergence(format!(
                "Neumann term {k} has norm {size:.3e} and keeps growing"
            )));
        }
        if k == k_max && size > 1e-10 * sum.max_norm() {
            return Err(Error::Divergence(format!(
                "term {k} still has norm {size:.3e}"
            )));
        }
        prev = size;
    }
    let direct = id.add(m, 1.0).inverse();
    let agreement = sum.add(&direct, -1.0).max_norm();
    Ok(JacobianSeries {
        a: sum,
        terms,
        agreement,
        monitor: m.max_norm(),
    })
}

/// Measured ratios for the perturbation estimates between two Lagrangian velocities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaReport {
    /// `sup_t |A_i - Id|` against `int |Dv_i|`, one row per `i`.
    pub u1: RatioReport,
    /// `sup_t |dA|` against `int |D dv|`.
    pub u2: RatioReport,
    /// `|d_t A_i|` against `|Dv_i|`, one row per sample and `i`.
    pub u3: RatioReport,
    /// `|d_t dA|_{L^2_t(Ḃ^{2/p-1})}` against `|v1, v2|_{L^2_t} |D dv|_{L^1_t} + |dv|_{L^2_t}`.
    pub u4: RatioReport,
}

/// Evaluates the four perturbation estimates in `Ḃ^{2/p}_{p,1}` norms.
///
/// `A_i` comes from the Neumann series, `d_t A_i = -A_i Dv_i A_i`.
pub fn delta_estimates(
    v1: &[(f64, VectorField)],
    v2: &[(f64, VectorField)],
    p: f64,
    k_max: usize,
) -> Result<DeltaReport> {
    if v1.len() != v2.len() || v1.iter().zip(v2).any(|(a, b)| a.0 != b.0) {
        return Err(Error::TimeRange(v2.first().map(|s| s.0).unwrap_or(0.0)));
    }
    if v1.len() < 2 {
        return Err(Error::TooFewSamples(format!("{} samples", v1.len())));
    }
    let grid = v1[0].1.grid();
    if v2[0].1.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let ladder = DyadicLadder::new(grid)?;
    let s0 = BesovSpec::critical(p, 0.0)?;
    let sm = BesovSpec::critical(p, -1.0)?;
    let times: Vec<f64> = v1.iter().map(|s| s.0).collect();
    let id = MatrixField::identity(grid);
    let dv: Vec<(f64, VectorField)> = v1
        .iter()
        .zip(v2)
        .map(|(a, b)| (a.0, &b.1 - &a.1))
        .collect();

    struct Sample {
        a_dev: [f64; 2],
        dv_norm: [f64; 2],
        dt_a: [f64; 2],
        da: f64,
        ddv: f64,
        dt_da: f64,
        v_norm: f64,
        delta_v: f64,
    }
    let samples = (0..times.len())
        .into_par_iter()
        .map(|k| {
            let t = times[k];
            let mut a = Vec::with_capacity(2);
            let mut dta = Vec::with_capacity(2);
            let mut out = Sample {
                a_dev: [0.0; 2],
                dv_norm: [0.0; 2],
                dt_a: [0.0; 2],
                da: 0.0,
                ddv: 0.0,
                dt_da: 0.0,
                v_norm: 0.0,
                delta_v: 0.0,
            };
            for (i, traj) in [v1, v2].iter().enumerate() {
                let ai = jacobian_series(traj, t, k_max)?.a;
                let dvi = MatrixField::gradient_of(&traj[k].1);
                let dti = ai.mul(&dvi).mul(&ai).scale(-1.0);
                out.a_dev[i] = ai.add(&id, -1.0).besov_norm(&s0, &ladder)?;
                out.dv_norm[i] = dvi.besov_norm(&s0, &ladder)?;
                out.dt_a[i] = dti.besov_norm(&s0, &ladder)?;
                out.v_norm += besov_norm_mean_free(&traj[k].1.x, &s0, &ladder)?
                    + besov_norm_mean_free(&traj[k].1.y, &s0, &ladder)?;
                a.push(ai);
                dta.push(dti);
            }
            out.da = a[1].add(&a[0], -1.0).besov_norm(&s0, &ladder)?;
            out.dt_da = dta[1].add(&dta[0], -1.0).besov_norm(&sm, &ladder)?;
            out.ddv = MatrixField::gradient_of(&dv[k].1).besov_norm(&s0, &ladder)?;
            out.delta_v = besov_norm_mean_free(&dv[k].1.x, &s0, &ladder)?
                + besov_norm_mean_free(&dv[k].1.y, &s0, &ladder)?;
            Ok(out)
        })
        .collect::<Result<Vec<Sample>>>()?;

    let col = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    let sup = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    let config = format!("p={p},n={}", grid.n());
    let mut u1 = RatioReport::new("u1", config.clone());
    for i in 0..2 {
        let lhs = sup(col(&|s| s.a_dev[i]));
        let rhs = time_norm(&times, &col(&|s| s.dv_norm[i]), 1.0)?;
        u1.push(RatioRow::new(i, 0, None, lhs, rhs));
    }
    let ddv_l1 = time_norm(&times, &col(&|s| s.ddv), 1.0)?;
    let mut u2 = RatioReport::new("u2", config.clone());
    u2.push(RatioRow::new(0, 0, None, sup(col(&|s| s.da)), ddv_l1));
    let mut u3 = RatioReport::new("u3", config.clone());
    for (k, s) in samples.iter().enumerate() {
        for i in 0..2 {
            u3.push(RatioRow::new(2 * k + i, 0, None, s.dt_a[i], s.dv_norm[i]));
        }
    }
    let mut u4 = RatioReport::new("u4", config);
    let lhs = time_norm(&times, &col(&|s| s.dt_da), 2.0)?;
    let rhs = time_norm(&times, &col(&|s| s.v_norm), 2.0)? * ddv_l1
        + time_norm(&times, &col(&|s| s.delta_v), 2.0)?;
    u4.push(RatioRow::new(0, 0, None, lhs, rhs));
    Ok(DeltaReport { u1, u2, u3, u4 })
}

/// Closed-form flows used to exercise the Lagrangian identities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkFlow {
    /// `u = (sin y, 0)` carrying `a0 = 0.5 cos x + 0.2 cos 2y`.
    Shear,
    /// Decaying Taylor-Green vortex at unit viscosity with `a = 0`.
    TaylorGreen,
}

/// Exact states of `flow` on the `n x n` grid of `[0, 2pi)^2` at `t = k * spacing`.
pub fn benchmark_snapshots(
    flow: BenchmarkFlow,
    n: usize,
    t_end: f64,
    spacing: f64,
) -> Result<Vec<StateSnapshot>> {
    if !(spacing > 0.0 && t_end >= spacing) {
        return Err(Error::Invalid(format!(
            "need 0 < spacing <= t_end, got spacing {spacing}, t_end {t_end}"
        )));
    }
    let g = Grid::periodic(n)?;
    let count = (t_end / spacing).round() as usize;
    (0..=count)
        .map(|k| {
            let t = k as f64 * spacing;
            match flow {
                BenchmarkFlow::Shear => {
                    let a = SpectralField::from_fn(&g, |x, y| {
                        0.5 * (x - t * y.sin()).cos() + 0.2 * (2.0 * y).cos()
                    });
                    StateSnapshot::new(t, a, VectorField::from_fn(&g, |_, y| [y.sin(), 0.0]))
                }
                BenchmarkFlow::TaylorGreen => {
                    let e = (-2.0 * t).exp();
                    let u = VectorField::from_fn(&g, |x, y| {
                        [e * x.sin() * y.cos(), -e * x.cos() * y.sin()]
                    });
                    let mut s = StateSnapshot::new(t, SpectralField::zeros(&g), u)?;
                    s.grad_pi = VectorField::from_fn(&g, |x, y| {
                        [-0.5 * e * e * (2.0 * x).sin(), -0.5 * e * e * (2.0 * y).sin()]
                    });
                    Ok(s)
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(g: &Grid, times: &[f64], u: impl Fn(f64, f64, f64) -> [f64; 2]) -> Vec<StateSnapshot> {
        times
            .iter()
            .map(|&t| {
                let a = SpectralField::from_fn(g, |x, y| 0.3 * x.cos() * y.sin());
                StateSnapshot::new(t, a, VectorField::from_fn(g, |x, y| u(t, x, y))).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_velocity_is_identity() {
        let g = Grid::periodic(16).unwrap();
        let s = frames(&g, &[0.0, 0.5], |_, _, _| [0.0, 0.0]);
        let f = integrate_flow(&s, 0.1).unwrap();
        assert_eq!(f.displacement[1].max_coefficient(), 0.0);
        assert_eq!(f.inverse[1], MatrixField::identity(&g));
        let l = to_lagrangian(&s[1], &f).unwrap();
        assert!((&l.eta - &s[1].a).max_coefficient() < 1e-15);
        let d = check_div_identity(&s[1], &f).unwrap();
        assert_eq!(d.trace, 0.0);
    }

    #[test]
    fn uniform_translation() {
        let g = Grid::periodic(32).unwrap();
        let s = frames(&g, &[0.0, 0.25, 0.5], |_, _, _| [0.7, -0.2]);
        let f = integrate_flow(&s, 0.05).unwrap();
        let d = &f.displacement[2];
        let (lo, hi) = d.x.min_max();
        assert!((lo - 0.35).abs() < 1e-12 && (hi - 0.35).abs() < 1e-12);
        assert!(f.inverse[2].add(&MatrixField::identity(&g), -1.0).max_norm() < 1e-12);
    }

    #[test]
    fn shear_characteristics() {
        let g = Grid::periodic(64).unwrap();
        let s = frames(&g, &[0.0, 0.25, 0.5], |_, _, y| [y.sin(), 0.0]);
        let f = integrate_flow(&s, 0.01).unwrap();
        let expected = SpectralField::from_fn(&g, |_, y| -0.5 * y.cos()).to_physical();
        let err = f.inverse[2].entries[1]
            .iter()
            .zip(&expected)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6, "{err}");
        assert!(f.volume_defect(2) < 1e-10);
        assert!(f.inverse_defect(2) < 1e-12);
        let d = check_div_identity(&s[2], &f).unwrap();
        assert!(d.trace < 1e-8 && d.piola < 1e-8, "{d:?}");
    }

    #[test]
    fn time_must_match() {
        let g = Grid::periodic(16).unwrap();
        let s = frames(&g, &[0.0, 0.5], |_, _, _| [0.0, 0.0]);
        let f = integrate_flow(&s, 0.5).unwrap();
        let mut late = s[1].clone();
        late.t = 0.7;
        assert!(matches!(to_lagrangian(&late, &f), Err(Error::TimeRange(_))));
        assert!(integrate_flow(&s, 0.6).is_err());
    }

    #[test]
    fn nilpotent_series_stops() {
        let g = Grid::periodic(16).unwrap();
        let v: Vec<(f64, VectorField)> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&t| (t, VectorField::from_fn(&g, |_, y| [0.1 * y.sin(), 0.0])))
            .collect();
        let s = jacobian_series(&v, 1.0, 30).unwrap();
        assert_eq!(s.terms, 2);
        assert!(s.agreement < 1e-15);
        let m = integrated_gradient(&v, 1.0).unwrap();
        assert!(s.a.add(&MatrixField::identity(&g).add(&m, -1.0), -1.0).max_norm() < 1e-15);
    }

    #[test]
    fn large_gradient_diverges() {
        let g = Grid::periodic(16).unwrap();
        let v: Vec<(f64, VectorField)> = [0.0, 1.0]
            .iter()
            .map(|&t| (t, VectorField::from_fn(&g, |x, y| [3.0 * x.sin() * y.cos(), -3.0 * x.cos() * y.sin()])))
            .collect();
        assert!(matches!(jacobian_series(&v, 1.0, 60), Err(Error::Divergence(_))));
    }

    #[test]
    fn equal_trajectories_have_zero_deltas() {
        let g = Grid::periodic(16).unwrap();
        let v: Vec<(f64, VectorField)> = [0.0, 0.1, 0.2]
            .iter()
            .map(|&t| (t, VectorField::from_fn(&g, |x, y| [0.1 * y.sin(), 0.1 * (x + t).cos()])))
            .collect();
        let r = delta_estimates(&v, &v, 2.0, 40).unwrap();
        assert_eq!(r.u2.max(), 0.0);
        assert_eq!(r.u4.max(), 0.0);
        assert!(r.u1.is_valid() && r.u3.is_valid() && r.u1.max() > 0.0);
    }

    #[test]
    fn shear_benchmark_carries_a0() {
        let snaps = benchmark_snapshots(BenchmarkFlow::Shear, 32, 0.2, 0.1).unwrap();
        assert_eq!(snaps.len(), 3);
        let flow = integrate_flow(&snaps, 0.01).unwrap();
        let l = to_lagrangian(&snaps[2], &flow).unwrap();
        assert!(l.eta_residual(&snaps[0].a) < 1e-4);
        assert!(flow.volume_defect(2) < 1e-10);
    }
}
