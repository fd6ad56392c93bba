use serde::{Deserialize, Serialize};

use super::energy::{EnergyMonitor, EnergySeries};
use super::momentum::{momentum_step_with, pressure_of, MomentumOptions, MomentumStats, StateSnapshot};
use super::transport::{cfl_number, relative_divergence, transport_step, TransportScheme, CFL_LIMIT};
use super::viscosity::ViscosityLaw;
use crate::dyadic::DyadicLadder;
use crate::error::{Error, Result};
use crate::norms::{block_profile, block_profile_vector, BesovSpec, BlockAccumulator, BlockProfile};
use crate::spectral::{gradient, heat_propagate_vector, leray_project, SpectralField, VectorField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    pub viscosity: ViscosityLaw,
    pub scheme: TransportScheme,
    /// Pressure solves use the `Ṡ_m` coefficient splitting.
    pub split_m: Option<i32>,
    /// Lebesgue exponent of the critical diagnostics.
    pub p: f64,
    /// Stop once `Z(t)` exceeds this.
    pub budget: f64,
    /// Keep every `k`-th state; 0 keeps only the endpoints.
    pub snapshot_every: usize,
    pub diagnostics_every: usize,
    pub solver: MomentumOptions,
    /// Levels `m` at which `(1 + A)^3 |b - Ṡ_m b|` is logged.
    pub smallness_levels: Vec<i32>,
    /// Run the energy monitor from this time on (constant viscosity only).
    pub energy_t1: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            horizon: 0.1,
            viscosity: ViscosityLaw::Constant { mu: 1.0 },
            scheme: TransportScheme::SpectralRk3,
            split_m: None,
            p: 2.0,
            budget: 1e3,
            snapshot_every: 0,
            diagnostics_every: 1,
            solver: MomentumOptions::default(),
            smallness_levels: Vec::new(),
            energy_t1: None,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon = {} must be nonnegative", self.horizon)));
        }
        if !(self.p > 1.0 && self.p < 4.0) {
            return Err(Error::Exponent(format!("p = {} is not in (1, 4)", self.p)));
        }
        if !(self.budget > 0.0) {
            return Err(Error::Config(format!("budget = {} must be positive", self.budget)));
        }
        if self.diagnostics_every == 0 {
            return Err(Error::Config("diagnostics_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum StopReason {
    Horizon,
    Budget { t: f64, z: f64 },
    Cfl { t: f64, cfl: f64 },
    Solver { t: f64, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSample {
    pub t: f64,
    /// `|a|_{L~^inf_t(Ḃ^{2/p}_{p,1})}` of the mean-free part.
    pub a_norm: f64,
    /// `|ubar|_{L~^inf_t(Ḃ^{2/p-1}_{p,1})}`.
    pub z_sup: f64,
    /// `|ubar|_{L^1_t(Ḃ^{2/p+1}_{p,1})}`.
    pub z_dissipation: f64,
    /// `|grad Pi|_{L^1_t(Ḃ^{2/p-1}_{p,1})}`.
    pub z_pressure: f64,
    pub z: f64,
    /// Left side of the global bound: `a` in the inhomogeneous space plus the velocity and pressure norms of `u`.
    pub global_norm: f64,
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    pub divergence: f64,
    pub min_coefficient: f64,
    pub cfl: f64,
    pub solver_iterations: usize,
    /// `(m, sup_t (1 + A)^3 |b - Ṡ_m b|_{Ḃ^{2/p}_{p,1}})`.
    pub smallness: Vec<(i32, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub p: f64,
    pub kappa: f64,
    pub samples: Vec<DiagnosticsSample>,
}

impl DiagnosticsSeries {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn column(&self, f: impl Fn(&DiagnosticsSample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }

    pub fn last(&self) -> Option<&DiagnosticsSample> {
        self.samples.last()
    }

    /// All entries finite and nonnegative, cumulative ones nondecreasing.
    pub fn is_consistent(&self) -> bool {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        let entries = self.samples.iter().all(|s| {
            [s.a_norm, s.z_sup, s.z_dissipation, s.z_pressure, s.z, s.global_norm, s.e0, s.e1, s.e2]
                .into_iter()
                .all(ok)
        });
        let monotone = self.samples.windows(2).all(|w| {
            let slack = |x: f64| 1e-12 * x.abs().max(1.0);
            w[1].a_norm >= w[0].a_norm - slack(w[0].a_norm)
                && w[1].z >= w[0].z - slack(w[0].z)
                && w[1].z_dissipation >= w[0].z_dissipation
                && w[1].z_pressure >= w[0].z_pressure
        });
        entries && monotone
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t,a_norm,z_sup,z_dissipation,z_pressure,z,global_norm,e0,e1,e2,divergence,min_coefficient,cfl,solver_iterations",
        );
        if let Some(s) = self.samples.first() {
            for (m, _) in &s.smallness {
                out.push_str(&format!(",smallness_m{m}"));
            }
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                s.t,
                s.a_norm,
                s.z_sup,
                s.z_dissipation,
                s.z_pressure,
                s.z,
                s.global_norm,
                s.e0,
                s.e1,
                s.e2,
                s.divergence,
                s.min_coefficient,
                s.cfl,
                s.solver_iterations
            ));
            for (_, v) in &s.smallness {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<StateSnapshot>,
    pub diagnostics: DiagnosticsSeries,
    pub stop: StopReason,
    pub stats: MomentumStats,
    pub energy: Option<EnergySeries>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateSnapshot {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn completed(&self) -> bool {
        self.stop == StopReason::Horizon
    }
}

fn mean_free(u: &VectorField) -> VectorField {
    VectorField {
        x: u.x.without_mean(),
        y: u.y.without_mean(),
    }
}

/// Streaming `L~^inf` / `L^1` accumulations of the critical norms.
struct Accumulators {
    p: f64,
    a: BlockAccumulator,
    a_inhom: BlockAccumulator,
    ubar_sup: BlockAccumulator,
    ubar_l1: BlockAccumulator,
    u_sup: BlockAccumulator,
    u_l1: BlockAccumulator,
    pressure_l1: BlockAccumulator,
    smallness: Vec<(i32, f64)>,
    previous_ubar: Option<(f64, VectorField)>,
}

fn sup_norm(acc: &BlockAccumulator) -> f64 {
    acc.sup_profile().aggregate(1.0)
}

fn l1_norm(acc: &BlockAccumulator) -> f64 {
    acc.block_norms().map(|b| b.aggregate(1.0)).unwrap_or(0.0)
}

impl Accumulators {
    fn new(p: f64, levels: &[i32]) -> Self {
        let inf = f64::INFINITY;
        Accumulators {
            p,
            a: BlockAccumulator::new(inf),
            a_inhom: BlockAccumulator::new(inf),
            ubar_sup: BlockAccumulator::new(inf),
            ubar_l1: BlockAccumulator::new(1.0),
            u_sup: BlockAccumulator::new(inf),
            u_l1: BlockAccumulator::new(1.0),
            pressure_l1: BlockAccumulator::new(1.0),
            smallness: levels.iter().map(|m| (*m, 0.0)).collect(),
            previous_ubar: None,
        }
    }

    fn record(
        &mut self,
        state: &StateSnapshot,
        ubar: &VectorField,
        visc: &ViscosityLaw,
        ladder: &DyadicLadder,
    ) -> Result<DiagnosticsSample> {
        let p = self.p;
        let s = 2.0 / p;
        let raw_h = BesovSpec::homogeneous(0.0, p, 1.0)?;
        let raw_i = BesovSpec::inhomogeneous(0.0, p, 1.0)?;
        let t = state.t;

        let a0 = state.a.without_mean();
        let pa = block_profile(&a0, &raw_h, ladder)?.reweighted(s);
        self.a.push(t, &pa)?;
        self.a_inhom
            .push(t, &block_profile(&state.a, &raw_i, ladder)?.reweighted(s))?;

        let pb = block_profile_vector(&mean_free(ubar), &raw_h, ladder)?;
        self.ubar_sup.push(t, &pb.reweighted(s - 1.0))?;
        self.ubar_l1.push(t, &pb.reweighted(s + 1.0))?;
        let pu = block_profile_vector(&mean_free(&state.u), &raw_h, ladder)?;
        self.u_sup.push(t, &pu.reweighted(s - 1.0))?;
        self.u_l1.push(t, &pu.reweighted(s + 1.0))?;
        let pp = block_profile_vector(&mean_free(&state.grad_pi), &raw_h, ladder)?;
        self.pressure_l1.push(t, &pp.reweighted(s - 1.0))?;

        let a_norm = sup_norm(&self.a);
        if !self.smallness.is_empty() {
            let b = visc.b_field(&state.a);
            let spec = BesovSpec::homogeneous(s, p, 1.0)?;
            let growth = (1.0 + a_norm).powi(3);
            for (m, worst) in self.smallness.iter_mut() {
                let high = &b - &ladder.low_pass(&b, *m)?;
                let v: BlockProfile = block_profile(&high.without_mean(), &spec, ladder)?;
                *worst = worst.max(growth * v.aggregate(1.0));
            }
        }

        let z_sup = sup_norm(&self.ubar_sup);
        let z_dissipation = l1_norm(&self.ubar_l1);
        let z_pressure = l1_norm(&self.pressure_l1);
        let global_norm = sup_norm(&self.a_inhom) + sup_norm(&self.u_sup) + l1_norm(&self.u_l1) + z_pressure;

        let rho = state.density();
        let cell = state.a.grid().cell_area();
        let weighted = |v: &VectorField| {
            let (x, y) = (v.x.to_physical(), v.y.to_physical());
            rho.iter()
                .zip(x.iter().zip(&y))
                .map(|(r, (a, b))| r * (a * a + b * b))
                .sum::<f64>()
                * cell
        };
        let e0 = weighted(ubar);
        let (gx, gy) = (gradient(&ubar.x), gradient(&ubar.y));
        let e1 = gx.inner(&gx).re + gy.inner(&gy).re;
        let e2 = match &self.previous_ubar {
            Some((t0, prev)) if t > *t0 => weighted(&(ubar - prev).scale(1.0 / (t - t0))),
            _ => 0.0,
        };
        self.previous_ubar = Some((t, ubar.clone()));
        let (lo, _) = state.a.min_max();

        Ok(DiagnosticsSample {
            t,
            a_norm,
            z_sup,
            z_dissipation,
            z_pressure,
            z: z_sup + z_dissipation + z_pressure,
            global_norm,
            e0,
            e1,
            e2,
            divergence: relative_divergence(&state.u),
            min_coefficient: 1.0 + lo,
            cfl: 0.0,
            solver_iterations: 0,
            smallness: self.smallness.clone(),
        })
    }
}

/// Integrates the system from `(a0, u0)` with Strang splitting: half transport, momentum, half transport.
pub fn ns_integrate(
    config: &IntegratorConfig,
    a0: &SpectralField,
    u0: &VectorField,
) -> Result<Trajectory> {
    ns_integrate_observed(config, a0, u0, |_| Ok(()))
}

/// As [`ns_integrate`], handing every state (including the initial one) to `observe`.
pub fn ns_integrate_observed(
    config: &IntegratorConfig,
    a0: &SpectralField,
    u0: &VectorField,
    mut observe: impl FnMut(&StateSnapshot) -> Result<()>,
) -> Result<Trajectory> {
    config.validate()?;
    if a0.grid() != u0.grid() {
        return Err(Error::GridMismatch);
    }
    let (lo, _) = a0.min_max();
    let kappa = 1.0 + lo;
    if !(kappa > 0.0) {
        return Err(Error::Coefficient(kappa));
    }
    let visc = config.viscosity;
    visc.check(a0)?;
    let ladder = DyadicLadder::new(a0.grid())?;
    let u0 = leray_project(u0);
    let mut energy = match config.energy_t1 {
        Some(t1) => Some(EnergyMonitor::new(t1, &visc)?),
        None => None,
    };

    let mut state = StateSnapshot::new(0.0, a0.clone(), u0.clone())?;
    state.grad_pi = pressure_of(&state, &visc, &config.solver)?;
    let mu = visc.mu0();
    let ubar_of = |s: &StateSnapshot| &s.u - &heat_propagate_vector(&u0, mu, s.t);

    let mut acc = Accumulators::new(config.p, &config.smallness_levels);
    let mut series = DiagnosticsSeries {
        p: config.p,
        kappa,
        samples: Vec::new(),
    };
    let mut first = acc.record(&state, &ubar_of(&state), &visc, &ladder)?;
    first.cfl = cfl_number(&state.u, config.dt);
    series.samples.push(first);
    observe(&state)?;
    if let Some(m) = energy.as_mut() {
        m.push(&state)?;
    }

    let mut snapshots = vec![state.clone()];
    let mut stats = MomentumStats::default();
    let mut warm: Option<SpectralField> = None;
    let eps = 1e-12 * config.horizon.max(1.0);
    let mut step = 0usize;
    let mut stop = StopReason::Horizon;
    let mut iterations_since = 0usize;

    while state.t < config.horizon - eps {
        let h = config.dt.min(config.horizon - state.t);
        let cfl = cfl_number(&state.u, h);
        if cfl > CFL_LIMIT {
            stop = StopReason::Cfl { t: state.t, cfl };
            break;
        }
        let advanced = (|| -> Result<(StateSnapshot, MomentumStats, SpectralField)> {
            let a_half = transport_step(&state.a, &state.u, 0.5 * h, config.scheme)?;
            let mid = StateSnapshot {
                t: state.t,
                a: a_half,
                u: state.u.clone(),
                grad_pi: state.grad_pi.clone(),
            };
            let (mut next, st, pi) = momentum_step_with(&mid, &visc, h, &config.solver, warm.take())?;
            next.a = transport_step(&mid.a, &next.u, 0.5 * h, config.scheme)?;
            visc.check(&next.a)?;
            Ok((next, st, pi))
        })();
        let (next, st, pi) = match advanced {
            Ok(v) => v,
            Err(Error::Cfl(c)) => {
                stop = StopReason::Cfl { t: state.t, cfl: c };
                break;
            }
            Err(e) => {
                stop = StopReason::Solver {
                    t: state.t,
                    message: e.to_string(),
                };
                break;
            }
        };
        warm = Some(pi);
        stats.solves += st.solves;
        stats.iterations += st.iterations;
        stats.max_residual = stats.max_residual.max(st.max_residual);
        iterations_since += st.iterations;
        state = next;
        step += 1;

        observe(&state)?;
        if let Some(m) = energy.as_mut() {
            m.push(&state)?;
        }
        let at_end = state.t >= config.horizon - eps;
        if config.snapshot_every > 0 && step.is_multiple_of(config.snapshot_every) && !at_end {
            snapshots.push(state.clone());
        }
        if step.is_multiple_of(config.diagnostics_every) || at_end {
            let mut sample = acc.record(&state, &ubar_of(&state), &visc, &ladder)?;
            sample.cfl = cfl;
            sample.solver_iterations = iterations_since;
            iterations_since = 0;
            let z = sample.z;
            series.samples.push(sample);
            if z > config.budget {
                stop = StopReason::Budget { t: state.t, z };
                break;
            }
        }
    }
    if snapshots.last().map(|s| s.t) != Some(state.t) {
        snapshots.push(state);
    }
    Ok(Trajectory {
        snapshots,
        diagnostics: series,
        stop,
        stats,
        energy: energy.map(EnergyMonitor::finish),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn taylor_green(g: &Grid, decay: f64) -> VectorField {
        VectorField::from_fn(g, |x, y| [x.cos() * y.sin() * decay, -x.sin() * y.cos() * decay])
    }

    #[test]
    fn zero_velocity_freezes_everything() {
        let g = Grid::periodic(16).unwrap();
        let a0 = SpectralField::from_fn(&g, |x, y| 0.2 * x.sin() * y.cos());
        let cfg = IntegratorConfig {
            dt: 0.01,
            horizon: 0.05,
            ..IntegratorConfig::default()
        };
        let tr = ns_integrate(&cfg, &a0, &VectorField::zeros(&g)).unwrap();
        assert!(tr.completed());
        let last = tr.final_state();
        assert!((last.t - 0.05).abs() < 1e-15);
        assert_eq!((&last.a - &a0).max_coefficient(), 0.0);
        assert_eq!(last.u.max_coefficient(), 0.0);
        for s in &tr.diagnostics.samples {
            assert_eq!((s.z, s.e0, s.e1, s.e2), (0.0, 0.0, 0.0, 0.0));
        }
        assert!(tr.diagnostics.is_consistent());
    }

    #[test]
    fn taylor_green_is_heat_flow() {
        let g = Grid::periodic(32).unwrap();
        let mu = 0.1;
        let cfg = IntegratorConfig {
            dt: 0.01,
            horizon: 0.1,
            viscosity: ViscosityLaw::Constant { mu },
            snapshot_every: 5,
            ..IntegratorConfig::default()
        };
        let tr = ns_integrate(&cfg, &SpectralField::zeros(&g), &taylor_green(&g, 1.0)).unwrap();
        assert!(tr.completed());
        assert_eq!(tr.snapshots.len(), 3);
        let last = tr.final_state();
        let exact = taylor_green(&g, (-2.0 * mu * last.t).exp());
        assert!((&last.u - &exact).coefficient_norm() < 1e-10);
        let d = tr.diagnostics.last().unwrap();
        assert!(d.z_sup < 1e-9 && d.z_pressure > 0.0);
        assert!(tr.diagnostics.is_consistent());
    }

    #[test]
    fn budget_stops_the_run() {
        let g = Grid::periodic(16).unwrap();
        let cfg = IntegratorConfig {
            dt: 0.01,
            horizon: 1.0,
            budget: 1e-6,
            ..IntegratorConfig::default()
        };
        let tr = ns_integrate(&cfg, &SpectralField::zeros(&g), &taylor_green(&g, 1.0)).unwrap();
        assert!(matches!(tr.stop, StopReason::Budget { .. }));
    }

    #[test]
    fn cfl_stops_the_run() {
        let g = Grid::periodic(16).unwrap();
        let cfg = IntegratorConfig {
            dt: 0.5,
            horizon: 1.0,
            ..IntegratorConfig::default()
        };
        let tr = ns_integrate(&cfg, &SpectralField::zeros(&g), &taylor_green(&g, 1.0)).unwrap();
        assert!(matches!(tr.stop, StopReason::Cfl { .. }));
        assert_eq!(tr.snapshots.len(), 1);
    }

    #[test]
    fn rejects_degenerate_density() {
        let g = Grid::periodic(16).unwrap();
        let a0 = SpectralField::from_fn(&g, |x, _| 1.5 * x.cos());
        let r = ns_integrate(&IntegratorConfig::default(), &a0, &VectorField::zeros(&g));
        assert!(matches!(r, Err(Error::Coefficient(_))));
    }
}
