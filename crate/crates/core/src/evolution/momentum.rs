use serde::{Deserialize, Serialize};

use super::transport::{cfl_number, CFL_LIMIT};
use super::viscosity::ViscosityLaw;
use crate::elliptic::{solve_pressure_with, SolveOptions, SolverMethod};
use crate::error::{Error, Result};
use crate::spectral::{
    advect_vector, dx, dy, heat_propagate_vector, laplacian, leray_project, SpectralField,
    VectorField,
};

/// The triple `(a, u, grad Pi)` at time `t`.
#[derive(Clone, Debug)]
pub struct StateSnapshot {
    pub t: f64,
    pub a: SpectralField,
    pub u: VectorField,
    pub grad_pi: VectorField,
}

impl StateSnapshot {
    pub fn new(t: f64, a: SpectralField, u: VectorField) -> Result<Self> {
        if a.grid() != u.grid() {
            return Err(Error::GridMismatch);
        }
        let grad_pi = VectorField::zeros(a.grid());
        Ok(StateSnapshot { t, a, u, grad_pi })
    }

    /// `rho = 1 / (1 + a)` at the grid nodes.
    pub fn density(&self) -> Vec<f64> {
        self.a.to_physical().into_iter().map(|v| 1.0 / (1.0 + v)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentumOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Solve the pressure with the `Ṡ_m` coefficient splitting.
    pub split_m: Option<i32>,
}

impl Default for MomentumOptions {
    fn default() -> Self {
        MomentumOptions {
            tol: 1e-11,
            max_iter: 500,
            split_m: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentumStats {
    pub solves: usize,
    pub iterations: usize,
    pub max_residual: f64,
}

/// Right-hand side of the momentum equation for a frozen `a`.
pub(crate) struct MomentumOperator<'a> {
    a: &'a SpectralField,
    one_plus: SpectralField,
    trivial_density: bool,
    visc: ViscosityLaw,
    mu_field: Option<SpectralField>,
    opts: MomentumOptions,
}

impl<'a> MomentumOperator<'a> {
    pub(crate) fn new(a: &'a SpectralField, visc: ViscosityLaw, opts: MomentumOptions) -> Result<Self> {
        let mu_field = if visc.is_constant() {
            None
        } else {
            Some(visc.mu_field(a)?)
        };
        visc.check(a)?;
        Ok(MomentumOperator {
            a,
            one_plus: &SpectralField::constant(a.grid(), 1.0) + a,
            trivial_density: a.max_coefficient() == 0.0,
            visc,
            mu_field,
            opts,
        })
    }

    fn weight(&self, v: &VectorField) -> Result<VectorField> {
        if self.trivial_density {
            Ok(v.clone())
        } else {
            v.times(&self.one_plus)
        }
    }

    /// `(1 + a) div(2 mu(a) M(u))`.
    fn viscous(&self, u: &VectorField) -> Result<VectorField> {
        match &self.mu_field {
            None => {
                let lap = u.map(laplacian).scale(self.visc.mu0());
                self.weight(&lap)
            }
            Some(mu) => {
                let (d1u1, d2u1, d1u2, d2u2) = (dx(&u.x), dy(&u.x), dx(&u.y), dy(&u.y));
                let s11 = d1u1.product(mu)?.scale(2.0);
                let s22 = d2u2.product(mu)?.scale(2.0);
                let s12 = (&d1u2 + &d2u1).product(mu)?;
                let div = VectorField {
                    x: &dx(&s11) + &dy(&s12),
                    y: &dx(&s12) + &dy(&s22),
                };
                self.weight(&div)
            }
        }
    }

    /// `F(u) = -u . grad u + (1 + a) div(2 mu(a) M(u))`.
    pub(crate) fn forcing(&self, u: &VectorField) -> Result<VectorField> {
        let conv = advect_vector(u, u)?;
        Ok(&self.viscous(u)? - &conv)
    }

    pub(crate) fn pressure(
        &self,
        forcing: &VectorField,
        warm: &mut Option<SpectralField>,
        stats: &mut MomentumStats,
    ) -> Result<VectorField> {
        let method = match self.opts.split_m {
            Some(m) => SolverMethod::Split(m),
            None => SolverMethod::Pcg,
        };
        let sol = solve_pressure_with(
            self.a,
            forcing,
            &SolveOptions {
                tol: self.opts.tol,
                max_iter: self.opts.max_iter,
                method,
                initial: warm.take(),
            },
        )?;
        stats.solves += 1;
        stats.iterations += sol.stats.iterations;
        stats.max_residual = stats.max_residual.max(sol.stats.residual);
        *warm = Some(sol.pi);
        Ok(sol.grad_pi)
    }

    /// Nonlinear remainder `P(F(u) - mu0 Delta u - (1 + a) grad Pi)`.
    pub(crate) fn remainder(
        &self,
        u: &VectorField,
        warm: &mut Option<SpectralField>,
        stats: &mut MomentumStats,
    ) -> Result<VectorField> {
        let f = self.forcing(u)?;
        let gp = self.pressure(&f, warm, stats)?;
        let mut r = &f - &self.weight(&gp)?;
        r.axpy(-self.visc.mu0(), &u.map(laplacian));
        Ok(leray_project(&r))
    }
}

/// One integrating-factor RK3 step of the momentum equation with `a` frozen.
pub fn momentum_step(
    state: &StateSnapshot,
    visc: &ViscosityLaw,
    dt: f64,
    split_m: Option<i32>,
) -> Result<StateSnapshot> {
    let opts = MomentumOptions {
        split_m,
        ..MomentumOptions::default()
    };
    Ok(momentum_step_with(state, visc, dt, &opts, None)?.0)
}

/// As [`momentum_step`], with solver options and an optional pressure warm start.
pub fn momentum_step_with(
    state: &StateSnapshot,
    visc: &ViscosityLaw,
    dt: f64,
    opts: &MomentumOptions,
    warm_pi: Option<SpectralField>,
) -> Result<(StateSnapshot, MomentumStats, SpectralField)> {
    let c = cfl_number(&state.u, dt);
    if c > CFL_LIMIT {
        return Err(Error::Cfl(c));
    }
    let op = MomentumOperator::new(&state.a, *visc, *opts)?;
    let mu0 = visc.mu0();
    let e = |v: &VectorField, tau: f64| heat_propagate_vector(v, mu0, tau);
    let mut stats = MomentumStats::default();
    let mut warm = warm_pi;
    let u0 = &state.u;
    let h = dt;

    let k1 = op.remainder(u0, &mut warm, &mut stats)?;
    let mut s2 = u0.clone();
    s2.axpy(h / 3.0, &k1);
    let u2 = e(&s2, h / 3.0);

    let k2 = op.remainder(&u2, &mut warm, &mut stats)?;
    let mut u3 = e(u0, 2.0 * h / 3.0);
    u3.axpy(2.0 * h / 3.0, &e(&k2, h / 3.0));

    let k3 = op.remainder(&u3, &mut warm, &mut stats)?;
    let mut s = u0.clone();
    s.axpy(h / 4.0, &k1);
    let mut next = e(&s, h);
    next.axpy(3.0 * h / 4.0, &e(&k3, h / 3.0));
    let next = leray_project(&next);

    let f = op.forcing(&next)?;
    let grad_pi = op.pressure(&f, &mut warm, &mut stats)?;
    let pi = warm.unwrap_or_else(|| SpectralField::zeros(state.a.grid()));
    Ok((
        StateSnapshot {
            t: state.t + dt,
            a: state.a.clone(),
            u: next,
            grad_pi,
        },
        stats,
        pi,
    ))
}

/// Pressure gradient of a state, recomputed from scratch.
pub fn pressure_of(
    state: &StateSnapshot,
    visc: &ViscosityLaw,
    opts: &MomentumOptions,
) -> Result<VectorField> {
    let op = MomentumOperator::new(&state.a, *visc, *opts)?;
    let f = op.forcing(&state.u)?;
    op.pressure(&f, &mut None, &mut MomentumStats::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn taylor_green(g: &Grid, decay: f64) -> VectorField {
        VectorField::from_fn(g, |x, y| [x.cos() * y.sin() * decay, -x.sin() * y.cos() * decay])
    }

    #[test]
    fn zero_velocity_stays_zero() {
        let g = Grid::periodic(16).unwrap();
        let a = SpectralField::from_fn(&g, |x, y| 0.3 * x.sin() * y.cos());
        let s = StateSnapshot::new(0.0, a, VectorField::zeros(&g)).unwrap();
        let visc = ViscosityLaw::Affine { mu0: 1.0, mu1: 0.5 };
        let n = momentum_step(&s, &visc, 0.01, None).unwrap();
        assert_eq!(n.u.max_coefficient(), 0.0);
        assert_eq!(n.grad_pi.max_coefficient(), 0.0);
    }

    #[test]
    fn taylor_green_decays_exactly() {
        let g = Grid::periodic(32).unwrap();
        let mu = 0.1;
        let visc = ViscosityLaw::Constant { mu };
        let mut s =
            StateSnapshot::new(0.0, SpectralField::zeros(&g), taylor_green(&g, 1.0)).unwrap();
        for _ in 0..10 {
            s = momentum_step(&s, &visc, 0.01, None).unwrap();
        }
        let exact = taylor_green(&g, (-2.0 * mu * s.t).exp());
        let err = (&s.u - &exact).coefficient_norm() / exact.coefficient_norm();
        assert!(err < 1e-10, "{err}");
        let d = (-4.0 * mu * s.t).exp();
        let gp = VectorField::from_fn(&g, |x, y| [0.5 * (2.0 * x).sin() * d, 0.5 * (2.0 * y).sin() * d]);
        let perr = (&s.grad_pi - &gp).coefficient_norm() / gp.coefficient_norm();
        assert!(perr < 1e-10, "{perr}");
    }

    #[test]
    fn rejects_large_steps() {
        let g = Grid::periodic(32).unwrap();
        let s = StateSnapshot::new(0.0, SpectralField::zeros(&g), taylor_green(&g, 1.0)).unwrap();
        let visc = ViscosityLaw::Constant { mu: 0.1 };
        assert!(matches!(momentum_step(&s, &visc, 1.0, None), Err(Error::Cfl(_))));
    }

    #[test]
    fn rejects_nonpositive_viscosity() {
        let g = Grid::periodic(16).unwrap();
        let a = SpectralField::from_fn(&g, |x, _| 0.5 * x.cos());
        let s = StateSnapshot::new(0.0, a, taylor_green(&g, 0.1)).unwrap();
        let visc = ViscosityLaw::Affine { mu0: 0.1, mu1: 1.0 };
        assert!(matches!(momentum_step(&s, &visc, 0.001, None), Err(Error::Viscosity(_))));
    }
}
