//! Experiment configuration in TOML.
//!
//! ```toml
//! seed = 7
//! trials = 20
//!
//! [grid]
//! n = 64
//! length = 6.283185307179586
//!
//! [exponents]
//! p = 2.0
//! q = 2.0
//! s = ["2/p-1", 0.5]
//!
//! [initial]
//! kind = "taylor-green"
//!
//! [simulation]
//! dt = 0.001
//! horizon = 0.1
//! viscosity = { law = "constant", mu = 1.0 }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::expr::Exponent;
use crate::error::{Error, Result};
use crate::evolution::IntegratorConfig;
use crate::lab::{solenoidal_field, with_max, GaussianEnsemble, REFINEMENT_TOLERANCE};
use crate::lab::{gaussian_field, L2_SLACK};
use crate::spectral::{Grid, SpectralField, VectorField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 64,
            length: std::f64::consts::TAU,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentConfig {
    pub p: f64,
    pub q: f64,
    /// Regularity indices, numeric or symbolic in `p` and `q`.
    pub s: Vec<Exponent>,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        ExponentConfig {
            p: 2.0,
            q: 2.0,
            s: vec![Exponent::Symbolic("2/p-1".into())],
        }
    }
}

impl ExponentConfig {
    pub fn resolved_s(&self) -> Result<Vec<f64>> {
        self.s.iter().map(|e| e.resolve(self.p, self.q)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// `a = 0`, `u = (sin x cos y, -cos x sin y)` scaled by `u_amplitude`.
    TaylorGreen,
    /// Seeded broadband `a` and solenoidal `u`.
    Random,
    /// `a = 0.5 cos x + 0.2 cos 2y`, `u = (sin y, 0)` scaled by `u_amplitude`.
    Shear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    /// Largest `|a0|`; must stay below 1.
    pub a_amplitude: f64,
    pub u_amplitude: f64,
    /// Spectral decay `|k|^{-slope}` of random data.
    pub slope: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            kind: InitialKind::TaylorGreen,
            a_amplitude: 0.0,
            u_amplitude: 1.0,
            slope: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Accepted relative change of a measured constant when `n` doubles.
    pub refinement: f64,
    /// Slack on the `L^2` pressure bound.
    pub l2_slack: f64,
    /// Largest accepted `|det D_y X - 1|`.
    pub volume: f64,
    /// Largest accepted relative residual of the divergence identity.
    pub div_identity: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            refinement: REFINEMENT_TOLERANCE,
            l2_slack: L2_SLACK,
            volume: 1e-6,
            div_identity: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub grid: GridConfig,
    pub exponents: ExponentConfig,
    pub initial: InitialConfig,
    pub tolerances: ToleranceConfig,
    /// Time stepping, viscosity law, splitting index and budget.
    pub simulation: IntegratorConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            trials: 20,
            grid: GridConfig::default(),
            exponents: ExponentConfig::default(),
            initial: InitialConfig::default(),
            tolerances: ToleranceConfig::default(),
            simulation: IntegratorConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid.n, self.grid.length)?;
        for (name, v) in [("p", self.exponents.p), ("q", self.exponents.q)] {
            if !(v >= 1.0) {
                return Err(Error::Exponent(format!("{name} = {v} must be >= 1")));
            }
        }
        self.exponents.resolved_s()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        let amp = self.initial.a_amplitude;
        if !(0.0..1.0).contains(&amp) {
            return Err(Error::Config(format!("a_amplitude = {amp} must lie in [0, 1)")));
        }
        if !(self.initial.u_amplitude >= 0.0 && self.initial.u_amplitude.is_finite()) {
            return Err(Error::Config("u_amplitude must be nonnegative".into()));
        }
        let t = &self.tolerances;
        if [t.refinement, t.l2_slack, t.volume, t.div_identity]
            .iter()
            .any(|v| !(*v > 0.0))
        {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        self.integrator().validate()
    }

    /// Integrator settings with the experiment's `p`.
    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            p: self.exponents.p,
            ..self.simulation.clone()
        }
    }

    pub fn make_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.length)
    }

    /// Initial `(a0, u0)` on the configured grid.
    pub fn initial_data(&self) -> Result<(SpectralField, VectorField)> {
        let g = self.make_grid()?;
        let init = &self.initial;
        let w = std::f64::consts::TAU / g.length();
        Ok(match init.kind {
            InitialKind::TaylorGreen => (
                SpectralField::zeros(&g),
                VectorField::from_fn(&g, |x, y| {
                    let (x, y) = (w * x, w * y);
                    [
                        init.u_amplitude * x.sin() * y.cos(),
                        -init.u_amplitude * x.cos() * y.sin(),
                    ]
                }),
            ),
            InitialKind::Shear => (
                SpectralField::from_fn(&g, |x, y| {
                    0.5 * (w * x).cos() + 0.2 * (2.0 * w * y).cos()
                }),
                VectorField::from_fn(&g, |_, y| [init.u_amplitude * (w * y).sin(), 0.0]),
            ),
            InitialKind::Random => {
                let ens = GaussianEnsemble::broadband(&g, init.slope);
                let a = if init.a_amplitude > 0.0 {
                    with_max(&gaussian_field(&g, &ens, self.seed), init.a_amplitude)?
                } else {
                    SpectralField::zeros(&g)
                };
                let u = solenoidal_field(&g, &ens, self.seed ^ 0x5eed);
                let umax = u.magnitude_physical().into_iter().fold(0.0, f64::max);
                let u = if umax > 0.0 {
                    u.scale(init.u_amplitude / umax)
                } else {
                    u
                };
                (a, u)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::ViscosityLaw;

    #[test]
    fn round_trips_through_text() {
        let mut cfg = ExperimentConfig { seed: 99, ..Default::default() };
        cfg.exponents.s = vec![Exponent::Symbolic("2/p+1".into()), Exponent::Value(0.1)];
        cfg.simulation.viscosity = ViscosityLaw::Exponential { mu0: 1.0, k: 0.3 };
        cfg.simulation.split_m = Some(3);
        cfg.simulation.energy_t1 = Some(0.05);
        cfg.simulation.dt = 0.1 + 0.2;
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_files_use_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 3\n[grid]\nn = 32\n[exponents]\np = 3.0\ns = [\"2/p-1\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.grid.length, std::f64::consts::TAU);
        assert_eq!(cfg.exponents.resolved_s().unwrap(), vec![2.0 / 3.0 - 1.0]);
        assert_eq!(cfg.integrator().p, 3.0);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[grid]\nn = 12\n",
            "trials = 0\n",
            "[exponents]\ns = [\"2/x\"]\n",
            "[initial]\na_amplitude = 1.5\n",
            "[simulation]\ndt = -1.0\n",
            "bogus = 1\n",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn random_data_respects_amplitudes() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.n = 32;
        cfg.initial.kind = InitialKind::Random;
        cfg.initial.a_amplitude = 0.4;
        cfg.initial.u_amplitude = 0.2;
        let (a, u) = cfg.initial_data().unwrap();
        let (lo, hi) = a.min_max();
        assert!((lo.abs().max(hi.abs()) - 0.4).abs() < 1e-12);
        let umax = u.magnitude_physical().into_iter().fold(0.0, f64::max);
        assert!((umax - 0.2).abs() < 1e-12);
    }
}
