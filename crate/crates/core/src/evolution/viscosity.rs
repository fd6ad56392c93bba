use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

/// Viscosity as a function of `a`, written `mu(a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ViscosityLaw {
    Constant { mu: f64 },
    /// `mu0 + mu1 * a`.
    Affine { mu0: f64, mu1: f64 },
    /// `mu0 + mu1 * rho` with `rho = 1 / (1 + a)`.
    AffineDensity { mu0: f64, mu1: f64 },
    /// `mu0 * exp(k * a)`.
    Exponential { mu0: f64, k: f64 },
}

impl ViscosityLaw {
    pub fn mu(&self, a: f64) -> f64 {
        match *self {
            ViscosityLaw::Constant { mu } => mu,
            ViscosityLaw::Affine { mu0, mu1 } => mu0 + mu1 * a,
            ViscosityLaw::AffineDensity { mu0, mu1 } => mu0 + mu1 / (1.0 + a),
            ViscosityLaw::Exponential { mu0, k } => mu0 * (k * a).exp(),
        }
    }

    /// `mu(0)`, the part treated exactly.
    pub fn mu0(&self) -> f64 {
        self.mu(0.0)
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            ViscosityLaw::Constant { .. } => true,
            ViscosityLaw::Affine { mu1, .. } | ViscosityLaw::AffineDensity { mu1, .. } => mu1 == 0.0,
            ViscosityLaw::Exponential { k, .. } => k == 0.0,
        }
    }

    /// `b(a) = (1 + a) mu(a) - mu(0)`.
    pub fn b(&self, a: f64) -> f64 {
        (1.0 + a) * self.mu(a) - self.mu0()
    }

    /// `lambda(a) = integral_0^a mu(s) ds`.
    pub fn lambda(&self, a: f64) -> f64 {
        match *self {
            ViscosityLaw::Constant { mu } => mu * a,
            ViscosityLaw::Affine { mu0, mu1 } => mu0 * a + 0.5 * mu1 * a * a,
            ViscosityLaw::AffineDensity { mu0, mu1 } => mu0 * a + mu1 * a.ln_1p(),
            ViscosityLaw::Exponential { mu0, k } => {
                if k == 0.0 {
                    mu0 * a
                } else {
                    mu0 * (k * a).exp_m1() / k
                }
            }
        }
    }

    /// Pointwise `mu(a)` as a field; fails if it is not positive somewhere.
    pub fn mu_field(&self, a: &SpectralField) -> Result<SpectralField> {
        self.check(a)?;
        Ok(a.map_physical(|v| self.mu(v)))
    }

    pub fn b_field(&self, a: &SpectralField) -> SpectralField {
        a.map_physical(|v| self.b(v))
    }

    pub fn lambda_field(&self, a: &SpectralField) -> SpectralField {
        a.map_physical(|v| self.lambda(v))
    }

    /// Checks positivity on the values attained by `a` on the grid.
    pub fn check(&self, a: &SpectralField) -> Result<()> {
        let worst = a
            .to_physical()
            .into_iter()
            .map(|v| self.mu(v))
            .fold(f64::INFINITY, f64::min);
        if !(worst > 0.0) {
            return Err(Error::Viscosity(worst));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let law = ViscosityLaw::Affine { mu0: 1.0, mu1: 0.5 };
        assert_eq!(law.b(0.0), 0.0);
        assert!((law.b(0.2) - (1.2 * 1.1 - 1.0)).abs() < 1e-15);
        assert!((law.lambda(0.2) - (0.2 + 0.25 * 0.04)).abs() < 1e-15);
        let e = ViscosityLaw::Exponential { mu0: 2.0, k: 0.3 };
        let h = 1e-6;
        let deriv = (e.lambda(0.4 + h) - e.lambda(0.4 - h)) / (2.0 * h);
        assert!((deriv - e.mu(0.4)).abs() < 1e-8);
        let d = ViscosityLaw::AffineDensity { mu0: 0.5, mu1: 0.5 };
        let deriv = (d.lambda(0.4 + h) - d.lambda(0.4 - h)) / (2.0 * h);
        assert!((deriv - d.mu(0.4)).abs() < 1e-8);
        assert!(ViscosityLaw::Constant { mu: 0.1 }.is_constant());
    }
}
