//! Measured-ratio experiments for the harmonic-analysis estimates.
//!
//! Each check draws seeded random fields, evaluates both sides of an
//! inequality and records `lhs / rhs`. Trials run in parallel; every trial
//! has its own seed derived from the setup seed.

mod bernstein;
mod elliptic;
mod envelope;
mod products;
mod random;
mod report;
mod transport;

pub use bernstein::{
    check_bernstein, check_heat_decay, default_heat_times, derivative_norm, fit_heat_decay,
    BernsteinReport, HeatFit, HeatReport, HEAT_WINDOW,
};
pub use elliptic::{
    check_elliptic_estimate, check_elliptic_sweep, check_ij_bound, check_ij_sweep, ij_regime,
    random_coefficient, EllipticEstimate, IjMeasurement, IjRegime, L2_SLACK,
};
pub use envelope::{envelope, fit_growth_envelope, EnvelopeFit};
pub use products::{check_commutator, check_product_law, product_admissible};
pub use random::{
    annulus_field, ball_field, gaussian_field, gaussian_vector, solenoidal_field, trial_seed,
    with_max, Band, GaussianEnsemble,
};
pub use report::{
    block_envelope, refinement_drift, RatioReport, RatioRow, REFINEMENT_TOLERANCE,
};
pub use transport::{
    check_transport_estimate, shear_benchmark, shear_initial_data, TransportEstimate,
};

use crate::dyadic::DyadicLadder;
use crate::error::Result;
use crate::spectral::Grid;

/// Lower end `(1 + sqrt 17) / 4` of the low-`p` regime.
pub fn lower_threshold() -> f64 {
    (1.0 + 17f64.sqrt()) / 4.0
}

/// Upper end `(5 + sqrt 17) / 2` of the high-`p` regime.
pub fn upper_threshold() -> f64 {
    (5.0 + 17f64.sqrt()) / 2.0
}

/// Grid, ladder and base seed shared by the trials of one experiment.
#[derive(Clone, Debug)]
pub struct LabSetup {
    pub grid: Grid,
    pub ladder: DyadicLadder,
    pub seed: u64,
}

impl LabSetup {
    pub fn new(n: usize, length: f64, seed: u64) -> Result<Self> {
        let grid = Grid::new(n, length)?;
        let ladder = DyadicLadder::new(&grid)?;
        Ok(LabSetup { grid, ladder, seed })
    }

    /// Same experiment at twice the resolution.
    pub fn refined(&self) -> Result<Self> {
        Self::new(2 * self.grid.n(), self.grid.length(), self.seed)
    }
}
