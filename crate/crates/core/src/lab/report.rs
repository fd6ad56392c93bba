use serde::{Deserialize, Serialize};

use crate::norms::BlockProfile;

/// Largest accepted relative change of a measured constant when `n` doubles.
pub const REFINEMENT_TOLERANCE: f64 = 0.5;

/// One measured `lhs / rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub trial: usize,
    pub seed: u64,
    /// Block index, or `None` for whole-field rows.
    pub j: Option<i32>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl RatioRow {
    /// `0/0` counts as ratio 0.
    pub fn new(trial: usize, seed: u64, j: Option<i32>, lhs: f64, rhs: f64) -> Self {
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        };
        RatioRow {
            trial,
            seed,
            j,
            lhs,
            rhs,
            ratio,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub check: String,
    pub config: String,
    pub rows: Vec<RatioRow>,
    /// Relative change of the max ratio against a run at twice the resolution.
    pub refinement_drift: Option<f64>,
}

impl RatioReport {
    pub fn new(check: impl Into<String>, config: impl Into<String>) -> Self {
        RatioReport {
            check: check.into(),
            config: config.into(),
            rows: Vec::new(),
            refinement_drift: None,
        }
    }

    pub fn push(&mut self, row: RatioRow) {
        self.rows.push(row);
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ratio).collect()
    }

    pub fn max(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn median(&self) -> f64 {
        let mut v = self.ratios();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    }

    /// Ratios finite and nonnegative, `rhs > 0` wherever `lhs > 0`.
    pub fn is_valid(&self) -> bool {
        self.rows.iter().all(|r| {
            r.ratio.is_finite() && r.ratio >= 0.0 && r.lhs >= 0.0 && (r.lhs == 0.0 || r.rhs > 0.0)
        })
    }

    /// Records the drift against `fine`, computed at twice the resolution.
    pub fn compare_refined(&mut self, fine: &RatioReport) -> f64 {
        let d = refinement_drift(self.max(), fine.max());
        self.refinement_drift = Some(d);
        d
    }

    pub fn refinement_stable(&self) -> Option<bool> {
        self.refinement_drift.map(|d| d <= REFINEMENT_TOLERANCE)
    }

    /// Rows as `config_id,seed,j,lhs,rhs,ratio`.
    pub fn to_csv(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str("config_id,seed,j,lhs,rhs,ratio\n");
        }
        let id = if self.config.is_empty() {
            self.check.clone()
        } else {
            format!("{}:{}", self.check, self.config)
        };
        for r in &self.rows {
            let j = r.j.map(|j| j.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{id},{},{j},{:.17e},{:.17e},{:.17e}\n",
                r.seed, r.lhs, r.rhs, r.ratio
            ));
        }
        out
    }
}

/// `|fine - coarse| / coarse`; zero when both vanish.
pub fn refinement_drift(coarse: f64, fine: f64) -> f64 {
    if coarse == 0.0 && fine == 0.0 {
        0.0
    } else if coarse == 0.0 {
        f64::INFINITY
    } else {
        (fine - coarse).abs() / coarse
    }
}

/// Slowly varying `l^1`-normalized envelope `d_j ∝ sum_j' 2^{-|j - j'|} c_j'` of a block profile.
pub fn block_envelope(profile: &BlockProfile) -> BlockProfile {
    let v = &profile.values;
    let mut d: Vec<f64> = (0..v.len())
        .map(|i| {
            v.iter()
                .enumerate()
                .map(|(k, c)| c * 0.5f64.powi((i as i32 - k as i32).abs()))
                .sum()
        })
        .collect();
    let total: f64 = d.iter().sum();
    if total > 0.0 {
        d.iter_mut().for_each(|x| *x /= total);
    }
    BlockProfile {
        j_min: profile.j_min,
        values: d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics() {
        let mut r = RatioReport::new("x", "p=2");
        for (i, v) in [3.0, 1.0, 2.0, 4.0].iter().enumerate() {
            r.push(RatioRow::new(i, 7, Some(i as i32), *v, 1.0));
        }
        assert_eq!(r.max(), 4.0);
        assert_eq!(r.median(), 2.5);
        assert!(r.is_valid());
        r.push(RatioRow::new(4, 7, None, 0.0, 0.0));
        assert!(r.is_valid());
        r.push(RatioRow::new(5, 7, None, 1.0, 0.0));
        assert!(!r.is_valid());
    }

    #[test]
    fn csv_layout() {
        let mut r = RatioReport::new("heat", "j=3");
        r.push(RatioRow::new(0, 11, None, 1.0, 2.0));
        let csv = r.to_csv(true);
        assert!(csv.starts_with("config_id,seed,j,lhs,rhs,ratio\nheat:j=3,11,,"));
    }

    #[test]
    fn envelope_is_normalized_and_positive() {
        let p = BlockProfile {
            j_min: -1,
            values: vec![0.0, 0.0, 1.0, 0.0],
        };
        let d = block_envelope(&p);
        assert!((d.values.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(d.values.iter().all(|x| *x > 0.0));
        assert!((d.values[1] - 2.0 * d.values[0]).abs() < 1e-15);
    }

    #[test]
    fn drift() {
        assert_eq!(refinement_drift(2.0, 3.0), 0.5);
        assert_eq!(refinement_drift(0.0, 0.0), 0.0);
    }
}
