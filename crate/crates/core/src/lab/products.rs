use rayon::prelude::*;

use super::random::{gaussian_field, solenoidal_field, trial_seed, GaussianEnsemble};
use super::report::{block_envelope, RatioReport, RatioRow};
use super::LabSetup;
use crate::error::{Error, Result};
use crate::norms::{
    besov_norm, besov_norm_mean_free, besov_norm_vector, lp_norm, BesovSpec, BlockProfile,
};
use crate::paraproduct::transport_commutator;

/// `s1 <= 2/q`, `s2 <= 2 min(1/p, 1/q)` and `s1 + s2 > 2 max(0, 1/p + 1/q - 1)`.
pub fn product_admissible(p: f64, q: f64, s1: f64, s2: f64) -> bool {
    let (ip, iq) = (1.0 / p, 1.0 / q);
    p >= 1.0
        && q >= 1.0
        && s1 <= 2.0 * iq
        && s2 <= 2.0 * ip.min(iq)
        && s1 + s2 > 2.0 * (ip + iq - 1.0).max(0.0)
}

/// `|ab|_{Ḃ^{s1+s2-2/q}_{p,1}} / (|a|_{Ḃ^{s1}_{q,1}} |b|_{Ḃ^{s2}_{p,1}})` on broadband pairs.
///
/// The product is measured without its mean.
pub fn check_product_law(
    setup: &LabSetup,
    p: f64,
    q: f64,
    s1: f64,
    s2: f64,
    trials: usize,
) -> Result<RatioReport> {
    if !product_admissible(p, q, s1, s2) {
        return Err(Error::Exponent(format!(
            "product law needs s1 <= 2/q, s2 <= 2min(1/p,1/q), s1+s2 > 2max(0,1/p+1/q-1); \
             got p={p}, q={q}, s1={s1}, s2={s2}"
        )));
    }
    let ens = GaussianEnsemble::broadband(&setup.grid, 1.0);
    let sa = BesovSpec::homogeneous(s1, q, 1.0)?;
    let sb = BesovSpec::homogeneous(s2, p, 1.0)?;
    let sab = BesovSpec::homogeneous(s1 + s2 - 2.0 / q, p, 1.0)?;
    let ladder = &setup.ladder;
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(setup.seed, t);
            let a = gaussian_field(&setup.grid, &ens, seed);
            let b = gaussian_field(&setup.grid, &ens, seed ^ 1);
            let lhs = besov_norm_mean_free(&a.product(&b)?, &sab, ladder)?;
            let rhs = besov_norm(&a, &sa, ladder)?.0 * besov_norm(&b, &sb, ladder)?.0;
            Ok(RatioRow::new(t, seed, None, lhs, rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = RatioReport::new(
        "product",
        format!("p={p},q={q},s1={s1},s2={s2},n={}", setup.grid.n()),
    );
    rows.into_iter().for_each(|r| report.push(r));
    Ok(report)
}

fn commutator_admissible(p: f64, q: f64, s: f64) -> bool {
    let (ip, iq) = (1.0 / p, 1.0 / q);
    let iq_dual = 1.0 - iq;
    s > -1.0 - 2.0 * ip.min(iq_dual) && s <= 1.0 + 2.0 * ip.min(iq)
}

fn mixed_envelope(a: &BlockProfile, b: &BlockProfile) -> BlockProfile {
    let (ea, eb) = (block_envelope(a), block_envelope(b));
    BlockProfile {
        j_min: ea.j_min,
        values: ea
            .values
            .iter()
            .zip(&eb.values)
            .map(|(x, y)| 0.5 * (x + y))
            .collect(),
    }
}

/// Per-block `|[u.grad, Δ̇_j] a|_{L^q} / (d_j 2^{-js} |u|_{Ḃ^{2/p+1}_{p,1}} |a|_{Ḃ^s_{q,1}})`.
///
/// `d_j` is the mean of the block envelopes of `a` and `u`.
pub fn check_commutator(
    setup: &LabSetup,
    p: f64,
    q: f64,
    s: f64,
    trials: usize,
) -> Result<RatioReport> {
    if !(p >= 1.0 && q >= 1.0) || !commutator_admissible(p, q, s) {
        return Err(Error::Exponent(format!(
            "commutator estimate needs -1-2min(1/p,1/q') < s <= 1+2min(1/p,1/q); \
             got p={p}, q={q}, s={s}"
        )));
    }
    let ens = GaussianEnsemble::broadband(&setup.grid, 1.0);
    let su = BesovSpec::critical(p, 1.0)?;
    let sa = BesovSpec::homogeneous(s, q, 1.0)?;
    let ladder = &setup.ladder;
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(setup.seed, t);
            let u = solenoidal_field(&setup.grid, &ens, seed);
            let a = gaussian_field(&setup.grid, &ens, seed ^ 2);
            let (nu, pu) = besov_norm_vector(&u, &su, ladder)?;
            let (na, pa) = besov_norm(&a, &sa, ladder)?;
            let d = mixed_envelope(&pa, &pu);
            let mut rows = Vec::new();
            for (j, dj) in d.entries() {
                let lhs = lp_norm(&transport_commutator(&u, &a, j, ladder)?, q);
                let rhs = dj * 2f64.powf(-(j as f64) * s) * nu * na;
                rows.push(RatioRow::new(t, seed, Some(j), lhs, rhs));
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = RatioReport::new(
        "commutator",
        format!("p={p},q={q},s={s},n={}", setup.grid.n()),
    );
    per_trial.into_iter().flatten().for_each(|r| report.push(r));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissibility() {
        assert!(product_admissible(2.0, 2.0, 1.0, 0.0));
        assert!(!product_admissible(2.0, 2.0, 1.5, 0.0));
        assert!(!product_admissible(2.0, 2.0, 0.0, 0.0));
        assert!(commutator_admissible(2.0, 2.0, 1.0));
        assert!(!commutator_admissible(2.0, 2.0, 2.5));
    }

    #[test]
    fn algebra_ratios_bounded() {
        let s = LabSetup::new(32, std::f64::consts::TAU, 3).unwrap();
        let r = check_product_law(&s, 2.0, 2.0, 1.0, 1.0, 3).unwrap();
        assert!(r.is_valid() && r.max() > 0.0 && r.max() < 10.0, "{}", r.max());
        assert!(check_product_law(&s, 2.0, 2.0, 2.0, 1.0, 1).is_err());
    }

    #[test]
    fn commutator_ratios_finite() {
        let s = LabSetup::new(32, std::f64::consts::TAU, 4).unwrap();
        let r = check_commutator(&s, 2.0, 2.0, 1.0, 2).unwrap();
        assert!(r.is_valid() && r.max() > 0.0, "{}", r.max());
    }
}
