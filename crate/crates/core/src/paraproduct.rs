//! Bony paraproducts, remainder and the block commutators.
//!
//! Sums run over the finite ladder. On the torus `Ṡ_{j_min}` keeps only the
//! mean, so `Ṡ_{j-1} u = mean(u) + sum_{j' <= j-2} Δ̇_{j'} u` for every `j` in
//! range. The product of the two means is carried by the remainder, which
//! makes `uv = T_u v + T_v u + R(u, v)` exact.

use crate::dyadic::DyadicLadder;
use crate::error::{Error, Result};
use crate::spectral::{advect, divergence, gradient, SpectralField, VectorField};

/// Relative tolerance on `div u` accepted by [`transport_commutator`].
pub const SOLENOIDAL_TOLERANCE: f64 = 1e-10;

fn check(ladder: &DyadicLadder, fields: &[&SpectralField]) -> Result<()> {
    if fields.iter().any(|f| f.grid() != ladder.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Blocks of `u` together with the running low-pass sums `Ṡ_{j-1} u`.
struct Decomposed {
    mean: SpectralField,
    blocks: Vec<SpectralField>,
}

impl Decomposed {
    fn new(u: &SpectralField, ladder: &DyadicLadder) -> Result<Self> {
        Ok(Decomposed {
            mean: ladder.low_block(u)?,
            blocks: ladder.blocks(u)?.into_iter().map(|(_, b)| b).collect(),
        })
    }
}

/// `Ṡ_{j-1} u` for each ladder index: the mean plus blocks up to `j - 2`.
fn low_sums(d: &Decomposed) -> Vec<SpectralField> {
    let mut out = Vec::with_capacity(d.blocks.len());
    let mut acc = d.mean.clone();
    for i in 0..d.blocks.len() {
        if i >= 2 {
            acc += &d.blocks[i - 2];
        }
        out.push(acc.clone());
    }
    out
}

fn sum_of_products(
    pairs: Vec<(SpectralField, SpectralField)>,
    zero: &SpectralField,
) -> Result<SpectralField> {
    let nonzero: Vec<(&SpectralField, &SpectralField)> = pairs
        .iter()
        .filter(|(a, b)| a.max_coefficient() > 0.0 && b.max_coefficient() > 0.0)
        .map(|(a, b)| (a, b))
        .collect();
    if nonzero.is_empty() {
        return Ok(zero.clone());
    }
    SpectralField::product_sum(&nonzero)
}

/// `Ṫ_u v = sum_j Ṡ_{j-1} u Δ̇_j v`.
pub fn para_t(
    u: &SpectralField,
    v: &SpectralField,
    ladder: &DyadicLadder,
) -> Result<SpectralField> {
    check(ladder, &[u, v])?;
    let du = Decomposed::new(u, ladder)?;
    let dv = Decomposed::new(v, ladder)?;
    let lows = low_sums(&du);
    let pairs = lows.into_iter().zip(dv.blocks).collect();
    sum_of_products(pairs, &SpectralField::zeros(u.grid()))
}

/// `Ṫ'_v u = sum_j Δ̇_j u Ṡ_{j+2} v`, so that `Ṫ_u v + Ṫ'_v u = uv - mean(u) mean(v)`.
pub fn para_t_prime(
    v: &SpectralField,
    u: &SpectralField,
    ladder: &DyadicLadder,
) -> Result<SpectralField> {
    check(ladder, &[u, v])?;
    let du = Decomposed::new(u, ladder)?;
    let pairs = ladder
        .indices()
        .zip(du.blocks)
        .map(|(j, b)| Ok((b, ladder.low_pass(v, j + 2)?)))
        .collect::<Result<Vec<_>>>()?;
    sum_of_products(pairs, &SpectralField::zeros(u.grid()))
}

/// `Ṙ(u, v) = sum_j Δ̇_j u (Δ̇_{j-1} + Δ̇_j + Δ̇_{j+1}) v`, plus the product of the means.
pub fn remainder_r(
    u: &SpectralField,
    v: &SpectralField,
    ladder: &DyadicLadder,
) -> Result<SpectralField> {
    check(ladder, &[u, v])?;
    let du = Decomposed::new(u, ladder)?;
    let dv = Decomposed::new(v, ladder)?;
    let m = dv.blocks.len();
    let mut pairs = Vec::with_capacity(m + 1);
    pairs.push((du.mean.clone(), dv.mean.clone()));
    for (i, b) in du.blocks.iter().enumerate() {
        let mut wide = dv.blocks[i].clone();
        if i >= 1 {
            wide += &dv.blocks[i - 1];
        }
        if i + 1 < m {
            wide += &dv.blocks[i + 1];
        }
        pairs.push((b.clone(), wide));
    }
    sum_of_products(pairs, &SpectralField::zeros(u.grid()))
}

/// Single term `Ṡ_{j-1} u Δ̇_j v`.
pub fn para_term(
    u: &SpectralField,
    v: &SpectralField,
    j: i32,
    ladder: &DyadicLadder,
) -> Result<SpectralField> {
    check(ladder, &[u, v])?;
    let low = ladder.low_pass(u, j - 1)?;
    low.product(&ladder.block(v, j)?)
}

/// `[Δ̇_j, a] f = Δ̇_j(a f) - a Δ̇_j f`.
pub fn commutator_block(
    a: &SpectralField,
    f: &VectorField,
    j: i32,
    ladder: &DyadicLadder,
) -> Result<VectorField> {
    check(ladder, &[a, &f.x, &f.y])?;
    let af = f.times(a)?;
    let lhs = ladder.block_vector(&af, j)?;
    let rhs = ladder.block_vector(f, j)?.times(a)?;
    Ok(&lhs - &rhs)
}

/// `[u . grad, Δ̇_j] a = u . grad(Δ̇_j a) - Δ̇_j(u . grad a)` for solenoidal `u`.
pub fn transport_commutator(
    u: &VectorField,
    a: &SpectralField,
    j: i32,
    ladder: &DyadicLadder,
) -> Result<SpectralField> {
    check(ladder, &[a, &u.x, &u.y])?;
    check_solenoidal(u)?;
    let first = advect(u, &ladder.block(a, j)?)?;
    let second = ladder.block(&advect(u, a)?, j)?;
    Ok(&first - &second)
}

/// Rejects `u` whose divergence exceeds the tolerance relative to its gradient.
pub fn check_solenoidal(u: &VectorField) -> Result<()> {
    let div = divergence(u).max_coefficient();
    let scale = gradient(&u.x)
        .max_coefficient()
        .max(gradient(&u.y).max_coefficient())
        .max(1.0);
    if div > SOLENOIDAL_TOLERANCE * scale {
        return Err(Error::NotSolenoidal(div));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use num_complex::Complex64;

    fn sample(g: &Grid, shift: f64) -> SpectralField {
        SpectralField::from_fn(g, |x, y| {
            0.3 + (x + shift).sin() * (2.0 * y).cos()
                + 0.5 * (5.0 * x - 3.0 * y + shift).sin()
                + 0.2 * (11.0 * y + 7.0 * x).cos()
        })
    }

    #[test]
    fn bony_identity() {
        let g = Grid::periodic(32).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let (u, v) = (sample(&g, 0.0), sample(&g, 1.3));
        let uv = u.product(&v).unwrap();
        let t1 = para_t(&u, &v, &l).unwrap();
        let t2 = para_t(&v, &u, &l).unwrap();
        let r = remainder_r(&u, &v, &l).unwrap();
        let mut sum = &t1 + &t2;
        sum += &r;
        assert!((&sum - &uv).max_coefficient() < 1e-12);
        let r2 = remainder_r(&v, &u, &l).unwrap();
        assert!((&r - &r2).max_coefficient() < 1e-13);
    }

    #[test]
    fn para_with_constant() {
        let g = Grid::periodic(32).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let v = sample(&g, 0.4);
        let c = SpectralField::constant(&g, 2.5);
        let t = para_t(&c, &v, &l).unwrap();
        let expect = v.without_mean().scale(2.5);
        assert!((&t - &expect).max_coefficient() < 1e-13);
        let z = para_t(&v, &SpectralField::zeros(&g), &l).unwrap();
        assert_eq!(z.max_coefficient(), 0.0);
    }

    #[test]
    fn commutators_vanish_for_constants() {
        let g = Grid::periodic(32).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let f = VectorField::new(sample(&g, 0.1), sample(&g, 2.0)).unwrap();
        let c = SpectralField::constant(&g, -0.7);
        for j in l.indices() {
            assert!(commutator_block(&c, &f, j, &l).unwrap().max_coefficient() < 1e-13);
        }
        let u = VectorField::new(
            SpectralField::constant(&g, 1.0),
            SpectralField::constant(&g, -2.0),
        )
        .unwrap();
        let a = sample(&g, 0.0);
        for j in l.indices() {
            assert!(
                transport_commutator(&u, &a, j, &l)
                    .unwrap()
                    .max_coefficient()
                    < 1e-12
            );
        }
    }

    #[test]
    fn transport_commutator_rejects_compressible() {
        let g = Grid::periodic(16).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let u = VectorField::from_fn(&g, |x, _| [x.sin(), 0.0]);
        let a = sample(&g, 0.0);
        assert!(matches!(
            transport_commutator(&u, &a, 0, &l),
            Err(Error::NotSolenoidal(_))
        ));
    }

    #[test]
    fn separated_spectra_have_no_remainder() {
        let g = Grid::periodic(64).unwrap();
        let l = DyadicLadder::new(&g).unwrap();
        let u = SpectralField::single_mode(&g, 1, 0, Complex64::new(1.0, 0.0)).unwrap();
        let v = SpectralField::single_mode(&g, 20, 0, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(remainder_r(&u, &v, &l).unwrap().max_coefficient(), 0.0);
    }
}
