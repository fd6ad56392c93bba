use std::path::Path;

use besovlab::dyadic::DyadicLadder;
use besovlab::evolution::StateSnapshot;
use besovlab::io::{decode_snapshot, encode_snapshot, evaluate, ExperimentConfig};
use besovlab::lab::{gaussian_field, gaussian_vector, GaussianEnsemble};
use besovlab::norms::{besov_norm, BesovSpec};
use besovlab::paraproduct::{para_t, remainder_r};
use besovlab::spectral::{divergence, heat_propagate, leray_project, Grid, SpectralField};
use proptest::prelude::*;

fn field(n: usize, slope: f64, seed: u64) -> (Grid, SpectralField) {
    let g = Grid::new(n, 2.0 + slope).unwrap();
    let f = gaussian_field(&g, &GaussianEnsemble::broadband(&g, slope), seed);
    (g, f)
}

fn sizes() -> impl Strategy<Value = usize> {
    prop_oneof![Just(16usize), Just(32), Just(64)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn blocks_reconstruct(n in sizes(), slope in 0.0f64..2.5, seed in any::<u64>()) {
        let (g, f) = field(n, slope, seed);
        let ladder = DyadicLadder::new(&g).unwrap();
        let mut sum = ladder.low_block(&f).unwrap();
        for (_, b) in ladder.blocks(&f).unwrap() {
            sum.axpy(1.0, &b);
        }
        prop_assert!((&sum - &f).max_coefficient() <= 1e-12 * f.max_coefficient());
    }

    #[test]
    fn bony_decomposition_is_exact(n in sizes(), seed in any::<u64>()) {
        let (g, u) = field(n, 1.0, seed);
        let v = gaussian_field(&g, &GaussianEnsemble::broadband(&g, 0.5), seed ^ 1);
        let ladder = DyadicLadder::new(&g).unwrap();
        let uv = u.product(&v).unwrap();
        let mut sum = para_t(&u, &v, &ladder).unwrap();
        sum.axpy(1.0, &para_t(&v, &u, &ladder).unwrap());
        sum.axpy(1.0, &remainder_r(&u, &v, &ladder).unwrap());
        prop_assert!((&sum - &uv).max_coefficient() <= 1e-12 * uv.max_coefficient());
    }

    #[test]
    fn leray_projection(n in sizes(), seed in any::<u64>()) {
        let g = Grid::periodic(n).unwrap();
        let u = gaussian_vector(&g, &GaussianEnsemble::broadband(&g, 1.0), seed);
        let p = leray_project(&u);
        let scale = u.max_coefficient();
        prop_assert!((&leray_project(&p) - &p).max_coefficient() <= 1e-13 * scale);
        prop_assert!(divergence(&p).max_coefficient() <= 1e-12 * scale * n as f64);
    }

    #[test]
    fn besov_norm_is_a_norm(
        seed in any::<u64>(),
        c in -5.0f64..5.0,
        s in -1.0f64..1.5,
        p in 1.0f64..4.0,
    ) {
        let (g, f) = field(32, 1.0, seed);
        let h = gaussian_field(&g, &GaussianEnsemble::broadband(&g, 1.0), seed ^ 7);
        let (f, h) = (f.without_mean(), h.without_mean());
        let ladder = DyadicLadder::new(&g).unwrap();
        let spec = BesovSpec::homogeneous(s, p, 1.0).unwrap();
        let norm = |x: &SpectralField| besov_norm(x, &spec, &ladder).unwrap().0;
        let (nf, nh) = (norm(&f), norm(&h));
        prop_assert!((norm(&f.scale(c)) - c.abs() * nf).abs() <= 1e-10 * (1.0 + nf));
        prop_assert!(norm(&(&f + &h)) <= (nf + nh) * (1.0 + 1e-12));
    }

    #[test]
    fn heat_semigroup(seed in any::<u64>(), t1 in 0.0f64..0.5, t2 in 0.0f64..0.5) {
        let (_, f) = field(32, 1.0, seed);
        let a = heat_propagate(&heat_propagate(&f, 1.0, t1), 1.0, t2);
        let b = heat_propagate(&f, 1.0, t1 + t2);
        prop_assert!((&a - &b).max_coefficient() <= 1e-13 * f.max_coefficient());
    }

    #[test]
    fn exponent_arithmetic(a in -50i32..50, b in 1i32..50, p in 1.0f64..8.0) {
        let v = evaluate(&format!("{a}/{b} + 2/p - ({b})"), p, 1.0).unwrap();
        prop_assert!((v - (a as f64 / b as f64 + 2.0 / p - b as f64)).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trip(
        n in prop_oneof![Just(8usize), Just(16)],
        length in 0.5f64..20.0,
        t in 0.0f64..100.0,
        seed in any::<u64>(),
    ) {
        let g = Grid::new(n, length).unwrap();
        let ens = GaussianEnsemble::broadband(&g, 1.0);
        let s = StateSnapshot::new(
            t,
            gaussian_field(&g, &ens, seed),
            leray_project(&gaussian_vector(&g, &ens, seed ^ 3)),
        )
        .unwrap();
        let bytes = encode_snapshot(&s).unwrap();
        let back = decode_snapshot(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(back.t, t);
        prop_assert_eq!(back.a.grid(), s.a.grid());
        prop_assert!((&back.u - &s.u).max_coefficient() <= 1e-15 * (1.0 + s.u.max_coefficient()));
    }

    #[test]
    fn config_text_round_trip(seed in 0u64..=i64::MAX as u64, trials in 1usize..100, p in 1.1f64..3.9) {
        let mut cfg = ExperimentConfig { seed, trials, ..Default::default() };
        cfg.exponents.p = p;
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
