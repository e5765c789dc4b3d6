//! Property tests on randomly generated curves, fields and diffeomorphisms.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fracsob::check::rotate_rows;
use fracsob::curve::{l2_norm, reparametrize};
use fracsob::io;
use fracsob::metric::{metric, metric_symmetric, spray};
use fracsob::operator::DerivativeScheme;
use fracsob::symbol::{eval_symbol, sqrt_symbol};
use fracsob::{shapes, Diffeo, DiscreteCurve, LambdaSymbol, MetricConfig};

const N: usize = 128;

fn sample(seed: u64) -> (DiscreteCurve, DMatrix<f64>, DMatrix<f64>) {
    sample_on(N, seed)
}

fn sample_on(n: usize, seed: u64) -> (DiscreteCurve, DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = shapes::random_curve(&mut rng, n, 5);
    let h = shapes::random_field(&mut rng, n, 2, 6, 0.5, true);
    let k = shapes::random_field(&mut rng, n, 2, 6, 0.5, true);
    (DiscreteCurve::new(c).unwrap(), h, k)
}

/// Orders up to 1.6: beyond that the symbol amplifies rounding past these tolerances.
fn symbols() -> impl Strategy<Value = LambdaSymbol> {
    prop_oneof![
        (0.0..2.0f64, 0.1..2.0f64).prop_map(|(a0, a1)| LambdaSymbol::constant_coefficient(vec![1.0 + a0, a1], 2).unwrap()),
        (0.1..2.0f64).prop_map(|a1| LambdaSymbol::scale_invariant(vec![1.0, a1], 2).unwrap()),
        (0.6..1.6f64, 0.2..2.0f64).prop_map(|(r, a0)| LambdaSymbol::bessel(r, a0, 2).unwrap()),
        (1.1..1.6f64, 0.2..2.0f64).prop_map(|(r, a0)| LambdaSymbol::two_term(r, a0, 1.0, 2).unwrap()),
    ]
}

/// θ + a sin(θ + b) + c cos(2θ) with |p'| < 1.
fn diffeos() -> impl Strategy<Value = Diffeo> {
    (-0.4..0.4f64, 0.0..6.0f64, -0.2..0.2f64)
        .prop_map(|(a, b, c)| Diffeo::from_fn(N, move |t| a * (t + b).sin() + c * (2.0 * t).cos()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metric_is_symmetric_and_positive(s in symbols(), seed in any::<u64>()) {
        let cfg = MetricConfig::new(s).unwrap();
        let (c, h, k) = sample(seed);
        let (ghk, gkh) = (metric(&cfg, &c, &h, &k).unwrap(), metric(&cfg, &c, &k, &h).unwrap());
        let (ghh, gkk) = (metric(&cfg, &c, &h, &h).unwrap(), metric(&cfg, &c, &k, &k).unwrap());
        prop_assert!(ghh > 0.0 && gkk > 0.0);
        prop_assert!((ghk - gkh).abs() <= 1e-10 * (ghh * gkk).sqrt());
        prop_assert!(ghk.abs() <= (ghh * gkk).sqrt() * (1.0 + 1e-12));
        let gs = metric_symmetric(&cfg, &c, &h, &k).unwrap();
        prop_assert!((gs - ghk).abs() <= 1e-9 * (ghh * gkk).sqrt());
    }

    #[test]
    fn metric_is_reparametrization_invariant(s in symbols(), phi in diffeos(), seed in any::<u64>()) {
        let cfg = MetricConfig::new(s).unwrap();
        let (c, h, k) = sample(seed);
        let g = metric(&cfg, &c, &h, &k).unwrap();
        let scale = (metric(&cfg, &c, &h, &h).unwrap() * metric(&cfg, &c, &k, &k).unwrap()).sqrt();
        let cp = c.reparametrized(&phi).unwrap();
        let gp = metric(&cfg, &cp, &reparametrize(&h, &phi).unwrap(), &reparametrize(&k, &phi).unwrap()).unwrap();
        prop_assert!((gp - g).abs() <= 1e-7 * scale, "{:e}", (gp - g).abs() / scale);
    }

    #[test]
    fn operator_commutes_with_grid_rotations(s in symbols(), shift in 0usize..N, seed in any::<u64>()) {
        let cfg = MetricConfig::new(s).unwrap();
        let (c, h, _) = sample(seed);
        let cr = DiscreteCurve::new(rotate_rows(c.samples(), shift)).unwrap();
        let lhs = cfg.apply(&cr, &rotate_rows(&h, shift)).unwrap();
        let rhs = rotate_rows(&cfg.apply(&c, &h).unwrap(), shift);
        prop_assert!((&lhs - &rhs).amax() <= 1e-9 * rhs.amax());
    }

    #[test]
    fn reparametrization_round_trip(phi in diffeos(), seed in any::<u64>()) {
        let (c, h, _) = sample(seed);
        let back = reparametrize(&reparametrize(&h, &phi).unwrap(), &phi.inverse()).unwrap();
        prop_assert!((&back - &h).amax() <= 1e-8 * h.amax());
        let cp = c.reparametrized(&phi).unwrap();
        prop_assert!((cp.length() - c.length()).abs() <= 1e-9 * c.length());
    }

    #[test]
    fn symbol_square_root_squares_back(s in symbols(), lambda in 0.2..50.0f64, m in -200i64..200) {
        let a = eval_symbol(&s, lambda, m).unwrap();
        let b = sqrt_symbol(&s, lambda, m).unwrap();
        prop_assert!((&b * &b - &a).amax() <= 1e-12 * a.amax());
        prop_assert!((&b - b.transpose()).amax() == 0.0 || (&b - b.transpose()).amax() <= 1e-14 * b.amax());
    }

    #[test]
    fn curve_json_round_trip_is_bit_exact(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = shapes::random_field(&mut rng, 2 * n, 3, 5, 1e3, true);
        prop_assert_eq!(io::curve_from_json(&io::curve_to_json(&c)).unwrap(), c);
    }

    #[test]
    fn scaling_rescales_metric(s in symbols(), scale in 0.3..3.0f64, seed in any::<u64>()) {
        // G_c(sh, sk) = s² G_c(h, k)
        let cfg = MetricConfig::new(s).unwrap();
        let (c, h, k) = sample(seed);
        let g = metric(&cfg, &c, &h, &k).unwrap();
        let gs = metric(&cfg, &c, &(&h * scale), &(&k * scale)).unwrap();
        let norm = (metric(&cfg, &c, &h, &h).unwrap() * metric(&cfg, &c, &k, &k).unwrap()).sqrt();
        prop_assert!((gs - scale * scale * g).abs() <= 1e-10 * scale * scale * norm);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn spray_is_quadratic(seed in any::<u64>(), t in prop_oneof![-2.0..-0.3f64, 0.3..2.0f64]) {
        let cfg = MetricConfig::new(LambdaSymbol::bessel(1.5, 1.0, 2).unwrap()).unwrap();
        let (c, h, _) = sample_on(64, seed);
        let (s1, _) = spray(&cfg, &c, &h, DerivativeScheme::Richardson).unwrap();
        let (st, _) = spray(&cfg, &c, &(&h * t), DerivativeScheme::Richardson).unwrap();
        let expected = s1.values() * (t * t);
        prop_assert!(l2_norm(&(st.values() - &expected)) <= 1e-7 * l2_norm(&expected), "{:e}", l2_norm(&(st.values() - &expected)) / l2_norm(&expected));
    }
}
