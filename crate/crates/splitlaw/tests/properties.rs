//! Property-based invariants over randomly generated configurations.

use proptest::prelude::*;

use splitlaw::functionals::v_function;
use splitlaw::io::{read_parts, read_pattern, write_parts, write_pattern};
use splitlaw::measure::{Location, PointMeasure, Space};
use splitlaw::process::RngStream;
use splitlaw::testfn::TestFunction;
use splitlaw::thinning::{multi_split, split, thin, RetentionVector};

const K: usize = 4;

fn arb_measure() -> impl Strategy<Value = PointMeasure> {
    proptest::collection::vec(0u32..6, K).prop_map(|counts| {
        PointMeasure::from_atoms(
            counts.into_iter().enumerate().map(|(i, m)| (Location::Atom(i), m)),
        )
    })
}

fn arb_window_measure() -> impl Strategy<Value = PointMeasure> {
    proptest::collection::vec(((0.0..1.0f64, 0.0..1.0f64), 1u32..4), 0..6).prop_map(|pts| {
        PointMeasure::from_atoms(
            pts.into_iter().map(|((x, y), m)| (Location::Point(vec![x, y]), m)),
        )
    })
}

fn arb_values() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..3.0f64, K)
}

proptest! {
    #[test]
    fn canonical_form_is_sorted_and_positive(mu in arb_measure()) {
        let atoms = mu.atoms();
        for w in atoms.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
        }
        prop_assert!(atoms.iter().all(|(_, m)| *m > 0));
    }

    #[test]
    fn add_subtract_roundtrip(a in arb_measure(), b in arb_measure()) {
        let sum = a.add(&b);
        prop_assert_eq!(sum.total_count(), a.total_count() + b.total_count());
        prop_assert_eq!(sum.subtract(&b).unwrap(), a.clone());
        prop_assert_eq!(sum.subtract(&a).unwrap(), b.clone());
        prop_assert!(a.is_sub_of(&sum) && b.is_sub_of(&sum));
        // commutativity
        prop_assert_eq!(sum, b.add(&a));
    }

    #[test]
    fn subtract_fails_unless_subconfiguration(a in arb_measure(), b in arb_measure()) {
        prop_assert_eq!(a.subtract(&b).is_ok(), b.is_sub_of(&a));
    }

    #[test]
    fn integrate_is_linear_and_bounded(
        mu in arb_measure(),
        f in arb_values(),
        g in arb_values(),
        c in 0.0..5.0f64,
    ) {
        let tf = TestFunction::discrete(f.clone());
        let tg = TestFunction::discrete(g.clone());
        let combined = TestFunction::discrete(
            f.iter().zip(&g).map(|(a, b)| a + c * b).collect(),
        );
        let lhs = mu.integrate(&combined);
        let rhs = mu.integrate(&tf) + c * mu.integrate(&tg);
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        prop_assert!(mu.integrate(&tf) <= tf.bound() * mu.total_count() as f64 + 1e-12);
    }

    #[test]
    fn thinning_yields_subconfiguration(mu in arb_measure(), seed in 0u64..1000, q in 0.01..0.99f64) {
        let mut rng = RngStream::new(seed, 0);
        let kept = thin(&mu, q, &mut rng).unwrap();
        prop_assert!(kept.is_sub_of(&mu));
    }

    #[test]
    fn splitting_conserves_mass(mu in arb_measure(), seed in 0u64..1000, q in 0.01..0.99f64) {
        let mut rng = RngStream::new(seed, 0);
        let pair = split(&mu, q, &mut rng).unwrap();
        prop_assert_eq!(pair.retained.add(&pair.deleted), mu);
    }

    #[test]
    fn multi_splitting_conserves_mass(
        mu in arb_measure(),
        seed in 0u64..1000,
        raw in proptest::collection::vec(0.05..1.0f64, 2..5),
    ) {
        let total: f64 = raw.iter().sum();
        let rv = RetentionVector::new(raw.iter().map(|v| v / total).collect());
        prop_assume!(rv.is_ok());
        let rv = rv.unwrap();
        let mut rng = RngStream::new(seed, 0);
        let sv = multi_split(&mu, &rv, &mut rng).unwrap();
        prop_assert_eq!(sv.parts.len(), rv.len());
        prop_assert_eq!(sv.total(), mu);
    }

    #[test]
    fn v_function_between_f_and_g(
        f in arb_values(),
        g in arb_values(),
        q in 0.01..0.99f64,
    ) {
        // v = -log((1-q) e^{-g} + q e^{-f}) lies between min(f,g) and max(f,g)
        let tf = TestFunction::discrete(f.clone());
        let tg = TestFunction::discrete(g.clone());
        let v = v_function(&tf, &tg, q);
        for i in 0..K {
            let loc = Location::Atom(i);
            let (lo, hi) = (f[i].min(g[i]), f[i].max(g[i]));
            let vi = v.eval(&loc);
            prop_assert!(vi >= lo - 1e-12 && vi <= hi + 1e-12, "v = {vi} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn discrete_pattern_roundtrip(mu in arb_measure()) {
        let space = Space::Discrete { atoms: K };
        let mut buf = Vec::new();
        write_pattern(&mut buf, &space, &mu).unwrap();
        let (s2, m2) = read_pattern(buf.as_slice()).unwrap();
        prop_assert_eq!(s2, space);
        prop_assert_eq!(m2, mu);
    }

    #[test]
    fn window_parts_roundtrip(a in arb_window_measure(), b in arb_window_measure()) {
        let space = Space::Window(splitlaw::measure::Window::unit_square());
        let mut buf = Vec::new();
        write_parts(&mut buf, &space, &[a.clone(), b.clone()]).unwrap();
        let (s2, parts) = read_parts(buf.as_slice()).unwrap();
        prop_assert_eq!(s2, space);
        prop_assert_eq!(parts, vec![a, b]);
    }

    #[test]
    fn identical_seeds_reproduce_splits(mu in arb_measure(), seed in 0u64..1000) {
        let mut r1 = RngStream::new(seed, 3);
        let mut r2 = RngStream::new(seed, 3);
        prop_assert_eq!(
            split(&mu, 0.4, &mut r1).unwrap(),
            split(&mu, 0.4, &mut r2).unwrap()
        );
    }
}
