mod common;

use cfair::bounds::{check_nonlinear_condition, univariate_bound};
use cfair::polynomial::{build_design_matrix, Structure};
use cfair::{
    clamp_scores, compute_dtr, derive_bounds, fitting_error, minkowski_distance, normalize_coords,
    pairwise_audit, DtRVector, FairnessConfig, Geometry, NormOrder, SeparablePolynomial,
    SpatialPoint, UnivariatePolynomial,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn coords(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, k)
}

proptest! {
    #[test]
    fn triangle_inequality(k in 1usize..5, seed in any::<u64>(), p in prop::sample::select(vec![1.0, 2.0, 3.0, 60.0])) {
        let mut rng = common::rng(seed);
        let mut draw = || SpatialPoint::new((0..k).map(|_| rng.gen_range(-10.0..10.0)).collect()).unwrap();
        let (a, b, c) = (draw(), draw(), draw());
        let p = NormOrder::new(p).unwrap();
        let ab = minkowski_distance(&a, &b, p).unwrap();
        let bc = minkowski_distance(&b, &c, p).unwrap();
        let ac = minkowski_distance(&a, &c, p).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12 * (ab + bc));
        prop_assert!((ab - minkowski_distance(&b, &a, p).unwrap()).abs() == 0.0);
    }

    #[test]
    fn dtr_invariant_under_uniform_scaling(rows in prop::collection::vec(coords(2), 2..20), scale in 0.01..100.0f64) {
        let points: Vec<SpatialPoint> = rows.iter().map(|r| SpatialPoint::new(r.clone()).unwrap()).collect();
        let scaled: Vec<SpatialPoint> = rows
            .iter()
            .map(|r| SpatialPoint::new(r.iter().map(|v| v * scale).collect()).unwrap())
            .collect();
        let origin = SpatialPoint::new(vec![0.0, 0.0]).unwrap();
        let (Ok(a), Ok(b)) = (
            compute_dtr(&points, &origin, NormOrder::EUCLIDEAN),
            compute_dtr(&scaled, &origin, NormOrder::EUCLIDEAN),
        ) else {
            return Ok(());
        };
        for (x, y) in a.distances().iter().zip(b.distances()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!(a.distances().contains(&1.0));
        prop_assert!(a.distances().iter().all(|&d| (0.0..=1.0).contains(&d)));
    }

    #[test]
    fn normalization_inverts(rows in prop::collection::vec(coords(3), 1..30)) {
        let points: Vec<SpatialPoint> = rows.iter().map(|r| SpatialPoint::new(r.clone()).unwrap()).collect();
        let normalized = normalize_coords(&points).unwrap();
        let degenerate = normalized.transform().degenerate_dims();
        for (raw, norm) in points.iter().zip(normalized.points()) {
            prop_assert!(norm.coords().iter().all(|v| v.abs() <= 1.0));
            let back = normalized.transform().invert(norm.coords()).unwrap();
            for (d, (x, y)) in raw.coords().iter().zip(&back).enumerate() {
                if !degenerate.contains(&d) {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                }
            }
        }
    }

    #[test]
    fn audit_is_permutation_invariant(seed in any::<u64>(), m in 2usize..40, c in 1.0..4.0f64) {
        let mut rng = common::rng(seed);
        let distances: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let scores: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng);
        let geometry = |d: Vec<f64>| Geometry::Distance(DtRVector::from_normalized(d, NormOrder::EUCLIDEAN).unwrap());
        let a = pairwise_audit(&geometry(distances.clone()), &scores, c, None).unwrap();
        let permuted_d = order.iter().map(|&i| distances[i]).collect();
        let permuted_s: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        let b = pairwise_audit(&geometry(permuted_d), &permuted_s, c, None).unwrap();
        prop_assert_eq!(a.violated_pairs, b.violated_pairs);
        prop_assert_eq!(a.max_violation, b.max_violation);
        let g = geometry(distances);
        prop_assert_eq!(a.violated_pairs, common::brute_force_violations(&g, &scores, c));
    }

    #[test]
    fn audit_monotone_in_c(seed in any::<u64>(), m in 2usize..40) {
        let geometry = Geometry::Distance(common::uniform_dtr(m, seed));
        let mut rng = common::rng(seed ^ 1);
        let scores: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let mut last = u64::MAX;
        for c in [1.0, 1.5, 2.0, 4.0, 10.0, 100.0] {
            let v = pairwise_audit(&geometry, &scores, c, None).unwrap().violated_pairs;
            prop_assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn clamping_preserves_fairness(seed in any::<u64>(), m in 2usize..30, c in 1.0..3.0f64) {
        // c-Lipschitz in l by construction, and spills outside [0, 1] once c > 1
        let dtr = common::uniform_dtr(m, seed);
        let raw: Vec<f64> = dtr.distances().iter().map(|l| c * l - 0.5 * c + 0.5).collect();
        let geometry = Geometry::Distance(dtr);
        prop_assert_eq!(pairwise_audit(&geometry, &raw, c, None).unwrap().violated_pairs, 0);
        let clamped = clamp_scores(&raw);
        prop_assert_eq!(pairwise_audit(&geometry, &clamped, c, None).unwrap().violated_pairs, 0);
        for i in 0..m {
            for j in 0..m {
                prop_assert!((clamped[i] - clamped[j]).abs() <= (raw[i] - raw[j]).abs());
            }
        }
    }

    #[test]
    fn fitting_error_identity_and_permutation(values in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 1..40), seed in any::<u64>()) {
        let (a, b): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
        prop_assert_eq!(fitting_error(&a, &a).unwrap(), 0.0);
        let mut order: Vec<usize> = (0..a.len()).collect();
        order.shuffle(&mut common::rng(seed));
        let pa: Vec<f64> = order.iter().map(|&i| a[i]).collect();
        let pb: Vec<f64> = order.iter().map(|&i| b[i]).collect();
        let lhs = fitting_error(&a, &b).unwrap();
        prop_assert!((lhs - fitting_error(&pa, &pb).unwrap()).abs() <= 1e-15 * (1.0 + lhs));
    }

    #[test]
    fn separable_is_sum_of_components(k in 1usize..5, n in 1usize..8, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let intercept = rng.gen_range(-1.0..1.0);
        let components: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let poly = SeparablePolynomial::new(intercept, components.clone()).unwrap();
        let point: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let expected = common::naive_separable(intercept, &components, &point);
        prop_assert!((poly.eval(&point).unwrap() - expected).abs() < 1e-12);

        // design-matrix product reproduces pointwise evaluation
        let design = build_design_matrix(std::slice::from_ref(&point), n, Structure::Separable { dim: k }).unwrap();
        let flat: Vec<f64> = std::iter::once(intercept).chain(components.iter().flatten().copied()).collect();
        prop_assert!((design.apply(&flat).unwrap()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn univariate_design_matches_eval(n in 1usize..20, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let coefficients: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xs: Vec<[f64; 1]> = (0..10).map(|_| [rng.gen_range(-1.0..=1.0)]).collect();
        let design = build_design_matrix(&xs, n, Structure::Univariate).unwrap();
        let poly = UnivariatePolynomial::new(coefficients.clone()).unwrap();
        for (x, v) in xs.iter().zip(design.apply(&coefficients).unwrap()) {
            prop_assert!((poly.eval(x[0]) - v).abs() < 1e-12);
            prop_assert!((common::naive_univariate(&coefficients, x[0]) - v).abs() < 1e-12);
        }
    }
}

#[test]
fn scaled_monomials_are_c_fair() {
    let mut rng = common::rng(11);
    for n in 1..=20 {
        for c in [1.0, 10.0, 100.0] {
            let poly = UnivariatePolynomial::scaled_monomial(c, n).unwrap();
            for _ in 0..2_000 {
                let (x, y): (f64, f64) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
                assert!(
                    (poly.eval(x) - poly.eval(y)).abs() <= c * (x - y).abs() * (1.0 + 1e-12) + 1e-15,
                    "n={n} c={c} x={x} y={y}"
                );
            }
        }
    }
}

#[test]
fn linearized_bounds_are_tight() {
    for n in 1..=25 {
        for c in [1.0, 3.0, 25.0] {
            let mut coefficients = vec![0.0];
            coefficients.extend((1..=n).map(|i| univariate_bound(i, n, c)));
            let check = check_nonlinear_condition(&UnivariatePolynomial::new(coefficients).unwrap(), c);
            assert!(check.satisfied);
            assert!(check.slack.abs() <= 1e-9, "n={n} c={c} slack={}", check.slack);
        }
    }
}

/// Draws coefficient vectors inside the derived box and checks the Lipschitz
/// condition on random pairs from the normalized domain with an independent
/// evaluator and norm.
fn monte_carlo_bounds(config: FairnessConfig, vectors: usize, pairs: usize, seed: u64) {
    let bounds = derive_bounds(&config);
    let (k, n, c, p) = (config.dim(), config.degree(), config.c(), config.p().value());
    let mut rng = common::rng(seed);
    let lo = if config.mode() == cfair::Mode::Distance { 0.0 } else { -1.0 };
    let pair_set: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs)
        .map(|_| {
            let a: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..=1.0)).collect();
            let b: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..=1.0)).collect();
            (a, b)
        })
        .collect();
    let distances: Vec<f64> = pair_set.iter().map(|(a, b)| common::naive_pnorm(a, b, p)).collect();
    for _ in 0..vectors {
        let components: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                (1..=n)
                    .map(|j| {
                        let b = bounds.upper()[1 + i * n + j - 1];
                        // push mass onto the box corners too
                        match rng.gen_range(0..4) {
                            0 => b,
                            1 => -b,
                            _ => rng.gen_range(-b..=b),
                        }
                    })
                    .collect()
            })
            .collect();
        for ((a, b), d) in pair_set.iter().zip(&distances) {
            let gap = (common::naive_separable(0.3, &components, a)
                - common::naive_separable(0.3, &components, b))
            .abs();
            assert!(
                gap <= c * d + 1e-12,
                "config {config:?}: gap {gap} > {c} * {d} for {a:?} {b:?}"
            );
        }
    }
}

#[test]
fn bounds_imply_fairness_distance_mode() {
    for (n, c) in [(1, 1.0), (2, 1.0), (5, 5.0), (12, 1.0), (20, 25.0)] {
        monte_carlo_bounds(FairnessConfig::distance(c, n).unwrap(), 10_000, 1_000, n as u64);
    }
}

#[test]
fn bounds_imply_fairness_zone_mode() {
    for (k, p, n, c) in [
        (2, 2.0, 1, 1.0),
        (3, 2.0, 1, 2.0),
        (4, 1.0, 1, 1.0),
        (3, 3.0, 1, 1.0),
        (2, 1.5, 4, 1.0),
        (3, 2.0, 6, 5.0),
        (2, 3.0, 10, 1.0),
    ] {
        let config = FairnessConfig::zone(c, n, k, NormOrder::new(p).unwrap()).unwrap();
        monte_carlo_bounds(config, 10_000, 1_000, (k * 100 + n) as u64);
    }
}

/// `n^(m-2) sum a_i^m / x_i >= (sum a_i)^m / sum x_i`.
#[test]
fn generalized_titu_lemma() {
    let mut rng = common::rng(2024);
    let mut counterexamples = 0;
    for _ in 0..10_000 {
        let power: i32 = rng.gen_range(2..=4);
        let len = rng.gen_range(2..=10);
        let a: Vec<f64> = (0..len).map(|_| rng.gen_range(f64::MIN_POSITIVE..=10.0)).collect();
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(f64::MIN_POSITIVE..=10.0)).collect();
        let lhs = (len as f64).powi(power - 2)
            * a.iter().zip(&x).map(|(a, x)| a.powi(power) / x).sum::<f64>();
        let rhs = a.iter().sum::<f64>().powi(power) / x.iter().sum::<f64>();
        if lhs < rhs * (1.0 - 1e-12) {
            counterexamples += 1;
        }
    }
    assert_eq!(counterexamples, 0);
}

proptest! {
    #[test]
    fn bounds_scale_linearly_in_c(c in 1.0..50.0f64, n in 1usize..20, k in 1usize..5, p in 1.0..4.0f64) {
        let p = NormOrder::new(p).unwrap();
        let single = derive_bounds(&FairnessConfig::zone(c, n, k, p).unwrap());
        let double = derive_bounds(&FairnessConfig::zone(2.0 * c, n, k, p).unwrap());
        prop_assert_eq!(single.variant(), double.variant());
        for (a, b) in single.upper()[1..].iter().zip(&double.upper()[1..]) {
            prop_assert!((2.0 * a - b).abs() <= 1e-14 * b);
        }
        prop_assert!(single.upper()[0].is_infinite() && single.lower()[0].is_infinite());
    }
}
