mod common;

use emo_core::network::laplacian;
use emo_core::problem::{probe_convexity, split_supply, stack, ConvexSet, EmoProblem, QuadraticL1};
use emo_core::projection::{merit, project};
use emo_core::telemetry::{read_csv, write_csv};
use emo_core::{CommGraph, Sample};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn set_and_points(seed: u64) -> (ConvexSet, DVector<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = common::random_set(&mut rng, true);
    let x = common::random_point(&mut rng, set.dim(), 10.0);
    let y = common::random_point(&mut rng, set.dim(), 10.0);
    (set, x, y)
}

fn p(set: &ConvexSet, u: &DVector<f64>) -> DVector<f64> {
    project(set, u).unwrap().point
}

fn graph_from(seed: u64, n: usize) -> CommGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_graph(&mut rng, n)
}

proptest! {
    #[test]
    fn projection_is_idempotent(seed in any::<u64>()) {
        let (set, x, _) = set_and_points(seed);
        let once = p(&set, &x);
        let twice = p(&set, &once);
        prop_assert!((twice - &once).amax() <= 1e-12);
        prop_assert!(set.contains(once.as_slice(), 1e-12));
    }

    #[test]
    fn projection_variational_inequality(seed in any::<u64>()) {
        let (set, u, y) = set_and_points(seed);
        let pu = p(&set, &u);
        let v = p(&set, &y);
        prop_assert!((&u - &pu).dot(&(&v - &pu)) <= 1e-10);
    }

    #[test]
    fn projection_is_firmly_nonexpansive(seed in any::<u64>()) {
        let (set, x, y) = set_and_points(seed);
        let d = p(&set, &x) - p(&set, &y);
        prop_assert!(d.dot(&(&x - &y)) >= d.norm_squared() - 1e-10);
    }

    #[test]
    fn projection_distance_is_reported(seed in any::<u64>()) {
        let (set, x, _) = set_and_points(seed);
        let r = project(&set, &x).unwrap();
        prop_assert!((r.distance_sq - (&x - &r.point).norm_squared()).abs() <= 1e-12 * (1.0 + r.distance_sq));
    }

    #[test]
    fn merit_gradient_matches_finite_differences(seed in any::<u64>()) {
        let (set, x, y_ref) = set_and_points(seed);
        let grad = p(&set, &x) - p(&set, &y_ref);
        let h = 1e-4;
        for j in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            // Skip stencils straddling a kink of P (a face of the set).
            let curvature = p(&set, &xp) - 2.0 * p(&set, &x) + p(&set, &xm);
            if curvature.amax() > 1e-6 {
                continue;
            }
            let fd = (merit(&set, &xp, &y_ref).unwrap() - merit(&set, &xm, &y_ref).unwrap()) / (2.0 * h);
            prop_assert!((fd - grad[j]).abs() <= 1e-6 * grad[j].abs().max(1.0),
                "coordinate {j}: fd {fd} vs {}", grad[j]);
        }
    }

    #[test]
    fn merit_lower_bound(seed in any::<u64>()) {
        let (set, x, y_ref) = set_and_points(seed);
        let v = merit(&set, &x, &y_ref).unwrap();
        let bound = 0.5 * (p(&set, &x) - p(&set, &y_ref)).norm_squared();
        prop_assert!(v >= bound - 1e-9 * (1.0 + bound));
    }

    #[test]
    fn laplacian_is_symmetric_psd_with_zero_row_sums(seed in any::<u64>(), n in 1usize..8) {
        let g = graph_from(seed, n);
        let l = laplacian(&g);
        prop_assert_eq!(&l, &l.transpose());
        for i in 0..n {
            prop_assert!(l.row(i).sum().abs() <= 1e-12);
        }
        let eig = nalgebra::SymmetricEigen::new(l.clone());
        prop_assert!(eig.eigenvalues.min() >= -1e-10);
    }

    #[test]
    fn neighbor_diff_matches_kronecker_product(seed in any::<u64>(), n in 1usize..7, m in 1usize..4) {
        let g = graph_from(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let values: Vec<DVector<f64>> = (0..n).map(|_| common::random_point(&mut rng, m, 5.0)).collect();
        let out = g.neighbor_diff(&values).unwrap();
        let dense = g.laplacian().kronecker(&DMatrix::<f64>::identity(m, m));
        let stacked = DVector::from_iterator(n * m, values.iter().flat_map(|v| v.iter().copied()));
        let expected = &dense * &stacked;
        let mut total = DVector::zeros(m);
        for i in 0..n {
            prop_assert!((out[i].clone() - expected.rows(i * m, m)).amax() <= 1e-12);
            total += &out[i];
        }
        prop_assert!(total.amax() <= 1e-10);
        let quad = stacked.dot(&(&dense * &stacked));
        prop_assert!(quad >= -1e-10);
    }

    #[test]
    fn quadratic_form_vanishes_only_at_consensus(seed in any::<u64>(), n in 2usize..7, m in 1usize..4) {
        let g = graph_from(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let common_value = common::random_point(&mut rng, m, 5.0);
        let agreed = DVector::from_iterator(n * m, (0..n).flat_map(|_| common_value.iter().copied()));
        prop_assert!(agreed.dot(&g.apply_laplacian(m, &agreed)).abs() <= 1e-10);
        let mut split = agreed.clone();
        split[0] += 1.0;
        prop_assert!(split.dot(&g.apply_laplacian(m, &split)) > 1e-3);
    }

    #[test]
    fn split_supply_sums_to_d0(d0 in prop::collection::vec(-1e6f64..1e6, 1..5), n in 1usize..12, raw in prop::collection::vec(0.01f64..1.0, 12)) {
        let d0 = DVector::from_vec(d0);
        let parts = split_supply(&d0, n, None).unwrap();
        let total = parts.iter().fold(DVector::zeros(d0.len()), |acc, p| acc + p);
        prop_assert!((total - &d0).amax() <= 4.0 * f64::EPSILON * d0.amax().max(1.0));

        let s: f64 = raw[..n].iter().sum();
        let weights: Vec<f64> = raw[..n].iter().map(|r| r / s).collect();
        if let Ok(parts) = split_supply(&d0, n, Some(&weights)) {
            let total = parts.iter().fold(DVector::zeros(d0.len()), |acc, p| acc + p);
            prop_assert!((total - &d0).amax() <= 4.0 * f64::EPSILON * d0.amax().max(1.0));
        }
    }

    #[test]
    fn stack_round_trips_agent_blocks(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let n = rng.random_range(1..6);
        let m = rng.random_range(1..4);
        let parts: Vec<_> = (0..n).map(|_| {
            let q = rng.random_range(1..4);
            let w = DMatrix::from_fn(m, q, |_, _| rng.random_range(-3.0..3.0));
            let obj: std::sync::Arc<dyn emo_core::ObjectiveOracle> = std::sync::Arc::new(QuadraticL1::squared_norm(q));
            (obj, ConvexSet::full(q), w)
        }).collect();
        let blocks: Vec<DMatrix<f64>> = parts.iter().map(|p| p.2.clone()).collect();
        let d0 = common::random_point(&mut rng, m, 1.0);
        let problem = EmoProblem::with_split_supply(parts, d0, None).unwrap();
        let s = stack(&problem);
        for (i, b) in blocks.iter().enumerate() {
            prop_assert_eq!(&s.agent_block(i), b);
            prop_assert_eq!(&s.wbar.view((i * m, s.offsets[i]), (m, b.ncols())).into_owned(), b);
        }
    }

    #[test]
    fn convexity_probe_accepts_convex_objectives(seed in any::<u64>(), l1 in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let q = rng.random_range(1..4);
        let b = DMatrix::from_fn(q, q, |_, _| rng.random_range(-1.0..1.0));
        let c = common::random_point(&mut rng, q, 1.0);
        let obj = QuadraticL1::new(b.transpose() * &b, c, l1).unwrap();
        let probe = probe_convexity(&obj, &vec![(-10.0, 10.0); q], 1000, &mut rng);
        prop_assert!(probe.worst_gap >= -1e-9);
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), rows in 1usize..20, dim in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let mut val = || rng.random::<f64>() * 10f64.powi(rng.random_range(-300..300)) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
        let samples: Vec<Sample> = (0..rows).map(|k| Sample {
            t: k as f64 * 0.01,
            x: (0..dim).map(|_| val()).collect(),
            f_value: val(),
            eq_residual_sq: val().abs(),
            lambda_norm_sq: val().abs(),
            z_norm_sq: val().abs(),
        }).collect();
        let mut buf = Vec::new();
        write_csv(&samples, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, samples);
    }
}
