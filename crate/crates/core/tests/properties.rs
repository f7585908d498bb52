use proptest::prelude::*;
use ratdet::harness::{read_csv, write_csv, BenchRecord};
use ratdet::linalg::{cholesky, norm2};
use ratdet::rational::{closed_form, eval_closed, eval_partial};
use ratdet::{
    kernel_value, partial_fraction, thomas_solve, Algorithm, DenseSymMatrix, KernelFamily, KernelSpec,
    LanczosOperator, PreconditionerKind, ProbeKind, TridiagMatrix,
};

proptest! {
    #[test]
    fn rational_antisymmetry(k in 1usize..=6, z in 1e-3f64..100.0) {
        let r = closed_form(k).unwrap();
        let a = eval_closed(&r, z).unwrap();
        let b = eval_closed(&r, 1.0 / z).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1e-300));
    }

    #[test]
    fn partial_fractions_match_closed_forms(k in prop::sample::select(vec![1usize, 3, 5]), e in -2.0f64..2.0) {
        let z = 10f64.powf(e);
        let a = eval_closed(&closed_form(k).unwrap(), z).unwrap();
        let b = eval_partial(&partial_fraction(k).unwrap(), z).unwrap();
        prop_assert!((a - b).abs() <= 1e-11 * a.abs());
    }

    #[test]
    fn thomas_agrees_with_dense(
        diag in prop::collection::vec(2.5f64..5.0, 2..40),
        seed in any::<u64>(),
        shift in 0.0f64..10.0,
    ) {
        let t = diag.len();
        let mut rng = ratdet::Rng::new(seed);
        let off: Vec<f64> = (0..t - 1).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        let b = rng.normal_vec(t);
        let tri = TridiagMatrix::new(diag, off).unwrap();
        let x = thomas_solve(&tri, shift, &b).unwrap();
        let dense = tri.to_dense();
        let shifted = DenseSymMatrix::from_fn(t, |i, j| dense.get(i, j) + if i == j { shift } else { 0.0 });
        let want = cholesky(&shifted).unwrap().solve(&b).unwrap();
        let diff: Vec<f64> = x.iter().zip(&want).map(|(a, b)| a - b).collect();
        prop_assert!(norm2(&diff) <= 1e-10 * norm2(&want));
    }

    #[test]
    fn kernels_are_symmetric_and_bounded(
        x in prop::collection::vec(-3.0f64..3.0, 3),
        y in prop::collection::vec(-3.0f64..3.0, 3),
        matern in any::<bool>(),
    ) {
        let family = if matern { KernelFamily::Matern52 } else { KernelFamily::Rbf };
        let spec = KernelSpec::unit(family, 1e-6).unwrap();
        let a = kernel_value(&spec, &x, &y).unwrap();
        prop_assert_eq!(a.to_bits(), kernel_value(&spec, &y, &x).unwrap().to_bits());
        prop_assert!(a > 0.0 && a <= 1.0);
    }

    #[test]
    fn csv_round_trips_bit_exactly(
        estimate in any::<f64>().prop_filter("finite", |x| x.is_finite()),
        exact in prop::option::of(-1e6f64..1e6),
        wall in 0.0f64..1e5,
        jitter in 1e-9f64..1e-2,
        seed in any::<u64>(),
        error in prop::option::of("[a-z ,\"]{1,12}"),
    ) {
        let rec = BenchRecord {
            kernel_family: KernelFamily::Matern52,
            n: 1000,
            d: 5,
            jitter,
            algorithm: Algorithm::Slq,
            probe_kind: ProbeKind::NormalOrthogonal,
            s: 35,
            t: 20,
            precond_kind: PreconditionerKind::PartialCholeskyScaled,
            precond_rank: 25,
            precond_iters: 5,
            precond_scale: jitter,
            lanczos_operator: LanczosOperator::Split,
            seed,
            estimate,
            exact,
            abs_error: exact.map(|x| (estimate - x).abs()),
            wall_time_ms: wall,
            error: error.filter(|e| !e.trim().is_empty()),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_csv(std::slice::from_ref(&rec), std::fs::File::create(&path).unwrap()).unwrap();
        let back = read_csv(&path).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(back[0].estimate.to_bits(), rec.estimate.to_bits());
        prop_assert_eq!(&back[0], &rec);
    }
}
