use ratdet::linalg::{cholesky, cholesky_logdet, dot, norm2, sym_eigenvalues};
use ratdet::{
    build_covariance, build_preconditioner, sample_index_points, DenseSymMatrix, KernelFamily, KernelSpec,
    Preconditioner, PreconditionerConfig, PreconditionerKind, Rng,
};

fn kernel_matrix(family: KernelFamily, n: usize, d: usize, jitter: f64, seed: u64) -> DenseSymMatrix {
    let pts = sample_index_points(n, d, &mut Rng::new(seed)).unwrap();
    build_covariance(&KernelSpec::unit(family, jitter).unwrap(), &pts)
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b)
}

/// Scaled kinds use `a` = jitter, as the harness does.
fn build(m: &DenseSymMatrix, kind: PreconditionerKind, rank: usize, jitter: f64, seed: u64) -> Preconditioner {
    let cfg = PreconditionerConfig {
        kind,
        rank,
        scale: jitter,
        ..Default::default()
    };
    build_preconditioner(m, &cfg, &mut Rng::new(seed)).unwrap()
}

#[test]
fn all_kinds_match_dense_algebra() {
    for (family, d) in [(KernelFamily::Rbf, 1), (KernelFamily::Matern52, 5)] {
        const JITTER: f64 = 1e-3;
        let m = kernel_matrix(family, 250, d, JITTER, 3);
        let mut rng = Rng::new(99);
        for kind in PreconditionerKind::ALL {
            let p = build(&m, kind, 20, JITTER, 5);
            let chol = cholesky(&p.to_dense()).unwrap();
            let v = rng.normal_vec(m.n());
            let x = p.apply_inverse(&v).unwrap();
            assert!(rel_diff(&p.apply(&x).unwrap(), &v) <= 1e-8, "{kind} residual");
            assert!(rel_diff(&x, &chol.solve(&v).unwrap()) <= 1e-8, "{kind} forward");
            let ld = chol.logdet();
            assert!((p.log_det() - ld).abs() <= 1e-8 * ld.abs().max(1.0), "{kind} logdet");
        }
    }
}

#[test]
fn ill_conditioned_solves_stay_near_dense_accuracy() {
    // jitter 1e-6 with RBF d=1 gives cond(P) up to ~1e9 for the partial Cholesky kinds
    const JITTER: f64 = 1e-6;
    let m = kernel_matrix(KernelFamily::Rbf, 250, 1, JITTER, 3);
    let mut rng = Rng::new(98);
    for kind in PreconditionerKind::ALL {
        let p = build(&m, kind, 20, JITTER, 5);
        let chol = cholesky(&p.to_dense()).unwrap();
        let v = rng.normal_vec(m.n());
        let dense_residual = rel_diff(&p.apply(&chol.solve(&v).unwrap()).unwrap(), &v);
        let residual = rel_diff(&p.apply(&p.apply_inverse(&v).unwrap()).unwrap(), &v);
        assert!(residual <= 1e-8_f64.max(10.0 * dense_residual), "{kind}: {residual:e} vs dense {dense_residual:e}");
        let ld = chol.logdet();
        assert!((p.log_det() - ld).abs() <= 1e-8 * ld.abs().max(1.0), "{kind} logdet");
    }
}

#[test]
fn inverse_root_whitens_preconditioner() {
    let m = kernel_matrix(KernelFamily::Rbf, 120, 2, 1e-6, 8);
    let mut rng = Rng::new(1);
    for kind in PreconditionerKind::ALL {
        let p = build(&m, kind, 15, 1e-6, 2);
        // L⁻¹ P L⁻ᵗ u = u
        for _ in 0..3 {
            let u = rng.normal_vec(m.n());
            let back = p
                .apply_inverse_root(&p.apply(&p.apply_inverse_root_transpose(&u).unwrap()).unwrap())
                .unwrap();
            assert!(rel_diff(&back, &u) <= 1e-6, "{kind}: {}", rel_diff(&back, &u));
        }
    }
}

/// Spectrum of `L⁻¹ M L⁻ᵗ`, i.e. of `M P⁻¹`.
fn preconditioned_spectrum(m: &DenseSymMatrix, p: &Preconditioner) -> Vec<f64> {
    let n = m.n();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let y = m.matvec(&p.apply_inverse_root_transpose(&e).unwrap()).unwrap();
            p.apply_inverse_root(&y).unwrap()
        })
        .collect();
    let sym = DenseSymMatrix::from_fn(n, |i, j| 0.5 * (cols[j][i] + cols[i][j]));
    sym_eigenvalues(&sym)
}

#[test]
fn rand_svd_lowers_condition_number() {
    let m = kernel_matrix(KernelFamily::Rbf, 1000, 1, 1e-6, 11);
    let p = build(&m, PreconditionerKind::RandSvd, 25, 1e-6, 12);
    let ev_m = sym_eigenvalues(&m);
    let ev_p = preconditioned_spectrum(&m, &p);
    let cond_m = ev_m[ev_m.len() - 1] / ev_m[0];
    let cond_p = ev_p[ev_p.len() - 1] / ev_p[0];
    assert!(ev_p[0] > 0.0);
    assert!(cond_p < cond_m, "cond(MP⁻¹) = {cond_p:e}, cond(M) = {cond_m:e}");
}

#[test]
fn frobenius_residual_decays_with_rank() {
    let m = kernel_matrix(KernelFamily::Rbf, 1000, 5, 1e-6, 21);
    let ranks = [5usize, 10, 20, 40, 80];
    let norms: Vec<f64> = ranks
        .iter()
        .map(|&k| {
            let p = build(&m, PreconditionerKind::RandSvd, k, 1e-6, 22);
            let dense = p.to_dense();
            m.as_slice()
                .iter()
                .zip(dense.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    for w in norms.windows(2) {
        assert!(w[1] <= w[0], "{norms:?}");
    }
    let xs: Vec<f64> = ranks.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|x| x.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 5.0;
    let my = ys.iter().sum::<f64>() / 5.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    assert!((-1.2..=-0.2).contains(&slope), "slope {slope}, norms {norms:?}");
}

#[test]
fn perfect_low_rank_part_leaves_only_the_floor() {
    let m = kernel_matrix(KernelFamily::Matern52, 60, 3, 1e-4, 4);
    let p = build(&m, PreconditionerKind::TruncSvd, 60, 1e-4, 0);
    let exact = cholesky_logdet(&m).unwrap();
    assert!((p.log_det() - exact).abs() <= 1e-6 * exact.abs());
    let v = Rng::new(3).normal_vec(60);
    assert!(rel_diff(&p.apply(&v).unwrap(), &m.matvec(&v).unwrap()) <= 1e-9);
    assert!(dot(&v, &p.apply_inverse(&v).unwrap()) > 0.0);
}
