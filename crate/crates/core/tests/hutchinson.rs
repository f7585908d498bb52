use ratdet::linalg::dot;
use ratdet::{make_probes, DenseSymMatrix, ProbeKind, Rng};

const KINDS: [ProbeKind; 3] = [ProbeKind::Rademacher, ProbeKind::Gaussian, ProbeKind::NormalOrthogonal];

#[test]
fn quadratic_forms_are_unbiased() {
    let n = 50;
    let mut rng = Rng::new(2024);
    for trial in 0..4 {
        let g: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(n)).collect();
        let a = DenseSymMatrix::from_fn(n, |i, j| g[i][j] + g[j][i]);
        let trace: f64 = a.diagonal().iter().sum();
        for kind in KINDS {
            let probes = make_probes(kind, 4000, n, &mut rng.child(trial * 10 + kind as u64)).unwrap();
            let samples: Vec<f64> = probes
                .vectors()
                .iter()
                .map(|v| dot(v, &a.matvec(v).unwrap()))
                .collect();
            let s = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / s;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (s - 1.0);
            let se = (var / s).sqrt();
            assert!((mean - trace).abs() <= 4.0 * se, "{kind}: mean {mean}, trace {trace}, se {se}");
        }
    }
}

#[test]
fn rademacher_is_exact_on_diagonals() {
    let d: Vec<f64> = (0..20).map(|i| 1.0 + i as f64 * 0.25).collect();
    let a = DenseSymMatrix::from_diagonal(&d);
    let trace: f64 = d.iter().sum();
    let probes = make_probes(ProbeKind::Rademacher, 50, 20, &mut Rng::new(1)).unwrap();
    for v in probes.vectors() {
        assert_eq!(dot(v, &a.matvec(v).unwrap()), trace);
    }
}
