//! Property tests for the invariants of each module.

use m2fusion::ccf::{fit_cca, transform, CcaTransform};
use m2fusion::classify::{
    max_fuse, predict_batch, softmax_normalize, train_svm_with_diagnostics, ScoreVector, SvmConfig,
};
use m2fusion::imaging::{
    composite, make_signal_image, prewitt, sfi_energy, DepthSequence, InertialSequence,
};
use m2fusion::numerics::{bicubic_resize, covariances, inv_sqrt, sym_eig, Matrix, Ridge};
use m2fusion::pipeline::{split, SplitSpec};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, range: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-range..range, rows * cols)
        .prop_map(move |v| Matrix::new(rows, cols, v).unwrap())
}

fn sized_matrix(
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> impl Strategy<Value = Matrix> {
    (rows, cols).prop_flat_map(|(r, c)| matrix(r, c, 10.0))
}

fn sample_var(row: &[f64]) -> f64 {
    let n = row.len() as f64;
    let m = row.iter().sum::<f64>() / n;
    row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
}

fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (n - 1.0)
}

/// Symmetric matrix with eigenvalues drawn from `[lo, hi]`.
fn spd(m: usize, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    (matrix(m, m, 1.0), prop::collection::vec(lo..hi, m)).prop_map(move |(g, d)| {
        let q = sym_eig(&g.add(&g.transpose()).unwrap()).unwrap().vectors;
        q.matmul(&Matrix::from_diag(&d))
            .unwrap()
            .matmul_t(&q)
            .unwrap()
    })
}

/// Two column-sample sets sharing a latent signal.
fn paired_sets() -> impl Strategy<Value = (Matrix, Matrix)> {
    (1usize..4, 1usize..4, 60usize..120, any::<u64>()).prop_flat_map(|(p, q, n, _)| {
        (
            matrix(2, n, 3.0),
            matrix(p, n, 1.0),
            matrix(q, n, 1.0),
            matrix(p, 2, 1.0),
            matrix(q, 2, 1.0),
        )
            .prop_map(|(latent, nx, ny, mx, my)| {
                let x = mx.matmul(&latent).unwrap().add(&nx).unwrap();
                let y = my.matmul(&latent).unwrap().add(&ny).unwrap();
                (x, y)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn self_covariance_blocks_agree(x in sized_matrix(1..5, 2..20)) {
        let c = covariances(&x, &x, Ridge::Fixed(0.0)).unwrap();
        prop_assert_eq!(&c.sxx, &c.sxy);
        prop_assert_eq!(c.sxx.max_asymmetry(), 0.0);
    }

    #[test]
    fn eigenvalues_sum_to_trace(g in sized_matrix(1..7, 1..2).prop_flat_map(|m| matrix(m.rows(), m.rows(), 5.0))) {
        let s = g.add(&g.transpose()).unwrap();
        let e = sym_eig(&s).unwrap();
        let scale = s.frobenius_norm().max(1.0);
        prop_assert!((e.values.iter().sum::<f64>() - s.trace()).abs() <= 1e-8 * scale);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(e.reconstruct().sub(&s).unwrap().frobenius_norm() <= 1e-8 * scale);
        let gram = e.vectors.t_matmul(&e.vectors).unwrap();
        prop_assert!(gram.sub(&Matrix::identity(s.rows())).unwrap().max_abs() <= 1e-8);
    }

    #[test]
    fn whitening_yields_identity(s in (1usize..6).prop_flat_map(|m| spd(m, 1e-2, 1e3))) {
        let w = inv_sqrt(&s, 1e-12).unwrap();
        let id = w.matmul(&s).unwrap().matmul(&w).unwrap();
        prop_assert!(id.sub(&Matrix::identity(s.rows())).unwrap().max_abs() <= 1e-6);
        prop_assert!(w.max_asymmetry() <= 1e-12 * w.max_abs().max(1.0));
    }

    #[test]
    fn constant_images_survive_resizing(
        v in -1e3f64..1e3, h in 1usize..12, w in 1usize..12, oh in 1usize..12, ow in 1usize..12,
    ) {
        let img = Matrix::filled(h, w, v);
        let down = bicubic_resize(&img, oh, ow).unwrap();
        prop_assert!(down.as_slice().iter().all(|&x| x == v));
        prop_assert_eq!(bicubic_resize(&down, h, w).unwrap(), img);
    }

    #[test]
    fn signal_images_are_unit_range(
        data in prop::collection::vec(-50.0f64..50.0, 6 * 60), start in 0usize..9,
    ) {
        let seq = InertialSequence::new(Matrix::new(6, 60, data).unwrap(), 50.0).unwrap();
        let img = make_signal_image(&seq, start).unwrap();
        prop_assert_eq!(img.pixels().shape(), (24, 52));
        prop_assert!(img.pixels().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn prewitt_ignores_offsets(img in sized_matrix(3..10, 3..10), c in -100.0f64..100.0) {
        let shifted = img.map(|v| v + c);
        let a = prewitt(&img).unwrap();
        let b = prewitt(&shifted).unwrap();
        prop_assert!(a.sub(&b).unwrap().max_abs() <= 1e-9);
    }

    #[test]
    fn prewitt_is_linear(
        (a, b) in (3usize..9, 3usize..9).prop_flat_map(|(h, w)| (matrix(h, w, 5.0), matrix(h, w, 5.0))),
        alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
    ) {
        let lhs = prewitt(&a.scale(alpha).add(&b.scale(beta)).unwrap()).unwrap();
        let rhs = prewitt(&a).unwrap().scale(alpha).add(&prewitt(&b).unwrap().scale(beta)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12 * lhs.max_abs().max(1.0) * 10.0);
    }

    #[test]
    fn sfi_energy_grows_with_prefix(
        frames in prop::collection::vec(matrix(4, 5, 1.0).prop_map(|m| m.map(|v| 1000.0 + 100.0 * v)), 7..14),
        k in 1usize..6, eps in 0.0f64..30.0,
    ) {
        let seq = DepthSequence::new(frames).unwrap();
        let energy = sfi_energy(&seq, k, eps).unwrap();
        prop_assert_eq!(energy.len(), k);
        for pair in energy.windows(2) {
            prop_assert!(pair[0].as_slice().iter().zip(pair[1].as_slice()).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn composite_of_equal_inputs_is_gray(img in sized_matrix(1..8, 1..8)) {
        let unit = img.map(|v| (v + 10.0) / 20.0);
        let c = composite(&unit, &unit).unwrap();
        prop_assert_eq!(&c.r, &c.g);
        prop_assert_eq!(&c.g, &c.b);
    }

    #[test]
    fn canonical_variates_are_white_and_ordered((x, y) in paired_sets()) {
        let t = fit_cca(&x, &y, Ridge::Fixed(0.0), None).unwrap();
        let (xp, yp) = transform(&t, &x, &y).unwrap();
        prop_assert!(t.correlations.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..t.dim() {
            prop_assert!((sample_var(xp.row(i)) - 1.0).abs() <= 1e-6);
            prop_assert!((sample_var(yp.row(i)) - 1.0).abs() <= 1e-6);
            let c = sample_cov(xp.row(i), yp.row(i));
            prop_assert!((c - t.correlations[i]).abs() <= 1e-6);
            for j in 0..i {
                prop_assert!(sample_cov(xp.row(i), xp.row(j)).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn correlations_survive_invertible_maps(
        (x, y) in paired_sets(),
        mix in matrix(3, 3, 0.3),
    ) {
        let p = x.rows();
        let m = Matrix::from_fn(p, p, |r, c| mix[(r, c)] + if r == c { 1.0 } else { 0.0 });
        let base = fit_cca(&x, &y, Ridge::Fixed(0.0), None).unwrap();
        let moved = fit_cca(&m.matmul(&x).unwrap(), &y, Ridge::Fixed(0.0), None).unwrap();
        prop_assert_eq!(base.dim(), moved.dim());
        for (a, b) in base.correlations.iter().zip(&moved.correlations) {
            prop_assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn cca_files_round_trip((x, y) in paired_sets()) {
        let t = fit_cca(&x, &y, Ridge::default(), None).unwrap();
        prop_assert_eq!(CcaTransform::from_bytes(&t.to_bytes()).unwrap(), t);
    }

    #[test]
    fn svm_dual_stays_feasible(
        z in matrix(3, 30, 2.0),
        labels in prop::collection::vec(0usize..3, 30),
        c in 0.05f64..5.0,
    ) {
        prop_assume!((0..3).all(|k| labels.contains(&k)));
        let cfg = SvmConfig { c, epochs: 1000, seed: 1 };
        let (_, fits) = train_svm_with_diagnostics(&z, &labels, &cfg).unwrap();
        for f in fits {
            // the dual objective never exceeds the primal
            prop_assert!(f.dual <= f.primal + 1e-9);
            prop_assert!(f.kkt_violation.is_finite());
        }
    }

    #[test]
    fn svm_decisions_ignore_feature_scale(
        z in matrix(2, 24, 3.0),
        labels in prop::collection::vec(0usize..3, 24),
        alpha in 0.01f64..100.0,
    ) {
        prop_assume!((0..3).all(|k| labels.contains(&k)));
        let cfg = SvmConfig::default();
        let (a, _) = train_svm_with_diagnostics(&z, &labels, &cfg).unwrap();
        let scaled = z.scale(alpha);
        let (b, _) = train_svm_with_diagnostics(&scaled, &labels, &cfg).unwrap();
        let pa = predict_batch(&a, &z).unwrap();
        let pb = predict_batch(&b, &scaled).unwrap();
        // standardisation absorbs the scale up to round-off in near-ties
        let agree = pa.iter().zip(&pb).filter(|(x, y)| x == y).count();
        prop_assert!(agree + 1 >= pa.len(), "{pa:?} vs {pb:?}");
    }

    #[test]
    fn max_fusion_of_identical_scores_is_argmax(raw in prop::collection::vec(-20.0f64..20.0, 2..10)) {
        let s = softmax_normalize(&ScoreVector::raw(raw.clone()));
        let total: f64 = s.scores.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        prop_assert!(s.scores.iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert_eq!(s.argmax(), ScoreVector::raw(raw).argmax());
        prop_assert_eq!(max_fuse(&s, &s).unwrap(), s.argmax());
    }

    #[test]
    fn splits_partition_the_samples(n in 2usize..200, seed in any::<u64>(), repeat in 0usize..20) {
        let spec = SplitSpec { seed, ..SplitSpec::default() };
        prop_assume!({
            let cut = (0.8 * n as f64).round() as usize;
            cut > 0 && cut < n
        });
        let p = split(n, &spec, repeat).unwrap();
        prop_assert_eq!(p.train.len(), (0.8 * n as f64).round() as usize);
        let mut all: Vec<usize> = p.train.iter().chain(&p.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}
