//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use m2fusion::ccf::{fit_cca, transform};
use m2fusion::classify::{max_fuse, softmax_normalize, ScoreVector};
use m2fusion::cnn::{
    build_1d_cnn, build_signal_cnn, gradient_check_with, CnnModel, GradCheckOptions, LayerKind,
    Shape, Tensor, TrainConfig,
};
use m2fusion::imaging::{
    composite, make_signal_image, prewitt, raw_signal_image, InertialSequence,
};
use m2fusion::numerics::{Matrix, Ridge};
use m2fusion::pipeline::{
    run_framework, synth_dataset, FrameworkKind, PipelineConfig, RunReport, SynthConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn signal_image_layout() -> Outcome {
    let t0 = Instant::now();
    let seq = InertialSequence::new(Matrix::from_fn(6, 52, |r, _| (r + 1) as f64), 50.0)
        .map_err(|e| e.to_string())?;
    let raw = raw_signal_image(&seq, 0).map_err(|e| e.to_string())?;
    let rows: String = (0..raw.rows())
        .map(|r| {
            let v = raw.row(r)[0];
            ensure(
                raw.row(r).iter().all(|&x| x == v),
                format!("row {r} not constant"),
            )?;
            Ok(char::from_digit(v as u32, 10).unwrap())
        })
        .collect::<Result<_, String>>()?;
    ensure(
        rows == "123456135246142536152616",
        format!("row order {rows}"),
    )?;
    let img = make_signal_image(&seq, 0).map_err(|e| e.to_string())?;
    ensure(
        img.pixels().shape() == (24, 52),
        format!("shape {:?}", img.pixels().shape()),
    )?;
    within(t0.elapsed(), 1.0)?;
    Ok(format!("rows {rows}, 24x52"))
}

/// Correlation with the Prewitt kernel written as a plain nested sum over
/// the replicate-padded neighbourhood.
fn prewitt_oracle(img: &Matrix) -> Matrix {
    let kernel = [[1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -1.0, -1.0]];
    let (h, w) = img.shape();
    Matrix::from_fn(h, w, |y, x| {
        let mut s = 0.0;
        for (i, krow) in kernel.iter().enumerate() {
            for (j, k) in krow.iter().enumerate() {
                let yy = (y as isize + i as isize - 1).clamp(0, h as isize - 1) as usize;
                let xx = (x as isize + j as isize - 1).clamp(0, w as isize - 1) as usize;
                s += k * img[(yy, xx)];
            }
        }
        s
    })
}

fn prewitt_matches_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..50 {
        let (h, w) = (rng.random_range(3..40), rng.random_range(3..40));
        let img = Matrix::from_fn(h, w, |_, _| rng.random_range(-255..=255) as f64);
        let got = prewitt(&img).map_err(|e| e.to_string())?;
        ensure(
            got == prewitt_oracle(&img),
            format!("image {i} differs from the oracle"),
        )?;
    }
    let flat = prewitt(&Matrix::filled(9, 7, 42.0)).map_err(|e| e.to_string())?;
    ensure(
        flat.as_slice().iter().all(|&v| v == 0.0),
        "constant image gave a response",
    )?;
    let step = Matrix::from_fn(10, 10, |_, c| if c >= 5 { 1.0 } else { 0.0 });
    let out = prewitt(&step).map_err(|e| e.to_string())?;
    for r in 1..9 {
        for c in 1..9 {
            ensure(
                out[(r, c)] == 0.0,
                format!("vertical step responds at ({r},{c})"),
            )?;
        }
    }
    within(t0.elapsed(), 5.0)?;
    Ok("50 random images exact, constant and vertical-step responses zero".into())
}

fn sample_var(row: &[f64]) -> f64 {
    let n = row.len() as f64;
    let m = row.iter().sum::<f64>() / n;
    row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Best |corr(aᵀx, bᵀy)| over unit vectors a, b on a 1° grid.
fn grid_max_correlation(x: &Matrix, y: &Matrix) -> f64 {
    let project = |m: &Matrix, deg: usize| -> Vec<f64> {
        let (s, c) = (deg as f64).to_radians().sin_cos();
        m.row(0)
            .iter()
            .zip(m.row(1))
            .map(|(u, v)| c * u + s * v)
            .collect()
    };
    let xs: Vec<Vec<f64>> = (0..180).map(|d| project(x, d)).collect();
    let ys: Vec<Vec<f64>> = (0..180).map(|d| project(y, d)).collect();
    let mut best: f64 = 0.0;
    for a in &xs {
        for b in &ys {
            best = best.max(pearson(a, b).abs());
        }
    }
    best
}

fn cca_correctness() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fit =
        |x: &Matrix, y: &Matrix| fit_cca(x, y, Ridge::Fixed(0.0), None).map_err(|e| e.to_string());

    let latent = gaussian(2, 500, &mut rng);
    let x = gaussian(4, 2, &mut rng)
        .matmul(&latent)
        .unwrap()
        .add(&gaussian(4, 500, &mut rng))
        .unwrap();
    let y = gaussian(3, 2, &mut rng)
        .matmul(&latent)
        .unwrap()
        .add(&gaussian(3, 500, &mut rng))
        .unwrap();
    let t = fit(&x, &y)?;
    let (xp, yp) = transform(&t, &x, &y).map_err(|e| e.to_string())?;
    let mut worst_var: f64 = 0.0;
    for i in 0..t.dim() {
        worst_var = worst_var
            .max((sample_var(xp.row(i)) - 1.0).abs())
            .max((sample_var(yp.row(i)) - 1.0).abs());
    }
    ensure(worst_var <= 1e-6, format!("variance off by {worst_var:e}"))?;
    ensure(
        t.correlations.windows(2).all(|w| w[0] >= w[1]),
        "correlations not descending",
    )?;

    let mut worst_grid: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(50..300);
        let z = gaussian(1, n, &mut rng);
        let x = gaussian(2, 1, &mut rng)
            .matmul(&z)
            .unwrap()
            .add(&gaussian(2, n, &mut rng))
            .unwrap();
        let y = gaussian(2, 1, &mut rng)
            .matmul(&z)
            .unwrap()
            .add(&gaussian(2, n, &mut rng))
            .unwrap();
        let t = fit(&x, &y)?;
        worst_grid = worst_grid.max((t.correlations[0] - grid_max_correlation(&x, &y)).abs());
    }
    ensure(worst_grid <= 1e-3, format!("grid mismatch {worst_grid:e}"))?;

    let x = gaussian(3, 200, &mut rng);
    let t = fit(&x, &x)?;
    let self_gap = (t.correlations[0] - 1.0).abs();
    ensure(
        self_gap <= 1e-8,
        format!("X=Y correlation off by {self_gap:e}"),
    )?;
    within(t0.elapsed(), 30.0)?;
    Ok(format!(
        "variance err {worst_var:.1e}, grid err {worst_grid:.1e}, X=Y err {self_gap:.1e}"
    ))
}

fn check_gradients(
    model: &CnnModel,
    input: Shape,
    seed: u64,
) -> Result<(Vec<(LayerKind, usize)>, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::new(
        input,
        (0..input.len())
            .map(|_| rng.random_range(0.0..1.0))
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let opts = GradCheckOptions {
        per_layer: 240,
        seed,
        ..GradCheckOptions::default()
    };
    let report = gradient_check_with(model, &x, 1, &opts).map_err(|e| e.to_string())?;
    let mut per_kind: Vec<(LayerKind, usize)> = Vec::new();
    for l in &report.layers {
        match per_kind.iter_mut().find(|(k, _)| *k == l.kind) {
            Some((_, n)) => *n += l.checked,
            None => per_kind.push((l.kind, l.checked)),
        }
    }
    Ok((per_kind, report.max_rel_error))
}

fn cnn_gradients() -> Outcome {
    let t0 = Instant::now();
    let input2d = Shape::new(1, 24, 52);
    let mut net2d = build_signal_cnn(input2d, 500, 27).map_err(|e| e.to_string())?;
    net2d.init_weights(4);
    let input1d = Shape::new(6, 52, 1);
    let mut net1d = build_1d_cnn(52, 6, 27).map_err(|e| e.to_string())?;
    net1d.init_weights(5);
    let mut summary = Vec::new();
    for (name, net, shape, seed) in [("2-D", &net2d, input2d, 6), ("1-D", &net1d, input1d, 7)] {
        let (kinds, err) = check_gradients(net, shape, seed)?;
        ensure(err < 1e-4, format!("{name} max relative error {err:e}"))?;
        for (kind, n) in &kinds {
            ensure(
                *n >= 200,
                format!("{name} {kind:?}: only {n} weights checked"),
            )?;
        }
        summary.push(format!("{name} err {err:.1e} {kinds:?}"));
    }
    within(t0.elapsed(), 60.0)?;
    Ok(summary.join("; "))
}

fn lr_schedule() -> Outcome {
    let epochs = [0, 10, 20];
    let depth = TrainConfig::depth_backbone();
    let signal = TrainConfig::signal_cnn();
    let got_d: Vec<f64> = epochs.iter().map(|&e| depth.learning_rate(e)).collect();
    let got_s: Vec<f64> = epochs.iter().map(|&e| signal.learning_rate(e)).collect();
    ensure(
        got_d == [0.005, 0.0025, 0.00125],
        format!("depth schedule {got_d:?}"),
    )?;
    ensure(
        got_s == [0.001, 0.0005, 0.00025],
        format!("signal schedule {got_s:?}"),
    )?;
    Ok(format!("{got_d:?} / {got_s:?}"))
}

fn cli_run(
    exe: &Path,
    manifest: &Path,
    out: &Path,
) -> Result<(RunReport, String, Duration), String> {
    let t0 = Instant::now();
    let status = Command::new(exe)
        .args([
            "run",
            "--framework",
            "multistage",
            "--seed",
            "0",
            "--repeats",
            "20",
            "--manifest",
        ])
        .arg(manifest)
        .arg("--out-dir")
        .arg(out)
        .stderr(std::process::Stdio::null())
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    ensure(status.success(), format!("run exited with {status}"))?;
    let report = RunReport::load(out.join("multistage.json")).map_err(|e| e.to_string())?;
    let csv =
        std::fs::read_to_string(out.join("multistage_confusion.csv")).map_err(|e| e.to_string())?;
    Ok((report, csv, elapsed))
}

fn cli_determinism() -> Outcome {
    let exe = Path::new(env!("CARGO_BIN_EXE_m2fusion"));
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data_dir = dir.path().join("synth");
    let status = Command::new(exe)
        .args(["synth", "--seed", "0", "--out"])
        .arg(&data_dir)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), "synth failed")?;
    let manifest = data_dir.join("manifest.txt");
    let (a, csv_a, ta) = cli_run(exe, &manifest, &dir.path().join("first"))?;
    let (b, csv_b, tb) = cli_run(exe, &manifest, &dir.path().join("second"))?;
    ensure(
        a.repeat_accuracies == b.repeat_accuracies,
        "accuracies differ",
    )?;
    ensure(
        a.repeat_confusions == b.repeat_confusions,
        "confusion matrices differ",
    )?;
    ensure(a.same_results(&b), "reports differ outside timing")?;
    ensure(csv_a == csv_b, "confusion CSVs differ")?;
    within(ta, 600.0)?;
    within(tb, 600.0)?;
    Ok(format!(
        "mean {:.4} twice, {:.0}s and {:.0}s",
        a.mean_accuracy,
        ta.as_secs_f64(),
        tb.as_secs_f64()
    ))
}

fn fusion_gain(reports: &[RunReport], elapsed: Duration) -> Outcome {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for r in reports {
        let best = r.best_single_modality_accuracy();
        let gain = r.mean_accuracy - best;
        lines.push(format!(
            "{} {:.3} (best single {:.3})",
            r.framework, r.mean_accuracy, best
        ));
        if gain < 0.20 || r.mean_accuracy < 0.90 {
            failures.push(r.framework.to_string());
        }
    }
    within(elapsed, 1800.0)?;
    let text = lines.join(", ");
    if failures.is_empty() {
        Ok(text)
    } else {
        Err(format!("{text}; below target: {}", failures.join(", ")))
    }
}

fn cost_ordering(reports: &[RunReport]) -> Outcome {
    let find = |k: FrameworkKind| reports.iter().find(|r| r.framework == k).unwrap();
    let (m, h, e) = (
        find(FrameworkKind::Multistage),
        find(FrameworkKind::Hybrid),
        find(FrameworkKind::Efficient),
    );
    let calls = [m, h, e].map(|r| r.extractor_calls_per_sample);
    ensure(calls == [4, 4, 2], format!("extractor calls {calls:?}"))?;
    let us = [m, h, e].map(|r| r.inference_us_per_sample);
    ensure(us.iter().all(|&t| t > 0.0), "missing timing")?;
    ensure(
        us[2] < us[0] && us[2] < us[1],
        format!("inference us {us:.1?}"),
    )?;
    Ok(format!("calls {calls:?}, us/sample {us:.1?}"))
}

fn max_fusion_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..1000 {
        let k = rng.random_range(2..30);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(-50.0..50.0)).collect();
        let raw = ScoreVector::raw(raw);
        let s = softmax_normalize(&raw);
        ensure(
            s.argmax() == raw.argmax(),
            format!("softmax moved argmax in case {i}"),
        )?;
        let fused = max_fuse(&s, &s).map_err(|e| e.to_string())?;
        ensure(
            fused == s.argmax(),
            format!("max_fuse(s, s) != argmax in case {i}"),
        )?;
    }
    Ok("1000 + 1000 cases".into())
}

fn composite_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut equal = 0;
    for i in 0..20 {
        let (h, w) = (rng.random_range(1..30), rng.random_range(1..30));
        let a = Matrix::from_fn(h, w, |_, _| rng.random_range(0.0..1.0));
        let b = Matrix::from_fn(h, w, |r, c| {
            if rng.random_bool(0.5) {
                a[(r, c)]
            } else {
                rng.random_range(0.0..1.0)
            }
        });
        let img = composite(&a, &b).map_err(|e| e.to_string())?;
        for r in 0..h {
            for c in 0..w {
                if a[(r, c)] == b[(r, c)] {
                    equal += 1;
                    let (x, y, z) = (img.r[(r, c)], img.g[(r, c)], img.b[(r, c)]);
                    ensure(
                        x == y && y == z,
                        format!("pair {i} pixel ({r},{c}) not gray"),
                    )?;
                }
            }
        }
    }
    let one = |v: f64| Matrix::filled(1, 1, v);
    let green = composite(&one(0.0), &one(1.0)).map_err(|e| e.to_string())?;
    let magenta = composite(&one(1.0), &one(0.0)).map_err(|e| e.to_string())?;
    let rgb = |c: &m2fusion::imaging::CompositeImage| [c.r[(0, 0)], c.g[(0, 0)], c.b[(0, 0)]];
    ensure(
        rgb(&green) == [0.0, 1.0, 0.0],
        format!("green case {:?}", rgb(&green)),
    )?;
    ensure(
        rgb(&magenta) == [1.0, 0.0, 1.0],
        format!("magenta case {:?}", rgb(&magenta)),
    )?;
    Ok(format!(
        "{equal} equal pixels gray; green and magenta mapped"
    ))
}

fn synthetic_runs() -> Result<(Vec<RunReport>, Duration), String> {
    let t0 = Instant::now();
    let data = synth_dataset(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let mut cfg = PipelineConfig::desk();
    cfg.split.repeats = 20;
    cfg.split.seed = 0;
    let reports = [
        FrameworkKind::Multistage,
        FrameworkKind::Hybrid,
        FrameworkKind::Efficient,
    ]
    .into_iter()
    .map(|k| run_framework(k, &data, &cfg).map_err(|e| format!("{k}: {e}")))
    .collect::<Result<Vec<_>, _>>()?;
    Ok((reports, t0.elapsed()))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS {id:>2} {name}: {detail}"),
        Err(detail) => {
            failed += 1;
            println!("FAIL {id:>2} {name}: {detail}");
        }
    };
    report(1, "signal image layout", signal_image_layout());
    report(2, "prewitt oracle", prewitt_matches_oracle());
    report(3, "cca correctness", cca_correctness());
    report(4, "cnn gradient check", cnn_gradients());
    report(5, "learning-rate schedule", lr_schedule());
    report(6, "cli determinism", cli_determinism());
    match synthetic_runs() {
        Ok((runs, elapsed)) => {
            report(7, "synthetic fusion gain", fusion_gain(&runs, elapsed));
            report(8, "framework cost ordering", cost_ordering(&runs));
        }
        Err(e) => {
            report(7, "synthetic fusion gain", Err(e.clone()));
            report(8, "framework cost ordering", Err(e));
        }
    }
    report(9, "max-fusion sanity", max_fusion_sanity());
    report(10, "composite image contract", composite_contract());
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
