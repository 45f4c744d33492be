//! Aggregated evaluation results.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::framework::FrameworkKind;
use super::split::SplitSpec;
use crate::io::{read_file, write_file};
use crate::{Error, Result};

/// Result of one train/test repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatOutcome {
    pub accuracy: f64,
    /// Accuracy of an SVM on the depth features alone.
    pub depth_accuracy: f64,
    /// Accuracy of an SVM on the inertial features alone.
    pub inertial_accuracy: f64,
    /// Counts with true labels on rows.
    pub confusion: Vec<Vec<usize>>,
    pub test_counts: Vec<usize>,
    pub extractor_calls: usize,
    pub test_samples: usize,
    pub inference_us: f64,
    pub train_seconds: f64,
    /// Hash of every fitted model of the repeat.
    pub fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub framework: FrameworkKind,
    pub seed: u64,
    pub repeats: usize,
    pub train_fraction: f64,
    pub class_names: Vec<String>,
    pub repeat_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub depth_accuracies: Vec<f64>,
    pub mean_depth_accuracy: f64,
    pub inertial_accuracies: Vec<f64>,
    pub mean_inertial_accuracy: f64,
    /// Summed over repeats, true labels on rows.
    pub confusion: Vec<Vec<usize>>,
    pub repeat_confusions: Vec<Vec<Vec<usize>>>,
    pub extractor_calls_per_sample: usize,
    pub inference_us_per_sample: f64,
    pub train_seconds: Vec<f64>,
    pub model_fingerprints: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Aggregates repeat outcomes, checking the per-repeat bookkeeping.
pub fn evaluate(
    kind: FrameworkKind,
    class_names: &[String],
    spec: &SplitSpec,
    outcomes: &[RepeatOutcome],
) -> Result<RunReport> {
    if outcomes.is_empty() {
        return Err(Error::invalid("no repeats to evaluate"));
    }
    let classes = class_names.len();
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (r, o) in outcomes.iter().enumerate() {
        if o.confusion.len() != classes || o.confusion.iter().any(|row| row.len() != classes) {
            return Err(Error::dims(format!(
                "repeat {r}: confusion matrix is not {classes}×{classes}"
            )));
        }
        let row_sums: Vec<usize> = o.confusion.iter().map(|row| row.iter().sum()).collect();
        if row_sums != o.test_counts {
            return Err(Error::invalid(format!(
                "repeat {r}: confusion rows {row_sums:?} disagree with test counts {:?}",
                o.test_counts
            )));
        }
        if o.extractor_calls != kind.extractor_count() * o.test_samples {
            return Err(Error::invalid(format!(
                "repeat {r}: {} extractor calls for {} samples",
                o.extractor_calls, o.test_samples
            )));
        }
        for (acc, row) in confusion.iter_mut().zip(&o.confusion) {
            acc.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
    }
    let collect = |f: fn(&RepeatOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<_>>();
    let repeat_accuracies = collect(|o| o.accuracy);
    let depth_accuracies = collect(|o| o.depth_accuracy);
    let inertial_accuracies = collect(|o| o.inertial_accuracy);
    Ok(RunReport {
        framework: kind,
        seed: spec.seed,
        repeats: outcomes.len(),
        train_fraction: spec.train_fraction,
        class_names: class_names.to_vec(),
        mean_accuracy: mean(&repeat_accuracies),
        mean_depth_accuracy: mean(&depth_accuracies),
        mean_inertial_accuracy: mean(&inertial_accuracies),
        repeat_accuracies,
        depth_accuracies,
        inertial_accuracies,
        confusion,
        repeat_confusions: outcomes.iter().map(|o| o.confusion.clone()).collect(),
        extractor_calls_per_sample: kind.extractor_count(),
        inference_us_per_sample: mean(&collect(|o| o.inference_us)),
        train_seconds: collect(|o| o.train_seconds),
        model_fingerprints: outcomes
            .iter()
            .map(|o| format!("{:016x}", o.fingerprint))
            .collect(),
    })
}

impl RunReport {
    /// The better of the two single-modality mean accuracies.
    pub fn best_single_modality_accuracy(&self) -> f64 {
        self.mean_depth_accuracy.max(self.mean_inertial_accuracy)
    }

    /// Equality of everything except wall-clock measurements.
    pub fn same_results(&self, other: &RunReport) -> bool {
        let strip = |r: &RunReport| RunReport {
            inference_us_per_sample: 0.0,
            train_seconds: Vec::new(),
            ..r.clone()
        };
        strip(self) == strip(other)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<RunReport> {
        serde_json::from_str(text).map_err(|e| Error::format("run report", e.to_string()))
    }

    /// Confusion matrix as CSV with a header row of predicted class names.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true/predicted");
        for name in &self.class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            out.push_str(name);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>_confusion.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        write_file(&dir.join(format!("{stem}.json")), self.to_json().as_bytes())?;
        write_file(
            &dir.join(format!("{stem}_confusion.csv")),
            self.confusion_csv().as_bytes(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunReport> {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::InvalidFile {
            path: path.to_path_buf(),
            reason: "not UTF-8".into(),
        })?;
        RunReport::from_json(&text).map_err(|e| Error::InvalidFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let pct = |v: f64| format!("{:.1}%", 100.0 * v);
        format!(
            "framework: {}\nrepeats: {}\nmean accuracy: {}\ndepth only: {}\ninertial only: {}\n\
             extractor calls per sample: {}\ninference per sample: {:.1} us\n",
            self.framework,
            self.repeats,
            pct(self.mean_accuracy),
            pct(self.mean_depth_accuracy),
            pct(self.mean_inertial_accuracy),
            self.extractor_calls_per_sample,
            self.inference_us_per_sample,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(acc: f64, confusion: Vec<Vec<usize>>) -> RepeatOutcome {
        let test_counts: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
        let n = test_counts.iter().sum();
        RepeatOutcome {
            accuracy: acc,
            depth_accuracy: 0.5,
            inertial_accuracy: 0.5,
            confusion,
            test_counts,
            extractor_calls: 2 * n,
            test_samples: n,
            inference_us: 10.0,
            train_seconds: 1.0,
            fingerprint: 7,
        }
    }

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn averages_repeats() {
        let outs = [
            outcome(0.9, vec![vec![5, 0], vec![1, 4]]),
            outcome(1.0, vec![vec![5, 0], vec![0, 5]]),
        ];
        let r = evaluate(
            FrameworkKind::Efficient,
            &names(),
            &SplitSpec::default(),
            &outs,
        )
        .unwrap();
        assert!((r.mean_accuracy - 0.95).abs() < 1e-15);
        assert_eq!(r.confusion, vec![vec![10, 0], vec![1, 9]]);
        assert_eq!(r.extractor_calls_per_sample, 2);
        assert_eq!(r.confusion_csv(), "true/predicted,a,b\na,10,0\nb,1,9\n");
        assert_eq!(RunReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn perfect_classifier_is_diagonal() {
        let outs = [outcome(1.0, vec![vec![3, 0], vec![0, 2]])];
        let r = evaluate(
            FrameworkKind::Efficient,
            &names(),
            &SplitSpec::default(),
            &outs,
        )
        .unwrap();
        assert_eq!(r.confusion, vec![vec![3, 0], vec![0, 2]]);
    }

    #[test]
    fn rejects_inconsistent_bookkeeping() {
        let mut bad = outcome(1.0, vec![vec![3, 0], vec![0, 2]]);
        bad.test_counts = vec![2, 3];
        assert!(evaluate(
            FrameworkKind::Efficient,
            &names(),
            &SplitSpec::default(),
            &[bad]
        )
        .is_err());
        let calls = outcome(1.0, vec![vec![3, 0], vec![0, 2]]);
        assert!(evaluate(
            FrameworkKind::Hybrid,
            &names(),
            &SplitSpec::default(),
            &[calls]
        )
        .is_err());
        assert!(evaluate(FrameworkKind::Hybrid, &names(), &SplitSpec::default(), &[]).is_err());
    }

    #[test]
    fn same_results_ignores_timing() {
        let outs = [outcome(0.9, vec![vec![5, 0], vec![1, 4]])];
        let a = evaluate(
            FrameworkKind::Efficient,
            &names(),
            &SplitSpec::default(),
            &outs,
        )
        .unwrap();
        let mut b = a.clone();
        b.inference_us_per_sample = 99.0;
        b.train_seconds = vec![3.0];
        assert!(a.same_results(&b));
        b.repeat_accuracies[0] = 0.8;
        assert!(!a.same_results(&b));
    }
}
