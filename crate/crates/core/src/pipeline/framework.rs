//! The three fusion topologies and their shared evaluation loop.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::manifest::Dataset;
use super::report::{evaluate, RepeatOutcome, RunReport};
use super::split::{split, SplitSpec};
use crate::ccf::{fit_cca, fuse_concat, fuse_sum, CcaTransform};
use crate::classify::{
    max_fuse, predict_batch, predict_scores, softmax_normalize, train_svm, SvmConfig, SvmModel,
};
use crate::cnn::{
    build_signal_cnn_with, extract_features, train, CnnModel, EpochLog, FeatureMatrix, Shape,
    Tensor, TrainConfig, FEATURE_LAYER,
};
use crate::imaging::{
    augment, composite, make_sfi, make_signal_image, prewitt, rescale_unit, AugmentConfig,
    InertialSequence, DEFAULT_MOTION_THRESHOLD, DEFAULT_SEGMENTS, SIGNAL_COLS,
};
use crate::numerics::{bicubic_resize, Matrix, Ridge};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameworkKind {
    /// Four extractors, per-modality concatenation, CCA sum fusion, one SVM.
    Multistage,
    /// Four extractors, one SVM per modality, max fusion of their scores.
    Hybrid,
    /// Composite signal images and SFIs, two extractors, CCA sum fusion.
    Efficient,
}

impl FrameworkKind {
    pub const ALL: [FrameworkKind; 3] = [Self::Multistage, Self::Hybrid, Self::Efficient];

    /// CNN forward passes needed to classify one sample.
    pub fn extractor_count(self) -> usize {
        let (d, i) = self.branches();
        d.len() + i.len()
    }

    fn branches(self) -> (&'static [Branch], &'static [Branch]) {
        match self {
            Self::Multistage | Self::Hybrid => (
                &[Branch::Sfi, Branch::PrewittSfi],
                &[Branch::Signal, Branch::PrewittSignal],
            ),
            Self::Efficient => (&[Branch::Sfi], &[Branch::Composite]),
        }
    }
}

impl fmt::Display for FrameworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Multistage => "multistage",
            Self::Hybrid => "hybrid",
            Self::Efficient => "efficient",
        })
    }
}

impl FromStr for FrameworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multistage" => Ok(Self::Multistage),
            "hybrid" => Ok(Self::Hybrid),
            "efficient" => Ok(Self::Efficient),
            other => Err(Error::invalid(format!("unknown framework `{other}`"))),
        }
    }
}

/// Network input stream feeding one extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Stack of sequential front-view images, one per channel.
    Sfi,
    /// The SFI stack after Prewitt filtering.
    PrewittSfi,
    Signal,
    PrewittSignal,
    /// Three-plane composite of the signal image and its Prewitt response.
    Composite,
}

impl Branch {
    pub const ALL: [Branch; 5] = [
        Branch::Sfi,
        Branch::PrewittSfi,
        Branch::Signal,
        Branch::PrewittSignal,
        Branch::Composite,
    ];

    pub fn is_depth(self) -> bool {
        matches!(self, Branch::Sfi | Branch::PrewittSfi)
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Sfi => "sfi",
            Branch::PrewittSfi => "prewitt-sfi",
            Branch::Signal => "signal",
            Branch::PrewittSignal => "prewitt-signal",
            Branch::Composite => "composite",
        }
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown branch `{s}`")))
    }
}

/// Architecture and schedule of one family of extractors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractorConfig {
    pub filters: (usize, usize),
    pub hidden_fc: usize,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub split: SplitSpec,
    pub segments: usize,
    pub motion_threshold: f64,
    /// Side length SFIs are resized to before the depth extractors.
    pub sfi_size: usize,
    /// Networks on signal, Prewitt-signal and composite images.
    pub signal: ExtractorConfig,
    /// Networks on SFI stacks.
    pub depth: ExtractorConfig,
    pub ridge: Ridge,
    pub svm: SvmConfig,
    /// Extra inertial recordings for training the inertial extractors.
    pub augment: Option<AugmentConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            split: SplitSpec::default(),
            segments: DEFAULT_SEGMENTS,
            motion_threshold: DEFAULT_MOTION_THRESHOLD,
            sfi_size: 64,
            signal: ExtractorConfig {
                filters: (50, 100),
                hidden_fc: 500,
                train: TrainConfig::signal_cnn(),
            },
            depth: ExtractorConfig {
                filters: (50, 100),
                hidden_fc: 500,
                train: TrainConfig::depth_backbone(),
            },
            ridge: Ridge::default(),
            svm: SvmConfig::default(),
            augment: None,
        }
    }
}

impl PipelineConfig {
    /// Small networks and short schedules that run a full 20-split
    /// evaluation of the synthetic dataset in a few minutes on one core.
    pub fn desk() -> Self {
        let train = TrainConfig {
            initial_lr: 0.01,
            max_epochs: 30,
            minibatch: 16,
            l2: 0.04,
            ..TrainConfig::signal_cnn()
        };
        let extractor = ExtractorConfig {
            filters: (4, 8),
            hidden_fc: 16,
            train,
        };
        PipelineConfig {
            sfi_size: 32,
            signal: extractor,
            depth: extractor,
            // near-independent modalities: a strong ridge keeps whitening from
            // promoting low-variance noise directions
            ridge: Ridge::Relative(100.0),
            ..PipelineConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if self.segments == 0 {
            return Err(Error::invalid("segments must be at least 1"));
        }
        if self.sfi_size < 16 {
            return Err(Error::invalid("sfi_size must be at least 16"));
        }
        for ext in [&self.signal, &self.depth] {
            if ext.filters.0 == 0 || ext.filters.1 == 0 || ext.hidden_fc == 0 {
                return Err(Error::invalid("extractor sizes must be positive"));
            }
            ext.train.validate()?;
        }
        Ok(())
    }
}

/// Network inputs derived from one recording.
#[derive(Debug, Clone)]
pub struct EncodedSample {
    pub sfi: Tensor,
    pub prewitt_sfi: Tensor,
    pub inertial: InertialViews,
    /// Views of augmented copies of the inertial recording.
    pub augmented: Vec<InertialViews>,
}

#[derive(Debug, Clone)]
pub struct InertialViews {
    pub signal: Tensor,
    pub prewitt_signal: Tensor,
    pub composite: Tensor,
}

impl EncodedSample {
    pub fn view(&self, branch: Branch) -> &Tensor {
        match branch {
            Branch::Sfi => &self.sfi,
            Branch::PrewittSfi => &self.prewitt_sfi,
            Branch::Signal => &self.inertial.signal,
            Branch::PrewittSignal => &self.inertial.prewitt_signal,
            Branch::Composite => &self.inertial.composite,
        }
    }

    fn augmented_views(&self, branch: Branch) -> impl Iterator<Item = &Tensor> {
        self.augmented.iter().map(move |v| match branch {
            Branch::Signal => &v.signal,
            Branch::PrewittSignal => &v.prewitt_signal,
            _ => &v.composite,
        })
    }
}

fn inertial_views(seq: &InertialSequence) -> Result<InertialViews> {
    let start = (seq.len() - SIGNAL_COLS) / 2;
    let signal = make_signal_image(seq, start)?.into_pixels();
    let filtered = rescale_unit(&prewitt(&signal)?);
    let comp = composite(&signal, &filtered)?;
    Ok(InertialViews {
        signal: Tensor::from_matrix(&signal),
        prewitt_signal: Tensor::from_matrix(&filtered),
        composite: Tensor::from_planes(&comp.planes())?,
    })
}

/// Encodes every recording into the images the extractors consume.
pub fn encode_dataset(data: &Dataset, cfg: &PipelineConfig) -> Result<Vec<EncodedSample>> {
    cfg.validate()?;
    data.samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let sfis: Vec<Matrix> = make_sfi(&s.depth, cfg.segments, cfg.motion_threshold)?
                .into_iter()
                .map(|img| {
                    bicubic_resize(&img.pixels, cfg.sfi_size, cfg.sfi_size)
                        .map(|m| m.map(|v| v.clamp(0.0, 1.0)))
                })
                .collect::<Result<_>>()?;
            let filtered: Vec<Matrix> = sfis
                .iter()
                .map(|m| prewitt(m).map(|p| rescale_unit(&p)))
                .collect::<Result<_>>()?;
            let augmented = match &cfg.augment {
                Some(a) => augment(&s.inertial, a, derive_seed(cfg.split.seed, i as u64, 99))?
                    .iter()
                    .map(inertial_views)
                    .collect::<Result<_>>()?,
                None => Vec::new(),
            };
            Ok(EncodedSample {
                sfi: Tensor::from_planes(&sfis.iter().collect::<Vec<_>>())?,
                prewitt_sfi: Tensor::from_planes(&filtered.iter().collect::<Vec<_>>())?,
                inertial: inertial_views(&s.inertial)?,
                augmented,
            })
        })
        .collect()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, repeat: u64, tag: u64) -> u64 {
    splitmix(splitmix(base ^ splitmix(repeat)) ^ tag)
}

enum Fusion {
    Feature {
        cca: Box<CcaTransform>,
        svm: SvmModel,
    },
    Decision,
}

/// Everything fitted on one training split.
struct Trained {
    depth_nets: Vec<(Branch, CnnModel)>,
    inertial_nets: Vec<(Branch, CnnModel)>,
    /// Row count the depth block is resized to before CCA, if any.
    depth_rows: Option<usize>,
    depth_svm: SvmModel,
    inertial_svm: SvmModel,
    fusion: Fusion,
}

impl Trained {
    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (_, net) in self.depth_nets.iter().chain(&self.inertial_nets) {
            net.to_bytes().hash(&mut h);
        }
        self.depth_svm.to_bytes().hash(&mut h);
        self.inertial_svm.to_bytes().hash(&mut h);
        if let Fusion::Feature { cca, svm } = &self.fusion {
            cca.to_bytes().hash(&mut h);
            svm.to_bytes().hash(&mut h);
        }
        h.finish()
    }

    fn block(
        nets: &[(Branch, CnnModel)],
        s: &EncodedSample,
        calls: &mut usize,
    ) -> Result<Vec<f64>> {
        let mut col = Vec::new();
        for (branch, net) in nets {
            col.extend(net.tap(FEATURE_LAYER, s.view(*branch))?);
            *calls += 1;
        }
        Ok(col)
    }

    /// Classifies one encoded sample end to end.
    fn infer(&self, s: &EncodedSample, calls: &mut usize) -> Result<usize> {
        let depth = Self::block(&self.depth_nets, s, calls)?;
        let inertial = Self::block(&self.inertial_nets, s, calls)?;
        match &self.fusion {
            Fusion::Feature { cca, svm } => {
                let mut x = Matrix::new(depth.len(), 1, depth)?;
                if let Some(rows) = self.depth_rows {
                    x = bicubic_resize(&x, rows, 1)?;
                }
                let y = Matrix::new(inertial.len(), 1, inertial)?;
                let z = fuse_sum(&cca.project_x(&x)?, &cca.project_y(&y)?)?.z;
                Ok(predict_scores(svm, z.as_slice())?.argmax())
            }
            Fusion::Decision => {
                let s1 = softmax_normalize(&predict_scores(&self.depth_svm, &depth)?);
                let s2 = softmax_normalize(&predict_scores(&self.inertial_svm, &inertial)?);
                max_fuse(&s1, &s2)
            }
        }
    }
}

fn modality_features(
    nets: &[(Branch, CnnModel)],
    encoded: &[EncodedSample],
    idx: &[usize],
) -> Result<FeatureMatrix> {
    let mut block = FeatureMatrix::empty(idx.len());
    for (branch, net) in nets {
        let batch: Vec<Tensor> = idx
            .iter()
            .map(|&i| encoded[i].view(*branch).clone())
            .collect();
        block = fuse_concat(&block, &extract_features(net, FEATURE_LAYER, &batch)?)?;
    }
    Ok(block)
}

fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

struct RepeatContext<'a> {
    kind: FrameworkKind,
    encoded: &'a [EncodedSample],
    labels: &'a [usize],
    classes: usize,
    cfg: &'a PipelineConfig,
    repeat: usize,
}

impl RepeatContext<'_> {
    fn seed(&self, tag: u64) -> u64 {
        derive_seed(self.cfg.split.seed, self.repeat as u64, tag)
    }

    fn train_extractor(&self, branch: Branch, train_idx: &[usize]) -> Result<CnnModel> {
        let seed = self.seed(branch.tag());
        let data = (self.encoded, self.labels, self.classes);
        Ok(train_branch(data, train_idx, branch, self.cfg, seed)?.0)
    }

    fn svm(&self, tag: u64) -> SvmConfig {
        SvmConfig {
            seed: self.seed(tag),
            ..self.cfg.svm
        }
    }

    fn run(&self, train_idx: &[usize], test_idx: &[usize]) -> Result<RepeatOutcome> {
        let started = Instant::now();
        let (depth_branches, inertial_branches) = self.kind.branches();
        let fit = |branches: &[Branch]| -> Result<Vec<(Branch, CnnModel)>> {
            branches
                .iter()
                .map(|&b| Ok((b, self.train_extractor(b, train_idx)?)))
                .collect()
        };
        let depth_nets = fit(depth_branches)?;
        let inertial_nets = fit(inertial_branches)?;

        let train_labels: Vec<usize> = train_idx.iter().map(|&i| self.labels[i]).collect();
        let depth_tr = modality_features(&depth_nets, self.encoded, train_idx)?;
        let inertial_tr = modality_features(&inertial_nets, self.encoded, train_idx)?;
        let depth_svm = train_svm(&depth_tr.data, &train_labels, &self.svm(20))?;
        let inertial_svm = train_svm(&inertial_tr.data, &train_labels, &self.svm(21))?;

        let (depth_rows, fusion) = match self.kind {
            FrameworkKind::Hybrid => (None, Fusion::Decision),
            kind => {
                let q = inertial_tr.dim();
                let resize = kind == FrameworkKind::Multistage && depth_tr.dim() != q;
                let x = if resize {
                    bicubic_resize(&depth_tr.data, q, depth_tr.samples())?
                } else {
                    depth_tr.data.clone()
                };
                let cca = fit_cca(&x, &inertial_tr.data, self.cfg.ridge, None)?;
                let z = fuse_sum(&cca.project_x(&x)?, &cca.project_y(&inertial_tr.data)?)?.z;
                let svm = train_svm(&z, &train_labels, &self.svm(22))?;
                (
                    resize.then_some(q),
                    Fusion::Feature {
                        cca: Box::new(cca),
                        svm,
                    },
                )
            }
        };
        let trained = Trained {
            depth_nets,
            inertial_nets,
            depth_rows,
            depth_svm,
            inertial_svm,
            fusion,
        };
        let train_seconds = started.elapsed().as_secs_f64();

        let fingerprint = trained.fingerprint();
        // warm-up pass so timing reflects steady state
        trained.infer(&self.encoded[test_idx[0]], &mut 0)?;
        let mut calls = 0;
        let mut predicted = Vec::with_capacity(test_idx.len());
        let mut elapsed = 0.0;
        for &i in test_idx {
            let t0 = Instant::now();
            let label = trained.infer(&self.encoded[i], &mut calls)?;
            elapsed += t0.elapsed().as_secs_f64();
            predicted.push(label);
        }
        if trained.fingerprint() != fingerprint {
            return Err(Error::invalid("fitted models changed during evaluation"));
        }

        let truth: Vec<usize> = test_idx.iter().map(|&i| self.labels[i]).collect();
        let depth_te = modality_features(&trained.depth_nets, self.encoded, test_idx)?;
        let inertial_te = modality_features(&trained.inertial_nets, self.encoded, test_idx)?;
        let mut confusion = vec![vec![0usize; self.classes]; self.classes];
        for (&t, &p) in truth.iter().zip(&predicted) {
            confusion[t][p] += 1;
        }
        Ok(RepeatOutcome {
            accuracy: accuracy(&predicted, &truth),
            depth_accuracy: accuracy(&predict_batch(&trained.depth_svm, &depth_te.data)?, &truth),
            inertial_accuracy: accuracy(
                &predict_batch(&trained.inertial_svm, &inertial_te.data)?,
                &truth,
            ),
            confusion,
            test_counts: (0..self.classes)
                .map(|k| truth.iter().filter(|&&t| t == k).count())
                .collect(),
            extractor_calls: calls,
            test_samples: test_idx.len(),
            inference_us: 1e6 * elapsed / test_idx.len() as f64,
            train_seconds,
            fingerprint,
        })
    }
}

/// Trains a fresh extractor for `branch` on the samples `idx` of
/// `(encoded, labels, classes)`, adding augmented views for inertial
/// branches.
pub fn train_branch(
    (encoded, labels, classes): (&[EncodedSample], &[usize], usize),
    idx: &[usize],
    branch: Branch,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(CnnModel, Vec<EpochLog>)> {
    if idx.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    let ext = if branch.is_depth() {
        &cfg.depth
    } else {
        &cfg.signal
    };
    let mut images = Vec::new();
    let mut targets = Vec::new();
    for &i in idx {
        let s = &encoded[i];
        images.push(s.view(branch).clone());
        targets.push(labels[i]);
        if !branch.is_depth() {
            for extra in s.augmented_views(branch) {
                images.push(extra.clone());
                targets.push(labels[i]);
            }
        }
    }
    let shape: Shape = images[0].shape();
    let model = build_signal_cnn_with(shape, ext.filters, ext.hidden_fc, classes)?;
    let tc = TrainConfig {
        seed,
        reinitialize: true,
        ..ext.train
    };
    train(&model, &images, &targets, &tc)
}

/// Runs every repeat of `kind` on `data`. `on_repeat` sees each outcome as
/// it completes.
pub fn run_framework_with(
    kind: FrameworkKind,
    data: &Dataset,
    cfg: &PipelineConfig,
    mut on_repeat: impl FnMut(usize, &RepeatOutcome),
) -> Result<RunReport> {
    let encoded = encode_dataset(data, cfg)?;
    let labels = data.labels();
    let ctx = |repeat| RepeatContext {
        kind,
        encoded: &encoded,
        labels: &labels,
        classes: data.classes(),
        cfg,
        repeat,
    };
    let mut outcomes = Vec::with_capacity(cfg.split.repeats);
    for r in 0..cfg.split.repeats {
        let part = split(data.len(), &cfg.split, r)?;
        let outcome = ctx(r).run(&part.train, &part.test)?;
        on_repeat(r, &outcome);
        outcomes.push(outcome);
    }
    evaluate(kind, &data.class_names, &cfg.split, &outcomes)
}

pub fn run_framework(
    kind: FrameworkKind,
    data: &Dataset,
    cfg: &PipelineConfig,
) -> Result<RunReport> {
    run_framework_with(kind, data, cfg, |_, _| {})
}

pub fn run_multistage(data: &Dataset, cfg: &PipelineConfig) -> Result<RunReport> {
    run_framework(FrameworkKind::Multistage, data, cfg)
}

pub fn run_hybrid(data: &Dataset, cfg: &PipelineConfig) -> Result<RunReport> {
    run_framework(FrameworkKind::Hybrid, data, cfg)
}

pub fn run_efficient(data: &Dataset, cfg: &PipelineConfig) -> Result<RunReport> {
    run_framework(FrameworkKind::Efficient, data, cfg)
}
