//! Dataset handling, the evaluation protocol and the three fusion
//! frameworks.

mod framework;
mod manifest;
mod report;
mod split;
mod synth;

pub use framework::{
    encode_dataset, run_efficient, run_framework, run_framework_with, run_hybrid, run_multistage,
    train_branch, Branch, EncodedSample, ExtractorConfig, FrameworkKind, InertialViews,
    PipelineConfig,
};
pub use manifest::{load_dataset, parse_manifest, Dataset, Manifest, ManifestEntry, Sample};
pub use report::{evaluate, RepeatOutcome, RunReport};
pub use split::{split, Partition, SplitSpec};
pub use synth::{synth_dataset, write_dataset, SynthConfig, SYNTH_CLASS_NAMES};
