//! Plain-text dataset manifests.
//!
//! ```text
//! # comment
//! rate_hz = 50
//! classes = wave, clap, throw
//! [samples]
//! subject,label,inertial,depth
//! s1,0,inertial/0000.csv,depth/0000
//! ```
//!
//! Keys come first, then the sample table. The header row of the table is
//! optional. Paths are relative to the manifest's directory unless absolute.

use std::fs;
use std::path::{Path, PathBuf};

use crate::imaging::{read_depth_dir, read_inertial_csv, DepthSequence, InertialSequence};
use crate::{Error, Result};

const WHAT: &str = "manifest";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub subject: String,
    pub label: usize,
    pub inertial: PathBuf,
    pub depth: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub rate_hz: f64,
    pub class_names: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "rate_hz = {}\nclasses = {}\n[samples]\nsubject,label,inertial,depth\n",
            self.rate_hz,
            self.class_names.join(", ")
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.subject,
                e.label,
                e.inertial.display(),
                e.depth.display()
            ));
        }
        out
    }
}

fn line_error(line: usize, reason: impl std::fmt::Display) -> Error {
    Error::format(WHAT, format!("line {line}: {reason}"))
}

/// Parses manifest text without touching the file system.
pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let mut rate_hz = None;
    let mut names: Option<Vec<String>> = None;
    let mut entries = Vec::new();
    let mut in_samples = false;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[samples]" {
            if in_samples {
                return Err(line_error(n, "duplicate [samples] section"));
            }
            in_samples = true;
            continue;
        }
        if !in_samples {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| line_error(n, "expected key = value"))?;
            let value = value.trim();
            match key.trim() {
                "rate_hz" => {
                    let r: f64 = value
                        .parse()
                        .map_err(|_| line_error(n, format!("bad rate `{value}`")))?;
                    if !(r > 0.0) || !r.is_finite() {
                        return Err(line_error(n, "rate_hz must be positive"));
                    }
                    rate_hz = Some(r);
                }
                "classes" => {
                    let list: Vec<String> =
                        value.split(',').map(|s| s.trim().to_string()).collect();
                    if list.iter().any(String::is_empty) {
                        return Err(line_error(n, "empty class name"));
                    }
                    names = Some(list);
                }
                other => return Err(line_error(n, format!("unknown key `{other}`"))),
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(line_error(
                n,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        if entries.is_empty() && fields[1] == "label" {
            continue;
        }
        let label: usize = fields[1]
            .parse()
            .map_err(|_| line_error(n, format!("bad label `{}`", fields[1])))?;
        if fields[0].is_empty() || fields[2].is_empty() || fields[3].is_empty() {
            return Err(line_error(n, "empty field"));
        }
        entries.push(ManifestEntry {
            subject: fields[0].to_string(),
            label,
            inertial: PathBuf::from(fields[2]),
            depth: PathBuf::from(fields[3]),
        });
    }

    let rate_hz = rate_hz.ok_or_else(|| Error::format(WHAT, "missing rate_hz"))?;
    if entries.is_empty() {
        return Err(Error::format(WHAT, "no samples"));
    }
    let max_label = entries.iter().map(|e| e.label).max().unwrap_or(0);
    let class_names = match names {
        Some(list) => {
            if max_label >= list.len() {
                return Err(Error::format(
                    WHAT,
                    format!("label {max_label} but only {} classes", list.len()),
                ));
            }
            list
        }
        None => (0..=max_label).map(|k| format!("class{k}")).collect(),
    };
    let mut seen = vec![false; class_names.len()];
    entries.iter().for_each(|e| seen[e.label] = true);
    if let Some(gap) = seen.iter().position(|s| !s) {
        return Err(Error::format(WHAT, format!("no samples for label {gap}")));
    }
    Ok(Manifest {
        rate_hz,
        class_names,
        entries,
    })
}

/// One recording with both modalities.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub subject: String,
    pub label: usize,
    pub inertial: InertialSequence,
    pub depth: DepthSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub rate_hz: f64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes()];
        self.samples.iter().for_each(|s| counts[s.label] += 1);
        counts
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads a manifest and every recording it lists.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = parse_manifest(&text).map_err(|e| Error::InvalidFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let samples = manifest
        .entries
        .iter()
        .map(|e| {
            Ok(Sample {
                subject: e.subject.clone(),
                label: e.label,
                inertial: read_inertial_csv(resolve(base, &e.inertial), manifest.rate_hz)?,
                depth: read_depth_dir(resolve(base, &e.depth))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        class_names: manifest.class_names,
        rate_hz: manifest.rate_hz,
        samples,
    })
}
