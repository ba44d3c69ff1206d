//! Labeled samples and on-disk corpus directories.
//!
//! A corpus directory holds a `manifest.json` listing SVOL volume/label pairs by
//! relative path:
//!
//! ```json
//! { "samples": [ { "volume": "vol_000.svol", "labels": "lab_000.svol" } ] }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::svol;
use crate::tensor::{LabelMap, Volume};

pub const MANIFEST: &str = "manifest.json";

/// A volume with its ground-truth label map.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub volume: Volume,
    pub labels: LabelMap,
}

impl Sample {
    pub fn new(volume: Volume, labels: LabelMap) -> Result<Self> {
        if !volume.dims().same_spatial(&labels.dims()) {
            return Err(Error::DimMismatch(format!("volume {} vs labels {}", volume.dims(), labels.dims())));
        }
        Ok(Self { volume, labels })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub volume: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub samples: Vec<ManifestEntry>,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read corpus manifest {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads every sample listed in `dir/manifest.json`.
pub fn load_corpus(dir: &Path) -> Result<Vec<Sample>> {
    let manifest = read_manifest(dir)?;
    manifest
        .samples
        .iter()
        .map(|e| {
            let volume = svol::read_volume_file(&dir.join(&e.volume))?;
            let labels = svol::read_labels_file(&dir.join(&e.labels))?;
            Sample::new(volume, labels)
        })
        .collect()
}

/// Writes samples as `vol_NNN.svol` / `lab_NNN.svol` plus a manifest.
pub fn write_corpus(dir: &Path, samples: &[Sample]) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest::default();
    for (i, s) in samples.iter().enumerate() {
        let entry = ManifestEntry {
            volume: PathBuf::from(format!("vol_{i:03}.svol")),
            labels: PathBuf::from(format!("lab_{i:03}.svol")),
        };
        svol::write_volume_file(&dir.join(&entry.volume), &s.volume)?;
        svol::write_labels_file(&dir.join(&entry.labels), &s.labels)?;
        manifest.samples.push(entry);
    }
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
