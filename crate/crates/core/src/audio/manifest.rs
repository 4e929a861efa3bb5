use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::AudioError;

pub const MANIFEST_HEADER: [&str; 3] = ["path", "label_prolongation", "label_repetition"];

/// Per-detector label of a manifest row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    NonStutter,
    Stutter,
    /// `NA`: diagnosis-only input.
    Unlabeled,
}

impl Label {
    pub fn as_target(self) -> Option<f64> {
        match self {
            Label::NonStutter => Some(0.0),
            Label::Stutter => Some(1.0),
            Label::Unlabeled => None,
        }
    }
}

impl FromStr for Label {
    type Err = AudioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "0" => Ok(Label::NonStutter),
            "1" => Ok(Label::Stutter),
            "NA" => Ok(Label::Unlabeled),
            other => Err(AudioError::Manifest(format!(
                "label must be 0, 1 or NA, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::NonStutter => "0",
            Label::Stutter => "1",
            Label::Unlabeled => "NA",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// As written in the manifest; relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub prolongation: Label,
    pub repetition: Label,
}

impl ManifestEntry {
    pub fn resolve(&self, manifest_dir: &Path) -> PathBuf {
        if self.path.is_absolute() {
            self.path.clone()
        } else {
            manifest_dir.join(&self.path)
        }
    }
}

fn csv_err(e: csv::Error) -> AudioError {
    AudioError::Manifest(e.to_string())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, AudioError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => AudioError::Io {
                path: path.display().to_string(),
                source,
            },
            other => AudioError::Manifest(format!("{other:?}")),
        })?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(AudioError::Manifest(format!(
            "expected header {}, found {}",
            MANIFEST_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(ManifestEntry {
                path: PathBuf::from(&rec[0]),
                prolongation: rec[1].parse()?,
                repetition: rec[2].parse()?,
            })
        })
        .collect()
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<(), AudioError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(MANIFEST_HEADER).map_err(csv_err)?;
    for e in entries {
        writer
            .write_record([
                e.path.to_string_lossy().as_ref(),
                &e.prolongation.to_string(),
                &e.repetition.to_string(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })
}
