//! Deterministic synthetic corpus: prolongation-like, repetition-like, fluent
//! and noise-only clips written as WAV files with a training manifest.

pub mod analysis;
mod generators;

pub use generators::{gen_fluent_clip, gen_noise_clip, gen_prolongation_clip, gen_repetition_clip};

use std::fmt;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{write_manifest, write_wav_file, AudioClip, AudioError, Label, ManifestEntry};

pub const MANIFEST_NAME: &str = "manifest.csv";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] AudioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipClass {
    Prolongation,
    Repetition,
    Fluent,
    Noise,
}

impl ClipClass {
    pub const ALL: [ClipClass; 4] = [
        ClipClass::Prolongation,
        ClipClass::Repetition,
        ClipClass::Fluent,
        ClipClass::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClipClass::Prolongation => "prolongation",
            ClipClass::Repetition => "repetition",
            ClipClass::Fluent => "fluent",
            ClipClass::Noise => "noise",
        }
    }

    pub fn generate(self, seed: u64, seconds: f64) -> AudioClip {
        match self {
            ClipClass::Prolongation => gen_prolongation_clip(seed, seconds),
            ClipClass::Repetition => gen_repetition_clip(seed, seconds),
            ClipClass::Fluent => gen_fluent_clip(seed, seconds),
            ClipClass::Noise => gen_noise_clip(seed, seconds),
        }
    }

    /// `(prolongation, repetition)` manifest labels.
    pub fn labels(self) -> (Label, Label) {
        match self {
            ClipClass::Prolongation => (Label::Stutter, Label::NonStutter),
            ClipClass::Repetition => (Label::NonStutter, Label::Stutter),
            ClipClass::Fluent | ClipClass::Noise => (Label::NonStutter, Label::NonStutter),
        }
    }
}

impl fmt::Display for ClipClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_clips: usize,
    pub ratio_stutter: f64,
    pub seed: u64,
    pub clip_seconds: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_clips: 200,
            ratio_stutter: 0.25,
            seed: 0,
            clip_seconds: 2.0,
        }
    }
}

/// Clips per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub prolongation: usize,
    pub repetition: usize,
    pub fluent: usize,
    pub noise: usize,
}

impl ClassCounts {
    pub fn stutter(&self) -> usize {
        self.prolongation + self.repetition
    }

    pub fn non_stutter(&self) -> usize {
        self.fluent + self.noise
    }

    pub fn get(&self, class: ClipClass) -> usize {
        match class {
            ClipClass::Prolongation => self.prolongation,
            ClipClass::Repetition => self.repetition,
            ClipClass::Fluent => self.fluent,
            ClipClass::Noise => self.noise,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_clips < 4 {
            return Err(SynthError::InvalidSpec(format!(
                "n_clips must be at least 4 so every class appears, got {}",
                self.n_clips
            )));
        }
        if !(self.ratio_stutter > 0.0 && self.ratio_stutter < 1.0) {
            return Err(SynthError::InvalidSpec(format!(
                "ratio_stutter must lie in (0, 1), got {}",
                self.ratio_stutter
            )));
        }
        if !self.clip_seconds.is_finite() || self.clip_seconds < 1.0 {
            return Err(SynthError::InvalidSpec(format!(
                "clip_seconds must be at least 1, got {}",
                self.clip_seconds
            )));
        }
        Ok(())
    }

    /// Stutter clips are `round(n · ratio)`, kept within `[2, n − 2]`, with
    /// prolongation taking the odd one. A fifth of the rest is noise, at least one.
    pub fn class_counts(&self) -> ClassCounts {
        let n = self.n_clips;
        let stutter = ((n as f64 * self.ratio_stutter).round() as usize).clamp(2, n - 2);
        let non_stutter = n - stutter;
        let noise = (non_stutter / 5).max(1);
        ClassCounts {
            prolongation: stutter.div_ceil(2),
            repetition: stutter / 2,
            fluent: non_stutter - noise,
            noise,
        }
    }

    /// Every clip's class and seed, in manifest order.
    pub fn plan(&self) -> Vec<(ClipClass, usize, u64)> {
        let counts = self.class_counts();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        ClipClass::ALL
            .iter()
            .flat_map(|&class| (0..counts.get(class)).map(move |i| (class, i)))
            .map(|(class, i)| (class, i, rng.next_u64()))
            .collect()
    }
}

/// Writes every clip as `{class}_{index}.wav` plus `manifest.csv` into
/// `out_dir` and returns the manifest path.
pub fn build_corpus(spec: &CorpusSpec, out_dir: impl AsRef<Path>) -> Result<PathBuf, SynthError> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|source| AudioError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut entries = Vec::with_capacity(spec.n_clips);
    for (class, index, seed) in spec.plan() {
        let name = format!("{}_{index:04}.wav", class.name());
        write_wav_file(
            out_dir.join(&name),
            &class.generate(seed, spec.clip_seconds),
        )?;
        let (prolongation, repetition) = class.labels();
        entries.push(ManifestEntry {
            path: PathBuf::from(name),
            prolongation,
            repetition,
        });
    }
    let manifest = out_dir.join(MANIFEST_NAME);
    write_manifest(&manifest, &entries)?;
    log::info!("wrote {} clips to {}", entries.len(), out_dir.display());
    Ok(manifest)
}
