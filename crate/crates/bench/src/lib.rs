//! Shared fixtures for the criterion benchmarks.

use stutter_core::audio::segment;
use stutter_core::synth::gen_fluent_clip;
use stutter_core::{FeatureConfig, MfccMatrix, Segment};

/// One second of synthetic fluent speech at the canonical rate.
pub fn one_second_segment(seed: u64) -> Segment {
    segment(&gen_fluent_clip(seed, 1.0))
        .into_iter()
        .next()
        .expect("a one-second clip yields one segment")
}

pub fn full_mfcc(seed: u64) -> MfccMatrix {
    stutter_core::features::mfcc(&one_second_segment(seed), &FeatureConfig::default())
        .expect("default configuration extracts")
}
