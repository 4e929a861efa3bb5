use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use stutter_bench::{full_mfcc, one_second_segment};
use stutter_core::detector::{build_prolongation_model, build_repetition_model};
use stutter_core::features::{select_coefficients, MfccExtractor, PROLONGATION_COEFFS};
use stutter_core::therapy::{generate_rule_dataset, train_recommender, PolyKernel, SmoParams};
use stutter_core::{FeatureConfig, Tensor, TherapyCatalog};

fn mfcc(c: &mut Criterion) {
    let segment = one_second_segment(1);
    let extractor = MfccExtractor::new(FeatureConfig::default()).unwrap();
    c.bench_function("mfcc_one_second", |b| {
        b.iter(|| extractor.extract(black_box(&segment)).unwrap())
    });
}

fn forward(c: &mut Criterion) {
    let m = full_mfcc(2);
    let mut prolongation = build_prolongation_model();
    prolongation.init_params(1);
    let p_in = select_coefficients(&m, &PROLONGATION_COEFFS).unwrap();
    let p_in = Tensor::new(vec![2, 44, 1], p_in.values().to_vec()).unwrap();
    c.bench_function("forward_prolongation", |b| {
        b.iter(|| prolongation.predict(black_box(&p_in)).unwrap())
    });

    let mut repetition = build_repetition_model();
    repetition.init_params(1);
    let r_in = Tensor::new(vec![13, 44, 1], m.values().to_vec()).unwrap();
    c.bench_function("forward_repetition", |b| {
        b.iter(|| repetition.predict(black_box(&r_in)).unwrap())
    });
    c.bench_function("backward_repetition", |b| {
        b.iter(|| {
            repetition
                .loss_and_gradients(&[(black_box(&r_in), 1.0)], Some(0))
                .unwrap()
        })
    });
}

fn smo(c: &mut Criterion) {
    let ds = generate_rule_dataset(&TherapyCatalog::default());
    c.bench_function("train_recommender_64_rows", |b| {
        b.iter(|| {
            train_recommender(black_box(&ds), PolyKernel::default(), SmoParams::default()).unwrap()
        })
    });
}

criterion_group!(benches, mfcc, forward, smo);
criterion_main!(benches);
