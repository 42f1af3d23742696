use std::hint::black_box;

use coinforge_core::combinatorics::{verify_committees, CommitteeLayout, Verification};
use coinforge_core::config::ExperimentConfig;
use coinforge_core::experiment::Setup;
use coinforge_core::params::{derive_params, CoinParams, ParamOverrides, ParamsDocument};
use criterion::{criterion_group, criterion_main, Criterion};

fn params(n: usize) -> CoinParams {
    CoinParams {
        n,
        t: 0,
        z: 0.3,
        k: 4.0,
        epsilon: 1.0 / 12.0,
        alpha: 1.0 / 3.0,
        delta: 1.0,
        r: 1.0,
    }
}

fn derive(c: &mut Criterion) {
    let p = params(1_000_000);
    c.bench_function("derive_params n=1e6", |b| {
        b.iter(|| derive_params(black_box(&p)).unwrap())
    });
}

fn verify(c: &mut Criterion) {
    // Nine arbitrary 6-subsets of 14 parties, checked over all C(14, 3) sets.
    let committees = (0..9)
        .map(|i| {
            let mut m: Vec<usize> = (0..6).map(|j| (i * 5 + j * 3) % 14).collect();
            m.sort_unstable();
            m.dedup();
            m
        })
        .collect();
    let layout = CommitteeLayout {
        n: 14,
        q: 9,
        s: 6,
        seed: 0,
        committees,
        graphs: Vec::new(),
        verified: Verification::Unverified,
    };
    c.bench_function("verify_committees exhaustive n=14 q=9", |b| {
        b.iter(|| {
            verify_committees(
                black_box(&layout),
                1.0 / 3.0,
                1.0 / 12.0,
                3,
                Verification::Exhaustive,
                u64::MAX,
                0,
            )
            .unwrap()
        })
    });
}

fn transform_trial(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::new(ParamsDocument {
        params: params(16),
        overrides: ParamOverrides {
            q: Some(5),
            ..Default::default()
        },
    });
    cfg.strategy = "random_delay".into();
    let setup = Setup::from_config(&cfg).unwrap();
    let mut seed = 0;
    c.bench_function("transformation trial n=16 q=5", |b| {
        b.iter(|| {
            seed += 1;
            setup.trial(&cfg, seed, false).unwrap()
        })
    });
}

criterion_group!(benches, derive, verify, transform_trial);
criterion_main!(benches);
