mod common;

use coinforge_core::analysis::{chi_square_uniform, run_trials};
use coinforge_core::combinatorics::{CommitteeLayout, Verification};
use coinforge_core::experiment::{run_experiment, ExperimentError, Setup};
use coinforge_core::params::ParamOverrides;
use coinforge_core::protocols::CoinMode;
use coinforge_core::simnet::{Output, SimError};
use common::transform_config;

fn sparse_config(strategy: &str, trials: u64) -> coinforge_core::ExperimentConfig {
    let mut cfg = transform_config(0, strategy, trials, 21);
    cfg.params.params.n = 30;
    cfg.params.overrides = ParamOverrides {
        q: Some(7),
        s: Some(10),
        c: Some(5),
        d: Some(3),
        ..Default::default()
    };
    cfg.verification = Verification::Sampled { trials: 2_000 };
    cfg
}

#[test]
fn proper_committees_reach_agreement() {
    let cfg = sparse_config("random_delay", 200);
    let (run, reports) = run_experiment(&cfg).unwrap();
    assert_eq!(run.derived.s, 10);
    assert!(reports.iter().all(|r| r.live && r.agreed));
    assert!(run.audit.passed(), "{:?}", run.audit.first_failure);
    assert_eq!(run.estimate.agreement_rate, 1.0);
}

#[test]
fn unverified_layout_with_parallel_instances() {
    let mut cfg = sparse_config("fifo", 20);
    cfg.verification = Verification::Unverified;
    cfg.ell = 3;
    let setup = Setup::from_config(&cfg).unwrap();
    assert_eq!(setup.layout.verified, Verification::Unverified);
    let report = setup.trial(&cfg, 4, false).unwrap();
    assert!(report.live && report.agreed);
    match report.output {
        Some(Output::Bits(bits)) => assert_eq!(bits.len(), 3),
        other => panic!("expected three bits, got {other:?}"),
    }
}

#[test]
fn committee_coins_run_inside_the_transformation() {
    let mut cfg = transform_config(0, "random_delay", 10, 5);
    cfg.params.params.n = 13;
    cfg.params.overrides.s = Some(7);
    cfg.coin = CoinMode::BenOr { t_local: 2 };
    cfg.verification = Verification::Unverified;
    let (run, reports) = run_experiment(&cfg).unwrap();
    assert!(reports.iter().all(|r| r.live && r.agreed));
    assert!(reports
        .iter()
        .all(|r| r.honest_msgs_by_kind.get("COIN").copied().unwrap_or(0) > 0));
    assert!(run.audit.passed(), "{:?}", run.audit.first_failure);
}

#[test]
fn biaser_needs_full_information() {
    let mut cfg = transform_config(0, "benor_biaser:2", 1, 5);
    cfg.coin = CoinMode::BenOr { t_local: 2 };
    let setup = Setup::from_config(&cfg).unwrap();
    match setup.trial(&cfg, 1, false) {
        Err(ExperimentError::Sim(SimError::Strategy(_))) => {}
        other => panic!("expected a strategy violation, got {other:?}"),
    }
}

#[test]
fn layouts_round_trip_through_json() {
    let setup = Setup::from_config(&sparse_config("fifo", 1)).unwrap();
    let back = CommitteeLayout::from_json(&setup.layout.to_json()).unwrap();
    assert_eq!(back.committees, setup.layout.committees);
    assert_eq!(back.graphs.len(), setup.layout.graphs.len());
}

#[test]
fn mismatched_layout_file_is_rejected() {
    let dir = std::env::temp_dir().join(format!("coinforge-e2e-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("layout.json");
    std::fs::write(&path, CommitteeLayout::full(16, 3, 0).to_json()).unwrap();
    let mut cfg = transform_config(0, "fifo", 1, 0);
    cfg.layout = Some(path);
    let err = Setup::from_config(&cfg).unwrap_err();
    assert!(matches!(err, ExperimentError::LayoutMismatch(_)), "{err}");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn eight_parallel_instances_are_uniform_over_bytes() {
    let mut cfg = transform_config(0, "random_delay", 100_000, 8);
    cfg.params.params.n = 4;
    cfg.params.overrides.q = Some(3);
    cfg.ell = 8;
    let setup = Setup::from_config(&cfg).unwrap();
    let reports = run_trials(cfg.trials, cfg.seed, |seed| {
        setup.trial(&cfg, seed, false).map_err(|e| match e {
            ExperimentError::Sim(s) => s,
            other => panic!("{other}"),
        })
    })
    .unwrap();
    let mut counts = vec![0u64; 256];
    for r in &reports {
        assert!(r.agreed);
        match &r.output {
            Some(Output::Bits(bits)) => {
                let byte = bits.iter().fold(0usize, |acc, b| acc << 1 | *b as usize);
                counts[byte] += 1;
            }
            other => panic!("expected eight bits, got {other:?}"),
        }
    }
    let (stat, p) = chi_square_uniform(&counts);
    assert!(p > 0.001, "chi-square {stat:.1}, p = {p:.2e}");
}

#[test]
fn honest_outputs_follow_the_fair_coin_majority() {
    let probe = transform_config(0, "fifo", 0, 0);
    let t = probe.params.params.fault_limit();
    let strategy = "committee_targeter_capped:0,1,2,3,4+publish_delayer:0.5+random_delay";
    let (run, reports) = run_experiment(&transform_config(t, strategy, 300, 13)).unwrap();
    let (q, z_prime) = (run.derived.q, run.derived.z_prime);
    let mut checked = 0;
    for r in &reports {
        let good: Vec<_> = r.coins.iter().filter(|c| !c.bad).collect();
        // With q odd the bit sum can never sit exactly at q/2.
        let ones = r.coins.iter().filter(|c| c.bit).count();
        assert_ne!(2 * ones, q);
        if good.iter().any(|c| !c.fair) || good.len() < q {
            continue;
        }
        let margin = (ones as f64 - q as f64 / 2.0).abs();
        if margin >= 5.0 * z_prime * (q as f64).sqrt() / 8.0 {
            checked += 1;
            assert!(r.agreed, "seed {}", r.seed);
            assert_eq!(r.output_bit(), Some(2 * ones > q), "seed {}", r.seed);
        }
    }
    assert!(checked > 0);
}
