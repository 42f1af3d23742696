mod common;

use coinforge_core::params::{crusader_fault_bound, derive_params, CoinParams};
use coinforge_core::simnet::Output;
use common::{crusader_case, crusader_violation, Choice, Schedule};
use proptest::prelude::*;

fn params(n: usize, z: f64, k: f64, alpha: f64, eps_frac: f64) -> CoinParams {
    CoinParams {
        n,
        t: 0,
        z,
        k,
        epsilon: alpha * eps_frac,
        alpha,
        delta: 1.0,
        r: 1.0,
    }
}

proptest! {
    #[test]
    fn derived_values_respect_their_ranges(
        n in 1usize..200_000,
        z in 0.001f64..2.0,
        k in 2.0f64..8.0,
        alpha in 0.01f64..=(1.0 / 3.0),
        eps_frac in 0.01f64..0.99,
    ) {
        let p = params(n, z, k, alpha, eps_frac);
        let d = derive_params(&p).unwrap();
        prop_assert_eq!(d.q % 2, 1);
        prop_assert!(d.z_prime >= z / 3.0 - 1e-15 && d.z_prime <= z + 1e-15);
        prop_assert!(d.s >= 1 && d.s <= n);
        prop_assert!(d.c >= 1);
        prop_assert!(d.delta_cap >= 1 && d.delta_cap <= d.s.div_ceil(3) * 2 + 1);
        prop_assert!(d.live_threshold <= d.q);
        prop_assert!(d.live_threshold > d.q / 2);
        prop_assert_eq!(d.output_threshold, 2 * n / 3 + 1);
    }

    #[test]
    fn larger_z_never_tightens_the_committee(
        n in 1usize..200_000,
        z in 0.001f64..1.5,
        bump in 0.0f64..0.5,
        k in 2.0f64..8.0,
        alpha in 0.01f64..=(1.0 / 3.0),
        eps_frac in 0.01f64..0.99,
    ) {
        let lo = derive_params(&params(n, z, k, alpha, eps_frac)).unwrap();
        let hi = derive_params(&params(n, z + bump, k, alpha, eps_frac)).unwrap();
        prop_assert_eq!(lo.q, hi.q);
        prop_assert!(hi.z_prime >= lo.z_prime);
        prop_assert!(hi.c >= lo.c);
        prop_assert!(hi.s <= lo.s);
        prop_assert!(hi.d >= lo.d);
    }

    #[test]
    fn an_odd_number_of_bits_never_ties(bits in proptest::collection::vec(any::<bool>(), 1..64)) {
        let q = if bits.len() % 2 == 0 { bits.len() - 1 } else { bits.len() };
        let ones = bits[..q].iter().filter(|b| **b).count();
        prop_assert_ne!(2 * ones, q);
    }

    #[test]
    fn crusader_tolerates_its_fault_bound(
        s in 4usize..17,
        inputs_seed in any::<u64>(),
        val in proptest::collection::vec(0usize..4, 17),
        aux in proptest::collection::vec(0usize..4, 17),
        slow in proptest::option::of(any::<bool>()),
        seed in any::<u64>(),
    ) {
        let f = crusader_fault_bound(s);
        let inputs: Vec<bool> = (0..s).map(|i| (inputs_seed >> (i % 64)) & 1 == 1).collect();
        let byz: Vec<usize> = (s - f..s).collect();
        let schedule = slow.map_or(Schedule::Random, Schedule::SlowBit);
        let case = crusader_case(
            &inputs,
            &byz,
            val.iter().map(|&c| Choice::from_index(c)).collect(),
            aux.iter().map(|&c| Choice::from_index(c)).collect(),
            schedule,
            seed,
        );
        prop_assert_eq!(crusader_violation(&case), None);
        prop_assert!(case.report.latency.unwrap() <= 3.0 + 1e-9, "latency {:?}", case.report.latency);
        let honest_messages: u64 = case.report.honest_msgs_by_kind.values().sum();
        prop_assert!(honest_messages <= 4 * (s * s) as u64);
    }

    #[test]
    fn crusader_agrees_when_honest_inputs_agree(
        s in 4usize..13,
        b in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let f = crusader_fault_bound(s);
        let byz: Vec<usize> = (0..f).collect();
        let case = crusader_case(
            &vec![b; s],
            &byz,
            vec![Choice::from_index(if b { 1 } else { 2 }); s],
            vec![Choice::Both; s],
            Schedule::SlowBit(b),
            seed,
        );
        for p in f..s {
            prop_assert_eq!(case.report.outputs[p].clone(), Some(Output::Bit(b)));
        }
    }
}
