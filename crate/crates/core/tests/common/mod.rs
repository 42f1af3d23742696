//! Scenario builders shared by the integration tests.

#![allow(dead_code)]

use coinforge_core::combinatorics::{
    gen_publish_graph, sample_without_replacement, CommitteeLayout, Verification,
};
use coinforge_core::config::ExperimentConfig;
use coinforge_core::params::{CoinParams, ParamOverrides, ParamsDocument};
use coinforge_core::protocols::{crusader_parties, publish_parties};
use coinforge_core::simnet::{
    run_simulation, Adversary, AdversaryAction, EnvelopeMeta, Event, Output, Payload, SimConfig,
    Sub, Tag, Time, TrialReport, View, TICKS_PER_UNIT,
};
use coinforge_core::PartyId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a byzantine party sends to one recipient for one message kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Choice {
    Silent,
    Zero,
    One,
    Both,
}

impl Choice {
    pub const ALL: [Choice; 4] = [Choice::Silent, Choice::Zero, Choice::One, Choice::Both];

    pub fn bits(self) -> &'static [bool] {
        match self {
            Choice::Silent => &[],
            Choice::Zero => &[false],
            Choice::One => &[true],
            Choice::Both => &[false, true],
        }
    }

    pub fn from_index(i: usize) -> Choice {
        Choice::ALL[i % 4]
    }
}

/// How honest envelopes are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    Random,
    /// Bits equal to the given value arrive at the deadline, the rest at once.
    SlowBit(bool),
}

/// Corrupted crusader members sharing a fixed per-recipient VAL and AUX
/// behavior.
pub struct CrusaderByzantine {
    pub byz: Vec<PartyId>,
    pub val: Vec<Choice>,
    pub aux: Vec<Choice>,
    pub schedule: Schedule,
    pub rng: ChaCha8Rng,
}

impl Adversary for CrusaderByzantine {
    fn name(&self) -> String {
        "crusader_byzantine".into()
    }

    fn init(&mut self, view: &View) -> Vec<AdversaryAction> {
        let mut actions: Vec<AdversaryAction> = self
            .byz
            .iter()
            .map(|&p| AdversaryAction::Corrupt(p))
            .collect();
        for &from in &self.byz {
            for to in (0..view.n).filter(|to| !self.byz.contains(to)) {
                for (sub, choice) in [(Sub::CrusVal, self.val[to]), (Sub::CrusAux, self.aux[to])] {
                    for &b in choice.bits() {
                        actions.push(AdversaryAction::Inject {
                            from,
                            to,
                            tag: Tag::new(0, 0, sub),
                            payload: Payload::Bit(b),
                            delay: Time(self.rng.random_range(1..=TICKS_PER_UNIT)),
                        });
                    }
                }
            }
        }
        actions
    }

    fn delay(&mut self, view: &View, env: &EnvelopeMeta) -> Option<Time> {
        match self.schedule {
            Schedule::Random => Some(Time(
                self.rng.random_range(1..=1024) * (TICKS_PER_UNIT / 1024),
            )),
            Schedule::SlowBit(slow) => match view.payload(env.id) {
                Some(Payload::Bit(b)) if *b == slow => Some(Time::UNIT),
                _ => Some(Time(TICKS_PER_UNIT / 64)),
            },
        }
    }
}

pub struct CrusaderCase {
    pub inputs: Vec<bool>,
    pub byz: Vec<PartyId>,
    pub report: TrialReport,
}

/// Runs crusader among `inputs.len()` members, `byz` of them byzantine.
pub fn crusader_case(
    inputs: &[bool],
    byz: &[PartyId],
    val: Vec<Choice>,
    aux: Vec<Choice>,
    schedule: Schedule,
    seed: u64,
) -> CrusaderCase {
    let mut cfg = SimConfig::new(inputs.len(), byz.len());
    cfg.full_information = matches!(schedule, Schedule::SlowBit(_));
    let mut adv = CrusaderByzantine {
        byz: byz.to_vec(),
        val,
        aux,
        schedule,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let report = run_simulation(crusader_parties(inputs), &mut adv, &cfg, seed)
        .expect("strategy within budget");
    CrusaderCase {
        inputs: inputs.to_vec(),
        byz: byz.to_vec(),
        report,
    }
}

/// Validity, weak agreement and liveness of one crusader trial.
pub fn crusader_violation(case: &CrusaderCase) -> Option<String> {
    let r = &case.report;
    if !r.live {
        return Some("not live".into());
    }
    let honest: Vec<usize> = (0..case.inputs.len())
        .filter(|p| !case.byz.contains(p))
        .collect();
    let outs: Vec<&Output> = honest
        .iter()
        .map(|&p| r.outputs[p].as_ref().expect("live"))
        .collect();
    let has = |b| outs.iter().any(|o| **o == Output::Bit(b));
    if has(false) && has(true) {
        return Some("weak agreement".into());
    }
    let first = case.inputs[honest[0]];
    if honest.iter().all(|&p| case.inputs[p] == first)
        && outs.iter().any(|o| **o != Output::Bit(first))
    {
        return Some("validity".into());
    }
    None
}

/// Corrupts up to `count` committee members at random points of the run,
/// optionally dropping their in-flight messages, and has each send `forged`
/// (⊥ or a bit) to its publish receivers.
pub struct PublishCorruptor {
    pub targets: Vec<PartyId>,
    pub at_event: Vec<u64>,
    pub receivers: Vec<Vec<PartyId>>,
    pub forged: Option<bool>,
    pub drop: bool,
    pub events: u64,
    pub done: usize,
    pub rng: ChaCha8Rng,
}

impl Adversary for PublishCorruptor {
    fn name(&self) -> String {
        "publish_corruptor".into()
    }

    fn delay(&mut self, _view: &View, _env: &EnvelopeMeta) -> Option<Time> {
        Some(Time(
            self.rng.random_range(1..=1024) * (TICKS_PER_UNIT / 1024),
        ))
    }

    fn react(&mut self, _view: &View, _event: &Event) -> Vec<AdversaryAction> {
        self.events += 1;
        let mut actions = Vec::new();
        while self.done < self.targets.len() && self.events >= self.at_event[self.done] {
            let p = self.targets[self.done];
            actions.push(AdversaryAction::Corrupt(p));
            if self.drop {
                actions.push(AdversaryAction::DropUndeliveredFrom(p));
            }
            for &to in &self.receivers[self.done] {
                actions.push(AdversaryAction::Inject {
                    from: p,
                    to,
                    tag: Tag::new(0, 0, Sub::Pub),
                    payload: Payload::Ternary(self.forged),
                    delay: Time(1),
                });
            }
            self.done += 1;
        }
        actions
    }
}

pub struct PublishCase {
    pub layout: CommitteeLayout,
    pub inputs: Vec<bool>,
    pub report: TrialReport,
}

/// One publish trial at `(s, n, d, delta_cap)` with up to `max_corrupt`
/// adaptively corrupted members. `common` fixes a common member input;
/// otherwise inputs are random.
pub fn publish_case(
    s: usize,
    n: usize,
    d: usize,
    delta_cap: usize,
    max_corrupt: usize,
    common: Option<bool>,
    seed: u64,
) -> PublishCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let universe: Vec<PartyId> = (0..n).collect();
    let committee = sample_without_replacement(&mut rng, &universe, s);
    let graph = gen_publish_graph(
        0,
        &committee,
        n,
        d,
        delta_cap,
        seed,
        Verification::Exhaustive,
        10_000_000,
        1_000,
    )
    .expect("graph generates")
    .value;
    let layout = CommitteeLayout {
        n,
        q: 1,
        s,
        seed,
        committees: vec![committee.clone()],
        graphs: vec![graph.clone()],
        verified: Verification::Exhaustive,
    };
    let inputs: Vec<bool> = (0..s)
        .map(|_| common.unwrap_or_else(|| rng.random()))
        .collect();
    let count = rng.random_range(0..=max_corrupt);
    let mut targets = committee.clone();
    for i in 0..count {
        let j = rng.random_range(i..targets.len());
        targets.swap(i, j);
    }
    targets.truncate(count);
    let mut at_event: Vec<u64> = (0..count).map(|_| rng.random_range(0..400)).collect();
    at_event.sort_unstable();
    let receivers = targets.iter().map(|&m| graph.receivers_of(m)).collect();
    let forged = match rng.random_range(0..3) {
        0 => None,
        1 => Some(false),
        _ => Some(true),
    };
    let mut adv = PublishCorruptor {
        targets,
        at_event,
        receivers,
        forged,
        drop: rng.random(),
        events: 0,
        done: 0,
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed),
    };
    let parties = publish_parties(&layout, 0, &inputs).expect("graph attached");
    let report = run_simulation(parties, &mut adv, &SimConfig::new(n, max_corrupt), seed)
        .expect("within budget");
    PublishCase {
        layout,
        inputs,
        report,
    }
}

/// Parameters for the end-to-end scenarios: `n = 16`, `q = 5` full
/// committees, `z' = 0.1`, so the live threshold equals `q`.
pub fn transform_config(t: usize, strategy: &str, trials: u64, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ParamsDocument {
        params: CoinParams {
            n: 16,
            t,
            z: 0.3,
            k: 4.0,
            epsilon: 1.0 / 12.0,
            alpha: 1.0 / 3.0,
            delta: 1.0,
            r: 1.0,
        },
        overrides: ParamOverrides {
            q: Some(5),
            ..Default::default()
        },
    });
    cfg.strategy = strategy.to_string();
    cfg.trials = trials;
    cfg.seed = seed;
    cfg
}
