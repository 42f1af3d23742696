use super::*;

/// Party 0 broadcasts a bit; everyone outputs the first bit received.
/// Receivers echo once to party 0 so there are two rounds of traffic.
struct Relay {
    me: PartyId,
    n: usize,
    got: Option<bool>,
}

impl Party for Relay {
    fn start(&mut self, ctx: &mut Context) {
        if self.me == 0 {
            ctx.send_all(0..self.n, Tag::new(0, 0, Sub::Maj), Payload::Bit(true));
        }
    }

    fn on_message(&mut self, env: &Envelope, _ctx: &mut Context) {
        if let Payload::Bit(b) = env.payload {
            self.got.get_or_insert(b);
        }
    }

    fn output(&self) -> Option<Output> {
        self.got.map(Output::Bit)
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::json!({ "got": self.got })
    }
}

fn relays(n: usize) -> Vec<Box<dyn Party>> {
    (0..n)
        .map(|me| Box::new(Relay { me, n, got: None }) as Box<dyn Party>)
        .collect()
}

struct Scripted {
    init: Vec<AdversaryAction>,
    scale: u64,
}

impl Adversary for Scripted {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn init(&mut self, _view: &View) -> Vec<AdversaryAction> {
        std::mem::take(&mut self.init)
    }

    fn delay(&mut self, _view: &View, env: &EnvelopeMeta) -> Option<Time> {
        Some(Time((env.recipient as u64 + 1) * self.scale))
    }
}

#[test]
fn fifo_benign_run_is_one_round() {
    let cfg = SimConfig::new(5, 1);
    let report = run_simulation(relays(5), &mut Fifo, &cfg, 1).unwrap();
    assert!(report.live && report.agreed);
    assert_eq!(report.output_bit(), Some(true));
    assert_eq!(report.latency, Some(1.0));
    assert_eq!(report.undelivered_honest, 0);
    assert_eq!(report.honest_messages(Sub::Maj), 5);
}

#[test]
fn corrupt_and_drop_suppresses_in_flight_envelopes() {
    struct DropSender;
    impl Adversary for DropSender {
        fn name(&self) -> String {
            "drop".into()
        }
        fn react(&mut self, view: &View, _event: &Event) -> Vec<AdversaryAction> {
            if view.is_corrupted(0) {
                Vec::new()
            } else {
                vec![
                    AdversaryAction::Corrupt(0),
                    AdversaryAction::DropUndeliveredFrom(0),
                ]
            }
        }
    }
    let mut cfg = SimConfig::new(4, 1);
    cfg.record_log = true;
    let report = run_simulation(relays(4), &mut DropSender, &cfg, 2).unwrap();
    // The self-delivery happens first; everything else is still in flight.
    assert!(report.outputs[1..].iter().all(Option::is_none));
    assert!(!report.live);
    assert_eq!(report.corruptions, vec![(0, 0.0)]);
    assert_eq!(report.log.iter().filter(|r| r.kind == "drop").count(), 3);
}

#[test]
fn corruption_beyond_budget_is_a_violation() {
    let mut adv = Scripted {
        init: vec![AdversaryAction::Corrupt(1), AdversaryAction::Corrupt(2)],
        scale: 1,
    };
    let err = run_simulation(relays(4), &mut adv, &SimConfig::new(4, 1), 0).unwrap_err();
    assert_eq!(
        err,
        SimError::Strategy(StrategyViolation::BudgetExceeded { attempted: 2, t: 1 })
    );
}

#[test]
fn dropping_or_injecting_for_honest_parties_is_a_violation() {
    let mut adv = Scripted {
        init: vec![AdversaryAction::DropUndeliveredFrom(0)],
        scale: 1,
    };
    let err = run_simulation(relays(3), &mut adv, &SimConfig::new(3, 1), 0).unwrap_err();
    assert_eq!(
        err,
        SimError::Strategy(StrategyViolation::DropFromHonest(0))
    );

    let mut adv = Scripted {
        init: vec![AdversaryAction::Inject {
            from: 2,
            to: 1,
            tag: Tag::new(0, 0, Sub::Maj),
            payload: Payload::Bit(false),
            delay: Time(1),
        }],
        scale: 1,
    };
    let err = run_simulation(relays(3), &mut adv, &SimConfig::new(3, 1), 0).unwrap_err();
    assert_eq!(
        err,
        SimError::Strategy(StrategyViolation::InjectFromHonest(2))
    );
}

#[test]
fn injected_messages_count_as_byzantine() {
    let mut adv = Scripted {
        init: vec![
            AdversaryAction::Corrupt(2),
            AdversaryAction::Inject {
                from: 2,
                to: 1,
                tag: Tag::new(0, 0, Sub::Maj),
                payload: Payload::Bit(false),
                delay: Time(1),
            },
        ],
        scale: 1000,
    };
    let report = run_simulation(relays(3), &mut adv, &SimConfig::new(3, 1), 0).unwrap();
    assert_eq!(report.outputs[1], Some(Output::Bit(false)));
    assert_eq!(report.byzantine_messages(), 1);
    assert!(!report.agreed);
}

#[test]
fn latency_is_invariant_under_delay_rescaling() {
    let run = |scale| {
        let mut adv = Scripted {
            init: Vec::new(),
            scale,
        };
        run_simulation(relays(6), &mut adv, &SimConfig::new(6, 1), 3)
            .unwrap()
            .latency
            .unwrap()
    };
    let a = run(1 << 10);
    let b = run(1 << 14);
    assert!((a - 1.0).abs() < 1e-12);
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn identical_seeds_give_identical_logs() {
    let mut cfg = SimConfig::new(6, 1);
    cfg.record_log = true;
    let a = run_simulation(relays(6), &mut RandomDelay::new(9), &cfg, 4).unwrap();
    let b = run_simulation(relays(6), &mut RandomDelay::new(9), &cfg, 4).unwrap();
    assert_eq!(a.log_ndjson(), b.log_ndjson());
    assert!(!a.log.is_empty());
}

#[test]
fn full_information_strategy_rejected_in_secure_mode() {
    let mut adv = BenOrBiaser::new(vec![(0, vec![0, 1, 2])], 1);
    let err = run_simulation(relays(3), &mut adv, &SimConfig::new(3, 1), 0).unwrap_err();
    assert!(matches!(
        err,
        SimError::Strategy(StrategyViolation::NeedsFullInformation(_))
    ));
}

#[test]
fn strategy_specs_round_trip_through_text() {
    for text in [
        "fifo",
        "random_delay",
        "committee_targeter:0,2",
        "committee_targeter_capped:1",
        "publish_delayer:0.5",
        "benor_biaser:2",
        "committee_targeter_capped:0+publish_delayer:1+random_delay",
    ] {
        let spec: StrategySpec = text.parse().unwrap();
        assert_eq!(spec.to_string(), text);
    }
    assert!(matches!(
        "chaos".parse::<StrategySpec>(),
        Err(StrategyParseError::Unknown(_))
    ));
    assert!("publish_delayer:2".parse::<StrategySpec>().is_err());
}

#[test]
fn committee_targeter_plan_covers_each_committee() {
    let t = CommitteeTargeter::new(
        vec![vec![0, 1, 2, 3, 4, 5], vec![4, 5, 6, 7, 8, 9]],
        1.0 / 3.0,
    );
    assert_eq!(t.plan(), vec![0, 1, 4, 5]);
    let t = CommitteeTargeter::new(
        vec![vec![0, 1, 2, 3, 4, 5], vec![1, 6, 7, 8, 9, 10]],
        1.0 / 3.0,
    );
    assert_eq!(t.plan(), vec![0, 1, 6]);
}
