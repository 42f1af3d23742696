//! Deterministic discrete-event simulation of an asynchronous network with a
//! strongly adaptive adversary.
//!
//! Time is an integer tick count with [`TICKS_PER_UNIT`] ticks per time unit.
//! Every honest-sent envelope carries a deadline one unit after it was sent;
//! the adversary may deliver it earlier, postpone it up to the deadline, or
//! corrupt its sender and drop it. Envelopes a party sends to itself are
//! delivered at the send instant.
//!
//! Parties are [`Party`] state machines. Strong coins are an oracle owned by
//! the harness: the first member to activate an instance fixes its outcome,
//! either fair (every member gets the same uniform bit) or adversarial (the
//! strategy picks each member's bit).

mod strategies;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::ceil_tolerant;
use crate::PartyId;

pub use strategies::{
    built_in_strategies, BenOrBiaser, CommitteeTargeter, Fifo, PublishDelayer, RandomDelay,
    Stacked, StrategyContext, StrategyParseError, StrategySpec,
};

pub const TICKS_PER_UNIT: u64 = 1 << 20;

/// Virtual time in ticks.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Time(pub u64);

impl Time {
    pub const ZERO: Time = Time(0);
    pub const UNIT: Time = Time(TICKS_PER_UNIT);

    pub fn from_units(units: f64) -> Time {
        Time((units * TICKS_PER_UNIT as f64).round() as u64)
    }

    pub fn units(self) -> f64 {
        self.0 as f64 / TICKS_PER_UNIT as f64
    }
}

impl std::ops::Add for Time {
    type Output = Time;
    fn add(self, rhs: Time) -> Time {
        Time(self.0 + rhs.0)
    }
}

/// Sub-protocol carried by an envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sub {
    Coin,
    CrusVal,
    CrusRelay,
    CrusAux,
    Pub,
    Maj,
}

impl Sub {
    pub fn name(self) -> &'static str {
        match self {
            Sub::Coin => "COIN",
            Sub::CrusVal => "CRUS_VAL",
            Sub::CrusRelay => "CRUS_RELAY",
            Sub::CrusAux => "CRUS_AUX",
            Sub::Pub => "PUB",
            Sub::Maj => "MAJ",
        }
    }
}

/// Identifies one protocol instance: which parallel coin (`instance`),
/// which committee, and which sub-protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tag {
    pub instance: u32,
    pub committee: u32,
    pub sub: Sub,
}

impl Tag {
    pub fn new(instance: u32, committee: u32, sub: Sub) -> Self {
        Tag {
            instance,
            committee,
            sub,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    Bit(bool),
    /// A bit or ⊥ (`None`), two bits on the wire.
    Ternary(Option<bool>),
    Opaque {
        bits: u32,
    },
}

impl Payload {
    pub fn bits(&self) -> u32 {
        match self {
            Payload::Bit(_) => 1,
            Payload::Ternary(_) => 2,
            Payload::Opaque { bits } => (*bits).max(1),
        }
    }
}

/// Size class used for message accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    /// Untagged single-bit payload.
    OneBit,
    /// Small payload plus a `ceil(log2 #instances)` tag.
    Tagged,
    Opaque,
}

impl SizeClass {
    pub fn name(self) -> &'static str {
        match self {
            SizeClass::OneBit => "one_bit",
            SizeClass::Tagged => "tagged",
            SizeClass::Opaque => "opaque",
        }
    }
}

/// Envelope metadata visible to the adversary: everything except the payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvelopeMeta {
    pub id: u64,
    pub sender: PartyId,
    pub recipient: PartyId,
    pub tag: Tag,
    pub sent_at: Time,
    pub deadline: Time,
    pub delivered_at: Option<Time>,
    pub dropped: bool,
    pub size_bits: u32,
    /// Sent by a party that was corrupted at send time.
    pub byzantine: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub meta: EnvelopeMeta,
    pub payload: Payload,
    scheduled_at: Time,
}

impl Envelope {
    pub fn sender(&self) -> PartyId {
        self.meta.sender
    }

    pub fn tag(&self) -> Tag {
        self.meta.tag
    }

    fn size_class(&self) -> SizeClass {
        match self.payload {
            Payload::Opaque { .. } => SizeClass::Opaque,
            Payload::Bit(_) if self.meta.size_bits == 1 => SizeClass::OneBit,
            _ => SizeClass::Tagged,
        }
    }
}

/// Identifier of one strong-coin instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoinId {
    pub instance: u32,
    pub committee: u32,
}

/// A party's output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Bit(bool),
    /// Crusader agreement's ⊥.
    Bottom,
    Bits(Vec<bool>),
}

impl Output {
    pub fn bit(&self) -> Option<bool> {
        match self {
            Output::Bit(b) => Some(*b),
            _ => None,
        }
    }
}

/// What a party asks the harness to do.
#[derive(Debug, Default)]
pub struct Context {
    me: PartyId,
    now: Time,
    sends: Vec<(PartyId, Tag, Payload)>,
    activations: Vec<CoinId>,
    draws: Vec<bool>,
}

impl Context {
    pub fn me(&self) -> PartyId {
        self.me
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn send(&mut self, to: PartyId, tag: Tag, payload: Payload) {
        self.sends.push((to, tag, payload));
    }

    pub fn send_all(&mut self, to: impl IntoIterator<Item = PartyId>, tag: Tag, payload: Payload) {
        for p in to {
            self.send(p, tag, payload);
        }
    }

    /// Joins a strong-coin instance; its output arrives via [`Party::on_coin`].
    pub fn activate_coin(&mut self, coin: CoinId) {
        self.activations.push(coin);
    }

    /// Records a private random draw as harness-side ground truth.
    pub fn record_draw(&mut self, bit: bool) {
        self.draws.push(bit);
    }
}

/// A protocol participant. Implementations are pure transition functions of
/// their inputs; all scheduling lives in the harness.
pub trait Party {
    fn start(&mut self, ctx: &mut Context);
    fn on_message(&mut self, env: &Envelope, ctx: &mut Context);
    fn on_coin(&mut self, _coin: CoinId, _bit: bool, _ctx: &mut Context) {}
    fn output(&self) -> Option<Output>;
    /// Full internal state, handed to the adversary on corruption.
    fn snapshot(&self) -> serde_json::Value;
}

/// A coin instance as the adversary sees it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinView {
    pub id: CoinId,
    pub members: Vec<PartyId>,
    pub activated_at: Time,
    pub fair: bool,
    /// The fair outcome, revealed at activation.
    pub revealed_bit: Option<bool>,
}

/// Everything the adversary may look at.
pub struct View<'a> {
    pub now: Time,
    pub n: usize,
    pub t: usize,
    pub full_information: bool,
    envelopes: &'a [Envelope],
    pub corrupted: &'a BTreeMap<PartyId, Time>,
    pub snapshots: &'a BTreeMap<PartyId, serde_json::Value>,
    pub coins: &'a BTreeMap<CoinId, CoinView>,
}

impl<'a> View<'a> {
    pub fn budget_remaining(&self) -> usize {
        self.t - self.corrupted.len()
    }

    pub fn is_corrupted(&self, p: PartyId) -> bool {
        self.corrupted.contains_key(&p)
    }

    pub fn transcript(&self) -> impl Iterator<Item = &'a EnvelopeMeta> + 'a {
        self.envelopes.iter().map(|e| &e.meta)
    }

    pub fn envelope(&self, id: u64) -> &'a EnvelopeMeta {
        &self.envelopes[id as usize].meta
    }

    /// The payload of envelope `id`, if the adversary can read it: always in
    /// full-information mode, otherwise only when an endpoint is corrupted.
    pub fn payload(&self, id: u64) -> Option<&'a Payload> {
        let env = &self.envelopes[id as usize];
        let visible = self.full_information
            || self.is_corrupted(env.meta.sender)
            || self.is_corrupted(env.meta.recipient);
        visible.then_some(&env.payload)
    }
}

/// A scheduling or corruption decision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdversaryAction {
    /// Deliver envelope `id` as soon as possible.
    Deliver(u64),
    /// Postpone envelope `id` to `until` (clamped to its deadline).
    Delay {
        id: u64,
        until: Time,
    },
    Corrupt(PartyId),
    /// Drop every undelivered envelope sent by a corrupted party.
    DropUndeliveredFrom(PartyId),
    /// Send a message as a corrupted party.
    Inject {
        from: PartyId,
        to: PartyId,
        tag: Tag,
        payload: Payload,
        delay: Time,
    },
}

/// Newly activated coin instance, passed to [`Adversary::coin_plan`].
#[derive(Clone, Debug)]
pub struct CoinActivation {
    pub id: CoinId,
    pub members: Vec<PartyId>,
    pub fair: bool,
    pub revealed_bit: Option<bool>,
}

/// Output schedule for a coin instance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoinPlan {
    /// Per member, fraction of `R` units after activation; `(0, 1]`.
    pub delay_fractions: Vec<f64>,
    /// Per-member output bits; only allowed for adversarial instances.
    pub bits: Option<Vec<bool>>,
}

/// Harness events reported to [`Adversary::react`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Delivered(u64),
    CoinOutput { party: PartyId, coin: CoinId },
}

/// A scheduling and corruption strategy.
pub trait Adversary {
    fn name(&self) -> String;

    /// Strategies that must read honest payloads.
    fn needs_full_information(&self) -> bool {
        false
    }

    /// Actions before any party starts.
    fn init(&mut self, _view: &View) -> Vec<AdversaryAction> {
        Vec::new()
    }

    /// Delay for a freshly sent envelope; `None` defers to the next layer or
    /// to the one-unit default.
    fn delay(&mut self, _view: &View, _env: &EnvelopeMeta) -> Option<Time> {
        None
    }

    fn react(&mut self, _view: &View, _event: &Event) -> Vec<AdversaryAction> {
        Vec::new()
    }

    /// Called when a corrupted party receives an envelope.
    fn on_byzantine_receive(&mut self, _view: &View, _env: &EnvelopeMeta) -> Vec<AdversaryAction> {
        Vec::new()
    }

    fn coin_plan(&mut self, _view: &View, _coin: &CoinActivation) -> Option<CoinPlan> {
        None
    }
}

impl<A: Adversary + ?Sized> Adversary for Box<A> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn needs_full_information(&self) -> bool {
        (**self).needs_full_information()
    }
    fn init(&mut self, view: &View) -> Vec<AdversaryAction> {
        (**self).init(view)
    }
    fn delay(&mut self, view: &View, env: &EnvelopeMeta) -> Option<Time> {
        (**self).delay(view, env)
    }
    fn react(&mut self, view: &View, event: &Event) -> Vec<AdversaryAction> {
        (**self).react(view, event)
    }
    fn on_byzantine_receive(&mut self, view: &View, env: &EnvelopeMeta) -> Vec<AdversaryAction> {
        (**self).on_byzantine_receive(view, env)
    }
    fn coin_plan(&mut self, view: &View, coin: &CoinActivation) -> Option<CoinPlan> {
        (**self).coin_plan(view, coin)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StrategyViolation {
    #[error("corruption {attempted} exceeds the budget t = {t}")]
    BudgetExceeded { attempted: usize, t: usize },
    #[error("dropped envelopes of honest party {0}")]
    DropFromHonest(PartyId),
    #[error("injected a message as honest party {0}")]
    InjectFromHonest(PartyId),
    #[error("strategy {0} needs full-information mode")]
    NeedsFullInformation(String),
    #[error("assigned outputs to a fair coin instance")]
    AssignedFairCoin,
    #[error("coin plan has {got} entries for {members} members")]
    MalformedCoinPlan { got: usize, members: usize },
    #[error("unknown envelope {0}")]
    UnknownEnvelope(u64),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("strategy violation: {0}")]
    Strategy(#[from] StrategyViolation),
    #[error("party {party} activated unknown coin {coin:?}")]
    UnknownCoin { party: PartyId, coin: CoinId },
    #[error("event limit {0} reached")]
    EventLimit(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    /// Run until no events remain.
    Quiescence,
    /// Stop once every honest party has an output.
    AllHonestOutput,
}

/// Strong-coin oracle configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoinDirectory {
    pub members: BTreeMap<CoinId, Vec<PartyId>>,
    /// Fairness probability per instance.
    pub delta: f64,
    /// Latency bound in time units.
    pub r: f64,
    /// An instance with at least `alpha * |members|` corrupted members at
    /// activation is adversarial.
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub t: usize,
    pub full_information: bool,
    pub coins: CoinDirectory,
    /// Tag width for tagged sub-protocols, `ceil(log2 #instances)`.
    pub tag_bits: u32,
    /// Tag width for majority broadcasts.
    pub maj_tag_bits: u32,
    pub stop: StopCondition,
    pub max_events: u64,
    /// Per-step cap on adversary actions.
    pub max_actions_per_step: usize,
    pub record_log: bool,
}

impl SimConfig {
    pub fn new(n: usize, t: usize) -> Self {
        SimConfig {
            n,
            t,
            full_information: false,
            coins: CoinDirectory {
                delta: 1.0,
                r: 1.0,
                alpha: 1.0 / 3.0,
                ..Default::default()
            },
            tag_bits: 0,
            maj_tag_bits: 0,
            stop: StopCondition::Quiescence,
            max_events: 50_000_000,
            max_actions_per_step: 100_000,
            record_log: false,
        }
    }
}

/// Ground truth for one coin instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinRecord {
    pub id: CoinId,
    pub fair: bool,
    /// The instance's uniform bit; the common output when fair.
    pub bit: bool,
    /// Whether the committee was bad at activation.
    pub bad: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Ticks.
    pub time: u64,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub party: Option<PartyId>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub strategy: String,
    pub outputs: Vec<Option<Output>>,
    /// Output time in units, per party.
    pub output_times: Vec<Option<f64>>,
    pub honest: Vec<bool>,
    /// All honest outputs present and equal.
    pub agreed: bool,
    pub output: Option<Output>,
    /// Every honest party produced an output.
    pub live: bool,
    /// Last honest output time divided by [`TrialReport::delay_normalizer`].
    pub latency: Option<f64>,
    pub raw_latency: Option<f64>,
    /// Largest honest-sender delivery delay (units), or the coin delay over
    /// `R` if that is larger.
    pub delay_normalizer: f64,
    pub msg_count_by_class: BTreeMap<String, u64>,
    pub honest_msgs_by_kind: BTreeMap<String, u64>,
    pub byzantine_msgs_by_kind: BTreeMap<String, u64>,
    pub honest_bits: u64,
    pub corruptions: Vec<(PartyId, f64)>,
    pub coins: Vec<CoinRecord>,
    /// Private draws recorded by parties.
    pub draws: Vec<(PartyId, bool)>,
    /// Honest-sent envelopes never delivered nor dropped.
    pub undelivered_honest: u64,
    pub step_budget_hits: u32,
    pub events: u64,
    #[serde(skip)]
    pub log: Vec<LogRecord>,
}

impl TrialReport {
    pub fn honest_outputs(&self) -> impl Iterator<Item = Option<&Output>> {
        self.outputs
            .iter()
            .zip(&self.honest)
            .filter(|(_, h)| **h)
            .map(|(o, _)| o.as_ref())
    }

    pub fn output_bit(&self) -> Option<bool> {
        self.output.as_ref().and_then(Output::bit)
    }

    pub fn honest_messages(&self, sub: Sub) -> u64 {
        self.honest_msgs_by_kind
            .get(sub.name())
            .copied()
            .unwrap_or(0)
    }

    pub fn byzantine_messages(&self) -> u64 {
        self.byzantine_msgs_by_kind.values().sum()
    }

    /// Newline-delimited JSON event log.
    pub fn log_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.log {
            out.push_str(&serde_json::to_string(r).expect("log record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum QueueItem {
    Deliver(u64),
    Coin {
        party: PartyId,
        coin: CoinId,
        bit: bool,
    },
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    parties: Vec<Box<dyn Party + 'a>>,
    envelopes: Vec<Envelope>,
    corrupted: BTreeMap<PartyId, Time>,
    snapshots: BTreeMap<PartyId, serde_json::Value>,
    coins: BTreeMap<CoinId, CoinView>,
    records: Vec<CoinRecord>,
    queue: BinaryHeap<Reverse<(Time, u64, QueueItem)>>,
    seq: u64,
    now: Time,
    rng: ChaCha8Rng,
    outputs: Vec<Option<Output>>,
    output_times: Vec<Option<Time>>,
    draws: Vec<(PartyId, bool)>,
    max_coin_delay: f64,
    step_budget_hits: u32,
    log: Vec<LogRecord>,
}

macro_rules! view {
    ($sim:expr) => {
        View {
            now: $sim.now,
            n: $sim.cfg.n,
            t: $sim.cfg.t,
            full_information: $sim.cfg.full_information,
            envelopes: &$sim.envelopes,
            corrupted: &$sim.corrupted,
            snapshots: &$sim.snapshots,
            coins: &$sim.coins,
        }
    };
}

impl<'a> Sim<'a> {
    fn log(
        &mut self,
        kind: &str,
        envelope_id: Option<u64>,
        party: Option<PartyId>,
        detail: impl FnOnce() -> String,
    ) {
        if self.cfg.record_log {
            self.log.push(LogRecord {
                time: self.now.0,
                kind: kind.to_string(),
                envelope_id,
                party,
                detail: detail(),
            });
        }
    }

    fn push(&mut self, at: Time, item: QueueItem) {
        self.seq += 1;
        self.queue.push(Reverse((at, self.seq, item)));
    }

    fn send(
        &mut self,
        adv: &mut dyn Adversary,
        from: PartyId,
        to: PartyId,
        tag: Tag,
        payload: Payload,
        byzantine_delay: Option<Time>,
    ) {
        let id = self.envelopes.len() as u64;
        let tag_bits = match tag.sub {
            Sub::Maj => self.cfg.maj_tag_bits,
            _ => self.cfg.tag_bits,
        };
        let byzantine = self.corrupted.contains_key(&from);
        let meta = EnvelopeMeta {
            id,
            sender: from,
            recipient: to,
            tag,
            sent_at: self.now,
            deadline: self.now + Time::UNIT,
            delivered_at: None,
            dropped: false,
            size_bits: payload.bits() + tag_bits,
            byzantine,
        };
        self.envelopes.push(Envelope {
            meta,
            payload,
            scheduled_at: self.now,
        });
        let delay = if from == to {
            Time::ZERO
        } else {
            let chosen = match byzantine_delay {
                Some(d) => Some(d),
                None => adv.delay(&view!(self), &meta),
            };
            Time(chosen.unwrap_or(Time::UNIT).0.clamp(1, TICKS_PER_UNIT))
        };
        let at = self.now + delay;
        self.envelopes[id as usize].scheduled_at = at;
        self.push(at, QueueItem::Deliver(id));
        self.log("send", Some(id), Some(from), || {
            format!(
                "to={} tag={}/{}/{} bits={}",
                to,
                tag.instance,
                tag.committee,
                tag.sub.name(),
                meta.size_bits
            )
        });
    }

    fn flush(
        &mut self,
        adv: &mut dyn Adversary,
        party: PartyId,
        ctx: Context,
    ) -> Result<(), SimError> {
        for bit in ctx.draws {
            self.draws.push((party, bit));
        }
        for (to, tag, payload) in ctx.sends {
            self.send(adv, party, to, tag, payload, None);
        }
        for coin in ctx.activations {
            self.activate(adv, party, coin)?;
        }
        self.note_output(party);
        Ok(())
    }

    fn note_output(&mut self, party: PartyId) {
        if self.output_times[party].is_none() && !self.corrupted.contains_key(&party) {
            if let Some(out) = self.parties[party].output() {
                self.outputs[party] = Some(out.clone());
                self.output_times[party] = Some(self.now);
                self.log("output", None, Some(party), || format!("{out:?}"));
            }
        }
    }

    fn activate(
        &mut self,
        adv: &mut dyn Adversary,
        party: PartyId,
        coin: CoinId,
    ) -> Result<(), SimError> {
        if self.coins.contains_key(&coin) {
            return Ok(());
        }
        let members = self
            .cfg
            .coins
            .members
            .get(&coin)
            .cloned()
            .ok_or(SimError::UnknownCoin { party, coin })?;
        let corrupted = members
            .iter()
            .filter(|m| self.corrupted.contains_key(m))
            .count();
        let bad = corrupted >= ceil_tolerant(self.cfg.coins.alpha * members.len() as f64).max(1);
        let draw_fair = self.rng.random_bool(self.cfg.coins.delta.clamp(0.0, 1.0));
        let bit = self.rng.random::<bool>();
        let fair = draw_fair && !bad;
        self.records.push(CoinRecord {
            id: coin,
            fair,
            bit,
            bad,
        });
        self.coins.insert(
            coin,
            CoinView {
                id: coin,
                members: members.clone(),
                activated_at: self.now,
                fair,
                revealed_bit: fair.then_some(bit),
            },
        );
        self.log("coin_activate", None, Some(party), || {
            format!(
                "coin={}/{} fair={} bad={}",
                coin.instance, coin.committee, fair, bad
            )
        });
        let activation = CoinActivation {
            id: coin,
            members: members.clone(),
            fair,
            revealed_bit: fair.then_some(bit),
        };
        let plan = adv.coin_plan(&view!(self), &activation).unwrap_or_default();
        if fair && plan.bits.is_some() {
            return Err(StrategyViolation::AssignedFairCoin.into());
        }
        for v in [
            plan.delay_fractions.len(),
            plan.bits.as_ref().map_or(members.len(), Vec::len),
        ] {
            if v != members.len() && !(v == 0) {
                return Err(StrategyViolation::MalformedCoinPlan {
                    got: v,
                    members: members.len(),
                }
                .into());
            }
        }
        for (i, &m) in members.iter().enumerate() {
            let fraction = plan.delay_fractions.get(i).copied().unwrap_or(1.0);
            let fraction = if fraction > 0.0 && fraction <= 1.0 {
                fraction
            } else {
                1.0
            };
            let delay = Time::from_units(fraction * self.cfg.coins.r).max(Time(1));
            self.max_coin_delay = self.max_coin_delay.max(delay.units() / self.cfg.coins.r);
            let out_bit = match &plan.bits {
                Some(bits) => bits[i],
                None if fair => bit,
                // Default adversarial split: alternate bits across members.
                None => i % 2 == 1,
            };
            self.push(
                self.now + delay,
                QueueItem::Coin {
                    party: m,
                    coin,
                    bit: out_bit,
                },
            );
        }
        Ok(())
    }

    fn apply(
        &mut self,
        adv: &mut dyn Adversary,
        mut actions: Vec<AdversaryAction>,
    ) -> Result<(), SimError> {
        if actions.len() > self.cfg.max_actions_per_step {
            actions.truncate(self.cfg.max_actions_per_step);
            self.step_budget_hits += 1;
        }
        for action in actions {
            match action {
                AdversaryAction::Corrupt(p) => {
                    if self.corrupted.contains_key(&p) {
                        continue;
                    }
                    if self.corrupted.len() + 1 > self.cfg.t {
                        return Err(StrategyViolation::BudgetExceeded {
                            attempted: self.corrupted.len() + 1,
                            t: self.cfg.t,
                        }
                        .into());
                    }
                    self.corrupted.insert(p, self.now);
                    let snap = self.parties[p].snapshot();
                    self.snapshots.insert(p, snap);
                    self.log("corrupt", None, Some(p), String::new);
                }
                AdversaryAction::DropUndeliveredFrom(p) => {
                    if !self.corrupted.contains_key(&p) {
                        return Err(StrategyViolation::DropFromHonest(p).into());
                    }
                    let mut dropped = Vec::new();
                    for env in self.envelopes.iter_mut() {
                        if env.meta.sender == p
                            && env.meta.delivered_at.is_none()
                            && !env.meta.dropped
                        {
                            env.meta.dropped = true;
                            dropped.push(env.meta.id);
                        }
                    }
                    for id in dropped {
                        self.log("drop", Some(id), Some(p), String::new);
                    }
                }
                AdversaryAction::Deliver(id) => self.reschedule(id, self.now + Time(1))?,
                AdversaryAction::Delay { id, until } => self.reschedule(id, until)?,
                AdversaryAction::Inject {
                    from,
                    to,
                    tag,
                    payload,
                    delay,
                } => {
                    if !self.corrupted.contains_key(&from) {
                        return Err(StrategyViolation::InjectFromHonest(from).into());
                    }
                    self.send(adv, from, to, tag, payload, Some(delay));
                }
            }
        }
        Ok(())
    }

    fn reschedule(&mut self, id: u64, until: Time) -> Result<(), SimError> {
        let now = self.now;
        let env = self
            .envelopes
            .get_mut(id as usize)
            .ok_or(StrategyViolation::UnknownEnvelope(id))?;
        if env.meta.delivered_at.is_some() || env.meta.dropped {
            return Ok(());
        }
        let mut at = until.max(now + Time(1)).max(env.meta.sent_at + Time(1));
        if !env.meta.byzantine {
            at = at.min(env.meta.deadline);
        }
        if env.meta.sender == env.meta.recipient || at == env.scheduled_at {
            return Ok(());
        }
        env.scheduled_at = at;
        self.push(at, QueueItem::Deliver(id));
        Ok(())
    }

    fn all_honest_output(&self) -> bool {
        (0..self.cfg.n).all(|p| self.corrupted.contains_key(&p) || self.outputs[p].is_some())
    }

    fn run(&mut self, adv: &mut dyn Adversary) -> Result<u64, SimError> {
        if adv.needs_full_information() && !self.cfg.full_information {
            return Err(StrategyViolation::NeedsFullInformation(adv.name()).into());
        }
        let init = adv.init(&view!(self));
        self.apply(adv, init)?;
        for p in 0..self.cfg.n {
            if self.corrupted.contains_key(&p) {
                continue;
            }
            let mut ctx = Context {
                me: p,
                now: self.now,
                ..Default::default()
            };
            self.parties[p].start(&mut ctx);
            self.flush(adv, p, ctx)?;
        }
        let mut events = 0;
        while let Some(Reverse((at, _, item))) = self.queue.pop() {
            if self.cfg.stop == StopCondition::AllHonestOutput && self.all_honest_output() {
                break;
            }
            let event = match item {
                QueueItem::Deliver(id) => {
                    let env = &self.envelopes[id as usize];
                    if env.meta.dropped || env.meta.delivered_at.is_some() || env.scheduled_at != at
                    {
                        continue;
                    }
                    Event::Delivered(id)
                }
                QueueItem::Coin { party, coin, .. } => Event::CoinOutput { party, coin },
            };
            events += 1;
            if events > self.cfg.max_events {
                return Err(SimError::EventLimit(self.cfg.max_events));
            }
            debug_assert!(at >= self.now);
            self.now = at;
            match item {
                QueueItem::Deliver(id) => {
                    self.envelopes[id as usize].meta.delivered_at = Some(at);
                    let to = self.envelopes[id as usize].meta.recipient;
                    self.log("deliver", Some(id), Some(to), String::new);
                    if self.corrupted.contains_key(&to) {
                        let meta = self.envelopes[id as usize].meta;
                        let actions = adv.on_byzantine_receive(&view!(self), &meta);
                        self.apply(adv, actions)?;
                    } else {
                        let mut ctx = Context {
                            me: to,
                            now: at,
                            ..Default::default()
                        };
                        let env = self.envelopes[id as usize].clone();
                        self.parties[to].on_message(&env, &mut ctx);
                        self.flush(adv, to, ctx)?;
                    }
                }
                QueueItem::Coin { party, coin, bit } => {
                    if !self.corrupted.contains_key(&party) {
                        self.log("coin_output", None, Some(party), || {
                            format!("coin={}/{} bit={}", coin.instance, coin.committee, bit)
                        });
                        let mut ctx = Context {
                            me: party,
                            now: at,
                            ..Default::default()
                        };
                        self.parties[party].on_coin(coin, bit, &mut ctx);
                        self.flush(adv, party, ctx)?;
                    }
                }
            }
            let actions = adv.react(&view!(self), &event);
            self.apply(adv, actions)?;
        }
        Ok(events)
    }

    fn report(self, seed: u64, strategy: String, events: u64) -> TrialReport {
        let n = self.cfg.n;
        let honest: Vec<bool> = (0..n).map(|p| !self.corrupted.contains_key(&p)).collect();
        let outputs: Vec<Option<Output>> = (0..n)
            .map(|p| {
                if honest[p] {
                    self.outputs[p].clone()
                } else {
                    None
                }
            })
            .collect();
        let live = (0..n).all(|p| !honest[p] || outputs[p].is_some());
        let first = (0..n).find(|&p| honest[p]).and_then(|p| outputs[p].clone());
        let agreed = live && (0..n).filter(|&p| honest[p]).all(|p| outputs[p] == first);
        let mut max_delay = 0u64;
        let mut by_class = BTreeMap::new();
        let mut honest_kind = BTreeMap::new();
        let mut byz_kind = BTreeMap::new();
        let mut honest_bits = 0;
        let mut undelivered = 0;
        for env in &self.envelopes {
            let m = &env.meta;
            *by_class
                .entry(env.size_class().name().to_string())
                .or_insert(0) += 1;
            if m.byzantine {
                *byz_kind.entry(m.tag.sub.name().to_string()).or_insert(0) += 1;
                continue;
            }
            *honest_kind.entry(m.tag.sub.name().to_string()).or_insert(0) += 1;
            honest_bits += m.size_bits as u64;
            match m.delivered_at {
                Some(at) if m.sender != m.recipient => {
                    max_delay = max_delay.max(at.0 - m.sent_at.0)
                }
                Some(_) => {}
                None if !m.dropped => undelivered += 1,
                None => {}
            }
        }
        let normalizer = (max_delay as f64 / TICKS_PER_UNIT as f64).max(self.max_coin_delay);
        let raw = live
            .then(|| {
                (0..n)
                    .filter(|&p| honest[p])
                    .filter_map(|p| self.output_times[p])
                    .max()
                    .map(Time::units)
            })
            .flatten();
        let latency = raw.map(|r| if normalizer > 0.0 { r / normalizer } else { r });
        TrialReport {
            seed,
            strategy,
            output_times: (0..n)
                .map(|p| {
                    if honest[p] {
                        self.output_times[p].map(Time::units)
                    } else {
                        None
                    }
                })
                .collect(),
            outputs,
            honest,
            agreed,
            output: if agreed { first } else { None },
            live,
            latency,
            raw_latency: raw,
            delay_normalizer: normalizer,
            msg_count_by_class: by_class,
            honest_msgs_by_kind: honest_kind,
            byzantine_msgs_by_kind: byz_kind,
            honest_bits,
            corruptions: self
                .corrupted
                .iter()
                .map(|(p, t)| (*p, t.units()))
                .collect(),
            coins: self.records,
            draws: self.draws,
            undelivered_honest: undelivered,
            step_budget_hits: self.step_budget_hits,
            events,
            log: self.log,
        }
    }
}

/// Runs one trial to quiescence (or the configured stop condition).
pub fn run_simulation<'a>(
    parties: Vec<Box<dyn Party + 'a>>,
    adversary: &mut dyn Adversary,
    cfg: &SimConfig,
    seed: u64,
) -> Result<TrialReport, SimError> {
    assert_eq!(parties.len(), cfg.n, "one party per id");
    let mut sim = Sim {
        cfg,
        parties,
        envelopes: Vec::new(),
        corrupted: BTreeMap::new(),
        snapshots: BTreeMap::new(),
        coins: BTreeMap::new(),
        records: Vec::new(),
        queue: BinaryHeap::new(),
        seq: 0,
        now: Time::ZERO,
        rng: ChaCha8Rng::seed_from_u64(seed),
        outputs: vec![None; cfg.n],
        output_times: vec![None; cfg.n],
        draws: Vec::new(),
        max_coin_delay: 0.0,
        step_budget_hits: 0,
        log: Vec::new(),
    };
    let events = sim.run(adversary)?;
    Ok(sim.report(seed, adversary.name(), events))
}

impl fmt::Display for TrialReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed={} live={} agreed={} output={:?} latency={:?} honest_bits={}",
            self.seed, self.live, self.agreed, self.output, self.latency, self.honest_bits
        )
    }
}

#[cfg(test)]
mod tests;
