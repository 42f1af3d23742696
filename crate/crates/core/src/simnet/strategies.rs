//! Built-in adversary strategies and a textual syntax for selecting them.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Adversary, AdversaryAction, EnvelopeMeta, Payload, Sub, Tag, Time, View, TICKS_PER_UNIT,
};
use crate::params::ceil_tolerant;
use crate::PartyId;

/// Names accepted by [`StrategySpec::from_str`].
pub fn built_in_strategies() -> &'static [&'static str] {
    &[
        "fifo",
        "random_delay",
        "committee_targeter",
        "publish_delayer",
        "benor_biaser",
    ]
}

/// Delivers every envelope exactly one unit after it was sent.
#[derive(Clone, Debug, Default)]
pub struct Fifo;

impl Adversary for Fifo {
    fn name(&self) -> String {
        "fifo".into()
    }

    fn delay(&mut self, _view: &View, _env: &EnvelopeMeta) -> Option<Time> {
        Some(Time::UNIT)
    }
}

/// Uniform delays on a 1/1024-unit grid in `(0, 1]`.
#[derive(Clone, Debug)]
pub struct RandomDelay {
    rng: ChaCha8Rng,
}

impl RandomDelay {
    pub fn new(seed: u64) -> Self {
        RandomDelay {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Adversary for RandomDelay {
    fn name(&self) -> String {
        "random_delay".into()
    }

    fn delay(&mut self, _view: &View, _env: &EnvelopeMeta) -> Option<Time> {
        let k = self.rng.random_range(1..=1024u64);
        Some(Time(k * (TICKS_PER_UNIT / 1024)))
    }
}

/// Corrupts `ceil(alpha * s)` members of each named committee at start-up.
///
/// In strict mode an overdraw of the corruption budget is left to the
/// harness, which aborts with a strategy violation. In capped mode the
/// strategy stops corrupting once the budget is spent. Corrupted parties
/// stay silent.
#[derive(Clone, Debug)]
pub struct CommitteeTargeter {
    pub committees: Vec<Vec<PartyId>>,
    pub alpha: f64,
    pub capped: bool,
}

impl CommitteeTargeter {
    pub fn new(committees: Vec<Vec<PartyId>>, alpha: f64) -> Self {
        CommitteeTargeter {
            committees,
            alpha,
            capped: false,
        }
    }

    pub fn capped(mut self) -> Self {
        self.capped = true;
        self
    }

    /// The corruption order this strategy would issue with an unlimited budget.
    pub fn plan(&self) -> Vec<PartyId> {
        let mut chosen: Vec<PartyId> = Vec::new();
        for members in &self.committees {
            let need = ceil_tolerant(self.alpha * members.len() as f64).max(1);
            let mut have = members.iter().filter(|m| chosen.contains(m)).count();
            for &m in members {
                if have >= need {
                    break;
                }
                if !chosen.contains(&m) {
                    chosen.push(m);
                    have += 1;
                }
            }
        }
        chosen
    }
}

impl Adversary for CommitteeTargeter {
    fn name(&self) -> String {
        "committee_targeter".into()
    }

    fn init(&mut self, view: &View) -> Vec<AdversaryAction> {
        let mut plan = self.plan();
        if self.capped {
            plan.truncate(view.budget_remaining());
        }
        plan.into_iter().map(AdversaryAction::Corrupt).collect()
    }
}

/// Holds Publish envelopes bound for a fixed receiver subset until their
/// deadline.
#[derive(Clone, Debug)]
pub struct PublishDelayer {
    pub fraction: f64,
    receivers: Option<Vec<bool>>,
    seed: u64,
}

impl PublishDelayer {
    pub fn new(fraction: f64, seed: u64) -> Self {
        PublishDelayer {
            fraction: fraction.clamp(0.0, 1.0),
            receivers: None,
            seed,
        }
    }

    fn receivers(&mut self, n: usize) -> &[bool] {
        let fraction = self.fraction;
        let seed = self.seed;
        self.receivers.get_or_insert_with(|| {
            let mut order: Vec<PartyId> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let take = ceil_tolerant(fraction * n as f64).min(n);
            let mut mask = vec![false; n];
            for &p in &order[..take] {
                mask[p] = true;
            }
            mask
        })
    }
}

impl Adversary for PublishDelayer {
    fn name(&self) -> String {
        format!("publish_delayer({})", self.fraction)
    }

    fn delay(&mut self, view: &View, env: &EnvelopeMeta) -> Option<Time> {
        (env.tag.sub == Sub::Pub && self.receivers(view.n)[env.recipient]).then_some(Time::UNIT)
    }
}

/// Attacks majority-vote coins with full information: corrupts the last
/// `t_local` members of each committee, has them vote a per-recipient target
/// bit, and holds honest votes for the opposite bit until their deadline.
#[derive(Clone, Debug)]
pub struct BenOrBiaser {
    /// `(committee index, members)` pairs of coin committees.
    pub committees: Vec<(u32, Vec<PartyId>)>,
    pub t_local: usize,
}

impl BenOrBiaser {
    pub fn new(committees: Vec<(u32, Vec<PartyId>)>, t_local: usize) -> Self {
        BenOrBiaser {
            committees,
            t_local,
        }
    }

    fn target(recipient: PartyId) -> bool {
        recipient % 2 == 1
    }
}

impl Adversary for BenOrBiaser {
    fn name(&self) -> String {
        "benor_biaser".into()
    }

    fn needs_full_information(&self) -> bool {
        true
    }

    fn init(&mut self, view: &View) -> Vec<AdversaryAction> {
        let mut corrupt: Vec<PartyId> = Vec::new();
        let mut actions = Vec::new();
        for (committee, members) in &self.committees {
            let local: Vec<PartyId> = members.iter().rev().take(self.t_local).copied().collect();
            for &p in &local {
                if !corrupt.contains(&p) && corrupt.len() < view.budget_remaining() {
                    corrupt.push(p);
                    actions.push(AdversaryAction::Corrupt(p));
                }
            }
            for &from in local.iter().filter(|p| corrupt.contains(p)) {
                for &to in members {
                    actions.push(AdversaryAction::Inject {
                        from,
                        to,
                        tag: Tag::new(0, *committee, Sub::Coin),
                        payload: Payload::Bit(Self::target(to)),
                        delay: Time(1),
                    });
                }
            }
        }
        actions
    }

    fn delay(&mut self, view: &View, env: &EnvelopeMeta) -> Option<Time> {
        if env.tag.sub != Sub::Coin || env.byzantine {
            return None;
        }
        match view.payload(env.id) {
            Some(Payload::Bit(b)) if *b != Self::target(env.recipient) => Some(Time::UNIT),
            Some(_) => Some(Time(TICKS_PER_UNIT / 4)),
            None => None,
        }
    }
}

/// Layers strategies: the first layer with an opinion sets each delay and
/// coin plan, and actions from all layers are concatenated.
pub struct Stacked {
    pub layers: Vec<Box<dyn Adversary>>,
}

impl Stacked {
    pub fn new(layers: Vec<Box<dyn Adversary>>) -> Self {
        Stacked { layers }
    }
}

impl Adversary for Stacked {
    fn name(&self) -> String {
        self.layers
            .iter()
            .map(|l| l.name())
            .collect::<Vec<_>>()
            .join("+")
    }

    fn needs_full_information(&self) -> bool {
        self.layers.iter().any(|l| l.needs_full_information())
    }

    fn init(&mut self, view: &View) -> Vec<AdversaryAction> {
        self.layers.iter_mut().flat_map(|l| l.init(view)).collect()
    }

    fn delay(&mut self, view: &View, env: &EnvelopeMeta) -> Option<Time> {
        self.layers.iter_mut().find_map(|l| l.delay(view, env))
    }

    fn react(&mut self, view: &View, event: &super::Event) -> Vec<AdversaryAction> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.react(view, event))
            .collect()
    }

    fn on_byzantine_receive(&mut self, view: &View, env: &EnvelopeMeta) -> Vec<AdversaryAction> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.on_byzantine_receive(view, env))
            .collect()
    }

    fn coin_plan(&mut self, view: &View, coin: &super::CoinActivation) -> Option<super::CoinPlan> {
        self.layers.iter_mut().find_map(|l| l.coin_plan(view, coin))
    }
}

/// A strategy selection, parsed from text such as
/// `committee_targeter:0,1+publish_delayer:0.5+random_delay`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum StrategySpec {
    Fifo,
    RandomDelay,
    CommitteeTargeter {
        committees: Vec<usize>,
        #[serde(default)]
        capped: bool,
    },
    PublishDelayer {
        fraction: f64,
    },
    BenorBiaser {
        #[serde(default)]
        t_local: Option<usize>,
    },
    Stack {
        layers: Vec<StrategySpec>,
    },
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum StrategyParseError {
    #[error("unknown strategy `{0}` (known: fifo, random_delay, committee_targeter, publish_delayer, benor_biaser)")]
    Unknown(String),
    #[error("bad argument `{arg}` for strategy {name}")]
    BadArgument { name: String, arg: String },
    #[error("committee index {index} out of range for {count} committees")]
    CommitteeOutOfRange { index: usize, count: usize },
}

/// What a strategy needs to know about the run it attacks.
#[derive(Clone, Debug)]
pub struct StrategyContext {
    pub n: usize,
    pub t: usize,
    pub alpha: f64,
    pub seed: u64,
    pub committees: Vec<Vec<PartyId>>,
}

impl StrategySpec {
    pub fn build(&self, ctx: &StrategyContext) -> Result<Box<dyn Adversary>, StrategyParseError> {
        Ok(match self {
            StrategySpec::Fifo => Box::new(Fifo),
            StrategySpec::RandomDelay => Box::new(RandomDelay::new(ctx.seed)),
            StrategySpec::CommitteeTargeter { committees, capped } => {
                let mut chosen = Vec::new();
                for &index in committees {
                    let members = ctx.committees.get(index).ok_or(
                        StrategyParseError::CommitteeOutOfRange {
                            index,
                            count: ctx.committees.len(),
                        },
                    )?;
                    chosen.push(members.clone());
                }
                let targeter = CommitteeTargeter::new(chosen, ctx.alpha);
                Box::new(if *capped { targeter.capped() } else { targeter })
            }
            StrategySpec::PublishDelayer { fraction } => {
                Box::new(PublishDelayer::new(*fraction, ctx.seed))
            }
            StrategySpec::BenorBiaser { t_local } => {
                let committees = ctx
                    .committees
                    .iter()
                    .enumerate()
                    .map(|(i, m)| (i as u32, m.clone()))
                    .collect();
                Box::new(BenOrBiaser::new(committees, t_local.unwrap_or(ctx.t)))
            }
            StrategySpec::Stack { layers } => Box::new(Stacked::new(
                layers
                    .iter()
                    .map(|l| l.build(ctx))
                    .collect::<Result<_, _>>()?,
            )),
        })
    }
}

impl FromStr for StrategySpec {
    type Err = StrategyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains('+') {
            let layers = s.split('+').map(str::parse).collect::<Result<_, _>>()?;
            return Ok(StrategySpec::Stack { layers });
        }
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let bad = || StrategyParseError::BadArgument {
            name: name.to_string(),
            arg: arg.unwrap_or("").to_string(),
        };
        Ok(match name {
            "fifo" => StrategySpec::Fifo,
            "random_delay" => StrategySpec::RandomDelay,
            "committee_targeter" | "committee_targeter_capped" => {
                let arg = arg.ok_or_else(bad)?;
                let committees = arg
                    .split(',')
                    .map(|x| x.trim().parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?;
                StrategySpec::CommitteeTargeter {
                    committees,
                    capped: name.ends_with("_capped"),
                }
            }
            "publish_delayer" => {
                let fraction: f64 = arg.ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(bad());
                }
                StrategySpec::PublishDelayer { fraction }
            }
            "benor_biaser" => StrategySpec::BenorBiaser {
                t_local: arg.map(|a| a.parse().map_err(|_| bad())).transpose()?,
            },
            other => return Err(StrategyParseError::Unknown(other.to_string())),
        })
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Fifo => write!(f, "fifo"),
            StrategySpec::RandomDelay => write!(f, "random_delay"),
            StrategySpec::CommitteeTargeter { committees, capped } => {
                let list: Vec<String> = committees.iter().map(usize::to_string).collect();
                let suffix = if *capped { "_capped" } else { "" };
                write!(f, "committee_targeter{}:{}", suffix, list.join(","))
            }
            StrategySpec::PublishDelayer { fraction } => write!(f, "publish_delayer:{fraction}"),
            StrategySpec::BenorBiaser { t_local: Some(t) } => write!(f, "benor_biaser:{t}"),
            StrategySpec::BenorBiaser { t_local: None } => write!(f, "benor_biaser"),
            StrategySpec::Stack { layers } => {
                let parts: Vec<String> = layers.iter().map(ToString::to_string).collect();
                write!(f, "{}", parts.join("+"))
            }
        }
    }
}
