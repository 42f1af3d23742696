//! Protocol state machines: crusader agreement, `Publish(Q, d)`, the
//! committee transformation, strong coins, and the ℓ-bit wrapper.

mod crusader;
mod publish;

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::CommitteeLayout;
use crate::params::{tag_bits, DerivedParams};
use crate::simnet::{
    CoinDirectory, CoinId, Context, Envelope, Output, Party, Payload, SimConfig, Sub, Tag,
};
use crate::PartyId;

pub use crusader::Crusader;
pub use publish::PublishInstance;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("layout has {got} committees, parameters say q = {want}")]
    CommitteeCount { got: usize, want: usize },
    #[error("layout is for n = {got}, parameters say n = {want}")]
    PartyCount { got: usize, want: usize },
    #[error("committee {0} has no publish graph attached")]
    MissingGraph(usize),
    #[error("ell must be at least 1")]
    ZeroEll,
    #[error("Ben-Or wait threshold needs t_local < s (t_local = {t_local}, s = {s})")]
    BadLocalFaults { t_local: usize, s: usize },
}

/// How committee strong coins are realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CoinMode {
    /// Oracle coins run by the harness.
    Ideal,
    /// Majority of broadcast private bits.
    BenOr { t_local: usize },
}

/// Ben-Or style coin: broadcast a uniform bit to the committee, wait for
/// `s - t_local` bits, output their majority (ties → 0).
#[derive(Clone, Debug, Serialize)]
pub struct BenOrCoin {
    instance: u32,
    committee: u32,
    members: Vec<PartyId>,
    wait_for: usize,
    bits: BTreeMap<PartyId, bool>,
    ones: usize,
    output: Option<bool>,
}

impl BenOrCoin {
    pub fn new(
        instance: u32,
        committee: u32,
        members: Vec<PartyId>,
        t_local: usize,
    ) -> Result<Self, ProtocolError> {
        if t_local >= members.len() {
            return Err(ProtocolError::BadLocalFaults {
                t_local,
                s: members.len(),
            });
        }
        Ok(BenOrCoin {
            instance,
            committee,
            wait_for: members.len() - t_local,
            members,
            bits: BTreeMap::new(),
            ones: 0,
            output: None,
        })
    }

    pub fn start(&mut self, bit: bool, ctx: &mut Context) {
        ctx.record_draw(bit);
        ctx.send_all(
            self.members.iter().copied(),
            Tag::new(self.instance, self.committee, Sub::Coin),
            Payload::Bit(bit),
        );
    }

    pub fn handle(&mut self, env: &Envelope) -> Option<bool> {
        let Payload::Bit(b) = env.payload else {
            return None;
        };
        if self.output.is_some() || self.members.binary_search(&env.sender()).is_err() {
            return None;
        }
        if self.bits.insert(env.sender(), b).is_some() {
            return None;
        }
        self.ones += b as usize;
        if self.bits.len() < self.wait_for {
            return None;
        }
        self.output = Some(2 * self.ones > self.bits.len());
        self.output
    }

    pub fn output(&self) -> Option<bool> {
        self.output
    }
}

fn party_rng(seed: u64, party: PartyId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(party as u64 + 1);
    rng
}

/// A standalone crusader participant with a fixed input.
#[derive(Serialize)]
pub struct CrusaderNode {
    crusader: Crusader,
    input: bool,
}

impl CrusaderNode {
    pub fn new(members: Vec<PartyId>, input: bool) -> Self {
        CrusaderNode {
            crusader: Crusader::new(0, 0, members),
            input,
        }
    }
}

impl Party for CrusaderNode {
    fn start(&mut self, ctx: &mut Context) {
        self.crusader.start(self.input, ctx);
    }

    fn on_message(&mut self, env: &Envelope, ctx: &mut Context) {
        self.crusader.handle(env, ctx);
    }

    fn output(&self) -> Option<Output> {
        self.crusader
            .output()
            .map(|y| y.map_or(Output::Bottom, Output::Bit))
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("state serializes")
    }
}

/// Crusader parties for committee `[s]` with the given inputs.
pub fn crusader_parties(inputs: &[bool]) -> Vec<Box<dyn Party>> {
    let members: Vec<PartyId> = (0..inputs.len()).collect();
    inputs
        .iter()
        .map(|&b| Box::new(CrusaderNode::new(members.clone(), b)) as Box<dyn Party>)
        .collect()
}

/// A standalone `Publish(Q, d)` participant; members hold a fixed input.
#[derive(Serialize)]
pub struct PublishNode {
    publish: PublishInstance,
    input: Option<bool>,
}

impl Party for PublishNode {
    fn start(&mut self, ctx: &mut Context) {
        if let Some(b) = self.input {
            self.publish.set_input(b, ctx);
        }
    }

    fn on_message(&mut self, env: &Envelope, ctx: &mut Context) {
        self.publish.handle(env, ctx);
    }

    fn output(&self) -> Option<Output> {
        self.publish.output().map(Output::Bit)
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("state serializes")
    }
}

/// Builds one `PublishInstance` per party for `committee` of `layout`.
fn publish_instances(
    layout: &CommitteeLayout,
    instance: u32,
    committee: usize,
) -> Result<Vec<PublishInstance>, ProtocolError> {
    let graph = layout
        .graphs
        .get(committee)
        .ok_or(ProtocolError::MissingGraph(committee))?;
    let members = &layout.committees[committee];
    let mut receivers: BTreeMap<PartyId, Vec<PartyId>> = BTreeMap::new();
    for (j, row) in graph.adjacency.iter().enumerate() {
        for &m in row {
            receivers.entry(m).or_default().push(j);
        }
    }
    Ok((0..layout.n)
        .map(|p| {
            if members.binary_search(&p).is_ok() {
                PublishInstance::member(
                    instance,
                    committee as u32,
                    members.clone(),
                    receivers.remove(&p).unwrap_or_default(),
                )
            } else {
                PublishInstance::receiver(
                    instance,
                    committee as u32,
                    graph.neighbors(p).to_vec(),
                    graph.delta_cap,
                )
            }
        })
        .collect())
}

/// Publish parties for committee `committee` of `layout`; `inputs[i]` is the
/// input of the `i`-th member.
pub fn publish_parties(
    layout: &CommitteeLayout,
    committee: usize,
    inputs: &[bool],
) -> Result<Vec<Box<dyn Party>>, ProtocolError> {
    let members = &layout.committees[committee];
    assert_eq!(inputs.len(), members.len(), "one input per member");
    Ok(publish_instances(layout, 0, committee)?
        .into_iter()
        .enumerate()
        .map(|(p, publish)| {
            let input = members.binary_search(&p).ok().map(|i| inputs[i]);
            Box::new(PublishNode { publish, input }) as Box<dyn Party>
        })
        .collect())
}

/// A standalone Ben-Or coin participant.
#[derive(Serialize)]
pub struct BenOrNode {
    coin: BenOrCoin,
    #[serde(skip)]
    rng: ChaCha8Rng,
}

impl Party for BenOrNode {
    fn start(&mut self, ctx: &mut Context) {
        let bit = self.rng.random::<bool>();
        self.coin.start(bit, ctx);
    }

    fn on_message(&mut self, env: &Envelope, _ctx: &mut Context) {
        self.coin.handle(env);
    }

    fn output(&self) -> Option<Output> {
        self.coin.output().map(Output::Bit)
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("state serializes")
    }
}

pub fn benor_parties(
    s: usize,
    t_local: usize,
    seed: u64,
) -> Result<Vec<Box<dyn Party>>, ProtocolError> {
    let members: Vec<PartyId> = (0..s).collect();
    (0..s)
        .map(|p| {
            Ok(Box::new(BenOrNode {
                coin: BenOrCoin::new(0, 0, members.clone(), t_local)?,
                rng: party_rng(seed, p),
            }) as Box<dyn Party>)
        })
        .collect()
}

/// A party that only queries one ideal coin instance and outputs its bit.
#[derive(Serialize)]
pub struct CoinNode {
    output: Option<bool>,
}

impl Party for CoinNode {
    fn start(&mut self, ctx: &mut Context) {
        ctx.activate_coin(CoinId {
            instance: 0,
            committee: 0,
        });
    }

    fn on_message(&mut self, _env: &Envelope, _ctx: &mut Context) {}

    fn on_coin(&mut self, _coin: CoinId, bit: bool, _ctx: &mut Context) {
        self.output.get_or_insert(bit);
    }

    fn output(&self) -> Option<Output> {
        self.output.map(Output::Bit)
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("state serializes")
    }
}

pub fn ideal_coin_parties(s: usize) -> Vec<Box<dyn Party>> {
    (0..s)
        .map(|_| Box::new(CoinNode { output: None }) as Box<dyn Party>)
        .collect()
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum CoinSlot {
    Ideal,
    BenOr(BenOrCoin),
}

/// State of one transformation instance at one party.
#[derive(Clone, Debug, Serialize)]
pub struct TransformState {
    /// Indexed by committee.
    publish: Vec<PublishInstance>,
    /// Coins of the committees this party belongs to.
    coins: BTreeMap<u32, CoinSlot>,
    pub v: [usize; 2],
    pub w: [usize; 2],
    w_seen: Vec<bool>,
    pub majority_sent: Option<bool>,
    pub output: Option<bool>,
}

/// A party running `ell` parallel instances of the committee transformation.
#[derive(Serialize)]
pub struct TransformNode {
    me: PartyId,
    n: usize,
    live_threshold: usize,
    output_threshold: usize,
    instances: Vec<TransformState>,
    #[serde(skip)]
    rng: ChaCha8Rng,
}

impl TransformNode {
    pub fn instances(&self) -> &[TransformState] {
        &self.instances
    }

    fn publish_output(&mut self, k: usize, b: bool, ctx: &mut Context) {
        let st = &mut self.instances[k];
        st.v[b as usize] += 1;
        if st.majority_sent.is_none() && st.v[0] + st.v[1] == self.live_threshold {
            let maj = st.v[1] > st.v[0];
            st.majority_sent = Some(maj);
            ctx.send_all(
                0..self.n,
                Tag::new(k as u32, 0, Sub::Maj),
                Payload::Bit(maj),
            );
        }
    }

    fn coin_output(&mut self, k: usize, committee: u32, b: bool, ctx: &mut Context) {
        if let Some(out) = self.instances[k].publish[committee as usize].set_input(b, ctx) {
            self.publish_output(k, out, ctx);
        }
    }
}

impl Party for TransformNode {
    fn start(&mut self, ctx: &mut Context) {
        for k in 0..self.instances.len() {
            let committees: Vec<u32> = self.instances[k].coins.keys().copied().collect();
            for c in committees {
                match self.instances[k].coins.get_mut(&c).expect("present") {
                    CoinSlot::Ideal => ctx.activate_coin(CoinId {
                        instance: k as u32,
                        committee: c,
                    }),
                    CoinSlot::BenOr(coin) => coin.start(self.rng.random::<bool>(), ctx),
                }
            }
        }
    }

    fn on_message(&mut self, env: &Envelope, ctx: &mut Context) {
        let tag = env.tag();
        let k = tag.instance as usize;
        if k >= self.instances.len() {
            return;
        }
        match tag.sub {
            Sub::Coin => {
                let Some(CoinSlot::BenOr(coin)) = self.instances[k].coins.get_mut(&tag.committee)
                else {
                    return;
                };
                if let Some(b) = coin.handle(env) {
                    self.coin_output(k, tag.committee, b, ctx);
                }
            }
            Sub::CrusVal | Sub::CrusRelay | Sub::CrusAux | Sub::Pub => {
                let Some(publish) = self.instances[k].publish.get_mut(tag.committee as usize)
                else {
                    return;
                };
                if let Some(b) = publish.handle(env, ctx) {
                    self.publish_output(k, b, ctx);
                }
            }
            Sub::Maj => {
                let Payload::Bit(b) = env.payload else {
                    return;
                };
                let st = &mut self.instances[k];
                if st.w_seen[env.sender()] {
                    return;
                }
                st.w_seen[env.sender()] = true;
                st.w[b as usize] += 1;
                if st.output.is_none() && st.w[0] + st.w[1] == self.output_threshold {
                    st.output = Some(st.w[1] > st.w[0]);
                }
            }
        }
    }

    fn on_coin(&mut self, coin: CoinId, bit: bool, ctx: &mut Context) {
        let k = coin.instance as usize;
        if k < self.instances.len() && self.instances[k].coins.contains_key(&coin.committee) {
            self.coin_output(k, coin.committee, bit, ctx);
        }
    }

    fn output(&self) -> Option<Output> {
        let bits: Option<Vec<bool>> = self.instances.iter().map(|s| s.output).collect();
        let bits = bits?;
        Some(if bits.len() == 1 {
            Output::Bit(bits[0])
        } else {
            Output::Bits(bits)
        })
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("state serializes")
    }
}

/// Builds the `n` parties of `ell` parallel transformation instances.
pub fn transform_parties(
    dp: &DerivedParams,
    layout: &CommitteeLayout,
    ell: usize,
    coin: CoinMode,
    seed: u64,
) -> Result<Vec<Box<dyn Party>>, ProtocolError> {
    check_layout(dp, layout, ell)?;
    let n = dp.n;
    let mut per_party: Vec<Vec<TransformState>> = (0..n).map(|_| Vec::with_capacity(ell)).collect();
    for k in 0..ell {
        let mut columns: Vec<std::vec::IntoIter<PublishInstance>> = (0..dp.q)
            .map(|c| publish_instances(layout, k as u32, c).map(Vec::into_iter))
            .collect::<Result<_, _>>()?;
        for (p, states) in per_party.iter_mut().enumerate() {
            let publish: Vec<PublishInstance> = columns
                .iter_mut()
                .map(|col| col.next().expect("one per party"))
                .collect();
            let mut coins = BTreeMap::new();
            for c in layout.committees_of(p) {
                let slot = match coin {
                    CoinMode::Ideal => CoinSlot::Ideal,
                    CoinMode::BenOr { t_local } => CoinSlot::BenOr(BenOrCoin::new(
                        k as u32,
                        c as u32,
                        layout.committees[c].clone(),
                        t_local,
                    )?),
                };
                coins.insert(c as u32, slot);
            }
            states.push(TransformState {
                publish,
                coins,
                v: [0; 2],
                w: [0; 2],
                w_seen: vec![false; n],
                majority_sent: None,
                output: None,
            });
        }
    }
    Ok(per_party
        .into_iter()
        .enumerate()
        .map(|(me, instances)| {
            Box::new(TransformNode {
                me,
                n,
                live_threshold: dp.live_threshold,
                output_threshold: dp.output_threshold,
                instances,
                rng: party_rng(seed, me),
            }) as Box<dyn Party>
        })
        .collect())
}

fn check_layout(
    dp: &DerivedParams,
    layout: &CommitteeLayout,
    ell: usize,
) -> Result<(), ProtocolError> {
    if ell == 0 {
        return Err(ProtocolError::ZeroEll);
    }
    if layout.committees.len() != dp.q {
        return Err(ProtocolError::CommitteeCount {
            got: layout.committees.len(),
            want: dp.q,
        });
    }
    if layout.n != dp.n {
        return Err(ProtocolError::PartyCount {
            got: layout.n,
            want: dp.n,
        });
    }
    if let Some(missing) = (0..dp.q).find(|&c| layout.graphs.get(c).is_none()) {
        return Err(ProtocolError::MissingGraph(missing));
    }
    Ok(())
}

/// Harness configuration for `ell` transformation instances over `layout`.
pub fn transform_sim_config(
    dp: &DerivedParams,
    layout: &CommitteeLayout,
    ell: usize,
    t: usize,
    delta: f64,
    r: f64,
    alpha: f64,
) -> SimConfig {
    let mut members = BTreeMap::new();
    for k in 0..ell {
        for (c, committee) in layout.committees.iter().enumerate() {
            members.insert(
                CoinId {
                    instance: k as u32,
                    committee: c as u32,
                },
                committee.clone(),
            );
        }
    }
    let mut cfg = SimConfig::new(dp.n, t);
    cfg.coins = CoinDirectory {
        members,
        delta,
        r,
        alpha,
    };
    cfg.tag_bits = tag_bits(dp.q * ell);
    cfg.maj_tag_bits = tag_bits(ell);
    cfg
}

/// Harness configuration for a single ideal coin over committee `[s]`.
pub fn ideal_coin_sim_config(s: usize, t: usize, delta: f64, r: f64, alpha: f64) -> SimConfig {
    let mut cfg = SimConfig::new(s, t);
    cfg.coins.members.insert(
        CoinId {
            instance: 0,
            committee: 0,
        },
        (0..s).collect(),
    );
    cfg.coins.delta = delta;
    cfg.coins.r = r;
    cfg.coins.alpha = alpha;
    cfg
}

/// Per-bit fairness needed for an `ell`-bit coin to be fair with
/// probability `delta` by a union bound.
pub fn per_bit_delta(delta: f64, ell: usize) -> f64 {
    1.0 - (1.0 - delta) / ell as f64
}

/// Leader id in `1..=n` from a coin value read as a big-endian bit string.
pub fn elect_leader(bits: &[bool], n: usize) -> usize {
    assert!(n > 0, "at least one party");
    let mut value = BigUint::default();
    for &b in bits {
        value = (value << 1u32) + BigUint::from(b as u8);
    }
    elect_leader_from_value(&value, n)
}

pub fn elect_leader_from_value(value: &BigUint, n: usize) -> usize {
    (value % BigUint::from(n)).to_usize().expect("below n") + 1
}
