//! Committee lists and publish graphs.
//!
//! Both objects are sampled at random and then checked, resampling on
//! failure (Las Vegas). Verification is either exhaustive over every maximal
//! corrupted set `B`, sampled (uniform sets plus one greedy set), or skipped.
//!
//! Committee property: for every `B ⊆ [n]` with `|B| = floor((α - ε) n)`,
//! fewer than `c` committees have `|Q_i ∩ B| >= α s`.
//!
//! Graph property: for every `B ⊆ Q` with `|B| = ceil(s/3) - 1`, fewer than
//! `d` receivers have at least `Δ/2` neighbors in `B`.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

use crate::params::{ceil_tolerant, floor_tolerant};
use crate::PartyId;

/// Default cap on (set `B`, object) membership checks for exhaustive mode.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// Default cap on Las Vegas attempts before giving up.
pub const DEFAULT_MAX_ATTEMPTS: u32 = 1_000;

/// How an object was (or should be) verified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verification {
    Exhaustive,
    Sampled { trials: u64 },
    Unverified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublishGraph {
    pub committee_id: usize,
    /// Row `j` lists the committee members adjacent to receiver vertex `v_j`.
    pub adjacency: Vec<Vec<PartyId>>,
    pub delta_cap: usize,
    pub verified: Verification,
    pub seed: u64,
}

impl PublishGraph {
    pub fn neighbors(&self, receiver: PartyId) -> &[PartyId] {
        &self.adjacency[receiver]
    }

    /// Receivers that `member` sends its crusader output to.
    pub fn receivers_of(&self, member: PartyId) -> Vec<PartyId> {
        self.adjacency
            .iter()
            .enumerate()
            .filter(|(_, row)| row.binary_search(&member).is_ok())
            .map(|(j, _)| j)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitteeLayout {
    pub n: usize,
    pub q: usize,
    pub s: usize,
    pub seed: u64,
    pub committees: Vec<Vec<PartyId>>,
    #[serde(default)]
    pub graphs: Vec<PublishGraph>,
    pub verified: Verification,
}

impl CommitteeLayout {
    /// `q` copies of `[n]`, the layout used whenever `s = n`.
    pub fn full(n: usize, q: usize, seed: u64) -> Self {
        CommitteeLayout {
            n,
            q,
            s: n,
            seed,
            committees: vec![(0..n).collect(); q],
            graphs: Vec::new(),
            verified: Verification::Exhaustive,
        }
    }

    /// Indices of the committees containing `party`.
    pub fn committees_of(&self, party: PartyId) -> Vec<usize> {
        self.committees
            .iter()
            .enumerate()
            .filter(|(_, c)| c.binary_search(&party).is_ok())
            .map(|(i, _)| i)
            .collect()
    }

    /// Generates one publish graph per committee, each with its own Las
    /// Vegas loop. Graph `i` is seeded with `seed + i`.
    pub fn attach_graphs(
        &mut self,
        d: usize,
        delta_cap: usize,
        seed: u64,
        mode: Verification,
        budget: u64,
    ) -> Result<u32, CombinatoricsError> {
        let mut attempts = 0;
        self.graphs.clear();
        for (i, committee) in self.committees.iter().enumerate() {
            let g = gen_publish_graph(
                i,
                committee,
                self.n,
                d,
                delta_cap,
                seed.wrapping_add(i as u64),
                mode,
                budget,
                DEFAULT_MAX_ATTEMPTS,
            )?;
            attempts += g.attempts;
            self.graphs.push(g.value);
        }
        Ok(attempts)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("layout serializes")
    }

    /// Parses a bare layout or a document carrying one under `"layout"`,
    /// as the CLI writes them.
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let mut value: serde_json::Value = serde_json::from_str(s)?;
        if let Some(inner) = value.get_mut("layout") {
            return serde_json::from_value(inner.take());
        }
        serde_json::from_value(value)
    }
}

/// A generated object plus the number of samples it took.
#[derive(Clone, Debug)]
pub struct Generated<T> {
    pub value: T,
    pub attempts: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "result")]
pub enum VerifyOutcome {
    Pass,
    /// The lexicographically first violating set and how many objects it hits.
    Fail {
        witness: Vec<PartyId>,
        hits: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub outcome: VerifyOutcome,
    /// Candidate sets `B` examined; zero when the property holds vacuously.
    pub sets_checked: u64,
}

impl VerifyReport {
    fn vacuous() -> Self {
        VerifyReport {
            outcome: VerifyOutcome::Pass,
            sets_checked: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == VerifyOutcome::Pass
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombinatoricsError {
    #[error("c must be at least 1")]
    ZeroCap,
    #[error("committee size s = {s} must lie in [1, n = {n}]")]
    BadCommitteeSize { s: usize, n: usize },
    #[error("receiver degree {delta_cap} must lie in [1, committee size {s}]")]
    BadDegree { delta_cap: usize, s: usize },
    #[error("d must be at least 1")]
    ZeroFaultParameter,
    #[error("verification infeasible, use sampled: {checks} membership checks exceed the budget of {budget}")]
    VerificationInfeasible { checks: u128, budget: u64 },
    #[error("no valid object after {attempts} attempts")]
    AttemptsExhausted { attempts: u32 },
}

/// `k` distinct elements of `pool` by partial Fisher-Yates, returned sorted.
pub fn sample_without_replacement<R: Rng>(rng: &mut R, pool: &[PartyId], k: usize) -> Vec<PartyId> {
    let mut scratch = pool.to_vec();
    for i in 0..k {
        let j = rng.random_range(i..scratch.len());
        scratch.swap(i, j);
    }
    scratch.truncate(k);
    scratch.sort_unstable();
    scratch
}

fn membership(n: usize, set: &[PartyId]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &p in set {
        m[p] = true;
    }
    m
}

struct CommitteeCheck {
    members: Vec<Vec<bool>>,
    b: usize,
    threshold: usize,
    c: usize,
}

impl CommitteeCheck {
    fn new(layout: &CommitteeLayout, alpha: f64, epsilon: f64, c: usize) -> Self {
        CommitteeCheck {
            members: layout
                .committees
                .iter()
                .map(|q| membership(layout.n, q))
                .collect(),
            b: floor_tolerant((alpha - epsilon) * layout.n as f64),
            threshold: ceil_tolerant(alpha * layout.s as f64).max(1),
            c,
        }
    }

    fn vacuous(&self) -> bool {
        self.b == 0 || self.threshold > self.b
    }

    fn hits(&self, set: &[PartyId]) -> usize {
        self.members
            .iter()
            .filter(|m| set.iter().filter(|&&p| m[p]).count() >= self.threshold)
            .count()
    }

    fn check(&self, set: &[PartyId]) -> Option<VerifyOutcome> {
        let hits = self.hits(set);
        (hits >= self.c).then(|| VerifyOutcome::Fail {
            witness: set.to_vec(),
            hits,
        })
    }
}

/// Checks the committee property.
pub fn verify_committees(
    layout: &CommitteeLayout,
    alpha: f64,
    epsilon: f64,
    c: usize,
    mode: Verification,
    budget: u64,
    seed: u64,
) -> Result<VerifyReport, CombinatoricsError> {
    if c == 0 {
        return Err(CombinatoricsError::ZeroCap);
    }
    let check = CommitteeCheck::new(layout, alpha, epsilon, c);
    if check.vacuous() || mode == Verification::Unverified {
        return Ok(VerifyReport::vacuous());
    }
    let universe: Vec<PartyId> = (0..layout.n).collect();
    match mode {
        Verification::Exhaustive => {
            let checks = exhaustive_cost(layout.n, check.b, layout.q);
            if checks > budget as u128 {
                return Err(CombinatoricsError::VerificationInfeasible { checks, budget });
            }
            Ok(enumerate(&universe, check.b, |set| check.check(set)))
        }
        Verification::Sampled { trials } => {
            let mut counts = vec![0usize; layout.n];
            for q in &layout.committees {
                for &p in q {
                    counts[p] += 1;
                }
            }
            let greedy = greedy_set(&universe, &counts, check.b);
            Ok(sample_sets(
                &universe,
                check.b,
                trials,
                greedy,
                seed,
                |set| check.check(set),
            ))
        }
        Verification::Unverified => unreachable!(),
    }
}

fn exhaustive_cost(universe: usize, b: usize, objects: usize) -> u128 {
    let sets = ln_binomial(universe as u64, b as u64).exp();
    (sets.round() as u128).saturating_mul(objects as u128)
}

fn enumerate(
    universe: &[PartyId],
    b: usize,
    mut check: impl FnMut(&[PartyId]) -> Option<VerifyOutcome>,
) -> VerifyReport {
    let mut sets_checked = 0;
    for set in universe.iter().copied().combinations(b) {
        sets_checked += 1;
        if let Some(outcome) = check(&set) {
            return VerifyReport {
                outcome,
                sets_checked,
            };
        }
    }
    VerifyReport {
        outcome: VerifyOutcome::Pass,
        sets_checked,
    }
}

/// The `b` elements with the highest counts; ties go to lower ids.
fn greedy_set(universe: &[PartyId], counts: &[usize], b: usize) -> Vec<PartyId> {
    let mut ranked = universe.to_vec();
    ranked.sort_by_key(|&p| (std::cmp::Reverse(counts[p]), p));
    ranked.truncate(b);
    ranked.sort_unstable();
    ranked
}

fn sample_sets(
    universe: &[PartyId],
    b: usize,
    trials: u64,
    greedy: Vec<PartyId>,
    seed: u64,
    mut check: impl FnMut(&[PartyId]) -> Option<VerifyOutcome>,
) -> VerifyReport {
    if let Some(outcome) = check(&greedy) {
        return VerifyReport {
            outcome,
            sets_checked: 1,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5a3b_1e00_0000);
    for i in 0..trials {
        let set = sample_without_replacement(&mut rng, universe, b);
        if let Some(outcome) = check(&set) {
            return VerifyReport {
                outcome,
                sets_checked: i + 2,
            };
        }
    }
    VerifyReport {
        outcome: VerifyOutcome::Pass,
        sets_checked: trials + 1,
    }
}

/// Samples `q` committees of size `s` until they verify under `mode`.
#[allow(clippy::too_many_arguments)]
pub fn gen_committees(
    n: usize,
    q: usize,
    s: usize,
    alpha: f64,
    epsilon: f64,
    c: usize,
    seed: u64,
    mode: Verification,
    budget: u64,
    max_attempts: u32,
) -> Result<Generated<CommitteeLayout>, CombinatoricsError> {
    if c == 0 {
        return Err(CombinatoricsError::ZeroCap);
    }
    if s == 0 || s > n {
        return Err(CombinatoricsError::BadCommitteeSize { s, n });
    }
    if s == n {
        return Ok(Generated {
            value: CommitteeLayout::full(n, q, seed),
            attempts: 0,
        });
    }
    let b = floor_tolerant((alpha - epsilon) * n as f64);
    if mode == Verification::Exhaustive {
        let checks = exhaustive_cost(n, b, q);
        if checks > budget as u128 {
            return Err(CombinatoricsError::VerificationInfeasible { checks, budget });
        }
    }
    let universe: Vec<PartyId> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=max_attempts {
        let layout = CommitteeLayout {
            n,
            q,
            s,
            seed,
            committees: (0..q)
                .map(|_| sample_without_replacement(&mut rng, &universe, s))
                .collect(),
            graphs: Vec::new(),
            verified: mode,
        };
        let report = verify_committees(
            &layout,
            alpha,
            epsilon,
            c,
            mode,
            budget,
            seed.wrapping_add(attempt as u64),
        )?;
        if report.passed() {
            return Ok(Generated {
                value: layout,
                attempts: attempt,
            });
        }
    }
    Err(CombinatoricsError::AttemptsExhausted {
        attempts: max_attempts,
    })
}

struct GraphCheck {
    /// Per receiver, membership over party ids.
    rows: Vec<Vec<bool>>,
    delta_cap: usize,
    d: usize,
}

impl GraphCheck {
    fn check(&self, set: &[PartyId]) -> Option<VerifyOutcome> {
        let hits = self
            .rows
            .iter()
            .filter(|row| 2 * set.iter().filter(|&&p| row[p]).count() >= self.delta_cap)
            .count();
        (hits >= self.d).then(|| VerifyOutcome::Fail {
            witness: set.to_vec(),
            hits,
        })
    }
}

/// Size of the maximal corrupted subset of a committee of size `s`.
pub fn max_minority(s: usize) -> usize {
    s.div_ceil(3).saturating_sub(1)
}

/// Whether the graph property holds for every adjacency: `d > n`, or every
/// allowed `B` is too small to reach `Δ/2` neighbors.
pub fn graph_property_vacuous(s: usize, n: usize, d: usize, delta_cap: usize) -> bool {
    let b = max_minority(s);
    d > n || b == 0 || 2 * b < delta_cap
}

/// Checks the graph property, short-circuiting the vacuous cases.
pub fn verify_publish_graph(
    graph: &PublishGraph,
    committee: &[PartyId],
    d: usize,
    mode: Verification,
    budget: u64,
) -> Result<VerifyReport, CombinatoricsError> {
    let n = graph.adjacency.len();
    if graph_property_vacuous(committee.len(), n, d, graph.delta_cap)
        || mode == Verification::Unverified
    {
        return Ok(VerifyReport::vacuous());
    }
    verify_publish_graph_enumerating(graph, committee, d, mode, budget)
}

/// Checks the graph property by enumeration (or sampling) even when it
/// holds vacuously.
pub fn verify_publish_graph_enumerating(
    graph: &PublishGraph,
    committee: &[PartyId],
    d: usize,
    mode: Verification,
    budget: u64,
) -> Result<VerifyReport, CombinatoricsError> {
    if d == 0 {
        return Err(CombinatoricsError::ZeroFaultParameter);
    }
    let n = graph.adjacency.len();
    let universe_size = graph
        .adjacency
        .iter()
        .flatten()
        .chain(committee)
        .copied()
        .max()
        .map_or(0, |m| m + 1);
    let check = GraphCheck {
        rows: graph
            .adjacency
            .iter()
            .map(|row| membership(universe_size, row))
            .collect(),
        delta_cap: graph.delta_cap,
        d,
    };
    let b = max_minority(committee.len());
    match mode {
        Verification::Exhaustive => {
            let checks = exhaustive_cost(committee.len(), b, n);
            if checks > budget as u128 {
                return Err(CombinatoricsError::VerificationInfeasible { checks, budget });
            }
            Ok(enumerate(committee, b, |set| check.check(set)))
        }
        Verification::Sampled { trials } => {
            let mut counts = vec![0usize; universe_size];
            for &p in graph.adjacency.iter().flatten() {
                counts[p] += 1;
            }
            let greedy = greedy_set(committee, &counts, b);
            Ok(sample_sets(
                committee,
                b,
                trials,
                greedy,
                graph.seed,
                |set| check.check(set),
            ))
        }
        Verification::Unverified => Ok(VerifyReport::vacuous()),
    }
}

/// Samples `Δ` neighbors per receiver until the graph verifies under `mode`.
#[allow(clippy::too_many_arguments)]
pub fn gen_publish_graph(
    committee_id: usize,
    committee: &[PartyId],
    n: usize,
    d: usize,
    delta_cap: usize,
    seed: u64,
    mode: Verification,
    budget: u64,
    max_attempts: u32,
) -> Result<Generated<PublishGraph>, CombinatoricsError> {
    if d == 0 {
        return Err(CombinatoricsError::ZeroFaultParameter);
    }
    if delta_cap == 0 || delta_cap > committee.len() {
        return Err(CombinatoricsError::BadDegree {
            delta_cap,
            s: committee.len(),
        });
    }
    let vacuous = graph_property_vacuous(committee.len(), n, d, delta_cap);
    if mode == Verification::Exhaustive && !vacuous {
        let checks = exhaustive_cost(committee.len(), max_minority(committee.len()), n);
        if checks > budget as u128 {
            return Err(CombinatoricsError::VerificationInfeasible { checks, budget });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=max_attempts {
        let graph = PublishGraph {
            committee_id,
            adjacency: (0..n)
                .map(|_| sample_without_replacement(&mut rng, committee, delta_cap))
                .collect(),
            delta_cap,
            verified: mode,
            seed,
        };
        if verify_publish_graph(&graph, committee, d, mode, budget)?.passed() {
            return Ok(Generated {
                value: graph,
                attempts: attempt,
            });
        }
    }
    Err(CombinatoricsError::AttemptsExhausted {
        attempts: max_attempts,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// The bad event cannot happen (empty `B`).
    Impossible,
    /// The property holds for every object (`d > n`).
    Vacuous,
    UnionBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureBound {
    pub kind: BoundKind,
    pub log2_probability: f64,
    pub probability: f64,
}

impl FailureBound {
    fn zero(kind: BoundKind) -> Self {
        FailureBound {
            kind,
            log2_probability: f64::NEG_INFINITY,
            probability: 0.0,
        }
    }

    fn from_log2(log2: f64) -> Self {
        FailureBound {
            kind: BoundKind::UnionBound,
            log2_probability: log2,
            probability: log2.exp2().min(1.0),
        }
    }
}

/// Union bound on a random publish graph failing:
/// `C(s, ceil(s/3) - 1) n^d 2^(-s - d log2 n)`.
pub fn graph_failure_bound(s: usize, n: usize, d: usize) -> FailureBound {
    if d > n {
        return FailureBound::zero(BoundKind::Vacuous);
    }
    let b = max_minority(s);
    if b == 0 {
        return FailureBound::zero(BoundKind::Impossible);
    }
    let log2_n = (n as f64).log2();
    let log2_sets = ln_binomial(s as u64, b as u64) / std::f64::consts::LN_2 + d as f64 * log2_n;
    FailureBound::from_log2(log2_sets - s as f64 - d as f64 * log2_n)
}

/// Union bound on a random committee list failing:
/// `C(n, floor((α - ε) n)) q^c 2^(-n - c log2 q)`.
pub fn committee_failure_bound(
    n: usize,
    q: usize,
    c: usize,
    alpha: f64,
    epsilon: f64,
) -> FailureBound {
    let b = floor_tolerant((alpha - epsilon) * n as f64);
    if b == 0 {
        return FailureBound::zero(BoundKind::Impossible);
    }
    let log2_q = (q as f64).log2();
    let log2_sets = ln_binomial(n as u64, b as u64) / std::f64::consts::LN_2 + c as f64 * log2_q;
    FailureBound::from_log2(log2_sets - n as f64 - c as f64 * log2_q)
}
