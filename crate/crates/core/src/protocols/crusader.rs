use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::params::crusader_fault_bound;
use crate::simnet::{Context, Envelope, Payload, Sub, Tag};
use crate::PartyId;

/// Binary crusader agreement among a committee of `s` parties tolerating
/// `f = ceil(s/3) - 1` faults.
///
/// Each member sends `VAL(input)`. A bit seen from `f + 1` distinct members
/// (as VAL or RELAY) is relayed; seen from `2f + 1` it is accepted. The first
/// accepted bit goes out as the member's single AUX message. Once `s - f` AUX
/// messages carry accepted values the member outputs `b` if at least `s - f`
/// of them are `b`, and ⊥ if both bits are accepted but neither has `s - f`.
#[derive(Clone, Debug, Serialize)]
pub struct Crusader {
    instance: u32,
    committee: u32,
    members: Vec<PartyId>,
    f: usize,
    input: Option<bool>,
    support: [BTreeSet<PartyId>; 2],
    sent: [bool; 2],
    accepted: [bool; 2],
    aux_sent: Option<bool>,
    aux: BTreeMap<PartyId, bool>,
    aux_count: [usize; 2],
    output: Option<Option<bool>>,
}

impl Crusader {
    /// `members` must be sorted.
    pub fn new(instance: u32, committee: u32, members: Vec<PartyId>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        let f = crusader_fault_bound(members.len());
        Crusader {
            instance,
            committee,
            members,
            f,
            input: None,
            support: [BTreeSet::new(), BTreeSet::new()],
            sent: [false; 2],
            accepted: [false; 2],
            aux_sent: None,
            aux: BTreeMap::new(),
            aux_count: [0; 2],
            output: None,
        }
    }

    pub fn fault_bound(&self) -> usize {
        self.f
    }

    /// `Some(None)` is ⊥.
    pub fn output(&self) -> Option<Option<bool>> {
        self.output
    }

    fn is_member(&self, p: PartyId) -> bool {
        self.members.binary_search(&p).is_ok()
    }

    fn broadcast(&self, sub: Sub, b: bool, ctx: &mut Context) {
        ctx.send_all(
            self.members.iter().copied(),
            Tag::new(self.instance, self.committee, sub),
            Payload::Bit(b),
        );
    }

    /// Sets the input and sends `VAL(input)`. Returns a fresh output, if any.
    pub fn start(&mut self, input: bool, ctx: &mut Context) -> Option<Option<bool>> {
        if self.input.is_some() {
            return None;
        }
        self.input = Some(input);
        if !self.sent[input as usize] {
            self.sent[input as usize] = true;
            self.broadcast(Sub::CrusVal, input, ctx);
        }
        None
    }

    /// Processes one crusader envelope. Returns the output when it is first
    /// decided.
    pub fn handle(&mut self, env: &Envelope, ctx: &mut Context) -> Option<Option<bool>> {
        let Payload::Bit(b) = env.payload else {
            return None;
        };
        let from = env.sender();
        if !self.is_member(from) {
            return None;
        }
        let i = b as usize;
        match env.tag().sub {
            Sub::CrusVal | Sub::CrusRelay => {
                self.support[i].insert(from);
                let seen = self.support[i].len();
                if seen > self.f && !self.sent[i] {
                    self.sent[i] = true;
                    self.broadcast(Sub::CrusRelay, b, ctx);
                }
                if seen > 2 * self.f && !self.accepted[i] {
                    self.accepted[i] = true;
                    if self.aux_sent.is_none() {
                        self.aux_sent = Some(b);
                        self.broadcast(Sub::CrusAux, b, ctx);
                    }
                }
            }
            Sub::CrusAux => {
                if let std::collections::btree_map::Entry::Vacant(e) = self.aux.entry(from) {
                    e.insert(b);
                    self.aux_count[i] += 1;
                }
            }
            _ => return None,
        }
        self.try_output()
    }

    fn try_output(&mut self) -> Option<Option<bool>> {
        if self.output.is_some() {
            return None;
        }
        let quorum = self.members.len() - self.f;
        let usable: usize = (0..2)
            .filter(|&b| self.accepted[b])
            .map(|b| self.aux_count[b])
            .sum();
        if usable < quorum {
            return None;
        }
        let decided =
            if let Some(b) = (0..2).find(|&b| self.accepted[b] && self.aux_count[b] >= quorum) {
                Some(b == 1)
            } else if self.accepted[0] && self.accepted[1] {
                None
            } else {
                return None;
            };
        self.output = Some(decided);
        self.output
    }
}
