use std::collections::BTreeSet;

use serde::Serialize;

use super::crusader::Crusader;
use crate::simnet::{Context, Envelope, Payload, Sub, Tag};
use crate::PartyId;

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Role {
    Member {
        crusader: Crusader,
        /// Receivers adjacent to this member in the publish graph.
        receivers: Vec<PartyId>,
        input: Option<bool>,
    },
    Receiver {
        /// Sorted committee members adjacent to this party's vertex.
        neighbors: Vec<PartyId>,
        delta_cap: usize,
        seen: BTreeSet<PartyId>,
        /// `counts[b]`: distinct neighbors that sent `b` or ⊥.
        counts: [usize; 2],
    },
}

/// One party's view of one `Publish(Q, d)` instance.
///
/// Members run crusader agreement on their input, send the crusader output
/// to their graph neighbors and then output their own input. Everyone else
/// outputs `b` after more than `Δ/2` distinct neighbors sent `b` or ⊥,
/// preferring 0 when both qualify at once.
#[derive(Clone, Debug, Serialize)]
pub struct PublishInstance {
    instance: u32,
    committee: u32,
    role: Role,
    output: Option<bool>,
    /// Publish messages discarded because the sender is not a neighbor.
    pub foreign: u64,
}

impl PublishInstance {
    pub fn member(
        instance: u32,
        committee: u32,
        members: Vec<PartyId>,
        receivers: Vec<PartyId>,
    ) -> Self {
        PublishInstance {
            instance,
            committee,
            role: Role::Member {
                crusader: Crusader::new(instance, committee, members),
                receivers,
                input: None,
            },
            output: None,
            foreign: 0,
        }
    }

    pub fn receiver(
        instance: u32,
        committee: u32,
        mut neighbors: Vec<PartyId>,
        delta_cap: usize,
    ) -> Self {
        neighbors.sort_unstable();
        PublishInstance {
            instance,
            committee,
            role: Role::Receiver {
                neighbors,
                delta_cap,
                seen: BTreeSet::new(),
                counts: [0; 2],
            },
            output: None,
            foreign: 0,
        }
    }

    pub fn is_member(&self) -> bool {
        matches!(self.role, Role::Member { .. })
    }

    pub fn output(&self) -> Option<bool> {
        self.output
    }

    pub fn crusader_output(&self) -> Option<Option<bool>> {
        match &self.role {
            Role::Member { crusader, .. } => crusader.output(),
            Role::Receiver { .. } => None,
        }
    }

    /// Feeds the member's input (the strong-coin output). Returns the publish
    /// output if it becomes available.
    pub fn set_input(&mut self, b: bool, ctx: &mut Context) -> Option<bool> {
        let Role::Member {
            crusader, input, ..
        } = &mut self.role
        else {
            return None;
        };
        if input.is_some() {
            return None;
        }
        *input = Some(b);
        let y = crusader.start(b, ctx);
        self.after_crusader(y, ctx)
    }

    fn after_crusader(&mut self, y: Option<Option<bool>>, ctx: &mut Context) -> Option<bool> {
        let Role::Member {
            receivers,
            input,
            crusader,
        } = &self.role
        else {
            return None;
        };
        let (Some(y), Some(b)) = (y.or_else(|| crusader.output()), *input) else {
            return None;
        };
        if self.output.is_some() {
            return None;
        }
        ctx.send_all(
            receivers.iter().copied(),
            Tag::new(self.instance, self.committee, Sub::Pub),
            Payload::Ternary(y),
        );
        self.output = Some(b);
        self.output
    }

    /// Processes a crusader or publish envelope for this instance.
    pub fn handle(&mut self, env: &Envelope, ctx: &mut Context) -> Option<bool> {
        match (&mut self.role, env.tag().sub) {
            (Role::Member { crusader, .. }, Sub::CrusVal | Sub::CrusRelay | Sub::CrusAux) => {
                let y = crusader.handle(env, ctx);
                self.after_crusader(y, ctx)
            }
            (
                Role::Receiver {
                    neighbors,
                    delta_cap,
                    seen,
                    counts,
                },
                Sub::Pub,
            ) => {
                let Payload::Ternary(y) = env.payload else {
                    return None;
                };
                let from = env.sender();
                if neighbors.binary_search(&from).is_err() {
                    self.foreign += 1;
                    return None;
                }
                if !seen.insert(from) || self.output.is_some() {
                    return None;
                }
                match y {
                    Some(b) => counts[b as usize] += 1,
                    None => {
                        counts[0] += 1;
                        counts[1] += 1;
                    }
                }
                let winner = (0..2).find(|&b| 2 * counts[b] > *delta_cap)?;
                self.output = Some(winner == 1);
                self.output
            }
            _ => None,
        }
    }
}
