//! Successive interference cancellation as peeling on the user/slot graph.
//!
//! [`PeelingState`] is the single engine behind every decoder in the crate.
//! It keeps, per slot, the number of unresolved users still transmitting in
//! it and the XOR of their ids; a slot of residual degree one therefore names
//! its user directly. Work is driven by a queue of degree-one slots, but
//! progress is reported in synchronous rounds: every degree-one slot present
//! at the start of a round is read, then all users resolved in the round are
//! cancelled together.
//!
//! The state can grow slot by slot, which is how the frameless, coupled and
//! multi-frame engines use it. A replica landing after its user was resolved
//! is cancelled on arrival.

use thiserror::Error;

use crate::codes::ComponentCode;
use crate::model::{ContentionGraph, DecodeTrace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SicError {
    #[error("unknown user {0}")]
    UnknownUser(usize),
    #[error("user {0} is already resolved")]
    AlreadyResolved(usize),
    #[error("user {user} sends {replicas} segments but its code has length {length}")]
    LengthMismatch {
        user: usize,
        replicas: usize,
        length: usize,
    },
    #[error("{codes} code assignments for {users} users")]
    AssignmentCount { codes: usize, users: usize },
}

/// Mutable peeling state. Users decode by repetition (any one replica
/// suffices) unless they carry a component code.
#[derive(Debug, Clone, Default)]
pub struct PeelingState<'a> {
    slot_degree: Vec<u32>,
    slot_xor: Vec<usize>,
    user_slots: Vec<Vec<usize>>,
    codes: Vec<Option<&'a ComponentCode>>,
    known: Vec<u64>,
    resolved: Vec<bool>,
    recovery_slot: Vec<Option<usize>>,
    queue: Vec<usize>,
    order: Vec<usize>,
    residual_edges: usize,
    per_round: Vec<usize>,
    residual_per_round: Vec<usize>,
}

impl<'a> PeelingState<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    /// State for a complete contention graph; no peeling has happened yet.
    pub fn from_graph(graph: &ContentionGraph) -> Self {
        let mut state = Self::new();
        for _ in 0..graph.num_users() {
            state.add_user();
        }
        for s in 0..graph.num_slots() {
            state.push_slot(graph.slot_users(s)).expect("graph users exist");
        }
        // Users list their replicas in transmission order; `push_slot` saw
        // them in slot order.
        for (u, rec) in graph.users().iter().enumerate() {
            state.user_slots[u].clone_from(&rec.replica_slots);
        }
        state
    }

    pub fn add_user(&mut self) -> usize {
        self.add_user_with(None)
    }

    /// Adds a user that needs `code` to be decodable from its revealed segments.
    pub fn add_coded_user(&mut self, code: &'a ComponentCode) -> usize {
        self.add_user_with(Some(code))
    }

    fn add_user_with(&mut self, code: Option<&'a ComponentCode>) -> usize {
        self.user_slots.push(Vec::new());
        self.codes.push(code);
        self.known.push(0);
        self.resolved.push(false);
        self.recovery_slot.push(None);
        self.user_slots.len() - 1
    }

    /// Appends a slot holding one replica from each of `users` and returns its index.
    pub fn push_slot(&mut self, users: &[usize]) -> Result<usize, SicError> {
        if let Some(&u) = users.iter().find(|&&u| u >= self.num_users()) {
            return Err(SicError::UnknownUser(u));
        }
        let slot = self.slot_degree.len();
        let mut degree = 0;
        let mut xor = 0;
        for &u in users {
            self.user_slots[u].push(slot);
            if !self.resolved[u] {
                degree += 1;
                xor ^= u;
            }
        }
        self.slot_degree.push(degree);
        self.slot_xor.push(xor);
        self.residual_edges += degree as usize;
        if degree == 1 {
            self.queue.push(slot);
        }
        Ok(slot)
    }

    pub fn num_users(&self) -> usize {
        self.user_slots.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slot_degree.len()
    }

    pub fn is_resolved(&self, user: usize) -> bool {
        self.resolved[user]
    }

    pub fn num_resolved(&self) -> usize {
        self.resolved.iter().filter(|&&r| r).count()
    }

    pub fn recovery_slot(&self, user: usize) -> Option<usize> {
        self.recovery_slot[user]
    }

    /// Number of unresolved users with a replica in `slot`.
    pub fn residual_degree(&self, slot: usize) -> usize {
        self.slot_degree[slot] as usize
    }

    /// Edges still attached to unresolved users.
    pub fn residual_edges(&self) -> usize {
        self.residual_edges
    }

    /// Users resolved by peeling rounds, in the order they were resolved.
    pub fn resolution_order(&self) -> &[usize] {
        &self.order
    }

    /// Slots of residual degree one awaiting processing.
    pub fn pending_slots(&self) -> &[usize] {
        &self.queue
    }

    /// Removes every edge of an unresolved `user` and marks it resolved
    /// without a recovery slot. Slots left with a single user are queued.
    pub fn cancel_user(&mut self, user: usize) -> Result<(), SicError> {
        if user >= self.num_users() {
            return Err(SicError::UnknownUser(user));
        }
        if self.resolved[user] {
            return Err(SicError::AlreadyResolved(user));
        }
        self.resolved[user] = true;
        self.remove_edges(user);
        Ok(())
    }

    fn remove_edges(&mut self, user: usize) {
        for i in 0..self.user_slots[user].len() {
            let s = self.user_slots[user][i];
            self.slot_degree[s] -= 1;
            self.slot_xor[s] ^= user;
            if self.slot_degree[s] == 1 {
                self.queue.push(s);
            }
        }
        self.residual_edges -= self.user_slots[user].len();
    }

    /// Processes all degree-one slots queued at the start of the round, then
    /// cancels every user resolved by them. Returns the number resolved.
    pub fn run_round(&mut self) -> usize {
        let slots = std::mem::take(&mut self.queue);
        let mut resolved = Vec::new();
        for s in slots {
            if self.slot_degree[s] != 1 {
                continue;
            }
            let u = self.slot_xor[s];
            if self.resolved[u] {
                continue;
            }
            let decoded = match self.codes[u] {
                None => true,
                Some(code) => {
                    let pos = self.user_slots[u]
                        .iter()
                        .position(|&x| x == s)
                        .expect("slot lists its user");
                    self.known[u] |= 1 << pos;
                    code.decodable(self.known[u])
                }
            };
            if decoded {
                self.resolved[u] = true;
                self.recovery_slot[u] = Some(s);
                resolved.push(u);
            }
        }
        for &u in &resolved {
            self.remove_edges(u);
        }
        self.order.extend_from_slice(&resolved);
        if !resolved.is_empty() {
            self.per_round.push(resolved.len());
            self.residual_per_round.push(self.residual_edges);
        }
        resolved.len()
    }

    /// Runs rounds until one resolves nobody. Returns the number resolved.
    pub fn run_to_fixpoint(&mut self) -> usize {
        let mut total = 0;
        loop {
            let n = self.run_round();
            if n == 0 {
                return total;
            }
            total += n;
        }
    }

    pub fn trace(&self) -> DecodeTrace {
        DecodeTrace {
            recovery_slot: self.recovery_slot.clone(),
            iterations: self.per_round.len(),
            per_iteration_resolved: self.per_round.clone(),
            residual_edges: self.residual_per_round.clone(),
        }
    }

    /// Σ residual slot degrees and Σ replicas of unresolved users; always equal.
    pub fn edge_balance(&self) -> (usize, usize) {
        let slots = self.slot_degree.iter().map(|&d| d as usize).sum();
        let users = self
            .user_slots
            .iter()
            .zip(&self.resolved)
            .filter(|(_, &r)| !r)
            .map(|(s, _)| s.len())
            .sum();
        (slots, users)
    }
}

/// Iterative SIC on a repetition-coded contention period.
pub fn peel(graph: &ContentionGraph) -> DecodeTrace {
    let mut state = PeelingState::from_graph(graph);
    state.run_to_fixpoint();
    state.trace()
}

/// Plain collision-channel reception: users heard in a singleton slot are
/// decoded, nothing is cancelled.
pub fn decode_without_sic(graph: &ContentionGraph) -> DecodeTrace {
    let mut recovery_slot = vec![None; graph.num_users()];
    for s in 0..graph.num_slots() {
        if let [u] = graph.slot_users(s) {
            recovery_slot[*u].get_or_insert(s);
        }
    }
    let resolved = recovery_slot.iter().filter(|r| r.is_some()).count();
    let residual = graph
        .users()
        .iter()
        .filter(|u| recovery_slot[u.user_id].is_none())
        .map(|u| u.replica_slots.len())
        .sum();
    let (iterations, per, res) = if resolved > 0 {
        (1, vec![resolved], vec![residual])
    } else {
        (0, vec![], vec![])
    };
    DecodeTrace {
        recovery_slot,
        iterations,
        per_iteration_resolved: per,
        residual_edges: res,
    }
}

/// SIC for generalized CSA: user `u` sends the segments of a codeword of
/// `assignment[u]`, segment `i` in `graph.replica_slots(u)[i]`, and is
/// resolved once its revealed segments determine its packet.
pub fn peel_generalized(
    graph: &ContentionGraph,
    assignment: &[&ComponentCode],
) -> Result<DecodeTrace, SicError> {
    if assignment.len() != graph.num_users() {
        return Err(SicError::AssignmentCount {
            codes: assignment.len(),
            users: graph.num_users(),
        });
    }
    for (u, code) in assignment.iter().enumerate() {
        let replicas = graph.replica_slots(u).len();
        if replicas != code.length() {
            return Err(SicError::LengthMismatch {
                user: u,
                replicas,
                length: code.length(),
            });
        }
    }
    let mut state = PeelingState::from_graph(graph);
    for (u, &code) in assignment.iter().enumerate() {
        state.codes[u] = Some(code);
    }
    state.run_to_fixpoint();
    Ok(state.trace())
}
