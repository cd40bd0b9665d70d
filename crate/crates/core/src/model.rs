//! Domain types shared by every engine: degree distributions, contention
//! graphs, traffic configurations, decode traces and per-run metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Tolerance on the total probability mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("degree distribution is empty")]
    EmptyDistribution,
    #[error("degree must be at least 1, got {0}")]
    ZeroDegree(usize),
    #[error("probability {prob} for degree {degree} is outside [0, 1]")]
    BadProbability { degree: usize, prob: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    BadMass(f64),
    #[error("degree {0} listed twice")]
    DuplicateDegree(usize),
    #[error("cannot parse distribution entry `{0}` (expected `d:prob`)")]
    Parse(String),
    #[error("user {user} has replica slot {slot} outside a frame of {num_slots} slots")]
    SlotOutOfRange {
        user: usize,
        slot: usize,
        num_slots: usize,
    },
    #[error("user {user} uses slot {slot} more than once")]
    RepeatedSlot { user: usize, slot: usize },
    #[error("invalid traffic configuration: {0}")]
    Traffic(String),
}

/// Probability mass over replica counts.
///
/// Stored sparsely; optimized distributions typically have a handful of
/// nonzero degrees. Entries with zero probability are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    entries: BTreeMap<usize, f64>,
}

impl DegreeDistribution {
    pub fn new<I>(pairs: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut entries = BTreeMap::new();
        let mut total = 0.0;
        for (degree, prob) in pairs {
            if degree == 0 {
                return Err(ModelError::ZeroDegree(degree));
            }
            if !(0.0..=1.0).contains(&prob) {
                return Err(ModelError::BadProbability { degree, prob });
            }
            if entries.contains_key(&degree) {
                return Err(ModelError::DuplicateDegree(degree));
            }
            total += prob;
            if prob > 0.0 {
                entries.insert(degree, prob);
            }
        }
        if entries.is_empty() {
            return Err(ModelError::EmptyDistribution);
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(ModelError::BadMass(total));
        }
        Ok(Self { entries })
    }

    /// Every user sends exactly `degree` replicas.
    pub fn regular(degree: usize) -> Result<Self, ModelError> {
        Self::new([(degree, 1.0)])
    }

    pub fn entries(&self) -> &BTreeMap<usize, f64> {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&d, &p)| (d, p))
    }

    pub fn max_degree(&self) -> usize {
        *self.entries.keys().next_back().expect("nonempty")
    }

    pub fn min_degree(&self) -> usize {
        *self.entries.keys().next().expect("nonempty")
    }

    /// Average number of replicas per user.
    pub fn mean_degree(&self) -> f64 {
        self.iter().map(|(d, p)| d as f64 * p).sum()
    }

    /// Repetition rate `1 / mean_degree`.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean_degree()
    }

    /// Converts node-perspective probabilities `Λ_d` into edge-perspective
    /// coefficients `d·Λ_d / d̄`.
    pub fn edge_perspective(&self) -> EdgeDistribution {
        let mean = self.mean_degree();
        EdgeDistribution {
            coefficients: self
                .iter()
                .map(|(d, p)| (d, d as f64 * p / mean))
                .collect(),
        }
    }
}

impl fmt::Display for DegreeDistribution {
    /// `d:prob` pairs separated by commas. Probabilities are printed with
    /// round-trip precision so the text parses back to the same value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (d, p)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}:{p}")?;
        }
        Ok(())
    }
}

impl FromStr for DegreeDistribution {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut pairs = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (d, p) = item
                .split_once(':')
                .ok_or_else(|| ModelError::Parse(item.to_string()))?;
            let d: usize = d
                .trim()
                .parse()
                .map_err(|_| ModelError::Parse(item.to_string()))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| ModelError::Parse(item.to_string()))?;
            pairs.push((d, p));
        }
        Self::new(pairs)
    }
}

/// Edge-perspective degree coefficients `λ_d`, defining the polynomial
/// `λ(x) = Σ λ_d x^(d-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDistribution {
    coefficients: BTreeMap<usize, f64>,
}

impl EdgeDistribution {
    pub fn coefficients(&self) -> &BTreeMap<usize, f64> {
        &self.coefficients
    }

    pub fn get(&self, degree: usize) -> f64 {
        self.coefficients.get(&degree).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .map(|(&d, &c)| c * x.powi(d as i32 - 1))
            .sum()
    }
}

/// Population model for one contention period.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub population: usize,
    pub activation_probability: f64,
    pub num_slots: usize,
    pub distribution: DegreeDistribution,
}

impl TrafficConfig {
    pub fn new(
        population: usize,
        activation_probability: f64,
        num_slots: usize,
        distribution: DegreeDistribution,
    ) -> Result<Self, ModelError> {
        if !(activation_probability > 0.0 && activation_probability <= 1.0) {
            return Err(ModelError::Traffic(format!(
                "activation probability {activation_probability} not in (0, 1]"
            )));
        }
        if num_slots == 0 {
            return Err(ModelError::Traffic("frame needs at least one slot".into()));
        }
        if population == 0 {
            return Err(ModelError::Traffic("population must be positive".into()));
        }
        Ok(Self {
            population,
            activation_probability,
            num_slots,
            distribution,
        })
    }

    /// Builds a configuration hitting logical load `load` with a population of
    /// `population` users.
    pub fn with_load(
        load: f64,
        population: usize,
        num_slots: usize,
        distribution: DegreeDistribution,
    ) -> Result<Self, ModelError> {
        if !(load > 0.0) {
            return Err(ModelError::Traffic(format!("load {load} must be positive")));
        }
        let p_a = load * num_slots as f64 / population as f64;
        Self::new(population, p_a, num_slots, distribution)
    }

    pub fn logical_load(&self) -> f64 {
        self.activation_probability * self.population as f64 / self.num_slots as f64
    }

    /// `(G, G_phy)`: expected active users per slot and expected replicas per slot.
    pub fn loads(&self) -> (f64, f64) {
        let g = self.logical_load();
        (g, g * self.distribution.mean_degree())
    }
}

/// One active user and the slots carrying its replicas, in transmission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: usize,
    pub replica_slots: Vec<usize>,
}

/// Bipartite user/slot graph of a single contention period.
///
/// User ids are their positions in [`ContentionGraph::users`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentionGraph {
    num_slots: usize,
    users: Vec<UserRecord>,
    slot_users: Vec<Vec<usize>>,
}

impl ContentionGraph {
    pub fn new(num_slots: usize, placements: Vec<Vec<usize>>) -> Result<Self, ModelError> {
        let mut slot_users = vec![Vec::new(); num_slots];
        let mut users = Vec::with_capacity(placements.len());
        for (user, slots) in placements.into_iter().enumerate() {
            for (i, &slot) in slots.iter().enumerate() {
                if slot >= num_slots {
                    return Err(ModelError::SlotOutOfRange {
                        user,
                        slot,
                        num_slots,
                    });
                }
                if slots[..i].contains(&slot) {
                    return Err(ModelError::RepeatedSlot { user, slot });
                }
                slot_users[slot].push(user);
            }
            users.push(UserRecord {
                user_id: user,
                replica_slots: slots,
            });
        }
        Ok(Self {
            num_slots,
            users,
            slot_users,
        })
    }

    pub fn empty(num_slots: usize) -> Self {
        Self {
            num_slots,
            users: Vec::new(),
            slot_users: vec![Vec::new(); num_slots],
        }
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn replica_slots(&self, user: usize) -> &[usize] {
        &self.users[user].replica_slots
    }

    /// Users transmitting in `slot`, in increasing id order.
    pub fn slot_users(&self, slot: usize) -> &[usize] {
        &self.slot_users[slot]
    }

    pub fn slot_degree(&self, slot: usize) -> usize {
        self.slot_users[slot].len()
    }

    pub fn num_edges(&self) -> usize {
        self.users.iter().map(|u| u.replica_slots.len()).sum()
    }

    /// Copy of the graph with `user` deleted; remaining users keep their order
    /// but ids above `user` shift down by one.
    pub fn without_user(&self, user: usize) -> Self {
        let placements = self
            .users
            .iter()
            .filter(|u| u.user_id != user)
            .map(|u| u.replica_slots.clone())
            .collect();
        Self::new(self.num_slots, placements).expect("subgraph of a valid graph")
    }
}

/// Outcome of one SIC run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodeTrace {
    /// Resolving slot per user; `None` for users left unresolved.
    pub recovery_slot: Vec<Option<usize>>,
    /// Synchronous rounds that resolved at least one user.
    pub iterations: usize,
    pub per_iteration_resolved: Vec<usize>,
    /// Edges still attached to unresolved users after each round.
    pub residual_edges: Vec<usize>,
}

impl DecodeTrace {
    pub fn num_users(&self) -> usize {
        self.recovery_slot.len()
    }

    pub fn is_resolved(&self, user: usize) -> bool {
        self.recovery_slot.get(user).is_some_and(Option::is_some)
    }

    pub fn num_resolved(&self) -> usize {
        self.recovery_slot.iter().filter(|s| s.is_some()).count()
    }

    /// Resolved user ids in increasing order.
    pub fn resolved(&self) -> Vec<usize> {
        self.recovery_slot
            .iter()
            .enumerate()
            .filter_map(|(u, s)| s.map(|_| u))
            .collect()
    }

    /// CSV dump, one line per round: `iter,resolved_count,residual_edges`.
    pub fn write_rounds<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,resolved_count,residual_edges")?;
        for (i, (r, e)) in self
            .per_iteration_resolved
            .iter()
            .zip(&self.residual_edges)
            .enumerate()
        {
            writeln!(out, "{},{},{}", i + 1, r, e)?;
        }
        Ok(())
    }
}

/// Per-run figures of merit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Resolved packets per slot.
    pub throughput: f64,
    /// Fraction of active users left unresolved (0 when nobody was active).
    pub plr: f64,
    /// Mean recovery delay in slots over resolved users (0 when none).
    pub mean_delay: f64,
}

impl Metrics {
    pub fn new(resolved: usize, active: usize, slots: usize, delay_sum: f64) -> Self {
        let plr = if active == 0 {
            0.0
        } else {
            (active - resolved) as f64 / active as f64
        };
        let mean_delay = if resolved == 0 {
            0.0
        } else {
            delay_sum / resolved as f64
        };
        Self {
            throughput: resolved as f64 / slots as f64,
            plr,
            mean_delay,
        }
    }

    /// Block-frame metrics; a user's delay is the 1-based index of the slot
    /// whose replica resolved it.
    pub fn from_trace(trace: &DecodeTrace, num_slots: usize) -> Self {
        let delay_sum: f64 = trace
            .recovery_slot
            .iter()
            .flatten()
            .map(|&s| (s + 1) as f64)
            .sum();
        Self::new(trace.num_resolved(), trace.num_users(), num_slots, delay_sum)
    }
}
