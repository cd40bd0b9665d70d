//! Protocol variants beyond block repetition CSA. All of them feed slots
//! into the shared [`PeelingState`] as they are received.

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::model::Metrics;
use crate::sic::PeelingState;
use crate::traffic::{draw_active_count, prf_seed, replica_slots_from_seed, TrafficError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariantError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, VariantError> {
    Err(VariantError::Config(msg.into()))
}

// ---------------------------------------------------------------------------
// Frameless

pub const DEFAULT_BETA: f64 = 3.1;
pub const DEFAULT_TERM_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct FramelessConfig {
    pub n_active: usize,
    /// Each user transmits in a slot with probability `beta / n_active`.
    pub beta: f64,
    pub max_slots: usize,
    /// Stop once resolved users per elapsed slot reaches this value.
    pub term_throughput: Option<f64>,
    /// Stop once this fraction of users is resolved.
    pub term_fraction: Option<f64>,
}

impl FramelessConfig {
    pub fn new(n_active: usize) -> Self {
        Self {
            n_active,
            beta: DEFAULT_BETA,
            max_slots: 10 * n_active.max(1),
            term_throughput: None,
            term_fraction: Some(DEFAULT_TERM_FRACTION),
        }
    }

    pub fn validate(&self) -> Result<(), VariantError> {
        if self.n_active == 0 {
            return config_err("frameless contention needs at least one active user");
        }
        if !(self.beta > 0.0 && self.beta <= self.n_active as f64) {
            return config_err(format!(
                "beta {} must lie in (0, n_active = {}]",
                self.beta, self.n_active
            ));
        }
        if self.max_slots == 0 {
            return config_err("max_slots must be positive");
        }
        for (name, v) in [("term_throughput", self.term_throughput), ("term_fraction", self.term_fraction)] {
            if let Some(v) = v {
                if !(v > 0.0 && v <= 1.0) {
                    return config_err(format!("{name} {v} not in (0, 1]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramelessSlot {
    pub resolved_fraction: f64,
    /// Resolved users per elapsed slot.
    pub inst_throughput: f64,
    /// Mean delay of the users resolved so far.
    pub mean_delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramelessRun {
    /// State after each slot, index `t` describing the first `t + 1` slots.
    pub slots: Vec<FramelessSlot>,
    pub metrics: Metrics,
    /// Number of slots elapsed when the contention was closed.
    pub terminated_at: usize,
    /// Per user: elapsed slots when it was resolved.
    pub recovery_delay: Vec<Option<usize>>,
}

/// Runs one frameless contention period slot by slot, peeling after every
/// slot. Users keep transmitting after they are resolved since they receive
/// no feedback before termination.
pub fn run_frameless<R: Rng + ?Sized>(
    cfg: &FramelessConfig,
    rng: &mut R,
) -> Result<FramelessRun, VariantError> {
    cfg.validate()?;
    let n = cfg.n_active;
    let access = cfg.beta / n as f64;
    let mut state = PeelingState::new();
    for _ in 0..n {
        state.add_user();
    }
    let mut recovery_delay = vec![None; n];
    let mut slots = Vec::new();
    let mut seen = 0;
    let mut delay_sum = 0.0;
    let mut elapsed = 0;
    while elapsed < cfg.max_slots {
        elapsed += 1;
        let k = draw_active_count(n, access, rng)?;
        let users = rand::seq::index::sample(rng, n, k).into_vec();
        state.push_slot(&users).expect("users exist");
        state.run_to_fixpoint();
        for &u in &state.resolution_order()[seen..] {
            recovery_delay[u] = Some(elapsed);
            delay_sum += elapsed as f64;
        }
        seen = state.resolution_order().len();
        let fraction = seen as f64 / n as f64;
        let throughput = seen as f64 / elapsed as f64;
        slots.push(FramelessSlot {
            resolved_fraction: fraction,
            inst_throughput: throughput,
            mean_delay: if seen == 0 { 0.0 } else { delay_sum / seen as f64 },
        });
        let done = cfg.term_throughput.is_some_and(|x| throughput >= x)
            || cfg.term_fraction.is_some_and(|f| fraction >= f);
        if done {
            break;
        }
    }
    Ok(FramelessRun {
        slots,
        metrics: Metrics::new(seen, n, elapsed, delay_sum),
        terminated_at: elapsed,
        recovery_delay,
    })
}

// ---------------------------------------------------------------------------
// Convolutional (spatially coupled)

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionalConfig {
    /// Replicas per user, one in each of `d` consecutive periods.
    pub d: usize,
    pub num_slots: usize,
    pub population: usize,
    pub activation_probability: f64,
    /// Periods in which new users arrive; `d - 1` drain periods follow.
    pub num_periods: usize,
}

/// Population used when a configuration is given by its load alone.
pub const POPULATION_PER_SLOT: usize = 100;

impl ConvolutionalConfig {
    /// Configuration with mean arrivals `load · num_slots` per period.
    pub fn from_load(d: usize, num_slots: usize, load: f64, num_periods: usize) -> Self {
        let population = POPULATION_PER_SLOT * num_slots;
        Self {
            d,
            num_slots,
            population,
            activation_probability: load * num_slots as f64 / population as f64,
            num_periods,
        }
    }

    pub fn mean_arrivals(&self) -> f64 {
        self.activation_probability * self.population as f64
    }

    pub fn load(&self) -> f64 {
        self.mean_arrivals() / self.num_slots as f64
    }

    pub fn validate(&self) -> Result<(), VariantError> {
        if self.d == 0 {
            return config_err("d must be at least 1");
        }
        if self.num_slots == 0 {
            return config_err("periods need at least one slot");
        }
        if self.num_periods < self.d {
            return config_err(format!("{} periods cannot hold coupling depth {}", self.num_periods, self.d));
        }
        if !(self.activation_probability > 0.0 && self.activation_probability <= 1.0) {
            return config_err(format!("activation probability {} not in (0, 1]", self.activation_probability));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodStats {
    /// Replicas received in the period per slot.
    pub physical_load: f64,
    /// Users arriving at the start of the period.
    pub arrivals: usize,
    /// Arrivals eventually resolved.
    pub resolved: usize,
    pub plr: f64,
    /// Resolved arrivals per slot of one period.
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionalRun {
    /// `num_periods + d - 1` entries; the trailing ones carry no arrivals.
    pub periods: Vec<PeriodStats>,
    pub metrics: Metrics,
}

impl ConvolutionalRun {
    /// Pooled PLR of the arrival periods away from both chain ends,
    /// `[d, num_periods - d)`.
    pub fn interior_plr(&self, d: usize, num_periods: usize) -> f64 {
        let range = d..num_periods.saturating_sub(d).max(d);
        let (lost, total) = self.periods[range]
            .iter()
            .fold((0usize, 0usize), |(l, t), p| (l + p.arrivals - p.resolved, t + p.arrivals));
        if total == 0 {
            0.0
        } else {
            lost as f64 / total as f64
        }
    }
}

/// Users arriving in period `i` send one replica in a uniformly chosen slot
/// of each of periods `i..i+d`. The receiver peels across every stored
/// period after each period ends.
pub fn run_convolutional<R: Rng + ?Sized>(
    cfg: &ConvolutionalConfig,
    rng: &mut R,
) -> Result<ConvolutionalRun, VariantError> {
    cfg.validate()?;
    let m = cfg.num_slots;
    let total_periods = cfg.num_periods + cfg.d - 1;
    let mut state = PeelingState::new();
    // cohorts[i] = user ids arriving in period i.
    let mut cohorts: Vec<std::ops::Range<usize>> = Vec::with_capacity(cfg.num_periods);
    let mut replicas = Vec::with_capacity(total_periods);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); m];
    for t in 0..total_periods {
        if t < cfg.num_periods {
            let arrivals = draw_active_count(cfg.population, cfg.activation_probability, rng)?;
            let first = state.num_users();
            for _ in 0..arrivals {
                state.add_user();
            }
            cohorts.push(first..first + arrivals);
        }
        for b in buckets.iter_mut() {
            b.clear();
        }
        let mut count = 0;
        for cohort in &cohorts[t.saturating_sub(cfg.d - 1)..cohorts.len().min(t + 1)] {
            for u in cohort.clone() {
                buckets[rng.random_range(0..m)].push(u);
                count += 1;
            }
        }
        for b in &buckets {
            state.push_slot(b).expect("users exist");
        }
        state.run_to_fixpoint();
        replicas.push(count);
    }

    let mut periods = Vec::with_capacity(total_periods);
    let mut total_resolved = 0;
    let mut delay_sum = 0.0;
    for (t, &count) in replicas.iter().enumerate() {
        let cohort = cohorts.get(t).cloned().unwrap_or(0..0);
        let arrivals = cohort.len();
        let mut resolved = 0;
        for u in cohort {
            if let Some(s) = state.recovery_slot(u) {
                resolved += 1;
                // Slots elapsed since the user's first replica.
                delay_sum += (s + 1 - t * m) as f64;
            }
        }
        total_resolved += resolved;
        periods.push(PeriodStats {
            physical_load: count as f64 / m as f64,
            arrivals,
            resolved,
            plr: if arrivals == 0 { 0.0 } else { (arrivals - resolved) as f64 / arrivals as f64 },
            throughput: resolved as f64 / m as f64,
        });
    }
    Ok(ConvolutionalRun {
        periods,
        metrics: Metrics::new(total_resolved, state.num_users(), total_periods * m, delay_sum),
    })
}

// ---------------------------------------------------------------------------
// Framed slotted ALOHA upgrade

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpgradeMode {
    /// Legacy FSA: only singleton slots count, nothing is stored.
    A,
    /// One pseudorandom slot per frame; stored frames are peeled jointly.
    B,
    /// Several pseudorandom slots per frame; stored frames are peeled jointly.
    C,
}

impl std::str::FromStr for UpgradeMode {
    type Err = VariantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" | "A" => Ok(Self::A),
            "b" | "B" => Ok(Self::B),
            "c" | "C" => Ok(Self::C),
            other => config_err(format!("unknown upgrade mode `{other}` (expected a, b or c)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsaUpgradeConfig {
    pub mode: UpgradeMode,
    pub num_slots: usize,
    pub num_frames: usize,
    pub n_active: usize,
    pub replicas_per_frame: usize,
}

impl FsaUpgradeConfig {
    pub fn validate(&self) -> Result<(), VariantError> {
        if self.num_slots == 0 || self.num_frames == 0 {
            return config_err("need at least one frame of at least one slot");
        }
        match self.mode {
            UpgradeMode::A | UpgradeMode::B if self.replicas_per_frame != 1 => {
                config_err("modes a and b send exactly one replica per frame")
            }
            _ if self.replicas_per_frame == 0 || self.replicas_per_frame > self.num_slots => config_err(format!(
                "{} replicas per frame do not fit {} slots",
                self.replicas_per_frame, self.num_slots
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsaUpgradeRun {
    /// Throughput over all `num_frames · num_slots` slots; delay in slots
    /// up to the end of the resolving frame.
    pub metrics: Metrics,
    pub per_frame_resolved: Vec<usize>,
    /// Frame after which each user was known to the receiver.
    pub resolved_frame: Vec<Option<usize>>,
}

/// Draws the beacon nonce from `rng`; user `u` then uses the slots
/// `replica_slots_from_seed(prf_seed(u, frame, nonce), r, M)` in every mode.
pub fn run_fsa_upgrade<R: RngCore + ?Sized>(
    cfg: &FsaUpgradeConfig,
    rng: &mut R,
) -> Result<FsaUpgradeRun, VariantError> {
    cfg.validate()?;
    let nonce = rng.next_u64();
    let (r, m) = (cfg.replicas_per_frame, cfg.num_slots);
    run_fsa_upgrade_with(cfg, |user, frame| {
        replica_slots_from_seed(prf_seed(user as u64, frame as u64, nonce), r, m)
    })
}

/// Same as [`run_fsa_upgrade`] with an explicit placement
/// `placement(user, frame) -> slots`.
pub fn run_fsa_upgrade_with<F>(cfg: &FsaUpgradeConfig, mut placement: F) -> Result<FsaUpgradeRun, VariantError>
where
    F: FnMut(usize, usize) -> Vec<usize>,
{
    cfg.validate()?;
    let (n, m) = (cfg.n_active, cfg.num_slots);
    let mut resolved_frame: Vec<Option<usize>> = vec![None; n];
    let mut per_frame_resolved = Vec::with_capacity(cfg.num_frames);
    let mut state = PeelingState::new();
    for _ in 0..n {
        state.add_user();
    }
    let mut seen = 0;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); m];

    for frame in 0..cfg.num_frames {
        for b in buckets.iter_mut() {
            b.clear();
        }
        // Users notified by the beacon stay silent.
        for user in (0..n).filter(|&u| resolved_frame[u].is_none()) {
            for s in placement(user, frame) {
                assert!(s < m, "placement slot {s} outside frame of {m}");
                buckets[s].push(user);
            }
        }
        let mut newly = 0;
        match cfg.mode {
            UpgradeMode::A => {
                for b in &buckets {
                    if let [u] = b[..] {
                        if resolved_frame[u].is_none() {
                            resolved_frame[u] = Some(frame);
                            newly += 1;
                        }
                    }
                }
            }
            UpgradeMode::B | UpgradeMode::C => {
                for b in &buckets {
                    state.push_slot(b).expect("users exist");
                }
                state.run_to_fixpoint();
                for &u in &state.resolution_order()[seen..] {
                    resolved_frame[u] = Some(frame);
                    newly += 1;
                }
                seen = state.resolution_order().len();
            }
        }
        per_frame_resolved.push(newly);
    }

    let resolved = resolved_frame.iter().filter(|f| f.is_some()).count();
    let delay_sum = resolved_frame
        .iter()
        .flatten()
        .map(|&f| ((f + 1) * m) as f64)
        .sum();
    Ok(FsaUpgradeRun {
        metrics: Metrics::new(resolved, n, cfg.num_frames * m, delay_sum),
        per_frame_resolved,
        resolved_frame,
    })
}
