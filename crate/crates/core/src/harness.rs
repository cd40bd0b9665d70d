//! Monte Carlo load sweeps and CSV output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::codes::{CodeEnsemble, CodeError};
use crate::model::{ContentionGraph, DegreeDistribution, ModelError};
use crate::sic::{peel, peel_generalized, SicError};
use crate::traffic::{build_graph, draw_active_count, SimRng, TrafficError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error("load point {load}: {source}")]
    Point { load: f64, source: Box<HarnessError> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Sic(#[from] SicError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;
/// Default user population per slot, so `p_a = G / 100`.
pub const POPULATION_PER_SLOT: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    /// Every replica is a full packet copy.
    Repetition(DegreeDistribution),
    /// Packets split into `k` segments and encoded by a component code.
    Coded(CodeEnsemble),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub loads: Vec<f64>,
    pub trials: usize,
    /// Frame length in packet slots. A coded scheme of dimension `k`
    /// transmits over `k · num_slots` segment slots.
    pub num_slots: usize,
    pub scheme: Scheme,
    /// User population; defaults to `100 · num_slots`.
    pub population: Option<usize>,
    pub seed: u64,
}

impl SweepSpec {
    pub fn new(scheme: Scheme, loads: Vec<f64>, num_slots: usize, trials: usize, seed: u64) -> Self {
        Self {
            loads,
            trials,
            num_slots,
            scheme,
            population: None,
            seed,
        }
    }

    pub fn population(&self) -> usize {
        self.population.unwrap_or(POPULATION_PER_SLOT * self.num_slots)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Spec("trials must be at least 1".into()));
        }
        if self.num_slots == 0 {
            return Err(HarnessError::Spec("frame must have at least one slot".into()));
        }
        if self.population() == 0 {
            return Err(HarnessError::Spec("population must be positive".into()));
        }
        if let Some(&g) = self.loads.iter().find(|&&g| !(g > 0.0 && g.is_finite())) {
            return Err(HarnessError::Spec(format!("load {g} must be positive")));
        }
        let span = match &self.scheme {
            Scheme::Repetition(d) => d.max_degree(),
            Scheme::Coded(e) => e.max_length(),
        };
        let slots = self.graph_slots();
        if span > slots {
            return Err(TrafficError::DegreeExceedsFrame { degree: span, num_slots: slots }.into());
        }
        Ok(())
    }

    fn graph_slots(&self) -> usize {
        match &self.scheme {
            Scheme::Repetition(_) => self.num_slots,
            Scheme::Coded(e) => e.dimension() * self.num_slots,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub active: usize,
    pub resolved: usize,
    pub iterations: usize,
    /// Summed recovery delay of resolved users, in packet slots.
    pub delay_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub load: f64,
    pub trials: usize,
    pub throughput: f64,
    pub throughput_ci95: f64,
    pub plr: f64,
    pub plr_ci95: f64,
    pub mean_iters: f64,
    /// Pooled over all resolved users of the point.
    pub mean_delay: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Sample mean and 95% half-width `1.96 · s / √n`; the half-width is 0 for
/// a single sample.
pub fn mean_ci(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * (var / n as f64).sqrt())
}

/// One trial at logical load `load`.
pub fn run_trial<R: Rng + ?Sized>(spec: &SweepSpec, load: f64, rng: &mut R) -> Result<TrialResult, HarnessError> {
    let population = spec.population();
    let p_a = load * spec.num_slots as f64 / population as f64;
    let active = draw_active_count(population, p_a, rng)?;
    match &spec.scheme {
        Scheme::Repetition(dist) => {
            let graph = build_graph(active, spec.num_slots, dist, rng)?;
            let trace = peel(&graph);
            let delay_sum = trace.recovery_slot.iter().flatten().map(|&s| (s + 1) as f64).sum();
            Ok(TrialResult {
                active,
                resolved: trace.num_resolved(),
                iterations: trace.iterations,
                delay_sum,
            })
        }
        Scheme::Coded(ensemble) => {
            let k = ensemble.dimension();
            let slots = k * spec.num_slots;
            let mut assignment = Vec::with_capacity(active);
            let mut placements = Vec::with_capacity(active);
            for _ in 0..active {
                let (code, _) = &ensemble.entries()[ensemble.sample(rng)];
                placements.push(rand::seq::index::sample(rng, slots, code.length()).into_vec());
                assignment.push(code);
            }
            let graph = ContentionGraph::new(slots, placements)?;
            let trace = peel_generalized(&graph, &assignment)?;
            let delay_sum = trace
                .recovery_slot
                .iter()
                .flatten()
                .map(|&s| (s + 1) as f64 / k as f64)
                .sum();
            Ok(TrialResult {
                active,
                resolved: trace.num_resolved(),
                iterations: trace.iterations,
                delay_sum,
            })
        }
    }
}

/// Aggregates trials of one load point in index order.
pub fn summarize(load: f64, num_slots: usize, trials: &[TrialResult]) -> SweepRow {
    let throughput: Vec<f64> = trials.iter().map(|t| t.resolved as f64 / num_slots as f64).collect();
    let plr: Vec<f64> = trials
        .iter()
        .map(|t| if t.active == 0 { 0.0 } else { (t.active - t.resolved) as f64 / t.active as f64 })
        .collect();
    let (throughput, throughput_ci95) = mean_ci(&throughput);
    let (plr, plr_ci95) = mean_ci(&plr);
    let resolved: usize = trials.iter().map(|t| t.resolved).sum();
    let delay: f64 = trials.iter().map(|t| t.delay_sum).sum();
    SweepRow {
        load,
        trials: trials.len(),
        throughput,
        throughput_ci95,
        plr,
        plr_ci95,
        mean_iters: trials.iter().map(|t| t.iterations as f64).sum::<f64>() / trials.len() as f64,
        mean_delay: if resolved == 0 { 0.0 } else { delay / resolved as f64 },
    }
}

/// Runs every (load point, trial) pair on the current rayon pool. Trial
/// `t` of point `i` draws from `SimRng::for_trial(seed, i, t)`, and results
/// are collected in index order, so the report does not depend on the
/// number of threads.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport, HarnessError> {
    spec.validate()?;
    let trials = spec.trials;
    let results: Vec<Result<TrialResult, HarnessError>> = (0..spec.loads.len() * trials)
        .into_par_iter()
        .map(|job| {
            let (point, trial) = (job / trials, job % trials);
            let mut rng = SimRng::for_trial(spec.seed, point as u64, trial as u64);
            run_trial(spec, spec.loads[point], &mut rng)
        })
        .collect();
    let mut rows = Vec::with_capacity(spec.loads.len());
    for (point, chunk) in results.chunks(trials.max(1)).enumerate() {
        let load = spec.loads[point];
        let chunk: Vec<TrialResult> = chunk
            .iter()
            .map(|r| match r {
                Ok(t) => Ok(*t),
                Err(e) => Err(HarnessError::Point { load, source: Box::new(clone_error(e)) }),
            })
            .collect::<Result<_, _>>()?;
        rows.push(summarize(load, spec.num_slots, &chunk));
    }
    Ok(SweepReport { rows })
}

// Errors are not `Clone` because of the I/O variant; trials never produce one.
fn clone_error(e: &HarnessError) -> HarnessError {
    HarnessError::Spec(e.to_string())
}

/// Parses `G0:G1:step` (inclusive) or a single load `G`.
pub fn parse_load_range(text: &str) -> Result<Vec<f64>, HarnessError> {
    let bad = || HarnessError::Spec(format!("bad load range `{text}` (expected G or G0:G1:step)"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [g] => Ok(vec![g]),
        [g0, g1, step] if step > 0.0 && g1 >= g0 && step.is_finite() && g1.is_finite() => {
            let count = ((g1 - g0) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| g0 + i as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}

/// `x` rounded to 6 significant digits, printed in shortest form.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    rounded.to_string()
}

pub const CSV_HEADER: &str = "G,trials,throughput,throughput_ci95,plr,plr_ci95,mean_iters,mean_delay";

pub fn report_csv(report: &SweepReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            sig6(r.load),
            r.trials,
            sig6(r.throughput),
            sig6(r.throughput_ci95),
            sig6(r.plr),
            sig6(r.plr_ci95),
            sig6(r.mean_iters),
            sig6(r.mean_delay)
        );
    }
    out
}

/// Writes the CSV form of `report` to `path`.
pub fn write_csv(report: &SweepReport, path: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.display().to_string(), source };
    let mut file = std::fs::File::create(path).map_err(io)?;
    file.write_all(report_csv(report).as_bytes()).map_err(io)
}
