//! Degree-distribution search maximizing the density-evolution threshold at
//! a fixed rate, by differential evolution (DE/rand/1/bin).
//!
//! Candidates are raw weight vectors over degrees `2..=D`. Every vector is
//! projected onto the feasible set (nonnegative, summing to one, mean degree
//! `1/R`) before it is scored, so the evolution arithmetic itself is
//! unconstrained.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{bound_root, threshold};
use crate::model::DegreeDistribution;
use crate::traffic::SimRng;

pub const COARSE_TOL: f64 = 1e-2;
pub const FINE_TOL: f64 = 1e-4;
/// Candidates re-scored at fine resolution at the end of the search.
const FINALISTS: usize = 5;
/// Weights below this are dropped during projection.
const WEIGHT_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("rate {0} outside (0, 1/2]")]
    BadRate(f64),
    #[error("mean degree {mean} = 1/R cannot be reached with degrees up to {max_degree}")]
    Infeasible { mean: f64, max_degree: usize },
    #[error("invalid optimizer setting: {0}")]
    BadSetting(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub target_rate: f64,
    pub max_degree: usize,
    pub population: usize,
    pub generations: usize,
    /// Differential weight `F`.
    pub mutation: f64,
    /// Crossover rate `CR`.
    pub crossover: f64,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn new(target_rate: f64, max_degree: usize) -> Self {
        Self {
            target_rate,
            max_degree,
            population: 30,
            generations: 60,
            mutation: 0.5,
            crossover: 0.9,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        if !(self.target_rate > 0.0 && self.target_rate <= 0.5) {
            return Err(OptimizeError::BadRate(self.target_rate));
        }
        let mean = 1.0 / self.target_rate;
        if self.max_degree < 2 || mean > self.max_degree as f64 + 1e-12 {
            return Err(OptimizeError::Infeasible {
                mean,
                max_degree: self.max_degree,
            });
        }
        if !(self.mutation > 0.0 && self.mutation < 2.0) {
            return Err(OptimizeError::BadSetting(format!("F = {} not in (0, 2)", self.mutation)));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(OptimizeError::BadSetting(format!("CR = {} not in [0, 1]", self.crossover)));
        }
        if self.population < 4 {
            return Err(OptimizeError::BadSetting("population needs at least 4 members".into()));
        }
        Ok(())
    }

    fn target_mean(&self) -> f64 {
        (1.0 / self.target_rate).min(self.max_degree as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub distribution: DegreeDistribution,
    /// Threshold of `distribution`, resolved to [`FINE_TOL`].
    pub threshold: f64,
    /// Rate bound for the target rate.
    pub bound: f64,
}

/// Projects raw weights over degrees `2..2+len` onto the probability simplex
/// with mean degree `target_mean`.
///
/// The mean is corrected by shifting along the centred-degree direction
/// (which keeps the total mass), clipping negative weights and repeating;
/// a final convex mix with the lowest or highest degree lands it exactly.
pub fn project(raw: &[f64], target_mean: f64) -> Vec<f64> {
    let n = raw.len();
    let degrees: Vec<f64> = (0..n).map(|i| (i + 2) as f64).collect();
    let centre = degrees.iter().sum::<f64>() / n as f64;
    let spread: f64 = degrees.iter().map(|d| (d - centre).powi(2)).sum();

    let mut x: Vec<f64> = raw.iter().map(|&v| if v.is_finite() { v.max(0.0) } else { 0.0 }).collect();
    if x.iter().sum::<f64>() <= 0.0 {
        x.fill(1.0);
    }
    for _ in 0..50 {
        normalize(&mut x);
        let mean = dot(&x, &degrees);
        if (mean - target_mean).abs() < 1e-12 || spread == 0.0 {
            break;
        }
        let t = (target_mean - mean) / spread;
        for (w, d) in x.iter_mut().zip(&degrees) {
            *w = (*w + t * (d - centre)).max(0.0);
        }
    }
    for w in x.iter_mut() {
        if *w < WEIGHT_FLOOR {
            *w = 0.0;
        }
    }
    if x.iter().sum::<f64>() <= 0.0 {
        x[n - 1] = 1.0;
    }
    normalize(&mut x);

    let mean = dot(&x, &degrees);
    let (vertex, theta) = if mean < target_mean {
        (n - 1, (target_mean - mean) / (degrees[n - 1] - mean))
    } else if mean > target_mean {
        (0, (mean - target_mean) / (mean - degrees[0]))
    } else {
        (0, 0.0)
    };
    if theta > 0.0 {
        for w in x.iter_mut() {
            *w *= 1.0 - theta;
        }
        x[vertex] += theta;
    }
    normalize(&mut x);
    x
}

fn normalize(x: &mut [f64]) {
    let s: f64 = x.iter().sum();
    for w in x.iter_mut() {
        *w /= s;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Distribution from projected weights over degrees `2..`.
pub fn to_distribution(weights: &[f64]) -> DegreeDistribution {
    let pairs: Vec<(usize, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| (i + 2, w))
        .collect();
    // Fold rounding drift into the heaviest entry so the mass is exactly 1.
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut pairs = pairs;
    if let Some(top) = pairs
        .iter_mut()
        .max_by(|a, b| a.1.total_cmp(&b.1))
    {
        top.1 += 1.0 - total;
    }
    DegreeDistribution::new(pairs).expect("projected weights form a distribution")
}

fn fitness(weights: &[f64], tol: f64) -> f64 {
    threshold(&to_distribution(weights), tol)
}

/// Runs the search. Deterministic for a given configuration, independent of
/// the number of worker threads.
pub fn optimize_distribution(cfg: &OptimizerConfig) -> Result<Optimized, OptimizeError> {
    cfg.validate()?;
    let target = cfg.target_mean();
    let dims = cfg.max_degree - 1;
    let bound = bound_root(cfg.target_rate).map_err(|e| OptimizeError::BadSetting(e.to_string()))?;

    if dims == 1 {
        let weights = project(&[1.0], target);
        let distribution = to_distribution(&weights);
        let threshold = threshold(&distribution, FINE_TOL);
        return Ok(Optimized {
            distribution,
            threshold,
            bound,
        });
    }

    let mut rng = SimRng::from_seed(cfg.seed);
    let mut population: Vec<Vec<f64>> = Vec::with_capacity(cfg.population);
    // Seed with the regular / two-point distribution at the target mean.
    let lo = target.floor() as usize;
    let mut anchor = vec![0.0; dims];
    anchor[lo - 2] = 1.0;
    if lo < cfg.max_degree {
        anchor[lo - 1] = target - lo as f64;
        anchor[lo - 2] = 1.0 - anchor[lo - 1];
    }
    population.push(project(&anchor, target));
    while population.len() < cfg.population {
        let raw: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        population.push(project(&raw, target));
    }
    let mut scores: Vec<f64> = population
        .par_iter()
        .map(|w| fitness(w, COARSE_TOL))
        .collect();

    for _ in 0..cfg.generations {
        let trials: Vec<Vec<f64>> = (0..cfg.population)
            .map(|i| {
                let [a, b, c] = pick_three(&mut rng, cfg.population, i);
                let forced = rng.random_range(0..dims);
                let raw: Vec<f64> = (0..dims)
                    .map(|j| {
                        if j == forced || rng.random::<f64>() < cfg.crossover {
                            population[a][j] + cfg.mutation * (population[b][j] - population[c][j])
                        } else {
                            population[i][j]
                        }
                    })
                    .collect();
                project(&raw, target)
            })
            .collect();
        let trial_scores: Vec<f64> = trials.par_iter().map(|w| fitness(w, COARSE_TOL)).collect();
        for (i, (trial, score)) in trials.into_iter().zip(trial_scores).enumerate() {
            if score >= scores[i] {
                population[i] = trial;
                scores[i] = score;
            }
        }
    }

    let mut order: Vec<usize> = (0..cfg.population).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let finalists: Vec<&Vec<f64>> = order.iter().take(FINALISTS).map(|&i| &population[i]).collect();
    let refined: Vec<f64> = finalists.par_iter().map(|w| fitness(w, FINE_TOL)).collect();
    let best = (0..finalists.len())
        .max_by(|&a, &b| refined[a].total_cmp(&refined[b]).then(b.cmp(&a)))
        .expect("population is nonempty");
    Ok(Optimized {
        distribution: to_distribution(finalists[best]),
        threshold: refined[best],
        bound,
    })
}

fn pick_three(rng: &mut SimRng, n: usize, exclude: usize) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    let mut k = 0;
    while k < 3 {
        let c = rng.random_range(0..n);
        if c != exclude && !out[..k].contains(&c) {
            out[k] = c;
            k += 1;
        }
    }
    out
}
