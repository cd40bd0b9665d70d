use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use csa_core::analysis::{bound_root, threshold};
use csa_core::codes::CodeEnsemble;
use csa_core::harness::{mean_ci, parse_load_range, report_csv, run_sweep, sig6, Scheme, SweepSpec};
use csa_core::optimize::{optimize_distribution, OptimizerConfig};
use csa_core::variants::{
    run_convolutional, run_frameless, run_fsa_upgrade, ConvolutionalConfig, FramelessConfig, FsaUpgradeConfig,
    UpgradeMode,
};
use csa_core::{DegreeDistribution, SimRng};

type CliResult<T> = Result<T, String>;

#[derive(Parser)]
#[command(name = "csa", version, about = "Coded slotted ALOHA simulator and analysis tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Throughput/PLR sweep of repetition CSA.
    #[command(args_override_self = true)]
    Simulate {
        /// Degree distribution, e.g. `2:0.5,3:0.5`.
        #[arg(long)]
        dist: DegreeDistribution,
        #[arg(long)]
        frame: usize,
        /// `G0:G1:step` or a single load.
        #[arg(long)]
        load: String,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        population: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep of generalized CSA over a code ensemble file.
    #[command(args_override_self = true)]
    SimulateCoded {
        #[arg(long)]
        ensemble: PathBuf,
        /// Frame length in packet slots; the graph has k times as many segment slots.
        #[arg(long)]
        frame: usize,
        #[arg(long)]
        load: String,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        population: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Density-evolution threshold of a degree distribution.
    #[command(args_override_self = true)]
    Threshold {
        #[arg(long)]
        dist: DegreeDistribution,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Upper bound on the threshold at rate R.
    #[command(args_override_self = true)]
    Bound {
        #[arg(long)]
        rate: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Search for a distribution with the largest threshold at rate R.
    #[command(args_override_self = true)]
    Optimize {
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        max_degree: usize,
        #[arg(long)]
        gens: Option<usize>,
        #[arg(long)]
        pop: Option<usize>,
        #[arg(long)]
        mutation: Option<f64>,
        #[arg(long)]
        crossover: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Frameless ALOHA with receiver-side termination.
    #[command(args_override_self = true)]
    Frameless {
        #[arg(long)]
        users: usize,
        #[arg(long, default_value_t = csa_core::variants::DEFAULT_BETA)]
        beta: f64,
        #[arg(long, default_value_t = csa_core::variants::DEFAULT_TERM_FRACTION)]
        term_fraction: f64,
        #[arg(long)]
        term_throughput: Option<f64>,
        #[arg(long)]
        max_slots: Option<usize>,
        #[arg(long)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Convolutional CSA across coupled contention periods.
    #[command(args_override_self = true)]
    Convolutional {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        frame: usize,
        #[arg(long)]
        load: f64,
        #[arg(long)]
        periods: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        population: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Multi-frame upgrade of framed slotted ALOHA.
    #[command(args_override_self = true)]
    FsaUpgrade {
        #[arg(long)]
        mode: UpgradeMode,
        #[arg(long)]
        frame: usize,
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        users: usize,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        #[arg(long)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::SimulateCoded { common, .. }
            | Command::Threshold { common, .. }
            | Command::Bound { common, .. }
            | Command::Optimize { common, .. }
            | Command::Frameless { common, .. }
            | Command::Convolutional { common, .. }
            | Command::FsaUpgrade { common, .. } => common,
        }
    }
}

/// Replaces `--config FILE` by the `--key value` pairs it lists, placed
/// right after the subcommand so that explicit flags take precedence.
fn splice_config(args: Vec<String>) -> CliResult<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut files = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            files.push(it.next().ok_or("--config needs a file")?);
        } else if let Some(f) = a.strip_prefix("--config=") {
            files.push(f.to_string());
        } else {
            rest.push(a);
        }
    }
    let mut spliced = Vec::new();
    for file in files {
        let text = std::fs::read_to_string(&file).map_err(|e| format!("{file}: {e}"))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{file}:{}: expected key=value", n + 1))?;
            spliced.push(format!("--{}", key.trim().replace('_', "-")));
            spliced.push(value.trim().to_string());
        }
    }
    let at = rest.len().min(2);
    rest.splice(at..at, spliced);
    Ok(rest)
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn sweep(scheme: Scheme, frame: usize, load: &str, trials: usize, population: Option<usize>, seed: u64) -> CliResult<String> {
    let loads = parse_load_range(load).map_err(|e| e.to_string())?;
    let mut spec = SweepSpec::new(scheme, loads, frame, trials, seed);
    spec.population = population;
    let report = run_sweep(&spec).map_err(|e| e.to_string())?;
    Ok(report_csv(&report))
}

fn check_trials(trials: usize) -> CliResult<()> {
    if trials == 0 {
        return Err("trials must be at least 1".into());
    }
    Ok(())
}

fn frameless(cfg: &FramelessConfig, trials: usize, seed: u64) -> CliResult<String> {
    check_trials(trials)?;
    let runs = (0..trials)
        .into_par_iter()
        .map(|t| run_frameless(cfg, &mut SimRng::for_trial(seed, 0, t as u64)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let n = trials as f64;
    let longest = runs.iter().map(|r| r.slots.len()).max().unwrap_or(0);
    let mut out = String::from("slot,trials,resolved_fraction,inst_throughput,mean_delay,terminated_at\n");
    // Finished trials keep contributing their final state.
    for t in 0..longest {
        let running = runs.iter().filter(|r| r.slots.len() > t).count();
        let at = |r: &csa_core::variants::FramelessRun| r.slots[t.min(r.slots.len() - 1)];
        let frac = runs.iter().map(|r| at(r).resolved_fraction).sum::<f64>() / n;
        let thr = runs.iter().map(|r| at(r).inst_throughput).sum::<f64>() / n;
        let delay = runs.iter().map(|r| at(r).mean_delay).sum::<f64>() / n;
        let _ = writeln!(out, "{},{running},{},{},{},", t + 1, sig6(frac), sig6(thr), sig6(delay));
    }
    let frac = runs.iter().map(|r| 1.0 - r.metrics.plr).sum::<f64>() / n;
    let thr = runs.iter().map(|r| r.metrics.throughput).sum::<f64>() / n;
    let delays: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.recovery_delay.iter().flatten().map(|&d| d as f64))
        .collect();
    let delay = if delays.is_empty() { 0.0 } else { delays.iter().sum::<f64>() / delays.len() as f64 };
    let end = runs.iter().map(|r| r.terminated_at as f64).sum::<f64>() / n;
    let _ = writeln!(out, "summary,{trials},{},{},{},{}", sig6(frac), sig6(thr), sig6(delay), sig6(end));
    Ok(out)
}

fn convolutional(cfg: &ConvolutionalConfig, trials: usize, seed: u64) -> CliResult<String> {
    check_trials(trials)?;
    cfg.validate().map_err(|e| e.to_string())?;
    let runs = (0..trials)
        .into_par_iter()
        .map(|t| run_convolutional(cfg, &mut SimRng::for_trial(seed, 0, t as u64)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let n = trials as f64;
    let mut out = String::from("period,trials,physical_load,physical_load_ci95,arrivals,plr,throughput,steady_plr\n");
    for p in 0..runs[0].periods.len() {
        let loads: Vec<f64> = runs.iter().map(|r| r.periods[p].physical_load).collect();
        let (load, ci) = mean_ci(&loads);
        let arrivals = runs.iter().map(|r| r.periods[p].arrivals as f64).sum::<f64>() / n;
        let plr = runs.iter().map(|r| r.periods[p].plr).sum::<f64>() / n;
        let thr = runs.iter().map(|r| r.periods[p].throughput).sum::<f64>() / n;
        let _ = writeln!(
            out,
            "{},{trials},{},{},{},{},{},",
            p + 1,
            sig6(load),
            sig6(ci),
            sig6(arrivals),
            sig6(plr),
            sig6(thr)
        );
    }
    let periods = runs[0].periods.len() as f64;
    let loads: Vec<f64> = runs
        .iter()
        .map(|r| r.periods.iter().map(|p| p.physical_load).sum::<f64>() / periods)
        .collect();
    let (load, ci) = mean_ci(&loads);
    let arrivals = runs
        .iter()
        .map(|r| r.periods.iter().map(|p| p.arrivals as f64).sum::<f64>())
        .sum::<f64>()
        / (n * cfg.num_periods as f64);
    let plr = runs.iter().map(|r| r.metrics.plr).sum::<f64>() / n;
    let thr = runs.iter().map(|r| r.metrics.throughput).sum::<f64>() / n;
    let steady = runs.iter().map(|r| r.interior_plr(cfg.d, cfg.num_periods)).sum::<f64>() / n;
    let _ = writeln!(
        out,
        "summary,{trials},{},{},{},{},{},{}",
        sig6(load),
        sig6(ci),
        sig6(arrivals),
        sig6(plr),
        sig6(thr),
        sig6(steady)
    );
    Ok(out)
}

fn fsa_upgrade(cfg: &FsaUpgradeConfig, trials: usize, seed: u64) -> CliResult<String> {
    check_trials(trials)?;
    let runs = (0..trials)
        .into_par_iter()
        .map(|t| run_fsa_upgrade(cfg, &mut SimRng::for_trial(seed, 0, t as u64)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let n = trials as f64;
    let users = cfg.n_active.max(1) as f64;
    let mut out = String::from("frame,trials,resolved,throughput,plr,mean_delay\n");
    let mut cumulative = vec![0usize; runs.len()];
    for f in 0..cfg.num_frames {
        for (c, r) in cumulative.iter_mut().zip(&runs) {
            *c += r.per_frame_resolved[f];
        }
        let resolved = runs.iter().map(|r| r.per_frame_resolved[f] as f64).sum::<f64>() / n;
        let plr = if cfg.n_active == 0 {
            0.0
        } else {
            cumulative.iter().map(|&c| 1.0 - c as f64 / users).sum::<f64>() / n
        };
        let _ = writeln!(
            out,
            "{},{trials},{},{},{},",
            f + 1,
            sig6(resolved),
            sig6(resolved / cfg.num_slots as f64),
            sig6(plr)
        );
    }
    let total = cumulative.iter().sum::<usize>() as f64 / n;
    let thr = runs.iter().map(|r| r.metrics.throughput).sum::<f64>() / n;
    let plr = runs.iter().map(|r| r.metrics.plr).sum::<f64>() / n;
    let delay_sum: f64 = runs
        .iter()
        .map(|r| r.metrics.mean_delay * r.resolved_frame.iter().flatten().count() as f64)
        .sum();
    let delay = if total > 0.0 { delay_sum / (total * n) } else { 0.0 };
    let _ = writeln!(out, "summary,{trials},{},{},{},{}", sig6(total), sig6(thr), sig6(plr), sig6(delay));
    Ok(out)
}

fn execute(command: &Command) -> CliResult<String> {
    let seed = command.common().seed;
    match command {
        Command::Simulate { dist, frame, load, trials, population, .. } => {
            sweep(Scheme::Repetition(dist.clone()), *frame, load, *trials, *population, seed)
        }
        Command::SimulateCoded { ensemble, frame, load, trials, population, .. } => {
            let text = std::fs::read_to_string(ensemble).map_err(|e| format!("{}: {e}", ensemble.display()))?;
            let ens = CodeEnsemble::parse(&text).map_err(|e| format!("{}: {e}", ensemble.display()))?;
            sweep(Scheme::Coded(ens), *frame, load, *trials, *population, seed)
        }
        Command::Threshold { dist, tol, .. } => {
            if !(*tol > 0.0) {
                return Err(format!("tolerance {tol} must be positive"));
            }
            let rate = dist.rate();
            let bound = if rate < 1.0 { sig6(bound_root(rate).map_err(|e| e.to_string())?) } else { String::new() };
            Ok(format!(
                "distribution,rate,threshold,bound\n{},{},{},{bound}\n",
                csv_quote(&dist.to_string()),
                sig6(rate),
                sig6(threshold(dist, *tol))
            ))
        }
        Command::Bound { rate, .. } => {
            let b = bound_root(*rate).map_err(|e| e.to_string())?;
            Ok(format!("rate,bound\n{},{}\n", sig6(*rate), sig6(b)))
        }
        Command::Optimize { rate, max_degree, gens, pop, mutation, crossover, .. } => {
            let mut cfg = OptimizerConfig::new(*rate, *max_degree);
            cfg.seed = seed;
            if let Some(g) = gens {
                cfg.generations = *g;
            }
            if let Some(p) = pop {
                cfg.population = *p;
            }
            if let Some(f) = mutation {
                cfg.mutation = *f;
            }
            if let Some(c) = crossover {
                cfg.crossover = *c;
            }
            let o = optimize_distribution(&cfg).map_err(|e| e.to_string())?;
            Ok(format!(
                "distribution,rate,threshold,bound\n{},{},{},{}\n",
                csv_quote(&o.distribution.to_string()),
                sig6(o.distribution.rate()),
                sig6(o.threshold),
                sig6(o.bound)
            ))
        }
        Command::Frameless { users, beta, term_fraction, term_throughput, max_slots, trials, .. } => {
            let mut cfg = FramelessConfig::new(*users);
            cfg.beta = *beta;
            cfg.term_fraction = Some(*term_fraction);
            cfg.term_throughput = *term_throughput;
            if let Some(m) = max_slots {
                cfg.max_slots = *m;
            }
            cfg.validate().map_err(|e| e.to_string())?;
            frameless(&cfg, *trials, seed)
        }
        Command::Convolutional { d, frame, load, periods, trials, population, .. } => {
            let mut cfg = ConvolutionalConfig::from_load(*d, *frame, *load, *periods);
            if let Some(n) = population {
                cfg.population = *n;
                cfg.activation_probability = load * *frame as f64 / *n as f64;
            }
            convolutional(&cfg, *trials, seed)
        }
        Command::FsaUpgrade { mode, frame, frames, users, replicas, trials, .. } => {
            let cfg = FsaUpgradeConfig {
                mode: *mode,
                num_slots: *frame,
                num_frames: *frames,
                n_active: *users,
                replicas_per_frame: *replicas,
            };
            cfg.validate().map_err(|e| e.to_string())?;
            fsa_upgrade(&cfg, *trials, seed)
        }
    }
}

fn run() -> CliResult<()> {
    let args = splice_config(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            return Err(first.trim_start_matches("error: ").to_string());
        }
    };
    let common = cli.command.common();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| e.to_string())?;
    let csv = pool.install(|| execute(&cli.command))?;
    match &common.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(csv.as_bytes()).map_err(|e| format!("stdout: {e}")),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("csa: error: {msg}");
            ExitCode::from(2)
        }
    }
}
