//! Monte-Carlo sweeps and their CSV tables.
//!
//! Every trial draws its problem from `hash(base seed, sweep tag, M, Q, trial)`.
//! The neighborhood size and the algorithm are not part of the key, so
//! different algorithms and different `g` always see the same problems.
//! Trials run in parallel; results are collected in trial order and reduced
//! sequentially, so the output does not depend on the thread count.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{
    alpha_decay, exact_vote_lower_bound, iterations_bound, predicted_messages_dcsp,
    predicted_messages_gdcsp, DecayParams,
};
use crate::dcsp::{default_max_iters, run_dcsp};
use crate::error::{Error, Result};
use crate::gdcsp::{run_gdcsp, run_ssp_centralized};
use crate::network::Topology;
use crate::problem::{JointSparseProblem, ProblemConfig, SignalModel};
use crate::pursuit::subspace_pursuit;
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Dcsp,
    Gdcsp,
    /// Centralized simultaneous subspace pursuit.
    Ssp,
    /// Independent single-node subspace pursuit at every node.
    Sp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dcsp => "dcsp",
            Algorithm::Gdcsp => "gdcsp",
            Algorithm::Ssp => "ssp",
            Algorithm::Sp => "sp",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dcsp" => Ok(Algorithm::Dcsp),
            "gdcsp" => Ok(Algorithm::Gdcsp),
            "ssp" => Ok(Algorithm::Ssp),
            "sp" => Ok(Algorithm::Sp),
            other => Err(Error::config(
                "algorithm",
                format!("unknown algorithm `{other}` (expected dcsp, gdcsp, ssp or sp)"),
            )),
        }
    }
}

/// Inclusive `start:stop:step` range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MRange {
    pub start: usize,
    pub stop: usize,
    pub step: usize,
}

impl MRange {
    pub fn single(m: usize) -> Self {
        Self { start: m, stop: m, step: 1 }
    }

    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.stop).step_by(self.step.max(1)).collect()
    }
}

impl FromStr for MRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("m", format!("`{s}` is not M or start:stop:step"));
        let parts: Vec<&str> = s.split(':').collect();
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let range = match nums.as_slice() {
            [m] => MRange::single(*m),
            [start, stop] => MRange { start: *start, stop: *stop, step: 1 },
            [start, stop, step] => MRange { start: *start, stop: *stop, step: *step },
            _ => return Err(bad()),
        };
        if range.step == 0 || range.start > range.stop {
            return Err(Error::config("m", format!("range `{s}` is empty")));
        }
        Ok(range)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub nodes: usize,
    pub n: usize,
    pub k: usize,
    pub g: usize,
    pub m: MRange,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub seed: Seed,
    pub model: SignalModel,
    /// `None` uses `3K`.
    pub max_iters: Option<usize>,
    /// Record wall-clock time per trial. Off keeps the CSV reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    /// The default success-sweep setup: `Q=10, N=200, K=10, g=5`, 18 dB, 500 trials.
    pub fn new(algorithm: Algorithm, seed: Seed) -> Self {
        Self {
            algorithm,
            nodes: 10,
            n: 200,
            k: 10,
            g: 5,
            m: MRange { start: 20, stop: 60, step: 5 },
            snr_db: Some(18.0),
            trials: 500,
            seed,
            model: SignalModel::IndependentGaussian,
            max_iters: None,
            timing: false,
        }
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters.unwrap_or_else(|| default_max_iters(self.k))
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::config("q", "need at least one node"));
        }
        if self.g == 0 || self.g > self.nodes {
            return Err(Error::config("g", format!("g={} must lie in 1..={}", self.g, self.nodes)));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::config("k", format!("K={} must lie in 1..={}", self.k, self.n)));
        }
        if self.m.start < 2 * self.k {
            return Err(Error::config("m", format!("every M must be at least 2K={}", 2 * self.k)));
        }
        if self.m.values().is_empty() {
            return Err(Error::config("m", "range is empty"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "need at least one trial"));
        }
        if self.max_iters == Some(0) {
            return Err(Error::config("max-iters", "must be at least 1"));
        }
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(Error::config("snr-db", "must be finite or `none`"));
            }
        }
        self.model.validate().map_err(|e| Error::config("model", e.to_string()))
    }

    fn problem_config(&self, nodes: usize, m: usize) -> ProblemConfig {
        ProblemConfig { nodes, m, n: self.n, k: self.k, model: self.model, snr_db: self.snr_db }
    }
}

/// Outcome of one algorithm run on one problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    /// Rounds after initialization (`L`); for `sp`, the largest per-node count.
    pub iterations: usize,
    pub messages: u64,
    /// Closed-form message count at this trial's `L`.
    pub predicted_messages: u64,
    pub runtime_ms: f64,
}

/// Runs `algorithm` on `problem` over `topology`.
pub fn run_algorithm(
    algorithm: Algorithm,
    problem: &JointSparseProblem,
    topology: &Topology,
    max_iters: usize,
) -> Result<TrialOutcome> {
    let started = Instant::now();
    let (k, n) = (problem.k, problem.n);
    let (success, iterations, messages, predicted) = match algorithm {
        Algorithm::Dcsp => {
            let r = run_dcsp(problem, topology, max_iters)?;
            let predicted = predicted_messages_dcsp(k, r.rounds, topology);
            (r.success, r.rounds, r.ledger.report().total(), predicted)
        }
        Algorithm::Gdcsp => {
            let r = run_gdcsp(problem, topology, max_iters)?;
            let predicted = predicted_messages_gdcsp(n, k, r.rounds, topology);
            (r.success, r.rounds, r.ledger.report().total(), predicted)
        }
        Algorithm::Ssp => {
            let r = run_ssp_centralized(problem, max_iters)?;
            let full = Topology::full(problem.nodes())?;
            let predicted = predicted_messages_gdcsp(n, k, r.rounds, &full);
            (r.success, r.rounds, r.ledger.report().total(), predicted)
        }
        Algorithm::Sp => {
            let mut success = true;
            let mut iterations = 0;
            for (y, a) in problem.measurements.iter().zip(&problem.dictionaries) {
                let r = subspace_pursuit(y, a, k, max_iters)?;
                success &= r.support == problem.true_support;
                iterations = iterations.max(r.iterations);
            }
            (success, iterations, 0, 0)
        }
    };
    Ok(TrialOutcome {
        success,
        iterations,
        messages,
        predicted_messages: predicted,
        runtime_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

const SUCCESS_TAG: u64 = 0x5355_4343; // "SUCC"
const SCALING_TAG: u64 = 0x5343_414c; // "SCAL"

/// Problem seed for one trial.
pub fn trial_seed(base: Seed, tag: u64, m: usize, nodes: usize, trial: usize) -> Seed {
    base.derive(&[tag, m as u64, nodes as u64, trial as u64])
}

fn run_trials(
    config: &ExperimentConfig,
    tag: u64,
    nodes: usize,
    m: usize,
    topology: &Topology,
) -> Result<Vec<TrialOutcome>> {
    let problem_config = config.problem_config(nodes, m);
    (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(config.seed, tag, m, nodes, t);
            let problem = JointSparseProblem::generate(&problem_config, seed)?;
            run_algorithm(config.algorithm, &problem, topology, config.max_iters())
        })
        .collect()
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub algorithm: Algorithm,
    pub nodes: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub g: usize,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub successes: usize,
    pub total_iterations: u64,
    pub total_messages: u64,
    pub total_predicted_messages: u64,
    /// Trials whose ledger total equals the closed form at their own `L`.
    pub exact_ledger_trials: usize,
    pub runtime_ms: Option<f64>,
}

impl ExperimentRow {
    fn from_outcomes(config: &ExperimentConfig, nodes: usize, g: usize, m: usize, outcomes: &[TrialOutcome]) -> Self {
        Self {
            algorithm: config.algorithm,
            nodes,
            n: config.n,
            m,
            k: config.k,
            g,
            snr_db: config.snr_db,
            trials: outcomes.len(),
            successes: outcomes.iter().filter(|o| o.success).count(),
            total_iterations: outcomes.iter().map(|o| o.iterations as u64).sum(),
            total_messages: outcomes.iter().map(|o| o.messages).sum(),
            total_predicted_messages: outcomes.iter().map(|o| o.predicted_messages).sum(),
            exact_ledger_trials: outcomes
                .iter()
                .filter(|o| o.messages == o.predicted_messages)
                .count(),
            runtime_ms: config
                .timing
                .then(|| outcomes.iter().map(|o| o.runtime_ms).sum::<f64>() / outcomes.len() as f64),
        }
    }

    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    pub fn mean_iterations(&self) -> f64 {
        self.total_iterations as f64 / self.trials as f64
    }

    pub fn mean_total_messages(&self) -> f64 {
        self.total_messages as f64 / self.trials as f64
    }

    /// Binomial standard error of the success rate.
    pub fn standard_error(&self) -> f64 {
        let p = self.success_rate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Formats with six significant digits, trailing zeros trimmed.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn format_snr(snr: Option<f64>) -> String {
    snr.map_or_else(|| "none".into(), format_sig6)
}

pub const SUCCESS_HEADER: &str = "algorithm,Q,N,M,K,g,snr_db,trials,success_rate,mean_iterations,mean_total_messages,mean_runtime_ms";

/// CSV for a success sweep.
pub fn success_csv(rows: &[ExperimentRow]) -> String {
    let mut out = format!("{SUCCESS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.algorithm.name(),
            r.nodes,
            r.n,
            r.m,
            r.k,
            r.g,
            format_snr(r.snr_db),
            r.trials,
            format_sig6(r.success_rate()),
            format_sig6(r.mean_iterations()),
            format_sig6(r.mean_total_messages()),
            r.runtime_ms.map_or_else(|| "NA".into(), format_sig6),
        );
    }
    out
}

/// Success rate versus `M` at fixed `Q`, `g`.
pub fn run_success_sweep(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    config.validate()?;
    let (topology, g) = match config.algorithm {
        Algorithm::Ssp => (Topology::full(config.nodes)?, config.nodes),
        _ => (Topology::circulant(config.nodes, config.g)?, config.g),
    };
    config
        .m
        .values()
        .into_iter()
        .map(|m| {
            let outcomes = run_trials(config, SUCCESS_TAG, config.nodes, m, &topology)?;
            Ok(ExperimentRow::from_outcomes(config, config.nodes, g, m, &outcomes))
        })
        .collect()
}

/// Neighborhood size used by the scaling sweep: `max(1, Q/2)`.
pub fn scaling_neighborhood(nodes: usize) -> usize {
    (nodes / 2).max(1)
}

pub const SCALING_HEADER: &str = "algorithm,Q,N,M,K,g,snr_db,trials,success_rate,mean_iterations,mean_total_messages,predicted_total_messages,exact_ledger_trials";

/// Closed-form message count at a (possibly fractional) mean `L`.
pub fn predicted_at_mean_rounds(row: &ExperimentRow, topology: &Topology) -> f64 {
    let l = row.mean_iterations();
    let local = topology.local_links() as f64;
    let global = topology.global_links() as f64;
    let (n, k) = (row.n as f64, row.k as f64);
    match row.algorithm {
        Algorithm::Dcsp => (k + k * l + l) * local,
        Algorithm::Gdcsp | Algorithm::Ssp => {
            n * local + k * global + l * ((n + 2.0 * k) * local + (k + 1.0) * global)
        }
        Algorithm::Sp => 0.0,
    }
}

/// Mean iterations and traffic versus network size, with `g = Q/2` and a
/// single `M` (the start of the configured range).
pub fn run_scaling_sweep(config: &ExperimentConfig, node_counts: &[usize]) -> Result<Vec<ExperimentRow>> {
    if node_counts.is_empty() {
        return Err(Error::config("q-list", "need at least one network size"));
    }
    let m = config.m.start;
    node_counts
        .iter()
        .map(|&nodes| {
            let g = scaling_neighborhood(nodes);
            let per_q = ExperimentConfig { nodes, g, m: MRange::single(m), ..config.clone() };
            per_q.validate()?;
            let topology = match config.algorithm {
                Algorithm::Ssp => Topology::full(nodes)?,
                _ => Topology::circulant(nodes, g)?,
            };
            let outcomes = run_trials(&per_q, SCALING_TAG, nodes, m, &topology)?;
            Ok(ExperimentRow::from_outcomes(&per_q, nodes, g, m, &outcomes))
        })
        .collect()
}

pub fn scaling_csv(rows: &[ExperimentRow]) -> Result<String> {
    let mut out = format!("{SCALING_HEADER}\n");
    for r in rows {
        let topology = match r.algorithm {
            Algorithm::Ssp => Topology::full(r.nodes)?,
            _ => Topology::circulant(r.nodes, r.g)?,
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.algorithm.name(),
            r.nodes,
            r.n,
            r.m,
            r.k,
            r.g,
            format_snr(r.snr_db),
            r.trials,
            format_sig6(r.success_rate()),
            format_sig6(r.mean_iterations()),
            format_sig6(r.mean_total_messages()),
            format_sig6(predicted_at_mean_rounds(r, &topology)),
            r.exact_ledger_trials,
        );
    }
    Ok(out)
}

/// `(K̃/K, N/K)` pairs of the vote-bound curves.
pub const VOTE_CURVES: [(f64, f64); 4] = [(0.4, 20.0), (0.4, 10.0), (0.2, 20.0), (0.2, 10.0)];

/// `(p1, p2)` for a curve given as `(K̃/K, N/K)`.
pub fn curve_probabilities(correct_fraction: f64, n_over_k: f64) -> (f64, f64) {
    (correct_fraction, (1.0 - correct_fraction) / (n_over_k - 1.0))
}

/// One point of an analysis curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub series: String,
    pub y: f64,
}

/// Vote-bound curves over `g = 1..=50` and iteration-bound curves over
/// `δ ∈ {0.002, 0.004, .., 0.206}` for `K = 10`.
pub fn analysis_curves() -> Result<Vec<CurvePoint>> {
    let mut points = Vec::new();
    for (frac, ratio) in VOTE_CURVES {
        let (p1, p2) = curve_probabilities(frac, ratio);
        let series = format!("vote_bound(Kt/K={frac};N/K={ratio})");
        for g in 1..=50 {
            points.push(CurvePoint { x: g as f64, series: series.clone(), y: exact_vote_lower_bound(g, p1, p2) });
        }
    }
    let decays = [
        ("iterations(exp;c=1;p=0.3)", DecayParams::exponential(1.0, 0.3, 10)),
        ("iterations(power;c=1;p=1.5)", DecayParams::power_law(1.0, 1.5, 10)),
    ];
    for (series, params) in decays {
        let alpha = alpha_decay(params)?;
        for i in 1..=103 {
            let delta = i as f64 * 0.002;
            points.push(CurvePoint {
                x: delta,
                series: series.to_string(),
                y: iterations_bound(delta, alpha)? as f64,
            });
        }
    }
    Ok(points)
}

pub fn curves_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("x,series,y\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", format_sig6(p.x), p.series, format_sig6(p.y));
    }
    out
}
