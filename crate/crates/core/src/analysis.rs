//! Closed-form bounds and cost formulas, plus a direct simulation of the
//! majority-vote selection model.
//!
//! The vote model: each of `g` neighbors reports `K` indices, `K̃` drawn
//! uniformly from the true support `T` and `K - K̃` from its complement. For a
//! fixed `n ∈ T` and `m ∉ T`, the tallies of `n` and `m` are then independent
//! binomials with success probabilities
//!
//! ```text
//! p1 = K̃ / K        p2 = (K - K̃) / (N - K)
//! ```
//!
//! and fusion ranks `n` above `m` with probability
//! `Σ_{i≥1} Bin(g,p1)(i) · Pr[Bin(g,p2) < i]`.

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::Topology;
use crate::seed::{Purpose, Seed};

fn clip_probability(p: f64) -> f64 {
    if (-1e-15..0.0).contains(&p) {
        0.0
    } else if p > 1.0 && p <= 1.0 + 1e-15 {
        1.0
    } else {
        p
    }
}

/// Bernoulli success probabilities of the vote model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteModelParams {
    pub k: usize,
    pub n: usize,
    pub k_tilde: usize,
    pub p1: f64,
    pub p2: f64,
}

impl VoteModelParams {
    pub fn new(k: usize, n: usize, k_tilde: usize) -> Result<Self> {
        if !(1 <= k_tilde && k_tilde <= k && k < n) {
            return Err(Error::BadParams(format!(
                "need 1 <= K̃ <= K < N, got K̃={k_tilde}, K={k}, N={n}"
            )));
        }
        Ok(Self {
            k,
            n,
            k_tilde,
            p1: k_tilde as f64 / k as f64,
            p2: (k - k_tilde) as f64 / (n - k) as f64,
        })
    }
}

/// `(p1, p2)` for the worst case where every neighbor has exactly `K̃` correct indices.
pub fn vote_probs(k: usize, n: usize, k_tilde: usize) -> Result<(f64, f64)> {
    let p = VoteModelParams::new(k, n, k_tilde)?;
    Ok((p.p1, p.p2))
}

/// Hoeffding relaxation `1 - exp(-g (p1 - p2)² / 2)`.
pub fn hoeffding_lower_bound(g: usize, p1: f64, p2: f64) -> Result<f64> {
    if g == 0 {
        return Err(Error::BadParams("g must be at least 1".into()));
    }
    if p1 < p2 {
        return Err(Error::BadParams(format!("need p1 >= p2, got {p1} < {p2}")));
    }
    let gap = p1 - p2;
    Ok(clip_probability(1.0 - (-(g as f64) * gap * gap / 2.0).exp()))
}

/// Neighborhood size that makes the Hoeffding bound reach 0.99: `9.21 / (p1 - p2)²`.
pub fn sufficient_neighbors(k: usize, n: usize, k_tilde: usize) -> Result<f64> {
    if n < k * k {
        return Err(Error::BadParams(format!("need N >= K², got N={n}, K={k}")));
    }
    let (p1, p2) = vote_probs(k, n, k_tilde)?;
    if p1 <= p2 {
        return Err(Error::BadParams(format!("need p1 > p2, got {p1} <= {p2}")));
    }
    Ok(9.21 / (p1 - p2).powi(2))
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `Bin(g, p)` probability mass at `0..=g`, evaluated in log space.
fn binomial_pmf(g: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        let mut v = vec![0.0; g + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; g + 1];
        v[g] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut ln_choose = 0.0;
    (0..=g)
        .map(|i| {
            if i > 0 {
                ln_choose += ((g - i + 1) as f64).ln() - (i as f64).ln();
            }
            (ln_choose + i as f64 * lp + (g - i) as f64 * lq).exp()
        })
        .collect()
}

/// Probability that a `Bin(g, p1)` tally strictly exceeds an independent
/// `Bin(g, p2)` tally.
pub fn exact_vote_lower_bound(g: usize, p1: f64, p2: f64) -> f64 {
    let hit = binomial_pmf(g, p1);
    let miss = binomial_pmf(g, p2);
    let below: Vec<f64> = (0..=g)
        .map(|i| compensated_sum(miss[..=i].iter().copied()))
        .collect();
    clip_probability(compensated_sum((1..=g).map(|i| hit[i] * below[i - 1])).min(1.0))
}

/// Smallest `g <= g_max` with `exact_vote_lower_bound(g, p1, p2) >= target`.
pub fn minimal_neighbors(p1: f64, p2: f64, target: f64, g_max: usize) -> Option<usize> {
    (1..=g_max).find(|&g| exact_vote_lower_bound(g, p1, p2) >= target)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::BadParams(format!("RIP constant must lie in [0, 1), got {delta}")));
    }
    Ok(())
}

/// `√(8δ - 8δ²) / (1 + δ)`: bound on the signal energy missed by the initial selection.
pub fn initial_capture_bound(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok((8.0 * delta - 8.0 * delta * delta).sqrt() / (1.0 + delta))
}

/// `2δ(1 + δ) / (1 - δ)³`: per-iteration contraction of the missed energy.
pub fn contraction_factor(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(2.0 * delta * (1.0 + delta) / (1.0 - delta).powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayKind {
    /// `c · e^{-p(n-1)}`, `p > 0`.
    Exponential,
    /// `c · n^{-p}`, `p > 1`.
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    pub kind: DecayKind,
    pub c: f64,
    pub p: f64,
    pub k: usize,
}

impl DecayParams {
    pub fn exponential(c: f64, p: f64, k: usize) -> Self {
        Self { kind: DecayKind::Exponential, c, p, k }
    }

    pub fn power_law(c: f64, p: f64, k: usize) -> Self {
        Self { kind: DecayKind::PowerLaw, c, p, k }
    }
}

/// Smallest nonzero magnitude over the signal norm for a decaying signal.
/// Independent of `c`.
pub fn alpha_decay(params: DecayParams) -> Result<f64> {
    let DecayParams { kind, c, p, k } = params;
    if k == 0 || c.is_nan() || c <= 0.0 {
        return Err(Error::BadParams(format!("need K >= 1 and c > 0, got K={k}, c={c}")));
    }
    let kf = k as f64;
    match kind {
        DecayKind::Exponential => {
            if p.is_nan() || p <= 0.0 {
                return Err(Error::BadParams(format!("exponential decay needs p > 0, got {p}")));
            }
            Ok((-p * (kf - 1.0)).exp()
                * ((-(-2.0 * p).exp_m1()) / (-(-2.0 * p * kf).exp_m1())).sqrt())
        }
        DecayKind::PowerLaw => {
            if p.is_nan() || p <= 1.0 {
                return Err(Error::BadParams(format!("power-law decay needs p > 1, got {p}")));
            }
            let energy: f64 = (1..=k).map(|i| (i as f64).powf(-2.0 * p)).sum();
            Ok(kf.powf(-p) / energy.sqrt())
        }
    }
}

/// Worst-case iteration count for exact support recovery, at least 1.
pub fn iterations_bound(delta: f64, alpha: f64) -> Result<usize> {
    let contraction = contraction_factor(delta)?;
    if contraction >= 1.0 {
        return Err(Error::BadParams(format!(
            "contraction factor {contraction} >= 1 at δ={delta}; the bound is vacuous"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadParams(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if delta == 0.0 {
        return Ok(1);
    }
    let ratio = (alpha / initial_capture_bound(delta)?).ln() / contraction.ln();
    let steps = ratio.ceil();
    Ok(if steps < 1.0 { 1 } else { steps as usize })
}

/// `(K + K·L + L) · Σ_q(|G_q| - 1)`.
pub fn predicted_messages_dcsp(k: usize, rounds: usize, topology: &Topology) -> u64 {
    let (k, l) = (k as u64, rounds as u64);
    (k + k * l + l) * topology.local_links()
}

/// `N·Σ(|G_q|-1) + K·Q(Q-1) + L·((N + 2K)·Σ(|G_q|-1) + (K + 1)·Q(Q-1))`.
pub fn predicted_messages_gdcsp(n: usize, k: usize, rounds: usize, topology: &Topology) -> u64 {
    let (n, k, l) = (n as u64, k as u64, rounds as u64);
    let local = topology.local_links();
    let global = topology.global_links();
    n * local + k * global + l * ((n + 2 * k) * local + (k + 1) * global)
}

/// Empirical statistics of the vote model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteSimulation {
    pub trials: usize,
    /// Frequency of `α(n) > α(m)`.
    pub probability: f64,
    /// Sample covariance of `β(n)` and `β(m)` over all node draws.
    pub covariance: f64,
}

impl VoteSimulation {
    /// Monte-Carlo standard error of `probability` around `p`.
    pub fn standard_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Draws the combinatorial selection model `trials` times.
///
/// Trials use independent substreams, so the result does not depend on the
/// thread count.
pub fn simulate_vote_model(
    k: usize,
    n: usize,
    k_tilde: usize,
    g: usize,
    trials: usize,
    seed: Seed,
) -> Result<VoteSimulation> {
    VoteModelParams::new(k, n, k_tilde)?;
    if trials == 0 || g == 0 {
        return Err(Error::BadParams("trials and g must be at least 1".into()));
    }
    // WLOG T = 0..K, watched indices n = 0 and m = K.
    let wrong = k - k_tilde;
    let (wins, both, hit_n, hit_m) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.stream(Purpose::VoteModel, t as u64);
            let (mut tally_n, mut tally_m) = (0u64, 0u64);
            let mut both = 0u64;
            for _ in 0..g {
                let beta_n = sample(&mut rng, k, k_tilde).iter().any(|i| i == 0);
                let beta_m = wrong > 0 && sample(&mut rng, n - k, wrong).iter().any(|i| i == 0);
                tally_n += beta_n as u64;
                tally_m += beta_m as u64;
                both += (beta_n && beta_m) as u64;
            }
            ((tally_n > tally_m) as u64, both, tally_n, tally_m)
        })
        .reduce(
            || (0, 0, 0, 0),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3),
        );
    let draws = (trials * g) as f64;
    let mean_n = hit_n as f64 / draws;
    let mean_m = hit_m as f64 / draws;
    Ok(VoteSimulation {
        trials,
        probability: wins as f64 / trials as f64,
        covariance: both as f64 / draws - mean_n * mean_m,
    })
}
