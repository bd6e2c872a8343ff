//! Random joint-sparse recovery instances.
//!
//! All `Q` nodes observe `y_q = A_q x_q + w_q` where every `x_q` is supported
//! on the same `K`-set `T`. Dictionaries are i.i.d. standard normal and are
//! not rescaled.

use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::pursuit::{DenseMatrix, RealVector};
use crate::seed::{Purpose, Seed};
use crate::support::SupportSet;

/// How the nonzero coefficients of each node's signal are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalModel {
    /// Independent standard normal coefficients at every node.
    IndependentGaussian,
    /// One standard normal draw shared by all nodes.
    IdenticalGaussian,
    /// Magnitudes `c * exp(-p (n - 1))`, randomly ordered per node with random signs.
    ExponentialDecay { c: f64, p: f64 },
    /// Magnitudes `c * n^(-p)` with `p > 1`, randomly ordered per node with random signs.
    PowerLawDecay { c: f64, p: f64 },
}

impl SignalModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SignalModel::ExponentialDecay { c, p } if !(c > 0.0 && p > 0.0) => Err(
                Error::BadParams(format!("exponential decay needs c > 0, p > 0 (got {c}, {p})")),
            ),
            SignalModel::PowerLawDecay { c, p } if !(c > 0.0 && p > 1.0) => Err(
                Error::BadParams(format!("power-law decay needs c > 0, p > 1 (got {c}, {p})")),
            ),
            _ => Ok(()),
        }
    }

    /// Sorted (descending) magnitudes for the decay models.
    pub fn decay_magnitudes(&self, k: usize) -> Option<Vec<f64>> {
        match *self {
            SignalModel::ExponentialDecay { c, p } => {
                Some((0..k).map(|n| c * (-p * n as f64).exp()).collect())
            }
            SignalModel::PowerLawDecay { c, p } => {
                Some((1..=k).map(|n| c * (n as f64).powf(-p)).collect())
            }
            _ => None,
        }
    }
}

/// Parses `gaussian`, `identical`, `exp:C:P` or `power:C:P`.
impl std::str::FromStr for SignalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("model", format!("`{s}` is not gaussian, identical, exp:C:P or power:C:P"));
        let parts: Vec<&str> = s.split(':').collect();
        let model = match parts.as_slice() {
            ["gaussian"] => SignalModel::IndependentGaussian,
            ["identical"] => SignalModel::IdenticalGaussian,
            [kind @ ("exp" | "power"), c, p] => {
                let c: f64 = c.parse().map_err(|_| bad())?;
                let p: f64 = p.parse().map_err(|_| bad())?;
                if *kind == "exp" {
                    SignalModel::ExponentialDecay { c, p }
                } else {
                    SignalModel::PowerLawDecay { c, p }
                }
            }
            _ => return Err(bad()),
        };
        model.validate().map_err(|e| Error::config("model", e.to_string()))?;
        Ok(model)
    }
}

/// Dimensions and signal settings of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConfig {
    pub nodes: usize,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub model: SignalModel,
    /// `None` means noise-free.
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSparseProblem {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub dictionaries: Vec<DenseMatrix>,
    pub signals: Vec<RealVector>,
    pub measurements: Vec<RealVector>,
    pub true_support: SupportSet,
    pub noise_variance: f64,
}

/// Uniformly random `k`-subset of `0..n`.
pub fn draw_support(n: usize, k: usize, seed: Seed) -> Result<SupportSet> {
    if k == 0 || k > n {
        return Err(Error::BadK { k, max: n });
    }
    let mut rng = seed.stream(Purpose::Support, 0);
    SupportSet::new(sample(&mut rng, n, k).into_vec(), n)
}

/// `nodes` independent `m x n` standard normal matrices.
pub fn generate_dictionaries(nodes: usize, m: usize, n: usize, seed: Seed) -> Vec<DenseMatrix> {
    (0..nodes)
        .map(|q| {
            let mut rng = seed.stream(Purpose::Dictionary, q as u64);
            DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
        })
        .collect()
}

fn place_on_support(support: &SupportSet, n: usize, values: &[f64]) -> RealVector {
    let mut x = RealVector::zeros(n);
    for (idx, &v) in support.iter().zip(values) {
        x[idx] = v;
    }
    x
}

/// Signals supported on `support` drawn according to `model`.
pub fn generate_signals(
    model: SignalModel,
    support: &SupportSet,
    nodes: usize,
    n: usize,
    seed: Seed,
) -> Result<Vec<RealVector>> {
    model.validate()?;
    if support.is_empty() || support.universe() > n || support.iter().any(|i| i >= n) {
        return Err(Error::BadSupport(format!(
            "support {support} does not fit signal length {n}"
        )));
    }
    let k = support.len();
    let signals = match model {
        SignalModel::IndependentGaussian => (0..nodes)
            .map(|q| {
                let mut rng = seed.stream(Purpose::Signal, q as u64);
                let vals: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                place_on_support(support, n, &vals)
            })
            .collect(),
        SignalModel::IdenticalGaussian => {
            let mut rng = seed.stream(Purpose::Signal, 0);
            let vals: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            vec![place_on_support(support, n, &vals); nodes]
        }
        SignalModel::ExponentialDecay { .. } | SignalModel::PowerLawDecay { .. } => {
            let magnitudes = model.decay_magnitudes(k).expect("decay model");
            (0..nodes)
                .map(|q| {
                    let mut rng = seed.stream(Purpose::Signal, q as u64);
                    let mut vals = magnitudes.clone();
                    vals.shuffle(&mut rng);
                    for v in vals.iter_mut() {
                        if rng.random::<bool>() {
                            *v = -*v;
                        }
                    }
                    place_on_support(support, n, &vals)
                })
                .collect()
        }
    };
    Ok(signals)
}

/// Noise variance implied by an SNR in dB, `Σ‖x_q‖² / (Q N 10^(snr/10))`.
pub fn noise_variance_for(signals: &[RealVector], snr_db: Option<f64>) -> f64 {
    let Some(snr_db) = snr_db else { return 0.0 };
    if signals.is_empty() {
        return 0.0;
    }
    let energy: f64 = signals.iter().map(|x| x.norm_squared()).sum();
    let n = signals[0].len() as f64;
    energy / (signals.len() as f64 * n * 10f64.powf(snr_db / 10.0))
}

/// Adds i.i.d. `N(0, σ²)` noise to each clean measurement, returning the noisy
/// measurements and `σ²`.
pub fn apply_noise(
    clean: &[RealVector],
    signals: &[RealVector],
    snr_db: Option<f64>,
    seed: Seed,
) -> (Vec<RealVector>, f64) {
    let variance = noise_variance_for(signals, snr_db);
    if variance == 0.0 {
        return (clean.to_vec(), 0.0);
    }
    let dist = Normal::new(0.0, variance.sqrt()).expect("finite variance");
    let noisy = clean
        .iter()
        .enumerate()
        .map(|(q, y)| {
            let mut rng = seed.stream(Purpose::Noise, q as u64);
            y.map(|v| v + dist.sample(&mut rng))
        })
        .collect();
    (noisy, variance)
}

impl JointSparseProblem {
    /// Draws a full instance. Identical `(config, seed)` give bit-identical problems.
    pub fn generate(config: &ProblemConfig, seed: Seed) -> Result<Self> {
        let ProblemConfig {
            nodes, m, n, k, model, snr_db,
        } = *config;
        if nodes == 0 || m == 0 || n == 0 {
            return Err(Error::BadDimensions("Q, M and N must be positive".into()));
        }
        crate::pursuit::check_dimensions(m, n, k)?;
        if let Some(s) = snr_db {
            if !s.is_finite() {
                return Err(Error::BadParams(format!("snr_db must be finite, got {s}")));
            }
        }
        let support = draw_support(n, k, seed)?;
        let dictionaries = generate_dictionaries(nodes, m, n, seed);
        let signals = generate_signals(model, &support, nodes, n, seed)?;
        let clean: Vec<RealVector> = dictionaries
            .iter()
            .zip(&signals)
            .map(|(a, x)| a * x)
            .collect();
        let (measurements, noise_variance) = apply_noise(&clean, &signals, snr_db, seed);
        Ok(Self {
            m,
            n,
            k,
            dictionaries,
            signals,
            measurements,
            true_support: support,
            noise_variance,
        })
    }

    /// Noise-free instance from explicit dictionaries and signals.
    pub fn noise_free(
        dictionaries: Vec<DenseMatrix>,
        signals: Vec<RealVector>,
        true_support: SupportSet,
    ) -> Result<Self> {
        let measurements = dictionaries.iter().zip(&signals).map(|(a, x)| a * x).collect();
        let (m, n) = dictionaries
            .first()
            .map(|a| a.shape())
            .ok_or_else(|| Error::BadDimensions("at least one node required".into()))?;
        let problem = Self {
            m,
            n,
            k: true_support.len(),
            dictionaries,
            signals,
            measurements,
            true_support,
            noise_variance: 0.0,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn nodes(&self) -> usize {
        self.dictionaries.len()
    }

    /// Checks shapes, the shared support and `M >= 2K`.
    pub fn validate(&self) -> Result<()> {
        let q = self.nodes();
        if q == 0 || self.signals.len() != q || self.measurements.len() != q {
            return Err(Error::BadDimensions("per-node lists must have equal, nonzero length".into()));
        }
        crate::pursuit::check_dimensions(self.m, self.n, self.k)?;
        if self.true_support.len() != self.k {
            return Err(Error::BadSupport(format!(
                "support has {} entries, K = {}",
                self.true_support.len(),
                self.k
            )));
        }
        for node in 0..q {
            if self.dictionaries[node].shape() != (self.m, self.n)
                || self.signals[node].len() != self.n
                || self.measurements[node].len() != self.m
            {
                return Err(Error::BadDimensions(format!("node {} has mismatched shapes", node + 1)));
            }
            if let Some(i) = (0..self.n)
                .find(|&i| self.signals[node][i] != 0.0 && !self.true_support.contains(i))
            {
                return Err(Error::BadSupport(format!(
                    "node {} has a nonzero at {} outside the support",
                    node + 1,
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Writes the plain-text dump described in the crate docs.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        fn row<W: Write>(out: &mut W, vals: impl Iterator<Item = f64>) -> std::io::Result<()> {
            let line: Vec<String> = vals.map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" "))
        }
        writeln!(out, "Q M N K sigma2")?;
        writeln!(out, "{} {} {} {} {}", self.nodes(), self.m, self.n, self.k, self.noise_variance)?;
        let labels: Vec<String> = self.true_support.to_one_based().iter().map(|i| i.to_string()).collect();
        writeln!(out, "{}", labels.join(" "))?;
        for q in 0..self.nodes() {
            let a = &self.dictionaries[q];
            for r in 0..self.m {
                row(&mut out, a.row(r).iter().copied())?;
            }
            row(&mut out, self.signals[q].iter().copied())?;
            row(&mut out, self.measurements[q].iter().copied())?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next_line = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(Error::Parse { line: i + 1, message: e.to_string() }),
                None => Err(Error::Parse { line: 0, message: format!("unexpected end of file, expected {what}") }),
            }
        };
        fn parse_all<T: std::str::FromStr>(line: usize, text: &str, expect: usize) -> Result<Vec<T>> {
            let vals: Vec<T> = text
                .split_whitespace()
                .map(|t| t.parse::<T>().map_err(|_| Error::Parse { line, message: format!("bad value `{t}`") }))
                .collect::<Result<_>>()?;
            if vals.len() != expect {
                return Err(Error::Parse { line, message: format!("expected {expect} values, found {}", vals.len()) });
            }
            Ok(vals)
        }

        let (ln, header) = next_line("header")?;
        if header.split_whitespace().collect::<Vec<_>>() != ["Q", "M", "N", "K", "sigma2"] {
            return Err(Error::Parse { line: ln, message: "missing `Q M N K sigma2` header".into() });
        }
        let (ln, dims) = next_line("dimensions")?;
        let parts: Vec<&str> = dims.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(Error::Parse { line: ln, message: "expected 5 header values".into() });
        }
        let ints = parse_all::<usize>(ln, &parts[..4].join(" "), 4)?;
        let (q, m, n, k) = (ints[0], ints[1], ints[2], ints[3]);
        let noise_variance: f64 = parts[4]
            .parse()
            .map_err(|_| Error::Parse { line: ln, message: "bad sigma2".into() })?;
        let (ln, sup) = next_line("support")?;
        let labels = parse_all::<usize>(ln, &sup, k)?;
        let true_support = SupportSet::from_one_based(&labels, n)?;

        let mut dictionaries = Vec::with_capacity(q);
        let mut signals = Vec::with_capacity(q);
        let mut measurements = Vec::with_capacity(q);
        for _ in 0..q {
            let mut a = DenseMatrix::zeros(m, n);
            for r in 0..m {
                let (ln, text) = next_line("dictionary row")?;
                for (c, v) in parse_all::<f64>(ln, &text, n)?.into_iter().enumerate() {
                    a[(r, c)] = v;
                }
            }
            let (ln, text) = next_line("signal")?;
            signals.push(RealVector::from_vec(parse_all(ln, &text, n)?));
            let (ln, text) = next_line("measurement")?;
            measurements.push(RealVector::from_vec(parse_all(ln, &text, m)?));
            dictionaries.push(a);
        }
        let problem = Self {
            m,
            n,
            k,
            dictionaries,
            signals,
            measurements,
            true_support,
            noise_variance,
        };
        problem.validate()?;
        Ok(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config(model: SignalModel, snr_db: Option<f64>) -> ProblemConfig {
        ProblemConfig { nodes: 4, m: 12, n: 30, k: 3, model, snr_db }
    }

    #[test]
    fn full_support_when_k_equals_n() {
        let s = draw_support(5, 5, Seed(3)).unwrap();
        assert_eq!(s.indices(), &[0, 1, 2, 3, 4]);
        assert!(matches!(draw_support(5, 6, Seed(3)), Err(Error::BadK { .. })));
        assert!(matches!(draw_support(5, 0, Seed(3)), Err(Error::BadK { .. })));
    }

    #[test]
    fn support_draw_is_deterministic() {
        let a = draw_support(200, 10, Seed(99)).unwrap();
        assert_eq!(a, draw_support(200, 10, Seed(99)).unwrap());
        assert_eq!(a.len(), 10);
    }

    #[test]
    fn support_inclusion_frequency_matches_k_over_n() {
        let draws = 100_000u64;
        let hits = (0..draws)
            .filter(|&t| draw_support(20, 5, Seed(t)).unwrap().contains(0))
            .count();
        let freq = hits as f64 / draws as f64;
        assert!((freq - 0.25).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn dictionary_entries_are_standard_normal() {
        let mats = generate_dictionaries(4, 250, 1000, Seed(1));
        let entries: Vec<f64> = mats.iter().flat_map(|m| m.iter().copied()).collect();
        assert_eq!(entries.len(), 1_000_000);
        let mean = entries.iter().sum::<f64>() / entries.len() as f64;
        let var = entries.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / entries.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
        assert_ne!(mats[0], mats[1]);
        assert_eq!(generate_dictionaries(2, 3, 4, Seed(1))[1], generate_dictionaries(3, 3, 4, Seed(1))[1]);
    }

    #[test]
    fn identical_model_copies_one_draw() {
        let t = SupportSet::new(vec![1, 4, 7], 10).unwrap();
        let xs = generate_signals(SignalModel::IdenticalGaussian, &t, 5, 10, Seed(2)).unwrap();
        assert!(xs.windows(2).all(|w| w[0] == w[1]));
        let xs = generate_signals(SignalModel::IndependentGaussian, &t, 5, 10, Seed(2)).unwrap();
        assert_ne!(xs[0], xs[1]);
        for x in &xs {
            for i in 0..10 {
                assert_eq!(x[i] != 0.0, t.contains(i));
            }
        }
    }

    #[test]
    fn exponential_decay_magnitudes() {
        let t = SupportSet::first_k(10, 40);
        let model = SignalModel::ExponentialDecay { c: 1.0, p: 0.3 };
        let xs = generate_signals(model, &t, 3, 40, Seed(8)).unwrap();
        for x in &xs {
            let mut mags: Vec<f64> = t.iter().map(|i| x[i].abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            for (n, m) in mags.iter().enumerate() {
                assert_abs_diff_eq!(*m, (-0.3 * n as f64).exp(), epsilon = 1e-15);
            }
        }
        assert_ne!(xs[0], xs[1]);
    }

    #[test]
    fn power_law_min_over_norm() {
        let t = SupportSet::first_k(10, 40);
        let model = SignalModel::PowerLawDecay { c: 1.0, p: 1.5 };
        let x = &generate_signals(model, &t, 1, 40, Seed(8)).unwrap()[0];
        let min = t.iter().map(|i| x[i].abs()).fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(min / x.norm(), 0.028897, epsilon = 1e-5);
    }

    #[test]
    fn rejects_bad_decay_params() {
        let t = SupportSet::first_k(2, 4);
        let bad = SignalModel::PowerLawDecay { c: 1.0, p: 1.0 };
        assert!(matches!(generate_signals(bad, &t, 1, 4, Seed(0)), Err(Error::BadParams(_))));
        let t = SupportSet::first_k(2, 8);
        assert!(matches!(
            generate_signals(SignalModel::IdenticalGaussian, &t, 1, 4, Seed(0)),
            Err(Error::BadSupport(_))
        ));
    }

    #[test]
    fn snr_noise_variance() {
        let x = RealVector::from_vec(vec![0.0, 3.0, 4.0, 0.0]);
        assert_abs_diff_eq!(noise_variance_for(std::slice::from_ref(&x), Some(10.0)), 0.625, epsilon = 1e-15);
        let clean = vec![RealVector::from_vec(vec![1.0, 2.0])];
        let (y, var) = apply_noise(&clean, &[x], None, Seed(0));
        assert_eq!(var, 0.0);
        assert_eq!(y, clean);
    }

    #[test]
    fn empirical_noise_variance() {
        let cfg = ProblemConfig { nodes: 2, m: 10, n: 20, k: 2, model: SignalModel::IndependentGaussian, snr_db: Some(5.0) };
        let mut ratio_sum = 0.0;
        let trials = 100_000 / 20;
        for t in 0..trials {
            let p = JointSparseProblem::generate(&cfg, Seed(t)).unwrap();
            let mut ss = 0.0;
            for q in 0..2 {
                let w = &p.measurements[q] - &p.dictionaries[q] * &p.signals[q];
                ss += w.norm_squared();
            }
            ratio_sum += ss / (20.0 * p.noise_variance);
        }
        let ratio = ratio_sum / trials as f64;
        assert!((ratio - 1.0).abs() < 0.03, "ratio {ratio}");
    }

    #[test]
    fn generation_is_deterministic_and_consistent() {
        let cfg = config(SignalModel::IndependentGaussian, None);
        let p = JointSparseProblem::generate(&cfg, Seed(42)).unwrap();
        assert_eq!(p, JointSparseProblem::generate(&cfg, Seed(42)).unwrap());
        p.validate().unwrap();
        for q in 0..p.nodes() {
            assert_eq!(p.measurements[q], &p.dictionaries[q] * &p.signals[q]);
        }
        let bad = ProblemConfig { m: 5, ..cfg };
        assert!(matches!(JointSparseProblem::generate(&bad, Seed(1)), Err(Error::BadDimensions(_))));
    }

    #[test]
    fn dump_round_trips() {
        let cfg = config(SignalModel::IndependentGaussian, Some(12.0));
        let p = JointSparseProblem::generate(&cfg, Seed(5)).unwrap();
        let mut buf = Vec::new();
        p.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("Q M N K sigma2\n4 12 30 3 "));
        let back = JointSparseProblem::read_dump(&buf[..]).unwrap();
        assert_eq!(back, p);
        assert!(JointSparseProblem::read_dump(&b"Q M N K\n"[..]).is_err());
    }

    #[test]
    fn model_parsing() {
        assert_eq!("gaussian".parse::<SignalModel>().unwrap(), SignalModel::IndependentGaussian);
        assert_eq!(
            "power:1:1.5".parse::<SignalModel>().unwrap(),
            SignalModel::PowerLawDecay { c: 1.0, p: 1.5 }
        );
        assert!("power:1:0.5".parse::<SignalModel>().is_err());
        assert!("exp:1".parse::<SignalModel>().is_err());
    }
}
