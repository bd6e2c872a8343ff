//! Brute-force cross-checks.
//!
//! The exhaustive search solves every candidate least-squares problem through
//! the normal equations and a Cholesky factorization, a route that shares no
//! code with the QR-based projections used by the algorithms.

use crate::analysis::predicted_messages_dcsp;
use crate::dcsp::run_dcsp;
use crate::gdcsp::{run_gdcsp, run_ssp_centralized};
use crate::network::Topology;
use crate::problem::{JointSparseProblem, ProblemConfig, SignalModel};
use crate::pursuit::{subspace_pursuit, DenseMatrix, RealVector};
use crate::seed::Seed;

/// Residual norm of `y` against `a_sub` through the normal equations.
/// `None` when the Gram matrix is not positive definite.
pub fn normal_equation_residual_norm(y: &RealVector, a_sub: &DenseMatrix) -> Option<f64> {
    let gram = a_sub.tr_mul(a_sub);
    let rhs = a_sub.tr_mul(y);
    let coeffs = gram.cholesky()?.solve(&rhs);
    Some((y - a_sub * coeffs).norm())
}

fn for_each_k_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + n - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// The `k`-subset (0-based, ascending) minimizing the summed residual norm
/// over all `(y, A)` pairs; ties resolve to the lexicographically first set.
pub fn exhaustive_min_residual_support(
    pairs: &[(&RealVector, &DenseMatrix)],
    k: usize,
) -> (Vec<usize>, f64) {
    let n = pairs[0].1.ncols();
    let mut best = (Vec::new(), f64::INFINITY);
    for_each_k_subset(n, k, |cols| {
        let total: Option<f64> = pairs
            .iter()
            .map(|(y, a)| normal_equation_residual_norm(y, &a.select_columns(cols)))
            .sum();
        if let Some(total) = total {
            if total < best.1 {
                best = (cols.to_vec(), total);
            }
        }
    });
    best
}

/// One named suite of the oracle run.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub checked: usize,
    pub failures: usize,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(OracleCheck::passed)
    }
}

/// Runs every brute-force suite on `trials` seeded instances each.
pub fn run_oracle_suite(seed: Seed, trials: usize) -> crate::Result<OracleReport> {
    let mut checks = Vec::new();
    let single = ProblemConfig {
        nodes: 1,
        m: 12,
        n: 20,
        k: 3,
        model: SignalModel::IndependentGaussian,
        snr_db: None,
    };
    let network = ProblemConfig { nodes: 10, ..single };
    let ring = Topology::circulant(10, 5)?;
    let lone = Topology::circulant(1, 1)?;

    let mut sp_check = OracleCheck { name: "sp-exhaustive-support", checked: 0, failures: 0 };
    let mut q1_check = OracleCheck { name: "dcsp-single-node-equals-sp", checked: 0, failures: 0 };
    for t in 0..trials {
        let p = JointSparseProblem::generate(&single, seed.derive(&[1, t as u64]))?;
        let (y, a) = (&p.measurements[0], &p.dictionaries[0]);
        let sp = subspace_pursuit(y, a, 3, 9)?;
        if *sp.residual_norms.last().unwrap() <= 1e-8 {
            sp_check.checked += 1;
            let (best, _) = exhaustive_min_residual_support(&[(y, a)], 3);
            if sp.support.indices() != best.as_slice() {
                sp_check.failures += 1;
            }
        }
        let d = run_dcsp(&p, &lone, 9)?;
        q1_check.checked += 1;
        if d.supports[0] != sp.support || d.residual_histories[0] != sp.residual_norms {
            q1_check.failures += 1;
        }
    }
    checks.push(sp_check);
    checks.push(q1_check);

    let mut dcsp_check = OracleCheck { name: "dcsp-exhaustive-support", checked: 0, failures: 0 };
    let mut ledger_check = OracleCheck { name: "dcsp-ledger-equals-formula", checked: 0, failures: 0 };
    let mut mono_check = OracleCheck { name: "dcsp-residual-monotone", checked: 0, failures: 0 };
    let mut ssp_check = OracleCheck { name: "gdcsp-full-equals-ssp", checked: 0, failures: 0 };
    let full = Topology::full(10)?;
    for t in 0..trials {
        let p = JointSparseProblem::generate(&network, seed.derive(&[2, t as u64]))?;
        let r = run_dcsp(&p, &ring, 9)?;
        if r.success {
            dcsp_check.checked += 1;
            let pairs: Vec<_> = p.measurements.iter().zip(&p.dictionaries).collect();
            let (best, _) = exhaustive_min_residual_support(&pairs, 3);
            if best.as_slice() != p.true_support.indices() {
                dcsp_check.failures += 1;
            }
        }
        ledger_check.checked += 1;
        if r.ledger.report().total() != predicted_messages_dcsp(3, r.rounds, &ring) {
            ledger_check.failures += 1;
        }
        for (q, trace) in r.traces.iter().enumerate() {
            mono_check.checked += 1;
            let decreasing = r.residual_histories[q].windows(2).all(|w| w[1] < w[0]);
            let restored = trace.steps.iter().all(|s| {
                s.accepted || (s.support_after == s.support_before && s.norm_after == s.norm_before)
            });
            if !(decreasing && restored) {
                mono_check.failures += 1;
            }
        }
        let a = run_gdcsp(&p, &full, 9)?;
        let b = run_ssp_centralized(&p, 9)?;
        ssp_check.checked += 1;
        if a != b || a.supports.windows(2).any(|w| w[0] != w[1]) {
            ssp_check.failures += 1;
        }
    }
    checks.extend([dcsp_check, ledger_check, mono_check, ssp_check]);
    Ok(OracleReport { checks })
}
