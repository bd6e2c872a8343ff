//! Generalized DCSP: correlation and projection-coefficient sharing inside
//! each neighborhood, index voting and residual-norm sharing across the whole
//! network.
//!
//! Every node stops in the same round because the stopping test uses the
//! network-wide sum of residual norms. With full neighborhoods every node sees
//! identical sums and the algorithm reduces to centralized simultaneous
//! subspace pursuit.

use crate::analysis::predicted_messages_gdcsp;
use crate::error::{Error, Result};
use crate::network::{exchange, Inbox, MessageLedger, Payload, Recipients, Topology};
use crate::problem::JointSparseProblem;
use crate::pursuit::{
    correlation_magnitudes, project_coefficients, residual, submatrix, top_k_by_occurrence,
    top_k_indices, RealVector,
};
use crate::support::SupportSet;

#[derive(Debug, Clone, PartialEq)]
pub struct GdcspNodeState {
    pub support: SupportSet,
    pub residual: RealVector,
    pub residual_norm: f64,
}

/// Per-node sets of one round, in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct GdcspRound {
    /// Candidate sets `T_q ∪ top_k(Σ c_j)`.
    pub candidates: Vec<SupportSet>,
    /// Local estimates broadcast to the network.
    pub sent: Vec<SupportSet>,
    /// Voted supports before the stopping test.
    pub proposed: Vec<SupportSet>,
    pub norm_sum: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdcspResult {
    pub supports: Vec<SupportSet>,
    /// Rounds after initialization, including the final rejected one.
    pub rounds: usize,
    /// Per-node residual norms: initial, then one per accepted round.
    pub residual_histories: Vec<Vec<f64>>,
    /// Network-wide residual-norm sums: initial, then one per accepted round.
    pub norm_sums: Vec<f64>,
    pub initial_sent: Vec<SupportSet>,
    pub initial_supports: Vec<SupportSet>,
    pub history: Vec<GdcspRound>,
    pub ledger: MessageLedger,
    pub success: bool,
}

/// `Σ_{j ∈ G_q} v_j`, summed in ascending node order.
fn neighborhood_sum(topology: &Topology, q: usize, own: &[f64], inbox: &Inbox) -> Vec<f64> {
    let mut total = vec![0.0; own.len()];
    for &j in topology.neighborhood(q) {
        let values: &[f64] = if j == q {
            own
        } else {
            match inbox[q].iter().find(|(s, _)| *s == j) {
                Some((_, Payload::Coefficients(c))) => c,
                other => unreachable!("expected coefficients from {j}, got {other:?}"),
            }
        };
        for (t, v) in total.iter_mut().zip(values) {
            *t += v;
        }
    }
    total
}

/// Index-aligned `Σ_{j ∈ G_q} d_j`, each `d_j` embedded at its sender's indices.
fn aligned_sum(
    topology: &Topology,
    q: usize,
    own: &[(usize, f64)],
    inbox: &Inbox,
    n: usize,
) -> Vec<f64> {
    let mut total = vec![0.0; n];
    for &j in topology.neighborhood(q) {
        let pairs: &[(usize, f64)] = if j == q {
            own
        } else {
            match inbox[q].iter().find(|(s, _)| *s == j) {
                Some((_, Payload::IndexedCoefficients(d))) => d,
                other => unreachable!("expected indexed coefficients from {j}, got {other:?}"),
            }
        };
        for &(idx, v) in pairs {
            total[idx] += v;
        }
    }
    total
}

fn global_vote(own: &SupportSet, inbox: &[(usize, Payload)], k: usize, n: usize) -> Result<SupportSet> {
    let mut bag = own.indices().to_vec();
    for (_, p) in inbox {
        match p {
            Payload::Indices(s) => bag.extend_from_slice(s.indices()),
            other => unreachable!("index exchange delivered {other:?}"),
        }
    }
    top_k_by_occurrence(&bag, k, n)
}

fn global_norm_sum(own: f64, q: usize, inbox: &[(usize, Payload)]) -> f64 {
    let mut norms: Vec<(usize, f64)> = inbox
        .iter()
        .map(|(j, p)| match p {
            Payload::Norm(v) => (*j, *v),
            other => unreachable!("norm exchange delivered {other:?}"),
        })
        .collect();
    norms.push((q, own));
    norms.sort_by_key(|&(j, _)| j);
    norms.iter().map(|&(_, v)| v).sum()
}

/// Runs the generalized algorithm until the network-wide residual-norm sum
/// stops decreasing or `max_iters` rounds elapse.
pub fn run_gdcsp(
    problem: &JointSparseProblem,
    topology: &Topology,
    max_iters: usize,
) -> Result<GdcspResult> {
    problem.validate()?;
    if topology.nodes() != problem.nodes() {
        return Err(Error::BadDimensions(format!(
            "topology has {} nodes, problem has {}",
            topology.nodes(),
            problem.nodes()
        )));
    }
    if max_iters == 0 {
        return Err(Error::BadParams("max_iters must be at least 1".into()));
    }
    let (nodes, k, n) = (problem.nodes(), problem.k, problem.n);
    let dict = |q: usize| &problem.dictionaries[q];
    let meas = |q: usize| &problem.measurements[q];
    let mut ledger = MessageLedger::new();

    // Initialization.
    let corr: Vec<Vec<f64>> = (0..nodes)
        .map(|q| correlation_magnitudes(dict(q), meas(q)).as_slice().to_vec())
        .collect();
    let out: Vec<Payload> = corr.iter().cloned().map(Payload::Coefficients).collect();
    let inbox = exchange(topology, &out, Recipients::Local, &mut ledger);
    let initial_sent: Vec<SupportSet> = (0..nodes)
        .map(|q| top_k_indices(&neighborhood_sum(topology, q, &corr[q], &inbox), k))
        .collect::<Result<_>>()?;
    let out: Vec<Payload> = initial_sent.iter().cloned().map(Payload::Indices).collect();
    let inbox = exchange(topology, &out, Recipients::Global, &mut ledger);
    let mut states: Vec<GdcspNodeState> = (0..nodes)
        .map(|q| {
            let support = global_vote(&initial_sent[q], &inbox[q], k, n)?;
            let resid = residual(meas(q), &submatrix(dict(q), &support))?;
            Ok(GdcspNodeState {
                residual_norm: resid.norm(),
                residual: resid,
                support,
            })
        })
        .collect::<Result<_>>()?;
    ledger.close_round();
    let initial_supports: Vec<SupportSet> = states.iter().map(|s| s.support.clone()).collect();
    let mut histories: Vec<Vec<f64>> = states.iter().map(|s| vec![s.residual_norm]).collect();
    let mut norm_sums = vec![states.iter().map(|s| s.residual_norm).sum::<f64>()];

    let mut history = Vec::new();
    let mut rounds = 0;
    while rounds < max_iters {
        rounds += 1;

        let corr: Vec<Vec<f64>> = states
            .iter()
            .enumerate()
            .map(|(q, s)| correlation_magnitudes(dict(q), &s.residual).as_slice().to_vec())
            .collect();
        let out: Vec<Payload> = corr.iter().cloned().map(Payload::Coefficients).collect();
        let inbox = exchange(topology, &out, Recipients::Local, &mut ledger);

        let mut candidates = Vec::with_capacity(nodes);
        let mut coeffs = Vec::with_capacity(nodes);
        for (q, state) in states.iter().enumerate() {
            let fresh = top_k_indices(&neighborhood_sum(topology, q, &corr[q], &inbox), k)?;
            let cand = state.support.union(&fresh);
            let d = project_coefficients(meas(q), &submatrix(dict(q), &cand))?;
            coeffs.push(cand.iter().zip(d.iter()).map(|(i, v)| (i, v.abs())).collect::<Vec<_>>());
            candidates.push(cand);
        }
        let out: Vec<Payload> = coeffs.iter().cloned().map(Payload::IndexedCoefficients).collect();
        let inbox = exchange(topology, &out, Recipients::Local, &mut ledger);

        let sent: Vec<SupportSet> = (0..nodes)
            .map(|q| top_k_indices(&aligned_sum(topology, q, &coeffs[q], &inbox, n), k))
            .collect::<Result<_>>()?;
        let out: Vec<Payload> = sent.iter().cloned().map(Payload::Indices).collect();
        let inbox = exchange(topology, &out, Recipients::Global, &mut ledger);

        let mut proposals = Vec::with_capacity(nodes);
        for q in 0..nodes {
            let support = global_vote(&sent[q], &inbox[q], k, n)?;
            let resid = residual(meas(q), &submatrix(dict(q), &support))?;
            proposals.push((support, resid));
        }
        let out: Vec<Payload> = proposals.iter().map(|(_, r)| Payload::Norm(r.norm())).collect();
        let inbox = exchange(topology, &out, Recipients::Global, &mut ledger);
        ledger.close_round();

        // Every node evaluates the same sum in the same order.
        let sums: Vec<f64> = (0..nodes)
            .map(|q| global_norm_sum(proposals[q].1.norm(), q, &inbox[q]))
            .collect();
        debug_assert!(sums.windows(2).all(|w| w[0].to_bits() == w[1].to_bits()));
        let norm_sum = sums[0];
        let accepted = norm_sum < *norm_sums.last().unwrap();

        history.push(GdcspRound {
            candidates,
            sent,
            proposed: proposals.iter().map(|(s, _)| s.clone()).collect(),
            norm_sum,
            accepted,
        });
        if !accepted {
            break;
        }
        norm_sums.push(norm_sum);
        for (q, (state, (support, resid))) in states.iter_mut().zip(proposals).enumerate() {
            state.residual_norm = resid.norm();
            state.residual = resid;
            state.support = support;
            histories[q].push(state.residual_norm);
        }
    }

    let supports: Vec<SupportSet> = states.into_iter().map(|s| s.support).collect();
    let success = supports.iter().all(|s| *s == problem.true_support);
    Ok(GdcspResult {
        supports,
        rounds,
        residual_histories: histories,
        norm_sums,
        initial_sent,
        initial_supports,
        history,
        ledger,
        success,
    })
}

/// Centralized simultaneous subspace pursuit: the generalized algorithm with
/// every node in every neighborhood.
pub fn run_ssp_centralized(problem: &JointSparseProblem, max_iters: usize) -> Result<GdcspResult> {
    let topology = Topology::full(problem.nodes())?;
    run_gdcsp(problem, &topology, max_iters)
}

/// Closed-form message count next to the ledger total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerComparison {
    pub predicted: u64,
    pub measured: u64,
    /// `predicted - measured`; positive only when some candidate set held
    /// fewer than `2K` indices.
    pub delta: i64,
}

pub fn predicted_vs_measured_gdcsp_ledger(
    result: &GdcspResult,
    n: usize,
    k: usize,
    topology: &Topology,
) -> LedgerComparison {
    let predicted = predicted_messages_gdcsp(n, k, result.rounds, topology);
    let measured = result.ledger.report().total();
    LedgerComparison {
        predicted,
        measured,
        delta: predicted as i64 - measured as i64,
    }
}
