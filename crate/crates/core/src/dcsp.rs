//! Decentralized and collaborative subspace pursuit.
//!
//! Each node runs subspace pursuit on its own measurements but replaces its
//! local support estimate by a majority vote over the `K`-index estimates of
//! its one-hop neighborhood. Only indices and one-bit flags cross the network.
//!
//! A node whose update fails to shrink its residual rolls back and raises its
//! flag; it stops once every flag in its neighborhood is raised. Stopped nodes
//! keep re-sending their last estimate and a raised flag so that neighbors
//! with different neighborhoods can still vote, which makes every round cost
//! the same number of scalars.

use crate::error::{Error, Result};
use crate::network::{exchange, MessageLedger, Payload, Recipients, Topology};
use crate::problem::JointSparseProblem;
use crate::pursuit::{
    expand_and_prune, initial_selection, residual, submatrix, top_k_by_occurrence, RealVector,
};
use crate::support::SupportSet;

/// Iteration cap used when none is given: `3K`.
pub fn default_max_iters(k: usize) -> usize {
    3 * k
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcspNodeState {
    pub support: SupportSet,
    pub residual: RealVector,
    pub residual_norm: f64,
    pub flag: bool,
    /// Iterations this node has executed.
    pub iteration: usize,
    pub stopped: bool,
    /// Estimate most recently put on the wire.
    pub last_sent: SupportSet,
}

/// One iteration at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub round: usize,
    pub support_before: SupportSet,
    pub norm_before: f64,
    /// Local estimate sent to the neighbors this round.
    pub sent: SupportSet,
    pub proposed_support: SupportSet,
    pub proposed_norm: f64,
    pub accepted: bool,
    pub support_after: SupportSet,
    pub norm_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrace {
    /// Estimate sent during initialization.
    pub initial_sent: SupportSet,
    pub initial_support: SupportSet,
    pub steps: Vec<StepRecord>,
}

impl NodeTrace {
    /// Residual norms of the initial estimate and every accepted update.
    pub fn accepted_norms(&self, initial_norm: f64) -> Vec<f64> {
        std::iter::once(initial_norm)
            .chain(self.steps.iter().filter(|s| s.accepted).map(|s| s.norm_after))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcspResult {
    /// Final estimate per node.
    pub supports: Vec<SupportSet>,
    /// Iterations each node executed before stopping.
    pub node_iterations: Vec<usize>,
    /// Network rounds after initialization (the `L` of the message count).
    pub rounds: usize,
    /// Residual norm history per node: initial, then one per accepted update.
    pub residual_histories: Vec<Vec<f64>>,
    pub traces: Vec<NodeTrace>,
    pub ledger: MessageLedger,
    /// Every node recovered the true support.
    pub success: bool,
}

fn check_inputs(problem: &JointSparseProblem, topology: &Topology) -> Result<()> {
    problem.validate()?;
    if topology.nodes() != problem.nodes() {
        return Err(Error::BadDimensions(format!(
            "topology has {} nodes, problem has {}",
            topology.nodes(),
            problem.nodes()
        )));
    }
    Ok(())
}

fn fuse(own: &SupportSet, inbox: &[(usize, Payload)], k: usize, n: usize) -> Result<SupportSet> {
    let mut bag: Vec<usize> = own.indices().to_vec();
    for (_, payload) in inbox {
        match payload {
            Payload::Indices(s) => bag.extend_from_slice(s.indices()),
            other => unreachable!("index exchange delivered {other:?}"),
        }
    }
    top_k_by_occurrence(&bag, k, n)
}

/// Initialization: local top-`K` correlations, neighborhood exchange, vote,
/// residual.
pub fn dcsp_init(
    problem: &JointSparseProblem,
    topology: &Topology,
    ledger: &mut MessageLedger,
) -> Result<Vec<DcspNodeState>> {
    check_inputs(problem, topology)?;
    let (k, n) = (problem.k, problem.n);
    let omegas: Vec<SupportSet> = (0..problem.nodes())
        .map(|q| initial_selection(&problem.dictionaries[q], &problem.measurements[q], k))
        .collect::<Result<_>>()?;
    let outgoing: Vec<Payload> = omegas.iter().cloned().map(Payload::Indices).collect();
    let inbox = exchange(topology, &outgoing, Recipients::Local, ledger);
    let states = omegas
        .into_iter()
        .enumerate()
        .map(|(q, omega)| {
            let support = fuse(&omega, &inbox[q], k, n)?;
            let resid = residual(
                &problem.measurements[q],
                &submatrix(&problem.dictionaries[q], &support),
            )?;
            Ok(DcspNodeState {
                residual_norm: resid.norm(),
                residual: resid,
                support,
                flag: false,
                iteration: 0,
                stopped: false,
                last_sent: omega,
            })
        })
        .collect::<Result<_>>()?;
    ledger.close_round();
    Ok(states)
}

/// One network round. Active nodes expand, prune, vote and test their
/// residual; stopped nodes re-send their frozen estimate with a raised flag.
///
/// Returns one record per node that was active at the start of the round.
pub fn dcsp_iteration(
    states: &mut [DcspNodeState],
    problem: &JointSparseProblem,
    topology: &Topology,
    ledger: &mut MessageLedger,
) -> Result<Vec<Option<StepRecord>>> {
    let (k, n) = (problem.k, problem.n);
    let round = ledger.rounds().len();

    for (q, state) in states.iter_mut().enumerate() {
        if state.stopped {
            continue;
        }
        state.flag = false;
        state.last_sent = expand_and_prune(
            &problem.dictionaries[q],
            &problem.measurements[q],
            &state.support,
            &state.residual,
            k,
        )?;
    }
    let outgoing: Vec<Payload> = states
        .iter()
        .map(|s| Payload::Indices(s.last_sent.clone()))
        .collect();
    let inbox = exchange(topology, &outgoing, Recipients::Local, ledger);

    let mut records = Vec::with_capacity(states.len());
    for (q, state) in states.iter_mut().enumerate() {
        if state.stopped {
            records.push(None);
            continue;
        }
        state.iteration += 1;
        let proposed = fuse(&state.last_sent, &inbox[q], k, n)?;
        let new_resid = residual(
            &problem.measurements[q],
            &submatrix(&problem.dictionaries[q], &proposed),
        )?;
        let new_norm = new_resid.norm();
        let (support_before, norm_before) = (state.support.clone(), state.residual_norm);
        let accepted = new_norm < norm_before;
        if accepted {
            state.support = proposed.clone();
            state.residual = new_resid;
            state.residual_norm = new_norm;
        } else {
            state.flag = true;
        }
        records.push(Some(StepRecord {
            round,
            support_before,
            norm_before,
            sent: state.last_sent.clone(),
            proposed_support: proposed,
            proposed_norm: new_norm,
            accepted,
            support_after: state.support.clone(),
            norm_after: state.residual_norm,
        }));
    }

    let flags: Vec<Payload> = states
        .iter()
        .map(|s| Payload::Flag(s.stopped || s.flag))
        .collect();
    let flag_inbox = exchange(topology, &flags, Recipients::Local, ledger);
    let stop: Vec<bool> = states
        .iter()
        .zip(&flag_inbox)
        .map(|(s, inbox)| {
            !s.stopped
                && s.flag
                && inbox
                    .iter()
                    .all(|(_, p)| matches!(p, Payload::Flag(true)))
        })
        .collect();
    for (state, stop) in states.iter_mut().zip(stop) {
        if stop {
            state.stopped = true;
        }
    }
    ledger.close_round();
    Ok(records)
}

/// Runs initialization and then rounds until every node has stopped or
/// `max_iters` rounds have elapsed.
pub fn run_dcsp(
    problem: &JointSparseProblem,
    topology: &Topology,
    max_iters: usize,
) -> Result<DcspResult> {
    if max_iters == 0 {
        return Err(Error::BadParams("max_iters must be at least 1".into()));
    }
    let mut ledger = MessageLedger::new();
    let mut states = dcsp_init(problem, topology, &mut ledger)?;
    let mut traces: Vec<NodeTrace> = states
        .iter()
        .map(|s| NodeTrace {
            initial_sent: s.last_sent.clone(),
            initial_support: s.support.clone(),
            steps: Vec::new(),
        })
        .collect();
    let mut histories: Vec<Vec<f64>> = states.iter().map(|s| vec![s.residual_norm]).collect();

    let mut rounds = 0;
    while rounds < max_iters && states.iter().any(|s| !s.stopped) {
        let records = dcsp_iteration(&mut states, problem, topology, &mut ledger)?;
        rounds += 1;
        for (q, record) in records.into_iter().enumerate() {
            if let Some(record) = record {
                if record.accepted {
                    histories[q].push(record.norm_after);
                }
                traces[q].steps.push(record);
            }
        }
    }

    let supports: Vec<SupportSet> = states.iter().map(|s| s.support.clone()).collect();
    let success = supports.iter().all(|s| *s == problem.true_support);
    Ok(DcspResult {
        node_iterations: states.iter().map(|s| s.iteration).collect(),
        supports,
        rounds,
        residual_histories: histories,
        traces,
        ledger,
        success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::predicted_messages_dcsp;
    use crate::problem::{ProblemConfig, SignalModel};
    use crate::pursuit::{subspace_pursuit, DenseMatrix};
    use crate::seed::Seed;

    fn identity_problem(nodes: usize, n: usize, support: &[usize]) -> JointSparseProblem {
        let t = SupportSet::new(support.to_vec(), n).unwrap();
        let dicts = vec![DenseMatrix::identity(n, n); nodes];
        let signals = (0..nodes)
            .map(|q| {
                let mut x = RealVector::zeros(n);
                for (pos, i) in t.iter().enumerate() {
                    x[i] = 1.0 + (q + pos) as f64;
                }
                x
            })
            .collect();
        JointSparseProblem::noise_free(dicts, signals, t).unwrap()
    }

    #[test]
    fn identity_dictionaries_converge_immediately() {
        let p = identity_problem(10, 20, &[2, 9, 17]);
        let topo = Topology::circulant(10, 5).unwrap();
        let mut ledger = MessageLedger::new();
        let states = dcsp_init(&p, &topo, &mut ledger).unwrap();
        for s in &states {
            assert_eq!(s.support, p.true_support);
            assert!(s.residual_norm < 1e-12);
        }
        let r = run_dcsp(&p, &topo, 9).unwrap();
        assert!(r.success);
        assert_eq!(r.rounds, 1);
        assert!(r.node_iterations.iter().all(|&l| l == 1));
        let k = 3;
        assert_eq!(r.ledger.report().total(), (k + k + 1) * 40);
        assert_eq!(r.ledger.report().total(), predicted_messages_dcsp(3, 1, &topo));
    }

    #[test]
    fn fixed_point_stays_put() {
        let p = identity_problem(3, 8, &[0, 5]);
        let topo = Topology::circulant(3, 2).unwrap();
        let r = run_dcsp(&p, &topo, 6).unwrap();
        for trace in &r.traces {
            assert_eq!(trace.steps.len(), 1);
            let step = &trace.steps[0];
            assert_eq!(step.sent, p.true_support);
            assert!(!step.accepted);
            assert_eq!(step.support_after, step.support_before);
        }
    }

    #[test]
    fn init_ledger_counts_k_per_delivery() {
        let cfg = ProblemConfig { nodes: 10, m: 40, n: 200, k: 10, model: SignalModel::IndependentGaussian, snr_db: Some(18.0) };
        let p = JointSparseProblem::generate(&cfg, Seed(1)).unwrap();
        let topo = Topology::circulant(10, 5).unwrap();
        let mut ledger = MessageLedger::new();
        dcsp_init(&p, &topo, &mut ledger).unwrap();
        assert_eq!(ledger.report().index_scalars, 400);
        assert_eq!(ledger.report().total(), 400);
    }

    #[test]
    fn single_node_matches_subspace_pursuit() {
        let cfg = ProblemConfig { nodes: 1, m: 20, n: 60, k: 5, model: SignalModel::IndependentGaussian, snr_db: Some(10.0) };
        let topo = Topology::circulant(1, 1).unwrap();
        for t in 0..20 {
            let p = JointSparseProblem::generate(&cfg, Seed(t)).unwrap();
            let r = run_dcsp(&p, &topo, 15).unwrap();
            let sp = subspace_pursuit(&p.measurements[0], &p.dictionaries[0], 5, 15).unwrap();
            assert_eq!(r.supports[0], sp.support);
            assert_eq!(r.residual_histories[0], sp.residual_norms);
            assert_eq!(r.node_iterations[0], sp.iterations);
            assert_eq!(r.ledger.report().total(), 0);
        }
    }

    #[test]
    fn accepted_norms_decrease_and_rejections_restore() {
        let cfg = ProblemConfig { nodes: 8, m: 24, n: 100, k: 6, model: SignalModel::IndependentGaussian, snr_db: Some(15.0) };
        let topo = Topology::circulant(8, 3).unwrap();
        for t in 0..20 {
            let p = JointSparseProblem::generate(&cfg, Seed(t)).unwrap();
            let r = run_dcsp(&p, &topo, 18).unwrap();
            for (q, trace) in r.traces.iter().enumerate() {
                assert!(r.residual_histories[q].windows(2).all(|w| w[1] < w[0]));
                for step in &trace.steps {
                    if step.accepted {
                        assert!(step.norm_after < step.norm_before);
                        assert_eq!(step.support_after, step.proposed_support);
                    } else {
                        assert_eq!(step.support_after, step.support_before);
                        assert_eq!(step.norm_after.to_bits(), step.norm_before.to_bits());
                    }
                }
            }
            assert_eq!(r.ledger.report().total(), predicted_messages_dcsp(6, r.rounds, &topo));
            assert!(r.rounds <= 18);
        }
    }

    #[test]
    fn rejects_mismatched_topology_and_zero_cap() {
        let p = identity_problem(3, 8, &[0, 5]);
        assert!(matches!(
            run_dcsp(&p, &Topology::circulant(4, 2).unwrap(), 3),
            Err(Error::BadDimensions(_))
        ));
        assert!(matches!(
            run_dcsp(&p, &Topology::circulant(3, 2).unwrap(), 0),
            Err(Error::BadParams(_))
        ));
    }
}
