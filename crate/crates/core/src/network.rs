//! Synchronous, lossless round engine with per-scalar delivery accounting.
//!
//! A delivery is one payload moving from one node to another within one
//! exchange. Its cost is the number of scalars it carries: one per index, per
//! coefficient, per flag and per norm.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::support::SupportSet;

/// Per-node neighborhoods `G_q` (each containing `q`) over nodes `0..Q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    neighborhoods: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from explicit neighborhoods. Each neighborhood is
    /// sorted and must contain its own node.
    ///
    /// Connectivity is not enforced: `g = 1` rings (no collaboration) are a
    /// legitimate baseline. Use [`Topology::is_connected`] where it matters.
    pub fn new(neighborhoods: Vec<Vec<usize>>) -> Result<Self> {
        let q = neighborhoods.len();
        if q == 0 {
            return Err(Error::BadDimensions("topology needs at least one node".into()));
        }
        let mut sorted = Vec::with_capacity(q);
        for (node, mut members) in neighborhoods.into_iter().enumerate() {
            members.sort_unstable();
            members.dedup();
            if !members.contains(&node) {
                return Err(Error::BadParams(format!(
                    "neighborhood of node {} must contain the node itself",
                    node + 1
                )));
            }
            if members.last().is_some_and(|&j| j >= q) {
                return Err(Error::BadParams(format!(
                    "neighborhood of node {} names a node outside 1..={q}",
                    node + 1
                )));
            }
            sorted.push(members);
        }
        Ok(Self { neighborhoods: sorted })
    }

    /// Ring where node `q` hears from itself and the next `g - 1` nodes,
    /// wrapping modulo `Q`.
    pub fn circulant(q: usize, g: usize) -> Result<Self> {
        if g == 0 || g > q {
            return Err(Error::BadG { g, q });
        }
        let neighborhoods = (0..q)
            .map(|node| (0..g).map(|i| (node + i) % q).collect())
            .collect();
        Self::new(neighborhoods)
    }

    /// Every node hears every other node.
    pub fn full(q: usize) -> Result<Self> {
        Self::circulant(q, q)
    }

    pub fn nodes(&self) -> usize {
        self.neighborhoods.len()
    }

    /// `G_q`, ascending.
    pub fn neighborhood(&self, node: usize) -> &[usize] {
        &self.neighborhoods[node]
    }

    /// `Σ_q (|G_q| - 1)`: deliveries per local exchange.
    pub fn local_links(&self) -> u64 {
        self.neighborhoods.iter().map(|g| g.len() as u64 - 1).sum()
    }

    /// `Q (Q - 1)`: deliveries per global exchange.
    pub fn global_links(&self) -> u64 {
        let q = self.nodes() as u64;
        q * (q - 1)
    }

    pub fn is_full(&self) -> bool {
        self.neighborhoods.iter().all(|g| g.len() == self.nodes())
    }

    /// Whether the symmetrized neighbor graph is connected.
    pub fn is_connected(&self) -> bool {
        let q = self.nodes();
        let mut adj = vec![Vec::new(); q];
        for (node, members) in self.neighborhoods.iter().enumerate() {
            for &j in members {
                adj[node].push(j);
                adj[j].push(node);
            }
        }
        let mut seen = vec![false; q];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// What a node puts on the wire in one exchange.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Indices(SupportSet),
    Coefficients(Vec<f64>),
    /// `(global index, value)` pairs; only the values are billed.
    IndexedCoefficients(Vec<(usize, f64)>),
    Flag(bool),
    Norm(f64),
}

/// Ledger categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Index,
    Coefficient,
    Flag,
    Norm,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Index, Category::Coefficient, Category::Flag, Category::Norm];

    pub fn name(self) -> &'static str {
        match self {
            Category::Index => "index",
            Category::Coefficient => "coefficient",
            Category::Flag => "flag",
            Category::Norm => "norm",
        }
    }
}

impl Payload {
    pub fn category(&self) -> Category {
        match self {
            Payload::Indices(_) => Category::Index,
            Payload::Coefficients(_) | Payload::IndexedCoefficients(_) => Category::Coefficient,
            Payload::Flag(_) => Category::Flag,
            Payload::Norm(_) => Category::Norm,
        }
    }

    /// Scalars billed for one delivery of this payload.
    pub fn scalars(&self) -> u64 {
        match self {
            Payload::Indices(s) => s.len() as u64,
            Payload::Coefficients(c) => c.len() as u64,
            Payload::IndexedCoefficients(c) => c.len() as u64,
            Payload::Flag(_) | Payload::Norm(_) => 1,
        }
    }

    /// Index scalars that travel alongside the billed values (informational).
    fn side_indices(&self) -> u64 {
        match self {
            Payload::IndexedCoefficients(c) => c.len() as u64,
            _ => 0,
        }
    }
}

/// Running scalar counts per category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LedgerTotals {
    pub index_scalars: u64,
    pub coefficient_scalars: u64,
    pub flag_scalars: u64,
    pub norm_scalars: u64,
    /// Indices carried next to indexed coefficients. Not part of `total()`.
    pub index_pair_overhead: u64,
}

impl LedgerTotals {
    pub fn total(&self) -> u64 {
        self.index_scalars + self.coefficient_scalars + self.flag_scalars + self.norm_scalars
    }

    pub fn get(&self, category: Category) -> u64 {
        match category {
            Category::Index => self.index_scalars,
            Category::Coefficient => self.coefficient_scalars,
            Category::Flag => self.flag_scalars,
            Category::Norm => self.norm_scalars,
        }
    }

    fn add(&mut self, category: Category, amount: u64) {
        match category {
            Category::Index => self.index_scalars += amount,
            Category::Coefficient => self.coefficient_scalars += amount,
            Category::Flag => self.flag_scalars += amount,
            Category::Norm => self.norm_scalars += amount,
        }
    }
}

/// Cumulative counters plus a snapshot at the close of every round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MessageLedger {
    totals: LedgerTotals,
    per_round: Vec<LedgerTotals>,
}

impl MessageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current totals.
    pub fn report(&self) -> LedgerTotals {
        self.totals
    }

    pub fn rounds(&self) -> &[LedgerTotals] {
        &self.per_round
    }

    /// Records a snapshot of the cumulative counters.
    pub fn close_round(&mut self) {
        self.per_round.push(self.totals);
    }

    fn credit(&mut self, payload: &Payload) {
        self.totals.add(payload.category(), payload.scalars());
        self.totals.index_pair_overhead += payload.side_indices();
    }

    /// `round,category,count` rows of cumulative counts, one block per closed round.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,category,count\n");
        for (round, snap) in self.per_round.iter().enumerate() {
            for cat in Category::ALL {
                let _ = writeln!(out, "{round},{},{}", cat.name(), snap.get(cat));
            }
        }
        out
    }
}

/// Who receives a node's payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipients {
    /// Node `q` receives from `G_q \ {q}`.
    Local,
    /// Node `q` receives from every other node.
    Global,
}

/// Payloads received by each node in one exchange, ordered by sender.
pub type Inbox = Vec<Vec<(usize, Payload)>>;

/// Delivers one payload per node according to `rule`, billing `ledger`.
///
/// Routing follows the receiver's neighborhood: node `q` gets the payload of
/// every `j ∈ G_q, j ≠ q`. All sends complete before the inbox is returned.
pub fn exchange(
    topology: &Topology,
    outgoing: &[Payload],
    rule: Recipients,
    ledger: &mut MessageLedger,
) -> Inbox {
    assert_eq!(
        outgoing.len(),
        topology.nodes(),
        "every node must supply exactly one payload"
    );
    let all: Vec<usize> = (0..topology.nodes()).collect();
    (0..topology.nodes())
        .map(|receiver| {
            let senders = match rule {
                Recipients::Local => topology.neighborhood(receiver),
                Recipients::Global => &all[..],
            };
            senders
                .iter()
                .filter(|&&j| j != receiver)
                .map(|&j| {
                    ledger.credit(&outgoing[j]);
                    (j, outgoing[j].clone())
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circulant_neighborhoods() {
        let t = Topology::circulant(10, 5).unwrap();
        assert_eq!(t.neighborhood(0), &[0, 1, 2, 3, 4]);
        let t = Topology::circulant(3, 1).unwrap();
        for q in 0..3 {
            assert_eq!(t.neighborhood(q), &[q]);
        }
        let t = Topology::circulant(4, 2).unwrap();
        assert_eq!(t.neighborhood(3), &[0, 3]);
        assert_eq!(Topology::circulant(4, 5), Err(Error::BadG { g: 5, q: 4 }));
        assert_eq!(Topology::circulant(4, 0), Err(Error::BadG { g: 0, q: 4 }));
    }

    #[test]
    fn rejects_malformed_neighborhoods() {
        assert!(Topology::new(vec![vec![1], vec![1]]).is_err());
        assert!(Topology::new(vec![vec![0, 2], vec![1]]).is_err());
        assert!(!Topology::new(vec![vec![0], vec![1]]).unwrap().is_connected());
        assert!(Topology::new(vec![vec![0], vec![0, 1]]).unwrap().is_connected());
        assert!(Topology::circulant(6, 2).unwrap().is_connected());
    }

    #[test]
    fn local_exchange_bills_receivers() {
        let t = Topology::circulant(3, 2).unwrap();
        let mut ledger = MessageLedger::new();
        let out: Vec<Payload> = (0..3)
            .map(|q| Payload::Indices(SupportSet::new(vec![q, q + 3], 6).unwrap()))
            .collect();
        let inbox = exchange(&t, &out, Recipients::Local, &mut ledger);
        assert_eq!(ledger.report().index_scalars, 6);
        assert_eq!(inbox[2], vec![(0, out[0].clone())]);
        assert_eq!(inbox[0], vec![(1, out[1].clone())]);
    }

    #[test]
    fn global_flags_and_isolated_nodes() {
        let t = Topology::circulant(10, 3).unwrap();
        let mut ledger = MessageLedger::new();
        exchange(&t, &vec![Payload::Flag(true); 10], Recipients::Global, &mut ledger);
        assert_eq!(ledger.report().flag_scalars, 90);
        assert_eq!(ledger.report().total(), 90);

        let isolated = Topology::circulant(3, 1).unwrap();
        let mut ledger = MessageLedger::new();
        let inbox = exchange(&isolated, &vec![Payload::Norm(1.0); 3], Recipients::Local, &mut ledger);
        assert!(inbox.iter().all(|i| i.is_empty()));
        assert_eq!(ledger.report(), LedgerTotals::default());
    }

    #[test]
    fn indexed_coefficients_bill_values_only() {
        let t = Topology::full(2).unwrap();
        let mut ledger = MessageLedger::new();
        let p = Payload::IndexedCoefficients(vec![(0, 1.0), (3, 2.0), (5, 0.5)]);
        exchange(&t, &[p.clone(), p], Recipients::Local, &mut ledger);
        let r = ledger.report();
        assert_eq!(r.coefficient_scalars, 6);
        assert_eq!(r.index_pair_overhead, 6);
        assert_eq!(r.total(), 6);
    }

    #[test]
    fn ledger_snapshots_and_csv() {
        let fresh = MessageLedger::new();
        assert_eq!(fresh.report().total(), 0);
        let t = Topology::circulant(4, 2).unwrap();
        let mut ledger = MessageLedger::new();
        exchange(&t, &vec![Payload::Norm(0.0); 4], Recipients::Local, &mut ledger);
        ledger.close_round();
        exchange(&t, &vec![Payload::Coefficients(vec![1.0, 2.0]); 4], Recipients::Local, &mut ledger);
        ledger.close_round();
        assert_eq!(ledger.rounds().len(), 2);
        assert!(ledger.rounds()[0].total() <= ledger.rounds()[1].total());
        let csv = ledger.to_csv();
        assert!(csv.starts_with("round,category,count\n0,index,0\n"));
        assert!(csv.contains("1,coefficient,8\n"));
        assert!(csv.contains("1,norm,4\n"));
    }

    #[test]
    fn circulant_round_delivers_q_times_g_minus_one() {
        for (q, g) in [(10, 5), (7, 3), (6, 6)] {
            let t = Topology::circulant(q, g).unwrap();
            let mut ledger = MessageLedger::new();
            exchange(&t, &vec![Payload::Flag(false); q], Recipients::Local, &mut ledger);
            assert_eq!(ledger.report().flag_scalars, (q * (g - 1)) as u64);
            assert_eq!(t.local_links(), (q * (g - 1)) as u64);
        }
    }
}
