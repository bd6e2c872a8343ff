//! Distributed joint-sparse support recovery.
//!
//! `Q` nodes each observe `y_q = A_q x_q + e_q` where every `x_q` is
//! `K`-sparse on one common support. Nodes exchange small messages with
//! their neighbors and agree on the support by voting:
//!
//! - [`dcsp`] exchanges support indices and one stop flag per round, locally.
//! - [`gdcsp`] also exchanges correlation vectors and residual norms, and
//!   needs a network-wide broadcast every round.
//!
//! Both are built on the single-node subspace pursuit in [`pursuit`].
//! [`analysis`] has the closed-form bounds, [`experiments`] the Monte-Carlo
//! sweeps and [`oracle`] a brute-force cross-check.
//!
//! ```
//! use dcsp::{run_dcsp, JointSparseProblem, ProblemConfig, Seed, SignalModel, Topology};
//!
//! let config = ProblemConfig {
//!     nodes: 6,
//!     m: 30,
//!     n: 80,
//!     k: 4,
//!     model: SignalModel::IndependentGaussian,
//!     snr_db: None,
//! };
//! let problem = JointSparseProblem::generate(&config, Seed(7)).unwrap();
//! let ring = Topology::circulant(6, 3).unwrap();
//! let result = run_dcsp(&problem, &ring, 12).unwrap();
//! assert!(result.success);
//! ```
//!
//! Indices are 0-based in the API and 1-based in text output.

pub mod analysis;
pub mod dcsp;
pub mod error;
pub mod experiments;
pub mod gdcsp;
pub mod network;
pub mod oracle;
pub mod problem;
pub mod pursuit;
pub mod seed;
pub mod support;

pub use crate::dcsp::{run_dcsp, DcspResult};
pub use crate::error::{Error, Result};
pub use crate::gdcsp::{run_gdcsp, run_ssp_centralized, GdcspResult};
pub use crate::network::{MessageLedger, Topology};
pub use crate::problem::{JointSparseProblem, ProblemConfig, SignalModel};
pub use crate::pursuit::{subspace_pursuit, DenseMatrix, RealVector};
pub use crate::seed::Seed;
pub use crate::support::SupportSet;

// The guide's chapters run as doctests so its snippets cannot drift.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problem.md")]
    mod problem {}
    #[doc = include_str!("../../../book/src/pursuit.md")]
    mod pursuit {}
    #[doc = include_str!("../../../book/src/dcsp.md")]
    mod dcsp {}
    #[doc = include_str!("../../../book/src/gdcsp.md")]
    mod gdcsp {}
    #[doc = include_str!("../../../book/src/messages.md")]
    mod messages {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
