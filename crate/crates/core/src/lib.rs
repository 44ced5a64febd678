//! Tracking transactions through queues from timestamps alone.
//!
//! The crate simulates infinite-server and processor-sharing queues with
//! ground-truth transaction matchings, scores timestamp matching policies
//! (in-order, uniformly random among valid matchings, maximum likelihood)
//! per busy period, and decides which queues to instrument under a budget.
//! The [`ordering`] module checks the stochastic-order conditions under which
//! the cheap allocation heuristics are provably optimal.

pub mod accuracy;
pub mod allocation;
pub mod experiments;
pub mod matching;
pub mod numeric;
pub mod ordering;
pub mod queue_sim;
pub mod seed;
pub mod stochastics;

pub use accuracy::{AccuracyEstimate, Policy};
pub use allocation::{AllocationProblem, AllocationResult};
pub use matching::{BiadjacencyMatrix, Matching};
pub use queue_sim::{BusyPeriod, Discipline, QueueSpec, Trace};
pub use stochastics::{DistributionSpec, Support};
