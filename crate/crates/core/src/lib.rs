//! Exact computations around the central limit theorem for tensor products
//! `a ⊗ a` of free, identically distributed variables.
//!
//! Everything except [`rmt_sim`] works in exact rational arithmetic.

pub mod arith;
pub mod clt;
pub mod error;
pub mod free_moments;
pub mod limit_law;
pub mod partitions;
pub mod rmt_sim;
pub mod tensor_trace;

pub use arith::{Rational, Surd};
pub use error::{Error, Result};
pub use free_moments::{CumulantSpec, MomentTable, Tail, Word};
pub use partitions::{ClosureDecomposition, IntersectionGraph, PairPartition, Partition, PartitionStats};
pub use tensor_trace::{TensorParams, TraceValue};
pub use limit_law::{LimitLawTable, QParam};
pub use clt::FiniteNMoment;
pub use rmt_sim::{Centering, SimConfig, SimResult, WignerScale};
