//! Distributed robust online multi-task learning.
//!
//! Each of `m` workers learns a linear classifier for its own task from a
//! stream of examples. The task vectors are tied together by a nuclear norm
//! regularizer handled in primal-dual form, so the only global computation is
//! the leading singular pair of the dual matrix. Label noise is absorbed by a
//! capped `L_p` reweighting that drops examples with saturated loss.
//!
//! Two protocols are simulated round by round: a parameter-server variant
//! ([`simnet::run_centralized`]) and a decentralized one where neighbours
//! synchronize every `τ` rounds ([`simnet::run_decentralized`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod data;
pub mod experiment;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod optimizer;
mod scalar;
pub mod simnet;
pub mod topology;

pub use scalar::Scalar;

pub type Mat64 = linalg::Mat<f64>;
pub type Mat32 = linalg::Mat<f32>;
pub type SparseVec64 = linalg::SparseVec<f64>;
pub type Stream64 = data::MultiTaskStream<f64>;
pub type Stream32 = data::MultiTaskStream<f32>;
pub type Topology64 = topology::Topology<f64>;
pub type HyperParams64 = optimizer::HyperParams<f64>;
pub type SimConfig64 = simnet::SimConfig<f64>;
pub type RoundTrace64 = simnet::RoundTrace<f64>;
