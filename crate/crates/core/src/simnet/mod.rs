//! Round-based simulation of the worker/server and decentralized protocols.
//!
//! Workers are plain state machines; every exchange between them is an
//! explicit [`Message`] recorded in the round's trace. Time is simulated: each
//! worker pays a seeded compute cost per round and waits at synchronization
//! barriers, which yields per-worker idle time without real networking.

mod engine;
mod export;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::data::{DataError, StreamOrder};
use crate::linalg::{LinalgError, PowerOpts};
use crate::losses::{Label, LossError, LossKind};
use crate::optimizer::{HyperParams, OptimError};
use crate::topology::{Topology, TopologyError};
use crate::Scalar;

pub use engine::{run, run_centralized, run_decentralized, run_local_baseline, Simulator};
pub use export::{write_trace_csv, TRACE_HEADER};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Parameter server, synchronous every round.
    Drom,
    /// Neighbour aggregation every `τ` rounds.
    DromD,
    /// Independent per-task online subgradient descent.
    LocalBaseline,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drom" => Ok(Algorithm::Drom),
            "drom_d" => Ok(Algorithm::DromD),
            "local" | "local_baseline" => Ok(Algorithm::LocalBaseline),
            other => Err(format!(
                "unknown algorithm `{other}` (expected drom, drom_d or local)"
            )),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Drom => "drom",
            Algorithm::DromD => "drom_d",
            Algorithm::LocalBaseline => "local",
        })
    }
}

/// Simulated time: per-round compute cost `base + jitter·U(0,1)` for each
/// worker, plus a fixed latency per message hop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    pub compute_base: f64,
    pub compute_jitter: f64,
    pub latency: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            compute_base: 1.0,
            compute_jitter: 0.5,
            latency: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig<T> {
    pub algorithm: Algorithm,
    /// Communication graph; required by the decentralized protocol only.
    pub topology: Option<Topology<T>>,
    pub hp: HyperParams<T>,
    pub loss: LossKind,
    pub rounds: usize,
    pub seed: u64,
    pub order: StreamOrder,
    pub power: PowerOpts<T>,
    pub cost: CostModel,
    /// Run the per-worker phases on the rayon pool.
    pub parallel: bool,
    /// Record `‖W_t‖_*` every round (needs `min(d, m) ≤ 64`).
    pub track_nuclear_norm: bool,
}

impl<T: Scalar> SimConfig<T> {
    /// Shuffled order, default power-iteration options and cost model,
    /// serial execution, no nuclear norm tracking.
    pub fn new(
        algorithm: Algorithm,
        topology: Option<Topology<T>>,
        hp: HyperParams<T>,
        loss: LossKind,
        rounds: usize,
        seed: u64,
    ) -> Self {
        SimConfig {
            algorithm,
            topology,
            hp,
            loss,
            rounds,
            seed,
            order: StreamOrder::Shuffled,
            power: PowerOpts::default(),
            cost: CostModel::default(),
            parallel: false,
            track_nuclear_norm: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeId {
    Server,
    Worker(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageKind {
    /// A worker's dual column, `d` reals.
    DualUpload,
    /// `(u, [v]_i)` from the server, `d + 1` reals.
    SpectralBroadcast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub round: usize,
    /// Number of reals carried.
    pub payload_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskRecord<T> {
    /// Index of the example within its task.
    pub example: usize,
    pub prediction: Label,
    pub label: Label,
    /// Loss before the update.
    pub loss: T,
    pub gamma: T,
    pub update_applied: bool,
    /// `σ₁` of the matrix this worker's next `u·[v]_i` came from, when
    /// one was computed this round.
    pub sigma1: Option<T>,
    pub msgs_in: usize,
    pub msgs_out: usize,
    /// Simulated barrier wait this round.
    pub idle: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundTrace<T> {
    pub round: usize,
    pub tasks: Vec<TaskRecord<T>>,
    pub sync_round: bool,
    pub broadcast_occurred: bool,
    pub messages: Vec<Message>,
    /// Server-side `σ₁(A)` in the centralized protocol.
    pub sigma1: Option<T>,
    /// Power iterations spent this round, summed over all spectral steps.
    pub power_iterations: usize,
    /// Replies withheld because `σ₁ ≤ 1`, counted per receiving worker.
    pub skipped: usize,
    pub w_frobenius: T,
    pub nuclear_norm_w: Option<T>,
}

impl<T: Scalar> RoundTrace<T> {
    /// `F_t(W_t)`: summed loss over tasks.
    pub fn total_loss(&self) -> T {
        self.tasks.iter().map(|r| r.loss).sum()
    }

    pub fn errors(&self) -> usize {
        self.tasks.iter().filter(|r| r.prediction != r.label).count()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommSummary {
    pub total_messages: usize,
    pub total_reals_transferred: usize,
    pub sync_rounds: usize,
    pub skipped_broadcasts: usize,
    pub uploads: usize,
    pub downloads: usize,
}

pub fn communication_summary<T: Scalar>(traces: &[RoundTrace<T>]) -> CommSummary {
    let mut s = CommSummary::default();
    for tr in traces {
        s.sync_rounds += usize::from(tr.sync_round);
        s.skipped_broadcasts += tr.skipped;
        for msg in &tr.messages {
            s.total_messages += 1;
            s.total_reals_transferred += msg.payload_size;
            match msg.kind {
                MessageKind::DualUpload => s.uploads += 1,
                MessageKind::SpectralBroadcast => s.downloads += 1,
            }
        }
    }
    s
}

/// Summed idle time across workers and rounds.
pub fn total_idle<T: Scalar>(traces: &[RoundTrace<T>]) -> f64 {
    traces
        .iter()
        .flat_map(|t| &t.tasks)
        .map(|r| r.idle)
        .sum()
}
