//! Multi-task example streams: ingestion, synthetic generation, label noise
//! and round scheduling.

mod format;
mod noise;
mod schedule;
mod synth;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::SparseVec;
use crate::losses::Label;
use crate::Scalar;

pub use format::{load_manifest, parse_task_file, write_dataset, write_task_file};
pub use noise::{inject_label_noise, inject_label_noise_per_task};
pub use schedule::{RoundSchedule, StreamOrder};
pub use synth::{generate_synthetic, SynthSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {msg}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{}: task file has no examples", .0.display())]
    EmptyTask(PathBuf),
    #[error("{}: manifest lists no task files", .0.display())]
    EmptyManifest(PathBuf),
    #[error("dimension override {requested} is smaller than the largest feature index {needed}")]
    DimensionTooSmall { requested: usize, needed: usize },
    #[error("rank {rank} must lie in 1..={max}")]
    Rank { rank: usize, max: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("noise probability {0} outside [0, 1]")]
    InvalidProb(f64),
    #[error("expected {expected} per-task noise probabilities, got {found}")]
    TaskCountMismatch { expected: usize, found: usize },
    #[error("task `{task}` exhausted after {len} examples")]
    StreamExhausted { task: String, len: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example<T> {
    pub x: SparseVec<T>,
    pub label: Label,
    /// Set when the label was flipped by noise injection.
    pub flipped: bool,
}

impl<T: Scalar> Example<T> {
    /// Label before any noise injection.
    pub fn clean_label(&self) -> Label {
        if self.flipped {
            self.label.flipped()
        } else {
            self.label
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskData<T> {
    pub name: String,
    pub examples: Vec<Example<T>>,
}

impl<T> TaskData<T> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// `m` example sequences sharing one feature dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiTaskStream<T> {
    dim: usize,
    tasks: Vec<TaskData<T>>,
}

impl<T: Scalar> MultiTaskStream<T> {
    /// Checks that every task is nonempty and every feature fits in `dim`.
    pub fn new(dim: usize, tasks: Vec<TaskData<T>>) -> Result<Self, DataError> {
        if tasks.is_empty() {
            return Err(DataError::InvalidSpec("stream has no tasks".into()));
        }
        for t in &tasks {
            if t.is_empty() {
                return Err(DataError::EmptyTask(PathBuf::from(&t.name)));
            }
            if let Some(bad) = t.examples.iter().find(|e| e.x.dim() != dim) {
                return Err(DataError::InvalidSpec(format!(
                    "task `{}` has a feature vector of dimension {} (expected {dim})",
                    t.name,
                    bad.x.dim()
                )));
            }
        }
        Ok(MultiTaskStream { dim, tasks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.tasks.len()
    }

    pub fn tasks(&self) -> &[TaskData<T>] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> &TaskData<T> {
        &self.tasks[i]
    }

    pub fn example(&self, task: usize, index: usize) -> Option<&Example<T>> {
        self.tasks.get(task)?.examples.get(index)
    }

    pub fn total_examples(&self) -> usize {
        self.tasks.iter().map(TaskData::len).sum()
    }

    /// Largest `‖x‖₂` over all examples; the Lipschitz constant of both
    /// margin losses.
    pub fn max_feature_norm(&self) -> T {
        self.tasks
            .iter()
            .flat_map(|t| &t.examples)
            .fold(T::zero(), |acc, e| acc.max(e.x.norm2()))
    }

    pub fn flipped_count(&self) -> usize {
        self.tasks
            .iter()
            .flat_map(|t| &t.examples)
            .filter(|e| e.flipped)
            .count()
    }

    pub(crate) fn tasks_mut(&mut self) -> &mut [TaskData<T>] {
        &mut self.tasks
    }
}
