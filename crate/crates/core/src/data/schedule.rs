use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{DataError, MultiTaskStream};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamOrder {
    /// File order. Without `wrap`, running past the end of a task is an error.
    Sequential { wrap: bool },
    /// Each task is visited in a seeded random permutation, reshuffled on
    /// every pass.
    Shuffled,
}

impl FromStr for StreamOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shuffled" => Ok(StreamOrder::Shuffled),
            "sequential" => Ok(StreamOrder::Sequential { wrap: true }),
            "sequential_nowrap" => Ok(StreamOrder::Sequential { wrap: false }),
            other => Err(format!(
                "unknown stream order `{other}` (expected shuffled, sequential or sequential_nowrap)"
            )),
        }
    }
}

impl fmt::Display for StreamOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamOrder::Shuffled => "shuffled",
            StreamOrder::Sequential { wrap: true } => "sequential",
            StreamOrder::Sequential { wrap: false } => "sequential_nowrap",
        })
    }
}

struct Cursor {
    order: Vec<usize>,
    pos: usize,
    passes: usize,
    rng: ChaCha8Rng,
}

/// Yields one example index per task per round.
pub struct RoundSchedule {
    order: StreamOrder,
    names: Vec<String>,
    cursors: Vec<Cursor>,
}

impl RoundSchedule {
    pub fn new<T: Scalar>(stream: &MultiTaskStream<T>, order: StreamOrder, seed: u64) -> Self {
        let cursors = stream
            .tasks()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let mut idx: Vec<usize> = (0..t.len()).collect();
                if order == StreamOrder::Shuffled {
                    idx.shuffle(&mut rng);
                }
                Cursor {
                    order: idx,
                    pos: 0,
                    passes: 0,
                    rng,
                }
            })
            .collect();
        RoundSchedule {
            order,
            names: stream.tasks().iter().map(|t| t.name.clone()).collect(),
            cursors,
        }
    }

    /// Example indices for the next round, one per task.
    pub fn next_round(&mut self) -> Result<Vec<usize>, DataError> {
        let mut out = Vec::with_capacity(self.cursors.len());
        for (i, c) in self.cursors.iter_mut().enumerate() {
            if c.pos == c.order.len() {
                match self.order {
                    StreamOrder::Sequential { wrap: false } => {
                        return Err(DataError::StreamExhausted {
                            task: self.names[i].clone(),
                            len: c.order.len(),
                        })
                    }
                    StreamOrder::Sequential { wrap: true } => {}
                    StreamOrder::Shuffled => c.order.shuffle(&mut c.rng),
                }
                c.pos = 0;
                c.passes += 1;
                log::info!(
                    "task `{}` wrapped after {} examples (pass {})",
                    self.names[i],
                    c.order.len(),
                    c.passes + 1
                );
            }
            out.push(c.order[c.pos]);
            c.pos += 1;
        }
        Ok(out)
    }

    /// The first `rounds` rounds, round-major.
    pub fn take(mut self, rounds: usize) -> Result<Vec<Vec<usize>>, DataError> {
        (0..rounds).map(|_| self.next_round()).collect()
    }
}
