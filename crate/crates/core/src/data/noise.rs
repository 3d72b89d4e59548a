use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{DataError, MultiTaskStream};
use crate::Scalar;

/// Flips each label independently with probability `prob`.
///
/// Draws one uniform per example in task-major order, so for a fixed seed a
/// larger `prob` only ever adds flips.
pub fn inject_label_noise<T: Scalar>(
    stream: &MultiTaskStream<T>,
    prob: f64,
    seed: u64,
) -> Result<MultiTaskStream<T>, DataError> {
    inject_label_noise_per_task(stream, &vec![prob; stream.m()], seed)
}

/// As [`inject_label_noise`] with a separate probability per task.
pub fn inject_label_noise_per_task<T: Scalar>(
    stream: &MultiTaskStream<T>,
    probs: &[f64],
    seed: u64,
) -> Result<MultiTaskStream<T>, DataError> {
    if probs.len() != stream.m() {
        return Err(DataError::TaskCountMismatch {
            expected: stream.m(),
            found: probs.len(),
        });
    }
    if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(DataError::InvalidProb(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = stream.clone();
    for (task, &p) in out.tasks_mut().iter_mut().zip(probs) {
        for e in &mut task.examples {
            let u: f64 = rng.random();
            if u < p {
                e.label = e.label.flipped();
                e.flipped = !e.flipped;
            }
        }
    }
    Ok(out)
}
