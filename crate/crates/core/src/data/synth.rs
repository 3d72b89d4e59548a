use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{DataError, Example, MultiTaskStream, TaskData};
use crate::linalg::{normalize, Mat, SparseVec};
use crate::losses::Label;
use crate::Scalar;

/// Low-rank synthetic task set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub m: usize,
    pub d: usize,
    pub rank: usize,
    /// Examples per task.
    pub samples: usize,
    /// Examples with `|⟨wⁱ, x⟩| < margin` are redrawn.
    pub margin: f64,
    pub seed: u64,
}

const MAX_DRAWS_PER_SAMPLE: usize = 10_000;

impl SynthSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.m == 0 || self.d == 0 {
            return Err(DataError::InvalidSpec("m and d must be positive".into()));
        }
        let max = self.m.min(self.d);
        if self.rank == 0 || self.rank > max {
            return Err(DataError::Rank {
                rank: self.rank,
                max,
            });
        }
        if self.samples == 0 {
            return Err(DataError::InvalidSpec("samples must be positive".into()));
        }
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(DataError::InvalidSpec(format!(
                "margin must be a finite nonnegative number, got {}",
                self.margin
            )));
        }
        Ok(())
    }
}

/// Draws `W_true = L·Rᵀ` (Gaussian factors, columns rescaled to unit norm)
/// and, per task, Gaussian features labelled by `sign(⟨wⁱ_true, x⟩)`.
pub fn generate_synthetic<T: Scalar>(
    spec: &SynthSpec,
) -> Result<(MultiTaskStream<T>, Mat<T>), DataError> {
    spec.validate()?;
    let SynthSpec {
        m, d, rank, samples, ..
    } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };

    let l: Vec<f64> = (0..d * rank).map(|_| gauss()).collect();
    let r: Vec<f64> = (0..m * rank).map(|_| gauss()).collect();
    let mut columns = Vec::with_capacity(m);
    for i in 0..m {
        let mut col: Vec<f64> = (0..d)
            .map(|k| (0..rank).map(|j| l[k * rank + j] * r[i * rank + j]).sum())
            .collect();
        if normalize(&mut col) == 0.0 {
            return Err(DataError::InvalidSpec(format!("task {i} drew a zero weight vector")));
        }
        columns.push(col);
    }

    let width = (m - 1).to_string().len();
    let mut tasks = Vec::with_capacity(m);
    for (i, w) in columns.iter().enumerate() {
        let mut examples = Vec::with_capacity(samples);
        let mut draws = 0usize;
        while examples.len() < samples {
            draws += 1;
            if draws > MAX_DRAWS_PER_SAMPLE * samples {
                return Err(DataError::InvalidSpec(format!(
                    "margin {} rejects nearly every draw",
                    spec.margin
                )));
            }
            let x: Vec<f64> = (0..d).map(|_| gauss()).collect();
            let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            if z.abs() < spec.margin {
                continue;
            }
            let xt: Vec<T> = x.into_iter().map(T::lit).collect();
            examples.push(Example {
                x: SparseVec::from_dense(&xt),
                label: if z >= 0.0 { Label::Pos } else { Label::Neg },
                flipped: false,
            });
        }
        tasks.push(TaskData {
            name: format!("task{i:0width$}.txt"),
            examples,
        });
    }
    let cols_t: Vec<Vec<T>> = columns
        .into_iter()
        .map(|c| c.into_iter().map(T::lit).collect())
        .collect();
    let w_true = Mat::from_columns(&cols_t).expect("columns share length d");
    Ok((MultiTaskStream::new(d, tasks)?, w_true))
}
