use crate::data::MultiTaskStream;
use crate::linalg::{dot, full_svd, Mat, SparseVec, ORACLE_MAX_DIM};
use crate::losses::{margin_loss, LossKind};
use crate::metrics::MetricsError;
use crate::simnet::RoundTrace;
use crate::Scalar;

const MAX_TOTAL_EXAMPLES: usize = 50_000;
const MAX_PARAMS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparatorOpts<T> {
    /// Nuclear norm ball radius.
    pub radius: T,
    pub max_iter: usize,
    /// Stop once consecutive objectives differ by less than this fraction.
    pub rel_tol: T,
}

impl<T: Scalar> ComparatorOpts<T> {
    pub fn new(radius: T, max_iter: usize) -> Self {
        ComparatorOpts {
            radius,
            max_iter,
            rel_tol: T::lit(1e-6),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparator<T> {
    pub w_star: Mat<T>,
    /// Objective at `w_star`.
    pub objective: T,
    pub iterations: usize,
    /// False when the budget ran out first.
    pub converged: bool,
    /// Best objective so far, one entry per iteration.
    pub history: Vec<T>,
}

/// How often each example was visited by a run.
pub fn visit_counts<T: Scalar>(
    traces: &[RoundTrace<T>],
    stream: &MultiTaskStream<T>,
) -> Result<Vec<Vec<usize>>, MetricsError> {
    let mut counts: Vec<Vec<usize>> = stream.tasks().iter().map(|t| vec![0; t.len()]).collect();
    for tr in traces {
        if tr.tasks.len() != stream.m() {
            return Err(MetricsError::Misaligned(format!(
                "round {} has {} tasks, stream has {}",
                tr.round,
                tr.tasks.len(),
                stream.m()
            )));
        }
        for (i, r) in tr.tasks.iter().enumerate() {
            let c = counts[i].get_mut(r.example).ok_or_else(|| {
                MetricsError::Misaligned(format!("task {i} has no example {}", r.example))
            })?;
            *c += 1;
        }
    }
    Ok(counts)
}

struct Objective<'a, T> {
    stream: &'a MultiTaskStream<T>,
    weights: Option<&'a [Vec<usize>]>,
    loss: LossKind,
}

impl<T: Scalar> Objective<'_, T> {
    fn weighted(&self, i: usize) -> impl Iterator<Item = (T, &SparseVec<T>, crate::losses::Label)> {
        let w = self.weights.map(|w| &w[i]);
        self.stream
            .task(i)
            .examples
            .iter()
            .enumerate()
            .filter_map(move |(k, e)| {
                let c = w.map_or(1, |w| w[k]);
                (c > 0).then(|| (T::from_usize_lossy(c), &e.x, e.label))
            })
    }

    /// Objective value and (sub)gradient.
    fn eval(&self, w: &Mat<T>) -> Result<(T, Mat<T>), MetricsError> {
        let mut total = T::zero();
        let mut grad = Mat::zeros(w.rows(), w.cols());
        for i in 0..w.cols() {
            let col = w.col(i);
            let mut g = vec![T::zero(); col.len()];
            for (c, x, y) in self.weighted(i) {
                let (l, coeff) = margin_loss(self.loss, col, x, y)?;
                total += c * l;
                for (k, v) in x.iter() {
                    g[k] += c * coeff * v;
                }
            }
            grad.set_col(i, &g);
        }
        Ok((total, grad))
    }

    fn value(&self, w: &Mat<T>) -> Result<T, MetricsError> {
        let mut total = T::zero();
        for i in 0..w.cols() {
            for (c, x, y) in self.weighted(i) {
                total += c * margin_loss(self.loss, w.col(i), x, y)?.0;
            }
        }
        Ok(total)
    }

    /// Largest eigenvalue of the weighted per-task scatter `Σ c·x xᵀ`, maxed
    /// over tasks: a Lipschitz constant for the logistic gradient (times 4).
    fn scatter_norm(&self, d: usize) -> T {
        let mut best = T::zero();
        for i in 0..self.stream.m() {
            let mut v = vec![T::one(); d];
            let mut lam = T::zero();
            for _ in 0..200 {
                let mut next = vec![T::zero(); d];
                for (c, x, _) in self.weighted(i) {
                    let s = c * x.dot_dense(&v);
                    for (k, val) in x.iter() {
                        next[k] += s * val;
                    }
                }
                let n = dot(&next, &next).sqrt();
                if n == T::zero() {
                    break;
                }
                let prev = lam;
                lam = n / dot(&v, &v).sqrt();
                next.iter_mut().for_each(|x| *x /= n);
                v = next;
                if (lam - prev).abs() <= T::lit(1e-6) * lam {
                    break;
                }
            }
            best = best.max(lam);
        }
        // Power iteration approaches from below; pad to stay an upper bound.
        best * T::lit(1.05)
    }
}

/// Euclidean projection onto `{W : ‖W‖_* ≤ radius}`.
fn project_nuclear<T: Scalar>(w: &Mat<T>, radius: T) -> Result<Mat<T>, MetricsError> {
    if radius == T::zero() {
        return Ok(Mat::zeros(w.rows(), w.cols()));
    }
    let mut svd = full_svd(w)?;
    let total: T = svd.sigma.iter().copied().sum();
    if total <= radius {
        return Ok(w.clone());
    }
    // Project the spectrum onto the simplex of mass `radius`.
    let mut sorted = svd.sigma.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        let cand = (cum - radius) / T::from_usize_lossy(k + 1);
        if s - cand > T::zero() {
            theta = cand;
        }
    }
    for s in svd.sigma.iter_mut() {
        *s = (*s - theta).max(T::zero());
    }
    Ok(svd.reconstruct())
}

/// Best fixed `W` in hindsight over the nuclear norm ball.
///
/// Logistic loss uses accelerated projected gradient with step `1/L`; hinge
/// uses projected subgradient steps `radius/(‖g‖√k)`. Both keep the best
/// iterate. With `counts`, example `k` of task `i` carries weight
/// `counts[i][k]`, so the objective is exactly the run's cumulative loss.
pub fn offline_comparator<T: Scalar>(
    stream: &MultiTaskStream<T>,
    counts: Option<&[Vec<usize>]>,
    loss: LossKind,
    opts: &ComparatorOpts<T>,
) -> Result<Comparator<T>, MetricsError> {
    let (d, m) = (stream.dim(), stream.m());
    if d * m > MAX_PARAMS || d.min(m) > ORACLE_MAX_DIM {
        return Err(MetricsError::TooLarge(format!("d·m = {} exceeds {MAX_PARAMS}", d * m)));
    }
    if stream.total_examples() > MAX_TOTAL_EXAMPLES {
        return Err(MetricsError::TooLarge(format!(
            "{} examples exceed {MAX_TOTAL_EXAMPLES}",
            stream.total_examples()
        )));
    }
    if let Some(c) = counts {
        if c.len() != m || c.iter().zip(stream.tasks()).any(|(c, t)| c.len() != t.len()) {
            return Err(MetricsError::Misaligned("visit counts do not match the stream".into()));
        }
    }
    if !(opts.radius >= T::zero()) {
        return Err(MetricsError::Misaligned(format!("radius {} is negative", opts.radius)));
    }
    let obj = Objective {
        stream,
        weights: counts,
        loss,
    };

    let mut best = Mat::zeros(d, m);
    let mut best_f = obj.value(&best)?;
    let mut history = Vec::with_capacity(opts.max_iter);
    let mut converged = opts.radius == T::zero() || best_f == T::zero();
    let mut iterations = 0;
    if converged {
        return Ok(Comparator {
            w_star: best,
            objective: best_f,
            iterations,
            converged,
            history,
        });
    }

    let lipschitz = obj.scatter_norm(d) * T::lit(0.25);
    let mut w = best.clone();
    let mut y = w.clone();
    let mut momentum = T::one();
    let mut prev_f = best_f;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = match loss {
            LossKind::Logistic => {
                if lipschitz == T::zero() {
                    converged = true;
                    break;
                }
                let (_, g) = obj.eval(&y)?;
                let stepped = y.sub(&g.scaled(lipschitz.recip()))?;
                project_nuclear(&stepped, opts.radius)?
            }
            LossKind::Hinge => {
                let (_, g) = obj.eval(&w)?;
                let gn = g.frobenius_norm();
                if gn == T::zero() {
                    converged = true;
                    break;
                }
                let step = opts.radius / (gn * T::from_usize_lossy(iterations).sqrt());
                project_nuclear(&w.sub(&g.scaled(step))?, opts.radius)?
            }
        };
        let f = obj.value(&next)?;
        if loss == LossKind::Logistic {
            let m_next = (T::one() + (T::one() + T::lit(4.0) * momentum * momentum).sqrt()) / T::lit(2.0);
            let beta = (momentum - T::one()) / m_next;
            y = Mat::from_fn(d, m, |r, c| {
                next.get(r, c) + beta * (next.get(r, c) - w.get(r, c))
            });
            momentum = m_next;
        }
        w = next;
        if f < best_f {
            best_f = f;
            best = w.clone();
        }
        history.push(best_f);
        if best_f == T::zero() || (f - prev_f).abs() <= opts.rel_tol * f.abs() {
            converged = true;
            break;
        }
        prev_f = f;
    }
    if !converged {
        log::warn!(
            "comparator stopped after {iterations} iterations without reaching relative tolerance {}",
            opts.rel_tol
        );
    }
    Ok(Comparator {
        w_star: best,
        objective: best_f,
        iterations,
        converged,
        history,
    })
}
