use crate::data::MultiTaskStream;
use crate::linalg::Mat;
use crate::losses::{loss_value, LossKind};
use crate::metrics::MetricsError;
use crate::optimizer::{HyperParams, Reweighting};
use crate::simnet::RoundTrace;
use crate::Scalar;

/// `R_t = Σ_{s≤t} [F_s(W_s) − F_s(W*)]`, using the raw convex losses
/// recorded in the trace.
pub fn empirical_regret<T: Scalar>(
    traces: &[RoundTrace<T>],
    w_star: &Mat<T>,
    stream: &MultiTaskStream<T>,
    loss: LossKind,
) -> Result<Vec<T>, MetricsError> {
    if w_star.cols() != stream.m() || w_star.rows() != stream.dim() {
        return Err(MetricsError::Misaligned(format!(
            "comparator is {}x{}, stream needs {}x{}",
            w_star.rows(),
            w_star.cols(),
            stream.dim(),
            stream.m()
        )));
    }
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(traces.len());
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
            let ex = stream.example(i, r.example).ok_or_else(|| {
                MetricsError::Misaligned(format!("task {i} has no example {}", r.example))
            })?;
            if ex.label != r.label {
                return Err(MetricsError::Misaligned(format!(
                    "round {}, task {i}: label differs from the stream",
                    tr.round
                )));
            }
            acc += r.loss - loss_value(loss, w_star.col(i), &ex.x, ex.label)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64, MetricsError> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return Err(MetricsError::TooFewPoints(logs.len()));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(MetricsError::TooFewPoints(1));
    }
    Ok(sxy / sxx)
}

/// Slope of `ln R_t` against `ln t` over the last half of the rounds, where
/// `regret[k]` belongs to round `k + 1`.
pub fn regret_slope<T: Scalar>(regret: &[T]) -> Result<f64, MetricsError> {
    let start = regret.len() / 2;
    let mut pts = Vec::with_capacity(regret.len() - start);
    for (k, r) in regret.iter().enumerate().skip(start) {
        let r = r.to_f64_lossy();
        if !(r > 0.0) {
            return Err(MetricsError::NonPositiveRegret { round: k + 1 });
        }
        pts.push(((k + 1) as f64, r));
    }
    loglog_slope(&pts)
}

/// Measured constants for the regret bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics<T> {
    /// `2·max(max_t ‖W_t‖_F, ‖W*‖_F)`: a ball of this diameter holds every
    /// iterate and the comparator.
    pub diameter: T,
    /// Largest possible example weight.
    pub kappa: T,
    /// Largest feature norm, the Lipschitz constant of both losses.
    pub beta: T,
}

pub fn run_diagnostics<T: Scalar>(
    traces: &[RoundTrace<T>],
    w_star: Option<&Mat<T>>,
    stream: &MultiTaskStream<T>,
    hp: &HyperParams<T>,
) -> Diagnostics<T> {
    let iterates = traces
        .iter()
        .fold(T::zero(), |acc, t| acc.max(t.w_frobenius));
    let radius = w_star.map_or(iterates, |w| iterates.max(w.frobenius_norm()));
    Diagnostics {
        diameter: T::lit(2.0) * radius,
        kappa: match hp.reweighting {
            Reweighting::CappedLp => hp.robust.kappa(),
            Reweighting::Disabled => T::one(),
        },
        beta: stream.max_feature_norm(),
    }
}
