//! Online error rate and F1, empirical regret against an offline comparator,
//! and the theoretical bounds evaluated on a run's constants.

mod comparator;
mod regret;

use std::io::Write;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::losses::{Label, LossError};
use crate::optimizer::{regret_bound, BoundParams, BoundVariant, OptimError};
use crate::simnet::RoundTrace;
use crate::Scalar;

pub use comparator::{offline_comparator, visit_counts, Comparator, ComparatorOpts};
pub use regret::{empirical_regret, loglog_slope, regret_slope, run_diagnostics, Diagnostics};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no predictions recorded")]
    Empty,
    #[error("trace does not match the stream: {0}")]
    Misaligned(String),
    #[error("comparator input too large: {0}")]
    TooLarge(String),
    #[error("need at least two positive points to fit a slope, got {0}")]
    TooFewPoints(usize),
    #[error("regret is not positive at round {round}; a log-log fit is undefined")]
    NonPositiveRegret { round: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Binary confusion counts with `+1` as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionState {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionState {
    pub fn record(&mut self, prediction: Label, label: Label) {
        match (prediction, label) {
            (Label::Pos, Label::Pos) => self.tp += 1,
            (Label::Pos, Label::Neg) => self.fp += 1,
            (Label::Neg, Label::Neg) => self.tn += 1,
            (Label::Neg, Label::Pos) => self.fn_ += 1,
        }
    }

    pub fn n(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&self, other: &ConfusionState) -> ConfusionState {
        ConfusionState {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

/// `(fp + fn) / n`.
pub fn cumulative_error_rate(cs: &ConfusionState) -> Result<f64, MetricsError> {
    match cs.n() {
        0 => Err(MetricsError::Empty),
        n => Ok((cs.fp + cs.fn_) as f64 / n as f64),
    }
}

/// Harmonic mean of precision and recall; zero when there are no true
/// positives.
pub fn f1(cs: &ConfusionState) -> f64 {
    if cs.tp == 0 {
        return 0.0;
    }
    let tp = cs.tp as f64;
    let prec = tp / (cs.tp + cs.fp) as f64;
    let rec = tp / (cs.tp + cs.fn_) as f64;
    2.0 * prec * rec / (prec + rec)
}

/// One row of the per-round metrics table.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    pub cum_error_rate: f64,
    /// F1 over the pooled confusion counts of all tasks.
    pub f1_micro: f64,
    pub regret: Option<f64>,
    pub bound_thm1: f64,
    pub bound_thm2: f64,
    /// Mean of per-task F1.
    pub f1_macro: f64,
}

pub const METRICS_HEADER: [&str; 7] = [
    "t",
    "cum_error_rate",
    "f1_micro",
    "regret",
    "bound_thm1",
    "bound_thm2",
    "f1_macro",
];

/// Per-round curves. `regret`, when given, must have one entry per trace.
pub fn metric_rows<T: Scalar>(
    traces: &[RoundTrace<T>],
    regret: Option<&[T]>,
    bounds: &BoundParams<T>,
    lambda: T,
    rho: T,
) -> Result<Vec<MetricsRow>, MetricsError> {
    if let Some(r) = regret {
        if r.len() != traces.len() {
            return Err(MetricsError::Misaligned(format!(
                "{} regret values for {} rounds",
                r.len(),
                traces.len()
            )));
        }
    }
    let m = traces.first().map_or(0, |t| t.tasks.len());
    let mut per_task = vec![ConfusionState::default(); m];
    let mut rows = Vec::with_capacity(traces.len());
    for (k, tr) in traces.iter().enumerate() {
        if tr.tasks.len() != m {
            return Err(MetricsError::Misaligned(format!(
                "round {} has {} tasks, expected {m}",
                tr.round,
                tr.tasks.len()
            )));
        }
        for (cs, r) in per_task.iter_mut().zip(&tr.tasks) {
            cs.record(r.prediction, r.label);
        }
        let pooled = per_task
            .iter()
            .fold(ConfusionState::default(), |a, b| a.merge(b));
        let f1_macro = per_task.iter().map(f1).sum::<f64>() / m as f64;
        rows.push(MetricsRow {
            t: tr.round,
            cum_error_rate: cumulative_error_rate(&pooled)?,
            f1_micro: f1(&pooled),
            regret: regret.map(|r| r[k].to_f64_lossy()),
            bound_thm1: regret_bound(bounds, lambda, rho, tr.round, BoundVariant::Thm1)?
                .to_f64_lossy(),
            bound_thm2: regret_bound(bounds, lambda, rho, tr.round, BoundVariant::Thm2)?
                .to_f64_lossy(),
            f1_macro,
        });
    }
    Ok(rows)
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.cum_error_rate.to_string(),
            r.f1_micro.to_string(),
            r.regret.map(|x| x.to_string()).unwrap_or_default(),
            r.bound_thm1.to_string(),
            r.bound_thm2.to_string(),
            r.f1_macro.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Final cumulative error rate of a run.
pub fn final_error_rate<T: Scalar>(traces: &[RoundTrace<T>]) -> Result<f64, MetricsError> {
    let mut cs = ConfusionState::default();
    for r in traces.iter().flat_map(|t| &t.tasks) {
        cs.record(r.prediction, r.label);
    }
    cumulative_error_rate(&cs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionState {
        ConfusionState { tp, fp, tn, fn_ }
    }

    #[test]
    fn error_rate_examples() {
        assert_eq!(cumulative_error_rate(&cs(4, 1, 4, 1)).unwrap(), 0.2);
        assert_eq!(cumulative_error_rate(&cs(3, 0, 2, 0)).unwrap(), 0.0);
        assert_eq!(cumulative_error_rate(&cs(0, 3, 0, 2)).unwrap(), 1.0);
        assert!(matches!(
            cumulative_error_rate(&ConfusionState::default()),
            Err(MetricsError::Empty)
        ));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(&cs(1, 0, 0, 0)), 1.0);
        assert_eq!(f1(&cs(0, 5, 3, 2)), 0.0);
        assert_eq!(f1(&cs(1, 1, 0, 1)), 0.5);
    }

    #[test]
    fn record_counts() {
        let mut c = ConfusionState::default();
        c.record(Label::Pos, Label::Pos);
        c.record(Label::Pos, Label::Neg);
        c.record(Label::Neg, Label::Pos);
        c.record(Label::Neg, Label::Neg);
        assert_eq!(c, cs(1, 1, 1, 1));
        assert_eq!(c.n(), 4);
    }
}
