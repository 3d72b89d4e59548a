use std::io::Write;

use crate::losses::Label;
use crate::simnet::RoundTrace;
use crate::Scalar;

pub const TRACE_HEADER: [&str; 10] = [
    "t",
    "task",
    "loss",
    "gamma",
    "prediction",
    "label",
    "update_applied",
    "sigma1",
    "msgs_in",
    "msgs_out",
];

fn sign(l: Label) -> &'static str {
    match l {
        Label::Pos => "1",
        Label::Neg => "-1",
    }
}

/// One row per (round, task), round-major. `sigma1` is empty on rounds where
/// the task's spectral step did not run.
pub fn write_trace_csv<T: Scalar, W: Write>(
    traces: &[RoundTrace<T>],
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for tr in traces {
        for (i, r) in tr.tasks.iter().enumerate() {
            w.write_record([
                tr.round.to_string(),
                i.to_string(),
                r.loss.to_string(),
                r.gamma.to_string(),
                sign(r.prediction).to_string(),
                sign(r.label).to_string(),
                u8::from(r.update_applied).to_string(),
                r.sigma1.map(|s| s.to_string()).unwrap_or_default(),
                r.msgs_in.to_string(),
                r.msgs_out.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
