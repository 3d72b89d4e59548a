use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::experiment::run::mean_std;
use crate::experiment::ExperimentError;
use crate::metrics::regret_slope;

#[derive(Clone, Debug, PartialEq)]
pub struct ReportSummary {
    pub curves: PathBuf,
    pub seeds: usize,
    pub rounds: usize,
    /// Log-log slope of the mean regret curve, when it could be fitted.
    pub regret_slope: Option<f64>,
}

struct SeedCurve {
    t: Vec<usize>,
    err: Vec<f64>,
    f1_micro: Vec<f64>,
    f1_macro: Vec<f64>,
    regret: Option<Vec<f64>>,
}

fn read_metrics(path: &Path) -> Result<SeedCurve, ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |msg: String| ExperimentError::Config(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (ct, ce, cf, cr, cm) = (
        col("t")?,
        col("cum_error_rate")?,
        col("f1_micro")?,
        col("regret")?,
        col("f1_macro")?,
    );
    let mut c = SeedCurve {
        t: Vec::new(),
        err: Vec::new(),
        f1_micro: Vec::new(),
        f1_macro: Vec::new(),
        regret: Some(Vec::new()),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: bad number `{}`", line + 2, field(i))))
        };
        c.t.push(
            field(ct)
                .parse()
                .map_err(|_| bad(format!("row {}: bad round `{}`", line + 2, field(ct))))?,
        );
        c.err.push(num(ce)?);
        c.f1_micro.push(num(cf)?);
        c.f1_macro.push(num(cm)?);
        if field(cr).is_empty() {
            c.regret = None;
        } else if let Some(v) = c.regret.as_mut() {
            v.push(num(cr)?);
        }
    }
    Ok(c)
}

fn metrics_files(dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let entries = fs::read_dir(dir).map_err(ExperimentError::io(dir))?;
    let mut files = Vec::new();
    for e in entries {
        let p = e.map_err(ExperimentError::io(dir))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("metrics_") && name.ends_with(".csv") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Aggregates every `metrics_<seed>.csv` in `dir` into `curves.csv`
/// (mean and sample std per round) and `regret_slope.txt`.
pub fn cmd_report(dir: &Path) -> Result<ReportSummary, ExperimentError> {
    let files = metrics_files(dir)?;
    if files.is_empty() {
        return Err(ExperimentError::Config(format!(
            "{}: no metrics_*.csv files",
            dir.display()
        )));
    }
    let curves: Vec<SeedCurve> = files
        .iter()
        .map(|f| read_metrics(f))
        .collect::<Result<_, _>>()?;
    let rounds = curves[0].t.len();
    if let Some((f, _)) = files.iter().zip(&curves).find(|(_, c)| c.t != curves[0].t) {
        return Err(ExperimentError::Config(format!(
            "{}: rounds differ from {}",
            f.display(),
            files[0].display()
        )));
    }
    let regrets: Option<Vec<&Vec<f64>>> = curves.iter().map(|c| c.regret.as_ref()).collect();

    let path = dir.join("curves.csv");
    let csv_err = |source| ExperimentError::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record([
        "t",
        "cum_error_rate_mean",
        "cum_error_rate_std",
        "f1_micro_mean",
        "f1_micro_std",
        "f1_macro_mean",
        "f1_macro_std",
        "regret_mean",
    ])
    .map_err(csv_err)?;
    let mut mean_regret = Vec::with_capacity(rounds);
    for k in 0..rounds {
        let stat = |get: fn(&SeedCurve) -> &Vec<f64>| {
            let xs: Vec<f64> = curves.iter().map(|c| get(c)[k]).collect();
            mean_std(&xs)
        };
        let (em, es) = stat(|c| &c.err);
        let (fm, fs_) = stat(|c| &c.f1_micro);
        let (mm, ms) = stat(|c| &c.f1_macro);
        let reg = regrets.as_ref().map(|rs| {
            let r = rs.iter().map(|r| r[k]).sum::<f64>() / rs.len() as f64;
            mean_regret.push(r);
            r.to_string()
        });
        w.write_record([
            curves[0].t[k].to_string(),
            em.to_string(),
            es.to_string(),
            fm.to_string(),
            fs_.to_string(),
            mm.to_string(),
            ms.to_string(),
            reg.unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(ExperimentError::io(&path))?;

    let (slope, text) = if regrets.is_none() {
        (None, "undefined (no regret column)".to_string())
    } else {
        match regret_slope(&mean_regret) {
            Ok(s) => (Some(s), s.to_string()),
            Err(e) => (None, format!("undefined ({e})")),
        }
    };
    let slope_path = dir.join("regret_slope.txt");
    let mut f = fs::File::create(&slope_path).map_err(ExperimentError::io(&slope_path))?;
    writeln!(f, "{text}").map_err(ExperimentError::io(&slope_path))?;

    Ok(ReportSummary {
        curves: path,
        seeds: curves.len(),
        rounds,
        regret_slope: slope,
    })
}
