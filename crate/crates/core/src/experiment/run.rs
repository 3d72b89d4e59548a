use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{
    generate_synthetic, inject_label_noise, inject_label_noise_per_task, load_manifest,
    write_dataset, MultiTaskStream, SynthSpec,
};
use crate::experiment::config::{apply_overrides, parse_config, DataSource, ExperimentConfig};
use crate::experiment::ExperimentError;
use crate::linalg::PowerOpts;
use crate::losses::RobustParams;
use crate::metrics::{
    empirical_regret, f1, metric_rows, offline_comparator, run_diagnostics, visit_counts,
    write_metrics_csv, ComparatorOpts, ConfusionState,
};
use crate::optimizer::{BoundParams, EtaSchedule, HyperParams, Reweighting};
use crate::simnet::{
    communication_summary, total_idle, write_trace_csv, Algorithm, RoundTrace, SimConfig,
    Simulator,
};
use crate::topology::build_topology;

// Keeps label noise independent of the synthetic draw under the same seed.
const NOISE_SALT: u64 = 0x6e6f_6973_655f_7365;

/// Command-line adjustments applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub overrides: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub final_error_rate: f64,
    pub f1_micro: f64,
    pub f1_macro: f64,
    pub regret: Option<f64>,
    pub total_messages: usize,
    pub total_idle: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub output: PathBuf,
    pub seeds: Vec<SeedOutcome>,
}

fn load_config(path: &Path, opts: &RunOptions) -> Result<ExperimentConfig, ExperimentError> {
    let src = fs::read_to_string(path).map_err(|e| {
        ExperimentError::Config(format!("{}: cannot read config: {e}", path.display()))
    })?;
    let name = path.display().to_string();
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cfg = if opts.overrides.is_empty() {
        parse_config(&src, &name, base)?
    } else {
        let merged = apply_overrides(&src, &opts.overrides)?;
        parse_config(&merged, &format!("{name} (with overrides)"), base)?
    };
    if let Some(s) = opts.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &opts.out {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

/// The (noisy) stream one seed runs on.
pub fn build_stream(cfg: &ExperimentConfig, seed: u64) -> Result<MultiTaskStream<f64>, ExperimentError> {
    let clean = match &cfg.data {
        DataSource::Manifest { path, dim } => load_manifest(path, *dim)?,
        synth @ DataSource::Synth { .. } => {
            generate_synthetic(&synth.synth_spec(seed).expect("synth source"))?.0
        }
    };
    let noise_seed = seed ^ NOISE_SALT;
    Ok(match &cfg.noise_per_task {
        Some(p) => inject_label_noise_per_task(&clean, p, noise_seed)?,
        None => inject_label_noise(&clean, cfg.noise, noise_seed)?,
    })
}

pub fn sim_config(cfg: &ExperimentConfig, m: usize, seed: u64) -> Result<SimConfig<f64>, ExperimentError> {
    let cfg_err = |e: &dyn std::fmt::Display| ExperimentError::Config(e.to_string());
    let topology = match cfg.algorithm {
        Algorithm::DromD => Some(build_topology(cfg.topology, m, cfg.tau).map_err(|e| cfg_err(&e))?),
        Algorithm::Drom | Algorithm::LocalBaseline => None,
    };
    let robust =
        RobustParams::new(cfg.p, cfg.xi, cfg.gamma_clamp_eps).map_err(|e| cfg_err(&e))?;
    let schedule = match cfg.algorithm {
        Algorithm::DromD => EtaSchedule::Periodic { tau: cfg.tau },
        Algorithm::Drom | Algorithm::LocalBaseline => EtaSchedule::Centralized,
    };
    let reweighting = if cfg.reweighting {
        Reweighting::CappedLp
    } else {
        Reweighting::Disabled
    };
    let hp = HyperParams::new(cfg.lambda, cfg.rho, robust, reweighting, schedule)
        .map_err(|e| cfg_err(&e))?;
    let mut sc = SimConfig::new(cfg.algorithm, topology, hp, cfg.loss, cfg.rounds, seed);
    sc.order = cfg.order;
    sc.cost = cfg.cost;
    sc.power = PowerOpts {
        tol: cfg.power_tol,
        max_iter: cfg.power_max_iter,
    };
    sc.parallel = cfg.parallel_workers;
    sc.track_nuclear_norm = cfg.track_nuclear_norm;
    Ok(sc)
}

fn partial_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Writes through `<path>.partial`; the rename happens only on success.
fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), ExperimentError>,
) -> Result<(), ExperimentError> {
    let tmp = partial_path(path);
    let file = fs::File::create(&tmp).map_err(ExperimentError::io(&tmp))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(ExperimentError::io(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(ExperimentError::io(path))
}

fn write_traces(path: &Path, traces: &[RoundTrace<f64>]) -> Result<(), ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    write_atomic(path, |w| write_trace_csv(traces, w).map_err(csv_err))
}

/// Runs one seed and writes its trace and metrics files into `out`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<SeedOutcome, ExperimentError> {
    let stream = build_stream(cfg, seed)?;
    let sc = sim_config(cfg, stream.m(), seed)?;
    let trace_path = out.join(format!("trace_{seed}.csv"));

    let mut sim = Simulator::new(&sc, &stream)?;
    let mut traces = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        match sim.step() {
            Ok(t) => traces.push(t),
            Err(e) => {
                // Keep what was simulated for inspection.
                let tmp = partial_path(&trace_path);
                if let Ok(f) = fs::File::create(&tmp) {
                    let _ = write_trace_csv(&traces, BufWriter::new(f));
                }
                log::error!("seed {seed}: failed at round {}: {e}", traces.len() + 1);
                return Err(e.into());
            }
        }
    }

    let (w_star, regret) = if cfg.comparator {
        let counts = visit_counts(&traces, &stream)?;
        let opts = ComparatorOpts::new(sc.hp.nuclear_radius(), cfg.comparator_iters);
        let c = offline_comparator(&stream, Some(&counts), cfg.loss, &opts)?;
        if !c.converged {
            log::warn!("seed {seed}: comparator did not converge; regret is against its best iterate");
        }
        let r = empirical_regret(&traces, &c.w_star, &stream, cfg.loss)?;
        (Some(c.w_star), Some(r))
    } else {
        (None, None)
    };

    let diag = run_diagnostics(&traces, w_star.as_ref(), &stream, &sc.hp);
    let positive_or_one = |x: f64| if x > 0.0 && x.is_finite() { x } else { 1.0 };
    let bounds = BoundParams::new(
        cfg.diameter.unwrap_or(positive_or_one(diag.diameter)),
        cfg.kappa.unwrap_or(positive_or_one(diag.kappa)),
        cfg.beta.unwrap_or(positive_or_one(diag.beta)),
        stream.m(),
        cfg.tau,
    )
    .map_err(|e| ExperimentError::Config(e.to_string()))?;
    log::info!(
        "seed {seed}: diameter {} kappa {} beta {}",
        bounds.diameter,
        bounds.kappa,
        bounds.beta
    );
    let rows = metric_rows(&traces, regret.as_deref(), &bounds, cfg.lambda, cfg.rho)?;

    write_traces(&trace_path, &traces)?;
    write_atomic(&out.join(format!("metrics_{seed}.csv")), |w| {
        Ok(write_metrics_csv(&rows, w)?)
    })?;

    let last = rows.last().expect("at least one round");
    let mut per_task = vec![ConfusionState::default(); stream.m()];
    for tr in &traces {
        for (cs, r) in per_task.iter_mut().zip(&tr.tasks) {
            cs.record(r.prediction, r.label);
        }
    }
    Ok(SeedOutcome {
        seed,
        final_error_rate: last.cum_error_rate,
        f1_micro: last.f1_micro,
        f1_macro: per_task.iter().map(f1).sum::<f64>() / stream.m() as f64,
        regret: last.regret,
        total_messages: communication_summary(&traces).total_messages,
        total_idle: total_idle(&traces),
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn write_summary(path: &Path, seeds: &[SeedOutcome]) -> Result<(), ExperimentError> {
    let mut cols: Vec<(&str, Vec<f64>)> = vec![
        ("final_error_rate", seeds.iter().map(|s| s.final_error_rate).collect()),
        ("f1_micro", seeds.iter().map(|s| s.f1_micro).collect()),
        ("f1_macro", seeds.iter().map(|s| s.f1_macro).collect()),
    ];
    if let Some(r) = seeds.iter().map(|s| s.regret).collect::<Option<Vec<f64>>>() {
        cols.push(("regret", r));
    }
    cols.push(("total_messages", seeds.iter().map(|s| s.total_messages as f64).collect()));
    cols.push(("total_idle", seeds.iter().map(|s| s.total_idle).collect()));
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["metric", "mean", "std", "n"]).map_err(csv_err)?;
        for (name, xs) in &cols {
            let (mean, std) = mean_std(xs);
            c.write_record([
                name.to_string(),
                mean.to_string(),
                std.to_string(),
                xs.len().to_string(),
            ])
            .map_err(csv_err)?;
        }
        c.flush().map_err(|e| csv_err(e.into()))
    })
}

/// Runs every seed of the config and writes `trace_<seed>.csv`,
/// `metrics_<seed>.csv` and `summary.csv`.
pub fn cmd_run(config: &Path, opts: &RunOptions) -> Result<RunSummary, ExperimentError> {
    let cfg = load_config(config, opts)?;
    fs::create_dir_all(&cfg.output).map_err(ExperimentError::io(&cfg.output))?;
    let outcomes: Result<Vec<SeedOutcome>, ExperimentError> = if cfg.parallel_seeds {
        cfg.seeds
            .par_iter()
            .map(|&s| run_seed(&cfg, s, &cfg.output))
            .collect()
    } else {
        cfg.seeds
            .iter()
            .map(|&s| run_seed(&cfg, s, &cfg.output))
            .collect()
    };
    let outcomes = outcomes?;
    write_summary(&cfg.output.join("summary.csv"), &outcomes)?;
    Ok(RunSummary {
        output: cfg.output,
        seeds: outcomes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthArgs {
    pub spec: SynthSpec,
    pub noise: f64,
    pub out: PathBuf,
}

/// Writes a synthetic task set as a manifest, one sparse file per task and
/// `w_true.csv` (one row per feature, one column per task).
pub fn cmd_synth(args: &SynthArgs) -> Result<PathBuf, ExperimentError> {
    args.spec
        .validate()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    if !(0.0..=1.0).contains(&args.noise) {
        return Err(ExperimentError::Config(format!(
            "noise must lie in [0, 1], got {}",
            args.noise
        )));
    }
    let (clean, w_true) = generate_synthetic::<f64>(&args.spec)?;
    let stream = inject_label_noise(&clean, args.noise, args.spec.seed ^ NOISE_SALT)?;
    let manifest = write_dataset(&stream, &args.out)?;

    let path = args.out.join("w_true.csv");
    let csv_err = |source| ExperimentError::Csv {
        path: path.clone(),
        source,
    };
    write_atomic(&path, |w| {
        let mut c = csv::Writer::from_writer(w);
        let header: Vec<String> = (0..w_true.cols()).map(|i| format!("task{i}")).collect();
        c.write_record(&header).map_err(csv_err)?;
        for r in 0..w_true.rows() {
            c.write_record((0..w_true.cols()).map(|j| w_true.get(r, j).to_string()))
                .map_err(csv_err)?;
        }
        c.flush().map_err(|e| csv_err(e.into()))
    })?;
    Ok(manifest)
}
