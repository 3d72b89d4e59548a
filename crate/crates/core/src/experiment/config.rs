//! TOML experiment configuration.
//!
//! ```toml
//! [run]
//! algorithm = "drom"          # drom | drom_d | local
//! rounds = 2000
//! seeds = [1, 2, 3]
//! output = "out"              # relative to this file
//!
//! [data]
//! noise = 0.1
//! [data.synth]
//! m = 8
//! d = 32
//! rank = 2
//! samples = 2000
//! margin = 0.5
//!
//! [topology]
//! kind = "full"               # full | grid | ring
//! tau = 1
//!
//! [model]
//! loss = "logistic"           # hinge | logistic
//! p = 0.5
//! xi = 1.0
//! lambda = 0.3
//! rho = 10.0
//! ```
//!
//! `p`, `xi` and `tau` have no defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::data::{StreamOrder, SynthSpec};
use crate::losses::{LossKind, RobustParams};
use crate::simnet::{Algorithm, CostModel};
use crate::topology::TopologyKind;

use super::ExperimentError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    run: RawRun,
    data: RawData,
    topology: RawTopology,
    model: RawModel,
    #[serde(default)]
    metrics: RawMetrics,
    #[serde(default)]
    sim: RawSim,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    algorithm: Spanned<String>,
    rounds: Spanned<i64>,
    seeds: Spanned<Vec<u64>>,
    output: Option<String>,
    order: Option<Spanned<String>>,
    #[serde(default)]
    parallel_seeds: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    manifest: Option<Spanned<String>>,
    dim: Option<Spanned<i64>>,
    synth: Option<RawSynth>,
    noise: Option<Spanned<f64>>,
    noise_per_task: Option<Spanned<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynth {
    m: Spanned<i64>,
    d: Spanned<i64>,
    rank: Spanned<i64>,
    samples: Spanned<i64>,
    margin: Option<f64>,
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    kind: Spanned<String>,
    tau: Spanned<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    loss: Option<Spanned<String>>,
    p: Spanned<f64>,
    xi: Spanned<f64>,
    lambda: Option<Spanned<f64>>,
    rho: Option<Spanned<f64>>,
    gamma_clamp_eps: Option<Spanned<f64>>,
    #[serde(default = "yes")]
    reweighting: bool,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMetrics {
    #[serde(default)]
    comparator: bool,
    comparator_iters: Option<Spanned<i64>>,
    #[serde(default)]
    nuclear_norm: bool,
    diameter: Option<Spanned<f64>>,
    kappa: Option<Spanned<f64>>,
    beta: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSim {
    compute_base: Option<f64>,
    compute_jitter: Option<f64>,
    latency: Option<f64>,
    power_tol: Option<Spanned<f64>>,
    power_max_iter: Option<Spanned<i64>>,
    #[serde(default)]
    parallel_workers: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Manifest { path: PathBuf, dim: Option<usize> },
    /// `seed = None` draws the data from each run seed.
    Synth {
        m: usize,
        d: usize,
        rank: usize,
        samples: usize,
        margin: f64,
        seed: Option<u64>,
    },
}

impl DataSource {
    pub fn synth_spec(&self, run_seed: u64) -> Option<SynthSpec> {
        match *self {
            DataSource::Synth {
                m,
                d,
                rank,
                samples,
                margin,
                seed,
            } => Some(SynthSpec {
                m,
                d,
                rank,
                samples,
                margin,
                seed: seed.unwrap_or(run_seed),
            }),
            DataSource::Manifest { .. } => None,
        }
    }
}

/// Validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub order: StreamOrder,
    pub parallel_seeds: bool,
    pub data: DataSource,
    pub noise: f64,
    pub noise_per_task: Option<Vec<f64>>,
    pub topology: TopologyKind,
    pub tau: usize,
    pub loss: LossKind,
    pub p: f64,
    pub xi: f64,
    pub lambda: f64,
    pub rho: f64,
    pub gamma_clamp_eps: f64,
    pub reweighting: bool,
    pub comparator: bool,
    pub comparator_iters: usize,
    pub track_nuclear_norm: bool,
    pub diameter: Option<f64>,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
    pub cost: CostModel,
    pub power_tol: f64,
    pub power_max_iter: usize,
    pub parallel_workers: bool,
}

struct Ctx<'a> {
    name: &'a str,
    src: &'a str,
}

impl Ctx<'_> {
    fn err<V>(&self, field: &str, at: &Spanned<V>, msg: impl std::fmt::Display) -> ExperimentError {
        let line = self.src[..at.span().start.min(self.src.len())]
            .bytes()
            .filter(|&b| b == b'\n')
            .count()
            + 1;
        ExperimentError::Config(format!("{}:{line}: {field}: {msg}", self.name))
    }

    fn count(&self, field: &str, v: &Spanned<i64>, min: i64) -> Result<usize, ExperimentError> {
        if *v.get_ref() < min {
            return Err(self.err(field, v, format!("must be at least {min}, got {}", v.get_ref())));
        }
        Ok(*v.get_ref() as usize)
    }

    fn positive(&self, field: &str, v: &Spanned<f64>) -> Result<f64, ExperimentError> {
        let x = *v.get_ref();
        if !(x > 0.0) || !x.is_finite() {
            return Err(self.err(field, v, format!("must be positive, got {x}")));
        }
        Ok(x)
    }

    fn parse<E: std::fmt::Display, V: std::str::FromStr<Err = E>>(
        &self,
        field: &str,
        v: &Spanned<String>,
    ) -> Result<V, ExperimentError> {
        v.get_ref().parse().map_err(|e| self.err(field, v, e))
    }
}

fn prob<V>(ctx: &Ctx, field: &str, v: &Spanned<V>, x: f64) -> Result<f64, ExperimentError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(ctx.err(field, v, format!("must lie in [0, 1], got {x}")));
    }
    Ok(x)
}

/// Parses and validates `src`. Relative paths resolve against `base_dir`.
pub fn parse_config(
    src: &str,
    name: &str,
    base_dir: &Path,
) -> Result<ExperimentConfig, ExperimentError> {
    let raw: RawConfig =
        toml::from_str(src).map_err(|e| ExperimentError::Config(format!("{name}: {e}")))?;
    let ctx = Ctx { name, src };

    let algorithm: Algorithm = ctx.parse("run.algorithm", &raw.run.algorithm)?;
    let rounds = ctx.count("run.rounds", &raw.run.rounds, 1)?;
    if raw.run.seeds.get_ref().is_empty() {
        return Err(ctx.err("run.seeds", &raw.run.seeds, "at least one seed is required"));
    }
    let order = match &raw.run.order {
        Some(o) => ctx.parse("run.order", o)?,
        None => StreamOrder::Shuffled,
    };

    let data = match (&raw.data.manifest, &raw.data.synth) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(ExperimentError::Config(format!(
                "{name}: data: exactly one of `manifest` or `[data.synth]` is required"
            )))
        }
        (Some(path), None) => {
            let full = base_dir.join(path.get_ref());
            if !full.is_file() {
                return Err(ctx.err("data.manifest", path, format!("{} does not exist", full.display())));
            }
            let dim = match &raw.data.dim {
                Some(d) => Some(ctx.count("data.dim", d, 1)?),
                None => None,
            };
            DataSource::Manifest { path: full, dim }
        }
        (None, Some(s)) => {
            let spec = DataSource::Synth {
                m: ctx.count("data.synth.m", &s.m, 1)?,
                d: ctx.count("data.synth.d", &s.d, 1)?,
                rank: ctx.count("data.synth.rank", &s.rank, 1)?,
                samples: ctx.count("data.synth.samples", &s.samples, 1)?,
                margin: s.margin.unwrap_or(0.0),
                seed: s.seed,
            };
            if let Err(e) = spec.synth_spec(0).expect("synth source").validate() {
                return Err(ctx.err("data.synth", &s.rank, e));
            }
            spec
        }
    };
    let noise = match &raw.data.noise {
        Some(v) => prob(&ctx, "data.noise", v, *v.get_ref())?,
        None => 0.0,
    };
    let noise_per_task = match &raw.data.noise_per_task {
        Some(v) => {
            for &x in v.get_ref() {
                prob(&ctx, "data.noise_per_task", v, x)?;
            }
            if let DataSource::Synth { m, .. } = data {
                if v.get_ref().len() != m {
                    return Err(ctx.err(
                        "data.noise_per_task",
                        v,
                        format!("needs {m} entries, got {}", v.get_ref().len()),
                    ));
                }
            }
            Some(v.get_ref().clone())
        }
        None => None,
    };

    let topology: TopologyKind = ctx.parse("topology.kind", &raw.topology.kind)?;
    let tau = ctx.count("topology.tau", &raw.topology.tau, 1)?;

    let m = &raw.model;
    let loss = match &m.loss {
        Some(l) => ctx.parse("model.loss", l)?,
        None => LossKind::Hinge,
    };
    let p = *m.p.get_ref();
    let xi = *m.xi.get_ref();
    let gamma_clamp_eps = match &m.gamma_clamp_eps {
        Some(v) => ctx.positive("model.gamma_clamp_eps", v)?,
        None => RobustParams::<f64>::DEFAULT_CLAMP_EPS,
    };
    if !(p > 0.0 && p < 1.0) {
        return Err(ctx.err("model.p", &m.p, format!("must lie in (0, 1), got {p}")));
    }
    ctx.positive("model.xi", &m.xi)?;
    let lambda = match &m.lambda {
        Some(v) => ctx.positive("model.lambda", v)?,
        None => 1.0,
    };
    let rho = match &m.rho {
        Some(v) => ctx.positive("model.rho", v)?,
        None => 1.0,
    };

    let mt = &raw.metrics;
    let comparator_iters = match &mt.comparator_iters {
        Some(v) => ctx.count("metrics.comparator_iters", v, 1)?,
        None => 2000,
    };
    let opt_pos = |field: &str, v: &Option<Spanned<f64>>| -> Result<Option<f64>, ExperimentError> {
        v.as_ref().map(|s| ctx.positive(field, s)).transpose()
    };

    let sim = &raw.sim;
    let defaults = CostModel::default();
    let cost = CostModel {
        compute_base: sim.compute_base.unwrap_or(defaults.compute_base),
        compute_jitter: sim.compute_jitter.unwrap_or(defaults.compute_jitter),
        latency: sim.latency.unwrap_or(defaults.latency),
    };
    if [cost.compute_base, cost.compute_jitter, cost.latency]
        .iter()
        .any(|x| !(*x >= 0.0) || !x.is_finite())
    {
        return Err(ExperimentError::Config(format!(
            "{name}: sim: costs and latency must be finite and nonnegative"
        )));
    }

    Ok(ExperimentConfig {
        algorithm,
        rounds,
        seeds: raw.run.seeds.get_ref().clone(),
        output: base_dir.join(raw.run.output.as_deref().unwrap_or("out")),
        order,
        parallel_seeds: raw.run.parallel_seeds,
        data,
        noise,
        noise_per_task,
        topology,
        tau,
        loss,
        p,
        xi,
        lambda,
        rho,
        gamma_clamp_eps,
        reweighting: m.reweighting,
        comparator: mt.comparator,
        comparator_iters,
        track_nuclear_norm: mt.nuclear_norm,
        diameter: opt_pos("metrics.diameter", &mt.diameter)?,
        kappa: opt_pos("metrics.kappa", &mt.kappa)?,
        beta: opt_pos("metrics.beta", &mt.beta)?,
        cost,
        power_tol: match &sim.power_tol {
            Some(v) => ctx.positive("sim.power_tol", v)?,
            None => 1e-10,
        },
        power_max_iter: match &sim.power_max_iter {
            Some(v) => ctx.count("sim.power_max_iter", v, 1)?,
            None => 1000,
        },
        parallel_workers: sim.parallel_workers,
    })
}

/// Applies `key=value` overrides (dotted keys) to a TOML document. Values
/// are read as TOML when possible and as bare strings otherwise.
pub fn apply_overrides(src: &str, overrides: &[String]) -> Result<String, ExperimentError> {
    if overrides.is_empty() {
        return Ok(src.to_string());
    }
    let mut doc: toml::Table = src
        .parse()
        .map_err(|e| ExperimentError::Config(format!("config: {e}")))?;
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| ExperimentError::Config(format!("override `{o}` is not key=value")))?;
        let value = value.trim();
        let parsed: toml::Value = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let parts: Vec<&str> = key.trim().split('.').collect();
        let (last, parents) = parts.split_last().expect("split yields one part");
        let mut table = &mut doc;
        for p in parents {
            table = table
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| ExperimentError::Config(format!("override `{key}`: `{p}` is not a table")))?;
        }
        table.insert(last.to_string(), parsed);
    }
    toml::to_string(&doc).map_err(|e| ExperimentError::Config(format!("override: {e}")))
}
