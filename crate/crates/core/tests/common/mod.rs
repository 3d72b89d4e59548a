#![allow(dead_code)]

pub mod reference;

use drom::data::{
    generate_synthetic, inject_label_noise, Example, MultiTaskStream, SynthSpec, TaskData,
};
use drom::linalg::{Mat, SparseVec};
use drom::losses::{Label, LossKind, RobustParams};
use drom::optimizer::{EtaSchedule, HyperParams, Reweighting};
use drom::simnet::{Algorithm, SimConfig};
use drom::topology::{build_topology, TopologyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn synth(m: usize, d: usize, rank: usize, samples: usize, margin: f64, seed: u64) -> MultiTaskStream<f64> {
    let spec = SynthSpec {
        m,
        d,
        rank,
        samples,
        margin,
        seed,
    };
    generate_synthetic(&spec).unwrap().0
}

pub fn noisy(m: usize, d: usize, samples: usize, noise: f64, seed: u64) -> MultiTaskStream<f64> {
    let clean = synth(m, d, 2.min(m).min(d), samples, 0.2, seed);
    inject_label_noise(&clean, noise, seed.wrapping_add(1)).unwrap()
}

/// Dense stream built from explicit `(x, label)` rows per task.
pub fn stream_from(dim: usize, tasks: &[Vec<(Vec<f64>, i8)>]) -> MultiTaskStream<f64> {
    let tasks = tasks
        .iter()
        .enumerate()
        .map(|(i, rows)| TaskData {
            name: format!("t{i}"),
            examples: rows
                .iter()
                .map(|(x, y)| Example {
                    x: SparseVec::from_dense(x),
                    label: if *y > 0 { Label::Pos } else { Label::Neg },
                    flipped: false,
                })
                .collect(),
        })
        .collect();
    MultiTaskStream::new(dim, tasks).unwrap()
}

pub fn hp(
    lambda: f64,
    rho: f64,
    p: f64,
    xi: f64,
    reweighting: Reweighting,
    schedule: EtaSchedule,
) -> HyperParams<f64> {
    let robust = RobustParams::new(p, xi, RobustParams::<f64>::DEFAULT_CLAMP_EPS).unwrap();
    HyperParams::new(lambda, rho, robust, reweighting, schedule).unwrap()
}

pub fn drom_cfg(hp: HyperParams<f64>, loss: LossKind, rounds: usize, seed: u64) -> SimConfig<f64> {
    SimConfig::new(Algorithm::Drom, None, hp, loss, rounds, seed)
}

pub fn local_cfg(loss: LossKind, rounds: usize, seed: u64) -> SimConfig<f64> {
    let h = hp(1.0, 1.0, 0.5, 1.0, Reweighting::Disabled, EtaSchedule::Centralized);
    SimConfig::new(Algorithm::LocalBaseline, None, h, loss, rounds, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn drom_d_cfg(
    kind: TopologyKind,
    m: usize,
    tau: usize,
    lambda: f64,
    rho: f64,
    loss: LossKind,
    rounds: usize,
    seed: u64,
) -> SimConfig<f64> {
    let topo = build_topology(kind, m, tau).unwrap();
    let h = hp(lambda, rho, 0.5, 1.0, Reweighting::CappedLp, EtaSchedule::Periodic { tau });
    SimConfig::new(Algorithm::DromD, Some(topo), h, loss, rounds, seed)
}

pub fn gaussian_mat(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

/// `U·diag(s)·Vᵀ` with random orthonormal factors, so the spectrum is known.
pub fn with_spectrum(rows: usize, cols: usize, s: &[f64], seed: u64) -> Mat<f64> {
    let u = orthonormal(rows, s.len(), seed);
    let v = orthonormal(cols, s.len(), seed ^ 0x5eed);
    Mat::from_fn(rows, cols, |r, c| {
        (0..s.len()).map(|k| u[k][r] * s[k] * v[k][c]).sum()
    })
}

fn orthonormal(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}
