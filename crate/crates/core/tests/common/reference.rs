//! Straight-line single-threaded versions of the three protocols: plain
//! vectors, no message objects, no worker structs. Losses, the schedule and
//! power iteration are shared with the library; the update arithmetic and
//! aggregation are written out again here.

use drom::data::{MultiTaskStream, RoundSchedule};
use drom::linalg::{power_iteration, Mat};
use drom::losses::{capped_lp_weight, loss_and_subgradient, predict, Label};
use drom::optimizer::Reweighting;
use drom::simnet::{Algorithm, SimConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RefTask {
    pub example: usize,
    pub prediction: Label,
    pub loss: f64,
    pub gamma: f64,
    pub applied: bool,
    pub sigma1: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RefRound {
    pub tasks: Vec<RefTask>,
    /// Columns of `W` and `A` after the round.
    pub w: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub uv: Vec<Vec<f64>>,
    pub sync: bool,
    pub broadcast: bool,
}

fn gamma_of(cfg: &SimConfig<f64>, loss: f64) -> f64 {
    match cfg.hp.reweighting {
        Reweighting::CappedLp => capped_lp_weight(loss, &cfg.hp.robust),
        Reweighting::Disabled => 1.0,
    }
}

/// Leading pair of `mat` as `u·[v]_i` for every column `i`, or zeros.
fn spectral_columns(cfg: &SimConfig<f64>, mat: &Mat<f64>) -> (f64, Option<(Vec<f64>, Vec<f64>)>) {
    let (t, _) = power_iteration(mat, &cfg.power).unwrap();
    if t.sigma > 1.0 {
        (t.sigma, Some((t.u, t.v)))
    } else {
        (t.sigma, None)
    }
}

pub fn run(cfg: &SimConfig<f64>, stream: &MultiTaskStream<f64>) -> Vec<RefRound> {
    let (m, d) = (stream.m(), stream.dim());
    let (lam, rho) = (cfg.hp.lambda, cfg.hp.rho);
    let tau = cfg.topology.as_ref().map_or(1, |g| g.tau());
    let mut sched = RoundSchedule::new(stream, cfg.order, cfg.seed);
    let mut w = vec![vec![0.0; d]; m];
    let mut a = vec![vec![0.0; d]; m];
    let mut uv = vec![vec![0.0; d]; m];
    let mut out = Vec::new();

    for t in 1..=cfg.rounds {
        let idx = sched.next_round().unwrap();
        let eta = match cfg.algorithm {
            Algorithm::DromD => 1.0 / (t.div_ceil(tau) as f64).sqrt(),
            _ => 1.0 / (t as f64).sqrt(),
        };
        let mut tasks = Vec::with_capacity(m);
        for i in 0..m {
            let ex = &stream.task(i).examples[idx[i]];
            let prediction = predict(&w[i], &ex.x);
            let (loss, g) = loss_and_subgradient(cfg.loss, &w[i], &ex.x, ex.label).unwrap();
            let (gamma, applied) = match cfg.algorithm {
                Algorithm::Drom => {
                    let gamma = gamma_of(cfg, loss);
                    if gamma > 0.0 {
                        for k in 0..d {
                            a[i][k] += eta * (lam * w[i][k] - rho * uv[i][k]);
                            w[i][k] -= eta * (lam * a[i][k] + gamma * g[k]);
                        }
                    }
                    (gamma, gamma > 0.0)
                }
                Algorithm::DromD => {
                    let gamma = gamma_of(cfg, loss);
                    for k in 0..d {
                        w[i][k] -= eta * (lam * a[i][k] + gamma * g[k]);
                        a[i][k] += eta * (lam * w[i][k] - rho * uv[i][k]);
                    }
                    (gamma, true)
                }
                Algorithm::LocalBaseline => {
                    for k in 0..d {
                        w[i][k] -= eta * (1.0 * g[k]);
                    }
                    (1.0, true)
                }
            };
            tasks.push(RefTask {
                example: idx[i],
                prediction,
                loss,
                gamma,
                applied,
                sigma1: None,
            });
        }

        let (mut sync, mut broadcast) = (false, false);
        match cfg.algorithm {
            Algorithm::Drom => {
                sync = true;
                let amat = Mat::from_fn(d, m, |r, c| a[c][r]);
                let (sigma, pair) = spectral_columns(cfg, &amat);
                broadcast = pair.is_some();
                for i in 0..m {
                    uv[i] = match &pair {
                        Some((u, v)) => u.iter().map(|x| x * v[i]).collect(),
                        None => vec![0.0; d],
                    };
                    tasks[i].sigma1 = Some(sigma);
                }
            }
            Algorithm::DromD if t % tau == 0 => {
                sync = true;
                let s = cfg.topology.as_ref().unwrap().schedule_matrix(t).unwrap();
                let mut next = Vec::with_capacity(m);
                for i in 0..m {
                    // A·Diag([S]_i), entry by entry.
                    let ai = Mat::from_fn(d, m, |r, c| if s.get(i, c) != 0.0 { a[c][r] } else { 0.0 });
                    let (sigma, pair) = spectral_columns(cfg, &ai);
                    broadcast |= pair.is_some();
                    tasks[i].sigma1 = Some(sigma);
                    next.push(match pair {
                        Some((u, v)) => u.iter().map(|x| x * v[i]).collect(),
                        None => vec![0.0; d],
                    });
                }
                uv = next;
            }
            _ => {}
        }
        out.push(RefRound {
            tasks,
            w: w.clone(),
            a: a.clone(),
            uv: uv.clone(),
            sync,
            broadcast,
        });
    }
    out
}

fn same(x: f64, y: f64) -> bool {
    x.to_bits() == y.to_bits()
}

fn same_cols(m: &Mat<f64>, cols: &[Vec<f64>]) -> bool {
    cols.iter()
        .enumerate()
        .all(|(c, col)| col.iter().enumerate().all(|(r, &x)| same(m.get(r, c), x)))
}

/// Steps the simulator next to [`run`] and reports the first round where
/// any traced quantity or any entry of `W`, `A` or the cached `u·[v]_i`
/// differs in its bit pattern.
pub fn compare(cfg: &SimConfig<f64>, stream: &MultiTaskStream<f64>) -> Result<(), String> {
    let want = run(cfg, stream);
    let mut sim = drom::simnet::Simulator::new(cfg, stream).map_err(|e| e.to_string())?;
    for (t, r) in want.iter().enumerate() {
        let got = sim.step().map_err(|e| e.to_string())?;
        let t = t + 1;
        if got.round != t || got.sync_round != r.sync || got.broadcast_occurred != r.broadcast {
            return Err(format!("round {t}: sync/broadcast flags differ"));
        }
        for (i, (g, e)) in got.tasks.iter().zip(&r.tasks).enumerate() {
            let ok = g.example == e.example
                && g.prediction == e.prediction
                && same(g.loss, e.loss)
                && same(g.gamma, e.gamma)
                && g.update_applied == e.applied
                && g.sigma1.map(f64::to_bits) == e.sigma1.map(f64::to_bits);
            if !ok {
                return Err(format!("round {t} task {i}: {g:?} vs {e:?}"));
            }
        }
        if !same_cols(&sim.w_matrix(), &r.w) || !same_cols(&sim.a_matrix(), &r.a) {
            return Err(format!("round {t}: W or A differs"));
        }
        for (i, wk) in sim.workers().iter().enumerate() {
            if !wk.uv_col.iter().zip(&r.uv[i]).all(|(&x, &y)| same(x, y)) {
                return Err(format!("round {t}: cached uv of worker {i} differs"));
            }
        }
    }
    Ok(())
}
