use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Example, MultiTaskStream, RoundSchedule};
use crate::linalg::{nuclear_norm, Mat};
use crate::losses::{loss_and_subgradient, predict};
use crate::optimizer::{central_step, learning_rate, CentralStep, WorkerState};
use crate::simnet::{
    Algorithm, Message, MessageKind, NodeId, RoundTrace, SimConfig, SimError, TaskRecord,
};
use crate::Scalar;

// Keeps the compute-cost stream apart from the schedule's per-task streams.
const COST_STREAM: u64 = u64::MAX;

/// Steps a protocol one round at a time.
pub struct Simulator<'a, T: Scalar> {
    cfg: &'a SimConfig<T>,
    stream: &'a MultiTaskStream<T>,
    schedule: RoundSchedule,
    workers: Vec<WorkerState<T>>,
    clocks: Vec<f64>,
    cost_rng: ChaCha8Rng,
    t: usize,
}

impl<'a, T: Scalar> Simulator<'a, T> {
    pub fn new(cfg: &'a SimConfig<T>, stream: &'a MultiTaskStream<T>) -> Result<Self, SimError> {
        let m = stream.m();
        match &cfg.topology {
            Some(topo) if topo.m() != m => {
                return Err(SimError::Config(format!(
                    "topology has {} workers but the stream has {m} tasks",
                    topo.m()
                )))
            }
            None if cfg.algorithm == Algorithm::DromD => {
                return Err(SimError::Config("the decentralized protocol needs a topology".into()))
            }
            _ => {}
        }
        if cfg.rounds == 0 {
            return Err(SimError::Config("rounds must be at least 1".into()));
        }
        let mut cost_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        cost_rng.set_stream(COST_STREAM);
        Ok(Simulator {
            cfg,
            stream,
            schedule: RoundSchedule::new(stream, cfg.order, cfg.seed),
            workers: (0..m).map(|i| WorkerState::new(i, stream.dim())).collect(),
            clocks: vec![0.0; m],
            cost_rng,
            t: 0,
        })
    }

    /// Rounds completed so far.
    pub fn round(&self) -> usize {
        self.t
    }

    pub fn workers(&self) -> &[WorkerState<T>] {
        &self.workers
    }

    /// Current primal matrix `W`, column `i` = task `i`.
    pub fn w_matrix(&self) -> Mat<T> {
        let cols: Vec<Vec<T>> = self.workers.iter().map(|w| w.w.clone()).collect();
        Mat::from_columns(&cols).expect("workers share one dimension")
    }

    /// Current dual matrix `A`.
    pub fn a_matrix(&self) -> Mat<T> {
        let cols: Vec<Vec<T>> = self.workers.iter().map(|w| w.a.clone()).collect();
        Mat::from_columns(&cols).expect("workers share one dimension")
    }

    pub fn step(&mut self) -> Result<RoundTrace<T>, SimError> {
        let t = self.t + 1;
        let cfg = self.cfg;
        let idx = self.schedule.next_round()?;
        let eta: T = learning_rate(t, cfg.hp.schedule)?;
        let examples: Vec<&Example<T>> = idx
            .iter()
            .enumerate()
            .map(|(i, &k)| &self.stream.task(i).examples[k])
            .collect();

        let local = |(w, (ex, &k)): (&mut WorkerState<T>, (&&Example<T>, &usize))| {
            local_phase(cfg, eta, w, ex, k)
        };
        let records: Result<Vec<TaskRecord<T>>, SimError> = if cfg.parallel {
            self.workers
                .par_iter_mut()
                .zip(examples.par_iter().zip(idx.par_iter()))
                .map(local)
                .collect()
        } else {
            self.workers
                .iter_mut()
                .zip(examples.iter().zip(idx.iter()))
                .map(local)
                .collect()
        };
        let mut records = records?;

        for c in self.clocks.iter_mut() {
            *c += cfg.cost.compute_base + cfg.cost.compute_jitter * self.cost_rng.random::<f64>();
        }

        let mut trace = RoundTrace {
            round: t,
            tasks: Vec::new(),
            sync_round: false,
            broadcast_occurred: false,
            messages: Vec::new(),
            sigma1: None,
            power_iterations: 0,
            skipped: 0,
            w_frobenius: T::zero(),
            nuclear_norm_w: None,
        };
        match cfg.algorithm {
            Algorithm::Drom => self.server_sync(t, &mut records, &mut trace)?,
            Algorithm::DromD if cfg.topology.as_ref().is_some_and(|g| g.is_sync_round(t)) => {
                self.neighbour_sync(t, &mut records, &mut trace)?
            }
            Algorithm::DromD | Algorithm::LocalBaseline => {}
        }

        let w = self.w_matrix();
        trace.w_frobenius = w.frobenius_norm();
        if cfg.track_nuclear_norm {
            trace.nuclear_norm_w = Some(nuclear_norm(&w)?);
        }
        trace.tasks = records;
        self.t = t;
        Ok(trace)
    }

    fn server_sync(
        &mut self,
        t: usize,
        records: &mut [TaskRecord<T>],
        trace: &mut RoundTrace<T>,
    ) -> Result<(), SimError> {
        let (m, d) = (self.workers.len(), self.stream.dim());
        trace.sync_round = true;
        for (i, r) in records.iter_mut().enumerate() {
            if r.update_applied {
                r.msgs_out = 1;
                trace.messages.push(Message {
                    kind: MessageKind::DualUpload,
                    src: NodeId::Worker(i),
                    dst: NodeId::Server,
                    round: t,
                    payload_size: d,
                });
            }
        }
        let cs = central_step(&self.a_matrix(), &self.cfg.power)?;
        trace.sigma1 = Some(cs.sigma1);
        trace.power_iterations = cs.iterations;
        trace.broadcast_occurred = cs.pair.is_some();
        for (i, (w, r)) in self.workers.iter_mut().zip(records.iter_mut()).enumerate() {
            w.uv_col = cs.uv_column(i, d);
            r.sigma1 = Some(cs.sigma1);
            if trace.broadcast_occurred {
                r.msgs_in = 1;
                trace.messages.push(Message {
                    kind: MessageKind::SpectralBroadcast,
                    src: NodeId::Server,
                    dst: NodeId::Worker(i),
                    round: t,
                    payload_size: d + 1,
                });
            }
        }
        if !trace.broadcast_occurred {
            trace.skipped = m;
        }

        // Global barrier: upload, compute, reply.
        let latest = self.clocks.iter().copied().fold(f64::MIN, f64::max);
        for (c, r) in self.clocks.iter_mut().zip(records.iter_mut()) {
            r.idle = latest - *c;
            *c = latest + 2.0 * self.cfg.cost.latency;
        }
        Ok(())
    }

    fn neighbour_sync(
        &mut self,
        t: usize,
        records: &mut [TaskRecord<T>],
        trace: &mut RoundTrace<T>,
    ) -> Result<(), SimError> {
        let topo = self.cfg.topology.as_ref().expect("checked in Simulator::new");
        let (m, d) = (self.workers.len(), self.stream.dim());
        trace.sync_round = true;
        for (i, r) in records.iter_mut().enumerate() {
            let peers = topo.peers(i);
            r.msgs_out = peers.len();
            r.msgs_in = peers.len();
            for j in peers {
                trace.messages.push(Message {
                    kind: MessageKind::DualUpload,
                    src: NodeId::Worker(i),
                    dst: NodeId::Worker(j),
                    round: t,
                    payload_size: d,
                });
            }
        }

        let a = self.a_matrix();
        let power = &self.cfg.power;
        let local = |i: usize| -> Result<CentralStep<T>, SimError> {
            Ok(central_step(&topo.neighbor_aggregate(&a, i)?, power)?)
        };
        let steps: Result<Vec<CentralStep<T>>, SimError> = if self.cfg.parallel {
            (0..m).into_par_iter().map(local).collect()
        } else {
            (0..m).map(local).collect()
        };
        for (i, cs) in steps?.into_iter().enumerate() {
            self.workers[i].uv_col = cs.uv_column(i, d);
            records[i].sigma1 = Some(cs.sigma1);
            trace.power_iterations += cs.iterations;
            if cs.pair.is_some() {
                trace.broadcast_occurred = true;
            } else {
                trace.skipped += 1;
            }
        }

        // Each worker waits only for its own neighbourhood.
        let before = self.clocks.clone();
        for (i, r) in records.iter_mut().enumerate() {
            let latest = topo
                .neighbors(i)
                .into_iter()
                .map(|j| before[j])
                .fold(f64::MIN, f64::max);
            r.idle = latest - before[i];
            self.clocks[i] = latest + self.cfg.cost.latency;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<Vec<RoundTrace<T>>, SimError> {
        (0..self.cfg.rounds).map(|_| self.step()).collect()
    }
}

fn local_phase<T: Scalar>(
    cfg: &SimConfig<T>,
    eta: T,
    w: &mut WorkerState<T>,
    ex: &Example<T>,
    example: usize,
) -> Result<TaskRecord<T>, SimError> {
    let prediction = predict(&w.w, &ex.x);
    let (loss, grad) = loss_and_subgradient(cfg.loss, &w.w, &ex.x, ex.label)?;
    let coupling = cfg.hp.coupling();
    let (gamma, update_applied) = match cfg.algorithm {
        Algorithm::Drom => {
            let g = cfg.hp.gamma(loss);
            (g, w.drom_step(&grad, g, eta, coupling)?)
        }
        Algorithm::DromD => {
            let g = cfg.hp.gamma(loss);
            w.drom_d_step(&grad, g, eta, coupling)?;
            (g, true)
        }
        Algorithm::LocalBaseline => {
            w.local_step(&grad, T::one(), eta)?;
            (T::one(), true)
        }
    };
    Ok(TaskRecord {
        example,
        prediction,
        label: ex.label,
        loss,
        gamma,
        update_applied,
        sigma1: None,
        msgs_in: 0,
        msgs_out: 0,
        idle: 0.0,
    })
}

fn expect_algorithm<T: Scalar>(cfg: &SimConfig<T>, want: Algorithm) -> Result<(), SimError> {
    if cfg.algorithm == want {
        Ok(())
    } else {
        Err(SimError::Config(format!(
            "config selects `{}`, expected `{want}`",
            cfg.algorithm
        )))
    }
}

pub fn run_centralized<T: Scalar>(
    cfg: &SimConfig<T>,
    stream: &MultiTaskStream<T>,
) -> Result<Vec<RoundTrace<T>>, SimError> {
    expect_algorithm(cfg, Algorithm::Drom)?;
    Simulator::new(cfg, stream)?.run()
}

pub fn run_decentralized<T: Scalar>(
    cfg: &SimConfig<T>,
    stream: &MultiTaskStream<T>,
) -> Result<Vec<RoundTrace<T>>, SimError> {
    expect_algorithm(cfg, Algorithm::DromD)?;
    Simulator::new(cfg, stream)?.run()
}

pub fn run_local_baseline<T: Scalar>(
    cfg: &SimConfig<T>,
    stream: &MultiTaskStream<T>,
) -> Result<Vec<RoundTrace<T>>, SimError> {
    expect_algorithm(cfg, Algorithm::LocalBaseline)?;
    Simulator::new(cfg, stream)?.run()
}

/// Runs whichever protocol the config selects.
pub fn run<T: Scalar>(
    cfg: &SimConfig<T>,
    stream: &MultiTaskStream<T>,
) -> Result<Vec<RoundTrace<T>>, SimError> {
    Simulator::new(cfg, stream)?.run()
}
