//! Primal-dual update rules, the central spectral step, step-size schedules
//! and closed-form regret bounds.
//!
//! Each task `i` owns a primal column `wⁱ` and a dual column `aⁱ`. The nuclear
//! norm regularizer is handled through its dual form: the dual matrix `A` is
//! pushed towards `λW` and pulled back by `ρ·u·vᵀ` whenever its spectral norm
//! exceeds one, so the only global quantity ever needed is the leading
//! singular pair of `A`.

use std::fmt;

use thiserror::Error;

use crate::linalg::{power_iteration, LinalgError, Mat, PowerOpts};
use crate::losses::{capped_lp_weight, LossError, RobustParams};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("round index must start at 1")]
    ZeroRound,
    #[error("sync interval tau must be at least 1")]
    ZeroTau,
    #[error("invalid hyperparameter: {0}")]
    InvalidParam(String),
    #[error("gradient length {found} does not match dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite gradient for task {task}")]
    NonFiniteGradient { task: usize },
    #[error("non-finite state for task {task}")]
    NonFiniteState { task: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaSchedule {
    /// `η_t = 1/√t`.
    Centralized,
    /// `η_t = 1/√⌈t/τ⌉`: constant within each synchronization period.
    Periodic { tau: usize },
}

pub fn learning_rate<T: Scalar>(t: usize, schedule: EtaSchedule) -> Result<T, OptimError> {
    if t == 0 {
        return Err(OptimError::ZeroRound);
    }
    let k = match schedule {
        EtaSchedule::Centralized => t,
        EtaSchedule::Periodic { tau: 0 } => return Err(OptimError::ZeroTau),
        EtaSchedule::Periodic { tau } => t.div_ceil(tau),
    };
    Ok(T::from_usize_lossy(k).sqrt().recip())
}

/// Whether examples are reweighted by the capped `L_p` supergradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reweighting {
    CappedLp,
    /// `γ ≡ 1`: the plain convex loss.
    Disabled,
}

impl fmt::Display for Reweighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reweighting::CappedLp => "capped_lp",
            Reweighting::Disabled => "disabled",
        })
    }
}

/// Strength of the primal-dual coupling: `λ` scales `⟨A, W⟩`, `ρ` the
/// spectral hinge `[‖A‖₂ − 1]₊`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling<T> {
    pub lambda: T,
    pub rho: T,
}

impl<T: Scalar> Default for Coupling<T> {
    fn default() -> Self {
        Coupling {
            lambda: T::one(),
            rho: T::one(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperParams<T> {
    pub lambda: T,
    pub rho: T,
    pub robust: RobustParams<T>,
    pub reweighting: Reweighting,
    pub schedule: EtaSchedule,
}

impl<T: Scalar> HyperParams<T> {
    pub fn new(
        lambda: T,
        rho: T,
        robust: RobustParams<T>,
        reweighting: Reweighting,
        schedule: EtaSchedule,
    ) -> Result<Self, OptimError> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(OptimError::InvalidParam(format!("lambda must be positive, got {lambda}")));
        }
        if !(rho > T::zero()) || !rho.is_finite() {
            return Err(OptimError::InvalidParam(format!("rho must be positive, got {rho}")));
        }
        if let EtaSchedule::Periodic { tau: 0 } = schedule {
            return Err(OptimError::ZeroTau);
        }
        Ok(HyperParams {
            lambda,
            rho,
            robust,
            reweighting,
            schedule,
        })
    }

    /// Example weight for a given loss value.
    #[inline]
    pub fn gamma(&self, loss: T) -> T {
        match self.reweighting {
            Reweighting::CappedLp => capped_lp_weight(loss, &self.robust),
            Reweighting::Disabled => T::one(),
        }
    }

    pub fn coupling(&self) -> Coupling<T> {
        Coupling {
            lambda: self.lambda,
            rho: self.rho,
        }
    }

    /// Radius `ρ/λ` the regularizer steers `‖W‖_*` towards.
    pub fn nuclear_radius(&self) -> T {
        self.rho / self.lambda
    }
}

/// State owned by one worker.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerState<T> {
    pub task: usize,
    pub w: Vec<T>,
    pub a: Vec<T>,
    /// Last received `u·[v]_task`; zero until a broadcast arrives.
    pub uv_col: Vec<T>,
}

impl<T: Scalar> WorkerState<T> {
    pub fn new(task: usize, dim: usize) -> Self {
        WorkerState {
            task,
            w: vec![T::zero(); dim],
            a: vec![T::zero(); dim],
            uv_col: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn is_finite(&self) -> bool {
        self.w
            .iter()
            .chain(&self.a)
            .chain(&self.uv_col)
            .all(|x| x.is_finite())
    }

    fn check(&self, grad: &[T], gamma: T, eta: T) -> Result<(), OptimError> {
        if grad.len() != self.w.len() {
            return Err(OptimError::DimensionMismatch {
                expected: self.w.len(),
                found: grad.len(),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(OptimError::NonFiniteGradient { task: self.task });
        }
        if !(gamma >= T::zero()) {
            return Err(OptimError::InvalidParam(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(eta > T::zero()) {
            return Err(OptimError::InvalidParam(format!("eta must be > 0, got {eta}")));
        }
        Ok(())
    }

    /// Centralized ordering, in place. Returns whether the state changed.
    ///
    /// `a ← a + η(λw − ρ·uv)`, then `w ← w − η(λa + γ∇f)` with the new `a`.
    /// Nothing happens when `γ = 0`.
    pub fn drom_step(
        &mut self,
        grad: &[T],
        gamma: T,
        eta: T,
        c: Coupling<T>,
    ) -> Result<bool, OptimError> {
        self.check(grad, gamma, eta)?;
        if gamma == T::zero() {
            return Ok(false);
        }
        for k in 0..self.w.len() {
            self.a[k] += eta * (c.lambda * self.w[k] - c.rho * self.uv_col[k]);
            self.w[k] -= eta * (c.lambda * self.a[k] + gamma * grad[k]);
        }
        self.finite_or_err()?;
        Ok(true)
    }

    /// Decentralized ordering, in place.
    ///
    /// `w ← w − η(λa + γ∇f)`, then `a ← a + η(λw − ρ·uv)` with the new `w`.
    /// Always applied; `γ = 0` only drops the loss term.
    pub fn drom_d_step(
        &mut self,
        grad: &[T],
        gamma: T,
        eta: T,
        c: Coupling<T>,
    ) -> Result<(), OptimError> {
        self.check(grad, gamma, eta)?;
        for k in 0..self.w.len() {
            self.w[k] -= eta * (c.lambda * self.a[k] + gamma * grad[k]);
            self.a[k] += eta * (c.lambda * self.w[k] - c.rho * self.uv_col[k]);
        }
        self.finite_or_err()
    }

    /// Plain online subgradient step on `w`; the dual is untouched.
    pub fn local_step(&mut self, grad: &[T], gamma: T, eta: T) -> Result<(), OptimError> {
        self.check(grad, gamma, eta)?;
        for k in 0..self.w.len() {
            self.w[k] -= eta * (gamma * grad[k]);
        }
        self.finite_or_err()
    }

    fn finite_or_err(&self) -> Result<(), OptimError> {
        if self.w.iter().chain(&self.a).all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(OptimError::NonFiniteState { task: self.task })
        }
    }
}

pub fn drom_local_step<T: Scalar>(
    s: &WorkerState<T>,
    grad: &[T],
    gamma: T,
    eta: T,
    c: Coupling<T>,
) -> Result<WorkerState<T>, OptimError> {
    let mut next = s.clone();
    next.drom_step(grad, gamma, eta, c)?;
    Ok(next)
}

pub fn drom_d_local_step<T: Scalar>(
    s: &WorkerState<T>,
    grad: &[T],
    gamma: T,
    eta: T,
    c: Coupling<T>,
) -> Result<WorkerState<T>, OptimError> {
    let mut next = s.clone();
    next.drom_d_step(grad, gamma, eta, c)?;
    Ok(next)
}

pub fn local_sgd_step<T: Scalar>(
    s: &WorkerState<T>,
    grad: &[T],
    gamma: T,
    eta: T,
) -> Result<WorkerState<T>, OptimError> {
    let mut next = s.clone();
    next.local_step(grad, gamma, eta)?;
    Ok(next)
}

/// Outcome of one spectral step on an aggregated dual matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CentralStep<T> {
    pub sigma1: T,
    pub iterations: usize,
    /// `(u, v)` when `σ₁ > 1`.
    pub pair: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> CentralStep<T> {
    /// `u·[v]_i`, or zero when nothing was broadcast.
    pub fn uv_column(&self, i: usize, dim: usize) -> Vec<T> {
        match &self.pair {
            Some((u, v)) => u.iter().map(|&x| x * v[i]).collect(),
            None => vec![T::zero(); dim],
        }
    }
}

/// Subgradient of `[‖A‖₂ − 1]₊`: the leading singular pair if `σ₁(A) > 1`.
/// Running out of power iterations is not an error here; see [`power_iteration`].
pub fn central_step<T: Scalar>(
    a: &Mat<T>,
    opts: &PowerOpts<T>,
) -> Result<CentralStep<T>, OptimError> {
    let (t, residual) = power_iteration(a, opts)?;
    if let Some(r) = residual {
        log::debug!("power iteration stopped at max_iter with residual {r}; using last iterate");
    }
    let pair = (t.sigma > T::one()).then_some((t.u, t.v));
    Ok(CentralStep {
        sigma1: t.sigma,
        iterations: t.iterations,
        pair,
    })
}

/// Constants entering the regret bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams<T> {
    /// Diameter of the feasible set.
    pub diameter: T,
    /// Bound on the reweighting supergradient.
    pub kappa: T,
    /// Lipschitz constant of the per-example loss.
    pub beta: T,
    pub m: usize,
    pub tau: usize,
}

impl<T: Scalar> BoundParams<T> {
    pub fn new(diameter: T, kappa: T, beta: T, m: usize, tau: usize) -> Result<Self, OptimError> {
        for (name, v) in [("diameter", diameter), ("kappa", kappa), ("beta", beta)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(OptimError::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        if m == 0 {
            return Err(OptimError::InvalidParam("m must be at least 1".into()));
        }
        if tau == 0 {
            return Err(OptimError::ZeroTau);
        }
        Ok(BoundParams {
            diameter,
            kappa,
            beta,
            m,
            tau,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundVariant {
    /// Centralized protocol.
    Thm1,
    /// Decentralized periodic protocol.
    Thm2,
}

/// Closed-form regret bound after `rounds` rounds.
///
/// Centralized: `m√T(D² + (κβ + λD)² + (ρ + λD)²)`.
/// Periodic: `√T·m·τ^{3/2}((D/τ)² + (κβ + λD)² + (λD + ρ)²)`.
pub fn regret_bound<T: Scalar>(
    bp: &BoundParams<T>,
    lambda: T,
    rho: T,
    rounds: usize,
    variant: BoundVariant,
) -> Result<T, OptimError> {
    if rounds == 0 {
        return Err(OptimError::ZeroRound);
    }
    let d = bp.diameter;
    let m = T::from_usize_lossy(bp.m);
    let sqrt_t = T::from_usize_lossy(rounds).sqrt();
    let sq = |x: T| x * x;
    let loss_term = sq(bp.kappa * bp.beta + lambda * d);
    Ok(match variant {
        BoundVariant::Thm1 => m * sqrt_t * (sq(d) + loss_term + sq(rho + lambda * d)),
        BoundVariant::Thm2 => {
            let tau = T::from_usize_lossy(bp.tau);
            sqrt_t * m * tau.powf(T::lit(1.5)) * (sq(d / tau) + loss_term + sq(lambda * d + rho))
        }
    })
}
