//! Per-task convex losses and the capped `L_p` reweighting.
//!
//! The robust objective `h(f) = min(f^p, ξ)` is concave in the loss value `f`.
//! It is handled by majorization: each example contributes `γ·f(w)` where `γ`
//! is a supergradient of `h` at the current loss. Examples whose capped loss
//! saturates get `γ = 0` and are ignored as outliers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SparseVec;
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("dimension mismatch: weights have {weights} entries, features {features}")]
    DimensionMismatch { weights: usize, features: usize },
    #[error("invalid robust parameters: {0}")]
    InvalidParams(String),
    #[error("concave dual requires gamma > 0, got {0}")]
    NonPositiveGamma(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Hinge,
    Logistic,
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hinge" => Ok(LossKind::Hinge),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(format!(
                "unknown loss `{other}` (expected hinge or logistic)"
            )),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logistic",
        })
    }
}

/// Binary label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    #[inline]
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Label::Pos => T::one(),
            Label::Neg => -T::one(),
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

/// `sign(⟨w, x⟩)` with ties going to the positive class.
#[inline]
pub fn predict<T: Scalar>(w: &[T], x: &SparseVec<T>) -> Label {
    if x.dot_dense(w) >= T::zero() {
        Label::Pos
    } else {
        Label::Neg
    }
}

/// Loss value and the scalar `c` such that the subgradient is `c·x`.
///
/// Both supported losses are margin losses, so their gradient is always a
/// multiple of the feature vector.
#[inline]
pub fn margin_loss<T: Scalar>(
    kind: LossKind,
    w: &[T],
    x: &SparseVec<T>,
    y: Label,
) -> Result<(T, T), LossError> {
    if w.len() != x.dim() {
        return Err(LossError::DimensionMismatch {
            weights: w.len(),
            features: x.dim(),
        });
    }
    let ys: T = y.sign();
    let z = ys * x.dot_dense(w);
    Ok(match kind {
        LossKind::Hinge => {
            let loss = (T::one() - z).max(T::zero());
            let coeff = if loss > T::zero() { -ys } else { T::zero() };
            (loss, coeff)
        }
        LossKind::Logistic => (softplus(-z), -ys * sigmoid(-z)),
    })
}

/// Loss and dense subgradient with respect to `w`.
pub fn loss_and_subgradient<T: Scalar>(
    kind: LossKind,
    w: &[T],
    x: &SparseVec<T>,
    y: Label,
) -> Result<(T, Vec<T>), LossError> {
    let (loss, coeff) = margin_loss(kind, w, x, y)?;
    let mut grad = vec![T::zero(); w.len()];
    if coeff != T::zero() {
        for (i, v) in x.iter() {
            grad[i] = coeff * v;
        }
    }
    Ok((loss, grad))
}

pub fn loss_value<T: Scalar>(
    kind: LossKind,
    w: &[T],
    x: &SparseVec<T>,
    y: Label,
) -> Result<T, LossError> {
    margin_loss(kind, w, x, y).map(|(l, _)| l)
}

/// `ln(1 + e^s)` without overflow.
fn softplus<T: Scalar>(s: T) -> T {
    if s > T::zero() {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-s})` without overflow.
fn sigmoid<T: Scalar>(s: T) -> T {
    if s >= T::zero() {
        T::one() / (T::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (T::one() + e)
    }
}

/// Parameters of the capped `L_p` loss `min(f^p, ξ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustParams<T> {
    p: T,
    xi: T,
    gamma_clamp_eps: T,
}

impl<T: Scalar> RobustParams<T> {
    pub const DEFAULT_CLAMP_EPS: f64 = 1e-3;

    pub fn new(p: T, xi: T, gamma_clamp_eps: T) -> Result<Self, LossError> {
        if !(p > T::zero() && p < T::one()) {
            return Err(LossError::InvalidParams(format!("p must lie in (0, 1), got {p}")));
        }
        if !(xi > T::zero()) || !xi.is_finite() {
            return Err(LossError::InvalidParams(format!("xi must be positive, got {xi}")));
        }
        if !(gamma_clamp_eps > T::zero()) || !gamma_clamp_eps.is_finite() {
            return Err(LossError::InvalidParams(format!(
                "gamma_clamp_eps must be positive, got {gamma_clamp_eps}"
            )));
        }
        Ok(RobustParams {
            p,
            xi,
            gamma_clamp_eps,
        })
    }

    /// `ξ = 1` and the default clamp.
    pub fn with_p(p: T) -> Result<Self, LossError> {
        Self::new(p, T::one(), T::lit(Self::DEFAULT_CLAMP_EPS))
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn xi(&self) -> T {
        self.xi
    }

    pub fn gamma_clamp_eps(&self) -> T {
        self.gamma_clamp_eps
    }

    /// Upper bound on any weight returned by [`capped_lp_weight`]:
    /// `p·ε^{p−1}`.
    pub fn kappa(&self) -> T {
        self.p * self.gamma_clamp_eps.powf(self.p - T::one())
    }

    /// Loss value at which the cap engages, `ξ^{1/p}`.
    pub fn cap_point(&self) -> T {
        self.xi.powf(self.p.recip())
    }
}

/// Supergradient of `min(u^p, ξ)` at `u = max(loss, ε)`: `p·u^{p−1}` when
/// `u^p ≤ ξ`, otherwise zero.
#[inline]
pub fn capped_lp_weight<T: Scalar>(loss: T, rp: &RobustParams<T>) -> T {
    let u = loss.max(rp.gamma_clamp_eps);
    if u.powf(rp.p) <= rp.xi {
        rp.p * u.powf(rp.p - T::one())
    } else {
        T::zero()
    }
}

/// `min(loss^p, ξ)`.
pub fn capped_value<T: Scalar>(loss: T, rp: &RobustParams<T>) -> T {
    loss.powf(rp.p).min(rp.xi)
}

/// Which piece of the concave conjugate to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualRegime {
    /// Minimizer of `γu − u^p` lies below the cap.
    BelowCap,
    /// Minimizer sits at the cap point `ξ^{1/p}`.
    AtCap,
}

/// Concave conjugate `h*(γ) = inf_u [γu − min(u^p, ξ)]` on the given piece.
///
/// Below the cap the stationary point is `u* = (γ/p)^{1/(p−1)}`, giving
/// `((p−1)/p)·p^{1/(1−p)}·γ^{p/(p−1)}`. At the cap the value is `γ·ξ^{1/p} − ξ`.
pub fn concave_dual<T: Scalar>(
    gamma: T,
    rp: &RobustParams<T>,
    regime: DualRegime,
) -> Result<T, LossError> {
    if !(gamma > T::zero()) {
        return Err(LossError::NonPositiveGamma(gamma.to_f64_lossy()));
    }
    let p = rp.p;
    Ok(match regime {
        DualRegime::BelowCap => {
            (p - T::one()) / p
                * p.powf((T::one() - p).recip())
                * gamma.powf(p / (p - T::one()))
        }
        DualRegime::AtCap => gamma * rp.cap_point() - rp.xi,
    })
}

/// Regime in which the infimum defining `h*(γ)` is attained.
pub fn dual_regime<T: Scalar>(gamma: T, rp: &RobustParams<T>) -> DualRegime {
    // u*(γ) ≤ ξ^{1/p}  ⟺  γ ≥ p·ξ^{(p−1)/p}
    if gamma >= rp.p * rp.xi.powf((rp.p - T::one()) / rp.p) {
        DualRegime::BelowCap
    } else {
        DualRegime::AtCap
    }
}

/// `h*(γ)` for any `γ ≥ 0`, choosing the attained piece (`h*(0) = −ξ`).
pub fn concave_conjugate<T: Scalar>(gamma: T, rp: &RobustParams<T>) -> Result<T, LossError> {
    if gamma == T::zero() {
        return Ok(-rp.xi);
    }
    concave_dual(gamma, rp, dual_regime(gamma, rp))
}
