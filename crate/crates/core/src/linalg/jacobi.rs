use crate::linalg::{dot, LinalgError, Mat};
use crate::Scalar;

/// Largest `min(rows, cols)` accepted by the dense decompositions.
pub const ORACLE_MAX_DIM: usize = 64;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `M = U·diag(sigma)·Vᵀ` with `sigma` nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    /// `rows × k` with `k = min(rows, cols)`.
    pub u: Mat<T>,
    pub sigma: Vec<T>,
    /// `cols × k`.
    pub v: Mat<T>,
}

impl<T: Scalar> Svd<T> {
    pub fn reconstruct(&self) -> Mat<T> {
        let mut us = self.u.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            us.col_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        us.matmul(&self.v.transpose())
            .expect("svd factors have matching shapes")
    }

    pub fn rank(&self, tol: T) -> usize {
        self.sigma.iter().filter(|&&s| s > tol).count()
    }
}

/// One-sided (Hestenes) Jacobi SVD, rotating the columns of whichever of
/// `M`, `Mᵀ` has fewer columns. `O(rows·cols·min)` per sweep.
pub fn full_svd<T: Scalar>(m: &Mat<T>) -> Result<Svd<T>, LinalgError> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows.min(cols) > ORACLE_MAX_DIM {
        return Err(LinalgError::OracleTooLarge {
            rows,
            cols,
            cap: ORACLE_MAX_DIM,
        });
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if rows >= cols {
        one_sided(m)
    } else {
        let t = one_sided(&m.transpose())?;
        Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

// Requires rows >= cols.
fn one_sided<T: Scalar>(m: &Mat<T>) -> Result<Svd<T>, LinalgError> {
    let n = m.cols();
    let mut a = m.clone();
    let mut v = Mat::<T>::identity(n);
    let eps = T::jacobi_tol();
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(a.col(p), a.col(p));
                let beta = dot(a.col(q), a.col(q));
                let gamma = dot(a.col(p), a.col(q));
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_cols(&mut a, p, q, c, s);
                rotate_cols(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(LinalgError::JacobiNoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut sigma: Vec<T> = (0..n).map(|j| dot(a.col(j), a.col(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());

    let mut u_out = Mat::zeros(m.rows(), n);
    let mut v_out = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let s = sigma[src];
        let col: Vec<T> = if s > T::zero() {
            a.col(src).iter().map(|&x| x / s).collect()
        } else {
            a.col(src).to_vec()
        };
        u_out.set_col(dst, &col);
        v_out.set_col(dst, v.col(src));
    }
    sigma = order.iter().map(|&i| sigma[i]).collect();
    Ok(Svd {
        u: u_out,
        sigma,
        v: v_out,
    })
}

fn rotate_cols<T: Scalar>(a: &mut Mat<T>, p: usize, q: usize, c: T, s: T) {
    for r in 0..a.rows() {
        let x = a.get(r, p);
        let y = a.get(r, q);
        a.set(r, p, c * x - s * y);
        a.set(r, q, s * x + c * y);
    }
}

/// Sum of singular values.
pub fn nuclear_norm<T: Scalar>(m: &Mat<T>) -> Result<T, LinalgError> {
    Ok(full_svd(m)?.sigma.into_iter().sum())
}

/// Eigenvalues of a symmetric matrix in nonincreasing order (cyclic Jacobi).
pub fn symmetric_eigenvalues<T: Scalar>(s: &Mat<T>) -> Result<Vec<T>, LinalgError> {
    if !s.is_square() {
        return Err(LinalgError::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    if !s.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let sym_tol = T::lit(1e-12) * s.max_abs().max(T::one());
    if !s.is_symmetric(sym_tol) {
        return Err(LinalgError::NotSymmetric);
    }
    let n = s.rows();
    let mut a = s.clone();
    let eps = T::jacobi_tol();
    // Rotations preserve the Frobenius norm; entries below eps·‖S‖_F are noise.
    let floor = eps * s.frobenius_norm();
    let mut done = n < 2;
    for _ in 0..MAX_SWEEPS {
        if done {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= floor {
                    continue;
                }
                rotated = true;
                let theta = (a.get(q, q) - a.get(p, p)) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let sn = t * c;
                // A ← Jᵀ A J on rows/columns p, q.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - sn * akq);
                    a.set(k, q, sn * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - sn * aqk);
                    a.set(q, k, sn * apk + c * aqk);
                }
                a.set(p, q, T::zero());
                a.set(q, p, T::zero());
            }
        }
        done = !rotated;
    }
    if !done {
        return Err(LinalgError::JacobiNoConvergence { sweeps: MAX_SWEEPS });
    }
    let mut ev: Vec<T> = (0..n).map(|i| a.get(i, i)).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(ev)
}

/// `max(|λ₂|, |λₘ|)` of a symmetric matrix, eigenvalues sorted descending.
///
/// Eigenvalues within `64·ε·‖S‖_F` of zero are snapped to zero so that exact
/// averaging matrices report exactly zero.
pub fn second_largest_abs_eigenvalue<T: Scalar>(s: &Mat<T>) -> Result<T, LinalgError> {
    let ev = symmetric_eigenvalues(s)?;
    if ev.len() < 2 {
        return Ok(T::zero());
    }
    let snap = T::lit(64.0) * T::jacobi_tol() * s.frobenius_norm();
    let clean = |x: T| if x.abs() <= snap { T::zero() } else { x.abs() };
    Ok(clean(ev[1]).max(clean(ev[ev.len() - 1])))
}
