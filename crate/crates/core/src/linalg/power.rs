use crate::linalg::{norm2, normalize, LinalgError, Mat};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOpts<T> {
    /// Converged once `‖Mᵀu − σv‖ ≤ tol·max(1, σ)`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for PowerOpts<T> {
    fn default() -> Self {
        PowerOpts {
            tol: T::power_tol(),
            max_iter: 1000,
        }
    }
}

/// Leading singular value with unit singular vectors, `M v = σ u`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularTriple<T> {
    pub sigma: T,
    pub u: Vec<T>,
    pub v: Vec<T>,
    /// Operator applications performed (one `Mᵀ(M v)` per iteration).
    pub iterations: usize,
}

/// Power iteration on `v ↦ Mᵀ(M v)` without forming `MᵀM`; each iteration
/// costs two passes over `M`.
///
/// The start vector is the normalized all-ones vector with the first
/// coordinate bumped by one half, so results are reproducible bit for bit.
/// Signs are fixed so that the first entry of `u` with magnitude above 1e-12
/// is positive.
pub fn leading_singular_triple<T: Scalar>(
    m: &Mat<T>,
    opts: &PowerOpts<T>,
) -> Result<SingularTriple<T>, LinalgError> {
    let (triple, residual) = power_iteration(m, opts)?;
    match residual {
        None => Ok(triple),
        Some(r) => Err(LinalgError::NoConvergence {
            iterations: opts.max_iter,
            residual: r.to_f64_lossy(),
        }),
    }
}

/// Like [`leading_singular_triple`], but when `max_iter` runs out the last
/// iterate is returned along with its residual. With a (near) repeated
/// leading singular value that iterate still lies close to the leading space.
pub fn power_iteration<T: Scalar>(
    m: &Mat<T>,
    opts: &PowerOpts<T>,
) -> Result<(SingularTriple<T>, Option<T>), LinalgError> {
    if !(opts.tol > T::zero()) {
        return Err(LinalgError::InvalidArgument("tol must be positive"));
    }
    if opts.max_iter == 0 {
        return Err(LinalgError::InvalidArgument("max_iter must be at least 1"));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Err(LinalgError::InvalidArgument("empty matrix"));
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if m.is_zero() {
        let triple = SingularTriple {
            sigma: T::zero(),
            u: unit(m.rows(), 0),
            v: unit(m.cols(), 0),
            iterations: 0,
        };
        return Ok((triple, None));
    }

    let mut v = vec![T::one(); m.cols()];
    v[0] += T::lit(0.5);
    normalize(&mut v);
    if norm2(&m.mul_vec(&v)) == T::zero() {
        // Start vector in the null space: restart on the heaviest column.
        let norms = m.column_norms();
        let j = (0..norms.len())
            .max_by(|&a, &b| norms[a].partial_cmp(&norms[b]).unwrap())
            .unwrap_or(0);
        v = unit(m.cols(), j);
    }

    let mut it = 0;
    loop {
        it += 1;
        let mut u = m.mul_vec(&v);
        let sigma = normalize(&mut u);
        let mut next = m.tr_mul_vec(&u);
        let residual = next
            .iter()
            .zip(&v)
            .map(|(&y, &x)| (y - sigma * x) * (y - sigma * x))
            .sum::<T>()
            .sqrt();
        let converged = residual <= opts.tol * sigma.max(T::one());
        if converged || it == opts.max_iter {
            fix_sign(&mut u, &mut v);
            let triple = SingularTriple {
                sigma,
                u,
                v,
                iterations: it,
            };
            return Ok((triple, (!converged).then_some(residual)));
        }
        normalize(&mut next);
        v = next;
    }
}

fn unit<T: Scalar>(n: usize, k: usize) -> Vec<T> {
    let mut e = vec![T::zero(); n];
    e[k] = T::one();
    e
}

fn fix_sign<T: Scalar>(u: &mut [T], v: &mut [T]) {
    let thresh = T::lit(1e-12);
    if let Some(&first) = u.iter().find(|x| x.abs() > thresh) {
        if first < T::zero() {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> PowerOpts<f64> {
        PowerOpts::default()
    }

    #[test]
    fn diagonal_matrix() {
        let m = Mat::diag(&[3.0, 1.0]);
        let t = leading_singular_triple(&m, &opts()).unwrap();
        assert!((t.sigma - 3.0).abs() < 1e-12);
        assert!((t.u[0] - 1.0).abs() < 1e-9 && t.u[1].abs() < 1e-9);
        assert!((t.v[0] - 1.0).abs() < 1e-9 && t.v[1].abs() < 1e-9);
    }

    #[test]
    fn rank_one_symmetric() {
        let m = Mat::from_row_major(2, 2, &[2.0, 2.0, 2.0, 2.0]).unwrap();
        let t = leading_singular_triple(&m, &opts()).unwrap();
        let h = 0.5f64.sqrt();
        assert!((t.sigma - 4.0).abs() < 1e-12);
        for k in 0..2 {
            assert!((t.u[k] - h).abs() < 1e-12);
            assert!((t.v[k] - h).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_is_canonical() {
        let t = leading_singular_triple(&Mat::<f64>::zeros(3, 2), &opts()).unwrap();
        assert_eq!(t.sigma, 0.0);
        assert_eq!(t.u, vec![1.0, 0.0, 0.0]);
        assert_eq!(t.v, vec![1.0, 0.0]);
    }

    #[test]
    fn reports_non_convergence_with_residual() {
        // σ₁/σ₂ = 1.0001: far too slow for three iterations.
        let m = Mat::diag(&[1.0001, 1.0, 0.5]);
        let err = leading_singular_triple(
            &m,
            &PowerOpts {
                tol: 1e-12,
                max_iter: 3,
            },
        )
        .unwrap_err();
        match err {
            LinalgError::NoConvergence {
                iterations,
                residual,
            } => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_options() {
        let m = Mat::<f64>::identity(2);
        assert!(leading_singular_triple(&m, &PowerOpts { tol: 0.0, max_iter: 5 }).is_err());
        assert!(leading_singular_triple(&m, &PowerOpts { tol: 1e-3, max_iter: 0 }).is_err());
    }

    #[test]
    fn null_space_start_vector_recovers() {
        // Mv₀ = 0 for the default start vector (1.5, 1)/‖·‖.
        let m = Mat::from_row_major(1, 2, &[1.0, -1.5]).unwrap();
        let t = leading_singular_triple(&m, &opts()).unwrap();
        assert!((t.sigma - (1.0f64 + 2.25).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn works_in_single_precision() {
        let m = Mat::<f32>::diag(&[2.0, 0.5, 0.25]);
        let t = leading_singular_triple(&m, &PowerOpts::default()).unwrap();
        assert!((t.sigma - 2.0).abs() < 1e-5);
    }
}
