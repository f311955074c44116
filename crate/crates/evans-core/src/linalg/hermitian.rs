//! Hermitian eigenproblems by cyclic Jacobi rotations, and the singular-value
//! helpers (rank, condition numbers) built on them.

use num_complex::Complex;

use crate::error::{EvansError, Result};
use crate::linalg::matrix::ComplexMatrix;
use crate::scalar::{real, Scalar};

/// Eigen-decomposition H = V diag(w) V* of a Hermitian matrix, eigenvalues
/// ascending. The Hermitian part (H + H*)/2 of the input is used.
pub fn hermitian_eigen<T: Scalar>(
    h: &ComplexMatrix<T>,
) -> Result<(Vec<T>, ComplexMatrix<T>)> {
    if !h.is_square() {
        return Err(EvansError::Dimension(format!(
            "Hermitian eigensolver needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let n = h.rows();
    let mut a = h.add(&h.adjoint()).scale(crate::scalar::cx(0.5, 0.0));
    let mut v = ComplexMatrix::identity(n);
    let scale = a.norm_fro().max(T::min_positive_value());
    let tol = T::epsilon() * scale;

    for _sweep in 0..40 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let z = a[(p, q)];
                let zn = z.norm();
                if zn <= tol * real::<T>(1e-2) {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (zn + zn);
                let t = if tau.is_zero() {
                    T::one()
                } else {
                    let s = if tau >= T::zero() { T::one() } else { -T::one() };
                    s / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let sigma = t * c;
                let s = (z / zn) * Complex::new(sigma, T::zero());
                let cc = Complex::new(c, T::zero());
                // A <- J* A J with J acting on coordinates (p, q):
                // J[p,p] = c, J[p,q] = s, J[q,p] = -conj(s), J[q,q] = c.
                for col in 0..n {
                    let x = a[(p, col)];
                    let y = a[(q, col)];
                    a[(p, col)] = cc * x - s * y;
                    a[(q, col)] = s.conj() * x + cc * y;
                }
                for row in 0..n {
                    let x = a[(row, p)];
                    let y = a[(row, q)];
                    a[(row, p)] = cc * x - s.conj() * y;
                    a[(row, q)] = s * x + cc * y;
                }
                for row in 0..n {
                    let x = v[(row, p)];
                    let y = v[(row, q)];
                    v[(row, p)] = cc * x - s.conj() * y;
                    v[(row, q)] = s * x + cc * y;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let w: Vec<T> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((w, vecs))
}

/// Singular values, largest first, by one-sided Jacobi (pairwise column
/// orthogonalization). Unlike the Gram-matrix route, small singular values
/// come out accurate to machine precision rather than to its square root,
/// which the rank thresholds rely on.
pub fn singular_values<T: Scalar>(a: &ComplexMatrix<T>) -> Result<Vec<T>> {
    // work on the tall orientation
    let mut m = if a.rows() >= a.cols() {
        a.clone()
    } else {
        a.adjoint()
    };
    let rows = m.rows();
    let cols = m.cols();
    let total = m.norm_fro().max(T::min_positive_value());
    let tol = T::epsilon() * total;
    for _sweep in 0..40 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut app = T::zero();
                let mut aqq = T::zero();
                let mut apq = Complex::new(T::zero(), T::zero());
                for i in 0..rows {
                    let x = m[(i, p)];
                    let y = m[(i, q)];
                    app = app + x.norm_sqr();
                    aqq = aqq + y.norm_sqr();
                    apq = apq + x.conj() * y;
                }
                let zn = apq.norm();
                if zn <= T::epsilon() * (app * aqq).sqrt() + tol * T::epsilon() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (zn + zn);
                let t = if tau.is_zero() {
                    T::one()
                } else {
                    let sgn = if tau >= T::zero() { T::one() } else { -T::one() };
                    sgn / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let sigma = t * c;
                let s = (apq / zn) * Complex::new(sigma, T::zero());
                let cc = Complex::new(c, T::zero());
                // columns (p, q) <- (c p - conj(s) q, s p + c q)
                for i in 0..rows {
                    let x = m[(i, p)];
                    let y = m[(i, q)];
                    m[(i, p)] = cc * x - s.conj() * y;
                    m[(i, q)] = s * x + cc * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<T> = (0..cols)
        .map(|j| {
            (0..rows)
                .fold(T::zero(), |acc, i| acc + m[(i, j)].norm_sqr())
                .sqrt()
        })
        .collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(s)
}

/// Numerical rank: singular values above `rel_tol` times the largest.
pub fn rank<T: Scalar>(a: &ComplexMatrix<T>, rel_tol: T) -> Result<usize> {
    let s = singular_values(a)?;
    let largest = s.first().copied().unwrap_or(T::zero());
    if largest.is_zero() {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_tol * largest).count())
}

/// 2-norm condition number (largest over smallest singular value).
pub fn cond2<T: Scalar>(a: &ComplexMatrix<T>) -> Result<T> {
    let s = singular_values(a)?;
    let hi = s.first().copied().unwrap_or(T::zero());
    let lo = s.last().copied().unwrap_or(T::zero());
    if lo.is_zero() {
        Ok(T::infinity())
    } else {
        Ok(hi / lo)
    }
}

/// Orthonormal basis of the range of a (possibly oblique) projector, from the
/// dominant eigenvectors of the Hermitian positive semidefinite matrix PP*.
pub fn projector_range_basis<T: Scalar>(
    p: &ComplexMatrix<T>,
    expected_rank: usize,
) -> Result<ComplexMatrix<T>> {
    let gram = p.matmul(&p.adjoint());
    let (w, v) = hermitian_eigen(&gram)?;
    let n = p.rows();
    if expected_rank > n {
        return Err(EvansError::Dimension(format!(
            "projector range rank {} exceeds dimension {}",
            expected_rank, n
        )));
    }
    // eigenvalues ascending: the top `expected_rank` carry the range
    let lead = w[n - expected_rank];
    if expected_rank > 0 && lead <= real::<T>(1e-12) {
        return Err(EvansError::Degenerate(format!(
            "projector range is rank deficient: eigenvalue {} at position {}",
            lead,
            n - expected_rank
        )));
    }
    Ok(ComplexMatrix::from_fn(n, expected_rank, |i, j| {
        v[(i, n - expected_rank + j)]
    }))
}

/// Frobenius inner-product free utility: smallest/largest singular value pair.
pub fn sval_extremes<T: Scalar>(a: &ComplexMatrix<T>) -> Result<(T, T)> {
    let s = singular_values(a)?;
    Ok((
        s.last().copied().unwrap_or(T::zero()),
        s.first().copied().unwrap_or(T::zero()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;
    use rand::{Rng, SeedableRng};

    type M = ComplexMatrix<f64>;

    #[test]
    fn diagonalizes_random_hermitian() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 4, 7] {
            let b = M::from_fn(n, n, |_, _| {
                cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let h = b.add(&b.adjoint()).scale(cx(0.5, 0.0));
            let (w, v) = hermitian_eigen(&h).unwrap();
            // reconstruction
            let d = M::from_fn(n, n, |i, j| if i == j { cx(w[i], 0.0) } else { cx(0.0, 0.0) });
            let recon = v.matmul(&d).matmul(&v.adjoint());
            assert!(recon.sub(&h).norm_fro() < 1e-11 * h.norm_fro().max(1.0));
            // orthonormality
            assert!(v.adjoint().matmul(&v).sub(&M::identity(n)).norm_fro() < 1e-11);
            // ascending
            for i in 1..n {
                assert!(w[i - 1] <= w[i] + 1e-13);
            }
        }
    }

    #[test]
    fn singular_values_of_known_matrix() {
        // diag(3, -4) has singular values {4, 3}
        let a = M::from_real_rows(&[&[3.0, 0.0], &[0.0, -4.0]]);
        let s = singular_values(&a).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-12);
        assert!((s[1] - 3.0).abs() < 1e-12);
        assert_eq!(rank(&a, 1e-8).unwrap(), 2);
    }

    #[test]
    fn rank_detects_deficiency() {
        let a = M::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(rank(&a, 1e-8).unwrap(), 1);
    }
}
