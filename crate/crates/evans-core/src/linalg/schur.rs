//! Complex Schur decomposition A = Q U Q* with the diagonal of U ordered by
//! real part, via Householder reduction to Hessenberg form followed by
//! single-shift QR iteration and adjacent-eigenvalue swaps.
//!
//! Ordering the diagonal makes the leading columns of Q an orthonormal basis
//! of the invariant subspace belonging to the smallest (or largest) real-part
//! eigenvalues, which is what the eigenprojection and subspace-tracking code
//! consumes.

use num_complex::Complex;

use crate::error::{EvansError, Result};
use crate::linalg::matrix::ComplexMatrix;
use crate::scalar::{czero, real, Cx, Scalar};

/// Unitary similarity A = Q U Q* with U upper triangular.
#[derive(Debug, Clone)]
pub struct OrderedSchur<T> {
    /// Unitary factor.
    pub q: ComplexMatrix<T>,
    /// Upper triangular factor; its diagonal carries the eigenvalues.
    pub u: ComplexMatrix<T>,
    /// Diagonal of `u` sorted by nondecreasing real part when set,
    /// nonincreasing otherwise.
    pub real_parts_ascending: bool,
}

impl<T: Scalar> OrderedSchur<T> {
    /// Eigenvalues read off the diagonal of U, in the stored order.
    pub fn eigenvalues(&self) -> Vec<Cx<T>> {
        (0..self.u.rows()).map(|i| self.u[(i, i)]).collect()
    }
}

/// Plane rotation mapping (a, b) to (r, 0): returns (u, v) with u = a/r,
/// v = b/r so that the unitary [[ū, v̄], [-v, u]] applied from the left
/// annihilates the second component.
fn givens<T: Scalar>(a: Cx<T>, b: Cx<T>) -> (Cx<T>, Cx<T>) {
    let bn = b.norm();
    if bn.is_zero() {
        return (Complex::new(T::one(), T::zero()), czero());
    }
    let an = a.norm();
    let norm = (an * an + bn * bn).sqrt();
    let phase = if an.is_zero() {
        Complex::new(T::one(), T::zero())
    } else {
        a / an
    };
    let r = phase * norm;
    (a / r, b / r)
}

/// Reduce to upper Hessenberg form by Householder reflections, accumulating
/// the transform into `q`.
fn hessenberg<T: Scalar>(h: &mut ComplexMatrix<T>, q: &mut ComplexMatrix<T>) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        // Column k below the subdiagonal.
        let m = n - k - 1;
        let mut x: Vec<Cx<T>> = (0..m).map(|i| h[(k + 1 + i, k)]).collect();
        let tail: T = x[1..].iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
        let x0n = x[0].norm();
        if tail <= T::epsilon() * T::epsilon() * (x0n * x0n + tail) {
            continue; // already Hessenberg in this column
        }
        let norm = (x0n * x0n + tail).sqrt();
        let phase = if x0n.is_zero() {
            Complex::new(T::one(), T::zero())
        } else {
            x[0] / x0n
        };
        let alpha = -phase * norm;
        x[0] = x[0] - alpha;
        let un = x.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
        let v: Vec<Cx<T>> = x.iter().map(|z| *z / un).collect();
        let two = real::<T>(2.0);

        // H <- (I - 2vv*) H on rows k+1..n
        for col in k..n {
            let dot = (0..m).fold(czero::<T>(), |acc, i| acc + v[i].conj() * h[(k + 1 + i, col)]);
            for i in 0..m {
                let sub = (v[i] * dot).scale(two);
                h[(k + 1 + i, col)] = h[(k + 1 + i, col)] - sub;
            }
        }
        // H <- H (I - 2vv*) on columns k+1..n
        for row in 0..n {
            let dot = (0..m).fold(czero::<T>(), |acc, i| acc + h[(row, k + 1 + i)] * v[i]);
            for i in 0..m {
                let sub = (dot * v[i].conj()).scale(two);
                h[(row, k + 1 + i)] = h[(row, k + 1 + i)] - sub;
            }
        }
        // Q <- Q (I - 2vv*)
        for row in 0..n {
            let dot = (0..m).fold(czero::<T>(), |acc, i| acc + q[(row, k + 1 + i)] * v[i]);
            for i in 0..m {
                let sub = (dot * v[i].conj()).scale(two);
                q[(row, k + 1 + i)] = q[(row, k + 1 + i)] - sub;
            }
        }
    }
}

/// Wilkinson shift: eigenvalue of the trailing 2x2 block closest to the
/// bottom-right entry.
fn wilkinson_shift<T: Scalar>(h: &ComplexMatrix<T>, hi: usize) -> Cx<T> {
    let a = h[(hi - 1, hi - 1)];
    let b = h[(hi - 1, hi)];
    let c = h[(hi, hi - 1)];
    let d = h[(hi, hi)];
    let tr = a + d;
    let det = a * d - b * c;
    let half = real::<T>(0.5);
    let disc = (tr * tr - det.scale(real::<T>(4.0))).sqrt();
    let e1 = (tr + disc).scale(half);
    let e2 = (tr - disc).scale(half);
    if (e1 - d).norm() <= (e2 - d).norm() {
        e1
    } else {
        e2
    }
}

/// One explicit shifted QR sweep on the active window [lo, hi].
fn qr_step<T: Scalar>(
    h: &mut ComplexMatrix<T>,
    q: &mut ComplexMatrix<T>,
    lo: usize,
    hi: usize,
    shift: Cx<T>,
) {
    let n = h.rows();
    for i in lo..=hi {
        h[(i, i)] = h[(i, i)] - shift;
    }
    let mut rots: Vec<(Cx<T>, Cx<T>)> = Vec::with_capacity(hi - lo);
    for i in lo..hi {
        let (u, v) = givens(h[(i, i)], h[(i + 1, i)]);
        for col in i..n {
            let x = h[(i, col)];
            let y = h[(i + 1, col)];
            h[(i, col)] = u.conj() * x + v.conj() * y;
            h[(i + 1, col)] = -v * x + u * y;
        }
        rots.push((u, v));
    }
    for (idx, &(u, v)) in rots.iter().enumerate() {
        let i = lo + idx;
        for row in 0..=(i + 1) {
            let x = h[(row, i)];
            let y = h[(row, i + 1)];
            h[(row, i)] = u * x + v * y;
            h[(row, i + 1)] = -v.conj() * x + u.conj() * y;
        }
        for row in 0..n {
            let x = q[(row, i)];
            let y = q[(row, i + 1)];
            q[(row, i)] = u * x + v * y;
            q[(row, i + 1)] = -v.conj() * x + u.conj() * y;
        }
    }
    for i in lo..=hi {
        h[(i, i)] = h[(i, i)] + shift;
    }
}

/// Swap the diagonal entries at positions (p, p+1) of upper triangular `u`
/// by a unitary similarity, keeping triangularity.
fn swap_adjacent<T: Scalar>(u: &mut ComplexMatrix<T>, q: &mut ComplexMatrix<T>, p: usize) {
    let n = u.rows();
    let a = u[(p, p)];
    let b = u[(p, p + 1)];
    let d = u[(p + 1, p + 1)];
    // Eigenvector of [[a, b], [0, d]] for eigenvalue d.
    let v1 = b;
    let v2 = d - a;
    let vn = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if vn <= T::epsilon() * (a.norm() + d.norm() + b.norm()) {
        return; // coincident eigenvalues; order is immaterial
    }
    let g1 = v1 / vn;
    let g2 = v2 / vn;
    // Rows p, p+1: left-multiply by G* = [[ḡ1, ḡ2], [-g2, g1]].
    for col in p..n {
        let x = u[(p, col)];
        let y = u[(p + 1, col)];
        u[(p, col)] = g1.conj() * x + g2.conj() * y;
        u[(p + 1, col)] = -g2 * x + g1 * y;
    }
    // Columns p, p+1: right-multiply by G = [[g1, -ḡ2], [g2, ḡ1]].
    for row in 0..=(p + 1) {
        let x = u[(row, p)];
        let y = u[(row, p + 1)];
        u[(row, p)] = g1 * x + g2 * y;
        u[(row, p + 1)] = -g2.conj() * x + g1.conj() * y;
    }
    for row in 0..n {
        let x = q[(row, p)];
        let y = q[(row, p + 1)];
        q[(row, p)] = g1 * x + g2 * y;
        q[(row, p + 1)] = -g2.conj() * x + g1.conj() * y;
    }
    u[(p + 1, p)] = czero();
}

/// Ordered Schur decomposition.
///
/// Factors a square complex matrix as A = Q U Q* with Q unitary and U upper
/// triangular whose diagonal is sorted by real part (`ascending` chooses the
/// direction). Fails with a numerical error, including norm diagnostics, if
/// the QR iteration stalls or the factorization check degrades.
pub fn ordered_schur<T: Scalar>(
    a: &ComplexMatrix<T>,
    ascending: bool,
) -> Result<OrderedSchur<T>> {
    if !a.is_square() {
        return Err(EvansError::Dimension(format!(
            "Schur decomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.all_finite() {
        return Err(EvansError::Numerical(
            "Schur decomposition of a matrix with non-finite entries".into(),
        ));
    }
    let n = a.rows();
    let mut h = a.clone();
    let mut q = ComplexMatrix::identity(n);
    hessenberg(&mut h, &mut q);

    let hnorm = h.norm_fro().max(T::min_positive_value());
    let eps = T::epsilon();
    let abs_floor = eps * hnorm;
    let is_small = |h: &ComplexMatrix<T>, i: usize| -> bool {
        let sub = h[(i, i - 1)].norm();
        sub <= eps * (h[(i - 1, i - 1)].norm() + h[(i, i)].norm()) || sub <= abs_floor
    };

    let mut hi = n.saturating_sub(1);
    let mut stagnant = 0usize;
    let mut total = 0usize;
    let max_total = 60 * n * n + 200;
    while hi > 0 {
        if is_small(&h, hi) {
            h[(hi, hi - 1)] = czero();
            hi -= 1;
            stagnant = 0;
            continue;
        }
        let mut lo = hi;
        while lo > 0 && !is_small(&h, lo) {
            lo -= 1;
        }
        if lo > 0 {
            h[(lo, lo - 1)] = czero();
        }
        total += 1;
        stagnant += 1;
        if total > max_total {
            return Err(EvansError::Numerical(format!(
                "QR iteration did not converge after {} sweeps (|A| = {}, residual subdiagonal |H[{},{}]| = {})",
                total,
                hnorm,
                hi,
                hi - 1,
                h[(hi, hi - 1)].norm()
            )));
        }
        let shift = if stagnant % 16 == 0 {
            // Exceptional shift to break rare symmetric cycles.
            h[(hi, hi)] + Complex::new(h[(hi, hi - 1)].norm() * real::<T>(0.75), T::zero())
        } else {
            wilkinson_shift(&h, hi)
        };
        qr_step(&mut h, &mut q, lo, hi, shift);
    }
    for i in 1..n {
        for j in 0..i {
            h[(i, j)] = czero();
        }
    }

    // Bubble the diagonal into the requested order.
    loop {
        let mut swapped = false;
        for p in 0..n.saturating_sub(1) {
            let rp = h[(p, p)].re;
            let rn = h[(p + 1, p + 1)].re;
            let out_of_order = if ascending { rp > rn } else { rp < rn };
            if out_of_order {
                swap_adjacent(&mut h, &mut q, p);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }

    // Factorization quality gates.
    let tol = eps * real::<T>(1e4) * T::from_usize(n.max(1)).unwrap();
    let qtq = q.adjoint().matmul(&q);
    let unit_err = qtq.sub(&ComplexMatrix::identity(n)).norm_fro();
    if unit_err > tol {
        return Err(EvansError::Numerical(format!(
            "Schur Q lost unitarity: |Q*Q - I| = {} (|A| = {})",
            unit_err, hnorm
        )));
    }
    let recon = q.matmul(&h).matmul(&q.adjoint());
    let recon_err = recon.sub(a).norm_fro();
    if recon_err > tol * hnorm.max(T::one()) {
        return Err(EvansError::Numerical(format!(
            "Schur reconstruction error |QUQ* - A| = {} exceeds {} (|A| = {})",
            recon_err,
            tol * hnorm.max(T::one()),
            hnorm
        )));
    }

    Ok(OrderedSchur {
        q,
        u: h,
        real_parts_ascending: ascending,
    })
}

/// Eigenvalues of a square matrix, sorted by (real part, imaginary part).
pub fn eigenvalues<T: Scalar>(a: &ComplexMatrix<T>) -> Result<Vec<Cx<T>>> {
    let schur = ordered_schur(a, true)?;
    let mut ev = schur.eigenvalues();
    ev.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    type M = ComplexMatrix<f64>;

    fn assert_schur_ok(a: &M, s: &OrderedSchur<f64>) {
        let n = a.rows();
        let qtq = s.q.adjoint().matmul(&s.q);
        assert!(qtq.sub(&M::identity(n)).norm_fro() <= 1e-10 * n as f64);
        let recon = s.q.matmul(&s.u).matmul(&s.q.adjoint());
        assert!(recon.sub(a).norm_fro() <= 1e-10 * a.norm_fro().max(1.0));
        for p in 0..n.saturating_sub(1) {
            assert!(s.u[(p, p)].re <= s.u[(p + 1, p + 1)].re + 1e-12);
        }
    }

    #[test]
    fn already_triangular_and_ordered() {
        let a = M::from_real_rows(&[&[-1.0, 0.0], &[0.0, 2.0]]);
        let s = ordered_schur(&a, true).unwrap();
        assert_schur_ok(&a, &s);
        assert!((s.q.sub(&M::identity(2))).norm_fro() < 1e-12);
        assert!((s.u[(0, 0)] - cx(-1.0, 0.0)).norm() < 1e-12);
        assert!((s.u[(1, 1)] - cx(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn permutation_case() {
        let a = M::from_real_rows(&[&[2.0, 0.0], &[0.0, -1.0]]);
        let s = ordered_schur(&a, true).unwrap();
        assert_schur_ok(&a, &s);
        assert!((s.u[(0, 0)].re + 1.0).abs() < 1e-12);
        assert!((s.u[(1, 1)].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_flip() {
        // Eigenpairs: -1 with (1,-1)/sqrt(2), +1 with (1,1)/sqrt(2).
        let a = M::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let s = ordered_schur(&a, true).unwrap();
        assert_schur_ok(&a, &s);
        assert!((s.u[(0, 0)] - cx(-1.0, 0.0)).norm() < 1e-10);
        assert!((s.u[(1, 1)] - cx(1.0, 0.0)).norm() < 1e-10);
        // First Schur vector spans the eigendirection (1, -1)/sqrt(2).
        let q0 = s.q.col(0);
        let overlap = (q0[0] - q0[1]).norm() / 2.0_f64.sqrt();
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn random_matrices_reconstruct_and_preserve_spectrum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 5, 8] {
            for _ in 0..6 {
                let a = M::from_fn(n, n, |_, _| {
                    cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let s = ordered_schur(&a, true).unwrap();
                assert_schur_ok(&a, &s);
                // spectrum check: sum and product of eigenvalues match
                // trace and determinant
                let ev = s.eigenvalues();
                let sum = ev.iter().fold(cx::<f64>(0.0, 0.0), |acc, z| acc + z);
                assert!((sum - a.trace()).norm() < 1e-9 * a.norm_fro().max(1.0));
                let prod = ev.iter().fold(cx::<f64>(1.0, 0.0), |acc, z| acc * z);
                assert!((prod - a.det().unwrap()).norm() < 1e-8 * a.norm_fro().max(1.0).powi(n as i32));
            }
        }
    }

    #[test]
    fn descending_order() {
        let a = M::from_real_rows(&[&[1.0, 2.0, 3.0], &[0.0, -2.0, 1.0], &[0.0, 0.0, 4.0]]);
        let s = ordered_schur(&a, false).unwrap();
        let ev = s.eigenvalues();
        assert!((ev[0].re - 4.0).abs() < 1e-10);
        assert!((ev[1].re - 1.0).abs() < 1e-10);
        assert!((ev[2].re + 2.0).abs() < 1e-10);
    }
}
