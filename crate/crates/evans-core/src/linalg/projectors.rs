//! Spectral projections onto invariant subspaces split by eigenvalue real
//! part, and the Sylvester-operator spectrum governing orthonormality-error
//! dynamics of continuous orthogonalization.
//!
//! The projectors are assembled from orthonormal Schur bases of the right and
//! left invariant subspaces,
//!
//! ```text
//! Pi_s = Rs (Ls* Rs)^{-1} Ls*,    Pi_u = Ru (Lu* Ru)^{-1} Lu*,
//! ```
//!
//! never from sums of eigenvector outer products, which degrade when
//! eigenvalues inside one group collide.

use crate::error::{EvansError, Result};
use crate::linalg::hermitian::{cond2, sval_extremes};
use crate::linalg::matrix::ComplexMatrix;
use crate::linalg::schur::{eigenvalues, ordered_schur};
use crate::scalar::{real, Cx, Scalar};

/// Which end of the real-part-ordered spectrum a subspace belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralEnd {
    SmallestReal,
    LargestReal,
}

/// Complementary spectral projectors for a split of fixed rank.
#[derive(Debug, Clone)]
pub struct ProjectorPair<T> {
    /// Projector onto the invariant subspace of the `stable_rank`
    /// smallest-real-part eigenvalues.
    pub stable: ComplexMatrix<T>,
    /// Complementary projector; `stable + unstable = I`.
    pub unstable: ComplexMatrix<T>,
    /// Rank of the stable-side projector.
    pub stable_rank: usize,
}

/// Orthonormal basis (Schur vectors) of the invariant subspace belonging to
/// the `rank` eigenvalues at the chosen end of the real-part ordering.
pub fn invariant_subspace_basis<T: Scalar>(
    a: &ComplexMatrix<T>,
    rank: usize,
    end: SpectralEnd,
) -> Result<ComplexMatrix<T>> {
    if rank == 0 || rank > a.rows() {
        return Err(EvansError::Dimension(format!(
            "invariant subspace rank {} out of range for {}x{} matrix",
            rank,
            a.rows(),
            a.cols()
        )));
    }
    let target = match end {
        SpectralEnd::SmallestReal => a.clone(),
        // Leading Schur vectors of -A span the largest-real-part subspace of A.
        SpectralEnd::LargestReal => a.scale(crate::scalar::cx(-1.0, 0.0)),
    };
    let schur = ordered_schur(&target, true)?;
    Ok(schur.q.columns(0, rank))
}

/// Stable/unstable eigenprojections with an explicit split rank.
///
/// `stable_rank` counts how many smallest-real-part eigenvalues form the
/// "stable side"; splitting by count rather than by sign lets a caller track
/// a fixed-dimension subspace across the imaginary axis. Fails with a split
/// error when the real-part gap at the split closes or the left/right bases
/// become nearly orthogonal.
pub fn eigenprojections<T: Scalar>(
    a: &ComplexMatrix<T>,
    stable_rank: usize,
) -> Result<ProjectorPair<T>> {
    if !a.is_square() {
        return Err(EvansError::Dimension(format!(
            "eigenprojections of non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if stable_rank == 0 || stable_rank >= n {
        return Err(EvansError::Dimension(format!(
            "stable rank {} must lie strictly between 0 and {}",
            stable_rank, n
        )));
    }

    // Gap at the split boundary.
    let ev = eigenvalues(a)?;
    let gap = ev[stable_rank].re - ev[stable_rank - 1].re;
    if gap < real::<T>(2e-10) {
        return Err(EvansError::Split(format!(
            "real-part gap {:e} at split rank {} is below 2e-10 (eigenvalues {} and {})",
            gap.to_f64().unwrap_or(f64::NAN),
            stable_rank,
            ev[stable_rank - 1],
            ev[stable_rank]
        )));
    }

    let k = stable_rank;
    let r_s = invariant_subspace_basis(a, k, SpectralEnd::SmallestReal)?;
    let r_u = invariant_subspace_basis(a, n - k, SpectralEnd::LargestReal)?;
    let astar = a.adjoint();
    let l_s = invariant_subspace_basis(&astar, k, SpectralEnd::SmallestReal)?;
    let l_u = invariant_subspace_basis(&astar, n - k, SpectralEnd::LargestReal)?;

    let build = |r: &ComplexMatrix<T>, l: &ComplexMatrix<T>| -> Result<ComplexMatrix<T>> {
        let overlap = l.adjoint().matmul(r);
        let (smin, smax) = sval_extremes(&overlap)?;
        if smin <= real::<T>(1e-12) * smax.max(T::min_positive_value()) {
            let cond = cond2(&overlap)?;
            return Err(EvansError::Split(format!(
                "left/right subspace overlap is numerically singular (condition number {:e}); split rank mismatch",
                cond.to_f64().unwrap_or(f64::INFINITY)
            )));
        }
        // R (L*R)^{-1} L*
        let solved = overlap.solve(&l.adjoint())?;
        Ok(r.matmul(&solved))
    };

    let stable = build(&r_s, &l_s)?;
    let unstable = build(&r_u, &l_u)?;

    // Construction-time sanity: idempotency and complementarity.
    let tol = real::<T>(1e-10).max(T::epsilon() * real::<T>(1e3))
        * T::from_usize(n).unwrap();
    let idem = stable.matmul(&stable).sub(&stable).norm_fro();
    let compl_err = stable.add(&unstable).sub(&ComplexMatrix::identity(n)).norm_fro();
    if idem > tol || compl_err > tol {
        return Err(EvansError::Numerical(format!(
            "projector quality check failed: |P^2 - P| = {}, |Ps + Pu - I| = {}",
            idem, compl_err
        )));
    }

    Ok(ProjectorPair {
        stable,
        unstable,
        stable_rank,
    })
}

/// Spectrum of the Sylvester operator E -> -(E G + G* E) for G = alpha:
/// the k^2 values -(conj(a_j) + a_k) over all eigenvalue pairs of alpha.
///
/// These are the decay rates, in backward x, of the orthonormality error of
/// the Drury flow about an invariant-subspace equilibrium whose restricted
/// matrix is alpha. Logs a warning when alpha is nearly defective, since the
/// modal picture degrades there.
pub fn sylvester_spectrum<T: Scalar>(alpha: &ComplexMatrix<T>) -> Result<Vec<Cx<T>>> {
    if !alpha.is_square() {
        return Err(EvansError::Dimension(format!(
            "sylvester_spectrum of non-square {}x{} matrix",
            alpha.rows(),
            alpha.cols()
        )));
    }
    let ev = eigenvalues(alpha)?;
    let k = ev.len();
    let scale = alpha.norm_fro().max(T::one());
    'outer: for i in 0..k {
        for j in (i + 1)..k {
            if (ev[i] - ev[j]).norm() < real::<T>(1e-8) * scale {
                log::warn!(
                    "sylvester_spectrum: eigenvalues {} and {} nearly coincide; matrix may be defective",
                    ev[i],
                    ev[j]
                );
                break 'outer;
            }
        }
    }
    let mut out = Vec::with_capacity(k * k);
    for aj in &ev {
        for ak in &ev {
            out.push(-(aj.conj() + ak));
        }
    }
    out.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;
    use rand::{Rng, SeedableRng};

    type M = ComplexMatrix<f64>;

    #[test]
    fn diagonal_projectors() {
        let a = M::from_real_rows(&[&[-1.0, 0.0], &[0.0, 2.0]]);
        let p = eigenprojections(&a, 1).unwrap();
        let ps = M::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let pu = M::from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert!(p.stable.sub(&ps).norm_fro() < 1e-12);
        assert!(p.unstable.sub(&pu).norm_fro() < 1e-12);
    }

    #[test]
    fn symmetric_flip_projectors() {
        // Hand eigendecomposition: eigenvalues -1, +1 with eigenvectors
        // (1,-1)/sqrt(2) and (1,1)/sqrt(2), so Pi_s = [[1,-1],[-1,1]]/2.
        let a = M::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let p = eigenprojections(&a, 1).unwrap();
        let ps = M::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        let pu = M::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(p.stable.sub(&ps).norm_fro() < 1e-10);
        assert!(p.unstable.sub(&pu).norm_fro() < 1e-10);
    }

    #[test]
    fn companion_projector_spans_stable_eigenvector() {
        // [[0,1],[4,0]] has eigenvalues +-2 with eigenvectors (1, mu);
        // the stable one is (1, -2).
        let a = M::from_real_rows(&[&[0.0, 1.0], &[4.0, 0.0]]);
        let p = eigenprojections(&a, 1).unwrap();
        let v = vec![cx(1.0, 0.0), cx(-2.0, 0.0)];
        let pv = p.stable.matvec(&v);
        let diff: f64 = pv
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-10);
        let pu_v = p.unstable.matvec(&v);
        let pu_norm: f64 = pu_v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(pu_norm < 1e-10);
    }

    #[test]
    fn split_error_on_coincident_real_parts() {
        let a = M::from_real_rows(&[&[1.0, 5.0], &[0.0, 1.0]]);
        match eigenprojections(&a, 1) {
            Err(EvansError::Split(_)) => {}
            other => panic!("expected split error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn projectors_commute_with_matrix_and_kill_opposite_eigenvectors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 3, 5, 8] {
            // random diagonalizable matrix with well-separated real parts
            let evs: Vec<_> = (0..n)
                .map(|i| cx(i as f64 - (n as f64) / 2.0 + 0.3 * rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)))
                .collect();
            let d = M::diagonal(&evs);
            let v = M::from_fn(n, n, |_, _| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            if v.det().unwrap().norm() < 1e-3 {
                continue;
            }
            let a = v.matmul(&d).matmul(&v.inverse().unwrap());
            let k = 1 + rng.gen_range(0..n - 1);
            let p = eigenprojections(&a, k).unwrap();
            let comm = p.stable.matmul(&a).sub(&a.matmul(&p.stable)).norm_fro();
            assert!(comm <= 1e-8 * a.norm_fro(), "commutator {} too large", comm);
            // stable eigenvectors are fixed, unstable ones are annihilated
            for j in 0..n {
                let vj = v.col(j);
                let scale: f64 = vj.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let pvj = p.stable.matvec(&vj);
                let expect: Vec<_> = if j < k { vj.clone() } else { vec![cx(0.0, 0.0); n] };
                let err: f64 = pvj
                    .iter()
                    .zip(&expect)
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(err <= 1e-7 * scale.max(1.0) * cond2(&v).unwrap());
            }
        }
    }

    #[test]
    fn sylvester_spectrum_matches_closed_form() {
        let a = M::from_real_rows(&[&[-1.0, 0.0], &[0.0, -2.0]]);
        let s = sylvester_spectrum(&a).unwrap();
        let got: Vec<f64> = s.iter().map(|z| z.re).collect();
        assert_eq!(got.len(), 4);
        for (g, e) in got.iter().zip([2.0, 3.0, 3.0, 4.0]) {
            assert!((g - e).abs() < 1e-12);
        }
        let single = sylvester_spectrum(&M::from_real_rows(&[&[-1.0]])).unwrap();
        assert!((single[0].re - 2.0).abs() < 1e-12);
        // triangular case: eigenvalues are the diagonal
        let tri = M::from_real_rows(&[&[-1.0, 5.0], &[0.0, -2.0]]);
        let s2 = sylvester_spectrum(&tri).unwrap();
        for (g, e) in s2.iter().zip([2.0, 3.0, 3.0, 4.0]) {
            assert!((g.re - e).abs() < 1e-10);
        }
    }
}
