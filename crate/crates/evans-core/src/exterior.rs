//! Exterior algebra on C^n: lexicographic multi-index bases for Lambda^k C^n,
//! wedge products of column families, the Leibniz lift of a matrix, and
//! coordinatization of top-degree forms.
//!
//! The lift acts on the C(n,k)-dimensional coordinate space
//!
//! ```text
//! A^(k) (v1 ^ ... ^ vk) = sum_i v1 ^ ... ^ (A vi) ^ ... ^ vk,
//! ```
//!
//! so for diagonalizable A with eigenpairs (a_j, r_j) it has eigenvalues
//! a_{i1} + ... + a_{ik} with eigenvectors r_{i1} ^ ... ^ r_{ik}. The lift is
//! materialized densely; that is practical up to C(n,k) = 252 (n <= 10), which
//! covers the systems this crate targets.

use std::sync::Arc;

use num_traits::Zero;

use crate::error::{EvansError, Result};
use crate::linalg::{eigenvalues, ComplexMatrix};
use crate::scalar::{czero, real, Cx, Scalar};
use crate::Side;

/// Lexicographically ordered strictly increasing k-subsets of {0, .., n-1}.
///
/// The multi-index ordering carries no interleaving signs; all signs live in
/// the minors, which keeps the basis deterministic and outputs reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexBasis {
    n: usize,
    k: usize,
    indices: Vec<Vec<usize>>,
}

impl MultiIndexBasis {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(EvansError::Dimension(format!(
                "multi-index basis needs 1 <= k <= n, got k = {}, n = {}",
                k, n
            )));
        }
        let mut indices = Vec::new();
        let mut current: Vec<usize> = (0..k).collect();
        loop {
            indices.push(current.clone());
            // next lexicographic k-subset
            let mut i = k;
            loop {
                if i == 0 {
                    return Ok(Self { n, k, indices });
                }
                i -= 1;
                if current[i] != i + n - k {
                    break;
                }
                if i == 0 {
                    return Ok(Self { n, k, indices });
                }
            }
            current[i] += 1;
            for j in (i + 1)..k {
                current[j] = current[j - 1] + 1;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of basis elements, C(n, k).
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index_sets(&self) -> &[Vec<usize>] {
        &self.indices
    }

    /// Position of a strictly increasing index set in the basis.
    pub fn position(&self, set: &[usize]) -> Option<usize> {
        self.indices.binary_search_by(|probe| probe.as_slice().cmp(set)).ok()
    }

    /// Complement of the index set at `pos`, in increasing order.
    pub fn complement(&self, pos: usize) -> Vec<usize> {
        let set = &self.indices[pos];
        let mut out = Vec::with_capacity(self.n - self.k);
        let mut it = set.iter().peekable();
        for i in 0..self.n {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    }
}

/// Element of Lambda^k C^n in a fixed lexicographic multi-index basis.
#[derive(Debug, Clone)]
pub struct WedgeVector<T> {
    basis: Arc<MultiIndexBasis>,
    coords: Vec<Cx<T>>,
}

impl<T: Scalar> WedgeVector<T> {
    pub fn new(basis: Arc<MultiIndexBasis>, coords: Vec<Cx<T>>) -> Result<Self> {
        if coords.len() != basis.len() {
            return Err(EvansError::Dimension(format!(
                "wedge vector needs {} coordinates, got {}",
                basis.len(),
                coords.len()
            )));
        }
        if coords.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EvansError::Numerical(
                "wedge vector coordinates must be finite".into(),
            ));
        }
        Ok(Self { basis, coords })
    }

    pub fn basis(&self) -> &MultiIndexBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> Arc<MultiIndexBasis> {
        Arc::clone(&self.basis)
    }

    pub fn coords(&self) -> &[Cx<T>] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [Cx<T>] {
        &mut self.coords
    }

    pub fn into_coords(self) -> Vec<Cx<T>> {
        self.coords
    }

    pub fn norm(&self) -> T {
        self.coords
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    pub fn scale(&self, c: Cx<T>) -> Self {
        Self {
            basis: Arc::clone(&self.basis),
            coords: self.coords.iter().map(|z| *z * c).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            basis: Arc::clone(&self.basis),
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| *a - *b)
                .collect(),
        }
    }
}

/// Wedge product of the columns of an n x k matrix: the coordinate on a
/// multi-index I is the k x k minor formed by rows I.
pub fn wedge_columns<T: Scalar>(columns: &ComplexMatrix<T>) -> Result<WedgeVector<T>> {
    let n = columns.rows();
    let k = columns.cols();
    let basis = Arc::new(MultiIndexBasis::new(n, k)?);
    let mut coords = Vec::with_capacity(basis.len());
    for set in basis.index_sets() {
        let minor = ComplexMatrix::from_fn(k, k, |i, j| columns[(set[i], j)]);
        coords.push(minor.det()?);
    }
    WedgeVector::new(basis, coords)
}

/// Leibniz lift of an n x n matrix to Lambda^k, as a dense
/// C(n,k) x C(n,k) matrix.
pub fn leibniz_lift<T: Scalar>(a: &ComplexMatrix<T>, k: usize) -> Result<ComplexMatrix<T>> {
    if !a.is_square() {
        return Err(EvansError::Dimension(format!(
            "Leibniz lift of non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let basis = MultiIndexBasis::new(n, k)?;
    let dim = basis.len();
    let mut lift = ComplexMatrix::zeros(dim, dim);
    let mut replaced = Vec::with_capacity(k);
    for (col, set) in basis.index_sets().iter().enumerate() {
        for (i, &j) in set.iter().enumerate() {
            for m in 0..n {
                let coeff = a[(m, j)];
                if coeff.is_zero() {
                    continue;
                }
                if m == j {
                    lift[(col, col)] = lift[(col, col)] + coeff;
                    continue;
                }
                if set.binary_search(&m).is_ok() {
                    continue; // repeated factor kills the wedge
                }
                replaced.clear();
                replaced.extend(set.iter().copied().filter(|&x| x != j));
                let pos = replaced.partition_point(|&x| x < m);
                replaced.insert(pos, m);
                let row = basis
                    .position(&replaced)
                    .expect("replaced multi-index must be in basis");
                // moving m from slot i to slot pos costs |i - pos| transpositions
                let sign = if (i as isize - pos as isize).rem_euclid(2) == 0 {
                    coeff
                } else {
                    -coeff
                };
                lift[(row, col)] = lift[(row, col)] + sign;
            }
        }
    }
    Ok(lift)
}

/// Coefficient of e_1 ^ ... ^ e_n in `left ^ right`; degrees must sum to the
/// ambient dimension. Equals the determinant of the concatenated column
/// matrices when both arguments are wedges of column families.
pub fn coordinatize_top<T: Scalar>(
    left: &WedgeVector<T>,
    right: &WedgeVector<T>,
) -> Result<Cx<T>> {
    let bl = left.basis();
    let br = right.basis();
    if bl.n() != br.n() || bl.k() + br.k() != bl.n() {
        return Err(EvansError::Dimension(format!(
            "top-form coordinatization needs degrees summing to the ambient dimension; got k = {} and {} over n = {} and {}",
            bl.k(),
            br.k(),
            bl.n(),
            br.n()
        )));
    }
    let mut total = czero();
    for (pos, set) in bl.index_sets().iter().enumerate() {
        let l = left.coords()[pos];
        if l.is_zero() {
            continue;
        }
        let comp = bl.complement(pos);
        let cpos = br
            .position(&comp)
            .expect("complement must be in the dual basis");
        let r = right.coords()[cpos];
        if r.is_zero() {
            continue;
        }
        // sign of the shuffle (set, comp) as a permutation of (0..n):
        // parity of sum(set) - k(k-1)/2
        let sum: usize = set.iter().sum();
        let k = bl.k();
        let term = l * r;
        if (sum + k * (k - 1) / 2) % 2 == 0 {
            total = total + term;
        } else {
            total = total - term;
        }
    }
    Ok(total)
}

/// Sum of the eigenvalues of a limit matrix over the tracked invariant
/// subspace: the k smallest real parts on the plus side, the (n - k) largest
/// on the minus side. This is the exponential rate factored out by centered
/// coordinates.
pub fn centered_drift<T: Scalar>(
    a_limit: &ComplexMatrix<T>,
    stable_rank: usize,
    side: Side,
) -> Result<Cx<T>> {
    if !a_limit.is_square() {
        return Err(EvansError::Dimension(format!(
            "centered drift of non-square {}x{} matrix",
            a_limit.rows(),
            a_limit.cols()
        )));
    }
    let n = a_limit.rows();
    if stable_rank == 0 || stable_rank > n {
        return Err(EvansError::Dimension(format!(
            "stable rank {} out of range for dimension {}",
            stable_rank, n
        )));
    }
    let ev = eigenvalues(a_limit)?;
    // stable_rank == n means the whole space is tracked (scalar problems);
    // there is no split boundary to check then.
    if stable_rank < n {
        let gap = ev[stable_rank].re - ev[stable_rank - 1].re;
        if gap < real::<T>(1e-10) {
            return Err(EvansError::Split(format!(
                "ambiguous split: real-part gap {:e} at rank {}",
                gap.to_f64().unwrap_or(f64::NAN),
                stable_rank
            )));
        }
    }
    let sum = match side {
        Side::Plus => ev[..stable_rank]
            .iter()
            .fold(czero(), |acc, z| acc + z),
        Side::Minus => ev[stable_rank..]
            .iter()
            .fold(czero(), |acc, z| acc + z),
    };
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;
    use rand::{Rng, SeedableRng};

    type M = ComplexMatrix<f64>;

    fn e(n: usize, i: usize) -> Vec<Cx<f64>> {
        let mut v = vec![cx(0.0, 0.0); n];
        v[i] = cx(1.0, 0.0);
        v
    }

    fn cols(n: usize, cols: &[Vec<Cx<f64>>]) -> M {
        M::from_fn(n, cols.len(), |i, j| cols[j][i])
    }

    #[test]
    fn basis_is_lexicographic() {
        let b = MultiIndexBasis::new(4, 2).unwrap();
        let expect: Vec<Vec<usize>> = vec![
            vec![0, 1],
            vec![0, 2],
            vec![0, 3],
            vec![1, 2],
            vec![1, 3],
            vec![2, 3],
        ];
        assert_eq!(b.index_sets(), expect.as_slice());
        assert_eq!(b.position(&[1, 3]), Some(4));
    }

    #[test]
    fn wedge_of_unit_vectors() {
        let w = wedge_columns(&cols(3, &[e(3, 0), e(3, 1)])).unwrap();
        assert!((w.coords()[0] - cx(1.0, 0.0)).norm() < 1e-15);
        assert!(w.coords()[1].norm() < 1e-15);
        assert!(w.coords()[2].norm() < 1e-15);
    }

    #[test]
    fn wedge_shear_invariance() {
        // (e1 + e2) ^ e2 = e1 ^ e2
        let mut c0 = e(3, 0);
        c0[1] = cx(1.0, 0.0);
        let w = wedge_columns(&cols(3, &[c0, e(3, 1)])).unwrap();
        assert!((w.coords()[0] - cx(1.0, 0.0)).norm() < 1e-15);
        assert!(w.coords()[1].norm() < 1e-15);
        assert!(w.coords()[2].norm() < 1e-15);
    }

    #[test]
    fn wedge_matches_direct_minors() {
        // independent oracle: 2x2 minors computed by the ad - bc formula
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let a: Vec<Cx<f64>> = (0..4)
            .map(|_| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let b: Vec<Cx<f64>> = (0..4)
            .map(|_| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let w = wedge_columns(&cols(4, &[a.clone(), b.clone()])).unwrap();
        let basis = MultiIndexBasis::new(4, 2).unwrap();
        for (pos, set) in basis.index_sets().iter().enumerate() {
            let oracle = a[set[0]] * b[set[1]] - a[set[1]] * b[set[0]];
            assert!((w.coords()[pos] - oracle).norm() < 1e-13);
        }
    }

    #[test]
    fn wedge_of_dependent_columns_vanishes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let v: Vec<Cx<f64>> = (0..5)
                .map(|_| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let c = cx(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let scaled: Vec<Cx<f64>> = v.iter().map(|z| z * c).collect();
            let w = wedge_columns(&cols(5, &[v.clone(), scaled])).unwrap();
            let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(w.norm() <= 1e-12 * vn * vn * c.norm().max(1.0));
        }
    }

    #[test]
    fn lift_degree_one_is_the_matrix() {
        let a = M::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let lift = leibniz_lift(&a, 1).unwrap();
        assert!(lift.sub(&a).norm_fro() < 1e-15);
    }

    #[test]
    fn lift_top_degree_is_trace() {
        let a = M::from_real_rows(&[&[1.0, 2.0, -1.0], &[0.5, -3.0, 2.0], &[0.0, 1.0, 5.0]]);
        let lift = leibniz_lift(&a, 3).unwrap();
        assert_eq!(lift.rows(), 1);
        assert!((lift[(0, 0)] - a.trace()).norm() < 1e-14);
    }

    #[test]
    fn lift_of_diagonal_is_pairwise_sums() {
        let a = M::from_real_rows(&[&[2.0, 0.0, 0.0], &[0.0, 3.0, 0.0], &[0.0, 0.0, 7.0]]);
        let lift = leibniz_lift(&a, 2).unwrap();
        // basis {01, 02, 12}
        let expect = [5.0, 9.0, 10.0];
        for (i, e) in expect.iter().enumerate() {
            assert!((lift[(i, i)].re - e).abs() < 1e-14);
            for j in 0..3 {
                if i != j {
                    assert!(lift[(i, j)].norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn lift_commutes_with_wedge() {
        // A^(k) (v1 ^ .. ^ vk) = sum_i v1 ^ .. ^ A v_i ^ .. ^ vk
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for (n, k) in [(3usize, 2usize), (4, 2), (5, 3)] {
            let a = M::from_fn(n, n, |_, _| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let vs: Vec<Vec<Cx<f64>>> = (0..k)
                .map(|_| (0..n).map(|_| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
                .collect();
            let w = wedge_columns(&cols(n, &vs)).unwrap();
            let lift = leibniz_lift(&a, k).unwrap();
            let lifted = lift.matvec(w.coords());
            let mut expect = vec![cx(0.0, 0.0); w.coords().len()];
            for i in 0..k {
                let mut modified = vs.clone();
                modified[i] = a.matvec(&vs[i]);
                let term = wedge_columns(&cols(n, &modified)).unwrap();
                for (e, t) in expect.iter_mut().zip(term.coords()) {
                    *e += *t;
                }
            }
            for (g, e) in lifted.iter().zip(&expect) {
                assert!((g - e).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn lift_spectrum_is_sums_of_eigenvalues() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for (n, k) in [(3usize, 2usize), (4, 2), (5, 3)] {
            let evs: Vec<Cx<f64>> = (0..n)
                .map(|i| cx(i as f64 + 0.2 * rng.gen_range(-1.0..1.0), rng.gen_range(-0.3..0.3)))
                .collect();
            let v = M::from_fn(n, n, |_, _| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            if v.det().unwrap().norm() < 1e-2 {
                continue;
            }
            let a = v
                .matmul(&M::diagonal(&evs))
                .matmul(&v.inverse().unwrap());
            let lift = leibniz_lift(&a, k).unwrap();
            let mut got: Vec<Cx<f64>> = eigenvalues(&lift).unwrap();
            let basis = MultiIndexBasis::new(n, k).unwrap();
            let mut expect: Vec<Cx<f64>> = basis
                .index_sets()
                .iter()
                .map(|set| set.iter().fold(cx(0.0, 0.0), |acc, &i| acc + evs[i]))
                .collect();
            let key = |z: &Cx<f64>| (z.re, z.im);
            got.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
            expect.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
            for (g, e) in got.iter().zip(&expect) {
                assert!((g - e).norm() < 1e-8, "lift eigenvalue {} vs {}", g, e);
            }
        }
    }

    #[test]
    fn top_coordinatization_signs() {
        let w12 = wedge_columns(&cols(3, &[e(3, 0), e(3, 1)])).unwrap();
        let w21 = wedge_columns(&cols(3, &[e(3, 1), e(3, 0)])).unwrap();
        let w3 = wedge_columns(&cols(3, &[e(3, 2)])).unwrap();
        assert!((coordinatize_top(&w12, &w3).unwrap() - cx(1.0, 0.0)).norm() < 1e-15);
        assert!((coordinatize_top(&w21, &w3).unwrap() + cx(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn top_coordinatization_matches_determinant() {
        // independent oracle: Laplace-expansion determinant of the 4x4
        fn det_laplace(m: &[Vec<Cx<f64>>]) -> Cx<f64> {
            let n = m.len();
            if n == 1 {
                return m[0][0];
            }
            let mut acc = cx(0.0, 0.0);
            for j in 0..n {
                let minor: Vec<Vec<Cx<f64>>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let term = m[0][j] * det_laplace(&minor);
                if j % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let colsv: Vec<Vec<Cx<f64>>> = (0..4)
                .map(|_| (0..4).map(|_| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
                .collect();
            let left = wedge_columns(&cols(4, &colsv[..2])).unwrap();
            let right = wedge_columns(&cols(4, &colsv[2..])).unwrap();
            let got = coordinatize_top(&left, &right).unwrap();
            let rows: Vec<Vec<Cx<f64>>> = (0..4)
                .map(|i| (0..4).map(|j| colsv[j][i]).collect())
                .collect();
            let oracle = det_laplace(&rows);
            assert!((got - oracle).norm() < 1e-12);
        }
    }

    #[test]
    fn drift_examples() {
        let a = M::from_real_rows(&[&[-1.0, 0.0, 0.0], &[0.0, -2.0, 0.0], &[0.0, 0.0, 3.0]]);
        let plus = centered_drift(&a, 2, Side::Plus).unwrap();
        assert!((plus - cx(-3.0, 0.0)).norm() < 1e-13);
        let minus = centered_drift(&a, 2, Side::Minus).unwrap();
        assert!((minus - cx(3.0, 0.0)).norm() < 1e-13);
        // companion matrix [[0,1],[4,0]]: eigenvalues +-2
        let b = M::from_real_rows(&[&[0.0, 1.0], &[4.0, 0.0]]);
        let d = centered_drift(&b, 1, Side::Plus).unwrap();
        assert!((d - cx(-2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn drift_rejects_tied_split() {
        let a = M::from_real_rows(&[&[1.0, 9.0], &[0.0, 1.0]]);
        assert!(matches!(
            centered_drift(&a, 1, Side::Plus),
            Err(EvansError::Split(_))
        ));
    }

    #[test]
    fn wedge_identities_hold_in_f32() {
        let a = ComplexMatrix::<f32>::from_real_rows(&[&[1.0, 0.0], &[1.0, 1.0], &[0.0, 2.0]]);
        let w = wedge_columns(&a).unwrap();
        // minors: rows {01}: 1, rows {02}: 2, rows {12}: 2
        assert!((w.coords()[0].re - 1.0).abs() < 1e-6);
        assert!((w.coords()[1].re - 2.0).abs() < 1e-6);
        assert!((w.coords()[2].re - 2.0).abs() < 1e-6);
    }
}
