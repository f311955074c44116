//! Complex banded linear solver: Gaussian elimination with partial pivoting
//! on band storage, sized for the block-tridiagonal systems assembled by the
//! two-step boundary-value discretizations.

use num_traits::Zero;

use crate::error::{EvansError, Result};
use crate::scalar::{czero, Cx, Scalar};

/// Band matrix with `kl` subdiagonals and `ku` superdiagonals. Storage holds
/// `kl` extra superdiagonals for pivoting fill-in.
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    /// entry (i, j) lives at data[(kl + ku + i - j) * n + j]
    data: Vec<Cx<T>>,
}

impl<T: Scalar> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let rows = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            data: vec![czero(); rows * n],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) * self.n + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cx<T> {
        // storage range includes fill-in rows above the logical band
        if j > i + self.ku + self.kl || i > j + self.kl {
            czero()
        } else {
            self.data[self.slot(i, j)]
        }
    }

    #[inline]
    fn set_raw(&mut self, i: usize, j: usize, v: Cx<T>) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// Add into a logical-band entry; out-of-band writes are a caller bug.
    pub fn add(&mut self, i: usize, j: usize, v: Cx<T>) {
        assert!(
            i < self.n && j < self.n && j + self.kl >= i && i + self.ku >= j,
            "entry ({}, {}) outside the logical band (kl = {}, ku = {})",
            i,
            j,
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] = self.data[s] + v;
    }

    /// Solve A x = b in place, destroying the factorization.
    pub fn solve(mut self, mut b: Vec<Cx<T>>) -> Result<Vec<Cx<T>>> {
        let n = self.n;
        if b.len() != n {
            return Err(EvansError::Dimension(format!(
                "rhs length {} vs banded order {}",
                b.len(),
                n
            )));
        }
        let width = self.ku + self.kl; // widest reach to the right after fill-in
        for k in 0..n {
            // partial pivot among rows k..=k+kl
            let row_max = (k + self.kl).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).norm();
            for i in (k + 1)..=row_max {
                let mag = self.get(i, k).norm();
                if mag > best {
                    best = mag;
                    piv = i;
                }
            }
            if best.is_zero() {
                return Err(EvansError::Numerical(format!(
                    "banded solve hit a zero pivot at column {}",
                    k
                )));
            }
            if piv != k {
                let col_max = (k + width).min(n - 1);
                for j in k..=col_max {
                    let a = self.get(k, j);
                    let c = self.get(piv, j);
                    self.set_raw(k, j, c);
                    self.set_raw(piv, j, a);
                }
                b.swap(k, piv);
            }
            let d = self.get(k, k);
            let row_end = (k + self.kl).min(n - 1);
            let col_end = (k + width).min(n - 1);
            for i in (k + 1)..=row_end {
                let m = self.get(i, k) / d;
                if m.is_zero() {
                    continue;
                }
                self.set_raw(i, k, czero());
                for j in (k + 1)..=col_end {
                    let sub = m * self.get(k, j);
                    let cur = self.get(i, j);
                    self.set_raw(i, j, cur - sub);
                }
                let sub = m * b[k];
                b[i] = b[i] - sub;
            }
        }
        // back substitution
        for i in (0..n).rev() {
            let col_end = (i + width).min(n - 1);
            let mut acc = b[i];
            for j in (i + 1)..=col_end {
                acc = acc - self.get(i, j) * b[j];
            }
            b[i] = acc / self.get(i, i);
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexMatrix;
    use crate::scalar::cx;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_dense_solver_on_random_banded_systems() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for (n, kl, ku) in [(6usize, 1usize, 1usize), (12, 2, 3), (30, 4, 4)] {
            let mut banded = BandedMatrix::<f64>::zeros(n, kl, ku);
            let mut dense = ComplexMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if j + kl >= i && i + ku >= j {
                        let v = cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        let v = if i == j { v + cx(3.0, 0.0) } else { v };
                        banded.add(i, j, v);
                        dense[(i, j)] = v;
                    }
                }
            }
            let b: Vec<_> = (0..n)
                .map(|_| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let x_band = banded.solve(b.clone()).unwrap();
            let x_dense = dense.lu().unwrap().solve_vec(&b).unwrap();
            for (a, c) in x_band.iter().zip(&x_dense) {
                assert!((a - c).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 0]] x = (1, 2) => x = (2, 1)
        let mut banded = BandedMatrix::<f64>::zeros(2, 1, 1);
        banded.add(0, 1, cx(1.0, 0.0));
        banded.add(1, 0, cx(1.0, 0.0));
        let x = banded.solve(vec![cx(1.0, 0.0), cx(2.0, 0.0)]).unwrap();
        assert!((x[0] - cx(2.0, 0.0)).norm() < 1e-14);
        assert!((x[1] - cx(1.0, 0.0)).norm() < 1e-14);
    }
}
