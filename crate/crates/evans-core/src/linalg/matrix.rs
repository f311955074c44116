//! Dense complex matrices in row-major storage, sized for the small systems
//! (n ≤ 10, lifted dimensions ≤ 252) that arise in Evans function work.

use num_traits::{One, Zero};

use crate::error::{EvansError, Result};
use crate::scalar::{czero, Cx, Scalar};

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Scalar> ComplexMatrix<T> {
    /// Build from row-major entries. Rejects size mismatches and non-finite
    /// entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Cx<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(EvansError::Dimension(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EvansError::Numerical(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cx::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Convenience constructor from real row slices (tests, built-in problems).
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, c, |i, j| crate::scalar::cx(rows[i][j], 0.0))
    }

    /// Diagonal matrix from complex entries.
    pub fn diagonal(entries: &[Cx<T>]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { czero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Cx<T>] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Cx<T> {
        (0..self.rows.min(self.cols)).fold(czero(), |acc, i| acc + self[(i, i)])
    }

    pub fn norm_fro(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    pub fn norm_max(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, z| acc.max(z.norm()))
    }

    pub fn col(&self, j: usize) -> Vec<Cx<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Copy of columns `lo..hi` as a new matrix.
    pub fn columns(&self, lo: usize, hi: usize) -> Self {
        Self::from_fn(self.rows, hi - lo, |i, j| self[(i, lo + j)])
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(EvansError::Dimension(format!(
                "hstack: row counts {} and {} differ",
                self.rows, other.rows
            )));
        }
        Ok(Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        }))
    }

    pub fn scale(&self, c: Cx<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| *z * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a + *b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a - *b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[Cx<T>]) -> Vec<Cx<T>> {
        debug_assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(czero(), |acc, j| acc + self[(i, j)] * v[j])
            })
            .collect()
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<Lu<T>> {
        if !self.is_square() {
            return Err(EvansError::Dimension(format!(
                "LU of non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut f = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0usize;
        for k in 0..n {
            let mut pivot = k;
            let mut best = f[(k, k)].norm();
            for i in (k + 1)..n {
                let mag = f[(i, k)].norm();
                if mag > best {
                    best = mag;
                    pivot = i;
                }
            }
            if pivot != k {
                for j in 0..n {
                    let tmp = f[(k, j)];
                    f[(k, j)] = f[(pivot, j)];
                    f[(pivot, j)] = tmp;
                }
                perm.swap(k, pivot);
                swaps += 1;
            }
            let d = f[(k, k)];
            if d.is_zero() {
                continue; // singular; surfaced at solve time
            }
            for i in (k + 1)..n {
                let m = f[(i, k)] / d;
                f[(i, k)] = m;
                for j in (k + 1)..n {
                    let sub = m * f[(k, j)];
                    f[(i, j)] = f[(i, j)] - sub;
                }
            }
        }
        Ok(Lu {
            factors: f,
            perm,
            swaps,
        })
    }

    /// Determinant via LU.
    pub fn det(&self) -> Result<Cx<T>> {
        let lu = self.lu()?;
        Ok(lu.det())
    }

    /// Solve `self * x = b` for a matrix right-hand side.
    pub fn solve(&self, b: &Self) -> Result<Self> {
        self.lu()?.solve_matrix(b)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.solve(&Self::identity(self.rows))
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Cx<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cx<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factors with the pivot permutation.
pub struct Lu<T> {
    factors: ComplexMatrix<T>,
    perm: Vec<usize>,
    swaps: usize,
}

impl<T: Scalar> Lu<T> {
    pub fn det(&self) -> Cx<T> {
        let n = self.factors.rows();
        let mut d = if self.swaps % 2 == 0 {
            Cx::one()
        } else {
            -Cx::<T>::one()
        };
        for i in 0..n {
            d = d * self.factors[(i, i)];
        }
        d
    }

    /// Smallest pivot magnitude relative to the largest; a crude but cheap
    /// singularity indicator.
    pub fn min_pivot_ratio(&self) -> T {
        let n = self.factors.rows();
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for i in 0..n {
            let p = self.factors[(i, i)].norm();
            lo = lo.min(p);
            hi = hi.max(p);
        }
        if hi.is_zero() {
            T::zero()
        } else {
            lo / hi
        }
    }

    pub fn solve_vec(&self, b: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        let n = self.factors.rows();
        if b.len() != n {
            return Err(EvansError::Dimension(format!(
                "solve: rhs length {} vs matrix order {}",
                b.len(),
                n
            )));
        }
        let mut x: Vec<Cx<T>> = self.perm.iter().map(|&p| b[p]).collect();
        // forward substitution (unit lower triangle)
        for i in 1..n {
            for j in 0..i {
                let sub = self.factors[(i, j)] * x[j];
                x[i] = x[i] - sub;
            }
        }
        // back substitution
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let sub = self.factors[(i, j)] * x[j];
                x[i] = x[i] - sub;
            }
            let d = self.factors[(i, i)];
            if d.is_zero() {
                return Err(EvansError::Numerical(
                    "singular matrix in LU solve".into(),
                ));
            }
            x[i] = x[i] / d;
        }
        Ok(x)
    }

    pub fn solve_matrix(&self, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        let n = self.factors.rows();
        if b.rows() != n {
            return Err(EvansError::Dimension(format!(
                "solve: rhs has {} rows, matrix order {}",
                b.rows(),
                n
            )));
        }
        let mut out = ComplexMatrix::zeros(n, b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.col(j))?;
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        Ok(out)
    }
}
