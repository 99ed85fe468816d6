//! Small dense symmetric matrices: the moment matrices `Q_k`, the OLS
//! covariances `Σ_k` and the normal equations of the simulator are all at
//! most a handful of rows, so a plain row-major store is enough.

use serde::{Deserialize, Serialize};

use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

/// Raised when a Cholesky factorisation meets a non-positive pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite;

impl<T: Real> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, T::one());
        }
        m
    }

    /// Builds from row-major entries, symmetrising `(a + aᵗ)/2`.
    pub fn from_rows(dim: usize, rows: &[T]) -> Self {
        assert_eq!(rows.len(), dim * dim, "row-major data has wrong length");
        let mut m = Self::zeros(dim);
        let half = T::lit(0.5);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = half * (rows[i * dim + j] + rows[j * dim + i]);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `self += w · v vᵗ`
    pub fn add_outer(&mut self, v: &[T], w: T) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            let wi = w * v[i];
            for j in i..self.dim {
                let val = self.data[i * self.dim + j] + wi * v[j];
                self.data[i * self.dim + j] = val;
                self.data[j * self.dim + i] = val;
            }
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-T::one()))
    }

    /// `vᵗ M v`
    pub fn quad_form(&self, v: &[T]) -> T {
        debug_assert_eq!(v.len(), self.dim);
        let mut acc = T::zero();
        for i in 0..self.dim {
            let mut row = T::zero();
            for j in 0..self.dim {
                row += self.data[i * self.dim + j] * v[j];
            }
            acc += v[i] * row;
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Lower Cholesky factor `L` (row-major, upper part zero). Pivots below
    /// `rel_tol · max diag` count as singular.
    pub fn cholesky(&self, rel_tol: T) -> Result<Vec<T>, NotPositiveDefinite> {
        let n = self.dim;
        let scale = (0..n).fold(T::zero(), |m, i| m.max(self.get(i, i).abs()));
        if !(scale > T::zero()) {
            return Err(NotPositiveDefinite);
        }
        let floor = rel_tol * scale;
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > floor) {
                return Err(NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(l)
    }

    /// Solves `M x = b` for symmetric positive definite `M`.
    pub fn solve(&self, b: &[T], rel_tol: T) -> Result<Vec<T>, NotPositiveDefinite> {
        let n = self.dim;
        let l = self.cholesky(rel_tol)?;
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        Ok(x)
    }

    pub fn inverse(&self, rel_tol: T) -> Result<Self, NotPositiveDefinite> {
        let n = self.dim;
        let mut inv = Self::zeros(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e, rel_tol)?;
            for i in 0..n {
                inv.data[i * n + j] = col[i];
            }
        }
        // re-symmetrise against rounding
        Ok(Self::from_rows(n, &inv.data))
    }

    /// All eigenvalues, ascending, by cyclic Jacobi rotations.
    pub fn eigenvalues(&self) -> Vec<T> {
        let n = self.dim;
        let mut a = self.data.clone();
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            let mut norm = T::zero();
            for i in 0..n {
                for j in 0..n {
                    let v = a[i * n + j] * a[i * n + j];
                    norm += v;
                    if i != j {
                        off += v;
                    }
                }
            }
            if off <= eps * eps * norm || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues()
            .first()
            .copied()
            .unwrap_or_else(T::zero)
    }
}
