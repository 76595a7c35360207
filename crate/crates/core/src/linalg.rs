//! Small sparse and banded kernels used by the solvers.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            debug_assert!(i < rows && j < cols);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.rows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                if self.values[p] != 0.0 {
                    indices.push(self.indices[p]);
                    values.push(self.values[p]);
                }
            }
            indptr[i + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.rows) {
            let mut acc = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            *yi = acc;
        }
    }

    /// `y += s A x`.
    pub fn mul_vec_add(&self, s: f64, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.rows) {
            let mut acc = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            *yi += s * acc;
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                t.push((j, i, v));
            }
        }
        Csr::from_triplets(self.cols, self.rows, t)
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.rows {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    /// Max over rows of `sum |a_ij|`, a bound on the spectral radius.
    pub fn gershgorin(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// LU factors of a banded matrix, computed without pivoting.
///
/// Intended for matrices of the form `I - h A` with `A` weakly diagonally
/// dominant with non-positive diagonal, where no pivoting is needed.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedLu {
    /// Factors `scale_i * I + s * A` for a square CSR matrix `A`.
    pub fn factor_shifted(a: &Csr, diag: f64, s: f64) -> Result<Self> {
        let n = a.rows();
        let (kl, ku) = a.bandwidths();
        let width = kl + ku + 1;
        let mut data = vec![0.0; n * width];
        for i in 0..n {
            data[i * width + kl] = diag;
            for (j, v) in a.row(i) {
                data[i * width + j + kl - i] += s * v;
            }
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data,
        };
        lu.factor_in_place()?;
        Ok(lu)
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.kl - i
    }

    fn factor_in_place(&mut self) -> Result<()> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.data[self.at(k, k)];
            if !(pivot.abs() > 1e-300) || !pivot.is_finite() {
                return Err(Error::Numerical(format!(
                    "zero pivot at row {k} in banded LU"
                )));
            }
            let jmax = (k + self.ku + 1).min(n);
            let imax = (k + self.kl + 1).min(n);
            let krow = self.at(k, k);
            for i in k + 1..imax {
                let ik = self.at(i, k);
                if self.data[ik] == 0.0 {
                    continue;
                }
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                for j in k + 1..jmax {
                    let u = self.data[krow + (j - k)];
                    if u != 0.0 {
                        let ij = self.at(i, j);
                        self.data[ij] -= l * u;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let j0 = i.saturating_sub(self.kl);
            let base = self.at(i, j0);
            let mut acc = b[i];
            for (off, j) in (j0..i).enumerate() {
                acc -= self.data[base + off] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let jmax = (i + self.ku + 1).min(n);
            let d = self.at(i, i);
            let mut acc = b[i];
            for j in i + 1..jmax {
                acc -= self.data[d + (j - i)] * b[j];
            }
            b[i] = acc / self.data[d];
        }
    }
}
