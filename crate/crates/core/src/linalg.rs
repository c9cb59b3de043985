//! Compressed-row symmetric matrices and a Jacobi-preconditioned CG solver.

use crate::error::{Error, Result};

/// Largest dimension accepted by [`dense_solve`].
pub const DENSE_LIMIT: usize = 512;

/// Symmetric positive-definite matrix, both triangles stored in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpd {
    dimension: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSpd {
    pub fn new(
        dimension: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != dimension + 1 {
            return Err(Error::DimensionMismatch {
                expected: dimension + 1,
                found: row_offsets.len(),
            });
        }
        if col_indices.len() != values.len() || row_offsets[dimension] != values.len() {
            return Err(Error::DimensionMismatch {
                expected: row_offsets[dimension],
                found: values.len(),
            });
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) || col_indices.iter().any(|&c| c >= dimension) {
            return Err(Error::InvalidMesh("malformed compressed-row structure".into()));
        }
        Ok(Self {
            dimension,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(dimension: usize) -> Self {
        Self {
            dimension,
            row_offsets: (0..=dimension).collect(),
            col_indices: (0..dimension).collect(),
            values: vec![1.0; dimension],
        }
    }

    /// Keeps the nonzero entries of a dense row-major matrix.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    col_indices.push(j);
                    values.push(a);
                }
            }
            row_offsets.push(values.len());
        }
        Self::new(n, row_offsets, col_indices, values)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (s, e) = (self.row_offsets[row], self.row_offsets[row + 1]);
        match self.col_indices[s..e].binary_search(&col) {
            Ok(k) => self.values[s + k],
            Err(_) => self.col_indices[s..e]
                .iter()
                .position(|&c| c == col)
                .map_or(0.0, |k| self.values[s + k]),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dimension).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dimension {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.dimension]; self.dimension];
        for (i, row) in dense.iter_mut().enumerate() {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                row[self.col_indices[k]] += self.values[k];
            }
        }
        dense
    }

    /// `y = A x` into a caller-provided buffer.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        if y.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: y.len(),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            *yi = self.col_indices[s..e]
                .iter()
                .zip(&self.values[s..e])
                .map(|(&j, &a)| a * x[j])
                .sum();
        }
        Ok(())
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.dimension];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let ay = self.spmv(y)?;
        Ok(dot(x, &ay))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of a CG solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// `‖b - A x‖₂ / ‖b‖₂` of the returned iterate (recomputed, not recursive).
    pub relative_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub rel_tol: f64,
    /// `None` means `20 · dimension`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: None,
        }
    }
}

/// Solves `A x = b` by Jacobi-preconditioned conjugate gradients from a zero
/// initial guess. Hitting `max_iter` is reported through
/// [`CgReport::converged`], not as an error.
pub fn cg_solve(a: &SparseSpd, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgReport)> {
    let n = a.dimension();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if !(rel_tol > 0.0) {
        return Err(Error::Config(format!("CG tolerance must be positive, got {rel_tol}")));
    }
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((
            x,
            CgReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let target = rel_tol * b_norm;

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut true_residual = b_norm;

    while iterations < max_iter {
        a.spmv_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;

        if norm2(&r) <= target {
            // The recursive residual drifts on badly conditioned systems;
            // confirm with the true one and restart from it if needed.
            a.spmv_into(&x, &mut ap)?;
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            true_residual = norm2(&r);
            if true_residual <= target {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }

        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    if true_residual > target {
        a.spmv_into(&x, &mut ap)?;
        true_residual = b.iter().zip(&ap).map(|(b, y)| (b - y) * (b - y)).sum::<f64>().sqrt();
    }
    let relative_residual = true_residual / b_norm;
    Ok((
        x,
        CgReport {
            iterations,
            relative_residual,
            converged: relative_residual <= rel_tol,
        },
    ))
}

/// Gaussian elimination with partial pivoting on a dense copy of `a`.
/// Restricted to `dimension <= DENSE_LIMIT`; used as a reference solver.
pub fn dense_solve(a: &SparseSpd, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dimension();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if n > DENSE_LIMIT {
        return Err(Error::DimensionMismatch {
            expected: DENSE_LIMIT,
            found: n,
        });
    }
    let mut m = a.to_dense();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .ok_or(Error::Singular)?;
        if m[pivot][col] == 0.0 {
            return Err(Error::Singular);
        }
        m.swap(col, pivot);
        x.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let tail: f64 = (col + 1..n).map(|k| m[col][k] * x[k]).sum();
        x[col] = (x[col] - tail) / m[col][col];
    }
    Ok(x)
}
