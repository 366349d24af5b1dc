//! Sparse storage and linear solvers: banded Cholesky for the SPD systems
//! produced by the structured meshes, dense LU with partial pivoting for the
//! small non-symmetric coarse systems, and Jacobi-preconditioned conjugate
//! gradients for anything too large to factor.

use crate::error::{Error, Result};

/// Row-compressed sparse matrix with sorted column indices per row.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build a zero matrix from per-row column lists (will be sorted and
    /// deduplicated).
    pub fn from_adjacency(n: usize, mut rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        CsrMatrix { n, row_ptr, cols, vals }
    }

    fn entry_index(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    /// Add `v` to entry (i, j); the entry must exist in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .entry_index(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside the sparsity pattern"));
        self.vals[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entry_index(i, j).map_or(0.0, |k| self.vals[k])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// max_{i,j} |a_ij - a_ji|
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                if j > i {
                    worst = worst.max((self.vals[k] - self.get(j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol * self.max_abs().max(1e-300)
    }

    /// Half bandwidth: max |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                bw = bw.max(self.cols[k].abs_diff(i));
            }
        }
        bw
    }

    /// Largest entrywise difference to another matrix with the same shape
    /// (patterns need not match).
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                worst = worst.max((self.vals[k] - other.get(i, self.cols[k])).abs());
            }
            for k in other.row_ptr[i]..other.row_ptr[i + 1] {
                worst = worst.max((other.vals[k] - self.get(i, other.cols[k])).abs());
            }
        }
        worst
    }
}

/// ||A x - b|| / ||b|| in the euclidean norm (0 when b = 0).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; a.n];
    a.matvec(x, &mut ax);
    let rn = ax
        .iter()
        .zip(b.iter())
        .map(|(&axi, &bi)| (axi - bi) * (axi - bi))
        .sum::<f64>()
        .sqrt();
    let bn = b.iter().map(|&v| v * v).sum::<f64>().sqrt();
    if bn == 0.0 {
        rn
    } else {
        rn / bn
    }
}

/// Dot product with four accumulators; the unroll breaks the addition
/// dependency chain, which matters in the factorization inner loop.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for c in 0..chunks {
        let k = 4 * c;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for k in (4 * chunks)..n {
        s += a[k] * b[k];
    }
    s
}

/// Banded Cholesky factorization A = L L^T stored row-wise within the band.
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// Row i holds L[i][i-bw ..= i] at data[i*(bw+1) ..].
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let bw = a.bandwidth();
        let width = bw + 1;
        let bytes = n.checked_mul(width).and_then(|w| w.checked_mul(8));
        match bytes {
            Some(b) if b <= 8 * 300_000_000 => {}
            _ => {
                return Err(Error::Numeric(format!(
                    "band factorization too large: n = {n}, bandwidth = {bw}"
                )))
            }
        }
        // Entry L[i][j] (j in [i-bw, i]) lives at bw*(i+1) + j, so each
        // row's band is contiguous and the update loops are slice dots.
        let idx = |i: usize, j: usize| bw * (i + 1) + j;
        let mut data = vec![0.0f64; n * width];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[k];
                if j <= i {
                    data[idx(i, j)] = a.vals[k];
                }
            }
        }
        for i in 0..n {
            let j_min = i.saturating_sub(bw);
            for j in j_min..=i {
                let k_min = j_min.max(j.saturating_sub(bw));
                let d = dot(
                    &data[idx(i, k_min)..idx(i, j)],
                    &data[idx(j, k_min)..idx(j, j)],
                );
                let s = data[idx(i, j)] - d;
                if j == i {
                    if s <= 0.0 {
                        return Err(Error::Numeric(format!(
                            "matrix not positive definite (pivot {s:.3e} at row {i})"
                        )));
                    }
                    data[idx(i, i)] = s.sqrt();
                } else {
                    data[idx(i, j)] = s / data[idx(j, j)];
                }
            }
        }
        Ok(BandCholesky { n, bw, data })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let idx = |i: usize, j: usize| bw * (i + 1) + j;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let j_min = i.saturating_sub(bw);
            let d = dot(&self.data[idx(i, j_min)..idx(i, i)], &x[j_min..i]);
            x[i] = (x[i] - d) / self.data[idx(i, i)];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            let j_max = (i + bw).min(n - 1);
            for j in (i + 1)..=j_max {
                s -= self.data[idx(j, i)] * x[j];
            }
            x[i] = s / self.data[idx(i, i)];
        }
        x
    }
}

/// Dense LU with partial pivoting, for the small (possibly non-symmetric)
/// coarse systems.
pub struct DenseLu {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub const MAX_DIM: usize = 4096;

    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        let n = m.n;
        if n > Self::MAX_DIM {
            return Err(Error::Numeric(format!(
                "dense LU limited to {} unknowns, got {n}",
                Self::MAX_DIM
            )));
        }
        let mut a = vec![0.0f64; n * n];
        for i in 0..n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                a[i * n + m.cols[k]] = m.vals[k];
            }
        }
        let mut piv = Vec::with_capacity(n);
        for col in 0..n {
            let mut best = col;
            let mut best_val = a[col * n + col].abs();
            for r in (col + 1)..n {
                let v = a[r * n + col].abs();
                if v > best_val {
                    best = r;
                    best_val = v;
                }
            }
            if best_val == 0.0 {
                return Err(Error::Numeric(format!("singular matrix at column {col}")));
            }
            if best != col {
                for c in 0..n {
                    a.swap(col * n + c, best * n + c);
                }
            }
            piv.push(best);
            let d = a[col * n + col];
            for r in (col + 1)..n {
                let f = a[r * n + col] / d;
                a[r * n + col] = f;
                if f != 0.0 {
                    for c in (col + 1)..n {
                        a[r * n + c] -= f * a[col * n + c];
                    }
                }
            }
        }
        Ok(DenseLu { n, a, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            x.swap(i, self.piv[i]);
            let mut s = x[i];
            for j in 0..i {
                s -= self.a[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.a[i * n + j] * x[j];
            }
            x[i] = s / self.a[i * n + i];
        }
        x
    }
}

/// Jacobi-preconditioned conjugate gradients. Returns the solution, the
/// final relative residual, and the iteration count.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = a.n;
    let bn = b.iter().map(|&v| v * v).sum::<f64>().sqrt();
    if bn == 0.0 {
        return Ok((vec![0.0; n], 0.0, 0));
    }
    let diag = a.diagonal();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Numeric("non-positive diagonal in cg".into()));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(&ri, &di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iterations {
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::Numeric("matrix not positive definite in cg".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = r.iter().map(|&v| v * v).sum::<f64>().sqrt();
        if rn / bn <= tol {
            return Ok((x, rn / bn, it + 1));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rn = r.iter().map(|&v| v * v).sum::<f64>().sqrt();
    Err(Error::SolverFailure(format!(
        "cg did not converge in {max_iterations} iterations (relative residual {:.3e})",
        rn / bn
    )))
}

/// How to solve a sparse system.
#[derive(Clone, Debug, PartialEq)]
pub enum SolveMethod {
    /// Banded Cholesky; requires a symmetric positive definite matrix.
    DirectCholesky,
    /// Dense LU with partial pivoting; for small, possibly non-symmetric
    /// systems.
    DirectLu,
    Cg { tol: f64, max_iterations: usize },
}

impl SolveMethod {
    pub fn cg_default() -> Self {
        SolveMethod::Cg { tol: 1e-12, max_iterations: 200_000 }
    }

    /// Direct factorization up to a million unknowns (memory permitting),
    /// conjugate gradients beyond.
    pub fn default_for(a: &CsrMatrix) -> Self {
        let bw = a.bandwidth();
        if a.n <= 1_000_000 && a.n * (bw + 1) <= 300_000_000 {
            SolveMethod::DirectCholesky
        } else {
            SolveMethod::cg_default()
        }
    }
}

/// Symmetry tolerance for the Cholesky path, relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Solve `a x = b`. Zero-unknown systems return an empty vector.
pub fn solve_csr(a: &CsrMatrix, b: &[f64], method: &SolveMethod) -> Result<Vec<f64>> {
    if a.n == 0 {
        return Ok(Vec::new());
    }
    match method {
        SolveMethod::DirectCholesky => {
            if !a.is_symmetric(SYMMETRY_TOL) {
                return Err(Error::Numeric(
                    "matrix is not symmetric; Cholesky unavailable".into(),
                ));
            }
            Ok(BandCholesky::factor(a)?.solve(b))
        }
        SolveMethod::DirectLu => Ok(DenseLu::factor(a)?.solve(b)),
        SolveMethod::Cg { tol, max_iterations } => {
            conjugate_gradient(a, b, *tol, *max_iterations).map(|(x, _, _)| x)
        }
    }
}
