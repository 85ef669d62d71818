//! Small dense symmetric matrices and Cholesky-based log-determinants.

/// Diagonal jitter added on a failed factorization.
pub const JITTER: f64 = 1e-12;

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Panics if `data.len() != n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "row-major data must hold n*n entries");
        SquareMatrix { n, data }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SquareMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn submatrix(&self, idx: &[usize]) -> SquareMatrix {
        SquareMatrix::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    pub fn add_identity(&self) -> SquareMatrix {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] += 1.0;
        }
        m
    }
}

/// Lower-triangular Cholesky factor, row-major.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric matrix; `None` if it is not positive definite.
    pub fn factor(a: &SquareMatrix) -> Option<Cholesky> {
        Self::factor_shifted(a, 0.0)
    }

    fn factor_shifted(a: &SquareMatrix, shift: f64) -> Option<Cholesky> {
        let n = a.dim();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j) + shift;
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Cholesky { n, l })
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n)
            .map(|i| self.l[i * self.n + i].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Solves `L x = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

/// Log-determinant of a symmetric positive semi-definite matrix.
///
/// Uses Cholesky with diagonal pivoting, which keeps the factorization
/// accurate on ill-conditioned kernels. Retries once with [`JITTER`] on the
/// diagonal if a pivot is not positive; returns `-inf` if the matrix is still
/// singular. The empty matrix has log-determinant 0.
pub fn log_det_psd(a: &SquareMatrix) -> f64 {
    if a.dim() == 0 {
        return 0.0;
    }
    pivoted_log_det(a, 0.0)
        .or_else(|| pivoted_log_det(a, JITTER))
        .unwrap_or(f64::NEG_INFINITY)
}

fn pivoted_log_det(a: &SquareMatrix, shift: f64) -> Option<f64> {
    let n = a.dim();
    let mut w: Vec<f64> = a.as_slice().to_vec();
    for i in 0..n {
        w[i * n + i] += shift;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut log_det = 0.0;
    for j in 0..n {
        // Bring the largest remaining diagonal entry to position j.
        let p = (j..n)
            .max_by(|&x, &y| w[perm[x] * n + perm[x]].total_cmp(&w[perm[y] * n + perm[y]]))
            .unwrap();
        perm.swap(j, p);
        let pj = perm[j];
        let d = w[pj * n + pj];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        log_det += d.ln();
        // Schur complement update of the trailing block.
        for &ra in &perm[j + 1..] {
            let f = w[ra * n + pj] / d;
            for &rb in &perm[j + 1..] {
                w[ra * n + rb] -= f * w[pj * n + rb];
            }
        }
    }
    Some(log_det)
}
