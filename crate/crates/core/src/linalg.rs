//! Dense least squares by Householder QR with column pivoting.

use crate::Scalar;

/// Column-major dense matrix, used for regressor matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[c * self.rows + r]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[c * self.rows + r] = v;
    }

    pub fn col(&self, c: usize) -> &[T] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    fn col_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for r in 0..self.rows {
                self.data.swap(a * self.rows + r, b * self.rows + r);
            }
        }
    }

    /// Row `r` as a vector.
    pub fn row(&self, r: usize) -> Vec<T> {
        (0..self.cols).map(|c| self.get(r, c)).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (c, &xc) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.col(c)) {
                *o += a * xc;
            }
        }
        out
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn vstack(blocks: &[Matrix<T>], cols: usize) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut out = Self::zeros(rows, cols);
        for c in 0..cols {
            let mut r0 = 0;
            for b in blocks {
                out.col_mut(c)[r0..r0 + b.rows].copy_from_slice(b.col(c));
                r0 += b.rows;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LstsqSolution<T> {
    pub x: Vec<T>,
    pub rank: usize,
}

impl<T> LstsqSolution<T> {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.x.len()
    }
}

fn norm<T: Scalar>(v: &[T]) -> T {
    // Scaled to avoid overflow on large regressors.
    let scale = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|&x| (x / scale) * (x / scale)).sum::<T>().sqrt()
}

/// Householder reflector for `x`: returns `(v, beta, alpha)` with
/// `(I - beta v vᵀ) x = alpha e₁`.
fn householder<T: Scalar>(x: &[T]) -> (Vec<T>, T, T) {
    let n = norm(x);
    if n == T::zero() {
        return (vec![T::zero(); x.len()], T::zero(), T::zero());
    }
    let alpha = if x[0] > T::zero() { -n } else { n };
    let mut v = x.to_vec();
    v[0] -= alpha;
    let vv: T = v.iter().map(|&a| a * a).sum();
    let beta = if vv == T::zero() { T::zero() } else { T::from_f64_lossy(2.0) / vv };
    (v, beta, alpha)
}

fn reflect<T: Scalar>(v: &[T], beta: T, x: &mut [T]) {
    let d: T = v.iter().zip(x.iter()).map(|(&a, &b)| a * b).sum();
    let s = beta * d;
    for (xi, &vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

/// Minimum-norm solution of `min ‖A x − b‖₂`. Columns whose pivoted `R`
/// diagonal falls below `max(m, n) · ε · |R₀₀|` are treated as dependent.
pub(crate) fn lstsq<T: Scalar>(a: &Matrix<T>, b: &[T]) -> LstsqSolution<T> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m, "right-hand side length");
    if n == 0 {
        return LstsqSolution { x: Vec::new(), rank: 0 };
    }
    let mut r = a.clone();
    let mut qtb = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let steps = m.min(n);
    let mut diag = Vec::with_capacity(steps);
    for k in 0..steps {
        let pivot = (k..n)
            .map(|c| (c, norm(&r.col(c)[k..])))
            .fold((k, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0;
        r.swap_cols(k, pivot);
        perm.swap(k, pivot);
        let (v, beta, alpha) = householder(&r.col(k)[k..]);
        for c in k + 1..n {
            reflect(&v, beta, &mut r.col_mut(c)[k..]);
        }
        reflect(&v, beta, &mut qtb[k..]);
        let col = r.col_mut(k);
        col[k] = alpha;
        for x in &mut col[k + 1..] {
            *x = T::zero();
        }
        diag.push(alpha.abs());
    }
    let tol = T::from_usize_lossy(m.max(n)) * T::epsilon() * diag[0];
    let rank = if diag[0] == T::zero() { 0 } else { diag.iter().take_while(|&&d| d > tol).count() };

    let mut y = vec![T::zero(); n];
    if rank == n {
        for i in (0..n).rev() {
            let mut s = qtb[i];
            for j in i + 1..n {
                s -= r.get(i, j) * y[j];
            }
            y[i] = s / r.get(i, i);
        }
    } else if rank > 0 {
        // Complete orthogonal decomposition: [R11 R12] = [Uᵀ 0] Zᵀ from a QR
        // of the transposed trapezoid; the minimum-norm y is Z [U⁻ᵀ c; 0].
        let mut t = Matrix::zeros(n, rank);
        for i in 0..rank {
            for j in i..n {
                t.set(j, i, r.get(i, j));
            }
        }
        let mut reflectors = Vec::with_capacity(rank);
        for k in 0..rank {
            let (v, beta, alpha) = householder(&t.col(k)[k..]);
            for c in k + 1..rank {
                reflect(&v, beta, &mut t.col_mut(c)[k..]);
            }
            t.set(k, k, alpha);
            reflectors.push((v, beta));
        }
        // Forward substitution with Uᵀ (lower triangular).
        let mut w = vec![T::zero(); n];
        for i in 0..rank {
            let mut s = qtb[i];
            for j in 0..i {
                s -= t.get(j, i) * w[j];
            }
            w[i] = s / t.get(i, i);
        }
        for (k, (v, beta)) in reflectors.iter().enumerate().rev() {
            reflect(v, *beta, &mut w[k..]);
        }
        y = w;
    }
    let mut x = vec![T::zero(); n];
    for (i, &p) in perm.iter().enumerate() {
        x[p] = y[i];
    }
    LstsqSolution { x, rank }
}
