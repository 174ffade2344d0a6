//! Thin singular value decomposition and everything built on it.
//!
//! A tall matrix is first reduced by Householder QR; the small triangular
//! factor is then diagonalized with one-sided (Hestenes) Jacobi rotations.
//! Wide matrices are handled through their transpose. The orthogonal factor
//! of the QR step is kept implicitly, so least-squares solves never form the
//! full left singular basis.

use serde::{Deserialize, Serialize};

use crate::dense::matrix::{axpy, dot};
use crate::dense::{Matrix, Vector};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;

/// `A = U · diag(Σ) · Vᵀ` restricted to the numerical rank `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinFactorization<T> {
    /// `rows × r`, orthonormal columns.
    pub u: Matrix<T>,
    /// Nonincreasing, positive, length `r`.
    pub singular_values: Vec<T>,
    /// `cols × r`, orthonormal columns.
    pub v: Matrix<T>,
    pub rank: usize,
}

/// Householder reflectors of a tall `n × d` matrix in column-major storage.
/// Column `k` holds the reflector vector in rows `k..n`; `beta[k]` is its
/// scale (`H_k = I - beta v vᵀ`).
struct Householder<T> {
    n: usize,
    d: usize,
    v: Vec<T>,
    beta: Vec<T>,
}

impl<T: Real> Householder<T> {
    /// Factors `a` (column-major, `n × d`, `n >= d`) and returns the
    /// reflectors together with the `d × d` upper-triangular factor in
    /// column-major storage.
    fn factor(mut a: Vec<T>, n: usize, d: usize) -> (Self, Vec<T>) {
        debug_assert!(n >= d);
        let mut beta = vec![T::zero(); d];
        let mut rdiag = vec![T::zero(); d];
        for k in 0..d {
            let (head, tail) = a.split_at_mut((k + 1) * n);
            let col = &mut head[k * n + k..];
            let norm = dot(col, col).sqrt();
            if norm == T::zero() {
                continue;
            }
            let x0 = col[0];
            let alpha = if x0 > T::zero() { -norm } else { norm };
            col[0] = x0 - alpha;
            // vᵀv = 2·norm·(norm + |x0|)
            let vtv = (norm * (norm + x0.abs())) * T::of(2.0);
            let b = T::of(2.0) / vtv;
            beta[k] = b;
            rdiag[k] = alpha;
            for j in 0..d - k - 1 {
                let target = &mut tail[j * n + k..(j + 1) * n];
                let s = dot(col, target);
                if s != T::zero() {
                    axpy(-(b * s), col, target);
                }
            }
        }
        let mut r = vec![T::zero(); d * d];
        for j in 0..d {
            for i in 0..j {
                r[j * d + i] = a[j * n + i];
            }
            r[j * d + j] = rdiag[j];
        }
        (Self { n, d, v: a, beta }, r)
    }

    #[inline]
    fn reflect(&self, k: usize, x: &mut [T]) {
        let b = self.beta[k];
        if b == T::zero() {
            return;
        }
        let v = &self.v[k * self.n + k..(k + 1) * self.n];
        let s = dot(v, &x[k..]);
        if s != T::zero() {
            axpy(-(b * s), v, &mut x[k..]);
        }
    }

    /// `x <- Qᵀ x`
    fn apply_qt(&self, x: &mut [T]) {
        for k in 0..self.d {
            self.reflect(k, x);
        }
    }

    /// `x <- Q x`
    fn apply_q(&self, x: &mut [T]) {
        for k in (0..self.d).rev() {
            self.reflect(k, x);
        }
    }
}

/// One-sided Jacobi on a square column-major matrix. Returns the column norms
/// (unsorted singular values), the normalized columns, and the accumulated
/// right rotations, all column-major `d × d`.
fn jacobi<T: Real>(mut w: Vec<T>, d: usize) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let mut v = vec![T::zero(); d * d];
    for i in 0..d {
        v[i * d + i] = T::one();
    }
    let tol = T::epsilon() * T::of_usize(d.max(1)).sqrt();
    let mut norms = vec![T::zero(); d];
    let mut converged = d <= 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for j in 0..d {
            let c = &w[j * d..(j + 1) * d];
            norms[j] = dot(c, c);
        }
        let mut rotated = false;
        for p in 0..d - 1 {
            for q in p + 1..d {
                let (a, b) = (norms[p], norms[q]);
                if a == T::zero() || b == T::zero() {
                    continue;
                }
                let (lo, hi) = w.split_at_mut(q * d);
                let wp = &mut lo[p * d..(p + 1) * d];
                let wq = &mut hi[..d];
                let g = dot(wp, wq);
                if g.abs() <= tol * a.sqrt() * b.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (g + g);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(wp, wq, c, s);
                let (vlo, vhi) = v.split_at_mut(q * d);
                rotate(&mut vlo[p * d..(p + 1) * d], &mut vhi[..d], c, s);
                norms[p] = a - t * g;
                norms[q] = b + t * g;
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::ConvergenceFailure { sweeps: MAX_SWEEPS });
    }
    let mut sigma = vec![T::zero(); d];
    for j in 0..d {
        let c = &mut w[j * d..(j + 1) * d];
        let s = dot(c, c).sqrt();
        sigma[j] = s;
        if s > T::zero() {
            let inv = T::one() / s;
            c.iter_mut().for_each(|x| *x *= inv);
        }
    }
    Ok((sigma, w, v))
}

#[inline]
fn rotate<T: Real>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (u, w) = (*a, *b);
        *a = c * u - s * w;
        *b = s * u + c * w;
    }
}

/// Reusable SVD of a matrix, keeping the QR reflectors implicit.
pub struct Svd<T> {
    rows: usize,
    cols: usize,
    transposed: bool,
    qr: Householder<T>,
    /// Sorted nonincreasing, length `min(rows, cols)`.
    sigma: Vec<T>,
    /// Left singular vectors of the triangular factor, column-major `d × d`, sorted.
    u_small: Vec<T>,
    /// Right singular vectors of the triangular factor, column-major `d × d`, sorted.
    v_small: Vec<T>,
    rank: usize,
}

impl<T: Real> Svd<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        let (rows, cols) = a.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions(format!(
                "cannot factor an empty {rows}x{cols} matrix"
            )));
        }
        let transposed = rows < cols;
        // Column-major storage of the tall orientation: for the transpose
        // that is just the row-major data of `a`.
        let (n, d, cm) = if transposed {
            (cols, rows, a.as_slice().to_vec())
        } else {
            (rows, cols, a.to_col_major())
        };
        let (qr, r) = Householder::factor(cm, n, d);
        let (sigma, uw, vw) = jacobi(r, d)?;
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).expect("finite").then(i.cmp(&j)));
        let mut u_small = vec![T::zero(); d * d];
        let mut v_small = vec![T::zero(); d * d];
        let mut sorted = vec![T::zero(); d];
        for (dst, &src) in order.iter().enumerate() {
            sorted[dst] = sigma[src];
            u_small[dst * d..(dst + 1) * d].copy_from_slice(&uw[src * d..(src + 1) * d]);
            v_small[dst * d..(dst + 1) * d].copy_from_slice(&vw[src * d..(src + 1) * d]);
        }
        let smax = sorted.first().copied().unwrap_or_else(T::zero);
        let cutoff = T::of_usize(rows.max(cols)) * smax * T::rank_rtol();
        let rank = sorted.iter().take_while(|&&s| s > cutoff).count();
        Ok(Self {
            rows,
            cols,
            transposed,
            qr,
            sigma: sorted,
            u_small,
            v_small,
            rank,
        })
    }

    /// All `min(rows, cols)` singular values, nonincreasing.
    pub fn singular_values(&self) -> &[T] {
        &self.sigma
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Left factor of the tall orientation (`n × r`), column-major.
    fn tall_left(&self, r: usize) -> Vec<T> {
        let (n, d) = (self.qr.n, self.qr.d);
        let mut out = vec![T::zero(); n * r];
        for j in 0..r {
            let col = &mut out[j * n..(j + 1) * n];
            col[..d].copy_from_slice(&self.u_small[j * d..(j + 1) * d]);
            self.qr.apply_q(col);
        }
        out
    }

    /// Right factor of the tall orientation (`d × r`), column-major.
    fn tall_right(&self, r: usize) -> Vec<T> {
        self.v_small[..r * self.qr.d].to_vec()
    }

    pub fn thin(&self) -> ThinFactorization<T> {
        let r = self.rank;
        let (n, d) = (self.qr.n, self.qr.d);
        let left = Matrix::from_col_major(n, r, &self.tall_left(r));
        let right = Matrix::from_col_major(d, r, &self.tall_right(r));
        let (u, v) = if self.transposed { (right, left) } else { (left, right) };
        ThinFactorization {
            u,
            singular_values: self.sigma[..r].to_vec(),
            v,
            rank: r,
        }
    }

    /// Minimum-norm least-squares solution `A† b`, inverting only the
    /// singular values above the rank cutoff.
    pub fn solve(&self, b: &Vector<T>) -> Result<Vector<T>> {
        if b.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "least-squares right-hand side",
                expected: self.rows,
                got: b.len(),
            });
        }
        let (n, d, r) = (self.qr.n, self.qr.d, self.rank);
        if !self.transposed {
            // x = V_s Σ⁻¹ U_sᵀ (Qᵀ b)[..d]
            let mut y = b.as_slice().to_vec();
            self.qr.apply_qt(&mut y);
            let mut x = vec![T::zero(); d];
            for j in 0..r {
                let coef = dot(&self.u_small[j * d..(j + 1) * d], &y[..d]) / self.sigma[j];
                axpy(coef, &self.v_small[j * d..(j + 1) * d], &mut x);
            }
            Ok(Vector::from_raw(x))
        } else {
            // Aᵀ = Q [U_s Σ V_sᵀ; 0]  =>  A† b = Q [U_s Σ⁻¹ V_sᵀ b; 0]
            let mut x = vec![T::zero(); n];
            for j in 0..r {
                let coef = dot(&self.v_small[j * d..(j + 1) * d], b.as_slice()) / self.sigma[j];
                axpy(coef, &self.u_small[j * d..(j + 1) * d], &mut x[..d]);
            }
            self.qr.apply_q(&mut x);
            Ok(Vector::from_raw(x))
        }
    }
}

/// Thin SVD truncated at the numerical rank
/// (`σ_i > max(rows, cols) · σ_max · 1e-12`).
pub fn thin_svd<T: Real>(a: &Matrix<T>) -> Result<ThinFactorization<T>> {
    Ok(Svd::new(a)?.thin())
}

/// All `min(rows, cols)` singular values, nonincreasing.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Result<Vec<T>> {
    Ok(Svd::new(a)?.sigma)
}

/// Moore–Penrose pseudoinverse `V Σ⁻¹ Uᵀ`.
pub fn pinv<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let f = thin_svd(a)?;
    let (rows, cols) = a.shape();
    let mut out = Matrix::zeros(cols, rows);
    for k in 0..f.rank {
        let inv = T::one() / f.singular_values[k];
        for i in 0..cols {
            let vik = f.v[(i, k)] * inv;
            if vik == T::zero() {
                continue;
            }
            let row = out.row_mut(i);
            for (j, x) in row.iter_mut().enumerate() {
                *x += vik * f.u[(j, k)];
            }
        }
    }
    Ok(out)
}

/// `x* = A† b` for an overdetermined (or square) system.
pub fn exact_lsq<T: Real>(a: &Matrix<T>, b: &Vector<T>) -> Result<Vector<T>> {
    if a.rows() < a.cols() {
        return Err(Error::InvalidDimensions(format!(
            "least squares needs rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Svd::new(a)?.solve(b)
}

/// Spectral norm `σ_max(A)`.
pub fn operator_norm<T: Real>(a: &Matrix<T>) -> Result<T> {
    Ok(Svd::new(a)?.sigma.first().copied().unwrap_or_else(T::zero))
}

/// Orthonormal basis of the column space of a full-column-rank tall matrix,
/// sign-fixed so that the triangular factor has a positive diagonal.
pub fn orthonormalize_columns<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let (n, d) = a.shape();
    if n < d {
        return Err(Error::InvalidDimensions(format!(
            "orthonormalization needs rows >= cols, got {n}x{d}"
        )));
    }
    let (qr, r) = Householder::factor(a.to_col_major(), n, d);
    let mut q = vec![T::zero(); n * d];
    for j in 0..d {
        let rjj = r[j * d + j];
        if rjj == T::zero() {
            return Err(Error::RankDeficient { rank: j, required: d });
        }
        let col = &mut q[j * n..(j + 1) * n];
        col[j] = T::one();
        qr.apply_q(col);
        if rjj < T::zero() {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(Matrix::from_col_major(n, d, &q))
}
