//! Singular values and pseudo-inverses by one-sided (Hestenes) Jacobi,
//! preconditioned with a column-pivoted Householder QR factorization.

use super::Matrix;
use crate::error::{invalid, Error, Result};

/// Default relative cutoff applied to singular values in [`pinv`].
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 80;

/// Column-pivoted QR of a tall matrix, `A P = Q R`.
struct PivotedQr {
    m: usize,
    n: usize,
    /// Householder vectors, column-major, `n` columns of length `m`; vector
    /// `k` is zero above row `k` and has unit leading entry implied by `tau`.
    house: Vec<f64>,
    tau: Vec<f64>,
    /// `R` row by row, `n×n` upper triangular.
    r: Matrix,
    /// `perm[j]` is the original column placed at position `j`.
    perm: Vec<usize>,
}

impl PivotedQr {
    fn new(a: &Matrix) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mut h = vec![0.0; m * n];
        for i in 0..m {
            for (j, &x) in a.row(i).iter().enumerate() {
                h[j * m + i] = x;
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms: Vec<f64> = (0..n).map(|j| dot(&h[j * m..(j + 1) * m], &h[j * m..(j + 1) * m])).collect();
        let mut tau = vec![0.0; n];
        for k in 0..n {
            // Pivot: recompute remaining norms exactly to avoid downdate drift.
            for j in k..n {
                let col = &h[j * m + k..(j + 1) * m];
                norms[j] = dot(col, col);
            }
            let p = (k..n).fold(k, |best, j| if norms[j] > norms[best] { j } else { best });
            if p != k {
                for i in 0..m {
                    h.swap(k * m + i, p * m + i);
                }
                perm.swap(k, p);
                norms.swap(k, p);
            }
            let (head, tail) = h.split_at_mut((k + 1) * m);
            let v = &mut head[k * m + k..];
            let alpha = v[0];
            let nrm = norms[k].sqrt();
            if nrm == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            let beta = if alpha >= 0.0 { -nrm } else { nrm };
            // v = x − β e₁ scaled so v₀ = 1; H = I − τ v vᵀ.
            let v0 = alpha - beta;
            tau[k] = (beta - alpha) / beta;
            for x in v[1..].iter_mut() {
                *x /= v0;
            }
            v[0] = beta;
            for j in 0..n - k - 1 {
                let col = &mut tail[j * m + k..(j + 1) * m];
                let s = col[0] + dot(&v[1..], &col[1..]);
                let f = tau[k] * s;
                col[0] -= f;
                for (c, &vi) in col[1..].iter_mut().zip(&v[1..]) {
                    *c -= f * vi;
                }
            }
        }
        let mut r = Matrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                r[(i, j)] = h[j * m + i];
            }
        }
        Self { m, n, house: h, tau, r, perm }
    }

    /// `Q [x; 0]` for `x` of length `n`, returned with length `m`.
    fn apply_q(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        y[..self.n].copy_from_slice(x);
        for k in (0..self.n).rev() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let v = &self.house[k * m + k + 1..(k + 1) * m];
            let s = y[k] + dot(v, &y[k + 1..]);
            let f = self.tau[k] * s;
            y[k] -= f;
            for (yi, &vi) in y[k + 1..].iter_mut().zip(v) {
                *yi -= f * vi;
            }
        }
        y
    }
}

/// Column-orthogonalized factorization `A V = W` with `V` orthogonal.
/// The singular values are the column norms of `W`.
struct Jacobi {
    m: usize,
    n: usize,
    /// `W` in column-major order, `n` columns of length `m`.
    w: Vec<f64>,
    /// `V` in column-major order, `n` columns of length `n`.
    v: Vec<f64>,
    norms2: Vec<f64>,
}

impl Jacobi {
    /// Requires `a.rows() >= a.cols()`.
    fn run(a: &Matrix, with_v: bool) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        debug_assert!(m >= n);
        let mut w = vec![0.0; m * n];
        for i in 0..m {
            for (j, &x) in a.row(i).iter().enumerate() {
                w[j * m + i] = x;
            }
        }
        let mut v = if with_v { vec![0.0; n * n] } else { Vec::new() };
        if with_v {
            for j in 0..n {
                v[j * n + j] = 1.0;
            }
        }
        let mut jac = Jacobi {
            m,
            n,
            w,
            v,
            norms2: vec![0.0; n],
        };
        jac.refresh_norms();
        let frob2: f64 = jac.norms2.iter().sum();
        if frob2 == 0.0 {
            return Ok(jac);
        }
        // Columns this small carry nothing above any usable cutoff.
        let negligible = (f64::EPSILON * f64::EPSILON) * frob2 * 1e-4;
        let tol = f64::EPSILON * (m as f64).sqrt();

        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n - 1 {
                for q in p + 1..n {
                    if jac.rotate(p, q, tol, negligible) {
                        rotated = true;
                    }
                }
            }
            jac.refresh_norms();
            if !rotated {
                return Ok(jac);
            }
        }
        Err(Error::Numerical(format!(
            "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps ({m}x{n})"
        )))
    }

    fn refresh_norms(&mut self) {
        let m = self.m;
        for (j, nrm) in self.norms2.iter_mut().enumerate() {
            *nrm = dot(&self.w[j * m..(j + 1) * m], &self.w[j * m..(j + 1) * m]);
        }
    }

    /// Orthogonalizes columns `p < q`; returns whether a rotation was applied.
    fn rotate(&mut self, p: usize, q: usize, tol: f64, negligible: f64) -> bool {
        let m = self.m;
        let alpha = self.norms2[p];
        let beta = self.norms2[q];
        if alpha <= negligible || beta <= negligible {
            return false;
        }
        let (head, tail) = self.w.split_at_mut(q * m);
        let wp = &mut head[p * m..(p + 1) * m];
        let wq = &mut tail[..m];
        let gamma = dot(wp, wq);
        if gamma.abs() <= tol * (alpha * beta).sqrt() {
            return false;
        }
        let zeta = (beta - alpha) / (2.0 * gamma);
        let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
        let c = 1.0 / (1.0 + t * t).sqrt();
        let s = c * t;
        rot(wp, wq, c, s);
        self.norms2[p] = alpha - t * gamma;
        self.norms2[q] = beta + t * gamma;
        if !self.v.is_empty() {
            let n = self.n;
            let (head, tail) = self.v.split_at_mut(q * n);
            rot(&mut head[p * n..(p + 1) * n], &mut tail[..n], c, s);
        }
        true
    }

    fn sigma(&self, j: usize) -> f64 {
        self.norms2[j].max(0.0).sqrt()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators keep the loop vectorizable and the order fixed.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn rot(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

fn check_finite(m: &Matrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        invalid("matrix has non-finite entries")
    }
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    let t;
    let a = if m.rows() >= m.cols() {
        m
    } else {
        t = m.transpose();
        &t
    };
    let qr = PivotedQr::new(a);
    let jac = Jacobi::run(&qr.r.transpose(), false)?;
    let mut s: Vec<f64> = (0..jac.n).map(|j| jac.sigma(j)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Moore–Penrose pseudo-inverse. Singular values below
/// `rel_tol × σ_max` are treated as zero.
pub fn pinv(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    check_finite(m)?;
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return invalid(format!("rel_tol must lie in (0, 1), got {rel_tol}"));
    }
    if m.rows() < m.cols() {
        return Ok(pinv_tall(&m.transpose(), rel_tol)?.transpose());
    }
    pinv_tall(m, rel_tol)
}

/// With `A P = Q R` and `Rᵀ V = W`, `A = (Q V) Σ (P W Σ⁻¹)ᵀ`, so
/// `A⁺ = Σ_j (P w_j)(Q v_j)ᵀ / σ_j²`.
fn pinv_tall(a: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let qr = PivotedQr::new(a);
    let jac = Jacobi::run(&qr.r.transpose(), true)?;
    let (m, n) = (qr.m, qr.n);
    let smax = (0..n).map(|j| jac.sigma(j)).fold(0.0, f64::max);
    let mut p = Matrix::zeros(n, m);
    if smax == 0.0 {
        return Ok(p);
    }
    let cut = rel_tol * smax;
    for j in 0..n {
        let s = jac.sigma(j);
        if s <= cut {
            continue;
        }
        let inv = 1.0 / (s * s);
        let y = qr.apply_q(&jac.v[j * n..(j + 1) * n]);
        let wj = &jac.w[j * n..(j + 1) * n];
        for (k, &wk) in wj.iter().enumerate() {
            let f = wk * inv;
            if f == 0.0 {
                continue;
            }
            for (o, &yv) in p.row_mut(qr.perm[k]).iter_mut().zip(&y) {
                *o += f * yv;
            }
        }
    }
    Ok(p)
}

/// Generalized inverse of a row/column equilibrated matrix.
///
/// Computes `D_c⁻¹ · pinv(D_r⁻¹ M D_c⁻¹) · D_r⁻¹` where the diagonal scalings
/// are powers of two chosen so every row and column of the scaled matrix has
/// largest magnitude near one. For invertible `M` this is the inverse. For
/// rank-deficient `M` it is a reflexive generalized inverse (`MPM = M`,
/// `PMP = P`) whose truncation is decided in the balanced scaling, so entries
/// that are small only because of their row or column magnitude survive the
/// relative cutoff.
pub fn pinv_balanced(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    check_finite(m)?;
    let (rows, cols) = (m.rows(), m.cols());
    let mut r = vec![1.0; rows];
    let mut c = vec![1.0; cols];
    let mut b = m.clone();
    for _ in 0..6 {
        let mut changed = false;
        for i in 0..rows {
            let mx = b.row(i).iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            let f = pow2_sqrt(mx);
            if f != 1.0 {
                changed = true;
                r[i] *= f;
                for x in b.row_mut(i) {
                    *x /= f;
                }
            }
        }
        let mut colmax = vec![0.0_f64; cols];
        for i in 0..rows {
            for (cm, x) in colmax.iter_mut().zip(b.row(i)) {
                *cm = cm.max(x.abs());
            }
        }
        let f: Vec<f64> = colmax.iter().map(|&x| pow2_sqrt(x)).collect();
        if f.iter().any(|&x| x != 1.0) {
            changed = true;
            for (j, &fj) in f.iter().enumerate() {
                c[j] *= fj;
            }
            for i in 0..rows {
                for (x, &fj) in b.row_mut(i).iter_mut().zip(&f) {
                    *x /= fj;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut p = pinv(&b, rel_tol)?;
    for (i, &ci) in c.iter().enumerate() {
        for (x, &rj) in p.row_mut(i).iter_mut().zip(&r) {
            *x /= ci * rj;
        }
    }
    Ok(p)
}

/// Power of two nearest to `√x`; one for zero or rows already in range.
fn pow2_sqrt(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return 1.0;
    }
    let e = (x.log2() / 2.0).round();
    if e == 0.0 {
        1.0
    } else {
        2f64.powi(e as i32)
    }
}
