//! Tensor-train cross (TT-X) interpolation and integration.
//!
//! For nodes `s_1 … s_n` in `d` dimensions the interpolant is the chain
//!
//! ```text
//! f̃(x) = F_0[x_0] · Q_0⁺ · F_1[x_1] · Q_1⁺ ⋯ Q_{d−2}⁺ · F_{d−1}[x_{d−1}]
//! ```
//!
//! with `(F_a[x])_{kℓ} = f(s_k[..a], x, s_ℓ[a+1..])` and
//! `(Q_a)_{kℓ} = f(s_k[..=a], s_ℓ[a+1..])`. The first F-matrix has no left
//! pinning and is a `1×n` row, the last has no right pinning and is an `n×1`
//! column. Dimensions are indexed from zero throughout.
//!
//! Integration replaces every `F_a` by its elementwise integral over `x_a`
//! and contracts the chain, costing `Θ(d·n²)` target evaluations.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gaussmodel::{Conditioner, GaussianSpec};
use crate::numcore::{pinv, pinv_balanced, Matrix, QuadratureRule, Rng, DEFAULT_PINV_TOL};

/// A real function of `dim()` variables.
pub trait TargetFunction: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    /// `∫ f(left[..a], z, right[a+1..]) dz` over the real line, if known in
    /// closed form. `left` and `right` are full-length nodes; only their
    /// coordinates before and after `a` are read.
    fn integrate_1d(&self, _a: usize, _left: &[f64], _right: &[f64]) -> Option<f64> {
        None
    }
}

impl<T: TargetFunction + ?Sized> TargetFunction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
    fn integrate_1d(&self, a: usize, left: &[f64], right: &[f64]) -> Option<f64> {
        (**self).integrate_1d(a, left, right)
    }
}

impl<T: TargetFunction + ?Sized> TargetFunction for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
    fn integrate_1d(&self, a: usize, left: &[f64], right: &[f64]) -> Option<f64> {
        (**self).integrate_1d(a, left, right)
    }
}

/// Closure-backed target without an analytic 1-D integral.
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> TargetFunction for FnTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Wraps a target and counts point evaluations and analytic 1-D integrals.
pub struct Counted<T> {
    inner: T,
    evals: AtomicU64,
    integrals: AtomicU64,
}

impl<T: TargetFunction> Counted<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            evals: AtomicU64::new(0),
            integrals: AtomicU64::new(0),
        }
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }

    pub fn evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn integrals(&self) -> u64 {
        self.integrals.load(Ordering::Relaxed)
    }

    /// Point evaluations plus analytic 1-D integrals.
    pub fn total(&self) -> u64 {
        self.evals() + self.integrals()
    }

    pub fn reset(&self) {
        self.evals.store(0, Ordering::Relaxed);
        self.integrals.store(0, Ordering::Relaxed);
    }
}

impl<T: TargetFunction> TargetFunction for Counted<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x)
    }
    fn integrate_1d(&self, a: usize, left: &[f64], right: &[f64]) -> Option<f64> {
        let r = self.inner.integrate_1d(a, left, right);
        if r.is_some() {
            self.integrals.fetch_add(1, Ordering::Relaxed);
        }
        r
    }
}

/// Reorders dimensions: `g(y) = f(x)` with `x[perm[i]] = y[i]`.
pub struct Permuted<T> {
    inner: T,
    perm: Vec<usize>,
}

impl<T: TargetFunction> Permuted<T> {
    pub fn new(inner: T, perm: Vec<usize>) -> Result<Self> {
        let d = inner.dim();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return invalid(format!("{perm:?} is not a permutation of 0..{d}"));
        }
        Ok(Self { inner, perm })
    }

    fn unpermute(&self, y: &[f64], out: &mut [f64]) {
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = y[i];
        }
    }
}

impl<T: TargetFunction> TargetFunction for Permuted<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, y: &[f64]) -> f64 {
        let mut x = vec![0.0; y.len()];
        self.unpermute(y, &mut x);
        self.inner.eval(&x)
    }
}

/// Whitened coordinates: `g(y) = |det L|·f(μ + L y)`, so `∫g = ∫f`.
pub struct Whitened<T> {
    inner: T,
    mu: Vec<f64>,
    l: Matrix,
    jacobian: f64,
}

impl<T: TargetFunction> Whitened<T> {
    /// Uses the mean and Cholesky factor of `spec`.
    pub fn new(inner: T, spec: &GaussianSpec) -> Result<Self> {
        if spec.dim() != inner.dim() {
            return invalid("whitening transform dimension differs from target");
        }
        let l = spec.chol().clone();
        let jacobian = (0..l.rows()).map(|i| l[(i, i)]).product::<f64>().abs();
        Ok(Self {
            inner,
            mu: spec.mu().to_vec(),
            l,
            jacobian,
        })
    }

    pub fn to_original(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.mu.clone();
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += self.l.row(i)[..=i].iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        }
        x
    }
}

impl<T: TargetFunction> TargetFunction for Whitened<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, y: &[f64]) -> f64 {
        self.jacobian * self.inner.eval(&self.to_original(y))
    }
}

/// Gaussian density as a target; 1-D integrals are marginal densities.
pub struct GaussianDensity {
    spec: GaussianSpec,
    conditioners: Vec<Conditioner>,
}

impl GaussianDensity {
    pub fn new(spec: GaussianSpec) -> Result<Self> {
        let conditioners = (0..spec.dim())
            .map(|a| spec.conditioner(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, conditioners })
    }

    pub fn spec(&self) -> &GaussianSpec {
        &self.spec
    }
}

impl TargetFunction for GaussianDensity {
    fn dim(&self) -> usize {
        self.spec.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.spec.density(x).unwrap_or(0.0)
    }
    fn integrate_1d(&self, a: usize, left: &[f64], right: &[f64]) -> Option<f64> {
        let mut p = right.to_vec();
        p[..a].copy_from_slice(&left[..a]);
        Some(self.conditioners[a].condition(&p).log_weight.exp())
    }
}

/// Ordered list of distinct, finite nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet {
    dim: usize,
    nodes: Vec<Vec<f64>>,
}

impl NodeSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("node dimension must be positive");
        }
        Ok(Self {
            dim,
            nodes: Vec::new(),
        })
    }

    pub fn from_nodes(dim: usize, nodes: Vec<Vec<f64>>) -> Result<Self> {
        let mut set = Self::new(dim)?;
        for node in nodes {
            set.push(node)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, node: Vec<f64>) -> Result<()> {
        if node.len() != self.dim {
            return invalid(format!("node has length {}, expected {}", node.len(), self.dim));
        }
        if !node.iter().all(|v| v.is_finite()) {
            return invalid("node has non-finite coordinates");
        }
        if self.contains(&node) {
            return invalid("node duplicates an existing node");
        }
        self.nodes.push(node);
        Ok(())
    }

    pub fn contains(&self, node: &[f64]) -> bool {
        self.nodes.iter().any(|s| s.as_slice() == node)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.nodes[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.iter().map(Vec::as_slice)
    }
}

/// How connection matrices are inverted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PinvMode {
    /// Moore–Penrose pseudo-inverse with a relative cutoff.
    Plain,
    /// Pseudo-inverse of the row/column equilibrated matrix, see
    /// [`pinv_balanced`]. Keeps rows whose scale is small relative to the
    /// largest entry, which matters for weighted targets such as densities.
    #[default]
    Balanced,
}

/// Candidate distribution for greedy node placement.
#[derive(Clone, Debug)]
pub enum Proposal {
    Gaussian(GaussianSpec),
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
}

impl Proposal {
    fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            Proposal::Gaussian(g) => g.sample(rng),
            Proposal::UniformBox { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&a, &b)| a + (b - a) * rng.uniform())
                .collect(),
        }
    }

    /// Per-coordinate length scale for local search and jitter; a zero
    /// width falls back to one when jittering.
    fn scales(&self) -> Vec<f64> {
        match self {
            Proposal::Gaussian(g) => (0..g.dim()).map(|i| g.sigma()[(i, i)].sqrt()).collect(),
            Proposal::UniformBox { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).collect(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Proposal::Gaussian(g) => g.dim(),
            Proposal::UniformBox { lo, .. } => lo.len(),
        }
    }
}

/// Settings for [`TtxModel::add_node`].
#[derive(Clone, Debug)]
pub struct GreedyOptions {
    pub proposal: Proposal,
    /// Candidates drawn per added node.
    pub pool: usize,
    /// Coordinate hill-climbing passes on the winner.
    pub local_steps: usize,
}

impl GreedyOptions {
    pub fn new(proposal: Proposal) -> Self {
        Self {
            proposal,
            pool: 256,
            local_steps: 0,
        }
    }
}

/// Redraws of the whole pool before a duplicate winner is jittered.
pub const DUPLICATE_RETRIES: usize = 8;
/// Relative size of the jitter applied to a duplicate winner.
pub const DUPLICATE_JITTER: f64 = 1e-6;

/// A TT-X interpolant of a borrowed target.
pub struct TtxModel<'t, T: TargetFunction + ?Sized> {
    target: &'t T,
    nodes: NodeSet,
    q_pinv: Vec<Matrix>,
    pinv_tol: f64,
    mode: PinvMode,
}

impl<'t, T: TargetFunction + ?Sized> TtxModel<'t, T> {
    /// Model with no nodes; it evaluates to zero everywhere.
    pub fn empty(target: &'t T) -> Result<Self> {
        let nodes = NodeSet::new(target.dim())?;
        Ok(Self {
            target,
            nodes,
            q_pinv: Vec::new(),
            pinv_tol: DEFAULT_PINV_TOL,
            mode: PinvMode::default(),
        })
    }

    pub fn with_nodes(target: &'t T, nodes: NodeSet) -> Result<Self> {
        Self::with_options(target, nodes, DEFAULT_PINV_TOL, PinvMode::default())
    }

    pub fn with_options(
        target: &'t T,
        nodes: NodeSet,
        pinv_tol: f64,
        mode: PinvMode,
    ) -> Result<Self> {
        if nodes.dim() != target.dim() {
            return invalid(format!(
                "nodes have dimension {}, target has {}",
                nodes.dim(),
                target.dim()
            ));
        }
        if !(pinv_tol > 0.0 && pinv_tol < 1.0) {
            return invalid(format!("pinv_tol must lie in (0, 1), got {pinv_tol}"));
        }
        let mut model = Self {
            target,
            nodes,
            q_pinv: Vec::new(),
            pinv_tol,
            mode,
        };
        model.rebuild()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn q_pinv(&self) -> &[Matrix] {
        &self.q_pinv
    }

    pub fn pinv_tol(&self) -> f64 {
        self.pinv_tol
    }

    /// Connection matrix between dimensions `a` and `a+1`.
    pub fn q_matrix(&self, a: usize) -> Matrix {
        let n = self.len();
        let d = self.dim();
        assert!(a + 1 < d, "connection index {a} out of range for d={d}");
        let mut q = Matrix::zeros(n, n);
        let nodes = &self.nodes;
        let target = self.target;
        q.as_mut_slice()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(k, row)| {
                let mut x = nodes.get(k).to_vec();
                for (l, out) in row.iter_mut().enumerate() {
                    x[a + 1..].copy_from_slice(&nodes.get(l)[a + 1..]);
                    *out = target.eval(&x);
                }
            });
        q
    }

    fn rebuild(&mut self) -> Result<()> {
        self.q_pinv.clear();
        if self.is_empty() {
            return Ok(());
        }
        for a in 0..self.dim() - 1 {
            let q = self.q_matrix(a);
            if !q.is_finite() {
                return Err(Error::Numerical(format!(
                    "connection matrix {a} has non-finite entries"
                )));
            }
            let p = match self.mode {
                PinvMode::Plain => pinv(&q, self.pinv_tol)?,
                PinvMode::Balanced => pinv_balanced(&q, self.pinv_tol)?,
            };
            self.q_pinv.push(p);
        }
        Ok(())
    }

    /// Slice matrix `F_a[x]`: `1×n` for the first dimension, `n×1` for the
    /// last, `n×n` otherwise (`1×1` when `d = 1`).
    pub fn f_matrix(&self, a: usize, x: f64) -> Result<Matrix> {
        let (n, d) = (self.len(), self.dim());
        if a >= d {
            return invalid(format!("dimension {a} out of range for d={d}"));
        }
        if n == 0 {
            return invalid("model has no nodes");
        }
        let rows = if a == 0 { 1 } else { n };
        let cols = if a + 1 == d { 1 } else { n };
        let mut m = Matrix::zeros(rows, cols);
        let mut p = vec![0.0; d];
        for k in 0..rows {
            if a > 0 {
                p[..a].copy_from_slice(&self.nodes.get(k)[..a]);
            }
            p[a] = x;
            for l in 0..cols {
                if a + 1 < d {
                    p[a + 1..].copy_from_slice(&self.nodes.get(l)[a + 1..]);
                }
                m[(k, l)] = self.target.eval(&p);
            }
        }
        Ok(m)
    }

    /// Chain product at `x`. The empty model is identically zero.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let (n, d) = (self.len(), self.dim());
        assert_eq!(x.len(), d, "point has wrong dimension");
        if n == 0 {
            return 0.0;
        }
        let mut p = x.to_vec();
        // Row vector after F_0: entries f(x_0, s_ℓ[1..]).
        let mut v: Vec<f64> = (0..n)
            .map(|l| {
                p[1..].copy_from_slice(&self.nodes.get(l)[1..]);
                self.target.eval(&p)
            })
            .collect();
        if d == 1 {
            return v[0];
        }
        for a in 1..d {
            let u = self.q_pinv[a - 1].vec_mul(&v);
            p[a] = x[a];
            if a + 1 == d {
                let mut s = 0.0;
                for (k, &uk) in u.iter().enumerate() {
                    if uk == 0.0 {
                        continue;
                    }
                    p[..a].copy_from_slice(&self.nodes.get(k)[..a]);
                    s += uk * self.target.eval(&p);
                }
                return s;
            }
            v.iter_mut().for_each(|e| *e = 0.0);
            for (k, &uk) in u.iter().enumerate() {
                if uk == 0.0 {
                    continue;
                }
                p[..a].copy_from_slice(&self.nodes.get(k)[..a]);
                for (l, vl) in v.iter_mut().enumerate() {
                    p[a + 1..].copy_from_slice(&self.nodes.get(l)[a + 1..]);
                    *vl += uk * self.target.eval(&p);
                }
            }
        }
        unreachable!()
    }

    /// Elementwise integral of `F_a` over `x_a`.
    pub fn integrated_f_matrix(&self, a: usize, quad: &QuadratureRule) -> Result<Matrix> {
        let (n, d) = (self.len(), self.dim());
        if a >= d {
            return invalid(format!("dimension {a} out of range for d={d}"));
        }
        if n == 0 {
            return invalid("model has no nodes");
        }
        let rows = if a == 0 { 1 } else { n };
        let cols = if a + 1 == d { 1 } else { n };
        let mut m = Matrix::zeros(rows, cols);
        let nodes = &self.nodes;
        let target = self.target;
        m.as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .try_for_each(|(k, row)| -> Result<()> {
                // Edge slices still pass full nodes; unused halves are ignored.
                let left = nodes.get(k);
                let mut p = left.to_vec();
                for (l, out) in row.iter_mut().enumerate() {
                    let right = nodes.get(l);
                    *out = match target.integrate_1d(a, left, right) {
                        Some(v) => v,
                        None => {
                            p[a + 1..].copy_from_slice(&right[a + 1..]);
                            let mut q = p.clone();
                            quad.integrate_real_line(|z| {
                                q[a] = z;
                                target.eval(&q)
                            })?
                        }
                    };
                }
                Ok(())
            })?;
        Ok(m)
    }

    /// `∫ f̃`, contracting `∫F_0 · Q_0⁺ · ∫F_1 ⋯ ∫F_{d−1}` left to right.
    pub fn integrate(&self, quad: &QuadratureRule) -> Result<f64> {
        if self.is_empty() {
            return invalid("cannot integrate a model with no nodes");
        }
        let d = self.dim();
        let mut v = self.integrated_f_matrix(0, quad)?.row(0).to_vec();
        for a in 1..d {
            let u = self.q_pinv[a - 1].vec_mul(&v);
            let f = self.integrated_f_matrix(a, quad)?;
            v = f.vec_mul(&u);
        }
        Ok(v[0])
    }

    /// Root-mean-square of `f − f̃` over `n_samples` draws from `sampler`.
    pub fn rms_error(&self, sampler: &GaussianSpec, rng: &mut Rng, n_samples: usize) -> Result<f64> {
        if n_samples == 0 {
            return invalid("rms_error needs at least one sample");
        }
        if sampler.dim() != self.dim() {
            return invalid("sampler dimension differs from model");
        }
        let points: Vec<Vec<f64>> = (0..n_samples).map(|_| sampler.sample(rng)).collect();
        let sq: Vec<f64> = points
            .par_iter()
            .map(|x| {
                let r = self.target.eval(x) - self.evaluate(x);
                r * r
            })
            .collect();
        Ok((sq.iter().sum::<f64>() / n_samples as f64).sqrt())
    }

    fn residual(&self, x: &[f64]) -> f64 {
        (self.target.eval(x) - self.evaluate(x)).abs()
    }

    /// Greedy growth: draws `opts.pool` candidates, keeps the one with the
    /// largest residual `|f − f̃|`, refines it by `opts.local_steps` passes of
    /// coordinate hill climbing, appends it and rebuilds the connections.
    ///
    /// A winner that coincides with an existing node triggers a fresh pool,
    /// up to [`DUPLICATE_RETRIES`] times; after that it is moved by Gaussian
    /// jitter of relative size [`DUPLICATE_JITTER`].
    pub fn add_node(&mut self, rng: &mut Rng, opts: &GreedyOptions) -> Result<()> {
        if opts.pool == 0 {
            return invalid("candidate pool must be at least 1");
        }
        if opts.proposal.dim() != self.dim() {
            return invalid("proposal dimension differs from model");
        }
        let scales = opts.proposal.scales();
        let mut winner = Vec::new();
        for attempt in 0..=DUPLICATE_RETRIES {
            let pool: Vec<Vec<f64>> = (0..opts.pool).map(|_| opts.proposal.draw(rng)).collect();
            let res: Vec<f64> = pool.par_iter().map(|c| self.residual(c)).collect();
            let mut best = 0;
            for (i, r) in res.iter().enumerate() {
                if *r > res[best] {
                    best = i;
                }
            }
            let mut x = pool[best].clone();
            let mut rx = res[best];
            let mut step = 0.25;
            for _ in 0..opts.local_steps {
                for i in 0..x.len() {
                    for dir in [1.0, -1.0] {
                        let mut y = x.clone();
                        y[i] += dir * step * scales[i];
                        let ry = self.residual(&y);
                        if ry > rx && !self.nodes.contains(&y) {
                            x = y;
                            rx = ry;
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            winner = x;
            if !self.nodes.contains(&winner) {
                break;
            }
            if attempt == DUPLICATE_RETRIES {
                while self.nodes.contains(&winner) {
                    for (w, &s) in winner.iter_mut().zip(&scales) {
                        let s = if s > 0.0 { s } else { 1.0 };
                        *w += DUPLICATE_JITTER * s * rng.normal();
                    }
                }
            }
        }
        self.nodes.push(winner)?;
        self.rebuild()
    }
}
