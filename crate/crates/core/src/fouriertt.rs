//! Fourier tensor train for the arithmetic basket call.
//!
//! On `S ∈ [0, Kd]` the payoff has the sine expansion
//!
//! ```text
//! max(0, S − K) = (d−1)/d · S + Σ_{m≥1} c_m sin(mπS/(Kd)),
//! c_m = −(2Kd)/(m²π²) · sin(mπ/d).
//! ```
//!
//! With `S = Σ ωᵢ e^{xᵢ}` each sine is the (2,1) element of a product of 2×2
//! rotation matrices, one per dimension, so under a diagonal Gaussian its
//! integral over the box `{ωᵢ e^{xᵢ} ≤ K}` factorizes into `d` one-dimensional
//! integrals. Outside the box the payoff equals `S − K`, which is separable
//! and integrated in closed form as full space minus box.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gaussmodel::{truncated_lognormal_mean, GaussianSpec};
use crate::numcore::{adaptive_quad, normal_cdf, Matrix, LN_SQRT_2PI};

/// Default absolute tolerance of the 1-D rotation integrals.
pub const DEFAULT_QUAD_TOL: f64 = 1e-13;

/// Truncated sine series of `max(0, S − K)` on `[0, Kd]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierSeriesSpec {
    pub strike: f64,
    pub dim: usize,
    pub n_terms: usize,
}

impl FourierSeriesSpec {
    pub fn new(strike: f64, dim: usize, n_terms: usize) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) || dim == 0 {
            return invalid(format!("need K > 0 and d >= 1, got K={strike}, d={dim}"));
        }
        Ok(Self { strike, dim, n_terms })
    }

    /// `c_m`, exactly zero when `d` divides `m`.
    pub fn coeff(&self, m: usize) -> f64 {
        assert!(m >= 1, "series index starts at 1");
        if m.is_multiple_of(self.dim) {
            return 0.0;
        }
        let d = self.dim as f64;
        let mf = m as f64;
        -(2.0 * self.strike * d) / (mf * mf * std::f64::consts::PI.powi(2))
            * (mf * std::f64::consts::PI / d).sin()
    }

    /// Partial sum with `n_terms` sine terms at basket value `s`.
    pub fn eval(&self, s: f64, n_terms: usize) -> Result<f64> {
        let hi = self.strike * self.dim as f64;
        if !(0.0..=hi).contains(&s) {
            return Err(Error::Domain { value: s, lo: 0.0, hi });
        }
        let d = self.dim as f64;
        let mut acc = Neumaier::default();
        acc.add((d - 1.0) / d * s);
        for m in 1..=n_terms {
            let c = self.coeff(m);
            if c != 0.0 {
                acc.add(c * (m as f64 * std::f64::consts::PI * s / hi).sin());
            }
        }
        Ok(acc.value())
    }

    /// `Σ_{m > n_terms} |c_m|`, bounded by the `1/m²` tail integral.
    pub fn tail_bound(&self, n_terms: usize) -> f64 {
        let d = self.dim as f64;
        2.0 * self.strike * d / std::f64::consts::PI.powi(2) / n_terms.max(1) as f64
    }
}

/// `c_m` of `spec`.
pub fn series_coeff(spec: &FourierSeriesSpec, m: usize) -> f64 {
    spec.coeff(m)
}

/// 2×2 rotation by `theta`; element (1, 0) is `sin θ`.
pub fn rotation(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    Matrix::new(2, 2, vec![c, -s, s, c]).expect("2x2 shape")
}

/// Region `xᵢ ≤ bᵢ = ln(K/ωᵢ)` where the sine series is valid.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    pub uppers: Vec<f64>,
}

impl BoxDomain {
    pub fn new(strike: f64, weights: &[f64]) -> Self {
        Self {
            uppers: weights.iter().map(|w| (strike / w).ln()).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.uppers).all(|(a, b)| a <= b)
    }
}

/// Running sum with Neumaier compensation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Fourier tensor train of the basket call under a diagonal Gaussian.
#[derive(Debug)]
pub struct FourierTtModel {
    series: FourierSeriesSpec,
    weights: Vec<f64>,
    gaussian: GaussianSpec,
    domain: BoxDomain,
    quad_tol: f64,
    matrix_integrals: AtomicU64,
    scalar_quads: AtomicU64,
}

impl FourierTtModel {
    pub fn new(
        series: FourierSeriesSpec,
        weights: Vec<f64>,
        gaussian: GaussianSpec,
        quad_tol: f64,
    ) -> Result<Self> {
        let d = series.dim;
        if weights.len() != d || gaussian.dim() != d {
            return invalid(format!(
                "dimension mismatch: series {d}, weights {}, Gaussian {}",
                weights.len(),
                gaussian.dim()
            ));
        }
        if !weights.iter().all(|&w| w > 0.0 && w.is_finite()) {
            return invalid("basket weights must be positive");
        }
        if !gaussian.is_diagonal() {
            return Err(Error::Unsupported(
                "Fourier-TT integration requires a diagonal covariance".into(),
            ));
        }
        if !(quad_tol > 0.0) {
            return invalid("quad_tol must be positive");
        }
        let domain = BoxDomain::new(series.strike, &weights);
        Ok(Self {
            series,
            weights,
            gaussian,
            domain,
            quad_tol,
            matrix_integrals: AtomicU64::new(0),
            scalar_quads: AtomicU64::new(0),
        })
    }

    pub fn series(&self) -> &FourierSeriesSpec {
        &self.series
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Number of 2×2 rotation integrals computed so far.
    pub fn matrix_integrals(&self) -> u64 {
        self.matrix_integrals.load(Ordering::Relaxed)
    }

    /// Number of scalar adaptive quadratures run so far (two per matrix).
    pub fn scalar_quads(&self) -> u64 {
        self.scalar_quads.load(Ordering::Relaxed)
    }

    fn marginal(&self, i: usize) -> (f64, f64) {
        (self.gaussian.mu()[i], self.gaussian.sigma()[(i, i)])
    }

    /// `Pᵢ = Φ((bᵢ − μᵢ)/√Σᵢᵢ)`, the marginal mass below the box edge.
    pub fn box_mass(&self, i: usize) -> f64 {
        let (mu, var) = self.marginal(i);
        normal_cdf((self.domain.uppers[i] - mu) / var.sqrt())
    }

    /// `∫_{−∞}^{bᵢ} N(x; μᵢ, Σᵢᵢ)·R[mπωᵢeˣ/(Kd)] dx`.
    ///
    /// The matrix is `[[C, −S], [S, C]]`, so two scalar quadratures suffice.
    pub fn term_matrix(&self, i: usize, m: usize) -> Result<Matrix> {
        let (mu, var) = self.marginal(i);
        let sd = var.sqrt();
        let b = self.domain.uppers[i];
        let k = m as f64 * std::f64::consts::PI * self.weights[i]
            / (self.series.strike * self.series.dim as f64);
        let lognorm = -0.5 * var.ln() - LN_SQRT_2PI;
        let pdf = move |x: f64| {
            let z = (x - mu) / sd;
            (lognorm - 0.5 * z * z).exp()
        };
        let c = adaptive_quad(|x| pdf(x) * (k * x.exp()).cos(), f64::NEG_INFINITY, b, self.quad_tol)?;
        let s = adaptive_quad(|x| pdf(x) * (k * x.exp()).sin(), f64::NEG_INFINITY, b, self.quad_tol)?;
        self.matrix_integrals.fetch_add(1, Ordering::Relaxed);
        self.scalar_quads.fetch_add(2, Ordering::Relaxed);
        Ok(Matrix::new(2, 2, vec![c, -s, s, c]).expect("2x2 shape"))
    }

    /// `∫_B ∏ N(xᵢ) · sin(mπS/(Kd)) dx`, the (2,1) element of the product of
    /// all term matrices.
    pub fn sine_integral(&self, m: usize) -> Result<f64> {
        let mut prod = self.term_matrix(0, m)?;
        for i in 1..self.series.dim {
            prod = prod.matmul(&self.term_matrix(i, m)?);
        }
        Ok(prod[(1, 0)])
    }

    /// `∫_B G·S` and `∫_B G` (undiscounted).
    fn box_moments(&self) -> (f64, f64) {
        let d = self.series.dim;
        let p: Vec<f64> = (0..d).map(|i| self.box_mass(i)).collect();
        // Prefix/suffix products avoid dividing by tiny masses.
        let mut prefix = vec![1.0; d + 1];
        for i in 0..d {
            prefix[i + 1] = prefix[i] * p[i];
        }
        let mut suffix = vec![1.0; d + 1];
        for i in (0..d).rev() {
            suffix[i] = suffix[i + 1] * p[i];
        }
        let mut gs = Neumaier::default();
        for i in 0..d {
            let (mu, var) = self.marginal(i);
            let e = self.weights[i] * truncated_lognormal_mean(mu, var, self.domain.uppers[i]);
            gs.add(prefix[i] * suffix[i + 1] * e);
        }
        (gs.value(), prefix[d])
    }

    /// Linear part inside the box plus the payoff outside it, undiscounted.
    fn separable_part(&self) -> f64 {
        let d = self.series.dim;
        let k = self.series.strike;
        let (gs, g) = self.box_moments();
        let mut full = Neumaier::default();
        for i in 0..d {
            let (mu, var) = self.marginal(i);
            full.add(self.weights[i] * (mu + 0.5 * var).exp());
        }
        full.add(-k);
        let mut acc = Neumaier::default();
        acc.add((d as f64 - 1.0) / d as f64 * gs);
        acc.add(full.value());
        acc.add(-gs);
        acc.add(k * g);
        acc.value()
    }

    /// Estimates after `0, 1, …, max_terms` sine terms, discounted. Terms
    /// are evaluated in parallel and accumulated in increasing `m`.
    pub fn partial_sums(&self, max_terms: usize) -> Result<Vec<f64>> {
        let disc = self.gaussian.log_discount().exp();
        let terms = self.terms(1, max_terms)?;
        let mut acc = Neumaier::default();
        acc.add(self.separable_part());
        let mut out = Vec::with_capacity(max_terms + 1);
        out.push(disc * acc.value());
        for t in terms {
            acc.add(t);
            out.push(disc * acc.value());
        }
        Ok(out)
    }

    /// `c_m·J_m` for `m` in `first..=last`, evaluated in parallel.
    fn terms(&self, first: usize, last: usize) -> Result<Vec<f64>> {
        (first..=last)
            .into_par_iter()
            .map(|m| {
                let c = self.series.coeff(m);
                if c == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(c * self.sine_integral(m)?)
                }
            })
            .collect()
    }

    /// Calls `visit(n, estimate)` for each count in `counts` (strictly
    /// increasing), computing only the terms not yet summed. Stops early
    /// when `visit` returns `false`. Same values as [`Self::partial_sums`].
    pub fn sums_at(&self, counts: &[usize], mut visit: impl FnMut(usize, f64) -> bool) -> Result<()> {
        if counts.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("term counts must be strictly increasing");
        }
        let disc = self.gaussian.log_discount().exp();
        let mut acc = Neumaier::default();
        acc.add(self.separable_part());
        let mut done = 0;
        for &n in counts {
            for t in self.terms(done + 1, n)? {
                acc.add(t);
            }
            done = n;
            if !visit(n, disc * acc.value()) {
                break;
            }
        }
        Ok(())
    }

    /// Estimate with `series.n_terms` sine terms.
    pub fn integrate(&self) -> Result<f64> {
        Ok(*self
            .partial_sums(self.series.n_terms)?
            .last()
            .expect("at least the separable part"))
    }
}
