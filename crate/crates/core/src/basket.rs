//! European call on a weighted basket of lognormal assets.
//!
//! The present value is `∫ G(x)·max(0, Σ ωᵢ e^{xᵢ} − K) dx` with `G` the
//! discounted Gaussian density of log prices at the payoff time.

use crate::error::{invalid, Error, Result};
use crate::fouriertt::{FourierSeriesSpec, FourierTtModel, DEFAULT_QUAD_TOL};
use crate::gaussmodel::{Conditioner, GaussianSpec};
use crate::numcore::{normal_cdf, normal_quantile};
use crate::ttcross::{NodeSet, TargetFunction};

/// Basket option problem.
#[derive(Clone, Debug)]
pub struct BasketConfig {
    pub weights: Vec<f64>,
    pub strike: f64,
    pub gaussian: GaussianSpec,
    /// Payoff time; the Gaussian horizon equals it.
    pub t_star: f64,
}

impl BasketConfig {
    pub fn new(weights: Vec<f64>, strike: f64, gaussian: GaussianSpec, t_star: f64) -> Result<Self> {
        if weights.len() != gaussian.dim() {
            return invalid(format!(
                "{} weights for a {}-dimensional Gaussian",
                weights.len(),
                gaussian.dim()
            ));
        }
        if !weights.iter().all(|&w| w > 0.0 && w.is_finite()) {
            return invalid("basket weights must be positive and finite");
        }
        if !(strike > 0.0 && strike.is_finite()) {
            return invalid(format!("strike must be positive, got {strike}"));
        }
        if !(t_star > 0.0 && t_star.is_finite()) {
            return invalid(format!("payoff time must be positive, got {t_star}"));
        }
        Ok(Self {
            weights,
            strike,
            gaussian,
            t_star,
        })
    }

    /// Default test problem: `ωᵢ = 1/d`, `K = 1`, `μᵢ = −0.5`,
    /// `Σᵢⱼ = ρ + (1−ρ)δᵢⱼ`, zero rate, unit payoff time.
    pub fn standard(dim: usize, rho: f64) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        let g = GaussianSpec::equicorrelated(dim, -0.5, rho)
            .map_err(|e| Error::Config(format!("covariance with rho={rho} is infeasible: {e}")))?;
        Self::new(vec![1.0 / dim as f64; dim], 1.0, g, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `Σ ωᵢ e^{xᵢ}`.
    pub fn basket_value(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v.exp()).sum()
    }

    pub fn payoff(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return invalid(format!("point has length {}, expected {}", x.len(), self.dim()));
        }
        Ok((self.basket_value(x) - self.strike).max(0.0))
    }

    /// Discounted density times payoff.
    pub fn integrand(&self, x: &[f64]) -> Result<f64> {
        let p = self.payoff(x)?;
        if p == 0.0 {
            return Ok(0.0);
        }
        let g = self.gaussian.density(x)?;
        // Far tails: the density underflows before the payoff overflows.
        if g == 0.0 {
            return Ok(0.0);
        }
        Ok(g * p)
    }
}

/// Arguments of [`call_kernel_1d`]: the payoff `max(0, a·eˣ + b)` against
/// `N(x; mean, variance)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Call1DKernelArgs {
    pub scale: f64,
    pub offset: f64,
    pub mean: f64,
    pub variance: f64,
}

/// `∫ N(x; mean, variance)·max(0, a·eˣ + b) dx` in closed form.
pub fn call_kernel_1d(args: Call1DKernelArgs) -> f64 {
    let Call1DKernelArgs {
        scale: a,
        offset: b,
        mean,
        variance,
    } = args;
    let fwd = a * (mean + 0.5 * variance).exp();
    if b >= 0.0 {
        return fwd + b;
    }
    let sd = variance.sqrt();
    let x_star = (-b / a).ln();
    fwd * normal_cdf((mean + variance - x_star) / sd) + b * normal_cdf((mean - x_star) / sd)
}

/// Single-asset Black–Scholes value.
pub fn exact_d1(cfg: &BasketConfig) -> Result<f64> {
    if cfg.dim() != 1 {
        return invalid(format!("closed form needs d = 1, got d = {}", cfg.dim()));
    }
    let g = &cfg.gaussian;
    Ok(g.log_discount().exp()
        * call_kernel_1d(Call1DKernelArgs {
            scale: cfg.weights[0],
            offset: -cfg.strike,
            mean: g.mu()[0],
            variance: g.sigma()[(0, 0)],
        }))
}

/// Default cap on the sine terms used by [`reference_value`].
pub const DEFAULT_REFERENCE_TERMS: usize = 4096;
/// Convergence threshold between consecutive truncations.
pub const REFERENCE_TOL: f64 = 1e-13;

/// Fourier-TT value at a truncation where doubling the term count changes
/// the estimate by less than [`REFERENCE_TOL`]. Starts at 64 terms and
/// doubles up to `n_terms_max`.
pub fn reference_value(cfg: &BasketConfig, n_terms_max: usize) -> Result<f64> {
    reference_value_with(cfg, n_terms_max, DEFAULT_QUAD_TOL).map(|(v, _)| v)
}

/// As [`reference_value`]; also returns the term count used.
pub fn reference_value_with(
    cfg: &BasketConfig,
    n_terms_max: usize,
    quad_tol: f64,
) -> Result<(f64, usize)> {
    if !cfg.gaussian.is_diagonal() {
        return Err(Error::Unsupported(
            "the reference value needs a diagonal covariance".into(),
        ));
    }
    let d = cfg.dim();
    let mut n = 64.min(n_terms_max.max(2));
    loop {
        let hi = (2 * n).min(n_terms_max.max(2));
        let model = FourierTtModel::new(
            FourierSeriesSpec::new(cfg.strike, d, hi)?,
            cfg.weights.clone(),
            cfg.gaussian.clone(),
            quad_tol,
        )?;
        let sums = model.partial_sums(hi)?;
        let lo_val = sums[hi / 2];
        let hi_val = sums[hi];
        let diff = (hi_val - lo_val).abs();
        if diff < REFERENCE_TOL {
            return Ok((hi_val, hi));
        }
        if hi >= n_terms_max {
            return Err(Error::AccuracyNotReached {
                estimate: hi_val,
                abs_error: diff,
            });
        }
        n = hi;
    }
}

/// The basket integrand as a TT-X target with closed-form 1-D integrals.
pub struct BasketTarget {
    cfg: BasketConfig,
    conditioners: Vec<Conditioner>,
}

impl BasketTarget {
    pub fn new(cfg: BasketConfig) -> Result<Self> {
        let conditioners = (0..cfg.dim())
            .map(|a| cfg.gaussian.conditioner(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cfg, conditioners })
    }

    pub fn config(&self) -> &BasketConfig {
        &self.cfg
    }
}

const STACK: usize = 64;

impl TargetFunction for BasketTarget {
    fn dim(&self) -> usize {
        self.cfg.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.cfg.integrand(x).unwrap_or(f64::NAN)
    }

    /// `exp(log_weight)·call_kernel_1d` with the conditional law of `x_a`
    /// and `b = Σ_{i≠a} ωᵢ e^{pᵢ} − K` over the pinned point `p`.
    fn integrate_1d(&self, a: usize, left: &[f64], right: &[f64]) -> Option<f64> {
        let d = self.dim();
        let mut buf = [0.0; STACK];
        let mut heap;
        let p: &mut [f64] = if d <= STACK {
            &mut buf[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        p[..a].copy_from_slice(&left[..a]);
        p[a + 1..].copy_from_slice(&right[a + 1..]);
        let w = &self.cfg.weights;
        let mut offset = -self.cfg.strike;
        for i in (0..d).filter(|&i| i != a) {
            offset += w[i] * p[i].exp();
        }
        let c = self.conditioners[a].condition(p);
        let k = call_kernel_1d(Call1DKernelArgs {
            scale: w[a],
            offset,
            mean: c.mean,
            variance: c.variance,
        });
        Some(c.log_weight.exp() * k)
    }
}

/// Parameters of the strike-hugging node family used for basket TT-X.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinkDesign {
    /// Spread of the tilt parameter; larger values reach more lopsided splits.
    pub tilt: f64,
    /// Multiplier of the local spacing that lifts nodes above the strike.
    pub offset: f64,
}

impl Default for KinkDesign {
    fn default() -> Self {
        Self {
            tilt: 6.0,
            offset: 1.0,
        }
    }
}

/// `n` nodes placed along the exercise boundary `S = K`.
///
/// Node `k` takes `t = (k + ½)/n`, a tilt `β = tilt·Φ⁻¹(t)` and shares
/// `pᵢ ∝ exp(β·(i − (d−1)/2)/d)`, then sets `ωᵢ e^{s_{k,i}} = λ_k K pᵢ`. Every
/// node sits at basket value `λ_k K`. The partial sums `P_a = Σ_{i≤a} pᵢ`
/// sweep the possible left/right splits of the strike across each
/// connection; `λ_k = 1 + offset·(local spacing of P)` keeps every
/// connection-matrix diagonal strictly in the money. For `d = 1` the nodes
/// are the Gaussian quantiles `μ + σΦ⁻¹(t)`.
pub fn kink_nodes(cfg: &BasketConfig, n: usize, design: KinkDesign) -> Result<NodeSet> {
    if n == 0 {
        return invalid("node count must be positive");
    }
    let d = cfg.dim();
    let t: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
    if d == 1 {
        let mu = cfg.gaussian.mu()[0];
        let sd = cfg.gaussian.sigma()[(0, 0)].sqrt();
        return NodeSet::from_nodes(1, t.iter().map(|&tk| vec![mu + sd * normal_quantile(tk)]).collect());
    }
    let centre = (d as f64 - 1.0) / 2.0;
    let shares: Vec<Vec<f64>> = t
        .iter()
        .map(|&tk| {
            let beta = design.tilt * normal_quantile(tk);
            let raw: Vec<f64> = (0..d)
                .map(|i| (beta * (i as f64 - centre) / d as f64).exp())
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let cuts: Vec<Vec<f64>> = shares
        .iter()
        .map(|p| {
            p[..d - 1]
                .iter()
                .scan(0.0, |acc, v| {
                    *acc += v;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let gap: Vec<f64> = (0..n.saturating_sub(1))
        .map(|k| {
            cuts[k]
                .iter()
                .zip(&cuts[k + 1])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let local = |k: usize| -> f64 {
        if gap.is_empty() {
            return 0.0;
        }
        let before = gap[k.saturating_sub(1).min(gap.len() - 1)];
        let after = gap[k.min(gap.len() - 1)];
        before.max(after)
    };
    let nodes = (0..n)
        .map(|k| {
            let lambda = 1.0 + design.offset * local(k);
            shares[k]
                .iter()
                .zip(&cfg.weights)
                .map(|(p, w)| (lambda * cfg.strike * p / w).ln())
                .collect()
        })
        .collect();
    NodeSet::from_nodes(d, nodes)
}
