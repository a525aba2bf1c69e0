//! Convergence sweeps behind the command-line harness.
//!
//! Each run returns [`ConvergenceRecord`] rows. Errors of the basket
//! experiments are measured against the Fourier-TT reference value, except
//! the Fourier sweep itself, which uses its own highest truncation.

mod config;
mod report;

use std::time::Instant;

pub use config::{Coords, ExperimentConfig, ExperimentKind, DEFAULT_BUDGET_SECONDS, DEFAULT_SEED};
pub use report::{
    by_method, emit_report, fit_log_linear, fit_slope, from_csv, methods, table_path,
    threshold_table, time_to_threshold, to_csv, ConvergenceRecord, LinearFit, XField, CSV_HEADER,
    NOT_REACHED, THRESHOLDS,
};

use crate::accel::{aitken, DEFAULT_GUARD};
use crate::basket::{kink_nodes, reference_value_with, BasketConfig, BasketTarget, KinkDesign};
use crate::error::Result;
use crate::fouriertt::{FourierSeriesSpec, FourierTtModel};
use crate::gaussmodel::GaussianSpec;
use crate::montecarlo;
use crate::numcore::{Matrix, QuadratureRule, Rng};
use crate::ttcross::{
    Counted, GaussianDensity, GreedyOptions, NodeSet, PinvMode, Permuted, Proposal,
    TargetFunction, TtxModel, Whitened,
};

/// Method labels used in the CSV.
pub mod method {
    pub const GAUSS_TTX: &str = "gauss-ttx";
    pub const BASKET_TTX: &str = "basket-ttx";
    pub const BASKET_TTX_AITKEN: &str = "basket-ttx+aitken";
    pub const BASKET_FOURIER: &str = "basket-fourier";
    pub const BASKET_MC: &str = "basket-mc";
    /// Rows whose estimate is the payoff standard deviation and whose error
    /// is the standard error.
    pub const BASKET_MC_STDERR: &str = "basket-mc-stderr";
}

/// Fixed-seed samples behind every Gaussian TT-X RMS error.
pub const RMS_SAMPLES: usize = 100_000;

/// Rows of one run plus what the caller should report alongside them.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub records: Vec<ConvergenceRecord>,
    /// Set when the time budget cut a sweep short.
    pub truncated: bool,
    /// Lines for the report footer and stderr.
    pub notes: Vec<String>,
}

impl RunOutput {
    fn absorb(&mut self, other: RunOutput) {
        self.records.extend(other.records);
        self.truncated |= other.truncated;
        self.notes.extend(other.notes);
    }
}

/// Wall-clock budget of one sweep. A point is skipped when its predicted
/// cost would overrun what is left.
struct Budget {
    start: Instant,
    seconds: f64,
}

impl Budget {
    fn new(seconds: f64) -> Self {
        Self {
            start: Instant::now(),
            seconds,
        }
    }

    /// Predicts the next point from the last one assuming cost ∝ nᵖ.
    fn admits(&self, last: Option<(u64, f64)>, next: u64, power: i32) -> bool {
        let predicted = match last {
            Some((n, t)) if n > 0 => t * (next as f64 / n as f64).powi(power),
            _ => 0.0,
        };
        self.start.elapsed().as_secs_f64() + predicted <= self.seconds
    }
}

fn truncation_note(kind: &str, done: usize, total: usize, budget: f64) -> String {
    format!("warning: {kind} sweep stopped after {done} of {total} points (budget {budget} s)")
}

/// Runs the configured experiment. `accelerate` adds Aitken rows to TT-X
/// basket sweeps.
pub fn run(cfg: &ExperimentConfig, accelerate: bool) -> Result<RunOutput> {
    match cfg.experiment {
        ExperimentKind::GaussTtx => run_gauss_ttx(cfg),
        ExperimentKind::BasketTtx => run_basket_ttx(cfg, accelerate),
        ExperimentKind::BasketFourier => run_basket_fourier(cfg),
        ExperimentKind::BasketMc => run_basket_mc(cfg),
        ExperimentKind::Report => {
            let mut out = RunOutput::default();
            out.absorb(run_basket_fourier(&cfg.for_experiment(ExperimentKind::BasketFourier))?);
            out.absorb(run_basket_ttx(&cfg.for_experiment(ExperimentKind::BasketTtx), true)?);
            out.absorb(run_basket_mc(&cfg.for_experiment(ExperimentKind::BasketMc))?);
            Ok(out)
        }
    }
}

/// The Gaussian density in the configured coordinates: the target, the
/// law of the coordinates (candidates and RMS samples are drawn from it)
/// and the factor by which the transform scales function values.
fn gauss_problem(cfg: &ExperimentConfig) -> Result<(Box<dyn TargetFunction>, GaussianSpec, f64)> {
    let spec = cfg.basket()?.gaussian;
    let d = spec.dim();
    let density = GaussianDensity::new(spec.clone())?;
    let (mut target, mut law, scale): (Box<dyn TargetFunction>, GaussianSpec, f64) = match cfg.coords {
        Coords::Identity => (Box::new(density), spec, 1.0),
        Coords::Whitened => {
            let w = Whitened::new(density, &spec)?;
            let jac = w.eval(&vec![0.0; d]) / spec.density(spec.mu())?;
            (Box::new(w), GaussianSpec::standard(d)?, jac)
        }
    };
    if let Some(order) = &cfg.order {
        let mu: Vec<f64> = order.iter().map(|&o| law.mu()[o]).collect();
        let sigma = Matrix::from_fn(d, d, |i, j| law.sigma()[(order[i], order[j])]);
        law = GaussianSpec::new(mu, sigma, law.rate(), law.horizon())?;
        target = Box::new(Permuted::new(target, order.clone())?);
    }
    Ok((target, law, scale))
}

/// Greedy TT-X of the correlated Gaussian density, grown through the
/// sweep's node counts. The error is the RMS residual, in the units of the
/// original density, over [`RMS_SAMPLES`] draws from the density; the
/// estimate is the integral of the interpolant, which should be close to 1.
pub fn run_gauss_ttx(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (inner, law, scale) = gauss_problem(cfg)?;
    let target = Counted::new(inner);
    let mut model =
        TtxModel::with_options(&target, NodeSet::new(cfg.dim)?, cfg.pinv_tol, PinvMode::Balanced)?;
    let opts = GreedyOptions {
        proposal: Proposal::Gaussian(law.clone()),
        pool: cfg.pool,
        local_steps: cfg.local_steps,
    };
    let root = Rng::new(cfg.seed);
    let mut grow = root.split(0);
    let probe = root.split(1);
    let quad = QuadratureRule::AdaptiveKronrod { tol: cfg.quad_tol };

    let budget = Budget::new(cfg.budget_seconds);
    let mut out = RunOutput::default();
    let mut last = None;
    let mut build_time = 0.0;
    for &n in &cfg.sweep {
        if !budget.admits(last, n, 2) {
            out.truncated = true;
            out.notes.push(truncation_note(method::GAUSS_TTX, out.records.len(), cfg.sweep.len(), cfg.budget_seconds));
            break;
        }
        let t0 = Instant::now();
        while (model.len() as u64) < n {
            model.add_node(&mut grow, &opts)?;
        }
        let evals = target.total();
        let integral = model.integrate(&quad)?;
        build_time += t0.elapsed().as_secs_f64();
        let rms = model.rms_error(&law, &mut probe.clone(), RMS_SAMPLES)? / scale;
        last = Some((n, t0.elapsed().as_secs_f64()));
        out.records.push(ConvergenceRecord {
            method: method::GAUSS_TTX.into(),
            n,
            estimate: integral,
            error: rms,
            runtime_seconds: build_time,
            evals,
        });
    }
    out.notes.push(pinv_note(cfg));
    Ok(out)
}

fn pinv_note(cfg: &ExperimentConfig) -> String {
    format!(
        "TT-X connection matrices are inverted by a pseudo-inverse of the row/column \
         equilibrated matrix with relative singular-value cutoff {:e}.",
        cfg.pinv_tol
    )
}

fn reference(basket: &BasketConfig, cfg: &ExperimentConfig, out: &mut RunOutput) -> Result<f64> {
    let (value, terms) = reference_value_with(basket, cfg.n_terms_max, cfg.quad_tol)?;
    let note = format!("Reference value {value} from Fourier-TT with {terms} sine terms.");
    if !out.notes.contains(&note) {
        out.notes.push(note);
    }
    Ok(value)
}

/// TT-X of the basket integrand on strike-hugging nodes, rebuilt from
/// scratch at every node count. With `accelerate`, Aitken rows follow; the
/// row at sweep point `i + 1` uses raw estimates `i − 1, i, i + 1` and
/// carries their cumulative runtime and evaluation count.
pub fn run_basket_ttx(cfg: &ExperimentConfig, accelerate: bool) -> Result<RunOutput> {
    let basket = cfg.basket()?;
    let mut out = RunOutput::default();
    let psi = reference(&basket, cfg, &mut out)?;
    let target = Counted::new(BasketTarget::new(basket.clone())?);
    let quad = QuadratureRule::AdaptiveKronrod { tol: cfg.quad_tol };

    let budget = Budget::new(cfg.budget_seconds);
    let mut last = None;
    for &n in &cfg.sweep {
        if !budget.admits(last, n, 3) {
            out.truncated = true;
            out.notes.push(truncation_note(method::BASKET_TTX, out.records.len(), cfg.sweep.len(), cfg.budget_seconds));
            break;
        }
        target.reset();
        let t0 = Instant::now();
        let nodes = kink_nodes(&basket, n as usize, KinkDesign::default())?;
        let model = TtxModel::with_options(&target, nodes, cfg.pinv_tol, PinvMode::Balanced)?;
        let estimate = model.integrate(&quad)?;
        let runtime = t0.elapsed().as_secs_f64();
        last = Some((n, runtime));
        out.records.push(ConvergenceRecord {
            method: method::BASKET_TTX.into(),
            n,
            estimate,
            error: (estimate - psi).abs(),
            runtime_seconds: runtime,
            evals: target.total(),
        });
    }
    if accelerate && out.records.len() >= 3 {
        let raw = out.records.clone();
        let seq: Vec<f64> = raw.iter().map(|r| r.estimate).collect();
        let acc = aitken(&seq, DEFAULT_GUARD)?;
        let mut cum_time = 0.0;
        let mut cum_evals = 0;
        let prefix: Vec<(f64, u64)> = raw
            .iter()
            .map(|r| {
                cum_time += r.runtime_seconds;
                cum_evals += r.evals;
                (cum_time, cum_evals)
            })
            .collect();
        for (j, &estimate) in acc.iter().enumerate() {
            let (runtime, evals) = prefix[j + 2];
            out.records.push(ConvergenceRecord {
                method: method::BASKET_TTX_AITKEN.into(),
                n: raw[j + 2].n,
                estimate,
                error: (estimate - psi).abs(),
                runtime_seconds: runtime,
                evals,
            });
        }
    }
    out.notes.push(pinv_note(cfg));
    Ok(out)
}

/// Fourier-TT partial sums at the sweep's term counts, computed
/// incrementally. Runtimes are elapsed time since the model was set up;
/// `evals` counts scalar quadratures.
pub fn run_basket_fourier(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let basket = cfg.basket()?;
    let counts: Vec<usize> = cfg.sweep.iter().map(|&n| n as usize).collect();
    let max = *counts.last().expect("validated non-empty");
    let budget = Budget::new(cfg.budget_seconds);
    let t0 = Instant::now();
    let model = FourierTtModel::new(
        FourierSeriesSpec::new(basket.strike, basket.dim(), max)?,
        basket.weights.clone(),
        basket.gaussian.clone(),
        cfg.quad_tol,
    )?;
    let mut out = RunOutput::default();
    let mut rows: Vec<(u64, f64, f64, u64)> = Vec::new();
    let mut prev: Option<(u64, f64)> = None;
    model.sums_at(&counts, |n, estimate| {
        let elapsed = t0.elapsed().as_secs_f64();
        rows.push((n as u64, estimate, elapsed, model.scalar_quads()));
        // Next block costs about as much per term as this one.
        let block = match prev {
            Some((pn, pt)) => (n as u64 - pn, elapsed - pt),
            None => (n as u64, elapsed),
        };
        prev = Some((n as u64, elapsed));
        match counts.iter().find(|&&c| c > n) {
            Some(&next) => {
                let next_block = (next - n) as u64;
                budget.admits(Some((block.0.max(1), block.1)), next_block, 1)
            }
            None => true,
        }
    })?;
    if rows.len() < counts.len() {
        out.truncated = true;
        out.notes.push(truncation_note(method::BASKET_FOURIER, rows.len(), counts.len(), cfg.budget_seconds));
    }
    let psi = rows.last().map(|r| r.1).unwrap_or(f64::NAN);
    out.notes.push(format!(
        "Fourier-TT errors are measured against its own {}-term value.",
        rows.last().map(|r| r.0).unwrap_or(0)
    ));
    out.records = rows
        .into_iter()
        .map(|(n, estimate, runtime, evals)| ConvergenceRecord {
            method: method::BASKET_FOURIER.into(),
            n,
            estimate,
            error: (estimate - psi).abs(),
            runtime_seconds: runtime,
            evals,
        })
        .collect();
    Ok(out)
}

/// Plain Monte Carlo at each sample count, every point an independent run
/// from the same seed. Emits a `basket-mc` row (error against the
/// reference) and a `basket-mc-stderr` row (estimate = payoff standard
/// deviation, error = standard error) per point.
pub fn run_basket_mc(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let basket = cfg.basket()?;
    let mut out = RunOutput::default();
    let psi = reference(&basket, cfg, &mut out)?;
    let disc = basket.gaussian.log_discount().exp();
    let strike = basket.strike;
    let payoff = |x: &[f64]| disc * (basket.basket_value(x) - strike).max(0.0);

    let budget = Budget::new(cfg.budget_seconds);
    let mut last = None;
    let mut stderr_rows = Vec::new();
    for &n in &cfg.sweep {
        if !budget.admits(last, n, 1) {
            out.truncated = true;
            out.notes.push(truncation_note(method::BASKET_MC, out.records.len(), cfg.sweep.len(), cfg.budget_seconds));
            break;
        }
        let t0 = Instant::now();
        let e = montecarlo::estimate(payoff, &basket.gaussian, n, cfg.seed)?;
        let runtime = t0.elapsed().as_secs_f64();
        last = Some((n, runtime));
        out.records.push(ConvergenceRecord {
            method: method::BASKET_MC.into(),
            n,
            estimate: e.mean,
            error: (e.mean - psi).abs(),
            runtime_seconds: runtime,
            evals: n,
        });
        stderr_rows.push(ConvergenceRecord {
            method: method::BASKET_MC_STDERR.into(),
            n,
            estimate: e.payoff_std,
            error: e.std_error,
            runtime_seconds: runtime,
            evals: n,
        });
    }
    out.records.extend(stderr_rows);
    Ok(out)
}
