use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::basket::{BasketConfig, DEFAULT_REFERENCE_TERMS};
use crate::error::{Error, Result};
use crate::fouriertt::DEFAULT_QUAD_TOL;
use crate::gaussmodel::GaussianSpec;
use crate::numcore::{Matrix, DEFAULT_PINV_TOL};

/// Which sweep to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    GaussTtx,
    BasketTtx,
    BasketFourier,
    BasketMc,
    /// Fourier, TT-X (with Aitken) and Monte Carlo sweeps in one report.
    Report,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        Self::GaussTtx,
        Self::BasketTtx,
        Self::BasketFourier,
        Self::BasketMc,
        Self::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GaussTtx => "gauss-ttx",
            Self::BasketTtx => "basket-ttx",
            Self::BasketFourier => "basket-fourier",
            Self::BasketMc => "basket-mc",
            Self::Report => "report",
        }
    }

    /// Sweep used when the config file has no `sweep` key.
    pub fn default_sweep(self) -> Vec<u64> {
        match self {
            Self::GaussTtx => vec![1, 3, 5, 7, 9, 11, 15, 21],
            Self::BasketTtx => (2..=10).map(|p| 1u64 << p).collect(),
            Self::BasketFourier => (1..=50).map(|k| 10 * k).collect(),
            Self::BasketMc => (2..=8).map(|p| 10u64.pow(p)).collect(),
            Self::Report => Vec::new(),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.as_str()).collect();
                Error::Config(format!("unknown experiment {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Everything a sweep needs. Built from defaults, a `key = value` file and
/// command-line overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dim: usize,
    /// Equicorrelation of the log prices.
    pub rho: f64,
    pub strike: f64,
    pub rate: f64,
    /// One value (broadcast) or one per dimension.
    pub mu: Vec<f64>,
    /// `None` means equal weights `1/d`.
    pub weights: Option<Vec<f64>>,
    /// Node counts, term counts or sample counts, depending on the experiment.
    pub sweep: Vec<u64>,
    pub seed: u64,
    pub pool: usize,
    pub local_steps: usize,
    pub quad_tol: f64,
    pub pinv_tol: f64,
    /// Term cap for the Fourier reference value.
    pub n_terms_max: usize,
    pub out_path: Option<PathBuf>,
    pub budget_seconds: f64,
    /// Dimension order of the Gaussian TT-X: `order[i]` is the original
    /// coordinate placed at position `i` of the chain.
    pub order: Option<Vec<usize>>,
    /// Coordinates of the Gaussian TT-X.
    pub coords: Coords,
}

/// Coordinate system in which a TT-X is built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Coords {
    #[default]
    Identity,
    /// `y = L⁻¹(x − μ)` with `L` the Cholesky factor of the covariance.
    Whitened,
}

impl FromStr for Coords {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "whitened" => Ok(Self::Whitened),
            _ => Err(Error::Config(format!("coords must be identity or whitened, got {s:?}"))),
        }
    }
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_BUDGET_SECONDS: f64 = 600.0;

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            dim: 10,
            rho: 0.0,
            strike: 1.0,
            rate: 0.0,
            mu: vec![-0.5],
            weights: None,
            sweep: experiment.default_sweep(),
            seed: DEFAULT_SEED,
            pool: 256,
            local_steps: 0,
            quad_tol: DEFAULT_QUAD_TOL,
            pinv_tol: DEFAULT_PINV_TOL,
            n_terms_max: DEFAULT_REFERENCE_TERMS,
            out_path: None,
            budget_seconds: DEFAULT_BUDGET_SECONDS,
            order: None,
            coords: Coords::Identity,
        }
    }

    /// Defaults overridden by the `key = value` lines of `text`. Blank lines
    /// and `#` comments are ignored; unknown or repeated keys are errors.
    pub fn parse(experiment: ExperimentKind, text: &str) -> Result<Self> {
        let mut cfg = Self::defaults(experiment);
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(lineno, format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key.to_string()) {
                return Err(cfg_err(lineno, format!("duplicate key {key:?}")));
            }
            seen.push(key.to_string());
            let at = |e: Error| cfg_err(lineno, format!("{key}: {e}"));
            match key {
                "dim" => cfg.dim = scalar(value).map_err(at)?,
                "rho" => cfg.rho = scalar(value).map_err(at)?,
                "strike" => cfg.strike = scalar(value).map_err(at)?,
                "rate" => cfg.rate = scalar(value).map_err(at)?,
                "mu" => cfg.mu = list(value).map_err(at)?,
                "weights" => cfg.weights = Some(list(value).map_err(at)?),
                "sweep" => {
                    if experiment == ExperimentKind::Report {
                        return Err(cfg_err(lineno, "the report runs each sweep at its default".into()));
                    }
                    cfg.sweep = list(value).map_err(at)?;
                }
                "pool" => cfg.pool = scalar(value).map_err(at)?,
                "local_steps" => cfg.local_steps = scalar(value).map_err(at)?,
                "quad_tol" => cfg.quad_tol = scalar(value).map_err(at)?,
                "pinv_tol" => cfg.pinv_tol = scalar(value).map_err(at)?,
                "n_terms_max" => cfg.n_terms_max = scalar(value).map_err(at)?,
                "order" => cfg.order = Some(list(value).map_err(at)?),
                "coords" => cfg.coords = value.parse().map_err(at)?,
                _ => return Err(cfg_err(lineno, format!("unknown key {key:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(experiment: ExperimentKind, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(experiment, &text)
    }

    /// Copy for one of the sweeps run by the report.
    pub fn for_experiment(&self, experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            sweep: experiment.default_sweep(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if !(self.mu.len() == 1 || self.mu.len() == self.dim) {
            return bad(format!("mu has {} values, expected 1 or {}", self.mu.len(), self.dim));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.dim {
                return bad(format!("weights has {} values, expected {}", w.len(), self.dim));
            }
        }
        if self.experiment != ExperimentKind::Report {
            if self.sweep.is_empty() {
                return bad("sweep is empty".into());
            }
            if self.sweep.windows(2).any(|w| w[1] <= w[0]) {
                return bad("sweep must be strictly increasing".into());
            }
        }
        if self.experiment == ExperimentKind::BasketMc && self.sweep[0] < 2 {
            return bad("Monte Carlo needs at least 2 samples per point".into());
        }
        if matches!(self.experiment, ExperimentKind::GaussTtx | ExperimentKind::BasketTtx)
            && self.sweep[0] == 0
        {
            return bad("node counts must be positive".into());
        }
        if let Some(order) = &self.order {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..self.dim).collect::<Vec<_>>() {
                return bad(format!("order {order:?} is not a permutation of 0..{}", self.dim));
            }
        }
        let reorders = self.order.is_some() || self.coords != Coords::Identity;
        if reorders && self.experiment != ExperimentKind::GaussTtx {
            return bad("order and coords apply to gauss-ttx only".into());
        }
        if !(self.budget_seconds > 0.0) {
            return bad(format!("budget_seconds must be positive, got {}", self.budget_seconds));
        }
        if self.pool == 0 {
            return bad("pool must be positive".into());
        }
        if !(self.quad_tol > 0.0) {
            return bad("quad_tol must be positive".into());
        }
        if !(self.pinv_tol > 0.0 && self.pinv_tol < 1.0) {
            return bad("pinv_tol must lie in (0, 1)".into());
        }
        if self.n_terms_max < 128 {
            return bad("n_terms_max must be at least 128".into());
        }
        Ok(())
    }

    /// Basket problem with `Σᵢⱼ = ρ + (1−ρ)δᵢⱼ` and unit payoff time.
    pub fn basket(&self) -> Result<BasketConfig> {
        let d = self.dim;
        let mu = if self.mu.len() == 1 {
            vec![self.mu[0]; d]
        } else {
            self.mu.clone()
        };
        let sigma = Matrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { self.rho });
        let gaussian = GaussianSpec::new(mu, sigma, self.rate, 1.0).map_err(|e| {
            Error::Config(format!("covariance with rho={} is infeasible: {e}", self.rho))
        })?;
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0 / d as f64; d]);
        BasketConfig::new(weights, self.strike, gaussian, 1.0).map_err(|e| Error::Config(e.to_string()))
    }
}

fn cfg_err(lineno: usize, msg: String) -> Error {
    Error::Config(format!("line {}: {msg}", lineno + 1))
}

fn scalar<T: FromStr>(s: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| Error::Config(format!("cannot parse {s:?}: {e}")))
}

fn list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let out = s
        .split(',')
        .map(|v| scalar(v.trim()))
        .collect::<Result<Vec<T>>>()?;
    if out.is_empty() {
        return Err(Error::Config("empty list".into()));
    }
    Ok(out)
}
