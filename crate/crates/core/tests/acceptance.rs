//! Acceptance suite. Runs each criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.
//!
//! The expensive sweeps (basket TT-X to n = 1024, Monte Carlo to 10⁸
//! samples) run once and feed every criterion that reads them.

mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use crossint::basket::{call_kernel_1d, Call1DKernelArgs};
use crossint::experiment::{
    self, by_method, fit_log_linear, fit_slope, method, table_path, time_to_threshold,
    ConvergenceRecord, ExperimentConfig, ExperimentKind, RunOutput, XField, NOT_REACHED,
};
use crossint::Result;

type Verdict = std::result::Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

struct Runs {
    ttx: Result<RunOutput>,
    fourier: Result<RunOutput>,
    mc: Result<RunOutput>,
    gauss: Vec<(f64, Result<RunOutput>)>,
}

fn timed<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    eprintln!("  {label}: {:.1} s", t.elapsed().as_secs_f64());
    out
}

fn defaults(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig::defaults(kind)
}

fn with_sweep(kind: ExperimentKind, dim: usize, sweep: &[u64]) -> ExperimentConfig {
    let mut c = defaults(kind);
    c.dim = dim;
    c.sweep = sweep.to_vec();
    c
}

impl Runs {
    /// Same order as the `report` experiment.
    fn collect() -> Self {
        eprintln!("running shared sweeps");
        let fourier = timed("basket-fourier d=10", || {
            experiment::run_basket_fourier(&defaults(ExperimentKind::BasketFourier))
        });
        let ttx = timed("basket-ttx d=10, n = 4..1024", || {
            experiment::run_basket_ttx(&defaults(ExperimentKind::BasketTtx), true)
        });
        let mc = timed("basket-mc d=10, 1e2..1e8 samples", || {
            experiment::run_basket_mc(&defaults(ExperimentKind::BasketMc))
        });
        let gauss = [0.1, 0.3, 0.5]
            .into_iter()
            .map(|rho| {
                let mut c = with_sweep(ExperimentKind::GaussTtx, 10, &[1, 5, 9]);
                c.rho = rho;
                (rho, timed(&format!("gauss-ttx rho={rho}"), || experiment::run_gauss_ttx(&c)))
            })
            .collect();
        Runs { ttx, fourier, mc, gauss }
    }
}

fn records<'a>(run: &'a Result<RunOutput>, what: &str) -> std::result::Result<&'a [ConvergenceRecord], String> {
    match run {
        Ok(out) if out.truncated => Err(format!("{what} sweep was truncated: {:?}", out.notes)),
        Ok(out) => Ok(&out.records),
        Err(e) => Err(format!("{what} sweep failed: {e}")),
    }
}

fn at<'a>(rs: &'a [ConvergenceRecord], m: &str, n: u64) -> std::result::Result<&'a ConvergenceRecord, String> {
    rs.iter()
        .find(|r| r.method == m && r.n == n)
        .ok_or_else(|| format!("no {m} record at n={n}"))
}

fn require(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn closed_form_d1() -> Verdict {
    let ttx = experiment::run_basket_ttx(&with_sweep(ExperimentKind::BasketTtx, 1, &[8, 16, 32, 64, 128]), false);
    let mut worst_ttx: f64 = 0.0;
    for r in records(&ttx, "d=1 TT-X")? {
        worst_ttx = worst_ttx.max((r.estimate - common::BS_D1).abs());
    }
    require(worst_ttx <= 1e-9, format!("TT-X off by {worst_ttx:e}"))?;

    let mut fc = with_sweep(ExperimentKind::BasketFourier, 1, &[400, 600, 1000]);
    fc.n_terms_max = 4096;
    let fourier = experiment::run_basket_fourier(&fc);
    let mut worst_f: f64 = 0.0;
    for r in records(&fourier, "d=1 Fourier-TT")? {
        worst_f = worst_f.max((r.estimate - common::BS_D1).abs());
    }
    require(worst_f <= 1e-9, format!("Fourier-TT off by {worst_f:e}"))?;

    let k = call_kernel_1d(Call1DKernelArgs {
        scale: 1.0,
        offset: -1.0,
        mean: -0.5,
        variance: 1.0,
    });
    let dk = (k - common::BS_D1).abs();
    require(dk <= 1e-9, format!("call kernel off by {dk:e}"))?;

    let mc = experiment::run_basket_mc(&with_sweep(ExperimentKind::BasketMc, 1, &[10_000_000]));
    let rs = records(&mc, "d=1 MC")?;
    let est = at(rs, method::BASKET_MC, 10_000_000)?.estimate;
    let se = at(rs, method::BASKET_MC_STDERR, 10_000_000)?.error;
    let z = (est - common::BS_D1).abs() / se;
    require(z <= 3.0, format!("MC {est} is {z:.2} std errors from {}", common::BS_D1))?;
    Ok(format!(
        "TT-X max dev {worst_ttx:.1e}, Fourier-TT max dev {worst_f:.1e}, kernel dev {dk:.1e}, MC at {z:.2} SE"
    ))
}

fn mc_coefficient(runs: &Runs) -> Verdict {
    let rs = records(&runs.mc, "MC")?;
    let sd = at(rs, method::BASKET_MC_STDERR, 10_000_000)?.estimate;
    require((sd - 0.3081).abs() <= 0.005, format!("payoff std {sd:.5}, want 0.3081 ± 0.005"))?;
    Ok(format!("payoff std {sd:.5} at 1e7 samples"))
}

fn ttx_quadratic(runs: &Runs) -> Verdict {
    let rs = by_method(records(&runs.ttx, "TT-X")?, method::BASKET_TTX);
    let slope = fit_slope(&rs, XField::N, (16.0, 512.0)).map_err(|e| e.to_string())?;
    let e256 = at(&rs, method::BASKET_TTX, 256)?.error;
    require((-2.5..=-1.5).contains(&slope), format!("slope {slope:.3} outside [-2.5, -1.5]"))?;
    require(
        (1e-6..=1e-4).contains(&e256),
        format!("error at n=256 is {e256:.2e}, not within 10x of 1.0e-5"),
    )?;
    Ok(format!("slope {slope:.3} over n=16..512, error at n=256 {e256:.2e}"))
}

fn aitken_suppression(runs: &Runs) -> Verdict {
    let rs = records(&runs.ttx, "TT-X")?;
    let mut parts = Vec::new();
    for n in [64, 256] {
        let raw = at(rs, method::BASKET_TTX, n)?.error;
        let acc = at(rs, method::BASKET_TTX_AITKEN, n)?.error;
        require(acc <= 0.1 * raw, format!("n={n}: Aitken {acc:.2e} vs raw {raw:.2e}"))?;
        parts.push(format!("n={n}: {acc:.2e} vs {raw:.2e}"));
    }
    Ok(parts.join(", "))
}

fn fourier_exponential(runs: &Runs) -> Verdict {
    let rs = records(&runs.fourier, "Fourier-TT")?;
    let e120 = at(rs, method::BASKET_FOURIER, 120)?.error;
    let e300 = at(rs, method::BASKET_FOURIER, 300)?.error;
    require(e120 <= 1e-6, format!("error {e120:.2e} at 120 terms"))?;
    require(e300 <= 1e-12, format!("error {e300:.2e} at 300 terms"))?;
    let fit = fit_log_linear(rs, XField::N, (50.0, 300.0)).map_err(|e| e.to_string())?;
    require(fit.correlation <= -0.97, format!("log-linear correlation {:.4}", fit.correlation))?;
    Ok(format!(
        "error {e120:.2e} at 120, {e300:.2e} at 300, log-linear correlation {:.4}",
        fit.correlation
    ))
}

fn gauss_ttx(runs: &Runs) -> Verdict {
    let err = |rho: f64, n: u64| -> std::result::Result<f64, String> {
        let run = &runs.gauss.iter().find(|g| g.0 == rho).expect("configured rho").1;
        Ok(at(records(run, "gauss-ttx")?, method::GAUSS_TTX, n)?.error)
    };
    for rho in [0.1, 0.3, 0.5] {
        let (e1, e9) = (err(rho, 1)?, err(rho, 9)?);
        require(e9 * 10.0 <= e1, format!("rho={rho}: error {e1:.2e} at n=1, {e9:.2e} at n=9"))?;
    }
    for n in [5, 9] {
        let (a, b, c) = (err(0.5, n)?, err(0.3, n)?, err(0.1, n)?);
        require(a >= b && b >= c, format!("n={n}: errors {a:.2e}, {b:.2e}, {c:.2e} for rho 0.5, 0.3, 0.1"))?;
    }
    let e5 = err(0.1, 5)?;
    require(e5 <= 1e-4, format!("rho=0.1, n=5 error {e5:.2e}"))?;
    Ok(format!(
        "n=1 -> 9 drops {:.0}x / {:.0}x / {:.0}x for rho 0.1 / 0.3 / 0.5, rho=0.1 n=5 error {e5:.2e}",
        err(0.1, 1)? / err(0.1, 9)?,
        err(0.3, 1)? / err(0.3, 9)?,
        err(0.5, 1)? / err(0.5, 9)?
    ))
}

fn cross_method(runs: &Runs) -> Verdict {
    let ttx = at(records(&runs.ttx, "TT-X")?, method::BASKET_TTX, 1024)?.error;
    require(ttx <= 1e-6, format!("TT-X(1024) error {ttx:.2e}"))?;
    let rs = records(&runs.mc, "MC")?;
    let dev = at(rs, method::BASKET_MC, 10_000_000)?.error;
    let se = at(rs, method::BASKET_MC_STDERR, 10_000_000)?.error;
    require(dev <= 3.0 * se, format!("MC(1e7) off by {dev:.2e} = {:.2} SE", dev / se))?;
    Ok(format!("TT-X(1024) error {ttx:.2e}, MC(1e7) at {:.2} SE", dev / se))
}

fn seeded_suite(count: u64, check: impl Fn(u64) -> common::Check) -> std::result::Result<u64, String> {
    (0..count).try_for_each(&check)?;
    Ok(count)
}

fn interpolation_suite() -> Verdict {
    let n = seeded_suite(50, common::interpolation_instance)?;
    Ok(format!("{n}/{n} random instances"))
}

fn numerics_suite() -> Verdict {
    let p = seeded_suite(50, common::penrose_instance)?;
    let c = seeded_suite(50, common::cholesky_instance)?;
    let g = seeded_suite(10, common::gauss_hermite_instance)?;
    common::call_kernel_instance(2024, 200)?;
    let k = seeded_suite(50, common::conditional_instance)?;
    Ok(format!(
        "Penrose {p}, Cholesky {c}, Gauss-Hermite {g}x24 orders, kernel 200 draws, conditional {k}"
    ))
}

fn strip_runtime(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(4);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn cli_run(dir: &Path, experiment: &str, config: &str, tag: &str, threads: &str) -> std::result::Result<String, String> {
    let conf = dir.join(format!("{experiment}.conf"));
    std::fs::write(&conf, config).map_err(|e| e.to_string())?;
    let out = dir.join(format!("{experiment}-{tag}.csv"));
    let status = Command::new(env!("CARGO_BIN_EXE_crossint"))
        .args([experiment, "--config"])
        .arg(&conf)
        .args(["--seed", "7", "--threads", threads, "--out"])
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    require(
        status.status.success(),
        format!("{experiment} exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr)),
    )?;
    std::fs::read_to_string(&out).map_err(|e| e.to_string())
}

fn cost_and_determinism(runs: &Runs) -> Verdict {
    let rs = by_method(records(&runs.ttx, "TT-X")?, method::BASKET_TTX);
    let mut ratios = Vec::new();
    for w in rs.windows(2) {
        require(w[1].n == 2 * w[0].n, format!("sweep is not a doubling at n={}", w[0].n))?;
        let r = w[1].evals as f64 / w[0].evals as f64;
        require((r - 4.0).abs() <= 0.8, format!("evals ratio {r:.3} from n={} to n={}", w[0].n, w[1].n))?;
        ratios.push(r);
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cases = [
        ("basket-ttx", "dim = 3\nsweep = 4, 8, 16\n"),
        ("basket-fourier", "dim = 3\nsweep = 10, 20, 40\n"),
        ("basket-mc", "dim = 3\nsweep = 1000, 200000\n"),
        ("gauss-ttx", "dim = 3\nrho = 0.3\nsweep = 1, 2, 3\n"),
    ];
    for (exp, conf) in cases {
        let a = cli_run(dir.path(), exp, conf, "a", "1")?;
        let b = cli_run(dir.path(), exp, conf, "b", "2")?;
        require(strip_runtime(&a) == strip_runtime(&b), format!("{exp} CSV differs between runs"))?;
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    Ok(format!(
        "evals ratio per doubling in [{lo:.3}, {hi:.3}], 4 experiments byte-identical across runs"
    ))
}

fn report_ordering(runs: &Runs) -> Verdict {
    let mut all = Vec::new();
    for (run, what) in [(&runs.fourier, "Fourier-TT"), (&runs.ttx, "TT-X"), (&runs.mc, "MC")] {
        all.extend_from_slice(records(run, what)?);
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("report.csv");
    experiment::emit_report(&all, &csv, &[]).map_err(|e| e.to_string())?;
    let table = std::fs::read_to_string(table_path(&csv)).map_err(|e| e.to_string())?;

    let eps = 1e-6;
    let time = |m: &str| {
        time_to_threshold(&all, m, eps)
            .map(|r| r.runtime_seconds)
            .ok_or_else(|| format!("{m} never reaches {eps:e}"))
    };
    let f = time(method::BASKET_FOURIER)?;
    let a = time(method::BASKET_TTX_AITKEN)?;
    let t = time(method::BASKET_TTX)?;
    require(f <= a && a <= t, format!("times {f:.3} / {a:.3} / {t:.3} s out of order"))?;
    require(
        time_to_threshold(&all, method::BASKET_MC, eps).is_none(),
        "Monte Carlo reached 1e-6",
    )?;
    let mc_row = table
        .lines()
        .find(|l| l.split_whitespace().next() == Some(method::BASKET_MC))
        .ok_or("no basket-mc row in the table")?;
    let cells: Vec<&str> = mc_row.split("  ").map(str::trim).filter(|c| !c.is_empty()).collect();
    require(cells.get(2) == Some(&NOT_REACHED), format!("table row {mc_row:?}"))?;
    Ok(format!(
        "time to 1e-6: Fourier-TT {f:.3} s <= TT-X+Aitken {a:.3} s <= TT-X {t:.3} s; MC not reached"
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = Runs::collect();
    let criteria: [Criterion<'_>; 11] = [
        ("closed-form oracle, d=1", Box::new(closed_form_d1)),
        ("Monte Carlo coefficient", Box::new(|| mc_coefficient(&runs))),
        ("TT-X quadratic convergence", Box::new(|| ttx_quadratic(&runs))),
        ("Aitken suppression", Box::new(|| aitken_suppression(&runs))),
        ("Fourier-TT exponential convergence", Box::new(|| fourier_exponential(&runs))),
        ("Gaussian TT-X", Box::new(|| gauss_ttx(&runs))),
        ("cross-method agreement", Box::new(|| cross_method(&runs))),
        ("interpolation invariants", Box::new(interpolation_suite)),
        ("numerics suite", Box::new(numerics_suite)),
        ("cost accounting and determinism", Box::new(|| cost_and_determinism(&runs))),
        ("time-to-threshold ordering", Box::new(|| report_ordering(&runs))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}  {name}: {detail}", i + 1);
    }
    println!(
        "{} of 11 criteria passed in {:.0} s",
        11 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
