//! One-dimensional quadrature: Gauss–Hermite against a normal weight and
//! globally adaptive Gauss–Kronrod (10/21 point) with infinite-range maps.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use super::special::LN_SQRT_2PI;
use crate::error::{invalid, Error, Result};

/// Gauss–Hermite nodes and weights for the standard normal weight:
/// `∫ N(z; 0, 1) f(z) dz ≈ Σ wₖ f(zₖ)`.
#[derive(Clone, Debug)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    /// Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return invalid("Gauss-Hermite order must be at least 1");
        }
        let n = order;
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numerical(format!(
                    "Gauss-Hermite root {i} of order {n} did not converge"
                )));
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        // Physicists' rule ∫ e^{-x²} g(x) dx  →  standard normal rule.
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut nodes: Vec<f64> = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
        let mut weights: Vec<f64> = w.iter().map(|v| v / sqrt_pi).collect();
        nodes.reverse();
        weights.reverse();
        Ok(Self { nodes, weights })
    }

    /// `∫ N(x; mean, variance) f(x) dx`.
    pub fn expect(&self, mean: f64, variance: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let sd = variance.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(mean + sd * z))
            .sum()
    }
}

/// `∫ N(x; mean, variance) f(x) dx` with an `order`-point Gauss–Hermite rule,
/// exact for polynomials of degree ≤ 2·order − 1.
pub fn gauss_hermite(
    f: impl FnMut(f64) -> f64,
    mean: f64,
    variance: f64,
    order: usize,
) -> Result<f64> {
    if !(variance > 0.0) {
        return invalid(format!("variance must be positive, got {variance}"));
    }
    Ok(GaussHermiteRule::new(order)?.expect(mean, variance, f))
}

/// How a target without an analytic 1-D integral is integrated over ℝ.
#[derive(Clone, Debug, PartialEq)]
pub enum QuadratureRule {
    /// `∫ f = ∫ N(x; center, scale²)·(f/N) dx` with an `order`-point rule.
    /// Suited to integrands that look Gaussian around `center`.
    GaussHermite { order: usize, center: f64, scale: f64 },
    /// Adaptive Gauss–Kronrod on ℝ with absolute tolerance `tol`.
    AdaptiveKronrod { tol: f64 },
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::AdaptiveKronrod { tol: 1e-12 }
    }
}

impl QuadratureRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QuadratureRule::GaussHermite { order, scale, .. } => {
                if order == 0 || !(scale > 0.0) {
                    return invalid("Gauss-Hermite rule needs order >= 1 and scale > 0");
                }
            }
            QuadratureRule::AdaptiveKronrod { tol } => {
                if !(tol > 0.0) {
                    return invalid("adaptive tolerance must be positive");
                }
            }
        }
        Ok(())
    }

    /// Integral of `f` over the whole real line.
    pub fn integrate_real_line(&self, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
        self.validate()?;
        match *self {
            QuadratureRule::GaussHermite { order, center, scale } => {
                let rule = GaussHermiteRule::new(order)?;
                Ok(rule.expect(center, scale * scale, |x| {
                    let z = (x - center) / scale;
                    f(x) * (0.5 * z * z + LN_SQRT_2PI).exp() * scale
                }))
            }
            QuadratureRule::AdaptiveKronrod { tol } => {
                adaptive_quad(f, f64::NEG_INFINITY, f64::INFINITY, tol)
            }
        }
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_980_372,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];
/// Weights of the embedded 10-point Gauss rule at `XGK[1], XGK[3], …, XGK[9]`.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

const MAX_INTERVALS: usize = 2000;
/// Initial panels on a mapped half-line; the map squeezes features into
/// small parts of the unit interval, where a single panel can miss them.
const INFINITE_PANELS: usize = 8;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    abs: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// One 21-point Kronrod panel: (value, error estimate, ∫|f|).
fn kronrod21(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * h;
    let resabs = resabs * h.abs();
    let resasc = resasc * h.abs();
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err, resabs)
}

/// Integral of `f` over `(lo, hi)` to absolute accuracy `tol`.
///
/// Infinite endpoints are mapped onto finite ranges: `x = t/(1−t²)` on
/// `t ∈ (−1, 1)` for the whole line, `x = hi − (1−t)/t` for `(−∞, hi]` and
/// `x = lo + (1−t)/t` for `[lo, ∞)`, both on `t ∈ (0, 1]`. Global adaptive
/// bisection (starting from 8 panels per mapped half-line) stops when the summed error estimate is below `tol`, or below
/// the rounding floor `100·ε·∫|f|` if that is larger. After 2000 panels the
/// best estimate is returned inside [`Error::AccuracyNotReached`].
pub fn adaptive_quad(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) || lo.is_nan() || hi.is_nan() {
        return invalid("adaptive_quad needs tol > 0 and non-NaN limits");
    }
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        return adaptive_quad(f, hi, lo, tol).map(|v| -v);
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => integrate_finite(&mut f, lo, hi, tol, 1),
        (false, false) => integrate_finite(
            &mut |t: f64| {
                let d = 1.0 - t * t;
                if d <= 0.0 {
                    return 0.0;
                }
                let v = f(t / d);
                if v == 0.0 {
                    0.0
                } else {
                    v * (1.0 + t * t) / (d * d)
                }
            },
            -1.0,
            1.0,
            tol,
            2 * INFINITE_PANELS,
        ),
        (false, true) => integrate_finite(
            &mut |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                let v = f(hi - (1.0 - t) / t);
                if v == 0.0 {
                    0.0
                } else {
                    v / (t * t)
                }
            },
            0.0,
            1.0,
            tol,
            INFINITE_PANELS,
        ),
        (true, false) => integrate_finite(
            &mut |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                let v = f(lo + (1.0 - t) / t);
                if v == 0.0 {
                    0.0
                } else {
                    v / (t * t)
                }
            },
            0.0,
            1.0,
            tol,
            INFINITE_PANELS,
        ),
    }
}

fn integrate_finite(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    panels: usize,
) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut total_abs = 0.0;
    let width = (b - a) / panels as f64;
    for k in 0..panels {
        let lo = a + width * k as f64;
        let hi = if k + 1 == panels { b } else { a + width * (k + 1) as f64 };
        let (value, err, abs) = kronrod21(f, lo, hi);
        total += value;
        total_err += err;
        total_abs += abs;
        heap.push(Piece { a: lo, b: hi, value, err, abs });
    }
    loop {
        let floor = 100.0 * f64::EPSILON * total_abs;
        if !total.is_finite() {
            return Err(Error::Numerical("integrand produced a non-finite value".into()));
        }
        if total_err <= tol.max(floor) {
            break;
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::AccuracyNotReached {
                estimate: sum_pieces(&heap),
                abs_error: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Err(Error::AccuracyNotReached {
                estimate: sum_pieces(&heap) + worst.value,
                abs_error: total_err,
            });
        }
        let (v1, e1, a1) = kronrod21(f, worst.a, mid);
        let (v2, e2, a2) = kronrod21(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        total_abs += a1 + a2 - worst.abs;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1, abs: a1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2, abs: a2 });
        if total_err < 0.0 || total_abs < 0.0 {
            total_err = heap.iter().map(|p| p.err).sum();
            total_abs = heap.iter().map(|p| p.abs).sum();
        }
    }
    Ok(sum_pieces(&heap))
}

/// Sum of the panel values in a fixed order, independent of heap layout.
fn sum_pieces(heap: &BinaryHeap<Piece>) -> f64 {
    let mut pieces: Vec<(f64, f64)> = heap.iter().map(|p| (p.a, p.value)).collect();
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut s = 0.0;
    let mut c = 0.0;
    for (_, v) in pieces {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}
