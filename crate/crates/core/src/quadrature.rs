//! Integration on `(0, ∞)`, over quasi-balls, their complements and the
//! whole group.
//!
//! Radial integrals go through the polar decomposition
//! `∫_G f = |S| ∫_0^∞ f(r) r^{Q-1} dr` and are evaluated in log-radius
//! `y = ln r`. Power-law endpoint behaviour such as `r^{-1+δ}` becomes a slowly
//! decaying exponential in `y`, which the compactifying map `y = t/(1-t)`
//! followed by adaptive 21-point Gauss-Kronrod handles without underflow.
//! General (non-radial) integrands use Monte Carlo over the unit quasi-ball.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{QuasiNorm, Space};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Per-piece limit on the number of adaptive segments.
    pub max_subdivisions: usize,
    pub mc_samples: usize,
    /// Sample size for Monte Carlo estimates that sit inside an outer
    /// quadrature (they are re-evaluated at every outer node).
    pub nested_mc_samples: usize,
    pub seed: u64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2_000,
            mc_samples: 200_000,
            nested_mc_samples: 4_096,
            seed: 0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if self.mc_samples < 1_000 {
            return Err(Error::domain("mc_samples must be at least 1000"));
        }
        if self.max_subdivisions == 0 || self.nested_mc_samples == 0 {
            return Err(Error::domain("subdivision and sample limits must be positive"));
        }
        Ok(())
    }

    /// Same configuration with the seed replaced by one derived from `tag`.
    pub fn with_stream(&self, tag: &str) -> Self {
        Self {
            seed: derive_seed(self.seed, tag),
            ..*self
        }
    }

    /// Tighter tolerance for integrals nested inside another quadrature.
    pub(crate) fn inner(&self) -> Self {
        Self {
            rel_tol: (self.rel_tol * 1e-3).max(1e-14),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Adaptive1D,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    /// Absolute error estimate; the standard error of the mean for Monte Carlo.
    pub error_estimate: f64,
    pub method: Method,
    pub samples_or_evals: u64,
}

impl IntegralResult {
    fn zero(method: Method) -> Self {
        Self {
            value: 0.0,
            error_estimate: 0.0,
            method,
            samples_or_evals: 0,
        }
    }

    fn add(self, other: IntegralResult) -> Self {
        Self {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            method: self.method,
            samples_or_evals: self.samples_or_evals + other.samples_or_evals,
        }
    }

    fn scaled(self, c: f64) -> Self {
        Self {
            value: c * self.value,
            error_estimate: c.abs() * self.error_estimate,
            ..self
        }
    }

    /// Relative error, `0` for an exact zero.
    pub fn rel_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.error_estimate == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.error_estimate / self.value.abs()
        }
    }
}

// ---------------------------------------------------------------------------
// Random streams

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic child seed for `(seed, tag)`; stable across platforms.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then mixed with the parent seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(seed ^ mix64(h))
}

pub fn rng_stream(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

// ---------------------------------------------------------------------------
// Gauss-Kronrod 21-point rule (QUADPACK qk21)
// Nodes and weights are kept at their published precision.

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_732_454,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], …, XGK[9]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

struct RuleOutput {
    value: f64,
    error: f64,
    abs_value: f64,
}

fn eval_checked<F: FnMut(f64) -> Result<f64>>(f: &mut F, x: f64) -> Result<f64> {
    let v = f(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { at: x })
    }
}

fn qk21<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<RuleOutput> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval_checked(f, centre)?;
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let absc = half * XGK[j];
        let f1 = eval_checked(f, centre - absc)?;
        let f2 = eval_checked(f, centre + absc)?;
        fv1[j] = f1;
        fv2[j] = f2;
        let fsum = f1 + f2;
        if j % 2 == 1 {
            resg += WG[j / 2] * fsum;
        }
        resk += WGK[j] * fsum;
        resabs += WGK[j] * (f1.abs() + f2.abs());
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let dhalf = half.abs();
    let value = resk * half;
    let resabs = resabs * dhalf;
    let resasc = resasc * dhalf;
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(RuleOutput {
        value,
        error,
        abs_value: resabs,
    })
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Termination rule: `error ≤ max(abs, rel·|value|, l1_rel·∫|f|)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub l1_rel: f64,
}

impl Tolerance {
    pub fn from_config(cfg: &QuadratureConfig) -> Self {
        Self {
            rel: cfg.rel_tol,
            abs: cfg.abs_tol,
            l1_rel: 0.0,
        }
    }

    /// Scale-free: relative to the value, with a floor relative to `∫|f|`
    /// for integrands that cancel.
    pub fn scale_free(cfg: &QuadratureConfig) -> Self {
        Self {
            rel: cfg.rel_tol,
            abs: 0.0,
            l1_rel: cfg.rel_tol * 1e-2,
        }
    }

    fn target(&self, value: f64, l1: f64) -> f64 {
        self.abs.max(self.rel * value.abs()).max(self.l1_rel * l1)
    }
}

/// Globally adaptive bisection over the initial `points` (sorted, ≥ 2).
fn adaptive<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    points: &[f64],
    tol: Tolerance,
    max_segments: usize,
) -> Result<IntegralResult> {
    let mut heap = BinaryHeap::new();
    let mut evals = 0u64;
    for w in points.windows(2) {
        let out = qk21(f, w[0], w[1])?;
        evals += 21;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: out.value,
            error: out.error,
            abs_value: out.abs_value,
        });
    }
    let mut frozen: Vec<Segment> = Vec::new();
    let totals = |heap: &BinaryHeap<Segment>, frozen: &[Segment]| {
        let mut v = 0.0;
        let mut e = 0.0;
        let mut l1 = 0.0;
        for s in heap.iter().chain(frozen.iter()) {
            v += s.value;
            e += s.error;
            l1 += s.abs_value;
        }
        (v, e, l1)
    };
    let (mut value, mut error, mut l1) = totals(&heap, &frozen);
    let mut iterations = 0usize;
    loop {
        if error <= tol.target(value, l1) {
            break;
        }
        if heap.len() + frozen.len() >= max_segments {
            return Err(Error::NonConvergence {
                value,
                error,
                evals,
            });
        }
        let Some(seg) = heap.pop() else {
            // Only roundoff-limited segments remain.
            return Err(Error::NonConvergence {
                value,
                error,
                evals,
            });
        };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b)
            || (seg.b - seg.a) <= 1e-14 * seg.a.abs().max(seg.b.abs())
        {
            frozen.push(seg);
            continue;
        }
        let left = qk21(f, seg.a, mid)?;
        let right = qk21(f, mid, seg.b)?;
        evals += 42;
        value += left.value + right.value - seg.value;
        error += left.error + right.error - seg.error;
        l1 += left.abs_value + right.abs_value - seg.abs_value;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: left.value,
            error: left.error,
            abs_value: left.abs_value,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: right.value,
            error: right.error,
            abs_value: right.abs_value,
        });
        iterations += 1;
        if iterations.is_multiple_of(64) {
            (value, error, l1) = totals(&heap, &frozen);
        }
    }
    let (value, error, _) = totals(&heap, &frozen);
    Ok(IntegralResult {
        value,
        error_estimate: error,
        method: Method::Adaptive1D,
        samples_or_evals: evals,
    })
}

pub(crate) fn integrate_interval_tol<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    if a == b {
        return Ok(IntegralResult::zero(Method::Adaptive1D));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("finite interval expected"));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    Ok(adaptive(&mut f, &[lo, hi], tol, cfg.max_subdivisions)?.scaled(sign))
}

/// `∫_a^b f` on a finite interval.
pub fn integrate_interval<F: FnMut(f64) -> Result<f64>>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    integrate_interval_tol(f, a, b, Tolerance::from_config(cfg), cfg)
}

/// `∫_0^∞ g(y) dy` through `y = t/(1-t)`.
pub(crate) fn integrate_semi_infinite<F: FnMut(f64) -> Result<f64>>(
    mut g: F,
    tol: Tolerance,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    let mut h = |t: f64| -> Result<f64> {
        let s = 1.0 - t;
        let y = t / s;
        let v = g(y)?;
        if v == 0.0 {
            return Ok(0.0);
        }
        if !v.is_finite() {
            return Err(Error::NonFinite { at: y });
        }
        Ok(v / (s * s))
    };
    const SPLITS: [f64; 7] = [0.0, 0.5, 0.75, 0.875, 0.9375, 0.96875, 1.0];
    adaptive(&mut h, &SPLITS, tol, cfg.max_subdivisions)
}

/// `∫_{-∞}^{∞} g(y) dy`, split at the sorted `breaks` (or at 0 when empty).
pub(crate) fn integrate_line<F: FnMut(f64) -> Result<f64>>(
    mut g: F,
    breaks: &[f64],
    tol: Tolerance,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.is_empty() {
        pts.push(0.0);
    }
    let first = pts[0];
    let last = *pts.last().expect("non-empty");
    let mut total = integrate_semi_infinite(|s| g(first - s), tol, cfg)?;
    for w in pts.windows(2) {
        total = total.add(integrate_interval_tol(&mut g, w[0], w[1], tol, cfg)?);
    }
    total = total.add(integrate_semi_infinite(|s| g(last + s), tol, cfg)?);
    Ok(total)
}

/// `∫_0^∞ g(s) ds` with extra split points inside `(0, ∞)`.
pub(crate) fn integrate_semi_infinite_with_breaks<F: FnMut(f64) -> Result<f64>>(
    mut g: F,
    breaks: &[f64],
    tol: Tolerance,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > 0.0)
        .collect();
    // Doubling points keep features of unit width near 0 visible when the
    // first break is far out.
    if let Some(&last) = pts.last() {
        pts.extend(std::iter::successors(Some(1.0), |x| Some(x * 2.0)).take_while(|x| *x < last));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = IntegralResult::zero(Method::Adaptive1D);
    let mut lo = 0.0;
    for b in &pts {
        total = total.add(integrate_interval_tol(&mut g, lo, *b, tol, cfg)?);
        lo = *b;
    }
    total = total.add(integrate_semi_infinite(|s| g(lo + s), tol, cfg)?);
    Ok(total)
}

// ---------------------------------------------------------------------------
// Public radial integrators

/// `∫_0^∞ f(r) dr`.
///
/// Evaluated as `∫_ℝ f(e^y) e^y dy` with each half-line compactified by
/// `y = t/(1-t)`. Radii outside the finite range of `f64` contribute zero.
pub fn integrate_halfline<F: Fn(f64) -> f64>(f: F, cfg: &QuadratureConfig) -> Result<IntegralResult> {
    integrate_line(
        |y| {
            let r = y.exp();
            if r == 0.0 || !r.is_finite() {
                return Ok(0.0);
            }
            let v = f(r);
            if !v.is_finite() {
                return Err(Error::NonFinite { at: r });
            }
            Ok(v * r)
        },
        &[],
        Tolerance::from_config(cfg),
        cfg,
    )
}

/// An integrand on the group: radial (a function of `|x|`) or general.
#[derive(Clone, Copy)]
pub enum Integrand<'a> {
    Radial(&'a dyn Fn(f64) -> f64),
    General(&'a dyn Fn(&[f64]) -> f64),
}

fn radial_value(f: &dyn Fn(f64) -> f64, r: f64) -> Result<f64> {
    if r == 0.0 || !r.is_finite() {
        return Ok(0.0);
    }
    let v = f(r);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { at: r })
    }
}

/// `v·e^w`, with an exact zero winning over an overflowing factor.
fn times_exp(v: f64, w: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * w.exp()
    }
}

fn with_sphere_error(space: &Space, res: IntegralResult) -> IntegralResult {
    let s = space.sphere_measure();
    // The radial integral was scaled by |S|; add its uncertainty.
    IntegralResult {
        error_estimate: res.error_estimate + res.value.abs() * s.error / s.value,
        ..res
    }
}

/// `|S| ∫_0^∞ f(r) r^{Q-1} dr`.
pub fn integrate_radial_group<F: Fn(f64) -> f64>(
    space: &Space,
    f_radial: F,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    let q = space.homogeneous_dim();
    let s = space.sphere_measure().value;
    let res = integrate_line(
        |y| {
            let r = y.exp();
            Ok(times_exp(radial_value(&f_radial, r)?, q * y))
        },
        &[],
        Tolerance::from_config(cfg),
        cfg,
    )?;
    Ok(with_sphere_error(space, res.scaled(s)))
}

/// `∫_{B(0,R)} f`. Radial integrands reduce to one dimension; general ones are
/// sampled uniformly in the quasi-ball.
pub fn integrate_ball(
    space: &Space,
    f: Integrand<'_>,
    radius: f64,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::domain(format!("ball radius must be positive, got {radius}")));
    }
    let q = space.homogeneous_dim();
    match f {
        Integrand::Radial(g) => {
            // r = R e^{-s}: ∫_0^R g r^{Q-1} dr = R^Q ∫_0^∞ g(R e^{-s}) e^{-Qs} ds
            let s = space.sphere_measure().value;
            let res = integrate_semi_infinite(
                |t| Ok(times_exp(radial_value(g, radius * (-t).exp())?, -q * t)),
                Tolerance::from_config(cfg),
                cfg,
            )?;
            Ok(with_sphere_error(space, res.scaled(s * radius.powf(q))))
        }
        Integrand::General(g) => {
            let norm = space.require_group("general integrands")?;
            let vol = space.ball_volume(radius)?;
            let sample = PolarSample::draw(norm, cfg.mc_samples, cfg.seed, "integrate_ball")?;
            let mut point = vec![0.0; sample.dim];
            let stats = sample.mean_of(|j| {
                sample.ball_point(norm, j, radius, &mut point);
                g(&point)
            })?;
            Ok(stats.into_result(vol))
        }
    }
}

/// `∫_{G∖B(0,R)} f`. General integrands use radial importance sampling with
/// density proportional to `r^{Q-1-s}` on `(R, ∞)`, `s > Q`.
pub fn integrate_complement(
    space: &Space,
    f: Integrand<'_>,
    radius: f64,
    importance_exponent: f64,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::domain(format!("ball radius must be positive, got {radius}")));
    }
    let q = space.homogeneous_dim();
    match f {
        Integrand::Radial(g) => {
            // r = R e^{s}
            let s_measure = space.sphere_measure().value;
            let h = |t: f64| -> Result<f64> { Ok(times_exp(radial_value(g, radius * t.exp())?, q * t)) };
            let res = integrate_semi_infinite(h, Tolerance::from_config(cfg), cfg).map_err(|e| match e {
                Error::NonConvergence { .. } => Error::divergent(
                    "complement integral",
                    format!("no convergence outside B(0, {radius}): {e}"),
                ),
                other => other,
            })?;
            // Radii beyond the f64 range are dropped by the integrator, so a
            // non-decaying tail has to be detected separately.
            let t_max = f64::MAX.ln() - radius.ln();
            let (t1, t2) = (0.45 * t_max, 0.9 * t_max);
            let (h1, h2) = (h(t1)?.abs(), h(t2)?.abs());
            if h2 > 0.0 {
                let rate = (h1 / h2).ln() / (t2 - t1);
                if !(rate > 0.0) || h2 / rate > cfg.abs_tol.max(cfg.rel_tol * res.value.abs()) {
                    return Err(Error::divergent(
                        "complement integral",
                        format!(
                            "f(r) r^Q decays like r^{:.3} at large r outside B(0, {radius})",
                            -rate
                        ),
                    ));
                }
            }
            Ok(with_sphere_error(space, res.scaled(s_measure * radius.powf(q))))
        }
        Integrand::General(g) => {
            let norm = space.require_group("general integrands")?;
            let excess = importance_exponent - q;
            if !(excess > 0.0) {
                return Err(Error::domain(format!(
                    "importance exponent {importance_exponent} must exceed Q = {q}"
                )));
            }
            let sample = PolarSample::draw(norm, cfg.mc_samples, cfg.seed, "integrate_complement")?;
            let s_measure = space.sphere_measure().value;
            let scale = s_measure * radius.powf(q) / excess;
            let mut point = vec![0.0; sample.dim];
            let stats = sample.mean_of(|j| {
                // ρ = R U^{-1/(s-Q)}
                let ratio = sample.uniform(j).powf(-1.0 / excess);
                sample.sphere_point(norm, j, radius * ratio, &mut point);
                g(&point) * ratio.powf(importance_exponent)
            })?;
            Ok(stats.into_result(scale))
        }
    }
}

/// `(1/|S|) ∫_S u(rσ) dσ`.
pub fn sphere_average(
    space: &Space,
    u: Integrand<'_>,
    r: f64,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("radius must be positive, got {r}")));
    }
    match u {
        Integrand::Radial(g) => {
            let v = g(r);
            if !v.is_finite() {
                return Err(Error::NonFinite { at: r });
            }
            Ok(IntegralResult {
                value: v,
                error_estimate: 0.0,
                method: Method::Adaptive1D,
                samples_or_evals: 1,
            })
        }
        Integrand::General(g) => {
            let norm = space.require_group("general integrands")?;
            let sample = PolarSample::draw(norm, cfg.mc_samples, cfg.seed, "sphere_average")?;
            let mut point = vec![0.0; sample.dim];
            let stats = sample.mean_of(|j| {
                sample.sphere_point(norm, j, r, &mut point);
                g(&point)
            })?;
            Ok(stats.into_result(1.0))
        }
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo sampling

/// Uniform points of the unit quasi-ball by rejection from its bounding box,
/// stored in polar form: `U = |x|^Q` (uniform on (0,1)) and the projection
/// `σ = D_{1/|x|} x`, which is distributed as the normalised surface measure.
pub(crate) struct PolarSample {
    dim: usize,
    directions: Vec<f64>,
    uniforms: Vec<f64>,
}

pub(crate) struct MeanStats {
    mean: f64,
    std_err: f64,
    n: usize,
}

impl MeanStats {
    pub fn into_result(self, scale: f64) -> IntegralResult {
        IntegralResult {
            value: scale * self.mean,
            error_estimate: scale.abs() * self.std_err,
            method: Method::MonteCarlo,
            samples_or_evals: self.n as u64,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std_err(&self) -> f64 {
        self.std_err
    }
}

impl PolarSample {
    pub fn draw(norm: &QuasiNorm, n: usize, seed: u64, tag: &str) -> Result<Self> {
        let mut rng = rng_stream(seed, tag);
        let half = norm.unit_box();
        let dim = half.len();
        let q = norm.homogeneous_dim();
        let group = norm.group();
        let mut directions = Vec::with_capacity(n * dim);
        let mut uniforms = Vec::with_capacity(n);
        let mut x = vec![0.0; dim];
        let (mut tries, mut accepted) = (0u64, 0usize);
        while accepted < n {
            for (xi, h) in x.iter_mut().zip(&half) {
                *xi = rng.gen_range(-*h..*h);
            }
            tries += 1;
            let r = norm.eval_coords(&x);
            if r < 1.0 && r > 0.0 {
                group.dilate_in_place(1.0 / r, &mut x);
                directions.extend_from_slice(&x);
                uniforms.push(r.powf(q));
                accepted += 1;
            }
            if tries >= 10_000 && (accepted as f64) < 1e-3 * tries as f64 {
                return Err(Error::LowAcceptance {
                    rate: accepted as f64 / tries as f64,
                });
            }
        }
        Ok(Self {
            dim,
            directions,
            uniforms,
        })
    }

    pub fn len(&self) -> usize {
        self.uniforms.len()
    }

    pub fn uniform(&self, j: usize) -> f64 {
        self.uniforms[j]
    }

    pub fn direction(&self, j: usize) -> &[f64] {
        &self.directions[j * self.dim..(j + 1) * self.dim]
    }

    /// Writes `D_ρ σ_j` into `out`.
    pub fn sphere_point(&self, norm: &QuasiNorm, j: usize, rho: f64, out: &mut [f64]) {
        out.copy_from_slice(self.direction(j));
        norm.group().dilate_in_place(rho, out);
    }

    /// Writes `D_R x_j`, a uniform point of `B(0, R)`.
    pub fn ball_point(&self, norm: &QuasiNorm, j: usize, radius: f64, out: &mut [f64]) {
        let q = norm.homogeneous_dim();
        self.sphere_point(norm, j, radius * self.uniforms[j].powf(1.0 / q), out);
    }

    /// Sample mean and its standard error of `h(j)` over the sample.
    pub fn mean_of<H: FnMut(usize) -> f64>(&self, mut h: H) -> Result<MeanStats> {
        let n = self.len();
        // Welford's update.
        let (mut mean, mut m2) = (0.0, 0.0);
        for j in 0..n {
            let v = h(j);
            if !v.is_finite() {
                return Err(Error::NonFinite { at: j as f64 });
            }
            let d = v - mean;
            mean += d / (j + 1) as f64;
            m2 += d * (v - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Ok(MeanStats {
            mean,
            std_err: (var / n as f64).sqrt(),
            n,
        })
    }
}
