//! Geometric-type means over quasi-balls and their complements, power means,
//! and weighted `L^p` norms.
//!
//! Test functions and weights are stored through their logarithm. Radial ones
//! are functions of the log-radius `y = ln|x|`, so `ln f(e^y)` is evaluated
//! directly and nothing overflows at extreme radii. Means are then written in
//! a scale-free form. For the ball mean,
//!
//! ```text
//! ln M_ε(r) = ε|B_r|^{-ε} ∫_{B_r} |B_y|^{ε-1} ln f(y) dy = ∫_0^∞ e^{-w} ln f(r e^{-w/(Qε)}) dw
//! ```
//!
//! The complement mean has the same form with `r e^{+w/(Qε)}`. Neither form
//! involves `|S|`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::groups::{GroupPoint, QuasiNorm, Space};
use crate::quadrature::{
    integrate_line, integrate_semi_infinite_with_breaks, PolarSample, QuadratureConfig, Tolerance,
};

/// `y ↦ ln f(e^y)` for a radial function.
pub type LnRadial = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// `x ↦ ln f(x)` for a general function on the group.
pub type LnPoint = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Profile {
    Radial(LnRadial),
    General(LnPoint),
}

/// Where a test function is positive. Outside it the function vanishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Support {
    WholeGroup,
    UnitBall,
    /// `r0 < |x| < r1`; `r0 = 0` gives a ball, `r1 = ∞` a complement.
    Annulus(f64, f64),
    Empty,
}

impl Support {
    fn radii(&self) -> (f64, f64) {
        match *self {
            Support::WholeGroup => (0.0, f64::INFINITY),
            Support::UnitBall => (0.0, 1.0),
            Support::Annulus(a, b) => (a, b),
            Support::Empty => (f64::INFINITY, 0.0),
        }
    }

    fn contains_ball(&self, r: f64) -> bool {
        let (r0, r1) = self.radii();
        r0 == 0.0 && r <= r1
    }

    fn contains_complement(&self, r: f64) -> bool {
        let (r0, r1) = self.radii();
        r0 <= r && r1 == f64::INFINITY
    }
}

#[derive(Clone)]
pub struct TestFunction {
    id: String,
    profile: Profile,
    support: Support,
    /// Log-radii where the radial profile has a kink or jump.
    breaks: Vec<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("id", &self.id)
            .field("radial", &self.is_radial())
            .field("support", &self.support)
            .finish()
    }
}

impl TestFunction {
    /// Radial function given by its log-profile `y ↦ ln f(e^y)`.
    pub fn radial_log(id: impl Into<String>, ln_f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            id: id.into(),
            profile: Profile::Radial(Arc::new(ln_f)),
            support: Support::WholeGroup,
            breaks: Vec::new(),
        }
    }

    /// Radial function `x ↦ f(|x|)`.
    pub fn radial(id: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::radial_log(id, move |y| f(y.exp()).ln())
    }

    /// General function on the group given by `ln f`.
    pub fn general_log(
        id: impl Into<String>,
        ln_f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            profile: Profile::General(Arc::new(ln_f)),
            support: Support::WholeGroup,
            breaks: Vec::new(),
        }
    }

    pub fn general(id: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::general_log(id, move |x| f(x).ln())
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = support;
        self
    }

    /// Adds radii where the function is not smooth.
    pub fn with_breaks(mut self, radii: &[f64]) -> Self {
        self.breaks
            .extend(radii.iter().filter(|r| **r > 0.0 && r.is_finite()).map(|r| r.ln()));
        self.breaks.sort_by(f64::total_cmp);
        self.breaks.dedup();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.profile, Profile::Radial(_))
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub(crate) fn log_breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// `ln f` at log-radius `y`, for radial functions.
    pub fn ln_radial(&self, y: f64) -> Option<f64> {
        match &self.profile {
            Profile::Radial(g) => Some(g(y)),
            Profile::General(_) => None,
        }
    }

    pub(crate) fn ln_at_coords(&self, norm: Option<&QuasiNorm>, x: &[f64]) -> f64 {
        match &self.profile {
            Profile::General(g) => g(x),
            Profile::Radial(g) => {
                let r = match norm {
                    Some(n) => n.eval_coords(x),
                    None => x[0].abs(),
                };
                g(if r > 0.0 { r.ln() } else { -745.0 })
            }
        }
    }

    pub fn ln_eval(&self, space: &Space, x: &GroupPoint) -> Result<f64> {
        match space {
            Space::HalfLine => {
                if x.coords().len() != 1 || x.coords()[0] <= 0.0 {
                    return Err(Error::domain("half-line points are single positive numbers"));
                }
            }
            Space::Group(n) => {
                n.eval(x)?;
            }
        }
        if !self.is_radial() && space.is_half_line() {
            return Err(Error::domain("general test functions need a group"));
        }
        Ok(self.ln_at_coords(space.norm(), x.coords()))
    }

    pub fn eval(&self, space: &Space, x: &GroupPoint) -> Result<f64> {
        Ok(self.ln_eval(space, x)?.exp())
    }

    /// `c·f` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("scale factor must be positive, got {c}")));
        }
        let lc = c.ln();
        let profile = match &self.profile {
            Profile::Radial(g) => {
                let g = g.clone();
                Profile::Radial(Arc::new(move |y| g(y) + lc))
            }
            Profile::General(g) => {
                let g = g.clone();
                Profile::General(Arc::new(move |x: &[f64]| g(x) + lc))
            }
        };
        Ok(Self {
            id: format!("{}*{c}", self.id),
            profile,
            ..self.clone()
        })
    }

    /// `x ↦ f(D_{1/λ} x)`: the profile spread out by a factor `λ`.
    pub fn dilated(&self, space: &Space, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("dilation factor must be positive, got {lambda}")));
        }
        let shift = lambda.ln();
        let profile = match &self.profile {
            Profile::Radial(g) => {
                let g = g.clone();
                Profile::Radial(Arc::new(move |y| g(y - shift)))
            }
            Profile::General(g) => {
                let g = g.clone();
                let group = space.require_group("dilating a general function")?.group().clone();
                Profile::General(Arc::new(move |x: &[f64]| {
                    let mut z = x.to_vec();
                    group.dilate_in_place(1.0 / lambda, &mut z);
                    g(&z)
                }))
            }
        };
        let support = match self.support {
            Support::UnitBall => Support::Annulus(0.0, lambda),
            Support::Annulus(a, b) => Support::Annulus(a * lambda, b * lambda),
            s => s,
        };
        Ok(Self {
            id: format!("{}@{lambda}", self.id),
            profile,
            support,
            breaks: self.breaks.iter().map(|b| b + shift).collect(),
        })
    }

    /// Checks that `∫_{B(0,1)} |ln f|` is finite (radial functions only;
    /// general ones are accepted as is).
    pub fn validate_log_integrable(&self, space: &Space, cfg: &QuadratureConfig) -> Result<()> {
        let Profile::Radial(g) = &self.profile else {
            return Ok(());
        };
        if !self.support.contains_ball(1.0) {
            return Ok(());
        }
        let q = space.homogeneous_dim();
        let breaks: Vec<f64> = self.breaks.iter().filter(|b| **b < 0.0).map(|b| -b).collect();
        integrate_semi_infinite_with_breaks(
            |s| {
                let l = g(-s);
                if l.is_finite() {
                    Ok(l.abs() * (-q * s).exp())
                } else {
                    Err(Error::NonFinite { at: (-s).exp() })
                }
            },
            &breaks,
            Tolerance::scale_free(cfg),
            cfg,
        )
        .map(|_| ())
        .map_err(|e| {
            Error::divergent(
                "log-integrability",
                format!("|log {}| is not integrable over B(0,1): {e}", self.id),
            )
        })
    }

    /// Builds a catalog function from its id, e.g. `exp_decay` or
    /// `sharpness_delta(0, 1, 1, 0.1)`.
    pub fn parse(spec: &str, space: &Space) -> Result<Self> {
        let (name, args) = parse_call(spec)?;
        let q = space.homogeneous_dim();
        let ln_unit_ball = space.ln_ball_volume(0.0);
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::domain(format!(
                    "test function `{name}` takes {n} argument(s), got {}",
                    args.len()
                )))
            }
        };
        let id = spec.trim().to_string();
        let f = match name.as_str() {
            "const" => {
                arity(1)?;
                let c = args[0];
                if c < 0.0 || !c.is_finite() {
                    return Err(Error::domain(format!("const({c}): value must be non-negative")));
                }
                let lc = c.ln();
                let f = Self::radial_log(id, move |_| lc);
                if c == 0.0 {
                    f.with_support(Support::Empty)
                } else {
                    f
                }
            }
            "exp_decay" => {
                arity(0)?;
                Self::radial_log(id, |y| -y.exp())
            }
            "gauss" => {
                arity(0)?;
                Self::radial_log(id, |y| -(2.0 * y).exp())
            }
            "stretched_exp" => {
                arity(1)?;
                let alpha = args[0];
                if !(alpha > 0.0) {
                    return Err(Error::domain("stretched_exp exponent must be positive"));
                }
                Self::radial_log(id, move |y| -(alpha * y).exp())
            }
            "power" => {
                arity(1)?;
                let gamma = args[0];
                Self::radial_log(id, move |y| gamma * y)
            }
            "min_power" => {
                arity(1)?;
                let gamma = args[0];
                Self::radial_log(id, move |y| if y > 0.0 { -gamma * y } else { 0.0 }).with_breaks(&[1.0])
            }
            "one_plus_norm" => {
                arity(0)?;
                Self::radial_log(id, ln_one_plus_exp)
            }
            "ball_power" => {
                arity(1)?;
                let s = args[0];
                Self::radial_log(id, move |y| s * (ln_unit_ball + q * y))
            }
            "exp_ball" => {
                arity(0)?;
                Self::radial_log(id, move |y| -(ln_unit_ball + q * y).exp())
            }
            "indicator_ball_power" => {
                arity(2)?;
                let (s, radius) = (args[0], args[1]);
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::domain("indicator_ball_power radius must be positive"));
                }
                let cut = radius.ln();
                Self::radial_log(id, move |y| {
                    if y < cut {
                        s * (ln_unit_ball + q * y)
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .with_support(Support::Annulus(0.0, radius))
                .with_breaks(&[radius])
            }
            "sharpness_delta" => {
                arity(4)?;
                crate::sharpness::conjugate_family_eval(space, args[0], args[1], args[2], args[3])?
            }
            "classic_delta" => {
                arity(3)?;
                crate::sharpness::classic_family_eval(args[0], args[1], args[2])?
            }
            "aniso_gauss" => {
                arity(0)?;
                space.require_group("aniso_gauss")?;
                Self::general_log(id, |x| -x.iter().map(|v| v * v).sum::<f64>())
            }
            "tilted_exp" => {
                arity(0)?;
                let norm = space.require_group("tilted_exp")?.clone();
                Self::general_log(id, move |x| -norm.eval_coords(x) + (2.0 + x[0].tanh()).ln())
            }
            other => {
                return Err(Error::domain(format!("unknown test function `{other}`")));
            }
        };
        Ok(f)
    }
}

/// `ln(1 + e^y)` without overflow.
fn ln_one_plus_exp(y: f64) -> f64 {
    if y > 30.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

/// Splits `name(a, b, …)` into the name and numeric arguments.
pub(crate) fn parse_call(spec: &str) -> Result<(String, Vec<f64>)> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec.to_string(), Vec::new()));
    };
    if !spec.ends_with(')') {
        return Err(Error::domain(format!("malformed id `{spec}`")));
    }
    let name = spec[..open].trim().to_string();
    let inner = spec[open + 1..spec.len() - 1].trim();
    if inner.is_empty() {
        return Ok((name, Vec::new()));
    }
    let args = inner
        .split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("bad argument `{}` in `{spec}`", a.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name, args))
}

// ---------------------------------------------------------------------------
// Weights

#[derive(Clone)]
pub enum Weight {
    One,
    /// `|B(0, |x|)|^a`.
    BallPower(f64),
    /// Radial weight through its log-profile `y ↦ ln w(e^y)`.
    RadialGeneral(LnRadial),
    /// General weight through `ln w`.
    General(LnPoint),
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::One => write!(f, "One"),
            Weight::BallPower(a) => write!(f, "BallPower({a})"),
            Weight::RadialGeneral(_) => write!(f, "RadialGeneral(..)"),
            Weight::General(_) => write!(f, "General(..)"),
        }
    }
}

impl Weight {
    /// `|x|^γ`.
    pub fn norm_power(gamma: f64) -> Self {
        Weight::RadialGeneral(Arc::new(move |y| gamma * y))
    }

    pub fn radial(w: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Weight::RadialGeneral(Arc::new(move |y| w(y.exp()).ln()))
    }

    pub fn general(w: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Weight::General(Arc::new(move |x| w(x).ln()))
    }

    /// `one`, `ball_power(a)` or `norm_power(γ)`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, args) = parse_call(spec)?;
        match (name.as_str(), args.as_slice()) {
            ("one", []) => Ok(Weight::One),
            ("ball_power", [a]) => Ok(Weight::BallPower(*a)),
            ("norm_power", [g]) => Ok(Weight::norm_power(*g)),
            _ => Err(Error::domain(format!("unknown weight `{spec}`"))),
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, Weight::General(_))
    }

    pub fn ln_radial(&self, space: &Space, y: f64) -> Option<f64> {
        match self {
            Weight::One => Some(0.0),
            Weight::BallPower(a) => Some(if *a == 0.0 { 0.0 } else { a * space.ln_ball_volume(y) }),
            Weight::RadialGeneral(g) => Some(g(y)),
            Weight::General(_) => None,
        }
    }

    pub(crate) fn ln_at_coords(&self, space: &Space, x: &[f64]) -> f64 {
        match self {
            Weight::General(g) => g(x),
            _ => {
                let r = match space.norm() {
                    Some(n) => n.eval_coords(x),
                    None => x[0].abs(),
                };
                self.ln_radial(space, if r > 0.0 { r.ln() } else { -745.0 })
                    .expect("radial weight")
            }
        }
    }

    /// A weight raised to a real power, `w^s`.
    pub fn powf(&self, s: f64) -> Self {
        match self {
            Weight::One => Weight::One,
            Weight::BallPower(a) => Weight::BallPower(a * s),
            Weight::RadialGeneral(g) => {
                let g = g.clone();
                Weight::RadialGeneral(Arc::new(move |y| s * g(y)))
            }
            Weight::General(g) => {
                let g = g.clone();
                Weight::General(Arc::new(move |x: &[f64]| s * g(x)))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Estimates

/// A logarithm with an absolute error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogEstimate {
    pub ln: f64,
    pub err: f64,
}

impl LogEstimate {
    pub fn value(&self) -> f64 {
        self.ln.exp()
    }

    fn neg_infinity() -> Self {
        Self {
            ln: f64::NEG_INFINITY,
            err: 0.0,
        }
    }
}

/// Sums `e^{ln_v}` and matching absolute errors in log scale so that the
/// error/value ratio can be formed without overflow.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ErrTracker {
    scale: f64,
    value: f64,
    error: f64,
}

impl Default for ErrTracker {
    fn default() -> Self {
        Self {
            scale: f64::NEG_INFINITY,
            value: 0.0,
            error: 0.0,
        }
    }
}

impl ErrTracker {
    pub fn add(&mut self, ln_v: f64, rel_err: f64) {
        if ln_v == f64::NEG_INFINITY || !ln_v.is_finite() {
            return;
        }
        if ln_v > self.scale {
            let k = (self.scale - ln_v).exp();
            self.value *= k;
            self.error *= k;
            self.scale = ln_v;
        }
        let w = (ln_v - self.scale).exp();
        if w == 0.0 {
            // Negligible term; its error estimate may be meaningless there.
            return;
        }
        self.value += w;
        self.error += w * rel_err;
    }

    pub fn rel(&self) -> f64 {
        if self.value > 0.0 {
            self.error / self.value
        } else {
            0.0
        }
    }
}

/// `ln ∫` with a relative error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogIntegral {
    pub ln: f64,
    pub rel_err: f64,
}

/// `ln(|S| ∫_ℝ exp(ln_h(y) + Q y) dy)`; `ln_h` returns the log-integrand and
/// the relative error of `exp(ln_h)` at `y`.
///
/// The integrand is shifted by its largest value on a probe grid so that the
/// quadrature runs on numbers of order one.
pub(crate) fn integrate_log_profile<H>(
    space: &Space,
    what: &str,
    breaks: &[f64],
    cfg: &QuadratureConfig,
    ln_h: H,
) -> Result<LogIntegral>
where
    H: Fn(f64) -> Result<(f64, f64)>,
{
    let q = space.homogeneous_dim();
    let mut shift = f64::NEG_INFINITY;
    let mut peak = 0.0;
    for k in -40..=40 {
        let y = k as f64;
        let (l, _) = ln_h(y)?;
        let v = l + q * y;
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::divergent(what, format!("integrand is not finite at |x| = e^{y}")));
        }
        if v > shift {
            shift = v;
            peak = y;
        }
    }
    if shift == f64::NEG_INFINITY {
        // Probe a finer grid before concluding the integrand vanishes.
        for k in -400..=400 {
            let y = k as f64 * 0.1;
            let v = ln_h(y)?.0 + q * y;
            if v > shift {
                shift = v;
                peak = y;
            }
        }
        if shift == f64::NEG_INFINITY {
            return Ok(LogIntegral {
                ln: f64::NEG_INFINITY,
                rel_err: 0.0,
            });
        }
    }
    let mut pts: Vec<f64> = breaks.to_vec();
    pts.push(peak);
    let tracker = std::cell::RefCell::new(ErrTracker::default());
    let res = integrate_line(
        |y| {
            let (l, e) = ln_h(y)?;
            let v = l + q * y - shift;
            if v.is_nan() {
                return Err(Error::NonFinite { at: y.exp() });
            }
            tracker.borrow_mut().add(v, e);
            Ok(v.exp())
        },
        &pts,
        Tolerance::scale_free(cfg),
        cfg,
    )
    .map_err(|e| match e {
        Error::NonConvergence { .. } | Error::NonFinite { .. } => Error::divergent(what, e.to_string()),
        other => other,
    })?;
    if !(res.value > 0.0) {
        return Ok(LogIntegral {
            ln: f64::NEG_INFINITY,
            rel_err: 0.0,
        });
    }
    let s = space.sphere_measure();
    let tracked = tracker.borrow().rel();
    Ok(LogIntegral {
        ln: s.value.ln() + shift + res.value.ln(),
        rel_err: res.rel_error() + tracked + s.error / s.value,
    })
}

// ---------------------------------------------------------------------------
// Means

/// `ln M(r)` for the ball or complement mean of one function, reusable across
/// many radii. General functions are averaged over a fixed sample of points
/// (common random numbers), which keeps `r ↦ M(r)` smooth.
pub(crate) struct MeanOperator<'a> {
    space: &'a Space,
    f: &'a TestFunction,
    eps: f64,
    conjugate: bool,
    cfg: QuadratureConfig,
    sample: Option<PolarSample>,
}

impl<'a> MeanOperator<'a> {
    pub fn new(
        space: &'a Space,
        f: &'a TestFunction,
        eps: f64,
        conjugate: bool,
        cfg: &QuadratureConfig,
        sample_size: usize,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::domain(format!("epsilon must be positive, got {eps}")));
        }
        let sample = match f.profile {
            Profile::Radial(_) => None,
            Profile::General(_) => {
                let norm = space.require_group("general test functions")?;
                Some(PolarSample::draw(norm, sample_size, cfg.seed, "ball_mean")?)
            }
        };
        Ok(Self {
            space,
            f,
            eps,
            conjugate,
            cfg: *cfg,
            sample,
        })
    }

    pub fn ln_mean(&self, y: f64) -> Result<LogEstimate> {
        let r = y.exp();
        let supported = if self.conjugate {
            self.f.support.contains_complement(r)
        } else {
            self.f.support.contains_ball(r)
        };
        if !supported {
            return Ok(LogEstimate::neg_infinity());
        }
        let k = self.space.homogeneous_dim() * self.eps;
        let sign = if self.conjugate { 1.0 } else { -1.0 };
        match &self.f.profile {
            Profile::Radial(g) => self.radial(g, y, k, sign),
            Profile::General(g) => {
                let norm = self.space.norm().expect("checked in new");
                let sample = self.sample.as_ref().expect("drawn in new");
                let mut point = vec![0.0; norm.group().ambient_dim()];
                let mut neg_inf = false;
                let stats = sample.mean_of(|j| {
                    let rho = (y - sign * sample.uniform(j).ln() / k).exp();
                    sample.sphere_point(norm, j, rho, &mut point);
                    let l = g(&point);
                    if l == f64::NEG_INFINITY {
                        neg_inf = true;
                        0.0
                    } else {
                        l
                    }
                })?;
                if neg_inf {
                    return Ok(LogEstimate::neg_infinity());
                }
                Ok(LogEstimate {
                    ln: stats.mean(),
                    err: stats.std_err(),
                })
            }
        }
    }

    fn radial(&self, g: &LnRadial, y: f64, k: f64, sign: f64) -> Result<LogEstimate> {
        let at = |w: f64| y + sign * w / k;
        let breaks: Vec<f64> = self
            .f
            .breaks
            .iter()
            .map(|b| sign * k * (b - y))
            .filter(|w| *w > 0.0)
            .collect();
        if self.conjugate {
            self.check_tail(g, &at, k)?;
        }
        let underflow = std::cell::Cell::new(false);
        let h = |w: f64| -> Result<f64> {
            let l = g(at(w));
            if l.is_nan() || l == f64::INFINITY {
                return Err(Error::NonFinite { at: at(w).exp() });
            }
            if l == f64::NEG_INFINITY {
                // ln f left the f64 range; where e^{-w} is still representable
                // this means the mean itself underflows.
                if w < 700.0 {
                    underflow.set(true);
                }
                return Ok(0.0);
            }
            Ok((-w).exp() * l)
        };
        let res = match integrate_semi_infinite_with_breaks(h, &breaks, Tolerance::scale_free(&self.cfg), &self.cfg) {
            // Far out the mean is below e^{-745}; roundoff in a huge negative
            // log is harmless there.
            Err(Error::NonConvergence { value, error, .. }) if value + 3.0 * error < -800.0 => {
                return Ok(LogEstimate::neg_infinity())
            }
            other => other,
        };
        let res = res
            .map_err(|e| match e {
                Error::NonConvergence { .. } if self.conjugate => {
                    Error::divergent("conjugate mean", format!("tail integral of log {}: {e}", self.f.id))
                }
                other => other,
            })?;
        if underflow.get() {
            return Ok(LogEstimate::neg_infinity());
        }
        Ok(LogEstimate {
            ln: res.value,
            err: res.error_estimate,
        })
    }

    /// The complement mean needs `|ln f(ρ)| = o(ρ^{Qε})`; compare the
    /// integrand at two far points of the tail.
    fn check_tail(&self, g: &LnRadial, at: &dyn Fn(f64) -> f64, k: f64) -> Result<()> {
        let (w1, w2): (f64, f64) = (50.0, 100.0);
        let h1 = (-w1).exp() * g(at(w1)).abs();
        let h2 = (-w2).exp() * g(at(w2)).abs();
        if h1.is_finite() && h1 > 0.0 && !(h2 < 0.99 * h1) {
            let rate = if h2.is_finite() { (h2 / h1).ln() / (w2 - w1) } else { f64::INFINITY };
            let growth = k * (1.0 + rate);
            return Err(Error::divergent(
                "conjugate mean",
                format!(
                    "|log {}| grows like |x|^{growth:.3} while the tail weight |B|^(-eps-1) \
                     only integrates growth below |x|^{k:.3}",
                    self.f.id
                ),
            ));
        }
        Ok(())
    }
}

fn check_radius(r: f64) -> Result<f64> {
    if r > 0.0 && r.is_finite() {
        Ok(r.ln())
    } else {
        Err(Error::domain(format!("radius must be positive, got {r}")))
    }
}

/// `ln` of the ε-weighted log-mean over `B(0, r)`.
pub fn ln_lcl_mean(space: &Space, f: &TestFunction, eps: f64, r: f64, cfg: &QuadratureConfig) -> Result<LogEstimate> {
    let y = check_radius(r)?;
    MeanOperator::new(space, f, eps, false, cfg, cfg.mc_samples)?.ln_mean(y)
}

/// `ln` of the ε-weighted log-mean over `G ∖ B(0, r)`.
pub fn ln_conjugate_lcl_mean(
    space: &Space,
    f: &TestFunction,
    eps: f64,
    r: f64,
    cfg: &QuadratureConfig,
) -> Result<LogEstimate> {
    let y = check_radius(r)?;
    MeanOperator::new(space, f, eps, true, cfg, cfg.mc_samples)?.ln_mean(y)
}

/// `exp(|B_r|^{-1} ∫_{B_r} log f)`.
pub fn geometric_mean(space: &Space, f: &TestFunction, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(ln_lcl_mean(space, f, 1.0, r, cfg)?.value())
}

/// `exp(ε|B_r|^{-ε} ∫_{B_r} |B_y|^{ε-1} log f(y) dy)`.
pub fn lcl_mean(space: &Space, f: &TestFunction, eps: f64, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(ln_lcl_mean(space, f, eps, r, cfg)?.value())
}

/// `exp(ε|B_r|^{ε} ∫_{G∖B_r} |B_y|^{-ε-1} log f(y) dy)`.
pub fn conjugate_lcl_mean(
    space: &Space,
    f: &TestFunction,
    eps: f64,
    r: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    Ok(ln_conjugate_lcl_mean(space, f, eps, r, cfg)?.value())
}

/// `ln ((1/|B_r|) ∫_{B_r} f^β)^{1/β}`.
///
/// Computed relative to the geometric mean `G` as
/// `ln G + ln(1 + mean(expm1(β(ln f - ln G))))/β`, which stays accurate as
/// `β → 0`.
pub fn ln_power_mean(space: &Space, f: &TestFunction, beta: f64, r: f64, cfg: &QuadratureConfig) -> Result<LogEstimate> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    let y = check_radius(r)?;
    match &f.profile {
        Profile::Radial(g) => {
            let q = space.homogeneous_dim();
            let gm = MeanOperator::new(space, f, 1.0, false, cfg, 0)?.ln_mean(y)?;
            let centre = if gm.ln.is_finite() { gm.ln } else { 0.0 };
            let breaks: Vec<f64> = f.breaks.iter().map(|b| q * (y - b)).filter(|w| *w > 0.0).collect();
            let res = integrate_semi_infinite_with_breaks(
                |w| {
                    let l = g(y - w / q);
                    if l.is_nan() || l == f64::INFINITY {
                        return Err(Error::NonFinite { at: (y - w / q).exp() });
                    }
                    Ok((-w).exp() * (beta * (l - centre)).exp_m1())
                },
                &breaks,
                Tolerance::scale_free(cfg),
                cfg,
            )
            .map_err(|e| Error::divergent("power mean", e.to_string()))?;
            if !(res.value > -1.0) {
                return Ok(LogEstimate::neg_infinity());
            }
            Ok(LogEstimate {
                ln: centre + res.value.ln_1p() / beta,
                err: gm.err + res.error_estimate / (beta * (1.0 + res.value)),
            })
        }
        Profile::General(g) => {
            let norm = space.require_group("general test functions")?;
            let sample = PolarSample::draw(norm, cfg.mc_samples, cfg.seed, "ball_mean")?;
            let mut point = vec![0.0; norm.group().ambient_dim()];
            let logs: Vec<f64> = (0..sample.len())
                .map(|j| {
                    sample.ball_point(norm, j, r, &mut point);
                    g(&point)
                })
                .collect();
            let finite = logs.iter().all(|l| l.is_finite());
            let centre = if finite { logs.iter().sum::<f64>() / logs.len() as f64 } else { 0.0 };
            let stats = sample.mean_of(|j| (beta * (logs[j] - centre)).exp_m1())?;
            if !(stats.mean() > -1.0) {
                return Ok(LogEstimate::neg_infinity());
            }
            Ok(LogEstimate {
                ln: centre + stats.mean().ln_1p() / beta,
                err: stats.std_err() / (beta * (1.0 + stats.mean())),
            })
        }
    }
}

pub fn power_mean(space: &Space, f: &TestFunction, beta: f64, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(ln_power_mean(space, f, beta, r, cfg)?.value())
}

/// `ln ∫_G f^p v` with its relative error.
pub fn ln_weighted_lp_integral(
    space: &Space,
    f: &TestFunction,
    v: &Weight,
    p: f64,
    cfg: &QuadratureConfig,
) -> Result<LogIntegral> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!("p must be positive, got {p}")));
    }
    if f.support == Support::Empty {
        return Ok(LogIntegral {
            ln: f64::NEG_INFINITY,
            rel_err: 0.0,
        });
    }
    let what = "weighted L^p norm";
    if f.is_radial() && v.is_radial() {
        let Profile::Radial(g) = &f.profile else { unreachable!() };
        return integrate_log_profile(space, what, &f.breaks, cfg, |y| {
            let lv = v.ln_radial(space, y).expect("radial");
            let l = g(y);
            let t = if l == f64::NEG_INFINITY { l } else { p * l + lv };
            Ok((t, 0.0))
        });
    }
    let norm = space.require_group("general integrands")?;
    let sample = PolarSample::draw(norm, cfg.nested_mc_samples, cfg.seed, "weighted_lp_norm")?;
    let averager = SphereAverager { space, norm, sample: &sample };
    integrate_log_profile(space, what, &f.breaks, cfg, |y| {
        averager.ln_mean(y, &|x: &[f64]| {
            let l = f.ln_at_coords(Some(norm), x);
            if l == f64::NEG_INFINITY {
                l
            } else {
                p * l + v.ln_at_coords(space, x)
            }
        })
    })
}

/// `(∫_G f^p v)^{1/p}`.
pub fn weighted_lp_norm(space: &Space, f: &TestFunction, v: &Weight, p: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok((ln_weighted_lp_integral(space, f, v, p, cfg)?.ln / p).exp())
}

/// Spherical averages `(1/|S|)∫_S h(D_r σ) dσ` of a log-integrand over a
/// fixed set of directions.
pub(crate) struct SphereAverager<'a> {
    pub space: &'a Space,
    pub norm: &'a QuasiNorm,
    pub sample: &'a PolarSample,
}

impl SphereAverager<'_> {
    /// Log of the average of `exp(ln_h)` at log-radius `y`, with the
    /// relative standard error of the average.
    pub fn ln_mean(&self, y: f64, ln_h: &dyn Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
        let _ = self.space;
        let n = self.sample.len();
        let r = y.exp();
        let mut point = vec![0.0; self.norm.group().ambient_dim()];
        let mut logs = Vec::with_capacity(n);
        for j in 0..n {
            self.sample.sphere_point(self.norm, j, r, &mut point);
            let l = ln_h(&point);
            if l.is_nan() || l == f64::INFINITY {
                return Err(Error::NonFinite { at: r });
            }
            logs.push(l);
        }
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Ok((m, 0.0));
        }
        let stats = self.sample.mean_of(|j| (logs[j] - m).exp())?;
        Ok((m + stats.mean().ln(), stats.std_err() / stats.mean()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{GroupSpec, NormKind};
    use std::f64::consts::{E, PI};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn aniso() -> Space {
        Space::group(QuasiNorm::new(GroupSpec::abelian(vec![1.0, 2.0]).unwrap(), NormKind::AnisotropicLp).unwrap())
    }

    fn spaces() -> Vec<Space> {
        vec![Space::real_line(), aniso(), Space::heisenberg_koranyi()]
    }

    #[test]
    fn geometric_mean_examples() {
        let c = cfg();
        let half = Space::HalfLine;
        let f = TestFunction::parse("exp_decay", &half).unwrap();
        for x in [0.1, 1.0, 7.0] {
            let g = geometric_mean(&half, &f, x, &c).unwrap();
            assert!(rel(g, (-x / 2.0).exp()) < 1e-10, "{x}: {g}");
        }
        for space in spaces() {
            let s = 0.7;
            let f = TestFunction::parse(&format!("ball_power({s})"), &space).unwrap();
            let r = 1.9;
            let expected = space.ball_volume(r).unwrap().powf(s) * (-s).exp();
            assert!(rel(geometric_mean(&space, &f, r, &c).unwrap(), expected) < 1e-10);
        }
        assert!(geometric_mean(&half, &f, 0.0, &c).is_err());
    }

    #[test]
    fn lcl_mean_examples() {
        let c = cfg();
        let half = Space::HalfLine;
        let f = TestFunction::radial("t", |t| t);
        for x in [0.5, 3.0] {
            let m = lcl_mean(&half, &f, 2.0, x, &c).unwrap();
            assert!(rel(m, x * (-0.5f64).exp()) < 1e-10);
        }
        let g = TestFunction::parse("gauss", &Space::heisenberg_koranyi()).unwrap();
        let k = Space::heisenberg_koranyi();
        let a = lcl_mean(&k, &g, 1.0, 1.3, &c).unwrap();
        let b = geometric_mean(&k, &g, 1.3, &c).unwrap();
        assert!(rel(a, b) < 1e-10);
    }

    #[test]
    fn conjugate_examples() {
        let c = cfg();
        let half = Space::HalfLine;
        let f = TestFunction::parse("power(-1)", &half).unwrap();
        for x in [0.3, 1.0, 4.0] {
            let m = conjugate_lcl_mean(&half, &f, 1.0, x, &c).unwrap();
            assert!(rel(m, 1.0 / (x * E)) < 1e-10, "{m}");
        }
        // exp(-|B|) needs Qε > 1 for the tail to converge.
        let k = Space::heisenberg_koranyi();
        let f = TestFunction::parse("exp_ball", &k).unwrap();
        let vals: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|r| conjugate_lcl_mean(&k, &f, 2.0, *r, &c).unwrap())
            .collect();
        assert!(vals.iter().all(|v| *v > 0.0));
        assert!(vals[0] > vals[1] && vals[1] > vals[2]);
        // Oracle: in U = |B_y| the mean is exp(-ε U_r^ε ∫_{U_r}^∞ U^{-ε}) = exp(-2U_r).
        let u = k.ball_volume(1.0).unwrap();
        assert!(rel(vals[1], (-2.0 * u).exp()) < 1e-9);
    }

    #[test]
    fn conjugate_divergence_names_exponent() {
        let line = Space::real_line();
        let f = TestFunction::parse("exp_decay", &line).unwrap();
        let err = conjugate_lcl_mean(&line, &f, 1.0, 1.0, &cfg()).unwrap_err();
        match err {
            Error::Divergent { detail, .. } => assert!(detail.contains("|x|^1.000"), "{detail}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn power_mean_examples() {
        let c = cfg();
        let e2 = Space::euclidean(2).unwrap();
        let f = TestFunction::parse("one_plus_norm", &e2).unwrap();
        let pm = power_mean(&e2, &f, 1.0, 1.0, &c).unwrap();
        assert!(rel(pm, 1.0 + 2.0 / 3.0) < 1e-9, "{pm}");
        let k = TestFunction::parse("const(2.5)", &e2).unwrap();
        assert!(rel(power_mean(&e2, &k, 0.3, 2.0, &c).unwrap(), 2.5) < 1e-12);
    }

    #[test]
    fn power_mean_general_matches_radial() {
        let c = cfg();
        let e2 = Space::euclidean(2).unwrap();
        let radial = TestFunction::parse("one_plus_norm", &e2).unwrap();
        let norm = e2.norm().unwrap().clone();
        let general = TestFunction::general("1+|x|", move |x| 1.0 + norm.eval_coords(x));
        let a = ln_power_mean(&e2, &radial, 1.0, 1.0, &c).unwrap();
        let b = ln_power_mean(&e2, &general, 1.0, 1.0, &c).unwrap();
        assert!((a.ln - b.ln).abs() <= 3.0 * (a.err + b.err), "{a:?} {b:?}");
        let ga = ln_lcl_mean(&e2, &radial, 1.0, 1.0, &c).unwrap();
        let gb = ln_lcl_mean(&e2, &general, 1.0, 1.0, &c).unwrap();
        assert!((ga.ln - gb.ln).abs() <= 3.0 * (ga.err + gb.err), "{ga:?} {gb:?}");
        // Same sample for both means keeps Jensen's inequality exact.
        assert!(gb.ln <= b.ln);
    }

    #[test]
    fn weighted_norm_examples() {
        let c = cfg();
        let line = Space::real_line();
        let f = TestFunction::parse("exp_decay", &line).unwrap();
        assert!(rel(weighted_lp_norm(&line, &f, &Weight::One, 1.0, &c).unwrap(), 2.0) < 1e-9);
        let e2 = Space::euclidean(2).unwrap();
        let g = TestFunction::parse("gauss", &e2).unwrap();
        let n = weighted_lp_norm(&e2, &g, &Weight::One, 2.0, &c).unwrap();
        assert!(rel(n, (PI / 2.0).sqrt()) < 1e-8);
        let z = TestFunction::parse("const(0)", &e2).unwrap();
        assert_eq!(weighted_lp_norm(&e2, &z, &Weight::One, 2.0, &c).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_general_path() {
        let c = cfg();
        let e2 = Space::euclidean(2).unwrap();
        // exp(-|x|²) written as a general function.
        let g = TestFunction::parse("aniso_gauss", &e2).unwrap();
        let est = ln_weighted_lp_integral(&e2, &g, &Weight::One, 2.0, &c).unwrap();
        // On the Euclidean plane the "general" Gaussian is radial, so every
        // direction gives the same value and the estimate is exact.
        assert!((est.ln - (PI / 2.0).ln()).abs() < 1e-8, "{est:?}");
    }

    #[test]
    fn half_line_and_divergence() {
        let c = cfg();
        let half = Space::HalfLine;
        let f = TestFunction::parse("power(-1)", &half).unwrap();
        let err = weighted_lp_norm(&half, &f, &Weight::One, 1.0, &c).unwrap_err();
        assert!(matches!(err, Error::Divergent { .. }), "{err:?}");
    }

    #[test]
    fn catalog_parsing() {
        let k = Space::heisenberg_koranyi();
        for id in [
            "const(2)",
            "exp_decay",
            "gauss",
            "power(-0.5)",
            "min_power(2)",
            "ball_power(0.3)",
            "exp_ball",
            "stretched_exp(0.5)",
            "one_plus_norm",
            "indicator_ball_power(0.5, 2)",
            "sharpness_delta(0, 1, 1, 0.1)",
            "classic_delta(0, 1, 0.1)",
            "aniso_gauss",
            "tilted_exp",
        ] {
            let f = TestFunction::parse(id, &k).unwrap_or_else(|e| panic!("{id}: {e}"));
            assert_eq!(f.id(), id);
        }
        assert!(TestFunction::parse("nope", &k).is_err());
        assert!(TestFunction::parse("power(1, 2)", &k).is_err());
        assert!(TestFunction::parse("power(x)", &k).is_err());
        assert!(TestFunction::parse("aniso_gauss", &Space::HalfLine).is_err());
    }

    #[test]
    fn eval_and_support() {
        let k = Space::heisenberg_koranyi();
        let f = TestFunction::parse("indicator_ball_power(1, 2)", &k).unwrap();
        let inside = GroupPoint::new(vec![1.0, 0.0, 0.0]);
        let outside = GroupPoint::new(vec![3.0, 0.0, 0.0]);
        let vol = k.ball_volume(1.0).unwrap();
        assert!(rel(f.eval(&k, &inside).unwrap(), vol) < 1e-12);
        assert_eq!(f.eval(&k, &outside).unwrap(), 0.0);
        // The mean over a ball reaching outside the support is zero.
        let c = cfg();
        assert_eq!(geometric_mean(&k, &f, 3.0, &c).unwrap(), 0.0);
        assert!(geometric_mean(&k, &f, 1.5, &c).unwrap() > 0.0);
        assert_eq!(conjugate_lcl_mean(&k, &f, 1.0, 1.0, &c).unwrap(), 0.0);
    }

    #[test]
    fn log_integrability_check() {
        let c = cfg();
        let line = Space::real_line();
        assert!(TestFunction::parse("power(-3)", &line)
            .unwrap()
            .validate_log_integrable(&line, &c)
            .is_ok());
        let bad = TestFunction::radial_log("exp(1/r)", |y| (-y).exp());
        assert!(bad.validate_log_integrable(&line, &c).is_err());
    }

    #[test]
    fn dilated_and_scaled() {
        let c = cfg();
        let k = Space::heisenberg_koranyi();
        let f = TestFunction::parse("exp_decay", &k).unwrap();
        let f2 = f.dilated(&k, 2.0).unwrap();
        let a = lcl_mean(&k, &f2, 0.5, 3.0, &c).unwrap();
        let b = lcl_mean(&k, &f, 0.5, 1.5, &c).unwrap();
        assert!(rel(a, b) < 1e-10);
        let g = f.scaled(3.0).unwrap();
        assert!(rel(geometric_mean(&k, &g, 1.0, &c).unwrap(), 3.0 * geometric_mean(&k, &f, 1.0, &c).unwrap()) < 1e-12);
        assert!(f.scaled(0.0).is_err());
        assert!(f.dilated(&k, -1.0).is_err());
    }
}
