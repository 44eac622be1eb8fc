//! Verifiers for the Levin-Cochran-Lee family, the two-weight Hardy
//! inequality and their conjugates, plus the supremum functionals
//! `D_Q`, `D̃_Q` and `A_Q` that control the constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{GroupLaw, NormKind, Space};
use crate::operators::{
    integrate_log_profile, ln_weighted_lp_integral, LogIntegral, MeanOperator, Profile, SphereAverager,
    Support, TestFunction, Weight,
};
use crate::quadrature::{integrate_semi_infinite, PolarSample, QuadratureConfig, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(alias = "levin2_1d")]
    Levin2_1D,
    #[serde(alias = "levin1_1d")]
    Levin1_1D,
    #[serde(alias = "euclidean_ball")]
    EuclideanBall,
    #[serde(alias = "hardy_two_weight")]
    HardyTwoWeight,
    #[serde(alias = "general_lcl")]
    GeneralLCL,
    #[serde(alias = "power_lcl")]
    PowerLCL,
    #[serde(alias = "conjugate_general_lcl")]
    ConjugateGeneralLCL,
    #[serde(alias = "conjugate_power_lcl")]
    ConjugatePowerLCL,
    #[serde(alias = "knopp")]
    Knopp,
}

impl Theorem {
    pub fn name(&self) -> &'static str {
        match self {
            Theorem::Levin2_1D => "Levin2_1D",
            Theorem::Levin1_1D => "Levin1_1D",
            Theorem::EuclideanBall => "EuclideanBall",
            Theorem::HardyTwoWeight => "HardyTwoWeight",
            Theorem::GeneralLCL => "GeneralLCL",
            Theorem::PowerLCL => "PowerLCL",
            Theorem::ConjugateGeneralLCL => "ConjugateGeneralLCL",
            Theorem::ConjugatePowerLCL => "ConjugatePowerLCL",
            Theorem::Knopp => "Knopp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_plain_theorem(s).ok_or_else(|| Error::domain(format!("unknown theorem `{s}`")))
    }

    /// The one-dimensional and Euclidean-ball forms compare against their
    /// constant directly: the reported ratio is `lhs / (C·∫f…)`, bounded by 1.
    pub fn is_normalized(&self) -> bool {
        matches!(
            self,
            Theorem::Levin2_1D | Theorem::Levin1_1D | Theorem::EuclideanBall | Theorem::Knopp
        )
    }
}

fn serde_plain_theorem(s: &str) -> Option<Theorem> {
    let all = [
        Theorem::Levin2_1D,
        Theorem::Levin1_1D,
        Theorem::EuclideanBall,
        Theorem::HardyTwoWeight,
        Theorem::GeneralLCL,
        Theorem::PowerLCL,
        Theorem::ConjugateGeneralLCL,
        Theorem::ConjugatePowerLCL,
        Theorem::Knopp,
    ];
    let key = s.replace('_', "").to_ascii_lowercase();
    all.into_iter()
        .find(|t| t.name().replace('_', "").to_ascii_lowercase() == key)
}

#[derive(Clone, Debug)]
pub struct InequalityCase {
    pub theorem: Theorem,
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub space: Space,
    pub u: Weight,
    pub v: Weight,
    pub f: TestFunction,
    pub cfg: QuadratureConfig,
}

impl InequalityCase {
    /// A case with power weights `u = |B|^a`, `v = |B|^b`.
    #[allow(clippy::too_many_arguments)]
    pub fn power(
        theorem: Theorem,
        space: Space,
        p: f64,
        q: f64,
        a: f64,
        b: f64,
        eps: f64,
        f: TestFunction,
    ) -> Self {
        Self {
            theorem,
            p,
            q,
            a,
            b,
            eps,
            space,
            u: Weight::BallPower(a),
            v: Weight::BallPower(b),
            f,
            cfg: QuadratureConfig::default(),
        }
    }

    /// `f(t) = e^{-t}` on the half-line with `a = 0`, `ε = 1`.
    pub fn knopp() -> Self {
        let space = Space::HalfLine;
        let f = TestFunction::parse("exp_decay", &space).expect("catalog");
        Self::power(Theorem::Knopp, space, 1.0, 1.0, 0.0, 0.0, 1.0, f)
    }

    pub fn with_test_function(&self, f: TestFunction) -> Self {
        Self { f, ..self.clone() }
    }

    /// Checks the hypotheses; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let t = self.theorem;
        for (name, x) in [("p", self.p), ("q", self.q), ("epsilon", self.eps)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::domain(format!("`{name}` must be a positive number, got {x}")));
            }
        }
        for (name, x) in [("a", self.a), ("b", self.b)] {
            if !x.is_finite() {
                return Err(Error::domain(format!("`{name}` must be finite")));
            }
        }
        if self.p > self.q {
            return Err(Error::domain(format!(
                "`p` = {} must not exceed `q` = {}",
                self.p, self.q
            )));
        }
        if t == Theorem::HardyTwoWeight && self.p <= 1.0 {
            return Err(Error::domain(format!("`p` = {} must exceed 1 for the Hardy inequality", self.p)));
        }
        let one_d = matches!(t, Theorem::Levin2_1D | Theorem::Levin1_1D | Theorem::Knopp);
        if one_d && !self.space.is_half_line() {
            return Err(Error::domain("`group`: one-dimensional inequalities live on the half-line"));
        }
        if !one_d && self.space.is_half_line() && t != Theorem::PowerLCL && t != Theorem::ConjugatePowerLCL {
            return Err(Error::domain("`group`: this inequality needs a homogeneous group"));
        }
        if t == Theorem::EuclideanBall {
            let norm = self.space.require_group("EuclideanBall")?;
            let g = norm.group();
            let iso = g.law() == GroupLaw::Abelian && g.dilation_exponents().iter().all(|v| *v == 1.0);
            if !iso || norm.kind() != NormKind::EuclideanHomogeneous {
                return Err(Error::domain(
                    "`group`/`norm`: the Euclidean ball inequality needs R^n with the Euclidean norm",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem: Theorem,
    pub test_function: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub lower_const: Option<f64>,
    pub upper_const: f64,
    /// `D_Q`, `D̃_Q` or `A_Q`, when the bound depends on one.
    pub functional_value: Option<f64>,
    /// Whether `ratio` already includes the constant (bound 1) or is
    /// compared with `upper_const`.
    pub normalized: bool,
    pub pass: bool,
    pub err_budget: f64,
    pub lhs_rel_err: f64,
    pub rhs_rel_err: f64,
    /// The constant the inequality is claimed to be sharp for, if any.
    pub sharpness_target: Option<f64>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    /// The bound `ratio` is compared against.
    pub fn bound(&self) -> f64 {
        if self.normalized {
            1.0
        } else {
            self.upper_const
        }
    }
}

pub(crate) struct Sides {
    pub ln_lhs: f64,
    pub lhs_rel: f64,
    pub ln_rhs: f64,
    pub rhs_rel: f64,
}

#[allow(clippy::too_many_arguments)]
fn report(
    case: &InequalityCase,
    sides: Sides,
    upper: f64,
    lower: Option<f64>,
    functional: Option<f64>,
    target: Option<f64>,
    notes: Vec<String>,
) -> VerificationReport {
    let normalized = case.theorem.is_normalized();
    let ln_norm = if normalized { upper.ln() } else { 0.0 };
    let ln_rhs = sides.ln_rhs + ln_norm;
    let ratio = if sides.ln_lhs == f64::NEG_INFINITY && sides.ln_rhs == f64::NEG_INFINITY {
        0.0
    } else {
        (sides.ln_lhs - ln_rhs).exp()
    };
    let lhs_rel_err = sides.lhs_rel / case.q;
    let rhs_rel_err = sides.rhs_rel / case.p;
    let err_budget = 3.0 * (lhs_rel_err + rhs_rel_err) + case.cfg.rel_tol;
    let bound = if normalized { 1.0 } else { upper };
    VerificationReport {
        theorem: case.theorem,
        test_function: case.f.id().to_string(),
        lhs: sides.ln_lhs.exp(),
        rhs: ln_rhs.exp(),
        ratio,
        lower_const: lower,
        upper_const: upper,
        functional_value: functional,
        normalized,
        pass: ratio.is_finite() && ratio <= bound * (1.0 + err_budget),
        err_budget,
        lhs_rel_err,
        rhs_rel_err,
        sharpness_target: target,
        notes,
    }
}

/// Both sides of an exponential-mean inequality:
/// `(∫ M(|x|)^q u)^{1/q}` and `(∫ f^p v)^{1/p}` in logs.
pub(crate) fn mean_sides(case: &InequalityCase, eps: f64, conjugate: bool, u: &Weight, v: &Weight) -> Result<Sides> {
    let space = &case.space;
    let cfg = &case.cfg;
    let inner = cfg.inner();
    let op = MeanOperator::new(space, &case.f, eps, conjugate, &inner, cfg.nested_mc_samples)?;
    let q = case.q;
    let u_profile = WeightProfile::new(space, u, cfg)?;
    let what = if conjugate { "left side (conjugate mean)" } else { "left side" };
    let lhs = integrate_log_profile(space, what, case.f.log_breaks(), cfg, |y| {
        let m = op.ln_mean(y)?;
        if m.ln == f64::NEG_INFINITY {
            return Ok((m.ln, 0.0));
        }
        let (lu, eu) = u_profile.ln(y)?;
        Ok((q * m.ln + lu, q * m.err + eu))
    })?;
    let rhs = ln_weighted_lp_integral(space, &case.f, v, case.p, cfg)
        .map_err(|e| rename_divergence(e, "right side"))?;
    if rhs.ln == f64::INFINITY {
        return Err(Error::divergent("right side", "inequality vacuous"));
    }
    Ok(Sides {
        ln_lhs: lhs.ln / q,
        lhs_rel: lhs.rel_err,
        ln_rhs: rhs.ln / case.p,
        rhs_rel: rhs.rel_err,
    })
}

fn rename_divergence(e: Error, side: &str) -> Error {
    match e {
        Error::Divergent { detail, .. } => Error::divergent(side, format!("inequality vacuous: {detail}")),
        other => other,
    }
}

/// `ln u_1(r)`, the log of the spherical average of a weight.
pub(crate) struct WeightProfile<'a> {
    space: &'a Space,
    weight: &'a Weight,
    sample: Option<PolarSample>,
}

impl<'a> WeightProfile<'a> {
    pub fn new(space: &'a Space, weight: &'a Weight, cfg: &QuadratureConfig) -> Result<Self> {
        let sample = if weight.is_radial() {
            None
        } else {
            let norm = space.require_group("general weights")?;
            Some(PolarSample::draw(norm, cfg.nested_mc_samples, cfg.seed, "sphere_average")?)
        };
        Ok(Self { space, weight, sample })
    }

    pub fn ln(&self, y: f64) -> Result<(f64, f64)> {
        match &self.sample {
            None => Ok((self.weight.ln_radial(self.space, y).expect("radial"), 0.0)),
            Some(sample) => {
                let norm = self.space.norm().expect("group");
                let avg = SphereAverager {
                    space: self.space,
                    norm,
                    sample,
                };
                avg.ln_mean(y, &|x| self.weight.ln_at_coords(self.space, x))
            }
        }
    }
}

fn check_constant_case(case: &InequalityCase, theorem: &[Theorem]) -> Result<()> {
    if !theorem.contains(&case.theorem) {
        return Err(Error::domain(format!(
            "verifier for {:?} called with a {} case",
            theorem,
            case.theorem.name()
        )));
    }
    case.validate()
}

const PROSE_NOTE: &str = "the statement's prose names exp(a/eps) as best constant; \
                          the displayed constant exp((a+1)/eps) is the one checked";

/// `∫_0^∞ M_ε(x) x^a dx ≤ e^{(a+1)/ε} ∫_0^∞ x^a f(x) dx` on the half-line.
pub fn verify_levin_1d(case: &InequalityCase) -> Result<VerificationReport> {
    check_constant_case(case, &[Theorem::Levin2_1D, Theorem::Knopp])?;
    one_d(case, false)
}

/// The complementary form with the tail mean
/// `exp(ε x^ε ∫_x^∞ t^{-ε-1} log f(t) dt)`.
pub fn verify_love_1d(case: &InequalityCase) -> Result<VerificationReport> {
    check_constant_case(case, &[Theorem::Levin1_1D])?;
    one_d(case, true)
}

fn one_d(case: &InequalityCase, conjugate: bool) -> Result<VerificationReport> {
    let one = InequalityCase {
        p: 1.0,
        q: 1.0,
        ..case.clone()
    };
    let w = Weight::BallPower(case.a);
    let sides = mean_sides(&one, case.eps, conjugate, &w, &w)?;
    let c = ((case.a + 1.0) / case.eps).exp();
    let mut notes = vec![PROSE_NOTE.to_string()];
    if conjugate {
        notes.push(format!(
            "tail-mean form; its own sharp constant is exp(-(a+1)/eps) = {:.6}",
            (-(case.a + 1.0) / case.eps).exp()
        ));
    }
    Ok(report(&one, sides, c, None, None, Some(c), notes))
}

/// The ball-mean inequality on `R^n` with weight `|B(0,|x|)|^a` on both sides.
pub fn verify_euclidean_ball(case: &InequalityCase) -> Result<VerificationReport> {
    check_constant_case(case, &[Theorem::EuclideanBall])?;
    let one = InequalityCase {
        p: 1.0,
        q: 1.0,
        ..case.clone()
    };
    let w = Weight::BallPower(case.a);
    let sides = mean_sides(&one, case.eps, false, &w, &w)?;
    let c = ((case.a + 1.0) / case.eps).exp();
    Ok(report(&one, sides, c, None, None, Some(c), Vec::new()))
}

/// `|p(a+1) - q(b+1)| ≤ 1e-12·max(1, |p(a+1)|)`.
pub fn check_balance(p: f64, q: f64, a: f64, b: f64) -> bool {
    let l = p * (a + 1.0);
    (l - q * (b + 1.0)).abs() <= 1e-12 * l.abs().max(1.0)
}

pub(crate) fn power_prefactor(case: &InequalityCase) -> f64 {
    let (p, q, e) = (case.p, case.q, case.eps);
    (p / q).powf(1.0 / q) * e.powf(1.0 / p - 1.0 / q)
}

fn require_balance(case: &InequalityCase) -> Result<()> {
    if check_balance(case.p, case.q, case.a, case.b) {
        Ok(())
    } else {
        Err(Error::Unbalanced {
            lhs: case.p * (case.a + 1.0),
            rhs: case.q * (case.b + 1.0),
        })
    }
}

/// The power-weight inequality with the ε-weighted ball mean. Unbalanced
/// exponents have no finite constant and return [`Error::Unbalanced`].
pub fn verify_power_lcl(case: &InequalityCase) -> Result<VerificationReport> {
    check_constant_case(case, &[Theorem::PowerLCL])?;
    require_balance(case)?;
    let (u, v) = (Weight::BallPower(case.a), Weight::BallPower(case.b));
    let sides = mean_sides(case, case.eps, false, &u, &v)?;
    let upper = power_prefactor(case) * ((case.b + 1.0) / (case.eps * case.p)).exp();
    let lower = upper * (-1.0 / case.p).exp();
    let dq = ((1.0 / case.p) * ((case.b + 1.0) / case.eps - 1.0)).exp();
    let target = (case.p == case.q).then_some(upper);
    Ok(report(case, sides, upper, Some(lower), Some(dq), target, Vec::new()))
}

/// The conjugate power-weight inequality (complement mean).
pub fn verify_conjugate_power(case: &InequalityCase) -> Result<VerificationReport> {
    check_constant_case(case, &[Theorem::ConjugatePowerLCL])?;
    require_balance(case)?;
    let (u, v) = (Weight::BallPower(case.a), Weight::BallPower(case.b));
    let sides = mean_sides(case, case.eps, true, &u, &v)?;
    let upper = power_prefactor(case) * (-(case.b + 1.0) / (case.eps * case.p)).exp();
    let lower = upper * (-1.0 / case.p).exp();
    let target = (case.p == case.q && case.a == case.b).then_some(upper);
    Ok(report(case, sides, upper, Some(lower), None, target, Vec::new()))
}

/// Geometric-mean inequality with general weights, bound `(p/q)^{1/q} e^{1/p} D_Q`.
pub fn verify_general_lcl(case: &InequalityCase) -> Result<VerificationReport> {
    check_constant_case(case, &[Theorem::GeneralLCL])?;
    let grid = RadiusGrid::default();
    let dq = compute_dq(&case.space, &case.u, &case.v, case.p, case.q, &grid, &case.cfg)?;
    if dq.unbounded || !dq.value.is_finite() {
        return Err(Error::Inadmissible(format!(
            "D_Q is unbounded (largest grid value {:e} at r = {:e})",
            dq.value, dq.argmax_radius
        )));
    }
    let sides = mean_sides(case, 1.0, false, &case.u, &case.v)?;
    let upper = (case.p / case.q).powf(1.0 / case.q) * (1.0 / case.p).exp() * dq.value;
    Ok(report(case, sides, upper, None, Some(dq.value), None, Vec::new()))
}

/// Complement-mean inequality with radial weights, bound
/// `(p/q)^{1/q} e^{1/p} D̃_Q`.
pub fn verify_conjugate_general(case: &InequalityCase) -> Result<VerificationReport> {
    check_constant_case(case, &[Theorem::ConjugateGeneralLCL])?;
    let grid = RadiusGrid::default();
    let dq = compute_dq_tilde(&case.space, &case.u, &case.v, case.eps, case.p, case.q, &grid, &case.cfg)?;
    if dq.unbounded || !dq.value.is_finite() {
        return Err(Error::Inadmissible(format!(
            "D~_Q is unbounded (largest grid value {:e} at r = {:e})",
            dq.value, dq.argmax_radius
        )));
    }
    let sides = mean_sides(case, case.eps, true, &case.u, &case.v)?;
    let upper = (case.p / case.q).powf(1.0 / case.q) * (1.0 / case.p).exp() * dq.value;
    Ok(report(case, sides, upper, None, Some(dq.value), None, Vec::new()))
}

/// `(∫_G (∫_{B(0,|x|)} f)^q u)^{1/q} ≤ C (∫_G f^p v)^{1/p}` with
/// `C ≤ A_Q (p/(p-1))^{(p-1)/p} p^{1/q}`.
pub fn verify_hardy(case: &InequalityCase) -> Result<VerificationReport> {
    check_constant_case(case, &[Theorem::HardyTwoWeight])?;
    let (p, q) = (case.p, case.q);
    let grid = RadiusGrid::default();
    let aq = compute_aq(&case.space, &case.u, &case.v, p, q, &grid, &case.cfg)?;
    let upper = aq.value * (p / (p - 1.0)).powf((p - 1.0) / p) * p.powf(1.0 / q);
    let space = &case.space;
    let cfg = &case.cfg;
    let u_profile = WeightProfile::new(space, &case.u, cfg)?;
    let inner = cfg.inner();
    let ball = BallIntegral::new(space, &case.f, &inner, cfg.nested_mc_samples)?;
    let lhs = integrate_log_profile(space, "left side", case.f.log_breaks(), cfg, |y| {
        let (lh, eh) = ball.ln(y)?;
        if lh == f64::NEG_INFINITY {
            return Ok((lh, 0.0));
        }
        let (lu, eu) = u_profile.ln(y)?;
        Ok((q * lh + lu, q * eh + eu))
    })?;
    let rhs = ln_weighted_lp_integral(space, &case.f, &case.v, p, cfg).map_err(|e| rename_divergence(e, "right side"))?;
    let sides = Sides {
        ln_lhs: lhs.ln / q,
        lhs_rel: lhs.rel_err,
        ln_rhs: rhs.ln / p,
        rhs_rel: rhs.rel_err,
    };
    let mut notes = Vec::new();
    if aq.unbounded {
        notes.push("A_Q grows toward a grid endpoint".to_string());
    }
    Ok(report(case, sides, upper, None, Some(aq.value), None, notes))
}

/// Dispatches on the case's theorem.
pub fn verify(case: &InequalityCase) -> Result<VerificationReport> {
    match case.theorem {
        Theorem::Levin2_1D | Theorem::Knopp => verify_levin_1d(case),
        Theorem::Levin1_1D => verify_love_1d(case),
        Theorem::EuclideanBall => verify_euclidean_ball(case),
        Theorem::HardyTwoWeight => verify_hardy(case),
        Theorem::GeneralLCL => verify_general_lcl(case),
        Theorem::PowerLCL => verify_power_lcl(case),
        Theorem::ConjugateGeneralLCL => verify_conjugate_general(case),
        Theorem::ConjugatePowerLCL => verify_conjugate_power(case),
    }
}

/// `ln ∫_{B(0, e^y)} f`.
struct BallIntegral<'a> {
    space: &'a Space,
    f: &'a TestFunction,
    cfg: QuadratureConfig,
    sample: Option<PolarSample>,
}

impl<'a> BallIntegral<'a> {
    fn new(space: &'a Space, f: &'a TestFunction, cfg: &QuadratureConfig, n: usize) -> Result<Self> {
        let sample = match f.profile() {
            Profile::Radial(_) => None,
            Profile::General(_) => {
                let norm = space.require_group("general test functions")?;
                Some(PolarSample::draw(norm, n, cfg.seed, "ball_mean")?)
            }
        };
        Ok(Self {
            space,
            f,
            cfg: *cfg,
            sample,
        })
    }

    fn ln(&self, y: f64) -> Result<(f64, f64)> {
        if self.f.support() == Support::Empty {
            return Ok((f64::NEG_INFINITY, 0.0));
        }
        let q = self.space.homogeneous_dim();
        match self.f.profile() {
            Profile::Radial(g) => {
                let ln_s = self.space.sphere_measure().value.ln();
                let r = ln_half_integral(|t| g(t) + q * t, y, false, self.f.log_breaks(), &self.cfg)
                    .map_err(|e| rename_divergence(e, "left side (ball integral)"))?;
                Ok((ln_s + r.ln, r.rel_err))
            }
            Profile::General(g) => {
                let norm = self.space.norm().expect("group");
                let sample = self.sample.as_ref().expect("drawn");
                let r = y.exp();
                let mut point = vec![0.0; norm.group().ambient_dim()];
                let logs: Vec<f64> = (0..sample.len())
                    .map(|j| {
                        sample.ball_point(norm, j, r, &mut point);
                        g(&point)
                    })
                    .collect();
                let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if m == f64::NEG_INFINITY {
                    return Ok((m, 0.0));
                }
                let stats = sample.mean_of(|j| (logs[j] - m).exp())?;
                Ok((
                    self.space.ln_ball_volume(y) + m + stats.mean().ln(),
                    stats.std_err() / stats.mean(),
                ))
            }
        }
    }
}

/// `ln ∫_{y0}^{∞} e^{ln_h}` (`upward`) or `ln ∫_{-∞}^{y0} e^{ln_h}`, shifted by
/// the largest probed value. Divergence is reported as an error.
pub(crate) fn ln_half_integral<H: Fn(f64) -> f64>(
    ln_h: H,
    y0: f64,
    upward: bool,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<LogIntegral> {
    let dir = if upward { 1.0 } else { -1.0 };
    let at = |s: f64| y0 + dir * s;
    let mut shift = f64::NEG_INFINITY;
    // Fine steps near y0, then geometric ones so a peak far from y0 is found.
    let reach = y0.abs() + 100.0;
    let probes = (0..=80)
        .map(|k| 0.5 * k as f64)
        .chain(std::iter::successors(Some(44.0), |s| Some(s * 1.1)).take_while(|s| *s < reach));
    for s in probes {
        let v = ln_h(at(s));
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::divergent("half-line integral", format!("integrand not finite near e^{}", at(s))));
        }
        shift = shift.max(v);
    }
    if shift == f64::NEG_INFINITY {
        return Ok(LogIntegral {
            ln: f64::NEG_INFINITY,
            rel_err: 0.0,
        });
    }
    // The log-integrand must eventually fall at a linear rate.
    let (s1, s2) = (reach, 2.0 * reach);
    let (v1, v2) = (ln_h(at(s1)), ln_h(at(s2)));
    if v1 > f64::NEG_INFINITY && !(v2 < v1 - 1e-3 * (s2 - s1)) {
        return Err(Error::divergent(
            "half-line integral",
            format!("log-integrand changes at rate {:.3} per unit of log-radius in the tail", (v2 - v1) / (s2 - s1)),
        ));
    }
    let s_breaks: Vec<f64> = breaks.iter().map(|b| dir * (b - y0)).filter(|s| *s > 0.0).collect();
    let mut pts = s_breaks;
    pts.sort_by(f64::total_cmp);
    let tol = Tolerance::scale_free(cfg);
    let mut attempt = 0;
    let res = loop {
        // A peak the probes missed shows up as a value far above the shift;
        // restart from it.
        let above = std::cell::Cell::new(f64::NEG_INFINITY);
        let h = |s: f64| -> Result<f64> {
            let v = ln_h(at(s)) - shift;
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::NonFinite { at: at(s).exp() });
            }
            if v > 600.0 {
                above.set(above.get().max(v + shift));
                return Err(Error::NonFinite { at: at(s).exp() });
            }
            Ok(v.exp())
        };
        let res = if pts.is_empty() {
            integrate_semi_infinite(h, tol, cfg)
        } else {
            crate::quadrature::integrate_semi_infinite_with_breaks(h, &pts, tol, cfg)
        };
        attempt += 1;
        if res.is_err() && above.get() > shift && attempt < 8 {
            shift = above.get();
            continue;
        }
        break res;
    }
    .map_err(|e| match e {
        Error::NonConvergence { .. } | Error::NonFinite { .. } => Error::divergent("half-line integral", e.to_string()),
        other => other,
    })?;
    if !(res.value > 0.0) {
        return Ok(LogIntegral {
            ln: f64::NEG_INFINITY,
            rel_err: 0.0,
        });
    }
    Ok(LogIntegral {
        ln: shift + res.value.ln(),
        rel_err: res.rel_error(),
    })
}

// ---------------------------------------------------------------------------
// Supremum functionals

/// Radii on which suprema over `x ∈ G` are evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusGrid {
    pub radii: Vec<f64>,
}

impl Default for RadiusGrid {
    /// 97 log-spaced radii on `[1e-4, 1e4]`.
    fn default() -> Self {
        Self::log_spaced(1e-4, 1e4, 97)
    }
}

impl RadiusGrid {
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Self {
        let (a, b) = (lo.ln(), hi.ln());
        let radii = (0..n)
            .map(|i| {
                if n == 1 {
                    lo
                } else {
                    (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                }
            })
            .collect();
        Self { radii }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    /// Largest value on the grid (`+∞` when a factor diverges).
    pub value: f64,
    pub argmax_radius: f64,
    /// Set when the values grow monotonically toward a grid endpoint, or a
    /// factor diverges.
    pub unbounded: bool,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

fn summarize(radii: &[f64], values: Vec<f64>) -> FunctionalValue {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.total_cmp(&values[best]) == std::cmp::Ordering::Greater {
            best = i;
        }
    }
    let n = values.len();
    let growing = |idx: &[usize]| {
        idx.windows(2).all(|w| {
            let (a, b) = (values[w[0]], values[w[1]]);
            b > a * (1.0 + 1e-6)
        })
    };
    let unbounded = values[best] == f64::INFINITY
        || (n >= 4
            && ((best == n - 1 && growing(&[n - 4, n - 3, n - 2, n - 1])) || (best == 0 && growing(&[3, 2, 1, 0]))));
    FunctionalValue {
        value: values[best],
        argmax_radius: radii[best],
        unbounded,
        radii: radii.to_vec(),
        values,
    }
}

/// `sup_r |B_r|^{1/q-1/p} u_1(r)^{1/q} [exp(|B_r|^{-1}∫_{B_r} log(1/v))]^{1/p}`.
pub fn compute_dq(
    space: &Space,
    u: &Weight,
    v: &Weight,
    p: f64,
    q: f64,
    grid: &RadiusGrid,
    cfg: &QuadratureConfig,
) -> Result<FunctionalValue> {
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::domain("p and q must be positive"));
    }
    let u_profile = WeightProfile::new(space, u, cfg)?;
    let v_fn = weight_as_function(space, v)?;
    let gm = MeanOperator::new(space, &v_fn, 1.0, false, cfg, cfg.mc_samples)?;
    let mut values = Vec::with_capacity(grid.radii.len());
    for &r in &grid.radii {
        let y = r.ln();
        let (lu, _) = u_profile.ln(y)?;
        let lv = gm.ln_mean(y).map_err(|e| match e {
            Error::NonConvergence { .. } | Error::NonFinite { .. } => {
                Error::divergent("D_Q", format!("log(1/v) is not integrable over B(0, {r}): {e}"))
            }
            other => other,
        })?;
        let ln_d = (1.0 / q - 1.0 / p) * space.ln_ball_volume(y) + lu / q - lv.ln / p;
        values.push(if lu == f64::NEG_INFINITY { 0.0 } else { ln_d.exp() });
    }
    Ok(summarize(&grid.radii, values))
}

fn weight_as_function(space: &Space, w: &Weight) -> Result<TestFunction> {
    Ok(match w {
        Weight::General(g) => {
            let g = g.clone();
            TestFunction::general_log("v", move |x| g(x))
        }
        other => {
            let other = other.clone();
            let space = space.clone();
            TestFunction::radial_log("v", move |y| other.ln_radial(&space, y).expect("radial"))
        }
    })
}

/// The `D_Q` functional of the transformed weights
/// `ũ(s) = u(|s|^{-1/ε}) ε^{-1} |s|^{-Q(1+1/ε)}`, and `ṽ` likewise.
#[allow(clippy::too_many_arguments)]
pub fn compute_dq_tilde(
    space: &Space,
    u: &Weight,
    v: &Weight,
    eps: f64,
    p: f64,
    q: f64,
    grid: &RadiusGrid,
    cfg: &QuadratureConfig,
) -> Result<FunctionalValue> {
    if !(u.is_radial() && v.is_radial()) {
        return Err(Error::domain("the transformed functional is defined for radial weights only"));
    }
    if !(eps > 0.0) {
        return Err(Error::domain("epsilon must be positive"));
    }
    let transform = |w: &Weight| {
        let w = w.clone();
        let space = space.clone();
        let qd = space.homogeneous_dim();
        Weight::RadialGeneral(std::sync::Arc::new(move |y| {
            w.ln_radial(&space, -y / eps).expect("radial") - eps.ln() - qd * (1.0 + 1.0 / eps) * y
        }))
    };
    compute_dq(space, &transform(u), &transform(v), p, q, grid, cfg)
}

/// `sup_r (∫_{G∖B_r} u)^{1/q} (∫_{B_r} v^{1/(1-p)})^{(p-1)/p}`, radial weights.
pub fn compute_aq(
    space: &Space,
    u: &Weight,
    v: &Weight,
    p: f64,
    q: f64,
    grid: &RadiusGrid,
    cfg: &QuadratureConfig,
) -> Result<FunctionalValue> {
    if !(p > 1.0 && p <= q) {
        return Err(Error::domain(format!("A_Q needs 1 < p <= q, got p = {p}, q = {q}")));
    }
    if !(u.is_radial() && v.is_radial()) {
        return Err(Error::domain("A_Q is evaluated for radial weights"));
    }
    let qd = space.homogeneous_dim();
    let ln_s = space.sphere_measure().value.ln();
    let mut values = Vec::with_capacity(grid.radii.len());
    for &r in &grid.radii {
        let y = r.ln();
        let outer = ln_half_integral(|t| u.ln_radial(space, t).expect("radial") + qd * t, y, true, &[], cfg);
        let inner = ln_half_integral(
            |t| v.ln_radial(space, t).expect("radial") / (1.0 - p) + qd * t,
            y,
            false,
            &[],
            cfg,
        );
        let value = match (outer, inner) {
            (Ok(o), Ok(i)) => {
                if o.ln == f64::NEG_INFINITY {
                    0.0
                } else {
                    ((ln_s + o.ln) / q + (ln_s + i.ln) * (p - 1.0) / p).exp()
                }
            }
            (Err(Error::Divergent { .. }), _) | (_, Err(Error::Divergent { .. })) => f64::INFINITY,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        values.push(value);
    }
    Ok(summarize(&grid.radii, values))
}
