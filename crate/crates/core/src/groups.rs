//! Homogeneous groups, anisotropic dilations and quasi-norms.
//!
//! Two group laws are modelled: the abelian group `R^N` with arbitrary
//! positive dilation exponents and the Heisenberg group `H^1` with exponents
//! `(1, 1, 2)`. Both use Lebesgue measure, so everything the integrators need
//! from a group is its quasi-norm, its homogeneous dimension `Q` and the
//! surface measure `|S|` of the unit quasi-sphere.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupLaw {
    Abelian,
    Heisenberg,
}

/// A homogeneous group structure on `R^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    dilation_exponents: Vec<f64>,
    law: GroupLaw,
    homogeneous_dim: f64,
}

impl GroupSpec {
    /// Abelian `R^N` with dilations `D_λ x = (λ^{v_1} x_1, …, λ^{v_N} x_N)`.
    pub fn abelian(dilation_exponents: Vec<f64>) -> Result<Self> {
        if dilation_exponents.is_empty() {
            return Err(Error::domain("a group needs at least one coordinate"));
        }
        if let Some(v) = dilation_exponents
            .iter()
            .find(|v| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::domain(format!(
                "dilation exponents must be positive, got {v}"
            )));
        }
        let homogeneous_dim = dilation_exponents.iter().sum();
        Ok(Self {
            dilation_exponents,
            law: GroupLaw::Abelian,
            homogeneous_dim,
        })
    }

    /// Isotropic Euclidean space `R^n`.
    pub fn euclidean(n: usize) -> Result<Self> {
        Self::abelian(vec![1.0; n])
    }

    /// The real line with `Q = 1`.
    pub fn real_line() -> Self {
        Self::abelian(vec![1.0]).expect("valid exponents")
    }

    /// The Heisenberg group `H^1` with law
    /// `(x, y, t)(x', y', t') = (x + x', y + y', t + t' + (x y' - y x') / 2)`.
    pub fn heisenberg() -> Self {
        Self {
            dilation_exponents: vec![1.0, 1.0, 2.0],
            law: GroupLaw::Heisenberg,
            homogeneous_dim: 4.0,
        }
    }

    pub fn from_law(law: GroupLaw, dilation_exponents: Option<Vec<f64>>) -> Result<Self> {
        match law {
            GroupLaw::Abelian => Self::abelian(
                dilation_exponents
                    .ok_or_else(|| Error::domain("abelian groups need dilation exponents"))?,
            ),
            GroupLaw::Heisenberg => {
                if let Some(v) = dilation_exponents {
                    if v != [1.0, 1.0, 2.0] {
                        return Err(Error::domain(format!(
                            "the Heisenberg group has dilation exponents (1, 1, 2), got {v:?}"
                        )));
                    }
                }
                Ok(Self::heisenberg())
            }
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.dilation_exponents.len()
    }

    pub fn dilation_exponents(&self) -> &[f64] {
        &self.dilation_exponents
    }

    pub fn law(&self) -> GroupLaw {
        self.law
    }

    /// `Q = v_1 + … + v_N`.
    pub fn homogeneous_dim(&self) -> f64 {
        self.homogeneous_dim
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::domain(format!(
                "point has {} coordinates, group has dimension {}",
                x.len(),
                self.ambient_dim()
            )));
        }
        Ok(())
    }

    pub fn dilate(&self, lambda: f64, x: &GroupPoint) -> Result<GroupPoint> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        self.check_dim(&x.coords)?;
        let mut out = x.coords.clone();
        self.dilate_in_place(lambda, &mut out);
        Ok(GroupPoint::new(out))
    }

    pub(crate) fn dilate_in_place(&self, lambda: f64, x: &mut [f64]) {
        for (xi, vi) in x.iter_mut().zip(&self.dilation_exponents) {
            if *vi == 1.0 {
                *xi *= lambda;
            } else {
                *xi *= lambda.powf(*vi);
            }
        }
    }

    pub fn multiply(&self, x: &GroupPoint, y: &GroupPoint) -> Result<GroupPoint> {
        self.check_dim(&x.coords)?;
        self.check_dim(&y.coords)?;
        let mut out: Vec<f64> = x.coords.iter().zip(&y.coords).map(|(a, b)| a + b).collect();
        if self.law == GroupLaw::Heisenberg {
            let (a, b) = (&x.coords, &y.coords);
            out[2] += 0.5 * (a[0] * b[1] - a[1] * b[0]);
        }
        Ok(GroupPoint::new(out))
    }

    /// Group inverse. Both laws invert by negation.
    pub fn inverse(&self, x: &GroupPoint) -> Result<GroupPoint> {
        self.check_dim(&x.coords)?;
        Ok(GroupPoint::new(x.coords.iter().map(|c| -c).collect()))
    }

    pub fn identity(&self) -> GroupPoint {
        GroupPoint::new(vec![0.0; self.ambient_dim()])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupPoint {
    coords: Vec<f64>,
}

impl GroupPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

impl From<Vec<f64>> for GroupPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self::new(coords)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `(Σ |x_i|^{2ν/v_i})^{1/(2ν)}` with every `2ν/v_i` an even integer.
    AnisotropicLp,
    /// `((x_1² + x_2²)² + x_3²)^{1/4}`, for exponents `(1, 1, 2)`.
    Koranyi,
    /// The gauge whose unit sphere is the Euclidean unit sphere:
    /// `|x| = ρ` with `Σ x_i² ρ^{-2 v_i} = 1`. Equals the Euclidean norm
    /// when all exponents are 1.
    EuclideanHomogeneous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereMethod {
    ClosedForm,
    Reduction1D,
    MonteCarlo,
}

/// `|S|` with an error bar and the method that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereMeasure {
    pub value: f64,
    pub error: f64,
    pub method: SphereMethod,
}

/// Budget for [`QuasiNorm::compute_sphere_measure`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereBudget {
    /// Skip closed forms and reductions and always sample.
    pub force_monte_carlo: bool,
    pub max_samples: u64,
    /// Target relative standard error of the Monte Carlo path.
    pub target_rel_err: f64,
    pub seed: u64,
    /// Relative tolerance for the reduction quadratures.
    pub rel_tol: f64,
}

impl Default for SphereBudget {
    fn default() -> Self {
        Self {
            force_monte_carlo: false,
            max_samples: 20_000_000,
            target_rel_err: 1e-4,
            seed: 0x5eed,
            rel_tol: 1e-12,
        }
    }
}

pub struct QuasiNorm {
    kind: NormKind,
    group: GroupSpec,
    /// `2ν` for the anisotropic L^p gauge.
    lp_order: Option<u32>,
    /// `2ν / v_i`, even integers.
    lp_powers: Vec<i32>,
    sphere: OnceLock<SphereMeasure>,
}

impl fmt::Debug for QuasiNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuasiNorm")
            .field("kind", &self.kind)
            .field("group", &self.group)
            .field("lp_order", &self.lp_order)
            .field("sphere", &self.sphere.get())
            .finish()
    }
}

impl Clone for QuasiNorm {
    fn clone(&self) -> Self {
        let sphere = OnceLock::new();
        if let Some(s) = self.sphere.get() {
            let _ = sphere.set(*s);
        }
        Self {
            kind: self.kind,
            group: self.group.clone(),
            lp_order: self.lp_order,
            lp_powers: self.lp_powers.clone(),
            sphere,
        }
    }
}

/// Least even integer `m` such that every `m / v_i` is an even integer.
fn least_even_multiple(exponents: &[f64]) -> Option<u32> {
    (1..=5_000u32).map(|k| 2 * k).find(|&m| {
        exponents.iter().all(|v| {
            let ratio = m as f64 / v;
            let rounded = ratio.round();
            (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) && (rounded as i64) % 2 == 0
        })
    })
}

impl QuasiNorm {
    pub fn new(group: GroupSpec, kind: NormKind) -> Result<Self> {
        let (lp_order, lp_powers) = match kind {
            NormKind::AnisotropicLp => {
                let m = least_even_multiple(group.dilation_exponents()).ok_or_else(|| {
                    Error::domain(format!(
                        "no even integer 2ν makes 2ν/v_i even for exponents {:?}",
                        group.dilation_exponents()
                    ))
                })?;
                let powers = group
                    .dilation_exponents()
                    .iter()
                    .map(|v| (m as f64 / v).round() as i32)
                    .collect();
                (Some(m), powers)
            }
            NormKind::Koranyi => {
                if group.dilation_exponents() != [1.0, 1.0, 2.0] {
                    return Err(Error::domain(
                        "the Koranyi gauge needs dilation exponents (1, 1, 2)",
                    ));
                }
                (None, Vec::new())
            }
            NormKind::EuclideanHomogeneous => (None, Vec::new()),
        };
        Ok(Self {
            kind,
            group,
            lp_order,
            lp_powers,
            sphere: OnceLock::new(),
        })
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    /// `2ν` for the anisotropic L^p gauge.
    pub fn lp_order(&self) -> Option<u32> {
        self.lp_order
    }

    pub fn homogeneous_dim(&self) -> f64 {
        self.group.homogeneous_dim()
    }

    pub fn eval(&self, x: &GroupPoint) -> Result<f64> {
        self.group.check_dim(x.coords())?;
        Ok(self.eval_coords(x.coords()))
    }

    /// Evaluates the gauge without a dimension check.
    pub fn eval_coords(&self, x: &[f64]) -> f64 {
        match self.kind {
            NormKind::AnisotropicLp => {
                let m = self.lp_order.expect("set for AnisotropicLp") as f64;
                // Factor out the largest scaled coordinate to avoid overflow.
                let scale = x
                    .iter()
                    .zip(self.group.dilation_exponents())
                    .map(|(xi, vi)| xi.abs().powf(1.0 / vi))
                    .fold(0.0, f64::max);
                if scale == 0.0 {
                    return 0.0;
                }
                if !scale.is_finite() {
                    return f64::INFINITY;
                }
                let s: f64 = x
                    .iter()
                    .zip(self.group.dilation_exponents())
                    .zip(&self.lp_powers)
                    .map(|((xi, vi), k)| (xi.abs() / scale.powf(*vi)).powi(*k))
                    .sum();
                scale * s.powf(1.0 / m)
            }
            NormKind::Koranyi => {
                let rho2 = x[0] * x[0] + x[1] * x[1];
                (rho2 * rho2 + x[2] * x[2]).sqrt().sqrt()
            }
            NormKind::EuclideanHomogeneous => euclidean_homogeneous(x, self.group.dilation_exponents()),
        }
    }

    /// Half-widths of a coordinate box containing the unit quasi-ball.
    pub fn unit_box(&self) -> Vec<f64> {
        // Each kind bounds every coordinate by 1 on the unit ball.
        vec![1.0; self.group.ambient_dim()]
    }

    /// `|S|`, computed on first use with the default budget and cached.
    pub fn sphere_measure(&self) -> SphereMeasure {
        *self.sphere.get_or_init(|| {
            match self.compute_sphere_measure(&SphereBudget::default()) {
                Ok(s) => s,
                Err(Error::BudgetExhausted { estimate, error }) => SphereMeasure {
                    value: estimate,
                    error,
                    method: SphereMethod::MonteCarlo,
                },
                Err(e) => panic!("unit sphere measure of {:?} failed: {e}", self.kind),
            }
        })
    }

    /// `|S| = Q·|B(0,1)|`, preferring a closed form, then a quadrature
    /// reduction, then Monte Carlo over the bounding box.
    pub fn compute_sphere_measure(&self, budget: &SphereBudget) -> Result<SphereMeasure> {
        let q = self.homogeneous_dim();
        let scale = |m: SphereMeasure| SphereMeasure {
            value: q * m.value,
            error: q * m.error,
            method: m.method,
        };
        if !budget.force_monte_carlo {
            if let Some(vol) = self.unit_ball_volume_exact(budget.rel_tol)? {
                return Ok(scale(vol));
            }
        }
        match self.unit_ball_volume_mc(budget) {
            Ok(m) => Ok(scale(m)),
            Err(Error::BudgetExhausted { estimate, error }) => Err(Error::BudgetExhausted {
                estimate: q * estimate,
                error: q * error,
            }),
            Err(e) => Err(e),
        }
    }

    fn unit_ball_volume_exact(&self, rel_tol: f64) -> Result<Option<SphereMeasure>> {
        let n = self.group.ambient_dim();
        match self.kind {
            NormKind::EuclideanHomogeneous => Ok(Some(SphereMeasure {
                value: euclidean_unit_ball_volume(n),
                error: 0.0,
                method: SphereMethod::ClosedForm,
            })),
            NormKind::Koranyi => {
                // Slices at height t are discs of area π·sqrt(1 - t²).
                let cfg = reduction_config(rel_tol);
                let res = quadrature::integrate_interval(
                    |t| Ok(PI * (1.0 - t * t).max(0.0).sqrt()),
                    -1.0,
                    1.0,
                    &cfg,
                )?;
                Ok(Some(SphereMeasure {
                    value: res.value,
                    error: res.error_estimate,
                    method: SphereMethod::Reduction1D,
                }))
            }
            NormKind::AnisotropicLp if n <= 3 => {
                let cfg = reduction_config(rel_tol);
                let powers: Vec<f64> = self.lp_powers.iter().map(|k| *k as f64).collect();
                let (value, error) = lp_sublevel_volume(1.0, &powers, &cfg)?;
                let method = if n == 1 {
                    SphereMethod::ClosedForm
                } else {
                    SphereMethod::Reduction1D
                };
                Ok(Some(SphereMeasure {
                    value,
                    error,
                    method,
                }))
            }
            NormKind::AnisotropicLp => Ok(None),
        }
    }

    fn unit_ball_volume_mc(&self, budget: &SphereBudget) -> Result<SphereMeasure> {
        let half = self.unit_box();
        let box_volume: f64 = half.iter().map(|h| 2.0 * h).product();
        let mut rng = quadrature::rng_stream(budget.seed, "sphere_measure");
        let mut x = vec![0.0; half.len()];
        let chunk = 100_000u64;
        let (mut n, mut hits) = (0u64, 0u64);
        let estimate = |n: u64, hits: u64| {
            let p = hits as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            (box_volume * p, box_volume * se)
        };
        while n < budget.max_samples {
            let todo = chunk.min(budget.max_samples - n);
            for _ in 0..todo {
                for (xi, h) in x.iter_mut().zip(&half) {
                    *xi = rng.gen_range(-*h..*h);
                }
                if self.eval_coords(&x) < 1.0 {
                    hits += 1;
                }
            }
            n += todo;
            let (value, error) = estimate(n, hits);
            if hits > 0 && error <= budget.target_rel_err * value {
                return Ok(SphereMeasure {
                    value,
                    error,
                    method: SphereMethod::MonteCarlo,
                });
            }
        }
        if n == 0 || hits == 0 {
            return Err(Error::LowAcceptance { rate: 0.0 });
        }
        let (estimate, error) = estimate(n, hits);
        Err(Error::BudgetExhausted { estimate, error })
    }

    /// Lebesgue measure of `{|x| < r}`, i.e. `r^Q |S| / Q`.
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("radius must be non-negative, got {r}")));
        }
        let q = self.homogeneous_dim();
        Ok(r.powf(q) * self.sphere_measure().value / q)
    }
}

fn reduction_config(rel_tol: f64) -> QuadratureConfig {
    QuadratureConfig {
        rel_tol,
        abs_tol: 1e-15,
        max_subdivisions: 4_000,
        ..QuadratureConfig::default()
    }
}

/// Volume of `{Σ |x_i|^{k_i} < s}` by nested quadrature over the last
/// coordinate.
fn lp_sublevel_volume(s: f64, powers: &[f64], cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    if s <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let (last, rest) = powers.split_last().expect("non-empty");
    if rest.is_empty() {
        return Ok((2.0 * s.powf(1.0 / last), 0.0));
    }
    let upper = s.powf(1.0 / last);
    let inner_cfg = QuadratureConfig {
        rel_tol: cfg.rel_tol * 1e-2,
        ..*cfg
    };
    let res = quadrature::integrate_interval(
        |t| Ok(lp_sublevel_volume(s - t.powf(*last), rest, &inner_cfg)?.0),
        0.0,
        upper,
        cfg,
    )?;
    Ok((2.0 * res.value, 2.0 * res.error_estimate))
}

/// Volume of the Euclidean unit ball in `R^n`.
pub fn euclidean_unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * euclidean_unit_ball_volume(n - 2),
    }
}

/// Solves `Σ x_i² e^{-2 v_i t} = 1` for `t = ln ρ` by Newton's method. The
/// left side is log-convex and decreasing in `t`, so starting from the largest
/// single-term root the iterates increase monotonically to the solution.
fn euclidean_homogeneous(x: &[f64], v: &[f64]) -> f64 {
    if let Some(v0) = v.first() {
        if v.iter().all(|vi| vi == v0) {
            let r2: f64 = x.iter().map(|xi| xi * xi).sum();
            return r2.powf(0.5 / v0);
        }
    }
    let mut t = f64::NEG_INFINITY;
    for (xi, vi) in x.iter().zip(v) {
        if *xi != 0.0 {
            t = t.max(xi.abs().ln() / vi);
        }
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    for _ in 0..200 {
        let mut phi = 0.0;
        let mut dphi = 0.0;
        for (xi, vi) in x.iter().zip(v) {
            if *xi != 0.0 {
                let term = (2.0 * (xi.abs().ln() - vi * t)).exp();
                phi += term;
                dphi -= 2.0 * vi * term;
            }
        }
        // Newton step on ln φ.
        let step = -phi.ln() * phi / dphi;
        t += step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
            break;
        }
    }
    t.exp()
}

/// Where the integrals live: the half-line `(0, ∞)` with `dx`, or a
/// homogeneous group with a quasi-norm.
///
/// The half-line behaves like a one-dimensional radial space with `Q = 1` and
/// `|S| = 1`, so `|B(0, x)| = x`.
#[derive(Clone, Debug)]
pub enum Space {
    HalfLine,
    Group(Arc<QuasiNorm>),
}

impl Space {
    pub fn group(norm: QuasiNorm) -> Self {
        Space::Group(Arc::new(norm))
    }

    /// `R` with `|x|`, `Q = 1`, `|S| = 2`.
    pub fn real_line() -> Self {
        Self::group(
            QuasiNorm::new(GroupSpec::real_line(), NormKind::EuclideanHomogeneous)
                .expect("valid norm"),
        )
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        Ok(Self::group(QuasiNorm::new(
            GroupSpec::euclidean(n)?,
            NormKind::EuclideanHomogeneous,
        )?))
    }

    pub fn heisenberg_koranyi() -> Self {
        Self::group(QuasiNorm::new(GroupSpec::heisenberg(), NormKind::Koranyi).expect("valid norm"))
    }

    pub fn is_half_line(&self) -> bool {
        matches!(self, Space::HalfLine)
    }

    pub fn norm(&self) -> Option<&QuasiNorm> {
        match self {
            Space::HalfLine => None,
            Space::Group(n) => Some(n),
        }
    }

    pub fn homogeneous_dim(&self) -> f64 {
        match self {
            Space::HalfLine => 1.0,
            Space::Group(n) => n.homogeneous_dim(),
        }
    }

    pub fn sphere_measure(&self) -> SphereMeasure {
        match self {
            Space::HalfLine => SphereMeasure {
                value: 1.0,
                error: 0.0,
                method: SphereMethod::ClosedForm,
            },
            Space::Group(n) => n.sphere_measure(),
        }
    }

    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        match self {
            Space::HalfLine if r >= 0.0 => Ok(r),
            Space::HalfLine => Err(Error::domain(format!(
                "radius must be non-negative, got {r}"
            ))),
            Space::Group(n) => n.ball_volume(r),
        }
    }

    /// `ln |B(0, e^y)| = ln(|S|/Q) + Q y`, exact for every `y`.
    pub fn ln_ball_volume(&self, log_r: f64) -> f64 {
        let q = self.homogeneous_dim();
        (self.sphere_measure().value / q).ln() + q * log_r
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            Space::HalfLine => "half_line".to_string(),
            Space::Group(n) => format!(
                "{:?}{:?}/{:?}",
                n.group().law(),
                n.group().dilation_exponents(),
                n.kind()
            ),
        }
    }

    pub(crate) fn require_group(&self, what: &str) -> Result<&QuasiNorm> {
        self.norm()
            .ok_or_else(|| Error::domain(format!("{what} needs a group, not the half-line")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn dilation_examples() {
        let g = GroupSpec::abelian(vec![1.0, 2.0]).unwrap();
        let x = GroupPoint::new(vec![1.0, 1.0]);
        assert_eq!(g.dilate(2.0, &x).unwrap().coords(), &[2.0, 4.0]);
        assert_eq!(g.dilate(1.0, &x).unwrap(), x);

        let h = GroupSpec::heisenberg();
        let y = GroupPoint::new(vec![1.0, 1.0, 1.0]);
        assert_eq!(h.dilate(3.0, &y).unwrap().coords(), &[3.0, 3.0, 9.0]);
        assert_eq!(h.homogeneous_dim(), 4.0);
    }

    #[test]
    fn dilation_rejects_non_positive_factor() {
        let g = GroupSpec::real_line();
        let x = GroupPoint::new(vec![1.0]);
        assert!(matches!(g.dilate(0.0, &x), Err(Error::Domain(_))));
        assert!(matches!(g.dilate(-1.0, &x), Err(Error::Domain(_))));
    }

    #[test]
    fn group_spec_validation() {
        assert!(GroupSpec::abelian(vec![1.0, 0.0]).is_err());
        assert!(GroupSpec::abelian(vec![]).is_err());
        assert!(GroupSpec::from_law(GroupLaw::Heisenberg, Some(vec![1.0, 1.0, 1.0])).is_err());
        let g = GroupSpec::abelian(vec![0.5, 1.5, 2.0]).unwrap();
        assert_eq!(g.homogeneous_dim(), 4.0);
    }

    #[test]
    fn heisenberg_law_is_associative_with_negation_inverse() {
        let h = GroupSpec::heisenberg();
        let x = GroupPoint::new(vec![0.3, -1.2, 0.7]);
        let y = GroupPoint::new(vec![1.1, 0.4, -0.2]);
        let z = GroupPoint::new(vec![-0.5, 2.0, 1.3]);
        let lhs = h.multiply(&h.multiply(&x, &y).unwrap(), &z).unwrap();
        let rhs = h.multiply(&x, &h.multiply(&y, &z).unwrap()).unwrap();
        for (a, b) in lhs.coords().iter().zip(rhs.coords()) {
            assert!((a - b).abs() < 1e-14);
        }
        let e = h.multiply(&x, &h.inverse(&x).unwrap()).unwrap();
        assert_eq!(e, h.identity());
        // Dilations are automorphisms.
        let lam = 1.7;
        let lhs = h.dilate(lam, &h.multiply(&x, &y).unwrap()).unwrap();
        let rhs = h
            .multiply(&h.dilate(lam, &x).unwrap(), &h.dilate(lam, &y).unwrap())
            .unwrap();
        for (a, b) in lhs.coords().iter().zip(rhs.coords()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn quasi_norm_examples() {
        let k = QuasiNorm::new(GroupSpec::heisenberg(), NormKind::Koranyi).unwrap();
        assert_eq!(k.eval(&GroupPoint::new(vec![0.0, 0.0, 1.0])).unwrap(), 1.0);
        assert!(rel(k.eval(&GroupPoint::new(vec![1.0, 1.0, 0.0])).unwrap(), 2f64.sqrt()) < 1e-15);

        let a = QuasiNorm::new(
            GroupSpec::abelian(vec![1.0, 2.0]).unwrap(),
            NormKind::AnisotropicLp,
        )
        .unwrap();
        assert_eq!(a.lp_order(), Some(4));
        assert_eq!(a.eval(&GroupPoint::new(vec![1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(a.eval(&GroupPoint::new(vec![0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn quasi_norm_dimension_mismatch() {
        let k = QuasiNorm::new(GroupSpec::heisenberg(), NormKind::Koranyi).unwrap();
        assert!(matches!(
            k.eval(&GroupPoint::new(vec![1.0, 2.0])),
            Err(Error::Domain(_))
        ));
        assert!(QuasiNorm::new(GroupSpec::euclidean(3).unwrap(), NormKind::Koranyi).is_err());
    }

    #[test]
    fn lp_order_is_least_even_multiple() {
        let cases = [
            (vec![1.0], 2),
            (vec![1.0, 1.0], 2),
            (vec![1.0, 2.0], 4),
            (vec![1.0, 1.0, 2.0], 4),
            (vec![1.0, 3.0], 6),
            (vec![2.0, 3.0], 12),
            (vec![0.5, 1.0], 2),
        ];
        for (v, m) in cases {
            let n = QuasiNorm::new(GroupSpec::abelian(v.clone()).unwrap(), NormKind::AnisotropicLp)
                .unwrap();
            assert_eq!(n.lp_order(), Some(m), "exponents {v:?}");
        }
    }

    #[test]
    fn euclidean_homogeneous_unit_sphere_is_euclidean_sphere() {
        let g = GroupSpec::abelian(vec![1.0, 2.0, 3.0]).unwrap();
        let n = QuasiNorm::new(g, NormKind::EuclideanHomogeneous).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let x = GroupPoint::new(vec![s, -s, s]);
        assert!((n.eval(&x).unwrap() - 1.0).abs() < 1e-14);
        let inside = GroupPoint::new(vec![0.5, 0.5, 0.5]);
        assert!(n.eval(&inside).unwrap() < 1.0);
    }

    #[test]
    fn sphere_measure_closed_forms_and_reductions() {
        let e2 = Space::euclidean(2).unwrap();
        assert!(rel(e2.sphere_measure().value, 2.0 * PI) < 1e-10);
        assert_eq!(e2.sphere_measure().method, SphereMethod::ClosedForm);
        assert!(rel(Space::real_line().sphere_measure().value, 2.0) < 1e-15);

        let k = Space::heisenberg_koranyi();
        assert!(rel(k.sphere_measure().value, 2.0 * PI * PI) < 1e-10);
        assert_eq!(k.sphere_measure().method, SphereMethod::Reduction1D);

        let a = QuasiNorm::new(
            GroupSpec::abelian(vec![1.0, 2.0]).unwrap(),
            NormKind::AnisotropicLp,
        )
        .unwrap();
        let s = a.sphere_measure();
        assert!((s.value - 10.488).abs() < 1e-3, "{s:?}");
    }

    #[test]
    fn ball_volume_examples() {
        let e2 = Space::euclidean(2).unwrap();
        assert_eq!(e2.ball_volume(0.0).unwrap(), 0.0);
        assert!((e2.ball_volume(1.0).unwrap() - PI).abs() < 1e-6);
        assert!(matches!(e2.ball_volume(-1.0), Err(Error::Domain(_))));
        assert_eq!(Space::HalfLine.ball_volume(3.0).unwrap(), 3.0);
    }

    #[test]
    fn monte_carlo_budget_exhaustion_carries_estimate() {
        let k = QuasiNorm::new(GroupSpec::heisenberg(), NormKind::Koranyi).unwrap();
        let budget = SphereBudget {
            force_monte_carlo: true,
            max_samples: 10_000,
            target_rel_err: 1e-6,
            ..SphereBudget::default()
        };
        match k.compute_sphere_measure(&budget) {
            Err(Error::BudgetExhausted { estimate, error }) => {
                assert!(error > 0.0);
                assert!((estimate - 2.0 * PI * PI).abs() < 5.0 * error);
            }
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }
}
