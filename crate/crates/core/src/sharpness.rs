//! Numerical lower bounds on best constants: extremal families whose ratio
//! approaches the constant, the converse witness for power weights, and the
//! dilation test showing that unbalanced exponents admit no finite constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::Space;
use crate::inequalities::{
    check_balance, ln_half_integral, mean_sides, power_prefactor, verify_conjugate_power, verify_levin_1d,
    InequalityCase, Theorem,
};
use crate::operators::{MeanOperator, TestFunction, Weight};
use crate::quadrature::QuadratureConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SharpnessFamily {
    ConjugateDelta { b: f64, eps: f64, p: f64 },
    ConverseWitness { b: f64, eps: f64, p: f64, radius: f64 },
    Classic1D { a: f64, eps: f64 },
}

pub const DEFAULT_DELTAS: [f64; 5] = [0.2, 0.1, 0.05, 0.02, 0.01];
pub const DEFAULT_LAMBDAS: [f64; 5] = [1e-2, 1e-1, 1.0, 1e1, 1e2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub family: SharpnessFamily,
    /// Strictly decreasing.
    pub delta_grid: Vec<f64>,
    pub ratios: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub errs: Vec<f64>,
    pub extrapolated_limit: f64,
    pub target: f64,
    pub rel_gap: f64,
    /// The inequality's constant; every ratio should stay below it.
    pub upper_const: f64,
}

/// `f_δ(x) = e^{(b+1)/(εp)} |B(0,1)|^{-(b+1)} |x|^{-(Q/p)(b+1∓εδ)}`, with `-` inside
/// the unit ball and `+` outside.
pub fn conjugate_family_eval(space: &Space, b: f64, eps: f64, p: f64, delta: f64) -> Result<TestFunction> {
    if !(delta > 0.0 && eps > 0.0 && p > 0.0) {
        return Err(Error::domain("delta, epsilon and p must be positive"));
    }
    if !(b + 1.0 > 0.0 && eps * delta < b + 1.0) {
        return Err(Error::domain(format!(
            "need 0 < eps*delta < b+1, got eps*delta = {}, b+1 = {}",
            eps * delta,
            b + 1.0
        )));
    }
    let q = space.homogeneous_dim();
    let k = (b + 1.0) / (eps * p) - (b + 1.0) * space.ln_ball_volume(0.0);
    let slope = q / p * (b + 1.0);
    let kink = q / p * eps * delta;
    Ok(
        TestFunction::radial_log(format!("sharpness_delta({b}, {eps}, {p}, {delta})"), move |y| {
            k - slope * y - kink * y.abs()
        })
        .with_breaks(&[1.0]),
    )
}

/// `t^{-(a+1)+εδ}` on `(0, 1)` and `t^{-(a+1)-εδ}` on `[1, ∞)`.
pub fn classic_family_eval(a: f64, eps: f64, delta: f64) -> Result<TestFunction> {
    if !(delta > 0.0 && eps > 0.0) {
        return Err(Error::domain("delta and epsilon must be positive"));
    }
    Ok(
        TestFunction::radial_log(format!("classic_delta({a}, {eps}, {delta})"), move |y| {
            -(a + 1.0) * y - eps * delta * y.abs()
        })
        .with_breaks(&[1.0]),
    )
}

fn sorted_grid(deltas: &[f64]) -> Result<Vec<f64>> {
    let mut g: Vec<f64> = deltas.to_vec();
    if g.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::domain("delta values must be positive"));
    }
    g.sort_by(|a, b| b.total_cmp(a));
    g.dedup();
    if g.len() < 2 {
        return Err(Error::domain("a sweep needs at least two distinct delta values"));
    }
    Ok(g)
}

/// Linear extrapolation to `δ = 0` through the two smallest grid points.
fn extrapolate(grid: &[f64], ratios: &[f64]) -> f64 {
    let n = grid.len();
    let (d1, r1) = (grid[n - 1], ratios[n - 1]);
    let (d2, r2) = (grid[n - 2], ratios[n - 2]);
    r1 - (r2 - r1) / (d2 - d1) * d1
}

fn at_delta(delta: f64) -> impl Fn(Error) -> Error {
    move |e| Error::divergent(format!("sweep at delta = {delta}"), e.to_string())
}

fn finish(
    family: SharpnessFamily,
    grid: Vec<f64>,
    rows: Vec<(f64, f64, f64, f64)>,
    target: f64,
    upper_const: f64,
) -> SharpnessReport {
    let ratios: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let limit = extrapolate(&grid, &ratios);
    SharpnessReport {
        family,
        lhs: rows.iter().map(|r| r.1).collect(),
        rhs: rows.iter().map(|r| r.2).collect(),
        errs: rows.iter().map(|r| r.3).collect(),
        delta_grid: grid,
        ratios,
        extrapolated_limit: limit,
        target,
        rel_gap: (limit - target).abs() / target,
        upper_const,
    }
}

/// Evaluates the conjugate power inequality (`p = q`, `a = b`) on the
/// extremal family and extrapolates the ratio to `δ → 0`.
pub fn sharpness_sweep(case: &InequalityCase, deltas: &[f64]) -> Result<SharpnessReport> {
    if case.theorem != Theorem::ConjugatePowerLCL || case.p != case.q || case.a != case.b {
        return Err(Error::domain(
            "the extremal family applies to the conjugate power inequality with p = q and a = b",
        ));
    }
    case.validate()?;
    let grid = sorted_grid(deltas)?;
    let (b, eps, p) = (case.b, case.eps, case.p);
    let rows = grid
        .par_iter()
        .map(|&d| {
            let f = conjugate_family_eval(&case.space, b, eps, p, d)?;
            let r = verify_conjugate_power(&case.with_test_function(f)).map_err(at_delta(d))?;
            Ok((r.ratio, r.lhs, r.rhs, r.err_budget))
        })
        .collect::<Result<Vec<_>>>()?;
    let target = (-(b + 1.0) / (eps * p)).exp();
    Ok(finish(SharpnessFamily::ConjugateDelta { b, eps, p }, grid, rows, target, target))
}

/// The half-line ball-mean inequality on `t^{-(a+1)±εδ}`; the ratio
/// `lhs / ∫ x^a f` approaches `exp((a+1)/ε)`.
pub fn classic_sharpness_sweep(a: f64, eps: f64, deltas: &[f64], cfg: &QuadratureConfig) -> Result<SharpnessReport> {
    let grid = sorted_grid(deltas)?;
    let c = ((a + 1.0) / eps).exp();
    let rows = grid
        .par_iter()
        .map(|&d| {
            let f = classic_family_eval(a, eps, d)?;
            let case = InequalityCase {
                cfg: *cfg,
                ..InequalityCase::power(Theorem::Levin2_1D, Space::HalfLine, 1.0, 1.0, a, a, eps, f)
            };
            let r = verify_levin_1d(&case).map_err(at_delta(d))?;
            // Undo the normalisation: compare lhs with ∫ x^a f itself.
            Ok((r.ratio * c, r.lhs, r.rhs / c, r.err_budget))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(SharpnessFamily::Classic1D { a, eps }, grid, rows, c, c))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessBound {
    /// Lower bound on the best constant implied by the witness.
    pub lower_bound: f64,
    /// `(p/q)^{1/q} ε^{1/p-1/q} exp((b+1)/(εp) - 1/p)`.
    pub target: f64,
    pub certified: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `(∫_{B(0,R)} |B_w|^{q/p-1} dw)^{1/q}`, numerically and in closed form.
    pub ball_integral: f64,
    pub ball_integral_closed: f64,
}

/// Tests the restricted equivalent form of the power inequality with
/// `F(z) = |B(0,|z|)|^{(1-(b+1)/ε)/p} χ_{B(0,R)}`.
pub fn converse_witness_lower_bound(case: &InequalityCase, radius: f64) -> Result<WitnessBound> {
    if case.theorem != Theorem::PowerLCL {
        return Err(Error::domain("the converse witness applies to the power-weight inequality"));
    }
    case.validate()?;
    if !check_balance(case.p, case.q, case.a, case.b) {
        return Err(Error::Unbalanced {
            lhs: case.p * (case.a + 1.0),
            rhs: case.q * (case.b + 1.0),
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::domain("witness radius must be positive"));
    }
    let (p, q, a, b, eps) = (case.p, case.q, case.a, case.b, case.eps);
    let space = &case.space;
    let cfg = &case.cfg;
    let qd = space.homogeneous_dim();
    let ln_s = space.sphere_measure().value.ln();
    let s = (1.0 - (b + 1.0) / eps) / p;
    let witness = TestFunction::parse(&format!("indicator_ball_power({s}, {radius})"), space)?;
    let inner = cfg.inner();
    let gm = MeanOperator::new(space, &witness, 1.0, false, &inner, cfg.nested_mc_samples)?;
    let top = radius.ln();
    let alpha = (a + 1.0) / eps - 1.0;
    let beta = (b + 1.0) / eps - 1.0;

    // Mean values are needed at every node of the outer integral.
    let gm_cache = std::sync::Mutex::new(None::<Error>);
    let lhs = ln_half_integral(
        |y| match gm.ln_mean(y) {
            Ok(m) => alpha * space.ln_ball_volume(y) + q * m.ln + qd * y,
            Err(e) => {
                *gm_cache.lock().expect("lock") = Some(e);
                f64::NAN
            }
        },
        top,
        false,
        &[],
        cfg,
    );
    if let Some(e) = gm_cache.into_inner().expect("lock") {
        return Err(e);
    }
    let lhs = lhs?;
    let ln_f = |y: f64| witness.ln_radial(y).expect("radial");
    let rhs = ln_half_integral(|y| beta * space.ln_ball_volume(y) + p * ln_f(y) + qd * y, top, false, &[], cfg)?;
    let ln_lhs = (ln_s + lhs.ln) / q;
    let ln_rhs = (ln_s + rhs.ln) / p;
    let volume_factor = ((space.sphere_measure().value / qd).ln()
        * ((b + 1.0) / p - (a + 1.0) / q)
        * (1.0 - 1.0 / eps))
        .exp();
    let lower_bound = eps.powf(1.0 / p - 1.0 / q) / volume_factor * (ln_lhs - ln_rhs).exp();
    let target = power_prefactor(case) * ((b + 1.0) / (eps * p) - 1.0 / p).exp();

    let ball = ln_half_integral(|y| (q / p - 1.0) * space.ln_ball_volume(y) + qd * y, top, false, &[], cfg)?;
    let ball_integral = ((ln_s + ball.ln) / q).exp();
    let ball_integral_closed = space.ball_volume(radius)?.powf(1.0 / p) * (p / q).powf(1.0 / q);
    Ok(WitnessBound {
        lower_bound,
        target,
        certified: lower_bound >= target * (1.0 - 1e-4),
        lhs: ln_lhs.exp(),
        rhs: ln_rhs.exp(),
        ball_integral,
        ball_integral_closed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupPoint {
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub points: Vec<BlowupPoint>,
    /// Grid values dropped because an integral failed there.
    pub dropped: Vec<f64>,
    /// Least-squares slope of `ln ratio` against `ln λ`.
    pub slope: f64,
    /// `Q((a+1)/q - (b+1)/p)`.
    pub expected_slope: f64,
    /// `|slope| ≥ 0.95 |expected|`, or `|slope| ≤ 0.01` in the balanced case.
    pub slope_ok: bool,
}

/// Ratio of the power inequality on `f(D_{1/λ}·)` across `λ`. Both sides are
/// homogeneous under dilation, so `ln ratio` is linear in `ln λ` with slope
/// `Q((a+1)/q - (b+1)/p)`, nonzero exactly when the balance condition fails.
pub fn dilation_blowup(case: &InequalityCase, lambdas: &[f64]) -> Result<BlowupReport> {
    if !matches!(case.theorem, Theorem::PowerLCL | Theorem::ConjugatePowerLCL) {
        return Err(Error::domain("dilation test applies to power-weight inequalities"));
    }
    case.validate()?;
    let conjugate = case.theorem == Theorem::ConjugatePowerLCL;
    let (u, v) = (Weight::BallPower(case.a), Weight::BallPower(case.b));
    let results: Vec<(f64, Result<BlowupPoint>)> = lambdas
        .par_iter()
        .map(|&lambda| {
            let point = (|| {
                let f = case.f.dilated(&case.space, lambda)?;
                let sides = mean_sides(&case.with_test_function(f), case.eps, conjugate, &u, &v)?;
                let ratio = (sides.ln_lhs - sides.ln_rhs).exp();
                if !ratio.is_finite() || ratio <= 0.0 {
                    return Err(Error::NonFinite { at: lambda });
                }
                Ok(BlowupPoint {
                    lambda,
                    lhs: sides.ln_lhs.exp(),
                    rhs: sides.ln_rhs.exp(),
                    ratio,
                })
            })();
            (lambda, point)
        })
        .collect();
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for (lambda, r) in results {
        match r {
            Ok(p) => points.push(p),
            Err(_) => dropped.push(lambda),
        }
    }
    if points.len() < 3 {
        return Err(Error::divergent(
            "dilation test",
            format!("only {} grid points converged; at least 3 are needed", points.len()),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.lambda.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ratio.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let expected = case.space.homogeneous_dim() * ((case.a + 1.0) / case.q - (case.b + 1.0) / case.p);
    let slope_ok = if check_balance(case.p, case.q, case.a, case.b) {
        slope.abs() <= 0.01
    } else {
        slope.abs() >= 0.95 * expected.abs()
    };
    Ok(BlowupReport {
        points,
        dropped,
        slope,
        expected_slope: expected,
        slope_ok,
    })
}
