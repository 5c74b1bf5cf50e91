//! Traveling-wave shape in the tilt variable.
//!
//! For a speed `V` and concentration constant `c1` the tilt `Y = -h'/sqrt(1+h'^2)`
//! solves `γ Y' = p1 - V x - χ f(c1 exp(-a V x))` with `Y(0) = 0`. The right-hand
//! side depends on `x` only. Tips are where `Y` reaches `-1` (left) and `+1`
//! (right); the half-height is `h(x) = -∫_{xL}^x Y/sqrt(1-Y²)`.
//!
//! Every integral of `Y/sqrt(1-Y²)` is written in `u` with `x = tip ∓ u²` over a
//! whole half-interval, which removes the inverse square-root singularity, and the
//! gap `1 ∓ Y` is evaluated as `|∫_x^tip F|/γ` so it keeps full relative accuracy
//! next to the tips.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ActiveForce, ModelParams};
use crate::ode::{DenseSolution, Dopri5, Dopri5Options};
use crate::quadrature::{adaptive, gauss32, Integral};

/// Largest admissible `|a V x|` in the concentration exponential.
pub const MAX_EXPONENT: f64 = 700.0;

const ODE_OPTIONS: Dopri5Options = Dopri5Options {
    rtol: 1e-12,
    atol: 1e-13,
    h_initial: 0.0,
    h_max: f64::INFINITY,
    max_steps: 200_000,
};
const QUAD_ABS_TOL: f64 = 1e-13;
const QUAD_REL_TOL: f64 = 1e-12;
const QUAD_MAX_INTERVALS: usize = 2000;
const VMAX_REL_WIDTH: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// The force balance `F(x) = p1 - V x - χ f(c1 exp(-a V x))`.
#[derive(Debug, Clone)]
struct ForceBalance {
    gamma: f64,
    chi: f64,
    a: f64,
    p1: f64,
    v: f64,
    c1: f64,
    force: ActiveForce,
}

impl ForceBalance {
    fn new(params: &ModelParams, v: f64, c1: f64) -> Self {
        Self {
            gamma: params.gamma,
            chi: params.chi,
            a: params.a,
            p1: params.p1,
            v,
            c1,
            force: params.force.clone(),
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let c = self.c1 * (-self.a * self.v * x).exp();
        self.p1 - self.v * x - self.chi * self.force.f(c)
    }

    fn checked(&self, x: f64) -> Result<f64> {
        let exponent = -self.a * self.v * x;
        if exponent.abs() > MAX_EXPONENT {
            return Err(Error::OutOfRange { exponent });
        }
        Ok(self.eval(x))
    }

    /// `∫_lo^hi F` by composite 32-point Gauss, one panel per unit of `a V |hi - lo|`.
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.integral_along(lo, hi - lo)
    }

    /// `∫_start^{start+len} F`, with the length given exactly.
    fn integral_along(&self, start: f64, len: f64) -> f64 {
        let panels = 1 + (self.a * self.v * len.abs()).floor() as usize;
        let rule = gauss32();
        let width = len / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let base = width * k as f64;
            let mut panel = 0.0;
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                panel += w * self.eval(start + base + 0.5 * width * (1.0 + t));
            }
            total += 0.5 * width * panel;
        }
        total
    }
}

/// `Y' = F(x)/γ`.
pub fn rhs_y(x: f64, params: &ModelParams, v: f64, c1: f64) -> Result<f64> {
    Ok(ForceBalance::new(params, v, c1).checked(x)? / params.gamma)
}

/// One half of the tilt profile, from `x = 0` to a tip.
#[derive(Debug, Clone)]
pub struct HalfSolution {
    pub side: Side,
    pub tip: f64,
    /// Empty for `V = 0`, where `Y` is linear.
    pub dense: DenseSolution,
}

impl HalfSolution {
    /// Step endpoints `(x, Y)` of the integration.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.dense.nodes()
    }
}

pub(crate) fn check_compatibility(params: &ModelParams) -> Result<()> {
    let bound = params.chi * params.force.bound();
    if !(params.p1 > bound) {
        return Err(Error::InvalidParameters(format!(
            "p1 = {} must exceed chi L = {bound}",
            params.p1
        )));
    }
    Ok(())
}

fn check_speed_and_c1(v: f64, c1: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameters(format!("speed must be non-negative, got {v}")));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::InvalidParameters(format!("c1 must be positive, got {c1}")));
    }
    Ok(())
}

/// Integrates the tilt equation from `Y(0) = 0` towards one tip.
///
/// Requires `p1 > χ L`. Fails with [`Error::SpeedTooLarge`] when `Y` turns back
/// before reaching `+1` on the right.
pub fn integrate_until_tip(params: &ModelParams, v: f64, c1: f64, side: Side) -> Result<HalfSolution> {
    params.validate()?;
    check_compatibility(params)?;
    check_speed_and_c1(v, c1)?;
    integrate_half(&ForceBalance::new(params, v, c1), side)
}

fn integrate_half(fb: &ForceBalance, side: Side) -> Result<HalfSolution> {
    let sign = match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    if fb.v == 0.0 {
        let k = fb.eval(0.0);
        if !(k > 0.0) {
            return Err(Error::TipNotFound(format!(
                "force balance p1 - chi f(c1) = {k} is not positive at V = 0"
            )));
        }
        return Ok(HalfSolution {
            side,
            tip: sign * fb.gamma / k,
            dense: DenseSolution::default(),
        });
    }
    let exponent_limit = MAX_EXPONENT / (fb.a * fb.v);
    let x_end = match side {
        Side::Right => (fb.p1 / fb.v).min(exponent_limit),
        Side::Left => {
            let margin = fb.p1 - fb.chi * fb.force.bound();
            let lemma = if margin > 0.0 {
                (margin - (margin * margin + 2.0 * fb.gamma * fb.v).sqrt()) / fb.v
            } else {
                -exponent_limit
            };
            (lemma * (1.0 + 1e-9)).max(-exponent_limit)
        }
    };
    if !(x_end * sign > 0.0) {
        return Err(match side {
            Side::Right => Error::SpeedTooLarge { speed: fb.v },
            Side::Left => Error::TipNotFound("empty left integration interval".into()),
        });
    }
    let gamma = fb.gamma;
    let mut stepper = Dopri5::new(
        |x, _| fb.eval(x) / gamma,
        0.0,
        0.0,
        sign,
        x_end.abs().min(gamma / fb.eval(0.0).abs().max(1e-300)),
        ODE_OPTIONS,
    )?;
    let target = sign;
    let mut dense = DenseSolution::default();
    while stepper.x() != x_end {
        let seg = stepper.step(x_end)?;
        fb.checked(seg.x1())?;
        dense.segments.push(seg);
        let crossed = (seg.y1() - target) * sign >= 0.0;
        let turned = seg.dy1 <= 0.0;
        if !crossed && !turned {
            continue;
        }
        let mut search_end = seg.x1();
        if turned && !crossed {
            // Y peaks where F changes sign; the peak may still exceed the target.
            let (mut lo, mut hi) = (seg.x0, seg.x1());
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if fb.eval(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if (hi - lo).abs() <= 4.0 * f64::EPSILON * hi.abs() {
                    break;
                }
            }
            search_end = lo;
            if (seg.eval(search_end) - target) * sign < 0.0 {
                return Err(match side {
                    Side::Right => Error::SpeedTooLarge { speed: fb.v },
                    Side::Left => Error::TipNotFound(format!(
                        "left tilt stalls at Y = {} with nonpositive slope",
                        seg.eval(search_end)
                    )),
                });
            }
        }
        let tip = refine_tip(fb, &seg, search_end, target)?;
        return Ok(HalfSolution { side, tip, dense });
    }
    Err(match side {
        Side::Right => Error::SpeedTooLarge { speed: fb.v },
        Side::Left => Error::TipNotFound(format!("Y did not reach -1 before x = {x_end}")),
    })
}

/// Bisection on the dense output, then Newton on `∫_0^x F/γ = target`.
fn refine_tip(fb: &ForceBalance, seg: &crate::ode::DenseSegment, end: f64, target: f64) -> Result<f64> {
    let sign = target.signum();
    let (mut lo, mut hi) = (seg.x0, end);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (seg.eval(mid) - target) * sign >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo).abs() <= 1e-14 * hi.abs().max(1e-300) {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..20 {
        let phi = fb.integral(0.0, x) / fb.gamma - target;
        let slope = fb.eval(x) / fb.gamma;
        if !(slope > 0.0) {
            break;
        }
        let dx = phi / slope;
        let next = x - dx;
        if !next.is_finite() {
            break;
        }
        x = next;
        if dx.abs() <= 2.0 * f64::EPSILON * x.abs() {
            break;
        }
    }
    if !x.is_finite() || x * sign <= 0.0 {
        return Err(Error::TipNotFound(format!("tip refinement diverged (x = {x})")));
    }
    Ok(x)
}

/// Tilt curve with both tips located, for a fixed `(V, c1)`.
#[derive(Debug, Clone)]
pub struct TiltSolution {
    pub v: f64,
    pub c1: f64,
    pub x_left: f64,
    pub x_right: f64,
    fb: ForceBalance,
    left: DenseSolution,
    right: DenseSolution,
}

impl TiltSolution {
    /// Both halves of the tilt curve. Requires `p1 > χ L`.
    pub fn new(params: &ModelParams, v: f64, c1: f64) -> Result<Self> {
        params.validate()?;
        check_compatibility(params)?;
        Self::new_unchecked(params, v, c1)
    }

    /// As [`TiltSolution::new`] without the `p1 > χ L` hypothesis, for the
    /// fixed-area outer iteration where `p1` is an unknown.
    pub(crate) fn new_unchecked(params: &ModelParams, v: f64, c1: f64) -> Result<Self> {
        check_speed_and_c1(v, c1)?;
        let fb = ForceBalance::new(params, v, c1);
        let right = integrate_half(&fb, Side::Right)?;
        let left = integrate_half(&fb, Side::Left)?;
        Ok(Self {
            v,
            c1,
            x_left: left.tip,
            x_right: right.tip,
            fb,
            left: left.dense,
            right: right.dense,
        })
    }

    pub fn force_balance(&self, x: f64) -> f64 {
        self.fb.eval(x)
    }

    /// `1 - |Y|` at distance `d >= 0` from a tip, as `∫ F / γ` over the `d`-interval
    /// adjacent to that tip. Passing `d` rather than `x` keeps full relative
    /// accuracy as `d` goes to zero.
    fn gap_from_tip(&self, side: Side, d: f64) -> f64 {
        let value = match side {
            Side::Left => self.fb.integral_along(self.x_left, d),
            Side::Right => -self.fb.integral_along(self.x_right, -d),
        };
        (value / self.fb.gamma).max(0.0)
    }

    /// `(Y, 1 - |Y|)` with the gap integrated from the tip of the same half.
    fn tilt_and_gap(&self, x: f64) -> (f64, f64) {
        if x >= 0.0 {
            let gap = self.gap_from_tip(Side::Right, (self.x_right - x).max(0.0));
            (1.0 - gap, gap)
        } else {
            let gap = self.gap_from_tip(Side::Left, (x - self.x_left).max(0.0));
            (gap - 1.0, gap)
        }
    }

    pub fn tilt(&self, x: f64) -> f64 {
        self.tilt_and_gap(x).0
    }

    /// `Y'` from the dense output of the integrator (exact slope for `V = 0`).
    pub fn tilt_derivative(&self, x: f64) -> f64 {
        let dense = if x >= 0.0 { &self.right } else { &self.left };
        dense
            .derivative(x)
            .unwrap_or_else(|| self.fb.eval(0.0) / self.fb.gamma)
    }

    /// `Y / sqrt(1 - Y²)` at distance `d` from the tip of `side`.
    fn slope_term(&self, side: Side, d: f64) -> f64 {
        let gap = self.gap_from_tip(side, d);
        let y = match side {
            Side::Left => gap - 1.0,
            Side::Right => 1.0 - gap,
        };
        y / (gap * (2.0 - gap)).sqrt()
    }

    /// `∫_0^U w(x) H(x) 2u du` with `x = tip ∓ u²`.
    fn half_integral<W: Fn(f64) -> f64>(&self, side: Side, u_lo: f64, u_hi: f64, w: &W) -> Integral {
        let tip = match side {
            Side::Left => self.x_left,
            Side::Right => self.x_right,
        };
        let sign = match side {
            Side::Left => 1.0,
            Side::Right => -1.0,
        };
        adaptive(
            |u| {
                let d = u * u;
                2.0 * u * w(tip + sign * d) * self.slope_term(side, d)
            },
            u_lo,
            u_hi,
            QUAD_ABS_TOL,
            QUAD_REL_TOL,
            QUAD_MAX_INTERVALS,
        )
    }

    /// `∫_{xL}^{xR} w(x) Y/sqrt(1-Y²) dx`.
    pub fn weighted_slope_integral<W: Fn(f64) -> f64>(&self, w: W) -> Integral {
        let l = self.half_integral(Side::Left, 0.0, (-self.x_left).sqrt(), &w);
        let r = self.half_integral(Side::Right, 0.0, self.x_right.sqrt(), &w);
        Integral {
            value: l.value + r.value,
            error: l.error + r.error,
        }
    }

    /// The closure functional `G = ∫ Y/sqrt(1-Y²)`; `h(xR) = -G`.
    pub fn closure_g(&self) -> Integral {
        self.weighted_slope_integral(|_| 1.0)
    }

    /// `∫_{xL}^x e^{-aVt} dt`.
    fn exp_primitive(&self, x: f64) -> f64 {
        let k = self.fb.a * self.v;
        if k == 0.0 {
            x - self.x_left
        } else {
            -(-k * self.x_left).exp() * (-k * (x - self.x_left)).exp_m1() / k
        }
    }

    /// `∫ e^{-aVx} h dx`, integrated by parts against `h' = -Y/sqrt(1-Y²)`.
    pub fn mass_integral(&self, g: f64) -> f64 {
        let boundary = self.exp_primitive(self.x_right) * (-g);
        boundary + self.weighted_slope_integral(|x| self.exp_primitive(x)).value
    }

    /// `∫ h dx`, integrated by parts.
    pub fn half_area(&self, g: f64) -> f64 {
        (self.x_right - self.x_left) * (-g) + self.weighted_slope_integral(|x| x - self.x_left).value
    }

    /// Heights at sorted abscissae in `[xL, xR]`, accumulated from the nearer tip.
    pub fn heights(&self, xs: &[f64], g: f64) -> Vec<f64> {
        let mut out = vec![0.0; xs.len()];
        let split = xs.partition_point(|&x| x <= 0.0);
        let one = |_: f64| 1.0;
        let mut acc = 0.0;
        let mut u_prev = 0.0;
        for (i, &x) in xs[..split].iter().enumerate() {
            let u = (x - self.x_left).max(0.0).sqrt();
            acc += self.half_integral(Side::Left, u_prev, u, &one).value;
            u_prev = u;
            out[i] = -acc;
        }
        let mut acc = 0.0;
        let mut u_prev = 0.0;
        for i in (split..xs.len()).rev() {
            let u = (self.x_right - xs[i]).max(0.0).sqrt();
            acc += self.half_integral(Side::Right, u_prev, u, &one).value;
            u_prev = u;
            out[i] = -g + acc;
        }
        out
    }

    /// Abscissa where the tilt equals `y ∈ [-1, 1]`; requires a monotone tilt.
    pub fn x_of_tilt(&self, y: f64) -> f64 {
        if y >= 1.0 {
            return self.x_right;
        }
        if y <= -1.0 {
            return self.x_left;
        }
        let (mut lo, mut hi) = if y >= 0.0 { (0.0, self.x_right) } else { (self.x_left, 0.0) };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.tilt(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Discretized traveling-wave shape for a fixed `(V, c1)`.
#[derive(Debug, Clone, Serialize)]
pub struct ShapeProfile {
    #[serde(rename = "V")]
    pub v: f64,
    pub c1: f64,
    #[serde(rename = "xL")]
    pub x_left: f64,
    #[serde(rename = "xR")]
    pub x_right: f64,
    pub grid: Vec<f64>,
    #[serde(rename = "Y")]
    pub tilt: Vec<f64>,
    #[serde(rename = "h")]
    pub height: Vec<f64>,
    #[serde(rename = "G")]
    pub g_value: f64,
    #[serde(rename = "G_error")]
    pub g_error: f64,
    #[serde(skip)]
    solution: TiltSolution,
}

/// Default number of grid intervals per half.
pub const DEFAULT_RESOLUTION: usize = 200;

impl ShapeProfile {
    pub fn build(params: &ModelParams, v: f64, c1: f64, resolution: usize) -> Result<Self> {
        Ok(Self::from_solution(TiltSolution::new(params, v, c1)?, resolution))
    }

    /// Grid points are uniform in `u = sqrt(|x - tip|)` on each half, so they
    /// cluster at the tips; `x = 0` is always a grid point.
    pub fn from_solution(solution: TiltSolution, resolution: usize) -> Self {
        let n = resolution.max(2);
        let g = solution.closure_g();
        let ul = (-solution.x_left).sqrt();
        let ur = solution.x_right.sqrt();
        let mut grid = Vec::with_capacity(2 * n + 1);
        for k in 0..n {
            let u = ul * k as f64 / n as f64;
            grid.push(solution.x_left + u * u);
        }
        grid.push(0.0);
        for k in (0..n).rev() {
            let u = ur * k as f64 / n as f64;
            grid.push(solution.x_right - u * u);
        }
        let tilt: Vec<f64> = grid.iter().map(|&x| solution.tilt(x)).collect();
        let height = solution.heights(&grid, g.value);
        Self {
            v: solution.v,
            c1: solution.c1,
            x_left: solution.x_left,
            x_right: solution.x_right,
            grid,
            tilt,
            height,
            g_value: g.value,
            g_error: g.error,
            solution,
        }
    }

    pub fn solution(&self) -> &TiltSolution {
        &self.solution
    }

    /// `|h(xR)|`.
    pub fn closure_defect(&self) -> f64 {
        self.height.last().copied().unwrap_or(0.0).abs()
    }

    pub fn is_monotone(&self) -> bool {
        self.tilt.windows(2).all(|w| w[1] >= w[0])
    }

    /// `|Ω| = 2 ∫ h dx`.
    pub fn area(&self) -> f64 {
        2.0 * self.solution.half_area(self.g_value)
    }

    /// Maximum of the reconstructed half-height on the grid.
    pub fn max_height(&self) -> f64 {
        self.height.iter().copied().fold(0.0, f64::max)
    }
}

/// The closure functional with its quadrature error estimate.
pub fn closure_g(profile: &ShapeProfile) -> Integral {
    profile.solution.closure_g()
}

/// Half-height on the profile grid.
pub fn reconstruct_h(profile: &ShapeProfile) -> Vec<f64> {
    profile.solution.heights(&profile.grid, profile.g_value)
}

/// `M / (2 ∫ e^{-aVx} h dx)`. At `V = 0` this is `M / (π R²)` for the profile's own disk.
pub fn c1_update(profile: &ShapeProfile, params: &ModelParams) -> Result<f64> {
    let denom = 2.0 * profile.solution.mass_integral(profile.g_value);
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::ProfileInvalid(format!(
            "mass normalization integral {denom} is not positive"
        )));
    }
    Ok(params.mass / denom)
}

/// `-a V M / (2 ∫ e^{-aVx} Y/sqrt(1-Y²) dx)`, valid for closed shapes with `V > 0`.
pub fn c1_alternative(profile: &ShapeProfile, params: &ModelParams) -> Result<f64> {
    let k = params.a * profile.v;
    if k == 0.0 {
        return Err(Error::InvalidParameters("alternative c1 formula needs V > 0".into()));
    }
    let integral = profile.solution.weighted_slope_integral(|x| (-k * x).exp()).value;
    if !(integral < 0.0) {
        return Err(Error::ProfileInvalid(format!("weighted slope integral {integral} is not negative")));
    }
    Ok(-k * params.mass / (2.0 * integral))
}

/// `max |γ Y'(x) - (p1 - V x - χ f(c1 e^{-aVx}))|` over the grid, with `Y'` taken
/// from the integrator's dense output and the bracket from `params` and the
/// profile's stored `(V, c1)`.
pub fn curvature_residual(profile: &ShapeProfile, params: &ModelParams) -> f64 {
    let fb = ForceBalance::new(params, profile.v, profile.c1);
    profile
        .grid
        .iter()
        .map(|&x| (params.gamma * profile.solution.tilt_derivative(x) - fb.eval(x)).abs())
        .fold(0.0, f64::max)
}

/// Supremum of speeds for which the right tip exists, by bisection between
/// `(p1 - L χ)² / (2γ)` and `p1² / (2γ)`.
pub fn find_vmax(params: &ModelParams, c1: f64) -> Result<f64> {
    params.validate()?;
    check_compatibility(params)?;
    check_speed_and_c1(0.0, c1)?;
    let margin = params.p1 - params.chi * params.force.bound();
    let lo_bound = margin * margin / (2.0 * params.gamma);
    let hi_bound = params.p1 * params.p1 / (2.0 * params.gamma);
    let succeeds = |v: f64| -> Result<bool> {
        match integrate_half(&ForceBalance::new(params, v, c1), Side::Right) {
            Ok(_) => Ok(true),
            Err(Error::SpeedTooLarge { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };
    // With χ = 0 the upper bound is attained exactly; probe just above it.
    let hi_probe = hi_bound * (1.0 + 1e-9);
    if succeeds(hi_probe)? {
        return Err(Error::Inconsistency(format!(
            "right tip exists at V = {hi_probe}, above the bound p1^2/(2 gamma)"
        )));
    }
    if lo_bound < hi_bound && !succeeds(lo_bound)? {
        return Err(Error::Inconsistency(format!(
            "right tip missing at V = {lo_bound}, below the bound (p1 - L chi)^2/(2 gamma)"
        )));
    }
    if lo_bound >= hi_bound {
        // χ L = 0: both bounds coincide and are attained.
        return Ok(hi_bound);
    }
    let (mut lo, mut hi) = (lo_bound, hi_probe);
    while hi - lo > VMAX_REL_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if succeeds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
