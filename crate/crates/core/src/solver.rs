//! Traveling waves: self-consistent `c1` at fixed speed, the speed root of the
//! closure functional, the fixed-area outer iteration, and sweeps in `χ`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, GSample, Result};
use crate::model::{chi_star, com_velocity, Boundary, ModelParams};
use crate::profile::{
    check_compatibility, curvature_residual, find_vmax, ShapeProfile, TiltSolution, DEFAULT_RESOLUTION,
};
use crate::quadrature::Integral;

/// Damped Picard iteration for `c1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub omega: f64,
    /// Damping used after `stall_limit` non-contracting steps.
    pub omega_fallback: f64,
    pub stall_limit: usize,
    /// Converged when `|Δc1| < rel_tol · c1`.
    pub rel_tol: f64,
    pub max_iterations: usize,
    /// Accelerate with secant steps on the fixed-point residual.
    pub secant: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            omega: 0.5,
            omega_fallback: 0.25,
            stall_limit: 3,
            rel_tol: 1e-11,
            max_iterations: 200,
            secant: true,
        }
    }
}

/// How `p1` is treated when solving for a wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// `p1` is a given constant and must exceed `χ L`.
    #[default]
    FixedP1,
    /// `p1` is adjusted so that the wave has area `π R0²`.
    FixedArea,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveOptions {
    pub mode: SolveMode,
    /// Grid intervals per half of the stored profile.
    pub resolution: usize,
    /// Vertices of the boundary polyline used for the force-balance check.
    pub boundary_points: usize,
    /// The speed scan covers `V_ref · 2^-k` for `k = 0..=scan_depth`.
    pub scan_depth: usize,
    pub picard: PicardOptions,
}

impl Default for WaveOptions {
    fn default() -> Self {
        Self {
            mode: SolveMode::FixedP1,
            resolution: DEFAULT_RESOLUTION,
            boundary_points: 4096,
            scan_depth: 30,
            picard: PicardOptions::default(),
        }
    }
}

/// Closure-root tolerance on `|G|`.
pub const G_TOL: f64 = 1e-9;
/// Final bisection width relative to the reference speed.
pub const BRACKET_REL_WIDTH: f64 = 1e-10;
/// Relative area tolerance of the fixed-area iteration.
pub const AREA_REL_TOL: f64 = 1e-10;
const AREA_MAX_ITERATIONS: usize = 60;
const INITIAL_PRESSURE_SCALES: [f64; 7] = [1.0, 0.5, 1.5, 0.25, 2.0, 3.0, 0.1];
const MAX_PRESSURE_HALVINGS: usize = 20;
const SCAN_EXTENSION_FACTOR: f64 = 1.25;
const MAX_SCAN_EXTENSION: usize = 40;

/// Self-consistent tilt solution at one speed.
#[derive(Debug, Clone)]
pub struct FixedSpeed {
    pub solution: TiltSolution,
    pub g: Integral,
    pub c1: f64,
    pub iterations: usize,
}

fn build(params: &ModelParams, v: f64, c1: f64, checked: bool) -> Result<TiltSolution> {
    if checked {
        TiltSolution::new(params, v, c1)
    } else {
        TiltSolution::new_unchecked(params, v, c1)
    }
}

fn picard(params: &ModelParams, v: f64, c1_start: f64, opts: &PicardOptions, checked: bool) -> Result<FixedSpeed> {
    let mut c1 = c1_start;
    let mut omega = opts.omega;
    let mut prev_step = f64::INFINITY;
    let mut prev_c1 = c1;
    let mut stalls = 0;
    let mut last: Option<(f64, f64)> = None;
    for it in 1..=opts.max_iterations {
        let sol = build(params, v, c1, checked)?;
        let g = sol.closure_g();
        let denom = 2.0 * sol.mass_integral(g.value);
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::ProfileInvalid(format!(
                "mass normalization integral {denom} is not positive at V = {v}"
            )));
        }
        let target = params.mass / denom;
        if params.chi == 0.0 {
            // The shape does not depend on c1.
            let solution = build(params, v, target, checked)?;
            return Ok(FixedSpeed {
                g: solution.closure_g(),
                solution,
                c1: target,
                iterations: it,
            });
        }
        let residual = target - c1;
        let mut next = (1.0 - omega) * c1 + omega * target;
        // Secant on c1 - T(c1) once two residuals are known; the damped step is the fallback.
        if opts.secant {
            if let Some((c_prev, r_prev)) = last {
                let s = c1 - residual * (c1 - c_prev) / (residual - r_prev);
                if s.is_finite() && s > 0.0 && (s - c1).abs() <= 0.5 * c1 {
                    next = s;
                }
            }
            last = Some((c1, residual));
        }
        let step = (next - c1).abs();
        if step < opts.rel_tol * c1 {
            let solution = build(params, v, next, checked)?;
            return Ok(FixedSpeed {
                g: solution.closure_g(),
                solution,
                c1: next,
                iterations: it,
            });
        }
        if step >= prev_step {
            stalls += 1;
            if stalls >= opts.stall_limit && omega != opts.omega_fallback {
                log::debug!("c1 iteration not contracting at V = {v}; damping reduced to {}", opts.omega_fallback);
                omega = opts.omega_fallback;
            }
        }
        prev_step = step;
        prev_c1 = c1;
        c1 = next;
    }
    Err(Error::FixedPointDivergence {
        iterations: opts.max_iterations,
        previous: prev_c1,
        last: c1,
    })
}

/// Self-consistent `c1` at speed `V`, starting from `c̃`.
pub fn solve_fixed_v(params: &ModelParams, v: f64) -> Result<ShapeProfile> {
    let fs = solve_fixed_v_with(params, v, params.c_tilde(), &PicardOptions::default())?;
    Ok(ShapeProfile::from_solution(fs.solution, DEFAULT_RESOLUTION))
}

/// As [`solve_fixed_v`] with an explicit starting value and options.
pub fn solve_fixed_v_with(params: &ModelParams, v: f64, c1_start: f64, opts: &PicardOptions) -> Result<FixedSpeed> {
    params.validate()?;
    check_compatibility(params)?;
    picard(params, v, c1_start, opts, true)
}

/// The self-consistent disk at `V = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroSpeedState {
    pub c1: f64,
    pub radius: f64,
    /// `a χ c1 f'(c1)`; waves at fixed `p1` need this above 1.
    pub kappa_eff: f64,
    pub iterations: usize,
}

pub fn zero_speed_state(params: &ModelParams) -> Result<ZeroSpeedState> {
    let fs = solve_fixed_v_with(params, 0.0, params.c_tilde(), &PicardOptions::default())?;
    let c1 = fs.c1;
    Ok(ZeroSpeedState {
        c1,
        radius: fs.solution.x_right,
        kappa_eff: params.a * params.chi * c1 * params.force.df(c1),
        iterations: fs.iterations,
    })
}

/// Checks applied to an assembled wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticTolerances {
    pub g: f64,
    pub closure: f64,
    pub curvature: f64,
    pub mass: f64,
    pub com_velocity: f64,
    pub tip_curvature: f64,
}

impl Default for DiagnosticTolerances {
    fn default() -> Self {
        Self {
            g: G_TOL,
            closure: 1e-6,
            curvature: 1e-8,
            mass: 1e-8,
            com_velocity: 1e-4,
            tip_curvature: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub g_residual: f64,
    pub closure_defect: f64,
    pub curvature_residual: f64,
    pub mass_check: f64,
    pub mass_relative_error: f64,
    pub com_velocity: [f64; 2],
    pub com_velocity_error: f64,
    pub monotone: bool,
    /// Curvature `Y'(0)` of the reconstructed tilt at the apex.
    pub tip_curvature: f64,
    /// `(p1 - χ f(c1)) / γ`.
    pub tip_curvature_expected: f64,
}

impl Diagnostics {
    /// Names and values of the checks that exceed their tolerance.
    pub fn failures(&self, tol: &DiagnosticTolerances) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, value: f64, limit: f64| {
            if !(value < limit) {
                out.push(format!("{name} = {value:e} (limit {limit:e})"));
            }
        };
        check("|G|", self.g_residual, tol.g);
        check("|h(xR)|", self.closure_defect, tol.closure);
        check("curvature residual", self.curvature_residual, tol.curvature);
        check("mass relative error", self.mass_relative_error, tol.mass);
        check("centre-of-mass velocity error", self.com_velocity_error, tol.com_velocity);
        check(
            "tip curvature error",
            (self.tip_curvature - self.tip_curvature_expected).abs(),
            tol.tip_curvature,
        );
        if !self.monotone {
            out.push("tilt not monotone".into());
        }
        out
    }

    pub fn passed(&self, tol: &DiagnosticTolerances) -> bool {
        self.failures(tol).is_empty()
    }
}

/// A converged traveling wave with its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct TravelingWave {
    pub mode: SolveMode,
    #[serde(rename = "V")]
    pub v: f64,
    pub chi: f64,
    pub p1: f64,
    pub c1: f64,
    #[serde(rename = "xL")]
    pub x_left: f64,
    #[serde(rename = "xR")]
    pub x_right: f64,
    pub area: f64,
    pub diagnostics: Diagnostics,
    pub picard_iterations: usize,
    pub bisection_iterations: usize,
    /// Outer `p1` iterations in fixed-area mode, 0 otherwise.
    pub area_iterations: usize,
    /// Closure functional sampled while bracketing, ascending in `V`.
    pub scan: Vec<GSample>,
    /// Further sign-change brackets beyond the one that was refined.
    pub other_brackets: Vec<[f64; 2]>,
    pub profile: ShapeProfile,
}

struct SpeedRoot {
    v: f64,
    fixed: FixedSpeed,
    scan: Vec<GSample>,
    other_brackets: Vec<[f64; 2]>,
    bisections: usize,
    picard_iterations: usize,
}

/// Closure functional at `V` with warm-started `c1`; `None` when the speed is too large.
fn g_at(
    params: &ModelParams,
    v: f64,
    c1_start: f64,
    opts: &PicardOptions,
    checked: bool,
    count: &mut usize,
) -> Result<Option<FixedSpeed>> {
    match picard(params, v, c1_start, opts, checked) {
        Ok(fs) => {
            *count += fs.iterations;
            Ok(Some(fs))
        }
        Err(Error::SpeedTooLarge { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Scan sample; `Ok(None)` marks a speed with no admissible self-consistent profile.
fn scan_point(
    params: &ModelParams,
    v: f64,
    c1_start: f64,
    opts: &PicardOptions,
    checked: bool,
    count: &mut usize,
) -> Result<Option<Option<FixedSpeed>>> {
    match g_at(params, v, c1_start, opts, checked, count) {
        Ok(fs) => Ok(Some(fs)),
        Err(e @ (Error::TipNotFound(_) | Error::FixedPointDivergence { .. } | Error::ProfileInvalid(_))) => {
            log::debug!("scan point V = {v} dropped: {e}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Largest speed with a right tip, by doubling and bisection; used when `p1 ≤ χ L`
/// voids the analytic bracket.
fn vmax_by_search(params: &ModelParams, c1: f64) -> Result<f64> {
    let ok = |v: f64| -> Result<bool> {
        match TiltSolution::new_unchecked(params, v, c1) {
            Ok(_) => Ok(true),
            Err(Error::SpeedTooLarge { .. } | Error::TipNotFound(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let mut hi = params.p1.abs().max(1.0) * params.p1.abs().max(1.0) / params.gamma;
    let mut lo = 0.0;
    let mut probe = 1e-3 * hi;
    while ok(probe)? {
        lo = probe;
        probe *= 2.0;
        if probe > 1e6 * hi {
            return Err(Error::Inconsistency("right tip exists at every probed speed".into()));
        }
    }
    hi = probe;
    if lo == 0.0 {
        return Err(Error::SpeedTooLarge { speed: probe });
    }
    while hi - lo > 1e-8 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Bisects `[lo, hi]` with `G(lo) < 0 < G(hi)` (`None` at `hi` counts as `+∞`).
#[allow(clippy::too_many_arguments)]
fn bisect_speed(
    params: &ModelParams,
    mut lo: f64,
    mut hi: f64,
    mut lo_fs: FixedSpeed,
    width_scale: f64,
    opts: &PicardOptions,
    checked: bool,
    count: &mut usize,
) -> Result<(f64, FixedSpeed, usize)> {
    for it in 1..=200 {
        let mid = 0.5 * (lo + hi);
        match scan_point(params, mid, lo_fs.c1, opts, checked, count)? {
            None | Some(None) => hi = mid,
            Some(Some(fs)) => {
                let g = fs.g.value;
                if g.abs() < G_TOL && hi - lo < BRACKET_REL_WIDTH * width_scale {
                    return Ok((mid, fs, it));
                }
                if g < 0.0 {
                    lo = mid;
                    lo_fs = fs;
                } else {
                    hi = mid;
                }
            }
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Err(Error::RootRefinement(format!(
        "closure functional did not reach |G| < {G_TOL:e} in [{lo}, {hi}]"
    )))
}

fn speed_root(params: &ModelParams, opts: &WaveOptions, checked: bool) -> Result<SpeedRoot> {
    let c_tilde = params.c_tilde();
    let v_ref = if checked {
        find_vmax(params, c_tilde)?
    } else {
        vmax_by_search(params, c_tilde)?
    };
    let mut count = 0;
    let mut samples: Vec<(f64, Option<FixedSpeed>)> = Vec::new();
    let mut c1 = c_tilde;
    for k in (0..=opts.scan_depth).rev() {
        let v = v_ref * 0.5f64.powi(k as i32);
        let Some(fs) = scan_point(params, v, c1, &opts.picard, checked, &mut count)? else {
            continue;
        };
        if let Some(f) = &fs {
            c1 = f.c1;
        }
        samples.push((v, fs));
    }
    // V_ref belongs to c̃; the self-consistent c1 moves the largest admissible speed.
    let mut v = v_ref;
    for _ in 0..MAX_SCAN_EXTENSION {
        match samples.last() {
            Some((_, Some(f))) if f.g.value < 0.0 => {}
            _ => break,
        }
        v *= SCAN_EXTENSION_FACTOR;
        let Some(fs) = scan_point(params, v, c1, &opts.picard, checked, &mut count)? else {
            continue;
        };
        if let Some(f) = &fs {
            c1 = f.c1;
        }
        samples.push((v, fs));
    }
    let scan: Vec<GSample> = samples
        .iter()
        .map(|(v, fs)| GSample {
            v: *v,
            g: fs.as_ref().map(|f| f.g.value),
        })
        .collect();
    let sign = |s: &GSample| s.g.map_or(1.0, f64::signum);
    let mut brackets = Vec::new();
    for i in 0..scan.len() - 1 {
        if scan[i].g.is_some() && sign(&scan[i]) != sign(&scan[i + 1]) {
            brackets.push(i);
        }
    }
    let Some(&first) = brackets.iter().find(|&&i| sign(&scan[i]) < 0.0) else {
        return Err(Error::NoTravelingWave { scan });
    };
    let other_brackets: Vec<[f64; 2]> = brackets
        .iter()
        .filter(|&&i| i != first)
        .map(|&i| [scan[i].v, scan[i + 1].v])
        .collect();
    if !other_brackets.is_empty() {
        log::warn!("closure functional changes sign in {} further brackets", other_brackets.len());
    }
    let lo_fs = samples[first].1.clone().expect("bracket start has a value");
    let (v, fixed, bisections) = bisect_speed(
        params,
        samples[first].0,
        samples[first + 1].0,
        lo_fs,
        v_ref,
        &opts.picard,
        checked,
        &mut count,
    )?;
    Ok(SpeedRoot {
        v,
        fixed,
        scan,
        other_brackets,
        bisections,
        picard_iterations: count,
    })
}

/// Speed root near a previous one: widen `[v/ρ, v·ρ]` until `G` brackets zero.
fn speed_root_near(params: &ModelParams, v_guess: f64, c1_guess: f64, opts: &WaveOptions) -> Result<SpeedRoot> {
    let mut count = 0;
    // Inadmissible speeds lie above the root, like speeds without a right tip.
    let eval = |v: f64, c1: f64, count: &mut usize| {
        scan_point(params, v, c1, &opts.picard, false, count).map(Option::flatten)
    };
    let mut lo = v_guess;
    let mut lo_fs = eval(lo, c1_guess, &mut count)?;
    let mut hi = v_guess;
    let mut hi_g = lo_fs.as_ref().map(|f| f.g.value);
    let mut scan = vec![GSample { v: lo, g: hi_g }];
    let mut ratio = 1.02;
    for _ in 0..60 {
        let lo_neg = lo_fs.as_ref().is_some_and(|f| f.g.value < 0.0);
        let hi_pos = hi_g.is_none_or(|g| g > 0.0);
        if lo_neg && hi_pos && hi > lo {
            break;
        }
        if lo_neg {
            hi *= ratio;
            let c1 = lo_fs.as_ref().map_or(c1_guess, |f| f.c1);
            hi_g = eval(hi, c1, &mut count)?.map(|f| f.g.value);
            scan.push(GSample { v: hi, g: hi_g });
        } else {
            hi = lo;
            hi_g = lo_fs.as_ref().map(|f| f.g.value);
            lo /= ratio;
            let c1 = lo_fs.as_ref().map_or(c1_guess, |f| f.c1);
            lo_fs = eval(lo, c1, &mut count)?;
            scan.push(GSample {
                v: lo,
                g: lo_fs.as_ref().map(|f| f.g.value),
            });
        }
        ratio *= ratio;
    }
    scan.sort_by(|a, b| a.v.total_cmp(&b.v));
    let (Some(lo_f), true) = (lo_fs, hi_g.is_none_or(|g| g > 0.0) && hi > lo) else {
        return Err(Error::NoTravelingWave { scan });
    };
    if lo_f.g.value >= 0.0 {
        return Err(Error::NoTravelingWave { scan });
    }
    let (v, fixed, bisections) = bisect_speed(params, lo, hi, lo_f, v_guess, &opts.picard, false, &mut count)?;
    Ok(SpeedRoot {
        v,
        fixed,
        scan,
        other_brackets: Vec::new(),
        bisections,
        picard_iterations: count,
    })
}

/// Traveling wave with default options (fixed `p1`).
pub fn solve_traveling_wave(params: &ModelParams) -> Result<TravelingWave> {
    solve_traveling_wave_with(params, &WaveOptions::default())
}

pub fn solve_traveling_wave_with(params: &ModelParams, opts: &WaveOptions) -> Result<TravelingWave> {
    params.validate()?;
    match opts.mode {
        SolveMode::FixedP1 => {
            check_compatibility(params)?;
            let root = speed_root(params, opts, true)?;
            assemble(params, root, opts, 0)
        }
        SolveMode::FixedArea => solve_fixed_area(params, opts),
    }
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NoTravelingWave { .. }
            | Error::RootRefinement(_)
            | Error::TipNotFound(_)
            | Error::SpeedTooLarge { .. }
            | Error::FixedPointDivergence { .. }
            | Error::ProfileInvalid(_)
    )
}

fn solve_fixed_area(params: &ModelParams, opts: &WaveOptions) -> Result<TravelingWave> {
    let target = PI * params.r0 * params.r0;
    let active = params.chi * params.force.f(params.c_tilde());
    let disk = params.gamma / params.r0;
    // Starting pressures: the disk value first, then offsets on either side of it.
    let mut start = None;
    let mut last_err = None;
    for s in INITIAL_PRESSURE_SCALES {
        let p = params.with_p1(active + s * disk);
        match speed_root(&p, opts, false) {
            Ok(root) => {
                start = Some((p, root));
                break;
            }
            Err(e) if recoverable(&e) => {
                log::debug!("fixed-area start at p1 = {} failed: {e}", p.p1);
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let Some((mut p, mut root)) = start else {
        return Err(last_err.expect("at least one starting pressure"));
    };
    let mut area = 2.0 * root.fixed.solution.half_area(root.fixed.g.value);
    let mut previous: Option<(f64, f64)> = None;
    let mut picard_total = root.picard_iterations;
    for it in 1..=AREA_MAX_ITERATIONS {
        if (area - target).abs() < AREA_REL_TOL * target {
            root.picard_iterations = picard_total;
            return assemble(&p, root, opts, it);
        }
        let k = p.p1 - p.chi * p.force.f(root.fixed.c1);
        let scaled = p.chi * p.force.f(root.fixed.c1) + k * (area / target).sqrt();
        let mut next = match previous {
            Some((p_prev, a_prev)) if a_prev != area => {
                let s = p.p1 - (area - target) * (p.p1 - p_prev) / (area - a_prev);
                if s.is_finite() {
                    s
                } else {
                    scaled
                }
            }
            _ => scaled,
        };
        // Halve the pressure update until a wave exists at the new pressure.
        let mut attempt = 0;
        let new_root = loop {
            let trial = p.with_p1(next);
            match speed_root_near(&trial, root.v, root.fixed.c1, opts) {
                Ok(r) => break (trial, r),
                Err(e) if recoverable(&e) && attempt < MAX_PRESSURE_HALVINGS => {
                    attempt += 1;
                    next = 0.5 * (p.p1 + next);
                }
                Err(e) => return Err(e),
            }
        };
        previous = Some((p.p1, area));
        let scan = std::mem::take(&mut root.scan);
        (p, root) = new_root;
        root.scan = scan;
        picard_total += root.picard_iterations;
        area = 2.0 * root.fixed.solution.half_area(root.fixed.g.value);
    }
    Err(Error::RootRefinement(format!(
        "fixed-area iteration did not reach area {target} (last {area} at p1 = {})",
        p.p1
    )))
}

/// Five-point central difference of the reconstructed tilt at `x = 0`.
fn apex_curvature(solution: &TiltSolution) -> f64 {
    let d = 1e-3 * solution.x_right.min(-solution.x_left);
    let y = |x: f64| solution.tilt(x);
    (-y(2.0 * d) + 8.0 * y(d) - 8.0 * y(-d) + y(-2.0 * d)) / (12.0 * d)
}

fn assemble(params: &ModelParams, root: SpeedRoot, opts: &WaveOptions, area_iterations: usize) -> Result<TravelingWave> {
    let profile = ShapeProfile::from_solution(root.fixed.solution, opts.resolution);
    let sol = profile.solution();
    let c1 = profile.c1;
    let v = profile.v;
    let mass_check = 2.0 * c1 * sol.mass_integral(profile.g_value);
    let boundary = export_boundary(&profile, opts.boundary_points);
    let conc: Vec<f64> = boundary
        .points
        .iter()
        .map(|p| c1 * (-params.a * v * p[0]).exp())
        .collect();
    let com = com_velocity(&boundary, &conc, params)?;
    let diagnostics = Diagnostics {
        g_residual: profile.g_value.abs(),
        closure_defect: profile.closure_defect(),
        curvature_residual: curvature_residual(&profile, params),
        mass_check,
        mass_relative_error: (mass_check - params.mass).abs() / params.mass,
        com_velocity: com,
        com_velocity_error: (com[0] - v).hypot(com[1]),
        monotone: profile.is_monotone(),
        tip_curvature: apex_curvature(sol),
        tip_curvature_expected: (params.p1 - params.chi * params.force.f(c1)) / params.gamma,
    };
    Ok(TravelingWave {
        mode: opts.mode,
        v,
        chi: params.chi,
        p1: params.p1,
        c1,
        x_left: profile.x_left,
        x_right: profile.x_right,
        area: profile.area(),
        diagnostics,
        picard_iterations: root.picard_iterations,
        bisection_iterations: root.bisections,
        area_iterations,
        scan: root.scan,
        other_brackets: root.other_brackets,
        profile,
    })
}

/// Counterclockwise closed boundary sampled uniformly in the normal angle,
/// starting at the right tip. The upper half is `(x, h(x))`, the lower half its
/// mirror image; the outward normal at angle `θ` is `(cos θ, sin θ)`.
pub fn export_boundary(profile: &ShapeProfile, resolution: usize) -> Boundary {
    let n = resolution.max(8);
    let sol = profile.solution();
    let upper = n / 2;
    let thetas: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    // Abscissae of the upper half, θ ∈ [0, π], in ascending x.
    let mut xs: Vec<f64> = thetas[..=upper].iter().map(|t| sol.x_of_tilt(t.cos())).collect();
    xs.reverse();
    let hs = sol.heights(&xs, profile.g_value);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for (k, &t) in thetas.iter().enumerate() {
        let (s, c) = t.sin_cos();
        // θ and 2π - θ share an abscissa.
        let (j, sign) = if k <= upper { (upper - k, 1.0) } else { (upper - (n - k), -1.0) };
        let (x, h) = (xs[j], hs[j]);
        points.push([x, sign * h]);
        normals.push([c, s]);
    }
    Boundary { points, normals }
}

/// One row of a sweep in `χ`.
#[derive(Debug, Clone, Serialize)]
pub struct BranchRow {
    pub chi: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "xL")]
    pub x_left: f64,
    #[serde(rename = "xR")]
    pub x_right: f64,
    pub area: f64,
    pub c1: f64,
    pub p1: f64,
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub chi: f64,
    pub result: Result<BranchRow>,
}

/// Independent solves for each `χ`, run concurrently, returned sorted by `χ`.
pub fn sweep_chi(base: &ModelParams, chis: &[f64], opts: &WaveOptions) -> Vec<BranchPoint> {
    if let Ok(cs) = chi_star(base) {
        if let Some(&below) = chis.iter().find(|&&c| c <= cs) {
            log::warn!("sweep includes chi = {below} at or below the threshold {cs}");
        }
    }
    let mut out: Vec<BranchPoint> = chis
        .par_iter()
        .map(|&chi| BranchPoint {
            chi,
            result: solve_traveling_wave_with(&base.with_chi(chi), opts).map(|tw| BranchRow {
                chi,
                v: tw.v,
                x_left: tw.x_left,
                x_right: tw.x_right,
                area: tw.area,
                c1: tw.c1,
                p1: tw.p1,
            }),
        })
        .collect();
    out.sort_by(|a, b| a.chi.total_cmp(&b.chi));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_speed_fixed_point_at_reference_pressure() {
        // sqrt(c1) = 6 - 2.5 f(c1) has the root c1 = 4 for Hill(2, 1).
        let z = zero_speed_state(&ModelParams::reference()).unwrap();
        assert_relative_eq!(z.c1, 4.0, max_relative = 1e-9);
        assert_relative_eq!(z.radius, 0.5, max_relative = 1e-9);
        assert_relative_eq!(z.kappa_eff, 0.8, max_relative = 1e-8);
    }

    #[test]
    fn zero_activity_needs_one_iteration() {
        let p = ModelParams::reference().with_chi(0.0);
        let fs = solve_fixed_v_with(&p, 1.0, 1.0, &PicardOptions::default()).unwrap();
        assert_eq!(fs.iterations, 1);
        let again = picard(&p, 1.0, 7.0, &PicardOptions::default(), true).unwrap();
        assert_relative_eq!(again.c1, fs.c1, max_relative = 1e-13);
    }

    #[test]
    fn fixed_speed_conserves_mass() {
        let p = ModelParams::reference();
        let prof = solve_fixed_v(&p, 0.05).unwrap();
        let mass = 2.0 * prof.c1 * prof.solution().mass_integral(prof.g_value);
        assert!((mass - p.mass).abs() < 1e-9 * p.mass);
    }

    #[test]
    fn no_wave_below_threshold_at_fixed_pressure() {
        match solve_traveling_wave(&ModelParams::reference().with_chi(1.9)) {
            Err(Error::NoTravelingWave { scan }) => assert!(!scan.is_empty()),
            other => panic!("expected no traveling wave, got {other:?}"),
        }
    }

    #[test]
    fn incompatible_pressure_rejected() {
        assert!(matches!(
            solve_traveling_wave(&ModelParams::reference().with_p1(4.0)),
            Err(Error::InvalidParameters(_))
        ));
    }

    #[test]
    fn consistent_fixed_pressure_wave() {
        // χ = 4, p1 = 8.4: the disk has c1 = 4 and a χ c1 f'(c1) = 1.28 > 1.
        let p = ModelParams::reference().with_chi(4.0).with_p1(8.4);
        let tw = solve_traveling_wave(&p).unwrap();
        assert!(tw.v > 0.0);
        let fails = tw.diagnostics.failures(&DiagnosticTolerances::default());
        assert!(fails.is_empty(), "{fails:?}");
    }

    #[test]
    fn disk_boundary_export() {
        let p = ModelParams::reference();
        let prof = ShapeProfile::build(&p, 0.0, 1.0, 50).unwrap();
        let b = export_boundary(&prof, 256);
        let r = 1.0 / 3.5;
        for (pt, nm) in b.points.iter().zip(&b.normals) {
            assert!((pt[0].hypot(pt[1]) - r).abs() < 1e-9);
            assert!((pt[0] - r * nm[0]).abs() < 1e-9 && (pt[1] - r * nm[1]).abs() < 1e-9);
        }
        assert!(b.signed_area() > 0.0);
        assert_eq!(b.normals[0], [1.0, 0.0]);
        assert!((b.points[0][0] - prof.x_right).abs() < 1e-15);
    }

    #[test]
    fn sweep_of_empty_list() {
        assert!(sweep_chi(&ModelParams::reference(), &[], &WaveOptions::default()).is_empty());
    }
}
