//! Linear stability of the stationary disk: the dispersion function `H_m`,
//! its real roots, and the checks built on them.
//!
//! For `λ > 0` the function is real as written. For `λ = -μ² < 0` we return
//! `i^m H_m(λ)`, which is real:
//! `-(μ J_m'(R0 μ)(g_m - μ²) + (κ/R0) m μ² J_m(R0 μ))` with
//! `g_m = γ m (m² - 1) / R0²`. The rotation does not move roots.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::specfun::{bessel_i, bessel_i_complex, bessel_i_prime, bessel_i_prime_complex, bessel_j, bessel_j_prime, jprime_roots};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionParams {
    pub m: u32,
    pub gamma: f64,
    pub r0: f64,
    /// `a χ c̃ f'(c̃)`.
    pub kappa_act: f64,
}

impl DispersionParams {
    pub fn new(m: u32, gamma: f64, r0: f64, kappa_act: f64) -> Result<Self> {
        let dp = Self { m, gamma, r0, kappa_act };
        dp.validate()?;
        Ok(dp)
    }

    pub fn from_model(params: &ModelParams, m: u32) -> Result<Self> {
        Self::new(m, params.gamma, params.r0, params.kappa_act())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.r0 > 0.0 && self.gamma.is_finite() && self.r0.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "gamma and R0 must be positive, got {} and {}",
                self.gamma, self.r0
            )));
        }
        if !(self.kappa_act >= 0.0 && self.kappa_act.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "kappa_act must be nonnegative, got {}",
                self.kappa_act
            )));
        }
        Ok(())
    }

    /// `γ m (m² - 1) / R0²`.
    pub fn curvature_rate(&self) -> f64 {
        let m = self.m as f64;
        self.gamma * m * (m * m - 1.0) / (self.r0 * self.r0)
    }

    fn coupling(&self) -> f64 {
        self.kappa_act * self.m as f64 / self.r0
    }
}

/// `i^m H_m(-μ²)` together with its magnitude scale.
fn h_negative(dp: &DispersionParams, mu: f64) -> Result<(f64, f64)> {
    let x = dp.r0 * mu;
    let g = dp.curvature_rate();
    let t1 = mu * bessel_j_prime(dp.m, x)? * (g - mu * mu);
    let t2 = dp.coupling() * mu * mu * bessel_j(dp.m, x)?;
    // |J_m|, |J_m'| ≤ 1 on the real line.
    let scale = mu * (g.abs() + mu * mu) + dp.coupling() * mu * mu;
    Ok((-(t1 + t2), scale))
}

/// `H_m(s²)` for `s > 0` together with its magnitude scale.
fn h_positive(dp: &DispersionParams, s: f64) -> Result<(f64, f64)> {
    let x = -dp.r0 * s;
    let lambda = s * s;
    let t1 = s * bessel_i_prime(dp.m, x)? * (lambda + dp.curvature_rate());
    let t2 = dp.coupling() * lambda * bessel_i(dp.m, x)?;
    let scale = (s * bessel_i_prime(dp.m, x)? * (lambda + dp.curvature_rate().abs())).abs() + t2.abs();
    Ok((t1 + t2, scale))
}

/// Real form of `H_m(λ)`; see the module documentation for `λ < 0`.
pub fn eval_hm(dp: &DispersionParams, lambda: f64) -> Result<f64> {
    if lambda > 0.0 {
        Ok(h_positive(dp, lambda.sqrt())?.0)
    } else if lambda < 0.0 {
        Ok(h_negative(dp, (-lambda).sqrt())?.0)
    } else {
        Ok(0.0)
    }
}

/// `H_m(z)` on the principal branch of `z^{1/2}`.
pub fn eval_hm_complex(dp: &DispersionParams, z: Complex64) -> Result<Complex64> {
    let s = z.sqrt();
    let w = -s * dp.r0;
    let ip = bessel_i_prime_complex(dp.m, w)?;
    let i = bessel_i_complex(dp.m, w)?;
    Ok(s * ip * (z + dp.curvature_rate()) + z * i * dp.coupling())
}

/// `H_m(z) / z^{m/2}`, entire in `z`.
fn entire_part(dp: &DispersionParams, z: Complex64) -> Result<Complex64> {
    Ok(eval_hm_complex(dp, z)? / z.sqrt().powu(dp.m))
}

/// Smallest `|λ|` examined by the scan; `λ = 0` is handled analytically.
pub const ZERO_EXCLUSION: f64 = 1e-8;
/// Default search window in `λ`.
pub const DEFAULT_WINDOW: [f64; 2] = [-200.0, 200.0];
/// Scan step in `μ = |λ|^{1/2}`, in units of `1/R0`.
const SCAN_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub m: u32,
    pub kappa_act: f64,
    /// Nonzero real eigenvalues found, ascending.
    pub eigenvalues: Vec<f64>,
    /// `|H_m|` at each root relative to the magnitude of its terms.
    pub residuals: Vec<f64>,
    /// Largest real eigenvalue, including `0` when it is an eigenvalue of this mode.
    pub leading: Option<f64>,
    pub zero_multiplicity: u32,
    /// More than `max_count` roots were present in the window.
    pub truncated: bool,
}

/// Number of independent eigenmodes at `λ = 0`: two for `m = 0`, one for `m = 1`.
pub fn zero_multiplicity(m: u32) -> u32 {
    match m {
        0 => 2,
        1 => 1,
        _ => 0,
    }
}

/// Sign-change roots of `h` on `[a, b]` in the variable `t`, refined by bisection.
fn scan_variable<F>(h: F, a: f64, b: f64, step: f64, out: &mut Vec<(f64, f64)>) -> Result<()>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    if !(b > a) {
        return Ok(());
    }
    let n = ((b - a) / step).ceil().max(1.0) as usize;
    let node = |k: usize| if k == n { b } else { a + (b - a) * k as f64 / n as f64 };
    let mut t0 = a;
    let mut h0 = h(t0)?.0;
    for k in 1..=n {
        let t1 = node(k);
        let h1 = h(t1)?.0;
        if h0 == 0.0 {
            out.push((t0, h(t0)?.1));
        } else if h0 * h1 < 0.0 {
            let (mut lo, mut hi, mut hlo) = (t0, t1, h0);
            while hi - lo > 4.0 * f64::EPSILON * hi {
                let mid = 0.5 * (lo + hi);
                let hm = h(mid)?.0;
                if hm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if hm * hlo < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    hlo = hm;
                }
            }
            let root = 0.5 * (lo + hi);
            let (v, scale) = h(root)?;
            out.push((root, if scale > 0.0 { v.abs() / scale } else { v.abs() }));
        }
        t0 = t1;
        h0 = h1;
    }
    if h0 == 0.0 {
        out.push((t0, 0.0));
    }
    Ok(())
}

/// Real eigenvalues of mode `m` in `[lo, hi]`, scanning in `μ = |λ|^{1/2}` on
/// each side of zero and keeping at most `max_count` roots of largest value.
pub fn real_eigenvalues(dp: &DispersionParams, window: [f64; 2], max_count: usize) -> Result<SpectrumResult> {
    dp.validate()?;
    let [lo, hi] = window;
    if !(lo < hi) {
        return Err(Error::InvalidParameters(format!("empty window [{lo}, {hi}]")));
    }
    let step = (SCAN_STEP / dp.r0).min(PI * PI / (4.0 * dp.r0 * dp.r0));
    let mut roots: Vec<(f64, f64)> = Vec::new();
    if lo < -ZERO_EXCLUSION {
        let mut found = Vec::new();
        let mu_a = (-hi).max(ZERO_EXCLUSION).sqrt();
        scan_variable(|mu| h_negative(dp, mu), mu_a, (-lo).sqrt(), step, &mut found)?;
        roots.extend(found.into_iter().map(|(mu, r)| (-mu * mu, r)));
    }
    if hi > ZERO_EXCLUSION {
        let mut found = Vec::new();
        let s_a = lo.max(ZERO_EXCLUSION).sqrt();
        scan_variable(|s| h_positive(dp, s), s_a, hi.sqrt(), step, &mut found)?;
        roots.extend(found.into_iter().map(|(s, r)| (s * s, r)));
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    roots.dedup_by(|a, b| a.0 == b.0);
    let truncated = roots.len() > max_count;
    if truncated {
        roots.drain(..roots.len() - max_count);
    }
    let zero = if lo <= 0.0 && hi >= 0.0 { zero_multiplicity(dp.m) } else { 0 };
    let top = roots.last().map(|r| r.0);
    let leading = match (top, zero > 0) {
        (Some(t), true) => Some(t.max(0.0)),
        (Some(t), false) => Some(t),
        (None, true) => Some(0.0),
        (None, false) => None,
    };
    Ok(SpectrumResult {
        m: dp.m,
        kappa_act: dp.kappa_act,
        eigenvalues: roots.iter().map(|r| r.0).collect(),
        residuals: roots.iter().map(|r| r.1).collect(),
        leading,
        zero_multiplicity: zero,
        truncated,
    })
}

/// [`real_eigenvalues`] for several modes, computed concurrently.
pub fn spectrum_modes(
    gamma: f64,
    r0: f64,
    kappa_act: f64,
    modes: &[u32],
    window: [f64; 2],
    max_count: usize,
) -> Result<Vec<SpectrumResult>> {
    modes
        .par_iter()
        .map(|&m| real_eigenvalues(&DispersionParams::new(m, gamma, r0, kappa_act)?, window, max_count))
        .collect()
}

/// Small-`λ` expansion of the unstable `m = 1` root: `8(κ - 1) / (R0² (3 - κ))`.
pub fn leading_eigenvalue_approx(dp: &DispersionParams) -> Result<f64> {
    let k = dp.kappa_act;
    if k >= 3.0 {
        return Err(Error::ExpansionInvalid { kappa_act: k });
    }
    if (k - 1.0).abs() >= 0.5 {
        log::warn!("leading-eigenvalue expansion used far from kappa_act = 1 (kappa_act = {k})");
    }
    Ok(8.0 * (k - 1.0) / (dp.r0 * dp.r0 * (3.0 - k)))
}

/// Spectrum without active coupling: the curvature value `-m(m² - 1)` followed
/// by `-λ_{m,p}²` for the first `p_count` positive roots of `J_m'`.
///
/// The curvature value carries no `γ / R0²` factor, and the diffusion values
/// none of `R0`, so they match `H_m` only at `γ = R0 = 1`.
pub fn uncoupled_spectrum(m: u32, p_count: usize, gamma: f64, r0: f64) -> Result<Vec<f64>> {
    let _ = (gamma, r0);
    let mf = m as f64;
    let mut out = vec![-mf * (mf * mf - 1.0)];
    out.extend(jprime_roots(m, p_count)?.into_iter().map(|x| -x * x));
    Ok(out)
}

/// Residuals of the two linear relations defining an eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenpairResidual {
    pub r1: f64,
    pub r2: f64,
    /// Both relations vanish identically.
    pub degenerate: bool,
}

/// Builds the null vector `(ρ̂, ĉ)` of the 2×2 mode system at `λ` and returns
/// the residual of each relation, normalized by the row norm and `|(ρ̂, ĉ)| = 1`.
///
/// With `ĉ` rescaled by `a c̃` the rows are
/// `[λ + g_m, (κ/R0) m I_m]` and `[-λ, λ^{1/2} I_m']`, evaluated at `-R0 λ^{1/2}`.
pub fn eigenpair_residual(dp: &DispersionParams, lambda: f64) -> Result<EigenpairResidual> {
    let z = Complex64::new(lambda, 0.0);
    let s = z.sqrt();
    let w = -s * dp.r0;
    let rows = [
        [z + dp.curvature_rate(), bessel_i_complex(dp.m, w)? * dp.coupling()],
        [-z, s * bessel_i_prime_complex(dp.m, w)?],
    ];
    let norms = rows.map(|r| (r[0].norm_sqr() + r[1].norm_sqr()).sqrt());
    if norms.iter().all(|&n| n == 0.0) {
        return Ok(EigenpairResidual {
            r1: 0.0,
            r2: 0.0,
            degenerate: true,
        });
    }
    let v = null_vector(&rows);
    let res = |i: usize| {
        if norms[i] == 0.0 {
            0.0
        } else {
            (rows[i][0] * v[0] + rows[i][1] * v[1]).norm() / norms[i]
        }
    };
    Ok(EigenpairResidual {
        r1: res(0),
        r2: res(1),
        degenerate: false,
    })
}

/// Unit right-singular vector of the smallest singular value of a 2×2 matrix.
fn null_vector(a: &[[Complex64; 2]; 2]) -> [Complex64; 2] {
    // Gram matrix A^H A = [[p, q], [q̄, r]].
    let p = a[0][0].norm_sqr() + a[1][0].norm_sqr();
    let r = a[0][1].norm_sqr() + a[1][1].norm_sqr();
    let q = a[0][0].conj() * a[0][1] + a[1][0].conj() * a[1][1];
    let mean = 0.5 * (p + r);
    let half = (0.25 * (p - r) * (p - r) + q.norm_sqr()).sqrt();
    let small = mean - half;
    // (G - σ I) v = 0; take the better conditioned row.
    let v = if (p - small).abs() >= (r - small).abs() {
        [-q, Complex64::new(p - small, 0.0)]
    } else {
        [Complex64::new(r - small, 0.0), -q.conj()]
    };
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    if n == 0.0 {
        // G is a multiple of the identity; every vector is singular.
        return [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    }
    [v[0] / n, v[1] / n]
}

/// Number of zeros of `H_m(z) / z^{m/2}` inside the rectangle
/// `[re.0, re.1] × [im.0, im.1]`, counted with multiplicity by the argument
/// principle. The boundary must avoid zeros and the origin.
pub fn count_zeros_in_rectangle(dp: &DispersionParams, re: [f64; 2], im: [f64; 2]) -> Result<i64> {
    let corners = [
        Complex64::new(re[0], im[0]),
        Complex64::new(re[1], im[0]),
        Complex64::new(re[1], im[1]),
        Complex64::new(re[0], im[1]),
    ];
    let mut total = 0.0;
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let n = 256;
        let mut za = a;
        let mut ea = entire_part(dp, za)?;
        for j in 1..=n {
            let zb = a + (b - a) * (j as f64 / n as f64);
            let eb = entire_part(dp, zb)?;
            total += arg_change(dp, za, zb, ea, eb, 0)?;
            za = zb;
            ea = eb;
        }
    }
    Ok((total / TAU).round() as i64)
}

fn arg_change(dp: &DispersionParams, za: Complex64, zb: Complex64, ea: Complex64, eb: Complex64, depth: u32) -> Result<f64> {
    let d = (eb / ea).arg();
    if d.abs() < 0.25 * PI || depth >= 30 {
        return Ok(d);
    }
    let zm = 0.5 * (za + zb);
    let em = entire_part(dp, zm)?;
    Ok(arg_change(dp, za, zm, ea, em, depth + 1)? + arg_change(dp, zm, zb, em, eb, depth + 1)?)
}

/// `(λ, H_m(λ))` samples on a uniform grid, omitting `|λ| < ZERO_EXCLUSION`.
pub fn dispersion_trace(dp: &DispersionParams, window: [f64; 2], samples: usize) -> Result<Vec<(f64, f64)>> {
    let n = samples.max(2);
    (0..n)
        .map(|k| window[0] + (window[1] - window[0]) * k as f64 / (n - 1) as f64)
        .filter(|l| l.abs() >= ZERO_EXCLUSION)
        .map(|l| Ok((l, eval_hm(dp, l)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::j_roots;
    use approx::assert_relative_eq;

    fn dp(m: u32, kappa: f64) -> DispersionParams {
        DispersionParams::new(m, 1.0, 1.0, kappa).unwrap()
    }

    #[test]
    fn mode_zero_closed_form() {
        // H_0(λ) = λ^{3/2} I_1(-R0 λ^{1/2}) from the general formula.
        let d = DispersionParams::new(0, 1.3, 0.7, 0.4).unwrap();
        for lambda in [0.3f64, 2.0, 17.0] {
            let s: f64 = lambda.sqrt();
            let expect = lambda * s * bessel_i(1, -0.7 * s).unwrap();
            assert_relative_eq!(eval_hm(&d, lambda).unwrap(), expect, max_relative = 1e-13);
        }
        let x11 = j_roots(1, 1).unwrap()[0];
        assert!(eval_hm(&dp(0, 0.0), -x11 * x11).unwrap().abs() < 1e-10);
    }

    #[test]
    fn real_form_matches_complex_evaluation() {
        for m in 0..4u32 {
            let d = DispersionParams::new(m, 0.8, 1.4, 1.3).unwrap();
            for lambda in [-37.0, -2.5, 0.4, 12.0] {
                let h = eval_hm_complex(&d, Complex64::new(lambda, 0.0)).unwrap();
                let rotated = if lambda < 0.0 { h * Complex64::i().powu(m) } else { h };
                let real = eval_hm(&d, lambda).unwrap();
                assert!((rotated.re - real).abs() < 1e-10 * (1.0 + real.abs()));
                assert!(rotated.im.abs() < 1e-10 * (1.0 + real.abs()));
            }
        }
    }

    #[test]
    fn mode_one_small_lambda_at_threshold() {
        // H_1(λ) ~ λ^{3/2}(1 - κ)/2 at leading order, so κ = 1 cancels it.
        let lambda: f64 = 1e-4;
        let lead = lambda.powf(1.5);
        let at_one = eval_hm(&dp(1, 1.0), lambda).unwrap();
        let below = eval_hm(&dp(1, 0.5), lambda).unwrap();
        assert!(at_one.abs() < 1e-3 * lead);
        assert_relative_eq!(below, 0.25 * lead, max_relative = 1e-3);
    }

    #[test]
    fn uncoupled_roots_are_diffusion_modes() {
        let r = real_eigenvalues(&dp(0, 0.0), DEFAULT_WINDOW, 50).unwrap();
        let x = j_roots(1, 3).unwrap();
        let n = r.eigenvalues.len();
        for k in 0..3 {
            assert_relative_eq!(r.eigenvalues[n - 1 - k], -x[k] * x[k], max_relative = 1e-12);
        }
        assert!(r.residuals.iter().all(|&e| e < 1e-10));
        assert_eq!(r.zero_multiplicity, 2);
        assert_eq!(r.leading, Some(0.0));
    }

    #[test]
    fn curvature_root_for_higher_modes() {
        // Without coupling, λ = -γ m (m² - 1)/R0² is a root.
        let d = DispersionParams::new(2, 0.5, 1.5, 0.0).unwrap();
        let r = real_eigenvalues(&d, [-5.0, 5.0], 10).unwrap();
        let g = d.curvature_rate();
        assert!(r.eigenvalues.iter().any(|&l| (l + g).abs() < 1e-10));
    }

    #[test]
    fn unstable_mode_one_root() {
        let d = dp(1, 1.1);
        let r = real_eigenvalues(&d, DEFAULT_WINDOW, 50).unwrap();
        let top = *r.eigenvalues.last().unwrap();
        let approx = leading_eigenvalue_approx(&d).unwrap();
        assert!(top > 0.0 && (top - approx).abs() < 0.15 * approx);
        assert!(real_eigenvalues(&dp(1, 0.95), [1e-6, 200.0], 10).unwrap().eigenvalues.is_empty());
    }

    #[test]
    fn truncation_keeps_largest_roots() {
        let full = real_eigenvalues(&dp(0, 0.0), DEFAULT_WINDOW, 50).unwrap();
        let cut = real_eigenvalues(&dp(0, 0.0), DEFAULT_WINDOW, 2).unwrap();
        assert!(cut.truncated && !full.truncated);
        assert_eq!(cut.eigenvalues[..], full.eigenvalues[full.eigenvalues.len() - 2..]);
    }

    #[test]
    fn expansion_values() {
        assert_eq!(leading_eigenvalue_approx(&dp(1, 1.0)).unwrap(), 0.0);
        assert_relative_eq!(leading_eigenvalue_approx(&dp(1, 1.1)).unwrap(), 0.8 / 1.9, max_relative = 1e-14);
        assert_relative_eq!(leading_eigenvalue_approx(&dp(1, 0.9)).unwrap(), -0.8 / 2.1, max_relative = 1e-14);
        assert!(matches!(
            leading_eigenvalue_approx(&dp(1, 3.0)),
            Err(Error::ExpansionInvalid { .. })
        ));
    }

    #[test]
    fn uncoupled_lists() {
        let s = uncoupled_spectrum(2, 2, 1.0, 1.0).unwrap();
        assert_eq!(s[0], -6.0);
        let s1 = uncoupled_spectrum(1, 1, 1.0, 1.0).unwrap();
        assert_eq!(s1[0], 0.0);
        assert_relative_eq!(s1[1], -1.841_183_781_340_659_3f64.powi(2), max_relative = 1e-12);
    }

    #[test]
    fn eigenpair_detects_non_roots() {
        for (m, k) in [(0u32, 0.3), (1, 1.1), (2, 0.7), (3, 1.4)] {
            let d = dp(m, k);
            let r = real_eigenvalues(&d, DEFAULT_WINDOW, 50).unwrap();
            for &l in &r.eigenvalues {
                let e = eigenpair_residual(&d, l).unwrap();
                assert!(e.r1 < 1e-8 && e.r2 < 1e-8, "m={m} λ={l} {e:?}");
                let p = eigenpair_residual(&d, l * (1.0 + 1e-3)).unwrap();
                assert!(p.r1.max(p.r2) > 1e-6, "m={m} λ={l} {p:?}");
            }
        }
    }

    #[test]
    fn argument_principle_counts_unstable_root() {
        assert_eq!(count_zeros_in_rectangle(&dp(1, 1.1), [1e-3, 30.0], [-20.0, 20.0]).unwrap(), 1);
        assert_eq!(count_zeros_in_rectangle(&dp(1, 0.9), [1e-3, 30.0], [-20.0, 20.0]).unwrap(), 0);
    }

    #[test]
    fn invalid_parameters() {
        assert!(DispersionParams::new(1, 0.0, 1.0, 1.0).is_err());
        assert!(DispersionParams::new(1, 1.0, 1.0, -0.1).is_err());
        assert!(real_eigenvalues(&dp(1, 1.0), [1.0, -1.0], 5).is_err());
    }
}
