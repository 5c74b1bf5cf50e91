//! Model parameters, active force laws, the stationary disk and boundary diagnostics.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// A user-supplied force law. `eval` returns `[f, f', f'', f''']` at `s`.
pub trait ForceLaw: Send + Sync {
    fn eval(&self, s: f64) -> [f64; 4];
    /// Saturation value `L`, an upper bound of `f`.
    fn bound(&self) -> f64;
    fn name(&self) -> &str {
        "custom"
    }
}

/// Table of `[s, f, f', f'', f''']` rows with Hermite interpolation between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTable {
    rows: Vec<[f64; 5]>,
    bound: f64,
}

/// Relative tolerance of the divided-difference check on tables.
const TABLE_FD_TOL: f64 = 5e-2;
/// Relative tolerance of the central-difference check on callable forces.
const CALLABLE_FD_TOL: f64 = 1e-6;

impl ForceTable {
    pub fn new(rows: Vec<[f64; 5]>, bound: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameters(format!("force table: {msg}")));
        if rows.len() < 4 {
            return bad(format!("need at least 4 rows, got {}", rows.len()));
        }
        if !(bound.is_finite() && bound > 0.0) {
            return bad(format!("bound L must be positive, got {bound}"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite entry".into());
        }
        if rows[0][0] != 0.0 || rows[0][1] != 0.0 {
            return bad("first row must be s = 0 with f = 0".into());
        }
        for w in rows.windows(2) {
            if w[1][0] <= w[0][0] {
                return bad(format!("abscissae not strictly increasing at s = {}", w[1][0]));
            }
            if w[1][1] <= w[0][1] {
                return bad(format!("f not strictly increasing at s = {}", w[1][0]));
            }
        }
        if let Some(r) = rows.iter().find(|r| r[1] > bound) {
            return bad(format!("f({}) = {} exceeds L = {bound}", r[0], r[1]));
        }
        for level in 1..4 {
            let scale = rows.iter().map(|r| r[level + 1].abs()).fold(0.0, f64::max);
            for i in 1..rows.len() - 1 {
                let dd = (rows[i + 1][level] - rows[i - 1][level]) / (rows[i + 1][0] - rows[i - 1][0]);
                let tabulated = rows[i][level + 1];
                if (dd - tabulated).abs() > TABLE_FD_TOL * scale.max(f64::MIN_POSITIVE) + 1e-12 {
                    return bad(format!(
                        "derivative column {level} inconsistent at s = {}: tabulated {tabulated}, divided difference {dd}",
                        rows[i][0]
                    ));
                }
            }
        }
        Ok(Self { rows, bound })
    }

    pub fn rows(&self) -> &[[f64; 5]] {
        &self.rows
    }

    /// Column `k` is interpolated as a cubic Hermite spline with slopes from
    /// column `k+1`; `f'''` is linear. Beyond the last node `f` is held
    /// constant and all derivatives vanish.
    fn eval(&self, s: f64) -> [f64; 4] {
        let last = self.rows.len() - 1;
        let s = s.max(0.0);
        if s >= self.rows[last][0] {
            return [self.rows[last][1], 0.0, 0.0, 0.0];
        }
        let i = match self.rows.binary_search_by(|r| r[0].total_cmp(&s)) {
            Ok(i) => i.min(last - 1),
            Err(i) => i - 1,
        };
        let (r0, r1) = (&self.rows[i], &self.rows[i + 1]);
        let h = r1[0] - r0[0];
        let t = (s - r0[0]) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let mut out = [0.0; 4];
        for k in 0..3 {
            out[k] = h00 * r0[k + 1] + h10 * h * r0[k + 2] + h01 * r1[k + 1] + h11 * h * r1[k + 2];
        }
        out[3] = (1.0 - t) * r0[4] + t * r1[4];
        out
    }
}

/// The active traction `f` with its first three derivatives.
#[derive(Clone)]
pub enum ActiveForce {
    /// `f(s) = L s / (alpha + s)`.
    Hill { l: f64, alpha: f64 },
    Table(ForceTable),
    Custom(Arc<dyn ForceLaw>),
}

impl fmt::Debug for ActiveForce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActiveForce::Hill { l, alpha } => write!(f, "Hill {{ l: {l}, alpha: {alpha} }}"),
            ActiveForce::Table(t) => write!(f, "Table({} rows, L = {})", t.rows.len(), t.bound),
            ActiveForce::Custom(c) => write!(f, "Custom({}, L = {})", c.name(), c.bound()),
        }
    }
}

impl ActiveForce {
    pub fn hill(l: f64, alpha: f64) -> Self {
        ActiveForce::Hill { l, alpha }
    }

    /// Wraps a callable force after checking its derivatives by central
    /// differences on a logarithmic grid of `[1e-2, 1e2]·scale`.
    pub fn custom(law: Arc<dyn ForceLaw>, scale: f64) -> Result<Self> {
        let force = ActiveForce::Custom(law);
        force.check_derivatives(scale)?;
        Ok(force)
    }

    /// `[f, f', f'', f''']` at `s`.
    pub fn derivatives(&self, s: f64) -> [f64; 4] {
        match self {
            ActiveForce::Hill { l, alpha } => {
                let d = alpha + s;
                let la = l * alpha;
                [l * s / d, la / (d * d), -2.0 * la / (d * d * d), 6.0 * la / (d * d * d * d)]
            }
            ActiveForce::Table(t) => t.eval(s),
            ActiveForce::Custom(c) => c.eval(s),
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match self {
            ActiveForce::Hill { l, alpha } => l * s / (alpha + s),
            _ => self.derivatives(s)[0],
        }
    }

    pub fn df(&self, s: f64) -> f64 {
        self.derivatives(s)[1]
    }

    /// The saturation value `L`.
    pub fn bound(&self) -> f64 {
        match self {
            ActiveForce::Hill { l, .. } => *l,
            ActiveForce::Table(t) => t.bound,
            ActiveForce::Custom(c) => c.bound(),
        }
    }

    pub fn kind(&self) -> &str {
        match self {
            ActiveForce::Hill { .. } => "hill",
            ActiveForce::Table(_) => "table",
            ActiveForce::Custom(c) => c.name(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ActiveForce::Hill { l, alpha } => {
                if !(l.is_finite() && *l > 0.0 && alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::InvalidParameters(format!(
                        "Hill force needs L > 0 and alpha > 0, got L = {l}, alpha = {alpha}"
                    )));
                }
                Ok(())
            }
            ActiveForce::Table(_) => Ok(()),
            ActiveForce::Custom(c) => {
                let l = c.bound();
                if !(l.is_finite() && l > 0.0) {
                    return Err(Error::InvalidParameters(format!("force bound L must be positive, got {l}")));
                }
                if c.eval(0.0)[0] != 0.0 {
                    return Err(Error::InvalidParameters("force must satisfy f(0) = 0".into()));
                }
                Ok(())
            }
        }
    }

    fn check_derivatives(&self, scale: f64) -> Result<()> {
        self.validate()?;
        let mut prev_f = self.f(0.0);
        for k in 0..=40 {
            let s = scale * 10f64.powf(-2.0 + 0.1 * k as f64);
            let d = self.derivatives(s);
            if d[0] <= prev_f || d[0] > self.bound() {
                return Err(Error::InvalidParameters(format!(
                    "force must be increasing and bounded by L; violated at s = {s}"
                )));
            }
            prev_f = d[0];
            let h = 1e-4 * s;
            let lo = self.derivatives(s - h);
            let hi = self.derivatives(s + h);
            for level in 0..3 {
                let fd = (hi[level] - lo[level]) / (2.0 * h);
                let exact = d[level + 1];
                let tol = CALLABLE_FD_TOL * exact.abs().max(1e-8 * d[1].abs().max(1.0));
                if (fd - exact).abs() > tol.max(1e3 * f64::EPSILON * d[level].abs() / h) {
                    return Err(Error::InvalidParameters(format!(
                        "derivative of order {} inconsistent at s = {s}: supplied {exact}, central difference {fd}",
                        level + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Physical constants of the model. Diffusion is fixed to 1.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub gamma: f64,
    pub chi: f64,
    pub a: f64,
    pub mass: f64,
    pub r0: f64,
    pub p1: f64,
    pub force: ActiveForce,
}

impl ModelParams {
    /// γ = 1, χ = 2.5, a = 1, M = π, R0 = 1, p1 = 6, Hill(L = 2, α = 1).
    pub fn reference() -> Self {
        Self {
            gamma: 1.0,
            chi: 2.5,
            a: 1.0,
            mass: PI,
            r0: 1.0,
            p1: 6.0,
            force: ActiveForce::hill(2.0, 1.0),
        }
    }

    pub fn with_chi(&self, chi: f64) -> Self {
        Self { chi, ..self.clone() }
    }

    pub fn with_p1(&self, p1: f64) -> Self {
        Self { p1, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameters(msg));
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return fail(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.chi.is_finite() && self.chi >= 0.0) {
            return fail(format!("chi must be non-negative, got {}", self.chi));
        }
        if !(self.a > 0.0 && self.a <= 1.0) {
            return fail(format!("a must lie in (0, 1], got {}", self.a));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return fail(format!("M must be positive, got {}", self.mass));
        }
        if !(self.r0.is_finite() && self.r0 > 0.0) {
            return fail(format!("R0 must be positive, got {}", self.r0));
        }
        if !self.p1.is_finite() {
            return fail(format!("p1 must be finite, got {}", self.p1));
        }
        self.force.validate()
    }

    /// `c̃ = M / (π R0²)`.
    pub fn c_tilde(&self) -> f64 {
        self.mass / (PI * self.r0 * self.r0)
    }

    /// `a χ c̃ f'(c̃)`, equal to `χ / χ*`.
    pub fn kappa_act(&self) -> f64 {
        let c = self.c_tilde();
        self.a * self.chi * c * self.force.df(c)
    }

    /// Parses a parameter document. Keys may be flat (`"force.kind"`) or nested
    /// (`"force": {"kind": ...}`). `p1` defaults to the stationary pressure.
    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("parameter document must be a JSON object".into()))?;
        let mut force_obj = Map::new();
        if let Some(nested) = obj.get("force") {
            let nested = nested
                .as_object()
                .ok_or_else(|| Error::Config("`force` must be an object".into()))?;
            force_obj.extend(nested.clone());
        }
        for (k, v) in obj {
            if let Some(rest) = k.strip_prefix("force.") {
                force_obj.insert(rest.to_string(), v.clone());
            }
        }
        let number = |map: &Map<String, Value>, key: &str, label: &str| -> Result<f64> {
            match map.get(key) {
                None => Err(Error::Config(format!("missing key `{label}`"))),
                Some(v) => v
                    .as_f64()
                    .ok_or_else(|| Error::Config(format!("key `{label}` must be a number"))),
            }
        };
        let kind = force_obj
            .get("kind")
            .map(|v| v.as_str().map(str::to_owned))
            .unwrap_or(Some("hill".into()))
            .ok_or_else(|| Error::Config("key `force.kind` must be a string".into()))?;
        let force = match kind.as_str() {
            "hill" => ActiveForce::hill(
                number(&force_obj, "L", "force.L")?,
                number(&force_obj, "alpha", "force.alpha")?,
            ),
            "table" => {
                let rows_value = force_obj
                    .get("rows")
                    .ok_or_else(|| Error::Config("missing key `force.rows`".into()))?;
                let rows: Vec<[f64; 5]> = serde_json::from_value(rows_value.clone()).map_err(|e| {
                    Error::Config(format!("`force.rows` must be a list of [s, f, f', f'', f'''] rows: {e}"))
                })?;
                ActiveForce::Table(ForceTable::new(rows, number(&force_obj, "L", "force.L")?)?)
            }
            other => return Err(Error::Config(format!("unknown force kind `{other}`"))),
        };
        let mut params = Self {
            gamma: number(obj, "gamma", "gamma")?,
            chi: number(obj, "chi", "chi")?,
            a: number(obj, "a", "a")?,
            mass: number(obj, "M", "M")?,
            r0: number(obj, "R0", "R0")?,
            p1: 0.0,
            force,
        };
        params.p1 = match obj.get("p1") {
            Some(_) => number(obj, "p1", "p1")?,
            None => stationary_state(&params)?.p_tilde,
        };
        params.validate()?;
        Ok(params)
    }

    /// Flat key-value representation.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "gamma": self.gamma,
            "chi": self.chi,
            "a": self.a,
            "M": self.mass,
            "R0": self.r0,
            "p1": self.p1,
            "force.kind": self.force.kind(),
            "force.L": self.force.bound(),
        });
        match &self.force {
            ActiveForce::Hill { alpha, .. } => {
                v["force.alpha"] = json!(alpha);
            }
            ActiveForce::Table(t) => {
                v["force.rows"] = json!(t.rows);
            }
            ActiveForce::Custom(_) => {}
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryState {
    pub c_tilde: f64,
    pub p_tilde: f64,
}

/// The radially symmetric steady state: `c̃ = M/(πR0²)`, `P̃ = γ/R0 + χ f(c̃)`.
pub fn stationary_state(params: &ModelParams) -> Result<StationaryState> {
    let c_tilde = params.c_tilde();
    if !(c_tilde > 0.0 && c_tilde.is_finite()) {
        return Err(Error::InvalidParameters(format!("c_tilde = {c_tilde} is not positive")));
    }
    Ok(StationaryState {
        c_tilde,
        p_tilde: params.gamma / params.r0 + params.chi * params.force.f(c_tilde),
    })
}

/// The activity threshold `χ* = 1/(a c̃ f'(c̃))`.
pub fn chi_star(params: &ModelParams) -> Result<f64> {
    let c = params.c_tilde();
    let df = params.force.df(c);
    if !(df > 0.0) {
        return Err(Error::DegenerateForce(format!("f'(c_tilde) = {df} is not positive")));
    }
    Ok(1.0 / (params.a * c * df))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    /// `sup a χ s f'(s) < 1`: no traveling wave can exist.
    pub holds: bool,
    pub sup_value: f64,
    pub argmax: f64,
    /// The grid supremum sat on the right end of the search interval.
    pub at_boundary: bool,
}

/// Evaluates `sup_{s>0} a χ s f'(s)`.
///
/// Hill forces use the closed form `L/4` at `s = α`. Other forces are sampled
/// on `grid` points of `[0, s_max]` (default `s_max = 100 c̃`) and refined three
/// times by 10x around the running argmax.
pub fn nonexistence_certificate(params: &ModelParams, s_max: Option<f64>, grid: usize) -> Result<Certificate> {
    let scale = params.a * params.chi;
    if let ActiveForce::Hill { l, alpha } = params.force {
        let sup_value = scale * l / 4.0;
        return Ok(Certificate {
            holds: sup_value < 1.0,
            sup_value,
            argmax: alpha,
            at_boundary: false,
        });
    }
    let s_max = s_max.unwrap_or(100.0 * params.c_tilde());
    if !(s_max > 0.0) || grid < 2 {
        return Err(Error::InvalidParameters(format!(
            "certificate needs s_max > 0 and at least 2 grid points, got {s_max}, {grid}"
        )));
    }
    let g = |s: f64| s * params.force.df(s);
    let (mut lo, mut hi) = (0.0, s_max);
    let (mut best_s, mut best) = (0.0, g(0.0));
    for _round in 0..4 {
        let step = (hi - lo) / (grid - 1) as f64;
        for i in 0..grid {
            let s = lo + step * i as f64;
            let v = g(s);
            if v > best {
                best = v;
                best_s = s;
            }
        }
        lo = (best_s - step).max(0.0);
        hi = (best_s + step).min(s_max);
    }
    let at_boundary = best_s >= s_max * (1.0 - 1e-9);
    if at_boundary {
        log::warn!("certificate supremum attained at the boundary s_max = {s_max}; the range may be too short");
    }
    let sup_value = scale * best;
    Ok(Certificate {
        holds: sup_value < 1.0,
        sup_value,
        argmax: best_s,
        at_boundary,
    })
}

/// A closed polyline with outward unit normals at the vertices. The closing
/// segment from the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Boundary {
    pub points: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 2]>,
}

impl Boundary {
    /// Signed shoelace area; positive for counterclockwise orientation.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let p = self.points[i];
                let q = self.points[(i + 1) % n];
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
            * 0.5
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| [p[0] + dx, p[1] + dy]).collect(),
            normals: self.normals.clone(),
        }
    }
}

/// Center-of-mass velocity `-(χ/|Ω|) ∮ f(c) n dσ`, trapezoidal on the polyline.
pub fn com_velocity(boundary: &Boundary, concentration: &[f64], params: &ModelParams) -> Result<[f64; 2]> {
    let n = boundary.points.len();
    if n < 3 || boundary.normals.len() != n || concentration.len() != n {
        return Err(Error::Geometry(format!(
            "boundary needs at least 3 vertices with matching normals and concentrations (got {n}, {}, {})",
            boundary.normals.len(),
            concentration.len()
        )));
    }
    let area = boundary.signed_area();
    if !(area > 0.0) {
        return Err(Error::Geometry(format!("boundary area {area} is not positive")));
    }
    let mut acc = [0.0; 2];
    for i in 0..n {
        let j = (i + 1) % n;
        let p = boundary.points[i];
        let q = boundary.points[j];
        let ds = (q[0] - p[0]).hypot(q[1] - p[1]);
        let fi = params.force.f(concentration[i]);
        let fj = params.force.f(concentration[j]);
        for k in 0..2 {
            acc[k] += 0.5 * ds * (fi * boundary.normals[i][k] + fj * boundary.normals[j][k]);
        }
    }
    let s = -params.chi / area;
    Ok([s * acc[0], s * acc[1]])
}

/// Counterclockwise circle sampled at `n` vertices.
pub fn circle(center: [f64; 2], radius: f64, n: usize) -> Boundary {
    let (points, normals) = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let (s, c) = t.sin_cos();
            ([center[0] + radius * c, center[1] + radius * s], [c, s])
        })
        .unzip();
    Boundary { points, normals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn hill(l: f64, alpha: f64) -> ModelParams {
        ModelParams {
            force: ActiveForce::hill(l, alpha),
            ..ModelParams::reference()
        }
    }

    #[test]
    fn stationary_examples() {
        let mut p = ModelParams::reference();
        p.chi = 0.0;
        let s = stationary_state(&p).unwrap();
        assert_eq!((s.c_tilde, s.p_tilde), (1.0, 1.0));
        let s = stationary_state(&ModelParams::reference()).unwrap();
        assert_relative_eq!(s.p_tilde, 3.5, max_relative = 1e-15);
        p.mass = 2.0 * PI;
        assert_relative_eq!(stationary_state(&p).unwrap().c_tilde, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn threshold_examples() {
        let p = ModelParams::reference();
        assert_relative_eq!(chi_star(&p).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(chi_star(&ModelParams { a: 0.5, ..p.clone() }).unwrap(), 4.0, max_relative = 1e-14);
        assert_relative_eq!(chi_star(&hill(1.0, 1.0)).unwrap(), 4.0, max_relative = 1e-14);
    }

    #[test]
    fn hill_derivatives_match_central_differences() {
        let force = ActiveForce::hill(2.0, 1.0);
        for &s in &[0.1, 0.5, 1.0, 3.0, 20.0] {
            let d = force.derivatives(s);
            let h = 1e-5 * s;
            let lo = force.derivatives(s - h);
            let hi = force.derivatives(s + h);
            for k in 0..3 {
                let fd = (hi[k] - lo[k]) / (2.0 * h);
                assert_relative_eq!(fd, d[k + 1], max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn certificate_examples() {
        let c = nonexistence_certificate(&ModelParams::reference().with_chi(1.0), None, 1000).unwrap();
        assert!(c.holds);
        assert_relative_eq!(c.sup_value, 0.5, max_relative = 1e-15);
        assert_eq!(c.argmax, 1.0);
        let c = nonexistence_certificate(&ModelParams::reference().with_chi(3.0), None, 1000).unwrap();
        assert!(!c.holds);
        assert_relative_eq!(c.sup_value, 1.5, max_relative = 1e-15);
        let c = nonexistence_certificate(&ModelParams::reference().with_chi(0.0), None, 1000).unwrap();
        assert!(c.holds);
        assert_eq!(c.sup_value, 0.0);
    }

    struct HillLaw;
    impl ForceLaw for HillLaw {
        fn eval(&self, s: f64) -> [f64; 4] {
            ActiveForce::hill(2.0, 1.0).derivatives(s)
        }
        fn bound(&self) -> f64 {
            2.0
        }
    }

    #[test]
    fn grid_certificate_matches_closed_form() {
        let force = ActiveForce::custom(Arc::new(HillLaw), 1.0).unwrap();
        let p = ModelParams {
            force,
            ..ModelParams::reference()
        };
        let c = nonexistence_certificate(&p, None, 2001).unwrap();
        assert_relative_eq!(c.sup_value, 2.5 * 0.5, max_relative = 1e-8);
        assert!((c.argmax - 1.0).abs() < 1e-3);
        assert!(!c.at_boundary);
    }

    struct WrongDerivative;
    impl ForceLaw for WrongDerivative {
        fn eval(&self, s: f64) -> [f64; 4] {
            let mut d = ActiveForce::hill(2.0, 1.0).derivatives(s);
            d[2] *= 1.1;
            d
        }
        fn bound(&self) -> f64 {
            2.0
        }
    }

    #[test]
    fn callable_force_with_wrong_derivative_is_rejected() {
        assert!(ActiveForce::custom(Arc::new(WrongDerivative), 1.0).is_err());
    }

    fn hill_table(n: usize) -> Vec<[f64; 5]> {
        let force = ActiveForce::hill(2.0, 1.0);
        (0..n)
            .map(|i| {
                let s = 4.0 * i as f64 / (n - 1) as f64;
                let d = force.derivatives(s);
                [s, d[0], d[1], d[2], d[3]]
            })
            .collect()
    }

    #[test]
    fn table_interpolates_hill_closely() {
        let t = ForceTable::new(hill_table(201), 2.0).unwrap();
        let exact = ActiveForce::hill(2.0, 1.0);
        for &s in &[0.013, 0.5, 1.0, 2.71] {
            let got = t.eval(s);
            let want = exact.derivatives(s);
            // f''' is only linear between nodes.
            let tol = [1e-6, 1e-5, 1e-4, 5e-3];
            for k in 0..4 {
                assert!((got[k] - want[k]).abs() < tol[k] * want[k].abs().max(1.0), "s = {s}, k = {k}");
            }
        }
    }

    #[test]
    fn bad_tables_are_rejected() {
        let mut rows = hill_table(41);
        rows[10][2] *= 2.0;
        assert!(ForceTable::new(rows, 2.0).is_err());
        let rows = hill_table(41);
        assert!(ForceTable::new(rows.clone(), 1.0).is_err());
        let mut decreasing = rows;
        decreasing[5][1] = decreasing[4][1];
        assert!(ForceTable::new(decreasing, 2.0).is_err());
    }

    #[test]
    fn json_round_trip_flat_and_nested() {
        let p = ModelParams::reference();
        let back = ModelParams::from_json(&p.to_json()).unwrap();
        assert_eq!(back.to_json(), p.to_json());
        let nested = json!({
            "gamma": 1.0, "chi": 2.5, "a": 1.0, "M": PI, "R0": 1.0, "p1": 6.0,
            "force": {"kind": "hill", "L": 2.0, "alpha": 1.0}
        });
        assert_eq!(ModelParams::from_json(&nested).unwrap().to_json(), p.to_json());
    }

    #[test]
    fn json_missing_key_is_reported() {
        let mut v = ModelParams::reference().to_json();
        v.as_object_mut().unwrap().remove("gamma");
        match ModelParams::from_json(&v) {
            Err(Error::Config(msg)) => assert!(msg.contains("gamma")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn com_velocity_vanishes_for_uniform_circle_and_zero_chi() {
        let b = circle([0.3, -0.2], 1.0, 400);
        let c = vec![1.0; 400];
        let v = com_velocity(&b, &c, &ModelParams::reference()).unwrap();
        assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14);
        let varying: Vec<f64> = b.points.iter().map(|p| (-p[0]).exp()).collect();
        let v = com_velocity(&b, &varying, &ModelParams::reference().with_chi(0.0)).unwrap();
        assert_eq!(v, [0.0, 0.0]);
    }

    #[test]
    fn degenerate_boundary_is_rejected() {
        let b = Boundary {
            points: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            normals: vec![[0.0, 1.0]; 3],
        };
        assert!(matches!(
            com_velocity(&b, &[1.0; 3], &ModelParams::reference()),
            Err(Error::Geometry(_))
        ));
    }

    proptest! {
        #[test]
        fn threshold_identity(l in 0.1f64..10.0, alpha in 0.1f64..10.0, a in 0.05f64..1.0, m in 0.5f64..20.0, r0 in 0.3f64..3.0) {
            let p = ModelParams { a, mass: m, r0, force: ActiveForce::hill(l, alpha), ..ModelParams::reference() };
            let c = p.c_tilde();
            let product = chi_star(&p).unwrap() * a * c * p.force.df(c);
            prop_assert!((product - 1.0).abs() < 1e-14);
        }

        #[test]
        fn certificate_excludes_supercritical_activity(l in 0.1f64..10.0, alpha in 0.1f64..10.0, a in 0.05f64..1.0, chi in 0.0f64..20.0, m in 0.5f64..20.0) {
            let p = ModelParams { a, chi, mass: m, force: ActiveForce::hill(l, alpha), ..ModelParams::reference() };
            let cert = nonexistence_certificate(&p, None, 200).unwrap();
            prop_assert!(!(cert.holds && chi > chi_star(&p).unwrap()));
        }

        #[test]
        fn com_velocity_translation_invariant(dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
            let b = circle([0.0, 0.0], 0.8, 256);
            let c: Vec<f64> = b.points.iter().map(|p| (-0.7 * p[0]).exp()).collect();
            let p = ModelParams::reference();
            let v0 = com_velocity(&b, &c, &p).unwrap();
            let v1 = com_velocity(&b.translated(dx, dy), &c, &p).unwrap();
            prop_assert!((v0[0] - v1[0]).abs() < 1e-12 && (v0[1] - v1[1]).abs() < 1e-12);
        }
    }
}
