//! Dormand-Prince 5(4) stepper for scalar initial-value problems with the
//! standard fourth-order continuous extension.
//!
//! The stepper only advances; stopping conditions (events) are left to the
//! caller, which inspects each accepted [`DenseSegment`].

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; 0 selects one from the problem scale.
    pub h_initial: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_initial: 0.0,
            h_max: f64::INFINITY,
            max_steps: 100_000,
        }
    }
}

/// Continuous extension of one accepted step on `[x0, x0 + h]` (`h` may be negative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSegment {
    pub x0: f64,
    pub h: f64,
    /// Slope at `x0` and at `x0 + h`.
    pub dy0: f64,
    pub dy1: f64,
    r: [f64; 5],
}

impl DenseSegment {
    pub fn x1(&self) -> f64 {
        self.x0 + self.h
    }

    pub fn y0(&self) -> f64 {
        self.r[0]
    }

    pub fn y1(&self) -> f64 {
        self.r[0] + self.r[1]
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = if self.h > 0.0 {
            (self.x0, self.x1())
        } else {
            (self.x1(), self.x0)
        };
        x >= lo && x <= hi
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.h;
        let s = 1.0 - t;
        let r = &self.r;
        r[0] + t * (r[1] + s * (r[2] + t * (r[3] + s * r[4])))
    }

    /// Derivative of the continuous extension.
    pub fn derivative(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.h;
        let s = 1.0 - t;
        let r = &self.r;
        let a = r[3] + s * r[4];
        let b = r[2] + t * a;
        let db = a - t * r[4];
        let c = s * b;
        let dc = -b + s * db;
        (r[1] + c + t * dc) / self.h
    }
}

/// Adaptive Dormand-Prince stepper for `y' = f(x, y)`.
pub struct Dopri5<F: FnMut(f64, f64) -> f64> {
    f: F,
    x: f64,
    y: f64,
    k1: f64,
    h: f64,
    direction: f64,
    opts: Dopri5Options,
    steps: usize,
    err_prev: f64,
}

impl<F: FnMut(f64, f64) -> f64> Dopri5<F> {
    /// `scale` is a characteristic length of the problem used to size the first step.
    pub fn new(mut f: F, x0: f64, y0: f64, direction: f64, scale: f64, opts: Dopri5Options) -> Result<Self> {
        if !(opts.rtol > 0.0 && opts.atol > 0.0) {
            return Err(Error::Integration("tolerances must be positive".into()));
        }
        if direction == 0.0 || !direction.is_finite() {
            return Err(Error::Integration("integration direction must be nonzero".into()));
        }
        let k1 = f(x0, y0);
        if !k1.is_finite() {
            return Err(Error::Integration(format!("non-finite slope {k1} at x = {x0}")));
        }
        let h = if opts.h_initial > 0.0 {
            opts.h_initial
        } else {
            1e-3 * scale.abs().max(f64::MIN_POSITIVE)
        }
        .min(opts.h_max);
        Ok(Self {
            f,
            x: x0,
            y: y0,
            k1,
            h,
            direction: direction.signum(),
            opts,
            steps: 0,
            err_prev: 1e-4,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Advances one accepted step, never beyond `x_end`.
    pub fn step(&mut self, x_end: f64) -> Result<DenseSegment> {
        let remaining = (x_end - self.x) * self.direction;
        if remaining <= 0.0 {
            return Err(Error::Integration(format!("already at end point x = {x_end}")));
        }
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(Error::Integration(format!(
                    "step limit {} reached at x = {}",
                    self.opts.max_steps, self.x
                )));
            }
            self.steps += 1;
            let mut h_abs = self.h.min(self.opts.h_max);
            let last = h_abs >= remaining;
            if last {
                h_abs = remaining;
            }
            let h = h_abs * self.direction;
            if self.x + h == self.x {
                return Err(Error::Integration(format!("step size underflow at x = {}", self.x)));
            }
            let (x, y, k1) = (self.x, self.y, self.k1);
            let f = &mut self.f;
            let k2 = f(x + C2 * h, y + h * A21 * k1);
            let k3 = f(x + C3 * h, y + h * (A31 * k1 + A32 * k2));
            let k4 = f(x + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
            let k5 = f(x + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
            let x_new = if last { x_end } else { x + h };
            let k6 = f(x_new, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
            let y_new = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
            let k7 = f(x_new, y_new);
            if ![k2, k3, k4, k5, k6, k7].iter().all(|k| k.is_finite()) {
                return Err(Error::Integration(format!("non-finite slope near x = {x}")));
            }
            let err_est = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            let sc = self.opts.atol + self.opts.rtol * y.abs().max(y_new.abs());
            let err = (err_est / sc).abs();
            if err <= 1.0 {
                // PI step-size controller.
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.7 / 5.0) * self.err_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0)
                };
                self.err_prev = err.max(1e-4);
                let ydiff = y_new - y;
                let bspl = h * k1 - ydiff;
                let seg = DenseSegment {
                    x0: x,
                    h: x_new - x,
                    dy0: k1,
                    dy1: k7,
                    r: [
                        y,
                        ydiff,
                        bspl,
                        ydiff - h * k7 - bspl,
                        h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
                    ],
                };
                self.x = x_new;
                self.y = y_new;
                self.k1 = k7;
                self.h = h_abs * fac;
                return Ok(seg);
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            self.h = h_abs * fac;
        }
    }
}

/// Ordered sequence of dense segments covering an interval.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DenseSolution {
    pub segments: Vec<DenseSegment>,
}

impl DenseSolution {
    fn locate(&self, x: f64) -> Option<&DenseSegment> {
        let first = self.segments.first()?;
        let forward = first.h > 0.0;
        let idx = self.segments.partition_point(|s| if forward { s.x1() < x } else { s.x1() > x });
        self.segments.get(idx.min(self.segments.len() - 1))
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        self.locate(x).map(|s| s.eval(x))
    }

    pub fn derivative(&self, x: f64) -> Option<f64> {
        self.locate(x).map(|s| s.derivative(x))
    }

    /// Step endpoints `(x, y)`, starting with the initial point.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        if let Some(s) = self.segments.first() {
            out.push((s.x0, s.y0()));
        }
        out.extend(self.segments.iter().map(|s| (s.x1(), s.y1())));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate<F: FnMut(f64, f64) -> f64>(f: F, x0: f64, y0: f64, x_end: f64) -> DenseSolution {
        let mut st = Dopri5::new(f, x0, y0, (x_end - x0).signum(), (x_end - x0).abs(), Dopri5Options::default()).unwrap();
        let mut sol = DenseSolution::default();
        while st.x() != x_end {
            sol.segments.push(st.step(x_end).unwrap());
        }
        sol
    }

    #[test]
    fn exponential_growth_with_dense_output() {
        let sol = integrate(|_, y| y, 0.0, 1.0, 2.0);
        assert!((sol.segments.last().unwrap().y1() - 2f64.exp()).abs() < 1e-9);
        for i in 0..=200 {
            let x = 0.01 * i as f64;
            assert!((sol.eval(x).unwrap() - x.exp()).abs() < 1e-8 * x.exp(), "x = {x}");
            assert!((sol.derivative(x).unwrap() - x.exp()).abs() < 1e-6 * x.exp(), "x = {x}");
        }
    }

    #[test]
    fn backward_integration_of_explicit_slope() {
        let sol = integrate(|x, _| x.cos(), 0.0, 0.0, -3.0);
        for i in 0..=30 {
            let x = -0.1 * i as f64;
            let e = (sol.eval(x).unwrap() - x.sin()).abs();
            assert!(e < 1e-9, "x = {x}: {e:e}");
        }
    }

    #[test]
    fn cubic_is_reproduced_exactly_by_dense_output() {
        // The continuous extension has order four.
        let sol = integrate(|x, _| 3.0 * x * x, 0.0, 0.0, 1.0);
        for i in 0..=10 {
            let x = 0.1 * i as f64;
            assert!((sol.eval(x).unwrap() - x * x * x).abs() < 1e-13);
        }
    }

    #[test]
    fn step_limit_is_an_error() {
        let opts = Dopri5Options {
            max_steps: 3,
            h_max: 1e-3,
            ..Default::default()
        };
        let mut st = Dopri5::new(|_, y| y, 0.0, 1.0, 1.0, 1.0, opts).unwrap();
        let mut res = Ok(());
        for _ in 0..5 {
            if let Err(e) = st.step(1.0) {
                res = Err(e);
                break;
            }
        }
        assert!(matches!(res, Err(Error::Integration(_))));
    }
}
