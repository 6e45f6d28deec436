//! BFGS with a strong-Wolfe line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient max-norm falls below this.
    pub grad_tol: f64,
    /// Stop when `|f_new - f_old| <= rel_tol * max(|f_old|, 1)`.
    pub rel_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 500,
            grad_tol: 1e-8,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    RelativeChange,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    /// Objective value at `x` (of the maximized function).
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub reason: StopReason,
}

impl BfgsResult {
    pub fn converged(&self) -> bool {
        matches!(
            self.reason,
            StopReason::Gradient | StopReason::RelativeChange
        )
    }

    pub fn grad_norm(&self) -> f64 {
        max_norm(&self.grad)
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

struct Point {
    a: f64,
    f: f64,
    g: DVector<f64>,
    d: f64,
}

/// Minimizes internally; `eval` returns value and gradient of the minimized
/// function, with non-finite values treated as +inf.
struct Search<'a, F> {
    eval: &'a mut F,
    x: &'a DVector<f64>,
    dir: &'a DVector<f64>,
    f0: f64,
    d0: f64,
}

impl<F: FnMut(&DVector<f64>) -> (f64, DVector<f64>)> Search<'_, F> {
    fn at(&mut self, a: f64) -> Point {
        let (f, g) = (self.eval)(&(self.x + self.dir * a));
        let f = if f.is_finite() { f } else { f64::INFINITY };
        let d = if f.is_finite() {
            g.dot(self.dir)
        } else {
            f64::NAN
        };
        Point { a, f, g, d }
    }

    fn armijo(&self, p: &Point) -> bool {
        p.f <= self.f0 + C1 * p.a * self.d0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.d.abs() <= -C2 * self.d0
    }

    fn run(&mut self, a0: f64) -> Option<Point> {
        let mut prev = Point {
            a: 0.0,
            f: self.f0,
            g: DVector::zeros(0),
            d: self.d0,
        };
        let mut a = a0;
        for i in 0..40 {
            let p = self.at(a);
            if !self.armijo(&p) || (i > 0 && p.f >= prev.f) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Some(p);
            }
            if p.d >= 0.0 {
                return self.zoom(p, prev);
            }
            a *= 2.0;
            prev = p;
        }
        None
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        for _ in 0..60 {
            let width = hi.a - lo.a;
            // quadratic through lo (value, slope) and hi (value), safeguarded
            let mut a = if hi.f.is_finite() && lo.d.is_finite() {
                let denom = 2.0 * (hi.f - lo.f - lo.d * width);
                if denom > 0.0 {
                    lo.a - lo.d * width * width / denom
                } else {
                    lo.a + 0.5 * width
                }
            } else {
                lo.a + 0.5 * width
            };
            let (l, h) = (lo.a.min(hi.a), lo.a.max(hi.a));
            let margin = 0.1 * (h - l);
            if !(a > l + margin && a < h - margin) {
                a = 0.5 * (l + h);
            }
            if (h - l) < 1e-16 * h.max(1.0) {
                break;
            }
            let p = self.at(a);
            if !self.armijo(&p) || p.f >= lo.f {
                hi = p;
            } else {
                if self.curvature(&p) {
                    return Some(p);
                }
                if p.d * (hi.a - lo.a) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
        }
        // settle for sufficient decrease
        (lo.a > 0.0 && lo.f < self.f0).then_some(lo)
    }
}

/// Maximize `f` starting from `x0`. `f` returns the value and its gradient.
pub fn maximize<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut eval = |x: &DVector<f64>| {
        let (v, g) = f(x.as_slice());
        (-v, -DVector::from_vec(g))
    };
    let mut x = DVector::from_column_slice(x0);
    let (mut fx, mut g) = eval(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;
    let finish = |x: DVector<f64>, fx: f64, g: DVector<f64>, iterations, reason| BfgsResult {
        x: x.as_slice().to_vec(),
        value: -fx,
        grad: g.iter().map(|v| -v).collect(),
        iterations,
        reason,
    };
    if n == 0 {
        return finish(x, fx, g, 0, StopReason::Gradient);
    }
    loop {
        if g.amax() < opts.grad_tol {
            return finish(x, fx, g, iterations, StopReason::Gradient);
        }
        if iterations >= opts.max_iter {
            return finish(x, fx, g, iterations, StopReason::MaxIterations);
        }
        let mut dir = -(&h * &g);
        let mut d0 = g.dot(&dir);
        if !(d0 < 0.0) {
            h = DMatrix::identity(n, n);
            fresh = true;
            dir = -g.clone();
            d0 = g.dot(&dir);
        }
        let a0 = if fresh {
            (1.0 / g.amax()).min(1.0)
        } else {
            1.0
        };
        let found = Search {
            eval: &mut eval,
            x: &x,
            dir: &dir,
            f0: fx,
            d0,
        }
        .run(a0);
        let Some(p) = found else {
            if fresh {
                return finish(x, fx, g, iterations, StopReason::LineSearchFailed);
            }
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        iterations += 1;
        let s = &dir * p.a;
        let y = &p.g - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy' + hy s') + (rho^2 yHy + rho) s s'
            h.ger(-rho, &s, &hy, 1.0);
            h.ger(-rho, &hy, &s, 1.0);
            h.ger(rho * rho * yhy + rho, &s, &s, 1.0);
            fresh = false;
        }
        let change = (p.f - fx).abs();
        let scale = fx.abs().max(1.0);
        x += s;
        fx = p.f;
        g = p.g;
        if change <= opts.rel_tol * scale {
            let reason = if g.amax() < opts.grad_tol {
                StopReason::Gradient
            } else {
                StopReason::RelativeChange
            };
            return finish(x, fx, g, iterations, reason);
        }
    }
}

/// Maximize a unimodal `f` on `[lo, hi]` by golden-section search.
/// Returns `(argmax, max)`, with both endpoints considered.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section() {
        let (x, v) = golden_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8 && v.abs() < 1e-15);
        let (x, _) = golden_max(|x| x, 0.0, 1.0, 1e-10);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn concave_quadratic() {
        // f = -(x-1)^2 - 10 (y+2)^2 - (x-1)(y+2)
        let f = |v: &[f64]| {
            let (a, b) = (v[0] - 1.0, v[1] + 2.0);
            (
                -(a * a) - 10.0 * b * b - a * b,
                vec![-2.0 * a - b, -20.0 * b - a],
            )
        };
        let r = maximize(f, &[0.0, 0.0], &BfgsOptions::default());
        assert!(r.converged());
        assert!((r.x[0] - 1.0).abs() < 1e-7 && (r.x[1] + 2.0).abs() < 1e-7);
    }

    #[test]
    fn rosenbrock() {
        let f = |v: &[f64]| {
            let (x, y) = (v[0], v[1]);
            let val = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
            let gx = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
            let gy = 200.0 * (y - x * x);
            (-val, vec![-gx, -gy])
        };
        let opts = BfgsOptions {
            rel_tol: 0.0,
            ..Default::default()
        };
        let r = maximize(f, &[-1.2, 1.0], &opts);
        assert_eq!(r.reason, StopReason::Gradient);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_problem() {
        let r = maximize(|_| (3.0, vec![]), &[], &BfgsOptions::default());
        assert!(r.converged());
        assert_eq!(r.value, 3.0);
    }
}
