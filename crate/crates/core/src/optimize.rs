//! Small numerical optimizers: L-BFGS, Nelder–Mead in the plane,
//! bisection and golden-section search.

use std::collections::VecDeque;

use crate::geometry::Vec2;

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Convergence threshold on the Euclidean gradient norm.
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iter: 2000,
            grad_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimize a smooth function given value and gradient. Stops when the
/// gradient norm falls below `grad_tol`, or when the line search stalls
/// (then `converged` is false and the best point is returned).
pub fn lbfgs<F>(mut fg: F, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = fg(&x);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let gn = norm(&g);
        if gn < opts.grad_tol || n == 0 {
            return LbfgsResult {
                x,
                value: f,
                grad_norm: gn,
                iterations,
                converged: true,
            };
        }
        iterations += 1;

        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        let gamma = match hist.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / gn.max(1.0),
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += s[i] * (a - b);
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }

        // Backtracking Armijo line search.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let (fnew, gnew) = fg(&xn);
            // Near the optimum f changes below rounding; then accept a step
            // that keeps f flat and shrinks the gradient.
            let flat = (fnew - f).abs() <= 4.0 * f64::EPSILON * f.abs().max(1.0) && norm(&gnew) < gn;
            if fnew.is_finite() && (fnew <= f + 1e-4 * step * slope || flat) {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if hist.is_empty() {
                let gn = norm(&g);
                return LbfgsResult {
                    x,
                    value: f,
                    grad_norm: gn,
                    iterations,
                    converged: gn < opts.grad_tol,
                };
            }
            hist.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > opts.memory {
                hist.pop_front();
            }
        }
        x = xn;
        f = fnew;
        g = gnew;
    }
    let gn = norm(&g);
    LbfgsResult {
        x,
        value: f,
        grad_norm: gn,
        iterations,
        converged: gn < opts.grad_tol,
    }
}

/// Nelder–Mead minimization in the plane from an initial simplex of size
/// `scale`, restarted until a restart no longer improves the value.
pub fn nelder_mead(f: impl Fn(Vec2) -> f64, x0: Vec2, scale: f64, tol: f64, max_iter: usize) -> (Vec2, f64) {
    let mut best = (x0, f(x0));
    let mut size = scale;
    for _ in 0..8 {
        let (x, v) = nelder_mead_once(&f, best.0, size, tol, max_iter);
        let improved = v < best.1 - tol.max(1e-15 * v.abs());
        if v <= best.1 {
            best = (x, v);
        }
        if !improved {
            break;
        }
        size = (size * 0.5).max(10.0 * tol);
    }
    best
}

fn nelder_mead_once(f: &impl Fn(Vec2) -> f64, x0: Vec2, scale: f64, tol: f64, max_iter: usize) -> (Vec2, f64) {
    let mut s = [
        (x0, f(x0)),
        (x0 + Vec2::new(scale, 0.0), f(x0 + Vec2::new(scale, 0.0))),
        (x0 + Vec2::new(0.0, scale), f(x0 + Vec2::new(0.0, scale))),
    ];
    for _ in 0..max_iter {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diam = s[0].0.dist(s[1].0).max(s[0].0.dist(s[2].0));
        if diam < tol {
            break;
        }
        let c = (s[0].0 + s[1].0) * 0.5;
        let r = c + (c - s[2].0);
        let fr = f(r);
        if fr < s[0].1 {
            let e = c + (c - s[2].0) * 2.0;
            let fe = f(e);
            s[2] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < s[1].1 {
            s[2] = (r, fr);
        } else {
            let k = if fr < s[2].1 {
                c + (r - c) * 0.5
            } else {
                c + (s[2].0 - c) * 0.5
            };
            let fk = f(k);
            if fk < s[2].1.min(fr) {
                s[2] = (k, fk);
            } else {
                let b = s[0].0;
                for v in s.iter_mut().skip(1) {
                    v.0 = b + (v.0 - b) * 0.5;
                    v.1 = f(v.0);
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    s[0]
}

/// Root of a continuous `g` on [a, b] with g(a) ≤ 0 ≤ g(b) (or the reverse),
/// located to within `tol`.
pub fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ga = g(a);
    let increasing = ga <= 0.0;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == increasing {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Minimizer of a unimodal function on [a, b] by golden-section search.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // Endpoints may win for monotone functions.
    [(x, fx), (a, f(a)), (b, f(b))]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lbfgs_rosenbrock() {
        let r = lbfgs(
            |x| {
                let (a, b) = (x[0], x[1]);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
                (f, g)
            },
            vec![-1.2, 1.0],
            &LbfgsOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nelder_mead_finds_kink_minimum() {
        let f = |y: Vec2| (y.x1 - 0.3).abs() + 2.0 * (y.x2 + 0.7).abs();
        let (x, v) = nelder_mead(f, Vec2::new(1.0, 1.0), 0.5, 1e-12, 2000);
        assert!(x.dist(Vec2::new(0.3, -0.7)) < 1e-9);
        assert!(v < 1e-9);
    }

    #[test]
    fn bisection_and_golden() {
        let r = bisect(|s| s * s - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        let r = bisect(|s| 1.0 - s, 0.0, 3.0, 1e-14);
        assert!((r - 1.0).abs() < 1e-13);
        let (x, _) = golden_min(|s| (s - 0.25).powi(2), -1.0, 1.0, 1e-10);
        assert!((x - 0.25).abs() < 1e-9);
        let (x, _) = golden_min(|s| s, 0.0, 1.0, 1e-10);
        assert_eq!(x, 0.0);
    }
}
