//! The fundamental solution A_t(x, y) and the Lax–Oleinik operators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Rect, Vec2};
use crate::hamiltonian::{Hamiltonian, Lagrangian, PhasePoint};
use crate::optimize::{lbfgs, nelder_mead, LbfgsOptions};

/// A piecewise-linear curve on a uniform time grid together with its
/// composite-midpoint action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveDiscretization {
    pub nodes: Vec<Vec2>,
    pub t0: f64,
    pub t1: f64,
    pub action_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionResult {
    /// Discrete action of the minimizer.
    pub value: f64,
    pub minimizer: CurveDiscretization,
    /// Gradient norm of the discrete action fell below 1e-9.
    pub converged: bool,
    /// Final gradient norm of the discrete action.
    pub residual: f64,
    /// Discrete Euler–Lagrange residual, max over interior nodes of
    /// |∂S/∂x_i| / τ.
    pub el_residual: f64,
    /// Action of the Hamiltonian trajectory found by shooting from the
    /// discrete minimizer, when shooting converged.
    pub refined_value: Option<f64>,
    /// Endpoint miss of the shooting trajectory.
    pub shooting_miss: Option<f64>,
    /// Momenta L_v at the two ends of the shooting trajectory.
    pub initial_momentum: Option<Vec2>,
    pub final_momentum: Option<Vec2>,
}

/// Composite-midpoint action Σ τ L((x_i + x_{i+1})/2, (x_{i+1} − x_i)/τ).
pub fn discrete_action(l: &Lagrangian, nodes: &[Vec2], t0: f64, t1: f64) -> Result<f64> {
    if nodes.len() < 2 || !(t1 > t0) {
        return Err(Error::InvalidInput("curve needs at least two nodes and t1 > t0".into()));
    }
    let tau = (t1 - t0) / (nodes.len() - 1) as f64;
    let mut s = 0.0;
    for w in nodes.windows(2) {
        let m = (w[0] + w[1]) * 0.5;
        let v = (w[1] - w[0]) / tau;
        s += tau * l.eval(m, v)?;
    }
    Ok(s)
}

/// Value and gradient of the discrete action with respect to the interior
/// nodes (flattened).
fn action_and_gradient(l: &Lagrangian, nodes: &[Vec2], tau: f64) -> Result<(f64, Vec<f64>)> {
    let n = nodes.len() - 1;
    let mut value = 0.0;
    let mut lx = Vec::with_capacity(n);
    let mut lv = Vec::with_capacity(n);
    for w in nodes.windows(2) {
        let m = (w[0] + w[1]) * 0.5;
        let v = (w[1] - w[0]) / tau;
        let p = l.momentum(m, v)?;
        let h = l.hamiltonian();
        value += tau * (p.dot(v) - h.eval(m, p));
        lx.push(-h.grad_x(m, p));
        lv.push(p);
    }
    let mut grad = Vec::with_capacity(2 * (n - 1));
    for i in 1..n {
        let g = (lx[i - 1] + lx[i]) * (0.5 * tau) + lv[i - 1] - lv[i];
        grad.push(g.x1);
        grad.push(g.x2);
    }
    Ok((value, grad))
}

fn straight_line(x: Vec2, y: Vec2, n: usize) -> Vec<Vec2> {
    (0..=n).map(|i| x.lerp(y, i as f64 / n as f64)).collect()
}

struct Discrete {
    nodes: Vec<Vec2>,
    value: f64,
    grad_norm: f64,
    converged: bool,
}

fn minimize_discrete(l: &Lagrangian, t: f64, x: Vec2, y: Vec2, n: usize, grad_tol: f64) -> Result<Discrete> {
    let tau = t / n as f64;
    let init = straight_line(x, y, n);
    if n == 1 {
        let value = discrete_action(l, &init, 0.0, t)?;
        return Ok(Discrete {
            nodes: init,
            value,
            grad_norm: 0.0,
            converged: true,
        });
    }
    let flat: Vec<f64> = init[1..n].iter().flat_map(|v| v.as_array()).collect();
    let unflatten = |z: &[f64]| {
        let mut nodes = Vec::with_capacity(n + 1);
        nodes.push(x);
        nodes.extend(z.chunks(2).map(|c| Vec2::new(c[0], c[1])));
        nodes.push(y);
        nodes
    };
    let mut failure = None;
    let opts = LbfgsOptions {
        grad_tol,
        ..LbfgsOptions::default()
    };
    let res = lbfgs(
        |z| match action_and_gradient(l, &unflatten(z), tau) {
            Ok(r) => r,
            Err(e) => {
                failure.get_or_insert(e);
                (f64::INFINITY, vec![0.0; z.len()])
            }
        },
        flat,
        &opts,
    );
    if let Some(e) = failure {
        if !res.value.is_finite() {
            return Err(e);
        }
    }
    Ok(Discrete {
        nodes: unflatten(&res.x),
        value: res.value,
        grad_norm: res.grad_norm,
        converged: res.converged,
    })
}

/// Action of a Hamiltonian trajectory sampled uniformly over `duration`,
/// by Simpson's rule on L(x, H_p) = ⟨p, H_p⟩ − H. A negative duration
/// (backward trajectory) yields the action of the reversed curve with the
/// sign flipped, so callers pass |duration| for forward-oriented integrals.
pub fn trajectory_action(h: &Hamiltonian, traj: &[PhasePoint], duration: f64) -> f64 {
    let n = traj.len() - 1;
    let lag = |z: &PhasePoint| z.p.dot(h.grad_p(z.x, z.p)) - h.eval(z.x, z.p);
    let step = duration / n as f64;
    if n.is_multiple_of(2) {
        let mut s = lag(&traj[0]) + lag(&traj[n]);
        for (i, z) in traj.iter().enumerate().take(n).skip(1) {
            s += if i % 2 == 1 { 4.0 * lag(z) } else { 2.0 * lag(z) };
        }
        s * step / 3.0
    } else {
        traj.windows(2).map(|w| 0.5 * step * (lag(&w[0]) + lag(&w[1]))).sum()
    }
}

const SHOOTING_STEPS: usize = 256;

/// Newton shooting on the initial momentum so that the flow from (x, p)
/// reaches y at time t.
fn shoot(h: &Hamiltonian, t: f64, x: Vec2, y: Vec2, p0: Vec2) -> Option<Shot> {
    let dt = t / SHOOTING_STEPS as f64;
    let end = |p: Vec2| -> Option<Vec2> {
        let traj = h.flow(PhasePoint::new(x, p), t, dt).ok()?;
        Some(traj.last()?.x)
    };
    let mut p = p0;
    let mut miss = end(p)? - y;
    for _ in 0..30 {
        if miss.norm() < 1e-11 * (1.0 + y.norm()) {
            break;
        }
        let eps = 1e-7 * (1.0 + p.norm());
        let c1 = (end(p + Vec2::new(eps, 0.0))? - y - miss) / eps;
        let c2 = (end(p + Vec2::new(0.0, eps))? - y - miss) / eps;
        let det = c1.x1 * c2.x2 - c2.x1 * c1.x2;
        if det.abs() < 1e-300 {
            return None;
        }
        let dp = Vec2::new(
            (c2.x2 * miss.x1 - c2.x1 * miss.x2) / det,
            (-c1.x2 * miss.x1 + c1.x1 * miss.x2) / det,
        );
        p -= dp;
        miss = end(p)? - y;
    }
    let traj = h.flow(PhasePoint::new(x, p), t, dt).ok()?;
    let last = traj.last()?;
    Some(Shot {
        action: trajectory_action(h, &traj, t),
        miss: last.x.dist(y),
        p_start: p,
        p_end: last.p,
    })
}

struct Shot {
    action: f64,
    miss: f64,
    p_start: Vec2,
    p_end: Vec2,
}

/// A_t(x, y): minimizes the discrete action over curves with `n` segments,
/// starting from the straight line, then refines by shooting.
pub fn fundamental_solution(h: &Hamiltonian, t: f64, x: Vec2, y: Vec2, n: usize) -> Result<ActionResult> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!(
            "fundamental solution needs t > 0, got {t}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput(
            "fundamental solution needs at least one segment".into(),
        ));
    }
    let l = h.legendre();
    let d = minimize_discrete(&l, t, x, y, n, 1e-9)?;
    let tau = t / n as f64;
    let el_residual = if n > 1 {
        let (_, g) = action_and_gradient(&l, &d.nodes, tau)?;
        g.chunks(2)
            .map(|c| Vec2::new(c[0], c[1]).norm() / tau)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let p0 = l.momentum((d.nodes[0] + d.nodes[1]) * 0.5, (d.nodes[1] - d.nodes[0]) / tau)?;
    let shot = shoot(h, t, x, y, p0).filter(|s| s.miss < 1e-8);
    Ok(ActionResult {
        value: d.value,
        minimizer: CurveDiscretization {
            nodes: d.nodes,
            t0: 0.0,
            t1: t,
            action_value: d.value,
        },
        converged: d.converged,
        residual: d.grad_norm,
        el_residual,
        refined_value: shot.as_ref().map(|s| s.action),
        shooting_miss: shot.as_ref().map(|s| s.miss),
        initial_momentum: shot.as_ref().map(|s| s.p_start),
        final_momentum: shot.as_ref().map(|s| s.p_end),
    })
}

/// Evaluates A_t(x, y) for the Lax–Oleinik operators: in closed form
/// t·L((y − x)/t) when L does not depend on x, by discrete minimization
/// otherwise.
#[derive(Clone, Debug)]
pub struct ActionKernel {
    l: Lagrangian,
    nodes: usize,
}

impl ActionKernel {
    pub fn new(h: &Hamiltonian, nodes: usize) -> Self {
        ActionKernel {
            l: h.legendre(),
            nodes: nodes.max(1),
        }
    }

    pub fn lagrangian(&self) -> &Lagrangian {
        &self.l
    }

    pub fn eval(&self, t: f64, x: Vec2, y: Vec2) -> Result<f64> {
        if self.l.is_x_independent() {
            return Ok(t * self.l.eval(x, (y - x) / t)?);
        }
        Ok(minimize_discrete(&self.l, t, x, y, self.nodes, 1e-10)?.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaxOleinikOptions {
    /// Coarse grid resolution per axis.
    pub grid: usize,
    /// Segments in the discrete action when L depends on x.
    pub action_nodes: usize,
    /// Local horizon of the positive-type operator.
    pub t0: f64,
    pub cluster_radius: f64,
    pub uniqueness_gap: f64,
}

impl Default for LaxOleinikOptions {
    fn default() -> Self {
        LaxOleinikOptions {
            grid: 64,
            action_nodes: 16,
            t0: 0.1,
            cluster_radius: 1e-5,
            uniqueness_gap: 1e-7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaxOleinikNeg {
    pub value: f64,
    pub argmin: Vec2,
    /// The optimizer ended within one grid cell of the search-box boundary.
    pub boundary_hit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaxOleinikPos {
    pub value: f64,
    pub argmax: Vec2,
    pub unique: bool,
    /// Value gap to the best competing local maximum (∞ if none).
    pub second_gap: f64,
    pub boundary_hit: bool,
}

/// Search radius (λ0 + 1)t around x.
pub fn default_search_box(x: Vec2, t: f64, lambda0: f64) -> Rect {
    Rect::around(x, (lambda0 + 1.0) * t)
}

/// λ0 = 2 sup |H_p| over `region` and covectors of norm at most `p_radius`.
pub fn default_lambda0(h: &Hamiltonian, region: Rect, p_radius: f64) -> f64 {
    2.0 * h.sup_velocity(region, p_radius)
}

type Objective<'a> = dyn Fn(Vec2) -> f64 + Sync + 'a;

/// Grid values of `f` in index order; evaluated in parallel but reduced
/// deterministically by the caller.
fn grid_values(search: Rect, n: usize, f: &Objective<'_>) -> Vec<f64> {
    (0..n * n)
        .into_par_iter()
        .map(|k| f(search.grid_point(n, k / n, k % n)))
        .collect()
}

fn refine_tol(search: Rect) -> f64 {
    1e-13 * (1.0 + search.width().max(search.height()))
}

/// T_t u0(x) = inf_y u0(y) + A_t(y, x) over the search box.
pub fn lax_oleinik_neg(
    h: &Hamiltonian,
    u0: &(dyn Fn(Vec2) -> f64 + Sync),
    t: f64,
    x: Vec2,
    search: Rect,
    opts: &LaxOleinikOptions,
) -> Result<LaxOleinikNeg> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Lax-Oleinik evolution needs t > 0, got {t}"
        )));
    }
    let kernel = ActionKernel::new(h, opts.action_nodes);
    let f = |y: Vec2| match kernel.eval(t, y, x) {
        Ok(a) => u0(y) + a,
        Err(_) => f64::INFINITY,
    };
    let n = opts.grid.max(2);
    let vals = grid_values(search, n, &f);
    let k = (0..vals.len())
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .expect("grid is nonempty");
    let start = search.grid_point(n, k / n, k % n);
    let cell = search.width().max(search.height()) / (n - 1) as f64;
    let g = |y: Vec2| if search.contains(y) { f(y) } else { f64::INFINITY };
    let (y, v) = nelder_mead(g, start, cell, refine_tol(search), 4000);
    let (y, v) = if v <= vals[k] { (y, v) } else { (start, vals[k]) };
    Ok(LaxOleinikNeg {
        value: v,
        argmin: y,
        boundary_hit: search.inner_distance(y) < cell,
    })
}

/// T̆_t u0(x) = sup_y u0(y) − A_t(x, y) over the search box, with a
/// uniqueness check on the maximizer.
pub fn lax_oleinik_pos(
    h: &Hamiltonian,
    u0: &(dyn Fn(Vec2) -> f64 + Sync),
    t: f64,
    x: Vec2,
    search: Rect,
    opts: &LaxOleinikOptions,
) -> Result<LaxOleinikPos> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Lax-Oleinik evolution needs t > 0, got {t}"
        )));
    }
    if t > opts.t0 {
        return Err(Error::HorizonExceeded { t, t0: opts.t0 });
    }
    let kernel = ActionKernel::new(h, opts.action_nodes);
    // Minimize the negated objective.
    let f = |y: Vec2| match kernel.eval(t, x, y) {
        Ok(a) => a - u0(y),
        Err(_) => f64::INFINITY,
    };
    let n = opts.grid.max(3);
    let vals = grid_values(search, n, &f);
    let at = |i: usize, j: usize| vals[i * n + j];

    // Discrete local minima (non-strict) of the negated objective.
    let mut seeds: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let c = at(i, j);
            let mut is_min = c.is_finite();
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                        continue;
                    }
                    if at(a as usize, b as usize) < c {
                        is_min = false;
                    }
                }
            }
            if is_min {
                seeds.push((i, j));
            }
        }
    }
    seeds.sort_by(|a, b| at(a.0, a.1).total_cmp(&at(b.0, b.1)).then(a.cmp(b)));
    seeds.truncate(8);

    let cell = search.width().max(search.height()) / (n - 1) as f64;
    let g = |y: Vec2| if search.contains(y) { f(y) } else { f64::INFINITY };
    let mut found: Vec<(Vec2, f64)> = Vec::new();
    for (i, j) in seeds {
        let s = search.grid_point(n, i, j);
        let (y, v) = nelder_mead(g, s, cell, refine_tol(search), 4000);
        let (y, v) = if v <= at(i, j) { (y, v) } else { (s, at(i, j)) };
        match found
            .iter_mut()
            .find(|c| c.0.dist(y) <= opts.cluster_radius.max(1e-3 * cell))
        {
            Some(c) => {
                if v < c.1 {
                    *c = (y, v);
                }
            }
            None => found.push((y, v)),
        }
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (best, bv) = *found
        .first()
        .ok_or_else(|| Error::Internal("no finite value on the search grid".into()))?;
    let second_gap = found.get(1).map(|c| c.1 - bv).unwrap_or(f64::INFINITY);
    Ok(LaxOleinikPos {
        value: -bv,
        argmax: best,
        unique: second_gap > opts.uniqueness_gap,
        second_gap,
        boundary_hit: search.inner_distance(best) < cell,
    })
}

/// Worst violation of midpoint convexity of y ↦ A_t(x, y) on random pairs in
/// `search`; nonpositive means the local-horizon assumption looks sound.
pub fn concavity_defect(h: &Hamiltonian, t: f64, x: Vec2, search: Rect, pairs: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let kernel = ActionKernel::new(h, 16);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let mut pick = || {
            Vec2::new(
                rng.gen_range(search.lo.x1..=search.hi.x1),
                rng.gen_range(search.lo.x2..=search.hi.x2),
            )
        };
        let (a, b) = (pick(), pick());
        let m = (a + b) * 0.5;
        let d = kernel.eval(t, x, m)? - 0.5 * (kernel.eval(t, x, a)? + kernel.eval(t, x, b)?);
        worst = worst.max(d);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Affine, MatrixField};
    use crate::geometry::Mat2;

    fn eikonal() -> Hamiltonian {
        Hamiltonian::quadratic_form(Mat2::IDENTITY, Vec2::ZERO, Affine::new(-0.5, Vec2::ZERO).into_field()).unwrap()
    }

    #[test]
    fn free_particle_action() {
        let h = eikonal();
        let r = fundamental_solution(&h, 1.0, Vec2::ZERO, Vec2::new(1.0, 0.0), 8).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.converged);
        for (i, p) in r.minimizer.nodes.iter().enumerate() {
            assert!(p.dist(Vec2::new(i as f64 / 8.0, 0.0)) < 1e-12);
        }
        assert!((r.refined_value.unwrap() - 1.0).abs() < 1e-9);
        let r = fundamental_solution(&h, 0.5, Vec2::new(0.3, 0.3), Vec2::new(0.3, 0.3), 4).unwrap();
        assert!((r.value - 0.25).abs() < 1e-12);
        assert!(fundamental_solution(&h, 0.0, Vec2::ZERO, Vec2::ZERO, 4).is_err());
    }

    #[test]
    fn anisotropic_action_against_closed_form() {
        let h = Hamiltonian::quadratic_form(
            Mat2::diag(2.0, 1.0),
            Vec2::ZERO,
            Affine::new(-0.5, Vec2::ZERO).into_field(),
        )
        .unwrap();
        for n in [8, 16, 32] {
            let r = fundamental_solution(&h, 1.0, Vec2::ZERO, Vec2::new(1.0, 0.0), n).unwrap();
            assert!((r.value - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_action_matches_shooting() {
        // L = ½|v|² + ½|x|²: the exact action from x to y in time t is
        // (coth t (|x|² + |y|²) − 2⟨x, y⟩/sinh t)/2.
        let h = Hamiltonian::mechanical(
            MatrixField::constant(Mat2::IDENTITY).unwrap(),
            crate::field::Quadratic::new(0.0, Vec2::ZERO, Mat2::diag(-1.0, -1.0))
                .unwrap()
                .into_field(),
            Rect::around(Vec2::ZERO, 3.0),
        )
        .unwrap();
        let (x, y, t) = (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), 1.0f64);
        let exact = 0.5 * ((x.norm_sq() + y.norm_sq()) / t.tanh() - 2.0 * x.dot(y) / t.sinh());
        let r = fundamental_solution(&h, t, x, y, 32).unwrap();
        assert!(r.converged);
        assert!((r.value - exact).abs() < 2e-3, "{} vs {exact}", r.value);
        assert!((r.refined_value.unwrap() - exact).abs() < 1e-9);
        assert!(r.el_residual < 1e-6);
    }

    #[test]
    fn lax_oleinik_neg_examples() {
        let h = eikonal();
        let opts = LaxOleinikOptions::default();
        let x = Vec2::new(0.4, -0.2);
        let zero = |_: Vec2| 0.0;
        let r = lax_oleinik_neg(&h, &zero, 1.0, x, default_search_box(x, 1.0, 2.0), &opts).unwrap();
        assert!((r.value - 0.5).abs() < 1e-10);
        assert!(!r.boundary_hit);
        let lin = |y: Vec2| y.x1;
        let r = lax_oleinik_neg(&h, &lin, 0.5, x, default_search_box(x, 0.5, 2.0), &opts).unwrap();
        assert!((r.value - x.x1).abs() < 1e-10);
        // A box that excludes the minimizer is reported.
        let r = lax_oleinik_neg(&h, &lin, 0.5, x, Rect::around(x, 0.1), &opts).unwrap();
        assert!(r.boundary_hit);
    }

    #[test]
    fn lax_oleinik_pos_corner() {
        let h = eikonal();
        let opts = LaxOleinikOptions {
            t0: 0.25,
            ..Default::default()
        };
        let u = |y: Vec2| y.x1.min(y.x2);
        let x = Vec2::new(1.0, 1.0);
        let r = lax_oleinik_pos(&h, &u, 0.2, x, default_search_box(x, 0.2, 2.0), &opts).unwrap();
        assert!(r.argmax.dist(Vec2::new(1.1, 1.1)) < 1e-6, "{}", r.argmax);
        assert!(r.unique);
        let strict = LaxOleinikOptions::default();
        assert!(matches!(
            lax_oleinik_pos(&h, &u, 0.2, x, default_search_box(x, 0.2, 2.0), &strict),
            Err(Error::HorizonExceeded { .. })
        ));
    }

    #[test]
    fn lax_oleinik_pos_detects_two_maximizers() {
        let h = eikonal();
        // Two symmetric bumps at distance 0.1 from x.
        let u = |y: Vec2| -((y.x1.abs() - 0.1).powi(2) + y.x2 * y.x2) * 10.0;
        let x = Vec2::ZERO;
        let r = lax_oleinik_pos(&h, &u, 0.1, x, Rect::around(x, 0.3), &LaxOleinikOptions::default()).unwrap();
        assert!(!r.unique);
    }

    #[test]
    fn smooth_argmax_follows_the_characteristic() {
        // u(y) = ⟨q, y⟩ − ½|y|²·0.1: the maximizer is x + t H_p(x, Du(x)) + o(t).
        let h = eikonal();
        let u = |y: Vec2| 0.6 * y.x1 + 0.8 * y.x2 - 0.05 * y.norm_sq();
        let x = Vec2::new(0.2, -0.1);
        let du = Vec2::new(0.6, 0.8) - x * 0.1;
        for t in [0.1, 0.05, 0.02] {
            let r = lax_oleinik_pos(
                &h,
                &u,
                t,
                x,
                default_search_box(x, t, 2.0),
                &LaxOleinikOptions::default(),
            )
            .unwrap();
            assert!(r.argmax.dist(x + du * t) < 0.1 * t);
        }
        let r = lax_oleinik_pos(
            &h,
            &u,
            1e-4,
            x,
            default_search_box(x, 1e-4, 2.0),
            &LaxOleinikOptions::default(),
        )
        .unwrap();
        assert!(r.argmax.dist(x) < 2e-4);
    }

    #[test]
    fn quadratic_action_is_convex_in_endpoint() {
        let h = eikonal();
        let x = Vec2::new(1.0, 1.0);
        let d = concavity_defect(&h, 0.1, x, Rect::around(x, 0.3), 64, 7).unwrap();
        assert!(d <= 1e-12);
    }
}
