//! Tonelli Hamiltonians, their Lagrangians and the Hamiltonian flow.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::field::{Field, MatrixField};
use crate::geometry::{Mat2, Rect, Vec2};

/// Step of the central differences used for custom closures.
pub const FD_STEP: f64 = 1e-6;
/// Newton tolerance on |H_p(x, p) − v| in the Legendre transform.
pub const LEGENDRE_TOL: f64 = 1e-10;
pub const LEGENDRE_MAX_ITER: usize = 100;
/// Largest accepted number of flow steps.
pub const MAX_FLOW_STEPS: f64 = 1e7;

/// Half-width of the momentum box sampled when estimating ν for custom H.
const P_SAMPLE_RADIUS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Mechanical,
    QuadraticForm,
    Custom,
}

type ScalarFn = Arc<dyn Fn(Vec2, Vec2) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(Vec2, Vec2) -> Vec2 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Mechanical { a: MatrixField, v: Field },
    Quadratic { a: Mat2, a_inv: Mat2, b: Vec2, v: Field },
    Expression(Box<ExprH>),
    Closure { f: ScalarFn, grad_p: Option<VectorFn> },
}

#[derive(Clone)]
struct ExprH {
    source: String,
    h: Expr,
    hp: [Expr; 2],
    hx: [Expr; 2],
    hpp: [[Expr; 2]; 2],
}

/// A Hamiltonian H(x, p), C² and strictly convex in p on its working region.
#[derive(Clone)]
pub struct Hamiltonian {
    kind: Kind,
    family: Family,
    nu: f64,
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("Hamiltonian");
        d.field("family", &self.family).field("nu", &self.nu);
        if let Kind::Expression(e) = &self.kind {
            d.field("source", &e.source);
        }
        d.finish()
    }
}

/// State (x, p) of the Hamiltonian flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec2,
    pub p: Vec2,
}

impl PhasePoint {
    pub fn new(x: Vec2, p: Vec2) -> Self {
        PhasePoint { x, p }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite()
    }
}

fn vars(x: Vec2, p: Vec2) -> [f64; 4] {
    [x.x1, x.x2, p.x1, p.x2]
}

fn check_spd(m: Mat2, at: Vec2) -> Result<f64> {
    if !m.is_finite() || !m.is_symmetric(1e-12 * (1.0 + m.sym_norm())) {
        return Err(Error::NotSpd(format!("A({at}) = {:?} is not symmetric", m.m)));
    }
    let (lo, _) = m.sym_eigenvalues();
    if lo <= 0.0 {
        return Err(Error::NotSpd(format!("A({at}) has eigenvalue {lo}")));
    }
    Ok(lo)
}

impl Hamiltonian {
    /// `½⟨A(x)p, p⟩ + V(x)`. A is sampled on a 16 × 16 grid of `region` and
    /// every sample must be symmetric positive definite.
    pub fn mechanical(a: MatrixField, v: Field, region: Rect) -> Result<Self> {
        let mut nu = f64::INFINITY;
        if let Some(m) = a.as_constant() {
            nu = check_spd(m, region.center())?;
        } else {
            for x in region.grid(16) {
                nu = nu.min(check_spd(a.at(x), x)?);
            }
        }
        Ok(Hamiltonian {
            kind: Kind::Mechanical { a, v },
            family: Family::Mechanical,
            nu,
        })
    }

    /// `½⟨A p, p⟩ + ⟨b, p⟩ + V(x)` with constant SPD `A`.
    pub fn quadratic_form(a: Mat2, b: Vec2, v: Field) -> Result<Self> {
        let nu = check_spd(a, Vec2::ZERO)?;
        let a_inv = a.inverse().ok_or_else(|| Error::NotSpd("singular matrix".into()))?;
        Ok(Hamiltonian {
            kind: Kind::Quadratic { a, a_inv, b, v },
            family: Family::QuadraticForm,
            nu,
        })
    }

    /// A Hamiltonian written in the expression grammar over x1, x2, p1, p2.
    /// Strict convexity in p is checked on `region` × [−3, 3]².
    pub fn from_expression(src: &str, region: Rect) -> Result<Self> {
        let h = Expr::parse(src)?;
        let hp = [h.derivative(Var::P1), h.derivative(Var::P2)];
        let hx = [h.derivative(Var::X1), h.derivative(Var::X2)];
        let hpp = [
            [hp[0].derivative(Var::P1), hp[0].derivative(Var::P2)],
            [hp[1].derivative(Var::P1), hp[1].derivative(Var::P2)],
        ];
        let mut ham = Hamiltonian {
            kind: Kind::Expression(Box::new(ExprH {
                source: src.to_string(),
                h,
                hp,
                hx,
                hpp,
            })),
            family: Family::Custom,
            nu: 0.0,
        };
        ham.nu = ham.sample_convexity(region)?;
        Ok(ham)
    }

    /// A Hamiltonian given by closures. Missing derivatives are taken by
    /// central differences with step [`FD_STEP`]; the x-gradient is checked
    /// against a Richardson extrapolation on sample points.
    pub fn custom(
        f: impl Fn(Vec2, Vec2) -> f64 + Send + Sync + 'static,
        grad_p: Option<Box<dyn Fn(Vec2, Vec2) -> Vec2 + Send + Sync>>,
        region: Rect,
    ) -> Result<Self> {
        let mut ham = Hamiltonian {
            kind: Kind::Closure {
                f: Arc::new(f),
                grad_p: grad_p.map(Arc::from),
            },
            family: Family::Custom,
            nu: 0.0,
        };
        for x in region.grid(4) {
            for p in Rect::around(Vec2::ZERO, 1.0).grid(3) {
                let (g, rich) = ham.grad_x_with_richardson(x, p);
                if g.dist(rich) > 1e-5 * (1.0 + rich.norm()) {
                    return Err(Error::hypothesis(
                        "H of class C²",
                        format!("finite-difference H_x at ({x}, {p}) disagrees with its Richardson extrapolation"),
                    ));
                }
            }
        }
        ham.nu = ham.sample_convexity(region)?;
        Ok(ham)
    }

    fn sample_convexity(&self, region: Rect) -> Result<f64> {
        let mut nu = f64::INFINITY;
        let pbox = Rect::around(Vec2::ZERO, P_SAMPLE_RADIUS);
        for x in region.grid(6) {
            for p in pbox.grid(7) {
                let m = self.hess_pp(x, p);
                if !m.is_finite() {
                    return Err(Error::hypothesis(
                        "H of class C²",
                        format!("non-finite H_pp at ({x}, {p})"),
                    ));
                }
                nu = nu.min(m.sym_eigenvalues().0);
            }
            // Superlinearity: H(x, R e)/R must grow with R.
            for k in 0..8 {
                let e = Vec2::new(1.0, 0.0).rotate(k as f64 * std::f64::consts::FRAC_PI_4);
                let r1 = self.eval(x, e * 10.0) / 10.0;
                let r2 = self.eval(x, e * 100.0) / 100.0;
                if !(r2 > r1) {
                    return Err(Error::hypothesis(
                        "H superlinear in p",
                        format!("H(x, Rθ)/R does not grow at x = {x}, θ = {e}"),
                    ));
                }
            }
        }
        if nu <= 0.0 {
            return Err(Error::hypothesis(
                "H strictly convex in p",
                format!("minimum sampled eigenvalue of H_pp is {nu}"),
            ));
        }
        Ok(nu)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Lower bound ν on the eigenvalues of H_pp over the sampled region.
    pub fn convexity_modulus(&self) -> f64 {
        self.nu
    }

    pub fn eval(&self, x: Vec2, p: Vec2) -> f64 {
        match &self.kind {
            Kind::Mechanical { a, v } => 0.5 * a.at(x).form(p, p) + v.value(x),
            Kind::Quadratic { a, b, v, .. } => 0.5 * a.form(p, p) + b.dot(p) + v.value(x),
            Kind::Expression(e) => e.h.eval(&vars(x, p)),
            Kind::Closure { f, .. } => f(x, p),
        }
    }

    pub fn grad_p(&self, x: Vec2, p: Vec2) -> Vec2 {
        match &self.kind {
            Kind::Mechanical { a, .. } => a.at(x).mul_vec(p),
            Kind::Quadratic { a, b, .. } => a.mul_vec(p) + *b,
            Kind::Expression(e) => {
                let z = vars(x, p);
                Vec2::new(e.hp[0].eval(&z), e.hp[1].eval(&z))
            }
            Kind::Closure { f, grad_p } => match grad_p {
                Some(g) => g(x, p),
                None => central_gradient(|q| f(x, q), p, FD_STEP),
            },
        }
    }

    pub fn grad_x(&self, x: Vec2, p: Vec2) -> Vec2 {
        match &self.kind {
            Kind::Mechanical { a, v } => {
                let [d1, d2] = a.derivatives(x);
                Vec2::new(0.5 * d1.form(p, p), 0.5 * d2.form(p, p)) + v.gradient(x)
            }
            Kind::Quadratic { v, .. } => v.gradient(x),
            Kind::Expression(e) => {
                let z = vars(x, p);
                Vec2::new(e.hx[0].eval(&z), e.hx[1].eval(&z))
            }
            Kind::Closure { f, .. } => central_gradient(|y| f(y, p), x, FD_STEP),
        }
    }

    /// Central difference H_x at step h and its Richardson extrapolation
    /// from steps h and h/2.
    fn grad_x_with_richardson(&self, x: Vec2, p: Vec2) -> (Vec2, Vec2) {
        let g = |y: Vec2| self.eval(y, p);
        let d1 = central_gradient(g, x, FD_STEP);
        let d2 = central_gradient(g, x, FD_STEP / 2.0);
        (d1, (d2 * 4.0 - d1) / 3.0)
    }

    pub fn hess_pp(&self, x: Vec2, p: Vec2) -> Mat2 {
        match &self.kind {
            Kind::Mechanical { a, .. } => a.at(x),
            Kind::Quadratic { a, .. } => *a,
            Kind::Expression(e) => {
                let z = vars(x, p);
                Mat2::new(
                    e.hpp[0][0].eval(&z),
                    e.hpp[0][1].eval(&z),
                    e.hpp[1][0].eval(&z),
                    e.hpp[1][1].eval(&z),
                )
            }
            Kind::Closure { .. } => {
                let h = 1e-4;
                let c1 = (self.grad_p(x, p + Vec2::new(h, 0.0)) - self.grad_p(x, p - Vec2::new(h, 0.0))) / (2.0 * h);
                let c2 = (self.grad_p(x, p + Vec2::new(0.0, h)) - self.grad_p(x, p - Vec2::new(0.0, h))) / (2.0 * h);
                let off = 0.5 * (c1.x2 + c2.x1);
                Mat2::new(c1.x1, off, off, c2.x2)
            }
        }
    }

    /// If H_p(x, ·) is affine, returns (M, c) with H_p(x, p) = M p + c.
    pub fn affine_grad_p(&self, x: Vec2) -> Option<(Mat2, Vec2)> {
        match &self.kind {
            Kind::Mechanical { a, .. } => Some((a.at(x), Vec2::ZERO)),
            Kind::Quadratic { a, b, .. } => Some((*a, *b)),
            _ => None,
        }
    }

    /// True when H does not depend on x, so minimal curves are straight.
    pub fn is_x_independent(&self) -> bool {
        match &self.kind {
            Kind::Mechanical { a, v } => a.as_constant().is_some() && v.is_constant(),
            Kind::Quadratic { v, .. } => v.is_constant(),
            Kind::Expression(e) => !e.h.uses(Var::X1) && !e.h.uses(Var::X2),
            Kind::Closure { .. } => false,
        }
    }

    /// Slack in the strict-convexity inequality
    /// ⟨H_p(x,p₂) − H_p(x,p₁), p₂ − p₁⟩ ≥ ν|p₂ − p₁|².
    pub fn convexity_slack(&self, x: Vec2, p1: Vec2, p2: Vec2) -> f64 {
        (self.grad_p(x, p2) - self.grad_p(x, p1)).dot(p2 - p1) - self.nu * (p2 - p1).norm_sq()
    }

    /// Largest |H_p(x, p)| over sampled x in `region` and |p| ≤ `p_radius`.
    pub fn sup_velocity(&self, region: Rect, p_radius: f64) -> f64 {
        let mut best: f64 = 0.0;
        for x in region.grid(9) {
            for k in 0..16 {
                let e = Vec2::new(1.0, 0.0).rotate(k as f64 * std::f64::consts::PI / 8.0);
                for r in [0.0, 0.5 * p_radius, p_radius] {
                    best = best.max(self.grad_p(x, e * r).norm());
                }
            }
        }
        best
    }

    /// Right-hand side (H_p, −H_x) of the Hamiltonian system.
    pub fn vector_field(&self, z: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.grad_p(z.x, z.p), -self.grad_x(z.x, z.p))
    }

    pub fn flow(&self, start: PhasePoint, duration: f64, dt: f64) -> Result<Vec<PhasePoint>> {
        flow(self, start, duration, dt)
    }

    pub fn legendre(&self) -> Lagrangian {
        legendre(self)
    }
}

fn central_gradient(f: impl Fn(Vec2) -> f64, x: Vec2, h: f64) -> Vec2 {
    let e1 = Vec2::new(h, 0.0);
    let e2 = Vec2::new(0.0, h);
    Vec2::new((f(x + e1) - f(x - e1)) / (2.0 * h), (f(x + e2) - f(x - e2)) / (2.0 * h))
}

/// Integrate ẋ = H_p, ṗ = −H_x with classical RK4. The step is
/// `duration / n` with `n = ⌈|duration|/dt⌉`, so the endpoint is hit
/// exactly; negative durations run backward. Returns `n + 1` states.
pub fn flow(h: &Hamiltonian, start: PhasePoint, duration: f64, dt: f64) -> Result<Vec<PhasePoint>> {
    if !(dt > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidInput(format!(
            "flow needs dt > 0 and finite duration (dt = {dt})"
        )));
    }
    if !start.is_finite() {
        return Err(Error::InvalidInput("non-finite flow start".into()));
    }
    let ratio = duration.abs() / dt;
    if ratio > MAX_FLOW_STEPS {
        return Err(Error::InvalidInput(format!("|duration|/dt = {ratio:e} exceeds 1e7")));
    }
    let n = ratio.ceil() as usize;
    let mut out = Vec::with_capacity(n + 1);
    out.push(start);
    if n == 0 {
        return Ok(out);
    }
    let step = duration / n as f64;
    let add = |z: PhasePoint, k: PhasePoint, s: f64| PhasePoint::new(z.x + k.x * s, z.p + k.p * s);
    let mut z = start;
    for i in 0..n {
        let k1 = h.vector_field(z);
        let k2 = h.vector_field(add(z, k1, step / 2.0));
        let k3 = h.vector_field(add(z, k2, step / 2.0));
        let k4 = h.vector_field(add(z, k3, step));
        z = PhasePoint::new(
            z.x + (k1.x + k2.x * 2.0 + k3.x * 2.0 + k4.x) * (step / 6.0),
            z.p + (k1.p + k2.p * 2.0 + k3.p * 2.0 + k4.p) * (step / 6.0),
        );
        if !z.is_finite() {
            return Err(Error::BlowUp {
                time: step * (i + 1) as f64,
            });
        }
        out.push(z);
    }
    Ok(out)
}

/// The Lagrangian L(x, v) = sup_p ⟨p, v⟩ − H(x, p).
#[derive(Clone, Debug)]
pub struct Lagrangian {
    h: Hamiltonian,
}

pub fn legendre(h: &Hamiltonian) -> Lagrangian {
    Lagrangian { h: h.clone() }
}

impl Lagrangian {
    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.h
    }

    /// The momentum p = L_v(x, v), i.e. the solution of H_p(x, p) = v.
    pub fn momentum(&self, x: Vec2, v: Vec2) -> Result<Vec2> {
        match &self.h.kind {
            Kind::Mechanical { a, .. } => {
                let inv = a
                    .at(x)
                    .inverse()
                    .ok_or_else(|| Error::NotSpd(format!("A({x}) is singular")))?;
                Ok(inv.mul_vec(v))
            }
            Kind::Quadratic { a_inv, b, .. } => Ok(a_inv.mul_vec(v - *b)),
            _ => self.newton_momentum(x, v),
        }
    }

    fn newton_momentum(&self, x: Vec2, v: Vec2) -> Result<Vec2> {
        let h = &self.h;
        let objective = |p: Vec2| p.dot(v) - h.eval(x, p);
        let tol = LEGENDRE_TOL * v.norm().max(1.0);
        let mut p = match h.hess_pp(x, Vec2::ZERO).inverse() {
            Some(inv) => inv.mul_vec(v - h.grad_p(x, Vec2::ZERO)),
            None => Vec2::ZERO,
        };
        if !p.is_finite() {
            p = Vec2::ZERO;
        }
        let mut residual = (v - h.grad_p(x, p)).norm();
        for _ in 0..LEGENDRE_MAX_ITER {
            if residual < tol {
                return Ok(p);
            }
            let r = v - h.grad_p(x, p);
            let step = match h.hess_pp(x, p).inverse() {
                Some(inv) => inv.mul_vec(r),
                None => r,
            };
            // Backtrack until the concave objective increases.
            let f0 = objective(p);
            let mut s = 1.0;
            let mut next = p + step;
            while s > 1e-12 && !(objective(next) >= f0 - 1e-15 * f0.abs()) {
                s *= 0.5;
                next = p + step * s;
            }
            p = next;
            residual = (v - h.grad_p(x, p)).norm();
        }
        if residual < tol {
            Ok(p)
        } else {
            Err(Error::Legendre { residual })
        }
    }

    pub fn eval(&self, x: Vec2, v: Vec2) -> Result<f64> {
        match &self.h.kind {
            Kind::Mechanical { a, v: pot } => {
                let inv = a
                    .at(x)
                    .inverse()
                    .ok_or_else(|| Error::NotSpd(format!("A({x}) is singular")))?;
                Ok(0.5 * inv.form(v, v) - pot.value(x))
            }
            Kind::Quadratic { a_inv, b, v: pot, .. } => {
                let w = v - *b;
                Ok(0.5 * a_inv.form(w, w) - pot.value(x))
            }
            _ => {
                let p = self.momentum(x, v)?;
                Ok(p.dot(v) - self.h.eval(x, p))
            }
        }
    }

    pub fn grad_v(&self, x: Vec2, v: Vec2) -> Result<Vec2> {
        self.momentum(x, v)
    }

    /// L_x(x, v) = −H_x(x, L_v(x, v)).
    pub fn grad_x(&self, x: Vec2, v: Vec2) -> Result<Vec2> {
        let p = self.momentum(x, v)?;
        Ok(-self.h.grad_x(x, p))
    }

    pub fn is_x_independent(&self) -> bool {
        self.h.is_x_independent()
    }
}
