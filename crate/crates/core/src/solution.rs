//! Semiconcave solutions and their superdifferentials.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{default_search_box, fundamental_solution, lax_oleinik_neg, ActionKernel, LaxOleinikOptions};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{hull_contains_origin, ConvexSet2D, Membership, Rect, SetKind, Vec2};
use crate::hamiltonian::{Hamiltonian, PhasePoint};
use crate::optimize::{bisect, nelder_mead};

/// Two branches tie when their values differ by at most this much.
pub const ACTIVE_TOL: f64 = 1e-9;
/// Residual allowed in H(x, Du_i(x)) = 0 where branch i is minimal.
pub const BRANCH_PDE_TOL: f64 = 1e-8;
/// Relative-interior tolerance of the energy selection.
pub const INTERIOR_TOL: f64 = 1e-9;
/// Edge samples used when mapping D⁺u through H_p.
pub const CRITICAL_EDGE_SAMPLES: usize = 32;
/// Tolerance for matching a covector against the reachable gradients.
pub const REACHABLE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    MinOfSmooth,
    LaxOleinikValue,
}

/// D⁺u(x) with its reachable gradients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superdiff2D {
    pub set: ConvexSet2D,
    /// D*u(x); for min-of-smooth solutions ordered by branch index.
    pub reachable: Vec<Vec2>,
    /// Affine dimension of the set.
    pub sing_class: u8,
    /// Indices of the active branches (min-of-smooth only).
    pub active: Vec<usize>,
}

impl Superdiff2D {
    pub fn is_singular(&self) -> bool {
        self.sing_class > 0
    }

    /// Endpoints (p¹, p²) when the set is a segment.
    pub fn segment(&self) -> Option<(Vec2, Vec2)> {
        (self.set.kind() == SetKind::Segment).then(|| {
            let e = self.set.extreme_points();
            // Keep the reachable order so that p¹ comes from the lower branch.
            match self.reachable.as_slice() {
                [a, b] => (*a, *b),
                _ => (e[0], e[1]),
            }
        })
    }
}

/// The energy-minimizing covector of D⁺u(x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySelection {
    pub p_min: Vec2,
    pub value: f64,
    /// p_min lies in the relative interior of D⁺u(x) (a singleton counts).
    pub interior: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalDerivative {
    /// min over D⁺u(x) of ⟨p, v⟩.
    pub value: f64,
    /// (u(x + λv) − u(x))/λ at λ = 1e-4.
    pub quotient: f64,
    /// The two disagree by more than 1e-3.
    pub suspect: bool,
}

type InitialDatum = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

struct LaxOleinikRep {
    h: Hamiltonian,
    u0: InitialDatum,
    t: f64,
    lambda0: f64,
    opts: LaxOleinikOptions,
    seed: u64,
    starts: usize,
    cache: RwLock<HashMap<(u64, u64), f64>>,
}

enum Inner {
    MinOfSmooth(Vec<Field>),
    LaxOleinik(Box<LaxOleinikRep>),
}

/// A semiconcave function u on a rectangular working region.
pub struct SolutionRep {
    inner: Inner,
    region: Rect,
    c: f64,
    active_tol: f64,
}

impl fmt::Debug for SolutionRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolutionRep")
            .field("kind", &self.kind())
            .field("region", &self.region)
            .field("semiconcavity", &self.c)
            .finish()
    }
}

impl SolutionRep {
    /// u = min_i u_i. The semiconcavity constant is the largest sampled
    /// Hessian eigenvalue of the branches (at least 0); a caller-supplied
    /// constant must dominate it.
    pub fn min_of_smooth(branches: Vec<Field>, region: Rect, c: Option<f64>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidInput(
                "a min-of-smooth solution needs at least one branch".into(),
            ));
        }
        let mut bound: f64 = 0.0;
        for b in &branches {
            for x in region.grid(16) {
                let hs = b.hessian(x);
                if !hs.is_finite() || !b.value(x).is_finite() {
                    return Err(Error::InvalidInput(format!("branch is not finite at {x}")));
                }
                bound = bound.max(hs.sym_eigenvalues().1);
            }
        }
        let c = match c {
            Some(c) if c + 1e-12 < bound => {
                return Err(Error::InvalidInput(format!(
                    "semiconcavity constant {c} is below the branch Hessian bound {bound}"
                )))
            }
            Some(c) => c,
            None => bound,
        };
        Ok(SolutionRep {
            inner: Inner::MinOfSmooth(branches),
            region,
            c,
            active_tol: ACTIVE_TOL,
        })
    }

    /// u = T_t u0, evaluated through the negative-type Lax–Oleinik operator
    /// with search radius (λ0 + 1)t. Values are memoized.
    pub fn lax_oleinik_value(
        h: Hamiltonian,
        u0: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        t: f64,
        lambda0: f64,
        region: Rect,
        c: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(t > 0.0) || !(lambda0 >= 0.0) {
            return Err(Error::InvalidInput("lax_oleinik_value needs t > 0 and λ0 ≥ 0".into()));
        }
        Ok(SolutionRep {
            inner: Inner::LaxOleinik(Box::new(LaxOleinikRep {
                h,
                u0: Arc::new(u0),
                t,
                lambda0,
                opts: LaxOleinikOptions::default(),
                seed,
                starts: 16,
                cache: RwLock::new(HashMap::new()),
            })),
            region,
            c,
            active_tol: ACTIVE_TOL,
        })
    }

    pub fn with_active_tol(mut self, tol: f64) -> Self {
        self.active_tol = tol;
        self
    }

    pub fn kind(&self) -> SolutionKind {
        match self.inner {
            Inner::MinOfSmooth(_) => SolutionKind::MinOfSmooth,
            Inner::LaxOleinik(_) => SolutionKind::LaxOleinikValue,
        }
    }

    pub fn region(&self) -> Rect {
        self.region
    }

    pub fn semiconcavity_constant(&self) -> f64 {
        self.c
    }

    pub fn active_tol(&self) -> f64 {
        self.active_tol
    }

    /// Branches of a min-of-smooth solution.
    pub fn branches(&self) -> Option<&[Field]> {
        match &self.inner {
            Inner::MinOfSmooth(b) => Some(b),
            Inner::LaxOleinik(_) => None,
        }
    }

    fn check_region(&self, x: Vec2) -> Result<()> {
        if !x.is_finite() || !self.region.contains(x) {
            return Err(Error::OutsideRegion(x));
        }
        Ok(())
    }

    pub fn value(&self, x: Vec2) -> Result<f64> {
        self.check_region(x)?;
        Ok(self.value_unchecked(x))
    }

    /// Value without the region check (used by difference quotients and
    /// oracles that probe just outside the region).
    pub fn value_unchecked(&self, x: Vec2) -> f64 {
        match &self.inner {
            Inner::MinOfSmooth(b) => b.iter().map(|f| f.value(x)).fold(f64::INFINITY, f64::min),
            Inner::LaxOleinik(rep) => rep.value(x),
        }
    }

    /// Indices of branches within `active_tol` of the minimum.
    pub fn active_branches(&self, x: Vec2) -> Vec<usize> {
        match &self.inner {
            Inner::MinOfSmooth(b) => {
                let vals: Vec<f64> = b.iter().map(|f| f.value(x)).collect();
                let m = vals.iter().copied().fold(f64::INFINITY, f64::min);
                (0..b.len()).filter(|&i| vals[i] <= m + self.active_tol).collect()
            }
            Inner::LaxOleinik(_) => Vec::new(),
        }
    }

    pub fn superdiff(&self, x: Vec2) -> Result<Superdiff2D> {
        self.check_region(x)?;
        match &self.inner {
            Inner::MinOfSmooth(b) => {
                let active = self.active_branches(x);
                if active.is_empty() {
                    return Err(Error::Internal(format!("no active branch at {x}")));
                }
                let mut reachable: Vec<Vec2> = Vec::new();
                for &i in &active {
                    let g = b[i].gradient(x);
                    if !reachable.iter().any(|q| q.dist(g) <= 1e-12 * (1.0 + g.norm())) {
                        reachable.push(g);
                    }
                }
                let set = ConvexSet2D::hull(&reachable)?;
                Ok(Superdiff2D {
                    sing_class: set.dimension() as u8,
                    set,
                    reachable,
                    active,
                })
            }
            Inner::LaxOleinik(rep) => rep.superdiff(x),
        }
    }

    pub fn is_singular(&self, x: Vec2) -> Result<bool> {
        Ok(self.superdiff(x)?.is_singular())
    }

    pub fn sing_class(&self, x: Vec2) -> Result<u8> {
        Ok(self.superdiff(x)?.sing_class)
    }

    /// Largest |Du_i| over the region (sampled), an estimate of the
    /// Lipschitz constant C1.
    pub fn gradient_bound(&self) -> f64 {
        match &self.inner {
            Inner::MinOfSmooth(b) => b
                .iter()
                .flat_map(|f| self.region.grid(16).into_iter().map(move |x| f.gradient(x).norm()))
                .fold(0.0, f64::max),
            Inner::LaxOleinik(rep) => {
                // Difference quotients on a coarse grid.
                let g = self.region.grid(9);
                let h = 1e-3 * self.region.width().max(self.region.height());
                g.iter()
                    .map(|&x| {
                        let e1 = Vec2::new(h, 0.0);
                        let e2 = Vec2::new(0.0, h);
                        Vec2::new(
                            (rep.value(x + e1) - rep.value(x - e1)) / (2.0 * h),
                            (rep.value(x + e2) - rep.value(x - e2)) / (2.0 * h),
                        )
                        .norm()
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Worst residual |H(x, Du_i(x))| over grid points of the region where
    /// branch i attains the minimum.
    pub fn branch_pde_residual(&self, h: &Hamiltonian, grid: usize) -> Result<f64> {
        let Inner::MinOfSmooth(b) = &self.inner else {
            return Err(Error::InvalidInput(
                "branch residual needs a min-of-smooth solution".into(),
            ));
        };
        let mut worst: f64 = 0.0;
        for x in self.region.grid(grid) {
            for i in self.active_branches(x) {
                worst = worst.max(h.eval(x, b[i].gradient(x)).abs());
            }
        }
        Ok(worst)
    }
}

impl LaxOleinikRep {
    fn value(&self, x: Vec2) -> f64 {
        let key = (x.x1.to_bits(), x.x2.to_bits());
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return *v;
        }
        let search = default_search_box(x, self.t, self.lambda0);
        let u0 = self.u0.as_ref();
        let v = lax_oleinik_neg(&self.h, &u0, self.t, x, search, &self.opts)
            .map(|r| r.value)
            .unwrap_or(f64::NAN);
        self.cache.write().expect("cache lock").insert(key, v);
        v
    }

    /// Reachable gradients L_v(x, ξ̇(t)) of the minimal curves ending at x,
    /// found by seeded multi-start minimization of y ↦ u0(y) + A_t(y, x).
    fn superdiff(&self, x: Vec2) -> Result<Superdiff2D> {
        let search = default_search_box(x, self.t, self.lambda0);
        let kernel = ActionKernel::new(&self.h, self.opts.action_nodes);
        let f = |y: Vec2| {
            if !search.contains(y) {
                return f64::INFINITY;
            }
            match kernel.eval(self.t, y, x) {
                Ok(a) => (self.u0)(y) + a,
                Err(_) => f64::INFINITY,
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ x.x1.to_bits().rotate_left(17) ^ x.x2.to_bits());
        let mut starts: Vec<Vec2> = (0..self.starts)
            .map(|_| {
                Vec2::new(
                    rng.gen_range(search.lo.x1..=search.hi.x1),
                    rng.gen_range(search.lo.x2..=search.hi.x2),
                )
            })
            .collect();
        let u0 = self.u0.as_ref();
        let global = lax_oleinik_neg(&self.h, &u0, self.t, x, search, &self.opts)?;
        starts.push(global.argmin);
        let scale = 0.25 * search.width();
        let mut minima: Vec<(Vec2, f64)> = starts
            .into_iter()
            .map(|s| nelder_mead(f, s, scale, 1e-12, 4000))
            .collect();
        minima.push((global.argmin, global.value));
        let best = minima.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        let gap = self.opts.uniqueness_gap.max(1e-9 * best.abs());
        let l = self.h.legendre();
        let mut reachable: Vec<Vec2> = Vec::new();
        for (y, v) in minima {
            if v > best + gap {
                continue;
            }
            let p = if l.is_x_independent() {
                l.momentum(x, (x - y) / self.t)?
            } else {
                let r = fundamental_solution(&self.h, self.t, y, x, self.opts.action_nodes)?;
                match r.final_momentum {
                    Some(p) => p,
                    None => {
                        let n = &r.minimizer.nodes;
                        let tau = self.t / (n.len() - 1) as f64;
                        let k = n.len() - 1;
                        l.momentum((n[k] + n[k - 1]) * 0.5, (n[k] - n[k - 1]) / tau)?
                    }
                }
            };
            if !reachable.iter().any(|q| q.dist(p) <= 1e-4) {
                reachable.push(p);
            }
        }
        reachable.sort_by(|a, b| a.x1.total_cmp(&b.x1).then(a.x2.total_cmp(&b.x2)));
        let set = ConvexSet2D::hull(&reachable)?;
        Ok(Superdiff2D {
            sing_class: set.dimension() as u8,
            set,
            reachable,
            active: Vec::new(),
        })
    }
}

/// Minimizer of the strictly convex p ↦ H(x, p) over a convex set.
pub fn energy_argmin_on(h: &Hamiltonian, x: Vec2, set: &ConvexSet2D) -> Result<EnergySelection> {
    let e = set.extreme_points();
    let p_min = match set.kind() {
        SetKind::Point => e[0],
        SetKind::Segment => segment_argmin(h, x, e[0], e[1]),
        SetKind::Polygon => {
            let free = h.legendre().momentum(x, Vec2::ZERO)?;
            if set.contains(free) == Membership::Inside {
                free
            } else {
                set.edges()
                    .into_iter()
                    .map(|(a, b)| segment_argmin(h, x, a, b))
                    .min_by(|a, b| h.eval(x, *a).total_cmp(&h.eval(x, *b)))
                    .expect("polygon has edges")
            }
        }
    };
    Ok(EnergySelection {
        p_min,
        value: h.eval(x, p_min),
        interior: set.in_relative_interior(p_min, INTERIOR_TOL),
    })
}

/// Minimizer of H(x, ·) on [a, b]. The derivative s ↦ ⟨H_p(a + s d), d⟩ is
/// increasing, so its sign change is found in closed form when H_p is affine
/// and by bisection otherwise.
fn segment_argmin(h: &Hamiltonian, x: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let d = b - a;
    let g = |s: f64| h.grad_p(x, a + d * s).dot(d);
    let (g0, g1) = (g(0.0), g(1.0));
    if g0 >= 0.0 {
        return a;
    }
    if g1 <= 0.0 {
        return b;
    }
    let s = match h.affine_grad_p(x) {
        Some((m, _)) => (-g0 / m.form(d, d)).clamp(0.0, 1.0),
        None => bisect(g, 0.0, 1.0, 1e-16),
    };
    a + d * s
}

pub fn energy_argmin(h: &Hamiltonian, u: &SolutionRep, x: Vec2) -> Result<EnergySelection> {
    energy_argmin_on(h, x, &u.superdiff(x)?.set)
}

/// Whether 0 ∈ co H_p(x, D⁺u(x)). The image of the set is approximated by
/// its extreme points and [`CRITICAL_EDGE_SAMPLES`] samples per edge.
pub fn is_critical_on(h: &Hamiltonian, x: Vec2, set: &ConvexSet2D) -> Result<Membership> {
    let image: Vec<Vec2> = set
        .boundary_samples(CRITICAL_EDGE_SAMPLES)
        .into_iter()
        .map(|p| h.grad_p(x, p))
        .collect();
    Ok(hull_contains_origin(&ConvexSet2D::hull(&image)?))
}

pub fn is_critical(h: &Hamiltonian, u: &SolutionRep, x: Vec2) -> Result<Membership> {
    is_critical_on(h, x, &u.superdiff(x)?.set)
}

/// Backward calibrated curve through (x, p*): the flow run backward for
/// time `r`. The returned states go from ξ(0) = x to ξ(−r).
pub fn backward_calibrated(
    h: &Hamiltonian,
    u: &SolutionRep,
    x: Vec2,
    p_star: Vec2,
    r: f64,
    dt: f64,
) -> Result<Vec<PhasePoint>> {
    let sd = u.superdiff(x)?;
    if !sd.reachable.iter().any(|q| q.dist(p_star) <= REACHABLE_TOL) {
        return Err(Error::NotReachable(p_star));
    }
    h.flow(PhasePoint::new(x, p_star), -r, dt)
}

pub fn directional_superderivative(u: &SolutionRep, x: Vec2, v: Vec2) -> Result<DirectionalDerivative> {
    let sd = u.superdiff(x)?;
    let value = sd.set.support_min(v);
    let lambda = 1e-4;
    let quotient = (u.value_unchecked(x + v * lambda) - u.value(x)?) / lambda;
    Ok(DirectionalDerivative {
        value,
        quotient,
        suspect: (value - quotient).abs() > 1e-3,
    })
}

pub fn exposed_face(u: &SolutionRep, x: Vec2, v: Vec2) -> Result<ConvexSet2D> {
    Ok(u.superdiff(x)?.set.exposed_face(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Affine, ExprField, MatrixField};
    use crate::geometry::Mat2;

    fn corner() -> SolutionRep {
        SolutionRep::min_of_smooth(
            vec![
                Affine::new(0.0, Vec2::new(1.0, 0.0)).into_field(),
                Affine::new(0.0, Vec2::new(0.0, 1.0)).into_field(),
            ],
            Rect::around(Vec2::new(1.0, 1.0), 2.0),
            None,
        )
        .unwrap()
    }

    fn eikonal() -> Hamiltonian {
        Hamiltonian::mechanical(
            MatrixField::constant(Mat2::IDENTITY).unwrap(),
            Affine::new(-0.5, Vec2::ZERO).into_field(),
            Rect::around(Vec2::ZERO, 5.0),
        )
        .unwrap()
    }

    #[test]
    fn values_and_superdifferentials() {
        let u = corner();
        assert_eq!(u.value(Vec2::new(2.0, 1.0)).unwrap(), 1.0);
        assert_eq!(u.value(Vec2::new(1.0, 1.0)).unwrap(), 1.0);
        assert!(matches!(u.value(Vec2::new(9.0, 1.0)), Err(Error::OutsideRegion(_))));
        let sd = u.superdiff(Vec2::new(1.0, 1.0)).unwrap();
        assert_eq!(sd.set.kind(), SetKind::Segment);
        assert_eq!(sd.reachable, vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]);
        assert_eq!(sd.sing_class, 1);
        let sd = u.superdiff(Vec2::new(2.0, 1.0)).unwrap();
        assert_eq!(sd.set.extreme_points(), &[Vec2::new(0.0, 1.0)]);
        assert!(!u.is_singular(Vec2::new(2.0, 1.0)).unwrap());
        assert_eq!(corner().semiconcavity_constant(), 0.0);
    }

    #[test]
    fn triple_junction_is_class_two() {
        let u = SolutionRep::min_of_smooth(
            vec![
                ExprField::parse("x1").unwrap().into_field(),
                ExprField::parse("x2").unwrap().into_field(),
                ExprField::parse("3 - x1 - x2").unwrap().into_field(),
            ],
            Rect::around(Vec2::ZERO, 3.0),
            None,
        )
        .unwrap();
        let c = Vec2::new(1.0, 1.0);
        let sd = u.superdiff(c).unwrap();
        assert_eq!(sd.sing_class, 2);
        assert_eq!(sd.set.kind(), SetKind::Polygon);
        assert!(u.is_singular(c).unwrap());
    }

    #[test]
    fn energy_selection_examples() {
        let h = eikonal();
        let x = Vec2::new(1.0, 1.0);
        let e = energy_argmin(&h, &corner(), x).unwrap();
        assert!(e.p_min.dist(Vec2::new(0.5, 0.5)) < 1e-15);
        assert!((e.value + 0.25).abs() < 1e-15);
        assert!(e.interior);
        let e = energy_argmin_on(&h, x, &ConvexSet2D::point(Vec2::new(0.0, 1.0))).unwrap();
        assert_eq!(e.p_min, Vec2::new(0.0, 1.0));
        assert_eq!(e.value, 0.0);

        // Anisotropic: minimize p1² + p2²/2 on [(1/√2, 0), (0, 1)].
        let ha = Hamiltonian::quadratic_form(
            Mat2::diag(2.0, 1.0),
            Vec2::ZERO,
            Affine::new(-0.5, Vec2::ZERO).into_field(),
        )
        .unwrap();
        let (a, b) = (Vec2::new(0.5f64.sqrt(), 0.0), Vec2::new(0.0, 1.0));
        let seg = ConvexSet2D::segment(a, b);
        let e = energy_argmin_on(&ha, x, &seg).unwrap();
        // Oracle: dense parameter scan.
        let best = (0..=200_000)
            .map(|k| a.lerp(b, k as f64 / 200_000.0))
            .min_by(|p, q| ha.eval(x, *p).total_cmp(&ha.eval(x, *q)))
            .unwrap();
        assert!(e.p_min.dist(best) < 1e-5);
        assert!(e.value <= ha.eval(x, best) + 1e-15);
    }

    #[test]
    fn energy_selection_on_polygon() {
        let h = eikonal();
        let x = Vec2::ZERO;
        let tri = ConvexSet2D::hull(&[Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, -1.0)]).unwrap();
        let e = energy_argmin_on(&h, x, &tri).unwrap();
        assert_eq!(e.p_min, Vec2::ZERO);
        assert!(e.interior);
        let far = ConvexSet2D::hull(&[Vec2::new(2.0, 0.0), Vec2::new(3.0, 1.0), Vec2::new(2.0, 2.0)]).unwrap();
        let e = energy_argmin_on(&h, x, &far).unwrap();
        assert!(e.p_min.dist(Vec2::new(2.0, 0.0)) < 1e-15);
        assert!(!e.interior);
    }

    #[test]
    fn criticality_examples() {
        let h =
            Hamiltonian::quadratic_form(Mat2::IDENTITY, Vec2::ZERO, Affine::new(0.0, Vec2::ZERO).into_field()).unwrap();
        let x = Vec2::ZERO;
        let seg = ConvexSet2D::segment(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        assert_eq!(is_critical_on(&h, x, &seg).unwrap(), Membership::Outside);
        let sym = ConvexSet2D::segment(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));
        assert_eq!(is_critical_on(&h, x, &sym).unwrap(), Membership::Inside);
    }

    #[test]
    fn mountain_pass_point_is_critical() {
        // V ≡ −½ and u = min(x1, −x1): along x1 = 0 both ±e1 are active and
        // 0 = H_p at their midpoint.
        let h = eikonal();
        let u = SolutionRep::min_of_smooth(
            vec![
                ExprField::parse("x1").unwrap().into_field(),
                ExprField::parse("-x1").unwrap().into_field(),
            ],
            Rect::around(Vec2::ZERO, 2.0),
            None,
        )
        .unwrap();
        assert_eq!(is_critical(&h, &u, Vec2::new(0.0, 0.5)).unwrap(), Membership::Inside);
        assert_eq!(u.branch_pde_residual(&h, 21).unwrap(), 0.0);
    }

    #[test]
    fn backward_rays() {
        let h = eikonal();
        let u = corner();
        let x = Vec2::new(1.0, 1.0);
        let r = 0.7;
        let xi = backward_calibrated(&h, &u, x, Vec2::new(0.0, 1.0), r, 1e-2).unwrap();
        assert!(xi.last().unwrap().x.dist(Vec2::new(1.0, 1.0 - r)) < 1e-14);
        let drop = u.value(x).unwrap() - u.value(xi.last().unwrap().x).unwrap();
        assert!((drop - r).abs() < 1e-14);
        let xi = backward_calibrated(&h, &u, x, Vec2::new(1.0, 0.0), r, 1e-2).unwrap();
        assert!(xi.last().unwrap().x.dist(Vec2::new(1.0 - r, 1.0)) < 1e-14);
        assert!(matches!(
            backward_calibrated(&h, &u, x, Vec2::new(0.5, 0.5), r, 1e-2),
            Err(Error::NotReachable(_))
        ));
    }

    #[test]
    fn directional_derivatives_and_faces() {
        let u = corner();
        let x = Vec2::new(1.0, 1.0);
        for (v, expect) in [((1.0, 1.0), 1.0), ((1.0, 0.0), 0.0), ((1.0, -1.0), -1.0)] {
            let d = directional_superderivative(&u, x, Vec2::new(v.0, v.1)).unwrap();
            assert_eq!(d.value, expect);
            assert!(!d.suspect);
        }
        assert_eq!(
            exposed_face(&u, x, Vec2::new(1.0, 1.0)).unwrap().kind(),
            SetKind::Segment
        );
        assert_eq!(
            exposed_face(&u, x, Vec2::new(1.0, 0.0)).unwrap().extreme_points(),
            &[Vec2::new(0.0, 1.0)]
        );
        assert_eq!(
            exposed_face(&u, x, Vec2::new(0.0, 1.0)).unwrap().extreme_points(),
            &[Vec2::new(1.0, 0.0)]
        );
    }

    #[test]
    fn lax_oleinik_rep_recovers_kink() {
        // T_t(−|y1|) = −|x1| for the eikonal Hamiltonian.
        let h = eikonal();
        let u = SolutionRep::lax_oleinik_value(
            h,
            |y: Vec2| -y.x1.abs(),
            0.3,
            2.0,
            Rect::around(Vec2::ZERO, 1.0),
            0.0,
            11,
        )
        .unwrap();
        assert_eq!(u.kind(), SolutionKind::LaxOleinikValue);
        for x in [Vec2::new(0.4, 0.1), Vec2::new(-0.2, 0.5)] {
            assert!((u.value(x).unwrap() + x.x1.abs()).abs() < 1e-9);
        }
        let sd = u.superdiff(Vec2::new(0.0, 0.3)).unwrap();
        assert_eq!(sd.sing_class, 1);
        assert_eq!(sd.reachable.len(), 2);
        assert!(sd.reachable[0].dist(Vec2::new(-1.0, 0.0)) < 1e-4);
        assert!(sd.reachable[1].dist(Vec2::new(1.0, 0.0)) < 1e-4);
        let sd = u.superdiff(Vec2::new(0.5, 0.3)).unwrap();
        assert_eq!(sd.sing_class, 0);
        assert!(sd.reachable[0].dist(Vec2::new(-1.0, 0.0)) < 1e-4);
    }
}
