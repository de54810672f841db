use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arc::{ArcKind, SingularArc, TruncationReason};
use super::{check_step, inspect_start, near_singular};
use crate::error::{self, Error, Result};
use crate::field::Field;
use crate::geometry::{Mat2, Rect, Vec2};
use crate::hamiltonian::Hamiltonian;
use crate::solution::SolutionRep;

/// u_ε = −ε log Σ exp(−u_i/ε), a smooth lower approximation of min u_i with
/// 0 ≤ u − u_ε ≤ ε log K.
#[derive(Clone, Debug)]
pub struct Softmin<'a> {
    branches: &'a [Field],
    eps: f64,
}

impl<'a> Softmin<'a> {
    pub fn new(branches: &'a [Field], eps: f64) -> Result<Self> {
        if branches.is_empty() || !(eps > 0.0) {
            return Err(Error::InvalidInput("softmin needs branches and ε > 0".into()));
        }
        Ok(Softmin { branches, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Branch values and the Gibbs weights exp(−(u_i − min)/ε), normalized.
    fn weights(&self, x: Vec2) -> (Vec<f64>, Vec<f64>, f64) {
        let vals: Vec<f64> = self.branches.iter().map(|f| f.value(x)).collect();
        let m = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let mut w: Vec<f64> = vals.iter().map(|v| (-(v - m) / self.eps).exp()).collect();
        let s: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= s;
        }
        (vals, w, m - self.eps * s.ln())
    }

    pub fn value(&self, x: Vec2) -> f64 {
        self.weights(x).2
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        let (_, w, _) = self.weights(x);
        self.branches
            .iter()
            .zip(&w)
            .fold(Vec2::ZERO, |acc, (f, wi)| acc + f.gradient(x) * *wi)
    }

    /// Σ w_i D²u_i − (1/ε) Cov_w(Du_i).
    pub fn hessian(&self, x: Vec2) -> Mat2 {
        let (_, w, _) = self.weights(x);
        let grads: Vec<Vec2> = self.branches.iter().map(|f| f.gradient(x)).collect();
        let mean = grads.iter().zip(&w).fold(Vec2::ZERO, |a, (g, wi)| a + *g * *wi);
        let mut out = Mat2::ZERO;
        for ((f, g), wi) in self.branches.iter().zip(&grads).zip(&w) {
            let d = *g - mean;
            out = out
                .add(&f.hessian(x).scale(*wi))
                .add(&Mat2::outer(d, d).scale(-wi / self.eps));
        }
        out
    }

    /// Rough Lipschitz constant of x ↦ Du_ε(x) near x: the branch Hessians
    /// plus spread²/(4ε) over branches with non-negligible weight.
    fn stiffness(&self, x: Vec2) -> f64 {
        let (vals, _, _) = self.weights(x);
        let m = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let live: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] - m < 40.0 * self.eps).collect();
        let mut spread: f64 = 0.0;
        let mut curv: f64 = 0.0;
        for &i in &live {
            curv = curv.max(self.branches[i].hessian(x).sym_norm());
            for &j in &live {
                spread = spread.max(self.branches[i].gradient(x).dist(self.branches[j].gradient(x)));
            }
        }
        curv + spread * spread / (4.0 * self.eps)
    }
}

/// A decreasing schedule of softmin temperatures with the uniform bounds
/// C1 ≥ |Du_ε| and D²u_ε ≤ C2·I sampled over the working region.
#[derive(Clone, Debug)]
pub struct MollifiedFamily<'a> {
    branches: &'a [Field],
    pub eps_schedule: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
}

impl<'a> MollifiedFamily<'a> {
    pub fn new(u: &'a SolutionRep, eps_schedule: &[f64]) -> Result<Self> {
        let branches = u
            .branches()
            .ok_or_else(|| Error::InvalidInput("mollification needs a min-of-smooth solution".into()))?;
        if eps_schedule.is_empty() || eps_schedule.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidInput("ε schedule must be nonempty and positive".into()));
        }
        if eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidInput("ε schedule must be strictly decreasing".into()));
        }
        let (c1, c2) = sample_bounds(branches, eps_schedule, u.region());
        Ok(MollifiedFamily {
            branches,
            eps_schedule: eps_schedule.to_vec(),
            c1,
            c2,
        })
    }

    pub fn member(&self, k: usize) -> Softmin<'a> {
        Softmin {
            branches: self.branches,
            eps: self.eps_schedule[k],
        }
    }

    /// ε log K, the uniform distance between u_ε and u at the last ε.
    pub fn uniform_error(&self) -> f64 {
        self.eps_schedule.last().unwrap() * (self.branches.len() as f64).ln()
    }
}

fn sample_bounds(branches: &[Field], schedule: &[f64], region: Rect) -> (f64, f64) {
    let grid = region.grid(24);
    let mut c1: f64 = 0.0;
    let mut c2: f64 = f64::NEG_INFINITY;
    for &eps in schedule {
        let s = Softmin { branches, eps };
        for &x in &grid {
            c1 = c1.max(s.gradient(x).norm());
            c2 = c2.max(s.hessian(x).sym_eigenvalues().1);
        }
    }
    (c1, c2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifiedOptions {
    pub eps_schedule: Vec<f64>,
    /// Pointwise agreement required between the last two ε.
    pub moll_tol: f64,
    /// Bound required on ε log K at the last ε.
    pub uniform_tol: f64,
}

impl Default for MollifiedOptions {
    fn default() -> Self {
        MollifiedOptions {
            eps_schedule: vec![1e-2, 1e-3, 1e-4],
            moll_tol: 1e-4,
            uniform_tol: 1e-3,
        }
    }
}

struct SmoothRun {
    points: Vec<Vec2>,
    covectors: Vec<Vec2>,
    left_region: bool,
}

/// RK4 on ẋ = H_p(x, Du_ε(x)), reporting the state every `dt` with inner
/// steps short enough for the transversal stiffness ~ 1/ε.
fn integrate(h: &Hamiltonian, s: &Softmin<'_>, region: Rect, x0: Vec2, t_end: f64, dt: f64, steps: usize) -> SmoothRun {
    let f = |x: Vec2| h.grad_p(x, s.gradient(x));
    let mut x = x0;
    let mut points = vec![x0];
    let mut covectors = vec![s.gradient(x0)];
    for k in 0..steps {
        let len = (t_end - k as f64 * dt).min(dt);
        let rate = h.hess_pp(x, s.gradient(x)).sym_norm() * s.stiffness(x) + 1.0;
        let n = (len * rate).ceil().max(1.0) as usize;
        let hh = len / n as f64;
        for _ in 0..n {
            let k1 = f(x);
            let k2 = f(x + k1 * (0.5 * hh));
            let k3 = f(x + k2 * (0.5 * hh));
            let k4 = f(x + k3 * hh);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (hh / 6.0);
        }
        if !x.is_finite() || !region.contains(x) {
            return SmoothRun {
                points,
                covectors,
                left_region: true,
            };
        }
        points.push(x);
        covectors.push(s.gradient(x));
    }
    SmoothRun {
        points,
        covectors,
        left_region: false,
    }
}

/// Strict characteristic as the limit of classical characteristics of the
/// softmin approximations. Returns the Richardson combination of the last
/// two temperatures (error assumed linear in ε); `diagnostics.converged`
/// records whether the schedule agreed within `moll_tol` and ε log K is
/// within `uniform_tol`.
pub fn propagate_strict_mollified(
    h: &Hamiltonian,
    u: &SolutionRep,
    x0: Vec2,
    t_end: f64,
    dt: f64,
    opts: &MollifiedOptions,
) -> Result<SingularArc> {
    let steps = check_step(t_end, dt)?;
    let family = MollifiedFamily::new(u, &opts.eps_schedule)?;
    let start = inspect_start(h, u, x0)?;
    if start.sd.is_singular() && start.critical.possibly_inside() {
        return Err(Error::hypothesis(
            error::NONCRITICAL,
            format!(
                "{x0} is a critical point: 0 is within {:.3e} of co H_p",
                start.critical_distance
            ),
        ));
    }
    let region = u.region();
    let runs: Vec<SmoothRun> = (0..family.eps_schedule.len())
        .into_par_iter()
        .map(|k| integrate(h, &family.member(k), region, x0, t_end, dt, steps))
        .collect();
    let len = runs.iter().map(|r| r.points.len()).min().unwrap();
    let last = runs.last().unwrap();
    let schedule = &family.eps_schedule;

    let (points, agreement) = if runs.len() >= 2 {
        let prev = &runs[runs.len() - 2];
        let (ea, eb) = (schedule[schedule.len() - 2], schedule[schedule.len() - 1]);
        let w = eb / (ea - eb);
        let pts: Vec<Vec2> = (0..len)
            .map(|k| last.points[k] + (last.points[k] - prev.points[k]) * w)
            .collect();
        let agree = (0..len)
            .map(|k| last.points[k].dist(prev.points[k]))
            .fold(0.0, f64::max);
        (pts, Some(agree))
    } else {
        (last.points[..len].to_vec(), None)
    };
    let times: Vec<f64> = (0..len)
        .map(|k| if k == steps { t_end } else { k as f64 * dt })
        .collect();
    let singular = points
        .iter()
        .map(|&x| near_singular(u, x, 1e-6))
        .collect::<Result<Vec<bool>>>()?;
    let converged = agreement.is_some_and(|a| a <= opts.moll_tol) && family.uniform_error() <= opts.uniform_tol;
    // No velocity is recorded along the way; use the one-sided
    // second-order difference rather than the first slope.
    let v0 = (len >= 3 && times[2] - times[1] == times[1] - times[0])
        .then(|| (points[1] * 4.0 - points[0] * 3.0 - points[2]) / (2.0 * times[1]));

    let mut arc = SingularArc::assemble(
        ArcKind::Mollified,
        times,
        points,
        Some(last.covectors[..len].to_vec()),
        None,
        None,
        singular,
        v0,
    )?;
    let d = &mut arc.diagnostics;
    d.reference_velocity = Some(start.reference_velocity);
    d.start_critical = Some(start.critical);
    d.start_critical_distance = Some(start.critical_distance);
    d.initial_velocity_error = Some((arc.initial_velocity - start.reference_velocity).norm());
    d.eps_schedule = schedule.clone();
    d.moll_agreement = agreement;
    d.converged = Some(converged);
    d.gradient_bound = Some(family.c1);
    d.hessian_bound = Some(family.c2);
    if !converged {
        d.notes.push(format!(
            "softmin schedule did not converge: agreement {agreement:?}, ε log K = {:.3e}",
            family.uniform_error()
        ));
    }
    if runs.iter().any(|r| r.left_region) {
        arc.truncate(
            TruncationReason::LeftRegion,
            "a mollified characteristic left the working region",
        );
    }
    Ok(arc)
}

/// The classical characteristic of a single softmin u_ε, without
/// extrapolation in ε.
pub fn propagate_softmin(
    h: &Hamiltonian,
    u: &SolutionRep,
    x0: Vec2,
    t_end: f64,
    dt: f64,
    eps: f64,
) -> Result<SingularArc> {
    let steps = check_step(t_end, dt)?;
    let branches = u
        .branches()
        .ok_or_else(|| Error::InvalidInput("mollification needs a min-of-smooth solution".into()))?;
    let s = Softmin::new(branches, eps)?;
    let run = integrate(h, &s, u.region(), x0, t_end, dt, steps);
    let len = run.points.len();
    let times: Vec<f64> = (0..len)
        .map(|k| if k == steps { t_end } else { k as f64 * dt })
        .collect();
    let singular = run
        .points
        .iter()
        .map(|&x| near_singular(u, x, 1e-6))
        .collect::<Result<Vec<bool>>>()?;
    let mut arc = SingularArc::assemble(
        ArcKind::Mollified,
        times,
        run.points,
        Some(run.covectors),
        None,
        None,
        singular,
        None,
    )?;
    arc.diagnostics.eps_schedule = vec![eps];
    if run.left_region {
        arc.truncate(
            TruncationReason::LeftRegion,
            "the characteristic left the working region",
        );
    }
    Ok(arc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Affine, ExprField};
    use crate::hamiltonian::PhasePoint;

    fn eikonal() -> Hamiltonian {
        Hamiltonian::quadratic_form(Mat2::IDENTITY, Vec2::ZERO, Affine::new(-0.5, Vec2::ZERO).into_field()).unwrap()
    }

    fn corner() -> SolutionRep {
        SolutionRep::min_of_smooth(
            vec![
                Affine::new(0.0, Vec2::new(1.0, 0.0)).into_field(),
                Affine::new(0.0, Vec2::new(0.0, 1.0)).into_field(),
            ],
            Rect::around(Vec2::new(1.0, 1.0), 3.0),
            None,
        )
        .unwrap()
    }

    #[test]
    fn softmin_derivatives_match_differences() {
        let u = SolutionRep::min_of_smooth(
            vec![
                ExprField::parse("x1*x2").unwrap().into_field(),
                ExprField::parse("0.5*(x1^2 - x2^2)").unwrap().into_field(),
            ],
            Rect::around(Vec2::ZERO, 3.0),
            None,
        )
        .unwrap();
        let s = Softmin::new(u.branches().unwrap(), 0.1).unwrap();
        let x = Vec2::new(2.3, 0.9);
        let h = 1e-5;
        let e1 = Vec2::new(h, 0.0);
        let e2 = Vec2::new(0.0, h);
        let g = s.gradient(x);
        assert!((g.x1 - (s.value(x + e1) - s.value(x - e1)) / (2.0 * h)).abs() < 1e-7);
        assert!((g.x2 - (s.value(x + e2) - s.value(x - e2)) / (2.0 * h)).abs() < 1e-7);
        let hs = s.hessian(x);
        let d1 = (s.gradient(x + e1) - s.gradient(x - e1)) / (2.0 * h);
        assert!((hs.m[0][0] - d1.x1).abs() < 1e-5 && (hs.m[1][0] - d1.x2).abs() < 1e-5);
        let lo = u.value(x).unwrap() - 0.1 * 2f64.ln();
        assert!(s.value(x) <= u.value(x).unwrap() + 1e-15 && s.value(x) >= lo - 1e-15);
    }

    #[test]
    fn corner_limit_is_the_diagonal() {
        let arc = propagate_strict_mollified(
            &eikonal(),
            &corner(),
            Vec2::new(1.0, 1.0),
            1.0,
            1e-3,
            &MollifiedOptions::default(),
        )
        .unwrap();
        assert_eq!(arc.diagnostics.converged, Some(true));
        for (t, x) in arc.times.iter().zip(&arc.points) {
            assert!(x.dist(Vec2::new(1.0 + t / 2.0, 1.0 + t / 2.0)) < 1e-4);
        }
        assert!(arc.diagnostics.gradient_bound.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn large_temperature_is_not_converged() {
        let opts = MollifiedOptions {
            eps_schedule: vec![0.5],
            ..Default::default()
        };
        let arc = propagate_strict_mollified(&eikonal(), &corner(), Vec2::new(1.0, 1.0), 1.0, 1e-2, &opts).unwrap();
        assert_eq!(arc.diagnostics.converged, Some(false));
        let opts = MollifiedOptions {
            eps_schedule: vec![0.6, 0.5],
            ..Default::default()
        };
        let arc = propagate_strict_mollified(&eikonal(), &corner(), Vec2::new(1.0, 1.0), 1.0, 1e-2, &opts).unwrap();
        assert_eq!(arc.diagnostics.converged, Some(false));
    }

    #[test]
    fn single_branch_is_a_classical_characteristic() {
        let u = SolutionRep::min_of_smooth(
            vec![ExprField::parse("0.6*x1 + 0.8*x2").unwrap().into_field()],
            Rect::around(Vec2::ZERO, 3.0),
            None,
        )
        .unwrap();
        let h = eikonal();
        let x0 = Vec2::new(0.1, -0.2);
        let arc = propagate_strict_mollified(&h, &u, x0, 1.0, 1e-2, &MollifiedOptions::default()).unwrap();
        let flow = h.flow(PhasePoint::new(x0, Vec2::new(0.6, 0.8)), 1.0, 1e-2).unwrap();
        for (a, b) in arc.points.iter().zip(&flow) {
            assert!(a.dist(b.x) < 1e-12);
        }
        assert!(arc.singular.iter().all(|s| !s));
    }
}
