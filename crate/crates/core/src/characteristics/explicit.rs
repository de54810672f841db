use serde::{Deserialize, Serialize};

use super::arc::{ArcKind, SingularArc, TruncationReason};
use super::{check_step, require_noncritical_singular, velocity_hull};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{hull_contains_origin, Vec2};
use crate::hamiltonian::Hamiltonian;
use crate::solution::{energy_argmin_on, SolutionRep, Superdiff2D};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Largest branch-value gap tolerated after a snap is 10·snap_tol.
    pub snap_tol: f64,
    /// Consecutive clamped λ roots before a generalized arc is cut.
    pub lambda_persistence: usize,
    /// Tolerance on |ẋ⁺(0) − H_p(x0, p_min)|.
    pub init_tol: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            snap_tol: 1e-10,
            lambda_persistence: 10,
            init_tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Rule {
    Strict,
    Generalized,
}

/// Strict singular characteristic: explicit steps along H_p(x, p_min(x))
/// with p_min the energy minimizer over D⁺u(x), each followed by a snap
/// back onto the set where the two leading branches tie.
pub fn propagate_strict(
    h: &Hamiltonian,
    u: &SolutionRep,
    x0: Vec2,
    t_end: f64,
    dt: f64,
    opts: &PropagationOptions,
) -> Result<SingularArc> {
    propagate(h, u, x0, t_end, dt, opts, Rule::Strict)
}

/// Generalized characteristic selecting λ from
/// ⟨p² − p¹, λH_p(x, p¹) + (1 − λ)H_p(x, p²)⟩ = 0.
pub fn propagate_generalized(
    h: &Hamiltonian,
    u: &SolutionRep,
    x0: Vec2,
    t_end: f64,
    dt: f64,
    opts: &PropagationOptions,
) -> Result<SingularArc> {
    propagate(h, u, x0, t_end, dt, opts, Rule::Generalized)
}

struct Step {
    p: Vec2,
    v: Vec2,
    lambda: Option<f64>,
    clamped: bool,
    endpoint: bool,
}

fn select(h: &Hamiltonian, x: Vec2, sd: &Superdiff2D, rule: Rule) -> Result<Step> {
    match rule {
        Rule::Strict => {
            let sel = energy_argmin_on(h, x, &sd.set)?;
            Ok(Step {
                p: sel.p_min,
                v: h.grad_p(x, sel.p_min),
                lambda: None,
                clamped: false,
                endpoint: sd.is_singular() && !sel.interior,
            })
        }
        Rule::Generalized => {
            let (p1, p2) = sd
                .segment()
                .ok_or_else(|| Error::Internal(format!("D⁺u({x}) is not a segment")))?;
            let (a, b) = (h.grad_p(x, p1), h.grad_p(x, p2));
            let d = p2 - p1;
            // ⟨d, b − a⟩ ≥ ν|d|² > 0 by strict convexity.
            let raw = d.dot(b) / d.dot(b - a);
            let lambda = raw.clamp(0.0, 1.0);
            Ok(Step {
                p: p1 * lambda + p2 * (1.0 - lambda),
                v: a * lambda + b * (1.0 - lambda),
                lambda: Some(lambda),
                clamped: lambda != raw,
                endpoint: false,
            })
        }
    }
}

/// The two branches whose gradients span the segment D⁺u(x).
fn leading_pair(branches: &[Field], x: Vec2, sd: &Superdiff2D) -> Option<(usize, usize)> {
    let a = *sd.active.first()?;
    let ga = branches[a].gradient(x);
    let b = sd
        .active
        .iter()
        .copied()
        .find(|&i| branches[i].gradient(x).dist(ga) > 1e-12 * (1.0 + ga.norm()))?;
    Some((a, b))
}

/// Newton iterations on u_a − u_b = 0 along ∇(u_a − u_b).
fn snap(branches: &[Field], (a, b): (usize, usize), mut x: Vec2) -> Vec2 {
    for _ in 0..4 {
        let g = branches[a].value(x) - branches[b].value(x);
        let scale = 1.0 + branches[a].value(x).abs();
        if g.abs() <= 4.0 * f64::EPSILON * scale {
            break;
        }
        let n = branches[a].gradient(x) - branches[b].gradient(x);
        let nn = n.norm_sq();
        if nn == 0.0 {
            break;
        }
        x -= n * (g / nn);
    }
    x
}

/// A branch outside the active set that could become minimal within one
/// step of length `len` (the gap closes at most at rate |Du_c − Du_i|).
fn junction_ahead(branches: &[Field], x: Vec2, sd: &Superdiff2D, len: f64) -> Option<usize> {
    let vals: Vec<f64> = branches.iter().map(|f| f.value(x)).collect();
    let m = sd.active.iter().map(|&i| vals[i]).fold(f64::INFINITY, f64::min);
    (0..branches.len()).filter(|c| !sd.active.contains(c)).find(|&c| {
        let gc = branches[c].gradient(x);
        let rate = sd
            .active
            .iter()
            .map(|&i| (gc - branches[i].gradient(x)).norm())
            .fold(0.0, f64::max);
        vals[c] - m <= len * rate
    })
}

#[allow(clippy::too_many_arguments)]
fn propagate(
    h: &Hamiltonian,
    u: &SolutionRep,
    x0: Vec2,
    t_end: f64,
    dt: f64,
    opts: &PropagationOptions,
    rule: Rule,
) -> Result<SingularArc> {
    let steps = check_step(t_end, dt)?;
    let start = require_noncritical_singular(h, u, x0)?;
    if rule == Rule::Generalized && start.sd.sing_class != 1 {
        return Err(Error::hypothesis(
            "D⁺u(x0) is a segment",
            format!("D⁺u({x0}) has dimension {}", start.sd.sing_class),
        ));
    }
    let branches = u.branches();

    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut covectors = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let mut lambdas = Vec::with_capacity(steps + 1);
    let mut singular = Vec::with_capacity(steps + 1);

    let mut cut: Option<(TruncationReason, String)> = None;
    let (mut max_snap, mut max_gap) = (0.0f64, 0.0f64);
    let (mut endpoint_selections, mut clamps, mut run, mut longest_run) = (0, 0, 0, 0);
    let mut lambda_flagged = false;
    let mut x = x0;
    let mut t = 0.0;
    let mut sd = start.sd.clone();
    for k in 0..=steps {
        if k > 0 {
            sd = match u.superdiff(x) {
                Ok(sd) => sd,
                Err(Error::OutsideRegion(_)) => {
                    cut = Some((
                        TruncationReason::LeftRegion,
                        format!("{x} is outside the working region"),
                    ));
                    break;
                }
                Err(e) => return Err(e),
            };
            if sd.sing_class >= 2 {
                cut = Some((TruncationReason::Junction, format!("D⁺u({x}) is two-dimensional")));
                break;
            }
            if !sd.is_singular() {
                cut = Some((TruncationReason::LeftSingularSet, format!("u is differentiable at {x}")));
                break;
            }
            if hull_contains_origin(&velocity_hull(h, x, &sd.set)?).possibly_inside() {
                cut = Some((TruncationReason::Critical, format!("0 ∈ co H_p at {x}")));
                break;
            }
        }
        let step = select(h, x, &sd, rule)?;
        if step.endpoint {
            endpoint_selections += 1;
        }
        if step.clamped {
            clamps += 1;
            run += 1;
            longest_run = longest_run.max(run);
        } else {
            run = 0;
        }
        times.push(t);
        points.push(x);
        covectors.push(step.p);
        velocities.push(step.v);
        lambdas.push(step.lambda.unwrap_or(f64::NAN));
        singular.push(sd.is_singular());
        if run > opts.lambda_persistence {
            lambda_flagged = true;
            cut = Some((
                TruncationReason::LambdaExterior,
                format!("λ root outside [0, 1] for {run} consecutive steps"),
            ));
            break;
        }
        if k == steps {
            break;
        }
        let len = (t_end - t).min(dt);
        let mut next = x + step.v * len;
        if let Some(b) = branches {
            if let Some(c) = junction_ahead(b, x, &sd, len * step.v.norm()) {
                cut = Some((
                    TruncationReason::Junction,
                    format!("branch {c} becomes active within one step of {x}"),
                ));
                break;
            }
            if let Some(pair) = leading_pair(b, x, &sd) {
                let snapped = snap(b, pair, next);
                max_snap = max_snap.max(snapped.dist(next));
                next = snapped;
                let (ua, ub) = (b[pair.0].value(next), b[pair.1].value(next));
                let gap = (ua - ub).abs();
                max_gap = max_gap.max(gap);
                if gap > 10.0 * opts.snap_tol * (1.0 + ua.abs()) {
                    cut = Some((
                        TruncationReason::LeftSingularSet,
                        format!("snap failed near {next}: branch gap {gap:.3e}"),
                    ));
                    break;
                }
            }
        }
        x = next;
        t = if k + 1 == steps { t_end } else { (k + 1) as f64 * dt };
    }

    let kind = match rule {
        Rule::Strict => ArcKind::Strict,
        Rule::Generalized => ArcKind::Generalized,
    };
    let v0 = velocities[0];
    let mut arc = SingularArc::assemble(
        kind,
        times,
        points,
        Some(covectors),
        Some(velocities),
        (rule == Rule::Generalized).then_some(lambdas),
        singular,
        Some(v0),
    )?;
    let d = &mut arc.diagnostics;
    d.reference_velocity = Some(start.reference_velocity);
    d.start_critical = Some(start.critical);
    d.start_critical_distance = Some(start.critical_distance);
    let err = (v0 - start.reference_velocity).norm();
    d.initial_velocity_error = Some(err);
    if err > opts.init_tol {
        d.notes.push(format!(
            "initial velocity {v0} differs from H_p(x0, p_min) = {} by {err:.3e}",
            start.reference_velocity
        ));
    }
    d.max_snap_displacement = max_snap;
    d.max_branch_gap = max_gap;
    d.endpoint_selections = endpoint_selections;
    if endpoint_selections > 0 {
        d.notes.push(format!(
            "p_min at a segment endpoint at {endpoint_selections} samples (experimental regime)"
        ));
    }
    d.lambda_clamps = clamps;
    d.longest_clamp_run = longest_run;
    d.lambda_flagged = lambda_flagged;
    if let Some((reason, detail)) = cut {
        arc.truncate(reason, detail);
    }
    Ok(arc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::field::{Affine, ExprField, MatrixField};
    use crate::geometry::{Mat2, Rect};

    fn eikonal() -> Hamiltonian {
        Hamiltonian::quadratic_form(Mat2::IDENTITY, Vec2::ZERO, Affine::new(-0.5, Vec2::ZERO).into_field()).unwrap()
    }

    fn linear(g: Vec2) -> Field {
        Affine::new(0.0, g).into_field()
    }

    fn corner() -> SolutionRep {
        SolutionRep::min_of_smooth(
            vec![linear(Vec2::new(1.0, 0.0)), linear(Vec2::new(0.0, 1.0))],
            Rect::around(Vec2::new(1.0, 1.0), 3.0),
            None,
        )
        .unwrap()
    }

    #[test]
    fn corner_strict_is_the_diagonal() {
        let arc = propagate_strict(
            &eikonal(),
            &corner(),
            Vec2::new(1.0, 1.0),
            1.0,
            1e-3,
            &Default::default(),
        )
        .unwrap();
        assert!(arc.truncation.is_none());
        assert_eq!(arc.len(), 1001);
        for (t, x) in arc.times.iter().zip(&arc.points) {
            assert!(x.dist(Vec2::new(1.0 + t / 2.0, 1.0 + t / 2.0)) < 1e-12);
        }
        let h = eikonal();
        for (x, p) in arc.points.iter().zip(arc.covectors.as_ref().unwrap()) {
            assert!(p.dist(Vec2::new(0.5, 0.5)) < 1e-15);
            assert!((h.eval(*x, *p) + 0.25).abs() < 1e-15);
        }
        assert!(arc.singular.iter().all(|&s| s));
        assert_eq!(arc.diagnostics.initial_velocity_error, Some(0.0));
    }

    #[test]
    fn smooth_start_is_rejected() {
        let e = propagate_strict(
            &eikonal(),
            &corner(),
            Vec2::new(2.0, 1.0),
            1.0,
            1e-2,
            &Default::default(),
        );
        assert!(
            matches!(e, Err(Error::Hypothesis { ref hypothesis, .. }) if hypothesis == crate::error::SINGULAR_START)
        );
        let e = propagate_generalized(
            &eikonal(),
            &corner(),
            Vec2::new(2.0, 1.0),
            1.0,
            1e-2,
            &Default::default(),
        );
        assert!(e.is_err());
    }

    #[test]
    fn critical_start_is_rejected() {
        let u = SolutionRep::min_of_smooth(
            vec![linear(Vec2::new(1.0, 0.0)), linear(Vec2::new(-1.0, 0.0))],
            Rect::around(Vec2::ZERO, 2.0),
            None,
        )
        .unwrap();
        let e = propagate_strict(&eikonal(), &u, Vec2::new(0.0, 0.5), 1.0, 1e-2, &Default::default());
        assert!(matches!(e, Err(Error::Hypothesis { ref hypothesis, .. }) if hypothesis == crate::error::NONCRITICAL));
    }

    #[test]
    fn generalized_lambda_is_one_half_on_the_corner() {
        let arc = propagate_generalized(
            &eikonal(),
            &corner(),
            Vec2::new(1.0, 1.0),
            1.0,
            1e-2,
            &Default::default(),
        )
        .unwrap();
        assert!(arc.lambdas.as_ref().unwrap().iter().all(|&l| (l - 0.5).abs() < 1e-15));
        assert!(arc.points.last().unwrap().dist(Vec2::new(1.5, 1.5)) < 1e-12);
    }

    #[test]
    fn anisotropic_corner_lambda_from_linear_solve() {
        let h = Hamiltonian::quadratic_form(
            Mat2::diag(2.0, 1.0),
            Vec2::ZERO,
            Affine::new(-0.5, Vec2::ZERO).into_field(),
        )
        .unwrap();
        let s = 0.5f64.sqrt();
        let u = SolutionRep::min_of_smooth(
            vec![linear(Vec2::new(s, 0.0)), linear(Vec2::new(0.0, 1.0))],
            Rect::around(Vec2::new(1.0, 1.0), 3.0),
            None,
        )
        .unwrap();
        let x0 = Vec2::new(2f64.sqrt(), 1.0);
        let arc = propagate_generalized(&h, &u, x0, 1.0, 1e-3, &Default::default()).unwrap();
        // a = (√2, 0), b = (0, 1), d = (−1/√2, 1): λ = 1/(1 + 1) = ½.
        assert!((arc.lambdas.as_ref().unwrap()[0] - 0.5).abs() < 1e-14);
        let v = Vec2::new(s, 0.5);
        assert!(arc.velocities[0].dist(v) < 1e-14);
        // The singular line x1/√2 = x2 carries the arc.
        assert!(arc.points.iter().all(|x| (x.x1 * s - x.x2).abs() < 1e-12));
        assert!(arc.points.last().unwrap().dist(x0 + v) < 1e-12);
    }

    #[test]
    fn triple_junction_truncates() {
        let c = 3f64.sqrt() / 2.0;
        let u = SolutionRep::min_of_smooth(
            vec![
                linear(Vec2::new(1.0, 0.0)),
                linear(Vec2::new(-0.5, c)),
                linear(Vec2::new(-0.5, -c)),
            ],
            Rect::around(Vec2::ZERO, 2.0),
            None,
        )
        .unwrap();
        let x0 = Vec2::new(-0.25, -0.5 * c);
        for arc in [
            propagate_generalized(&eikonal(), &u, x0, 2.0, 1e-3, &Default::default()).unwrap(),
            propagate_strict(&eikonal(), &u, x0, 2.0, 1e-3, &Default::default()).unwrap(),
        ] {
            let cut = arc.truncation.as_ref().unwrap();
            assert_eq!(cut.reason.to_string(), "junction");
            assert!(cut.time < 1.0 && cut.time > 0.99);
            assert!(arc.points.last().unwrap().norm() < 2e-3);
        }
    }

    #[test]
    fn mechanical_valley_follows_the_ray() {
        let h = Hamiltonian::mechanical(
            MatrixField::constant(Mat2::IDENTITY).unwrap(),
            ExprField::parse("-0.5*(x1^2 + x2^2)").unwrap().into_field(),
            Rect::around(Vec2::new(2.0, 1.0), 4.0),
        )
        .unwrap();
        let u = SolutionRep::min_of_smooth(
            vec![
                ExprField::parse("x1*x2").unwrap().into_field(),
                ExprField::parse("0.5*(x1^2 - x2^2)").unwrap().into_field(),
            ],
            Rect::around(Vec2::new(2.0, 1.0), 4.0),
            None,
        )
        .unwrap();
        let x0 = Vec2::new(1.0 + 2f64.sqrt(), 1.0);
        let dt = 1e-3;
        let arc = propagate_strict(&h, &u, x0, 0.5, dt, &Default::default()).unwrap();
        assert!(arc.truncation.is_none());
        // ẋ = x/√2 on the ray; explicit Euler error is O(dt).
        let end = x0 * (0.5 / 2f64.sqrt()).exp();
        assert!(arc.points.last().unwrap().dist(end) < 2e-3);
        assert!(arc.diagnostics.max_snap_displacement < 1e-12);
        let gen = propagate_generalized(&h, &u, x0, 0.5, dt, &Default::default()).unwrap();
        assert!(gen.points.last().unwrap().dist(*arc.points.last().unwrap()) < 1e-12);
    }
}
