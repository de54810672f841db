//! Singular characteristics: strict, generalized (λ-rule) and intrinsic
//! arcs, the softmin-mollified construction, and the Lip₀ validator.

mod arc;
mod explicit;
mod intrinsic;
mod lip0;
mod mollified;

pub use arc::{ArcDiagnostics, ArcKind, SingularArc, Truncation, TruncationReason};
pub use explicit::{propagate_generalized, propagate_strict, PropagationOptions};
pub use intrinsic::{propagate_intrinsic, IntrinsicOptions};
pub use lip0::{validate_lip0, CheckStatus, ConditionCheck, Lip0Options, Lip0Report};
pub use mollified::{propagate_softmin, propagate_strict_mollified, MollifiedFamily, MollifiedOptions, Softmin};

use crate::error::{self, Error, Result};
use crate::geometry::{hull_contains_origin, ConvexSet2D, Membership, Vec2};
use crate::hamiltonian::Hamiltonian;
use crate::solution::{energy_argmin_on, SolutionRep, Superdiff2D, CRITICAL_EDGE_SAMPLES};

/// What the propagators learn about the start point.
#[derive(Clone, Debug)]
pub(crate) struct StartInfo {
    pub sd: Superdiff2D,
    pub reference_velocity: Vec2,
    pub critical: Membership,
    pub critical_distance: f64,
}

/// co H_p(x, D⁺u(x)) sampled along the boundary of D⁺u(x).
pub(crate) fn velocity_hull(h: &Hamiltonian, x: Vec2, set: &ConvexSet2D) -> Result<ConvexSet2D> {
    let image: Vec<Vec2> = set
        .boundary_samples(CRITICAL_EDGE_SAMPLES)
        .into_iter()
        .map(|p| h.grad_p(x, p))
        .collect();
    ConvexSet2D::hull(&image)
}

pub(crate) fn inspect_start(h: &Hamiltonian, u: &SolutionRep, x0: Vec2) -> Result<StartInfo> {
    let sd = u.superdiff(x0)?;
    let selection = energy_argmin_on(h, x0, &sd.set)?;
    let hull = velocity_hull(h, x0, &sd.set)?;
    Ok(StartInfo {
        reference_velocity: h.grad_p(x0, selection.p_min),
        critical: hull_contains_origin(&hull),
        critical_distance: hull.distance(Vec2::ZERO),
        sd,
    })
}

/// The hypotheses shared by the singular propagators: x0 ∈ Sing(u) and
/// 0 ∉ co H_p(x0, D⁺u(x0)).
pub(crate) fn require_noncritical_singular(h: &Hamiltonian, u: &SolutionRep, x0: Vec2) -> Result<StartInfo> {
    let info = inspect_start(h, u, x0)?;
    if !info.sd.is_singular() {
        return Err(Error::hypothesis(
            error::SINGULAR_START,
            format!("u is differentiable at {x0}"),
        ));
    }
    if info.critical.possibly_inside() {
        return Err(Error::hypothesis(
            error::NONCRITICAL,
            format!(
                "{x0} is a critical point: 0 is within {:.3e} of co H_p",
                info.critical_distance
            ),
        ));
    }
    Ok(info)
}

/// Whether x is singular, with ties between branch values accepted up to
/// `tol` (1e-7 relative is used for arcs that are only approximately on
/// Sing(u)). Lax–Oleinik representations fall back to their own superdiff.
pub(crate) fn near_singular(u: &SolutionRep, x: Vec2, tol: f64) -> Result<bool> {
    match u.branches() {
        Some(b) => {
            let vals: Vec<f64> = b.iter().map(|f| f.value(x)).collect();
            let m = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let band = tol * (1.0 + m.abs());
            let grads: Vec<Vec2> = (0..b.len())
                .filter(|&i| vals[i] <= m + band)
                .map(|i| b[i].gradient(x))
                .collect();
            Ok(grads.iter().any(|g| g.dist(grads[0]) > 1e-9))
        }
        None => u.is_singular(x),
    }
}

pub(crate) fn check_step(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {t_end}")));
    }
    if !(dt > 0.0) || dt > t_end {
        return Err(Error::InvalidInput(format!("step {dt} must lie in (0, T]")));
    }
    Ok((t_end / dt - 1e-9).ceil() as usize)
}

/// Check that x0 is a singular point at which 0 ∉ co H_p(x0, D⁺u(x0)),
/// the hypotheses under which the singular propagators are defined.
pub fn check_start_hypotheses(h: &Hamiltonian, u: &SolutionRep, x0: Vec2) -> Result<()> {
    require_noncritical_singular(h, u, x0).map(|_| ())
}
