use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arc::{ArcKind, SingularArc};
use super::{inspect_start, near_singular};
use crate::action::{default_lambda0, default_search_box, lax_oleinik_pos, LaxOleinikOptions, LaxOleinikPos};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::hamiltonian::Hamiltonian;
use crate::solution::SolutionRep;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicOptions {
    /// Search radius factor; None derives it from sup |H_p| on the region.
    pub lambda0: Option<f64>,
    /// Optimizer settings; `lo.t0` is the local horizon.
    pub lo: LaxOleinikOptions,
}

impl Default for IntrinsicOptions {
    fn default() -> Self {
        IntrinsicOptions {
            lambda0: None,
            lo: LaxOleinikOptions {
                t0: 0.25,
                grid: 48,
                ..Default::default()
            },
        }
    }
}

/// z(t) = argmax_y {u(y) − A_t(x0, y)} for every t in the grid, each
/// computed from x0 directly.
pub fn propagate_intrinsic(
    h: &Hamiltonian,
    u: &SolutionRep,
    x0: Vec2,
    t_grid: &[f64],
    opts: &IntrinsicOptions,
) -> Result<SingularArc> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("time grid must be nonempty and increasing".into()));
    }
    if !(t_grid[0] > 0.0) {
        return Err(Error::InvalidInput("time grid must lie in (0, t0]".into()));
    }
    let t_max = *t_grid.last().unwrap();
    if t_max > opts.lo.t0 {
        return Err(Error::HorizonExceeded {
            t: t_max,
            t0: opts.lo.t0,
        });
    }
    let start = inspect_start(h, u, x0)?;
    let p_radius = 2.0 * u.gradient_bound().max(1.0);
    let lambda0 = opts.lambda0.unwrap_or_else(|| default_lambda0(h, u.region(), p_radius));
    let u0 = |y: Vec2| u.value_unchecked(y);
    let maxima: Vec<LaxOleinikPos> = t_grid
        .par_iter()
        .map(|&t| lax_oleinik_pos(h, &u0, t, x0, default_search_box(x0, t, lambda0), &opts.lo))
        .collect::<Result<_>>()?;

    let mut times = vec![0.0];
    times.extend_from_slice(t_grid);
    let mut points = vec![x0];
    points.extend(maxima.iter().map(|m| m.argmax));
    let singular = points
        .iter()
        .map(|&x| near_singular(u, x, 1e-7))
        .collect::<Result<Vec<bool>>>()?;

    // Difference quotients (z(t) − x0)/t extrapolated linearly to t = 0.
    let q = |k: usize| (points[k] - x0) / times[k];
    let v0 = if points.len() >= 3 {
        let (t1, t2) = (times[1], times[2]);
        q(1) + (q(1) - q(2)) * (t1 / (t2 - t1))
    } else {
        q(1)
    };
    let mut arc = SingularArc::assemble(ArcKind::Intrinsic, times, points, None, None, None, singular, Some(v0))?;
    let d = &mut arc.diagnostics;
    d.reference_velocity = Some(start.reference_velocity);
    d.start_critical = Some(start.critical);
    d.start_critical_distance = Some(start.critical_distance);
    d.initial_velocity_error = Some((v0 - start.reference_velocity).norm());
    d.non_unique = maxima
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.unique)
        .map(|(k, _)| k + 1)
        .collect();
    if !d.non_unique.is_empty() {
        d.notes
            .push(format!("maximizer not unique at samples {:?}", d.non_unique));
    }
    if maxima.iter().any(|m| m.boundary_hit) {
        d.notes
            .push("a maximizer touched the search box; λ0 may be too small".into());
    }
    Ok(arc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Affine;
    use crate::geometry::{Mat2, Rect};

    #[test]
    fn corner_intrinsic_arc() {
        let h = Hamiltonian::quadratic_form(Mat2::IDENTITY, Vec2::ZERO, Affine::new(-0.5, Vec2::ZERO).into_field())
            .unwrap();
        let u = SolutionRep::min_of_smooth(
            vec![
                Affine::new(0.0, Vec2::new(1.0, 0.0)).into_field(),
                Affine::new(0.0, Vec2::new(0.0, 1.0)).into_field(),
            ],
            Rect::around(Vec2::new(1.0, 1.0), 3.0),
            None,
        )
        .unwrap();
        let x0 = Vec2::new(1.0, 1.0);
        let arc = propagate_intrinsic(&h, &u, x0, &[0.05, 0.1, 0.2], &IntrinsicOptions::default()).unwrap();
        assert_eq!(arc.points[0], x0);
        assert!(arc.points[3].dist(Vec2::new(1.1, 1.1)) < 1e-6);
        assert!(arc.initial_velocity.dist(Vec2::new(0.5, 0.5)) < 0.02);
        assert!(arc.singular.iter().all(|&s| s));
        assert!(arc.diagnostics.non_unique.is_empty());
        let e = propagate_intrinsic(&h, &u, x0, &[0.1, 0.3], &IntrinsicOptions::default());
        assert!(matches!(e, Err(Error::HorizonExceeded { .. })));
    }
}
