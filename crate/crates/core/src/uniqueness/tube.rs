//! Diagnostics for the mollified construction of strict characteristics:
//! the gap μ separating a wrong velocity candidate from the energy
//! selection, and the tube K_δ that mollified arcs must avoid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{status, VerifierEntry, Witness};
use crate::characteristics::{propagate_softmin, MollifiedFamily, SingularArc};
use crate::error::{Error, Result};
use crate::geometry::{ConvexSet2D, SetKind, Vec2};
use crate::hamiltonian::Hamiltonian;
use crate::optimize::golden_min;
use crate::solution::SolutionRep;

/// Samples per edge (and per side of each fan triangle) for μ.
const GAP_SAMPLES: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityGap {
    pub x_bar: Vec2,
    pub v_bar: Vec2,
    pub p_bar: Vec2,
    /// min over p ∈ D⁺u(x̄) of α(p) + β(x̄, p).
    pub mu: f64,
    pub argmin: Vec2,
    pub alpha: f64,
    pub beta: f64,
    /// Whether p̄ lies in the face of D⁺u(x̄) exposed by v̄.
    pub p_bar_in_face: bool,
}

/// α(p) = ⟨p, v̄⟩ − min_{q ∈ D⁺u(x̄)} ⟨q, v̄⟩ and
/// β(x̄, p) = ⟨p − p̄, H_p(x̄, p) − H_p(x̄, p̄)⟩, minimized over D⁺u(x̄).
pub fn velocity_gap(h: &Hamiltonian, u: &SolutionRep, x_bar: Vec2, v_bar: Vec2, p_bar: Vec2) -> Result<VelocityGap> {
    let set = u.superdiff(x_bar)?.set;
    gap_on(h, &set, x_bar, v_bar, p_bar)
}

fn gap_on(h: &Hamiltonian, set: &ConvexSet2D, x: Vec2, v: Vec2, p_bar: Vec2) -> Result<VelocityGap> {
    if !v.is_finite() || !p_bar.is_finite() {
        return Err(Error::InvalidInput("v̄ and p̄ must be finite".into()));
    }
    let support = set.support_min(v);
    let hp_bar = h.grad_p(x, p_bar);
    let alpha = |p: Vec2| p.dot(v) - support;
    let beta = |p: Vec2| (p - p_bar).dot(h.grad_p(x, p) - hp_bar);
    let f = |p: Vec2| alpha(p) + beta(p);

    let e = set.extreme_points();
    let mut cands: Vec<Vec2> = match set.kind() {
        SetKind::Point => vec![e[0]],
        SetKind::Segment => set.boundary_samples(GAP_SAMPLES),
        SetKind::Polygon => {
            // Fan triangulation from the first vertex, sampled barycentrically.
            let mut pts = set.boundary_samples(GAP_SAMPLES);
            let n = 60;
            for k in 1..e.len() - 1 {
                let (a, b, c) = (e[0], e[k], e[k + 1]);
                for i in 0..=n {
                    for j in 0..=n - i {
                        let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
                        pts.push(a + (b - a) * s + (c - a) * t);
                    }
                }
            }
            pts
        }
    };
    // The dense minimizer on each edge is refined by golden search.
    let coarse = cands.iter().copied().min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    for (a, b) in set.edges() {
        let (s, _) = golden_min(|s| f(a.lerp(b, s)), 0.0, 1.0, 1e-12);
        cands.push(a.lerp(b, s));
    }
    cands.push(coarse);
    let argmin = cands.into_iter().min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    Ok(VelocityGap {
        x_bar: x,
        v_bar: v,
        p_bar,
        mu: f(argmin),
        argmin,
        alpha: alpha(argmin),
        beta: beta(argmin),
        p_bar_in_face: set.exposed_face(v).distance(p_bar) <= 1e-9,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub times: Vec<f64>,
    /// μ with v̄ the recorded velocity and p̄ the recorded covector; None
    /// where D⁺u is not a segment or the selection is an endpoint.
    pub mu: Vec<Option<f64>>,
    pub max_mu: f64,
    pub samples_used: usize,
}

/// μ along an arc that records covectors. For a correct energy selection
/// the gap vanishes at every sample with a segment superdifferential and
/// an interior selection.
pub fn gap_profile(h: &Hamiltonian, u: &SolutionRep, arc: &SingularArc) -> Result<GapProfile> {
    let cov = arc
        .covectors
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("gap profile needs recorded covectors".into()))?;
    let mu = (0..arc.len())
        .into_par_iter()
        .map(|k| {
            let x = arc.points[k];
            let sd = u.superdiff(x)?;
            if sd.set.kind() != SetKind::Segment || !sd.set.in_relative_interior(cov[k], 1e-9) {
                return Ok(None);
            }
            Ok(Some(gap_on(h, &sd.set, x, arc.velocities[k], cov[k])?.mu))
        })
        .collect::<Result<Vec<Option<f64>>>>()?;
    Ok(GapProfile {
        times: arc.times.clone(),
        max_mu: mu.iter().flatten().copied().fold(0.0, f64::max),
        samples_used: mu.iter().flatten().count(),
        mu,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeOptions {
    pub eps_schedule: Vec<f64>,
    pub dt: f64,
    /// Arc samples before t_min_fraction·T are not tested.
    pub t_min_fraction: f64,
}

impl Default for TubeOptions {
    fn default() -> Self {
        TubeOptions {
            eps_schedule: vec![1e-2, 1e-3, 1e-4],
            dt: 1e-3,
            t_min_fraction: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeRun {
    pub eps: f64,
    /// min over tested t and s ∈ [0, T] of |x_ε(t) − γ(s)| − δs.
    pub margin: f64,
    pub witness_t: f64,
    pub witness_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeReport {
    pub gap: VelocityGap,
    pub c1: f64,
    pub delta: f64,
    pub t_min: f64,
    pub runs: Vec<TubeRun>,
    pub margin: f64,
    pub pass: bool,
}

impl TubeReport {
    pub fn entry(&self) -> VerifierEntry {
        let mut e = VerifierEntry::new("tube exclusion", status(self.pass), Some(self.margin))
            .param("mu", self.gap.mu)
            .param("C1", self.c1)
            .param("p_bar_norm", self.gap.p_bar.norm())
            .param("delta", self.delta)
            .param("t_min", self.t_min);
        for r in &self.runs {
            e = e.witness(Witness::new(
                format!("eps={}", r.eps),
                Some(r.witness_s),
                Some(r.witness_t),
                r.margin,
            ));
        }
        e
    }
}

/// Run the softmin characteristics from x̄ and check that none of them
/// enters K_δ = ∪_s B(x̄ + s v̄, δs) after t_min, with
/// δ = μ/(12(C1 + |p̄|)) built from the measured gap and gradient bound.
pub fn check_tube_exclusion(
    h: &Hamiltonian,
    u: &SolutionRep,
    x_bar: Vec2,
    v_bar: Vec2,
    p_bar: Vec2,
    t_end: f64,
    opts: &TubeOptions,
) -> Result<TubeReport> {
    let gap = velocity_gap(h, u, x_bar, v_bar, p_bar)?;
    if gap.p_bar_in_face || !(gap.mu > 0.0) {
        return Err(Error::hypothesis(
            "p̄ ∉ F_v̄(x̄)",
            format!("μ = {:.3e}; the tube test needs a positive gap", gap.mu),
        ));
    }
    let family = MollifiedFamily::new(u, &opts.eps_schedule)?;
    let delta = gap.mu / (12.0 * (family.c1 + p_bar.norm()));
    let t_min = opts.t_min_fraction * t_end;
    let gamma = |s: f64| x_bar + v_bar * s;
    let runs = opts
        .eps_schedule
        .par_iter()
        .map(|&eps| {
            let arc = propagate_softmin(h, u, x_bar, t_end, opts.dt, eps)?;
            let mut run = TubeRun {
                eps,
                margin: f64::INFINITY,
                witness_t: 0.0,
                witness_s: 0.0,
            };
            for (&t, &x) in arc.times.iter().zip(&arc.points) {
                if t < t_min {
                    continue;
                }
                // |x − γ(s)| − δs is convex in s.
                let (s, m) = golden_min(|s| x.dist(gamma(s)) - delta * s, 0.0, t_end, 1e-12);
                if m < run.margin {
                    run = TubeRun {
                        eps,
                        margin: m,
                        witness_t: t,
                        witness_s: s,
                    };
                }
            }
            Ok(run)
        })
        .collect::<Result<Vec<TubeRun>>>()?;
    let margin = runs.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(TubeReport {
        c1: family.c1,
        delta,
        t_min,
        pass: margin > 0.0,
        margin,
        runs,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::propagate_strict;
    use crate::field::Affine;
    use crate::geometry::{Mat2, Rect};

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
    fn corner_gap_closed_form() {
        // On p = (1−s, s): α + β = 1 − s + 2s², least at s = 1/4.
        let x = Vec2::new(1.0, 1.0);
        let g = velocity_gap(&eikonal(), &corner(), x, Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert!((g.mu - 0.875).abs() < 1e-12);
        assert!(g.argmin.dist(Vec2::new(0.75, 0.25)) < 1e-6);
        assert!(!g.p_bar_in_face);
        let ok = velocity_gap(&eikonal(), &corner(), x, Vec2::new(0.5, 0.5), Vec2::new(0.5, 0.5)).unwrap();
        assert!(ok.mu.abs() < 1e-12);
    }

    #[test]
    fn strict_arc_has_no_gap() {
        let arc = propagate_strict(
            &eikonal(),
            &corner(),
            Vec2::new(1.0, 1.0),
            0.5,
            1e-2,
            &Default::default(),
        )
        .unwrap();
        let prof = gap_profile(&eikonal(), &corner(), &arc).unwrap();
        assert_eq!(prof.samples_used, arc.len());
        assert!(prof.max_mu < 1e-12);
    }

    #[test]
    fn mollified_arcs_leave_the_wrong_tube() {
        let r = check_tube_exclusion(
            &eikonal(),
            &corner(),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 0.0),
            1.0,
            &Default::default(),
        )
        .unwrap();
        assert!((r.c1 - 1.0).abs() < 1e-9);
        assert!((r.delta - 0.875 / 24.0).abs() < 1e-9);
        assert!(r.pass && r.margin > 0.0);
    }

    #[test]
    fn right_direction_is_not_a_tube_test() {
        let err = check_tube_exclusion(
            &eikonal(),
            &corner(),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.5, 0.5),
            Vec2::new(0.5, 0.5),
            1.0,
            &Default::default(),
        );
        assert!(err.is_err());
    }
}
