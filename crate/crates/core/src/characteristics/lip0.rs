use serde::{Deserialize, Serialize};

use super::arc::{ArcKind, SingularArc};
use crate::error::{Error, Result};
use crate::geometry::{Membership, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Computed and reported but not asserted.
    Informative,
    NotEvaluated,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub status: CheckStatus,
    /// Nonnegative when the condition holds; None when not quantitative.
    pub margin: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lip0Options {
    /// Tolerance for condition (C).
    pub init_tol: f64,
    /// Samples used by the least-squares fit and by the (D) window.
    pub window: usize,
    /// (D) passes when ω at the end of the window is below this fraction
    /// of |ẋ⁺(0)|.
    pub omega_fraction: f64,
}

impl Default for Lip0Options {
    fn default() -> Self {
        Lip0Options {
            init_tol: 1e-6,
            window: 8,
            omega_fraction: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lip0Report {
    /// Pinned quadratic least-squares fit of ẋ⁺(0) on the first samples.
    pub v0_fit: Vec2,
    /// The ẋ⁺(0) the arc was built with (exact right slope for
    /// propagated arcs).
    pub v0: Vec2,
    pub lip: f64,
    pub omega: Vec<f64>,
    pub conditions: Vec<ConditionCheck>,
}

impl Lip0Report {
    /// All conditions pass, except that informative ones are not asserted.
    pub fn passed(&self) -> bool {
        self.conditions
            .iter()
            .all(|c| matches!(c.status, CheckStatus::Pass | CheckStatus::Informative))
    }

    pub fn condition(&self, letter: char) -> &ConditionCheck {
        let i = (letter as u8 - b'A') as usize;
        &self.conditions[i]
    }
}

/// Fit x(t) − x0 ≈ v t + c t² by least squares.
fn fit_initial_velocity(times: &[f64], points: &[Vec2]) -> Vec2 {
    let x0 = points[0];
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    let (mut b1, mut b2) = (Vec2::ZERO, Vec2::ZERO);
    for (&t, &x) in times.iter().zip(points).skip(1) {
        let d = x - x0;
        s2 += t * t;
        s3 += t * t * t;
        s4 += t * t * t * t;
        b1 += d * t;
        b2 += d * (t * t);
    }
    let det = s2 * s4 - s3 * s3;
    if det.abs() <= 1e-14 * s2 * s4 || times.len() < 3 {
        return if s2 > 0.0 { b1 / s2 } else { Vec2::ZERO };
    }
    (b1 * s4 - b2 * s3) / det
}

/// Check conditions (A)–(D) on a sampled arc:
/// (A) Lipschitz in the plane, (B) noncritical start, (C) ẋ⁺(0) equals
/// H_p(x0, p_min), (D) ω(t) → 0 as t → 0⁺. (D) is only reported for
/// intrinsic arcs.
pub fn validate_lip0(arc: &SingularArc, opts: &Lip0Options) -> Result<Lip0Report> {
    let n = arc.len();
    if n < 8 {
        return Err(Error::InvalidInput(format!(
            "Lip₀ validation needs at least 8 samples, got {n}"
        )));
    }
    let m = opts.window.clamp(3, n);
    let v0_fit = fit_initial_velocity(&arc.times[..m], &arc.points[..m]);
    let v0 = arc.initial_velocity;
    let finite = arc.points.iter().all(|x| x.is_finite()) && arc.lip.is_finite();

    let a = ConditionCheck {
        name: "A: Lipschitz arc in the plane".into(),
        status: if finite { CheckStatus::Pass } else { CheckStatus::Fail },
        margin: None,
        detail: format!("Lip = {:.6e}", arc.lip),
    };

    let d = &arc.diagnostics;
    let b = match (d.start_critical, d.start_critical_distance) {
        (Some(Membership::Outside), Some(dist)) => ConditionCheck {
            name: "B: noncritical start".into(),
            status: CheckStatus::Pass,
            margin: Some(dist),
            detail: format!("dist(0, co H_p(x0, D⁺u(x0))) = {dist:.6e}"),
        },
        (Some(_), dist) => ConditionCheck {
            name: "B: noncritical start".into(),
            status: CheckStatus::Fail,
            margin: dist.map(|d| -d),
            detail: "0 ∈ co H_p(x0, D⁺u(x0))".into(),
        },
        _ => ConditionCheck {
            name: "B: noncritical start".into(),
            status: CheckStatus::NotEvaluated,
            margin: None,
            detail: "arc carries no start diagnostics".into(),
        },
    };

    let c = match d.reference_velocity {
        Some(r) => {
            let err = (v0 - r).norm();
            ConditionCheck {
                name: "C: initial velocity H_p(x0, p_min)".into(),
                status: if err <= opts.init_tol {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                },
                margin: Some(opts.init_tol - err),
                detail: format!("ẋ⁺(0) = {v0}, H_p(x0, p_min) = {r}, fit = {v0_fit}"),
            }
        }
        None => ConditionCheck {
            name: "C: initial velocity H_p(x0, p_min)".into(),
            status: CheckStatus::NotEvaluated,
            margin: None,
            detail: "arc carries no reference velocity".into(),
        },
    };

    let k = (m - 1).min(n - 1);
    let bound = opts.omega_fraction * v0.norm() + 1e-12;
    let w = arc.omega[k];
    let d_status = if arc.kind == ArcKind::Intrinsic {
        CheckStatus::Informative
    } else if w <= bound {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    let dcheck = ConditionCheck {
        name: "D: omega vanishes at 0+".into(),
        status: d_status,
        margin: Some(bound - w),
        detail: format!("ω({:.3e}) = {w:.3e}", arc.times[k]),
    };

    Ok(Lip0Report {
        v0_fit,
        v0,
        lip: arc.lip,
        omega: arc.omega.clone(),
        conditions: vec![a, b, c, dcheck],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(speed_after_half: Vec2) -> SingularArc {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let points = times
            .iter()
            .map(|&t| {
                if t <= 0.5 {
                    Vec2::new(t, 0.0)
                } else {
                    Vec2::new(0.5, 0.0) + speed_after_half * (t - 0.5)
                }
            })
            .collect();
        SingularArc::from_samples(times, points).unwrap()
    }

    #[test]
    fn constant_velocity_passes() {
        let mut arc = line(Vec2::new(1.0, 0.0));
        arc.diagnostics.reference_velocity = Some(Vec2::new(1.0, 0.0));
        arc.diagnostics.start_critical = Some(Membership::Outside);
        arc.diagnostics.start_critical_distance = Some(1.0);
        let r = validate_lip0(&arc, &Default::default()).unwrap();
        assert!(r.passed());
        assert!(r.omega.iter().all(|&w| w < 1e-12));
        assert!(r.v0_fit.dist(Vec2::new(1.0, 0.0)) < 1e-12);
    }

    #[test]
    fn late_jump_keeps_condition_d() {
        let arc = line(Vec2::new(0.0, 1.0));
        let r = validate_lip0(&arc, &Default::default()).unwrap();
        assert!(r.omega[50] < 1e-12 && r.omega[51] > 1.0);
        assert_eq!(r.condition('D').status, CheckStatus::Pass);
        assert_eq!(r.condition('B').status, CheckStatus::NotEvaluated);
    }

    #[test]
    fn early_kink_fails_condition_d() {
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.01).collect();
        let points = times
            .iter()
            .map(|&t| {
                if t <= 0.01 {
                    Vec2::new(t, 0.0)
                } else {
                    Vec2::new(0.01, t - 0.01)
                }
            })
            .collect();
        let arc = SingularArc::from_samples(times, points).unwrap();
        let r = validate_lip0(&arc, &Default::default()).unwrap();
        assert_eq!(r.condition('D').status, CheckStatus::Fail);
    }

    #[test]
    fn needs_eight_samples() {
        let arc = SingularArc::from_samples(vec![0.0, 0.1, 0.2], vec![Vec2::ZERO; 3]).unwrap();
        assert!(validate_lip0(&arc, &Default::default()).is_err());
    }
}
