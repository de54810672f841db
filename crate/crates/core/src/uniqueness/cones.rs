use serde::{Deserialize, Serialize};

use super::report::{status, VerifierEntry, Witness};
use crate::action::trajectory_action;
use crate::characteristics::SingularArc;
use crate::error::{Error, Result};
use crate::geometry::{ConeSign, ConeSpec, Vec2};
use crate::hamiltonian::Hamiltonian;
use crate::solution::{backward_calibrated, SolutionRep};

/// Tolerance on shared start point and initial velocity.
pub const SHARED_START_TOL: f64 = 1e-9;
pub const SHARED_VELOCITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub rho: f64,
    /// Largest sampled s with x0 ∈ C⁻_ρ(x₁(s'), θ₁(s')) for all s' ≤ s.
    pub s_rho: f64,
    /// Largest sampled t with σ_ρ(t') > 0 for all t' ≤ t.
    pub tau_rho: f64,
    /// (t, σ_ρ(t)) for the sampled t ≤ τ_ρ.
    pub sigma: Vec<(f64, f64)>,
    /// Worst normalized margins over the certified ranges.
    pub margin_a: f64,
    pub margin_b1: f64,
    pub margin_b2: f64,
    /// First failures beyond the certified ranges.
    pub witnesses: Vec<Witness>,
    pub pass: bool,
}

impl ConeReport {
    pub fn entry(&self) -> VerifierEntry {
        let margin = self.margin_a.min(self.margin_b1).min(self.margin_b2);
        let mut e = VerifierEntry::new(
            format!("cone lemma (rho = {})", self.rho),
            status(self.pass),
            Some(margin),
        )
        .param("rho", self.rho)
        .param("s_rho", self.s_rho)
        .param("tau_rho", self.tau_rho)
        .param("margin_a", self.margin_a)
        .param("margin_b1", self.margin_b1)
        .param("margin_b2", self.margin_b2);
        for w in &self.witnesses {
            e = e.witness(w.clone());
        }
        e
    }
}

fn direction(v: Vec2) -> Option<Vec2> {
    v.normalized()
}

/// Hypotheses checked: (i) common start, (ii) common ẋ⁺(0), (iii) velocities
/// nonzero along both arcs.
fn check_hypotheses(arc1: &SingularArc, arc2: &SingularArc) -> Result<()> {
    let mut failed = Vec::new();
    let scale = 1.0 + arc1.start().norm();
    if arc1.start().dist(arc2.start()) > SHARED_START_TOL * scale {
        failed.push(format!("(i) x₁(0) = {} ≠ x₂(0) = {}", arc1.start(), arc2.start()));
    }
    let (v1, v2) = (arc1.initial_velocity, arc2.initial_velocity);
    if v1.dist(v2) > SHARED_VELOCITY_TOL * (1.0 + v1.norm()) {
        failed.push(format!("(ii) ẋ₁⁺(0) = {v1} ≠ ẋ₂⁺(0) = {v2}"));
    }
    for (name, arc) in [("x₁", arc1), ("x₂", arc2)] {
        if arc.segment_slopes().iter().any(|s| s.norm() <= 1e-12) {
            failed.push(format!("(iii) {name} has a zero velocity segment"));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::hypothesis("cone lemma (i)-(iii)", failed.join("; ")))
    }
}

/// Empirical s_ρ, τ_ρ and σ_ρ(t) for the cone lemma, with θ₁ taken from the
/// recorded velocities of `arc1`.
pub fn check_cone_lemma(arc1: &SingularArc, arc2: &SingularArc, rho: f64) -> Result<ConeReport> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidInput(format!("ρ = {rho} not in (0, 1)")));
    }
    check_hypotheses(arc1, arc2)?;
    let x0 = arc1.start();
    let speed = arc1.initial_velocity.norm();
    let theta: Vec<Vec2> = arc1
        .velocities
        .iter()
        .zip(arc1.segment_slopes().iter().chain(std::iter::once(&Vec2::ZERO)))
        .map(|(v, s)| direction(*v).or_else(|| direction(*s)).unwrap_or(Vec2::new(1.0, 0.0)))
        .collect();
    let mut witnesses = Vec::new();

    // (a)
    let mut s_rho = 0.0;
    let mut margin_a = f64::INFINITY;
    for k in 1..arc1.len() {
        let cone = ConeSpec::new(arc1.points[k], theta[k], rho, ConeSign::Minus)?;
        let m = cone.margin(x0);
        if m < 0.0 {
            witnesses.push(Witness::new("(a) x0 leaves C⁻", Some(arc1.times[k]), None, m));
            break;
        }
        s_rho = arc1.times[k];
        margin_a = margin_a.min(m);
    }

    // (b)
    let b1_factor = (1.0 + rho) / (2.0 * rho);
    let mut sigma = Vec::new();
    let (mut margin_b1, mut margin_b2) = (f64::INFINITY, f64::INFINITY);
    let mut tau_rho = 0.0;
    for j in 1..arc2.len() {
        let t = arc2.times[j];
        let y = arc2.points[j];
        let bound = b1_factor * t * speed;
        let mut sig = None;
        let (mut mb1, mut mb2) = (f64::INFINITY, f64::INFINITY);
        for k in 0..arc1.len() {
            let m1 = (bound - y.dist(arc1.points[k])) / (t * speed);
            let m2 = ConeSpec::new(arc1.points[k], theta[k], rho, ConeSign::Plus)?.margin(y);
            if m1 < 0.0 || m2 < 0.0 {
                if sig.is_some_and(|s: f64| s > 0.0) && witnesses.len() < 8 && j == arc2.len() - 1 {
                    witnesses.push(Witness::new(
                        "(b) first failure at final t",
                        Some(arc1.times[k]),
                        Some(t),
                        m1.min(m2),
                    ));
                }
                break;
            }
            sig = Some(arc1.times[k]);
            mb1 = mb1.min(m1);
            mb2 = mb2.min(m2);
        }
        match sig {
            Some(s) if s > 0.0 => {
                sigma.push((t, s));
                tau_rho = t;
                margin_b1 = margin_b1.min(mb1);
                margin_b2 = margin_b2.min(mb2);
            }
            _ => {
                witnesses.push(Witness::new("(b) σ_ρ(t) = 0", None, Some(t), mb1.min(mb2)));
                break;
            }
        }
    }
    let fix = |m: f64| if m.is_finite() { m } else { 1.0 - rho };
    Ok(ConeReport {
        rho,
        s_rho,
        tau_rho,
        sigma,
        margin_a: fix(margin_a),
        margin_b1: fix(margin_b1),
        margin_b2: fix(margin_b2),
        pass: s_rho > 0.0 && tau_rho > 0.0,
        witnesses,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedOptions {
    /// δ the achieved value is compared against.
    pub delta_target: f64,
    /// Backward length r₁ of the calibrated curves.
    pub r1: f64,
    /// Only arc samples with s ≤ horizon are used.
    pub horizon: f64,
    /// Number of arc samples examined.
    pub samples: usize,
    /// Step of the backward flow.
    pub flow_dt: f64,
    /// Tolerance of the calibration identity u(ξ(0)) − u(ξ(−r)) = ∫L.
    pub calibration_tol: f64,
    /// Swap p¹ and p² (sensitivity check; must fail).
    pub swap: bool,
}

impl Default for CalibratedOptions {
    fn default() -> Self {
        CalibratedOptions {
            delta_target: 0.05,
            r1: 0.2,
            horizon: 0.5,
            samples: 11,
            flow_dt: 1e-3,
            calibration_tol: 1e-5,
            swap: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSample {
    pub s: f64,
    pub p1: Vec2,
    pub p2: Vec2,
    pub theta2: Vec2,
    /// min over r of |x(s) − ξⁱ(−r)|/r.
    pub delta_calib2: f64,
    /// min over r of the cone slack ±⟨ξⁱ(−r) − x(s), θ₂⟩/|ξⁱ(−r) − x(s)|.
    pub delta_calib3: f64,
    pub calibration_error: f64,
    pub calibration_suspect: bool,
    pub xi1: Vec<Vec2>,
    pub xi2: Vec<Vec2>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedReport {
    pub delta_target: f64,
    /// Largest δ for which both (calib2) and (calib3) hold on every sample.
    pub delta_achieved: f64,
    pub margin: f64,
    /// ρ = (1 + √(1 − δ²))/2 as used by the crossing argument.
    pub rho_for_crossing: f64,
    pub samples: Vec<CalibratedSample>,
    pub suspect_samples: usize,
    pub swapped: bool,
    pub pass: bool,
}

impl CalibratedReport {
    pub fn entry(&self) -> VerifierEntry {
        let name = if self.swapped {
            "calibrated cones (swapped gradients)"
        } else {
            "calibrated cones"
        };
        let mut e = VerifierEntry::new(name, status(self.pass), Some(self.margin))
            .param("delta_target", self.delta_target)
            .param("delta_achieved", self.delta_achieved)
            .param("rho_for_crossing", self.rho_for_crossing)
            .param("suspect_samples", self.suspect_samples as f64);
        if let Some(w) = self.samples.iter().min_by(|a, b| {
            a.delta_calib3
                .min(a.delta_calib2)
                .total_cmp(&b.delta_calib3.min(b.delta_calib2))
        }) {
            e = e.witness(Witness::new(
                "worst sample",
                Some(w.s),
                None,
                w.delta_calib3.min(w.delta_calib2),
            ));
        }
        e
    }
}

/// Build ξ¹_s, ξ²_s from the two reachable gradients at sampled points of
/// the arc and measure how well they sit in C⁺_δ and C⁻_δ around
/// θ₂ = (p² − p¹)/|p² − p¹|.
pub fn check_calibrated_cones(
    h: &Hamiltonian,
    u: &SolutionRep,
    arc: &SingularArc,
    opts: &CalibratedOptions,
) -> Result<CalibratedReport> {
    if !(opts.r1 > 0.0 && opts.flow_dt > 0.0 && opts.samples > 0) {
        return Err(Error::InvalidInput(
            "calibrated cone check needs r1, flow_dt, samples > 0".into(),
        ));
    }
    let eligible: Vec<usize> = (0..arc.len()).filter(|&k| arc.times[k] <= opts.horizon).collect();
    let stride = (eligible.len() / opts.samples).max(1);
    let mut samples = Vec::new();
    for &k in eligible.iter().step_by(stride) {
        let x = arc.points[k];
        let sd = u.superdiff(x)?;
        let Some((mut p1, mut p2)) = sd.segment() else {
            return Err(Error::hypothesis(
                "D⁺u is a segment along the arc",
                format!("D⁺u({x}) has dimension {}", sd.sing_class),
            ));
        };
        let theta2 = (p2 - p1)
            .normalized()
            .ok_or_else(|| Error::Internal("degenerate superdifferential segment".into()))?;
        // Swapping the gradients against a fixed θ₂ puts each ray in the
        // other's cone.
        if opts.swap {
            std::mem::swap(&mut p1, &mut p2);
        }
        let mut d2 = f64::INFINITY;
        let mut d3 = f64::INFINITY;
        let mut cal_err: f64 = 0.0;
        let mut xis = Vec::new();
        for (p, sign) in [(p1, 1.0), (p2, -1.0)] {
            let traj = backward_calibrated(h, u, x, p, opts.r1, opts.flow_dt)?;
            let n = traj.len() - 1;
            for (i, z) in traj.iter().enumerate().skip(1) {
                let r = opts.r1 * i as f64 / n as f64;
                let d = z.x - x;
                d2 = d2.min(d.norm() / r);
                d3 = d3.min(sign * d.dot(theta2) / d.norm());
            }
            // The action ∫L along ξ on [−r₁, 0] must equal u(x) − u(ξ(−r₁)).
            let end = traj[n].x;
            let action = trajectory_action(h, &traj, opts.r1);
            let increment = u.value_unchecked(x) - u.value_unchecked(end);
            cal_err = cal_err.max((action - increment).abs());
            xis.push(traj.iter().map(|z| z.x).collect::<Vec<_>>());
        }
        let xi2 = xis.pop().unwrap();
        let xi1 = xis.pop().unwrap();
        samples.push(CalibratedSample {
            s: arc.times[k],
            p1,
            p2,
            theta2,
            delta_calib2: d2,
            delta_calib3: d3,
            calibration_error: cal_err,
            calibration_suspect: cal_err > opts.calibration_tol,
            xi1,
            xi2,
        });
    }
    let delta_achieved = samples
        .iter()
        .map(|s| s.delta_calib2.min(s.delta_calib3))
        .fold(f64::INFINITY, f64::min);
    let margin = delta_achieved - opts.delta_target;
    let suspect_samples = samples.iter().filter(|s| s.calibration_suspect).count();
    let d = delta_achieved.clamp(0.0, 1.0);
    Ok(CalibratedReport {
        delta_target: opts.delta_target,
        delta_achieved,
        margin,
        rho_for_crossing: (1.0 + (1.0 - d * d).sqrt()) / 2.0,
        pass: margin >= 0.0 && suspect_samples == 0,
        suspect_samples,
        samples,
        swapped: opts.swap,
    })
}
