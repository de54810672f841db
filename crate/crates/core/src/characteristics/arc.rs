use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Membership, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    Strict,
    Generalized,
    Intrinsic,
    Mollified,
    /// Built directly from sample points.
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationReason {
    LeftSingularSet,
    Critical,
    Junction,
    LambdaExterior,
    LeftRegion,
}

impl fmt::Display for TruncationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruncationReason::LeftSingularSet => "left singular set",
            TruncationReason::Critical => "critical",
            TruncationReason::Junction => "junction",
            TruncationReason::LambdaExterior => "lambda exterior",
            TruncationReason::LeftRegion => "left working region",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub reason: TruncationReason,
    /// Time of the last retained sample.
    pub time: f64,
    pub detail: String,
}

/// Side information collected by the propagators. Fields that do not apply
/// to a given propagator stay at their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArcDiagnostics {
    /// H_p(x0, p_min), the velocity a singular characteristic must start with.
    pub reference_velocity: Option<Vec2>,
    /// Whether 0 ∈ co H_p(x0, D⁺u(x0)).
    pub start_critical: Option<Membership>,
    /// Distance from 0 to co H_p(x0, D⁺u(x0)).
    pub start_critical_distance: Option<f64>,
    /// |ẋ⁺(0) − H_p(x0, p_min)|.
    pub initial_velocity_error: Option<f64>,
    pub max_snap_displacement: f64,
    /// Largest |u_a − u_b| of the two leading branches after a snap.
    pub max_branch_gap: f64,
    /// Samples where p_min sat at an endpoint of a segment D⁺u.
    pub endpoint_selections: usize,
    pub lambda_clamps: usize,
    pub longest_clamp_run: usize,
    pub lambda_flagged: bool,
    /// Mollified arcs: agreement of the last two ε and the overall verdict.
    pub eps_schedule: Vec<f64>,
    pub moll_agreement: Option<f64>,
    pub converged: Option<bool>,
    pub gradient_bound: Option<f64>,
    pub hessian_bound: Option<f64>,
    /// Intrinsic arcs: samples whose maximizer was not unique.
    pub non_unique: Vec<usize>,
    pub notes: Vec<String>,
}

/// A sampled Lipschitz arc starting at t = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularArc {
    pub kind: ArcKind,
    pub times: Vec<f64>,
    pub points: Vec<Vec2>,
    /// p(t) per sample.
    pub covectors: Option<Vec<Vec2>>,
    /// Right velocities per sample.
    pub velocities: Vec<Vec2>,
    pub lambdas: Option<Vec<f64>>,
    pub singular: Vec<bool>,
    /// Running sup of |slope − ẋ⁺(0)| over the segments in [0, t].
    pub omega: Vec<f64>,
    /// The estimate of ẋ⁺(0) that `omega` is measured from.
    pub initial_velocity: Vec2,
    /// Largest segment slope.
    pub lip: f64,
    pub truncation: Option<Truncation>,
    pub diagnostics: ArcDiagnostics,
}

#[derive(Serialize)]
struct CsvRow {
    t: f64,
    x1: f64,
    x2: f64,
    p1: Option<f64>,
    p2: Option<f64>,
    v1: f64,
    v2: f64,
    lambda: Option<f64>,
    singular: bool,
    omega: f64,
}

impl SingularArc {
    /// Assemble an arc and fill in `omega` and `lip` from the samples.
    /// `initial_velocity` defaults to the first segment slope.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        kind: ArcKind,
        times: Vec<f64>,
        points: Vec<Vec2>,
        covectors: Option<Vec<Vec2>>,
        velocities: Option<Vec<Vec2>>,
        lambdas: Option<Vec<f64>>,
        singular: Vec<bool>,
        initial_velocity: Option<Vec2>,
    ) -> Result<Self> {
        let n = times.len();
        if n == 0 || points.len() != n || singular.len() != n {
            return Err(Error::InvalidInput("arc sample lists differ in length".into()));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("arc times must increase from 0".into()));
        }
        let slopes = slopes(&times, &points);
        let velocities = match velocities {
            Some(v) if v.len() == n => v,
            Some(_) => return Err(Error::InvalidInput("velocity list has the wrong length".into())),
            None => {
                let mut v = slopes.clone();
                v.push(*slopes.last().unwrap_or(&Vec2::ZERO));
                v
            }
        };
        for (name, len) in [
            ("covector", covectors.as_ref().map(Vec::len)),
            ("lambda", lambdas.as_ref().map(Vec::len)),
        ] {
            if len.is_some_and(|l| l != n) {
                return Err(Error::InvalidInput(format!("{name} list has the wrong length")));
            }
        }
        let v0 = initial_velocity.unwrap_or(slopes.first().copied().unwrap_or(Vec2::ZERO));
        let mut omega = Vec::with_capacity(n);
        omega.push(0.0);
        for s in &slopes {
            let last = *omega.last().unwrap();
            omega.push(f64::max(last, (*s - v0).norm()));
        }
        let lip = slopes.iter().map(|s| s.norm()).fold(0.0, f64::max);
        Ok(SingularArc {
            kind,
            times,
            points,
            covectors,
            velocities,
            lambdas,
            singular,
            omega,
            initial_velocity: v0,
            lip,
            truncation: None,
            diagnostics: ArcDiagnostics::default(),
        })
    }

    /// An arc from bare samples, with velocities taken as right slopes.
    pub fn from_samples(times: Vec<f64>, points: Vec<Vec2>) -> Result<Self> {
        let n = times.len();
        Self::assemble(ArcKind::Sampled, times, points, None, None, None, vec![true; n], None)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> Vec2 {
        self.points[0]
    }

    /// Last sampled time.
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Slopes of the piecewise-linear interpolant, one per segment.
    pub fn segment_slopes(&self) -> Vec<Vec2> {
        slopes(&self.times, &self.points)
    }

    /// ω at an arbitrary time (the value at the first sample ≥ t).
    pub fn omega_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        self.omega[k.min(self.len() - 1)]
    }

    /// Position of the piecewise-linear interpolant; clamps outside the
    /// sampled interval.
    pub fn position_at(&self, t: f64) -> Vec2 {
        let n = self.len();
        if t <= self.times[0] {
            return self.points[0];
        }
        if t >= self.times[n - 1] {
            return self.points[n - 1];
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        self.points[k].lerp(self.points[k + 1], (t - t0) / (t1 - t0))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for k in 0..self.len() {
            let p = self.covectors.as_ref().map(|c| c[k]);
            out.serialize(CsvRow {
                t: self.times[k],
                x1: self.points[k].x1,
                x2: self.points[k].x2,
                p1: p.map(|p| p.x1),
                p2: p.map(|p| p.x2),
                v1: self.velocities[k].x1,
                v2: self.velocities[k].x2,
                lambda: self.lambdas.as_ref().map(|l| l[k]),
                singular: self.singular[k],
                omega: self.omega[k],
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub(crate) fn truncate(&mut self, reason: TruncationReason, detail: impl Into<String>) {
        self.truncation = Some(Truncation {
            reason,
            time: self.horizon(),
            detail: detail.into(),
        });
    }
}

fn slopes(times: &[f64], points: &[Vec2]) -> Vec<Vec2> {
    times
        .windows(2)
        .zip(points.windows(2))
        .map(|(t, x)| (x[1] - x[0]) / (t[1] - t[0]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinked() -> SingularArc {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let points = times
            .iter()
            .map(|&t| {
                if t <= 0.5 {
                    Vec2::new(t, 0.0)
                } else {
                    Vec2::new(0.5, t - 0.5)
                }
            })
            .collect();
        SingularArc::from_samples(times, points).unwrap()
    }

    #[test]
    fn omega_is_running_sup() {
        let a = kinked();
        assert_eq!(a.initial_velocity, Vec2::new(1.0, 0.0));
        assert!(a.omega[..=5].iter().all(|&w| w < 1e-12));
        assert!(a.omega[6..].iter().all(|&w| (w - 2f64.sqrt()).abs() < 1e-9));
        assert!(a.omega.windows(2).all(|w| w[1] >= w[0]));
        assert!((a.lip - 1.0).abs() < 1e-9);
        assert!(a.position_at(0.55).dist(Vec2::new(0.5, 0.05)) < 1e-12);
    }

    #[test]
    fn csv_has_declared_columns() {
        let mut buf = Vec::new();
        kinked().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "t,x1,x2,p1,p2,v1,v2,lambda,singular,omega");
        assert_eq!(text.lines().count(), 12);
    }

    #[test]
    fn rejects_bad_times() {
        assert!(SingularArc::from_samples(vec![0.0, 0.0], vec![Vec2::ZERO; 2]).is_err());
        assert!(SingularArc::from_samples(vec![0.1, 0.2], vec![Vec2::ZERO; 2]).is_err());
    }
}
