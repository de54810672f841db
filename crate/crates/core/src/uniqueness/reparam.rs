use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{status, VerifierEntry, Witness};
use crate::characteristics::{ArcKind, SingularArc};
use crate::error::{Error, Result};
use crate::geometry::segment_projection;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReparamOptions {
    /// Match tolerance; None means 1e-4 times the diameter of arc1.
    pub match_tol: Option<f64>,
    /// Difference quotients of φ use pairs this many samples apart.
    pub lip_spacing: usize,
    /// Competing projections closer than this many arc2 sample spacings to
    /// the best one belong to the same minimum.
    pub cluster_samples: usize,
}

impl Default for ReparamOptions {
    fn default() -> Self {
        ReparamOptions {
            match_tol: None,
            lip_spacing: 4,
            cluster_samples: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReparamResult {
    /// Samples s of arc1 and the matched parameters φ(s) of arc2.
    pub s: Vec<f64>,
    pub phi: Vec<f64>,
    pub residuals: Vec<f64>,
    pub match_tol: f64,
    /// Largest matched prefix: residual below `match_tol`, φ strictly
    /// increasing, unique projection.
    pub sigma: f64,
    /// Samples in the certified prefix.
    pub prefix_len: usize,
    /// max residual over the certified prefix and over all samples.
    pub residual: f64,
    pub residual_all: f64,
    pub lip_phi: f64,
    pub lip_phi_inv: f64,
    /// Smallest difference quotient of φ on the prefix.
    pub min_slope: f64,
    /// min_slope − 1/3.
    pub slope_margin: f64,
    /// ω₁(s), ω₂(φ(s)) ≤ |ẋ⁺(0)|/2 on the whole prefix.
    pub omega_small: bool,
    /// Worst slack in |φ(s₁) − φ(s₀)| ≥ |x₁(s₁) − x₁(s₀)|/(|ẋ₂⁺(0)| + ω₂).
    pub bilip_margin: f64,
    pub identity_deviation: f64,
    pub monotone: bool,
    /// Samples whose nearest point on arc2 had a competitor far away in t.
    pub ambiguous: Vec<(f64, f64)>,
    pub failure: Option<String>,
    pub intrinsic: bool,
    pub pass: bool,
}

impl ReparamResult {
    /// φ at an arbitrary s in the prefix by linear interpolation.
    pub fn phi_at(&self, s: f64) -> f64 {
        let n = self.prefix_len.max(1);
        let ss = &self.s[..n];
        if s <= ss[0] {
            return self.phi[0];
        }
        if s >= ss[n - 1] {
            return self.phi[n - 1];
        }
        let k = ss.partition_point(|&v| v <= s) - 1;
        let w = (s - ss[k]) / (ss[k + 1] - ss[k]);
        self.phi[k] + w * (self.phi[k + 1] - self.phi[k])
    }

    pub fn entry(&self, name: &str) -> VerifierEntry {
        let margin = (self.match_tol - self.residual).min(self.bilip_margin);
        let mut e = VerifierEntry::new(name, status(self.pass), Some(margin))
            .param("sigma", self.sigma)
            .param("residual", self.residual)
            .param("match_tol", self.match_tol)
            .param("lip_phi", self.lip_phi)
            .param("lip_phi_inv", self.lip_phi_inv)
            .param("min_slope", self.min_slope)
            .param("slope_margin", self.slope_margin)
            .param("omega_small", self.omega_small)
            .param("bilip_margin", self.bilip_margin)
            .param("identity_deviation", self.identity_deviation);
        if let Some(f) = &self.failure {
            e = e.param("failure", f.clone());
        }
        for &(s, t) in self.ambiguous.iter().take(4) {
            e = e.witness(Witness::new("far competing match", Some(s), Some(t), 0.0));
        }
        if self.intrinsic {
            e = e.informative();
        }
        e
    }
}

/// Max |ψ(φ(s)) − s| over the prefix of `ab`, with ψ from `ba`.
pub fn inverse_composition_residual(ab: &ReparamResult, ba: &ReparamResult) -> f64 {
    let top = ba.s[ba.prefix_len.max(1) - 1];
    (0..ab.prefix_len)
        .filter(|&k| ab.phi[k] <= top)
        .map(|k| (ba.phi_at(ab.phi[k]) - ab.s[k]).abs())
        .fold(0.0, f64::max)
}

struct Projection {
    t: f64,
    dist: f64,
    competitor: Option<f64>,
}

/// Global scan of all segments of arc2 for the nearest point to y.
fn project(arc2: &SingularArc, y: crate::geometry::Vec2, tol: f64, cluster: f64) -> Projection {
    let mut cands: Vec<(f64, f64)> = Vec::with_capacity(arc2.len());
    for k in 0..arc2.len() - 1 {
        let (p, w) = segment_projection(arc2.points[k], arc2.points[k + 1], y);
        let t = arc2.times[k] + w * (arc2.times[k + 1] - arc2.times[k]);
        cands.push((p.dist(y), t));
    }
    if arc2.len() == 1 {
        cands.push((arc2.points[0].dist(y), 0.0));
    }
    let best = cands
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .unwrap();
    let competitor = cands
        .iter()
        .filter(|c| (c.1 - best.1).abs() > cluster && c.0 <= best.0 + tol)
        .map(|c| c.1)
        .next();
    Projection {
        t: best.1,
        dist: best.0,
        competitor,
    }
}

/// Find φ with x₁(s) = x₂(φ(s)) by projecting every sample of arc1 onto
/// arc2, then certify monotonicity, the bi-Lipschitz bounds and the
/// lower slope bound 1/3 on the matched prefix.
pub fn match_reparam(arc1: &SingularArc, arc2: &SingularArc, opts: &ReparamOptions) -> Result<ReparamResult> {
    if arc1.len() < 2 || arc2.len() < 2 {
        return Err(Error::InvalidInput(
            "reparameterization needs arcs with at least two samples".into(),
        ));
    }
    let diameter = arc1.points.iter().map(|p| p.dist(arc1.start())).fold(0.0, f64::max);
    let match_tol = opts.match_tol.unwrap_or(1e-4 * diameter.max(1e-12));
    let spacing2 = arc2.horizon() / (arc2.len() - 1) as f64;
    let cluster = opts.cluster_samples as f64 * spacing2;

    let projections: Vec<Projection> = arc1
        .points
        .par_iter()
        .map(|&y| project(arc2, y, match_tol, cluster))
        .collect();
    let s = arc1.times.clone();
    let phi: Vec<f64> = projections.iter().map(|p| p.t).collect();
    let residuals: Vec<f64> = projections.iter().map(|p| p.dist).collect();
    let ambiguous: Vec<(f64, f64)> = projections
        .iter()
        .zip(&s)
        .filter_map(|(p, &si)| p.competitor.map(|t| (si, t)))
        .collect();

    let speed1 = arc1.initial_velocity.norm();
    let speed2 = arc2.initial_velocity.norm();
    let mut failure = None;
    let mut prefix_len = 1;
    let mut monotone = true;
    let mut omega_small = true;
    for k in 1..s.len() {
        if residuals[k] >= match_tol {
            failure = Some(format!(
                "residual {:.3e} at s = {} exceeds match_tol",
                residuals[k], s[k]
            ));
            break;
        }
        if !(phi[k] > phi[k - 1]) {
            monotone = false;
            failure = Some(format!("φ not increasing at s = {}", s[k]));
            break;
        }
        if projections[k].competitor.is_some() {
            failure = Some(format!("nearest point not unique at s = {}", s[k]));
            break;
        }
        if arc1.omega[k] > 0.5 * speed1 || arc2.omega_at(phi[k]) > 0.5 * speed2 {
            omega_small = false;
        }
        prefix_len = k + 1;
    }

    let m = opts.lip_spacing.max(1);
    let (mut lip_phi, mut min_slope) = (0.0f64, f64::INFINITY);
    let mut bilip_margin = f64::INFINITY;
    let mut k = 0;
    while k + m < prefix_len {
        let (s0, s1) = (s[k], s[k + m]);
        let dphi = phi[k + m] - phi[k];
        let q = dphi / (s1 - s0);
        lip_phi = lip_phi.max(q.abs());
        min_slope = min_slope.min(q);
        // The projection error shifts φ by at most residual/speed.
        let slack = 2.0 * (residuals[k] + residuals[k + m]) / speed2.max(1e-300);
        let w2 = arc2.omega_at(phi[k].max(phi[k + m]));
        let rhs = arc1.points[k + m].dist(arc1.points[k]) / (speed2 + w2);
        bilip_margin = bilip_margin.min(dphi.abs() - rhs + slack + 1e-12 * (1.0 + phi[k + m]));
        k += 1;
    }
    if !min_slope.is_finite() {
        // Prefix shorter than the spacing: use the end points.
        let n = prefix_len - 1;
        if n > 0 {
            let q = (phi[n] - phi[0]) / (s[n] - s[0]);
            lip_phi = q.abs();
            min_slope = q;
        } else {
            min_slope = 0.0;
        }
        bilip_margin = 0.0;
    }
    let lip_phi_inv = if min_slope > 0.0 {
        1.0 / min_slope
    } else {
        f64::INFINITY
    };
    let identity_deviation = (0..prefix_len).map(|k| (phi[k] - s[k]).abs()).fold(0.0, f64::max);
    let residual = residuals[..prefix_len].iter().copied().fold(0.0, f64::max);
    let residual_all = residuals.iter().copied().fold(0.0, f64::max);
    let sigma = s[prefix_len - 1];
    let slope_margin = min_slope - 1.0 / 3.0;
    let pass = sigma > 0.0 && monotone && residual < match_tol && bilip_margin >= 0.0 && lip_phi_inv.is_finite();
    Ok(ReparamResult {
        s,
        phi,
        residuals,
        match_tol,
        sigma,
        prefix_len,
        residual,
        residual_all,
        lip_phi,
        lip_phi_inv,
        min_slope,
        slope_margin,
        omega_small,
        bilip_margin,
        identity_deviation,
        monotone,
        ambiguous,
        failure,
        intrinsic: arc1.kind == ArcKind::Intrinsic || arc2.kind == ArcKind::Intrinsic,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    fn line(speed: f64, n: usize, horizon: f64) -> SingularArc {
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * horizon / n as f64).collect();
        let points = times
            .iter()
            .map(|&t| Vec2::new(1.0 + speed * t, 1.0 + speed * t))
            .collect();
        SingularArc::from_samples(times, points).unwrap()
    }

    #[test]
    fn linear_reparameterization() {
        let a = line(0.5, 100, 1.0);
        let b = line(1.0, 100, 1.0);
        let r = match_reparam(&a, &b, &Default::default()).unwrap();
        assert!(r.pass, "{:?}", r.failure);
        assert_eq!(r.prefix_len, 101);
        assert!(r.residual < 1e-12);
        assert!((r.lip_phi - 0.5).abs() < 1e-9);
        assert!((r.lip_phi_inv - 2.0).abs() < 1e-9);
        for (s, p) in r.s.iter().zip(&r.phi) {
            assert!((p - s / 2.0).abs() < 1e-12);
        }
        let back = match_reparam(&b, &a, &Default::default()).unwrap();
        // arc a only reaches half of b, so the reverse prefix stops at t = 0.5.
        assert!((back.sigma - 0.5).abs() < 1e-12);
        assert!(inverse_composition_residual(&r, &back) < 1e-12);
    }

    #[test]
    fn identical_arcs_give_identity() {
        let a = line(0.5, 100, 1.0);
        let r = match_reparam(&a, &a, &Default::default()).unwrap();
        assert!(r.pass);
        assert!(r.identity_deviation < 1e-12);
        assert!(r.slope_margin > 0.6);
        assert!(r.omega_small);
    }

    #[test]
    fn detour_is_reported() {
        let a = line(0.5, 100, 1.0);
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let points = times
            .iter()
            .map(|&t| {
                Vec2::new(
                    1.0 + 0.5 * t,
                    1.0 + 0.5 * t + if t > 0.5 { 0.1 * (t - 0.5) } else { 0.0 },
                )
            })
            .collect();
        let b = SingularArc::from_samples(times, points).unwrap();
        let r = match_reparam(&a, &b, &Default::default()).unwrap();
        assert!(r.sigma >= 0.5 && r.sigma < 0.53);
        assert!(r.failure.unwrap().contains("residual"));
    }
}
