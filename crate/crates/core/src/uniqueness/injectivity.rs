use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{status, VerifierEntry, Witness};
use crate::characteristics::SingularArc;
use crate::error::{Error, Result};

/// Smallest |ẋ⁺(0)| treated as nonzero.
pub const MIN_SPEED: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    /// Largest sampled horizon on which ω < |ẋ⁺(0)|, so that
    /// |x(t₁) − x(t₀)| ≥ |t₁ − t₀|(|ẋ⁺(0)| − ω) > 0.
    pub t0: f64,
    pub speed: f64,
    /// min over pairs of |t₁−t₀|ω(t₁∨t₀) − ||x(t₁)−x(t₀)| − |t₁−t₀||ẋ⁺(0)||.
    pub worst_margin: f64,
    pub witness: (f64, f64),
    pub pass: bool,
}

impl InjectivityReport {
    pub fn entry(&self) -> VerifierEntry {
        VerifierEntry::new("injectivity", status(self.pass), Some(self.worst_margin))
            .param("T0", self.t0)
            .param("speed", self.speed)
            .witness(Witness::new(
                "worst pair",
                Some(self.witness.0),
                Some(self.witness.1),
                self.worst_margin,
            ))
    }
}

/// Check the two-sided estimate
/// ||x(t₁) − x(t₀)| − |t₁ − t₀||ẋ⁺(0)|| ≤ |t₁ − t₀| ω(t₁ ∨ t₀)
/// on all sample pairs and report the certified injectivity horizon.
pub fn check_injectivity(arc: &SingularArc) -> Result<InjectivityReport> {
    let speed = arc.initial_velocity.norm();
    if !(speed > MIN_SPEED) {
        return Err(Error::hypothesis("ẋ⁺(0) ≠ 0", format!("|ẋ⁺(0)| = {speed:.3e}")));
    }
    let n = arc.len();
    let (t, x, w) = (&arc.times, &arc.points, &arc.omega);
    let (worst_margin, i, j) = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut best = (f64::INFINITY, 0, j);
            for i in 0..j {
                let dt = t[j] - t[i];
                let dev = (x[j].dist(x[i]) - dt * speed).abs();
                // Rounding in the positions is a few ulps of their size.
                let slack = 1e-12 * (1.0 + x[j].norm());
                let m = dt * w[j] - dev + slack;
                if m < best.0 {
                    best = (m, i, j);
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, 0, 0),
            |a, b| if (b.0, b.1, b.2) < (a.0, a.1, a.2) { b } else { a },
        );
    let k = w.partition_point(|&om| om < speed);
    let t0 = t[k.max(1) - 1];
    Ok(InjectivityReport {
        t0,
        speed,
        worst_margin: if n > 1 { worst_margin } else { 0.0 },
        witness: (t[i], t[j]),
        pass: worst_margin >= 0.0 && t0 > 0.0,
    })
}
