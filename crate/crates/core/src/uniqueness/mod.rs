//! Verifiers that compare singular arcs: injectivity, the cone lemmas,
//! reparameterization between strict and generalized arcs, convergence of
//! the strict propagator, and the mollification diagnostics.

mod cones;
mod injectivity;
mod reparam;
mod report;
mod strict;
mod tube;

pub use cones::{
    check_calibrated_cones, check_cone_lemma, CalibratedOptions, CalibratedReport, CalibratedSample, ConeReport,
};
pub use injectivity::{check_injectivity, InjectivityReport, MIN_SPEED};
pub use reparam::{inverse_composition_residual, match_reparam, ReparamOptions, ReparamResult};
pub use report::{CheckStatus, VerifierEntry, Witness};
pub use strict::{
    check_strict_uniqueness, PairDeviation, StrictUniquenessOptions, StrictUniquenessReport, UniquenessMode,
    NOISE_FLOOR,
};
pub use tube::{
    check_tube_exclusion, gap_profile, velocity_gap, GapProfile, TubeOptions, TubeReport, TubeRun, VelocityGap,
};
