//! Scenario files: TOML with a schema version, validated strictly.

use std::path::Path;

use hj_singular::field::{ExprField, Field, MatrixField};
use hj_singular::{Hamiltonian, Mat2, Rect, SolutionRep, Vec2};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub summary: String,
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub hamiltonian: HamiltonianSpec,
    pub solution: SolutionSpec,
    pub region: RegionSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub verify: VerifySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// H = ½⟨A(x)p, p⟩ + V(x), A given by entry expressions.
    #[serde(rename = "mechanical")]
    Mechanical { a: [String; 3], potential: String },
    /// H = ½⟨Ap, p⟩ + ⟨b, p⟩ + V(x).
    #[serde(rename = "quadratic_form")]
    QuadraticForm {
        a: [[f64; 2]; 2],
        #[serde(default)]
        b: [f64; 2],
        potential: String,
    },
    #[serde(rename = "custom-expression")]
    Custom { expr: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum SolutionSpec {
    /// u = min of the branch expressions.
    #[serde(rename = "min_of_smooth")]
    MinOfSmooth {
        branches: Vec<String>,
        semiconcavity: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub x0: [f64; 2],
    pub horizon: f64,
    pub dt: f64,
    /// Step sizes for the convergence check, coarse to fine.
    #[serde(default = "default_dt_list")]
    pub dt_list: Vec<f64>,
    #[serde(default = "default_eps")]
    pub eps_schedule: Vec<f64>,
    /// Times for the intrinsic arc; empty skips it.
    #[serde(default)]
    pub intrinsic_times: Vec<f64>,
    #[serde(default = "default_t0")]
    pub t0: f64,
    pub lambda0: Option<f64>,
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Truncation reason the generalized arc is expected to end with.
    pub expect_truncation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "yes")]
    pub lip0: bool,
    #[serde(default = "yes")]
    pub injectivity: bool,
    #[serde(default = "default_rhos")]
    pub cone_rhos: Vec<f64>,
    #[serde(default = "yes")]
    pub calibrated: bool,
    #[serde(default = "default_delta")]
    pub calibrated_delta: f64,
    #[serde(default = "yes")]
    pub reparam: bool,
    #[serde(default = "yes")]
    pub strict_uniqueness: bool,
    #[serde(default = "yes")]
    pub energy: bool,
    #[serde(default = "yes")]
    pub perp: bool,
    #[serde(default = "yes")]
    pub velocity_gap: bool,
    /// Fixed-point check |T_t u − u| at this many points per time.
    #[serde(default)]
    pub fixed_point_times: Vec<f64>,
    #[serde(default = "default_fixed_points")]
    pub fixed_point_samples: usize,
    pub tube: Option<TubeSpec>,
}

impl Default for VerifySpec {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeSpec {
    pub v_bar: [f64; 2],
    pub p_bar: [f64; 2],
}

fn yes() -> bool {
    true
}
fn default_dt_list() -> Vec<f64> {
    vec![4e-3, 2e-3, 1e-3]
}
fn default_eps() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_t0() -> f64 {
    0.1
}
fn default_mode() -> String {
    "local".into()
}
fn default_rhos() -> Vec<f64> {
    vec![0.6, 0.9]
}
fn default_delta() -> f64 {
    0.05
}
fn default_fixed_points() -> usize {
    50
}

fn v2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

fn expr(src: &str, what: &str) -> Result<Field, CliError> {
    ExprField::parse(src)
        .map(ExprField::into_field)
        .map_err(|e| CliError::Config(format!("{what}: {e}")))
}

impl Scenario {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        sc.validate().map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(format!("name `{}` must be nonempty [A-Za-z0-9_-]", self.name));
        }
        let r = &self.run;
        if !(r.horizon > 0.0) || !(r.dt > 0.0) || r.dt > r.horizon {
            return Err("run: need 0 < dt ≤ horizon".into());
        }
        if r.dt_list.len() < 2 || r.dt_list.iter().any(|d| !(*d > 0.0)) {
            return Err("run.dt_list: need at least two positive steps".into());
        }
        if r.intrinsic_times.iter().any(|t| !(*t > 0.0 && *t <= r.t0)) {
            return Err(format!("run.intrinsic_times must lie in (0, t0 = {}]", r.t0));
        }
        if !matches!(r.mode.as_str(), "local" | "full-horizon") {
            return Err(format!("run.mode `{}` is not local|full-horizon", r.mode));
        }
        if !(self.region.radius > 0.0) {
            return Err("region.radius must be positive".into());
        }
        if self.verify.cone_rhos.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err("verify.cone_rhos must lie in (0, 1)".into());
        }
        Ok(())
    }

    pub fn region(&self) -> Rect {
        Rect::around(v2(self.region.center), self.region.radius)
    }

    pub fn x0(&self) -> Vec2 {
        v2(self.run.x0)
    }

    pub fn build_hamiltonian(&self) -> Result<Hamiltonian, CliError> {
        let region = self.region();
        let h = match &self.hamiltonian {
            HamiltonianSpec::Mechanical { a, potential } => {
                let m = MatrixField::from_entries(expr(&a[0], "a11")?, expr(&a[1], "a12")?, expr(&a[2], "a22")?);
                Hamiltonian::mechanical(m, expr(potential, "potential")?, region)
            }
            HamiltonianSpec::QuadraticForm { a, b, potential } => Hamiltonian::quadratic_form(
                Mat2::new(a[0][0], a[0][1], a[1][0], a[1][1]),
                v2(*b),
                expr(potential, "potential")?,
            ),
            HamiltonianSpec::Custom { expr } => Hamiltonian::from_expression(expr, region),
        };
        h.map_err(|e| CliError::Config(format!("hamiltonian: {e}")))
    }

    pub fn build_solution(&self) -> Result<SolutionRep, CliError> {
        match &self.solution {
            SolutionSpec::MinOfSmooth {
                branches,
                semiconcavity,
            } => {
                let fields = branches
                    .iter()
                    .enumerate()
                    .map(|(i, b)| expr(b, &format!("branch {i}")))
                    .collect::<Result<Vec<_>, _>>()?;
                SolutionRep::min_of_smooth(fields, self.region(), *semiconcavity)
                    .map_err(|e| CliError::Config(format!("solution: {e}")))
            }
        }
    }

    pub fn is_mechanical(&self) -> bool {
        matches!(self.hamiltonian, HamiltonianSpec::Mechanical { .. })
    }
}
