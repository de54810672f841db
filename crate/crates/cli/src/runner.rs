//! Executes a scenario: propagators, verifiers, output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hj_singular::action::{concavity_defect, default_lambda0, default_search_box, lax_oleinik_neg, LaxOleinikOptions};
use hj_singular::characteristics::{
    check_start_hypotheses, propagate_generalized, propagate_intrinsic, propagate_strict, propagate_strict_mollified,
    validate_lip0, ArcKind, IntrinsicOptions, Lip0Options, MollifiedOptions, PropagationOptions, SingularArc,
};
use hj_singular::optimize::golden_min;
use hj_singular::uniqueness::{
    check_calibrated_cones, check_cone_lemma, check_injectivity, check_strict_uniqueness, check_tube_exclusion,
    gap_profile, inverse_composition_residual, match_reparam, velocity_gap, CalibratedOptions, CheckStatus,
    StrictUniquenessOptions, TubeOptions, UniquenessMode, VerifierEntry, Witness,
};
use hj_singular::{Hamiltonian, Rect, SetKind, SolutionRep, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::scenario::Scenario;

/// Tolerance of the energy condition H(x, p) = min_{D⁺u(x)} H(x, ·).
pub const ENERGY_TOL: f64 = 1e-8;
/// Tolerance of ⟨ẋ, p² − p¹⟩ = 0 at interior generalized selections.
pub const PERP_TOL: f64 = 1e-6;
/// Tolerance on |φ(s) − s| for mechanical Hamiltonians.
pub const IDENTITY_TOL: f64 = 1e-5;
/// Tolerance on |T_t u − u|.
pub const FIXED_POINT_TOL: f64 = 1e-3;
/// Largest gap μ accepted along a correctly selected strict arc.
pub const GAP_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub assert: bool,
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSummary {
    pub kind: String,
    pub file: String,
    pub samples: usize,
    pub horizon: f64,
    pub initial_velocity: [f64; 2],
    pub truncation: Option<String>,
    pub truncation_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub schema_version: u32,
    pub seed: u64,
    pub dt: f64,
    pub toolkit_version: String,
    /// Not covered by the determinism contract.
    pub wall_time_s: f64,
    pub passed: bool,
    /// The scenario as run, with the effective seed and dt.
    pub config: Scenario,
    pub arcs: Vec<ArcSummary>,
    pub entries: Vec<VerifierEntry>,
}

impl RunReport {
    pub fn failures(&self) -> Vec<&VerifierEntry> {
        self.entries
            .iter()
            .filter(|e| matches!(e.status, CheckStatus::Fail | CheckStatus::Error))
            .collect()
    }

    pub fn entry(&self, name: &str) -> Option<&VerifierEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

fn kind_name(k: ArcKind) -> &'static str {
    match k {
        ArcKind::Strict => "strict",
        ArcKind::Generalized => "generalized",
        ArcKind::Intrinsic => "intrinsic",
        ArcKind::Mollified => "mollified",
        ArcKind::Sampled => "sampled",
    }
}

fn pass(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

/// Everything a run computes, before anything is written.
pub struct RunOutcome {
    pub report: RunReport,
    pub arcs: Vec<SingularArc>,
}

struct Ctx<'a> {
    sc: &'a Scenario,
    h: Hamiltonian,
    u: SolutionRep,
    x0: Vec2,
    dt: f64,
    seed: u64,
    started: Instant,
    entries: Vec<VerifierEntry>,
}

impl Ctx<'_> {
    fn push(&mut self, e: VerifierEntry) {
        self.entries.push(e);
    }

    /// Record a verifier that could not run.
    fn push_err(&mut self, name: &str, e: hj_singular::Error) {
        self.entries.push(VerifierEntry::error(name, e.to_string()));
    }
}

/// Run all propagators and verifiers of a scenario without writing files.
pub fn execute(sc: &Scenario, seed: Option<u64>, dt: Option<f64>) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let h = sc.build_hamiltonian()?;
    let u = sc.build_solution()?;
    let x0 = sc.x0();
    if !u.region().contains(x0) {
        return Err(CliError::Config(format!("run.x0 = {x0} lies outside the region")));
    }
    let dt = dt.unwrap_or(sc.run.dt);
    if !(dt > 0.0 && dt <= sc.run.horizon) {
        return Err(CliError::Usage(format!("--dt {dt} must lie in (0, horizon]")));
    }
    let mut cx = Ctx {
        sc,
        h,
        u,
        x0,
        dt,
        seed: seed.unwrap_or(sc.seed),
        started,
        entries: Vec::new(),
    };
    let mut arcs = Vec::new();

    match check_start_hypotheses(&cx.h, &cx.u, x0) {
        Ok(()) => cx.push(VerifierEntry::new("precondition", CheckStatus::Pass, None)),
        Err(e) => {
            let hypothesis = match &e {
                hj_singular::Error::Hypothesis { hypothesis, .. } => hypothesis.clone(),
                _ => String::new(),
            };
            cx.push(
                VerifierEntry::new("precondition", CheckStatus::Fail, None)
                    .param("hypothesis", hypothesis)
                    .param("error", e.to_string()),
            );
            return Ok(finish(cx, arcs));
        }
    }

    let t_end = sc.run.horizon;
    let prop = PropagationOptions::default();
    let moll_opts = MollifiedOptions {
        eps_schedule: sc.run.eps_schedule.clone(),
        ..Default::default()
    };
    let (strict, generalized) = rayon::join(
        || propagate_strict(&cx.h, &cx.u, x0, t_end, dt, &prop),
        || propagate_generalized(&cx.h, &cx.u, x0, t_end, dt, &prop),
    );
    // The softmin limit stands in for the strict arc, so it stops where that arc stops.
    let moll_end = match &strict {
        Ok(a) if a.truncation.is_some() => ((a.horizon() / dt + 1e-9).floor() * dt).max(dt),
        _ => t_end,
    };
    let mollified = propagate_strict_mollified(&cx.h, &cx.u, x0, moll_end, dt, &moll_opts);
    let strict = record_arc(&mut cx, "strict", strict, &mut arcs);
    let generalized = record_arc(&mut cx, "generalized", generalized, &mut arcs);
    let mollified = record_arc(&mut cx, "mollified", mollified, &mut arcs);
    if let Some(m) = &mollified {
        let e = VerifierEntry::new(
            "mollified convergence",
            pass(m.diagnostics.converged == Some(true)),
            None,
        )
        .param("eps_schedule", m.diagnostics.eps_schedule.clone())
        .param("agreement", m.diagnostics.moll_agreement.unwrap_or(f64::NAN))
        .param("C1", m.diagnostics.gradient_bound.unwrap_or(f64::NAN))
        .param("C2", m.diagnostics.hessian_bound.unwrap_or(f64::NAN));
        cx.push(e);
    }
    let intrinsic = if sc.run.intrinsic_times.is_empty() {
        None
    } else {
        let opts = IntrinsicOptions {
            lambda0: sc.run.lambda0,
            lo: LaxOleinikOptions {
                t0: sc.run.t0,
                grid: 48,
                ..Default::default()
            },
        };
        let arc = propagate_intrinsic(&cx.h, &cx.u, x0, &sc.run.intrinsic_times, &opts);
        let arc = record_arc(&mut cx, "intrinsic", arc, &mut arcs);
        if let Some(a) = &arc {
            intrinsic_entry(&mut cx, a);
        }
        arc
    };

    if let Some(expected) = &sc.run.expect_truncation {
        let got = generalized.as_ref().and_then(|a| a.truncation.as_ref());
        let ok = got.is_some_and(|t| t.reason.to_string() == *expected);
        let mut e = VerifierEntry::new("expected truncation", pass(ok), None).param("expected", expected.clone());
        if let Some(t) = got {
            e = e
                .param("reason", t.reason.to_string())
                .param("time", t.time)
                .param("detail", t.detail.clone());
        }
        cx.push(e);
    }

    let v = sc.verify.clone();
    if v.lip0 {
        for a in [&strict, &generalized, &mollified, &intrinsic].into_iter().flatten() {
            lip0_entry(&mut cx, a);
        }
    }
    if let Some(s) = &strict {
        if v.energy {
            energy_entry(&mut cx, s);
        }
        if v.injectivity {
            match check_injectivity(s) {
                Ok(r) => cx.push(r.entry()),
                Err(e) => cx.push_err("injectivity", e),
            }
        }
        if v.calibrated {
            calibrated_entries(&mut cx, s);
        }
        if v.velocity_gap {
            gap_entry(&mut cx, s);
        }
    }
    if let Some(g) = &generalized {
        if v.perp {
            perp_entry(&mut cx, g);
        }
    }
    if let (Some(s), Some(g)) = (&strict, &generalized) {
        for &rho in &v.cone_rhos {
            match check_cone_lemma(s, g, rho) {
                Ok(r) => cx.push(r.entry()),
                Err(e) => cx.push_err(&format!("cone lemma (rho = {rho})"), e),
            }
        }
        if v.reparam {
            reparam_entries(&mut cx, s, g);
        }
    }
    if let (Some(i), Some(s)) = (&intrinsic, &strict) {
        if v.reparam {
            match match_reparam(i, s, &Default::default()) {
                Ok(r) => cx.push(r.entry("reparameterization (intrinsic → strict)")),
                Err(e) => cx.push_err("reparameterization (intrinsic → strict)", e),
            }
        }
    }
    if v.strict_uniqueness {
        let opts = StrictUniquenessOptions {
            mode: if sc.run.mode == "full-horizon" {
                UniquenessMode::FullHorizon
            } else {
                UniquenessMode::Local
            },
            moll: moll_opts.clone(),
            prop: prop.clone(),
            ..Default::default()
        };
        match check_strict_uniqueness(&cx.h, &cx.u, x0, t_end, &sc.run.dt_list, &opts) {
            Ok(r) => cx.push(r.entry()),
            Err(e) => cx.push_err("strict uniqueness", e),
        }
    }
    if !v.fixed_point_times.is_empty() {
        fixed_point_entry(&mut cx);
    }
    if let Some(t) = &v.tube {
        let opts = TubeOptions {
            eps_schedule: sc.run.eps_schedule.clone(),
            dt,
            ..Default::default()
        };
        let (vb, pb) = (Vec2::new(t.v_bar[0], t.v_bar[1]), Vec2::new(t.p_bar[0], t.p_bar[1]));
        match check_tube_exclusion(&cx.h, &cx.u, x0, vb, pb, t_end, &opts) {
            Ok(r) => cx.push(r.entry()),
            Err(e) => cx.push_err("tube exclusion", e),
        }
    }
    Ok(finish(cx, arcs))
}

fn finish(cx: Ctx<'_>, arcs: Vec<SingularArc>) -> RunOutcome {
    let summaries = arcs
        .iter()
        .map(|a| ArcSummary {
            kind: kind_name(a.kind).to_string(),
            file: String::new(),
            samples: a.len(),
            horizon: a.horizon(),
            initial_velocity: [a.initial_velocity.x1, a.initial_velocity.x2],
            truncation: a.truncation.as_ref().map(|t| t.reason.to_string()),
            truncation_time: a.truncation.as_ref().map(|t| t.time),
        })
        .collect();
    let passed = !cx
        .entries
        .iter()
        .any(|e| matches!(e.status, CheckStatus::Fail | CheckStatus::Error));
    RunOutcome {
        report: RunReport {
            scenario: cx.sc.name.clone(),
            schema_version: cx.sc.schema_version,
            seed: cx.seed,
            dt: cx.dt,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: cx.started.elapsed().as_secs_f64(),
            passed,
            config: effective(cx.sc, cx.seed, cx.dt),
            arcs: summaries,
            entries: cx.entries,
        },
        arcs,
    }
}

fn record_arc(
    cx: &mut Ctx<'_>,
    name: &str,
    arc: hj_singular::Result<SingularArc>,
    arcs: &mut Vec<SingularArc>,
) -> Option<SingularArc> {
    match arc {
        Ok(a) => {
            arcs.push(a.clone());
            Some(a)
        }
        Err(e) => {
            cx.push_err(&format!("propagate {name}"), e);
            None
        }
    }
}

fn intrinsic_entry(cx: &mut Ctx<'_>, a: &SingularArc) {
    let d = &a.diagnostics;
    let search = default_search_box(cx.x0, cx.sc.run.t0, cx.sc.run.lambda0.unwrap_or(2.0));
    let defect = concavity_defect(&cx.h, cx.sc.run.t0, cx.x0, search, 64, cx.seed).unwrap_or(f64::NAN);
    let mut e = VerifierEntry::new("intrinsic arc", CheckStatus::Pass, d.initial_velocity_error.map(|x| -x))
        .param("t0", cx.sc.run.t0)
        .param("initial_velocity_error", d.initial_velocity_error.unwrap_or(f64::NAN))
        .param("non_unique_samples", d.non_unique.len() as f64)
        .param("concavity_defect", defect)
        .informative();
    for n in &d.notes {
        e = e.param("note", n.clone());
    }
    cx.push(e);
}

fn lip0_entry(cx: &mut Ctx<'_>, a: &SingularArc) {
    let name = format!("Lip0 ({})", kind_name(a.kind));
    match validate_lip0(a, &Lip0Options::default()) {
        Ok(r) => {
            let margin = r
                .conditions
                .iter()
                .filter_map(|c| c.margin)
                .fold(f64::INFINITY, f64::min);
            let mut e = VerifierEntry::new(name, pass(r.passed()), Some(margin))
                .param("v0", vec![r.v0.x1, r.v0.x2])
                .param("v0_fit", vec![r.v0_fit.x1, r.v0_fit.x2])
                .param("lip", r.lip);
            for c in &r.conditions {
                e = e.param(
                    &format!("condition {}", c.name),
                    format!("{:?}: {}", c.status, c.detail),
                );
            }
            cx.push(e);
        }
        Err(e) => cx.push_err(&name, e),
    }
}

/// min of H(x, ·) over a segment by dense sampling and golden refinement.
fn dense_min_on_segment(h: &Hamiltonian, x: Vec2, a: Vec2, b: Vec2) -> f64 {
    let n = 4000;
    let f = |s: f64| h.eval(x, a.lerp(b, s));
    let k = (0..=n)
        .min_by(|&i, &j| f(i as f64 / n as f64).total_cmp(&f(j as f64 / n as f64)))
        .unwrap();
    let lo = (k.max(1) - 1) as f64 / n as f64;
    let hi = ((k + 1).min(n)) as f64 / n as f64;
    let (_, v) = golden_min(f, lo, hi, 1e-14);
    v.min(f(k as f64 / n as f64))
}

fn energy_entry(cx: &mut Ctx<'_>, s: &SingularArc) {
    let Some(cov) = &s.covectors else { return };
    let mut worst = (0.0f64, 0.0);
    for k in 0..s.len() {
        let x = s.points[k];
        let Ok(sd) = cx.u.superdiff(x) else { continue };
        let m = match sd.segment() {
            Some((a, b)) => dense_min_on_segment(&cx.h, x, a, b),
            None if sd.set.kind() == SetKind::Point => cx.h.eval(x, sd.set.extreme_points()[0]),
            None => continue,
        };
        let d = (cx.h.eval(x, cov[k]) - m).abs();
        if d > worst.0 {
            worst = (d, s.times[k]);
        }
    }
    cx.push(
        VerifierEntry::new(
            "energy condition",
            pass(worst.0 <= ENERGY_TOL),
            Some(ENERGY_TOL - worst.0),
        )
        .param("max_deviation", worst.0)
        .witness(Witness::new("worst sample", None, Some(worst.1), worst.0)),
    );
}

fn perp_entry(cx: &mut Ctx<'_>, g: &SingularArc) {
    let Some(lambdas) = &g.lambdas else { return };
    let mut worst = (0.0f64, 0.0);
    let mut used = 0;
    for k in 0..g.len() {
        if !(lambdas[k] > 0.0 && lambdas[k] < 1.0) {
            continue;
        }
        let Ok(sd) = cx.u.superdiff(g.points[k]) else { continue };
        let Some((p1, p2)) = sd.segment() else { continue };
        used += 1;
        let d = g.velocities[k].dot(p2 - p1).abs();
        if d > worst.0 {
            worst = (d, g.times[k]);
        }
    }
    cx.push(
        VerifierEntry::new("perp", pass(worst.0 < PERP_TOL && used > 0), Some(PERP_TOL - worst.0))
            .param("samples", used as f64)
            .param("max_abs_inner", worst.0)
            .witness(Witness::new("worst sample", None, Some(worst.1), worst.0)),
    );
}

fn calibrated_entries(cx: &mut Ctx<'_>, s: &SingularArc) {
    let opts = CalibratedOptions {
        delta_target: cx.sc.verify.calibrated_delta,
        ..Default::default()
    };
    match check_calibrated_cones(&cx.h, &cx.u, s, &opts) {
        Ok(r) => cx.push(r.entry()),
        Err(e) => cx.push_err("calibrated cones", e),
    }
    let swapped = CalibratedOptions { swap: true, ..opts };
    match check_calibrated_cones(&cx.h, &cx.u, s, &swapped) {
        Ok(r) => {
            // The swapped configuration must be rejected.
            let e = VerifierEntry::new("calibrated cones sensitivity", pass(r.margin < 0.0), Some(-r.margin))
                .param("swapped_margin", r.margin)
                .param("swapped_delta", r.delta_achieved);
            cx.push(e);
        }
        Err(e) => cx.push_err("calibrated cones sensitivity", e),
    }
}

fn gap_entry(cx: &mut Ctx<'_>, s: &SingularArc) {
    let prof = match gap_profile(&cx.h, &cx.u, s) {
        Ok(p) => p,
        Err(e) => return cx.push_err("velocity gap", e),
    };
    // Corrupt the selection at the start: p̄ an endpoint of D⁺u, v̄ = H_p(p̄).
    let corrupted =
        cx.u.superdiff(cx.x0)
            .ok()
            .and_then(|sd| sd.segment())
            .map(|(p1, _)| velocity_gap(&cx.h, &cx.u, cx.x0, cx.h.grad_p(cx.x0, p1), p1));
    let corrupted_mu = match corrupted {
        Some(Ok(g)) => g.mu,
        _ => f64::NAN,
    };
    let ok = prof.samples_used > 0 && prof.max_mu <= GAP_TOL && corrupted_mu > GAP_TOL;
    cx.push(
        VerifierEntry::new("velocity gap", pass(ok), Some(GAP_TOL - prof.max_mu))
            .param("max_mu", prof.max_mu)
            .param("samples", prof.samples_used as f64)
            .param("corrupted_mu", corrupted_mu),
    );
}

fn reparam_entries(cx: &mut Ctx<'_>, s: &SingularArc, g: &SingularArc) {
    let (ab, ba) = (
        match_reparam(s, g, &Default::default()),
        match_reparam(g, s, &Default::default()),
    );
    let (ab, ba) = match (ab, ba) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return cx.push_err("reparameterization (strict → generalized)", e),
    };
    let inv = inverse_composition_residual(&ab, &ba);
    let inv_tol = 2.0 * ab.match_tol.max(ba.match_tol);
    let mut e = ab
        .entry("reparameterization (strict → generalized)")
        .param("inverse_composition", inv)
        .param("inverse_tol", inv_tol);
    let ok = ab.pass && ab.lip_phi.is_finite() && ab.slope_margin >= -0.05 && inv <= inv_tol;
    e.status = pass(ok);
    cx.push(e);
    if cx.sc.is_mechanical() {
        let d = ab.identity_deviation;
        cx.push(
            VerifierEntry::new("mechanical identity", pass(d < IDENTITY_TOL), Some(IDENTITY_TOL - d))
                .param("identity_deviation", d)
                .param("sigma", ab.sigma),
        );
    }
}

fn fixed_point_entry(cx: &mut Ctx<'_>) {
    let v = &cx.sc.verify;
    let mut rng = ChaCha8Rng::seed_from_u64(cx.seed);
    let area = Rect::around(cx.x0, 1.0);
    let pts: Vec<Vec2> = (0..v.fixed_point_samples)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.gen(), rng.gen());
            area.lo + Vec2::new(a * area.width(), b * area.height())
        })
        .collect();
    let lambda0 = cx
        .sc
        .run
        .lambda0
        .unwrap_or_else(|| default_lambda0(&cx.h, cx.u.region(), 2.0 * cx.u.gradient_bound().max(1.0)));
    let u = &cx.u;
    let u0 = |y: Vec2| u.value_unchecked(y);
    let opts = LaxOleinikOptions::default();
    let mut worst = (0.0f64, 0.0, Vec2::ZERO);
    for &t in &v.fixed_point_times {
        for &x in &pts {
            let r = match lax_oleinik_neg(&cx.h, &u0, t, x, default_search_box(x, t, lambda0), &opts) {
                Ok(r) => r,
                Err(e) => return cx.push_err("fixed point", e),
            };
            let d = (r.value - u.value_unchecked(x)).abs();
            if d > worst.0 {
                worst = (d, t, x);
            }
        }
    }
    cx.push(
        VerifierEntry::new(
            "fixed point",
            pass(worst.0 < FIXED_POINT_TOL),
            Some(FIXED_POINT_TOL - worst.0),
        )
        .param("times", v.fixed_point_times.clone())
        .param("samples", pts.len() as f64)
        .param("max_deviation", worst.0)
        .witness(Witness::new(format!("x = {}", worst.2), None, Some(worst.1), worst.0)),
    );
}

fn effective(sc: &Scenario, seed: u64, dt: f64) -> Scenario {
    let mut e = sc.clone();
    e.seed = seed;
    e.run.dt = dt;
    e
}

/// Write arcs, the effective scenario and the report under `dir`.
pub fn write_outputs(sc: &Scenario, outcome: &mut RunOutcome, dir: &Path, format: Format) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let text = toml::to_string_pretty(&effective(sc, outcome.report.seed, outcome.report.dt))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    fs::write(dir.join("scenario.toml"), text)?;
    for (arc, summary) in outcome.arcs.iter().zip(outcome.report.arcs.iter_mut()) {
        let file = format!("{}.{}", summary.kind, format.extension());
        let path = dir.join(&file);
        match format {
            Format::Csv => arc.write_csv(fs::File::create(&path)?)?,
            Format::Json => fs::write(&path, arc.to_json()?)?,
        }
        summary.file = file;
    }
    let json = serde_json::to_string_pretty(&outcome.report).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::write(dir.join("report.json"), json + "\n")?;
    Ok(())
}

/// Run a scenario, write its outputs to `opts.out/<name>` and, when
/// asserting, turn failed verifiers into an error.
pub fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunReport, CliError> {
    let mut outcome = execute(sc, opts.seed, opts.dt)?;
    let dir = opts.out.join(&sc.name);
    write_outputs(sc, &mut outcome, &dir, opts.format)?;
    let report = outcome.report;
    if opts.assert && !report.passed {
        let names: Vec<String> = report
            .failures()
            .iter()
            .map(|e| match e.params.get("error") {
                Some(serde_json::Value::String(m)) => format!("{}: {m}", e.name),
                _ => e.name.clone(),
            })
            .collect();
        return Err(CliError::Verification(format!(
            "scenario `{}` failed: {}",
            sc.name,
            names.join("; ")
        )));
    }
    Ok(report)
}

/// One line per entry, for the terminal.
pub fn render(report: &RunReport) -> String {
    let mut out = format!(
        "scenario {} (seed {}, dt {})\n",
        report.scenario, report.seed, report.dt
    );
    for a in &report.arcs {
        out += &format!(
            "  arc {:<12} {:>6} samples  T = {:<8.4}{}\n",
            a.kind,
            a.samples,
            a.horizon,
            a.truncation
                .as_ref()
                .map(|r| format!("  truncated: {r} at t = {:.4}", a.truncation_time.unwrap_or(f64::NAN)))
                .unwrap_or_default()
        );
    }
    for e in &report.entries {
        let tag = match e.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Informative => "INFO",
            CheckStatus::NotEvaluated => "SKIP",
            CheckStatus::Error => "ERR ",
        };
        let margin = e.margin.map(|m| format!("  margin {m:.3e}")).unwrap_or_default();
        out += &format!("  [{tag}] {}{margin}\n", e.name);
        if let Some(serde_json::Value::String(m)) = e.params.get("error") {
            out += &format!("         {m}\n");
        }
    }
    out += if report.passed {
        "  => all asserted checks passed\n"
    } else {
        "  => FAILED\n"
    };
    out
}
