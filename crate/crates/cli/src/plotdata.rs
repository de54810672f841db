//! Polyline files for plotting the objects around x(s): the arcs, the two
//! backward calibrated curves and the boundary rays of the cone C_ρ.

use std::fs;
use std::path::{Path, PathBuf};

use hj_singular::characteristics::SingularArc;
use hj_singular::solution::backward_calibrated;
use hj_singular::{ConeSign, ConeSpec, Vec2};
use serde::Deserialize;

use crate::error::CliError;
use crate::runner::RunReport;
use crate::scenario::Scenario;

/// Arc parameter at which rays and cones are drawn.
pub const PLOT_S: f64 = 0.2;
/// Length of the drawn cone edges.
pub const EDGE_LENGTH: f64 = 0.25;
const EDGE_POINTS: usize = 11;

#[derive(Deserialize)]
struct ArcRow {
    t: f64,
    x1: f64,
    x2: f64,
}

fn read_arc(path: &Path) -> Result<Vec<(f64, Vec2)>, CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        let arc: SingularArc = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        return Ok(arc.times.into_iter().zip(arc.points).collect());
    }
    let mut rd = csv::Reader::from_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    rd.deserialize::<ArcRow>()
        .map(|r| {
            r.map(|r| (r.t, Vec2::new(r.x1, r.x2)))
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn write_polyline(path: &Path, header: [&str; 3], rows: &[(f64, Vec2)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Usage(e.to_string()))?;
    w.write_record(header).map_err(|e| CliError::Usage(e.to_string()))?;
    for (t, x) in rows {
        w.write_record([t.to_string(), x.x1.to_string(), x.x2.to_string()])
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a finished run from `run_dir` and write the plot files into
/// `run_dir/plot`. Returns the written paths.
pub fn emit(run_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let scenario_path = run_dir.join("scenario.toml");
    let report_path = run_dir.join("report.json");
    if !scenario_path.is_file() || !report_path.is_file() {
        return Err(CliError::Usage(format!(
            "{} is not a completed run (scenario.toml and report.json expected)",
            run_dir.display()
        )));
    }
    let sc = Scenario::load(&scenario_path)?;
    let report: RunReport = serde_json::from_str(&fs::read_to_string(&report_path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", report_path.display())))?;
    let h = sc.build_hamiltonian()?;
    let u = sc.build_solution()?;

    let out = run_dir.join("plot");
    fs::create_dir_all(&out)?;
    let mut written = Vec::new();

    let wanted: Vec<&str> = if report.arcs.iter().any(|a| a.kind == "intrinsic") {
        vec!["strict", "generalized", "intrinsic"]
    } else {
        vec!["strict", "generalized", "mollified"]
    };
    let mut strict = None;
    for kind in wanted {
        let Some(a) = report.arcs.iter().find(|a| a.kind == kind) else {
            continue;
        };
        let rows = read_arc(&run_dir.join(&a.file))?;
        let path = out.join(format!("arc_{kind}.csv"));
        write_polyline(&path, ["t", "x1", "x2"], &rows)?;
        written.push(path);
        if kind == "strict" {
            strict = Some(rows);
        }
    }
    let strict = strict.ok_or_else(|| CliError::Usage("run has no strict arc to draw around".into()))?;
    let times: Vec<f64> = strict.iter().map(|r| r.0).collect();
    let points: Vec<Vec2> = strict.iter().map(|r| r.1).collect();
    let arc = SingularArc::from_samples(times, points)?;
    let k = arc.times.partition_point(|&t| t < PLOT_S - 1e-12).min(arc.len() - 2);
    let (s, xs) = (arc.times[k], arc.points[k]);

    let sd = u.superdiff(xs)?;
    let (p1, p2) = sd
        .segment()
        .ok_or_else(|| CliError::Verification(format!("D⁺u is not a segment at x({s})")))?;
    for (name, p) in [("ray_xi1", p1), ("ray_xi2", p2)] {
        let traj = backward_calibrated(&h, &u, xs, p, PLOT_S, 1e-3)?;
        let n = traj.len() - 1;
        let rows: Vec<(f64, Vec2)> = traj
            .iter()
            .enumerate()
            .map(|(i, z)| (-PLOT_S * i as f64 / n as f64, z.x))
            .collect();
        let path = out.join(format!("{name}.csv"));
        write_polyline(&path, ["r", "x1", "x2"], &rows)?;
        written.push(path);
    }

    let rho = sc.verify.cone_rhos.first().copied().unwrap_or(0.9);
    let cone = ConeSpec::along(xs, arc.points[k + 1] - xs, rho, ConeSign::Both)?;
    for (i, d) in cone.boundary_directions().into_iter().enumerate() {
        let rows: Vec<(f64, Vec2)> = (0..EDGE_POINTS)
            .map(|j| {
                let r = EDGE_LENGTH * j as f64 / (EDGE_POINTS - 1) as f64;
                (r, xs + d * r)
            })
            .collect();
        let path = out.join(format!("cone_edge_{}.csv", i + 1));
        write_polyline(&path, ["r", "x1", "x2"], &rows)?;
        written.push(path);
    }
    Ok(written)
}
