use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tubeflow_core::geometry::Point;
use tubeflow_core::mapdd::{mapdd_error_report, solve_mapdd_transport, ErrorReport, HybridSolution};
use tubeflow_core::transport2d::{peclet, solve_transport, TransportParams, Velocity};

use super::{check_peclet, label, timed, RunOptions, Setup};
use crate::artifacts::Artifacts;
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::report::{Check, RunReport};

/// Hybrid against full 2D error report in its exported form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub l2: f64,
    pub h1_broken: f64,
    pub l2_relative: f64,
    pub h1_relative: f64,
    pub dof_full: usize,
    pub dof_hybrid: usize,
    pub t_full: f64,
    pub t_hybrid: f64,
}

impl From<ErrorReport> for ErrorSummary {
    fn from(r: ErrorReport) -> Self {
        Self {
            l2: r.l2,
            h1_broken: r.h1_broken,
            l2_relative: r.l2_relative,
            h1_relative: r.h1_relative,
            dof_full: r.dof_full,
            dof_hybrid: r.dof_hybrid,
            t_full: r.t_full,
            t_hybrid: r.t_hybrid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    pub k: f64,
    pub delta: f64,
    pub report: ErrorSummary,
    pub conservation_full: f64,
    pub conservation_hybrid: f64,
}

/// Hybrid and full 2D transport (same composite velocity) for every zoom
/// factor of the configuration, at the first diffusivity of the sweep.
pub fn k_sweep(cfg: &ExperimentConfig, opts: RunOptions, out: &Artifacts) -> Result<Vec<KPoint>> {
    let setup = Setup::from_config(cfg, cfg.graph_spec()?)?;
    let kappa = cfg.kappas()[0];
    let results: Vec<(KPoint, HybridSolution)> = cfg
        .numerics
        .mapdd_k
        .par_iter()
        .map(|&k| {
            let ctx = |what: &str| format!("{what} at K {k}");
            let cv = setup.hybrid_velocity(k, cfg.numerics.mapdd_ports)?;
            let params = TransportParams::new(kappa, cfg.physics.beta).with_graph_perturbations(&setup.graph);
            let ports = setup.ports();
            let (hybrid, t_hybrid) = timed(|| solve_mapdd_transport(&cv, &params, &ports));
            let hybrid = hybrid.context(|| ctx("hybrid transport"))?;
            check_peclet(|| ctx("hybrid zone mesh"), hybrid.peclet_max, opts)?;
            let field = |x: Point| cv.at(x);
            let vel = Velocity::Analytic(&field);
            check_peclet(|| ctx("2D transport mesh"), peclet(&setup.mesh, &params, vel), opts)?;
            let (full, t_full) = timed(|| solve_transport(&setup.mesh, &setup.graph, &params, vel, &ports));
            let full = full.context(|| ctx("2D transport"))?;
            let report = mapdd_error_report(&hybrid, &full).context(|| ctx("error report"))?.with_times(t_full, t_hybrid);
            let point = KPoint {
                k,
                delta: cv.space.decomposition.delta,
                report: report.into(),
                conservation_full: full.conservation_defect(),
                conservation_hybrid: hybrid.conservation_defect(),
            };
            Ok((point, hybrid))
        })
        .collect::<Result<_>>()?;
    for (p, h) in &results {
        write_hybrid(out, &format!("hybrid_k{}", label(p.k)), h)?;
        out.json(&format!("error_k{}.json", label(p.k)), &p.report)?;
    }
    Ok(results.into_iter().map(|r| r.0).collect())
}

/// Per-zone 2D CSVs, per-segment 1D CSVs and a JSON index linking them.
pub fn write_hybrid(out: &Artifacts, stem: &str, h: &HybridSolution) -> Result<()> {
    let mut zones = Vec::new();
    for (z, f) in h.zones.iter().enumerate() {
        let name = format!("{stem}_zone{z}.csv");
        out.field(&name, f, "c")?;
        zones.push(serde_json::json!({ "zone": z, "file": name, "feature": format!("{:?}", h.space.decomposition.zones[z].feature) }));
    }
    let mut segments = Vec::new();
    for (i, seg) in h.segments.iter().enumerate() {
        let name = format!("{stem}_segment{i}.csv");
        out.csv(&name, &["x1", "cbar"], seg.s.iter().zip(&seg.values).map(|(s, v)| vec![*s, *v]))?;
        segments.push(serde_json::json!({ "segment": i, "edge": seg.edge, "file": name }));
    }
    let index = serde_json::json!({
        "k": h.space.decomposition.k,
        "delta": h.space.decomposition.delta,
        "n_dofs": h.n_dofs,
        "zones": zones,
        "segments": segments,
        "port_fluxes": h.port_fluxes.iter().map(|(t, f)| serde_json::json!({"port": crate::artifacts::tag_label(*t), "outflow": f})).collect::<Vec<_>>(),
        "conservation_defect": h.conservation_defect(),
    });
    out.json(&format!("{stem}.json"), &index)?;
    Ok(())
}

/// Hybrid model fidelity against full 2D for each zoom factor.
pub fn run_mapdd(cfg: &ExperimentConfig, opts: RunOptions, out: &Artifacts) -> Result<RunReport> {
    let start = Instant::now();
    let points = k_sweep(cfg, opts, out)?;
    let mut checks: Vec<Check> = points
        .iter()
        .map(|p| Check::at_most(format!("h1_relative_k{}", label(p.k)), p.report.h1_relative, cfg.tolerances.mapdd_h1))
        .collect();
    let worst = points.iter().map(|p| p.conservation_full.max(p.conservation_hybrid)).fold(0.0, f64::max);
    checks.push(Check::at_most("transport_conservation", worst, 1e-6));
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.k.total_cmp(&b.k));
    if sorted.len() > 1 {
        let ok = sorted.windows(2).all(|w| w[1].report.h1_relative <= w[0].report.h1_relative);
        checks.push(Check::holds("mapdd_error_non_increasing_in_k", ok));
    }
    out.csv(
        "mapdd_errors.csv",
        &["k", "l2", "h1_broken", "h1_relative", "dof_full", "dof_hybrid"],
        sorted.iter().map(|p| vec![p.k, p.report.l2, p.report.h1_broken, p.report.h1_relative, p.report.dof_full as f64, p.report.dof_hybrid as f64]),
    )?;
    Ok(RunReport {
        scenario: cfg.scenario.name().into(),
        band: cfg.band(),
        rows: Vec::new(),
        checks,
        details: serde_json::json!({ "kappa": cfg.kappas()[0], "points": points }),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
