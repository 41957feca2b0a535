use std::time::Instant;

use rayon::prelude::*;
use tubeflow_core::stokes2d::Poiseuille;

use super::{label, transport_point, PointInput, RunOptions, Setup};
use crate::artifacts::Artifacts;
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{Check, RunReport};

/// Single-channel study: Poiseuille recovery, then 2D against 1D leading
/// order for every diffusivity of the sweep.
pub fn run_straight_channel(cfg: &ExperimentConfig, opts: RunOptions, out: &Artifacts) -> Result<RunReport> {
    let start = Instant::now();
    let spec = cfg.graph_spec()?;
    if spec.edges.len() != 1 {
        return Err(HarnessError::Config(format!("straight_channel needs a single-edge geometry, got {} edges", spec.edges.len())));
    }
    let setup = Setup::from_config(cfg, spec)?;
    let stokes = setup.stokes()?;
    let mut checks = Vec::new();
    let q = setup.flow.flux[0];
    if setup.graph.edges[0].stenoses.is_empty() {
        checks.push(Check::at_most("poiseuille_rel_linf", poiseuille_error(&setup, &stokes.velocity), 1e-8));
    }
    let net: f64 = stokes.port_fluxes.iter().map(|f| f.1).sum();
    checks.push(Check::at_most("stokes_port_balance", net.abs() / q.abs().max(f64::MIN_POSITIVE), 1e-10));
    out.mesh("mesh.txt", &setup.mesh)?;
    out.field("velocity.csv", &stokes.velocity, "u")?;
    out.field("pressure.csv", &stokes.pressure, "p")?;
    out.json("port_fluxes.json", &port_flux_report(&setup, &stokes.port_fluxes))?;

    let samples = setup.samples(cfg.numerics.samples, opts.seed);
    let input = PointInput {
        setup: &setup,
        velocity: &stokes.velocity,
        hybrid: None,
        samples: &samples,
        beta: cfg.physics.beta,
        n_per_edge: cfg.numerics.n_per_edge,
        opts,
    };
    let kappas = cfg.kappas();
    let points: Vec<_> = kappas.par_iter().map(|&k| transport_point(&input, k)).collect::<Result<_>>()?;

    let (band, from) = (cfg.band(), cfg.agree_from_kappa());
    let mut rows = Vec::new();
    let mut worst_conservation: f64 = 0.0;
    for p in &points {
        let k = label(p.kappa);
        let prof = samples[0].iter().enumerate().map(|(i, &x)| vec![x, p.avg_2d[0][i], p.avg_1d[0][i]]);
        out.csv(&format!("profile_{k}.csv"), &["x1", "cbar_2d", "cbar_1d"], prof)?;
        out.field(&format!("concentration_{k}.csv"), &p.full.concentration, "c")?;
        out.field(&format!("flux_{k}.csv"), &p.flux_density, "f")?;
        p.write_leading(out, &setup.graph)?;
        worst_conservation = worst_conservation.max(p.full.conservation_defect());
        rows.extend(p.rows(&setup, &samples, band, from));
    }
    checks.push(Check::at_most("transport_conservation", worst_conservation, 1e-6));
    let mut by_kappa: Vec<(f64, f64)> = rows.iter().map(|r| (r.kappa, r.relative_max)).collect();
    by_kappa.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = by_kappa.windows(2).all(|w| w[1].1 <= w[0].1);
    checks.push(Check::holds("discrepancy_non_increasing_in_kappa", monotone));
    Ok(RunReport {
        scenario: cfg.scenario.name().into(),
        band,
        rows,
        checks,
        details: serde_json::json!({ "edge_flux": q, "h": setup.h, "dofs_2d": setup.mesh.n_p2() }),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Relative max-norm distance of a channel velocity to the Poiseuille profile
/// with the same flux, over all P2 nodes.
pub fn poiseuille_error(setup: &Setup, velocity: &tubeflow_core::femcore::Field) -> f64 {
    let g = &setup.graph;
    let exact = Poiseuille::with_flux(setup.flow.flux[0], setup.mu, g.width(0));
    let m = &velocity.mesh;
    let n = m.n_p2();
    let (dir, nrm) = (g.edges[0].dir, g.edges[0].normal());
    let origin = g.nodes[g.edges[0].from].position;
    let mut err: f64 = 0.0;
    for i in 0..n {
        let p = m.p2_node(i);
        let t = (p - origin).dot(nrm);
        let u = exact.velocity(t);
        let (ux, uy) = (velocity.values[i], velocity.values[n + i]);
        err = err.max((ux - u * dir.x).abs()).max((uy - u * dir.y).abs());
    }
    err / exact.velocity(0.0).abs().max(f64::MIN_POSITIVE)
}

pub fn port_flux_report(setup: &Setup, fluxes: &[(tubeflow_core::tubegraph::BoundaryTag, f64)]) -> serde_json::Value {
    let ports: Vec<_> = fluxes
        .iter()
        .map(|(tag, f)| serde_json::json!({ "port": crate::artifacts::tag_label(*tag), "outflow": f }))
        .collect();
    serde_json::json!({ "ports": ports, "network_flux": setup.flow.flux, "network_pressure": setup.flow.pressure })
}
