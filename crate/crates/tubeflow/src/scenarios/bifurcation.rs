use std::time::Instant;

use rayon::prelude::*;
use tubeflow_core::femcore::Locator;
use tubeflow_core::stokes2d::streamfunction;

use super::straight::port_flux_report;
use super::{label, linear_fit, transport_point, PointInput, RunOptions, Setup};
use crate::artifacts::Artifacts;
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::report::{Check, ComparisonRow, RunReport};

/// Diffusivities over which the discrepancy must fall strictly and cross the
/// agreement band.
pub const TREND_KAPPAS: [f64; 3] = [0.1, 1.0, 10.0];

/// Network study: 2D Stokes kinematics and pressure, then 2D against 1D
/// leading order and the hybrid model for every diffusivity.
pub fn run_bifurcation(cfg: &ExperimentConfig, opts: RunOptions, out: &Artifacts) -> Result<RunReport> {
    let start = Instant::now();
    let setup = Setup::from_config(cfg, cfg.graph_spec()?)?;
    let stokes = setup.stokes()?;
    let scale = setup.inflow_scale().max(f64::MIN_POSITIVE);
    let mut checks = Vec::new();
    let network = setup.flow.kirchhoff_residuals(&setup.graph).iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let net: f64 = stokes.port_fluxes.iter().map(|f| f.1).sum();
    checks.push(Check::at_most("junction_flux_balance", network.max(net.abs()) / scale, 1e-10));

    out.mesh("mesh.txt", &setup.mesh)?;
    out.field("velocity.csv", &stokes.velocity, "u")?;
    out.field("pressure.csv", &stokes.pressure, "p")?;
    out.json("port_fluxes.json", &port_flux_report(&setup, &stokes.port_fluxes))?;
    let psi = streamfunction(&stokes.velocity).context(|| "streamfunction".into())?;
    out.field("streamfunction.csv", &psi, "psi")?;

    let fits = pressure_fits(&setup, &stokes.pressure, out)?;
    let worst_r2 = fits.iter().map(|f| f.2).fold(1.0, f64::min);
    checks.push(Check::at_least("pressure_arm_r2", worst_r2, 0.99));

    let k = cfg.numerics.mapdd_k[0];
    let hybrid = setup.hybrid_velocity(k, cfg.numerics.mapdd_ports)?;
    let samples = setup.samples(cfg.numerics.samples, opts.seed);
    let input = PointInput {
        setup: &setup,
        velocity: &stokes.velocity,
        hybrid: Some(&hybrid),
        samples: &samples,
        beta: cfg.physics.beta,
        n_per_edge: cfg.numerics.n_per_edge,
        opts,
    };
    let kappas = cfg.kappas();
    let points: Vec<_> = kappas.par_iter().map(|&k| transport_point(&input, k)).collect::<Result<_>>()?;

    let (band, from) = (cfg.band(), cfg.agree_from_kappa());
    let mut rows = Vec::new();
    let mut conservation: f64 = 0.0;
    let mut audit = Vec::new();
    for p in &points {
        let kl = label(p.kappa);
        let hy = p.avg_hybrid.as_ref().expect("hybrid requested");
        for (e, s) in samples.iter().enumerate() {
            let prof = s.iter().enumerate().map(|(i, &x)| vec![x, p.avg_2d[e][i], p.avg_1d[e][i], hy[e][i]]);
            out.csv(&format!("profile_{kl}_edge{e}.csv"), &["x1", "cbar_2d", "cbar_1d", "cbar_mapdd"], prof)?;
        }
        out.field(&format!("concentration_{kl}.csv"), &p.full.concentration, "c")?;
        out.field(&format!("flux_{kl}.csv"), &p.flux_density, "f")?;
        p.write_leading(out, &setup.graph)?;
        let hybrid = p.hybrid.as_ref().map_or(0.0, |h| h.conservation_defect());
        conservation = conservation.max(p.full.conservation_defect()).max(hybrid);
        audit.push(serde_json::json!({ "kappa": p.kappa, "full": p.full.conservation_defect(), "hybrid": hybrid }));
        rows.extend(p.rows(&setup, &samples, band, from));
    }
    checks.push(Check::at_most("transport_conservation", conservation, 1e-6));
    for method in ["1d", "mapdd"] {
        if let Some((decreasing, crosses)) = trend(&rows, method, band) {
            checks.push(Check::holds(format!("{method}_discrepancy_strictly_decreasing"), decreasing));
            checks.push(Check::holds(format!("{method}_crosses_band"), crosses));
        }
    }
    let arms: Vec<_> = fits
        .iter()
        .map(|(e, slope, r2)| serde_json::json!({ "edge": setup.graph.edges[*e].id, "slope": slope, "r2": r2 }))
        .collect();
    Ok(RunReport {
        scenario: cfg.scenario.name().into(),
        band,
        rows,
        checks,
        details: serde_json::json!({ "pressure_fits": arms, "conservation": audit, "mapdd_k": k, "h": setup.h, "dofs_2d": setup.mesh.n_p2() }),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Over [`TREND_KAPPAS`] (when all are in the sweep): whether the
/// discrepancy of `method` falls strictly, and whether it starts above the
/// band and ends below it.
pub fn trend(rows: &[ComparisonRow], method: &str, band: f64) -> Option<(bool, bool)> {
    let d: Option<Vec<f64>> = TREND_KAPPAS
        .iter()
        .map(|k| rows.iter().find(|r| r.method == method && r.kappa == *k).map(|r| r.relative_max))
        .collect();
    let d = d?;
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let crosses = d[0] > band && d[d.len() - 1] < band;
    Some((decreasing, crosses))
}

/// Least-squares line through the centerline pressure of every edge,
/// sampled at least three channel widths away from junction polygons.
/// Returns `(edge, slope, R²)` and writes `pressure_edge{e}.csv`.
fn pressure_fits(setup: &Setup, pressure: &tubeflow_core::femcore::Field, out: &Artifacts) -> Result<Vec<(usize, f64, f64)>> {
    let g = &setup.graph;
    let loc = Locator::new(&setup.mesh);
    let mut fits = Vec::new();
    for (e, edge) in g.edges.iter().enumerate() {
        let pad = |n: usize| if g.degree(n) > 1 { setup.domain.trims[n] + 3.0 * g.width(e) } else { 0.0 };
        let (lo, hi) = (pad(edge.from), edge.length - pad(edge.to));
        let n = 101;
        let s: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let p: Vec<f64> = s
            .iter()
            .map(|&x| {
                let pt = g.point_at(e, x, 0.0);
                pressure.eval(&loc, pt).ok_or(tubeflow_core::Error::UncoveredPoint { x: pt.x, y: pt.y })
            })
            .collect::<tubeflow_core::Result<_>>()
            .context(|| format!("pressure on edge {}", edge.id))?;
        let (a, b, r2) = linear_fit(&s, &p);
        out.csv(&format!("pressure_edge{e}.csv"), &["x1", "p", "p_fit"], s.iter().zip(&p).map(|(x, v)| vec![*x, *v, a * x + b]))?;
        fits.push((e, a, r2));
    }
    Ok(fits)
}
