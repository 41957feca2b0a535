use std::time::Instant;

use serde::{Deserialize, Serialize};
use tubeflow_core::asym1d::{solve_leading, Settings1D};
use tubeflow_core::blcells::{
    solve_junction_cell, solve_port_cell, solve_stokes_stenosis_cell, solve_transport_strip_cell, CellProblemResult,
    JunctionCellDomain, StripCellData, StripDomain,
};
use tubeflow_core::transport2d::TransportParams;
use tubeflow_core::tubegraph::End;

use super::{timed, RunOptions, Setup};
use crate::artifacts::Artifacts;
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::report::{Check, RunReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    /// `junction`, `stokes_stenosis`, `transport_stenosis` or `port`.
    pub kind: String,
    pub feature: String,
    pub q_tilde: Vec<f64>,
    pub decay_rates: Vec<f64>,
    pub c_plus: Option<f64>,
    pub g: Option<f64>,
    pub sensitivity: f64,
    pub solvability_defect: f64,
    pub n_dofs: usize,
    pub runtime_s: f64,
    pub file: Option<String>,
}

impl CellReport {
    fn from_result(kind: &str, feature: String, r: &CellProblemResult, runtime_s: f64, file: String) -> Self {
        Self {
            kind: kind.into(),
            feature,
            q_tilde: r.q_tilde.clone(),
            decay_rates: r.decay_rates.clone(),
            c_plus: r.c_plus,
            g: r.g,
            sensitivity: r.sensitivity,
            solvability_defect: r.solvability_defect,
            n_dofs: r.n_dofs,
            runtime_s,
            file: Some(file),
        }
    }
}

/// Boundary-layer cell problems of every junction, stenosis and port of the
/// geometry, fed with the leading-order network data.
pub fn run_cells(cfg: &ExperimentConfig, _opts: RunOptions, out: &Artifacts) -> Result<RunReport> {
    let start = Instant::now();
    let setup = Setup::from_config(cfg, cfg.graph_spec()?)?;
    let g = &setup.graph;
    let kappa = cfg.kappas()[0];
    let (len, h) = (cfg.numerics.cell_length, cfg.numerics.cell_h);
    let params = TransportParams::new(kappa, cfg.physics.beta).with_graph_perturbations(g);
    let settings = Settings1D { n_per_edge: cfg.numerics.n_per_edge, ..Settings1D::default() };
    let leading = solve_leading(g, &setup.flow, &params, settings).context(|| "1D leading order".into())?;
    let mut cells = Vec::new();

    for node in 0..g.nodes.len() {
        let id = g.nodes[node].id;
        if g.has_junction(node) {
            let cell = JunctionCellDomain::from_graph(g, node, len, h);
            let slopes: Vec<f64> = g
                .incident(node)
                .iter()
                .map(|inc| leading.end_derivatives[0][inc.edge][if inc.end == End::Start { 0 } else { 1 }])
                .collect();
            let (r, t) = timed(|| solve_junction_cell(&cell, kappa, &slopes));
            let r = r.context(|| format!("junction cell of node {id}"))?;
            let file = format!("cell_junction_node{id}.csv");
            out.field(&file, &r.field, "u")?;
            cells.push(CellReport::from_result("junction", format!("node {id}"), &r, t, file));
        } else if let Some((q, _)) = g.port_data(node) {
            let layer = solve_port_cell(g, node, q, leading.nodal[0][node]).context(|| format!("port cell of node {id}"))?;
            cells.push(CellReport {
                kind: "port".into(),
                feature: format!("node {id}"),
                q_tilde: vec![layer.jump],
                decay_rates: Vec::new(),
                c_plus: None,
                g: None,
                sensitivity: 0.0,
                solvability_defect: 0.0,
                n_dofs: 0,
                runtime_s: 0.0,
                file: None,
            });
        }
    }

    let strip = StripDomain::new(len, h).context(|| "strip cell".into())?;
    for (e, edge) in g.edges.iter().enumerate() {
        for (i, st) in edge.stenoses.iter().enumerate() {
            let feature = format!("stenosis {i} of edge {}", edge.id);
            if !st.viscosity.is_zero() {
                let (r, t) = timed(|| solve_stokes_stenosis_cell(&strip, setup.mu, st.viscosity, setup.flow.c1[e]));
                let r = r.context(|| format!("Stokes cell of {feature}"))?;
                let file = format!("cell_stokes_edge{}_{i}.csv", edge.id);
                out.field(&file, &r.field, "u")?;
                cells.push(CellReport::from_result("stokes_stenosis", feature.clone(), &r, t, file));
            }
            if !st.diffusivity.is_zero() {
                let dx = leading.grids[e].h();
                let slope = (leading.value(0, e, st.s + dx) - leading.value(0, e, st.s - dx)) / (2.0 * dx);
                let data = StripCellData { kappa, bump: st.diffusivity, slope };
                let (r, t) = timed(|| solve_transport_strip_cell(&strip, &data));
                let r = r.context(|| format!("transport cell of {feature}"))?;
                let file = format!("cell_transport_edge{}_{i}.csv", edge.id);
                out.field(&file, &r.field, "u")?;
                cells.push(CellReport::from_result("transport_stenosis", feature, &r, t, file));
            }
        }
    }
    out.json("cells.json", &cells)?;
    let positive = cells.iter().all(|c| c.decay_rates.iter().all(|r| *r > 0.0));
    Ok(RunReport {
        scenario: cfg.scenario.name().into(),
        band: cfg.band(),
        rows: Vec::new(),
        checks: vec![Check::holds("decay_rates_positive", positive)],
        details: serde_json::json!({ "kappa": kappa, "cells": cells }),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
