use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{k_sweep, log_slope, transport_point, PointInput, RunOptions, Setup};
use crate::artifacts::Artifacts;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{Check, RunReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    /// `‖avg(c_2D) - c̄₀‖` in L² along the network.
    pub error_l2: f64,
    pub error_max: f64,
    pub dofs_2d: usize,
    pub runtime_s: f64,
}

/// Averaged 2D solution against the leading 1D profile for every ε of the
/// configuration, at the first diffusivity of the sweep.
pub fn epsilon_sweep(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<EpsilonPoint>> {
    let kappa = cfg.kappas()[0];
    cfg.numerics
        .epsilons
        .par_iter()
        .map(|&eps| {
            let t = Instant::now();
            let setup = Setup::from_config(cfg, cfg.graph_spec_at(eps)?)?;
            let stokes = setup.stokes()?;
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
            let p = transport_point(&input, kappa)?;
            let (max, l2) = p.discrepancy(&samples, &p.avg_1d);
            Ok(EpsilonPoint { epsilon: eps, error_l2: l2, error_max: max, dofs_2d: setup.mesh.n_p2(), runtime_s: t.elapsed().as_secs_f64() })
        })
        .collect()
}

/// Observed order in ε of the averaged 2D to 1D distance and, when more than
/// one zoom factor is configured, the hybrid error against `K`.
pub fn run_convergence(cfg: &ExperimentConfig, opts: RunOptions, out: &Artifacts) -> Result<RunReport> {
    let start = Instant::now();
    let points = epsilon_sweep(cfg, opts)?;
    let eps: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let err: Vec<f64> = points.iter().map(|p| p.error_l2).collect();
    let slope = log_slope(&eps, &err)?;
    out.csv("epsilon_convergence.csv", &["epsilon", "error_l2", "error_max"], points.iter().map(|p| vec![p.epsilon, p.error_l2, p.error_max]))?;
    let mut checks = vec![Check::at_least("epsilon_slope", slope, cfg.tolerances.min_slope)];
    let mut details = serde_json::json!({ "kappa": cfg.kappas()[0], "epsilon": points, "epsilon_slope": slope });
    if cfg.numerics.mapdd_k.len() > 1 {
        let ks = k_sweep(cfg, opts, out)?;
        let mut sorted = ks.clone();
        sorted.sort_by(|a, b| a.k.total_cmp(&b.k));
        let ok = sorted.windows(2).all(|w| w[1].report.h1_relative <= w[0].report.h1_relative);
        checks.push(Check::holds("mapdd_error_non_increasing_in_k", ok));
        details["mapdd"] = serde_json::to_value(&ks).expect("serializable");
    }
    Ok(RunReport {
        scenario: cfg.scenario.name().into(),
        band: cfg.band(),
        rows: Vec::new(),
        checks,
        details,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
