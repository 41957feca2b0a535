//! Asymptotic network model: the leading 1D convection-diffusion-sorption
//! problem on the graph, the transverse corrector recursion, the wall
//! corrector and the 2D reconstruction of the truncated ansatz.
//!
//! In every edge the velocity is `A (θ²/4 - ξ₂²)` with `ξ₂ = x₂/ε`, and the
//! mean profile solves `-ϰθ c̄'' + ⟨V⟩ c̄' - 2β c̄ = θ g`.

mod ansatz;
mod corrector;
pub mod network;
pub mod poly;

use alloc::vec::Vec;

pub use ansatz::{ansatz_residual, reconstruct_2d, AsymptoticAnsatz, LayerPatch, ResidualReport};
pub use corrector::{corrector_recursion, wall_corrector, Corrector, TransversePolynomial};
pub use network::{EdgeCoefficients, EdgeGrid, Fitting};

use crate::stokes2d::NetworkFlow;
use crate::transport2d::TransportParams;
use crate::tubegraph::TubeGraph;
use crate::{Error, Result};

/// `∫ A (θ²/4 - ξ²) dξ` over `|ξ| ≤ θ/2`.
pub fn mean_velocity(theta: f64, amplitude: f64) -> f64 {
    amplitude * theta * theta * theta / 6.0
}

/// Quintic smoothstep cutoff: 0 for `|t| ≤ 1`, 1 for `|t| ≥ 2`, C² between.
pub fn cutoff(t: f64) -> f64 {
    let s = (t.abs() - 1.0).clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings1D {
    /// Intervals per edge; must be even (pairs form P2 elements).
    pub n_per_edge: usize,
    pub fitting: Fitting,
}

impl Default for Settings1D {
    fn default() -> Self {
        Self { n_per_edge: 512, fitting: Fitting::Auto }
    }
}

/// Mean profiles `c̄ⱼ` on uniform per-edge grids.
#[derive(Debug, Clone)]
pub struct Edge1DSolution {
    pub grids: Vec<EdgeGrid>,
    pub coefficients: Vec<EdgeCoefficients>,
    /// Velocity amplitude `A` of each edge.
    pub amplitudes: Vec<f64>,
    pub thetas: Vec<f64>,
    /// `profiles[j][edge][i]`
    pub profiles: Vec<Vec<Vec<f64>>>,
    /// Right-hand sides the profiles were solved with, same layout.
    pub sources: Vec<Vec<Vec<f64>>>,
    /// `nodal[j][node]`
    pub nodal: Vec<Vec<f64>>,
    /// `end_derivatives[j][edge] = [start, finish]`, pointing away from the node.
    pub end_derivatives: Vec<Vec<[f64; 2]>>,
    /// Leading-order `Σ ϰθ ∂c̄₀/∂x (away)` per node (zero at ports).
    pub kirchhoff: Vec<f64>,
    pub peclet: Vec<f64>,
    pub fitted: Vec<bool>,
    pub fitting: Fitting,
    pub kappa: f64,
    pub beta: f64,
}

impl Edge1DSolution {
    pub fn peclet_warning(&self) -> bool {
        self.peclet.iter().any(|&p| p > 2.0)
    }

    pub fn order(&self) -> usize {
        self.profiles.len() - 1
    }

    /// `c̄ⱼ` of `edge` at arc length `s` from its start.
    pub fn value(&self, j: usize, edge: usize, s: f64) -> f64 {
        poly::interpolate(&self.profiles[j][edge], self.grids[edge].h(), s)
    }
}

pub(crate) fn edge_data(graph: &TubeGraph, flow: &NetworkFlow, params: &TransportParams, n: usize) -> (Vec<EdgeGrid>, Vec<EdgeCoefficients>, Vec<f64>) {
    let mut grids = Vec::new();
    let mut coeffs = Vec::new();
    let mut amps = Vec::new();
    for (e, edge) in graph.edges.iter().enumerate() {
        let a = flow.amplitude(graph, e);
        grids.push(EdgeGrid { length: edge.length, n });
        coeffs.push(EdgeCoefficients {
            a: params.kappa * edge.theta,
            v: mean_velocity(edge.theta, a),
            r: 2.0 * params.beta,
        });
        amps.push(a);
    }
    (grids, coeffs, amps)
}

/// Leading-order network solve: `c̄₀ = q_t` at ports, continuity and
/// Kirchhoff balance at interior nodes.
pub fn solve_leading(graph: &TubeGraph, flow: &NetworkFlow, params: &TransportParams, settings: Settings1D) -> Result<Edge1DSolution> {
    if flow.flux.len() != graph.edges.len() {
        return Err(Error::SetupMismatch("flow does not match the graph".into()));
    }
    if !(params.kappa > 0.0) {
        return Err(Error::InvalidInput("kappa must be positive".into()));
    }
    let (grids, coefficients, amplitudes) = edge_data(graph, flow, params, settings.n_per_edge);
    let f: Vec<Vec<f64>> = grids
        .iter()
        .enumerate()
        .map(|(e, g)| {
            let th = graph.edges[e].theta;
            g.points().iter().map(|&x| params.source.as_ref().map_or(0.0, |s| th * s(e, x))).collect()
        })
        .collect();
    let sol = network::solve_network(graph, &coefficients, &grids, &f, &|n| graph.port_data(n).map(|p| p.0), settings.fitting)?;
    Ok(Edge1DSolution {
        thetas: graph.edges.iter().map(|e| e.theta).collect(),
        grids,
        coefficients,
        amplitudes,
        profiles: alloc::vec![sol.values],
        sources: alloc::vec![f],
        nodal: alloc::vec![sol.nodal],
        end_derivatives: alloc::vec![sol.end_derivatives],
        kirchhoff: sol.kirchhoff,
        peclet: sol.peclet,
        fitted: sol.fitted,
        fitting: settings.fitting,
        kappa: params.kappa,
        beta: params.beta,
    })
}
