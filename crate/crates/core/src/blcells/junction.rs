//! Junction and port layers of the transport equation.

use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::{extract_stabilization, fit_decay_rate, Branch, CellProblemResult};
use crate::asym1d::{cutoff, LayerPatch};
use crate::femcore::assemble::{assemble_scalar, ScalarForm};
use crate::femcore::{mesh_domain, Family, Field, Locator, SparseSystem};
use crate::geometry::Point;
use crate::tubegraph::{build_graph, instantiate_domain, EdgeSpec, GraphSpec, NodeKind, NodeSpec, TubeGraph};
use crate::{Error, Result};

pub const SOLVABILITY_TOL: f64 = 1e-6;
/// End-window audit: `|U - q̃ᵢ| ≤ DECAY_TOL ‖U‖∞`.
pub const DECAY_TOL: f64 = 1e-6;

/// Junction of straight half-strips leaving the origin in the unit
/// `directions`, with widths `thetas`, truncated at length `length`.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionCellDomain {
    pub directions: Vec<Point>,
    pub thetas: Vec<f64>,
    pub length: f64,
    pub h: f64,
}

impl JunctionCellDomain {
    /// Cell of an interior node of a network graph.
    pub fn from_graph(graph: &TubeGraph, node: usize, length: f64, h: f64) -> Self {
        let inc = graph.incident(node);
        Self {
            directions: inc.iter().map(|&i| graph.outward(i)).collect(),
            thetas: inc.iter().map(|i| graph.edges[i.edge].theta).collect(),
            length,
            h,
        }
    }

    /// Graph at `ε = 1/2` whose physical domain, scaled by 2, is the cell.
    fn graph(&self) -> Result<TubeGraph> {
        if self.directions.len() != self.thetas.len() || self.directions.len() < 2 {
            return Err(Error::InvalidInput(format!("junction cell needs matching directions and widths")));
        }
        if !(self.length >= 10.0) {
            return Err(Error::InvalidInput(format!("junction branch length {} below 10", self.length)));
        }
        let mut nodes = vec![NodeSpec { id: 0, position: Point::default(), kind: NodeKind::Bifurcation }];
        let mut edges = Vec::new();
        for (i, (d, &theta)) in self.directions.iter().zip(&self.thetas).enumerate() {
            let kind = NodeKind::EntranceExit { q: 0.0, inflow: 0.0 };
            nodes.push(NodeSpec { id: i + 1, position: d.normalized() * (0.5 * self.length), kind });
            edges.push(EdgeSpec { id: i, from: 0, to: i + 1, theta, stenoses: Vec::new() });
        }
        build_graph(&GraphSpec { epsilon: 0.5, nodes, edges })
    }

    pub fn branches(&self) -> Vec<Branch> {
        self.directions
            .iter()
            .zip(&self.thetas)
            .map(|(d, &theta)| Branch { origin: Point::default(), axis: d.normalized(), half_width: 0.5 * theta, length: self.length })
            .collect()
    }
}

/// Cutoff `ρ(t)` (0 below 1, 1 above 2) and its first two derivatives.
fn cutoff_derivatives(t: f64) -> (f64, f64, f64) {
    let x = t - 1.0;
    if x <= 0.0 || x >= 1.0 {
        return (cutoff(t), 0.0, 0.0);
    }
    let d1 = 30.0 * x * x * (1.0 - x) * (1.0 - x);
    let d2 = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
    (cutoff(t), d1, d2)
}

/// Junction layer: `U` harmonic in the cell with zero flux on the walls and
/// `U ~ sᵢ dᵢ + q̃ᵢ` along branch `i`, where `dᵢ` is the outward slope of
/// the leading 1D profile. Returned is the bounded part
/// `W = U - Σ ρ(sᵢ/r₀) sᵢ dᵢ`, shifted so that `Σ θᵢ q̃ᵢ = 0`.
pub fn solve_junction_cell(cell: &JunctionCellDomain, kappa: f64, slopes: &[f64]) -> Result<CellProblemResult> {
    if slopes.len() != cell.directions.len() {
        return Err(Error::SetupMismatch(format!("{} slopes for {} branches", slopes.len(), cell.directions.len())));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!("diffusivity {kappa} is not positive")));
    }
    let flux: f64 = cell.thetas.iter().zip(slopes).map(|(t, d)| kappa * t * d).sum();
    let scale: f64 = cell.thetas.iter().zip(slopes).map(|(t, d)| (kappa * t * d).abs()).sum();
    let defect = if scale > 0.0 { flux.abs() / scale } else { 0.0 };
    if defect > SOLVABILITY_TOL {
        return Err(Error::SolvabilityViolation { defect });
    }

    let graph = cell.graph()?;
    let domain = instantiate_domain(&graph)?;
    let trim = 2.0 * domain.trims[0];
    let mesh = Arc::new(mesh_domain(&domain, 0.5 * cell.h)?.scaled(2.0));
    let branches = cell.branches();
    let r0 = trim.max(1.0);
    if 2.0 * r0 + 1.0 > cell.length - 3.0 {
        return Err(Error::TruncationTooShort { end_ratio: (2.0 * r0 + 1.0) / (cell.length - 3.0) });
    }

    let source = {
        let branches = branches.clone();
        let slopes = slopes.to_vec();
        move |x: Point, _| {
            for (b, &d) in branches.iter().zip(&slopes) {
                let s = x.dot(b.axis);
                if s > r0 && x.dot(b.axis.perp()).abs() <= b.half_width + 1e-9 {
                    let (_, r1, r2) = cutoff_derivatives(s / r0);
                    return kappa * d * (2.0 * r1 / r0 + s * r2 / (r0 * r0));
                }
            }
            0.0
        }
    };
    let form = ScalarForm { diffusion: Some(Box::new(move |_, _| kappa)), source: Some(Box::new(source)), ..Default::default() };
    let (a, mut rhs) = assemble_scalar(&mesh, Family::P2, &form)?;
    // remove the quadrature residue of the compatibility condition
    let ones = ScalarForm { source: Some(Box::new(|_, _| 1.0)), ..Default::default() };
    let (_, mass) = assemble_scalar(&mesh, Family::P2, &ones)?;
    let total: f64 = rhs.iter().sum();
    let area: f64 = mass.iter().sum();
    rhs.iter_mut().zip(&mass).for_each(|(r, m)| *r -= total * m / area);
    let mut sys = SparseSystem::new(a, rhs);
    sys.fix(0, 0.0)?;
    let mut field = Field::new(mesh.clone(), Family::P2, sys.solve()?)?;
    let loc = Locator::new(&mesh);

    let far = (cell.length - 3.0, cell.length - 1.0);
    let mut stab = Vec::new();
    for b in &branches {
        stab.push(extract_stabilization(&field, &loc, b, far)?);
    }
    let width: f64 = cell.thetas.iter().sum();
    let shift = stab.iter().zip(&cell.thetas).map(|(s, t)| s.constant * t).sum::<f64>() / width;
    field.values.iter_mut().for_each(|v| *v -= shift);
    let q: Vec<f64> = stab.iter().map(|s| s.constant - shift).collect();

    let umax = field.max_abs();
    let mut end = 0.0f64;
    for (b, qi) in branches.iter().zip(&q) {
        for i in 0..=16 {
            let s = far.0 + (far.1 - far.0) * i as f64 / 16.0;
            for j in 0..=4 {
                let t = b.half_width * (-1.0 + 0.5 * j as f64);
                if let Some(u) = field.eval(&loc, b.point(s, t)) {
                    end = end.max((u - qi).abs());
                }
            }
        }
    }
    if umax > 0.0 && end > DECAY_TOL * umax {
        return Err(Error::TruncationTooShort { end_ratio: end / umax });
    }

    let mut rates = Vec::new();
    for b in &branches {
        rates.push(fit_decay_rate(&field, &loc, b, 2.0 * r0 + 0.5, 3.0)?);
    }
    let n_dofs = field.values.len();
    Ok(CellProblemResult {
        field,
        pressure: None,
        locator: loc,
        constants: q.clone(),
        q_tilde: q,
        decay_rates: rates,
        sensitivity: stab.iter().fold(0.0f64, |m, s| m.max(s.sensitivity)),
        c_plus: None,
        g: None,
        solvability_defect: defect,
        n_dofs,
    })
}

/// Port layer `U₀ = (1 - ρ(ξ₁)) (q - c̄₀(port))`, with `ξ₁` the scaled
/// distance from the port face into the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortLayer {
    pub origin: Point,
    /// Unit vector into the channel.
    pub axis: Point,
    pub half_width: f64,
    pub epsilon: f64,
    pub jump: f64,
}

impl PortLayer {
    pub fn xi(&self, x: Point) -> Point {
        let d = (x - self.origin) * (1.0 / self.epsilon);
        Point::new(d.dot(self.axis), d.dot(self.axis.perp()))
    }

    /// Layer value at scaled coordinates.
    pub fn scaled_value(&self, xi: Point) -> f64 {
        (1.0 - cutoff(xi.x)) * self.jump
    }
}

impl LayerPatch for PortLayer {
    fn value(&self, x: Point) -> Option<f64> {
        let xi = self.xi(x);
        let inside = xi.x >= -1e-9 && xi.x <= 2.0 && xi.y.abs() * self.epsilon <= self.half_width * (1.0 + 1e-9);
        inside.then(|| self.scaled_value(xi))
    }
}

/// Port layer at a port node of `graph`, matching the prescribed value `q`
/// with the 1D trace `c_port`.
pub fn solve_port_cell(graph: &TubeGraph, node: usize, q: f64, c_port: f64) -> Result<PortLayer> {
    if !graph.is_port(node) {
        return Err(Error::InvalidInput(format!("node {node} is not a port")));
    }
    let inc = graph.incident(node)[0];
    Ok(PortLayer {
        origin: graph.nodes[node].position,
        axis: graph.outward(inc),
        half_width: 0.5 * graph.width(inc.edge),
        epsilon: graph.epsilon,
        jump: q - c_port,
    })
}
