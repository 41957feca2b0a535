//! Truncated asymptotic ansatz
//! `c⁽ᵏ⁾ = Σ_{j≤k} εʲ c̄ⱼ + Σ_{j≤k+1} εʲ c̃ⱼ + ε^{k+2} ĉ`,
//! where `ĉ` cancels the wall defect left by the order-k term.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::corrector::{corrector_recursion, wall_corrector, TransversePolynomial};
use super::poly;
use num_traits::Float;
use super::Edge1DSolution;
use crate::femcore::{Family, Field, Mesh};
use crate::geometry::Point;
use crate::tubegraph::{Owner, PolygonalDomain, TubeGraph};
use crate::{Error, Result};

/// Additive boundary-layer correction, defined near a feature.
pub trait LayerPatch {
    /// Contribution at a physical point, `None` outside the patch.
    fn value(&self, x: Point) -> Option<f64>;
}

#[derive(Debug, Clone)]
pub struct AsymptoticAnsatz {
    pub k: usize,
    pub epsilon: f64,
    /// `c̄₀ … c̄ₖ`
    pub solution: Edge1DSolution,
    /// `c̃₀ … c̃ₖ₊₁`
    pub tilde: Vec<TransversePolynomial>,
    /// Wall corrector `ĉ` built from the traces of `c̄ₖ + c̃ₖ`.
    pub wall: TransversePolynomial,
    /// Full polynomial in `ξ₂` at every grid point, `[edge][point]`.
    pub composite: Vec<Vec<Vec<f64>>>,
}

impl AsymptoticAnsatz {
    pub fn build(graph: &TubeGraph, leading: &Edge1DSolution, k: usize) -> Result<Self> {
        let corr = corrector_recursion(graph, leading, k)?;
        let sol = corr.solution;
        let eps = graph.epsilon;
        let mut wall = Vec::new();
        let mut composite = Vec::new();
        for (e, g) in sol.grids.iter().enumerate() {
            let hw = 0.5 * sol.thetas[e];
            let trace = |side: f64| -> Vec<f64> {
                (0..=g.n).map(|i| sol.profiles[k][e][i] + poly::eval(&corr.tilde[k].coeffs[e][i], side * hw)).collect()
            };
            let w = wall_corrector(&trace(1.0), &trace(-1.0), sol.thetas[e], sol.kappa, sol.beta);
            let rows: Vec<Vec<f64>> = (0..=g.n)
                .map(|i| {
                    let mut p = Vec::new();
                    for j in 0..=k {
                        poly::add_scaled(&mut p, &[sol.profiles[j][e][i]], eps.powi(j as i32));
                    }
                    for (j, t) in corr.tilde.iter().enumerate() {
                        poly::add_scaled(&mut p, &t.coeffs[e][i], eps.powi(j as i32));
                    }
                    poly::add_scaled(&mut p, &w[i], eps.powi(k as i32 + 2));
                    p
                })
                .collect();
            composite.push(rows);
            wall.push(w);
        }
        Ok(Self {
            k,
            epsilon: eps,
            solution: sol,
            tilde: corr.tilde,
            wall: TransversePolynomial { order: k + 1, coeffs: wall },
            composite,
        })
    }

    /// Regular part at arc length `s` and physical transverse offset `t`.
    pub fn regular(&self, edge: usize, s: f64, t: f64) -> f64 {
        let g = self.solution.grids[edge];
        let rows = &self.composite[edge];
        let xi = t / self.epsilon;
        let width = rows[0].len();
        let mut p = alloc::vec![0.0; width];
        let mut col = alloc::vec![0.0; rows.len()];
        for (k, pk) in p.iter_mut().enumerate() {
            for (c, r) in col.iter_mut().zip(rows) {
                *c = r[k];
            }
            *pk = poly::interpolate(&col, g.h(), s.clamp(0.0, g.length));
        }
        poly::eval(&p, xi)
    }

    /// Nodal value `Σ εʲ c̄ⱼ(node)`.
    pub fn nodal(&self, node: usize) -> f64 {
        self.solution.nodal.iter().enumerate().map(|(j, v)| self.epsilon.powi(j as i32) * v[node]).sum()
    }

    /// Ansatz at a physical point: regular part in channels, nodal value in
    /// junction polygons, plus any layer patches covering the point.
    pub fn value(&self, domain: &PolygonalDomain, layers: &[&dyn LayerPatch], x: Point) -> Result<f64> {
        let base = match domain.locate(x) {
            Some(Owner::Edge(e)) => {
                let (s, t) = domain.graph.local_coords(e, x);
                self.regular(e, s, t)
            }
            Some(Owner::Node(n)) => self.nodal(n),
            None => return Err(Error::UncoveredPoint { x: x.x, y: x.y }),
        };
        Ok(base + layers.iter().filter_map(|l| l.value(x)).sum::<f64>())
    }
}

/// P2 interpolant of the ansatz on a mesh of the domain.
pub fn reconstruct_2d(ansatz: &AsymptoticAnsatz, domain: &PolygonalDomain, mesh: &Arc<Mesh>, layers: &[&dyn LayerPatch]) -> Result<Field> {
    let values = (0..mesh.n_p2()).map(|i| ansatz.value(domain, layers, mesh.p2_node(i))).collect::<Result<Vec<_>>>()?;
    Field::new(mesh.clone(), Family::P2, values)
}

/// Residual norms of the regular ansatz inside the channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub k: usize,
    /// L² norm of `-ϰΔc + V·∇c - g` over the channel rectangles.
    pub interior: f64,
    /// L² norm of `ϰ ∂c/∂n - εβ c` along the lateral walls.
    pub robin: f64,
    /// `interior / εᵏ`
    pub interior_scaled: f64,
}

pub fn ansatz_residual(ansatz: &AsymptoticAnsatz) -> ResidualReport {
    let sol = &ansatz.solution;
    let eps = ansatz.epsilon;
    let kappa = sol.kappa;
    let beta = sol.beta;
    let mut interior = 0.0;
    let mut robin = 0.0;
    for (e, g) in sol.grids.iter().enumerate() {
        let hw = 0.5 * sol.thetas[e];
        let rows = &ansatz.composite[e];
        let cx = poly::d1_rows(rows, g.h());
        let cxx = poly::d2_rows(rows, g.h());
        let vp = [sol.amplitudes[e] * hw * hw, 0.0, -sol.amplitudes[e]];
        for i in 0..=g.n {
            let w = if i == 0 || i == g.n { 0.5 * g.h() } else { g.h() };
            let src = sol.sources[0][e][i] / sol.thetas[e];
            let cxi = poly::derivative(&rows[i]);
            let cxixi = poly::derivative(&cxi);
            let mut r = poly::mul(&vp, &cx[i]);
            poly::add_scaled(&mut r, &cxx[i], -kappa);
            poly::add_scaled(&mut r, &cxixi, -kappa / (eps * eps));
            poly::add_scaled(&mut r, &[src], -1.0);
            // dx₂ = ε dξ
            interior += w * eps * poly::integral(&poly::mul(&r, &r), -hw, hw);
            for side in [1.0, -1.0] {
                let b = side * kappa * poly::eval(&cxi, side * hw) / eps - eps * beta * poly::eval(&rows[i], side * hw);
                robin += w * b * b;
            }
        }
    }
    let interior = interior.sqrt();
    ResidualReport {
        k: ansatz.k,
        interior,
        robin: robin.sqrt(),
        interior_scaled: interior / eps.powi(ansatz.k as i32),
    }
}
