//! Conservative 1D finite elements on the graph: P2 Galerkin, or P1 with
//! Scharfetter–Gummel fluxes on convection-dominated edges.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::femcore::{SparseSystem, TripletBuilder};
use crate::tubegraph::TubeGraph;
use crate::{Error, Result};

/// Per-edge constant coefficients of `-a c'' + v c' - r c = f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCoefficients {
    /// `ϰ θ`
    pub a: f64,
    /// `⟨V_p⟩_θ`, signed along the edge orientation.
    pub v: f64,
    /// `2 β`
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fitting {
    /// Exponential fitting on edges whose element Péclet number exceeds 2.
    #[default]
    Auto,
    Never,
    Always,
}

/// Uniform axial grid of an edge with `n` intervals (`n + 1` points).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGrid {
    pub length: f64,
    pub n: usize,
}

impl EdgeGrid {
    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.length * i as f64 / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.x(i)).collect()
    }
}

/// Nodal solution of one network problem.
#[derive(Debug, Clone)]
pub struct NetworkSolve {
    pub values: Vec<Vec<f64>>,
    pub nodal: Vec<f64>,
    /// `[start, finish]` derivatives pointing away from the node.
    pub end_derivatives: Vec<[f64; 2]>,
    /// `Σ a_e ∂c/∂x (away)` at each node.
    pub kirchhoff: Vec<f64>,
    pub peclet: Vec<f64>,
    pub fitted: Vec<bool>,
}

struct Layout {
    offsets: Vec<usize>,
    n_dofs: usize,
}

impl Layout {
    fn new(graph: &TubeGraph, grids: &[EdgeGrid]) -> Self {
        let mut offsets = Vec::with_capacity(grids.len());
        let mut next = graph.nodes.len();
        for g in grids {
            offsets.push(next);
            next += g.n - 1;
        }
        Self { offsets, n_dofs: next }
    }

    fn dof(&self, graph: &TubeGraph, e: usize, n: usize, i: usize) -> usize {
        if i == 0 {
            graph.edges[e].from
        } else if i == n {
            graph.edges[e].to
        } else {
            self.offsets[e] + i - 1
        }
    }
}

const P2_STIFF: [[f64; 3]; 3] = [[7.0, -8.0, 1.0], [-8.0, 16.0, -8.0], [1.0, -8.0, 7.0]];
const P2_MASS: [[f64; 3]; 3] = [[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 4.0]];
const P2_CONV: [[f64; 3]; 3] = [[-3.0, 4.0, -1.0], [-4.0, 0.0, 4.0], [1.0, -4.0, 3.0]];

fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

/// Local matrix entries `(row, col, value)` and right-hand side `(row, value)`
/// of one edge, in grid-point indices.
pub(crate) fn edge_system(c: EdgeCoefficients, grid: EdgeGrid, f: &[f64], fitted: bool) -> (Vec<(usize, usize, f64)>, Vec<(usize, f64)>) {
    let n = grid.n;
    let h = grid.h();
    let mut mat = Vec::new();
    let mut rhs = Vec::new();
    if fitted {
        let p = c.v * h / c.a;
        let (bm, bp) = (bernoulli(-p), bernoulli(p));
        for i in 0..n {
            // J = (a/h)(B(-P) c_l - B(P) c_r); row l gets +J, row r gets -J
            let k = c.a / h;
            for (row, s) in [(i, 1.0), (i + 1, -1.0)] {
                mat.push((row, i, s * k * bm));
                mat.push((row, i + 1, -s * k * bp));
            }
            for j in [i, i + 1] {
                mat.push((j, j, -0.5 * c.r * h));
                rhs.push((j, 0.5 * h * f[j]));
            }
        }
        // back to the non-conservative convection form at both ends
        mat.push((0, 0, -c.v));
        mat.push((n, n, c.v));
    } else {
        let big = 2.0 * h;
        for el in 0..n / 2 {
            let ids = [2 * el, 2 * el + 1, 2 * el + 2];
            for r in 0..3 {
                for s in 0..3 {
                    let v = c.a * P2_STIFF[r][s] / (3.0 * big) + c.v * P2_CONV[r][s] / 6.0
                        - c.r * big * P2_MASS[r][s] / 30.0;
                    mat.push((ids[r], ids[s], v));
                    rhs.push((ids[r], big * P2_MASS[r][s] / 30.0 * f[ids[s]]));
                }
            }
        }
    }
    (mat, rhs)
}

pub fn element_peclet(c: EdgeCoefficients, grid: EdgeGrid) -> f64 {
    c.v.abs() * grid.h() / c.a
}

/// Solves `-a c'' + v c' - r c = f` on every edge with value continuity,
/// natural flux balance `Σ a ∂c/∂x (away) = 0` at free nodes and Dirichlet
/// values where `fixed` returns one. `f` is given at grid points.
pub fn solve_network(
    graph: &TubeGraph,
    coeffs: &[EdgeCoefficients],
    grids: &[EdgeGrid],
    f: &[Vec<f64>],
    fixed: &dyn Fn(usize) -> Option<f64>,
    fitting: Fitting,
) -> Result<NetworkSolve> {
    let lay = Layout::new(graph, grids);
    let mut tb = TripletBuilder::new(lay.n_dofs, lay.n_dofs);
    let mut b = vec![0.0; lay.n_dofs];
    let mut locals = Vec::with_capacity(grids.len());
    let mut peclet = Vec::new();
    let mut fitted = Vec::new();
    for (e, (&c, &g)) in coeffs.iter().zip(grids).enumerate() {
        if g.n < 2 || g.n % 2 != 0 || !(c.a > 0.0) {
            return Err(Error::InvalidInput(alloc::format!("edge {e}: need an even interval count and a > 0")));
        }
        let pe = element_peclet(c, g);
        let fit = match fitting {
            Fitting::Auto => pe > 2.0,
            Fitting::Never => false,
            Fitting::Always => true,
        };
        peclet.push(pe);
        fitted.push(fit);
        let (m, r) = edge_system(c, g, &f[e], fit);
        for &(i, j, v) in &m {
            tb.add(lay.dof(graph, e, g.n, i), lay.dof(graph, e, g.n, j), v);
        }
        for &(i, v) in &r {
            b[lay.dof(graph, e, g.n, i)] += v;
        }
        locals.push((m, r));
    }
    let mut sys = SparseSystem::new(tb.build(), b);
    for n in 0..graph.nodes.len() {
        if let Some(q) = fixed(n) {
            sys.fix(n, q)?;
        }
    }
    let u = sys.solve()?;
    let mut values = Vec::with_capacity(grids.len());
    let mut end_derivatives = Vec::with_capacity(grids.len());
    let mut kirchhoff = vec![0.0; graph.nodes.len()];
    for (e, g) in grids.iter().enumerate() {
        let vals: Vec<f64> = (0..=g.n).map(|i| u[lay.dof(graph, e, g.n, i)]).collect();
        // consistent end fluxes from the edge's own residual rows
        let mut res = [0.0; 2];
        let slot = |i: usize| if i == 0 { Some(0) } else if i == g.n { Some(1) } else { None };
        for &(i, j, v) in &locals[e].0 {
            if let Some(k) = slot(i) {
                res[k] += v * vals[j];
            }
        }
        for &(i, v) in &locals[e].1 {
            if let Some(k) = slot(i) {
                res[k] -= v;
            }
        }
        let a = coeffs[e].a;
        end_derivatives.push([-res[0] / a, -res[1] / a]);
        kirchhoff[graph.edges[e].from] -= res[0];
        kirchhoff[graph.edges[e].to] -= res[1];
        values.push(vals);
    }
    let nodal = u[..graph.nodes.len()].to_vec();
    for n in 0..graph.nodes.len() {
        if fixed(n).is_some() {
            kirchhoff[n] = 0.0;
        }
    }
    Ok(NetworkSolve { values, nodal, end_derivatives, kirchhoff, peclet, fitted })
}
