//! Steady convection-diffusion with sorbing (Robin) walls and Dirichlet
//! ports: the 2D reference solver.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::femcore::assemble::{assemble_scalar, ScalarForm};
use crate::femcore::basis::p2_line_values;
use crate::femcore::quadrature::{gauss3, triangle_degree5};
use crate::femcore::{CsrMatrix, Family, Field, Locator, Mesh, Region, SparseSystem};
use crate::geometry::Point;
use crate::stokes2d::{outward_normal, LocalBump};
use crate::tubegraph::{BoundaryTag, TubeGraph};
use crate::{Error, Result};

/// Axial source `g(edge, s)`; it must vanish near edge endpoints.
pub type AxialSource = Arc<dyn Fn(usize, f64) -> f64>;

#[derive(Clone)]
pub struct TransportParams {
    pub kappa: f64,
    pub diffusivity: Vec<LocalBump>,
    /// Wall sorption coefficient in `K ∂c/∂n = ε β c`.
    pub beta: f64,
    pub source: Option<AxialSource>,
}

impl core::fmt::Debug for TransportParams {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TransportParams")
            .field("kappa", &self.kappa)
            .field("diffusivity", &self.diffusivity)
            .field("beta", &self.beta)
            .field("source", &self.source.is_some())
            .finish()
    }
}

impl TransportParams {
    pub fn new(kappa: f64, beta: f64) -> Self {
        Self { kappa, diffusivity: Vec::new(), beta, source: None }
    }

    /// Adds the diffusivity perturbations of every stenosis of the graph.
    pub fn with_graph_perturbations(mut self, graph: &TubeGraph) -> Self {
        for (k, e) in graph.edges.iter().enumerate() {
            for st in &e.stenoses {
                if !st.diffusivity.is_zero() {
                    self.diffusivity.push(LocalBump {
                        center: graph.point_at(k, st.s, 0.0),
                        axis: e.dir,
                        scale: graph.epsilon,
                        bump: st.diffusivity,
                    });
                }
            }
        }
        self
    }

    pub fn with_source(mut self, g: AxialSource) -> Self {
        self.source = Some(g);
        self
    }

    pub fn diffusivity_at(&self, x: Point) -> f64 {
        self.kappa + self.diffusivity.iter().map(|b| b.value(x)).sum::<f64>()
    }

    pub fn lower_bound(&self) -> f64 {
        self.kappa + self.diffusivity.iter().map(|b| b.bump.amplitude.min(0.0)).sum::<f64>()
    }

    /// Source at a physical point inside a channel region (zero in junctions).
    pub fn source_at(&self, graph: &TubeGraph, x: Point, region: Region) -> f64 {
        match (&self.source, region) {
            (Some(g), Region::Edge(e)) => g(e, graph.local_coords(e, x).0),
            _ => 0.0,
        }
    }
}

/// Velocity supplied to the transport solver.
#[derive(Clone, Copy)]
pub enum Velocity<'a> {
    Zero,
    /// P2 vector field on the transport mesh.
    Field(&'a Field),
    Analytic(&'a dyn Fn(Point) -> Point),
}

impl Velocity<'_> {
    pub fn at(&self, mesh: &Mesh, x: Point, t: usize) -> Point {
        match self {
            Velocity::Zero => Point::default(),
            Velocity::Field(f) => f.vector_in(t, mesh.geom(t).barycentric(x)),
            Velocity::Analytic(f) => f(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub concentration: Field,
    pub locator: Locator,
    /// Largest element Péclet number `|V| h_T / (2 K)`.
    pub peclet_max: f64,
    pub peclet_warning: bool,
    /// Outward total (diffusive + convective) flux through each port.
    pub port_fluxes: Vec<(BoundaryTag, f64)>,
    /// `ε β ∮_wall c ds`.
    pub wall_sorption: f64,
    /// `∫ g dx`.
    pub source_total: f64,
    /// `∮ c V·n - ∫ V·∇c`, which is `∫ c div V` for the discrete velocity.
    /// Zero for exactly solenoidal fields; Taylor–Hood velocities leave a
    /// small remainder near junctions.
    pub divergence_source: f64,
}

impl TransportSolution {
    /// Relative mismatch of `∫g + εβ∮c + ∫c div V = Σ port outflow`.
    pub fn conservation_defect(&self) -> f64 {
        let out: f64 = self.port_fluxes.iter().map(|p| p.1).sum();
        let scale = self.port_fluxes.iter().map(|p| p.1.abs()).sum::<f64>()
            + self.wall_sorption.abs()
            + self.source_total.abs()
            + self.divergence_source.abs();
        (out - self.source_total - self.wall_sorption - self.divergence_source).abs() / scale.max(f64::MIN_POSITIVE)
    }
}

/// Largest element Péclet number.
pub fn peclet(mesh: &Mesh, params: &TransportParams, velocity: Velocity) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..mesh.n_triangles() {
        let g = mesh.geom(t);
        let c = g.point([1.0 / 3.0; 3]);
        let v = g.vertices;
        let h = v[0].dist(v[1]).max(v[1].dist(v[2])).max(v[2].dist(v[0]));
        worst = worst.max(velocity.at(mesh, c, t).norm() * h / (2.0 * params.diffusivity_at(c)));
    }
    worst
}

/// Solves `-div(K∇c) + V·∇c = g` with `K ∂c/∂n = εβc` on lateral walls and
/// `c = q_t` on the listed port tags, in P2.
pub fn solve_transport(
    mesh: &Arc<Mesh>,
    graph: &TubeGraph,
    params: &TransportParams,
    velocity: Velocity,
    port_values: &[(BoundaryTag, f64)],
) -> Result<TransportSolution> {
    if !(params.lower_bound() > 0.0) {
        return Err(Error::InvalidInput(alloc::format!(
            "diffusivity lower bound {} is not positive",
            params.lower_bound()
        )));
    }
    let eps = graph.epsilon;
    let has_wall = mesh.tags().contains(&BoundaryTag::LateralWall);
    let m = mesh.clone();
    let form = ScalarForm {
        diffusion: Some(Box::new(|x, _| params.diffusivity_at(x))),
        convection: Some(Box::new(move |x, t| velocity.at(&m, x, t))),
        source: params.source.as_ref().map(|_| -> crate::femcore::assemble::ScalarFn {
            Box::new(|x, t| params.source_at(graph, x, mesh.regions[t]))
        }),
        robin: if has_wall && params.beta != 0.0 {
            vec![(BoundaryTag::LateralWall, -eps * params.beta)]
        } else {
            Vec::new()
        },
        ..Default::default()
    };
    let (a, b) = assemble_scalar(mesh, Family::P2, &form)?;
    let mut sys = SparseSystem::new(a, b);
    for &(tag, q) in port_values {
        let dofs = mesh.tagged_p2(tag);
        if dofs.is_empty() {
            return Err(Error::UnknownTag(alloc::format!("{tag:?}")));
        }
        for d in dofs {
            sys.fix(d, q)?;
        }
    }
    let c = sys.solve()?;
    finish(mesh, graph, params, velocity, &sys.matrix, &sys.rhs, c, port_values)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    mesh: &Arc<Mesh>,
    graph: &TubeGraph,
    params: &TransportParams,
    velocity: Velocity,
    a: &CsrMatrix,
    b: &[f64],
    c: Vec<f64>,
    port_values: &[(BoundaryTag, f64)],
) -> Result<TransportSolution> {
    let eps = graph.epsilon;
    let ac = a.matvec(&c);
    let residual: Vec<f64> = ac.iter().zip(b).map(|(x, y)| x - y).collect();
    let concentration = Field::new(mesh.clone(), Family::P2, c)?;
    let mut port_fluxes = Vec::new();
    for &(tag, _) in port_values {
        let diffusive: f64 = -mesh.tagged_p2(tag).iter().map(|&d| residual[d]).sum::<f64>();
        let convective = convective_flux(mesh, &concentration, velocity, tag);
        port_fluxes.push((tag, diffusive + convective));
    }
    let mut wall = 0.0;
    for be in mesh.boundary.iter().filter(|b| b.tag == BoundaryTag::LateralWall) {
        let (p, q) = (mesh.vertices[be.v[0]], mesh.vertices[be.v[1]]);
        let d = mesh.boundary_p2(be);
        for (s, w) in gauss3() {
            let phi = p2_line_values(s);
            wall += w * p.dist(q) * (0..3).map(|k| phi[k] * concentration.values[d[k]]).sum::<f64>();
        }
    }
    let mut source_total = 0.0;
    if params.source.is_some() {
        for t in 0..mesh.n_triangles() {
            let g = mesh.geom(t);
            for qp in triangle_degree5() {
                source_total += g.area * qp.weight * params.source_at(graph, g.point(qp.bary), mesh.regions[t]);
            }
        }
    }
    let mut divergence_source = 0.0;
    if !matches!(velocity, Velocity::Zero) {
        for t in 0..mesh.n_triangles() {
            let g = mesh.geom(t);
            for qp in triangle_degree5() {
                let x = g.point(qp.bary);
                divergence_source -= g.area * qp.weight * velocity.at(mesh, x, t).dot(concentration.gradient_in(t, qp.bary, 0));
            }
        }
        for tag in mesh.tags() {
            divergence_source += convective_flux(mesh, &concentration, velocity, tag);
        }
    }
    let pe = peclet(mesh, params, velocity);
    Ok(TransportSolution {
        locator: Locator::new(mesh),
        concentration,
        peclet_max: pe,
        peclet_warning: pe > 2.0,
        port_fluxes,
        wall_sorption: eps * params.beta * wall,
        source_total,
        divergence_source,
    })
}

fn convective_flux(mesh: &Mesh, c: &Field, velocity: Velocity, tag: BoundaryTag) -> f64 {
    let mut s = 0.0;
    for be in mesh.boundary.iter().filter(|b| b.tag == tag) {
        let (p, q) = (mesh.vertices[be.v[0]], mesh.vertices[be.v[1]]);
        let n = outward_normal(p, q);
        let d = mesh.boundary_p2(be);
        for (x, w) in gauss3() {
            let phi = p2_line_values(x);
            let cv: f64 = (0..3).map(|k| phi[k] * c.values[d[k]]).sum();
            let pt = p.lerp(q, x);
            s += w * p.dist(q) * cv * velocity.at(mesh, pt, be.triangle).dot(n);
        }
    }
    s
}

/// Cross-sectional averages `(1/(θε)) ∫ c dx₂` of a field at axial offsets
/// of `edge`, by composite Gauss quadrature across the channel.
pub fn cross_section_average(
    field: &Field,
    locator: &Locator,
    graph: &TubeGraph,
    trims: &[f64],
    edge: usize,
    samples: &[f64],
) -> Result<Vec<f64>> {
    let e = &graph.edges[edge];
    let w = 0.5 * graph.width(edge);
    let (lo, hi) = (trims[e.from], e.length - trims[e.to]);
    let pieces = 8 * ((2.0 * w / field.mesh.h).ceil() as usize).max(1);
    samples
        .iter()
        .map(|&s| {
            if s < lo - 1e-12 || s > hi + 1e-12 {
                return Err(Error::OutsideChannel { edge: e.id, position: s });
            }
            let s = s.clamp(lo, hi);
            let mut sum = 0.0;
            for k in 0..pieces {
                let t0 = -w + 2.0 * w * k as f64 / pieces as f64;
                let dt = 2.0 * w / pieces as f64;
                for (x, wq) in gauss3() {
                    let p = graph.point_at(edge, s, t0 + dt * x);
                    let v = field.eval(locator, p).ok_or(Error::OutsideChannel { edge: e.id, position: s })?;
                    sum += wq * dt * v;
                }
            }
            Ok(sum / (2.0 * w))
        })
        .collect()
}

/// Total flux density `-K∇c + V c`, averaged at P2 nodes over incident
/// elements.
pub fn total_flux_density(sol: &TransportSolution, params: &TransportParams, velocity: Velocity) -> Field {
    let c = &sol.concentration;
    let m = c.mesh.clone();
    let n2 = m.n_p2();
    let mut acc = vec![Point::default(); n2];
    let mut count = vec![0usize; n2];
    for t in 0..m.n_triangles() {
        let g = m.geom(t);
        let d = m.p2_dofs(t);
        for (k, l) in crate::femcore::basis::P2_NODES.iter().enumerate() {
            let x = g.point(*l);
            let f = c.gradient_in(t, *l, 0) * (-params.diffusivity_at(x)) + velocity.at(&m, x, t) * c.value_in(t, *l, 0);
            acc[d[k]] = acc[d[k]] + f;
            count[d[k]] += 1;
        }
    }
    let mut values = vec![0.0; 2 * n2];
    for i in 0..n2 {
        let f = acc[i] * (1.0 / count[i] as f64);
        values[i] = f.x;
        values[n2 + i] = f.y;
    }
    Field { mesh: m, family: Family::P2Vector, values }
}
