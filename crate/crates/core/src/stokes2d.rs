//! Steady Stokes flow with variable viscosity (Taylor-Hood P2/P1), Poiseuille
//! analytics, the hydraulic resistance network and the streamfunction.

use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::femcore::assemble::{assemble_scalar, ScalarForm};
use crate::femcore::basis::{p2_gradients, p2_line_values, p2_values};
use crate::femcore::quadrature::{gauss3, triangle_degree5};
use crate::femcore::{CsrMatrix, Family, Field, Mesh, SparseSystem, TripletBuilder};
use crate::geometry::{point_in_polygon, Point};
use crate::tubegraph::{BoundaryTag, End, RadialBump, TubeGraph};
use crate::{Error, Result};

/// Localized perturbation `f((x - center)/ε)` written in a rotated frame
/// whose first axis is `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBump {
    pub center: Point,
    pub axis: Point,
    pub scale: f64,
    pub bump: RadialBump,
}

impl LocalBump {
    pub fn xi(&self, x: Point) -> Point {
        let d = (x - self.center) * (1.0 / self.scale);
        Point::new(d.dot(self.axis), d.dot(self.axis.perp()))
    }

    pub fn value(&self, x: Point) -> f64 {
        self.bump.value(self.xi(x))
    }

    /// Physical gradient of the perturbation.
    pub fn gradient(&self, x: Point) -> Point {
        let g = self.bump.gradient(self.xi(x));
        (self.axis * g.x + self.axis.perp() * g.y) * (1.0 / self.scale)
    }

    /// Divergence-free velocity field of the bump (see [`RadialBump::curl`]),
    /// in physical axes.
    pub fn curl(&self, x: Point) -> Point {
        let v = self.bump.curl(self.xi(x));
        self.axis * v.x + self.axis.perp() * v.y
    }
}

/// Viscosity `μ + Σ M((x - x̄)/ε)`, overridden by `ω` on fictitious regions
/// (decided per element from its centroid).
#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityField {
    pub mu: f64,
    pub perturbations: Vec<LocalBump>,
    pub fictitious: Vec<(Vec<Point>, f64)>,
}

impl ViscosityField {
    pub fn constant(mu: f64) -> Self {
        Self { mu, perturbations: Vec::new(), fictitious: Vec::new() }
    }

    /// Base viscosity plus the viscosity perturbations of every stenosis.
    pub fn from_graph(graph: &TubeGraph, mu: f64) -> Self {
        let mut perturbations = Vec::new();
        for (k, e) in graph.edges.iter().enumerate() {
            for st in &e.stenoses {
                if !st.viscosity.is_zero() {
                    perturbations.push(LocalBump {
                        center: graph.point_at(k, st.s, 0.0),
                        axis: e.dir,
                        scale: graph.epsilon,
                        bump: st.viscosity,
                    });
                }
            }
        }
        Self { mu, perturbations, fictitious: Vec::new() }
    }

    pub fn with_fictitious(mut self, polygon: Vec<Point>, omega: f64) -> Self {
        self.fictitious.push((polygon, omega));
        self
    }

    pub fn smooth_value(&self, x: Point) -> f64 {
        self.mu + self.perturbations.iter().map(|b| b.value(x)).sum::<f64>()
    }

    pub fn value(&self, x: Point, centroid: Point) -> f64 {
        for (poly, omega) in &self.fictitious {
            if point_in_polygon(centroid, poly) {
                return *omega;
            }
        }
        self.smooth_value(x)
    }

    /// Guaranteed lower bound of the smooth part (each bump peaks at its
    /// amplitude).
    pub fn lower_bound(&self) -> f64 {
        self.mu + self.perturbations.iter().map(|b| b.bump.amplitude.min(0.0)).sum::<f64>()
    }
}

/// Dirichlet velocity data on one boundary tag.
pub struct VelocityBc<'a> {
    pub tag: BoundaryTag,
    pub profile: Box<dyn Fn(Point) -> Point + 'a>,
}

#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub velocity: Field,
    pub pressure: Field,
    pub divergence_l2: f64,
    /// Outward flux through every non-wall tag.
    pub port_fluxes: Vec<(BoundaryTag, f64)>,
}

/// Velocity-velocity block and divergence block of the Taylor-Hood
/// discretization: `A` over `[ux, uy]` (size `2 n_p2`) and `B` with one row
/// per vertex, `B_kj = -∫ ψ_k div φ_j`.
pub fn stokes_blocks(mesh: &Mesh, visc: &ViscosityField) -> (CsrMatrix, CsrMatrix) {
    let n2 = mesh.n_p2();
    let nv = mesh.n_vertices();
    let mut a = TripletBuilder::new(2 * n2, 2 * n2);
    let mut b = TripletBuilder::new(nv, 2 * n2);
    let rule = triangle_degree5();
    for t in 0..mesh.n_triangles() {
        let g = mesh.geom(t);
        let centroid = g.point([1.0 / 3.0; 3]);
        let d = mesh.p2_dofs(t);
        let v = mesh.triangles[t];
        let mut ke = [[[0.0; 6]; 6]; 4];
        let mut be = [[[0.0; 6]; 3]; 2];
        for q in &rule {
            let w = g.area * q.weight;
            let mu = visc.value(g.point(q.bary), centroid) * w;
            let gr = p2_gradients(&g, q.bary);
            for i in 0..6 {
                for j in 0..6 {
                    ke[0][i][j] += mu * (2.0 * gr[j].x * gr[i].x + gr[j].y * gr[i].y);
                    ke[1][i][j] += mu * gr[j].x * gr[i].y;
                    ke[2][i][j] += mu * gr[j].y * gr[i].x;
                    ke[3][i][j] += mu * (gr[j].x * gr[i].x + 2.0 * gr[j].y * gr[i].y);
                }
            }
            for k in 0..3 {
                for j in 0..6 {
                    be[0][k][j] -= w * q.bary[k] * gr[j].x;
                    be[1][k][j] -= w * q.bary[k] * gr[j].y;
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                a.add(d[i], d[j], ke[0][i][j]);
                a.add(d[i], n2 + d[j], ke[1][i][j]);
                a.add(n2 + d[i], d[j], ke[2][i][j]);
                a.add(n2 + d[i], n2 + d[j], ke[3][i][j]);
            }
        }
        for k in 0..3 {
            for j in 0..6 {
                b.add(v[k], d[j], be[0][k][j]);
                b.add(v[k], n2 + d[j], be[1][k][j]);
            }
        }
    }
    (a.build(), b.build())
}

/// Net outward flux of Dirichlet data over all tagged boundary edges it
/// covers, by 3-point Gauss quadrature per edge.
fn prescribed_outflow(mesh: &Mesh, bcs: &[VelocityBc]) -> (f64, f64) {
    let (mut net, mut abs) = (0.0, 0.0);
    for be in &mesh.boundary {
        if let Some(bc) = bcs.iter().find(|b| b.tag == be.tag) {
            let (a, b) = (mesh.vertices[be.v[0]], mesh.vertices[be.v[1]]);
            let n = outward_normal(a, b);
            let len = a.dist(b);
            let f: f64 = gauss3().iter().map(|&(s, w)| w * len * (bc.profile)(a.lerp(b, s)).dot(n)).sum();
            net += f;
            abs += f.abs();
        }
    }
    (net, abs)
}

/// Outward unit normal of a boundary edge traversed with the domain on the left.
pub fn outward_normal(a: Point, b: Point) -> Point {
    let t = (b - a).normalized();
    Point::new(t.y, -t.x)
}

/// Taylor-Hood solve with no-slip on lateral walls and Dirichlet data on the
/// listed tags. The pressure is returned with zero mean.
pub fn solve_stokes(
    mesh: &Arc<Mesh>,
    visc: &ViscosityField,
    bcs: &[VelocityBc],
    body_force: Option<&dyn Fn(Point) -> Point>,
) -> Result<StokesSolution> {
    if !(visc.lower_bound() > 0.0) {
        return Err(Error::InvalidInput(format!("viscosity lower bound {} is not positive", visc.lower_bound())));
    }
    let tags = mesh.tags();
    for bc in bcs {
        if !tags.contains(&bc.tag) {
            return Err(Error::UnknownTag(format!("{:?}", bc.tag)));
        }
    }
    for t in &tags {
        if *t != BoundaryTag::LateralWall && !bcs.iter().any(|b| b.tag == *t) {
            return Err(Error::UnknownTag(format!("no velocity data for {t:?}")));
        }
    }
    let (net, abs) = prescribed_outflow(mesh, bcs);
    if net.abs() > 1e-10 * abs.max(f64::MIN_POSITIVE) && net.abs() > 1e-300 {
        return Err(Error::IncompatibleFlux { net });
    }
    let n2 = mesh.n_p2();
    let nv = mesh.n_vertices();
    let (a, b) = stokes_blocks(mesh, visc);
    let n = 2 * n2 + nv;
    let mut tb = TripletBuilder::new(n, n);
    for i in 0..a.n_rows {
        for (j, v) in a.row(i) {
            tb.add(i, j, v);
        }
    }
    for k in 0..b.n_rows {
        for (j, v) in b.row(k) {
            tb.add(2 * n2 + k, j, v);
            tb.add(j, 2 * n2 + k, v);
        }
    }
    let mut rhs = vec![0.0; n];
    if let Some(f) = body_force {
        for t in 0..mesh.n_triangles() {
            let g = mesh.geom(t);
            let d = mesh.p2_dofs(t);
            for q in triangle_degree5() {
                let fx = f(g.point(q.bary));
                let phi = p2_values(q.bary);
                for i in 0..6 {
                    rhs[d[i]] += g.area * q.weight * fx.x * phi[i];
                    rhs[n2 + d[i]] += g.area * q.weight * fx.y * phi[i];
                }
            }
        }
    }
    let mut sys = SparseSystem::new(tb.build(), rhs);
    for be in mesh.boundary.iter().filter(|b| b.tag == BoundaryTag::LateralWall) {
        for d in mesh.boundary_p2(be) {
            sys.fix(d, 0.0)?;
            sys.fix(n2 + d, 0.0)?;
        }
    }
    for be in &mesh.boundary {
        let Some(bc) = bcs.iter().find(|b| b.tag == be.tag) else { continue };
        for d in mesh.boundary_p2(be) {
            if sys.is_fixed(d) {
                continue;
            }
            let u = (bc.profile)(mesh.p2_node(d));
            sys.fix(d, u.x)?;
            sys.fix(n2 + d, u.y)?;
        }
    }
    sys.fix(2 * n2, 0.0)?;
    let x = sys.solve()?;
    let mesh_rc = mesh.clone();
    let velocity = Field::new(mesh_rc.clone(), Family::P2Vector, x[..2 * n2].to_vec())?;
    let mut pressure = Field::new(mesh_rc, Family::P1, x[2 * n2..].to_vec())?;
    let mean = pressure.integrate(|_, v, _| v[0]) / mesh.area();
    pressure.values.iter_mut().for_each(|p| *p -= mean);
    let divergence_l2 = divergence_norm(&velocity);
    let port_fluxes = tags
        .iter()
        .filter(|t| **t != BoundaryTag::LateralWall)
        .map(|&t| (t, boundary_flux(&velocity, t)))
        .collect();
    Ok(StokesSolution { velocity, pressure, divergence_l2, port_fluxes })
}

pub fn divergence_norm(u: &Field) -> f64 {
    let m = &u.mesh;
    let mut s = 0.0;
    for t in 0..m.n_triangles() {
        let g = m.geom(t);
        for q in triangle_degree5() {
            let d = u.gradient_in(t, q.bary, 0).x + u.gradient_in(t, q.bary, 1).y;
            s += g.area * q.weight * d * d;
        }
    }
    s.sqrt()
}

/// Outward flux `∫ u·n ds` of a vector field over all edges with `tag`.
pub fn boundary_flux(u: &Field, tag: BoundaryTag) -> f64 {
    let m = &u.mesh;
    let mut s = 0.0;
    for be in m.boundary.iter().filter(|b| b.tag == tag) {
        let (a, b) = (m.vertices[be.v[0]], m.vertices[be.v[1]]);
        let n = outward_normal(a, b);
        let len = a.dist(b);
        let d = m.boundary_p2(be);
        let n2 = m.n_p2();
        for (x, w) in gauss3() {
            let phi = p2_line_values(x);
            let ux: f64 = (0..3).map(|k| phi[k] * u.values[d[k]]).sum();
            let uy: f64 = (0..3).map(|k| phi[k] * u.values[n2 + d[k]]).sum();
            s += w * len * (ux * n.x + uy * n.y);
        }
    }
    s
}

/// Plane Poiseuille flow `u(x₂) = c1/(2μ) (x₂² - w²/4)` with pressure
/// `c1 x₁ + c2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poiseuille {
    pub c1: f64,
    pub mu: f64,
    pub width: f64,
}

pub fn poiseuille_profile(c1: f64, mu: f64, width: f64) -> Poiseuille {
    Poiseuille { c1, mu, width }
}

impl Poiseuille {
    /// Profile with the given flux.
    pub fn with_flux(q: f64, mu: f64, width: f64) -> Self {
        Self { c1: -12.0 * mu * q / width.powi(3), mu, width }
    }

    pub fn velocity(&self, x2: f64) -> f64 {
        self.c1 / (2.0 * self.mu) * (x2 * x2 - 0.25 * self.width * self.width)
    }

    pub fn flux(&self) -> f64 {
        -self.c1 * self.width.powi(3) / (12.0 * self.mu)
    }
}

/// Per-edge fluxes (positive from the edge's first to second node), pressure
/// gradients and nodal pressures of the resistance network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFlow {
    pub flux: Vec<f64>,
    pub c1: Vec<f64>,
    pub pressure: Vec<f64>,
    pub mu: f64,
}

impl NetworkFlow {
    /// Amplitude `A` of the scaled profile `A(θ²/4 - ξ₂²)` carrying the edge flux.
    pub fn amplitude(&self, graph: &TubeGraph, edge: usize) -> f64 {
        let theta = graph.edges[edge].theta;
        6.0 * self.flux[edge] / (graph.epsilon * theta.powi(3))
    }

    /// Mass balance residual `inflow - Σ outgoing flux` at every node.
    pub fn kirchhoff_residuals(&self, graph: &TubeGraph) -> Vec<f64> {
        (0..graph.nodes.len())
            .map(|n| {
                let inflow = graph.port_data(n).map_or(0.0, |p| p.1);
                let out: f64 = graph
                    .incident(n)
                    .iter()
                    .map(|inc| match inc.end {
                        End::Start => self.flux[inc.edge],
                        End::Finish => -self.flux[inc.edge],
                    })
                    .sum();
                inflow - out
            })
            .collect()
    }
}

/// Hydraulic resistance of an edge, `12 μ |e| / (θ ε)³`.
pub fn resistance(graph: &TubeGraph, edge: usize, mu: f64) -> f64 {
    12.0 * mu * graph.edges[edge].length / graph.width(edge).powi(3)
}

/// Solves the resistance network driven by the port inflows of the graph
/// (positive into the domain). The first port is the pressure reference.
pub fn solve_network_flow(graph: &TubeGraph, mu: f64) -> Result<NetworkFlow> {
    let ports: Vec<usize> = graph.ports().collect();
    let Some(&ground) = ports.first() else {
        return Err(Error::FloatingNetwork);
    };
    let inflow: Vec<f64> = (0..graph.nodes.len()).map(|n| graph.port_data(n).map_or(0.0, |p| p.1)).collect();
    let net: f64 = inflow.iter().sum();
    let total: f64 = inflow.iter().map(|q| q.abs()).sum();
    if net.abs() > 1e-12 * total.max(1.0) {
        return Err(Error::IncompatibleFlux { net });
    }
    let n = graph.nodes.len();
    let mut tb = TripletBuilder::new(n, n);
    for (k, e) in graph.edges.iter().enumerate() {
        let c = 1.0 / resistance(graph, k, mu);
        tb.add(e.from, e.from, c);
        tb.add(e.to, e.to, c);
        tb.add(e.from, e.to, -c);
        tb.add(e.to, e.from, -c);
    }
    let mut sys = SparseSystem::new(tb.build(), inflow);
    sys.fix(ground, 0.0)?;
    let pressure = sys.solve()?;
    let flux: Vec<f64> = graph
        .edges
        .iter()
        .enumerate()
        .map(|(k, e)| (pressure[e.from] - pressure[e.to]) / resistance(graph, k, mu))
        .collect();
    let c1 = graph
        .edges
        .iter()
        .map(|e| (pressure[e.to] - pressure[e.from]) / e.length)
        .collect();
    Ok(NetworkFlow { flux, c1, pressure, mu })
}

/// Streamfunction with `∂ψ/∂x = -u_y`, `∂ψ/∂y = u_x`: boundary values by
/// integrating the normal flux along each boundary loop, interior by the
/// Poisson problem `Δψ = ∂u_x/∂y - ∂u_y/∂x`. The gauge is ψ = 0 at the
/// first vertex of each loop.
pub fn streamfunction(u: &Field) -> Result<Field> {
    let m = u.mesh.clone();
    let n2 = m.n_p2();
    let mut next = alloc::collections::BTreeMap::new();
    for (i, be) in m.boundary.iter().enumerate() {
        next.insert(be.v[0], i);
    }
    let mut values: Vec<Option<f64>> = vec![None; n2];
    let mut visited = vec![false; m.boundary.len()];
    let mut worst: f64 = 0.0;
    let scale = u.max_abs() * m.h.max(1e-300);
    for start in 0..m.boundary.len() {
        if visited[start] {
            continue;
        }
        let mut psi = 0.0;
        let mut cur = start;
        values[m.boundary[cur].v[0]] = Some(0.0);
        loop {
            visited[cur] = true;
            let be = m.boundary[cur];
            let (a, b) = (m.vertices[be.v[0]], m.vertices[be.v[1]]);
            let d = m.boundary_p2(&be);
            let nrm = outward_normal(a, b);
            let len = a.dist(b);
            let flux_between = |s0: f64, s1: f64| -> f64 {
                gauss3()
                    .iter()
                    .map(|&(x, w)| {
                        let s = s0 + (s1 - s0) * x;
                        let phi = p2_line_values(s);
                        let ux: f64 = (0..3).map(|k| phi[k] * u.values[d[k]]).sum();
                        let uy: f64 = (0..3).map(|k| phi[k] * u.values[n2 + d[k]]).sum();
                        w * (s1 - s0) * len * (ux * nrm.x + uy * nrm.y)
                    })
                    .sum()
            };
            values[d[2]] = Some(psi + flux_between(0.0, 0.5));
            psi += flux_between(0.0, 1.0);
            match next.get(&be.v[1]) {
                Some(&nx) if nx == start => {
                    worst = worst.max(psi.abs());
                    break;
                }
                Some(&nx) if !visited[nx] => {
                    values[be.v[1]] = Some(psi);
                    cur = nx;
                }
                _ => return Err(Error::NonClosedBoundaryIntegral { mismatch: f64::INFINITY }),
            }
        }
    }
    if worst > 1e-6 && worst > 1e-6 * scale {
        return Err(Error::NonClosedBoundaryIntegral { mismatch: worst });
    }
    let uref = u.clone();
    let form = ScalarForm {
        diffusion: Some(Box::new(|_, _| 1.0)),
        source: Some(Box::new(move |x, t| {
            let g = uref.mesh.geom(t);
            let l = g.barycentric(x);
            uref.gradient_in(t, l, 1).x - uref.gradient_in(t, l, 0).y
        })),
        ..Default::default()
    };
    let (a, rhs) = assemble_scalar(&m, Family::P2, &form)?;
    let mut sys = SparseSystem::new(a, rhs);
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            sys.fix(i, *v)?;
        }
    }
    Field::new(m, Family::P2, sys.solve()?)
}

/// Element-wise residual norms of a Stokes solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesResidual {
    pub momentum_l2: f64,
    pub divergence_l2: f64,
}

/// L² norms of the strong momentum residual `-div(μ(∇u + ∇uᵀ)) + ∇p`
/// inside elements and of `div u`.
pub fn stokes_residual(sol: &StokesSolution, visc: &ViscosityField) -> StokesResidual {
    let u = &sol.velocity;
    let m = &u.mesh;
    let n2 = m.n_p2();
    let mut s = 0.0;
    for t in 0..m.n_triangles() {
        let g = m.geom(t);
        let centroid = g.point([1.0 / 3.0; 3]);
        let d = m.p2_dofs(t);
        // second derivatives of P2 basis are constant per element
        let gb = g.grad_bary;
        let hess = |i: usize| -> [[f64; 2]; 2] {
            let pair = |a: Point, b: Point, c: f64| {
                [[c * (a.x * b.x + b.x * a.x), c * (a.x * b.y + b.x * a.y)], [c * (a.y * b.x + b.y * a.x), c * (a.y * b.y + b.y * a.y)]]
            };
            match i {
                0..=2 => pair(gb[i], gb[i], 2.0),
                3 => pair(gb[0], gb[1], 4.0),
                4 => pair(gb[1], gb[2], 4.0),
                _ => pair(gb[2], gb[0], 4.0),
            }
        };
        let mut hx = [[0.0; 2]; 2];
        let mut hy = [[0.0; 2]; 2];
        for i in 0..6 {
            let h = hess(i);
            for a in 0..2 {
                for b in 0..2 {
                    hx[a][b] += h[a][b] * u.values[d[i]];
                    hy[a][b] += h[a][b] * u.values[n2 + d[i]];
                }
            }
        }
        let grad_p = sol.pressure.gradient_in(t, [1.0 / 3.0; 3], 0);
        for q in triangle_degree5() {
            let x = g.point(q.bary);
            let mu = visc.value(x, centroid);
            let in_fict = visc.fictitious.iter().any(|(p, _)| point_in_polygon(centroid, p));
            let gmu = if in_fict {
                Point::default()
            } else {
                visc.perturbations.iter().fold(Point::default(), |acc, b| acc + b.gradient(x))
            };
            let gux = u.gradient_in(t, q.bary, 0);
            let guy = u.gradient_in(t, q.bary, 1);
            // symmetric gradient D = ∇u + ∇uᵀ
            let dxx = 2.0 * gux.x;
            let dxy = gux.y + guy.x;
            let dyy = 2.0 * guy.y;
            let div_dx = 2.0 * hx[0][0] + hx[1][1] + hy[0][1];
            let div_dy = hx[0][1] + hy[0][0] + 2.0 * hy[1][1];
            let rx = -(mu * div_dx + gmu.x * dxx + gmu.y * dxy) + grad_p.x;
            let ry = -(mu * div_dy + gmu.x * dxy + gmu.y * dyy) + grad_p.y;
            s += g.area * q.weight * (rx * rx + ry * ry);
        }
    }
    StokesResidual { momentum_l2: s.sqrt(), divergence_l2: divergence_norm(u) }
}

/// Dirichlet data for every port of a graph-built mesh: the Poiseuille trace
/// carrying the network flux of the port edge.
pub fn port_poiseuille_bcs<'a>(graph: &'a TubeGraph, flow: &'a NetworkFlow) -> Vec<VelocityBc<'a>> {
    graph
        .ports()
        .map(|node| {
            let inc = graph.incident(node)[0];
            let e = inc.edge;
            let prof = Poiseuille::with_flux(flow.flux[e], flow.mu, graph.width(e));
            let dir = graph.edges[e].dir;
            VelocityBc {
                tag: BoundaryTag::Port(node),
                profile: Box::new(move |x: Point| {
                    let (_, t) = graph.local_coords(e, x);
                    dir * prof.velocity(t)
                }),
            }
        })
        .collect()
}
