//! Conforming triangle meshes with tagged boundaries and a P2 node table.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::basis::TriGeom;
use crate::geometry::{orient, Point};
use crate::tubegraph::{BoundaryTag, Owner};
use crate::{Error, Result};

/// Graph entity a triangle was generated for.
pub type Region = Owner;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    /// Vertices, ordered so that the domain lies on the left.
    pub v: [usize; 2],
    /// Index into [`Mesh::edges`].
    pub edge: usize,
    pub tag: BoundaryTag,
    pub triangle: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub boundary: Vec<BoundaryEdge>,
    /// Unique undirected edges `(min, max)`; P2 midpoint `k` sits on edge `k`.
    pub edges: Vec<[usize; 2]>,
    /// For triangle `t`, the edges between local vertices (0,1), (1,2), (2,0).
    pub tri_edges: Vec<[usize; 3]>,
    pub h: f64,
}

pub const MIN_ANGLE_DEG: f64 = 20.0;

impl Mesh {
    /// Builds the connectivity tables and validates the mesh: positive
    /// areas, conformity, one tag per boundary edge and the angle bound.
    pub fn from_parts(
        vertices: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        tagged: &BTreeMap<(usize, usize), BoundaryTag>,
        h: f64,
    ) -> Result<Mesh> {
        if regions.len() != triangles.len() {
            return Err(Error::InvalidInput("one region per triangle required".into()));
        }
        for t in triangles.iter_mut() {
            let a = orient(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if a < 0.0 {
                t.swap(1, 2);
            } else if a == 0.0 {
                return Err(Error::MeshQualityFailure { worst_angle_deg: 0.0 });
            }
        }
        let mut edge_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges = Vec::new();
        let mut users: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (ti, t) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let idx = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    users.push(Vec::new());
                    edges.len() - 1
                });
                users[idx].push((ti, k));
                te[k] = idx;
            }
            tri_edges.push(te);
        }
        let mut boundary = Vec::new();
        for (idx, u) in users.iter().enumerate() {
            match u.len() {
                1 => {
                    let (ti, k) = u[0];
                    let t = triangles[ti];
                    let v = [t[k], t[(k + 1) % 3]];
                    let key = (edges[idx][0], edges[idx][1]);
                    let Some(&tag) = tagged.get(&key) else {
                        let p = vertices[v[0]].lerp(vertices[v[1]], 0.5);
                        return Err(Error::UnknownTag(format!("untagged boundary edge at ({}, {})", p.x, p.y)));
                    };
                    boundary.push(BoundaryEdge { v, edge: idx, tag, triangle: ti });
                }
                2 => {}
                n => {
                    return Err(Error::InvalidInput(format!("non-conforming mesh: edge shared by {n} triangles")));
                }
            }
        }
        let mesh = Mesh { vertices, triangles, regions, boundary, edges, tri_edges, h };
        let worst = mesh.min_angle_deg();
        if worst < MIN_ANGLE_DEG {
            return Err(Error::MeshQualityFailure { worst_angle_deg: worst });
        }
        Ok(mesh)
    }

    /// Copy with every coordinate multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Mesh {
        let mut m = self.clone();
        m.vertices.iter_mut().for_each(|v| *v = *v * factor);
        m.h *= factor;
        m
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of P2 nodes (vertices followed by edge midpoints).
    pub fn n_p2(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    pub fn p2_dofs(&self, t: usize) -> [usize; 6] {
        let v = self.triangles[t];
        let e = self.tri_edges[t];
        let nv = self.vertices.len();
        [v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2]]
    }

    pub fn p2_node(&self, i: usize) -> Point {
        let nv = self.vertices.len();
        if i < nv {
            self.vertices[i]
        } else {
            let [a, b] = self.edges[i - nv];
            self.vertices[a].lerp(self.vertices[b], 0.5)
        }
    }

    pub fn p2_nodes(&self) -> Vec<Point> {
        (0..self.n_p2()).map(|i| self.p2_node(i)).collect()
    }

    /// P2 nodes of a boundary edge: its two vertices and the midpoint.
    pub fn boundary_p2(&self, b: &BoundaryEdge) -> [usize; 3] {
        [b.v[0], b.v[1], self.vertices.len() + b.edge]
    }

    pub fn geom(&self, t: usize) -> TriGeom {
        let v = self.triangles[t];
        TriGeom::new([self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.geom(t).area).sum()
    }

    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        self.boundary
            .iter()
            .filter(|b| b.tag == tag)
            .map(|b| self.vertices[b.v[0]].dist(self.vertices[b.v[1]]))
            .sum()
    }

    pub fn tags(&self) -> Vec<BoundaryTag> {
        let mut t: Vec<BoundaryTag> = self.boundary.iter().map(|b| b.tag).collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn min_angle_deg(&self) -> f64 {
        let mut worst = 180.0f64;
        for t in &self.triangles {
            for k in 0..3 {
                let p = self.vertices[t[k]];
                let a = self.vertices[t[(k + 1) % 3]] - p;
                let b = self.vertices[t[(k + 2) % 3]] - p;
                let ang = a.cross(b).abs().atan2(a.dot(b)).to_degrees();
                worst = worst.min(ang);
            }
        }
        worst
    }

    /// Vertices lying on boundary edges with the given tag.
    pub fn tagged_vertices(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary.iter().filter(|b| b.tag == tag).flat_map(|b| b.v).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// P2 nodes lying on boundary edges with the given tag.
    pub fn tagged_p2(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> =
            self.boundary.iter().filter(|b| b.tag == tag).flat_map(|b| self.boundary_p2(b)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Uniform bucket grid over triangle bounding boxes for point location.
#[derive(Debug, Clone)]
pub struct Locator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    pub fn new(mesh: &Mesh) -> Self {
        let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in &mesh.vertices {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let area = mesh.area().max(f64::MIN_POSITIVE);
        let cell = (area / mesh.triangles.len().max(1) as f64).sqrt() * 2.0;
        let nx = (((hi.x - lo.x) / cell).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize).max(1);
        let mut loc = Locator { origin: lo, cell, nx, ny, buckets: vec![Vec::new(); nx * ny] };
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let ps = t.map(|v| mesh.vertices[v]);
            let (i0, j0) = loc.cell_of(Point::new(ps[0].x.min(ps[1].x).min(ps[2].x), ps[0].y.min(ps[1].y).min(ps[2].y)));
            let (i1, j1) = loc.cell_of(Point::new(ps[0].x.max(ps[1].x).max(ps[2].x), ps[0].y.max(ps[1].y).max(ps[2].y)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.buckets[j * nx + i].push(ti);
                }
            }
        }
        loc
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.cell).floor();
        let fy = ((p.y - self.origin.y) / self.cell).floor();
        let i = if fx < 0.0 { 0 } else { (fx as usize).min(self.nx - 1) };
        let j = if fy < 0.0 { 0 } else { (fy as usize).min(self.ny - 1) };
        (i, j)
    }

    /// Triangle containing `p` and its barycentric coordinates. Points within
    /// a relative tolerance of an element are accepted.
    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<(usize, [f64; 3])> {
        let (i, j) = self.cell_of(p);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.nx + i] {
            let l = mesh.geom(t).barycentric(p);
            let m = l[0].min(l[1]).min(l[2]);
            if m >= 0.0 {
                return Some((t, l));
            }
            if best.map_or(true, |b| m > b.2) {
                best = Some((t, l, m));
            }
        }
        match best {
            Some((t, l, m)) if m > -1e-9 => {
                let c = l.map(|x| x.max(0.0));
                let s = c[0] + c[1] + c[2];
                Some((t, c.map(|x| x / s)))
            }
            _ => None,
        }
    }
}
