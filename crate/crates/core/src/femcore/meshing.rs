//! Mesh generation: mapped structured triangulations of channel rectangles
//! and constrained Delaunay triangulations of junction polygons, glued
//! through shared end-face vertices.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::mesh::{Mesh, Region};
use crate::geometry::{boundary_distance, orient, point_in_polygon, Point};
use crate::tubegraph::{BoundaryTag, EdgeRect, End, JunctionPolygon, Owner, PolygonalDomain, TubeGraph};
use crate::{Error, Result};

/// Boundary status of a rectangle end face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    /// Glued to another piece.
    Interior,
    Tagged(BoundaryTag),
}

/// Axial grading: spacing `h` within `inner` of `center`, `outer_h` beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grading {
    pub center: f64,
    pub inner: f64,
    pub outer_h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectPiece {
    pub rect: EdgeRect,
    pub start_face: Face,
    pub end_face: Face,
    /// Axial offsets that must coincide with mesh lines.
    pub breaks: Vec<f64>,
    pub grading: Option<Grading>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Rect(RectPiece),
    Junction(JunctionPolygon),
}

/// Pieces covering the whole domain; `breaks[e]` lists extra axial mesh
/// lines for edge `e` (may be empty).
pub fn domain_pieces(domain: &PolygonalDomain, breaks: &[Vec<f64>]) -> Vec<Piece> {
    let g = &domain.graph;
    let mut pieces = Vec::new();
    for r in &domain.rects {
        let e = &g.edges[r.edge];
        let face = |node: usize| {
            if g.degree(node) > 1 {
                Face::Interior
            } else if g.is_port(node) {
                Face::Tagged(BoundaryTag::Port(node))
            } else {
                Face::Tagged(BoundaryTag::LateralWall)
            }
        };
        pieces.push(Piece::Rect(RectPiece {
            rect: *r,
            start_face: face(e.from),
            end_face: face(e.to),
            breaks: breaks.get(r.edge).cloned().unwrap_or_default(),
            grading: None,
        }));
    }
    pieces.extend(domain.junctions.iter().cloned().map(Piece::Junction));
    pieces
}

/// Meshes the full domain with target element size `h`.
pub fn mesh_domain(domain: &PolygonalDomain, h: f64) -> Result<Mesh> {
    mesh_pieces(&domain.graph, &domain_pieces(domain, &[]), h)
}

/// Number of element layers across a channel of width `width`.
pub fn layers(width: f64, h: f64) -> usize {
    ((width / h - 1e-9).ceil() as usize).max(1)
}

#[derive(Default)]
struct Builder {
    vertices: Vec<Point>,
    index: BTreeMap<(u64, u64), usize>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    tags: BTreeMap<(usize, usize), BoundaryTag>,
}

impl Builder {
    fn vertex(&mut self, p: Point) -> usize {
        let key = (p.x.to_bits(), p.y.to_bits());
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.vertices.push(p);
        self.index.insert(key, self.vertices.len() - 1);
        self.vertices.len() - 1
    }

    fn tag(&mut self, a: usize, b: usize, tag: BoundaryTag) {
        self.tags.insert((a.min(b), a.max(b)), tag);
    }
}

/// Meshes an arbitrary set of pieces that share end faces. Every edge whose
/// width is resolved by fewer than three layers is rejected.
pub fn mesh_pieces(g: &TubeGraph, pieces: &[Piece], h: f64) -> Result<Mesh> {
    let w_min = pieces
        .iter()
        .filter_map(|p| match p {
            Piece::Rect(r) => Some(2.0 * r.rect.half_width),
            Piece::Junction(_) => None,
        })
        .fold(f64::INFINITY, f64::min);
    let max_h = w_min / 3.0;
    if !(h > 0.0) || h > max_h * (1.0 + 1e-12) {
        return Err(Error::TooCoarse { h, max_h });
    }
    let mut b = Builder::default();
    for p in pieces {
        match p {
            Piece::Rect(r) => mesh_rect(g, r, h, &mut b),
            Piece::Junction(j) => mesh_junction(g, j, h, &mut b)?,
        }
    }
    Mesh::from_parts(b.vertices, b.triangles, b.regions, &b.tags, h)
}

/// Transverse coordinate of layer line `k` of `n` across half-width `w`.
fn transverse(w: f64, k: usize, n: usize) -> f64 {
    -w + 2.0 * w * k as f64 / n as f64
}

fn axial_lines(r: &RectPiece, h: f64) -> Vec<f64> {
    let (s0, s1) = (r.rect.start, r.rect.end);
    let mut knots = vec![s0, s1];
    knots.extend(r.breaks.iter().copied().filter(|&s| s > s0 && s < s1));
    if let Some(gr) = r.grading {
        knots.extend([gr.center - gr.inner, gr.center + gr.inner].into_iter().filter(|&s| s > s0 && s < s1));
    }
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (s1 - s0));
    let mut lines = vec![s0];
    for w in knots.windows(2) {
        let (a, c) = (w[0], w[1]);
        let spacing = match r.grading {
            Some(gr) if (0.5 * (a + c) - gr.center).abs() > gr.inner => gr.outer_h,
            _ => h,
        };
        let n = (((c - a) / spacing - 1e-9).ceil() as usize).max(1);
        for k in 1..n {
            lines.push(a + (c - a) * k as f64 / n as f64);
        }
        lines.push(c);
    }
    lines
}

fn mesh_rect(g: &TubeGraph, r: &RectPiece, h: f64, b: &mut Builder) {
    let e = r.rect.edge;
    let w = r.rect.half_width;
    let nw = layers(2.0 * w, h);
    let lines = axial_lines(r, h);
    let na = lines.len() - 1;
    let mut ids = vec![0usize; (na + 1) * (nw + 1)];
    for (i, &s) in lines.iter().enumerate() {
        for j in 0..=nw {
            ids[i * (nw + 1) + j] = b.vertex(g.point_at(e, s, transverse(w, j, nw)));
        }
    }
    let at = |i: usize, j: usize| ids[i * (nw + 1) + j];
    for i in 0..na {
        for j in 0..nw {
            let (p00, p10, p11, p01) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            if (i + j) % 2 == 0 {
                b.triangles.push([p00, p10, p11]);
                b.triangles.push([p00, p11, p01]);
            } else {
                b.triangles.push([p00, p10, p01]);
                b.triangles.push([p10, p11, p01]);
            }
            b.regions.push(Owner::Edge(e));
            b.regions.push(Owner::Edge(e));
        }
    }
    for i in 0..na {
        b.tag(at(i, 0), at(i + 1, 0), BoundaryTag::LateralWall);
        b.tag(at(i, nw), at(i + 1, nw), BoundaryTag::LateralWall);
    }
    for (face, i) in [(r.start_face, 0), (r.end_face, na)] {
        if let Face::Tagged(tag) = face {
            for j in 0..nw {
                b.tag(at(i, j), at(i, j + 1), tag);
            }
        }
    }
}

fn mesh_junction(g: &TubeGraph, jp: &JunctionPolygon, h: f64, b: &mut Builder) -> Result<()> {
    // polygon points with a flag telling whether the side starting there is
    // part of an end face (glued) or a wall
    let mut poly: Vec<Point> = Vec::new();
    let mut face_side: Vec<bool> = Vec::new();
    let nb = jp.branches.len();
    for (k, &inc) in jp.branches.iter().enumerate() {
        let w = 0.5 * g.width(inc.edge);
        let nw = layers(2.0 * w, h);
        let s = g.offset_from_end(inc, jp.trim);
        let mut face: Vec<Point> = (0..=nw).map(|j| g.point_at(inc.edge, s, transverse(w, j, nw))).collect();
        if inc.end == End::Finish {
            face.reverse();
        }
        for (j, p) in face.into_iter().enumerate() {
            poly.push(p);
            face_side.push(j < nw);
        }
        let a = jp.vertices[2 * k + 1];
        let c = jp.vertices[(2 * k + 2) % (2 * nb)];
        let n = (((c - a).norm() / h - 1e-9).ceil() as usize).max(1);
        for m in 1..n {
            poly.push(a.lerp(c, m as f64 / n as f64));
            face_side.push(false);
        }
    }
    let (pts, tris) = triangulate_polygon(&poly, h)?;
    let ids: Vec<usize> = pts.iter().map(|&p| b.vertex(p)).collect();
    let n = poly.len();
    for i in 0..n {
        if !face_side[i] {
            b.tag(ids[i], ids[(i + 1) % n], BoundaryTag::LateralWall);
        }
    }
    for t in tris {
        b.triangles.push([ids[t[0]], ids[t[1]], ids[t[2]]]);
        b.regions.push(Owner::Node(jp.node));
    }
    Ok(())
}

fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (ax, ay) = (a.x - d.x, a.y - d.y);
    let (bx, by) = (b.x - d.x, b.y - d.y);
    let (cx, cy) = (c.x - d.x, c.y - d.y);
    (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay)
}

fn min_angle(a: Point, b: Point, c: Point) -> f64 {
    let ang = |p: Point, q: Point, r: Point| {
        let (u, v) = (q - p, r - p);
        u.cross(v).abs().atan2(u.dot(v))
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
}

/// Constrained Delaunay triangulation of a simple counterclockwise polygon
/// with hexagonal interior points of spacing `h`. Returns all points (the
/// polygon first) and counterclockwise triangles.
pub fn triangulate_polygon(poly: &[Point], h: f64) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let n = poly.len();
    let scale = h * h * 1e-10;
    // ear clipping, best ear first
    let mut ring: Vec<usize> = (0..n).collect();
    let mut tris: Vec<[usize; 3]> = Vec::with_capacity(3 * n);
    while ring.len() > 3 {
        let m = ring.len();
        let mut best: Option<(usize, f64)> = None;
        for k in 0..m {
            let (ia, ib, ic) = (ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]);
            let (a, bb, c) = (poly[ia], poly[ib], poly[ic]);
            if orient(a, bb, c) <= scale {
                continue;
            }
            let blocked = ring.iter().any(|&j| {
                j != ia
                    && j != ib
                    && j != ic
                    && orient(a, bb, poly[j]) >= -scale
                    && orient(bb, c, poly[j]) >= -scale
                    && orient(c, a, poly[j]) >= -scale
            });
            if blocked {
                continue;
            }
            let q = min_angle(a, bb, c);
            if best.map_or(true, |(_, bq)| q > bq) {
                best = Some((k, q));
            }
        }
        let Some((k, _)) = best else {
            return Err(Error::MeshQualityFailure { worst_angle_deg: 0.0 });
        };
        let m = ring.len();
        tris.push([ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]]);
        ring.remove(k);
    }
    tris.push([ring[0], ring[1], ring[2]]);

    let mut pts: Vec<Point> = poly.to_vec();
    let constrained = |a: usize, b: usize| a < n && b < n && ((a + 1) % n == b || (b + 1) % n == a);

    // interior points on a hexagonal lattice
    let (mut lo, mut hi) = (poly[0], poly[0]);
    for p in poly {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let dy = h * 3.0f64.sqrt() / 2.0;
    let rows = ((hi.y - lo.y) / dy).ceil() as usize + 1;
    let cols = ((hi.x - lo.x) / h).ceil() as usize + 2;
    for j in 0..rows {
        for i in 0..cols {
            let shift = if j % 2 == 1 { 0.5 * h } else { 0.0 };
            let p = Point::new(lo.x + shift + i as f64 * h, lo.y + j as f64 * dy);
            if !point_in_polygon(p, poly) || boundary_distance(p, poly) < 0.6 * h {
                continue;
            }
            let Some(t) = tris.iter().position(|t| {
                orient(pts[t[0]], pts[t[1]], p) > scale
                    && orient(pts[t[1]], pts[t[2]], p) > scale
                    && orient(pts[t[2]], pts[t[0]], p) > scale
            }) else {
                continue;
            };
            pts.push(p);
            let v = pts.len() - 1;
            let [a, bb, c] = tris[t];
            tris[t] = [a, bb, v];
            tris.push([bb, c, v]);
            tris.push([c, a, v]);
            legalize(&pts, &mut tris, &constrained);
        }
    }
    legalize(&pts, &mut tris, &constrained);
    // a few sweeps of Laplacian smoothing of the interior points
    for _ in 0..4 {
        let mut sum = vec![(Point::default(), 0usize); pts.len()];
        for t in &tris {
            for k in 0..3 {
                for d in [1, 2] {
                    let (v, w) = (t[k], t[(k + d) % 3]);
                    sum[v].0 = sum[v].0 + pts[w];
                    sum[v].1 += 1;
                }
            }
        }
        for v in n..pts.len() {
            let old = pts[v];
            pts[v] = sum[v].0 * (1.0 / sum[v].1 as f64);
            let ok = tris
                .iter()
                .filter(|t| t.contains(&v))
                .all(|t| orient(pts[t[0]], pts[t[1]], pts[t[2]]) > scale);
            if !ok {
                pts[v] = old;
            }
        }
        legalize(&pts, &mut tris, &constrained);
    }
    Ok((pts, tris))
}

/// Lawson edge flips until every unconstrained edge is locally Delaunay.
fn legalize(pts: &[Point], tris: &mut [[usize; 3]], constrained: &dyn Fn(usize, usize) -> bool) {
    let mut owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, t) in tris.iter().enumerate() {
        for k in 0..3 {
            owner.insert((t[k], t[(k + 1) % 3]), i);
        }
    }
    let mut changed = true;
    let mut sweeps = 0;
    while changed && sweeps < 100 {
        changed = false;
        sweeps += 1;
        for ti in 0..tris.len() {
            for k in 0..3 {
                let t = tris[ti];
                let (a, bb, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                if constrained(a, bb) {
                    continue;
                }
                let Some(&ui) = owner.get(&(bb, a)) else { continue };
                let u = tris[ui];
                let d = u.iter().copied().find(|&x| x != a && x != bb).unwrap();
                let (pa, pb, pc, pd) = (pts[a], pts[bb], pts[c], pts[d]);
                let scale = (pa - pb).dot(pa - pb);
                if incircle(pa, pb, pc, pd) <= 1e-12 * scale * scale {
                    continue;
                }
                if orient(pa, pd, pc) <= 0.0 || orient(pd, pb, pc) <= 0.0 {
                    continue;
                }
                for x in [t, u] {
                    for m in 0..3 {
                        owner.remove(&(x[m], x[(m + 1) % 3]));
                    }
                }
                tris[ti] = [a, d, c];
                tris[ui] = [d, bb, c];
                for (i, x) in [(ti, tris[ti]), (ui, tris[ui])] {
                    for m in 0..3 {
                        owner.insert((x[m], x[(m + 1) % 3]), i);
                    }
                }
                changed = true;
                break;
            }
        }
    }
}
