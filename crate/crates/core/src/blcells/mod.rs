//! Boundary-layer cell problems in scaled variables `ξ = (x - x̄)/ε`:
//! the Stokes stenosis corrector, the transport stenosis layer, the
//! junction layer and the port layer, plus far-field extraction.

mod junction;
mod stokes_cell;
mod transport_cell;

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

pub use junction::{solve_junction_cell, solve_port_cell, JunctionCellDomain, PortLayer};
pub use stokes_cell::solve_stokes_stenosis_cell;
pub use transport_cell::{solve_transport_strip_cell, StripCellData};

use crate::femcore::meshing::{mesh_pieces, Face, Grading, Piece, RectPiece};
use crate::femcore::quadrature::gauss3;
use crate::femcore::{Field, Locator, Mesh};
use crate::geometry::Point;
use crate::tubegraph::{build_graph, BoundaryTag, EdgeRect, EdgeSpec, GraphSpec, NodeKind, NodeSpec, TubeGraph};
use crate::{Error, Result};

/// Default truncation half-length.
pub const DEFAULT_LENGTH: f64 = 12.0;
/// Default scaled mesh size.
pub const DEFAULT_H: f64 = 1.0 / 16.0;

/// Truncated strip `(-L, L) × (-1/2, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripDomain {
    pub length: f64,
    pub h: f64,
    /// Axial spacing beyond `|ξ₁| > 3`; `None` keeps `h` everywhere.
    pub outer_h: Option<f64>,
}

impl Default for StripDomain {
    fn default() -> Self {
        Self { length: DEFAULT_LENGTH, h: DEFAULT_H, outer_h: None }
    }
}

impl StripDomain {
    pub fn new(length: f64, h: f64) -> Result<Self> {
        if !(length >= 8.0) {
            return Err(Error::InvalidInput(alloc::format!("strip half-length {length} below 8")));
        }
        Ok(Self { length, h, outer_h: None })
    }

    pub fn with_outer_h(mut self, outer_h: f64) -> Self {
        self.outer_h = Some(outer_h);
        self
    }

    /// Strip graph whose edge coordinate equals `ξ₁ + L`; the end faces are
    /// tagged `Port(0)` (left) and `Port(1)` (right).
    pub fn graph(&self) -> Result<TubeGraph> {
        let l = self.length;
        build_graph(&GraphSpec {
            epsilon: 0.05,
            nodes: vec![
                NodeSpec { id: 0, position: Point::new(-l, 0.0), kind: NodeKind::EntranceExit { q: 0.0, inflow: 0.0 } },
                NodeSpec { id: 1, position: Point::new(l, 0.0), kind: NodeKind::EntranceExit { q: 0.0, inflow: 0.0 } },
            ],
            edges: vec![EdgeSpec { id: 0, from: 0, to: 1, theta: 1.0, stenoses: Vec::new() }],
        })
    }

    pub fn mesh(&self) -> Result<Mesh> {
        let g = self.graph()?;
        let l = self.length;
        let piece = Piece::Rect(RectPiece {
            rect: EdgeRect { edge: 0, start: 0.0, end: 2.0 * l, half_width: 0.5 },
            start_face: Face::Tagged(BoundaryTag::Port(0)),
            end_face: Face::Tagged(BoundaryTag::Port(1)),
            breaks: vec![l],
            grading: self.outer_h.map(|o| Grading { center: l, inner: 3.0, outer_h: o }),
        });
        mesh_pieces(&g, &[piece], self.h)
    }

    /// Far-field window `[L - 3, L - 1]`.
    pub fn far_window(&self) -> (f64, f64) {
        (self.length - 3.0, self.length - 1.0)
    }

    pub fn branches(&self) -> [Branch; 2] {
        let b = |axis: Point| Branch { origin: Point::default(), axis, half_width: 0.5, length: self.length };
        [b(Point::new(-1.0, 0.0)), b(Point::new(1.0, 0.0))]
    }
}

/// Straight half-strip of a cell domain, parametrized from `origin` along
/// the unit `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub origin: Point,
    pub axis: Point,
    pub half_width: f64,
    pub length: f64,
}

impl Branch {
    pub fn point(&self, s: f64, t: f64) -> Point {
        self.origin + self.axis * s + self.axis.perp() * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stabilization {
    /// Window average of the cross-sectional mean.
    pub constant: f64,
    /// Least-squares decay rate of the axial-derivative norm.
    pub rate: f64,
    /// `|constant(window) - constant(window shifted inward by 1)|`
    pub sensitivity: f64,
    pub decaying: bool,
}

/// Rates at or below this count as non-decaying.
pub const DECAY_FLOOR: f64 = 1e-6;
/// Derivative norms below this fraction of `‖U‖∞` are rounding noise.
pub const NOISE_FLOOR: f64 = 1e-11;
const DYNAMIC_RANGE: f64 = 1e-7;
const STATIONS: usize = 17;
const PIECES: usize = 8;

/// Cross-sectional mean of block 0 and L² norm of the axial derivative
/// (all blocks) at arc length `s` of a branch.
pub fn section(field: &Field, loc: &Locator, b: &Branch, s: f64) -> Result<(f64, f64)> {
    let blocks = if field.family == crate::femcore::Family::P2Vector { 2 } else { 1 };
    let w = b.half_width;
    let dt = 2.0 * w / PIECES as f64;
    let (mut mean, mut dev) = (0.0, 0.0);
    for k in 0..PIECES {
        for (x, wq) in gauss3() {
            let t = -w + dt * (k as f64 + x);
            let p = b.point(s, t);
            let (tri, bary) = loc.locate(&field.mesh, p).ok_or(Error::UncoveredPoint { x: p.x, y: p.y })?;
            mean += wq * dt * field.value_in(tri, bary, 0);
            for blk in 0..blocks {
                let d = field.gradient_in(tri, bary, blk).dot(b.axis);
                dev += wq * dt * d * d;
            }
        }
    }
    Ok((mean / (2.0 * w), dev.sqrt()))
}

fn window_constant(field: &Field, loc: &Locator, b: &Branch, a: f64, c: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut sum = 0.0;
    let mut devs = Vec::with_capacity(STATIONS);
    for i in 0..STATIONS {
        let s = a + (c - a) * i as f64 / (STATIONS - 1) as f64;
        let (m, d) = section(field, loc, b, s)?;
        // trapezoid weights
        let w = if i == 0 || i == STATIONS - 1 { 0.5 } else { 1.0 };
        sum += w * m;
        devs.push((s, d));
    }
    Ok((sum / (STATIONS - 1) as f64, devs))
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + (p.0 - mx) * (p.1 - my), acc.1 + (p.0 - mx).powi(2)));
    num / den
}

/// Exponential decay rate of the axial-derivative norm fitted from `start`
/// over `span` units, stopping once the norm has dropped by `DYNAMIC_RANGE`
/// (cell solutions reach rounding level well before the far window).
pub fn fit_decay_rate(field: &Field, loc: &Locator, branch: &Branch, start: f64, span: f64) -> Result<f64> {
    let mut pts = Vec::with_capacity(STATIONS);
    let mut first = None;
    for i in 0..STATIONS {
        let s = start + span * i as f64 / (STATIONS - 1) as f64;
        let (_, d) = section(field, loc, branch, s)?;
        let d0 = *first.get_or_insert(d);
        if !(d > DYNAMIC_RANGE * d0) || d <= NOISE_FLOOR * field.max_abs() {
            break;
        }
        pts.push((s, d.ln()));
    }
    Ok(if pts.len() < 3 { f64::INFINITY } else { -ls_slope(&pts) })
}

/// Far-field constant, decay rate and window sensitivity of a field along a
/// branch. The window must lie beyond `|ξ| = 4` and inside the branch.
pub fn extract_stabilization(field: &Field, loc: &Locator, branch: &Branch, window: (f64, f64)) -> Result<Stabilization> {
    let (a, c) = window;
    if !(a >= 4.0 && c > a && c <= branch.length) {
        return Err(Error::WindowOutsideBranch { start: a, end: c, length: branch.length });
    }
    let (constant, devs) = window_constant(field, loc, branch, a, c)?;
    let (shifted, _) = window_constant(field, loc, branch, a - 1.0, c - 1.0)?;
    let floor = NOISE_FLOOR * field.max_abs();
    let pts: Vec<(f64, f64)> = devs.iter().filter(|d| d.1 > floor).map(|d| (d.0, d.1.ln())).collect();
    // a deviation already at rounding level has decayed beyond resolution
    let rate = if pts.len() < 3 { f64::INFINITY } else { -ls_slope(&pts) };
    Ok(Stabilization { constant, rate, sensitivity: (constant - shifted).abs(), decaying: rate > DECAY_FLOOR })
}

/// Solution of a cell problem and the scalars extracted from it.
#[derive(Debug, Clone)]
pub struct CellProblemResult {
    /// Corrector (scalar P2 for transport, P2 vector for Stokes).
    pub field: Field,
    pub pressure: Option<Field>,
    pub locator: Locator,
    /// Far-field constant per branch (`[-∞, +∞]` for strips).
    pub constants: Vec<f64>,
    /// Stabilization constant: `U(+∞) - U(-∞)` on strips, per-branch
    /// constants (weighted mean zero) at junctions.
    pub q_tilde: Vec<f64>,
    pub decay_rates: Vec<f64>,
    /// Largest window-shift sensitivity over branches.
    pub sensitivity: f64,
    /// Pressure jump `P(+∞) - P(-∞)` (Stokes cell).
    pub c_plus: Option<f64>,
    /// Flux-jump datum (transport strip cell).
    pub g: Option<f64>,
    /// Relative defect of the solvability identity.
    pub solvability_defect: f64,
    pub n_dofs: usize,
}

