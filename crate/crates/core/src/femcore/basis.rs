//! Affine triangle geometry and Lagrange P1/P2 shape functions.
//!
//! P2 local node order: the three vertices, then the midpoints of edges
//! (0,1), (1,2), (2,0).

use crate::geometry::{orient, Point};

#[derive(Debug, Clone, Copy)]
pub struct TriGeom {
    pub vertices: [Point; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_bary: [Point; 3],
}

impl TriGeom {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [a, b, c] = vertices;
        let det = orient(a, b, c);
        let g = |p: Point, q: Point| Point::new(p.y - q.y, q.x - p.x) * (1.0 / det);
        Self { vertices, area: 0.5 * det, grad_bary: [g(b, c), g(c, a), g(a, b)] }
    }

    pub fn point(&self, bary: [f64; 3]) -> Point {
        self.vertices[0] * bary[0] + self.vertices[1] * bary[1] + self.vertices[2] * bary[2]
    }

    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        let [a, b, c] = self.vertices;
        let d = 2.0 * self.area;
        let l1 = orient(a, p, c) / d;
        let l2 = orient(a, b, p) / d;
        [1.0 - l1 - l2, l1, l2]
    }
}

pub fn p1_values(l: [f64; 3]) -> [f64; 3] {
    l
}

pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub fn p2_gradients(geom: &TriGeom, l: [f64; 3]) -> [Point; 6] {
    let g = geom.grad_bary;
    [
        g[0] * (4.0 * l[0] - 1.0),
        g[1] * (4.0 * l[1] - 1.0),
        g[2] * (4.0 * l[2] - 1.0),
        (g[0] * l[1] + g[1] * l[0]) * 4.0,
        (g[1] * l[2] + g[2] * l[1]) * 4.0,
        (g[2] * l[0] + g[0] * l[2]) * 4.0,
    ]
}

/// Barycentric coordinates of the six P2 nodes.
pub const P2_NODES: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];

/// 1D quadratic Lagrange values on [0,1] with nodes (0, 1, 1/2).
pub fn p2_line_values(t: f64) -> [f64; 3] {
    [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)]
}

/// Derivatives (w.r.t. t) of [`p2_line_values`].
pub fn p2_line_derivatives(t: f64) -> [f64; 3] {
    [4.0 * t - 3.0, 4.0 * t - 1.0, 4.0 - 8.0 * t]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> TriGeom {
        TriGeom::new([Point::new(0.1, -0.2), Point::new(1.3, 0.4), Point::new(0.2, 0.9)])
    }

    proptest! {
        #[test]
        fn partition_of_unity(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            let l = [1.0 - a - b, a, b];
            let s2: f64 = p2_values(l).iter().sum();
            let s1: f64 = p1_values(l).iter().sum();
            prop_assert!((s2 - 1.0).abs() < 1e-12);
            prop_assert!((s1 - 1.0).abs() < 1e-12);
            let g = p2_gradients(&geom(), l).iter().fold(Point::default(), |acc, &v| acc + v);
            prop_assert!(g.norm() < 1e-12);
        }

        #[test]
        fn p2_interpolation_reproduces_quadratics(
            c in proptest::array::uniform6(-3.0f64..3.0), a in 0.0f64..1.0, b in 0.0f64..1.0,
        ) {
            let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            let q = |p: Point| c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.x * p.x + c[4] * p.x * p.y + c[5] * p.y * p.y;
            let g = geom();
            let nodal: [f64; 6] = core::array::from_fn(|k| q(g.point(P2_NODES[k])));
            let l = [1.0 - a - b, a, b];
            let v: f64 = p2_values(l).iter().zip(&nodal).map(|(phi, u)| phi * u).sum();
            prop_assert!((v - q(g.point(l))).abs() < 1e-12);
        }
    }

    #[test]
    fn barycentric_round_trip() {
        let g = geom();
        let l = g.barycentric(g.point([0.2, 0.3, 0.5]));
        assert!((l[0] - 0.2).abs() < 1e-14 && (l[1] - 0.3).abs() < 1e-14);
    }
}
