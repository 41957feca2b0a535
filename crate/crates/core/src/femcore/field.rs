//! Finite element fields over a shared mesh.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::Float;

use super::basis::{p2_gradients, p2_values};
use super::mesh::{Locator, Mesh};
use super::quadrature::triangle_degree5;
use crate::geometry::Point;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    P1,
    P2,
    /// Two P2 components stored as consecutive blocks `[x..., y...]`.
    P2Vector,
}

impl Family {
    pub fn n_dofs(self, mesh: &Mesh) -> usize {
        match self {
            Family::P1 => mesh.n_vertices(),
            Family::P2 => mesh.n_p2(),
            Family::P2Vector => 2 * mesh.n_p2(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Field {
    pub mesh: Arc<Mesh>,
    pub family: Family,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, family: Family, values: Vec<f64>) -> Result<Field> {
        let n = family.n_dofs(&mesh);
        if values.len() != n {
            return Err(Error::InvalidInput(format!(
                "field has {} coefficients, {:?} on this mesh needs {n}",
                values.len(),
                family
            )));
        }
        Ok(Field { mesh, family, values })
    }

    pub fn zeros(mesh: Arc<Mesh>, family: Family) -> Field {
        let n = family.n_dofs(&mesh);
        Field { mesh, family, values: alloc::vec![0.0; n] }
    }

    /// Nodal interpolation of a scalar function (P1 or P2).
    pub fn interpolate(mesh: Arc<Mesh>, family: Family, f: impl Fn(Point) -> f64) -> Field {
        let values = match family {
            Family::P1 => mesh.vertices.iter().map(|&p| f(p)).collect(),
            Family::P2 => (0..mesh.n_p2()).map(|i| f(mesh.p2_node(i))).collect(),
            Family::P2Vector => panic!("use interpolate_vector for vector fields"),
        };
        Field { mesh, family, values }
    }

    pub fn interpolate_vector(mesh: Arc<Mesh>, f: impl Fn(Point) -> Point) -> Field {
        let n = mesh.n_p2();
        let mut values = alloc::vec![0.0; 2 * n];
        for i in 0..n {
            let v = f(mesh.p2_node(i));
            values[i] = v.x;
            values[n + i] = v.y;
        }
        Field { mesh, family: Family::P2Vector, values }
    }

    fn scalar_local(&self, t: usize, block: usize) -> ([f64; 6], usize) {
        match self.family {
            Family::P1 => {
                let v = self.mesh.triangles[t];
                ([self.values[v[0]], self.values[v[1]], self.values[v[2]], 0.0, 0.0, 0.0], 3)
            }
            Family::P2 | Family::P2Vector => {
                let off = block * self.mesh.n_p2();
                let d = self.mesh.p2_dofs(t);
                (d.map(|i| self.values[off + i]), 6)
            }
        }
    }

    /// Value of component `block` (0 for scalars) in triangle `t`.
    pub fn value_in(&self, t: usize, bary: [f64; 3], block: usize) -> f64 {
        let (u, n) = self.scalar_local(t, block);
        if n == 3 {
            u[0] * bary[0] + u[1] * bary[1] + u[2] * bary[2]
        } else {
            p2_values(bary).iter().zip(&u).map(|(a, b)| a * b).sum()
        }
    }

    pub fn gradient_in(&self, t: usize, bary: [f64; 3], block: usize) -> Point {
        let (u, n) = self.scalar_local(t, block);
        let g = self.mesh.geom(t);
        if n == 3 {
            g.grad_bary[0] * u[0] + g.grad_bary[1] * u[1] + g.grad_bary[2] * u[2]
        } else {
            p2_gradients(&g, bary).iter().zip(&u).fold(Point::default(), |acc, (d, c)| acc + *d * *c)
        }
    }

    pub fn vector_in(&self, t: usize, bary: [f64; 3]) -> Point {
        Point::new(self.value_in(t, bary, 0), self.value_in(t, bary, 1))
    }

    /// Scalar value at a physical point, if it lies in the mesh.
    pub fn eval(&self, loc: &Locator, p: Point) -> Option<f64> {
        loc.locate(&self.mesh, p).map(|(t, l)| self.value_in(t, l, 0))
    }

    pub fn eval_vector(&self, loc: &Locator, p: Point) -> Option<Point> {
        loc.locate(&self.mesh, p).map(|(t, l)| self.vector_in(t, l))
    }

    /// Integral of `f(x, values of all components, triangle)` with the
    /// degree-5 rule.
    pub fn integrate(&self, f: impl Fn(Point, &[f64], usize) -> f64) -> f64 {
        let comps = if self.family == Family::P2Vector { 2 } else { 1 };
        let mut s = 0.0;
        let mut vals = [0.0; 2];
        for t in 0..self.mesh.n_triangles() {
            let g = self.mesh.geom(t);
            for q in triangle_degree5() {
                for (c, v) in vals.iter_mut().enumerate().take(comps) {
                    *v = self.value_in(t, q.bary, c);
                }
                s += g.area * q.weight * f(g.point(q.bary), &vals[..comps], t);
            }
        }
        s
    }

    pub fn l2_norm(&self) -> f64 {
        self.integrate(|_, v, _| v.iter().map(|x| x * x).sum()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
