//! Hybrid-versus-reference error norms and savings.

use alloc::format;

use num_traits::Float;

use super::HybridSolution;
use crate::femcore::quadrature::triangle_degree5;
use crate::femcore::Mesh;
use crate::geometry::Point;
use crate::transport2d::TransportSolution;
use crate::{Error, Result};

/// Anything that can be sampled as a concentration with its gradient.
pub trait ConcentrationField {
    fn sample(&self, x: Point) -> Option<(f64, Point)>;
}

impl ConcentrationField for HybridSolution {
    fn sample(&self, x: Point) -> Option<(f64, Point)> {
        HybridSolution::sample(self, x)
    }
}

impl ConcentrationField for TransportSolution {
    fn sample(&self, x: Point) -> Option<(f64, Point)> {
        let f = &self.concentration;
        let (t, bary) = self.locator.locate(&f.mesh, x)?;
        Some((f.value_in(t, bary, 0), f.gradient_in(t, bary, 0)))
    }
}

/// `(‖a - b‖_L², broken ‖a - b‖_H¹, ‖b‖_L², ‖b‖_H¹)` by degree-5
/// quadrature on `mesh`.
pub fn difference_norms(mesh: &Mesh, a: &dyn ConcentrationField, b: &dyn ConcentrationField) -> Result<[f64; 4]> {
    let (mut e0, mut e1, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..mesh.n_triangles() {
        let g = mesh.geom(t);
        for q in triangle_degree5() {
            let x = g.point(q.bary);
            let miss = || Error::UncoveredPoint { x: x.x, y: x.y };
            let (va, ga) = a.sample(x).ok_or_else(miss)?;
            let (vb, gb) = b.sample(x).ok_or_else(miss)?;
            let w = g.area * q.weight;
            let d = ga - gb;
            e0 += w * (va - vb).powi(2);
            e1 += w * d.dot(d);
            r0 += w * vb * vb;
            r1 += w * gb.dot(gb);
        }
    }
    Ok([e0.sqrt(), (e0 + e1).sqrt(), r0.sqrt(), (r0 + r1).sqrt()])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub l2: f64,
    pub h1_broken: f64,
    pub l2_relative: f64,
    pub h1_relative: f64,
    pub dof_full: usize,
    pub dof_hybrid: usize,
    /// Wall times in seconds, filled in by the caller (zero when unknown).
    pub t_full: f64,
    pub t_hybrid: f64,
}

impl ErrorReport {
    pub fn dof_ratio(&self) -> f64 {
        self.dof_hybrid as f64 / self.dof_full as f64
    }

    pub fn with_times(mut self, t_full: f64, t_hybrid: f64) -> Self {
        self.t_full = t_full;
        self.t_hybrid = t_hybrid;
        self
    }
}

/// Compares a hybrid solution with a full 2D reference on the reference
/// mesh: 2D field in zones, transversally constant profile on the skeleton.
pub fn mapdd_error_report(hybrid: &HybridSolution, reference: &TransportSolution) -> Result<ErrorReport> {
    let mesh = &reference.concentration.mesh;
    let domain = &hybrid.space.domain;
    let area = domain.area();
    if (mesh.area() - area).abs() > 1e-8 * area {
        return Err(Error::SetupMismatch(format!("reference mesh area {} differs from the domain area {area}", mesh.area())));
    }
    let [l2, h1, n0, n1] = difference_norms(mesh, hybrid, reference)?;
    Ok(ErrorReport {
        l2,
        h1_broken: h1,
        l2_relative: l2 / n0.max(f64::MIN_POSITIVE),
        h1_relative: h1 / n1.max(f64::MIN_POSITIVE),
        dof_full: reference.concentration.values.len(),
        dof_hybrid: hybrid.n_dofs,
        t_full: 0.0,
        t_hybrid: 0.0,
    })
}
