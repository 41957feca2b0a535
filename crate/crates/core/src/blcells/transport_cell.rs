//! Stenosis layer for the transport equation on a truncated strip.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::{extract_stabilization, fit_decay_rate, CellProblemResult, StripDomain};
use crate::femcore::assemble::{assemble_scalar, ScalarForm};
use crate::femcore::quadrature::gauss_legendre;
use crate::femcore::{Family, Field, Locator, SparseSystem};
use crate::geometry::Point;
use crate::stokes2d::LocalBump;
use crate::tubegraph::RadialBump;
use crate::{Error, Result};

/// Relative tolerance on the compatibility of the cell source.
pub const SOLVABILITY_TOL: f64 = 1e-6;

/// Data of the first-order stenosis layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripCellData {
    pub kappa: f64,
    /// Diffusivity perturbation `K̄(ξ)`.
    pub bump: RadialBump,
    /// Slope `c̄₀'(x̄)` of the leading 1D profile at the stenosis.
    pub slope: f64,
}

/// `∫ ∂₁K̄` and `∫ |∂₁K̄|` over the bump support, by tensor Gauss panels.
fn source_moments(k: &LocalBump) -> (f64, f64) {
    let r = k.bump.support();
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let panels = 32;
    let d = 2.0 * r / panels as f64;
    let rule = gauss_legendre(6);
    let (mut s, mut a) = (0.0, 0.0);
    for i in 0..panels {
        for j in 0..panels {
            for &(x, wx) in &rule {
                for &(y, wy) in &rule {
                    let p = Point::new(-r + d * (i as f64 + x), -r + d * (j as f64 + y));
                    let v = k.gradient(p).x * wx * wy * d * d;
                    s += v;
                    a += v.abs();
                }
            }
        }
    }
    (s, a)
}

/// Solves `-div((ϰ + K̄)∇U) = c̄₀' ∂₁K̄` on the strip with zero flux on the
/// walls and the truncation ends. `U` is normalized to vanish on average at
/// `-∞`; `q_tilde[0]` is the jump `U(+∞) - U(-∞)` and `g` the net source.
pub fn solve_transport_strip_cell(strip: &StripDomain, data: &StripCellData) -> Result<CellProblemResult> {
    if !(data.kappa > 0.0) || !(data.kappa + data.bump.amplitude.min(0.0) > 0.0) {
        return Err(Error::InvalidInput(alloc::format!("cell diffusivity is not positive")));
    }
    let k = LocalBump { center: Point::default(), axis: Point::new(1.0, 0.0), scale: 1.0, bump: data.bump };
    let (net, abs) = source_moments(&k);
    let g = data.slope * net;
    let defect = if abs > 0.0 { net.abs() / abs } else { 0.0 };
    if defect > SOLVABILITY_TOL {
        return Err(Error::SolvabilityViolation { defect });
    }

    let mesh = Arc::new(strip.mesh()?);
    let kappa = data.kappa;
    let slope = data.slope;
    let form = ScalarForm {
        diffusion: Some(Box::new(move |x, _| kappa + k.value(x))),
        flux_source: Some(Box::new(move |x, _| Point::new(-k.value(x) * slope, 0.0))),
        ..Default::default()
    };
    let (a, rhs) = assemble_scalar(&mesh, Family::P2, &form)?;
    let mut sys = SparseSystem::new(a, rhs);
    sys.fix(0, 0.0)?;
    let values = sys.solve()?;
    let mut field = Field::new(mesh.clone(), Family::P2, values)?;
    let loc = Locator::new(&mesh);
    let branches = strip.branches();
    let far = strip.far_window();
    let left = extract_stabilization(&field, &loc, &branches[0], far)?.constant;
    field.values.iter_mut().for_each(|v| *v -= left);

    let mut constants = Vec::new();
    let mut rates = Vec::new();
    let mut sensitivity = 0.0f64;
    for b in &branches {
        let s = extract_stabilization(&field, &loc, b, far)?;
        constants.push(s.constant);
        rates.push(fit_decay_rate(&field, &loc, b, data.bump.support() + 1.0, 3.0)?);
        sensitivity = sensitivity.max(s.sensitivity);
    }
    let q = constants[1] - constants[0];
    let n_dofs = field.values.len();
    Ok(CellProblemResult {
        field,
        pressure: None,
        locator: loc,
        constants,
        q_tilde: vec![q],
        decay_rates: rates,
        sensitivity,
        c_plus: None,
        g: Some(g),
        solvability_defect: defect,
        n_dofs,
    })
}
