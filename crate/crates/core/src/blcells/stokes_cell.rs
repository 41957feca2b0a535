//! Stenosis corrector for Stokes flow: the perturbation `(U, P)` of a
//! Poiseuille flow by a localized viscosity bump, on a truncated strip.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::{extract_stabilization, fit_decay_rate, CellProblemResult, StripDomain};
use crate::femcore::Locator;
use crate::geometry::Point;
use crate::stokes2d::{divergence_norm, solve_stokes, LocalBump, ViscosityField, VelocityBc};
use crate::tubegraph::{BoundaryTag, RadialBump};
use crate::{Error, Result};

/// Solves `-div(2(μ + M) D(U)) + ∇P = div(2M D(u_P))`, `div U = 0` with
/// `U = 0` on the walls and truncation ends, where `u_P` is the Poiseuille
/// profile with pressure gradient `c1` in the unit strip. `c_plus` is the
/// far-field pressure jump `P(+∞) - P(-∞)`; `P` is returned with `P(-∞) = 0`.
pub fn solve_stokes_stenosis_cell(strip: &StripDomain, mu: f64, bump: RadialBump, c1: f64) -> Result<CellProblemResult> {
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(alloc::format!("viscosity {mu} is not positive")));
    }
    let mesh = Arc::new(strip.mesh()?);
    let m = LocalBump { center: Point::default(), axis: Point::new(1.0, 0.0), scale: 1.0, bump };
    let visc = ViscosityField { mu, perturbations: vec![m], fictitious: Vec::new() };
    // u_P' = (c1/μ) ξ₂ and u_P'' = c1/μ
    let force = move |x: Point| {
        let g = m.gradient(x);
        let (d1, d2) = (c1 / mu * x.y, c1 / mu);
        Point::new(g.y * d1 + m.value(x) * d2, g.x * d1)
    };
    let zero = |_: Point| Point::default();
    let bcs = [
        VelocityBc { tag: BoundaryTag::Port(0), profile: Box::new(zero) },
        VelocityBc { tag: BoundaryTag::Port(1), profile: Box::new(zero) },
    ];
    let sol = solve_stokes(&mesh, &visc, &bcs, Some(&force))?;
    let loc = Locator::new(&mesh);
    let branches = strip.branches();
    let far = strip.far_window();

    let umax = sol.velocity.max_abs();
    let mut end = 0.0f64;
    for b in &branches {
        for i in 0..=16 {
            let s = far.0 + (far.1 - far.0) * i as f64 / 16.0;
            for j in 0..=4 {
                let t = -0.5 + 0.25 * j as f64;
                if let Some(u) = sol.velocity.eval_vector(&loc, b.point(s, t)) {
                    end = end.max(u.norm());
                }
            }
        }
    }
    if umax > 0.0 && end > 1e-6 * umax {
        return Err(Error::TruncationTooShort { end_ratio: end / umax });
    }

    let mut constants = Vec::new();
    let mut rates = Vec::new();
    let mut sensitivity = 0.0f64;
    for b in &branches {
        let p = extract_stabilization(&sol.pressure, &loc, b, far)?;
        constants.push(p.constant);
        rates.push(fit_decay_rate(&sol.velocity, &loc, b, bump.support() + 1.0, 3.0)?);
        sensitivity = sensitivity.max(p.sensitivity);
    }
    let c_plus = constants[1] - constants[0];
    // glue the pressure to vanish at -∞
    let mut pressure = sol.pressure;
    let left = constants[0];
    pressure.values.iter_mut().for_each(|p| *p -= left);
    constants.iter_mut().for_each(|c| *c -= left);
    let n_dofs = sol.velocity.values.len() + pressure.values.len();
    let scale = umax.max(f64::MIN_POSITIVE) * mesh.area().sqrt();
    Ok(CellProblemResult {
        solvability_defect: divergence_norm(&sol.velocity) / scale,
        field: sol.velocity,
        pressure: Some(pressure),
        locator: loc,
        constants,
        q_tilde: vec![c_plus],
        decay_rates: rates,
        sensitivity,
        c_plus: Some(c_plus),
        g: None,
        n_dofs,
    })
}
