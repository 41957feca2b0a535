//! Transverse correctors `c̃ⱼ(x₁, ξ₂)` and the mean profiles `c̄ⱼ`, j ≥ 1.
//!
//! `c̃ⱼ` solves `ϰ ∂²c̃ⱼ/∂ξ² = V ∂c_{j-2}/∂x₁ - ϰ ∂²c_{j-2}/∂x₁² - g δ_{j2}`
//! with `±ϰ ∂c̃ⱼ/∂ξ = β c_{j-2}` on `ξ = ±θ/2` and zero mean, where
//! `c_m = c̄_m + c̃_m`. Compatibility of the Neumann data is the 1D equation
//! of `c̄_{j-2}`; the second axial derivative of `c̄_{j-2}` is taken from that
//! equation, so the check holds up to rounding.

use alloc::vec;
use alloc::vec::Vec;

use super::network::solve_network;
use super::poly;
use super::Edge1DSolution;
use crate::tubegraph::TubeGraph;
use crate::{Error, Result};

/// Relative tolerance of the transverse Neumann compatibility check.
const SOLVABILITY_TOL: f64 = 1e-8;

/// Polynomial in `ξ₂` at every grid point of every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct TransversePolynomial {
    pub order: usize,
    /// `coeffs[edge][point]`, ascending powers of `ξ₂`.
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

impl TransversePolynomial {
    pub fn zero(order: usize, sol: &Edge1DSolution) -> Self {
        let coeffs = sol.grids.iter().map(|g| vec![vec![0.0; 2 * order + 1]; g.n + 1]).collect();
        Self { order, coeffs }
    }

    /// Largest degree over all grid points; `None` if identically zero.
    pub fn degree(&self, tol: f64) -> Option<usize> {
        self.coeffs.iter().flatten().filter_map(|p| poly::degree(p, tol)).max()
    }

    /// `(1/θ) ∫ c̃ dξ` at a grid point.
    pub fn mean(&self, edge: usize, i: usize, theta: f64) -> f64 {
        poly::integral(&self.coeffs[edge][i], -0.5 * theta, 0.5 * theta) / theta
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().flatten().flatten().all(|&c| c == 0.0)
    }
}

/// Output of [`corrector_recursion`].
#[derive(Debug, Clone)]
pub struct Corrector {
    /// `c̄₀ … c̄ₖ`.
    pub solution: Edge1DSolution,
    /// `c̃₀ … c̃ₖ₊₁`.
    pub tilde: Vec<TransversePolynomial>,
    /// Largest relative Neumann compatibility defect met.
    pub solvability_defect: f64,
}

/// Runs the recursion up to order `k ≤ 3`, returning `c̄ⱼ` for `j ≤ k` and
/// `c̃ⱼ` for `j ≤ k + 1`. Higher mean profiles use homogeneous port values
/// and homogeneous Kirchhoff balance.
pub fn corrector_recursion(graph: &TubeGraph, leading: &Edge1DSolution, k: usize) -> Result<Corrector> {
    if k > 3 {
        return Err(Error::OrderUnsupported { order: k });
    }
    let mut sol = leading.clone();
    sol.profiles.truncate(1);
    sol.sources.truncate(1);
    sol.nodal.truncate(1);
    sol.end_derivatives.truncate(1);
    let mut tilde = vec![TransversePolynomial::zero(0, &sol), TransversePolynomial::zero(1, &sol)];
    let mut worst: f64 = 0.0;
    for j in 1..=k + 1 {
        if j >= 2 {
            let (t, defect) = next_tilde(&sol, &tilde[j - 2], j)?;
            worst = worst.max(defect);
            tilde.push(t);
        }
        if j <= k {
            let f = mean_source(&sol, &tilde[j]);
            let s = solve_network(graph, &sol.coefficients, &sol.grids, &f, &|n| graph.port_data(n).map(|_| 0.0), sol.fitting)?;
            sol.profiles.push(s.values);
            sol.sources.push(f);
            sol.nodal.push(s.nodal);
            sol.end_derivatives.push(s.end_derivatives);
        }
    }
    tilde.truncate(k + 2);
    Ok(Corrector { solution: sol, tilde, solvability_defect: worst })
}

/// `β (c̃(θ/2) + c̃(-θ/2)) - ∫ V ∂c̃/∂x₁ dξ` on every grid.
fn mean_source(sol: &Edge1DSolution, t: &TransversePolynomial) -> Vec<Vec<f64>> {
    sol.grids
        .iter()
        .enumerate()
        .map(|(e, g)| {
            let hw = 0.5 * sol.thetas[e];
            let vp = profile(sol.amplitudes[e], hw);
            let tx = poly::d1_rows(&t.coeffs[e], g.h());
            (0..=g.n)
                .map(|i| {
                    let c = &t.coeffs[e][i];
                    sol.beta * (poly::eval(c, hw) + poly::eval(c, -hw)) - poly::integral(&poly::mul(&vp, &tx[i]), -hw, hw)
                })
                .collect()
        })
        .collect()
}

/// `A (h² - ξ²)` as coefficients.
fn profile(amplitude: f64, hw: f64) -> [f64; 3] {
    [amplitude * hw * hw, 0.0, -amplitude]
}

fn next_tilde(sol: &Edge1DSolution, prev: &TransversePolynomial, j: usize) -> Result<(TransversePolynomial, f64)> {
    let m = j - 2;
    let kappa = sol.kappa;
    let beta = sol.beta;
    let mut worst: f64 = 0.0;
    let mut coeffs = Vec::with_capacity(sol.grids.len());
    for (e, g) in sol.grids.iter().enumerate() {
        let theta = sol.thetas[e];
        let hw = 0.5 * theta;
        let c = sol.coefficients[e];
        let cbar = &sol.profiles[m][e];
        let f = &sol.sources[m][e];
        let cx = poly::d1(cbar, g.h());
        let tx = poly::d1_rows(&prev.coeffs[e], g.h());
        let txx = poly::d2_rows(&prev.coeffs[e], g.h());
        let vp = profile(sol.amplitudes[e], hw);
        let mut rows = Vec::with_capacity(g.n + 1);
        for i in 0..=g.n {
            // ϰθ c̄'' from the mean equation
            let cxx = (c.v * cx[i] - c.r * cbar[i] - f[i]) / c.a;
            let src = if m == 0 { f[i] / theta } else { 0.0 };
            let mut slope = tx[i].clone();
            poly::add_scaled(&mut slope, &[cx[i]], 1.0);
            let mut rhs = poly::mul(&vp, &slope);
            poly::add_scaled(&mut rhs, &txx[i], -kappa);
            poly::add_scaled(&mut rhs, &[kappa * cxx + src], -1.0);
            let fpoly: Vec<f64> = rhs.iter().map(|v| v / kappa).collect();
            let i1 = poly::antiderivative(&fpoly);
            let mut p = poly::antiderivative(&i1);
            let top = cbar[i] + poly::eval(&prev.coeffs[e][i], hw);
            let bottom = cbar[i] + poly::eval(&prev.coeffs[e][i], -hw);
            let alpha = -beta * bottom / kappa - poly::eval(&i1, -hw);
            let defect = poly::eval(&i1, hw) + alpha - beta * top / kappa;
            let scale = poly::eval(&i1, hw).abs() + poly::eval(&i1, -hw).abs() + (beta * top / kappa).abs() + (beta * bottom / kappa).abs();
            let rel = defect.abs() / scale.max(1.0);
            if rel > SOLVABILITY_TOL {
                return Err(Error::SolvabilityViolation { defect: rel });
            }
            worst = worst.max(rel);
            poly::add_scaled(&mut p, &[0.0, alpha], 1.0);
            let gamma = -poly::integral(&p, -hw, hw) / theta;
            p[0] += gamma;
            p.resize(2 * j + 1, 0.0);
            rows.push(p);
        }
        coeffs.push(rows);
    }
    Ok((TransversePolynomial { order: j, coeffs }, worst))
}

/// Cubic `ĉ(ξ)` with `ϰ ĉ'(θ/2) = β top` and `ϰ ĉ'(-θ/2) = -β bottom`:
/// `ϰ⁻¹ θ⁻² β [top (ξ - h)(ξ + h)² - bottom (ξ - h)²(ξ + h)]`, `h = θ/2`.
pub fn wall_corrector(top: &[f64], bottom: &[f64], theta: f64, kappa: f64, beta: f64) -> Vec<Vec<f64>> {
    let h = 0.5 * theta;
    let s = beta / (kappa * theta * theta);
    // (ξ - h)(ξ + h)² and -(ξ - h)²(ξ + h)
    let p = [-h * h * h, -h * h, h, 1.0];
    let q = [-h * h * h, h * h, h, -1.0];
    top.iter()
        .zip(bottom)
        .map(|(&a, &b)| (0..4).map(|k| s * (a * p[k] + b * q[k])).collect())
        .collect()
}
