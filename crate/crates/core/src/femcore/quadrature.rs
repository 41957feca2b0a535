//! Quadrature rules on the reference triangle and the unit interval.

use num_traits::Float;

/// Point in barycentric coordinates with weight normalized so that the
/// weights sum to 1 (multiply by the triangle area).
#[derive(Debug, Clone, Copy)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Seven-point rule exact for polynomials of degree 5.
pub fn triangle_degree5() -> [TriPoint; 7] {
    let s = 15.0f64.sqrt();
    let a1 = (9.0 - 2.0 * s) / 21.0;
    let b1 = (6.0 + s) / 21.0;
    let a2 = (9.0 + 2.0 * s) / 21.0;
    let b2 = (6.0 - s) / 21.0;
    let w1 = (155.0 + s) / 1200.0;
    let w2 = (155.0 - s) / 1200.0;
    let p = |bary: [f64; 3], weight: f64| TriPoint { bary, weight };
    [
        p([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        p([a1, b1, b1], w1),
        p([b1, a1, b1], w1),
        p([b1, b1, a1], w1),
        p([a2, b2, b2], w2),
        p([b2, a2, b2], w2),
        p([b2, b2, a2], w2),
    ]
}

/// Three-point Gauss-Legendre rule on [0, 1] (degree 5): (abscissa, weight).
pub fn gauss3() -> [(f64, f64); 3] {
    let d = 0.5 * (0.6f64).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}

/// Gauss-Legendre rule with `n` points on [0, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> alloc::vec::Vec<(f64, f64)> {
    let mut out = alloc::vec::Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * x * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (x * p1 - p2) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn degree5_monomials_on_reference_triangle() {
        // ∫_T x^a y^b = a! b! / (a + b + 2)! on the unit right triangle (area 1/2)
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let q: f64 = triangle_degree5()
                    .iter()
                    .map(|p| 0.5 * p.weight * p.bary[1].powi(a as i32) * p.bary[2].powi(b as i32))
                    .sum();
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                assert!((q - exact).abs() < 1e-14, "x^{a} y^{b}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for k in 0..=5 {
            let q: f64 = gauss3().iter().map(|&(x, w)| w * x.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
        let rule = gauss_legendre(8);
        for k in 0..=15 {
            let q: f64 = rule.iter().map(|&(x, w)| w * x.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "k={k}");
        }
    }
}
