//! Reference computations that avoid the eigendecomposition.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dynamics::{EigenData, LatticeOperator};

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// ∫ f over (−∞, ∞) via E = center + scale·tan φ and composite
/// Gauss–Legendre on (−π/2, π/2).
pub fn integrate_real_line(f: impl Fn(f64) -> f64, center: f64, scale: f64, panels: usize) -> f64 {
    integrate_real_line_vec(|e| vec![f(e)], center, scale, panels)[0]
}

/// Componentwise `integrate_real_line` for vector-valued integrands.
pub fn integrate_real_line_vec(f: impl Fn(f64) -> Vec<f64>, center: f64, scale: f64, panels: usize) -> Vec<f64> {
    let (x, w) = gauss_legendre(16);
    let h = PI / panels as f64;
    let mut total: Vec<f64> = Vec::new();
    for k in 0..panels {
        let mid = -PI / 2.0 + (k as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            let phi = mid + 0.5 * h * xi;
            let c = phi.cos();
            let weight = 0.5 * h * wi * scale / (c * c);
            let values = f(center + scale * phi.tan());
            if total.is_empty() {
                total = vec![0.0; values.len()];
            }
            for (t, v) in total.iter_mut().zip(values) {
                *t += weight * v;
            }
        }
    }
    total
}

fn hamiltonian(op: &LatticeOperator, x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut y = x[i] * op.diagonal[i];
            if i > 0 {
                y += x[i - 1];
            }
            if i + 1 < n {
                y += x[i + 1];
            }
            y
        })
        .collect()
}

/// e^{−iH dt} x by Taylor series.
fn propagate(op: &LatticeOperator, x: &[Complex64], dt: f64) -> Vec<Complex64> {
    let mut out = x.to_vec();
    let mut term = x.to_vec();
    let factor = Complex64::new(0.0, -dt);
    for k in 1..200 {
        term = hamiltonian(op, &term).into_iter().map(|v| v * factor / k as f64).collect();
        let size = term.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (o, t) in out.iter_mut().zip(&term) {
            *o += t;
        }
        if size < 1e-20 {
            break;
        }
    }
    out
}

/// a(n, T) from (1/T)∫₀^{20T} e^{−2t/T}|⟨δ_n, e^{−itH}δ_o⟩|² dt, with the
/// state propagated by Taylor steps and the integral by 16-point
/// Gauss–Legendre panels of width `panel`.
pub fn abel_by_time_quadrature(op: &LatticeOperator, t: f64, panel: f64) -> Vec<f64> {
    let n = op.size();
    let (x, w) = gauss_legendre(16);
    let mut psi = vec![Complex64::default(); n];
    psi[op.origin()] = Complex64::new(1.0, 0.0);
    let mut clock = 0.0;
    let mut out = vec![0.0; n];
    let panels = (20.0 * t / panel).ceil() as usize;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * panel;
        for (xi, wi) in x.iter().zip(&w) {
            let time = mid + 0.5 * panel * xi;
            psi = propagate(op, &psi, time - clock);
            clock = time;
            let weight = 0.5 * panel * wi * (-2.0 * time / t).exp() / t;
            for (o, v) in out.iter_mut().zip(&psi) {
                *o += weight * v.norm_sqr();
            }
        }
    }
    out
}

/// a(n, T) from (ε/2π)∫|⟨δ_n, (H − E − iε)⁻¹δ_o⟩|² dE with ε = 1/T.
pub fn abel_by_parseval(op: &LatticeOperator, t: f64, panels: usize) -> Vec<f64> {
    let eps = 1.0 / t;
    let column = |e: f64| op.resolvent_column(Complex64::new(e, eps)).iter().map(|g| g.norm_sqr()).collect();
    integrate_real_line_vec(column, 0.0, 2.0, panels).into_iter().map(|v| v * eps / (2.0 * PI)).collect()
}

/// ∫ Im F(E + iε) dE, which equals π times the spectral mass.
pub fn borel_mass(eig: &EigenData, eps: f64, panels: usize) -> f64 {
    integrate_real_line(
        |e| crate::dynamics::borel_transform(eig, e, eps).map(|f| f.im).unwrap_or(f64::NAN),
        0.0,
        2.0,
        panels,
    )
}

/// Σ_{j,k} u_j(n)u_j(o)u_k(n)u_k(o)·2/(4 + T²(E_j − E_k)²), term by term.
pub fn abel_double_sum(eig: &EigenData, t: f64) -> Vec<f64> {
    let n = eig.size();
    let w = eig.origin_weights();
    (0..n)
        .map(|site| {
            let c: Vec<f64> = (0..n).map(|j| eig.vector(j)[site] * w[j]).collect();
            let mut total = 0.0;
            for j in 0..n {
                for k in 0..n {
                    let d = t * (eig.values[j] - eig.values[k]);
                    total += c[j] * c[k] * 2.0 / (4.0 + d * d);
                }
            }
            total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rules_integrate_polynomials() {
        let (x, w) = gauss_legendre(16);
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        let moment: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((moment - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn lorentzian_integral() {
        let v = integrate_real_line(|e| 0.1 / (e * e + 0.01), 0.0, 1.0, 400);
        assert!((v - PI).abs() < 1e-10);
    }
}
