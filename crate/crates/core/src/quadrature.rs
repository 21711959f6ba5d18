//! Gauss–Hermite quadrature for the weight e^{-x²/2} dx.
//!
//! Node seeds come from the Golub–Welsch eigenproblem for the Jacobi matrix
//! of the monic probabilists' Hermite recurrence x·p_j = p_{j+1} + j·p_{j-1}
//! (zero diagonal, off-diagonal √j), then get polished to machine precision
//! by Newton iteration on ψ_n — the dense eigensolver alone is only ~1e-8
//! accurate, which is not good enough for an oracle. Weights come from the
//! Christoffel function of the orthonormal family, w_i = 1/Σ_{j<n} ψ_j(x_i)².
//! An n-point rule integrates polynomials up to degree 2n−1 exactly.

use crate::basis::psi_row;
use nalgebra::DMatrix;

/// Nodes and weights of the n-point rule for ∫ f(x) e^{-x²/2} dx.
/// Nodes are returned in increasing order; weights sum to √(2π).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for j in 1..n {
        let b = (j as f64).sqrt();
        jac[(j - 1, j)] = b;
        jac[(j, j - 1)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sqrt_n = (n as f64).sqrt();
    let mut weights = Vec::with_capacity(n);
    for x in &mut nodes {
        // Newton on ψ_n(x) = 0 with ψ_n'(x) = √n ψ_{n-1}(x).
        for _ in 0..4 {
            let row = psi_row(n, *x).expect("finite node");
            let step = row[n] / (sqrt_n * row[n - 1]);
            *x -= step;
            if step.abs() < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        let row = psi_row(n - 1, *x).expect("finite node");
        let christoffel: f64 = row.iter().map(|v| v * v).sum();
        weights.push(1.0 / christoffel);
    }
    (nodes, weights)
}

/// ∫ f(x) e^{-x²/2} dx by the n-point rule.
pub fn integrate_1d(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(n);
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(xi)).sum()
}

/// ∫∫ f(x, y) e^{-(x²+y²)/2} dx dy by the tensor rule with n points per axis.
pub fn integrate_2d(n: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(n);
    let mut acc = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        for (j, &xj) in x.iter().enumerate() {
            acc += w[i] * w[j] * f(xi, xj);
        }
    }
    acc
}
