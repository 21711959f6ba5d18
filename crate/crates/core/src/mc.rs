//! Monte Carlo estimators for Gaussian-weight integrals
//!
//!   I(f) = ∫_{ℝᵈ} f(x) e^{-‖x‖²/2} dx,
//!
//! the inner product of f with the constant 1 in the weighted space the
//! basis is orthonormal in.
//!
//! * **naive** — iid x_i ~ N(0, I): I ≈ (2π)^{d/2} · mean f(x_i).
//! * **bh** — from one N-point DPP configuration: I ≈ Σ_i f(x_i)/K_N(x_i,x_i).
//!   Unbiased because the one-point intensity of the projection DPP is
//!   exactly K_N(x,x)ω(x); repulsion drives the variance down faster than
//!   1/N.
//! * **ez** — solve the interpolation system Φ y = (f(x_i))_i with
//!   Φ_ij = φ_j(x_i) and read off I ≈ y_0 · (2π)^{d/4}, the coefficient of
//!   the constant function (1 = (2π)^{d/4} φ_0). Exact with zero variance
//!   whenever f lies in span{φ_0, …, φ_{N−1}}.
//!
//! Expectations under a general Gaussian N(μ, Σ) reduce to I via
//! [`gaussian_reparam`].

use crate::basis::KernelEval;
use crate::error::{Error, Result};
use crate::stats;
use nalgebra::{DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// R-diagonal ratio above which an EZ system is flagged as ill-conditioned.
pub const EZ_CONDITION_LIMIT: f64 = 1e12;

/// Plain Monte Carlo with iid standard normal nodes.
pub fn naive_estimate<R, F>(f: F, dim: usize, n_points: usize, rng: &mut R) -> f64
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    assert!(dim >= 1 && n_points >= 1);
    let normal = rand_distr::StandardNormal;
    let mut acc = 0.0;
    let mut x = vec![0.0; dim];
    for _ in 0..n_points {
        for xi in &mut x {
            *xi = rng.sample(normal);
        }
        acc += f(&x);
    }
    TWO_PI.powf(dim as f64 / 2.0) * acc / n_points as f64
}

/// The importance-style DPP estimator Σ_i f(x_i)/K_N(x_i, x_i). `kernel`
/// must evaluate the same rank-N kernel the configuration was drawn from.
pub fn bh_estimate<F>(f: F, points: &[Vec<f64>], kernel: &KernelEval) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if points.len() != kernel.basis().size() {
        return Err(Error::InvalidArg {
            what: format!(
                "bh estimator needs exactly N = {} points, got {}",
                kernel.basis().size(),
                points.len()
            ),
        });
    }
    let mut acc = 0.0;
    for p in points {
        let kxx = kernel.kernel_diag(p)?;
        acc += f(p) / kxx;
    }
    Ok(acc)
}

/// Result of one EZ solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EzSolution {
    pub estimate: f64,
    /// |R₀₀ / R_{N−1,N−1}| from the pivoted QR of Φ — a cheap condition
    /// number proxy (the pivoted R diagonal is non-increasing).
    pub condition: f64,
    pub ill_conditioned: bool,
}

/// Factored interpolation system for the EZ estimator: the N×N matrix
/// Φ_ij = φ_j(x_i) decomposed once by column-pivoted QR, after which each
/// integrand costs one triangular solve. An ill-conditioned or singular Φ is
/// reported through the solution flags, never by panicking — the draw is
/// still a valid DPP configuration, only this estimator gives up on it.
pub struct EzSolver {
    qr: nalgebra::ColPivQR<f64, Dyn, Dyn>,
    condition: f64,
    points: Vec<Vec<f64>>,
    dim_factor: f64,
}

impl EzSolver {
    pub fn factor(points: &[Vec<f64>], kernel: &KernelEval) -> Result<Self> {
        let n = kernel.basis().size();
        if points.len() != n {
            return Err(Error::InvalidArg {
                what: format!("ez solver needs exactly N = {n} points, got {}", points.len()),
            });
        }
        let mut phi = DMatrix::<f64>::zeros(n, n);
        for (i, p) in points.iter().enumerate() {
            let row = kernel.phi_all(p)?;
            for (j, v) in row.iter().enumerate() {
                phi[(i, j)] = *v;
            }
        }
        let qr = phi.col_piv_qr();
        let r = qr.r();
        let r_first = r[(0, 0)].abs();
        let r_last = r[(n - 1, n - 1)].abs();
        let condition = if r_last == 0.0 { f64::INFINITY } else { r_first / r_last };
        let dim_factor = TWO_PI.powf(kernel.basis().dim() as f64 / 4.0);
        Ok(Self { qr, condition, points: points.to_vec(), dim_factor })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solve for the coefficient vector of the given node values and return
    /// the integral estimate y₀ · (2π)^{d/4}.
    pub fn solve_values(&self, values: &[f64]) -> Result<EzSolution> {
        if values.len() != self.points.len() {
            return Err(Error::DimensionMismatch {
                expected: self.points.len(),
                got: values.len(),
            });
        }
        let rhs = DVector::from_column_slice(values);
        let ill = !self.condition.is_finite() || self.condition > EZ_CONDITION_LIMIT;
        match self.qr.solve(&rhs) {
            Some(y) => Ok(EzSolution {
                estimate: y[0] * self.dim_factor,
                condition: self.condition,
                ill_conditioned: ill,
            }),
            None => Ok(EzSolution {
                estimate: f64::NAN,
                condition: self.condition,
                ill_conditioned: true,
            }),
        }
    }

    /// Evaluate the integrand on the stored nodes and solve.
    pub fn estimate<F>(&self, f: F) -> Result<EzSolution>
    where
        F: Fn(&[f64]) -> f64,
    {
        let values: Vec<f64> = self.points.iter().map(|p| f(p)).collect();
        self.solve_values(&values)
    }
}

/// One-shot EZ estimate: factor Φ for these points and solve for f.
pub fn ez_estimate<F>(f: F, points: &[Vec<f64>], kernel: &KernelEval) -> Result<EzSolution>
where
    F: Fn(&[f64]) -> f64,
{
    EzSolver::factor(points, kernel)?.estimate(f)
}

/// Reduce E_{N(μ,Σ)}[f] to the canonical target: with Σ = LLᵀ,
///
///   E[f(Y)] = (2π)^{-d/2} ∫ f(μ + Lx) e^{-‖x‖²/2} dx = I(g),
///
/// g(x) = f(μ + Lx)/(2π)^{d/2}. `cov` is row-major d×d, symmetric positive
/// definite.
pub fn gaussian_reparam<F>(f: F, mean: &[f64], cov: &[f64]) -> Result<impl Fn(&[f64]) -> f64>
where
    F: Fn(&[f64]) -> f64,
{
    let d = mean.len();
    if cov.len() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, got: cov.len() });
    }
    let sigma = DMatrix::from_row_slice(d, d, cov);
    let chol = nalgebra::Cholesky::new(sigma)
        .ok_or_else(|| Error::Numerical { what: "covariance is not positive definite".into() })?;
    let l = chol.unpack();
    let mu = mean.to_vec();
    let norm = TWO_PI.powf(d as f64 / 2.0);
    Ok(move |x: &[f64]| {
        debug_assert_eq!(x.len(), mu.len());
        let mut y = mu.clone();
        for i in 0..y.len() {
            for (j, xj) in x.iter().enumerate().take(i + 1) {
                y[i] += l[(i, j)] * xj;
            }
        }
        f(&y) / norm
    })
}

/// Summary of repeated runs of one estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub dim: usize,
    pub n_points: usize,
    pub reps: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_err: f64,
    pub ill_conditioned_reps: usize,
}

impl EstimateReport {
    pub fn from_values(
        estimator: impl Into<String>,
        dim: usize,
        n_points: usize,
        values: &[f64],
        ill_conditioned_reps: usize,
    ) -> Self {
        let sd = stats::std_dev(values);
        Self {
            estimator: estimator.into(),
            dim,
            n_points,
            reps: values.len(),
            mean: stats::mean(values),
            std_dev: sd,
            std_err: sd / (values.len() as f64).sqrt(),
            ill_conditioned_reps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::OrderedBasis;
    use crate::dpp::DppSampler;
    use crate::quadrature;
    use crate::rmt::CalibrationTable;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    fn kernel_n(dim: usize, n: usize) -> KernelEval {
        KernelEval::new(OrderedBasis::new(dim, n).unwrap())
    }

    #[test]
    fn naive_recovers_second_moment() {
        // ∫ x² e^{-x²/2} dx = √(2π)
        let mut rng = substream(301, &[0]);
        let est = naive_estimate(|x| x[0] * x[0], 1, 200_000, &mut rng);
        let truth = TWO_PI.sqrt();
        // var(x²) = 2 under N(0,1), scaled by 2π.
        let se = TWO_PI.sqrt() * (2.0f64 / 200_000.0).sqrt();
        assert!((est - truth).abs() < 4.0 * se, "est {est} vs {truth}");
    }

    #[test]
    fn bh_telescopes_on_kernel_diagonal() {
        // f = K_N(·,·) makes every term f/K = 1, so the estimate is exactly
        // N for every configuration — matching ∫ K_N(x,x) ω dx = N.
        let mut table = CalibrationTable::new();
        let sampler = DppSampler::new(2, 7, &mut table).unwrap();
        let mut rng = substream(301, &[1]);
        let kernel = kernel_n(2, 7);
        for _ in 0..5 {
            let s = sampler.sample(&mut rng).unwrap();
            let est =
                bh_estimate(|x| kernel.kernel_diag(x).unwrap(), &s.points, &kernel).unwrap();
            assert_relative_eq!(est, 7.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn bh_is_unbiased_for_polynomial() {
        let mut table = CalibrationTable::new();
        let sampler = DppSampler::new(1, 10, &mut table).unwrap();
        let kernel = kernel_n(1, 10);
        let mut rng = substream(301, &[2]);
        let reps = 200;
        let vals: Vec<f64> = (0..reps)
            .map(|_| {
                let s = sampler.sample(&mut rng).unwrap();
                bh_estimate(|x| x[0] * x[0], &s.points, &kernel).unwrap()
            })
            .collect();
        let mean = stats::mean(&vals);
        let se = stats::std_dev(&vals) / (reps as f64).sqrt();
        let truth = TWO_PI.sqrt();
        assert!((mean - truth).abs() < 4.0 * se.max(1e-6), "mean {mean} vs {truth} (se {se})");
    }

    #[test]
    fn ez_reproduces_basis_coefficients() {
        let mut table = CalibrationTable::new();
        let sampler = DppSampler::new(1, 6, &mut table).unwrap();
        let kernel = kernel_n(1, 6);
        let mut rng = substream(301, &[3]);
        let s = sampler.sample(&mut rng).unwrap();
        // f = φ_0: coefficient vector e_0, estimate (2π)^{1/4} · φ_0-norm
        // constant = ∫ φ_0 dμ = (2π)^{1/4}.
        let f0 = ez_estimate(
            |x| crate::basis::psi_row(0, x[0]).unwrap()[0],
            &s.points,
            &kernel,
        )
        .unwrap();
        assert_relative_eq!(f0.estimate, TWO_PI.powf(0.25), max_relative = 1e-10);
        assert!(!f0.ill_conditioned);
        // f = φ_3: orthogonal to the constant, estimate exactly 0.
        let f3 = ez_estimate(
            |x| crate::basis::psi_row(3, x[0]).unwrap()[3],
            &s.points,
            &kernel,
        )
        .unwrap();
        assert!(f3.estimate.abs() < 1e-10, "got {}", f3.estimate);
    }

    #[test]
    fn ez_is_exact_with_zero_variance_on_spanned_polynomials() {
        // deg-5 polynomial ⊂ span{ψ_0..ψ_5}; N = 6 interpolates exactly.
        let f = |x: &[f64]| 1.0 + 0.5 * x[0] - 2.0 * x[0].powi(3) + 0.25 * x[0].powi(5);
        // truth: ∫ f dμ = √(2π)·E[f(Z)] = √(2π)·1 (odd moments vanish)
        let truth = TWO_PI.sqrt();
        let mut table = CalibrationTable::new();
        let sampler = DppSampler::new(1, 6, &mut table).unwrap();
        let kernel = kernel_n(1, 6);
        let mut rng = substream(301, &[4]);
        let estimates: Vec<f64> = (0..30)
            .map(|_| {
                let s = sampler.sample(&mut rng).unwrap();
                ez_estimate(f, &s.points, &kernel).unwrap().estimate
            })
            .collect();
        for e in &estimates {
            assert_relative_eq!(*e, truth, max_relative = 1e-9);
        }
        assert!(stats::std_dev(&estimates) < 1e-9 * truth);
    }

    #[test]
    fn estimators_agree_on_transcendental_integrand() {
        // ∫∫ cos(x+y) e^{-(x²+y²)/2} dx dy = 2π/e.
        let f = |x: &[f64]| (x[0] + x[1]).cos();
        let truth = TWO_PI / std::f64::consts::E;
        assert_relative_eq!(
            quadrature::integrate_2d(40, |x, y| (x + y).cos()),
            truth,
            max_relative = 1e-10
        );
        let mut rng = substream(302, &[0]);
        let naive = naive_estimate(f, 2, 400_000, &mut rng);
        assert!((naive - truth).abs() < 0.02, "naive {naive} vs {truth}");
        let mut table = CalibrationTable::new();
        let sampler = DppSampler::new(2, 25, &mut table).unwrap();
        let kernel = kernel_n(2, 25);
        let mut bh_vals = Vec::new();
        let mut ez_vals = Vec::new();
        for _ in 0..100 {
            let s = sampler.sample(&mut rng).unwrap();
            bh_vals.push(bh_estimate(f, &s.points, &kernel).unwrap());
            ez_vals.push(ez_estimate(f, &s.points, &kernel).unwrap().estimate);
        }
        let bh_mean = stats::mean(&bh_vals);
        let bh_se = stats::std_dev(&bh_vals) / 10.0;
        assert!((bh_mean - truth).abs() < 4.0 * bh_se, "bh {bh_mean} ± {bh_se} vs {truth}");
        let ez_mean = stats::mean(&ez_vals);
        let ez_se = stats::std_dev(&ez_vals) / 10.0;
        assert!((ez_mean - truth).abs() < 4.0 * ez_se, "ez {ez_mean} ± {ez_se} vs {truth}");
        // The spectral estimator should beat the importance weights here.
        assert!(stats::std_dev(&ez_vals) < stats::std_dev(&bh_vals));
    }

    #[test]
    fn ez_flags_singular_systems_without_panicking() {
        let mut table = CalibrationTable::new();
        let sampler = DppSampler::new(1, 5, &mut table).unwrap();
        let kernel = kernel_n(1, 5);
        let mut rng = substream(302, &[1]);
        let mut points = sampler.sample(&mut rng).unwrap().points;
        points[3] = points[0].clone(); // duplicated node ⇒ singular Φ
        let sol = ez_estimate(|x| x[0], &points, &kernel).unwrap();
        assert!(sol.ill_conditioned);
        assert!(sol.condition > EZ_CONDITION_LIMIT || sol.estimate.is_nan());
    }

    #[test]
    fn wrong_point_count_is_an_error() {
        let kernel = kernel_n(1, 5);
        let points = vec![vec![0.0], vec![1.0]];
        assert!(bh_estimate(|_| 1.0, &points, &kernel).is_err());
        assert!(EzSolver::factor(&points, &kernel).is_err());
    }

    #[test]
    fn reparam_matches_known_gaussian_expectations() {
        // d = 1: Y ~ N(2, 9), E[Y] = 2.
        let g = gaussian_reparam(|y| y[0], &[2.0], &[9.0]).unwrap();
        let val = quadrature::integrate_1d(20, |x| g(&[x]));
        assert_relative_eq!(val, 2.0, max_relative = 1e-10);
        // E[Y²] = μ² + σ² = 13.
        let g2 = gaussian_reparam(|y| y[0] * y[0], &[2.0], &[9.0]).unwrap();
        let val2 = quadrature::integrate_1d(20, |x| g2(&[x]));
        assert_relative_eq!(val2, 13.0, max_relative = 1e-10);
        // d = 2, Σ = diag(4, 1), μ = 0: E[‖Y‖²] = tr Σ = 5.
        let g3 =
            gaussian_reparam(|y| y[0] * y[0] + y[1] * y[1], &[0.0, 0.0], &[4.0, 0.0, 0.0, 1.0])
                .unwrap();
        let val3 = quadrature::integrate_2d(20, |x, y| g3(&[x, y]));
        assert_relative_eq!(val3, 5.0, max_relative = 1e-10);
        // correlated case: Σ = [[2, 1], [1, 2]], E[Y₁Y₂] = 1.
        let g4 = gaussian_reparam(|y| y[0] * y[1], &[0.0, 0.0], &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let val4 = quadrature::integrate_2d(20, |x, y| g4(&[x, y]));
        assert_relative_eq!(val4, 1.0, max_relative = 1e-10);
        // non-PSD covariance is rejected
        assert!(gaussian_reparam(|y| y[0], &[0.0, 0.0], &[1.0, 3.0, 3.0, 1.0]).is_err());
    }

    #[test]
    fn report_summarises_values() {
        let r = EstimateReport::from_values("naive", 1, 10, &[1.0, 2.0, 3.0], 0);
        assert_eq!(r.reps, 3);
        assert_relative_eq!(r.mean, 2.0);
        assert_relative_eq!(r.std_dev, 1.0);
        assert_relative_eq!(r.std_err, 1.0 / 3f64.sqrt());
    }
}
