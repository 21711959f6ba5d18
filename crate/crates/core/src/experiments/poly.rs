//! Random polynomial integration benchmark.
//!
//! A polynomial f(x) = Σ_ı a_ı Π_k x_k^{i_k} with exponents on the grid
//! {0,…,p}ᵈ has a closed-form Gaussian integral through the moments
//! m(i) = (i−1)!! (even i, m(0) = 1) and m(i) = 0 (odd i), so every estimate
//! can be scored against exact truth. Coefficients are drawn once from
//! U(−1,1) and frozen by the seed; the three estimators then run over a grid
//! of sample sizes with repeated sampling.

use crate::basis::{KernelEval, OrderedBasis};
use crate::dpp::DppSampler;
use crate::error::{Error, Result};
use crate::mc;
use crate::rmt::CalibrationTable;
use crate::rng;
use crate::stats;
use rand::Rng;
use serde::{Deserialize, Serialize};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// m(i): the i-th moment of the standard normal distribution.
pub fn gaussian_moment(i: usize) -> f64 {
    if i % 2 == 1 {
        return 0.0;
    }
    // (i−1)!! = (i−1)(i−3)···1; empty product for i = 0.
    let mut acc = 1.0;
    let mut k = i as i64 - 1;
    while k >= 2 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Dense polynomial over the exponent grid {0,…,degree}ᵈ. Coefficients are
/// stored in odometer order with the last coordinate's exponent varying
/// fastest (flat index q ↦ digits of q in base degree+1, most significant
/// digit = first coordinate).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialIntegrand {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl PolynomialIntegrand {
    pub fn new(dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidArg { what: "polynomial dimension must be >= 1".into() });
        }
        let want = (degree + 1).pow(dim as u32);
        if coeffs.len() != want {
            return Err(Error::InvalidArg {
                what: format!("expected {want} coefficients for degree {degree} in d={dim}"),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { what: "polynomial coefficient" });
        }
        Ok(Self { dim, degree, coeffs })
    }

    /// Coefficients iid U(−1, 1).
    pub fn random<R: Rng + ?Sized>(dim: usize, degree: usize, rng: &mut R) -> Self {
        let n = (degree + 1).pow(dim as u32);
        let coeffs = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self { dim, degree, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let base = self.degree + 1;
        // power table: pows[j][e] = x_j^e
        let pows: Vec<Vec<f64>> = x
            .iter()
            .map(|&xj| {
                let mut row = vec![1.0; base];
                for e in 1..base {
                    row[e] = row[e - 1] * xj;
                }
                row
            })
            .collect();
        let mut acc = 0.0;
        for (q, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut rem = q;
            let mut term = c;
            for j in (0..self.dim).rev() {
                term *= pows[j][rem % base];
                rem /= base;
            }
            acc += term;
        }
        acc
    }

    /// ∫ f dN(0, I) = Σ a_ı Π m(i_k): the integral against the *normalised*
    /// standard Gaussian.
    pub fn truth_normalized(&self) -> f64 {
        let base = self.degree + 1;
        let moments: Vec<f64> = (0..base).map(gaussian_moment).collect();
        let mut acc = 0.0;
        for (q, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut rem = q;
            let mut term = c;
            for _ in 0..self.dim {
                term *= moments[rem % base];
                rem /= base;
            }
            acc += term;
        }
        acc
    }

    /// ∫ f(x) e^{-‖x‖²/2} dx = (2π)^{d/2} × the normalised truth — the
    /// quantity the estimators target.
    pub fn truth_weighted(&self) -> f64 {
        TWO_PI.powf(self.dim as f64 / 2.0) * self.truth_normalized()
    }
}

/// One (estimator, N) row of the experiment table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyRow {
    pub estimator: String,
    pub dim: usize,
    pub degree: usize,
    pub n_points: usize,
    pub reps: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub truth: f64,
    pub ill_conditioned_reps: usize,
}

/// Configuration of one polynomial run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyConfig {
    pub dim: usize,
    pub degree: usize,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl PolyConfig {
    /// Reference configuration: degree 10 in d = 1, degree 5 otherwise.
    pub fn reference(dim: usize, seed: u64) -> Self {
        let degree = if dim == 1 { 10 } else { 5 };
        Self { dim, degree, n_grid: vec![10, 20, 40, 70, 100, 140, 200], reps: 30, seed }
    }
}

const TAG_COEFFS: u64 = 0x70;
const TAG_DPP: u64 = 0x71;
const TAG_NAIVE: u64 = 0x72;

/// Run the three estimators over the N grid. Per repetition the BH and EZ
/// estimators share one DPP configuration; the naive estimator uses N fresh
/// iid Gaussian nodes. EZ ill-conditioning is counted per row, never fatal.
pub fn run_poly_experiment(config: &PolyConfig) -> Result<Vec<PolyRow>> {
    let mut coeff_rng = rng::substream(config.seed, &[TAG_COEFFS]);
    let poly = PolynomialIntegrand::random(config.dim, config.degree, &mut coeff_rng);
    let truth = poly.truth_weighted();
    let mut table = CalibrationTable::new();
    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let sampler = DppSampler::new(config.dim, n, &mut table)?;
        let kernel = KernelEval::new(OrderedBasis::new(config.dim, n)?);

        let f = |x: &[f64]| poly.eval(x);
        let naive_vals = rng::run_reps(
            config.seed,
            TAG_NAIVE ^ ((n as u64) << 8),
            config.reps,
            |_, rng| mc::naive_estimate(f, config.dim, n, rng),
        );
        rows.push(PolyRow {
            estimator: "naive".into(),
            dim: config.dim,
            degree: config.degree,
            n_points: n,
            reps: config.reps,
            mean: stats::mean(&naive_vals),
            std_dev: stats::std_dev(&naive_vals),
            truth,
            ill_conditioned_reps: 0,
        });

        let dpp_runs: Vec<Result<(f64, mc::EzSolution)>> = rng::run_reps(
            config.seed,
            TAG_DPP ^ ((n as u64) << 8),
            config.reps,
            |_, rng| {
                let s = sampler.sample(rng)?;
                let bh = mc::bh_estimate(f, &s.points, &kernel)?;
                let ez = mc::ez_estimate(f, &s.points, &kernel)?;
                Ok((bh, ez))
            },
        );
        let mut bh_vals = Vec::with_capacity(config.reps);
        let mut ez_vals = Vec::with_capacity(config.reps);
        let mut ill = 0usize;
        for r in dpp_runs {
            let (bh, ez) = r?;
            bh_vals.push(bh);
            if ez.ill_conditioned {
                ill += 1;
            }
            ez_vals.push(ez.estimate);
        }
        rows.push(PolyRow {
            estimator: "bh".into(),
            dim: config.dim,
            degree: config.degree,
            n_points: n,
            reps: config.reps,
            mean: stats::mean(&bh_vals),
            std_dev: stats::std_dev(&bh_vals),
            truth,
            ill_conditioned_reps: 0,
        });
        rows.push(PolyRow {
            estimator: "ez".into(),
            dim: config.dim,
            degree: config.degree,
            n_points: n,
            reps: config.reps,
            mean: stats::mean(&ez_vals),
            std_dev: stats::std_dev(&ez_vals),
            truth,
            ill_conditioned_reps: ill,
        });
    }
    Ok(rows)
}
