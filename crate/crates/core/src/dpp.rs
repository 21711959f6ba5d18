//! Exact sampling of the rank-N Hermite projection DPP on ℝᵈ.
//!
//! The sampler runs in three stages, outermost first:
//!
//! 1. **Product stage** — a draw from f_{nᵈ}(x) = K_{nᵈ}(x,x)ω(x)/nᵈ, where
//!    n = ⌈N^{1/d}⌉. The first nᵈ basis indices under the 𝔟 order form the
//!    full grid {0,…,n−1}ᵈ, so K_{nᵈ}(x,x) factorises across coordinates and
//!    f_{nᵈ} is a product of d univariate spectral densities ρ_n — each
//!    coordinate is an independent [`crate::rmt::sample_rho`] draw.
//! 2. **General-N stage** — thinning from f_{nᵈ} to f_N = K_N(x,x)ω(x)/N by
//!    accepting with probability K_N(x,x)/K_{nᵈ}(x,x) ≤ 1 (K_N is a prefix
//!    sum of the same squared φ values). Mean acceptance is exactly N/nᵈ.
//! 3. **Chain stage** — the determinantal chain rule. Given accepted points
//!    y_1,…,y_k, the next point has conditional density
//!    [K_N(x,x) − k_k(x)ᵀ G_k⁻¹ k_k(x)]·ω(x)/(N−k) with G_k the Gram matrix
//!    [K_N(y_i,y_j)] and k_k(x) the cross-kernel vector. Proposals come from
//!    f_N with envelope N/(N−k); the accept probability simplifies to
//!    α(x) = 1 − ‖z‖²/K_N(x,x), z = L_k⁻¹ k_k(x), where L_k is the Cholesky
//!    factor of G_k, maintained incrementally one row per accepted point.
//!
//! Degeneracy policy: a vanishing Cholesky pivot is jittered (+1e−10) and
//! counted; repeated jitter or an exactly duplicated point restarts the whole
//! configuration. Counters for every stage ride along in the returned sample.

use crate::basis::{KernelEval, OrderedBasis};
use crate::error::{Error, Result};
use crate::rmt::{sample_rho_counted, CalibrationTable, RejectionCalibration, RejectionCounters};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Relative pivot threshold below which the chain stage jitters.
const PIVOT_REL_TOL: f64 = 1e-12;
/// Additive jitter applied to a vanishing pivot.
const PIVOT_JITTER: f64 = 1e-10;
/// Jitter events tolerated per configuration before a restart.
const MAX_JITTERS: u64 = 3;
/// Configuration restarts tolerated before giving up.
const MAX_RESTARTS: u64 = 50;
/// Total chain-stage proposal budget per configuration.
const MAX_CHAIN_PROPOSALS: u64 = 10_000_000;

/// Smallest n with nᵈ ≥ size (integer arithmetic throughout).
pub fn ceil_root(size: usize, dim: usize) -> usize {
    assert!(size >= 1 && dim >= 1);
    let mut n = 1usize;
    loop {
        let mut p = 1usize;
        let mut overflow = false;
        for _ in 0..dim {
            match p.checked_mul(n) {
                Some(v) => p = v,
                None => {
                    overflow = true;
                    break;
                }
            }
        }
        if overflow || p >= size {
            return n;
        }
        n += 1;
    }
}

/// Per-stage diagnostics accumulated while drawing one configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SampleCounters {
    /// univariate ρ_n rejection stage
    pub rho: RejectionCounters,
    /// general-N thinning stage (proposals from f_{nᵈ})
    pub general: RejectionCounters,
    /// chain-rule stage (proposals from f_N)
    pub chain: RejectionCounters,
    pub jitters: u64,
    pub restarts: u64,
    /// smallest / largest accept probability among accepted chain proposals
    pub min_alpha: f64,
    pub max_alpha: f64,
}

impl Default for SampleCounters {
    fn default() -> Self {
        Self {
            rho: RejectionCounters::default(),
            general: RejectionCounters::default(),
            chain: RejectionCounters::default(),
            jitters: 0,
            restarts: 0,
            min_alpha: f64::INFINITY,
            max_alpha: f64::NEG_INFINITY,
        }
    }
}

/// One exact draw of the N-point projection DPP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DppSample {
    pub dim: usize,
    pub n_points: usize,
    /// points in acceptance order; the configuration is exchangeable
    pub points: Vec<Vec<f64>>,
    /// root seed when drawn through [`sample_dpp`], None when the caller
    /// supplied its own generator
    pub seed: Option<u64>,
    pub counters: SampleCounters,
}

/// Sampler for the rank-N Hermite DPP in dimension d. Holds the full-grid
/// basis of size nᵈ (of which K_N is the length-N prefix) and the univariate
/// rejection calibration for side n.
#[derive(Debug, Clone)]
pub struct DppSampler {
    dim: usize,
    n_points: usize,
    side: usize,
    kernel: KernelEval,
    calibration: RejectionCalibration,
}

impl DppSampler {
    pub fn new(dim: usize, n_points: usize, table: &mut CalibrationTable) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidArg { what: "dimension must be >= 1".into() });
        }
        if n_points < 1 {
            return Err(Error::InvalidArg { what: "point count must be >= 1".into() });
        }
        let side = ceil_root(n_points, dim);
        let full = side.pow(dim as u32);
        let kernel = KernelEval::new(OrderedBasis::new(dim, full)?);
        let calibration = table.get_or_calibrate(side)?.clone();
        Ok(Self { dim, n_points, side, kernel, calibration })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// n = ⌈N^{1/d}⌉, the side of the proposal grid.
    pub fn side(&self) -> usize {
        self.side
    }

    /// All nᵈ basis values at x; K_N uses the first N entries.
    pub fn phi_full(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.kernel.phi_all(x)
    }

    /// K_N(x, x), the rank-N kernel diagonal.
    pub fn kernel_n_diag(&self, x: &[f64]) -> Result<f64> {
        let phi = self.kernel.phi_all(x)?;
        Ok(phi[..self.n_points].iter().map(|v| v * v).sum())
    }

    /// One draw from the product density f_{nᵈ}: d independent ρ_n samples.
    pub fn sample_f_power<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        counters: &mut SampleCounters,
    ) -> Result<Vec<f64>> {
        (0..self.dim)
            .map(|_| sample_rho_counted(self.side, &self.calibration, rng, &mut counters.rho))
            .collect()
    }

    /// One draw from f_N by thinning the product stage with probability
    /// K_N(x,x)/K_{nᵈ}(x,x). Returns the point together with its φ vector
    /// (all nᵈ entries) and K_N(x,x), which the chain stage reuses.
    fn sample_f_general_full<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        counters: &mut SampleCounters,
    ) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        loop {
            counters.general.proposals += 1;
            let x = self.sample_f_power(rng, counters)?;
            let phi = self.kernel.phi_all(&x)?;
            let kxx_n: f64 = phi[..self.n_points].iter().map(|v| v * v).sum();
            let kxx_full: f64 = kxx_n + phi[self.n_points..].iter().map(|v| v * v).sum::<f64>();
            if rng.gen::<f64>() < kxx_n / kxx_full {
                counters.general.accepts += 1;
                return Ok((x, phi, kxx_n));
            }
        }
    }

    /// One draw from f_N = K_N(x,x)ω(x)/N.
    pub fn sample_f_general<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        counters: &mut SampleCounters,
    ) -> Result<Vec<f64>> {
        self.sample_f_general_full(rng, counters).map(|(x, _, _)| x)
    }

    /// Draw one N-point configuration via the chain rule.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DppSample> {
        let n = self.n_points;
        let mut counters = SampleCounters::default();
        'restart: loop {
            if counters.restarts > MAX_RESTARTS {
                return Err(Error::Degenerate {
                    what: format!("chain sampler restarted {MAX_RESTARTS} times without success"),
                });
            }
            let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
            // φ vectors (first N entries) of accepted points; row i of the
            // Gram matrix is the dot of phis[i] with phis[j].
            let mut phis: Vec<Vec<f64>> = Vec::with_capacity(n);
            // lower-triangular Cholesky factor of the Gram matrix, row i
            // holding i+1 entries
            let mut ell: Vec<Vec<f64>> = Vec::with_capacity(n);
            let mut jitters_this_attempt = 0u64;
            let mut proposals_this_attempt = 0u64;
            while points.len() < n {
                let k = points.len();
                proposals_this_attempt += 1;
                if proposals_this_attempt > MAX_CHAIN_PROPOSALS {
                    return Err(Error::LowAcceptance { n, proposals: proposals_this_attempt });
                }
                counters.chain.proposals += 1;
                let (x, phi_full, kxx) = self.sample_f_general_full(rng, &mut counters)?;
                let phi_n = &phi_full[..n];
                // z = L_k^{-1} k_k(x) by forward substitution
                let mut z = vec![0.0; k];
                for i in 0..k {
                    let mut acc: f64 =
                        phis[i].iter().zip(phi_n).map(|(a, b)| a * b).sum();
                    for j in 0..i {
                        acc -= ell[i][j] * z[j];
                    }
                    z[i] = acc / ell[i][i];
                }
                let z_sq: f64 = z.iter().map(|v| v * v).sum();
                let mut s2 = kxx - z_sq;
                if s2 < -1e-8 * kxx {
                    // The Gram matrix has drifted off the PSD cone: the
                    // factorisation is no longer trustworthy.
                    counters.jitters += 1;
                    jitters_this_attempt += 1;
                    if jitters_this_attempt > MAX_JITTERS {
                        counters.restarts += 1;
                        continue 'restart;
                    }
                    continue;
                }
                let alpha = s2 / kxx;
                if rng.gen::<f64>() >= alpha {
                    continue;
                }
                if points.iter().any(|p| p == &x) {
                    counters.restarts += 1;
                    continue 'restart;
                }
                if s2 < PIVOT_REL_TOL * kxx {
                    counters.jitters += 1;
                    jitters_this_attempt += 1;
                    if jitters_this_attempt > MAX_JITTERS {
                        counters.restarts += 1;
                        continue 'restart;
                    }
                    s2 += PIVOT_JITTER;
                }
                counters.chain.accepts += 1;
                counters.min_alpha = counters.min_alpha.min(alpha);
                counters.max_alpha = counters.max_alpha.max(alpha);
                z.push(s2.sqrt());
                ell.push(z);
                phis.push(phi_n.to_vec());
                points.push(x);
            }
            return Ok(DppSample { dim: self.dim, n_points: n, points, seed: None, counters });
        }
    }
}

/// Convenience: build a sampler (calibrating side n if needed) and draw one
/// configuration from a seed-derived stream. The seed is recorded in the
/// sample.
pub fn sample_dpp(
    dim: usize,
    n_points: usize,
    seed: u64,
    table: &mut CalibrationTable,
) -> Result<DppSample> {
    let sampler = DppSampler::new(dim, n_points, table)?;
    let mut rng = rng::substream(seed, &[dim as u64, n_points as u64]);
    let mut sample = sampler.sample(&mut rng)?;
    sample.seed = Some(seed);
    Ok(sample)
}

/// Exact d = 1 oracle: the spectrum of an n×n GUE matrix *is* the rank-n
/// Hermite projection DPP (its joint density is the squared Vandermonde
/// times the Gaussian weight). Used to validate the chain sampler end to end.
pub fn sample_dpp_1d_gue<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<f64>> {
    Ok(crate::rmt::sample_gue_spectrum(n, rng)?.eigenvalues)
}
