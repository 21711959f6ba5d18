//! Direction-only Gaussian orthonormal functions and their rejection diagnostics.
//!
//! For x ∈ ℝᵈ (d ≥ 2) write u = x/‖x‖₂. Everything here depends on x through u
//! alone: with 𝐧 = (n₁, …, n_d) ∈ ℕᵈ, n_d ∈ {0, 1},
//!
//!   φ_𝐧(x) = a_𝐧^{-1/2} · (∏_{j≤d−2} h_j) · χ_𝐧(u),
//!   χ_𝐧(u) = g_{n_{d−1}, n_d}(u) ∏_{j=1}^{d−2} r_j^{n_j} C_{n_j}^{(λ_j)}(u_j / r_j),
//!
//! where r_j² = u_j² + … + u_d², ρ² = u_{d−1}² + u_d², g_{s,0} = ρˢ T_s(u_{d−1}/ρ),
//! g_{s,1} = u_d ρˢ U_s(u_{d−1}/ρ), β_j = Σ_{i>j} n_i, λ_j = (d−j−1)/2 + β_j, and
//! a_𝐧 = ½ if n_{d−1} + n_d > 0 else 1. The prefactors
//! h_j² = n_j! ((d−j+1)/2)_{β_j} (n_j+λ_j) / (λ_j (2λ_j)_{n_j} ((d−j)/2)_{β_j})
//! make {φ_𝐧} orthonormal for the standard Gaussian: E[φ_𝐧 φ_𝐦] = δ_{𝐧𝐦}.
//!
//! Since |T_s| ≤ 1 and |sin θ · U_s(cos θ)| ≤ 1, the ratio φ_𝐧(x)² N(x; 0, I_d) /
//! N(x; 0, I_d) admits the closed-form bound
//!
//!   M_𝐧 = a_𝐧^{-1} ∏_{j=1}^{d−2} (n_j + λ_j) B((d−j)/2 + β_j, ½) / (λ_j B((d−j)/2, ½)),
//!
//! evaluated in log space. M_𝐧 equals sup φ_𝐧² exactly in d = 2 and along d = 3
//! indices (k, 0, 0); for indices with nonzero trailing degrees the product form
//! can undershoot the true supremum, which [`acceptance_report`] surfaces through
//! its violation counter. Rejection sampling from φ_𝐧(·)² N(·; 0, I_d) with the
//! Gaussian itself as proposal accepts a draw x when u·M_𝐧 < φ_𝐧(x)² for
//! u ~ U[0, 1) (equivalently, rejects when φ_𝐧(x)² ≤ M_𝐧 u). Orthonormality gives
//! E[φ²] = 1, so the acceptance rate is exactly 1/M_𝐧: it decays like 1/(2k+1)
//! along (k, 0, 0) in d = 3, which is what rules this basis out as a practical
//! sampling ingredient and confines the module to diagnostics.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Chebyshev polynomial of the first kind, T_n(x), by the three-term recurrence.
pub fn chebyshev_t(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    for _ in 1..n {
        (prev, cur) = (cur, 2.0 * x * cur - prev);
    }
    cur
}

/// Chebyshev polynomial of the second kind, U_n(x).
pub fn chebyshev_u(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    for _ in 1..n {
        (prev, cur) = (cur, 2.0 * x * cur - prev);
    }
    cur
}

/// Gegenbauer polynomial C_n^{(λ)}(x), λ > 0:
/// C₀ = 1, C₁ = 2λx, n·C_n = 2x(n+λ−1)·C_{n−1} − (n+2λ−2)·C_{n−2}.
pub fn gegenbauer(n: usize, lambda: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 2.0 * lambda * x);
    for k in 2..=n {
        let k_f = k as f64;
        let next = (2.0 * x * (k_f + lambda - 1.0) * cur - (k_f + 2.0 * lambda - 2.0) * prev) / k_f;
        (prev, cur) = (cur, next);
    }
    cur
}

/// Endpoint coefficient c_{n,λ} = Γ(n/2 + λ) / (Γ(λ) Γ(n/2 + 1)) in the uniform
/// Gegenbauer bound |C_n^{(λ)}(x)| ≤ c_{2n,2λ} x² + c_{n,λ} (1 − x²) on [−1, 1].
pub fn gegenbauer_coeff_bound(n: usize, lambda: f64) -> f64 {
    let half_n = 0.5 * n as f64;
    (ln_gamma(half_n + lambda) - ln_gamma(lambda) - ln_gamma(half_n + 1.0)).exp()
}

fn ln_poch(q: f64, k: f64) -> f64 {
    ln_gamma(q + k) - ln_gamma(q)
}

/// Multi-index 𝐧 of a direction-only basis function on ℝᵈ.
///
/// Requires d ≥ 2 and n_d ∈ {0, 1}; the remaining entries are free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SphericalIndex {
    degrees: Vec<usize>,
}

impl SphericalIndex {
    pub fn new(degrees: Vec<usize>) -> Result<Self> {
        if degrees.len() < 2 {
            return Err(Error::InvalidArg {
                what: format!("spherical index needs at least 2 entries, got {}", degrees.len()),
            });
        }
        let last = *degrees.last().expect("nonempty");
        if last > 1 {
            return Err(Error::InvalidArg {
                what: format!("last index entry must be 0 or 1, got {last}"),
            });
        }
        Ok(Self { degrees })
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// a_𝐧 = ½ when n_{d−1} + n_d > 0, else 1.
    pub fn a(&self) -> f64 {
        let d = self.dim();
        if self.degrees[d - 2] + self.degrees[d - 1] > 0 {
            0.5
        } else {
            1.0
        }
    }

    /// β_j = Σ_{i>j} n_i, 1-based j.
    fn beta(&self, j: usize) -> usize {
        self.degrees[j..].iter().sum()
    }

    /// λ_j = (d−j−1)/2 + β_j, 1-based j ≤ d−2.
    fn lambda(&self, j: usize) -> f64 {
        0.5 * (self.dim() - j - 1) as f64 + self.beta(j) as f64
    }

    /// log ∏ h_j (the orthonormalising prefactor, a_𝐧 excluded).
    fn log_norm(&self) -> f64 {
        let d = self.dim();
        let mut log_h2 = 0.0;
        for j in 1..=d.saturating_sub(2) {
            let nj = self.degrees[j - 1] as f64;
            let beta = self.beta(j) as f64;
            let lam = self.lambda(j);
            log_h2 += ln_gamma(nj + 1.0) + ln_poch(0.5 * (d - j + 1) as f64, beta)
                + (nj + lam).ln()
                - lam.ln()
                - ln_poch(2.0 * lam, nj)
                - ln_poch(0.5 * (d - j) as f64, beta);
        }
        0.5 * log_h2
    }
}

/// Evaluates φ_𝐧(x). Fails on a dimension mismatch, non-finite input, or x = 0
/// (the direction of the zero vector is undefined).
pub fn phi_spherical(index: &SphericalIndex, x: &[f64]) -> Result<f64> {
    let d = index.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    if !norm2.is_finite() {
        return Err(Error::NonFinite { what: "spherical input point" });
    }
    if norm2 == 0.0 {
        return Err(Error::SingularInput);
    }
    let inv = norm2.sqrt().recip();
    let u: Vec<f64> = x.iter().map(|v| v * inv).collect();

    let n = index.degrees();
    let rho = (u[d - 2] * u[d - 2] + u[d - 1] * u[d - 1]).sqrt();
    let s = n[d - 2];
    // g_{s,ε}: at ρ = 0 every nonconstant branch vanishes (u_{d−1} = u_d = 0).
    let g = if n[d - 1] == 0 {
        if s == 0 {
            1.0
        } else if rho == 0.0 {
            0.0
        } else {
            rho.powi(s as i32) * chebyshev_t(s, (u[d - 2] / rho).clamp(-1.0, 1.0))
        }
    } else if rho == 0.0 {
        0.0
    } else {
        u[d - 1] * rho.powi(s as i32) * chebyshev_u(s, (u[d - 2] / rho).clamp(-1.0, 1.0))
    };

    // r_j² = u_j² + … + u_d² via suffix sums; suffix[i] is the 0-based tail from i.
    let mut suffix = vec![0.0; d + 1];
    for i in (0..d).rev() {
        suffix[i] = suffix[i + 1] + u[i] * u[i];
    }
    let mut chi = g;
    for j in 1..=d.saturating_sub(2) {
        let nj = n[j - 1];
        if nj == 0 {
            continue;
        }
        let r = suffix[j - 1].sqrt();
        if r == 0.0 {
            chi = 0.0;
            break;
        }
        chi *= r.powi(nj as i32) * gegenbauer(nj, index.lambda(j), (u[j - 1] / r).clamp(-1.0, 1.0));
    }
    Ok(chi * index.log_norm().exp() / index.a().sqrt())
}

/// log M_𝐧, accumulated through log-Beta so large indices cannot overflow.
pub fn log_bound_m(index: &SphericalIndex) -> f64 {
    let d = index.dim();
    let mut log_m = -index.a().ln();
    for j in 1..=d.saturating_sub(2) {
        let nj = index.degrees[j - 1] as f64;
        let beta = index.beta(j) as f64;
        let lam = index.lambda(j);
        log_m += (nj + lam).ln() - lam.ln() + ln_beta(0.5 * (d - j) as f64 + beta, 0.5)
            - ln_beta(0.5 * (d - j) as f64, 0.5);
    }
    log_m
}

/// M_𝐧 itself; +∞ if the log form exceeds f64 range.
pub fn bound_m(index: &SphericalIndex) -> f64 {
    log_bound_m(index).exp()
}

/// Outcome of a rejection run for φ_𝐧(·)² N(·; 0, I_d) with Gaussian proposals.
#[derive(Debug, Clone, Serialize)]
pub struct AcceptanceReport {
    pub index: Vec<usize>,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "log_M")]
    pub log_m: f64,
    pub acceptance: f64,
    pub trials: u64,
    /// Draws with φ² > M·(1 + 1e−9): nonzero means M is not a bound for this 𝐧.
    pub violations: u64,
}

/// Runs `trials` proposals x ~ N(0, I_d), accepting when u·M_𝐧 < φ_𝐧(x)².
pub fn acceptance_report<R: Rng + ?Sized>(
    index: &SphericalIndex,
    trials: u64,
    rng: &mut R,
) -> AcceptanceReport {
    let d = index.dim();
    let log_m = log_bound_m(index);
    let m = log_m.exp();
    let mut accepts = 0u64;
    let mut violations = 0u64;
    let mut x = vec![0.0; d];
    for _ in 0..trials {
        for xi in x.iter_mut() {
            *xi = rng.sample(StandardNormal);
        }
        let phi2 = phi_spherical(index, &x).map(|v| v * v).unwrap_or(0.0);
        if phi2 > m * (1.0 + 1e-9) {
            violations += 1;
        }
        if rng.gen::<f64>() * m < phi2 {
            accepts += 1;
        }
    }
    AcceptanceReport {
        index: index.degrees().to_vec(),
        m,
        log_m,
        acceptance: accepts as f64 / trials as f64,
        trials,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::stats::{chi2_gof, mean, std_dev};
    use std::f64::consts::PI;

    fn idx(v: &[usize]) -> SphericalIndex {
        SphericalIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn chebyshev_and_gegenbauer_base_cases() {
        assert_eq!(chebyshev_t(0, 0.37), 1.0);
        assert!((chebyshev_t(1, 0.37) - 0.37).abs() < 1e-15);
        assert!((chebyshev_t(2, 0.5) + 0.5).abs() < 1e-15);
        assert_eq!(chebyshev_u(0, -0.8), 1.0);
        assert!((chebyshev_u(1, 0.3) - 0.6).abs() < 1e-15);
        for &x in &[-0.9, -0.2, 0.0, 0.6, 1.0] {
            assert_eq!(gegenbauer(0, 1.7, x), 1.0);
            assert!((gegenbauer(1, 1.7, x) - 2.0 * 1.7 * x).abs() < 1e-14);
            // series form C₂^{(λ)}(x) = 2λ(1+λ)x² − λ
            let lam = 0.8;
            let series = 2.0 * lam * (1.0 + lam) * x * x - lam;
            assert!((gegenbauer(2, lam, x) - series).abs() < 1e-14);
        }
        assert!((gegenbauer(2, 1.0, 1.0) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn gegenbauer_endpoint_coefficient_bound() {
        // The quadratic interpolant c_{2n,2λ}x² + c_{n,λ}(1−x²) dominates |C_n^{(λ)}|
        // on the whole grid except (n, λ) = (1, 2.5): |C₁| = 2λ|x| is linear, and for
        // λ > 1 it overshoots the interpolant near the endpoints (peak ratio ≈ 1.056
        // at x ≈ ±0.717). Only the endpoint value c_{2n,2λ} = C_n^{(λ)}(1) feeds the
        // sampler bound M_𝐧, and that one is exact for every λ > 0.
        for n in 1..=8usize {
            for &lam in &[0.5, 1.0, 2.5] {
                let c_end = gegenbauer_coeff_bound(2 * n, 2.0 * lam);
                let c_mid = gegenbauer_coeff_bound(n, lam);
                assert!((gegenbauer(n, lam, 1.0) - c_end).abs() <= 1e-10 * c_end);
                let max_ratio = (0..=400)
                    .map(|k| {
                        let x = -1.0 + 2.0 * k as f64 / 400.0;
                        gegenbauer(n, lam, x).abs() / (c_end * x * x + c_mid * (1.0 - x * x))
                    })
                    .fold(0.0f64, f64::max);
                if n == 1 && lam == 2.5 {
                    assert!(max_ratio > 1.05, "expected the known overshoot, got {max_ratio}");
                } else {
                    assert!(max_ratio <= 1.0 + 1e-12, "n={n} λ={lam}: ratio {max_ratio}");
                }
            }
        }
    }

    #[test]
    fn index_validation() {
        assert!(SphericalIndex::new(vec![3]).is_err());
        assert!(SphericalIndex::new(vec![1, 2]).is_err());
        assert!(SphericalIndex::new(vec![0, 0, 2]).is_err());
        assert!(SphericalIndex::new(vec![4, 1]).is_ok());
        assert!(SphericalIndex::new(vec![0, 3, 1]).is_ok());
        assert!(matches!(
            phi_spherical(&idx(&[1, 0]), &[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn zero_index_is_constant_one() {
        let mut rng = substream(0x5F0A, &[1]);
        for d in [2usize, 3, 5] {
            let n = idx(&vec![0; d]);
            assert!((bound_m(&n) - 1.0).abs() < 1e-14);
            for _ in 0..20 {
                let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                assert!((phi_spherical(&n, &x).unwrap() - 1.0).abs() < 1e-12);
            }
            let rep = acceptance_report(&n, 2000, &mut rng);
            assert_eq!(rep.acceptance, 1.0);
            assert_eq!(rep.violations, 0);
        }
    }

    #[test]
    fn phi_depends_only_on_direction() {
        let mut rng = substream(0x5F0A, &[2]);
        let cases = [idx(&[2, 1]), idx(&[1, 2, 0]), idx(&[2, 0, 1, 1])];
        for n in &cases {
            for _ in 0..50 {
                let x: Vec<f64> = (0..n.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let scaled: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
                let a = phi_spherical(n, &x).unwrap();
                let b = phi_spherical(n, &scaled).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
        assert!(matches!(phi_spherical(&idx(&[1, 0]), &[0.0, 0.0]), Err(Error::SingularInput)));
    }

    #[test]
    fn d2_basis_is_orthonormal_under_gaussian() {
        let mut rng = substream(0x5F0A, &[3]);
        let indices: Vec<SphericalIndex> = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)]
            .iter()
            .map(|&(a, b)| idx(&[a, b]))
            .collect();
        check_orthonormal(&indices, 100_000, &mut rng);
    }

    #[test]
    fn d3_basis_is_orthonormal_under_gaussian() {
        let mut rng = substream(0x5F0A, &[4]);
        let indices: Vec<SphericalIndex> = [
            [0, 0, 0],
            [1, 0, 0],
            [2, 0, 0],
            [0, 1, 0],
            [0, 2, 0],
            [1, 1, 0],
            [0, 0, 1],
            [1, 0, 1],
            [0, 1, 1],
        ]
        .iter()
        .map(|v| idx(v))
        .collect();
        check_orthonormal(&indices, 100_000, &mut rng);
    }

    fn check_orthonormal(indices: &[SphericalIndex], draws: usize, rng: &mut impl Rng) {
        let d = indices[0].dim();
        let mut vals: Vec<Vec<f64>> =
            (0..indices.len()).map(|_| Vec::with_capacity(draws)).collect();
        for _ in 0..draws {
            let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            for (v, n) in vals.iter_mut().zip(indices) {
                v.push(phi_spherical(n, &x).unwrap());
            }
        }
        for i in 0..indices.len() {
            for j in i..indices.len() {
                let prod: Vec<f64> = vals[i].iter().zip(&vals[j]).map(|(a, b)| a * b).collect();
                let m = mean(&prod);
                let se = std_dev(&prod) / (draws as f64).sqrt();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (m - target).abs() <= 3.0 * se + 1e-3,
                    "⟨{:?},{:?}⟩ = {m} (se {se})",
                    indices[i].degrees(),
                    indices[j].degrees()
                );
            }
        }
    }

    #[test]
    fn bound_m_closed_forms() {
        assert!((bound_m(&idx(&[1, 0, 0])) - 3.0).abs() < 1e-12);
        assert!((bound_m(&idx(&[8, 0, 0])) - 17.0).abs() < 1e-12);
        for &(a, b) in &[(1usize, 0usize), (3, 0), (0, 1), (2, 1)] {
            assert!((bound_m(&idx(&[a, b])) - 2.0).abs() < 1e-14);
        }
        let mut prev = 1.0;
        for k in 1..=20 {
            let m = bound_m(&idx(&[k, 0, 0]));
            assert!((m - (2 * k + 1) as f64).abs() < 1e-10 * m, "k={k}: {m}");
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn bound_holds_on_gaussian_draws() {
        let mut rng = substream(0x5F0A, &[5]);
        let cases = [
            idx(&[1, 0]),
            idx(&[2, 1]),
            idx(&[1, 0, 0]),
            idx(&[2, 0, 0]),
            idx(&[4, 0, 0]),
            idx(&[8, 0, 0]),
        ];
        for n in &cases {
            let m = bound_m(n);
            let d = n.dim();
            for _ in 0..100_000 {
                let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let phi = phi_spherical(n, &x).unwrap();
                assert!(
                    phi * phi <= m * (1.0 + 1e-9),
                    "𝐧 = {:?}: φ² = {} > M = {m}",
                    n.degrees(),
                    phi * phi
                );
            }
        }
    }

    #[test]
    fn acceptance_matches_reciprocal_bound() {
        let mut rng = substream(0x5F0A, &[6]);
        let trials = 100_000u64;
        let mut last = f64::INFINITY;
        for k in [1usize, 2, 4, 8] {
            let rep = acceptance_report(&idx(&[k, 0, 0]), trials, &mut rng);
            let p = 1.0 / (2 * k + 1) as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert_eq!(rep.violations, 0);
            assert!(
                (rep.acceptance - p).abs() <= 3.0 * se,
                "k={k}: {} vs {p}",
                rep.acceptance
            );
            assert!(rep.acceptance <= last);
            last = rep.acceptance;
        }
        let rep = acceptance_report(&idx(&[3, 1]), trials, &mut rng);
        let se = (0.25f64 / trials as f64).sqrt();
        assert!((rep.acceptance - 0.5).abs() <= 3.0 * se);
    }

    #[test]
    fn accepted_d2_samples_follow_angular_density() {
        let mut rng = substream(0x5F0A, &[7]);
        let n = idx(&[2, 0]);
        let m = bound_m(&n);
        let mut angles = Vec::with_capacity(6000);
        while angles.len() < 6000 {
            let x = [
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ];
            let phi = phi_spherical(&n, &x).unwrap();
            if rng.gen::<f64>() * m < phi * phi {
                angles.push(x[1].atan2(x[0]));
            }
        }
        // radial part integrates out: the accepted angle density is cos²(2θ)/π
        let test = chi2_gof(&angles, |t| (2.0 * t).cos().powi(2) / PI, -PI, PI, 24);
        assert!(test.p_value > 0.01, "χ² p = {}", test.p_value);
    }

    #[test]
    fn report_serialises_with_bound_fields() {
        let mut rng = substream(0x5F0A, &[8]);
        let rep = acceptance_report(&idx(&[2, 0, 0]), 5000, &mut rng);
        assert_eq!(rep.trials, 5000);
        assert!((rep.m - rep.log_m.exp()).abs() < 1e-12 * rep.m);
        let js = serde_json::to_string(&rep).unwrap();
        assert!(js.contains("\"M\":") && js.contains("\"acceptance\":"));
    }
}
