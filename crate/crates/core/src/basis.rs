//! Orthonormal Hermite functions, the ordered multivariate basis and the
//! projection kernel K_N.
//!
//! The univariate building block is
//!
//!   ψ_j(x) = H_j(x/√2) / √(√(2π) · 2^j · j!),
//!
//! orthonormal with respect to e^{-x²/2} dx. H_j is never formed: ψ is
//! evaluated by the normalised three-term recurrence
//!
//!   ψ_0(x) = (2π)^{-1/4},
//!   ψ_1(x) = x · (2π)^{-1/4},
//!   ψ_{j+1}(x) = x/√(j+1) · ψ_j(x) − √(j/(j+1)) · ψ_{j-1}(x),
//!
//! which keeps every intermediate on the scale of the result. Multivariate
//! functions are products φ_ı(x) = Π_ℓ ψ_{i_ℓ}(x_ℓ) over multi-indices ı,
//! enumerated in the 𝔟 order: primary key max(ı), ties broken by ascending
//! lexicographic order on (i_1, …, i_d). The first n^d indices under 𝔟 are
//! exactly the grid {0, …, n−1}^d, which the proposal factorisation relies
//! on. The rank-N projection kernel is K_N(x, y) = Σ_{𝔟(ı)<N} φ_ı(x) φ_ı(y).

use crate::error::{Error, Result};
use std::cmp::Ordering;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// ψ_0(0) = (2π)^{-1/4}, the constant normalised against ∫ e^{-x²/2} dx.
pub fn psi_zero() -> f64 {
    TWO_PI.powf(-0.25)
}

/// Values ψ_0(x), …, ψ_{j_max}(x).
pub fn psi_row(j_max: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() {
        return Err(Error::NonFinite { what: "psi_row evaluation point" });
    }
    let mut out = vec![0.0; j_max + 1];
    psi_row_into(x, 1.0, &mut out);
    Ok(out)
}

/// Fill `out` with scale · ψ_j(x) for j = 0..out.len()-1. The recurrence is
/// linear, so a uniform prefactor can ride along for free; rho_pdf uses
/// scale = e^{-x²/4} to keep large-|x| evaluations inside f64 range.
pub(crate) fn psi_row_into(x: f64, scale: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let p0 = psi_zero() * scale;
    out[0] = p0;
    if out.len() == 1 {
        return;
    }
    out[1] = x * p0;
    for j in 1..out.len() - 1 {
        let jf = j as f64;
        out[j + 1] = x / (jf + 1.0).sqrt() * out[j] - (jf / (jf + 1.0)).sqrt() * out[j - 1];
    }
}

/// Multi-index of univariate degrees, one per coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub degrees: Vec<usize>,
}

impl MultiIndex {
    pub fn new(degrees: Vec<usize>) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::InvalidArg { what: "multi-index must have d >= 1 entries".into() });
        }
        Ok(Self { degrees })
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn max_degree(&self) -> usize {
        *self.degrees.iter().max().unwrap()
    }
}

/// The 𝔟 comparator: max degree first, then ascending lexicographic order
/// with the first coordinate most significant.
pub fn b_order(a: &[usize], b: &[usize]) -> Ordering {
    let ma = a.iter().max().unwrap();
    let mb = b.iter().max().unwrap();
    ma.cmp(mb).then_with(|| a.cmp(b))
}

/// The first N multi-indices of ℕ^d under the 𝔟 order.
#[derive(Clone, Debug)]
pub struct OrderedBasis {
    dim: usize,
    indices: Vec<MultiIndex>,
    max_degree: usize,
}

impl OrderedBasis {
    pub fn new(dim: usize, size: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidArg { what: "basis dimension must be >= 1".into() });
        }
        if size < 1 {
            return Err(Error::InvalidArg { what: "basis size must be >= 1".into() });
        }
        let mut indices = Vec::with_capacity(size);
        let mut shell = 0usize;
        while indices.len() < size {
            // Tuples of {0..shell}^d with max == shell, generated in
            // lexicographic order by an odometer (last coordinate fastest).
            let mut t = vec![0usize; dim];
            'odometer: loop {
                if t.iter().max() == Some(&shell) {
                    indices.push(MultiIndex { degrees: t.clone() });
                }
                let mut k = dim;
                while k > 0 {
                    k -= 1;
                    if t[k] < shell {
                        t[k] += 1;
                        for v in &mut t[k + 1..] {
                            *v = 0;
                        }
                        continue 'odometer;
                    }
                }
                break; // every coordinate reached `shell`
            }
            shell += 1;
        }
        indices.truncate(size);
        let max_degree = indices.iter().map(|i| i.max_degree()).max().unwrap();
        Ok(Self { dim, indices, max_degree })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    /// Largest univariate degree appearing in any index.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }
}

/// φ_ı(x) = Π_ℓ ψ_{i_ℓ}(x_ℓ). Convenience scalar path; batch evaluation goes
/// through [`KernelEval::phi_all`].
pub fn phi(index: &MultiIndex, x: &[f64]) -> Result<f64> {
    if index.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: index.dim(), got: x.len() });
    }
    let mut prod = 1.0;
    for (deg, &xi) in index.degrees.iter().zip(x) {
        let row = psi_row(*deg, xi)?;
        prod *= row[*deg];
    }
    Ok(prod)
}

/// Evaluator for φ vectors and the projection kernel over an ordered basis.
/// Immutable after construction; the univariate ψ rows computed for a point
/// are shared by every basis function (and callers can fetch them to reuse
/// in conditional-kernel evaluations).
#[derive(Clone, Debug)]
pub struct KernelEval {
    basis: OrderedBasis,
}

impl KernelEval {
    pub fn new(basis: OrderedBasis) -> Self {
        Self { basis }
    }

    pub fn basis(&self) -> &OrderedBasis {
        &self.basis
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.basis.dim {
            return Err(Error::DimensionMismatch { expected: self.basis.dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "kernel evaluation point" });
        }
        Ok(())
    }

    /// Per-coordinate rows ψ_0..ψ_{max_degree} at x.
    pub fn psi_rows(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_point(x)?;
        Ok(x.iter()
            .map(|&xi| {
                let mut row = vec![0.0; self.basis.max_degree + 1];
                psi_row_into(xi, 1.0, &mut row);
                row
            })
            .collect())
    }

    /// All φ_ı(x) for ı in basis order.
    pub fn phi_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        let rows = self.psi_rows(x)?;
        Ok(self.phi_from_rows(&rows))
    }

    /// φ vector from precomputed ψ rows (see [`Self::psi_rows`]).
    pub fn phi_from_rows(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        self.basis
            .indices
            .iter()
            .map(|idx| idx.degrees.iter().zip(rows).map(|(&d, row)| row[d]).product())
            .collect()
    }

    /// K_N(x, y) = Σ φ_ı(x) φ_ı(y).
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let px = self.phi_all(x)?;
        let py = self.phi_all(y)?;
        Ok(px.iter().zip(&py).map(|(a, b)| a * b).sum())
    }

    /// K_N(x, x) = Σ φ_ı(x)², strictly positive for finite x.
    pub fn kernel_diag(&self, x: &[f64]) -> Result<f64> {
        let px = self.phi_all(x)?;
        Ok(px.iter().map(|a| a * a).sum())
    }
}
