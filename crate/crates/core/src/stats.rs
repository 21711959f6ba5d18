//! Small statistical toolbox used by tests, diagnostics and the CLI:
//! two-sample Kolmogorov–Smirnov, χ² goodness of fit against a density,
//! log-log slope fits and nearest-neighbour distances.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Result of a two-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS test with the standard asymptotic p-value
/// (small-sample correction λ = (√m + 0.12 + 0.11/√m)·D, m = n₁n₂/(n₁+n₂)).
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> KsTest {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let (x, y) = (a[i], b[j]);
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let diff = (i as f64 / n1 as f64 - j as f64 / n2 as f64).abs();
        d = d.max(diff);
    }
    let m = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let lambda = (m.sqrt() + 0.12 + 0.11 / m.sqrt()) * d;
    KsTest { statistic: d, p_value: kolmogorov_sf(lambda) }
}

/// Result of a χ² goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct Chi2Test {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Expected counts below this are pooled with neighbours before forming the
/// χ² statistic (the usual validity rule of thumb).
const MIN_EXPECTED: f64 = 5.0;

/// χ² test from matched observed/expected counts. Cells with expected count
/// below [`MIN_EXPECTED`] are pooled into their left neighbour (the first
/// cells pool rightward). Degrees of freedom = pooled cells − 1.
pub fn chi2_from_counts(observed: &[f64], expected: &[f64]) -> Chi2Test {
    assert_eq!(observed.len(), expected.len());
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= MIN_EXPECTED {
            obs.push(o_acc);
            exp.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    // Remainder pools into the last kept cell.
    if e_acc > 0.0 || o_acc > 0.0 {
        if let (Some(o), Some(e)) = (obs.last_mut(), exp.last_mut()) {
            *o += o_acc;
            *e += e_acc;
        } else {
            obs.push(o_acc);
            exp.push(e_acc);
        }
    }
    let stat: f64 = obs
        .iter()
        .zip(&exp)
        .map(|(&o, &e)| if e > 0.0 { (o - e) * (o - e) / e } else { 0.0 })
        .sum();
    let dof = obs.len().saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).unwrap();
    Chi2Test { statistic: stat, dof, p_value: 1.0 - dist.cdf(stat) }
}

/// χ² goodness of fit of samples against a density on [lo, hi] with the
/// given number of equal-width bins. Bin masses are computed by Simpson's
/// rule (65 points per bin); mass outside [lo, hi] is folded into the edge
/// bins, so the density must be normalised on the whole line.
pub fn chi2_gof(samples: &[f64], pdf: impl Fn(f64) -> f64, lo: f64, hi: f64, bins: usize) -> Chi2Test {
    assert!(bins >= 2 && hi > lo);
    let n = samples.len() as f64;
    let width = (hi - lo) / bins as f64;
    let mut observed = vec![0.0; bins];
    for &x in samples {
        let k = if x < lo {
            0
        } else if x >= hi {
            bins - 1
        } else {
            (((x - lo) / width) as usize).min(bins - 1)
        };
        observed[k] += 1.0;
    }
    let simpson = |a: f64, b: f64| {
        let m = 64; // even number of sub-intervals per bin
        let h = (b - a) / m as f64;
        let mut s = pdf(a) + pdf(b);
        for i in 1..m {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += c * pdf(a + i as f64 * h);
        }
        s * h / 3.0
    };
    let mut expected: Vec<f64> = (0..bins)
        .map(|k| n * simpson(lo + k as f64 * width, lo + (k + 1) as f64 * width))
        .collect();
    // Fold unaccounted tail mass into the edge bins.
    let total: f64 = expected.iter().sum();
    let tail = (n - total).max(0.0);
    expected[0] += tail / 2.0;
    expected[bins - 1] += tail / 2.0;
    chi2_from_counts(&observed, &expected)
}

/// Least-squares slope of ln(y) against ln(x).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n−1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Mean nearest-neighbour Euclidean distance of a point cloud (O(n²)).
pub fn mean_nn_distance(points: &[Vec<f64>]) -> f64 {
    assert!(points.len() >= 2);
    let mut acc = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d2);
        }
        acc += best.sqrt();
    }
    acc / points.len() as f64
}
