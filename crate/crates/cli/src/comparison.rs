//! Side-by-side point sets: one DPP draw, N i.i.d. Gaussian points, and a
//! homogeneous Poisson realisation on the square (−2N^{1/4}, 2N^{1/4})²
//! whose intensity makes the expected count N. The three sets expose the
//! repulsion of the DPP against unstructured references.

use anyhow::Result;
use rand::Rng;
use rand_distr::StandardNormal;

use hermite_dpp::dpp::{DppSampler, SampleCounters};
use hermite_dpp::rmt::CalibrationTable;
use hermite_dpp::rng::substream;

const TAG_DPP: u64 = 0xC6_01;
const TAG_GAUSS: u64 = 0xC6_02;
const TAG_POISSON: u64 = 0xC6_03;

pub struct ComparisonSets {
    pub dpp: Vec<Vec<f64>>,
    pub gaussian: Vec<Vec<f64>>,
    pub poisson: Vec<Vec<f64>>,
    pub half_width: f64,
    pub counters: SampleCounters,
}

/// Half-width 2N^{1/4} of the Poisson box.
pub fn poisson_half_width(n_points: usize) -> f64 {
    2.0 * (n_points as f64).powf(0.25)
}

/// Generate all three d = 2 point sets from one root seed.
pub fn generate(
    n_points: usize,
    seed: u64,
    table: &mut CalibrationTable,
) -> Result<ComparisonSets> {
    let sampler = DppSampler::new(2, n_points, table)?;
    let sample = sampler.sample(&mut substream(seed, &[TAG_DPP]))?;

    let mut grng = substream(seed, &[TAG_GAUSS]);
    let gaussian: Vec<Vec<f64>> = (0..n_points)
        .map(|_| (0..2).map(|_| grng.sample::<f64, _>(StandardNormal)).collect())
        .collect();

    let mut prng = substream(seed, &[TAG_POISSON]);
    let l = poisson_half_width(n_points);
    let poisson_count: f64 =
        prng.sample(rand_distr::Poisson::new(n_points as f64).expect("positive mean"));
    let poisson: Vec<Vec<f64>> = (0..poisson_count as usize)
        .map(|_| (0..2).map(|_| prng.gen_range(-l..l)).collect())
        .collect();

    Ok(ComparisonSets {
        dpp: sample.points,
        gaussian,
        poisson,
        half_width: l,
        counters: sample.counters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use hermite_dpp::stats::{mean, mean_nn_distance, std_dev};

    #[test]
    fn half_width_reference_value() {
        assert!((poisson_half_width(500) - 9.457416306).abs() < 1e-6);
        assert!((poisson_half_width(16) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_count_is_calibrated() {
        let counts: Vec<f64> = (0..100)
            .map(|s| {
                let mut prng = substream(s, &[TAG_POISSON]);
                prng.sample::<f64, _>(rand_distr::Poisson::new(64.0).unwrap())
            })
            .collect();
        let m = mean(&counts);
        let se = std_dev(&counts) / 10.0;
        assert!((m - 64.0).abs() <= 3.0 * se, "mean count {m}, se {se}");
    }

    #[test]
    fn dpp_spreads_wider_than_poisson() {
        let mut table = CalibrationTable::new();
        let runs = 50;
        let n = 500;
        let mut dpp_nn = Vec::with_capacity(runs);
        let mut poisson_nn = Vec::with_capacity(runs);
        for s in 0..runs {
            let sets = generate(n, s as u64, &mut table).unwrap();
            assert_eq!(sets.dpp.len(), n);
            assert_eq!(sets.gaussian.len(), n);
            dpp_nn.push(mean_nn_distance(&sets.dpp));
            poisson_nn.push(mean_nn_distance(&sets.poisson));
        }
        let (d, p) = (mean(&dpp_nn), mean(&poisson_nn));
        assert!(d > p, "dpp nn {d} vs poisson nn {p}");
    }
}
