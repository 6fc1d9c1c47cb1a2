//! Diagonal Gaussian policy with state-independent log standard deviations.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// A drawn action before and after clipping to `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionSample {
    /// Unclipped Gaussian draw; log-probabilities refer to this.
    pub raw: [f64; 4],
    pub clipped: [f64; 4],
    pub log_prob: f64,
}

pub fn clip_action(a: [f64; 4]) -> [f64; 4] {
    a.map(|x| x.clamp(-1.0, 1.0))
}

pub fn gaussian_log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&x, &m), &ls)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (1.0 + LN_2PI)).sum()
}

pub fn sample_action<R: Rng + ?Sized>(mean: &[f64; 4], log_std: &[f64; 4], rng: &mut R) -> ActionSample {
    let raw: [f64; 4] = std::array::from_fn(|i| {
        let z: f64 = StandardNormal.sample(rng);
        mean[i] + log_std[i].exp() * z
    });
    ActionSample { raw, clipped: clip_action(raw), log_prob: gaussian_log_prob(&raw, mean, log_std) }
}

/// The action used for evaluation: the clipped mean.
pub fn deterministic_action(mean: &[f64; 4]) -> [f64; 4] {
    clip_action(*mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tiny_std_returns_clipped_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mean = [0.3, -2.0, 1.5, 0.0];
        let s = sample_action(&mean, &[-1000.0; 4], &mut rng);
        assert_eq!(s.clipped, [0.3, -1.0, 1.0, 0.0]);
        assert_eq!(deterministic_action(&mean), s.clipped);
    }

    #[test]
    fn empirical_std_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let log_std = [0.5f64.ln(), 0.0, -1.0, 0.2];
        let n = 100_000;
        let mut sum = [0.0; 4];
        let mut sq = [0.0; 4];
        for _ in 0..n {
            let s = sample_action(&[0.0; 4], &log_std, &mut rng);
            for i in 0..4 {
                sum[i] += s.raw[i];
                sq[i] += s.raw[i] * s.raw[i];
            }
        }
        for i in 0..4 {
            let m = sum[i] / n as f64;
            let sd = (sq[i] / n as f64 - m * m).sqrt();
            assert!((sd / log_std[i].exp() - 1.0).abs() < 0.02, "{i}: {sd}");
        }
    }

    #[test]
    fn log_prob_is_gaussian_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mean = [0.1, 0.2, -0.3, 0.0];
        let log_std = [-0.7, -0.2, 0.1, -1.0];
        let s = sample_action(&mean, &log_std, &mut rng);
        let density: f64 = (0..4)
            .map(|i| {
                let sd = f64::exp(log_std[i]);
                (-(s.raw[i] - mean[i]).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            })
            .product();
        assert!((s.log_prob - density.ln()).abs() < 1e-9);
    }

    #[test]
    fn entropy_of_unit_gaussian() {
        let h = gaussian_entropy(&[0.0]);
        assert!((h - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()).abs() < 1e-12);
    }
}
