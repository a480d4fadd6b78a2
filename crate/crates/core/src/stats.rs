//! Small shared statistics helpers: means, sample deviation, and 95%
//! confidence intervals (normal approximation by default, percentile
//! bootstrap behind an explicit method choice).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0.0 for fewer than two
/// values so degenerate groups get zero-width intervals instead of NaNs.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

/// A group mean with its 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ci {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// Interval construction method. `Normal` is `mean ± 1.96·sd/√n`;
/// `Bootstrap` is the 2.5/97.5 percentile interval over resampled means
/// with a fixed seed, so results are reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CiMethod {
    Normal,
    Bootstrap { iterations: usize, seed: u64 },
}

impl Default for CiMethod {
    fn default() -> Self {
        CiMethod::Normal
    }
}

/// 95% confidence interval for the mean of `xs`; `None` when empty.
pub fn confidence_interval(xs: &[f64], method: CiMethod) -> Option<Ci> {
    if xs.is_empty() {
        return None;
    }
    let m = mean(xs);
    match method {
        CiMethod::Normal => {
            let half = 1.96 * sample_std(xs) / (xs.len() as f64).sqrt();
            Some(Ci { mean: m, lo: m - half, hi: m + half, n: xs.len() })
        }
        CiMethod::Bootstrap { iterations, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut means = Vec::with_capacity(iterations);
            for _ in 0..iterations {
                let mut total = 0.0;
                for _ in 0..xs.len() {
                    total += xs[rng.random_range(0..xs.len())];
                }
                means.push(total / xs.len() as f64);
            }
            means.sort_by(|a, b| a.total_cmp(b));
            Some(Ci {
                mean: m,
                lo: percentile(&means, 0.025),
                hi: percentile(&means, 0.975),
                n: xs.len(),
            })
        }
    }
}

/// Linear-interpolation percentile over a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_std_match_hand_arithmetic() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert!((mean(&xs) - 5.0).abs() < 1e-12);
        // Sample variance: Σ(x−5)² = 32, / 7 ≈ 4.5714…
        assert!((sample_std(&xs) - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_data_gives_zero_width_interval() {
        let xs = [3.25; 10];
        let ci = confidence_interval(&xs, CiMethod::Normal).unwrap();
        assert_eq!((ci.lo, ci.hi), (3.25, 3.25));
        let ci = confidence_interval(&xs, CiMethod::Bootstrap { iterations: 200, seed: 7 }).unwrap();
        assert_eq!((ci.lo, ci.hi), (3.25, 3.25));
    }

    #[test]
    fn singleton_gets_zero_half_width() {
        let ci = confidence_interval(&[1.5], CiMethod::Normal).unwrap();
        assert_eq!((ci.lo, ci.mean, ci.hi, ci.n), (1.5, 1.5, 1.5, 1));
    }

    #[test]
    fn normal_interval_matches_formula() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ci = confidence_interval(&xs, CiMethod::Normal).unwrap();
        let sd = sample_std(&xs);
        let half = 1.96 * sd / 2.0;
        assert!((ci.lo - (2.5 - half)).abs() < 1e-12);
        assert!((ci.hi - (2.5 + half)).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_is_deterministic_and_brackets_the_mean() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let method = CiMethod::Bootstrap { iterations: 500, seed: 42 };
        let a = confidence_interval(&xs, method).unwrap();
        let b = confidence_interval(&xs, method).unwrap();
        assert_eq!(a, b);
        assert!(a.lo <= a.mean && a.mean <= a.hi);
        assert!(a.lo >= 1.0 && a.hi <= 6.0);
    }

    #[test]
    fn empty_input_yields_none() {
        assert!(confidence_interval(&[], CiMethod::Normal).is_none());
    }
}
