//! Small statistics helpers shared by the verification checks and tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, Poisson};
use statrs::distribution::Discrete;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, var)
}

/// Standard error of the sample mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, var) = mean_var(xs);
    (m, (var / xs.len() as f64).sqrt())
}

/// Chi-square goodness-of-fit of observed integer counts against a Poisson
/// law with the given mean. Bins with small expected counts are merged into
/// the tail so every cell carries at least `min_expected`.
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub pass: bool,
}

pub fn chi_square_poisson(counts: &[u64], lambda: f64, level: f64) -> ChiSquareReport {
    let n = counts.len() as f64;
    let max_k = counts.iter().copied().max().unwrap_or(0) as usize;
    let pois = Poisson::new(lambda).expect("lambda > 0");
    let min_expected = 5.0;
    // observed histogram over k = 0..=max_k
    let mut obs = vec![0.0f64; max_k + 1];
    for &c in counts {
        obs[c as usize] += 1.0;
    }
    // merge cells left to right so each expected count is large enough;
    // the final cell absorbs the full remaining tail mass
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    let mut cdf_used = 0.0;
    for (k, &o) in obs.iter().enumerate() {
        let pk = pois.pmf(k as u64);
        acc_obs += o;
        acc_exp += n * pk;
        cdf_used += pk;
        if acc_exp >= min_expected {
            cells.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    // tail beyond max_k plus any unflushed remainder
    let tail_exp = acc_exp + n * (1.0 - cdf_used);
    let tail_obs = acc_obs;
    if let Some(last) = cells.last_mut() {
        if tail_exp < min_expected {
            last.0 += tail_obs;
            last.1 += tail_exp;
        } else {
            cells.push((tail_obs, tail_exp));
        }
    } else {
        cells.push((tail_obs, tail_exp));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1);
    let chi = ChiSquared::new(dof as f64).expect("dof > 0");
    let critical = chi.inverse_cdf(1.0 - level);
    ChiSquareReport { statistic, dof, critical, pass: statistic <= critical }
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform(0, 1).
pub struct KsReport {
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

pub fn ks_uniform(samples: &[f64], level: f64) -> KsReport {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = x.clamp(0.0, 1.0);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    // asymptotic Kolmogorov critical value: sqrt(-ln(level/2)/2) / sqrt(n)
    let k_alpha = (-(level / 2.0).ln() / 2.0).sqrt();
    let critical = k_alpha / n.sqrt();
    KsReport { statistic: d, critical, pass: d <= critical }
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Poisson as PoissonSampler};

    #[test]
    fn chi_square_accepts_true_poisson() {
        let mut rng = crate::rng::substream(99, 0);
        let lambda = 2.3;
        let sampler = PoissonSampler::new(lambda).unwrap();
        let counts: Vec<u64> = (0..10_000).map(|_| sampler.sample(&mut rng) as u64).collect();
        let rep = chi_square_poisson(&counts, lambda, 0.01);
        assert!(rep.pass, "stat {} vs critical {}", rep.statistic, rep.critical);
    }

    #[test]
    fn chi_square_rejects_wrong_mean() {
        let mut rng = crate::rng::substream(99, 1);
        let sampler = PoissonSampler::new(3.2).unwrap();
        let counts: Vec<u64> = (0..10_000).map(|_| sampler.sample(&mut rng) as u64).collect();
        let rep = chi_square_poisson(&counts, 2.3, 0.01);
        assert!(!rep.pass);
    }

    #[test]
    fn ks_accepts_uniform_and_rejects_squashed() {
        let mut rng = crate::rng::substream(99, 2);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_uniform(&samples, 0.01).pass);
        let squashed: Vec<f64> = samples.iter().map(|u| u * u).collect();
        assert!(!ks_uniform(&squashed, 0.01).pass);
    }

    #[test]
    fn slope_of_line_is_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        assert!((slope(&x, &y) - 2.5).abs() < 1e-12);
    }
}
