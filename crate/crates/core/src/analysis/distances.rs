//! Empirical distances between samples and a quadrature ground truth.

use serde::Serialize;

use super::quadrature::QuadratureDensity;
use crate::error::{Error, Result};

/// Mass left outside the central histogram range on each side.
pub const TAIL_MASS: f64 = 1e-5;

/// `½ Σ |p_i - q_i|`.
pub fn tv_from_probs(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    Ok((0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()).clamp(0.0, 1.0))
}

/// Default bin count per axis: `ceil(n^(1/3))`.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).cbrt().ceil() as usize).max(1)
}

#[derive(Debug, Clone, Serialize)]
pub struct TvReport {
    pub tv: f64,
    pub bins: usize,
    pub n_samples: usize,
    /// Central range per axis; mass outside falls in under/overflow bins.
    pub range: Vec<(f64, f64)>,
    /// The estimator is biased upward by roughly `Σ sqrt(p(1-p)/n)` / 2.
    pub noise_scale: f64,
}

fn central_range(truth: &QuadratureDensity, axis: usize) -> Result<(f64, f64)> {
    if truth.dim == 1 {
        Ok((truth.quantile(TAIL_MASS)?, truth.quantile(1.0 - TAIL_MASS)?))
    } else {
        // the 2D grid bounds already discard negligible mass
        Ok((truth.lo[axis], truth.hi[axis]))
    }
}

/// Bin index along one axis: 0 = underflow, `bins + 1` = overflow.
fn bin_of(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if v < lo {
        0
    } else if v >= hi {
        bins + 1
    } else {
        1 + (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
    }
}

fn edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut e = vec![f64::NEG_INFINITY];
    e.extend((0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64));
    e.push(f64::INFINITY);
    e
}

/// Histogram TV between `samples` and the truth: `½ Σ |p̂_bin - p_bin|` over a
/// grid-aligned histogram with `bins` cells per axis (default `ceil(n^(1/3))`)
/// plus under/overflow cells.
pub fn tv_hist<F: Fn(&[f64]) -> f64>(
    samples: &[Vec<f64>],
    truth: &QuadratureDensity,
    f: &F,
    bins: Option<usize>,
) -> Result<TvReport> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::invalid("tv_hist needs samples"));
    }
    let d = truth.dim;
    if d > 2 {
        return Err(Error::Unsupported("histogram TV needs d <= 2".into()));
    }
    for s in samples {
        crate::error::check_dim(d, s.len())?;
    }
    let bins = bins.unwrap_or_else(|| default_bins(n)).max(1);
    let range: Vec<(f64, f64)> = (0..d).map(|k| central_range(truth, k)).collect::<Result<_>>()?;
    let cells = bins + 2;
    let mut counts = vec![0usize; cells.pow(d as u32)];
    for s in samples {
        let mut idx = 0;
        for (k, (lo, hi)) in range.iter().enumerate() {
            idx = idx * cells + bin_of(s[k], *lo, *hi, bins);
        }
        counts[idx] += 1;
    }
    let phat: Vec<f64> = counts.iter().map(|c| *c as f64 / n as f64).collect();
    let p: Vec<f64> = if d == 1 {
        let e = edges(range[0].0, range[0].1, bins);
        e.windows(2)
            .map(|w| Ok(truth.cdf_at(w[1])? - truth.cdf_at(w[0])?))
            .collect::<Result<_>>()?
    } else {
        let ex = edges(range[0].0, range[0].1, bins);
        let ey = edges(range[1].0, range[1].1, bins);
        let clip = |v: f64, k: usize| v.clamp(truth.lo[k], truth.hi[k]);
        let mut p = Vec::with_capacity(cells * cells);
        for wx in ex.windows(2) {
            for wy in ey.windows(2) {
                let lo = [clip(wx[0], 0), clip(wy[0], 1)];
                let hi = [clip(wx[1], 0), clip(wy[1], 1)];
                p.push(if lo[0] < hi[0] && lo[1] < hi[1] {
                    truth.box_probability(f, &lo, &hi, 16)
                } else {
                    0.0
                });
            }
        }
        p
    };
    let noise_scale = 0.5 * p.iter().map(|pi| (pi * (1.0 - pi) / n as f64).max(0.0).sqrt()).sum::<f64>();
    Ok(TvReport {
        tv: tv_from_probs(&phat, &p)?,
        bins,
        n_samples: n,
        range,
        noise_scale,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size entering the asymptotic distribution.
    pub n_eff: f64,
}

impl KsResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // small-λ series for the CDF converges fast here
        let pi2 = std::f64::consts::PI.powi(2);
        let mut cdf = 0.0;
        for k in 1..=50 {
            let m = (2 * k - 1) as f64;
            cdf += (-m * m * pi2 / (8.0 * lambda * lambda)).exp();
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample KS test of `samples` against a continuous `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::invalid("ks_one_sample needs samples"));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n), n_eff: n })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("ks_two_sample needs two nonempty samples"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n_eff), n_eff })
}

/// 1D Wasserstein-2 distance by quantile coupling against `quantile`.
pub fn w2_quantile(samples: &[f64], quantile: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("w2_quantile needs samples"));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let s: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v - quantile((i as f64 + 0.5) / n)).powi(2))
        .sum();
    Ok((s / n).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceReport {
    pub tv: f64,
    pub ks: f64,
    pub ks_p_value: f64,
    pub w2: f64,
    pub n_samples: usize,
    pub bins: usize,
    pub range: (f64, f64),
}

/// All 1D distances of `samples` to the truth.
pub fn distance_report<F: Fn(&[f64]) -> f64>(
    samples: &[f64],
    truth: &QuadratureDensity,
    f: &F,
    bins: Option<usize>,
) -> Result<DistanceReport> {
    if truth.dim != 1 {
        return Err(Error::Unsupported("distance_report is 1D".into()));
    }
    let pts: Vec<Vec<f64>> = samples.iter().map(|v| vec![*v]).collect();
    let tv = tv_hist(&pts, truth, f, bins)?;
    let ks = ks_one_sample(samples, |t| truth.cdf_at(t).unwrap_or(f64::NAN))?;
    let w2 = w2_quantile(samples, |p| truth.quantile(p).unwrap_or(f64::NAN))?;
    Ok(DistanceReport {
        tv: tv.tv,
        ks: ks.statistic,
        ks_p_value: ks.p_value,
        w2,
        n_samples: samples.len(),
        bins: tv.bins,
        range: tv.range[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_gaussian, make_l1, Potential};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tv_trivial_cases() {
        assert_eq!(tv_from_probs(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(tv_from_probs(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(tv_from_probs(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn tv_of_exact_samples_is_small_and_far_samples_large() {
        let f = make_l1(1, 1.0).unwrap();
        let q = QuadratureDensity::for_potential(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<Vec<f64>> = (0..100_000).map(|_| f.sample_exact(&mut rng).unwrap()).collect();
        let r = tv_hist(&xs, &q, &|x: &[f64]| f.value(x), Some(100)).unwrap();
        assert!(r.tv <= 0.03, "{}", r.tv);
        let far: Vec<Vec<f64>> = (0..1000).map(|_| vec![1e3]).collect();
        let r = tv_hist(&far, &q, &|x: &[f64]| f.value(x), None).unwrap();
        assert!(r.tv > 1.0 - 1e-4);
        assert_eq!(r.bins, 10);
    }

    #[test]
    fn tv_decreases_with_sample_size() {
        let f = make_gaussian(vec![1.0]).unwrap();
        let q = QuadratureDensity::for_potential(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tvs: Vec<f64> = [1_000, 10_000, 100_000]
            .iter()
            .map(|&n| {
                let xs: Vec<Vec<f64>> = (0..n).map(|_| f.sample_exact(&mut rng).unwrap()).collect();
                tv_hist(&xs, &q, &|x: &[f64]| f.value(x), Some(20)).unwrap().tv
            })
            .collect();
        assert!(tvs[0] > tvs[1] && tvs[1] > tvs[2], "{tvs:?}");
    }

    #[test]
    fn tv_2d_exact_samples() {
        let f = make_gaussian(vec![1.0, 2.0]).unwrap();
        let q = QuadratureDensity::for_potential(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..20_000).map(|_| f.sample_exact(&mut rng).unwrap()).collect();
        let r = tv_hist(&xs, &q, &|x: &[f64]| f.value(x), Some(10)).unwrap();
        assert!(r.tv < 0.05, "{}", r.tv);
    }

    #[test]
    fn kolmogorov_distribution_values() {
        // P(K > 1.36) ≈ 0.049, P(K > 1.63) ≈ 0.0098
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 2e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        // the two series agree where they meet
        let a = kolmogorov_survival(0.999_999);
        let b = kolmogorov_survival(1.0);
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn ks_tests_accept_matching_and_reject_shifted() {
        let f = make_gaussian(vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a: Vec<f64> = (0..20_000).map(|_| f.sample_exact(&mut rng).unwrap()[0]).collect();
        let b: Vec<f64> = (0..20_000).map(|_| f.sample_exact(&mut rng).unwrap()[0]).collect();
        let phi = |t: f64| 0.5 * statrs::function::erf::erfc(-t / 2f64.sqrt());
        assert!(!ks_one_sample(&a, phi).unwrap().rejects(0.01));
        assert!(!ks_two_sample(&a, &b).unwrap().rejects(0.01));
        let shifted: Vec<f64> = b.iter().map(|v| v + 0.1).collect();
        assert!(ks_two_sample(&a, &shifted).unwrap().rejects(0.01));
        assert!(ks_one_sample(&shifted, phi).unwrap().rejects(0.01));
    }

    #[test]
    fn ks_two_sample_handles_ties() {
        let a = vec![0.0, 0.0, 1.0, 1.0];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        let r = ks_two_sample(&[0.0; 5], &[1.0; 5]).unwrap();
        assert_eq!(r.statistic, 1.0);
    }

    #[test]
    fn w2_of_shift() {
        let f = make_l1(1, 1.0).unwrap();
        let q = QuadratureDensity::for_potential(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..50_000).map(|_| f.sample_exact(&mut rng).unwrap()[0] + 0.5).collect();
        let w = w2_quantile(&xs, |p| q.quantile(p).unwrap()).unwrap();
        assert!((w - 0.5).abs() < 0.05, "{w}");
        let rep = distance_report(&xs, &q, &|x: &[f64]| f.value(x), None).unwrap();
        assert!(rep.ks_p_value < 1e-6 && rep.tv > 0.1);
    }
}
