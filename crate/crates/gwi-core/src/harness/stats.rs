//! Sample statistics used by the experiments: means with standard errors,
//! Kolmogorov-Smirnov distances, total variation against a pmf, covariance
//! estimation, and a distance-correlation probe.

use crate::{Error, Result};

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok((mean, (var / n).sqrt()))
}

/// Empirical Laplace transform `E exp(-<s, X>)` over 2-vector samples, with
/// standard error.
pub fn empirical_laplace(samples: &[[f64; 2]], s: [f64; 2]) -> Result<(f64, f64)> {
    assert!(s[0] >= 0.0 && s[1] >= 0.0);
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let values: Vec<f64> = samples
        .iter()
        .map(|x| (-(s[0] * x[0] + s[1] * x[1])).exp())
        .collect();
    mean_and_se(&values)
}

/// One-sample Kolmogorov-Smirnov statistic against an analytic cdf.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Total variation distance between an integer sample and a reference pmf on
/// `0..`. Sample mass above the pmf range counts in full.
pub fn total_variation_vs_pmf(sample: &[u64], pmf: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let max = sample.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0.0f64; (max + 1).max(pmf.len())];
    let w = 1.0 / sample.len() as f64;
    for x in sample {
        hist[*x as usize] += w;
    }
    let mut tv = 0.0;
    for (k, h) in hist.iter().enumerate() {
        let p = pmf.get(k).copied().unwrap_or(0.0);
        tv += (h - p).abs();
    }
    Ok(0.5 * tv)
}

/// Sample covariance with an asymptotic standard error
/// (`se^2 = (m22 - cov^2) / n` with `m22` the centered fourth cross moment).
pub fn covariance_with_se(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::EmptySample);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut m22 = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        cov += dx * dy;
        m22 += dx * dx * dy * dy;
    }
    cov /= n;
    m22 /= n;
    let se = ((m22 - cov * cov).max(0.0) / n).sqrt();
    Ok((cov, se))
}

/// Pearson correlation with the 1/sqrt(n) null standard error.
pub fn correlation_with_se(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let (cov, _) = covariance_with_se(xs, ys)?;
    let (_, sx) = mean_and_se(xs)?;
    let (_, sy) = mean_and_se(ys)?;
    let n = xs.len() as f64;
    let denom = sx * sy * n; // sx = sd/sqrt(n), so sx*sy*n = sd_x sd_y
    if denom == 0.0 {
        return Ok((0.0, 1.0 / n.sqrt()));
    }
    Ok((cov / denom, 1.0 / n.sqrt()))
}

/// Distance correlation of two scalar samples (biased V-statistic form).
/// Quadratic in the sample size; callers subsample.
pub fn distance_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::EmptySample);
    }
    let n = xs.len();
    let dcov = |a: &[f64], b: &[f64]| -> f64 {
        // Double-centered distance matrices, accumulated without storing
        // the full n x n matrices.
        let row_means = |v: &[f64]| -> (Vec<f64>, f64) {
            let mut rows = vec![0.0f64; n];
            for i in 0..n {
                for j in 0..n {
                    rows[i] += (v[i] - v[j]).abs();
                }
                rows[i] /= n as f64;
            }
            let grand = rows.iter().sum::<f64>() / n as f64;
            (rows, grand)
        };
        let (ra, ga) = row_means(a);
        let (rb, gb) = row_means(b);
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let da = (a[i] - a[j]).abs() - ra[i] - ra[j] + ga;
                let db = (b[i] - b[j]).abs() - rb[i] - rb[j] + gb;
                acc += da * db;
            }
        }
        acc / (n * n) as f64
    };
    let vxy = dcov(xs, ys);
    let vxx = dcov(xs, xs);
    let vyy = dcov(ys, ys);
    let denom = (vxx * vyy).sqrt();
    Ok(if denom > 0.0 { (vxy / denom).max(0.0).sqrt() } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{StreamDomain, StreamKey};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn laplace_trivial_points() {
        let samples = vec![[1.0, 2.0], [3.0, 0.5]];
        assert_eq!(empirical_laplace(&samples, [0.0, 0.0]).unwrap(), (1.0, 0.0));
        let zeros = vec![[0.0, 0.0]; 10];
        assert_eq!(empirical_laplace(&zeros, [0.7, 0.3]).unwrap(), (1.0, 0.0));
        assert!(matches!(
            empirical_laplace(&[], [0.0, 0.0]),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn ks_uniform_sample_is_small() {
        let mut rng = StreamKey::new(5, StreamDomain::Aux, 0).stream();
        let sample: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let d = ks_one_sample(&sample, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d <= 0.025, "KS {d} too large for a true-null sample");
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let a = vec![0.3, 0.3, 1.0, 2.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn ks_point_mass_agreement() {
        let a = vec![2.0; 50];
        let d = ks_one_sample(&a, |x| if x >= 2.0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        assert!(ks_two_sample(&a, &b).unwrap() >= 0.49);
    }

    #[test]
    fn tv_of_exact_histogram_is_small() {
        let pmf = [0.25, 0.5, 0.25];
        let sample: Vec<u64> = std::iter::repeat(0u64)
            .take(2500)
            .chain(std::iter::repeat(1).take(5000))
            .chain(std::iter::repeat(2).take(2500))
            .collect();
        assert_abs_diff_eq!(
            total_variation_vs_pmf(&sample, &pmf).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn covariance_of_independent_streams_is_null() {
        let mut rng = StreamKey::new(6, StreamDomain::Aux, 1).stream();
        let xs: Vec<f64> = (0..20_000).map(|_| rng.gen::<f64>()).collect();
        let ys: Vec<f64> = (0..20_000).map(|_| rng.gen::<f64>()).collect();
        let (cov, se) = covariance_with_se(&xs, &ys).unwrap();
        assert!(cov.abs() <= 4.0 * se);
        let (corr, cse) = correlation_with_se(&xs, &ys).unwrap();
        assert!(corr.abs() <= 4.0 * cse);
    }

    #[test]
    fn distance_correlation_sees_dependence() {
        let mut rng = StreamKey::new(6, StreamDomain::Aux, 2).stream();
        let xs: Vec<f64> = (0..400).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let dep = distance_correlation(&xs, &ys).unwrap();
        let zs: Vec<f64> = (0..400).map(|_| rng.gen::<f64>()).collect();
        let indep = distance_correlation(&xs, &zs).unwrap();
        assert!(dep > 0.3, "dcor {dep} should flag the square law");
        assert!(indep < 0.2, "dcor {indep} should stay near 0");
    }
}
