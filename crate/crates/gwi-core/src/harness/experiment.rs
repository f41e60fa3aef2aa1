//! Per-case experiments: simulate scaled branching paths, compare them
//! against the limit theory, and assemble a reproducible report.
//!
//! Every statistic row names its estimate, standard error, theoretical
//! target, tolerance, sample size, and pass/fail verdict (absent for probes
//! with no theoretical target). Replicates are embarrassingly parallel;
//! results are collected in replicate order, so reports are bit-identical
//! across thread counts and schedules.

use crate::harness::stats;
use crate::harness::{step_process, ScalingSpec};
use crate::limits::{
    coordinate_stationary_law, laplace_joint_case2, simulate_limit_case, StationaryLaw,
    DEFAULT_DT, DEFAULT_PMF_SIZE, DEFAULT_TRANSFORM_POINTS,
};
use crate::model::{CaseLabel, ModelParams};
use crate::moments::{cross_time_cov_case3, cross_time_cov_case5};
use crate::rng::{StreamDomain, StreamKey};
use crate::simulate::simulate_path;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Gamma};

/// Stream-index block reserved for the cross-time covariance designs, so
/// they never collide with the per-n path blocks.
const COV_INDEX_BLOCK: u64 = 1 << 40;

/// Experiment setup. Defaults follow the desk-scale design: grid
/// {0.25, 0.5, 1.0}, n in {100, 300, 1000}, 20000 replicates per n.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub n_list: Vec<u64>,
    pub replicates: usize,
    pub grid: Vec<f64>,
    pub master_seed: u64,
    /// Limit-path count for simulated references (used where no closed form
    /// exists).
    pub reference_paths: usize,
    /// Euler-Maruyama step for reference limit paths.
    pub dt: f64,
    /// Laplace evaluation points for the strongly critical coupled case.
    pub s_grid: Vec<[f64; 2]>,
    /// KS pass threshold (finite-n bias plus noise allowance).
    pub ks_tolerance: f64,
    /// Total-variation pass threshold for stationary coordinates.
    pub tv_tolerance: f64,
    /// Joint-Laplace pass threshold.
    pub laplace_tolerance: f64,
    /// Cross-time covariance design points `(n1, n2, t1, t2)`; empty uses
    /// the per-case default.
    pub cov_design: Vec<(u64, u64, f64, f64)>,
    /// Subsample size for the distance-correlation probe.
    pub dcor_subsample: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_list: vec![100, 300, 1000],
            replicates: 20_000,
            grid: vec![0.25, 0.5, 1.0],
            master_seed: 1,
            reference_paths: 100_000,
            dt: DEFAULT_DT,
            s_grid: vec![[0.5, 0.5], [0.25, 1.0], [1.0, 0.25]],
            ks_tolerance: 0.08,
            tv_tolerance: 0.03,
            laplace_tolerance: 0.03,
            cov_design: vec![],
            dcor_subsample: 2000,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicate count must be positive".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("scaling list must not be empty".into()));
        }
        if self.grid.is_empty() || self.grid.iter().any(|t| *t < 0.0 || !t.is_finite()) {
            return Err(Error::Config("time grid must be nonnegative and finite".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        Ok(())
    }
}

/// One reported statistic with its verification context.
#[derive(Debug, Clone, Serialize)]
pub struct StatRecord {
    pub name: String,
    pub time: Option<f64>,
    pub n: Option<u64>,
    pub estimate: f64,
    pub se: Option<f64>,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub sample_size: usize,
    /// Absent for probes without a theoretical target.
    pub pass: Option<bool>,
}

/// A point of an empirical-vs-target curve for external plotting.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub curve: String,
    pub x: f64,
    pub empirical: f64,
    pub target: f64,
}

/// Full experiment output: config echo, statistics, and plot data.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub case: u8,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub statistics: Vec<StatRecord>,
    pub curves: Vec<CurvePoint>,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.statistics.iter().all(|s| s.pass != Some(false))
    }
}

/// Per-replicate features extracted from one path.
struct Features {
    /// Raw populations at each grid time.
    raw: Vec<[u64; 2]>,
    /// Running total of the first population strictly before each grid
    /// index (total progeny of type 1).
    progeny: Vec<u64>,
}

fn simulate_features(
    params: &ModelParams,
    spec: &ScalingSpec,
    seed: u64,
    index_offset: u64,
    replicates: usize,
) -> Result<Vec<Features>> {
    let horizon = spec.max_index();
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let key = StreamKey::new(seed, StreamDomain::Path, index_offset + r as u64);
            let path = simulate_path(params, horizon, key)?;
            let raw = spec.grid.iter().map(|t| path.at(spec.index_at(*t))).collect();
            let mut running = 0u64;
            let mut cumulative = Vec::with_capacity(path.horizon() + 1);
            cumulative.push(0u64);
            for k in 1..=path.horizon() {
                running += path.at(k)[0];
                cumulative.push(running);
            }
            let progeny = spec
                .grid
                .iter()
                .map(|t| {
                    let ix = spec.index_at(*t);
                    if ix == 0 { 0 } else { cumulative[ix - 1] }
                })
                .collect();
            Ok(Features { raw, progeny })
        })
        .collect()
}

/// Gamma endpoint cdf of the squared Bessel coordinate: shape `2 b / v`,
/// scale `v t / 2`. `None` when the coordinate is deterministic (v = 0).
fn gamma_endpoint_cdf(b: f64, v: f64, t: f64) -> Option<impl Fn(f64) -> f64> {
    if v <= 0.0 || b <= 0.0 || t <= 0.0 {
        return None;
    }
    let gamma = Gamma::new(2.0 * b / v, 2.0 / (v * t)).ok()?;
    Some(move |x: f64| if x <= 0.0 { 0.0 } else { gamma.cdf(x) })
}

struct ReportBuilder {
    statistics: Vec<StatRecord>,
    curves: Vec<CurvePoint>,
}

impl ReportBuilder {
    fn new() -> ReportBuilder {
        ReportBuilder { statistics: vec![], curves: vec![] }
    }

    fn push(&mut self, record: StatRecord) {
        self.statistics.push(record);
    }

    /// KS statistic row: passes when the distance stays below the threshold.
    fn ks(
        &mut self,
        name: &str,
        time: f64,
        n: u64,
        distance: f64,
        threshold: f64,
        sample_size: usize,
    ) {
        self.push(StatRecord {
            name: name.into(),
            time: Some(time),
            n: Some(n),
            estimate: distance,
            se: None,
            target: Some(0.0),
            tolerance: Some(threshold),
            sample_size,
            pass: Some(distance <= threshold),
        });
    }

    /// Deciles of a sample against a reference cdf.
    fn cdf_curve<F: Fn(f64) -> f64>(&mut self, name: &str, sample: &[f64], cdf: F) {
        let mut xs = sample.to_vec();
        xs.sort_by(|a, b| a.total_cmp(b));
        for q in 0..=20 {
            let ix = ((q as f64 / 20.0) * (xs.len() - 1) as f64).round() as usize;
            self.curves.push(CurvePoint {
                curve: name.into(),
                x: xs[ix],
                empirical: (ix + 1) as f64 / xs.len() as f64,
                target: cdf(xs[ix]),
            });
        }
    }

    fn pmf_curve(&mut self, name: &str, sample: &[u64], pmf: &[f64]) {
        let max = sample.iter().copied().max().unwrap_or(0) as usize;
        let top = max.min(40).max(pmf.len().saturating_sub(1).min(40));
        let w = 1.0 / sample.len() as f64;
        let mut hist = vec![0.0f64; top + 1];
        for x in sample {
            if (*x as usize) <= top {
                hist[*x as usize] += w;
            }
        }
        for (k, h) in hist.iter().enumerate() {
            self.curves.push(CurvePoint {
                curve: name.into(),
                x: k as f64,
                empirical: *h,
                target: pmf.get(k).copied().unwrap_or(0.0),
            });
        }
    }
}

/// Run the verification experiment for one covered case.
///
/// The model must classify into `case`. Statistics follow the case's limit
/// statement; see the per-case helpers below.
pub fn run_case_experiment(
    case: &CaseLabel,
    params: &ModelParams,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    config.validate()?;
    params.require_case(case)?;
    let mut builder = ReportBuilder::new();
    match case {
        CaseLabel::Case1 => case1_experiment(params, config, &mut builder)?,
        CaseLabel::Case2 => case2_experiment(params, config, &mut builder)?,
        CaseLabel::Case3 => case3_experiment(params, config, &mut builder)?,
        CaseLabel::Case4 => case4_experiment(params, config, &mut builder)?,
        CaseLabel::Case5 => case5_experiment(params, config, &mut builder)?,
        CaseLabel::NotCovered(reason) => return Err(Error::NotCovered(reason.clone())),
    }
    Ok(ExperimentReport {
        case: case.index().expect("covered case"),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        statistics: builder.statistics,
        curves: builder.curves,
    })
}

/// Case 1: both scaled coordinates are squared Bessel endpoints (Gamma
/// marginals), and the two coordinate processes are asymptotically
/// independent.
fn case1_experiment(
    params: &ModelParams,
    config: &ExperimentConfig,
    builder: &mut ReportBuilder,
) -> Result<()> {
    let last_n = *config.n_list.last().expect("validated nonempty");
    for (n_idx, &n) in config.n_list.iter().enumerate() {
        let spec = ScalingSpec::for_case(&params.case_label, n, config.grid.clone())?;
        let feats = simulate_features(
            params,
            &spec,
            config.master_seed,
            n_idx as u64 * config.replicates as u64,
            config.replicates,
        )?;
        for (ti, &t) in config.grid.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let scaled: Vec<[f64; 2]> = feats
                .iter()
                .map(|f| [f.raw[ti][0] as f64 / n as f64, f.raw[ti][1] as f64 / n as f64])
                .collect();
            for coord in 0..2 {
                let b = params.immigration_mean[coord];
                let v = params.v(coord + 1, coord + 1, coord + 1);
                let Some(cdf) = gamma_endpoint_cdf(b, v, t) else { continue };
                let xs: Vec<f64> = scaled.iter().map(|p| p[coord]).collect();
                let d = stats::ks_one_sample(&xs, &cdf)?;
                builder.ks(
                    &format!("ks_scaled_x{}_vs_gamma", coord + 1),
                    t,
                    n,
                    d,
                    config.ks_tolerance,
                    xs.len(),
                );
                if n == last_n && ti == config.grid.len() - 1 {
                    builder.cdf_curve(&format!("cdf_x{}_t{}", coord + 1, t), &xs, cdf);
                }
            }
            // Cross-correlation of the scaled coordinates against the
            // independence claim.
            let xs: Vec<f64> = scaled.iter().map(|p| p[0]).collect();
            let ys: Vec<f64> = scaled.iter().map(|p| p[1]).collect();
            let (corr, se) = stats::correlation_with_se(&xs, &ys)?;
            let tol = 4.0 * se;
            builder.push(StatRecord {
                name: "cross_correlation_scaled".into(),
                time: Some(t),
                n: Some(n),
                estimate: corr,
                se: Some(se),
                target: Some(0.0),
                tolerance: Some(tol),
                sample_size: xs.len(),
                pass: Some(corr.abs() <= tol),
            });
        }
    }
    Ok(())
}

/// Case 2: joint Laplace transform of `(n^{-1} X1, n^{-2} X2)` against the
/// closed form, Gamma marginal of the first coordinate, the relative
/// frequency of type 2 per type 1 against the integral ratio, and the
/// scaled total progeny against the integrated limit.
fn case2_experiment(
    params: &ModelParams,
    config: &ExperimentConfig,
    builder: &mut ReportBuilder,
) -> Result<()> {
    let (b1, v, a21) = (params.b1(), params.v(1, 1, 1), params.a21());
    let t_max = config.grid.iter().cloned().fold(0.0, f64::max);

    // Simulated reference for the two functionals with no closed-form law.
    let reference: Vec<_> = (0..config.reference_paths)
        .into_par_iter()
        .map(|r| {
            let key = StreamKey::new(config.master_seed, StreamDomain::Limit, r as u64);
            let path = simulate_limit_case(params, t_max, config.dt, key)?;
            let per_t: Vec<(f64, f64)> = config
                .grid
                .iter()
                .map(|&t| {
                    let x1 = path.value_at(0, t).expect("case 2 has x1");
                    let integral = path.integral_at(t).expect("case 2 has the integral");
                    (x1, integral)
                })
                .collect();
            Ok(per_t)
        })
        .collect::<Result<Vec<_>>>()?;

    let last_n = *config.n_list.last().expect("validated nonempty");
    for (n_idx, &n) in config.n_list.iter().enumerate() {
        let spec = ScalingSpec::for_case(&params.case_label, n, config.grid.clone())?;
        let feats = simulate_features(
            params,
            &spec,
            config.master_seed,
            n_idx as u64 * config.replicates as u64,
            config.replicates,
        )?;
        let nf = n as f64;
        for (ti, &t) in config.grid.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let scaled: Vec<[f64; 2]> = feats
                .iter()
                .map(|f| [f.raw[ti][0] as f64 / nf, f.raw[ti][1] as f64 / (nf * nf)])
                .collect();

            for &s in &config.s_grid {
                let (est, se) = stats::empirical_laplace(&scaled, s)?;
                let target = laplace_joint_case2(s[0], s[1], t, b1, v, a21);
                builder.push(StatRecord {
                    name: format!("joint_laplace_s({},{})", s[0], s[1]),
                    time: Some(t),
                    n: Some(n),
                    estimate: est,
                    se: Some(se),
                    target: Some(target),
                    tolerance: Some(config.laplace_tolerance),
                    sample_size: scaled.len(),
                    pass: Some((est - target).abs() <= config.laplace_tolerance),
                });
            }

            if let Some(cdf) = gamma_endpoint_cdf(b1, v, t) {
                let xs: Vec<f64> = scaled.iter().map(|p| p[0]).collect();
                let d = stats::ks_one_sample(&xs, &cdf)?;
                builder.ks("ks_scaled_x1_vs_gamma", t, n, d, config.ks_tolerance, xs.len());
                if n == last_n && ti == config.grid.len() - 1 {
                    builder.cdf_curve(&format!("cdf_x1_t{t}"), &xs, cdf);
                }
            }

            // Relative frequency n^{-1} X2/X1 (0 when X1 = 0) against the
            // limit ratio a21 * integral / endpoint.
            let freq: Vec<f64> = scaled
                .iter()
                .map(|p| if p[0] > 0.0 { p[1] / p[0] } else { 0.0 })
                .collect();
            let ref_ratio: Vec<f64> = reference
                .iter()
                .filter(|per_t| per_t[ti].0 > 0.0)
                .map(|per_t| a21 * per_t[ti].1 / per_t[ti].0)
                .collect();
            let d = stats::ks_two_sample(&freq, &ref_ratio)?;
            let threshold = two_sample_threshold(config.ks_tolerance, freq.len(), ref_ratio.len());
            builder.ks("ks_relative_frequency", t, n, d, threshold, freq.len());

            // Scaled total progeny of type 1 against the integrated limit.
            let progeny: Vec<f64> = feats
                .iter()
                .map(|f| f.progeny[ti] as f64 / (nf * nf))
                .collect();
            let ref_integral: Vec<f64> = reference.iter().map(|per_t| per_t[ti].1).collect();
            let d = stats::ks_two_sample(&progeny, &ref_integral)?;
            let threshold =
                two_sample_threshold(config.ks_tolerance, progeny.len(), ref_integral.len());
            builder.ks("ks_total_progeny", t, n, d, threshold, progeny.len());
            if n == last_n && ti == config.grid.len() - 1 {
                let mut sorted_ref = ref_integral.clone();
                sorted_ref.sort_by(|a, b| a.total_cmp(b));
                let ref_cdf = move |x: f64| {
                    let pos = sorted_ref.partition_point(|v| *v <= x);
                    pos as f64 / sorted_ref.len() as f64
                };
                builder.cdf_curve(&format!("cdf_total_progeny_t{t}"), &progeny, ref_cdf);
            }
        }
    }
    Ok(())
}

/// Two-sample KS pass threshold: base bias allowance plus the 95% null
/// quantile for the pooled sample sizes.
fn two_sample_threshold(base: f64, na: usize, nb: usize) -> f64 {
    base + 1.358 * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

/// Case 3: first coordinate is a squared Bessel endpoint; the second is
/// stationary with law given by the generating-function product. The exact
/// cross-time covariance and its uniform bound are checked, and the
/// conjectured joint independence is probed (no theoretical target).
fn case3_experiment(
    params: &ModelParams,
    config: &ExperimentConfig,
    builder: &mut ReportBuilder,
) -> Result<()> {
    let mu2 = coordinate_stationary_law(params, 1, DEFAULT_PMF_SIZE, DEFAULT_TRANSFORM_POINTS)?;
    let (b1, v) = (params.b1(), params.v(1, 1, 1));
    let last_n = *config.n_list.last().expect("validated nonempty");

    for (n_idx, &n) in config.n_list.iter().enumerate() {
        let spec = ScalingSpec::for_case(&params.case_label, n, config.grid.clone())?;
        let feats = simulate_features(
            params,
            &spec,
            config.master_seed,
            n_idx as u64 * config.replicates as u64,
            config.replicates,
        )?;
        for (ti, &t) in config.grid.iter().enumerate() {
            // The stationary coordinate is compared on positive times only:
            // at t = 0 the chain sits at its zero start, not at
            // stationarity.
            if t == 0.0 {
                continue;
            }
            if let Some(cdf) = gamma_endpoint_cdf(b1, v, t) {
                let xs: Vec<f64> = feats
                    .iter()
                    .map(|f| f.raw[ti][0] as f64 / n as f64)
                    .collect();
                let d = stats::ks_one_sample(&xs, &cdf)?;
                builder.ks("ks_scaled_x1_vs_gamma", t, n, d, config.ks_tolerance, xs.len());
            }
            let x2: Vec<u64> = feats.iter().map(|f| f.raw[ti][1]).collect();
            let tv = stats::total_variation_vs_pmf(&x2, &mu2.pmf)?;
            builder.push(StatRecord {
                name: "tv_x2_vs_stationary".into(),
                time: Some(t),
                n: Some(n),
                estimate: tv,
                se: None,
                target: Some(0.0),
                tolerance: Some(config.tv_tolerance),
                sample_size: x2.len(),
                pass: Some(tv <= config.tv_tolerance),
            });
            if n == last_n && ti == config.grid.len() - 1 {
                builder.pmf_curve(&format!("pmf_x2_t{t}"), &x2, &mu2.pmf);
            }
        }

        // Dependence probe for the conjectured joint independence.
        if n == last_n {
            let ti = config.grid.len() - 1;
            let t = config.grid[ti];
            let mut idx: Vec<usize> = (0..feats.len()).collect();
            let mut rng = StreamKey::new(config.master_seed, StreamDomain::Aux, 0).stream();
            idx.shuffle(&mut rng);
            idx.truncate(config.dcor_subsample.min(feats.len()));
            idx.sort_unstable();
            let xs: Vec<f64> = idx
                .iter()
                .map(|&i| feats[i].raw[ti][0] as f64 / n as f64)
                .collect();
            let ys: Vec<f64> = idx.iter().map(|&i| feats[i].raw[ti][1] as f64).collect();
            let dcor = stats::distance_correlation(&xs, &ys)?;
            builder.push(StatRecord {
                name: "dcor_probe_no_theoretical_target".into(),
                time: Some(t),
                n: Some(n),
                estimate: dcor,
                se: None,
                target: None,
                tolerance: None,
                sample_size: xs.len(),
                pass: None,
            });
        }
    }

    cross_time_cov_stats(params, config, builder, default_cov_design(config, false))?;
    Ok(())
}

/// Case 4: the scaled pair collapses onto the ray with slope
/// `a21/(1 - a22)`; the gap statistic must shrink with n.
fn case4_experiment(
    params: &ModelParams,
    config: &ExperimentConfig,
    builder: &mut ReportBuilder,
) -> Result<()> {
    let ray = params.a21() / (1.0 - params.a22());
    let (b1, v) = (params.b1(), params.v(1, 1, 1));
    let mut gap_means: Vec<f64> = vec![];

    for (n_idx, &n) in config.n_list.iter().enumerate() {
        let spec = ScalingSpec::for_case(&params.case_label, n, config.grid.clone())?;
        let feats = simulate_features(
            params,
            &spec,
            config.master_seed,
            n_idx as u64 * config.replicates as u64,
            config.replicates,
        )?;
        let nf = n as f64;
        let gaps: Vec<f64> = feats
            .iter()
            .map(|f| {
                f.raw
                    .iter()
                    .map(|x| (x[1] as f64 / nf - ray * x[0] as f64 / nf).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let (mean, se) = stats::mean_and_se(&gaps)?;
        gap_means.push(mean);
        builder.push(StatRecord {
            name: "ray_sup_gap".into(),
            time: None,
            n: Some(n),
            estimate: mean,
            se: Some(se),
            target: Some(0.0),
            tolerance: None,
            sample_size: gaps.len(),
            pass: None,
        });

        for (ti, &t) in config.grid.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            if let Some(cdf) = gamma_endpoint_cdf(b1, v, t) {
                let xs: Vec<f64> = feats.iter().map(|f| f.raw[ti][0] as f64 / nf).collect();
                let d = stats::ks_one_sample(&xs, &cdf)?;
                builder.ks("ks_scaled_x1_vs_gamma", t, n, d, config.ks_tolerance, xs.len());
            }
        }
    }

    if gap_means.len() >= 2 {
        let ratio = gap_means.last().unwrap() / gap_means.first().unwrap();
        builder.push(StatRecord {
            name: "ray_sup_gap_decay_ratio".into(),
            time: None,
            n: None,
            estimate: ratio,
            se: None,
            target: Some(0.0),
            tolerance: Some(1.0),
            sample_size: config.replicates,
            pass: Some(ratio < 1.0),
        });
    }
    Ok(())
}

/// Case 5: first coordinate is stationary, second is a squared Bessel
/// endpoint whose drift mixes the subcritical coordinate's parameters.
fn case5_experiment(
    params: &ModelParams,
    config: &ExperimentConfig,
    builder: &mut ReportBuilder,
) -> Result<()> {
    let mu1 = coordinate_stationary_law(params, 0, DEFAULT_PMF_SIZE, DEFAULT_TRANSFORM_POINTS)?;
    let drift = params.a21() / (1.0 - params.a11()) * params.b1() + params.b2();
    let v = params.v(2, 2, 2);
    let last_n = *config.n_list.last().expect("validated nonempty");

    for (n_idx, &n) in config.n_list.iter().enumerate() {
        let spec = ScalingSpec::for_case(&params.case_label, n, config.grid.clone())?;
        let feats = simulate_features(
            params,
            &spec,
            config.master_seed,
            n_idx as u64 * config.replicates as u64,
            config.replicates,
        )?;
        for (ti, &t) in config.grid.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let x1: Vec<u64> = feats.iter().map(|f| f.raw[ti][0]).collect();
            let tv = stats::total_variation_vs_pmf(&x1, &mu1.pmf)?;
            builder.push(StatRecord {
                name: "tv_x1_vs_stationary".into(),
                time: Some(t),
                n: Some(n),
                estimate: tv,
                se: None,
                target: Some(0.0),
                tolerance: Some(config.tv_tolerance),
                sample_size: x1.len(),
                pass: Some(tv <= config.tv_tolerance),
            });
            if let Some(cdf) = gamma_endpoint_cdf(drift, v, t) {
                let xs: Vec<f64> = feats
                    .iter()
                    .map(|f| f.raw[ti][1] as f64 / n as f64)
                    .collect();
                let d = stats::ks_one_sample(&xs, &cdf)?;
                builder.ks("ks_scaled_x2_vs_gamma", t, n, d, config.ks_tolerance, xs.len());
                if n == last_n && ti == config.grid.len() - 1 {
                    builder.cdf_curve(&format!("cdf_x2_t{t}"), &xs, cdf);
                }
            }
            if n == last_n && ti == config.grid.len() - 1 {
                builder.pmf_curve(&format!("pmf_x1_t{t}"), &x1, &mu1.pmf);
            }
        }
    }

    cross_time_cov_stats(params, config, builder, default_cov_design(config, true))?;
    Ok(())
}

fn default_cov_design(config: &ExperimentConfig, case5: bool) -> Vec<(u64, u64, f64, f64)> {
    if !config.cov_design.is_empty() {
        return config.cov_design.clone();
    }
    if case5 {
        vec![(50, 50, 1.0, 1.0), (100, 50, 0.5, 1.0), (200, 100, 1.0, 0.5)]
    } else {
        vec![(50, 50, 1.0, 1.0), (100, 100, 0.5, 1.0), (100, 400, 1.0, 0.25)]
    }
}

/// Monte Carlo cross-time covariance estimates against the exact formula
/// (cases 3 and 5), with the case-3 uniform bound asserted alongside.
fn cross_time_cov_stats(
    params: &ModelParams,
    config: &ExperimentConfig,
    builder: &mut ReportBuilder,
    design: Vec<(u64, u64, f64, f64)>,
) -> Result<()> {
    let case5 = params.case_label == CaseLabel::Case5;
    for (d_idx, &(n1, n2, t1, t2)) in design.iter().enumerate() {
        let m1 = (n1 as f64 * t1).floor() as usize;
        let m2 = (n2 as f64 * t2).floor() as usize;
        let horizon = m1.max(m2);
        let pairs: Vec<[f64; 2]> = (0..config.replicates)
            .into_par_iter()
            .map(|r| {
                let key = StreamKey::new(
                    config.master_seed,
                    StreamDomain::Path,
                    COV_INDEX_BLOCK + d_idx as u64 * config.replicates as u64 + r as u64,
                );
                let path = simulate_path(params, horizon, key)?;
                let (x1, x2) = (path.at(m1)[0] as f64, path.at(m2)[1] as f64);
                Ok(if case5 {
                    [x1, x2 / n2 as f64]
                } else {
                    [x1 / n1 as f64, x2]
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let xs: Vec<f64> = pairs.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p[1]).collect();
        let (est, se) = stats::covariance_with_se(&xs, &ys)?;
        let exact = if case5 {
            cross_time_cov_case5(params, n1, n2, t1, t2)?
        } else {
            cross_time_cov_case3(params, n1, n2, t1, t2)?
        };
        let tol = 4.0 * se;
        builder.push(StatRecord {
            name: format!("cross_time_cov(n1={n1},n2={n2},t1={t1},t2={t2})"),
            time: None,
            n: None,
            estimate: est,
            se: Some(se),
            target: Some(exact),
            tolerance: Some(tol),
            sample_size: pairs.len(),
            pass: Some((est - exact).abs() <= tol),
        });
        if !case5 {
            let bound = params.v(0, 1, 2).abs() / ((1.0 - params.a22()) * n1 as f64);
            builder.push(StatRecord {
                name: format!("cov_uniform_bound(n1={n1},n2={n2},t1={t1},t2={t2})"),
                time: None,
                n: None,
                estimate: est.abs(),
                se: Some(se),
                target: Some(bound),
                tolerance: Some(tol),
                sample_size: pairs.len(),
                pass: Some(est.abs() <= bound + tol),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{case3_correlated_archetype, poisson_archetype};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n_list: vec![50, 100],
            replicates: 2000,
            grid: vec![0.5, 1.0],
            master_seed: 9,
            reference_paths: 2000,
            dt: 1e-2,
            ks_tolerance: 0.2,
            tv_tolerance: 0.1,
            laplace_tolerance: 0.1,
            dcor_subsample: 400,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn rejects_zero_replicates() {
        let params = poisson_archetype(1).unwrap();
        let config = ExperimentConfig { replicates: 0, ..small_config() };
        assert!(matches!(
            run_case_experiment(&params.case_label, &params, &config),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rejects_case_mismatch() {
        let params = poisson_archetype(1).unwrap();
        assert!(matches!(
            run_case_experiment(&CaseLabel::Case2, &params, &small_config()),
            Err(Error::CaseMismatch { .. })
        ));
    }

    #[test]
    fn case1_report_is_deterministic_and_carries_context() {
        let params = poisson_archetype(1).unwrap();
        let config = small_config();
        let a = run_case_experiment(&params.case_label, &params, &config).unwrap();
        let b = run_case_experiment(&params.case_label, &params, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert!(!a.statistics.is_empty());
        for s in &a.statistics {
            assert!(s.sample_size > 0);
        }
        // Cross-correlation rows must sit inside their 4-se band.
        for s in a.statistics.iter().filter(|s| s.name.starts_with("cross_corr")) {
            assert_eq!(s.pass, Some(true), "{s:?}");
        }
    }

    #[test]
    fn case3_probe_has_no_target() {
        let params = case3_correlated_archetype().unwrap();
        let config = ExperimentConfig {
            n_list: vec![60],
            replicates: 1500,
            ..small_config()
        };
        let report = run_case_experiment(&params.case_label, &params, &config).unwrap();
        let probe = report
            .statistics
            .iter()
            .find(|s| s.name.starts_with("dcor_probe"))
            .expect("probe emitted");
        assert!(probe.target.is_none());
        assert!(probe.pass.is_none());
        // Covariance rows agree with the exact formula.
        for s in report
            .statistics
            .iter()
            .filter(|s| s.name.starts_with("cross_time_cov"))
        {
            assert_eq!(s.pass, Some(true), "{s:?}");
        }
    }

    #[test]
    fn case4_gap_shrinks() {
        let params = poisson_archetype(4).unwrap();
        let config = ExperimentConfig {
            n_list: vec![50, 400],
            replicates: 1500,
            ..small_config()
        };
        let report = run_case_experiment(&params.case_label, &params, &config).unwrap();
        let ratio = report
            .statistics
            .iter()
            .find(|s| s.name == "ray_sup_gap_decay_ratio")
            .expect("ratio emitted");
        assert_eq!(ratio.pass, Some(true), "{ratio:?}");
    }
}
