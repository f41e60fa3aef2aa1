//! Martingale-difference decompositions of a simulated path.
//!
//! The increment sequence `M_k = X_k - A X_{k-1} - b` is a martingale
//! difference array. Feeding it back through geometric weights splits the
//! second coordinate as `X_{k,2} = a21 X1part_k + X2part_k`, where
//!
//! * `X1part_k = sum_j w_{k-j} (M_{j,1} + b1)` with weights
//!   `w_l = (a11^l - a22^l)/(a11 - a22)`, degenerating to `l a^{l-1}` on a
//!   tied diagonal, and
//! * `X2part_k = sum_j a22^{k-j} (M_{j,2} + b2)`.
//!
//! Both parts are evaluated by O(1)-per-step recursions rather than the
//! literal sums.

use crate::model::{ModelParams, CRITICAL_TOL};
use crate::simulate::PathRecord;
use crate::{Error, Result};

/// Martingale increments and the derived series of a single path.
#[derive(Debug, Clone)]
pub struct DecompositionSeries {
    /// `M_k` for k = 1..=K.
    pub increments: Vec<[f64; 2]>,
    /// First split of the second coordinate, k = 1..=K.
    pub x1part: Vec<f64>,
    /// Second split of the second coordinate, k = 1..=K.
    pub x2part: Vec<f64>,
    /// AR(1)-filtered increments `V_{k,i}` with coefficient a22, when
    /// a22 < 1.
    pub ar_filtered: Option<[Vec<f64>; 2]>,
    /// AR(1)-filtered first increments with coefficient a11, when a11 < 1.
    pub ar_filtered_first: Option<Vec<f64>>,
}

/// Martingale increments `M_k = X_k - A X_{k-1} - b` for k = 1..=K.
pub fn martingale_increments(path: &PathRecord, params: &ModelParams) -> Vec<[f64; 2]> {
    let a = &params.mean_matrix;
    let b = params.immigration_mean;
    let mut out = Vec::with_capacity(path.horizon());
    for k in 1..=path.horizon() {
        let x = path.at(k);
        let prev = path.at(k - 1);
        let prev_f = [prev[0] as f64, prev[1] as f64];
        let drift = a.matvec(prev_f);
        out.push([
            x[0] as f64 - drift[0] - b[0],
            x[1] as f64 - drift[1] - b[1],
        ]);
    }
    out
}

/// Stable AR(1) filter: `V_0 = 0`, `V_k = coeff V_{k-1} + input_k`.
///
/// Equivalent to the direct geometric sum `sum_j coeff^{k-j} input_j`.
/// Requires `coeff` in [0, 1).
pub fn ar1_filter(input: &[f64], coeff: f64) -> Vec<f64> {
    assert!((0.0..1.0).contains(&coeff), "AR(1) coefficient must lie in [0,1)");
    let mut out = Vec::with_capacity(input.len());
    let mut v = 0.0;
    for m in input {
        v = coeff * v + m;
        out.push(v);
    }
    out
}

/// Full decomposition of a path under its model.
///
/// The reconstruction identity `X_{k,2} = a21 x1part_k + x2part_k` is
/// asserted for every step (tolerance 1e-9, relative above unit scale).
pub fn decompose_second(path: &PathRecord, params: &ModelParams) -> Result<DecompositionSeries> {
    let increments = martingale_increments(path, params);
    if increments.len() != path.horizon() {
        return Err(Error::LengthMismatch {
            expected: path.horizon(),
            got: increments.len(),
        });
    }
    let (a11, a21, a22) = (params.a11(), params.a21(), params.a22());
    let (b1, b2) = (params.b1(), params.b2());

    let mut x1part = Vec::with_capacity(increments.len());
    let mut x2part = Vec::with_capacity(increments.len());

    if (a11 - a22).abs() <= CRITICAL_TOL {
        // Tied diagonal: weights (k-j) a^{k-j-1} via a second accumulator.
        let mid = 0.5 * (a11 + a22);
        let mut geo = 0.0; // sum a^{k-j} c_j
        let mut part = 0.0; // sum (k-j) a^{k-j-1} c_j
        for m in &increments {
            part = mid * part + geo;
            geo = mid * geo + (m[0] + b1);
            x1part.push(part);
        }
    } else {
        let mut geo_a11 = 0.0;
        let mut geo_a22 = 0.0;
        for m in &increments {
            let c = m[0] + b1;
            geo_a11 = a11 * geo_a11 + c;
            geo_a22 = a22 * geo_a22 + c;
            x1part.push((geo_a11 - geo_a22) / (a11 - a22));
        }
    }

    let mut geo = 0.0;
    for m in &increments {
        geo = a22 * geo + (m[1] + b2);
        x2part.push(geo);
    }

    for k in 1..=path.horizon() {
        let lhs = path.at(k)[1] as f64;
        let rhs = a21 * x1part[k - 1] + x2part[k - 1];
        let tol = 1e-9 * lhs.abs().max(1.0);
        if (lhs - rhs).abs() > tol {
            return Err(Error::NoConvergence(format!(
                "reconstruction identity violated at step {k}: {lhs} vs {rhs}"
            )));
        }
    }

    let ar_filtered = (a22 < 1.0 - CRITICAL_TOL).then(|| {
        let m1: Vec<f64> = increments.iter().map(|m| m[0]).collect();
        let m2: Vec<f64> = increments.iter().map(|m| m[1]).collect();
        [ar1_filter(&m1, a22), ar1_filter(&m2, a22)]
    });
    let ar_filtered_first = (a11 < 1.0 - CRITICAL_TOL).then(|| {
        let m1: Vec<f64> = increments.iter().map(|m| m[0]).collect();
        ar1_filter(&m1, a11)
    });

    Ok(DecompositionSeries {
        increments,
        x1part,
        x2part,
        ar_filtered,
        ar_filtered_first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Law;
    use crate::model::{build_model, poisson_archetype};
    use crate::rng::seed_plan;
    use crate::simulate::simulate_path;
    use approx::assert_abs_diff_eq;

    #[test]
    fn case1_increments_are_plain_differences() {
        let params = poisson_archetype(1).unwrap();
        let path = simulate_path(&params, 40, seed_plan(11, 1)[0]).unwrap();
        let m = martingale_increments(&path, &params);
        for k in 1..=40usize {
            let expect = [
                path.at(k)[0] as f64 - path.at(k - 1)[0] as f64 - 1.0,
                path.at(k)[1] as f64 - path.at(k - 1)[1] as f64 - 1.0,
            ];
            assert_eq!(m[k - 1], expect);
        }
    }

    #[test]
    fn deterministic_model_has_zero_increments() {
        let params = build_model(
            Law::deterministic([1, 1]),
            Law::deterministic([0, 1]),
            Law::deterministic([1, 0]),
            false,
        )
        .unwrap();
        let path = simulate_path(&params, 5, seed_plan(0, 1)[0]).unwrap();
        for m in martingale_increments(&path, &params) {
            assert_eq!(m, [0.0, 0.0]);
        }
    }

    /// Mean of M_k across replicates is 0 within 4 standard errors, in every
    /// covered case and coordinate.
    #[test]
    fn increments_are_centered() {
        let horizon = 10;
        let reps = 10_000usize;
        for case in 1..=5u8 {
            let params = poisson_archetype(case).unwrap();
            let mut sums = vec![[0.0f64; 2]; horizon];
            let mut sq = vec![[0.0f64; 2]; horizon];
            for key in seed_plan(1000 + case as u64, reps) {
                let path = simulate_path(&params, horizon, key).unwrap();
                for (k, m) in martingale_increments(&path, &params).iter().enumerate() {
                    for i in 0..2 {
                        sums[k][i] += m[i];
                        sq[k][i] += m[i] * m[i];
                    }
                }
            }
            for k in 0..horizon {
                for i in 0..2 {
                    let mean = sums[k][i] / reps as f64;
                    let var = sq[k][i] / reps as f64 - mean * mean;
                    let se = (var / reps as f64).sqrt();
                    assert!(
                        mean.abs() <= 4.0 * se + 1e-12,
                        "case {case} k={} coord {i}: mean {mean}, se {se}",
                        k + 1
                    );
                }
            }
        }
    }

    /// In the strongly critical coupled case the first split telescopes to
    /// the running total of the first population.
    #[test]
    fn x1part_is_total_progeny_when_strongly_critical() {
        let params = poisson_archetype(2).unwrap();
        let path = simulate_path(&params, 60, seed_plan(5, 1)[0]).unwrap();
        let series = decompose_second(&path, &params).unwrap();
        let mut progeny = 0u64;
        for k in 1..=60usize {
            progeny += if k >= 2 { path.at(k - 1)[0] } else { 0 };
            let total: u64 = (1..k).map(|j| path.at(j)[0]).sum();
            assert_eq!(progeny, total);
            assert_abs_diff_eq!(series.x1part[k - 1], total as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn uncoupled_model_reduces_to_second_part() {
        let params = poisson_archetype(3).unwrap();
        let path = simulate_path(&params, 50, seed_plan(8, 1)[0]).unwrap();
        let series = decompose_second(&path, &params).unwrap();
        for k in 1..=50usize {
            assert_abs_diff_eq!(
                series.x2part[k - 1],
                path.at(k)[1] as f64,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn reconstruction_holds_on_random_case4_paths() {
        let params = poisson_archetype(4).unwrap();
        for key in seed_plan(21, 20) {
            let path = simulate_path(&params, 200, key).unwrap();
            // decompose_second asserts the identity internally.
            decompose_second(&path, &params).unwrap();
        }
    }

    #[test]
    fn ar1_filter_basics() {
        let m = [1.0, 1.0, 1.0];
        assert_eq!(ar1_filter(&m, 0.0), vec![1.0, 1.0, 1.0]);
        let v = ar1_filter(&m, 0.5);
        assert_abs_diff_eq!(v[2], 1.75, epsilon = 1e-15);
    }

    #[test]
    fn ar1_filter_matches_direct_sum() {
        let params = poisson_archetype(4).unwrap();
        let path = simulate_path(&params, 120, seed_plan(13, 1)[0]).unwrap();
        let m2: Vec<f64> = martingale_increments(&path, &params)
            .iter()
            .map(|m| m[1])
            .collect();
        let a = params.a22();
        let rec = ar1_filter(&m2, a);
        for k in 1..=m2.len() {
            let direct: f64 = (1..=k).map(|j| a.powi((k - j) as i32) * m2[j - 1]).sum();
            assert_abs_diff_eq!(rec[k - 1], direct, epsilon = 1e-9);
        }
    }
}
