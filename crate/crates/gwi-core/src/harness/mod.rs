//! Scaled step processes and the per-case verification experiments.

pub mod experiment;
pub mod report;
pub mod stats;

pub use experiment::{run_case_experiment, ExperimentConfig, ExperimentReport, StatRecord};
pub use stats::{empirical_laplace, ks_one_sample, ks_two_sample};

use crate::model::CaseLabel;
use crate::simulate::PathRecord;
use crate::{Error, Result};
use serde::Serialize;

/// Scaling normalization `n^{-alpha_i} X_{floor(n t), i}` on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingSpec {
    pub n: u64,
    /// Scaling exponents per coordinate.
    pub exponents: [f64; 2],
    /// Evaluation times.
    pub grid: Vec<f64>,
}

impl ScalingSpec {
    /// The normalization each case's limit statement uses:
    /// case 1 -> (1,1), case 2 -> (1,2), case 3 -> (1,0), case 4 -> (1,1),
    /// case 5 -> (0,1).
    pub fn for_case(case: &CaseLabel, n: u64, grid: Vec<f64>) -> Result<ScalingSpec> {
        let exponents = match case {
            CaseLabel::Case1 => [1.0, 1.0],
            CaseLabel::Case2 => [1.0, 2.0],
            CaseLabel::Case3 => [1.0, 0.0],
            CaseLabel::Case4 => [1.0, 1.0],
            CaseLabel::Case5 => [0.0, 1.0],
            CaseLabel::NotCovered(reason) => return Err(Error::NotCovered(reason.clone())),
        };
        Ok(ScalingSpec { n, exponents, grid })
    }

    pub fn index_at(&self, t: f64) -> usize {
        (self.n as f64 * t).floor() as usize
    }

    pub fn max_index(&self) -> usize {
        self.grid
            .iter()
            .map(|t| self.index_at(*t))
            .max()
            .unwrap_or(0)
    }
}

/// Values of the scaled step process on the grid.
#[derive(Debug, Clone)]
pub struct StepProcessSample {
    pub times: Vec<f64>,
    /// Scaled coordinate pair at each grid time.
    pub values: Vec<[f64; 2]>,
}

/// Evaluate the scaled step process of one path on the grid.
pub fn step_process(path: &PathRecord, spec: &ScalingSpec) -> Result<StepProcessSample> {
    let needed = spec.max_index();
    if path.horizon() < needed {
        return Err(Error::HorizonTooShort {
            needed,
            actual: path.horizon(),
        });
    }
    let scale = [
        (spec.n as f64).powf(-spec.exponents[0]),
        (spec.n as f64).powf(-spec.exponents[1]),
    ];
    let values = spec
        .grid
        .iter()
        .map(|t| {
            let x = path.at(spec.index_at(*t));
            [x[0] as f64 * scale[0], x[1] as f64 * scale[1]]
        })
        .collect();
    Ok(StepProcessSample {
        times: spec.grid.clone(),
        values,
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
    fn zero_time_is_the_zero_state() {
        let params = poisson_archetype(2).unwrap();
        let spec = ScalingSpec::for_case(&params.case_label, 50, vec![0.0, 1.0]).unwrap();
        let path = simulate_path(&params, 50, seed_plan(2, 1)[0]).unwrap();
        let sample = step_process(&path, &spec).unwrap();
        assert_eq!(sample.values[0], [0.0, 0.0]);
    }

    #[test]
    fn deterministic_strongly_critical_scaling() {
        // X_{n,1} = n and X_{n,2} = n(n-1)/2, so the scaled pair at t = 1
        // is (1, (1 - 1/n)/2).
        let params = build_model(
            Law::deterministic([1, 1]),
            Law::deterministic([0, 1]),
            Law::deterministic([1, 0]),
            false,
        )
        .unwrap();
        let n = 40u64;
        let spec = ScalingSpec::for_case(&params.case_label, n, vec![1.0]).unwrap();
        let path = simulate_path(&params, n as usize, seed_plan(0, 1)[0]).unwrap();
        let sample = step_process(&path, &spec).unwrap();
        assert_abs_diff_eq!(sample.values[0][0], 1.0);
        assert_abs_diff_eq!(sample.values[0][1], (1.0 - 1.0 / n as f64) / 2.0);
    }

    #[test]
    fn short_path_is_rejected() {
        let params = poisson_archetype(1).unwrap();
        let spec = ScalingSpec::for_case(&params.case_label, 100, vec![1.0]).unwrap();
        let path = simulate_path(&params, 10, seed_plan(1, 1)[0]).unwrap();
        assert!(matches!(
            step_process(&path, &spec),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn scaling_exponents_per_case() {
        let grid = vec![1.0];
        let expect = [
            (1u8, [1.0, 1.0]),
            (2, [1.0, 2.0]),
            (3, [1.0, 0.0]),
            (4, [1.0, 1.0]),
            (5, [0.0, 1.0]),
        ];
        for (case, exps) in expect {
            let label = CaseLabel::from_index(case).unwrap();
            let spec = ScalingSpec::for_case(&label, 10, grid.clone()).unwrap();
            assert_eq!(spec.exponents, exps, "case {case}");
        }
        assert!(ScalingSpec::for_case(&CaseLabel::NotCovered("x".into()), 10, grid).is_err());
    }
}
