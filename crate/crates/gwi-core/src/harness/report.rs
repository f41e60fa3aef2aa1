//! Serialization of experiment reports: JSON, flat CSV, and plot-data CSV.

use crate::harness::experiment::ExperimentReport;
use crate::moments::fmt_f64;

/// Pretty JSON with a stable field order (struct order).
pub fn to_json(report: &ExperimentReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

/// Flat CSV export, one row per statistic.
pub fn to_csv(report: &ExperimentReport) -> String {
    let mut out =
        String::from("case,name,time,n,estimate,se,target,tolerance,sample_size,pass\n");
    let opt_f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let opt_u = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &report.statistics {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            report.case,
            s.name,
            opt_f(s.time),
            opt_u(s.n),
            fmt_f64(s.estimate),
            opt_f(s.se),
            opt_f(s.target),
            opt_f(s.tolerance),
            s.sample_size,
            s.pass.map(|p| p.to_string()).unwrap_or_default(),
        ));
    }
    out
}

/// Plot-data CSV: empirical-vs-target curves.
pub fn plot_data_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("curve,x,empirical,target\n");
    for p in &report.curves {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.curve,
            fmt_f64(p.x),
            fmt_f64(p.empirical),
            fmt_f64(p.target),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::{run_case_experiment, ExperimentConfig};
    use crate::model::poisson_archetype;

    #[test]
    fn exports_have_headers_and_rows() {
        let params = poisson_archetype(4).unwrap();
        let config = ExperimentConfig {
            n_list: vec![40],
            replicates: 500,
            grid: vec![1.0],
            reference_paths: 100,
            dt: 0.05,
            ks_tolerance: 0.5,
            ..ExperimentConfig::default()
        };
        let report = run_case_experiment(&params.case_label, &params, &config).unwrap();
        let json = to_json(&report);
        assert!(json.contains("\"statistics\""));
        let csv = to_csv(&report);
        assert!(csv.lines().count() > 1);
        assert!(csv.starts_with("case,name,time,n,"));
        let plot = plot_data_csv(&report);
        assert!(plot.starts_with("curve,x,empirical,target"));
    }
}
