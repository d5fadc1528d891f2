//! Report writers: full JSON and a rank-table CSV.

use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::EvalReport;

/// Serializes the full report (mean and per-trial curves) as pretty JSON.
/// The output is byte-reproducible for identical inputs and seed.
pub fn report_to_json(report: &EvalReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("report serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_report_json(report: &EvalReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_to_json(report)?)?;
    Ok(())
}

/// Rank table: one row per rank with the trial mean and its 95% interval.
pub fn write_rank_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::from("rank,mean,ci_low,ci_high\n");
    let trials = report.per_trial.len().max(1) as f64;
    for (k, &mean) in report.mean_cmc.iter().enumerate() {
        let half = if report.per_trial.len() > 1 {
            let var = report
                .per_trial
                .iter()
                .filter_map(|t| t.cmc.get(k))
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / (trials - 1.0);
            1.96 * (var / trials).sqrt()
        } else {
            0.0
        };
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            k + 1,
            mean,
            mean - half,
            mean + half
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
