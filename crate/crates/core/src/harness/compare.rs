use serde::{Deserialize, Serialize};

use super::{HarnessError, MetricsReport};
use crate::sampler::Strategy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub round: u32,
    /// `coverage`, `rare_cumulative` or `cumulative:<class>`.
    pub metric: String,
    /// Trial mean per column.
    pub values: Vec<f64>,
    /// `values[i] - values[baseline]`.
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub columns: Vec<String>,
    pub baseline: usize,
    pub rows: Vec<ComparisonRow>,
}

fn column_names(reports: &[MetricsReport]) -> Vec<String> {
    let mut out = Vec::with_capacity(reports.len());
    for (i, r) in reports.iter().enumerate() {
        let name = r.strategy.to_string();
        let seen = reports[..i].iter().filter(|p| p.strategy == r.strategy).count();
        out.push(if seen == 0 { name } else { format!("{name}#{}", seen + 1) });
    }
    out
}

/// Lines the reports up round by round against a baseline: the first `random`
/// report if present, otherwise the first report.
pub fn compare_strategies(reports: &[MetricsReport]) -> Result<ComparisonTable, HarnessError> {
    let first = reports.first().ok_or_else(|| HarnessError::MismatchedConfigs("no reports".into()))?;
    for r in &reports[1..] {
        if r.total_scenes != first.total_scenes || r.class_totals != first.class_totals {
            return Err(HarnessError::MismatchedConfigs("reports cover different pools".into()));
        }
        if r.budget_per_round != first.budget_per_round || r.summary.len() != first.summary.len() {
            return Err(HarnessError::MismatchedConfigs("reports use different budgets or round counts".into()));
        }
    }
    let baseline = reports.iter().position(|r| r.strategy == Strategy::Random).unwrap_or(0);
    let row = |round: u32, metric: String, values: Vec<f64>| {
        let b = values[baseline];
        ComparisonRow { round, metric, deltas: values.iter().map(|v| v - b).collect(), values }
    };

    let mut rows = Vec::new();
    for (k, s) in first.summary.iter().enumerate() {
        let at = |f: &dyn Fn(&super::RoundSummary) -> f64| reports.iter().map(|r| f(&r.summary[k])).collect();
        rows.push(row(s.round, "coverage".into(), at(&|x| x.coverage.mean)));
        rows.push(row(s.round, "rare_cumulative".into(), at(&|x| x.rare_cumulative.mean)));
        for c in s.cumulative.keys() {
            rows.push(row(s.round, format!("cumulative:{c}"), at(&|x| x.cumulative.get(c).map_or(0.0, |m| m.mean))));
        }
    }
    Ok(ComparisonTable { columns: column_names(reports), baseline, rows })
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["round".to_string(), "metric".to_string()];
        header.extend(self.columns.iter().cloned());
        header.extend(self.columns.iter().map(|c| format!("delta_{c}")));
        w.write_record(&header).expect("writing to memory");
        for r in &self.rows {
            let mut rec = vec![r.round.to_string(), r.metric.clone()];
            rec.extend(r.values.iter().map(|v| format!("{v:.4}")));
            rec.extend(r.deltas.iter().map(|v| format!("{v:.4}")));
            w.write_record(&rec).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}
