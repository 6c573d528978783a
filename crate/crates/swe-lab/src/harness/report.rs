//! Aggregation of per-seed traces into summary tables and the plain-text
//! run report.
//!
//! Rendered artifacts contain no timing or host information, so identical
//! configs produce byte-identical files.

use crate::core_math::stats::{median, percentile};
use crate::error::{Error, Result};
use crate::trace::Trace;

/// Final-row statistics across a homogeneous set of traces.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub columns: Vec<String>,
    /// Final row of each trace, in input order.
    pub finals: Vec<Vec<Option<f64>>>,
    pub medians: Vec<Option<f64>>,
    pub iqr_low: Vec<Option<f64>>,
    pub iqr_high: Vec<Option<f64>>,
}

/// Per-column medians and interquartile ranges of the traces' final rows.
///
/// # Errors
/// Fails on an empty input, an empty trace, or mismatched column sets.
pub fn summarize(traces: &[&Trace]) -> Result<SummaryRecord> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidArgument("summarize needs at least one trace".into()))?;
    let columns: Vec<String> = first.columns().to_vec();
    let mut finals = Vec::with_capacity(traces.len());
    for trace in traces {
        if trace.columns() != columns.as_slice() {
            return Err(Error::InvalidArgument(format!(
                "trace schema {:?} does not match {:?}",
                trace.columns(),
                columns
            )));
        }
        if trace.is_empty() {
            return Err(Error::InvalidArgument("cannot summarize an empty trace".into()));
        }
        finals.push(trace.row(trace.num_rows() - 1).to_vec());
    }

    let mut medians = Vec::with_capacity(columns.len());
    let mut iqr_low = Vec::with_capacity(columns.len());
    let mut iqr_high = Vec::with_capacity(columns.len());
    for col in 0..columns.len() {
        let values: Vec<f64> = finals.iter().filter_map(|row| row[col]).collect();
        if values.is_empty() {
            medians.push(None);
            iqr_low.push(None);
            iqr_high.push(None);
        } else {
            medians.push(Some(median(&values)?));
            iqr_low.push(Some(percentile(&values, 25.0)?));
            iqr_high.push(Some(percentile(&values, 75.0)?));
        }
    }
    Ok(SummaryRecord {
        columns,
        finals,
        medians,
        iqr_low,
        iqr_high,
    })
}

fn push_cells(out: &mut String, label: &str, cells: &[Option<f64>]) {
    out.push_str(label);
    for cell in cells {
        out.push(',');
        if let Some(v) = cell {
            out.push_str(&v.to_string());
        }
    }
    out.push('\n');
}

/// Renders a summary as CSV: one labeled row per input trace, then
/// `median` / `iqr_low` / `iqr_high` rows.
///
/// # Errors
/// Fails when the label count differs from the trace count.
pub fn summary_csv(record: &SummaryRecord, labels: &[String]) -> Result<String> {
    if labels.len() != record.finals.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} final rows",
            labels.len(),
            record.finals.len()
        )));
    }
    let mut out = String::from("run");
    for col in &record.columns {
        out.push(',');
        out.push_str(col);
    }
    out.push('\n');
    for (label, row) in labels.iter().zip(&record.finals) {
        push_cells(&mut out, label, row);
    }
    push_cells(&mut out, "median", &record.medians);
    push_cells(&mut out, "iqr_low", &record.iqr_low);
    push_cells(&mut out, "iqr_high", &record.iqr_high);
    Ok(out)
}

/// Result of one bound check attached to a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Named final metrics of one seed's run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub metrics: Vec<(String, f64)>,
}

/// Everything known about a finished experiment. The rendered report file
/// deliberately omits `duration`, keeping artifacts byte-identical across
/// reruns; callers print the duration separately.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: String,
    pub config_json: String,
    pub seeds: Vec<SeedSummary>,
    pub aggregates: Vec<(String, f64)>,
    pub checks: Vec<CheckOutcome>,
    pub duration: std::time::Duration,
}

impl RunReport {
    /// Conjunction of all attached bound checks (vacuously true).
    #[must_use]
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// The plain-text report artifact.
    #[must_use]
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("experiment: {}\n", self.experiment));
        out.push_str(&format!("status: {}\n\n", if self.passed() { "PASS" } else { "FAIL" }));
        out.push_str("config:\n");
        out.push_str(&self.config_json);
        out.push_str("\n\n");
        if !self.seeds.is_empty() {
            out.push_str("per-seed results:\n");
            for s in &self.seeds {
                out.push_str(&format!("  seed {}:", s.seed));
                for (name, value) in &s.metrics {
                    out.push_str(&format!(" {name}={value}"));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        if !self.aggregates.is_empty() {
            out.push_str("aggregates:\n");
            for (name, value) in &self.aggregates {
                out.push_str(&format!("  {name} = {value}\n"));
            }
            out.push('\n');
        }
        if self.checks.is_empty() {
            out.push_str("checks: none requested\n");
        } else {
            out.push_str("checks:\n");
            for c in &self.checks {
                out.push_str(&format!(
                    "  {}: {} ({})\n",
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.detail
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_with_finals(values: &[Option<f64>]) -> Trace {
        let mut t = Trace::new(&["a", "b"]);
        t.push_row(vec![Some(0.0), Some(0.0)]).unwrap();
        t.push_row(values.to_vec()).unwrap();
        t
    }

    #[test]
    fn single_trace_medians_equal_its_final_row() {
        let t = trace_with_finals(&[Some(3.5), Some(-1.0)]);
        let record = summarize(&[&t]).unwrap();
        assert_eq!(record.medians, vec![Some(3.5), Some(-1.0)]);
        assert_eq!(record.iqr_low, record.medians);
        assert_eq!(record.iqr_high, record.medians);
    }

    #[test]
    fn odd_count_median_is_the_middle_order_statistic() {
        let ts: Vec<Trace> = [5.0, 1.0, 3.0]
            .iter()
            .map(|&v| trace_with_finals(&[Some(v), None]))
            .collect();
        let refs: Vec<&Trace> = ts.iter().collect();
        let record = summarize(&refs).unwrap();
        assert_eq!(record.medians[0], Some(3.0));
        assert_eq!(record.medians[1], None);
    }

    #[test]
    fn constructed_fixture_matches_exactly() {
        let ts: Vec<Trace> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&v| trace_with_finals(&[Some(v), Some(10.0 * v)]))
            .collect();
        let refs: Vec<&Trace> = ts.iter().collect();
        let record = summarize(&refs).unwrap();
        assert_eq!(record.medians, vec![Some(2.5), Some(25.0)]);
        assert_eq!(record.iqr_low, vec![Some(1.75), Some(17.5)]);
        assert_eq!(record.iqr_high, vec![Some(3.25), Some(32.5)]);
    }

    #[test]
    fn schema_mismatch_fails() {
        let a = trace_with_finals(&[Some(1.0), Some(2.0)]);
        let mut b = Trace::new(&["a", "c"]);
        b.push_row(vec![Some(1.0), Some(2.0)]).unwrap();
        assert!(summarize(&[&a, &b]).is_err());
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn summary_csv_layout() {
        let t = trace_with_finals(&[Some(2.0), None]);
        let record = summarize(&[&t]).unwrap();
        let csv = summary_csv(&record, &["0".into()]).unwrap();
        assert_eq!(csv, "run,a,b\n0,2,\nmedian,2,\niqr_low,2,\niqr_high,2,\n");
        assert!(summary_csv(&record, &[]).is_err());
    }

    #[test]
    fn report_renders_status_and_checks() {
        let report = RunReport {
            experiment: "dln".into(),
            config_json: "{}".into(),
            seeds: vec![SeedSummary {
                seed: 0,
                metrics: vec![("final_loss".into(), 0.5)],
            }],
            aggregates: vec![("median_final_loss".into(), 0.5)],
            checks: vec![CheckOutcome {
                name: "contraction".into(),
                passed: false,
                detail: "violated at step 3".into(),
            }],
            duration: std::time::Duration::from_secs(1),
        };
        assert!(!report.passed());
        let text = report.render();
        assert!(text.contains("status: FAIL"));
        assert!(text.contains("seed 0: final_loss=0.5"));
        assert!(text.contains("contraction: FAIL (violated at step 3)"));
        assert!(!text.contains("duration"));
    }
}
