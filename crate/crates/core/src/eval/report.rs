//! Aggregate report and its text / JSON / CSV renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    convergence_buckets, improvement, mean_relative_error, per_domain_aggregate, Bucket, BucketTable,
    Paradigm, PredictionRecord,
};
use crate::domains::DomainId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub domain: DomainId,
    /// Distinct problems seen in this domain.
    pub n: usize,
    #[serde(with = "crate::nan_as_null")]
    pub direct_mre: f64,
    #[serde(with = "crate::nan_as_null")]
    pub assisted_mre: f64,
    pub improvement_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    #[serde(with = "crate::nan_as_null")]
    pub direct_mre: f64,
    #[serde(with = "crate::nan_as_null")]
    pub assisted_mre: f64,
    pub improvement_percent: Option<f64>,
    pub buckets: BucketTable,
}

/// Record tallies, including how many the NaN filter dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecordCounts {
    pub direct: usize,
    pub assisted: usize,
    pub direct_unscorable: usize,
    pub assisted_unscorable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Pooled over every scorable direct record.
    #[serde(with = "crate::nan_as_null")]
    pub direct_mre: f64,
    #[serde(with = "crate::nan_as_null")]
    pub assisted_mre: f64,
    pub improvement_percent: Option<f64>,
    pub models: Vec<ModelRow>,
    pub domains: Vec<DomainRow>,
    pub buckets: BucketTable,
    pub records: RecordCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}` (expected text, json or csv)")),
        }
    }
}

fn paradigm_mre(records: &[&PredictionRecord], paradigm: Paradigm) -> f64 {
    mean_relative_error(records.iter().copied().filter(|r| r.paradigm == paradigm))
}

fn finite_improvement(direct: f64, assisted: f64) -> Option<f64> {
    improvement(direct, assisted).ok().filter(|v| v.is_finite())
}

impl MetricsReport {
    pub fn from_records(records: &[PredictionRecord]) -> MetricsReport {
        let all: Vec<&PredictionRecord> = records.iter().collect();
        let mut by_model: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
        for r in records {
            by_model.entry(r.model.as_str()).or_default().push(r);
        }
        let models = by_model
            .into_iter()
            .map(|(model, rs)| {
                let direct = paradigm_mre(&rs, Paradigm::Direct);
                let assisted = paradigm_mre(&rs, Paradigm::Assisted);
                ModelRow {
                    model: if model.is_empty() { "unnamed".into() } else { model.into() },
                    direct_mre: direct,
                    assisted_mre: assisted,
                    improvement_percent: finite_improvement(direct, assisted),
                    buckets: convergence_buckets(rs.iter().copied()),
                }
            })
            .collect();

        let mut counts = RecordCounts::default();
        for r in records {
            let (n, bad) = match r.paradigm {
                Paradigm::Direct => (&mut counts.direct, &mut counts.direct_unscorable),
                Paradigm::Assisted => (&mut counts.assisted, &mut counts.assisted_unscorable),
            };
            *n += 1;
            if !r.is_scorable() {
                *bad += 1;
            }
        }

        let direct = paradigm_mre(&all, Paradigm::Direct);
        let assisted = paradigm_mre(&all, Paradigm::Assisted);
        MetricsReport {
            direct_mre: direct,
            assisted_mre: assisted,
            improvement_percent: finite_improvement(direct, assisted),
            models,
            domains: per_domain_aggregate(records),
            buckets: convergence_buckets(records),
            records: counts,
        }
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Text => self.to_text(),
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Three aligned tables: per model, per domain, convergence.
    pub fn to_text(&self) -> String {
        let mut out = String::new();

        let mut rows = vec![row(["Model", "Direct MRE", "Assisted MRE", "Improvement"])];
        for m in &self.models {
            rows.push(row([&m.model, &mre(m.direct_mre), &mre(m.assisted_mre), &pct(m.improvement_percent)]));
        }
        rows.push(row(["All", &mre(self.direct_mre), &mre(self.assisted_mre), &pct(self.improvement_percent)]));
        table(&mut out, "Overall performance", &rows);

        let mut rows = vec![row(["Domain", "N", "Direct MRE", "Assisted MRE", "Improvement"])];
        for d in &self.domains {
            rows.push(row([
                d.domain.title(),
                &d.n.to_string(),
                &mre(d.direct_mre),
                &mre(d.assisted_mre),
                &pct(d.improvement_percent),
            ]));
        }
        table(&mut out, "Per-domain performance", &rows);

        let mut rows = vec![{
            let mut h = vec!["Model".to_string()];
            h.extend(Bucket::ALL.iter().map(|b| b.title().to_string()));
            h
        }];
        let bucket_cells = |name: &str, t: &BucketTable| {
            let mut r = vec![name.to_string()];
            r.extend(Bucket::ALL.iter().map(|&b| format!("{} ({:.0}%)", t.count(b), t.percent(b))));
            r
        };
        for m in self.models.iter().filter(|m| m.buckets.total > 0) {
            rows.push(bucket_cells(&m.model, &m.buckets));
        }
        rows.push(bucket_cells("All", &self.buckets));
        table(&mut out, "Convergence", &rows);

        let c = &self.records;
        let _ = writeln!(
            out,
            "records: {} direct ({} unscorable), {} assisted ({} unscorable); {} hit the iteration cap",
            c.direct, c.direct_unscorable, c.assisted, c.assisted_unscorable, self.buckets.hit_iteration_cap
        );
        if !self.buckets.failure_reasons.is_empty() {
            let reasons: Vec<String> =
                self.buckets.failure_reasons.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "failures: {}", reasons.join(", "));
        }
        out
    }

    /// Flat rows for plotting tools, one per model, domain and the overall total.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("section,name,n,direct_mre,assisted_mre,improvement_percent,fast,slow,very_slow,failed\n");
        let num = |v: f64| if v.is_finite() { format!("{v}") } else { String::new() };
        let opt = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
        let buckets = |t: &BucketTable| format!("{},{},{},{}", t.fast, t.slow, t.very_slow, t.failed);
        for m in &self.models {
            let _ = writeln!(
                out,
                "model,{},{},{},{},{},{}",
                csv_field(&m.model),
                m.buckets.total,
                num(m.direct_mre),
                num(m.assisted_mre),
                opt(m.improvement_percent),
                buckets(&m.buckets)
            );
        }
        for d in &self.domains {
            let _ = writeln!(
                out,
                "domain,{},{},{},{},{},,,,",
                d.domain.as_str(),
                d.n,
                num(d.direct_mre),
                num(d.assisted_mre),
                opt(d.improvement_percent)
            );
        }
        let _ = writeln!(
            out,
            "overall,all,{},{},{},{},{}",
            self.records.direct.max(self.records.assisted),
            num(self.direct_mre),
            num(self.assisted_mre),
            opt(self.improvement_percent),
            buckets(&self.buckets)
        );
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn mre(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "-".into()
    }
}

fn pct(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.1}%")).unwrap_or_else(|| "-".into())
}

fn row<const N: usize>(cells: [&str; N]) -> Vec<String> {
    cells.iter().map(|c| c.to_string()).collect()
}

/// First column left-aligned, the rest right-aligned.
fn table(out: &mut String, title: &str, rows: &[Vec<String>]) {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let _ = writeln!(out, "{title}");
    for (i, r) in rows.iter().enumerate() {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        let _ = writeln!(out, "{}", line.trim_end());
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::RecordStatus;

    fn sample() -> Vec<PredictionRecord> {
        vec![
            PredictionRecord::direct(1, DomainId::FluidMechanics, 1.2, 1.0).with_model("a"),
            PredictionRecord::direct(2, DomainId::HeatTransfer, f64::NAN, 3.0).with_model("a"),
            PredictionRecord::assisted(1, DomainId::FluidMechanics, 1.0, 1.0, 4, RecordStatus::Converged).with_model("a"),
            PredictionRecord::assisted(2, DomainId::HeatTransfer, f64::NAN, 3.0, 1, RecordStatus::DerivativeVanished)
                .with_model("a"),
        ]
    }

    #[test]
    fn report_totals() {
        let r = MetricsReport::from_records(&sample());
        assert!((r.direct_mre - 0.2).abs() < 1e-12);
        assert_eq!(r.assisted_mre, 0.0);
        assert_eq!(r.improvement_percent, Some(100.0));
        assert_eq!(r.records.direct_unscorable, 1);
        assert_eq!(r.records.assisted_unscorable, 1);
        assert_eq!(r.domains.iter().map(|d| d.n).sum::<usize>(), 2);
        assert_eq!(r.buckets.failed, 1);
        let total: f64 = Bucket::ALL.iter().map(|&b| r.buckets.percent(b)).sum();
        assert!((total - 100.0).abs() < 0.1);
    }

    #[test]
    fn renderings() {
        let r = MetricsReport::from_records(&sample());
        let text = r.to_text();
        assert!(text.contains("Fluid Mechanics"));
        assert!(text.contains("0.200"));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["models"][0]["model"], "a");
        // heat has no scorable direct record
        assert_eq!(json["domains"][1]["direct_mre"], serde_json::Value::Null);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 1 + 1 + 2 + 1);
        assert!(csv.lines().all(|l| l.split(',').count() == 10));
    }

    #[test]
    fn empty_report() {
        let r = MetricsReport::from_records(&[]);
        assert!(r.direct_mre.is_nan());
        assert!(r.improvement_percent.is_none());
        assert!(r.to_text().contains("All"));
    }
}
