//! Evaluation reports: a JSON document with per-user ranks and a one-row
//! CSV for plotting.

use std::collections::BTreeMap;
use std::path::Path;

use rankdistill_core::eval::{hit_at_n, metric_labels, mrr_at_n, paired_ttest, Metric, MetricReport};
use rankdistill_core::InteractionDataset;
use serde::{Deserialize, Serialize};

use crate::error::{CliResult, DataContext, Failure};

pub const FORMAT: &str = "rankdistill-report/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRank {
    pub user: String,
    /// 0-based rank of the held-out item among the user's candidates.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub against: String,
    pub metric: String,
    pub mean_diff: f64,
    /// Absent when every paired difference is the same nonzero value.
    pub t: Option<f64>,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub method: String,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub split_fingerprint: String,
    pub cutoffs: Vec<usize>,
    /// Mean of each metric over users, keyed `H@N` / `M@N`.
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrepancy_user: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrepancy_item: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<Comparison>,
    pub per_user: Vec<UserRank>,
}

impl Report {
    pub fn new(
        method: &str,
        seed: u64,
        dataset: &InteractionDataset,
        dataset_fingerprint: String,
        split_fingerprint: String,
        metrics: &MetricReport,
    ) -> Self {
        let users = dataset.user_ids();
        Report {
            format: FORMAT.into(),
            method: method.into(),
            seed,
            dataset_fingerprint,
            split_fingerprint,
            cutoffs: metrics.ns.clone(),
            metrics: metrics.metrics().into_iter().map(|m| (m.to_string(), metrics.mean(m))).collect(),
            discrepancy_user: None,
            discrepancy_item: None,
            comparisons: Vec::new(),
            per_user: metrics
                .per_user
                .iter()
                .map(|u| UserRank { user: users.raw(u.user).unwrap_or_default().to_string(), rank: u.rank })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).data_ctx(format!("reading report {}", path.display()))?;
        let r: Report = serde_json::from_str(&text).data_ctx(format!("parsing report {}", path.display()))?;
        if r.format != FORMAT {
            return Err(Failure::data(format!("{}: unsupported report format `{}`", path.display(), r.format)));
        }
        Ok(r)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Per-user values of `metric`, in report order.
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.per_user
            .iter()
            .map(|u| match metric {
                Metric::Hit(n) => hit_at_n(u.rank, n),
                Metric::Mrr(n) => mrr_at_n(u.rank, n),
            })
            .collect()
    }

    /// Paired t-test of `self − other` on `metric` over the same users.
    pub fn compare(&self, other: &Report, label: &str, metric: Metric) -> CliResult<Comparison> {
        if self.split_fingerprint != other.split_fingerprint || self.dataset_fingerprint != other.dataset_fingerprint {
            return Err(Failure::data(format!(
                "cannot compare reports from different splits ({} vs {})",
                self.split_fingerprint, other.split_fingerprint
            )));
        }
        let theirs: BTreeMap<&str, usize> = other.per_user.iter().map(|u| (u.user.as_str(), u.rank)).collect();
        if theirs.len() != self.per_user.len() || self.per_user.iter().any(|u| !theirs.contains_key(u.user.as_str())) {
            return Err(Failure::data("reports cover different users"));
        }
        let aligned = Report {
            per_user: self
                .per_user
                .iter()
                .map(|u| UserRank { user: u.user.clone(), rank: theirs[u.user.as_str()] })
                .collect(),
            ..other.clone()
        };
        let t = paired_ttest(&self.values(metric), &aligned.values(metric))?;
        Ok(Comparison {
            against: label.into(),
            metric: metric.to_string(),
            mean_diff: t.mean_diff,
            t: t.t.is_finite().then_some(t.t),
            df: t.df,
            p_value: t.p_value,
        })
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["method".to_string(), "seed".into()];
        h.extend(metric_labels(&self.cutoffs));
        h.extend(["discrepancy_user".into(), "discrepancy_item".into(), "p_value".into()]);
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = vec![self.method.clone(), self.seed.to_string()];
        row.extend(
            metric_labels(&self.cutoffs).iter().map(|k| self.metrics.get(k).map_or(String::new(), f64::to_string)),
        );
        row.extend([
            opt(self.discrepancy_user),
            opt(self.discrepancy_item),
            opt(self.comparisons.first().map(|c| c.p_value)),
        ]);
        row
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.csv_header()).expect("in-memory write");
        w.write_record(self.csv_row()).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(split: &str, ranks: &[usize]) -> Report {
        Report {
            format: FORMAT.into(),
            method: "x".into(),
            seed: 0,
            dataset_fingerprint: "d".into(),
            split_fingerprint: split.into(),
            cutoffs: vec![5, 10],
            metrics: BTreeMap::new(),
            discrepancy_user: None,
            discrepancy_item: None,
            comparisons: vec![],
            per_user: ranks.iter().enumerate().map(|(k, &rank)| UserRank { user: format!("u{k}"), rank }).collect(),
        }
    }

    #[test]
    fn different_splits_cannot_be_compared() {
        let err = report("a", &[0, 1]).compare(&report("b", &[0, 1]), "other", Metric::Hit(5)).unwrap_err();
        assert!(err.to_string().contains("different splits"), "{err}");
    }

    #[test]
    fn identical_reports_compare_to_p_one() {
        let r = report("a", &[0, 3, 7, 12]);
        let c = r.compare(&r, "self", Metric::Mrr(10)).unwrap();
        assert_eq!((c.t, c.p_value), (Some(0.0), 1.0));
    }

    #[test]
    fn csv_columns_follow_cutoffs() {
        let r = report("a", &[0]);
        assert_eq!(
            r.csv_header(),
            ["method", "seed", "H@5", "M@5", "H@10", "M@10", "discrepancy_user", "discrepancy_item", "p_value"]
        );
    }
}
