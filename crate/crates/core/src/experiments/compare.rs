use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    MissingInA,
    MissingInB,
}

/// Adapter `b` measured against adapter `a` on one condition.
///
/// Deltas are `b - a`; a negative `delta_hm_m` means `b` kept the rates
/// closer to their base values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub adapter_a: String,
    pub adapter_b: String,
    pub condition: String,
    pub status: RowStatus,
    pub hm_m_a: Option<f64>,
    pub hm_m_b: Option<f64>,
    pub delta_hm_m: Option<f64>,
    pub delta_hm_std: Option<f64>,
    /// `"a"`, `"b"` or `"tie"` by `delta_hm_m`.
    pub favors: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.status != RowStatus::Ok)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "adapter_a",
            "adapter_b",
            "condition",
            "status",
            "hm_m_a",
            "hm_m_b",
            "delta_hm_m",
            "delta_hm_std",
            "favors",
        ])?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            let status = match r.status {
                RowStatus::Ok => "ok",
                RowStatus::MissingInA => "missing_in_a",
                RowStatus::MissingInB => "missing_in_b",
            };
            wtr.write_record([
                r.adapter_a.as_str(),
                r.adapter_b.as_str(),
                r.condition.as_str(),
                status,
                &opt(r.hm_m_a),
                &opt(r.hm_m_b),
                &opt(r.delta_hm_m),
                &opt(r.delta_hm_std),
                r.favors.as_deref().unwrap_or(""),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Per-condition HM deltas of `b` relative to `a`.
///
/// Conditions are listed in `a`'s order followed by any found only in `b`.
/// A condition missing from either side yields a row with an error status
/// and no numbers instead of failing the whole comparison.
pub fn compare(a: &MetricsReport, b: &MetricsReport) -> ComparisonTable {
    let row = |condition: &str, status, hm_a: Option<(f64, f64)>, hm_b: Option<(f64, f64)>| {
        let delta = hm_a
            .zip(hm_b)
            .map(|((ma, sa), (mb, sb))| (mb - ma, sb - sa));
        ComparisonRow {
            adapter_a: a.adapter.clone(),
            adapter_b: b.adapter.clone(),
            condition: condition.to_string(),
            status,
            hm_m_a: hm_a.map(|x| x.0),
            hm_m_b: hm_b.map(|x| x.0),
            delta_hm_m: delta.map(|d| d.0),
            delta_hm_std: delta.map(|d| d.1),
            favors: delta.map(|(dm, _)| {
                if dm < 0.0 {
                    "b".to_string()
                } else if dm > 0.0 {
                    "a".to_string()
                } else {
                    "tie".to_string()
                }
            }),
        }
    };

    let mut rows = Vec::new();
    for ca in &a.conditions {
        let hm_a = Some((ca.hm_m, ca.hm_std));
        rows.push(match b.condition(&ca.condition) {
            Some(cb) => row(
                &ca.condition,
                RowStatus::Ok,
                hm_a,
                Some((cb.hm_m, cb.hm_std)),
            ),
            None => row(&ca.condition, RowStatus::MissingInB, None, None),
        });
    }
    for cb in &b.conditions {
        if a.condition(&cb.condition).is_none() {
            rows.push(row(&cb.condition, RowStatus::MissingInA, None, None));
        }
    }
    ComparisonTable { rows }
}
