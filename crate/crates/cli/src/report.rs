//! Table-shaped arbitration reports. Numbers are written unrounded.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use argus_core::arbitration::{ArbitrationSummary, RandomArbitratorStats};
use argus_core::DetectorMetrics;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub method: String,
    /// Error percent keyed by k.
    pub error_pct: BTreeMap<usize, f64>,
    pub review_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub num_records: usize,
    pub ks: Vec<usize>,
    pub rows: Vec<Table1Row>,
    /// Monte Carlo details behind the random_arbitrator row.
    pub random_arbitrator: Vec<RandomArbitratorStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2 {
    pub rows: Vec<DetectorMetrics>,
}

impl Table1 {
    pub fn from_summary(summary: &ArbitrationSummary, ks: &[usize]) -> Self {
        Table1 {
            num_records: summary.num_records,
            ks: ks.to_vec(),
            rows: summary
                .methods
                .iter()
                .map(|m| Table1Row {
                    method: m.method.as_str().to_string(),
                    error_pct: m.error_pct.clone(),
                    review_fraction: m.review_fraction,
                })
                .collect(),
            random_arbitrator: summary.random.clone(),
        }
    }

    pub fn row(&self, method: &str) -> Option<&Table1Row> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method");
        for k in &self.ks {
            write!(out, ",top{k}_error_pct").unwrap();
        }
        out.push_str(",review_fraction\n");
        for r in &self.rows {
            out.push_str(&r.method);
            for k in &self.ks {
                write!(out, ",{}", r.error_pct[k]).unwrap();
            }
            writeln!(out, ",{}", r.review_fraction).unwrap();
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

impl Table2 {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,precision_pct,recall_pct,true_positives,disagreements,failures\n");
        for m in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                m.k,
                opt(m.precision_pct),
                opt(m.recall_pct),
                m.true_positives,
                m.disagreements,
                m.failures
            )
            .unwrap();
        }
        out
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
