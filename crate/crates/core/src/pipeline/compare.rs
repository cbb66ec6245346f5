use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::Representation;
use super::run::RunManifest;
use super::PipelineError;
use crate::cluster::Algorithm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub encoder: String,
    pub representation: Representation,
    pub clusterer: Algorithm,
    pub max_n: usize,
    pub k: Option<usize>,
    pub micro_f1: f64,
}

/// Micro-F1 of runs over one split, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub split_hash: String,
    pub rows: Vec<ComparisonRow>,
}

/// Ranks completed runs. All manifests must share a split, since scores on
/// different test sets are not comparable.
pub fn compare_runs(manifests: &[RunManifest]) -> Result<Comparison, PipelineError> {
    if manifests.len() < 2 {
        return Err(PipelineError::Compare(format!("need at least 2 runs, got {}", manifests.len())));
    }
    let split_hash = manifests[0].split_hash.clone();
    if let Some(other) = manifests.iter().find(|m| m.split_hash != split_hash) {
        return Err(PipelineError::Compare(format!(
            "runs `{}` and `{}` use different train/test splits",
            manifests[0].label(),
            other.label()
        )));
    }
    let mut rows = manifests
        .iter()
        .map(|m| {
            let micro_f1 = m
                .micro_f1
                .ok_or_else(|| PipelineError::Compare(format!("run `{}` did not reach evaluation", m.label())))?;
            Ok(ComparisonRow {
                label: m.label(),
                encoder: m.labels.encoder.clone(),
                representation: m.labels.representation,
                clusterer: m.labels.clusterer,
                max_n: m.labels.max_n,
                k: m.labels.k,
                micro_f1,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    rows.sort_by(|a, b| b.micro_f1.total_cmp(&a.micro_f1).then_with(|| a.label.cmp(&b.label)));
    Ok(Comparison { split_hash, rows })
}

impl Comparison {
    fn column(&self, row: &ComparisonRow) -> String {
        let mixed = self.rows.iter().map(|r| r.representation).collect::<BTreeSet<_>>().len() > 1;
        if mixed { format!("{}/{}", row.encoder, row.representation) } else { row.encoder.clone() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,label,encoder,representation,clusterer,max_n,k,micro_f1\n");
        for (i, r) in self.rows.iter().enumerate() {
            let k = r.k.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.4}",
                i + 1,
                r.label,
                r.encoder,
                r.representation,
                r.clusterer,
                r.max_n,
                k,
                r.micro_f1
            );
        }
        out
    }

    /// The ranked list followed by one block per clusterer with datasets
    /// (max_n) as rows and encoders as columns.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let w = self.rows.iter().map(|r| r.label.len()).chain([3]).max().unwrap_or(3);
        let _ = writeln!(out, "{:>4}  {:<w$}  {:>5}  {:>8}", "rank", "run", "k", "micro_f1");
        for (i, r) in self.rows.iter().enumerate() {
            let k = r.k.map(|k| k.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "{:>4}  {:<w$}  {:>5}  {:>8.4}", i + 1, r.label, k, r.micro_f1);
        }
        let columns: BTreeSet<String> = self.rows.iter().map(|r| self.column(r)).collect();
        let clusterers: BTreeSet<Algorithm> = self.rows.iter().map(|r| r.clusterer).collect();
        for clusterer in [Algorithm::Kmeans, Algorithm::Hdbscan].into_iter().filter(|c| clusterers.contains(c)) {
            let mut cells: BTreeMap<(usize, &str), f64> = BTreeMap::new();
            let names: Vec<String> = self.rows.iter().map(|r| self.column(r)).collect();
            for (r, name) in self.rows.iter().zip(&names) {
                if r.clusterer == clusterer {
                    cells.entry((r.max_n, name.as_str())).or_insert(r.micro_f1);
                }
            }
            let datasets: BTreeSet<usize> = cells.keys().map(|(n, _)| *n).collect();
            let _ = write!(out, "\n{}\n{:<7}", clusterer.to_string().to_uppercase(), "max_n");
            for c in &columns {
                let _ = write!(out, "  {c:>10}");
            }
            out.push('\n');
            for n in datasets {
                let _ = write!(out, "{n:<7}");
                for c in &columns {
                    match cells.get(&(n, c.as_str())) {
                        Some(v) => {
                            let _ = write!(out, "  {:>w$.4}", v, w = c.len().max(10));
                        }
                        None => {
                            let _ = write!(out, "  {:>w$}", "-", w = c.len().max(10));
                        }
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}
