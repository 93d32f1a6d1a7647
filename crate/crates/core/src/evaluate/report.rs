//! Evaluation records and their JSON and terminal renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cv::{FoldStrategy, NoneMode, Params, Tuning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    /// `None` for the single record of a model scored on all links at once.
    pub fold: Option<usize>,
    pub params: Params,
    pub threshold: Option<f64>,
    pub train_links: usize,
    pub test_links: usize,
    pub recall_at_k: f64,
    pub mrr: f64,
    /// Mean selection score (MRR) of every grid entry, in grid order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selection_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub direction: String,
    pub tuning: Tuning,
    pub grid: Vec<Params>,
    pub records: Vec<FoldRecord>,
    pub recall_at_k: f64,
    pub mrr: f64,
}

impl ModelReport {
    pub fn new(model: String, direction: String, tuning: Tuning, grid: Vec<Params>, records: Vec<FoldRecord>) -> Self {
        let n = records.len().max(1) as f64;
        let recall_at_k = records.iter().map(|r| r.recall_at_k).sum::<f64>() / n;
        let mrr = records.iter().map(|r| r.mrr).sum::<f64>() / n;
        ModelReport {
            model,
            direction,
            tuning,
            grid,
            records,
            recall_at_k,
            mrr,
        }
    }

    /// Parameter set chosen in the most folds; ties go to the earliest in
    /// the grid.
    pub fn most_selected(&self) -> Params {
        let mut counts: Vec<usize> = vec![0; self.grid.len()];
        for r in &self.records {
            if let Some(i) = self.grid.iter().position(|g| *g == r.params) {
                counts[i] += 1;
            }
        }
        let best = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)));
        match best {
            Some((i, _)) => self.grid[i].clone(),
            None => self.records.first().map(|r| r.params.clone()).unwrap_or_default(),
        }
    }

    /// Threshold chosen in the most folds, for None-aware runs.
    pub fn most_selected_threshold(&self) -> Option<f64> {
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for t in self.records.iter().filter_map(|r| r.threshold) {
            *counts.entry(t.to_bits()).or_default() += 1;
        }
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(f64::from_bits(b.0).total_cmp(&f64::from_bits(a.0))))
            .map(|(bits, _)| f64::from_bits(bits))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub folds: usize,
    pub inner_folds: usize,
    pub k: usize,
    pub none_mode: NoneMode,
    pub strategy: FoldStrategy,
    pub models: Vec<ModelReport>,
    /// Free-form fingerprint entries added by the caller (input digests, seeds).
    #[serde(default)]
    pub fingerprint: BTreeMap<String, String>,
}

impl EvaluationReport {
    pub fn merge(&mut self, other: EvaluationReport) {
        self.models.extend(other.models);
        self.fingerprint.extend(other.fingerprint);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    pub fn render_table(&self) -> String {
        let header = [
            "model",
            "direction",
            &format!("recall@{}", self.k),
            "MRR",
            "records",
            "selected",
        ];
        let rows: Vec<[String; 6]> = self
            .models
            .iter()
            .map(|m| {
                let params = m.most_selected();
                let mut selected: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                if let Some(t) = m.most_selected_threshold() {
                    selected.push(format!("threshold={t}"));
                }
                [
                    m.model.clone(),
                    m.direction.clone(),
                    format!("{:.4}", m.recall_at_k),
                    format!("{:.4}", m.mrr),
                    m.records.len().to_string(),
                    if selected.is_empty() {
                        "-".into()
                    } else {
                        selected.join(" ")
                    },
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            writeln!(out, "{}", padded.join("  ").trim_end()).unwrap();
        };
        line(&mut out, &header);
        line(
            &mut out,
            &widths
                .map(|w| "-".repeat(w))
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>(),
        );
        for row in &rows {
            line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        writeln!(
            out,
            "\n{} folds, {} inner folds, seed {}, None links: {:?}, split by {:?}",
            self.folds, self.inner_folds, self.seed, self.none_mode, self.strategy
        )
        .unwrap();
        out
    }
}
