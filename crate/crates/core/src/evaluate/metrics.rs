//! Ranking metrics, the None threshold, and rater agreement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{EquivalenceSet, Target};
use crate::error::{Error, Result};
use crate::translate::RankedPredictions;

fn check_truth(truth: &EquivalenceSet) -> Result<()> {
    if truth.is_empty() {
        Err(Error::Data("evaluation needs at least one ground-truth link".into()))
    } else {
        Ok(())
    }
}

fn top_is_none(predictions: &RankedPredictions, src: &str) -> bool {
    predictions.top(src).is_some_and(|p| p.dst == Target::None)
}

/// Share of truth links found in the top `k`. A link to None is a hit when
/// the source's top prediction is None. Sources absent from the predictions
/// contribute only misses.
pub fn recall_at_k(predictions: &RankedPredictions, truth: &EquivalenceSet, k: usize) -> Result<f64> {
    check_truth(truth)?;
    let mut hits = 0usize;
    let mut total = 0usize;
    for (src, dst) in &truth.pairs {
        total += 1;
        if let Some(preds) = predictions.by_source.get(src) {
            if preds.iter().take(k).any(|p| p.dst.as_skill() == Some(dst)) {
                hits += 1;
            }
        }
    }
    for src in &truth.none_src {
        total += 1;
        if top_is_none(predictions, src) {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Mean over truth-bearing sources of 1 / rank of the first relevant
/// destination, 0 when none appears. Sources whose truth is None score 1
/// exactly when their top prediction is None.
pub fn mean_reciprocal_rank(predictions: &RankedPredictions, truth: &EquivalenceSet) -> Result<f64> {
    check_truth(truth)?;
    let partners = truth.partners();
    let mut sum = 0.0;
    for (src, relevant) in &partners {
        if let Some(preds) = predictions.by_source.get(*src) {
            if let Some(rank) = preds
                .iter()
                .position(|p| p.dst.as_skill().is_some_and(|d| relevant.contains(d)))
            {
                sum += 1.0 / (rank + 1) as f64;
            }
        }
    }
    for src in &truth.none_src {
        if top_is_none(predictions, src) {
            sum += 1.0;
        }
    }
    Ok(sum / (partners.len() + truth.none_src.len()) as f64)
}

/// Replaces every prediction with similarity below `threshold` by None,
/// keeping its position and similarity.
pub fn apply_none_threshold(predictions: &RankedPredictions, threshold: f64) -> RankedPredictions {
    let mut out = predictions.clone();
    for p in out.by_source.values_mut().flatten() {
        if p.similarity < threshold {
            p.dst = Target::None;
        }
    }
    out
}

/// Per item, how many raters chose each category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTable {
    pub items: Vec<(String, String)>,
    pub ratings: Vec<Vec<u32>>,
}

impl AnnotationTable {
    /// Builds a two-category (equivalent / not) table from per-rater labels.
    pub fn from_binary_labels(labels: &BTreeMap<(String, String), Vec<bool>>) -> AnnotationTable {
        let mut table = AnnotationTable {
            items: Vec::new(),
            ratings: Vec::new(),
        };
        for (item, votes) in labels {
            let yes = votes.iter().filter(|&&v| v).count() as u32;
            table.items.push(item.clone());
            table.ratings.push(vec![yes, votes.len() as u32 - yes]);
        }
        table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kappa {
    Value(f64),
    /// Every rating fell in one category, so chance agreement is 1.
    Degenerate,
}

pub fn fleiss_kappa(table: &AnnotationTable) -> Result<Kappa> {
    let rows = &table.ratings;
    if rows.is_empty() {
        return Err(Error::Data("Fleiss' kappa needs at least one item".into()));
    }
    let categories = rows[0].len();
    let raters: u32 = rows[0].iter().sum();
    if raters < 2 {
        return Err(Error::Data("Fleiss' kappa needs at least two raters".into()));
    }
    if let Some(i) = rows
        .iter()
        .position(|r| r.len() != categories || r.iter().sum::<u32>() != raters)
    {
        return Err(Error::Data(format!(
            "item {i} does not have {raters} ratings over {categories} categories"
        )));
    }
    let n = raters as f64;
    let items = rows.len() as f64;
    let p_bar = rows
        .iter()
        .map(|r| (r.iter().map(|&c| (c * c) as f64).sum::<f64>() - n) / (n * (n - 1.0)))
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..categories)
        .map(|j| {
            let p = rows.iter().map(|r| r[j] as f64).sum::<f64>() / (items * n);
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Ok(Kappa::Degenerate);
    }
    Ok(Kappa::Value((p_bar - p_e) / (1.0 - p_e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::Prediction;
    use proptest::prelude::*;

    fn preds(rows: &[(&str, &[(&str, f64)])]) -> RankedPredictions {
        RankedPredictions {
            k: None,
            by_source: rows
                .iter()
                .map(|(s, list)| {
                    let list = list
                        .iter()
                        .map(|(d, sim)| Prediction {
                            dst: Target::Skill(d.to_string()),
                            similarity: *sim,
                        })
                        .collect();
                    (s.to_string(), list)
                })
                .collect(),
            ..Default::default()
        }
    }

    fn truth(pairs: &[(&str, &str)], none: &[&str]) -> EquivalenceSet {
        let mut t = EquivalenceSet::default();
        for (s, d) in pairs {
            t.insert_pair(s, d).unwrap();
        }
        for s in none {
            t.mark_none_src(s).unwrap();
        }
        t
    }

    const RANKING: &[(&str, f64)] = &[
        ("a", 0.9),
        ("b", 0.8),
        ("c", 0.7),
        ("d", 0.6),
        ("e", 0.5),
        ("f", 0.4),
        ("g", 0.3),
    ];

    #[test]
    fn recall_counts() {
        let p = preds(&[("s", RANKING)]);
        assert_eq!(recall_at_k(&p, &truth(&[("s", "a"), ("s", "e")], &[]), 5).unwrap(), 1.0);
        assert_eq!(recall_at_k(&p, &truth(&[("s", "f"), ("s", "g")], &[]), 5).unwrap(), 0.0);
        let r = recall_at_k(&p, &truth(&[("s", "a"), ("s", "c"), ("s", "g")], &[]), 5).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        // unpredicted source: its pair is a miss
        let r = recall_at_k(&p, &truth(&[("s", "a"), ("x", "a")], &[]), 5).unwrap();
        assert_eq!(r, 0.5);
        assert!(recall_at_k(&p, &EquivalenceSet::default(), 5).is_err());
    }

    #[test]
    fn mrr_examples() {
        let p = preds(&[("s1", RANKING), ("s2", RANKING), ("s3", RANKING)]);
        let t = truth(&[("s1", "a"), ("s2", "b"), ("s2", "g"), ("s3", "d")], &[]);
        assert!((mean_reciprocal_rank(&p, &t).unwrap() - 1.75 / 3.0).abs() < 1e-15);
        let ten: Vec<(String, f64)> = (0..10).map(|i| (format!("d{i}"), 1.0 - i as f64 / 10.0)).collect();
        let ten_ref: Vec<(&str, f64)> = ten.iter().map(|(a, b)| (a.as_str(), *b)).collect();
        let p = preds(&[("s", &ten_ref)]);
        assert!((mean_reciprocal_rank(&p, &truth(&[("s", "d9")], &[])).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(mean_reciprocal_rank(&p, &truth(&[("s", "d0")], &[])).unwrap(), 1.0);
        // relevant destination never ranked (excluded zero vector)
        assert_eq!(mean_reciprocal_rank(&p, &truth(&[("s", "zz")], &[])).unwrap(), 0.0);
    }

    #[test]
    fn threshold_examples() {
        let p = preds(&[("s", &[("a", 0.9), ("b", 0.4)])]);
        let t = apply_none_threshold(&p, 0.5);
        assert_eq!(t.by_source["s"][0].dst, Target::Skill("a".into()));
        assert_eq!(t.by_source["s"][1].dst, Target::None);
        assert_eq!(apply_none_threshold(&p, -1.0), p);
        assert!(apply_none_threshold(&p, 1.0).by_source["s"]
            .iter()
            .all(|x| x.dst == Target::None));
    }

    #[test]
    fn none_links_scored_by_top_prediction() {
        let p = apply_none_threshold(&preds(&[("s", &[("a", 0.3)]), ("u", &[("a", 0.8)])]), 0.5);
        let t = truth(&[("u", "a")], &["s"]);
        assert_eq!(recall_at_k(&p, &t, 5).unwrap(), 1.0);
        assert_eq!(mean_reciprocal_rank(&p, &t).unwrap(), 1.0);
        // without the threshold the None source is a miss
        let raw = preds(&[("s", &[("a", 0.3)]), ("u", &[("a", 0.8)])]);
        assert_eq!(recall_at_k(&raw, &t, 5).unwrap(), 0.5);
    }

    /// Textbook evaluation written out per item and category.
    fn kappa_by_hand(rows: &[[u32; 2]]) -> f64 {
        let n = rows[0][0] + rows[0][1];
        let mut p_i = Vec::new();
        for r in rows {
            let mut agree = 0;
            for &c in r {
                agree += c * (c.saturating_sub(1));
            }
            p_i.push(agree as f64 / (n * (n - 1)) as f64);
        }
        let p_bar = p_i.iter().sum::<f64>() / rows.len() as f64;
        let total = (rows.len() as u32 * n) as f64;
        let p0 = rows.iter().map(|r| r[0]).sum::<u32>() as f64 / total;
        let p1 = rows.iter().map(|r| r[1]).sum::<u32>() as f64 / total;
        let pe = p0 * p0 + p1 * p1;
        (p_bar - pe) / (1.0 - pe)
    }

    fn table(rows: &[[u32; 2]]) -> AnnotationTable {
        AnnotationTable {
            items: (0..rows.len()).map(|i| (format!("a{i}"), format!("b{i}"))).collect(),
            ratings: rows.iter().map(|r| r.to_vec()).collect(),
        }
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(fleiss_kappa(&table(&[[3, 0], [0, 3]])).unwrap(), Kappa::Value(1.0));
        let rows = [[2, 1], [1, 2], [3, 0], [0, 3]];
        let Kappa::Value(k) = fleiss_kappa(&table(&rows)).unwrap() else {
            panic!()
        };
        assert!((k - kappa_by_hand(&rows)).abs() < 1e-15);
        // P̄ = 2/3, P̄e = 1/2
        assert!((k - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(fleiss_kappa(&table(&[[3, 0], [3, 0]])).unwrap(), Kappa::Degenerate);
        assert!(fleiss_kappa(&table(&[[1, 0]])).is_err());
        assert!(fleiss_kappa(&table(&[[2, 1], [1, 1]])).is_err());
    }

    #[test]
    fn kappa_from_labels() {
        let mut labels = BTreeMap::new();
        labels.insert(("x".to_string(), "y".to_string()), vec![true, true, false]);
        let t = AnnotationTable::from_binary_labels(&labels);
        assert_eq!(t.ratings, vec![vec![2, 1]]);
    }

    proptest! {
        #[test]
        fn recall_monotone_in_k(sims in prop::collection::vec(-1.0f64..1.0, 8), targets in prop::collection::btree_set(0usize..8, 1..4)) {
            let names: Vec<String> = (0..8).map(|i| format!("d{i}")).collect();
            let mut list: Vec<(&str, f64)> = names.iter().map(String::as_str).zip(sims).collect();
            list.sort_by(|a, b| b.1.total_cmp(&a.1));
            let p = preds(&[("s", &list)]);
            let pairs: Vec<(&str, &str)> = targets.iter().map(|&i| ("s", names[i].as_str())).collect();
            let t = truth(&pairs, &[]);
            let mut last = 0.0;
            for k in 1..=8 {
                let r = recall_at_k(&p, &t, k).unwrap();
                prop_assert!(r >= last && (0.0..=1.0).contains(&r));
                last = r;
            }
            prop_assert_eq!(last, 1.0);
            let mrr = mean_reciprocal_rank(&p, &t).unwrap();
            let first_hit = p.by_source["s"][0].dst.as_skill().map(|d| targets.iter().any(|&i| names[i] == d)).unwrap();
            prop_assert_eq!(mrr == 1.0, first_hit);
        }

        #[test]
        fn none_sets_nest(sims in prop::collection::vec(-1.0f64..1.0, 1..10), t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let names: Vec<String> = (0..sims.len()).map(|i| format!("d{i}")).collect();
            let list: Vec<(&str, f64)> = names.iter().map(String::as_str).zip(sims).collect();
            let p = preds(&[("s", &list)]);
            let a = apply_none_threshold(&p, lo);
            let b = apply_none_threshold(&p, hi);
            for (x, y) in a.by_source["s"].iter().zip(&b.by_source["s"]) {
                prop_assert!(x.dst != Target::None || y.dst == Target::None);
            }
        }

        #[test]
        fn kappa_matches_textbook(rows in prop::collection::vec((0u32..=4).prop_map(|a| [a, 4 - a]), 1..8)) {
            match fleiss_kappa(&table(&rows)).unwrap() {
                Kappa::Value(k) => prop_assert!((k - kappa_by_hand(&rows)).abs() < 1e-12),
                Kappa::Degenerate => prop_assert!(rows.iter().all(|r| r[0] == 4) || rows.iter().all(|r| r[1] == 4)),
            }
        }
    }
}
