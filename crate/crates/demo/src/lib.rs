//! Browser demo: build a crosswalk between two synthetic platforms, move a
//! None threshold, and look at joint clusters in two dimensions.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use skill_crosswalk::analysis::{cluster_match_score, combine_spaces, kmeans, qualify, qualify_truth};
use skill_crosswalk::config::ExperimentConfig;
use skill_crosswalk::corpus::{EquivalenceSet, Link, Target};
use skill_crosswalk::evaluate::{
    apply_none_threshold, mean_reciprocal_rank, outer_folds, recall_at_k, CrosswalkModel, FoldStrategy,
};
use skill_crosswalk::pipeline::{ingest, models_for, Workspace};
use skill_crosswalk::seed::derive_seed;
use skill_crosswalk::translate::{rank_equivalents, RankedPredictions};
use skill_crosswalk::EmbeddingSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    pub latent_skills: usize,
    pub fine_granularity: f64,
    pub coarse_granularity: f64,
    pub none_fraction: f64,
    /// `tfidf`, `content2vec`, `skill2vec`, `tamf` or `concat`.
    pub representation: String,
    /// One in this many labeled links is held out for scoring.
    pub holdout_every: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 1,
            latent_skills: 30,
            fine_granularity: 2.0,
            coarse_granularity: 1.2,
            none_fraction: 0.0,
            representation: "concat".into(),
            holdout_every: 5,
        }
    }
}

impl Settings {
    fn config(&self) -> Result<ExperimentConfig, String> {
        let cfg = serde_json::json!({
            "seed": self.seed,
            "data": {"synthetic": {
                "latent_skills": self.latent_skills,
                "none_fraction": self.none_fraction,
                "a": {"name": "fine", "granularity": self.fine_granularity},
                "b": {"name": "coarse", "granularity": self.coarse_granularity}
            }},
            "models": [{"representation": self.representation}],
            "grids": {
                "skill2vec": {"vector_dimension": [30], "window_size": [5]},
                "content2vec": {"vector_dimension": [30], "window_size": [5], "min_count": [0]},
                "tamf": {"k": [10], "lambda": [1.0]}
            },
            "evaluation": {"directions": "forward"},
            "analysis": {"enabled": false}
        });
        ExperimentConfig::from_json(&cfg.to_string(), Path::new(".")).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub model: String,
    pub platforms: [String; 2],
    pub skills: [usize; 2],
    pub train_links: usize,
    pub test_links: usize,
    pub translated: bool,
    pub recall_at_5: f64,
    pub mrr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub skill: String,
    pub similarity: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub source: String,
    pub truth: Vec<String>,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdView {
    pub threshold: Option<f64>,
    pub recall_at_k: f64,
    pub mrr: f64,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub recall_at_k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Point {
    pub platform: String,
    pub skill: String,
    pub x: f64,
    pub y: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterView {
    pub k: usize,
    pub inertia: f64,
    /// Share of truth-bearing members with a partner in the same cluster.
    pub scores: BTreeMap<usize, Option<f64>>,
    pub points: Vec<Point>,
}

/// Everything the page needs after one (slow) build.
pub struct Session {
    seed: u64,
    platforms: [String; 2],
    src: EmbeddingSpace,
    dst: EmbeddingSpace,
    ranking: RankedPredictions,
    truth: EquivalenceSet,
    test: EquivalenceSet,
    summary: Summary,
}

fn score(ranking: &RankedPredictions, truth: &EquivalenceSet, k: usize) -> Result<(f64, f64), String> {
    let recall = recall_at_k(ranking, truth, k).map_err(|e| e.to_string())?;
    let mrr = mean_reciprocal_rank(ranking, truth).map_err(|e| e.to_string())?;
    Ok((recall, mrr))
}

impl Session {
    pub fn build(settings: &Settings) -> Result<Session, String> {
        if settings.holdout_every < 2 {
            return Err("holdout_every must be at least 2".into());
        }
        let cfg = settings.config()?;
        let data = ingest(&cfg).map_err(|e| e.to_string())?;
        let links = data.truth.links();
        let folds = outer_folds(
            &links,
            settings.holdout_every,
            derive_seed(cfg.seed, "demo"),
            FoldStrategy::Pairs,
        )
        .map_err(|e| e.to_string())?;
        let held: BTreeSet<usize> = folds[0].iter().copied().collect();
        let pick = |test: bool| -> Result<EquivalenceSet, String> {
            let chosen: Vec<Link> = links
                .iter()
                .enumerate()
                .filter(|(i, _)| held.contains(i) == test)
                .map(|(_, l)| l.clone())
                .collect();
            EquivalenceSet::from_links(&chosen).map_err(|e| e.to_string())
        };
        let (train, test) = (pick(false)?, pick(true)?);

        let ws = Workspace::new(&cfg, &data.corpora);
        let model = models_for(&ws, 0).map_err(|e| e.to_string())?.remove(0);
        let params = model.grid().into_iter().next().unwrap_or_default();
        let built = model.build(&params, &train).map_err(|e| e.to_string())?;
        let ranking = rank_equivalents(&built.src, &built.dst, None).map_err(|e| e.to_string())?;
        let (recall_at_5, mrr) = score(&ranking, &test, 5)?;
        let platforms = [ws.platform(0).to_string(), ws.platform(1).to_string()];
        let summary = Summary {
            model: model.name.clone(),
            platforms: platforms.clone(),
            skills: [data.corpora[0].skills.len(), data.corpora[1].skills.len()],
            train_links: train.links().len(),
            test_links: test.links().len(),
            translated: built.translation.is_some(),
            recall_at_5,
            mrr,
        };
        Ok(Session {
            seed: cfg.seed,
            platforms,
            src: built.src,
            dst: built.dst,
            ranking,
            truth: data.truth,
            test,
            summary,
        })
    }

    pub fn summary(&self) -> &Summary {
        &self.summary
    }

    /// Held-out scores and top-`k` lists with predictions below `threshold`
    /// turned into None.
    pub fn threshold(&self, threshold: Option<f64>, k: usize) -> Result<ThresholdView, String> {
        let k = k.max(1);
        let ranking = match threshold {
            Some(t) => apply_none_threshold(&self.ranking, t),
            None => self.ranking.clone(),
        };
        let (recall_at_k, mrr) = score(&ranking, &self.test, k)?;
        let partners = self.test.partners();
        let mut rows = Vec::new();
        let sources = partners
            .keys()
            .copied()
            .chain(self.test.none_src.iter().map(String::as_str));
        for src in sources {
            let truth: Vec<String> = match partners.get(src) {
                Some(ds) => ds.iter().map(|d| d.to_string()).collect(),
                None => vec!["NONE".into()],
            };
            let candidates = ranking
                .by_source
                .get(src)
                .map(|preds| {
                    preds
                        .iter()
                        .take(k)
                        .map(|p| Candidate {
                            skill: p.dst.to_string(),
                            similarity: p.similarity,
                            correct: match &p.dst {
                                Target::Skill(d) => truth.contains(d),
                                Target::None => truth == ["NONE"],
                            },
                        })
                        .collect()
                })
                .unwrap_or_default();
            rows.push(Row {
                source: src.to_string(),
                truth,
                candidates,
            });
        }
        Ok(ThresholdView {
            threshold,
            recall_at_k,
            mrr,
            rows,
        })
    }

    /// Held-out recall@5 over thresholds 0, 0.05, …, 1.
    pub fn sweep(&self) -> Result<Vec<SweepPoint>, String> {
        (0..=20)
            .map(|i| {
                let threshold = i as f64 / 20.0;
                let (recall_at_k, _) = score(&apply_none_threshold(&self.ranking, threshold), &self.test, 5)?;
                Ok(SweepPoint { threshold, recall_at_k })
            })
            .collect()
    }

    /// k-means over both platforms' skills in the shared coordinates, drawn
    /// on the first two principal components.
    pub fn clusters(&self, k: usize) -> Result<ClusterView, String> {
        let named = vec![
            (self.platforms[0].clone(), &self.src),
            (self.platforms[1].clone(), &self.dst),
        ];
        let combined = combine_spaces(&named).map_err(|e| e.to_string())?;
        let k = k.clamp(1, combined.len());
        let assignment = kmeans(&combined, k, derive_seed(self.seed, "analysis"), 300).map_err(|e| e.to_string())?;
        let truth = qualify_truth(&self.truth, &self.platforms[0], &self.platforms[1]);
        let scores = cluster_match_score(&assignment, &truth);

        let members: Vec<(&str, &str, String)> = named
            .iter()
            .flat_map(|(p, space)| space.ids().map(move |id| (p.as_str(), id, qualify(p, id))))
            .collect();
        let ids: Vec<&str> = members.iter().map(|m| m.2.as_str()).collect();
        let coords = pca_2d(&combined, &ids);
        let points = members
            .iter()
            .zip(coords)
            .map(|((platform, skill, q), (x, y))| Point {
                platform: platform.to_string(),
                skill: skill.to_string(),
                x,
                y,
                cluster: assignment.clusters[q],
            })
            .collect();
        Ok(ClusterView {
            k,
            inertia: assignment.inertia,
            scores,
            points,
        })
    }
}

/// Scores on the top two principal axes of the centered rows.
pub fn pca_2d(space: &EmbeddingSpace, ids: &[&str]) -> Vec<(f64, f64)> {
    let (n, d) = (ids.len(), space.dimension());
    if n == 0 || d == 0 {
        return vec![(0.0, 0.0); n];
    }
    let mut x = DMatrix::from_fn(n, d, |i, j| space.get(ids[i]).expect("id from the space")[j]);
    let mean = x.row_mean();
    for mut row in x.row_iter_mut() {
        row -= &mean;
    }
    let svd = x.svd(true, false);
    let u = svd.u.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let axis = |i: usize, c: Option<&usize>| c.map_or(0.0, |&c| u[(i, c)] * svd.singular_values[c]);
    (0..n)
        .map(|i| (axis(i, order.first()), axis(i, order.get(1))))
        .collect()
}

fn js_error(e: String) -> JsError {
    JsError::new(&e)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

/// A built crosswalk held on the JS side.
#[wasm_bindgen]
pub struct Crosswalk(Session);

#[wasm_bindgen]
impl Crosswalk {
    /// `settings` is a JSON object of [`Settings`] fields; missing ones take
    /// their defaults.
    #[wasm_bindgen(constructor)]
    pub fn new(settings: &str) -> Result<Crosswalk, JsError> {
        let settings: Settings = serde_json::from_str(settings).map_err(|e| JsError::new(&e.to_string()))?;
        Session::build(&settings).map(Crosswalk).map_err(js_error)
    }

    pub fn summary(&self) -> Result<String, JsError> {
        to_json(self.0.summary())
    }

    /// A negative threshold means no None predictions.
    pub fn threshold(&self, threshold: f64, k: usize) -> Result<String, JsError> {
        let t = (threshold >= 0.0).then_some(threshold);
        to_json(&self.0.threshold(t, k).map_err(js_error)?)
    }

    pub fn sweep(&self) -> Result<String, JsError> {
        to_json(&self.0.sweep().map_err(js_error)?)
    }

    pub fn clusters(&self, k: usize) -> Result<String, JsError> {
        to_json(&self.0.clusters(k).map_err(js_error)?)
    }
}
