//! Cross-validation with nested hyperparameter selection.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{apply_none_threshold, mean_reciprocal_rank, recall_at_k};
use super::report::{EvaluationReport, FoldRecord, ModelReport};
use crate::corpus::{EquivalenceSet, Link, Target};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::space::EmbeddingSpace;
use crate::translate::{rank_equivalents, RankedPredictions};

pub type Params = BTreeMap<String, f64>;

/// How a model uses labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    /// No labels at all: scored once against every link.
    Fixed,
    /// No translation, but its grid is chosen by MRR on the training links.
    LabelFree,
    /// Needs labels to train; the grid is chosen by inner cross-validation.
    Nested,
}

/// A way to put source and destination skills in one space.
pub trait CrosswalkModel: Sync {
    fn name(&self) -> String;
    fn tuning(&self) -> Tuning;
    fn grid(&self) -> Vec<Params>;
    /// Source and destination spaces ready for cosine ranking. `train` holds
    /// the only labels the model may look at.
    fn prepare(&self, params: &Params, train: &EquivalenceSet) -> Result<(EmbeddingSpace, EmbeddingSpace)>;
}

/// Treatment of links to the None skill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoneMode {
    /// Dropped before splitting.
    #[default]
    Exclude,
    /// Kept and always counted wrong.
    Ignore,
    /// Kept; low-similarity predictions become None with a tuned threshold.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldStrategy {
    /// Folds over individual links.
    #[default]
    Pairs,
    /// All links of a source skill land in the same fold.
    SkillDisjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    pub folds: usize,
    pub inner_folds: usize,
    pub k: usize,
    pub seed: u64,
    pub none_mode: NoneMode,
    pub strategy: FoldStrategy,
    pub threshold_grid: Vec<f64>,
    /// Label such as `A->B`, copied into every model report.
    pub direction: String,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 10,
            inner_folds: 5,
            k: 5,
            seed: 0,
            none_mode: NoneMode::Exclude,
            strategy: FoldStrategy::Pairs,
            threshold_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            direction: String::new(),
        }
    }
}

impl CvOptions {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 || self.inner_folds < 2 {
            return Err(Error::Config(
                "cross-validation needs at least 2 folds and 2 inner folds".into(),
            ));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.none_mode == NoneMode::Threshold && self.threshold_grid.is_empty() {
            return Err(Error::Config("threshold mode needs a non-empty threshold grid".into()));
        }
        if self.threshold_grid.iter().any(|t| !(-1.0..=1.0).contains(t)) {
            return Err(Error::Config("thresholds must lie in [-1, 1]".into()));
        }
        Ok(())
    }
}

/// Seeded balanced partition of `links` into `folds` groups of indices.
pub fn outer_folds(links: &[Link], folds: usize, seed: u64, strategy: FoldStrategy) -> Result<Vec<Vec<usize>>> {
    if links.len() < folds {
        return Err(Error::Config(format!(
            "{} links cannot be split into {folds} folds",
            links.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    match strategy {
        FoldStrategy::Pairs => {
            let mut order: Vec<usize> = (0..links.len()).collect();
            order.shuffle(&mut rng);
            for (i, idx) in order.into_iter().enumerate() {
                out[i % folds].push(idx);
            }
        }
        FoldStrategy::SkillDisjoint => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, l) in links.iter().enumerate() {
                groups.entry(&l.src).or_default().push(i);
            }
            if groups.len() < folds {
                return Err(Error::Config(format!(
                    "{} source skills cannot be split into {folds} skill-disjoint folds",
                    groups.len()
                )));
            }
            let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
            groups.shuffle(&mut rng);
            // stable sort keeps the shuffled order among equal sizes
            groups.sort_by_key(|g| std::cmp::Reverse(g.len()));
            for g in groups {
                let target = (0..folds).min_by_key(|&f| (out[f].len(), f)).expect("folds > 0");
                out[target].extend(g);
            }
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

fn subset(links: &[Link], idx: impl IntoIterator<Item = usize>) -> Result<EquivalenceSet> {
    let picked: Vec<Link> = idx.into_iter().map(|i| links[i].clone()).collect();
    EquivalenceSet::from_links(&picked)
}

fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    fold.iter().for_each(|&i| held[i] = true);
    (0..n).filter(|&i| !held[i]).collect()
}

fn rank(model: &dyn CrosswalkModel, params: &Params, train: &EquivalenceSet) -> Result<RankedPredictions> {
    let (src, dst) = model.prepare(params, train)?;
    rank_equivalents(&src, &dst, None)
}

/// Threshold with the best mean recall over the given (predictions, truth)
/// sets; ties go to the lower threshold.
fn select_threshold(cases: &[(RankedPredictions, EquivalenceSet)], grid: &[f64], k: usize) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &t in grid {
        let mut sum = 0.0;
        for (p, truth) in cases {
            sum += recall_at_k(&apply_none_threshold(p, t), truth, k)?;
        }
        let score = sum / cases.len() as f64;
        if score > best.0 {
            best = (score, t);
        }
    }
    Ok(best.1)
}

struct Selection {
    index: usize,
    scores: Vec<f64>,
    threshold: Option<f64>,
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

fn select(
    model: &dyn CrosswalkModel,
    grid: &[Params],
    links: &[Link],
    train_idx: &[usize],
    opts: &CvOptions,
    inner_seed: u64,
) -> Result<Selection> {
    let threshold_mode = opts.none_mode == NoneMode::Threshold;
    let train = subset(links, train_idx.iter().copied())?;
    match model.tuning() {
        Tuning::Fixed => {
            let threshold = if threshold_mode {
                let p = rank(model, &grid[0], &EquivalenceSet::default())?;
                Some(select_threshold(&[(p, train)], &opts.threshold_grid, opts.k)?)
            } else {
                None
            };
            Ok(Selection {
                index: 0,
                scores: Vec::new(),
                threshold,
            })
        }
        Tuning::LabelFree => {
            let mut predictions = Vec::with_capacity(grid.len());
            let mut scores = Vec::with_capacity(grid.len());
            for params in grid {
                let p = rank(model, params, &EquivalenceSet::default())?;
                scores.push(mean_reciprocal_rank(&p, &train)?);
                predictions.push(p);
            }
            let index = argmax(&scores);
            let threshold = if threshold_mode {
                let p = predictions.swap_remove(index);
                Some(select_threshold(&[(p, train)], &opts.threshold_grid, opts.k)?)
            } else {
                None
            };
            Ok(Selection {
                index,
                scores,
                threshold,
            })
        }
        Tuning::Nested if grid.len() == 1 && !threshold_mode => Ok(Selection {
            // nothing to choose between
            index: 0,
            scores: Vec::new(),
            threshold: None,
        }),
        Tuning::Nested => {
            let train_links: Vec<Link> = train_idx.iter().map(|&i| links[i].clone()).collect();
            let inner = outer_folds(&train_links, opts.inner_folds, inner_seed, opts.strategy)?;
            let mut per_param: Vec<Vec<(RankedPredictions, EquivalenceSet)>> = Vec::with_capacity(grid.len());
            let mut scores = Vec::with_capacity(grid.len());
            for params in grid {
                let mut cases = Vec::with_capacity(inner.len());
                let mut sum = 0.0;
                for fold in &inner {
                    let fit = subset(&train_links, complement(train_links.len(), fold))?;
                    let held = subset(&train_links, fold.iter().copied())?;
                    let p = rank(model, params, &fit)?;
                    sum += mean_reciprocal_rank(&p, &held)?;
                    cases.push((p, held));
                }
                scores.push(sum / inner.len() as f64);
                per_param.push(cases);
            }
            let index = argmax(&scores);
            let threshold = if threshold_mode {
                Some(select_threshold(&per_param[index], &opts.threshold_grid, opts.k)?)
            } else {
                None
            };
            Ok(Selection {
                index,
                scores,
                threshold,
            })
        }
    }
}

fn score(p: &RankedPredictions, truth: &EquivalenceSet, threshold: Option<f64>, k: usize) -> Result<(f64, f64)> {
    let p = match threshold {
        Some(t) => apply_none_threshold(p, t),
        None => p.clone(),
    };
    Ok((recall_at_k(&p, truth, k)?, mean_reciprocal_rank(&p, truth)?))
}

fn run_fold(
    model: &dyn CrosswalkModel,
    grid: &[Params],
    links: &[Link],
    fold_index: usize,
    fold: &[usize],
    opts: &CvOptions,
) -> Result<FoldRecord> {
    let train_idx = complement(links.len(), fold);
    let inner_seed = derive_seed(opts.seed, &format!("inner/{fold_index}"));
    let chosen = select(model, grid, links, &train_idx, opts, inner_seed)?;
    let params = grid[chosen.index].clone();
    let train = match model.tuning() {
        Tuning::Nested => subset(links, train_idx.iter().copied())?,
        _ => EquivalenceSet::default(),
    };
    let test = subset(links, fold.iter().copied())?;
    let p = rank(model, &params, &train)?;
    let (recall, mrr) = score(&p, &test, chosen.threshold, opts.k)?;
    Ok(FoldRecord {
        fold: Some(fold_index),
        params,
        threshold: chosen.threshold,
        train_links: train_idx.len(),
        test_links: fold.len(),
        recall_at_k: recall,
        mrr,
        selection_scores: chosen.scores,
    })
}

fn evaluation_links(truth: &EquivalenceSet, mode: NoneMode) -> Vec<Link> {
    truth
        .links()
        .into_iter()
        .filter(|l| mode != NoneMode::Exclude || l.dst != Target::None)
        .collect()
}

/// Scores every model on the same seeded outer folds. Models that use no
/// labels and need no threshold are scored once against all links.
pub fn cross_validate(
    models: &[&dyn CrosswalkModel],
    truth: &EquivalenceSet,
    opts: &CvOptions,
) -> Result<EvaluationReport> {
    opts.validate()?;
    let links = evaluation_links(truth, opts.none_mode);
    if links.is_empty() {
        return Err(Error::Data("no ground-truth links to evaluate".into()));
    }
    let folds = outer_folds(&links, opts.folds, derive_seed(opts.seed, "outer"), opts.strategy)?;
    let mut reports = Vec::with_capacity(models.len());
    for model in models {
        let tuning = model.tuning();
        let mut grid = model.grid();
        if grid.is_empty() {
            if tuning != Tuning::Fixed {
                return Err(Error::Config(format!(
                    "model `{}` needs a non-empty grid",
                    model.name()
                )));
            }
            grid.push(Params::new());
        }
        let records = if tuning == Tuning::Fixed && opts.none_mode != NoneMode::Threshold {
            let all = subset(&links, 0..links.len())?;
            let p = rank(*model, &grid[0], &EquivalenceSet::default())?;
            let (recall, mrr) = score(&p, &all, None, opts.k)?;
            vec![FoldRecord {
                fold: None,
                params: grid[0].clone(),
                threshold: None,
                train_links: 0,
                test_links: links.len(),
                recall_at_k: recall,
                mrr,
                selection_scores: Vec::new(),
            }]
        } else {
            run_folds(*model, &grid, &links, &folds, opts)?
        };
        log::info!("{} {}: {} record(s)", model.name(), opts.direction, records.len());
        reports.push(ModelReport::new(
            model.name(),
            opts.direction.clone(),
            tuning,
            grid,
            records,
        ));
    }
    Ok(EvaluationReport {
        seed: opts.seed,
        folds: opts.folds,
        inner_folds: opts.inner_folds,
        k: opts.k,
        none_mode: opts.none_mode,
        strategy: opts.strategy,
        models: reports,
        fingerprint: BTreeMap::new(),
    })
}

fn run_folds(
    model: &dyn CrosswalkModel,
    grid: &[Params],
    links: &[Link],
    folds: &[Vec<usize>],
    opts: &CvOptions,
) -> Result<Vec<FoldRecord>> {
    let job = |(i, fold): (usize, &Vec<usize>)| run_fold(model, grid, links, i, fold, opts);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        folds.par_iter().enumerate().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        folds.iter().enumerate().map(job).collect()
    }
}
