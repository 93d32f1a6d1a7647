//! Cached representations and the configured models as cross-validation
//! candidates.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, Mutex, OnceLock};

use crate::config::{ExperimentConfig, Representation};
use crate::corpus::{EquivalenceSet, PlatformCorpus};
use crate::error::{Error, Result};
use crate::evaluate::{mean_reciprocal_rank, CrosswalkModel, Params, Tuning};
use crate::represent::{
    assemble_concat, bag_of_words_spaces, content2vec_spaces, load_external_word_vectors, skill2vec_space,
    tfidf_spaces, train_content_word_vectors,
};
use crate::seed::derive_seed;
use crate::skipgram::SkipgramHyper;
use crate::space::{norm, Alignment, EmbeddingSpace, Provenance};
use crate::tamf::{build_ppmi, tamf_factorize, PpmiMatrix, TamfParams};
use crate::translate::{apply_translation, fit_translation, rank_equivalents, TranslationMatrix};

/// Memoizes fallible builds. Concurrent requests for one key wait for the
/// first; a failure is reported to every caller.
struct Cache<K, V> {
    cells: Mutex<HashMap<K, Arc<OnceLock<Result<Arc<V>>>>>>,
}

impl<K: Eq + Hash + Clone, V> Cache<K, V> {
    fn new() -> Self {
        Cache {
            cells: Mutex::new(HashMap::new()),
        }
    }

    // `build` must not use the rayon pool: a stolen job waiting on the same
    // cell would deadlock.
    fn get(&self, key: &K, build: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
        let cell = self
            .cells
            .lock()
            .expect("cache lock")
            .entry(key.clone())
            .or_default()
            .clone();
        match cell.get_or_init(|| build().map(Arc::new)) {
            Ok(v) => Ok(Arc::clone(v)),
            Err(e) => Err(e.replay()),
        }
    }
}

/// Word-vector training settings for Content2vec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WordKey {
    pub dimension: usize,
    pub window: usize,
    pub min_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContentKey {
    BagOfWords,
    Tfidf,
    /// `None` for external word vectors.
    Content2vec(Option<WordKey>),
}

impl ContentKey {
    fn describe(&self) -> String {
        match self {
            ContentKey::BagOfWords => "bag_of_words".into(),
            ContentKey::Tfidf => "tfidf".into(),
            ContentKey::Content2vec(None) => "content2vec(external)".into(),
            ContentKey::Content2vec(Some(w)) => {
                format!("content2vec(d={},w={},min={})", w.dimension, w.window, w.min_count)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct TamfKey {
    platform: usize,
    content: ContentKey,
    k: usize,
    lambda_bits: u64,
}

/// Both corpora plus every representation built so far.
pub struct Workspace<'a> {
    pub cfg: &'a ExperimentConfig,
    pub corpora: &'a [PlatformCorpus; 2],
    external: OnceLock<Result<Arc<EmbeddingSpace>>>,
    words: Cache<WordKey, EmbeddingSpace>,
    content: Cache<ContentKey, [EmbeddingSpace; 2]>,
    skill2vec: Cache<(usize, usize, usize), EmbeddingSpace>,
    ppmi: Cache<usize, PpmiMatrix>,
    tamf: Cache<TamfKey, EmbeddingSpace>,
}

fn param(params: &Params, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::Config(format!("missing hyperparameter `{key}`")))
}

fn param_usize(params: &Params, key: &str) -> Result<usize> {
    Ok(param(params, key)?.round() as usize)
}

impl<'a> Workspace<'a> {
    pub fn new(cfg: &'a ExperimentConfig, corpora: &'a [PlatformCorpus; 2]) -> Self {
        Workspace {
            cfg,
            corpora,
            external: OnceLock::new(),
            words: Cache::new(),
            content: Cache::new(),
            skill2vec: Cache::new(),
            ppmi: Cache::new(),
            tamf: Cache::new(),
        }
    }

    pub fn platform(&self, i: usize) -> &str {
        &self.corpora[i].platform_name
    }

    fn seed(&self, label: &str) -> u64 {
        derive_seed(self.cfg.seed, label)
    }

    fn word_vectors(&self, key: WordKey) -> Result<Arc<EmbeddingSpace>> {
        self.words.get(&key, || {
            let hyper = SkipgramHyper {
                vector_dimension: key.dimension,
                window_size: key.window,
                min_count: key.min_count,
                seed: self.seed(&format!("words/d{}/w{}/m{}", key.dimension, key.window, key.min_count)),
                ..self.cfg.skipgram.clone()
            };
            train_content_word_vectors(&self.corpora[0], &self.corpora[1], &hyper)
        })
    }

    fn external_vectors(&self) -> Result<Arc<EmbeddingSpace>> {
        let path = self
            .cfg
            .represent
            .external_word_vectors
            .as_ref()
            .ok_or_else(|| Error::Config("no external word vectors configured".into()))?;
        match self
            .external
            .get_or_init(|| load_external_word_vectors(path).map(Arc::new))
        {
            Ok(v) => Ok(Arc::clone(v)),
            Err(e) => Err(e.replay()),
        }
    }

    /// Content spaces of both platforms over one shared basis.
    pub fn content(&self, key: ContentKey) -> Result<Arc<[EmbeddingSpace; 2]>> {
        self.content.get(&key, || {
            let (a, b) = (&self.corpora[0], &self.corpora[1]);
            let pair = match key {
                ContentKey::BagOfWords => bag_of_words_spaces(a, b)?,
                ContentKey::Tfidf => tfidf_spaces(a, b)?,
                ContentKey::Content2vec(None) => content2vec_spaces(a, b, &*self.external_vectors()?)?,
                ContentKey::Content2vec(Some(w)) => content2vec_spaces(a, b, &*self.word_vectors(w)?)?,
            };
            if !pair.warnings.is_empty() {
                log::warn!(
                    "{}: {} zero-vector warning(s), first: {}",
                    key.describe(),
                    pair.warnings.len(),
                    pair.warnings[0]
                );
            }
            Ok([pair.a, pair.b])
        })
    }

    pub fn skill2vec(&self, platform: usize, dimension: usize, window: usize) -> Result<Arc<EmbeddingSpace>> {
        self.skill2vec.get(&(platform, dimension, window), || {
            let hyper = SkipgramHyper {
                vector_dimension: dimension,
                window_size: window,
                ..self.cfg.skipgram.clone()
            };
            let seed = self.seed(&format!("skill2vec/{}/d{dimension}/w{window}", self.platform(platform)));
            skill2vec_space(&self.corpora[platform], &hyper, seed)
        })
    }

    pub fn ppmi(&self, platform: usize) -> Result<Arc<PpmiMatrix>> {
        self.ppmi.get(&platform, || {
            let c = &self.corpora[platform];
            let skills: Vec<String> = c.skills.iter().cloned().collect();
            build_ppmi(&c.sequences, &skills, self.cfg.represent.tamf_window)
        })
    }

    pub fn tamf(&self, platform: usize, content: ContentKey, k: usize, lambda: f64) -> Result<Arc<EmbeddingSpace>> {
        let key = TamfKey {
            platform,
            content,
            k,
            lambda_bits: lambda.to_bits(),
        };
        self.tamf.get(&key, || {
            let ppmi = self.ppmi(platform)?;
            let spaces = self.content(content)?;
            let params = TamfParams {
                k,
                lambda,
                tolerance: self.cfg.represent.tamf_tolerance,
                max_iterations: self.cfg.represent.tamf_max_iterations,
                seed: self.seed(&format!("tamf/{}/k{k}/l{lambda}", self.platform(platform))),
            };
            let (mut space, fact) = tamf_factorize(&ppmi, &spaces[platform], &params)?;
            if !fact.converged {
                log::warn!(
                    "TAMF {} k={k} lambda={lambda}: no convergence in {} iterations",
                    self.platform(platform),
                    fact.iterations
                );
            }
            space.provenance = space.provenance.with("content", content.describe());
            Ok(space)
        })
    }
}

fn content_kind(rep: Representation, cfg: &ExperimentConfig) -> Option<Representation> {
    match rep {
        Representation::BagOfWords | Representation::Tfidf | Representation::Content2vec => Some(rep),
        Representation::Tamf | Representation::Concat => Some(cfg.represent.content_features.representation()),
        _ => None,
    }
}

/// One configured model mapping platform `src` onto the other platform.
pub struct PipelineModel<'w, 'a> {
    ws: &'w Workspace<'a>,
    pub name: String,
    pub reps: [Representation; 2],
    pub src: usize,
    tuning: Tuning,
    axes: Vec<(String, Vec<f64>)>,
    /// Content2vec settings are part of the grid rather than picked without
    /// labels.
    content_in_grid: bool,
}

/// Representations and translation behind one prepared pair of spaces.
pub struct Built {
    pub src: EmbeddingSpace,
    pub dst: EmbeddingSpace,
    pub translation: Option<TranslationMatrix>,
    /// Untranslated per-platform spaces (source first).
    pub parts: Vec<EmbeddingSpace>,
    pub content: Option<ContentKey>,
}

fn axis(name: String, values: &[usize]) -> (String, Vec<f64>) {
    (name, values.iter().map(|&v| v as f64).collect())
}

impl<'w, 'a> PipelineModel<'w, 'a> {
    pub fn new(ws: &'w Workspace<'a>, name: &str, reps: [Representation; 2], src: usize) -> Self {
        let cfg = ws.cfg;
        let grids = &cfg.grids;
        let own_words = cfg.represent.external_word_vectors.is_none();
        let uses_c2v = reps
            .iter()
            .any(|&r| content_kind(r, cfg) == Some(Representation::Content2vec));
        let both_text = ws.corpora.iter().all(PlatformCorpus::has_content);
        let shared = reps[0] == reps[1] && reps[0].is_shared_content();
        let tuning = if shared {
            if reps[0] == Representation::Content2vec && own_words {
                Tuning::LabelFree
            } else {
                Tuning::Fixed
            }
        } else {
            Tuning::Nested
        };
        let content_in_grid = own_words && uses_c2v && (shared || !both_text);
        let mut axes = Vec::new();
        if content_in_grid {
            axes.push(axis(
                "content2vec.vector_dimension".into(),
                &grids.content2vec.vector_dimension,
            ));
            axes.push(axis("content2vec.window_size".into(), &grids.content2vec.window_size));
            axes.push(axis("content2vec.min_count".into(), &grids.content2vec.min_count));
        }
        if !shared {
            let tied = reps[0] == reps[1];
            let sides: Vec<usize> = if tied { vec![0] } else { vec![0, 1] };
            for i in sides {
                let prefix = if tied {
                    String::new()
                } else {
                    format!("{}.", ws.platform(i))
                };
                match reps[i] {
                    Representation::Skill2vec | Representation::Concat => {
                        axes.push(axis(
                            format!("{prefix}skill2vec.vector_dimension"),
                            &grids.skill2vec.vector_dimension,
                        ));
                        axes.push(axis(
                            format!("{prefix}skill2vec.window_size"),
                            &grids.skill2vec.window_size,
                        ));
                    }
                    Representation::Tamf => {
                        axes.push(axis(format!("{prefix}tamf.k"), &grids.tamf.k));
                        axes.push((format!("{prefix}tamf.lambda"), grids.tamf.lambda.clone()));
                    }
                    _ => {}
                }
            }
        }
        PipelineModel {
            ws,
            name: name.to_string(),
            reps,
            src,
            tuning,
            axes,
            content_in_grid,
        }
    }

    pub fn dst(&self) -> usize {
        1 - self.src
    }

    pub fn direction(&self) -> String {
        format!("{}->{}", self.ws.platform(self.src), self.ws.platform(self.dst()))
    }

    fn key(&self, platform: usize, name: &str) -> String {
        if self.reps[0] == self.reps[1] {
            name.to_string()
        } else {
            format!("{}.{name}", self.ws.platform(platform))
        }
    }

    fn word_key(params: &Params) -> Result<WordKey> {
        Ok(WordKey {
            dimension: param_usize(params, "content2vec.vector_dimension")?,
            window: param_usize(params, "content2vec.window_size")?,
            min_count: param_usize(params, "content2vec.min_count")?,
        })
    }

    /// Content features for this model: from the grid, or the Content2vec
    /// setting whose content-only ranking best recovers the training pairs.
    fn content_key(&self, params: &Params, train: &EquivalenceSet) -> Result<Option<ContentKey>> {
        let cfg = self.ws.cfg;
        let kinds: Vec<Representation> = self.reps.iter().filter_map(|&r| content_kind(r, cfg)).collect();
        let Some(&kind) = kinds.first() else {
            return Ok(None);
        };
        if kinds.iter().any(|&k| k != kind) {
            return Err(Error::Config(format!(
                "model `{}` mixes content features {} and {}",
                self.name,
                kinds[0].label(),
                kinds[1].label()
            )));
        }
        let key = match kind {
            Representation::BagOfWords => ContentKey::BagOfWords,
            Representation::Tfidf => ContentKey::Tfidf,
            _ if cfg.represent.external_word_vectors.is_some() => ContentKey::Content2vec(None),
            _ if self.content_in_grid => ContentKey::Content2vec(Some(Self::word_key(params)?)),
            _ => self.select_content(train)?,
        };
        Ok(Some(key))
    }

    fn word_candidates(&self) -> Vec<WordKey> {
        let g = &self.ws.cfg.grids.content2vec;
        let mut out = Vec::new();
        for &dimension in &g.vector_dimension {
            for &window in &g.window_size {
                for &min_count in &g.min_count {
                    out.push(WordKey {
                        dimension,
                        window,
                        min_count,
                    });
                }
            }
        }
        out
    }

    fn select_content(&self, train: &EquivalenceSet) -> Result<ContentKey> {
        let mut best: Option<(f64, ContentKey)> = None;
        for w in self.word_candidates() {
            let key = ContentKey::Content2vec(Some(w));
            if train.is_empty() {
                return Ok(key);
            }
            let spaces = self.ws.content(key)?;
            let ranked = rank_equivalents(&spaces[self.src], &spaces[self.dst()], None)?;
            let mrr = mean_reciprocal_rank(&ranked, train)?;
            if best.is_none_or(|(b, _)| mrr > b) {
                best = Some((mrr, key));
            }
        }
        let (mrr, key) = best.expect("validated non-empty grid");
        log::debug!(
            "{} {}: content {} (train MRR {mrr:.4})",
            self.name,
            self.direction(),
            key.describe()
        );
        Ok(key)
    }

    fn side(&self, platform: usize, params: &Params, content: Option<ContentKey>) -> Result<EmbeddingSpace> {
        let ws = self.ws;
        let rep = self.reps[platform];
        let skill2vec = || {
            ws.skill2vec(
                platform,
                param_usize(params, &self.key(platform, "skill2vec.vector_dimension"))?,
                param_usize(params, &self.key(platform, "skill2vec.window_size"))?,
            )
        };
        let content_space = || -> Result<EmbeddingSpace> {
            let key = content.expect("content representation has a content key");
            Ok(ws.content(key)?[platform].clone())
        };
        match rep {
            Representation::BagOfWords | Representation::Tfidf | Representation::Content2vec => content_space(),
            Representation::Skill2vec => Ok((*skill2vec()?).clone()),
            Representation::Tamf => {
                let k = param_usize(params, &self.key(platform, "tamf.k"))?;
                let lambda = param(params, &self.key(platform, "tamf.lambda"))?;
                Ok((*ws.tamf(platform, content.expect("tamf content"), k, lambda)?).clone())
            }
            Representation::Concat => {
                let c = content_space()?;
                concat(&c, &*skill2vec()?, Alignment::PlatformLocal)
            }
            Representation::Auto => Err(Error::Config("unresolved `auto` representation".into())),
        }
    }

    fn translation_options(&self) -> crate::translate::TranslationOptions {
        crate::translate::TranslationOptions {
            seed: self.ws.seed(&format!("translation/{}/{}", self.name, self.direction())),
            ..self.ws.cfg.translation.clone()
        }
    }

    fn translate(
        &self,
        src: &EmbeddingSpace,
        dst: &EmbeddingSpace,
        train: &EquivalenceSet,
    ) -> Result<TranslationMatrix> {
        let usable = usable_pairs(train, src, dst);
        if usable.pairs.len() < train.pairs.len() {
            log::debug!(
                "{} {}: {} of {} training pairs have vectors on both sides",
                self.name,
                self.direction(),
                usable.pairs.len(),
                train.pairs.len()
            );
        }
        fit_translation(src, dst, &usable, &self.translation_options())
    }

    /// Trains the label-free pieces one grid entry needs, so that
    /// cross-validation finds them cached.
    pub fn warm(&self, params: &Params) -> Result<()> {
        let keys = match self.content_key(params, &EquivalenceSet::default())? {
            None => Vec::new(),
            Some(ContentKey::Content2vec(Some(_))) if !self.content_in_grid => self
                .word_candidates()
                .into_iter()
                .map(|w| ContentKey::Content2vec(Some(w)))
                .collect(),
            Some(key) => vec![key],
        };
        for key in keys {
            self.ws.content(key)?;
        }
        if self.tuning != Tuning::Nested {
            return Ok(());
        }
        for p in 0..2 {
            match self.reps[p] {
                Representation::Skill2vec | Representation::Concat => {
                    self.ws.skill2vec(
                        p,
                        param_usize(params, &self.key(p, "skill2vec.vector_dimension"))?,
                        param_usize(params, &self.key(p, "skill2vec.window_size"))?,
                    )?;
                }
                Representation::Tamf => {
                    self.ws.ppmi(p)?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Untranslated source and destination spaces.
    pub fn sides(&self, params: &Params, train: &EquivalenceSet) -> Result<[EmbeddingSpace; 2]> {
        let content = self.content_key(params, train)?;
        if self.tuning != Tuning::Nested {
            let spaces = self.ws.content(content.expect("shared content model"))?;
            return Ok([spaces[self.src].clone(), spaces[self.dst()].clone()]);
        }
        Ok([
            self.side(self.src, params, content)?,
            self.side(self.dst(), params, content)?,
        ])
    }

    /// Spaces ready for ranking plus everything that went into them.
    pub fn build(&self, params: &Params, train: &EquivalenceSet) -> Result<Built> {
        let (s, d) = (self.src, self.dst());
        let content = self.content_key(params, train)?;
        if self.tuning != Tuning::Nested {
            let spaces = self.ws.content(content.expect("shared content model"))?;
            return Ok(Built {
                src: spaces[s].clone(),
                dst: spaces[d].clone(),
                translation: None,
                parts: Vec::new(),
                content,
            });
        }
        if self.reps == [Representation::Concat; 2] {
            // translate only the context halves; the content halves already
            // share a basis
            let key = content.expect("concat content");
            let text = self.ws.content(key)?;
            let ctx = |p: usize| {
                self.ws.skill2vec(
                    p,
                    param_usize(params, "skill2vec.vector_dimension")?,
                    param_usize(params, "skill2vec.window_size")?,
                )
            };
            let (ctx_s, ctx_d) = (ctx(s)?, ctx(d)?);
            let t = self.translate(&ctx_s, &ctx_d, train)?;
            let moved = apply_translation(&t, &ctx_s)?;
            let fill = |space: &EmbeddingSpace, ids: &EmbeddingSpace| zero_filled(space, ids.ids()).normalized();
            let (src, dst) = assemble_concat(
                &fill(&text[s], &moved),
                &fill(&moved, &text[s]),
                &fill(&text[d], &ctx_d),
                &fill(&ctx_d, &text[d]),
            )?;
            return Ok(Built {
                src,
                dst,
                translation: Some(t),
                parts: vec![text[s].clone(), (*ctx_s).clone(), text[d].clone(), (*ctx_d).clone()],
                content,
            });
        }
        let src_space = self.side(s, params, content)?;
        let dst_space = self.side(d, params, content)?;
        let t = self.translate(&src_space, &dst_space, train)?;
        Ok(Built {
            src: apply_translation(&t, &src_space)?,
            dst: dst_space.clone(),
            translation: Some(t),
            parts: vec![src_space, dst_space],
            content,
        })
    }
}

impl CrosswalkModel for PipelineModel<'_, '_> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn tuning(&self) -> Tuning {
        self.tuning
    }

    fn grid(&self) -> Vec<Params> {
        let mut out = vec![Params::new()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(name.clone(), *v);
                        q
                    })
                })
                .collect();
        }
        if self.tuning == Tuning::Fixed && self.axes.is_empty() {
            return Vec::new();
        }
        out
    }

    fn prepare(&self, params: &Params, train: &EquivalenceSet) -> Result<(EmbeddingSpace, EmbeddingSpace)> {
        let built = self.build(params, train)?;
        Ok((built.src, built.dst))
    }
}

/// Pairs with a nonzero vector on both sides.
pub fn usable_pairs(train: &EquivalenceSet, src: &EmbeddingSpace, dst: &EmbeddingSpace) -> EquivalenceSet {
    let ok = |space: &EmbeddingSpace, id: &str| space.get(id).is_some_and(|v| norm(v) > 0.0);
    EquivalenceSet {
        pairs: train
            .pairs
            .iter()
            .filter(|(s, d)| ok(src, s) && ok(dst, d))
            .cloned()
            .collect(),
        ..Default::default()
    }
}

/// `space` plus zero vectors for the ids of `ids` it lacks.
fn zero_filled<'s>(space: &EmbeddingSpace, ids: impl Iterator<Item = &'s str>) -> EmbeddingSpace {
    let mut out = space.clone();
    for id in ids {
        if !out.contains(id) {
            out.insert(id, vec![0.0; space.dimension()])
                .expect("matching dimension");
        }
    }
    out
}

/// `[unit content ∥ unit context]` per skill; a missing half is zero.
fn concat(content: &EmbeddingSpace, context: &EmbeddingSpace, alignment: Alignment) -> Result<EmbeddingSpace> {
    let c = zero_filled(content, context.ids()).normalized();
    let x = zero_filled(context, content.ids()).normalized();
    let platform = content.name.split(':').next().unwrap_or("");
    let prov = Provenance::new("concat")
        .with("content", &content.name)
        .with("context", &context.name);
    let mut out = EmbeddingSpace::new(
        format!("{platform}:concat"),
        c.dimension() + x.dimension(),
        alignment,
        prov,
    );
    for (id, v) in c.iter() {
        let mut joined = v.to_vec();
        joined.extend_from_slice(x.get(id).expect("zero-filled"));
        out.insert(id, joined)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn config(models: &str) -> ExperimentConfig {
        let text = format!(
            r#"{{"data": {{"synthetic": {{"latent_skills": 8, "a": {{"name": "A", "students": 40}},
                 "b": {{"name": "B", "students": 40}}, "vocabulary_size": 200}}}},
                 "models": {models},
                 "grids": {{"skill2vec": {{"vector_dimension": [8], "window_size": [2, 3]}},
                           "content2vec": {{"vector_dimension": [8], "window_size": [3], "min_count": [0, 1]}},
                           "tamf": {{"k": [4], "lambda": [1.0]}}}},
                 "skipgram": {{"epochs": 1}}}}"#
        );
        ExperimentConfig::from_json(&text, Path::new("/tmp")).unwrap()
    }

    fn corpora(cfg: &ExperimentConfig) -> [PlatformCorpus; 2] {
        super::super::ingest(cfg).unwrap().corpora
    }

    #[test]
    fn tuning_and_grids_follow_representations() {
        let cfg = config(
            r#"[{"representation": "tfidf"}, {"representation": "content2vec"}, {"representation": "skill2vec"},
                {"per_platform": {"A": "tamf", "B": "skill2vec"}}, {"representation": "concat"}]"#,
        );
        let corpora = corpora(&cfg);
        let ws = Workspace::new(&cfg, &corpora);
        let models: Vec<PipelineModel> = cfg
            .resolved_models()
            .unwrap()
            .into_iter()
            .map(|(name, reps)| PipelineModel::new(&ws, &name, reps, 0))
            .collect();
        let summary: Vec<(Tuning, usize)> = models.iter().map(|m| (m.tuning(), m.grid().len())).collect();
        assert_eq!(
            summary,
            vec![
                (Tuning::Fixed, 0),
                (Tuning::LabelFree, 2),
                (Tuning::Nested, 2),
                (Tuning::Nested, 2),
                (Tuning::Nested, 2),
            ]
        );
        let g = models[3].grid();
        assert!(g[0].contains_key("A.tamf.k") && g[0].contains_key("B.skill2vec.window_size"));
    }

    #[test]
    fn cache_builds_once_and_replays_errors() {
        let cache: Cache<u8, usize> = Cache::new();
        let mut calls = 0;
        assert_eq!(*cache.get(&1, || Ok(5)).unwrap(), 5);
        assert_eq!(
            *cache
                .get(&1, || {
                    calls += 1;
                    Ok(6)
                })
                .unwrap(),
            5
        );
        assert_eq!(calls, 0);
        assert!(cache.get(&2, || Err(Error::Numerical("x".into()))).is_err());
        let again = cache.get(&2, || Ok(1)).unwrap_err();
        assert_eq!(again.exit_code(), 4);
    }

    #[test]
    fn concat_halves_are_unit_and_missing_halves_zero() {
        let mut c = EmbeddingSpace::new("A:tfidf", 2, Alignment::Shared, Provenance::new("t"));
        c.insert("x", vec![3.0, 4.0]).unwrap();
        c.insert("y", vec![0.0, 2.0]).unwrap();
        let mut x = EmbeddingSpace::new("A:skill2vec", 1, Alignment::PlatformLocal, Provenance::new("t"));
        x.insert("x", vec![-2.0]).unwrap();
        let out = concat(&c, &x, Alignment::PlatformLocal).unwrap();
        assert_eq!(out.get("x").unwrap(), &[0.6, 0.8, -1.0]);
        assert_eq!(out.get("y").unwrap(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn shared_models_skip_translation_and_local_models_translate() {
        let cfg = config(r#"[{"representation": "tfidf"}, {"representation": "skill2vec"}]"#);
        let data = super::super::ingest(&cfg).unwrap();
        let ws = Workspace::new(&cfg, &data.corpora);
        let tfidf = PipelineModel::new(&ws, "tfidf", [Representation::Tfidf; 2], 0);
        let built = tfidf.build(&Params::new(), &EquivalenceSet::default()).unwrap();
        assert!(built.translation.is_none());
        let s2v = PipelineModel::new(&ws, "s2v", [Representation::Skill2vec; 2], 1);
        let p = s2v.grid()[0].clone();
        let built = s2v.build(&p, &data.truth.reversed()).unwrap();
        let t = built.translation.unwrap();
        assert_eq!(t.source_space_name, "B:skill2vec");
        assert_eq!(built.src.alignment, Alignment::Shared);
    }
}
