//! Experiment configuration: a JSON document with defaults for everything
//! but the data source.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::ExportPrecision;
use crate::corpus::{LogSchema, PreprocessOptions, StopWords, SynthConfig};
use crate::error::{Error, Result};
use crate::evaluate::{CvOptions, FoldStrategy, NoneMode, Params};
use crate::skipgram::SkipgramHyper;
use crate::translate::TranslationOptions;

/// How one platform's skills are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Concat with content and context, otherwise whichever is available.
    Auto,
    BagOfWords,
    Tfidf,
    Content2vec,
    Skill2vec,
    Tamf,
    Concat,
}

impl Representation {
    pub fn needs_content(self) -> bool {
        matches!(
            self,
            Representation::BagOfWords
                | Representation::Tfidf
                | Representation::Content2vec
                | Representation::Tamf
                | Representation::Concat
        )
    }

    pub fn needs_context(self) -> bool {
        matches!(
            self,
            Representation::Skill2vec | Representation::Tamf | Representation::Concat
        )
    }

    /// Built over a basis shared by both platforms.
    pub fn is_shared_content(self) -> bool {
        matches!(
            self,
            Representation::BagOfWords | Representation::Tfidf | Representation::Content2vec
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Representation::Auto => "auto",
            Representation::BagOfWords => "bag_of_words",
            Representation::Tfidf => "tfidf",
            Representation::Content2vec => "content2vec",
            Representation::Skill2vec => "skill2vec",
            Representation::Tamf => "tamf",
            Representation::Concat => "concat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Defaults to 1000 for logs read from files and 0 for synthetic data.
    #[serde(default)]
    pub min_responses_per_skill: Option<usize>,
    #[serde(default)]
    pub single_skill_only: bool,
    /// `english` (bundled list), `none`, or a path to a word list.
    #[serde(default = "default_stop_words")]
    pub stop_words: String,
}

fn default_stop_words() -> String {
    "english".into()
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_responses_per_skill: None,
            single_skill_only: false,
            stop_words: default_stop_words(),
        }
    }
}

impl PreprocessConfig {
    pub fn options(&self, synthetic: bool) -> Result<PreprocessOptions> {
        let stop_words = match self.stop_words.as_str() {
            "english" => StopWords::english(),
            "none" => StopWords::none(),
            path => {
                StopWords::load(Path::new(path)).map_err(|e| Error::Config(format!("stop-word list `{path}`: {e}")))?
            }
        };
        Ok(PreprocessOptions {
            min_responses_per_skill: self.min_responses_per_skill.unwrap_or(if synthetic { 0 } else { 1000 }),
            single_skill_only: self.single_skill_only,
            stop_words,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaPreset {
    Default,
    Assistments2012,
    KddCognitiveTutor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformSource {
    pub name: String,
    #[serde(default)]
    pub logs: Option<PathBuf>,
    #[serde(default)]
    pub texts: Option<PathBuf>,
    #[serde(default)]
    pub schema_preset: Option<SchemaPreset>,
    /// Overrides the preset field by field when given.
    #[serde(default)]
    pub schema: Option<LogSchema>,
    #[serde(default)]
    pub preprocess: Option<PreprocessConfig>,
}

impl PlatformSource {
    pub fn log_schema(&self) -> LogSchema {
        if let Some(s) = &self.schema {
            return s.clone();
        }
        match self.schema_preset.unwrap_or(SchemaPreset::Default) {
            SchemaPreset::Default => LogSchema::default(),
            SchemaPreset::Assistments2012 => LogSchema::assistments_2012(),
            SchemaPreset::KddCognitiveTutor => LogSchema::kdd_cognitive_tutor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub synthetic: Option<SynthConfig>,
    #[serde(default)]
    pub platforms: Vec<PlatformSource>,
    /// Equivalences from the first platform to the second.
    #[serde(default)]
    pub pairs: Option<PathBuf>,
    #[serde(default = "default_delimiter")]
    pub pairs_delimiter: char,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub name: Option<String>,
    /// Applies to every platform not listed in `per_platform`.
    #[serde(default)]
    pub representation: Option<Representation>,
    #[serde(default)]
    pub per_platform: BTreeMap<String, Representation>,
}

impl ModelSpec {
    pub fn uniform(r: Representation) -> ModelSpec {
        ModelSpec {
            representation: Some(r),
            ..Default::default()
        }
    }

    pub fn representation_for(&self, platform: &str) -> Representation {
        self.per_platform
            .get(platform)
            .copied()
            .or(self.representation)
            .unwrap_or(Representation::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Skill2vecGrid {
    pub vector_dimension: Vec<usize>,
    pub window_size: Vec<usize>,
}

impl Default for Skill2vecGrid {
    fn default() -> Self {
        Skill2vecGrid {
            vector_dimension: vec![50, 100],
            window_size: vec![5, 10, 20],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Content2vecGrid {
    pub vector_dimension: Vec<usize>,
    pub window_size: Vec<usize>,
    pub min_count: Vec<usize>,
}

impl Default for Content2vecGrid {
    fn default() -> Self {
        Content2vecGrid {
            vector_dimension: vec![50, 100],
            window_size: vec![10, 20],
            min_count: vec![30, 50],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TamfGrid {
    pub k: Vec<usize>,
    pub lambda: Vec<f64>,
}

impl Default for TamfGrid {
    fn default() -> Self {
        TamfGrid {
            k: vec![25, 50],
            lambda: vec![0.1, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub skill2vec: Skill2vecGrid,
    pub content2vec: Content2vecGrid,
    pub tamf: TamfGrid,
}

fn cartesian(axes: &[(&str, Vec<f64>)]) -> Vec<Params> {
    let mut out = vec![Params::new()];
    for (name, values) in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(name.to_string(), *v);
                    q
                })
            })
            .collect();
    }
    out
}

fn floats(v: &[usize]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

impl Grids {
    pub fn skill2vec_params(&self) -> Vec<Params> {
        cartesian(&[
            ("vector_dimension", floats(&self.skill2vec.vector_dimension)),
            ("window_size", floats(&self.skill2vec.window_size)),
        ])
    }

    pub fn content2vec_params(&self) -> Vec<Params> {
        cartesian(&[
            ("vector_dimension", floats(&self.content2vec.vector_dimension)),
            ("window_size", floats(&self.content2vec.window_size)),
            ("min_count", floats(&self.content2vec.min_count)),
        ])
    }

    pub fn tamf_params(&self) -> Vec<Params> {
        cartesian(&[("k", floats(&self.tamf.k)), ("lambda", self.tamf.lambda.clone())])
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: &[usize]| {
            if v.is_empty() || v.contains(&0) {
                Err(Error::Config(format!(
                    "grid `{name}` must be non-empty with values ≥ 1"
                )))
            } else {
                Ok(())
            }
        };
        positive("skill2vec.vector_dimension", &self.skill2vec.vector_dimension)?;
        positive("skill2vec.window_size", &self.skill2vec.window_size)?;
        positive("content2vec.vector_dimension", &self.content2vec.vector_dimension)?;
        positive("content2vec.window_size", &self.content2vec.window_size)?;
        if self.content2vec.min_count.is_empty() {
            return Err(Error::Config("grid `content2vec.min_count` must be non-empty".into()));
        }
        positive("tamf.k", &self.tamf.k)?;
        if self.tamf.lambda.is_empty() || self.tamf.lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::Config(
                "grid `tamf.lambda` must be non-empty with finite values ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// Text features used inside Concat and TAMF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentFeatures {
    Content2vec,
    Tfidf,
    BagOfWords,
}

impl ContentFeatures {
    pub fn representation(self) -> Representation {
        match self {
            ContentFeatures::Content2vec => Representation::Content2vec,
            ContentFeatures::Tfidf => Representation::Tfidf,
            ContentFeatures::BagOfWords => Representation::BagOfWords,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepresentConfig {
    /// Pretrained word vectors; replaces own Content2vec training when set.
    pub external_word_vectors: Option<PathBuf>,
    pub content_features: ContentFeatures,
    /// PPMI window for TAMF.
    pub tamf_window: usize,
    pub tamf_tolerance: f64,
    pub tamf_max_iterations: usize,
}

impl Default for RepresentConfig {
    fn default() -> Self {
        RepresentConfig {
            external_word_vectors: None,
            content_features: ContentFeatures::Content2vec,
            tamf_window: 5,
            tamf_tolerance: 1e-4,
            tamf_max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directions {
    #[default]
    Both,
    Forward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub folds: usize,
    pub inner_folds: usize,
    pub k: usize,
    pub none_mode: NoneMode,
    pub strategy: FoldStrategy,
    pub threshold_grid: Vec<f64>,
    pub directions: Directions,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let cv = CvOptions::default();
        EvaluationConfig {
            folds: cv.folds,
            inner_folds: cv.inner_folds,
            k: cv.k,
            none_mode: cv.none_mode,
            strategy: cv.strategy,
            threshold_grid: cv.threshold_grid,
            directions: Directions::Both,
        }
    }
}

impl EvaluationConfig {
    pub fn cv_options(&self, seed: u64, direction: &str) -> CvOptions {
        CvOptions {
            folds: self.folds,
            inner_folds: self.inner_folds,
            k: self.k,
            seed,
            none_mode: self.none_mode,
            strategy: self.strategy,
            threshold_grid: self.threshold_grid.clone(),
            direction: direction.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub enabled: bool,
    pub clusters: usize,
    pub max_iterations: usize,
    pub precision: ExportPrecision,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            enabled: true,
            clusters: 20,
            max_iterations: 300,
            precision: ExportPrecision::Significant6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    /// Single worker, for runs that must be reproducible byte for byte.
    #[serde(default)]
    pub strict: bool,
    pub data: DataConfig,
    #[serde(default = "default_models")]
    pub models: Vec<ModelSpec>,
    /// Training settings shared by every skip-gram run; dimension, window and
    /// min count come from the grids.
    #[serde(default)]
    pub skipgram: SkipgramHyper,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub represent: RepresentConfig,
    #[serde(default)]
    pub translation: TranslationOptions,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_models() -> Vec<ModelSpec> {
    vec![ModelSpec::uniform(Representation::Auto)]
}

/// What a platform provides, as declared by the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Availability {
    pub content: bool,
    pub context: bool,
}

impl ExperimentConfig {
    /// Parses JSON text. Relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<ExperimentConfig> {
        if text.trim().is_empty() {
            return Err(Error::Config("empty configuration".into()));
        }
        let mut cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in &mut self.data.platforms {
            p.logs.as_mut().map(fix);
            p.texts.as_mut().map(fix);
            if let Some(pre) = &mut p.preprocess {
                resolve_stop_words(pre, base);
            }
        }
        resolve_stop_words(&mut self.data.preprocess, base);
        self.data.pairs.as_mut().map(fix);
        self.represent.external_word_vectors.as_mut().map(fix);
    }

    pub fn platform_names(&self) -> [String; 2] {
        match &self.data.synthetic {
            Some(s) => [s.a.name.clone(), s.b.name.clone()],
            None => [self.data.platforms[0].name.clone(), self.data.platforms[1].name.clone()],
        }
    }

    pub fn availability(&self) -> [Availability; 2] {
        match &self.data.synthetic {
            Some(_) => {
                [Availability {
                    content: true,
                    context: true,
                }; 2]
            }
            None => [0, 1].map(|i| {
                let p = &self.data.platforms[i];
                Availability {
                    content: p.texts.is_some(),
                    context: p.logs.is_some(),
                }
            }),
        }
    }

    pub fn preprocess_for(&self, platform: usize) -> &PreprocessConfig {
        self.data
            .platforms
            .get(platform)
            .and_then(|p| p.preprocess.as_ref())
            .unwrap_or(&self.data.preprocess)
    }

    /// Model representations per platform with `auto` resolved.
    pub fn resolved_models(&self) -> Result<Vec<(String, [Representation; 2])>> {
        let names = self.platform_names();
        let avail = self.availability();
        let mut out: Vec<(String, [Representation; 2])> = Vec::new();
        for spec in &self.models {
            if let Some(unknown) = spec.per_platform.keys().find(|k| !names.contains(k)) {
                return Err(Error::Config(format!("model lists unknown platform `{unknown}`")));
            }
            let reps = [0, 1].map(|i| {
                let r = spec.representation_for(&names[i]);
                match (r, avail[i].content, avail[i].context) {
                    (Representation::Auto, true, true) => Representation::Concat,
                    (Representation::Auto, true, false) => Representation::Content2vec,
                    (Representation::Auto, _, _) => Representation::Skill2vec,
                    (r, _, _) => r,
                }
            });
            for i in 0..2 {
                let (r, a) = (reps[i], avail[i]);
                if (r.needs_content() && !a.content) || (r.needs_context() && !a.context) {
                    let need = match (r.needs_content(), r.needs_context()) {
                        (true, true) => "both content (problem texts) and context (response logs)",
                        (true, false) => "content (problem texts)",
                        _ => "context (response logs)",
                    };
                    return Err(Error::Config(format!(
                        "representation `{}` for platform `{}` requires {need}, which the configured data does not provide",
                        r.label(),
                        names[i]
                    )));
                }
            }
            let name = spec.name.clone().unwrap_or_else(|| {
                if reps[0] == reps[1] {
                    reps[0].label().to_string()
                } else {
                    format!("{}-{}", reps[0].label(), reps[1].label())
                }
            });
            if out.iter().any(|(n, _)| *n == name) {
                return Err(Error::Config(format!("duplicate model name `{name}`")));
            }
            out.push((name, reps));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.synthetic, self.data.platforms.len()) {
            (Some(s), 0) => {
                s.validate()?;
                if self.data.pairs.is_some() {
                    return Err(Error::Config("`data.pairs` is not used with synthetic data".into()));
                }
            }
            (Some(_), _) => {
                return Err(Error::Config(
                    "give either `data.synthetic` or `data.platforms`, not both".into(),
                ))
            }
            (None, 2) => {
                let pairs = self
                    .data
                    .pairs
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing required path `data.pairs`".into()))?;
                require_file(pairs, "data.pairs")?;
                let [a, b] = [&self.data.platforms[0], &self.data.platforms[1]];
                if a.name == b.name || a.name.is_empty() || b.name.is_empty() {
                    return Err(Error::Config("platform names must be distinct and non-empty".into()));
                }
                for p in [a, b] {
                    if p.logs.is_none() && p.texts.is_none() {
                        return Err(Error::Config(format!(
                            "platform `{}` needs `logs`, `texts`, or both",
                            p.name
                        )));
                    }
                    if let Some(l) = &p.logs {
                        require_file(l, &format!("{}.logs", p.name))?;
                    }
                    if let Some(t) = &p.texts {
                        require_file(t, &format!("{}.texts", p.name))?;
                    }
                }
            }
            (None, 0) => return Err(Error::Config("missing `data.synthetic` or `data.platforms`".into())),
            (None, n) => {
                return Err(Error::Config(format!(
                    "`data.platforms` needs exactly 2 entries, got {n}"
                )))
            }
        }
        if !self.data.pairs_delimiter.is_ascii() {
            return Err(Error::Config(
                "`data.pairs_delimiter` must be a single ASCII character".into(),
            ));
        }
        if self.models.is_empty() {
            return Err(Error::Config("`models` must not be empty".into()));
        }
        self.resolved_models()?;
        self.grids.validate()?;
        SkipgramHyper {
            min_count: 0,
            ..self.skipgram.clone()
        }
        .validate()?;
        self.translation.validate()?;
        self.evaluation.cv_options(self.seed, "").validate()?;
        if self.represent.tamf_window == 0 || self.represent.tamf_max_iterations == 0 {
            return Err(Error::Config(
                "`represent.tamf_window` and `tamf_max_iterations` must be ≥ 1".into(),
            ));
        }
        if let Some(p) = &self.represent.external_word_vectors {
            require_file(p, "represent.external_word_vectors")?;
        }
        if self.analysis.enabled && self.analysis.clusters == 0 {
            return Err(Error::Config("`analysis.clusters` must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config `{}`: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::from_json(&text, base)
    }
}

fn resolve_stop_words(pre: &mut PreprocessConfig, base: &Path) {
    if !matches!(pre.stop_words.as_str(), "english" | "none") && Path::new(&pre.stop_words).is_relative() {
        pre.stop_words = base.join(&pre.stop_words).to_string_lossy().into_owned();
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{what}`: file `{}` not found", path.display())))
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(text, Path::new("/nonexistent"))
    }

    const MINIMAL: &str = r#"{"data": {"synthetic": {}}}"#;

    #[test]
    fn minimal_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.evaluation.folds, 10);
        assert_eq!(c.evaluation.k, 5);
        assert_eq!(c.evaluation.none_mode, NoneMode::Exclude);
        assert_eq!(c.resolved_models().unwrap()[0].1, [Representation::Concat; 2]);
        assert_eq!(c.output_dir, Path::new("/nonexistent/out"));
        assert_eq!(c.grids.skill2vec_params().len(), 6);
        assert_eq!(c.grids.content2vec_params().len(), 8);
        assert_eq!(c.grids.tamf_params().len(), 6);
    }

    #[test]
    fn parse_failures_are_config_errors() {
        for text in [
            "",
            "   ",
            "{",
            r#"{"data": {"synthetic": {}}, "fold": 3}"#,
            r#"{"seed": 1}"#,
        ] {
            let err = parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
        let err = parse(r#"{"data": {"synthetic": {}}, "fold": 3}"#).unwrap_err();
        assert!(err.to_string().contains("`fold`"), "{err}");
    }

    fn files_config(dir: &Path, texts_for_a: bool) -> String {
        std::fs::write(dir.join("a.csv"), "x").unwrap();
        std::fs::write(dir.join("a.jsonl"), "x").unwrap();
        std::fs::write(dir.join("b.csv"), "x").unwrap();
        std::fs::write(dir.join("pairs.csv"), "x").unwrap();
        let texts = if texts_for_a { r#", "texts": "a.jsonl""# } else { "" };
        format!(
            r#"{{"data": {{"platforms": [{{"name": "A", "logs": "a.csv"{texts}}}, {{"name": "B", "logs": "b.csv"}}],
               "pairs": "pairs.csv"}}, "models": [{{"representation": "tamf"}}]}}"#
        )
    }

    #[test]
    fn tamf_on_context_only_platform_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let text = files_config(dir.path(), true);
        let err = ExperimentConfig::from_json(&text, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("requires both content"), "{err}");
        assert!(err.to_string().contains("`B`"), "{err}");
    }

    #[test]
    fn auto_follows_availability_and_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let text = files_config(dir.path(), true).replace(r#""representation": "tamf""#, r#""representation": "auto""#);
        let c = ExperimentConfig::from_json(&text, dir.path()).unwrap();
        assert_eq!(
            c.resolved_models().unwrap()[0].1,
            [Representation::Concat, Representation::Skill2vec]
        );
        assert_eq!(c.data.pairs.as_deref(), Some(dir.path().join("pairs.csv").as_path()));
        let missing = text.replace("b.csv", "nope.csv");
        let err = ExperimentConfig::from_json(&missing, dir.path()).unwrap_err();
        assert!(err.to_string().contains("nope.csv"));
    }

    #[test]
    fn asymmetric_models_and_unknown_platform() {
        let c = parse(
            r#"{"data": {"synthetic": {}}, "models": [
                {"per_platform": {"A": "tamf", "B": "skill2vec"}},
                {"name": "words", "representation": "tfidf"}]}"#,
        )
        .unwrap();
        let m = c.resolved_models().unwrap();
        assert_eq!(m[0].0, "tamf-skill2vec");
        assert_eq!(m[1].0, "words");
        assert!(parse(r#"{"data": {"synthetic": {}}, "models": [{"per_platform": {"Z": "tfidf"}}]}"#).is_err());
    }

    #[test]
    fn synthetic_preprocess_default_keeps_everything() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.preprocess_for(0).options(true).unwrap().min_responses_per_skill, 0);
        assert_eq!(
            c.preprocess_for(0).options(false).unwrap().min_responses_per_skill,
            1000
        );
    }
}
