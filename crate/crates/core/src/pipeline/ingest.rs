use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::corpus::{
    generate_synthetic_pair, load_problem_texts, load_response_logs, preprocess, EquivalenceSet, LoadedLog,
    PlatformCorpus, ProblemTexts,
};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Descriptive counts of one preprocessed platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub platform: String,
    pub skills: usize,
    pub problems: usize,
    pub text_problems: usize,
    pub interactions: usize,
    pub students: usize,
    pub sequences: usize,
    pub dropped_without_skill: usize,
}

impl CorpusSummary {
    pub fn of(corpus: &PlatformCorpus, dropped_without_skill: usize) -> CorpusSummary {
        CorpusSummary {
            platform: corpus.platform_name.clone(),
            skills: corpus.skills.len(),
            problems: corpus.problems.len(),
            text_problems: corpus.problems.values().filter(|p| !p.tokens.is_empty()).count(),
            interactions: corpus.interactions.len(),
            students: corpus.student_count(),
            sequences: corpus.sequences.len(),
            dropped_without_skill,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub platforms: Vec<CorpusSummary>,
    pub pairs: usize,
    pub none_source: usize,
    pub none_destination: usize,
    /// Labeled rows whose skill did not survive preprocessing.
    pub dropped_links: usize,
}

/// Both preprocessed platforms with their sequences and the labeled
/// equivalences from the first to the second.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub corpora: [PlatformCorpus; 2],
    pub truth: EquivalenceSet,
    pub summary: IngestSummary,
}

impl Dataset {
    pub fn names(&self) -> [&str; 2] {
        [&self.corpora[0].platform_name, &self.corpora[1].platform_name]
    }
}

/// Keeps the links whose skills exist on their platform.
pub fn restrict_truth(truth: &EquivalenceSet, src: &PlatformCorpus, dst: &PlatformCorpus) -> (EquivalenceSet, usize) {
    let mut out = EquivalenceSet::default();
    let mut dropped = 0;
    for (s, d) in &truth.pairs {
        if src.skills.contains(s) && dst.skills.contains(d) {
            out.pairs.insert((s.clone(), d.clone()));
        } else {
            dropped += 1;
        }
    }
    for s in &truth.none_src {
        if src.skills.contains(s) {
            out.none_src.insert(s.clone());
        } else {
            dropped += 1;
        }
    }
    for d in &truth.none_dst {
        if dst.skills.contains(d) {
            out.none_dst.insert(d.clone());
        } else {
            dropped += 1;
        }
    }
    (out, dropped)
}

fn load_platform(cfg: &ExperimentConfig, index: usize) -> Result<(PlatformCorpus, usize)> {
    let source = &cfg.data.platforms[index];
    let log = match &source.logs {
        Some(path) => load_response_logs(path, &source.log_schema()).map_err(|e| at_path(e, path))?,
        None => LoadedLog::default(),
    };
    let texts = match &source.texts {
        Some(path) => load_problem_texts(path).map_err(|e| at_path(e, path))?,
        None => ProblemTexts::default(),
    };
    Ok((
        PlatformCorpus::new(&source.name, log.interactions, texts),
        log.dropped_without_skill,
    ))
}

fn at_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::Data(format!("{}: {io}", path.display())),
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

/// Loads or generates both platforms, preprocesses them, builds the skill
/// sequences, and restricts the labels to surviving skills.
pub fn ingest(cfg: &ExperimentConfig) -> Result<Dataset> {
    let synthetic = cfg.data.synthetic.is_some();
    let (raw, truth, dropped) = match &cfg.data.synthetic {
        Some(s) => {
            let pair = generate_synthetic_pair(s, cfg.seed)?;
            ([pair.a, pair.b], pair.truth, [0, 0])
        }
        None => {
            let (a, da) = load_platform(cfg, 0)?;
            let (b, db) = load_platform(cfg, 1)?;
            let path = cfg.data.pairs.as_ref().expect("validated");
            let truth = EquivalenceSet::load(path, cfg.data.pairs_delimiter as u8).map_err(|e| at_path(e, path))?;
            ([a, b], truth, [da, db])
        }
    };
    let mut corpora = Vec::with_capacity(2);
    for (i, corpus) in raw.into_iter().enumerate() {
        let opts = cfg.preprocess_for(i).options(synthetic)?;
        let cleaned = preprocess(&corpus, &opts)?;
        let seed = derive_seed(cfg.seed, &format!("sequences/{}", cleaned.platform_name));
        corpora.push(cleaned.with_sequences(seed));
    }
    let corpora: [PlatformCorpus; 2] = corpora.try_into().expect("two platforms");
    let (truth, dropped_links) = restrict_truth(&truth, &corpora[0], &corpora[1]);
    if dropped_links > 0 {
        log::warn!("{dropped_links} labeled link(s) refer to skills removed by preprocessing");
    }
    if truth.pairs.is_empty() {
        return Err(Error::Data("no labeled skill pair survives preprocessing".into()));
    }
    let summary = IngestSummary {
        platforms: corpora
            .iter()
            .zip(dropped)
            .map(|(c, d)| CorpusSummary::of(c, d))
            .collect(),
        pairs: truth.pairs.len(),
        none_source: truth.none_src.len(),
        none_destination: truth.none_dst.len(),
        dropped_links,
    };
    Ok(Dataset {
        corpora,
        truth,
        summary,
    })
}
