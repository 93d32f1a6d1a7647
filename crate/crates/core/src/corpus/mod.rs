//! Platform datasets: response logs, problem texts, skill sequences, and
//! labeled cross-platform equivalences.

mod equivalence;
mod load;
mod preprocess;
mod sequences;
mod synth;
mod text;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use equivalence::{EquivalenceSet, Link, Target, NONE_LITERAL};
pub use load::{
    load_problem_texts, load_response_logs, read_problem_texts, read_response_logs, write_problem_texts,
    write_response_logs, LoadedLog, LogSchema, ProblemTexts, TimeFormat,
};
pub use preprocess::{preprocess, PreprocessOptions};
pub use sequences::build_skill_sequences;
pub use synth::{generate_synthetic_pair, SynthConfig, SynthPair, SynthPlatform};
pub use text::{clean_tokens, tokenize, StopWords};

/// Microseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub student_id: String,
    pub problem_id: String,
    pub skill_ids: Vec<String>,
    pub start_time: Timestamp,
    /// Zero-based data row in the source file; breaks start-time ties.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Problem {
    pub problem_id: String,
    pub raw_text: String,
    /// Lowercase tokens without stop words. Empty until [`preprocess`] runs.
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlatformCorpus {
    pub platform_name: String,
    pub skills: BTreeSet<String>,
    pub problems: BTreeMap<String, Problem>,
    pub skill_to_problems: BTreeMap<String, BTreeSet<String>>,
    pub interactions: Vec<Interaction>,
    pub sequences: Vec<Vec<String>>,
    /// Problem-to-skill links that come with the problem texts rather than
    /// the response log (content-only platforms).
    pub text_links: BTreeMap<String, Vec<String>>,
}

impl PlatformCorpus {
    /// Assembles a corpus from loaded parts. Skills and problem links come
    /// from the interactions plus any links carried by the texts.
    pub fn new(name: impl Into<String>, interactions: Vec<Interaction>, texts: ProblemTexts) -> Self {
        let mut corpus = PlatformCorpus {
            platform_name: name.into(),
            interactions,
            text_links: texts.skills,
            ..Default::default()
        };
        for (id, text) in texts.texts {
            corpus.problems.insert(
                id.clone(),
                Problem {
                    problem_id: id,
                    raw_text: text,
                    tokens: Vec::new(),
                },
            );
        }
        corpus.rebuild_index();
        corpus
    }

    /// Recomputes `skills` and `skill_to_problems`, adding empty problems for
    /// ids that only appear in the log.
    pub(crate) fn rebuild_index(&mut self) {
        self.skills.clear();
        self.skill_to_problems.clear();
        let links = self
            .interactions
            .iter()
            .flat_map(|i| i.skill_ids.iter().map(move |s| (s, &i.problem_id)))
            .chain(
                self.text_links
                    .iter()
                    .flat_map(|(p, skills)| skills.iter().map(move |s| (s, p))),
            );
        for (skill, problem) in links {
            self.skills.insert(skill.clone());
            self.skill_to_problems
                .entry(skill.clone())
                .or_default()
                .insert(problem.clone());
        }
        for problems in self.skill_to_problems.values() {
            for p in problems {
                self.problems.entry(p.clone()).or_insert_with(|| Problem {
                    problem_id: p.clone(),
                    ..Default::default()
                });
            }
        }
    }

    /// True when at least one problem carries text.
    pub fn has_content(&self) -> bool {
        self.problems.values().any(|p| !p.raw_text.trim().is_empty())
    }

    /// True when there is a response log to derive sequences from.
    pub fn has_context(&self) -> bool {
        !self.interactions.is_empty()
    }

    /// Number of distinct students with at least one interaction.
    pub fn student_count(&self) -> usize {
        self.interactions
            .iter()
            .map(|i| i.student_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Builds and stores the per-student skill sequences.
    pub fn with_sequences(mut self, seed: u64) -> Self {
        self.sequences = build_skill_sequences(&self, seed);
        self
    }

    /// Problems of `skill` whose token list is non-empty.
    pub fn text_problems<'a>(&'a self, skill: &str) -> impl Iterator<Item = &'a Problem> + 'a {
        self.skill_to_problems
            .get(skill)
            .into_iter()
            .flatten()
            .filter_map(|p| self.problems.get(p))
            .filter(|p| !p.tokens.is_empty())
    }
}
