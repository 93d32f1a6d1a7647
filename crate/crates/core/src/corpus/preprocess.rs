use std::collections::{BTreeMap, BTreeSet};

use super::{clean_tokens, PlatformCorpus, StopWords};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOptions {
    /// Skills with fewer interactions are removed. Ignored for platforms
    /// without a response log.
    pub min_responses_per_skill: usize,
    /// Keep only interactions on problems tagged with exactly one skill.
    pub single_skill_only: bool,
    pub stop_words: StopWords,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            min_responses_per_skill: 1000,
            single_skill_only: false,
            stop_words: StopWords::english(),
        }
    }
}

/// Applies the single-skill filter, then the response-count threshold, then
/// cleans problem text. Idempotent for fixed options.
pub fn preprocess(corpus: &PlatformCorpus, options: &PreprocessOptions) -> Result<PlatformCorpus> {
    let mut interactions: Vec<_> = corpus
        .interactions
        .iter()
        .filter(|i| !i.skill_ids.is_empty())
        .cloned()
        .collect();

    if options.single_skill_only {
        let mut problem_skills: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for i in &interactions {
            problem_skills
                .entry(&i.problem_id)
                .or_default()
                .extend(i.skill_ids.iter().map(String::as_str));
        }
        let multi: BTreeSet<String> = problem_skills
            .into_iter()
            .filter(|(_, s)| s.len() > 1)
            .map(|(p, _)| p.to_string())
            .collect();
        interactions.retain(|i| i.skill_ids.len() == 1 && !multi.contains(&i.problem_id));
    }

    let mut text_links = corpus.text_links.clone();
    if corpus.has_context() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for i in &interactions {
            let distinct: BTreeSet<&str> = i.skill_ids.iter().map(String::as_str).collect();
            for s in distinct {
                *counts.entry(s).or_default() += 1;
            }
        }
        let kept: BTreeSet<String> = counts
            .into_iter()
            .filter(|&(_, c)| c >= options.min_responses_per_skill)
            .map(|(s, _)| s.to_string())
            .collect();
        for i in interactions.iter_mut() {
            i.skill_ids.retain(|s| kept.contains(s));
        }
        interactions.retain(|i| !i.skill_ids.is_empty());
        for skills in text_links.values_mut() {
            skills.retain(|s| kept.contains(s));
        }
        text_links.retain(|_, s| !s.is_empty());
    }

    let mut out = PlatformCorpus {
        platform_name: corpus.platform_name.clone(),
        interactions,
        text_links,
        ..Default::default()
    };
    out.rebuild_index();
    if out.skills.is_empty() {
        return Err(Error::Data(format!(
            "platform `{}`: every skill was filtered out during preprocessing",
            corpus.platform_name
        )));
    }
    let linked: BTreeSet<&String> = out.skill_to_problems.values().flatten().collect();
    out.problems = corpus
        .problems
        .iter()
        .filter(|(id, _)| linked.contains(id))
        .map(|(id, p)| {
            let mut p = p.clone();
            p.tokens = clean_tokens(&p.raw_text, &options.stop_words);
            (id.clone(), p)
        })
        .collect();
    // ids seen only in the log have no text record
    out.rebuild_index();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Interaction, ProblemTexts, Timestamp};

    fn interaction(student: &str, problem: &str, skills: &[&str], t: i64) -> Interaction {
        Interaction {
            student_id: student.into(),
            problem_id: problem.into(),
            skill_ids: skills.iter().map(|s| s.to_string()).collect(),
            start_time: Timestamp(t),
            row: t as usize,
        }
    }

    fn opts(min: usize, single: bool) -> PreprocessOptions {
        PreprocessOptions {
            min_responses_per_skill: min,
            single_skill_only: single,
            stop_words: StopWords::from_words(["the", "of"]),
        }
    }

    #[test]
    fn threshold_boundary() {
        let mut rows: Vec<_> = (0..999).map(|t| interaction("s", "p1", &["A"], t)).collect();
        rows.extend((0..1000).map(|t| interaction("s", "p2", &["B"], 1000 + t)));
        let c = PlatformCorpus::new("x", rows, ProblemTexts::default());
        let out = preprocess(&c, &opts(1000, false)).unwrap();
        assert_eq!(out.skills.iter().collect::<Vec<_>>(), vec!["B"]);
        assert_eq!(out.interactions.len(), 1000);
        assert!(!out.problems.contains_key("p1"));
    }

    #[test]
    fn single_skill_filter_drops_multi_skill_rows() {
        let rows = vec![
            interaction("s", "p1", &["A", "B"], 0),
            interaction("s", "p2", &["A"], 1),
        ];
        let c = PlatformCorpus::new("x", rows, ProblemTexts::default());
        let out = preprocess(&c, &opts(0, true)).unwrap();
        assert_eq!(out.interactions.len(), 1);
        assert_eq!(out.interactions[0].problem_id, "p2");
    }

    #[test]
    fn cleans_text_and_is_idempotent() {
        let mut texts = ProblemTexts::default();
        texts.texts.insert("p1".into(), "The Area of THE Triangle".into());
        let rows = vec![interaction("s", "p1", &["A"], 0), interaction("t", "p1", &["A"], 1)];
        let c = PlatformCorpus::new("x", rows, texts);
        let once = preprocess(&c, &opts(2, true)).unwrap();
        assert_eq!(once.problems["p1"].tokens, vec!["area", "triangle"]);
        let twice = preprocess(&once, &opts(2, true)).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn everything_filtered_is_an_error() {
        let c = PlatformCorpus::new("x", vec![interaction("s", "p", &["A"], 0)], ProblemTexts::default());
        assert!(matches!(preprocess(&c, &opts(5, false)), Err(Error::Data(_))));
    }
}
