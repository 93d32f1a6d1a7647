//! Synthetic platform pairs built from shared latent skills.
//!
//! Each platform splits every shared latent skill into `granularity` skills
//! (round-robin, so a factor of 1.2 gives some latents two skills). Problem
//! text mixes latent-topic words, skill-specific words, and Zipf-distributed
//! background words. Students move between latent topics along a relatedness
//! graph shared by both platforms, practising a few skills of the current topic
//! per session. Untranslatable skills get platform-private topics.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    write_problem_texts, write_response_logs, EquivalenceSet, Interaction, LogSchema, PlatformCorpus, ProblemTexts,
    Timestamp,
};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthPlatform {
    pub name: String,
    /// Skills per shared latent skill; at least 1.
    pub granularity: f64,
    pub students: usize,
    pub sessions_per_student: usize,
    pub session_length: usize,
    pub problems_per_skill: usize,
    /// Chance that an interaction is also tagged with a sibling skill.
    pub multi_skill_fraction: f64,
}

impl Default for SynthPlatform {
    fn default() -> Self {
        SynthPlatform {
            name: "A".into(),
            granularity: 1.0,
            students: 200,
            sessions_per_student: 12,
            session_length: 4,
            problems_per_skill: 4,
            multi_skill_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub latent_skills: usize,
    pub a: SynthPlatform,
    pub b: SynthPlatform,
    pub vocabulary_size: usize,
    pub topic_words: usize,
    pub skill_words: usize,
    pub tokens_per_problem: usize,
    pub topic_focus: f64,
    pub skill_focus: f64,
    pub related_topics: usize,
    pub related_probability: f64,
    /// Fraction of each platform's skill count added as untranslatable skills.
    pub none_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            latent_skills: 40,
            a: SynthPlatform::default(),
            b: SynthPlatform {
                name: "B".into(),
                ..Default::default()
            },
            vocabulary_size: 3000,
            topic_words: 10,
            skill_words: 3,
            tokens_per_problem: 20,
            topic_focus: 0.45,
            skill_focus: 0.15,
            related_topics: 3,
            related_probability: 0.7,
            none_fraction: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.latent_skills == 0 {
            return bad("latent_skills must be at least 1".into());
        }
        if self.vocabulary_size < self.topic_words.max(self.skill_words).max(1) {
            return bad("vocabulary_size smaller than the per-topic word count".into());
        }
        if self.tokens_per_problem == 0 {
            return bad("tokens_per_problem must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&(self.topic_focus + self.skill_focus))
            || self.topic_focus < 0.0
            || self.skill_focus < 0.0
        {
            return bad("topic_focus + skill_focus must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.none_fraction) {
            return bad("none_fraction must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.related_probability) {
            return bad("related_probability must lie in [0, 1]".into());
        }
        for p in [&self.a, &self.b] {
            if !(p.granularity.is_finite() && p.granularity >= 1.0) {
                return bad(format!("platform `{}`: granularity must be >= 1", p.name));
            }
            if p.students == 0 || p.sessions_per_student == 0 || p.session_length == 0 {
                return bad(format!("platform `{}`: no interactions would be generated", p.name));
            }
            if p.problems_per_skill == 0 {
                return bad(format!("platform `{}`: problems_per_skill must be >= 1", p.name));
            }
            if !(0.0..=1.0).contains(&p.multi_skill_fraction) {
                return bad(format!("platform `{}`: multi_skill_fraction outside [0, 1]", p.name));
            }
        }
        if self.a.name == self.b.name {
            return bad("platform names must differ".into());
        }
        Ok(())
    }

    /// Number of translatable skills generated for a platform.
    pub fn matched_skills(&self, platform: &SynthPlatform) -> usize {
        ((self.latent_skills as f64 * platform.granularity).round() as usize).max(1)
    }

    /// Number of untranslatable skills generated for a platform.
    pub fn none_skills(&self, platform: &SynthPlatform) -> usize {
        let m = self.matched_skills(platform) as f64;
        (self.none_fraction * m - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub a: PlatformCorpus,
    pub b: PlatformCorpus,
    /// Equivalences from platform `a` (source) to platform `b`.
    pub truth: EquivalenceSet,
}

struct World {
    topic_words: Vec<Vec<usize>>,
    related: Vec<Vec<usize>>,
    background: Vec<f64>,
}

fn word(i: usize) -> String {
    format!("w{i:04}")
}

fn sample_cumulative(cumulative: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total = *cumulative.last().unwrap_or(&1.0);
    let u = rng.random::<f64>() * total;
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

fn distinct(rng: &mut ChaCha8Rng, n: usize, amount: usize) -> Vec<usize> {
    index::sample(rng, n, amount.min(n)).into_vec()
}

struct Generated {
    corpus: PlatformCorpus,
    /// Skill ids per shared latent skill.
    by_latent: Vec<Vec<String>>,
    none: Vec<String>,
}

fn generate_platform(cfg: &SynthConfig, platform: &SynthPlatform, world: &World, rng: &mut ChaCha8Rng) -> Generated {
    let latent = cfg.latent_skills;
    let matched = cfg.matched_skills(platform);
    let none = cfg.none_skills(platform);
    let name = &platform.name;

    // topic of every skill; private topics are numbered after the shared ones
    let skill_topic: Vec<usize> = (0..matched)
        .map(|j| j % latent)
        .chain((0..none).map(|k| latent + k))
        .collect();
    let skill_ids: Vec<String> = (0..skill_topic.len()).map(|j| format!("{name}_s{j:03}")).collect();
    let topic_count = latent + none;
    let mut topic_words = world.topic_words.clone();
    let mut related = world.related.clone();
    for _ in 0..none {
        topic_words.push(distinct(rng, cfg.vocabulary_size, cfg.topic_words));
        related.push(distinct(rng, latent, cfg.related_topics.min(latent)));
    }
    let mut topic_skills = vec![Vec::new(); topic_count];
    for (j, &t) in skill_topic.iter().enumerate() {
        topic_skills[t].push(j);
    }
    let skill_words: Vec<Vec<usize>> = (0..skill_ids.len())
        .map(|_| distinct(rng, cfg.vocabulary_size, cfg.skill_words))
        .collect();

    let mut texts = ProblemTexts::default();
    let mut skill_problems = Vec::with_capacity(skill_ids.len());
    for (j, skill) in skill_ids.iter().enumerate() {
        let mut problems = Vec::with_capacity(platform.problems_per_skill);
        for q in 0..platform.problems_per_skill {
            let pid = format!("{name}_p{j:03}_{q}");
            let mut text = String::from("The");
            for _ in 0..cfg.tokens_per_problem {
                let u: f64 = rng.random();
                let w = if u < cfg.topic_focus {
                    *topic_words[skill_topic[j]].choose(rng).expect("topic words")
                } else if u < cfg.topic_focus + cfg.skill_focus && !skill_words[j].is_empty() {
                    *skill_words[j].choose(rng).expect("skill words")
                } else {
                    sample_cumulative(&world.background, rng)
                };
                if rng.random::<f64>() < 0.1 {
                    text.push_str(" of the");
                }
                text.push(' ');
                text.push_str(&word(w));
            }
            text.push('?');
            texts.texts.insert(pid.clone(), text);
            texts.skills.insert(pid.clone(), vec![skill.clone()]);
            problems.push(pid);
        }
        skill_problems.push(problems);
    }

    let mut interactions = Vec::new();
    for s in 0..platform.students {
        let student = format!("{name}_u{s:04}");
        let mut time = 1_600_000_000i64 + s as i64 * 1_000_000;
        let mut topic = rng.random_range(0..topic_count);
        for session in 0..platform.sessions_per_student {
            if session > 0 {
                topic = if rng.random::<f64>() < cfg.related_probability && !related[topic].is_empty() {
                    *related[topic].choose(rng).expect("related")
                } else {
                    rng.random_range(0..topic_count)
                };
            }
            let skills = &topic_skills[topic];
            for _ in 0..platform.session_length {
                let j = *skills.choose(rng).expect("every topic has a skill");
                let problem = skill_problems[j].choose(rng).expect("problems").clone();
                let mut tagged = vec![skill_ids[j].clone()];
                if skills.len() > 1 && rng.random::<f64>() < platform.multi_skill_fraction {
                    let siblings: Vec<usize> = skills.iter().copied().filter(|&o| o != j).collect();
                    let other = *siblings.choose(rng).expect("sibling");
                    tagged.push(skill_ids[other].clone());
                }
                interactions.push(Interaction {
                    student_id: student.clone(),
                    problem_id: problem,
                    skill_ids: tagged,
                    start_time: Timestamp(time * 1_000_000),
                    row: interactions.len(),
                });
                time += 30 + rng.random_range(0..60);
            }
        }
    }

    let mut by_latent = vec![Vec::new(); latent];
    for (j, &t) in skill_topic.iter().enumerate().take(matched) {
        by_latent[t].push(skill_ids[j].clone());
    }
    Generated {
        corpus: PlatformCorpus::new(name.clone(), interactions, texts),
        by_latent,
        none: skill_ids[matched..].to_vec(),
    }
}

/// Generates two platforms over shared latent skills plus their ground
/// truth. Identical `config` and `seed` give identical output.
pub fn generate_synthetic_pair(config: &SynthConfig, seed: u64) -> Result<SynthPair> {
    config.validate()?;
    let mut world_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth/world"));
    let latent = config.latent_skills;
    let topic_words = (0..latent)
        .map(|_| distinct(&mut world_rng, config.vocabulary_size, config.topic_words))
        .collect();
    let related = (0..latent)
        .map(|t| {
            let mut r = distinct(&mut world_rng, latent, (config.related_topics + 1).min(latent));
            r.retain(|&x| x != t);
            r.truncate(config.related_topics);
            r
        })
        .collect();
    let mut acc = 0.0;
    let background = (0..config.vocabulary_size)
        .map(|r| {
            acc += 1.0 / (r as f64 + 1.0);
            acc
        })
        .collect();
    let world = World {
        topic_words,
        related,
        background,
    };

    let mut rng_a = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth/a"));
    let mut rng_b = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth/b"));
    let a = generate_platform(config, &config.a, &world, &mut rng_a);
    let b = generate_platform(config, &config.b, &world, &mut rng_b);

    let mut truth = EquivalenceSet::default();
    for (sa, sb) in a.by_latent.iter().zip(&b.by_latent) {
        for x in sa {
            for y in sb {
                truth.insert_pair(x, y)?;
            }
        }
    }
    for s in &a.none {
        truth.mark_none_src(s)?;
    }
    for s in &b.none {
        truth.mark_none_dst(s)?;
    }
    Ok(SynthPair {
        a: a.corpus,
        b: b.corpus,
        truth,
    })
}

/// Paths written by [`SynthPair::write_files`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFiles {
    pub logs: BTreeMap<String, PathBuf>,
    pub texts: BTreeMap<String, PathBuf>,
    pub pairs: PathBuf,
}

impl SynthPair {
    /// Schema used for generated response logs: the default one, so the
    /// files load without a schema section.
    pub fn log_schema() -> LogSchema {
        LogSchema::default()
    }

    /// Writes `<name>_logs.csv`, `<name>_texts.jsonl` per platform and
    /// `pairs.csv` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<SynthFiles> {
        std::fs::create_dir_all(dir)?;
        let mut files = SynthFiles {
            logs: BTreeMap::new(),
            texts: BTreeMap::new(),
            pairs: dir.join("pairs.csv"),
        };
        for corpus in [&self.a, &self.b] {
            let name = &corpus.platform_name;
            let logs = dir.join(format!("{name}_logs.csv"));
            let texts = dir.join(format!("{name}_texts.jsonl"));
            write_response_logs(corpus, BufWriter::new(File::create(&logs)?), &Self::log_schema())?;
            let mut w = BufWriter::new(File::create(&texts)?);
            write_problem_texts(corpus, &mut w)?;
            w.flush()?;
            files.logs.insert(name.clone(), logs);
            files.texts.insert(name.clone(), texts);
        }
        self.truth.save(&files.pairs, b',')?;
        Ok(files)
    }
}
