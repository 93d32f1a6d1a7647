//! Skill vectors from problem content and from skill sequences.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::corpus::{build_skill_sequences, PlatformCorpus, Problem};
use crate::error::{Error, Result};
use crate::skipgram::{train_skipgram, SkipgramHyper};
use crate::space::{Alignment, EmbeddingSpace, Provenance};

/// Sorted union of the problem tokens of both platforms.
#[derive(Debug, Clone, PartialEq)]
pub struct JointVocabulary {
    pub tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl JointVocabulary {
    pub fn from_corpora(a: &PlatformCorpus, b: &PlatformCorpus) -> JointVocabulary {
        let tokens: BTreeSet<&String> = [a, b]
            .iter()
            .flat_map(|c| c.problems.values())
            .flat_map(|p| p.tokens.iter())
            .collect();
        let tokens: Vec<String> = tokens.into_iter().cloned().collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        JointVocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn position(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }
}

/// The two platforms' spaces built over one shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacePair {
    pub a: EmbeddingSpace,
    pub b: EmbeddingSpace,
    /// Skills or problems that ended up with a zero vector.
    pub warnings: Vec<String>,
}

type SparseVec = Vec<(usize, f64)>;

/// Mean of problem vectors per skill over text-bearing problems. Skills
/// without any get a zero vector and a warning.
fn skill_means<F>(
    corpus: &PlatformCorpus,
    kind: &str,
    dimension: usize,
    provenance: Provenance,
    warnings: &mut Vec<String>,
    mut problem_vector: F,
) -> Result<EmbeddingSpace>
where
    F: FnMut(&Problem) -> SparseVec,
{
    let mut space = EmbeddingSpace::new(
        format!("{}:{kind}", corpus.platform_name),
        dimension,
        Alignment::Shared,
        provenance,
    );
    for skill in &corpus.skills {
        let mut acc = vec![0.0; dimension];
        let mut n = 0usize;
        for problem in corpus.text_problems(skill) {
            for (i, x) in problem_vector(problem) {
                acc[i] += x;
            }
            n += 1;
        }
        if n == 0 {
            warnings.push(format!(
                "{}: skill `{skill}` has no text-bearing problems, zero vector",
                corpus.platform_name
            ));
        } else {
            acc.iter_mut().for_each(|x| *x /= n as f64);
        }
        space.insert(skill.clone(), acc)?;
    }
    Ok(space)
}

fn term_frequencies(problem: &Problem, vocab: &JointVocabulary) -> HashMap<usize, f64> {
    let mut tf = HashMap::new();
    for t in &problem.tokens {
        if let Some(i) = vocab.position(t) {
            *tf.entry(i).or_insert(0.0) += 1.0;
        }
    }
    tf
}

fn joint_vocabulary(a: &PlatformCorpus, b: &PlatformCorpus) -> Result<JointVocabulary> {
    let vocab = JointVocabulary::from_corpora(a, b);
    if vocab.is_empty() {
        return Err(Error::Data(format!(
            "no problem tokens on either platform (`{}`, `{}`)",
            a.platform_name, b.platform_name
        )));
    }
    Ok(vocab)
}

/// Token-frequency problem vectors over the joint vocabulary, averaged per skill.
pub fn bag_of_words_spaces(a: &PlatformCorpus, b: &PlatformCorpus) -> Result<SpacePair> {
    let vocab = joint_vocabulary(a, b)?;
    let mut warnings = Vec::new();
    let prov = || Provenance::new("bag_of_words").with("vocabulary", vocab.len());
    let build = |c: &PlatformCorpus, w: &mut Vec<String>| {
        skill_means(c, "bow", vocab.len(), prov(), w, |p| {
            term_frequencies(p, &vocab).into_iter().collect()
        })
    };
    let sa = build(a, &mut warnings)?;
    let sb = build(b, &mut warnings)?;
    Ok(SpacePair { a: sa, b: sb, warnings })
}

/// `ln(1 + freq) * ln(|P| / df)` problem vectors, with `P` the pooled
/// text-bearing problems of both platforms, averaged per skill.
pub fn tfidf_spaces(a: &PlatformCorpus, b: &PlatformCorpus) -> Result<SpacePair> {
    let vocab = joint_vocabulary(a, b)?;
    let mut df = vec![0usize; vocab.len()];
    let mut documents = 0usize;
    for p in [a, b].iter().flat_map(|c| c.problems.values()) {
        if p.tokens.is_empty() {
            continue;
        }
        documents += 1;
        for i in term_frequencies(p, &vocab).into_keys() {
            df[i] += 1;
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| {
            if d == 0 {
                0.0
            } else {
                (documents as f64 / d as f64).ln()
            }
        })
        .collect();
    let mut warnings = Vec::new();
    let prov = || {
        Provenance::new("tfidf")
            .with("vocabulary", vocab.len())
            .with("documents", documents)
    };
    let build = |c: &PlatformCorpus, w: &mut Vec<String>| {
        skill_means(c, "tfidf", vocab.len(), prov(), w, |p| {
            term_frequencies(p, &vocab)
                .into_iter()
                .map(|(i, f)| (i, (1.0 + f).ln() * idf[i]))
                .collect()
        })
    };
    let sa = build(a, &mut warnings)?;
    let sb = build(b, &mut warnings)?;
    Ok(SpacePair { a: sa, b: sb, warnings })
}

/// Problem = mean of its in-vocabulary word vectors (per occurrence),
/// skill = mean of its problem vectors. All-OOV problems count as zero.
pub fn content2vec_spaces(a: &PlatformCorpus, b: &PlatformCorpus, word_vectors: &EmbeddingSpace) -> Result<SpacePair> {
    if word_vectors.is_empty() {
        return Err(Error::Data("content2vec: empty word-vector space".into()));
    }
    let dim = word_vectors.dimension();
    let mut warnings = Vec::new();
    let build = |c: &PlatformCorpus, warnings: &mut Vec<String>| {
        let mut oov_problems = Vec::new();
        let prov = Provenance::new("content2vec")
            .with("word_vectors", &word_vectors.name)
            .with("dimension", dim);
        let space = skill_means(c, "content2vec", dim, prov, warnings, |p| {
            let mut acc = vec![0.0; dim];
            let mut n = 0usize;
            for t in &p.tokens {
                if let Some(v) = word_vectors.get(t) {
                    acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
                    n += 1;
                }
            }
            if n == 0 {
                oov_problems.push(p.problem_id.clone());
                return Vec::new();
            }
            acc.into_iter().enumerate().map(|(i, x)| (i, x / n as f64)).collect()
        })?;
        warnings.extend(oov_problems.into_iter().map(|p| {
            format!(
                "{}: problem `{p}` has no in-vocabulary words, zero vector",
                c.platform_name
            )
        }));
        Ok::<_, Error>(space)
    };
    let sa = build(a, &mut warnings)?;
    let sb = build(b, &mut warnings)?;
    Ok(SpacePair { a: sa, b: sb, warnings })
}

/// Word vectors trained on the pooled problem texts of both platforms, one
/// training sequence per problem.
pub fn train_content_word_vectors(
    a: &PlatformCorpus,
    b: &PlatformCorpus,
    hyper: &SkipgramHyper,
) -> Result<EmbeddingSpace> {
    let sequences: Vec<Vec<String>> = [a, b]
        .iter()
        .flat_map(|c| c.problems.values())
        .filter(|p| !p.tokens.is_empty())
        .map(|p| p.tokens.clone())
        .collect();
    let name = format!("{}+{}:words", a.platform_name, b.platform_name);
    train_skipgram(&name, &sequences, hyper, Alignment::Shared)
}

/// Reads pretrained word vectors in the embedding text format.
pub fn load_external_word_vectors(path: &Path) -> Result<EmbeddingSpace> {
    let mut space = EmbeddingSpace::load(path)?;
    space.provenance = Provenance::new("external_word_vectors").with("path", path.display());
    Ok(space)
}

/// Skip-gram over the platform's skill sequences, keeping every skill.
pub fn skill2vec_space(corpus: &PlatformCorpus, hyper: &SkipgramHyper, seed: u64) -> Result<EmbeddingSpace> {
    let built;
    let sequences = if corpus.sequences.is_empty() {
        built = build_skill_sequences(corpus, seed);
        &built
    } else {
        &corpus.sequences
    };
    let hyper = SkipgramHyper {
        min_count: 0,
        seed,
        ..hyper.clone()
    };
    let mut space = train_skipgram(
        &format!("{}:skill2vec", corpus.platform_name),
        sequences,
        &hyper,
        Alignment::PlatformLocal,
    )?;
    space.provenance.kind = "skill2vec".into();
    Ok(space)
}

fn concat_side(content: &EmbeddingSpace, context: &EmbeddingSpace, side: &str) -> Result<EmbeddingSpace> {
    let ids: BTreeSet<&str> = content.ids().chain(context.ids()).collect();
    let missing: Vec<String> = ids
        .iter()
        .filter_map(|id| match (content.contains(id), context.contains(id)) {
            (true, true) => None,
            (false, _) => Some(format!("`{id}` missing from {side} content space `{}`", content.name)),
            (_, false) => Some(format!("`{id}` missing from {side} context space `{}`", context.name)),
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("cannot concatenate: {}", missing.join("; "))));
    }
    let dim = content.dimension() + context.dimension();
    let prov = Provenance::new("concat")
        .with("content", &content.name)
        .with("context", &context.name);
    let name = content.name.split(':').next().unwrap_or("").to_string() + ":concat";
    let mut out = EmbeddingSpace::new(name, dim, Alignment::Shared, prov);
    for id in ids {
        let mut v = content.get(id).expect("checked").to_vec();
        v.extend_from_slice(context.get(id).expect("checked"));
        out.insert(id, v)?;
    }
    Ok(out)
}

/// `[content ∥ translated context]` for the source and `[content ∥ context]`
/// for the destination.
pub fn assemble_concat(
    src_content: &EmbeddingSpace,
    src_context_translated: &EmbeddingSpace,
    dst_content: &EmbeddingSpace,
    dst_context: &EmbeddingSpace,
) -> Result<(EmbeddingSpace, EmbeddingSpace)> {
    if src_content.dimension() != dst_content.dimension() {
        return Err(Error::Dimension {
            expected: dst_content.dimension(),
            found: src_content.dimension(),
        });
    }
    if src_context_translated.dimension() != dst_context.dimension() {
        return Err(Error::Dimension {
            expected: dst_context.dimension(),
            found: src_context_translated.dimension(),
        });
    }
    Ok((
        concat_side(src_content, src_context_translated, "source")?,
        concat_side(dst_content, dst_context, "destination")?,
    ))
}
