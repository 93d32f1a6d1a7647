//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines come out in order and unbuffered.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skill_crosswalk::config::ExperimentConfig;
use skill_crosswalk::corpus::{
    load_response_logs, preprocess, EquivalenceSet, Link, LogSchema, PlatformCorpus, PreprocessOptions, ProblemTexts,
    StopWords, Target,
};
use skill_crosswalk::evaluate::{
    cross_validate, mean_reciprocal_rank, outer_folds, recall_at_k, CrosswalkModel, CvOptions, EvaluationReport,
    FoldStrategy, Params, Tuning,
};
use skill_crosswalk::pipeline::run_pipeline;
use skill_crosswalk::represent::tfidf_spaces;
use skill_crosswalk::seed::derive_seed;
use skill_crosswalk::space::cosine;
use skill_crosswalk::tamf::{build_ppmi, tamf_factorize, tamf_gradients, tamf_loss, PpmiMatrix, TamfParams};
use skill_crosswalk::translate::{
    apply_translation, fit_translation, Prediction, RankedPredictions, TranslationOptions,
};
use skill_crosswalk::{Alignment, EmbeddingSpace, Provenance};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> std::result::Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- 1: metrics

fn ranking(rows: &[(&str, &[&str])]) -> RankedPredictions {
    let mut p = RankedPredictions::default();
    for (src, dsts) in rows {
        let preds = dsts
            .iter()
            .enumerate()
            .map(|(i, d)| Prediction {
                dst: if *d == "NONE" {
                    Target::None
                } else {
                    Target::Skill(d.to_string())
                },
                similarity: 1.0 - i as f64 / 10.0,
            })
            .collect();
        p.by_source.insert(src.to_string(), preds);
    }
    p
}

fn truth(pairs: &[(&str, &str)]) -> EquivalenceSet {
    let links: Vec<Link> = pairs
        .iter()
        .map(|(s, d)| if *d == "NONE" { Link::none(s) } else { Link::pair(s, d) })
        .collect();
    EquivalenceSet::from_links(&links).unwrap()
}

struct MetricFixture {
    name: &'static str,
    predictions: RankedPredictions,
    truth: EquivalenceSet,
    k: usize,
    recall: f64,
    mrr: f64,
}

fn metric_fixtures() -> Vec<MetricFixture> {
    let fx = |name, preds: &[(&str, &[&str])], t: &[(&str, &str)], k, recall, mrr| MetricFixture {
        name,
        predictions: ranking(preds),
        truth: truth(t),
        k,
        recall,
        mrr,
    };
    vec![
        fx(
            "ranks 1, 2, 4",
            &[
                ("a", &["x", "y", "z", "w"]),
                ("b", &["x", "y", "z", "w"]),
                ("c", &["x", "y", "z", "w"]),
            ],
            &[("a", "x"), ("b", "y"), ("c", "w")],
            5,
            1.0,
            (1.0 + 0.5 + 0.25) / 3.0,
        ),
        fx("single hit at top", &[("a", &["x", "y"])], &[("a", "x")], 1, 1.0, 1.0),
        fx(
            "hit just outside k",
            &[("a", &["y", "z", "x"])],
            &[("a", "x")],
            2,
            0.0,
            1.0 / 3.0,
        ),
        fx("absent destination", &[("a", &["y", "z"])], &[("a", "x")], 5, 0.0, 0.0),
        fx(
            "source never predicted",
            &[("a", &["x"])],
            &[("a", "x"), ("b", "y")],
            5,
            0.5,
            0.5,
        ),
        fx(
            "one-to-many: recall per link, MRR per source",
            &[("a", &["q", "x", "r", "y"])],
            &[("a", "x"), ("a", "y")],
            3,
            0.5,
            0.5,
        ),
        fx(
            "none link hit when the top prediction is None",
            &[("a", &["NONE", "x"]), ("b", &["y", "NONE"])],
            &[("a", "NONE"), ("b", "y")],
            5,
            1.0,
            1.0,
        ),
        fx(
            "none link missed when None is not on top",
            &[("a", &["x", "NONE"]), ("b", &["y"])],
            &[("a", "NONE"), ("b", "y")],
            5,
            0.5,
            0.5,
        ),
        fx(
            "None entries occupy ranks",
            &[("a", &["NONE", "NONE", "x"])],
            &[("a", "x")],
            2,
            0.0,
            1.0 / 3.0,
        ),
        fx(
            "mixed fifths",
            &[
                ("a", &["v", "w", "x", "y", "z"]),
                ("b", &["v", "w", "x", "y", "z"]),
                ("c", &["v", "w", "x", "y", "z"]),
                ("d", &["v", "w", "x", "y", "z"]),
                ("e", &["v", "w", "x", "y", "z"]),
            ],
            &[("a", "v"), ("b", "w"), ("c", "x"), ("d", "y"), ("e", "z")],
            3,
            0.6,
            (1.0 + 1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 4.0 + 1.0 / 5.0) / 5.0,
        ),
        fx(
            "k larger than the list",
            &[("a", &["x"]), ("b", &["x"])],
            &[("a", "x"), ("b", "y")],
            10,
            0.5,
            0.5,
        ),
    ]
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let fixtures = metric_fixtures();
    for f in &fixtures {
        let r = recall_at_k(&f.predictions, &f.truth, f.k).map_err(|e| e.to_string())?;
        let m = mean_reciprocal_rank(&f.predictions, &f.truth).map_err(|e| e.to_string())?;
        ensure((r - f.recall).abs() <= 1e-12, || {
            format!("{}: recall {r} != {}", f.name, f.recall)
        })?;
        ensure((m - f.mrr).abs() <= 1e-12, || {
            format!("{}: MRR {m} != {}", f.name, f.mrr)
        })?;
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{} fixtures", fixtures.len()))
}

// ---------------------------------------------------------- 2: TF-IDF, PPMI

fn content_corpus(name: &str, problems: &[(&str, &str, &[&str])]) -> PlatformCorpus {
    let mut texts = ProblemTexts::default();
    for (id, text, skills) in problems {
        texts.texts.insert(id.to_string(), text.to_string());
        texts
            .skills
            .insert(id.to_string(), skills.iter().map(|s| s.to_string()).collect());
    }
    let mut c = PlatformCorpus::new(name, Vec::new(), texts);
    for p in c.problems.values_mut() {
        p.tokens = p.raw_text.split_whitespace().map(String::from).collect();
    }
    c
}

/// TF-IDF straight from the definition: `ln(1 + f)` times `ln(|P| / df)`
/// over the pooled documents, averaged over each skill's documents.
fn tfidf_oracle(docs: &[(&str, &str, &[&str])], pooled: &[&str], skill: &str, term: &str) -> f64 {
    let n = pooled.len() as f64;
    let df = pooled
        .iter()
        .filter(|d| d.split_whitespace().any(|w| w == term))
        .count() as f64;
    let idf = if df == 0.0 { 0.0 } else { (n / df).ln() };
    let own: Vec<&str> = docs
        .iter()
        .filter(|(_, _, s)| s.contains(&skill))
        .map(|(_, t, _)| *t)
        .collect();
    own.iter()
        .map(|t| {
            let f = t.split_whitespace().filter(|w| *w == term).count() as f64;
            (1.0 + f).ln() * idf
        })
        .sum::<f64>()
        / own.len() as f64
}

fn ppmi_oracle(sequences: &[Vec<&str>], window: usize, s: &str, c: &str) -> f64 {
    let mut pairs = Vec::new();
    for seq in sequences {
        for i in 0..seq.len() {
            for j in 0..seq.len() {
                if i != j && i.abs_diff(j) <= window {
                    pairs.push((seq[i], seq[j]));
                }
            }
        }
    }
    let total = pairs.len() as f64;
    let joint = pairs.iter().filter(|p| **p == (s, c)).count() as f64;
    let ns = pairs.iter().filter(|p| p.0 == s).count() as f64;
    let nc = pairs.iter().filter(|p| p.1 == c).count() as f64;
    if joint == 0.0 {
        0.0
    } else {
        (joint * total / (ns * nc)).ln().max(0.0)
    }
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let a_docs: &[(&str, &str, &[&str])] = &[
        ("p1", "area triangle base height area", &["s1"]),
        ("p2", "triangle angle sum", &["s1", "s2"]),
        ("p3", "fraction sum numerator", &["s2"]),
    ];
    let b_docs: &[(&str, &str, &[&str])] = &[
        ("q1", "area rectangle width height", &["t1"]),
        ("q2", "fraction fraction denominator sum", &["t2"]),
    ];
    let pooled: Vec<&str> = a_docs.iter().chain(b_docs).map(|d| d.1).collect();
    let pair = tfidf_spaces(&content_corpus("A", a_docs), &content_corpus("B", b_docs)).map_err(|e| e.to_string())?;
    let vocab = skill_crosswalk::represent::JointVocabulary::from_corpora(
        &content_corpus("A", a_docs),
        &content_corpus("B", b_docs),
    );
    let words: BTreeSet<&str> = pooled.iter().flat_map(|d| d.split_whitespace()).collect();
    let mut entries = 0;
    for (space, docs) in [(&pair.a, a_docs), (&pair.b, b_docs)] {
        for skill in space.ids() {
            let v = space.get(skill).unwrap();
            for term in &words {
                let i = vocab
                    .position(term)
                    .ok_or_else(|| format!("`{term}` missing from the vocabulary"))?;
                let want = tfidf_oracle(docs, &pooled, skill, term);
                ensure((v[i] - want).abs() <= 1e-12, || {
                    format!("tfidf {skill}/{term}: {} != {want}", v[i])
                })?;
                entries += 1;
            }
        }
    }

    let sequences: Vec<Vec<&str>> = vec![
        vec!["a", "b", "a", "c"],
        vec!["b", "c", "c", "d", "a"],
        vec!["d", "a"],
        vec!["c", "b", "a", "b", "d", "d"],
        vec!["a"],
    ];
    let owned: Vec<Vec<String>> = sequences
        .iter()
        .map(|s| s.iter().map(|x| x.to_string()).collect())
        .collect();
    let skills: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    for window in 1..=3 {
        let ppmi = build_ppmi(&owned, &skills, window).map_err(|e| e.to_string())?;
        for (i, s) in skills.iter().enumerate() {
            for (j, c) in skills.iter().enumerate() {
                let want = ppmi_oracle(&sequences, window, s, c);
                let got = ppmi.matrix[(i, j)];
                ensure((got - want).abs() <= 1e-12, || {
                    format!("ppmi w{window} ({s},{c}): {got} != {want}")
                })?;
                entries += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{entries} entries"))
}

// ------------------------------------------------------------------ 3: TAMF

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

fn tamf_instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (PpmiMatrix, EmbeddingSpace) {
    let skills: Vec<String> = (0..n).map(|i| format!("s{i:02}")).collect();
    let matrix = DMatrix::from_fn(n, n, |_, _| {
        if rng.random_bool(0.4) {
            0.0
        } else {
            rng.random_range(0.0..3.0)
        }
    });
    let ppmi = PpmiMatrix {
        skills: skills.clone(),
        matrix,
        window_size: 5,
        pair_count: 0,
    };
    let mut content = EmbeddingSpace::new("content", d, Alignment::Shared, Provenance::new("test"));
    for s in &skills {
        content
            .insert(s.clone(), (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
    }
    (ppmi, content)
}

fn criterion_3() -> Check {
    let start = Instant::now();
    // (a) monotone loss
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(10..=40);
        let d = rng.random_range(5..=20);
        let (ppmi, content) = tamf_instance(&mut rng, n, d);
        let params = TamfParams {
            k: rng.random_range(2..=10),
            lambda: [0.1, 1.0, 10.0][seed as usize % 3],
            tolerance: 0.0,
            max_iterations: 50,
            seed,
        };
        let (_, f) = tamf_factorize(&ppmi, &content, &params).map_err(|e| e.to_string())?;
        for w in f.loss_trace.windows(2) {
            let slack = 1e-10 * w[0].abs().max(1.0);
            ensure(w[1] <= w[0] + slack, || {
                format!("seed {seed}: loss rose {} -> {}", w[0], w[1])
            })?;
        }
    }

    // (b) exact factorization: λ = 0, k = |S|, square full-rank content
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 12;
    let (ppmi, content) = tamf_instance(&mut rng, n, n);
    let params = TamfParams {
        k: n,
        lambda: 0.0,
        tolerance: 0.0,
        max_iterations: 200,
        seed: 1,
    };
    let (_, f) = tamf_factorize(&ppmi, &content, &params).map_err(|e| e.to_string())?;
    let relative = f.final_loss() / ppmi.matrix.norm_squared();
    ensure(relative < 1e-6, || format!("exact case relative loss {relative:e}"))?;

    // (c) analytic vs central finite differences
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n, d, k, lambda) = (15, 8, 4, 0.7);
    let m = random_matrix(&mut rng, n, n, 0.0, 2.0);
    let t = random_matrix(&mut rng, d, n, -1.0, 1.0);
    let w = random_matrix(&mut rng, k, n, -1.0, 1.0);
    let h = random_matrix(&mut rng, k, d, -1.0, 1.0);
    let (gw, gh) = tamf_gradients(&m, &w, &h, &t, lambda);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for probe in 0..10 {
        let on_w = probe % 2 == 0;
        let (rows, cols) = if on_w { (k, n) } else { (k, d) };
        let (i, j) = (rng.random_range(0..rows), rng.random_range(0..cols));
        let loss_at = |delta: f64| {
            let (mut w2, mut h2) = (w.clone(), h.clone());
            if on_w {
                w2[(i, j)] += delta;
            } else {
                h2[(i, j)] += delta;
            }
            tamf_loss(&m, &w2, &h2, &t, lambda)
        };
        let numeric = (loss_at(step) - loss_at(-step)) / (2.0 * step);
        let analytic = if on_w { gw[(i, j)] } else { gh[(i, j)] };
        let rel = (numeric - analytic).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    ensure(worst < 1e-4, || format!("gradient relative error {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "exact-case relative loss {relative:.1e}, worst gradient error {worst:.1e}"
    ))
}

// ----------------------------------------------------------- 4: translation

fn criterion_4() -> Check {
    let start = Instant::now();
    let (dim, skills) = (50, 200);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let gaussian = DMatrix::from_fn(dim, dim, |_, _| {
        let (u, v): (f64, f64) = (rng.random_range(1e-12..1.0), rng.random_range(0.0..1.0));
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    });
    let q = gaussian.qr().q();
    let mut src = EmbeddingSpace::new("S:x", dim, Alignment::PlatformLocal, Provenance::new("test"));
    let mut dst = EmbeddingSpace::new("D:x", dim, Alignment::PlatformLocal, Provenance::new("test"));
    for i in 0..skills {
        let v = nalgebra::DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let r = &q * &v;
        src.insert(format!("s{i:03}"), v.iter().copied().collect()).unwrap();
        dst.insert(format!("d{i:03}"), r.iter().copied().collect()).unwrap();
    }
    let mut order: Vec<usize> = (0..skills).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let (train_idx, test_idx) = order.split_at(skills * 4 / 5);
    let mut train = EquivalenceSet::default();
    for &i in train_idx {
        train.insert_pair(&format!("s{i:03}"), &format!("d{i:03}")).unwrap();
    }
    let opts = TranslationOptions {
        seed: 5,
        ..Default::default()
    };
    ensure(
        opts.learning_rate == 0.001 && opts.max_epochs == 1000 && opts.patience == 100,
        || "default protocol changed".into(),
    )?;
    let t = fit_translation(&src, &dst, &train, &opts).map_err(|e| e.to_string())?;
    let moved = apply_translation(&t, &src).map_err(|e| e.to_string())?;
    let mean = test_idx
        .iter()
        .map(|&i| {
            cosine(
                moved.get(&format!("s{i:03}")).unwrap(),
                dst.get(&format!("d{i:03}")).unwrap(),
            )
            .unwrap_or(0.0)
        })
        .sum::<f64>()
        / test_idx.len() as f64;
    ensure(mean >= 0.99, || format!("held-out mean cosine {mean:.4}"))?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "held-out mean cosine {mean:.4} after {} epochs",
        t.training_meta.epochs_run
    ))
}

// ------------------------------------------------------ 5-7: synthetic runs

fn synthetic_config(seed: u64, out: &Path, extra_data: &str, models: &str, evaluation: &str) -> ExperimentConfig {
    let text = format!(
        r#"{{"seed": {seed}, "output_dir": {out:?},
 "data": {{"synthetic": {{"latent_skills": 50,
   "a": {{"name": "fine", "granularity": 2.0}},
   "b": {{"name": "coarse", "granularity": 1.2}}{extra_data}}}}},
 "models": {models},
 "grids": {{"skill2vec": {{"vector_dimension": [30], "window_size": [5]}},
           "content2vec": {{"vector_dimension": [30], "window_size": [5], "min_count": [0]}}}},
 "evaluation": {evaluation},
 "analysis": {{"enabled": false}}}}"#
    );
    ExperimentConfig::from_json(&text, Path::new(".")).expect("acceptance config parses")
}

fn metric(report: &EvaluationReport, model: &str, direction: &str) -> std::result::Result<(f64, f64), String> {
    report
        .models
        .iter()
        .find(|m| m.model == model && m.direction == direction)
        .map(|m| (m.recall_at_k, m.mrr))
        .ok_or_else(|| format!("no `{model}` report for {direction}"))
}

fn concat_run(seed: u64, extra_data: &str, evaluation: &str) -> std::result::Result<EvaluationReport, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = synthetic_config(
        seed,
        dir.path(),
        extra_data,
        r#"[{"representation": "concat"}]"#,
        evaluation,
    );
    run_pipeline(&cfg).map(|o| o.report).map_err(|e| e.to_string())
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = synthetic_config(1, dir.path(), "", r#"[{"representation": "concat"}]"#, "{}");
    let data = skill_crosswalk::pipeline::ingest(&cfg).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = data.corpora.iter().map(|c| c.skills.len()).collect();
    ensure(counts == [100, 60], || {
        format!("skill counts {counts:?}, want [100, 60]")
    })?;
    let report = run_pipeline(&cfg).map_err(|e| e.to_string())?.report;
    let (recall, _) = metric(&report, "concat", "fine->coarse")?;
    ensure(recall >= 0.8, || format!("fine->coarse recall@5 {recall:.3}"))?;
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(format!("fine->coarse recall@5 {recall:.3} on 100 vs 60 skills"))
}

fn criterion_6() -> Check {
    let mut lines = Vec::new();
    for seed in 1..=5 {
        let report = concat_run(seed, "", "{}")?;
        let (_, forward) = metric(&report, "concat", "fine->coarse")?;
        let (_, backward) = metric(&report, "concat", "coarse->fine")?;
        ensure(forward >= backward, || {
            format!("seed {seed}: fine->coarse MRR {forward:.3} < coarse->fine {backward:.3}")
        })?;
        lines.push(format!("{forward:.2}/{backward:.2}"));
    }
    Ok(format!("MRR fine->coarse / coarse->fine: {}", lines.join(", ")))
}

fn criterion_7() -> Check {
    let none = r#", "none_fraction": 0.3"#;
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 1..=5 {
        let eval = |mode: &str| format!(r#"{{"none_mode": "{mode}", "directions": "forward"}}"#);
        let (threshold, _) = metric(&concat_run(seed, none, &eval("threshold"))?, "concat", "fine->coarse")?;
        let (ignore, _) = metric(&concat_run(seed, none, &eval("ignore"))?, "concat", "fine->coarse")?;
        if threshold > ignore {
            wins += 1;
        }
        lines.push(format!("{threshold:.2} vs {ignore:.2}"));
    }
    ensure(wins >= 4, || {
        format!("threshold won on {wins} of 5 seeds ({})", lines.join(", "))
    })?;
    Ok(format!(
        "threshold beat ignore on {wins} of 5 seeds ({})",
        lines.join(", ")
    ))
}

// ---------------------------------------------------------- 8: determinism

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let Ok(entries) = fs::read_dir(dir) else { return };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                walk(&path, root, out);
            } else if let Ok(bytes) = fs::read(&path) {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn criterion_8() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"seed": 17,
 "data": {"synthetic": {"latent_skills": 20,
   "a": {"name": "fine", "granularity": 2.0},
   "b": {"name": "coarse", "granularity": 1.2}}},
 "models": [{"representation": "concat"}, {"representation": "skill2vec"}, {"representation": "tfidf"}],
 "evaluation": {"folds": 3, "inner_folds": 3},
 "grids": {"skill2vec": {"vector_dimension": [16], "window_size": [3, 5]},
           "content2vec": {"vector_dimension": [16], "window_size": [5], "min_count": [0]}},
 "analysis": {"clusters": 5}}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_crosswalk"))
            .args([
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--strict",
                "run",
            ])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("{run} run failed: {}", String::from_utf8_lossy(&status.stderr))
        })?;
        outputs.push(files_under(&out));
    }
    let compared: Vec<&PathBuf> = outputs[0]
        .keys()
        .filter(|p| {
            p.extension().is_some_and(|e| e == "vec") || p.starts_with("report.json") || p.starts_with("report.txt")
        })
        .collect();
    let vec_files = compared
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "vec"))
        .count();
    ensure(vec_files > 0, || "no embedding files written".into())?;
    ensure(outputs[0].keys().eq(outputs[1].keys()), || {
        "the two runs wrote different file sets".into()
    })?;
    for path in &compared {
        ensure(outputs[0][*path] == outputs[1][*path], || {
            format!("{} differs", path.display())
        })?;
    }
    Ok(format!("report and {vec_files} embedding files byte-identical"))
}

// -------------------------------------------------- 9: CV integrity

/// Memorizes its training links; unlabeled sources get a vector that depends
/// on the parameter, so selection depends on exactly which labels it sees.
struct Memorizer {
    n: usize,
}

impl CrosswalkModel for Memorizer {
    fn name(&self) -> String {
        "memorizer".into()
    }
    fn tuning(&self) -> Tuning {
        Tuning::Nested
    }
    fn grid(&self) -> Vec<Params> {
        (0..5).map(|w| Params::from([("w".to_string(), w as f64)])).collect()
    }
    fn prepare(
        &self,
        params: &Params,
        train: &EquivalenceSet,
    ) -> skill_crosswalk::Result<(EmbeddingSpace, EmbeddingSpace)> {
        let n = self.n;
        let mut src = EmbeddingSpace::new("S", n, Alignment::Shared, Provenance::new("test"));
        let mut dst = EmbeddingSpace::new("D", n, Alignment::Shared, Provenance::new("test"));
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            dst.insert(format!("d{i:03}"), e)?;
        }
        let partners = train.partners();
        for i in 0..n {
            let id = format!("s{i:03}");
            let mut v = vec![0.0; n];
            match partners.get(id.as_str()) {
                Some(ds) => ds.iter().for_each(|d| v[d[1..].parse::<usize>().unwrap()] = 1.0),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params["w"] as u64, &id));
                    v.iter_mut().for_each(|x| *x = rng.random_range(0.0..1.0));
                }
            }
            src.insert(id, v)?;
        }
        Ok((src, dst))
    }
}

fn bijection(n: usize) -> EquivalenceSet {
    let mut t = EquivalenceSet::default();
    for i in 0..n {
        t.insert_pair(&format!("s{i:03}"), &format!("d{i:03}")).unwrap();
    }
    t
}

fn criterion_9() -> Check {
    let n = 40;
    let opts = CvOptions {
        folds: 5,
        inner_folds: 3,
        seed: 23,
        direction: "S->D".into(),
        ..Default::default()
    };
    let model = Memorizer { n };
    let truth = bijection(n);
    let links = truth.links();
    let folds =
        outer_folds(&links, opts.folds, derive_seed(opts.seed, "outer"), opts.strategy).map_err(|e| e.to_string())?;
    let base = cross_validate(&[&model], &truth, &opts).map_err(|e| e.to_string())?;
    for (f, fold) in folds.iter().enumerate() {
        for shift in [7, 19] {
            let mut perturbed = links.clone();
            for &i in fold {
                perturbed[i].dst = Target::Skill(format!("d{:03}", (i + shift) % n));
            }
            let moved = EquivalenceSet::from_links(&perturbed).map_err(|e| e.to_string())?;
            let again = cross_validate(&[&model], &moved, &opts).map_err(|e| e.to_string())?;
            let (r0, r1) = (&base.models[0].records[f], &again.models[0].records[f]);
            ensure(
                r0.params == r1.params && r0.selection_scores == r1.selection_scores,
                || format!("fold {f}: selection changed when its test labels moved"),
            )?;
        }
    }

    for size in [85, 148, 222] {
        let links: Vec<Link> = (0..size)
            .map(|i| Link::pair(&format!("s{:03}", i / 2), &format!("d{i:03}")))
            .collect();
        for strategy in [FoldStrategy::Pairs, FoldStrategy::SkillDisjoint] {
            let folds = outer_folds(&links, 10, 3, strategy).map_err(|e| e.to_string())?;
            ensure(folds.len() == 10, || format!("{size}: {} folds", folds.len()))?;
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            ensure(all == (0..size).collect::<Vec<_>>(), || {
                format!("{size} {strategy:?}: not a partition")
            })?;
            ensure(folds.iter().all(|f| !f.is_empty()), || {
                format!("{size} {strategy:?}: empty fold")
            })?;
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
            match strategy {
                FoldStrategy::Pairs => ensure(spread <= 1, || format!("{size}: fold sizes {sizes:?}"))?,
                FoldStrategy::SkillDisjoint => {
                    ensure(spread <= 2, || format!("{size} skill-disjoint: fold sizes {sizes:?}"))?;
                    for fold in &folds {
                        let inside: BTreeSet<&str> = fold.iter().map(|&i| links[i].src.as_str()).collect();
                        let outside = folds
                            .iter()
                            .filter(|g| !std::ptr::eq(*g, fold))
                            .flatten()
                            .any(|&i| inside.contains(links[i].src.as_str()));
                        ensure(!outside, || format!("{size}: a source skill spans two folds"))?;
                    }
                }
            }
            ensure(
                folds == outer_folds(&links, 10, 3, strategy).map_err(|e| e.to_string())?,
                || format!("{size}: folds are not reproducible"),
            )?;
        }
    }
    Ok(format!(
        "{} folds x 2 perturbations, partitions of 85/148/222",
        folds.len()
    ))
}

// ------------------------------------------------------ 10: public datasets

fn skills_after(path: &str, schema: LogSchema, options: PreprocessOptions) -> std::result::Result<usize, String> {
    let log = load_response_logs(Path::new(path), &schema).map_err(|e| format!("{path}: {e}"))?;
    let corpus = PlatformCorpus::new("dataset", log.interactions, ProblemTexts::default());
    let kept = preprocess(&corpus, &options).map_err(|e| e.to_string())?;
    Ok(kept.skills.len())
}

fn criterion_10() -> Outcome {
    let assistments = std::env::var("CROSSWALK_ASSISTMENTS_LOGS").ok();
    let kdd = std::env::var("CROSSWALK_KDD_LOGS").ok();
    if assistments.is_none() && kdd.is_none() {
        return Outcome::Skip("set CROSSWALK_ASSISTMENTS_LOGS and/or CROSSWALK_KDD_LOGS to the public exports".into());
    }
    let mut notes = Vec::new();
    if let Some(path) = assistments {
        let options = PreprocessOptions {
            min_responses_per_skill: 1000,
            single_skill_only: true,
            stop_words: StopWords::none(),
        };
        match skills_after(&path, LogSchema::assistments_2012(), options) {
            Ok(130) => notes.push("ASSISTments 130 skills".to_string()),
            Ok(n) => return Outcome::Fail(format!("ASSISTments: {n} skills, want 130")),
            Err(e) => return Outcome::Fail(e),
        }
    }
    if let Some(path) = kdd {
        let options = PreprocessOptions {
            min_responses_per_skill: 0,
            single_skill_only: false,
            stop_words: StopWords::none(),
        };
        match skills_after(&path, LogSchema::kdd_cognitive_tutor(), options) {
            Ok(536) => notes.push("Cognitive Tutor 536 skills".to_string()),
            Ok(n) => return Outcome::Fail(format!("Cognitive Tutor: {n} skills, want 536")),
            Err(e) => return Outcome::Fail(e),
        }
    }
    Outcome::Pass(notes.join(", "))
}

fn main() -> ExitCode {
    let checks: Vec<(usize, Box<dyn Fn() -> Outcome>)> = vec![
        (1, Box::new(|| criterion_1().into())),
        (2, Box::new(|| criterion_2().into())),
        (3, Box::new(|| criterion_3().into())),
        (4, Box::new(|| criterion_4().into())),
        (5, Box::new(|| criterion_5().into())),
        (6, Box::new(|| criterion_6().into())),
        (7, Box::new(|| criterion_7().into())),
        (8, Box::new(|| criterion_8().into())),
        (9, Box::new(|| criterion_9().into())),
        (10, Box::new(criterion_10)),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (n, check) in checks {
        if filter.is_some_and(|f| f != n) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Outcome::Fail("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass(d) => println!("criterion {n}: PASS ({d}; {secs:.1}s)"),
            Outcome::Skip(d) => println!("criterion {n}: SKIP ({d})"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("criterion {n}: FAIL ({d}; {secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

impl From<Check> for Outcome {
    fn from(c: Check) -> Self {
        match c {
            Ok(d) => Outcome::Pass(d),
            Err(d) => Outcome::Fail(d),
        }
    }
}
