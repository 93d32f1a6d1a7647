//! End-to-end runs: ingest, represent, cross-validate, refit on every label,
//! and persist each intermediate artifact with a manifest.

mod ingest;
mod model;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ingest::{ingest, restrict_truth, CorpusSummary, Dataset, IngestSummary};
pub use model::{usable_pairs, Built, ContentKey, PipelineModel, WordKey, Workspace};

use crate::analysis::{
    cluster_match_score, combine_spaces, export_projection, kmeans, qualify_truth, ClusterAssignment,
};
use crate::config::{AnalysisConfig, Directions, ExperimentConfig};
use crate::corpus::EquivalenceSet;
use crate::error::{Error, Result};
use crate::evaluate::{apply_none_threshold, cross_validate, CrosswalkModel, EvaluationReport, ModelReport, Params};
use crate::seed::derive_seed;
use crate::space::EmbeddingSpace;
use crate::translate::{rank_equivalents, RankedPredictions};

/// Top-level entries a run owns inside its output directory.
pub const ARTIFACTS: [&str; 9] = [
    "ingest",
    "spaces",
    "translation",
    "predictions",
    "analysis",
    "report.json",
    "report.txt",
    "manifest.json",
    "config.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_sha256: String,
    /// Seeds handed to each stage, by derivation label.
    pub seeds: BTreeMap<String, u64>,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub model: String,
    pub direction: String,
    pub k: usize,
    pub inertia: f64,
    pub scores: BTreeMap<usize, Option<f64>>,
    pub assignment: ClusterAssignment,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: EvaluationReport,
    pub manifest: Manifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of the settings that shape results; paths, worker count and
/// strictness are left out.
pub fn config_digest(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = PathBuf::new();
    c.workers = 0;
    c.strict = false;
    sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
}

/// File-system safe form of a space or model name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            ':' => '-',
            '>' => '~',
            c if c.is_alphanumeric() || matches!(c, '-' | '_' | '.' | '+') => c,
            _ => '_',
        })
        .collect()
}

fn direction_stem(src: &str, dst: &str) -> String {
    format!("{}_to_{}", file_stem(src), file_stem(dst))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn save_space(space: &EmbeddingSpace, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    space.save(path)
}

/// Writes the ingest summary and the surviving labels.
pub fn write_ingest(data: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("summary.json"), &data.summary)?;
    data.truth.save(&dir.join("pairs.csv"), b',')
}

/// Truth in the given direction: 0 maps the first platform onto the second.
pub fn truth_for(data: &Dataset, src: usize) -> EquivalenceSet {
    if src == 0 {
        data.truth.clone()
    } else {
        data.truth.reversed()
    }
}

pub fn directions(cfg: &ExperimentConfig) -> Vec<usize> {
    match cfg.evaluation.directions {
        Directions::Both => vec![0, 1],
        Directions::Forward => vec![0],
    }
}

/// The configured models for one direction.
pub fn models_for<'w, 'a>(ws: &'w Workspace<'a>, src: usize) -> Result<Vec<PipelineModel<'w, 'a>>> {
    Ok(ws
        .cfg
        .resolved_models()?
        .into_iter()
        .map(|(name, reps)| PipelineModel::new(ws, &name, reps, src))
        .collect())
}

/// Trains every label-free representation the grids will ask for.
fn warm(models: &[PipelineModel]) -> Result<()> {
    let jobs: Vec<(&PipelineModel, Params)> = models
        .iter()
        .flat_map(|m| {
            let grid = m.grid();
            let grid = if grid.is_empty() { vec![Params::new()] } else { grid };
            grid.into_iter().map(move |p| (m, p))
        })
        .collect();
    let run = |(m, p): &(&PipelineModel, Params)| m.warm(p);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(run).collect()
    }
}

/// Cross-validates every configured model in every configured direction.
pub fn evaluate_all(ws: &Workspace, data: &Dataset) -> Result<EvaluationReport> {
    let cfg = ws.cfg;
    let mut report: Option<EvaluationReport> = None;
    for src in directions(cfg) {
        let models = models_for(ws, src)?;
        warm(&models).map_err(|e| e.in_stage("represent"))?;
        let refs: Vec<&dyn CrosswalkModel> = models.iter().map(|m| m as &dyn CrosswalkModel).collect();
        let direction = models.first().map(|m| m.direction()).unwrap_or_default();
        let opts = cfg.evaluation.cv_options(cfg.seed, &direction);
        let part = cross_validate(&refs, &truth_for(data, src), &opts).map_err(|e| e.in_stage("evaluate"))?;
        match &mut report {
            Some(r) => r.merge(part),
            None => report = Some(part),
        }
    }
    let mut report = report.expect("at least one direction");
    report.fingerprint.insert("config_sha256".into(), config_digest(cfg));
    for c in &data.corpora {
        report
            .fingerprint
            .insert(format!("skills/{}", c.platform_name), c.skills.len().to_string());
    }
    report
        .fingerprint
        .insert("pairs".into(), data.truth.pairs.len().to_string());
    Ok(report)
}

fn model_report<'r>(report: &'r EvaluationReport, model: &PipelineModel) -> Option<&'r ModelReport> {
    let direction = model.direction();
    report
        .models
        .iter()
        .find(|m| m.model == model.name && m.direction == direction)
}

/// Final predictions: the top `k` after the selected None threshold.
pub fn final_predictions(built: &Built, k: usize, threshold: Option<f64>) -> Result<RankedPredictions> {
    let full = rank_equivalents(&built.src, &built.dst, None)?;
    let mut p = match threshold {
        Some(t) => apply_none_threshold(&full, t),
        None => full,
    };
    for preds in p.by_source.values_mut() {
        preds.truncate(k);
    }
    p.k = Some(k);
    Ok(p)
}

fn persist_model(out: &Path, model: &PipelineModel, built: &Built, predictions: &RankedPredictions) -> Result<()> {
    let src = built.src.name.split(':').next().unwrap_or("src").to_string();
    let dst = built.dst.name.split(':').next().unwrap_or("dst").to_string();
    let stem = direction_stem(&src, &dst);
    let model_dir = file_stem(&model.name);
    let spaces_dir = out.join("spaces").join(&model_dir).join(&stem);
    let mut written = std::collections::BTreeSet::new();
    for space in built.parts.iter().chain([&built.src, &built.dst]) {
        let name = file_stem(&space.name);
        if written.insert(name.clone()) {
            save_space(space, &spaces_dir.join(format!("{name}.vec")))?;
        } else if built.src.name == built.dst.name {
            // concat outputs carry their platform name only
            save_space(space, &spaces_dir.join(format!("{name}.dst.vec")))?;
        }
    }
    if let Some(t) = &built.translation {
        let dir = out.join("translation").join(&model_dir);
        fs::create_dir_all(&dir)?;
        t.save(&dir.join(format!("{stem}.txt")))?;
    }
    let dir = out.join("predictions").join(&model_dir);
    fs::create_dir_all(&dir)?;
    predictions.save(&dir.join(format!("{stem}.tsv")))
}

fn analyze(out: &Path, ws: &Workspace, model: &PipelineModel, built: &Built, truth: &EquivalenceSet) -> Result<()> {
    let names = [ws.platform(model.src), ws.platform(model.dst())];
    analyze_spaces(
        &out.join("analysis"),
        [(names[0], &built.src), (names[1], &built.dst)],
        truth,
        &ws.cfg.analysis,
        derive_seed(ws.cfg.seed, "analysis"),
        &model.name,
    )?;
    Ok(())
}

/// Clusters two spaces that share coordinates, scores the clusters against
/// `truth`, and writes `clusters.json` and `projection.csv` into `dir`.
pub fn analyze_spaces(
    dir: &Path,
    spaces: [(&str, &EmbeddingSpace); 2],
    truth: &EquivalenceSet,
    cfg: &AnalysisConfig,
    seed: u64,
    model: &str,
) -> Result<ClusterSummary> {
    let named: Vec<(String, &EmbeddingSpace)> = spaces.iter().map(|(p, s)| (p.to_string(), *s)).collect();
    let combined = combine_spaces(&named)?;
    let k = cfg.clusters.min(combined.len());
    let assignment = kmeans(&combined, k, seed, cfg.max_iterations)?;
    let scores = cluster_match_score(&assignment, &qualify_truth(truth, spaces[0].0, spaces[1].0));
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("projection.csv"))?);
    export_projection(&named, Some(&assignment), &mut w, cfg.precision)?;
    w.flush()?;
    let summary = ClusterSummary {
        model: model.to_string(),
        direction: format!("{}->{}", spaces[0].0, spaces[1].0),
        k,
        inertia: assignment.inertia,
        scores,
        assignment,
    };
    write_json(&dir.join("clusters.json"), &summary)?;
    Ok(summary)
}

fn collect_files(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect_files(&path, root, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("below root").to_path_buf());
        }
    }
    Ok(())
}

/// Lists every file below `out` (except the manifest itself) with digests.
pub fn write_manifest(out: &Path, seed: u64, config_sha256: String, seeds: BTreeMap<String, u64>) -> Result<Manifest> {
    let mut files = Vec::new();
    collect_files(out, out, &mut files)?;
    let mut entries = Vec::new();
    for rel in files {
        if rel == Path::new("manifest.json") {
            continue;
        }
        let bytes = fs::read(out.join(&rel))?;
        entries.push(ManifestEntry {
            path: rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/"),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        seed,
        config_sha256,
        seeds,
        files: entries,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Removes artifacts of an earlier run so the manifest covers every file.
pub fn clear_artifacts(out: &Path) -> Result<()> {
    for name in ARTIFACTS {
        let p = out.join(name);
        if p.is_dir() {
            fs::remove_dir_all(&p)?;
        } else if p.exists() {
            fs::remove_file(&p)?;
        }
    }
    Ok(())
}

fn stage_seeds(cfg: &ExperimentConfig, data: &Dataset) -> BTreeMap<String, u64> {
    let mut seeds = BTreeMap::new();
    let mut put = |label: String| {
        let v = derive_seed(cfg.seed, &label);
        seeds.insert(label, v);
    };
    put("outer".into());
    for f in 0..cfg.evaluation.folds {
        put(format!("inner/{f}"));
    }
    for c in &data.corpora {
        put(format!("sequences/{}", c.platform_name));
    }
    put("analysis".into());
    seeds.insert("synthetic".into(), cfg.seed);
    seeds
}

/// Builds a worker pool sized by the config (one thread in strict mode).
pub fn thread_pool(cfg: &ExperimentConfig) -> Result<Option<rayon_pool::Pool>> {
    rayon_pool::build(if cfg.strict { 1 } else { cfg.workers })
}

#[cfg(feature = "parallel")]
pub mod rayon_pool {
    use crate::error::{Error, Result};

    pub type Pool = rayon::ThreadPool;

    pub fn build(workers: usize) -> Result<Option<Pool>> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map(Some)
            .map_err(|e| Error::Config(format!("cannot start {workers} worker(s): {e}")))
    }

    pub fn install<T: Send>(pool: Option<&Pool>, f: impl FnOnce() -> T + Send) -> T {
        match pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub mod rayon_pool {
    use crate::error::Result;

    pub struct Pool;

    pub fn build(_workers: usize) -> Result<Option<Pool>> {
        Ok(None)
    }

    pub fn install<T: Send>(_pool: Option<&Pool>, f: impl FnOnce() -> T + Send) -> T {
        f()
    }
}

/// The whole method on the configured data; artifacts go to
/// `cfg.output_dir`. Outputs written before a failure are kept.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let pool = thread_pool(cfg)?;
    rayon_pool::install(pool.as_ref(), || run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let out = cfg.output_dir.as_path();
    fs::create_dir_all(out).map_err(|e| Error::Config(format!("output directory `{}`: {e}", out.display())))?;
    clear_artifacts(out).map_err(|e| e.in_stage("persist"))?;
    write_json(&out.join("config.json"), cfg)?;

    let data = ingest(cfg).map_err(|e| e.in_stage("ingest"))?;
    write_ingest(&data, &out.join("ingest")).map_err(|e| e.in_stage("persist"))?;
    log::info!(
        "ingested {} skills on {}, {} on {}, {} labeled pairs",
        data.summary.platforms[0].skills,
        data.summary.platforms[0].platform,
        data.summary.platforms[1].skills,
        data.summary.platforms[1].platform,
        data.truth.pairs.len()
    );

    let ws = Workspace::new(cfg, &data.corpora);
    let report = evaluate_all(&ws, &data)?;
    write_report(&report, out)?;

    let mut analyzed = !cfg.analysis.enabled;
    for src in directions(cfg) {
        let truth = truth_for(&data, src);
        for model in models_for(&ws, src)? {
            let mr = model_report(&report, &model).expect("every model was evaluated");
            let params = mr.most_selected();
            let built = model.build(&params, &truth).map_err(|e| e.in_stage("translate"))?;
            let predictions = final_predictions(&built, cfg.evaluation.k, mr.most_selected_threshold())
                .map_err(|e| e.in_stage("rank"))?;
            persist_model(out, &model, &built, &predictions).map_err(|e| e.in_stage("persist"))?;
            if !analyzed {
                analyze(out, &ws, &model, &built, &truth).map_err(|e| e.in_stage("analyze"))?;
                analyzed = true;
            }
        }
    }
    let manifest = write_manifest(out, cfg.seed, config_digest(cfg), stage_seeds(cfg, &data))
        .map_err(|e| e.in_stage("persist"))?;
    Ok(RunOutput { report, manifest })
}

pub fn write_report(report: &EvaluationReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), report.to_json() + "\n")?;
    fs::write(out.join("report.txt"), report.render_table())?;
    Ok(())
}
