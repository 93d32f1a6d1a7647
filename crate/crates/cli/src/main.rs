use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use skill_crosswalk::config::ExperimentConfig;
use skill_crosswalk::corpus::{generate_synthetic_pair, EquivalenceSet, SynthConfig};
use skill_crosswalk::evaluate::{apply_none_threshold, EvaluationReport, Params};
use skill_crosswalk::pipeline::{
    self, analyze_spaces, directions, file_stem, ingest, models_for, rayon_pool, run_pipeline, thread_pool, truth_for,
    usable_pairs, write_ingest, write_report, Workspace,
};
use skill_crosswalk::seed::derive_seed;
use skill_crosswalk::translate::{
    apply_translation, fit_translation, rank_equivalents, TranslationMatrix, TranslationOptions,
};
use skill_crosswalk::{Alignment, EmbeddingSpace, Error, Result};

#[derive(Parser)]
#[command(
    name = "crosswalk",
    version,
    about = "Learn skill equivalences between two learning platforms"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores); overrides the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Single worker for byte-identical reruns.
    #[arg(long, global = true)]
    strict: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic platform pair (logs, texts, labels) to the output directory.
    Synth,
    /// Load and preprocess both platforms; write counts and the surviving labels.
    Ingest,
    /// Write every model's untranslated skill spaces.
    Represent {
        /// Use the most-selected hyperparameters of an earlier evaluation.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fit a translation matrix between two embedding files.
    Translate(TranslateArgs),
    /// Rank destination skills for every source skill.
    Rank(RankArgs),
    /// Cross-validate every configured model.
    Evaluate,
    /// Cluster two spaces in common coordinates and export the projection.
    Analyze(AnalyzeArgs),
    /// The full pipeline.
    Run,
}

#[derive(Args)]
struct TranslateArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// `src_skill,dst_skill` rows.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Pair rows are `dst_skill,src_skill`.
    #[arg(long)]
    reverse: bool,
    /// Model name; fixes the seed and output path to match `run`.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Translation applied to the source first.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Predictions below this cosine become NONE.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long)]
    clusters: Option<usize>,
}

impl Cli {
    fn config(&self) -> Result<Option<ExperimentConfig>> {
        let Some(path) = &self.config else {
            return Ok(None);
        };
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.strict |= self.strict;
        Ok(Some(cfg))
    }

    fn required_config(&self) -> Result<ExperimentConfig> {
        self.config()?
            .ok_or_else(|| Error::Config("this command needs --config <path>".into()))
    }

    fn out_dir(&self, cfg: Option<&ExperimentConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.map(|c| c.output_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn seed(&self, cfg: Option<&ExperimentConfig>) -> u64 {
        self.seed.or(cfg.map(|c| c.seed)).unwrap_or(0)
    }
}

fn load_space(path: &Path, alignment: Alignment) -> Result<EmbeddingSpace> {
    let mut space = EmbeddingSpace::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Data(format!("{}: {io}", path.display())),
        other => other,
    })?;
    space.alignment = alignment;
    Ok(space)
}

fn load_pairs(path: &Path, delimiter: char) -> Result<EquivalenceSet> {
    if !delimiter.is_ascii() {
        return Err(Error::Config("delimiter must be one ASCII character".into()));
    }
    EquivalenceSet::load(path, delimiter as u8).map_err(|e| match e {
        Error::Io(io) => Error::Data(format!("{}: {io}", path.display())),
        other => other,
    })
}

/// Source space in destination coordinates: translated when a matrix is
/// given, otherwise taken as already shared.
fn source_space(source: &Path, target: &EmbeddingSpace, matrix: Option<&Path>) -> Result<EmbeddingSpace> {
    match matrix {
        Some(m) => {
            let src = load_space(source, Alignment::PlatformLocal)?;
            let t = TranslationMatrix::load(m, &src.name, &target.name).map_err(|e| match e {
                Error::Io(io) => Error::Data(format!("{}: {io}", m.display())),
                other => other,
            })?;
            apply_translation(&t, &src)
        }
        None => load_space(source, Alignment::Shared),
    }
}

/// Platform part of a space name, whether it came from the pipeline
/// (`fine:skill2vec`) or from a file stem (`fine-skill2vec`).
fn platform_of(space: &EmbeddingSpace) -> &str {
    const KINDS: [&str; 6] = ["bow", "tfidf", "content2vec", "skill2vec", "tamf", "concat"];
    let name = space.name.split(['>', '~']).next().unwrap_or("");
    for kind in KINDS {
        for sep in [':', '-'] {
            if let Some(p) = name.strip_suffix(kind).and_then(|p| p.strip_suffix(sep)) {
                return p;
            }
        }
    }
    name
}

/// `{src}_to_{dst}` file stem; platform names only when a model name gives
/// the path its context, as `run` does.
fn stem(src: &EmbeddingSpace, dst: &EmbeddingSpace, by_platform: bool) -> String {
    if by_platform {
        format!("{}_to_{}", file_stem(platform_of(src)), file_stem(platform_of(dst)))
    } else {
        format!("{}_to_{}", file_stem(&src.name), file_stem(&dst.name))
    }
}

fn model_dir(out: PathBuf, model: Option<&str>) -> PathBuf {
    match model {
        Some(m) => out.join(file_stem(m)),
        None => out,
    }
}

fn synth(cli: &Cli) -> Result<()> {
    let cfg = cli.config()?;
    let synth = match &cfg {
        Some(c) => c
            .data
            .synthetic
            .clone()
            .ok_or_else(|| Error::Config("config has no `data.synthetic` section".into()))?,
        None => SynthConfig::default(),
    };
    let out = cli.out_dir(cfg.as_ref());
    let pair = generate_synthetic_pair(&synth, cli.seed(cfg.as_ref()))?;
    let files = pair.write_files(&out)?;
    for (name, path) in files.logs.iter().chain(&files.texts) {
        println!("{name}\t{}", path.display());
    }
    println!("pairs\t{}", files.pairs.display());
    Ok(())
}

fn represent(cfg: &ExperimentConfig, report: Option<&Path>) -> Result<()> {
    let report: Option<EvaluationReport> = match report {
        Some(p) => Some(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => None,
    };
    let data = ingest(cfg).map_err(|e| e.in_stage("ingest"))?;
    let ws = Workspace::new(cfg, &data.corpora);
    for src in directions(cfg) {
        let truth = truth_for(&data, src);
        for model in models_for(&ws, src)? {
            use skill_crosswalk::evaluate::CrosswalkModel;
            let params: Params = report
                .as_ref()
                .and_then(|r| {
                    r.models
                        .iter()
                        .find(|m| m.model == model.name && m.direction == model.direction())
                })
                .map(|m| m.most_selected())
                .or_else(|| model.grid().into_iter().next())
                .unwrap_or_default();
            let sides = model.sides(&params, &truth).map_err(|e| e.in_stage("represent"))?;
            let dir = cfg.output_dir.join("spaces").join(file_stem(&model.name)).join(format!(
                "{}_to_{}",
                file_stem(ws.platform(model.src)),
                file_stem(ws.platform(model.dst()))
            ));
            fs::create_dir_all(&dir)?;
            for space in &sides {
                space.save(&dir.join(format!("{}.vec", file_stem(&space.name))))?;
            }
            println!("{}\t{}", model.name, dir.display());
        }
    }
    Ok(())
}

fn translate(cli: &Cli, args: &TranslateArgs) -> Result<()> {
    let cfg = cli.config()?;
    let src = load_space(&args.source, Alignment::PlatformLocal)?;
    let dst = load_space(&args.target, Alignment::Shared)?;
    let mut pairs = load_pairs(&args.pairs, args.delimiter)?;
    if args.reverse {
        pairs = pairs.reversed();
    }
    let direction = format!("{}->{}", platform_of(&src), platform_of(&dst));
    let label = match &args.model {
        Some(m) => format!("translation/{m}/{direction}"),
        None => format!("translation/{direction}"),
    };
    let opts = TranslationOptions {
        seed: derive_seed(cli.seed(cfg.as_ref()), &label),
        ..cfg.as_ref().map(|c| c.translation.clone()).unwrap_or_default()
    };
    let t = fit_translation(&src, &dst, &usable_pairs(&pairs, &src, &dst), &opts)?;
    let dir = model_dir(cli.out_dir(cfg.as_ref()).join("translation"), args.model.as_deref());
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.txt", stem(&src, &dst, args.model.is_some())));
    t.save(&path)?;
    let m = &t.training_meta;
    println!(
        "{}\tbest epoch {} of {}, validation loss {:.6} -> {:.6}",
        path.display(),
        m.best_epoch,
        m.epochs_run,
        m.initial_validation_loss,
        m.best_validation_loss
    );
    Ok(())
}

fn rank(cli: &Cli, args: &RankArgs) -> Result<()> {
    let cfg = cli.config()?;
    let dst = load_space(&args.target, Alignment::Shared)?;
    let src = source_space(&args.source, &dst, args.matrix.as_deref())?;
    let k = args.k.or(cfg.as_ref().map(|c| c.evaluation.k)).unwrap_or(5);
    let full = rank_equivalents(&src, &dst, None)?;
    let mut p = match args.threshold {
        Some(t) => apply_none_threshold(&full, t),
        None => full,
    };
    for preds in p.by_source.values_mut() {
        preds.truncate(k);
    }
    p.k = Some(k);
    let dir = model_dir(cli.out_dir(cfg.as_ref()).join("predictions"), args.model.as_deref());
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.tsv", stem(&src, &dst, args.model.is_some())));
    p.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn analyze(cli: &Cli, args: &AnalyzeArgs) -> Result<()> {
    let cfg = cli.config()?;
    let dst = load_space(&args.target, Alignment::Shared)?;
    let src = source_space(&args.source, &dst, args.matrix.as_deref())?;
    let truth = load_pairs(&args.pairs, args.delimiter)?;
    let mut settings = cfg.as_ref().map(|c| c.analysis.clone()).unwrap_or_default();
    if let Some(k) = args.clusters {
        settings.clusters = k;
    }
    let (ps, pd) = (platform_of(&src).to_string(), platform_of(&dst).to_string());
    let dir = cli.out_dir(cfg.as_ref()).join("analysis");
    let seed = derive_seed(cli.seed(cfg.as_ref()), "analysis");
    let summary = analyze_spaces(&dir, [(&ps, &src), (&pd, &dst)], &truth, &settings, seed, "files")?;
    for (cluster, score) in &summary.scores {
        match score {
            Some(s) => println!("cluster {cluster}\t{s:.3}"),
            None => println!("cluster {cluster}\t-"),
        }
    }
    Ok(())
}

fn evaluate(cfg: &ExperimentConfig) -> Result<()> {
    let pool = thread_pool(cfg)?;
    rayon_pool::install(pool.as_ref(), || {
        let data = ingest(cfg).map_err(|e| e.in_stage("ingest"))?;
        let ws = Workspace::new(cfg, &data.corpora);
        let report = pipeline::evaluate_all(&ws, &data)?;
        write_report(&report, &cfg.output_dir)?;
        print!("{}", report.render_table());
        Ok(())
    })
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth => synth(cli),
        Command::Ingest => {
            let cfg = cli.required_config()?;
            let data = ingest(&cfg).map_err(|e| e.in_stage("ingest"))?;
            let dir = cfg.output_dir.join("ingest");
            write_ingest(&data, &dir)?;
            println!("{}", serde_json::to_string_pretty(&data.summary)?);
            Ok(())
        }
        Command::Represent { report } => {
            let cfg = cli.required_config()?;
            let pool = thread_pool(&cfg)?;
            rayon_pool::install(pool.as_ref(), || represent(&cfg, report.as_deref()))
        }
        Command::Translate(args) => translate(cli, args),
        Command::Rank(args) => rank(cli, args),
        Command::Evaluate => evaluate(&cli.required_config()?),
        Command::Analyze(args) => analyze(cli, args),
        Command::Run => {
            let cfg = cli.required_config()?;
            let out = run_pipeline(&cfg)?;
            print!("{}", out.report.render_table());
            println!("{} files in {}", out.manifest.files.len(), cfg.output_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
