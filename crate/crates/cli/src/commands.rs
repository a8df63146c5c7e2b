use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use newsstake::evaluate::{
    evaluate_predictions, labeled_splits, read_golds, robustness_sweep, to_pretty_json, write_csv, EvalReport,
    RobustnessReport,
};
use newsstake::http::HttpTransport;
use newsstake::ingest::{filter_by_topic, load_corpus, load_labeled, make_splits, write_labeled};
use newsstake::knowledge::{KnowledgeBase, KnowledgeCache, Overrides, RemoteEncyclopedia};
use newsstake::nli::{compile_dataset, write_nli, PromptTemplate, TemplateRegistry};
use newsstake::pipeline::{
    describe_corpus, read_descriptions, write_descriptions, BackgroundSource, EntityRecognizer, Gazetteer,
    NoBackground, SidecarRecognizer, SimilarityResolver,
};
use newsstake::sidecar::SidecarClient;
use newsstake::zeroshot::{
    classify_described, read_predictions, write_predictions, EntailmentScorer, LexicalScorer, Mode, SidecarScorer,
};
use newsstake::{LabelRegistry, PipelineConfig};

use crate::manifest::{manifest_path_for, Recorder};
use crate::{
    BackendKind, ClassifyArgs, Cli, Command, CompileArgs, DescribeArgs, EvalArgs, IngestArgs, RecognizerKind,
    RobustnessArgs, ScorerArgs, SidecarArgs, SplitArgs, TemplateArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!(newsstake::Error::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let mut recorder = Recorder::start(command_name(&cli.command));
    recorder.optional_input(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(args) => ingest(args, config, recorder),
        Command::Describe(args) => describe(args, config, recorder),
        Command::Split(args) => split(args, config, recorder),
        Command::Compile(args) => compile(args, config, recorder),
        Command::Classify(args) => classify(args, config, recorder),
        Command::Eval(args) => eval(args, config, recorder),
        Command::Robustness(args) => robustness(args, config, recorder),
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Ingest(_) => "ingest",
        Command::Describe(_) => "describe",
        Command::Split(_) => "split",
        Command::Compile(_) => "compile",
        Command::Classify(_) => "classify",
        Command::Eval(_) => "eval",
        Command::Robustness(_) => "robustness",
    }
}

fn registry(path: Option<&Path>, recorder: &mut Recorder) -> Result<LabelRegistry> {
    match path {
        Some(p) => {
            recorder.input(p)?;
            Ok(LabelRegistry::load(p)?)
        }
        None => Ok(LabelRegistry::builtin()),
    }
}

fn template_registry(path: Option<&Path>, recorder: &mut Recorder) -> Result<TemplateRegistry> {
    match path {
        Some(p) => {
            recorder.input(p)?;
            Ok(TemplateRegistry::load(p)?)
        }
        None => Ok(TemplateRegistry::builtin()),
    }
}

fn template(args: &TemplateArgs, config: &mut PipelineConfig, recorder: &mut Recorder) -> Result<PromptTemplate> {
    if let Some(id) = &args.template {
        config.template_id = id.clone();
    }
    let templates = template_registry(args.templates.as_deref(), recorder)?;
    Ok(templates.get(&config.template_id)?.clone())
}

fn sidecar_client(args: &SidecarArgs) -> SidecarClient {
    SidecarClient::new(&args.endpoint, Duration::from_secs(args.timeout_secs)).with_max_batch(args.max_batch)
}

fn scorer(args: &ScorerArgs) -> Box<dyn EntailmentScorer> {
    match args.backend {
        BackendKind::Lexical => Box::new(LexicalScorer),
        BackendKind::Sidecar => Box::new(SidecarScorer::new(sidecar_client(&args.sidecar))),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ingest(args: IngestArgs, config: PipelineConfig, mut recorder: Recorder) -> Result<()> {
    recorder.input(&args.corpus)?;
    let mut keywords = args.keyword.clone();
    if let Some(path) = &args.keywords {
        recorder.input(path)?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| newsstake::Error::Io { path: path.clone(), source: e })?;
        keywords.extend(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from));
    }
    let corpus = load_corpus(&args.corpus)?;
    let kept = filter_by_topic(&corpus, &keywords, args.min_hits)?;
    if kept.is_empty() {
        log::warn!("no documents matched the keywords");
    }
    eprintln!("kept {} of {} documents", kept.len(), corpus.len());
    kept.write(&args.out)?;
    recorder.finish(&config, &[&args.out], &manifest_path_for(&args.out))
}

fn describe(args: DescribeArgs, mut config: PipelineConfig, mut recorder: Recorder) -> Result<()> {
    if let Some(n) = args.min_mentions {
        config.saliency_min_mentions = n;
    }
    config.validate()?;
    recorder.input(&args.corpus)?;
    let corpus = load_corpus(&args.corpus)?;

    let recognizer: Box<dyn EntityRecognizer> = match args.recognizer {
        RecognizerKind::Builtin => {
            let Some(path) = &args.gazetteer else {
                bail!(newsstake::Error::Config("the builtin recognizer needs --gazetteer".into()));
            };
            recorder.input(path)?;
            Box::new(Gazetteer::load(path)?)
        }
        RecognizerKind::Sidecar => Box::new(SidecarRecognizer::new(sidecar_client(&args.sidecar))),
    };

    let overrides = match &args.overrides {
        Some(p) => {
            recorder.input(p)?;
            Overrides::load(p)?
        }
        None => Overrides::default(),
    };
    let background: Box<dyn BackgroundSource> = match (&args.cache_dir, args.offline) {
        (None, true) => Box::new(NoBackground),
        (dir, offline) => {
            let dir = dir.clone().unwrap_or_else(|| PathBuf::from(".newsstake-cache"));
            recorder.optional_input(Some(&dir))?;
            let remote = (!offline).then(|| {
                RemoteEncyclopedia::new(
                    &args.encyclopedia_url,
                    Arc::new(HttpTransport::new(Duration::from_secs(args.sidecar.timeout_secs))),
                )
            });
            Box::new(KnowledgeBase {
                cache: KnowledgeCache::open(dir)?,
                overrides,
                remote,
                sentences: config.background_sentences,
            })
        }
    };

    let described = describe_corpus(
        &corpus.documents,
        recognizer.as_ref(),
        &SimilarityResolver::new(config.clone()),
        background.as_ref(),
        &config,
    )?;
    eprintln!("described {} entities", described.len());
    write_descriptions(&args.out, &described)?;
    recorder.finish(&config, &[&args.out], &manifest_path_for(&args.out))
}

fn split(args: SplitArgs, config: PipelineConfig, mut recorder: Recorder) -> Result<()> {
    let registry = registry(args.registry.as_deref(), &mut recorder)?;
    recorder.input(&args.labeled)?;
    recorder.seed(args.seed);
    let examples = load_labeled(&args.labeled, &registry)?;
    let unseen: BTreeSet<String> = args.unseen.iter().cloned().collect();
    if let Some(bad) = unseen.iter().find(|l| !registry.contains(l)) {
        bail!(newsstake::Error::UnknownLabel {
            record: "--unseen".into(),
            label: bad.clone(),
        });
    }
    let splits = make_splits(&examples, &unseen, args.dev_fraction, args.seed)?;
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let parts = [
        ("train.jsonl", &splits.train),
        ("dev.jsonl", &splits.dev),
        ("test_seen.jsonl", &splits.test_seen),
        ("test_unseen.jsonl", &splits.test_unseen),
    ];
    let mut outputs = Vec::new();
    for (name, part) in parts {
        let path = args.out_dir.join(name);
        write_labeled(&path, part)?;
        eprintln!("{name}: {} examples", part.len());
        outputs.push(path);
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    recorder.finish(&config, &refs, &args.out_dir.join("manifest.json"))
}

fn compile(args: CompileArgs, mut config: PipelineConfig, mut recorder: Recorder) -> Result<()> {
    let registry = registry(args.templates.registry.as_deref(), &mut recorder)?;
    let template = template(&args.templates, &mut config, &mut recorder)?;
    recorder.input(&args.labeled)?;
    let examples = load_labeled(&args.labeled, &registry)?;
    let instances = compile_dataset(&examples, &registry, &template)?;
    eprintln!(
        "compiled {} instances from {} examples",
        instances.len(),
        examples.len()
    );
    write_nli(&args.out, &instances)?;
    recorder.finish(&config, &[&args.out], &manifest_path_for(&args.out))
}

fn classify(args: ClassifyArgs, mut config: PipelineConfig, mut recorder: Recorder) -> Result<()> {
    let registry = registry(args.templates.registry.as_deref(), &mut recorder)?;
    let template = template(&args.templates, &mut config, &mut recorder)?;
    recorder.input(&args.descriptions)?;
    let mode = match (args.threshold, args.top_k) {
        (None, None) => Mode::Single,
        (threshold, k) => Mode::Multi {
            threshold: threshold.unwrap_or(0.0),
            k: k.unwrap_or(1),
        },
    };
    let described = read_descriptions(&args.descriptions)?;
    let scorer = scorer(&args.scorer);
    let predictions = classify_described(&described, &registry, &template, scorer.as_ref(), mode)?;
    write_predictions(&args.out, &predictions)?;
    recorder.finish(&config, &[&args.out], &manifest_path_for(&args.out))
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    reports: &'a [EvalReport],
}

fn eval(args: EvalArgs, config: PipelineConfig, mut recorder: Recorder) -> Result<()> {
    let registry = registry(args.registry.as_deref(), &mut recorder)?;
    recorder.input(&args.predictions)?;
    recorder.input(&args.golds)?;
    let predictions = read_predictions(&args.predictions)?;
    let golds = read_golds(&args.golds, &registry)?;
    let reports = evaluate_predictions(&predictions, &golds)?;
    for r in &reports {
        eprintln!("{}: macro F1 {:.4} over {} examples", r.split, r.macro_f1, r.n_examples);
    }
    write_text(&args.out, &to_pretty_json(&EvalOutput { reports: &reports }))?;
    let mut outputs = vec![args.out.as_path()];
    if let Some(csv) = &args.csv {
        let refs: Vec<&EvalReport> = reports.iter().collect();
        write_csv(File::create(csv).with_context(|| format!("creating {}", csv.display()))?, &refs)?;
        outputs.push(csv);
    }
    recorder.finish(&config, &outputs, &manifest_path_for(&args.out))
}

#[derive(Serialize)]
struct SplitRobustness {
    split: String,
    #[serde(flatten)]
    report: RobustnessReport,
}

#[derive(Serialize)]
struct RobustnessOutput<'a> {
    splits: &'a [SplitRobustness],
}

fn robustness(args: RobustnessArgs, config: PipelineConfig, mut recorder: Recorder) -> Result<()> {
    let registry = registry(args.registry.as_deref(), &mut recorder)?;
    let templates = template_registry(args.templates.as_deref(), &mut recorder)?;
    recorder.input(&args.descriptions)?;
    recorder.input(&args.golds)?;
    let described = read_descriptions(&args.descriptions)?;
    let golds = read_golds(&args.golds, &registry)?;
    let scorer = scorer(&args.scorer);

    let mut splits = Vec::new();
    for (split, examples) in labeled_splits(&described, &golds)? {
        let report = robustness_sweep(&split, &examples, &registry, templates.templates(), scorer.as_ref())?;
        eprintln!("{split}: max macro-F1 spread {:.4}", report.max_spread);
        splits.push(SplitRobustness { split, report });
    }
    write_text(&args.out, &to_pretty_json(&RobustnessOutput { splits: &splits }))?;
    let mut outputs = vec![args.out.as_path()];
    if let Some(csv) = &args.csv {
        let refs: Vec<&EvalReport> = splits.iter().flat_map(|s| s.report.reports.iter()).collect();
        write_csv(File::create(csv).with_context(|| format!("creating {}", csv.display()))?, &refs)?;
        outputs.push(csv);
    }
    recorder.finish(&config, &outputs, &manifest_path_for(&args.out))
}
