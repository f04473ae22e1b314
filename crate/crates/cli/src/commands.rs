use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, TryLockError};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _};
use crossnli::dataset::{
    build_suite, read_jsonl, read_manifest, write_suite, DatasetError, Pairing, SuiteConfig,
    SuiteManifest, DEFAULT_COUNT, DEFAULT_SEED,
};
use crossnli::eval::{read_predictions, run_eval, valid_run_id, EvalError, RunOptions};
use crossnli::gateway::{EmbeddingClient, GatewayConfig, GatewayError};
use crossnli::lexicon::{load_lexicon, LanguageCode, Lexicon, LexiconError, MtClient};
use crossnli::logic::{builtin_templates, load_templates, Template};
use crossnli::report::{
    cells_csv, matrix, render_matrix, render_quality, score, translation_quality, write_report,
    Format, QualityRow, ReportError,
};

use crate::{Context, EvalArgs, GenArgs, QualityArgs, ReportArgs, ValidateArgs};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_GATEWAY: u8 = 4;
pub const EXIT_INCOMPLETE: u8 = 5;
const EXIT_OTHER: u8 = 1;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }

    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure::new(EXIT_CONFIG, error)
    }

    fn validation(error: impl Into<anyhow::Error>) -> Self {
        Failure::new(EXIT_VALIDATION, error)
    }

    fn other(error: impl Into<anyhow::Error>) -> Self {
        Failure::new(EXIT_OTHER, error)
    }
}

impl From<GatewayError> for Failure {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::MissingApiKey { .. } | GatewayError::Precondition(_) => {
                Failure::config(e)
            }
            GatewayError::Cache { .. } => Failure::other(e),
            _ => Failure::new(EXIT_GATEWAY, e),
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::CountTooSmall(_)
            | DatasetError::UnknownLanguage(_)
            | DatasetError::DuplicateLanguage(_)
            | DatasetError::NoLanguages
            | DatasetError::UnknownTemplate(_) => Failure::config(e),
            DatasetError::Io { .. } => Failure::other(e),
            _ => Failure::validation(e),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Gateway(g) => g.into(),
            EvalError::DatasetChanged { .. } | EvalError::BadRunId(_) => Failure::config(e),
            EvalError::EmptyDataset | EvalError::EmptyText(_) | EvalError::Format { .. } => {
                Failure::validation(e)
            }
            EvalError::Io { .. } => Failure::other(e),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Gateway(g) => g.into(),
            ReportError::Io { .. } => Failure::other(e),
            _ => Failure::validation(e),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Exclusive hold on an output directory for the lifetime of a command.
struct OutputLock {
    _file: File,
}

impl OutputLock {
    fn acquire(out: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(out)
            .with_context(|| format!("cannot create {}", out.display()))
            .map_err(Failure::other)?;
        let path = out.join(".crossnli.lock");
        let file = File::create(&path)
            .with_context(|| format!("cannot create {}", path.display()))
            .map_err(Failure::other)?;
        match file.try_lock() {
            Ok(()) => Ok(OutputLock { _file: file }),
            Err(TryLockError::WouldBlock) => Err(Failure::config(anyhow!(
                "another crossnli process is using {}",
                out.display()
            ))),
            Err(TryLockError::Error(e)) => Err(Failure::other(e)),
        }
    }
}

fn language(code: &str) -> Result<LanguageCode, Failure> {
    LanguageCode::new(code.trim()).map_err(Failure::config)
}

fn load_lexicon_from(path: Option<&Path>) -> Result<Lexicon, LexiconError> {
    match path {
        Some(p) => load_lexicon(p),
        None => Ok(Lexicon::seed()),
    }
}

fn load_templates_from(path: Option<&Path>) -> Result<Vec<Template>, Failure> {
    match path {
        Some(p) => load_templates(p).map_err(|errors| {
            let lines: Vec<String> = errors.iter().map(|e| format!("  - {e}")).collect();
            Failure::validation(anyhow!(
                "{} has {} problem(s):\n{}",
                p.display(),
                errors.len(),
                lines.join("\n")
            ))
        }),
        None => Ok(builtin_templates()),
    }
}

fn lexicon_failure(e: LexiconError) -> Failure {
    match e {
        LexiconError::Io { .. } => Failure::config(e),
        _ => Failure::validation(e),
    }
}

pub fn gen(ctx: &Context, args: GenArgs) -> CmdResult {
    let lexicon_path = args.lexicon.as_deref().or(ctx.config.lexicon.as_deref());
    let lexicon = load_lexicon_from(lexicon_path).map_err(lexicon_failure)?;
    let templates = load_templates_from(
        args.templates
            .as_deref()
            .or(ctx.config.templates.as_deref()),
    )?;
    let languages = if !args.languages.is_empty() {
        args.languages
            .iter()
            .map(|c| language(c))
            .collect::<Result<_, _>>()?
    } else if let Some(langs) = &ctx.config.languages {
        langs.clone()
    } else {
        lexicon.languages().to_vec()
    };
    let mut suite_config = SuiteConfig::new(
        languages,
        args.count.or(ctx.config.count).unwrap_or(DEFAULT_COUNT),
        ctx.seed.unwrap_or(DEFAULT_SEED),
    );
    suite_config.template_ids = args.template_ids;
    suite_config.validate(&lexicon)?;

    let _lock = OutputLock::acquire(&ctx.out)?;
    let suite = build_suite(&suite_config, &templates, &lexicon)?;
    let dir = ctx.out.join("suite");
    write_suite(&suite, &dir)?;
    println!(
        "wrote {} datasets of {} examples to {} (suite {})",
        suite.datasets.len(),
        suite_config.count,
        dir.display(),
        suite.manifest.suite_id
    );
    Ok(())
}

fn open_suite(dir: &Path) -> Result<SuiteManifest, Failure> {
    read_manifest(dir).map_err(|e| {
        Failure::config(anyhow!(
            "no generated suite at {} ({e}); run `crossnli gen` first",
            dir.display()
        ))
    })
}

fn chat_config(ctx: &Context, args: &EvalArgs) -> Result<GatewayConfig, Failure> {
    let mut chat = match (&ctx.config.chat, &args.endpoint, &args.model) {
        (Some(c), _, _) => c.clone(),
        (None, Some(endpoint), Some(model)) => GatewayConfig::new(endpoint, model),
        _ => return Err(Failure::config(anyhow!(
            "no chat endpoint configured: set `chat` in the config or pass --endpoint and --model"
        ))),
    };
    if let Some(endpoint) = &args.endpoint {
        chat.endpoint_url = endpoint.clone();
    }
    if let Some(model) = &args.model {
        chat.model = model.clone();
    }
    if let Some(p) = args.parallelism {
        chat.parallelism = p.max(1);
    }
    if chat.cache_dir.is_none() {
        chat.cache_dir = Some(ctx.out.join("cache"));
    }
    Ok(chat)
}

/// Run id derived from model and suite, so plain reruns resume.
fn default_run_id(model: &str, suite_id: &str) -> String {
    let mut id: String = model
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '-'
            }
        })
        .collect();
    id = id.trim_matches(|c| c == '-' || c == '.').to_owned();
    if id.is_empty() {
        id = "run".into();
    }
    format!("{id}-{suite_id}")
}

fn file_slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn eval(ctx: &Context, args: EvalArgs) -> CmdResult {
    let suite_dir = args.suite.clone().unwrap_or_else(|| ctx.out.join("suite"));
    let manifest = open_suite(&suite_dir)?;
    let chat = chat_config(ctx, &args)?;
    let mode = args.mode.or(ctx.config.parsing_mode).unwrap_or_default();

    let mut selected: Vec<String> = manifest.files.clone();
    if !args.pairs.is_empty() {
        selected = Vec::new();
        for p in &args.pairs {
            let file = format!("{}.jsonl", p.trim());
            if !manifest.files.contains(&file) {
                return Err(Failure::config(anyhow!(
                    "pairing `{p}` is not part of the suite"
                )));
            }
            selected.push(file);
        }
    }

    let runs_dir = ctx.out.join("runs");
    let run_id = match (&args.resume, &args.run_id) {
        (Some(id), _) => {
            let prefix = format!("{id}__");
            let known = fs::read_dir(&runs_dir)
                .into_iter()
                .flatten()
                .flatten()
                .any(|e| {
                    let name = e.file_name().to_string_lossy().into_owned();
                    name.starts_with(&prefix) && name.ends_with(".manifest.json")
                });
            if !known {
                return Err(Failure::config(anyhow!(
                    "no run `{id}` to resume in {}",
                    runs_dir.display()
                )));
            }
            id.clone()
        }
        (None, Some(id)) => id.clone(),
        (None, None) => default_run_id(&chat.model, &manifest.suite_id),
    };
    if !valid_run_id(&run_id) {
        return Err(EvalError::BadRunId(run_id).into());
    }

    // fails on a missing API key before anything is sent
    let gateway = chat.connect()?;
    let _lock = OutputLock::acquire(&ctx.out)?;
    let options = RunOptions {
        run_id: run_id.clone(),
        dir: runs_dir,
        mode,
        parallelism: chat.parallelism,
    };
    let mut incomplete = Vec::new();
    for file in &selected {
        let dataset = read_jsonl(&suite_dir.join(file))?;
        let outcome = run_eval(&dataset, &gateway, &chat, &options)?;
        let cell = (!outcome.records.is_empty())
            .then(|| score(&outcome.records))
            .transpose()?;
        let accuracy = cell.map_or("-".to_owned(), |c| format!("{:.3}", c.accuracy));
        println!(
            "{}: {}/{} done, accuracy {accuracy}{}",
            dataset.pairing(),
            outcome.records.len(),
            dataset.examples.len(),
            if outcome.is_complete() {
                ""
            } else {
                " (incomplete)"
            }
        );
        if let Some((id, e)) = outcome.failures.first() {
            eprintln!("  {} failed, first: {id}: {e}", outcome.failures.len());
        }
        if !outcome.is_complete() {
            incomplete.push(dataset.pairing().to_string());
        }
    }
    if !incomplete.is_empty() {
        return Err(Failure::new(
            EXIT_INCOMPLETE,
            anyhow!(
                "run `{run_id}` is incomplete for {}; rerun with --resume {run_id}",
                incomplete.join(", ")
            ),
        ));
    }
    println!("run `{run_id}` complete");
    Ok(())
}

fn formats(spec: &str) -> Result<Vec<Format>, Failure> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(Format::ALL.to_vec());
    }
    spec.split(',')
        .map(|f| {
            f.trim()
                .parse::<Format>()
                .map_err(|e| Failure::config(anyhow!(e)))
        })
        .collect()
}

pub fn report(ctx: &Context, args: ReportArgs) -> CmdResult {
    let formats = formats(&args.format)?;
    let runs_dir = args.runs.clone().unwrap_or_else(|| ctx.out.join("runs"));
    let entries = fs::read_dir(&runs_dir)
        .with_context(|| format!("cannot read run directory {}", runs_dir.display()))
        .map_err(Failure::config)?;
    let mut files: Vec<PathBuf> = entries
        .flatten()
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".predictions.jsonl"))
        })
        .collect();
    files.sort();

    // model -> run id -> pairing -> records
    let mut runs: BTreeMap<String, BTreeMap<String, BTreeMap<Pairing, PathBuf>>> = BTreeMap::new();
    let mut loaded = BTreeMap::new();
    for path in files {
        let (manifest, records) = read_predictions(&path)?;
        if args
            .run_id
            .as_ref()
            .is_some_and(|id| id != &manifest.run_id)
        {
            continue;
        }
        runs.entry(manifest.model.clone())
            .or_default()
            .entry(manifest.run_id.clone())
            .or_default()
            .insert(manifest.pairing.clone(), path.clone());
        loaded.insert(path, records);
    }
    if runs.is_empty() {
        return Err(Failure::config(anyhow!(
            "no finished runs in {}",
            runs_dir.display()
        )));
    }

    let suite_languages = read_manifest(&ctx.out.join("suite"))
        .ok()
        .map(|m| m.languages);
    let _lock = OutputLock::acquire(&ctx.out)?;
    for (model, by_run) in &runs {
        if by_run.len() > 1 {
            let ids: Vec<&String> = by_run.keys().collect();
            return Err(Failure::config(anyhow!(
                "model `{model}` has several runs ({ids:?}); choose one with --run-id"
            )));
        }
        let (run_id, pairings) = by_run.iter().next().expect("one run");
        let languages: Vec<LanguageCode> = match &suite_languages {
            Some(langs) => langs.clone(),
            None => pairings
                .keys()
                .flat_map(|p| [p.premise_language.clone(), p.hypothesis_language.clone()])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        let cells = pairings
            .values()
            .map(|path| score(&loaded[path]))
            .collect::<Result<Vec<_>, _>>()?;
        let m = matrix(&cells, &languages, model).map_err(|e| match e {
            ReportError::MissingPairing(p) => Failure::validation(anyhow!(
                "run `{run_id}` has no predictions file for pairing {p} ({run_id}__{p}.predictions.jsonl)"
            )),
            other => other.into(),
        })?;
        let stem = file_slug(model);
        for format in &formats {
            let path = ctx
                .out
                .join("reports")
                .join(format!("{stem}.{}", format.extension()));
            write_report(&path, &render_matrix(&m, *format))?;
            println!("wrote {}", path.display());
            if *format == Format::Csv {
                let long = ctx.out.join("reports").join(format!("{stem}.cells.csv"));
                write_report(&long, &cells_csv(&m))?;
                println!("wrote {}", long.display());
            }
        }
    }
    Ok(())
}

/// Premises of the `{lang}-{lang}` dataset keyed by abstract id.
fn premises(suite_dir: &Path, lang: &LanguageCode) -> Result<BTreeMap<String, String>, Failure> {
    let path = suite_dir.join(format!("{lang}-{lang}.jsonl"));
    let dataset = read_jsonl(&path)?;
    Ok(dataset
        .examples
        .into_iter()
        .map(|e| (e.abstract_id, e.premise_text))
        .collect())
}

pub fn quality(ctx: &Context, args: QualityArgs) -> CmdResult {
    let formats = formats(&args.format)?;
    if args.sample == 0 {
        return Err(Failure::config(anyhow!("--sample must be at least 1")));
    }
    let suite_dir = args.suite.clone().unwrap_or_else(|| ctx.out.join("suite"));
    let manifest = open_suite(&suite_dir)?;
    let english = LanguageCode::new("en").expect("valid code");
    if !manifest.languages.contains(&english) {
        return Err(Failure::config(anyhow!(
            "the suite has no English datasets to compare against"
        )));
    }
    let targets = args
        .language
        .iter()
        .map(|c| {
            let l = language(c)?;
            if manifest.languages.contains(&l) {
                Ok(l)
            } else {
                Err(Failure::config(anyhow!(
                    "unknown language `{l}`: the suite covers {}",
                    manifest
                        .languages
                        .iter()
                        .map(|l| l.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                )))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut embeddings = ctx.config.embeddings.clone().ok_or_else(|| {
        Failure::config(anyhow!(
            "no embeddings endpoint configured: set `embeddings` in the config"
        ))
    })?;
    if embeddings.cache_dir.is_none() {
        embeddings.cache_dir = Some(ctx.out.join("cache"));
    }
    let mt = if args.via_mt {
        let config = ctx.config.mt.as_ref().ok_or_else(|| {
            Failure::config(anyhow!("--via-mt needs an `mt` section in the config"))
        })?;
        Some(MtClient::new(config)?)
    } else {
        None
    };
    let gateway = embeddings.connect()?;
    let embedder = EmbeddingClient {
        gateway: &gateway,
        endpoint: embeddings.endpoint_url.clone(),
        model: embeddings.model.clone(),
    };

    let _lock = OutputLock::acquire(&ctx.out)?;
    let source = premises(&suite_dir, &english)?;
    let mut rows: Vec<QualityRow> = Vec::new();
    for target in &targets {
        let translated_by_id = premises(&suite_dir, target)?;
        let aligned: Vec<(&String, &String)> = source
            .iter()
            .filter_map(|(id, en)| translated_by_id.get(id).map(|_| (id, en)))
            .collect();
        let n = if args.sample > aligned.len() {
            eprintln!(
                "warning: {target}: only {} aligned pairs, sample clamped from {}",
                aligned.len(),
                args.sample
            );
            aligned.len()
        } else {
            args.sample
        };
        let english_texts: Vec<String> = aligned[..n].iter().map(|(_, en)| (*en).clone()).collect();
        let translated: Vec<String> = match &mt {
            Some(client) => english_texts
                .iter()
                .map(|t| client.translate_external(t, &english, target))
                .collect::<Result<_, _>>()?,
            None => aligned[..n]
                .iter()
                .map(|(id, _)| translated_by_id[*id].clone())
                .collect(),
        };
        let row = translation_quality(&english_texts, &translated, target, &embedder)?;
        println!(
            "{}: mean cosine {:.4} over {} pairs",
            row.language, row.mean_cosine, row.sample_size
        );
        rows.push(row);
    }
    for format in &formats {
        let path = ctx
            .out
            .join("quality")
            .join(format!("quality.{}", format.extension()));
        write_report(&path, &render_quality(&rows, *format))?;
        println!("wrote {}", path.display());
    }
    if let Some(threshold) = args.min_similarity {
        let below: Vec<String> = rows
            .iter()
            .filter(|r| r.mean_cosine < threshold)
            .map(|r| format!("{} ({:.4})", r.language, r.mean_cosine))
            .collect();
        if !below.is_empty() {
            return Err(Failure::validation(anyhow!(
                "mean cosine below {threshold} for {}",
                below.join(", ")
            )));
        }
    }
    Ok(())
}

pub fn validate(ctx: &Context, args: ValidateArgs) -> CmdResult {
    let lexicon_path = args.lexicon.as_deref().or(ctx.config.lexicon.as_deref());
    let templates_path = args
        .templates
        .as_deref()
        .or(ctx.config.templates.as_deref());
    let mut problems = Vec::new();

    match load_lexicon_from(lexicon_path) {
        Ok(lexicon) => {
            println!(
                "lexicon ok: {} languages, {} concepts",
                lexicon.languages().len(),
                lexicon.concepts().len()
            );
            for l in ctx.config.languages.iter().flatten() {
                if !lexicon.has_language(l) {
                    problems.push(format!("configured language `{l}` is not in the lexicon"));
                }
            }
        }
        Err(LexiconError::Invalid(issues)) => {
            problems.extend(issues.iter().map(|i| format!("lexicon: {i}")));
        }
        Err(e) => problems.push(format!("lexicon: {e}")),
    }
    match templates_path {
        None => println!("templates ok: {} builtin", builtin_templates().len()),
        Some(p) => match load_templates(p) {
            Ok(t) => println!("templates ok: {}", t.len()),
            Err(errors) => problems.extend(errors.iter().map(|e| format!("templates: {e}"))),
        },
    }
    if problems.is_empty() {
        println!("ok");
        return Ok(());
    }
    for p in &problems {
        println!("  - {p}");
    }
    Err(Failure::validation(anyhow!(
        "{} problem(s) found",
        problems.len()
    )))
}
