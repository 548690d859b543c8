use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use mcas_core::audit::{emit_chart_data, render, run_audit, AuditError, AuditResult, ReportFormat};
use mcas_core::embedding::{
    embed_all, resolve_requests, ContentIndex, EmbedRequest, EmbeddingError, EmbeddingStore,
    ProviderConfig,
};
use mcas_core::manifest::{
    builtin_by_name, load_manifest, route_embedding_requests, scan_images, validate_manifest,
    ImageRef, Manifest,
};

use crate::{DatasetArgs, EmbedArgs, Format, ProviderKind};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_MISSING: u8 = 2;
pub const EXIT_PROVIDER: u8 = 3;

/// How many missing content ids an error message lists.
const MISSING_SHOWN: usize = 10;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn missing(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_MISSING,
            message: message.into(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn exit_code(e: &EmbeddingError) -> u8 {
    match e {
        EmbeddingError::MissingEmbedding { .. }
        | EmbeddingError::NotFound { .. }
        | EmbeddingError::ModelMismatch { .. } => EXIT_MISSING,
        EmbeddingError::Provider { .. } | EmbeddingError::DimInconsistency { .. } => EXIT_PROVIDER,
        _ => EXIT_USAGE,
    }
}

impl From<EmbeddingError> for Failure {
    fn from(e: EmbeddingError) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

/// Lists the first few missing ids with the file or text they stand for.
fn missing_message(ids: &[String], sources: &HashMap<String, String>) -> String {
    let mut msg = format!("{} embedding(s) missing from the store:", ids.len());
    for id in ids.iter().take(MISSING_SHOWN) {
        match sources.get(id) {
            Some(src) => msg.push_str(&format!("\n  {id}  {src}")),
            None => msg.push_str(&format!("\n  {id}")),
        }
    }
    if ids.len() > MISSING_SHOWN {
        msg.push_str(&format!("\n  ... and {} more", ids.len() - MISSING_SHOWN));
    }
    msg
}

fn write_output(path: &Path, bytes: &[u8], force: bool) -> Outcome {
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let mut file = opts.open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Failure::usage(format!("{} exists; pass --force to overwrite", path.display()))
        } else {
            Failure::usage(format!("cannot write {}: {e}", path.display()))
        }
    })?;
    file.write_all(bytes)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn read_manifest(path: &Path) -> Result<Manifest, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    load_manifest(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn images_root(args: &DatasetArgs, m: &Manifest) -> PathBuf {
    match &args.images_root {
        Some(root) => root.clone(),
        None => args
            .manifest
            .parent()
            .unwrap_or(Path::new("."))
            .join(&m.images_root),
    }
}

fn list_images(root: &Path) -> Vec<ImageRef> {
    match scan_images(root) {
        Ok(listing) => listing,
        Err(e) => {
            log::warn!("cannot list {}: {e}", root.display());
            Vec::new()
        }
    }
}

fn open_store(path: &Path) -> Result<EmbeddingStore, Failure> {
    Ok(EmbeddingStore::open(path)?)
}

/// `--model`, then the manifest's hint, then the store's only model.
fn resolve_model(
    args: &DatasetArgs,
    m: &Manifest,
    store: &EmbeddingStore,
) -> Result<String, Failure> {
    if let Some(model) = args.model.as_ref().or(m.model_hint.as_ref()) {
        return Ok(model.clone());
    }
    let models: Vec<&str> = store.models().into_iter().collect();
    match models.as_slice() {
        [only] => Ok((*only).to_owned()),
        [] => Err(Failure::missing(
            "the store holds no embeddings and no model was given (--model)",
        )),
        many => Err(Failure::usage(format!(
            "the store holds several models ({}); choose one with --model",
            many.join(", ")
        ))),
    }
}

/// The manifest, its hashed requests and content index, after checking the
/// image tree is complete.
struct Dataset {
    manifest: Manifest,
    requests: Vec<EmbedRequest>,
    index: ContentIndex,
}

impl Dataset {
    fn load(args: &DatasetArgs) -> Result<Self, Failure> {
        let manifest = read_manifest(&args.manifest)?;
        let root = images_root(args, &manifest);
        let listing = list_images(&root);
        let report = validate_manifest(&manifest, &listing);
        if !report.passed() {
            let mut msg = format!("image tree at {} does not match the manifest:", root.display());
            for p in report.errors().take(MISSING_SHOWN) {
                msg.push_str(&format!("\n  {p}"));
            }
            let n = report.errors().count();
            if n > MISSING_SHOWN {
                msg.push_str(&format!("\n  ... and {} more", n - MISSING_SHOWN));
            }
            return Err(Failure::usage(msg));
        }
        let (requests, index) =
            resolve_requests(&route_embedding_requests(&manifest), &root, &listing)?;
        Ok(Self {
            manifest,
            requests,
            index,
        })
    }

    fn sources(&self) -> HashMap<String, String> {
        self.requests
            .iter()
            .map(|r| (r.content_id.clone(), r.source_id.clone()))
            .collect()
    }
}

pub fn init(builtin: &str, out: &Path, force: bool) -> Outcome {
    let m = builtin_by_name(builtin).map_err(|e| Failure::usage(e.to_string()))?;
    write_output(out, m.to_json_pretty().as_bytes(), force)?;
    log::info!(
        "wrote {}: {} targets, {} images",
        out.display(),
        m.targets.len(),
        m.total_images()
    );
    Ok(())
}

pub fn embed(args: &EmbedArgs) -> Outcome {
    let data = Dataset::load(&args.dataset)?;
    let mut store = open_store(&args.store)?;
    let model = resolve_model(&args.dataset, &data.manifest, &store)?;
    let mut cfg = match args.provider {
        ProviderKind::File => {
            if args.endpoint.is_some() {
                log::warn!("--endpoint is ignored by the file provider");
            }
            ProviderConfig::file_store(model)
        }
        ProviderKind::Http => {
            let endpoint = args
                .endpoint
                .clone()
                .ok_or_else(|| Failure::usage("--provider http requires --endpoint or MCAS_ENDPOINT"))?;
            ProviderConfig::http(endpoint, model)
        }
    };
    cfg.concurrency_limit = args.concurrency;
    cfg.batch_size = args.batch_size;
    cfg.max_retries = args.max_retries;
    cfg.bearer_token = args.token.clone();

    match embed_all(&data.requests, &cfg, &mut store) {
        Ok(s) => {
            println!("fetched {}, cached {}", s.fetched, s.cached);
            Ok(())
        }
        Err(EmbeddingError::MissingEmbedding { content_ids }) => {
            Err(Failure::missing(missing_message(&content_ids, &data.sources())))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn score(args: &DatasetArgs, store: &Path, out: &Path, force: bool) -> Outcome {
    let data = Dataset::load(args)?;
    let store = open_store(store)?;
    let model = resolve_model(args, &data.manifest, &store)?;
    let result = match run_audit(&data.manifest, &data.index, &store, &model) {
        Ok(r) => r,
        Err(AuditError::Embedding(EmbeddingError::MissingEmbedding { content_ids })) => {
            return Err(Failure::missing(missing_message(&content_ids, &data.sources())));
        }
        Err(AuditError::Embedding(e)) => return Err(e.into()),
        Err(e) => return Err(Failure::usage(e.to_string())),
    };
    write_output(out, &render(&result, ReportFormat::Json), force)?;
    log::info!("scored {} targets into {}", result.per_target.len(), out.display());
    Ok(())
}

pub fn report(input: &Path, format: Format, out: Option<&Path>, force: bool) -> Outcome {
    let text = std::fs::read_to_string(input)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", input.display())))?;
    let result = AuditResult::from_json(&text)
        .map_err(|e| Failure::usage(format!("{}: not an audit report: {e}", input.display())))?;
    let bytes = match format {
        Format::Json => render(&result, ReportFormat::Json),
        Format::Csv => render(&result, ReportFormat::Csv),
        Format::Md => render(&result, ReportFormat::Markdown),
        Format::Chart => emit_chart_data(&result),
    };
    match out {
        Some(path) => write_output(path, &bytes, force),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| Failure::usage(format!("cannot write to stdout: {e}"))),
    }
}

pub fn validate(args: &DatasetArgs, store: Option<&Path>) -> Outcome {
    let m = read_manifest(&args.manifest)?;
    let root = images_root(args, &m);
    let listing = list_images(&root);
    let report = validate_manifest(&m, &listing);
    for p in &report.problems {
        println!("{p}");
    }
    let mut errors = report.errors().count();

    if let (Some(store_path), true) = (store, report.passed()) {
        let store = open_store(store_path)?;
        let model = resolve_model(args, &m, &store)?;
        let (requests, _) = resolve_requests(&route_embedding_requests(&m), &root, &listing)?;
        for r in requests.iter().filter(|r| !store.contains(&r.content_id, &model)) {
            println!("error: MissingEmbedding {} {}", r.content_id, r.source_id);
            errors += 1;
        }
    }

    println!(
        "{}: {} images declared, {} found, {} error(s), {} warning(s)",
        if errors == 0 { "ok" } else { "failed" },
        report.declared_images,
        report.found_images,
        errors,
        report.warnings().count()
    );
    if errors == 0 {
        Ok(())
    } else {
        Err(Failure::usage("validation failed"))
    }
}
