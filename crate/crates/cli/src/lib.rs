//! `blendkit` command-line tool: knowledge-base ingestion, attribute
//! fetching, blend generation, the HTTP service and the evaluation report.

pub mod http;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use blendkit_core::diagnostics::Diagnostics;
use blendkit_core::eval::{self, EvalError};
use blendkit_core::kb::{
    ingest_domain, populate_attributes, CoreferenceResolver, DomainConfig, EntityTagger, GazetteerTagger,
    IdentityResolver, KbError, KnowledgeBase, NullTagger, TableResolver,
};
use blendkit_core::llm::{AuthoredFixtures, GatewayError, ResponseStore};
use blendkit_core::service::{BlendRequest, Config, Engine, RequestOptions, ServiceError};
use blendkit_core::stage1::Strategy;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "blendkit", version, about = "Suggest pop-culture blends for a product")]
pub struct Cli {
    /// TOML configuration file (defaults to $BLENDKIT_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a knowledge base (sentences and entities) from a plot summary.
    Ingest(IngestArgs),
    /// Fetch LLM attributes for every entity of an ingested domain.
    Attributes(AttributesArgs),
    /// Generate blend suggestions for a product.
    Blend(BlendArgs),
    /// Serve the JSON API.
    Serve(ServeArgs),
    /// Compute annotation statistics.
    Eval(EvalArgs),
    /// Import hand-written LLM responses into a fixture store.
    SeedFixtures(SeedArgs),
    /// List ingested domains.
    Domains,
    /// Show words associated with a term.
    Related {
        term: String,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub domain: String,
    /// Plot summary file(s), concatenated in order.
    #[arg(long, required = true, num_args = 1..)]
    pub plot: Vec<PathBuf>,
    #[arg(long)]
    pub display_name: Option<String>,
    /// Directory of generic `.txt` documents for salience contrast.
    #[arg(long)]
    pub reference_corpus: Option<PathBuf>,
    /// Tab-separated `name<TAB>label` entity list.
    #[arg(long)]
    pub gazetteer: Option<PathBuf>,
    /// JSON list of coreference substitutions.
    #[arg(long)]
    pub coref: Option<PathBuf>,
    /// Output file (defaults to `<kb_dir>/<domain>.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttributesArgs {
    pub domain: String,
    /// Knowledge-base file (defaults to `<kb_dir>/<domain>.json`); rewritten in place.
    #[arg(long)]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    pub offline: bool,
    /// Save and exit successfully even when some responses are missing.
    #[arg(long)]
    pub allow_missing: bool,
}

#[derive(Debug, Args)]
pub struct BlendArgs {
    pub domain: String,
    pub product: String,
    /// Comma-separated related words that refine the product embedding.
    #[arg(long, value_delimiter = ',')]
    pub related: Vec<String>,
    /// Comma-separated subset of no_gpt, half_gpt, full_gpt.
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
    pub strategies: Vec<Strategy>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub drop_ratio: Option<f64>,
    #[arg(long)]
    pub offline: bool,
    /// Write the JSON response here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Allow cross-origin requests (for a separately served UI).
    #[arg(long)]
    pub cors: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Annotation CSV (`item_id,pair_id,strategy,question,annotator_id,value`).
    pub annotations: PathBuf,
    /// Attribute count CSV (`entity,attribute_type,annotator_id,relevant_count`).
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    /// JSON report path (defaults to `<annotations>.report.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Authored fixture TOML files.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Target store (defaults to the configured fixture directory).
    #[arg(long)]
    pub into: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    Strategy::parse(s).ok_or_else(|| format!("unknown strategy {s:?} (expected no_gpt, half_gpt or full_gpt)"))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Process exit code: 2 usage, 3 unknown domain, 4 missing fixtures,
    /// 5 provider failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Service(e) => match e {
                ServiceError::MissingParameter(_) | ServiceError::InvalidRequest(_) => 2,
                ServiceError::UnknownDomain(_) => 3,
                ServiceError::FixtureMiss { .. } => 4,
                ServiceError::Provider(_) | ServiceError::Timeout(_) => 5,
                _ => 1,
            },
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Service(e) => e.code(),
            CliError::Kb(_) => "kb_error",
            CliError::Eval(_) => "eval_error",
            CliError::Gateway(_) => "gateway_error",
            CliError::Io { .. } => "io_error",
            CliError::Usage(_) => "usage_error",
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.to_path_buf(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn print_warnings(diag: &Diagnostics) {
    for w in &diag.warnings {
        eprintln!("warning [{:?}]: {}", w.kind, w.message);
    }
}

fn engine(config: &Config) -> Result<Engine, CliError> {
    let mut diag = Diagnostics::new();
    let engine = Engine::from_config(config, &mut diag)?;
    print_warnings(&diag);
    Ok(engine)
}

fn kb_path(config: &Config, domain: &str, explicit: Option<&PathBuf>) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| config.kb_dir.join(format!("{domain}.json")))
}

fn ingest(config: &Config, args: &IngestArgs) -> Result<(), CliError> {
    let reference_corpus = args
        .reference_corpus
        .clone()
        .or_else(|| config.reference_corpus.clone())
        .ok_or_else(|| CliError::Usage("no reference corpus: pass --reference-corpus or set reference_corpus".into()))?;
    let domain = DomainConfig {
        domain_id: args.domain.clone(),
        display_name: args.display_name.clone().unwrap_or_else(|| args.domain.clone()),
        plot_source: args.plot.clone(),
        reference_corpus,
    };
    let tagger: Box<dyn EntityTagger> = match args.gazetteer.as_ref().or(config.gazetteer.as_ref()) {
        Some(path) => Box::new(GazetteerTagger::from_tsv_file(path)?),
        None => Box::new(NullTagger),
    };
    let resolver: Box<dyn CoreferenceResolver> = match &args.coref {
        Some(path) => Box::new(TableResolver::from_json_file(path)?),
        None => Box::new(IdentityResolver),
    };
    let mut diag = Diagnostics::new();
    let kb = ingest_domain(&domain, resolver.as_ref(), tagger.as_ref(), &mut diag)?;
    print_warnings(&diag);
    let out = kb_path(config, &args.domain, args.out.as_ref());
    kb.save(&out)?;
    println!(
        "{}: {} sentences, {} entities -> {}",
        kb.domain_id(),
        kb.sentences.len(),
        kb.entities.len(),
        out.display()
    );
    Ok(())
}

fn attributes(config: &Config, args: &AttributesArgs) -> Result<(), CliError> {
    let path = kb_path(config, &args.domain, args.kb.as_ref());
    let mut kb = KnowledgeBase::load(&path)?;
    let engine = engine(config)?;
    let offline = args.offline || !engine.has_online();
    let gateway = engine.providers(offline).gateway.clone().offline(offline);
    let mut diag = Diagnostics::new();
    populate_attributes(&mut kb, &gateway, &mut diag);
    kb.validate()?;
    print_warnings(&diag);
    if !diag.missing_cache_keys.is_empty() && !args.allow_missing {
        return Err(ServiceError::FixtureMiss {
            missing_cache_keys: diag.missing_cache_keys,
            warnings: Vec::new(),
        }
        .into());
    }
    kb.save(&path)?;
    println!("{}: {} attributes -> {}", kb.domain_id(), kb.attributes.len(), path.display());
    Ok(())
}

fn blend(config: &Config, args: &BlendArgs) -> Result<(), CliError> {
    let engine = engine(config)?;
    let request = BlendRequest {
        domain_id: args.domain.clone(),
        product_term: args.product.clone(),
        selected_related: args.related.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        strategies: if args.strategies.is_empty() {
            Strategy::ALL.to_vec()
        } else {
            args.strategies.clone()
        },
        options: RequestOptions {
            cutoff: args.cutoff,
            drop_ratio: args.drop_ratio,
            offline: args.offline,
        },
    };
    let response = engine.blend(&request)?;
    let json = response.to_canonical_json();
    match &args.out {
        Some(path) => {
            write_file(path, &json)?;
            println!(
                "{} blends, {} warnings -> {}",
                response.blends.len(),
                response.warnings.len(),
                path.display()
            );
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn serve(config: &Config, args: &ServeArgs) -> Result<(), CliError> {
    let engine = Arc::new(engine(config)?);
    let timeout = Duration::from_secs(config.request_timeout_secs);
    let app = http::router(engine, timeout, args.cors);
    let addr = format!("{}:{}", args.host, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: "runtime".into(), source })?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|source| CliError::Io { path: addr.clone().into(), source })?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, app)
            .await
            .map_err(|source| CliError::Io { path: addr.into(), source })
    })
}

fn evaluate(args: &EvalArgs) -> Result<(), CliError> {
    let annotations = eval::load_annotations(&args.annotations)?;
    let counts = args.attributes.as_deref().map(eval::load_attribute_counts).transpose()?;
    let report = eval::evaluate(&annotations, counts.as_deref())?;
    print!("{}", report.to_text());
    let out = args.out.clone().unwrap_or_else(|| args.annotations.with_extension("report.json"));
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_file(&out, &json)?;
    println!("\nreport -> {}", out.display());
    Ok(())
}

fn seed(config: &Config, args: &SeedArgs) -> Result<(), CliError> {
    let dir = args
        .into
        .clone()
        .or_else(|| config.fixture_dir.clone())
        .ok_or_else(|| CliError::Usage("no target: pass --into or set fixture_dir".into()))?;
    let store = ResponseStore::open(&dir)?;
    let params = blendkit_core::llm::ModelParams {
        model: config.llm.model.clone(),
        temperature: config.llm.temperature,
        max_tokens: config.llm.max_tokens,
    };
    let mut total = 0;
    for file in &args.files {
        let keys = AuthoredFixtures::load(file)?.import_into(&store, &params)?;
        total += keys.len();
    }
    println!("{total} responses -> {} ({} entries)", dir.display(), store.len());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = Config::from_env(cli.config.as_deref())?;
    match &cli.command {
        Command::Ingest(args) => ingest(&config, args),
        Command::Attributes(args) => attributes(&config, args),
        Command::Blend(args) => blend(&config, args),
        Command::Serve(args) => serve(&config, args),
        Command::Eval(args) => evaluate(args),
        Command::SeedFixtures(args) => seed(&config, args),
        Command::Domains => {
            let json = serde_json::to_string_pretty(&engine(&config)?.domains()).expect("summaries serialize");
            println!("{json}");
            Ok(())
        }
        Command::Related { term, k } => {
            for word in engine(&config)?.related_words(Some(term), Some(*k))? {
                println!("{word}");
            }
            Ok(())
        }
    }
}
