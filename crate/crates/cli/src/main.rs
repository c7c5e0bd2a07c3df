//! `attributor`: preprocess gradients, attribute generated text to training
//! documents, compare edits, serve the HTTP API, and run the toy demo.
//!
//! Exit status: 0 on success, 1 for user errors (bad input, unknown ids,
//! busy workspace), 2 for internal, provider and store failures.

mod config;
mod demo;
mod output;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use attributor_core::service::{AttributeOptions, AttributionService, GradientProvider, ProviderRequest};
use attributor_core::toy::ToyProvider;
use attributor_core::Error;
use attributor_server::{AppState, ServerOptions, DEFAULT_PORT};
use clap::{Parser, Subcommand};

use config::ConfigFlags;

pub const WORKSPACE_ENV: &str = "ATTRIBUTOR_WORKSPACE";

#[derive(Parser, Debug)]
#[command(name = "attributor", version, about = "Training-data attribution for generated text")]
struct Cli {
    /// Workspace directory holding config.json and sessions.
    #[arg(long, global = true, env = WORKSPACE_ENV)]
    workspace: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the effective configuration to config.json.
    Init,
    /// Print the effective configuration as JSON.
    Config,
    /// Compute every missing training gradient.
    Preprocess {
        /// Recompute all pairs even if the store is complete.
        #[arg(long)]
        force: bool,
    },
    /// Create a session from a prompt and generated text.
    Session {
        #[arg(long, default_value = "")]
        prompt: String,
        /// Generated text.
        #[arg(long, conflicts_with = "text_file")]
        text: Option<String>,
        /// File holding the generated text.
        #[arg(long)]
        text_file: Option<PathBuf>,
    },
    /// Print a session's index/token table.
    Tokens {
        #[arg(long)]
        session: String,
    },
    /// Attribute selected tokens of a session.
    Attribute {
        #[arg(long)]
        session: String,
        /// Comma-separated token indices; all tokens when omitted.
        #[arg(long, value_delimiter = ',')]
        tokens: Option<Vec<usize>>,
        /// Write the result JSON here (`-` for standard output).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compare attributions of the generated text and an edit of it.
    Compare {
        #[arg(long)]
        session: String,
        /// File holding the edited text.
        #[arg(long)]
        edited_file: PathBuf,
        /// Token indices on the generated side; defaults to the changed span.
        #[arg(long, value_delimiter = ',')]
        generated_tokens: Option<Vec<usize>>,
        /// Token indices on the edited side; defaults to the changed span.
        #[arg(long, value_delimiter = ',')]
        edited_tokens: Option<Vec<usize>>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print a training document with its metadata as JSON.
    Datapoint { example_id: usize },
    /// Print preprocessing status as JSON.
    Status,
    /// Serve the HTTP API and web UI.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Concurrent attribution jobs; 0 uses the CPU count.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Built web UI to serve at /.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Build a toy scenario workspace end to end.
    Demo {
        #[arg(long, default_value = "disaster", value_parser = ["disaster", "finance"])]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use `attributor toy-provider` as a subprocess provider.
        #[arg(long)]
        subprocess: bool,
        /// Rebuild an existing demo workspace.
        #[arg(long)]
        force: bool,
    },
    /// Reference gradient provider for toy workspaces (JSON request on stdin).
    ToyProvider {
        #[arg(long)]
        model_dir: PathBuf,
        #[arg(long)]
        corpus_file: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = core_error(&e).map_or("internal", Error::code);
            eprintln!("error [{code}]: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}

fn core_error(e: &anyhow::Error) -> Option<&Error> {
    e.chain().find_map(|c| c.downcast_ref::<Error>())
}

fn exit_status(e: &anyhow::Error) -> u8 {
    match core_error(e).map(Error::code) {
        Some("bad_request" | "not_found" | "busy") => 1,
        Some(_) => 2,
        None if e.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some()) => 1,
        None => 2,
    }
}

fn workspace(cli: &Cli) -> PathBuf {
    cli.workspace.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn open_service(cli: &Cli) -> anyhow::Result<AttributionService> {
    let ws = workspace(cli);
    let config = config::resolve(&ws, &cli.config)?;
    config::check_paths(&ws, &config)?;
    Ok(AttributionService::with_config(&ws, config)?)
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(format!("file {}", path.display())).into(),
        _ => anyhow::Error::new(e).context(format!("reading {}", path.display())),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut stdout = std::io::stdout().lock();
    match &cli.command {
        Command::Init => {
            let ws = workspace(&cli);
            let config = config::resolve(&ws, &cli.config)?;
            config.save(&ws)?;
            writeln!(stdout, "wrote {}", ws.join(attributor_core::service::CONFIG_FILE).display())?;
        }
        Command::Config => {
            let config = config::resolve(&workspace(&cli), &cli.config)?;
            output::write_json(Path::new("-"), &config)?;
        }
        Command::Preprocess { force } => {
            let service = open_service(&cli)?;
            let report = service.preprocess(*force)?;
            writeln!(stdout, "{} pairs computed", report.computed_pairs)?;
        }
        Command::Session { prompt, text, text_file } => {
            let text = match (text, text_file) {
                (Some(t), _) => t.clone(),
                (None, Some(p)) => read_text(p)?,
                (None, None) => anyhow::bail!(Error::Precondition("pass --text or --text-file".into())),
            };
            let service = open_service(&cli)?;
            let session = service.create_session(prompt, Some(&text), None)?;
            writeln!(stdout, "session {}", session.session_id)?;
            output::token_table(&mut stdout, &session.tokens)?;
        }
        Command::Tokens { session } => {
            let service = open_service(&cli)?;
            output::token_table(&mut stdout, &service.select_tokens(session)?)?;
        }
        Command::Attribute { session, tokens, json } => {
            let service = open_service(&cli)?;
            let result = service.attribute(session, tokens.as_deref(), &AttributeOptions::default())?;
            if let Some(path) = json {
                output::write_json(path, &result)?;
            }
            if json.as_deref() != Some(Path::new("-")) {
                output::attribution(&mut stdout, &result)?;
            }
        }
        Command::Compare { session, edited_file, generated_tokens, edited_tokens, json } => {
            let edited = read_text(edited_file)?;
            let service = open_service(&cli)?;
            let result = service.compare(
                session,
                &edited,
                generated_tokens.as_deref(),
                edited_tokens.as_deref(),
                &AttributeOptions::default(),
            )?;
            if let Some(path) = json {
                output::write_json(path, &result)?;
            }
            if json.as_deref() != Some(Path::new("-")) {
                output::comparison(&mut stdout, &result)?;
            }
        }
        Command::Datapoint { example_id } => {
            let service = open_service(&cli)?;
            output::write_json(Path::new("-"), &service.get_datapoint(*example_id)?)?;
        }
        Command::Status => {
            let service = open_service(&cli)?;
            output::write_json(Path::new("-"), &serde_json::json!({ "preprocess": service.status() }))?;
        }
        Command::Serve { host, port, jobs, static_dir } => {
            let service = open_service(&cli)?;
            let listener = std::net::TcpListener::bind((host.as_str(), *port))
                .map_err(|e| Error::Precondition(format!("cannot bind {host}:{port}: {e}")))?;
            listener.set_nonblocking(true)?;
            let addr = listener.local_addr()?;
            writeln!(stdout, "serving on http://{addr}/")?;
            stdout.flush()?;
            let options = ServerOptions {
                max_jobs: *jobs,
                static_dir: static_dir.clone(),
            };
            let state = AppState::new(service, options.max_jobs);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                attributor_server::serve(listener, state, &options).await
            })?;
        }
        Command::Demo { scenario, seed, subprocess, force } => {
            let ws = cli
                .workspace
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("attributor-demo-{scenario}")));
            let mut attribution = attributor_core::service::AttributionConfig::default();
            config::apply_attribution(&cli.config, &mut attribution);
            attribution.validate()?;
            let opts = demo::DemoOptions {
                scenario,
                seed: *seed,
                workspace: &ws,
                subprocess: *subprocess,
                force: *force,
                attribution,
                port: DEFAULT_PORT,
            };
            demo::run(&opts, &mut stdout)?;
        }
        Command::ToyProvider { model_dir, corpus_file } => {
            let corpus = attributor_core::corpus::Corpus::load(corpus_file)?;
            let provider = ToyProvider::load(model_dir, &corpus)?;
            let mut input = String::new();
            std::io::stdin().read_to_string(&mut input).context("reading request")?;
            let request: ProviderRequest = serde_json::from_str(&input)
                .map_err(|e| Error::Precondition(format!("invalid provider request: {e}")))?;
            let path = provider.gradient(&request)?;
            writeln!(stdout, "{}", path.display())?;
        }
    }
    Ok(())
}
