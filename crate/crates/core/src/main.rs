use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::error;

use pathwise_core::cds::{serve_on, Registry};
use pathwise_core::cql::{check_library, parse_library};
use pathwise_core::diagram::parse_diagram;
use pathwise_core::graph_audit::{audit_graph_with, EnumerationOptions, DEFAULT_JOURNEY_CAP};
use pathwise_core::pipeline::{run_pipeline, PipelineConfig, EXIT_CONFIG};
use pathwise_core::semantic_audit::AuditLexicon;
use pathwise_core::terminology::TerminologyDictionary;

const EXIT_CODES: &str = "\
Exit codes:
  0   success
  1   check/enumerate found errors, or the service failed
  2   invalid configuration or arguments
  11  ingest failed (diagram schema)
  12  graph audit failed
  13  semantic audit failed
  14  definitions generation failed the critic loop
  15  routing generation failed the checker";

#[derive(Parser)]
#[command(
    name = "pathwise",
    version,
    about = "Compile pathway flowcharts into checked CQL-subset libraries and serve them as CDS Hooks services"
)]
#[command(after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run ingest, audits and generation, writing all artifacts.
    Run {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        terminology: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Maximum number of journeys; 0 disables the cap.
        #[arg(long, default_value_t = DEFAULT_JOURNEY_CAP)]
        journey_cap: usize,
        #[arg(long = "version", id = "library_version", default_value = pathwise_core::codegen::DEFAULT_VERSION)]
        library_version: String,
        #[arg(long, default_value = "baseline")]
        generator: String,
        #[arg(long, default_value = "lexicon")]
        auditor: String,
    },
    /// Serve pipeline artifact directories as CDS Hooks services.
    Serve {
        #[arg(long, num_args = 1.., required = true)]
        artifacts: Vec<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Check one CQL-subset library.
    Check {
        file: PathBuf,
        #[arg(long, num_args = 0..)]
        deps: Vec<PathBuf>,
        #[arg(long)]
        terminology: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Enumerate journeys and print the graph audit.
    Enumerate {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long, default_value_t = DEFAULT_JOURNEY_CAP)]
        journey_cap: usize,
    },
}

fn cap(n: usize) -> Option<usize> {
    (n > 0).then_some(n)
}

fn load_lexicon(path: Option<&PathBuf>) -> Result<AuditLexicon, String> {
    match path {
        Some(p) => AuditLexicon::load(p).map_err(|e| e.to_string()),
        None => Ok(AuditLexicon::default()),
    }
}

fn read(path: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn config_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_CONFIG as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { diagram, terminology, lexicon, out, journey_cap, library_version, generator, auditor } => {
            let mut config = PipelineConfig::new(diagram, terminology, out);
            config.lexicon_path = lexicon;
            config.journey_cap = cap(journey_cap);
            config.library_version = library_version;
            config.generator_backend = generator;
            config.auditor_backend = auditor;
            match run_pipeline(&config) {
                Ok(outcome) => {
                    for path in &outcome.artifacts {
                        println!("{}", path.display());
                    }
                    if let Some(f) = &outcome.failure {
                        eprintln!("phase {} ({}) failed: {}: {}", f.phase.index(), f.phase.as_str(), f.code, f.message);
                    }
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => config_error(e),
            }
        }
        Command::Serve { artifacts, port, host, lexicon } => {
            let lexicon = match load_lexicon(lexicon.as_ref()) {
                Ok(l) => l,
                Err(e) => return config_error(e),
            };
            let registry = match Registry::from_artifact_dirs(&artifacts, &lexicon) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {}: {e}", e.code());
                    return ExitCode::from(1);
                }
            };
            let addr: SocketAddr = match format!("{host}:{port}").parse() {
                Ok(a) => a,
                Err(e) => return config_error(format!("bad listen address: {e}")),
            };
            // Deep routing chains are walked on worker threads.
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .thread_stack_size(16 * 1024 * 1024)
                .build()
                .expect("tokio runtime");
            let result: std::io::Result<()> = runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("serving {} service(s) on http://{}", registry.len(), listener.local_addr()?);
                let shutdown = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                serve_on(listener, Arc::new(registry), shutdown).await
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    error!("service failed: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Check { file, deps, terminology, json } => {
            let dictionary = match TerminologyDictionary::load(&terminology) {
                Ok(d) => d,
                Err(e) => return config_error(e),
            };
            let mut dep_libs = Vec::new();
            for dep in &deps {
                match read(dep).and_then(|s| parse_library(&s).map_err(|e| format!("{}: {e}", dep.display()))) {
                    Ok(lib) => dep_libs.push(lib),
                    Err(e) => return config_error(e),
                }
            }
            let source = match read(&file) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            let library = match parse_library(&source) {
                Ok(l) => l,
                Err(e) => {
                    eprintln!("{}: {}: {e}", file.display(), e.code());
                    return ExitCode::from(1);
                }
            };
            let report = check_library(&library, &dep_libs, &dictionary);
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                print!("{}", report.render());
            }
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Enumerate { diagram, journey_cap } => {
            let doc = match read(&diagram) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            let parsed = match parse_diagram(&doc) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(1);
                }
            };
            match audit_graph_with(&parsed, EnumerationOptions { journey_cap: cap(journey_cap) }) {
                Ok(audit) => {
                    print!("{}", audit.to_json());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
