//! Batch orchestration: ingest, graph audit, semantic audit, definitions and
//! routing generation, with every artifact written to one directory.
//!
//! Artifacts are named `<slug>_<kind>` where the slug comes from the pathway
//! name. Each phase writes its artifacts as soon as it succeeds, so a failing
//! run leaves the earlier ones in place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{error, info};
use serde::Serialize;
use thiserror::Error;

use crate::codegen::{critic_loop, generate_routing, generator_by_id, GenerationContext, DEFAULT_VERSION};
use crate::cql::checker::is_journey_define;
use crate::cql::{check_library, extract_bindings, parse_library, print_library};
use crate::diagram::{ExtractorRegistry, FlowchartDiagram};
use crate::graph_audit::{audit_graph_with, EnumerationOptions, DEFAULT_JOURNEY_CAP};
use crate::semantic_audit::{
    audit_all_with, AuditCounts, AuditLexicon, CqlAuditReport, IssueCategory, LexiconAuditor, NodeAuditor,
};
use crate::terminology::TerminologyDictionary;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Ingest,
    GraphAudit,
    SemanticAudit,
    Definitions,
    Routing,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Ingest, Phase::GraphAudit, Phase::SemanticAudit, Phase::Definitions, Phase::Routing];

    pub fn index(self) -> i32 {
        self as i32 + 1
    }

    /// Process exit status when this phase fails.
    pub fn exit_code(self) -> i32 {
        10 + self.index()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Ingest => "ingest",
            Phase::GraphAudit => "graph_audit",
            Phase::SemanticAudit => "semantic_audit",
            Phase::Definitions => "definitions",
            Phase::Routing => "routing",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub diagram_path: PathBuf,
    pub terminology_path: PathBuf,
    pub lexicon_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub library_version: String,
    /// `None` disables the cap.
    pub journey_cap: Option<usize>,
    pub generator_backend: String,
    pub auditor_backend: String,
    pub extractor_backend: String,
}

impl PipelineConfig {
    pub fn new(diagram_path: impl Into<PathBuf>, terminology_path: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            diagram_path: diagram_path.into(),
            terminology_path: terminology_path.into(),
            lexicon_path: None,
            out_dir: out_dir.into(),
            library_version: DEFAULT_VERSION.to_string(),
            journey_cap: Some(DEFAULT_JOURNEY_CAP),
            generator_backend: "baseline".to_string(),
            auditor_backend: "lexicon".to_string(),
            extractor_backend: "passthrough".to_string(),
        }
    }
}

#[derive(Debug, Error)]
#[error("E_CONFIG: {0}")]
pub struct ConfigError(pub String);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseFailure {
    pub phase: Phase,
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOutcome {
    pub slug: Option<String>,
    pub artifacts: Vec<PathBuf>,
    pub failure: Option<PhaseFailure>,
    pub journey_count: Option<usize>,
    pub definitions_iterations: Option<u32>,
    pub routing_iterations: Option<u32>,
}

impl PipelineOutcome {
    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(EXIT_OK, |f| f.phase.exit_code())
    }
}

fn is_semver(v: &str) -> bool {
    let core = v.split(['-', '+']).next().unwrap_or_default();
    let parts: Vec<&str> = core.split('.').collect();
    parts.len() == 3
        && parts.iter().all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()) && (p.len() == 1 || !p.starts_with('0')))
}

fn auditor_by_id(id: &str, lexicon: AuditLexicon) -> Result<Box<dyn NodeAuditor>, ConfigError> {
    match id {
        "lexicon" => Ok(Box::new(LexiconAuditor::new(lexicon))),
        other => Err(ConfigError(format!("no auditor backend named {other:?}"))),
    }
}

struct Prepared {
    dictionary: TerminologyDictionary,
    auditor: Box<dyn NodeAuditor>,
}

fn prepare(config: &PipelineConfig) -> Result<Prepared, ConfigError> {
    for (what, path) in [("diagram", &config.diagram_path), ("terminology", &config.terminology_path)] {
        if !path.is_file() {
            return Err(ConfigError(format!("{what} file {} does not exist", path.display())));
        }
    }
    if !is_semver(&config.library_version) {
        return Err(ConfigError(format!("library version {:?} is not semver", config.library_version)));
    }
    if config.journey_cap == Some(0) {
        return Err(ConfigError("journey cap must be positive".into()));
    }
    generator_by_id(&config.generator_backend).map_err(|e| ConfigError(e.to_string()))?;
    let lexicon = match &config.lexicon_path {
        Some(p) => AuditLexicon::load(p).map_err(|e| ConfigError(e.to_string()))?,
        None => AuditLexicon::default(),
    };
    let auditor = auditor_by_id(&config.auditor_backend, lexicon)?;
    let dictionary = TerminologyDictionary::load(&config.terminology_path).map_err(|e| ConfigError(e.to_string()))?;
    fs::create_dir_all(&config.out_dir).map_err(|e| ConfigError(format!("cannot create {}: {e}", config.out_dir.display())))?;
    Ok(Prepared { dictionary, auditor })
}

#[derive(Serialize)]
struct GovernanceFinding<'a> {
    node_id: &'a str,
    category: IssueCategory,
    detail: &'a str,
    evidence: &'a str,
}

#[derive(Serialize)]
struct GovernanceReport<'a> {
    pathway_name: &'a str,
    auditor: &'a str,
    counts: &'a AuditCounts,
    uncomputable_nodes: Vec<&'a str>,
    findings: Vec<GovernanceFinding<'a>>,
}

fn governance_json(report: &CqlAuditReport, auditor: &str) -> String {
    let gov = GovernanceReport {
        pathway_name: &report.pathway_name,
        auditor,
        counts: &report.counts,
        uncomputable_nodes: report
            .node_audits
            .iter()
            .filter(|a| !a.computable && !a.is_informational())
            .map(|a| a.node_id.as_str())
            .collect(),
        findings: report
            .node_audits
            .iter()
            .flat_map(|a| {
                a.findings.iter().map(|f| GovernanceFinding {
                    node_id: &a.node_id,
                    category: f.category,
                    detail: &f.detail,
                    evidence: &f.evidence,
                })
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&gov).expect("governance report serializes");
    s.push('\n');
    s
}

struct Run<'c> {
    config: &'c PipelineConfig,
    outcome: PipelineOutcome,
    log: String,
    current: Phase,
}

impl Run<'_> {
    fn write(&mut self, suffix: &str, contents: &str) -> Result<(), PhaseFailure> {
        let slug = self.outcome.slug.as_deref().expect("slug known before artifacts");
        let path = artifact_path(&self.config.out_dir, slug, suffix);
        fs::write(&path, contents).map_err(|e| PhaseFailure {
            phase: self.current,
            code: "E_IO".into(),
            message: format!("cannot write {}: {e}", path.display()),
        })?;
        self.outcome.artifacts.push(path);
        Ok(())
    }

    fn note(&mut self, phase: Phase, status: &str, started: Instant) {
        info!("phase {} {}: {status} ({} ms)", phase.index(), phase.as_str(), started.elapsed().as_millis());
        let _ = writeln!(self.log, "phase {} {}: {status}", phase.index(), phase.as_str());
    }

    fn fail(&mut self, phase: Phase, code: &str, message: String) -> PhaseFailure {
        let _ = writeln!(self.log, "phase {} {}: FAILED {code}", phase.index(), phase.as_str());
        for line in message.lines() {
            let _ = writeln!(self.log, "  {line}");
        }
        PhaseFailure { phase, code: code.to_string(), message }
    }
}

/// Runs every phase. Configuration problems are returned as `Err` (exit 2);
/// phase failures are reported in the outcome.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome, ConfigError> {
    let prepared = prepare(config)?;
    let mut run = Run { config, outcome: PipelineOutcome::default(), log: String::new(), current: Phase::Ingest };
    if let Err(f) = run_phases(&mut run, &prepared) {
        error!("phase {} {} failed: {} {}", f.phase.index(), f.phase.as_str(), f.code, f.message);
        run.outcome.failure = Some(f);
    }
    let exit = run.outcome.exit_code();
    let _ = writeln!(run.log, "exit {exit}");
    if run.outcome.slug.is_some() {
        let log = std::mem::take(&mut run.log);
        if let Err(f) = run.write("pipeline.log", &log) {
            error!("{}", f.message);
        }
    }
    Ok(run.outcome)
}

fn ingest(config: &PipelineConfig) -> Result<FlowchartDiagram, (String, String)> {
    let bytes = fs::read(&config.diagram_path)
        .map_err(|e| ("E_IO".to_string(), format!("cannot read {}: {e}", config.diagram_path.display())))?;
    ExtractorRegistry::default().extract(&bytes, &config.extractor_backend).map_err(|e| (e.code().to_string(), e.to_string()))
}

fn run_phases(run: &mut Run<'_>, prepared: &Prepared) -> Result<(), PhaseFailure> {
    let config = run.config;
    let dictionary = &prepared.dictionary;

    run.current = Phase::Ingest;
    let started = Instant::now();
    let diagram = ingest(config).map_err(|(code, message)| run.fail(Phase::Ingest, &code, message))?;
    let slug = crate::slug(&diagram.pathway_name);
    if slug.is_empty() {
        return Err(run.fail(Phase::Ingest, "E_SCHEMA", "pathway_name yields an empty artifact prefix".into()));
    }
    run.outcome.slug = Some(slug);
    run.write("diagram.json", &diagram.to_json())?;
    run.write("terminology.csv", &dictionary.to_csv())?;
    run.note(Phase::Ingest, &format!("ok ({} nodes, {} edges)", diagram.nodes.len(), diagram.edges.len()), started);

    run.current = Phase::GraphAudit;
    let started = Instant::now();
    let options = EnumerationOptions { journey_cap: config.journey_cap };
    let (graph, semantic) = std::thread::scope(|s| {
        let graph = s.spawn(|| audit_graph_with(&diagram, options));
        let semantic = s.spawn(|| audit_all_with(&diagram, prepared.auditor.as_ref()));
        (graph.join().expect("graph audit thread"), semantic.join().expect("semantic audit thread"))
    });
    let graph = graph.map_err(|e| run.fail(Phase::GraphAudit, e.code(), e.to_string()))?;
    run.write("audit.json", &graph.to_json())?;
    run.outcome.journey_count = Some(graph.journey_count);
    run.note(
        Phase::GraphAudit,
        &format!(
            "ok ({} journeys, has_cycle={}, orphans={}, dead_ends={})",
            graph.journey_count,
            graph.has_cycle,
            graph.orphan_nodes.len(),
            graph.dead_end_nodes.len()
        ),
        started,
    );

    run.current = Phase::SemanticAudit;
    let started = Instant::now();
    run.write("cql_audit.json", &semantic.to_json())?;
    run.write("governance.json", &governance_json(&semantic, prepared.auditor.id()))?;
    let c = &semantic.counts;
    run.note(
        Phase::SemanticAudit,
        &format!(
            "ok (auditor={}, passed={}, failed={}, uncomputable={}, findings={})",
            prepared.auditor.id(),
            c.passed,
            c.failed,
            c.uncomputable,
            c.total_findings()
        ),
        started,
    );

    run.current = Phase::Definitions;
    let started = Instant::now();
    let mut ctx = GenerationContext::new(&diagram, &semantic, dictionary);
    ctx.version = &config.library_version;
    let generator = generator_by_id(&config.generator_backend).expect("validated in prepare");
    let defs = ctx.validate().and_then(|()| critic_loop(&ctx, generator.as_ref())).map_err(|e| {
        let message = match &e {
            crate::codegen::CodegenError::CriticExhausted(o) => format!("{e}\n{}", o.final_report.render()),
            _ => e.to_string(),
        };
        run.fail(Phase::Definitions, e.code(), message)
    })?;
    run.write("definitions.cql", &defs.source)?;
    run.outcome.definitions_iterations = Some(defs.iterations_used);
    run.note(
        Phase::Definitions,
        &format!(
            "ok (generator={}, iterations_used={}, defines={}, warnings={})",
            generator.id(),
            defs.iterations_used,
            defs.library.defines.len(),
            defs.final_report.warnings.len()
        ),
        started,
    );

    run.current = Phase::Routing;
    let started = Instant::now();
    let bindings = extract_bindings(&defs.library).map_err(|e| run.fail(Phase::Routing, e.code(), e.to_string()))?;
    let routing =
        generate_routing(&graph.journeys, &bindings, &diagram).map_err(|e| run.fail(Phase::Routing, e.code(), e.to_string()))?;
    let source = print_library(&routing);
    let reparsed = parse_library(&source).map_err(|e| run.fail(Phase::Routing, e.code(), e.to_string()))?;
    let report = check_library(&reparsed, std::slice::from_ref(&defs.library), dictionary);
    if !report.ok {
        return Err(run.fail(Phase::Routing, "E_ROUTING_CHECK", report.render()));
    }
    run.write("routing.cql", &source)?;
    run.outcome.routing_iterations = Some(1);
    let journey_defines = reparsed.defines.iter().filter(|d| is_journey_define(&d.name)).count();
    run.note(Phase::Routing, &format!("ok (journey_defines={journey_defines}, iterations_used=1)"), started);
    Ok(())
}

/// Artifact file name for `slug` and `suffix`, e.g. `lung_routing.cql`.
pub fn artifact_path(dir: &Path, slug: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{slug}_{suffix}"))
}
