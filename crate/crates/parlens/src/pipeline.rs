//! Stage orchestration: ingest → extract → graph → generate → run → triage →
//! report. Every stage persists its artifacts under the configured output
//! directory so stages are resumable (`--from <stage>`) and independently
//! diffable.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::doctree::{
    self, merge_formats, trace, DocError, DocTree, TraceIndex,
};
use crate::dsl::{parse_format, print_format, FormatSpec};
use crate::gateway::{Gateway, GatewayError, HttpBackend, Mode, DSL_REFERENCE};
use crate::graph::{build_graph, enumerate_paths, path_to_formula, to_dot, EnumerateOptions};
use crate::harness::{run_suite, write_records, HarnessError, Inconsistency};
use crate::testgen::{
    formula_to_smt, generate_suite, read_corpus, write_corpus, CaseKind, GenError, GenOptions,
    SolverOptions, TestCase,
};
use crate::triage::{
    diagnose, emit_report, refine_format, write_report, Classification, Diagnosis, RefineAudit,
    TriageError,
};

// Artifact names under the output directory.
pub const DOCTREE_FILE: &str = "doctree.json";
pub const FORMAT_FILE: &str = "format.pform";
pub const TRACE_FILE: &str = "trace.json";
pub const DOT_FILE: &str = "graph.dot";
pub const SMT_DIR: &str = "smt";
pub const CORPUS_DIR: &str = "corpus";
pub const RECORDS_FILE: &str = "runrecords.jsonl";
pub const INCONSISTENCIES_FILE: &str = "inconsistencies.jsonl";
pub const DIAGNOSES_FILE: &str = "diagnoses.jsonl";
pub const REFINEMENTS_FILE: &str = "refinements.jsonl";
pub const REPORTS_DIR: &str = "reports";

/// Maximum gen → run → triage → refine cycles before the loop stops even
/// without a fixed point.
pub const MAX_REFINE_CYCLES: usize = 3;

// Exit-code contract.
pub const EXIT_OK: i32 = 0;
pub const EXIT_TOOL_ERROR: i32 = 1;
pub const EXIT_BUGS_FOUND: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Extract,
    Merge,
    Graph,
    Gen,
    Run,
    Triage,
    Report,
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "extract" => Ok(Stage::Extract),
            "merge" => Ok(Stage::Merge),
            "graph" => Ok(Stage::Graph),
            "gen" => Ok(Stage::Gen),
            "run" => Ok(Stage::Run),
            "triage" => Ok(Stage::Triage),
            "report" => Ok(Stage::Report),
            other => Err(format!(
                "unknown stage `{other}` (expected extract|merge|graph|gen|run|triage|report)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Triage(#[from] TriageError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing artifact `{path}`; run the `{stage}` stage first")]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("artifact `{path}` is corrupt: {message}")]
    CorruptArtifact { path: PathBuf, message: String },
    #[error("config has no [target] block; run/triage/report need a parser under test")]
    NoTarget,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

fn read_artifact(path: &Path, stage: &'static str) -> Result<String, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact { path: path.to_path_buf(), stage });
    }
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn corrupt(path: &Path) -> impl FnOnce(String) -> PipelineError + '_ {
    move |message| PipelineError::CorruptArtifact { path: path.to_path_buf(), message }
}

/// Builds the gateway described by the config (after CLI overrides).
pub fn open_gateway(cfg: &PipelineConfig) -> Result<Gateway, PipelineError> {
    let gw = &cfg.gateway;
    match gw.mode {
        Mode::Replay => Ok(Gateway::replay(gw.fixtures.as_ref().expect("validated"))?),
        Mode::Record => {
            let backend =
                HttpBackend::new(gw.base_url.as_ref().expect("validated"), gw.model.as_ref().expect("validated"))?;
            Ok(Gateway::record(Box::new(backend), gw.fixtures.as_ref().expect("validated"))?)
        }
        Mode::Live => {
            let backend =
                HttpBackend::new(gw.base_url.as_ref().expect("validated"), gw.model.as_ref().expect("validated"))?;
            Ok(Gateway::live(Box::new(backend)))
        }
    }
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct ExtractSummary {
    pub sections: usize,
    pub structs: usize,
    pub constraints: usize,
    pub warnings: Vec<String>,
}

/// Full extraction: ingest the RFC, build/summarize/refine the DocTree,
/// extract per-section fragments, merge bottom-up. Persists `doctree.json`
/// (the pre-merge tree, so the merge is re-runnable on its own),
/// `format.pform`, and `trace.json`.
///
/// With `merge_only`, the persisted `doctree.json` is reused and only the
/// bottom-up merge re-runs.
pub fn cmd_extract(
    cfg: &PipelineConfig,
    gateway: &Gateway,
    merge_only: bool,
) -> Result<ExtractSummary, PipelineError> {
    let doctree_path = cfg.out_dir.join(DOCTREE_FILE);
    let mut warnings = Vec::new();
    let tree = if merge_only {
        let text = read_artifact(&doctree_path, "extract")?;
        DocTree::from_json(&text).map_err(|e| corrupt(&doctree_path)(e.to_string()))?
    } else {
        let rfc_text = std::fs::read_to_string(&cfg.rfc).map_err(io_err(&cfg.rfc))?;
        let doc = doctree::ingest_rfc(&rfc_text)?;
        let (tree, mut w) = doctree::build_initial_tree(&doc.toc, &doc.sections)?;
        warnings.append(&mut w);
        let tree = doctree::summarize_all(&tree, gateway)?;
        let (tree, mut w) = doctree::refine_hierarchy(&tree, gateway)?;
        warnings.append(&mut w);
        let (tree, mut w) = doctree::extract_all(&tree, gateway, DSL_REFERENCE)?;
        warnings.append(&mut w);
        write_file(&doctree_path, &tree.to_json())?;
        tree
    };
    let (spec, index, _merged_tree, mut w) = merge_formats(&tree, gateway)?;
    warnings.append(&mut w);
    write_file(&cfg.out_dir.join(FORMAT_FILE), &print_format(&spec))?;
    write_file(&cfg.out_dir.join(TRACE_FILE), &index.to_json())?;
    Ok(ExtractSummary {
        sections: tree.nodes.len(),
        structs: spec.structs.len(),
        constraints: spec.structs.iter().map(|s| s.constraints().count()).sum(),
        warnings,
    })
}

fn load_format(cfg: &PipelineConfig) -> Result<FormatSpec, PipelineError> {
    let path = cfg.out_dir.join(FORMAT_FILE);
    let text = read_artifact(&path, "extract")?;
    parse_format(&text)
        .map(|p| p.spec)
        .map_err(|diags| {
            let msgs: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            corrupt(&path)(msgs.join("; "))
        })
}

fn load_tree(cfg: &PipelineConfig) -> Result<DocTree, PipelineError> {
    let path = cfg.out_dir.join(DOCTREE_FILE);
    let text = read_artifact(&path, "extract")?;
    DocTree::from_json(&text).map_err(|e| corrupt(&path)(e.to_string()))
}

fn load_trace(cfg: &PipelineConfig) -> Result<TraceIndex, PipelineError> {
    let path = cfg.out_dir.join(TRACE_FILE);
    let text = read_artifact(&path, "extract")?;
    TraceIndex::from_json(&text).map_err(|e| corrupt(&path)(e.to_string()))
}

fn gen_options(cfg: &PipelineConfig) -> GenOptions {
    GenOptions {
        enumerate: EnumerateOptions {
            array_counts: cfg.generate.array_counts.clone(),
            path_cap: cfg.generate.path_cap,
        },
        solver: SolverOptions { timeout: Duration::from_millis(cfg.generate.solver_timeout_ms) },
    }
}

// ---------------------------------------------------------------------------
// graph
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct GraphSummary {
    pub nodes: usize,
    pub paths: usize,
    pub dot_path: Option<PathBuf>,
    pub smt_dir: Option<PathBuf>,
}

/// Compiles `format.pform` to a format graph and enumerates its paths.
/// Optionally renders Graphviz (`--dot`) and one SMT-LIB file per path
/// formula (`--emit-smt`).
pub fn cmd_graph(
    cfg: &PipelineConfig,
    dot: bool,
    emit_smt: bool,
) -> Result<GraphSummary, PipelineError> {
    let spec = load_format(cfg)?;
    let graph = build_graph(&spec);
    let opts = gen_options(cfg);
    let paths = enumerate_paths(&spec, &graph, &opts.enumerate).map_err(GenError::from)?;
    let mut summary = GraphSummary {
        nodes: graph.nodes.len(),
        paths: paths.len(),
        dot_path: None,
        smt_dir: None,
    };
    if dot {
        let path = cfg.out_dir.join(DOT_FILE);
        write_file(&path, &to_dot(&graph))?;
        summary.dot_path = Some(path);
    }
    if emit_smt {
        let dir = cfg.out_dir.join(SMT_DIR);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for path in &paths {
            let formula = path_to_formula(path);
            let file = dir.join(format!("{}.smt2", path.id));
            write_file(&file, &formula_to_smt(&formula, None))?;
        }
        summary.smt_dir = Some(dir);
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct GenSummary {
    pub paths: usize,
    pub positives: usize,
    pub field_negatives: usize,
    pub structural_negatives: usize,
    pub notes: Vec<String>,
}

impl GenSummary {
    pub fn line(&self) -> String {
        format!(
            "gen: {} paths, {} positives, {} field-level negatives, {} structural negatives, {} skipped",
            self.paths,
            self.positives,
            self.field_negatives,
            self.structural_negatives,
            self.notes.len()
        )
    }
}

/// Generates the test corpus from `format.pform` into `corpus/`. The corpus
/// directory is replaced wholesale so stale cases never survive a format
/// refinement.
pub fn cmd_gen(cfg: &PipelineConfig) -> Result<GenSummary, PipelineError> {
    let spec = load_format(cfg)?;
    let graph = build_graph(&spec);
    let opts = gen_options(cfg);
    let paths = enumerate_paths(&spec, &graph, &opts.enumerate).map_err(GenError::from)?;
    let suite = generate_suite(&spec, &graph, &opts)?;
    let dir = cfg.out_dir.join(CORPUS_DIR);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_corpus(&dir, &suite.cases).map_err(io_err(&dir))?;
    let count = |k: CaseKind| suite.cases.iter().filter(|c| c.kind == k).count();
    Ok(GenSummary {
        paths: paths.len(),
        positives: count(CaseKind::Positive),
        field_negatives: count(CaseKind::FieldNegative),
        structural_negatives: count(CaseKind::StructuralNegative),
        notes: suite.notes,
    })
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct RunSummary {
    pub cases: usize,
    pub inconsistencies: usize,
    pub crashes: usize,
}

fn load_corpus(cfg: &PipelineConfig) -> Result<Vec<TestCase>, PipelineError> {
    let dir = cfg.out_dir.join(CORPUS_DIR);
    if !dir.join("manifest.json").exists() {
        return Err(PipelineError::MissingArtifact { path: dir.join("manifest.json"), stage: "gen" });
    }
    read_corpus(&dir).map_err(io_err(&dir))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("artifact serializes"));
        out.push('\n');
    }
    write_file(path, &out)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(
    path: &Path,
    stage: &'static str,
) -> Result<Vec<T>, PipelineError> {
    let text = read_artifact(path, stage)?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(line)
                .map_err(|e| corrupt(path)(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(items)
}

/// Runs the target parser over the corpus; persists `runrecords.jsonl` and
/// `inconsistencies.jsonl`.
pub fn cmd_run(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    let target = cfg.target.as_ref().ok_or(PipelineError::NoTarget)?;
    let corpus = load_corpus(cfg)?;
    let workers = if cfg.generate.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        cfg.generate.workers
    };
    let (records, inconsistencies) = run_suite(target, &corpus, workers)?;
    let rec_path = cfg.out_dir.join(RECORDS_FILE);
    write_records(&rec_path, &records).map_err(io_err(&rec_path))?;
    write_jsonl(&cfg.out_dir.join(INCONSISTENCIES_FILE), &inconsistencies)?;
    Ok(RunSummary {
        cases: records.len(),
        inconsistencies: inconsistencies.len(),
        crashes: inconsistencies
            .iter()
            .filter(|i| i.direction == crate::harness::Direction::Crash)
            .count(),
    })
}

// ---------------------------------------------------------------------------
// triage
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct TriageSummary {
    pub diagnoses: Vec<Diagnosis>,
    /// The refinement applied this cycle, if any. At most one constraint is
    /// refined per cycle so trace indices never go stale mid-batch; further
    /// extraction errors are rediscovered on the next cycle.
    pub refined: Option<RefineAudit>,
    pub warnings: Vec<String>,
}

impl TriageSummary {
    pub fn implementation_errors(&self) -> usize {
        self.diagnoses
            .iter()
            .filter(|d| d.classification == Classification::ImplementationError)
            .count()
    }
}

/// Diagnoses every recorded inconsistency; persists `diagnoses.jsonl`. If a
/// diagnosis blames the extracted format, the offending constraint is
/// removed/replaced, `format.pform` and `trace.json` are rewritten, and the
/// audit is appended to `refinements.jsonl`.
pub fn cmd_triage(cfg: &PipelineConfig, gateway: &Gateway) -> Result<TriageSummary, PipelineError> {
    let spec = load_format(cfg)?;
    let tree = load_tree(cfg)?;
    let index = load_trace(cfg)?;
    let inconsistencies: Vec<Inconsistency> =
        read_jsonl(&cfg.out_dir.join(INCONSISTENCIES_FILE), "run")?;
    let mut warnings = Vec::new();
    let mut diagnoses = Vec::new();
    for inc in &inconsistencies {
        diagnoses.push(diagnose(inc, &spec, &tree, &index, gateway)?);
    }
    write_jsonl(&cfg.out_dir.join(DIAGNOSES_FILE), &diagnoses)?;

    let mut refined = None;
    if let Some(diag) = diagnoses
        .iter()
        .find(|d| d.classification == Classification::FormatExtractionError)
    {
        if let Some((new_spec, new_index, audit)) =
            refine_format(diag, &spec, &index, &mut warnings)
        {
            write_file(&cfg.out_dir.join(FORMAT_FILE), &print_format(&new_spec))?;
            write_file(&cfg.out_dir.join(TRACE_FILE), &new_index.to_json())?;
            let audit_path = cfg.out_dir.join(REFINEMENTS_FILE);
            let mut existing: Vec<RefineAudit> = if audit_path.exists() {
                read_jsonl(&audit_path, "triage")?
            } else {
                Vec::new()
            };
            existing.push(audit.clone());
            write_jsonl(&audit_path, &existing)?;
            refined = Some(audit);
        } else {
            warnings.push(format!(
                "diagnosis for case {} blamed the format but no refinement was applicable",
                diag.case
            ));
        }
    }
    Ok(TriageSummary { diagnoses, refined, warnings })
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct ReportSummary {
    pub reports: usize,
    pub warnings: Vec<String>,
}

/// Emits one bug report per implementation-error diagnosis into `reports/`,
/// re-running each PoC to confirm it reproduces. The reports directory is
/// replaced wholesale.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<ReportSummary, PipelineError> {
    let target = cfg.target.as_ref().ok_or(PipelineError::NoTarget)?;
    let tree = load_tree(cfg)?;
    let corpus = load_corpus(cfg)?;
    let diagnoses: Vec<Diagnosis> = read_jsonl(&cfg.out_dir.join(DIAGNOSES_FILE), "triage")?;
    let inconsistencies: Vec<Inconsistency> =
        read_jsonl(&cfg.out_dir.join(INCONSISTENCIES_FILE), "run")?;
    let dir = cfg.out_dir.join(REPORTS_DIR);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut warnings = Vec::new();
    let mut reports = 0usize;
    for diag in &diagnoses {
        if diag.classification != Classification::ImplementationError {
            continue;
        }
        let Some(inc) = inconsistencies.iter().find(|i| i.case == diag.case) else {
            warnings.push(format!("diagnosis for unknown case {} skipped", diag.case));
            continue;
        };
        let Some(case) = corpus.iter().find(|c| c.name == diag.case) else {
            warnings.push(format!("case {} missing from corpus; report skipped", diag.case));
            continue;
        };
        if let Some(report) =
            emit_report(inc, diag, case, target, &tree, &cfg.protocol, &mut warnings)?
        {
            write_report(&dir, &report, &case.bytes).map_err(io_err(&dir))?;
            reports += 1;
        }
    }
    Ok(ReportSummary { reports, warnings })
}

// ---------------------------------------------------------------------------
// all
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
pub struct AllSummary {
    pub cycles: usize,
    pub fixed_point: bool,
    pub implementation_errors: usize,
    pub reports: usize,
    pub lines: Vec<String>,
}

impl AllSummary {
    pub fn exit_code(&self) -> i32 {
        if self.implementation_errors > 0 {
            EXIT_BUGS_FOUND
        } else {
            EXIT_OK
        }
    }
}

/// Runs the whole pipeline: extraction, then up to [`MAX_REFINE_CYCLES`]
/// gen → run → triage cycles (a cycle that refines the format regenerates
/// the corpus and re-runs), then reporting. `from` skips the stages before
/// it on the first cycle, reusing the artifacts on disk.
pub fn cmd_all(
    cfg: &PipelineConfig,
    gateway: &Gateway,
    from: Option<Stage>,
    dot: bool,
    emit_smt: bool,
) -> Result<AllSummary, PipelineError> {
    let from = from.unwrap_or(Stage::Extract);
    let mut summary = AllSummary::default();
    if from <= Stage::Merge {
        let s = cmd_extract(cfg, gateway, from == Stage::Merge)?;
        summary.lines.push(format!(
            "extract: {} sections, {} structs, {} constraints",
            s.sections, s.structs, s.constraints
        ));
        summary.lines.extend(s.warnings.iter().map(|w| format!("extract: warning: {w}")));
    }
    if (from <= Stage::Graph) && (dot || emit_smt) {
        let s = cmd_graph(cfg, dot, emit_smt)?;
        summary.lines.push(format!("graph: {} nodes, {} paths", s.nodes, s.paths));
    }
    if from >= Stage::Report {
        let diagnoses: Vec<Diagnosis> = read_jsonl(&cfg.out_dir.join(DIAGNOSES_FILE), "triage")?;
        summary.implementation_errors = diagnoses
            .iter()
            .filter(|d| d.classification == Classification::ImplementationError)
            .count();
        summary.fixed_point = true;
    } else {
        // A fresh cycle loop starts its refinement audit from scratch so
        // repeated runs stay byte-identical.
        let audit_path = cfg.out_dir.join(REFINEMENTS_FILE);
        if from <= Stage::Gen && audit_path.exists() {
            std::fs::remove_file(&audit_path).map_err(io_err(&audit_path))?;
        }
        for cycle in 1..=MAX_REFINE_CYCLES {
            summary.cycles = cycle;
            if cycle > 1 || from <= Stage::Gen {
                let s = cmd_gen(cfg)?;
                summary.lines.push(format!("cycle {cycle}: {}", s.line()));
            }
            if cycle > 1 || from <= Stage::Run {
                let s = cmd_run(cfg)?;
                summary.lines.push(format!(
                    "cycle {cycle}: run: {} cases, {} inconsistencies ({} crashes)",
                    s.cases, s.inconsistencies, s.crashes
                ));
            }
            let s = cmd_triage(cfg, gateway)?;
            summary.lines.push(format!(
                "cycle {cycle}: triage: {} diagnoses, {} implementation errors{}",
                s.diagnoses.len(),
                s.implementation_errors(),
                match &s.refined {
                    Some(a) => format!(", refined {} ({})", a.property_id, a.action),
                    None => String::new(),
                }
            ));
            summary.lines.extend(s.warnings.iter().map(|w| format!("cycle {cycle}: warning: {w}")));
            summary.implementation_errors = s.implementation_errors();
            if s.refined.is_none() {
                summary.fixed_point = true;
                break;
            }
        }
    }
    let s = cmd_report(cfg)?;
    summary.lines.push(format!("report: {} bug reports written", s.reports));
    summary.lines.extend(s.warnings.iter().map(|w| format!("report: warning: {w}")));
    summary.reports = s.reports;
    Ok(summary)
}

/// Convenience for the worked-example tests: backtraces a property through
/// the persisted artifacts.
pub fn trace_from_artifacts(
    cfg: &PipelineConfig,
    property: &crate::dsl::PropertyId,
) -> Result<(String, String), PipelineError> {
    let tree = load_tree(cfg)?;
    let index = load_trace(cfg)?;
    let (id, content) = trace(&index, &tree, property)?;
    Ok((id.to_string(), content.to_string()))
}
