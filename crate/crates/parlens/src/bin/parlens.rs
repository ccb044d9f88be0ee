//! Command-line entry point for the parlens pipeline.
//!
//! Exit codes: 0 = no implementation errors, 2 = bugs found, 1 = tool error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use parlens::config::PipelineConfig;
use parlens::gateway::Mode;
use parlens::pipeline::{
    self, Stage, EXIT_BUGS_FOUND, EXIT_OK, EXIT_TOOL_ERROR,
};

#[derive(Parser)]
#[command(name = "parlens", version, about = "Validates binary protocol parsers against RFC-derived packet formats")]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Resume from this stage, reusing earlier artifacts on disk.
    #[arg(long, global = true, value_parser = parse_stage)]
    from: Option<Stage>,
    /// Override the gateway mode from the config.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Override the gateway fixtures path from the config.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Write the format graph as Graphviz (graph.dot).
    #[arg(long, global = true)]
    dot: bool,
    /// Write one SMT-LIB file per path formula (smt/).
    #[arg(long = "emit-smt", global = true)]
    emit_smt: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ingest the RFC and extract the packet format (doctree.json,
    /// format.pform, trace.json).
    Extract,
    /// Compile the format to its graph and enumerate packet layouts.
    Graph,
    /// Generate the test corpus (corpus/).
    Gen,
    /// Run the target parser over the corpus (runrecords.jsonl).
    Run,
    /// Diagnose inconsistencies and refine the format (diagnoses.jsonl).
    Triage,
    /// Emit bug reports for confirmed implementation errors (reports/).
    Report,
    /// Run every stage, with up to three refinement cycles.
    All,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "live" => Ok(Mode::Live),
        "record" => Ok(Mode::Record),
        "replay" => Ok(Mode::Replay),
        other => Err(format!("unknown mode `{other}` (expected live|record|replay)")),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_TOOL_ERROR as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<i32, Box<dyn std::error::Error>> {
    let config_path = cli.config.as_ref().ok_or("--config <file> is required")?;
    let mut cfg = PipelineConfig::load(config_path)?;
    if let Some(mode) = cli.mode {
        cfg.gateway.mode = mode;
    }
    if let Some(fixtures) = &cli.fixtures {
        cfg.gateway.fixtures = Some(fixtures.clone());
    }
    match cli.command {
        Cmd::Extract => {
            let gw = pipeline::open_gateway(&cfg)?;
            let s = pipeline::cmd_extract(&cfg, &gw, cli.from == Some(Stage::Merge))?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "extract: {} sections, {} structs, {} constraints",
                s.sections, s.structs, s.constraints
            );
            Ok(EXIT_OK)
        }
        Cmd::Graph => {
            let s = pipeline::cmd_graph(&cfg, cli.dot, cli.emit_smt)?;
            println!("graph: {} nodes, {} paths", s.nodes, s.paths);
            if let Some(p) = &s.dot_path {
                println!("graph: wrote {}", p.display());
            }
            if let Some(d) = &s.smt_dir {
                println!("graph: wrote {}", d.display());
            }
            Ok(EXIT_OK)
        }
        Cmd::Gen => {
            let s = pipeline::cmd_gen(&cfg)?;
            println!("{}", s.line());
            for note in &s.notes {
                eprintln!("note: {note}");
            }
            Ok(EXIT_OK)
        }
        Cmd::Run => {
            let s = pipeline::cmd_run(&cfg)?;
            println!(
                "run: {} cases, {} inconsistencies ({} crashes)",
                s.cases, s.inconsistencies, s.crashes
            );
            // Crashes are implementation errors by definition; other
            // inconsistencies stay undecided until triage.
            Ok(if s.crashes > 0 { EXIT_BUGS_FOUND } else { EXIT_OK })
        }
        Cmd::Triage => {
            let gw = pipeline::open_gateway(&cfg)?;
            let s = pipeline::cmd_triage(&cfg, &gw)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "triage: {} diagnoses, {} implementation errors",
                s.diagnoses.len(),
                s.implementation_errors()
            );
            if let Some(a) = &s.refined {
                println!("triage: refined {} ({})", a.property_id, a.action);
            }
            Ok(if s.implementation_errors() > 0 { EXIT_BUGS_FOUND } else { EXIT_OK })
        }
        Cmd::Report => {
            let s = pipeline::cmd_report(&cfg)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!("report: {} bug reports written", s.reports);
            Ok(if s.reports > 0 { EXIT_BUGS_FOUND } else { EXIT_OK })
        }
        Cmd::All => {
            let gw = pipeline::open_gateway(&cfg)?;
            let s = pipeline::cmd_all(&cfg, &gw, cli.from, cli.dot, cli.emit_smt)?;
            for line in &s.lines {
                println!("{line}");
            }
            if !s.fixed_point {
                eprintln!(
                    "warning: refinement loop did not reach a fixed point in {} cycles",
                    pipeline::MAX_REFINE_CYCLES
                );
            }
            Ok(s.exit_code())
        }
    }
}
