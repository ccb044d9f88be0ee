//! Execution harness: runs a target parser executable on test cases, maps
//! process outcomes to {pass, fail, crash} verdicts, and flags
//! inconsistencies between a case's expectation and the parser's verdict.
//!
//! Every case runs in a fresh process (hermetic verdicts). Packets are
//! delivered on stdin or via a temp-file argument; the verdict comes from
//! the exit code (0 = pass, nonzero = fail) or from configured marker lines
//! in the output. Signals, aborts, and timeouts are crashes, and a crash is
//! always an inconsistency.

use crate::dsl::PropertyId;
use crate::testgen::{Expectation, TestCase};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Packet bytes written to the child's stdin.
    StdinBytes,
    /// Packet written to a temp file whose path replaces `{input}` in args.
    FileArg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SuccessConvention {
    /// Exit status 0 means the packet was accepted, nonzero rejected.
    ExitCode,
    /// Exact-substring markers in stdout/stderr decide; output showing
    /// neither is treated as a crash (no observable verdict).
    MarkerLine { accept: String, reject: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParserTarget {
    pub command: PathBuf,
    /// Argument template; `{input}` is replaced by the packet file path in
    /// file-arg mode.
    #[serde(default)]
    pub args: Vec<String>,
    pub input_mode: InputMode,
    pub success: SuccessConvention,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    5_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Crash,
}

/// One executed case: verdict plus raw evidence (exit code, signal,
/// timeout, captured output head).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub case: String,
    pub verdict: Verdict,
    pub wall_ms: u64,
    pub evidence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ParserAcceptsInvalid,
    ParserRejectsValid,
    Crash,
}

/// A mismatch between a case's expectation and the parser's verdict, the
/// unit of work for triage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Inconsistency {
    pub case: String,
    /// The mutated property for field-level negatives; none for positives,
    /// structural negatives, and crashes.
    pub property: Option<PropertyId>,
    pub direction: Direction,
    pub evidence: String,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot run `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("temp input file: {0}")]
    TempFile(std::io::Error),
    #[error("suite aborted, {failures} case(s) failed to spawn; first: {first}")]
    Suite { failures: usize, first: String },
}

/// Runs one case in a fresh process. Spawn problems are configuration
/// errors, not crash verdicts.
pub fn run_case(target: &ParserTarget, case: &TestCase) -> Result<RunRecord, HarnessError> {
    let started = Instant::now();
    // Keep the temp file alive for the child's lifetime.
    let mut _input_file = None;
    let mut cmd = Command::new(&target.command);
    match target.input_mode {
        InputMode::StdinBytes => {
            cmd.args(&target.args);
            cmd.stdin(Stdio::piped());
        }
        InputMode::FileArg => {
            let mut f = tempfile::NamedTempFile::new().map_err(HarnessError::TempFile)?;
            f.write_all(&case.bytes).map_err(HarnessError::TempFile)?;
            f.flush().map_err(HarnessError::TempFile)?;
            let path = f.path().to_string_lossy().to_string();
            let mut substituted = false;
            for a in &target.args {
                if a.contains("{input}") {
                    cmd.arg(a.replace("{input}", &path));
                    substituted = true;
                } else {
                    cmd.arg(a);
                }
            }
            if !substituted {
                cmd.arg(&path);
            }
            cmd.stdin(Stdio::null());
            _input_file = Some(f);
        }
    }
    cmd.stdout(Stdio::piped()).stderr(Stdio::piped());
    let mut child = cmd.spawn().map_err(|e| HarnessError::Spawn {
        command: target.command.display().to_string(),
        source: e,
    })?;
    if target.input_mode == InputMode::StdinBytes {
        // A child that exits without reading closes the pipe; that's its
        // verdict to give, not an error here.
        if let Some(mut stdin) = child.stdin.take() {
            let _ = stdin.write_all(&case.bytes);
        }
    }
    // Drain output concurrently so a chatty child cannot block on a full pipe.
    let stdout = child.stdout.take().unwrap();
    let stderr = child.stderr.take().unwrap();
    let out_t = std::thread::spawn(move || read_all(stdout));
    let err_t = std::thread::spawn(move || read_all(stderr));

    let deadline = started + Duration::from_millis(target.timeout_ms);
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait().expect("wait on own child") {
            break status;
        }
        if Instant::now() > deadline {
            let _ = child.kill();
            timed_out = true;
            break child.wait().expect("wait after kill");
        }
        std::thread::sleep(Duration::from_millis(2));
    };
    let stdout = out_t.join().unwrap_or_default();
    let stderr = err_t.join().unwrap_or_default();
    let output = format!("{stdout}{stderr}");
    let head: String = output.chars().take(512).collect();
    let wall_ms = started.elapsed().as_millis() as u64;

    let (verdict, evidence) = if timed_out {
        (Verdict::Crash, format!("timeout after {} ms", target.timeout_ms))
    } else if let Some(sig) = signal_of(&status) {
        (Verdict::Crash, format!("terminated by signal {sig}; output: {head:?}"))
    } else {
        match &target.success {
            SuccessConvention::ExitCode => match status.code() {
                Some(0) => (Verdict::Pass, "exit code 0".to_string()),
                Some(c) => (Verdict::Fail, format!("exit code {c}")),
                None => (Verdict::Crash, "no exit code".to_string()),
            },
            SuccessConvention::MarkerLine { accept, reject } => {
                if output.contains(reject.as_str()) {
                    (Verdict::Fail, format!("reject marker; output: {head:?}"))
                } else if output.contains(accept.as_str()) {
                    (Verdict::Pass, format!("accept marker; output: {head:?}"))
                } else {
                    (Verdict::Crash, format!("no verdict marker in output: {head:?}"))
                }
            }
        }
    };
    Ok(RunRecord { case: case.name.clone(), verdict, wall_ms, evidence })
}

fn read_all(mut r: impl std::io::Read) -> String {
    let mut buf = Vec::new();
    let _ = r.read_to_end(&mut buf);
    String::from_utf8_lossy(&buf).into_owned()
}

#[cfg(unix)]
fn signal_of(status: &std::process::ExitStatus) -> Option<i32> {
    use std::os::unix::process::ExitStatusExt;
    status.signal()
}

#[cfg(not(unix))]
fn signal_of(_status: &std::process::ExitStatus) -> Option<i32> {
    None
}

/// Runs every case against the target with a bounded worker pool. Records
/// are ordered by case name; an inconsistency is emitted when the verdict
/// contradicts the expectation, and always for crashes.
pub fn run_suite(
    target: &ParserTarget,
    corpus: &[TestCase],
    workers: usize,
) -> Result<(Vec<RunRecord>, Vec<Inconsistency>), HarnessError> {
    let workers = workers.max(1).min(corpus.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunRecord, HarnessError>>>> =
        Mutex::new((0..corpus.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= corpus.len() {
                    break;
                }
                let r = run_case(target, &corpus[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let mut records = Vec::with_capacity(corpus.len());
    let mut spawn_failures = Vec::new();
    for slot in results.into_inner().unwrap() {
        match slot.expect("every case executed") {
            Ok(rec) => records.push(rec),
            Err(e) => spawn_failures.push(e.to_string()),
        }
    }
    if !spawn_failures.is_empty() {
        return Err(HarnessError::Suite {
            failures: spawn_failures.len(),
            first: spawn_failures.remove(0),
        });
    }
    records.sort_by(|a, b| a.case.cmp(&b.case));
    let by_name: std::collections::HashMap<&str, &TestCase> =
        corpus.iter().map(|c| (c.name.as_str(), c)).collect();
    let mut inconsistencies = Vec::new();
    for rec in &records {
        let case = by_name[rec.case.as_str()];
        let direction = match (rec.verdict, case.expectation) {
            (Verdict::Crash, _) => Some(Direction::Crash),
            (Verdict::Pass, Expectation::Fail) => Some(Direction::ParserAcceptsInvalid),
            (Verdict::Fail, Expectation::Pass) => Some(Direction::ParserRejectsValid),
            _ => None,
        };
        if let Some(direction) = direction {
            inconsistencies.push(Inconsistency {
                case: rec.case.clone(),
                property: case.property.clone(),
                direction,
                evidence: rec.evidence.clone(),
            });
        }
    }
    Ok((records, inconsistencies))
}

/// Persists run records as JSONL, one per line, in record order.
pub fn write_records(path: &std::path::Path, records: &[RunRecord]) -> std::io::Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testgen::CaseKind;
    use std::os::unix::fs::PermissionsExt;

    fn script(dir: &std::path::Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
        path
    }

    fn case(name: &str, bytes: &[u8], expectation: Expectation) -> TestCase {
        TestCase {
            name: name.to_string(),
            path_id: "p0000".to_string(),
            kind: CaseKind::Positive,
            expectation,
            property: None,
            detail: String::new(),
            bytes: bytes.to_vec(),
        }
    }

    fn target(command: PathBuf) -> ParserTarget {
        ParserTarget {
            command,
            args: vec![],
            input_mode: InputMode::StdinBytes,
            success: SuccessConvention::ExitCode,
            timeout_ms: 5_000,
        }
    }

    #[test]
    fn exit_codes_map_to_pass_and_fail() {
        let dir = tempfile::tempdir().unwrap();
        let ok = script(dir.path(), "ok.sh", "cat > /dev/null; exit 0");
        let bad = script(dir.path(), "bad.sh", "cat > /dev/null; exit 1");
        let c = case("a", &[1, 2, 3], Expectation::Pass);
        assert_eq!(run_case(&target(ok), &c).unwrap().verdict, Verdict::Pass);
        assert_eq!(run_case(&target(bad), &c).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn signal_is_a_crash_with_evidence() {
        let dir = tempfile::tempdir().unwrap();
        let boom = script(dir.path(), "boom.sh", "kill -SEGV $$");
        let rec = run_case(&target(boom), &case("a", &[0], Expectation::Pass)).unwrap();
        assert_eq!(rec.verdict, Verdict::Crash);
        assert!(rec.evidence.contains("signal 11"), "{}", rec.evidence);
    }

    #[test]
    fn timeout_is_a_crash() {
        let dir = tempfile::tempdir().unwrap();
        let slow = script(dir.path(), "slow.sh", "sleep 10");
        let mut t = target(slow);
        t.timeout_ms = 100;
        let rec = run_case(&t, &case("a", &[0], Expectation::Pass)).unwrap();
        assert_eq!(rec.verdict, Verdict::Crash);
        assert!(rec.evidence.contains("timeout"));
    }

    #[test]
    fn marker_line_convention() {
        let dir = tempfile::tempdir().unwrap();
        let marker = script(
            dir.path(),
            "marker.sh",
            "cat > /dev/null; echo PARSE_OK; exit 0",
        );
        let mut t = target(marker);
        t.success = SuccessConvention::MarkerLine {
            accept: "PARSE_OK".to_string(),
            reject: "PARSE_REJECT".to_string(),
        };
        let rec = run_case(&t, &case("a", &[0], Expectation::Pass)).unwrap();
        assert_eq!(rec.verdict, Verdict::Pass);
        // No marker at all: no observable verdict.
        let silent = script(dir.path(), "silent.sh", "cat > /dev/null; exit 0");
        t.command = silent;
        let rec = run_case(&t, &case("a", &[0], Expectation::Pass)).unwrap();
        assert_eq!(rec.verdict, Verdict::Crash);
    }

    #[test]
    fn file_arg_mode_passes_packet_path() {
        let dir = tempfile::tempdir().unwrap();
        // Accept iff the input file is exactly three bytes.
        let sh = script(
            dir.path(),
            "len.sh",
            "test \"$(wc -c < \"$1\")\" -eq 3 && exit 0 || exit 1",
        );
        let mut t = target(sh);
        t.input_mode = InputMode::FileArg;
        t.args = vec!["{input}".to_string()];
        assert_eq!(
            run_case(&t, &case("a", &[1, 2, 3], Expectation::Pass)).unwrap().verdict,
            Verdict::Pass
        );
        assert_eq!(
            run_case(&t, &case("b", &[1], Expectation::Pass)).unwrap().verdict,
            Verdict::Fail
        );
    }

    #[test]
    fn spawn_failure_is_a_configuration_error() {
        let t = target(PathBuf::from("/nonexistent/parser"));
        match run_case(&t, &case("a", &[0], Expectation::Pass)) {
            Err(HarnessError::Spawn { .. }) => {}
            other => panic!("expected spawn error, got {other:?}"),
        }
    }

    #[test]
    fn suite_flags_inconsistencies_and_sorts_records() {
        let dir = tempfile::tempdir().unwrap();
        // Accept everything: negatives become accepts-invalid.
        let yes = script(dir.path(), "yes.sh", "cat > /dev/null; exit 0");
        let corpus = vec![
            case("b_neg", &[1], Expectation::Fail),
            case("a_pos", &[0], Expectation::Pass),
        ];
        let (records, incs) = run_suite(&target(yes), &corpus, 2).unwrap();
        assert_eq!(records[0].case, "a_pos");
        assert_eq!(records[1].case, "b_neg");
        assert_eq!(incs.len(), 1);
        assert_eq!(incs[0].direction, Direction::ParserAcceptsInvalid);
        assert_eq!(incs[0].case, "b_neg");
    }

    #[test]
    fn crash_dominates_expectation() {
        let dir = tempfile::tempdir().unwrap();
        let boom = script(dir.path(), "boom.sh", "kill -ABRT $$");
        // Even a case expected to fail is an inconsistency when it crashes.
        let corpus = vec![case("x", &[1], Expectation::Fail)];
        let (_, incs) = run_suite(&target(boom), &corpus, 1).unwrap();
        assert_eq!(incs.len(), 1);
        assert_eq!(incs[0].direction, Direction::Crash);
    }
}
