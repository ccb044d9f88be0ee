//! Chat-model gateway: prompt templates, a live HTTP chat-completion
//! backend, and a deterministic record/replay fixture layer.
//!
//! Every model interaction goes through [`Gateway::complete`], keyed by the
//! sha-256 hash of the rendered prompt plus decoding parameters. In `record`
//! mode each exchange is appended to a JSONL fixture file; in `replay` mode
//! that file answers instead of the network, making pipeline runs fully
//! deterministic and credential-free.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

/// The DSL description handed to the model with `generate_format` and
/// `refine_syntax` (the `{DSL}` binding). Versioned alongside fixtures:
/// editing it changes prompt hashes and deliberately invalidates them.
pub const DSL_REFERENCE: &str = include_str!("../assets/dsl_reference.md");

#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub text: &'static str,
}

/// All templates, one per pipeline interaction.
pub const TEMPLATES: &[PromptTemplate] = &[
    PromptTemplate { name: "summarize", text: "Task: Please summarize a given RFC section: {Section}" },
    PromptTemplate {
        name: "hierarchy",
        text: "Task: Analyze the hierarchical structure of the following sections in an RFC \
               document: {Section Summaries}\n\
               Instructions:\n\
               Identify Parent-Child relationships where one section provides a detailed \
               breakdown of another.\n\
               Answer with one relationship per line, formatted exactly as \
               `PARENT <section-id> CHILD <section-id>`. If there are none, answer `NONE`.",
    },
    PromptTemplate {
        name: "generate_format",
        text: "Task: Generate the protocol format described by the following RFC section, \
               using the packet format syntax below.\n\n\
               Syntax:\n{DSL}\n\n\
               RFC section:\n{Section}\n\n\
               Output only the format text. If the section does not describe any packet \
               layout, answer exactly `NO_FORMAT`.",
    },
    PromptTemplate {
        name: "refine_syntax",
        text: "Task: The protocol format generated for the following RFC section has syntax \
               errors. Regenerate it so that it satisfies the packet format syntax below.\n\n\
               Syntax:\n{DSL}\n\n\
               RFC section:\n{Section}\n\n\
               Errors in the previous attempt:\n{Errors}\n\n\
               Output only the corrected format text, or `NO_FORMAT` if the section does \
               not describe any packet layout.",
    },
    PromptTemplate {
        name: "merge",
        text: "Task: Merge multiple protocol formats into a single comprehensive format.\n\
               Current section: {section};\n\
               Current format: {format};\n\
               Summaries and formats of child nodes: {children}.\n\n\
               Output the merged format text first. Then output a line `ATTRIBUTION:` \
               followed by one line per struct, formatted exactly as \
               `<StructName> <- <section-id>`, naming the child section each struct came \
               from. Finally output a line `SUMMARY:` followed by an updated summary of \
               the current section.",
    },
    PromptTemplate {
        name: "diagnose",
        text: "Task: {Constraint} is allowed by {AllowedBy} but not by {RejectedBy}. \
               According to the RFC section: {Section}, identify whether myformat or \
               parser is correct, and provide evidence from the RFC section.\n\
               Explain your reasoning step by step, quoting the evidence.\n\
               If myformat is incorrect, also output a line starting with `CORRECTION:` \
               giving either a replacement constraint in the packet format syntax or the \
               word `remove`.\n\
               End with a final line naming the incorrect side: exactly `VERDICT: parser` \
               if the parser implementation is wrong, or `VERDICT: myformat` if the \
               extracted format is wrong.",
    },
];

pub fn template(name: &str) -> Option<&'static PromptTemplate> {
    TEMPLATES.iter().find(|t| t.name == name)
}

/// Renders `{Placeholder}` slots from `bindings`. Inserted text is never
/// re-scanned, so braces inside section content are inert.
pub fn render(template: &PromptTemplate, bindings: &[(&str, &str)]) -> Result<String, GatewayError> {
    let mut out = String::with_capacity(template.text.len());
    let mut rest = template.text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or_else(|| GatewayError::UnboundPlaceholder {
            template: template.name.to_string(),
            name: "unterminated {".to_string(),
        })?;
        let key = &after[..close];
        let value = bindings
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| GatewayError::UnboundPlaceholder {
                template: template.name.to_string(),
                name: key.to_string(),
            })?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Fixed decoding parameters: temperature 0, one completion.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodingParams {
    pub temperature: f32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams { temperature: 0.0 }
    }
}

/// Fixture key: a pure function of the rendered prompt and decoding params.
pub fn prompt_hash(prompt: &str, params: &DecodingParams) -> String {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    h.update(b"\x00temperature=");
    h.update(format!("{}", params.temperature).as_bytes());
    hex::encode(h.finalize())
}

/// One recorded prompt/response pair; the JSONL fixture line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exchange {
    pub hash: String,
    pub template: String,
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}`: placeholder `{name}` is not bound")]
    UnboundPlaceholder { template: String, name: String },
    #[error("no fixture for template `{template}` with prompt hash {hash}")]
    MissingFixture { template: String, hash: String },
    #[error("environment variable PARLENS_API_KEY is not set")]
    NoApiKey,
    #[error("chat backend: {0}")]
    Backend(String),
    #[error("fixture file {path}: {source}")]
    FixtureIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture file {path} line {line}: {message}")]
    FixtureParse { path: PathBuf, line: usize, message: String },
}

/// A completion provider: the HTTP client in live runs, a scripted stand-in
/// in tests and fixture regeneration.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Record,
    Replay,
}

enum Inner {
    Live { backend: Box<dyn ChatBackend> },
    Record { backend: Box<dyn ChatBackend>, writer: Mutex<RecordWriter>, seen: Mutex<HashMap<String, String>> },
    Replay { fixtures: HashMap<String, Exchange> },
}

struct RecordWriter {
    path: PathBuf,
    file: std::fs::File,
}

/// The shared model client. Counts every completion call so tests can
/// assert that crash triage makes zero model exchanges.
pub struct Gateway {
    inner: Inner,
    params: DecodingParams,
    calls: AtomicUsize,
}

impl Gateway {
    pub fn live(backend: Box<dyn ChatBackend>) -> Self {
        Gateway { inner: Inner::Live { backend }, params: DecodingParams::default(), calls: AtomicUsize::new(0) }
    }

    /// Live calls, each appended to the JSONL fixture file at `path`.
    pub fn record(backend: Box<dyn ChatBackend>, path: &Path) -> Result<Self, GatewayError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| GatewayError::FixtureIo { path: path.to_path_buf(), source: e })?;
        }
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::FixtureIo { path: path.to_path_buf(), source: e })?;
        Ok(Gateway {
            inner: Inner::Record {
                backend,
                writer: Mutex::new(RecordWriter { path: path.to_path_buf(), file }),
                seen: Mutex::new(HashMap::new()),
            },
            params: DecodingParams::default(),
            calls: AtomicUsize::new(0),
        })
    }

    /// Answers exclusively from the fixture file; no network code path.
    pub fn replay(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::FixtureIo { path: path.to_path_buf(), source: e })?;
        let mut fixtures = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ex: Exchange = serde_json::from_str(line).map_err(|e| GatewayError::FixtureParse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            fixtures.insert(ex.hash.clone(), ex);
        }
        Ok(Gateway { inner: Inner::Replay { fixtures }, params: DecodingParams::default(), calls: AtomicUsize::new(0) })
    }

    /// Total completion calls made through this gateway.
    pub fn exchange_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Renders the named template with `bindings` and returns the model's
    /// (or fixture's) response text.
    pub fn complete(&self, template_name: &str, bindings: &[(&str, &str)]) -> Result<String, GatewayError> {
        let tpl = template(template_name)
            .ok_or_else(|| GatewayError::UnknownTemplate(template_name.to_string()))?;
        let prompt = render(tpl, bindings)?;
        let hash = prompt_hash(&prompt, &self.params);
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.inner {
            Inner::Replay { fixtures } => fixtures
                .get(&hash)
                .map(|ex| ex.response.clone())
                .ok_or(GatewayError::MissingFixture { template: tpl.name.to_string(), hash }),
            Inner::Live { backend } => backend.complete(&prompt, &self.params),
            Inner::Record { backend, writer, seen } => {
                if let Some(resp) = seen.lock().unwrap().get(&hash) {
                    return Ok(resp.clone());
                }
                let response = backend.complete(&prompt, &self.params)?;
                let ex = Exchange {
                    hash: hash.clone(),
                    template: tpl.name.to_string(),
                    prompt,
                    response: response.clone(),
                };
                let mut w = writer.lock().unwrap();
                let line = serde_json::to_string(&ex).expect("exchange serializes");
                writeln!(w.file, "{line}")
                    .map_err(|e| GatewayError::FixtureIo { path: w.path.clone(), source: e })?;
                w.file
                    .flush()
                    .map_err(|e| GatewayError::FixtureIo { path: w.path.clone(), source: e })?;
                seen.lock().unwrap().insert(hash, response.clone());
                Ok(response)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Live HTTP backend
// ---------------------------------------------------------------------------

/// OpenAI-style chat-completion client. Key from `PARLENS_API_KEY`; three
/// attempts with exponential backoff starting at one second.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    base_url: String,
    model: String,
    api_key: String,
}

impl HttpBackend {
    pub fn new(base_url: &str, model: &str) -> Result<Self, GatewayError> {
        let api_key = std::env::var("PARLENS_API_KEY").map_err(|_| GatewayError::NoApiKey)?;
        Ok(HttpBackend {
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .map_err(|e| GatewayError::Backend(e.to_string()))?,
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
        })
    }

    fn call_once(&self, prompt: &str, params: &DecodingParams) -> Result<String, GatewayError> {
        let body = serde_json::json!({
            "model": self.model,
            "temperature": params.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let resp = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| GatewayError::Backend(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(GatewayError::Backend(format!("HTTP {status}")));
        }
        let json: serde_json::Value = resp.json().map_err(|e| GatewayError::Backend(e.to_string()))?;
        json["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Backend("malformed chat response".to_string()))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, GatewayError> {
        let mut backoff = Duration::from_secs(1);
        let mut last = None;
        for attempt in 0..3 {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            match self.call_once(prompt, params) {
                Ok(r) => return Ok(r),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap())
    }
}

// ---------------------------------------------------------------------------
// Scripted backend (tests, fixture regeneration)
// ---------------------------------------------------------------------------

/// A rule of a [`ScriptedBackend`]: fires when every `contains` substring
/// appears in the prompt; `max_uses` limits how often (None = unlimited).
pub struct ScriptRule {
    pub contains: Vec<String>,
    pub response: String,
    pub max_uses: Option<usize>,
}

/// Deterministic in-process backend answering from an ordered rule list;
/// used to author fixtures and to test retry behavior.
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
    uses: Mutex<Vec<usize>>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        let uses = Mutex::new(vec![0; rules.len()]);
        ScriptedBackend { rules, uses }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, GatewayError> {
        let mut uses = self.uses.lock().unwrap();
        for (i, rule) in self.rules.iter().enumerate() {
            if let Some(max) = rule.max_uses {
                if uses[i] >= max {
                    continue;
                }
            }
            if rule.contains.iter().all(|s| prompt.contains(s.as_str())) {
                uses[i] += 1;
                return Ok(rule.response.clone());
            }
        }
        Err(GatewayError::Backend(format!(
            "no scripted response matches prompt starting: {:?}",
            prompt.chars().take(120).collect::<String>()
        )))
    }
}
