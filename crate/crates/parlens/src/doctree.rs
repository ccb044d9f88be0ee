//! DocTree: hierarchical representation of an RFC document, plus the
//! divide-and-conquer format extraction over it.
//!
//! The tree is built from the document's table of contents, its hierarchy
//! refined from section summaries, a format fragment extracted per node
//! (with syntax-check retry), and the fragments merged bottom-up into the
//! complete format. Each struct in the result stays linked to the deepest
//! section that contributed it, so a violated constraint can be backtraced
//! to document text during triage.

use crate::dsl::{check_syntax, parse_format, print_format, Diagnostic, FormatSpec, PropertyId};
use crate::gateway::{Gateway, GatewayError, DSL_REFERENCE};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocNode {
    pub section_id: String,
    pub title: String,
    /// Verbatim section text; never edited by any operation.
    pub content: String,
    #[serde(default)]
    pub summary: String,
    /// Extracted/merged format fragment in canonical DSL text.
    #[serde(default)]
    pub format_text: Option<String>,
    #[serde(default)]
    pub children: Vec<String>,
}

impl DocNode {
    pub fn format(&self) -> Option<FormatSpec> {
        self.format_text.as_deref().map(|t| parse_format(t).expect("stored formats are valid").spec)
    }

    /// The text handed to prompts for this section.
    fn prompt_text(&self) -> String {
        format!("{} {}\n{}", self.section_id, self.title, self.content)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocTree {
    pub root: String,
    pub nodes: BTreeMap<String, DocNode>,
}

pub const SYNTHETIC_ROOT: &str = "root";

#[derive(Debug, Error)]
pub enum DocError {
    #[error("duplicate section id `{0}` in table of contents")]
    DuplicateSection(String),
    #[error("table of contents entry `{0}` has no section text")]
    MissingSection(String),
    #[error("no table of contents found in document")]
    NoToc,
    #[error("section {section}: {source}")]
    Gateway {
        section: String,
        #[source]
        source: GatewayError,
    },
    #[error("section {section}: model returned a blank response twice")]
    BlankResponse { section: String },
    #[error("merge at root section {section} failed the syntax check after {attempts} attempts: {last_error}")]
    RootMergeFailed { section: String, attempts: usize, last_error: String },
    #[error("property {0} has no trace entry")]
    UnknownProperty(PropertyId),
}

impl DocTree {
    pub fn get(&self, id: &str) -> Option<&DocNode> {
        self.nodes.get(id)
    }

    pub fn parent_of(&self, id: &str) -> Option<&str> {
        self.nodes
            .values()
            .find(|n| n.children.iter().any(|c| c == id))
            .map(|n| n.section_id.as_str())
    }

    fn is_ancestor<'a>(&'a self, anc: &str, mut id: &'a str) -> bool {
        while let Some(p) = self.parent_of(id) {
            if p == anc {
                return true;
            }
            id = p;
        }
        false
    }

    /// Section ids in bottom-up (post) order from the root.
    pub fn postorder(&self) -> Vec<String> {
        let mut out = Vec::new();
        fn walk(tree: &DocTree, id: &str, out: &mut Vec<String>) {
            if let Some(n) = tree.nodes.get(id) {
                for c in &n.children {
                    walk(tree, c, out);
                }
                out.push(id.to_string());
            }
        }
        walk(self, &self.root, &mut out);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("doctree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

// ---------------------------------------------------------------------------
// RFC ingestion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RfcDocument {
    pub toc: Vec<(String, String)>,
    pub sections: BTreeMap<String, String>,
}

/// Splits raw RFC text into numbered sections using its table of contents.
/// Page headers/footers and form feeds are stripped first.
pub fn ingest_rfc(text: &str) -> Result<RfcDocument, DocError> {
    let footer = regex::Regex::new(r"\[Page \d+\]\s*$").unwrap();
    let header = regex::Regex::new(r"^RFC\s+\d+\s+.*\d{4}\s*$").unwrap();
    let cleaned: Vec<&str> = text
        .lines()
        .filter(|l| !l.contains('\x0c') && !footer.is_match(l) && !header.is_match(l))
        .collect();

    // Table of contents: dotted-number entries after the ToC heading,
    // optionally with a dot leader and page number.
    let toc_entry = regex::Regex::new(r"^\s+(\d+(?:\.\d+)*)\.?\s+(.+?)(?:\s*\.{3,}\s*\d+)?\s*$").unwrap();
    let mut toc: Vec<(String, String)> = Vec::new();
    let mut i = 0;
    while i < cleaned.len() && !cleaned[i].trim().eq_ignore_ascii_case("table of contents") {
        i += 1;
    }
    if i == cleaned.len() {
        return Err(DocError::NoToc);
    }
    i += 1;
    let mut seen = HashSet::new();
    while i < cleaned.len() {
        let line = cleaned[i];
        if let Some(c) = toc_entry.captures(line) {
            let id = c[1].to_string();
            if !seen.insert(id.clone()) {
                return Err(DocError::DuplicateSection(id));
            }
            toc.push((id, c[2].trim().to_string()));
        } else if !line.trim().is_empty() && !toc.is_empty() {
            break; // end of the contiguous ToC block
        }
        i += 1;
    }
    if toc.is_empty() {
        return Err(DocError::NoToc);
    }

    // Section bodies: a header is an in-ToC id at column zero.
    let header_line = regex::Regex::new(r"^(\d+(?:\.\d+)*)\.?\s+\S").unwrap();
    let ids: HashSet<&str> = toc.iter().map(|(id, _)| id.as_str()).collect();
    let mut sections: BTreeMap<String, String> = BTreeMap::new();
    let mut current: Option<String> = None;
    let mut body = String::new();
    for line in &cleaned[i..] {
        let is_header = header_line
            .captures(line)
            .map(|c| ids.contains(&c[1]))
            .unwrap_or(false);
        if is_header {
            if let Some(id) = current.take() {
                sections.insert(id, body.trim().to_string());
            }
            body = String::new();
            current = Some(header_line.captures(line).unwrap()[1].to_string());
        } else if current.is_some() {
            body.push_str(line);
            body.push('\n');
        }
    }
    if let Some(id) = current {
        sections.insert(id, body.trim().to_string());
    }
    for (id, _) in &toc {
        if !sections.contains_key(id) {
            return Err(DocError::MissingSection(id.clone()));
        }
    }
    Ok(RfcDocument { toc, sections })
}

// ---------------------------------------------------------------------------
// Tree construction
// ---------------------------------------------------------------------------

/// Builds the initial tree mirroring the dotted numbering of the table of
/// contents. An id whose dotted parent is absent attaches to its nearest
/// existing ancestor with a warning; multiple top-level sections get a
/// synthetic root.
pub fn build_initial_tree(
    toc: &[(String, String)],
    sections: &BTreeMap<String, String>,
) -> Result<(DocTree, Vec<String>), DocError> {
    let mut warnings = Vec::new();
    let mut nodes: BTreeMap<String, DocNode> = BTreeMap::new();
    let mut seen = HashSet::new();
    for (id, title) in toc {
        if !seen.insert(id.clone()) {
            return Err(DocError::DuplicateSection(id.clone()));
        }
        let content = sections.get(id).ok_or_else(|| DocError::MissingSection(id.clone()))?;
        nodes.insert(
            id.clone(),
            DocNode {
                section_id: id.clone(),
                title: title.clone(),
                content: content.clone(),
                summary: String::new(),
                format_text: None,
                children: Vec::new(),
            },
        );
    }
    // Attach each node (in ToC order) to its nearest existing ancestor.
    let mut top_level: Vec<String> = Vec::new();
    let order: Vec<String> = toc.iter().map(|(id, _)| id.clone()).collect();
    for id in &order {
        let mut parent = None;
        let mut prefix = id.as_str();
        while let Some(pos) = prefix.rfind('.') {
            prefix = &prefix[..pos];
            if nodes.contains_key(prefix) {
                parent = Some(prefix.to_string());
                break;
            }
        }
        if parent.is_none() && id.contains('.') {
            warnings.push(format!("section {id} has no parent section in the table of contents"));
        }
        match parent {
            Some(p) => nodes.get_mut(&p).unwrap().children.push(id.clone()),
            None => top_level.push(id.clone()),
        }
    }
    let root = if top_level.len() == 1 {
        top_level[0].clone()
    } else {
        nodes.insert(
            SYNTHETIC_ROOT.to_string(),
            DocNode {
                section_id: SYNTHETIC_ROOT.to_string(),
                title: "(document)".to_string(),
                content: String::new(),
                summary: String::new(),
                format_text: None,
                children: top_level,
            },
        );
        SYNTHETIC_ROOT.to_string()
    };
    Ok((DocTree { root, nodes }, warnings))
}

// ---------------------------------------------------------------------------
// Summaries and hierarchy refinement
// ---------------------------------------------------------------------------

/// Summarizes every node. Empty-content nodes get "(empty section)" without
/// a model call; a blank response is retried once, then errors.
pub fn summarize_all(tree: &DocTree, gateway: &Gateway) -> Result<DocTree, DocError> {
    let mut out = tree.clone();
    for id in tree.postorder() {
        let node = &tree.nodes[&id];
        let summary = if node.content.trim().is_empty() {
            "(empty section)".to_string()
        } else {
            let section = node.prompt_text();
            let wrap = |e| DocError::Gateway { section: id.clone(), source: e };
            let mut s = gateway.complete("summarize", &[("Section", &section)]).map_err(wrap)?;
            if s.trim().is_empty() {
                s = gateway
                    .complete("summarize", &[("Section", &section)])
                    .map_err(|e| DocError::Gateway { section: id.clone(), source: e })?;
            }
            if s.trim().is_empty() {
                return Err(DocError::BlankResponse { section: id.clone() });
            }
            s.trim().to_string()
        };
        out.nodes.get_mut(&id).unwrap().summary = summary;
    }
    Ok(out)
}

/// Sibling-group size per hierarchy prompt; larger groups are windowed with
/// one overlapping element.
const SIBLING_WINDOW: usize = 20;

/// Asks the model for parent-child relationships within each sibling group
/// and re-parents accordingly. Moves outside the group or ones that would
/// break the tree are rejected with a warning.
pub fn refine_hierarchy(tree: &DocTree, gateway: &Gateway) -> Result<(DocTree, Vec<String>), DocError> {
    let mut out = tree.clone();
    let mut warnings = Vec::new();
    // Snapshot the original sibling groups; moves stay within them.
    let groups: Vec<(String, Vec<String>)> = tree
        .postorder()
        .into_iter()
        .filter_map(|id| {
            let n = &tree.nodes[&id];
            (n.children.len() >= 2).then(|| (id.clone(), n.children.clone()))
        })
        .collect();
    let pair_re = regex::Regex::new(r"(?m)^\s*PARENT\s+(\S+)\s+CHILD\s+(\S+)\s*$").unwrap();
    for (group_parent, members) in groups {
        let mut start = 0;
        while start < members.len() {
            let end = (start + SIBLING_WINDOW).min(members.len());
            let window = &members[start..end];
            let mut summaries = String::new();
            for id in window {
                let _ = writeln!(summaries, "{}: {}", id, out.nodes[id].summary);
            }
            let resp = gateway
                .complete("hierarchy", &[("Section Summaries", &summaries)])
                .map_err(|e| DocError::Gateway { section: group_parent.clone(), source: e })?;
            let pairs: Vec<(String, String)> = pair_re
                .captures_iter(&resp)
                .map(|c| (c[1].to_string(), c[2].to_string()))
                .collect();
            if pairs.is_empty() && !resp.to_uppercase().contains("NONE") {
                warnings.push(format!(
                    "sibling group under {group_parent}: unparseable hierarchy response; left unchanged"
                ));
            }
            for (parent, child) in pairs {
                let in_group = members.contains(&parent) && members.contains(&child);
                if !in_group || parent == child {
                    warnings.push(format!(
                        "hierarchy suggestion {parent} -> {child} is outside sibling group under {group_parent}; ignored"
                    ));
                    continue;
                }
                if out.is_ancestor(&child, &parent) || child == out.root {
                    warnings.push(format!(
                        "hierarchy suggestion {parent} -> {child} would create a cycle; rejected"
                    ));
                    continue;
                }
                // Detach child from its current parent, attach under the new one.
                let old_parent = out.parent_of(&child).map(str::to_string);
                if let Some(op) = old_parent {
                    out.nodes.get_mut(&op).unwrap().children.retain(|c| c != &child);
                }
                out.nodes.get_mut(&parent).unwrap().children.push(child);
            }
            if end == members.len() {
                break;
            }
            start = end - 1; // one overlapping element per window
        }
    }
    Ok((out, warnings))
}

// ---------------------------------------------------------------------------
// Per-node format extraction
// ---------------------------------------------------------------------------

/// The model's marker for sections that describe no packet layout.
pub const NO_FORMAT: &str = "NO_FORMAT";

/// Syntax-check retries after the initial generation attempt.
pub const MAX_RETRIES: usize = 3;

/// Extracts a format fragment for one node, feeding syntax errors back for
/// up to `max_retries` regenerations. Returns canonical DSL text, or `None`
/// for prose-only sections and retry exhaustion (with the last diagnostics
/// in `warnings`).
pub fn extract_node_format(
    node: &DocNode,
    gateway: &Gateway,
    dsl_description: &str,
    max_retries: usize,
    warnings: &mut Vec<String>,
) -> Result<Option<String>, DocError> {
    let section = node.prompt_text();
    let wrap = |e| DocError::Gateway { section: node.section_id.clone(), source: e };
    let mut response = gateway
        .complete("generate_format", &[("DSL", dsl_description), ("Section", &section)])
        .map_err(wrap)?;
    for _attempt in 0..=max_retries {
        let text = strip_fences(&response);
        if text.trim() == NO_FORMAT || text.trim().is_empty() {
            return Ok(None);
        }
        match parse_format(&text) {
            Ok(parsed) => return Ok(Some(print_format(&parsed.spec))),
            Err(diags) => {
                let errors = render_diags(&diags);
                if _attempt == max_retries {
                    warnings.push(format!(
                        "section {}: format discarded after {} retries; last errors: {}",
                        node.section_id,
                        max_retries,
                        errors.replace('\n', "; ")
                    ));
                    return Ok(None);
                }
                response = gateway
                    .complete(
                        "refine_syntax",
                        &[("DSL", dsl_description), ("Section", &section), ("Errors", &errors)],
                    )
                    .map_err(|e| DocError::Gateway { section: node.section_id.clone(), source: e })?;
            }
        }
    }
    unreachable!("loop returns on success, NO_FORMAT, or exhaustion");
}

fn render_diags(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

/// Drops Markdown code fences the model may wrap its format in.
fn strip_fences(text: &str) -> String {
    let trimmed = text.trim();
    if let Some(rest) = trimmed.strip_prefix("```") {
        let rest = rest.split_once('\n').map(|(_, r)| r).unwrap_or("");
        return rest.strip_suffix("```").unwrap_or(rest).trim().to_string();
    }
    trimmed.to_string()
}

/// Runs [`extract_node_format`] for every node, storing fragments in the tree.
pub fn extract_all(
    tree: &DocTree,
    gateway: &Gateway,
    dsl_description: &str,
) -> Result<(DocTree, Vec<String>), DocError> {
    let mut out = tree.clone();
    let mut warnings = Vec::new();
    for id in tree.postorder() {
        let node = &tree.nodes[&id];
        if node.content.trim().is_empty() {
            continue;
        }
        let fragment = extract_node_format(node, gateway, dsl_description, MAX_RETRIES, &mut warnings)?;
        out.nodes.get_mut(&id).unwrap().format_text = fragment;
    }
    Ok((out, warnings))
}

// ---------------------------------------------------------------------------
// Bottom-up merge and traceability
// ---------------------------------------------------------------------------

/// Maps every format property (field or constraint) to the section that
/// contributed its struct.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceIndex {
    pub entries: BTreeMap<PropertyId, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceEntry {
    #[serde(rename = "struct")]
    struct_name: String,
    property_id: String,
    section_id: String,
}

impl TraceIndex {
    pub fn get(&self, property: &PropertyId) -> Option<&str> {
        self.entries.get(property).map(String::as_str)
    }

    pub fn to_json(&self) -> String {
        let list: Vec<TraceEntry> = self
            .entries
            .iter()
            .map(|(p, s)| TraceEntry {
                struct_name: p.struct_name.clone(),
                property_id: p.to_string(),
                section_id: s.clone(),
            })
            .collect();
        serde_json::to_string_pretty(&list).expect("trace index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let list: Vec<TraceEntry> = serde_json::from_str(text)?;
        let mut entries = BTreeMap::new();
        for e in list {
            let p: PropertyId = e.property_id.parse().map_err(serde::de::Error::custom)?;
            entries.insert(p, e.section_id);
        }
        Ok(TraceIndex { entries })
    }
}

/// Merges node formats bottom-up (Algorithm: children's summary/format
/// pairs plus the node's own content and format go to the model; the root's
/// format is the result). Returns the merged spec, the trace index, and the
/// updated tree.
pub fn merge_formats(
    tree: &DocTree,
    gateway: &Gateway,
) -> Result<(FormatSpec, TraceIndex, DocTree, Vec<String>), DocError> {
    let mut out = tree.clone();
    let mut warnings = Vec::new();
    // Deepest contributor per struct; leaf fragments seed it.
    let mut struct_attr: BTreeMap<String, String> = BTreeMap::new();
    for id in tree.postorder() {
        if let Some(spec) = out.nodes[&id].format() {
            for st in &spec.structs {
                struct_attr.entry(st.name.clone()).or_insert_with(|| id.clone());
            }
        }
    }
    for id in out.postorder() {
        let node = out.nodes[&id].clone();
        if node.children.is_empty() {
            continue; // leaves keep their format and summary
        }
        let child_fragments: Vec<&String> =
            node.children.iter().filter_map(|c| out.nodes[c].format_text.as_ref()).collect();
        if child_fragments.is_empty() && node.format_text.is_none() {
            continue; // nothing to merge at this node
        }
        let mut children_text = String::new();
        for c in &node.children {
            let cn = &out.nodes[c];
            let _ = writeln!(
                children_text,
                "Section {c}:\nSummary: {}\nFormat:\n{}\n",
                cn.summary,
                cn.format_text.as_deref().unwrap_or("(none)")
            );
        }
        let section = node.prompt_text();
        let own_format = node.format_text.as_deref().unwrap_or("(none)").to_string();
        let is_root = id == out.root;
        let mut response = gateway
            .complete(
                "merge",
                &[("section", &section), ("format", &own_format), ("children", &children_text)],
            )
            .map_err(|e| DocError::Gateway { section: id.clone(), source: e })?;
        let mut merged: Option<(String, Vec<(String, String)>, String)> = None;
        let mut last_error = String::new();
        for attempt in 0..=MAX_RETRIES {
            let (format_text, attribution, summary) = parse_merge_response(&response);
            let (ok, diags) = check_syntax(&format_text);
            if ok {
                let spec = parse_format(&format_text).expect("checked").spec;
                merged = Some((print_format(&spec), attribution, summary));
                break;
            }
            last_error = render_diags(&diags);
            if attempt == MAX_RETRIES {
                break;
            }
            response = gateway
                .complete(
                    "refine_syntax",
                    &[("DSL", DSL_REFERENCE), ("Section", &section), ("Errors", &last_error)],
                )
                .map_err(|e| DocError::Gateway { section: id.clone(), source: e })?;
        }
        let Some((format_text, attribution, summary)) = merged else {
            if is_root {
                return Err(DocError::RootMergeFailed {
                    section: id.clone(),
                    attempts: MAX_RETRIES + 1,
                    last_error,
                });
            }
            warnings.push(format!(
                "section {id}: merged format failed the syntax check after retries; node format kept"
            ));
            continue;
        };
        let spec = parse_format(&format_text).expect("canonical").spec;
        for st in &spec.structs {
            let attributed = attribution.iter().find(|(s, _)| s == &st.name).map(|(_, sec)| sec);
            match attributed {
                Some(sec) if out.nodes.contains_key(sec) => {
                    struct_attr.insert(st.name.clone(), sec.clone());
                }
                Some(sec) => {
                    warnings.push(format!(
                        "section {id}: attribution of `{}` to unknown section {sec}; defaulting",
                        st.name
                    ));
                    struct_attr.entry(st.name.clone()).or_insert_with(|| id.clone());
                }
                // Structs the model cannot attribute keep their deepest
                // known contributor, else default to the merging node.
                None => {
                    struct_attr.entry(st.name.clone()).or_insert_with(|| id.clone());
                }
            }
        }
        let n = out.nodes.get_mut(&id).unwrap();
        n.format_text = Some(format_text);
        if !summary.trim().is_empty() {
            n.summary = summary.trim().to_string();
        }
    }
    let root_spec = out.nodes[&out.root]
        .format()
        .ok_or_else(|| DocError::RootMergeFailed {
            section: out.root.clone(),
            attempts: 0,
            last_error: "root node has no format after merge".to_string(),
        })?;
    // Trace index over the final root format: every field and constraint of
    // a struct maps to that struct's deepest contributor.
    let mut index = TraceIndex::default();
    for st in &root_spec.structs {
        let section = struct_attr.get(&st.name).cloned().unwrap_or_else(|| out.root.clone());
        for f in st.fields() {
            index.entries.insert(PropertyId::field(&st.name, &f.name), section.clone());
        }
        for (i, _) in st.constraints() {
            index.entries.insert(PropertyId::constraint(&st.name, i), section.clone());
        }
    }
    Ok((root_spec, index, out, warnings))
}

/// Splits a merge response into (format text, attribution pairs, summary).
fn parse_merge_response(response: &str) -> (String, Vec<(String, String)>, String) {
    let mut format_text = String::new();
    let mut attribution = Vec::new();
    let mut summary = String::new();
    let attr_re = regex::Regex::new(r"^(\S+)\s*<-\s*(\S+)$").unwrap();
    #[derive(PartialEq)]
    enum Part {
        Format,
        Attribution,
        Summary,
    }
    let mut part = Part::Format;
    for line in response.lines() {
        let t = line.trim();
        if t.eq_ignore_ascii_case("ATTRIBUTION:") {
            part = Part::Attribution;
            continue;
        }
        if t.eq_ignore_ascii_case("SUMMARY:") {
            part = Part::Summary;
            continue;
        }
        match part {
            Part::Format => {
                format_text.push_str(line);
                format_text.push('\n');
            }
            Part::Attribution => {
                if let Some(c) = attr_re.captures(t) {
                    attribution.push((c[1].to_string(), c[2].to_string()));
                }
            }
            Part::Summary => {
                summary.push_str(line);
                summary.push('\n');
            }
        }
    }
    (strip_fences(&format_text), attribution, summary)
}

/// Backtraces a property to its section id and verbatim content.
pub fn trace<'a>(
    index: &'a TraceIndex,
    tree: &'a DocTree,
    property: &PropertyId,
) -> Result<(&'a str, &'a str), DocError> {
    let section = index.get(property).ok_or_else(|| DocError::UnknownProperty(property.clone()))?;
    let node = tree.get(section).ok_or_else(|| DocError::UnknownProperty(property.clone()))?;
    Ok((section, &node.content))
}
