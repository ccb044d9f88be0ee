//! Triage: classify each inconsistency as an implementation error or a
//! format-extraction error, refine the format when the extraction was
//! wrong, and emit bug reports with reproducible PoC packets.
//!
//! Crashes are always implementation errors and never consult the model.
//! Everything else is diagnosed with a prompt containing the violated
//! constraint, the accept/reject direction, and only the backtraced RFC
//! section — never the whole document.

use crate::doctree::{trace, DocError, DocTree, TraceIndex};
use crate::dsl::{parse_format, print_constraint, print_format, FormatSpec, Item, PropertyId};
use crate::gateway::{Gateway, GatewayError};
use crate::harness::{run_case, Direction, HarnessError, Inconsistency, ParserTarget, Verdict};
use crate::testgen::TestCase;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ImplementationError,
    FormatExtractionError,
    /// The model's answer could not be parsed twice; surfaced for manual
    /// review instead of silently misclassifying.
    Undetermined,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnosis {
    pub case: String,
    pub property: Option<PropertyId>,
    pub section_id: Option<String>,
    pub classification: Classification,
    pub rationale: String,
    /// Quote from the section cited as evidence, when the model gave one.
    pub evidence: String,
    /// Replacement constraint (or `remove`) for format-extraction errors.
    pub correction: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BugReport {
    pub protocol: String,
    pub case: String,
    pub description: String,
    pub poc_hex: String,
    pub reproduction: String,
    pub section_id: Option<String>,
    pub excerpt: String,
    /// Severity comes from developer response, never assigned here.
    pub severity: String,
}

#[derive(Debug, Error)]
pub enum TriageError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Trace(#[from] DocError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Classifies one inconsistency. Crashes short-circuit to
/// ImplementationError with zero gateway exchanges.
pub fn diagnose(
    inc: &Inconsistency,
    spec: &FormatSpec,
    tree: &DocTree,
    index: &TraceIndex,
    gateway: &Gateway,
) -> Result<Diagnosis, TriageError> {
    if inc.direction == Direction::Crash {
        return Ok(Diagnosis {
            case: inc.case.clone(),
            property: inc.property.clone(),
            section_id: None,
            classification: Classification::ImplementationError,
            rationale: format!("parser crashed: {}", inc.evidence),
            evidence: String::new(),
            correction: None,
        });
    }
    // The violated property backtraces to its defining section; structural
    // negatives and positives have no property and fall back to the root
    // section's content.
    let (section_id, section_content) = match &inc.property {
        Some(p) => {
            let (id, content) = trace(index, tree, p)?;
            (Some(id.to_string()), content.to_string())
        }
        None => (
            Some(tree.root.clone()),
            tree.get(&tree.root).map(|n| n.content.clone()).unwrap_or_default(),
        ),
    };
    let constraint_text = inc
        .property
        .as_ref()
        .and_then(|p| spec.find_property(p))
        .map(|c| format!("the constraint `{}`", print_constraint(c)))
        .unwrap_or_else(|| format!("the packet of case `{}`", inc.case));
    let (allowed_by, rejected_by) = match inc.direction {
        Direction::ParserAcceptsInvalid => ("parser", "myformat"),
        Direction::ParserRejectsValid => ("myformat", "parser"),
        Direction::Crash => unreachable!("handled above"),
    };
    let bindings = [
        ("Constraint", constraint_text.as_str()),
        ("AllowedBy", allowed_by),
        ("RejectedBy", rejected_by),
        ("Section", section_content.as_str()),
    ];
    let mut response = gateway.complete("diagnose", &bindings)?;
    let mut parsed = parse_diagnosis(&response);
    if parsed.is_none() {
        response = gateway.complete("diagnose", &bindings)?;
        parsed = parse_diagnosis(&response);
    }
    let (classification, rationale, evidence, correction) = match parsed {
        Some(p) => p,
        None => (
            Classification::Undetermined,
            format!("unparseable diagnosis (no VERDICT line): {response}"),
            String::new(),
            None,
        ),
    };
    Ok(Diagnosis {
        case: inc.case.clone(),
        property: inc.property.clone(),
        section_id,
        classification,
        rationale,
        evidence,
        correction,
    })
}

/// Pulls (classification, rationale, evidence, correction) out of a
/// diagnose response; `None` if the final VERDICT line is missing.
fn parse_diagnosis(response: &str) -> Option<(Classification, String, String, Option<String>)> {
    let verdict_line = response
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.to_uppercase().starts_with("VERDICT:"))?;
    let verdict = verdict_line["VERDICT:".len()..].trim().to_lowercase();
    let classification = if verdict.starts_with("parser") {
        Classification::ImplementationError
    } else if verdict.starts_with("myformat") {
        Classification::FormatExtractionError
    } else {
        return None;
    };
    let mut rationale = String::new();
    let mut correction = None;
    for line in response.lines() {
        let t = line.trim();
        if t.to_uppercase().starts_with("VERDICT:") {
            continue;
        }
        if let Some(rest) = t.strip_prefix("CORRECTION:") {
            correction = Some(rest.trim().to_string());
            continue;
        }
        rationale.push_str(line);
        rationale.push('\n');
    }
    // First double-quoted span counts as the evidence quote.
    let evidence = rationale
        .split('"')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_default();
    Some((classification, rationale.trim().to_string(), evidence, correction))
}

/// One line of the refinement audit log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineAudit {
    pub property_id: String,
    pub action: String, // "removed" | "replaced"
    pub before: String,
    pub after: Option<String>,
    pub diagnosis_case: String,
}

/// Applies a FormatExtractionError diagnosis: removes or replaces exactly
/// the offending constraint. A correction that fails the syntax check falls
/// back to removal with a warning. The TraceIndex entry follows the
/// constraint (removed or re-keyed as indices shift).
pub fn refine_format(
    diag: &Diagnosis,
    spec: &FormatSpec,
    index: &TraceIndex,
    warnings: &mut Vec<String>,
) -> Option<(FormatSpec, TraceIndex, RefineAudit)> {
    debug_assert_eq!(diag.classification, Classification::FormatExtractionError);
    let property = diag.property.as_ref()?;
    let before = spec.find_property(property).map(print_constraint)?;
    let st_idx = spec.structs.iter().position(|s| s.name == property.struct_name)?;
    let target_idx: usize = property.member.strip_prefix('c')?.parse().ok()?;

    // A replacement is accepted only if it parses as a constraint in the
    // context of the struct's fields.
    let replacement = diag.correction.as_deref().and_then(|c| {
        let c = c.trim().trim_end_matches(';').trim();
        if c.is_empty() || c.eq_ignore_ascii_case("remove") {
            return None;
        }
        let mut probe = String::new();
        let _ = writeln!(probe, "struct {} {{", spec.structs[st_idx].name);
        for f in spec.structs[st_idx].fields() {
            if let crate::dsl::TypeExpr::Primitive(_) = f.ty {
                let _ = writeln!(probe, "    {};", field_decl_text(&f.name, &f.ty));
            }
        }
        let _ = writeln!(probe, "    {c};");
        probe.push_str("}\n");
        match parse_format(&probe) {
            Ok(parsed) => parsed.spec.structs[0]
                .constraints()
                .last()
                .map(|(_, con)| con.clone()),
            Err(_) => {
                warnings.push(format!(
                    "correction `{c}` for {property} failed the syntax check; constraint removed instead"
                ));
                None
            }
        }
    });

    let mut new_spec = spec.clone();
    let mut constraint_seen = 0usize;
    let mut action = "removed";
    let mut after_text = None;
    let items = &mut new_spec.structs[st_idx].items;
    let mut i = 0;
    while i < items.len() {
        if let Item::Constraint(_) = items[i] {
            if constraint_seen == target_idx {
                match &replacement {
                    Some(c) => {
                        after_text = Some(print_constraint(c));
                        items[i] = Item::Constraint(c.clone());
                        action = "replaced";
                    }
                    None => {
                        items.remove(i);
                    }
                }
                break;
            }
            constraint_seen += 1;
        }
        i += 1;
    }

    // Re-key the struct's constraint trace entries around the edit.
    let mut new_index = index.clone();
    if replacement.is_none() {
        let struct_name = &property.struct_name;
        let old_count = spec.structs[st_idx].constraints().count();
        for k in 0..old_count {
            new_index.entries.remove(&PropertyId::constraint(struct_name, k));
        }
        for k in 0..old_count {
            if k == target_idx {
                continue;
            }
            let old = PropertyId::constraint(struct_name, k);
            let new_k = if k > target_idx { k - 1 } else { k };
            if let Some(sec) = index.entries.get(&old) {
                new_index.entries.insert(PropertyId::constraint(struct_name, new_k), sec.clone());
            }
        }
    }

    let audit = RefineAudit {
        property_id: property.to_string(),
        action: action.to_string(),
        before,
        after: after_text,
        diagnosis_case: diag.case.clone(),
    };
    // Canonicalize via print/parse so downstream stages see the stored form.
    let canonical = parse_format(&print_format(&new_spec)).expect("refined spec stays valid").spec;
    Some((canonical, new_index, audit))
}

fn field_decl_text(name: &str, ty: &crate::dsl::TypeExpr) -> String {
    use crate::dsl::{PrimKind, TypeExpr};
    let t = match ty {
        TypeExpr::Primitive(PrimKind::Uint8) => "UINT8".to_string(),
        TypeExpr::Primitive(PrimKind::Uint16) => "UINT16".to_string(),
        TypeExpr::Primitive(PrimKind::Uint32) => "UINT32".to_string(),
        TypeExpr::Primitive(PrimKind::Uint64) => "UINT64".to_string(),
        TypeExpr::Primitive(PrimKind::Bit(n)) => format!("BIT({n})"),
        _ => unreachable!("probe uses primitive fields only"),
    };
    format!("{t} {name}")
}

/// Builds a bug report for an implementation error, after re-running the
/// case once to confirm the verdict reproduces. A non-reproducing PoC
/// suppresses the report with a warning.
pub fn emit_report(
    inc: &Inconsistency,
    diag: &Diagnosis,
    case: &TestCase,
    target: &ParserTarget,
    tree: &DocTree,
    protocol: &str,
    warnings: &mut Vec<String>,
) -> Result<Option<BugReport>, TriageError> {
    debug_assert_eq!(diag.classification, Classification::ImplementationError);
    let rec = run_case(target, case)?;
    let reproduced = match inc.direction {
        Direction::Crash => rec.verdict == Verdict::Crash,
        Direction::ParserAcceptsInvalid => rec.verdict == Verdict::Pass,
        Direction::ParserRejectsValid => rec.verdict == Verdict::Fail,
    };
    if !reproduced {
        warnings.push(format!(
            "case {}: inconsistency did not reproduce on re-run (got {:?}); report suppressed as flaky",
            inc.case, rec.verdict
        ));
        return Ok(None);
    }
    let excerpt = diag
        .section_id
        .as_deref()
        .and_then(|s| tree.get(s))
        .map(|n| n.content.clone())
        .unwrap_or_default();
    let description = match inc.direction {
        Direction::Crash => format!("Parser crashes on the attached packet ({}).", inc.evidence),
        Direction::ParserAcceptsInvalid => format!(
            "Parser accepts an invalid packet: {} ({}).",
            case.detail, inc.evidence
        ),
        Direction::ParserRejectsValid => format!(
            "Parser rejects a valid packet: {} ({}).",
            case.detail, inc.evidence
        ),
    };
    let reproduction = match target.input_mode {
        crate::harness::InputMode::StdinBytes => format!(
            "{} {} < {}.bin",
            target.command.display(),
            target.args.join(" "),
            case.name
        ),
        crate::harness::InputMode::FileArg => format!(
            "{} {}",
            target.command.display(),
            if target.args.iter().any(|a| a.contains("{input}")) {
                target.args.join(" ").replace("{input}", &format!("{}.bin", case.name))
            } else {
                format!("{} {}.bin", target.args.join(" "), case.name)
            }
        ),
    };
    Ok(Some(BugReport {
        protocol: protocol.to_string(),
        case: inc.case.clone(),
        description,
        poc_hex: hex::encode(&case.bytes),
        reproduction: reproduction.trim().to_string(),
        section_id: diag.section_id.clone(),
        excerpt,
        severity: "unassessed".to_string(),
    }))
}

/// Renders the human-readable side of a report.
pub fn report_markdown(report: &BugReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Bug report: {} ({})", report.protocol, report.case);
    let _ = writeln!(md, "\n{}\n", report.description);
    if let Some(s) = &report.section_id {
        let _ = writeln!(md, "## Specification reference\n\nSection {s}:\n");
        for line in report.excerpt.lines() {
            let _ = writeln!(md, "> {line}");
        }
        md.push('\n');
    }
    let _ = writeln!(md, "## Proof of concept\n\n```\n{}\n```\n", report.poc_hex);
    let _ = writeln!(md, "Reproduce with:\n\n```\n{}\n```\n", report.reproduction);
    let _ = writeln!(md, "Severity: {}", report.severity);
    md
}

/// Writes `<case>.json`, `<case>.md`, and the standalone `<case>.bin` PoC.
pub fn write_report(dir: &std::path::Path, report: &BugReport, poc: &[u8]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join(format!("{}.json", report.case)),
        serde_json::to_string_pretty(report)?,
    )?;
    std::fs::write(dir.join(format!("{}.md", report.case)), report_markdown(report))?;
    std::fs::write(dir.join(format!("{}.bin", report.case)), poc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doctree::{build_initial_tree, TraceIndex};
    use crate::gateway::{Gateway, ScriptRule, ScriptedBackend};
    use crate::testgen::{CaseKind, Expectation};
    use std::collections::BTreeMap;

    const BABEL: &str = "\
struct TLV {
    UINT8 Type;
    switch (Type) {
        case 6: RouterIdTLV;
    } Payload;
}

struct RouterIdTLV {
    UINT8 Length;
    Length >= 10;
    UINT16 Reserved;
    Reserved == 0;
    UINT64 RouterId;
    RouterId != 0;
}
";

    fn fixture() -> (FormatSpec, DocTree, TraceIndex) {
        let spec = parse_format(BABEL).unwrap().spec;
        let toc = vec![
            ("4".to_string(), "Protocol".to_string()),
            ("4.4.7".to_string(), "Router-Id TLV".to_string()),
        ];
        let mut sections = BTreeMap::new();
        sections.insert("4".to_string(), "protocol overview".to_string());
        sections.insert(
            "4.4.7".to_string(),
            "The router-id MUST NOT consist of all zeroes or all ones.".to_string(),
        );
        let (tree, _) = build_initial_tree(&toc, &sections).unwrap();
        let mut index = TraceIndex::default();
        for (i, _) in spec.get_struct("RouterIdTLV").unwrap().constraints() {
            index
                .entries
                .insert(PropertyId::constraint("RouterIdTLV", i), "4.4.7".to_string());
        }
        (spec, tree, index)
    }

    fn gw(rules: Vec<(&str, &str)>) -> Gateway {
        Gateway::live(Box::new(ScriptedBackend::new(
            rules
                .into_iter()
                .map(|(c, r)| ScriptRule {
                    contains: vec![c.to_string()],
                    response: r.to_string(),
                    max_uses: None,
                })
                .collect(),
        )))
    }

    fn inconsistency(property: Option<PropertyId>, direction: Direction) -> Inconsistency {
        Inconsistency {
            case: "p0000__neg__x".to_string(),
            property,
            direction,
            evidence: "exit code 0".to_string(),
        }
    }

    #[test]
    fn crash_is_implementation_error_without_gateway_call() {
        let (spec, tree, index) = fixture();
        let gateway = gw(vec![]); // any call would error
        let inc = inconsistency(None, Direction::Crash);
        let d = diagnose(&inc, &spec, &tree, &index, &gateway).unwrap();
        assert_eq!(d.classification, Classification::ImplementationError);
        assert_eq!(gateway.exchange_count(), 0);
    }

    #[test]
    fn parser_verdict_classifies_implementation_error() {
        let (spec, tree, index) = fixture();
        let gateway = gw(vec![(
            "RouterId != 0",
            "The section says the router-id \"MUST NOT consist of all zeroes\".\nVERDICT: parser",
        )]);
        let inc = inconsistency(
            Some(PropertyId::constraint("RouterIdTLV", 2)),
            Direction::ParserAcceptsInvalid,
        );
        let d = diagnose(&inc, &spec, &tree, &index, &gateway).unwrap();
        assert_eq!(d.classification, Classification::ImplementationError);
        assert_eq!(d.section_id.as_deref(), Some("4.4.7"));
        assert!(d.evidence.contains("MUST NOT consist of all zeroes"));
    }

    #[test]
    fn diagnose_prompt_is_section_local() {
        let (spec, tree, index) = fixture();
        // Scripted rule matching root-section text would prove leakage.
        let gateway = gw(vec![("protocol overview", "VERDICT: parser"), ("", "VERDICT: myformat")]);
        let inc = inconsistency(
            Some(PropertyId::constraint("RouterIdTLV", 1)),
            Direction::ParserAcceptsInvalid,
        );
        let d = diagnose(&inc, &spec, &tree, &index, &gateway).unwrap();
        // The first rule must not fire: the prompt contains only 4.4.7 text.
        assert_eq!(d.classification, Classification::FormatExtractionError);
    }

    #[test]
    fn unparseable_response_becomes_undetermined_after_one_retry() {
        let (spec, tree, index) = fixture();
        let gateway = gw(vec![("", "no verdict here")]);
        let inc = inconsistency(
            Some(PropertyId::constraint("RouterIdTLV", 0)),
            Direction::ParserAcceptsInvalid,
        );
        let d = diagnose(&inc, &spec, &tree, &index, &gateway).unwrap();
        assert_eq!(d.classification, Classification::Undetermined);
        assert_eq!(gateway.exchange_count(), 2);
    }

    fn extraction_diag(idx: usize, correction: Option<&str>) -> Diagnosis {
        Diagnosis {
            case: "c".to_string(),
            property: Some(PropertyId::constraint("RouterIdTLV", idx)),
            section_id: Some("4.4.7".to_string()),
            classification: Classification::FormatExtractionError,
            rationale: String::new(),
            evidence: String::new(),
            correction: correction.map(str::to_string),
        }
    }

    #[test]
    fn refine_removes_constraint_and_rekeys_trace() {
        let (spec, _, index) = fixture();
        let mut warnings = Vec::new();
        // Remove Reserved == 0 (index 1); RouterId != 0 shifts from c2 to c1.
        let (new_spec, new_index, audit) =
            refine_format(&extraction_diag(1, Some("remove")), &spec, &index, &mut warnings).unwrap();
        let st = new_spec.get_struct("RouterIdTLV").unwrap();
        assert_eq!(st.constraints().count(), 2);
        assert_eq!(audit.action, "removed");
        assert_eq!(audit.before, "Reserved == 0");
        assert_eq!(new_index.get(&PropertyId::constraint("RouterIdTLV", 1)), Some("4.4.7"));
        assert!(new_index.get(&PropertyId::constraint("RouterIdTLV", 2)).is_none());
        assert!(warnings.is_empty());
    }

    #[test]
    fn refine_replaces_constraint_preserving_trace() {
        let (spec, _, index) = fixture();
        let mut warnings = Vec::new();
        let (new_spec, new_index, audit) =
            refine_format(&extraction_diag(0, Some("Length >= 12;")), &spec, &index, &mut warnings)
                .unwrap();
        let st = new_spec.get_struct("RouterIdTLV").unwrap();
        let (_, c) = st.constraints().next().unwrap();
        assert_eq!(print_constraint(c), "Length - 12 >= 0");
        assert_eq!(audit.action, "replaced");
        assert_eq!(new_index.get(&PropertyId::constraint("RouterIdTLV", 0)), Some("4.4.7"));
        assert!(warnings.is_empty());
    }

    #[test]
    fn bad_correction_falls_back_to_removal_with_warning() {
        let (spec, _, index) = fixture();
        let mut warnings = Vec::new();
        let (new_spec, _, audit) =
            refine_format(&extraction_diag(0, Some("Length >>> nonsense")), &spec, &index, &mut warnings)
                .unwrap();
        assert_eq!(audit.action, "removed");
        assert_eq!(new_spec.get_struct("RouterIdTLV").unwrap().constraints().count(), 2);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn report_suppressed_when_poc_does_not_reproduce() {
        use std::os::unix::fs::PermissionsExt;
        let (_, tree, _) = fixture();
        let dir = tempfile::tempdir().unwrap();
        // Rejects everything: an accepts-invalid inconsistency cannot reproduce.
        let sh = dir.path().join("no.sh");
        std::fs::write(&sh, "#!/bin/sh\ncat > /dev/null; exit 1\n").unwrap();
        std::fs::set_permissions(&sh, std::fs::Permissions::from_mode(0o755)).unwrap();
        let target = ParserTarget {
            command: sh,
            args: vec![],
            input_mode: crate::harness::InputMode::StdinBytes,
            success: crate::harness::SuccessConvention::ExitCode,
            timeout_ms: 5_000,
        };
        let case = TestCase {
            name: "p0000__neg__x".to_string(),
            path_id: "p0000".to_string(),
            kind: CaseKind::FieldNegative,
            expectation: Expectation::Fail,
            property: None,
            detail: "d".to_string(),
            bytes: vec![1, 2, 3],
        };
        let inc = inconsistency(None, Direction::ParserAcceptsInvalid);
        let diag = Diagnosis {
            case: inc.case.clone(),
            property: None,
            section_id: None,
            classification: Classification::ImplementationError,
            rationale: String::new(),
            evidence: String::new(),
            correction: None,
        };
        let mut warnings = Vec::new();
        let report = emit_report(&inc, &diag, &case, &target, &tree, "babel", &mut warnings).unwrap();
        assert!(report.is_none());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("suppressed"));
    }

    #[test]
    fn report_renders_with_hex_poc_and_excerpt() {
        use std::os::unix::fs::PermissionsExt;
        let (_, tree, _) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let sh = dir.path().join("yes.sh");
        std::fs::write(&sh, "#!/bin/sh\ncat > /dev/null; exit 0\n").unwrap();
        std::fs::set_permissions(&sh, std::fs::Permissions::from_mode(0o755)).unwrap();
        let target = ParserTarget {
            command: sh,
            args: vec![],
            input_mode: crate::harness::InputMode::StdinBytes,
            success: crate::harness::SuccessConvention::ExitCode,
            timeout_ms: 5_000,
        };
        let case = TestCase {
            name: "p0000__neg__x".to_string(),
            path_id: "p0000".to_string(),
            kind: CaseKind::FieldNegative,
            expectation: Expectation::Fail,
            property: Some(PropertyId::constraint("RouterIdTLV", 2)),
            detail: "negated `RouterId != 0`".to_string(),
            bytes: vec![6, 10, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        };
        let inc = inconsistency(case.property.clone(), Direction::ParserAcceptsInvalid);
        let diag = Diagnosis {
            case: inc.case.clone(),
            property: case.property.clone(),
            section_id: Some("4.4.7".to_string()),
            classification: Classification::ImplementationError,
            rationale: String::new(),
            evidence: String::new(),
            correction: None,
        };
        let mut warnings = Vec::new();
        let report = emit_report(&inc, &diag, &case, &target, &tree, "babel", &mut warnings)
            .unwrap()
            .unwrap();
        assert_eq!(report.poc_hex, "060a00000000000000000000");
        assert_eq!(report.section_id.as_deref(), Some("4.4.7"));
        assert!(report.excerpt.contains("all zeroes"));
        let md = report_markdown(&report);
        assert!(md.contains("060a00000000000000000000"));
        assert!(md.contains("Section 4.4.7"));
        write_report(&dir.path().join("reports"), &report, &case.bytes).unwrap();
        assert!(dir.path().join("reports/p0000__neg__x.md").exists());
        assert_eq!(
            std::fs::read(dir.path().join("reports/p0000__neg__x.bin")).unwrap(),
            case.bytes
        );
    }
}
