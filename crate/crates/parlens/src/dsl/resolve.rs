use super::ast::*;
use super::Diagnostic;
use std::collections::{BTreeSet, HashMap, HashSet};

/// Static checks on a parsed spec. Returns all diagnostics; the spec is
/// well-formed iff none is an error.
pub fn resolve(spec: &FormatSpec) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut names = HashSet::new();
    for st in &spec.structs {
        if !names.insert(st.name.as_str()) {
            diags.push(Diagnostic::error(format!("duplicate struct `{}`", st.name), st.span));
        }
    }
    if spec.get_struct(&spec.entry).is_none() {
        let span = spec.structs.first().map(|s| s.span).unwrap_or_default();
        diags.push(Diagnostic::error(format!("entry struct `{}` is not defined", spec.entry), span));
    }

    for st in &spec.structs {
        check_struct_body(spec, st, &mut diags);
        check_alignment(spec, st, &mut diags);
    }

    if has_cycle(spec, &mut diags) || diags.iter().any(|d| d.is_error()) {
        return diags;
    }

    check_reachability(spec, &mut diags);
    check_case_controls(spec, &mut diags);
    diags
}

fn check_struct_body(spec: &FormatSpec, st: &StructDef, diags: &mut Vec<Diagnostic>) {
    let mut declared: HashMap<&str, Option<PrimKind>> = HashMap::new();
    for item in &st.items {
        match item {
            Item::Field(f) => {
                check_type(spec, st, &f.ty, f.span, &declared, diags);
                if declared.insert(&f.name, prim_kind(&f.ty)).is_some() {
                    diags.push(Diagnostic::error(
                        format!("duplicate field `{}` in struct `{}`", f.name, st.name),
                        f.span,
                    ));
                }
            }
            Item::Constraint(c) => {
                let refs = c.referenced_fields();
                if refs.is_empty() {
                    diags.push(Diagnostic::error(
                        "constraint must reference at least one field",
                        c.span,
                    ));
                }
                for name in refs {
                    check_ident(st, name, &declared, c.span, diags);
                }
            }
        }
    }
}

fn check_ident(
    st: &StructDef,
    name: &str,
    declared: &HashMap<&str, Option<PrimKind>>,
    span: Span,
    diags: &mut Vec<Diagnostic>,
) {
    match declared.get(name) {
        None => diags.push(Diagnostic::error(
            format!("unresolved identifier `{name}` in struct `{}` (fields must be declared before use)", st.name),
            span,
        )),
        Some(None) => diags.push(Diagnostic::error(
            format!("identifier `{name}` in struct `{}` is not a primitive field", st.name),
            span,
        )),
        Some(Some(_)) => {}
    }
}

fn prim_kind(ty: &TypeExpr) -> Option<PrimKind> {
    match ty {
        TypeExpr::Primitive(k) => Some(*k),
        _ => None,
    }
}

fn check_type(
    spec: &FormatSpec,
    st: &StructDef,
    ty: &TypeExpr,
    span: Span,
    declared: &HashMap<&str, Option<PrimKind>>,
    diags: &mut Vec<Diagnostic>,
) {
    match ty {
        TypeExpr::Primitive(_) => {}
        TypeExpr::StructRef(name) => {
            if spec.get_struct(name).is_none() {
                diags.push(Diagnostic::error(format!("unknown type name `{name}`"), span));
            }
        }
        TypeExpr::Array { elem, length, .. } => {
            if matches!(**elem, TypeExpr::Primitive(PrimKind::Bit(_))) {
                diags.push(Diagnostic::error("arrays of BIT fields are not supported", span));
            }
            if let LengthSpec::Expr(e) = length {
                let mut refs = Vec::new();
                e.collect_idents(&mut refs);
                for name in refs {
                    check_ident(st, name, declared, span, diags);
                }
            }
            check_type(spec, st, elem, span, declared, diags);
        }
        TypeExpr::Case { arms, default, .. } => {
            // The control identifier is checked against instantiation scopes
            // in check_case_controls.
            let mut seen = BTreeSet::new();
            for arm in arms {
                if !seen.insert(arm.value) {
                    diags.push(Diagnostic::error(
                        format!("duplicate case arm constant {}", arm.value),
                        arm.span,
                    ));
                }
                check_type(spec, st, &arm.ty, arm.span, declared, diags);
            }
            if let Some(d) = default {
                check_type(spec, st, d, span, declared, diags);
            }
        }
    }
}

/// BIT fields pack contiguously; every non-BIT item must start byte-aligned
/// and every struct layout must total a whole number of bytes.
fn check_alignment(spec: &FormatSpec, st: &StructDef, diags: &mut Vec<Diagnostic>) {
    let mut bit_offset: u32 = 0;
    for item in &st.items {
        let f = match item {
            Item::Field(f) => f,
            Item::Constraint(_) => continue,
        };
        match &f.ty {
            TypeExpr::Primitive(PrimKind::Bit(n)) => bit_offset = (bit_offset + *n as u32) % 8,
            ty => {
                if bit_offset != 0 {
                    diags.push(Diagnostic::error(
                        format!(
                            "misaligned BIT packing: field `{}` starts {bit_offset} bits past a byte boundary",
                            f.name
                        ),
                        f.span,
                    ));
                    bit_offset = 0;
                }
                if !byte_aligned_type(spec, ty) {
                    diags.push(Diagnostic::error(
                        format!("misaligned BIT packing: type of field `{}` is not a whole number of bytes", f.name),
                        f.span,
                    ));
                }
            }
        }
    }
    if bit_offset != 0 {
        diags.push(Diagnostic::error(
            format!(
                "misaligned BIT packing: struct `{}` totals {bit_offset} bits past a byte boundary",
                st.name
            ),
            st.span,
        ));
    }
}

fn byte_aligned_type(spec: &FormatSpec, ty: &TypeExpr) -> bool {
    match ty {
        TypeExpr::Primitive(PrimKind::Bit(n)) => n % 8 == 0,
        TypeExpr::Primitive(_) => true,
        // Structs are checked on their own; assume aligned here to avoid
        // duplicate reports.
        TypeExpr::StructRef(_) => true,
        TypeExpr::Array { elem, unit, .. } => {
            matches!(TypeExpr::effective_unit(elem, *unit), ArrayUnit::Bytes)
                || byte_aligned_type(spec, elem)
        }
        TypeExpr::Case { arms, default, .. } => {
            arms.iter().all(|a| byte_aligned_type(spec, &a.ty))
                && default.as_deref().map_or(true, |d| byte_aligned_type(spec, d))
        }
    }
}

fn collect_refs<'a>(ty: &'a TypeExpr, out: &mut Vec<&'a str>) {
    match ty {
        TypeExpr::Primitive(_) => {}
        TypeExpr::StructRef(name) => out.push(name),
        TypeExpr::Array { elem, .. } => collect_refs(elem, out),
        TypeExpr::Case { arms, default, .. } => {
            for arm in arms {
                collect_refs(&arm.ty, out);
            }
            if let Some(d) = default {
                collect_refs(d, out);
            }
        }
    }
}

fn struct_refs<'a>(st: &'a StructDef) -> Vec<&'a str> {
    let mut out = Vec::new();
    for f in st.fields() {
        collect_refs(&f.ty, &mut out);
    }
    out
}

fn has_cycle(spec: &FormatSpec, diags: &mut Vec<Diagnostic>) -> bool {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    fn dfs(spec: &FormatSpec, name: &str, marks: &mut HashMap<String, Mark>) -> bool {
        match marks.get(name).copied().unwrap_or(Mark::White) {
            Mark::Grey => return true,
            Mark::Black => return false,
            Mark::White => {}
        }
        marks.insert(name.to_string(), Mark::Grey);
        if let Some(st) = spec.get_struct(name) {
            for r in struct_refs(st) {
                if dfs(spec, r, marks) {
                    return true;
                }
            }
        }
        marks.insert(name.to_string(), Mark::Black);
        false
    }

    let mut marks = HashMap::new();
    for st in &spec.structs {
        if dfs(spec, &st.name, &mut marks) {
            diags.push(Diagnostic::error(
                format!("cyclic struct reference involving `{}`", st.name),
                st.span,
            ));
            return true;
        }
    }
    false
}

fn check_reachability(spec: &FormatSpec, diags: &mut Vec<Diagnostic>) {
    let mut reach = HashSet::new();
    let mut stack = vec![spec.entry.as_str()];
    while let Some(name) = stack.pop() {
        if !reach.insert(name) {
            continue;
        }
        if let Some(st) = spec.get_struct(name) {
            stack.extend(struct_refs(st));
        }
    }
    for st in &spec.structs {
        if !reach.contains(st.name.as_str()) {
            diags.push(Diagnostic::warning(
                format!("struct `{}` is not reachable from the entry struct", st.name),
                st.span,
            ));
        }
    }
}

/// Case controls may name an earlier field of the same struct or of an
/// enclosing struct at the instantiation site. Walks every reachable
/// instantiation context from the entry struct.
fn check_case_controls(spec: &FormatSpec, diags: &mut Vec<Diagnostic>) {
    let mut reported = HashSet::new();
    let entry = match spec.get_struct(&spec.entry) {
        Some(e) => e,
        None => return,
    };
    visit_struct(spec, entry, &[], diags, &mut reported);

    // Unreachable structs are still checked in isolation so fragments get
    // feedback before they are merged under a parent.
    let mut reach = HashSet::new();
    let mut stack = vec![spec.entry.as_str()];
    while let Some(name) = stack.pop() {
        if reach.insert(name) {
            if let Some(st) = spec.get_struct(name) {
                stack.extend(struct_refs(st));
            }
        }
    }
    for st in &spec.structs {
        if !reach.contains(st.name.as_str()) {
            visit_struct(spec, st, &[], diags, &mut reported);
        }
    }
}

fn visit_struct(
    spec: &FormatSpec,
    st: &StructDef,
    ancestors: &[HashMap<String, PrimKind>],
    diags: &mut Vec<Diagnostic>,
    reported: &mut HashSet<String>,
) {
    let mut visible: HashMap<String, PrimKind> = HashMap::new();
    for item in &st.items {
        let f = match item {
            Item::Field(f) => f,
            Item::Constraint(_) => continue,
        };
        visit_type(spec, st, &f.ty, f.span, &visible, ancestors, diags, reported);
        if let Some(k) = prim_kind(&f.ty) {
            visible.insert(f.name.clone(), k);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn visit_type(
    spec: &FormatSpec,
    st: &StructDef,
    ty: &TypeExpr,
    span: Span,
    visible: &HashMap<String, PrimKind>,
    ancestors: &[HashMap<String, PrimKind>],
    diags: &mut Vec<Diagnostic>,
    reported: &mut HashSet<String>,
) {
    match ty {
        TypeExpr::Primitive(_) => {}
        TypeExpr::StructRef(name) => {
            if let Some(inner) = spec.get_struct(name) {
                let mut scopes = ancestors.to_vec();
                scopes.push(visible.clone());
                visit_struct(spec, inner, &scopes, diags, reported);
            }
        }
        TypeExpr::Array { elem, .. } => {
            visit_type(spec, st, elem, span, visible, ancestors, diags, reported)
        }
        TypeExpr::Case { control, arms, default } => {
            let kind = visible
                .get(control)
                .or_else(|| ancestors.iter().rev().find_map(|s| s.get(control)));
            match kind {
                None => {
                    let key = format!("{}::{}", st.name, control);
                    if reported.insert(key) {
                        diags.push(Diagnostic::error(
                            format!(
                                "case control `{control}` in struct `{}` does not resolve to an earlier field here or in an enclosing struct",
                                st.name
                            ),
                            span,
                        ));
                    }
                }
                Some(k) => {
                    for arm in arms {
                        if arm.value > k.max_value() {
                            let key = format!("{}::{}::{}", st.name, control, arm.value);
                            if reported.insert(key) {
                                diags.push(Diagnostic::warning(
                                    format!(
                                        "case arm {} exceeds the range of control field `{control}` and is unreachable",
                                        arm.value
                                    ),
                                    arm.span,
                                ));
                            }
                        }
                    }
                }
            }
            for arm in arms {
                visit_type(spec, st, &arm.ty, arm.span, visible, ancestors, diags, reported);
            }
            if let Some(d) = default {
                visit_type(spec, st, d, span, visible, ancestors, diags, reported);
            }
        }
    }
}
