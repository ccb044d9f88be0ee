//! Test-case generation: solves path formulas for positive packets, then
//! derives negative packets by negating one field-level property at a time
//! and by structural mutations (truncation, trailing bytes, array count
//! off-by-one).
//!
//! The built-in solver does interval branch-and-prune over the bounded
//! integer variables of a path formula, assigning variables in path order
//! and exploring low values first, so solutions are deterministic and
//! minimal. Formulas can also be exported as SMT-LIB2 for external solvers.

use crate::dsl::{
    evaluate_packet, print_constraint, ArithExpr, BinOp, CmpOp, Constraint, EvalResult, FormatSpec,
    PropertyId, Violation,
};
use crate::graph::{path_to_formula, Conjunct, EnumerateOptions, GraphPath, PathError, PathFormula};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Concrete values for every variable of a path, keyed by qualified name.
pub type Assignment = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Assignment),
    /// Proven infeasible: no packet exists on this path (distinct from
    /// running out of time).
    Unsat,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub timeout: Duration,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { timeout: Duration::from_secs(10) }
    }
}

/// Solves the conjunction of `formula`'s constraints plus `extra` (already
/// qualified) over the formula's variables.
pub fn solve(formula: &PathFormula, extra: &[Constraint], opts: &SolverOptions) -> SolveOutcome {
    let mut constraints: Vec<Constraint> = formula
        .conjuncts
        .iter()
        .filter_map(|c| c.constraint.clone())
        .collect();
    constraints.extend(extra.iter().cloned());
    solve_constraints(&formula.variables, &constraints, opts)
}

fn solve_constraints(
    vars: &[(String, u32)],
    constraints: &[Constraint],
    opts: &SolverOptions,
) -> SolveOutcome {
    // Constant constraints (e.g. a fixed length pinned to a mismatched
    // element count) can refute the path before any variable is assigned.
    let empty = Assignment::new();
    if vars.is_empty() {
        return if verify(constraints, &empty) { SolveOutcome::Sat(empty) } else { SolveOutcome::Unsat };
    }
    let deadline = Instant::now() + opts.timeout;
    let mut asg = Assignment::new();
    match search(vars, 0, &mut asg, constraints, deadline) {
        Err(TimedOut) => SolveOutcome::Timeout,
        Ok(true) => SolveOutcome::Sat(asg),
        Ok(false) => SolveOutcome::Unsat,
    }
}

struct TimedOut;

fn search(
    vars: &[(String, u32)],
    idx: usize,
    asg: &mut Assignment,
    constraints: &[Constraint],
    deadline: Instant,
) -> Result<bool, TimedOut> {
    if idx == vars.len() {
        return Ok(verify(constraints, asg));
    }
    let max = max_of_width(vars[idx].1);
    try_range(vars, idx, 0, max, asg, constraints, deadline)
}

fn max_of_width(w: u32) -> u64 {
    if w == 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

/// Explores `vars[idx] ∈ [lo, hi]`, splitting toward low values first.
#[allow(clippy::too_many_arguments)]
fn try_range(
    vars: &[(String, u32)],
    idx: usize,
    lo: u64,
    hi: u64,
    asg: &mut Assignment,
    constraints: &[Constraint],
    deadline: Instant,
) -> Result<bool, TimedOut> {
    if Instant::now() > deadline {
        return Err(TimedOut);
    }
    if !consistent(vars, idx, lo, hi, asg, constraints) {
        return Ok(false);
    }
    if lo == hi {
        asg.insert(vars[idx].0.clone(), lo);
        if search(vars, idx + 1, asg, constraints, deadline)? {
            return Ok(true);
        }
        asg.remove(&vars[idx].0);
        return Ok(false);
    }
    let mid = lo + (hi - lo) / 2;
    if try_range(vars, idx, lo, mid, asg, constraints, deadline)? {
        return Ok(true);
    }
    try_range(vars, idx, mid + 1, hi, asg, constraints, deadline)
}

fn verify(constraints: &[Constraint], asg: &Assignment) -> bool {
    constraints.iter().all(|c| {
        c.expr
            .eval(&|name| asg.get(name).copied())
            .map(|v| c.op.holds(v))
            .unwrap_or(false)
    })
}

// --- interval arithmetic (sound over-approximation for pruning) -----------

#[derive(Debug, Clone, Copy)]
struct Iv {
    lo: i128,
    hi: i128,
}

fn consistent(
    vars: &[(String, u32)],
    idx: usize,
    lo: u64,
    hi: u64,
    asg: &Assignment,
    constraints: &[Constraint],
) -> bool {
    let lookup = |name: &str| -> Option<Iv> {
        if let Some(&v) = asg.get(name) {
            return Some(Iv { lo: v as i128, hi: v as i128 });
        }
        if name == vars[idx].0 {
            return Some(Iv { lo: lo as i128, hi: hi as i128 });
        }
        vars.iter()
            .find(|(n, _)| n == name)
            .map(|(_, w)| Iv { lo: 0, hi: max_of_width(*w) as i128 })
    };
    constraints.iter().all(|c| match eval_iv(&c.expr, &lookup) {
        // Division by zero across the whole interval: definitely violated.
        None => false,
        Some(iv) => match c.op {
            CmpOp::Ge => iv.hi >= 0,
            CmpOp::Le => iv.lo <= 0,
            CmpOp::Gt => iv.hi > 0,
            CmpOp::Lt => iv.lo < 0,
            CmpOp::Eq => iv.lo <= 0 && iv.hi >= 0,
            CmpOp::Ne => !(iv.lo == 0 && iv.hi == 0),
        },
    })
}

fn eval_iv(expr: &ArithExpr, lookup: &impl Fn(&str) -> Option<Iv>) -> Option<Iv> {
    match expr {
        ArithExpr::Const(c) => Some(Iv { lo: *c as i128, hi: *c as i128 }),
        // Unresolvable names (should not happen post-resolve) stay unbounded.
        ArithExpr::Ident(name) => Some(lookup(name).unwrap_or(Iv { lo: i128::MIN / 4, hi: i128::MAX / 4 })),
        ArithExpr::Bin(l, op, r) => {
            let a = eval_iv(l, lookup)?;
            let b = eval_iv(r, lookup)?;
            Some(match op {
                BinOp::Add => Iv { lo: a.lo.saturating_add(b.lo), hi: a.hi.saturating_add(b.hi) },
                BinOp::Sub => Iv { lo: a.lo.saturating_sub(b.hi), hi: a.hi.saturating_sub(b.lo) },
                BinOp::Mul => {
                    let ps = [
                        a.lo.saturating_mul(b.lo),
                        a.lo.saturating_mul(b.hi),
                        a.hi.saturating_mul(b.lo),
                        a.hi.saturating_mul(b.hi),
                    ];
                    Iv { lo: *ps.iter().min().unwrap(), hi: *ps.iter().max().unwrap() }
                }
                BinOp::Div => {
                    if b.lo == 0 && b.hi == 0 {
                        return None;
                    }
                    if b.lo <= 0 && b.hi >= 0 {
                        // Divisor may be zero (making the constraint
                        // unsatisfied) or ±1; stay conservative.
                        let m = a.lo.abs().max(a.hi.abs());
                        Iv { lo: -m, hi: m }
                    } else {
                        let qs = [a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi];
                        // Widen by one to absorb truncation at the endpoints.
                        Iv {
                            lo: qs.iter().min().unwrap().saturating_sub(1),
                            hi: qs.iter().max().unwrap().saturating_add(1),
                        }
                    }
                }
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Packet serialization
// ---------------------------------------------------------------------------

/// Serializes an assignment along a path: each field value written in path
/// order, big-endian, BIT fields packed MSB-first.
pub fn serialize_packet(path: &GraphPath, asg: &Assignment) -> Vec<u8> {
    let mut bytes = Vec::new();
    let mut bit_pos = 0u64;
    for step in &path.steps {
        let width = step.kind.bit_width();
        let value = *asg.get(&step.var).expect("assignment covers every path variable");
        for i in (0..width).rev() {
            let bit = ((value >> i) & 1) as u8;
            if bit_pos % 8 == 0 {
                bytes.push(0);
            }
            let byte = bytes.last_mut().unwrap();
            *byte |= bit << (7 - (bit_pos % 8));
            bit_pos += 1;
        }
    }
    bytes
}

// ---------------------------------------------------------------------------
// Test cases
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Positive,
    FieldNegative,
    StructuralNegative,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestCase {
    /// Unique, filesystem-safe case name.
    pub name: String,
    pub path_id: String,
    pub kind: CaseKind,
    pub expectation: Expectation,
    /// The property negated by a field-level mutation; what a diagnosis
    /// traces back to the document.
    pub property: Option<PropertyId>,
    /// Human description of how the case was derived.
    pub detail: String,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Solves a path's formula and packages the minimal solution as a positive
/// case. The packet is re-checked against the evaluator before it is kept.
pub fn generate_positive(
    spec: &FormatSpec,
    path: &GraphPath,
    formula: &PathFormula,
    opts: &SolverOptions,
) -> Result<TestCase, GenSkip> {
    match solve(formula, &[], opts) {
        SolveOutcome::Sat(asg) => {
            let bytes = serialize_packet(path, &asg);
            match evaluate_packet(spec, &bytes) {
                EvalResult::Pass => Ok(TestCase {
                    name: format!("{}__pos", path.id),
                    path_id: path.id.clone(),
                    kind: CaseKind::Positive,
                    expectation: Expectation::Pass,
                    property: None,
                    detail: "minimal solution of the path formula".to_string(),
                    bytes,
                }),
                EvalResult::Fail(v) => Err(GenSkip::OracleRejected(v.to_string())),
            }
        }
        SolveOutcome::Unsat => Err(GenSkip::Unsat),
        SolveOutcome::Timeout => Err(GenSkip::Timeout),
    }
}

#[derive(Debug, Error)]
pub enum GenSkip {
    #[error("path formula is unsatisfiable")]
    Unsat,
    #[error("solver timed out")]
    Timeout,
    #[error("solver answer rejected by the evaluator: {0}")]
    OracleRejected(String),
}

/// Negates one field-level conjunct, pins every variable not referenced by
/// it to its value in `base`, and solves. Returns `None` when the negation
/// is infeasible (e.g. the only excluded value is outside the domain) or the
/// mutant does not fail on exactly the targeted property.
pub fn mutate_field_level(
    spec: &FormatSpec,
    path: &GraphPath,
    formula: &PathFormula,
    target: &Conjunct,
    base: &Assignment,
    opts: &SolverOptions,
) -> Option<TestCase> {
    let target_constraint = target.constraint.as_ref()?;
    let freed: HashSet<&str> = target_constraint.referenced_fields().into_iter().collect();
    let mut constraints: Vec<Constraint> = formula
        .conjuncts
        .iter()
        .filter(|c| c.id != target.id)
        .filter_map(|c| c.constraint.clone())
        .collect();
    constraints.push(target_constraint.negated());
    for (var, _) in &formula.variables {
        if !freed.contains(var.as_str()) {
            constraints.push(Constraint {
                expr: ArithExpr::Bin(
                    Box::new(ArithExpr::Ident(var.clone())),
                    BinOp::Sub,
                    Box::new(ArithExpr::Const(base[var])),
                ),
                op: CmpOp::Eq,
                span: Default::default(),
            });
        }
    }
    let asg = match solve_constraints(&formula.variables, &constraints, opts) {
        SolveOutcome::Sat(asg) => asg,
        SolveOutcome::Unsat | SolveOutcome::Timeout => return None,
    };
    let bytes = serialize_packet(path, &asg);
    let property = target.property.clone()?;
    // The mutant must be rejected, and rejected for the mutated property;
    // anything else (still passing, or tripping an unrelated check first)
    // would make the expected verdict ambiguous, so it is discarded.
    match evaluate_packet(spec, &bytes) {
        EvalResult::Fail(Violation::Constraint { property: p, .. }) if p == property => Some(TestCase {
            name: format!("{}__neg__{}", path.id, sanitize(&target.id)),
            path_id: path.id.clone(),
            kind: CaseKind::FieldNegative,
            expectation: Expectation::Fail,
            property: Some(property),
            detail: format!("negated `{}`", print_constraint(target_constraint)),
            bytes,
        }),
        _ => None,
    }
}

/// Structural mutations of a positive packet: truncation at byte-aligned
/// field boundaries, one appended trailing byte, and array element count
/// off-by-one without updating the length field. Mutants the evaluator
/// still accepts are discarded.
pub fn mutate_structural(spec: &FormatSpec, path: &GraphPath, positive: &TestCase) -> Vec<TestCase> {
    let mut out = Vec::new();
    let bytes = &positive.bytes;
    let mut keep = |name: String, detail: String, mutant: Vec<u8>| {
        if !evaluate_packet(spec, &mutant).is_pass() {
            out.push(TestCase {
                name,
                path_id: path.id.clone(),
                kind: CaseKind::StructuralNegative,
                expectation: Expectation::Fail,
                property: None,
                detail,
                bytes: mutant,
            });
        }
    };

    // Truncations after each byte-aligned field boundary.
    let mut bit_pos = 0u64;
    for (i, step) in path.steps.iter().enumerate() {
        bit_pos += step.kind.bit_width() as u64;
        let end = (bit_pos / 8) as usize;
        if bit_pos % 8 == 0 && end < bytes.len() {
            keep(
                format!("{}__neg__trunc{}", path.id, end),
                format!("truncated to {end} byte(s), after field `{}`", path.steps[i].var),
                bytes[..end].to_vec(),
            );
        }
    }

    // One trailing byte.
    if !bytes.is_empty() {
        let mut extended = bytes.clone();
        extended.push(0);
        keep(
            format!("{}__neg__trailing", path.id),
            "appended one trailing byte".to_string(),
            extended,
        );
    }

    // Array element count off-by-one, length field left as-is.
    for (array, count) in &path.array_counts {
        if *count == 0 {
            continue;
        }
        let last = *count - 1;
        if let Some((start, end)) = element_byte_range(path, array, last) {
            let mut removed = bytes.clone();
            removed.drain(start..end);
            keep(
                format!("{}__neg__arr_minus__{}", path.id, sanitize(array)),
                format!("removed element {last} of `{array}` without updating its length"),
                removed,
            );
            let mut duplicated = bytes.clone();
            let elem: Vec<u8> = bytes[start..end].to_vec();
            duplicated.splice(end..end, elem);
            keep(
                format!("{}__neg__arr_plus__{}", path.id, sanitize(array)),
                format!("duplicated element {last} of `{array}` without updating its length"),
                duplicated,
            );
        }
    }
    out
}

/// Byte span of element `index` of `array` inside the serialized packet.
fn element_byte_range(path: &GraphPath, array: &str, index: u64) -> Option<(usize, usize)> {
    let mut bit_pos = 0u64;
    let mut start = None;
    let mut end = None;
    for step in &path.steps {
        let width = step.kind.bit_width() as u64;
        let inside = step.array_path.iter().any(|(a, i)| a == array && *i == index);
        if inside {
            start.get_or_insert(bit_pos);
            end = Some(bit_pos + width);
        }
        bit_pos += width;
    }
    let (s, e) = (start?, end?);
    // Elements of variable arrays are byte-aligned by construction.
    if s % 8 == 0 && e % 8 == 0 {
        Some(((s / 8) as usize, (e / 8) as usize))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Suite generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct GenOptions {
    pub enumerate: EnumerateOptions,
    pub solver: SolverOptions,
}

#[derive(Debug, Default)]
pub struct Suite {
    pub cases: Vec<TestCase>,
    /// Paths or mutants skipped, with reasons; informational.
    pub notes: Vec<String>,
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error(transparent)]
    Paths(#[from] PathError),
}

/// Full generation pipeline for a spec: enumerate paths, solve each for a
/// positive case, then derive field-level and structural negatives.
pub fn generate_suite(spec: &FormatSpec, graph: &crate::graph::FormatGraph, opts: &GenOptions) -> Result<Suite, GenError> {
    let paths = crate::graph::enumerate_paths(spec, graph, &opts.enumerate)?;
    let mut suite = Suite::default();
    for path in &paths {
        let formula = path_to_formula(path);
        let positive = match generate_positive(spec, path, &formula, &opts.solver) {
            Ok(c) => c,
            Err(skip) => {
                suite.notes.push(format!("path {}: skipped ({skip})", path.id));
                continue;
            }
        };
        let base: Assignment = {
            // Rebuild the base assignment from the accepted packet bytes.
            let mut asg = Assignment::new();
            let mut bit_pos = 0u64;
            for step in &path.steps {
                let width = step.kind.bit_width();
                let mut v = 0u64;
                for _ in 0..width {
                    let byte = positive.bytes[(bit_pos / 8) as usize];
                    v = (v << 1) | ((byte >> (7 - (bit_pos % 8))) & 1) as u64;
                    bit_pos += 1;
                }
                asg.insert(step.var.clone(), v);
            }
            asg
        };
        suite.cases.push(positive.clone());
        for target in formula.field_level_targets() {
            match mutate_field_level(spec, path, &formula, target, &base, &opts.solver) {
                Some(case) => suite.cases.push(case),
                None => suite
                    .notes
                    .push(format!("path {}: negation of {} infeasible or ambiguous", path.id, target.id)),
            }
        }
        suite.cases.extend(mutate_structural(spec, path, &positive));
    }
    Ok(suite)
}

// ---------------------------------------------------------------------------
// Corpus persistence
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub cases: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub name: String,
    pub path_id: String,
    pub kind: CaseKind,
    pub expectation: Expectation,
    pub property: Option<PropertyId>,
    pub detail: String,
}

/// Writes one `.bin` per case plus `manifest.json` into `dir`.
pub fn write_corpus(dir: &Path, cases: &[TestCase]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = Manifest { cases: Vec::new() };
    for case in cases {
        let file = format!("{}.bin", case.name);
        std::fs::write(dir.join(&file), &case.bytes)?;
        manifest.cases.push(ManifestEntry {
            file,
            name: case.name.clone(),
            path_id: case.path_id.clone(),
            kind: case.kind,
            expectation: case.expectation,
            property: case.property.clone(),
            detail: case.detail.clone(),
        });
    }
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), json)
}

/// Loads a corpus written by [`write_corpus`].
pub fn read_corpus(dir: &Path) -> std::io::Result<Vec<TestCase>> {
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    manifest
        .cases
        .into_iter()
        .map(|e| {
            Ok(TestCase {
                bytes: std::fs::read(dir.join(&e.file))?,
                name: e.name,
                path_id: e.path_id,
                kind: e.kind,
                expectation: e.expectation,
                property: e.property,
                detail: e.detail,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// SMT-LIB2 export
// ---------------------------------------------------------------------------

/// Renders the formula as SMT-LIB2 over integers, for checking with an
/// external solver. `negate` optionally picks one conjunct id to negate.
pub fn formula_to_smt(formula: &PathFormula, negate: Option<&str>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "; path {}", formula.path_id);
    let _ = writeln!(out, "(set-logic QF_NIA)");
    let mut names = BTreeMap::new();
    for (i, (var, width)) in formula.variables.iter().enumerate() {
        let smt = format!("v{i}");
        let _ = writeln!(out, "(declare-const {smt} Int) ; {var}");
        let _ = writeln!(out, "(assert (and (>= {smt} 0) (<= {smt} {})))", max_of_width(*width));
        names.insert(var.clone(), smt);
    }
    for conj in &formula.conjuncts {
        let Some(c) = &conj.constraint else { continue };
        let negated;
        let c = if negate == Some(conj.id.as_str()) {
            negated = c.negated();
            &negated
        } else {
            c
        };
        let op = match c.op {
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Eq => "=",
            CmpOp::Ne => "distinct",
        };
        let _ = writeln!(out, "(assert ({op} {} 0)) ; {}", smt_expr(&c.expr, &names), conj.id);
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

fn smt_expr(expr: &ArithExpr, names: &BTreeMap<String, String>) -> String {
    match expr {
        ArithExpr::Const(c) => c.to_string(),
        ArithExpr::Ident(name) => names.get(name).cloned().unwrap_or_else(|| name.clone()),
        ArithExpr::Bin(l, op, r) => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "div",
            };
            format!("({sym} {} {})", smt_expr(l, names), smt_expr(r, names))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_format;
    use crate::graph::{build_graph, enumerate_paths, ConjunctOrigin};

    const BABEL: &str = "\
struct TLV {
    UINT8 Type;
    switch (Type) {
        case 0: Pad1;
        case 6: RouterIdTLV;
    } Payload;
}

struct Pad1 { }

struct RouterIdTLV {
    UINT8 Length;
    Length >= 10;
    UINT16 Reserved;
    Reserved == 0;
    UINT64 RouterId;
    RouterId != 0;
    RouterId != 0xFFFFFFFFFFFFFFFF;
}
";

    fn babel_router_path() -> (FormatSpec, GraphPath, PathFormula) {
        let spec = parse_format(BABEL).unwrap().spec;
        let graph = build_graph(&spec);
        let paths = enumerate_paths(&spec, &graph, &EnumerateOptions::default()).unwrap();
        let path = paths[1].clone();
        let formula = path_to_formula(&path);
        (spec, path, formula)
    }

    #[test]
    fn solver_finds_minimal_router_id_solution() {
        let (_, _, formula) = babel_router_path();
        match solve(&formula, &[], &SolverOptions::default()) {
            SolveOutcome::Sat(asg) => {
                assert_eq!(asg["Type"], 6);
                assert_eq!(asg["Payload.Length"], 10);
                assert_eq!(asg["Payload.Reserved"], 0);
                assert_eq!(asg["Payload.RouterId"], 1);
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn positive_packet_is_twelve_bytes_and_passes() {
        let (spec, path, formula) = babel_router_path();
        let case = generate_positive(&spec, &path, &formula, &SolverOptions::default()).unwrap();
        assert_eq!(case.bytes.len(), 12);
        assert_eq!(&case.bytes[..4], &[6, 10, 0, 0]);
        assert_eq!(case.bytes[11], 1);
        assert!(evaluate_packet(&spec, &case.bytes).is_pass());
    }

    #[test]
    fn domain_excludes_out_of_range_constants() {
        let spec = parse_format("struct S { UINT8 F; F > 300; }").unwrap().spec;
        let graph = build_graph(&spec);
        let paths = enumerate_paths(&spec, &graph, &EnumerateOptions::default()).unwrap();
        let formula = path_to_formula(&paths[0]);
        assert_eq!(solve(&formula, &[], &SolverOptions::default()), SolveOutcome::Unsat);
    }

    #[test]
    fn zero_timeout_reports_timeout() {
        let (_, _, formula) = babel_router_path();
        let opts = SolverOptions { timeout: Duration::ZERO };
        assert_eq!(solve(&formula, &[], &opts), SolveOutcome::Timeout);
    }

    #[test]
    fn field_negatives_pin_other_fields() {
        let (spec, path, formula) = babel_router_path();
        let positive = generate_positive(&spec, &path, &formula, &SolverOptions::default()).unwrap();
        let base: Assignment = [
            ("Type".to_string(), 6),
            ("Payload.Length".to_string(), 10),
            ("Payload.Reserved".to_string(), 0),
            ("Payload.RouterId".to_string(), 1),
        ]
        .into();
        let _ = positive;
        let targets: Vec<_> = formula.field_level_targets().cloned().collect();
        // Length >= 10 negated: Length drops below 10, everything else pinned.
        let length_neg = targets
            .iter()
            .find(|t| t.id.contains("RouterIdTLV.c0"))
            .unwrap();
        let case =
            mutate_field_level(&spec, &path, &formula, length_neg, &base, &SolverOptions::default())
                .unwrap();
        assert_eq!(case.bytes[1], 0); // minimal violating Length
        assert_eq!(case.bytes[0], 6); // Type pinned
        assert_eq!(case.bytes[11], 1); // RouterId pinned
        match evaluate_packet(&spec, &case.bytes) {
            EvalResult::Fail(Violation::Constraint { property, .. }) => {
                assert_eq!(property, PropertyId::constraint("RouterIdTLV", 0));
            }
            other => panic!("expected constraint violation, got {other:?}"),
        }
        // RouterId != 0 negated: RouterId becomes 0.
        let rid_neg = targets.iter().find(|t| t.id.contains("RouterIdTLV.c2")).unwrap();
        let case =
            mutate_field_level(&spec, &path, &formula, rid_neg, &base, &SolverOptions::default())
                .unwrap();
        assert_eq!(&case.bytes[4..], &[0u8; 8]);
    }

    #[test]
    fn structural_mutants_fail_the_oracle() {
        let (spec, path, formula) = babel_router_path();
        let positive = generate_positive(&spec, &path, &formula, &SolverOptions::default()).unwrap();
        let mutants = mutate_structural(&spec, &path, &positive);
        // Truncations after Type (1), Length (2), Reserved (4) + trailing.
        assert_eq!(mutants.len(), 4);
        for m in &mutants {
            assert!(!evaluate_packet(&spec, &m.bytes).is_pass(), "{} passed", m.name);
            assert_eq!(m.expectation, Expectation::Fail);
        }
    }

    #[test]
    fn array_count_off_by_one_mutants() {
        let src = "\
struct Packet { UINT8 N; UINT16 Body[N elements]; }
";
        let spec = parse_format(src).unwrap().spec;
        let graph = build_graph(&spec);
        let opts = GenOptions::default();
        let suite = generate_suite(&spec, &graph, &opts).unwrap();
        let plus: Vec<_> = suite.cases.iter().filter(|c| c.name.contains("arr_plus")).collect();
        let minus: Vec<_> = suite.cases.iter().filter(|c| c.name.contains("arr_minus")).collect();
        assert_eq!(plus.len(), 1, "one-element path gains a duplicate");
        assert_eq!(minus.len(), 1, "one-element path loses its element");
        for m in plus.iter().chain(&minus) {
            assert!(!evaluate_packet(&spec, &m.bytes).is_pass());
        }
    }

    #[test]
    fn suite_covers_positives_and_negatives_for_babel() {
        let spec = parse_format(BABEL).unwrap().spec;
        let graph = build_graph(&spec);
        let suite = generate_suite(&spec, &graph, &GenOptions::default()).unwrap();
        let positives = suite.cases.iter().filter(|c| c.kind == CaseKind::Positive).count();
        let field_negs = suite.cases.iter().filter(|c| c.kind == CaseKind::FieldNegative).count();
        assert_eq!(positives, 2);
        assert_eq!(field_negs, 4); // Length, Reserved, RouterId x2
        for c in &suite.cases {
            let pass = evaluate_packet(&spec, &c.bytes).is_pass();
            assert_eq!(pass, c.expectation == Expectation::Pass, "case {}", c.name);
        }
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let spec = parse_format(BABEL).unwrap().spec;
        let graph = build_graph(&spec);
        let suite = generate_suite(&spec, &graph, &GenOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &suite.cases).unwrap();
        let loaded = read_corpus(dir.path()).unwrap();
        assert_eq!(loaded.len(), suite.cases.len());
        for (a, b) in suite.cases.iter().zip(&loaded) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.bytes, b.bytes);
        }
    }

    #[test]
    fn smt_export_mentions_every_variable_and_negation() {
        let (_, _, formula) = babel_router_path();
        let target = formula
            .conjuncts
            .iter()
            .find(|c| c.origin == ConjunctOrigin::Node && c.id.contains("RouterIdTLV.c2"))
            .unwrap();
        let smt = formula_to_smt(&formula, Some(&target.id));
        assert!(smt.contains("(set-logic QF_NIA)"));
        assert_eq!(smt.matches("declare-const").count(), 4);
        // RouterId != 0 negated into equality.
        assert!(smt.contains("(assert (= v3 0))"), "smt was:\n{smt}");
        assert!(smt.contains("(check-sat)"));
    }

    #[test]
    fn bit_fields_serialize_msb_first() {
        let spec = parse_format("struct S { BIT(4) Hi; BIT(4) Lo; Hi == 15; Lo == 0; }").unwrap().spec;
        let graph = build_graph(&spec);
        let suite = generate_suite(&spec, &graph, &GenOptions::default()).unwrap();
        let pos = suite.cases.iter().find(|c| c.kind == CaseKind::Positive).unwrap();
        assert_eq!(pos.bytes, vec![0xF0]);
    }
}
