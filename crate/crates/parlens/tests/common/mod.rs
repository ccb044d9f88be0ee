//! Shared helpers for the integration tests: the Babel-mini fixture bundle,
//! seeded random format generators, and a brute-force accept-set oracle.
// Each integration-test binary compiles this module separately and uses a
// different subset of the helpers.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::Rng;

use parlens::config::PipelineConfig;
use parlens::dsl::{parse_format, FormatSpec};
use parlens::gateway::Gateway;
use parlens::graph::{build_graph, enumerate_paths, path_to_formula, EnumerateOptions, GraphPath};
use parlens::harness::{InputMode, ParserTarget, SuccessConvention};
use parlens::testgen::{serialize_packet, Assignment};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/babel_mini")
}

/// Loads the fixture config with the output directory redirected to `out`
/// and no parser target.
pub fn fixture_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixture_dir().join("config.toml")).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg.target = None;
    cfg
}

/// A stdin-bytes exit-code target for one of the reference parser binaries.
pub fn target(bin: &str, args: &[&str]) -> ParserTarget {
    ParserTarget {
        command: PathBuf::from(bin),
        args: args.iter().map(|s| s.to_string()).collect(),
        input_mode: InputMode::StdinBytes,
        success: SuccessConvention::ExitCode,
        timeout_ms: 5_000,
    }
}

pub fn replay_gateway() -> Gateway {
    Gateway::replay(&fixture_dir().join("fixtures.jsonl")).unwrap()
}

// ---------------------------------------------------------------------------
// Random format generation
// ---------------------------------------------------------------------------

/// One byte's worth of primitive fields (so packets stay byte-aligned).
fn byte_group(rng: &mut impl Rng, names: &mut u32, out: &mut Vec<(String, u32)>) -> String {
    let split: &[u32] = match rng.gen_range(0..5) {
        0 => &[8],
        1 => &[4, 4],
        2 => &[3, 5],
        3 => &[1, 7],
        _ => &[2, 6],
    };
    let mut text = String::new();
    for &w in split {
        let name = format!("F{}", *names);
        *names += 1;
        if w == 8 {
            text.push_str(&format!("    UINT8 {name};\n"));
        } else {
            text.push_str(&format!("    BIT({w}) {name};\n"));
        }
        out.push((name, w));
    }
    text
}

fn random_constraint(rng: &mut impl Rng, field: &str, width: u32) -> String {
    let max = (1u64 << width) - 1;
    // Occasionally pick an out-of-range constant so some paths are unsat.
    let k = if rng.gen_bool(0.1) { max + rng.gen_range(1..=3) } else { rng.gen_range(0..=max) };
    let op = ["==", "!=", "<=", ">=", "<", ">"][rng.gen_range(0..6)];
    format!("    {field} {op} {k};\n")
}

/// A small spec amenable to exhaustive byte enumeration: at most 3 choice
/// points (switch arms) and at most 16 bits on any packet layout.
pub fn random_small_spec(rng: &mut impl Rng) -> String {
    let mut names = 0u32;
    if rng.gen_bool(0.5) {
        // Plain struct of 1-2 bytes.
        let bytes = rng.gen_range(1..=2);
        let mut fields = Vec::new();
        let mut body = String::new();
        for _ in 0..bytes {
            body.push_str(&byte_group(rng, &mut names, &mut fields));
        }
        for (name, width) in &fields {
            if rng.gen_bool(0.5) {
                body.push_str(&random_constraint(rng, name, *width));
            }
        }
        format!("struct Root {{\n{body}}}\n")
    } else {
        // Tag byte selecting among 2-3 one-byte arm structs.
        let arms = rng.gen_range(2..=3);
        let mut tags = BTreeSet::new();
        while tags.len() < arms {
            tags.insert(rng.gen_range(0u64..=255));
        }
        let tags: Vec<u64> = tags.into_iter().collect();
        let with_default = rng.gen_bool(0.3);
        let mut cases = String::new();
        let mut structs = String::new();
        for (i, tag) in tags.iter().enumerate() {
            let sname = format!("Arm{i}");
            if with_default && i == tags.len() - 1 {
                cases.push_str(&format!("        default: {sname};\n"));
            } else {
                cases.push_str(&format!("        case {tag}: {sname};\n"));
            }
            let mut fields = Vec::new();
            let mut body = String::new();
            if rng.gen_bool(0.8) {
                body.push_str(&byte_group(rng, &mut names, &mut fields));
                for (name, width) in &fields {
                    if rng.gen_bool(0.5) {
                        body.push_str(&random_constraint(rng, name, *width));
                    }
                }
            }
            structs.push_str(&format!("struct {sname} {{\n{body}}}\n\n"));
        }
        format!(
            "struct Root {{\n    UINT8 Tag;\n    switch (Tag) {{\n{cases}    }} Body;\n}}\n\n{structs}"
        )
    }
}

/// A richer spec for round-trip testing: multiple structs, fixed and
/// variable-length arrays, nested switches. Not intended for brute force.
pub fn random_rich_spec(rng: &mut impl Rng) -> String {
    let mut names = 0u32;
    let mut out = String::new();
    let mut fields = Vec::new();
    let mut body = String::new();
    for _ in 0..rng.gen_range(1..=3) {
        body.push_str(&byte_group(rng, &mut names, &mut fields));
    }
    match rng.gen_range(0..4) {
        0 => {
            body.push_str(&format!("    UINT8 Fixed[{}];\n", rng.gen_range(1..=4)));
        }
        1 => {
            body.push_str("    UINT8 Len;\n    UINT8 Data[Len elements];\n");
        }
        2 => {
            body.push_str("    UINT8 Len;\n    Elem Data[Len bytes];\n");
            out.push_str("struct Elem {\n    UINT8 Kind;\n    UINT8 Value;\n}\n\n");
        }
        _ => {
            body.push_str(
                "    UINT8 Kind;\n    switch (Kind) {\n        case 1: Elem;\n        default: Other;\n    } Inner;\n",
            );
            out.push_str("struct Elem {\n    UINT16 Wide;\n    Wide != 0;\n}\n\nstruct Other {\n}\n\n");
        }
    }
    for (name, width) in &fields {
        if rng.gen_bool(0.4) {
            body.push_str(&random_constraint(rng, name, *width));
        }
    }
    format!("{out}struct Root {{\n{body}}}\n")
}

// ---------------------------------------------------------------------------
// Accept-set oracles
// ---------------------------------------------------------------------------

/// Every packet (up to `max_len` bytes) the format accepts, by exhaustive
/// byte enumeration through the reference evaluator.
pub fn brute_force_accept_set(spec: &FormatSpec, max_len: usize) -> BTreeSet<Vec<u8>> {
    let mut set = BTreeSet::new();
    let mut stack: Vec<Vec<u8>> = vec![Vec::new()];
    while let Some(bytes) = stack.pop() {
        if parlens::dsl::evaluate_packet(spec, &bytes).is_pass() {
            set.insert(bytes.clone());
        }
        if bytes.len() < max_len {
            for b in 0..=255u8 {
                let mut next = bytes.clone();
                next.push(b);
                stack.push(next);
            }
        }
    }
    set
}

fn formula_solutions(path: &GraphPath, out: &mut BTreeSet<Vec<u8>>) {
    let formula = path_to_formula(path);
    let vars = formula.variables.clone();
    let mut asg: Assignment = Assignment::new();
    fn recurse(
        vars: &[(String, u32)],
        i: usize,
        asg: &mut Assignment,
        formula: &parlens::graph::PathFormula,
        path: &GraphPath,
        out: &mut BTreeSet<Vec<u8>>,
    ) {
        if i == vars.len() {
            let sat = formula.conjuncts.iter().all(|c| match &c.constraint {
                None => true, // domain conjunct; honored by the loop bounds
                Some(con) => con
                    .expr
                    .eval(&|name| asg.get(name).copied())
                    .map(|v| con.op.holds(v))
                    .unwrap_or(false),
            });
            if sat {
                out.insert(serialize_packet(path, asg));
            }
            return;
        }
        let (name, width) = &vars[i];
        for v in 0..=((1u64 << *width) - 1) {
            asg.insert(name.clone(), v);
            recurse(vars, i + 1, asg, formula, path, out);
        }
        asg.remove(name);
    }
    recurse(&vars, 0, &mut asg, &formula, path, out);
}

/// Every packet matching some path formula, by exhaustive assignment
/// enumeration and serialization. Only sound for small formats.
pub fn formula_accept_set(spec: &FormatSpec) -> BTreeSet<Vec<u8>> {
    let graph = build_graph(spec);
    let paths = enumerate_paths(spec, &graph, &EnumerateOptions::default()).unwrap();
    let mut out = BTreeSet::new();
    for path in &paths {
        formula_solutions(path, &mut out);
    }
    out
}

/// Longest packet layout of the spec, in bytes.
pub fn max_path_bytes(spec: &FormatSpec) -> usize {
    let graph = build_graph(spec);
    let paths = enumerate_paths(spec, &graph, &EnumerateOptions::default()).unwrap();
    paths
        .iter()
        .map(|p| {
            let bits: u64 = p.steps.iter().map(|s| s.kind.bit_width() as u64).sum();
            (bits as usize).div_ceil(8)
        })
        .max()
        .unwrap_or(0)
}

pub fn parse(src: &str) -> FormatSpec {
    parse_format(src).unwrap_or_else(|d| panic!("generated spec must parse: {d:?}\n{src}")).spec
}
