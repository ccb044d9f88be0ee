//! Reference parser that decodes the embedded Babel-mini format but skips
//! the value checks on selected fields (default: RouterId), so it accepts
//! packets the format rejects. Usage: `ref-parser-buggy [--skip <Field>]...`
//! with packet bytes on stdin; exit 0 accepted, 1 rejected.

use std::io::Read;

use parlens::dsl::{evaluate_packet, parse_format, Item};

const FORMAT: &str = include_str!("../../assets/babel_mini.pform");

fn main() {
    let mut skipped: Vec<String> = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--skip" => skipped.push(args.next().expect("--skip needs a field name")),
            other => {
                eprintln!("unknown argument `{other}`");
                std::process::exit(64);
            }
        }
    }
    if skipped.is_empty() {
        skipped.push("RouterId".to_string());
    }

    let mut spec = parse_format(FORMAT).expect("embedded format is valid").spec;
    for st in &mut spec.structs {
        st.items.retain(|item| match item {
            Item::Constraint(c) => {
                !c.referenced_fields().iter().any(|f| skipped.iter().any(|s| s == f))
            }
            Item::Field(_) => true,
        });
    }

    let mut bytes = Vec::new();
    std::io::stdin().read_to_end(&mut bytes).expect("read stdin");
    std::process::exit(if evaluate_packet(&spec, &bytes).is_pass() { 0 } else { 1 });
}
