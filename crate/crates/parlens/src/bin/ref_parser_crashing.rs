//! Reference parser that decodes the embedded Babel-mini format correctly
//! but aborts when a packet carries trailing bytes, modelling an
//! out-of-bounds crash in length handling. Packet bytes on stdin; exit 0
//! accepted, 1 rejected, SIGABRT on trailing bytes.

use std::io::Read;

use parlens::dsl::{evaluate_packet, parse_format, EvalResult, StructuralKind, Violation};

const FORMAT: &str = include_str!("../../assets/babel_mini.pform");

fn main() {
    let spec = parse_format(FORMAT).expect("embedded format is valid").spec;
    let mut bytes = Vec::new();
    std::io::stdin().read_to_end(&mut bytes).expect("read stdin");
    match evaluate_packet(&spec, &bytes) {
        EvalResult::Pass => std::process::exit(0),
        EvalResult::Fail(Violation::Structural { kind: StructuralKind::TrailingBytes, .. }) => {
            std::process::abort();
        }
        EvalResult::Fail(_) => std::process::exit(1),
    }
}
