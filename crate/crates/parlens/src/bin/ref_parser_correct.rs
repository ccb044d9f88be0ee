//! Reference parser that accepts exactly the packets valid under the
//! embedded Babel-mini format. Reads packet bytes from stdin; exit 0 means
//! accepted, exit 1 rejected.

use std::io::Read;

use parlens::dsl::{evaluate_packet, parse_format};

const FORMAT: &str = include_str!("../../assets/babel_mini.pform");

fn main() {
    let spec = parse_format(FORMAT).expect("embedded format is valid").spec;
    let mut bytes = Vec::new();
    std::io::stdin().read_to_end(&mut bytes).expect("read stdin");
    std::process::exit(if evaluate_packet(&spec, &bytes).is_pass() { 0 } else { 1 });
}
