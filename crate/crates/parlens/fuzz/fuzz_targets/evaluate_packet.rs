#![no_main]
use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

use parlens::dsl::FormatSpec;

static SPEC: OnceLock<FormatSpec> = OnceLock::new();

// Untrusted packet bytes against the embedded TLV format: decoding is
// total and must never panic, whatever the input.
fuzz_target!(|data: &[u8]| {
    let spec = SPEC.get_or_init(|| {
        parlens::dsl::parse_format(include_str!("../../assets/babel_mini.pform"))
            .expect("embedded format is valid")
            .spec
    });
    let _ = parlens::dsl::evaluate_packet(spec, data);
});
