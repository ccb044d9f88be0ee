#![no_main]
use libfuzzer_sys::fuzz_target;

// Untrusted format text: the parser must never panic, and anything it
// accepts must print canonically and reparse to the same canonical text.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = parlens::dsl::parse_format(text) {
        let printed = parlens::dsl::print_format(&parsed.spec);
        let reparsed = parlens::dsl::parse_format(&printed)
            .expect("canonical output must reparse")
            .spec;
        assert_eq!(printed, parlens::dsl::print_format(&reparsed));
    }
});
