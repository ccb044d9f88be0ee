#![no_main]
use libfuzzer_sys::fuzz_target;

// Untrusted fixture/corpus JSON lines: deserialization must never panic.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for line in text.lines() {
        let _ = serde_json::from_str::<parlens::gateway::Exchange>(line);
        let _ = serde_json::from_str::<parlens::testgen::Manifest>(line);
        let _ = serde_json::from_str::<parlens::harness::RunRecord>(line);
        let _ = serde_json::from_str::<parlens::triage::Diagnosis>(line);
    }
});
