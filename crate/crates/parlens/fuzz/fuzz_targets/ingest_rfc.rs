#![no_main]
use libfuzzer_sys::fuzz_target;

// Untrusted RFC text: ingestion and tree building must never panic.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = parlens::doctree::ingest_rfc(text) {
        let _ = parlens::doctree::build_initial_tree(&doc.toc, &doc.sections);
    }
});
