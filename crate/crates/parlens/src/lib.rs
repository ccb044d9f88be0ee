//! parlens validates binary network-protocol parsers against packet formats
//! derived from RFC documents.
//!
//! The pipeline has three phases:
//!
//! 1. **Extraction** ([`doctree`], [`gateway`]): an RFC text is split into a
//!    section tree (DocTree), a format fragment is extracted per section with
//!    an LLM, and the fragments are merged bottom-up into one format written
//!    in the packet-format DSL ([`dsl`]). Every struct and constraint in the
//!    merged format stays traceable to the section that contributed it.
//! 2. **Test generation** ([`graph`], [`testgen`]): the format is compiled to
//!    a format graph whose complete paths enumerate the valid packet layouts.
//!    Each path becomes a constraint formula; solving it yields one positive
//!    packet, and property-level mutations (negating a single field constraint,
//!    or breaking the packet structure) yield negative packets.
//! 3. **Validation** ([`harness`], [`triage`]): target parser executables run
//!    on the corpus, verdict mismatches become inconsistencies, and each
//!    inconsistency is diagnosed against the backtraced RFC section as either
//!    an implementation bug (reported with a PoC) or a format-extraction error
//!    (repaired by refining the format).
//!
//! All LLM traffic goes through [`gateway`], which supports live, record, and
//! deterministic replay modes; the test suite runs entirely from recorded
//! fixtures.

pub mod config;
pub mod doctree;
pub mod dsl;
pub mod gateway;
pub mod graph;
pub mod harness;
pub mod pipeline;
pub mod testgen;
pub mod triage;
