//! The packet-format DSL: concrete syntax, AST, resolver, printer, and the
//! reference packet evaluator.
//!
//! A format is a set of `struct` definitions, one of which is the entry
//! (packet root). Struct bodies interleave field declarations with bare
//! comparison statements acting as constraints on previously declared fields:
//!
//! ```text
//! struct RouterIdTLV {
//!     UINT8 Length;
//!     Length >= 10;
//!     UINT16 Reserved;
//!     Reserved == 0;
//!     UINT64 RouterId;
//!     RouterId != 0;
//!     RouterId != 0xFFFFFFFFFFFFFFFF;
//! }
//! ```
//!
//! Field types are `UINT8/16/32/64`, `BIT(n)` for sub-byte fields, arrays
//! (`UINT8 Data[4];`, `TLV Body[BodyLength bytes];`), case types
//! (`switch (Type) { case 0: Pad1; case 6: RouterIdTLV; } Payload;`), and
//! references to other structs. Multi-byte values are big-endian; `BIT`
//! fields pack MSB-first.

mod ast;
mod eval;
mod lexer;
mod parser;
mod printer;
mod resolve;

pub use ast::{
    ArithExpr, ArrayUnit, BinOp, CaseArm, CmpOp, Constraint, FieldDecl, FormatSpec, Item,
    LengthSpec, PrimKind, PropertyId, Span, StructDef, TypeExpr,
};
pub use eval::{evaluate_packet, EvalResult, StructuralKind, Violation};
pub use parser::parse_format;
pub use printer::{print_arith, print_constraint, print_format};

use serde::{Deserialize, Serialize};

/// Severity of a [`Diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A machine-readable syntax or resolution finding, suitable for feeding back
/// into an extraction retry prompt verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: u32,
    pub col: u32,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, span: Span) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into(), line: span.line, col: span.col }
    }

    pub fn warning(message: impl Into<String>, span: Span) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into(), line: span.line, col: span.col }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {}: {}", self.line, self.col, sev, self.message)
    }
}

/// Parses and resolves `text`, reporting whether it is a valid format.
///
/// `valid` is true iff [`parse_format`] succeeds with no error diagnostic;
/// warnings may be present either way.
pub fn check_syntax(text: &str) -> (bool, Vec<Diagnostic>) {
    match parse_format(text) {
        Ok(parsed) => (true, parsed.warnings),
        Err(diags) => (false, diags),
    }
}

/// Result of a successful [`parse_format`]: the spec plus any non-fatal
/// resolution warnings (unreachable structs, unreachable case arms).
#[derive(Debug, Clone)]
pub struct Parsed {
    pub spec: FormatSpec,
    pub warnings: Vec<Diagnostic>,
}
