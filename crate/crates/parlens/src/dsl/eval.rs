//! Reference interpretation of a format: decides whether a byte sequence is a
//! valid packet, reporting the first violated property in decode order. This
//! is the in-repo oracle that generated test cases are checked against.

use super::ast::*;
use super::printer::print_constraint;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalResult {
    Pass,
    Fail(Violation),
}

impl EvalResult {
    pub fn is_pass(&self) -> bool {
        matches!(self, EvalResult::Pass)
    }
}

/// The first property a packet violates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// A field-level constraint failed.
    Constraint { property: PropertyId, rendered: String },
    /// The packet shape itself is invalid.
    Structural { kind: StructuralKind, detail: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Constraint { property, rendered } => {
                write!(f, "constraint {property} violated: {rendered}")
            }
            Violation::Structural { kind, detail } => write!(f, "structural ({kind:?}): {detail}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructuralKind {
    InsufficientBytes,
    TrailingBytes,
    UnmatchedCase,
    LengthMismatch,
    BadLength,
    ZeroSizeElement,
}

/// Returns `Pass` iff `bytes` decode completely under exactly one layout of
/// `spec`, every constraint and case match holds, and no bytes trail the
/// packet. Total: undecodable input is a structural failure, never an error.
pub fn evaluate_packet(spec: &FormatSpec, bytes: &[u8]) -> EvalResult {
    let mut reader = BitReader::new(bytes);
    let mut scopes = Vec::new();
    let entry = spec.entry_struct();
    if let Err(v) = decode_struct(spec, entry, &mut reader, &mut scopes) {
        return EvalResult::Fail(v);
    }
    if reader.pos_bits < (bytes.len() as u64) * 8 {
        return EvalResult::Fail(Violation::Structural {
            kind: StructuralKind::TrailingBytes,
            detail: format!(
                "{} trailing byte(s) after a complete packet",
                bytes.len() as u64 - reader.pos_bits / 8
            ),
        });
    }
    EvalResult::Pass
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos_bits: u64,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos_bits: 0 }
    }

    /// Reads `width` bits MSB-first, big-endian across bytes.
    fn read(&mut self, width: u32) -> Option<u64> {
        if self.pos_bits + width as u64 > (self.bytes.len() as u64) * 8 {
            return None;
        }
        let mut v: u64 = 0;
        for _ in 0..width {
            let byte = self.bytes[(self.pos_bits / 8) as usize];
            let bit = (byte >> (7 - (self.pos_bits % 8))) & 1;
            v = (v << 1) | bit as u64;
            self.pos_bits += 1;
        }
        Some(v)
    }
}

type Frame = HashMap<String, u64>;

fn decode_struct(
    spec: &FormatSpec,
    st: &StructDef,
    reader: &mut BitReader,
    scopes: &mut Vec<Frame>,
) -> Result<(), Violation> {
    scopes.push(Frame::new());
    let result = decode_struct_inner(spec, st, reader, scopes);
    scopes.pop();
    result
}

fn decode_struct_inner(
    spec: &FormatSpec,
    st: &StructDef,
    reader: &mut BitReader,
    scopes: &mut Vec<Frame>,
) -> Result<(), Violation> {
    let mut constraint_idx = 0usize;
    for item in &st.items {
        match item {
            Item::Field(f) => {
                if let TypeExpr::Primitive(k) = &f.ty {
                    let v = reader.read(k.bit_width()).ok_or_else(|| insufficient(&f.name))?;
                    scopes.last_mut().unwrap().insert(f.name.clone(), v);
                } else {
                    decode_type(spec, &f.ty, &f.name, reader, scopes)?;
                }
            }
            Item::Constraint(c) => {
                let idx = constraint_idx;
                constraint_idx += 1;
                let frame = scopes.last().unwrap();
                // Division by zero makes the constraint unsatisfied.
                let holds = c
                    .expr
                    .eval(&|name| frame.get(name).copied())
                    .map(|v| c.op.holds(v))
                    .unwrap_or(false);
                if !holds {
                    return Err(Violation::Constraint {
                        property: PropertyId::constraint(&st.name, idx),
                        rendered: print_constraint(c),
                    });
                }
            }
        }
    }
    Ok(())
}

fn decode_type(
    spec: &FormatSpec,
    ty: &TypeExpr,
    field_name: &str,
    reader: &mut BitReader,
    scopes: &mut Vec<Frame>,
) -> Result<(), Violation> {
    match ty {
        TypeExpr::Primitive(k) => {
            reader.read(k.bit_width()).ok_or_else(|| insufficient(field_name))?;
            Ok(())
        }
        TypeExpr::StructRef(name) => {
            let inner = spec.get_struct(name).expect("resolved spec");
            decode_struct(spec, inner, reader, scopes)
        }
        TypeExpr::Array { elem, length, unit } => {
            let n = match length {
                LengthSpec::Const(c) => *c as i128,
                LengthSpec::Expr(e) => {
                    let frame = scopes.last().unwrap();
                    e.eval(&|name| frame.get(name).copied()).ok_or_else(|| Violation::Structural {
                        kind: StructuralKind::BadLength,
                        detail: format!("division by zero in length of array `{field_name}`"),
                    })?
                }
            };
            if n < 0 {
                return Err(Violation::Structural {
                    kind: StructuralKind::BadLength,
                    detail: format!("negative length {n} for array `{field_name}`"),
                });
            }
            match TypeExpr::effective_unit(elem, *unit) {
                ArrayUnit::Elements => {
                    for _ in 0..n {
                        decode_type(spec, elem, field_name, reader, scopes)?;
                    }
                }
                ArrayUnit::Bytes => {
                    let end = reader.pos_bits + (n as u64) * 8;
                    if end > (reader.bytes.len() as u64) * 8 {
                        return Err(insufficient(field_name));
                    }
                    while reader.pos_bits < end {
                        let before = reader.pos_bits;
                        decode_type(spec, elem, field_name, reader, scopes)?;
                        if reader.pos_bits == before {
                            return Err(Violation::Structural {
                                kind: StructuralKind::ZeroSizeElement,
                                detail: format!("zero-size element in byte-delimited array `{field_name}`"),
                            });
                        }
                        if reader.pos_bits > end {
                            return Err(Violation::Structural {
                                kind: StructuralKind::LengthMismatch,
                                detail: format!(
                                    "elements of array `{field_name}` overrun its declared byte length"
                                ),
                            });
                        }
                    }
                }
            }
            Ok(())
        }
        TypeExpr::Case { control, arms, default } => {
            let value = scopes
                .iter()
                .rev()
                .find_map(|f| f.get(control).copied())
                .expect("control resolved at parse time");
            let body = arms
                .iter()
                .find(|a| a.value == value)
                .map(|a| &a.ty)
                .or(default.as_deref());
            match body {
                Some(ty) => decode_type(spec, ty, field_name, reader, scopes),
                None => Err(Violation::Structural {
                    kind: StructuralKind::UnmatchedCase,
                    detail: format!("no case arm of `{field_name}` matches {control} = {value}"),
                }),
            }
        }
    }
}

fn insufficient(field: &str) -> Violation {
    Violation::Structural {
        kind: StructuralKind::InsufficientBytes,
        detail: format!("input ends before field `{field}` is complete"),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_format;
    use super::*;

    const ROUTER_ID: &str = "\
struct TLV {
    UINT8 Type;
    switch (Type) {
        case 0: Pad1;
        case 6: RouterIdTLV;
    } Payload;
}

struct Pad1 { }

struct RouterIdTLV {
    UINT8 Length;
    Length >= 10;
    UINT16 Reserved;
    Reserved == 0;
    UINT64 RouterId;
    RouterId != 0;
    RouterId != 0xFFFFFFFFFFFFFFFF;
}
";

    fn router_id_packet(router_id: u64) -> Vec<u8> {
        let mut p = vec![6u8, 10, 0, 0];
        p.extend_from_slice(&router_id.to_be_bytes());
        p
    }

    #[test]
    fn valid_router_id_passes() {
        let spec = parse_format(ROUTER_ID).unwrap().spec;
        assert_eq!(evaluate_packet(&spec, &router_id_packet(1)), EvalResult::Pass);
    }

    #[test]
    fn zero_router_id_fails_on_its_constraint() {
        let spec = parse_format(ROUTER_ID).unwrap().spec;
        match evaluate_packet(&spec, &router_id_packet(0)) {
            EvalResult::Fail(Violation::Constraint { property, .. }) => {
                assert_eq!(property, PropertyId::constraint("RouterIdTLV", 2));
            }
            other => panic!("expected RouterId constraint violation, got {other:?}"),
        }
    }

    #[test]
    fn truncated_packet_is_structural_fail() {
        let spec = parse_format(ROUTER_ID).unwrap().spec;
        // Cut after Reserved.
        match evaluate_packet(&spec, &router_id_packet(1)[..4]) {
            EvalResult::Fail(Violation::Structural { kind, .. }) => {
                assert_eq!(kind, StructuralKind::InsufficientBytes);
            }
            other => panic!("expected structural violation, got {other:?}"),
        }
    }

    #[test]
    fn trailing_byte_fails() {
        let spec = parse_format(ROUTER_ID).unwrap().spec;
        let mut p = router_id_packet(1);
        p.push(0);
        match evaluate_packet(&spec, &p) {
            EvalResult::Fail(Violation::Structural { kind, .. }) => {
                assert_eq!(kind, StructuralKind::TrailingBytes);
            }
            other => panic!("expected trailing-bytes violation, got {other:?}"),
        }
    }

    #[test]
    fn unmatched_case_fails() {
        let spec = parse_format(ROUTER_ID).unwrap().spec;
        match evaluate_packet(&spec, &[9]) {
            EvalResult::Fail(Violation::Structural { kind, .. }) => {
                assert_eq!(kind, StructuralKind::UnmatchedCase);
            }
            other => panic!("expected unmatched-case violation, got {other:?}"),
        }
    }

    #[test]
    fn pad1_single_byte_passes() {
        let spec = parse_format(ROUTER_ID).unwrap().spec;
        assert_eq!(evaluate_packet(&spec, &[0]), EvalResult::Pass);
    }

    #[test]
    fn bit_fields_pack_msb_first() {
        let spec = parse_format("struct S { BIT(4) Hi; BIT(4) Lo; Hi == 15; Lo == 0; }").unwrap().spec;
        assert_eq!(evaluate_packet(&spec, &[0xF0]), EvalResult::Pass);
        assert!(!evaluate_packet(&spec, &[0x0F]).is_pass());
    }

    #[test]
    fn byte_delimited_array_must_fill_exactly() {
        let src = "\
struct Packet { UINT8 Len; TLV Body[Len bytes]; }
struct TLV { UINT8 Type; switch (Type) { case 1: UINT8; } V; }
";
        let spec = parse_format(src).unwrap().spec;
        // Len=4: two 2-byte TLVs fit exactly.
        assert_eq!(evaluate_packet(&spec, &[4, 1, 9, 1, 7]), EvalResult::Pass);
        // Len=3: second TLV overruns the declared byte length.
        assert!(!evaluate_packet(&spec, &[3, 1, 9, 1, 7]).is_pass());
    }

    #[test]
    fn division_by_zero_in_constraint_is_unsatisfied() {
        let spec =
            parse_format("struct S { UINT8 A; UINT8 B; B / A >= 0; }").unwrap().spec;
        assert!(!evaluate_packet(&spec, &[0, 5]).is_pass());
        assert!(evaluate_packet(&spec, &[1, 5]).is_pass());
    }
}
