use super::ast::*;
use std::fmt::Write;

/// Renders a spec back to canonical DSL source. The canonical text re-parses
/// to a structurally identical AST; it is the stored form of `.pform` files.
pub fn print_format(spec: &FormatSpec) -> String {
    let mut out = String::new();
    if !spec.structs.is_empty() && spec.structs[0].name != spec.entry {
        let _ = writeln!(out, "entry {};", spec.entry);
        out.push('\n');
    }
    for (i, st) in spec.structs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_struct(&mut out, st);
    }
    out
}

fn print_struct(out: &mut String, st: &StructDef) {
    let _ = writeln!(out, "struct {} {{", st.name);
    for item in &st.items {
        match item {
            Item::Field(f) => print_field(out, f, 1),
            Item::Constraint(c) => {
                let _ = writeln!(out, "    {} {} 0;", print_arith(&c.expr, 0), c.op.symbol());
            }
        }
    }
    out.push_str("}\n");
}

fn print_field(out: &mut String, field: &FieldDecl, depth: usize) {
    let pad = "    ".repeat(depth);
    match &field.ty {
        TypeExpr::Case { control, arms, default } => {
            let _ = writeln!(out, "{pad}switch ({control}) {{");
            let inner = "    ".repeat(depth + 1);
            for arm in arms {
                let _ = writeln!(out, "{inner}case {}: {};", arm.value, print_type(&arm.ty));
            }
            if let Some(d) = default {
                let _ = writeln!(out, "{inner}default: {};", print_type(d));
            }
            let _ = writeln!(out, "{pad}}} {};", field.name);
        }
        TypeExpr::Array { elem, length, unit } => {
            let _ = writeln!(
                out,
                "{pad}{} {}{};",
                print_type(elem),
                field.name,
                print_suffix(length, *unit)
            );
        }
        ty => {
            let _ = writeln!(out, "{pad}{} {};", print_type(ty), field.name);
        }
    }
}

fn print_type(ty: &TypeExpr) -> String {
    match ty {
        TypeExpr::Primitive(PrimKind::Uint8) => "UINT8".into(),
        TypeExpr::Primitive(PrimKind::Uint16) => "UINT16".into(),
        TypeExpr::Primitive(PrimKind::Uint32) => "UINT32".into(),
        TypeExpr::Primitive(PrimKind::Uint64) => "UINT64".into(),
        TypeExpr::Primitive(PrimKind::Bit(n)) => format!("BIT({n})"),
        TypeExpr::StructRef(name) => name.clone(),
        TypeExpr::Array { elem, length, unit } => {
            format!("{}{}", print_type(elem), print_suffix(length, *unit))
        }
        TypeExpr::Case { control, arms, default } => {
            // Inline case types only occur as array elements or arm bodies,
            // which the parser does not produce; fields print via print_field.
            let mut s = format!("switch ({control}) {{ ");
            for arm in arms {
                let _ = write!(s, "case {}: {}; ", arm.value, print_type(&arm.ty));
            }
            if let Some(d) = default {
                let _ = write!(s, "default: {}; ", print_type(d));
            }
            s.push('}');
            s
        }
    }
}

fn print_suffix(length: &LengthSpec, unit: Option<ArrayUnit>) -> String {
    let len = match length {
        LengthSpec::Const(c) => c.to_string(),
        LengthSpec::Expr(e) => print_arith(e, 0),
    };
    match unit {
        None => format!("[{len}]"),
        Some(ArrayUnit::Elements) => format!("[{len} elements]"),
        Some(ArrayUnit::Bytes) => format!("[{len} bytes]"),
    }
}

/// Prints an arithmetic expression with minimal parentheses. `min_prec` is
/// the binding power required of this subexpression.
pub fn print_arith(expr: &ArithExpr, min_prec: u8) -> String {
    match expr {
        ArithExpr::Const(c) => c.to_string(),
        ArithExpr::Ident(name) => name.clone(),
        ArithExpr::Bin(l, op, r) => {
            let (prec, sym) = match op {
                BinOp::Add => (1, "+"),
                BinOp::Sub => (1, "-"),
                BinOp::Mul => (2, "*"),
                BinOp::Div => (2, "/"),
            };
            // Subtraction and division are left-associative: the right child
            // needs parens at equal precedence.
            let s = format!("{} {} {}", print_arith(l, prec), sym, print_arith(r, prec + 1));
            if prec < min_prec {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

/// Renders a constraint in normal form, e.g. `Length - 10 >= 0`.
pub fn print_constraint(c: &Constraint) -> String {
    format!("{} {} 0", print_arith(&c.expr, 0), c.op.symbol())
}
