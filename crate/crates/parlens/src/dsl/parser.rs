use super::ast::*;
use super::lexer::{lex, SpannedTok, Tok};
use super::resolve::resolve;
use super::{Diagnostic, Parsed};

/// Parses and resolves DSL source into a [`FormatSpec`].
///
/// On failure, returns at least one error diagnostic with a source span. The
/// printed form of a successfully parsed spec re-parses to a structurally
/// identical AST.
pub fn parse_format(text: &str) -> Result<Parsed, Vec<Diagnostic>> {
    let toks = lex(text).map_err(|d| vec![d])?;
    let mut parser = Parser { toks, pos: 0 };
    let spec = parser.parse_spec().map_err(|d| vec![d])?;
    let diags = resolve(&spec);
    if diags.iter().any(|d| d.is_error()) {
        return Err(diags);
    }
    Ok(Parsed { spec, warnings: diags })
}

struct Parser {
    toks: Vec<SpannedTok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), Diagnostic> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(Diagnostic::error(format!("expected {}, found {}", want, self.peek()), self.span()))
        }
    }

    fn expect_ident(&mut self) -> Result<String, Diagnostic> {
        if let Tok::Ident(name) = self.peek().clone() {
            self.bump();
            Ok(name)
        } else {
            Err(Diagnostic::error(format!("expected identifier, found {}", self.peek()), self.span()))
        }
    }

    fn expect_int(&mut self) -> Result<u64, Diagnostic> {
        if let Tok::Int(v) = *self.peek() {
            self.bump();
            Ok(v)
        } else {
            Err(Diagnostic::error(format!("expected integer, found {}", self.peek()), self.span()))
        }
    }

    fn parse_spec(&mut self) -> Result<FormatSpec, Diagnostic> {
        let mut entry = None;
        if *self.peek() == Tok::KwEntry {
            self.bump();
            entry = Some(self.expect_ident()?);
            self.expect(Tok::Semi)?;
        }
        let mut structs = Vec::new();
        while *self.peek() != Tok::Eof {
            structs.push(self.parse_struct()?);
        }
        if structs.is_empty() {
            return Err(Diagnostic::error("a format must define at least one struct", self.span()));
        }
        let entry = entry.unwrap_or_else(|| structs[0].name.clone());
        Ok(FormatSpec { structs, entry })
    }

    fn parse_struct(&mut self) -> Result<StructDef, Diagnostic> {
        let span = self.span();
        self.expect(Tok::KwStruct)?;
        let name = self.expect_ident()?;
        self.expect(Tok::LBrace)?;
        let mut items = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(Diagnostic::error(
                    format!("expected `}}` to close struct `{name}`, found end of input"),
                    self.span(),
                ));
            }
            items.push(self.parse_item()?);
        }
        self.bump(); // }
        Ok(StructDef { name, items, span })
    }

    fn parse_item(&mut self) -> Result<Item, Diagnostic> {
        let is_field = match self.peek() {
            Tok::KwUint8 | Tok::KwUint16 | Tok::KwUint32 | Tok::KwUint64 | Tok::KwBit
            | Tok::KwSwitch => true,
            // `Foo Bar` is a struct-ref field; `Foo + 1 > 0` is a constraint.
            Tok::Ident(_) => matches!(self.peek2(), Tok::Ident(_)),
            _ => false,
        };
        if is_field {
            let span = self.span();
            let base = self.parse_base_type()?;
            let name = self.expect_ident()?;
            let ty = self.parse_array_suffix(base)?;
            self.expect(Tok::Semi)?;
            Ok(Item::Field(FieldDecl { name, ty, span }))
        } else {
            let c = self.parse_constraint()?;
            self.expect(Tok::Semi)?;
            Ok(Item::Constraint(c))
        }
    }

    fn parse_base_type(&mut self) -> Result<TypeExpr, Diagnostic> {
        let span = self.span();
        match self.bump() {
            Tok::KwUint8 => Ok(TypeExpr::Primitive(PrimKind::Uint8)),
            Tok::KwUint16 => Ok(TypeExpr::Primitive(PrimKind::Uint16)),
            Tok::KwUint32 => Ok(TypeExpr::Primitive(PrimKind::Uint32)),
            Tok::KwUint64 => Ok(TypeExpr::Primitive(PrimKind::Uint64)),
            Tok::KwBit => {
                self.expect(Tok::LParen)?;
                let n = self.expect_int()?;
                self.expect(Tok::RParen)?;
                if n == 0 || n > 63 {
                    return Err(Diagnostic::error(
                        format!("BIT width must be in 1..=63, got {n}"),
                        span,
                    ));
                }
                Ok(TypeExpr::Primitive(PrimKind::Bit(n as u8)))
            }
            Tok::KwSwitch => {
                self.expect(Tok::LParen)?;
                let control = self.expect_ident()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::LBrace)?;
                let mut arms = Vec::new();
                let mut default = None;
                loop {
                    match self.peek() {
                        Tok::KwCase => {
                            let arm_span = self.span();
                            self.bump();
                            let value = self.expect_int()?;
                            self.expect(Tok::Colon)?;
                            let base = self.parse_base_type()?;
                            let ty = self.parse_array_suffix(base)?;
                            self.expect(Tok::Semi)?;
                            arms.push(CaseArm { value, ty, span: arm_span });
                        }
                        Tok::KwDefault => {
                            self.bump();
                            self.expect(Tok::Colon)?;
                            let base = self.parse_base_type()?;
                            let ty = self.parse_array_suffix(base)?;
                            self.expect(Tok::Semi)?;
                            default = Some(Box::new(ty));
                            break;
                        }
                        _ => break,
                    }
                }
                self.expect(Tok::RBrace)?;
                if arms.is_empty() {
                    return Err(Diagnostic::error("switch must have at least one case arm", span));
                }
                Ok(TypeExpr::Case { control, arms, default })
            }
            Tok::Ident(name) => Ok(TypeExpr::StructRef(name)),
            other => Err(Diagnostic::error(format!("expected a type, found {other}"), span)),
        }
    }

    fn parse_array_suffix(&mut self, base: TypeExpr) -> Result<TypeExpr, Diagnostic> {
        if *self.peek() != Tok::LBracket {
            return Ok(base);
        }
        self.bump();
        let expr = self.parse_arith()?;
        let unit = match self.peek() {
            Tok::KwElements => {
                self.bump();
                Some(ArrayUnit::Elements)
            }
            Tok::KwBytes => {
                self.bump();
                Some(ArrayUnit::Bytes)
            }
            _ => None,
        };
        self.expect(Tok::RBracket)?;
        let length = match expr {
            ArithExpr::Const(c) => LengthSpec::Const(c),
            e => LengthSpec::Expr(e),
        };
        Ok(TypeExpr::Array { elem: Box::new(base), length, unit })
    }

    fn parse_constraint(&mut self) -> Result<Constraint, Diagnostic> {
        let span = self.span();
        let lhs = self.parse_arith()?;
        let op = match self.bump() {
            Tok::Ge => CmpOp::Ge,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Lt => CmpOp::Lt,
            Tok::EqEq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            other => {
                return Err(Diagnostic::error(
                    format!("expected a comparison operator, found {other}"),
                    span,
                ))
            }
        };
        let rhs = self.parse_arith()?;
        // Normal form keeps the comparison against a literal zero.
        let expr = match rhs {
            ArithExpr::Const(0) => lhs,
            rhs => ArithExpr::Bin(Box::new(lhs), BinOp::Sub, Box::new(rhs)),
        };
        Ok(Constraint { expr, op, span })
    }

    fn parse_arith(&mut self) -> Result<ArithExpr, Diagnostic> {
        let mut lhs = self.parse_term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_term()?;
            lhs = ArithExpr::Bin(Box::new(lhs), op, Box::new(rhs));
        }
    }

    fn parse_term(&mut self) -> Result<ArithExpr, Diagnostic> {
        let mut lhs = self.parse_factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_factor()?;
            lhs = ArithExpr::Bin(Box::new(lhs), op, Box::new(rhs));
        }
    }

    fn parse_factor(&mut self) -> Result<ArithExpr, Diagnostic> {
        let span = self.span();
        match self.bump() {
            Tok::Int(v) => Ok(ArithExpr::Const(v)),
            Tok::Ident(name) => Ok(ArithExpr::Ident(name)),
            Tok::LParen => {
                let e = self.parse_arith()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => Err(Diagnostic::error(format!("expected an expression, found {other}"), span)),
        }
    }
}
