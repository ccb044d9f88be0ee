use serde::{Deserialize, Serialize};

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

/// A complete protocol format: an ordered list of struct definitions and the
/// name of the entry struct (the packet root).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatSpec {
    pub structs: Vec<StructDef>,
    pub entry: String,
}

impl FormatSpec {
    pub fn get_struct(&self, name: &str) -> Option<&StructDef> {
        self.structs.iter().find(|s| s.name == name)
    }

    pub fn entry_struct(&self) -> &StructDef {
        self.get_struct(&self.entry).expect("entry struct resolved at parse time")
    }

    /// All constraint properties in the spec, in (struct order, item order).
    pub fn properties(&self) -> Vec<(PropertyId, &Constraint)> {
        let mut out = Vec::new();
        for st in &self.structs {
            for (idx, c) in st.constraints() {
                out.push((PropertyId::constraint(&st.name, idx), c));
            }
        }
        out
    }

    /// Looks up a constraint by property id.
    pub fn find_property(&self, id: &PropertyId) -> Option<&Constraint> {
        let st = self.get_struct(&id.struct_name)?;
        st.constraints().find(|(i, _)| format!("c{i}") == id.member).map(|(_, c)| c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructDef {
    pub name: String,
    pub items: Vec<Item>,
    pub span: Span,
}

impl StructDef {
    pub fn fields(&self) -> impl Iterator<Item = &FieldDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Field(f) => Some(f),
            Item::Constraint(_) => None,
        })
    }

    /// Constraints with their per-struct index (the `N` of property id `cN`).
    pub fn constraints(&self) -> impl Iterator<Item = (usize, &Constraint)> {
        self.items
            .iter()
            .filter_map(|i| match i {
                Item::Constraint(c) => Some(c),
                Item::Field(_) => None,
            })
            .enumerate()
    }
}

/// A struct body item: a field declaration or a constraint statement.
///
/// Constraints are struct-scoped (they may reference any earlier field of the
/// same struct); interleaving them between fields fixes their evaluation
/// position in decode order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Field(FieldDecl),
    Constraint(Constraint),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: TypeExpr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeExpr {
    Primitive(PrimKind),
    Array {
        elem: Box<TypeExpr>,
        length: LengthSpec,
        /// `None` means the source did not spell a unit; the effective unit
        /// is elements for primitive elements and bytes for struct elements.
        unit: Option<ArrayUnit>,
    },
    Case {
        control: String,
        arms: Vec<CaseArm>,
        default: Option<Box<TypeExpr>>,
    },
    StructRef(String),
}

impl TypeExpr {
    pub fn effective_unit(elem: &TypeExpr, unit: Option<ArrayUnit>) -> ArrayUnit {
        unit.unwrap_or(match elem {
            TypeExpr::Primitive(_) => ArrayUnit::Elements,
            _ => ArrayUnit::Bytes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimKind {
    Uint8,
    Uint16,
    Uint32,
    Uint64,
    /// Sub-byte field of `n` bits, 1..=63, packed MSB-first.
    Bit(u8),
}

impl PrimKind {
    pub fn bit_width(self) -> u32 {
        match self {
            PrimKind::Uint8 => 8,
            PrimKind::Uint16 => 16,
            PrimKind::Uint32 => 32,
            PrimKind::Uint64 => 64,
            PrimKind::Bit(n) => n as u32,
        }
    }

    pub fn max_value(self) -> u64 {
        let w = self.bit_width();
        if w == 64 {
            u64::MAX
        } else {
            (1u64 << w) - 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayUnit {
    /// The length expression counts elements.
    Elements,
    /// The length expression counts total bytes occupied by the elements.
    Bytes,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LengthSpec {
    Const(u64),
    Expr(ArithExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseArm {
    pub value: u64,
    pub ty: TypeExpr,
    pub span: Span,
}

/// A constraint in normal form: `expr ⊙ 0`.
///
/// The parser accepts `lhs ⊙ rhs` and normalizes non-zero right-hand sides to
/// `lhs - rhs ⊙ 0`; normalization is idempotent since a literal `0` rhs is
/// kept as-is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub expr: ArithExpr,
    pub op: CmpOp,
    pub span: Span,
}

impl Constraint {
    /// Field identifiers referenced by the constraint, in first-use order.
    pub fn referenced_fields(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.expr.collect_idents(&mut out);
        out
    }

    /// Same constraint with the comparison negated (`¬(e ≥ 0)` is `e < 0`).
    pub fn negated(&self) -> Constraint {
        Constraint { expr: self.expr.clone(), op: self.op.negated(), span: self.span }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Ge,
    Le,
    Gt,
    Lt,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn negated(self) -> CmpOp {
        match self {
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    pub fn holds(self, value: i128) -> bool {
        match self {
            CmpOp::Ge => value >= 0,
            CmpOp::Le => value <= 0,
            CmpOp::Gt => value > 0,
            CmpOp::Lt => value < 0,
            CmpOp::Eq => value == 0,
            CmpOp::Ne => value != 0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// Arithmetic over field identifiers and unsigned constants. Division is
/// integer division truncating toward zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArithExpr {
    Const(u64),
    Ident(String),
    Bin(Box<ArithExpr>, BinOp, Box<ArithExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithExpr {
    pub fn collect_idents<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ArithExpr::Const(_) => {}
            ArithExpr::Ident(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            ArithExpr::Bin(l, _, r) => {
                l.collect_idents(out);
                r.collect_idents(out);
            }
        }
    }

    /// Evaluates with `lookup` supplying field values. `None` means division
    /// by zero was hit somewhere in the expression.
    pub fn eval(&self, lookup: &impl Fn(&str) -> Option<u64>) -> Option<i128> {
        match self {
            ArithExpr::Const(c) => Some(*c as i128),
            ArithExpr::Ident(name) => lookup(name).map(|v| v as i128),
            ArithExpr::Bin(l, op, r) => {
                let l = l.eval(lookup)?;
                let r = r.eval(lookup)?;
                match op {
                    BinOp::Add => Some(l.saturating_add(r)),
                    BinOp::Sub => Some(l.saturating_sub(r)),
                    BinOp::Mul => Some(l.saturating_mul(r)),
                    BinOp::Div => {
                        if r == 0 {
                            None
                        } else {
                            Some(l / r)
                        }
                    }
                }
            }
        }
    }

    /// Rewrites every identifier through `f` (used to qualify path-local
    /// variable names).
    pub fn map_idents(&self, f: &impl Fn(&str) -> String) -> ArithExpr {
        match self {
            ArithExpr::Const(c) => ArithExpr::Const(*c),
            ArithExpr::Ident(name) => ArithExpr::Ident(f(name)),
            ArithExpr::Bin(l, op, r) => {
                ArithExpr::Bin(Box::new(l.map_idents(f)), *op, Box::new(r.map_idents(f)))
            }
        }
    }
}

/// Identifies a format property: a constraint (`struct.cN`) or a field
/// (`struct.FieldName`). This is the key used for traceability and mutation
/// provenance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PropertyId {
    pub struct_name: String,
    pub member: String,
}

impl PropertyId {
    pub fn constraint(struct_name: &str, index: usize) -> Self {
        PropertyId { struct_name: struct_name.to_string(), member: format!("c{index}") }
    }

    pub fn field(struct_name: &str, field: &str) -> Self {
        PropertyId { struct_name: struct_name.to_string(), member: field.to_string() }
    }

    pub fn structural(struct_name: &str, kind: &str) -> Self {
        PropertyId { struct_name: struct_name.to_string(), member: format!("structural:{kind}") }
    }
}

impl std::fmt::Display for PropertyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.struct_name, self.member)
    }
}

impl std::str::FromStr for PropertyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (st, member) = s.split_once('.').ok_or_else(|| format!("malformed property id: {s}"))?;
        Ok(PropertyId { struct_name: st.to_string(), member: member.to_string() })
    }
}
