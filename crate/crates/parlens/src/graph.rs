//! Format graph: a DAG over primitive fields whose complete paths enumerate
//! all valid packet layouts of a format.
//!
//! Primitive fields become nodes; structs, arrays, and case types become
//! subgraphs. Case arms hang off the control field behind edges constraining
//! the control value; variable-length arrays are kept as templates and
//! instantiated per configured element count when paths are enumerated. Each
//! enumerated path is then encoded as a conjunction of domain bounds,
//! field-level constraints, and edge constraints, ready for the solver.

use crate::dsl::{
    print_arith, print_constraint, ArithExpr, ArrayUnit, BinOp, CmpOp, Constraint, FormatSpec,
    Item, LengthSpec, PrimKind, PropertyId, StructDef, TypeExpr,
};
use std::collections::HashSet;
use std::fmt::Write as _;
use thiserror::Error;

/// A primitive-field node. A node may carry several field-level constraints
/// (e.g. `RouterId != 0` and `RouterId != 0xFFFF...`); each is an
/// independently mutable property.
#[derive(Debug, Clone)]
pub struct GraphNode {
    /// Field name local to the enclosing subgraph (array elements are
    /// expanded as `Data[0]`, `Data[1]`, ...).
    pub name: String,
    pub kind: PrimKind,
    pub constraints: Vec<(PropertyId, Constraint)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemRef {
    Node(usize),
    Sub(usize),
}

#[derive(Debug, Clone)]
pub struct GraphEdge {
    pub from: ElemRef,
    pub to: ElemRef,
    /// Structural constraints gating the edge (case-arm selection).
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct Subgraph {
    pub kind: SubgraphKind,
    pub graph: FormatGraph,
}

#[derive(Debug, Clone)]
pub enum SubgraphKind {
    /// A struct-typed field; inner node names are the struct's field names.
    Struct { field: String, struct_name: String },
    /// Fixed-length array, fully expanded into sequential element instances.
    FixedArray { field: String, count: u64 },
    /// Variable-length array kept as a one-element template; instantiated
    /// per configured count during path enumeration.
    VariableArray { field: String, length: ArithExpr, unit: ArrayUnit, elem: TypeExpr },
    /// One arm of a case type. `guards` constrain the control field; the
    /// default arm carries one exclusion guard per explicit arm.
    CaseArm { field: String, control: String, value: Option<u64>, guards: Vec<Constraint> },
}

impl SubgraphKind {
    fn label(&self) -> String {
        match self {
            SubgraphKind::Struct { field, struct_name } => format!("{field}: {struct_name}"),
            SubgraphKind::FixedArray { field, count } => format!("{field}[{count}]"),
            SubgraphKind::VariableArray { field, length, unit, .. } => {
                let u = match unit {
                    ArrayUnit::Elements => "elements",
                    ArrayUnit::Bytes => "bytes",
                };
                format!("{field}[{} {u}]", print_arith(length, 0))
            }
            SubgraphKind::CaseArm { field, control, value: Some(v), .. } => {
                format!("{field} when {control} == {v}")
            }
            SubgraphKind::CaseArm { field, control, value: None, .. } => {
                format!("{field} when {control} unmatched (default)")
            }
        }
    }
}

/// One nesting level of the format graph.
#[derive(Debug, Clone, Default)]
pub struct FormatGraph {
    pub nodes: Vec<GraphNode>,
    pub subgraphs: Vec<Subgraph>,
    pub edges: Vec<GraphEdge>,
    pub entries: Vec<ElemRef>,
    pub exits: Vec<ElemRef>,
    /// Sequential/alternative structure in construction order; drives path
    /// enumeration.
    order: Vec<SeqItem>,
}

#[derive(Debug, Clone)]
enum SeqItem {
    Elem(ElemRef),
    /// Case arms: exactly one subgraph is taken.
    Choice { field: String, arms: Vec<usize> },
}

/// Compiles a resolved spec into its format graph, rooted at the entry
/// struct.
pub fn build_graph(spec: &FormatSpec) -> FormatGraph {
    build_struct_graph(spec, spec.entry_struct())
}

fn build_struct_graph(spec: &FormatSpec, st: &StructDef) -> FormatGraph {
    let mut b = Builder::default();
    for item in &st.items {
        match item {
            Item::Field(f) => b.add_elem(spec, &f.name, &f.ty, true),
            Item::Constraint(_) => {}
        }
    }
    // Constraints attach to the last-declared field they reference.
    for (idx, c) in st.constraints() {
        let refs = c.referenced_fields();
        let target = b
            .g
            .nodes
            .iter()
            .rposition(|n| refs.contains(&n.name.as_str()))
            .expect("constraint references a declared primitive field");
        b.g.nodes[target].constraints.push((PropertyId::constraint(&st.name, idx), c.clone()));
    }
    b.finish()
}

/// Wraps a single element (array element or case-arm body) as a graph.
fn build_elem_graph(spec: &FormatSpec, name: &str, ty: &TypeExpr) -> FormatGraph {
    let mut b = Builder::default();
    b.add_elem(spec, name, ty, true);
    b.finish()
}

#[derive(Default)]
struct Builder {
    g: FormatGraph,
    prev: Vec<ElemRef>,
}

impl Builder {
    fn connect(&mut self, to: ElemRef, constraints: &[Constraint]) {
        if self.prev.is_empty() {
            self.g.entries.push(to);
        }
        for &from in &self.prev {
            self.g.edges.push(GraphEdge { from, to, constraints: constraints.to_vec() });
        }
    }

    fn push_sub(&mut self, sub: Subgraph, guards: &[Constraint]) -> usize {
        let idx = self.g.subgraphs.len();
        self.g.subgraphs.push(sub);
        self.connect(ElemRef::Sub(idx), guards);
        idx
    }

    fn add_elem(&mut self, spec: &FormatSpec, name: &str, ty: &TypeExpr, advance: bool) {
        match ty {
            TypeExpr::Primitive(kind) => {
                let idx = self.g.nodes.len();
                self.g.nodes.push(GraphNode {
                    name: name.to_string(),
                    kind: *kind,
                    constraints: Vec::new(),
                });
                self.connect(ElemRef::Node(idx), &[]);
                self.g.order.push(SeqItem::Elem(ElemRef::Node(idx)));
                if advance {
                    self.prev = vec![ElemRef::Node(idx)];
                }
            }
            TypeExpr::StructRef(struct_name) => {
                let inner = spec.get_struct(struct_name).expect("resolved spec");
                let sub = Subgraph {
                    kind: SubgraphKind::Struct {
                        field: name.to_string(),
                        struct_name: struct_name.clone(),
                    },
                    graph: build_struct_graph(spec, inner),
                };
                let idx = self.push_sub(sub, &[]);
                self.g.order.push(SeqItem::Elem(ElemRef::Sub(idx)));
                if advance {
                    self.prev = vec![ElemRef::Sub(idx)];
                }
            }
            TypeExpr::Array { elem, length, unit } => {
                let effective = TypeExpr::effective_unit(elem, *unit);
                match fixed_element_count(spec, elem, length, effective) {
                    Some(count) => {
                        let mut inner = Builder::default();
                        for i in 0..count {
                            inner.add_elem(spec, &format!("{name}[{i}]"), elem, true);
                        }
                        let sub = Subgraph {
                            kind: SubgraphKind::FixedArray { field: name.to_string(), count },
                            graph: inner.finish(),
                        };
                        let idx = self.push_sub(sub, &[]);
                        self.g.order.push(SeqItem::Elem(ElemRef::Sub(idx)));
                        if advance {
                            self.prev = vec![ElemRef::Sub(idx)];
                        }
                    }
                    None => {
                        let length_expr = match length {
                            LengthSpec::Const(c) => ArithExpr::Const(*c),
                            LengthSpec::Expr(e) => e.clone(),
                        };
                        let sub = Subgraph {
                            kind: SubgraphKind::VariableArray {
                                field: name.to_string(),
                                length: length_expr,
                                unit: effective,
                                elem: (**elem).clone(),
                            },
                            graph: build_elem_graph(spec, &format!("{name}[i]"), elem),
                        };
                        let idx = self.push_sub(sub, &[]);
                        self.g.order.push(SeqItem::Elem(ElemRef::Sub(idx)));
                        if advance {
                            self.prev = vec![ElemRef::Sub(idx)];
                        }
                    }
                }
            }
            TypeExpr::Case { control, arms, default } => {
                let mut arm_indices = Vec::new();
                let entry_prev = self.prev.clone();
                for arm in arms {
                    let guard = Constraint {
                        expr: ArithExpr::Bin(
                            Box::new(ArithExpr::Ident(control.clone())),
                            BinOp::Sub,
                            Box::new(ArithExpr::Const(arm.value)),
                        ),
                        op: CmpOp::Eq,
                        span: arm.span,
                    };
                    let sub = Subgraph {
                        kind: SubgraphKind::CaseArm {
                            field: name.to_string(),
                            control: control.clone(),
                            value: Some(arm.value),
                            guards: vec![guard.clone()],
                        },
                        graph: build_elem_graph(spec, name, &arm.ty),
                    };
                    self.prev = entry_prev.clone();
                    arm_indices.push(self.push_sub(sub, &[guard]));
                }
                if let Some(d) = default {
                    let guards: Vec<Constraint> = arms
                        .iter()
                        .map(|arm| Constraint {
                            expr: ArithExpr::Bin(
                                Box::new(ArithExpr::Ident(control.clone())),
                                BinOp::Sub,
                                Box::new(ArithExpr::Const(arm.value)),
                            ),
                            op: CmpOp::Ne,
                            span: arm.span,
                        })
                        .collect();
                    let sub = Subgraph {
                        kind: SubgraphKind::CaseArm {
                            field: name.to_string(),
                            control: control.clone(),
                            value: None,
                            guards: guards.clone(),
                        },
                        graph: build_elem_graph(spec, name, d),
                    };
                    self.prev = entry_prev.clone();
                    arm_indices.push(self.push_sub(sub, &guards));
                }
                self.g.order.push(SeqItem::Choice { field: name.to_string(), arms: arm_indices.clone() });
                if advance {
                    self.prev = arm_indices.into_iter().map(ElemRef::Sub).collect();
                }
            }
        }
    }

    fn finish(mut self) -> FormatGraph {
        self.g.exits = self.prev;
        self.g
    }
}

/// Returns the element count if the array layout is statically fixed.
fn fixed_element_count(
    spec: &FormatSpec,
    elem: &TypeExpr,
    length: &LengthSpec,
    unit: ArrayUnit,
) -> Option<u64> {
    let c = match length {
        LengthSpec::Const(c) => *c,
        LengthSpec::Expr(_) => return None,
    };
    match unit {
        ArrayUnit::Elements => Some(c),
        ArrayUnit::Bytes => {
            let bits = static_bit_width(spec, elem)?;
            if bits > 0 && (c * 8) % bits == 0 {
                Some(c * 8 / bits)
            } else if c == 0 {
                Some(0)
            } else {
                None
            }
        }
    }
}

/// Total bit width of a type when every layout has the same size.
pub fn static_bit_width(spec: &FormatSpec, ty: &TypeExpr) -> Option<u64> {
    match ty {
        TypeExpr::Primitive(k) => Some(k.bit_width() as u64),
        TypeExpr::StructRef(name) => {
            let st = spec.get_struct(name)?;
            let mut total = 0u64;
            for f in st.fields() {
                total += static_bit_width(spec, &f.ty)?;
            }
            Some(total)
        }
        TypeExpr::Array { elem, length, unit } => {
            let count = fixed_element_count(spec, elem, length, TypeExpr::effective_unit(elem, *unit))?;
            Some(count * static_bit_width(spec, elem)?)
        }
        TypeExpr::Case { arms, default, .. } => {
            let mut widths = arms.iter().map(|a| static_bit_width(spec, &a.ty));
            let first = widths.next()??;
            for w in widths {
                if w? != first {
                    return None;
                }
            }
            if let Some(d) = default {
                if static_bit_width(spec, d)? != first {
                    return None;
                }
            }
            Some(first)
        }
    }
}

// ---------------------------------------------------------------------------
// Path enumeration
// ---------------------------------------------------------------------------

/// One primitive field instance along a path, with its qualified variable
/// name and the field-level constraints that apply to it.
#[derive(Debug, Clone)]
pub struct PathStep {
    pub var: String,
    pub kind: PrimKind,
    pub constraints: Vec<(PropertyId, Constraint)>,
    /// Variable-array instances this step sits inside, outermost first:
    /// (qualified array field, element index). Lets mutations locate the
    /// byte range of an array element.
    pub array_path: Vec<(String, u64)>,
}

/// A structural constraint traversed along a path (case-arm guard or
/// variable-array length pin). Not a mutation target.
#[derive(Debug, Clone)]
pub struct EdgeConstraint {
    pub desc: String,
    pub constraint: Constraint,
}

/// A complete path: an ordered field/constraint sequence describing one
/// valid packet layout.
#[derive(Debug, Clone)]
pub struct GraphPath {
    pub id: String,
    pub steps: Vec<PathStep>,
    pub edge_constraints: Vec<EdgeConstraint>,
    /// Which variable arrays were expanded to how many elements.
    pub array_counts: Vec<(String, u64)>,
}

impl GraphPath {
    pub fn total_bits(&self) -> u64 {
        self.steps.iter().map(|s| s.kind.bit_width() as u64).sum()
    }
}

#[derive(Debug, Clone)]
pub struct EnumerateOptions {
    /// Element counts used to instantiate each variable-length array.
    pub array_counts: Vec<u64>,
    /// Hard cap on the number of enumerated paths.
    pub path_cap: usize,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions { array_counts: vec![0, 1], path_cap: 10_000 }
    }
}

#[derive(Debug, Error)]
pub enum PathError {
    #[error("path cap of {cap} exceeded; choice points: {}", choice_points.join(", "))]
    CapExceeded { cap: usize, choice_points: Vec<String> },
}

#[derive(Clone)]
struct Frame {
    prefix: String,
    names: HashSet<String>,
}

fn qualify(scopes: &[Frame], name: &str) -> String {
    for frame in scopes.iter().rev() {
        if frame.names.contains(name) {
            return format!("{}{}", frame.prefix, name);
        }
    }
    name.to_string()
}

fn qualify_constraint(scopes: &[Frame], c: &Constraint) -> Constraint {
    Constraint { expr: c.expr.map_idents(&|id| qualify(scopes, id)), op: c.op, span: c.span }
}

#[derive(Clone, Default)]
struct Piece {
    steps: Vec<PathStep>,
    edges: Vec<EdgeConstraint>,
    counts: Vec<(String, u64)>,
}

impl Piece {
    fn join(&self, other: &Piece) -> Piece {
        let mut out = self.clone();
        out.steps.extend(other.steps.iter().cloned());
        out.edges.extend(other.edges.iter().cloned());
        out.counts.extend(other.counts.iter().cloned());
        out
    }
}

/// Enumerates every complete path of the graph, one per combination of
/// case-arm choice and array instantiation, in deterministic order (arm
/// order, then count order).
pub fn enumerate_paths(
    spec: &FormatSpec,
    graph: &FormatGraph,
    opts: &EnumerateOptions,
) -> Result<Vec<GraphPath>, PathError> {
    let entry = spec.entry_struct();
    let scopes = vec![struct_frame(String::new(), entry)];
    let pieces = pieces_of_graph(spec, graph, &scopes, opts)?;
    Ok(pieces
        .into_iter()
        .enumerate()
        .map(|(i, p)| GraphPath {
            id: format!("p{i:04}"),
            steps: p.steps,
            edge_constraints: p.edges,
            array_counts: p.counts,
        })
        .collect())
}

fn struct_frame(prefix: String, st: &StructDef) -> Frame {
    let names = st
        .fields()
        .filter(|f| matches!(f.ty, TypeExpr::Primitive(_)))
        .map(|f| f.name.clone())
        .collect();
    Frame { prefix, names }
}

fn pieces_of_graph(
    spec: &FormatSpec,
    graph: &FormatGraph,
    scopes: &[Frame],
    opts: &EnumerateOptions,
) -> Result<Vec<Piece>, PathError> {
    let mut acc = vec![Piece::default()];
    for item in &graph.order {
        let alts: Vec<Piece> = match item {
            SeqItem::Elem(ElemRef::Node(i)) => {
                let node = &graph.nodes[*i];
                let step = PathStep {
                    var: qualify(scopes, &node.name),
                    kind: node.kind,
                    constraints: node
                        .constraints
                        .iter()
                        .map(|(id, c)| (id.clone(), qualify_constraint(scopes, c)))
                        .collect(),
                    array_path: Vec::new(),
                };
                vec![Piece { steps: vec![step], edges: Vec::new(), counts: Vec::new() }]
            }
            SeqItem::Elem(ElemRef::Sub(i)) => pieces_of_sub(spec, &graph.subgraphs[*i], scopes, opts)?,
            SeqItem::Choice { arms, .. } => {
                let mut alts = Vec::new();
                for &arm in arms {
                    alts.extend(pieces_of_sub(spec, &graph.subgraphs[arm], scopes, opts)?);
                }
                alts
            }
        };
        acc = cross(acc, &alts, opts.path_cap, graph)?;
    }
    Ok(acc)
}

fn cross(
    acc: Vec<Piece>,
    alts: &[Piece],
    cap: usize,
    graph: &FormatGraph,
) -> Result<Vec<Piece>, PathError> {
    if acc.len().saturating_mul(alts.len()) > cap {
        return Err(PathError::CapExceeded { cap, choice_points: choice_points(graph) });
    }
    let mut out = Vec::with_capacity(acc.len() * alts.len());
    for a in &acc {
        for b in alts {
            out.push(a.join(b));
        }
    }
    Ok(out)
}

fn choice_points(graph: &FormatGraph) -> Vec<String> {
    let mut out = Vec::new();
    for item in &graph.order {
        if let SeqItem::Choice { field, arms } = item {
            out.push(format!("case `{field}` ({} arms)", arms.len()));
        }
    }
    for sub in &graph.subgraphs {
        if let SubgraphKind::VariableArray { field, .. } = &sub.kind {
            out.push(format!("variable array `{field}`"));
        }
        out.extend(choice_points(&sub.graph));
    }
    out
}

fn pieces_of_sub(
    spec: &FormatSpec,
    sub: &Subgraph,
    scopes: &[Frame],
    opts: &EnumerateOptions,
) -> Result<Vec<Piece>, PathError> {
    match &sub.kind {
        SubgraphKind::Struct { field, struct_name } => {
            let st = spec.get_struct(struct_name).expect("resolved spec");
            let prefix = format!("{}{}.", scopes.last().map(|f| f.prefix.as_str()).unwrap_or(""), field);
            let mut inner = scopes.to_vec();
            inner.push(struct_frame(prefix, st));
            pieces_of_graph(spec, &sub.graph, &inner, opts)
        }
        SubgraphKind::FixedArray { .. } => pieces_of_graph(spec, &sub.graph, scopes, opts),
        SubgraphKind::CaseArm { guards, control, value, field } => {
            let inner = pieces_of_graph(spec, &sub.graph, scopes, opts)?;
            let qualified: Vec<EdgeConstraint> = guards
                .iter()
                .map(|g| EdgeConstraint {
                    desc: match value {
                        Some(v) => format!("{field}: {} == {v}", qualify(scopes, control)),
                        None => format!("{field}: default arm of {}", qualify(scopes, control)),
                    },
                    constraint: qualify_constraint(scopes, g),
                })
                .collect();
            Ok(inner
                .into_iter()
                .map(|p| {
                    let mut edges = qualified.clone();
                    edges.extend(p.edges);
                    Piece { steps: p.steps, edges, counts: p.counts }
                })
                .collect())
        }
        SubgraphKind::VariableArray { field, length, unit, elem } => {
            let qual_field = format!("{}{}", scopes.last().map(|f| f.prefix.as_str()).unwrap_or(""), field);
            let qual_len = length.map_idents(&|id| qualify(scopes, id));
            let mut out = Vec::new();
            for &count in &opts.array_counts {
                let mut combos = vec![Piece::default()];
                for i in 0..count {
                    let elem_graph = build_elem_graph(spec, &format!("{field}[{i}]"), elem);
                    let mut elem_pieces = pieces_of_graph(spec, &elem_graph, scopes, opts)?;
                    for piece in &mut elem_pieces {
                        for step in &mut piece.steps {
                            step.array_path.insert(0, (qual_field.clone(), i));
                        }
                    }
                    combos = cross(combos, &elem_pieces, opts.path_cap, &elem_graph)?;
                }
                for mut piece in combos {
                    let expected = match unit {
                        ArrayUnit::Elements => count,
                        ArrayUnit::Bytes => {
                            piece.steps.iter().map(|s| s.kind.bit_width() as u64).sum::<u64>() / 8
                        }
                    };
                    let pin = Constraint {
                        expr: ArithExpr::Bin(
                            Box::new(qual_len.clone()),
                            BinOp::Sub,
                            Box::new(ArithExpr::Const(expected)),
                        ),
                        op: CmpOp::Eq,
                        span: Default::default(),
                    };
                    piece.edges.push(EdgeConstraint {
                        desc: format!("len({qual_field}) for {count} element(s)"),
                        constraint: pin,
                    });
                    piece.counts.push((qual_field.clone(), count));
                    out.push(piece);
                }
            }
            Ok(out)
        }
    }
}

// ---------------------------------------------------------------------------
// Path formulas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjunctOrigin {
    /// Implied by the field's primitive width: `0 <= v <= 2^w - 1`.
    Domain,
    /// A field-level constraint; the mutation targets.
    Node,
    /// A structural edge constraint; never negated.
    Edge,
}

#[derive(Debug, Clone)]
pub struct Conjunct {
    /// Unique within the formula (a property can occur once per array
    /// element instance).
    pub id: String,
    pub origin: ConjunctOrigin,
    /// The format property this conjunct realizes, for node conjuncts.
    pub property: Option<PropertyId>,
    /// `None` for domain conjuncts, whose bounds live in the variable width.
    pub constraint: Option<Constraint>,
}

/// Conjunction of bounded-integer constraints characterizing one path.
#[derive(Debug, Clone)]
pub struct PathFormula {
    pub path_id: String,
    /// (qualified name, bit width), in path order.
    pub variables: Vec<(String, u32)>,
    pub conjuncts: Vec<Conjunct>,
}

impl PathFormula {
    pub fn width_of(&self, var: &str) -> Option<u32> {
        self.variables.iter().find(|(v, _)| v == var).map(|(_, w)| *w)
    }

    /// Node-origin conjuncts: the field-level mutation targets.
    pub fn field_level_targets(&self) -> impl Iterator<Item = &Conjunct> {
        self.conjuncts.iter().filter(|c| c.origin == ConjunctOrigin::Node)
    }
}

/// Encodes a path as a formula: per field a domain bound plus its node
/// constraints, then all traversed edge constraints.
pub fn path_to_formula(path: &GraphPath) -> PathFormula {
    let mut variables = Vec::new();
    let mut conjuncts = Vec::new();
    let mut node_idx = 0usize;
    for step in &path.steps {
        variables.push((step.var.clone(), step.kind.bit_width()));
        conjuncts.push(Conjunct {
            id: format!("dom:{}", step.var),
            origin: ConjunctOrigin::Domain,
            property: None,
            constraint: None,
        });
        for (prop, c) in &step.constraints {
            conjuncts.push(Conjunct {
                id: format!("n{node_idx}:{prop}"),
                origin: ConjunctOrigin::Node,
                property: Some(prop.clone()),
                constraint: Some(c.clone()),
            });
            node_idx += 1;
        }
    }
    for (i, edge) in path.edge_constraints.iter().enumerate() {
        conjuncts.push(Conjunct {
            id: format!("e{i}:{}", edge.desc),
            origin: ConjunctOrigin::Edge,
            property: None,
            constraint: Some(edge.constraint.clone()),
        });
    }
    PathFormula { path_id: path.id.clone(), variables, conjuncts }
}

// ---------------------------------------------------------------------------
// Graph dump
// ---------------------------------------------------------------------------

/// Renders the graph in DOT for inspection (`parlens graph --dot`).
pub fn to_dot(graph: &FormatGraph) -> String {
    let mut out = String::from("digraph format {\n  rankdir=LR;\n  node [shape=box];\n");
    let mut counter = 0usize;
    render_level(graph, "g", &mut out, &mut counter);
    out.push_str("}\n");
    out
}

fn render_level(graph: &FormatGraph, scope: &str, out: &mut String, counter: &mut usize) {
    let mut node_ids = Vec::new();
    for node in &graph.nodes {
        let id = format!("n{}", *counter);
        *counter += 1;
        let mut label = format!("{}: {:?}", node.name, node.kind);
        for (_, c) in &node.constraints {
            let _ = write!(label, "\\n{}", print_constraint(c));
        }
        let _ = writeln!(out, "  {id} [label=\"{label}\"];");
        node_ids.push(id);
    }
    let mut sub_ids = Vec::new();
    for sub in &graph.subgraphs {
        let cluster = format!("cluster_{}", *counter);
        *counter += 1;
        let _ = writeln!(out, "  subgraph {cluster} {{ label=\"{}\";", sub.kind.label());
        let anchor = format!("a{}", *counter);
        *counter += 1;
        let _ = writeln!(out, "  {anchor} [shape=point];");
        render_level(&sub.graph, &cluster, out, counter);
        out.push_str("  }\n");
        sub_ids.push(anchor);
    }
    let _ = scope;
    let ref_id = |r: &ElemRef| -> &str {
        match r {
            ElemRef::Node(i) => &node_ids[*i],
            ElemRef::Sub(i) => &sub_ids[*i],
        }
    };
    for edge in &graph.edges {
        let label = edge
            .constraints
            .iter()
            .map(print_constraint)
            .collect::<Vec<_>>()
            .join(" && ");
        let _ = writeln!(out, "  {} -> {} [label=\"{label}\"];", ref_id(&edge.from), ref_id(&edge.to));
    }
}
