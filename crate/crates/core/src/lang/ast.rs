use serde::Serialize;
use std::fmt;

/// Identifier of a statement or specification clause, assigned in textual order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StmtId(pub u32);

impl fmt::Display for StmtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Source location. Spans always compare equal so that derived equality on
/// AST nodes is structural.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

impl Span {
    pub fn new(start: usize, end: usize, line: u32, col: u32) -> Span {
        Span { start, end, line, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TrustOrigin {
    User,
    Patched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TrustTag {
    pub trusted: bool,
    pub origin: TrustOrigin,
}

impl Default for TrustTag {
    fn default() -> Self {
        TrustTag { trusted: false, origin: TrustOrigin::User }
    }
}

impl TrustTag {
    pub fn user() -> TrustTag {
        TrustTag { trusted: true, origin: TrustOrigin::User }
    }

    pub fn patched() -> TrustTag {
        TrustTag { trusted: true, origin: TrustOrigin::Patched }
    }

    pub fn is_patched(&self) -> bool {
        self.trusted && self.origin == TrustOrigin::Patched
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Type {
    Int,
    Bool,
    Array,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => write!(f, "int"),
            Type::Bool => write!(f, "bool"),
            Type::Array => write!(f, "array<int>"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Imp,
    Iff,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Imp => "==>",
            BinOp::Iff => "<==>",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Mul | BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or | BinOp::Iff
        )
    }

    /// Binding strength used by the printer and parser.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Iff => 1,
            BinOp::Imp => 2,
            BinOp::Or => 3,
            BinOp::And => 4,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum QuantKind {
    Forall,
    Exists,
}

/// Bounded quantifier `forall v :: lo <= v < hi ==> body` or
/// `exists v :: lo <= v < hi && body`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Quant {
    pub kind: QuantKind,
    pub var: String,
    pub lo: Box<Expr>,
    pub hi: Box<Expr>,
    pub body: Box<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Null,
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Chained comparison `a op1 b op2 c ...` with at least two operators.
    Chain(Vec<Expr>, Vec<BinOp>),
    Index(Box<Expr>, Box<Expr>),
    Length(Box<Expr>),
    Quant(Quant),
    ArrayLit(Vec<i64>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::And, l, r)
    }

    pub fn imp(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Imp, l, r)
    }

    pub fn eq(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Eq, l, r)
    }

    /// Conjunction of a list, `true` when empty.
    pub fn conj(parts: Vec<Expr>) -> Expr {
        let mut it = parts.into_iter();
        match it.next() {
            None => Expr::Bool(true),
            Some(first) => it.fold(first, Expr::and),
        }
    }

    /// `0 <= idx < arr.Length`
    pub fn in_bounds(arr: Expr, idx: Expr) -> Expr {
        Expr::Chain(
            vec![Expr::Int(0), idx, Expr::Length(Box::new(arr))],
            vec![BinOp::Le, BinOp::Lt],
        )
    }

    /// Top-level conjuncts; chains and other formulas are atomic here.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::Binary(BinOp::And, l, r) => {
                let mut v = l.conjuncts();
                v.extend(r.conjuncts());
                v
            }
            e => vec![e],
        }
    }

    /// Rewrites every sub-expression bottom-up.
    pub fn map(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let e = match self {
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.map(f))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.map(f)), Box::new(b.map(f))),
            Expr::Chain(xs, ops) => Expr::Chain(xs.iter().map(|x| x.map(f)).collect(), ops.clone()),
            Expr::Index(a, i) => Expr::Index(Box::new(a.map(f)), Box::new(i.map(f))),
            Expr::Length(a) => Expr::Length(Box::new(a.map(f))),
            Expr::Quant(q) => Expr::Quant(Quant {
                kind: q.kind,
                var: q.var.clone(),
                lo: Box::new(q.lo.map(f)),
                hi: Box::new(q.hi.map(f)),
                body: Box::new(q.body.map(f)),
            }),
            other => other.clone(),
        };
        f(e)
    }

    /// Visits every sub-expression, parents first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Unary(_, a) | Expr::Length(a) => a.walk(f),
            Expr::Binary(_, a, b) | Expr::Index(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Chain(xs, _) => xs.iter().for_each(|x| x.walk(f)),
            Expr::Quant(q) => {
                q.lo.walk(f);
                q.hi.walk(f);
                q.body.walk(f);
            }
            _ => {}
        }
    }

    /// Free variables in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        collect_free(self, &mut Vec::new(), &mut out);
        out
    }

    /// Capture-avoiding substitution of free variables. Substituted
    /// expressions never contain quantifier-bound names in this tool, so a
    /// bound variable simply shadows the mapping inside its body.
    pub fn subst(&self, map: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        subst_inner(self, map, &mut Vec::new())
    }

    pub fn rename(&self, from: &str, to: &str) -> Expr {
        self.subst(&|v| if v == from { Some(Expr::var(to)) } else { None })
    }

    pub fn contains_index(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if matches!(e, Expr::Index(..)) {
                found = true;
            }
        });
        found
    }
}

fn collect_free(e: &Expr, bound: &mut Vec<String>, out: &mut Vec<String>) {
    match e {
        Expr::Var(v) => {
            if !bound.contains(v) && !out.contains(v) {
                out.push(v.clone());
            }
        }
        Expr::Unary(_, a) | Expr::Length(a) => collect_free(a, bound, out),
        Expr::Binary(_, a, b) | Expr::Index(a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Expr::Chain(xs, _) => xs.iter().for_each(|x| collect_free(x, bound, out)),
        Expr::Quant(q) => {
            collect_free(&q.lo, bound, out);
            collect_free(&q.hi, bound, out);
            bound.push(q.var.clone());
            collect_free(&q.body, bound, out);
            bound.pop();
        }
        _ => {}
    }
}

fn subst_inner(e: &Expr, map: &dyn Fn(&str) -> Option<Expr>, bound: &mut Vec<String>) -> Expr {
    match e {
        Expr::Var(v) => {
            if bound.contains(v) {
                e.clone()
            } else {
                map(v).unwrap_or_else(|| e.clone())
            }
        }
        Expr::Unary(op, a) => Expr::Unary(*op, Box::new(subst_inner(a, map, bound))),
        Expr::Binary(op, a, b) => Expr::Binary(
            *op,
            Box::new(subst_inner(a, map, bound)),
            Box::new(subst_inner(b, map, bound)),
        ),
        Expr::Chain(xs, ops) => {
            Expr::Chain(xs.iter().map(|x| subst_inner(x, map, bound)).collect(), ops.clone())
        }
        Expr::Index(a, i) => Expr::Index(
            Box::new(subst_inner(a, map, bound)),
            Box::new(subst_inner(i, map, bound)),
        ),
        Expr::Length(a) => Expr::Length(Box::new(subst_inner(a, map, bound))),
        Expr::Quant(q) => {
            let lo = subst_inner(&q.lo, map, bound);
            let hi = subst_inner(&q.hi, map, bound);
            bound.push(q.var.clone());
            let body = subst_inner(&q.body, map, bound);
            bound.pop();
            Expr::Quant(Quant {
                kind: q.kind,
                var: q.var.clone(),
                lo: Box::new(lo),
                hi: Box::new(hi),
                body: Box::new(body),
            })
        }
        other => other.clone(),
    }
}

/// A specification clause (requires / ensures / invariant / decreases).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Clause {
    pub id: StmtId,
    pub span: Span,
    pub trust: TrustTag,
    pub formula: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stmt {
    pub id: StmtId,
    pub span: Span,
    pub trust: TrustTag,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum StmtKind {
    VarDecl {
        name: String,
        ty: Option<Type>,
        init: Option<Expr>,
    },
    Assign {
        target: String,
        value: Expr,
    },
    Call {
        declare: bool,
        targets: Vec<String>,
        method: String,
        args: Vec<Expr>,
    },
    Assert(Expr),
    Assume(Expr),
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Option<Vec<Stmt>>,
    },
    While {
        cond: Expr,
        invariants: Vec<Clause>,
        decreases: Option<Clause>,
        body: Vec<Stmt>,
    },
    For {
        var: String,
        lo: Expr,
        hi: Expr,
        invariants: Vec<Clause>,
        decreases: Option<Clause>,
        body: Vec<Stmt>,
    },
    Break,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Method {
    pub name: String,
    pub span: Span,
    pub trust: TrustTag,
    pub params: Vec<Param>,
    pub returns: Vec<Param>,
    pub requires: Vec<Clause>,
    pub ensures: Vec<Clause>,
    /// `None` for a body-less (opaque) method.
    pub body: Option<Vec<Stmt>>,
    /// Location of the opening brace of the body.
    pub body_span: Span,
}

impl Method {
    pub fn var_type(&self, name: &str) -> Option<Type> {
        self.params
            .iter()
            .chain(self.returns.iter())
            .find(|p| p.name == name)
            .map(|p| p.ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Program {
    pub methods: Vec<Method>,
    pub source_name: String,
}

impl Program {
    pub fn method(&self, name: &str) -> Option<&Method> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn method_mut(&mut self, name: &str) -> Option<&mut Method> {
        self.methods.iter_mut().find(|m| m.name == name)
    }
}

/// Borrowed view of any node carrying a `StmtId`.
#[derive(Debug, Clone, Copy)]
pub enum NodeRef<'a> {
    Requires(&'a Method, &'a Clause),
    Ensures(&'a Method, &'a Clause),
    Invariant(&'a Method, &'a Clause),
    Decreases(&'a Method, &'a Clause),
    Stmt(&'a Method, &'a Stmt),
}

impl<'a> NodeRef<'a> {
    pub fn id(&self) -> StmtId {
        match self {
            NodeRef::Requires(_, c)
            | NodeRef::Ensures(_, c)
            | NodeRef::Invariant(_, c)
            | NodeRef::Decreases(_, c) => c.id,
            NodeRef::Stmt(_, s) => s.id,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            NodeRef::Requires(_, c)
            | NodeRef::Ensures(_, c)
            | NodeRef::Invariant(_, c)
            | NodeRef::Decreases(_, c) => c.span,
            NodeRef::Stmt(_, s) => s.span,
        }
    }

    pub fn trust(&self) -> TrustTag {
        match self {
            NodeRef::Requires(_, c)
            | NodeRef::Ensures(_, c)
            | NodeRef::Invariant(_, c)
            | NodeRef::Decreases(_, c) => c.trust,
            NodeRef::Stmt(_, s) => s.trust,
        }
    }

    pub fn method(&self) -> &'a Method {
        match self {
            NodeRef::Requires(m, _)
            | NodeRef::Ensures(m, _)
            | NodeRef::Invariant(m, _)
            | NodeRef::Decreases(m, _)
            | NodeRef::Stmt(m, _) => m,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            NodeRef::Requires(..) => "requires",
            NodeRef::Ensures(..) => "ensures",
            NodeRef::Invariant(..) => "invariant",
            NodeRef::Decreases(..) => "decreases",
            NodeRef::Stmt(_, s) => match s.kind {
                StmtKind::VarDecl { .. } => "var",
                StmtKind::Assign { .. } => "assign",
                StmtKind::Call { .. } => "call",
                StmtKind::Assert(_) => "assert",
                StmtKind::Assume(_) => "assume",
                StmtKind::If { .. } => "if",
                StmtKind::While { .. } => "while",
                StmtKind::For { .. } => "for",
                StmtKind::Break => "break",
            },
        }
    }
}

/// All nodes of a program in textual (id) order.
pub fn nodes(p: &Program) -> Vec<NodeRef<'_>> {
    let mut out = Vec::new();
    for m in &p.methods {
        out.extend(m.requires.iter().map(|c| NodeRef::Requires(m, c)));
        out.extend(m.ensures.iter().map(|c| NodeRef::Ensures(m, c)));
        if let Some(body) = &m.body {
            collect_stmt_nodes(m, body, &mut out);
        }
    }
    out.sort_by_key(|n| n.id());
    out
}

fn collect_stmt_nodes<'a>(m: &'a Method, body: &'a [Stmt], out: &mut Vec<NodeRef<'a>>) {
    for s in body {
        out.push(NodeRef::Stmt(m, s));
        match &s.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                collect_stmt_nodes(m, then_branch, out);
                if let Some(e) = else_branch {
                    collect_stmt_nodes(m, e, out);
                }
            }
            StmtKind::While { invariants, decreases, body, .. }
            | StmtKind::For { invariants, decreases, body, .. } => {
                out.extend(invariants.iter().map(|c| NodeRef::Invariant(m, c)));
                if let Some(d) = decreases {
                    out.push(NodeRef::Decreases(m, d));
                }
                collect_stmt_nodes(m, body, out);
            }
            _ => {}
        }
    }
}

pub fn find_node(p: &Program, id: StmtId) -> Option<NodeRef<'_>> {
    nodes(p).into_iter().find(|n| n.id() == id)
}

/// Applies `f` to every trust tag in the program together with the node id.
pub fn for_each_trust_mut(p: &mut Program, f: &mut dyn FnMut(StmtId, &mut TrustTag)) {
    fn stmts(body: &mut [Stmt], f: &mut dyn FnMut(StmtId, &mut TrustTag)) {
        for s in body {
            f(s.id, &mut s.trust);
            match &mut s.kind {
                StmtKind::If { then_branch, else_branch, .. } => {
                    stmts(then_branch, f);
                    if let Some(e) = else_branch {
                        stmts(e, f);
                    }
                }
                StmtKind::While { invariants, decreases, body, .. }
                | StmtKind::For { invariants, decreases, body, .. } => {
                    for c in invariants.iter_mut() {
                        f(c.id, &mut c.trust);
                    }
                    if let Some(d) = decreases {
                        f(d.id, &mut d.trust);
                    }
                    stmts(body, f);
                }
                _ => {}
            }
        }
    }
    for m in &mut p.methods {
        for c in m.requires.iter_mut().chain(m.ensures.iter_mut()) {
            f(c.id, &mut c.trust);
        }
        if let Some(body) = &mut m.body {
            stmts(body, f);
        }
    }
}

/// Concrete value of a variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Array(Vec<i64>),
}

impl Value {
    pub fn to_expr(&self) -> Expr {
        match self {
            Value::Int(n) => Expr::Int(*n),
            Value::Bool(b) => Expr::Bool(*b),
            Value::Array(xs) => Expr::ArrayLit(xs.clone()),
        }
    }

    pub fn ty(&self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Bool(_) => Type::Bool,
            Value::Array(_) => Type::Array,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Array(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}
