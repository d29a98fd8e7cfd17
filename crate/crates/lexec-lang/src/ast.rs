//! Syntax tree of the snippet language.
//!
//! Every node carries its character span in the original source so that
//! source-to-source rewriting can splice replacement text without
//! disturbing the surrounding layout.

use crate::token::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOpKind {
    Neg,
    Pos,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOpKind {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOpKind {
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Is,
    IsNot,
    In,
    NotIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOpKind {
    And,
    Or,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub default: Option<Expr>,
}

#[derive(Debug, Clone)]
pub enum SubscriptIndex {
    Index(Box<Expr>),
    Slice {
        lower: Option<Box<Expr>>,
        upper: Option<Box<Expr>>,
    },
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    NoneLit,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Name(String),
    List(Vec<Expr>),
    /// `parenthesized` distinguishes `(a, b)` written with parens from a
    /// bare `a, b` tuple display; both evaluate identically.
    Tuple {
        items: Vec<Expr>,
        parenthesized: bool,
    },
    Set(Vec<Expr>),
    Dict(Vec<(Expr, Expr)>),
    Attribute {
        base: Box<Expr>,
        attr: String,
        /// Span of the attribute name token itself.
        attr_span: Span,
    },
    Subscript {
        base: Box<Expr>,
        index: SubscriptIndex,
    },
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
        kwargs: Vec<(String, Expr)>,
    },
    Unary {
        op: UnaryOpKind,
        operand: Box<Expr>,
    },
    Binary {
        left: Box<Expr>,
        op: BinOpKind,
        right: Box<Expr>,
    },
    BoolChain {
        op: BoolOpKind,
        values: Vec<Expr>,
    },
    Compare {
        first: Box<Expr>,
        rest: Vec<(CmpOpKind, Expr)>,
    },
    Conditional {
        then: Box<Expr>,
        cond: Box<Expr>,
        orelse: Box<Expr>,
    },
    Lambda {
        params: Vec<Param>,
        body: Box<Expr>,
    },
    /// `(expr)` — kept explicit so spans of inner nodes stay exact.
    Paren(Box<Expr>),
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
    /// 1-based line of the expression's first token.
    pub line: u32,
}

/// Validated assignment target.
#[derive(Debug, Clone)]
pub enum Target {
    Name {
        name: String,
        span: Span,
        line: u32,
    },
    Attribute {
        base: Expr,
        attr: String,
        span: Span,
    },
    Subscript {
        base: Expr,
        index: SubscriptIndex,
        span: Span,
    },
    /// Flat tuple of names: `a, b = ...`.
    TupleNames {
        names: Vec<(String, Span)>,
        span: Span,
        line: u32,
    },
}

impl Target {
    pub fn span(&self) -> Span {
        match self {
            Target::Name { span, .. }
            | Target::Attribute { span, .. }
            | Target::Subscript { span, .. }
            | Target::TupleNames { span, .. } => *span,
        }
    }
}

/// Header line range of a statement or clause: the lines the construct's
/// own text occupies, excluding any nested suite.
#[derive(Debug, Clone, Copy)]
pub struct HeaderLines {
    pub first: u32,
    pub last: u32,
}

#[derive(Debug, Clone)]
pub struct IfArm {
    /// `None` for a final `else` clause.
    pub cond: Option<Expr>,
    pub body: Vec<Stmt>,
    pub header: HeaderLines,
}

#[derive(Debug, Clone)]
pub struct ExceptHandler {
    /// Exception filter expression (`except E:`); `None` for a bare except.
    pub filter: Option<Expr>,
    pub alias: Option<String>,
    pub body: Vec<Stmt>,
    pub header: HeaderLines,
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    Expr(Expr),
    Assign {
        targets: Vec<Target>,
        value: Expr,
    },
    AugAssign {
        target: Target,
        op: BinOpKind,
        value: Expr,
    },
    If {
        arms: Vec<IfArm>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    For {
        target: Target,
        iter: Expr,
        body: Vec<Stmt>,
    },
    Def {
        name: String,
        name_span: Span,
        params: Vec<Param>,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    Raise(Option<Expr>),
    Try {
        body: Vec<Stmt>,
        handlers: Vec<ExceptHandler>,
        finally: Option<(Vec<Stmt>, HeaderLines)>,
    },
    With {
        ctx: Expr,
        alias: Option<String>,
        body: Vec<Stmt>,
    },
    Import {
        /// `from module import names` when `names` is non-empty, plain
        /// `import module` otherwise.
        module: String,
        names: Vec<String>,
    },
    Assert {
        cond: Expr,
        msg: Option<Expr>,
    },
    Pass,
    Break,
    Continue,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
    /// Header lines: for simple statements the whole statement text, for
    /// compound statements the first clause header up to its colon.
    pub header: HeaderLines,
}

#[derive(Debug, Clone)]
pub struct Program {
    pub body: Vec<Stmt>,
}

impl Program {
    /// Lines occupied by the bodies of `def` statements, at any nesting
    /// depth. Used by coverage reporting to flag snippets whose countable
    /// lines include function bodies that were never invoked.
    pub fn def_body_lines(&self) -> std::collections::BTreeSet<u32> {
        let mut lines = std::collections::BTreeSet::new();
        fn visit(stmts: &[Stmt], inside_def: bool, lines: &mut std::collections::BTreeSet<u32>) {
            for s in stmts {
                if inside_def {
                    for l in s.header.first..=s.header.last {
                        lines.insert(l);
                    }
                }
                match &s.kind {
                    StmtKind::Def { body, .. } => visit(body, true, lines),
                    StmtKind::If { arms } => {
                        for a in arms {
                            visit(&a.body, inside_def, lines);
                        }
                    }
                    StmtKind::While { body, .. }
                    | StmtKind::For { body, .. }
                    | StmtKind::With { body, .. } => visit(body, inside_def, lines),
                    StmtKind::Try {
                        body,
                        handlers,
                        finally,
                    } => {
                        visit(body, inside_def, lines);
                        for h in handlers {
                            visit(&h.body, inside_def, lines);
                        }
                        if let Some((fin, _)) = finally {
                            visit(fin, inside_def, lines);
                        }
                    }
                    _ => {}
                }
            }
        }
        visit(&self.body, false, &mut lines);
        lines
    }
}
