//! The AST-driven rewrite pass.
//!
//! Walks statements top-down, left-to-right, renders replacement text for
//! every expression that contains a value use, and splices the replacements
//! into the original text by character span. Replacement text never
//! introduces newlines, which preserves the physical line structure.
//!
//! Site ids are allocated in span order with inner-before-outer ties: for a
//! call, the callee read numbers first, then the call itself, then the
//! arguments. Assignment targets number before the assigned value because
//! they appear first in the source.

use lexec_lang::ast::*;
use lexec_lang::token::Span;
use lexec_lang::{Program, ATTR_LOADER_FN, CALL_LOADER_FN, NAME_LOADER_FN};

use super::IidMetadata;
use crate::ValueKind;

pub(super) fn rewrite(source: &str, program: &Program) -> (String, Vec<IidMetadata>) {
    let chars: Vec<char> = source.chars().collect();
    let mut rw = Rewriter {
        chars: &chars,
        metadata: Vec::new(),
        edits: Vec::new(),
    };
    rw.walk_block(&program.body);
    let full = Span::new(0, chars.len());
    let edits = std::mem::take(&mut rw.edits);
    let body = splice(&chars, full, edits);
    (body, rw.metadata)
}

struct Rewriter<'a> {
    chars: &'a [char],
    metadata: Vec<IidMetadata>,
    edits: Vec<(Span, String)>,
}

impl<'a> Rewriter<'a> {
    fn alloc(&mut self, kind: ValueKind, name: &str, span: Span) -> u32 {
        let iid = self.metadata.len() as u32;
        self.metadata.push(IidMetadata {
            iid,
            start: span.start,
            end: span.end,
            name: name.to_string(),
            kind,
        });
        iid
    }

    fn slice(&self, span: Span) -> String {
        self.chars[span.start..span.end].iter().collect()
    }

    fn edit_expr(&mut self, e: &Expr) {
        let (text, changed) = self.render(e);
        if changed {
            self.edits.push((e.span, text));
        }
    }

    /// Renders the instrumented form of an expression. The flag reports
    /// whether anything inside was rewritten.
    fn render(&mut self, e: &Expr) -> (String, bool) {
        match &e.kind {
            ExprKind::Name(name) => {
                let iid = self.alloc(ValueKind::Variable, name, e.span);
                (
                    format!("{NAME_LOADER_FN}({iid}, \"{name}\", lambda: {name})"),
                    true,
                )
            }
            ExprKind::Attribute {
                base,
                attr,
                attr_span,
            } => {
                let (base_text, _) = self.render(base);
                let iid = self.alloc(ValueKind::Attribute, attr, e.span);
                // Text between the base and the attribute name, minus the
                // access dot. Keeping it preserves newlines in chained
                // accesses split across lines inside brackets.
                let interstitial: String = self.chars[base.span.end..attr_span.start]
                    .iter()
                    .collect::<String>()
                    .replacen('.', "", 1);
                (
                    format!("{ATTR_LOADER_FN}({iid}, {base_text}{interstitial}, \"{attr}\")"),
                    true,
                )
            }
            ExprKind::Call {
                callee,
                args,
                kwargs,
            } => {
                let (callee_text, _) = self.render(callee);
                let iid = self.alloc(ValueKind::ReturnValue, &callee_name(callee), e.span);
                let mut repls: Vec<(Span, String)> = Vec::new();
                for a in args {
                    let (t, changed) = self.render(a);
                    if changed {
                        repls.push((a.span, t));
                    }
                }
                for (_, v) in kwargs {
                    let (t, changed) = self.render(v);
                    if changed {
                        repls.push((v.span, t));
                    }
                }
                // Splice the original argument list (layout intact), then
                // swap the opening paren for the loader-argument comma.
                let tail_span = Span::new(callee.span.end, e.span.end);
                let tail = splice(self.chars, tail_span, repls);
                let open = tail.find('(').expect("call expression has an opening paren");
                let prefix = &tail[..open];
                let rest = &tail[open + 1..];
                let comma = if args.is_empty() && kwargs.is_empty() {
                    ""
                } else {
                    ", "
                };
                (
                    format!("{CALL_LOADER_FN}({iid}, {callee_text}{prefix}{comma}{rest}"),
                    true,
                )
            }
            _ => self.render_children(e),
        }
    }

    fn render_children(&mut self, e: &Expr) -> (String, bool) {
        let children = direct_children(e);
        let mut repls: Vec<(Span, String)> = Vec::new();
        for child in children {
            let (text, changed) = self.render(child);
            if changed {
                repls.push((child.span, text));
            }
        }
        if repls.is_empty() {
            (self.slice(e.span), false)
        } else {
            (splice(self.chars, e.span, repls), true)
        }
    }

    fn walk_block(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.walk_stmt(s);
        }
    }

    fn walk_stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Expr(e) => self.edit_expr(e),
            StmtKind::Assign { targets, value } => {
                for t in targets {
                    self.edit_target(t);
                }
                self.edit_expr(value);
            }
            StmtKind::AugAssign { target, op, value } => {
                self.edit_aug_assign(s, target, *op, value)
            }
            StmtKind::If { arms } => {
                for arm in arms {
                    if let Some(cond) = &arm.cond {
                        self.edit_expr(cond);
                    }
                    self.walk_block(&arm.body);
                }
            }
            StmtKind::While { cond, body } => {
                self.edit_expr(cond);
                self.walk_block(body);
            }
            StmtKind::For { iter, body, .. } => {
                self.edit_expr(iter);
                self.walk_block(body);
            }
            StmtKind::Def { params, body, .. } => {
                for p in params {
                    if let Some(d) = &p.default {
                        self.edit_expr(d);
                    }
                }
                self.walk_block(body);
            }
            StmtKind::Return(value) | StmtKind::Raise(value) => {
                if let Some(e) = value {
                    self.edit_expr(e);
                }
            }
            StmtKind::Try {
                body,
                handlers,
                finally,
            } => {
                self.walk_block(body);
                for h in handlers {
                    if let Some(f) = &h.filter {
                        self.edit_expr(f);
                    }
                    self.walk_block(&h.body);
                }
                if let Some((fin, _)) = finally {
                    self.walk_block(fin);
                }
            }
            StmtKind::With { ctx, body, .. } => {
                self.edit_expr(ctx);
                self.walk_block(body);
            }
            StmtKind::Assert { cond, msg } => {
                self.edit_expr(cond);
                if let Some(m) = msg {
                    self.edit_expr(m);
                }
            }
            StmtKind::Import { .. }
            | StmtKind::Pass
            | StmtKind::Break
            | StmtKind::Continue => {}
        }
    }

    /// Writes (assignment targets) are not wrapped; reads feeding them are.
    fn edit_target(&mut self, t: &Target) {
        match t {
            Target::Name { .. } | Target::TupleNames { .. } => {}
            Target::Attribute { base, .. } => self.edit_expr(base),
            Target::Subscript { base, index, .. } => {
                self.edit_expr(base);
                match index {
                    SubscriptIndex::Index(i) => self.edit_expr(i),
                    SubscriptIndex::Slice { lower, upper } => {
                        if let Some(l) = lower {
                            self.edit_expr(l);
                        }
                        if let Some(u) = upper {
                            self.edit_expr(u);
                        }
                    }
                }
            }
        }
    }

    /// `x ◦= e` with a simple-name target becomes a plain assignment whose
    /// right side wraps the read of `x`; attribute and subscript targets
    /// stay untouched so their in-place semantics survive.
    fn edit_aug_assign(&mut self, stmt: &Stmt, target: &Target, op: BinOpKind, value: &Expr) {
        match target {
            Target::Name { name, span, .. } => {
                let iid = self.alloc(ValueKind::Variable, name, *span);
                let (value_text, _) = self.render(value);
                let text = format!(
                    "{name} = {NAME_LOADER_FN}({iid}, \"{name}\", lambda: {name}) {} ({value_text})",
                    op_symbol(op)
                );
                self.edits.push((stmt.span, text));
            }
            _ => self.edit_expr(value),
        }
    }
}

fn op_symbol(op: BinOpKind) -> &'static str {
    match op {
        BinOpKind::Add => "+",
        BinOpKind::Sub => "-",
        BinOpKind::Mul => "*",
        BinOpKind::Div => "/",
        BinOpKind::FloorDiv => "//",
        BinOpKind::Mod => "%",
        BinOpKind::Pow => "**",
    }
}

/// Textual callee name stored in call-site metadata.
fn callee_name(callee: &Expr) -> String {
    match &callee.kind {
        ExprKind::Name(n) => n.clone(),
        ExprKind::Attribute { attr, .. } => attr.clone(),
        ExprKind::Paren(inner) => callee_name(inner),
        ExprKind::Call { callee, .. } => callee_name(callee),
        ExprKind::Lambda { .. } => "<lambda>".to_string(),
        _ => "<expr>".to_string(),
    }
}

/// Direct sub-expressions in source order, for the node kinds that are not
/// themselves wrapped.
fn direct_children(e: &Expr) -> Vec<&Expr> {
    match &e.kind {
        ExprKind::List(items) | ExprKind::Set(items) => items.iter().collect(),
        ExprKind::Tuple { items, .. } => items.iter().collect(),
        ExprKind::Dict(pairs) => pairs
            .iter()
            .flat_map(|(k, v)| [k, v])
            .collect(),
        ExprKind::Subscript { base, index } => {
            let mut out = vec![base.as_ref()];
            match index {
                SubscriptIndex::Index(i) => out.push(i),
                SubscriptIndex::Slice { lower, upper } => {
                    if let Some(l) = lower {
                        out.push(l);
                    }
                    if let Some(u) = upper {
                        out.push(u);
                    }
                }
            }
            out
        }
        ExprKind::Unary { operand, .. } => vec![operand.as_ref()],
        ExprKind::Binary { left, right, .. } => vec![left.as_ref(), right.as_ref()],
        ExprKind::BoolChain { values, .. } => values.iter().collect(),
        ExprKind::Compare { first, rest } => {
            let mut out = vec![first.as_ref()];
            out.extend(rest.iter().map(|(_, e)| e));
            out
        }
        ExprKind::Conditional { then, cond, orelse } => {
            vec![then.as_ref(), cond.as_ref(), orelse.as_ref()]
        }
        ExprKind::Lambda { params, body } => {
            let mut out: Vec<&Expr> = params
                .iter()
                .filter_map(|p| p.default.as_ref())
                .collect();
            out.push(body.as_ref());
            out
        }
        ExprKind::Paren(inner) => vec![inner.as_ref()],
        // Literals and names carry no unwrapped children.
        _ => Vec::new(),
    }
}

/// Applies non-overlapping replacements inside `span` of the original text.
fn splice(chars: &[char], span: Span, mut repls: Vec<(Span, String)>) -> String {
    repls.sort_by_key(|(s, _)| s.start);
    let mut out = String::new();
    let mut pos = span.start;
    for (s, text) in repls {
        debug_assert!(s.start >= pos && s.end <= span.end, "overlapping edits");
        out.extend(chars[pos..s.start].iter());
        out.push_str(&text);
        pos = s.end;
    }
    out.extend(chars[pos..span.end].iter());
    out
}
