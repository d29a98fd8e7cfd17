//! Recursive-descent parser producing the span-carrying AST.

use crate::ast::*;
use crate::lexer::{lex, LexOutput};
use crate::token::{Keyword as Kw, Op, Span, Token, TokenKind};
use crate::LangError;

pub fn parse_program(source: &str) -> Result<Program, LangError> {
    let lexed = lex(source)?;
    parse_lexed(&lexed)
}

pub fn parse_lexed(lexed: &LexOutput) -> Result<Program, LangError> {
    let mut p = Parser {
        tokens: &lexed.tokens,
        idx: 0,
        fn_depth: 0,
        loop_depth: 0,
    };
    let mut body = Vec::new();
    p.skip_newlines();
    while !p.at_eof() {
        body.append(&mut p.parse_statement()?);
        p.skip_newlines();
    }
    Ok(Program { body })
}

struct Parser<'a> {
    tokens: &'a [Token],
    idx: usize,
    fn_depth: usize,
    loop_depth: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.idx.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, off: usize) -> &Token {
        &self.tokens[(self.idx + off).min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> &Token {
        let t = &self.tokens[self.idx.min(self.tokens.len() - 1)];
        if self.idx < self.tokens.len() - 1 {
            self.idx += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().kind, TokenKind::Eof)
    }

    fn err_here(&self, msg: impl Into<String>) -> LangError {
        LangError::syntax(self.peek().line, msg)
    }

    fn expect_op(&mut self, op: Op, what: &str) -> Result<Span, LangError> {
        if self.peek().is_op(op) {
            Ok(self.bump().span)
        } else {
            Err(self.err_here(format!("expected {what}")))
        }
    }

    fn expect_newline(&mut self) -> Result<(), LangError> {
        match self.peek().kind {
            TokenKind::Newline => {
                self.bump();
                Ok(())
            }
            TokenKind::Eof => Ok(()),
            _ => Err(self.err_here("expected end of line")),
        }
    }

    fn expect_name(&mut self, what: &str) -> Result<(String, Span), LangError> {
        match &self.peek().kind {
            TokenKind::Name(n) => {
                let n = n.clone();
                let span = self.bump().span;
                Ok((n, span))
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek().kind, TokenKind::Newline) {
            self.bump();
        }
    }

    // ---- statements ------------------------------------------------------

    /// Parses one logical statement; a simple line with semicolons yields
    /// several statements, which is why this returns a vector.
    fn parse_statement(&mut self) -> Result<Vec<Stmt>, LangError> {
        if let TokenKind::Keyword(kw) = self.peek().kind {
            if kw.is_unsupported() {
                return Err(self.err_here(format!(
                    "unsupported construct '{}'",
                    keyword_text(kw)
                )));
            }
            match kw {
                Kw::If => return Ok(vec![self.parse_if()?]),
                Kw::While => return Ok(vec![self.parse_while()?]),
                Kw::For => return Ok(vec![self.parse_for()?]),
                Kw::Def => return Ok(vec![self.parse_def()?]),
                Kw::Try => return Ok(vec![self.parse_try()?]),
                Kw::With => return Ok(vec![self.parse_with()?]),
                _ => {}
            }
        }
        self.parse_simple_line()
    }

    fn parse_simple_line(&mut self) -> Result<Vec<Stmt>, LangError> {
        let mut stmts = vec![self.parse_small_stmt()?];
        while self.peek().is_op(Op::Semicolon) {
            self.bump();
            if matches!(self.peek().kind, TokenKind::Newline | TokenKind::Eof) {
                break;
            }
            stmts.push(self.parse_small_stmt()?);
        }
        self.expect_newline()?;
        Ok(stmts)
    }

    fn parse_small_stmt(&mut self) -> Result<Stmt, LangError> {
        let start_tok = self.peek().clone();
        let kind = match &start_tok.kind {
            TokenKind::Keyword(Kw::Pass) => {
                self.bump();
                StmtKind::Pass
            }
            TokenKind::Keyword(Kw::Break) => {
                if self.loop_depth == 0 {
                    return Err(self.err_here("'break' outside loop"));
                }
                self.bump();
                StmtKind::Break
            }
            TokenKind::Keyword(Kw::Continue) => {
                if self.loop_depth == 0 {
                    return Err(self.err_here("'continue' outside loop"));
                }
                self.bump();
                StmtKind::Continue
            }
            TokenKind::Keyword(Kw::Return) => {
                if self.fn_depth == 0 {
                    return Err(self.err_here("'return' outside function"));
                }
                self.bump();
                let value = if self.at_stmt_end() {
                    None
                } else {
                    Some(self.parse_testlist()?)
                };
                StmtKind::Return(value)
            }
            TokenKind::Keyword(Kw::Raise) => {
                self.bump();
                let value = if self.at_stmt_end() {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                StmtKind::Raise(value)
            }
            TokenKind::Keyword(Kw::Assert) => {
                self.bump();
                let cond = self.parse_expr()?;
                let msg = if self.peek().is_op(Op::Comma) {
                    self.bump();
                    Some(self.parse_expr()?)
                } else {
                    None
                };
                StmtKind::Assert { cond, msg }
            }
            TokenKind::Keyword(Kw::Import) => {
                self.bump();
                let module = self.parse_dotted_name()?;
                if self.peek().is_keyword(Kw::As) {
                    self.bump();
                    self.expect_name("alias name after 'as'")?;
                }
                StmtKind::Import {
                    module,
                    names: Vec::new(),
                }
            }
            TokenKind::Keyword(Kw::From) => {
                self.bump();
                let module = self.parse_dotted_name()?;
                if !self.peek().is_keyword(Kw::Import) {
                    return Err(self.err_here("expected 'import'"));
                }
                self.bump();
                let mut names = Vec::new();
                if self.peek().is_op(Op::Star) {
                    self.bump();
                    names.push("*".to_string());
                } else {
                    loop {
                        let (n, _) = self.expect_name("imported name")?;
                        if self.peek().is_keyword(Kw::As) {
                            self.bump();
                            self.expect_name("alias name after 'as'")?;
                        }
                        names.push(n);
                        if self.peek().is_op(Op::Comma) {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                StmtKind::Import { module, names }
            }
            _ => return self.parse_expr_based_stmt(),
        };
        Ok(self.finish_simple(start_tok, kind))
    }

    fn at_stmt_end(&self) -> bool {
        matches!(self.peek().kind, TokenKind::Newline | TokenKind::Eof)
            || self.peek().is_op(Op::Semicolon)
    }

    fn parse_dotted_name(&mut self) -> Result<String, LangError> {
        let (mut name, _) = self.expect_name("module name")?;
        while self.peek().is_op(Op::Dot) {
            self.bump();
            let (part, _) = self.expect_name("module name component")?;
            name.push('.');
            name.push_str(&part);
        }
        Ok(name)
    }

    /// Statement starting with an expression: plain expression, assignment
    /// chain, or augmented assignment.
    fn parse_expr_based_stmt(&mut self) -> Result<Stmt, LangError> {
        let start_tok = self.peek().clone();
        let first = self.parse_testlist()?;

        let aug = match self.peek().kind {
            TokenKind::Op(Op::PlusEq) => Some(BinOpKind::Add),
            TokenKind::Op(Op::MinusEq) => Some(BinOpKind::Sub),
            TokenKind::Op(Op::StarEq) => Some(BinOpKind::Mul),
            TokenKind::Op(Op::SlashEq) => Some(BinOpKind::Div),
            TokenKind::Op(Op::DoubleSlashEq) => Some(BinOpKind::FloorDiv),
            TokenKind::Op(Op::PercentEq) => Some(BinOpKind::Mod),
            TokenKind::Op(Op::DoubleStarEq) => Some(BinOpKind::Pow),
            _ => None,
        };
        if let Some(op) = aug {
            self.bump();
            let value = self.parse_testlist()?;
            let target = self.expr_to_target(first)?;
            if matches!(target, Target::TupleNames { .. }) {
                return Err(self.err_here("augmented assignment target cannot be a tuple"));
            }
            return Ok(self.finish_simple(start_tok, StmtKind::AugAssign { target, op, value }));
        }

        if self.peek().is_op(Op::Eq) {
            let mut exprs = vec![first];
            while self.peek().is_op(Op::Eq) {
                self.bump();
                exprs.push(self.parse_testlist()?);
            }
            let value = exprs.pop().unwrap();
            let targets = exprs
                .into_iter()
                .map(|e| self.expr_to_target(e))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(self.finish_simple(start_tok, StmtKind::Assign { targets, value }));
        }

        Ok(self.finish_simple(start_tok, StmtKind::Expr(first)))
    }

    fn finish_simple(&self, start_tok: Token, kind: StmtKind) -> Stmt {
        let prev = &self.tokens[self.idx.saturating_sub(1)];
        let span = Span::new(start_tok.span.start, prev.span.end);
        Stmt {
            kind,
            span,
            header: HeaderLines {
                first: start_tok.line,
                last: prev.line,
            },
        }
    }

    fn expr_to_target(&self, e: Expr) -> Result<Target, LangError> {
        let span = e.span;
        let line = e.line;
        match e.kind {
            ExprKind::Name(name) => Ok(Target::Name { name, span, line }),
            ExprKind::Attribute { base, attr, .. } => Ok(Target::Attribute {
                base: *base,
                attr,
                span,
            }),
            ExprKind::Subscript { base, index } => Ok(Target::Subscript {
                base: *base,
                index,
                span,
            }),
            ExprKind::Paren(inner) => self.expr_to_target(*inner),
            ExprKind::Tuple { items, .. } => {
                let mut names = Vec::new();
                for item in items {
                    match item.kind {
                        ExprKind::Name(n) => names.push((n, item.span)),
                        _ => {
                            return Err(LangError::syntax(
                                item.line,
                                "only plain names are supported in tuple assignment targets",
                            ))
                        }
                    }
                }
                Ok(Target::TupleNames { names, span, line })
            }
            _ => Err(LangError::syntax(e.line, "cannot assign to this expression")),
        }
    }

    // ---- compound statements ---------------------------------------------

    fn parse_suite(&mut self) -> Result<Vec<Stmt>, LangError> {
        if matches!(self.peek().kind, TokenKind::Newline) {
            self.bump();
            self.skip_newlines();
            if !matches!(self.peek().kind, TokenKind::Indent) {
                return Err(self.err_here("expected an indented block"));
            }
            self.bump();
            let mut body = Vec::new();
            self.skip_newlines();
            while !matches!(self.peek().kind, TokenKind::Dedent | TokenKind::Eof) {
                body.append(&mut self.parse_statement()?);
                self.skip_newlines();
            }
            if matches!(self.peek().kind, TokenKind::Dedent) {
                self.bump();
            }
            if body.is_empty() {
                return Err(self.err_here("expected an indented block"));
            }
            Ok(body)
        } else {
            // Inline suite on the header line.
            self.parse_simple_line()
        }
    }

    fn header_lines(&self, start: &Token, colon: Span) -> HeaderLines {
        let _ = colon;
        let prev = &self.tokens[self.idx.saturating_sub(1)];
        HeaderLines {
            first: start.line,
            last: prev.line,
        }
    }

    fn parse_if(&mut self) -> Result<Stmt, LangError> {
        let start = self.peek().clone();
        self.bump(); // if
        let mut arms = Vec::new();
        let cond = self.parse_expr()?;
        let colon = self.expect_op(Op::Colon, "':' after condition")?;
        let header = self.header_lines(&start, colon);
        let body = self.parse_suite()?;
        arms.push(IfArm {
            cond: Some(cond),
            body,
            header,
        });
        loop {
            if self.peek().is_keyword(Kw::Elif) {
                let arm_start = self.peek().clone();
                self.bump();
                let cond = self.parse_expr()?;
                let colon = self.expect_op(Op::Colon, "':' after condition")?;
                let header = self.header_lines(&arm_start, colon);
                let body = self.parse_suite()?;
                arms.push(IfArm {
                    cond: Some(cond),
                    body,
                    header,
                });
            } else if self.peek().is_keyword(Kw::Else) {
                let arm_start = self.peek().clone();
                self.bump();
                let colon = self.expect_op(Op::Colon, "':' after 'else'")?;
                let header = self.header_lines(&arm_start, colon);
                let body = self.parse_suite()?;
                arms.push(IfArm {
                    cond: None,
                    body,
                    header,
                });
                break;
            } else {
                break;
            }
        }
        Ok(self.finish_compound(start, arms[0].header, StmtKind::If { arms }))
    }

    fn finish_compound(&self, start: Token, header: HeaderLines, kind: StmtKind) -> Stmt {
        let prev = &self.tokens[self.idx.saturating_sub(1)];
        Stmt {
            kind,
            span: Span::new(start.span.start, prev.span.end),
            header,
        }
    }

    fn parse_while(&mut self) -> Result<Stmt, LangError> {
        let start = self.peek().clone();
        self.bump();
        let cond = self.parse_expr()?;
        let colon = self.expect_op(Op::Colon, "':' after condition")?;
        let header = self.header_lines(&start, colon);
        self.loop_depth += 1;
        let body = self.parse_suite();
        self.loop_depth -= 1;
        Ok(self.finish_compound(start, header, StmtKind::While { cond, body: body? }))
    }

    fn parse_for(&mut self) -> Result<Stmt, LangError> {
        let start = self.peek().clone();
        self.bump();
        let target_expr = self.parse_target_list()?;
        let target = self.expr_to_target(target_expr)?;
        match &target {
            Target::Name { .. } | Target::TupleNames { .. } => {}
            _ => {
                return Err(self.err_here(
                    "only plain names are supported as loop targets",
                ))
            }
        }
        if !self.peek().is_keyword(Kw::In) {
            return Err(self.err_here("expected 'in'"));
        }
        self.bump();
        let iter = self.parse_testlist()?;
        let colon = self.expect_op(Op::Colon, "':' after loop header")?;
        let header = self.header_lines(&start, colon);
        self.loop_depth += 1;
        let body = self.parse_suite();
        self.loop_depth -= 1;
        Ok(self.finish_compound(
            start,
            header,
            StmtKind::For {
                target,
                iter,
                body: body?,
            },
        ))
    }

    /// Loop target: comma-separated primaries. Parsing at primary level keeps
    /// the `in` keyword available as the loop separator rather than a
    /// membership operator.
    fn parse_target_list(&mut self) -> Result<Expr, LangError> {
        let first = self.parse_primary()?;
        if !self.peek().is_op(Op::Comma) {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.peek().is_op(Op::Comma) {
            self.bump();
            if self.peek().is_keyword(Kw::In) {
                break;
            }
            items.push(self.parse_primary()?);
        }
        let span = items[0].span.merge(items.last().unwrap().span);
        let line = items[0].line;
        Ok(Expr {
            kind: ExprKind::Tuple {
                items,
                parenthesized: false,
            },
            span,
            line,
        })
    }

    fn parse_def(&mut self) -> Result<Stmt, LangError> {
        let start = self.peek().clone();
        self.bump();
        let (name, name_span) = self.expect_name("function name")?;
        self.expect_op(Op::LParen, "'(' after function name")?;
        let params = self.parse_params(Op::RParen)?;
        self.expect_op(Op::RParen, "')' after parameters")?;
        let colon = self.expect_op(Op::Colon, "':' after function header")?;
        let header = self.header_lines(&start, colon);
        self.fn_depth += 1;
        let saved_loops = self.loop_depth;
        self.loop_depth = 0;
        let body = self.parse_suite();
        self.loop_depth = saved_loops;
        self.fn_depth -= 1;
        Ok(self.finish_compound(
            start,
            header,
            StmtKind::Def {
                name,
                name_span,
                params,
                body: body?,
            },
        ))
    }

    fn parse_params(&mut self, end: Op) -> Result<Vec<Param>, LangError> {
        let mut params: Vec<Param> = Vec::new();
        loop {
            if self.peek().is_op(end) {
                break;
            }
            let (name, _) = self.expect_name("parameter name")?;
            if params.iter().any(|p| p.name == name) {
                return Err(self.err_here(format!("duplicate parameter '{name}'")));
            }
            let default = if self.peek().is_op(Op::Eq) {
                self.bump();
                Some(self.parse_expr()?)
            } else {
                if params.iter().any(|p| p.default.is_some()) {
                    return Err(
                        self.err_here("parameter without default follows parameter with default")
                    );
                }
                None
            };
            params.push(Param { name, default });
            if self.peek().is_op(Op::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        Ok(params)
    }

    fn parse_try(&mut self) -> Result<Stmt, LangError> {
        let start = self.peek().clone();
        self.bump();
        let colon = self.expect_op(Op::Colon, "':' after 'try'")?;
        let header = self.header_lines(&start, colon);
        let body = self.parse_suite()?;
        let mut handlers = Vec::new();
        while self.peek().is_keyword(Kw::Except) {
            let h_start = self.peek().clone();
            self.bump();
            let (filter, alias) = if self.peek().is_op(Op::Colon) {
                (None, None)
            } else {
                let f = self.parse_expr()?;
                let alias = if self.peek().is_keyword(Kw::As) {
                    self.bump();
                    Some(self.expect_name("exception alias")?.0)
                } else {
                    None
                };
                (Some(f), alias)
            };
            let colon = self.expect_op(Op::Colon, "':' after except clause")?;
            let h_header = self.header_lines(&h_start, colon);
            let h_body = self.parse_suite()?;
            handlers.push(ExceptHandler {
                filter,
                alias,
                body: h_body,
                header: h_header,
            });
        }
        let finally = if self.peek().is_keyword(Kw::Finally) {
            let f_start = self.peek().clone();
            self.bump();
            let colon = self.expect_op(Op::Colon, "':' after 'finally'")?;
            let f_header = self.header_lines(&f_start, colon);
            Some((self.parse_suite()?, f_header))
        } else {
            None
        };
        if handlers.is_empty() && finally.is_none() {
            return Err(self.err_here("expected 'except' or 'finally'"));
        }
        Ok(self.finish_compound(
            start,
            header,
            StmtKind::Try {
                body,
                handlers,
                finally,
            },
        ))
    }

    fn parse_with(&mut self) -> Result<Stmt, LangError> {
        let start = self.peek().clone();
        self.bump();
        let ctx = self.parse_expr()?;
        let alias = if self.peek().is_keyword(Kw::As) {
            self.bump();
            Some(self.expect_name("alias name after 'as'")?.0)
        } else {
            None
        };
        let colon = self.expect_op(Op::Colon, "':' after with header")?;
        let header = self.header_lines(&start, colon);
        let body = self.parse_suite()?;
        Ok(self.finish_compound(start, header, StmtKind::With { ctx, alias, body }))
    }

    // ---- expressions -------------------------------------------------------

    /// `testlist`: one or more comma-separated expressions; two or more form
    /// an unparenthesized tuple display.
    fn parse_testlist(&mut self) -> Result<Expr, LangError> {
        let first = self.parse_expr()?;
        if !self.peek().is_op(Op::Comma) {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.peek().is_op(Op::Comma) {
            self.bump();
            if self.testlist_ends() {
                break;
            }
            items.push(self.parse_expr()?);
        }
        let span = items[0].span.merge(items.last().unwrap().span);
        let line = items[0].line;
        Ok(Expr {
            kind: ExprKind::Tuple {
                items,
                parenthesized: false,
            },
            span,
            line,
        })
    }

    fn testlist_ends(&self) -> bool {
        matches!(self.peek().kind, TokenKind::Newline | TokenKind::Eof)
            || self.peek().is_op(Op::Eq)
            || self.peek().is_op(Op::Semicolon)
            || self.peek().is_op(Op::Colon)
            || self.peek().is_op(Op::RParen)
            || self.peek().is_op(Op::RBracket)
            || self.peek().is_op(Op::RBrace)
    }

    pub(crate) fn parse_expr(&mut self) -> Result<Expr, LangError> {
        if self.peek().is_keyword(Kw::Lambda) {
            return self.parse_lambda();
        }
        let value = self.parse_or()?;
        if self.peek().is_keyword(Kw::If) {
            let start = value.span;
            let line = value.line;
            self.bump();
            let cond = self.parse_or()?;
            if !self.peek().is_keyword(Kw::Else) {
                return Err(self.err_here("expected 'else' in conditional expression"));
            }
            self.bump();
            let orelse = self.parse_expr()?;
            let span = start.merge(orelse.span);
            return Ok(Expr {
                kind: ExprKind::Conditional {
                    then: Box::new(value),
                    cond: Box::new(cond),
                    orelse: Box::new(orelse),
                },
                span,
                line,
            });
        }
        Ok(value)
    }

    fn parse_lambda(&mut self) -> Result<Expr, LangError> {
        let start = self.peek().clone();
        self.bump();
        let params = self.parse_params(Op::Colon)?;
        self.expect_op(Op::Colon, "':' in lambda")?;
        self.fn_depth += 1;
        let body = self.parse_expr();
        self.fn_depth -= 1;
        let body = body?;
        let span = start.span.merge(body.span);
        Ok(Expr {
            kind: ExprKind::Lambda {
                params,
                body: Box::new(body),
            },
            span,
            line: start.line,
        })
    }

    fn parse_or(&mut self) -> Result<Expr, LangError> {
        let first = self.parse_and()?;
        if !self.peek().is_keyword(Kw::Or) {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.peek().is_keyword(Kw::Or) {
            self.bump();
            values.push(self.parse_and()?);
        }
        Ok(bool_chain(BoolOpKind::Or, values))
    }

    fn parse_and(&mut self) -> Result<Expr, LangError> {
        let first = self.parse_not()?;
        if !self.peek().is_keyword(Kw::And) {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.peek().is_keyword(Kw::And) {
            self.bump();
            values.push(self.parse_not()?);
        }
        Ok(bool_chain(BoolOpKind::And, values))
    }

    fn parse_not(&mut self) -> Result<Expr, LangError> {
        if self.peek().is_keyword(Kw::Not) {
            let start = self.peek().clone();
            self.bump();
            let operand = self.parse_not()?;
            let span = start.span.merge(operand.span);
            return Ok(Expr {
                kind: ExprKind::Unary {
                    op: UnaryOpKind::Not,
                    operand: Box::new(operand),
                },
                span,
                line: start.line,
            });
        }
        self.parse_comparison()
    }

    fn comparison_op(&mut self) -> Option<CmpOpKind> {
        let op = match &self.peek().kind {
            TokenKind::Op(Op::EqEq) => CmpOpKind::Eq,
            TokenKind::Op(Op::NotEq) => CmpOpKind::NotEq,
            TokenKind::Op(Op::Lt) => CmpOpKind::Lt,
            TokenKind::Op(Op::LtEq) => CmpOpKind::LtEq,
            TokenKind::Op(Op::Gt) => CmpOpKind::Gt,
            TokenKind::Op(Op::GtEq) => CmpOpKind::GtEq,
            TokenKind::Keyword(Kw::In) => CmpOpKind::In,
            TokenKind::Keyword(Kw::Is) => {
                self.bump();
                if self.peek().is_keyword(Kw::Not) {
                    self.bump();
                    return Some(CmpOpKind::IsNot);
                }
                return Some(CmpOpKind::Is);
            }
            TokenKind::Keyword(Kw::Not) if self.peek_at(1).is_keyword(Kw::In) => {
                self.bump();
                self.bump();
                return Some(CmpOpKind::NotIn);
            }
            _ => return None,
        };
        self.bump();
        Some(op)
    }

    fn parse_comparison(&mut self) -> Result<Expr, LangError> {
        let first = self.parse_arith()?;
        let mut rest = Vec::new();
        while let Some(op) = self.comparison_op() {
            rest.push((op, self.parse_arith()?));
        }
        if rest.is_empty() {
            return Ok(first);
        }
        let span = first.span.merge(rest.last().unwrap().1.span);
        let line = first.line;
        Ok(Expr {
            kind: ExprKind::Compare {
                first: Box::new(first),
                rest,
            },
            span,
            line,
        })
    }

    fn parse_arith(&mut self) -> Result<Expr, LangError> {
        let mut left = self.parse_term()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Op(Op::Plus) => BinOpKind::Add,
                TokenKind::Op(Op::Minus) => BinOpKind::Sub,
                _ => break,
            };
            self.bump();
            let right = self.parse_term()?;
            left = binary(left, op, right);
        }
        Ok(left)
    }

    fn parse_term(&mut self) -> Result<Expr, LangError> {
        let mut left = self.parse_factor()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Op(Op::Star) => BinOpKind::Mul,
                TokenKind::Op(Op::Slash) => BinOpKind::Div,
                TokenKind::Op(Op::DoubleSlash) => BinOpKind::FloorDiv,
                TokenKind::Op(Op::Percent) => BinOpKind::Mod,
                _ => break,
            };
            self.bump();
            let right = self.parse_factor()?;
            left = binary(left, op, right);
        }
        Ok(left)
    }

    fn parse_factor(&mut self) -> Result<Expr, LangError> {
        let op = match self.peek().kind {
            TokenKind::Op(Op::Minus) => Some(UnaryOpKind::Neg),
            TokenKind::Op(Op::Plus) => Some(UnaryOpKind::Pos),
            _ => None,
        };
        if let Some(op) = op {
            let start = self.peek().clone();
            self.bump();
            let operand = self.parse_factor()?;
            let span = start.span.merge(operand.span);
            return Ok(Expr {
                kind: ExprKind::Unary {
                    op,
                    operand: Box::new(operand),
                },
                span,
                line: start.line,
            });
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, LangError> {
        let base = self.parse_primary()?;
        if self.peek().is_op(Op::DoubleStar) {
            self.bump();
            let exp = self.parse_factor()?;
            return Ok(binary(base, BinOpKind::Pow, exp));
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> Result<Expr, LangError> {
        let mut expr = self.parse_atom()?;
        loop {
            match self.peek().kind {
                TokenKind::Op(Op::Dot) => {
                    self.bump();
                    let (attr, attr_span) = self.expect_name("attribute name")?;
                    let span = expr.span.merge(attr_span);
                    let line = expr.line;
                    expr = Expr {
                        kind: ExprKind::Attribute {
                            base: Box::new(expr),
                            attr,
                            attr_span,
                        },
                        span,
                        line,
                    };
                }
                TokenKind::Op(Op::LParen) => {
                    self.bump();
                    let (args, kwargs) = self.parse_call_args()?;
                    let rp = self.expect_op(Op::RParen, "')' after call arguments")?;
                    let span = expr.span.merge(rp);
                    let line = expr.line;
                    expr = Expr {
                        kind: ExprKind::Call {
                            callee: Box::new(expr),
                            args,
                            kwargs,
                        },
                        span,
                        line,
                    };
                }
                TokenKind::Op(Op::LBracket) => {
                    self.bump();
                    let index = self.parse_subscript_index()?;
                    let rb = self.expect_op(Op::RBracket, "']' after subscript")?;
                    let span = expr.span.merge(rb);
                    let line = expr.line;
                    expr = Expr {
                        kind: ExprKind::Subscript {
                            base: Box::new(expr),
                            index,
                        },
                        span,
                        line,
                    };
                }
                _ => break,
            }
        }
        Ok(expr)
    }

    fn parse_call_args(&mut self) -> Result<(Vec<Expr>, Vec<(String, Expr)>), LangError> {
        let mut args = Vec::new();
        let mut kwargs: Vec<(String, Expr)> = Vec::new();
        loop {
            if self.peek().is_op(Op::RParen) {
                break;
            }
            // Keyword argument: NAME '=' value (but not NAME '==').
            let is_kwarg = matches!(self.peek().kind, TokenKind::Name(_))
                && self.peek_at(1).is_op(Op::Eq);
            if is_kwarg {
                let (name, _) = self.expect_name("keyword argument name")?;
                self.bump(); // '='
                let value = self.parse_expr()?;
                if kwargs.iter().any(|(n, _)| *n == name) {
                    return Err(self.err_here(format!("duplicate keyword argument '{name}'")));
                }
                kwargs.push((name, value));
            } else {
                if !kwargs.is_empty() {
                    return Err(self.err_here("positional argument after keyword argument"));
                }
                args.push(self.parse_expr()?);
            }
            if self.peek().is_op(Op::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        Ok((args, kwargs))
    }

    fn parse_subscript_index(&mut self) -> Result<SubscriptIndex, LangError> {
        if self.peek().is_op(Op::Colon) {
            self.bump();
            let upper = if self.peek().is_op(Op::RBracket) {
                None
            } else {
                Some(Box::new(self.parse_expr()?))
            };
            return Ok(SubscriptIndex::Slice { lower: None, upper });
        }
        let first = self.parse_expr()?;
        if self.peek().is_op(Op::Colon) {
            self.bump();
            let upper = if self.peek().is_op(Op::RBracket) {
                None
            } else {
                Some(Box::new(self.parse_expr()?))
            };
            return Ok(SubscriptIndex::Slice {
                lower: Some(Box::new(first)),
                upper,
            });
        }
        Ok(SubscriptIndex::Index(Box::new(first)))
    }

    fn parse_atom(&mut self) -> Result<Expr, LangError> {
        let tok = self.peek().clone();
        let expr = match &tok.kind {
            TokenKind::Name(n) => {
                self.bump();
                Expr {
                    kind: ExprKind::Name(n.clone()),
                    span: tok.span,
                    line: tok.line,
                }
            }
            TokenKind::Int(v) => {
                self.bump();
                Expr {
                    kind: ExprKind::Int(*v),
                    span: tok.span,
                    line: tok.line,
                }
            }
            TokenKind::Float(v) => {
                self.bump();
                Expr {
                    kind: ExprKind::Float(*v),
                    span: tok.span,
                    line: tok.line,
                }
            }
            TokenKind::Str(s) => {
                self.bump();
                let mut value = s.clone();
                let mut span = tok.span;
                // Adjacent string literals concatenate.
                while let TokenKind::Str(next) = &self.peek().kind {
                    value.push_str(next);
                    span = span.merge(self.peek().span);
                    self.bump();
                }
                Expr {
                    kind: ExprKind::Str(value),
                    span,
                    line: tok.line,
                }
            }
            TokenKind::Keyword(Kw::None) => {
                self.bump();
                Expr {
                    kind: ExprKind::NoneLit,
                    span: tok.span,
                    line: tok.line,
                }
            }
            TokenKind::Keyword(Kw::True) => {
                self.bump();
                Expr {
                    kind: ExprKind::Bool(true),
                    span: tok.span,
                    line: tok.line,
                }
            }
            TokenKind::Keyword(Kw::False) => {
                self.bump();
                Expr {
                    kind: ExprKind::Bool(false),
                    span: tok.span,
                    line: tok.line,
                }
            }
            TokenKind::Keyword(Kw::Lambda) => self.parse_lambda()?,
            TokenKind::Op(Op::LParen) => {
                self.bump();
                if self.peek().is_op(Op::RParen) {
                    let rp = self.bump().span;
                    Expr {
                        kind: ExprKind::Tuple {
                            items: Vec::new(),
                            parenthesized: true,
                        },
                        span: tok.span.merge(rp),
                        line: tok.line,
                    }
                } else {
                    let first = self.parse_expr()?;
                    if self.peek().is_op(Op::Comma) {
                        let mut items = vec![first];
                        while self.peek().is_op(Op::Comma) {
                            self.bump();
                            if self.peek().is_op(Op::RParen) {
                                break;
                            }
                            items.push(self.parse_expr()?);
                        }
                        let rp = self.expect_op(Op::RParen, "')'")?;
                        Expr {
                            kind: ExprKind::Tuple {
                                items,
                                parenthesized: true,
                            },
                            span: tok.span.merge(rp),
                            line: tok.line,
                        }
                    } else {
                        let rp = self.expect_op(Op::RParen, "')'")?;
                        Expr {
                            kind: ExprKind::Paren(Box::new(first)),
                            span: tok.span.merge(rp),
                            line: tok.line,
                        }
                    }
                }
            }
            TokenKind::Op(Op::LBracket) => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    if self.peek().is_op(Op::RBracket) {
                        break;
                    }
                    items.push(self.parse_expr()?);
                    if self.peek().is_op(Op::Comma) {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let rb = self.expect_op(Op::RBracket, "']'")?;
                Expr {
                    kind: ExprKind::List(items),
                    span: tok.span.merge(rb),
                    line: tok.line,
                }
            }
            TokenKind::Op(Op::LBrace) => {
                self.bump();
                if self.peek().is_op(Op::RBrace) {
                    let rb = self.bump().span;
                    Expr {
                        kind: ExprKind::Dict(Vec::new()),
                        span: tok.span.merge(rb),
                        line: tok.line,
                    }
                } else {
                    let first = self.parse_expr()?;
                    if self.peek().is_op(Op::Colon) {
                        self.bump();
                        let first_v = self.parse_expr()?;
                        let mut pairs = vec![(first, first_v)];
                        while self.peek().is_op(Op::Comma) {
                            self.bump();
                            if self.peek().is_op(Op::RBrace) {
                                break;
                            }
                            let k = self.parse_expr()?;
                            self.expect_op(Op::Colon, "':' in dict display")?;
                            let v = self.parse_expr()?;
                            pairs.push((k, v));
                        }
                        let rb = self.expect_op(Op::RBrace, "'}'")?;
                        Expr {
                            kind: ExprKind::Dict(pairs),
                            span: tok.span.merge(rb),
                            line: tok.line,
                        }
                    } else {
                        let mut items = vec![first];
                        while self.peek().is_op(Op::Comma) {
                            self.bump();
                            if self.peek().is_op(Op::RBrace) {
                                break;
                            }
                            items.push(self.parse_expr()?);
                        }
                        let rb = self.expect_op(Op::RBrace, "'}'")?;
                        Expr {
                            kind: ExprKind::Set(items),
                            span: tok.span.merge(rb),
                            line: tok.line,
                        }
                    }
                }
            }
            TokenKind::Keyword(kw) => {
                return Err(self.err_here(format!(
                    "unexpected keyword '{}'",
                    keyword_text(*kw)
                )))
            }
            other => return Err(self.err_here(format!("unexpected token: {other:?}"))),
        };
        Ok(expr)
    }
}

fn binary(left: Expr, op: BinOpKind, right: Expr) -> Expr {
    let span = left.span.merge(right.span);
    let line = left.line;
    Expr {
        kind: ExprKind::Binary {
            left: Box::new(left),
            op,
            right: Box::new(right),
        },
        span,
        line,
    }
}

fn bool_chain(op: BoolOpKind, values: Vec<Expr>) -> Expr {
    let span = values[0].span.merge(values.last().unwrap().span);
    let line = values[0].line;
    Expr {
        kind: ExprKind::BoolChain { op, values },
        span,
        line,
    }
}

fn keyword_text(kw: Kw) -> &'static str {
    use Kw::*;
    match kw {
        If => "if",
        Elif => "elif",
        Else => "else",
        While => "while",
        For => "for",
        In => "in",
        Def => "def",
        Return => "return",
        Lambda => "lambda",
        Raise => "raise",
        Try => "try",
        Except => "except",
        Finally => "finally",
        With => "with",
        As => "as",
        Import => "import",
        From => "from",
        Pass => "pass",
        Break => "break",
        Continue => "continue",
        And => "and",
        Or => "or",
        Not => "not",
        Is => "is",
        None => "None",
        True => "True",
        False => "False",
        Assert => "assert",
        Class => "class",
        Global => "global",
        Nonlocal => "nonlocal",
        Yield => "yield",
        Del => "del",
        Async => "async",
        Await => "await",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_assignment_and_call() {
        let p = parse_program("x = foo()\n").unwrap();
        assert_eq!(p.body.len(), 1);
        match &p.body[0].kind {
            StmtKind::Assign { targets, value } => {
                assert_eq!(targets.len(), 1);
                assert!(matches!(value.kind, ExprKind::Call { .. }));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn parses_compound_statements() {
        let src = "\
if a:
    b = 1
elif c:
    b = 2
else:
    b = 3
while b > 0:
    b -= 1
for i in [1, 2]:
    print(i)
def f(x, y=2):
    return x + y
try:
    f(1)
except ValueError as e:
    pass
finally:
    pass
with r as h:
    pass
";
        let p = parse_program(src).unwrap();
        assert_eq!(p.body.len(), 6);
    }

    #[test]
    fn inline_suite() {
        let p = parse_program("if x: y = 1; z = 2\n").unwrap();
        match &p.body[0].kind {
            StmtKind::If { arms } => assert_eq!(arms[0].body.len(), 2),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn tuple_assignment() {
        let p = parse_program("a, b = 1, 2\n").unwrap();
        match &p.body[0].kind {
            StmtKind::Assign { targets, .. } => {
                assert!(matches!(targets[0], Target::TupleNames { .. }))
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn chained_comparison() {
        let p = parse_program("r = 0 <= i < n\n").unwrap();
        match &p.body[0].kind {
            StmtKind::Assign { value, .. } => match &value.kind {
                ExprKind::Compare { rest, .. } => assert_eq!(rest.len(), 2),
                other => panic!("unexpected: {other:?}"),
            },
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn rejects_unsupported_keywords() {
        assert!(parse_program("class A:\n    pass\n").is_err());
        assert!(parse_program("yield 1\n").is_err());
        assert!(parse_program("return 1\n").is_err());
        assert!(parse_program("break\n").is_err());
    }

    #[test]
    fn header_lines_of_compound() {
        let p = parse_program("if (a and\n    b):\n    c = 1\n").unwrap();
        assert_eq!(p.body[0].header.first, 1);
        assert_eq!(p.body[0].header.last, 2);
    }

    #[test]
    fn spans_cover_statement_text() {
        let src = "x = foo()\n";
        let p = parse_program(src).unwrap();
        let span = p.body[0].span;
        let text: String = src.chars().skip(span.start).take(span.end - span.start).collect();
        assert_eq!(text, "x = foo()");
    }

    #[test]
    fn lambda_with_zero_params() {
        let p = parse_program("f = lambda: x\n").unwrap();
        match &p.body[0].kind {
            StmtKind::Assign { value, .. } => {
                assert!(matches!(value.kind, ExprKind::Lambda { .. }))
            }
            other => panic!("unexpected: {other:?}"),
        }
    }
}
