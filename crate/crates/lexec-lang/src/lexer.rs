//! Indentation-aware lexer.
//!
//! Produces a flat token stream with `Indent`/`Dedent`/`Newline` structure
//! tokens, plus the set of physical lines that carry at least one lexical
//! token. That set is the denominator used for line-coverage accounting:
//! blank lines and comment-only lines never appear in it, while every line
//! touched by a real token (including the interior lines of a triple-quoted
//! string) does.

use std::collections::BTreeSet;

use crate::token::{Keyword, Op, Span, Token, TokenKind};
use crate::LangError;

#[derive(Debug, Clone)]
pub struct LexOutput {
    pub tokens: Vec<Token>,
    /// 1-based lines containing at least one non-comment token.
    pub code_lines: BTreeSet<u32>,
    /// Total number of physical lines in the source.
    pub line_count: u32,
}

impl LexOutput {
    /// Lexical tokens only (no newline/indent structure), in source order.
    pub fn lexical_tokens(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| {
            !matches!(
                t.kind,
                TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent | TokenKind::Eof
            )
        })
    }
}

pub fn lex(source: &str) -> Result<LexOutput, LangError> {
    let chars: Vec<char> = source.chars().collect();
    let mut lx = Lexer {
        chars: &chars,
        pos: 0,
        line: 1,
        depth: 0,
        indents: vec![0],
        tokens: Vec::new(),
        code_lines: BTreeSet::new(),
    };
    lx.run()?;
    let line_count = source.lines().count().max(1) as u32;
    Ok(LexOutput {
        tokens: lx.tokens,
        code_lines: lx.code_lines,
        line_count,
    })
}

struct Lexer<'a> {
    chars: &'a [char],
    pos: usize,
    line: u32,
    depth: usize,
    indents: Vec<usize>,
    tokens: Vec<Token>,
    code_lines: BTreeSet<u32>,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c == Some('\n') {
            self.line += 1;
        }
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn err(&self, msg: impl Into<String>) -> LangError {
        LangError::syntax(self.line, msg)
    }

    fn emit(&mut self, kind: TokenKind, start: usize, start_line: u32) {
        let lexical = !matches!(
            kind,
            TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent | TokenKind::Eof
        );
        if lexical {
            for l in start_line..=self.line {
                self.code_lines.insert(l);
            }
        }
        self.tokens.push(Token {
            kind,
            span: Span::new(start, self.pos),
            line: start_line,
        });
    }

    fn run(&mut self) -> Result<(), LangError> {
        'lines: loop {
            // Start of a logical line: measure indentation, skipping blank
            // and comment-only lines entirely.
            let indent = loop {
                let mut col = 0usize;
                loop {
                    match self.peek() {
                        Some(' ') => {
                            col += 1;
                            self.pos += 1;
                        }
                        Some('\t') => {
                            col = col / 8 * 8 + 8;
                            self.pos += 1;
                        }
                        _ => break,
                    }
                }
                match self.peek() {
                    None => {
                        self.finish();
                        return Ok(());
                    }
                    Some('\n') => {
                        self.bump();
                    }
                    Some('#') => {
                        self.skip_comment();
                        if self.peek() == Some('\n') {
                            self.bump();
                        }
                    }
                    Some('\r') => {
                        self.pos += 1;
                    }
                    _ => break col,
                }
            };

            let top = *self.indents.last().unwrap();
            if indent > top {
                self.indents.push(indent);
                self.emit(TokenKind::Indent, self.pos, self.line);
            } else if indent < top {
                while indent < *self.indents.last().unwrap() {
                    self.indents.pop();
                    self.emit(TokenKind::Dedent, self.pos, self.line);
                }
                if indent != *self.indents.last().unwrap() {
                    return Err(self.err("unindent does not match any outer indentation level"));
                }
            }

            // Tokens of the logical line.
            loop {
                match self.peek() {
                    None => {
                        if self.depth > 0 {
                            return Err(self.err("unexpected end of file inside brackets"));
                        }
                        self.emit(TokenKind::Newline, self.pos, self.line);
                        self.finish();
                        return Ok(());
                    }
                    Some(' ') | Some('\t') | Some('\r') => {
                        self.pos += 1;
                    }
                    Some('\n') => {
                        if self.depth == 0 {
                            let start = self.pos;
                            let line = self.line;
                            self.bump();
                            self.emit(TokenKind::Newline, start, line);
                            continue 'lines;
                        }
                        self.bump();
                    }
                    Some('#') => {
                        self.skip_comment();
                    }
                    Some('\\') if self.peek_at(1) == Some('\n') => {
                        // Explicit line continuation.
                        self.pos += 1;
                        self.bump();
                    }
                    Some(c) if c.is_alphabetic() || c == '_' => self.lex_name(),
                    Some(c) if c.is_ascii_digit() => self.lex_number()?,
                    Some('.') if self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) => {
                        self.lex_number()?
                    }
                    Some('\'') | Some('"') => self.lex_string()?,
                    Some(_) => self.lex_operator()?,
                }
            }
        }
    }

    fn finish(&mut self) {
        while self.indents.len() > 1 {
            self.indents.pop();
            self.emit(TokenKind::Dedent, self.pos, self.line);
        }
        self.emit(TokenKind::Eof, self.pos, self.line);
    }

    fn skip_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.pos += 1;
        }
    }

    fn lex_name(&mut self) {
        let start = self.pos;
        let line = self.line;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let kind = match Keyword::from_str(&text) {
            Some(kw) => TokenKind::Keyword(kw),
            None => TokenKind::Name(text),
        };
        self.emit(kind, start, line);
    }

    fn lex_number(&mut self) -> Result<(), LangError> {
        let start = self.pos;
        let line = self.line;
        let mut is_float = false;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some('.') && self.peek_at(1) != Some('.') {
            // Attribute access on an int literal (`1 .x`) is not a thing we
            // support; a dot always extends the number unless followed by a
            // name start.
            let next = self.peek_at(1);
            if !next.is_some_and(|c| c.is_alphabetic() || c == '_') {
                is_float = true;
                self.pos += 1;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let mut off = 1;
            if matches!(self.peek_at(1), Some('+') | Some('-')) {
                off = 2;
            }
            if self.peek_at(off).is_some_and(|c| c.is_ascii_digit()) {
                is_float = true;
                self.pos += off;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let kind = if is_float {
            let v: f64 = text
                .parse()
                .map_err(|_| self.err(format!("invalid float literal '{text}'")))?;
            TokenKind::Float(v)
        } else {
            match text.parse::<i64>() {
                Ok(v) => TokenKind::Int(v),
                // Out-of-range integer literals degrade to floats.
                Err(_) => {
                    let v: f64 = text
                        .parse()
                        .map_err(|_| self.err(format!("invalid number literal '{text}'")))?;
                    TokenKind::Float(v)
                }
            }
        };
        self.emit(kind, start, line);
        Ok(())
    }

    fn lex_string(&mut self) -> Result<(), LangError> {
        let start = self.pos;
        let start_line = self.line;
        let quote = self.bump().unwrap();
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        let mut value = String::new();
        loop {
            match self.peek() {
                None => {
                    return Err(LangError::syntax(
                        start_line,
                        "unterminated string literal",
                    ))
                }
                Some('\n') if !triple => {
                    return Err(LangError::syntax(
                        start_line,
                        "unterminated string literal",
                    ))
                }
                Some('\\') => {
                    self.bump();
                    match self.bump() {
                        Some('n') => value.push('\n'),
                        Some('t') => value.push('\t'),
                        Some('r') => value.push('\r'),
                        Some('\\') => value.push('\\'),
                        Some('\'') => value.push('\''),
                        Some('"') => value.push('"'),
                        Some('0') => value.push('\0'),
                        Some('\n') => {}
                        Some(other) => {
                            value.push('\\');
                            value.push(other);
                        }
                        None => {
                            return Err(LangError::syntax(
                                start_line,
                                "unterminated string literal",
                            ))
                        }
                    }
                }
                Some(c) if c == quote => {
                    if triple {
                        if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                            self.bump();
                            self.bump();
                            self.bump();
                            break;
                        }
                        self.bump();
                        value.push(c);
                    } else {
                        self.bump();
                        break;
                    }
                }
                Some(c) => {
                    self.bump();
                    value.push(c);
                }
            }
        }
        self.emit(TokenKind::Str(value), start, start_line);
        Ok(())
    }

    fn lex_operator(&mut self) -> Result<(), LangError> {
        let start = self.pos;
        let line = self.line;
        let c = self.peek().unwrap();
        let two: String = self.chars[self.pos..(self.pos + 2).min(self.chars.len())]
            .iter()
            .collect();
        let three: String = self.chars[self.pos..(self.pos + 3).min(self.chars.len())]
            .iter()
            .collect();
        let (op, len) = match three.as_str() {
            "**=" => (Op::DoubleStarEq, 3),
            "//=" => (Op::DoubleSlashEq, 3),
            _ => match two.as_str() {
                "==" => (Op::EqEq, 2),
                "!=" => (Op::NotEq, 2),
                "<=" => (Op::LtEq, 2),
                ">=" => (Op::GtEq, 2),
                "+=" => (Op::PlusEq, 2),
                "-=" => (Op::MinusEq, 2),
                "*=" => (Op::StarEq, 2),
                "/=" => (Op::SlashEq, 2),
                "%=" => (Op::PercentEq, 2),
                "**" => (Op::DoubleStar, 2),
                "//" => (Op::DoubleSlash, 2),
                _ => match c {
                    '+' => (Op::Plus, 1),
                    '-' => (Op::Minus, 1),
                    '*' => (Op::Star, 1),
                    '/' => (Op::Slash, 1),
                    '%' => (Op::Percent, 1),
                    '=' => (Op::Eq, 1),
                    '<' => (Op::Lt, 1),
                    '>' => (Op::Gt, 1),
                    '(' => (Op::LParen, 1),
                    ')' => (Op::RParen, 1),
                    '[' => (Op::LBracket, 1),
                    ']' => (Op::RBracket, 1),
                    '{' => (Op::LBrace, 1),
                    '}' => (Op::RBrace, 1),
                    ',' => (Op::Comma, 1),
                    ':' => (Op::Colon, 1),
                    '.' => (Op::Dot, 1),
                    ';' => (Op::Semicolon, 1),
                    _ => return Err(self.err(format!("unexpected character {c:?}"))),
                },
            },
        };
        match op {
            Op::LParen | Op::LBracket | Op::LBrace => self.depth += 1,
            Op::RParen | Op::RBracket | Op::RBrace => {
                self.depth = self.depth.saturating_sub(1);
            }
            _ => {}
        }
        self.pos += len;
        self.emit(TokenKind::Op(op), start, line);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        lex(src).unwrap().tokens.into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn simple_assignment() {
        let ks = kinds("x = 1\n");
        assert_eq!(
            ks,
            vec![
                TokenKind::Name("x".into()),
                TokenKind::Op(Op::Eq),
                TokenKind::Int(1),
                TokenKind::Newline,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn indentation_blocks() {
        let ks = kinds("if x:\n    y = 1\nz = 2\n");
        assert!(ks.contains(&TokenKind::Indent));
        assert!(ks.contains(&TokenKind::Dedent));
    }

    #[test]
    fn brackets_suppress_newlines() {
        let out = lex("x = [1,\n     2]\n").unwrap();
        let newlines = out
            .tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Newline)
            .count();
        assert_eq!(newlines, 1);
    }

    #[test]
    fn code_lines_skip_blanks_and_comments() {
        let out = lex("x = 1\n\n# comment\ny = 2\n").unwrap();
        let lines: Vec<u32> = out.code_lines.iter().copied().collect();
        assert_eq!(lines, vec![1, 4]);
    }

    #[test]
    fn hash_inside_string_counts_as_code() {
        let out = lex("s = 'a # b'\n").unwrap();
        assert!(out.code_lines.contains(&1));
        let strs: Vec<&TokenKind> = out
            .tokens
            .iter()
            .map(|t| &t.kind)
            .filter(|k| matches!(k, TokenKind::Str(_)))
            .collect();
        assert_eq!(strs, vec![&TokenKind::Str("a # b".into())]);
    }

    #[test]
    fn triple_quoted_string_spans_lines() {
        let out = lex("s = \"\"\"a\nb\nc\"\"\"\nx = 1\n").unwrap();
        assert!(out.code_lines.contains(&1));
        assert!(out.code_lines.contains(&2));
        assert!(out.code_lines.contains(&3));
        assert!(out.code_lines.contains(&4));
    }

    #[test]
    fn spans_are_char_offsets() {
        let out = lex("s = 'héllo'\nx = 1\n").unwrap();
        let name_x = out
            .tokens
            .iter()
            .find(|t| t.kind == TokenKind::Name("x".into()))
            .unwrap();
        // 's', ' ', '=', ' ', then a 7-char string literal, newline.
        assert_eq!(name_x.span.start, 12);
    }

    #[test]
    fn unterminated_string_is_error() {
        assert!(lex("s = 'abc\n").is_err());
    }

    #[test]
    fn float_and_int_literals() {
        let ks = kinds("a = 1.5e3\nb = 10\nc = .5\n");
        assert!(ks.contains(&TokenKind::Float(1500.0)));
        assert!(ks.contains(&TokenKind::Int(10)));
        assert!(ks.contains(&TokenKind::Float(0.5)));
    }
}
