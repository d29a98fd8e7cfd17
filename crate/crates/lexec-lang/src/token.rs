//! Lexical tokens of the snippet language.
//!
//! All offsets are *character* offsets into the original source, not byte
//! offsets, so downstream consumers can splice text independently of the
//! encoding of identifiers and string literals.

/// A half-open character range `[start, end)` into the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn merge(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    If,
    Elif,
    Else,
    While,
    For,
    In,
    Def,
    Return,
    Lambda,
    Raise,
    Try,
    Except,
    Finally,
    With,
    As,
    Import,
    From,
    Pass,
    Break,
    Continue,
    And,
    Or,
    Not,
    Is,
    None,
    True,
    False,
    Assert,
    // Recognized but unsupported; the parser reports them as such so that
    // snippets using them count as non-executable instead of misparsing.
    Class,
    Global,
    Nonlocal,
    Yield,
    Del,
    Async,
    Await,
}

impl Keyword {
    pub fn from_ident(s: &str) -> Option<Keyword> {
        use Keyword::*;
        Some(match s {
            "if" => If,
            "elif" => Elif,
            "else" => Else,
            "while" => While,
            "for" => For,
            "in" => In,
            "def" => Def,
            "return" => Return,
            "lambda" => Lambda,
            "raise" => Raise,
            "try" => Try,
            "except" => Except,
            "finally" => Finally,
            "with" => With,
            "as" => As,
            "import" => Import,
            "from" => From,
            "pass" => Pass,
            "break" => Break,
            "continue" => Continue,
            "and" => And,
            "or" => Or,
            "not" => Not,
            "is" => Is,
            "None" => None,
            "True" => True,
            "False" => False,
            "assert" => Assert,
            "class" => Class,
            "global" => Global,
            "nonlocal" => Nonlocal,
            "yield" => Yield,
            "del" => Del,
            "async" => Async,
            "await" => Await,
            _ => return Option::None,
        })
    }

    pub fn is_unsupported(self) -> bool {
        use Keyword::*;
        matches!(
            self,
            Class | Global | Nonlocal | Yield | Del | Async | Await
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Plus,
    Minus,
    Star,
    Slash,
    DoubleSlash,
    Percent,
    DoubleStar,
    Eq,         // =
    EqEq,       // ==
    NotEq,      // !=
    Lt,
    LtEq,
    Gt,
    GtEq,
    PlusEq,
    MinusEq,
    StarEq,
    SlashEq,
    DoubleSlashEq,
    PercentEq,
    DoubleStarEq,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
    Semicolon,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    Keyword(Keyword),
    Op(Op),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    /// 1-based line of the token's first character.
    pub line: u32,
}

impl Token {
    pub fn is_op(&self, op: Op) -> bool {
        matches!(self.kind, TokenKind::Op(o) if o == op)
    }

    pub fn is_keyword(&self, kw: Keyword) -> bool {
        matches!(self.kind, TokenKind::Keyword(k) if k == kw)
    }
}
