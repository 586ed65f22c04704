// SPDX-License-Identifier: Apache-2.0

//! Surface syntax: lexer, recursive-descent parser and pretty-printer.
//!
//! A program is a sequence of top-level items, each starting in column 1:
//!
//! ```text
//! -- comment
//! name : Type
//! name = term
//! ```
//!
//! Continuation lines must be indented. See `docs/grammar.md` for the full
//! grammar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::nat::{NatExpr, NatOp};
use crate::syntax::{
    build, term_to_nat, Gate, Macro, Prim, Rotation, Span, Term, TermKind, Type,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind}: {message}")]
pub struct ParseError {
    pub span: Span,
    pub kind: ParseErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UndefinedName,
    DuplicateDefinition,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UndefinedName => "undefined name",
            ParseErrorKind::DuplicateDefinition => "duplicate definition",
        })
    }
}

fn syntax_err<T>(span: Span, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        span,
        kind: ParseErrorKind::Syntax,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    BitLit(bool),
    Backslash,
    ParamBackslash,
    Dot,
    Colon,
    Cons,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    At,
    TensorOp,
    Star,
    Semi,
    SemiV,
    DotDot,
    Plus,
    Minus,
    Slash,
    Caret,
    Equals,
    Arrow,
    Lolli,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::BitLit(b) => write!(f, "`#{}`", u8::from(*b)),
            other => {
                let s = match other {
                    Tok::Backslash => "\\",
                    Tok::ParamBackslash => "\\'",
                    Tok::Dot => ".",
                    Tok::Colon => ":",
                    Tok::Cons => "::",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::Comma => ",",
                    Tok::At => "@",
                    Tok::TensorOp => "(*)",
                    Tok::Star => "*",
                    Tok::Semi => ";",
                    Tok::SemiV => ";v",
                    Tok::DotDot => "..",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    Tok::Slash => "/",
                    Tok::Caret => "^",
                    Tok::Equals => "=",
                    Tok::Arrow => "->",
                    Tok::Lolli => "-o",
                    _ => unreachable!(),
                };
                write!(f, "`{s}`")
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let peek = |i: usize| chars.get(i).copied();
    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && peek(i + 1) == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let advance = |n: usize, tok: Tok, out: &mut Vec<Token>| {
            out.push(Token { tok, span });
            n
        };
        let n = if is_ident_start(c) {
            let start = i;
            let mut j = i;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            let s: String = chars[start..j].iter().collect();
            advance(j - i, Tok::Ident(s), &mut out)
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let v = s.parse::<u64>().map_err(|_| ParseError {
                span,
                kind: ParseErrorKind::Syntax,
                message: format!("numeral `{s}` is too large"),
            })?;
            advance(j - i, Tok::Num(v), &mut out)
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let three: String = chars[i..(i + 3).min(chars.len())].iter().collect();
            let after = |k: usize| peek(i + k).is_some_and(is_ident_char);
            if three == "(*)" {
                advance(3, Tok::TensorOp, &mut out)
            } else if two == "\\'" {
                advance(2, Tok::ParamBackslash, &mut out)
            } else if two == "::" {
                advance(2, Tok::Cons, &mut out)
            } else if two == ".." {
                advance(2, Tok::DotDot, &mut out)
            } else if two == "->" {
                advance(2, Tok::Arrow, &mut out)
            } else if two == "-o" && !after(2) {
                advance(2, Tok::Lolli, &mut out)
            } else if two == ";v" && !after(2) {
                advance(2, Tok::SemiV, &mut out)
            } else if two == "#0" || two == "#1" {
                advance(2, Tok::BitLit(two == "#1"), &mut out)
            } else {
                let tok = match c {
                    '\\' => Tok::Backslash,
                    '.' => Tok::Dot,
                    ':' => Tok::Colon,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    '@' => Tok::At,
                    '*' => Tok::Star,
                    ';' => Tok::Semi,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '=' => Tok::Equals,
                    _ => return syntax_err(span, format!("unexpected character `{c}`")),
                };
                advance(1, tok, &mut out)
            }
        };
        i += n;
        col += n as u32;
    }
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "let", "in", "ifz", "then", "else", "for", "do", "Vec", "Nat", "Q", "B", "Unit", "meas",
    "new", "H", "CNOT", "Rz", "RzInv", "Rx", "RxInv", "accuMap", "split", "append", "drop",
    "range", "reverse", "map", "fold", "compose", "VNil",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end_span: Span,
}

impl Parser {
    fn new(toks: Vec<Token>, end_span: Span) -> Self {
        Parser {
            toks,
            pos: 0,
            end_span,
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        self.toks.get(self.pos).map_or(self.end_span, |t| t.span)
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek() == Some(tok)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Span, ParseError> {
        let span = self.span();
        if self.eat(&tok) {
            Ok(span)
        } else {
            self.unexpected(&format!("{tok}"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Span, ParseError> {
        let span = self.span();
        if self.at_kw(kw) {
            self.pos += 1;
            Ok(span)
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn unexpected<T>(&self, expected: &str) -> Result<T, ParseError> {
        match self.peek() {
            Some(t) => syntax_err(self.span(), format!("expected {expected}, found {t}")),
            None => syntax_err(self.span(), format!("expected {expected}, found end of input")),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !is_keyword(s) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.unexpected("an identifier"),
        }
    }

    // ---- types ----

    fn ty(&mut self) -> Result<Type, ParseError> {
        if self.at(&Tok::LParen)
            && matches!(self.peek_at(1), Some(Tok::Ident(s)) if !is_keyword(s))
            && self.peek_at(2) == Some(&Tok::Colon)
        {
            self.pos += 1;
            let var = self.ident()?;
            self.expect(Tok::Colon)?;
            let dom = self.ty()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Arrow)?;
            let body = self.ty()?;
            return Ok(Type::pi(var, dom, body));
        }
        let lhs = self.ty_tensor()?;
        if self.eat(&Tok::Lolli) {
            let rhs = self.ty()?;
            return Ok(Type::lolli(lhs, rhs));
        }
        Ok(lhs)
    }

    fn ty_tensor(&mut self) -> Result<Type, ParseError> {
        let lhs = self.ty_app()?;
        if self.eat(&Tok::Star) {
            let rhs = self.ty_tensor()?;
            return Ok(Type::tensor(lhs, rhs));
        }
        Ok(lhs)
    }

    fn ty_app(&mut self) -> Result<Type, ParseError> {
        if self.at_kw("Vec") {
            self.pos += 1;
            let elem = self.ty_atom()?;
            let size = self.nat_atom()?;
            return Ok(Type::vec(elem, size));
        }
        self.ty_atom()
    }

    fn ty_atom(&mut self) -> Result<Type, ParseError> {
        let span = self.span();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let t = match s.as_str() {
                    "Q" => Type::Qubit,
                    "B" => Type::Bit,
                    "Unit" => Type::Unit,
                    "Nat" => Type::Nat,
                    "Vec" => return self.ty_app(),
                    _ => return syntax_err(span, format!("unknown type `{s}`")),
                };
                self.pos += 1;
                Ok(t)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            _ => self.unexpected("a type"),
        }
    }

    fn nat_atom(&mut self) -> Result<NatExpr, ParseError> {
        let span = self.span();
        let t = self.atom()?;
        term_to_nat(&t).ok_or_else(|| ParseError {
            span,
            kind: ParseErrorKind::Syntax,
            message: "expected a size expression".into(),
        })
    }

    fn type_args(&mut self, n: usize, name: &str) -> Result<Vec<Type>, ParseError> {
        let span = self.span();
        if !self.eat(&Tok::LBracket) {
            return syntax_err(span, format!("`{name}` needs {n} type argument(s) in brackets"));
        }
        let mut out = vec![self.ty()?];
        while self.eat(&Tok::Comma) {
            out.push(self.ty()?);
        }
        self.expect(Tok::RBracket)?;
        if out.len() != n {
            return syntax_err(
                span,
                format!("`{name}` takes {n} type argument(s), found {}", out.len()),
            );
        }
        Ok(out)
    }

    // ---- terms ----

    fn at_binder(&self) -> bool {
        matches!(self.peek(), Some(Tok::Backslash) | Some(Tok::ParamBackslash))
            || self.at_kw("let")
            || self.at_kw("ifz")
            || self.at_kw("for")
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let span = self.span();
        if self.eat(&Tok::Backslash) || self.at(&Tok::ParamBackslash) {
            let param = self.eat(&Tok::ParamBackslash);
            let var = self.ident()?;
            let ty = if self.eat(&Tok::Colon) {
                Some(self.ty()?)
            } else {
                None
            };
            self.expect(Tok::Dot)?;
            let body = Box::new(self.term()?);
            let kind = if param {
                TermKind::PLam { var, ty, body }
            } else {
                TermKind::Lam { var, ty, body }
            };
            return Ok(Term::new(kind, span));
        }
        if self.at_kw("let") {
            return self.let_term();
        }
        if self.at_kw("ifz") {
            self.pos += 1;
            let guard = Box::new(self.term()?);
            self.expect_kw("then")?;
            let then = Box::new(self.term()?);
            self.expect_kw("else")?;
            let els = Box::new(self.term()?);
            return Ok(Term::new(TermKind::Ifz { guard, then, els }, span));
        }
        if self.at_kw("for") {
            self.pos += 1;
            let index = self.ident()?;
            self.expect_kw("in")?;
            let list = Box::new(self.term()?);
            self.expect_kw("do")?;
            let body = Box::new(self.term()?);
            return Ok(Term::new(TermKind::For { index, list, body }, span));
        }
        self.seq()
    }

    /// `x`, or `(x : T)`.
    fn pattern_var(&mut self) -> Result<(String, Option<Type>), ParseError> {
        if self.at(&Tok::LParen) {
            self.pos += 1;
            let x = self.ident()?;
            self.expect(Tok::Colon)?;
            let t = self.ty()?;
            self.expect(Tok::RParen)?;
            Ok((x, Some(t)))
        } else {
            Ok((self.ident()?, None))
        }
    }

    fn let_term(&mut self) -> Result<Term, ParseError> {
        let span = self.expect_kw("let")?;
        let (x, xt) = self.pattern_var()?;
        enum Shape {
            Plain,
            Pair,
            Cons,
        }
        let shape = if self.eat(&Tok::TensorOp) {
            Shape::Pair
        } else if self.eat(&Tok::Cons) {
            Shape::Cons
        } else {
            Shape::Plain
        };
        let y = match shape {
            Shape::Plain => None,
            _ => Some(self.pattern_var()?),
        };
        self.expect(Tok::Equals)?;
        let bound = Box::new(self.term()?);
        self.expect_kw("in")?;
        let body = Box::new(self.term()?);
        let kind = match (shape, y) {
            (Shape::Pair, Some((y, yt))) => TermKind::LetPair {
                left: x,
                left_ty: xt,
                right: y,
                right_ty: yt,
                bound,
                body,
            },
            (Shape::Cons, Some((y, yt))) => TermKind::LetCons {
                head: x,
                head_ty: xt,
                tail: y,
                tail_ty: yt,
                bound,
                body,
            },
            _ => {
                // `let x = M in N` is `(\x. N) M`.
                let lam = Term::new(
                    TermKind::Lam {
                        var: x,
                        ty: xt,
                        body,
                    },
                    span,
                );
                TermKind::App(Box::new(lam), bound)
            }
        };
        Ok(Term::new(kind, span))
    }

    fn operand(&mut self, next: fn(&mut Self) -> Result<Term, ParseError>) -> Result<Term, ParseError> {
        if self.at_binder() {
            self.term()
        } else {
            next(self)
        }
    }

    fn seq(&mut self) -> Result<Term, ParseError> {
        let lhs = self.cons()?;
        let span = self.span();
        if self.eat(&Tok::Semi) {
            let rhs = self.operand(Self::seq)?;
            return Ok(Term::new(TermKind::Seq(Box::new(lhs), Box::new(rhs)), span));
        }
        if self.eat(&Tok::SemiV) {
            let rhs = self.operand(Self::seq)?;
            return Ok(Term::new(TermKind::SeqV(Box::new(lhs), Box::new(rhs)), span));
        }
        Ok(lhs)
    }

    fn cons(&mut self) -> Result<Term, ParseError> {
        let lhs = self.tensor()?;
        let span = self.span();
        if self.eat(&Tok::Cons) {
            let rhs = self.operand(Self::cons)?;
            return Ok(Term::new(TermKind::Cons(Box::new(lhs), Box::new(rhs)), span));
        }
        Ok(lhs)
    }

    fn tensor(&mut self) -> Result<Term, ParseError> {
        let lhs = self.range()?;
        let span = self.span();
        if self.eat(&Tok::TensorOp) {
            let rhs = self.operand(Self::tensor)?;
            return Ok(Term::new(TermKind::Pair(Box::new(lhs), Box::new(rhs)), span));
        }
        Ok(lhs)
    }

    fn range(&mut self) -> Result<Term, ParseError> {
        let lhs = self.additive()?;
        let span = self.span();
        if self.eat(&Tok::DotDot) {
            let rhs = self.operand(Self::additive)?;
            let mut t = build::range(lhs, rhs);
            t.span = span;
            return Ok(t);
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let span = self.span();
            let op = if self.eat(&Tok::Plus) {
                NatOp::Add
            } else if self.eat(&Tok::Minus) {
                NatOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.operand(Self::multiplicative)?;
            lhs = Term::new(TermKind::Arith(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn multiplicative(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.power()?;
        loop {
            let span = self.span();
            let op = if self.eat(&Tok::Star) {
                NatOp::Mul
            } else if self.eat(&Tok::Slash) {
                NatOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.operand(Self::power)?;
            lhs = Term::new(TermKind::Arith(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn power(&mut self) -> Result<Term, ParseError> {
        let lhs = self.application()?;
        let span = self.span();
        if self.eat(&Tok::Caret) {
            let rhs = self.operand(Self::power)?;
            return Ok(Term::new(
                TermKind::Arith(NatOp::Pow, Box::new(lhs), Box::new(rhs)),
                span,
            ));
        }
        Ok(lhs)
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Some(Tok::Ident(s)) => !matches!(s.as_str(), "in" | "then" | "else" | "do"),
            Some(Tok::Num(_)) | Some(Tok::BitLit(_)) | Some(Tok::LParen) => true,
            Some(Tok::Backslash) | Some(Tok::ParamBackslash) => true,
            _ => false,
        }
    }

    fn application(&mut self) -> Result<Term, ParseError> {
        let mut head = self.atom()?;
        loop {
            let span = head.span;
            if self.eat(&Tok::At) {
                let arg = self.atom()?;
                head = Term::new(TermKind::PApp(Box::new(head), Box::new(arg)), span);
            } else if self.starts_atom() {
                let arg = self.atom()?;
                head = Term::new(TermKind::App(Box::new(head), Box::new(arg)), span);
            } else {
                return Ok(head);
            }
        }
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let span = self.span();
        if self.at_binder() {
            return self.term();
        }
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return self.unexpected("a term"),
        };
        let kind = match tok {
            Tok::Num(n) => {
                self.pos += 1;
                TermKind::Num(n)
            }
            Tok::BitLit(b) => {
                self.pos += 1;
                TermKind::Bit(b)
            }
            Tok::LParen => {
                self.pos += 1;
                if self.eat(&Tok::RParen) {
                    TermKind::Unit
                } else {
                    let t = self.term()?;
                    self.expect(Tok::RParen)?;
                    return Ok(t);
                }
            }
            Tok::Ident(s) => {
                self.pos += 1;
                match s.as_str() {
                    "meas" => TermKind::Meas,
                    "new" => TermKind::New,
                    "H" => TermKind::Gate(Gate::H),
                    "CNOT" => TermKind::Gate(Gate::Cnot),
                    "Rz" => TermKind::Rot(Rotation::Rz),
                    "RzInv" => TermKind::Rot(Rotation::RzInv),
                    "Rx" => TermKind::Rot(Rotation::Rx),
                    "RxInv" => TermKind::Rot(Rotation::RxInv),
                    "VNil" => {
                        let mut a = self.type_args(1, "VNil")?;
                        TermKind::Nil(a.remove(0))
                    }
                    "accuMap" => {
                        let a = self.type_args(3, "accuMap")?;
                        TermKind::Prim(Prim::AccuMap(a[0].clone(), a[1].clone(), a[2].clone()))
                    }
                    "split" => TermKind::Prim(Prim::Split(self.type_args(1, "split")?.remove(0))),
                    "append" => {
                        TermKind::Prim(Prim::Append(self.type_args(1, "append")?.remove(0)))
                    }
                    "drop" => TermKind::Prim(Prim::Drop),
                    "range" => TermKind::Prim(Prim::Range),
                    "reverse" => TermKind::Prim(Prim::Reverse),
                    "map" => {
                        let a = self.type_args(2, "map")?;
                        TermKind::Macro(Macro::Map(a[0].clone(), a[1].clone()))
                    }
                    "fold" => {
                        let a = self.type_args(2, "fold")?;
                        TermKind::Macro(Macro::Fold(a[0].clone(), a[1].clone()))
                    }
                    "compose" => {
                        TermKind::Macro(Macro::Compose(self.type_args(1, "compose")?.remove(0)))
                    }
                    other if is_keyword(other) => {
                        self.pos -= 1;
                        return self.unexpected("a term");
                    }
                    _ => TermKind::Var(s),
                }
            }
            _ => return self.unexpected("a term"),
        };
        Ok(Term::new(kind, span))
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => syntax_err(self.span(), format!("unexpected {t}")),
        }
    }
}

/// Parses a standalone term.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let toks = lex(text)?;
    let end = toks.last().map_or(Span::new(1, 1), |t| t.span);
    let mut p = Parser::new(toks, end);
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

/// Parses a standalone type.
pub fn parse_type(text: &str) -> Result<Type, ParseError> {
    let toks = lex(text)?;
    let end = toks.last().map_or(Span::new(1, 1), |t| t.span);
    let mut p = Parser::new(toks, end);
    let t = p.ty()?;
    p.finish()?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Definition {
    pub name: String,
    pub ty: Option<Type>,
    pub body: Term,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub defs: Vec<Definition>,
    /// Index into `defs` of the entry definition.
    pub entry: usize,
}

impl Program {
    pub fn get(&self, name: &str) -> Option<&Definition> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn entry(&self) -> &Definition {
        &self.defs[self.entry]
    }

    pub fn with_entry(mut self, name: &str) -> Result<Program, ParseError> {
        match self.defs.iter().position(|d| d.name == name) {
            Some(i) => {
                self.entry = i;
                Ok(self)
            }
            None => Err(ParseError {
                span: Span::UNKNOWN,
                kind: ParseErrorKind::UndefinedName,
                message: format!("no definition named `{name}`"),
            }),
        }
    }

    /// Body of `name` with every reference to an earlier definition
    /// replaced by that definition's (inlined) body.
    pub fn inlined(&self, name: &str) -> Option<Term> {
        let idx = self.defs.iter().position(|d| d.name == name)?;
        let mut done: BTreeMap<&str, Term> = BTreeMap::new();
        for d in &self.defs[..=idx] {
            let mut body = d.body.clone();
            for (dep, dep_body) in done.iter().rev() {
                if body.free_names().contains(*dep) {
                    body = body.subst(dep, dep_body);
                }
            }
            done.insert(&d.name, body);
        }
        done.remove(name)
    }
}

/// Parses a whole program. The entry is `main` if present, else the last
/// definition.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    // Split into items at tokens that start in column 1.
    let mut items: Vec<Vec<Token>> = Vec::new();
    for t in toks {
        if t.span.col == 1 || items.is_empty() {
            if t.span.col != 1 {
                return syntax_err(t.span, "top-level items must start in column 1");
            }
            items.push(Vec::new());
        }
        items.last_mut().unwrap().push(t);
    }
    let mut sigs: BTreeMap<String, (Type, Span)> = BTreeMap::new();
    let mut defs: Vec<Definition> = Vec::new();
    for item in items {
        let end = item.last().unwrap().span;
        let mut p = Parser::new(item, end);
        let span = p.span();
        let name = p.ident()?;
        if p.eat(&Tok::Colon) {
            let ty = p.ty()?;
            p.finish()?;
            if sigs.contains_key(&name) || defs.iter().any(|d| d.name == name) {
                return Err(ParseError {
                    span,
                    kind: ParseErrorKind::DuplicateDefinition,
                    message: format!("signature for `{name}` given twice or after its definition"),
                });
            }
            sigs.insert(name, (ty, span));
        } else {
            p.expect(Tok::Equals)?;
            let body = p.term()?;
            p.finish()?;
            if defs.iter().any(|d| d.name == name) {
                return Err(ParseError {
                    span,
                    kind: ParseErrorKind::DuplicateDefinition,
                    message: format!("`{name}` is defined twice"),
                });
            }
            let ty = sigs.remove(&name).map(|(t, _)| t);
            defs.push(Definition {
                name,
                ty,
                body,
                span,
            });
        }
    }
    if let Some((name, (_, span))) = sigs.into_iter().next() {
        return Err(ParseError {
            span,
            kind: ParseErrorKind::UndefinedName,
            message: format!("signature for `{name}` has no definition"),
        });
    }
    if defs.is_empty() {
        return syntax_err(Span::new(1, 1), "program has no definitions");
    }
    // Definitions are closed apart from references to earlier ones.
    let mut known: BTreeSet<String> = BTreeSet::new();
    for d in &defs {
        for x in d.body.free_names() {
            if !known.contains(&x) {
                let later = defs.iter().any(|e| e.name == x);
                let span = find_var_span(&d.body, &x).unwrap_or(d.span);
                return Err(ParseError {
                    span,
                    kind: ParseErrorKind::UndefinedName,
                    message: if later {
                        format!("`{x}` is defined later; definitions may only use earlier ones")
                    } else {
                        format!("`{x}` is not defined")
                    },
                });
            }
        }
        known.insert(d.name.clone());
    }
    let entry = defs
        .iter()
        .position(|d| d.name == "main")
        .unwrap_or(defs.len() - 1);
    Ok(Program { defs, entry })
}

fn find_var_span(t: &Term, x: &str) -> Option<Span> {
    if let TermKind::Var(y) = &t.kind {
        if y == x {
            return Some(t.span);
        }
    }
    t.children().into_iter().find_map(|c| find_var_span(c, x))
}

// ---- pretty printing ----

/// Precedence levels, lowest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Top,
    Seq,
    Cons,
    Tensor,
    Range,
    Add,
    Mul,
    Pow,
    App,
    Atom,
}

pub fn pretty_print(t: &Term) -> String {
    let mut s = String::new();
    pp(t, Prec::Top, &mut s);
    s
}

pub fn pretty_type(t: &Type) -> String {
    t.to_string()
}

fn type_args(ts: &[&Type]) -> String {
    let parts: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn binder(var: &str, ty: &Option<Type>) -> String {
    match ty {
        Some(t) => format!("{var} : {t}"),
        None => var.to_string(),
    }
}

fn pattern(var: &str, ty: &Option<Type>) -> String {
    match ty {
        Some(t) => format!("({var} : {t})"),
        None => var.to_string(),
    }
}

fn is_range(t: &Term) -> Option<(&Term, &Term)> {
    if let TermKind::PApp(f, hi) = &t.kind {
        if let TermKind::PApp(g, lo) = &f.kind {
            if matches!(g.kind, TermKind::Prim(Prim::Range)) {
                return Some((lo, hi));
            }
        }
    }
    None
}

fn pp(t: &Term, ctx: Prec, out: &mut String) {
    let wrap = |need: Prec, out: &mut String, body: &dyn Fn(&mut String)| {
        if ctx > need {
            out.push('(');
            body(out);
            out.push(')');
        } else {
            body(out);
        }
    };
    match &t.kind {
        TermKind::Var(x) => out.push_str(x),
        TermKind::Bit(b) => out.push_str(if *b { "#1" } else { "#0" }),
        TermKind::Num(n) => out.push_str(&n.to_string()),
        TermKind::Unit => out.push_str("()"),
        TermKind::Nil(ty) => out.push_str(&format!("VNil[{ty}]")),
        TermKind::Meas => out.push_str("meas"),
        TermKind::New => out.push_str("new"),
        TermKind::Gate(Gate::H) => out.push('H'),
        TermKind::Gate(Gate::Cnot) => out.push_str("CNOT"),
        TermKind::Rot(r) => out.push_str(r.name()),
        TermKind::Prim(p) => {
            out.push_str(p.name());
            if !p.type_args().is_empty() {
                out.push_str(&type_args(&p.type_args()));
            }
        }
        TermKind::Macro(m) => {
            out.push_str(m.name());
            out.push_str(&type_args(&m.type_args()));
        }
        TermKind::Lam { var, ty, body } | TermKind::PLam { var, ty, body } => {
            wrap(Prec::Top, out, &|out| {
                out.push_str(if matches!(t.kind, TermKind::Lam { .. }) {
                    "\\"
                } else {
                    "\\'"
                });
                out.push_str(&binder(var, ty));
                out.push_str(". ");
                pp(body, Prec::Top, out);
            })
        }
        TermKind::App(f, a) => {
            if let TermKind::Lam { var, ty, body } = &f.kind {
                // Plain `let`.
                return wrap(Prec::Top, out, &|out| {
                    out.push_str("let ");
                    out.push_str(&pattern(var, ty));
                    out.push_str(" = ");
                    pp(a, Prec::Top, out);
                    out.push_str(" in ");
                    pp(body, Prec::Top, out);
                });
            }
            wrap(Prec::App, out, &|out| {
                pp(f, Prec::App, out);
                out.push(' ');
                pp(a, Prec::Atom, out);
            })
        }
        TermKind::PApp(f, a) => {
            if let Some((lo, hi)) = is_range(t) {
                return wrap(Prec::Range, out, &|out| {
                    pp(lo, Prec::Add, out);
                    out.push_str("..");
                    pp(hi, Prec::Add, out);
                });
            }
            wrap(Prec::App, out, &|out| {
                pp(f, Prec::App, out);
                out.push_str(" @");
                pp(a, Prec::Atom, out);
            })
        }
        TermKind::Pair(a, b) => infix(a, b, " (*) ", Prec::Tensor, Prec::Range, Prec::Tensor, ctx, out),
        TermKind::Cons(a, b) => infix(a, b, " :: ", Prec::Cons, Prec::Tensor, Prec::Cons, ctx, out),
        TermKind::Seq(a, b) => infix(a, b, " ; ", Prec::Seq, Prec::Cons, Prec::Seq, ctx, out),
        TermKind::SeqV(a, b) => infix(a, b, " ;v ", Prec::Seq, Prec::Cons, Prec::Seq, ctx, out),
        TermKind::Arith(op, a, b) => {
            let (p, lp, rp) = match op {
                NatOp::Add | NatOp::Sub => (Prec::Add, Prec::Add, Prec::Mul),
                NatOp::Mul | NatOp::Div => (Prec::Mul, Prec::Mul, Prec::Pow),
                NatOp::Pow => (Prec::Pow, Prec::App, Prec::Pow),
            };
            let sym = format!(" {} ", op.symbol());
            let sym = if *op == NatOp::Pow { "^".to_string() } else { sym };
            infix(a, b, &sym, p, lp, rp, ctx, out)
        }
        TermKind::LetPair {
            left,
            left_ty,
            right,
            right_ty,
            bound,
            body,
        }
        | TermKind::LetCons {
            head: left,
            head_ty: left_ty,
            tail: right,
            tail_ty: right_ty,
            bound,
            body,
        } => {
            let sep = if matches!(t.kind, TermKind::LetPair { .. }) {
                " (*) "
            } else {
                " :: "
            };
            wrap(Prec::Top, out, &|out| {
                out.push_str("let ");
                out.push_str(&pattern(left, left_ty));
                out.push_str(sep);
                out.push_str(&pattern(right, right_ty));
                out.push_str(" = ");
                pp(bound, Prec::Top, out);
                out.push_str(" in ");
                pp(body, Prec::Top, out);
            })
        }
        TermKind::Ifz { guard, then, els } => wrap(Prec::Top, out, &|out| {
            out.push_str("ifz ");
            pp(guard, Prec::Top, out);
            out.push_str(" then ");
            pp(then, Prec::Top, out);
            out.push_str(" else ");
            pp(els, Prec::Top, out);
        }),
        TermKind::For { index, list, body } => wrap(Prec::Top, out, &|out| {
            out.push_str("for ");
            out.push_str(index);
            out.push_str(" in ");
            pp(list, Prec::Top, out);
            out.push_str(" do ");
            pp(body, Prec::Top, out);
        }),
    }
}

#[allow(clippy::too_many_arguments)]
fn infix(a: &Term, b: &Term, sym: &str, p: Prec, lp: Prec, rp: Prec, ctx: Prec, out: &mut String) {
    let paren = ctx > p;
    if paren {
        out.push('(');
    }
    pp(a, lp, out);
    out.push_str(sym);
    pp(b, rp, out);
    if paren {
        out.push(')');
    }
}
