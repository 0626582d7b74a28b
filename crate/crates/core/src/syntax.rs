//! Text syntax for signatures, formulas and `.lp` programs.
//!
//! ```text
//! formula := "forall" var+ "." formula | "exists" var+ "." formula | guard | impl
//! guard   := term "=" term "->" formula
//! impl    := iff { "," iff } [ "->" formula ]      (a list needs the arrow)
//! iff     := or_f { ("<->" | "xor") or_f }
//! or_f    := and_f { "\/" and_f }
//! and_f   := unary { "/\" unary }
//! unary   := "not" unary | atom
//! atom    := "false" | NAME [ "(" term {"," term} ")" ] | "(" formula ")"
//! term    := NAME | NAT | NAME "(" term {"," term} ")"
//! ```
//!
//! Bound variable sorts are inferred from the argument positions they occur
//! in. Unbound names in ack positions are constants when declared and free
//! variables otherwise. Names `#0`, `#1`, ... are the constants minted
//! during play; `#` followed by anything else starts a comment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::formula::{fresh_name, Binder, Builtin, CoreError, Formula, Signature, Sort, SurfaceFormula, Term};

/// Source text with an origin used in diagnostics.
#[derive(Debug, Clone)]
pub struct SourceText {
    pub text: String,
    pub origin: String,
}

impl SourceText {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceText { text: text.into(), origin: origin.into() }
    }

    pub fn inline(text: impl Into<String>) -> Self {
        SourceText::new(text, "<inline>")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{origin}:{line}:{col}: {message}")]
pub struct SyntaxError {
    pub origin: String,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(u64),
    LParen,
    RParen,
    Comma,
    Dot,
    Arrow,
    Iff,
    Or,
    And,
    Eq,
    Colon,
    Star,
    Slash,
    Assign,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Nat(k) => write!(f, "`{k}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Iff => f.write_str("`<->`"),
            Tok::Or => f.write_str("`\\/`"),
            Tok::And => f.write_str("`/\\`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Assign => f.write_str("`:=`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

fn lex(src: &SourceText) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
    let mut out = Vec::new();
    for (lno, line) in src.text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos { line: lno + 1, col: i + 1 };
            let err = |message: String| SyntaxError {
                origin: src.origin.clone(),
                line: pos.line,
                col: pos.col,
                message,
            };
            let next = chars.get(i + 1).copied();
            let (tok, len) = match c {
                '#' if next.is_some_and(|d| d.is_ascii_digit()) => {
                    let end = (i + 1..chars.len()).find(|&j| !chars[j].is_ascii_digit()).unwrap_or(chars.len());
                    (Tok::Ident(chars[i..end].iter().collect()), end - i)
                }
                '#' => break,
                c if c.is_whitespace() => {
                    i += 1;
                    continue;
                }
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                ',' => (Tok::Comma, 1),
                '.' => (Tok::Dot, 1),
                '=' => (Tok::Eq, 1),
                '*' => (Tok::Star, 1),
                '-' if next == Some('>') => (Tok::Arrow, 2),
                '<' if next == Some('-') && chars.get(i + 2) == Some(&'>') => (Tok::Iff, 3),
                '\\' if next == Some('/') => (Tok::Or, 2),
                '/' if next == Some('\\') => (Tok::And, 2),
                '/' => (Tok::Slash, 1),
                ':' if next == Some('=') => (Tok::Assign, 2),
                ':' => (Tok::Colon, 1),
                c if c.is_ascii_digit() => {
                    let end = (i..chars.len()).find(|&j| !chars[j].is_ascii_digit()).unwrap_or(chars.len());
                    let digits: String = chars[i..end].iter().collect();
                    let k = digits.parse::<u64>().map_err(|_| err(format!("integer literal `{digits}` too large")))?;
                    (Tok::Nat(k), end - i)
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let end = (i..chars.len())
                        .find(|&j| !(chars[j].is_ascii_alphanumeric() || chars[j] == '_' || chars[j] == '\''))
                        .unwrap_or(chars.len());
                    (Tok::Ident(chars[i..end].iter().collect()), end - i)
                }
                other => return Err(err(format!("unexpected character `{other}`"))),
            };
            out.push((tok, pos));
            i += len;
        }
    }
    Ok(out)
}

const KEYWORDS: [&str; 9] = ["forall", "exists", "not", "false", "xor", "pred", "fun", "const", "formula"];

#[derive(Debug, Clone)]
enum RawTerm {
    Name(String, Pos),
    Nat(u64),
    App(String, Vec<RawTerm>, Pos),
}

#[derive(Debug, Clone)]
enum Raw {
    Falsum,
    Atom(String, Vec<RawTerm>, Pos),
    Implies(Box<Raw>, Box<Raw>),
    Forall(String, Box<Raw>),
    Exists(String, Box<Raw>),
    Guard(RawTerm, RawTerm, Box<Raw>),
    Not(Box<Raw>),
    And(Box<Raw>, Box<Raw>),
    Or(Box<Raw>, Box<Raw>),
    Iff(Box<Raw>, Box<Raw>),
    Xor(Box<Raw>, Box<Raw>),
}

struct Parser<'a> {
    toks: &'a [(Tok, Pos)],
    idx: usize,
    origin: &'a str,
    end: Pos,
}

impl<'a> Parser<'a> {
    fn new(toks: &'a [(Tok, Pos)], origin: &'a str) -> Self {
        let end = toks.last().map(|(_, p)| Pos { line: p.line, col: p.col + 1 }).unwrap_or(Pos { line: 1, col: 1 });
        Parser { toks, idx: 0, origin, end }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.idx).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn error_at(&self, pos: Pos, message: impl Into<String>) -> SyntaxError {
        SyntaxError { origin: self.origin.to_string(), line: pos.line, col: pos.col, message: message.into() }
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        self.error_at(self.pos(), message)
    }

    fn unexpected(&self, wanted: &str) -> SyntaxError {
        match self.peek() {
            Some(t) => self.error(format!("expected {wanted}, found {t}")),
            None => self.error(format!("expected {wanted}, found end of input")),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), SyntaxError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.unexpected(&t.to_string()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn ident(&mut self) -> Result<(String, Pos), SyntaxError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.idx += 1;
                Ok((s, pos))
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    fn at_end(&self) -> bool {
        self.idx >= self.toks.len()
    }

    fn formula(&mut self) -> Result<Raw, SyntaxError> {
        if self.is_kw("forall") || self.is_kw("exists") {
            return self.quantifier();
        }
        let save = self.idx;
        if let Ok(t) = self.term() {
            if self.eat(&Tok::Eq) {
                let u = self.term()?;
                if !self.eat(&Tok::Arrow) {
                    return Err(self.error("an equation is not a formula; expected `->` after it"));
                }
                let body = self.formula()?;
                return Ok(Raw::Guard(t, u, Box::new(body)));
            }
        }
        self.idx = save;
        self.implication()
    }

    fn quantifier(&mut self) -> Result<Raw, SyntaxError> {
        let universal = self.is_kw("forall");
        self.idx += 1;
        let mut names = vec![self.ident()?.0];
        while let Some(Tok::Ident(s)) = self.peek() {
            if KEYWORDS.contains(&s.as_str()) {
                break;
            }
            names.push(self.ident()?.0);
        }
        self.expect(&Tok::Dot)?;
        let body = self.formula()?;
        Ok(names.into_iter().rev().fold(body, |acc, n| {
            if universal {
                Raw::Forall(n, Box::new(acc))
            } else {
                Raw::Exists(n, Box::new(acc))
            }
        }))
    }

    fn implication(&mut self) -> Result<Raw, SyntaxError> {
        let mut premises = vec![self.iff()?];
        while self.eat(&Tok::Comma) {
            premises.push(self.iff()?);
        }
        if self.eat(&Tok::Arrow) {
            let rest = self.formula()?;
            Ok(premises.into_iter().rev().fold(rest, |acc, p| Raw::Implies(Box::new(p), Box::new(acc))))
        } else if premises.len() > 1 {
            Err(self.unexpected("`->` after a premise list"))
        } else {
            Ok(premises.pop().expect("one premise"))
        }
    }

    fn iff(&mut self) -> Result<Raw, SyntaxError> {
        let mut left = self.or()?;
        loop {
            if self.eat(&Tok::Iff) {
                left = Raw::Iff(Box::new(left), Box::new(self.or()?));
            } else if self.is_kw("xor") {
                self.idx += 1;
                left = Raw::Xor(Box::new(left), Box::new(self.or()?));
            } else {
                return Ok(left);
            }
        }
    }

    fn or(&mut self) -> Result<Raw, SyntaxError> {
        let mut left = self.and()?;
        while self.eat(&Tok::Or) {
            left = Raw::Or(Box::new(left), Box::new(self.and()?));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Raw, SyntaxError> {
        let mut left = self.unary()?;
        while self.eat(&Tok::And) {
            left = Raw::And(Box::new(left), Box::new(self.unary()?));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Raw, SyntaxError> {
        if self.is_kw("not") {
            self.idx += 1;
            return Ok(Raw::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Raw, SyntaxError> {
        if self.is_kw("false") {
            self.idx += 1;
            return Ok(Raw::Falsum);
        }
        if self.is_kw("forall") || self.is_kw("exists") {
            return self.quantifier();
        }
        if self.eat(&Tok::LParen) {
            let f = self.formula()?;
            self.expect(&Tok::RParen)?;
            return Ok(f);
        }
        let (name, pos) = self.ident().map_err(|_| self.unexpected("a formula"))?;
        let args = if self.eat(&Tok::LParen) { self.term_list()? } else { vec![] };
        Ok(Raw::Atom(name, args, pos))
    }

    fn term_list(&mut self) -> Result<Vec<RawTerm>, SyntaxError> {
        let mut args = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            args.push(self.term()?);
        }
        self.expect(&Tok::RParen)?;
        Ok(args)
    }

    fn term(&mut self) -> Result<RawTerm, SyntaxError> {
        if let Some(Tok::Nat(k)) = self.peek() {
            let k = *k;
            self.idx += 1;
            return Ok(RawTerm::Nat(k));
        }
        let (name, pos) = self.ident()?;
        if self.eat(&Tok::LParen) {
            Ok(RawTerm::App(name, self.term_list()?, pos))
        } else {
            Ok(RawTerm::Name(name, pos))
        }
    }
}

/// Sort inference and name resolution against a signature.
struct Resolver<'a> {
    sig: &'a Signature,
    origin: &'a str,
    scope: Vec<(String, usize)>,
    slots: Vec<(String, Option<Sort>)>,
    free: BTreeMap<String, Sort>,
}

impl<'a> Resolver<'a> {
    fn err(&self, pos: Pos, message: String) -> SyntaxError {
        SyntaxError { origin: self.origin.to_string(), line: pos.line, col: pos.col, message }
    }

    fn lookup(&self, name: &str) -> Option<usize> {
        self.scope.iter().rev().find(|(n, _)| n == name).map(|(_, s)| *s)
    }

    fn constrain_name(&mut self, name: &str, sort: Sort, pos: Pos) -> Result<(), SyntaxError> {
        if let Some(slot) = self.lookup(name) {
            match self.slots[slot].1 {
                Some(s) if s != sort => {
                    return Err(self.err(pos, format!("sort conflict: `{name}` used as {s} and as {sort}")))
                }
                _ => self.slots[slot].1 = Some(sort),
            }
            return Ok(());
        }
        match sort {
            Sort::Ack if self.sig.is_constant(name) => Ok(()),
            Sort::Int if self.sig.function(name).map(|d| d.arity == 0).unwrap_or(false) => Ok(()),
            _ if self.sig.predicate(name).is_some() || self.sig.function(name).is_some() || self.sig.is_constant(name) => {
                Err(self.err(pos, format!("sort conflict: `{name}` cannot be used as a {sort} term")))
            }
            _ => match self.free.get(name) {
                Some(s) if *s != sort => {
                    Err(self.err(pos, format!("sort conflict: free variable `{name}` used as {s} and as {sort}")))
                }
                _ => {
                    self.free.insert(name.to_string(), sort);
                    Ok(())
                }
            },
        }
    }

    fn infer_term(&mut self, t: &RawTerm, sort: Sort) -> Result<(), SyntaxError> {
        match t {
            RawTerm::Name(n, pos) => self.constrain_name(n, sort, *pos),
            RawTerm::Nat(k) => match sort {
                Sort::Int => Ok(()),
                Sort::Ack => Err(SyntaxError {
                    origin: self.origin.to_string(),
                    line: 0,
                    col: 0,
                    message: format!("sort conflict: integer `{k}` in an ack position"),
                }),
            },
            RawTerm::App(g, args, pos) => {
                if sort == Sort::Ack {
                    return Err(self.err(*pos, format!("sort conflict: `{g}(...)` is an integer term in an ack position")));
                }
                let def = self.sig.function(g).ok_or_else(|| self.err(*pos, format!("unresolved function `{g}`")))?;
                if def.arity != args.len() {
                    return Err(self.err(
                        *pos,
                        format!("arity mismatch: `{g}` expects {} argument(s), got {}", def.arity, args.len()),
                    ));
                }
                args.iter().try_for_each(|a| self.infer_term(a, Sort::Int))
            }
        }
    }

    fn infer(&mut self, f: &Raw) -> Result<(), SyntaxError> {
        match f {
            Raw::Falsum => Ok(()),
            Raw::Atom(p, args, pos) => {
                let sorts = self
                    .sig
                    .predicate(p)
                    .ok_or_else(|| self.err(*pos, format!("unresolved predicate `{p}`")))?
                    .to_vec();
                if sorts.len() != args.len() {
                    return Err(self.err(
                        *pos,
                        format!("arity mismatch: `{p}` expects {} argument(s), got {}", sorts.len(), args.len()),
                    ));
                }
                for (a, s) in args.iter().zip(sorts) {
                    self.infer_term(a, s).map_err(|mut e| {
                        if e.line == 0 {
                            e.line = pos.line;
                            e.col = pos.col;
                        }
                        e
                    })?;
                }
                Ok(())
            }
            Raw::Forall(n, body) | Raw::Exists(n, body) => {
                self.slots.push((n.clone(), None));
                self.scope.push((n.clone(), self.slots.len() - 1));
                let r = self.infer(body);
                self.scope.pop();
                r
            }
            Raw::Guard(t, u, body) => {
                self.infer_term(t, Sort::Int)?;
                self.infer_term(u, Sort::Int)?;
                self.infer(body)
            }
            Raw::Not(a) => self.infer(a),
            Raw::Implies(a, b) | Raw::And(a, b) | Raw::Or(a, b) | Raw::Iff(a, b) | Raw::Xor(a, b) => {
                self.infer(a)?;
                self.infer(b)
            }
        }
    }

    fn term_of(&self, t: &RawTerm, sort: Sort, scope: &[(String, usize)]) -> Term {
        let bound = |n: &str| scope.iter().rev().find(|(m, _)| m == n).map(|(_, s)| *s);
        match t {
            RawTerm::Nat(k) => Term::Nat(*k),
            RawTerm::App(g, args, _) => {
                Term::App(g.clone(), args.iter().map(|a| self.term_of(a, Sort::Int, scope)).collect())
            }
            RawTerm::Name(n, _) => match (bound(n), sort) {
                (Some(_), Sort::Ack) => Term::AckVar(n.clone()),
                (Some(_), Sort::Int) => Term::IntVar(n.clone()),
                (None, Sort::Ack) if self.sig.is_constant(n) || n.starts_with('#') => Term::AckConst(n.clone()),
                (None, Sort::Ack) => Term::AckVar(n.clone()),
                (None, Sort::Int) if self.sig.function(n).is_some() => Term::App(n.clone(), vec![]),
                (None, Sort::Int) => Term::IntVar(n.clone()),
            },
        }
    }

    fn build(&self, f: &Raw, scope: &mut Vec<(String, usize)>, next_slot: &mut usize) -> SurfaceFormula {
        use SurfaceFormula as S;
        let bx = Box::new;
        match f {
            Raw::Falsum => S::Falsum,
            Raw::Atom(p, args, _) => {
                let sorts = self.sig.predicate(p).expect("checked during inference");
                S::Atom(p.clone(), args.iter().zip(sorts).map(|(a, s)| self.term_of(a, *s, scope)).collect())
            }
            Raw::Forall(n, body) | Raw::Exists(n, body) => {
                let slot = *next_slot;
                *next_slot += 1;
                let sort = self.slots[slot].1.unwrap_or_else(|| conventional_sort(n));
                scope.push((n.clone(), slot));
                let inner = self.build(body, scope, next_slot);
                scope.pop();
                let b = Binder::new(n, sort);
                if matches!(f, Raw::Forall(..)) {
                    S::Forall(b, bx(inner))
                } else {
                    S::Exists(b, bx(inner))
                }
            }
            Raw::Guard(t, u, body) => S::Guard(
                self.term_of(t, Sort::Int, scope),
                self.term_of(u, Sort::Int, scope),
                bx(self.build(body, scope, next_slot)),
            ),
            Raw::Not(a) => S::Not(bx(self.build(a, scope, next_slot))),
            Raw::Implies(a, b) => {
                let a = self.build(a, scope, next_slot);
                S::Implies(bx(a), bx(self.build(b, scope, next_slot)))
            }
            Raw::And(a, b) => {
                let a = self.build(a, scope, next_slot);
                S::And(bx(a), bx(self.build(b, scope, next_slot)))
            }
            Raw::Or(a, b) => {
                let a = self.build(a, scope, next_slot);
                S::Or(bx(a), bx(self.build(b, scope, next_slot)))
            }
            Raw::Iff(a, b) => {
                let a = self.build(a, scope, next_slot);
                S::Iff(bx(a), bx(self.build(b, scope, next_slot)))
            }
            Raw::Xor(a, b) => {
                let a = self.build(a, scope, next_slot);
                S::Xor(bx(a), bx(self.build(b, scope, next_slot)))
            }
        }
    }
}

/// Integer variables are conventionally named `i` to `n`.
fn conventional_sort(name: &str) -> Sort {
    match name.chars().next() {
        Some('i'..='n') => Sort::Int,
        _ => Sort::Ack,
    }
}

fn resolve(raw: &Raw, sig: &Signature, origin: &str) -> Result<SurfaceFormula, SyntaxError> {
    let mut r = Resolver { sig, origin, scope: Vec::new(), slots: Vec::new(), free: BTreeMap::new() };
    r.infer(raw)?;
    Ok(r.build(raw, &mut Vec::new(), &mut 0))
}

fn parse_formula_tokens(toks: &[(Tok, Pos)], origin: &str, sig: &Signature) -> Result<SurfaceFormula, SyntaxError> {
    let mut p = Parser::new(toks, origin);
    if p.at_end() {
        return Err(p.error("empty formula"));
    }
    let raw = p.formula()?;
    if !p.at_end() {
        if p.peek() == Some(&Tok::Eq) {
            return Err(p.error("an equation is not a formula; guards must precede `->`"));
        }
        return Err(p.unexpected("end of formula"));
    }
    resolve(&raw, sig, origin)
}

/// Parses a formula against a signature.
pub fn parse_formula(src: &SourceText, sig: &Signature) -> Result<SurfaceFormula, SyntaxError> {
    let toks = lex(src)?;
    parse_formula_tokens(&toks, &src.origin, sig)
}

/// Parses signature declarations.
pub fn parse_signature(src: &SourceText) -> Result<Signature, SyntaxError> {
    let toks = lex(src)?;
    let mut p = Parser::new(&toks, &src.origin);
    let mut sig = Signature::new();
    while !p.at_end() {
        parse_declaration(&mut p, &mut sig)?;
    }
    Ok(sig)
}

fn parse_declaration(p: &mut Parser<'_>, sig: &mut Signature) -> Result<(), SyntaxError> {
    let start = p.pos();
    let dup = |p: &Parser<'_>, pos: Pos, e: CoreError| p.error_at(pos, e.to_string());
    if p.is_kw("pred") {
        p.idx += 1;
        let (name, pos) = p.ident()?;
        p.expect(&Tok::Colon)?;
        let sorts = if p.eat(&Tok::LParen) {
            p.expect(&Tok::RParen)?;
            vec![]
        } else {
            let mut sorts = vec![parse_sort(p)?];
            while p.eat(&Tok::Star) {
                sorts.push(parse_sort(p)?);
            }
            sorts
        };
        sig.declare_predicate(&name, sorts).map_err(|e| dup(p, pos, e))
    } else if p.is_kw("fun") {
        p.idx += 1;
        let (name, pos) = p.ident()?;
        p.expect(&Tok::Slash)?;
        let arity = match p.peek() {
            Some(Tok::Nat(k)) => {
                let k = *k as usize;
                p.idx += 1;
                k
            }
            _ => return Err(p.unexpected("an arity")),
        };
        p.expect(&Tok::Eq)?;
        let bpos = p.pos();
        let (bname, _) = p.ident()?;
        let builtin = Builtin::from_name(&bname)
            .ok_or_else(|| p.error_at(bpos, format!("unknown builtin `{bname}` (expected zero, succ, add or mul)")))?;
        if builtin.arity() != arity {
            return Err(p.error_at(bpos, format!("builtin `{bname}` has arity {}, declared {arity}", builtin.arity())));
        }
        sig.declare_builtin(&name, builtin).map_err(|e| dup(p, pos, e))
    } else if p.is_kw("const") {
        p.idx += 1;
        loop {
            let (name, pos) = p.ident()?;
            sig.declare_constant(&name).map_err(|e| dup(p, pos, e))?;
            if !p.eat(&Tok::Comma) {
                return Ok(());
            }
        }
    } else {
        Err(p.error_at(start, "expected a declaration (`pred`, `fun` or `const`)"))
    }
}

fn parse_sort(p: &mut Parser<'_>) -> Result<Sort, SyntaxError> {
    let pos = p.pos();
    match p.peek() {
        Some(Tok::Ident(s)) if s == "int" => {
            p.idx += 1;
            Ok(Sort::Int)
        }
        Some(Tok::Ident(s)) if s == "ack" => {
            p.idx += 1;
            Ok(Sort::Ack)
        }
        _ => Err(p.error_at(pos, "malformed sort list: expected `int` or `ack`")),
    }
}

/// A parsed `.lp` file: one signature block followed by named formulas.
#[derive(Debug, Clone)]
pub struct Program {
    pub signature: Signature,
    pub formulas: IndexMap<String, SurfaceFormula>,
}

impl Program {
    pub fn get(&self, name: &str) -> Option<&SurfaceFormula> {
        self.formulas.get(name)
    }
}

/// Parses a `.lp` program.
pub fn parse_program(src: &SourceText) -> Result<Program, SyntaxError> {
    let toks = lex(src)?;
    let first_formula = toks
        .iter()
        .position(|(t, _)| matches!(t, Tok::Ident(s) if s == "formula"))
        .unwrap_or(toks.len());
    let mut sig = Signature::new();
    {
        let mut p = Parser::new(&toks[..first_formula], &src.origin);
        while !p.at_end() {
            parse_declaration(&mut p, &mut sig)?;
        }
    }
    let mut formulas = IndexMap::new();
    let mut i = first_formula;
    while i < toks.len() {
        let mut p = Parser::new(&toks[i..], &src.origin);
        p.idx = 1;
        let (name, pos) = p.ident()?;
        p.expect(&Tok::Assign)?;
        let body_start = i + p.idx;
        let body_end = toks[body_start..]
            .iter()
            .position(|(t, _)| matches!(t, Tok::Ident(s) if s == "formula"))
            .map(|k| body_start + k)
            .unwrap_or(toks.len());
        let f = parse_formula_tokens(&toks[body_start..body_end], &src.origin, &sig).map_err(|mut e| {
            if body_start == body_end {
                e.line = pos.line;
                e.col = pos.col;
            }
            e
        })?;
        if formulas.insert(name.clone(), f).is_some() {
            return Err(SyntaxError {
                origin: src.origin.clone(),
                line: pos.line,
                col: pos.col,
                message: format!("formula `{name}` defined twice"),
            });
        }
        i = body_end;
    }
    Ok(Program { signature: sig, formulas })
}

/// Prints a core formula.
pub fn print_formula(f: &Formula) -> String {
    print_surface(&SurfaceFormula::from(f))
}

/// Prints a formula with minimal parentheses. Internal binder names (those
/// of the canonical form) are replaced by readable fresh names.
pub fn print_surface(f: &SurfaceFormula) -> String {
    let mut used = BTreeSet::new();
    surface_names(f, &mut used);
    let mut pr = Printer { used, renames: Vec::new(), out: String::new() };
    pr.formula(f, 0);
    pr.out
}

fn surface_names(f: &SurfaceFormula, out: &mut BTreeSet<String>) {
    use SurfaceFormula as S;
    fn term_names(t: &Term, out: &mut BTreeSet<String>) {
        match t {
            Term::AckVar(n) | Term::AckConst(n) | Term::IntVar(n) => {
                out.insert(n.clone());
            }
            Term::Nat(_) => {}
            Term::App(g, args) => {
                out.insert(g.clone());
                args.iter().for_each(|a| term_names(a, out));
            }
        }
    }
    match f {
        S::Falsum => {}
        S::Atom(_, args) => args.iter().for_each(|t| term_names(t, out)),
        S::Forall(b, body) | S::Exists(b, body) => {
            out.insert(b.name.clone());
            surface_names(body, out);
        }
        S::Guard(t, u, body) => {
            term_names(t, out);
            term_names(u, out);
            surface_names(body, out);
        }
        S::Not(a) => surface_names(a, out),
        S::Implies(a, b) | S::And(a, b) | S::Or(a, b) | S::Iff(a, b) | S::Xor(a, b) => {
            surface_names(a, out);
            surface_names(b, out);
        }
    }
}

fn occurs_free(f: &SurfaceFormula, name: &str) -> bool {
    use SurfaceFormula as S;
    fn in_term(t: &Term, name: &str) -> bool {
        match t {
            Term::AckVar(n) | Term::IntVar(n) => n == name,
            Term::App(_, args) => args.iter().any(|a| in_term(a, name)),
            _ => false,
        }
    }
    match f {
        S::Falsum => false,
        S::Atom(_, args) => args.iter().any(|t| in_term(t, name)),
        S::Forall(b, body) | S::Exists(b, body) => b.name != name && occurs_free(body, name),
        S::Guard(t, u, body) => in_term(t, name) || in_term(u, name) || occurs_free(body, name),
        S::Not(a) => occurs_free(a, name),
        S::Implies(a, b) | S::And(a, b) | S::Or(a, b) | S::Iff(a, b) | S::Xor(a, b) => {
            occurs_free(a, name) || occurs_free(b, name)
        }
    }
}

struct Printer {
    used: BTreeSet<String>,
    renames: Vec<(String, String)>,
    out: String,
}

impl Printer {
    fn level(f: &SurfaceFormula) -> u8 {
        use SurfaceFormula as S;
        match f {
            S::Forall(..) | S::Exists(..) | S::Guard(..) | S::Implies(..) => 0,
            S::Iff(..) | S::Xor(..) => 1,
            S::Or(..) => 2,
            S::And(..) => 3,
            S::Not(..) => 4,
            S::Falsum | S::Atom(..) => 5,
        }
    }

    fn name_of(&self, n: &str) -> String {
        self.renames.iter().rev().find(|(from, _)| from == n).map(|(_, to)| to.clone()).unwrap_or_else(|| n.to_string())
    }

    fn term(&mut self, t: &Term) {
        match t {
            Term::AckVar(n) | Term::IntVar(n) => {
                let s = self.name_of(n);
                self.out.push_str(&s);
            }
            Term::AckConst(c) => self.out.push_str(c),
            Term::Nat(k) => self.out.push_str(&k.to_string()),
            Term::App(g, args) if args.is_empty() => self.out.push_str(g),
            Term::App(g, args) => {
                self.out.push_str(g);
                self.out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.term(a);
                }
                self.out.push(')');
            }
        }
    }

    fn formula(&mut self, f: &SurfaceFormula, min_level: u8) {
        use SurfaceFormula as S;
        if Self::level(f) < min_level {
            self.out.push('(');
            self.formula(f, 0);
            self.out.push(')');
            return;
        }
        match f {
            S::Falsum => self.out.push_str("false"),
            S::Atom(p, args) => {
                self.out.push_str(p);
                if !args.is_empty() {
                    self.out.push('(');
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            self.out.push_str(", ");
                        }
                        self.term(a);
                    }
                    self.out.push(')');
                }
            }
            S::Forall(b, body) | S::Exists(b, body) => {
                let kw = if matches!(f, S::Forall(..)) { "forall" } else { "exists" };
                let needs_rename = b.name.starts_with('%')
                    || (conventional_sort(&b.name) != b.sort && !occurs_free(body, &b.name));
                let shown = if needs_rename {
                    let fresh = fresh_name(b.sort, &self.used);
                    self.used.insert(fresh.clone());
                    fresh
                } else {
                    b.name.clone()
                };
                self.renames.push((b.name.clone(), shown.clone()));
                self.out.push_str(kw);
                self.out.push(' ');
                self.out.push_str(&shown);
                self.out.push_str(". ");
                let bare = Self::level(body) >= 4 || matches!(**body, S::Forall(..) | S::Exists(..));
                self.formula(body, if bare { 0 } else { 6 });
                self.renames.pop();
            }
            S::Guard(t, u, body) => {
                self.term(t);
                self.out.push_str(" = ");
                self.term(u);
                self.out.push_str(" -> ");
                self.formula(body, 0);
            }
            S::Implies(a, b) => {
                self.formula(a, 1);
                self.out.push_str(" -> ");
                self.formula(b, 0);
            }
            S::Iff(a, b) | S::Xor(a, b) => {
                self.formula(a, 1);
                self.out.push_str(if matches!(f, S::Iff(..)) { " <-> " } else { " xor " });
                self.formula(b, 2);
            }
            S::Or(a, b) => {
                self.formula(a, 2);
                self.out.push_str(" \\/ ");
                self.formula(b, 3);
            }
            S::And(a, b) => {
                self.formula(a, 3);
                self.out.push_str(" /\\ ");
                self.formula(b, 4);
            }
            S::Not(a) => {
                self.out.push_str("not ");
                self.formula(a, 4);
            }
        }
    }
}
