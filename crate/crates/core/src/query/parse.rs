//! Query text, one query per line:
//!
//! ```text
//! exists #Flame >= 1 && !(#Gas = 0)
//! max #Conc where #Flame = 1
//! min 2*#A - #B
//! deadlocks
//! rel Flame.0 > IGNITE_PHASE_S.0
//! pathbounds S0 S10
//! ```
//!
//! `#P` (or `#tokens(P)`) is the token count of place `P`; `P.i` is the
//! `i`-th token of `P` in stamp order. Lines starting with `#` followed by a
//! space, and blank lines, are ignored.

use super::{place, CmpOp, CountExpr, MarkingPredicate, Query, QueryError, StampRef};
use crate::net::TbNet;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Count(String),
    Int(i64),
    Op(CmpOp),
    Plus,
    Minus,
    Star,
    And,
    Or,
    Not,
    LParen,
    RParen,
    True,
}

fn lex(text: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let s: Vec<char> = text.chars().collect();
    let ident = |i: &mut usize| {
        let start = *i;
        while *i < s.len() && (s[*i].is_alphanumeric() || s[*i] == '_') {
            *i += 1;
        }
        s[start..*i].iter().collect::<String>()
    };
    let mut i = 0;
    while i < s.len() {
        let c = s[i];
        let next = s.get(i + 1).copied();
        match c {
            _ if c.is_whitespace() => i += 1,
            '#' => {
                i += 1;
                let name = ident(&mut i);
                if name == "tokens" && s.get(i) == Some(&'(') {
                    i += 1;
                    let inner = ident(&mut i);
                    if s.get(i) != Some(&')') {
                        return Err("expected `)` after place name".into());
                    }
                    i += 1;
                    out.push(Tok::Count(inner));
                } else if name.is_empty() {
                    return Err("expected a place name after `#`".into());
                } else {
                    out.push(Tok::Count(name));
                }
            }
            '0'..='9' => {
                let start = i;
                while i < s.len() && s[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = s[start..i].iter().collect();
                out.push(Tok::Int(digits.parse().map_err(|_| format!("integer `{digits}` out of range"))?));
            }
            '<' | '>' | '=' | '!' => {
                let two = next == Some('=');
                let op = match (c, two) {
                    ('<', true) => Some(CmpOp::Le),
                    ('<', false) => Some(CmpOp::Lt),
                    ('>', true) => Some(CmpOp::Ge),
                    ('>', false) => Some(CmpOp::Gt),
                    ('=', _) => Some(CmpOp::Eq),
                    ('!', true) => Some(CmpOp::Ne),
                    _ => None,
                };
                match op {
                    Some(op) => out.push(Tok::Op(op)),
                    None => out.push(Tok::Not),
                }
                i += if two { 2 } else { 1 };
            }
            '+' | '-' | '*' | '(' | ')' => {
                out.push(match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                });
                i += 1;
            }
            '&' if next == Some('&') => {
                out.push(Tok::And);
                i += 2;
            }
            '|' if next == Some('|') => {
                out.push(Tok::Or);
                i += 2;
            }
            _ if c.is_alphabetic() => match ident(&mut i).as_str() {
                "and" => out.push(Tok::And),
                "or" => out.push(Tok::Or),
                "not" => out.push(Tok::Not),
                "true" => out.push(Tok::True),
                w => return Err(format!("unexpected word `{w}` (token counts are written `#{w}`)")),
            },
            _ => return Err(format!("unexpected character `{c}`")),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    net: &'a TbNet,
}

type R<T> = Result<T, QueryError>;

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn fail<T>(&self, reason: impl Into<String>) -> R<T> {
        Err(QueryError::Parse { line: 0, reason: reason.into() })
    }

    fn or(&mut self) -> R<MarkingPredicate> {
        let mut parts = vec![self.and()?];
        while self.eat(&Tok::Or) {
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { MarkingPredicate::Or(parts) })
    }

    fn and(&mut self) -> R<MarkingPredicate> {
        let mut parts = vec![self.unary()?];
        while self.eat(&Tok::And) {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { MarkingPredicate::And(parts) })
    }

    fn unary(&mut self) -> R<MarkingPredicate> {
        if self.eat(&Tok::Not) {
            return Ok(MarkingPredicate::Not(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::True) {
            return Ok(MarkingPredicate::True);
        }
        if self.eat(&Tok::LParen) {
            let p = self.or()?;
            if !self.eat(&Tok::RParen) {
                return self.fail("expected `)`");
            }
            return Ok(p);
        }
        let lhs = self.expr()?;
        let Some(Tok::Op(op)) = self.peek().cloned() else {
            return self.fail("expected a comparison");
        };
        self.pos += 1;
        let rhs = self.expr()?;
        Ok(MarkingPredicate::Cmp(lhs, op, rhs))
    }

    fn expr(&mut self) -> R<CountExpr> {
        let mut e = CountExpr::default();
        let mut sign = if self.eat(&Tok::Minus) { -1 } else { 1 };
        loop {
            self.term(sign, &mut e)?;
            if self.eat(&Tok::Plus) {
                sign = 1;
            } else if self.eat(&Tok::Minus) {
                sign = -1;
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self, sign: i64, e: &mut CountExpr) -> R<()> {
        match self.peek().cloned() {
            Some(Tok::Int(k)) => {
                self.pos += 1;
                if self.eat(&Tok::Star) {
                    let Some(Tok::Count(name)) = self.peek().cloned() else {
                        return self.fail("expected `#place` after `*`");
                    };
                    self.pos += 1;
                    e.terms.push((place(self.net, &name)?, sign * k));
                } else {
                    e.constant += sign * k;
                }
                Ok(())
            }
            Some(Tok::Count(name)) => {
                self.pos += 1;
                e.terms.push((place(self.net, &name)?, sign));
                Ok(())
            }
            _ => self.fail("expected a token count or an integer"),
        }
    }
}

fn predicate(text: &str, net: &TbNet) -> R<MarkingPredicate> {
    let toks = lex(text).map_err(|reason| QueryError::Parse { line: 0, reason })?;
    let mut p = Parser { toks, pos: 0, net };
    let pred = p.or()?;
    if p.pos != p.toks.len() {
        return p.fail("trailing input");
    }
    Ok(pred)
}

fn count_expr(text: &str, net: &TbNet) -> R<CountExpr> {
    let toks = lex(text).map_err(|reason| QueryError::Parse { line: 0, reason })?;
    let mut p = Parser { toks, pos: 0, net };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.fail("trailing input");
    }
    Ok(e)
}

fn stamp_ref(text: &str, net: &TbNet) -> R<StampRef> {
    let (name, idx) = text
        .rsplit_once('.')
        .ok_or_else(|| QueryError::Parse { line: 0, reason: format!("expected `place.index`, got `{text}`") })?;
    let index = idx.parse().map_err(|_| QueryError::Parse { line: 0, reason: format!("bad token index `{idx}`") })?;
    Ok(StampRef { place: place(net, name)?, index })
}

fn node_id(text: &str) -> R<usize> {
    text.strip_prefix('S')
        .unwrap_or(text)
        .parse()
        .map_err(|_| QueryError::Parse { line: 0, reason: format!("bad node id `{text}`") })
}

/// Parses one query (without line information).
pub fn parse_query(line: &str, net: &TbNet) -> Result<Query, QueryError> {
    let line = line.trim();
    let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    match head {
        "exists" => Ok(Query::Exists(predicate(rest, net)?)),
        "max" | "min" => {
            let (e, filter) = match rest.split_once(" where ") {
                Some((e, f)) => (count_expr(e, net)?, Some(predicate(f, net)?)),
                None => (count_expr(rest, net)?, None),
            };
            Ok(if head == "max" { Query::Max(e, filter) } else { Query::Min(e, filter) })
        }
        "deadlocks" if rest.is_empty() => Ok(Query::Deadlocks),
        "rel" => {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let [a, op, b] = parts[..] else {
                return Err(QueryError::Parse { line: 0, reason: "expected `rel P.i <op> Q.j`".into() });
            };
            let op = match lex(op).as_deref() {
                Ok([Tok::Op(op)]) => *op,
                _ => return Err(QueryError::Parse { line: 0, reason: format!("bad comparison `{op}`") }),
            };
            Ok(Query::Relation(stamp_ref(a, net)?, op, stamp_ref(b, net)?))
        }
        "pathbounds" => {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let [a, b] = parts[..] else {
                return Err(QueryError::Parse { line: 0, reason: "expected `pathbounds <node> <node>`".into() });
            };
            Ok(Query::PathBounds(node_id(a)?, node_id(b)?))
        }
        _ => Err(QueryError::Parse { line: 0, reason: format!("unknown query `{head}`") }),
    }
}

/// Parses a query file; returns each query with its source text.
pub fn parse_queries(text: &str, net: &TbNet) -> Result<Vec<(String, Query)>, QueryError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line == "#" || line.starts_with("# ") {
            continue;
        }
        let q = parse_query(line, net).map_err(|e| match e {
            QueryError::Parse { reason, .. } => QueryError::Parse { line: i + 1, reason },
            other => other,
        })?;
        out.push((line.to_string(), q));
    }
    Ok(out)
}
