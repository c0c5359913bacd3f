use super::{NetError, PlaceId, Semantics, TbNet, TimeExpr, TimeFunction, Transition};
use crate::constraint::{parse_atom, parse_var_name, LinearConstraint, Var};
use crate::rational::{int, parse_rational, Rational};
use num_traits::{One, Zero};
use std::collections::BTreeMap;

/// Parses the line-oriented model format.
///
/// ```text
/// net burner
/// place A, B
/// trans t weak pre A post B tf [enab + 0.5, max(A + 1, 2 * A)]
/// init A{T0}
/// constraint 0 <= T0 && T0 <= 10
/// timelimit 3
/// ```
pub fn parse_net(text: &str) -> Result<TbNet, NetError> {
    let mut name = String::from("unnamed");
    let mut places: Vec<String> = Vec::new();
    let mut pending: Vec<(usize, &str)> = Vec::new();
    let mut inits: Vec<(usize, &str)> = Vec::new();
    let mut constraint = LinearConstraint::truth();
    let mut time_limit = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let rest = rest.trim();
        match keyword {
            "net" => {
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    return Err(parse_err(line, "expected `net <name>`"));
                }
                name = rest.to_string();
            }
            "place" => {
                for id in split_ids(rest) {
                    check_ident(line, id)?;
                    if places.iter().any(|p| p == id) {
                        return Err(parse_err(line, format!("duplicate place `{id}`")));
                    }
                    places.push(id.to_string());
                }
            }
            "trans" => pending.push((line, rest)),
            "init" => inits.push((line, rest)),
            "constraint" => {
                for part in rest.split("&&") {
                    let atom = parse_atom(part, &|n| match parse_var_name(n) {
                        Some(v @ Var::Ts(_)) => Some(v),
                        _ => None,
                    })
                    .map_err(|e| parse_err(line, e.0))?;
                    constraint.add(&atom);
                }
            }
            "timelimit" => {
                let v = parse_rational(rest).map_err(|e| parse_err(line, e.to_string()))?;
                if v <= Rational::zero() {
                    return Err(parse_err(line, "time limit must be positive"));
                }
                time_limit = Some(v);
            }
            other => return Err(parse_err(line, format!("unknown directive `{other}`"))),
        }
    }

    let lookup = |line: usize, n: &str| -> Result<PlaceId, NetError> {
        places
            .iter()
            .position(|p| p == n)
            .map(PlaceId)
            .ok_or_else(|| NetError::UnknownPlace { line, name: n.to_string() })
    };

    let mut transitions: Vec<Transition> = Vec::new();
    for (line, rest) in pending {
        let t = parse_transition(line, rest, &lookup, &places)?;
        if transitions.iter().any(|u| u.name == t.name) {
            return Err(parse_err(line, format!("duplicate transition `{}`", t.name)));
        }
        transitions.push(t);
    }

    let mut marking = vec![Vec::new(); places.len()];
    for (line, rest) in inits {
        for (place, symbols) in parse_tokens(line, rest)? {
            let p = lookup(line, place)?;
            marking[p.0].extend(symbols);
        }
    }

    TbNet::new(name, places, transitions, marking, constraint, time_limit)
}

fn parse_err(line: usize, reason: impl Into<String>) -> NetError {
    NetError::Parse { line, reason: reason.into() }
}

fn split_ids(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|x| !x.is_empty())
}

fn check_ident(line: usize, id: &str) -> Result<(), NetError> {
    let mut chars = id.chars();
    let ok =
        chars.next().is_some_and(|c| c.is_alphabetic() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_');
    if !ok || matches!(id, "enab" | "max" | "min" | "pre" | "post" | "tf" | "weak") {
        return Err(parse_err(line, format!("invalid identifier `{id}`")));
    }
    Ok(())
}

fn parse_transition(
    line: usize,
    rest: &str,
    lookup: &dyn Fn(usize, &str) -> Result<PlaceId, NetError>,
    place_names: &[String],
) -> Result<Transition, NetError> {
    let tf_pos = rest.find("tf").filter(|&i| {
        let before = rest[..i].chars().next_back();
        before.is_some_and(char::is_whitespace) && rest[i + 2..].trim_start().starts_with('[')
    });
    let tf_pos = tf_pos.ok_or_else(|| parse_err(line, "missing `tf [lb, ub]`"))?;
    let head: Vec<&str> = split_ids(&rest[..tf_pos]).collect();
    let tf_text = rest[tf_pos + 2..].trim();

    let name = *head.first().ok_or_else(|| parse_err(line, "missing transition name"))?;
    check_ident(line, name)?;
    let mut i = 1;
    let mut semantics = Semantics::Strong;
    if head.get(i) == Some(&"weak") {
        semantics = Semantics::Weak;
        i += 1;
    } else if head.get(i) == Some(&"strong") {
        i += 1;
    }
    if head.get(i) != Some(&"pre") {
        return Err(parse_err(line, "expected `pre`"));
    }
    let post_at = head.iter().position(|w| *w == "post").ok_or_else(|| parse_err(line, "expected `post`"))?;
    let mut pre = Vec::new();
    for w in &head[i + 1..post_at] {
        let p = lookup(line, w)?;
        if pre.contains(&p) {
            return Err(parse_err(line, format!("place `{w}` repeated in preset")));
        }
        pre.push(p);
    }
    if pre.is_empty() {
        return Err(parse_err(line, format!("transition `{name}` has an empty preset")));
    }
    let post = head[post_at + 1..].iter().map(|w| lookup(line, w)).collect::<Result<Vec<_>, _>>()?;

    let inner = tf_text
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| parse_err(line, "time function must be `[lb, ub]`"))?;
    let parts = split_top_level(inner);
    if parts.len() != 2 {
        return Err(parse_err(line, "time function must have exactly two bounds"));
    }
    let resolve = |n: &str| lookup(line, n);
    let lb = ExprParser::new(line, parts[0], &resolve).parse()?;
    let ub = ExprParser::new(line, parts[1], &resolve).parse()?;
    let tf = TimeFunction { lb, ub };
    for p in tf.places() {
        if !pre.contains(&p) {
            return Err(NetError::TfReferencesNonPreset {
                line,
                transition: name.to_string(),
                place: place_names[p.0].clone(),
            });
        }
    }
    Ok(Transition { name: name.to_string(), semantics, pre, post, tf })
}

/// Splits on commas not nested in brackets.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut depth = 0i32;
    let mut start = 0;
    let mut out = Vec::new();
    for (i, c) in s.char_indices() {
        match c {
            '(' | '{' => depth += 1,
            ')' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// `A{T0} B{T0, T1}` -> [(A, [0]), (B, [0, 1])]
fn parse_tokens(line: usize, s: &str) -> Result<Vec<(&str, Vec<u32>)>, NetError> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let open = rest.find('{').ok_or_else(|| parse_err(line, "expected `place{T<i>}`"))?;
        let close = rest.find('}').filter(|&c| c > open).ok_or_else(|| parse_err(line, "unclosed `{`"))?;
        let place = rest[..open].trim();
        let mut symbols = Vec::new();
        for sym in split_ids(&rest[open + 1..close]) {
            match parse_var_name(sym) {
                Some(Var::Ts(i)) => symbols.push(i),
                _ => return Err(parse_err(line, format!("expected a timestamp symbol, found `{sym}`"))),
            }
        }
        out.push((place, symbols));
        rest = rest[close + 1..].trim_start_matches(|c: char| c == ',' || c.is_whitespace());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(Rational),
    Plus,
    Minus,
    Star,
    Open,
    Close,
    Comma,
}

fn tokenize(line: usize, s: &str) -> Result<Vec<Tok>, NetError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() || c == '{' || c == '}' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '(' => {
                out.push(Tok::Open);
                i += 1;
            }
            ')' => {
                out.push(Tok::Close);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == '/') {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().collect();
                out.push(Tok::Num(parse_rational(&lit).map_err(|e| parse_err(line, e.to_string()))?));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(parse_err(line, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

/// Summands of one expression before folding into a [`TimeExpr`].
#[derive(Default)]
struct Sum {
    heads: Vec<TimeExpr>,
    places: BTreeMap<PlaceId, Rational>,
    constant: Rational,
}

struct ExprParser<'a> {
    line: usize,
    toks: Vec<Tok>,
    pos: usize,
    text: &'a str,
    resolve: &'a dyn Fn(&str) -> Result<PlaceId, NetError>,
}

impl<'a> ExprParser<'a> {
    fn new(line: usize, text: &'a str, resolve: &'a dyn Fn(&str) -> Result<PlaceId, NetError>) -> Self {
        ExprParser { line, toks: Vec::new(), pos: 0, text, resolve }
    }

    fn parse(mut self) -> Result<TimeExpr, NetError> {
        self.toks = tokenize(self.line, self.text)?;
        let e = self.expr()?;
        if self.pos != self.toks.len() {
            return Err(self.err("trailing input"));
        }
        Ok(e)
    }

    fn err(&self, what: &str) -> NetError {
        parse_err(self.line, format!("{what} in time expression `{}`", self.text.trim()))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<TimeExpr, NetError> {
        let mut sum = Sum::default();
        let mut sign = int(1);
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            sign = -sign;
        }
        loop {
            self.term(sign, &mut sum)?;
            match self.peek() {
                Some(Tok::Plus) => sign = int(1),
                Some(Tok::Minus) => sign = -int(1),
                _ => break,
            }
            self.pos += 1;
        }
        self.fold(sum)
    }

    fn term(&mut self, sign: Rational, sum: &mut Sum) -> Result<(), NetError> {
        match self.next() {
            Some(Tok::Num(n)) => {
                if self.peek() == Some(&Tok::Star) {
                    self.pos += 1;
                    let p = self.place()?;
                    *sum.places.entry(p).or_default() += sign * n;
                } else {
                    sum.constant += sign * n;
                }
            }
            Some(Tok::Ident(id)) if id == "enab" => {
                if sign != int(1) {
                    return Err(self.err("negated `enab`"));
                }
                sum.heads.push(TimeExpr::enab());
            }
            Some(Tok::Ident(id)) if id == "max" => {
                if sign != int(1) {
                    return Err(self.err("negated `max`"));
                }
                if self.next() != Some(Tok::Open) {
                    return Err(self.err("expected `(` after `max`"));
                }
                let mut args = vec![self.expr()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                if self.next() != Some(Tok::Close) {
                    return Err(self.err("expected `)`"));
                }
                sum.heads.push(TimeExpr::Max { args, offset: Rational::zero() });
            }
            Some(Tok::Ident(id)) if id == "min" => return Err(self.err("`min` is not supported")),
            Some(Tok::Ident(id)) => {
                let p = (self.resolve)(&id)?;
                let mut coeff = sign;
                if self.peek() == Some(&Tok::Star) {
                    self.pos += 1;
                    match self.next() {
                        Some(Tok::Num(n)) => coeff *= n,
                        _ => return Err(self.err("expected a number after `*`")),
                    }
                }
                *sum.places.entry(p).or_default() += coeff;
            }
            _ => return Err(self.err("expected a term")),
        }
        Ok(())
    }

    fn place(&mut self) -> Result<PlaceId, NetError> {
        match self.next() {
            Some(Tok::Ident(id)) if !matches!(id.as_str(), "enab" | "max" | "min") => (self.resolve)(&id),
            _ => Err(self.err("expected a place after `*`")),
        }
    }

    fn fold(&self, mut sum: Sum) -> Result<TimeExpr, NetError> {
        sum.places.retain(|_, c| !c.is_zero());
        match (sum.heads.len(), sum.places.len()) {
            (0, 1) => {
                let (p, c) = sum.places.iter().next().map(|(p, c)| (*p, *c)).unwrap();
                if c.is_one() {
                    return Ok(TimeExpr::PlaceRef { place: p, offset: sum.constant });
                }
                Ok(TimeExpr::Affine { terms: sum.places, constant: sum.constant })
            }
            (0, _) => Ok(TimeExpr::Affine { terms: sum.places, constant: sum.constant }),
            (1, 0) => Ok(match sum.heads.pop().unwrap() {
                TimeExpr::Enab { .. } => TimeExpr::Enab { offset: sum.constant },
                TimeExpr::Max { args, .. } => TimeExpr::Max { args, offset: sum.constant },
                _ => unreachable!("only enab and max are heads"),
            }),
            _ => Err(self.err("`enab` and `max` may only be combined with a constant offset")),
        }
    }
}
