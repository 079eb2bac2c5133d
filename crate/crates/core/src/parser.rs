//! Text format for reaction networks (`.crn`).
//!
//! ```text
//! # comment
//! species S1 S2          (optional, pins the index order)
//! S1 + S2 -> 2S2 @ 1/2
//! 2S1 <-> 0 @ 1, 3.5
//! ```

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::model::{Complex, ModelError, Rate, Reaction, ReactionNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl ParseDiagnostic {
    pub(crate) fn error(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
            severity: Severity::Error,
        }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{}:{}: {}: {}",
            self.line, self.column, sev, self.message
        )
    }
}

/// Parses a `.crn` document.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, Vec<ParseDiagnostic>> {
    parse_network_at(text, 0)
}

/// Like [`parse_network`] with reported line numbers shifted by `line_offset`.
pub(crate) fn parse_network_at(
    text: &str,
    line_offset: usize,
) -> Result<ReactionNetwork, Vec<ParseDiagnostic>> {
    let mut builder = Builder::default();
    let mut diags = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1 + line_offset;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut cur = Cursor {
            src: line,
            pos: 0,
            line: lineno,
        };
        if let Err(d) = builder.statement(&mut cur) {
            diags.push(d);
        }
    }
    if builder.reactions.is_empty() && diags.is_empty() {
        diags.push(ParseDiagnostic::error(
            line_offset + 1,
            1,
            "network has no reactions",
        ));
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let lines = builder.lines.clone();
    ReactionNetwork::new(builder.species, builder.reactions).map_err(|e| {
        let (line, msg) = match &e {
            ModelError::DuplicateReaction(i, j) => (
                lines[*i],
                format!("duplicate reaction (same as line {})", lines[*j]),
            ),
            ModelError::SelfLoop(i) => (lines[*i], "self-loop reaction".to_string()),
            ModelError::NonPositiveRate(i) => (lines[*i], "zero or negative rate".to_string()),
            other => (line_offset + 1, other.to_string()),
        };
        vec![ParseDiagnostic::error(line, 1, msg)]
    })
}

#[derive(Default)]
struct Builder {
    species: Vec<String>,
    index: HashMap<String, usize>,
    reactions: Vec<Reaction>,
    lines: Vec<usize>,
}

impl Builder {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.species.push(name.to_string());
        self.index.insert(name.to_string(), self.species.len() - 1);
        self.species.len() - 1
    }

    fn statement(&mut self, cur: &mut Cursor<'_>) -> Result<(), ParseDiagnostic> {
        cur.skip_ws();
        if cur.peek() == Some('[') {
            return Err(cur.err("section headers are only allowed in compound (.crnc) files"));
        }
        if cur.keyword("species") {
            if !self.reactions.is_empty() {
                return Err(cur.err("`species` header must precede all reactions"));
            }
            loop {
                cur.skip_ws();
                if cur.at_end() {
                    break;
                }
                let col = cur.col();
                let name = cur
                    .ident()
                    .ok_or_else(|| cur.err("expected species name"))?;
                if self.index.contains_key(name) {
                    return Err(ParseDiagnostic::error(
                        cur.line,
                        col,
                        format!("species `{name}` declared twice"),
                    ));
                }
                self.intern(name);
            }
            return Ok(());
        }
        let reactant = self.complex(cur)?;
        cur.skip_ws();
        let reversible = if cur.eat("<->") {
            true
        } else if cur.eat("->") {
            false
        } else {
            return Err(cur.err("expected `->` or `<->`"));
        };
        let product = self.complex(cur)?;
        cur.skip_ws();
        if !cur.eat("@") {
            return Err(cur.err("expected `@` followed by a rate"));
        }
        let forward = rate(cur)?;
        let backward = if reversible {
            cur.skip_ws();
            if !cur.eat(",") {
                return Err(cur.err("reversible reaction needs two rates separated by `,`"));
            }
            Some(rate(cur)?)
        } else {
            None
        };
        cur.skip_ws();
        if !cur.at_end() {
            return Err(cur.err("unexpected trailing input"));
        }
        self.reactions
            .push(Reaction::new(reactant.clone(), product.clone(), forward));
        self.lines.push(cur.line);
        if let Some(b) = backward {
            self.reactions.push(Reaction::new(product, reactant, b));
            self.lines.push(cur.line);
        }
        Ok(())
    }

    fn complex(&mut self, cur: &mut Cursor<'_>) -> Result<Complex, ParseDiagnostic> {
        cur.skip_ws();
        let save = cur.pos;
        if cur.eat("0") {
            let after = cur.peek();
            if !matches!(after, Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                return Ok(Complex::zero());
            }
            cur.pos = save;
        }
        let mut c = Complex::zero();
        loop {
            cur.skip_ws();
            let col = cur.col();
            let coeff = match cur.uint() {
                Some(v) => {
                    if v == 0 {
                        return Err(ParseDiagnostic::error(
                            cur.line,
                            col,
                            "zero stoichiometric coefficient",
                        ));
                    }
                    u32::try_from(v).map_err(|_| {
                        ParseDiagnostic::error(cur.line, col, "coefficient too large")
                    })?
                }
                None => 1,
            };
            cur.skip_ws();
            let name = cur
                .ident()
                .ok_or_else(|| cur.err("expected species name"))?;
            let j = self.intern(name);
            c.add(j, coeff);
            cur.skip_ws();
            if !cur.eat("+") {
                break;
            }
        }
        Ok(c)
    }
}

fn rate(cur: &mut Cursor<'_>) -> Result<Rate, ParseDiagnostic> {
    cur.skip_ws();
    let col = cur.col();
    let start = cur.pos;
    if cur.peek() == Some('-') {
        return Err(cur.err("zero or negative rate"));
    }
    let num = cur.uint_text().ok_or_else(|| cur.err("expected rate"))?;
    let line = cur.line;
    let nonpos = move || ParseDiagnostic::error(line, col, "zero or negative rate");
    if cur.eat("/") {
        let den = cur
            .uint_text()
            .ok_or_else(|| cur.err("expected denominator"))?;
        let p: BigInt = num.parse().expect("digits");
        let q: BigInt = den.parse().expect("digits");
        if q.is_zero() {
            return Err(ParseDiagnostic::error(cur.line, col, "zero denominator"));
        }
        if p.is_zero() {
            return Err(nonpos());
        }
        return Ok(Rate::Exact(BigRational::new(p, q)));
    }
    let mut is_float = false;
    if cur.peek() == Some('.') {
        is_float = true;
        cur.pos += 1;
        cur.uint_text();
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        is_float = true;
        cur.pos += 1;
        if matches!(cur.peek(), Some('+' | '-')) {
            cur.pos += 1;
        }
        cur.uint_text()
            .ok_or_else(|| cur.err("malformed exponent"))?;
    }
    let text = &cur.src[start..cur.pos];
    if is_float {
        let v: f64 = text
            .parse()
            .map_err(|_| ParseDiagnostic::error(cur.line, col, "malformed rate"))?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(nonpos());
        }
        Ok(Rate::Float(v))
    } else {
        let p: BigInt = text.parse().expect("digits");
        if p.is_zero() {
            return Err(nonpos());
        }
        Ok(Rate::Exact(BigRational::from_integer(p)))
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn col(&self) -> usize {
        self.src[..self.pos].chars().count() + 1
    }

    fn err(&self, msg: &str) -> ParseDiagnostic {
        ParseDiagnostic::error(self.line, self.col(), msg)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += self.peek().map_or(0, char::len_utf8);
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        if self.src[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        let rest = &self.src[self.pos..];
        if rest.starts_with(kw)
            && rest[kw.len()..]
                .chars()
                .next()
                .is_none_or(char::is_whitespace)
        {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn uint_text(&mut self) -> Option<&'a str> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.src[start..self.pos])
    }

    fn uint(&mut self) -> Option<u64> {
        let save = self.pos;
        let t = self.uint_text()?;
        match t.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.pos = save;
                None
            }
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => self.pos += c.len_utf8(),
            _ => return None,
        }
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' || c == '\'' {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        Some(&self.src[start..self.pos])
    }
}

pub fn format_complex(c: &Complex, names: &[String]) -> String {
    if c.is_zero() {
        return "0".to_string();
    }
    c.terms()
        .map(|(j, v)| {
            if v == 1 {
                names[j].clone()
            } else {
                format!("{v}{}", names[j])
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

pub fn format_reaction(r: &Reaction, names: &[String]) -> String {
    format!(
        "{} -> {} @ {}",
        format_complex(&r.reactant, names),
        format_complex(&r.product, names),
        r.rate
    )
}

/// Canonical text: a `species` header followed by one reaction per line.
pub fn serialize_network(net: &ReactionNetwork) -> String {
    let names = net.species_names();
    let mut out = String::new();
    let _ = writeln!(out, "species {}", names.join(" "));
    for r in net.reactions() {
        let _ = writeln!(out, "{}", format_reaction(r, names));
    }
    out
}
