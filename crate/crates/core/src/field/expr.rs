//! Text expressions for closed-form fields, as used in scenario files.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := NUMBER | 'pi' | 'x' INDEX | '(' expr ')'
//!         | 'exp' '(' expr ')' | 'log' '(' expr ')'
//!         | 'pow' '(' expr ',' expr ')'
//!         | 'dist' '(' point ')'
//!         | 'bump' '(' point (';' | ',') NUMBER ')'
//! point  := '[' NUMBER (',' NUMBER)* ']' | '-'? 'e' INDEX
//! ```
//!
//! Coordinates are one-based: on Sⁿ the valid names are x1 … x{n+1}.
//! `e3` is the third standard basis vector. Parsed fields carry closed-form
//! gradients.

use std::f64::consts::PI;

use super::ScalarField;
use crate::error::{Error, Result};
use crate::sphere::{basis, check_unit};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                offset: start,
                message: format!("bad number '{text}'"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()[],;".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(Error::Parse {
                offset: i,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    n: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.src.len())
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<ScalarField> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?)?;
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<ScalarField> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.unary()?)?;
            } else if self.eat('/') {
                let d = self.unary()?;
                acc = acc.mul(&d.map(format!("1/{}", d.label()), |v| 1.0 / v, |v| -1.0 / (v * v)))?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<ScalarField> {
        if self.eat('-') {
            Ok(self.unary()?.scale(-1.0))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<ScalarField> {
        let base = self.atom()?;
        if self.eat('^') {
            let start = self.pos;
            let e = self.unary()?;
            return self.raise(base, e, start);
        }
        Ok(base)
    }

    fn raise(&self, base: ScalarField, e: ScalarField, start: usize) -> Result<ScalarField> {
        if let Some(c) = self.constant_value(start) {
            return Ok(base.powf(c));
        }
        Ok(e.mul(&base.ln())?.exp())
    }

    /// Value of the token range [start, pos) if it is a plain (signed) number.
    fn constant_value(&self, start: usize) -> Option<f64> {
        match &self.toks[start..self.pos] {
            [(_, Tok::Num(v))] => Some(*v),
            [(_, Tok::Sym('-')), (_, Tok::Num(v))] => Some(-v),
            [(_, Tok::Ident(s))] if s == "pi" => Some(PI),
            _ => None,
        }
    }

    fn number(&mut self) -> Result<f64> {
        let neg = self.eat('-');
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            Some(Tok::Ident(s)) if s == "pi" => {
                self.pos += 1;
                Ok(if neg { -PI } else { PI })
            }
            _ => self.err("expected a number"),
        }
    }

    fn point(&mut self) -> Result<Vec<f64>> {
        let dim = self.n + 1;
        if self.eat('[') {
            let mut v = vec![self.number()?];
            while self.eat(',') {
                v.push(self.number()?);
            }
            self.expect(']')?;
            if v.len() != dim {
                return self.err(format!("point needs {dim} coordinates, got {}", v.len()));
            }
            if check_unit(&v, "point").is_err() {
                return self.err("point is not a unit vector");
            }
            return Ok(v);
        }
        let neg = self.eat('-');
        if let Some(Tok::Ident(s)) = self.peek().cloned() {
            if let Some(k) = s.strip_prefix('e').and_then(|k| k.parse::<usize>().ok()) {
                if k == 0 || k > dim {
                    return self.err(format!("basis vector e{k} outside 1..={dim}"));
                }
                self.pos += 1;
                let mut v = basis(dim, k - 1);
                if neg {
                    v[k - 1] = -1.0;
                }
                return Ok(v);
            }
        }
        self.err("expected a point '[...]' or 'eK'")
    }

    fn call1(&mut self) -> Result<ScalarField> {
        self.expect('(')?;
        let a = self.expr()?;
        self.expect(')')?;
        Ok(a)
    }

    fn atom(&mut self) -> Result<ScalarField> {
        let n = self.n;
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(ScalarField::constant(n, v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "pi" => Ok(ScalarField::constant(n, PI)),
                    "exp" => Ok(self.call1()?.exp()),
                    "log" => Ok(self.call1()?.ln()),
                    "pow" => {
                        self.expect('(')?;
                        let base = self.expr()?;
                        self.expect(',')?;
                        let start = self.pos;
                        let e = self.expr()?;
                        self.expect(')')?;
                        self.raise(base, e, start)
                    }
                    "dist" => {
                        self.expect('(')?;
                        let c = self.point()?;
                        self.expect(')')?;
                        Ok(ScalarField::distance_to(&c))
                    }
                    "bump" => {
                        self.expect('(')?;
                        let c = self.point()?;
                        if !self.eat(';') {
                            self.expect(',')?;
                        }
                        let rho = self.number()?;
                        self.expect(')')?;
                        if !(rho > 0.0 && rho < PI) {
                            return self.err("bump radius must lie in (0, pi)");
                        }
                        Ok(ScalarField::bump(&c, rho))
                    }
                    _ => {
                        if let Some(k) = name.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
                            if k >= 1 && k <= n + 1 {
                                return Ok(ScalarField::coordinate(n, k - 1));
                            }
                            self.pos -= 1;
                            return self.err(format!("coordinate x{k} outside x1..=x{}", n + 1));
                        }
                        self.pos -= 1;
                        self.err(format!("unknown name '{name}'"))
                    }
                }
            }
            _ => self.err("expected an expression"),
        }
    }
}

/// Parses an expression into a field on Sⁿ.
pub fn parse_field(src: &str, n: usize) -> Result<ScalarField> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, n, src };
    let f = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(f.with_label(src.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(src: &str, p: &[f64]) -> f64 {
        parse_field(src, p.len() - 1).unwrap().eval(p)
    }

    #[test]
    fn arithmetic_and_precedence() {
        let p = [0.6, 0.8, 0.0];
        assert!((at("1 + 2 * x1", &p) - 2.2).abs() < 1e-15);
        assert!((at("-x2^2", &p) + 0.64).abs() < 1e-15);
        assert!((at("(x1 + x2) / 2", &p) - 0.7).abs() < 1e-15);
        assert!((at("exp(0.3 * x1)", &p) - (0.18f64).exp()).abs() < 1e-15);
        assert!((at("pow(x2, 3)", &p) - 0.512).abs() < 1e-15);
        assert!((at("2.5e-1", &p) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn geometric_primitives() {
        let p = [0.0, 1.0, 0.0];
        assert!((at("dist(e1)", &p) - PI / 2.0).abs() < 1e-15);
        assert!((at("dist(-e2)", &p) - PI).abs() < 1e-15);
        assert_eq!(at("bump([0, 1, 0]; 0.5)", &p), 1.0);
        assert_eq!(at("bump(e1, 0.5)", &p), 0.0);
    }

    #[test]
    fn parsed_fields_have_gradients() {
        let f = parse_field("x1 * exp(x2)", 2).unwrap();
        assert!(f.has_closed_form_gradient());
    }

    #[test]
    fn errors_report_offsets() {
        match parse_field("1 + x9", 3) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_field("1 +", 3).is_err());
        assert!(parse_field("foo(1)", 3).is_err());
        assert!(parse_field("dist([1, 1, 0, 0])", 3).is_err());
        assert!(parse_field("1 2", 3).is_err());
    }
}
