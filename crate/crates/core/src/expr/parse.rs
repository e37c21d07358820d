use num_complex::Complex64;

use super::{Expr, PotentialExpr};
use crate::error::{KaeError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Comma,
}

fn syntax(position: usize, message: impl Into<String>) -> KaeError {
    KaeError::Parse {
        position,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((i, Tok::Plus));
                i += 1
            }
            '-' => {
                out.push((i, Tok::Minus));
                i += 1
            }
            '*' => {
                out.push((i, Tok::Star));
                i += 1
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1
            }
            ',' => {
                out.push((i, Tok::Comma));
                i += 1
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let value: f64 = lit
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{lit}`")))?;
                if !value.is_finite() {
                    return Err(syntax(start, format!("non-finite number `{lit}`")));
                }
                out.push((start, Tok::Num(value)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
            }
            other => return Err(syntax(i, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
struct Dialect {
    var: &'static str,
    allow_modes: bool,
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
    dialect: Dialect,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let at = self.offset();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(syntax(at, format!("expected {what}, found {t:?}"))),
            None => Err(syntax(at, format!("expected {what}, found end of input"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    terms.push(Expr::scale(Complex64::new(-1.0, 0.0), rhs));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Sum(flatten_sum(terms))
        })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut factors = vec![self.unary()?];
        let mut fiber_factor = factors[0].depends_on_fiber();
        while let Some(Tok::Star) = self.peek() {
            let at = self.offset();
            self.bump();
            let rhs = self.unary()?;
            if fiber_factor && rhs.depends_on_fiber() {
                return Err(syntax(
                    at,
                    "`*` needs at least one factor free of fiber modes",
                ));
            }
            fiber_factor |= rhs.depends_on_fiber();
            factors.push(rhs);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            let mut flat = Vec::new();
            for f in factors {
                match f {
                    Expr::Product(inner) => flat.extend(inner),
                    f => flat.push(f),
                }
            }
            Expr::Product(flat)
        })
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Tok::Minus) = self.peek() {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::scale(Complex64::new(-1.0, 0.0), inner));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::constant(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.call(at, &name),
            Some(t) => Err(syntax(at, format!("unexpected token {t:?}"))),
            None => Err(syntax(at, "unexpected end of input")),
        }
    }

    fn call(&mut self, at: usize, name: &str) -> Result<Expr> {
        let var = self.dialect.var;
        match name {
            "re" | "im" | "abs2" => {
                self.expect(Tok::LParen, "`(`")?;
                let arg_at = self.offset();
                match self.bump() {
                    Some(Tok::Ident(v)) if v == var => {}
                    _ => {
                        return Err(syntax(
                            arg_at,
                            format!("`{name}` takes the variable `{var}`"),
                        ))
                    }
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(match name {
                    "re" => Expr::ReT,
                    "im" => Expr::ImT,
                    _ => Expr::Abs2T,
                })
            }
            "cosm" | "sinm" => {
                if !self.dialect.allow_modes {
                    return Err(syntax(at, format!("`{name}` is not allowed here")));
                }
                self.expect(Tok::LParen, "`(`")?;
                let m = self.integer()?;
                self.expect(Tok::Comma, "`,`")?;
                let n = self.integer()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(if name == "cosm" {
                    Expr::CosMode(m, n)
                } else {
                    Expr::SinMode(m, n)
                })
            }
            "x" | "y" | "z" if name != var => Err(syntax(
                at,
                format!("bare fiber variable `{name}`; fiber dependence enters through cosm/sinm"),
            )),
            v if v == var => Err(syntax(
                at,
                format!("bare variable `{var}`; use re({var}), im({var}) or abs2({var})"),
            )),
            other => Err(syntax(at, format!("unknown identifier `{other}`"))),
        }
    }

    fn integer(&mut self) -> Result<i64> {
        let at = self.offset();
        let negative = if let Some(Tok::Minus) = self.peek() {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Some(Tok::Num(v)) if v.fract() == 0.0 && v.abs() < 1e15 => {
                let k = v as i64;
                Ok(if negative { -k } else { k })
            }
            _ => Err(syntax(at, "mode arguments must be integers")),
        }
    }
}

fn flatten_sum(terms: Vec<Expr>) -> Vec<Expr> {
    let mut flat = Vec::new();
    for t in terms {
        match t {
            Expr::Sum(inner) => flat.extend(inner),
            t => flat.push(t),
        }
    }
    flat
}

fn parse_with(text: &str, dialect: Dialect) -> Result<Expr> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(syntax(0, "empty expression"));
    }
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: text.len(),
        dialect,
    };
    let e = p.expr()?;
    if p.pos < toks.len() {
        return Err(syntax(p.offset(), "trailing input"));
    }
    Ok(e)
}

/// Parses a twist potential in `re(t)`, `im(t)`, `abs2(t)`, `cosm(m,n)`,
/// `sinm(m,n)`, real literals, `+ - *` and parentheses.
pub fn parse_potential(text: &str) -> Result<PotentialExpr> {
    parse_with(
        text,
        Dialect {
            var: "t",
            allow_modes: true,
        },
    )
    .map(PotentialExpr::from_root)
}

/// Parses a Bergman chart weight: a polynomial in `re(z)`, `im(z)`, `abs2(z)`.
/// The chart variable is stored in the `t` slots of the tree.
pub fn parse_chart_weight(text: &str) -> Result<PotentialExpr> {
    parse_with(
        text,
        Dialect {
            var: "z",
            allow_modes: false,
        },
    )
    .map(PotentialExpr::from_root)
}
