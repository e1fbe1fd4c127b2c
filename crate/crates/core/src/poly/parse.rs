//! Text and JSON input for polynomials and complex numbers.
//!
//! Accepted text is a sum of terms in `z`, e.g. `1 - 2z + z^3`,
//! `(1+2i)z^2 - 3i*z`, `0.5 z^4 + 1e-3`. A Unicode minus is accepted.
//! JSON input is an ascending array of `[re, im]` pairs (bare numbers are
//! read as real coefficients).

use super::{PolyError, Polynomial};
use num_complex::Complex64;
use serde::Deserialize;

/// Parses either the text form or a JSON coefficient array.
pub fn parse_polynomial(input: &str) -> Result<Polynomial, PolyError> {
    let trimmed = input.trim();
    if trimmed.starts_with('[') {
        return parse_json(trimmed);
    }
    let terms = Parser::new(trimmed).polynomial()?;
    let degree = terms.iter().map(|t| t.1).max().unwrap_or(0);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); degree + 1];
    for (c, k) in terms {
        coeffs[k] += c;
    }
    Polynomial::new(coeffs)
}

/// Parses a complex literal such as `1`, `-0.5+2i`, `3i`, `(1-i)`.
pub fn parse_complex(input: &str) -> Result<Complex64, PolyError> {
    let terms = Parser::new(input.trim()).polynomial()?;
    let mut value = Complex64::new(0.0, 0.0);
    for (c, k) in terms {
        if k != 0 {
            return Err(PolyError::Parse { position: 0, message: "expected a constant".into() });
        }
        value += c;
    }
    Ok(value)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonCoeff {
    Pair([f64; 2]),
    Real(f64),
}

fn parse_json(input: &str) -> Result<Polynomial, PolyError> {
    let raw: Vec<JsonCoeff> = serde_json::from_str(input).map_err(|e| PolyError::Parse { position: e.column(), message: e.to_string() })?;
    let coeffs = raw
        .into_iter()
        .map(|c| match c {
            JsonCoeff::Pair([re, im]) => Complex64::new(re, im),
            JsonCoeff::Real(re) => Complex64::new(re, 0.0),
        })
        .collect();
    Polynomial::new(coeffs)
}

type Term = (Complex64, usize);

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser {
    fn new(input: &str) -> Self {
        let chars = input.char_indices().filter(|(_, c)| !c.is_whitespace()).map(|(i, c)| (i, if c == '−' { '-' } else { c })).collect();
        Self { chars, pos: 0 }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map_or_else(|| self.chars.last().map_or(0, |&(i, _)| i + 1), |&(i, _)| i)
    }

    fn error(&self, message: impl Into<String>) -> PolyError {
        PolyError::Parse { position: self.offset(), message: message.into() }
    }

    fn polynomial(mut self) -> Result<Vec<Term>, PolyError> {
        let terms = self.sum()?;
        if self.pos != self.chars.len() {
            return Err(self.error("unexpected character"));
        }
        Ok(terms)
    }

    fn sum(&mut self) -> Result<Vec<Term>, PolyError> {
        let mut terms = Vec::new();
        let mut sign = 1.0;
        if let Some(c @ ('+' | '-')) = self.peek() {
            sign = if c == '-' { -1.0 } else { 1.0 };
            self.pos += 1;
        }
        loop {
            let (c, k) = self.term()?;
            terms.push((c * sign, k));
            match self.peek() {
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                _ => return Ok(terms),
            }
            self.pos += 1;
        }
    }

    fn term(&mut self) -> Result<Term, PolyError> {
        let mut coeff = Complex64::new(1.0, 0.0);
        let mut power = 0usize;
        let mut factors = 0;
        loop {
            match self.peek() {
                Some('*') if factors > 0 => {
                    self.pos += 1;
                    continue;
                }
                Some(c) if c.is_ascii_digit() || c == '.' => {
                    let v = self.number()?;
                    if self.peek() == Some('i') {
                        self.pos += 1;
                        coeff *= Complex64::new(0.0, v);
                    } else {
                        coeff *= v;
                    }
                }
                Some('i') => {
                    self.pos += 1;
                    coeff *= Complex64::new(0.0, 1.0);
                }
                Some('z') => {
                    self.pos += 1;
                    let mut k = 1;
                    if self.peek() == Some('^') {
                        self.pos += 1;
                        k = self.exponent()?;
                    }
                    power += k;
                }
                Some('(') => {
                    self.pos += 1;
                    let inner = self.sum()?;
                    if self.peek() != Some(')') {
                        return Err(self.error("expected ')'"));
                    }
                    self.pos += 1;
                    let mut value = Complex64::new(0.0, 0.0);
                    for (c, k) in inner {
                        if k != 0 {
                            return Err(self.error("parenthesized factor must be constant"));
                        }
                        value += c;
                    }
                    coeff *= value;
                }
                _ => break,
            }
            factors += 1;
        }
        if factors == 0 {
            return Err(self.error("expected a term"));
        }
        Ok((coeff, power))
    }

    fn number(&mut self) -> Result<f64, PolyError> {
        let start = self.pos;
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == '.' {
                text.push(c);
                self.pos += 1;
            } else if (c == 'e' || c == 'E') && !text.is_empty() {
                // exponent only when followed by a digit or a signed digit
                let next = self.chars.get(self.pos + 1).map(|&(_, c)| c);
                let after = self.chars.get(self.pos + 2).map(|&(_, c)| c);
                let signed = matches!(next, Some('+' | '-')) && after.is_some_and(|c| c.is_ascii_digit());
                if !(next.is_some_and(|c| c.is_ascii_digit()) || signed) {
                    break;
                }
                text.push('e');
                self.pos += 1;
                if signed {
                    text.push(self.peek().unwrap_or('+'));
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        text.parse::<f64>().map_err(|_| {
            self.pos = start;
            self.error(format!("invalid number '{text}'"))
        })
    }

    fn exponent(&mut self) -> Result<usize, PolyError> {
        let mut text = String::new();
        while let Some(c) = self.peek().filter(|c| c.is_ascii_digit()) {
            text.push(c);
            self.pos += 1;
        }
        text.parse().map_err(|_| self.error("expected a nonnegative integer exponent"))
    }
}
