//! Form specifications on the command line.
//!
//! ```text
//! spec    := ["lin:"] sum
//! sum     := term (("+" | "-") term)*
//! term    := [coef "*"] factor ("*" factor)*
//! factor  := "D" factor | primary ["^" int]
//! primary := "(" sum ")" | "E:" int | "gap:" k "," m | "gap:k=" k ",m=" m | name
//! name    := E2 | E4 | E6 | E14 | E<k> | Delta | j
//! ```
//!
//! Coefficients are integers, fractions `p/q` or decimals.

use quasizeros::forms::{classical_form, derivative_quasiform, eisenstein, gap_form, ClassicalForm, QuasiForm};
use quasizeros::{Error, Result};
use rug::{Integer, Rational};

pub fn parse_form(spec: &str, terms: usize) -> Result<QuasiForm> {
    let s: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
    let body = s.strip_prefix("lin:").unwrap_or(&s);
    let mut p = Parser { s: body.as_bytes(), pos: 0, terms };
    let f = p.sum()?;
    if p.pos != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(f)
}

/// Exact rational from "3", "-3/2", "2.5" or "1e-6".
pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::InvalidArgument(format!("not a number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: Integer = n.parse().map_err(|_| bad())?;
        let d: Integer = d.parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(Error::DivisionByZero);
        }
        return Ok(Rational::from((n, d)));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    let digits = format!("{ip}{fp}");
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let n: Integer = digits.parse().map_err(|_| bad())?;
    let e = exp - fp.len() as i32;
    let ten = Integer::from(10);
    let mut r = if e >= 0 {
        Rational::from(n * Integer::from(rug::ops::Pow::pow(&ten, e as u32)))
    } else {
        Rational::from((n, Integer::from(rug::ops::Pow::pow(&ten, (-e) as u32))))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    terms: usize,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> Error {
        let rest = String::from_utf8_lossy(&self.s[self.pos..]);
        Error::InvalidArgument(format!("form spec: {what} at {rest:?}"))
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, lit: &str) -> bool {
        let b = lit.as_bytes();
        if self.s.len() >= self.pos + b.len() && self.s[self.pos..self.pos + b.len()].eq_ignore_ascii_case(b) {
            self.pos += b.len();
            true
        } else {
            false
        }
    }

    fn int(&mut self) -> Result<i64> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).ok().and_then(|t| t.parse().ok()).ok_or_else(|| {
            self.pos = start;
            self.err("expected an integer")
        })
    }

    fn sum(&mut self) -> Result<QuasiForm> {
        let mut acc = self.term(false)?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let t = self.term(false)?;
                    acc = acc.add(&t)?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    let t = self.term(true)?;
                    acc = acc.add(&t)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    /// A coefficient is present when a number is followed by '*'.
    fn coefficient(&mut self) -> Result<Option<Rational>> {
        let start = self.pos;
        let mut end = start;
        while end < self.s.len() && matches!(self.s[end], b'0'..=b'9' | b'.' | b'/' | b'e' | b'E' | b'-' | b'+') {
            let c = self.s[end];
            // a sign is only part of the number at its start or after an exponent marker
            if matches!(c, b'-' | b'+') && end != start && !matches!(self.s[end - 1], b'e' | b'E') {
                break;
            }
            // an exponent marker needs a digit before it
            if matches!(c, b'e' | b'E') && (end == start || !self.s[end - 1].is_ascii_digit()) {
                break;
            }
            end += 1;
        }
        if end < self.s.len() && self.s[end] == b'*' && end > start {
            let text = std::str::from_utf8(&self.s[start..end]).map_err(|_| self.err("bad coefficient"))?;
            let r = parse_rational(text)?;
            self.pos = end + 1;
            return Ok(Some(r));
        }
        Ok(None)
    }

    fn term(&mut self, negate: bool) -> Result<QuasiForm> {
        let c = self.coefficient()?;
        let mut f = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            let g = self.factor()?;
            f = product(&f, &g)?;
        }
        let mut c = c.unwrap_or_else(|| Rational::from(1));
        if negate {
            c = -c;
        }
        Ok(if c == 1 { f } else { f.scale(&c) })
    }

    fn factor(&mut self) -> Result<QuasiForm> {
        if !self.lookahead_name() && self.eat("D") {
            let f = self.factor()?;
            return derivative_quasiform(&f);
        }
        let f = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.int()?;
            if n < 0 {
                return Err(self.err("negative power"));
            }
            if f.depth() > 0 {
                return Err(self.err("powers of quasimodular forms are not supported"));
            }
            return Ok(QuasiForm::modular(f.weight() * n, f.flat().pow(n)?.truncate(self.terms)));
        }
        Ok(f)
    }

    fn lookahead_name(&self) -> bool {
        let rest = &self.s[self.pos..];
        rest.len() >= 5 && rest[..5].eq_ignore_ascii_case(b"delta")
    }

    fn primary(&mut self) -> Result<QuasiForm> {
        let n = self.terms;
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let f = self.sum()?;
            if self.peek() != Some(b')') {
                return Err(self.err("expected ')'"));
            }
            self.pos += 1;
            return Ok(f);
        }
        if self.eat("gap:") {
            let named = self.eat("k=");
            let k = self.int()?;
            if !self.eat(",") {
                return Err(self.err("expected ','"));
            }
            if named && !self.eat("m=") {
                return Err(self.err("expected 'm='"));
            }
            let m = self.int()?;
            // q^{-m} leads, so keep `terms` coefficients from there
            return Ok(gap_form(k, m, n)?.as_quasiform());
        }
        if self.eat("E:") {
            let k = self.int()?;
            return eisenstein_form(k, n);
        }
        if self.eat("delta") {
            return Ok(QuasiForm::modular(12, classical_form(ClassicalForm::Delta, n)?));
        }
        if self.eat("j") {
            return Ok(QuasiForm::modular(0, classical_form(ClassicalForm::J, n)?));
        }
        if self.eat("E") {
            let k = self.int()?;
            return eisenstein_form(k, n);
        }
        Err(self.err("expected a form"))
    }
}

/// Product of components: (sum a_i E2^i)(sum b_j E2^j).
fn product(a: &QuasiForm, b: &QuasiForm) -> Result<QuasiForm> {
    let (ca, cb) = (a.components(), b.components());
    let mut out: Vec<Option<quasizeros::QSeries>> = vec![None; ca.len() + cb.len() - 1];
    for (i, x) in ca.iter().enumerate() {
        for (j, y) in cb.iter().enumerate() {
            let t = x.mul(y);
            out[i + j] = Some(match out[i + j].take() {
                Some(acc) => acc.add(&t),
                None => t,
            });
        }
    }
    QuasiForm::new(a.weight() + b.weight(), out.into_iter().map(|c| c.expect("filled")).collect())
}

fn eisenstein_form(k: i64, n: usize) -> Result<QuasiForm> {
    if k == 2 {
        return Ok(QuasiForm::e2(n));
    }
    if k < 0 || k % 2 != 0 || k == 0 {
        return Err(Error::InvalidArgument(format!("no Eisenstein series of weight {k}")));
    }
    Ok(QuasiForm::modular(k, eisenstein(k as u32, n)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("-3/2").unwrap(), Rational::from((-3, 2)));
        assert_eq!(parse_rational("2.5").unwrap(), Rational::from((5, 2)));
        assert_eq!(parse_rational("1e-6").unwrap(), Rational::from((1, 1000000)));
        assert_eq!(parse_rational("9953280").unwrap(), Rational::from(9953280));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn names_and_derivatives() {
        let e4 = parse_form("E4", 10).unwrap();
        assert_eq!(e4.weight(), 4);
        assert_eq!(e4.flat().integer(1).unwrap(), 240);
        let d = parse_form("Delta", 10).unwrap();
        assert_eq!(d.flat().integer(2).unwrap(), -24);
        let de = parse_form("DE:4", 10).unwrap();
        assert_eq!(de.weight(), 6);
        assert_eq!(de.depth(), 1);
        assert_eq!(de.flat().integer(1).unwrap(), 240);
        let dd = parse_form("DDelta", 10).unwrap();
        assert_eq!(dd.flat().integer(2).unwrap(), -48);
    }

    #[test]
    fn gap_and_linear() {
        let a = parse_form("gap:24,1", 10).unwrap();
        let b = parse_form("gap:k=24,m=1", 10).unwrap();
        assert!(a.same_expansion(&b));
        assert_eq!(a.flat().lowest_order(), -1);
        let f = parse_form("lin:9953280*Delta^2-2880*Delta*E4^3+E4^6", 10).unwrap();
        let g = quasizeros::arith::prop65_build(24, &Rational::from(9953280), &Rational::from(-2880), 10).unwrap();
        assert_eq!(f.weight(), 24);
        assert_eq!(f.flat(), &g);
        let p = parse_form("E2*E4", 10).unwrap();
        assert_eq!(p.depth(), 1);
        assert_eq!(p.flat().integer(1).unwrap(), 240 - 24);
        let f = parse_form("lin:2*E4^3-1/2*E6^2", 10).unwrap();
        assert_eq!(f.weight(), 12);
        assert_eq!(f.flat().rational(0).unwrap(), Rational::from((3, 2)));
        assert!(parse_form("E4+E6", 10).is_err());
        assert!(parse_form("E4)", 10).is_err());
    }
}
