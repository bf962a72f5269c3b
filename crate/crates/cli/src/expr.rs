//! Arithmetic on numeric config values: `11/45`, `-pi^2`, `1/(2*pi)`.
//!
//! Grammar: `expr = term (('+'|'-') term)*`, `term = unary (('*'|'/') unary)*`,
//! `unary = '-' unary | power`, `power = atom ('^' unary)?`,
//! `atom = number | 'pi' | '(' expr ')'`.

use std::f64::consts::PI;

pub fn eval(src: &str) -> Result<f64, String> {
    let mut p = Parser { s: src.as_bytes(), pos: 0 };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(format!("unexpected `{}` in `{src}`", &src[p.pos..]));
    }
    if !v.is_finite() {
        return Err(format!("`{src}` is not finite"));
    }
    Ok(v)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<f64, String> {
        let mut v = self.term()?;
        loop {
            if self.eat(b'+') {
                v += self.term()?;
            } else if self.eat(b'-') {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        loop {
            if self.eat(b'*') {
                v *= self.unary()?;
            } else if self.eat(b'/') {
                v /= self.unary()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> Result<f64, String> {
        if self.eat(b'-') {
            Ok(-self.unary()?)
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<f64, String> {
        let base = self.atom()?;
        if self.eat(b'^') {
            Ok(base.powf(self.unary()?))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<f64, String> {
        if self.eat(b'(') {
            let v = self.expr()?;
            return if self.eat(b')') { Ok(v) } else { Err("missing `)`".into()) };
        }
        let start = self.pos;
        if self.s[start..].starts_with(b"pi") {
            self.pos += 2;
            return Ok(PI);
        }
        while self.pos < self.s.len() {
            let c = self.s[self.pos];
            let exponent_sign =
                (c == b'+' || c == b'-') && self.pos > start && matches!(self.s[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exponent_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii slice");
        if text.is_empty() {
            return Err(match self.s.get(start) {
                Some(&c) => format!("unexpected `{}`", c as char),
                None => "unexpected end of expression".into(),
            });
        }
        text.parse().map_err(|_| format!("invalid number `{text}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_are_exact_divisions() {
        assert_eq!(eval("11/45").unwrap(), 11.0 / 45.0);
        assert_eq!(eval(" 1 / 36 ").unwrap(), 1.0 / 36.0);
    }

    #[test]
    fn pi_powers_and_signs() {
        assert_eq!(eval("-pi^2").unwrap(), -(PI * PI));
        assert_eq!(eval("pi^4").unwrap(), PI.powf(4.0));
        assert_eq!(eval("2^-1").unwrap(), 0.5);
        assert_eq!(eval("1/(2*pi)").unwrap(), 1.0 / (2.0 * PI));
        assert_eq!(eval("1 - 2*3").unwrap(), -5.0);
    }

    #[test]
    fn scientific_notation() {
        assert_eq!(eval("4e-4").unwrap(), 4e-4);
        assert_eq!(eval("1.5E+2").unwrap(), 150.0);
        assert_eq!(eval("1e-3-1e-3").unwrap(), 0.0);
    }

    #[test]
    fn malformed_input_is_rejected() {
        for bad in ["", "1/", "(1", "pi pi", "abc", "1/0", "1..2"] {
            assert!(eval(bad).is_err(), "{bad}");
        }
    }
}
