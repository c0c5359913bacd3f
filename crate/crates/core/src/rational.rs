//! Exact rational numbers used for every time constant and constraint
//! coefficient.

use num_integer::Integer;
use num_rational::Ratio;
use std::fmt;

/// Exact rational; always kept reduced with a positive denominator.
pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

pub fn int(n: i128) -> Rational {
    Rational::from_integer(n)
}

/// Parses `12`, `-0.01`, `+3.5` or `1/5` exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| err())?;
        let d: i128 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    if frac.len() > 30 {
        return Err(err());
    }
    let digits = format!("{whole}{frac}");
    let num: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| err())? };
    let den = 10i128.pow(frac.len() as u32);
    let r = Rational::new(num, den);
    Ok(if neg { -r } else { r })
}

/// Shortest exact decimal rendering (`0.2`, `1.75`, `-3`); falls back to
/// `n/d` when the expansion does not terminate.
pub fn fmt_decimal(r: &Rational) -> String {
    let mut den = *r.denom();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return r.to_string();
    }
    let places = twos.max(fives);
    if places == 0 {
        return r.numer().to_string();
    }
    let scale = 10i128.pow(places);
    let scaled = (r * int(scale)).to_integer();
    let neg = scaled < 0;
    let abs = scaled.abs();
    let whole = abs / scale;
    let frac = format!("{:0width$}", abs % scale, width = places as usize);
    let frac = frac.trim_end_matches('0');
    format!("{}{}.{}", if neg { "-" } else { "" }, whole, frac)
}

/// Fraction rendering used in machine-readable records (`1/5`, `-3`).
pub fn fmt_fraction(r: &Rational) -> String {
    r.to_string()
}

/// Least common multiple of the denominators of `values` (1 when empty).
pub fn lcm_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> i128 {
    values.into_iter().fold(1i128, |acc, v| acc.lcm(v.denom()))
}

/// Display adapter for decimal formatting.
pub struct Decimal<'a>(pub &'a Rational);

impl fmt::Display for Decimal<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_decimal(self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(parse_rational("0.01").unwrap(), Rational::new(1, 100));
        assert_eq!(parse_rational("-2.5").unwrap(), Rational::new(-5, 2));
        assert_eq!(parse_rational("100").unwrap(), int(100));
        assert_eq!(parse_rational("1/5").unwrap(), Rational::new(1, 5));
        assert_eq!(parse_rational(".5").unwrap(), Rational::new(1, 2));
        assert!(parse_rational("1.2.3").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational("3/0").is_err());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(fmt_decimal(&Rational::new(1, 5)), "0.2");
        assert_eq!(fmt_decimal(&Rational::new(17, 10)), "1.7");
        assert_eq!(fmt_decimal(&Rational::new(-1, 8)), "-0.125");
        assert_eq!(fmt_decimal(&int(3)), "3");
        assert_eq!(fmt_decimal(&Rational::new(1, 3)), "1/3");
        assert_eq!(fmt_fraction(&Rational::new(1, 2)), "1/2");
    }

    #[test]
    fn lcm_of_constants() {
        let v = [Rational::new(1, 100), Rational::new(1, 4), int(2)];
        assert_eq!(lcm_denominators(v.iter()), 100);
    }
}
