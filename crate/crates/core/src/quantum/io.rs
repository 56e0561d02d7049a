//! Text forms of complex operators.
//!
//! ```text
//! 2
//! 1+0i 0-1i
//! 0+1i -1+0i
//! ```
//! The dimension comes first, then `n²` entries `a+bi` row-major, separated by
//! any whitespace. The CSV form is a pair of real and imaginary matrices.

use std::fmt::Write as _;

use nalgebra::Complex;

use super::operators::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::model::io::fmt_f64;

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number '{s}'")))
}

/// Parses `a+bi`, `a-bi`, `a`, `bi`, with optional exponents in either part.
pub fn parse_complex(token: &str) -> Result<C64> {
    let t = token.trim();
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return Ok(Complex::new(parse_f64(t)?, 0.0));
    };
    let bytes = body.as_bytes();
    // the split sign is the last +/- that is not leading and not part of an exponent
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (parse_f64(&body[..k])?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        s => parse_f64(s)?,
    };
    Ok(Complex::new(re, im))
}

pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", fmt_f64(z.re), fmt_f64(z.im.abs()))
}

pub fn parse_operator_text(text: &str) -> Result<CMatrix> {
    let mut tokens = text.split_whitespace();
    let n: usize = tokens
        .next()
        .ok_or_else(|| Error::Parse("empty operator file".into()))?
        .parse()
        .map_err(|_| Error::Parse("first token must be the dimension".into()))?;
    if n == 0 {
        return Err(Error::Parse("dimension must be positive".into()));
    }
    let entries = tokens.map(parse_complex).collect::<Result<Vec<_>>>()?;
    if entries.len() != n * n {
        return Err(Error::Parse(format!("expected {} entries, found {}", n * n, entries.len())));
    }
    Ok(CMatrix::from_row_slice(n, n, &entries))
}

pub fn operator_text(m: &CMatrix) -> String {
    let mut out = format!("{}\n", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

fn parse_real_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| l.split(',').map(parse_f64).collect())
        .collect()
}

/// Combines real and imaginary CSV matrices.
pub fn parse_operator_csv(real: &str, imag: &str) -> Result<CMatrix> {
    let re = parse_real_csv(real)?;
    let im = parse_real_csv(imag)?;
    let n = re.len();
    if n == 0 || im.len() != n || re.iter().chain(&im).any(|r| r.len() != n) {
        return Err(Error::Parse("real and imaginary parts must be matching square matrices".into()));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex::new(re[i][j], im[i][j])))
}

/// `(real, imaginary)` CSV matrices.
pub fn operator_csv(m: &CMatrix) -> (String, String) {
    let part = |f: fn(&C64) -> f64| {
        let mut out = String::new();
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(f(&m[(i, j)]))).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    };
    (part(|z| z.re), part(|z| z.im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn complex_tokens() {
        assert_eq!(parse_complex("1+2i").unwrap(), Complex::new(1.0, 2.0));
        assert_eq!(parse_complex("-1.5e-3-2E+2i").unwrap(), Complex::new(-1.5e-3, -200.0));
        assert_eq!(parse_complex("3").unwrap(), Complex::new(3.0, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), Complex::new(0.0, -1.0));
        assert_eq!(parse_complex("0.5i").unwrap(), Complex::new(0.0, 0.5));
        assert!(parse_complex("1+xi").is_err());
    }

    #[test]
    fn text_format() {
        let m = parse_operator_text("2\n0 -i\ni 0\n").unwrap();
        assert_eq!(m, super::super::pauli_y());
        assert!(parse_operator_text("2\n1 2 3").is_err());
        let (re, im) = operator_csv(&m);
        assert_eq!(parse_operator_csv(&re, &im).unwrap(), m);
    }

    proptest! {
        #[test]
        fn text_round_trip(entries in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 9)) {
            let m = CMatrix::from_row_slice(3, 3, &entries.iter().map(|&(a, b)| Complex::new(a, b)).collect::<Vec<_>>());
            prop_assert_eq!(parse_operator_text(&operator_text(&m)).unwrap(), m);
        }
    }
}
