//! Tick-label formats and a tolerant number parser.
//!
//! Formatting covers the four y-axis label styles of the benchmark. Parsing
//! accepts any of them (plus a few spellings models like to emit) and is
//! locale independent: `,` only groups thousands and `.` is the only decimal
//! separator.

use alloc::format;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TickFormat {
    #[default]
    Plain,
    Comma,
    Scientific,
    Abbrev,
}

impl TickFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            TickFormat::Plain => "plain",
            TickFormat::Comma => "comma",
            TickFormat::Scientific => "scientific",
            TickFormat::Abbrev => "abbrev",
        }
    }
}

/// Abbreviation suffixes and their magnitudes, smallest first.
pub const ABBREV_UNITS: [(char, f64); 4] = [('K', 1e3), ('M', 1e6), ('B', 1e9), ('T', 1e12)];

const ABBREV_FRACTION_DIGITS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NumberFormat {
    pub kind: TickFormat,
    pub scientific_mantissa_digits: usize,
}

impl NumberFormat {
    pub const fn new(kind: TickFormat) -> Self {
        Self {
            kind,
            scientific_mantissa_digits: 2,
        }
    }
}

impl From<TickFormat> for NumberFormat {
    fn from(kind: TickFormat) -> Self {
        Self::new(kind)
    }
}

/// Formats a tick value.
///
/// ```
/// use chartbench_core::numformat::{format_tick, TickFormat};
/// assert_eq!(format_tick(7000.0, TickFormat::Comma), "7,000");
/// assert_eq!(format_tick(7e6, TickFormat::Scientific), "7.00e+6");
/// assert_eq!(format_tick(7000.0, TickFormat::Abbrev), "7K");
/// ```
pub fn format_tick(v: f64, fmt: impl Into<NumberFormat>) -> String {
    let fmt = fmt.into();
    // Fold -0.0 into 0.0 so no format prints a signed zero.
    let v = if v == 0.0 { 0.0 } else { v };
    match fmt.kind {
        TickFormat::Plain => plain(v),
        TickFormat::Comma => group_thousands(&plain(v)),
        TickFormat::Scientific => scientific(v, fmt.scientific_mantissa_digits),
        TickFormat::Abbrev => abbreviate(v),
    }
}

fn plain(v: f64) -> String {
    // Display for f64 never switches to exponent notation and prints the
    // shortest digits that round-trip.
    v.to_string()
}

fn group_thousands(plain: &str) -> String {
    let (sign, rest) = match plain.strip_prefix('-') {
        Some(r) => ("-", r),
        None => ("", plain),
    };
    let (int_part, frac) = match rest.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (rest, None),
    };
    let mut out = String::from(sign);
    for (i, c) in int_part.chars().enumerate() {
        if i > 0 && (int_part.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    if let Some(f) = frac {
        out.push('.');
        out.push_str(f);
    }
    out
}

fn scientific(v: f64, digits: usize) -> String {
    let raw = format!("{:.*e}", digits, v);
    match raw.split_once('e') {
        Some((mantissa, exp)) if !exp.starts_with('-') => format!("{mantissa}e+{exp}"),
        _ => raw,
    }
}

fn abbreviate(v: f64) -> String {
    let magnitude = libm::fabs(v);
    match ABBREV_UNITS.iter().rev().find(|(_, unit)| *unit <= magnitude) {
        Some((suffix, unit)) => {
            let scaled = format!("{:.*}", ABBREV_FRACTION_DIGITS, v / unit);
            format!("{}{}", trim_fraction(&scaled), suffix)
        }
        None => plain(v),
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses a number written in any supported tick format.
///
/// Accepts plain decimals, `,`-grouped thousands, scientific notation
/// (`7.00e+6`, `7e6`, `7.00e + 6`), K/M/B/T suffixes (any case, optional
/// space), a leading `-`, `−` or `+`, and a trailing `%`, which is dropped
/// without rescaling.
pub fn parse_number(s: &str) -> Result<f64> {
    let err = || Error::Parse {
        token: s.to_string(),
    };
    let mut body = s.trim();
    if let Some(rest) = body.strip_suffix('%') {
        body = rest.trim_end();
    }
    let mut negative = false;
    if let Some(rest) = body.strip_prefix('-').or_else(|| body.strip_prefix('\u{2212}')) {
        negative = true;
        body = rest.trim_start();
    } else if let Some(rest) = body.strip_prefix('+') {
        body = rest.trim_start();
    }

    let mut exponent_shift = 0;
    if let Some(last) = body.chars().last() {
        let upper = last.to_ascii_uppercase();
        if let Some(k) = ABBREV_UNITS.iter().position(|(c, _)| *c == upper) {
            exponent_shift = 3 * (k as i32 + 1);
            body = body[..body.len() - last.len_utf8()].trim_end();
        }
    }
    if body.is_empty() {
        return Err(err());
    }

    let has_exponent = body.contains(['e', 'E']);
    let compact: String = if has_exponent {
        body.chars().filter(|c| !c.is_whitespace()).collect()
    } else if body.chars().any(char::is_whitespace) {
        return Err(err());
    } else {
        body.to_string()
    };
    let compact = strip_grouping(&compact).ok_or_else(err)?;

    let valid_chars = compact
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'));
    if !valid_chars || !compact.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return Err(err());
    }
    if !compact.chars().any(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    if has_exponent && exponent_shift != 0 {
        return Err(err());
    }

    let text = if exponent_shift != 0 {
        format!("{compact}e{exponent_shift}")
    } else {
        compact
    };
    let value: f64 = text.parse().map_err(|_| err())?;
    if !value.is_finite() {
        return Err(err());
    }
    Ok(if negative { -value } else { value })
}

/// Removes thousands separators after checking they sit on 3-digit group
/// boundaries of the integer part. `None` if the grouping is malformed.
fn strip_grouping(s: &str) -> Option<String> {
    if !s.contains(',') {
        return Some(s.to_string());
    }
    let int_end = s.find(['.', 'e', 'E']).unwrap_or(s.len());
    let (int_part, rest) = s.split_at(int_end);
    if rest.contains(',') {
        return None;
    }
    let mut groups = int_part.split(',');
    let first = groups.next()?;
    if first.is_empty() || first.len() > 3 {
        return None;
    }
    let mut out = String::from(first);
    for g in groups {
        if g.len() != 3 {
            return None;
        }
        out.push_str(g);
    }
    out.push_str(rest);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn format_examples() {
        assert_eq!(format_tick(7000.0, TickFormat::Comma), "7,000");
        assert_eq!(format_tick(7_000_000.0, TickFormat::Scientific), "7.00e+6");
        assert_eq!(format_tick(7000.0, TickFormat::Abbrev), "7K");
        assert_eq!(format_tick(0.0, TickFormat::Abbrev), "0");
    }

    #[test]
    fn plain_format() {
        assert_eq!(format_tick(10.0, TickFormat::Plain), "10");
        assert_eq!(format_tick(0.4, TickFormat::Plain), "0.4");
        assert_eq!(format_tick(1e16, TickFormat::Plain), "10000000000000000");
        assert_eq!(format_tick(-0.0, TickFormat::Plain), "0");
        assert_eq!(format_tick(-6.0, TickFormat::Plain), "-6");
    }

    #[test]
    fn comma_format() {
        assert_eq!(format_tick(0.0, TickFormat::Comma), "0");
        assert_eq!(format_tick(999.0, TickFormat::Comma), "999");
        assert_eq!(format_tick(1_234_567.5, TickFormat::Comma), "1,234,567.5");
        assert_eq!(format_tick(-60_000.0, TickFormat::Comma), "-60,000");
        assert_eq!(format_tick(0.025, TickFormat::Comma), "0.025");
    }

    #[test]
    fn scientific_format() {
        assert_eq!(format_tick(0.0, TickFormat::Scientific), "0.00e+0");
        assert_eq!(format_tick(10.0, TickFormat::Scientific), "1.00e+1");
        assert_eq!(format_tick(0.025, TickFormat::Scientific), "2.50e-2");
        assert_eq!(format_tick(-1.25e15, TickFormat::Scientific), "-1.25e+15");
        let three = NumberFormat {
            kind: TickFormat::Scientific,
            scientific_mantissa_digits: 3,
        };
        assert_eq!(format_tick(1234.0, three), "1.234e+3");
    }

    #[test]
    fn abbrev_format() {
        assert_eq!(format_tick(1_250_000.0, TickFormat::Abbrev), "1.25M");
        assert_eq!(format_tick(17_500.0, TickFormat::Abbrev), "17.5K");
        assert_eq!(format_tick(2e9, TickFormat::Abbrev), "2B");
        assert_eq!(format_tick(1e16, TickFormat::Abbrev), "10000T");
        assert_eq!(format_tick(400.0, TickFormat::Abbrev), "400");
        assert_eq!(format_tick(0.025, TickFormat::Abbrev), "0.025");
        assert_eq!(format_tick(-3000.0, TickFormat::Abbrev), "-3K");
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_number("7,000").unwrap(), 7000.0);
        assert_eq!(parse_number("7.00e+6").unwrap(), 7_000_000.0);
        assert_eq!(parse_number("3.5M").unwrap(), 3_500_000.0);
        assert_eq!(parse_number("7K").unwrap(), 7000.0);
        assert!(matches!(parse_number("abc"), Err(Error::Parse { token }) if token == "abc"));
    }

    #[test]
    fn parse_variants() {
        assert_eq!(parse_number("7.00e + 6").unwrap(), 7e6);
        assert_eq!(parse_number("7.00E6").unwrap(), 7e6);
        assert_eq!(parse_number("2.50e-2").unwrap(), 0.025);
        assert_eq!(parse_number("1.75 k").unwrap(), 1750.0);
        assert_eq!(parse_number("1.1K").unwrap(), 1100.0);
        assert_eq!(parse_number("−250").unwrap(), -250.0);
        assert_eq!(parse_number("- 4").unwrap(), -4.0);
        assert_eq!(parse_number("+4").unwrap(), 4.0);
        assert_eq!(parse_number("45%").unwrap(), 45.0);
        assert_eq!(parse_number("  12.5  ").unwrap(), 12.5);
        assert_eq!(parse_number("1,234,567.5").unwrap(), 1_234_567.5);
        assert_eq!(parse_number(".5").unwrap(), 0.5);
    }

    #[test]
    fn parse_rejects() {
        for bad in [
            "", " ", "%", "-", "K", "inf", "NaN", "1,2", "12,34", "1.5.2", "1 000", "1e5K",
            "0x10", "1,000.0,0", "e5", "1e400",
        ] {
            assert!(parse_number(bad).is_err(), "{bad:?} should not parse");
        }
    }

    proptest! {
        #[test]
        fn plain_round_trip_exact_for_integers(v in -(1i64 << 53)..(1i64 << 53)) {
            let v = v as f64;
            prop_assert_eq!(parse_number(&format_tick(v, TickFormat::Plain)).unwrap(), v);
        }

        #[test]
        fn comma_round_trip_exact(v in -1e15f64..1e15) {
            prop_assert_eq!(parse_number(&format_tick(v, TickFormat::Comma)).unwrap(), v);
        }

        #[test]
        fn short_decimals_round_trip_every_format(m in 1i64..1000, e in -4i32..14) {
            // Values with at most three significant digits, like generated ticks.
            let v: f64 = format!("{m}e{e}").parse().unwrap();
            for kind in [TickFormat::Plain, TickFormat::Comma, TickFormat::Scientific, TickFormat::Abbrev] {
                let back = parse_number(&format_tick(v, kind)).unwrap();
                prop_assert!(libm::fabs(back - v) <= 1e-6 * v, "{:?} {} -> {}", kind, v, back);
            }
        }
    }
}
