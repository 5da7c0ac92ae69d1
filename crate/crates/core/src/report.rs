//! Output formatting shared by the CLI and the test suites.
//!
//! CSV files use UTF-8, comma separators, a header row, and C-style
//! `%.12e` scientific notation so outputs are byte-stable across runs.

use std::fmt::Write as _;

/// Format a float like C's `%.12e` (two-or-more digit exponent with sign).
pub fn fmt_e12(x: f64) -> String {
    if x == 0.0 {
        return "0.000000000000e+00".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let s = format!("{:.12e}", x);
    // Rust renders "1.5e3" / "1.5e-3"; rewrite the exponent as e+03 / e-03.
    let (mantissa, exp) = s.split_once('e').expect("exponential format");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    if digits.len() >= 2 {
        format!("{mantissa}e{sign}{digits}")
    } else {
        format!("{mantissa}e{sign}0{digits}")
    }
}

/// Render a CSV table: header plus rows of already-formatted cells.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}
