//! Shared number formatting for CSV artifacts.
//!
//! Every float is written in scientific notation with 17 significant digits,
//! which round-trips any `f64` exactly.

/// Formats a float with 17 significant digits.
pub fn float(v: f64) -> String {
    if v == 0.0 {
        // Avoid "-0e0" for negative zero.
        return "0.0000000000000000e0".to_owned();
    }
    format!("{v:.16e}")
}

/// Joins already-formatted fields into one CSV line terminated by `\n`.
pub fn line<I, S>(fields: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = String::new();
    for (i, f) in fields.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(f.as_ref());
    }
    out.push('\n');
    out
}
