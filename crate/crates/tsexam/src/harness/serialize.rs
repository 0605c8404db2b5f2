//! Text encoding of series for text-mode prompts.

use tsexam_core::synth::TimeSeries;

/// Cuts `v` to one decimal place toward zero.
///
/// Digits are cut from the shortest decimal representation that
/// round-trips to `v`, so `0.3` gives `0.3` even though the nearest double
/// is slightly below it. A result of zero is printed without a sign.
pub fn truncate_one_decimal(v: f64) -> String {
    let repr = format!("{v}");
    let (negative, digits) = match repr.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, repr.as_str()),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let tenth = frac.chars().next().unwrap_or('0');
    let zero = int.bytes().all(|b| b == b'0') && tenth == '0';
    let sign = if negative && !zero { "-" } else { "" };
    format!("{sign}{int}.{tenth}")
}

/// Comma-joined one-decimal values, no spaces and no scaling.
pub fn serialize_values(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 5);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&truncate_one_decimal(*v));
    }
    out
}

pub fn serialize_text(ts: &TimeSeries) -> String {
    serialize_values(ts.values())
}
