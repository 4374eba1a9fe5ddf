//! Quantities with optional unit suffixes, normalized to watts or plain
//! ratios.

/// Parses `"40 dBm"`, `"6 dBW"`, `"8 dB"`, `"5 mW"`, `"2 W"` or a bare number.
///
/// `dB` is a plain power ratio, which for absolute quantities reads as dBW.
pub fn parse_quantity(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| c.is_ascii_alphabetic() && !is_exponent(t, i))
        .map_or(t.len(), |(i, _)| i);
    let (num, unit) = t.split_at(split);
    let x: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{t}` is not a number with an optional unit"))?;
    if !x.is_finite() {
        return Err(format!("`{t}` is not finite"));
    }
    let v = match unit.trim() {
        "" | "W" => x,
        "mW" => x * 1e-3,
        "dB" | "dBW" => db_to_linear(x),
        "dBm" => db_to_linear(x - 30.0),
        other => return Err(format!("unknown unit `{other}` in `{t}`")),
    };
    Ok(v)
}

/// An `e`/`E` directly after a digit and before a digit or sign is an
/// exponent, not a unit.
fn is_exponent(t: &str, i: usize) -> bool {
    let b = t.as_bytes();
    if b[i] != b'e' && b[i] != b'E' {
        return false;
    }
    let before = i > 0 && (b[i - 1].is_ascii_digit() || b[i - 1] == b'.');
    let after = b
        .get(i + 1)
        .is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+');
    before && after
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}
