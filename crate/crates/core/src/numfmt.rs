//! Fixed-precision decimal rendering for CSV output.

/// Significant digits written for every floating point CSV field.
pub const SIG_DIGITS: usize = 9;

/// Rounds to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x)
        .parse()
        .expect("scientific rendering parses")
}

/// Renders `x` rounded to [`SIG_DIGITS`] significant digits in plain
/// decimal notation where the shortest round-trip form allows it.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // no negative zero in output
        return "0".to_string();
    }
    format!("{r}")
}
