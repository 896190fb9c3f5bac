/// Significant digits used for every number written to CSV.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` rounded to twelve significant digits, in the shortest form
/// that parses back to the rounded value.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("scientific notation always parses");
    format!("{rounded}")
}
