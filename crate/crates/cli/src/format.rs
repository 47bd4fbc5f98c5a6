/// One CSV row as `(column, value)` pairs in output order.
pub type Row = Vec<(&'static str, String)>;

/// Six significant digits, without trailing zeros.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    rounded.to_string()
}

/// Shortest text that parses back to the same `f64`.
pub fn full(x: f64) -> String {
    x.to_string()
}

pub fn opt_sig6(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

/// Coefficient lists as `a;b;c`.
pub fn list(xs: &[f64]) -> String {
    xs.iter().map(|&x| sig6(x)).collect::<Vec<_>>().join(";")
}
