//! Shared numeric formatting for every CSV the toolkit writes.

/// Scientific notation with 12 significant digits, e.g. `1.00000000000e0`.
pub fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        // `NaN`, `inf`, `-inf`
        format!("{v}")
    }
}

pub fn sci_opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

/// Header columns `prefix0..prefix{d-1}`.
pub fn indexed(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (0..dim).map(move |i| format!("{prefix}{i}"))
}
