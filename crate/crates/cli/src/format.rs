//! Number formatting shared by configs and CSV traces.

/// Shortest decimal string that parses back to exactly `v`. Plain notation
/// for moderate magnitudes, scientific otherwise.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
