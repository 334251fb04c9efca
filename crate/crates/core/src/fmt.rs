/// Shortest decimal that parses back to the same `f64`, always with a
/// fractional part or exponent (`0.0`, `-1.5`, `1e-7`).
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_keep_a_fraction() {
        assert_eq!(format_f64(0.0), "0.0");
        assert_eq!(format_f64(-1.5), "-1.5");
        assert_eq!(format_f64(2.0), "2.0");
    }

    #[test]
    fn round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-12, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
