/// Renders a float with 17 significant digits, enough to round-trip any `f64`
/// and stable across runs so output files can be compared byte for byte.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    #[test]
    fn round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 0.0, 123456789.123] {
            let s = super::sig17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(super::sig17(0.5), "5.0000000000000000e-1");
    }
}
