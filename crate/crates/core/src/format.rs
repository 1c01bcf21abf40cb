//! Number formatting shared by the text file formats.

/// Fixed-point with at most `decimals` fractional digits, trailing zeros
/// trimmed, and no negative zero. Used for G-code words.
pub fn fixed_trimmed(value: f64, decimals: usize) -> String {
    let mut s = format!("{value:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Rounds to `digits` significant digits.
pub fn round_sig(value: f64, digits: usize) -> f64 {
    if value == 0.0 || !value.is_finite() {
        return value;
    }
    let s = format!("{:.*e}", digits.saturating_sub(1), value);
    s.parse().unwrap_or(value)
}

/// Shortest representation of `value` rounded to `digits` significant
/// digits. Very small or very large magnitudes use exponent notation.
pub fn sig_shortest(value: f64, digits: usize) -> String {
    if value.is_infinite() {
        return if value > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if value.is_nan() {
        return "nan".into();
    }
    let r = round_sig(value, digits);
    if r == 0.0 {
        return "0".into();
    }
    let mag = r.abs();
    if (1e-4..1e9).contains(&mag) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// Fixed significant digits for human-facing summaries, e.g. `129.500`.
pub fn sig_fixed(value: f64, digits: usize) -> String {
    if !value.is_finite() {
        return sig_shortest(value, digits);
    }
    if value == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let r = round_sig(value, digits);
    let exponent = r.abs().log10().floor() as i32;
    if !(-5..15).contains(&exponent) {
        return format!("{:.*e}", digits.saturating_sub(1), r);
    }
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    let s = format!("{r:.decimals$}");
    if s.starts_with("-0") && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_owned()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_trimmed_cases() {
        assert_eq!(fixed_trimmed(10.0, 5), "10");
        assert_eq!(fixed_trimmed(0.001366123, 5), "0.00137");
        assert_eq!(fixed_trimmed(-0.000001, 5), "0");
        assert_eq!(fixed_trimmed(-0.5, 5), "-0.5");
        assert_eq!(fixed_trimmed(175.25, 5), "175.25");
    }

    #[test]
    fn sig_shortest_cases() {
        assert_eq!(sig_shortest(6.709_245_112_3e-12, 9), "6.70924511e-12");
        assert_eq!(sig_shortest(213_070.666_666_7, 9), "213070.667");
        assert_eq!(sig_shortest(0.1, 9), "0.1");
        assert_eq!(sig_shortest(f64::INFINITY, 9), "inf");
        assert_eq!(sig_shortest(0.0, 9), "0");
    }

    #[test]
    fn sig_fixed_cases() {
        assert_eq!(sig_fixed(129.5, 6), "129.500");
        assert_eq!(sig_fixed(25.9, 6), "25.9000");
        assert_eq!(sig_fixed(0.95, 6), "0.950000");
        assert_eq!(sig_fixed(213_142.857, 6), "213143");
        assert_eq!(sig_fixed(6.71e-12, 6), "6.71000e-12");
    }
}
