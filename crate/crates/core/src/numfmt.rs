//! Decimal formatting shared by every text file format and the wire protocol.

/// Nine significant digits in scientific notation (`d.dddddddde±x`).
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Shortest representation that parses back to the identical `f64`, padded
/// to at least nine significant digits.
pub fn exact(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:e}");
    let (mantissa, exp) = s.split_once('e').expect("LowerExp always has an exponent");
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let (int_part, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let mut frac = frac.to_string();
    while 1 + frac.len() < 9 {
        frac.push('0');
    }
    format!("{sign}{int_part}.{frac}e{exp}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_round_trips_and_pads() {
        for &x in &[0.5, -0.1, 1e300, -2.5e-310, 3.141592653589793, 0.0, -0.0, 123456789.123] {
            let s = exact(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
            let mant = s.split('e').next().unwrap().trim_start_matches('-');
            assert!(mant.chars().filter(|c| c.is_ascii_digit()).count() >= 9, "{s}");
        }
        assert_eq!(exact(0.5), "5.00000000e-1");
    }

    #[test]
    fn sig9_has_nine_digits() {
        assert_eq!(sig9(0.3), "3.00000000e-1");
        assert_eq!(sig9(-1234.5), "-1.23450000e3");
    }
}
