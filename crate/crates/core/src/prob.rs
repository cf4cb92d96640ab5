//! Exact probabilities.
//!
//! Probability literals are read as exact rationals so that branch sums and
//! residual masses can be checked without floating-point drift. Matrices are
//! stored as `f64`; conversion happens once per entry.

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedSub, One, Zero};

pub type Prob = Ratio<u64>;

/// Largest number of fractional digits accepted in a decimal literal.
const MAX_FRACTION_DIGITS: usize = 12;

/// Parses `0.8`, `1`, `.25` or `1/3` into an exact rational.
pub fn parse_prob(text: &str) -> Option<Prob> {
    if let Some((n, d)) = text.split_once('/') {
        let n: u64 = n.trim().parse().ok()?;
        let d: u64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Prob::new(n, d));
    }
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.len() > MAX_FRACTION_DIGITS {
        return None;
    }
    let int: u64 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
    let denom = 10u64.pow(frac_part.len() as u32);
    let frac: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().ok()? };
    let numer = int.checked_mul(denom)?.checked_add(frac)?;
    Some(Prob::new(numer, denom))
}

/// Formats a probability so that [`parse_prob`] reads it back exactly.
///
/// Terminating decimals print as decimals (`0.8`), everything else as a
/// fraction (`1/3`).
pub fn format_prob(p: &Prob) -> String {
    let (n, d) = (*p.numer(), *p.denom());
    if d == 1 {
        return n.to_string();
    }
    let mut rest = d;
    let (mut twos, mut fives) = (0u32, 0u32);
    while rest % 2 == 0 {
        rest /= 2;
        twos += 1;
    }
    while rest % 5 == 0 {
        rest /= 5;
        fives += 1;
    }
    let digits = twos.max(fives);
    if rest != 1 || digits as usize > MAX_FRACTION_DIGITS {
        return format!("{n}/{d}");
    }
    let scale = 10u64.pow(digits);
    // d divides scale, so this is exact
    let scaled = n as u128 * (scale / d) as u128;
    let int = scaled / scale as u128;
    let frac = scaled % scale as u128;
    let frac = format!("{:0width$}", frac, width = digits as usize);
    format!("{int}.{}", frac.trim_end_matches('0'))
}

pub fn to_f64(p: &Prob) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}

/// Checked sum; `None` on overflow of the underlying integers.
pub fn checked_sum<'a>(items: impl IntoIterator<Item = &'a Prob>) -> Option<Prob> {
    items.into_iter().try_fold(Prob::zero(), |acc, p| acc.checked_add(p))
}

/// `1 - p`, or `None` when `p > 1`.
pub fn complement(p: &Prob) -> Option<Prob> {
    Prob::one().checked_sub(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_prob("0.8"), Some(Prob::new(4, 5)));
        assert_eq!(parse_prob("0.20"), Some(Prob::new(1, 5)));
        assert_eq!(parse_prob("1"), Some(Prob::one()));
        assert_eq!(parse_prob(".5"), Some(Prob::new(1, 2)));
        assert_eq!(parse_prob("1/3"), Some(Prob::new(1, 3)));
        assert_eq!(parse_prob("1/0"), None);
        assert_eq!(parse_prob("."), None);
        assert_eq!(parse_prob("0.1.2"), None);
        assert_eq!(parse_prob("0.1234567890123"), None);
    }

    #[test]
    fn sums_are_exact() {
        let parts = [parse_prob("0.1").unwrap(), parse_prob("0.2").unwrap(), parse_prob("0.7").unwrap()];
        assert_eq!(checked_sum(&parts), Some(Prob::one()));
    }

    #[test]
    fn format_reads_back() {
        for text in ["0.8", "0.25", "1", "0.125", "1/3", "2/7", "0.000001"] {
            let p = parse_prob(text).unwrap();
            assert_eq!(parse_prob(&format_prob(&p)), Some(p), "{text}");
        }
        assert_eq!(format_prob(&Prob::new(4, 5)), "0.8");
        assert_eq!(format_prob(&Prob::new(1, 3)), "1/3");
    }

    #[test]
    fn conversion_is_nearest_double() {
        assert_eq!(to_f64(&Prob::new(4, 5)), 0.8);
        assert_eq!(to_f64(&Prob::new(1, 5)), 0.2);
    }
}
