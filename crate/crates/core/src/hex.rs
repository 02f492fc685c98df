//! Lowercase, unprefixed hexadecimal for big integers in every file format.

use num_bigint::BigUint;
use num_traits::Num;

pub fn to_hex(x: &BigUint) -> String {
    x.to_str_radix(16)
}

/// Strict inverse of [`to_hex`]: lowercase digits only, no leading zeros
/// (except the single digit `0`), no sign or prefix.
pub fn parse_hex(s: &str) -> Option<BigUint> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return None;
    }
    if s.len() > 1 && s.starts_with('0') {
        return None;
    }
    BigUint::from_str_radix(s, 16).ok()
}
