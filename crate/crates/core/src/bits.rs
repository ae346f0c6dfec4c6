//! Bit strings used for keys, messages and ciphertexts.

use std::fmt;
use std::ops::{BitXor, Deref};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HexError {
    #[error("invalid hex digit {digit:?} at offset {offset}")]
    InvalidDigit { digit: char, offset: usize },
}

/// An owned sequence of bits, one `bool` per bit.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    /// Parse a string of `0`/`1` characters. Other characters are ignored,
    /// which lets test fixtures write `"1010 0110"`.
    pub fn from_binary(s: &str) -> Self {
        Self(
            s.chars()
                .filter_map(|c| match c {
                    '0' => Some(false),
                    '1' => Some(true),
                    _ => None,
                })
                .collect(),
        )
    }

    /// Each hex digit expands to four bits, most significant first.
    pub fn from_hex(s: &str) -> Result<Self, HexError> {
        let mut bits = Vec::with_capacity(s.len() * 4);
        for (offset, c) in s.chars().enumerate() {
            let v = c
                .to_digit(16)
                .ok_or(HexError::InvalidDigit { digit: c, offset })?;
            for shift in (0..4).rev() {
                bits.push((v >> shift) & 1 == 1);
            }
        }
        Ok(Self(bits))
    }

    /// Lower-case hex. Trailing bits that do not fill a nibble are zero-padded.
    pub fn to_hex(&self) -> String {
        self.0
            .chunks(4)
            .map(|chunk| {
                let mut v = 0u32;
                for i in 0..4 {
                    v <<= 1;
                    if chunk.get(i).copied().unwrap_or(false) {
                        v |= 1;
                    }
                }
                char::from_digit(v, 16).unwrap()
            })
            .collect()
    }

    pub fn to_binary(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend_from_slice(&mut self, bits: &[bool]) {
        self.0.extend_from_slice(bits);
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<bool> {
        self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Bitwise XOR. Callers are responsible for equal lengths; the shorter
    /// operand bounds the result.
    pub fn xor(&self, other: &BitString) -> BitString {
        Self(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a ^ b)
                .collect(),
        )
    }
}

impl Deref for BitString {
    type Target = [bool];

    fn deref(&self) -> &[bool] {
        &self.0
    }
}

impl From<Vec<bool>> for BitString {
    fn from(v: Vec<bool>) -> Self {
        Self(v)
    }
}

impl From<&[bool]> for BitString {
    fn from(v: &[bool]) -> Self {
        Self(v.to_vec())
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    fn bitxor(self, rhs: &BitString) -> BitString {
        self.xor(rhs)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() <= 64 {
            write!(f, "BitString({})", self.to_binary())
        } else {
            write!(f, "BitString(len={}, hex={})", self.0.len(), self.to_hex())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_expands_msb_first() {
        let b = BitString::from_hex("a5").unwrap();
        assert_eq!(b.to_binary(), "10100101");
        assert_eq!(b.to_hex(), "a5");
        assert_eq!(BitString::from_hex("F").unwrap().to_binary(), "1111");
    }

    #[test]
    fn bad_hex_digit_reports_offset() {
        assert_eq!(
            BitString::from_hex("0fz").unwrap_err(),
            HexError::InvalidDigit { digit: 'z', offset: 2 }
        );
    }

    #[test]
    fn xor_matches_hand_values() {
        let k1 = BitString::from_binary("1010");
        let k2 = BitString::from_binary("0110");
        assert_eq!((&k1 ^ &k2).to_binary(), "1100");
    }

    #[test]
    fn empty_hex_is_empty() {
        assert!(BitString::from_hex("").unwrap().is_empty());
    }
}
