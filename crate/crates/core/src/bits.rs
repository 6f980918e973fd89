//! Fixed-length binary strings over Z_2.
//!
//! Position 0 is the leftmost character and the most significant bit of
//! `value()`, so the integer value of a string is also the basis-state index
//! of the corresponding computational basis vector.

use std::fmt;
use std::ops::{Add, BitAnd};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MAX_BITS: usize = 63;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct BitString {
    len: usize,
    value: u64,
}

impl BitString {
    pub fn new(len: usize, value: u64) -> Result<Self> {
        if len > MAX_BITS {
            return Err(Error::Resource(format!("bit string length {len} > {MAX_BITS}")));
        }
        if len < 64 && value >> len != 0 {
            return Err(Error::Validation(format!("value {value} does not fit in {len} bits")));
        }
        Ok(Self { len, value })
    }

    /// Panics if `value` does not fit; for internal use with known-good values.
    pub fn from_value(len: usize, value: u64) -> Self {
        Self::new(len, value).expect("bit string value out of range")
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_value(len, 0)
    }

    pub fn ones(len: usize) -> Self {
        Self::from_value(len, (1u64 << len) - 1)
    }

    /// String with a single 1 at `pos`.
    pub fn unit(len: usize, pos: usize) -> Self {
        let mut s = Self::zeros(len);
        s.set(pos, true);
        s
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bit(&self, pos: usize) -> bool {
        assert!(pos < self.len, "bit position {pos} out of range {}", self.len);
        (self.value >> (self.len - 1 - pos)) & 1 == 1
    }

    pub fn set(&mut self, pos: usize, on: bool) {
        assert!(pos < self.len, "bit position {pos} out of range {}", self.len);
        let m = 1u64 << (self.len - 1 - pos);
        if on {
            self.value |= m;
        } else {
            self.value &= !m;
        }
    }

    pub fn weight(&self) -> u32 {
        self.value.count_ones()
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    /// Mod-2 inner product.
    pub fn dot(&self, other: &Self) -> bool {
        debug_assert_eq!(self.len, other.len);
        (self.value & other.value).count_ones() & 1 == 1
    }

    pub fn concat(&self, other: &Self) -> Self {
        Self::from_value(self.len + other.len, (self.value << other.len) | other.value)
    }

    /// Positions holding a 1, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.bit(i)).collect()
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }

    /// All strings of length `len` in lexicographic order.
    pub fn all(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len <= 30, "refusing to enumerate 2^{len} strings");
        (0..(1u64 << len)).map(move |v| BitString { len, value: v })
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        if self.len != other.len {
            return Err(Error::Dimension(format!("lengths {} and {}", self.len, other.len)));
        }
        Ok(*self + *other)
    }
}

impl Add for BitString {
    type Output = BitString;
    fn add(self, rhs: BitString) -> BitString {
        assert_eq!(self.len, rhs.len, "xor of strings with different lengths");
        BitString { len: self.len, value: self.value ^ rhs.value }
    }
}

impl BitAnd for BitString {
    type Output = BitString;
    fn bitand(self, rhs: BitString) -> BitString {
        assert_eq!(self.len, rhs.len, "and of strings with different lengths");
        BitString { len: self.len, value: self.value & rhs.value }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Validation("empty bit string".into()));
        }
        if s.len() > MAX_BITS {
            return Err(Error::Resource(format!("bit string length {} > {MAX_BITS}", s.len())));
        }
        let mut value = 0u64;
        for c in s.chars() {
            value = (value << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::Validation(format!("invalid bit character {c:?}"))),
                };
        }
        Ok(Self { len: s.len(), value })
    }
}

impl serde::Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        let s: BitString = "0110".parse().unwrap();
        assert_eq!(s.value(), 6);
        assert_eq!(s.to_string(), "0110");
        assert!(s.bit(1) && s.bit(2) && !s.bit(0));
    }

    #[test]
    fn xor_and_dot() {
        let a: BitString = "101".parse().unwrap();
        let b: BitString = "011".parse().unwrap();
        assert_eq!((a + b).to_string(), "110");
        assert!(a.dot(&b));
        assert!(!a.dot(&BitString::zeros(3)));
    }

    #[test]
    fn lexicographic_order_matches_value_order() {
        let v: Vec<_> = BitString::all(3).collect();
        let mut sorted = v.clone();
        sorted.sort_by_key(|s| s.to_string());
        assert_eq!(v, sorted);
    }

    #[test]
    fn rejects_bad_input() {
        assert!("10a".parse::<BitString>().is_err());
        assert!(BitString::new(2, 4).is_err());
    }
}
