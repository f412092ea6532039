//! Fixed-width unsigned integers used for hashes, sums, distances and scores.
//!
//! Limbs are stored least-significant first. The canonical byte form is
//! big-endian and the text form is lowercase hex with no prefix.

#![allow(clippy::needless_range_loop)]

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HexError {
    #[error("expected {expected} hex digits, found {found}")]
    Length { expected: usize, found: usize },
    #[error("invalid hex digit {0:?} (only lowercase 0-9a-f accepted)")]
    Digit(char),
}

/// Decodes lowercase hex. Uppercase digits are rejected so every value has a
/// single text form.
pub fn decode_hex_strict(s: &str) -> Result<Vec<u8>, HexError> {
    if let Some(c) = s.chars().find(|c| !matches!(c, '0'..='9' | 'a'..='f')) {
        return Err(HexError::Digit(c));
    }
    if s.len() % 2 != 0 {
        return Err(HexError::Length {
            expected: s.len() + 1,
            found: s.len(),
        });
    }
    // all digits validated above
    Ok(hex::decode(s).unwrap_or_default())
}

/// 256-bit unsigned integer.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct U256(pub(crate) [u64; 4]);

impl U256 {
    pub const ZERO: U256 = U256([0; 4]);
    pub const ONE: U256 = U256([1, 0, 0, 0]);
    pub const MAX: U256 = U256([u64::MAX; 4]);
    pub const BYTES: usize = 32;

    pub const fn from_u64(v: u64) -> Self {
        U256([v, 0, 0, 0])
    }

    pub const fn from_limbs(limbs: [u64; 4]) -> Self {
        U256(limbs)
    }

    pub const fn limbs(&self) -> [u64; 4] {
        self.0
    }

    pub fn from_be_bytes(bytes: [u8; 32]) -> Self {
        let mut limbs = [0u64; 4];
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            let mut w = [0u8; 8];
            w.copy_from_slice(chunk);
            limbs[3 - i] = u64::from_be_bytes(w);
        }
        U256(limbs)
    }

    /// Interprets up to 32 big-endian bytes; shorter input is left-padded with zeros.
    pub fn from_be_slice(bytes: &[u8]) -> Option<Self> {
        if bytes.len() > 32 {
            return None;
        }
        let mut buf = [0u8; 32];
        buf[32 - bytes.len()..].copy_from_slice(bytes);
        Some(Self::from_be_bytes(buf))
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for i in 0..4 {
            out[i * 8..(i + 1) * 8].copy_from_slice(&self.0[3 - i].to_be_bytes());
        }
        out
    }

    pub fn from_hex(s: &str) -> Result<Self, HexError> {
        if s.len() != 64 {
            return Err(HexError::Length {
                expected: 64,
                found: s.len(),
            });
        }
        let bytes = decode_hex_strict(s)?;
        let mut buf = [0u8; 32];
        buf.copy_from_slice(&bytes);
        Ok(Self::from_be_bytes(buf))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_be_bytes())
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    /// Number of significant bits (0 for zero).
    pub fn bits(&self) -> u32 {
        for i in (0..4).rev() {
            if self.0[i] != 0 {
                return 64 * i as u32 + (64 - self.0[i].leading_zeros());
            }
        }
        0
    }

    pub fn bit(&self, i: u32) -> bool {
        if i >= 256 {
            return false;
        }
        (self.0[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    pub fn overflowing_add(&self, rhs: &U256) -> (U256, bool) {
        let mut out = [0u64; 4];
        let mut carry = false;
        for i in 0..4 {
            let (s1, c1) = self.0[i].overflowing_add(rhs.0[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            out[i] = s2;
            carry = c1 | c2;
        }
        (U256(out), carry)
    }

    pub fn overflowing_sub(&self, rhs: &U256) -> (U256, bool) {
        let mut out = [0u64; 4];
        let mut borrow = false;
        for i in 0..4 {
            let (d1, b1) = self.0[i].overflowing_sub(rhs.0[i]);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            out[i] = d2;
            borrow = b1 | b2;
        }
        (U256(out), borrow)
    }

    pub fn wrapping_add(&self, rhs: &U256) -> U256 {
        self.overflowing_add(rhs).0
    }

    pub fn wrapping_sub(&self, rhs: &U256) -> U256 {
        self.overflowing_sub(rhs).0
    }

    pub fn checked_sub(&self, rhs: &U256) -> Option<U256> {
        match self.overflowing_sub(rhs) {
            (v, false) => Some(v),
            _ => None,
        }
    }

    /// Low 256 bits of the product.
    pub fn wrapping_mul(&self, rhs: &U256) -> U256 {
        let mut out = [0u64; 4];
        for i in 0..4 {
            let mut carry = 0u128;
            for j in 0..(4 - i) {
                let t = out[i + j] as u128 + self.0[i] as u128 * rhs.0[j] as u128 + carry;
                out[i + j] = t as u64;
                carry = t >> 64;
            }
        }
        U256(out)
    }

    /// Exact product with a 64-bit factor.
    pub fn widening_mul_u64(&self, rhs: u64) -> U320 {
        let mut out = [0u64; 5];
        let mut carry = 0u128;
        for i in 0..4 {
            let t = self.0[i] as u128 * rhs as u128 + carry;
            out[i] = t as u64;
            carry = t >> 64;
        }
        out[4] = carry as u64;
        U320(out)
    }

    /// |self - rhs| over the plain unsigned interpretation (never wraps).
    pub fn abs_diff(&self, rhs: &U256) -> U256 {
        if self >= rhs {
            self.wrapping_sub(rhs)
        } else {
            rhs.wrapping_sub(self)
        }
    }

    pub fn shr1(&self) -> U256 {
        let mut out = [0u64; 4];
        for i in 0..4 {
            out[i] = self.0[i] >> 1;
            if i < 3 {
                out[i] |= self.0[i + 1] << 63;
            }
        }
        U256(out)
    }

    pub fn low_u64(&self) -> u64 {
        self.0[0]
    }
}

impl Ord for U256 {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..4).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for U256 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<u64> for U256 {
    fn from(v: u64) -> Self {
        U256::from_u64(v)
    }
}

impl fmt::Display for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U256({})", self.to_hex())
    }
}

impl FromStr for U256 {
    type Err = HexError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        U256::from_hex(s)
    }
}

impl Serialize for U256 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for U256 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        U256::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// 320-bit unsigned integer; wide enough for a 256-bit distance times a
/// 64-bit time span.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct U320(pub(crate) [u64; 5]);

impl U320 {
    pub const ZERO: U320 = U320([0; 5]);

    pub fn from_u256(v: U256) -> Self {
        let l = v.0;
        U320([l[0], l[1], l[2], l[3], 0])
    }

    pub fn high_u64(&self) -> u64 {
        self.0[4]
    }

    /// The low 256 bits, if nothing is set above them.
    pub fn to_u256(&self) -> Option<U256> {
        (self.0[4] == 0).then(|| U256([self.0[0], self.0[1], self.0[2], self.0[3]]))
    }

    pub fn to_be_bytes(&self) -> [u8; 40] {
        let mut out = [0u8; 40];
        for i in 0..5 {
            out[i * 8..(i + 1) * 8].copy_from_slice(&self.0[4 - i].to_be_bytes());
        }
        out
    }

    pub fn from_be_bytes(bytes: [u8; 40]) -> Self {
        let mut limbs = [0u64; 5];
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            let mut w = [0u8; 8];
            w.copy_from_slice(chunk);
            limbs[4 - i] = u64::from_be_bytes(w);
        }
        U320(limbs)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_be_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self, HexError> {
        if s.len() != 80 {
            return Err(HexError::Length {
                expected: 80,
                found: s.len(),
            });
        }
        let bytes = decode_hex_strict(s)?;
        let mut buf = [0u8; 40];
        buf.copy_from_slice(&bytes);
        Ok(Self::from_be_bytes(buf))
    }
}

impl Ord for U320 {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..5).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for U320 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for U320 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U320({})", self.to_hex())
    }
}

impl fmt::Display for U320 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for U320 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for U320 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        U320::from_hex(&s).map_err(serde::de::Error::custom)
    }
}
