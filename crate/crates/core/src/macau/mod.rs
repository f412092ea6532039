//! 256-bit hash arithmetic and Macau aggregation.
//!
//! A Macau aggregation folds a bounded number of random inputs through a
//! commutative combiner and then applies a finalizing function, so the
//! output is fixed by the input multiset alone and is not a target chosen in
//! advance.

mod uint;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use uint::{decode_hex_strict, HexError, U256, U320};

/// A SHA-256 digest, sum, or distance. Arithmetic wraps modulo 2^256.
pub type Hash256 = U256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MacauError {
    #[error("aggregation requires at least one input")]
    EmptyInput,
}

pub fn sha256(data: &[u8]) -> Hash256 {
    let digest = Sha256::digest(data);
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    Hash256::from_be_bytes(out)
}

/// SHA-256 of the 32-byte big-endian encoding of `h`.
pub fn sha256_of(h: &Hash256) -> Hash256 {
    sha256(&h.to_be_bytes())
}

pub fn add_mod(a: &Hash256, b: &Hash256) -> Hash256 {
    a.wrapping_add(b)
}

pub fn mul_mod(a: &Hash256, b: &Hash256) -> Hash256 {
    a.wrapping_mul(b)
}

pub fn abs_diff(a: &Hash256, b: &Hash256) -> Hash256 {
    a.abs_diff(b)
}

/// Commutative, associative fold used by [`macau_aggregate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MacauCombiner {
    Sum,
    Product,
}

impl MacauCombiner {
    pub fn combine(self, a: &Hash256, b: &Hash256) -> Hash256 {
        match self {
            MacauCombiner::Sum => add_mod(a, b),
            MacauCombiner::Product => mul_mod(a, b),
        }
    }
}

/// `finalize(x_1 ⊕ x_2 ⊕ … ⊕ x_n)` where ⊕ is the combiner.
pub fn macau_aggregate<F>(inputs: &[Hash256], combiner: MacauCombiner, finalize: F) -> Result<Hash256, MacauError>
where
    F: FnOnce(Hash256) -> Hash256,
{
    let (first, rest) = inputs.split_first().ok_or(MacauError::EmptyInput)?;
    let folded = rest.iter().fold(*first, |acc, x| combiner.combine(&acc, x));
    Ok(finalize(folded))
}
