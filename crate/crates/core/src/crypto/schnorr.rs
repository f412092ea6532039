use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{from_big, random_scalar, to_big, CryptoError, CurveParams, KeyPair, Point};
use crate::macau::{decode_hex_strict, sha256, U256};
use crate::randomness::EntropySource;

/// Schnorr signature (e, s). The wire form is 64 bytes: both scalars as
/// 32-byte big-endian integers regardless of curve.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature {
    pub challenge: U256,
    pub response: U256,
}

impl Signature {
    pub const BYTES: usize = 64;

    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&self.challenge.to_be_bytes());
        out[32..].copy_from_slice(&self.response.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::BYTES {
            return Err(CryptoError::KeyLengthMismatch {
                expected: Self::BYTES,
                got: bytes.len(),
            });
        }
        Ok(Signature {
            challenge: U256::from_be_slice(&bytes[..32]).ok_or(CryptoError::InvalidScalar)?,
            response: U256::from_be_slice(&bytes[32..]).ok_or(CryptoError::InvalidScalar)?,
        })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        Self::from_bytes(&decode_hex_strict(s)?)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Signature::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// e = H(R || K || msg) mod n
fn challenge(nonce_point: &Point, public: &Point, msg: &[u8], params: &CurveParams) -> U256 {
    let mut preimage = params.encode_point(nonce_point);
    preimage.extend_from_slice(&params.encode_point(public));
    preimage.extend_from_slice(msg);
    let h = sha256(&preimage);
    from_big(&(to_big(&h) % to_big(&params.order)))
}

/// Nonce reuse across messages leaks the key; every call draws a fresh
/// nonce from `nonce_source`.
pub fn sign(
    key: &KeyPair,
    msg: &[u8],
    nonce_source: &mut EntropySource,
    params: &CurveParams,
) -> Result<Signature, CryptoError> {
    let r = random_scalar(nonce_source, params)?;
    let nonce_point = params.mul_unchecked(&r, &params.g);
    let e = challenge(&nonce_point, &key.public, msg, params);
    let n = to_big(&params.order);
    let s = (to_big(&r) + to_big(&e) * to_big(&key.k)) % n;
    Ok(Signature {
        challenge: e,
        response: from_big(&s),
    })
}

/// Recomputes R = s*G - e*K and checks that it reproduces e.
pub fn verify(public: &Point, msg: &[u8], sig: &Signature, params: &CurveParams) -> bool {
    if sig.challenge >= params.order || sig.response >= params.order {
        return false;
    }
    if public.is_infinity() || !params.contains(public) {
        return false;
    }
    let neg_public = params.neg_unchecked(public);
    let nonce_point = params.double_mul_unchecked(&sig.response, &params.g, &sig.challenge, &neg_public);
    challenge(&nonce_point, public, msg, params) == sig.challenge
}
