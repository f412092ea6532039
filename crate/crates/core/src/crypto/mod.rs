//! Elliptic-curve toolkit: group law, key generation, EC ElGamal with an
//! explicit ephemeral scalar, Schnorr signatures and one-time-pad key backup.
//!
//! This is a protocol study implementation. Nothing here is constant-time or
//! hardened against side channels.

mod curve;
mod field;
mod schnorr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::macau::{decode_hex_strict, HexError, U256};
use crate::randomness::{EntropySource, RandomnessError};

pub use curve::{on_curve, point_add, point_neg, scalar_mul, CurveParams, Point, CURVE_NAMES};
pub use schnorr::{sign, verify, Signature};

#[derive(Debug, Error)]
pub enum CryptoError {
    #[error("point is not on the curve")]
    PointNotOnCurve,
    #[error("malformed point encoding")]
    MalformedPoint,
    #[error("invalid curve parameters: {0}")]
    InvalidCurve(String),
    #[error("unknown curve {0:?}")]
    UnknownCurve(String),
    #[error("message of {len} bytes exceeds the {capacity}-byte capacity of this curve")]
    MessageTooLong { len: usize, capacity: usize },
    #[error("no counter value embeds the message as a curve point")]
    EncodingFailed,
    #[error("point does not carry an embedded message")]
    DecodeFailed,
    #[error("key length mismatch: expected {expected} bytes, got {got}")]
    KeyLengthMismatch { expected: usize, got: usize },
    #[error("scalar out of range")]
    InvalidScalar,
    #[error(transparent)]
    Hex(#[from] HexError),
    #[error(transparent)]
    Randomness(#[from] RandomnessError),
}

fn to_big(v: &U256) -> BigUint {
    BigUint::from_bytes_be(&v.to_be_bytes())
}

fn from_big(v: &BigUint) -> U256 {
    U256::from_be_slice(&v.to_bytes_be()).expect("value reduced below a 256-bit modulus")
}

/// Uniform scalar in [1, order - 1] by rejection sampling on source bytes.
pub fn random_scalar(source: &mut EntropySource, params: &CurveParams) -> Result<U256, CryptoError> {
    let width = params.scalar_bytes();
    let top_bits = params.order.bits() as usize - 8 * (width - 1);
    let mut buf = vec![0u8; width];
    loop {
        source.fill(&mut buf)?;
        buf[0] &= (0xffu16 >> (8 - top_bits)) as u8;
        let k = U256::from_be_slice(&buf).expect("width at most 32 bytes");
        if !k.is_zero() && k < params.order {
            return Ok(k);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub k: U256,
    pub public: Point,
}

pub fn keygen(source: &mut EntropySource, params: &CurveParams) -> Result<KeyPair, CryptoError> {
    let k = random_scalar(source, params)?;
    Ok(KeyPair {
        k,
        public: params.mul_unchecked(&k, &params.g),
    })
}

/// Largest message `encode_message` accepts on this curve.
pub fn message_capacity(params: &CurveParams) -> usize {
    params.coord_bytes().saturating_sub(2)
}

/// Embeds `msg` as the x-coordinate `len || msg || counter`, incrementing the
/// counter until x^3 + ax + b is a square.
pub fn encode_message(msg: &[u8], params: &CurveParams) -> Result<Point, CryptoError> {
    let capacity = message_capacity(params);
    if msg.len() > capacity || params.coord_bytes() < 2 {
        return Err(CryptoError::MessageTooLong {
            len: msg.len(),
            capacity,
        });
    }
    let f = params.field();
    let mut raw = Vec::with_capacity(msg.len() + 2);
    raw.push(msg.len() as u8);
    raw.extend_from_slice(msg);
    raw.push(0);
    for counter in 0..=255u8 {
        *raw.last_mut().expect("non-empty") = counter;
        let x = U256::from_be_slice(&raw).expect("at most 32 bytes");
        if x >= params.p {
            continue;
        }
        let xm = f.to_mont(&x);
        if let Some(ym) = f.sqrt(&params.rhs(&xm)) {
            let y = f.to_int(&ym);
            let alt = params.p.wrapping_sub(&y);
            let y = if y.is_zero() { y } else { y.min(alt) };
            return Ok(Point::Affine { x, y });
        }
    }
    Err(CryptoError::EncodingFailed)
}

pub fn decode_message(pt: &Point, params: &CurveParams) -> Result<Vec<u8>, CryptoError> {
    let Point::Affine { x, .. } = pt else {
        return Err(CryptoError::DecodeFailed);
    };
    let w = params.coord_bytes();
    let bytes = &x.to_be_bytes()[32 - w..];
    for len in 0..=message_capacity(params) {
        let start = w - (len + 2);
        if bytes[start] as usize == len && bytes[..start].iter().all(|&b| b == 0) {
            return Ok(bytes[start + 1..start + 1 + len].to_vec());
        }
    }
    Err(CryptoError::DecodeFailed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext {
    pub e1: Point,
    pub e2: Point,
}

/// e1 = R*K + D, e2 = R*G for a fresh R drawn from `source`.
pub fn ec_encrypt(
    public: &Point,
    source: &mut EntropySource,
    message: &Point,
    params: &CurveParams,
) -> Result<Ciphertext, CryptoError> {
    let r = random_scalar(source, params)?;
    ec_encrypt_with(public, &r, message, params)
}

/// Encryption with a caller-chosen ephemeral scalar.
pub fn ec_encrypt_with(
    public: &Point,
    r: &U256,
    message: &Point,
    params: &CurveParams,
) -> Result<Ciphertext, CryptoError> {
    if !params.contains(public) || !params.contains(message) {
        return Err(CryptoError::PointNotOnCurve);
    }
    let shared = params.mul_unchecked(r, public);
    Ok(Ciphertext {
        e1: params.add_unchecked(&shared, message),
        e2: params.mul_unchecked(r, &params.g),
    })
}

/// e1 - k*e2, which equals the plaintext point for an honest ciphertext.
pub fn ec_decrypt(ct: &Ciphertext, k: &U256, params: &CurveParams) -> Result<Point, CryptoError> {
    if !params.contains(&ct.e1) || !params.contains(&ct.e2) {
        return Err(CryptoError::PointNotOnCurve);
    }
    let shared = params.mul_unchecked(k, &ct.e2);
    Ok(params.add_unchecked(&ct.e1, &params.neg_unchecked(&shared)))
}

/// One-time pad: fixed-width big-endian k XOR q.
pub fn backup_key(k: &U256, pad: &[u8], params: &CurveParams) -> Result<Vec<u8>, CryptoError> {
    let encoded = params.encode_scalar(k);
    if pad.len() != encoded.len() {
        return Err(CryptoError::KeyLengthMismatch {
            expected: encoded.len(),
            got: pad.len(),
        });
    }
    Ok(encoded.iter().zip(pad).map(|(a, b)| a ^ b).collect())
}

pub fn restore_key(backup: &[u8], pad: &[u8], params: &CurveParams) -> Result<U256, CryptoError> {
    if pad.len() != backup.len() {
        return Err(CryptoError::KeyLengthMismatch {
            expected: backup.len(),
            got: pad.len(),
        });
    }
    let plain: Vec<u8> = backup.iter().zip(pad).map(|(a, b)| a ^ b).collect();
    params.decode_scalar(&plain)
}

/// JSON key file: `{"curve", "k", "K"}` with hex fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyFile {
    pub curve: String,
    pub k: String,
    #[serde(rename = "K")]
    pub public: String,
}

impl KeyFile {
    pub fn from_pair(pair: &KeyPair, params: &CurveParams) -> Self {
        KeyFile {
            curve: params.name.clone(),
            k: hex::encode(params.encode_scalar(&pair.k)),
            public: hex::encode(params.encode_point(&pair.public)),
        }
    }

    /// Parses and checks that K = k*G.
    pub fn to_pair(&self) -> Result<(KeyPair, CurveParams), CryptoError> {
        let params = CurveParams::by_name(&self.curve)?;
        let k = params.decode_scalar(&decode_hex_strict(&self.k)?)?;
        if k.is_zero() || k >= params.order {
            return Err(CryptoError::InvalidScalar);
        }
        let public = params.decode_point(&decode_hex_strict(&self.public)?)?;
        if params.mul_unchecked(&k, &params.g) != public {
            return Err(CryptoError::InvalidScalar);
        }
        Ok((KeyPair { k, public }, params))
    }
}
