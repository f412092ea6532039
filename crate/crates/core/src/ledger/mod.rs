//! Blocks, chains, full re-validation and the JSON-lines chain file.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{
    recompute_winner, validate_contribution, verify_reveal, ConsensusError, Contribution, KeyDirectory, Mode, NodeId,
    Rejection, RoundConfig, RoundResult, SelectionRule,
};
use crate::macau::{sha256, Hash256};

mod store;

pub use store::{load_chain, parse_chain, save_chain, to_jsonl};

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("round {round} cannot follow block at height {prev_height}")]
    HeightMismatch { round: u64, prev_height: u64 },
    #[error("revealed blob does not hash to the winner's first hash")]
    RevealMismatch,
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    ParseFailure { line: usize, message: String },
}

/// Why a block (or chain) failed validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRejection {
    MissingGenesis,
    BadGenesis,
    BadHeight,
    BadPrevHash,
    ModeMismatch,
    BadSignature,
    /// A recorded contribution that run_round would not have accepted for
    /// reasons other than its signature, or an unsorted/duplicated record.
    BadContribution,
    RevealMismatch,
    WrongWinner,
    BadBlockHash,
}

impl fmt::Display for BlockRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BlockRejection::MissingGenesis => "missing_genesis",
            BlockRejection::BadGenesis => "bad_genesis",
            BlockRejection::BadHeight => "bad_height",
            BlockRejection::BadPrevHash => "bad_prev_hash",
            BlockRejection::ModeMismatch => "mode_mismatch",
            BlockRejection::BadSignature => "bad_signature",
            BlockRejection::BadContribution => "bad_contribution",
            BlockRejection::RevealMismatch => "reveal_mismatch",
            BlockRejection::WrongWinner => "wrong_winner",
            BlockRejection::BadBlockHash => "bad_block_hash",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("block {height}: {reason}")]
pub struct ChainRejection {
    pub height: u64,
    pub reason: BlockRejection,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        crate::macau::decode_hex_strict(&s).map_err(serde::de::Error::custom)
    }
}

mod hex_list {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for item in v {
            seq.serialize_element(&hex::encode(item))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| crate::macau::decode_hex_strict(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub height: u64,
    #[serde(rename = "timestamp_ms")]
    pub timestamp: u64,
    pub prevhash: Hash256,
    pub owner: NodeId,
    pub mode: Mode,
    /// The owner's revealed blob.
    #[serde(with = "hex_bytes")]
    pub owner_blob: Vec<u8>,
    /// Every accepted contribution of the round, sorted by node id.
    pub contributions: Vec<Contribution>,
    #[serde(with = "hex_list")]
    pub transactions: Vec<Vec<u8>>,
    pub block_hash: Hash256,
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_be_bytes());
}

impl Block {
    /// Hash preimage: every field but `block_hash`, integers as 8-byte
    /// big-endian, variable-length parts prefixed by their length or count.
    /// Each contribution contributes its 64-byte canonical form followed by
    /// its 64-byte signature.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(81 + self.owner_blob.len() + 8 + 128 * self.contributions.len() + 8);
        put_u64(&mut out, self.height);
        put_u64(&mut out, self.timestamp);
        out.extend_from_slice(&self.prevhash.to_be_bytes());
        put_u64(&mut out, self.owner.0);
        out.push(self.mode.tag());
        put_u64(&mut out, self.owner_blob.len() as u64);
        out.extend_from_slice(&self.owner_blob);
        put_u64(&mut out, self.contributions.len() as u64);
        for c in &self.contributions {
            out.extend_from_slice(&c.canonical_bytes());
            out.extend_from_slice(&c.signature.to_bytes());
        }
        put_u64(&mut out, self.transactions.len() as u64);
        for tx in &self.transactions {
            put_u64(&mut out, tx.len() as u64);
            out.extend_from_slice(tx);
        }
        out
    }
}

pub fn block_hash(b: &Block) -> Hash256 {
    sha256(&b.canonical_bytes())
}

const GENESIS_TAG: &[u8] = b"por-genesis/1";

/// The genesis block carries the network parameters as its only transaction.
fn encode_genesis_params(network_id: &str, cfg: &RoundConfig) -> Vec<u8> {
    let mut out = GENESIS_TAG.to_vec();
    put_u64(&mut out, network_id.len() as u64);
    out.extend_from_slice(network_id.as_bytes());
    out.push(cfg.mode.tag());
    out.push(cfg.selection_rule.tag());
    put_u64(&mut out, cfg.min_dt);
    out
}

fn decode_genesis_params(tx: &[u8]) -> Option<(String, RoundConfig)> {
    let rest = tx.strip_prefix(GENESIS_TAG)?;
    let len = u64::from_be_bytes(rest.get(..8)?.try_into().ok()?) as usize;
    let rest = &rest[8..];
    let id = std::str::from_utf8(rest.get(..len)?).ok()?.to_string();
    let rest = &rest[len..];
    if rest.len() != 10 {
        return None;
    }
    let cfg = RoundConfig {
        mode: Mode::from_tag(rest[0])?,
        selection_rule: SelectionRule::from_tag(rest[1])?,
        min_dt: u64::from_be_bytes(rest[2..].try_into().ok()?),
    };
    cfg.validate().ok()?;
    Some((id, cfg))
}

pub fn genesis(network_id: &str, cfg: &RoundConfig) -> Block {
    let mut b = Block {
        height: 0,
        timestamp: 0,
        prevhash: Hash256::ZERO,
        owner: NodeId(0),
        mode: cfg.mode,
        owner_blob: Vec::new(),
        contributions: Vec::new(),
        transactions: vec![encode_genesis_params(network_id, cfg)],
        block_hash: Hash256::ZERO,
    };
    b.block_hash = block_hash(&b);
    b
}

pub fn build_block(
    result: &RoundResult,
    reveal: &[u8],
    txs: Vec<Vec<u8>>,
    prev: &Block,
    timestamp: u64,
    mode: Mode,
) -> Result<Block, LedgerError> {
    if result.round != prev.height + 1 {
        return Err(LedgerError::HeightMismatch {
            round: result.round,
            prev_height: prev.height,
        });
    }
    verify_reveal(result.winner_contribution(), reveal).map_err(|_| LedgerError::RevealMismatch)?;
    let mut b = Block {
        height: result.round,
        timestamp,
        prevhash: prev.block_hash,
        owner: result.winner,
        mode,
        owner_blob: reveal.to_vec(),
        contributions: result.accepted.clone(),
        transactions: txs,
        block_hash: Hash256::ZERO,
    };
    b.block_hash = block_hash(&b);
    Ok(b)
}

/// Re-executes the round recorded in `b`. Checks run in a fixed order and
/// the first failure is returned.
pub fn validate_block(b: &Block, prev: &Block, keys: &KeyDirectory, cfg: &RoundConfig) -> Result<(), BlockRejection> {
    if Some(b.height) != prev.height.checked_add(1) {
        return Err(BlockRejection::BadHeight);
    }
    if b.prevhash != prev.block_hash {
        return Err(BlockRejection::BadPrevHash);
    }
    if b.mode != cfg.mode {
        return Err(BlockRejection::ModeMismatch);
    }
    for c in &b.contributions {
        let public = keys.get(c.node).ok_or(BlockRejection::BadSignature)?;
        match validate_contribution(c, public, cfg, b.height, keys.params()) {
            Ok(()) => {}
            Err(Rejection::BadSignature | Rejection::UnknownNode) => return Err(BlockRejection::BadSignature),
            Err(_) => return Err(BlockRejection::BadContribution),
        }
    }
    if b.contributions.windows(2).any(|w| w[0].node >= w[1].node) {
        return Err(BlockRejection::BadContribution);
    }
    let owner = b
        .contributions
        .iter()
        .find(|c| c.node == b.owner)
        .ok_or(BlockRejection::RevealMismatch)?;
    verify_reveal(owner, &b.owner_blob).map_err(|_| BlockRejection::RevealMismatch)?;
    match recompute_winner(&b.contributions, &b.prevhash, cfg) {
        Ok(w) if w == b.owner => {}
        Ok(_) | Err(ConsensusError::EmptyRound) => return Err(BlockRejection::WrongWinner),
        Err(_) => return Err(BlockRejection::BadContribution),
    }
    if block_hash(b) != b.block_hash {
        return Err(BlockRejection::BadBlockHash);
    }
    Ok(())
}

/// Ordered blocks; network parameters live in the genesis block.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Chain {
    pub blocks: Vec<Block>,
}

impl Chain {
    pub fn new(network_id: &str, cfg: &RoundConfig) -> Self {
        Chain {
            blocks: vec![genesis(network_id, cfg)],
        }
    }

    /// Network id and round configuration recorded in genesis.
    pub fn params(&self) -> Option<(String, RoundConfig)> {
        let g = self.blocks.first()?;
        match g.transactions.as_slice() {
            [tx] => decode_genesis_params(tx),
            _ => None,
        }
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn push(&mut self, b: Block) {
        self.blocks.push(b);
    }
}

pub fn validate_chain(chain: &Chain, keys: &KeyDirectory) -> Result<(), ChainRejection> {
    let at = |height: u64, reason| ChainRejection { height, reason };
    let Some(first) = chain.blocks.first() else {
        return Err(at(0, BlockRejection::MissingGenesis));
    };
    if block_hash(first) != first.block_hash {
        return Err(at(0, BlockRejection::BadBlockHash));
    }
    let (network_id, cfg) = chain.params().ok_or(at(0, BlockRejection::BadGenesis))?;
    if *first != genesis(&network_id, &cfg) {
        return Err(at(0, BlockRejection::BadGenesis));
    }
    for (i, pair) in chain.blocks.windows(2).enumerate() {
        validate_block(&pair[1], &pair[0], keys, &cfg).map_err(|r| at(i as u64 + 1, r))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
