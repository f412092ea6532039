//! Proof-of-randomness consensus.
//!
//! Nodes commit to the SHA-256 of a tested random blob; the round target is
//! derived from those commitments (or from the previous block hash) and the
//! node whose commitment lies closest to it owns the next block.

pub mod consensus;
pub mod crypto;
pub mod ledger;
pub mod macau;
pub mod netsim;
pub mod randomness;

pub use consensus::{Contribution, KeyDirectory, Mode, NodeId, RoundConfig, RoundResult, Score, SelectionRule};
pub use crypto::{CurveParams, KeyPair, Point, Signature};
pub use ledger::{Block, Chain};
pub use macau::{Hash256, U256, U320};
pub use netsim::{AdversarySpec, Metrics, SimConfig};
pub use randomness::{BitPool, EntropySource, RandomBlob, SourceSpec};
