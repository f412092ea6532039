//! Round evaluation: signed contributions, the aggregate target, the three
//! distance modes and winner selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, CryptoError, CurveParams, KeyPair, Point, Signature};
use crate::macau::{abs_diff, add_mod, macau_aggregate, sha256, sha256_of, Hash256, MacauCombiner, U320};
use crate::randomness::EntropySource;

mod keys;

pub use keys::{KeyDirectory, KeyDirectoryError};

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("clock invariant violated: t2 ({t2}) must exceed t1 ({t1})")]
    ClockInvariantViolated { t1: u64, t2: u64 },
    #[error("round has no contributions")]
    EmptyRound,
    #[error("node {0} contributed more than once")]
    DuplicateNode(NodeId),
    #[error("contributions belong to different rounds")]
    MixedRounds,
    #[error("no contribution survived validation")]
    NoValidContributions,
    #[error("revealed blob does not hash to the committed first hash")]
    RevealMismatch,
    #[error("invalid round configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Everyone hears everyone: target is sha256 of the sum of first hashes.
    SmallSync,
    /// Each node's target is sha256(first_hash + prevhash).
    LargePrevhash,
    /// LargePrevhash distance multiplied by the node's t2 - t1.
    TimeWeighted,
}

impl Mode {
    pub fn tag(self) -> u8 {
        match self {
            Mode::SmallSync => 0,
            Mode::LargePrevhash => 1,
            Mode::TimeWeighted => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Mode::SmallSync),
            1 => Some(Mode::LargePrevhash),
            2 => Some(Mode::TimeWeighted),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SmallSync => "small_sync",
            Mode::LargePrevhash => "large_prevhash",
            Mode::TimeWeighted => "time_weighted",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "small" | "small_sync" => Ok(Mode::SmallSync),
            "large" | "large_prevhash" => Ok(Mode::LargePrevhash),
            "weighted" | "time_weighted" => Ok(Mode::TimeWeighted),
            other => Err(format!("unknown mode {other:?} (small, large, weighted)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    #[default]
    Min,
    Max,
}

impl SelectionRule {
    pub fn tag(self) -> u8 {
        match self {
            SelectionRule::Min => 0,
            SelectionRule::Max => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(SelectionRule::Min),
            1 => Some(SelectionRule::Max),
            _ => None,
        }
    }
}

impl FromStr for SelectionRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "min" => Ok(SelectionRule::Min),
            "max" => Ok(SelectionRule::Max),
            other => Err(format!("unknown selection rule {other:?} (min, max)")),
        }
    }
}

pub const DEFAULT_MIN_DT_MS: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundConfig {
    pub mode: Mode,
    pub selection_rule: SelectionRule,
    /// Milliseconds; only enforced in `TimeWeighted` mode.
    pub min_dt: u64,
}

impl Default for RoundConfig {
    fn default() -> Self {
        RoundConfig {
            mode: Mode::LargePrevhash,
            selection_rule: SelectionRule::Min,
            min_dt: DEFAULT_MIN_DT_MS,
        }
    }
}

impl RoundConfig {
    pub fn new(mode: Mode, selection_rule: SelectionRule, min_dt: u64) -> Result<Self, ConsensusError> {
        let cfg = RoundConfig {
            mode,
            selection_rule,
            min_dt,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConsensusError> {
        if self.mode == Mode::TimeWeighted && self.min_dt == 0 {
            return Err(ConsensusError::InvalidConfig(
                "min_dt must be positive in time_weighted mode".into(),
            ));
        }
        Ok(())
    }
}

/// Bytes covered by a contribution signature.
pub const CONTRIBUTION_PREIMAGE_BYTES: usize = 64;

/// A node's signed per-round commitment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contribution {
    pub node: NodeId,
    pub round: u64,
    pub first_hash: Hash256,
    pub t1: u64,
    pub t2: u64,
    pub signature: Signature,
}

fn preimage(node: NodeId, round: u64, first_hash: &Hash256, t1: u64, t2: u64) -> [u8; 64] {
    let mut out = [0u8; CONTRIBUTION_PREIMAGE_BYTES];
    out[..8].copy_from_slice(&node.0.to_be_bytes());
    out[8..16].copy_from_slice(&round.to_be_bytes());
    out[16..48].copy_from_slice(&first_hash.to_be_bytes());
    out[48..56].copy_from_slice(&t1.to_be_bytes());
    out[56..].copy_from_slice(&t2.to_be_bytes());
    out
}

impl Contribution {
    /// node | round | first_hash | t1 | t2, integers as 8-byte big-endian.
    pub fn canonical_bytes(&self) -> [u8; 64] {
        preimage(self.node, self.round, &self.first_hash, self.t1, self.t2)
    }

    pub fn delta_t(&self) -> Option<u64> {
        self.t2.checked_sub(self.t1).filter(|&d| d > 0)
    }
}

/// D or D * dt. Always fits 320 bits since dt < 2^64.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Score(pub U320);

impl Score {
    pub fn from_distance(d: Hash256) -> Self {
        Score(U320::from_u256(d))
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    BadSignature,
    WrongRound,
    ClockInvariantViolated,
    DeltaBelowFloor,
    UnknownNode,
    DuplicateNode,
}

impl Rejection {
    pub const ALL: [Rejection; 6] = [
        Rejection::BadSignature,
        Rejection::WrongRound,
        Rejection::ClockInvariantViolated,
        Rejection::DeltaBelowFloor,
        Rejection::UnknownNode,
        Rejection::DuplicateNode,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::BadSignature => "bad_signature",
            Rejection::WrongRound => "wrong_round",
            Rejection::ClockInvariantViolated => "clock_invariant_violated",
            Rejection::DeltaBelowFloor => "delta_below_floor",
            Rejection::UnknownNode => "unknown_node",
            Rejection::DuplicateNode => "duplicate_node",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeScore {
    pub node: NodeId,
    pub d: Hash256,
    pub score: Score,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundResult {
    pub round: u64,
    pub winner: NodeId,
    /// Sorted by node id.
    pub per_node: Vec<NodeScore>,
    /// Only in `SmallSync` mode.
    pub second_hash: Option<Hash256>,
    /// The contributions that were scored, sorted by node id.
    pub accepted: Vec<Contribution>,
    /// Sorted by (node, reason).
    pub rejected: Vec<(NodeId, Rejection)>,
}

impl RoundResult {
    pub fn winner_contribution(&self) -> &Contribution {
        self.accepted
            .iter()
            .find(|c| c.node == self.winner)
            .expect("winner is always an accepted contributor")
    }
}

#[allow(clippy::too_many_arguments)]
pub fn make_contribution(
    node: NodeId,
    round: u64,
    blob: &[u8],
    t1: u64,
    t2: u64,
    key: &KeyPair,
    nonce_source: &mut EntropySource,
    params: &CurveParams,
) -> Result<Contribution, ConsensusError> {
    if t2 <= t1 {
        return Err(ConsensusError::ClockInvariantViolated { t1, t2 });
    }
    let first_hash = sha256(blob);
    let signature = crypto::sign(key, &preimage(node, round, &first_hash, t1, t2), nonce_source, params)?;
    Ok(Contribution {
        node,
        round,
        first_hash,
        t1,
        t2,
        signature,
    })
}

/// sha256 of the wrapping sum of all first hashes.
pub fn second_hash(contributions: &[Contribution]) -> Result<Hash256, ConsensusError> {
    let first = contributions.first().ok_or(ConsensusError::EmptyRound)?;
    let mut seen = BTreeSet::new();
    for c in contributions {
        if c.round != first.round {
            return Err(ConsensusError::MixedRounds);
        }
        if !seen.insert(c.node) {
            return Err(ConsensusError::DuplicateNode(c.node));
        }
    }
    let hashes: Vec<Hash256> = contributions.iter().map(|c| c.first_hash).collect();
    Ok(macau_aggregate(&hashes, MacauCombiner::Sum, |s| sha256_of(&s)).expect("non-empty"))
}

pub fn score_small(hs: &Hash256, c: &Contribution) -> Hash256 {
    abs_diff(hs, &c.first_hash)
}

/// H'_n = sha256(first_hash + prevhash mod 2^256)
pub fn derive_large(c: &Contribution, prevhash: &Hash256) -> Hash256 {
    sha256_of(&add_mod(&c.first_hash, prevhash))
}

pub fn score_large(c: &Contribution, prevhash: &Hash256) -> Hash256 {
    large_distance(&c.first_hash, prevhash)
}

/// |sha256(first_hash + prevhash) - first_hash|, computable before signing.
pub fn large_distance(first_hash: &Hash256, prevhash: &Hash256) -> Hash256 {
    abs_diff(&sha256_of(&add_mod(first_hash, prevhash)), first_hash)
}

pub fn time_weighted_score(d: &Hash256, c: &Contribution) -> Result<Score, ConsensusError> {
    let dt = c
        .delta_t()
        .ok_or(ConsensusError::ClockInvariantViolated { t1: c.t1, t2: c.t2 })?;
    Ok(Score(d.widening_mul_u64(dt)))
}

/// Cheap checks first; the signature is verified last.
pub fn validate_contribution(
    c: &Contribution,
    public: &Point,
    cfg: &RoundConfig,
    round: u64,
    params: &CurveParams,
) -> Result<(), Rejection> {
    if c.round != round {
        return Err(Rejection::WrongRound);
    }
    let dt = c.delta_t().ok_or(Rejection::ClockInvariantViolated)?;
    if cfg.mode == Mode::TimeWeighted && dt < cfg.min_dt {
        return Err(Rejection::DeltaBelowFloor);
    }
    if !crypto::verify(public, &c.canonical_bytes(), &c.signature, params) {
        return Err(Rejection::BadSignature);
    }
    Ok(())
}

/// Extremal score under `rule`; equal scores go to the smallest node id.
pub fn select_winner(scored: &[(NodeId, Score)], rule: SelectionRule) -> Result<NodeId, ConsensusError> {
    let better = |a: &(NodeId, Score), b: &(NodeId, Score)| {
        let by_score = match rule {
            SelectionRule::Min => a.1.cmp(&b.1),
            SelectionRule::Max => b.1.cmp(&a.1),
        };
        by_score.then(a.0.cmp(&b.0))
    };
    scored
        .iter()
        .min_by(|a, b| better(a, b))
        .map(|(n, _)| *n)
        .ok_or(ConsensusError::EmptyRound)
}

pub fn verify_reveal(c: &Contribution, blob: &[u8]) -> Result<(), ConsensusError> {
    if sha256(blob) == c.first_hash {
        Ok(())
    } else {
        Err(ConsensusError::RevealMismatch)
    }
}

/// Scores an already validated, node-sorted, duplicate-free contribution set.
fn score_round(
    accepted: &[Contribution],
    prevhash: &Hash256,
    cfg: &RoundConfig,
) -> Result<(Vec<NodeScore>, Option<Hash256>), ConsensusError> {
    let mut hs = None;
    let mut per_node = Vec::with_capacity(accepted.len());
    match cfg.mode {
        Mode::SmallSync => {
            let target = second_hash(accepted)?;
            hs = Some(target);
            for c in accepted {
                let d = score_small(&target, c);
                per_node.push(NodeScore {
                    node: c.node,
                    d,
                    score: Score::from_distance(d),
                });
            }
        }
        Mode::LargePrevhash => {
            for c in accepted {
                let d = score_large(c, prevhash);
                per_node.push(NodeScore {
                    node: c.node,
                    d,
                    score: Score::from_distance(d),
                });
            }
        }
        Mode::TimeWeighted => {
            for c in accepted {
                let d = score_large(c, prevhash);
                per_node.push(NodeScore {
                    node: c.node,
                    d,
                    score: time_weighted_score(&d, c)?,
                });
            }
        }
    }
    Ok((per_node, hs))
}

/// Contributions split into the ones a round may score and the rejected rest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Screened {
    /// Sorted by node id, at most one per node.
    pub accepted: Vec<Contribution>,
    /// Sorted by (node, reason).
    pub rejected: Vec<(NodeId, Rejection)>,
}

/// Validates and deduplicates one round's contributions.
///
/// Byte-identical copies of a contribution count once. A node that signed two
/// different contributions for the round is excluded entirely.
pub fn screen(contributions: &[Contribution], round: u64, cfg: &RoundConfig, keys: &KeyDirectory) -> Screened {
    let mut rejected = Vec::new();
    let mut by_node: BTreeMap<NodeId, Vec<&Contribution>> = BTreeMap::new();
    for c in contributions {
        let Some(public) = keys.get(c.node) else {
            rejected.push((c.node, Rejection::UnknownNode));
            continue;
        };
        match validate_contribution(c, public, cfg, round, keys.params()) {
            Ok(()) => {
                let entry = by_node.entry(c.node).or_default();
                if !entry.contains(&c) {
                    entry.push(c);
                }
            }
            Err(reason) => rejected.push((c.node, reason)),
        }
    }
    let mut accepted = Vec::with_capacity(by_node.len());
    for (node, versions) in by_node {
        if versions.len() == 1 {
            accepted.push(versions[0].clone());
        } else {
            rejected.extend(versions.iter().map(|_| (node, Rejection::DuplicateNode)));
        }
    }
    rejected.sort();
    Screened { accepted, rejected }
}

/// Scores a screened round and picks the winner.
pub fn score_screened(
    screened: Screened,
    round: u64,
    prevhash: &Hash256,
    cfg: &RoundConfig,
) -> Result<RoundResult, ConsensusError> {
    cfg.validate()?;
    if screened.accepted.is_empty() {
        return Err(ConsensusError::NoValidContributions);
    }
    let (per_node, second_hash) = score_round(&screened.accepted, prevhash, cfg)?;
    let scored: Vec<(NodeId, Score)> = per_node.iter().map(|s| (s.node, s.score)).collect();
    let winner = select_winner(&scored, cfg.selection_rule)?;
    Ok(RoundResult {
        round,
        winner,
        per_node,
        second_hash,
        accepted: screened.accepted,
        rejected: screened.rejected,
    })
}

/// Validates, deduplicates and scores one round.
pub fn run_round(
    contributions: &[Contribution],
    round: u64,
    prevhash: &Hash256,
    cfg: &RoundConfig,
    keys: &KeyDirectory,
) -> Result<RoundResult, ConsensusError> {
    cfg.validate()?;
    score_screened(screen(contributions, round, cfg, keys), round, prevhash, cfg)
}

/// Winner of an already accepted set, as recomputed by a verifier.
pub fn recompute_winner(
    accepted: &[Contribution],
    prevhash: &Hash256,
    cfg: &RoundConfig,
) -> Result<NodeId, ConsensusError> {
    let (per_node, _) = score_round(accepted, prevhash, cfg)?;
    let scored: Vec<(NodeId, Score)> = per_node.iter().map(|s| (s.node, s.score)).collect();
    select_winner(&scored, cfg.selection_rule)
}
