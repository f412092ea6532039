//! Deterministic discrete-event simulation of PoR rounds with honest and
//! grinding nodes, plus fairness and advantage statistics.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{
    large_distance, make_contribution, score_screened, screen, ConsensusError, Contribution, KeyDirectory, Mode,
    NodeId, RoundConfig, SelectionRule,
};
use crate::crypto::{keygen, CryptoError, CurveParams, KeyPair};
use crate::ledger::{build_block, Chain, LedgerError};
use crate::macau::{sha256, Hash256};
use crate::randomness::{
    fill_pool, run_suite, select_piece, split_pool, EntropySource, RandomnessError, SuiteConfig, DEFAULT_ALPHA,
    DEFAULT_BLOCK_LEN, MIN_TEST_BITS,
};

mod metrics;

pub use metrics::{advantage_report, chi_square_uniformity, merge_metrics, Advantage, Metrics};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
    #[error("node {0} failed the randomness gate")]
    GateFailed(NodeId),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error(transparent)]
    Randomness(#[from] RandomnessError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub node: u64,
    /// Candidate blobs drawn per round.
    pub samples_k: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub adversaries: Vec<AdversarySpec>,
    pub mode: Mode,
    pub selection_rule: SelectionRule,
    pub rounds: u64,
    pub seed: u64,
    pub blob_bytes: usize,
    pub min_dt_ms: u64,
    pub base_dt_ms: u64,
    pub dt_jitter_ms: u64,
    pub dt_per_sample_ms: u64,
    pub latency_ms: (u64, u64),
    pub gate_randomness: bool,
    /// Pieces per pool when the gate is on; the pool holds
    /// `pieces * blob_bytes` bytes.
    pub pieces: usize,
    pub alpha: f64,
    pub block_len: usize,
    pub txs_per_block: usize,
    pub curve: String,
    pub network_id: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_nodes: 16,
            adversaries: Vec::new(),
            mode: Mode::LargePrevhash,
            selection_rule: SelectionRule::Min,
            rounds: 100,
            seed: 0,
            blob_bytes: 1024,
            min_dt_ms: 100,
            base_dt_ms: 100,
            dt_jitter_ms: 20,
            dt_per_sample_ms: 100,
            latency_ms: (5, 50),
            gate_randomness: false,
            pieces: 256,
            alpha: DEFAULT_ALPHA,
            block_len: DEFAULT_BLOCK_LEN,
            txs_per_block: 1,
            curve: "test64".into(),
            network_id: "por-sim".into(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::ConfigInvalid(m));
        if self.n_nodes == 0 {
            return bad("n_nodes must be at least 1".into());
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.adversaries {
            if a.node >= self.n_nodes as u64 {
                return bad(format!(
                    "adversary id {} is not below n_nodes = {}",
                    a.node, self.n_nodes
                ));
            }
            if a.samples_k == 0 {
                return bad(format!("adversary {} needs samples_k >= 1", a.node));
            }
            if !seen.insert(a.node) {
                return bad(format!("adversary {} listed twice", a.node));
            }
        }
        if self.blob_bytes == 0 {
            return bad("blob_bytes must be at least 1".into());
        }
        if self.base_dt_ms == 0 {
            return bad("base_dt_ms must be at least 1 so that t2 > t1".into());
        }
        if self.latency_ms.0 > self.latency_ms.1 {
            return bad("latency_ms minimum exceeds maximum".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie strictly between 0 and 1".into());
        }
        if self.gate_randomness {
            let bits = self.pieces * self.blob_bytes * 8;
            if self.pieces == 0 || bits < MIN_TEST_BITS.max(self.block_len) || self.block_len < 20 {
                return bad(format!(
                    "gated pool of {bits} bits is too small for block length {}",
                    self.block_len
                ));
            }
        }
        CurveParams::by_name(&self.curve).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        self.round_config().map(|_| ())
    }

    pub fn round_config(&self) -> Result<RoundConfig, SimError> {
        RoundConfig::new(self.mode, self.selection_rule, self.min_dt_ms)
            .map_err(|e| SimError::ConfigInvalid(e.to_string()))
    }

    pub fn samples_for(&self, node: u64) -> Option<u64> {
        self.adversaries.iter().find(|a| a.node == node).map(|a| a.samples_k)
    }
}

/// Seed for one named stream of one node: the first 8 bytes of
/// sha256(label || seed || id).
pub fn derive_seed(seed: u64, label: &[u8], id: u64) -> u64 {
    let mut pre = label.to_vec();
    pre.extend_from_slice(&seed.to_be_bytes());
    pre.extend_from_slice(&id.to_be_bytes());
    let h = sha256(&pre).to_be_bytes();
    u64::from_be_bytes(h[..8].try_into().expect("8 bytes"))
}

const NETWORK_STREAM: u64 = u64::MAX;

struct Node {
    id: NodeId,
    key: KeyPair,
    /// Blobs and jitter.
    entropy: EntropySource,
    /// Key generation and signature nonces.
    signer: EntropySource,
    samples_k: Option<u64>,
}

/// A signed contribution together with the blob it commits to.
#[derive(Clone, Debug)]
pub struct Step {
    pub contribution: Contribution,
    pub blob: Vec<u8>,
}

pub struct Simulation {
    cfg: SimConfig,
    round_cfg: RoundConfig,
    params: CurveParams,
    nodes: Vec<Node>,
    keys: KeyDirectory,
    chain: Chain,
    net: EntropySource,
    clock: u64,
}

pub fn build_sim(cfg: &SimConfig) -> Result<Simulation, SimError> {
    cfg.validate()?;
    let params = CurveParams::by_name(&cfg.curve)?;
    let round_cfg = cfg.round_config()?;
    let mut keys = KeyDirectory::new(params.clone());
    let mut nodes = Vec::with_capacity(cfg.n_nodes);
    for i in 0..cfg.n_nodes as u64 {
        let mut signer = EntropySource::seeded(derive_seed(cfg.seed, b"signer", i));
        let key = keygen(&mut signer, &params)?;
        keys.insert(NodeId(i), key.public)?;
        nodes.push(Node {
            id: NodeId(i),
            key,
            entropy: EntropySource::seeded(derive_seed(cfg.seed, b"entropy", i)),
            signer,
            samples_k: cfg.samples_for(i),
        });
    }
    Ok(Simulation {
        cfg: cfg.clone(),
        round_cfg,
        params,
        nodes,
        keys,
        chain: Chain::new(&cfg.network_id, &round_cfg),
        net: EntropySource::seeded(derive_seed(cfg.seed, b"network", NETWORK_STREAM)),
        clock: 1,
    })
}

impl Simulation {
    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn keys(&self) -> &KeyDirectory {
        &self.keys
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    /// Digest of the public initial state: key directory and genesis.
    pub fn state_digest(&self) -> Hash256 {
        let mut pre = self.keys.to_json().into_bytes();
        for b in &self.chain.blocks {
            pre.extend_from_slice(&b.block_hash.to_be_bytes());
        }
        sha256(&pre)
    }

    /// Swaps a node's blob source, e.g. for a broken generator.
    pub fn replace_entropy(&mut self, node: NodeId, source: EntropySource) {
        self.nodes[node.0 as usize].entropy = source;
    }

    fn draw_blob(&mut self, idx: usize) -> Result<Vec<u8>, SimError> {
        let blob_bytes = self.cfg.blob_bytes;
        let node = &mut self.nodes[idx];
        if !self.cfg.gate_randomness {
            let mut blob = vec![0u8; blob_bytes];
            node.entropy.fill(&mut blob)?;
            return Ok(blob);
        }
        let pool = fill_pool(&mut node.entropy, self.cfg.pieces * blob_bytes * 8)?;
        let suite = SuiteConfig {
            alpha: self.cfg.alpha,
            block_len: self.cfg.block_len,
        };
        if !run_suite(&pool, &suite)?.all_passed {
            return Err(SimError::GateFailed(node.id));
        }
        let pieces = split_pool(&pool, self.cfg.pieces)?;
        Ok(select_piece(&pieces, &mut node.entropy)?.bytes)
    }

    fn sign_step(&mut self, idx: usize, round: u64, blob: Vec<u8>, t1: u64, t2: u64) -> Result<Step, SimError> {
        let node = &mut self.nodes[idx];
        let contribution = make_contribution(node.id, round, &blob, t1, t2, &node.key, &mut node.signer, &self.params)?;
        Ok(Step { contribution, blob })
    }

    /// One blob, t2 = t1 + base_dt + jitter with jitter uniform in [0, dt_jitter].
    pub fn honest_step(&mut self, node: NodeId, round: u64, clock: u64) -> Result<Step, SimError> {
        let idx = node.0 as usize;
        let blob = self.draw_blob(idx)?;
        let jitter = self.nodes[idx].entropy.uniform_inclusive(0, self.cfg.dt_jitter_ms)?;
        let t2 = clock + self.cfg.base_dt_ms + jitter;
        self.sign_step(idx, round, blob, clock, t2)
    }

    /// Draws `samples_k` blobs and submits the one with the best
    /// prevhash distance. Each sample past the first costs dt_per_sample on top
    /// of the honest delay, so a single-sample adversary is an honest node.
    /// In SmallSync mode the target is unknown in advance, so the node plays
    /// honestly.
    pub fn adversary_step(
        &mut self,
        node: NodeId,
        round: u64,
        prevhash: &Hash256,
        clock: u64,
    ) -> Result<Step, SimError> {
        let idx = node.0 as usize;
        let k = self.nodes[idx].samples_k.unwrap_or(1);
        if self.cfg.mode == Mode::SmallSync {
            return self.honest_step(node, round, clock);
        }
        let mut best: Option<(Hash256, Vec<u8>)> = None;
        for _ in 0..k {
            let blob = self.draw_blob(idx)?;
            let d = large_distance(&sha256(&blob), prevhash);
            let better = match (&best, self.cfg.selection_rule) {
                (None, _) => true,
                (Some((bd, _)), SelectionRule::Min) => d < *bd,
                (Some((bd, _)), SelectionRule::Max) => d > *bd,
            };
            if better {
                best = Some((d, blob));
            }
        }
        let (_, blob) = best.expect("samples_k >= 1");
        let jitter = self.nodes[idx].entropy.uniform_inclusive(0, self.cfg.dt_jitter_ms)?;
        let t2 = clock + self.cfg.base_dt_ms + jitter + (k - 1) * self.cfg.dt_per_sample_ms;
        self.sign_step(idx, round, blob, clock, t2)
    }

    /// Plays one round. Returns the winner, or `None` when no contribution
    /// survived validation.
    fn play_round(&mut self, metrics: &mut Metrics) -> Result<Option<NodeId>, SimError> {
        let tip = self.chain.tip().expect("chain starts at genesis").clone();
        let round = tip.height + 1;
        let start = self.clock;

        let mut steps = Vec::with_capacity(self.nodes.len());
        for idx in 0..self.nodes.len() {
            let id = self.nodes[idx].id;
            let step = match self.nodes[idx].samples_k {
                Some(_) => self.adversary_step(id, round, &tip.block_hash, start),
                None => self.honest_step(id, round, start),
            };
            match step {
                Ok(s) => steps.push(s),
                Err(SimError::GateFailed(_)) => metrics.gate_failures += 1,
                Err(e) => return Err(e),
            }
        }

        // delivery order: arrival time, then send order
        let mut queue = BinaryHeap::new();
        for (seq, s) in steps.iter().enumerate() {
            let latency = self
                .net
                .uniform_inclusive(self.cfg.latency_ms.0, self.cfg.latency_ms.1)?;
            queue.push(Reverse((s.contribution.t2 + latency, seq)));
        }
        let mut delivered = Vec::with_capacity(steps.len());
        let mut end = start + 1;
        while let Some(Reverse((arrival, seq))) = queue.pop() {
            end = end.max(arrival);
            delivered.push(steps[seq].contribution.clone());
        }
        self.clock = end + 1;

        let screened = screen(&delivered, round, &self.round_cfg, &self.keys);
        for (_, reason) in &screened.rejected {
            *metrics
                .rejected_contributions
                .entry(reason.as_str().to_string())
                .or_default() += 1;
        }
        let result = match score_screened(screened, round, &tip.block_hash, &self.round_cfg) {
            Ok(r) => r,
            Err(ConsensusError::NoValidContributions) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let reveal = &steps
            .iter()
            .find(|s| s.contribution.node == result.winner)
            .expect("winner submitted a step")
            .blob;
        let mut txs = Vec::with_capacity(self.cfg.txs_per_block);
        for _ in 0..self.cfg.txs_per_block {
            let mut tx = vec![0u8; 32];
            self.net.fill(&mut tx)?;
            txs.push(tx);
        }
        let block = build_block(&result, reveal, txs, &tip, end, self.cfg.mode)?;
        self.chain.push(block);
        Ok(Some(result.winner))
    }
}

/// Executes every configured round and returns the chain and metrics.
pub fn run(mut sim: Simulation) -> Result<(Chain, Metrics), SimError> {
    let mut metrics = Metrics::empty(&sim.cfg);
    for _ in 0..sim.cfg.rounds {
        match sim.play_round(&mut metrics)? {
            Some(w) => metrics.record_win(w),
            None => metrics.rounds_skipped += 1,
        }
    }
    metrics.finalize();
    Ok((sim.chain, metrics))
}

pub fn simulate(cfg: &SimConfig) -> Result<(Chain, Metrics), SimError> {
    run(build_sim(cfg)?)
}

/// Runs one simulation per seed on the rayon pool; results come back in
/// seed order.
pub fn run_seeds(cfg: &SimConfig, seeds: &[u64]) -> Result<Vec<(Chain, Metrics)>, SimError> {
    seeds
        .par_iter()
        .map(|&seed| simulate(&SimConfig { seed, ..cfg.clone() }))
        .collect()
}

/// Like [`run_seeds`] but drops each chain as soon as its run finishes.
pub fn run_seeds_metrics(cfg: &SimConfig, seeds: &[u64]) -> Result<Vec<Metrics>, SimError> {
    seeds
        .par_iter()
        .map(|&seed| simulate(&SimConfig { seed, ..cfg.clone() }).map(|(_, m)| m))
        .collect()
}
