use std::path::Path;

use sha2::{Digest, Sha256};

use super::*;
use crate::consensus::{make_contribution, run_round};
use crate::crypto::{keygen, CurveParams, KeyPair, Signature};
use crate::randomness::EntropySource;

struct Fixture {
    params: CurveParams,
    pairs: Vec<KeyPair>,
    keys: KeyDirectory,
    src: EntropySource,
    cfg: RoundConfig,
    chain: Chain,
}

fn fixture(n: usize, mode: Mode) -> Fixture {
    let params = CurveParams::test64();
    let mut src = EntropySource::seeded(99);
    let mut keys = KeyDirectory::new(params.clone());
    let pairs: Vec<KeyPair> = (0..n).map(|_| keygen(&mut src, &params).unwrap()).collect();
    for (i, kp) in pairs.iter().enumerate() {
        keys.insert(NodeId(i as u64), kp.public).unwrap();
    }
    let cfg = RoundConfig::new(mode, SelectionRule::Min, 100).unwrap();
    Fixture {
        params,
        pairs,
        keys,
        src,
        cfg,
        chain: Chain::new("test-net", &cfg),
    }
}

impl Fixture {
    fn round(&mut self, blobs: &[Vec<u8>]) -> (RoundResult, Vec<Vec<u8>>) {
        let m = self.chain.tip().unwrap().height + 1;
        let contribs: Vec<Contribution> = blobs
            .iter()
            .enumerate()
            .map(|(i, blob)| {
                make_contribution(
                    NodeId(i as u64),
                    m,
                    blob,
                    m * 1000,
                    m * 1000 + 100 + i as u64 * 3,
                    &self.pairs[i],
                    &mut self.src,
                    &self.params,
                )
                .unwrap()
            })
            .collect();
        let prev = self.chain.tip().unwrap().block_hash;
        (
            run_round(&contribs, m, &prev, &self.cfg, &self.keys).unwrap(),
            blobs.to_vec(),
        )
    }

    fn extend(&mut self, rounds: usize) {
        for _ in 0..rounds {
            let blobs: Vec<Vec<u8>> = (0..self.pairs.len())
                .map(|_| {
                    let mut b = vec![0u8; 32];
                    self.src.fill(&mut b).unwrap();
                    b
                })
                .collect();
            let (r, blobs) = self.round(&blobs);
            let tip = self.chain.tip().unwrap().clone();
            let reveal = &blobs[r.winner.0 as usize];
            let tx = format!("tx at {}", r.round).into_bytes();
            let b = build_block(&r, reveal, vec![tx], &tip, r.round * 1000 + 500, self.cfg.mode).unwrap();
            self.chain.push(b);
        }
    }
}

#[test]
fn genesis_properties() {
    let cfg = RoundConfig::default();
    assert_eq!(genesis("net-a", &cfg), genesis("net-a", &cfg));
    assert_ne!(genesis("net-a", &cfg).block_hash, genesis("net-b", &cfg).block_hash);
    let g = genesis("net-a", &cfg);
    assert_eq!(g.prevhash.to_hex(), "0".repeat(64));
    assert_eq!(g.owner, NodeId(0));
    assert!(g.owner_blob.is_empty() && g.contributions.is_empty());
    assert_eq!(Chain { blocks: vec![g] }.params(), Some(("net-a".to_string(), cfg)));
}

#[test]
fn built_blocks_validate_in_every_mode() {
    for mode in [Mode::SmallSync, Mode::LargePrevhash, Mode::TimeWeighted] {
        let mut f = fixture(4, mode);
        f.extend(5);
        assert_eq!(validate_chain(&f.chain, &f.keys), Ok(()), "{mode}");
    }
}

#[test]
fn build_block_guards() {
    let mut f = fixture(3, Mode::LargePrevhash);
    let blobs = vec![b"a".to_vec(), b"b".to_vec(), b"c".to_vec()];
    let (r, _) = f.round(&blobs);
    let tip = f.chain.tip().unwrap().clone();
    assert!(matches!(
        build_block(&r, b"not the blob", vec![], &tip, 1, Mode::LargePrevhash),
        Err(LedgerError::RevealMismatch)
    ));
    let mut skipped = r.clone();
    skipped.round = tip.height + 2;
    let reveal = &blobs[r.winner.0 as usize];
    assert!(matches!(
        build_block(&skipped, reveal, vec![], &tip, 1, Mode::LargePrevhash),
        Err(LedgerError::HeightMismatch { .. })
    ));
}

#[test]
fn block_hash_is_stable_and_sensitive() {
    let mut f = fixture(4, Mode::LargePrevhash);
    f.extend(1);
    let b = f.chain.blocks[1].clone();
    assert_eq!(block_hash(&b), b.block_hash);
    let mut flipped = b.clone();
    flipped.owner_blob[0] ^= 1;
    assert_ne!(block_hash(&flipped), b.block_hash);
}

/// Serializes the block field by field without going through
/// `Block::canonical_bytes`.
fn reference_hash(b: &Block) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b.height.to_be_bytes());
    h.update(b.timestamp.to_be_bytes());
    h.update(b.prevhash.to_be_bytes());
    h.update(b.owner.0.to_be_bytes());
    h.update([match b.mode {
        Mode::SmallSync => 0u8,
        Mode::LargePrevhash => 1,
        Mode::TimeWeighted => 2,
    }]);
    h.update((b.owner_blob.len() as u64).to_be_bytes());
    h.update(&b.owner_blob);
    h.update((b.contributions.len() as u64).to_be_bytes());
    for c in &b.contributions {
        h.update(c.node.0.to_be_bytes());
        h.update(c.round.to_be_bytes());
        h.update(c.first_hash.to_be_bytes());
        h.update(c.t1.to_be_bytes());
        h.update(c.t2.to_be_bytes());
        h.update(c.signature.challenge.to_be_bytes());
        h.update(c.signature.response.to_be_bytes());
    }
    h.update((b.transactions.len() as u64).to_be_bytes());
    for tx in &b.transactions {
        h.update((tx.len() as u64).to_be_bytes());
        h.update(tx);
    }
    h.finalize().into()
}

#[test]
fn four_node_block_hash_matches_reference_serializer() {
    let mut f = fixture(4, Mode::SmallSync);
    let blobs: Vec<Vec<u8>> = [b"a", b"b", b"c", b"d"].iter().map(|b| b.to_vec()).collect();
    let (r, _) = f.round(&blobs);
    let tip = f.chain.tip().unwrap().clone();
    let b = build_block(
        &r,
        &blobs[r.winner.0 as usize],
        vec![b"t".to_vec()],
        &tip,
        42,
        Mode::SmallSync,
    )
    .unwrap();
    assert_eq!(b.block_hash.to_be_bytes(), reference_hash(&b));
    assert_eq!(tip.block_hash.to_be_bytes(), reference_hash(&tip));
}

#[test]
fn tampered_blocks_rejected_with_reason() {
    let mut f = fixture(4, Mode::LargePrevhash);
    f.extend(2);
    let prev = f.chain.blocks[1].clone();
    let b = f.chain.blocks[2].clone();
    assert_eq!(validate_block(&b, &prev, &f.keys, &f.cfg), Ok(()));

    let mut t = b.clone();
    t.height += 1;
    assert_eq!(
        validate_block(&t, &prev, &f.keys, &f.cfg),
        Err(BlockRejection::BadHeight)
    );

    let mut t = b.clone();
    t.prevhash = Hash256::ONE;
    assert_eq!(
        validate_block(&t, &prev, &f.keys, &f.cfg),
        Err(BlockRejection::BadPrevHash)
    );

    let mut t = b.clone();
    t.mode = Mode::SmallSync;
    assert_eq!(
        validate_block(&t, &prev, &f.keys, &f.cfg),
        Err(BlockRejection::ModeMismatch)
    );

    let mut t = b.clone();
    let mut sig = t.contributions[1].signature.to_bytes();
    sig[60] ^= 4;
    t.contributions[1].signature = Signature::from_bytes(&sig).unwrap();
    assert_eq!(
        validate_block(&t, &prev, &f.keys, &f.cfg),
        Err(BlockRejection::BadSignature)
    );

    let mut t = b.clone();
    t.owner_blob.push(0);
    assert_eq!(
        validate_block(&t, &prev, &f.keys, &f.cfg),
        Err(BlockRejection::RevealMismatch)
    );

    let mut t = b.clone();
    t.contributions.swap(0, 1);
    assert_eq!(
        validate_block(&t, &prev, &f.keys, &f.cfg),
        Err(BlockRejection::BadContribution)
    );

    let mut t = b.clone();
    t.transactions.push(b"extra".to_vec());
    assert_eq!(
        validate_block(&t, &prev, &f.keys, &f.cfg),
        Err(BlockRejection::BadBlockHash)
    );
}

#[test]
fn runner_up_as_owner_is_wrong_winner() {
    let mut f = fixture(4, Mode::LargePrevhash);
    let blobs: Vec<Vec<u8>> = (0..4u8).map(|i| vec![i; 8]).collect();
    let (r, _) = f.round(&blobs);
    let mut ranked = r.per_node.clone();
    ranked.sort_by(|a, b| a.score.cmp(&b.score).then(a.node.cmp(&b.node)));
    let runner_up = ranked[1].node;
    let tip = f.chain.tip().unwrap().clone();
    let mut b = build_block(&r, &blobs[r.winner.0 as usize], vec![], &tip, 9, Mode::LargePrevhash).unwrap();
    b.owner = runner_up;
    b.owner_blob = blobs[runner_up.0 as usize].clone();
    b.block_hash = block_hash(&b);
    assert_eq!(
        validate_block(&b, &tip, &f.keys, &f.cfg),
        Err(BlockRejection::WrongWinner)
    );
}

#[test]
fn chain_level_failures_are_located() {
    assert_eq!(
        validate_chain(&Chain::default(), &fixture(1, Mode::LargePrevhash).keys),
        Err(ChainRejection {
            height: 0,
            reason: BlockRejection::MissingGenesis
        })
    );
    let mut f = fixture(3, Mode::LargePrevhash);
    f.extend(10);
    let mut c = f.chain.clone();
    c.blocks[7].transactions[0][0] ^= 1;
    assert_eq!(
        validate_chain(&c, &f.keys),
        Err(ChainRejection {
            height: 7,
            reason: BlockRejection::BadBlockHash
        })
    );
    let mut c = f.chain.clone();
    c.blocks[0].transactions[0].push(0);
    assert_eq!(validate_chain(&c, &f.keys).unwrap_err().height, 0);
}

#[test]
fn save_load_roundtrip_is_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.jsonl");
    let mut f = fixture(3, Mode::TimeWeighted);
    f.extend(4);
    save_chain(&f.chain, &path).unwrap();
    let loaded = load_chain(&path).unwrap();
    assert_eq!(loaded, f.chain);
    let first = std::fs::read(&path).unwrap();
    let again = dir.path().join("again.jsonl");
    save_chain(&loaded, &again).unwrap();
    assert_eq!(std::fs::read(&again).unwrap(), first);

    let text = String::from_utf8(first).unwrap();
    let line1 = text.lines().next().unwrap();
    for key in [
        "height",
        "timestamp_ms",
        "prevhash",
        "owner",
        "mode",
        "owner_blob",
        "contributions",
        "transactions",
        "block_hash",
    ] {
        assert!(line1.contains(&format!("\"{key}\":")), "{key}");
    }
}

#[test]
fn parse_failures_report_lines() {
    let mut f = fixture(2, Mode::LargePrevhash);
    f.extend(3);
    let text = to_jsonl(&f.chain);

    let truncated = &text[..text.len() - 40];
    match parse_chain(truncated) {
        Err(LedgerError::ParseFailure { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }

    let upper = text.replacen("\"prevhash\":\"0000", "\"prevhash\":\"000A", 1);
    assert!(matches!(
        parse_chain(&upper),
        Err(LedgerError::ParseFailure { line: 1, .. })
    ));

    let spaced = text.replacen("{\"height\":1,", "{\"height\": 1,", 1);
    assert!(matches!(
        parse_chain(&spaced),
        Err(LedgerError::ParseFailure { line: 2, .. })
    ));

    let extra = text.replacen("{\"height\":2,", "{\"extra\":0,\"height\":2,", 1);
    assert!(matches!(
        parse_chain(&extra),
        Err(LedgerError::ParseFailure { line: 3, .. })
    ));

    assert!(matches!(
        load_chain(Path::new("/nonexistent/chain.jsonl")),
        Err(LedgerError::Io { .. })
    ));
}
