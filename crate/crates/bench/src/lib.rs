//! Fixtures shared by the benchmarks.

use por_core::consensus::make_contribution;
use por_core::crypto::keygen;
use por_core::{Contribution, CurveParams, EntropySource, KeyDirectory, NodeId};

/// `n` signed contributions for round 1 and the matching key directory.
pub fn round_fixture(n: usize, seed: u64) -> (Vec<Contribution>, KeyDirectory) {
    let params = CurveParams::test64();
    let mut src = EntropySource::seeded(seed);
    let mut keys = KeyDirectory::new(params.clone());
    let mut out = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let pair = keygen(&mut src, &params).expect("seeded source never runs dry");
        keys.insert(NodeId(i), pair.public)
            .expect("generated key is on the curve");
        let mut blob = [0u8; 64];
        src.fill(&mut blob).expect("seeded source never runs dry");
        let dt = 100 + i % 20;
        out.push(
            make_contribution(NodeId(i), 1, &blob, 1000, 1000 + dt, &pair, &mut src, &params).expect("valid inputs"),
        );
    }
    (out, keys)
}
