//! Frequency, block-frequency and runs tests from the SP 800-22 battery.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use super::{BitPool, RandomnessError};

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_BLOCK_LEN: usize = 128;
/// Minimum sequence length for gating use.
pub const MIN_TEST_BITS: usize = 100;
const MIN_BLOCK_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub passed: bool,
}

impl TestResult {
    fn new(name: &str, statistic: f64, p_value: f64, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            test_name: name.to_string(),
            statistic,
            p_value,
            passed: p_value >= alpha,
        }
    }

    /// Re-evaluates the verdict at a different significance level.
    pub fn at_alpha(mut self, alpha: f64) -> Self {
        self.passed = self.p_value >= alpha;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub results: Vec<TestResult>,
    pub all_passed: bool,
    pub pool_length_bits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub alpha: f64,
    pub block_len: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            alpha: DEFAULT_ALPHA,
            block_len: DEFAULT_BLOCK_LEN,
        }
    }
}

impl SuiteConfig {
    /// Shortest pool every test in the suite accepts.
    pub fn min_bits(&self) -> usize {
        MIN_TEST_BITS.max(self.block_len)
    }
}

fn require_len(pool: &BitPool, needed: usize) -> Result<(), RandomnessError> {
    if pool.len_bits() < needed {
        return Err(RandomnessError::PoolTooShort {
            needed,
            got: pool.len_bits(),
        });
    }
    Ok(())
}

pub fn monobit_test(pool: &BitPool) -> Result<TestResult, RandomnessError> {
    require_len(pool, MIN_TEST_BITS)?;
    Ok(monobit_unchecked(pool))
}

/// Frequency test without the minimum-length gate (for short worked examples).
pub fn monobit_unchecked(pool: &BitPool) -> TestResult {
    let n = pool.len_bits() as f64;
    let ones = pool.count_ones() as f64;
    let s_obs = (2.0 * ones - n).abs() / n.sqrt();
    TestResult::new("monobit", s_obs, erfc(s_obs / std::f64::consts::SQRT_2), DEFAULT_ALPHA)
}

pub fn block_frequency_test(pool: &BitPool, block_len: usize) -> Result<TestResult, RandomnessError> {
    if block_len < MIN_BLOCK_LEN {
        return Err(RandomnessError::BlockLenInvalid(block_len));
    }
    require_len(pool, block_len)?;
    let n_blocks = pool.len_bits() / block_len;
    let m = block_len as f64;
    let chi_sq = 4.0
        * m
        * (0..n_blocks)
            .map(|b| {
                let pi = pool.count_ones_in(b * block_len, block_len) as f64 / m;
                (pi - 0.5) * (pi - 0.5)
            })
            .sum::<f64>();
    let p = if chi_sq == 0.0 {
        1.0
    } else {
        gamma_ur(n_blocks as f64 / 2.0, chi_sq / 2.0)
    };
    Ok(TestResult::new("block_frequency", chi_sq, p, DEFAULT_ALPHA))
}

pub fn runs_test(pool: &BitPool) -> Result<TestResult, RandomnessError> {
    require_len(pool, MIN_TEST_BITS)?;
    Ok(runs_unchecked(pool))
}

/// Runs test without the minimum-length gate. The statistic is the observed
/// run count V.
pub fn runs_unchecked(pool: &BitPool) -> TestResult {
    let n = pool.len_bits();
    let nf = n as f64;
    let pi = pool.count_ones() as f64 / nf;
    let mut runs = 1usize;
    let mut prev = pool.bit(0);
    for i in 1..n {
        let b = pool.bit(i);
        if b != prev {
            runs += 1;
        }
        prev = b;
    }
    let v = runs as f64;
    let p = if (pi - 0.5).abs() >= 2.0 / nf.sqrt() {
        0.0
    } else {
        let spread = pi * (1.0 - pi);
        erfc((v - 2.0 * nf * spread).abs() / (2.0 * (2.0 * nf).sqrt() * spread))
    };
    TestResult::new("runs", v, p, DEFAULT_ALPHA)
}

/// Runs the three-test gate; `all_passed` is true iff every p-value is at least alpha.
pub fn run_suite(pool: &BitPool, cfg: &SuiteConfig) -> Result<SuiteReport, RandomnessError> {
    require_len(pool, cfg.min_bits())?;
    let results = vec![
        monobit_test(pool)?.at_alpha(cfg.alpha),
        block_frequency_test(pool, cfg.block_len)?.at_alpha(cfg.alpha),
        runs_test(pool)?.at_alpha(cfg.alpha),
    ];
    let all_passed = results.iter().all(|r| r.passed);
    Ok(SuiteReport {
        results,
        all_passed,
        pool_length_bits: pool.len_bits(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::{fill_pool, EntropySource};
    use proptest::prelude::*;
    use sha2::{Digest, Sha256};

    // Reference values below were evaluated once at 50-digit precision with
    // mpmath (erfc and the regularized upper incomplete gamma).
    const ERFC_8: f64 = 1.122_429_717_298_292_7e-29;
    const RUNS_WORKED_EXAMPLE_P: f64 = 0.147_232_255_363_665_56;
    const MONOBIT_WORKED_EXAMPLE_P: f64 = 0.527_089_256_865_538;
    const PI_100_MONOBIT_P: f64 = 0.109_598_583_399_116;
    const HASH_POOL_MONOBIT: (f64, f64) = (0.237_543_684_304_855_8, 0.812_235_033_633_024_6);
    const HASH_POOL_BLOCK128: (f64, f64) = (970.031_25, 0.884_808_664_897_549_7);
    const HASH_POOL_RUNS: (f64, f64) = (65_640.0, 0.565_507_488_391_046_1);

    /// 2^17 bits: concatenated SHA-256 digests of 0u64, 1u64, ... (big-endian).
    fn hash_pool() -> BitPool {
        let mut bytes = Vec::new();
        let mut i = 0u64;
        while bytes.len() < 1 << 14 {
            bytes.extend_from_slice(&Sha256::digest(i.to_be_bytes()));
            i += 1;
        }
        BitPool::from_bytes(bytes)
    }

    fn alternating(n: usize) -> BitPool {
        BitPool::from_bits(&(0..n).map(|i| i % 2 == 0).collect::<Vec<_>>())
    }

    fn rel_close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn monobit_balanced() {
        let r = monobit_test(&alternating(128)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(r.passed);
    }

    #[test]
    fn monobit_all_zeros() {
        let r = monobit_test(&BitPool::from_bytes(vec![0; 16])).unwrap();
        assert!((r.statistic - 128f64.sqrt()).abs() < 1e-12);
        assert!(r.p_value < 1e-20);
        assert!(rel_close(r.p_value, ERFC_8, 1e-6));
        assert!(!r.passed);
    }

    #[test]
    fn monobit_worked_example() {
        let r = monobit_unchecked(&BitPool::from_bit_str("1011010101"));
        assert!((r.p_value - MONOBIT_WORKED_EXAMPLE_P).abs() < 1e-9);
    }

    #[test]
    fn monobit_pi_prefix() {
        // first 100 bits of pi in binary, integer part included
        let bits =
            "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000";
        let pool = BitPool::from_bit_str(&bits[..100]);
        assert_eq!(pool.len_bits(), 100);
        let r = monobit_test(&pool).unwrap();
        assert!((r.statistic - 1.6).abs() < 1e-12);
        assert!((r.p_value - PI_100_MONOBIT_P).abs() < 1e-9);
    }

    #[test]
    fn monobit_too_short() {
        let err = monobit_test(&BitPool::from_bytes(vec![0xaa; 12])).unwrap_err();
        assert!(matches!(err, RandomnessError::PoolTooShort { needed: 100, got: 96 }));
    }

    #[test]
    fn block_frequency_half_ones() {
        let pool = alternating(1024);
        let r = block_frequency_test(&pool, 32).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn block_frequency_all_ones() {
        let pool = BitPool::from_bytes(vec![0xff; 128]);
        let r = block_frequency_test(&pool, 64).unwrap();
        assert_eq!(r.statistic, 4.0 * 64.0 * 16.0 * 0.25);
        assert!(r.p_value < 1e-100);
        assert!(!r.passed);
    }

    #[test]
    fn block_frequency_guards() {
        let pool = alternating(1024);
        assert!(matches!(
            block_frequency_test(&pool, 19),
            Err(RandomnessError::BlockLenInvalid(19))
        ));
        assert!(matches!(
            block_frequency_test(&alternating(30), 32),
            Err(RandomnessError::PoolTooShort { .. })
        ));
    }

    #[test]
    fn hashed_pool_matches_reference() {
        let pool = hash_pool();
        let m = monobit_test(&pool).unwrap();
        assert!((m.statistic - HASH_POOL_MONOBIT.0).abs() < 1e-9);
        assert!((m.p_value - HASH_POOL_MONOBIT.1).abs() < 1e-9);
        let b = block_frequency_test(&pool, 128).unwrap();
        assert!((b.statistic - HASH_POOL_BLOCK128.0).abs() < 1e-6);
        assert!((b.p_value - HASH_POOL_BLOCK128.1).abs() < 1e-9);
        let r = runs_test(&pool).unwrap();
        assert_eq!(r.statistic, HASH_POOL_RUNS.0);
        assert!((r.p_value - HASH_POOL_RUNS.1).abs() < 1e-9);
    }

    #[test]
    fn runs_worked_example() {
        let r = runs_unchecked(&BitPool::from_bit_str("1001101011"));
        assert_eq!(r.statistic, 7.0);
        assert!((r.p_value - RUNS_WORKED_EXAMPLE_P).abs() < 1e-4);
        assert!((r.p_value - RUNS_WORKED_EXAMPLE_P).abs() < 1e-9);
    }

    #[test]
    fn runs_all_ones_fails_prerequisite() {
        let r = runs_test(&BitPool::from_bytes(vec![0xff; 16])).unwrap();
        assert_eq!(r.p_value, 0.0);
        assert!(!r.passed);
    }

    #[test]
    fn runs_alternating_too_many_runs() {
        let r = runs_test(&alternating(128)).unwrap();
        assert_eq!(r.statistic, 128.0);
        // |128 - 64| / (2 * 16 * 0.25) = 8
        assert!(rel_close(r.p_value, ERFC_8, 1e-6));
        assert!(!r.passed);
    }

    #[test]
    fn suite_structure_and_degenerate() {
        let pool = fill_pool(&mut EntropySource::seeded(3), 1 << 14).unwrap();
        let report = run_suite(&pool, &SuiteConfig::default()).unwrap();
        assert_eq!(report.results.len(), 3);
        let mut names: Vec<_> = report.results.iter().map(|r| r.test_name.clone()).collect();
        names.dedup();
        assert_eq!(names.len(), 3);
        assert_eq!(report.pool_length_bits, 1 << 14);

        let zeros = BitPool::from_bytes(vec![0; 1 << 11]);
        let report = run_suite(&zeros, &SuiteConfig::default()).unwrap();
        assert!(!report.all_passed);
    }

    #[test]
    fn suite_seeded_megabit_passes() {
        let pool = fill_pool(&mut EntropySource::seeded(1), 1_000_000).unwrap();
        let report = run_suite(&pool, &SuiteConfig::default()).unwrap();
        assert!(report.all_passed, "{report:?}");
    }

    #[test]
    fn suite_is_reproducible() {
        let cfg = SuiteConfig::default();
        let a = run_suite(&fill_pool(&mut EntropySource::seeded(11), 4096).unwrap(), &cfg).unwrap();
        let b = run_suite(&fill_pool(&mut EntropySource::seeded(11), 4096).unwrap(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_serializes_to_json() {
        let pool = fill_pool(&mut EntropySource::seeded(3), 4096).unwrap();
        let report = run_suite(&pool, &SuiteConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&report).unwrap();
        assert_eq!(v["results"][0]["test_name"], "monobit");
        assert!(v["results"][2]["p_value"].is_number());
    }

    proptest! {
        #[test]
        fn monobit_complement_symmetry(bytes in proptest::collection::vec(any::<u8>(), 13..200)) {
            let flipped: Vec<u8> = bytes.iter().map(|b| !b).collect();
            let a = monobit_test(&BitPool::from_bytes(bytes)).unwrap();
            let b = monobit_test(&BitPool::from_bytes(flipped)).unwrap();
            prop_assert_eq!(a.p_value, b.p_value);
        }

        #[test]
        fn p_values_in_unit_interval(bytes in proptest::collection::vec(any::<u8>(), 16..256)) {
            let pool = BitPool::from_bytes(bytes);
            let report = run_suite(&pool, &SuiteConfig::default()).unwrap();
            for r in report.results {
                prop_assert!((0.0..=1.0).contains(&r.p_value));
                prop_assert_eq!(r.passed, r.p_value >= DEFAULT_ALPHA);
            }
        }
    }
}
