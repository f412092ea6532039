use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use super::{SimConfig, SimError};
use crate::consensus::{NodeId, Rejection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_nodes: usize,
    pub rounds_requested: u64,
    pub rounds_completed: u64,
    pub rounds_skipped: u64,
    /// Indexed by node id.
    pub win_counts: Vec<u64>,
    pub adversary_wins: BTreeMap<u64, u64>,
    pub adversary_win_rate: BTreeMap<u64, f64>,
    /// `None` with fewer than two nodes or no completed round.
    pub chi_square: Option<f64>,
    pub chi_square_p: Option<f64>,
    pub rejected_contributions: BTreeMap<String, u64>,
    pub gate_failures: u64,
}

impl Metrics {
    pub fn empty(cfg: &SimConfig) -> Self {
        Metrics {
            n_nodes: cfg.n_nodes,
            rounds_requested: cfg.rounds,
            rounds_completed: 0,
            rounds_skipped: 0,
            win_counts: vec![0; cfg.n_nodes],
            adversary_wins: cfg.adversaries.iter().map(|a| (a.node, 0)).collect(),
            adversary_win_rate: BTreeMap::new(),
            chi_square: None,
            chi_square_p: None,
            rejected_contributions: Rejection::ALL.iter().map(|r| (r.as_str().to_string(), 0)).collect(),
            gate_failures: 0,
        }
    }

    pub(super) fn record_win(&mut self, w: NodeId) {
        self.win_counts[w.0 as usize] += 1;
        self.rounds_completed += 1;
        if let Some(n) = self.adversary_wins.get_mut(&w.0) {
            *n += 1;
        }
    }

    /// Recomputes the derived fields from the counters.
    pub fn finalize(&mut self) {
        let rounds = self.rounds_completed;
        self.adversary_win_rate = self
            .adversary_wins
            .iter()
            .map(|(&n, &w)| (n, if rounds == 0 { 0.0 } else { w as f64 / rounds as f64 }))
            .collect();
        match chi_square_uniformity(&self.win_counts) {
            Ok((x, p)) => {
                self.chi_square = Some(x);
                self.chi_square_p = Some(p);
            }
            Err(_) => {
                self.chi_square = None;
                self.chi_square_p = None;
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// One row per node plus a summary row, all with the same columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,node,wins,win_rate,chi_square,chi_square_p\n");
        let rounds = self.rounds_completed.max(1) as f64;
        for (i, w) in self.win_counts.iter().enumerate() {
            writeln!(out, "node,{i},{w},{},,", *w as f64 / rounds).expect("write to string");
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "summary,,{},,{},{}",
            self.rounds_completed,
            opt(self.chi_square),
            opt(self.chi_square_p)
        )
        .expect("write to string");
        out
    }
}

/// Sums counters across runs of the same network size. Associative and
/// commutative, so any grouping of seeds gives the same result.
pub fn merge_metrics(runs: &[Metrics]) -> Result<Metrics, SimError> {
    let first = runs
        .first()
        .ok_or_else(|| SimError::DegenerateInput("no runs to merge".into()))?;
    let mut total = Metrics {
        n_nodes: first.n_nodes,
        rounds_requested: 0,
        rounds_completed: 0,
        rounds_skipped: 0,
        win_counts: vec![0; first.n_nodes],
        adversary_wins: BTreeMap::new(),
        adversary_win_rate: BTreeMap::new(),
        chi_square: None,
        chi_square_p: None,
        rejected_contributions: BTreeMap::new(),
        gate_failures: 0,
    };
    for m in runs {
        if m.n_nodes != total.n_nodes {
            return Err(SimError::DegenerateInput(format!(
                "cannot merge runs with {} and {} nodes",
                total.n_nodes, m.n_nodes
            )));
        }
        total.rounds_requested += m.rounds_requested;
        total.rounds_completed += m.rounds_completed;
        total.rounds_skipped += m.rounds_skipped;
        total.gate_failures += m.gate_failures;
        for (t, w) in total.win_counts.iter_mut().zip(&m.win_counts) {
            *t += w;
        }
        for (n, w) in &m.adversary_wins {
            *total.adversary_wins.entry(*n).or_default() += w;
        }
        for (r, c) in &m.rejected_contributions {
            *total.rejected_contributions.entry(r.clone()).or_default() += c;
        }
    }
    total.finalize();
    Ok(total)
}

/// Pearson statistic against equal expected counts, with its upper-tail
/// p-value under N - 1 degrees of freedom.
pub fn chi_square_uniformity(win_counts: &[u64]) -> Result<(f64, f64), SimError> {
    let n = win_counts.len();
    let total: u64 = win_counts.iter().sum();
    if n < 2 || total == 0 {
        return Err(SimError::DegenerateInput(format!(
            "need at least 2 nodes and 1 round, got {n} nodes and {total} rounds"
        )));
    }
    let expected = total as f64 / n as f64;
    let stat: f64 = win_counts
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let df = (n - 1) as f64;
    let p = if stat <= 0.0 {
        1.0
    } else {
        gamma_ur(df / 2.0, stat / 2.0)
    };
    Ok((stat, p.clamp(0.0, 1.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Advantage {
    pub node: u64,
    pub samples_k: u64,
    pub win_rate: f64,
    pub fair_share: f64,
    /// win_rate / fair_share
    pub ratio: f64,
}

pub fn advantage_report(metrics: &Metrics, cfg: &SimConfig) -> Vec<Advantage> {
    let fair_share = 1.0 / cfg.n_nodes as f64;
    cfg.adversaries
        .iter()
        .map(|a| {
            let win_rate = metrics.adversary_win_rate.get(&a.node).copied().unwrap_or(0.0);
            Advantage {
                node: a.node,
                samples_k: a.samples_k,
                win_rate,
                fair_share,
                ratio: win_rate / fair_share,
            }
        })
        .collect()
}
