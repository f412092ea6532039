use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use por_core::ledger::save_chain;
use por_core::netsim::{advantage_report, build_sim, merge_metrics, run, run_seeds, run_seeds_metrics, Advantage};
use por_core::{Metrics, Mode, SimConfig};
use serde::Serialize;

use crate::config::{sim_error, CliConfig, Format, SimArgs};
use crate::error::{write, CliError, CliResult};

/// `chain.jsonl` becomes `chain.seed3.jsonl` when several seeds run.
fn per_seed(path: &Path, seed: u64, multi: bool) -> PathBuf {
    if !multi {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.seed{seed}"),
    };
    path.with_file_name(name)
}

fn metrics_text(m: &Metrics, seeds: &[u64]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "seeds {:?}: {} rounds completed, {} skipped",
        seeds, m.rounds_completed, m.rounds_skipped
    );
    for (i, w) in m.win_counts.iter().enumerate() {
        let _ = writeln!(out, "node {i:>3}  wins {w}");
    }
    if let (Some(x), Some(p)) = (m.chi_square, m.chi_square_p) {
        let _ = writeln!(out, "chi-square {x:.3}  p {p:.4}");
    }
    for (node, rate) in &m.adversary_win_rate {
        let _ = writeln!(out, "adversary {node}  win rate {rate:.4}");
    }
    let rejected: u64 = m.rejected_contributions.values().sum();
    if rejected > 0 || m.gate_failures > 0 {
        let _ = writeln!(
            out,
            "rejected contributions {rejected}, gate failures {}",
            m.gate_failures
        );
    }
    out
}

pub fn cmd_simulate(args: &SimArgs) -> CliResult<String> {
    let cfg = args.resolve()?;
    let seeds = args.seeds(&cfg);
    let multi = seeds.len() > 1;

    let runs = if multi {
        run_seeds(&cfg.sim, &seeds).map_err(sim_error)?
    } else {
        vec![run(build_sim(&cfg.sim).map_err(sim_error)?).map_err(sim_error)?]
    };
    for (seed, (chain, _)) in seeds.iter().zip(&runs) {
        if let Some(p) = &cfg.output.chain {
            save_chain(chain, &per_seed(p, *seed, multi)).map_err(CliError::runtime)?;
        }
        if let Some(p) = &cfg.output.keys {
            let sim = build_sim(&SimConfig {
                seed: *seed,
                ..cfg.sim.clone()
            })
            .map_err(sim_error)?;
            write(&per_seed(p, *seed, multi), sim.keys().to_json() + "\n")?;
        }
    }
    let all: Vec<Metrics> = runs.into_iter().map(|(_, m)| m).collect();
    let merged = merge_metrics(&all).map_err(sim_error)?;
    let format = cfg.output.format;
    if let Some(p) = &cfg.output.metrics {
        let body = match format {
            Format::Csv => merged.to_csv(),
            _ => merged.to_json() + "\n",
        };
        write(p, body)?;
    }
    Ok(match format {
        Format::Text => metrics_text(&merged, &seeds),
        Format::Json => merged.to_json() + "\n",
        Format::Csv => merged.to_csv(),
    })
}

#[derive(Serialize)]
struct ModeSide {
    win_rate: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct AttackRow {
    node: u64,
    samples_k: u64,
    fair_share: f64,
    unweighted: ModeSide,
    weighted: ModeSide,
}

#[derive(Serialize)]
struct AttackReport {
    n_nodes: usize,
    rounds: u64,
    seeds: Vec<u64>,
    rows: Vec<AttackRow>,
}

fn ensemble(cfg: &CliConfig, mode: Mode, seeds: &[u64]) -> CliResult<Vec<Advantage>> {
    let sim = SimConfig {
        mode,
        ..cfg.sim.clone()
    };
    let runs = run_seeds_metrics(&sim, seeds).map_err(sim_error)?;
    let merged = merge_metrics(&runs).map_err(sim_error)?;
    Ok(advantage_report(&merged, &sim))
}

/// Same seeds, same adversaries, scored without and with the delay weight.
pub fn cmd_attack(args: &SimArgs) -> CliResult<String> {
    let cfg = args.resolve()?;
    if cfg.sim.adversaries.is_empty() {
        return Err(CliError::config(
            "attack needs at least one adversary (--adversary id:k)",
        ));
    }
    let seeds = args.seeds(&cfg);
    let unweighted = ensemble(&cfg, Mode::LargePrevhash, &seeds)?;
    let weighted = ensemble(&cfg, Mode::TimeWeighted, &seeds)?;
    let rows: Vec<AttackRow> = unweighted
        .iter()
        .zip(&weighted)
        .map(|(u, w)| AttackRow {
            node: u.node,
            samples_k: u.samples_k,
            fair_share: u.fair_share,
            unweighted: ModeSide {
                win_rate: u.win_rate,
                ratio: u.ratio,
            },
            weighted: ModeSide {
                win_rate: w.win_rate,
                ratio: w.ratio,
            },
        })
        .collect();
    let report = AttackReport {
        n_nodes: cfg.sim.n_nodes,
        rounds: cfg.sim.rounds,
        seeds,
        rows,
    };
    Ok(match cfg.output.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("plain data serializes") + "\n",
        Format::Csv => {
            let mut out = String::from(
                "node,samples_k,fair_share,unweighted_win_rate,unweighted_ratio,weighted_win_rate,weighted_ratio\n",
            );
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.node,
                    r.samples_k,
                    r.fair_share,
                    r.unweighted.win_rate,
                    r.unweighted.ratio,
                    r.weighted.win_rate,
                    r.weighted.ratio
                );
            }
            out
        }
        Format::Text => {
            let mut out = format!(
                "{} nodes, {} rounds, {} seeds, fair share {:.4}\n",
                report.n_nodes,
                report.rounds,
                report.seeds.len(),
                1.0 / report.n_nodes as f64
            );
            let _ = writeln!(out, "{:>5} {:>4} {:>18} {:>18}", "node", "k", "unweighted", "weighted");
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "{:>5} {:>4} {:>8.4} ({:>5.2}x) {:>8.4} ({:>5.2}x)",
                    r.node,
                    r.samples_k,
                    r.unweighted.win_rate,
                    r.unweighted.ratio,
                    r.weighted.win_rate,
                    r.weighted.ratio
                );
            }
            out
        }
    })
}
