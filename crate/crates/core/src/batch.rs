//! Batch experiment harness: seeded instance generation, parallel solves,
//! iteration histograms, timing summaries and persistence.
//!
//! Timings cover the solver loop only; instance generation and model
//! construction are excluded. Results are deterministic in the base seed
//! regardless of the worker count: instance `i` of a pair always uses seed
//! `base_seed + i`, and rows come back in generation order.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::mpsc;

use serde::Serialize;
use thiserror::Error;

use crate::cutting_plane::{initialize_cuts_joint, solve_mnd, SolverConfig};
use crate::knapsack::{
    generate_instance, GeneratorConfig, InstanceParseError, KnapsackGame, KnapsackGameInstance,
    DEFAULT_GAMMA,
};

/// Exact header of the per-instance CSV table.
pub const CSV_HEADER: &str =
    "pair,players,markets,seed,iterations,status,delta_u,max_iter_time_s,mean_iter_time_s";

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("invalid batch config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Instance(#[from] InstanceParseError),
}

#[derive(Debug, Clone)]
pub struct BatchConfig {
    /// (players, markets) pairs to sweep.
    pub pairs: Vec<(usize, usize)>,
    pub instances_per_pair: usize,
    pub base_seed: u64,
    pub epsilon: f64,
    pub gamma: i64,
    pub max_iterations: usize,
    pub node_limit: u64,
    pub workers: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            pairs: vec![(3, 4), (5, 6), (5, 10)],
            instances_per_pair: 100,
            base_seed: 0,
            epsilon: 0.01,
            gamma: DEFAULT_GAMMA,
            max_iterations: 100,
            node_limit: 10_000_000,
            workers: 1,
        }
    }
}

impl BatchConfig {
    pub fn validate(&self) -> Result<(), BatchError> {
        if self.pairs.is_empty() {
            return Err(BatchError::InvalidConfig(
                "at least one (players, markets) pair".into(),
            ));
        }
        if self.pairs.iter().any(|&(j, l)| j == 0 || l == 0) {
            return Err(BatchError::InvalidConfig(
                "pair sizes must be positive".into(),
            ));
        }
        if self.instances_per_pair == 0 {
            return Err(BatchError::InvalidConfig(
                "instances_per_pair must be positive".into(),
            ));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(BatchError::InvalidConfig("epsilon must be positive".into()));
        }
        if self.workers == 0 {
            return Err(BatchError::InvalidConfig(
                "workers must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            node_limit: self.node_limit,
        }
    }
}

pub fn pair_id(players: usize, markets: usize) -> String {
    format!("{players}x{markets}")
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchRow {
    pub pair: String,
    pub players: usize,
    pub markets: usize,
    pub seed: u64,
    pub iterations: usize,
    /// `equilibrium_found`, `tolerance_reached`, `iteration_limit` or `error`.
    pub status: String,
    pub delta_upper: f64,
    pub max_iter_time_s: f64,
    pub mean_iter_time_s: f64,
    /// Branch-and-bound nodes of each lower-bounding solve, per iteration.
    pub lbp_nodes: Vec<u64>,
    /// Branch-and-bound nodes of each lower-level solve, per iteration.
    pub llp_nodes: Vec<u64>,
    /// Final joint decision, for re-verification.
    pub point: Vec<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

impl BatchRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.pair,
            self.players,
            self.markets,
            self.seed,
            self.iterations,
            self.status,
            self.delta_upper,
            self.max_iter_time_s,
            self.mean_iter_time_s
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    pub pair: String,
    pub players: usize,
    pub markets: usize,
    pub instances: usize,
    pub converged: usize,
    /// Iteration count -> frequency.
    pub iteration_histogram: BTreeMap<usize, usize>,
    pub max_iter_time_s: f64,
    pub mean_iter_time_s: f64,
    pub total_lbp_nodes: u64,
    pub total_llp_nodes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub epsilon: f64,
    pub base_seed: u64,
    pub instances_total: usize,
    pub converged_total: usize,
    pub pairs: Vec<PairSummary>,
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub rows: Vec<BatchRow>,
    pub summary: BatchSummary,
}

fn solve_one(cfg: &BatchConfig, players: usize, markets: usize, seed: u64) -> BatchRow {
    let mut row = BatchRow {
        pair: pair_id(players, markets),
        players,
        markets,
        seed,
        iterations: 0,
        status: "error".into(),
        delta_upper: f64::NAN,
        max_iter_time_s: 0.0,
        mean_iter_time_s: 0.0,
        lbp_nodes: Vec::new(),
        llp_nodes: Vec::new(),
        point: Vec::new(),
        converged: false,
        error: None,
    };
    let attempt = (|| -> Result<(), String> {
        let gen = GeneratorConfig {
            seed,
            players,
            markets,
            gamma: cfg.gamma,
        };
        let instance = generate_instance(&gen).map_err(|e| e.to_string())?;
        let game = KnapsackGame::new(instance).map_err(|e| e.to_string())?;
        let cuts = initialize_cuts_joint(&game, cfg.node_limit).map_err(|e| e.to_string())?;
        let report = solve_mnd(&game, cuts, &cfg.solver_config()).map_err(|e| e.to_string())?;
        row.iterations = report.num_iterations();
        row.status = report.status.as_str().into();
        row.delta_upper = report.delta_upper;
        let times: Vec<f64> = report.iterations.iter().map(|r| r.wall_time_s).collect();
        row.max_iter_time_s = times.iter().copied().fold(0.0, f64::max);
        row.mean_iter_time_s = if times.is_empty() {
            0.0
        } else {
            times.iter().sum::<f64>() / times.len() as f64
        };
        row.lbp_nodes = report.iterations.iter().map(|r| r.lbp_nodes).collect();
        row.llp_nodes = report.iterations.iter().map(|r| r.llp_nodes).collect();
        row.point = report.point.clone();
        row.converged = report.status.converged() && report.delta_upper <= cfg.epsilon;
        Ok(())
    })();
    if let Err(message) = attempt {
        row.error = Some(message);
    }
    row
}

/// Runs every instance of every pair. Per-instance failures are recorded in
/// their row and the batch continues.
pub fn run_batch(cfg: &BatchConfig) -> Result<BatchOutput, BatchError> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize, u64)> = cfg
        .pairs
        .iter()
        .flat_map(|&(j, l)| {
            (0..cfg.instances_per_pair).map(move |i| (j, l, cfg.base_seed + i as u64))
        })
        .collect();

    let mut slots: Vec<Option<BatchRow>> = vec![None; tasks.len()];
    if cfg.workers == 1 {
        for (idx, &(j, l, seed)) in tasks.iter().enumerate() {
            slots[idx] = Some(solve_one(cfg, j, l, seed));
        }
    } else {
        let (tx, rx) = mpsc::channel::<(usize, BatchRow)>();
        std::thread::scope(|scope| {
            for w in 0..cfg.workers {
                let tx = tx.clone();
                let tasks = &tasks;
                scope.spawn(move || {
                    for (idx, &(j, l, seed)) in tasks.iter().enumerate() {
                        if idx % cfg.workers == w {
                            let row = solve_one(cfg, j, l, seed);
                            if tx.send((idx, row)).is_err() {
                                return;
                            }
                        }
                    }
                });
            }
            drop(tx);
            for (idx, row) in rx {
                slots[idx] = Some(row);
            }
        });
    }
    let rows: Vec<BatchRow> = slots
        .into_iter()
        .map(|r| r.expect("every task produced a row"))
        .collect();
    let summary = summarize(cfg, &rows);
    Ok(BatchOutput { rows, summary })
}

fn summarize(cfg: &BatchConfig, rows: &[BatchRow]) -> BatchSummary {
    let mut pairs = Vec::new();
    for &(j, l) in &cfg.pairs {
        let id = pair_id(j, l);
        let pair_rows: Vec<&BatchRow> = rows.iter().filter(|r| r.pair == id).collect();
        let mut histogram = BTreeMap::new();
        for r in &pair_rows {
            *histogram.entry(r.iterations).or_insert(0usize) += 1;
        }
        let mean = if pair_rows.is_empty() {
            0.0
        } else {
            pair_rows.iter().map(|r| r.mean_iter_time_s).sum::<f64>() / pair_rows.len() as f64
        };
        pairs.push(PairSummary {
            pair: id,
            players: j,
            markets: l,
            instances: pair_rows.len(),
            converged: pair_rows.iter().filter(|r| r.converged).count(),
            iteration_histogram: histogram,
            max_iter_time_s: pair_rows
                .iter()
                .map(|r| r.max_iter_time_s)
                .fold(0.0, f64::max),
            mean_iter_time_s: mean,
            total_lbp_nodes: pair_rows.iter().flat_map(|r| &r.lbp_nodes).sum(),
            total_llp_nodes: pair_rows.iter().flat_map(|r| &r.llp_nodes).sum(),
        });
    }
    BatchSummary {
        epsilon: cfg.epsilon,
        base_seed: cfg.base_seed,
        instances_total: rows.len(),
        converged_total: rows.iter().filter(|r| r.converged).count(),
        pairs,
    }
}

pub fn rows_to_csv(rows: &[BatchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// Two-column `iteration count` histogram text, one bin per line.
pub fn histogram_text(summary: &PairSummary) -> String {
    let mut out = String::new();
    for (bin, count) in &summary.iteration_histogram {
        out.push_str(&format!("{bin} {count}\n"));
    }
    out
}

/// Writes `rows.csv`, `summary.json` and one `hist_<pair>.txt` per pair.
pub fn write_outputs(dir: &Path, output: &BatchOutput) -> Result<(), BatchError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("rows.csv"), rows_to_csv(&output.rows))?;
    let mut summary_file = std::fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut summary_file, &output.summary)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    summary_file.write_all(b"\n")?;
    for pair in &output.summary.pairs {
        std::fs::write(
            dir.join(format!("hist_{}.txt", pair.pair)),
            histogram_text(pair),
        )?;
    }
    Ok(())
}

/// Reads and validates an instance from its JSON file.
pub fn read_instance(path: &Path) -> Result<KnapsackGameInstance, BatchError> {
    let text = std::fs::read_to_string(path)?;
    Ok(KnapsackGameInstance::from_json_str(&text)?)
}

pub fn write_instance(path: &Path, inst: &KnapsackGameInstance) -> Result<(), BatchError> {
    Ok(std::fs::write(path, inst.to_json_string())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knapsack::verify_gne;

    fn small_config() -> BatchConfig {
        BatchConfig {
            pairs: vec![(2, 2)],
            instances_per_pair: 10,
            base_seed: 0,
            workers: 1,
            ..BatchConfig::default()
        }
    }

    /// CSV with the wall-clock columns blanked, for determinism checks.
    fn mask_timing(csv: &str) -> String {
        csv.lines()
            .map(|line| {
                let mut cols: Vec<&str> = line.split(',').collect();
                if cols.len() >= 9 && cols[0] != "pair" {
                    cols[7] = "-";
                    cols[8] = "-";
                }
                cols.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn small_batch_converges() {
        let output = run_batch(&small_config()).unwrap();
        assert_eq!(output.rows.len(), 10);
        for row in &output.rows {
            assert!(row.converged, "seed {} did not converge", row.seed);
            assert!(row.delta_upper <= 0.01);
            assert!(row.iterations >= 1);
            assert!(row.error.is_none());
        }
        assert_eq!(output.summary.converged_total, 10);
    }

    #[test]
    fn converged_rows_pass_equilibrium_verification() {
        let cfg = small_config();
        let output = run_batch(&cfg).unwrap();
        for row in &output.rows {
            let gen = crate::knapsack::GeneratorConfig {
                seed: row.seed,
                players: row.players,
                markets: row.markets,
                gamma: cfg.gamma,
            };
            let inst = crate::knapsack::generate_instance(&gen).unwrap();
            assert!(verify_gne(&inst, &row.point, cfg.epsilon, cfg.node_limit).unwrap());
        }
    }

    #[test]
    fn huge_epsilon_terminates_after_one_iteration() {
        let cfg = BatchConfig {
            pairs: vec![(2, 3)],
            instances_per_pair: 1,
            epsilon: 1e9,
            ..small_config()
        };
        let output = run_batch(&cfg).unwrap();
        assert_eq!(output.rows[0].iterations, 1);
        assert!(output.rows[0].status != "error");
    }

    #[test]
    fn csv_is_deterministic_up_to_timing() {
        let cfg = small_config();
        let a = mask_timing(&rows_to_csv(&run_batch(&cfg).unwrap().rows));
        let b = mask_timing(&rows_to_csv(&run_batch(&cfg).unwrap().rows));
        assert_eq!(a, b);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let single = run_batch(&small_config()).unwrap();
        let multi = run_batch(&BatchConfig {
            workers: 3,
            ..small_config()
        })
        .unwrap();
        assert_eq!(
            mask_timing(&rows_to_csv(&single.rows)),
            mask_timing(&rows_to_csv(&multi.rows))
        );
    }

    #[test]
    fn csv_header_is_exact() {
        assert_eq!(
            CSV_HEADER,
            "pair,players,markets,seed,iterations,status,delta_u,max_iter_time_s,mean_iter_time_s"
        );
        let output = run_batch(&BatchConfig {
            instances_per_pair: 1,
            ..small_config()
        })
        .unwrap();
        let csv = rows_to_csv(&output.rows);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 9);
    }

    #[test]
    fn histogram_frequencies_sum_to_instance_count() {
        let output = run_batch(&small_config()).unwrap();
        let pair = &output.summary.pairs[0];
        let total: usize = pair.iteration_histogram.values().sum();
        assert_eq!(total, pair.instances);
        assert_eq!(pair.instances, 10);
        let text = histogram_text(pair);
        for line in text.lines() {
            assert_eq!(line.split(' ').count(), 2);
        }
    }

    #[test]
    fn outputs_written_to_directory() {
        let dir = tempfile::tempdir().unwrap();
        let output = run_batch(&BatchConfig {
            instances_per_pair: 2,
            ..small_config()
        })
        .unwrap();
        write_outputs(dir.path(), &output).unwrap();
        assert!(dir.path().join("rows.csv").is_file());
        assert!(dir.path().join("summary.json").is_file());
        assert!(dir.path().join("hist_2x2.txt").is_file());
        let summary: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("summary.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(summary["instances_total"], 2);
    }

    #[test]
    fn instance_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let inst =
            crate::knapsack::generate_instance(&crate::knapsack::GeneratorConfig::new(1, 2, 2))
                .unwrap();
        let path = dir.path().join("inst.json");
        write_instance(&path, &inst).unwrap();
        assert_eq!(read_instance(&path).unwrap(), inst);

        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(read_instance(&path), Err(BatchError::Instance(_))));
    }

    #[test]
    fn invalid_config_is_rejected() {
        for cfg in [
            BatchConfig {
                pairs: vec![],
                ..small_config()
            },
            BatchConfig {
                instances_per_pair: 0,
                ..small_config()
            },
            BatchConfig {
                epsilon: 0.0,
                ..small_config()
            },
            BatchConfig {
                workers: 0,
                ..small_config()
            },
        ] {
            assert!(run_batch(&cfg).is_err());
        }
    }
}
