//! Command-line harness: instance generation, single solves, experiment
//! batches, the continuous-game walkthrough and the KKT demonstrator.
//!
//! Exit codes: 0 when everything asked for converged, 2 when some solve did
//! not converge, 1 on usage or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use equicut::batch::{self, BatchConfig};
use equicut::cutting_plane::{initialize_cuts_joint, solve_mnd_with_observer, SolverConfig};
use equicut::knapsack::{self, generate_instance, GeneratorConfig, KnapsackGame, DEFAULT_GAMMA};
use equicut::{continuous, kkt};

#[derive(Parser)]
#[command(
    name = "equicut",
    version,
    about = "Normalized Nash equilibrium solver for nonconvex generalized games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolveOpts {
    /// Termination tolerance on delta_U - max(delta_L, 0).
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Cap on major iterations.
    #[arg(long = "max-iters", default_value_t = 100)]
    max_iters: usize,
    /// Branch-and-bound node budget per subproblem solve.
    #[arg(long = "node-limit", default_value_t = 10_000_000)]
    node_limit: u64,
}

impl SolveOpts {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iters,
            node_limit: self.node_limit,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random knapsack game instance as JSON.
    Generate {
        #[arg(long, default_value_t = 2)]
        players: usize,
        #[arg(long, default_value_t = 2)]
        markets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: i64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one instance file, streaming the iteration trace as JSON lines.
    Solve {
        /// Instance JSON file.
        instance: PathBuf,
        #[command(flatten)]
        solver: SolveOpts,
        /// Re-verify the returned point with per-player best responses.
        #[arg(long)]
        verify: bool,
    },
    /// Generate and solve a batch of random instances, writing CSV/JSON outputs.
    Batch {
        /// Comma-separated players-x-markets pairs, e.g. "3x4,5x6,5x10".
        #[arg(long, default_value = "3x4,5x6,5x10")]
        pairs: String,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: i64,
        #[arg(long, default_value = "batch-out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[command(flatten)]
        solver: SolveOpts,
    },
    /// Walk through the two-player continuous game step by step.
    TraceExample {
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Grid resolution per axis.
        #[arg(long, default_value_t = continuous::DEFAULT_RESOLUTION)]
        resolution: usize,
    },
    /// Show that KKT feasibility does not certify equilibrium on a small instance.
    KktDemo {
        #[arg(long, default_value_t = 2)]
        players: usize,
        #[arg(long, default_value_t = 2)]
        markets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: i64,
    },
}

fn main() -> ExitCode {
    // Die quietly instead of panicking when stdout's consumer goes away
    // (e.g. piping the trace into `head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate {
            players,
            markets,
            seed,
            gamma,
            out,
        } => {
            let cfg = GeneratorConfig {
                seed,
                players,
                markets,
                gamma,
            };
            let inst = generate_instance(&cfg)?;
            let text = inst.to_json_string();
            match out {
                Some(path) => std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve {
            instance,
            solver,
            verify,
        } => {
            let inst = batch::read_instance(&instance)
                .with_context(|| format!("reading {}", instance.display()))?;
            let game = KnapsackGame::new(inst)?;
            let cuts = initialize_cuts_joint(&game, solver.node_limit)?;
            let report = solve_mnd_with_observer(&game, cuts, &solver.config(), |rec| {
                println!("{}", serde_json::to_string(rec).expect("record serializes"));
            })?;
            println!(
                "status={} iterations={} delta_l={} delta_u={} point={:?}",
                report.status,
                report.num_iterations(),
                report.delta_lower,
                report.delta_upper,
                report.point
            );
            if verify {
                let ok = knapsack::verify_gne(
                    game.instance(),
                    &report.point,
                    solver.epsilon,
                    solver.node_limit,
                )?;
                println!("verify_gne={ok}");
                if !ok {
                    return Ok(ExitCode::from(2));
                }
            }
            let converged = report.status.converged() && report.delta_upper <= solver.epsilon;
            Ok(if converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Batch {
            pairs,
            instances,
            seed,
            gamma,
            out,
            workers,
            solver,
        } => {
            let cfg = BatchConfig {
                pairs: parse_pairs(&pairs)?,
                instances_per_pair: instances,
                base_seed: seed,
                epsilon: solver.epsilon,
                gamma,
                max_iterations: solver.max_iters,
                node_limit: solver.node_limit,
                workers,
            };
            let output = batch::run_batch(&cfg)?;
            batch::write_outputs(&out, &output)?;
            let s = &output.summary;
            for pair in &s.pairs {
                println!(
                    "pair {}: {}/{} converged, max iter time {:.3}s, mean {:.3}s",
                    pair.pair,
                    pair.converged,
                    pair.instances,
                    pair.max_iter_time_s,
                    pair.mean_iter_time_s
                );
            }
            println!(
                "total: {}/{} converged; outputs in {}",
                s.converged_total,
                s.instances_total,
                out.display()
            );
            Ok(if s.converged_total == s.instances_total {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::TraceExample {
            epsilon,
            resolution,
        } => {
            let config = SolverConfig {
                epsilon,
                ..SolverConfig::default()
            };
            let report = continuous::run_example_trace_with(&config, resolution)?;
            print_example_transcript(&report, epsilon);
            Ok(ExitCode::SUCCESS)
        }
        Command::KktDemo {
            players,
            markets,
            seed,
            gamma,
        } => {
            let cfg = GeneratorConfig {
                seed,
                players,
                markets,
                gamma,
            };
            let inst = generate_instance(&cfg)?;
            println!("instance: {players} players, {markets} markets, seed {seed}");
            match kkt::demonstrate_failure(&inst) {
                Ok(witness) => {
                    println!(
                        "KKT-feasible point with max residual {:.2e} but unilateral improvement {}:",
                        witness.residuals.max(),
                        witness.disequilibrium
                    );
                    println!("point: {:?}", witness.point);
                    println!(
                        "{}",
                        kkt::certificate_json(&witness.certificate, &witness.residuals)
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(kkt::KktError::NoCounterexample) => {
                    println!(
                        "no counterexample: every feasible point of this instance is an equilibrium"
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let Some((j, l)) = part.split_once('x') else {
            bail!("pair '{part}' is not of the form <players>x<markets>");
        };
        pairs.push((
            j.trim()
                .parse()
                .with_context(|| format!("players in '{part}'"))?,
            l.trim()
                .parse()
                .with_context(|| format!("markets in '{part}'"))?,
        ));
    }
    Ok(pairs)
}

/// Tutorial transcript of the one-iteration run, labeled by solver step.
fn print_example_transcript(report: &equicut::SolveReport, epsilon: f64) {
    println!("two-player game, shared constraint y1^(1/2) + y2^(1/2) <= 1 on [0,1]^2");
    println!("cut set seeded with the joint-problem optimizer");
    println!("step 1: delta_U <- +inf");
    for rec in &report.iterations {
        println!("iteration {}", rec.iteration);
        println!(
            "  step 3 (lower bound): point = ({:.6}, {:.6}), w = {:.6}, delta_L = {:.6}",
            rec.point[0], rec.point[1], rec.w, rec.delta_lower
        );
        println!("  step 4 (lower level): g_N = {:.6}", rec.g_lower_level);
        let passed = rec.w <= rec.g_lower_level + equicut::cutting_plane::EQUILIBRIUM_TEST_TOL;
        if passed {
            println!(
                "  step 5: w <= g_N -> exact equilibrium, return ({:.6}, {:.6})",
                rec.point[0], rec.point[1]
            );
        } else {
            println!(
                "  step 5: w = {:.6} > g_N = {:.6} -> step 9: append lower-level point to cuts ({} total)",
                rec.w, rec.g_lower_level, rec.cut_count
            );
            println!("  step 11: delta_U <- {:.6}", rec.delta_upper);
            let gap = rec.delta_upper - rec.delta_lower.max(0.0);
            if gap < epsilon {
                println!("  step 13: gap {gap:.6} < epsilon {epsilon} -> terminate");
            } else {
                println!("  step 13: gap {gap:.6} >= epsilon {epsilon} -> continue");
            }
        }
    }
    println!(
        "status: {} after {} iteration(s); y* = ({:.6}, {:.6}), delta_U = {:.6}",
        report.status,
        report.num_iterations(),
        report.point[0],
        report.point[1],
        report.delta_upper
    );
}
