//! JSON-in, JSON-out command-line front end.
//!
//! Exit codes: 0 = computed a result, 1 = input/validation error,
//! 2 = numerical failure inside a solver.

// `!(x > 0.0)` validation guards are deliberate: unlike `x <= 0.0` they also
// reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use walras::coalitions::{
    check_equal_treatment, default_eta, equal_treatment_block, find_blocking_coalition,
    theoretical_k,
};
use walras::economy::{Allocation, Economy, ReplicaAllocation};
use walras::equilibrium::{
    compute_params, convert_notion, test_walrasian_opts, verify_eps_walrasian, Mode, TestOptions,
};
use walras::error::Error;
use walras::oracle::{brute_force_block, grid_price_search, GridSpec};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "walras",
    about = "Tests allocations of exchange economies for approximate Walrasian equilibrium",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutputOpt {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether an allocation is an epsilon-Walrasian equilibrium.
    Test {
        economy: PathBuf,
        allocation: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value = "auto")]
        mode: String,
        /// Hull-membership tolerance (default scales with the query point).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 50_000)]
        max_iters: usize,
        /// Renormalize utilities so the total endowment sits at 1 - eta_bar.
        #[arg(long)]
        eta_bar: Option<f64>,
        #[command(flatten)]
        out: OutputOpt,
    },
    /// Search for a small blocking coalition.
    Block {
        economy: PathBuf,
        allocation: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Utility margin each member must gain; default min(0.01, eta_bar/2).
        #[arg(long)]
        eta: Option<f64>,
        /// Coalition size budget; default min(theoretical bound, 10000).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        eta_bar: Option<f64>,
        #[command(flatten)]
        out: OutputOpt,
    },
    /// Check the definition directly at a given price vector.
    Verify {
        economy: PathBuf,
        allocation: PathBuf,
        /// JSON file holding either [p1, ...] or {"price": [p1, ...]}.
        price: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        out: OutputOpt,
    },
    /// Print the derived test parameters (delta, gamma, kappa, ...).
    Params {
        economy: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value = "auto")]
        mode: String,
        #[arg(long)]
        eta_bar: Option<f64>,
        #[command(flatten)]
        out: OutputOpt,
    },
    /// Equal-treatment check (and block construction) on a replica allocation.
    Replica {
        economy: PathBuf,
        /// JSON {"n": int, "bundles": [[...]; n*h]} ordered copy-major.
        allocation: PathBuf,
        #[command(flatten)]
        out: OutputOpt,
    },
    /// Convert a verified certificate into the demand-side (C1)/(C2) report.
    Convert {
        economy: PathBuf,
        allocation: PathBuf,
        price: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        out: OutputOpt,
    },
    /// Brute-force reference computations (slow, small instances only).
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Scan the price simplex for any price satisfying the definition.
    Grid {
        economy: PathBuf,
        allocation: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-3)]
        oracle_grid_step: f64,
        #[command(flatten)]
        out: OutputOpt,
    },
    /// Enumerate small coalitions and ascend each blocking subproblem.
    Block {
        economy: PathBuf,
        allocation: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_k: usize,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputOpt,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::InvalidInput(format!(
            "{}: parse error at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn read_price(path: &Path) -> Result<Vec<f64>, Error> {
    let v: Value = read_json(path)?;
    let arr = match &v {
        Value::Array(_) => v.clone(),
        Value::Object(m) => m
            .get("price")
            .cloned()
            .ok_or_else(|| Error::InvalidInput("price file needs a \"price\" field".into()))?,
        _ => return Err(Error::InvalidInput("price file must hold an array".into())),
    };
    serde_json::from_value(arr).map_err(|e| Error::InvalidInput(format!("bad price vector: {e}")))
}

fn emit(mut report: Value, out: &OutputOpt) -> Result<(), Error> {
    if let Some(obj) = report.as_object_mut() {
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    let text = serde_json::to_string_pretty(&report).expect("report serialization");
    match &out.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_economy(path: &Path, eta_bar: Option<f64>) -> Result<Economy, Error> {
    let economy: Economy = read_json(path)?;
    economy.validate()?;
    match eta_bar {
        Some(e) => economy.normalize(e),
        None => Ok(economy),
    }
}

fn parse_mode(s: &str) -> Result<Mode, Error> {
    s.parse()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Test {
            economy,
            allocation,
            epsilon,
            mode,
            tol,
            max_iters,
            eta_bar,
            out,
        } => {
            if let Some(t) = tol {
                if !(t > 0.0) {
                    return Err(Error::invalid("--tol must be positive"));
                }
            }
            let economy = load_economy(&economy, eta_bar)?;
            let allocation: Allocation = read_json(&allocation)?;
            let opts = TestOptions {
                tol,
                max_iters,
                concavity_radius: None,
            };
            let verdict =
                test_walrasian_opts(&economy, &allocation, epsilon, parse_mode(&mode)?, &opts)?;
            emit(serde_json::to_value(&verdict).expect("verdict json"), &out)
        }
        Command::Block {
            economy,
            allocation,
            epsilon,
            eta,
            k,
            seed,
            eta_bar,
            out,
        } => {
            let economy = load_economy(&economy, eta_bar)?;
            let allocation: Allocation = read_json(&allocation)?;
            let eta = eta.unwrap_or_else(|| default_eta(0.2));
            let k = match k {
                Some(0) => return Err(Error::invalid("--k must be at least 1")),
                Some(k) => k,
                None => {
                    let params = compute_params(&economy, epsilon, Mode::Auto, None)?;
                    (theoretical_k(&params) as usize).clamp(1, 10_000)
                }
            };
            let search = find_blocking_coalition(&economy, &allocation, epsilon, eta, k, seed)?;
            emit(serde_json::to_value(&search).expect("search json"), &out)
        }
        Command::Verify {
            economy,
            allocation,
            price,
            epsilon,
            out,
        } => {
            let economy = load_economy(&economy, None)?;
            let allocation: Allocation = read_json(&allocation)?;
            allocation.validate(&economy)?;
            let p = read_price(&price)?;
            let report = verify_eps_walrasian(&economy, &allocation, &p, epsilon)?;
            emit(serde_json::to_value(&report).expect("report json"), &out)
        }
        Command::Params {
            economy,
            epsilon,
            mode,
            eta_bar,
            out,
        } => {
            let economy = load_economy(&economy, eta_bar)?;
            let params = compute_params(&economy, epsilon, parse_mode(&mode)?, None)?;
            let mut v = serde_json::to_value(&params).expect("params json");
            v.as_object_mut()
                .unwrap()
                .insert("theoretical_k".into(), json!(theoretical_k(&params)));
            emit(v, &out)
        }
        Command::Replica {
            economy,
            allocation,
            out,
        } => {
            let economy = load_economy(&economy, None)?;
            let allocation: ReplicaAllocation = read_json(&allocation)?;
            let violation = check_equal_treatment(&economy, &allocation)?;
            let coalition = match violation {
                Some(_) => Some(equal_treatment_block(&economy, &allocation)?),
                None => None,
            };
            emit(
                json!({
                    "equal_treatment": violation.is_none(),
                    "violating_type": violation,
                    "coalition": coalition,
                }),
                &out,
            )
        }
        Command::Convert {
            economy,
            allocation,
            price,
            epsilon,
            out,
        } => {
            let economy = load_economy(&economy, None)?;
            let allocation: Allocation = read_json(&allocation)?;
            allocation.validate(&economy)?;
            let p = read_price(&price)?;
            let report = convert_notion(&economy, &allocation, &p, epsilon)?;
            emit(serde_json::to_value(&report).expect("report json"), &out)
        }
        Command::Oracle { which } => match which {
            OracleCommand::Grid {
                economy,
                allocation,
                epsilon,
                oracle_grid_step,
                out,
            } => {
                let economy = load_economy(&economy, None)?;
                let allocation: Allocation = read_json(&allocation)?;
                let radius = 2.0
                    * economy
                        .total_endowment()
                        .iter()
                        .fold(0.0f64, |m, &v| m.max(v));
                let grid = GridSpec::new(oracle_grid_step, radius)?;
                let found = grid_price_search(&economy, &allocation, epsilon, &grid)?;
                emit(json!({ "price": found }), &out)
            }
            OracleCommand::Block {
                economy,
                allocation,
                max_k,
                eta,
                seed,
                out,
            } => {
                let economy = load_economy(&economy, None)?;
                let allocation: Allocation = read_json(&allocation)?;
                let found = brute_force_block(&economy, &allocation, max_k, eta, seed)?;
                emit(json!({ "coalition": found }), &out)
            }
        },
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
