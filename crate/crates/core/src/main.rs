use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gluedtrees::bounds::theorem_scan;
use gluedtrees::embedding::estimate_expected_win;
use gluedtrees::experiments::{
    self, bounds_rows, exit_code, oracle_script, to_csv, ExperimentError, RunOptions,
};
use gluedtrees::oracle::GraphFile;
use gluedtrees::stats::EstimateRecord;
use gluedtrees::{make_tree, Oracle, TreeShape};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "gluedtrees",
    version,
    about = "Glued-trees traversal experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its reports.
    Run {
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config and print one diagnostic per line.
    Validate { config: PathBuf },
    /// Print the bounds table as CSV.
    Bounds {
        #[arg(long, default_value_t = 6)]
        n_min: u32,
        #[arg(long, default_value_t = 60)]
        n_max: u32,
        #[arg(long, default_value_t = 6)]
        step: u32,
        /// Tree size; defaults to floor(2^{n/3}) per row.
        #[arg(long)]
        t: Option<u64>,
    },
    /// Print both operating points for n = 1..=n_max as CSV.
    Theorems {
        #[arg(long, default_value_t = 120)]
        n_max: u32,
    },
    /// Estimate E_G[P^G(T)] for one generated tree and print it as JSON.
    Estimate {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value = "random_attach")]
        shape: TreeShape,
        #[arg(long, default_value_t = 64)]
        graph_trials: u64,
        #[arg(long, default_value_t = 4096)]
        embed_trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build an instance and write it as a JSON graph file.
    ExportGraph {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        name_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a fixed query script against an instance and print the
    /// transcript as JSON.
    OracleScript {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        name_seed: u64,
        /// Load the instance from a graph file instead.
        #[arg(long, conflicts_with = "n")]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        queries: u64,
        #[arg(long, default_value_t = 0)]
        script_seed: u64,
    },
}

fn fail(message: impl std::fmt::Display, code: i32) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code as u8)
}

fn report_error(e: ExperimentError) -> ExitCode {
    let code = e.exit_code();
    fail(e, code)
}

fn lib_error(e: gluedtrees::Error) -> ExitCode {
    let code = match e {
        gluedtrees::Error::Resource(_) => exit_code::RESOURCE,
        gluedtrees::Error::Domain(_) | gluedtrees::Error::InvalidArgument(_) => exit_code::CONFIG,
        _ => exit_code::FAILURE,
    };
    fail(e, code)
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> ExitCode {
    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            return fail(e, exit_code::FAILURE);
        }
    }
    match experiments::run_file(&config, &RunOptions { seed, out_dir: out }) {
        Ok(outcome) => {
            for path in &outcome.files {
                println!("wrote {}", path.display());
            }
            for v in &outcome.violations {
                eprintln!("bound violation: {v}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => report_error(e),
    }
}

fn validate(config: PathBuf) -> ExitCode {
    let text = match fs::read_to_string(&config) {
        Ok(text) => text,
        Err(e) => return fail(format!("{}: {e}", config.display()), exit_code::FAILURE),
    };
    let diags = experiments::validate(&text);
    for d in &diags {
        println!("{d}");
    }
    if diags.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(exit_code::CONFIG as u8)
    }
}

fn print_csv<R: serde::Serialize>(rows: &[R]) -> ExitCode {
    match to_csv(rows) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => report_error(e),
    }
}

fn oracle_transcript(
    n: Option<u32>,
    seed: u64,
    name_seed: u64,
    graph: Option<PathBuf>,
    queries: u64,
    script_seed: u64,
) -> ExitCode {
    let oracle = match (graph, n) {
        (Some(path), _) => fs::read_to_string(&path)
            .map_err(gluedtrees::Error::from)
            .and_then(|text| GraphFile::from_json(&text))
            .and_then(|file| file.to_oracle()),
        (None, Some(n)) => Oracle::build(n, seed, name_seed),
        (None, None) => return fail("either --n or --graph is required", exit_code::CONFIG),
    };
    let mut oracle = match oracle {
        Ok(o) => o,
        Err(e) => return lib_error(e),
    };
    let transcript = oracle_script(&mut oracle, queries, script_seed);
    let mut stdout = io::stdout().lock();
    let written = serde_json::to_writer(&mut stdout, &transcript)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(stdout));
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e, exit_code::FAILURE),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            threads,
        } => run(config, seed, out, threads),
        Command::Validate { config } => validate(config),
        Command::Bounds {
            n_min,
            n_max,
            step,
            t,
        } => {
            if step == 0 || n_min < 1 || n_min > n_max || n_max > 120 {
                return fail(
                    "need 1 <= n_min <= n_max <= 120 and step >= 1",
                    exit_code::CONFIG,
                );
            }
            let ns: Vec<u32> = (n_min..=n_max).step_by(step as usize).collect();
            let ts = t.map(|t| vec![t]);
            match bounds_rows(&ns, ts.as_deref()) {
                Ok(rows) => print_csv(&rows),
                Err(e) => lib_error(e),
            }
        }
        Command::Theorems { n_max } => {
            if !(1..=120).contains(&n_max) {
                return fail("need 1 <= n_max <= 120", exit_code::CONFIG);
            }
            match theorem_scan(n_max) {
                Ok(scan) => print_csv(&scan.rows),
                Err(e) => lib_error(e),
            }
        }
        Command::Estimate {
            n,
            t,
            shape,
            graph_trials,
            embed_trials,
            seed,
        } => {
            let estimate = make_tree(shape, t, seed)
                .and_then(|tree| estimate_expected_win(n, &tree, graph_trials, embed_trials, seed));
            match estimate {
                Ok(e) => {
                    let parameters = BTreeMap::from([
                        ("n".to_string(), json!(n)),
                        ("t".to_string(), json!(t)),
                        ("shape".to_string(), json!(shape)),
                        ("graph_trials".to_string(), json!(graph_trials)),
                        ("embed_trials".to_string(), json!(embed_trials)),
                    ]);
                    println!("{}", json!(EstimateRecord::new(&e, seed, parameters)));
                    ExitCode::SUCCESS
                }
                Err(e) => lib_error(e),
            }
        }
        Command::ExportGraph {
            n,
            seed,
            name_seed,
            out,
        } => {
            let result = Oracle::build(n, seed, name_seed)
                .and_then(|o| GraphFile::from_oracle(&o).to_json())
                .and_then(|json| Ok(fs::write(&out, json)?));
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => lib_error(e),
            }
        }
        Command::OracleScript {
            n,
            seed,
            name_seed,
            graph,
            queries,
            script_seed,
        } => oracle_transcript(n, seed, name_seed, graph, queries, script_seed),
    }
}
