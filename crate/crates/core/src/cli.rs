//! Command-line front end. Every subcommand prints one JSON document.
//!
//! Exit codes: 0 for success, 1 for a negative verdict (not equivalent,
//! not identifiable, different off-diagonals, failed verification), 2 for
//! usage or input errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::counterexamples::{
    construct_size2_counterexample, example_fixture, verify_counterexample, CounterexamplePair,
    CONSTRUCT_OFFDIAG_TOL,
};
use crate::equivalence::{
    canonicalize, equivalent, same_model_offdiag, Equivalence, DEFAULT_EQUIV_TOL,
};
use crate::io::{
    read_expected, read_matrix, read_system, write_json, write_matrix, write_system, GaugeJson,
    PartitionJson, ReportJson, SystemJson,
};
use crate::model::{expected_adjacency, offdiag_project, MatrixKind, DEFAULT_RANK_TOL};
use crate::partitions::DEFAULT_PARTITION_TOL;
use crate::recovery::{
    lowrank_complete, offdiag_partition, offdiag_recover, spectral_recover, RecoveryError,
    DEFAULT_CONV_TOL, DEFAULT_MAX_ITER,
};
use crate::sampler::{empirical_mean, sample_adjacency, LinkDistribution, SampleConfig};

/// Default tolerance for `same-offdiag`.
pub const DEFAULT_OFFDIAG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub payload: Value,
}

impl CommandOutcome {
    fn ok(payload: Value) -> Self {
        Self {
            exit_code: 0,
            payload,
        }
    }

    fn verdict(positive: bool, payload: Value) -> Self {
        Self {
            exit_code: if positive { 0 } else { 1 },
            payload,
        }
    }

    fn error(error: &str, detail: impl ToString) -> Self {
        Self {
            exit_code: 2,
            payload: json!({ "error": error, "detail": detail.to_string() }),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dcsbm",
    version,
    about = "Identifiability toolkit for degree-corrected stochastic block models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the expected matrix of a parameter system.
    Build {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Delete the diagonal.
        #[arg(long)]
        offdiag: bool,
    },
    /// Zero the diagonal of a full expected matrix.
    Project {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover parameters from a full or diagonal-deleted matrix.
    Recover {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_enum)]
        from: Source,
        /// Number of communities; required with `--from full`.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_PARTITION_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
    },
    /// Community partition of a diagonal-deleted matrix.
    Partition {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PARTITION_TOL)]
        tol: f64,
    },
    /// Decide gauge equivalence of two systems.
    Equiv {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = DEFAULT_EQUIV_TOL)]
        tol: f64,
    },
    /// Check whether two systems share their off-diagonal expected matrix.
    SameOffdiag {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = DEFAULT_OFFDIAG_TOL)]
        tol: f64,
    },
    /// Canonical representative of a system's gauge orbit.
    Canon {
        #[arg(long)]
        system: PathBuf,
    },
    /// Emit a fixed counterexample or construct one from a system.
    Counterexample {
        #[arg(
            long,
            conflicts_with = "construct",
            required_unless_present = "construct"
        )]
        example: Option<u8>,
        #[arg(long, requires_all = ["system", "community", "scale"])]
        construct: bool,
        #[arg(long)]
        system: Option<PathBuf>,
        /// 1-based community index.
        #[arg(long)]
        community: Option<usize>,
        #[arg(long)]
        scale: Option<f64>,
        /// Also write the pair as sys1.json and sys2.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = CONSTRUCT_OFFDIAG_TOL)]
        tol: f64,
    },
    /// Fill the diagonal of a diagonal-deleted matrix by rank-K iteration.
    Complete {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value_t = DEFAULT_CONV_TOL)]
        conv_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw random adjacency matrices.
    Sample {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, value_enum)]
        dist: Dist,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Average the samples in a directory.
    Mean {
        #[arg(long)]
        in_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct PairArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Source {
    Full,
    Offdiag,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Dist {
    Bernoulli,
    Poisson,
    Exact,
}

impl From<Dist> for LinkDistribution {
    fn from(d: Dist) -> Self {
        match d {
            Dist::Bernoulli => LinkDistribution::Bernoulli,
            Dist::Poisson => LinkDistribution::Poisson,
            Dist::Exact => LinkDistribution::ExactWeight,
        }
    }
}

/// Parses `argv` (program name first) and runs one subcommand.
pub fn run<I, T>(argv: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    CommandOutcome::ok(json!({ "help": e.to_string() }))
                }
                _ => CommandOutcome::error("usage", e.to_string()),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(outcome) => outcome,
        Err(outcome) => outcome,
    }
}

type Outcome = Result<CommandOutcome, CommandOutcome>;

fn input<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, CommandOutcome> {
    r.map_err(|e| CommandOutcome::error("invalid input", e))
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Build {
            system,
            out,
            offdiag,
        } => {
            let sys = input(read_system(&system))?;
            let mut delta = input(expected_adjacency(&sys))?;
            if offdiag {
                delta = offdiag_project(&delta);
            }
            input(write_matrix(&out, delta.matrix()))?;
            Ok(CommandOutcome::ok(matrix_written(
                delta.kind(),
                delta.n(),
                &out,
            )))
        }
        Command::Project { matrix, out } => {
            let delta = input(read_expected(&matrix, MatrixKind::Full))?;
            let pd = offdiag_project(&delta);
            input(write_matrix(&out, pd.matrix()))?;
            Ok(CommandOutcome::ok(matrix_written(pd.kind(), pd.n(), &out)))
        }
        Command::Recover {
            matrix,
            from,
            k,
            tol,
            rank_tol,
        } => {
            let result = match from {
                Source::Full => {
                    let k = k.ok_or_else(|| {
                        CommandOutcome::error("usage", "--k is required with --from full")
                    })?;
                    let delta = input(read_expected(&matrix, MatrixKind::Full))?;
                    spectral_recover(&delta, k, tol, rank_tol)
                }
                Source::Offdiag => {
                    let pd = input(read_expected(&matrix, MatrixKind::DiagonalDeleted))?;
                    offdiag_recover(&pd, tol)
                }
            };
            match result {
                Ok(report) => Ok(CommandOutcome::ok(to_value(&ReportJson::from(&report)))),
                Err(RecoveryError::NonIdentifiable(info)) => Ok(CommandOutcome::verdict(
                    false,
                    json!({
                        "verdict": "non_identifiable",
                        "nodes": info.nodes.iter().map(|i| i + 1).collect::<Vec<_>>(),
                        "witness_counts": info.witness_counts,
                        "partition": PartitionJson::from(&info.partition),
                        "detail": info.detail,
                    }),
                )),
                Err(e) => Err(CommandOutcome::error("recovery failed", e)),
            }
        }
        Command::Partition { matrix, tol } => {
            let pd = input(read_expected(&matrix, MatrixKind::DiagonalDeleted))?;
            let p = offdiag_partition(&pd, tol)
                .map_err(|e| CommandOutcome::error("recovery failed", e))?;
            Ok(CommandOutcome::ok(to_value(&PartitionJson::from(&p))))
        }
        Command::Equiv { pair, tol } => {
            let (a, b) = (input(read_system(&pair.a))?, input(read_system(&pair.b))?);
            Ok(match equivalent(&a, &b, tol) {
                Equivalence::Equivalent(g) => CommandOutcome::ok(json!({
                    "equivalent": true,
                    "witness": GaugeJson::from(&g),
                })),
                Equivalence::NotEquivalent(m) => CommandOutcome::verdict(
                    false,
                    json!({
                        "equivalent": false,
                        "reason": m.reason(),
                        "detail": m.to_string(),
                    }),
                ),
            })
        }
        Command::SameOffdiag { pair, tol } => {
            let (a, b) = (input(read_system(&pair.a))?, input(read_system(&pair.b))?);
            let same = same_model_offdiag(&a, &b, tol);
            Ok(CommandOutcome::verdict(
                same,
                json!({ "same_offdiag": same }),
            ))
        }
        Command::Canon { system } => {
            let sys = input(read_system(&system))?;
            let (canon, g) = canonicalize(&sys);
            Ok(CommandOutcome::ok(json!({
                "system": SystemJson::from(&canon),
                "transform": GaugeJson::from(&g),
            })))
        }
        Command::Counterexample {
            example,
            construct,
            system,
            community,
            scale,
            out_dir,
            tol,
        } => {
            let pair = if construct {
                let sys = input(read_system(
                    system.as_deref().expect("clap requires --system"),
                ))?;
                let community = community.expect("clap requires --community");
                if community == 0 {
                    return Err(CommandOutcome::error("usage", "--community is 1-based"));
                }
                let c = scale.expect("clap requires --scale");
                input(construct_size2_counterexample(&sys, community - 1, c))?
            } else {
                input(example_fixture(example.expect("clap requires --example")))?
            };
            if let Some(dir) = out_dir {
                input(write_pair(&dir, &pair))?;
            }
            let report = verify_counterexample(&pair, tol);
            Ok(CommandOutcome::verdict(
                report.passed(),
                json!({
                    "kind": pair.kind,
                    "sys1": SystemJson::from(&pair.sys1),
                    "sys2": SystemJson::from(&pair.sys2),
                    "verification": report,
                }),
            ))
        }
        Command::Complete {
            matrix,
            k,
            max_iter,
            conv_tol,
            out,
        } => {
            let pd = input(read_expected(&matrix, MatrixKind::DiagonalDeleted))?;
            let done = lowrank_complete(&pd, k, max_iter, conv_tol)
                .map_err(|e| CommandOutcome::error("completion failed", e))?;
            if let Some(path) = &out {
                input(write_matrix(path, done.matrix.matrix()))?;
            }
            let diagonal: Vec<f64> = done.matrix.matrix().diagonal().iter().copied().collect();
            Ok(CommandOutcome::ok(json!({
                "kind": MatrixKind::Full,
                "iterations": done.iterations,
                "converged": done.converged,
                "diagonal": diagonal,
                "out": out.map(|p| p.display().to_string()),
            })))
        }
        Command::Sample {
            system,
            dist,
            count,
            seed,
            out_dir,
        } => {
            let sys = input(read_system(&system))?;
            let cfg = SampleConfig {
                distribution: dist.into(),
                seed,
                count,
            };
            let samples = input(sample_adjacency(&sys, &cfg))?;
            input(fs::create_dir_all(&out_dir))?;
            for (t, s) in samples.iter().enumerate() {
                input(write_matrix(&out_dir.join(format!("sample_{t:06}.csv")), s))?;
            }
            input(write_json(&out_dir.join("config.json"), &cfg))?;
            Ok(CommandOutcome::ok(json!({
                "config": cfg,
                "out_dir": out_dir.display().to_string(),
            })))
        }
        Command::Mean { in_dir, out } => {
            let mut paths: Vec<PathBuf> = input(fs::read_dir(&in_dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|s| s.to_str())
                        .is_some_and(|s| s.starts_with("sample_") && s.ends_with(".csv"))
                })
                .collect();
            paths.sort();
            let samples = paths
                .iter()
                .map(|p| read_matrix(p))
                .collect::<Result<Vec<_>, _>>();
            let samples = input(samples)?;
            let mean = input(empirical_mean(&samples))?;
            input(write_matrix(&out, mean.matrix()))?;
            let mut payload = matrix_written(mean.kind(), mean.n(), &out);
            payload["count"] = json!(samples.len());
            Ok(CommandOutcome::ok(payload))
        }
    }
}

fn matrix_written(kind: MatrixKind, n: usize, out: &Path) -> Value {
    json!({ "kind": kind, "n": n, "out": out.display().to_string() })
}

fn write_pair(dir: &Path, pair: &CounterexamplePair) -> Result<(), crate::io::IoError> {
    fs::create_dir_all(dir).map_err(|source| crate::io::IoError::File {
        path: dir.display().to_string(),
        source,
    })?;
    write_system(&dir.join("sys1.json"), &pair.sys1)?;
    write_system(&dir.join("sys2.json"), &pair.sys2)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}
