//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for data or
//! invariant errors. Failures print a single line starting with `error:`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::clustering::{kmeans_baseline, pam, ClusteringOutcome, Partition};
use crate::dictionary::{
    build_dictionary, dictionary_from_partition, evaluate, sweep, sweep_csv, Baseline,
    DictionaryConfig, RomDictionary,
};
use crate::dissimilarity::dissim_matrix;
use crate::error::RomError;
use crate::io::{read_snapshots, read_weights, write_binary, write_csv, write_text, encode_csv_rows};
use crate::manifold::{generate, ManifoldSpec};
use crate::snapshot::{InnerProduct, SnapshotSet};

#[derive(Debug, Parser)]
#[command(name = "romdict", version, about = "Dictionaries of local reduced-order bases")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "ROMDICT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic snapshot set from a JSON manifold spec.
    Generate(GenerateArgs),
    /// Write the sine dissimilarity matrix as CSV.
    Dissim(DissimArgs),
    /// Partition snapshots (PAM on squared sine dissimilarities, or k-means).
    Cluster(ClusterArgs),
    /// Build a dictionary: partition, local bases and report.
    Build(BuildArgs),
    /// Evaluate the dictionary induced by an existing partition CSV.
    Evaluate(EvaluateArgs),
    /// Dictionary cost over a grid of cluster counts and basis sizes.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Bin,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Pam,
    Kmeans,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Snapshot file (binary ROMD or CSV, detected automatically).
    #[arg(long)]
    pub input: PathBuf,
    /// Diagonal inner-product weights, one per line (default: identity).
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Path to a JSON spec, or the JSON itself.
    #[arg(long)]
    pub spec: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Bin)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DissimArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Write squared sines.
    #[arg(long)]
    pub squared: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Method::Pam)]
    pub method: Method,
    /// Partition CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DictArgs {
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma-separated subset of global_pod,kmeans_dict,random_dict.
    #[arg(long, default_value = "global_pod,kmeans_dict,random_dict")]
    pub baselines: String,
    /// Fit local bases on raw instead of norm-normalized snapshots.
    #[arg(long)]
    pub unnormalized: bool,
    /// Per-cluster energy fraction selecting at most n modes.
    #[arg(long)]
    pub energy_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub dict: DictArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Format of the basis files.
    #[arg(long, value_enum, default_value_t = Format::Bin)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Partition CSV as written by `cluster` or `build`.
    #[arg(long)]
    pub partition: PathBuf,
    #[command(flatten)]
    pub dict: DictArgs,
    /// Report JSON (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Cluster counts: inclusive range `a..b` or list `a,b,c`.
    #[arg(long)]
    pub k_range: String,
    /// Basis sizes: inclusive range `a..b` or list `a,b,c`.
    #[arg(long)]
    pub n_range: String,
    #[command(flatten)]
    pub dict: DictArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Rom(#[from] RomError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Rom(e) if e.is_config_error() => 2,
            CliError::Rom(_) => 3,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("input file not found: {}", path.display())))
    }
}

fn load(input: &InputArgs) -> CliResult<(SnapshotSet, InnerProduct)> {
    require_file(&input.input)?;
    if let Some(w) = &input.weights {
        require_file(w)?;
    }
    let s = read_snapshots(&input.input)?;
    let ip = match &input.weights {
        Some(path) => InnerProduct::diagonal(read_weights(path)?)?,
        None => InnerProduct::Identity,
    };
    if let Some(n) = ip.dim() {
        if n != s.n_h() {
            return Err(RomError::DimensionMismatch {
                expected: s.n_h(),
                got: n,
            }
            .into());
        }
    }
    Ok((s, ip))
}

/// Parses `a..b` (inclusive) or `a,b,c`.
pub fn parse_range(text: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Config(format!("invalid range {text:?}: expected a..b or a,b,c"));
    let text = text.trim();
    let values: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        text.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    };
    if values.is_empty() {
        return Err(CliError::Config(format!("range {text:?} is empty")));
    }
    Ok(values)
}

fn dict_config(k: usize, args: &DictArgs) -> CliResult<(DictionaryConfig, Vec<Baseline>)> {
    if k == 0 || args.n == 0 || args.solver.restarts == 0 {
        return Err(CliError::Config("--k, --n and --restarts must be positive".into()));
    }
    let config = DictionaryConfig {
        k,
        n: args.n,
        seed: args.solver.seed,
        restarts: args.solver.restarts,
        max_iter: args.solver.max_iter,
        normalized: !args.unnormalized,
        energy_tolerance: args.energy_tolerance,
    };
    Ok((config, Baseline::parse_list(&args.baselines)?))
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| RomError::io(parent, e))?;
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    let text = if args.spec.trim_start().starts_with('{') {
        args.spec.clone()
    } else {
        let path = Path::new(&args.spec);
        require_file(path)?;
        fs::read_to_string(path).map_err(|e| RomError::io(path, e))?
    };
    let spec = ManifoldSpec::from_json(&text)
        .map_err(|e| CliError::Config(format!("bad manifold spec: {e}")))?;
    let s = generate(&spec).map_err(|e| match e {
        RomError::InvalidParameter(msg) => CliError::Config(msg),
        other => other.into(),
    })?;
    ensure_parent(&args.out)?;
    match args.format {
        Format::Bin => write_binary(&args.out, &s)?,
        Format::Csv => {
            write_csv(&args.out, &s)?;
            if let Some(labels) = s.labels() {
                let path = args.out.with_extension("labels.csv");
                write_text(&path, &encode_csv_rows(labels.values.chunks_exact(labels.p)))?;
            }
        }
    }
    println!("wrote {} snapshots of dimension {} to {}", s.m(), s.n_h(), args.out.display());
    Ok(())
}

fn cmd_dissim(args: &DissimArgs) -> CliResult<()> {
    let (s, ip) = load(&args.input)?;
    let d = dissim_matrix(&s, &ip, args.squared)?;
    ensure_parent(&args.out)?;
    d.write_csv(&args.out)?;
    Ok(())
}

fn cmd_cluster(args: &ClusterArgs) -> CliResult<()> {
    let (s, ip) = load(&args.input)?;
    if args.k == 0 || args.k > s.m() {
        return Err(CliError::Config(format!("--k must be in [1, {}]", s.m())));
    }
    let SolverArgs { seed, restarts, max_iter } = args.solver;
    let outcome: ClusteringOutcome = match args.method {
        Method::Pam => pam(&dissim_matrix(&s, &ip, true)?, args.k, seed, restarts, max_iter)?,
        Method::Kmeans => kmeans_baseline(&s, &ip, args.k, seed, restarts, max_iter)?,
    };
    ensure_parent(&args.out)?;
    outcome.partition.write_csv(&args.out)?;
    println!("cost {} (converged: {})", outcome.cost, outcome.converged);
    Ok(())
}

fn write_bases(dir: &Path, dict: &RomDictionary, format: Format) -> CliResult<()> {
    for (c, (basis, members)) in dict.bases.iter().zip(dict.partition.clusters()).enumerate() {
        let set = SnapshotSet::new(basis.vectors().flatten().cloned().collect(), basis.dim(), basis.n_h())?;
        let stem = dir.join(format!("basis_{c}"));
        match format {
            Format::Bin => write_binary(&stem.with_extension("bin"), &set)?,
            Format::Csv => write_csv(&stem.with_extension("csv"), &set)?,
        }
        let sidecar = json!({
            "cluster": c,
            "dim": basis.dim(),
            "requested": basis.requested(),
            "energy": basis.energy(),
            "indices": members,
        });
        let text = serde_json::to_string_pretty(&sidecar).map_err(RomError::from)? + "\n";
        write_text(&stem.with_extension("json"), &text)?;
    }
    Ok(())
}

fn cmd_build(args: &BuildArgs) -> CliResult<()> {
    let (s, ip) = load(&args.input)?;
    let (config, baselines) = dict_config(args.k, &args.dict)?;
    let dict = build_dictionary(&s, &ip, &config)?;
    let report = evaluate(&s, &ip, &dict, &baselines)?;
    fs::create_dir_all(&args.out).map_err(|e| RomError::io(&args.out, e))?;
    dict.partition.write_csv(&args.out.join("partition.csv"))?;
    write_bases(&args.out, &dict, args.format)?;
    write_text(&args.out.join("report.json"), &report.to_json()?)?;
    println!("total_cost {}", report.total_cost);
    for (name, cost) in &report.baselines {
        println!("{name} {cost}");
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let (s, ip) = load(&args.input)?;
    require_file(&args.partition)?;
    let partition = Partition::read_csv(&args.partition)?;
    let (config, baselines) = dict_config(partition.k(), &args.dict)?;
    let dict = dictionary_from_partition(&s, &ip, partition, &config)?;
    let report = evaluate(&s, &ip, &dict, &baselines)?;
    let text = report.to_json()?;
    match &args.out {
        Some(path) => {
            ensure_parent(path)?;
            write_text(path, &text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let ks = parse_range(&args.k_range)?;
    let ns = parse_range(&args.n_range)?;
    let (s, ip) = load(&args.input)?;
    let (base, baselines) = dict_config(ks[0].max(1), &args.dict)?;
    if ks.contains(&0) || ns.contains(&0) {
        return Err(CliError::Config("sweep values must be positive".into()));
    }
    if let Some(&k) = ks.iter().find(|&&k| k > s.m()) {
        return Err(CliError::Config(format!("k = {k} exceeds m = {}", s.m())));
    }
    let rows = sweep(&s, &ip, &ks, &ns, &base, &baselines)?;
    ensure_parent(&args.out)?;
    write_text(&args.out, &sweep_csv(&rows, &baselines))?;
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Dissim(a) => cmd_dissim(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Build(a) => cmd_build(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_range("1..=2").unwrap(), vec![1, 2]);
        assert_eq!(parse_range("2,5, 7").unwrap(), vec![2, 5, 7]);
        assert!(parse_range("4..1").is_err());
        assert!(parse_range("").is_err());
        assert!(parse_range("a..b").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(RomError::InvalidParameter("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(RomError::ZeroVector).exit_code(), 3);
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "romdict", "build", "--input", "a.bin", "--k", "4", "--n", "3", "--out", "o", "--threads", "2",
        ])
        .unwrap();
        assert_eq!(cli.threads, Some(2));
        let Command::Build(b) = cli.command else { panic!() };
        assert_eq!((b.k, b.dict.n, b.dict.solver.restarts), (4, 3, 10));
    }
}
