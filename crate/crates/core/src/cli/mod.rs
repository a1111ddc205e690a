//! The `revcause` command line: `discover`, `quantiles`, `simulate` and
//! `replay`.
//!
//! Exit codes: 0 success, 2 usage or schema errors, 3 numeric failures.
//! Every command records a [`RunManifest`]; with `--out` it is written to
//! `<out>.manifest`, otherwise it goes to stderr.

pub mod csv_io;
pub mod grid;
pub mod manifest;
pub mod quantiles;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::classifier::{decide, DirectionDecision, ProblemSpec};
use crate::error::{Error, Result};
use crate::independence::{KciConfig, DEFAULT_RIDGE};
use crate::kernel::BandwidthPolicy;
use crate::simulation::{
    cartesian_grid, draw_sample, replicate_seed, run_grid, DgpConfig, GridResult, FULL_TARGET_VARS,
};

pub use manifest::RunManifest;
pub use quantiles::{QuantileReport, QuantileRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const DEFAULT_REPS: usize = 100;
pub const FULL_REPS: usize = 500;

#[derive(Debug, Parser)]
#[command(
    name = "revcause",
    version,
    about = "Decide the causal direction between two variables given controls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide X -> Y versus Y -> X on a CSV file.
    Discover(DiscoverArgs),
    /// Run the classifier within quantile bins of a proxy column.
    Quantiles(QuantileArgs),
    /// Monte Carlo accuracy over a parameter grid.
    Simulate(SimulateArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Input CSV with a header row.
    csv: PathBuf,
    /// Candidate cause column.
    #[arg(long)]
    x: String,
    /// Candidate outcome column.
    #[arg(long)]
    y: String,
    /// Control column; repeat for several.
    #[arg(long)]
    w: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed kernel bandwidth instead of the sample-size heuristic.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    ridge: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiscoverArgs {
    #[command(flatten)]
    problem: ProblemArgs,
}

#[derive(Debug, Args)]
struct QuantileArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Numeric column whose quantiles define the bins.
    #[arg(long)]
    bin_col: String,
    #[arg(long, default_value_t = 4)]
    nq_min: usize,
    #[arg(long, default_value_t = 20)]
    nq_max: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value = "k1,k2")]
    kappa: String,
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    tau_grid: String,
    #[arg(long, default_value = "0,1")]
    rho_grid: String,
    #[arg(long, default_value = "0.5,1,1.5")]
    q_grid: String,
    #[arg(long, default_value = "250,500,1000")]
    n_grid: String,
    /// Replications per cell (100, or 500 with --full).
    #[arg(long)]
    reps: Option<usize>,
    /// Target error variances (1, or 0.8,1,1.2 with --full).
    #[arg(long)]
    var: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory receiving one sample dataset per cell.
    #[arg(long)]
    emit_data: Option<PathBuf>,
    /// Full-size study: 500 replications and all three error variances.
    #[arg(long)]
    full: bool,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write to this path instead of the recorded output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numeric(_) => EXIT_NUMERIC,
        Error::InvalidArgument(_) | Error::Schema(_) | Error::Io(_) => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Discover(a) => cmd_discover(&a, stdout, stderr),
        Command::Quantiles(a) => cmd_quantiles(&a, stdout, stderr),
        Command::Simulate(a) => cmd_simulate(&a, stdout, stderr),
        Command::Replay(a) => cmd_replay(&a, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

struct Loaded {
    spec: ProblemSpec,
    table: csv_io::Table,
    fingerprint: String,
}

fn kci_config(bandwidth: Option<f64>, ridge: f64) -> Result<KciConfig> {
    let policy = match bandwidth {
        Some(b) => BandwidthPolicy::fixed(b)?,
        None => BandwidthPolicy::heuristic(),
    };
    KciConfig::new(policy, ridge)
}

fn load_problem(p: &ProblemArgs, extra: Option<&str>) -> Result<Loaded> {
    let w: Vec<&str> = p.w.iter().map(String::as_str).collect();
    let spec = ProblemSpec::new(&p.x, &p.y, &w)?
        .with_seed(p.seed)
        .with_kci(kci_config(p.bandwidth, p.ridge)?);
    let bytes = fs::read(&p.csv)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.csv.display()))))?;
    let mut columns: Vec<&str> = vec![&p.x, &p.y];
    columns.extend(w.iter().copied());
    if let Some(col) = extra {
        if !columns.contains(&col) {
            columns.push(col);
        }
    }
    let table = csv_io::read_table(bytes.as_slice(), &columns)?;
    if table.dataset.n_rows() < crate::classifier::MIN_ROWS {
        return Err(Error::InvalidArgument(format!(
            "{} complete rows after dropping {} with missing values; need at least {}",
            table.dataset.n_rows(),
            table.rows_dropped,
            crate::classifier::MIN_ROWS
        )));
    }
    Ok(Loaded {
        spec,
        table,
        fingerprint: manifest::fingerprint(&bytes),
    })
}

fn problem_manifest(command: &str, p: &ProblemArgs, loaded: &Loaded) -> RunManifest {
    let mut m = RunManifest::new(command);
    m.set("input", p.csv.display());
    m.set("input_fingerprint", &loaded.fingerprint);
    m.set("x", &p.x);
    m.set("y", &p.y);
    m.set_list("w", &p.w);
    m.set("seed", p.seed);
    match p.bandwidth {
        Some(b) => m.set("bandwidth", b),
        None => m.set("bandwidth", "heuristic"),
    }
    m.set("ridge", p.ridge);
    m.set("spline_basis", loaded.spec.spline_basis());
    m.set("rows_read", loaded.table.rows_read);
    m.set("rows_dropped", loaded.table.rows_dropped);
    m
}

fn float(v: f64) -> String {
    format!("{v:e}")
}

pub const DECISION_HEADER: &str = "outcome,stat_causal,stat_anticausal,n_train,n_test,seed";

pub fn decision_row(d: &DirectionDecision) -> String {
    format!(
        "{},{},{},{},{},{}",
        d.outcome,
        float(d.stat_causal),
        float(d.stat_anticausal),
        d.n_train,
        d.n_test,
        d.seed
    )
}

/// Writes `body` to `out` (plus its manifest) or to stdout (manifest to stderr).
fn emit(
    body: &str,
    out: Option<&Path>,
    manifest: &mut RunManifest,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    match out {
        Some(path) => {
            manifest.set("output", path.display());
            fs::write(path, body)?;
            manifest.write_next_to(path)?;
        }
        None => {
            manifest.set("output", "-");
            stdout.write_all(body.as_bytes())?;
            stderr.write_all(b"# run manifest\n")?;
            stderr.write_all(manifest.to_text().as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_discover(a: &DiscoverArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let p = &a.problem;
    let loaded = load_problem(p, None)?;
    if loaded.table.rows_dropped > 0 {
        writeln!(
            stderr,
            "dropped {} rows with missing values",
            loaded.table.rows_dropped
        )?;
    }
    let decision = decide(&loaded.table.dataset, &loaded.spec)?;
    let body = format!("{DECISION_HEADER}\n{}\n", decision_row(&decision));
    let mut m = problem_manifest("discover", p, &loaded);
    emit(&body, p.out.as_deref(), &mut m, stdout, stderr)
}

pub const QUANTILE_HEADER: &str = "n_q,status,n_causal,n_anticausal,n_inconclusive,share_causal,share_anticausal,share_inconclusive,note";
pub const QUANTILE_BINS_HEADER: &str =
    "n_q,bin,n_rows,lower,upper,outcome,stat_causal,stat_anticausal,n_train,n_test";

pub fn quantile_csv(rows: &[QuantileRow]) -> (String, String) {
    use crate::classifier::Outcome;
    let mut summary = format!("{QUANTILE_HEADER}\n");
    let mut bins = format!("{QUANTILE_BINS_HEADER}\n");
    for row in rows {
        match row {
            QuantileRow::Report(r) => {
                summary.push_str(&format!(
                    "{},ok,{},{},{},{},{},{},\n",
                    r.n_q,
                    r.count(Outcome::CausalXtoY),
                    r.count(Outcome::CausalYtoX),
                    r.count(Outcome::Inconclusive),
                    r.share_causal,
                    r.share_anticausal,
                    r.share_inconclusive
                ));
                for b in &r.bins {
                    let d = &b.decision;
                    bins.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{}\n",
                        r.n_q,
                        b.bin,
                        b.n_rows,
                        b.lower,
                        b.upper,
                        d.outcome,
                        float(d.stat_causal),
                        float(d.stat_anticausal),
                        d.n_train,
                        d.n_test
                    ));
                }
            }
            QuantileRow::Skipped { n_q, reason } => {
                let note = reason.replace([',', '\n'], ";");
                summary.push_str(&format!("{n_q},skipped,,,,,,,{note}\n"));
            }
        }
    }
    (summary, bins)
}

fn cmd_quantiles(a: &QuantileArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let p = &a.problem;
    if a.bin_col == p.x || a.bin_col == p.y {
        return Err(Error::invalid("--bin-col must differ from --x and --y"));
    }
    let loaded = load_problem(p, Some(&a.bin_col))?;
    let rows = quantiles::run_quantiles(
        &loaded.table.dataset,
        &loaded.spec,
        &a.bin_col,
        a.nq_min,
        a.nq_max,
    )?;
    for row in &rows {
        if let QuantileRow::Skipped { n_q, reason } = row {
            writeln!(stderr, "n_q = {n_q} skipped: {reason}")?;
        }
    }
    let (summary, bins) = quantile_csv(&rows);
    let mut m = problem_manifest("quantiles", p, &loaded);
    m.set("bin_col", &a.bin_col);
    m.set("nq_min", a.nq_min);
    m.set("nq_max", a.nq_max);
    if let Some(out) = &p.out {
        let bins_path = bins_path(out);
        fs::write(&bins_path, bins)?;
        m.set("bins_output", bins_path.display());
    }
    emit(&summary, p.out.as_deref(), &mut m, stdout, stderr)
}

/// `<out>.bins.csv`
pub fn bins_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".bins.csv");
    PathBuf::from(s)
}

pub const GRID_HEADER: &str = "kappa,tau,rho,q,n,target_var,reps,n_correct,accuracy,seconds";

pub fn grid_csv(result: &GridResult) -> String {
    let mut out = format!("{GRID_HEADER}\n");
    for c in &result.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.3}\n",
            c.cell.kappa,
            c.cell.tau,
            c.cell.rho,
            c.cell.q,
            c.cell.n,
            c.cell.target_var,
            c.n_reps,
            c.n_correct,
            c.accuracy,
            c.seconds
        ));
    }
    out
}

/// File name of the sample emitted for a cell.
pub fn emitted_name(cell: &crate::simulation::Cell) -> String {
    format!(
        "{}_tau{}_rho{}_q{}_n{}_var{}.csv",
        cell.kappa, cell.tau, cell.rho, cell.q, cell.n, cell.target_var
    )
}

fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let kappas = grid::parse_kappas(&a.kappa)?;
    let taus = grid::parse_taus(&a.tau_grid)?;
    let rhos = grid::parse_rhos(&a.rho_grid)?;
    let qs = grid::parse_reals(&a.q_grid, "--q-grid", Some(0.0))?;
    let ns = grid::parse_sizes(&a.n_grid)?;
    let vars = match &a.var {
        Some(v) => grid::parse_reals(v, "--var", Some(0.0))?,
        None if a.full => FULL_TARGET_VARS.to_vec(),
        None => vec![1.0],
    };
    let reps = a
        .reps
        .unwrap_or(if a.full { FULL_REPS } else { DEFAULT_REPS });
    if reps == 0 {
        return Err(Error::invalid("--reps must be >= 1"));
    }
    let cells = cartesian_grid(&kappas, &taus, &rhos, &qs, &ns, &vars);

    let mut m = RunManifest::new("simulate");
    m.set("kappa", grid::format_list(&kappas));
    m.set("tau_grid", grid::format_list(&taus));
    m.set("rho_grid", grid::format_list(&rhos));
    m.set("q_grid", grid::format_list(&qs));
    m.set("n_grid", grid::format_list(&ns));
    m.set("var", grid::format_list(&vars));
    m.set("reps", reps);
    m.set("seed", a.seed);
    m.set("cells", cells.len());

    if let Some(dir) = &a.emit_data {
        fs::create_dir_all(dir)?;
        for cell in &cells {
            let seed = replicate_seed(a.seed, cell, 0);
            let data = draw_sample(&DgpConfig { cell: *cell, seed })?;
            let file = BufWriter::new(File::create(dir.join(emitted_name(cell)))?);
            csv_io::write_dataset(file, &data)?;
        }
        m.set("emit_data", dir.display());
    }

    let start = Instant::now();
    let result = run_grid(&cells, reps, a.seed)?;
    let failed: usize = result.cells.iter().map(|c| c.n_failed).sum();
    for c in result.cells.iter().filter(|c| c.n_failed > 0) {
        writeln!(
            stderr,
            "{}: {} of {} replicates failed ({})",
            emitted_name(&c.cell).trim_end_matches(".csv"),
            c.n_failed,
            reps,
            c.first_failure.as_deref().unwrap_or("")
        )?;
    }
    m.set("failed_replicates", failed);
    writeln!(
        stderr,
        "{} cells x {reps} replicates in {:.1}s",
        cells.len(),
        start.elapsed().as_secs_f64()
    )?;
    emit(&grid_csv(&result), a.out.as_deref(), &mut m, stdout, stderr)
}

/// Rebuilds the argument vector recorded in a manifest.
pub fn replay_args(m: &RunManifest, out: Option<&Path>) -> Result<Vec<String>> {
    let command = m.require("command")?;
    let mut args = vec!["revcause".to_string(), command.to_string()];
    let flag = |name: &str, key: &str, args: &mut Vec<String>| -> Result<()> {
        args.push(format!("--{name}"));
        args.push(m.require(key)?.to_string());
        Ok(())
    };
    match command {
        "discover" | "quantiles" => {
            let input = m.require("input")?;
            let bytes = fs::read(input)?;
            if manifest::fingerprint(&bytes) != m.require("input_fingerprint")? {
                return Err(Error::Schema(format!(
                    "input `{input}` changed since the manifest was written"
                )));
            }
            args.push(input.to_string());
            flag("x", "x", &mut args)?;
            flag("y", "y", &mut args)?;
            for w in m.get_list("w")? {
                args.push("--w".into());
                args.push(w);
            }
            flag("seed", "seed", &mut args)?;
            flag("ridge", "ridge", &mut args)?;
            if m.require("bandwidth")? != "heuristic" {
                flag("bandwidth", "bandwidth", &mut args)?;
            }
            if command == "quantiles" {
                flag("bin-col", "bin_col", &mut args)?;
                flag("nq-min", "nq_min", &mut args)?;
                flag("nq-max", "nq_max", &mut args)?;
            }
        }
        "simulate" => {
            for (name, key) in [
                ("kappa", "kappa"),
                ("tau-grid", "tau_grid"),
                ("rho-grid", "rho_grid"),
                ("q-grid", "q_grid"),
                ("n-grid", "n_grid"),
                ("var", "var"),
                ("reps", "reps"),
                ("seed", "seed"),
            ] {
                flag(name, key, &mut args)?;
            }
            if m.get("emit_data").is_some() {
                flag("emit-data", "emit_data", &mut args)?;
            }
        }
        other => {
            return Err(Error::Schema(format!("manifest names unknown command `{other}`")));
        }
    }
    let target = match out {
        Some(p) => Some(p.display().to_string()),
        None => m.get("output").filter(|o| *o != "-").map(str::to_string),
    };
    if let Some(t) = target {
        args.push("--out".into());
        args.push(t);
    }
    Ok(args)
}

fn cmd_replay(a: &ReplayArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&a.manifest)?;
    let m = RunManifest::parse(&text)?;
    let args = replay_args(&m, a.out.as_deref())?;
    match run(args, stdout, stderr) {
        EXIT_OK => Ok(()),
        EXIT_NUMERIC => Err(Error::numeric("replayed command failed")),
        _ => Err(Error::invalid("replayed command failed")),
    }
}
