//! Command-line front end: Monte-Carlo sweeps, single-drop diagnostics and
//! the built-in self test.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fblsec::harness::{
    csv_string, run_sweep, selftest, single_drop_report, write_csv_file, write_json_file,
    AlgorithmKind, SweepSpec, SweepVar,
};

#[derive(Parser)]
#[command(
    name = "fblsec",
    about = "Secure precoding and reliability optimization simulator for \
             finite-blocklength multi-user downlink",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and emit CSV/JSON tables.
    Sweep(SweepArgs),
    /// Run every algorithm on a single drop and dump full diagnostics.
    Single(SweepArgs),
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Both,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON file with a sweep spec; explicit flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Swept variable: P_dBm | L | N | K | M.
    #[arg(long)]
    var: Option<String>,

    /// Comma-separated sweep values (ascending).
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,

    /// Comma-separated algorithm names (ALG1, ALG1-COV, ALG2, ALG2-COV,
    /// FBL-SE-MAX, RZF, RZF-EVE, ZF, ZF-EVE, MRT).
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,

    /// Monte-Carlo drops per sweep point.
    #[arg(long)]
    drops: Option<usize>,

    /// Base seed; fully determines every emitted byte.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Transmit power (dBm) when not swept.
    #[arg(long)]
    p_dbm: Option<f64>,

    /// Blocklength when not swept.
    #[arg(long)]
    blocklength: Option<u32>,

    /// AP antennas.
    #[arg(long)]
    antennas: Option<usize>,

    /// Users.
    #[arg(long)]
    users: Option<usize>,

    /// Eavesdroppers.
    #[arg(long)]
    eves: Option<usize>,

    /// Smooth-max sharpness (simulation default 10; not part of the
    /// published parameter set).
    #[arg(long)]
    alpha: Option<f64>,

    /// Rate-vs-reliability weight in [0, 1].
    #[arg(long)]
    weight: Option<f64>,

    /// Measure wall time per row (breaks byte-level reproducibility).
    #[arg(long)]
    timing: bool,

    /// Output basename; writes <out>.csv and/or <out>.json.
    #[arg(long, default_value = "sweep")]
    out: PathBuf,

    /// Which files to write.
    #[arg(long, value_enum, default_value_t = OutputFormat::Both)]
    format: OutputFormat,

    /// Print rows to stdout instead of writing files.
    #[arg(long)]
    stdout: bool,
}

impl SweepArgs {
    fn build_spec(&self) -> Result<SweepSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let body = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&body)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => SweepSpec::default(),
        };
        if let Some(var) = &self.var {
            spec.var = var.parse::<SweepVar>()?;
        }
        if let Some(values) = &self.values {
            spec.values = values.clone();
        }
        if let Some(names) = &self.algorithms {
            spec.algorithms = names
                .iter()
                .map(|n| n.parse::<AlgorithmKind>())
                .collect::<fblsec::Result<Vec<_>>>()?;
        }
        if let Some(drops) = self.drops {
            spec.drops = drops;
        }
        if let Some(seed) = self.seed {
            spec.base_seed = seed;
        }
        if let Some(p) = self.p_dbm {
            spec.p_dbm = p;
        }
        if let Some(l) = self.blocklength {
            spec.blocklength = l;
        }
        if let Some(n) = self.antennas {
            spec.scenario.antennas = n;
        }
        if let Some(k) = self.users {
            spec.scenario.users = k;
        }
        if let Some(m) = self.eves {
            spec.scenario.eves = m;
        }
        if let Some(a) = self.alpha {
            spec.alpha = a;
        }
        if let Some(w) = self.weight {
            spec.weight = w;
        }
        spec.measure_time = self.timing;
        spec.validate()?;
        Ok(spec)
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let spec = args.build_spec()?;
    let output = run_sweep(&spec, args.workers)?;

    if args.stdout {
        print!("{}", csv_string(&output.rows));
    } else {
        if args.format != OutputFormat::Json {
            let path = args.out.with_extension("csv");
            write_csv_file(&output.rows, &path)?;
            eprintln!("wrote {}", path.display());
        }
        if args.format != OutputFormat::Csv {
            let path = args.out.with_extension("json");
            write_json_file(&output, &path)?;
            eprintln!("wrote {}", path.display());
        }
    }

    for s in &output.summary {
        eprintln!(
            "{}={:<8} {:<11} mean sum secrecy {:8.4} +- {:.4}  (max err {:.3e}, max leak {:.3e})",
            output.spec.var.as_str(),
            s.sweep_value,
            s.algorithm,
            s.mean_sum_secrecy_rate,
            s.stderr_sum_secrecy_rate,
            s.mean_max_error_prob,
            s.mean_max_leakage,
        );
    }

    if !output.errors.is_empty() {
        eprintln!(
            "{}",
            serde_json::json!({
                "partial_failure": true,
                "failed_rows": output.errors.len(),
                "errors": output.errors,
            })
        );
        std::process::exit(2);
    }
    Ok(())
}

fn cmd_single(args: &SweepArgs) -> Result<()> {
    let spec = args.build_spec()?;
    let report = single_drop_report(&spec)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_selftest() -> Result<()> {
    let mut failed = 0;
    for (name, result) in selftest() {
        match result {
            Ok(()) => println!("PASS {name}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} selftest check(s) failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Sweep(args) => cmd_sweep(args),
        Command::Single(args) => cmd_single(args),
        Command::Selftest => cmd_selftest(),
    }
}
