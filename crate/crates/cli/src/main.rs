//! `discrete-dp`: samplers, audits, benchmarks and a budgeted query runner.
//!
//! Exit codes: 0 success or audit pass, 1 audit fail, 2 usage or parse
//! error, 3 budget exhausted.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use discrete_dp_core::api::{
    run_audit, run_query, sample_many, AuditConfig, CutSpecKind, MechanismKind, MechanismSpec, QueryKind,
    QuerySpec, SampleDist, SamplerSpec,
};
use discrete_dp_core::audit::{self, AuditReport, Empirical};
use discrete_dp_core::bench::{self, BenchDist};
use discrete_dp_core::ledger::Ledger;
use discrete_dp_core::privacy::{Budget, DpSystem};
use discrete_dp_core::{config, Error, LaplaceAlgo, RationalParam};

#[derive(Parser)]
#[command(name = "discrete-dp", version, about = "Exact discrete samplers and differential privacy audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print samples, one integer per line.
    Sample(SampleArgs),
    /// Run a statistical or exact audit.
    Audit {
        #[command(subcommand)]
        kind: AuditCmd,
        /// Print the report as JSON.
        #[arg(long, global = true)]
        json: bool,
    },
    /// Time the samplers across scales and write CSV.
    Bench(BenchArgs),
    /// Run a DP query over one CSV column.
    Query(QueryArgs),
    /// Manage a budget ledger file.
    Ledger {
        #[command(subcommand)]
        cmd: LedgerCmd,
    },
}

#[derive(Args, Clone)]
struct SamplerArgs {
    #[arg(long)]
    dist: SampleDist,
    #[arg(long, default_value_t = 1)]
    num: u64,
    #[arg(long, default_value_t = 1)]
    den: u64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    mu: i64,
    /// algo1, algo2, auto or auto:<mix>.
    #[arg(long, default_value = "auto")]
    algo: String,
}

impl SamplerArgs {
    fn spec(&self) -> SamplerSpec {
        SamplerSpec {
            dist: self.dist,
            num: self.num,
            den: self.den,
            mu: self.mu,
            algo: self.algo.clone(),
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Seed for a reproducible stream; the OS source is used otherwise.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum AuditCmd {
    /// Chi-squared goodness of fit of a sampler against its exact mass function.
    Pmf {
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        /// Test newline-separated samples from this file ("-" for stdin)
        /// instead of drawing them.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Two-sample test between two loop choices for the same distribution.
    TwoSample {
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, default_value = "algo1")]
        algo_a: String,
        #[arg(long, default_value = "algo2")]
        algo_b: String,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
    },
    /// Exact pointwise likelihood-ratio check of a shipped mechanism.
    Dp {
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long)]
        epsilon: String,
    },
    /// Exact Rényi divergence check of a shipped mechanism.
    Renyi {
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long)]
        rho: String,
        #[arg(long, value_delimiter = ',', default_value = "3/2,2,4,8")]
        alphas: Vec<String>,
    },
    /// Stability of a loop's exact mass across unrolling cuts.
    Cuts {
        #[arg(long)]
        spec: CutSpecKind,
        #[arg(long, allow_hyphen_values = true)]
        point: i64,
        #[arg(long)]
        cut: u32,
        #[arg(long, default_value_t = 8)]
        extra: u32,
        /// Geometric success probability or uniform range.
        #[arg(long)]
        param: Option<String>,
        #[arg(long)]
        expected: Option<String>,
    },
}

#[derive(Args)]
struct MechArgs {
    #[arg(long)]
    mechanism: MechanismKind,
    /// Noise parameter `num/den`; the mechanism's own claim follows from it.
    #[arg(long, default_value = "1")]
    gamma: String,
    #[arg(long)]
    system: Option<DpSystem>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    bound: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<i64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    queries: Option<Vec<i64>>,
    /// Records of the test universe; defaults to 0,1,2.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    universe: Option<Vec<i64>>,
    #[arg(long)]
    maxlen: Option<usize>,
    #[arg(long, default_value = "auto")]
    algo: String,
}

impl MechArgs {
    fn spec(&self) -> Result<MechanismSpec, Error> {
        let mut m = MechanismSpec::with_gamma(self.mechanism, &self.gamma)?;
        m.system = self.system;
        m.bins = self.bins;
        m.bound = self.bound;
        m.threshold = self.threshold;
        m.queries = self.queries.clone();
        m.algo = self.algo.clone();
        Ok(m)
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "gaussian")]
    dist: BenchDist,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000,10000")]
    sigma_list: Vec<RationalParam>,
    #[arg(long, value_delimiter = ',', default_value = "algo1,algo2,auto")]
    algo: Vec<String>,
    #[arg(long, default_value_t = bench::MIN_DRAWS)]
    draws: u64,
    #[arg(long, default_value_t = bench::MIN_REPS)]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Instead of timing a list, find the smallest integer scale in
    /// `lo..=hi` where the split loop wins and print it.
    #[arg(long)]
    calibrate: bool,
    #[arg(long, default_value_t = 1)]
    lo: u64,
    #[arg(long, default_value_t = 64)]
    hi: u64,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    column: String,
    #[arg(long)]
    query: QueryKind,
    #[arg(long, default_value = "pure")]
    system: DpSystem,
    #[arg(long)]
    budget: String,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ledger to charge; created with `ledger init`.
    #[arg(long)]
    ledger: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    bin_lo: i64,
    #[arg(long, default_value_t = 1)]
    bin_width: u64,
    #[arg(long)]
    bound: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<i64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    queries: Option<Vec<i64>>,
    #[arg(long, default_value = "auto")]
    algo: String,
}

#[derive(Subcommand)]
enum LedgerCmd {
    /// Create a ledger holding `total` in one DP system.
    Init {
        path: PathBuf,
        #[arg(long)]
        system: DpSystem,
        #[arg(long)]
        total: Budget,
        /// Replace an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Print a ledger.
    Show { path: PathBuf },
}

enum Failure {
    Audit,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    config::env_precision_bits();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Audit) => ExitCode::from(1),
        Err(Failure::Lib(e)) => {
            eprintln!("discrete-dp: {} [{}]", e, e.code());
            match e {
                Error::BudgetExhausted { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sample(a) => sample(a),
        Command::Audit { kind, json } => audit_cmd(kind, json),
        Command::Bench(a) => bench_cmd(a),
        Command::Query(a) => query(a),
        Command::Ledger { cmd } => ledger_cmd(cmd),
    }
}

fn sample(a: SampleArgs) -> Result<(), Failure> {
    let xs = sample_many(&a.sampler.spec(), a.count, a.seed)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for x in xs {
        writeln!(out, "{x}")?;
    }
    out.flush()?;
    Ok(())
}

fn read_samples(path: &Path) -> Result<Vec<i64>, Error> {
    let reader: Box<dyn Read> = if path == Path::new("-") {
        Box::new(io::stdin())
    } else {
        Box::new(File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
    };
    let mut xs = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        xs.push(
            t.parse()
                .map_err(|_| Error::Parse(format!("line {}: {t:?} is not an integer", i + 1)))?,
        );
    }
    Ok(xs)
}

fn audit_cmd(kind: AuditCmd, json: bool) -> Result<(), Failure> {
    let report = match kind {
        AuditCmd::Pmf {
            sampler,
            alpha,
            input: Some(path),
            ..
        } => {
            let oracle = sampler.spec().oracle()?;
            let emp = Empirical::from_samples(read_samples(&path)?);
            audit::gof_test(&emp, &oracle, alpha)?.detail("dist", sampler.dist.to_string())
        }
        AuditCmd::Pmf {
            sampler,
            samples,
            seed,
            alpha,
            input: None,
        } => run_audit(&AuditConfig::Pmf {
            sampler: sampler.spec(),
            samples,
            seed,
            alpha,
        })?,
        AuditCmd::TwoSample {
            sampler,
            algo_a,
            algo_b,
            samples,
            seed,
            alpha,
        } => {
            let mut a = sampler.spec();
            a.algo = algo_a;
            let mut b = sampler.spec();
            b.algo = algo_b;
            run_audit(&AuditConfig::TwoSample {
                a,
                b,
                samples,
                seed,
                alpha,
            })?
        }
        AuditCmd::Dp { mech, epsilon } => run_audit(&AuditConfig::Dp {
            mechanism: mech.spec()?,
            epsilon,
            universe: mech.universe.clone(),
            maxlen: mech.maxlen,
        })?,
        AuditCmd::Renyi { mech, rho, alphas } => run_audit(&AuditConfig::Renyi {
            mechanism: mech.spec()?,
            rho,
            alphas,
            universe: mech.universe.clone(),
            maxlen: mech.maxlen,
        })?,
        AuditCmd::Cuts {
            spec,
            point,
            cut,
            extra,
            param,
            expected,
        } => run_audit(&AuditConfig::Cuts {
            spec,
            point,
            cut,
            extra,
            param,
            expected,
        })?,
    };
    print_report(&report, json)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Audit)
    }
}

fn print_report(r: &AuditReport, json: bool) -> io::Result<()> {
    let mut out = io::stdout().lock();
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&r.to_json()).expect("report serializes"))
    } else {
        writeln!(out, "{r}")
    }
}

fn bench_cmd(a: BenchArgs) -> Result<(), Failure> {
    if a.calibrate {
        let mix = bench::calibrate_mix(a.dist, a.lo, a.hi, a.draws, a.reps, a.seed)?;
        println!("{mix}");
        return Ok(());
    }
    let algos = a
        .algo
        .iter()
        .map(|s| s.parse::<LaplaceAlgo>())
        .collect::<Result<Vec<_>, _>>()?;
    let recs = bench::run_bench(a.dist, &a.sigma_list, &algos, a.draws, a.reps, a.seed)?;
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["sigma", "algo", "ns_per_sample", "draws"]).map_err(csv_err)?;
    for r in &recs {
        w.write_record([
            r.sigma.clone(),
            r.algo.clone(),
            format!("{:.1}", r.ns_per_sample),
            r.draws.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// The integer column `name` of a headed CSV file. Non-integer cells are
/// errors, not skipped.
fn read_column(path: &Path, name: &str) -> Result<Vec<i64>, Error> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Parse(format!("no column {name:?} in {}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let cell = rec.get(col).unwrap_or("").trim();
        out.push(
            cell.parse()
                .map_err(|_| Error::Parse(format!("row {}: {cell:?} in column {name:?} is not an integer", i + 2)))?,
        );
    }
    Ok(out)
}

fn query(a: QueryArgs) -> Result<(), Failure> {
    let spec = QuerySpec {
        query: a.query,
        system: a.system,
        budget: a.budget,
        delta: a.delta,
        bound: a.bound,
        bins: a.bins,
        bin_lo: a.bin_lo,
        bin_width: a.bin_width,
        threshold: a.threshold,
        queries: a.queries,
        algo: a.algo,
    };
    // Fail on bad parameters before reading data or touching the ledger.
    spec.prepare()?;
    let db = read_column(&a.csv, &a.column)?;
    let out = match &a.ledger {
        Some(path) => {
            let mut l = Ledger::load(path)?;
            let out = run_query(&spec, &db, a.seed, Some(&mut l))?;
            l.save(path)?;
            out
        }
        None => run_query(&spec, &db, a.seed, None)?,
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn ledger_cmd(cmd: LedgerCmd) -> Result<(), Failure> {
    match cmd {
        LedgerCmd::Init {
            path,
            system,
            total,
            force,
        } => {
            if path.exists() && !force {
                return Err(Error::Io(format!("{} exists; pass --force to replace it", path.display())).into());
            }
            Ledger::new(system, total).save(&path)?;
        }
        LedgerCmd::Show { path } => {
            let l = Ledger::load(&path)?;
            println!("{}", serde_json::to_string_pretty(&l).expect("json"));
        }
    }
    Ok(())
}
