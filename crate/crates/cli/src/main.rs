use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rangevol::asymptotics::constants_csv;
use rangevol::fmt::fmt_sig17;
use rangevol::ingestion::{DailyPipeline, ResampleConfig, Session};
use rangevol::lambda::{simulate_table, LambdaTable, SHIPPED_SEED};
use rangevol::simulator::{
    run_study, simulate_irregular_grid_study, Design, IrregularScheme, IrregularStudyConfig,
    SimScenario, StudyConfig,
};
use rangevol::{Error, EstimateReport};

#[derive(Parser, Debug)]
#[command(
    name = "rangevol",
    version,
    about = "Range-based volatility estimation and simulation"
)]
struct Cli {
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a table of range moments lambda(r, m)
    Lambda(LambdaArgs),
    /// Asymptotic variance factors of RRVb, RBV and RTV against m
    Constants(ConstantsArgs),
    /// Monte Carlo bias / rmse / coverage study on simulated days
    Study(StudyArgs),
    /// Estimate daily variation from tick files
    Estimate(EstimateArgs),
    /// Bias of the estimators on irregularly observed Brownian days
    Irregular(IrregularArgs),
}

#[derive(Args, Debug)]
struct LambdaSource {
    /// Lambda table CSV (default: the built-in table)
    #[arg(long, env = "RANGEVOL_LAMBDA")]
    lambda_file: Option<PathBuf>,
}

impl LambdaSource {
    fn load(&self) -> Result<LambdaTable, Error> {
        match &self.lambda_file {
            Some(p) => LambdaTable::read(p),
            None => Ok(LambdaTable::shipped()),
        }
    }
}

#[derive(Args, Debug)]
struct LambdaArgs {
    /// Powers r, comma separated; fractions like 2/3 allowed
    #[arg(long, value_delimiter = ',', value_parser = parse_power, default_value = "2/3,1,4/3,5/3,2,8/3,4")]
    powers: Vec<f64>,
    /// Block sizes m, comma separated; ranges like 1-30 allowed
    #[arg(long, value_parser = parse_m_list, default_value = "1-30,60,90,1000")]
    m_list: MList,
    /// Replications (1e7 style accepted)
    #[arg(long, value_parser = parse_count, default_value = "1e7")]
    reps: u64,
    #[arg(long, default_value_t = SHIPPED_SEED)]
    seed: u64,
    /// Output CSV (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[command(flatten)]
    lambda: LambdaSource,
    /// Block sizes m
    #[arg(long, value_parser = parse_m_list, default_value = "1-30,60,90,1000")]
    m_list: MList,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Scenario file of key=value lines (default: built-in parameters)
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Designs n x m, comma separated
    #[arg(long, value_delimiter = ',', value_parser = parse_design, default_value = "78x30,39x60,26x90")]
    designs: Vec<Design>,
    #[arg(long, value_parser = parse_count, default_value = "2000")]
    reps: u64,
    /// Noise ratio gamma; adds a noisy panel when positive
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    lambda: LambdaSource,
    /// Output CSV (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the report as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Tick files with header timestamp,price; the date is the file stem
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Resampling config of key=value lines (interval_seconds, session_seconds, n, m)
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    lambda: LambdaSource,
    /// Confidence level of the log intervals
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IrregularArgs {
    /// equidistant, uniform or previous-tick[:draws]
    #[arg(long, value_parser = parse_scheme, default_value = "uniform")]
    scheme: IrregularScheme,
    #[arg(long, value_parser = parse_count, default_value = "10000")]
    reps: u64,
    #[arg(long, default_value_t = 20_111)]
    seed: u64,
    #[command(flatten)]
    lambda: LambdaSource,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct MList(Vec<usize>);

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a count: {s:?}"))?;
    if v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("not a positive whole number: {s:?}"))
    }
}

fn parse_power(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad power {s:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad power {s:?}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|_| format!("bad power {s:?}"))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("powers must be positive, got {s:?}"))
    }
}

fn parse_m_list(s: &str) -> Result<MList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let bad = || format!("bad block size {part:?}");
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a == 0 || a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => {
                let m: usize = part.parse().map_err(|_| bad())?;
                if m == 0 {
                    return Err(bad());
                }
                out.push(m);
            }
        }
    }
    Ok(MList(out))
}

fn parse_design(s: &str) -> Result<Design, String> {
    let (n, m) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("design must look like 78x30, got {s:?}"))?;
    let n = n.trim().parse().map_err(|_| format!("bad n in {s:?}"))?;
    let m = m.trim().parse().map_err(|_| format!("bad m in {s:?}"))?;
    Ok(Design::new(n, m))
}

fn parse_scheme(s: &str) -> Result<IrregularScheme, String> {
    IrregularScheme::parse(s).ok_or_else(|| {
        format!("unknown scheme {s:?}; use equidistant, uniform or previous-tick[:draws]")
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_lambda(a: &LambdaArgs) -> Result<(), Error> {
    let table = simulate_table(&a.powers, &a.m_list.0, a.reps, a.seed)?;
    emit(a.out.as_deref(), &table.to_csv())?;
    eprintln!(
        "{} entries, max standard error {:.3e}, version {}",
        table.len(),
        table.max_std_error(),
        table.version()
    );
    Ok(())
}

fn cmd_constants(a: &ConstantsArgs) -> Result<(), Error> {
    let table = a.lambda.load()?;
    emit(a.out.as_deref(), &constants_csv(&a.m_list.0, &table)?)
}

fn cmd_study(a: &StudyArgs) -> Result<(), Error> {
    if !(a.noise >= 0.0) {
        return Err(Error::Domain("--noise must be nonnegative".into()));
    }
    let mut scenario = match &a.scenario {
        Some(p) => SimScenario::from_text(&std::fs::read_to_string(p)?)?,
        None => SimScenario::default(),
    };
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let table = a.lambda.load()?;
    let mut cfg = StudyConfig::new(scenario, a.reps);
    cfg.designs = a.designs.clone();
    cfg.noise_gamma = (a.noise > 0.0).then_some(a.noise);
    let report = run_study(&cfg, &table)?;
    emit(a.out.as_deref(), &report.to_csv())?;
    if let Some(p) = &a.json {
        std::fs::write(p, report.to_json())?;
    }
    Ok(())
}

/// Header of the estimate output: the report columns plus interval and error columns.
const ESTIMATE_HEADER: &str =
    "date,estimator,n,m,value,lambda_version,ci_level,ci_lower,ci_upper,error";

fn estimate_row(r: &EstimateReport) -> String {
    let ci = match r.notes.ci {
        Some((level, lo, hi)) => format!("{level},{},{}", fmt_sig17(lo), fmt_sig17(hi)),
        None => ",,".into(),
    };
    format!("{},{ci},", r.csv_row())
}

/// Writes every day it can; fails with a data error afterwards if any file failed.
fn cmd_estimate(a: &EstimateArgs) -> Result<(), Error> {
    let resample = match &a.config {
        Some(p) => ResampleConfig::from_text(&std::fs::read_to_string(p)?)?,
        None => ResampleConfig::default(),
    };
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Error::Domain("--level must lie in (0, 1)".into()));
    }
    let table = a.lambda.load()?;
    let pipeline = DailyPipeline::new(resample, &table, a.level)?;
    let mut s = String::from(ESTIMATE_HEADER);
    s.push('\n');
    let mut failed = 0;
    for path in &a.input {
        match pipeline.run_file(path, Session::default()) {
            Ok(rows) => {
                for r in &rows {
                    writeln!(s, "{}", estimate_row(r)).unwrap();
                }
            }
            Err(e @ Error::MissingLambda { .. }) => return Err(e),
            Err(e) => {
                failed += 1;
                let date = path
                    .file_stem()
                    .map(|x| x.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let msg = e.to_string().replace([',', '\n'], ";");
                writeln!(
                    s,
                    "{date},,{},{},,{},,,,{msg}",
                    resample.n,
                    resample.m,
                    table.version()
                )
                .unwrap();
            }
        }
    }
    emit(a.out.as_deref(), &s)?;
    if failed > 0 {
        return Err(Error::Ingestion(format!(
            "{failed} of {} input files failed; see the error column",
            a.input.len()
        )));
    }
    Ok(())
}

fn cmd_irregular(a: &IrregularArgs) -> Result<(), Error> {
    let table = a.lambda.load()?;
    let cfg = IrregularStudyConfig::new(a.scheme, a.reps, a.seed);
    emit(
        a.out.as_deref(),
        &simulate_irregular_grid_study(&cfg, &table)?.to_csv(),
    )
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) => 2,
        Error::MissingLambda { .. } => 4,
        Error::Ingestion(_) | Error::Parse { .. } | Error::Io(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .expect("thread pool builds once");
    }
    let result = match &cli.command {
        Command::Lambda(a) => cmd_lambda(a),
        Command::Constants(a) => cmd_constants(a),
        Command::Study(a) => cmd_study(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Irregular(a) => cmd_irregular(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
