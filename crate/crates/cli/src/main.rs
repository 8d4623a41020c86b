//! `circkep` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 integration failure (non-finite
//! state, step budget or step underflow), 3 undetermined classification,
//! 4 failing verification checks.

mod settings;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use circkep::charts::{chart_ecc_sq, chart_from_reduced, reduced_from_chart, ChartState};
use circkep::equilibria::equilibria_for;
use circkep::integrator::{IntegrationConfig, Termination};
use circkep::output::{to_json, write_chart_csv, write_diagram_csv, write_reduced_csv};
use circkep::regime::{analysis_chart, run_chart, run_reduced, simulate_outcome, LabConfig, OmegaVerdict, RunStatus};
use circkep::sweep::sweep;
use circkep::verification::{run_check, select};
use circkep::{ChartId, Params, Reduced};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use settings::Settings;

const EXIT_USAGE: u8 = 1;
const EXIT_INTEGRATION: u8 = 2;
const EXIT_UNDETERMINED: u8 = 3;
const EXIT_VERIFY_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "circkep", version, about = "Damped Kepler problem: simulation, regime classification and checks")]
struct Cli {
    /// key=value file supplying defaults for any long flag (flags win)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write it as CSV
    Simulate(SimulateArgs),
    /// Run the two-phase analysis and report the asymptotic regime
    Classify(ClassifyArgs),
    /// Classify an (alpha, beta) grid and write the regime diagram as CSV
    Sweep(SweepArgs),
    /// Report the chart equilibria for the given parameters as JSON
    Equilibria(ParamArgs),
    /// Transform a reduced state into chart coordinates or back
    Chart(ChartArgs),
    /// Run the verification checks and print a pass/fail table
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// velocity exponent alpha >= 0
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// radial exponent beta >= 0
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// drag strength delta > 0
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
}

#[derive(Args, Clone)]
struct TolArgs {
    /// relative tolerance [default: 1e-9]
    #[arg(long)]
    rtol: Option<f64>,
    /// absolute tolerance [default: 1e-12]
    #[arg(long)]
    atol: Option<f64>,
    /// accepted-step budget [default: 5000000]
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Frame {
    Reduced,
    Chart,
}

impl std::str::FromStr for Frame {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Frame as ValueEnum>::from_str(s, true)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// initial state "r,p,l,theta"
    #[arg(long, allow_hyphen_values = true)]
    ic: Option<String>,
    /// coordinates to integrate in [default: reduced]
    #[arg(long, value_enum)]
    frame: Option<Frame>,
    /// chart for --frame chart [default: the regime chart]
    #[arg(long)]
    chart: Option<ChartId>,
    /// physical end time for --frame reduced [default: 100]
    #[arg(long)]
    t_end: Option<f64>,
    /// chart end time for --frame chart [default: 10000]
    #[arg(long)]
    tau_end: Option<f64>,
    /// keep every n-th accepted step [default: 1]
    #[arg(long)]
    stride: Option<usize>,
    #[command(flatten)]
    tol: TolArgs,
    /// output file [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// initial state "r,p,l,theta" [default: 1,0,0.9,0]
    #[arg(long, allow_hyphen_values = true)]
    ic: Option<String>,
    /// chart end time [default: 10000]
    #[arg(long)]
    tau_end: Option<f64>,
    #[command(flatten)]
    tol: TolArgs,
    /// print the full report as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// comma-separated alpha values [default: 0.25,0.75,1.25,1.75,2.25]
    #[arg(long)]
    alphas: Option<String>,
    /// comma-separated beta values [default: 0.25,0.75,1.25,1.75,2.25]
    #[arg(long)]
    betas: Option<String>,
    /// drag strength [default: 0.2]
    #[arg(long)]
    delta: Option<f64>,
    /// chart end time [default: 10000]
    #[arg(long)]
    tau_end: Option<f64>,
    #[command(flatten)]
    tol: TolArgs,
    /// worker threads [default: available parallelism]
    #[arg(long, env = "CIRCKEP_JOBS")]
    jobs: Option<usize>,
    /// write JSON instead of CSV
    #[arg(long)]
    json: bool,
    /// output file [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChartArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// chart name [default: the regime chart]
    #[arg(long)]
    chart: Option<ChartId>,
    /// reduced state "r,p,l,theta[,t]" to transform into the chart
    #[arg(long, allow_hyphen_values = true, conflicts_with = "inverse")]
    state: Option<String>,
    /// chart state "c1,c2,c3,theta[,t]" to transform back
    #[arg(long, allow_hyphen_values = true)]
    inverse: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// only run checks whose name matches this glob
    #[arg(long)]
    filter: Option<String>,
    /// skip the slow checks
    #[arg(long)]
    quick: bool,
    /// print results as JSON
    #[arg(long)]
    json: bool,
}

enum Failure {
    Usage(String),
    Exit(u8),
}

impl From<String> for Failure {
    fn from(e: String) -> Self {
        Failure::Usage(e)
    }
}

impl From<circkep::Error> for Failure {
    fn from(e: circkep::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        // a closed pipe (`| head`) ends output quietly
        if e.kind() == io::ErrorKind::BrokenPipe {
            Failure::Exit(0)
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn emit(line: String) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    writeln!(out, "{line}")?;
    Ok(())
}

macro_rules! say {
    ($($t:tt)*) => {
        emit(format!($($t)*))?
    };
}

type CliResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let settings = match cli.config.as_deref().map(Settings::load).transpose() {
        Ok(s) => s.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let (name, result) = match cli.command {
        Command::Simulate(a) => ("simulate", simulate(a, &settings)),
        Command::Classify(a) => ("classify", classify(a, &settings)),
        Command::Sweep(a) => ("sweep", run_sweep(a, &settings)),
        Command::Equilibria(a) => ("equilibria", equilibria(a, &settings)),
        Command::Chart(a) => ("chart", chart(a, &settings)),
        Command::Verify(a) => ("verify", verify(a)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Exit(code)) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            if let Some(sub) = Cli::command().find_subcommand_mut(name) {
                eprintln!("\n{}", sub.render_usage());
            }
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn params(a: &ParamArgs, s: &Settings) -> Result<Params, Failure> {
    let alpha = s.required(a.alpha, "alpha")?;
    let beta = s.required(a.beta, "beta")?;
    let delta = s.required(a.delta, "delta")?;
    Ok(Params::new(alpha, beta, delta)?)
}

fn integration(t: &TolArgs, s: &Settings) -> Result<IntegrationConfig<f64>, Failure> {
    let d = IntegrationConfig::default();
    Ok(IntegrationConfig {
        rtol: s.value(t.rtol, "rtol")?.unwrap_or(d.rtol),
        atol: s.value(t.atol, "atol")?.unwrap_or(d.atol),
        max_steps: s.value(t.max_steps, "max-steps")?.unwrap_or(d.max_steps),
        ..d
    })
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| Failure::Usage(format!("bad {what} value '{x}': {e}"))))
        .collect()
}

fn parse_state(text: &str, what: &str) -> Result<[f64; 5], Failure> {
    let v = parse_list(text, what)?;
    match v.len() {
        4 => Ok([v[0], v[1], v[2], v[3], 0.0]),
        5 => Ok([v[0], v[1], v[2], v[3], v[4]]),
        n => Err(Failure::Usage(format!("{what} needs 4 or 5 comma-separated values, got {n}"))),
    }
}

fn reduced_ic(text: &str) -> Result<Reduced, Failure> {
    let y = parse_state(text, "--ic")?;
    Ok(Reduced::new(y[0], y[1], y[2], y[3], y[4]))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| format!("cannot create {}: {e}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn termination_code(t: &Termination) -> u8 {
    match t {
        Termination::StopTime | Termination::TerminalEvent(_) => 0,
        _ => EXIT_INTEGRATION,
    }
}

fn simulate(a: SimulateArgs, s: &Settings) -> CliResult {
    let p = params(&a.params, s)?;
    let ic = reduced_ic(&s.required(a.ic, "ic")?)?;
    let frame = s.value(a.frame, "frame")?.unwrap_or(Frame::Reduced);
    let mut lab = LabConfig { integration: integration(&a.tol, s)?, ..LabConfig::default() };
    lab.integration.sample_stride = s.value(a.stride, "stride")?.unwrap_or(1);
    let mut out = output(&a.out)?;
    let termination = match frame {
        Frame::Reduced => {
            lab.t_max = s.value(a.t_end, "t-end")?.unwrap_or(100.0);
            let tr = run_reduced(&p, &ic, &lab, false)?;
            if let Some(e) = &tr.config_error {
                return Err(Failure::Usage(e.clone()));
            }
            write_reduced_csv(&mut out, &tr)?;
            tr.termination
        }
        Frame::Chart => {
            let chart = s.value(a.chart, "chart")?.unwrap_or_else(|| analysis_chart(&p));
            lab.tau_end = s.value(a.tau_end, "tau-end")?.unwrap_or(1e4);
            let tr = run_chart(&p, chart, &ic, &lab)?;
            if let Some(e) = &tr.config_error {
                return Err(Failure::Usage(e.clone()));
            }
            write_chart_csv(&mut out, chart, &tr)?;
            tr.termination
        }
    };
    out.flush()?;
    eprintln!("termination: {termination}");
    Ok(termination_code(&termination))
}

fn classify(a: ClassifyArgs, s: &Settings) -> CliResult {
    let p = params(&a.params, s)?;
    let ic = reduced_ic(&s.value(a.ic, "ic")?.unwrap_or_else(|| "1,0,0.9,0".into()))?;
    let lab = LabConfig {
        integration: integration(&a.tol, s)?,
        tau_end: s.value(a.tau_end, "tau-end")?.unwrap_or(1e4),
        ..LabConfig::default()
    };
    let r = simulate_outcome(&p, &ic, &lab)?;
    let observed = r.regime_observed.map_or("Undetermined".to_string(), |x| x.to_string());
    if a.json {
        say!("{}", to_json(&r));
    } else {
        say!("predicted: {}", r.regime_predicted);
        say!("observed: {observed}");
        say!("chart: {}", r.chart);
        match r.ecc_sq_limit {
            Some(e) => say!("ecc_sq_limit: {e:.10}"),
            None => say!("ecc_sq_limit: n/a"),
        }
        say!("theta_diverged: {}", r.theta_diverged);
        match r.omega {
            OmegaVerdict::Finite { estimate } => say!("omega: Finite ({estimate:.10})"),
            v => say!("omega: {v:?}"),
        }
        say!("p_behavior: {:?}", r.p_behavior);
        for (name, f) in &r.fits {
            say!("fit {name}: exponent {:.6}, r2 {:.6}", f.exponent, f.r_squared);
        }
        if !r.flags.is_empty() {
            say!("flags: {}", r.flags.join(" "));
        }
    }
    Ok(match &r.status {
        RunStatus::Failed(t) => termination_code(t),
        _ if r.regime_observed.is_none() => EXIT_UNDETERMINED,
        _ => 0,
    })
}

const DEFAULT_GRID: &str = "0.25,0.75,1.25,1.75,2.25";

fn run_sweep(a: SweepArgs, s: &Settings) -> CliResult {
    let alphas = parse_list(&s.value(a.alphas, "alphas")?.unwrap_or_else(|| DEFAULT_GRID.into()), "--alphas")?;
    let betas = parse_list(&s.value(a.betas, "betas")?.unwrap_or_else(|| DEFAULT_GRID.into()), "--betas")?;
    let delta = s.value(a.delta, "delta")?.unwrap_or(0.2);
    let jobs = s.value(a.jobs, "jobs")?;
    if jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let lab = LabConfig {
        integration: integration(&a.tol, s)?,
        tau_end: s.value(a.tau_end, "tau-end")?.unwrap_or(1e4),
        ..LabConfig::default()
    };
    let d = sweep(&alphas, &betas, delta, &lab, jobs)?;
    let mut out = output(&a.out)?;
    if a.json {
        writeln!(out, "{}", to_json(&d))?;
    } else {
        write_diagram_csv(&mut out, &d)?;
    }
    out.flush()?;
    match d.agreement() {
        Some(x) => eprintln!("agreement: {:.1}% of {} determinate points", 100.0 * x, d.scored()),
        None => eprintln!("agreement: no determinate points"),
    }
    Ok(0)
}

fn equilibria(a: ParamArgs, s: &Settings) -> CliResult {
    let p = params(&a, s)?;
    say!("{}", to_json(&equilibria_for(&p)?));
    Ok(0)
}

fn chart(a: ChartArgs, s: &Settings) -> CliResult {
    let p = params(&a.params, s)?;
    let chart = s.value(a.chart, "chart")?.unwrap_or_else(|| analysis_chart(&p));
    let (state, inverse) = (s.value(a.state, "state")?, s.value(a.inverse, "inverse")?);
    let c = match (state, inverse) {
        (Some(text), None) => {
            let y = parse_state(&text, "--state")?;
            chart_from_reduced(chart, &p, &Reduced::new(y[0], y[1], y[2], y[3], y[4]))?
        }
        (None, Some(text)) => ChartState::from_array(chart, &parse_state(&text, "--inverse")?),
        _ => return Err(Failure::Usage("give exactly one of --state or --inverse".into())),
    };
    let r = reduced_from_chart(&p, &c)?;
    let names = chart.coordinate_names();
    let coords: serde_json::Map<String, serde_json::Value> =
        names.iter().zip(c.coords()).map(|(n, x)| (n.to_string(), x.into())).collect();
    let report = serde_json::json!({
        "chart": chart,
        "coords": coords,
        "theta": c.theta,
        "t": c.t,
        "reduced": {"r": r.r, "p": r.p, "l": r.l, "theta": r.theta, "t": r.t},
        "ecc_sq": chart_ecc_sq(&c),
    });
    say!("{}", to_json(&report));
    Ok(0)
}

fn verify(a: VerifyArgs) -> CliResult {
    let specs = select(a.filter.as_deref(), a.quick)?;
    if specs.is_empty() {
        return Err(Failure::Usage("no checks match the filter".into()));
    }
    let mut results = Vec::new();
    for check in specs {
        let r = run_check(check);
        if !a.json {
            say!("{} {:<28} {:>8.3} s  {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.elapsed_s, check.summary);
            for f in r.failures() {
                say!("       {}: {}", f.label, f.detail);
            }
        }
        results.push(r);
    }
    if a.json {
        say!("{}", to_json(&results));
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if !a.json {
        say!("{} of {} checks passed", results.len() - failed, results.len());
    }
    if failed > 0 {
        return Err(Failure::Exit(EXIT_VERIFY_FAILED));
    }
    Ok(0)
}
