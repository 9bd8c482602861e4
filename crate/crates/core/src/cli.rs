//! Command-line runner. Every subcommand validates its whole input before
//! computing anything and writes its output in one piece at the end.
//!
//! Exit codes: 0 success, 1 domain failure (divergence, violated
//! condition, unsatisfied bound, non-convex estimator), 2 usage error,
//! 3 when iteration exhausts its budget without a verdict.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::algebra::{classify, DEFAULT_EPSILON};
use crate::analysis::{check_bound, reports_csv, VarianceConfig};
use crate::error::Error;
use crate::mrp::{Mrp, ValueFunction, DEFAULT_MAX_HORIZON};
use crate::offpolicy::{check_offpolicy_condition, OffPolicyTrace};
use crate::operator::{empirical_modulus, field_csv, iterate, update_field, Grid, IterateConfig, Verdict};
use crate::spec::ReturnSpec;
use crate::sweep::{default_alphas, run_sweep, sparse_preset, truncated_preset, Backup, SweepConfig};

#[derive(Parser, Debug)]
#[command(
    name = "tdlab",
    version,
    about = "Linear return estimators for tabular policy evaluation"
)]
pub struct Cli {
    /// Defaults as `key = value` lines; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write the result to FILE instead of standard output.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Iterate the expected delayed-pulse update on the two-state MRP.
    #[command(args_override_self = true)]
    Counterexample(CounterexampleArgs),
    /// Expected update directions over a grid of two-state value functions.
    #[command(args_override_self = true)]
    Field(FieldArgs),
    /// Step-size sweep of offline TD learning on the random walk.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Hierarchy level, recency flags and contraction modulus of a return.
    #[command(args_override_self = true)]
    Classify(ClassifyArgs),
    /// Monte-Carlo check of the variance bound on the random walk.
    #[command(args_override_self = true)]
    Variance(VarianceArgs),
    /// Check a realized trace against the off-policy recency condition.
    #[command(args_override_self = true)]
    CheckOffpolicy(CheckOffpolicyArgs),
    /// Empirical moduli of the delayed pulse over a (tau, gamma, p) grid.
    #[command(args_override_self = true)]
    ScanPulse(ScanPulseArgs),
}

#[derive(Args, Debug, Clone)]
pub struct TwoStateArgs {
    /// Delay of the pulse.
    #[arg(long, default_value_t = 1)]
    pub tau: usize,
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    /// Probability of staying put.
    #[arg(long, default_value_t = 0.4)]
    pub p: f64,
    /// Estimator to use instead of the delayed pulse.
    #[arg(long)]
    pub spec: Option<String>,
}

impl TwoStateArgs {
    fn build(&self) -> Result<(Mrp, ReturnSpec), Error> {
        let mrp = Mrp::two_state(self.p, self.gamma)?;
        let spec = match &self.spec {
            Some(s) => ReturnSpec::parse(s)?,
            None => ReturnSpec::DelayedPulse(self.tau),
        };
        Ok((mrp, spec))
    }
}

#[derive(Args, Debug)]
pub struct CounterexampleArgs {
    #[command(flatten)]
    pub mrp: TwoStateArgs,
    /// Initial values of the two states.
    #[arg(long, num_args = 2, allow_negative_numbers = true, default_values_t = [1.0, -1.0])]
    pub v0: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub conv_tol: f64,
    #[arg(long, default_value_t = 1e6)]
    pub div_threshold: f64,
}

#[derive(Args, Debug)]
pub struct FieldArgs {
    #[command(flatten)]
    pub mrp: TwoStateArgs,
    /// Grid as MIN:MAX:POINTS, shared by both axes.
    #[arg(long, default_value = "-2:2:21", value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Grid,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Sparse λ-returns (0.9,1), (0.75,3), (0.65,5).
    Fig4Sparse,
    /// Truncated λ-returns (0.99,10), (0.93,20), (0.9,∞).
    Fig6Trunc,
    /// Estimators given with --specs.
    Custom,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackupArg {
    /// Sum the increments of every visit.
    Accumulate,
    /// Apply visits in time order, each moving toward its target.
    Sequential,
}

impl From<BackupArg> for Backup {
    fn from(b: BackupArg) -> Self {
        match b {
            BackupArg::Accumulate => Backup::Accumulate,
            BackupArg::Sequential => Backup::Sequential,
        }
    }
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(value_enum)]
    pub preset: Preset,
    /// Estimators for the custom preset.
    #[arg(long, num_args = 1..)]
    pub specs: Vec<String>,
    #[arg(long, num_args = 1.., default_values_t = default_alphas())]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub episodes: usize,
    #[arg(long, default_value_t = 400)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Non-terminal states of the random walk.
    #[arg(long, default_value_t = 19)]
    pub n: usize,
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// How the backups of one episode are combined.
    #[arg(long, value_enum, default_value_t = BackupArg::Sequential)]
    pub backup: BackupArg,
    /// Also write per-episode errors to FILE.
    #[arg(long, value_name = "FILE")]
    pub curves: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    pub spec: String,
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub eps: f64,
}

#[derive(Args, Debug)]
pub struct VarianceArgs {
    #[arg(long, num_args = 1.., default_values_t = [String::from("lambda:0.9")])]
    pub specs: Vec<String>,
    /// Start states; defaults to the center of the walk.
    #[arg(long, num_args = 1..)]
    pub states: Vec<usize>,
    #[arg(long, default_value_t = 19)]
    pub n: usize,
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// TD errors entering the covariance estimate.
    #[arg(long, default_value_t = crate::analysis::DEFAULT_KAPPA_HORIZON)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CheckOffpolicyArgs {
    /// File of `h rho` lines.
    pub trace: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub eps: f64,
}

#[derive(Args, Debug)]
pub struct ScanPulseArgs {
    #[arg(long, num_args = 1.., default_values_t = [1usize, 2, 3])]
    pub taus: Vec<usize>,
    #[arg(long, num_args = 1.., default_values_t = [0.5, 0.9, 0.99])]
    pub gammas: Vec<f64>,
    #[arg(long, num_args = 1.., default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
    pub ps: Vec<f64>,
    /// Random value-function pairs per grid cell.
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err("expected MIN:MAX:POINTS".into());
    };
    let grid = Grid {
        min: lo.parse().map_err(|e| format!("{lo}: {e}"))?,
        max: hi.parse().map_err(|e| format!("{hi}: {e}"))?,
        points: n.parse().map_err(|e| format!("{n}: {e}"))?,
    };
    grid.validate().map_err(|e| e.to_string())?;
    Ok(grid)
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvexSpec(_)
            | Error::SingularSystem
            | Error::NonVanishingTail
            | Error::UnsupportedTail(_)
            | Error::UnsupportedFamily(_) => Failure::Domain(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

/// What a finished subcommand hands back: the main output, an optional
/// side file, a note for standard error and the exit code.
struct Report {
    body: String,
    extra: Option<(PathBuf, String)>,
    note: String,
    code: i32,
}

impl Report {
    fn ok(body: String) -> Self {
        Self {
            body,
            extra: None,
            note: String::new(),
            code: 0,
        }
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> crate::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse(format!(
                "config line {}: expected `key = value`",
                lineno + 1
            )));
        };
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Appends config entries the command line left unset, just before any
/// `--` separator.
fn merge_config(args: Vec<OsString>, cli: &Cli) -> Result<Vec<OsString>, Failure> {
    let Some(path) = &cli.config else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let pairs = parse_config(&text)?;

    let cmd = Cli::command();
    let matches = cmd
        .clone()
        .try_get_matches_from(args.iter())
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = cmd.find_subcommand(name).expect("parsed subcommand exists");

    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in pairs {
        if key == "config" {
            return Err(Failure::Usage("config files cannot include other config files".into()));
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()));
        let Some(arg) = arg else {
            let known = cmd
                .get_subcommands()
                .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key.as_str())));
            if known {
                continue;
            }
            return Err(Failure::Usage(format!("unknown config key `{key}`")));
        };
        let id = arg.get_id().as_str();
        let scope = if sub.get_arguments().any(|a| a.get_id() == arg.get_id()) {
            sub_matches
        } else {
            &matches
        };
        let from_cli = scope.value_source(id) == Some(ValueSource::CommandLine);
        if from_cli {
            continue;
        }
        extra.push(format!("--{key}").into());
        extra.extend(value.split_whitespace().map(OsString::from));
    }
    let mut args = args;
    let at = args.iter().position(|a| a == "--").unwrap_or(args.len());
    args.splice(at..at, extra);
    Ok(args)
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => return clap_exit(e, stdout, stderr),
    };
    let cli = match merge_config(args, &cli) {
        Ok(merged) if cli.config.is_some() => match Cli::try_parse_from(&merged) {
            Ok(cli) => cli,
            Err(e) => return clap_exit(e, stdout, stderr),
        },
        Ok(_) => cli,
        Err(f) => return fail(f, stderr),
    };
    match execute(&cli) {
        Ok(report) => finish(&cli, report, stdout, stderr),
        Err(f) => fail(f, stderr),
    }
}

fn clap_exit(e: clap::Error, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let text = e.render().to_string();
    if e.use_stderr() {
        let _ = write!(stderr, "{text}");
    } else {
        let _ = write!(stdout, "{text}");
    }
    e.exit_code()
}

fn fail(f: Failure, stderr: &mut dyn Write) -> i32 {
    match f {
        Failure::Usage(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Failure::Domain(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    }
}

fn finish(cli: &Cli, report: Report, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if let Some((path, text)) = &report.extra {
        if let Err(e) = std::fs::write(path, text) {
            return fail(Failure::Usage(format!("{}: {e}", path.display())), stderr);
        }
    }
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &report.body).map_err(|e| format!("{}: {e}", path.display())),
        None => stdout.write_all(report.body.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        return fail(Failure::Usage(msg), stderr);
    }
    if !report.note.is_empty() {
        let _ = write!(stderr, "{}", report.note);
    }
    report.code
}

fn check_writable(path: &Path) -> Result<(), Failure> {
    if path.is_dir() {
        return Err(Failure::Usage(format!("{} is a directory", path.display())));
    }
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(Failure::Usage(format!("directory {} does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

fn execute(cli: &Cli) -> Result<Report, Failure> {
    if let Some(out) = &cli.out {
        check_writable(out)?;
    }
    match &cli.command {
        Command::Counterexample(a) => counterexample(a),
        Command::Field(a) => field(a),
        Command::Sweep(a) => sweep(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Variance(a) => variance(a),
        Command::CheckOffpolicy(a) => check_offpolicy(a),
        Command::ScanPulse(a) => scan_pulse(a),
    }
}

fn counterexample(a: &CounterexampleArgs) -> Result<Report, Failure> {
    let (mrp, spec) = a.mrp.build()?;
    let cfg = IterateConfig {
        step: a.step,
        max_iters: a.max_iters,
        conv_tol: a.conv_tol,
        div_threshold: a.div_threshold,
    };
    let trace = iterate(&mrp, &spec.impulse(), &ValueFunction::new(a.v0.clone()), &cfg)?;
    let (verdict, code) = match trace.verdict {
        Verdict::Converged(_) => ("converged", 0),
        Verdict::Diverged(_) => ("diverged", 1),
        Verdict::Exhausted => ("exhausted", 3),
    };
    let ratio = trace.growth_ratios().last().copied().unwrap_or(f64::NAN);
    Ok(Report {
        body: trace.to_csv(),
        extra: None,
        note: format!(
            "{verdict} after {} iterations, last growth ratio {ratio:.7}\n",
            trace.records.len() - 1
        ),
        code,
    })
}

fn field(a: &FieldArgs) -> Result<Report, Failure> {
    let (mrp, spec) = a.mrp.build()?;
    Ok(Report::ok(field_csv(&update_field(&mrp, &spec.impulse(), &a.grid)?)))
}

fn parse_specs(specs: &[String]) -> Result<Vec<ReturnSpec>, Failure> {
    Ok(specs
        .iter()
        .map(|s| ReturnSpec::parse(s))
        .collect::<crate::Result<_>>()?)
}

fn sweep(a: &SweepArgs) -> Result<Report, Failure> {
    let specs = match a.preset {
        Preset::Fig4Sparse | Preset::Fig6Trunc if !a.specs.is_empty() => {
            return Err(Failure::Usage("--specs only applies to the custom preset".into()))
        }
        Preset::Fig4Sparse => sparse_preset(),
        Preset::Fig6Trunc => truncated_preset(),
        Preset::Custom if a.specs.is_empty() => return Err(Failure::Usage("the custom preset needs --specs".into())),
        Preset::Custom => parse_specs(&a.specs)?,
    };
    if let Some(path) = &a.curves {
        check_writable(path)?;
    }
    let mrp = Mrp::random_walk(a.n, a.gamma)?;
    let mut cfg = SweepConfig::new(specs, a.alphas.clone(), Mrp::random_walk_center(a.n));
    cfg.episodes = a.episodes;
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    cfg.max_horizon = DEFAULT_MAX_HORIZON;
    cfg.record_episodes = a.curves.is_some();
    cfg.threads = a.threads;
    cfg.backup = a.backup.into();
    cfg.validate()?;

    let result = run_sweep(&mrp, &cfg)?;
    let mut note = String::new();
    for b in &result.best {
        let _ = writeln!(note, "best {}: alpha {} error {:.6}", b.spec, b.alpha, b.mean_error);
    }
    Ok(Report {
        body: result.to_csv(),
        extra: a.curves.clone().map(|p| (p, result.episodes_csv())),
        note,
        code: 0,
    })
}

fn classify_cmd(a: &ClassifyArgs) -> Result<Report, Failure> {
    let spec = ReturnSpec::parse(&a.spec)?;
    if !(0.0..1.0).contains(&a.gamma) {
        return Err(Error::BadDiscount(a.gamma).into());
    }
    if !(a.eps >= 0.0 && a.eps.is_finite()) {
        return Err(Failure::Usage(format!("eps {} must be finite and nonnegative", a.eps)));
    }
    let c = classify(&spec.impulse(), a.gamma, a.eps)?;
    let mut body = String::new();
    let _ = writeln!(body, "spec: {spec}");
    let _ = writeln!(body, "gamma: {}", a.gamma);
    let _ = writeln!(body, "level: {}", c.level());
    let _ = writeln!(body, "linear: {}", c.is_linear);
    let _ = writeln!(body, "affine: {}", c.is_affine);
    let _ = writeln!(body, "convex: {}", c.is_convex);
    let _ = writeln!(body, "compound: {}", c.is_compound);
    let _ = writeln!(body, "nstep: {}", c.is_nstep);
    let _ = writeln!(body, "weak_recency: {}", c.weak_recency);
    let _ = writeln!(body, "strong_recency: {}", c.strong_recency);
    let _ = writeln!(body, "weight_sum: {}", c.weight_sum);
    let _ = writeln!(body, "modulus: {}", c.modulus);
    Ok(Report::ok(body))
}

fn variance(a: &VarianceArgs) -> Result<Report, Failure> {
    let specs = parse_specs(&a.specs)?;
    let mrp = Mrp::random_walk(a.n, a.gamma)?;
    let states = if a.states.is_empty() {
        vec![Mrp::random_walk_center(a.n)]
    } else {
        a.states.clone()
    };
    for &s in &states {
        if s >= mrp.n_states() {
            return Err(Error::StateOutOfRange(s).into());
        }
        if mrp.is_terminal(s) {
            return Err(Error::StartTerminal(s).into());
        }
    }
    if a.samples < 2 || a.horizon == 0 {
        return Err(Failure::Usage("need --samples ≥ 2 and --horizon ≥ 1".into()));
    }
    for spec in &specs {
        let convex = classify(&spec.impulse(), a.gamma, DEFAULT_EPSILON).is_ok_and(|c| c.is_convex);
        if !convex {
            return Err(Error::NonConvexSpec(spec.to_string()).into());
        }
    }
    let cfg = VarianceConfig {
        samples: a.samples,
        horizon: a.horizon,
        seed: a.seed,
    };
    let v = ValueFunction::zeros(mrp.n_states());
    let mut reports = Vec::new();
    for spec in &specs {
        for &s in &states {
            reports.push(check_bound(&mrp, spec, &v, s, &cfg)?);
        }
    }
    let unsatisfied = reports.iter().filter(|r| !r.satisfied).count();
    Ok(Report {
        body: reports_csv(&reports),
        extra: None,
        note: if unsatisfied > 0 {
            format!("{unsatisfied} bound check(s) failed\n")
        } else {
            String::new()
        },
        code: i32::from(unsatisfied > 0),
    })
}

fn check_offpolicy(a: &CheckOffpolicyArgs) -> Result<Report, Failure> {
    let text = std::fs::read_to_string(&a.trace).map_err(|e| Failure::Usage(format!("{}: {e}", a.trace.display())))?;
    let trace = OffPolicyTrace::from_text(&text)?;
    Ok(match check_offpolicy_condition(&trace, a.eps) {
        None => Report::ok("PASS\n".into()),
        Some(i) => Report {
            body: format!("FAIL at index {i}\n"),
            extra: None,
            note: String::new(),
            code: 1,
        },
    })
}

fn scan_pulse(a: &ScanPulseArgs) -> Result<Report, Failure> {
    let mut cells = Vec::new();
    for &tau in &a.taus {
        for &g in &a.gammas {
            for &p in &a.ps {
                cells.push((tau, g, Mrp::two_state(p, g)?, p));
            }
        }
    }
    if a.pairs == 0 {
        return Err(Failure::Usage("--pairs must be positive".into()));
    }
    let mut body = String::from("tau,gamma,p,empirical_modulus,worst_case_modulus\n");
    for (tau, g, mrp, p) in &cells {
        let h = ReturnSpec::DelayedPulse(*tau).impulse();
        let emp = empirical_modulus(mrp, &h, a.pairs, a.seed)?;
        let worst = classify(&h, *g, DEFAULT_EPSILON)?.modulus;
        let _ = writeln!(body, "{tau},{g},{p},{emp},{worst}");
    }
    Ok(Report::ok(body))
}
