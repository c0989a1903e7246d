//! `realityvote` command line: `eval`, `frontier`, `oracle`, `simulate`.
//!
//! Exit codes: 0 ok, 2 bad input, 3 mechanism/domain or formula mismatch,
//! 4 enumeration budget exceeded, 5 statistical gate failed.

pub mod format;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::guarantees::{self, Setting};
use crate::montecarlo::{self, Experiment, TrialStats};
use crate::population::{Alternative, DomainSpec};
use crate::rational::{self, Q};
use crate::rules::{self, BaseRule, Mechanism, Participation};
use crate::verifier::{self, Shape};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_STATISTICAL: i32 = 5;

pub const ENUM_CAP_VAR: &str = "REALITYVOTE_ENUM_CAP";
pub const DEFAULT_ENUM_CAP: usize = 10;

#[derive(Parser, Debug)]
#[command(name = "realityvote", version, about = "Sybil-resilient reality-enforcing voting: evaluation, guarantees, brute-force checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a mechanism on a profile file.
    Eval {
        #[arg(long)]
        profile: PathBuf,
        /// e.g. "mj re:2/3 mode:active"
        #[arg(long)]
        mechanism: String,
    },
    /// Sweep the closed-form guarantees over a parameter grid.
    Frontier {
        /// One or more of arbitrary, random, random-finite, smj, proxy (comma separated).
        #[arg(long)]
        setting: String,
        /// "a,b,c" or "start:stop:step"
        #[arg(long)]
        sigma_grid: String,
        #[arg(long)]
        mu_grid: String,
        #[arg(long, default_value = "0")]
        tau_grid: String,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = format::FRONTIER_SCHEMA_VERSION)]
        schema_version: u32,
    },
    /// Compare the brute-force verifier with the closed form on a binary shape.
    Oracle {
        /// "n,sigma,mu", e.g. "5,2/5,0"
        #[arg(long)]
        shape: String,
        #[arg(long)]
        mechanism: String,
        #[arg(long, default_value = "mj")]
        base: String,
        /// Report the smallest live budget instead of the smallest safe one.
        #[arg(long)]
        liveness: bool,
    },
    /// Random-participation experiments.
    Simulate {
        #[arg(long, value_enum)]
        kind: SimKind,
        #[arg(long)]
        template: PathBuf,
        /// One value or a comma-separated list for a decay curve.
        #[arg(long)]
        n_plus: String,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults: "mj mode:active" (whp), "md re:<sigma> mode:proxy" (proxy).
        #[arg(long)]
        mechanism: Option<String>,
        #[arg(long)]
        base: Option<String>,
        #[arg(long)]
        alpha_prime: Option<String>,
        #[arg(long)]
        c: Option<String>,
        #[arg(long)]
        epsilon: Option<String>,
        /// CSV of the per-n⁺ curve.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimKind {
    Whp,
    Proxy,
    Hoeffding,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::IncompatibleMechanism(_) => EXIT_MISMATCH,
        Error::BudgetExceeded(_) => EXIT_BUDGET,
        _ => EXIT_INPUT,
    }
}

/// Failure carrying its exit code.
struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(exit_code(&e), e.to_string())
    }
}

fn io_fail(e: std::io::Error) -> Failure {
    Failure(EXIT_INPUT, e.to_string())
}

type CmdResult = std::result::Result<i32, Failure>;

pub fn main_with_args<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI with explicit output streams; returns the exit code.
pub fn run<I: IntoIterator<Item = OsString>>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Eval { profile, mechanism } => cmd_eval(&profile, &mechanism, out),
        Command::Frontier { setting, sigma_grid, mu_grid, tau_grid, out: path, schema_version } => {
            cmd_frontier(&setting, &sigma_grid, &mu_grid, &tau_grid, path.as_ref(), schema_version, out)
        }
        Command::Oracle { shape, mechanism, base, liveness } => cmd_oracle(&shape, &mechanism, &base, liveness, out),
        Command::Simulate { kind, template, n_plus, trials, seed, mechanism, base, alpha_prime, c, epsilon, out: path } => {
            let opts = SimOptions { kind, template, n_plus, trials, seed, mechanism, base, alpha_prime, c, epsilon, out: path };
            cmd_simulate(&opts, out)
        }
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn parse_mechanism(spec: &str, what: &str) -> std::result::Result<Mechanism, Failure> {
    spec.parse::<Mechanism>().map_err(|e| Failure(EXIT_INPUT, format!("--{what}: {e}")))
}

fn parse_q(s: &str, what: &str) -> std::result::Result<Q, Failure> {
    rational::parse(s).map_err(|e| Failure(EXIT_INPUT, format!("--{what}: {e}")))
}

fn read_profile(path: &PathBuf) -> std::result::Result<crate::population::Profile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    Ok(format::parse_profile(&text)?)
}

fn cmd_eval(path: &PathBuf, spec: &str, out: &mut dyn Write) -> CmdResult {
    let profile = read_profile(path)?;
    let mech = parse_mechanism(spec, "mechanism")?;
    let ev = rules::evaluate(&mech, &profile)?;
    let d = profile.domain();
    let mut text = String::new();
    text.push_str(&format!("mechanism: {mech}\n"));
    text.push_str(&format!("winner: {}\n", d.label(&ev.winner)));
    text.push_str(&format!("visible: {}\n", ev.tally.visible));
    text.push_str(&format!("q: {}\n", rational::format(&ev.tally.q)));
    text.push_str("tally:\n");
    for (b, m) in &ev.tally.cast {
        text.push_str(&format!("  {}: {}\n", format::ballot_label(d, b), rational::format(m)));
    }
    out.write_all(text.as_bytes()).map_err(io_fail)?;
    Ok(EXIT_OK)
}

fn cmd_frontier(
    settings: &str,
    sigma_grid: &str,
    mu_grid: &str,
    tau_grid: &str,
    path: Option<&PathBuf>,
    schema_version: u32,
    out: &mut dyn Write,
) -> CmdResult {
    if schema_version != format::FRONTIER_SCHEMA_VERSION {
        return Err(Failure(EXIT_INPUT, format!("--schema-version: only {} is supported", format::FRONTIER_SCHEMA_VERSION)));
    }
    let settings = settings.split(',').map(|s| s.trim().parse::<Setting>()).collect::<Result<Vec<_>>>()?;
    let grid = |s: &str, what: &str| format::parse_grid(s).map_err(|e| Failure(EXIT_INPUT, format!("--{what}: {e}")));
    let (sigmas, mus, taus) = (grid(sigma_grid, "sigma-grid")?, grid(mu_grid, "mu-grid")?, grid(tau_grid, "tau-grid")?);
    let mut rows = Vec::with_capacity(settings.len() * sigmas.len() * mus.len() * taus.len());
    for &s in &settings {
        for sigma in &sigmas {
            for mu in &mus {
                for tau in &taus {
                    rows.push(format::FrontierRow::compute(s, sigma, mu, tau));
                }
            }
        }
    }
    match path {
        Some(p) => {
            let f = fs::File::create(p).map_err(io_fail)?;
            format::write_frontier(std::io::BufWriter::new(f), &rows).map_err(io_fail)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), p.display()).map_err(io_fail)?;
        }
        None => format::write_frontier(out, &rows).map_err(io_fail)?,
    }
    Ok(EXIT_OK)
}

/// Reads the enumeration cap from the environment.
pub fn enum_cap() -> usize {
    std::env::var(ENUM_CAP_VAR).ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_ENUM_CAP)
}

/// `τ` of the equivalent RE majority, if the closed form covers `mech`.
fn formula_tau(mech: &Mechanism) -> Option<Q> {
    match (&mech.base, mech.participation) {
        (_, Participation::Proxy) => None,
        (BaseRule::Majority, _) => Some(mech.re_tau.clone()),
        (BaseRule::Supermajority(t), _) if mech.re_tau == rational::zero() => Some(t * rational::int(2)),
        _ => None,
    }
}

fn cmd_oracle(shape: &str, spec: &str, base_spec: &str, liveness: bool, out: &mut dyn Write) -> CmdResult {
    let parts: Vec<&str> = shape.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Failure(EXIT_INPUT, "--shape: expected n,sigma,mu".into()));
    }
    let n: usize = parts[0].parse().map_err(|_| Failure(EXIT_INPUT, format!("--shape: bad voter count {:?}", parts[0])))?;
    let sigma = parse_q(parts[1], "shape")?;
    let mu = parse_q(parts[2], "shape")?;
    let cap = enum_cap();
    if n > cap {
        return Err(Failure(EXIT_BUDGET, format!("n = {n} exceeds the enumeration cap {cap} (set {ENUM_CAP_VAR})")));
    }
    let shape = Shape::from_fractions(n, &sigma, &mu)?;
    let mech = parse_mechanism(spec, "mechanism")?;
    let base = parse_mechanism(base_spec, "base")?;
    let domain = DomainSpec::binary("r", "p")?;
    let formula_mu = if mech.participation == Participation::Full { rational::zero() } else { mu.clone() };
    let tau = formula_tau(&mech);
    let mut text = format!("shape: n={n} sybils={} passives={}\nmechanism: {mech}\n", shape.sybils, shape.passives);
    let mut mismatch = false;
    if liveness {
        let units = if mech.participation == Participation::ActiveOnly { shape.active_honest() } else { shape.honest() };
        let finite = verifier::min_beta(&mech, shape, &domain, &Alternative::Choice(1))?;
        text.push_str(&format!("finite_beta: {}\n", finite.as_ref().map(rational::format).unwrap_or_else(|| "unreachable".into())));
        text.push_str(&format!("budget_unit: 1/{units}\n"));
        match tau {
            Some(t) => {
                let th = guarantees::liveness_threshold(Setting::ArbitraryBinary, &sigma, &formula_mu, &t)?;
                let m = rational::from_usize(units);
                let adjusted = rational::from_usize(rational::floor_count(&(&th * &m)) + 1) / m;
                text.push_str(&format!("formula_beta: {}\nadjusted_beta: {}\n", rational::format(&th), rational::format(&adjusted)));
                if th <= rational::one() {
                    let ok = finite.as_ref() == Some(&adjusted);
                    mismatch = !ok;
                    text.push_str(&format!("check: {}\n", if ok { "match" } else { "MISMATCH" }));
                } else {
                    text.push_str("check: skipped (closed form covers beta <= 1 only)\n");
                }
            }
            None => text.push_str("formula_beta: n/a\n"),
        }
    } else {
        let finite = verifier::min_alpha(&mech, &base, shape, &domain)?;
        text.push_str(&format!("base: {base}\nfinite_alpha: {}\n", rational::format(&finite)));
        match tau {
            Some(t) if base.base == BaseRule::Majority && base.re_tau == rational::zero() => {
                let th = guarantees::safety_threshold(Setting::ArbitraryBinary, &sigma, &formula_mu, &t)?;
                let h = rational::from_usize(shape.honest());
                let adjusted = Q::from_integer(rational::ceil_int(&(&th * &h))) / h;
                let ok = adjusted == finite;
                mismatch = !ok;
                text.push_str(&format!(
                    "formula_alpha: {}\nadjusted_alpha: {}\ncheck: {}\n",
                    rational::format(&th),
                    rational::format(&adjusted),
                    if ok { "match" } else { "MISMATCH" }
                ));
            }
            _ => text.push_str("formula_alpha: n/a\n"),
        }
    }
    out.write_all(text.as_bytes()).map_err(io_fail)?;
    Ok(if mismatch { EXIT_MISMATCH } else { EXIT_OK })
}

struct SimOptions {
    kind: SimKind,
    template: PathBuf,
    n_plus: String,
    trials: usize,
    seed: u64,
    mechanism: Option<String>,
    base: Option<String>,
    alpha_prime: Option<String>,
    c: Option<String>,
    epsilon: Option<String>,
    out: Option<PathBuf>,
}

fn required<'a>(v: &'a Option<String>, what: &str) -> std::result::Result<&'a str, Failure> {
    v.as_deref().ok_or_else(|| Failure(EXIT_INPUT, format!("--{what} is required for this kind")))
}

fn cmd_simulate(o: &SimOptions, out: &mut dyn Write) -> CmdResult {
    if o.trials == 0 {
        return Err(Failure(EXIT_INPUT, "--trials must be positive".into()));
    }
    let n_plus: Vec<usize> = o
        .n_plus
        .split(',')
        .map(|s| s.trim().parse::<usize>().ok().filter(|&k| k > 0))
        .collect::<Option<_>>()
        .ok_or_else(|| Failure(EXIT_INPUT, "--n-plus: expected positive integers".into()))?;
    let template = read_profile(&o.template)?;
    let mut rows: Vec<(usize, TrialStats)> = Vec::with_capacity(n_plus.len());
    for &k in &n_plus {
        let stats = match o.kind {
            SimKind::Hoeffding => {
                let eps = parse_q(required(&o.epsilon, "epsilon")?, "epsilon")?;
                montecarlo::hoeffding_diagnostic(&template, k, &eps, o.trials, o.seed)?
            }
            SimKind::Whp => {
                let mechanism = parse_mechanism(o.mechanism.as_deref().unwrap_or("mj mode:active"), "mechanism")?;
                let base = parse_mechanism(o.base.as_deref().unwrap_or("mj"), "base")?;
                let alpha_prime = parse_q(required(&o.alpha_prime, "alpha-prime")?, "alpha-prime")?;
                let exp = Experiment { template: template.clone(), mechanism, base, alpha_prime, trials: o.trials, seed: o.seed, n_plus: k };
                montecarlo::run_safety_whp(&exp)?
            }
            SimKind::Proxy => {
                let default = format!("md re:{} mode:proxy", rational::format(&template.sigma()));
                let mechanism = parse_mechanism(o.mechanism.as_deref().unwrap_or(&default), "mechanism")?;
                let base = parse_mechanism(o.base.as_deref().unwrap_or("md"), "base")?;
                let c = parse_q(required(&o.c, "c")?, "c")?;
                let exp = Experiment { template: template.clone(), mechanism, base, alpha_prime: c.clone(), trials: o.trials, seed: o.seed, n_plus: k };
                montecarlo::run_proxy_whp(&exp, &c)?
            }
        };
        rows.push((k, stats));
    }
    let kind = match o.kind {
        SimKind::Whp => "whp",
        SimKind::Proxy => "proxy",
        SimKind::Hoeffding => "hoeffding",
    };
    let mut text = String::new();
    let mut all_pass = true;
    for (k, s) in &rows {
        all_pass &= s.passes();
        text.push_str(&format!(
            "kind={kind} n_plus={k} trials={} seed={} violations={} rate={} ({:.6}) bound={:.6} se={:.6} gate={}",
            s.trials,
            o.seed,
            s.violation_count,
            rational::format(&s.empirical_rate),
            s.rate(),
            s.bound_value,
            s.standard_error,
            if s.passes() { "PASS" } else { "FAIL" }
        ));
        if let Some(e) = s.event_count {
            text.push_str(&format!(" y_c={e}"));
        }
        text.push('\n');
    }
    if rows.len() > 1 {
        let stats: Vec<TrialStats> = rows.iter().map(|r| r.1.clone()).collect();
        let ok = montecarlo::nonincreasing_within_se(&stats);
        all_pass &= ok;
        text.push_str(&format!("decay: {}\n", if ok { "PASS" } else { "FAIL" }));
    }
    if let Some(p) = &o.out {
        let f = fs::File::create(p).map_err(io_fail)?;
        let mut w = csv::Writer::from_writer(f);
        let io = |e: csv::Error| Failure(EXIT_INPUT, e.to_string());
        w.write_record(["schema_version", "kind", "n_plus", "trials", "violations", "rate", "rate_dec", "bound", "se", "gate"]).map_err(io)?;
        for (k, s) in &rows {
            w.write_record([
                "1".to_string(),
                kind.to_string(),
                k.to_string(),
                s.trials.to_string(),
                s.violation_count.to_string(),
                rational::format(&s.empirical_rate),
                format!("{:.6}", s.rate()),
                format!("{:.6}", s.bound_value),
                format!("{:.6}", s.standard_error),
                (if s.passes() { "1" } else { "0" }).to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(io_fail)?;
    }
    out.write_all(text.as_bytes()).map_err(io_fail)?;
    Ok(if all_pass { EXIT_OK } else { EXIT_STATISTICAL })
}
