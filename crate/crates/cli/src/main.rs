use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use classicality::error::Error;
use classicality::linalg::max_component_statistic;
use classicality::measurements::*;
use classicality::model_search::*;
use classicality::nondisturbance::*;
use classicality::rng::{stream, Stream};
use classicality::thresholds::*;
use classicality::witness::*;

#[derive(Parser)]
#[command(name = "classicality", version, about = "Classical simulation models for finite sets of quantum measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Projective-simulability threshold v*(d), optionally the loss/noise curve as CSV.
    Threshold {
        #[arg(long)]
        d: usize,
        /// `start:stop:step` grid of t values; prints `t,v,eta`.
        #[arg(long)]
        curve: Option<String>,
    },
    /// Best classical model over an ensemble of device bases.
    Search {
        #[command(flatten)]
        set: SetArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Write the model as JSON to this path.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Witness value, classical bound and critical visibility.
    Witness {
        #[command(flatten)]
        set: SetArgs,
        /// Witness coefficients as JSON; defaults to state discrimination.
        #[arg(long, conflicts_with = "state_discrimination")]
        spec: Option<PathBuf>,
        #[arg(long)]
        state_discrimination: bool,
        /// Use the SDP relaxation even for qubits.
        #[arg(long)]
        force_sdp: bool,
    },
    /// Lüders non-disturbance and joint-measurability residuals of a classical model.
    Nondisturb {
        #[command(flatten)]
        set: SetArgs,
        #[arg(long, default_value_t = 0)]
        x_a: usize,
        #[arg(long, default_value_t = 1)]
        x_b: usize,
        /// Load the classical model instead of searching for one.
        #[arg(long, conflicts_with_all = ["pair_model", "self_sequence"])]
        model: Option<PathBuf>,
        /// Use the two-device model of a pair of bases at v = 1/2.
        #[arg(long, conflicts_with = "self_sequence")]
        pair_model: bool,
        /// Measure the settings in sequence with no shared randomness.
        #[arg(long)]
        self_sequence: bool,
        /// Also report the direct-sum extension of setting x_a.
        #[arg(long)]
        extend: bool,
        #[command(flatten)]
        ensemble: EnsembleArgs,
    },
    /// Monte-Carlo check of the Haar statistic E[max_a |u_a|²] = H_d/d.
    McCheck {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Mub,
    Sic5,
    Sic,
    BinarizedSic,
    Trine,
}

#[derive(Args)]
struct SetArgs {
    /// Measurement set as JSON.
    #[arg(long, conflicts_with = "family")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    /// Depolarize the set to this visibility first.
    #[arg(long)]
    visibility: Option<f64>,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Haar-random bases added to the eigenbases of the set.
    #[arg(long, default_value_t = 2000)]
    n_lambda: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Column-generation round limit.
    #[arg(long, default_value_t = 100_000)]
    max_rounds: usize,
}

impl EnsembleArgs {
    fn options(&self) -> SearchOptions {
        SearchOptions { max_rounds: self.max_rounds, ..SearchOptions::default() }
    }
}

enum Failure {
    Input(String),
    Solver(String),
    Guard(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Guard(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Solver(m) | Failure::Guard(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver(_) => Failure::Solver(e.to_string()),
            Error::StrategyOverflow { .. } => Failure::Guard(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<String, Failure>;

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

/// Rounds to 12 significant digits; non-finite values become `null`.
fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    json!(rounded)
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_set(args: &SetArgs) -> std::result::Result<MeasurementSet, Failure> {
    let set = load_clean_set(args)?;
    match args.visibility {
        Some(v) => Ok(depolarize(&set, v)?),
        None => Ok(set),
    }
}

/// The set before `--visibility` is applied.
fn load_clean_set(args: &SetArgs) -> std::result::Result<MeasurementSet, Failure> {
    Ok(match (&args.input, args.family) {
        (Some(path), _) => MeasurementSet::from_json(&read(path)?)?,
        (None, Some(Family::Mub)) => {
            let d = args.d.ok_or_else(|| input("--family mub needs --d"))?;
            mub_set(d, args.count.unwrap_or(2))?
        }
        (None, Some(Family::Sic5)) => sic_five_tetrahedra(),
        (None, Some(Family::Sic)) => MeasurementSet::from_povms(&[sic_tetrahedron()])?,
        (None, Some(Family::BinarizedSic)) => binarized_sic(),
        (None, Some(Family::Trine)) => MeasurementSet::from_povms(&[trine()])?,
        (None, None) => return Err(input("give --input or --family")),
    })
}

fn ensemble(
    set: &MeasurementSet,
    args: &EnsembleArgs,
) -> std::result::Result<Vec<classicality::linalg::ComplexMatrix>, Failure> {
    if args.n_lambda == 0 {
        return Ok(target_bases(set)?);
    }
    let seed = args.seed.ok_or_else(|| input("--seed is required when --n-lambda > 0"))?;
    Ok(default_ensemble(set, args.n_lambda, &mut stream(seed, Stream::Ensemble))?)
}

fn parse_grid(spec: &str) -> std::result::Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| input(format!("--curve expects start:stop:step, got {spec:?}")))?;
    let [start, stop, step] = parts[..] else {
        return Err(input(format!("--curve expects start:stop:step, got {spec:?}")));
    };
    if !(step > 0.0) || stop < start {
        return Err(input("--curve needs step > 0 and stop ≥ start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

fn cmd_threshold(d: usize, curve: Option<&str>) -> Outcome {
    let Some(spec) = curve else {
        return Ok(render(&json!({ "d": d, "v_star": num(classicality_threshold(d)?) })));
    };
    let mut out = String::from("t,v,eta\n");
    for t in parse_grid(spec)? {
        match loss_noise_point(d, t) {
            Ok(p) => {
                let row = [p.t, p.v, p.eta].map(|x| num(x).to_string());
                writeln!(out, "{}", row.join(",")).expect("string write");
            }
            Err(Error::Unsupported(msg)) => eprintln!("skipping t = {t}: {msg}"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn cmd_search(set: &SetArgs, ens: &EnsembleArgs, model_out: Option<&Path>) -> Outcome {
    let m = load_set(set)?;
    let bases = ensemble(&m, ens)?;
    let report = search_with_options(&m, &bases, ens.options())?;
    let residual = reconstruct(&report.model, &m)?;
    if let Some(path) = model_out {
        std::fs::write(path, report.model.to_json()).map_err(|e| input(format!("{}: {e}", path.display())))?;
    }
    Ok(render(&json!({
        "v_star": num(report.v),
        "residual": num(residual),
        "certified_gap": num(report.certified_gap),
        "ensemble_size": bases.len(),
        "devices": report.model.num_devices(),
        "rounds": report.rounds,
        "model": model_out.map(|p| p.display().to_string()),
    })))
}

fn cmd_witness(set: &SetArgs, spec_path: Option<&Path>, force_sdp: bool) -> Outcome {
    // the witness is fixed by the noiseless set and evaluated on the noisy one
    let clean = load_clean_set(set)?;
    let m = load_set(set)?;
    let spec = match spec_path {
        Some(path) => WitnessSpec::from_json(&read(path)?, &clean)?,
        None => state_discrimination_spec(&clean)?,
    };
    let w = witness_value(&spec, &m)?;
    let report = beta_report(&score_operators(&spec), force_sdp)?;
    let cv = critical_visibility(&spec, &m, report.beta)?;
    Ok(render(&json!({
        "W": num(w),
        "beta": num(report.beta),
        "exact": m.dim() == 2 && !force_sdp,
        "v_crit": num(cv.v),
        "violated": cv.violation,
        "verdict": if cv.violation { "VIOLATED" } else { "NOT VIOLATED" },
        "strategies": report.strategies.to_string(),
        "evaluated": report.unique,
        "maximizer": report.strategy.table,
    })))
}

struct NondisturbArgs<'a> {
    set: &'a SetArgs,
    x_a: usize,
    x_b: usize,
    model: Option<&'a Path>,
    pair_model: bool,
    self_sequence: bool,
    extend: bool,
    ensemble: &'a EnsembleArgs,
}

fn cmd_nondisturb(a: NondisturbArgs) -> Outcome {
    let m = load_set(a.set)?;
    if a.x_a >= m.settings() || a.x_b >= m.settings() {
        return Err(input(format!("settings ({}, {}) out of range for {} settings", a.x_a, a.x_b, m.settings())));
    }
    let mut verdicts = Vec::new();
    let mut report = serde_json::Map::new();
    if a.self_sequence {
        let s = SequentialScenario::new(vec![1.0], vec![m.povm(a.x_a)], vec![m.povm(a.x_b)])?;
        let r = luders_nondisturbance_residual(&s)?;
        report.insert("classical_model_found".into(), json!(false));
        report.insert("luders_residual".into(), num(r));
        report.insert("jm_marginal_residual".into(), Value::Null);
        verdicts.push(luders_verdict(r));
    } else {
        let model = if let Some(path) = a.model {
            ClassicalModel::from_json(&read(path)?)?
        } else if a.pair_model {
            let bases = target_bases(&m)?;
            if bases.len() != m.settings() || m.settings() < 2 {
                return Err(input("--pair-model needs a set of rank-one projective settings"));
            }
            pair_half_noise_model(&bases[a.x_a], &bases[a.x_b])?
        } else {
            search_with_options(&m, &ensemble(&m, a.ensemble)?, a.ensemble.options())?.model
        };
        // the pair model covers only the two selected settings
        let (xa, xb, covered) = if a.pair_model {
            (0, 1, m.select(&[a.x_a, a.x_b])?)
        } else {
            (a.x_a, a.x_b, m.clone())
        };
        let found = reconstruct(&model, &covered)? <= 1e-7;
        let lr = luders_nondisturbance_residual(&scenario_from_model(&model, xa, xb)?)?;
        let jm = jm_parent_from_model(&model, &covered)?.marginal_residual();
        report.insert("classical_model_found".into(), json!(found));
        report.insert("v".into(), num(model.v));
        report.insert("luders_residual".into(), num(lr));
        report.insert("jm_marginal_residual".into(), num(jm));
        verdicts.push(if found {
            format!("classical model reproduces the set at v = {}", num(model.v))
        } else {
            "model does not reproduce the set".to_string()
        });
        verdicts.push(luders_verdict(lr));
        verdicts.push(if jm <= 1e-7 { "jointly measurable" } else { "JM parent marginals deviate" }.to_string());
    }
    if a.extend {
        let inner = m.povm(a.x_a);
        let r = extended_instrument_residual(&inner);
        report.insert("extended".into(), json!({ "dim": extend_direct_sum(&inner).dim(), "residual": num(r) }));
        verdicts.push(format!("extended setting {} is Lüders-nondisturbing in dimension {}", a.x_a, inner.dim() + inner.outcomes()));
    }
    report.insert("verdicts".into(), json!(verdicts));
    Ok(render(&Value::Object(report)))
}

fn luders_verdict(r: f64) -> String {
    if r > DISTURBANCE_THRESHOLD { "Lüders-disturbing" } else { "Lüders-nondisturbing" }.to_string()
}

fn cmd_mc_check(d: usize, samples: usize, seed: Option<u64>) -> Outcome {
    let seed = seed.ok_or_else(|| input("--seed is required"))?;
    let (mean, se) = max_component_statistic(d, samples, &mut stream(seed, Stream::MonteCarlo))?;
    let expected = harmonic(d)? / d as f64;
    let z = if se > 0.0 { (mean - expected) / se } else if mean == expected { 0.0 } else { f64::INFINITY };
    Ok(render(&json!({
        "d": d,
        "samples": samples,
        "mean": num(mean),
        "standard_error": num(se),
        "expected": num(expected),
        "z": num(z),
    })))
}

fn set_threads() -> std::result::Result<(), Failure> {
    let Ok(value) = std::env::var("CLASSICALITY_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| input(format!("CLASSICALITY_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| input(e.to_string()))
}

fn run(cli: Cli) -> Outcome {
    set_threads()?;
    match cli.command {
        Command::Threshold { d, curve } => cmd_threshold(d, curve.as_deref()),
        Command::Search { set, ensemble, model_out } => cmd_search(&set, &ensemble, model_out.as_deref()),
        Command::Witness { set, spec, force_sdp, .. } => cmd_witness(&set, spec.as_deref(), force_sdp),
        Command::Nondisturb { set, x_a, x_b, model, pair_model, self_sequence, extend, ensemble } => {
            cmd_nondisturb(NondisturbArgs {
                set: &set,
                x_a,
                x_b,
                model: model.as_deref(),
                pair_model,
                self_sequence,
                extend,
                ensemble: &ensemble,
            })
        }
        Command::McCheck { d, samples, seed } => cmd_mc_check(d, samples, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(2.0f64.sqrt()).to_string(), "1.41421356237");
        assert_eq!(num(0.5).to_string(), "0.5");
        assert_eq!(num(1.0 / 3.0e9).to_string(), "3.33333333333e-10");
        assert_eq!(num(f64::NAN), Value::Null);
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.2:0.9:0.01").map_err(|f| f.message().to_string()).unwrap();
        assert_eq!(g.len(), 71);
        assert!((g[70] - 0.9).abs() < 1e-12);
        assert!(parse_grid("0.2:0.9").is_err());
        assert!(parse_grid("0.2:0.9:0").is_err());
        assert!(parse_grid("a:b:c").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::StrategyOverflow { count: 2, limit: 1 }).code(), 4);
        assert_eq!(Failure::from(Error::Parse("x".into())).code(), 2);
    }
}
