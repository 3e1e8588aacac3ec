//! Command-line front end. Every subcommand reads JSON, calls the library,
//! and writes JSON to stdout.
//!
//! Exit codes: 0 on success, 1 on domain errors (reported as JSON on
//! stderr), 2 on usage errors.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::behaviour::{Behaviour, SettingsDistribution, Tolerance, DEFAULT_TOL, TOL_ENV_VAR};
use crate::error::{BellError, Result};
use crate::schema::{BehaviourDoc, ModelDoc};
use crate::{chsh, hvmodel, polytope, quantum, sim};

#[derive(Debug, Parser)]
#[command(name = "bellmeter", version, about = "Measure locality and free choice in Bell experiments")]
pub struct Cli {
    /// Numerical tolerance for validity and classification checks.
    #[arg(long, global = true, env = TOL_ENV_VAR, default_value_t = DEFAULT_TOL)]
    pub tol: f64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Formula,
    Lp,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report whether a behaviour is normalized and non-signalling.
    Check { input: PathBuf },
    /// The four CHSH values of a two-setting behaviour.
    Chsh { input: PathBuf },
    /// Local/free fraction by closed form, linear program, or both.
    Measure {
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        input: PathBuf,
    },
    /// Split a two-setting behaviour into a local part and one PR-box.
    Decompose { input: PathBuf },
    /// Fully local, fully non-free model of a behaviour.
    Dilate { input: PathBuf },
    /// Classify the hidden values of a model.
    Classify { input: PathBuf },
    /// Born-rule behaviour of a two-qubit state measured in the x-z plane.
    Quantum {
        #[arg(long)]
        theta: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alice: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        bob: Vec<f64>,
    },
    /// Chained Bell expression on the maximally entangled state.
    Chained {
        #[arg(long)]
        m: usize,
    },
    /// Monte Carlo run of a model.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        /// `uniform`, or a JSON file holding an `[x][y]` settings array.
        #[arg(long)]
        settings: Option<String>,
    },
}

fn read_input(path: &Path, stdin: &mut dyn Read) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        stdin.read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(std::fs::read_to_string(path)?)
    }
}

fn load_behaviour(
    path: &Path,
    stdin: &mut dyn Read,
    tol: Tolerance,
) -> Result<(Behaviour, Option<SettingsDistribution>)> {
    let doc: BehaviourDoc = serde_json::from_str(&read_input(path, stdin)?)?;
    Ok((doc.behaviour(tol)?, doc.settings(tol)?))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn behaviour_value(b: &Behaviour, s: Option<&SettingsDistribution>) -> Value {
    to_value(&BehaviourDoc::new(b, s))
}

fn check(b: &Behaviour, tol: Tolerance) -> Value {
    let report = b.validate(tol);
    let mut out = json!({
        "valid": report.is_valid(),
        "non_signalling": report.is_valid() && b.is_non_signalling(tol),
    });
    if !report.is_valid() {
        out["violations"] = to_value(&report.violations);
    } else if let Some(w) = b.signalling_witness(tol) {
        out["signalling_witness"] = to_value(&w);
    }
    out
}

fn measure(b: &Behaviour, method: Method, tol: Tolerance) -> Result<Value> {
    b.ensure_non_signalling(tol)?;
    let mut out = json!({});
    let mut formula = None;
    let mut lp = None;
    if matches!(method, Method::Formula | Method::Both) {
        let r = chsh::chsh_report(b, tol)?;
        formula = Some(r.measure);
        out["formula"] = to_value(&r);
    }
    if matches!(method, Method::Lp | Method::Both) {
        let lc = polytope::local_content_lp(b, tol)?;
        lp = Some(lc.mu);
        out["lp"] = json!({
            "mu": lc.mu,
            "weights": to_value(&lc.weights),
            "remainder": lc.remainder.as_ref().map(|r| behaviour_value(r, None)),
        });
    }
    if let (Some(f), Some(l)) = (formula, lp) {
        out["difference"] = json!((f - l).abs());
    }
    Ok(out)
}

fn decompose(b: &Behaviour, tol: Tolerance) -> Result<Value> {
    let d = polytope::split_local_pr(b, tol)?;
    Ok(json!({
        "p": d.p,
        "pr_index": d.pr_index,
        "local_part": behaviour_value(&d.local_part, None),
        "pr_part": d.pr_part.as_ref().map(|p| behaviour_value(p, None)),
    }))
}

fn classify(m: &hvmodel::HvModel, tol: Tolerance) -> Result<Value> {
    let settings = m.reconstruct_settings(tol)?;
    Ok(json!({
        "lambda_count": m.lambda_count(),
        "classification": to_value(&m.classify(tol)),
        "measures": to_value(&m.measures(tol)),
        "behaviour": behaviour_value(&m.reconstruct_behaviour(), Some(&settings)),
    }))
}

fn chained(m: usize, tol: Tolerance) -> Result<Value> {
    let (b, report) = quantum::chained_report(m, tol)?;
    let mut out = to_value(&report);
    out["behaviour"] = behaviour_value(&b, None);
    Ok(out)
}

fn simulation_config(
    m: &hvmodel::HvModel,
    trials: u64,
    seed: u64,
    settings: Option<&str>,
    tol: Tolerance,
) -> Result<sim::SimConfig> {
    let cfg = sim::SimConfig::new(trials, seed);
    let (ma, mb) = (m.num_settings_a(), m.num_settings_b());
    Ok(match settings {
        None => cfg,
        Some("uniform") => cfg.with_external(SettingsDistribution::uniform(ma, mb)?),
        Some(path) => {
            let rows: Vec<Vec<f64>> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            if rows.len() != ma || rows.iter().any(|r| r.len() != mb) {
                return Err(BellError::Structural(format!(
                    "settings file must hold a {ma}x{mb} array"
                )));
            }
            cfg.with_external(SettingsDistribution::new(ma, mb, rows.concat(), tol)?)
        }
    })
}

fn execute(cmd: &Command, tol: Tolerance, stdin: &mut dyn Read) -> Result<Value> {
    match cmd {
        Command::Check { input } => Ok(check(&load_behaviour(input, stdin, tol)?.0, tol)),
        Command::Chsh { input } => {
            let (b, _) = load_behaviour(input, stdin, tol)?;
            b.ensure_valid(tol)?;
            let s = chsh::chsh_values(&b)?;
            let non_signalling = b.is_non_signalling(tol);
            let s_max = chsh::s_max(&s);
            Ok(json!({
                "s_values": s,
                "s_max": s_max,
                "non_signalling": non_signalling,
                "measure": if non_signalling { Some(chsh::measure_from_smax_tol(s_max, tol)?) } else { None },
            }))
        }
        Command::Measure { method, input } => measure(&load_behaviour(input, stdin, tol)?.0, *method, tol),
        Command::Decompose { input } => decompose(&load_behaviour(input, stdin, tol)?.0, tol),
        Command::Dilate { input } => {
            let (b, s) = load_behaviour(input, stdin, tol)?;
            let s = match s {
                Some(s) => s,
                None => SettingsDistribution::uniform(b.num_settings_a(), b.num_settings_b())?,
            };
            Ok(to_value(&ModelDoc::new(&hvmodel::dilate(&b, &s, tol)?)))
        }
        Command::Classify { input } => {
            let doc: ModelDoc = serde_json::from_str(&read_input(input, stdin)?)?;
            classify(&doc.model(tol)?, tol)
        }
        Command::Quantum { theta, alice, bob } => {
            let state = quantum::TwoQubitPureState::new(*theta)?;
            let b = quantum::born_behaviour(&state, &quantum::bases(alice), &quantum::bases(bob))?;
            Ok(behaviour_value(&b, None))
        }
        Command::Chained { m } => chained(*m, tol),
        Command::Simulate {
            model,
            trials,
            seed,
            settings,
        } => {
            let doc: ModelDoc = serde_json::from_str(&read_input(model, stdin)?)?;
            let m = doc.model(tol)?;
            let cfg = simulation_config(&m, *trials, *seed, settings.as_deref(), tol)?;
            Ok(to_value(&sim::run(&m, &cfg, tol)?))
        }
    }
}

fn error_json(e: &BellError) -> Value {
    json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let tol = match Tolerance::new(cli.tol) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "{}", error_json(&e));
            return 2;
        }
    };
    log::debug!("running {:?} with tolerance {}", cli.command, tol.eps());
    match execute(&cli.command, tol, stdin) {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).expect("json value serializes");
            if writeln!(out, "{text}").is_err() {
                return 1;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "{}", error_json(&e));
            1
        }
    }
}
