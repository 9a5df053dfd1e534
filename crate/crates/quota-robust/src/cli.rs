//! Command-line surface.
//!
//! Commands are deterministic given their files and flags; JSON goes to
//! stdout newline-terminated with sorted keys, CSV columns round-trip
//! through `f64` parsing exactly. Exit codes: 0 success, 2 validation
//! failure, 3 not a binary-action model, 4 monotonicity violation,
//! 5 failed verification checks.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::adversary::RuleTable;
use crate::model::{full_revelation, no_information, FiniteModel, Quota, SenderUtility, SignalStructure};
use crate::{binary, checks, game, sweep, Error};

/// Exit code and captured output of one command invocation.
#[derive(Debug)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Parser)]
#[command(
    name = "quota-robust",
    about = "Quota rules for receiver-commitment persuasion: exact solver and verifier",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal quota and worst-case regret for a binary-action model.
    SolveQuota {
        /// Model JSON file.
        model: PathBuf,
        /// Regret weight in [0, 1); 0.5 is plain regret, 0 is max-min.
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
    },
    /// CSV of left/right biased errors over a quota grid.
    RegretCurve {
        model: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Number of evenly spaced quota grid points (at least 2).
        #[arg(long = "q-grid", default_value_t = 101)]
        q_grid: u32,
    },
    /// Comparative-statics sweep from a spec file; asserts the predicted
    /// monotone direction before emitting CSV.
    Statics {
        /// Sweep spec JSON file.
        spec: PathBuf,
    },
    /// Run the verification suite and report per-check margins.
    Verify {
        model: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        trials: u32,
        /// Override the utility range width in the continuity bound
        /// (negative control; defaults to the model's actual width).
        #[arg(long)]
        lipschitz_width: Option<f64>,
    },
    /// Play the game analytically and by seeded simulation.
    Simulate {
        model: PathBuf,
        /// Rule spec JSON file.
        #[arg(long)]
        rule: PathBuf,
        /// Sender utility JSON file (array of per-action payoffs).
        #[arg(long)]
        sender: PathBuf,
        /// Menu JSON file.
        #[arg(long)]
        menu: PathBuf,
        #[arg(long)]
        rounds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
    },
}

enum CmdError {
    Validation(String),
    NotBinary,
    Monotonicity(String),
    ChecksFailed(String),
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotBinaryAction => CmdError::NotBinary,
            other => CmdError::Validation(other.to_string()),
        }
    }
}

type CmdResult = Result<String, CmdError>;

/// Runs a command line (without the binary name) and captures the result.
pub fn run(args: &[String]) -> CliOutput {
    let mut argv = vec!["quota-robust".to_string()];
    argv.extend_from_slice(args);
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliOutput {
                    code: 0,
                    stdout: rendered,
                    stderr: String::new(),
                },
                _ => CliOutput {
                    code: 2,
                    stdout: String::new(),
                    stderr: rendered,
                },
            };
        }
    };
    let result = match cli.command {
        Command::SolveQuota { model, gamma } => cmd_solve_quota(&model, gamma),
        Command::RegretCurve {
            model,
            gamma,
            q_grid,
        } => cmd_regret_curve(&model, gamma, q_grid),
        Command::Statics { spec } => cmd_statics(&spec),
        Command::Verify {
            model,
            gamma,
            seed,
            trials,
            lipschitz_width,
        } => cmd_verify(&model, gamma, seed, trials, lipschitz_width),
        Command::Simulate {
            model,
            rule,
            sender,
            menu,
            rounds,
            seed,
            gamma,
        } => cmd_simulate(&model, &rule, &sender, &menu, rounds, seed, gamma),
    };
    match result {
        Ok(stdout) => CliOutput {
            code: 0,
            stdout,
            stderr: String::new(),
        },
        Err(CmdError::Validation(msg)) => CliOutput {
            code: 2,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        },
        Err(CmdError::NotBinary) => CliOutput {
            code: 3,
            stdout: String::new(),
            stderr: "error: this command requires a binary-action model\n".into(),
        },
        Err(CmdError::Monotonicity(msg)) => CliOutput {
            code: 4,
            stdout: String::new(),
            stderr: format!("monotonicity violation: {msg}\n"),
        },
        Err(CmdError::ChecksFailed(report)) => CliOutput {
            code: 5,
            stdout: report,
            stderr: "error: verification checks failed\n".into(),
        },
    }
}

/// Prints the captured output to the real stdio and returns the exit code.
pub fn run_to_stdio(args: &[String]) -> i32 {
    let out = run(args);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    out.code
}

fn read_file(path: &Path) -> Result<String, CmdError> {
    std::fs::read_to_string(path)
        .map_err(|e| CmdError::Validation(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<FiniteModel, CmdError> {
    let text = read_file(path)?;
    FiniteModel::from_json(&text)
        .map_err(|e| CmdError::Validation(format!("{}: {e}", path.display())))
}

/// Serializes with sorted keys (the default map is ordered) and a trailing
/// newline. Non-finite floats become nulls.
fn to_json_line<T: serde::Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("serializable report");
    format!("{value}\n")
}

fn cmd_solve_quota(model_path: &Path, gamma: f64) -> CmdResult {
    let model = load_model(model_path)?;
    let reduction = model.to_binary().map_err(CmdError::from)?;
    let (q_star, regret_norm) =
        binary::optimal_quota(&reduction.prior, gamma).map_err(CmdError::from)?;
    let left = binary::left_error(&reduction.prior, q_star, gamma).map_err(CmdError::from)?;
    let right = binary::right_error(&reduction.prior, q_star, gamma).map_err(CmdError::from)?;
    let side_fields = |e: &binary::BiasedError| {
        if e.feasible {
            (
                serde_json::json!(e.argmax_p0),
                serde_json::json!(reduction.model_regret(e.value, gamma)),
            )
        } else {
            (serde_json::Value::Null, serde_json::Value::Null)
        }
    };
    let (p0_left, left_value) = side_fields(&left);
    let (p0_right, right_value) = side_fields(&right);
    let report = serde_json::json!({
        "gamma": gamma,
        "q_star": q_star,
        "regret": reduction.model_regret(regret_norm, gamma),
        "regret_normalized": regret_norm,
        "scale": reduction.scale,
        "p0_left": p0_left,
        "p0_right": p0_right,
        "left_error": left_value,
        "right_error": right_value,
    });
    Ok(format!("{report}\n"))
}

fn cmd_regret_curve(model_path: &Path, gamma: f64, q_grid: u32) -> CmdResult {
    let model = load_model(model_path)?;
    if q_grid < 2 {
        return Err(CmdError::Validation(format!(
            "--q-grid must be at least 2, got {q_grid}"
        )));
    }
    let reduction = model.to_binary().map_err(CmdError::from)?;
    let prior = &reduction.prior;
    let mut rows = Vec::with_capacity(q_grid as usize);
    for i in 0..q_grid {
        let q = i as f64 / (q_grid - 1) as f64;
        let left = binary::left_error(prior, q, gamma).map_err(CmdError::from)?;
        let right = binary::right_error(prior, q, gamma).map_err(CmdError::from)?;
        rows.push((q, left.value, right.value));
    }
    if prior.prior_mean() != 0.0 {
        for pair in rows.windows(2) {
            let ((qa, la, ra), (qb, lb, rb)) = (pair[0], pair[1]);
            if lb.is_finite() && la.is_finite() && lb > la + 1e-12 {
                return Err(CmdError::Monotonicity(format!(
                    "left error rises from {la} at q={qa} to {lb} at q={qb}"
                )));
            }
            if rb.is_finite() && ra.is_finite() && rb < ra - 1e-12 {
                return Err(CmdError::Monotonicity(format!(
                    "right error falls from {ra} at q={qa} to {rb} at q={qb}"
                )));
            }
        }
    }
    let mut out = String::from("q,left,right,worst\n");
    let map = |v: f64| {
        if v.is_finite() {
            reduction.model_regret(v, gamma)
        } else {
            v
        }
    };
    for (q, l, r) in rows {
        let (l, r) = (map(l), map(r));
        out.push_str(&format!("{q},{l},{r},{}\n", l.max(r)));
    }
    Ok(out)
}

fn cmd_statics(spec_path: &Path) -> CmdResult {
    let text = read_file(spec_path)?;
    let spec = sweep::SweepSpec::from_json(&text).map_err(CmdError::from)?;
    let result = sweep::run(&spec).map_err(CmdError::from)?;
    if let Err((i, a, b)) = sweep::check_monotonicity(&result) {
        return Err(CmdError::Monotonicity(format!(
            "q_star moves from {a} (row {i}) to {b} (row {}) against the predicted direction",
            i + 1
        )));
    }
    let mut out = String::from("parameter,q_star\n");
    for (param, q) in result.rows {
        out.push_str(&format!("{param},{q}\n"));
    }
    Ok(out)
}

fn cmd_verify(
    model_path: &Path,
    gamma: f64,
    seed: u64,
    trials: u32,
    lipschitz_width: Option<f64>,
) -> CmdResult {
    let model = load_model(model_path)?;
    let report = checks::run(&model, gamma, seed, trials, lipschitz_width).map_err(CmdError::from)?;
    let rendered = to_json_line(&report);
    if report.all_pass {
        Ok(rendered)
    } else {
        Err(CmdError::ChecksFailed(rendered))
    }
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RuleSpec {
    /// A constant quota rule.
    Quota { q: Vec<f64> },
    /// The myopic rule expressed through per-structure action marginals.
    Myopic,
    /// Explicit per-menu-entry quotas.
    Table { quotas: Vec<Vec<f64>> },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MenuItem {
    Builtin(String),
    Explicit {
        posteriors: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

#[derive(Deserialize)]
struct MenuSpec {
    items: Vec<MenuItem>,
}

fn build_menu(model: &FiniteModel, text: &str) -> Result<Vec<SignalStructure>, CmdError> {
    let spec: MenuSpec = serde_json::from_str(text)
        .map_err(|e| CmdError::Validation(format!("menu file: {e}")))?;
    let mut menu = Vec::with_capacity(spec.items.len());
    for item in spec.items {
        match item {
            MenuItem::Builtin(name) => match name.as_str() {
                "no_info" => menu.push(no_information(model)),
                "full_revelation" => menu.push(full_revelation(model)),
                other => {
                    return Err(CmdError::Validation(format!(
                        "unknown builtin structure \"{other}\" (expected \"no_info\" or \
                         \"full_revelation\")"
                    )))
                }
            },
            MenuItem::Explicit {
                posteriors,
                weights,
            } => {
                let posteriors = posteriors
                    .into_iter()
                    .map(|belief| crate::model::Posterior { belief })
                    .collect();
                menu.push(
                    SignalStructure::new(posteriors, weights, &model.prior)
                        .map_err(CmdError::from)?,
                );
            }
        }
    }
    if menu.is_empty() {
        return Err(CmdError::Validation("menu file has no items".into()));
    }
    Ok(menu)
}

fn build_rule(
    model: &FiniteModel,
    menu: &[SignalStructure],
    text: &str,
) -> Result<RuleTable, CmdError> {
    let spec: RuleSpec = serde_json::from_str(text)
        .map_err(|e| CmdError::Validation(format!("rule file: {e}")))?;
    match spec {
        RuleSpec::Quota { q } => {
            let quota = Quota::new(q).map_err(CmdError::from)?;
            if quota.len() != model.num_actions() {
                return Err(CmdError::Validation(format!(
                    "quota over {} actions, model has {}",
                    quota.len(),
                    model.num_actions()
                )));
            }
            Ok(RuleTable::constant(quota, menu.len()))
        }
        RuleSpec::Myopic => Ok(RuleTable::myopic(model, menu)),
        RuleSpec::Table { quotas } => {
            if quotas.len() < menu.len() {
                return Err(CmdError::Validation(format!(
                    "rule table covers {} structures, menu has {}",
                    quotas.len(),
                    menu.len()
                )));
            }
            let quotas = quotas
                .into_iter()
                .map(Quota::new)
                .collect::<crate::Result<Vec<_>>>()
                .map_err(CmdError::from)?;
            Ok(RuleTable::from_quotas(quotas))
        }
    }
}

fn cmd_simulate(
    model_path: &Path,
    rule_path: &Path,
    sender_path: &Path,
    menu_path: &Path,
    rounds: u64,
    seed: u64,
    gamma: f64,
) -> CmdResult {
    let model = load_model(model_path)?;
    let menu = build_menu(&model, &read_file(menu_path)?)?;
    let rule = build_rule(&model, &menu, &read_file(rule_path)?)?;
    let values: Vec<f64> = serde_json::from_str(&read_file(sender_path)?)
        .map_err(|e| CmdError::Validation(format!("sender file: {e}")))?;
    if values.len() != model.num_actions() {
        return Err(CmdError::Validation(format!(
            "sender utility over {} actions, model has {}",
            values.len(),
            model.num_actions()
        )));
    }
    let v = SenderUtility::new(values).map_err(CmdError::from)?;
    let outcome =
        game::simulate(&model, &menu, &rule, &v, gamma, rounds, seed).map_err(CmdError::from)?;
    Ok(to_json_line(&outcome))
}
