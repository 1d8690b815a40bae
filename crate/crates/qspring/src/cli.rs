//! Command-line front end: config ingestion, scenario dispatch, and
//! byte-stable file emission.
//!
//! Frequencies cross this boundary in Hz and are converted to rad/s at a
//! single site (`physics::params_from_config`); internal code never sees
//! Hz. Reports are JSON with sorted keys and floats printed to 12
//! significant digits, so identical runs produce identical bytes. Every
//! report embeds the resolved config, making any run reproducible from
//! its own output.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::fock::{evolve_fock, from_gaussian, FockError};
use crate::gaussian::{evolve, make_state, GaussianError, GaussianState, StateKind, Trajectory};
use crate::model::{build_full_model, ModelError, QuadraticModel};
use crate::physics::{
    params_from_config, params_to_config, paper_preset, Config, PhysicsError, SystemParams,
};
use crate::scenarios::{
    adiabatic_check, run_ledger, transfer_experiment, transfer_sweep, transfer_wigner_panels,
    EffectiveParams, ScenarioError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

// ---------------------------------------------------------------------------
// Flag surface

#[derive(Parser)]
#[command(
    name = "qspring",
    version,
    about = "Design and simulation toolkit for cavity-mediated atom-membrane coupling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full design chain and strong-coupling condition ledger.
    Check(CheckArgs),
    /// Lattice site, membrane placement, and derived rates only.
    Derive(CheckArgs),
    /// Time evolution of a model; emits the trajectory CSV schema.
    Evolve(EvolveArgs),
    /// Squeezing-transfer protocol at one loss setting.
    Transfer(TransferArgs),
    /// Transferred squeezing versus loss rate for several inputs.
    Sweep(SweepArgs),
    /// Full-versus-eliminated model comparison over detuning ratios.
    Adiabatic(AdiabaticArgs),
    /// Wigner grids of atom and membrane before and after the swap.
    Wigner(WignerArgs),
}

/// Config source shared by every command: a named preset or a JSON params
/// file, plus dotted-path overrides.
#[derive(Args)]
struct ConfigOpts {
    /// Named parameter preset (available: paper). Default when no file is
    /// given.
    #[arg(long, conflicts_with = "params")]
    preset: Option<String>,
    /// JSON parameter file (frequencies in Hz, lengths in m).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Override one config field, e.g. --set membrane.reflectivity=0.9.
    /// Value `null` removes an optional field (drive selector).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct OutputOpts {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the tabular output here (commands with tables only).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModelChoice {
    /// Adiabatically eliminated two-mode model from the derived rates.
    Effective,
    /// Four-mode model with both cavity modes kept.
    Full,
    /// Truncated number-basis integration for cross-checking.
    FockOracle,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    output: OutputOpts,
    #[arg(long, value_enum, default_value = "effective")]
    model: ModelChoice,
    /// Serialized model JSON to evolve instead of building one from the
    /// config; times are then in the model's own units.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Initial squeezing of mode 0 in dB.
    #[arg(long, default_value_t = 3.0)]
    squeeze_db: f64,
    /// Initial thermal occupation of mode 1.
    #[arg(long, default_value_t = 0.0)]
    nbar: f64,
    /// Evolution span; seconds for config-built models.
    #[arg(long)]
    t_max: f64,
    #[arg(long, default_value_t = 101)]
    samples: usize,
    /// Number-basis truncation per mode (fock-oracle only), e.g. 12,16.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
}

#[derive(Args)]
struct TransferArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    output: OutputOpts,
    /// Input atomic squeezing in dB.
    #[arg(long, default_value_t = 9.0)]
    squeeze_db: f64,
    /// Membrane initial (and bath) occupation.
    #[arg(long, default_value_t = 5.0)]
    nbar: f64,
    /// Common loss rate of the protocol in units of G.
    #[arg(long, default_value_t = 0.0)]
    gamma_over_g: f64,
    /// Resonant mode frequency in units of G.
    #[arg(long, default_value_t = 50.0)]
    omega_over_g: f64,
    /// Evolution span in units of 1/G.
    #[arg(long, default_value_t = PI)]
    gt_max: f64,
    #[arg(long, default_value_t = 401)]
    samples: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    output: OutputOpts,
    /// Largest loss rate in units of G.
    #[arg(long, default_value_t = 0.5)]
    gamma_max: f64,
    /// Number of loss-rate points from 0 to gamma-max.
    #[arg(long, default_value_t = 26)]
    gamma_steps: usize,
    /// Input squeezing values in dB.
    #[arg(long, value_delimiter = ',', default_values_t = [3.0, 6.0, 9.0])]
    dbs: Vec<f64>,
    #[arg(long, default_value_t = 5.0)]
    nbar: f64,
    #[arg(long, default_value_t = 50.0)]
    omega_over_g: f64,
    #[arg(long, default_value_t = PI)]
    gt_max: f64,
    #[arg(long, default_value_t = 401)]
    samples: usize,
}

#[derive(Args)]
struct AdiabaticArgs {
    #[command(flatten)]
    output: OutputOpts,
    /// Detuning-to-coupling ratios Δ/g to test (each at least 10).
    #[arg(long, value_delimiter = ',', default_values_t = [30.0, 100.0, 300.0])]
    ratios: Vec<f64>,
}

#[derive(Args)]
struct WignerArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    output: OutputOpts,
    #[arg(long, default_value_t = 9.0)]
    squeeze_db: f64,
    #[arg(long, default_value_t = 5.0)]
    nbar: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma_over_g: f64,
    #[arg(long, default_value_t = 50.0)]
    omega_over_g: f64,
    /// Half-width of the phase-space grid (quadrature units).
    #[arg(long, default_value_t = 4.0)]
    half_width: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 81)]
    grid: usize,
}

// ---------------------------------------------------------------------------
// Entry point

/// Parses `args` (including the program name) and runs the command.
/// Returns 0 on success, 1 on domain errors, 2 on usage errors.
pub fn parse_and_dispatch(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Check(a) => {
            let (config, params) = resolve_config(&a.config)?;
            let ledger = run_ledger(&params)?;
            reject_csv(&a.output)?;
            emit("check", Some(&config), to_value(&ledger)?, None, &a.output)
        }
        Command::Derive(a) => {
            let (config, params) = resolve_config(&a.config)?;
            let ledger = run_ledger(&params)?;
            let result = serde_json::json!({
                "site": to_value(&ledger.site)?,
                "placement": to_value(&ledger.placement)?,
                "rates": to_value(&ledger.rates)?,
            });
            reject_csv(&a.output)?;
            emit("derive", Some(&config), result, None, &a.output)
        }
        Command::Evolve(a) => run_evolve(a),
        Command::Transfer(a) => run_transfer(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Adiabatic(a) => {
            let rows = adiabatic_check(&a.ratios)?;
            let mut csv = String::from("ratio,g_eff,deviation\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    fmt_f64(r.ratio),
                    fmt_f64(r.g_eff),
                    fmt_f64(r.deviation)
                ));
            }
            emit(
                "adiabatic",
                None,
                serde_json::json!({ "rows": to_value(&rows)? }),
                Some(csv),
                &a.output,
            )
        }
        Command::Wigner(a) => run_wigner(a),
    }
}

// ---------------------------------------------------------------------------
// Command bodies

/// Natural-units protocol parameters scaled by the config's derived G.
fn scenario_scale(config_opts: &ConfigOpts) -> Result<(Config, f64), CliError> {
    let (config, params) = resolve_config(config_opts)?;
    let ledger = run_ledger(&params)?;
    Ok((config, ledger.rates.g_rad_s))
}

#[derive(Serialize)]
struct TransferReport {
    g_rad_s: f64,
    omega_over_g: f64,
    gamma_over_g: f64,
    input_db: f64,
    n_bar: f64,
    times_s: Vec<f64>,
    gt: Vec<f64>,
    atom_squeezing_db: Vec<f64>,
    membrane_squeezing_db: Vec<f64>,
    membrane_squeezing_db_raw: Vec<f64>,
    rotation_optimized: bool,
    max_transferred_db: f64,
    gt_at_max: f64,
    t_at_max_s: f64,
    swap_db_at_half_pi: f64,
    swap_fidelity_at_half_pi: f64,
    swap_rotation: f64,
}

fn run_transfer(a: TransferArgs) -> Result<(), CliError> {
    let (config, g) = scenario_scale(&a.config)?;
    let eff = EffectiveParams::from_loss_rate(g, a.omega_over_g * g, a.gamma_over_g * g, a.nbar);
    let result = transfer_experiment(&eff, a.squeeze_db, a.nbar, a.gt_max / g, a.samples)?;
    let report = TransferReport {
        g_rad_s: g,
        omega_over_g: a.omega_over_g,
        gamma_over_g: a.gamma_over_g,
        input_db: a.squeeze_db,
        n_bar: a.nbar,
        gt: result.times.iter().map(|&t| t * g).collect(),
        times_s: result.times.clone(),
        atom_squeezing_db: result.atom_squeezing_db,
        membrane_squeezing_db: result.membrane_squeezing_db,
        membrane_squeezing_db_raw: result.membrane_squeezing_db_raw,
        rotation_optimized: result.rotation_optimized,
        max_transferred_db: result.max_transferred_db,
        gt_at_max: result.t_at_max * g,
        t_at_max_s: result.t_at_max,
        swap_db_at_half_pi: result.swap_db_at_half_pi,
        swap_fidelity_at_half_pi: result.swap_fidelity_at_half_pi,
        swap_rotation: result.swap_rotation,
    };
    let mut csv =
        String::from("t_s,gt,atom_squeezing_db,membrane_squeezing_db,membrane_squeezing_db_raw\n");
    for i in 0..report.times_s.len() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(report.times_s[i]),
            fmt_f64(report.gt[i]),
            fmt_f64(report.atom_squeezing_db[i]),
            fmt_f64(report.membrane_squeezing_db[i]),
            fmt_f64(report.membrane_squeezing_db_raw[i]),
        ));
    }
    emit("transfer", Some(&config), to_value(&report)?, Some(csv), &a.output)
}

fn run_sweep(a: SweepArgs) -> Result<(), CliError> {
    if a.gamma_steps < 2 {
        return Err(CliError::Config("need at least 2 sweep steps".into()));
    }
    if !(a.gamma_max >= 0.0) {
        return Err(CliError::Config("gamma-max must be nonnegative".into()));
    }
    let (config, g) = scenario_scale(&a.config)?;
    let gammas: Vec<f64> = (0..a.gamma_steps)
        .map(|i| a.gamma_max * i as f64 / (a.gamma_steps - 1) as f64)
        .collect();
    let points = transfer_sweep(
        g,
        a.omega_over_g * g,
        a.nbar,
        &gammas,
        &a.dbs,
        a.gt_max / g,
        a.samples,
        worker_count()?,
    )?;
    let mut csv = String::from("gamma_over_g,input_db,max_transferred_db,gt_at_max\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p.gamma_over_g),
            fmt_f64(p.input_db),
            fmt_f64(p.max_transferred_db),
            fmt_f64(p.t_at_max * g),
        ));
    }
    let result = serde_json::json!({
        "g_rad_s": g,
        "omega_over_g": a.omega_over_g,
        "n_bar": a.nbar,
        "points": to_value(&points)?,
    });
    emit("sweep", Some(&config), result, Some(csv), &a.output)
}

fn run_wigner(a: WignerArgs) -> Result<(), CliError> {
    let (config, g) = scenario_scale(&a.config)?;
    let eff = EffectiveParams::from_loss_rate(g, a.omega_over_g * g, a.gamma_over_g * g, a.nbar);
    let panels = transfer_wigner_panels(&eff, a.squeeze_db, a.nbar, a.half_width, a.grid)?;
    let mut csv = String::from("panel,x,p,w\n");
    for panel in &panels.panels {
        for (ip, p) in panels.ps.iter().enumerate() {
            for (ix, x) in panels.xs.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    panel.label,
                    fmt_f64(*x),
                    fmt_f64(*p),
                    fmt_f64(panel.grid[ip][ix]),
                ));
            }
        }
    }
    emit("wigner", Some(&config), to_value(&panels)?, Some(csv), &a.output)
}

#[derive(Serialize)]
struct EvolveReport {
    model: String,
    mode_labels: Vec<String>,
    time_unit: String,
    times: Vec<f64>,
    final_mean: Vec<f64>,
    final_cov: Vec<Vec<f64>>,
    /// Smallest uncertainty-matrix eigenvalue seen along the trajectory;
    /// physical states keep it above roughly -1e-9.
    min_uncertainty_eig: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation_valid: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_trace_drift_rate: Option<f64>,
}

fn run_evolve(a: EvolveArgs) -> Result<(), CliError> {
    if !(a.t_max > 0.0) {
        return Err(CliError::Config("t-max must be positive".into()));
    }
    if a.samples < 2 {
        return Err(CliError::Config("need at least 2 samples".into()));
    }
    if !a.dims.is_empty() && a.model != ModelChoice::FockOracle {
        return Err(CliError::Config("--dims applies to --model fock-oracle only".into()));
    }
    let (config, model, label) = match (&a.model_file, a.model) {
        (Some(path), _) => {
            let text = read_file(path)?;
            (None, QuadraticModel::from_json(&text)?, "file")
        }
        (None, ModelChoice::Effective | ModelChoice::FockOracle) => {
            let (config, params) = resolve_config(&a.config)?;
            let rates = run_ledger(&params)?.rates;
            let model = EffectiveParams::from_rates(&rates).build()?;
            let label = if a.model == ModelChoice::Effective {
                "effective"
            } else {
                "fock-oracle"
            };
            (Some(config), model, label)
        }
        (None, ModelChoice::Full) => {
            let (config, params) = resolve_config(&a.config)?;
            let rates = run_ledger(&params)?.rates;
            let model = build_full_model(
                rates.omega_at_rad_s,
                rates.params.membrane.omega_m_rad_s,
                rates.params.cavity.detuning_rad_s,
                rates.kappa_rad_s,
                rates.g_atc_rad_s,
                rates.g_mc_rad_s,
                rates.gamma_at_rad_s,
                rates.gamma_m_natural_rad_s,
                rates.n_bar,
            )?;
            (Some(config), model, "full")
        }
    };
    let time_unit = if a.model_file.is_some() { "model" } else { "s" };

    let n_modes = model.mode_labels.len();
    let mut kinds: Vec<(&str, StateKind)> = Vec::with_capacity(n_modes);
    for (m, label) in model.mode_labels.iter().enumerate() {
        let kind = match m {
            0 => StateKind::Squeezed {
                db: a.squeeze_db,
                angle: 0.0,
            },
            1 => StateKind::Thermal { n_bar: a.nbar },
            _ => StateKind::Vacuum,
        };
        kinds.push((label.as_str(), kind));
    }
    let state0 = make_state(&kinds);

    let (report, csv) = if a.model == ModelChoice::FockOracle {
        if a.dims.len() != n_modes {
            return Err(CliError::Config(format!(
                "--dims needs {n_modes} comma-separated entries for this model"
            )));
        }
        let rho0 = from_gaussian(&state0, &a.dims)?;
        // number-basis integrations run in dimensionless time so SI-scale
        // rates stay well-conditioned
        let reference = model
            .h_matrix
            .abs()
            .max()
            .max(model.jumps.iter().fold(0.0, |m, j| j.rate.max(m)))
            .max(f64::MIN_POSITIVE);
        let scaled = model.rescaled(reference)?;
        let mut traj = evolve_fock(
            &scaled,
            &rho0,
            a.t_max * reference,
            a.t_max * reference / 1600.0,
            a.samples,
        )?;
        for t in &mut traj.times {
            *t /= reference;
        }
        let mut min_eig = f64::INFINITY;
        for (mean, cov) in traj.means.iter().zip(&traj.covs) {
            let s = GaussianState {
                mean: mean.clone(),
                cov: cov.clone(),
                mode_labels: model.mode_labels.clone(),
            };
            min_eig = min_eig.min(s.uncertainty_min_eig());
        }
        let last_mean = traj.means.last().expect("sampled");
        let last_cov = traj.covs.last().expect("sampled");
        let report = EvolveReport {
            model: label.into(),
            mode_labels: model.mode_labels.clone(),
            time_unit: time_unit.into(),
            times: traj.times.clone(),
            final_mean: last_mean.iter().copied().collect(),
            final_cov: matrix_rows(last_cov),
            min_uncertainty_eig: min_eig,
            truncation_valid: Some(traj.truncation_valid),
            max_trace_drift_rate: Some(traj.max_trace_drift_rate),
        };
        let csv = moments_csv(&model.mode_labels, &traj.times, &traj.means, &traj.covs);
        (report, csv)
    } else {
        let traj = evolve(&model, &state0, a.t_max, a.t_max / 2000.0, a.samples)?;
        let min_eig = traj
            .states
            .iter()
            .map(|s| s.uncertainty_min_eig())
            .fold(f64::INFINITY, f64::min);
        let last = traj.last();
        let report = EvolveReport {
            model: label.into(),
            mode_labels: model.mode_labels.clone(),
            time_unit: time_unit.into(),
            times: traj.times.clone(),
            final_mean: last.mean.iter().copied().collect(),
            final_cov: matrix_rows(&last.cov),
            min_uncertainty_eig: min_eig,
            truncation_valid: None,
            max_trace_drift_rate: None,
        };
        (report, trajectory_csv(&traj))
    };
    emit("evolve", config.as_ref(), to_value(&report)?, Some(csv), &a.output)
}

// ---------------------------------------------------------------------------
// Config resolution

fn resolve_config(opts: &ConfigOpts) -> Result<(Config, SystemParams), CliError> {
    let base: Config = match (&opts.params, opts.preset.as_deref()) {
        (Some(path), _) => {
            let text = read_file(path)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some("paper")) | (None, None) => params_to_config(&paper_preset()),
        (None, Some(other)) => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}` (available: paper)"
            )))
        }
    };
    let mut value = to_value(&base)?;
    for entry in &opts.set {
        apply_override(&mut value, entry)?;
    }
    let config: Config =
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    let params = params_from_config(&config)?;
    Ok((config, params))
}

/// Applies one `path.to.field=value` override in place. Intermediate
/// components must exist; the final key must exist too, except inside
/// `drive` where the two selectors are optional. `value` of `null`
/// removes the key.
fn apply_override(root: &mut Value, entry: &str) -> Result<(), CliError> {
    let (path, raw) = entry
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{entry}` must be key.path=value")))?;
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CliError::Config(format!("override `{entry}` has an empty field path")))?;
    let mut cursor = &mut *root;
    for part in &parts {
        cursor = cursor
            .as_object_mut()
            .and_then(|m| m.get_mut(*part))
            .ok_or_else(|| {
                CliError::Config(format!("unknown config section `{part}` in `{path}`"))
            })?;
    }
    let obj = cursor
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("`{path}` does not address an object field")))?;
    if raw == "null" {
        obj.remove(last);
        return Ok(());
    }
    if !obj.contains_key(last) && parts.last().copied() != Some("drive") {
        return Err(CliError::Config(format!("unknown field path `{path}`")));
    }
    obj.insert(last.to_string(), parse_scalar(raw));
    Ok(())
}

fn parse_scalar(raw: &str) -> Value {
    if let Ok(b) = raw.parse::<bool>() {
        return Value::Bool(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Value::Number(i.into());
    }
    if let Ok(x) = raw.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(x) {
            return Value::Number(n);
        }
    }
    Value::String(raw.to_string())
}

fn worker_count() -> Result<usize, CliError> {
    match std::env::var("QSPRING_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                CliError::Config("QSPRING_THREADS must be a positive integer".into())
            }),
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(8)),
    }
}

// ---------------------------------------------------------------------------
// Emission

fn to_value<T: Serialize>(value: &T) -> Result<Value, CliError> {
    serde_json::to_value(value).map_err(|e| CliError::Config(format!("serialize: {e}")))
}

fn reject_csv(output: &OutputOpts) -> Result<(), CliError> {
    if output.csv.is_some() {
        return Err(CliError::Config("this command has no CSV output".into()));
    }
    Ok(())
}

fn emit(
    command: &str,
    config: Option<&Config>,
    result: Value,
    csv: Option<String>,
    output: &OutputOpts,
) -> Result<(), CliError> {
    let envelope = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": match config {
            Some(c) => to_value(c)?,
            None => Value::Null,
        },
        "result": result,
    });
    let text = stable_json(&envelope);
    match &output.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(path) = &output.csv {
        match csv {
            Some(table) => write_file(path, &table)?,
            None => return Err(CliError::Config("this command has no CSV output".into())),
        }
    }
    Ok(())
}

/// Renders JSON with alphabetically sorted object keys, 12-significant-
/// digit floats, and negative zero normalized away, so equal values
/// always produce equal bytes.
pub fn stable_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&fmt_number(n)),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string to JSON")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    pad(out, indent + 1);
                    write_value(out, item, indent + 1);
                    if i + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                pad(out, indent);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&serde_json::to_string(key).expect("key to JSON"));
                out.push_str(": ");
                write_value(out, &map[*key], indent + 1);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn fmt_number(n: &serde_json::Number) -> String {
    if let Some(i) = n.as_i64() {
        return i.to_string();
    }
    if let Some(u) = n.as_u64() {
        return u.to_string();
    }
    fmt_f64(n.as_f64().expect("numeric"))
}

fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

// ---------------------------------------------------------------------------
// Trajectory CSV schema

/// Header: time, one column per quadrature mean (x_/p_ per mode label),
/// then the upper-triangle covariance entries cov_i_j row-major.
fn moments_csv(
    labels: &[String],
    times: &[f64],
    means: &[nalgebra::DVector<f64>],
    covs: &[nalgebra::DMatrix<f64>],
) -> String {
    let dim = 2 * labels.len();
    let mut head = String::from("time");
    for label in labels {
        head.push_str(&format!(",x_{label},p_{label}"));
    }
    for i in 0..dim {
        for j in i..dim {
            head.push_str(&format!(",cov_{i}_{j}"));
        }
    }
    head.push('\n');
    let mut out = head;
    for (k, &t) in times.iter().enumerate() {
        out.push_str(&fmt_f64(t));
        for q in 0..dim {
            out.push(',');
            out.push_str(&fmt_f64(means[k][q]));
        }
        for i in 0..dim {
            for j in i..dim {
                out.push(',');
                out.push_str(&fmt_f64(covs[k][(i, j)]));
            }
        }
        out.push('\n');
    }
    out
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let labels = &traj.states[0].mode_labels;
    let means: Vec<nalgebra::DVector<f64>> = traj.states.iter().map(|s| s.mean.clone()).collect();
    let covs: Vec<nalgebra::DMatrix<f64>> = traj.states.iter().map(|s| s.cov.clone()).collect();
    moments_csv(labels, &traj.times, &means, &covs)
}

/// Parses the trajectory CSV schema back into times, means, and
/// symmetric covariance matrices.
pub fn parse_trajectory_csv(
    text: &str,
) -> Result<(Vec<f64>, Vec<nalgebra::DVector<f64>>, Vec<nalgebra::DMatrix<f64>>), CliError> {
    let bad = |msg: String| CliError::Config(format!("trajectory csv: {msg}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"time") {
        return Err(bad("first column must be `time`".into()));
    }
    let cov_start = cols
        .iter()
        .position(|c| c.starts_with("cov_"))
        .ok_or_else(|| bad("no cov_ columns".into()))?;
    if cols[cov_start..].iter().any(|c| !c.starts_with("cov_")) {
        return Err(bad("cov_ columns must be contiguous and last".into()));
    }
    let dim = cov_start - 1;
    if dim == 0 || dim % 2 != 0 {
        return Err(bad(format!("{dim} mean columns do not form quadrature pairs")));
    }
    let n_cov = dim * (dim + 1) / 2;
    if cols.len() != 1 + dim + n_cov {
        return Err(bad(format!(
            "{} columns but {dim} means need {n_cov} covariance entries",
            cols.len()
        )));
    }
    let mut times = Vec::new();
    let mut means = Vec::new();
    let mut covs = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(bad(format!("row {}: wrong field count", ln + 2)));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>()
                .map_err(|_| bad(format!("row {}: bad float `{s}`", ln + 2)))
        };
        times.push(parse(fields[0])?);
        let mut mean = nalgebra::DVector::zeros(dim);
        for q in 0..dim {
            mean[q] = parse(fields[1 + q])?;
        }
        means.push(mean);
        let mut cov = nalgebra::DMatrix::zeros(dim, dim);
        let mut k = 1 + dim;
        for i in 0..dim {
            for j in i..dim {
                let v = parse(fields[k])?;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
                k += 1;
            }
        }
        covs.push(cov);
    }
    if times.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok((times, means, covs))
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
