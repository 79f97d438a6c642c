//! Batch front end: every command reads one JSON config, applies `--set` overrides,
//! echoes the resolved config to `out/config.json` and writes its artifacts next to it.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use locstat_core::dependence::{cumulative_dependence, dependence_profile, derivative_dependence_profile, fit_decay};
use locstat_core::localize::{local_autocov, local_mean};
use locstat_core::optim::OptimizerConfig;
use locstat_core::qmle::{estimate_curve, estimate_theta, sandwich_ci, LocalFit, DEFAULT_LEVEL};
use locstat_core::simulate::{simulate_derivative, simulate_path, simulate_stationary, DEFAULT_TOL};
use locstat_core::{make_kernel, Error, KernelFamily, Seed};

use crate::config::{EstimationDoc, ModelDoc, Transform};
use crate::experiments::{ExperimentDoc, MCConfig};
use crate::io::{path_table, read_binary, read_series_csv, stationary_table, write_binary, Cell, SeriesError, Table};
use crate::pool::{resolve_threads, Pool, THREADS_ENV};
use crate::svg::{LinePlot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Stationary,
    Derivative,
    Depend,
    Localmean,
    Estimate,
    Curve,
    Mc,
}

/// Simulation and local estimation for locally stationary time series.
#[derive(Debug, Clone, Parser)]
#[command(name = "locstat", version)]
pub struct CliInvocation {
    pub command: Command,
    /// JSON config file; omitted means all defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value` override on a dotted path; the value is parsed as JSON, else taken as a string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {message}")]
    Config { field: Option<String>, message: String },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("input series: {0}")]
    Series(#[from] SeriesError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(e) => match e {
                Error::Invalid { .. }
                | Error::Contraction { .. }
                | Error::Capability(_)
                | Error::NotDifferentiable(_)
                | Error::MomentOverflow { .. }
                | Error::OutsideBox { .. } => 2,
                Error::NumericEscape { .. } => 3,
                Error::NonConvergence { .. } | Error::DegenerateInformation { .. } | Error::DegenerateWindow { .. } => 4,
                _ => 1,
            },
            CliError::Io(_) | CliError::Series(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Core(_) => "numeric",
            CliError::Io(_) => "io",
            CliError::Series(_) => "input",
        }
    }

    fn field(&self) -> Option<String> {
        match self {
            CliError::Config { field, .. } => field.clone(),
            CliError::Core(Error::Invalid { field, .. }) => Some(field.to_string()),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "exit_code": self.exit_code(),
            "kind": self.kind(),
            "field": self.field(),
            "message": self.to_string(),
        })
    }
}

fn config_error(message: impl Into<String>) -> CliError {
    let message = message.into();
    let field = message.split('`').nth(1).map(str::to_string);
    CliError::Config { field, message }
}

/// Sets `path` (dot-separated) in `doc`, creating objects as needed.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| config_error(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(config_error(format!("override key `{key}` has an empty segment")));
        }
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn resolve<T: DeserializeOwned>(inv: &CliInvocation) -> Result<T, CliError> {
    let mut doc = match &inv.config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for o in &inv.overrides {
        apply_override(&mut doc, o)?;
    }
    serde_json::from_value(doc).map_err(|e| config_error(e.to_string()))
}

fn echo(out: &Path, resolved: &impl Serialize) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    let mut s = serde_json::to_string_pretty(resolved).expect("config serialize");
    s.push('\n');
    fs::write(out.join("config.json"), s)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelDoc,
    pub n: usize,
    pub seed: u64,
    pub stream: u64,
    /// Also write `path.bin`.
    pub binary: bool,
    pub plot: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { model: ModelDoc::arch1(0.2, &[0.0, 0.0, 0.95]), n: 500, seed: 1, stream: 0, binary: false, plot: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryConfig {
    pub model: ModelDoc,
    pub u: f64,
    pub t_count: usize,
    pub seed: u64,
    pub stream: u64,
    pub tol: f64,
    /// 0 for the level only, 1 or 2 for derivatives.
    pub order: u8,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        StationaryConfig { model: ModelDoc::ar1(&[0.0, 0.5]), u: 0.5, t_count: 1000, seed: 1, stream: 0, tol: DEFAULT_TOL, order: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetDoc {
    #[default]
    Level,
    Derivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DependConfig {
    pub model: ModelDoc,
    pub u: f64,
    pub q: f64,
    pub k_max: usize,
    pub n_rep: usize,
    pub seed: u64,
    pub k_min: usize,
    pub target: TargetDoc,
    pub parallel: usize,
}

impl Default for DependConfig {
    fn default() -> Self {
        DependConfig {
            model: ModelDoc::ar1(&[0.5]),
            u: 0.5,
            q: 2.0,
            k_max: 20,
            n_rep: 2000,
            seed: 1,
            k_min: 0,
            target: TargetDoc::Level,
            parallel: 0,
        }
    }
}

/// Where a command's series comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataDoc {
    Simulate {
        model: ModelDoc,
        n: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        stream: u64,
    },
    /// CSV (column `x` or the first column) or, for a `.bin` suffix, the binary series format.
    File { path: PathBuf },
}

impl DataDoc {
    fn load(&self) -> Result<Vec<f64>, CliError> {
        match self {
            DataDoc::Simulate { model, n, seed, stream } => Ok(simulate_path(&model.build()?, *n, Seed::new(*seed, *stream))?.values),
            DataDoc::File { path } => {
                if path.extension().is_some_and(|e| e == "bin") {
                    Ok(read_binary(path)?)
                } else {
                    Ok(read_series_csv(path)?)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalMeanConfig {
    pub data: DataDoc,
    pub transform: Transform,
    pub kernel: KernelFamily,
    pub b: f64,
    pub u_grid: Vec<f64>,
}

impl Default for LocalMeanConfig {
    fn default() -> Self {
        LocalMeanConfig {
            data: DataDoc::Simulate { model: ModelDoc::arch1(0.2, &[0.0, 0.0, 0.95]), n: 10_000, seed: 1, stream: 0 },
            transform: Transform::Square,
            kernel: KernelFamily::Epanechnikov,
            b: 0.1,
            u_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub data: DataDoc,
    pub estimation: EstimationDoc,
    pub kernel: KernelFamily,
    pub b: f64,
    pub u: f64,
    /// Fitted points for `curve`; `u` is used by `estimate`.
    pub u_grid: Vec<f64>,
    pub level: f64,
    pub optimizer: OptimizerConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            data: DataDoc::Simulate { model: ModelDoc::expar(0.8, &[0.5]), n: 4000, seed: 1, stream: 0 },
            estimation: EstimationDoc::Expar { a0: 0.8, theta_box: vec![[0.0, 2.0]], sigma_floor: 1e-6 },
            kernel: KernelFamily::Epanechnikov,
            b: 0.2,
            u: 0.5,
            u_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            level: DEFAULT_LEVEL,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McDoc {
    /// Replications; absent means the experiment's desk-scale default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_rep: Option<usize>,
    pub base_seed: u64,
    pub parallel: usize,
}

impl Default for McDoc {
    fn default() -> Self {
        McDoc { n_rep: None, base_seed: 20_240_601, parallel: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfigDoc {
    pub experiment: ExperimentDoc,
    #[serde(default)]
    pub mc: McDoc,
}

fn threads(configured: usize) -> usize {
    resolve_threads(configured, std::env::var(THREADS_ENV).ok().as_deref())
}

fn bartlett_stderr(series: &[f64], kernel: &locstat_core::Kernel, b: f64, u: f64) -> Result<f64, Error> {
    let nb = series.len() as f64 * b;
    let lags = (nb.cbrt().floor() as usize).max(1);
    let mut lrv = local_autocov(series, kernel, b, u, 0)?.value;
    for k in 1..=lags {
        lrv += 2.0 * (1.0 - k as f64 / (lags + 1) as f64) * local_autocov(series, kernel, b, u, k)?.value;
    }
    Ok((kernel.l2() * lrv.max(0.0) / nb).sqrt())
}

fn fit_columns(d: usize) -> Vec<String> {
    let mut c = vec!["u".to_string()];
    for prefix in ["theta", "se", "ci_lo", "ci_hi"] {
        c.extend((0..d).map(|j| format!("{prefix}_{j}")));
    }
    c.push("converged".into());
    c
}

fn fit_row(fit: &LocalFit, ci: &[(f64, f64)]) -> Vec<Cell> {
    let mut r: Vec<Cell> = vec![fit.u.into()];
    r.extend(fit.theta_hat.iter().map(|v| Cell::from(*v)));
    r.extend(fit.se.iter().map(|v| Cell::from(*v)));
    r.extend(ci.iter().map(|c| Cell::from(c.0)));
    r.extend(ci.iter().map(|c| Cell::from(c.1)));
    r.push((fit.trace.converged as usize).into());
    r
}

fn fit_table(name: &str, d: usize) -> Table {
    let cols = fit_columns(d);
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    Table::new(name, &refs)
}

fn write_plot(out: &Path, name: &str, plot: LinePlot) -> Result<(), CliError> {
    fs::write(out.join(format!("{name}.svg")), plot.render())?;
    Ok(())
}

/// Runs one invocation; artifacts go to `inv.out`.
pub fn run(inv: &CliInvocation) -> Result<(), CliError> {
    let out = inv.out.as_path();
    match inv.command {
        Command::Simulate => {
            let c: SimulateConfig = resolve(inv)?;
            echo(out, &c)?;
            let path = simulate_path(&c.model.build()?, c.n, Seed::new(c.seed, c.stream))?;
            path_table(&path).write(out)?;
            if c.binary {
                write_binary(&out.join("path.bin"), &path.values)?;
            }
            if c.plot {
                let u: Vec<f64> = (1..=c.n).map(|t| path.rescaled_time(t)).collect();
                write_plot(out, "path", LinePlot::new("simulated path", "t/n", "X").with(Series::new("X", u, path.values.clone())))?;
            }
        }
        Command::Stationary | Command::Derivative => {
            let mut c: StationaryConfig = resolve(inv)?;
            if inv.command == Command::Derivative && c.order == 0 {
                c.order = 1;
            }
            echo(out, &c)?;
            let model = c.model.build()?;
            let seed = Seed::new(c.seed, c.stream);
            let s = if c.order == 0 {
                simulate_stationary(&model, c.u, c.t_count, seed, c.tol)?
            } else {
                simulate_derivative(&model, c.u, c.t_count, seed, c.tol, c.order)?
            };
            let name = if c.order == 0 { "stationary" } else { "derivative" };
            stationary_table(name, &s).write(out)?;
        }
        Command::Depend => {
            let c: DependConfig = resolve(inv)?;
            echo(out, &c)?;
            let model = c.model.build()?;
            let pool = Pool::new(threads(c.parallel));
            let seed = Seed::new(c.seed, 0);
            let prof = match c.target {
                TargetDoc::Level => dependence_profile(&model, c.u, c.q, c.k_max, c.n_rep, seed, &pool)?,
                TargetDoc::Derivative => derivative_dependence_profile(&model, c.u, c.q, c.k_max, c.n_rep, seed, &pool)?,
            };
            let mut t = Table::new("dependence", &["k", "delta_hat", "stderr"]);
            for (k, (d, s)) in prof.delta_hat.iter().zip(&prof.stderr).enumerate() {
                t.push(vec![k.into(), (*d).into(), (*s).into()]);
            }
            t.write(out)?;
            let fit = fit_decay(&prof, c.k_min)?;
            let cum = cumulative_dependence(&prof).ok();
            let doc = serde_json::json!({
                "fit": fit,
                "cumulative_truncated": cum.map(|c| c.truncated),
                "cumulative_completed": cum.map(|c| c.completed),
            });
            fs::write(out.join("fit.json"), serde_json::to_string_pretty(&doc).expect("fit json") + "\n")?;
        }
        Command::Localmean => {
            let c: LocalMeanConfig = resolve(inv)?;
            echo(out, &c)?;
            let kernel = make_kernel(c.kernel);
            let g: Vec<f64> = c.data.load()?.iter().map(|x| c.transform.apply(*x)).collect();
            let mut t = Table::new("localmean", &["u", "b", "stat", "stderr", "flags"]);
            for &u in &c.u_grid {
                let s = local_mean(&g, &kernel, c.b, u)?;
                let se = bartlett_stderr(&g, &kernel, c.b, u)?;
                let mut flags = vec![if s.interior { "interior" } else { "boundary" }];
                if s.small_window {
                    flags.push("small_window");
                }
                t.push(vec![u.into(), c.b.into(), s.value.into(), se.into(), flags.join("|").into()]);
            }
            t.write(out)?;
        }
        Command::Estimate => {
            let c: EstimateConfig = resolve(inv)?;
            echo(out, &c)?;
            let spec = c.estimation.build()?;
            let kernel = make_kernel(c.kernel);
            let data = c.data.load()?;
            let fit = estimate_theta(&data, &spec, &kernel, c.b, c.u, &c.optimizer)?;
            let ci = sandwich_ci(&fit, &kernel, data.len(), c.b, c.level)?;
            let mut t = fit_table("fit", spec.dim());
            t.push(fit_row(&fit, &ci));
            t.write(out)?;
        }
        Command::Curve => {
            let c: EstimateConfig = resolve(inv)?;
            echo(out, &c)?;
            let spec = c.estimation.build()?;
            let kernel = make_kernel(c.kernel);
            let data = c.data.load()?;
            let mut t = fit_table("curve", spec.dim());
            let mut first_err = None;
            let mut plot_u = Vec::new();
            let mut plot_theta: Vec<Vec<f64>> = vec![Vec::new(); spec.dim()];
            for fit in estimate_curve(&data, &spec, &kernel, c.b, &c.u_grid, &c.optimizer) {
                match fit {
                    Ok(f) => {
                        let ci = sandwich_ci(&f, &kernel, data.len(), c.b, c.level)?;
                        plot_u.push(f.u);
                        for (j, v) in f.theta_hat.iter().enumerate() {
                            plot_theta[j].push(*v);
                        }
                        t.push(fit_row(&f, &ci));
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            t.write(out)?;
            let mut plot = LinePlot::new("local estimates", "u", "theta");
            for (j, th) in plot_theta.into_iter().enumerate() {
                plot = plot.with(Series::new(format!("theta_{j}"), plot_u.clone(), th));
            }
            write_plot(out, "curve", plot)?;
            if let Some(e) = first_err {
                return Err(e.into());
            }
        }
        Command::Mc => {
            let c: McConfigDoc = resolve(inv)?;
            echo(out, &c)?;
            let cfg = MCConfig {
                n_rep: c.mc.n_rep.unwrap_or_else(|| c.experiment.default_n_rep()),
                base_seed: c.mc.base_seed,
                parallel: threads(c.mc.parallel),
                out_dir: out.to_path_buf(),
            };
            let report = c.experiment.run(&cfg)?;
            report.write_to(out)?;
        }
    }
    Ok(())
}

/// Parses arguments, runs, writes `error.json` on failure and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let inv = match CliInvocation::try_parse_from(args) {
        Ok(inv) => inv,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&inv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if fs::create_dir_all(&inv.out).is_ok() {
                let _ = fs::write(inv.out.join("error.json"), serde_json::to_string_pretty(&e.to_json()).expect("error json") + "\n");
            }
            e.exit_code()
        }
    }
}
