//! Seeded Monte Carlo experiments. Each writes `out_dir/{name}/report.json` with its
//! verdicts, one CSV per table, optional SVG plots and a separate `timing.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use locstat_core::model::Family;
use locstat_core::simulate::{simulate_stationary, DEFAULT_TOL};
use locstat_core::{ModelSpec, Seed};

use crate::config::Transform;
use crate::io::Table;
use crate::pool::Pool;

mod bias;
mod clt;
mod dependence;
mod derivative;
mod fig1;
mod lln;
mod qmle;
mod rate;

pub use bias::{exp_bias, exp_qmle_bias, BiasParams, QmleBiasParams};
pub use clt::{exp_clt, CltParams};
pub use dependence::{exp_dependence, DependenceExpect, DependenceParams};
pub use derivative::{exp_derivative, DerivativeParams};
pub use fig1::{exp_fig1, Fig1Params};
pub use lln::{exp_lln, LlnParams};
pub use qmle::{exp_qmle, QmleParams};
pub use rate::{exp_rate, RateParams};

pub type Result<T> = locstat_core::Result<T>;

/// Replication `k` always draws from `stream_id = k`, so the worker count never changes a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub n_rep: usize,
    pub base_seed: u64,
    /// Worker count; 0 uses every core.
    pub parallel: usize,
    pub out_dir: PathBuf,
}

impl MCConfig {
    pub fn pool(&self) -> Pool {
        Pool::new(self.parallel)
    }

    /// Root seed for one sub-study of an experiment.
    pub fn seed(&self, tag: u64) -> Seed {
        Seed::new(self.base_seed, 0).derive(tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    /// Closed interval `[threshold[0], threshold[1]]`.
    #[serde(rename = "in")]
    In,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub pass: bool,
    pub observed: f64,
    pub comparator: Comparator,
    pub threshold: Vec<f64>,
}

impl Verdict {
    pub fn new(id: impl Into<String>, observed: f64, comparator: Comparator, threshold: Vec<f64>) -> Self {
        let pass = match comparator {
            Comparator::Lt => observed < threshold[0],
            Comparator::Gt => observed > threshold[0],
            Comparator::Ge => observed >= threshold[0],
            Comparator::In => observed >= threshold[0] && observed <= threshold[1],
        };
        Verdict { id: id.into(), pass, observed, comparator, threshold }
    }

    pub fn lt(id: impl Into<String>, observed: f64, t: f64) -> Self {
        Verdict::new(id, observed, Comparator::Lt, vec![t])
    }

    pub fn gt(id: impl Into<String>, observed: f64, t: f64) -> Self {
        Verdict::new(id, observed, Comparator::Gt, vec![t])
    }

    pub fn ge(id: impl Into<String>, observed: f64, t: f64) -> Self {
        Verdict::new(id, observed, Comparator::Ge, vec![t])
    }

    pub fn within(id: impl Into<String>, observed: f64, lo: f64, hi: f64) -> Self {
        Verdict::new(id, observed, Comparator::In, vec![lo, hi])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRef {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub params: serde_json::Value,
    pub tables: Vec<Table>,
    /// `(file stem, svg document)`.
    pub plots: Vec<(String, String)>,
    pub verdicts: Vec<Verdict>,
    pub wall_seconds: f64,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    name: &'a str,
    params: &'a serde_json::Value,
    tables: Vec<TableRef>,
    plots: Vec<String>,
    verdicts: &'a [Verdict],
}

impl ExperimentReport {
    fn new(name: &str, cfg: &MCConfig, params: &impl Serialize) -> Self {
        let params = serde_json::json!({
            "n_rep": cfg.n_rep,
            "base_seed": cfg.base_seed,
            "experiment": serde_json::to_value(params).expect("params serialize"),
        });
        ExperimentReport { name: name.into(), params, tables: Vec::new(), plots: Vec::new(), verdicts: Vec::new(), wall_seconds: 0.0 }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// The report as written to `report.json`; wall time lives in `timing.json` instead.
    pub fn report_json(&self) -> String {
        let doc = ReportJson {
            name: &self.name,
            params: &self.params,
            tables: self
                .tables
                .iter()
                .map(|t| TableRef { file: format!("{}.csv", t.name), columns: t.columns.clone(), rows: t.rows.len() })
                .collect(),
            plots: self.plots.iter().map(|(n, _)| format!("{n}.svg")).collect(),
            verdicts: &self.verdicts,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("report serialize");
        s.push('\n');
        s
    }

    /// Writes everything under `root/{name}` and returns that directory.
    pub fn write(&self, root: &Path) -> std::io::Result<PathBuf> {
        let dir = root.join(&self.name);
        self.write_to(&dir)?;
        Ok(dir)
    }

    /// Writes everything directly into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.report_json())?;
        for t in &self.tables {
            t.write(dir)?;
        }
        for (name, svg) in &self.plots {
            fs::write(dir.join(format!("{name}.svg")), svg)?;
        }
        fs::write(dir.join("timing.json"), format!("{{\"wall_seconds\": {}}}\n", self.wall_seconds))
    }
}

/// Experiment selector as read from a `mc` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ExperimentDoc {
    Fig1(Fig1Params),
    Rate(RateParams),
    Derivative(DerivativeParams),
    Lln(LlnParams),
    Clt(CltParams),
    Bias(BiasParams),
    QmleBias(QmleBiasParams),
    Dependence(DependenceParams),
    Qmle(QmleParams),
}

impl ExperimentDoc {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentDoc::Fig1(_) => "fig1",
            ExperimentDoc::Rate(_) => "rate",
            ExperimentDoc::Derivative(_) => "derivative",
            ExperimentDoc::Lln(_) => "lln",
            ExperimentDoc::Clt(_) => "clt",
            ExperimentDoc::Bias(_) => "bias",
            ExperimentDoc::QmleBias(_) => "qmle_bias",
            ExperimentDoc::Dependence(_) => "dependence",
            ExperimentDoc::Qmle(_) => "qmle",
        }
    }

    /// Desk-scale replication count.
    pub fn default_n_rep(&self) -> usize {
        match self {
            ExperimentDoc::Fig1(_) => 1000,
            ExperimentDoc::Rate(_) => 200,
            ExperimentDoc::Derivative(_) => 4,
            ExperimentDoc::Lln(_) => 64,
            ExperimentDoc::Clt(_) => 2000,
            ExperimentDoc::Bias(_) => 200,
            ExperimentDoc::QmleBias(_) => 100,
            ExperimentDoc::Dependence(_) => 20_000,
            ExperimentDoc::Qmle(_) => 200,
        }
    }

    pub fn run(&self, cfg: &MCConfig) -> Result<ExperimentReport> {
        match self {
            ExperimentDoc::Fig1(p) => exp_fig1(cfg, p),
            ExperimentDoc::Rate(p) => exp_rate(cfg, p),
            ExperimentDoc::Derivative(p) => exp_derivative(cfg, p),
            ExperimentDoc::Lln(p) => exp_lln(cfg, p),
            ExperimentDoc::Clt(p) => exp_clt(cfg, p),
            ExperimentDoc::Bias(p) => exp_bias(cfg, p),
            ExperimentDoc::QmleBias(p) => exp_qmle_bias(cfg, p),
            ExperimentDoc::Dependence(p) => exp_dependence(cfg, p),
            ExperimentDoc::Qmle(p) => exp_qmle(cfg, p),
        }
    }

    /// Every experiment at its default parameters.
    pub fn all_defaults() -> Vec<ExperimentDoc> {
        vec![
            ExperimentDoc::Fig1(Fig1Params::default()),
            ExperimentDoc::Rate(RateParams::default()),
            ExperimentDoc::Derivative(DerivativeParams::default()),
            ExperimentDoc::Lln(LlnParams::default()),
            ExperimentDoc::Clt(CltParams::default()),
            ExperimentDoc::Bias(BiasParams::default()),
            ExperimentDoc::QmleBias(QmleBiasParams::default()),
            ExperimentDoc::Dependence(DependenceParams::default()),
            ExperimentDoc::Qmle(QmleParams::default()),
        ]
    }
}

pub(crate) fn timed(mut report: ExperimentReport, start: Instant) -> ExperimentReport {
    report.wall_seconds = start.elapsed().as_secs_f64();
    report
}

/// `E g(X~_0(u))` in closed form, for the cases where one is available.
pub fn closed_form_mean(model: &ModelSpec, transform: Transform, u: f64) -> Option<f64> {
    let law = model.innovation();
    let (m1, m2) = (law.mean(), law.second_moment());
    match (model.family(), transform) {
        (Family::TvAr { coeffs, sigma }, Transform::Identity) => {
            let s: f64 = coeffs.iter().map(|a| a.eval(u)).sum();
            Some(sigma.eval(u) * m1 / (1.0 - s))
        }
        (Family::TvAr { coeffs, sigma }, Transform::Square) if coeffs.len() == 1 && m1 == 0.0 => {
            let a = coeffs[0].eval(u);
            Some(sigma.eval(u).powi(2) * m2 / (1.0 - a * a))
        }
        (Family::TvArch { a0, coeffs }, Transform::Square) => {
            let s: f64 = coeffs.iter().map(|a| a.eval(u)).sum();
            Some(a0.eval(u) * m2 / (1.0 - s * m2))
        }
        _ => None,
    }
}

/// Closed form when available, otherwise the mean over a long stationary run on an
/// independent seed.
pub fn mean_oracle(model: &ModelSpec, transform: Transform, u: f64, len: usize, seed: Seed) -> Result<f64> {
    if let Some(v) = closed_form_mean(model, transform, u) {
        return Ok(v);
    }
    let s = simulate_stationary(model, u, len, seed, DEFAULT_TOL)?;
    Ok(s.x.iter().map(|x| transform.apply(*x)).sum::<f64>() / len as f64)
}

fn uniform_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

pub(crate) fn default_u_grid() -> Vec<f64> {
    uniform_grid(0.1, 0.9, 9).into_iter().map(|u| (u * 10.0).round() / 10.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelDoc;

    #[test]
    fn verdict_comparators() {
        assert!(Verdict::within("a", 0.5, 0.45, 0.55).pass);
        assert!(!Verdict::within("a", 0.56, 0.45, 0.55).pass);
        assert!(!Verdict::gt("b", 1.0, 1.0).pass);
        assert!(Verdict::ge("b", 1.0, 1.0).pass);
        let s = serde_json::to_string(&Verdict::lt("c", 0.01, 0.05)).unwrap();
        assert!(s.contains(r#""comparator":"<""#));
    }

    #[test]
    fn closed_form_arch_square() {
        let m = ModelDoc::arch1(0.2, &[0.0, 0.0, 0.95]).build().unwrap();
        let v = closed_form_mean(&m, Transform::Square, 0.5).unwrap();
        assert!((v - 0.2 / (1.0 - 0.2375)).abs() < 1e-15);
        let ar = ModelDoc::ar1(&[0.5]).build().unwrap();
        assert!((closed_form_mean(&ar, Transform::Square, 0.3).unwrap() - 1.0 / 0.75).abs() < 1e-15);
        assert_eq!(closed_form_mean(&ar, Transform::Abs, 0.3), None);
    }

    #[test]
    fn experiment_doc_tags() {
        let d: ExperimentDoc = serde_json::from_str(r#"{"name":"rate","n_list":[100,200]}"#).unwrap();
        assert_eq!(d.name(), "rate");
        for d in ExperimentDoc::all_defaults() {
            let s = serde_json::to_string(&d).unwrap();
            let back: ExperimentDoc = serde_json::from_str(&s).unwrap();
            assert_eq!(back, d);
        }
    }
}
