use std::time::Instant;

use serde::{Deserialize, Serialize};

use locstat_core::localize::local_mean;
use locstat_core::math::median;
use locstat_core::simulate::{model_burn_in, simulate_path_with, Stationary, DEFAULT_TOL};
use locstat_core::{make_kernel, KernelFamily, Replicate};

use super::{mean_oracle, timed, ExperimentReport, MCConfig, Result, Verdict};
use crate::config::{BandwidthRule, ModelDoc, Transform};
use crate::io::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlnParams {
    pub model: ModelDoc,
    pub transform: Transform,
    pub u: f64,
    pub n_list: Vec<usize>,
    pub b_rule: BandwidthRule,
    pub kernel: KernelFamily,
    /// Overrides the closed-form or long-run oracle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
    /// Stationary sample length for the Monte Carlo oracle.
    pub oracle_len: usize,
    /// Bound on the median relative error at the largest `n`.
    pub rel_tol: f64,
}

impl Default for LlnParams {
    fn default() -> Self {
        LlnParams {
            model: ModelDoc::arch1(0.2, &[0.0, 0.0, 0.95]),
            transform: Transform::Square,
            u: 0.5,
            n_list: vec![1000, 10_000, 100_000],
            b_rule: BandwidthRule::CUBE_ROOT,
            kernel: KernelFamily::Epanechnikov,
            oracle: None,
            oracle_len: 1_000_000,
            rel_tol: 0.05,
        }
    }
}

pub fn exp_lln(cfg: &MCConfig, params: &LlnParams) -> Result<ExperimentReport> {
    let start = Instant::now();
    let model = params.model.build()?;
    let kernel = make_kernel(params.kernel);
    let oracle = match params.oracle {
        Some(v) => v,
        None => mean_oracle(&model, params.transform, params.u, params.oracle_len, cfg.seed(0x0a11))?,
    };
    let pre = Stationary::with_burn_in(&model, 0.0, model_burn_in(&model, DEFAULT_TOL)?)?;
    let pool = cfg.pool();
    let mut reps = Table::new("replications", &["n", "b", "rep", "estimate", "abs_error"]);
    let mut summary = Table::new("median_error", &["n", "b", "median_abs_error", "median_rel_error"]);
    let mut medians = Vec::new();
    for &n in &params.n_list {
        let b = params.b_rule.at(n);
        let root = cfg.seed(n as u64);
        let est = pool.try_map(cfg.n_rep, |k| {
            let path = simulate_path_with(&pre, n, root.with_stream(k))?;
            let g: Vec<f64> = path.values.iter().map(|x| params.transform.apply(*x)).collect();
            Ok(local_mean(&g, &kernel, b, params.u)?.value)
        })?;
        let errs: Vec<f64> = est.iter().map(|e| (e - oracle).abs()).collect();
        for (k, (e, a)) in est.iter().zip(&errs).enumerate() {
            reps.push(vec![n.into(), b.into(), k.into(), (*e).into(), (*a).into()]);
        }
        let m = median(&errs);
        summary.push(vec![n.into(), b.into(), m.into(), (m / oracle.abs()).into()]);
        medians.push(m);
    }
    let mut report = ExperimentReport::new("lln", cfg, params);
    let drops = medians.windows(2).filter(|w| w[1] < w[0]).count();
    report.verdicts.push(Verdict::ge("monotone_decrease", drops as f64, medians.len().saturating_sub(1) as f64));
    let last = *medians.last().unwrap_or(&f64::NAN);
    report.verdicts.push(Verdict::lt("relative_error_at_n_max", last / oracle.abs(), params.rel_tol));
    let mut o = Table::new("oracle", &["u", "oracle"]);
    o.push(vec![params.u.into(), oracle.into()]);
    report.tables = vec![summary, reps, o];
    Ok(timed(report, start))
}
