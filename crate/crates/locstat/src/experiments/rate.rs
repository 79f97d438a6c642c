use std::time::Instant;

use serde::{Deserialize, Serialize};

use locstat_core::math::log_log_slope;
use locstat_core::simulate::{model_burn_in, triangular_from, Stationary, DEFAULT_TOL};
use locstat_core::Replicate;

use super::{timed, ExperimentReport, MCConfig, Result, Verdict};
use crate::config::ModelDoc;
use crate::io::Table;
use crate::svg::{LinePlot, Series};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateParams {
    pub model: ModelDoc,
    pub n_list: Vec<usize>,
    pub slope_range: [f64; 2],
}

impl Default for RateParams {
    fn default() -> Self {
        RateParams { model: ModelDoc::ar1(&[0.0, 0.5]), n_list: vec![250, 500, 1000, 2000], slope_range: [-1.3, -0.7] }
    }
}

/// Monte Carlo `sup_t E|X_{t,n} - X~_t(t/n)|` for each `n`.
pub fn exp_rate(cfg: &MCConfig, params: &RateParams) -> Result<ExperimentReport> {
    let start = Instant::now();
    let model = params.model.build()?;
    if params.n_list.len() < 2 {
        return Err(locstat_core::Error::Invalid { field: "n_list", reason: "need at least two sample sizes".into() });
    }
    let burn = model_burn_in(&model, DEFAULT_TOL)?;
    let pre = Stationary::with_burn_in(&model, 0.0, burn)?;
    let p = model.lags();
    let pool = cfg.pool();
    let mut table = Table::new("rate", &["n", "sup_l1", "argmax_t", "mean_l1"]);
    let (mut ns, mut sups) = (Vec::new(), Vec::new());
    for &n in &params.n_list {
        let frozen: Vec<Stationary> =
            (1..=n).map(|t| Stationary::with_burn_in(&model, t as f64 / n as f64, burn)).collect::<Result<_>>()?;
        let root = cfg.seed(n as u64);
        let lead = burn.steps + p;
        let errs = pool.try_map(cfg.n_rep, |k| {
            let seed = root.with_stream(k);
            let innov = model.stream(seed).window(1 - lead as i64, lead + n);
            let path = triangular_from(&pre, &innov, n, seed)?;
            (1..=n)
                .zip(&frozen)
                .map(|(t, st)| Ok((path.values[t - 1] - st.value_at(&innov, t as i64)?).abs()))
                .collect::<Result<Vec<f64>>>()
        })?;
        let per_t: Vec<f64> = (0..n).map(|t| errs.iter().map(|e| e[t]).sum::<f64>() / errs.len() as f64).collect();
        let (arg, sup) = per_t.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, v)| if *v > a.1 { (i, *v) } else { a });
        table.push(vec![n.into(), sup.into(), (arg + 1).into(), (per_t.iter().sum::<f64>() / n as f64).into()]);
        ns.push(n as f64);
        sups.push(sup);
    }
    let fit = log_log_slope(&ns, &sups);
    let mut report = ExperimentReport::new("rate", cfg, params);
    report.verdicts.push(Verdict::within("slope", fit.slope, params.slope_range[0], params.slope_range[1]));
    report.plots.push((
        "rate".into(),
        LinePlot::new("approximation error", "log n", "log sup_t L1")
            .with(Series::new("sup_t L1", ns.iter().map(|v| v.ln()).collect(), sups.iter().map(|v| v.ln()).collect()))
            .render(),
    ));
    report.tables.push(table);
    Ok(timed(report, start))
}
