use std::time::Instant;

use serde::{Deserialize, Serialize};

use locstat_core::math::log_log_slope;
use locstat_core::simulate::{model_burn_in, Stationary, DEFAULT_TOL};
use locstat_core::Replicate;

use super::{default_u_grid, timed, ExperimentReport, MCConfig, Result, Verdict};
use crate::config::ModelDoc;
use crate::io::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DerivativeParams {
    /// Models checked against the central finite difference.
    pub models: Vec<ModelDoc>,
    pub u_grid: Vec<f64>,
    pub t_len: usize,
    pub h: f64,
    pub l1_tol: f64,
    /// Model for the first-order Taylor remainder exponent.
    pub taylor_model: ModelDoc,
    pub taylor_u: f64,
    pub taylor_h: Vec<f64>,
    pub exponent_range: [f64; 2],
}

impl Default for DerivativeParams {
    fn default() -> Self {
        DerivativeParams {
            models: vec![ModelDoc::ar1(&[0.0, 0.5]), ModelDoc::expar(0.8, &[0.3, 0.4])],
            u_grid: default_u_grid(),
            t_len: 2000,
            h: 1e-4,
            l1_tol: 1e-3,
            taylor_model: ModelDoc::ar1(&[0.1, 0.4, 0.3]),
            taylor_u: 0.4,
            taylor_h: vec![0.0125, 0.025, 0.05, 0.1],
            exponent_range: [1.7, 2.3],
        }
    }
}

/// `D_t(u)` against `(X~_t(u + h) - X~_t(u - h)) / 2h` on shared innovations, and the decay of
/// `mean_t |X~_t(u + h) - X~_t(u) - h D_t(u)|` in `h`.
pub fn exp_derivative(cfg: &MCConfig, params: &DerivativeParams) -> Result<ExperimentReport> {
    let start = Instant::now();
    let pool = cfg.pool();
    let mut report = ExperimentReport::new("derivative", cfg, params);
    let mut fd = Table::new("finite_difference", &["model", "u", "rep", "l1"]);
    let t_len = params.t_len;
    for (mi, doc) in params.models.iter().enumerate() {
        let model = doc.build()?;
        let burn = model_burn_in(&model, DEFAULT_TOL)?;
        let lead = 2 * burn.steps;
        let mut worst: f64 = 0.0;
        for (ui, &u) in params.u_grid.iter().enumerate() {
            let (lo, hi) = ((u - params.h).max(0.0), (u + params.h).min(1.0));
            let st = Stationary::with_burn_in(&model, u, burn)?;
            let st_lo = Stationary::with_burn_in(&model, lo, burn)?;
            let st_hi = Stationary::with_burn_in(&model, hi, burn)?;
            let root = cfg.seed(0xdd00 + (mi * 100 + ui) as u64);
            let l1 = pool.try_map(cfg.n_rep, |k| {
                let innov = model.stream(root.with_stream(k)).window(1 - lead as i64, lead + t_len);
                let d = st.run(&innov, 1, t_len, 1)?;
                let a = st_lo.run(&innov, 1, t_len, 0)?;
                let b = st_hi.run(&innov, 1, t_len, 0)?;
                let d1 = d.d1.expect("order-1 run");
                let err: f64 = (0..t_len).map(|i| (d1[i] - (b.x[i] - a.x[i]) / (hi - lo)).abs()).sum();
                Ok(err / t_len as f64)
            })?;
            for (k, v) in l1.iter().enumerate() {
                fd.push(vec![model.name().into(), u.into(), k.into(), (*v).into()]);
                worst = worst.max(*v);
            }
        }
        report.verdicts.push(Verdict::lt(format!("fd_l1_{}_{}", mi, model.name()), worst, params.l1_tol));
    }

    let model = params.taylor_model.build()?;
    let burn = model_burn_in(&model, DEFAULT_TOL)?;
    let lead = 2 * burn.steps;
    let u = params.taylor_u;
    let centre = Stationary::with_burn_in(&model, u, burn)?;
    let shifted: Vec<Stationary> = params.taylor_h.iter().map(|h| Stationary::with_burn_in(&model, u + h, burn)).collect::<Result<_>>()?;
    let root = cfg.seed(0xdd7a);
    let per_rep = pool.try_map(cfg.n_rep, |k| {
        let innov = model.stream(root.with_stream(k)).window(1 - lead as i64, lead + t_len);
        let c = centre.run(&innov, 1, t_len, 1)?;
        let d1 = c.d1.expect("order-1 run");
        params
            .taylor_h
            .iter()
            .zip(&shifted)
            .map(|(h, st)| {
                let s = st.run(&innov, 1, t_len, 0)?;
                Ok((0..t_len).map(|i| (s.x[i] - c.x[i] - h * d1[i]).abs()).sum::<f64>() / t_len as f64)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let mut taylor = Table::new("taylor", &["h", "mean_abs_r1"]);
    let mut r1 = Vec::new();
    for (j, h) in params.taylor_h.iter().enumerate() {
        let m = per_rep.iter().map(|r| r[j]).sum::<f64>() / per_rep.len() as f64;
        taylor.push(vec![(*h).into(), m.into()]);
        r1.push(m);
    }
    let fit = log_log_slope(&params.taylor_h, &r1);
    report.verdicts.push(Verdict::within("taylor_r1_exponent", fit.slope, params.exponent_range[0], params.exponent_range[1]));
    report.tables = vec![fd, taylor];
    Ok(timed(report, start))
}
