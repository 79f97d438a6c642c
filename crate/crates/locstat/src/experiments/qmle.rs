use std::time::Instant;

use serde::{Deserialize, Serialize};

use locstat_core::math::{median, variance};
use locstat_core::optim::OptimizerConfig;
use locstat_core::qmle::{estimate_theta, sandwich_ci, LikelihoodSpec};
use locstat_core::simulate::{model_burn_in, simulate_path, simulate_path_with, simulate_stationary, Stationary, DEFAULT_TOL};
use locstat_core::{make_kernel, Kernel, KernelFamily, ModelSpec, Replicate, Seed};

use super::{timed, ExperimentReport, MCConfig, Result, Verdict};
use crate::config::{BandwidthRule, EstimationDoc, ModelDoc};
use crate::io::Table;
use crate::pool::Pool;

/// Closed-form agreement of the local least-squares fit of a tvAR(1) path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsCheck {
    pub model: ModelDoc,
    pub n: usize,
    pub b: f64,
    pub u_grid: Vec<f64>,
    pub tol: f64,
}

impl Default for LsCheck {
    fn default() -> Self {
        LsCheck { model: ModelDoc::ar1(&[0.0, 0.5]), n: 2000, b: 0.2, u_grid: vec![0.2, 0.35, 0.5, 0.65, 0.8], tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmleParams {
    pub model: ModelDoc,
    pub estimation: EstimationDoc,
    pub u: f64,
    pub coord: usize,
    pub theta0: f64,
    pub n_list: Vec<usize>,
    pub b_rule: BandwidthRule,
    pub kernel: KernelFamily,
    pub level: f64,
    pub coverage_n: usize,
    pub coverage_reps: usize,
    pub coverage_range: [f64; 2],
    /// Stationary sample length for the Hessian oracle.
    pub v_oracle_len: usize,
    pub optimizer: OptimizerConfig,
    pub ls: LsCheck,
}

impl Default for QmleParams {
    fn default() -> Self {
        QmleParams {
            model: ModelDoc::expar(0.8, &[0.5]),
            estimation: EstimationDoc::Expar { a0: 0.8, theta_box: vec![[0.0, 2.0]], sigma_floor: 1e-6 },
            u: 0.5,
            coord: 0,
            theta0: 0.5,
            n_list: vec![2000, 8000, 32000],
            b_rule: BandwidthRule::CUBE_ROOT,
            kernel: KernelFamily::Epanechnikov,
            level: 0.9,
            coverage_n: 4000,
            coverage_reps: 500,
            coverage_range: [0.85, 0.95],
            v_oracle_len: 400_000,
            optimizer: OptimizerConfig::default(),
            ls: LsCheck::default(),
        }
    }
}

struct Rep {
    theta: f64,
    ci: (f64, f64),
}

#[allow(clippy::too_many_arguments)]
fn replicate(
    pool: &Pool,
    pre: &Stationary<'_>,
    spec: &LikelihoodSpec,
    kernel: &Kernel,
    params: &QmleParams,
    n: usize,
    reps: usize,
    root: Seed,
) -> Vec<Result<Rep>> {
    let b = params.b_rule.at(n);
    pool.map(reps, |k| {
        let path = simulate_path_with(pre, n, root.with_stream(k))?;
        let fit = estimate_theta(&path.values, spec, kernel, b, params.u, &params.optimizer)?;
        let ci = sandwich_ci(&fit, kernel, n, b, params.level)?[params.coord];
        Ok(Rep { theta: fit.theta_hat[params.coord], ci })
    })
}

/// `E[mu'^2 + 2 sigma'^2] / sigma^2` at `theta` over a long stationary run (one-dimensional case).
fn hessian_oracle(model: &ModelSpec, spec: &LikelihoodSpec, theta: &[f64], u: f64, len: usize, seed: Seed) -> Result<f64> {
    let p = spec.lags();
    let s = simulate_stationary(model, u, len + p, seed, DEFAULT_TOL)?;
    let (mut dmu, mut dsig) = (vec![0.0; theta.len()], vec![0.0; theta.len()]);
    let mut acc = 0.0;
    let mut y = vec![0.0; p];
    for t in p..s.x.len() {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = s.x[t - 1 - i];
        }
        spec.grads(&y, theta, &mut dmu, &mut dsig);
        let sd = spec.form.scale(&y, theta);
        acc += (dmu[0] * dmu[0] + 2.0 * dsig[0] * dsig[0]) / (sd * sd);
    }
    Ok(acc / len as f64)
}

/// `sum_t w_t x_t x_{t-1} / sum_t w_t x_{t-1}^2`.
fn weighted_ls(x: &[f64], kernel: &Kernel, b: f64, u: f64) -> f64 {
    let n = x.len();
    let (mut num, mut den) = (0.0, 0.0);
    for t in 2..=n {
        let w = kernel.eval((t as f64 / n as f64 - u) / b);
        num += w * x[t - 1] * x[t - 2];
        den += w * x[t - 2] * x[t - 2];
    }
    num / den
}

pub fn exp_qmle(cfg: &MCConfig, params: &QmleParams) -> Result<ExperimentReport> {
    let start = Instant::now();
    let model = params.model.build()?;
    let spec = params.estimation.build()?;
    if params.coord >= spec.dim() {
        return Err(locstat_core::Error::Invalid { field: "coord", reason: "coordinate outside the parameter dimension".into() });
    }
    let kernel = make_kernel(params.kernel);
    let pool = cfg.pool();
    let pre = Stationary::with_burn_in(&model, 0.0, model_burn_in(&model, DEFAULT_TOL)?)?;
    let mut report = ExperimentReport::new("qmle", cfg, params);

    let mut consistency = Table::new("consistency", &["n", "b", "median_abs_error", "fits", "failures"]);
    let mut medians = Vec::new();
    for &n in &params.n_list {
        let out = replicate(&pool, &pre, &spec, &kernel, params, n, cfg.n_rep, cfg.seed(n as u64));
        let errs: Vec<f64> = out.iter().filter_map(|r| r.as_ref().ok()).map(|r| (r.theta - params.theta0).abs()).collect();
        let m = median(&errs);
        consistency.push(vec![n.into(), params.b_rule.at(n).into(), m.into(), errs.len().into(), (out.len() - errs.len()).into()]);
        medians.push(m);
    }
    let drops = medians.windows(2).filter(|w| w[1] < w[0]).count();
    report.verdicts.push(Verdict::ge("monotone_median_error", drops as f64, medians.len().saturating_sub(1) as f64));

    let n = params.coverage_n;
    let b = params.b_rule.at(n);
    let out = replicate(&pool, &pre, &spec, &kernel, params, n, params.coverage_reps, cfg.seed(0xc0e5));
    let mut cov = Table::new("coverage_reps", &["rep", "theta_hat", "ci_lo", "ci_hi", "covers"]);
    let (mut hits, mut thetas, mut widths) = (0usize, Vec::new(), Vec::new());
    for (k, r) in out.iter().enumerate() {
        match r {
            Ok(r) => {
                let covers = r.ci.0 <= params.theta0 && params.theta0 <= r.ci.1;
                hits += covers as usize;
                thetas.push(r.theta);
                widths.push(r.ci.1 - r.ci.0);
                cov.push(vec![k.into(), r.theta.into(), r.ci.0.into(), r.ci.1.into(), (covers as usize).into()]);
            }
            Err(_) => cov.push(vec![k.into(), f64::NAN.into(), f64::NAN.into(), f64::NAN.into(), 0usize.into()]),
        }
    }
    let coverage = hits as f64 / out.len() as f64;
    report.verdicts.push(Verdict::within("coverage", coverage, params.coverage_range[0], params.coverage_range[1]));

    let mut var = Table::new("variance", &["n", "b", "empirical_scaled_var", "theory_scaled_var", "mean_ci_width", "theory_ci_width"]);
    if spec.dim() == 1 {
        let mut theta0 = vec![0.0; spec.dim()];
        theta0[params.coord] = params.theta0;
        let v = hessian_oracle(&model, &spec, &theta0, params.u, params.v_oracle_len, cfg.seed(0x7a0c))?;
        let nb = n as f64 * b;
        let theory = kernel.l2() / v;
        let z = locstat_core::math::norm_quantile(0.5 * (1.0 + params.level));
        var.push(vec![
            n.into(),
            b.into(),
            (variance(&thetas) * nb).into(),
            theory.into(),
            (widths.iter().sum::<f64>() / widths.len() as f64).into(),
            (2.0 * z * (theory / nb).sqrt()).into(),
        ]);
    }

    let ls = &params.ls;
    let ls_model = ls.model.build()?;
    let ls_spec = EstimationDoc::Ar { p: 1, sigma: 1.0, theta_box: vec![[-0.99, 0.99]], sigma_floor: 1e-6 }.build()?;
    let path = simulate_path(&ls_model, ls.n, cfg.seed(0x1500))?;
    let mut ls_table = Table::new("least_squares", &["u", "theta_hat", "closed_form", "abs_diff"]);
    let mut worst: f64 = 0.0;
    for &u in &ls.u_grid {
        let fit = estimate_theta(&path.values, &ls_spec, &kernel, ls.b, u, &params.optimizer)?;
        let exact = weighted_ls(&path.values, &kernel, ls.b, u);
        let d = (fit.theta_hat[0] - exact).abs();
        worst = worst.max(d);
        ls_table.push(vec![u.into(), fit.theta_hat[0].into(), exact.into(), d.into()]);
    }
    report.verdicts.push(Verdict::lt("least_squares_agreement", worst, ls.tol));
    report.tables = vec![consistency, cov, var, ls_table];
    Ok(timed(report, start))
}
