use std::time::Instant;

use serde::{Deserialize, Serialize};

use locstat_core::localize::{clt_statistic, long_run_variance, Centering, LrvConfig};
use locstat_core::math::{ks_distance_normal, variance};
use locstat_core::simulate::{model_burn_in, simulate_path_with, Stationary, DEFAULT_TOL};
use locstat_core::{make_kernel, KernelFamily, Replicate};

use super::{timed, ExperimentReport, MCConfig, Result, Verdict};
use crate::config::ModelDoc;
use crate::io::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CltParams {
    pub model: ModelDoc,
    pub u: f64,
    pub n: usize,
    pub b: f64,
    pub kernel: KernelFamily,
    /// Constant centering `E X_{t,n}`.
    pub center: f64,
    /// Known long-run variance; when absent it is estimated from independent stationary runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lrv: Option<f64>,
    pub lrv_reps: usize,
    pub lrv_len: usize,
    pub ks_tol: f64,
    pub var_tol: f64,
}

impl Default for CltParams {
    fn default() -> Self {
        CltParams {
            model: ModelDoc::ar1(&[0.0, 0.5]),
            u: 0.5,
            n: 10_000,
            b: 0.1,
            kernel: KernelFamily::Epanechnikov,
            center: 0.0,
            lrv: None,
            lrv_reps: 100,
            lrv_len: 20_000,
            ks_tol: 0.05,
            var_tol: 0.10,
        }
    }
}

impl CltParams {
    /// i.i.d. standard Gaussian input with its exact long-run variance.
    pub fn iid() -> Self {
        CltParams { model: ModelDoc::ar1(&[0.0]), lrv: Some(1.0), ks_tol: 0.04, ..CltParams::default() }
    }
}

pub fn exp_clt(cfg: &MCConfig, params: &CltParams) -> Result<ExperimentReport> {
    let start = Instant::now();
    let model = params.model.build()?;
    let kernel = make_kernel(params.kernel);
    let pool = cfg.pool();
    let (sigma2, lrv_se) = match params.lrv {
        Some(v) => (v, 0.0),
        None => {
            let c = LrvConfig { n_rep: params.lrv_reps, t_len: params.lrv_len, seed: cfg.seed(0x11f0) };
            let l = long_run_variance(&model, params.u, None, &c, &pool)?;
            (l.value, l.stderr)
        }
    };
    let target = kernel.l2() * sigma2;
    let pre = Stationary::with_burn_in(&model, 0.0, model_burn_in(&model, DEFAULT_TOL)?)?;
    let root = cfg.seed(0xc17);
    let stats = pool.try_map(cfg.n_rep, |k| {
        let path = simulate_path_with(&pre, params.n, root.with_stream(k))?;
        Ok(clt_statistic(&path.values, &kernel, params.b, params.u, Centering::Constant(params.center), 1.0)?.value)
    })?;
    let z: Vec<f64> = stats.iter().map(|s| s / target.sqrt()).collect();
    let ks = ks_distance_normal(&z);
    let var_ratio = variance(&stats) / target;
    let mut reps = Table::new("statistics", &["rep", "statistic", "standardized"]);
    for (k, (s, zk)) in stats.iter().zip(&z).enumerate() {
        reps.push(vec![k.into(), (*s).into(), (*zk).into()]);
    }
    let mut oracle = Table::new("oracle", &["u", "long_run_variance", "stderr", "int_k2", "target_variance"]);
    oracle.push(vec![params.u.into(), sigma2.into(), lrv_se.into(), kernel.l2().into(), target.into()]);
    let mut report = ExperimentReport::new("clt", cfg, params);
    report.verdicts.push(Verdict::lt("ks_distance", ks, params.ks_tol));
    report.verdicts.push(Verdict::within("variance_ratio", var_ratio, 1.0 - params.var_tol, 1.0 + params.var_tol));
    report.tables = vec![reps, oracle];
    Ok(timed(report, start))
}
