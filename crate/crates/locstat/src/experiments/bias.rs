use std::time::Instant;

use serde::{Deserialize, Serialize};

use locstat_core::localize::{bias_decomposition, BiasConfig};
use locstat_core::math::LineFit;
use locstat_core::optim::OptimizerConfig;
use locstat_core::qmle::bias_corrected_check;
use locstat_core::{make_kernel, Error, KernelFamily};

use super::{mean_oracle, timed, ExperimentReport, MCConfig, Result, Verdict};
use crate::config::{kernel_name, EstimationDoc, ModelDoc, Transform};
use crate::io::{Cell, Table};

fn default_b_list() -> Vec<f64> {
    vec![0.1, 0.15, 0.2, 0.3, 0.4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasParams {
    pub model: ModelDoc,
    pub transform: Transform,
    pub u: f64,
    pub n: usize,
    pub b_list: Vec<f64>,
    /// `[symmetric, one-sided]`.
    pub kernels: [KernelFamily; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    pub oracle_len: usize,
    pub min_gap: f64,
}

impl Default for BiasParams {
    fn default() -> Self {
        BiasParams {
            model: ModelDoc::arch1(0.2, &[0.0, 0.0, 0.95]),
            transform: Transform::Square,
            u: 0.5,
            n: 20_000,
            b_list: default_b_list(),
            kernels: [KernelFamily::Epanechnikov, KernelFamily::OneSided],
            reference: None,
            oracle_len: 1_000_000,
            min_gap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmleBiasParams {
    pub model: ModelDoc,
    pub estimation: EstimationDoc,
    pub u: f64,
    pub coord: usize,
    pub theta0: f64,
    pub n: usize,
    pub b_list: Vec<f64>,
    pub kernels: [KernelFamily; 2],
    pub optimizer: OptimizerConfig,
    pub min_gap: f64,
}

impl Default for QmleBiasParams {
    fn default() -> Self {
        QmleBiasParams {
            model: ModelDoc::ar1(&[0.0, 0.9]),
            estimation: EstimationDoc::Ar { p: 1, sigma: 1.0, theta_box: vec![[-0.99, 0.99]], sigma_floor: 1e-6 },
            u: 0.5,
            coord: 0,
            theta0: 0.45,
            n: 20_000,
            b_list: default_b_list(),
            kernels: [KernelFamily::Epanechnikov, KernelFamily::OneSided],
            optimizer: OptimizerConfig::default(),
            min_gap: 0.5,
        }
    }
}

struct Arm {
    kernel: KernelFamily,
    rows: Vec<[f64; 5]>,
    fit_raw: Option<LineFit>,
    fit_coupled: Option<LineFit>,
}

fn exponent(fit: &Option<LineFit>) -> f64 {
    fit.map_or(f64::NAN, |f| f.slope)
}

fn assemble(name: &str, cfg: &MCConfig, params: &impl Serialize, arms: Vec<Arm>, min_gap: f64, reference: f64) -> ExperimentReport {
    let mut report = ExperimentReport::new(name, cfg, params);
    let mut rows = Table::new("bias", &["kernel", "b", "gap_raw", "se_raw", "gap_coupled", "se_coupled"]);
    let mut fits = Table::new("exponents", &["kernel", "exponent_raw", "r2_raw", "exponent_coupled", "r2_coupled"]);
    for a in &arms {
        for r in &a.rows {
            let mut row: Vec<Cell> = vec![kernel_name(a.kernel).into()];
            row.extend(r.iter().map(|v| Cell::from(*v)));
            rows.push(row);
        }
        fits.push(vec![
            kernel_name(a.kernel).into(),
            exponent(&a.fit_raw).into(),
            a.fit_raw.map_or(f64::NAN, |f| f.r2).into(),
            exponent(&a.fit_coupled).into(),
            a.fit_coupled.map_or(f64::NAN, |f| f.r2).into(),
        ]);
    }
    let gap = exponent(&arms[0].fit_coupled) - exponent(&arms[1].fit_coupled);
    report.verdicts.push(Verdict::ge("exponent_gap", gap, min_gap));
    let mut r = Table::new("reference", &["reference"]);
    r.push(vec![reference.into()]);
    report.tables = vec![rows, fits, r];
    report
}

fn check_pair(kernels: &[KernelFamily; 2]) -> Result<()> {
    if !make_kernel(kernels[0]).sym() || make_kernel(kernels[1]).sym() {
        return Err(Error::Invalid { field: "kernels", reason: "expected [symmetric, one-sided]".into() });
    }
    Ok(())
}

/// Bias of the local mean across bandwidths for a symmetric and a one-sided kernel.
pub fn exp_bias(cfg: &MCConfig, params: &BiasParams) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_pair(&params.kernels)?;
    let model = params.model.build()?;
    let reference = match params.reference {
        Some(v) => v,
        None => mean_oracle(&model, params.transform, params.u, params.oracle_len, cfg.seed(0xb1a5))?,
    };
    let pool = cfg.pool();
    let bc = BiasConfig { n: params.n, n_rep: cfg.n_rep, seed: cfg.seed(0xb1a0) };
    let g = |x: f64| params.transform.apply(x);
    let mut arms = Vec::new();
    for fam in params.kernels {
        let t = bias_decomposition(&model, &make_kernel(fam), &params.b_list, params.u, &g, reference, &bc, &pool)?;
        arms.push(Arm {
            kernel: fam,
            rows: t.rows.iter().map(|r| [r.b, r.mean_gap_raw, r.se_raw, r.mean_gap_coupled, r.se_coupled]).collect(),
            fit_raw: t.fit_raw,
            fit_coupled: t.fit_coupled,
        });
    }
    Ok(timed(assemble("bias", cfg, params, arms, params.min_gap, reference), start))
}

/// Bias of one coordinate of the local likelihood estimator across bandwidths.
pub fn exp_qmle_bias(cfg: &MCConfig, params: &QmleBiasParams) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_pair(&params.kernels)?;
    let model = params.model.build()?;
    let spec = params.estimation.build()?;
    let pool = cfg.pool();
    let bc = BiasConfig { n: params.n, n_rep: cfg.n_rep, seed: cfg.seed(0xb1a7) };
    let mut arms = Vec::new();
    for fam in params.kernels {
        let t = bias_corrected_check(
            &spec,
            &model,
            &make_kernel(fam),
            &params.b_list,
            params.u,
            params.coord,
            params.theta0,
            &bc,
            &params.optimizer,
            &pool,
        )?;
        arms.push(Arm {
            kernel: fam,
            rows: t.rows.iter().map(|r| [r.b, r.bias_raw, r.se_raw, r.bias_coupled, r.se_coupled]).collect(),
            fit_raw: t.fit_raw,
            fit_coupled: t.fit_coupled,
        });
    }
    Ok(timed(assemble("qmle_bias", cfg, params, arms, params.min_gap, params.theta0), start))
}
