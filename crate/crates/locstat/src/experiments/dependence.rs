use std::time::Instant;

use serde::{Deserialize, Serialize};

use locstat_core::dependence::{cumulative_dependence, dependence_profile, fit_decay};

use super::{timed, ExperimentReport, MCConfig, Result, Verdict};
use crate::config::ModelDoc;
use crate::io::Table;

/// Expected values checked at every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependenceExpect {
    pub delta0: f64,
    pub delta0_rel: f64,
    pub rho_range: [f64; 2],
    pub cumulative: f64,
    pub cumulative_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DependenceParams {
    pub model: ModelDoc,
    pub u_grid: Vec<f64>,
    pub q: f64,
    pub k_max: usize,
    /// Smallest lag used by the decay fit.
    pub k_min: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<DependenceExpect>,
}

impl Default for DependenceParams {
    fn default() -> Self {
        let r2 = std::f64::consts::SQRT_2;
        DependenceParams {
            model: ModelDoc::ar1(&[0.5]),
            u_grid: vec![0.25, 0.5, 0.75],
            q: 2.0,
            k_max: 20,
            k_min: 0,
            expect: Some(DependenceExpect {
                delta0: r2,
                delta0_rel: 0.02,
                rho_range: [0.45, 0.55],
                cumulative: 2.0 * r2,
                cumulative_rel: 0.05,
            }),
        }
    }
}

pub fn exp_dependence(cfg: &MCConfig, params: &DependenceParams) -> Result<ExperimentReport> {
    let start = Instant::now();
    let model = params.model.build()?;
    let pool = cfg.pool();
    let mut profiles = Table::new("profiles", &["u", "k", "delta_hat", "stderr"]);
    let mut fits = Table::new("fits", &["u", "C", "rho", "r2", "cumulative_truncated", "cumulative_completed"]);
    let mut report = ExperimentReport::new("dependence", cfg, params);
    for (i, &u) in params.u_grid.iter().enumerate() {
        let prof = dependence_profile(&model, u, params.q, params.k_max, cfg.n_rep, cfg.seed(0xde90 + i as u64), &pool)?;
        for (k, (d, s)) in prof.delta_hat.iter().zip(&prof.stderr).enumerate() {
            profiles.push(vec![u.into(), k.into(), (*d).into(), (*s).into()]);
        }
        let fit = fit_decay(&prof, params.k_min)?;
        let cum = cumulative_dependence(&prof)?;
        fits.push(vec![u.into(), fit.c.into(), fit.rho.into(), fit.r2.into(), cum.truncated.into(), cum.completed.into()]);
        if let Some(e) = &params.expect {
            let tag = format!("{u:.2}");
            report.verdicts.push(Verdict::within(
                format!("delta0@{tag}"),
                prof.delta_hat[0],
                e.delta0 * (1.0 - e.delta0_rel),
                e.delta0 * (1.0 + e.delta0_rel),
            ));
            report.verdicts.push(Verdict::within(format!("rho@{tag}"), fit.rho, e.rho_range[0], e.rho_range[1]));
            report.verdicts.push(Verdict::within(
                format!("cumulative@{tag}"),
                cum.completed,
                e.cumulative * (1.0 - e.cumulative_rel),
                e.cumulative * (1.0 + e.cumulative_rel),
            ));
        }
    }
    report.tables = vec![profiles, fits];
    Ok(timed(report, start))
}
