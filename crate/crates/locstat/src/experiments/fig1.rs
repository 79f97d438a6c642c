use std::time::Instant;

use serde::{Deserialize, Serialize};

use locstat_core::math::{mean, quantile_sorted};
use locstat_core::simulate::{model_burn_in, taylor_remainder_from, triangular_from, Stationary, DEFAULT_TOL};
use locstat_core::Replicate;

use super::{timed, ExperimentReport, MCConfig, Result, Verdict};
use crate::config::ModelDoc;
use crate::io::Table;
use crate::svg::{LinePlot, Series};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig1Params {
    pub model: ModelDoc,
    pub n: usize,
    /// Block half-width in index units; block `i` is `((2i - 2) b, 2i b]` around `u_i = (2i - 1) b / n`.
    pub block: usize,
    pub lower: f64,
    pub upper: f64,
    /// Blocks in which the `r1` band must be narrower than the `r0` band.
    pub min_blocks: usize,
}

impl Default for Fig1Params {
    fn default() -> Self {
        Fig1Params { model: ModelDoc::arch1(0.2, &[0.0, 0.0, 0.95]), n: 500, block: 25, lower: 0.05, upper: 0.95, min_blocks: 9 }
    }
}

struct Rep {
    x: Vec<f64>,
    diff: Vec<f64>,
    r0: Vec<f64>,
    r1: Vec<f64>,
}

fn band(columns: &[Vec<f64>], lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    columns
        .iter()
        .map(|c| {
            let mut s = c.clone();
            s.sort_by(f64::total_cmp);
            (quantile_sorted(&s, lo), quantile_sorted(&s, hi))
        })
        .unzip()
}

fn transpose(reps: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|t| reps.iter().map(|r| r[t]).collect()).collect()
}

pub fn exp_fig1(cfg: &MCConfig, params: &Fig1Params) -> Result<ExperimentReport> {
    let start = Instant::now();
    let model = params.model.build()?;
    let (n, blk) = (params.n, params.block);
    if blk == 0 || n % (2 * blk) != 0 {
        return Err(locstat_core::Error::Invalid { field: "block", reason: "n must be a multiple of 2 * block".into() });
    }
    let burn = model_burn_in(&model, DEFAULT_TOL)?;
    let p = model.lags();
    let pre = Stationary::with_burn_in(&model, 0.0, burn)?;
    let frozen: Vec<Stationary> =
        (1..=n).map(|t| Stationary::with_burn_in(&model, t as f64 / n as f64, burn)).collect::<Result<_>>()?;
    let blocks = n / (2 * blk);
    let root = cfg.seed(0xf161);
    let lead = 2 * burn.steps + p;
    let reps = cfg.pool().try_map(cfg.n_rep, |k| {
        let seed = root.with_stream(k);
        let innov = model.stream(seed).window(1 - lead as i64, lead + n);
        let path = triangular_from(&pre, &innov, n, seed)?;
        let mut diff = Vec::with_capacity(n);
        for (t, st) in (1..=n).zip(&frozen) {
            diff.push(path.values[t - 1] - st.value_at(&innov, t as i64)?);
        }
        let (mut r0, mut r1) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 1..=blocks {
            let u = ((2 * i - 1) * blk) as f64 / n as f64;
            let rows = taylor_remainder_from(&model, u, ((2 * i - 2) * blk + 1, 2 * i * blk), n, &innov, burn)?;
            r0.extend(rows.iter().map(|r| r.r0));
            r1.extend(rows.iter().map(|r| r.r1));
        }
        Ok(Rep { x: path.values, diff, r0, r1 })
    })?;

    let (lo, hi) = (params.lower, params.upper);
    let cols = |f: fn(&Rep) -> &Vec<f64>| transpose(&reps.iter().map(|r| f(r).clone()).collect::<Vec<_>>(), n);
    let (d_lo, d_hi) = band(&cols(|r| &r.diff), lo, hi);
    let (r0_lo, r0_hi) = band(&cols(|r| &r.r0), lo, hi);
    let (r1_lo, r1_hi) = band(&cols(|r| &r.r1), lo, hi);
    let u_of = |t: usize| t as f64 / n as f64;

    let mut report = ExperimentReport::new("fig1", cfg, params);
    let mut real = Table::new("realization", &["t", "u", "x", "diff"]);
    for t in 1..=n {
        real.push(vec![t.into(), u_of(t).into(), reps.first().map_or(f64::NAN, |r| r.x[t - 1]).into(), reps.first().map_or(f64::NAN, |r| r.diff[t - 1]).into()]);
    }
    let mut quant = Table::new("quantiles", &["t", "u", "q_lo", "q_hi"]);
    let mut taylor = Table::new("taylor_quantiles", &["t", "u", "block", "r0_lo", "r0_hi", "r1_lo", "r1_hi"]);
    for t in 1..=n {
        quant.push(vec![t.into(), u_of(t).into(), d_lo[t - 1].into(), d_hi[t - 1].into()]);
        let i = (t - 1) / (2 * blk) + 1;
        taylor.push(vec![
            t.into(),
            u_of(t).into(),
            i.into(),
            r0_lo[t - 1].into(),
            r0_hi[t - 1].into(),
            r1_lo[t - 1].into(),
            r1_hi[t - 1].into(),
        ]);
    }
    let mut block_table = Table::new("blocks", &["block", "u", "r0_width", "r1_width"]);
    let mut narrower = 0usize;
    for i in 1..=blocks {
        let range = (i - 1) * 2 * blk..i * 2 * blk;
        let w0 = mean(&range.clone().map(|j| r0_hi[j] - r0_lo[j]).collect::<Vec<_>>());
        let w1 = mean(&range.map(|j| r1_hi[j] - r1_lo[j]).collect::<Vec<_>>());
        if w1 < w0 {
            narrower += 1;
        }
        block_table.push(vec![i.into(), (((2 * i - 1) * blk) as f64 / n as f64).into(), w0.into(), w1.into()]);
    }
    let decile = (n / 10).max(1);
    let first = mean(&d_hi[..decile].iter().map(|v| v.abs()).collect::<Vec<_>>());
    let last = mean(&d_hi[n - decile..].iter().map(|v| v.abs()).collect::<Vec<_>>());
    let mut deciles = Table::new("deciles", &["decile", "mean_abs_q_hi"]);
    deciles.push(vec!["first".into(), first.into()]);
    deciles.push(vec!["last".into(), last.into()]);

    report.verdicts.push(Verdict::gt("band_widens", last - first, 0.0));
    report.verdicts.push(Verdict::ge("derivative_narrows", narrower as f64, params.min_blocks as f64));

    let ts: Vec<f64> = (1..=n).map(u_of).collect();
    report.plots.push((
        "quantiles".into(),
        LinePlot::new("stationary approximation error", "t/n", "X - X~(t/n)")
            .with(Series::new("realization", ts.clone(), reps.first().map_or(vec![], |r| r.diff.clone())))
            .with(Series::new(format!("q{lo}"), ts.clone(), d_lo.clone()))
            .with(Series::new(format!("q{hi}"), ts.clone(), d_hi.clone()))
            .render(),
    ));
    report.plots.push((
        "taylor".into(),
        LinePlot::new("Taylor remainder bands", "t/n", "remainder")
            .with(Series::new("r0 lo", ts.clone(), r0_lo))
            .with(Series::new("r0 hi", ts.clone(), r0_hi))
            .with(Series::new("r1 lo", ts.clone(), r1_lo))
            .with(Series::new("r1 hi", ts, r1_hi))
            .render(),
    ));
    report.tables = vec![real, quant, taylor, block_table, deciles];
    Ok(timed(report, start))
}
