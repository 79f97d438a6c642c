//! Kernel-localized statistics of a series observed at `t = 1..=n`.

use alloc::vec;
use alloc::vec::Vec;

use crate::dependence::{dependence_profile, fit_decay};
use crate::error::{Error, Result};
use crate::kernel::{check_bandwidth, Kernel};
use crate::math::{self, ceil, floor, ln, powf, sqrt, LineFit};
use crate::mc::{mean_se, Replicate};
use crate::model::ModelSpec;
use crate::rng::Seed;
use crate::simulate::{model_burn_in, select_burn_in, triangular_from, Stationary, DEFAULT_TOL};

/// Windows with `n b` below this are flagged.
pub const SMALL_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedStat {
    pub u: f64,
    pub b: f64,
    pub value: f64,
    /// `sum_t |K((t/n - u)/b)| / sup|K|`.
    pub effective_count: f64,
    /// `b/2 <= u <= 1 - b/2`.
    pub interior: bool,
    /// `n b < 10`.
    pub small_window: bool,
}

/// Index range `lo..=hi` (1-based) that contains every `t` with nonzero weight.
fn window(n: usize, b: f64, u: f64) -> (usize, usize) {
    let nf = n as f64;
    let lo = floor(nf * (u - 0.5 * b)) - 1.0;
    let hi = ceil(nf * (u + 0.5 * b)) + 1.0;
    let lo = if lo < 1.0 { 1 } else { lo as usize };
    let hi = if hi > nf { n } else { hi as usize };
    (lo, hi)
}

#[inline]
fn weight(kernel: &Kernel, t: usize, n: usize, b: f64, u: f64) -> f64 {
    kernel.eval((t as f64 / n as f64 - u) / b)
}

fn check_u(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::invalid("u", "rescaled time must lie in [0, 1]"))
    }
}

fn is_interior(u: f64, b: f64) -> bool {
    u >= 0.5 * b && u <= 1.0 - 0.5 * b
}

/// `(1/(n b)) sum_t K((t/n - u)/b) x_t`.
pub fn local_mean(series: &[f64], kernel: &Kernel, b: f64, u: f64) -> Result<LocalizedStat> {
    check_bandwidth(b)?;
    check_u(u)?;
    let n = series.len();
    let (lo, hi) = window(n, b, u);
    let (mut acc, mut count) = (0.0, 0.0);
    for t in lo..=hi {
        let w = weight(kernel, t, n, b, u);
        acc += w * series[t - 1];
        count += w.abs();
    }
    if count == 0.0 {
        return Err(Error::EmptyWindow { u, b });
    }
    let nb = n as f64 * b;
    Ok(LocalizedStat {
        u,
        b,
        value: acc / nb,
        effective_count: count / kernel.sup(),
        interior: is_interior(u, b),
        small_window: nb < SMALL_WINDOW,
    })
}

/// `(1/n) sum_t K_b(t/n - u)`.
pub fn riemann_mass(n: usize, kernel: &Kernel, b: f64, u: f64) -> f64 {
    let (lo, hi) = window(n, b, u);
    (lo..=hi).map(|t| weight(kernel, t, n, b, u)).sum::<f64>() / (n as f64 * b)
}

/// Local autocovariance at lag `r`: weighted mean of `x_t x_{t-r}` minus the product of the
/// weighted means of `x_t` and `x_{t-r}`, weights normalized to sum to one over `t > r`.
pub fn local_autocov(series: &[f64], kernel: &Kernel, b: f64, u: f64, r: usize) -> Result<LocalizedStat> {
    check_bandwidth(b)?;
    check_u(u)?;
    let n = series.len();
    let (lo, hi) = window(n, b, u);
    let (mut sw, mut sa, mut sl, mut sp, mut cnt, mut pts) = (0.0, 0.0, 0.0, 0.0, 0.0, 0usize);
    for t in lo.max(r + 1)..=hi {
        let w = weight(kernel, t, n, b, u);
        if w == 0.0 {
            continue;
        }
        let (x, xl) = (series[t - 1], series[t - 1 - r]);
        sw += w;
        sa += w * x;
        sl += w * xl;
        sp += w * x * xl;
        cnt += w.abs();
        pts += 1;
    }
    if pts == 0 {
        return Err(Error::EmptyWindow { u, b });
    }
    if pts <= r {
        return Err(Error::DegenerateWindow { have: pts, need: r + 1 });
    }
    let nb = n as f64 * b;
    Ok(LocalizedStat {
        u,
        b,
        value: sp / sw - (sa / sw) * (sl / sw),
        effective_count: cnt / kernel.sup(),
        interior: is_interior(u, b),
        small_window: nb < SMALL_WINDOW,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrvConfig {
    pub n_rep: usize,
    /// Length of each stationary sample.
    pub t_len: usize,
    pub seed: Seed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongRunVariance {
    pub value: f64,
    pub stderr: f64,
    pub lag_cap: usize,
    /// Pooled autocovariances `gamma(0..=lag_cap)`.
    pub autocov: Vec<f64>,
    /// Set when the estimate is not positive.
    pub nonpositive: bool,
}

/// Default truncation: smallest `k` with `rho^k < 1e-4`, `rho` fitted from a coupled
/// dependence profile (falling back to `lambda_0` when the profile has no usable signal).
pub fn default_lag_cap(model: &ModelSpec, u: f64, seed: Seed) -> Result<usize> {
    let q = if model.innovation().has_moment(2.0) { 2.0 } else { 1.0 };
    let rho = match dependence_profile(model, u, q, 40, 400, seed, &crate::mc::Sequential).and_then(|p| fit_decay(&p, 1)) {
        Ok(fit) => fit.rho.min(0.999),
        Err(_) => model.lambda0(),
    };
    if !(rho > 0.0) {
        return Ok(1);
    }
    Ok((ceil(ln(1e-4) / ln(rho)) as usize).max(1))
}

/// `gamma(0) + 2 sum_{k=1}^{lag_cap} gamma(k)` from independent stationary samples at `u`.
pub fn long_run_variance<R: Replicate>(
    model: &ModelSpec,
    u: f64,
    lag_cap: Option<usize>,
    cfg: &LrvConfig,
    runner: &R,
) -> Result<LongRunVariance> {
    let lag_cap = match lag_cap {
        Some(0) => return Err(Error::invalid("lag_cap", "lag_cap must be at least 1")),
        Some(k) => k,
        None => default_lag_cap(model, u, cfg.seed.derive(0x1a9))?,
    };
    if cfg.t_len <= 2 * lag_cap {
        return Err(Error::invalid("t_len", "sample length must exceed twice the lag cap"));
    }
    if cfg.n_rep == 0 {
        return Err(Error::invalid("n_rep", "need at least one replication"));
    }
    let st = Stationary::with_burn_in(model, u, select_burn_in(model, &[u], DEFAULT_TOL)?)?;
    let per_rep = runner.try_map(cfg.n_rep, |k| {
        let s = st.sample(&model.stream(cfg.seed.with_stream(k)), 1, cfg.t_len, 0)?;
        Ok(autocovariances(&s.x, lag_cap))
    })?;
    let mut autocov = vec![0.0; lag_cap + 1];
    for g in &per_rep {
        for (a, v) in autocov.iter_mut().zip(g) {
            *a += v;
        }
    }
    for a in autocov.iter_mut() {
        *a /= cfg.n_rep as f64;
    }
    let lrv = |g: &[f64]| g[0] + 2.0 * g[1..].iter().sum::<f64>();
    let value = lrv(&autocov);
    let each: Vec<f64> = per_rep.iter().map(|g| lrv(g)).collect();
    let (_, stderr) = mean_se(&each);
    Ok(LongRunVariance { value, stderr, lag_cap, autocov, nonpositive: !(value > 0.0) })
}

/// Sample autocovariances `(1/T) sum (x_t - m)(x_{t-k} - m)`, `k = 0..=max_lag`.
pub fn autocovariances(x: &[f64], max_lag: usize) -> Vec<f64> {
    let m = math::mean(x);
    let t = x.len() as f64;
    (0..=max_lag)
        .map(|k| x[k..].iter().zip(x).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / t)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Centering<'a> {
    /// `m_t = E X_{t,n}`, one value per observation.
    TrueMean(&'a [f64]),
    Constant(f64),
    /// `m_t` = local mean at `t/n` with the same kernel and bandwidth.
    LocalMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltStat {
    pub value: f64,
    pub interior: bool,
    /// `sqrt(n b) n^{-alpha} > 0.2`.
    pub bias_warning: bool,
}

/// `(1/sqrt(n b)) sum_t K((t/n - u)/b) (x_t - m_t)`.
pub fn clt_statistic(series: &[f64], kernel: &Kernel, b: f64, u: f64, centering: Centering<'_>, alpha: f64) -> Result<CltStat> {
    check_bandwidth(b)?;
    check_u(u)?;
    let n = series.len();
    if let Centering::TrueMean(m) = centering {
        if m.len() != n {
            return Err(Error::invalid("centering", "mean sequence must match the series length"));
        }
    }
    let (lo, hi) = window(n, b, u);
    let (mut acc, mut any) = (0.0, false);
    for t in lo..=hi {
        let w = weight(kernel, t, n, b, u);
        if w == 0.0 {
            continue;
        }
        any = true;
        let m = match centering {
            Centering::TrueMean(m) => m[t - 1],
            Centering::Constant(c) => c,
            Centering::LocalMean => local_mean(series, kernel, b, t as f64 / n as f64)?.value,
        };
        acc += w * (series[t - 1] - m);
    }
    if !any {
        return Err(Error::EmptyWindow { u, b });
    }
    let nb = n as f64 * b;
    Ok(CltStat { value: acc / sqrt(nb), interior: is_interior(u, b), bias_warning: sqrt(nb) * powf(n as f64, -alpha) > 0.2 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasConfig {
    pub n: usize,
    pub n_rep: usize,
    pub seed: Seed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasRow {
    pub b: f64,
    /// `|mean mu_hat - reference|`.
    pub mean_gap_raw: f64,
    pub se_raw: f64,
    /// `|mean (mu_hat(g(X_{t,n})) - mu_hat(g(X~_t(u))))|` on shared innovations; estimates the
    /// same bias up to the Riemann-sum factor with far smaller variance.
    pub mean_gap_coupled: f64,
    pub se_coupled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    pub u: f64,
    pub n: usize,
    pub reference: f64,
    pub rows: Vec<BiasRow>,
    pub fit_raw: Option<LineFit>,
    pub fit_coupled: Option<LineFit>,
}

/// Monte Carlo bias of the local mean of `g(X_{t,n})` against `reference = E g(X~_0(u))`.
#[allow(clippy::too_many_arguments)]
pub fn bias_decomposition<R: Replicate>(
    model: &ModelSpec,
    kernel: &Kernel,
    b_list: &[f64],
    u: f64,
    transform: &(dyn Fn(f64) -> f64 + Sync),
    reference: f64,
    cfg: &BiasConfig,
    runner: &R,
) -> Result<BiasTable> {
    check_u(u)?;
    for &b in b_list {
        check_bandwidth(b)?;
    }
    if cfg.n_rep < 2 {
        return Err(Error::invalid("n_rep", "need at least two replications"));
    }
    let burn = model_burn_in(model, DEFAULT_TOL)?;
    let pre = Stationary::with_burn_in(model, 0.0, burn)?;
    let at_u = Stationary::with_burn_in(model, u, burn)?;
    let n = cfg.n;
    let p = model.lags();
    let lead = burn.steps;
    let per_rep = runner.try_map(cfg.n_rep, |k| {
        let seed = cfg.seed.with_stream(k);
        let innov = model.stream(seed).window(1 - (p + lead) as i64, lead + p + n);
        let path = triangular_from(&pre, &innov, n, seed)?;
        let stat = at_u.run(&innov, 1, n, 0)?;
        let gx: Vec<f64> = path.values.iter().map(|v| transform(*v)).collect();
        let gs: Vec<f64> = stat.x.iter().map(|v| transform(*v)).collect();
        let mut out = Vec::with_capacity(2 * b_list.len());
        for &b in b_list {
            let raw = local_mean(&gx, kernel, b, u)?.value;
            let base = local_mean(&gs, kernel, b, u)?.value;
            out.push(raw);
            out.push(raw - base);
        }
        Ok(out)
    })?;
    let mut rows = Vec::with_capacity(b_list.len());
    for (j, &b) in b_list.iter().enumerate() {
        let raw: Vec<f64> = per_rep.iter().map(|r| r[2 * j]).collect();
        let cpl: Vec<f64> = per_rep.iter().map(|r| r[2 * j + 1]).collect();
        let (mr, sr) = mean_se(&raw);
        let (mc, sc) = mean_se(&cpl);
        rows.push(BiasRow { b, mean_gap_raw: (mr - reference).abs(), se_raw: sr, mean_gap_coupled: mc.abs(), se_coupled: sc });
    }
    let fit = |f: fn(&BiasRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.b, f(r))).filter(|(_, g)| *g > 0.0).collect();
        if pts.len() < 2 {
            return None;
        }
        let (bs, gs): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        Some(math::log_log_slope(&bs, &gs))
    };
    let fit_raw = fit(|r| r.mean_gap_raw);
    let fit_coupled = fit(|r| r.mean_gap_coupled);
    Ok(BiasTable { u, n, reference, rows, fit_raw, fit_coupled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_kernel, KernelFamily};

    #[test]
    fn rectangular_on_constant_series_is_exact_when_aligned() {
        let k = make_kernel(KernelFamily::Rectangular);
        // n = 100, b = 0.2, u = 0.5: t/n in [0.4, 0.6] gives 21 points; use b with nb even and
        // the window open on one side to get exactly nb points
        let s = vec![3.0; 100];
        let m = local_mean(&s, &k, 0.2, 0.505).unwrap();
        assert_eq!(m.value, 3.0);
        assert!((m.effective_count - 20.0).abs() < 1e-12);
    }

    #[test]
    fn empty_window_is_an_error() {
        let k = make_kernel(KernelFamily::Rectangular);
        assert!(matches!(local_mean(&[1.0, 2.0], &k, 0.01, 0.25), Err(Error::EmptyWindow { .. })));
        assert!(local_mean(&[1.0], &k, 1.5, 0.5).is_err());
    }

    #[test]
    fn autocov_of_constant_is_zero() {
        let k = make_kernel(KernelFamily::Epanechnikov);
        let s: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let g0 = local_autocov(&s, &k, 0.3, 0.5, 0).unwrap().value;
        let g1 = local_autocov(&s, &k, 0.3, 0.5, 1).unwrap().value;
        assert!((g0 - 1.0).abs() < 1e-3);
        assert!((g1 + 1.0).abs() < 1e-3);
    }

    #[test]
    fn clt_of_zero_series_is_zero() {
        let k = make_kernel(KernelFamily::Epanechnikov);
        let s = vec![0.0; 500];
        let c = clt_statistic(&s, &k, 0.2, 0.5, Centering::Constant(0.0), 1.0).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.interior);
    }
}
