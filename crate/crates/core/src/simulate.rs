//! Triangular-array paths, stationary approximations, derivative processes
//! and coupled paths, all driven by counter-based innovation streams.
//!
//! Time indices are absolute: `eps_t` is the same draw whichever process
//! (`X_{t,n}`, `X~_t(u)` for any `u`, coupled copies) consumes it.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{ceil, ln};
use crate::model::{ModelSpec, SecondDerivatives};
use crate::rng::{InnovationLaw, InnovationStream, Innovations, Lane, Seed};

/// Default coupling tolerance for stationary approximations.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Hard cap on burn-in length.
pub const MAX_BURN_IN: usize = 1_000_000;
/// Number of pilot couplings used to calibrate the burn-in constant.
pub const PILOT_COUPLINGS: usize = 32;
const PILOT_STEPS: usize = 256;
const PILOT_ROOT: u64 = 0x5eed_b0a7_2f1c_93d7;

/// `X_{t,n}` for `t = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularPath {
    pub n: usize,
    /// `values[t - 1] = X_{t,n}`.
    pub values: Vec<f64>,
    /// `X~_t(0)` for `t = 1 - p, ..., 0`, oldest first.
    pub presample: Vec<f64>,
    pub seed: Seed,
}

impl TriangularPath {
    /// `X_{t,n}` for `1 - p <= t <= n`.
    pub fn at(&self, t: i64) -> f64 {
        if t >= 1 {
            self.values[(t - 1) as usize]
        } else {
            self.presample[(self.presample.len() as i64 - 1 + t) as usize]
        }
    }

    pub fn rescaled_time(&self, t: usize) -> f64 {
        t as f64 / self.n as f64
    }
}

/// Jointly simulated `X~_t(u)`, `D_t(u)`, `d^2/du^2 X~_t(u)` for `t = t_first..`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySample {
    pub u: f64,
    pub t_first: i64,
    pub x: Vec<f64>,
    pub d1: Option<Vec<f64>>,
    pub d2: Option<Vec<f64>>,
    pub burn_in: usize,
    pub tol: f64,
}

impl StationarySample {
    pub fn t_last(&self) -> i64 {
        self.t_first + self.x.len() as i64 - 1
    }

    pub fn x_at(&self, t: i64) -> f64 {
        self.x[(t - self.t_first) as usize]
    }

    pub fn d1_at(&self, t: i64) -> Option<f64> {
        self.d1.as_ref().map(|d| d[(t - self.t_first) as usize])
    }
}

/// Calibrated burn-in: `B = p + ceil(ln(tol / C) / ln lambda_0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurnIn {
    pub steps: usize,
    pub lambda0: f64,
    pub c_lambda: f64,
    pub tol: f64,
    /// Magnitude of the alternative initial vector used in coupling checks.
    pub scale: f64,
}

fn escape(t: i64, value: f64, y: &[f64]) -> Error {
    Error::NumericEscape { index: t, value, state: y.to_vec() }
}

#[inline]
fn push_state(y: &mut [f64], x: f64) {
    for i in (1..y.len()).rev() {
        y[i] = y[i - 1];
    }
    if let Some(first) = y.first_mut() {
        *first = x;
    }
}

/// Plain stationary recursion at `u` from `start` through `last`; returns values for every step.
fn run_level(model: &ModelSpec, u: f64, innov: &Innovations, start: i64, last: i64, y0: &[f64]) -> Result<Vec<f64>> {
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity((last - start + 1).max(0) as usize);
    for t in start..=last {
        let x = model.eval(innov.at(t), &y, u);
        if !x.is_finite() {
            return Err(escape(t, x, &y));
        }
        out.push(x);
        push_state(&mut y, x);
    }
    Ok(out)
}

struct Joint {
    x: Vec<f64>,
    d1: Vec<f64>,
    d2: Option<Vec<f64>>,
}

fn run_joint(model: &ModelSpec, u: f64, innov: &Innovations, start: i64, last: i64, order: u8) -> Result<Joint> {
    let p = model.lags();
    let len = (last - start + 1).max(0) as usize;
    let (mut y, mut d, mut dd) = (vec![0.0; p], vec![0.0; p], vec![0.0; p]);
    let mut gy = vec![0.0; p];
    let mut sd = SecondDerivatives::zeros(p);
    let mut xs = Vec::with_capacity(len);
    let mut d1s = Vec::with_capacity(len);
    let mut d2s = if order == 2 { Some(Vec::with_capacity(len)) } else { None };
    for t in start..=last {
        let e = innov.at(t);
        let gu = model.gradient(e, &y, u, &mut gy)?;
        let x = model.eval(e, &y, u);
        let d_new = gy.iter().zip(&d).map(|(g, di)| g * di).sum::<f64>() + gu;
        if !x.is_finite() || !d_new.is_finite() {
            return Err(escape(t, if x.is_finite() { d_new } else { x }, &y));
        }
        if let Some(d2s) = d2s.as_mut() {
            model.second(e, &y, u, &mut sd)?;
            let mut v = sd.uu;
            for i in 0..p {
                v += gy[i] * dd[i] + 2.0 * sd.yu[i] * d[i];
                for j in 0..p {
                    v += sd.yy[i * p + j] * d[i] * d[j];
                }
            }
            if !v.is_finite() {
                return Err(escape(t, v, &y));
            }
            d2s.push(v);
            push_state(&mut dd, v);
        }
        xs.push(x);
        d1s.push(d_new);
        push_state(&mut y, x);
        push_state(&mut d, d_new);
    }
    Ok(Joint { x: xs, d1: d1s, d2: d2s })
}

/// Calibrates the burn-in from pilot couplings at each rescaled time in `u_probe`.
pub fn select_burn_in(model: &ModelSpec, u_probe: &[f64], tol: f64) -> Result<BurnIn> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "tolerance must be positive"));
    }
    let p = model.lags();
    let lambda = model.lambda0();
    let mut scale: f64 = 1.0;
    let mut c_lambda: f64 = 0.0;
    let zeros = vec![0.0; p];
    for &u in u_probe {
        for k in 0..PILOT_COUPLINGS as u64 {
            let stream = model.stream(Seed::new(PILOT_ROOT, k)).lane(Lane::Pilot);
            let innov = stream.window(0, PILOT_STEPS);
            let a = run_level(model, u, &innov, 0, PILOT_STEPS as i64 - 1, &zeros)?;
            let s = 10.0 * a.iter().fold(1e-3f64, |m, v| m.max(v.abs()));
            scale = scale.max(s);
            if lambda == 0.0 {
                continue;
            }
            let signs = InnovationStream::new(InnovationLaw::standard_gaussian(), Seed::new(PILOT_ROOT, k)).lane(Lane::Coupling);
            // saturating recursions can forget a huge start at once, so a unit start is probed too
            for m in [s, 1.0] {
                let y1: Vec<f64> = (0..p).map(|i| m * signs.draw(i as i64).signum()).collect();
                let b = run_level(model, u, &innov, 0, PILOT_STEPS as i64 - 1, &y1)?;
                let mut lp = 1.0;
                for (xa, xb) in a.iter().zip(&b) {
                    lp *= lambda;
                    let diff = (xa - xb).abs();
                    if diff == 0.0 || diff < 1e-10 * s {
                        break;
                    }
                    c_lambda = c_lambda.max(diff / lp);
                }
            }
        }
    }
    let extra = if lambda == 0.0 || c_lambda <= tol {
        0.0
    } else {
        ceil(ln(tol / c_lambda) / ln(lambda))
    };
    if !(extra.is_finite()) || extra > MAX_BURN_IN as f64 {
        return Err(Error::BurnInUnreachable { tol, cap: MAX_BURN_IN, lambda });
    }
    let steps = p + extra as usize;
    if steps > MAX_BURN_IN {
        return Err(Error::BurnInUnreachable { tol, cap: MAX_BURN_IN, lambda });
    }
    Ok(BurnIn { steps, lambda0: lambda, c_lambda, tol, scale })
}

/// Model-wide burn-in over a five-point grid of rescaled times.
pub fn model_burn_in(model: &ModelSpec, tol: f64) -> Result<BurnIn> {
    select_burn_in(model, &[0.0, 0.25, 0.5, 0.75, 1.0], tol)
}

/// A stationary approximation at fixed `u` with a calibrated burn-in.
#[derive(Debug, Clone, Copy)]
pub struct Stationary<'m> {
    model: &'m ModelSpec,
    u: f64,
    burn: BurnIn,
}

impl<'m> Stationary<'m> {
    pub fn new(model: &'m ModelSpec, u: f64, tol: f64) -> Result<Self> {
        check_u(u)?;
        let burn = select_burn_in(model, &[u], tol)?;
        Ok(Stationary { model, u, burn })
    }

    pub fn with_burn_in(model: &'m ModelSpec, u: f64, burn: BurnIn) -> Result<Self> {
        check_u(u)?;
        Ok(Stationary { model, u, burn })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn burn_in(&self) -> BurnIn {
        self.burn
    }

    /// Steps run ahead of `t_first`; the derivative recursion gets twice the level burn-in.
    pub fn lead(&self, order: u8) -> usize {
        if order == 0 {
            self.burn.steps
        } else {
            2 * self.burn.steps
        }
    }

    /// `X~_t(u)` (plus derivatives for `order` 1 or 2) over `t_first..t_first + t_count`,
    /// using innovations that must cover `t_first - lead(order)..`.
    pub fn run(&self, innov: &Innovations, t_first: i64, t_count: usize, order: u8) -> Result<StationarySample> {
        let lead = self.lead(order) as i64;
        let start = t_first - lead;
        let last = t_first + t_count as i64 - 1;
        let skip = lead as usize;
        let (x, d1, d2) = if order == 0 {
            let mut x = run_level(self.model, self.u, innov, start, last, &vec![0.0; self.model.lags()])?;
            x.drain(..skip);
            (x, None, None)
        } else {
            let mut j = run_joint(self.model, self.u, innov, start, last, order)?;
            j.x.drain(..skip);
            j.d1.drain(..skip);
            if let Some(d2) = j.d2.as_mut() {
                d2.drain(..skip);
            }
            (j.x, Some(j.d1), j.d2)
        };
        Ok(StationarySample { u: self.u, t_first, x, d1, d2, burn_in: skip, tol: self.burn.tol })
    }

    /// Draws the needed innovations from `stream`, runs, and verifies the coupling
    /// against a second initial vector; the burn-in doubles until the check passes.
    pub fn sample(&self, stream: &InnovationStream, t_first: i64, t_count: usize, order: u8) -> Result<StationarySample> {
        let mut burn = self.burn;
        let p = self.model.lags();
        loop {
            let sim = Stationary { burn, ..*self };
            let lead = sim.lead(order) as i64;
            let innov = stream.window(t_first - lead, lead as usize + t_count);
            let out = sim.run(&innov, t_first, t_count, order)?;
            let offset = burn.steps;
            let mut ok = true;
            for m in [burn.scale, 1.0] {
                let alt = run_level(
                    self.model,
                    self.u,
                    &innov,
                    t_first - burn.steps as i64,
                    t_first + t_count as i64 - 1,
                    &vec![m; p],
                )?;
                ok &= out.x.iter().zip(&alt[offset..]).all(|(a, b)| (a - b).abs() < burn.tol);
            }
            if ok {
                return Ok(out);
            }
            if burn.steps * 2 > MAX_BURN_IN {
                return Err(Error::BurnInUnreachable { tol: burn.tol, cap: MAX_BURN_IN, lambda: burn.lambda0 });
            }
            burn.steps *= 2;
        }
    }

    /// `X~_t(u)` alone, from innovations covering `t - burn_in..=t`.
    pub fn value_at(&self, innov: &Innovations, t: i64) -> Result<f64> {
        let start = t - self.burn.steps as i64;
        let xs = run_level(self.model, self.u, innov, start, t, &vec![0.0; self.model.lags()])?;
        Ok(*xs.last().unwrap())
    }
}

fn check_u(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::invalid("u", "rescaled time must lie in [0, 1]"))
    }
}

/// Simulates `X~_t(u)`, `t = 1..=t_count`.
pub fn simulate_stationary(model: &ModelSpec, u: f64, t_count: usize, seed: Seed, tol: f64) -> Result<StationarySample> {
    let st = Stationary::new(model, u, tol)?;
    st.sample(&model.stream(seed), 1, t_count, 0)
}

/// Simulates `X~_t(u)` jointly with `D_t(u)` (and `d^2/du^2 X~_t(u)` for `order = 2`).
pub fn simulate_derivative(
    model: &ModelSpec,
    u: f64,
    t_count: usize,
    seed: Seed,
    tol: f64,
    order: u8,
) -> Result<StationarySample> {
    check_derivative_capability(model, order)?;
    let st = Stationary::new(model, u, tol)?;
    st.sample(&model.stream(seed), 1, t_count, order)
}

pub(crate) fn check_derivative_capability(model: &ModelSpec, order: u8) -> Result<()> {
    if order != 1 && order != 2 {
        return Err(Error::invalid("order", "derivative order must be 1 or 2"));
    }
    if !model.differentiable() {
        return Err(Error::NotDifferentiable(model.name()));
    }
    if order == 2 {
        if !model.has_second_derivatives() {
            return Err(Error::Capability("second-derivative bundle of G"));
        }
        let need = 2.0 * model.q();
        if !model.innovation().has_moment(need) {
            return Err(Error::MomentOverflow { requested: need, available: model.innovation().moment_order() });
        }
    }
    Ok(())
}

/// Simulates `X_{t,n}`, `t = 1..=n`; the pre-sample is the `u = 0` stationary approximation
/// driven by the same stream.
pub fn simulate_path(model: &ModelSpec, n: usize, seed: Seed) -> Result<TriangularPath> {
    let st = Stationary::new(model, 0.0, DEFAULT_TOL)?;
    simulate_path_with(&st, n, seed)
}

/// [`simulate_path`] with a pre-calibrated `u = 0` approximation.
pub fn simulate_path_with(presample: &Stationary<'_>, n: usize, seed: Seed) -> Result<TriangularPath> {
    let model = presample.model;
    let p = model.lags();
    if n < p || n == 0 {
        return Err(Error::invalid("n", "path length must be at least the lag order"));
    }
    if presample.u != 0.0 {
        return Err(Error::invalid("u", "pre-sample approximation must sit at u = 0"));
    }
    let lead = presample.burn.steps as i64;
    let first = 1 - p as i64;
    let innov = model.stream(seed).window(first - lead, lead as usize + p + n);
    triangular_from(presample, &innov, n, seed)
}

/// Builds `X_{t,n}` from innovations covering `1 - p - burn_in..=n`.
pub fn triangular_from(presample: &Stationary<'_>, innov: &Innovations, n: usize, seed: Seed) -> Result<TriangularPath> {
    let model = presample.model;
    let p = model.lags();
    let pre = if p > 0 { presample.run(innov, 1 - p as i64, p, 0)?.x } else { Vec::new() };
    let mut y: Vec<f64> = pre.iter().rev().copied().collect();
    let mut values = Vec::with_capacity(n);
    for t in 1..=n as i64 {
        let u = t as f64 / n as f64;
        let x = model.eval(innov.at(t), &y, u);
        if !x.is_finite() {
            return Err(escape(t, x, &y));
        }
        values.push(x);
        push_state(&mut y, x);
    }
    Ok(TriangularPath { n, values, presample: pre, seed })
}

/// `(X~_t(u), X~_t(u)^{*(t-k)})` for `t = 1..=t_count`: the second path replays the stream
/// with `eps_{t-k}` replaced by an independent copy.
pub fn coupled_pair(model: &ModelSpec, u: f64, k: usize, t_count: usize, seed: Seed) -> Result<(Vec<f64>, Vec<f64>)> {
    let st = Stationary::new(model, u, DEFAULT_TOL)?;
    coupled_pair_with(&st, k, t_count, seed)
}

pub fn coupled_pair_with(st: &Stationary<'_>, k: usize, t_count: usize, seed: Seed) -> Result<(Vec<f64>, Vec<f64>)> {
    let model = st.model;
    let p = model.lags();
    let stream = model.stream(seed);
    let copies = stream.lane(Lane::Coupling);
    let t0 = 1 - (k + p) as i64;
    let history = st.sample(&stream, t0, t_count + k + p, 0)?;
    let lead = history.burn_in;
    let innov = stream.window(t0 - lead as i64, lead + t_count + k + p);
    let mut starred = Vec::with_capacity(t_count);
    let mut y = vec![0.0; p];
    for t in 1..=t_count as i64 {
        let s = t - k as i64;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = history.x_at(s - 1 - i as i64);
        }
        let mut x = 0.0;
        for r in s..=t {
            let e = if r == s { copies.draw(s) } else { innov.at(r) };
            x = model.eval(e, &y, st.u);
            if !x.is_finite() {
                return Err(escape(r, x, &y));
            }
            push_state(&mut y, x);
        }
        starred.push(x);
    }
    let base = k + p;
    Ok((history.x[base..].to_vec(), starred))
}

/// One row of [`taylor_remainder`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorRow {
    pub t: usize,
    /// `X~_t(t/n) - X~_t(u)`
    pub r0: f64,
    /// `X~_t(t/n) - X~_t(u) - (t/n - u) D_t(u)`
    pub r1: f64,
}

/// Zeroth- and first-order Taylor remainders on `window = (t_lo, t_hi)` (inclusive).
pub fn taylor_remainder(model: &ModelSpec, u: f64, window: (usize, usize), n: usize, seed: Seed) -> Result<Vec<TaylorRow>> {
    check_derivative_capability(model, 1)?;
    let burn = model_burn_in(model, DEFAULT_TOL)?;
    let innov_lead = 2 * burn.steps;
    let (lo, hi) = window;
    if lo < 1 || hi > n || lo > hi {
        return Err(Error::invalid("window", "window must be a non-empty subset of 1..=n"));
    }
    let innov = model.stream(seed).window(lo as i64 - innov_lead as i64, innov_lead + hi - lo + 1);
    taylor_remainder_from(model, u, window, n, &innov, burn)
}

/// [`taylor_remainder`] from pre-drawn innovations covering `t_lo - 2 burn_in..=t_hi`.
pub fn taylor_remainder_from(
    model: &ModelSpec,
    u: f64,
    window: (usize, usize),
    n: usize,
    innov: &Innovations,
    burn: BurnIn,
) -> Result<Vec<TaylorRow>> {
    let (lo, hi) = window;
    for t in [lo, hi] {
        if (t as f64 / n as f64 - u).abs() > 0.5 {
            return Err(Error::invalid("window", "all t must satisfy |t/n - u| <= 1/2"));
        }
    }
    let centre = Stationary::with_burn_in(model, u, burn)?;
    let local = centre.run(innov, lo as i64, hi - lo + 1, 1)?;
    let d1 = local.d1.as_ref().unwrap();
    let mut rows = Vec::with_capacity(hi - lo + 1);
    for (i, t) in (lo..=hi).enumerate() {
        let v = t as f64 / n as f64;
        let at_v = if v == u { local.x[i] } else { Stationary::with_burn_in(model, v, burn)?.value_at(innov, t as i64)? };
        let r0 = at_v - local.x[i];
        rows.push(TaylorRow { t, r0, r1: r0 - (v - u) * d1[i] });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::ParameterCurve as C;
    use crate::model::{make_builtin, Extras, FamilyKind};

    fn ar(a: C) -> ModelSpec {
        make_builtin(FamilyKind::TvAr, vec![a, C::constant(1.0)], Extras::default()).unwrap()
    }

    #[test]
    fn zero_chi_burn_in_is_lag_order() {
        let m = ar(C::constant(0.0));
        let s = simulate_stationary(&m, 0.4, 10, Seed::new(1, 0), 1e-10).unwrap();
        assert_eq!(s.burn_in, 1);
        let e = m.stream(Seed::new(1, 0));
        for t in 1..=10 {
            assert_eq!(s.x_at(t), e.draw(t));
        }
    }

    #[test]
    fn stationary_and_path_share_innovations() {
        let m = ar(C::constant(0.0));
        let path = simulate_path(&m, 50, Seed::new(4, 2)).unwrap();
        let e = m.stream(Seed::new(4, 2));
        for t in 1..=50 {
            assert_eq!(path.at(t), e.draw(t));
        }
    }

    #[test]
    fn constant_ar_has_zero_derivative() {
        let m = ar(C::constant(0.6));
        let s = simulate_derivative(&m, 0.3, 200, Seed::new(2, 0), 1e-10, 2).unwrap();
        assert!(s.d1.unwrap().iter().all(|d| *d == 0.0));
        assert!(s.d2.unwrap().iter().all(|d| *d == 0.0));
    }

    #[test]
    fn derivative_capability_errors() {
        let tar = make_builtin(FamilyKind::TvTar, vec![C::constant(0.5), C::constant(-0.3)], Extras::default()).unwrap();
        assert!(matches!(simulate_derivative(&tar, 0.5, 10, Seed::default(), 1e-8, 1), Err(Error::NotDifferentiable(_))));
        let heavy = make_builtin(
            FamilyKind::TvAr,
            vec![C::linear(0.0, 0.5), C::constant(1.0)],
            Extras { innovation: InnovationLaw::StudentT { dof: 3.0, scale: 1.0 }, ..Extras::default() },
        )
        .unwrap();
        assert!(simulate_derivative(&heavy, 0.5, 10, Seed::default(), 1e-8, 1).is_ok());
        assert!(matches!(simulate_derivative(&heavy, 0.5, 10, Seed::default(), 1e-8, 2), Err(Error::MomentOverflow { .. })));
        assert!(simulate_derivative(&heavy, 0.5, 10, Seed::default(), 1e-8, 3).is_err());
    }

    #[test]
    fn coupled_pair_without_feedback() {
        let m = ar(C::constant(0.0));
        let (x, xs) = coupled_pair(&m, 0.5, 3, 20, Seed::new(8, 1)).unwrap();
        // with no feedback the substituted draw at t - 3 never reaches X_t
        assert_eq!(x, xs);
        let (x0, xs0) = coupled_pair(&m, 0.5, 0, 20, Seed::new(8, 1)).unwrap();
        let copies = m.stream(Seed::new(8, 1)).lane(Lane::Coupling);
        for t in 1..=20 {
            assert_eq!(xs0[t - 1], copies.draw(t as i64));
            assert_ne!(x0[t - 1], xs0[t - 1]);
        }
    }

    #[test]
    fn coupled_pair_linear_propagation() {
        let m = ar(C::constant(0.5));
        let seed = Seed::new(8, 1);
        let e = m.stream(seed);
        let c = e.lane(Lane::Coupling);
        for k in [0usize, 1, 4, 9] {
            let (x, xs) = coupled_pair(&m, 0.5, k, 15, seed).unwrap();
            for t in 1..=15i64 {
                let s = t - k as i64;
                let want = 0.5f64.powi(k as i32) * (e.draw(s) - c.draw(s)).abs();
                let got = (x[(t - 1) as usize] - xs[(t - 1) as usize]).abs();
                assert!((got - want).abs() < 1e-12, "k={k} t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn taylor_remainder_vanishes_at_centre() {
        let m = ar(C::linear(0.0, 0.5));
        let rows = taylor_remainder(&m, 0.5, (50, 50), 100, Seed::new(1, 1)).unwrap();
        assert_eq!(rows[0].r0, 0.0);
        assert_eq!(rows[0].r1, 0.0);
        assert!(taylor_remainder(&m, 0.1, (1, 100), 100, Seed::new(1, 1)).is_err());
    }

    #[test]
    fn escape_reports_first_index() {
        struct Blow;
        impl crate::model::Recursion for Blow {
            fn lags(&self) -> usize {
                1
            }
            fn value(&self, _e: f64, y: &[f64], _u: f64) -> f64 {
                if y[0] > 5.0 { f64::INFINITY } else { y[0] + 1.0 }
            }
        }
        let m = crate::model::make_custom(alloc::sync::Arc::new(Blow), vec![0.5], 2.0, InnovationLaw::default()).unwrap();
        let st = Stationary::with_burn_in(&m, 0.5, BurnIn { steps: 1, lambda0: 0.5, c_lambda: 1.0, tol: 1e-8, scale: 1.0 }).unwrap();
        let innov = m.stream(Seed::default()).window(-1, 20);
        match st.run(&innov, 0, 15, 0) {
            Err(Error::NumericEscape { index, .. }) => assert_eq!(index, 5),
            other => panic!("{other:?}"),
        }
    }
}
