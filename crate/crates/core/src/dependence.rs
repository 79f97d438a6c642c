//! Coupling estimates of the functional dependence measure
//! `delta_q(k) = || X~_k(u) - X~_k(u)^{*0} ||_q`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, exp, ln, powf, sqrt};
use crate::mc::Replicate;
use crate::model::ModelSpec;
use crate::rng::{Lane, Seed};
use crate::simulate::{check_derivative_capability, Stationary, StationarySample, DEFAULT_TOL};

/// Number of batches used for the standard errors.
pub const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    #[cfg_attr(feature = "serde", serde(rename = "C"))]
    pub c: f64,
    pub rho: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `X~_k(u)`.
    Level,
    /// `d/du X~_k(u)`.
    Derivative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceProfile {
    pub u: f64,
    pub q: f64,
    pub target: Target,
    pub n_rep: usize,
    /// `delta_hat[k]`, `k = 0..=k_max`.
    pub delta_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit: Option<DecayFit>,
}

impl DependenceProfile {
    pub fn k_max(&self) -> usize {
        self.delta_hat.len() - 1
    }
}

/// Estimates `delta_q(k)` for `k = 0..=k_max` from `n_rep` coupled replications.
pub fn dependence_profile<R: Replicate>(
    model: &ModelSpec,
    u: f64,
    q: f64,
    k_max: usize,
    n_rep: usize,
    seed: Seed,
    runner: &R,
) -> Result<DependenceProfile> {
    profile(model, u, q, k_max, n_rep, seed, Target::Level, runner)
}

/// The same coupling applied to the derivative process.
pub fn derivative_dependence_profile<R: Replicate>(
    model: &ModelSpec,
    u: f64,
    q: f64,
    k_max: usize,
    n_rep: usize,
    seed: Seed,
    runner: &R,
) -> Result<DependenceProfile> {
    check_derivative_capability(model, 1)?;
    profile(model, u, q, k_max, n_rep, seed, Target::Derivative, runner)
}

#[allow(clippy::too_many_arguments)]
fn profile<R: Replicate>(
    model: &ModelSpec,
    u: f64,
    q: f64,
    k_max: usize,
    n_rep: usize,
    seed: Seed,
    target: Target,
    runner: &R,
) -> Result<DependenceProfile> {
    if !(q > 0.0) {
        return Err(Error::invalid("q", "moment order must be positive"));
    }
    if q > model.q() || !model.innovation().has_moment(q) {
        let available = model.q().min(model.innovation().moment_order());
        return Err(Error::MomentOverflow { requested: q, available });
    }
    if n_rep < 100 {
        return Err(Error::invalid("n_rep", "dependence profiles need n_rep >= 100"));
    }
    let st = Stationary::new(model, u, DEFAULT_TOL)?;
    let p = model.lags();
    let order = if target == Target::Level { 0 } else { 1 };
    let lead = st.lead(order);
    let diffs = runner.try_map(n_rep, |r| {
        let stream = model.stream(seed.with_stream(r));
        let first = -(p as i64);
        let mut innov = stream.window(first - lead as i64, lead + p + k_max + 1);
        let base = st.run(&innov, first, p + k_max + 1, order)?;
        innov.set(0, stream.lane(Lane::Coupling).draw(0));
        let swapped = st.run(&innov, first, p + k_max + 1, order)?;
        let pick = |s: &StationarySample| -> Vec<f64> {
            let v = if target == Target::Level { &s.x } else { s.d1.as_ref().unwrap() };
            v[p..].to_vec()
        };
        Ok(pick(&base).iter().zip(pick(&swapped)).map(|(a, b)| powf((a - b).abs(), q)).collect::<Vec<f64>>())
    })?;
    let mut delta_hat = Vec::with_capacity(k_max + 1);
    let mut stderr = Vec::with_capacity(k_max + 1);
    let per = n_rep / BATCHES;
    for k in 0..=k_max {
        let col: Vec<f64> = diffs.iter().map(|d| d[k]).collect();
        delta_hat.push(powf(math::mean(&col), 1.0 / q));
        let batch: Vec<f64> = (0..BATCHES).map(|j| powf(math::mean(&col[j * per..(j + 1) * per]), 1.0 / q)).collect();
        stderr.push(sqrt(math::variance(&batch) / BATCHES as f64));
    }
    let mut prof = DependenceProfile { u, q, target, n_rep, delta_hat, stderr, fit: None };
    prof.fit = fit_decay(&prof, 0).ok();
    Ok(prof)
}

/// Least-squares fit of `log delta_hat[k] = log C + k log rho` over `k >= k_min` with
/// `delta_hat > 10 stderr`.
pub fn fit_decay(profile: &DependenceProfile, k_min: usize) -> Result<DecayFit> {
    let (ks, ls): (Vec<f64>, Vec<f64>) = profile
        .delta_hat
        .iter()
        .zip(&profile.stderr)
        .enumerate()
        .skip(k_min)
        .filter(|(_, (d, se))| **d > 0.0 && **d > 10.0 * **se)
        .map(|(k, (d, _))| (k as f64, ln(*d)))
        .unzip();
    if ks.len() < 4 {
        return Err(Error::InsufficientSignal { usable: ks.len(), needed: 4 });
    }
    let f = math::fit_line(&ks, &ls);
    Ok(DecayFit { c: exp(f.intercept), rho: exp(f.slope), r2: f.r2 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulativeDependence {
    /// `sum_{k <= K} delta_hat[k]`.
    pub truncated: f64,
    /// Truncated sum plus `C rho^{K+1} / (1 - rho)`.
    pub completed: f64,
}

/// `Delta_{0,q}` with geometric tail completion.
pub fn cumulative_dependence(profile: &DependenceProfile) -> Result<CumulativeDependence> {
    let truncated: f64 = profile.delta_hat.iter().sum();
    let tail_zero = profile.delta_hat.iter().skip(1).all(|d| *d == 0.0);
    if tail_zero {
        return Ok(CumulativeDependence { truncated, completed: truncated });
    }
    let fit = match profile.fit {
        Some(f) => f,
        None => fit_decay(profile, 0)?,
    };
    if !(fit.rho < 1.0) {
        return Err(Error::DivergentTail { rho: fit.rho });
    }
    let k1 = (profile.k_max() + 1) as f64;
    Ok(CumulativeDependence { truncated, completed: truncated + fit.c * powf(fit.rho, k1) / (1.0 - fit.rho) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::ParameterCurve as C;
    use crate::mc::Sequential;
    use crate::model::{make_builtin, Extras, FamilyKind};

    #[test]
    fn white_noise_profile() {
        let m = make_builtin(FamilyKind::TvAr, alloc::vec![C::constant(0.0), C::constant(1.0)], Extras::default()).unwrap();
        let prof = dependence_profile(&m, 0.5, 2.0, 5, 200, Seed::new(3, 0), &Sequential).unwrap();
        assert!(prof.delta_hat[1..].iter().all(|d| *d == 0.0));
        assert!(fit_decay(&prof, 0).is_err());
        let cum = cumulative_dependence(&prof).unwrap();
        assert_eq!(cum.completed, prof.delta_hat[0]);
    }

    #[test]
    fn moment_overflow() {
        let m = make_builtin(FamilyKind::TvAr, alloc::vec![C::constant(0.3), C::constant(1.0)], Extras::default()).unwrap();
        assert!(matches!(dependence_profile(&m, 0.5, 4.0, 5, 200, Seed::default(), &Sequential), Err(Error::MomentOverflow { .. })));
        assert!(dependence_profile(&m, 0.5, 2.0, 5, 50, Seed::default(), &Sequential).is_err());
    }

    #[test]
    fn divergent_tail() {
        let prof = DependenceProfile {
            u: 0.5,
            q: 2.0,
            target: Target::Level,
            n_rep: 100,
            delta_hat: alloc::vec![1.0, 1.1, 1.2, 1.3, 1.4],
            stderr: alloc::vec![0.01; 5],
            fit: None,
        };
        assert!(matches!(cumulative_dependence(&prof), Err(Error::DivergentTail { .. })));
    }
}
