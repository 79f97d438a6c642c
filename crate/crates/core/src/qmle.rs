//! Local Gaussian quasi-likelihood estimation of parameter curves.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernel::{check_bandwidth, Kernel};
use crate::localize::BiasConfig;
use crate::math::{self, exp, ln, norm_quantile, sqrt, LineFit};
use crate::mc::{mean_se, Replicate};
use crate::model::ModelSpec;
use crate::optim::{minimize, Objective, OptimizerConfig, OptimizerTrace};
use crate::simulate::{model_burn_in, triangular_from, Stationary, DEFAULT_TOL};

/// Relative step for finite-difference gradients.
pub const FD_GRAD_STEP: f64 = 1e-6;
/// Step for finite-difference Hessians.
pub const FD_HESS_STEP: f64 = 1e-4;
/// Information matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Conditional mean `mu(y, theta)` and scale `sigma(y, theta)` of an estimation family.
pub trait MeanScale: Send + Sync {
    fn lags(&self) -> usize;
    fn dim(&self) -> usize;
    fn mean(&self, y: &[f64], theta: &[f64]) -> f64;
    fn scale(&self, y: &[f64], theta: &[f64]) -> f64;
    /// Fills `d mu / d theta` and `d sigma / d theta`; `false` selects finite differences.
    fn grads(&self, _y: &[f64], _theta: &[f64], _dmu: &mut [f64], _dsigma: &mut [f64]) -> bool {
        false
    }
    /// Fills the row-major Hessians of `mu` and `sigma`; `false` selects finite differences.
    fn hessians(&self, _y: &[f64], _theta: &[f64], _hmu: &mut [f64], _hsigma: &mut [f64]) -> bool {
        false
    }
}

/// `mu = sum_i theta_i y_i`, `sigma` constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArMean {
    pub p: usize,
    pub sigma: f64,
}

impl MeanScale for ArMean {
    fn lags(&self) -> usize {
        self.p
    }
    fn dim(&self) -> usize {
        self.p
    }
    fn mean(&self, y: &[f64], theta: &[f64]) -> f64 {
        y.iter().zip(theta).map(|(a, b)| a * b).sum()
    }
    fn scale(&self, _y: &[f64], _theta: &[f64]) -> f64 {
        self.sigma
    }
    fn grads(&self, y: &[f64], _theta: &[f64], dmu: &mut [f64], dsigma: &mut [f64]) -> bool {
        dmu.copy_from_slice(&y[..self.p]);
        dsigma.iter_mut().for_each(|v| *v = 0.0);
        true
    }
    fn hessians(&self, _y: &[f64], _theta: &[f64], hmu: &mut [f64], hsigma: &mut [f64]) -> bool {
        hmu.iter_mut().for_each(|v| *v = 0.0);
        hsigma.iter_mut().for_each(|v| *v = 0.0);
        true
    }
}

/// `mu = 0`, `sigma = sqrt(theta_0 + sum_i theta_i y_i^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchVolatility {
    pub p: usize,
}

impl ArchVolatility {
    fn regressors(&self, y: &[f64]) -> Vec<f64> {
        core::iter::once(1.0).chain(y[..self.p].iter().map(|v| v * v)).collect()
    }
}

impl MeanScale for ArchVolatility {
    fn lags(&self) -> usize {
        self.p
    }
    fn dim(&self) -> usize {
        self.p + 1
    }
    fn mean(&self, _y: &[f64], _theta: &[f64]) -> f64 {
        0.0
    }
    fn scale(&self, y: &[f64], theta: &[f64]) -> f64 {
        let v: f64 = self.regressors(y).iter().zip(theta).map(|(a, b)| a * b).sum();
        sqrt(v.max(0.0))
    }
    fn grads(&self, y: &[f64], theta: &[f64], dmu: &mut [f64], dsigma: &mut [f64]) -> bool {
        let s = self.scale(y, theta);
        dmu.iter_mut().for_each(|v| *v = 0.0);
        for (d, r) in dsigma.iter_mut().zip(self.regressors(y)) {
            *d = r / (2.0 * s);
        }
        true
    }
    fn hessians(&self, y: &[f64], theta: &[f64], hmu: &mut [f64], hsigma: &mut [f64]) -> bool {
        let s = self.scale(y, theta);
        let r = self.regressors(y);
        let d = r.len();
        hmu.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            for j in 0..d {
                hsigma[i * d + j] = -r[i] * r[j] / (4.0 * s * s * s);
            }
        }
        true
    }
}

/// `mu = a0 exp(-theta y^2) y`, `sigma = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpAr {
    pub a0: f64,
}

impl MeanScale for ExpAr {
    fn lags(&self) -> usize {
        1
    }
    fn dim(&self) -> usize {
        1
    }
    fn mean(&self, y: &[f64], theta: &[f64]) -> f64 {
        self.a0 * exp(-theta[0] * y[0] * y[0]) * y[0]
    }
    fn scale(&self, _y: &[f64], _theta: &[f64]) -> f64 {
        1.0
    }
    fn grads(&self, y: &[f64], theta: &[f64], dmu: &mut [f64], dsigma: &mut [f64]) -> bool {
        let y2 = y[0] * y[0];
        dmu[0] = -self.a0 * exp(-theta[0] * y2) * y2 * y[0];
        dsigma[0] = 0.0;
        true
    }
    fn hessians(&self, y: &[f64], theta: &[f64], hmu: &mut [f64], hsigma: &mut [f64]) -> bool {
        let y2 = y[0] * y[0];
        hmu[0] = self.a0 * exp(-theta[0] * y2) * y2 * y2 * y[0];
        hsigma[0] = 0.0;
        true
    }
}

/// An estimation family with its admissible box and scale floor.
#[derive(Clone)]
pub struct LikelihoodSpec {
    pub form: Arc<dyn MeanScale>,
    pub theta_box: Vec<(f64, f64)>,
    pub sigma_floor: f64,
}

impl core::fmt::Debug for LikelihoodSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("LikelihoodSpec")
            .field("dim", &self.form.dim())
            .field("lags", &self.form.lags())
            .field("theta_box", &self.theta_box)
            .field("sigma_floor", &self.sigma_floor)
            .finish()
    }
}

impl LikelihoodSpec {
    pub fn new(form: Arc<dyn MeanScale>, theta_box: Vec<(f64, f64)>, sigma_floor: f64) -> Result<Self> {
        if theta_box.len() != form.dim() {
            return Err(Error::invalid("theta_box", "box dimension must match the parameter dimension"));
        }
        if theta_box.iter().any(|&(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::invalid("theta_box", "each coordinate needs finite lo <= hi"));
        }
        if !(sigma_floor > 0.0) {
            return Err(Error::invalid("sigma_floor", "scale floor must be positive"));
        }
        Ok(LikelihoodSpec { form, theta_box, sigma_floor })
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn lags(&self) -> usize {
        self.form.lags()
    }

    fn check_box(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::invalid("theta", "parameter dimension mismatch"));
        }
        match theta.iter().zip(&self.theta_box).position(|(t, &(lo, hi))| !(*t >= lo && *t <= hi)) {
            Some(coord) => Err(Error::OutsideBox { coord }),
            None => Ok(()),
        }
    }

    fn checked_scale(&self, y: &[f64], theta: &[f64]) -> Result<f64> {
        let s = self.form.scale(y, theta);
        if !(s >= self.sigma_floor) {
            return Err(Error::ScaleBelowFloor { sigma: s, floor: self.sigma_floor });
        }
        Ok(s)
    }

    /// First derivatives of `mu` and `sigma`, analytic or by central differences.
    pub fn grads(&self, y: &[f64], theta: &[f64], dmu: &mut [f64], dsigma: &mut [f64]) {
        if self.form.grads(y, theta, dmu, dsigma) {
            return;
        }
        let mut t = theta.to_vec();
        for j in 0..theta.len() {
            let h = FD_GRAD_STEP * (1.0 + theta[j].abs());
            t[j] = theta[j] + h;
            let (mp, sp) = (self.form.mean(y, &t), self.form.scale(y, &t));
            t[j] = theta[j] - h;
            let (mm, sm) = (self.form.mean(y, &t), self.form.scale(y, &t));
            t[j] = theta[j];
            dmu[j] = (mp - mm) / (2.0 * h);
            dsigma[j] = (sp - sm) / (2.0 * h);
        }
    }

    /// Second derivatives of `mu` and `sigma`, analytic or by central differences.
    pub fn hessians(&self, y: &[f64], theta: &[f64], hmu: &mut [f64], hsigma: &mut [f64]) {
        if self.form.hessians(y, theta, hmu, hsigma) {
            return;
        }
        let d = theta.len();
        let h = FD_HESS_STEP;
        let mut t = theta.to_vec();
        let at = |t: &[f64]| (self.form.mean(y, t), self.form.scale(y, t));
        let (m0, s0) = at(theta);
        for i in 0..d {
            for j in i..d {
                let (vm, vs) = if i == j {
                    t[i] = theta[i] + h;
                    let (mp, sp) = at(&t);
                    t[i] = theta[i] - h;
                    let (mm, sm) = at(&t);
                    t[i] = theta[i];
                    ((mp - 2.0 * m0 + mm) / (h * h), (sp - 2.0 * s0 + sm) / (h * h))
                } else {
                    let mut corner = |si: f64, sj: f64| {
                        t[i] = theta[i] + si * h;
                        t[j] = theta[j] + sj * h;
                        let v = at(&t);
                        t[i] = theta[i];
                        t[j] = theta[j];
                        v
                    };
                    let (a, b, c, e) = (corner(1.0, 1.0), corner(1.0, -1.0), corner(-1.0, 1.0), corner(-1.0, -1.0));
                    ((a.0 - b.0 - c.0 + e.0) / (4.0 * h * h), (a.1 - b.1 - c.1 + e.1) / (4.0 * h * h))
                };
                hmu[i * d + j] = vm;
                hmu[j * d + i] = vm;
                hsigma[i * d + j] = vs;
                hsigma[j * d + i] = vs;
            }
        }
    }
}

/// `l = ((x - mu)/sigma)^2 / 2 + log sigma`.
pub fn conditional_loglik(spec: &LikelihoodSpec, x: f64, y: &[f64], theta: &[f64]) -> Result<f64> {
    spec.check_box(theta)?;
    if y.len() < spec.lags() {
        return Err(Error::invalid("y", "lag vector shorter than the family's lag order"));
    }
    let s = spec.checked_scale(y, theta)?;
    let r = (x - spec.form.mean(y, theta)) / s;
    Ok(0.5 * r * r + ln(s))
}

/// Per-observation terms of the local likelihood on a fixed window.
struct LocalObjective<'a> {
    spec: &'a LikelihoodSpec,
    data: &'a [f64],
    /// `(t, K((t/n - u)/b))` for `t >= p + 1` with nonzero weight.
    points: Vec<(usize, f64)>,
    nb: f64,
}

struct Terms {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl<'a> LocalObjective<'a> {
    fn new(data: &'a [f64], spec: &'a LikelihoodSpec, kernel: &Kernel, b: f64, u: f64) -> Result<Self> {
        check_bandwidth(b)?;
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::invalid("u", "rescaled time must lie in [0, 1]"));
        }
        let n = data.len();
        let p = spec.lags();
        let points: Vec<(usize, f64)> = (p + 1..=n)
            .filter_map(|t| {
                let w = kernel.eval((t as f64 / n as f64 - u) / b);
                (w != 0.0).then_some((t, w))
            })
            .collect();
        if points.is_empty() {
            return Err(Error::EmptyWindow { u, b });
        }
        Ok(LocalObjective { spec, data, points, nb: n as f64 * b })
    }

    /// `y_t = (x_{t-1}, ..., x_{t-p})`.
    fn lag_vec(&self, t: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.data[t - 1 - self.spec.lags()..t - 1].iter().rev());
    }

    fn ell(&self, t: usize, y: &[f64], theta: &[f64]) -> f64 {
        let s = self.spec.form.scale(y, theta);
        if !(s >= self.spec.sigma_floor) {
            return f64::NAN;
        }
        let r = (self.data[t - 1] - self.spec.form.mean(y, theta)) / s;
        0.5 * r * r + ln(s)
    }

    fn value_at(&self, theta: &[f64]) -> f64 {
        let mut y = Vec::with_capacity(self.spec.lags());
        let mut acc = 0.0;
        for &(t, w) in &self.points {
            self.lag_vec(t, &mut y);
            acc += w * self.ell(t, &y, theta);
        }
        acc / self.nb
    }

    /// Value, gradient and Hessian of `L`, plus `sum K^2 grad l grad l'` and `sum K^2`.
    fn full(&self, theta: &[f64], want_info: bool) -> (Terms, Vec<f64>, f64) {
        let d = theta.len();
        let mut y = Vec::with_capacity(self.spec.lags());
        let (mut dmu, mut dsg) = (vec![0.0; d], vec![0.0; d]);
        let (mut hmu, mut hsg) = (vec![0.0; d * d], vec![0.0; d * d]);
        let mut g = vec![0.0; d];
        let mut out = Terms { value: 0.0, grad: vec![0.0; d], hess: vec![0.0; d * d] };
        let mut info = vec![0.0; d * d];
        let mut k2 = 0.0;
        for &(t, w) in &self.points {
            self.lag_vec(t, &mut y);
            let s = self.spec.form.scale(&y, theta);
            if !(s >= self.spec.sigma_floor) {
                out.value = f64::NAN;
                return (out, info, k2);
            }
            let r = self.data[t - 1] - self.spec.form.mean(&y, theta);
            self.spec.grads(&y, theta, &mut dmu, &mut dsg);
            self.spec.hessians(&y, theta, &mut hmu, &mut hsg);
            let (s2, s3) = (s * s, s * s * s);
            out.value += w * (0.5 * r * r / s2 + ln(s));
            let csig = 1.0 / s - r * r / s3;
            for j in 0..d {
                g[j] = -r / s2 * dmu[j] + csig * dsg[j];
                out.grad[j] += w * g[j];
            }
            for i in 0..d {
                for j in 0..d {
                    let h = dmu[i] * dmu[j] / s2 - r / s2 * hmu[i * d + j]
                        + 2.0 * r / s3 * (dmu[i] * dsg[j] + dsg[i] * dmu[j])
                        + (3.0 * r * r / (s2 * s2) - 1.0 / s2) * dsg[i] * dsg[j]
                        + csig * hsg[i * d + j];
                    out.hess[i * d + j] += w * h;
                    if want_info {
                        info[i * d + j] += w * w * g[i] * g[j];
                    }
                }
            }
            k2 += w * w;
        }
        out.value /= self.nb;
        out.grad.iter_mut().for_each(|v| *v /= self.nb);
        out.hess.iter_mut().for_each(|v| *v /= self.nb);
        (out, info, k2)
    }
}

impl Objective for LocalObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }
    fn value(&self, theta: &[f64]) -> f64 {
        self.value_at(theta)
    }
    fn value_grad_hess(&self, theta: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let (t, _, _) = self.full(theta, false);
        grad.copy_from_slice(&t.grad);
        hess.copy_from_slice(&t.hess);
        t.value
    }
}

/// `L_{n,b}(u, theta) = (1/n) sum_{t=p+1}^n K_b(t/n - u) l_t(theta)` for `data = x_1..x_n`.
pub fn local_likelihood(data: &[f64], spec: &LikelihoodSpec, kernel: &Kernel, b: f64, u: f64, theta: &[f64]) -> Result<f64> {
    spec.check_box(theta)?;
    let obj = LocalObjective::new(data, spec, kernel, b, u)?;
    let mut y = Vec::new();
    let mut acc = 0.0;
    for &(t, w) in &obj.points {
        obj.lag_vec(t, &mut y);
        let s = spec.checked_scale(&y, theta)?;
        let r = (data[t - 1] - spec.form.mean(&y, theta)) / s;
        acc += w * (0.5 * r * r + ln(s));
    }
    Ok(acc / obj.nb)
}

/// Gradient of [`local_likelihood`] in `theta`.
pub fn local_score(data: &[f64], spec: &LikelihoodSpec, kernel: &Kernel, b: f64, u: f64, theta: &[f64]) -> Result<Vec<f64>> {
    spec.check_box(theta)?;
    let obj = LocalObjective::new(data, spec, kernel, b, u)?;
    Ok(obj.full(theta, false).0.grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub u: f64,
    pub b: f64,
    pub n: usize,
    pub theta_hat: Vec<f64>,
    /// `L_{n,b}(u, theta_hat)`.
    pub value: f64,
    /// Symmetrized Hessian of `L_{n,b}` at `theta_hat`, row-major.
    pub v_hat: Vec<f64>,
    /// `sum K^2 grad l grad l' / sum K^2`, row-major.
    pub i_hat: Vec<f64>,
    /// `V^-1 I V^-1 int K^2 / (n b)`, row-major.
    pub sandwich: Vec<f64>,
    pub se: Vec<f64>,
    pub level: f64,
    pub ci: Vec<(f64, f64)>,
    pub trace: OptimizerTrace,
    /// Set when the sandwich needed its eigenvalues floored at zero.
    pub psd_warning: bool,
    pub interior: bool,
}

impl LocalFit {
    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }
}

/// Default interval level.
pub const DEFAULT_LEVEL: f64 = 0.95;

fn symmetrize(m: &mut [f64], d: usize) {
    for i in 0..d {
        for j in i + 1..d {
            let v = 0.5 * (m[i * d + j] + m[j * d + i]);
            m[i * d + j] = v;
            m[j * d + i] = v;
        }
    }
}

/// `(sandwich, floored)` with `sandwich = V^-1 I V^-1 l2 / (n b)` projected onto the PSD cone.
fn sandwich_matrix(v: &[f64], i: &[f64], d: usize, l2: f64, nb: f64) -> Result<(Vec<f64>, bool)> {
    let vm = DMatrix::from_row_slice(d, d, v);
    let im = DMatrix::from_row_slice(d, d, i);
    let eig = SymmetricEigen::new(vm.clone());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for e in eig.eigenvalues.iter() {
        lo = lo.min(e.abs());
        hi = hi.max(e.abs());
    }
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::DegenerateInformation { cond });
    }
    let vinv = vm.try_inverse().ok_or(Error::DegenerateInformation { cond })?;
    let mut s = &vinv * im * &vinv * (l2 / nb);
    s = 0.5 * (&s + s.transpose());
    let se = SymmetricEigen::new(s.clone());
    let scale = se.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let floored = se.eigenvalues.iter().any(|e| *e < -1e-12 * scale.max(f64::MIN_POSITIVE));
    if floored {
        let lam = DMatrix::from_diagonal(&se.eigenvalues.map(|e| e.max(0.0)));
        s = &se.eigenvectors * lam * se.eigenvectors.transpose();
    }
    let mut out = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..d {
            out.push(s[(r, c)]);
        }
    }
    Ok((out, floored))
}

fn intervals(theta: &[f64], se: &[f64], level: f64) -> Vec<(f64, f64)> {
    let z = norm_quantile(0.5 * (1.0 + level));
    theta.iter().zip(se).map(|(t, s)| (t - z * s, t + z * s)).collect()
}

/// `theta_hat = argmin_{theta in box} L_{n,b}(u, theta)` with Hessian, score information,
/// sandwich and intervals at [`DEFAULT_LEVEL`].
pub fn estimate_theta(
    data: &[f64],
    spec: &LikelihoodSpec,
    kernel: &Kernel,
    b: f64,
    u: f64,
    opt: &OptimizerConfig,
) -> Result<LocalFit> {
    estimate_theta_warm(data, spec, kernel, b, u, opt, None)
}

pub fn estimate_theta_warm(
    data: &[f64],
    spec: &LikelihoodSpec,
    kernel: &Kernel,
    b: f64,
    u: f64,
    opt: &OptimizerConfig,
    warm: Option<&[f64]>,
) -> Result<LocalFit> {
    let obj = LocalObjective::new(data, spec, kernel, b, u)?;
    let d = spec.dim();
    let need = 5 * (d + 1);
    if obj.points.len() < need {
        return Err(Error::DegenerateWindow { have: obj.points.len(), need });
    }
    let min = minimize(&obj, &spec.theta_box, opt, warm)?;
    let (terms, mut info, k2) = obj.full(&min.theta, true);
    let mut v_hat = terms.hess;
    symmetrize(&mut v_hat, d);
    info.iter_mut().for_each(|v| *v /= k2);
    symmetrize(&mut info, d);
    let (sandwich, psd_warning) = sandwich_matrix(&v_hat, &info, d, kernel.l2(), obj.nb)?;
    let se: Vec<f64> = (0..d).map(|j| sqrt(sandwich[j * d + j].max(0.0))).collect();
    let ci = intervals(&min.theta, &se, DEFAULT_LEVEL);
    Ok(LocalFit {
        u,
        b,
        n: data.len(),
        theta_hat: min.theta,
        value: min.value,
        v_hat,
        i_hat: info,
        sandwich,
        se,
        level: DEFAULT_LEVEL,
        ci,
        trace: min.trace,
        psd_warning,
        interior: u >= 0.5 * b && u <= 1.0 - 0.5 * b,
    })
}

/// Intervals `theta_j +- z sqrt([V^-1 I V^-1]_jj int K^2 / (n b))` at `level`.
pub fn sandwich_ci(fit: &LocalFit, kernel: &Kernel, n: usize, b: f64, level: f64) -> Result<Vec<(f64, f64)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", "level must lie in (0, 1)"));
    }
    let d = fit.dim();
    let (s, _) = sandwich_matrix(&fit.v_hat, &fit.i_hat, d, kernel.l2(), n as f64 * b)?;
    let se: Vec<f64> = (0..d).map(|j| sqrt(s[j * d + j].max(0.0))).collect();
    Ok(intervals(&fit.theta_hat, &se, level))
}

/// Fits at every grid point, each warm-started from its predecessor's estimate.
pub fn estimate_curve(
    data: &[f64],
    spec: &LikelihoodSpec,
    kernel: &Kernel,
    b: f64,
    u_grid: &[f64],
    opt: &OptimizerConfig,
) -> Vec<Result<LocalFit>> {
    let mut warm: Option<Vec<f64>> = None;
    u_grid
        .iter()
        .map(|&u| {
            let fit = estimate_theta_warm(data, spec, kernel, b, u, opt, warm.as_deref());
            if let Ok(f) = &fit {
                warm = Some(f.theta_hat.clone());
            }
            fit
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QmleBiasRow {
    pub b: f64,
    /// `|mean theta_hat - theta_0(u)|`.
    pub bias_raw: f64,
    pub se_raw: f64,
    /// `|mean (theta_hat(X_{.,n}) - theta_hat(X~_.(u)))|` on shared innovations.
    pub bias_coupled: f64,
    pub se_coupled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QmleBiasTable {
    pub u: f64,
    pub n: usize,
    pub coord: usize,
    pub theta0: f64,
    pub rows: Vec<QmleBiasRow>,
    pub fit_raw: Option<LineFit>,
    pub fit_coupled: Option<LineFit>,
}

/// Monte Carlo bias of coordinate `coord` of the local estimator across bandwidths.
#[allow(clippy::too_many_arguments)]
pub fn bias_corrected_check<R: Replicate>(
    spec: &LikelihoodSpec,
    model: &ModelSpec,
    kernel: &Kernel,
    b_list: &[f64],
    u: f64,
    coord: usize,
    theta0: f64,
    cfg: &BiasConfig,
    opt: &OptimizerConfig,
    runner: &R,
) -> Result<QmleBiasTable> {
    if coord >= spec.dim() {
        return Err(Error::invalid("coord", "coordinate outside the parameter dimension"));
    }
    if cfg.n_rep < 2 {
        return Err(Error::invalid("n_rep", "need at least two replications"));
    }
    let burn = model_burn_in(model, DEFAULT_TOL)?;
    let pre = Stationary::with_burn_in(model, 0.0, burn)?;
    let at_u = Stationary::with_burn_in(model, u, burn)?;
    let (n, p, lead) = (cfg.n, model.lags(), burn.steps);
    let per_rep = runner.try_map(cfg.n_rep, |k| {
        let seed = cfg.seed.with_stream(k);
        let innov = model.stream(seed).window(1 - (p + lead) as i64, lead + p + n);
        let path = triangular_from(&pre, &innov, n, seed)?;
        let stat = at_u.run(&innov, 1, n, 0)?;
        let mut out = Vec::with_capacity(2 * b_list.len());
        for &b in b_list {
            let raw = estimate_theta(&path.values, spec, kernel, b, u, opt)?.theta_hat[coord];
            let base = estimate_theta(&stat.x, spec, kernel, b, u, opt)?.theta_hat[coord];
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
        rows.push(QmleBiasRow { b, bias_raw: (mr - theta0).abs(), se_raw: sr, bias_coupled: mc.abs(), se_coupled: sc });
    }
    let fit = |f: fn(&QmleBiasRow) -> f64| {
        let (bs, gs): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.b, f(r))).filter(|(_, g)| *g > 0.0).unzip();
        (bs.len() >= 2).then(|| math::log_log_slope(&bs, &gs))
    };
    let fit_raw = fit(|r| r.bias_raw);
    let fit_coupled = fit(|r| r.bias_coupled);
    Ok(QmleBiasTable { u, n, coord, theta0, rows, fit_raw, fit_coupled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_kernel, KernelFamily};

    fn expar(a0: f64) -> LikelihoodSpec {
        LikelihoodSpec::new(Arc::new(ExpAr { a0 }), vec![(0.0, 2.0)], 1e-6).unwrap()
    }

    #[test]
    fn hand_evaluated_likelihoods() {
        let ar = LikelihoodSpec::new(Arc::new(ArMean { p: 1, sigma: 1.0 }), vec![(-1.0, 1.0)], 1e-6).unwrap();
        assert_eq!(conditional_loglik(&ar, 0.25, &[0.5], &[0.5]).unwrap(), 0.0);
        assert!((conditional_loglik(&expar(0.5), 1.0, &[1.0], &[0.0]).unwrap() - 0.125).abs() < 1e-15);
        let two = LikelihoodSpec::new(Arc::new(ArMean { p: 1, sigma: 2.0 }), vec![(-1.0, 1.0)], 1e-6).unwrap();
        assert!((conditional_loglik(&two, 0.0, &[0.0], &[0.3]).unwrap() - 0.5 * ln(4.0)).abs() < 1e-15);
        assert!(matches!(conditional_loglik(&two, 0.0, &[0.0], &[1.3]), Err(Error::OutsideBox { coord: 0 })));
        let tight = LikelihoodSpec::new(Arc::new(ArMean { p: 1, sigma: 1e-3 }), vec![(-1.0, 1.0)], 1e-2).unwrap();
        assert!(matches!(conditional_loglik(&tight, 0.0, &[0.0], &[0.0]), Err(Error::ScaleBelowFloor { .. })));
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        struct NoGrad<T: MeanScale>(T);
        impl<T: MeanScale> MeanScale for NoGrad<T> {
            fn lags(&self) -> usize {
                self.0.lags()
            }
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn mean(&self, y: &[f64], t: &[f64]) -> f64 {
                self.0.mean(y, t)
            }
            fn scale(&self, y: &[f64], t: &[f64]) -> f64 {
                self.0.scale(y, t)
            }
        }
        let forms: Vec<(Arc<dyn MeanScale>, Vec<f64>)> = vec![
            (Arc::new(ExpAr { a0: 0.8 }), vec![0.7]),
            (Arc::new(ArchVolatility { p: 2 }), vec![0.3, 0.2, 0.4]),
            (Arc::new(ArMean { p: 2, sigma: 1.3 }), vec![0.2, -0.4]),
        ];
        for (form, theta) in forms {
            let d = form.dim();
            let boxes = vec![(-5.0, 5.0); d];
            let exact = LikelihoodSpec::new(form.clone(), boxes.clone(), 1e-9).unwrap();
            struct Shared(Arc<dyn MeanScale>);
            impl MeanScale for Shared {
                fn lags(&self) -> usize {
                    self.0.lags()
                }
                fn dim(&self) -> usize {
                    self.0.dim()
                }
                fn mean(&self, y: &[f64], t: &[f64]) -> f64 {
                    self.0.mean(y, t)
                }
                fn scale(&self, y: &[f64], t: &[f64]) -> f64 {
                    self.0.scale(y, t)
                }
            }
            let fd = LikelihoodSpec::new(Arc::new(NoGrad(Shared(form.clone()))), boxes, 1e-9).unwrap();
            for k in 0..100 {
                let y: Vec<f64> = (0..form.lags()).map(|i| -1.5 + 3.0 * ((k * 7 + i * 13) % 100) as f64 / 99.0).collect();
                let (mut a1, mut a2, mut b1, mut b2) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
                exact.grads(&y, &theta, &mut a1, &mut a2);
                fd.grads(&y, &theta, &mut b1, &mut b2);
                for j in 0..d {
                    assert!((a1[j] - b1[j]).abs() <= 1e-4 * (1.0 + a1[j].abs()));
                    assert!((a2[j] - b2[j]).abs() <= 1e-4 * (1.0 + a2[j].abs()));
                }
                let (mut h1, mut h2, mut g1, mut g2) = (vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d * d]);
                exact.hessians(&y, &theta, &mut h1, &mut h2);
                fd.hessians(&y, &theta, &mut g1, &mut g2);
                for j in 0..d * d {
                    assert!((h1[j] - g1[j]).abs() <= 1e-4 * (1.0 + h1[j].abs()), "{} vs {}", h1[j], g1[j]);
                    assert!((h2[j] - g2[j]).abs() <= 1e-4 * (1.0 + h2[j].abs()), "{} vs {}", h2[j], g2[j]);
                }
            }
        }
    }

    #[test]
    fn singleton_box_still_reports_information() {
        let data: Vec<f64> = (0..400).map(|i| libm::sin(i as f64 * 0.7)).collect();
        let spec = LikelihoodSpec::new(Arc::new(ArMean { p: 1, sigma: 1.0 }), vec![(0.3, 0.3)], 1e-6).unwrap();
        let fit = estimate_theta(&data, &spec, &make_kernel(KernelFamily::Epanechnikov), 0.3, 0.5, &OptimizerConfig::default()).unwrap();
        assert_eq!(fit.theta_hat, vec![0.3]);
        assert!(fit.v_hat[0] > 0.0 && fit.i_hat[0] > 0.0);
    }

    #[test]
    fn degenerate_window_refused() {
        let data = vec![0.1; 40];
        let spec = expar(0.5);
        let r = estimate_theta(&data, &spec, &make_kernel(KernelFamily::Rectangular), 0.2, 0.5, &OptimizerConfig::default());
        assert!(matches!(r, Err(Error::DegenerateWindow { .. })));
    }
}
