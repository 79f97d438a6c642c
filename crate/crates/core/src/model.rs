//! Recursion model families `X_t = G_{eps_t}(X_{t-1}, ..., X_{t-p}, u)`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::curve::ParameterCurve;
use crate::error::{Error, Result};
use crate::math::{exp, powf, sqrt};
use crate::rng::{InnovationLaw, InnovationStream, Lane, Seed};

/// Second-order partial derivatives of `G` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivatives {
    /// `d^2 G / dy_i dy_j`, row-major `p x p`.
    pub yy: Vec<f64>,
    /// `d^2 G / dy_i du`.
    pub yu: Vec<f64>,
    /// `d^2 G / du^2`.
    pub uu: f64,
}

impl SecondDerivatives {
    pub fn zeros(p: usize) -> Self {
        SecondDerivatives { yy: vec![0.0; p * p], yu: vec![0.0; p], uu: 0.0 }
    }
}

/// A user-supplied recursion function. Derivative methods default to "unavailable".
pub trait Recursion: Send + Sync {
    fn lags(&self) -> usize;

    fn value(&self, eps: f64, y: &[f64], u: f64) -> f64;

    /// Writes `dG/dy` into `out` and returns `dG/du`, or `None` if not provided.
    fn gradient(&self, _eps: f64, _y: &[f64], _u: f64, _out: &mut [f64]) -> Option<f64> {
        None
    }

    fn second(&self, _eps: f64, _y: &[f64], _u: f64, _out: &mut SecondDerivatives) -> bool {
        false
    }

    fn name(&self) -> &'static str {
        "custom"
    }
}

/// Builtin family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FamilyKind {
    #[cfg_attr(feature = "serde", serde(rename = "tvAR"))]
    TvAr,
    #[cfg_attr(feature = "serde", serde(rename = "tvARCH"))]
    TvArch,
    #[cfg_attr(feature = "serde", serde(rename = "tvTAR"))]
    TvTar,
    #[cfg_attr(feature = "serde", serde(rename = "tvExpAR"))]
    TvExpAr,
    #[cfg_attr(feature = "serde", serde(rename = "tvRC"))]
    TvRc,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::TvAr => "tvAR",
            FamilyKind::TvArch => "tvARCH",
            FamilyKind::TvTar => "tvTAR",
            FamilyKind::TvExpAr => "tvExpAR",
            FamilyKind::TvRc => "tvRC",
        }
    }
}

/// Family-specific scalars for [`make_builtin`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Extras {
    pub innovation: InnovationLaw,
    /// Moment order; defaults to 2.
    pub q: Option<f64>,
    /// The constant `a_0` of tvExpAR(1).
    pub expar_a0: Option<f64>,
}

impl Extras {
    pub fn expar(a0: f64) -> Self {
        Extras { expar_a0: Some(a0), ..Extras::default() }
    }
}

#[derive(Clone)]
pub enum Family {
    /// `sum_i a_i(u) y_i + sigma(u) eps`
    TvAr { coeffs: Vec<ParameterCurve>, sigma: ParameterCurve },
    /// `sqrt(a_0(u) + sum_i a_i(u) y_i^2) eps`
    TvArch { a0: ParameterCurve, coeffs: Vec<ParameterCurve> },
    /// `a_1(u) y^+ + a_2(u) y^- + eps`
    TvTar { a1: ParameterCurve, a2: ParameterCurve },
    /// `a_0 exp(-theta(u) y^2) y + eps`
    TvExpAr { a0: f64, theta: ParameterCurve },
    /// `alpha_0 + beta_0 eps + sum_i (alpha_i(u) + beta_i(u) eps) y_i`
    TvRc { alpha: Vec<ParameterCurve>, beta: Vec<ParameterCurve> },
    Custom(Arc<dyn Recursion>),
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::TvAr { coeffs, sigma } => f.debug_struct("TvAr").field("coeffs", coeffs).field("sigma", sigma).finish(),
            Family::TvArch { a0, coeffs } => f.debug_struct("TvArch").field("a0", a0).field("coeffs", coeffs).finish(),
            Family::TvTar { a1, a2 } => f.debug_struct("TvTar").field("a1", a1).field("a2", a2).finish(),
            Family::TvExpAr { a0, theta } => f.debug_struct("TvExpAr").field("a0", a0).field("theta", theta).finish(),
            Family::TvRc { alpha, beta } => f.debug_struct("TvRc").field("alpha", alpha).field("beta", beta).finish(),
            Family::Custom(r) => f.debug_tuple("Custom").field(&r.name()).finish(),
        }
    }
}

/// An immutable recursion model with its contraction weights.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    family: Family,
    p: usize,
    chi: Vec<f64>,
    q: f64,
    innovation: InnovationLaw,
}

fn check_count(kind: FamilyKind, got: usize, ok: bool, want: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid("curves", format!("{} needs {want}, got {got} curves", kind.name())))
    }
}

/// Builds a builtin family and its canonical contraction weights.
pub fn make_builtin(kind: FamilyKind, curves: Vec<ParameterCurve>, extras: Extras) -> Result<ModelSpec> {
    extras.innovation.validate()?;
    let q = extras.q.unwrap_or(2.0);
    if !(q > 0.0) {
        return Err(Error::invalid("q", "moment order must be positive"));
    }
    let law = extras.innovation;
    let n = curves.len();
    let (family, chi, names): (Family, Vec<f64>, Vec<String>) = match kind {
        FamilyKind::TvAr => {
            check_count(kind, n, n >= 2, "p + 1 curves (a_1..a_p, sigma)")?;
            let mut coeffs = curves;
            let sigma = coeffs.pop().unwrap();
            let chi = coeffs.iter().map(|c| c.sup_abs()).collect();
            let names = (1..=coeffs.len()).map(|i| format!("sup_u |a_{i}(u)|")).collect();
            (Family::TvAr { coeffs, sigma }, chi, names)
        }
        FamilyKind::TvArch => {
            check_count(kind, n, n >= 2, "p + 1 curves (a_0..a_p)")?;
            if q != 2.0 {
                return Err(Error::invalid("q", "tvARCH contraction weights are defined for q = 2"));
            }
            let m2 = law.second_moment();
            if !m2.is_finite() {
                return Err(Error::MomentOverflow { requested: 2.0, available: law.moment_order() });
            }
            let mut it = curves.into_iter();
            let a0 = it.next().unwrap();
            let coeffs: Vec<ParameterCurve> = it.collect();
            if !(a0.inf() > 0.0) {
                return Err(Error::invalid("curves", "tvARCH needs inf_u a_0(u) > 0"));
            }
            if let Some(i) = coeffs.iter().position(|c| c.inf() < 0.0) {
                return Err(Error::invalid("curves", format!("tvARCH needs a_{}(u) >= 0", i + 1)));
            }
            let chi = coeffs.iter().map(|c| sqrt(c.sup() * m2)).collect();
            let names = (1..=coeffs.len()).map(|i| format!("sup_u sqrt(a_{i}(u) E[eps^2])")).collect();
            (Family::TvArch { a0, coeffs }, chi, names)
        }
        FamilyKind::TvTar => {
            check_count(kind, n, n == 2, "2 curves (a_1, a_2)")?;
            let mut it = curves.into_iter();
            let (a1, a2) = (it.next().unwrap(), it.next().unwrap());
            let chi = vec![a1.sup_abs().max(a2.sup_abs())];
            (Family::TvTar { a1, a2 }, chi, vec![String::from("max(sup_u |a_1(u)|, sup_u |a_2(u)|)")])
        }
        FamilyKind::TvExpAr => {
            check_count(kind, n, n == 1, "1 curve (theta)")?;
            let a0 = extras.expar_a0.ok_or_else(|| Error::invalid("extras.a0", "tvExpAR needs the scalar a0"))?;
            if !(a0 != 0.0 && a0.abs() < 1.0) {
                return Err(Error::invalid("extras.a0", "tvExpAR needs 0 < |a0| < 1"));
            }
            let theta = curves.into_iter().next().unwrap();
            if theta.inf() < 0.0 {
                return Err(Error::invalid("curves", "tvExpAR needs theta(u) >= 0"));
            }
            (Family::TvExpAr { a0, theta }, vec![a0.abs()], vec![String::from("|a0|")])
        }
        FamilyKind::TvRc => {
            check_count(kind, n, n >= 4 && n.is_multiple_of(2), "2(p + 1) curves (alpha_0, beta_0, ..., alpha_p, beta_p)")?;
            if q != 2.0 {
                return Err(Error::invalid("q", "tvRC contraction weights are defined for q = 2"));
            }
            let (m1, m2) = (law.mean(), law.second_moment());
            if !m2.is_finite() {
                return Err(Error::MomentOverflow { requested: 2.0, available: law.moment_order() });
            }
            let mut alpha = Vec::new();
            let mut beta = Vec::new();
            for (i, c) in curves.into_iter().enumerate() {
                if i % 2 == 0 {
                    alpha.push(c);
                } else {
                    beta.push(c);
                }
            }
            // ||alpha + beta eps||_2 maximised over a dense u grid
            let chi = (1..alpha.len())
                .map(|i| {
                    (0..=1024).fold(0.0f64, |acc, k| {
                        let u = k as f64 / 1024.0;
                        let (a, b) = (alpha[i].eval(u), beta[i].eval(u));
                        acc.max(sqrt((a * a + 2.0 * a * b * m1 + b * b * m2).max(0.0)))
                    })
                })
                .collect();
            let names = (1..alpha.len()).map(|i| format!("sup_u ||alpha_{i}(u) + beta_{i}(u) eps||_2")).collect();
            (Family::TvRc { alpha, beta }, chi, names)
        }
    };
    let p = chi.len();
    check_contraction(&chi, &names)?;
    Ok(ModelSpec { family, p, chi, q, innovation: law })
}

/// A model around a caller-supplied recursion. `chi` must be declared; see [`contraction_report`].
pub fn make_custom(recursion: Arc<dyn Recursion>, chi: Vec<f64>, q: f64, innovation: InnovationLaw) -> Result<ModelSpec> {
    innovation.validate()?;
    let p = recursion.lags();
    if p == 0 || chi.len() != p {
        return Err(Error::invalid("chi", format!("expected {p} contraction weights, got {}", chi.len())));
    }
    if chi.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::invalid("chi", "weights must be non-negative"));
    }
    if !(q > 0.0) {
        return Err(Error::invalid("q", "moment order must be positive"));
    }
    let names: Vec<String> = (1..=p).map(|i| format!("declared chi_{i}")).collect();
    check_contraction(&chi, &names)?;
    Ok(ModelSpec { family: Family::Custom(recursion), p, chi, q, innovation })
}

fn check_contraction(chi: &[f64], names: &[String]) -> Result<()> {
    let s: f64 = chi.iter().sum();
    if s < 1.0 {
        return Ok(());
    }
    let worst = chi
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, c)| format!("{} = {c}", names[i]))
        .unwrap_or_default();
    Err(Error::Contraction { chi_sum: s, detail: worst })
}

impl ModelSpec {
    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn kind(&self) -> Option<FamilyKind> {
        Some(match self.family {
            Family::TvAr { .. } => FamilyKind::TvAr,
            Family::TvArch { .. } => FamilyKind::TvArch,
            Family::TvTar { .. } => FamilyKind::TvTar,
            Family::TvExpAr { .. } => FamilyKind::TvExpAr,
            Family::TvRc { .. } => FamilyKind::TvRc,
            Family::Custom(_) => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match &self.family {
            Family::Custom(r) => r.name(),
            _ => self.kind().unwrap().name(),
        }
    }

    pub fn lags(&self) -> usize {
        self.p
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn chi_sum(&self) -> f64 {
        self.chi.iter().sum()
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `q' = min(q, 1)`.
    pub fn q_prime(&self) -> f64 {
        self.q.min(1.0)
    }

    /// Geometric memory rate `|chi|_1^{1/q'}`.
    pub fn lambda0(&self) -> f64 {
        powf(self.chi_sum(), 1.0 / self.q_prime())
    }

    pub fn innovation(&self) -> &InnovationLaw {
        &self.innovation
    }

    pub fn stream(&self, seed: Seed) -> InnovationStream {
        InnovationStream::new(self.innovation, seed)
    }

    /// Whether the a.s. derivative pipeline applies.
    pub fn differentiable(&self) -> bool {
        !matches!(self.family, Family::TvTar { .. })
    }

    pub fn has_second_derivatives(&self) -> bool {
        match &self.family {
            Family::TvTar { .. } => false,
            Family::TvAr { coeffs, sigma } => coeffs.iter().all(|c| c.has_deriv2()) && sigma.has_deriv2(),
            Family::TvArch { a0, coeffs } => a0.has_deriv2() && coeffs.iter().all(|c| c.has_deriv2()),
            Family::TvExpAr { theta, .. } => theta.has_deriv2(),
            Family::TvRc { alpha, beta } => alpha.iter().chain(beta.iter()).all(|c| c.has_deriv2()),
            Family::Custom(r) => {
                let mut s = SecondDerivatives::zeros(self.p);
                r.second(0.0, &vec![0.0; self.p], 0.5, &mut s)
            }
        }
    }

    /// `G_eps(y, u)` with `y = (X_{t-1}, ..., X_{t-p})`.
    #[inline]
    pub fn eval(&self, eps: f64, y: &[f64], u: f64) -> f64 {
        match &self.family {
            Family::TvAr { coeffs, sigma } => {
                coeffs.iter().zip(y).map(|(a, yi)| a.eval(u) * yi).sum::<f64>() + sigma.eval(u) * eps
            }
            Family::TvArch { a0, coeffs } => {
                let s = a0.eval(u) + coeffs.iter().zip(y).map(|(a, yi)| a.eval(u) * yi * yi).sum::<f64>();
                sqrt(s) * eps
            }
            Family::TvTar { a1, a2 } => {
                let y = y[0];
                a1.eval(u) * y.max(0.0) + a2.eval(u) * (-y).max(0.0) + eps
            }
            Family::TvExpAr { a0, theta } => {
                let y = y[0];
                a0 * exp(-theta.eval(u) * y * y) * y + eps
            }
            Family::TvRc { alpha, beta } => {
                let mut v = alpha[0].eval(u) + beta[0].eval(u) * eps;
                for i in 1..alpha.len() {
                    v += (alpha[i].eval(u) + beta[i].eval(u) * eps) * y[i - 1];
                }
                v
            }
            Family::Custom(r) => r.value(eps, y, u),
        }
    }

    /// Writes `dG/dy` into `grad_y` and returns `dG/du`.
    pub fn gradient(&self, eps: f64, y: &[f64], u: f64, grad_y: &mut [f64]) -> Result<f64> {
        match &self.family {
            Family::TvAr { coeffs, sigma } => {
                let mut du = sigma.deriv(u) * eps;
                for (i, a) in coeffs.iter().enumerate() {
                    grad_y[i] = a.eval(u);
                    du += a.deriv(u) * y[i];
                }
                Ok(du)
            }
            Family::TvArch { a0, coeffs } => {
                let mut s = a0.eval(u);
                let mut su = a0.deriv(u);
                for (a, yi) in coeffs.iter().zip(y) {
                    s += a.eval(u) * yi * yi;
                    su += a.deriv(u) * yi * yi;
                }
                let r = sqrt(s);
                for (i, a) in coeffs.iter().enumerate() {
                    grad_y[i] = a.eval(u) * y[i] * eps / r;
                }
                Ok(su * eps / (2.0 * r))
            }
            Family::TvTar { .. } => Err(Error::NotDifferentiable("tvTAR")),
            Family::TvExpAr { a0, theta } => {
                let (y, th) = (y[0], theta.eval(u));
                let e = exp(-th * y * y);
                grad_y[0] = a0 * e * (1.0 - 2.0 * th * y * y);
                Ok(-a0 * theta.deriv(u) * y * y * y * e)
            }
            Family::TvRc { alpha, beta } => {
                let mut du = alpha[0].deriv(u) + beta[0].deriv(u) * eps;
                for i in 1..alpha.len() {
                    grad_y[i - 1] = alpha[i].eval(u) + beta[i].eval(u) * eps;
                    du += (alpha[i].deriv(u) + beta[i].deriv(u) * eps) * y[i - 1];
                }
                Ok(du)
            }
            Family::Custom(r) => r.gradient(eps, y, u, grad_y).ok_or(Error::Capability("first derivatives of G")),
        }
    }

    /// Second partial derivatives of `G`.
    pub fn second(&self, eps: f64, y: &[f64], u: f64, out: &mut SecondDerivatives) -> Result<()> {
        let p = self.p;
        let need = |v: Option<f64>| v.ok_or(Error::Capability("second derivative of a parameter curve"));
        match &self.family {
            Family::TvAr { coeffs, sigma } => {
                out.yy.iter_mut().for_each(|v| *v = 0.0);
                let mut uu = need(sigma.deriv2(u))? * eps;
                for (i, a) in coeffs.iter().enumerate() {
                    out.yu[i] = a.deriv(u);
                    uu += need(a.deriv2(u))? * y[i];
                }
                out.uu = uu;
            }
            Family::TvArch { a0, coeffs } => {
                let (mut s, mut su, mut suu) = (a0.eval(u), a0.deriv(u), need(a0.deriv2(u))?);
                for (a, yi) in coeffs.iter().zip(y) {
                    s += a.eval(u) * yi * yi;
                    su += a.deriv(u) * yi * yi;
                    suu += need(a.deriv2(u))? * yi * yi;
                }
                let r = sqrt(s);
                let r3 = s * r;
                for i in 0..p {
                    let ai = coeffs[i].eval(u);
                    for j in 0..p {
                        let aj = coeffs[j].eval(u);
                        let diag = if i == j { ai / r } else { 0.0 };
                        out.yy[i * p + j] = eps * (diag - ai * y[i] * aj * y[j] / r3);
                    }
                    out.yu[i] = eps * (coeffs[i].deriv(u) * y[i] / r - ai * y[i] * su / (2.0 * r3));
                }
                out.uu = eps * (suu / (2.0 * r) - su * su / (4.0 * r3));
            }
            Family::TvTar { .. } => return Err(Error::NotDifferentiable("tvTAR")),
            Family::TvExpAr { a0, theta } => {
                let (y, th, thu) = (y[0], theta.eval(u), theta.deriv(u));
                let thuu = need(theta.deriv2(u))?;
                let e = exp(-th * y * y);
                let y2 = y * y;
                out.yy[0] = a0 * e * (-6.0 * th * y + 4.0 * th * th * y2 * y);
                out.yu[0] = a0 * e * thu * y2 * (2.0 * th * y2 - 3.0);
                out.uu = a0 * e * y2 * y * (thu * thu * y2 - thuu);
            }
            Family::TvRc { alpha, beta } => {
                out.yy.iter_mut().for_each(|v| *v = 0.0);
                let mut uu = need(alpha[0].deriv2(u))? + need(beta[0].deriv2(u))? * eps;
                for i in 1..alpha.len() {
                    out.yu[i - 1] = alpha[i].deriv(u) + beta[i].deriv(u) * eps;
                    uu += (need(alpha[i].deriv2(u))? + need(beta[i].deriv2(u))? * eps) * y[i - 1];
                }
                out.uu = uu;
            }
            Family::Custom(r) => {
                if !r.second(eps, y, u, out) {
                    return Err(Error::Capability("second derivatives of G"));
                }
            }
        }
        Ok(())
    }

    /// `G_eps(y, u)` with a finiteness check.
    pub fn eval_recursion(&self, eps: f64, y: &[f64], u: f64) -> Result<f64> {
        if y.len() != self.p {
            return Err(Error::invalid("y", format!("expected {} lagged values, got {}", self.p, y.len())));
        }
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::invalid("u", "rescaled time must lie in [0, 1]"));
        }
        let v = self.eval(eps, y, u);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NumericEscape { index: 0, value: v, state: y.to_vec() })
        }
    }
}

/// Outcome of [`contraction_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub chi_sum: f64,
    pub empirical_lipschitz: f64,
    /// Sampling standard error of the maximising probe.
    pub stderr: f64,
    /// Raised when the empirical constant exceeds `1 + max(1e-3, 3 stderr)`.
    pub flagged: bool,
}

/// Innovation draws per probe in [`contraction_report`].
pub const PROBE_DRAWS: usize = 4096;

/// Empirical `sup ||G(y,u) - G(y',u)||_q / |y - y'|_{chi,q'}` over random probes.
pub fn contraction_report(model: &ModelSpec, n_probe: usize, seed: Seed) -> Result<ContractionReport> {
    if n_probe < 100 {
        return Err(Error::invalid("n_probe", "at least 100 probes are required"));
    }
    let p = model.lags();
    let q = model.q();
    let qp = model.q_prime();
    let eps = model.stream(seed).lane(Lane::Coupling).window(0, PROBE_DRAWS);
    let probe = InnovationStream::new(InnovationLaw::standard_gaussian(), seed).lane(Lane::Pilot);
    let probe_u = InnovationStream::new(InnovationLaw::Uniform { lo: 0.0, hi: 1.0 }, seed).lane(Lane::Pilot);
    let stride = (2 * p + 2) as i64;
    let (mut best, mut best_se) = (0.0f64, 0.0f64);
    let mut y = vec![0.0; p];
    let mut y2 = vec![0.0; p];
    for k in 0..n_probe as i64 {
        let base = k * stride;
        let u = probe_u.draw(base);
        let scale = powf(10.0, -1.0 + 2.5 * probe_u.draw(base + 1));
        for i in 0..p {
            y[i] = scale * probe.draw(base + 2 + i as i64);
            y2[i] = scale * probe.draw(base + 2 + (p + i) as i64);
        }
        let denom = powf(
            model.chi().iter().zip(y.iter().zip(&y2)).map(|(c, (a, b))| c * powf((a - b).abs(), qp)).sum::<f64>(),
            1.0 / qp,
        );
        let (mut m, mut m2) = (0.0, 0.0);
        for &e in eps.as_slice() {
            let d = powf((model.eval(e, &y, u) - model.eval(e, &y2, u)).abs(), q);
            m += d;
            m2 += d * d;
        }
        let nd = PROBE_DRAWS as f64;
        m /= nd;
        let var_m = ((m2 / nd - m * m).max(0.0)) / nd;
        if m == 0.0 {
            continue;
        }
        let norm = powf(m, 1.0 / q);
        let ratio = if denom > 0.0 { norm / denom } else { f64::INFINITY };
        if ratio > best {
            best = ratio;
            best_se = if denom > 0.0 { powf(m, 1.0 / q - 1.0) * sqrt(var_m) / (q * denom) } else { f64::INFINITY };
        }
    }
    Ok(ContractionReport {
        chi_sum: model.chi_sum(),
        empirical_lipschitz: best,
        stderr: best_se,
        flagged: best > 1.0 + (3.0 * best_se).max(1e-3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::ParameterCurve as C;

    fn reference_arch() -> ModelSpec {
        make_builtin(FamilyKind::TvArch, vec![C::constant(0.2), C::poly([0.0, 0.0, 0.95])], Extras::default()).unwrap()
    }

    #[test]
    fn reference_tvarch_accepted() {
        let m = reference_arch();
        assert_eq!(m.lags(), 1);
        assert!((m.chi()[0] - 0.95f64.sqrt()).abs() < 1e-15);
        assert!(m.chi_sum() < 1.0);
    }

    #[test]
    fn unit_root_rejected_with_named_sup() {
        let err = make_builtin(FamilyKind::TvAr, vec![C::constant(1.0), C::constant(1.0)], Extras::default()).unwrap_err();
        match err {
            Error::Contraction { chi_sum, detail } => {
                assert_eq!(chi_sum, 1.0);
                assert!(detail.contains("a_1"), "{detail}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn zero_coefficient_ar_is_noise() {
        let m = make_builtin(FamilyKind::TvAr, vec![C::constant(0.0), C::constant(1.0)], Extras::default()).unwrap();
        assert_eq!(m.chi(), &[0.0]);
        assert_eq!(m.eval_recursion(0.7, &[123.0], 0.3).unwrap(), 0.7);
    }

    #[test]
    fn hand_evaluations() {
        let arch = reference_arch();
        assert!((arch.eval_recursion(1.0, &[1.0], 1.0).unwrap() - 1.072380529476361).abs() < 1e-12);
        let ar = make_builtin(FamilyKind::TvAr, vec![C::linear(0.0, 0.5), C::constant(1.0)], Extras::default()).unwrap();
        assert!((ar.eval_recursion(1.0, &[2.0], 0.5).unwrap() - 1.5).abs() < 1e-15);
        let tar = make_builtin(FamilyKind::TvTar, vec![C::constant(0.5), C::constant(-0.3)], Extras::default()).unwrap();
        assert!((tar.eval_recursion(0.0, &[-2.0], 0.4).unwrap() + 0.6).abs() < 1e-15);
    }

    #[test]
    fn argument_checks() {
        let ar = make_builtin(FamilyKind::TvAr, vec![C::constant(0.5), C::constant(1.0)], Extras::default()).unwrap();
        assert!(matches!(ar.eval_recursion(0.0, &[1.0, 2.0], 0.5), Err(Error::Invalid { field: "y", .. })));
        assert!(matches!(ar.eval_recursion(0.0, &[1.0], 1.5), Err(Error::Invalid { field: "u", .. })));
        assert!(matches!(ar.eval_recursion(0.0, &[f64::INFINITY], 0.5), Err(Error::NumericEscape { .. })));
        assert!(make_builtin(FamilyKind::TvExpAr, vec![C::constant(0.5)], Extras::default()).is_err());
        assert!(make_builtin(FamilyKind::TvExpAr, vec![C::constant(0.5)], Extras::expar(1.0)).is_err());
        assert!(make_builtin(FamilyKind::TvTar, vec![C::constant(0.5)], Extras::default()).is_err());
        let neg = make_builtin(FamilyKind::TvArch, vec![C::constant(0.0), C::constant(0.5)], Extras::default());
        assert!(neg.is_err());
    }

    #[test]
    fn builtin_weights() {
        let tar = make_builtin(FamilyKind::TvTar, vec![C::linear(0.1, 0.6), C::constant(-0.7)], Extras::default()).unwrap();
        assert!((tar.chi()[0] - 0.7).abs() < 1e-15);
        let ex = make_builtin(FamilyKind::TvExpAr, vec![C::constant(0.5)], Extras::expar(-0.8)).unwrap();
        assert_eq!(ex.chi(), &[0.8]);
        let rc = make_builtin(
            FamilyKind::TvRc,
            vec![C::constant(0.0), C::constant(1.0), C::constant(0.3), C::constant(0.4)],
            Extras::default(),
        )
        .unwrap();
        assert!((rc.chi()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn contraction_report_cases() {
        let seed = Seed::new(3, 0);
        let ar = make_builtin(FamilyKind::TvAr, vec![C::constant(0.5), C::constant(1.0)], Extras::default()).unwrap();
        let r = contraction_report(&ar, 200, seed).unwrap();
        assert!((r.empirical_lipschitz - 1.0).abs() < 1e-9 && !r.flagged, "{r:?}");
        let zero = make_builtin(FamilyKind::TvAr, vec![C::constant(0.0), C::constant(1.0)], Extras::default()).unwrap();
        assert_eq!(contraction_report(&zero, 100, seed).unwrap().empirical_lipschitz, 0.0);
        let arch = contraction_report(&reference_arch(), 300, seed).unwrap();
        assert!(arch.empirical_lipschitz <= 1.0 + 3.0 * arch.stderr, "{arch:?}");
        assert!(contraction_report(&ar, 10, seed).is_err());
    }
}
