//! Box-constrained minimization: multi-start grid followed by projected Newton refinement.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct OptimizerConfig {
    /// Grid points per coordinate for the initial scan.
    pub grid_points: usize,
    pub max_iter: usize,
    /// Convergence threshold on the projected gradient, relative to `1 + |f|`.
    pub tol: f64,
    /// Number of best grid points refined.
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { grid_points: 5, max_iter: 200, tol: 1e-9, restarts: 3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerTrace {
    /// Newton iterations summed over all refinements.
    pub iterations: usize,
    /// Grid points evaluated.
    pub starts: usize,
    /// Refinements run.
    pub restarts: usize,
    pub converged: bool,
}

/// A twice-differentiable objective.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> f64;
    /// Returns the value and fills the gradient and the row-major Hessian.
    fn value_grad_hess(&self, theta: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub theta: Vec<f64>,
    pub value: f64,
    pub trace: OptimizerTrace,
}

/// Values within this distance of the best are broken lexicographically by `theta`.
pub const TIE_TOL: f64 = 1e-10;

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn grid(bounds: &[(f64, f64)], g: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            if lo == hi || g <= 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..g).map(|i| lo + (hi - lo) * i as f64 / (g - 1) as f64).collect()
            }
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for v in axis {
                let mut p = prefix.clone();
                p.push(*v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn project(theta: &mut [f64], bounds: &[(f64, f64)]) {
    for (t, &(lo, hi)) in theta.iter_mut().zip(bounds) {
        *t = t.clamp(lo, hi);
    }
}

fn projected_gradient_norm(theta: &[f64], grad: &[f64], bounds: &[(f64, f64)]) -> f64 {
    theta
        .iter()
        .zip(grad)
        .zip(bounds)
        .map(|((t, g), &(lo, hi))| (t - (t - g).clamp(lo, hi)).abs())
        .fold(0.0, f64::max)
}

struct Refined {
    theta: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn refine<O: Objective>(obj: &O, start: &[f64], bounds: &[(f64, f64)], cfg: &OptimizerConfig) -> Refined {
    let d = start.len();
    let mut theta = start.to_vec();
    project(&mut theta, bounds);
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    let mut f = obj.value_grad_hess(&theta, &mut grad, &mut hess);
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        if !f.is_finite() {
            return Refined { theta, value: f, iterations, converged: false };
        }
        let pg = projected_gradient_norm(&theta, &grad, bounds);
        if pg <= cfg.tol * (1.0 + f.abs()) {
            return Refined { theta, value: f, iterations, converged: true };
        }
        iterations += 1;
        let free: Vec<usize> = (0..d)
            .filter(|&i| {
                let (lo, hi) = bounds[i];
                !(lo == hi || (theta[i] <= lo && grad[i] > 0.0) || (theta[i] >= hi && grad[i] < 0.0))
            })
            .collect();
        let newton = newton_direction(&free, &grad, &hess, d);
        let steepest: Vec<f64> = (0..d).map(|i| if free.contains(&i) { -grad[i] } else { 0.0 }).collect();
        let mut moved = false;
        for dir in newton.iter().chain(core::iter::once(&steepest)) {
            if let Some(t) = line_search(obj, &theta, f, &grad, dir, bounds) {
                theta = t;
                moved = true;
                break;
            }
        }
        if !moved {
            let converged = pg <= 1e-6 * (1.0 + f.abs());
            return Refined { theta, value: f, iterations, converged };
        }
        f = obj.value_grad_hess(&theta, &mut grad, &mut hess);
    }
    let pg = projected_gradient_norm(&theta, &grad, bounds);
    Refined { theta, value: f, iterations, converged: pg <= cfg.tol * (1.0 + f.abs()) }
}

fn newton_direction(free: &[usize], grad: &[f64], hess: &[f64], d: usize) -> Option<Vec<f64>> {
    if free.is_empty() {
        return None;
    }
    let m = free.len();
    let h = DMatrix::from_fn(m, m, |i, j| 0.5 * (hess[free[i] * d + free[j]] + hess[free[j] * d + free[i]]));
    let g = nalgebra::DVector::from_fn(m, |i, _| -grad[free[i]]);
    let step = h.cholesky()?.solve(&g);
    let mut dir = vec![0.0; d];
    for (k, &i) in free.iter().enumerate() {
        dir[i] = step[k];
    }
    dir.iter().all(|v| v.is_finite()).then_some(dir)
}

fn line_search<O: Objective>(
    obj: &O,
    theta: &[f64],
    f: f64,
    grad: &[f64],
    dir: &[f64],
    bounds: &[(f64, f64)],
) -> Option<Vec<f64>> {
    let mut s = 1.0;
    for _ in 0..60 {
        let mut cand: Vec<f64> = theta.iter().zip(dir).map(|(t, d)| t + s * d).collect();
        project(&mut cand, bounds);
        let decrease: f64 = grad.iter().zip(cand.iter().zip(theta)).map(|(g, (c, t))| g * (c - t)).sum();
        if cand.iter().zip(theta).all(|(c, t)| c == t) {
            return None;
        }
        let v = obj.value(&cand);
        if v.is_finite() && v <= f + 1e-4 * decrease && v < f {
            return Some(cand);
        }
        s *= 0.5;
    }
    None
}

/// Minimizes `obj` over the box. The best `restarts` grid points (and `warm`, if given) are
/// refined; the returned point never has a larger value than any grid point refined from.
pub fn minimize<O: Objective>(obj: &O, bounds: &[(f64, f64)], cfg: &OptimizerConfig, warm: Option<&[f64]>) -> Result<Minimum> {
    let d = obj.dim();
    if bounds.len() != d {
        return Err(Error::invalid("theta_box", "box dimension must match the parameter dimension"));
    }
    if bounds.iter().any(|&(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::invalid("theta_box", "each coordinate needs finite lo <= hi"));
    }
    let mut scored: Vec<(f64, Vec<f64>)> = grid(bounds, cfg.grid_points).into_iter().map(|t| (obj.value(&t), t)).collect();
    let starts = scored.len();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex(&a.1, &b.1)));
    let mut seeds: Vec<Vec<f64>> = scored.iter().take(cfg.restarts.max(1)).map(|s| s.1.clone()).collect();
    if let Some(w) = warm {
        if w.len() == d {
            let mut w = w.to_vec();
            project(&mut w, bounds);
            seeds.push(w);
        }
    }
    let mut trace = OptimizerTrace { iterations: 0, starts, restarts: seeds.len(), converged: false };
    let mut results: Vec<Refined> = Vec::with_capacity(seeds.len());
    for s in &seeds {
        let r = refine(obj, s, bounds, cfg);
        trace.iterations += r.iterations;
        results.push(r);
    }
    if !results.iter().any(|r| r.converged) {
        return Err(Error::NonConvergence { trace });
    }
    let best = results.iter().filter(|r| r.value.is_finite()).map(|r| r.value).fold(f64::INFINITY, f64::min);
    let pick = results
        .iter()
        .filter(|r| r.value <= best + TIE_TOL)
        .min_by(|a, b| lex(&a.theta, &b.theta))
        .ok_or(Error::NonConvergence { trace: trace.clone() })?;
    trace.converged = pick.converged;
    Ok(Minimum { theta: pick.theta.clone(), value: pick.value, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quad {
        centre: Vec<f64>,
    }

    impl Objective for Quad {
        fn dim(&self) -> usize {
            self.centre.len()
        }
        fn value(&self, t: &[f64]) -> f64 {
            t.iter().zip(&self.centre).enumerate().map(|(i, (a, c))| (i + 1) as f64 * (a - c) * (a - c)).sum()
        }
        fn value_grad_hess(&self, t: &[f64], g: &mut [f64], h: &mut [f64]) -> f64 {
            let d = t.len();
            h.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..d {
                g[i] = 2.0 * (i + 1) as f64 * (t[i] - self.centre[i]);
                h[i * d + i] = 2.0 * (i + 1) as f64;
            }
            self.value(t)
        }
    }

    #[test]
    fn interior_and_boundary_minima() {
        let q = Quad { centre: vec![0.3, 2.0] };
        let m = minimize(&q, &[(-1.0, 1.0), (-1.0, 1.0)], &OptimizerConfig::default(), None).unwrap();
        assert!((m.theta[0] - 0.3).abs() < 1e-12);
        assert_eq!(m.theta[1], 1.0);
        assert!(m.trace.converged);
    }

    #[test]
    fn singleton_box() {
        let q = Quad { centre: vec![0.3] };
        let m = minimize(&q, &[(0.7, 0.7)], &OptimizerConfig::default(), None).unwrap();
        assert_eq!(m.theta, vec![0.7]);
    }

    #[test]
    fn flat_objective_breaks_ties_lexicographically() {
        struct Flat;
        impl Objective for Flat {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, _: &[f64]) -> f64 {
                1.0
            }
            fn value_grad_hess(&self, _: &[f64], g: &mut [f64], h: &mut [f64]) -> f64 {
                g.iter_mut().for_each(|v| *v = 0.0);
                h.iter_mut().for_each(|v| *v = 0.0);
                1.0
            }
        }
        let m = minimize(&Flat, &[(-1.0, 1.0), (0.0, 2.0)], &OptimizerConfig::default(), None).unwrap();
        assert_eq!(m.theta, vec![-1.0, 0.0]);
    }
}
