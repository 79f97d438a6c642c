//! Smooth parameter curves on the rescaled-time interval [0, 1].

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

type CurveFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A caller-supplied curve with its analytic derivatives.
#[derive(Clone)]
pub struct CustomCurve {
    pub eval: CurveFn,
    pub deriv: CurveFn,
    pub deriv2: Option<CurveFn>,
    pub hoelder_alpha: f64,
    pub hoelder_constant: f64,
}

/// Piecewise linear interpolation on an increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl Table {
    /// Values on the uniform grid `0, 1/(m-1), ..., 1`.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        if m < 2 {
            return Err(Error::invalid("curves.values", "a table needs at least two values"));
        }
        let grid = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        Table::new(grid, values)
    }

    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(Error::invalid("curves.grid", "grid and values must have equal length >= 2"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("curves.grid", "grid must be strictly increasing"));
        }
        if grid[0] > 0.0 || grid[grid.len() - 1] < 1.0 {
            return Err(Error::invalid("curves.grid", "grid must cover [0, 1]"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("curves.values", "values must be finite"));
        }
        Ok(Table { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment(&self, u: f64) -> usize {
        let last = self.grid.len() - 2;
        match self.grid.partition_point(|g| *g <= u) {
            0 => 0,
            i => (i - 1).min(last),
        }
    }

    fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.grid[i + 1] - self.grid[i])
    }

    fn eval(&self, u: f64) -> f64 {
        let i = self.segment(u);
        self.values[i] + (u - self.grid[i]) * self.slope(i)
    }
}

/// A map `u -> a(u)` with first and (optionally) second derivative.
#[derive(Clone)]
pub enum ParameterCurve {
    Const(f64),
    /// `c_0 + c_1 u + c_2 u^2 + ...`
    Poly(Vec<f64>),
    Table(Table),
    Custom(CustomCurve),
}

impl fmt::Debug for ParameterCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParameterCurve::Const(c) => f.debug_tuple("Const").field(c).finish(),
            ParameterCurve::Poly(c) => f.debug_tuple("Poly").field(c).finish(),
            ParameterCurve::Table(t) => f.debug_tuple("Table").field(t).finish(),
            ParameterCurve::Custom(c) => f
                .debug_struct("Custom")
                .field("hoelder_alpha", &c.hoelder_alpha)
                .field("hoelder_constant", &c.hoelder_constant)
                .finish_non_exhaustive(),
        }
    }
}

fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ci| acc * u + ci)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect()
}

const SUP_GRID: usize = 4096;

impl ParameterCurve {
    pub fn constant(c: f64) -> Self {
        ParameterCurve::Const(c)
    }

    pub fn poly(coeffs: impl Into<Vec<f64>>) -> Self {
        ParameterCurve::Poly(coeffs.into())
    }

    /// `lo + (hi - lo) u`.
    pub fn linear(lo: f64, hi: f64) -> Self {
        ParameterCurve::Poly(alloc::vec![lo, hi - lo])
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            ParameterCurve::Const(c) => *c,
            ParameterCurve::Poly(c) => horner(c, u),
            ParameterCurve::Table(t) => t.eval(u),
            ParameterCurve::Custom(c) => (c.eval)(u),
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            ParameterCurve::Const(_) => 0.0,
            ParameterCurve::Poly(c) => horner(&poly_deriv(c), u),
            ParameterCurve::Table(t) => t.slope(t.segment(u)),
            ParameterCurve::Custom(c) => (c.deriv)(u),
        }
    }

    /// Second derivative; `None` when the curve does not declare one.
    pub fn deriv2(&self, u: f64) -> Option<f64> {
        match self {
            ParameterCurve::Const(_) | ParameterCurve::Table(_) => Some(0.0),
            ParameterCurve::Poly(c) => Some(horner(&poly_deriv(&poly_deriv(c)), u)),
            ParameterCurve::Custom(c) => c.deriv2.as_ref().map(|f| f(u)),
        }
    }

    pub fn has_deriv2(&self) -> bool {
        !matches!(self, ParameterCurve::Custom(CustomCurve { deriv2: None, .. }))
    }

    pub fn hoelder_alpha(&self) -> f64 {
        match self {
            ParameterCurve::Custom(c) => c.hoelder_alpha,
            _ => 1.0,
        }
    }

    /// A constant `L` with `|a(u) - a(v)| <= L |u - v|^alpha`.
    pub fn hoelder_constant(&self) -> f64 {
        match self {
            ParameterCurve::Const(_) => 0.0,
            ParameterCurve::Poly(c) => poly_deriv(c).iter().map(|v| v.abs()).sum(),
            ParameterCurve::Table(t) => (0..t.grid.len() - 1).map(|i| t.slope(i).abs()).fold(0.0, f64::max),
            ParameterCurve::Custom(c) => c.hoelder_constant,
        }
    }

    fn extrema(&self) -> (f64, f64) {
        match self {
            ParameterCurve::Const(c) => (*c, *c),
            ParameterCurve::Table(t) => t
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v))),
            ParameterCurve::Poly(c) => {
                let d = poly_deriv(c);
                let mut lo = horner(c, 0.0).min(horner(c, 1.0));
                let mut hi = horner(c, 0.0).max(horner(c, 1.0));
                let mut prev = horner(&d, 0.0);
                for i in 1..=SUP_GRID {
                    let b = i as f64 / SUP_GRID as f64;
                    let cur = horner(&d, b);
                    if prev == 0.0 || prev.signum() != cur.signum() {
                        let (mut l, mut r) = ((i - 1) as f64 / SUP_GRID as f64, b);
                        for _ in 0..60 {
                            let m = 0.5 * (l + r);
                            if horner(&d, m).signum() == horner(&d, l).signum() {
                                l = m;
                            } else {
                                r = m;
                            }
                        }
                        let v = horner(c, 0.5 * (l + r));
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    prev = cur;
                }
                (lo, hi)
            }
            ParameterCurve::Custom(c) => (0..=SUP_GRID).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                let v = (c.eval)(i as f64 / SUP_GRID as f64);
                (lo.min(v), hi.max(v))
            }),
        }
    }

    /// `sup_u |a(u)|` (exact for constant, polynomial and table curves; grid-based for custom ones).
    pub fn sup_abs(&self) -> f64 {
        let (lo, hi) = self.extrema();
        lo.abs().max(hi.abs())
    }

    pub fn sup(&self) -> f64 {
        self.extrema().1
    }

    pub fn inf(&self) -> f64 {
        self.extrema().0
    }
}
