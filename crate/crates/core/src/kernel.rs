//! Localizing kernels supported on [-1/2, 1/2].

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum KernelFamily {
    Rectangular,
    Epanechnikov,
    Triangular,
    /// `2 * 1{0 <= x <= 1/2}`: asymmetric, nonzero first moment.
    OneSided,
}

/// A normalized kernel `K` with closed-form moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Kernel {
    family: KernelFamily,
}

pub fn make_kernel(family: KernelFamily) -> Kernel {
    Kernel { family }
}

impl Kernel {
    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(x.abs() <= 0.5) {
            return 0.0;
        }
        match self.family {
            KernelFamily::Rectangular => 1.0,
            KernelFamily::Epanechnikov => 1.5 * (1.0 - 4.0 * x * x),
            KernelFamily::Triangular => 2.0 * (1.0 - 2.0 * x.abs()),
            KernelFamily::OneSided => {
                if x >= 0.0 {
                    2.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `K_b(x) = K(x / b) / b`.
    pub fn scaled(&self, x: f64, b: f64) -> f64 {
        self.eval(x / b) / b
    }

    pub fn support(&self) -> (f64, f64) {
        (-0.5, 0.5)
    }

    /// Total variation `B_K`.
    pub fn bv(&self) -> f64 {
        match self.family {
            KernelFamily::Rectangular => 2.0,
            KernelFamily::Epanechnikov => 3.0,
            KernelFamily::Triangular | KernelFamily::OneSided => 4.0,
        }
    }

    /// `integral of K`.
    pub fn mass(&self) -> f64 {
        1.0
    }

    /// `integral of K^2`.
    pub fn l2(&self) -> f64 {
        match self.family {
            KernelFamily::Rectangular => 1.0,
            KernelFamily::Epanechnikov => 1.2,
            KernelFamily::Triangular => 4.0 / 3.0,
            KernelFamily::OneSided => 2.0,
        }
    }

    /// `integral of x K(x)`.
    pub fn first_moment(&self) -> f64 {
        match self.family {
            KernelFamily::OneSided => 0.25,
            _ => 0.0,
        }
    }

    /// `integral of x^2 K(x)`.
    pub fn second_moment(&self) -> f64 {
        match self.family {
            KernelFamily::Rectangular | KernelFamily::OneSided => 1.0 / 12.0,
            KernelFamily::Epanechnikov => 0.05,
            KernelFamily::Triangular => 1.0 / 24.0,
        }
    }

    pub fn sup(&self) -> f64 {
        match self.family {
            KernelFamily::Rectangular => 1.0,
            KernelFamily::Epanechnikov => 1.5,
            KernelFamily::Triangular | KernelFamily::OneSided => 2.0,
        }
    }

    pub fn sym(&self) -> bool {
        self.family != KernelFamily::OneSided
    }
}

pub(crate) fn check_bandwidth(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("b", "bandwidth must lie in (0, 1)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [KernelFamily; 4] =
        [KernelFamily::Rectangular, KernelFamily::Epanechnikov, KernelFamily::Triangular, KernelFamily::OneSided];

    fn midpoint(f: impl Fn(f64) -> f64) -> f64 {
        let m = 10_000;
        (0..m).map(|i| f(-0.5 + (i as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64
    }

    #[test]
    fn moments_match_quadrature() {
        for fam in ALL {
            let k = make_kernel(fam);
            assert!((midpoint(|x| k.eval(x)) - 1.0).abs() < 1e-8, "{fam:?}");
            assert!((midpoint(|x| k.eval(x).powi(2)) - k.l2()).abs() < 1e-7, "{fam:?}");
            assert!((midpoint(|x| x * k.eval(x)) - k.first_moment()).abs() < 1e-8, "{fam:?}");
            assert!((midpoint(|x| x * x * k.eval(x)) - k.second_moment()).abs() < 1e-8, "{fam:?}");
            assert_eq!(k.eval(0.6), 0.0);
            assert_eq!(k.eval(-0.6), 0.0);
        }
    }

    #[test]
    fn total_variation_on_fine_grid() {
        for fam in ALL {
            let k = make_kernel(fam);
            let m = 20_001;
            let xs: alloc::vec::Vec<f64> = (0..m).map(|i| -0.6 + 1.2 * i as f64 / (m - 1) as f64).collect();
            let tv: f64 = xs.windows(2).map(|w| (k.eval(w[1]) - k.eval(w[0])).abs()).sum();
            assert!((tv - k.bv()).abs() < 1e-3, "{fam:?}: {tv}");
        }
    }

    #[test]
    fn symmetry_flag() {
        for fam in ALL {
            let k = make_kernel(fam);
            let even = (0..=100).all(|i| {
                let x = i as f64 / 200.0;
                k.eval(x) == k.eval(-x)
            });
            assert_eq!(even, k.sym(), "{fam:?}");
        }
    }
}
