//! Simulation, localized estimation and dependence diagnostics for nonlinear locally
//! stationary processes `X_{t,n} = G_{eps_t}(X_{t-1,n}, ..., X_{t-p,n}, t/n)`.
//!
//! The crate is `no_std` with `alloc`; file formats, the command-line front end and the
//! experiment harness live in the `locstat` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod curve;
pub mod dependence;
pub mod error;
pub mod kernel;
pub mod localize;
pub mod math;
pub mod mc;
pub mod model;
pub mod optim;
pub mod qmle;
pub mod rng;
pub mod simulate;

pub use curve::{CustomCurve, ParameterCurve, Table};
pub use error::{Error, Result};
pub use kernel::{make_kernel, Kernel, KernelFamily};
pub use mc::{Replicate, Sequential};
pub use model::{make_builtin, make_custom, Extras, FamilyKind, ModelSpec, Recursion};
pub use rng::{InnovationLaw, InnovationStream, Lane, Seed};
pub use simulate::{TriangularPath, StationarySample};
