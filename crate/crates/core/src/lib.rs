//! Numerical toolkit for the nonlinear single-pixel X-ray transform in two dimensions,
//!
//! ```text
//! Kf(x) = ∫_{S^1} exp(-Xf(x, θ)) dθ,     Xf(x, θ) = ∫ f(x + sθ) ds.
//! ```
//!
//! The crate covers forward simulation of `K`, its Fréchet derivative and adjoint, the
//! linearised inversion `g = -c_2 |D| ∂_ε K[εg]|_{ε=0}` with `c_2 = 1/(4π)`, Gauss-Newton
//! reconstruction from nonlinear data, and empirical stability audits.
//!
//! Modules, bottom-up:
//!
//! * [`grid`] and [`phantom`]: lattices, test images, [`io`] formats.
//! * [`projector`]: the X-ray transform `X`, its adjoint, `X'X`, per-pixel rays.
//! * [`spectral`]: `|D| = (-Δ)^{1/2}` by FFT and the inversion `f = c_2 |D| X'X f`.
//! * [`singlepixel`]: `K`, `K'[f]`, `K'[f]^*` and the linearised reconstruction.
//! * [`solver`]: matrix-free Gauss-Newton with conjugate gradients.
//! * [`metrics`]: discrete norms, the relative noise model, stability audits.
//! * [`cli`]: experiment drivers behind the `spixct` binary.

pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod projector;
pub mod singlepixel;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Grid, ImageGrid, Lattice, ScalarField};
