//! Pseudospectral simulator and analysis toolkit for the Klein-Gordon
//! equation with a cubic convolution (Hartree-type) nonlinearity,
//!
//! ```text
//! ∂_t²u − Δu + u = λ (V_γ ∗ |u|²) u,     V_γ(x) = |x|^{−γ},
//! ```
//!
//! on a periodic box standing in for R^n. The crate provides
//!
//! - exact-rational admissibility checks for the (n, γ, β) parameter region
//!   and the full chain of derived Strichartz/HLS exponents ([`params`]),
//! - Fourier-multiplier calculus: ⟨i∇⟩^s, the free half-wave propagator
//!   U_ε(t) = e^{−iε⟨i∇⟩t}, weighted Sobolev norms and the vector field
//!   J_ε = ⟨i∇⟩x + iεt∇ ([`spectral`]),
//! - the convolution potential and nonlinearity F_γ ([`potential`]),
//! - half-wave changes of variable, a Strang-splitting integrator, the
//!   Duhamel operator and a Picard fixed-point iterator ([`dynamics`]),
//! - interaction-picture scattering diagnostics: final-state extraction,
//!   decay-rate fits, the final-state (backward) problem realizing the
//!   scattering operator, and X-norm component tracking ([`scattering`]),
//! - a JSON-configured CLI front end ([`cli`], [`config`]).

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
mod fft;
pub mod params;
pub mod potential;
pub mod scattering;
pub mod spectral;
pub mod util;

pub use error::{Error, Result};
