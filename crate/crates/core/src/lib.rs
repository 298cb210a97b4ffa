//! Contracting neural ODEs in the 1- and ∞-norms.
//!
//! Every vector field of the form `f(x) = −γx + W⁻¹φ(Wx)` with
//! `‖φ‖_Lip,p ≤ γ` is weakly infinitesimally contracting in `‖Wx‖_p`
//! for `p ∈ {1, ∞}`, and every such field has this form. This crate turns
//! that into an unconstrained parameterization: `φ` is a
//! [`lipnet::LipschitzNet`] whose Lipschitz bound is a product of row or
//! column sums, `γ` is derived from it, and gradient training needs no
//! projections.
//!
//! Modules:
//! - [`densela`]: dense matrices, induced norms, matrix measures
//! - [`lipnet`]: Lipschitz-certified MLPs with saturated polyactivations
//! - [`adgrad`]: reverse-mode gradients and finite-difference checks
//! - [`wicfield`]: synthesis, decomposition and sampled certification
//! - [`odeint`]: RK4 rollouts, unrolled VJPs, contraction monitoring
//! - [`trainer`]: losses, Cocob/Adam, the training loop
//! - [`conelab`]: the 2×2 eigenvalue cone and trace–determinant regions
//! - [`expkit`]: ground-truth systems and datasets
//! - [`cli`]: the `wicnode` command line
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod adgrad;
pub mod cli;
pub mod conelab;
pub mod densela;
pub mod expkit;
pub mod lipnet;
pub mod odeint;
pub mod plot;
pub mod seed;
pub mod serial;
pub mod trainer;
pub mod wicfield;

pub use densela::{DenseMatrix, DenseVector, PNorm};
pub use lipnet::{ActivationKind, LipschitzNet};
pub use wicfield::{synthesize, VectorField, WicField};
