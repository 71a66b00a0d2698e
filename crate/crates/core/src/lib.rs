//! Numerical toolkit for the structurally damped plate equation
//! `∂_t²u + Δ²u − ρΔ∂_tu = f` with clamped boundary conditions
//! `u = g₀`, `∂_n u = g₁`.
//!
//! The equation is treated through its first-order reduction
//! `∂_t v + A v = (0, f)ᵀ` for `v = (u, ∂_t u)ᵀ` with the block operator
//! `A = [[0, −I], [Δ², −ρΔ]]`. The crate provides:
//!
//! - closed-form algebra of the quadratic pencil `λ² + λρ√B + B`, the
//!   damping angle `ϑ(ρ)` and the 2×2 matrix symbol with its resolvent
//!   ([`pencil`]);
//! - power-weighted Sobolev norms `dist(·,∂O)^γ` on graded grids, Hardy
//!   ratios, Muckenhoupt diagnostics and the multiplication operator
//!   `M^θ u = x₁^θ u` ([`weights`]);
//! - boundary straightening of special `C^{1,κ}` domains via the
//!   regularized-height pullback `Φ(x) = (x₁ − h₁(x), x̃)`, with
//!   distance-equivalence and derivative-blow-up diagnostics
//!   ([`geometry`]);
//! - a periodic (torus) realization of the whole-space multiplier
//!   calculus: symbol resolvent application, Bessel potentials and
//!   sector scans ([`fourier`]);
//! - finite-difference Dirichlet Laplacians and clamped bi-Laplacians,
//!   block-operator spectra, resolvent ray scans, Rademacher bound
//!   estimation and the mapped-operator perturbation defect
//!   ([`operators`]);
//! - θ-scheme time integration with energy-dissipation, decay-rate and
//!   maximal-regularity ratio diagnostics ([`evolution`]).
//!
//! All sweep-style entry points (Monte Carlo trials, ray scans, sample
//! audits) run data-parallel through rayon when the default `parallel`
//! feature is enabled and fall back to sequential iteration otherwise.

pub mod error;
pub mod evolution;
pub mod fourier;
pub mod geometry;
pub mod grid;
pub mod operators;
pub mod parallel;
pub mod pencil;
pub mod profiles;
pub mod weights;

pub use error::{Error, Result};
