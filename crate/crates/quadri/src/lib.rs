//! Numerical companion library for diagonal translation-invariant quadratic
//! systems
//!
//!   λ₁x₁² + … + λₛxₛ² = 0,   λ₁x₁ + … + λₛxₛ = 0,
//!
//! with the variables restricted to `{1..N}` or to a subset `A ⊂ {1..N}`.
//!
//! The crate makes the standard analytic objects attached to such a system
//! computable at desk scale:
//!
//! * exact solution counts `Z(N)`, `Z_A(N)` by integer dynamic programming
//!   ([`represent`]),
//! * quadratic exponential sums, complete Gauss sums, the oscillatory
//!   integral `v` and the smooth cutoff `ψ` ([`expsums`]),
//! * major/minor arcs, the singular series with its p-adic local factors,
//!   Hensel lifting and the singular integral ([`circle`]),
//! * L^p moments of weighted quadratic exponential sums over the torus and
//!   the dyadic major-arc decomposition of the three-fold representation
//!   function ([`restriction`]),
//! * an executable density-increment loop: balanced function, large Fourier
//!   coefficient search, Heilbronn/Dirichlet approximation and certified
//!   progression extraction ([`increment`]).
//!
//! The `quadri` binary exposes the experiment runner; each major capability
//! also has a runnable example under `examples/`.

pub mod circle;
pub mod cli;
pub mod expsums;
pub mod increment;
pub mod phase;
pub mod represent;
pub mod restriction;
pub mod systems;
