//! Partial Integral Equation (PIE) toolbox.
//!
//! This crate represents 1D delayed PDE / delay-ODE / coupled ODE-PDE systems
//! as Partial Integral Equations `T v_t = A v`, where `T` and `A` are partial
//! integral (PI) operators with matrix-valued polynomial kernels, and certifies
//! exponential stability by assembling a linear PI operator inequality (LPI) as
//! a semidefinite feasibility problem.
//!
//! Layering, bottom up:
//!
//! * [`polykernel`] — exact arithmetic on matrix-valued polynomials in the
//!   ordered variables `x, θ` (spatial interval) and `s, ν` (delay interval).
//! * [`quad`] — Gauss–Legendre quadrature, the numerical backbone of the
//!   test oracles and the simulator.
//! * [`pi_algebra`] — PI operators on the mixed state space
//!   `Z = R^{n0} × L2[s] × L2[x] × L2[s,x]` and their *-algebra.
//! * [`pie_system`] — the 12-operator PIE record and feedback interconnection.
//! * [`pde_models`] — declarative delay-system models and the structural
//!   delay-to-transport rewrites.
//! * [`converters`] — fundamental-state maps and every PDE/ODE → PIE pipeline.
//! * [`sdp_backend`] — semidefinite feasibility problems, an in-process
//!   interior-point solver, and SDPA sparse interchange.
//! * [`lpi_stability`] — the stability LPI, positive-operator cone
//!   parameterization, bisection search and certificate replay.
//! * [`simulator`] — method-of-lines cross-checks of conversions and decay
//!   rates.

pub mod converters;
pub mod lpi_stability;
pub mod pde_models;
pub mod pi_algebra;
pub mod pie_system;
pub mod polykernel;
pub mod quad;
pub mod sdp_backend;
pub mod selftest;
pub mod simulator;
