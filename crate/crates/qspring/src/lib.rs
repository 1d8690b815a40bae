//! Design and simulation toolkit for cavity-mediated strong coupling of a
//! single trapped atom to a micromechanical membrane.
//!
//! The crate is organized as a pipeline:
//!
//! - [`physics`]: raw system parameters, lattice/membrane geometry solvers,
//!   and every derived rate (couplings, decoherence channels, powers,
//!   heating) together with the strong-coupling condition ledger.
//! - [`model`]: quadratic open-system models (effective two-mode and full
//!   four-mode) and the mapping from Hamiltonian + jump operators to
//!   first/second-moment drift and diffusion matrices.
//! - [`gaussian`]: exact Gaussian-state engine (moment integration, Lyapunov
//!   steady states, squeezing, Wigner functions, fidelity).
//! - [`fock`]: independent truncated-Fock density-matrix oracle used to
//!   certify the Gaussian engine.
//! - [`scenarios`]: the worked example ledger, squeezed-state transfer,
//!   loss sweeps, and the adiabatic-elimination verification.
//! - [`cli`]: command-line front end with JSON/CSV emission.
//!
//! Conventions used throughout: quadratures `X = (a + a†)/√2`,
//! `P = -i(a - a†)/√2` with `[X, P] = i` and vacuum variance 1/2; all
//! internal frequencies and rates are angular (rad/s); squeezing in dB is
//! `-10·log10(V/V_vac)`.

pub mod cli;
pub mod fock;
pub mod gaussian;
pub mod model;
mod numeric;
pub mod physics;
pub mod scenarios;
