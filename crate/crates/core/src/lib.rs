//! Reciprocal multi-agent (RMA) gradient systems on triangulated Laman graphs.
//!
//! An RMA system places `N` planar agents on the vertices of a graph and
//! moves each one by the distance-dependent forces of its incident edges:
//!
//! ```text
//! dx_i/dt = sum over neighbors j of  f_ij(d_ij) * (x_j - x_i)
//! ```
//!
//! With reciprocal laws (`f_ij = f_ji`) this is the negative gradient flow of
//! a potential that only depends on inter-agent distances, so equilibria come
//! in orbits of the rigid-motion group SE(2). This crate provides:
//!
//! * [`graph`] — triangulated Laman graphs (TLGs) built by Henneberg vertex
//!   additions, recognition, and induced subgraphs;
//! * [`laws`] — the class of monotone interaction laws closed under sums,
//!   compactly supported perturbations, and the virtual-interaction calculus
//!   used to reduce an `N`-agent line system to `N-1` agents;
//! * [`dynamics`] — potential, vector field, the symmetric linearization with
//!   its block structure on collinear configurations, gradient-flow
//!   integration, and Newton refinement of equilibria;
//! * [`analysis`] — the canonical edge partition, matrix inertia, exhaustive
//!   enumeration of collinear critical orbits through reduced systems, the
//!   Morse-Bott index formula and inertia-formula checkers, and degeneracy
//!   repair by localized law perturbations;
//! * [`harness`] — system definition files, genericity scans over sampled
//!   ensembles, and aggregate reports.

pub mod analysis;
pub mod dynamics;
mod error;
pub mod graph;
pub mod harness;
pub mod laws;
mod roots;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
