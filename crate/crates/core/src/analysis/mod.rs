//! Structural analysis of critical orbits: canonical partition, inertia,
//! exhaustive enumeration of collinear critical orbits, verification of the
//! Morse-Bott index formula and the reduction inertia formula, and repair of
//! force-balance degeneracies.

mod checks;
mod enumerate;
mod inertia;
mod partition;
mod repair;

pub use checks::{
    check_index_formula, check_inertia_formula, CheckOptions, CongruenceReport, IndexFormulaReport,
    InertiaFormulaReport,
};
pub use enumerate::{
    enumerate_line_equilibria, CriticalOrbitRecord, EnumerateOptions, ReductionStep,
};
pub use inertia::{inertia, symmetric_eigenvalues, InertiaTriple};
pub use partition::{canonical_partition, CanonicalPartition, PartitionPart};
pub use repair::repair_degenerate;

use crate::dynamics::{Configuration, RmaSystem};
use crate::graph::InducedSubgraph;
use crate::laws::Ensemble;
use crate::Result;

/// Default tolerance on the normalized cross product in collinearity tests.
pub const DEFAULT_COLLINEAR_TOL: f64 = 1e-9;
/// Default relative eigenvalue threshold separating zero modes.
pub const DEFAULT_ZERO_EIG_TOL: f64 = 1e-8;
/// Scalar force sums within this of zero count as degenerate sign tests.
pub const SIGN_ZERO_TOL: f64 = 1e-9;

/// SE(2) orbit representative: vertex 1 at the origin, vertex 2 on the
/// positive a-axis. Reflections are not in SE(2), so mirror configurations
/// canonicalize differently.
pub fn canonical_orbit_form(config: &Configuration) -> Result<Configuration> {
    config.canonical_form()
}

/// Vector-valued sign with a zero band: `(1,0,0)`, `(0,1,0)` or `(0,0,1)`.
pub fn sgn(x: f64, zero_tol: f64) -> [i64; 3] {
    if x.abs() <= zero_tol {
        [0, 1, 0]
    } else if x > 0.0 {
        [1, 0, 0]
    } else {
        [0, 0, 1]
    }
}

/// Restrict a system to an induced subgraph, relabeling edge laws.
pub fn subsystem(system: &RmaSystem, sub: &InducedSubgraph) -> Result<RmaSystem> {
    let laws = sub
        .graph
        .edges()
        .iter()
        .map(|&(a, b)| {
            let old = crate::graph::edge(sub.to_old(a), sub.to_old(b));
            (
                (a, b),
                system
                    .ensemble()
                    .get(old)
                    .expect("subgraph edge exists")
                    .clone(),
            )
        })
        .collect();
    let ensemble = Ensemble::new(&sub.graph, laws)?;
    RmaSystem::new(sub.graph.clone(), ensemble)
}

/// The sub-configuration of `config` living on an induced subgraph.
pub fn subconfiguration(config: &Configuration, sub: &InducedSubgraph) -> Configuration {
    config.restrict(&sub.vertex_map)
}
