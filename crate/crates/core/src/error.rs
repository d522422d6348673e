use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A Henneberg step names two parents that are not adjacent when applied.
    #[error("henneberg step for vertex {vertex}: parents {a} and {b} are not adjacent")]
    NonAdjacentParents { vertex: usize, a: usize, b: usize },

    /// A Henneberg step re-introduces a vertex that already exists.
    #[error("henneberg step re-introduces existing vertex {0}")]
    DuplicateVertex(usize),

    /// A step references a vertex id that does not exist at that point.
    #[error("henneberg step for vertex {vertex} references missing vertex {missing}")]
    DanglingReference { vertex: usize, missing: usize },

    /// An edge set admits no reverse-deletion order, so it is not a
    /// triangulated Laman graph.
    #[error("edge set is not a triangulated Laman graph: {0}")]
    NotTlg(String),

    /// An interaction law was evaluated at a non-positive distance.
    #[error("interaction law evaluated at non-positive distance {0}")]
    NonPositiveDistance(f64),

    /// An operation requiring a class-F law received one that is not.
    #[error("law is not in class F: {0}")]
    NotClassF(String),

    /// A monotone root solve failed to bracket a sign change.
    #[error("root solve could not bracket a sign change: {0}")]
    NoRoot(String),

    /// A perturbation bump's support is not contained in the positive axis.
    #[error("bump support [{lo}, {hi}] must lie inside (0, inf)")]
    InvalidSupport { lo: f64, hi: f64 },

    /// Two adjacent agents coincide, so edge forces are undefined.
    #[error("agents {i} and {j} of edge ({i},{j}) coincide")]
    EdgeCollision { i: usize, j: usize },

    /// Gradient flow hit its time horizon before the residual tolerance.
    #[error("flow stalled at t = {t}: residual {residual} above tolerance {tol}")]
    Stalled { t: f64, residual: f64, tol: f64 },

    /// An adjacent pair approached collision during integration.
    #[error("flow drove edge ({i},{j}) below the collision floor ({dist})")]
    CollisionApproach { i: usize, j: usize, dist: f64 },

    /// The gauge-fixed Newton Jacobian is rank deficient.
    #[error("gauge-fixed Newton Jacobian is singular (degenerate orbit)")]
    SingularGaugeJacobian,

    /// Newton refinement failed to converge even after a flow failover.
    #[error("newton refinement did not converge: residual {0}")]
    NewtonDiverged(f64),

    /// A check that requires an equilibrium received a non-equilibrium.
    #[error("configuration is not an equilibrium: residual {residual} > {tol}")]
    NotEquilibrium { residual: f64, tol: f64 },

    /// A check that requires a collinear configuration received a non-line one.
    #[error("configuration is not collinear (normalized cross {0})")]
    NotCollinear(f64),

    /// Inertia was requested for a matrix that is not symmetric.
    #[error("matrix is not symmetric: max asymmetry {0}")]
    NotSymmetric(f64),

    /// Canonical form needs distinct first two agents.
    #[error("agents 1 and 2 coincide; canonical form undefined")]
    DegenerateBase,

    /// A degenerate orbit does not have the repairable force-balance form.
    #[error("degeneracy is not of the repairable form: {0}")]
    NotRepairable(String),

    /// A system definition file failed to parse or validate.
    #[error("system definition error: {0}")]
    Spec(String),
}
