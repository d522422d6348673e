//! Planar configurations, the gradient dynamics, and its linearization.
//!
//! A configuration stores all first coordinates, then all second
//! coordinates, `p = (a_1..a_N, b_1..b_N)`. In this ordering the
//! linearization at a configuration lying on the a-axis is exactly
//! block-diagonal: the a-block has off-diagonal entries `f_tilde'(d_ij)`
//! and the b-block `f_ij(d_ij)`, both with zero row sums.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::graph::TlGraph;
use crate::laws::Ensemble;
use crate::{Error, Result};

/// Residual below which a configuration counts as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Edge distance below which integration aborts as a collision approach.
pub const COLLISION_FLOOR: f64 = 1e-8;

/// Labeled planar points in `(a-coords.., b-coords..)` ordering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Configuration {
    coords: Vec<f64>,
}

impl Configuration {
    pub fn from_points(points: &[(f64, f64)]) -> Self {
        let n = points.len();
        let mut coords = vec![0.0; 2 * n];
        for (i, &(a, b)) in points.iter().enumerate() {
            coords[i] = a;
            coords[n + i] = b;
        }
        Self { coords }
    }

    pub fn from_coords(coords: Vec<f64>) -> Self {
        assert!(
            coords.len().is_multiple_of(2),
            "coordinate vector must have even length"
        );
        Self { coords }
    }

    pub fn n(&self) -> usize {
        self.coords.len() / 2
    }

    /// Position of vertex `i` (1-based).
    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.coords[i - 1], self.coords[self.n() + i - 1])
    }

    pub fn set_point(&mut self, i: usize, p: (f64, f64)) {
        let n = self.n();
        self.coords[i - 1] = p.0;
        self.coords[n + i - 1] = p.1;
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (ai, bi) = self.point(i);
        let (aj, bj) = self.point(j);
        let (dx, dy) = (aj - ai, bj - bi);
        if dy == 0.0 {
            dx.abs()
        } else if dx == 0.0 {
            dy.abs()
        } else {
            dx.hypot(dy)
        }
    }

    /// Keep the listed vertices (1-based), in order, as vertices `1..=k`.
    pub fn restrict(&self, vertices: &[usize]) -> Self {
        Self::from_points(&vertices.iter().map(|&v| self.point(v)).collect::<Vec<_>>())
    }

    /// Translate vertex 1 to the origin and rotate vertex 2 onto the
    /// positive a-axis. SE(2) contains no reflections, so mirror images
    /// keep distinct canonical forms.
    pub fn canonical_form(&self) -> Result<Self> {
        let (a1, b1) = self.point(1);
        let (a2, b2) = self.point(2);
        let (dx, dy) = (a2 - a1, b2 - b1);
        if dx == 0.0 && dy == 0.0 {
            return Err(Error::DegenerateBase);
        }
        let d = dx.hypot(dy);
        let (cos, sin) = (dx / d, -dy / d);
        let mut out = Vec::with_capacity(self.n());
        for i in 1..=self.n() {
            let (a, b) = self.point(i);
            let (x, y) = (a - a1, b - b1);
            out.push((cos * x - sin * y, sin * x + cos * y));
        }
        out[0] = (0.0, 0.0);
        out[1] = (d, 0.0);
        Ok(Self::from_points(&out))
    }

    /// Largest absolute b-coordinate; zero for configurations on the a-axis.
    pub fn max_abs_b(&self) -> f64 {
        let n = self.n();
        self.coords[n..].iter().fold(0.0f64, |m, &b| m.max(b.abs()))
    }
}

/// An element of SE(2): rotation by `theta` followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub theta: f64,
    pub translation: (f64, f64),
}

impl RigidMotion {
    pub fn new(theta: f64, translation: (f64, f64)) -> Self {
        Self { theta, translation }
    }

    pub fn identity() -> Self {
        Self {
            theta: 0.0,
            translation: (0.0, 0.0),
        }
    }

    /// Group product: `self.compose(other)` acts as `other` first.
    pub fn compose(&self, other: &RigidMotion) -> Self {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        let (vx, vy) = other.translation;
        Self {
            theta: self.theta + other.theta,
            translation: (
                c * vx - s * vy + self.translation.0,
                s * vx + c * vy + self.translation.1,
            ),
        }
    }

    pub fn apply(&self, config: &Configuration) -> Configuration {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        let (vx, vy) = self.translation;
        let pts: Vec<(f64, f64)> = (1..=config.n())
            .map(|i| {
                let (a, b) = config.point(i);
                (c * a - s * b + vx, s * a + c * b + vy)
            })
            .collect();
        Configuration::from_points(&pts)
    }
}

/// Convenience wrapper for [`RigidMotion::apply`].
pub fn apply_rigid_motion(
    config: &Configuration,
    theta: f64,
    translation: (f64, f64),
) -> Configuration {
    RigidMotion::new(theta, translation).apply(config)
}

/// Symmetric linearization of the dynamics at a configuration.
///
/// This is the Jacobian of the vector field, i.e. the *negative* of the
/// literal second derivative of the potential, so a nondegenerate stable
/// orbit has no positive eigenvalues. On a configuration entirely on the
/// a-axis it is exactly `blockdiag(dFt, F)` with `dFt` carrying
/// `f_tilde'(d_ij)` and `F` carrying `f_ij(d_ij)` off the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Hessian {
    matrix: DMatrix<f64>,
}

impl Hessian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// A reciprocal multi-agent system: a TLG plus one law per edge.
#[derive(Debug, Clone)]
pub struct RmaSystem {
    graph: TlGraph,
    ensemble: Ensemble,
}

impl RmaSystem {
    pub fn new(graph: TlGraph, ensemble: Ensemble) -> Result<Self> {
        let ensemble = Ensemble::new(
            &graph,
            ensemble.iter().map(|(e, l)| (*e, l.clone())).collect(),
        )?;
        Ok(Self { graph, ensemble })
    }

    pub fn graph(&self) -> &TlGraph {
        &self.graph
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    fn check_edges(&self, config: &Configuration) -> Result<()> {
        for &(i, j) in self.graph.edges() {
            if config.distance(i, j) == 0.0 {
                return Err(Error::EdgeCollision { i, j });
            }
        }
        Ok(())
    }

    /// Total potential: sum of pairwise potentials over the edges.
    pub fn potential(&self, config: &Configuration) -> Result<f64> {
        self.check_edges(config)?;
        let mut acc = 0.0;
        for (&(i, j), law) in self.ensemble.iter() {
            acc += law.pair_potential(config.distance(i, j))?;
        }
        Ok(acc)
    }

    /// Right-hand side of the dynamics in `(a.., b..)` ordering; equals the
    /// negative gradient of [`Self::potential`].
    pub fn vector_field(&self, config: &Configuration) -> Result<Vec<f64>> {
        self.check_edges(config)?;
        let n = config.n();
        let mut field = vec![0.0; 2 * n];
        for (&(i, j), law) in self.ensemble.iter() {
            let d = config.distance(i, j);
            let f = law.eval(d)?.f;
            let (ai, bi) = config.point(i);
            let (aj, bj) = config.point(j);
            let (fx, fy) = (f * (aj - ai), f * (bj - bi));
            field[i - 1] += fx;
            field[n + i - 1] += fy;
            field[j - 1] -= fx;
            field[n + j - 1] -= fy;
        }
        Ok(field)
    }

    /// Max-norm of the vector field.
    pub fn residual(&self, config: &Configuration) -> Result<f64> {
        Ok(inf_norm(&self.vector_field(config)?))
    }

    pub fn is_equilibrium(&self, config: &Configuration, tol: f64) -> Result<bool> {
        Ok(self.residual(config)? <= tol)
    }

    /// Smallest inter-agent distance over the edges.
    pub fn min_edge_distance(&self, config: &Configuration) -> f64 {
        self.graph
            .edges()
            .iter()
            .map(|&(i, j)| config.distance(i, j))
            .fold(f64::INFINITY, f64::min)
    }

    /// Linearization of the dynamics (see [`Hessian`]). For an edge at
    /// distance `d` with unit vector `u`, the cross block is
    /// `f (I - u u^T) + f_tilde' u u^T`; diagonal blocks make row sums zero.
    pub fn hessian(&self, config: &Configuration) -> Result<Hessian> {
        self.check_edges(config)?;
        let n = config.n();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for (&(i, j), law) in self.ensemble.iter() {
            let (ai, bi) = config.point(i);
            let (aj, bj) = config.point(j);
            let (dx, dy) = (aj - ai, bj - bi);
            let d = config.distance(i, j);
            // axis-aligned edges get exact unit vectors so the on-axis
            // block structure holds bit-for-bit
            let (ua, ub) = if dy == 0.0 {
                (dx.signum(), 0.0)
            } else if dx == 0.0 {
                (0.0, dy.signum())
            } else {
                (dx / d, dy / d)
            };
            let e = law.eval(d)?;
            let cross = ua * ub;
            let baa = e.f * (1.0 - ua * ua) + e.f_tilde_prime * (ua * ua);
            let bab = e.f * (-cross) + e.f_tilde_prime * cross;
            let bbb = e.f * (1.0 - ub * ub) + e.f_tilde_prime * (ub * ub);
            let (ia, ja) = (i - 1, j - 1);
            let (ib, jb) = (n + i - 1, n + j - 1);
            for (r, c, v) in [(ia, ja, baa), (ia, jb, bab), (ib, ja, bab), (ib, jb, bbb)] {
                h[(r, c)] += v;
                h[(c, r)] += v;
            }
            h[(ia, ia)] -= baa;
            h[(ja, ja)] -= baa;
            h[(ib, ib)] -= bbb;
            h[(jb, jb)] -= bbb;
            h[(ia, ib)] -= bab;
            h[(ib, ia)] -= bab;
            h[(ja, jb)] -= bab;
            h[(jb, ja)] -= bab;
        }
        Ok(Hessian { matrix: h })
    }

    /// Integrate the gradient flow with an adaptive Dormand-Prince 4(5)
    /// scheme and PI step control until the residual drops below
    /// `opts.residual_tol` or `opts.t_max` is reached.
    pub fn flow(
        &self,
        start: &Configuration,
        opts: &FlowOptions,
    ) -> Result<(Configuration, FlowSummary)> {
        flow_impl(self, start, opts)
    }

    /// Gauge-fixed Newton refinement of an approximate equilibrium: the
    /// input is brought to canonical form (pinning `a1 = b1 = b2 = 0`) and
    /// the remaining `2N - 3` coordinates are solved by least-squares Newton
    /// on the full vector field. Falls over to the flow once if Newton
    /// diverges. An input already at residual <= 1e-13 is returned as is.
    pub fn newton_refine(&self, approx: &Configuration) -> Result<Configuration> {
        const TARGET: f64 = 1e-13;
        if self.residual(approx)? <= TARGET {
            return Ok(approx.clone());
        }
        match self.newton_iterations(approx, TARGET) {
            Ok(p) => Ok(p),
            Err(Error::SingularGaugeJacobian) => Err(Error::SingularGaugeJacobian),
            Err(_) => {
                let opts = FlowOptions {
                    residual_tol: 1e-9,
                    t_max: 1e4,
                    ..FlowOptions::default()
                };
                let (flowed, _) = self.flow(approx, &opts)?;
                self.newton_iterations(&flowed, TARGET)
            }
        }
    }

    fn newton_iterations(&self, approx: &Configuration, target: f64) -> Result<Configuration> {
        let n = self.n();
        let mut p = approx.canonical_form()?;
        // unknown columns: a2..aN and b3..bN
        let cols: Vec<usize> = (1..n).chain(n + 2..2 * n).collect();
        let mut best = f64::INFINITY;
        for _ in 0..60 {
            let field = self.vector_field(&p)?;
            let res = inf_norm(&field);
            if res <= target {
                return Ok(p);
            }
            if !res.is_finite() || res > 1e3 * best.max(1.0) {
                return Err(Error::NewtonDiverged(res));
            }
            best = best.min(res);
            let h = self.hessian(&p)?.into_matrix();
            let a = h.select_columns(cols.iter());
            let rhs = -DVector::from_column_slice(&field);
            let svd = a.svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if smax.is_nan() || smax <= 0.0 || smin <= 1e-12 * smax {
                return Err(Error::SingularGaugeJacobian);
            }
            let delta = svd
                .solve(&rhs, 1e-13 * smax)
                .map_err(|_| Error::SingularGaugeJacobian)?;
            let mut coords = p.coords().to_vec();
            for (k, &col) in cols.iter().enumerate() {
                coords[col] += delta[k];
            }
            p = Configuration::from_coords(coords);
        }
        let res = self.residual(&p)?;
        if res <= 1e-12 {
            Ok(p)
        } else {
            Err(Error::NewtonDiverged(res))
        }
    }
}

/// Tunables for [`RmaSystem::flow`].
#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Stop once the vector field max-norm is at most this.
    pub residual_tol: f64,
    /// Hard time horizon; hitting it raises [`Error::Stalled`].
    pub t_max: f64,
    pub atol: f64,
    pub rtol: f64,
    /// Edge-distance floor guarding against collision approach.
    pub collision_floor: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            t_max: 1e4,
            atol: 1e-10,
            rtol: 1e-8,
            collision_floor: COLLISION_FLOOR,
            max_steps: 5_000_000,
        }
    }
}

/// What happened along one flow run.
#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub final_time: f64,
    pub final_residual: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub min_edge_distance: f64,
    /// Largest increase of the potential across an accepted step, when the
    /// ensemble admits closed-form potentials (`None` otherwise).
    pub max_potential_increase: Option<f64>,
}

// Dormand-Prince 4(5) tableau (autonomous field, no time column needed).
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn flow_impl(
    system: &RmaSystem,
    start: &Configuration,
    opts: &FlowOptions,
) -> Result<(Configuration, FlowSummary)> {
    let dim = 2 * start.n();
    let track_potential = system
        .ensemble
        .iter()
        .all(|(_, l)| l.has_closed_potential());

    let mut y = start.coords().to_vec();
    let mut t = 0.0;
    let mut summary = FlowSummary {
        final_time: 0.0,
        final_residual: f64::INFINITY,
        steps_accepted: 0,
        steps_rejected: 0,
        min_edge_distance: system.min_edge_distance(start),
        max_potential_increase: if track_potential { Some(0.0) } else { None },
    };
    check_collision(system, start, opts.collision_floor)?;

    let config_of = |y: &[f64]| Configuration::from_coords(y.to_vec());
    let mut k1 = system.vector_field(&config_of(&y))?;
    let mut residual = inf_norm(&k1);
    if residual <= opts.residual_tol {
        summary.final_residual = residual;
        return Ok((config_of(&y), summary));
    }
    let mut phi = if track_potential {
        system.potential(&config_of(&y))?
    } else {
        0.0
    };

    let mut h = initial_step(&y, &k1);
    let mut err_prev: f64 = 1.0;
    let mut k = vec![vec![0.0; dim]; 7];

    while summary.steps_accepted + summary.steps_rejected < opts.max_steps {
        if t + h > opts.t_max {
            h = opts.t_max - t;
        }
        if h <= f64::EPSILON * t.max(1.0) {
            return Err(Error::Stalled {
                t,
                residual,
                tol: opts.residual_tol,
            });
        }
        // tighten error control as the field shrinks, otherwise the local
        // error floor keeps the residual hovering near atol/rtol scale
        let cap = (0.01 * residual).max(0.01 * opts.residual_tol);
        let atol = opts.atol.min(cap);
        let rtol = opts.rtol.min(cap);

        k[0].copy_from_slice(&k1);
        let mut stage_fail = false;
        for s in 0..6 {
            let mut ys = y.clone();
            for (w, ks) in DP_A[s].iter().zip(&k) {
                for i in 0..dim {
                    ys[i] += h * w * ks[i];
                }
            }
            match system.vector_field(&config_of(&ys)) {
                Ok(f) => k[s + 1] = f,
                Err(_) => {
                    stage_fail = true;
                    break;
                }
            }
        }
        if stage_fail {
            // stepped into a collision; retry smaller
            h *= 0.25;
            summary.steps_rejected += 1;
            continue;
        }

        // the 5th-order solution is the last stage's argument (FSAL)
        let mut y_new = y.clone();
        for (w, ks) in DP_A[5].iter().zip(&k) {
            for i in 0..dim {
                y_new[i] += h * w * ks[i];
            }
        }
        let mut err_acc = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (we, ks) in DP_ERR.iter().zip(&k) {
                e += we * ks[i];
            }
            e *= h;
            let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
            err_acc += (e / scale) * (e / scale);
        }
        let err = (err_acc / dim as f64).sqrt().max(1e-300);

        if err <= 1.0 {
            let new_config = config_of(&y_new);
            check_collision(system, &new_config, opts.collision_floor)?;
            summary.min_edge_distance = summary
                .min_edge_distance
                .min(system.min_edge_distance(&new_config));
            if track_potential {
                let phi_new = system.potential(&new_config)?;
                let inc = phi_new - phi;
                if inc > summary.max_potential_increase.unwrap_or(0.0) {
                    summary.max_potential_increase = Some(inc);
                }
                phi = phi_new;
            }
            t += h;
            y = y_new;
            k1 = k[6].clone();
            residual = inf_norm(&k1);
            summary.steps_accepted += 1;
            if residual <= opts.residual_tol {
                summary.final_time = t;
                summary.final_residual = residual;
                return Ok((config_of(&y), summary));
            }
            if t >= opts.t_max {
                return Err(Error::Stalled {
                    t,
                    residual,
                    tol: opts.residual_tol,
                });
            }
            let fac = 0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h *= fac.clamp(0.2, 5.0);
            err_prev = err;
        } else {
            summary.steps_rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Err(Error::Stalled {
        t,
        residual,
        tol: opts.residual_tol,
    })
}

fn check_collision(system: &RmaSystem, config: &Configuration, floor: f64) -> Result<()> {
    for &(i, j) in system.graph.edges() {
        let d = config.distance(i, j);
        if d < floor {
            return Err(Error::CollisionApproach { i, j, dist: d });
        }
    }
    Ok(())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn initial_step(y: &[f64], field: &[f64]) -> f64 {
    let ny = inf_norm(y).max(1.0);
    let nf = inf_norm(field);
    if nf <= 0.0 {
        return 1e-3;
    }
    (0.01 * ny / nf).clamp(1e-8, 1e-2)
}

/// Basis of the orbit tangent directions at `config`: translations along
/// both axes and the rotation generator `(-b.., a..)`, which reduces to
/// `(0, a..)` for configurations on the a-axis.
pub fn null_vectors(config: &Configuration) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let n = config.n();
    let mut t_a = DVector::zeros(2 * n);
    let mut t_b = DVector::zeros(2 * n);
    let mut r_p = DVector::zeros(2 * n);
    for i in 0..n {
        t_a[i] = 1.0;
        t_b[n + i] = 1.0;
        let (a, b) = config.point(i + 1);
        r_p[i] = -b;
        r_p[n + i] = a;
    }
    (t_a, t_b, r_p)
}
