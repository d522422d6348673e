//! Machine verification of the Morse-Bott index formula and of the
//! one-step reduction inertia formula.
//!
//! The index formula says the index and co-index of a critical orbit are
//! the sums of the part indices over the canonical partition. The inertia
//! formula relates the inertia of the linearization before and after one
//! reduction step:
//!
//! ```text
//! n(H_p) - n(H_p*) = sgn(-f_vi(d_vi) - f_vj(d_vj))
//!                  + sgn(-ft'_vi(d_vi) - ft'_vj(d_vj))
//! ```
//!
//! Both checks run on integer inertia triples, so agreement is exact. As a
//! second, independent route, the congruence construction diagonalizes the
//! full force and stiffness matrices through eigenvectors of the reduced
//! ones lifted by one balance coordinate.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::analysis::{
    canonical_partition, inertia, sgn, subconfiguration, subsystem, InertiaTriple,
};
use crate::dynamics::{Configuration, RmaSystem};
use crate::graph::VertexId;
use crate::laws::{InteractionLaw, ReductionCase};
use crate::{Error, Result};

/// Tolerances for the two formula checkers.
#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub residual_tol: f64,
    pub collinear_tol: f64,
    pub zero_eig_tol: f64,
    /// Zero band for the scalar sign tests of the inertia formula.
    pub sign_zero_tol: f64,
    /// Also run the congruence (diagonalization) oracle.
    pub congruence: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            residual_tol: crate::dynamics::EQUILIBRIUM_TOL,
            collinear_tol: crate::analysis::DEFAULT_COLLINEAR_TOL,
            zero_eig_tol: crate::analysis::DEFAULT_ZERO_EIG_TOL,
            sign_zero_tol: crate::analysis::SIGN_ZERO_TOL,
            congruence: true,
        }
    }
}

/// Outcome of the index-formula check at one equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct IndexFormulaReport {
    pub full: InertiaTriple,
    pub parts: Vec<InertiaTriple>,
    pub sum_plus: usize,
    pub sum_minus: usize,
    pub holds_plus: bool,
    pub holds_minus: bool,
    /// `2N - sum_plus - sum_minus`; equals `full.n_zero` iff both sums hold.
    pub implied_n_zero: i64,
    pub holds: bool,
}

/// Check the Morse-Bott index formula at an equilibrium: partition the edge
/// set, compute each part's inertia on its induced subsystem, and compare
/// the summed index/co-index with the full ones.
pub fn check_index_formula(
    system: &RmaSystem,
    config: &Configuration,
    opts: &CheckOptions,
) -> Result<IndexFormulaReport> {
    let residual = system.residual(config)?;
    if residual > opts.residual_tol {
        return Err(Error::NotEquilibrium {
            residual,
            tol: opts.residual_tol,
        });
    }

    let full = inertia(system.hessian(config)?.matrix(), opts.zero_eig_tol)?;
    let partition = canonical_partition(system.graph(), config, opts.collinear_tol)?;
    let mut parts = Vec::new();
    for part in &partition.parts {
        let sub_sys = subsystem(system, &part.subgraph)?;
        let sub_cfg = subconfiguration(config, &part.subgraph);
        parts.push(inertia(
            sub_sys.hessian(&sub_cfg)?.matrix(),
            opts.zero_eig_tol,
        )?);
    }

    let sum_plus: usize = parts.iter().map(|t| t.n_plus).sum();
    let sum_minus: usize = parts.iter().map(|t| t.n_minus).sum();
    let holds_plus = sum_plus == full.n_plus;
    let holds_minus = sum_minus == full.n_minus;
    Ok(IndexFormulaReport {
        implied_n_zero: 2 * system.n() as i64 - sum_plus as i64 - sum_minus as i64,
        holds: holds_plus && holds_minus,
        full,
        parts,
        sum_plus,
        sum_minus,
        holds_plus,
        holds_minus,
    })
}

/// Outcome of the congruence oracle: how diagonal `Q^T M Q` came out and
/// how well its first diagonal entry matches the predicted scalar.
#[derive(Debug, Clone, Serialize)]
pub struct CongruenceReport {
    pub force_offdiag: f64,
    pub force_diag_err: f64,
    pub stiffness_offdiag: f64,
    pub stiffness_diag_err: f64,
    pub pass: bool,
}

/// Outcome of the one-step inertia-formula check at a critical line orbit.
#[derive(Debug, Clone, Serialize)]
pub struct InertiaFormulaReport {
    pub case: ReductionCase,
    pub removed: VertexId,
    pub parents: (VertexId, VertexId),
    pub d_vi: f64,
    pub d_vj: f64,
    pub f_sum: f64,
    pub ft_prime_sum: f64,
    pub full: InertiaTriple,
    pub reduced: InertiaTriple,
    pub diff: [i64; 3],
    pub force_term: [i64; 3],
    pub stiffness_term: [i64; 3],
    pub predicted: [i64; 3],
    pub holds: bool,
    pub congruence: Option<CongruenceReport>,
}

/// Check the inertia formula by actually building the reduced system for
/// the realized case and eigensolving both linearizations.
pub fn check_inertia_formula(
    system: &RmaSystem,
    config: &Configuration,
    opts: &CheckOptions,
) -> Result<InertiaFormulaReport> {
    let residual = system.residual(config)?;
    if residual > opts.residual_tol {
        return Err(Error::NotEquilibrium {
            residual,
            tol: opts.residual_tol,
        });
    }
    let line = line_coordinates(config, opts.collinear_tol)?;

    let graph = system.graph();
    let (sub, last) = graph
        .drop_last_step()
        .ok_or_else(|| Error::Spec("inertia formula needs at least three agents".into()))?;
    let v = last.vertex;
    let (i, j) = last.parents;

    let (t_v, t_i, t_j) = (line[v - 1], line[i - 1], line[j - 1]);
    let case = realized_case(t_v, t_i, t_j);

    let d_vi = config.distance(v, i);
    let d_vj = config.distance(v, j);
    let law_vi = system.ensemble().law(v, i).clone();
    let law_vj = system.ensemble().law(v, j).clone();
    let e_vi = law_vi.eval(d_vi)?;
    let e_vj = law_vj.eval(d_vj)?;
    let f_sum = e_vi.f + e_vj.f;
    let ft_prime_sum = e_vi.f_tilde_prime + e_vj.f_tilde_prime;

    // reduced system: drop the removed vertex, splice f* into the parent edge
    let mut reduced_sys = subsystem(system, &sub)?;
    let star = InteractionLaw::reduced(system.ensemble().law(i, j), &law_vi, &law_vj, case)?;
    let (ri, rj) = (sub.to_new(i).unwrap(), sub.to_new(j).unwrap());
    let mut ensemble = reduced_sys.ensemble().clone();
    ensemble.replace(crate::graph::edge(ri, rj), star);
    reduced_sys = RmaSystem::new(reduced_sys.graph().clone(), ensemble)?;
    let reduced_cfg = subconfiguration(config, &sub);

    let full = inertia(system.hessian(config)?.matrix(), opts.zero_eig_tol)?;
    let reduced = inertia(
        reduced_sys.hessian(&reduced_cfg)?.matrix(),
        opts.zero_eig_tol,
    )?;
    let diff = full.diff(&reduced);

    let scale = opts.sign_zero_tol * e_vi.f.abs().max(e_vj.f.abs()).max(1.0);
    let force_term = sgn(-f_sum, scale);
    let stiffness_term = sgn(-ft_prime_sum, opts.sign_zero_tol);
    let predicted = [
        force_term[0] + stiffness_term[0],
        force_term[1] + stiffness_term[1],
        force_term[2] + stiffness_term[2],
    ];
    let holds = diff == predicted;

    let congruence = if opts.congruence {
        Some(congruence_oracle(
            system,
            &reduced_sys,
            &sub,
            config,
            &line,
            (v, i, j),
            (e_vi.f, e_vj.f),
            (e_vi.f_tilde_prime, e_vj.f_tilde_prime),
        )?)
    } else {
        None
    };

    Ok(InertiaFormulaReport {
        case,
        removed: v,
        parents: (i, j),
        d_vi,
        d_vj,
        f_sum,
        ft_prime_sum,
        full,
        reduced,
        diff,
        force_term,
        stiffness_term,
        predicted,
        holds,
        congruence,
    })
}

/// Project all agents onto the best line; error if not collinear.
fn line_coordinates(config: &Configuration, collinear_tol: f64) -> Result<Vec<f64>> {
    let n = config.n();
    // reference: the farthest-apart pair
    let (mut a, mut b, mut best) = (1, 2, 0.0);
    for p in 1..=n {
        for q in p + 1..=n {
            let d = config.distance(p, q);
            if d > best {
                best = d;
                a = p;
                b = q;
            }
        }
    }
    if best == 0.0 {
        return Err(Error::NotCollinear(f64::INFINITY));
    }
    let (xa, ya) = config.point(a);
    let (xb, yb) = config.point(b);
    let dir = ((xb - xa) / best, (yb - ya) / best);
    let mut worst = 0.0f64;
    let mut coords = Vec::with_capacity(n);
    for p in 1..=n {
        let (x, y) = config.point(p);
        let (wx, wy) = (x - xa, y - ya);
        let t = wx * dir.0 + wy * dir.1;
        let off = (wx * dir.1 - wy * dir.0).abs();
        worst = worst.max(off / best);
        coords.push(t);
    }
    if worst > collinear_tol {
        return Err(Error::NotCollinear(worst));
    }
    Ok(coords)
}

fn realized_case(t_v: f64, t_i: f64, t_j: f64) -> ReductionCase {
    let (lo, hi) = (t_i.min(t_j), t_i.max(t_j));
    if t_v > lo && t_v < hi {
        ReductionCase::Between
    } else if (t_v - t_i).abs() < (t_v - t_j).abs() {
        // the first parent separates the removed agent from the second
        ReductionCase::LeftOutside
    } else {
        ReductionCase::RightOutside
    }
}

/// Lemma-style congruence: lift the reduced eigenvectors by one balance
/// scalar and verify that they diagonalize the full matrices, with the
/// predicted scalar in the leading entry.
#[allow(clippy::too_many_arguments)]
fn congruence_oracle(
    system: &RmaSystem,
    reduced_sys: &RmaSystem,
    sub: &crate::graph::InducedSubgraph,
    config: &Configuration,
    line: &[f64],
    (v, i, j): (VertexId, VertexId, VertexId),
    (f_vi, f_vj): (f64, f64),
    (ftp_vi, ftp_vj): (f64, f64),
) -> Result<CongruenceReport> {
    let n = system.n();
    // vertex orders: full [v, i, j, rest..], reduced [i, j, rest..]
    let mut full_order = vec![v, i, j];
    full_order.extend((1..=n).filter(|&w| w != v && w != i && w != j));
    let red_order: Vec<VertexId> = full_order[1..].to_vec();

    let (f_full, dft_full) = force_matrices(system, config, &full_order)?;
    let red_cfg = subconfiguration(config, sub);
    let red_order_new: Vec<VertexId> = red_order.iter().map(|&w| sub.to_new(w).unwrap()).collect();
    let (f_red, dft_red) = force_matrices(reduced_sys, &red_cfg, &red_order_new)?;

    let (a1, a2, a3) = (line[v - 1], line[i - 1], line[j - 1]);
    let alpha = |w: &[f64]| ((a3 - a1) * w[0] + (a1 - a2) * w[1]) / (a3 - a2);
    let beta = |w: &[f64]| (ftp_vi * w[0] + ftp_vj * w[1]) / (ftp_vi + ftp_vj);

    let (f_offdiag, f_diag_err) = congruence_errors(&f_full, &f_red, -f_vi - f_vj, alpha);
    let (s_offdiag, s_diag_err) = congruence_errors(&dft_full, &dft_red, -ftp_vi - ftp_vj, beta);

    let scale = f_full.amax().max(dft_full.amax()).max(1.0);
    let tol = 1e-8 * scale;
    Ok(CongruenceReport {
        force_offdiag: f_offdiag,
        force_diag_err: f_diag_err,
        stiffness_offdiag: s_offdiag,
        stiffness_diag_err: s_diag_err,
        pass: f_offdiag <= tol && f_diag_err <= tol && s_offdiag <= tol && s_diag_err <= tol,
    })
}

/// The `F` (gains) and `dFt` (stiffness) matrices of a system at a line
/// configuration, rows/columns in the given vertex order.
fn force_matrices(
    system: &RmaSystem,
    config: &Configuration,
    order: &[VertexId],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = order.len();
    let mut f = DMatrix::zeros(m, m);
    let mut dft = DMatrix::zeros(m, m);
    for r in 0..m {
        for c in r + 1..m {
            let (p, q) = (order[r], order[c]);
            if let Some(law) = system.ensemble().get(crate::graph::edge(p, q)) {
                let e = law.eval(config.distance(p, q))?;
                f[(r, c)] = e.f;
                f[(c, r)] = e.f;
                dft[(r, c)] = e.f_tilde_prime;
                dft[(c, r)] = e.f_tilde_prime;
            }
        }
    }
    for r in 0..m {
        f[(r, r)] = -f.row(r).sum();
        dft[(r, r)] = -dft.row(r).sum();
    }
    Ok((f, dft))
}

/// Build `Q = [e1, lifted eigenvectors..]`, congruate, and measure how far
/// `Q^T M Q` is from `diag(lead, eigenvalues..)`.
fn congruence_errors(
    full: &DMatrix<f64>,
    reduced: &DMatrix<f64>,
    lead: f64,
    lift: impl Fn(&[f64]) -> f64,
) -> (f64, f64) {
    let m = full.nrows();
    let eig = nalgebra::SymmetricEigen::new(reduced.clone());
    let mut q = DMatrix::zeros(m, m);
    q[(0, 0)] = 1.0;
    for k in 0..m - 1 {
        let col: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        q[(0, k + 1)] = lift(&col);
        for r in 0..m - 1 {
            q[(r + 1, k + 1)] = col[r];
        }
    }
    let lambda = q.transpose() * full * &q;
    let mut offdiag = 0.0f64;
    let mut diag_err = (lambda[(0, 0)] - lead).abs();
    for r in 0..m {
        for c in 0..m {
            if r != c {
                offdiag = offdiag.max(lambda[(r, c)].abs());
            }
        }
    }
    for k in 0..m - 1 {
        diag_err = diag_err.max((lambda[(k + 1, k + 1)] - eig.eigenvalues[k]).abs());
    }
    (offdiag, diag_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{HennebergStep, TlGraph};
    use crate::laws::Ensemble;

    fn step(vertex: usize, a: usize, b: usize) -> HennebergStep {
        HennebergStep {
            vertex,
            parents: (a, b),
        }
    }

    fn triangle() -> TlGraph {
        TlGraph::build((1, 2), vec![step(3, 1, 2)]).unwrap()
    }

    fn uniform(graph: &TlGraph, k: f64, c: f64) -> RmaSystem {
        let e = Ensemble::uniform(graph, &InteractionLaw::spring(k, c));
        RmaSystem::new(graph.clone(), e).unwrap()
    }

    #[test]
    fn index_formula_on_equilateral_triangle() {
        let sys = uniform(&triangle(), 1.0, 1.0);
        let p = Configuration::from_points(&[(0.0, 0.0), (1.0, 0.0), (0.5, 0.75f64.sqrt())]);
        let r = check_index_formula(&sys, &p, &CheckOptions::default()).unwrap();
        assert!(r.holds);
        assert!(r.full.matches(0, 3, 3), "full {}", r.full);
        assert_eq!(r.parts.len(), 3);
        for part in &r.parts {
            assert!(part.matches(0, 3, 1), "part {part}");
        }
        assert_eq!(r.implied_n_zero, 3);
    }

    #[test]
    fn index_formula_trivial_on_line_orbit() {
        let sys = uniform(&triangle(), 1.0, 1.0);
        let s = 0.5f64.sqrt();
        let p = Configuration::from_points(&[(0.0, 0.0), (-s, 0.0), (s, 0.0)]);
        let r = check_index_formula(&sys, &p, &CheckOptions::default()).unwrap();
        assert!(r.holds);
        assert_eq!(r.parts.len(), 1);
        assert_eq!(r.parts[0].as_array(), r.full.as_array());
    }

    #[test]
    fn index_formula_rejects_non_equilibrium() {
        let sys = uniform(&triangle(), 1.0, 1.0);
        let p = Configuration::from_points(&[(0.0, 0.0), (1.7, 0.0), (0.5, 1.5)]);
        assert!(matches!(
            check_index_formula(&sys, &p, &CheckOptions::default()),
            Err(Error::NotEquilibrium { .. })
        ));
    }

    /// All quantities have closed forms here: the middle agent's edges carry
    /// f = -1 each, stiffness 3 each, so the formula reads
    /// (1,3,2) - (0,3,1) = sgn(2) + sgn(-6).
    #[test]
    fn inertia_formula_collinear_triangle() {
        let sys = uniform(&triangle(), 1.0, 1.0);
        let s = 0.5f64.sqrt();
        // vertex 3 (the removed one) in the middle
        let p = Configuration::from_points(&[(-s, 0.0), (s, 0.0), (0.0, 0.0)]);
        let r = check_inertia_formula(&sys, &p, &CheckOptions::default()).unwrap();
        assert_eq!(r.case, ReductionCase::Between);
        assert!(r.full.matches(1, 3, 2), "full {}", r.full);
        assert!(r.reduced.matches(0, 3, 1), "reduced {}", r.reduced);
        assert_eq!(r.diff, [1, 0, 1]);
        assert_eq!(r.force_term, [1, 0, 0]);
        assert_eq!(r.stiffness_term, [0, 0, 1]);
        assert!(r.holds);
        assert!((r.f_sum + 2.0).abs() <= 1e-9);
        assert!((r.ft_prime_sum - 6.0).abs() <= 1e-9);
        let c = r.congruence.unwrap();
        assert!(c.pass, "congruence {c:?}");
    }

    #[test]
    fn inertia_formula_outside_cases() {
        let sys = uniform(&triangle(), 1.0, 1.0);
        let records =
            crate::analysis::enumerate_line_equilibria(&sys, &Default::default()).unwrap();
        for r in &records {
            let rep = check_inertia_formula(&sys, &r.config, &CheckOptions::default()).unwrap();
            assert!(rep.holds, "case {:?}", rep.case);
            assert_eq!(rep.stiffness_term, [0, 0, 1], "class F forces this sign");
            assert!(rep.congruence.unwrap().pass);
        }
    }

    /// Both of the removed agent's edges sit exactly at their rest lengths
    /// (1 + 1 = rest of the base law), so the force sign test is zero and
    /// the orbit is degenerate with one extra zero mode.
    #[test]
    fn inertia_formula_degenerate_middle_term() {
        let g = triangle();
        let mut laws = std::collections::BTreeMap::new();
        laws.insert((1, 2), InteractionLaw::spring(1.0, 4.0));
        laws.insert((1, 3), InteractionLaw::spring(1.0, 1.0));
        laws.insert((2, 3), InteractionLaw::spring(1.0, 1.0));
        let sys = RmaSystem::new(g.clone(), Ensemble::new(&g, laws).unwrap()).unwrap();
        let p = Configuration::from_points(&[(0.0, 0.0), (2.0, 0.0), (1.0, 0.0)]);
        assert!(sys.residual(&p).unwrap() <= 1e-14);

        let r = check_inertia_formula(&sys, &p, &CheckOptions::default()).unwrap();
        assert_eq!(r.case, ReductionCase::Between);
        assert_eq!(r.force_term, [0, 1, 0]);
        assert_eq!(r.full.n_zero, 4, "full {}", r.full);
        assert!(r.holds);
    }

    #[test]
    fn inertia_formula_rejects_non_collinear() {
        let sys = uniform(&triangle(), 1.0, 1.0);
        let p = Configuration::from_points(&[(0.0, 0.0), (1.0, 0.0), (0.5, 0.75f64.sqrt())]);
        assert!(matches!(
            check_inertia_formula(&sys, &p, &CheckOptions::default()),
            Err(Error::NotCollinear(_))
        ));
    }
}
