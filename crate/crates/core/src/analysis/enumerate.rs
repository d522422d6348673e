//! Exhaustive enumeration of collinear critical orbits.
//!
//! Removing the last Henneberg vertex of a line system and replacing its
//! parents' law by `f* = f + g` (with `g` the virtual interaction of the
//! removed agent's edges) yields an `(N-1)`-agent line system whose critical
//! line configurations lift uniquely back. Branching over the three
//! placements of the removed agent and recursing down to the two-agent base
//! case (whose only orbit sits at the rest length) enumerates every critical
//! line orbit, at most `3^(N-2)` of them.

use std::collections::BTreeMap;

use serde_json::json;

use crate::analysis::{canonical_partition, inertia, subconfiguration, subsystem, InertiaTriple};
use crate::dynamics::{Configuration, RmaSystem};
use crate::graph::{edge, Edge, HennebergStep, VertexId};
use crate::laws::{virtual_interaction, InteractionLaw, ReductionCase};
use crate::Result;

/// Balance data of one reduction step, recorded for degeneracy attribution.
#[derive(Debug, Clone)]
pub struct ReductionStep {
    pub removed: VertexId,
    pub parents: (VertexId, VertexId),
    pub case: ReductionCase,
    /// Realized distances from the removed agent to its parents.
    pub d_vi: f64,
    pub d_vj: f64,
    /// Distance between the parents at this step.
    pub d_parents: f64,
    /// Edge-law gains `f` at the realized distances.
    pub f_vi: f64,
    pub f_vj: f64,
    /// `f_tilde'` at the realized distances.
    pub ft_prime_vi: f64,
    pub ft_prime_vj: f64,
}

/// A verified critical line orbit in canonical form.
#[derive(Debug, Clone)]
pub struct CriticalOrbitRecord {
    pub config: Configuration,
    pub residual: f64,
    pub inertia: InertiaTriple,
    /// Exactly three zero eigenvalues.
    pub nondegenerate: bool,
    pub partition: Vec<Vec<Edge>>,
    pub part_inertias: Vec<InertiaTriple>,
    /// Reduction case per removed vertex, outermost removal first.
    pub case_vector: Vec<ReductionCase>,
    pub steps: Vec<ReductionStep>,
    pub edge_distances: Vec<(Edge, f64)>,
}

impl CriticalOrbitRecord {
    /// Stable JSON form (one line per orbit in reports).
    pub fn to_json(&self) -> serde_json::Value {
        let positions: Vec<[f64; 2]> = (1..=self.config.n())
            .map(|i| {
                let (a, b) = self.config.point(i);
                [a, b]
            })
            .collect();
        json!({
            "positions": positions,
            "edge_distances": self
                .edge_distances
                .iter()
                .map(|((i, j), d)| json!([i, j, d]))
                .collect::<Vec<_>>(),
            "inertia": self.inertia,
            "nondegenerate": self.nondegenerate,
            "partition": self.partition,
            "case_vector": self.case_vector,
            "residual": self.residual,
        })
    }
}

/// Tolerances governing enumeration and record construction.
#[derive(Debug, Clone)]
pub struct EnumerateOptions {
    /// Candidates above this vector-field residual are discarded.
    pub residual_tol: f64,
    pub collinear_tol: f64,
    pub zero_eig_tol: f64,
    /// Position quantum for SE(2)-dedup of canonical forms.
    pub dedup_tol: f64,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        Self {
            residual_tol: crate::dynamics::EQUILIBRIUM_TOL,
            collinear_tol: crate::analysis::DEFAULT_COLLINEAR_TOL,
            zero_eig_tol: crate::analysis::DEFAULT_ZERO_EIG_TOL,
            dedup_tol: 1e-8,
        }
    }
}

struct LineSolution {
    positions: BTreeMap<VertexId, f64>,
    case_vector: Vec<ReductionCase>,
    steps: Vec<ReductionStep>,
}

/// Enumerate all critical line orbits of the system.
///
/// Every returned record is re-verified against the *full* vector field
/// (residual at most `opts.residual_tol`), deduplicated modulo SE(2), and
/// sorted by case vector.
pub fn enumerate_line_equilibria(
    system: &RmaSystem,
    opts: &EnumerateOptions,
) -> Result<Vec<CriticalOrbitRecord>> {
    let graph = system.graph();
    let laws: BTreeMap<Edge, InteractionLaw> = system
        .ensemble()
        .iter()
        .map(|(e, l)| (*e, l.clone()))
        .collect();
    let mut solutions = solve_line(graph.base_edge(), graph.steps(), &laws)?;
    solutions.sort_by(|a, b| a.case_vector.cmp(&b.case_vector));

    let mut seen: Vec<Vec<i64>> = Vec::new();
    let mut records = Vec::new();
    for sol in solutions {
        let points: Vec<(f64, f64)> = (1..=graph.n()).map(|v| (sol.positions[&v], 0.0)).collect();
        let config = Configuration::from_points(&points).canonical_form()?;

        let residual = system.residual(&config)?;
        if residual > opts.residual_tol {
            eprintln!(
                "warning: discarding candidate with residual {residual} (cases {:?})",
                sol.case_vector
            );
            continue;
        }

        let key: Vec<i64> = config
            .coords()
            .iter()
            .map(|&c| (c / opts.dedup_tol).round() as i64)
            .collect();
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);

        let full_inertia = inertia(system.hessian(&config)?.matrix(), opts.zero_eig_tol)?;
        let part_data = canonical_partition(graph, &config, opts.collinear_tol)?;
        let mut part_inertias = Vec::new();
        for part in &part_data.parts {
            let sub_sys = subsystem(system, &part.subgraph)?;
            let sub_cfg = subconfiguration(&config, &part.subgraph);
            part_inertias.push(inertia(
                sub_sys.hessian(&sub_cfg)?.matrix(),
                opts.zero_eig_tol,
            )?);
        }
        let edge_distances: Vec<(Edge, f64)> = graph
            .edges()
            .iter()
            .map(|&(i, j)| ((i, j), config.distance(i, j)))
            .collect();

        records.push(CriticalOrbitRecord {
            nondegenerate: full_inertia.n_zero == 3,
            inertia: full_inertia,
            partition: part_data.parts.iter().map(|p| p.edges.clone()).collect(),
            part_inertias,
            config,
            residual,
            case_vector: sol.case_vector,
            steps: sol.steps,
            edge_distances,
        });
    }

    debug_assert!(records.len() <= 3usize.pow(graph.n() as u32 - 2));
    Ok(records)
}

fn solve_line(
    base: Edge,
    steps: &[HennebergStep],
    laws: &BTreeMap<Edge, InteractionLaw>,
) -> Result<Vec<LineSolution>> {
    let Some((last, rest)) = steps.split_last() else {
        let d = laws[&base].rest_length()?;
        let positions = [(base.0, 0.0), (base.1, d)].into_iter().collect();
        return Ok(vec![LineSolution {
            positions,
            case_vector: vec![],
            steps: vec![],
        }]);
    };

    let v = last.vertex;
    let (i, j) = last.parents;
    let f_vi = &laws[&edge(v, i)];
    let f_vj = &laws[&edge(v, j)];
    let f_ij = &laws[&edge(i, j)];

    let mut out = Vec::new();
    for case in ReductionCase::ALL {
        let reduced = InteractionLaw::reduced(f_ij, f_vi, f_vj, case)?;
        let mut inner_laws = laws.clone();
        inner_laws.remove(&edge(v, i));
        inner_laws.remove(&edge(v, j));
        inner_laws.insert(edge(i, j), reduced);

        for sol in solve_line(base, rest, &inner_laws)? {
            let pi = sol.positions[&i];
            let pj = sol.positions[&j];
            let d_ij = (pj - pi).abs();
            let vi = virtual_interaction(f_vi, f_vj, case, d_ij)?;
            let sign = if pj >= pi { 1.0 } else { -1.0 };
            let pos_v = match case {
                ReductionCase::Between => pi + sign * vi.d_vi,
                ReductionCase::LeftOutside => pi - sign * vi.d_vi,
                ReductionCase::RightOutside => pj + sign * vi.d_vj,
            };
            if !case_is_realized(case, pos_v, pi, pj, &sol.positions) {
                continue;
            }

            let ei = f_vi.eval(vi.d_vi)?;
            let ej = f_vj.eval(vi.d_vj)?;
            let step = ReductionStep {
                removed: v,
                parents: (i, j),
                case,
                d_vi: vi.d_vi,
                d_vj: vi.d_vj,
                d_parents: d_ij,
                f_vi: ei.f,
                f_vj: ej.f,
                ft_prime_vi: ei.f_tilde_prime,
                ft_prime_vj: ej.f_tilde_prime,
            };

            let mut positions = sol.positions.clone();
            positions.insert(v, pos_v);
            let mut case_vector = vec![case];
            case_vector.extend(sol.case_vector.iter().copied());
            let mut steps_out = vec![step];
            steps_out.extend(sol.steps.iter().cloned());
            out.push(LineSolution {
                positions,
                case_vector,
                steps: steps_out,
            });
        }
    }
    Ok(out)
}

/// Strict ordering check of the back-substituted agent (discards branches
/// whose realized geometry contradicts the assumed case).
fn case_is_realized(
    case: ReductionCase,
    pos_v: f64,
    pi: f64,
    pj: f64,
    others: &BTreeMap<VertexId, f64>,
) -> bool {
    let span = others
        .values()
        .chain(std::iter::once(&pos_v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });
    let margin = 1e-12 * (span.1 - span.0).max(1.0);
    let (lo, hi) = (pi.min(pj), pi.max(pj));
    match case {
        ReductionCase::Between => pos_v > lo + margin && pos_v < hi - margin,
        ReductionCase::LeftOutside => {
            // first parent strictly separates the removed agent from the second
            (pos_v < pi - margin && pi < pj) || (pos_v > pi + margin && pi > pj)
        }
        ReductionCase::RightOutside => {
            (pos_v > pj + margin && pi < pj) || (pos_v < pj - margin && pi > pj)
        }
    }
}
