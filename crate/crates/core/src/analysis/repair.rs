//! Repair of force-balance degeneracies by localized law perturbations.
//!
//! A critical line orbit picks up an extra zero mode exactly when the
//! removed agent's two edge gains cancel, `f_vi(d_vi) + f_vj(d_vj) = 0`
//! (within class F both edges then sit at their rest lengths). Adding three
//! small bumps to `f_vi`, `f_vj`, and the parent edge law, with signs chosen
//! per reduction case so every perturbed force change cancels agent by
//! agent, keeps the equilibrium configuration fixed while pushing the force
//! sum off zero, restoring `n_0 = 3`.

use crate::analysis::{
    enumerate_line_equilibria, CriticalOrbitRecord, EnumerateOptions, ReductionStep, SIGN_ZERO_TOL,
};
use crate::dynamics::RmaSystem;
use crate::graph::edge;
use crate::laws::{log_grid, make_bump, InteractionLaw, ReductionCase};
use crate::{Error, Result};

const POSITION_DRIFT_TOL: f64 = 1e-10;

/// Perturb the ensemble so the record's orbit becomes nondegenerate while
/// keeping its configuration fixed (drift at most 1e-10).
pub fn repair_degenerate(
    system: &RmaSystem,
    record: &CriticalOrbitRecord,
    opts: &EnumerateOptions,
) -> Result<RmaSystem> {
    if record.nondegenerate {
        return Err(Error::NotRepairable(
            "orbit is already nondegenerate".into(),
        ));
    }
    let degenerate: Vec<&ReductionStep> = record
        .steps
        .iter()
        .filter(|s| {
            (s.f_vi + s.f_vj).abs() <= SIGN_ZERO_TOL * s.f_vi.abs().max(s.f_vj.abs()).max(1.0)
        })
        .collect();
    if degenerate.is_empty() {
        return Err(Error::NotRepairable(
            "no reduction step has a vanishing force sum".into(),
        ));
    }

    let mut ensemble = system.ensemble().clone();
    for step in degenerate {
        let (v, (i, j)) = (step.removed, step.parents);
        // sign pattern per case keeps all three agents balanced:
        //   Between:       (+, +, -) on (vi, vj, ij)
        //   LeftOutside:   (+, -, +)
        //   RightOutside:  (-, +, +)
        let (s_vi, s_vj, s_ij) = match step.case {
            ReductionCase::Between => (1.0, 1.0, -1.0),
            ReductionCase::LeftOutside => (1.0, -1.0, 1.0),
            ReductionCase::RightOutside => (-1.0, 1.0, 1.0),
        };
        let centers = [
            (edge(v, i), step.d_vi, s_vi),
            (edge(v, j), step.d_vj, s_vj),
            (edge(i, j), step.d_parents, s_ij),
        ];
        let width = 0.05 * step.d_vi.min(step.d_vj).min(step.d_parents);
        let delta = bump_amplitude(&ensemble, &centers, width);
        for (e, d0, sign) in centers {
            let base = ensemble.get(e).expect("edge has a law").clone();
            let bump = InteractionLaw::from_bump(make_bump(d0, sign * delta, 0.0, width)?);
            ensemble.replace(e, InteractionLaw::sum(&base, &bump));
        }
    }

    let repaired = RmaSystem::new(system.graph().clone(), ensemble)?;

    // verify: same branch, same positions, three zero modes
    let records = enumerate_line_equilibria(&repaired, opts)?;
    let target = records
        .iter()
        .find(|r| r.case_vector == record.case_vector)
        .ok_or_else(|| Error::NotRepairable("perturbed branch lost its orbit".into()))?;
    let drift = record
        .config
        .coords()
        .iter()
        .zip(target.config.coords())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if drift > POSITION_DRIFT_TOL {
        return Err(Error::NotRepairable(format!(
            "equilibrium drifted by {drift}"
        )));
    }
    if target.inertia.n_zero != 3 {
        return Err(Error::NotRepairable(format!(
            "still degenerate after perturbation: n_zero = {}",
            target.inertia.n_zero
        )));
    }
    Ok(repaired)
}

/// Amplitude small enough that every perturbed law stays strictly
/// increasing on the bump support: a Hermite bump of height `delta` and
/// half-width `w` has slope at most `1.5 delta / w`.
fn bump_amplitude(
    ensemble: &crate::laws::Ensemble,
    centers: &[(crate::graph::Edge, f64, f64); 3],
    width: f64,
) -> f64 {
    let mut min_slope = f64::INFINITY;
    for (e, d0, _) in centers {
        let law = ensemble.get(*e).expect("edge has a law");
        for d in log_grid((d0 - width).max(1e-9), d0 + width, 40) {
            if let Ok(ev) = law.eval(d) {
                min_slope = min_slope.min(ev.f_tilde_prime);
            }
        }
    }
    (1e-4f64).min(0.3 * width * min_slope / 1.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Configuration;
    use crate::graph::{HennebergStep, TlGraph};
    use crate::laws::Ensemble;
    use std::collections::BTreeMap;

    /// Base edge at rest 2, both step edges at rest 1: the Between branch
    /// lands with every edge at rest length, which is the degenerate case.
    fn degenerate_system() -> RmaSystem {
        let g = TlGraph::build(
            (1, 2),
            vec![HennebergStep {
                vertex: 3,
                parents: (1, 2),
            }],
        )
        .unwrap();
        let mut laws = BTreeMap::new();
        laws.insert((1, 2), InteractionLaw::spring(1.0, 4.0));
        laws.insert((1, 3), InteractionLaw::spring(1.0, 1.0));
        laws.insert((2, 3), InteractionLaw::spring(1.0, 1.0));
        let e = Ensemble::new(&g, laws).unwrap();
        RmaSystem::new(g, e).unwrap()
    }

    #[test]
    fn repairs_the_degenerate_between_branch() {
        let sys = degenerate_system();
        let opts = EnumerateOptions::default();
        let records = enumerate_line_equilibria(&sys, &opts).unwrap();
        let degenerate: Vec<_> = records.iter().filter(|r| !r.nondegenerate).collect();
        assert_eq!(degenerate.len(), 1);
        let record = degenerate[0];
        assert_eq!(record.inertia.n_zero, 4);
        assert_eq!(record.case_vector, vec![ReductionCase::Between]);

        let repaired = repair_degenerate(&sys, record, &opts).unwrap();
        assert!(
            repaired.ensemble().is_admissible(),
            "repair must stay class F"
        );

        let new_records = enumerate_line_equilibria(&repaired, &opts).unwrap();
        let fixed = new_records
            .iter()
            .find(|r| r.case_vector == record.case_vector)
            .unwrap();
        assert_eq!(fixed.inertia.n_zero, 3);
        let drift: f64 = record
            .config
            .coords()
            .iter()
            .zip(fixed.config.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-10, "drift {drift}");
        // the original positions stay an exact equilibrium of the repaired system
        let p = Configuration::from_points(&[(0.0, 0.0), (2.0, 0.0), (1.0, 0.0)]);
        assert!(repaired.residual(&p).unwrap() <= 1e-12);
    }

    #[test]
    fn nondegenerate_input_is_rejected() {
        let g = TlGraph::build(
            (1, 2),
            vec![HennebergStep {
                vertex: 3,
                parents: (1, 2),
            }],
        )
        .unwrap();
        let e = Ensemble::uniform(&g, &InteractionLaw::spring(1.0, 1.0));
        let sys = RmaSystem::new(g, e).unwrap();
        let opts = EnumerateOptions::default();
        let records = enumerate_line_equilibria(&sys, &opts).unwrap();
        assert!(records.iter().all(|r| r.nondegenerate));
        assert!(matches!(
            repair_degenerate(&sys, &records[0], &opts),
            Err(Error::NotRepairable(_))
        ));
    }
}
