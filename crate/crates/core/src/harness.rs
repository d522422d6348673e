//! System definition files, genericity scans, and aggregate reports.
//!
//! A system definition is a single JSON document:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "graph": { "base_edge": [1, 2], "steps": [ { "vertex": 3, "parents": [1, 2] } ] },
//!   "laws": [
//!     { "edge": [1, 2], "family": "spring", "k": 1.0, "c": 1.0 },
//!     { "edge": [1, 3], "family": "power", "k": 1.0, "alpha": 1.5, "c": 2.0 },
//!     { "edge": [2, 3], "family": "sum", "terms": [
//!         { "family": "spring", "k": 1.0, "c": 1.0 },
//!         { "family": "bump", "d0": 1.0, "value": 0.05, "slope": 0.0, "width": 0.2 } ] }
//!   ],
//!   "initial_configurations": [ [[0.0, 0.0], [1.5, 0.0], [0.4, 1.2]] ],
//!   "tolerances": { "collinear": 1e-9, "zero_eig": 1e-8, "residual": 1e-10 }
//! }
//! ```

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeSet;
use std::time::Instant;

use crate::analysis::{
    canonical_partition, check_index_formula, enumerate_line_equilibria, inertia,
    repair_degenerate, subsystem, CheckOptions, CriticalOrbitRecord, EnumerateOptions,
    InertiaTriple,
};
use crate::dynamics::{Configuration, FlowOptions, FlowSummary, RmaSystem};
use crate::graph::{Edge, HennebergStep, TlGraph};
use crate::laws::{make_bump, Ensemble, InteractionLaw};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

/// Parsed system definition file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpecFile {
    pub schema_version: u64,
    pub graph: GraphSpec,
    pub laws: Vec<LawEntry>,
    #[serde(default)]
    pub initial_configurations: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSpec {
    pub base_edge: [usize; 2],
    #[serde(default)]
    pub steps: Vec<StepSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSpec {
    pub vertex: usize,
    pub parents: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LawEntry {
    pub edge: [usize; 2],
    #[serde(flatten)]
    pub law: LawSpec,
}

/// Law families admitted in definition files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LawSpec {
    Spring {
        k: f64,
        c: f64,
    },
    Power {
        k: f64,
        alpha: f64,
        c: f64,
    },
    Bump {
        d0: f64,
        value: f64,
        slope: f64,
        width: f64,
    },
    Sum {
        terms: Vec<LawSpec>,
    },
}

impl LawSpec {
    pub fn build(&self) -> Result<InteractionLaw> {
        match self {
            LawSpec::Spring { k, c } => Ok(InteractionLaw::spring(*k, *c)),
            LawSpec::Power { k, alpha, c } => Ok(InteractionLaw::power(*k, *alpha, *c)),
            LawSpec::Bump {
                d0,
                value,
                slope,
                width,
            } => Ok(InteractionLaw::from_bump(make_bump(
                *d0, *value, *slope, *width,
            )?)),
            LawSpec::Sum { terms } => {
                let mut terms = terms.iter();
                let first = terms
                    .next()
                    .ok_or_else(|| Error::Spec("law sum needs at least one term".into()))?
                    .build()?;
                terms.try_fold(first, |acc, t| Ok(InteractionLaw::sum(&acc, &t.build()?)))
            }
        }
    }
}

/// Optional per-file tolerance overrides.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ToleranceOverrides {
    pub collinear: Option<f64>,
    pub zero_eig: Option<f64>,
    pub residual: Option<f64>,
}

/// Resolved tolerances (file overrides on top of the crate defaults).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub collinear: f64,
    pub zero_eig: f64,
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            collinear: crate::analysis::DEFAULT_COLLINEAR_TOL,
            zero_eig: crate::analysis::DEFAULT_ZERO_EIG_TOL,
            residual: crate::dynamics::EQUILIBRIUM_TOL,
        }
    }
}

impl Tolerances {
    pub fn enumerate_options(&self) -> EnumerateOptions {
        EnumerateOptions {
            residual_tol: self.residual,
            collinear_tol: self.collinear,
            zero_eig_tol: self.zero_eig,
            ..EnumerateOptions::default()
        }
    }

    pub fn check_options(&self) -> CheckOptions {
        CheckOptions {
            residual_tol: self.residual,
            collinear_tol: self.collinear,
            zero_eig_tol: self.zero_eig,
            ..CheckOptions::default()
        }
    }
}

impl SystemSpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SystemSpecFile =
            serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(Error::Spec(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                spec.schema_version
            )));
        }
        Ok(spec)
    }

    pub fn build_graph(&self) -> Result<TlGraph> {
        let steps = self
            .graph
            .steps
            .iter()
            .map(|s| HennebergStep {
                vertex: s.vertex,
                parents: (s.parents[0], s.parents[1]),
            })
            .collect();
        TlGraph::build((self.graph.base_edge[0], self.graph.base_edge[1]), steps)
            .map_err(|e| Error::Spec(format!("graph section: {e}")))
    }

    pub fn build_system(&self) -> Result<RmaSystem> {
        let graph = self.build_graph()?;
        let mut laws = std::collections::BTreeMap::new();
        for entry in &self.laws {
            let e = crate::graph::edge(entry.edge[0], entry.edge[1]);
            if laws.insert(e, entry.law.build()?).is_some() {
                return Err(Error::Spec(format!("edge {e:?} has two law entries")));
            }
        }
        let ensemble =
            Ensemble::new(&graph, laws).map_err(|e| Error::Spec(format!("laws section: {e}")))?;
        RmaSystem::new(graph, ensemble)
    }

    pub fn initial_configs(&self) -> Vec<Configuration> {
        self.initial_configurations
            .iter()
            .map(|pts| {
                Configuration::from_points(&pts.iter().map(|&[a, b]| (a, b)).collect::<Vec<_>>())
            })
            .collect()
    }

    pub fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            collinear: self.tolerances.collinear.unwrap_or(d.collinear),
            zero_eig: self.tolerances.zero_eig.unwrap_or(d.zero_eig),
            residual: self.tolerances.residual.unwrap_or(d.residual),
        }
    }
}

/// I.i.d. law sampler over a parametric family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LawSampler {
    Spring {
        k: [f64; 2],
        c: [f64; 2],
    },
    Power {
        k: [f64; 2],
        alpha: [f64; 2],
        c: [f64; 2],
    },
}

impl Default for LawSampler {
    fn default() -> Self {
        LawSampler::Spring {
            k: [0.5, 2.0],
            c: [0.25, 4.0],
        }
    }
}

impl LawSampler {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> InteractionLaw {
        match self {
            LawSampler::Spring { k, c } => {
                InteractionLaw::spring(rng.gen_range(k[0]..=k[1]), rng.gen_range(c[0]..=c[1]))
            }
            LawSampler::Power { k, alpha, c } => InteractionLaw::power(
                rng.gen_range(k[0]..=k[1]),
                rng.gen_range(alpha[0]..=alpha[1]),
                rng.gen_range(c[0]..=c[1]),
            ),
        }
    }

    /// One random ensemble on the graph, edges in deterministic order.
    pub fn sample_ensemble<R: Rng>(&self, graph: &TlGraph, rng: &mut R) -> Ensemble {
        Ensemble::from_fn(graph, |_| self.sample(rng))
    }
}

/// Aggregate of a genericity scan. `wall_time_secs` is informational and
/// deliberately left out of the serialized form so reports for a fixed seed
/// are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub graph_n: usize,
    pub samples: usize,
    pub seed: u64,
    pub sampler: LawSampler,
    pub tolerances: Tolerances,
    pub per_sample_orbit_counts: Vec<usize>,
    pub total_orbits: usize,
    pub degenerate_orbits: usize,
    pub repaired_orbits: usize,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl ScanReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("scan report serializes")
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("sample,orbits\n");
        for (i, c) in self.per_sample_orbit_counts.iter().enumerate() {
            out.push_str(&format!("{i},{c}\n"));
        }
        out
    }
}

/// Draw `samples` i.i.d. ensembles on `graph` (seed + sample index derive
/// each sample's stream), enumerate line orbits per sample, tally
/// nondegeneracy, and attempt repair on every degenerate find. Samples run
/// in parallel; the report is ordered by sample index regardless.
pub fn run_genericity_scan(
    graph: &TlGraph,
    sampler: &LawSampler,
    samples: usize,
    seed: u64,
    tolerances: &Tolerances,
) -> Result<ScanReport> {
    let started = Instant::now();
    let opts = tolerances.enumerate_options();
    let bound = 3usize.pow(graph.n() as u32 - 2);

    let per_sample: Vec<SampleTally> = (0..samples)
        .into_par_iter()
        .map(|idx| -> Result<SampleTally> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(idx as u64));
            let ensemble = sampler.sample_ensemble(graph, &mut rng);
            let system = RmaSystem::new(graph.clone(), ensemble)?;
            let tally = tally_line_orbits(&system, &opts)?;
            assert!(tally.orbit_count <= bound, "orbit count exceeded 3^(N-2)");
            Ok(tally)
        })
        .collect::<Result<Vec<_>>>()?;

    let per_sample_orbit_counts: Vec<usize> = per_sample.iter().map(|t| t.orbit_count).collect();
    Ok(ScanReport {
        graph_n: graph.n(),
        samples,
        seed,
        sampler: sampler.clone(),
        tolerances: *tolerances,
        total_orbits: per_sample_orbit_counts.iter().sum(),
        degenerate_orbits: per_sample.iter().map(|t| t.degenerate).sum(),
        repaired_orbits: per_sample.iter().map(|t| t.repaired).sum(),
        per_sample_orbit_counts,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Per-system tally used by the scan: orbit count, degenerate finds, and
/// how many of those a perturbation repaired.
#[derive(Debug, Clone, Copy)]
pub struct SampleTally {
    pub orbit_count: usize,
    pub degenerate: usize,
    pub repaired: usize,
}

/// Enumerate one system's line orbits and attempt repair on each
/// degenerate one.
pub fn tally_line_orbits(system: &RmaSystem, opts: &EnumerateOptions) -> Result<SampleTally> {
    let records = enumerate_line_equilibria(system, opts)?;
    let mut tally = SampleTally {
        orbit_count: records.len(),
        degenerate: 0,
        repaired: 0,
    };
    for r in &records {
        if !r.nondegenerate {
            tally.degenerate += 1;
            if repair_degenerate(system, r, opts).is_ok() {
                tally.repaired += 1;
            }
        }
    }
    Ok(tally)
}

/// One gradient-flow run inside a morse report.
#[derive(Debug, Clone)]
pub struct FlowFinding {
    pub start_index: usize,
    pub converged: bool,
    pub failure: Option<String>,
    pub residual: f64,
    pub config: Option<Configuration>,
    pub inertia: Option<InertiaTriple>,
    pub nondegenerate: bool,
    pub partition: Vec<Vec<Edge>>,
    pub index_formula_holds: Option<bool>,
    pub flow_summary: Option<FlowSummary>,
}

/// Full report for one system: enumerated line orbits of the system and of
/// every canonical-partition subsystem encountered, flow results from the
/// supplied initial configurations, and the aggregate verdict (finitely
/// many critical orbits found, all with exactly three zero modes).
#[derive(Debug, Clone)]
pub struct MorseReport {
    pub tolerances: Tolerances,
    pub line_orbits: Vec<CriticalOrbitRecord>,
    pub subsystem_orbits: Vec<(Vec<Edge>, Vec<CriticalOrbitRecord>)>,
    pub flows: Vec<FlowFinding>,
    pub degenerate_count: usize,
    pub violation_count: usize,
    pub verdict: bool,
}

impl MorseReport {
    /// JSON-lines form: header, then one object per orbit / subsystem orbit
    /// / flow, then the verdict.
    pub fn to_json_lines(&self) -> Vec<serde_json::Value> {
        let mut lines = Vec::new();
        lines.push(json!({
            "kind": "header",
            "schema_version": SCHEMA_VERSION,
            "tolerances": self.tolerances,
            "line_orbits": self.line_orbits.len(),
            "flows": self.flows.len(),
        }));
        for r in &self.line_orbits {
            let mut v = r.to_json();
            v["kind"] = json!("line_orbit");
            lines.push(v);
        }
        for (edges, records) in &self.subsystem_orbits {
            for r in records {
                let mut v = r.to_json();
                v["kind"] = json!("subsystem_orbit");
                v["subsystem_edges"] = json!(edges);
                lines.push(v);
            }
        }
        for f in &self.flows {
            lines.push(json!({
                "kind": "flow",
                "start_index": f.start_index,
                "converged": f.converged,
                "failure": f.failure,
                "residual": f.residual,
                "positions": f.config.as_ref().map(|c| {
                    (1..=c.n()).map(|i| {
                        let (a, b) = c.point(i);
                        [a, b]
                    }).collect::<Vec<_>>()
                }),
                "inertia": f.inertia,
                "nondegenerate": f.nondegenerate,
                "partition": f.partition,
                "index_formula_holds": f.index_formula_holds,
                "flow_summary": f.flow_summary,
            }));
        }
        lines.push(json!({
            "kind": "verdict",
            "equivariant_morse": self.verdict,
            "degenerate_count": self.degenerate_count,
            "violation_count": self.violation_count,
        }));
        lines
    }
}

/// Run the whole verification pipeline for one system definition.
pub fn morse_report(spec: &SystemSpecFile) -> Result<MorseReport> {
    let system = spec.build_system()?;
    let tolerances = spec.tolerances();
    let enum_opts = tolerances.enumerate_options();
    let check_opts = tolerances.check_options();

    let line_orbits = enumerate_line_equilibria(&system, &enum_opts)?;
    let mut degenerate_count = line_orbits.iter().filter(|r| !r.nondegenerate).count();
    let mut violation_count = 0;

    let mut flows = Vec::new();
    let mut part_sets: BTreeSet<BTreeSet<Edge>> = BTreeSet::new();
    let flow_opts = FlowOptions {
        residual_tol: tolerances.residual,
        ..FlowOptions::default()
    };
    for (start_index, start) in spec.initial_configs().into_iter().enumerate() {
        let finding = match run_flow_finding(&system, start_index, &start, &flow_opts, &check_opts)
        {
            Ok(f) => f,
            Err(e) => FlowFinding {
                start_index,
                converged: false,
                failure: Some(e.to_string()),
                residual: f64::INFINITY,
                config: None,
                inertia: None,
                nondegenerate: false,
                partition: vec![],
                index_formula_holds: None,
                flow_summary: None,
            },
        };
        if !finding.converged || !finding.nondegenerate {
            violation_count += 1;
        }
        if finding.index_formula_holds == Some(false) {
            violation_count += 1;
        }
        for part in &finding.partition {
            let set: BTreeSet<Edge> = part.iter().copied().collect();
            if set.len() < system.graph().edges().len() {
                part_sets.insert(set);
            }
        }
        flows.push(finding);
    }

    let mut subsystem_orbits = Vec::new();
    for set in part_sets {
        let sub = system
            .graph()
            .induced_subsystem(&set)
            .expect("partition parts are triangulated Laman subgraphs");
        let sub_sys = subsystem(&system, &sub)?;
        let records = enumerate_line_equilibria(&sub_sys, &enum_opts)?;
        degenerate_count += records.iter().filter(|r| !r.nondegenerate).count();
        subsystem_orbits.push((set.into_iter().collect(), records));
    }

    let verdict = degenerate_count == 0 && violation_count == 0;
    Ok(MorseReport {
        tolerances,
        line_orbits,
        subsystem_orbits,
        flows,
        degenerate_count,
        violation_count,
        verdict,
    })
}

fn run_flow_finding(
    system: &RmaSystem,
    start_index: usize,
    start: &Configuration,
    flow_opts: &FlowOptions,
    check_opts: &CheckOptions,
) -> Result<FlowFinding> {
    let (end, summary) = system.flow(start, flow_opts)?;
    let refined = system.newton_refine(&end)?;
    let residual = system.residual(&refined)?;
    let inert = inertia(system.hessian(&refined)?.matrix(), check_opts.zero_eig_tol)?;
    let partition = canonical_partition(system.graph(), &refined, check_opts.collinear_tol)?;
    let index = check_index_formula(system, &refined, check_opts)?;
    Ok(FlowFinding {
        start_index,
        converged: residual <= check_opts.residual_tol,
        failure: None,
        residual,
        nondegenerate: inert.n_zero == 3,
        inertia: Some(inert),
        config: Some(refined),
        partition: partition.parts.iter().map(|p| p.edges.clone()).collect(),
        index_formula_holds: Some(index.holds),
        flow_summary: Some(summary),
    })
}

/// CSV for enumerated records (tabular fields only).
pub fn records_csv(records: &[CriticalOrbitRecord]) -> String {
    let mut out = String::from("index,case_vector,residual,n_plus,n_zero,n_minus,nondegenerate\n");
    for (i, r) in records.iter().enumerate() {
        let cases: Vec<String> = r
            .case_vector
            .iter()
            .map(|c| format!("{c:?}").to_lowercase())
            .collect();
        out.push_str(&format!(
            "{i},{},{:.3e},{},{},{},{}\n",
            cases.join("|"),
            r.residual,
            r.inertia.n_plus,
            r.inertia.n_zero,
            r.inertia.n_minus,
            r.nondegenerate
        ));
    }
    out
}
