//! Monotone interaction laws and the virtual-interaction calculus.
//!
//! A law is described by three views of one function: `f(d)` (the gain in
//! the equations of motion), `f_tilde(d) = d * f(d)` (the signed magnitude
//! of attraction/repulsion along an edge), and the derivative
//! `f_tilde'(d)`. A law is *class F* when
//!
//! * C1: `f_tilde' > 0` everywhere and `f_tilde` has a unique zero, and
//! * C2: the pairwise potential blows up at collision, i.e.
//!   `f_tilde(d) -> -inf` as `d -> 0+`.
//!
//! Class F guarantees global existence of the gradient flow and a unique
//! balance position for an agent pinned between (or outside) two others,
//! which is what the reduction of line systems is built on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{Edge, TlGraph};
use crate::roots::monotone_root;
use crate::{Error, Result};

/// Relative tolerance for the `f_tilde = d * f` consistency contract.
pub const CONSISTENCY_TOL: f64 = 1e-12;
/// Absolute tolerance on quadrature of pairwise potentials.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Small-distance probe where class-F divergence is tested.
pub const PROBE_D_MIN: f64 = 1e-5;
/// f_tilde at the smallest probe point must be at most this for C2.
const C2_CEILING: f64 = -1.0;

/// Point evaluation of a law: `(f, f_tilde, f_tilde')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawEval {
    pub f: f64,
    pub f_tilde: f64,
    pub f_tilde_prime: f64,
}

/// Where the removed agent sits relative to its two parents on the line.
///
/// `LeftOutside` means the *first* parent separates the removed agent from
/// the second one; `RightOutside` means the second parent does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionCase {
    Between,
    LeftOutside,
    RightOutside,
}

impl ReductionCase {
    pub const ALL: [ReductionCase; 3] = [
        ReductionCase::Between,
        ReductionCase::LeftOutside,
        ReductionCase::RightOutside,
    ];
}

/// A compactly supported C^1 perturbation of `f_tilde`, built from two cubic
/// Hermite pieces. It prescribes the value and slope of the perturbation at
/// the center `d0` and vanishes (with zero slope) at `d0 +- width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBump {
    pub d0: f64,
    pub value: f64,
    pub slope: f64,
    pub width: f64,
}

impl PerturbationBump {
    fn eval(&self, d: f64) -> (f64, f64) {
        let (lo, hi) = (self.d0 - self.width, self.d0 + self.width);
        if d <= lo || d >= hi {
            return (0.0, 0.0);
        }
        if d < self.d0 {
            hermite(lo, self.d0, 0.0, 0.0, self.value, self.slope, d)
        } else {
            hermite(self.d0, hi, self.value, self.slope, 0.0, 0.0, d)
        }
    }

    /// Integral of the bump from its lower support end to `x`.
    fn cumulative(&self, x: f64) -> f64 {
        let (lo, hi) = (self.d0 - self.width, self.d0 + self.width);
        let mut acc = 0.0;
        if x > lo {
            let end = x.min(self.d0);
            acc += hermite_integral(lo, self.d0, 0.0, 0.0, self.value, self.slope, end);
        }
        if x > self.d0 {
            let end = x.min(hi);
            acc += hermite_integral(self.d0, hi, self.value, self.slope, 0.0, 0.0, end);
        }
        acc
    }
}

/// Cubic Hermite interpolant on `[a, b]` with endpoint values `p0, p1` and
/// slopes `m0, m1`, evaluated at `x`. Returns `(value, derivative)`.
fn hermite(a: f64, b: f64, p0: f64, m0: f64, p1: f64, m1: f64, x: f64) -> (f64, f64) {
    let h = b - a;
    let t = (x - a) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let value = p0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * h * (t3 - 2.0 * t2 + t)
        + p1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * h * (t3 - t2);
    let deriv = (p0 * (6.0 * t2 - 6.0 * t)
        + m0 * h * (3.0 * t2 - 4.0 * t + 1.0)
        + p1 * (6.0 * t - 6.0 * t2)
        + m1 * h * (3.0 * t2 - 2.0 * t))
        / h;
    (value, deriv)
}

/// Integral of the Hermite piece from `a` to `x <= b`.
fn hermite_integral(a: f64, b: f64, p0: f64, m0: f64, p1: f64, m1: f64, x: f64) -> f64 {
    let h = b - a;
    let t = ((x - a) / h).clamp(0.0, 1.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t2 * t2;
    h * (p0 * (0.5 * t4 - t3 + t)
        + m0 * h * (0.25 * t4 - 2.0 * t3 / 3.0 + 0.5 * t2)
        + p1 * (-0.5 * t4 + t3)
        + m1 * h * (0.25 * t4 - t3 / 3.0))
}

#[derive(Debug, Clone)]
enum LawKind {
    /// `f(d) = k (1 - c / d^2)`, `f_tilde(d) = k (d - c/d)`; rest length `sqrt(c)`.
    Spring { k: f64, c: f64 },
    /// `f_tilde(d) = k (d^alpha - c/d)`; rest length `c^(1/(alpha+1))`.
    Power { k: f64, alpha: f64, c: f64 },
    /// A bare compactly supported perturbation (not class F on its own).
    Bump(PerturbationBump),
    /// Pointwise sum of laws.
    Sum(Vec<InteractionLaw>),
    /// `gain * inner(d)` with `gain > 0`.
    Gain {
        gain: f64,
        inner: Box<InteractionLaw>,
    },
    /// `inner(scale * d)` with `scale > 0` (as a gain law: `f(d) = f_in(scale d)`).
    Rescaled {
        scale: f64,
        inner: Box<InteractionLaw>,
    },
    /// `base + virtual interaction of (f_vi, f_vj)` for one reduction case.
    Reduced(Box<Reduction>),
    /// Arbitrary test/user law given by `f_tilde` and its derivative.
    Custom {
        name: &'static str,
        f_tilde: fn(f64) -> f64,
        f_tilde_prime: fn(f64) -> f64,
    },
}

#[derive(Debug, Clone)]
struct Reduction {
    base: InteractionLaw,
    f_vi: InteractionLaw,
    f_vj: InteractionLaw,
    case: ReductionCase,
}

/// An evaluable interaction law with a cached class-F verdict.
#[derive(Debug, Clone)]
pub struct InteractionLaw {
    kind: LawKind,
    class_f: bool,
}

impl InteractionLaw {
    /// The canonical spring-like family `S(k, c)`: `f(d) = k (1 - c/d^2)`.
    pub fn spring(k: f64, c: f64) -> Self {
        Self {
            class_f: k > 0.0 && c > 0.0,
            kind: LawKind::Spring { k, c },
        }
    }

    /// The power family `f_tilde(d) = k (d^alpha - c/d)`.
    pub fn power(k: f64, alpha: f64, c: f64) -> Self {
        Self {
            class_f: k > 0.0 && c > 0.0 && alpha > 0.0,
            kind: LawKind::Power { k, alpha, c },
        }
    }

    /// Wrap a bump as a standalone (non-class-F) law.
    pub fn from_bump(bump: PerturbationBump) -> Self {
        Self {
            kind: LawKind::Bump(bump),
            class_f: false,
        }
    }

    /// Test/user law from explicit `f_tilde` and `f_tilde'`; class F is probed.
    pub fn custom(
        name: &'static str,
        f_tilde: fn(f64) -> f64,
        f_tilde_prime: fn(f64) -> f64,
    ) -> Self {
        let mut law = Self {
            kind: LawKind::Custom {
                name,
                f_tilde,
                f_tilde_prime,
            },
            class_f: false,
        };
        law.class_f = law.validate_class_f(&default_probe_grid()).pass();
        law
    }

    /// Pointwise sum; the class-F flag is re-probed on the default grid.
    pub fn sum(a: &InteractionLaw, b: &InteractionLaw) -> Self {
        let mut terms = Vec::new();
        for law in [a, b] {
            match &law.kind {
                LawKind::Sum(inner) => terms.extend(inner.iter().cloned()),
                _ => terms.push(law.clone()),
            }
        }
        let mut law = Self {
            kind: LawKind::Sum(terms),
            class_f: false,
        };
        law.class_f = law.validate_class_f(&default_probe_grid()).pass();
        law
    }

    /// `base + g`, where `g` is the virtual interaction between the parents
    /// of a removed agent, induced by its two edge laws for `case`.
    ///
    /// Requires class-F inputs; the composite is class F again (the virtual
    /// term is strictly increasing, and outside the `Between` case its
    /// small-distance limit is finite so `base` supplies the divergence).
    pub fn reduced(
        base: &InteractionLaw,
        f_vi: &InteractionLaw,
        f_vj: &InteractionLaw,
        case: ReductionCase,
    ) -> Result<Self> {
        for (name, law) in [("base", base), ("f_vi", f_vi), ("f_vj", f_vj)] {
            if !law.class_f {
                return Err(Error::NotClassF(format!(
                    "reduced law needs class-F {name}"
                )));
            }
        }
        Ok(Self {
            kind: LawKind::Reduced(Box::new(Reduction {
                base: base.clone(),
                f_vi: f_vi.clone(),
                f_vj: f_vj.clone(),
                case,
            })),
            class_f: true,
        })
    }

    fn gain(gain: f64, inner: InteractionLaw) -> Self {
        let class_f = gain > 0.0 && inner.class_f;
        Self {
            kind: LawKind::Gain {
                gain,
                inner: Box::new(inner),
            },
            class_f,
        }
    }

    fn rescaled(scale: f64, inner: InteractionLaw) -> Self {
        let class_f = scale > 0.0 && inner.class_f;
        Self {
            kind: LawKind::Rescaled {
                scale,
                inner: Box::new(inner),
            },
            class_f,
        }
    }

    pub fn class_f(&self) -> bool {
        self.class_f
    }

    /// `(f, f_tilde, f_tilde')` at distance `d > 0`.
    pub fn eval(&self, d: f64) -> Result<LawEval> {
        if d.is_nan() || d <= 0.0 || !d.is_finite() {
            return Err(Error::NonPositiveDistance(d));
        }
        let (f_tilde, f_tilde_prime) = self.eval_tilde(d)?;
        Ok(LawEval {
            f: f_tilde / d,
            f_tilde,
            f_tilde_prime,
        })
    }

    pub fn f_tilde(&self, d: f64) -> Result<f64> {
        Ok(self.eval(d)?.f_tilde)
    }

    fn eval_tilde(&self, d: f64) -> Result<(f64, f64)> {
        match &self.kind {
            LawKind::Spring { k, c } => Ok((k * (d - c / d), k * (1.0 + c / (d * d)))),
            LawKind::Power { k, alpha, c } => Ok((
                k * (d.powf(*alpha) - c / d),
                k * (alpha * d.powf(alpha - 1.0) + c / (d * d)),
            )),
            LawKind::Bump(b) => Ok(b.eval(d)),
            LawKind::Sum(terms) => {
                let mut v = 0.0;
                let mut dv = 0.0;
                for t in terms {
                    let (tv, tdv) = t.eval_tilde(d)?;
                    v += tv;
                    dv += tdv;
                }
                Ok((v, dv))
            }
            LawKind::Gain { gain, inner } => {
                let (v, dv) = inner.eval_tilde(d)?;
                Ok((gain * v, gain * dv))
            }
            LawKind::Rescaled { scale, inner } => {
                let (v, dv) = inner.eval_tilde(scale * d)?;
                Ok((v / scale, dv))
            }
            LawKind::Reduced(r) => {
                let (bv, bdv) = r.base.eval_tilde(d)?;
                let vi = virtual_interaction(&r.f_vi, &r.f_vj, r.case, d)?;
                Ok((bv + vi.g_tilde, bdv + vi.g_tilde_prime))
            }
            LawKind::Custom {
                f_tilde,
                f_tilde_prime,
                ..
            } => Ok((f_tilde(d), f_tilde_prime(d))),
        }
    }

    /// The unique zero of `f_tilde` for a class-F law.
    pub fn rest_length(&self) -> Result<f64> {
        if !self.class_f {
            return Err(Error::NotClassF("rest length needs a class-F law".into()));
        }
        match &self.kind {
            LawKind::Spring { c, .. } => Ok(c.sqrt()),
            LawKind::Power { alpha, c, .. } => Ok(c.powf(1.0 / (alpha + 1.0))),
            LawKind::Gain { inner, .. } => inner.rest_length(),
            LawKind::Rescaled { scale, inner } => Ok(inner.rest_length()? / scale),
            _ => monotone_root(
                |d| self.eval_tilde(d).map(|(v, _)| v).unwrap_or(f64::NAN),
                |d| self.eval_tilde(d).map(|(_, dv)| dv).unwrap_or(f64::NAN),
                1.0,
                0.0,
                f64::INFINITY,
                "rest length",
            ),
        }
    }

    /// Pairwise potential `phi(d) = integral of f_tilde from 1 to d`,
    /// closed-form where the family provides it, adaptive quadrature (to
    /// [`QUADRATURE_TOL`]) otherwise.
    pub fn pair_potential(&self, d: f64) -> Result<f64> {
        if d.is_nan() || d <= 0.0 || !d.is_finite() {
            return Err(Error::NonPositiveDistance(d));
        }
        match &self.kind {
            LawKind::Spring { k, c } => Ok(k * (0.5 * (d * d - 1.0) - c * d.ln())),
            LawKind::Power { k, alpha, c } => {
                Ok(k * ((d.powf(alpha + 1.0) - 1.0) / (alpha + 1.0) - c * d.ln()))
            }
            LawKind::Bump(b) => Ok(b.cumulative(d) - b.cumulative(1.0)),
            LawKind::Sum(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.pair_potential(d)?;
                }
                Ok(acc)
            }
            LawKind::Gain { gain, inner } => Ok(gain * inner.pair_potential(d)?),
            LawKind::Rescaled { scale, inner } => {
                let s = *scale;
                Ok((inner.pair_potential(s * d)? - inner.pair_potential(s)?) / (s * s))
            }
            LawKind::Reduced(_) | LawKind::Custom { .. } => {
                adaptive_simpson(&|x| self.f_tilde(x), 1.0, d, QUADRATURE_TOL)
            }
        }
    }

    /// Whether [`Self::pair_potential`] avoids quadrature for this law.
    pub fn has_closed_potential(&self) -> bool {
        match &self.kind {
            LawKind::Spring { .. } | LawKind::Power { .. } | LawKind::Bump(_) => true,
            LawKind::Sum(terms) => terms.iter().all(|t| t.has_closed_potential()),
            LawKind::Gain { inner, .. } | LawKind::Rescaled { inner, .. } => {
                inner.has_closed_potential()
            }
            LawKind::Reduced(_) | LawKind::Custom { .. } => false,
        }
    }

    /// Probe the class-F conditions on a distance grid and report witnesses.
    pub fn validate_class_f(&self, grid: &[f64]) -> ClassFReport {
        let mut report = ClassFReport {
            monotone: true,
            monotone_witness: None,
            sign_changes: 0,
            c2_probe: [f64::NAN; 2],
            c2_diverges: false,
        };
        let mut prev: Option<f64> = None;
        for &d in grid {
            match self.eval_tilde(d) {
                Ok((v, dv)) => {
                    if dv <= 0.0 && report.monotone {
                        report.monotone = false;
                        report.monotone_witness = Some(d);
                    }
                    if let Some(p) = prev {
                        if (p < 0.0 && v >= 0.0) || (p > 0.0 && v <= 0.0) {
                            report.sign_changes += 1;
                        }
                    }
                    prev = Some(v);
                }
                Err(_) => {
                    report.monotone = false;
                    report.monotone_witness = Some(d);
                }
            }
        }
        let p0 = self
            .eval_tilde(PROBE_D_MIN)
            .map(|(v, _)| v)
            .unwrap_or(f64::NAN);
        let p1 = self
            .eval_tilde(10.0 * PROBE_D_MIN)
            .map(|(v, _)| v)
            .unwrap_or(f64::NAN);
        report.c2_probe = [p0, p1];
        // divergence surrogate: well below zero and still at least doubling
        // as the distance shrinks by a decade
        report.c2_diverges = p0 <= C2_CEILING && p0 <= 2.0 * p1;
        report
    }

    /// Short tag naming the outermost structure, for reports.
    pub fn family_tag(&self) -> &'static str {
        match &self.kind {
            LawKind::Spring { .. } => "spring",
            LawKind::Power { .. } => "power",
            LawKind::Bump(_) => "bump",
            LawKind::Sum(_) => "sum",
            LawKind::Gain { .. } => "gain",
            LawKind::Rescaled { .. } => "rescaled",
            LawKind::Reduced(_) => "reduced",
            LawKind::Custom { name, .. } => name,
        }
    }
}

/// Build a C^1 bump with prescribed value and slope at `d0`, supported on
/// `(d0 - width, d0 + width)` which must stay inside the positive axis.
pub fn make_bump(d0: f64, value: f64, slope: f64, width: f64) -> Result<PerturbationBump> {
    if width.is_nan() || width <= 0.0 || d0 - width <= 0.0 {
        return Err(Error::InvalidSupport {
            lo: d0 - width,
            hi: d0 + width,
        });
    }
    Ok(PerturbationBump {
        d0,
        value,
        slope,
        width,
    })
}

/// Class-F probe outcome with witnesses.
#[derive(Debug, Clone)]
pub struct ClassFReport {
    /// `f_tilde' > 0` held at every grid point.
    pub monotone: bool,
    /// First grid point violating monotonicity (or failing to evaluate).
    pub monotone_witness: Option<f64>,
    /// Number of sign changes of `f_tilde` along the grid.
    pub sign_changes: usize,
    /// `f_tilde` at the two smallest probe distances.
    pub c2_probe: [f64; 2],
    /// Small-distance divergence verdict.
    pub c2_diverges: bool,
}

impl ClassFReport {
    pub fn c1(&self) -> bool {
        self.monotone && self.sign_changes == 1
    }

    pub fn c2(&self) -> bool {
        self.c2_diverges
    }

    pub fn pass(&self) -> bool {
        self.c1() && self.c2()
    }
}

/// Default logarithmic probe grid covering `[1e-5, 50]`.
pub fn default_probe_grid() -> Vec<f64> {
    log_grid(PROBE_D_MIN, 50.0, 200)
}

/// `count` points between `lo` and `hi`, geometrically spaced.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Solved balance data of a removed agent against its two parents at parent
/// distance `d`.
#[derive(Debug, Clone, Copy)]
pub struct VirtualInteraction {
    /// Virtual force magnitude `g_tilde(d)` between the parents.
    pub g_tilde: f64,
    /// Derivative `g_tilde'(d) = ft'_vi ft'_vj / (ft'_vi + ft'_vj)`.
    pub g_tilde_prime: f64,
    /// Distance from the removed agent to the first parent.
    pub d_vi: f64,
    /// Distance from the removed agent to the second parent.
    pub d_vj: f64,
}

/// Solve the force balance of an agent with edge laws `f_vi`, `f_vj` against
/// parents at distance `d`, in the geometry selected by `case`, and evaluate
/// the induced virtual interaction between the parents.
///
/// The balance systems are strictly monotone, so the root is unique:
///
/// * `Between`:       `d_vi + d_vj = d`,   `ft_vi(d_vi) = ft_vj(d_vj)`
/// * `LeftOutside`:   `d_vj = d_vi + d`,   `ft_vi(d_vi) + ft_vj(d_vj) = 0`
/// * `RightOutside`:  `d_vi = d_vj + d`,   `ft_vi(d_vi) + ft_vj(d_vj) = 0`
///
/// Residuals are driven below 1e-12 in `f_tilde` units.
pub fn virtual_interaction(
    f_vi: &InteractionLaw,
    f_vj: &InteractionLaw,
    case: ReductionCase,
    d: f64,
) -> Result<VirtualInteraction> {
    if d.is_nan() || d <= 0.0 || !d.is_finite() {
        return Err(Error::NonPositiveDistance(d));
    }
    if !f_vi.class_f() || !f_vj.class_f() {
        return Err(Error::NotClassF(
            "virtual interaction needs class-F edge laws".into(),
        ));
    }

    let (d_vi, d_vj, g_tilde) = match case {
        ReductionCase::Between => {
            let (ri, rj) = (f_vi.rest_length()?, f_vj.rest_length()?);
            let x0 = (d * ri / (ri + rj)).clamp(d * 1e-12, d * (1.0 - 1e-12));
            let t = monotone_root(
                |t| balance_between(f_vi, f_vj, d, t),
                |t| balance_between_slope(f_vi, f_vj, d, t),
                x0,
                0.0,
                d,
                "between balance",
            )?;
            (t, d - t, f_vi.f_tilde(t)?)
        }
        ReductionCase::LeftOutside => {
            let t = monotone_root(
                |t| balance_outside(f_vi, f_vj, d, t),
                |t| balance_outside_slope(f_vi, f_vj, d, t),
                f_vi.rest_length()?,
                0.0,
                f64::INFINITY,
                "left-outside balance",
            )?;
            (t, t + d, -f_vi.f_tilde(t)?)
        }
        ReductionCase::RightOutside => {
            let t = monotone_root(
                |t| balance_outside(f_vj, f_vi, d, t),
                |t| balance_outside_slope(f_vj, f_vi, d, t),
                f_vj.rest_length()?,
                0.0,
                f64::INFINITY,
                "right-outside balance",
            )?;
            (t + d, t, f_vi.f_tilde(t + d)?)
        }
    };

    let pi = f_vi.eval(d_vi)?.f_tilde_prime;
    let pj = f_vj.eval(d_vj)?.f_tilde_prime;
    Ok(VirtualInteraction {
        g_tilde,
        g_tilde_prime: pi * pj / (pi + pj),
        d_vi,
        d_vj,
    })
}

fn balance_between(f_vi: &InteractionLaw, f_vj: &InteractionLaw, d: f64, t: f64) -> f64 {
    match (f_vi.eval_tilde(t), f_vj.eval_tilde(d - t)) {
        (Ok((a, _)), Ok((b, _))) => a - b,
        _ => f64::NAN,
    }
}

fn balance_between_slope(f_vi: &InteractionLaw, f_vj: &InteractionLaw, d: f64, t: f64) -> f64 {
    match (f_vi.eval_tilde(t), f_vj.eval_tilde(d - t)) {
        (Ok((_, a)), Ok((_, b))) => a + b,
        _ => f64::NAN,
    }
}

fn balance_outside(near: &InteractionLaw, far: &InteractionLaw, d: f64, t: f64) -> f64 {
    match (near.eval_tilde(t), far.eval_tilde(t + d)) {
        (Ok((a, _)), Ok((b, _))) => a + b,
        _ => f64::NAN,
    }
}

fn balance_outside_slope(near: &InteractionLaw, far: &InteractionLaw, d: f64, t: f64) -> f64 {
    match (near.eval_tilde(t), far.eval_tilde(t + d)) {
        (Ok((_, a)), Ok((_, b))) => a + b,
        _ => f64::NAN,
    }
}

/// Lift a class-F law to a three-agent `Between` pre-image: returns
/// `(f_vi, f_vj, base)` with `base(d) = fstar(d) / 2` and
/// `f_vi(d) = f_vj(d) = fstar(2 d)`, so that
/// `reduced(base, f_vi, f_vj, Between)` reproduces `fstar`.
///
/// With equal edge laws the balance point is the midpoint, so the virtual
/// term is `g_tilde(d) = ft_vi(d/2) = ft_star(d)/2` exactly.
pub fn lift_reduced_law(
    fstar: &InteractionLaw,
) -> Result<(InteractionLaw, InteractionLaw, InteractionLaw)> {
    if !fstar.class_f() {
        return Err(Error::NotClassF("lift needs a class-F law".into()));
    }
    let f_vi = InteractionLaw::rescaled(2.0, fstar.clone());
    let base = InteractionLaw::gain(0.5, fstar.clone());
    Ok((f_vi.clone(), f_vi, base))
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        let half = 0.5 * tol;
        Ok(simpson_step(f, a, m, fa, flm, fm, left, half, depth - 1)?
            + simpson_step(f, m, b, fm, frm, fb, right, half, depth - 1)?)
    }
}

/// One interaction law per edge of a graph.
#[derive(Debug, Clone)]
pub struct Ensemble {
    laws: BTreeMap<Edge, InteractionLaw>,
}

impl Ensemble {
    /// Build from an explicit map; the key set must equal the graph's edges.
    pub fn new(graph: &TlGraph, laws: BTreeMap<Edge, InteractionLaw>) -> Result<Self> {
        for e in graph.edges() {
            if !laws.contains_key(e) {
                return Err(Error::Spec(format!("edge {e:?} has no law")));
            }
        }
        for e in laws.keys() {
            if !graph.edges().contains(e) {
                return Err(Error::Spec(format!("law given for non-edge {e:?}")));
            }
        }
        Ok(Self { laws })
    }

    /// Build by evaluating `make` on every edge of the graph.
    pub fn from_fn(graph: &TlGraph, mut make: impl FnMut(Edge) -> InteractionLaw) -> Self {
        Self {
            laws: graph.edges().iter().map(|&e| (e, make(e))).collect(),
        }
    }

    /// Same law on every edge.
    pub fn uniform(graph: &TlGraph, law: &InteractionLaw) -> Self {
        Self::from_fn(graph, |_| law.clone())
    }

    pub fn law(&self, a: usize, b: usize) -> &InteractionLaw {
        &self.laws[&crate::graph::edge(a, b)]
    }

    pub fn get(&self, e: Edge) -> Option<&InteractionLaw> {
        self.laws.get(&e)
    }

    pub fn replace(&mut self, e: Edge, law: InteractionLaw) {
        self.laws.insert(e, law);
    }

    pub fn remove(&mut self, e: Edge) -> Option<InteractionLaw> {
        self.laws.remove(&e)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Edge, &InteractionLaw)> {
        self.laws.iter()
    }

    /// Admissible means every edge law is class F.
    pub fn is_admissible(&self) -> bool {
        self.laws.values().all(|l| l.class_f())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn spring_eval_examples() {
        let s11 = InteractionLaw::spring(1.0, 1.0);
        let e = s11.eval(1.0).unwrap();
        assert_eq!((e.f, e.f_tilde, e.f_tilde_prime), (0.0, 0.0, 2.0));
        let e = s11.eval(2.0).unwrap();
        assert_eq!((e.f, e.f_tilde, e.f_tilde_prime), (0.75, 1.5, 1.25));
        let e = InteractionLaw::spring(1.0, 4.0).eval(2.0).unwrap();
        assert_eq!((e.f, e.f_tilde, e.f_tilde_prime), (0.0, 0.0, 2.0));
    }

    #[test]
    fn eval_rejects_nonpositive_distance() {
        let s = InteractionLaw::spring(1.0, 1.0);
        assert!(matches!(s.eval(0.0), Err(Error::NonPositiveDistance(_))));
        assert!(matches!(s.eval(-1.0), Err(Error::NonPositiveDistance(_))));
    }

    #[test]
    fn rest_lengths() {
        assert_close(
            InteractionLaw::spring(1.0, 1.0).rest_length().unwrap(),
            1.0,
            0.0,
        );
        assert_close(
            InteractionLaw::spring(1.0, 4.0).rest_length().unwrap(),
            2.0,
            0.0,
        );
        assert_close(
            InteractionLaw::spring(2.0, 0.25).rest_length().unwrap(),
            0.5,
            0.0,
        );
        // root-solve path through a sum
        let s = InteractionLaw::sum(
            &InteractionLaw::spring(1.0, 1.0),
            &InteractionLaw::spring(1.0, 1.0),
        );
        let r = s.rest_length().unwrap();
        assert!(s.f_tilde(r).unwrap().abs() <= 1e-12);
        assert_close(r, 1.0, 1e-12);
    }

    #[test]
    fn class_f_validation() {
        let grid = default_probe_grid();
        assert!(InteractionLaw::spring(1.0, 1.0)
            .validate_class_f(&grid)
            .pass());

        // ft = -1/d: monotone, but no zero -> fails C1
        let no_zero = InteractionLaw::custom("neg_inv", |d| -1.0 / d, |d| 1.0 / (d * d));
        let r = no_zero.validate_class_f(&grid);
        assert!(r.monotone);
        assert_eq!(r.sign_changes, 0);
        assert!(!r.c1());
        assert!(r.c2());

        // ft = d - 1: C1 fine, but bounded near zero -> fails C2
        let bounded = InteractionLaw::custom("affine", |d| d - 1.0, |_| 1.0);
        let r = bounded.validate_class_f(&grid);
        assert!(r.c1());
        assert!(!r.c2());
    }

    #[test]
    fn virtual_interaction_symmetric_between() {
        let s = InteractionLaw::spring(1.0, 1.0);
        let v = virtual_interaction(&s, &s, ReductionCase::Between, 2.0).unwrap();
        assert_close(v.d_vi, 1.0, 1e-13);
        assert_close(v.d_vj, 1.0, 1e-13);
        assert_close(v.g_tilde, 0.0, 1e-13);
        assert_close(v.g_tilde_prime, 1.0, 1e-13); // 2*2/(2+2)
    }

    #[test]
    fn virtual_interaction_rest_lengths_between() {
        let a = InteractionLaw::spring(1.0, 1.0);
        let b = InteractionLaw::spring(1.0, 4.0);
        let v = virtual_interaction(&a, &b, ReductionCase::Between, 3.0).unwrap();
        assert_close(v.d_vi, 1.0, 1e-12);
        assert_close(v.d_vj, 2.0, 1e-12);
        assert_close(v.g_tilde, 0.0, 1e-13);
        assert_close(v.g_tilde_prime, 1.0, 1e-12);
    }

    /// Frozen from an independent high-precision bisection of the balance
    /// system ft(t) = t - 1/t = (2.5-t) - 4/(2.5-t).
    #[test]
    fn virtual_interaction_asymmetric_between() {
        let a = InteractionLaw::spring(1.0, 1.0);
        let b = InteractionLaw::spring(1.0, 4.0);
        let v = virtual_interaction(&a, &b, ReductionCase::Between, 2.5).unwrap();
        assert_close(v.d_vi, 0.7593942494120881, 1e-12);
        assert_close(v.g_tilde, -0.5574447979920573, 1e-12);
        assert_close(v.g_tilde_prime, 1.255111291705172, 1e-12);
        // balance residual in f_tilde units
        let res = a.f_tilde(v.d_vi).unwrap() - b.f_tilde(v.d_vj).unwrap();
        assert!(res.abs() <= 1e-12);
    }

    #[test]
    fn virtual_interaction_outside_cases() {
        let a = InteractionLaw::spring(1.0, 1.0);
        let b = InteractionLaw::spring(1.0, 4.0);
        for case in [ReductionCase::LeftOutside, ReductionCase::RightOutside] {
            let v = virtual_interaction(&a, &b, case, 0.8).unwrap();
            // balance: ft_vi(d_vi) + ft_vj(d_vj) = 0
            let res = a.f_tilde(v.d_vi).unwrap() + b.f_tilde(v.d_vj).unwrap();
            assert!(res.abs() <= 1e-12, "case {case:?}: residual {res}");
            match case {
                ReductionCase::LeftOutside => assert_close(v.d_vj - v.d_vi, 0.8, 1e-12),
                ReductionCase::RightOutside => assert_close(v.d_vi - v.d_vj, 0.8, 1e-12),
                _ => unreachable!(),
            }
            // finite small-distance limit
            let vv = virtual_interaction(&a, &b, case, 1e-6).unwrap();
            assert!(vv.g_tilde.is_finite());
        }
    }

    #[test]
    fn virtual_interaction_derivative_matches_finite_difference() {
        let a = InteractionLaw::spring(1.3, 0.7);
        let b = InteractionLaw::power(0.9, 1.5, 2.0);
        let h = 1e-6;
        for case in ReductionCase::ALL {
            for d in [0.5, 1.0, 2.7] {
                let v = virtual_interaction(&a, &b, case, d).unwrap();
                let vp = virtual_interaction(&a, &b, case, d + h).unwrap();
                let vm = virtual_interaction(&a, &b, case, d - h).unwrap();
                let fd = (vp.g_tilde - vm.g_tilde) / (2.0 * h);
                let rel = (v.g_tilde_prime - fd).abs() / v.g_tilde_prime.abs().max(1e-12);
                assert!(
                    rel <= 1e-5,
                    "case {case:?} d {d}: {} vs fd {fd}",
                    v.g_tilde_prime
                );
            }
        }
    }

    #[test]
    fn reduced_law_between_values() {
        let s = InteractionLaw::spring(1.0, 1.0);
        let star = InteractionLaw::reduced(&s, &s, &s, ReductionCase::Between).unwrap();
        assert!(star.class_f());
        assert_close(star.f_tilde(2.0).unwrap(), 1.5, 1e-12);
        // equilibrium of the reduced pair at sqrt(2)
        assert_close(star.f_tilde(2f64.sqrt()).unwrap(), 0.0, 1e-12);
        for d in [0.3, 0.9, 1.7, 4.2] {
            assert!(star.eval(d).unwrap().f_tilde_prime > 0.0);
        }
    }

    #[test]
    fn case1_virtual_term_is_class_f_like() {
        let a = InteractionLaw::spring(1.1, 0.8);
        let b = InteractionLaw::spring(0.7, 2.5);
        let mut prev = f64::NEG_INFINITY;
        let mut signs = 0;
        let grid = log_grid(1e-4, 30.0, 120);
        for &d in &grid {
            let v = virtual_interaction(&a, &b, ReductionCase::Between, d).unwrap();
            assert!(v.g_tilde_prime > 0.0);
            if prev.is_finite() && prev < 0.0 && v.g_tilde >= 0.0 {
                signs += 1;
            }
            assert!(v.g_tilde > prev);
            prev = v.g_tilde;
        }
        assert_eq!(signs, 1);
    }

    #[test]
    fn lift_roundtrip() {
        let star = InteractionLaw::spring(1.0, 1.0);
        let (f_vi, f_vj, base) = lift_reduced_law(&star).unwrap();
        assert_close(f_vi.f_tilde(1.0).unwrap(), 0.75, 1e-15);
        let rebuilt = InteractionLaw::reduced(&base, &f_vi, &f_vj, ReductionCase::Between).unwrap();
        for d in [0.5, 1.0, 2.0, 5.0] {
            let want = star.f_tilde(d).unwrap();
            let got = rebuilt.f_tilde(d).unwrap();
            assert_close(got, want, 1e-10);
        }
        assert_close(
            rebuilt.rest_length().unwrap(),
            star.rest_length().unwrap(),
            1e-10,
        );
    }

    #[test]
    fn sum_and_bump_examples() {
        let s = InteractionLaw::spring(1.0, 1.0);
        let zero = InteractionLaw::from_bump(make_bump(1.0, 0.0, 0.0, 0.2).unwrap());
        let same = InteractionLaw::sum(&s, &zero);
        for d in [0.5, 1.0, 3.0] {
            assert_close(same.f_tilde(d).unwrap(), s.f_tilde(d).unwrap(), 1e-15);
        }
        assert!(same.class_f());

        let double = InteractionLaw::sum(&s, &s);
        assert_close(double.f_tilde(2.0).unwrap(), 2.0 * 1.5, 1e-15);
        assert!(double.class_f());

        let bump = InteractionLaw::from_bump(make_bump(1.0, 0.1, 0.0, 0.2).unwrap());
        let perturbed = InteractionLaw::sum(&s, &bump);
        assert_close(perturbed.f_tilde(1.0).unwrap(), 0.1, 1e-15);
    }

    #[test]
    fn bump_contract() {
        let b = make_bump(1.0, 0.1, 0.5, 0.2).unwrap();
        let law = InteractionLaw::from_bump(b);
        let e = law.eval(1.0).unwrap();
        assert_close(e.f_tilde, 0.1, 1e-15);
        assert_close(e.f_tilde_prime, 0.5, 1e-12);
        assert_eq!(law.f_tilde(0.8).unwrap(), 0.0);
        assert_eq!(law.f_tilde(1.2).unwrap(), 0.0);
        // C1 joins: value and slope continuous at the seams
        for d in [0.8 + 1e-9, 1.2 - 1e-9] {
            assert!(law.f_tilde(d).unwrap().abs() < 1e-8);
        }
        assert!(matches!(
            make_bump(0.1, 1.0, 1.0, 0.2),
            Err(Error::InvalidSupport { .. })
        ));
    }

    #[test]
    fn bump_potential_matches_quadrature() {
        let b = make_bump(1.0, 0.3, -0.2, 0.4).unwrap();
        let law = InteractionLaw::from_bump(b);
        for d in [0.5, 0.9, 1.1, 2.0] {
            let closed = law.pair_potential(d).unwrap();
            let quad = adaptive_simpson(&|x| law.f_tilde(x), 1.0, d, 1e-12).unwrap();
            assert_close(closed, quad, 1e-10);
        }
    }

    #[test]
    fn spring_potential_closed_form() {
        let s = InteractionLaw::spring(1.0, 1.0);
        assert_close(s.pair_potential(2.0).unwrap(), 1.5 - 2f64.ln(), 1e-15);
        assert_eq!(s.pair_potential(1.0).unwrap(), 0.0);
    }

    #[test]
    fn reduced_potential_uses_quadrature() {
        let s = InteractionLaw::spring(1.0, 1.0);
        let star = InteractionLaw::reduced(&s, &s, &s, ReductionCase::Between).unwrap();
        assert!(!star.has_closed_potential());
        // ft*(d) = ft(d) + ft(d/2) by symmetry, so phi* has a closed form to
        // compare against: phi(d) + 2*(phi(d/2) - phi(1/2))
        let want = s.pair_potential(3.0).unwrap()
            + 2.0 * (s.pair_potential(1.5).unwrap() - s.pair_potential(0.5).unwrap());
        let got = star.pair_potential(3.0).unwrap();
        assert_close(got, want, 1e-9);
    }

    #[test]
    fn small_bump_keeps_class_f() {
        let s = InteractionLaw::spring(1.0, 1.0);
        // min ft' on [0.8, 1.2] is ft'(1.2) = 1 + 1/1.44 ~ 1.69; bump slope
        // magnitude is bounded by 1.5*value/width = 0.75
        let bump = InteractionLaw::from_bump(make_bump(1.0, 0.1, 0.0, 0.2).unwrap());
        let sum = InteractionLaw::sum(&s, &bump);
        assert!(sum.class_f());
        let grid = log_grid(0.75, 1.25, 400);
        let mut prev = f64::NEG_INFINITY;
        for &d in &grid {
            let v = sum.f_tilde(d).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_law() -> impl Strategy<Value = InteractionLaw> {
            prop_oneof![
                (0.5f64..2.0, 0.25f64..4.0).prop_map(|(k, c)| InteractionLaw::spring(k, c)),
                (0.5f64..2.0, 0.5f64..2.0, 0.25f64..4.0)
                    .prop_map(|(k, a, c)| InteractionLaw::power(k, a, c)),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

            #[test]
            fn f_tilde_consistency(law in arb_law(), d in 0.05f64..20.0) {
                let e = law.eval(d).unwrap();
                let rel = (e.f_tilde - d * e.f).abs() / e.f_tilde.abs().max(1.0);
                prop_assert!(rel <= CONSISTENCY_TOL);
            }

            #[test]
            fn rest_length_is_a_zero(law in arb_law()) {
                let r = law.rest_length().unwrap();
                prop_assert!(law.f_tilde(r).unwrap().abs() <= 1e-12);
            }

            #[test]
            fn balance_residual_small(a in arb_law(), b in arb_law(), d in 0.1f64..10.0) {
                for case in ReductionCase::ALL {
                    let v = virtual_interaction(&a, &b, case, d).unwrap();
                    let res = match case {
                        ReductionCase::Between =>
                            a.f_tilde(v.d_vi).unwrap() - b.f_tilde(v.d_vj).unwrap(),
                        _ => a.f_tilde(v.d_vi).unwrap() + b.f_tilde(v.d_vj).unwrap(),
                    };
                    prop_assert!(res.abs() <= 1e-12);
                    prop_assert!(v.g_tilde_prime > 0.0);
                }
            }

            #[test]
            fn lift_roundtrip_generic(law in arb_law()) {
                let (f_vi, f_vj, base) = lift_reduced_law(&law).unwrap();
                let rebuilt =
                    InteractionLaw::reduced(&base, &f_vi, &f_vj, ReductionCase::Between).unwrap();
                for &d in &log_grid(0.1, 10.0, 25) {
                    let err = (rebuilt.f_tilde(d).unwrap() - law.f_tilde(d).unwrap()).abs();
                    prop_assert!(err <= 1e-10, "err {err} at d {d}");
                }
            }
        }
    }
}
