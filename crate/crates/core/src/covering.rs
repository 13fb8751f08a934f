//! Single covering relations `M ⟹ N` for maps in product form
//! `(x, y) ↦ (U(x), V(y))` in chart coordinates, and explicit persistence
//! radii for them.

use serde::Serialize;
use thiserror::Error;

use crate::degree::{self, DegreeError, DegreeValue};
use crate::geometry::stretch::Stretch;
use crate::geometry::{max_stretch, min_stretch, CenterScale, GeometryError, HSet, PiecewiseAffineMap};

/// Strict margin required by every certificate inequality.
pub const MARGIN_TOL: f64 = 1e-12;

/// The chart-coordinate form `(U(x), V(y))` of a map between two h-sets.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductFormMap {
    pub u: PiecewiseAffineMap,
    pub v: Option<PiecewiseAffineMap>,
}

impl ProductFormMap {
    pub fn new(u: PiecewiseAffineMap, v: Option<PiecewiseAffineMap>) -> Self {
        Self { u, v }
    }

    pub fn unstable_only(u: PiecewiseAffineMap) -> Self {
        Self { u, v: None }
    }

    pub fn dim_u(&self) -> usize {
        self.u.dim_in()
    }

    pub fn dim_s(&self) -> usize {
        self.v.as_ref().map_or(0, |v| v.dim_in())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Pass only if both pass; any failure dominates inconclusiveness.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }

    /// Classifies a strict inequality `value > 0` given bracketing ends.
    pub fn from_margin(lower: f64, upper: f64) -> Verdict {
        if lower > MARGIN_TOL {
            Verdict::Pass
        } else if upper <= MARGIN_TOL {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringCertificate {
    pub source_id: String,
    pub target_id: String,
    pub degree: DegreeValue,
    #[serde(serialize_with = "crate::report::real::f64")]
    pub unstable_margin: f64,
    #[serde(serialize_with = "crate::report::real::f64")]
    pub stable_margin: f64,
    #[serde(serialize_with = "crate::report::real::f64")]
    pub stable_radius: f64,
    #[serde(serialize_with = "crate::report::real::f64")]
    pub admissible_eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CoveringOutcome {
    Certified(CoveringCertificate),
    Failed(Vec<String>),
    Inconclusive(Vec<String>),
}

impl CoveringOutcome {
    pub fn verdict(&self) -> Verdict {
        match self {
            CoveringOutcome::Certified(_) => Verdict::Pass,
            CoveringOutcome::Failed(_) => Verdict::Fail,
            CoveringOutcome::Inconclusive(_) => Verdict::Inconclusive,
        }
    }

    pub fn certificate(&self) -> Option<&CoveringCertificate> {
        match self {
            CoveringOutcome::Certified(c) => Some(c),
            _ => None,
        }
    }

    pub fn messages(&self) -> &[String] {
        match self {
            CoveringOutcome::Certified(_) => &[],
            CoveringOutcome::Failed(m) | CoveringOutcome::Inconclusive(m) => m,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoveringError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("nonpositive margin {0}")]
    NonPositiveMargin(f64),
    #[error(transparent)]
    Degree(#[from] DegreeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Checks `min_stretch(U, p_u) > 1`, `deg(U, p_u) ≠ 0` and
/// `max_stretch(V, p_s) < r`.
///
/// Failure messages name each violated inequality with the computed value.
/// The returned certificate's `admissible_eps` uses unit chart and zero
/// coupling factors; callers with more context recompute it through
/// [`persistence_bound`].
pub fn check_covering(
    source: &HSet,
    target_id: &str,
    target: &CenterScale,
    f: &ProductFormMap,
    grid: usize,
) -> Result<CoveringOutcome, CoveringError> {
    if f.dim_u() != source.dim_u() || f.dim_s() != source.dim_s() {
        return Err(CoveringError::Dimension(format!(
            "map splits as ({}, {}), source {} as ({}, {})",
            f.dim_u(),
            f.dim_s(),
            source.id,
            source.dim_u(),
            source.dim_s()
        )));
    }
    if target.dim_u() != f.dim_u() || target.dim_s() != f.dim_s() {
        return Err(CoveringError::Dimension(format!(
            "target center splits as ({}, {})",
            target.dim_u(),
            target.dim_s()
        )));
    }
    let mut failed = Vec::new();
    let mut unsure = Vec::new();

    let lo = min_stretch(&f.u, &target.p_u, grid)?;
    let unstable = Verdict::from_margin(lo.lower - 1.0, lo.upper - 1.0);
    match unstable {
        Verdict::Fail => failed.push(format!("min stretch {} ≤ 1", lo.upper)),
        Verdict::Inconclusive => unsure.push(format!(
            "min stretch in [{}, {}] straddles 1",
            lo.lower, lo.upper
        )),
        Verdict::Pass => {}
    }
    let deg = if unstable == Verdict::Pass {
        let d = degree::degree(&f.u, &target.p_u)?;
        if d.is_zero() {
            failed.push("degree 0".to_string());
        }
        Some(d)
    } else {
        None
    };

    let (stable_margin, hi) = match &f.v {
        None => (f64::INFINITY, None),
        Some(v) => {
            let hi = max_stretch(v, &target.p_s)?;
            (target.r - hi.upper, Some(hi))
        }
    };
    if let Some(hi) = hi {
        if !(stable_margin > MARGIN_TOL) {
            failed.push(format!("max stretch {} ≥ {}", hi.upper, target.r));
        }
    }

    if !failed.is_empty() {
        return Ok(CoveringOutcome::Failed(failed));
    }
    if !unsure.is_empty() {
        return Ok(CoveringOutcome::Inconclusive(unsure));
    }
    let mut cert = CoveringCertificate {
        source_id: source.id.clone(),
        target_id: target_id.to_string(),
        degree: deg.expect("degree computed on pass"),
        unstable_margin: lo.lower - 1.0,
        stable_margin,
        stable_radius: target.r,
        admissible_eps: 0.0,
    };
    cert.admissible_eps = persistence_bound(&cert, 1.0, 0.0)?;
    Ok(CoveringOutcome::Certified(cert))
}

/// `ε* = min(unstable_margin, stable_margin · r) / (chart_lip · (1 + coupling_lip))`.
///
/// A perturbation of `T` and `A` by less than `ε*` in sup-norm moves every
/// chart-coordinate value by less than `chart_lip · (1 + coupling_lip) · ε*`,
/// which the margins absorb.
pub fn persistence_bound(
    cert: &CoveringCertificate,
    chart_lip: f64,
    coupling_lip: f64,
) -> Result<f64, CoveringError> {
    eps_from_margins(cert.unstable_margin, cert.stable_margin, cert.stable_radius, chart_lip, coupling_lip)
}

pub(crate) fn eps_from_margins(
    unstable_margin: f64,
    stable_margin: f64,
    radius: f64,
    chart_lip: f64,
    coupling_lip: f64,
) -> Result<f64, CoveringError> {
    if !(unstable_margin > 0.0) {
        return Err(CoveringError::NonPositiveMargin(unstable_margin));
    }
    if !(stable_margin > 0.0) {
        return Err(CoveringError::NonPositiveMargin(stable_margin));
    }
    let stable = if stable_margin.is_infinite() {
        f64::INFINITY
    } else {
        stable_margin * radius
    };
    Ok(unstable_margin.min(stable) / (chart_lip * (1.0 + coupling_lip)))
}

/// Classification of the strict inequality `lower bound > threshold` on a
/// stretch, exposed for the network checkers.
pub fn classify_min(s: &Stretch, threshold: f64) -> Verdict {
    Verdict::from_margin(s.lower - threshold, s.upper - threshold)
}
