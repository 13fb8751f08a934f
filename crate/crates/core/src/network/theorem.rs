//! Entrywise checks of the two network inequalities over the nonzero entries
//! of `⊗ W_k`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::kronecker::{nonzero_entries, tau_search, EntryIndex};
use super::{CouplingKind, FormKey, NetworkError, NetworkSpec};
use crate::covering::{check_covering, eps_from_margins, CoveringCertificate, Verdict};
use crate::degree::{self, degree_compose_affine, degree_product, DegreeValue};
use crate::geometry::polytope::unit_box;
use crate::geometry::stretch::DEFAULT_GRID;
use crate::geometry::{max_stretch, min_stretch, CenterScale, PiecewiseAffineMap};
use crate::symbolic::{entropy_lower_bound, lcm_period};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Theorem {
    #[serde(rename = "one")]
    One,
    #[serde(rename = "two")]
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    /// Points per axis for sampled minimum stretches (only used when the
    /// exact enumeration is too large).
    pub grid: usize,
    /// Whether to validate the spec first.
    pub validate: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            validate: true,
        }
    }
}

/// Row `k` of one entry: the chosen `τ(k)` and both margins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowReport {
    pub row: usize,
    pub tau: Option<usize>,
    /// `min - Σ_{l≠τ(k)} max - 1`, bracketed.
    #[serde(serialize_with = "crate::report::real::pair")]
    pub unstable_margin: (f64, f64),
    /// `r_k` less the exact stable deviation; `+∞` when `s = 0`.
    #[serde(serialize_with = "crate::report::real::f64")]
    pub stable_margin: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntryReport {
    pub index: EntryIndex,
    pub tau: Option<Vec<usize>>,
    pub verdict: Verdict,
    pub certificate: Option<CoveringCertificate>,
    /// Smallest row slack: negative on failure.
    #[serde(serialize_with = "crate::report::real::f64")]
    pub slack: f64,
    pub rows: Vec<RowReport>,
    pub messages: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremReport {
    pub theorem: Theorem,
    pub entries: Vec<EntryReport>,
    pub verdict: Verdict,
    #[serde(serialize_with = "crate::report::real::opt")]
    pub global_eps: Option<f64>,
    /// Position in `entries` of the entry that decides the verdict: the one
    /// with the smallest ε on a pass, the worst slack otherwise.
    pub binding: Option<usize>,
    #[serde(serialize_with = "crate::report::real::opt")]
    pub entropy_bound: Option<f64>,
    pub period: Option<usize>,
    #[serde(serialize_with = "crate::report::real::f64")]
    pub chart_lip: f64,
    #[serde(serialize_with = "crate::report::real::f64")]
    pub coupling_lip: f64,
    pub messages: Vec<String>,
}

impl TheoremReport {
    pub fn binding_entry(&self) -> Option<&EntryReport> {
        self.binding.map(|b| &self.entries[b])
    }
}

/// Hypotheses of the periodic-point theorem: type I structure, permutation
/// transitions, and for every nonzero Kronecker entry a `τ` satisfying the
/// unstable and stable inequalities.
pub fn theorem1_check(spec: &NetworkSpec, opts: &CheckOptions) -> Result<TheoremReport, NetworkError> {
    if spec.kind() != CouplingKind::TypeI {
        return Err(NetworkError::WrongKind(CouplingKind::TypeI));
    }
    for (k, node) in spec.nodes.iter().enumerate() {
        if !node.transition.is_permutation() {
            return Err(NetworkError::NotPermutation(k));
        }
    }
    let mut report = run(spec, Theorem::One, opts)?;
    if report.verdict == Verdict::Pass {
        let dims: Vec<usize> = spec.nodes.iter().map(|n| n.transition.dim()).collect();
        report.period = Some(lcm_period(&dims));
    }
    Ok(report)
}

/// Hypotheses of the entropy theorem for a type II network.
pub fn theorem2_check(spec: &NetworkSpec, opts: &CheckOptions) -> Result<TheoremReport, NetworkError> {
    if spec.kind() != CouplingKind::TypeII {
        return Err(NetworkError::WrongKind(CouplingKind::TypeII));
    }
    if let Some(k) = spec.nodes.iter().position(|n| n.unified.is_none()) {
        return Err(NetworkError::MissingUnified(k));
    }
    let mut report = run(spec, Theorem::Two, opts)?;
    if report.verdict == Verdict::Pass {
        report.entropy_bound = Some(entropy_lower_bound(&spec.transitions()));
    }
    Ok(report)
}

/// Per node and per form key: the form's unstable and stable parts.
struct NodeForms<'a> {
    u: &'a PiecewiseAffineMap,
    max_u: f64,
    /// Componentwise image bounds of `V` over the closed unit ball.
    v_bounds: Vec<(f64, f64)>,
}

fn run(spec: &NetworkSpec, theorem: Theorem, opts: &CheckOptions) -> Result<TheoremReport, NetworkError> {
    let mut messages = Vec::new();
    let mut verdict = Verdict::Pass;
    if opts.validate {
        let v = spec.validate();
        if !v.is_valid() {
            return Err(NetworkError::Invalid(v));
        }
        for issue in &v.inconclusive {
            messages.push(format!("inconclusive structure: {issue}"));
            verdict = Verdict::Inconclusive;
        }
    }
    let kind = spec.kind();
    let (u, s) = (spec.dim_u, spec.dim_s);

    // every single covering relation of every node
    for (k, node) in spec.nodes.iter().enumerate() {
        for i in 0..node.transition.dim() {
            for j in node.transition.successors(i) {
                let key = key_for(kind, i, j);
                let form = node
                    .form_for(key)
                    .ok_or(NetworkError::MissingForm { node: k, key })?;
                let source = match (&node.unified, kind) {
                    (Some(n), CouplingKind::TypeII) => n.member_hset(i)?,
                    _ => node.hsets[i].clone(),
                };
                let target = node.target_center(kind, j, u, s);
                let out = check_covering(&source, &node.hsets[j].id, &target, form, opts.grid)?;
                let v = out.verdict();
                if v != Verdict::Pass {
                    for m in out.messages() {
                        messages.push(format!("node {} covering {} ⟹ {}: {m}", k + 1, i + 1, j + 1));
                    }
                }
                verdict = verdict.and(v);
            }
        }
    }

    let forms: Vec<std::collections::BTreeMap<FormKey, NodeForms>> = spec
        .nodes
        .iter()
        .map(|node| {
            node.chart_forms
                .iter()
                .map(|(key, f)| {
                    let max_u = max_stretch(&f.u, &vec![0.0; u])?.upper;
                    let v_bounds = match &f.v {
                        Some(v) => v
                            .image_bounds(&unit_box(s))
                            .ok_or_else(|| NetworkError::Spec("stable map undefined on the unit ball".into()))?,
                        None => Vec::new(),
                    };
                    Ok((*key, NodeForms { u: &f.u, max_u, v_bounds }))
                })
                .collect::<Result<_, NetworkError>>()
        })
        .collect::<Result<_, _>>()?;

    let chart_lip = spec
        .nodes
        .iter()
        .flat_map(|n| match (&n.unified, kind) {
            (Some(un), CouplingKind::TypeII) => vec![un.chart.lipschitz()],
            _ => n.hsets.iter().map(|h| h.chart.lipschitz()).collect(),
        })
        .fold(0.0, f64::max);
    let coupling_lip = spec.coupling.ambient.lipschitz();

    let entries_idx = nonzero_entries(&spec.transitions());
    let entries: Vec<EntryReport> = entries_idx
        .into_par_iter()
        .map(|e| check_entry(spec, &forms, e, opts.grid, chart_lip, coupling_lip))
        .collect::<Result<_, _>>()?;

    for e in &entries {
        verdict = verdict.and(e.verdict);
    }
    let binding = if verdict == Verdict::Pass {
        entries
            .iter()
            .enumerate()
            .filter_map(|(n, e)| e.certificate.as_ref().map(|c| (n, c.admissible_eps)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(n, _)| n)
    } else {
        entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.verdict != Verdict::Pass)
            .min_by(|a, b| a.1.slack.total_cmp(&b.1.slack))
            .map(|(n, _)| n)
    };
    let global_eps = (verdict == Verdict::Pass)
        .then(|| {
            entries
                .iter()
                .filter_map(|e| e.certificate.as_ref().map(|c| c.admissible_eps))
                .fold(f64::INFINITY, f64::min)
        })
        .filter(|e| e.is_finite() || entries.is_empty());
    Ok(TheoremReport {
        theorem,
        entries,
        verdict,
        global_eps,
        binding,
        entropy_bound: None,
        period: None,
        chart_lip,
        coupling_lip,
        messages,
    })
}

fn key_for(kind: CouplingKind, i: usize, j: usize) -> FormKey {
    match kind {
        CouplingKind::TypeI => FormKey::Pair(i, j),
        CouplingKind::TypeII => FormKey::Source(i),
    }
}

/// Per-cell state of the feasibility matrix.
#[derive(Clone)]
struct Cell {
    verdict: Verdict,
    margin: (f64, f64),
    degree: Option<DegreeValue>,
    note: Option<String>,
}

fn check_entry(
    spec: &NetworkSpec,
    forms: &[std::collections::BTreeMap<FormKey, NodeForms>],
    e: EntryIndex,
    grid: usize,
    chart_lip: f64,
    coupling_lip: f64,
) -> Result<EntryReport, NetworkError> {
    let d = spec.d();
    let kind = spec.kind();
    let (u, s) = (spec.dim_u, spec.dim_s);
    let a: &DMatrix<f64> = spec.coupling.matrix_for(&e);
    let node_form = |l: usize| -> Result<&NodeForms, NetworkError> {
        let key = key_for(kind, e.i[l], e.j[l]);
        forms[l].get(&key).ok_or(NetworkError::MissingForm { node: l, key })
    };
    let targets: Vec<CenterScale> = (0..d)
        .map(|k| spec.nodes[k].target_center(kind, e.j[k], u, s))
        .collect();

    let mut messages = Vec::new();
    let mut cells = vec![vec![None::<Cell>; d]; d];
    for k in 0..d {
        let s_k: f64 = (0..d)
            .map(|l| Ok(a[(k, l)].abs() * node_form(l)?.max_u))
            .sum::<Result<f64, NetworkError>>()?;
        for m in 0..d {
            let akm = a[(k, m)];
            if akm == 0.0 {
                cells[k][m] = Some(Cell {
                    verdict: Verdict::Fail,
                    margin: (f64::NEG_INFINITY, f64::NEG_INFINITY),
                    degree: None,
                    note: None,
                });
                continue;
            }
            let f = node_form(m)?;
            let scaled = f.u.scaled(akm);
            let lo = min_stretch(&scaled, &targets[k].p_u, grid)?;
            let rest = s_k - akm.abs() * f.max_u;
            let margin = (lo.lower - rest - 1.0, lo.upper - rest - 1.0);
            let mut cell = Cell {
                verdict: Verdict::from_margin(margin.0, margin.1),
                margin,
                degree: None,
                note: None,
            };
            if cell.verdict == Verdict::Pass {
                match degree::degree(&scaled, &targets[k].p_u) {
                    Ok(dv) if dv.is_zero() => {
                        cell.verdict = Verdict::Fail;
                        cell.note = Some(format!("row {} with τ = {}: degree 0", k + 1, m + 1));
                    }
                    Ok(dv) => cell.degree = Some(dv),
                    Err(err) => {
                        cell.verdict = Verdict::Inconclusive;
                        cell.note = Some(format!("row {} with τ = {}: {err}", k + 1, m + 1));
                    }
                }
            }
            cells[k][m] = Some(cell);
        }
    }
    let cells: Vec<Vec<Cell>> = cells
        .into_iter()
        .map(|r| r.into_iter().map(|c| c.expect("filled")).collect())
        .collect();

    let pass: Vec<Vec<bool>> = cells
        .iter()
        .map(|r| r.iter().map(|c| c.verdict == Verdict::Pass).collect())
        .collect();
    let maybe: Vec<Vec<bool>> = cells
        .iter()
        .map(|r| r.iter().map(|c| c.verdict != Verdict::Fail).collect())
        .collect();
    let tau = tau_search(&pass);
    let unstable = match &tau {
        Some(_) => Verdict::Pass,
        None if tau_search(&maybe).is_some() => Verdict::Inconclusive,
        None => Verdict::Fail,
    };
    if tau.is_none() {
        for row in &cells {
            for c in row {
                if let Some(n) = &c.note {
                    messages.push(n.clone());
                }
            }
        }
        if unstable == Verdict::Fail {
            messages.push("no permutation τ satisfies every unstable row".into());
        } else {
            messages.push("a permutation τ may exist but the bounds cannot confirm it".into());
        }
    }

    // stable deviation, exact and separable
    let mut stable_margins = vec![f64::INFINITY; d];
    let mut stable = Verdict::Pass;
    if s > 0 {
        for k in 0..d {
            let mut hi = vec![0.0; s];
            let mut lo = vec![0.0; s];
            for l in 0..d {
                let akl = a[(k, l)];
                if akl == 0.0 {
                    continue;
                }
                for (c, &(b0, b1)) in node_form(l)?.v_bounds.iter().enumerate() {
                    let (x, y) = (akl * b0, akl * b1);
                    lo[c] += x.min(y);
                    hi[c] += x.max(y);
                }
            }
            let ps = &targets[k].p_s;
            let dev = (0..s)
                .map(|c| (hi[c] - ps[c]).max(ps[c] - lo[c]))
                .fold(0.0, f64::max);
            stable_margins[k] = targets[k].r - dev;
            if !(stable_margins[k] > crate::covering::MARGIN_TOL) {
                stable = Verdict::Fail;
                messages.push(format!(
                    "row {}: stable deviation {} ≥ radius {}",
                    k + 1,
                    dev,
                    targets[k].r
                ));
            }
        }
    }

    let rows: Vec<RowReport> = (0..d)
        .map(|k| {
            let (t, margin) = match &tau {
                Some(t) => (Some(t[k]), cells[k][t[k]].margin),
                None => {
                    let best = cells[k]
                        .iter()
                        .map(|c| c.margin)
                        .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |a, b| (a.0.max(b.0), a.1.max(b.1)));
                    (None, best)
                }
            };
            let row_stable = if stable_margins[k] > crate::covering::MARGIN_TOL {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            let row_unstable = Verdict::from_margin(margin.0, margin.1);
            RowReport {
                row: k,
                tau: t,
                unstable_margin: margin,
                stable_margin: stable_margins[k],
                verdict: row_unstable.and(row_stable),
            }
        })
        .collect();
    let slack = rows
        .iter()
        .map(|r| r.unstable_margin.1.min(r.stable_margin))
        .fold(f64::INFINITY, f64::min);

    let verdict = unstable.and(stable);
    let certificate = if verdict == Verdict::Pass {
        let t = tau.as_ref().expect("τ on pass");
        let parts: Vec<DegreeValue> = (0..d)
            .map(|k| cells[k][t[k]].degree.clone().expect("degree on pass"))
            .collect();
        let deg = degree_compose_affine(&block_permutation(t, u), degree_product(&parts))?;
        let mut eps = f64::INFINITY;
        let mut um = f64::INFINITY;
        let mut sm = (f64::INFINITY, 1.0);
        for (k, r) in rows.iter().enumerate() {
            let radius = targets[k].r;
            eps = eps.min(eps_from_margins(r.unstable_margin.0, r.stable_margin, radius, chart_lip, coupling_lip)?);
            um = um.min(r.unstable_margin.0);
            if r.stable_margin * radius < sm.0 * sm.1 {
                sm = (r.stable_margin, radius);
            }
        }
        Some(CoveringCertificate {
            source_id: (0..d)
                .map(|k| spec.nodes[k].hsets[e.i[k]].id.clone())
                .collect::<Vec<_>>()
                .join("×"),
            target_id: (0..d)
                .map(|k| spec.nodes[k].hsets[e.j[k]].id.clone())
                .collect::<Vec<_>>()
                .join("×"),
            degree: deg,
            unstable_margin: um,
            stable_margin: sm.0,
            stable_radius: sm.1,
            admissible_eps: eps,
        })
    } else {
        None
    };
    Ok(EntryReport {
        index: e,
        tau,
        verdict,
        certificate,
        slack,
        rows,
        messages,
    })
}

/// Linear part of `(x_1, …, x_d) ↦ (x_{τ(1)}, …, x_{τ(d)})` on the unstable
/// blocks; its determinant is `sgn(τ)^u`.
fn block_permutation(tau: &[usize], u: usize) -> DMatrix<f64> {
    let d = tau.len();
    DMatrix::from_fn(d * u, d * u, |r, c| {
        if tau[r / u.max(1)] == c / u.max(1) && r % u.max(1) == c % u.max(1) {
            1.0
        } else {
            0.0
        }
    })
}
