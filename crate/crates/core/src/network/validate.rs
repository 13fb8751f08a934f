//! Structural validation of a network spec.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kronecker::EntryIndex;
use super::{CouplingKind, FormKey, NetworkSpec, NodeSystem};
use crate::covering::ProductFormMap;
use crate::geometry::pwa::max_abs_diff;
use crate::geometry::{unified_validate, HSet, PiecewiseAffineMap};
use crate::ValidationReport;

const AUDIT_SAMPLES: usize = 200;
const AUDIT_TOL: f64 = 1e-9;
const DET_TOL: f64 = 1e-12;
const CORNER_TOL: f64 = 1e-9;

/// Lists every structural problem of `spec`.
///
/// Violations cover the graph, the coupling matrices and their zero pattern,
/// dimensions, transition sizes, disjointness of h-sets, continuity of each
/// local map on its h-sets, the unified-set clauses and the declared chart
/// forms. For type I networks the image non-overlap condition is checked on
/// bounding boxes; overlapping boxes are a violation in one dimension, where
/// they are exact, and inconclusive otherwise.
pub fn validate_spec(spec: &NetworkSpec) -> ValidationReport {
    let mut r = ValidationReport::new();
    let d = spec.graph.d;
    if d == 0 {
        r.violation("graph", "a network needs at least one node");
        return r;
    }
    if spec.nodes.len() != d {
        r.violation("nodes", format!("graph has {d} nodes, spec lists {}", spec.nodes.len()));
        return r;
    }
    for &(a, b) in &spec.graph.edges {
        if a >= d || b >= d {
            r.violation("graph.edges", format!("edge ({}, {}) names a missing node", a + 1, b + 1));
        }
    }
    if !spec.graph.is_weakly_connected() {
        r.violation("graph", "graph is not connected");
    }

    check_matrix(&mut r, spec, "coupling.matrix", &spec.coupling.matrix);
    for (e, m) in &spec.coupling.per_entry {
        let loc = format!("coupling.per_entry[{e}]");
        if !entry_exists(spec, e) {
            r.violation(&loc, "not a nonzero entry of the Kronecker product");
        }
        check_matrix(&mut r, spec, &loc, m);
    }
    if spec.coupling.kind == CouplingKind::TypeII && !spec.coupling.per_entry.is_empty() {
        r.violation("coupling.per_entry", "per-entry matrices are only meaningful for type I");
    }
    let total = spec.total_dim();
    let amb = &spec.coupling.ambient;
    if amb.dim_in() != total || amb.dim_out() != total {
        r.violation(
            "coupling.ambient",
            format!("ambient map is {} → {}, network state has dimension {total}", amb.dim_in(), amb.dim_out()),
        );
    }

    for (k, node) in spec.nodes.iter().enumerate() {
        r.merge(validate_node(spec, node).prefixed(&format!("nodes[{k}]")));
    }
    r
}

fn entry_exists(spec: &NetworkSpec, e: &EntryIndex) -> bool {
    e.d() == spec.d()
        && e.j.len() == spec.d()
        && spec.nodes.iter().enumerate().all(|(k, n)| {
            e.i[k] < n.transition.dim() && e.j[k] < n.transition.dim() && n.transition.get(e.i[k], e.j[k])
        })
}

fn check_matrix(r: &mut ValidationReport, spec: &NetworkSpec, loc: &str, m: &DMatrix<f64>) {
    let d = spec.graph.d;
    if m.shape() != (d, d) {
        r.violation(loc, format!("coupling matrix is {}×{}, expected {d}×{d}", m.nrows(), m.ncols()));
        return;
    }
    let det = m.determinant();
    if !(det.abs() > DET_TOL) {
        r.violation(loc, format!("coupling matrix is singular (det {det})"));
    }
    for l in 0..d {
        for c in 0..d {
            if l == c || m[(l, c)] == 0.0 {
                continue;
            }
            if !spec.graph.has_edge(c, l) {
                r.violation(
                    loc,
                    format!(
                        "a_{}{} = {} is nonzero but edge ({}, {}) is absent",
                        l + 1,
                        c + 1,
                        m[(l, c)],
                        c + 1,
                        l + 1
                    ),
                );
                if spec.graph.has_edge(l, c) {
                    r.warning(
                        loc,
                        format!(
                            "a_{}{} would be allowed under the reversed index convention (edge ({}, {}) exists); \
                             node {} must read node {} through edge ({}, {})",
                            l + 1,
                            c + 1,
                            l + 1,
                            c + 1,
                            l + 1,
                            c + 1,
                            c + 1,
                            l + 1
                        ),
                    );
                }
            }
        }
    }
}

fn validate_node(spec: &NetworkSpec, node: &NodeSystem) -> ValidationReport {
    let mut r = ValidationReport::new();
    let (u, s) = (spec.dim_u, spec.dim_s);
    let n = u + s;
    let kind = spec.coupling.kind;
    if node.hsets.is_empty() {
        r.violation("hsets", "a node needs at least one h-set");
        return r;
    }
    let mut dims_ok = true;
    for (i, h) in node.hsets.iter().enumerate() {
        if h.dim_u() != u || h.dim_s() != s {
            r.violation(
                format!("hsets[{i}]"),
                format!("h-set {} has (u, s) = ({}, {}), network uses ({u}, {s})", h.id, h.dim_u(), h.dim_s()),
            );
            dims_ok = false;
        }
    }
    if node.transition.dim() != node.hsets.len() {
        r.violation(
            "transition",
            format!(
                "transition matrix is {0}×{0} for {1} h-sets",
                node.transition.dim(),
                node.hsets.len()
            ),
        );
        dims_ok = false;
    }
    if node.local_map.dim_in() != n || node.local_map.dim_out() != n {
        r.violation(
            "local_map",
            format!("local map is {} → {}, expected {n} → {n}", node.local_map.dim_in(), node.local_map.dim_out()),
        );
        dims_ok = false;
    }
    if !dims_ok {
        return r;
    }
    for a in 0..node.hsets.len() {
        for b in a + 1..node.hsets.len() {
            if node.hsets[a].intersects(&node.hsets[b]) {
                r.violation(
                    "hsets",
                    format!("h-sets {} and {} intersect", node.hsets[a].id, node.hsets[b].id),
                );
            }
        }
    }
    for (i, h) in node.hsets.iter().enumerate() {
        if let Err(e) = node.local_map.check_continuity(&h.constraints()) {
            r.violation(format!("hsets[{i}]"), format!("local map is not continuous on {}: {e}", h.id));
        }
    }
    if let Err(e) = node.local_map.check_continuity(&[]) {
        r.warning("local_map", format!("local map is discontinuous away from the h-sets: {e}"));
    }

    match kind {
        CouplingKind::TypeII => match &node.unified {
            None => r.violation("unified", "type II networks need a unified set at every node"),
            Some(un) => {
                r.merge(unified_validate(un).prefixed("unified"));
                if un.chart.dim_u() != u || un.chart.dim_s() != s {
                    r.violation("unified.chart", "unified chart dimensions differ from the network");
                    return r;
                }
                if un.len() != node.hsets.len() {
                    r.violation(
                        "unified.members",
                        format!("{} members for {} h-sets", un.len(), node.hsets.len()),
                    );
                    return r;
                }
                for (i, h) in node.hsets.iter().enumerate() {
                    match un.member_hset(i) {
                        Ok(m) if same_set(h, &m) => {}
                        Ok(_) => r.violation(
                            format!("hsets[{i}]"),
                            format!("h-set {} is not the member set the unified chart describes", h.id),
                        ),
                        Err(e) => r.violation(format!("unified.members[{i}]"), e.to_string()),
                    }
                }
            }
        },
        CouplingKind::TypeI => {
            if node.unified.is_some() {
                r.warning("unified", "unified sets are ignored by type I networks");
            }
            check_non_overlap(&mut r, node, u + s);
        }
    }

    for key in node.required_keys(kind) {
        match node.chart_forms.get(&key) {
            None => r.violation(
                "chart_forms",
                format!("no chart form for {key}, and it cannot be derived from the local map"),
            ),
            Some(f) if node.declared_forms.contains(&key) => {
                if let Err(msg) = audit_form(node, kind, key, f, u, s) {
                    r.violation("chart_forms", format!("form for {key}: {msg}"));
                }
            }
            Some(_) => {}
        }
    }
    for key in node.chart_forms.keys() {
        let fits = match (kind, key) {
            (CouplingKind::TypeII, FormKey::Source(i)) => *i < node.hsets.len(),
            (CouplingKind::TypeI, FormKey::Pair(i, j)) => {
                *i < node.hsets.len() && *j < node.hsets.len() && node.transition.get(*i, *j)
            }
            _ => false,
        };
        if !fits {
            r.warning("chart_forms", format!("form for {key} is never used"));
        }
    }
    r
}

/// Two h-sets are the same set when the transition map between their charts
/// sends the corners of the unit box to corners of the unit box.
fn same_set(a: &HSet, b: &HSet) -> bool {
    a.corners().iter().all(|x| {
        b.chart
            .apply(x)
            .map(|y| y.iter().all(|v| (v.abs() - 1.0).abs() <= CORNER_TOL))
            .unwrap_or(false)
    })
}

fn check_non_overlap(r: &mut ValidationReport, node: &NodeSystem, n: usize) {
    let w = &node.transition;
    let images: Vec<Option<Vec<(f64, f64)>>> = node
        .hsets
        .iter()
        .map(|h| node.local_map.image_bounds(&h.constraints()))
        .collect();
    let boxes: Vec<Vec<(f64, f64)>> = node.hsets.iter().map(|h| h.bounding_box()).collect();
    let flag = |r: &mut ValidationReport, what: String| {
        if n == 1 {
            r.violation("local_map", what);
        } else {
            r.inconclusive("local_map", format!("{what} (bounding boxes overlap)"));
        }
    };
    for i in 0..w.dim() {
        let Some(img) = &images[i] else {
            r.violation("local_map", format!("local map is undefined on {}", node.hsets[i].id));
            continue;
        };
        for j in w.successors(i) {
            for jp in (0..w.dim()).filter(|&jp| jp != j) {
                if boxes_meet(img, &boxes[jp]) {
                    flag(
                        r,
                        format!(
                            "image of {} meets {} although it covers {}",
                            node.hsets[i].id, node.hsets[jp].id, node.hsets[j].id
                        ),
                    );
                }
            }
        }
        for ip in i + 1..w.dim() {
            if let Some(other) = &images[ip] {
                if boxes_meet(img, other) {
                    flag(
                        r,
                        format!("images of {} and {} meet", node.hsets[i].id, node.hsets[ip].id),
                    );
                }
            }
        }
    }
}

fn boxes_meet(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.0 <= y.1 && y.0 <= x.1)
}

/// Compares a declared form with `target ∘ T ∘ source⁻¹` at the box corners
/// and at seeded random points of the closed unit ball.
fn audit_form(
    node: &NodeSystem,
    kind: CouplingKind,
    key: FormKey,
    f: &ProductFormMap,
    u: usize,
    s: usize,
) -> Result<(), String> {
    if f.dim_u() != u || f.dim_s() != s || f.u.dim_out() != u || f.v.as_ref().map_or(0, |v| v.dim_out()) != s {
        return Err(format!("form has shape ({}, {}), expected ({u}, {s})", f.dim_u(), f.dim_s()));
    }
    let g: PiecewiseAffineMap = node.composite(kind, key).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let n = u + s;
    let corners = 1usize << n.min(12);
    let mut worst = 0.0f64;
    let mut at = Vec::new();
    for t in 0..corners + AUDIT_SAMPLES {
        let z: Vec<f64> = if t < corners {
            (0..n).map(|c| if (t >> c) & 1 == 1 { 1.0 } else { -1.0 }).collect()
        } else {
            (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
        };
        let want = g.try_eval(&z).map_err(|e| e.to_string())?;
        let mut got = f.u.try_eval(&z[..u]).map_err(|e| e.to_string())?;
        if let Some(v) = &f.v {
            got.extend(v.try_eval(&z[u..]).map_err(|e| e.to_string())?);
        }
        let diff = max_abs_diff(&want, &got);
        if diff > worst {
            worst = diff;
            at = z;
        }
    }
    if worst > AUDIT_TOL {
        return Err(format!("differs from the local map in chart coordinates by {worst} at {at:?}"));
    }
    Ok(())
}
