//! Periodic orbits along closed loops of product h-sets.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{step, DynamicsError, Perturbation};
use crate::geometry::pwa::AffinePiece;
use crate::geometry::{HalfSpace, PiecewiseAffineMap};
use crate::network::NetworkSpec;
use crate::symbolic::lcm_period;

const CONTAIN_TOL: f64 = 1e-12;
const NEUTRAL_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;
const REFINE_TOL: f64 = 1e-12;
const REFINE_MAX: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicOrbitCertificate {
    /// The loop, one zero-based h-set index per node per step.
    pub loop_word: Vec<Vec<usize>>,
    pub period: usize,
    pub point: Vec<f64>,
    pub orbit: Vec<Vec<f64>>,
    /// `|Φ^p(z) - z|∞` with the map actually iterated.
    pub residual: f64,
    /// Per step, `1 - max_k |c(z_t)_k|∞` in the charts of the loop's h-sets.
    pub interior_margins: Vec<f64>,
    pub perturbation: Option<(f64, u64)>,
    pub refinement_iterations: usize,
}

/// The loop through the all-first multi-index that follows every node's
/// permutation for `lcm(dim W_k)` steps.
pub fn auto_loop(spec: &NetworkSpec) -> Result<Vec<Vec<usize>>, DynamicsError> {
    let perms: Vec<Vec<usize>> = spec
        .nodes
        .iter()
        .enumerate()
        .map(|(k, n)| {
            n.transition
                .as_permutation()
                .ok_or_else(|| DynamicsError::Argument(format!("node {}: automatic loops need permutation matrices", k + 1)))
        })
        .collect::<Result<_, _>>()?;
    let p = lcm_period(&perms.iter().map(|q| q.len()).collect::<Vec<_>>());
    let mut word = vec![0; spec.d()];
    let mut out = Vec::with_capacity(p);
    for _ in 0..p {
        out.push(word.clone());
        word = word.iter().zip(&perms).map(|(&i, q)| q[i]).collect();
    }
    Ok(out)
}

fn check_admissible(spec: &NetworkSpec, lp: &[Vec<usize>]) -> Result<(), DynamicsError> {
    if lp.is_empty() {
        return Err(DynamicsError::Inadmissible("empty loop".into()));
    }
    let d = spec.d();
    for (t, w) in lp.iter().enumerate() {
        if w.len() != d {
            return Err(DynamicsError::Inadmissible(format!(
                "step {} names {} nodes, network has {d}",
                t + 1,
                w.len()
            )));
        }
        for (k, &i) in w.iter().enumerate() {
            if i >= spec.nodes[k].hsets.len() {
                return Err(DynamicsError::Inadmissible(format!(
                    "step {}: node {} has no h-set {}",
                    t + 1,
                    k + 1,
                    i + 1
                )));
            }
        }
    }
    for t in 0..lp.len() {
        let next = &lp[(t + 1) % lp.len()];
        for k in 0..d {
            let (i, j) = (lp[t][k], next[k]);
            if !spec.nodes[k].transition.get(i, j) {
                return Err(DynamicsError::Inadmissible(format!(
                    "node {}: w_{}{} = 0 between steps {} and {}",
                    k + 1,
                    i + 1,
                    j + 1,
                    t + 1,
                    (t + 1) % lp.len() + 1
                )));
            }
        }
    }
    Ok(())
}

/// `max { h.normal · (G y + g) : y ∈ [-1,1]^m }` minus the bound.
fn excess_over_box(h: &HalfSpace, g: &DMatrix<f64>, off: &DVector<f64>) -> f64 {
    let n = DVector::from_column_slice(&h.normal);
    let reach: f64 = (g.transpose() * &n).iter().map(|v| v.abs()).sum();
    reach + n.dot(off) - h.bound
}

/// The first cell of `f` containing the parallelotope `G [-1,1]^m + g`.
fn cell_containing<'a>(f: &'a PiecewiseAffineMap, g: &DMatrix<f64>, off: &DVector<f64>) -> Option<&'a AffinePiece> {
    f.cells()
        .iter()
        .find(|c| {
            c.region
                .iter()
                .all(|h| excess_over_box(h, g, off) <= CONTAIN_TOL * (1.0 + h.bound.abs()))
        })
        .map(|c| &c.piece)
}

/// The affine branch of `Φ` on the product h-set `∏ M_{k w[k]}`.
fn branch(spec: &NetworkSpec, w: &[usize], t: usize) -> Result<AffinePiece, DynamicsError> {
    let n = spec.node_dim();
    let total = spec.total_dim();
    let mut lin = DMatrix::zeros(total, total);
    let mut off = DVector::zeros(total);
    // image of the product h-set as G y + g
    let mut g = DMatrix::zeros(total, total);
    let mut g_off = DVector::zeros(total);
    for (k, node) in spec.nodes.iter().enumerate() {
        let h = &node.hsets[w[k]];
        let inv = h.chart.inverse_piece();
        let piece = cell_containing(&node.local_map, &inv.linear, &inv.offset).ok_or_else(|| {
            DynamicsError::Subdivision {
                step: t + 1,
                node: k + 1,
                what: format!("h-set {}", h.id),
            }
        })?;
        let r = k * n;
        lin.view_mut((r, r), (n, n)).copy_from(&piece.linear);
        off.rows_mut(r, n).copy_from(&piece.offset);
        g.view_mut((r, r), (n, n)).copy_from(&(&piece.linear * &inv.linear));
        g_off
            .rows_mut(r, n)
            .copy_from(&(&piece.linear * &inv.offset + &piece.offset));
    }
    let a = cell_containing(&spec.coupling.ambient, &g, &g_off).ok_or_else(|| DynamicsError::Subdivision {
        step: t + 1,
        node: 0,
        what: "the coupling on the image".into(),
    })?;
    Ok(a.compose(&AffinePiece { linear: lin, offset: off }))
}

/// A point `z` of the product h-set `∏ M_{k w_0[k]}` with `Φ^p(z) = z` whose
/// orbit visits the loop's product h-sets in order.
///
/// The branches of `Φ` along the loop are composed into `z ↦ Lz + c` and
/// `(I - L) z = c` is solved directly. With a perturbation the affine
/// solution seeds the chord iteration `z ← z - (I - L)⁻¹ (z - Φ̃^p(z))`.
/// Either way the orbit is re-iterated with the actual map and must return
/// within `1e-10` while staying strictly inside every h-set.
pub fn periodic_point(
    spec: &NetworkSpec,
    lp: &[Vec<usize>],
    pert: Option<&Perturbation>,
) -> Result<PeriodicOrbitCertificate, DynamicsError> {
    check_admissible(spec, lp)?;
    let total = spec.total_dim();
    let mut comp = AffinePiece::identity(total);
    for (t, w) in lp.iter().enumerate() {
        comp = branch(spec, w, t)?.compose(&comp);
    }
    let i_minus_l = DMatrix::identity(total, total) - &comp.linear;
    let lu = i_minus_l.clone().lu();
    let det = lu.determinant();
    if det.abs() <= NEUTRAL_TOL {
        return Err(DynamicsError::NeutralComposition(det));
    }
    let mut z = lu
        .solve(&comp.offset)
        .ok_or(DynamicsError::NeutralComposition(det))?;

    let iterate = |z: &[f64]| -> Result<Vec<Vec<f64>>, DynamicsError> {
        let mut orbit = vec![z.to_vec()];
        for _ in 0..lp.len() {
            let next = step(spec, orbit.last().expect("nonempty"), pert)?;
            orbit.push(next);
        }
        Ok(orbit)
    };

    let mut iterations = 0;
    if pert.is_some() {
        loop {
            let orbit = iterate(z.as_slice())?;
            let r = DVector::from_column_slice(orbit.last().expect("nonempty")) - &z;
            let dz = lu.solve(&r).ok_or(DynamicsError::NeutralComposition(det))?;
            z += &dz;
            iterations += 1;
            if dz.amax() < REFINE_TOL {
                break;
            }
            if iterations >= REFINE_MAX || !dz.amax().is_finite() {
                return Err(DynamicsError::NotConverged(iterations));
            }
        }
    }

    let mut orbit = iterate(z.as_slice())?;
    let back = orbit.pop().expect("p + 1 points");
    let residual = back
        .iter()
        .zip(z.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let n = spec.node_dim();
    let mut margins = Vec::with_capacity(lp.len());
    for (t, (w, x)) in lp.iter().zip(&orbit).enumerate() {
        let worst = spec
            .nodes
            .iter()
            .enumerate()
            .map(|(k, node)| node.hsets[w[k]].chart_norm(&x[k * n..(k + 1) * n]))
            .fold(0.0, f64::max);
        let margin = 1.0 - worst;
        if !(margin > 0.0) {
            return Err(DynamicsError::OutsideCell { step: t + 1, margin });
        }
        margins.push(margin);
    }
    if !(residual < RESIDUAL_TOL) {
        return Err(DynamicsError::Residual(residual));
    }
    Ok(PeriodicOrbitCertificate {
        loop_word: lp.to_vec(),
        period: lp.len(),
        point: z.iter().copied().collect(),
        orbit,
        residual,
        interior_margins: margins,
        perturbation: pert.map(|p| (p.amplitude, p.seed)),
        refinement_iterations: iterations,
    })
}
