//! Small networks shared by the unit tests.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{CouplingKind, Graph, NetworkSpec, NodeSystem};
use crate::geometry::pwa::AffinePiece;
use crate::geometry::{AffineChart, CenterScale, HSet, PiecewiseAffineMap, UnifiedSet};
use crate::symbolic::TransitionMatrix;

pub fn pwl(breaks: &[f64], pieces: &[(f64, f64)]) -> PiecewiseAffineMap {
    PiecewiseAffineMap::from_breakpoints(
        breaks.to_vec(),
        pieces.iter().map(|&(a, b)| AffinePiece::scalar(a, b)).collect(),
    )
    .unwrap()
}

pub fn shift(c: f64) -> AffineChart {
    AffineChart::translation(1, 0, &[c]).unwrap()
}

pub fn tm(rows: &[&[u8]]) -> TransitionMatrix {
    TransitionMatrix::new(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

pub fn mat2(a: [[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

fn unified(hat: f64, ids: [&str; 2]) -> UnifiedSet {
    UnifiedSet {
        chart: shift(hat),
        members: vec![
            (ids[0].into(), CenterScale::new(vec![0.0], vec![], 1.0).unwrap()),
            (ids[1].into(), CenterScale::new(vec![3.0], vec![], 1.0).unwrap()),
        ],
    }
}

/// The first worked example with coupling matrix `a`.
pub fn example1(a: DMatrix<f64>) -> NetworkSpec {
    let n1 = NodeSystem::new(
        pwl(&[1.5], &[(3.5, 1.5), (2.0, -6.0)]),
        vec![HSet::new("M11", shift(0.0)), HSet::new("M12", shift(-3.0))],
        tm(&[&[1, 1], &[1, 0]]),
    )
    .with_unified(unified(0.0, ["M11", "M12"]));
    let n2 = NodeSystem::new(
        pwl(&[1.5], &[(2.0, 3.0), (3.5, -9.0)]),
        vec![HSet::new("M21", shift(0.0)), HSet::new("M22", shift(-3.0))],
        tm(&[&[0, 1], &[1, 1]]),
    )
    .with_unified(unified(0.0, ["M21", "M22"]));
    NetworkSpec::assemble(Graph::complete(2), vec![n1, n2], CouplingKind::TypeII, a, None, BTreeMap::new()).unwrap()
}

pub fn diffusive(alpha: f64) -> DMatrix<f64> {
    mat2([[1.0 - alpha, alpha], [alpha, 1.0 - alpha]])
}

/// The second worked example, shifted h-sets and a declared ambient map.
pub fn example2(a: DMatrix<f64>) -> NetworkSpec {
    let n1 = NodeSystem::new(
        pwl(&[2.5], &[(3.5, -1.0), (2.0, -7.0)]),
        vec![HSet::new("M11", shift(-1.0)), HSet::new("M12", shift(-4.0))],
        tm(&[&[1, 1], &[1, 0]]),
    )
    .with_unified(unified(-1.0, ["M11", "M12"]));
    let n2 = NodeSystem::new(
        pwl(&[3.5], &[(2.0, 1.0), (3.5, -14.0)]),
        vec![HSet::new("M21", shift(-2.0)), HSet::new("M22", shift(-5.0))],
        tm(&[&[0, 1], &[1, 1]]),
    )
    .with_unified(unified(-2.0, ["M21", "M22"]));
    let c = DVector::from_column_slice(&[1.0, 2.0]);
    let ambient = PiecewiseAffineMap::affine(AffinePiece {
        offset: &c - &a * &c,
        linear: a.clone(),
    });
    NetworkSpec::assemble(Graph::complete(2), vec![n1, n2], CouplingKind::TypeII, a, Some(ambient), BTreeMap::new())
        .unwrap()
}

/// Node with two h-sets `[-1, 1]`, `[4, 6]` swapped by slope ±2.
pub fn swap_node() -> NodeSystem {
    NodeSystem::new(
        pwl(&[1.0, 4.0], &[(2.0, 5.0), (-5.0 / 3.0, 7.0 + 5.0 / 3.0), (-2.0, 10.0)]),
        vec![HSet::new("A", shift(0.0)), HSet::new("B", shift(-5.0))],
        tm(&[&[0, 1], &[1, 0]]),
    )
}

/// Two swap nodes, type I, coupling `scale · I`.
pub fn swap_pair(scale: f64) -> NetworkSpec {
    NetworkSpec::assemble(
        Graph::new(2, [(0, 1), (1, 0)]),
        vec![swap_node(), swap_node()],
        CouplingKind::TypeI,
        DMatrix::identity(2, 2) * scale,
        None,
        BTreeMap::new(),
    )
    .unwrap()
}

/// Type I network with a 2-cycle at node 1 and a 3-cycle at node 2.
pub fn theorem1_2x3() -> NetworkSpec {
    let n1 = NodeSystem::new(
        pwl(&[1.0, 2.0], &[(2.0, 3.5), (-4.1, 9.6), (-2.0, 5.4)]),
        vec![HSet::new("M11", shift(0.0)), HSet::new("M12", shift(-3.0))],
        tm(&[&[0, 1], &[1, 0]]),
    );
    let n2 = NodeSystem::new(
        pwl(
            &[1.0, 4.0, 6.0, 9.0],
            &[(2.0, 5.0), (1.0 / 3.0, 7.0 - 1.0 / 3.0), (2.0, 0.0), (-14.0 / 3.0, 40.0), (2.0, -20.0)],
        ),
        vec![HSet::new("M21", shift(0.0)), HSet::new("M22", shift(-5.0)), HSet::new("M23", shift(-10.0))],
        tm(&[&[0, 1, 0], &[0, 0, 1], &[1, 0, 0]]),
    );
    NetworkSpec::assemble(
        Graph::new(2, [(0, 1), (1, 0)]),
        vec![n1, n2],
        CouplingKind::TypeI,
        DMatrix::identity(2, 2),
        None,
        BTreeMap::new(),
    )
    .unwrap()
}
