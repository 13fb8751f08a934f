//! Coupled map networks `(G, {T_k}, A)`: data model, structural validation,
//! Kronecker bookkeeping and the two network-level checkers.

mod audit;
mod kronecker;
mod theorem;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use petgraph::graphmap::UnGraphMap;
use serde::Serialize;
use thiserror::Error;

use crate::covering::{CoveringError, ProductFormMap};
use crate::degree::DegreeError;
use crate::geometry::pwa::{kron_identity, AffinePiece};
use crate::geometry::{AffineChart, CenterScale, GeometryError, HSet, PiecewiseAffineMap, UnifiedSet};
use crate::symbolic::TransitionMatrix;
use crate::ValidationReport;

pub use audit::{conjugacy_audit, AuditReport};
pub use kronecker::{kronecker, nonzero_entries, tau_search, EntryIndex};
pub use theorem::{theorem1_check, theorem2_check, CheckOptions, EntryReport, RowReport, Theorem, TheoremReport};
pub use validate::validate_spec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("node {0}: transition matrix is not a permutation")]
    NotPermutation(usize),
    #[error("this check needs a {0} network")]
    WrongKind(CouplingKind),
    #[error("node {0} has no unified set")]
    MissingUnified(usize),
    #[error("node {node}: no chart form for {key}")]
    MissingForm { node: usize, key: FormKey },
    #[error("{0}")]
    Spec(String),
    #[error("invalid network:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Degree(#[from] DegreeError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
}

/// Directed graph on nodes `0..d`; an edge `(m, l)` lets node `l` read `x_m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub d: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            d,
            edges: edges.into_iter().collect(),
        }
    }

    pub fn complete(d: usize) -> Self {
        Self::new(d, (0..d).flat_map(|a| (0..d).map(move |b| (a, b))))
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Connectivity of the underlying undirected graph.
    pub fn is_weakly_connected(&self) -> bool {
        if self.d == 0 {
            return false;
        }
        let mut g = UnGraphMap::<usize, ()>::new();
        for v in 0..self.d {
            g.add_node(v);
        }
        for &(a, b) in &self.edges {
            if a < self.d && b < self.d {
                g.add_edge(a, b, ());
            }
        }
        petgraph::algo::connected_components(&g) == 1
    }
}

/// Which chart-coordinate form a node map is keyed by: the source h-set alone
/// (unified sets) or a source/target pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FormKey {
    Source(usize),
    Pair(usize, usize),
}

impl fmt::Display for FormKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormKey::Source(i) => write!(f, "source {}", i + 1),
            FormKey::Pair(i, j) => write!(f, "pair ({}, {})", i + 1, j + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeSystem {
    pub local_map: PiecewiseAffineMap,
    pub hsets: Vec<HSet>,
    pub transition: TransitionMatrix,
    pub unified: Option<UnifiedSet>,
    pub chart_forms: BTreeMap<FormKey, ProductFormMap>,
    /// Keys whose forms were supplied rather than derived; only these are
    /// audited against the local map.
    pub declared_forms: BTreeSet<FormKey>,
}

impl NodeSystem {
    pub fn new(local_map: PiecewiseAffineMap, hsets: Vec<HSet>, transition: TransitionMatrix) -> Self {
        Self {
            local_map,
            hsets,
            transition,
            unified: None,
            chart_forms: BTreeMap::new(),
            declared_forms: BTreeSet::new(),
        }
    }

    pub fn with_unified(mut self, unified: UnifiedSet) -> Self {
        self.unified = Some(unified);
        self
    }

    /// Keys the coupling kind requires, in order.
    pub fn required_keys(&self, kind: CouplingKind) -> Vec<FormKey> {
        let w = &self.transition;
        match kind {
            CouplingKind::TypeI => (0..w.dim())
                .flat_map(|i| w.successors(i).map(move |j| FormKey::Pair(i, j)))
                .collect(),
            CouplingKind::TypeII => (0..w.dim()).map(FormKey::Source).collect(),
        }
    }

    /// Chart of the `i`th h-set as the covering arguments see it: the
    /// unified member chart when present, else the declared chart.
    pub fn source_chart(&self, kind: CouplingKind, i: usize) -> Result<AffineChart, GeometryError> {
        match (kind, &self.unified) {
            (CouplingKind::TypeII, Some(n)) => n.member_chart(i),
            _ => Ok(self.hsets[i].chart.clone()),
        }
    }

    /// Chart in which images are measured for `key`.
    pub fn target_chart(&self, kind: CouplingKind, key: FormKey) -> AffineChart {
        match (kind, key, &self.unified) {
            (CouplingKind::TypeII, _, Some(n)) => n.chart.clone(),
            (_, FormKey::Pair(_, j), _) => self.hsets[j].chart.clone(),
            (_, FormKey::Source(i), _) => self.hsets[i].chart.clone(),
        }
    }

    /// `target ∘ T ∘ source⁻¹` as a piecewise-affine map on `R^{u+s}`.
    pub fn composite(&self, kind: CouplingKind, key: FormKey) -> Result<PiecewiseAffineMap, GeometryError> {
        let i = match key {
            FormKey::Source(i) | FormKey::Pair(i, _) => i,
        };
        let src = self.source_chart(kind, i)?;
        let tgt = self.target_chart(kind, key);
        Ok(self
            .local_map
            .precompose(src.inverse_piece())
            .postcompose(tgt.as_piece()))
    }

    /// Center and radius of the target for `(i, j)`.
    pub fn target_center(&self, kind: CouplingKind, j: usize, u: usize, s: usize) -> CenterScale {
        match (kind, &self.unified) {
            (CouplingKind::TypeII, Some(n)) => n.members[j].1.clone(),
            _ => CenterScale::unit(u, s),
        }
    }

    pub fn form_for(&self, key: FormKey) -> Option<&ProductFormMap> {
        self.chart_forms.get(&key)
    }
}

/// Splits a composite map into product form when that is automatic: always
/// for `s = 0`, and for affine maps with block-diagonal linear part.
pub fn derive_product_form(g: &PiecewiseAffineMap, u: usize, s: usize) -> Option<ProductFormMap> {
    if s == 0 {
        return Some(ProductFormMap::unstable_only(g.clone()));
    }
    if !g.is_affine() {
        return None;
    }
    let p = &g.cells()[0].piece;
    let off_diag = (0..u).any(|r| (u..u + s).any(|c| p.linear[(r, c)] != 0.0))
        || (u..u + s).any(|r| (0..u).any(|c| p.linear[(r, c)] != 0.0));
    if off_diag {
        return None;
    }
    let uu = AffinePiece {
        linear: p.linear.view((0, 0), (u, u)).into_owned(),
        offset: p.offset.rows(0, u).into_owned(),
    };
    let ss = AffinePiece {
        linear: p.linear.view((u, u), (s, s)).into_owned(),
        offset: p.offset.rows(u, s).into_owned(),
    };
    Some(ProductFormMap::new(
        PiecewiseAffineMap::affine(uu),
        Some(PiecewiseAffineMap::affine(ss)),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CouplingKind {
    #[serde(rename = "type_i")]
    TypeI,
    #[serde(rename = "type_ii")]
    TypeII,
}

impl fmt::Display for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CouplingKind::TypeI => "type I",
            CouplingKind::TypeII => "type II",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    pub matrix: DMatrix<f64>,
    pub ambient: PiecewiseAffineMap,
    /// Whether `ambient` was supplied rather than built from `matrix`.
    pub ambient_declared: bool,
    pub per_entry: BTreeMap<EntryIndex, DMatrix<f64>>,
}

impl CouplingSpec {
    pub fn matrix_for(&self, entry: &EntryIndex) -> &DMatrix<f64> {
        self.per_entry.get(entry).unwrap_or(&self.matrix)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub graph: Graph,
    pub nodes: Vec<NodeSystem>,
    pub coupling: CouplingSpec,
    pub dim_u: usize,
    pub dim_s: usize,
}

impl NetworkSpec {
    /// Assembles a network, building the default ambient coupling when none
    /// is given and deriving every chart form that can be derived.
    ///
    /// The default ambient map is `[a_lm] ⊗ I` conjugated by the product of
    /// the unified charts for type II networks, and `[a_lm] ⊗ I` itself for
    /// type I.
    pub fn assemble(
        graph: Graph,
        nodes: Vec<NodeSystem>,
        kind: CouplingKind,
        matrix: DMatrix<f64>,
        ambient: Option<PiecewiseAffineMap>,
        per_entry: BTreeMap<EntryIndex, DMatrix<f64>>,
    ) -> Result<Self, NetworkError> {
        let first = nodes
            .first()
            .and_then(|n| n.hsets.first())
            .ok_or_else(|| NetworkError::Spec("the network needs a node with an h-set".into()))?;
        let (dim_u, dim_s) = (first.dim_u(), first.dim_s());
        let n = dim_u + dim_s;
        let ambient_declared = ambient.is_some();
        let ambient = match ambient {
            Some(a) => a,
            None => default_ambient(&nodes, kind, &matrix, n),
        };
        let mut spec = NetworkSpec {
            graph,
            nodes,
            coupling: CouplingSpec {
                kind,
                matrix,
                ambient,
                ambient_declared,
                per_entry,
            },
            dim_u,
            dim_s,
        };
        spec.derive_missing_forms();
        Ok(spec)
    }

    pub fn d(&self) -> usize {
        self.nodes.len()
    }

    /// Same network with a new coupling matrix. A default ambient map is
    /// rebuilt from it; a declared one is kept.
    pub fn with_coupling_matrix(&self, matrix: DMatrix<f64>) -> NetworkSpec {
        let mut out = self.clone();
        if !self.coupling.ambient_declared {
            out.coupling.ambient = default_ambient(&self.nodes, self.kind(), &matrix, self.node_dim());
        }
        out.coupling.matrix = matrix;
        out
    }

    pub fn node_dim(&self) -> usize {
        self.dim_u + self.dim_s
    }

    pub fn total_dim(&self) -> usize {
        self.d() * self.node_dim()
    }

    pub fn kind(&self) -> CouplingKind {
        self.coupling.kind
    }

    pub fn transitions(&self) -> Vec<TransitionMatrix> {
        self.nodes.iter().map(|n| n.transition.clone()).collect()
    }

    /// Fills in chart forms that are absent but derivable.
    pub fn derive_missing_forms(&mut self) {
        let (kind, u, s) = (self.kind(), self.dim_u, self.dim_s);
        for node in &mut self.nodes {
            if node.hsets.len() != node.transition.dim() {
                continue;
            }
            if kind == CouplingKind::TypeII && node.unified.as_ref().map_or(true, |n| n.len() != node.hsets.len()) {
                continue;
            }
            for key in node.required_keys(kind) {
                if node.chart_forms.contains_key(&key) {
                    continue;
                }
                if let Ok(g) = node.composite(kind, key) {
                    if let Some(f) = derive_product_form(&g, u, s) {
                        node.chart_forms.insert(key, f);
                    }
                }
            }
        }
    }

    /// Same network with nodes listed in a new order: new node `a` is old
    /// node `order[a]`. Coupling rows, columns, edges, blocks of the ambient
    /// map and per-entry tables move along.
    pub fn relabel(&self, order: &[usize]) -> NetworkSpec {
        let d = self.d();
        assert_eq!(order.len(), d, "relabel needs a full permutation");
        let mut inv = vec![0; d];
        for (a, &o) in order.iter().enumerate() {
            inv[o] = a;
        }
        let permute = |m: &DMatrix<f64>| DMatrix::from_fn(d, d, |a, b| m[(order[a], order[b])]);
        let n = self.node_dim();
        // (P z)_block a = z_block order[a]
        let p = DMatrix::from_fn(d * n, d * n, |r, c| {
            let (a, ra) = (r / n, r % n);
            let (b, cb) = (c / n, c % n);
            if order[a] == b && ra == cb {
                1.0
            } else {
                0.0
            }
        });
        let p_piece = AffinePiece::linear_map(p.clone());
        let p_inv = AffinePiece::linear_map(p.transpose());
        let ambient = self.coupling.ambient.precompose(&p_inv).postcompose(&p_piece);
        let per_entry = self
            .coupling
            .per_entry
            .iter()
            .map(|(e, m)| (e.reorder(order), permute(m)))
            .collect();
        NetworkSpec {
            graph: Graph::new(d, self.graph.edges.iter().map(|&(a, b)| (inv[a], inv[b]))),
            nodes: order.iter().map(|&o| self.nodes[o].clone()).collect(),
            coupling: CouplingSpec {
                kind: self.coupling.kind,
                matrix: permute(&self.coupling.matrix),
                ambient,
                ambient_declared: self.coupling.ambient_declared,
                per_entry,
            },
            dim_u: self.dim_u,
            dim_s: self.dim_s,
        }
    }

    /// Structural validation; see [`validate_spec`].
    pub fn validate(&self) -> ValidationReport {
        validate_spec(self)
    }
}

/// `[a_lm] ⊗ I`, conjugated by the product of unified charts when every node
/// of a type II network has one.
fn default_ambient(nodes: &[NodeSystem], kind: CouplingKind, matrix: &DMatrix<f64>, n: usize) -> PiecewiseAffineMap {
    let lin = AffinePiece::linear_map(kron_identity(matrix, n));
    let hats: Option<Vec<&AffineChart>> = match kind {
        CouplingKind::TypeII => nodes.iter().map(|v| v.unified.as_ref().map(|u| &u.chart)).collect(),
        CouplingKind::TypeI => None,
    };
    match hats {
        Some(charts) if charts.len() == nodes.len() && charts.iter().all(|c| c.dim() == n) => {
            let fwd = AffinePiece::block_diag(&charts.iter().map(|c| c.as_piece()).collect::<Vec<_>>());
            let inv = AffinePiece::block_diag(&charts.iter().map(|c| c.inverse_piece()).collect::<Vec<_>>());
            PiecewiseAffineMap::affine(inv.compose(&lin.compose(&fwd)))
        }
        _ => PiecewiseAffineMap::affine(lin),
    }
}

#[cfg(test)]
pub(crate) mod samples;
