//! JSON spec files, `format_version` "1".
//!
//! Indices in documents are one-based. Reals may be JSON numbers, decimal
//! strings or exact rationals `"p/q"`; a rational is rounded once to the
//! nearest double when `|p|` and `q` are below `2^53` and is otherwise the
//! quotient of the two rounded integers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covering::ProductFormMap;
use crate::geometry::{AffineChart, AffinePiece, CenterScale, Cell, HSet, HalfSpace, PiecewiseAffineMap, UnifiedSet};
use crate::network::{CouplingKind, EntryIndex, FormKey, Graph, NetworkSpec, NodeSystem};
use crate::symbolic::TransitionMatrix;

pub const FORMAT_VERSION: &str = "1";

/// A real as written in a document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Number(f64),
    Text(String),
}

impl Real {
    fn value(&self) -> Result<f64, String> {
        match self {
            Real::Number(v) => Ok(*v),
            Real::Text(t) => parse_real(t),
        }
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Real::Number(v)
        } else {
            Real::Text(if v > 0.0 { "inf".into() } else { "-inf".into() })
        }
    }
}

/// Decimal, `inf`, or `p/q` with integer `p` and positive integer `q`.
pub fn parse_real(t: &str) -> Result<f64, String> {
    let t = t.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| format!("bad numerator in {t:?}"))?;
        let q: BigInt = q.trim().parse().map_err(|_| format!("bad denominator in {t:?}"))?;
        if q <= BigInt::from(0) {
            return Err(format!("denominator of {t:?} must be positive"));
        }
        let (pf, qf) = (p.to_f64().unwrap_or(f64::NAN), q.to_f64().unwrap_or(f64::NAN));
        let v = pf / qf;
        return if v.is_finite() { Ok(v) } else { Err(format!("{t:?} is out of range")) };
    }
    match t {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => t.parse::<f64>().map_err(|_| format!("{t:?} is not a real")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub format_version: String,
    pub graph: GraphDoc,
    pub nodes: Vec<NodeDoc>,
    pub coupling: CouplingDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub d: usize,
    /// `[m, l]`: node `l` reads node `m`.
    pub edges: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub map: MapDoc,
    pub hsets: Vec<HSetDoc>,
    pub transition: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unified: Option<UnifiedDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chart_forms: Vec<FormDoc>,
}

/// Either one-dimensional breakpoints with one piece more than breakpoints,
/// or explicit polyhedral cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellDoc>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceDoc {
    pub linear: Vec<Vec<Real>>,
    pub offset: Vec<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDoc {
    /// Half-spaces `normal · x <= bound`; empty for the whole space.
    #[serde(default)]
    pub region: Vec<HalfSpaceDoc>,
    pub linear: Vec<Vec<Real>>,
    pub offset: Vec<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSpaceDoc {
    pub normal: Vec<Real>,
    pub bound: Real,
}

/// `c(x) = linear · x + offset`; `linear` defaults to the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDoc {
    #[serde(default)]
    pub dim_s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<Vec<Vec<Real>>>,
    pub offset: Vec<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HSetDoc {
    pub id: String,
    pub chart: ChartDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnifiedDoc {
    pub chart: ChartDoc,
    pub members: Vec<MemberDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberDoc {
    pub id: String,
    pub p_u: Vec<Real>,
    #[serde(default)]
    pub p_s: Vec<Real>,
    pub r: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormDoc {
    /// `[i]` for a source h-set, `[i, j]` for a source/target pair.
    pub key: Vec<usize>,
    pub u: MapDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<MapDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingDoc {
    /// `"type_i"` or `"type_ii"`.
    pub kind: String,
    pub matrix: Vec<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<MapDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_entry: Vec<EntryMatrixDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryMatrixDoc {
    pub i: Vec<usize>,
    pub j: Vec<usize>,
    pub matrix: Vec<Vec<Real>>,
}

/// A rejected document: where and why.
#[derive(Clone, Debug, PartialEq)]
pub struct DocumentError {
    pub location: String,
    pub message: String,
}

impl fmt::Display for DocumentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.location.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.location, self.message)
        }
    }
}

impl std::error::Error for DocumentError {}

fn err(location: impl Into<String>, message: impl fmt::Display) -> DocumentError {
    DocumentError {
        location: location.into(),
        message: message.to_string(),
    }
}

fn reals(v: &[Real], at: &str) -> Result<Vec<f64>, DocumentError> {
    v.iter()
        .enumerate()
        .map(|(i, r)| r.value().map_err(|m| err(format!("{at}[{i}]"), m)))
        .collect()
}

fn matrix(rows: &[Vec<Real>], at: &str) -> Result<DMatrix<f64>, DocumentError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let mut out = DMatrix::zeros(n, m);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(err(format!("{at}[{i}]"), format!("row has {} entries, expected {m}", row.len())));
        }
        for (j, v) in reals(row, &format!("{at}[{i}]"))?.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

fn piece(linear: &[Vec<Real>], offset: &[Real], at: &str) -> Result<AffinePiece, DocumentError> {
    let l = matrix(linear, &format!("{at}.linear"))?;
    let o = DVector::from_vec(reals(offset, &format!("{at}.offset"))?);
    AffinePiece::new(l, o).map_err(|e| err(at, e))
}

fn map(doc: &MapDoc, at: &str) -> Result<PiecewiseAffineMap, DocumentError> {
    match (&doc.breakpoints, &doc.pieces, &doc.cells) {
        (Some(b), Some(p), None) => {
            let b = reals(b, &format!("{at}.breakpoints"))?;
            let p = p
                .iter()
                .enumerate()
                .map(|(i, q)| piece(&q.linear, &q.offset, &format!("{at}.pieces[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            PiecewiseAffineMap::from_breakpoints(b, p).map_err(|e| err(at, e))
        }
        (None, None, Some(cells)) => {
            let mut out = Vec::with_capacity(cells.len());
            for (i, c) in cells.iter().enumerate() {
                let here = format!("{at}.cells[{i}]");
                let piece = piece(&c.linear, &c.offset, &here)?;
                let region = c
                    .region
                    .iter()
                    .enumerate()
                    .map(|(k, h)| {
                        let loc = format!("{here}.region[{k}]");
                        Ok(HalfSpace::new(
                            reals(&h.normal, &format!("{loc}.normal"))?,
                            h.bound.value().map_err(|m| err(format!("{loc}.bound"), m))?,
                        ))
                    })
                    .collect::<Result<Vec<_>, DocumentError>>()?;
                out.push(Cell { region, piece });
            }
            let first = out.first().ok_or_else(|| err(format!("{at}.cells"), "no cells"))?;
            let (din, dout) = (first.piece.dim_in(), first.piece.dim_out());
            PiecewiseAffineMap::new(din, dout, out).map_err(|e| err(at, e))
        }
        _ => Err(err(at, "give either breakpoints with pieces, or cells")),
    }
}

fn chart(doc: &ChartDoc, at: &str) -> Result<AffineChart, DocumentError> {
    let offset = reals(&doc.offset, &format!("{at}.offset"))?;
    let n = offset.len();
    if doc.dim_s > n {
        return Err(err(format!("{at}.dim_s"), format!("exceeds the dimension {n}")));
    }
    let linear = match &doc.linear {
        Some(l) => matrix(l, &format!("{at}.linear"))?,
        None => DMatrix::identity(n, n),
    };
    AffineChart::new(n - doc.dim_s, doc.dim_s, linear, DVector::from_vec(offset)).map_err(|e| err(at, e))
}

fn one_based(v: usize, at: &str) -> Result<usize, DocumentError> {
    v.checked_sub(1).ok_or_else(|| err(at, "indices are one-based"))
}

fn node(doc: &NodeDoc, at: &str) -> Result<NodeSystem, DocumentError> {
    let local = map(&doc.map, &format!("{at}.map"))?;
    let hsets = doc
        .hsets
        .iter()
        .enumerate()
        .map(|(i, h)| Ok(HSet::new(h.id.clone(), chart(&h.chart, &format!("{at}.hsets[{i}].chart"))?)))
        .collect::<Result<Vec<_>, DocumentError>>()?;
    let w = TransitionMatrix::new(&doc.transition).map_err(|e| err(format!("{at}.transition"), e))?;
    let mut out = NodeSystem::new(local, hsets, w);
    if let Some(u) = &doc.unified {
        let here = format!("{at}.unified");
        let members = u
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let loc = format!("{here}.members[{i}]");
                let cs = CenterScale::new(
                    reals(&m.p_u, &format!("{loc}.p_u"))?,
                    reals(&m.p_s, &format!("{loc}.p_s"))?,
                    m.r.value().map_err(|e| err(format!("{loc}.r"), e))?,
                )
                .map_err(|e| err(&loc, e))?;
                Ok((m.id.clone(), cs))
            })
            .collect::<Result<Vec<_>, DocumentError>>()?;
        out = out.with_unified(UnifiedSet {
            chart: chart(&u.chart, &format!("{here}.chart"))?,
            members,
        });
    }
    for (i, f) in doc.chart_forms.iter().enumerate() {
        let here = format!("{at}.chart_forms[{i}]");
        let key = match f.key.as_slice() {
            [a] => FormKey::Source(one_based(*a, &format!("{here}.key"))?),
            [a, b] => FormKey::Pair(one_based(*a, &format!("{here}.key"))?, one_based(*b, &format!("{here}.key"))?),
            _ => return Err(err(format!("{here}.key"), "expected [i] or [i, j]")),
        };
        let u = map(&f.u, &format!("{here}.u"))?;
        let v = f.v.as_ref().map(|v| map(v, &format!("{here}.v"))).transpose()?;
        out.chart_forms.insert(key, ProductFormMap::new(u, v));
        out.declared_forms.insert(key);
    }
    Ok(out)
}

impl SpecDocument {
    /// Parses JSON text; syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        let doc: SpecDocument = serde_json::from_str(text).map_err(|e| err("", e))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(err(
                "format_version",
                format!("unsupported version {:?}, expected {FORMAT_VERSION:?}", doc.format_version),
            ));
        }
        Ok(doc)
    }

    /// Canonical JSON: sorted keys, two-space indentation, shortest
    /// round-tripping decimals.
    pub fn to_json(&self) -> String {
        canonical_json(self)
    }

    pub fn to_spec(&self) -> Result<NetworkSpec, DocumentError> {
        let d = self.graph.d;
        let mut edges = BTreeSet::new();
        for (k, [m, l]) in self.graph.edges.iter().enumerate() {
            let at = format!("graph.edges[{k}]");
            edges.insert((one_based(*m, &at)?, one_based(*l, &at)?));
        }
        let graph = Graph { d, edges };
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(k, n)| node(n, &format!("nodes[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let kind = match self.coupling.kind.as_str() {
            "type_i" => CouplingKind::TypeI,
            "type_ii" => CouplingKind::TypeII,
            other => return Err(err("coupling.kind", format!("{other:?} is neither \"type_i\" nor \"type_ii\""))),
        };
        let a = matrix(&self.coupling.matrix, "coupling.matrix")?;
        let ambient = self
            .coupling
            .ambient
            .as_ref()
            .map(|m| map(m, "coupling.ambient"))
            .transpose()?;
        let mut per_entry = BTreeMap::new();
        for (k, e) in self.coupling.per_entry.iter().enumerate() {
            let at = format!("coupling.per_entry[{k}]");
            let idx = |v: &[usize]| v.iter().map(|&x| one_based(x, &at)).collect::<Result<Vec<_>, _>>();
            per_entry.insert(
                EntryIndex::new(idx(&e.i)?, idx(&e.j)?),
                matrix(&e.matrix, &format!("{at}.matrix"))?,
            );
        }
        NetworkSpec::assemble(graph, nodes, kind, a, ambient, per_entry).map_err(|e| err("", e))
    }

    /// The document describing `spec`. Derived chart forms and a default
    /// ambient coupling are left out, since loading rebuilds them.
    pub fn from_spec(spec: &NetworkSpec) -> Self {
        let graph = GraphDoc {
            d: spec.graph.d,
            edges: spec.graph.edges.iter().map(|&(m, l)| [m + 1, l + 1]).collect(),
        };
        let nodes = spec
            .nodes
            .iter()
            .map(|n| NodeDoc {
                map: map_doc(&n.local_map),
                hsets: n
                    .hsets
                    .iter()
                    .map(|h| HSetDoc {
                        id: h.id.clone(),
                        chart: chart_doc(&h.chart),
                    })
                    .collect(),
                transition: n.transition.rows(),
                unified: n.unified.as_ref().map(|u| UnifiedDoc {
                    chart: chart_doc(&u.chart),
                    members: u
                        .members
                        .iter()
                        .map(|(id, c)| MemberDoc {
                            id: id.clone(),
                            p_u: vec_doc(&c.p_u),
                            p_s: vec_doc(&c.p_s),
                            r: c.r.into(),
                        })
                        .collect(),
                }),
                chart_forms: n
                    .declared_forms
                    .iter()
                    .filter_map(|k| n.chart_forms.get(k).map(|f| (k, f)))
                    .map(|(k, f)| FormDoc {
                        key: match *k {
                            FormKey::Source(i) => vec![i + 1],
                            FormKey::Pair(i, j) => vec![i + 1, j + 1],
                        },
                        u: map_doc(&f.u),
                        v: f.v.as_ref().map(map_doc),
                    })
                    .collect(),
            })
            .collect();
        let c = &spec.coupling;
        let coupling = CouplingDoc {
            kind: match c.kind {
                CouplingKind::TypeI => "type_i".into(),
                CouplingKind::TypeII => "type_ii".into(),
            },
            matrix: matrix_doc(&c.matrix),
            ambient: c.ambient_declared.then(|| map_doc(&c.ambient)),
            per_entry: c
                .per_entry
                .iter()
                .map(|(e, m)| EntryMatrixDoc {
                    i: e.i.iter().map(|x| x + 1).collect(),
                    j: e.j.iter().map(|x| x + 1).collect(),
                    matrix: matrix_doc(m),
                })
                .collect(),
        };
        SpecDocument {
            format_version: FORMAT_VERSION.into(),
            graph,
            nodes,
            coupling,
        }
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

fn vec_doc(v: &[f64]) -> Vec<Real> {
    v.iter().map(|&x| x.into()).collect()
}

fn matrix_doc(m: &DMatrix<f64>) -> Vec<Vec<Real>> {
    m.row_iter().map(|r| r.iter().map(|&x| x.into()).collect()).collect()
}

fn piece_doc(p: &AffinePiece) -> PieceDoc {
    PieceDoc {
        linear: matrix_doc(&p.linear),
        offset: vec_doc(p.offset.as_slice()),
    }
}

fn map_doc(m: &PiecewiseAffineMap) -> MapDoc {
    match m.breakpoints() {
        Some(b) => MapDoc {
            breakpoints: Some(vec_doc(b)),
            pieces: Some(m.cells().iter().map(|c| piece_doc(&c.piece)).collect()),
            cells: None,
        },
        None => MapDoc {
            breakpoints: None,
            pieces: None,
            cells: Some(
                m.cells()
                    .iter()
                    .map(|c| {
                        let p = piece_doc(&c.piece);
                        CellDoc {
                            region: c
                                .region
                                .iter()
                                .map(|h| HalfSpaceDoc {
                                    normal: vec_doc(&h.normal),
                                    bound: h.bound.into(),
                                })
                                .collect(),
                            linear: p.linear,
                            offset: p.offset,
                        }
                    })
                    .collect(),
            ),
        },
    }
}

fn chart_doc(c: &AffineChart) -> ChartDoc {
    let n = c.dim();
    let linear = c.linear();
    ChartDoc {
        dim_s: c.dim_s(),
        linear: (linear != &DMatrix::identity(n, n)).then(|| matrix_doc(linear)),
        offset: vec_doc(c.offset().as_slice()),
    }
}

/// Sorted keys and two-space indentation, with a trailing newline.
pub fn canonical_json<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("documents serialize");
    let mut s = serde_json::to_string_pretty(&value).expect("values serialize");
    s.push('\n');
    s
}

/// Reads and loads a spec file.
pub fn load_spec(path: &std::path::Path) -> Result<(SpecDocument, NetworkSpec), DocumentError> {
    let text = std::fs::read_to_string(path).map_err(|e| err(path.display().to_string(), e))?;
    let doc = SpecDocument::from_json(&text)?;
    let spec = doc.to_spec()?;
    Ok((doc, spec))
}
