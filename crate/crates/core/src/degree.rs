//! Local Brouwer degree of affine and piecewise-affine maps on the max-norm
//! unit ball, plus the product and composition rules.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::geometry::pwa::PiecewiseAffineMap;
use crate::geometry::{polytope, GeometryError};

/// Distance below which a target point counts as lying on an image boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Determinants below this are treated as singular.
const SINGULAR_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegreeMethod {
    AffineDeterminant,
    OneDCrossing,
    PiecewiseSum,
    Product,
    Composition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeValue {
    pub value: i64,
    pub method: DegreeMethod,
}

impl DegreeValue {
    pub fn new(value: i64, method: DegreeMethod) -> Self {
        Self { value, method }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegreeError {
    #[error("singular linear part (det = {0:e})")]
    Singular(f64),
    #[error("target lies on the image of the boundary: {0}")]
    BoundaryCoincidence(String),
    #[error("preimage {0:?} lies on a boundary between cells")]
    CellBoundary(Vec<f64>),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// `deg(x ↦ Lx + b, B^u, q)`: `sgn det L` when the unique preimage lies in
/// the open ball, zero when it lies outside the closed ball.
pub fn degree_affine(
    linear: &DMatrix<f64>,
    offset: &DVector<f64>,
    q: &[f64],
) -> Result<DegreeValue, DegreeError> {
    let n = linear.nrows();
    if linear.ncols() != n || offset.len() != n || q.len() != n {
        return Err(DegreeError::Dimension {
            expected: n,
            found: q.len(),
        });
    }
    if n == 0 {
        return Ok(DegreeValue::new(1, DegreeMethod::AffineDeterminant));
    }
    let lu = linear.clone().lu();
    let det = lu.determinant();
    if det.abs() <= SINGULAR_TOL {
        return Err(DegreeError::Singular(det));
    }
    let rhs = DVector::from_column_slice(q) - offset;
    let x = lu.solve(&rhs).ok_or(DegreeError::Singular(det))?;
    let norm = x.amax();
    if (norm - 1.0).abs() <= BOUNDARY_TOL {
        return Err(DegreeError::BoundaryCoincidence(format!(
            "preimage {:?} is on the unit sphere",
            x.as_slice()
        )));
    }
    let value = if norm < 1.0 { sign(det) } else { 0 };
    Ok(DegreeValue::new(value, DegreeMethod::AffineDeterminant))
}

/// `(sgn(U(1) - q) - sgn(U(-1) - q)) / 2` for a map on `R`.
pub fn degree_1d(u: &PiecewiseAffineMap, q: f64) -> Result<DegreeValue, DegreeError> {
    if u.dim_in() != 1 || u.dim_out() != 1 {
        return Err(DegreeError::Dimension {
            expected: 1,
            found: u.dim_in().max(u.dim_out()),
        });
    }
    let hi = u.try_eval(&[1.0])?[0] - q;
    let lo = u.try_eval(&[-1.0])?[0] - q;
    if hi.abs() <= BOUNDARY_TOL || lo.abs() <= BOUNDARY_TOL {
        return Err(DegreeError::BoundaryCoincidence(format!(
            "U(-1) - q = {lo}, U(1) - q = {hi}"
        )));
    }
    Ok(DegreeValue::new((sign(hi) - sign(lo)) / 2, DegreeMethod::OneDCrossing))
}

/// Degree of a piecewise-affine map at `q` as the signed count of preimages.
///
/// Needs `q` off the image of the sphere, every preimage strictly inside its
/// cell, and nonsingular pieces wherever `q` is attained.
pub fn degree_piecewise(u: &PiecewiseAffineMap, q: &[f64]) -> Result<DegreeValue, DegreeError> {
    let n = u.dim_in();
    if u.dim_out() != n || q.len() != n {
        return Err(DegreeError::Dimension {
            expected: n,
            found: q.len(),
        });
    }
    let off_boundary = crate::geometry::min_stretch(u, q, crate::geometry::stretch::DEFAULT_GRID)?;
    if !(off_boundary.lower > BOUNDARY_TOL) {
        return Err(DegreeError::BoundaryCoincidence(format!(
            "distance from the image of the sphere is at most {}",
            off_boundary.upper
        )));
    }
    let ball = polytope::unit_box(n);
    let mut total = 0;
    for cell in u.cells() {
        let mut region = ball.clone();
        region.extend(cell.region.iter().cloned());
        if polytope::vertices(&region, n).is_empty() {
            continue;
        }
        let lu = cell.piece.linear.clone().lu();
        let det = lu.determinant();
        if det.abs() <= SINGULAR_TOL {
            return Err(DegreeError::Singular(det));
        }
        let rhs = DVector::from_column_slice(q) - &cell.piece.offset;
        let Some(x) = lu.solve(&rhs) else {
            return Err(DegreeError::Singular(det));
        };
        let x: Vec<f64> = x.iter().copied().collect();
        let tol = 1e-10;
        let inside = region.iter().all(|h| h.excess(&x) <= tol * (1.0 + h.bound.abs()));
        if !inside {
            continue;
        }
        let strictly = cell
            .region
            .iter()
            .all(|h| h.excess(&x) < -tol * (1.0 + h.bound.abs()));
        if !strictly {
            return Err(DegreeError::CellBoundary(x));
        }
        total += sign(det);
    }
    Ok(DegreeValue::new(total, DegreeMethod::PiecewiseSum))
}

/// Picks the cheapest exact rule for `deg(U, B^u, q)`.
pub fn degree(u: &PiecewiseAffineMap, q: &[f64]) -> Result<DegreeValue, DegreeError> {
    if u.dim_in() == 1 && u.dim_out() == 1 && q.len() == 1 {
        return degree_1d(u, q[0]);
    }
    if u.is_affine() {
        let p = &u.cells()[0].piece;
        return degree_affine(&p.linear, &p.offset, q);
    }
    degree_piecewise(u, q)
}

/// Product rule: the degree of `(φ, ψ)` at `(q, q')` is the product.
pub fn degree_product(parts: &[DegreeValue]) -> DegreeValue {
    DegreeValue::new(parts.iter().map(|d| d.value).product(), DegreeMethod::Product)
}

/// Composition with a nonsingular affine map: multiplies by `sgn det`.
pub fn degree_compose_affine(
    psi_linear: &DMatrix<f64>,
    inner: DegreeValue,
) -> Result<DegreeValue, DegreeError> {
    let det = psi_linear.determinant();
    if det.abs() <= SINGULAR_TOL {
        return Err(DegreeError::Singular(det));
    }
    Ok(DegreeValue::new(sign(det) * inner.value, DegreeMethod::Composition))
}
