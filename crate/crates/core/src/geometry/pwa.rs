use nalgebra::{DMatrix, DVector};

use super::polytope::{self, HalfSpace};
use super::GeometryError;

/// Absolute tolerance for agreement of adjacent pieces on shared boundaries.
pub const CONTINUITY_TOL: f64 = 1e-9;

/// Tolerance used when locating a point in a cell.
const LOCATE_TOL: f64 = 1e-12;

/// `x ↦ linear · x + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePiece {
    pub linear: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffinePiece {
    pub fn new(linear: DMatrix<f64>, offset: DVector<f64>) -> Result<Self, GeometryError> {
        if linear.nrows() != offset.len() {
            return Err(GeometryError::Dimension {
                expected: linear.nrows(),
                found: offset.len(),
            });
        }
        Ok(Self { linear, offset })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            linear: DMatrix::identity(n, n),
            offset: DVector::zeros(n),
        }
    }

    pub fn linear_map(linear: DMatrix<f64>) -> Self {
        let n = linear.nrows();
        Self {
            linear,
            offset: DVector::zeros(n),
        }
    }

    /// One-dimensional `x ↦ slope · x + intercept`.
    pub fn scalar(slope: f64, intercept: f64) -> Self {
        Self {
            linear: DMatrix::from_element(1, 1, slope),
            offset: DVector::from_element(1, intercept),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.linear.ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.linear.nrows()
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let (rows, cols) = self.linear.shape();
        for r in 0..rows {
            let mut acc = self.offset[r];
            for c in 0..cols {
                acc += self.linear[(r, c)] * x[c];
            }
            out[r] = acc;
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out()];
        self.eval_into(x, &mut out);
        out
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffinePiece) -> AffinePiece {
        AffinePiece {
            linear: &self.linear * &inner.linear,
            offset: &self.linear * &inner.offset + &self.offset,
        }
    }

    pub fn try_inverse(&self) -> Option<AffinePiece> {
        let inv = self.linear.clone().try_inverse()?;
        let offset = -(&inv * &self.offset);
        Some(AffinePiece {
            linear: inv,
            offset,
        })
    }

    /// Operator norm of the linear part induced by the max-norm (max row sum).
    pub fn inf_norm(&self) -> f64 {
        matrix_inf_norm(&self.linear)
    }

    pub fn scaled(&self, c: f64) -> AffinePiece {
        AffinePiece {
            linear: &self.linear * c,
            offset: &self.offset * c,
        }
    }

    /// Output translated by `-shift`.
    pub fn shifted(&self, shift: &[f64]) -> AffinePiece {
        let mut offset = self.offset.clone();
        for (o, s) in offset.iter_mut().zip(shift) {
            *o -= s;
        }
        AffinePiece {
            linear: self.linear.clone(),
            offset,
        }
    }

    /// Block-diagonal assembly `(x_1, …, x_d) ↦ (f_1(x_1), …, f_d(x_d))`.
    pub fn block_diag(parts: &[&AffinePiece]) -> AffinePiece {
        let rows: usize = parts.iter().map(|p| p.dim_out()).sum();
        let cols: usize = parts.iter().map(|p| p.dim_in()).sum();
        let mut linear = DMatrix::zeros(rows, cols);
        let mut offset = DVector::zeros(rows);
        let (mut r0, mut c0) = (0, 0);
        for p in parts {
            linear
                .view_mut((r0, c0), (p.dim_out(), p.dim_in()))
                .copy_from(&p.linear);
            offset.rows_mut(r0, p.dim_out()).copy_from(&p.offset);
            r0 += p.dim_out();
            c0 += p.dim_in();
        }
        AffinePiece { linear, offset }
    }

    fn approx_eq(&self, other: &AffinePiece, tol: f64) -> bool {
        self.linear.shape() == other.linear.shape()
            && self
                .linear
                .iter()
                .zip(other.linear.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
            && self
                .offset
                .iter()
                .zip(other.offset.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// Max row sum of absolute values.
pub fn matrix_inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `m ⊗ I_k`.
pub fn kron_identity(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(r * k, c * k);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            if v != 0.0 {
                for t in 0..k {
                    out[(i * k + t, j * k + t)] = v;
                }
            }
        }
    }
    out
}

/// A polyhedral region with the affine piece that applies on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub region: Vec<HalfSpace>,
    pub piece: AffinePiece,
}

/// Continuous map given by affine pieces on polyhedral cells.
///
/// One-dimensional maps built with [`PiecewiseAffineMap::from_breakpoints`]
/// remember their sorted breakpoints; every other constructor stores cells
/// only. The first cell containing a point decides its value, which is
/// harmless because adjacent pieces agree on shared boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffineMap {
    dim_in: usize,
    dim_out: usize,
    cells: Vec<Cell>,
    breakpoints: Option<Vec<f64>>,
}

impl PiecewiseAffineMap {
    pub fn new(dim_in: usize, dim_out: usize, cells: Vec<Cell>) -> Result<Self, GeometryError> {
        if cells.is_empty() {
            return Err(GeometryError::EmptyMap);
        }
        for cell in &cells {
            if cell.piece.dim_in() != dim_in {
                return Err(GeometryError::Dimension {
                    expected: dim_in,
                    found: cell.piece.dim_in(),
                });
            }
            if cell.piece.dim_out() != dim_out {
                return Err(GeometryError::Dimension {
                    expected: dim_out,
                    found: cell.piece.dim_out(),
                });
            }
            if let Some(h) = cell.region.iter().find(|h| h.dim() != dim_in) {
                return Err(GeometryError::Dimension {
                    expected: dim_in,
                    found: h.dim(),
                });
            }
        }
        Ok(Self {
            dim_in,
            dim_out,
            cells,
            breakpoints: None,
        })
    }

    /// A single affine piece on the whole space.
    pub fn affine(piece: AffinePiece) -> Self {
        Self {
            dim_in: piece.dim_in(),
            dim_out: piece.dim_out(),
            cells: vec![Cell {
                region: Vec::new(),
                piece,
            }],
            breakpoints: None,
        }
    }

    pub fn linear(m: DMatrix<f64>) -> Self {
        Self::affine(AffinePiece::linear_map(m))
    }

    pub fn identity(n: usize) -> Self {
        Self::affine(AffinePiece::identity(n))
    }

    /// One-dimensional input split at strictly increasing `breakpoints`;
    /// `pieces[i]` applies between breakpoint `i-1` and `i`.
    pub fn from_breakpoints(
        breakpoints: Vec<f64>,
        pieces: Vec<AffinePiece>,
    ) -> Result<Self, GeometryError> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(GeometryError::Breakpoints(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(GeometryError::Breakpoints(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        let dim_out = pieces[0].dim_out();
        let mut cells = Vec::with_capacity(pieces.len());
        for (i, piece) in pieces.into_iter().enumerate() {
            let mut region = Vec::new();
            if i > 0 {
                region.push(HalfSpace::new(vec![-1.0], -breakpoints[i - 1]));
            }
            if i < breakpoints.len() {
                region.push(HalfSpace::new(vec![1.0], breakpoints[i]));
            }
            cells.push(Cell { region, piece });
        }
        let mut map = Self::new(1, dim_out, cells)?;
        map.breakpoints = Some(breakpoints);
        Ok(map)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn breakpoints(&self) -> Option<&[f64]> {
        self.breakpoints.as_deref()
    }

    pub fn is_affine(&self) -> bool {
        self.cells
            .iter()
            .all(|c| c.piece.approx_eq(&self.cells[0].piece, 0.0))
    }

    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.cells
            .iter()
            .position(|c| polytope::contains_all(&c.region, x, LOCATE_TOL))
    }

    /// Evaluates into `out`; returns the index of the cell used.
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Option<usize> {
        let idx = self.locate(x)?;
        self.cells[idx].piece.eval_into(x, out);
        Some(idx)
    }

    pub fn eval(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.dim_out];
        self.eval_into(x, &mut out).map(|_| out)
    }

    /// Like [`eval`](Self::eval) with a dimension check and an error for
    /// points outside every cell.
    pub fn try_eval(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        if x.len() != self.dim_in {
            return Err(GeometryError::Dimension {
                expected: self.dim_in,
                found: x.len(),
            });
        }
        self.eval(x)
            .ok_or_else(|| GeometryError::Undefined(format!("{x:?}")))
    }

    /// `self ∘ inner` for an affine `inner`.
    pub fn precompose(&self, inner: &AffinePiece) -> PiecewiseAffineMap {
        assert_eq!(inner.dim_out(), self.dim_in, "precompose dimension");
        let cells = self
            .cells
            .iter()
            .map(|c| Cell {
                region: c
                    .region
                    .iter()
                    .map(|h| {
                        // n·(L z + o) <= b  <=>  (Lᵀ n)·z <= b - n·o
                        let n = DVector::from_column_slice(&h.normal);
                        let normal = inner.linear.transpose() * &n;
                        HalfSpace::new(normal.iter().copied().collect(), h.bound - n.dot(&inner.offset))
                    })
                    .collect(),
                piece: c.piece.compose(inner),
            })
            .collect();
        PiecewiseAffineMap {
            dim_in: inner.dim_in(),
            dim_out: self.dim_out,
            cells,
            breakpoints: None,
        }
    }

    /// `outer ∘ self` for an affine `outer`.
    pub fn postcompose(&self, outer: &AffinePiece) -> PiecewiseAffineMap {
        assert_eq!(outer.dim_in(), self.dim_out, "postcompose dimension");
        PiecewiseAffineMap {
            dim_in: self.dim_in,
            dim_out: outer.dim_out(),
            cells: self
                .cells
                .iter()
                .map(|c| Cell {
                    region: c.region.clone(),
                    piece: outer.compose(&c.piece),
                })
                .collect(),
            breakpoints: self.breakpoints.clone(),
        }
    }

    /// `x ↦ c · self(x)`.
    pub fn scaled(&self, c: f64) -> PiecewiseAffineMap {
        self.map_pieces(|p| p.scaled(c))
    }

    /// `x ↦ self(x) - shift`.
    pub fn shifted(&self, shift: &[f64]) -> PiecewiseAffineMap {
        self.map_pieces(|p| p.shifted(shift))
    }

    fn map_pieces(&self, f: impl Fn(&AffinePiece) -> AffinePiece) -> PiecewiseAffineMap {
        PiecewiseAffineMap {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            cells: self
                .cells
                .iter()
                .map(|c| Cell {
                    region: c.region.clone(),
                    piece: f(&c.piece),
                })
                .collect(),
            breakpoints: self.breakpoints.clone(),
        }
    }

    /// Upper bound on the max-norm Lipschitz constant: the largest piece norm.
    /// Exact for continuous maps whose pieces all matter.
    pub fn lipschitz(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.piece.inf_norm())
            .fold(0.0, f64::max)
    }

    /// Vertices of every `cell ∩ domain`, tagged with the cell index.
    pub fn cell_vertices(&self, domain: &[HalfSpace]) -> Vec<(usize, Vec<f64>)> {
        let mut out = Vec::new();
        for (i, cell) in self.cells.iter().enumerate() {
            let mut cons = domain.to_vec();
            cons.extend(cell.region.iter().cloned());
            for v in polytope::vertices(&cons, self.dim_in) {
                out.push((i, v));
            }
        }
        out
    }

    /// Componentwise bounds of the image of a bounded polyhedral `domain`.
    /// Exact, since each piece maps `cell ∩ domain` onto the hull of its
    /// vertex images.
    pub fn image_bounds(&self, domain: &[HalfSpace]) -> Option<Vec<(f64, f64)>> {
        let verts = self.cell_vertices(domain);
        if verts.is_empty() {
            return None;
        }
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim_out];
        let mut y = vec![0.0; self.dim_out];
        for (ci, v) in &verts {
            self.cells[*ci].piece.eval_into(v, &mut y);
            for (b, val) in bounds.iter_mut().zip(&y) {
                b.0 = b.0.min(*val);
                b.1 = b.1.max(*val);
            }
        }
        Some(bounds)
    }

    /// Checks that adjacent pieces agree on shared boundaries inside
    /// `domain`. Two affine pieces agree on a convex set iff they agree on its
    /// vertices, so the check is exact up to the tolerance.
    pub fn check_continuity(&self, domain: &[HalfSpace]) -> Result<(), GeometryError> {
        if let Some(bp) = &self.breakpoints {
            for (i, b) in bp.iter().enumerate() {
                if !polytope::contains_all(domain, &[*b], LOCATE_TOL) {
                    continue;
                }
                let left = self.cells[i].piece.eval(&[*b]);
                let right = self.cells[i + 1].piece.eval(&[*b]);
                let gap = max_abs_diff(&left, &right);
                if gap > CONTINUITY_TOL {
                    return Err(GeometryError::Discontinuous {
                        at: vec![*b],
                        gap,
                    });
                }
            }
            return Ok(());
        }
        for i in 0..self.cells.len() {
            for j in i + 1..self.cells.len() {
                let mut cons = domain.to_vec();
                cons.extend(self.cells[i].region.iter().cloned());
                cons.extend(self.cells[j].region.iter().cloned());
                for v in polytope::vertices(&cons, self.dim_in) {
                    let a = self.cells[i].piece.eval(&v);
                    let b = self.cells[j].piece.eval(&v);
                    let gap = max_abs_diff(&a, &b);
                    if gap > CONTINUITY_TOL {
                        return Err(GeometryError::Discontinuous { at: v, gap });
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that no two cells share interior points inside `domain`.
    pub fn check_disjoint_interiors(&self, domain: &[HalfSpace]) -> Result<(), GeometryError> {
        for i in 0..self.cells.len() {
            for j in i + 1..self.cells.len() {
                let mut cons = domain.to_vec();
                cons.extend(self.cells[i].region.iter().cloned());
                cons.extend(self.cells[j].region.iter().cloned());
                if polytope::has_interior(&cons, self.dim_in) {
                    return Err(GeometryError::OverlappingCells(i, j));
                }
            }
        }
        Ok(())
    }

    /// Sampled check that every point of the closed unit ball lies in some
    /// cell: all box vertices plus a coarse grid. Breakpoint maps are total.
    pub fn ensure_total_on_ball(&self) -> Result<(), GeometryError> {
        if self.breakpoints.is_some() || self.cells.iter().any(|c| c.region.is_empty()) {
            return Ok(());
        }
        let n = self.dim_in;
        let per_axis: usize = match n {
            0..=2 => 17,
            3 => 9,
            4 => 5,
            _ => 3,
        };
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        loop {
            for (xi, &k) in x.iter_mut().zip(&idx) {
                *xi = -1.0 + 2.0 * k as f64 / (per_axis - 1) as f64;
            }
            if self.locate(&x).is_none() {
                return Err(GeometryError::Undefined(format!("{x:?}")));
            }
            let mut d = 0;
            loop {
                if d == n {
                    return Ok(());
                }
                idx[d] += 1;
                if idx[d] < per_axis {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_t1() -> PiecewiseAffineMap {
        PiecewiseAffineMap::from_breakpoints(
            vec![1.5],
            vec![AffinePiece::scalar(3.5, 1.5), AffinePiece::scalar(2.0, -6.0)],
        )
        .unwrap()
    }

    #[test]
    fn breakpoint_map_evaluates_by_interval() {
        let t = example_t1();
        assert_eq!(t.eval(&[-0.6]).unwrap()[0], 3.5 * -0.6 + 1.5);
        assert_eq!(t.eval(&[3.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn example_map_jumps_only_between_hsets() {
        // 3.5·1.5+1.5 = 6.75 versus 2·1.5-6 = -3
        assert!(matches!(
            example_t1().check_continuity(&[]),
            Err(GeometryError::Discontinuous { .. })
        ));
        // continuous on [-1,1] and on [2,4]
        example_t1().check_continuity(&polytope::unit_box(1)).unwrap();
        example_t1()
            .check_continuity(&polytope::box_constraints(&[(2.0, 4.0)]))
            .unwrap();
        let tent = PiecewiseAffineMap::from_breakpoints(
            vec![0.0],
            vec![AffinePiece::scalar(2.0, 1.0), AffinePiece::scalar(-2.0, 1.0)],
        )
        .unwrap();
        tent.check_continuity(&[]).unwrap();
    }

    #[test]
    fn precompose_moves_regions() {
        // T(x+3) on [2,4] should use the x>3/2 piece: 2(x+3)-6 = 2x
        let u = example_t1().precompose(&AffinePiece::scalar(1.0, 3.0));
        for x in [-1.0, 0.0, 1.0] {
            assert!((u.eval(&[x]).unwrap()[0] - 2.0 * x).abs() < 1e-15);
        }
    }

    #[test]
    fn image_bounds_of_interval() {
        let t = example_t1();
        let b = t.image_bounds(&polytope::unit_box(1)).unwrap();
        assert_eq!(b[0], (-2.0, 5.0));
    }

    #[test]
    fn kron_identity_layout() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let k = kron_identity(&m, 2);
        assert_eq!(k[(0, 2)], 2.0);
        assert_eq!(k[(3, 1)], 3.0);
        assert_eq!(k[(1, 0)], 0.0);
    }

    #[test]
    fn overlapping_cells_detected() {
        let cells = vec![
            Cell {
                region: vec![HalfSpace::new(vec![1.0], 0.5)],
                piece: AffinePiece::scalar(1.0, 0.0),
            },
            Cell {
                region: vec![HalfSpace::new(vec![-1.0], 0.5)],
                piece: AffinePiece::scalar(1.0, 0.0),
            },
        ];
        let m = PiecewiseAffineMap::new(1, 1, cells).unwrap();
        assert!(m.check_disjoint_interiors(&polytope::unit_box(1)).is_err());
    }
}
