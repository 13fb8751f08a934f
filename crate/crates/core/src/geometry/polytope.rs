//! H-represented convex polyhedra and brute-force vertex enumeration.
//!
//! Dimensions in this crate are small (a handful of coordinates), so vertices
//! are found by solving every `dim`-subset of the active constraints. This is
//! exact up to the linear solve and makes max/min stretch computations over
//! piecewise-affine maps exact.

use nalgebra::{DMatrix, DVector};

/// Relative feasibility tolerance used when testing candidate vertices.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Closed half-space `normal · x <= bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub bound: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec<f64>, bound: f64) -> Self {
        Self { normal, bound }
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `normal · x - bound`; non-positive inside.
    #[inline]
    pub fn excess(&self, x: &[f64]) -> f64 {
        self.normal
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            - self.bound
    }

    #[inline]
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.excess(x) <= tol * (1.0 + self.bound.abs())
    }

    /// Substitutes `x[index] = value` and drops that coordinate.
    pub fn fix_coordinate(&self, index: usize, value: f64) -> HalfSpace {
        let mut normal = self.normal.clone();
        let a = normal.remove(index);
        HalfSpace::new(normal, self.bound - a * value)
    }

    /// Appends `extra` zero coefficients.
    pub fn lift(&self, extra: usize) -> HalfSpace {
        let mut normal = self.normal.clone();
        normal.extend(std::iter::repeat(0.0).take(extra));
        HalfSpace::new(normal, self.bound)
    }
}

/// Constraints of the box `∏ [lo_i, hi_i]`; infinite sides are skipped.
pub fn box_constraints(bounds: &[(f64, f64)]) -> Vec<HalfSpace> {
    let n = bounds.len();
    let mut out = Vec::with_capacity(2 * n);
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if hi.is_finite() {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            out.push(HalfSpace::new(e, hi));
        }
        if lo.is_finite() {
            let mut e = vec![0.0; n];
            e[i] = -1.0;
            out.push(HalfSpace::new(e, -lo));
        }
    }
    out
}

/// Constraints of the closed max-norm unit ball `[-1, 1]^dim`.
pub fn unit_box(dim: usize) -> Vec<HalfSpace> {
    box_constraints(&vec![(-1.0, 1.0); dim])
}

/// Number of `k`-subsets of `n` items, saturating.
pub fn combinations(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

pub fn contains_all(constraints: &[HalfSpace], x: &[f64], tol: f64) -> bool {
    constraints.iter().all(|h| h.contains(x, tol))
}

/// Vertices of `{x ∈ R^dim : h.normal · x <= h.bound for all h}`.
///
/// Returns an empty list for empty or vertex-free (non-pointed) polyhedra.
/// Duplicate vertices produced by degenerate constraint sets are merged.
pub fn vertices(constraints: &[HalfSpace], dim: usize) -> Vec<Vec<f64>> {
    if dim == 0 {
        return if constraints.iter().all(|h| 0.0 <= h.bound + FEASIBILITY_TOL) {
            vec![Vec::new()]
        } else {
            Vec::new()
        };
    }
    let m = constraints.len();
    if m < dim {
        return Vec::new();
    }
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..dim).collect();
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    loop {
        let mut scale = 1.0;
        for (r, &ci) in idx.iter().enumerate() {
            let h = &constraints[ci];
            let mut norm = 0.0f64;
            for c in 0..dim {
                a[(r, c)] = h.normal[c];
                norm = norm.max(h.normal[c].abs());
            }
            b[r] = h.bound;
            scale *= norm.max(f64::MIN_POSITIVE);
        }
        let lu = a.clone().lu();
        let det = lu.determinant();
        if det.abs() > 1e-12 * scale {
            if let Some(x) = lu.solve(&b) {
                let x: Vec<f64> = x.iter().copied().collect();
                if x.iter().all(|v| v.is_finite()) && contains_all(constraints, &x, FEASIBILITY_TOL) {
                    let dup = found.iter().any(|v| {
                        v.iter()
                            .zip(&x)
                            .all(|(p, q)| (p - q).abs() <= 1e-10 * (1.0 + p.abs()))
                    });
                    if !dup {
                        found.push(x);
                    }
                }
            }
        }
        // next combination
        let mut i = dim;
        while i > 0 && idx[i - 1] == i - 1 + m - dim {
            i -= 1;
        }
        if i == 0 {
            return found;
        }
        idx[i - 1] += 1;
        for j in i..dim {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Whether the polyhedron has a point satisfying every constraint with
/// strictly positive slack, i.e. a nonempty interior. Only meaningful for
/// bounded polyhedra.
pub fn has_interior(constraints: &[HalfSpace], dim: usize) -> bool {
    let verts = vertices(constraints, dim);
    if verts.len() <= dim {
        return false;
    }
    let mut centroid = vec![0.0; dim];
    for v in &verts {
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += x;
        }
    }
    for c in centroid.iter_mut() {
        *c /= verts.len() as f64;
    }
    constraints
        .iter()
        .all(|h| h.excess(&centroid) < -FEASIBILITY_TOL * (1.0 + h.bound.abs()))
}
