//! Minimum and maximum stretch of piecewise-affine maps over the max-norm
//! unit ball.
//!
//! The maximum of `|F(x) - p|∞` over the ball is attained at a vertex of some
//! `cell ∩ [-1,1]^u`, since the objective is convex on each cell. The minimum
//! over the boundary is a small linear program per `facet ∩ cell`:
//! minimise `t` subject to `-t <= (A x + b - p)_i <= t`. Its optimum sits at a
//! vertex of the lifted polyhedron in `(x, t)`, which is enumerated directly.
//! When the enumeration would be too large the facets are sampled on a grid
//! and the bound carries Lipschitz slack.

use serde::Serialize;

use super::polytope::{self, HalfSpace};
use super::pwa::PiecewiseAffineMap;
use super::GeometryError;

/// Default number of grid points per facet axis for the sampled fallback.
pub const DEFAULT_GRID: usize = 64;

/// Enumerations with more candidate vertex systems than this use the grid.
const ENUMERATION_BUDGET: u128 = 2_000_000;

/// A stretch value bracketed as `lower <= true value <= upper`.
///
/// Both ends coincide when the value was computed exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stretch {
    #[serde(serialize_with = "crate::report::real::f64")]
    pub lower: f64,
    #[serde(serialize_with = "crate::report::real::f64")]
    pub upper: f64,
}

impl Stretch {
    pub fn exact(v: f64) -> Self {
        Self { lower: v, upper: v }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    /// The value when exact, otherwise the conservative end for a minimum.
    pub fn value(&self) -> f64 {
        self.lower
    }

    pub fn scale(&self, c: f64) -> Self {
        let (a, b) = (self.lower * c.abs(), self.upper * c.abs());
        Self { lower: a, upper: b }
    }
}

/// Lower bound on the minimum stretch and upper bound on the maximum stretch
/// of one map relative to one reference point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StretchBounds {
    pub min_rel: f64,
    pub max_abs: f64,
    pub certified: bool,
}

fn check_dims(f: &PiecewiseAffineMap, reference: &[f64]) -> Result<(), GeometryError> {
    if reference.len() != f.dim_out() {
        return Err(GeometryError::Dimension {
            expected: f.dim_out(),
            found: reference.len(),
        });
    }
    Ok(())
}

fn dist(y: &[f64], p: &[f64]) -> f64 {
    y.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `max { |F(x) - reference|∞ : x ∈ [-1,1]^u }`, exact.
pub fn max_stretch(f: &PiecewiseAffineMap, reference: &[f64]) -> Result<Stretch, GeometryError> {
    check_dims(f, reference)?;
    f.ensure_total_on_ball()?;
    let n = f.dim_in();
    let verts = f.cell_vertices(&polytope::unit_box(n));
    if verts.is_empty() {
        return Err(GeometryError::Undefined("the closed unit ball".into()));
    }
    let mut y = vec![0.0; f.dim_out()];
    let mut best = 0.0f64;
    for (ci, v) in &verts {
        f.cells()[*ci].piece.eval_into(v, &mut y);
        best = best.max(dist(&y, reference));
    }
    Ok(Stretch::exact(best))
}

/// `min { |F(x) - reference|∞ : x ∈ ∂[-1,1]^u }`.
///
/// Exact for `u = 1` and whenever the vertex enumeration fits its budget;
/// otherwise each facet is sampled with `grid` points per axis and the lower
/// end is the sampled minimum less the Lipschitz constant times the covering
/// radius of the grid.
pub fn min_stretch(
    f: &PiecewiseAffineMap,
    reference: &[f64],
    grid: usize,
) -> Result<Stretch, GeometryError> {
    check_dims(f, reference)?;
    f.ensure_total_on_ball()?;
    let u = f.dim_in();
    if u == 0 {
        return Ok(Stretch::exact(f64::INFINITY));
    }
    if u == 1 {
        let a = f.try_eval(&[-1.0])?;
        let b = f.try_eval(&[1.0])?;
        return Ok(Stretch::exact(dist(&a, reference).min(dist(&b, reference))));
    }
    if enumeration_cost(f) <= ENUMERATION_BUDGET {
        min_stretch_exact(f, reference)
    } else {
        min_stretch_grid(f, reference, grid.max(2))
    }
}

/// Both stretches at once, relative to the same reference point.
pub fn stretch_bounds(
    f: &PiecewiseAffineMap,
    reference: &[f64],
    grid: usize,
) -> Result<StretchBounds, GeometryError> {
    let lo = min_stretch(f, reference, grid)?;
    let hi = max_stretch(f, reference)?;
    Ok(StretchBounds {
        min_rel: lo.lower,
        max_abs: hi.upper,
        certified: lo.is_exact() && hi.is_exact(),
    })
}

fn enumeration_cost(f: &PiecewiseAffineMap) -> u128 {
    let u = f.dim_in();
    let m = f.dim_out();
    f.cells()
        .iter()
        .map(|c| {
            let rows = 2 * (u - 1) + c.region.len() + 2 * m;
            polytope::combinations(rows, u)
        })
        .fold(0u128, |a, b| a.saturating_add(b))
        .saturating_mul(2 * u as u128)
}

fn min_stretch_exact(f: &PiecewiseAffineMap, reference: &[f64]) -> Result<Stretch, GeometryError> {
    let u = f.dim_in();
    let m = f.dim_out();
    let mut best = f64::INFINITY;
    let mut covered = false;
    for beta in 0..u {
        for sigma in [-1.0, 1.0] {
            for cell in f.cells() {
                // variables (x without x_beta, t)
                let mut cons: Vec<HalfSpace> = polytope::unit_box(u - 1)
                    .into_iter()
                    .map(|h| h.lift(1))
                    .collect();
                for h in &cell.region {
                    cons.push(h.fix_coordinate(beta, sigma).lift(1));
                }
                let lin = &cell.piece.linear;
                let off = &cell.piece.offset;
                for i in 0..m {
                    let mut row: Vec<f64> = (0..u).map(|c| lin[(i, c)]).collect();
                    let fixed = row.remove(beta) * sigma;
                    let c = off[i] + fixed - reference[i];
                    // row·x + c <= t  and  -(row·x + c) <= t
                    let mut a = row.clone();
                    a.push(-1.0);
                    cons.push(HalfSpace::new(a, -c));
                    let mut b: Vec<f64> = row.iter().map(|v| -v).collect();
                    b.push(-1.0);
                    cons.push(HalfSpace::new(b, c));
                }
                for v in polytope::vertices(&cons, u) {
                    covered = true;
                    let mut x = v[..u - 1].to_vec();
                    x.insert(beta, sigma);
                    // recompute rather than trust the solved t
                    let y = cell.piece.eval(&x);
                    best = best.min(dist(&y, reference));
                }
            }
        }
    }
    if !covered {
        return Err(GeometryError::Undefined("the unit sphere".into()));
    }
    Ok(Stretch::exact(best))
}

fn min_stretch_grid(
    f: &PiecewiseAffineMap,
    reference: &[f64],
    grid: usize,
) -> Result<Stretch, GeometryError> {
    let u = f.dim_in();
    let h = 2.0 / (grid - 1) as f64;
    let lip = f.lipschitz();
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; u - 1];
    let mut x = vec![0.0; u];
    let mut y = vec![0.0; f.dim_out()];
    for beta in 0..u {
        for sigma in [-1.0, 1.0] {
            idx.iter_mut().for_each(|i| *i = 0);
            loop {
                let mut k = 0;
                for (c, xc) in x.iter_mut().enumerate() {
                    if c == beta {
                        *xc = sigma;
                    } else {
                        *xc = -1.0 + h * idx[k] as f64;
                        k += 1;
                    }
                }
                if f.eval_into(&x, &mut y).is_none() {
                    return Err(GeometryError::Undefined(format!("{x:?}")));
                }
                best = best.min(dist(&y, reference));
                let mut d = 0;
                while d < idx.len() {
                    idx[d] += 1;
                    if idx[d] < grid {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == idx.len() {
                    break;
                }
            }
        }
    }
    Ok(Stretch {
        lower: best - lip * h / 2.0,
        upper: best,
    })
}

#[cfg(test)]
pub(crate) fn min_stretch_sampled(
    f: &PiecewiseAffineMap,
    reference: &[f64],
    grid: usize,
) -> Stretch {
    min_stretch_grid(f, reference, grid).unwrap()
}
