use nalgebra::{DMatrix, DVector};

use super::chart::AffineChart;
use super::polytope::{self, HalfSpace};
use super::GeometryError;
use crate::ValidationReport;

/// Spacing between consecutive unstable centers of a unified set.
pub const UNIFIED_SPACING: f64 = 3.0;

/// Compact set `chart⁻¹([-1,1]^u × [-1,1]^s)` with its splitting.
#[derive(Clone, Debug, PartialEq)]
pub struct HSet {
    pub id: String,
    pub chart: AffineChart,
}

impl HSet {
    pub fn new(id: impl Into<String>, chart: AffineChart) -> Self {
        Self {
            id: id.into(),
            chart,
        }
    }

    pub fn dim_u(&self) -> usize {
        self.chart.dim_u()
    }

    pub fn dim_s(&self) -> usize {
        self.chart.dim_s()
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Max-norm of the chart coordinates; the set is where this is `<= 1`.
    pub fn chart_norm(&self, x: &[f64]) -> f64 {
        self.chart
            .as_piece()
            .eval(x)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.chart_norm(x) <= 1.0 + tol
    }

    /// The set as an intersection of half-spaces in ambient coordinates.
    pub fn constraints(&self) -> Vec<HalfSpace> {
        let lin = self.chart.linear();
        let off = self.chart.offset();
        let n = self.dim();
        let mut out = Vec::with_capacity(2 * n);
        for r in 0..n {
            let row: Vec<f64> = (0..n).map(|c| lin[(r, c)]).collect();
            // -1 <= row·x + off_r <= 1
            out.push(HalfSpace::new(row.clone(), 1.0 - off[r]));
            out.push(HalfSpace::new(row.iter().map(|v| -v).collect(), 1.0 + off[r]));
        }
        out
    }

    /// Corners of the parallelepiped in ambient coordinates.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let inv = self.chart.inverse_piece();
        (0..1usize << n)
            .map(|mask| {
                let c: Vec<f64> = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                    .collect();
                inv.eval(&c)
            })
            .collect()
    }

    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim()];
        for c in self.corners() {
            for (bi, v) in b.iter_mut().zip(c) {
                bi.0 = bi.0.min(v);
                bi.1 = bi.1.max(v);
            }
        }
        b
    }

    /// Whether two h-sets share a point (touching counts).
    pub fn intersects(&self, other: &HSet) -> bool {
        let mut cons = self.constraints();
        cons.extend(other.constraints());
        !polytope::vertices(&cons, self.dim()).is_empty()
    }
}

/// Unstable/stable center and stable radius of one member of a unified set,
/// inducing `g(x, y) = (x - p_u, (y - p_s) / r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterScale {
    pub p_u: Vec<f64>,
    pub p_s: Vec<f64>,
    pub r: f64,
}

impl CenterScale {
    pub fn new(p_u: Vec<f64>, p_s: Vec<f64>, r: f64) -> Result<Self, GeometryError> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(GeometryError::Radius(r));
        }
        Ok(Self { p_u, p_s, r })
    }

    /// Center at the origin with radius one.
    pub fn unit(dim_u: usize, dim_s: usize) -> Self {
        Self {
            p_u: vec![0.0; dim_u],
            p_s: vec![0.0; dim_s],
            r: 1.0,
        }
    }

    pub fn dim_u(&self) -> usize {
        self.p_u.len()
    }

    pub fn dim_s(&self) -> usize {
        self.p_s.len()
    }

    /// The map `g` as a chart.
    pub fn chart(&self) -> Result<AffineChart, GeometryError> {
        let (u, s) = (self.dim_u(), self.dim_s());
        let n = u + s;
        let mut lin = DMatrix::identity(n, n);
        let mut off = DVector::zeros(n);
        for i in 0..u {
            off[i] = -self.p_u[i];
        }
        for j in 0..s {
            lin[(u + j, u + j)] = 1.0 / self.r;
            off[u + j] = -self.p_s[j] / self.r;
        }
        AffineChart::new(u, s, lin, off)
    }
}

/// A family of disjoint h-sets sharing one chart, in which member `i` is
/// `B̄^u(p_u_i, 1) × B̄^s(p_s_i, r_i)` with `p_u_i = (3i, 0, …, 0)` (zero-based).
#[derive(Clone, Debug, PartialEq)]
pub struct UnifiedSet {
    pub chart: AffineChart,
    pub members: Vec<(String, CenterScale)>,
}

impl UnifiedSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The expected unstable center of member `i` (zero-based).
    pub fn expected_center(&self, i: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.chart.dim_u()];
        if let Some(first) = p.first_mut() {
            *first = UNIFIED_SPACING * i as f64;
        }
        p
    }

    /// Center `q^u = ((3d-3)/2, 0, …)` and unstable radius `(3d-1)/2` of the
    /// enclosing set.
    pub fn enclosing_ball(&self) -> (Vec<f64>, f64) {
        let d = self.members.len() as f64;
        let mut q = vec![0.0; self.chart.dim_u()];
        if let Some(first) = q.first_mut() {
            *first = (3.0 * d - 3.0) / 2.0;
        }
        (q, (3.0 * d - 1.0) / 2.0)
    }

    /// Chart of member `i`: `g_i ∘ ĉ`.
    pub fn member_chart(&self, i: usize) -> Result<AffineChart, GeometryError> {
        self.members[i].1.chart()?.compose(&self.chart)
    }

    pub fn member_hset(&self, i: usize) -> Result<HSet, GeometryError> {
        Ok(HSet::new(self.members[i].0.clone(), self.member_chart(i)?))
    }
}

const CENTER_TOL: f64 = 1e-12;

/// Checks every structural requirement of a unified set and reports each
/// violated clause with its member index (one-based in messages).
pub fn unified_validate(n: &UnifiedSet) -> ValidationReport {
    let mut report = ValidationReport::new();
    let (u, s) = (n.chart.dim_u(), n.chart.dim_s());
    if n.members.is_empty() {
        report.violation("members", "a unified set needs at least one member");
        return report;
    }
    if u == 0 {
        report.violation("chart", "unified sets need at least one unstable direction");
        return report;
    }
    for (i, (id, cs)) in n.members.iter().enumerate() {
        let loc = format!("members[{i}]");
        if cs.dim_u() != u || cs.dim_s() != s {
            report.violation(
                &loc,
                format!("member {id} has center dimensions ({}, {}), chart has ({u}, {s})", cs.dim_u(), cs.dim_s()),
            );
            continue;
        }
        let expected = n.expected_center(i);
        if cs
            .p_u
            .iter()
            .zip(&expected)
            .any(|(a, b)| (a - b).abs() > CENTER_TOL)
        {
            report.violation(
                &loc,
                format!(
                    "unstable center of member {} is {:?}, expected {:?} (spacing must be 3)",
                    i + 1,
                    cs.p_u,
                    expected
                ),
            );
        }
        if !(cs.r > 0.0 && cs.r <= 1.0) {
            report.violation(&loc, format!("radius {} of member {} is outside (0, 1]", cs.r, i + 1));
        }
        if let Some((first, rest)) = cs.p_s.split_first() {
            if !(first.abs() < 1.0) {
                report.violation(
                    &loc,
                    format!("stable center {} of member {} must satisfy |q| < 1", first, i + 1),
                );
            }
            if rest.iter().any(|v| *v != 0.0) {
                report.violation(
                    &loc,
                    format!("stable center of member {} must vanish beyond its first coordinate", i + 1),
                );
            }
            if cs.r > 0.0 && first.abs() + cs.r > 1.0 + CENTER_TOL {
                report.violation(
                    &loc,
                    format!("stable ball of member {} leaves the enclosing set", i + 1),
                );
            }
        }
    }
    for i in 0..n.members.len() {
        for j in i + 1..n.members.len() {
            let (a, b) = (&n.members[i].1, &n.members[j].1);
            if a.dim_u() != u || b.dim_u() != u {
                continue;
            }
            let dist = a
                .p_u
                .iter()
                .zip(&b.p_u)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if dist <= 2.0 {
                report.violation(
                    format!("members[{j}]"),
                    format!("unstable balls of members {} and {} intersect", i + 1, j + 1),
                );
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_example_unified() -> UnifiedSet {
        UnifiedSet {
            chart: AffineChart::identity(1, 0),
            members: vec![
                ("M11".into(), CenterScale::new(vec![0.0], vec![], 1.0).unwrap()),
                ("M12".into(), CenterScale::new(vec![3.0], vec![], 1.0).unwrap()),
            ],
        }
    }

    #[test]
    fn first_example_unified_set_is_valid() {
        let n = first_example_unified();
        assert!(unified_validate(&n).is_valid());
        let (q, rad) = n.enclosing_ball();
        assert_eq!(q, vec![1.5]);
        assert_eq!(rad, 2.5);
        // member chart of M12 is x - 3
        assert_eq!(n.member_chart(1).unwrap().apply(&[2.0]).unwrap(), vec![-1.0]);
    }

    #[test]
    fn wrong_spacing_is_reported() {
        let mut n = first_example_unified();
        n.members[1].1.p_u = vec![2.0];
        let r = unified_validate(&n);
        assert!(!r.is_valid());
        assert!(r.violations[0].message.contains("spacing must be 3"));
    }

    #[test]
    fn zero_radius_is_reported() {
        let mut n = first_example_unified();
        n.members[0].1.r = 0.0;
        let r = unified_validate(&n);
        assert!(r.violations.iter().any(|v| v.message.contains("outside (0, 1]")));
        assert!(CenterScale::new(vec![0.0], vec![], 0.0).is_err());
    }

    #[test]
    fn stable_center_rules() {
        let n = UnifiedSet {
            chart: AffineChart::identity(1, 2),
            members: vec![(
                "A".into(),
                CenterScale {
                    p_u: vec![0.0],
                    p_s: vec![0.5, 0.1],
                    r: 0.4,
                },
            )],
        };
        let r = unified_validate(&n);
        assert_eq!(r.violations.len(), 1);
        assert!(r.violations[0].message.contains("first coordinate"));
    }

    #[test]
    fn hset_geometry() {
        let m = HSet::new("M12", AffineChart::translation(1, 0, &[-3.0]).unwrap());
        assert_eq!(m.bounding_box(), vec![(2.0, 4.0)]);
        assert!(m.contains(&[2.5], 0.0));
        assert!(!m.contains(&[1.5], 0.0));
        let a = HSet::new("A", AffineChart::identity(1, 0));
        assert!(!a.intersects(&m));
        let touching = HSet::new("B", AffineChart::translation(1, 0, &[-2.0]).unwrap());
        assert!(a.intersects(&touching));
    }
}
