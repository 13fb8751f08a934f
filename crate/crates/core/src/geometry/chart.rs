use nalgebra::{DMatrix, DVector};

use super::pwa::{matrix_inf_norm, AffinePiece};
use super::GeometryError;

/// Charts whose linear part has `|det|` below this are rejected.
pub const SINGULARITY_TOL: f64 = 1e-10;

/// Invertible affine change of coordinates `R^{u+s} → R^u × R^s`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineChart {
    dim_u: usize,
    dim_s: usize,
    forward: AffinePiece,
    inverse: AffinePiece,
}

impl AffineChart {
    pub fn new(
        dim_u: usize,
        dim_s: usize,
        linear: DMatrix<f64>,
        offset: DVector<f64>,
    ) -> Result<Self, GeometryError> {
        let n = dim_u + dim_s;
        if linear.nrows() != n || linear.ncols() != n {
            return Err(GeometryError::Dimension {
                expected: n,
                found: linear.nrows().max(linear.ncols()),
            });
        }
        if offset.len() != n {
            return Err(GeometryError::Dimension {
                expected: n,
                found: offset.len(),
            });
        }
        let det = linear.determinant();
        if !(det.abs() >= SINGULARITY_TOL) {
            return Err(GeometryError::SingularChart(det));
        }
        let forward = AffinePiece { linear, offset };
        let inverse = forward
            .try_inverse()
            .ok_or(GeometryError::SingularChart(det))?;
        Ok(Self {
            dim_u,
            dim_s,
            forward,
            inverse,
        })
    }

    pub fn from_piece(dim_u: usize, dim_s: usize, piece: AffinePiece) -> Result<Self, GeometryError> {
        Self::new(dim_u, dim_s, piece.linear, piece.offset)
    }

    pub fn identity(dim_u: usize, dim_s: usize) -> Self {
        let n = dim_u + dim_s;
        Self {
            dim_u,
            dim_s,
            forward: AffinePiece::identity(n),
            inverse: AffinePiece::identity(n),
        }
    }

    /// `x ↦ x + shift` in one dimension, as in `c(x) = x - 3`.
    pub fn translation(dim_u: usize, dim_s: usize, shift: &[f64]) -> Result<Self, GeometryError> {
        let n = dim_u + dim_s;
        Self::new(
            dim_u,
            dim_s,
            DMatrix::identity(n, n),
            DVector::from_column_slice(shift),
        )
    }

    pub fn dim_u(&self) -> usize {
        self.dim_u
    }

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn dim(&self) -> usize {
        self.dim_u + self.dim_s
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.forward.linear
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.forward.offset
    }

    pub fn as_piece(&self) -> &AffinePiece {
        &self.forward
    }

    pub fn inverse_piece(&self) -> &AffinePiece {
        &self.inverse
    }

    pub fn apply(&self, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check_dim(point)?;
        Ok(self.forward.eval(point))
    }

    pub fn apply_inverse(&self, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check_dim(point)?;
        Ok(self.inverse.eval(point))
    }

    /// `self ∘ inner`; both charts must have the same splitting.
    pub fn compose(&self, inner: &AffineChart) -> Result<AffineChart, GeometryError> {
        if inner.dim_u != self.dim_u || inner.dim_s != self.dim_s {
            return Err(GeometryError::Dimension {
                expected: self.dim(),
                found: inner.dim(),
            });
        }
        Ok(AffineChart {
            dim_u: self.dim_u,
            dim_s: self.dim_s,
            forward: self.forward.compose(&inner.forward),
            inverse: inner.inverse.compose(&self.inverse),
        })
    }

    /// Max-norm operator norm of the linear part.
    pub fn lipschitz(&self) -> f64 {
        matrix_inf_norm(&self.forward.linear)
    }

    pub fn inverse_lipschitz(&self) -> f64 {
        matrix_inf_norm(&self.inverse.linear)
    }

    fn check_dim(&self, point: &[f64]) -> Result<(), GeometryError> {
        if point.len() != self.dim() {
            return Err(GeometryError::Dimension {
                expected: self.dim(),
                found: point.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_chart() {
        let c = AffineChart::identity(1, 1);
        assert_eq!(c.apply(&[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
    }

    #[test]
    fn shifted_chart_from_first_example() {
        let c = AffineChart::translation(1, 0, &[-3.0]).unwrap();
        assert_eq!(c.apply(&[2.0]).unwrap(), vec![-1.0]);
    }

    #[test]
    fn doubling_chart() {
        let c = AffineChart::new(1, 0, DMatrix::from_element(1, 1, 2.0), DVector::from_element(1, 1.0))
            .unwrap();
        assert_eq!(c.apply(&[0.5]).unwrap(), vec![2.0]);
    }

    #[test]
    fn dimension_mismatch_and_singularity() {
        let c = AffineChart::identity(2, 0);
        assert!(matches!(c.apply(&[1.0]), Err(GeometryError::Dimension { .. })));
        let singular = AffineChart::new(
            1,
            1,
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            DVector::zeros(2),
        );
        assert!(matches!(singular, Err(GeometryError::SingularChart(_))));
    }

    #[test]
    fn inverse_round_trip_on_random_charts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 50 {
            let n = rng.gen_range(1..=4);
            let lin = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
            let off = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let Ok(chart) = AffineChart::new(n, 0, lin.clone(), off) else {
                continue;
            };
            // keep to reasonably conditioned charts for a 1e-12 round trip
            if chart.lipschitz() * chart.inverse_lipschitz() > 1e3 {
                continue;
            }
            checked += 1;
            for _ in 0..20 {
                let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let back = chart.apply_inverse(&chart.apply(&p).unwrap()).unwrap();
                let err = p.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-12, "round trip error {err}");
            }
        }
    }
}
