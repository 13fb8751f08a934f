//! Sampled audit of the declared coupling against its linear model.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::kronecker::nonzero_entries;
use super::{CouplingKind, NetworkError, NetworkSpec};
use crate::geometry::pwa::{kron_identity, max_abs_diff};
use crate::geometry::AffineChart;

/// Residual tolerance below which the audit passes.
pub const AUDIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub samples: usize,
    #[serde(serialize_with = "crate::report::real::f64")]
    pub worst_residual: f64,
    /// Network state at which the worst residual occurred.
    pub worst_at: Vec<f64>,
    /// The Kronecker entry (or product of h-sets) the worst sample came from.
    pub worst_entry: String,
    pub passed: bool,
}

/// Samples `z` in the chart image of `T(∏ M)` and compares
/// `(∏ c) ∘ A ∘ (∏ c)⁻¹ (z)` with `([a_lm] ⊗ I) z`.
///
/// Type II networks use the unified charts for every product of h-sets;
/// type I networks use the target charts of each nonzero Kronecker entry and
/// that entry's coupling matrix. This checks consistency of the input only.
pub fn conjugacy_audit(spec: &NetworkSpec, samples: usize, seed: u64) -> Result<AuditReport, NetworkError> {
    let d = spec.d();
    let n = spec.node_dim();
    let kind = spec.kind();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = nonzero_entries(&spec.transitions());
    if entries.is_empty() {
        return Err(NetworkError::Spec("the Kronecker product has no nonzero entry".into()));
    }
    let mut report = AuditReport {
        samples,
        worst_residual: 0.0,
        worst_at: Vec::new(),
        worst_entry: String::new(),
        passed: true,
    };
    for _ in 0..samples {
        let e = &entries[rng.gen_range(0..entries.len())];
        let charts: Vec<AffineChart> = (0..d)
            .map(|k| {
                let node = &spec.nodes[k];
                match kind {
                    CouplingKind::TypeII => node
                        .unified
                        .as_ref()
                        .map(|u| u.chart.clone())
                        .ok_or(NetworkError::MissingUnified(k)),
                    CouplingKind::TypeI => Ok(node.hsets[e.j[k]].chart.clone()),
                }
            })
            .collect::<Result<_, _>>()?;
        let mut tx = Vec::with_capacity(d * n);
        let mut z = Vec::with_capacity(d * n);
        for k in 0..d {
            let h = &spec.nodes[k].hsets[e.i[k]];
            let local: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let x = h.chart.apply_inverse(&local)?;
            let t = spec.nodes[k].local_map.try_eval(&x)?;
            z.extend(charts[k].apply(&t)?);
            tx.extend(t);
        }
        let model = match kind {
            CouplingKind::TypeII => &spec.coupling.matrix,
            CouplingKind::TypeI => spec.coupling.matrix_for(e),
        };
        let want = kron_identity(model, n) * DVector::from_column_slice(&z);
        let residual = match spec.coupling.ambient.try_eval(&tx) {
            Ok(ax) => {
                let mut got = Vec::with_capacity(d * n);
                for k in 0..d {
                    got.extend(charts[k].apply(&ax[k * n..(k + 1) * n])?);
                }
                max_abs_diff(&got, want.as_slice())
            }
            Err(_) => f64::INFINITY,
        };
        if residual > report.worst_residual || report.worst_at.is_empty() {
            report.worst_residual = residual;
            report.worst_at = tx;
            report.worst_entry = e.to_string();
        }
    }
    report.passed = report.worst_residual < AUDIT_TOL;
    Ok(report)
}
