//! Re-checking certified entries on an actually perturbed network.

use serde::Serialize;

use super::{step, DynamicsError, Perturbation};
use crate::covering::Verdict;
use crate::geometry::AffineChart;
use crate::network::{CouplingKind, NetworkSpec, TheoremReport};

/// Upper limit on sample points per face.
const FACE_BUDGET: f64 = 2e5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecertifyReport {
    pub amplitude: f64,
    pub seed: u64,
    pub passed: bool,
    #[serde(serialize_with = "crate::report::real::f64")]
    pub worst_margin: f64,
    pub worst_entry: Option<String>,
    pub worst_row: Option<usize>,
    pub points: usize,
}

/// Re-checks every certified entry of a passing report against the
/// perturbed network `(T + β, A + α)`.
///
/// For row `k` of an entry with assignment `τ`, the perturbed map in target
/// chart coordinates is sampled on every face of the product cube where the
/// unstable block `τ(k)` is on the sphere, with at most `per_axis` points per
/// free axis. The row holds when the smallest sampled `|F̃_k - p_k|∞`, less
/// the Lipschitz constant of `F̃_k` times the covering radius of the grid,
/// exceeds 1. Stable rows hold when the certified stable margin exceeds the
/// inflation `chart_lip · (1 + coupling_lip) · ε`.
pub fn recertify(
    spec: &NetworkSpec,
    report: &TheoremReport,
    pert: &Perturbation,
    per_axis: usize,
) -> Result<RecertifyReport, DynamicsError> {
    if report.verdict != Verdict::Pass {
        return Err(DynamicsError::Argument("only passing reports can be re-checked".into()));
    }
    let d = spec.d();
    let (u, s) = (spec.dim_u, spec.dim_s);
    let n = u + s;
    let kind = spec.kind();
    let eps = pert.amplitude;
    let lip_t = spec.nodes.iter().map(|x| x.local_map.lipschitz()).fold(0.0, f64::max);
    let lip_a = spec.coupling.ambient.lipschitz();
    let lip_p = pert.lipschitz();

    let mut out = RecertifyReport {
        amplitude: eps,
        seed: pert.seed,
        passed: true,
        worst_margin: f64::INFINITY,
        worst_entry: None,
        worst_row: None,
        points: 0,
    };
    for entry in &report.entries {
        let Some(tau) = &entry.tau else { continue };
        let sources: Vec<AffineChart> = (0..d)
            .map(|l| spec.nodes[l].source_chart(kind, entry.index.i[l]))
            .collect::<Result<_, _>>()?;
        let targets: Vec<AffineChart> = (0..d)
            .map(|k| match kind {
                CouplingKind::TypeII => spec.nodes[k]
                    .unified
                    .as_ref()
                    .map(|un| un.chart.clone())
                    .ok_or(DynamicsError::Argument("missing unified set".into())),
                CouplingKind::TypeI => Ok(spec.nodes[k].hsets[entry.index.j[k]].chart.clone()),
            })
            .collect::<Result<_, _>>()?;
        let src_lip = sources.iter().map(|c| c.inverse_lipschitz()).fold(0.0, f64::max);
        let free = d * n - 1;
        let q = if free == 0 {
            1
        } else {
            (FACE_BUDGET.powf(1.0 / free as f64).floor() as usize).clamp(2, per_axis.max(2))
        };
        let radius = if free == 0 { 0.0 } else { 1.0 / (q - 1) as f64 };

        for k in 0..d {
            let m = tau[k];
            let p = &spec.nodes[k].target_center(kind, entry.index.j[k], u, s).p_u;
            let tgt_lip = targets[k].lipschitz();
            let lip_f = tgt_lip * (lip_a * (lip_t + lip_p) + lip_p) * src_lip;
            let mut min_dist = f64::INFINITY;
            for c in 0..u {
                for side in [-1.0, 1.0] {
                    let fixed = m * n + c;
                    let mut idx = vec![0usize; free];
                    loop {
                        let mut x = Vec::with_capacity(d * n);
                        let mut it = idx.iter();
                        for a in 0..d * n {
                            if a == fixed {
                                x.push(side);
                            } else {
                                let g = *it.next().expect("free axis");
                                x.push(if q == 1 { 0.0 } else { -1.0 + 2.0 * g as f64 / (q - 1) as f64 });
                            }
                        }
                        let mut state = Vec::with_capacity(d * n);
                        for l in 0..d {
                            state.extend(sources[l].apply_inverse(&x[l * n..(l + 1) * n])?);
                        }
                        let z = step(spec, &state, Some(pert))?;
                        let fk = targets[k].apply(&z[k * n..(k + 1) * n])?;
                        let dist = fk[..u]
                            .iter()
                            .zip(p)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        min_dist = min_dist.min(dist);
                        out.points += 1;
                        let mut a = 0;
                        loop {
                            if a == free {
                                break;
                            }
                            idx[a] += 1;
                            if idx[a] < q {
                                break;
                            }
                            idx[a] = 0;
                            a += 1;
                        }
                        if a == free {
                            break;
                        }
                    }
                }
            }
            let mut margin = min_dist - lip_f * radius - 1.0;
            if s > 0 {
                let row = &entry.rows[k];
                margin = margin.min(row.stable_margin - report.chart_lip * (1.0 + report.coupling_lip) * eps);
            }
            if margin < out.worst_margin {
                out.worst_margin = margin;
                out.worst_entry = Some(entry.index.to_string());
                out.worst_row = Some(k);
            }
        }
    }
    out.passed = out.worst_margin > 0.0;
    Ok(out)
}
