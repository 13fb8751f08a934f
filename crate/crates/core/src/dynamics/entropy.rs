//! Empirical entropy from distinct itineraries of a population of orbits.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{flat_symbol, locate, DynamicsError};
use crate::network::{kronecker, NetworkSpec};
use crate::symbolic::count_words;

const MAX_TRIES: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyEstimate {
    pub depth: usize,
    pub samples: usize,
    pub seed: u64,
    /// Distinct itineraries of length `depth` among the final population.
    pub distinct: usize,
    pub estimate: f64,
    /// `log(admissible words of length depth) / (depth - 1)`.
    #[serde(serialize_with = "crate::report::real::f64")]
    pub word_bound: f64,
}

#[derive(Clone)]
struct Particle {
    x0: Vec<f64>,
    x: Vec<f64>,
    jac: DMatrix<f64>,
    word: Vec<usize>,
}

/// `Φ(x)` with the linear part of the branch used, or `None` on escape.
fn step_jac(spec: &NetworkSpec, x: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = spec.node_dim();
    let total = spec.total_dim();
    let mut t = vec![0.0; total];
    let mut lt = DMatrix::zeros(total, total);
    for (k, node) in spec.nodes.iter().enumerate() {
        let r = k * n;
        let ci = node.local_map.locate(&x[r..r + n])?;
        let piece = &node.local_map.cells()[ci].piece;
        piece.eval_into(&x[r..r + n], &mut t[r..r + n]);
        lt.view_mut((r, r), (n, n)).copy_from(&piece.linear);
    }
    let amb = &spec.coupling.ambient;
    let ci = amb.locate(&t)?;
    let piece = &amb.cells()[ci].piece;
    Some((piece.eval(&t), &piece.linear * lt))
}

/// Runs `steps` steps from `x0`, returning the particle if every visited
/// state lies in some product h-set.
fn simulate(spec: &NetworkSpec, dims: &[usize], x0: Vec<f64>, steps: usize) -> Option<Particle> {
    let total = spec.total_dim();
    let (w, _) = locate(spec, &x0)?;
    let mut p = Particle {
        x: x0.clone(),
        x0,
        jac: DMatrix::identity(total, total),
        word: vec![flat_symbol(&w, dims)],
    };
    for _ in 0..steps {
        let (y, l) = step_jac(spec, &p.x)?;
        let (w, _) = locate(spec, &y)?;
        p.x = y;
        p.jac = l * &p.jac;
        p.word.push(flat_symbol(&w, dims));
    }
    Some(p)
}

/// Additive recurrence with the generalised golden ratio in `dim`
/// dimensions, shifted by `offset`.
fn low_discrepancy(i: usize, offset: &[f64]) -> Vec<f64> {
    let dim = offset.len();
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    (0..dim)
        .map(|j| {
            let alpha = phi.powi(-(j as i32 + 1));
            (offset[j] + (i as f64 + 1.0) * alpha).fract()
        })
        .collect()
}

fn product_index(mut m: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = m % dims[k];
        m /= dims[k];
    }
    out
}

/// Block-diagonal chart linear part and offset for a multi-index.
fn product_chart(spec: &NetworkSpec, w: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let n = spec.node_dim();
    let total = spec.total_dim();
    let mut lin = DMatrix::zeros(total, total);
    let mut off = DVector::zeros(total);
    for (k, node) in spec.nodes.iter().enumerate() {
        let c = &node.hsets[w[k]].chart;
        lin.view_mut((k * n, k * n), (n, n)).copy_from(c.linear());
        off.rows_mut(k * n, n).copy_from(c.offset());
    }
    (lin, off)
}

/// Estimates the growth rate of itineraries of length `depth`.
///
/// A population of `samples` orbits starts on a shifted low-discrepancy grid
/// spread round-robin over the product h-sets. After every step, orbits that
/// left all product h-sets are replaced by offspring of random survivors:
/// the offspring starts at the point whose current state is uniform in a
/// shrinking neighbourhood of the parent's state inside the parent's current
/// product h-set, found through the parent's branch Jacobian, and is then
/// re-simulated from scratch. The estimate is
/// `log(distinct itineraries in the final population) / (depth - 1)`.
/// Every itinerary is that of an actual orbit, so the estimate never exceeds
/// the admissible-word bound. The result depends only on `seed`.
pub fn empirical_entropy(
    spec: &NetworkSpec,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<EntropyEstimate, DynamicsError> {
    if depth < 2 {
        return Err(DynamicsError::Argument("depth must be at least 2".into()));
    }
    if samples == 0 {
        return Err(DynamicsError::Argument("need at least one sample".into()));
    }
    let total = spec.total_dim();
    let dims: Vec<usize> = spec.nodes.iter().map(|n| n.hsets.len()).collect();
    let boxes: usize = dims.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: Vec<f64> = (0..total).map(|_| rng.gen::<f64>()).collect();

    let mut pop: Vec<Option<Particle>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let u = low_discrepancy(i, &offset);
            let w = product_index(i % boxes, &dims);
            let (lin, off) = product_chart(spec, &w);
            let y = DVector::from_iterator(total, u.iter().map(|v| 2.0 * v - 1.0));
            let x0 = lin.lu().solve(&(y - off))?;
            simulate(spec, &dims, x0.iter().copied().collect(), 0)
        })
        .collect();

    for t in 1..depth {
        pop = pop
            .into_par_iter()
            .map(|p| {
                let mut p = p?;
                let (y, l) = step_jac(spec, &p.x)?;
                let (w, _) = locate(spec, &y)?;
                p.x = y;
                p.jac = l * &p.jac;
                p.word.push(flat_symbol(&w, &dims));
                Some(p)
            })
            .collect();
        let alive: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].is_some()).collect();
        if alive.is_empty() {
            return Err(DynamicsError::NoInvariantSet);
        }
        let snapshot = &pop;
        let refill: Vec<(usize, Particle)> = (0..snapshot.len())
            .into_par_iter()
            .filter(|&i| snapshot[i].is_none())
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(seed ^ ((t as u64) << 40) ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let parent = snapshot[alive[r.gen_range(0..alive.len())]].as_ref().expect("alive");
                (i, offspring(spec, &dims, parent, t, &mut r))
            })
            .collect();
        for (i, p) in refill {
            pop[i] = Some(p);
        }
    }

    let words: HashSet<&Vec<usize>> = pop.iter().flatten().map(|p| &p.word).collect();
    let distinct = words.len();
    if distinct == 0 {
        return Err(DynamicsError::NoInvariantSet);
    }
    let n = (depth - 1) as f64;
    let admissible = count_words(&kronecker(&spec.transitions()), depth);
    let word_bound = admissible.to_f64().map_or(f64::INFINITY, f64::ln) / n;
    Ok(EntropyEstimate {
        depth,
        samples,
        seed,
        distinct,
        estimate: (distinct as f64).ln() / n,
        word_bound,
    })
}

fn offspring(spec: &NetworkSpec, dims: &[usize], parent: &Particle, t: usize, rng: &mut ChaCha8Rng) -> Particle {
    let total = spec.total_dim();
    let w = product_index(*parent.word.last().expect("nonempty"), dims);
    let (lin, off) = product_chart(spec, &w);
    let x = DVector::from_column_slice(&parent.x);
    let y = &lin * &x + off;
    let Some(back) = (&lin * &parent.jac).lu().try_inverse() else {
        return parent.clone();
    };
    let mut delta = 1.0;
    for _ in 0..MAX_TRIES {
        let v = DVector::from_iterator(total, (0..total).map(|c| {
            let target: f64 = rng.gen_range(-1.0..=1.0);
            delta * (target - y[c])
        }));
        let x0: Vec<f64> = (DVector::from_column_slice(&parent.x0) + &back * v).iter().copied().collect();
        if let Some(child) = simulate(spec, dims, x0, t) {
            return child;
        }
        delta *= 0.5;
    }
    parent.clone()
}
