//! Iteration of the network map `Φ = A ∘ T`, symbolic itineraries, periodic
//! orbits by exact affine composition, empirical entropy and perturbations.

mod entropy;
mod periodic;
mod recertify;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::network::{NetworkError, NetworkSpec};

pub use entropy::{empirical_entropy, EntropyEstimate};
pub use periodic::{auto_loop, periodic_point, PeriodicOrbitCertificate};
pub use recertify::{recertify, RecertifyReport};

/// Membership slack for itineraries.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("state has dimension {found}, network needs {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("map undefined at {0:?}")]
    Undefined(Vec<f64>),
    #[error("inadmissible loop: {0}")]
    Inadmissible(String),
    #[error("step {step}, node {node}: {what} spans several affine pieces; subdivide the h-set")]
    Subdivision { step: usize, node: usize, what: String },
    #[error("neutral composition: I - L is singular (det {0})")]
    NeutralComposition(f64),
    #[error("solution leaves its h-set at step {step} (margin {margin})")]
    OutsideCell { step: usize, margin: f64 },
    #[error("residual {0} exceeds 1e-10")]
    Residual(f64),
    #[error("refinement did not converge after {0} iterations")]
    NotConverged(usize),
    #[error("no invariant set sampled")]
    NoInvariantSet,
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// One sinusoid `z ↦ sin(ω·z + φ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
struct Wave {
    omega: Vec<f64>,
    phase: f64,
}

impl Wave {
    fn random(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        let mut omega: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..=3.0)).collect();
        if omega.iter().all(|w| *w == 0.0) {
            if let Some(w) = omega.first_mut() {
                *w = 1.0;
            }
        }
        Self {
            omega,
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        }
    }

    fn eval(&self, z: &[f64]) -> f64 {
        (self.omega.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.phase).sin()
    }

    fn l1(&self) -> f64 {
        self.omega.iter().map(|w| w.abs()).sum()
    }
}

/// Bounded perturbations `T̃ = T + β`, `Ã = A + α` with
/// `α_i(z) = ε sin(ω_i·z + φ_i)` and `β` built the same way per node from
/// that node's coordinates only, so `T̃` is again a product of local maps.
/// Both have sup-norm exactly `ε`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub seed: u64,
    coupling: Vec<Wave>,
    local: Vec<Vec<Wave>>,
}

impl Perturbation {
    /// `d` nodes of dimension `n` each.
    pub fn new(d: usize, n: usize, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coupling = (0..d * n).map(|_| Wave::random(&mut rng, d * n)).collect();
        let local = (0..d)
            .map(|_| (0..n).map(|_| Wave::random(&mut rng, n)).collect())
            .collect();
        Self {
            amplitude,
            seed,
            coupling,
            local,
        }
    }

    pub fn for_spec(spec: &NetworkSpec, amplitude: f64, seed: u64) -> Self {
        Self::new(spec.d(), spec.node_dim(), amplitude, seed)
    }

    /// Max-norm Lipschitz constant of `α`, which also bounds that of `β`.
    pub fn lipschitz(&self) -> f64 {
        let a = self.coupling.iter().map(Wave::l1).fold(0.0, f64::max);
        let b = self.local.iter().flatten().map(Wave::l1).fold(0.0, f64::max);
        self.amplitude * a.max(b)
    }

    fn add_local(&self, k: usize, x: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(&self.local[k]) {
            *o += self.amplitude * w.eval(x);
        }
    }

    fn add_coupling(&self, z: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(&self.coupling) {
            *o += self.amplitude * w.eval(z);
        }
    }
}

/// `T̃(x)`: every node's local map on its block, plus `β` when perturbed.
pub fn apply_local(spec: &NetworkSpec, x: &[f64], pert: Option<&Perturbation>) -> Result<Vec<f64>, DynamicsError> {
    let n = spec.node_dim();
    let total = spec.total_dim();
    if x.len() != total {
        return Err(DynamicsError::Dimension {
            expected: total,
            found: x.len(),
        });
    }
    let mut out = vec![0.0; total];
    for (k, node) in spec.nodes.iter().enumerate() {
        let block = &x[k * n..(k + 1) * n];
        let dst = &mut out[k * n..(k + 1) * n];
        if node.local_map.eval_into(block, dst).is_none() {
            return Err(DynamicsError::Undefined(block.to_vec()));
        }
        if let Some(p) = pert {
            p.add_local(k, block, dst);
        }
    }
    Ok(out)
}

/// One step `Ã(T̃(x))`.
pub fn step(spec: &NetworkSpec, x: &[f64], pert: Option<&Perturbation>) -> Result<Vec<f64>, DynamicsError> {
    let t = apply_local(spec, x, pert)?;
    let mut out = vec![0.0; t.len()];
    if spec.coupling.ambient.eval_into(&t, &mut out).is_none() {
        return Err(DynamicsError::Undefined(t));
    }
    if let Some(p) = pert {
        p.add_coupling(&t, &mut out);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Itinerary {
    /// One h-set index per node for every visited state, zero-based.
    pub steps: Vec<Vec<usize>>,
    /// Step at which the orbit left every product h-set.
    pub escaped_at: Option<usize>,
    /// States lying in two h-sets of one node within the tolerance.
    pub ties: usize,
}

impl Itinerary {
    pub fn escaped(&self) -> bool {
        self.escaped_at.is_some()
    }
}

/// Per node, the lowest-index h-set containing the node's block, and whether
/// another one also contained it.
pub(crate) fn locate(spec: &NetworkSpec, x: &[f64]) -> Option<(Vec<usize>, bool)> {
    let n = spec.node_dim();
    let mut word = Vec::with_capacity(spec.d());
    let mut tie = false;
    for (k, node) in spec.nodes.iter().enumerate() {
        let block = &x[k * n..(k + 1) * n];
        let mut hits = node
            .hsets
            .iter()
            .enumerate()
            .filter(|(_, h)| h.chart_norm(block) <= 1.0 + MEMBERSHIP_TOL)
            .map(|(i, _)| i);
        let first = hits.next()?;
        tie |= hits.next().is_some();
        word.push(first);
    }
    Some((word, tie))
}

/// Symbols of `x_0, …, x_{len-1}`, stopping at the first escape.
pub fn itinerary(
    spec: &NetworkSpec,
    x0: &[f64],
    len: usize,
    pert: Option<&Perturbation>,
) -> Result<Itinerary, DynamicsError> {
    if x0.len() != spec.total_dim() {
        return Err(DynamicsError::Dimension {
            expected: spec.total_dim(),
            found: x0.len(),
        });
    }
    let mut it = Itinerary {
        steps: Vec::with_capacity(len),
        escaped_at: None,
        ties: 0,
    };
    let mut x = x0.to_vec();
    for t in 0..len {
        match locate(spec, &x) {
            Some((w, tie)) => {
                it.ties += tie as usize;
                it.steps.push(w);
            }
            None => {
                it.escaped_at = Some(t);
                break;
            }
        }
        if t + 1 < len {
            x = match step(spec, &x, pert) {
                Ok(y) => y,
                Err(DynamicsError::Undefined(_)) => {
                    it.escaped_at = Some(t + 1);
                    break;
                }
                Err(e) => return Err(e),
            };
        }
    }
    Ok(it)
}

/// Flat index of a multi-index word in the product alphabet, first node
/// outermost, matching the Kronecker layout.
pub fn flat_symbol(word: &[usize], dims: &[usize]) -> usize {
    word.iter().zip(dims).fold(0, |acc, (&w, &n)| acc * n + w)
}
