//! Kronecker products of transition matrices, their nonzero entries as
//! multi-indices, and the τ assignment search.

use std::fmt;

use serde::Serialize;

use crate::symbolic::TransitionMatrix;

/// A nonzero entry `w_{1 i₁ j₁} ⋯ w_{d i_d j_d}` of `⊗ W_k`, zero-based.
/// The derived order is row-major in `(i, j)`, which matches the layout of the
/// product with `W₁` outermost.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EntryIndex {
    pub i: Vec<usize>,
    pub j: Vec<usize>,
}

impl EntryIndex {
    pub fn new(i: Vec<usize>, j: Vec<usize>) -> Self {
        Self { i, j }
    }

    pub fn d(&self) -> usize {
        self.i.len()
    }

    /// Entry after relabelling nodes so that new node `a` is old `order[a]`.
    pub fn reorder(&self, order: &[usize]) -> EntryIndex {
        EntryIndex {
            i: order.iter().map(|&o| self.i[o]).collect(),
            j: order.iter().map(|&o| self.j[o]).collect(),
        }
    }

    /// Position of this entry in the flattened product.
    pub fn flat(&self, dims: &[usize]) -> (usize, usize) {
        let mut r = 0;
        let mut c = 0;
        for ((&i, &j), &n) in self.i.iter().zip(&self.j).zip(dims) {
            r = r * n + i;
            c = c * n + j;
        }
        (r, c)
    }
}

impl fmt::Display for EntryIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(",");
        write!(f, "({})->({})", join(&self.i), join(&self.j))
    }
}

/// `W₁ ⊗ W₂ ⊗ ⋯ ⊗ W_d` with `W₁` outermost.
///
/// # Panics
/// On an empty list.
pub fn kronecker(mats: &[TransitionMatrix]) -> TransitionMatrix {
    assert!(!mats.is_empty(), "kronecker needs at least one matrix");
    let dims: Vec<usize> = mats.iter().map(|w| w.dim()).collect();
    let n: usize = dims.iter().product();
    let split = |mut x: usize| {
        let mut out = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            out[k] = x % dims[k];
            x /= dims[k];
        }
        out
    };
    TransitionMatrix::from_fn(n, |r, c| {
        let (ri, ci) = (split(r), split(c));
        mats.iter().enumerate().all(|(k, w)| w.get(ri[k], ci[k]))
    })
    .expect("a Kronecker product of transition matrices is a transition matrix")
}

/// All nonzero entries of `⊗ W_k` in row-major multi-index order, without
/// forming the product.
pub fn nonzero_entries(mats: &[TransitionMatrix]) -> Vec<EntryIndex> {
    let d = mats.len();
    // Per node, the nonzero (i, j) pairs in row-major order.
    let pairs: Vec<Vec<(usize, usize)>> = mats
        .iter()
        .map(|w| (0..w.dim()).flat_map(|i| w.successors(i).map(move |j| (i, j))).collect())
        .collect();
    if d == 0 || pairs.iter().any(|p| p.is_empty()) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut pos = vec![0usize; d];
    loop {
        out.push(EntryIndex {
            i: (0..d).map(|k| pairs[k][pos[k]].0).collect(),
            j: (0..d).map(|k| pairs[k][pos[k]].1).collect(),
        });
        let mut k = d;
        loop {
            if k == 0 {
                out.sort();
                return out;
            }
            k -= 1;
            pos[k] += 1;
            if pos[k] < pairs[k].len() {
                break;
            }
            pos[k] = 0;
        }
    }
}

/// The lexicographically smallest `τ` with `feasible[k][τ(k)]` for every `k`,
/// or `None` when the bipartite graph has no perfect matching.
///
/// Rows are fixed in order, each to the smallest column that still leaves a
/// perfect matching for the remaining rows (checked by augmenting paths).
pub fn tau_search(feasible: &[Vec<bool>]) -> Option<Vec<usize>> {
    let d = feasible.len();
    if feasible.iter().any(|r| r.len() != d) {
        return None;
    }
    let mut tau = Vec::with_capacity(d);
    let mut used = vec![false; d];
    for k in 0..d {
        let pick = (0..d).find(|&m| {
            if used[m] || !feasible[k][m] {
                return false;
            }
            used[m] = true;
            let ok = has_matching(feasible, k + 1, &used);
            used[m] = false;
            ok
        })?;
        used[pick] = true;
        tau.push(pick);
    }
    Some(tau)
}

/// Whether rows `from..` can be matched into the columns not yet `used`.
fn has_matching(feasible: &[Vec<bool>], from: usize, used: &[bool]) -> bool {
    let d = feasible.len();
    let mut owner: Vec<Option<usize>> = vec![None; d];
    fn augment(
        row: usize,
        feasible: &[Vec<bool>],
        used: &[bool],
        owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for m in 0..feasible.len() {
            if used[m] || !feasible[row][m] || seen[m] {
                continue;
            }
            seen[m] = true;
            if owner[m].map_or(true, |r| augment(r, feasible, used, owner, seen)) {
                owner[m] = Some(row);
                return true;
            }
        }
        false
    }
    (from..d).all(|row| {
        let mut seen = vec![false; d];
        augment(row, feasible, used, &mut owner, &mut seen)
    })
}
