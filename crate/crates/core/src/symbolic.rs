//! Transition matrices and the one-sided subshifts they generate.
//!
//! Symbols are zero-based here; documents and the command line shift them by
//! one.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;
use thiserror::Error;

/// Default relative tolerance of [`spectral_radius`].
pub const DEFAULT_RHO_TOL: f64 = 1e-12;

const MAX_POWER_STEPS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("matrix must be square with at least one row")]
    Shape,
    #[error("entry ({0}, {1}) is neither 0 nor 1")]
    NotBinary(usize, usize),
    #[error("row {0} has no nonzero entry")]
    EmptyRow(usize),
    #[error("column {0} has no nonzero entry")]
    EmptyColumn(usize),
    #[error("symbol {symbol} is out of range for {n} symbols")]
    OutOfRange { symbol: usize, n: usize },
}

/// Square 0/1 matrix whose rows and columns all contain a one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TransitionMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl TransitionMatrix {
    pub fn new(rows: &[Vec<u8>]) -> Result<Self, SymbolicError> {
        let problems = Self::problems(rows);
        if let Some(e) = problems.into_iter().next() {
            return Err(e);
        }
        let n = rows.len();
        Ok(Self {
            n,
            bits: rows.iter().flatten().map(|&b| b == 1).collect(),
        })
    }

    /// Every reason `rows` is not a transition matrix, in row-major order.
    pub fn problems(rows: &[Vec<u8>]) -> Vec<SymbolicError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return vec![SymbolicError::Shape];
        }
        let mut out = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &b) in r.iter().enumerate() {
                if b > 1 {
                    out.push(SymbolicError::NotBinary(i, j));
                }
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if !r.iter().any(|&b| b == 1) {
                out.push(SymbolicError::EmptyRow(i));
            }
        }
        for j in 0..n {
            if !rows.iter().any(|r| r[j] == 1) {
                out.push(SymbolicError::EmptyColumn(j));
            }
        }
        out
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self, SymbolicError> {
        let rows: Vec<Vec<u8>> = (0..n)
            .map(|i| (0..n).map(|j| f(i, j) as u8).collect())
            .collect();
        Self::new(&rows)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| i == j).expect("identity is a transition matrix")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) as u8).collect())
            .collect()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.get(i, j))
    }

    /// Whether every row and column holds exactly one `1`.
    pub fn is_permutation(&self) -> bool {
        self.ones() == self.n
    }

    /// The successor of each symbol when the matrix is a permutation.
    pub fn as_permutation(&self) -> Option<Vec<usize>> {
        if !self.is_permutation() {
            return None;
        }
        Some((0..self.n).map(|i| self.successors(i).next().unwrap()).collect())
    }
}

/// A finite word over `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SymbolSequence {
    pub symbols: Vec<usize>,
}

impl SymbolSequence {
    pub fn new(symbols: Vec<usize>) -> Self {
        Self { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

pub fn is_admissible(seq: &SymbolSequence, w: &TransitionMatrix) -> Result<bool, SymbolicError> {
    if let Some(&s) = seq.symbols.iter().find(|&&s| s >= w.dim()) {
        return Err(SymbolicError::OutOfRange { symbol: s, n: w.dim() });
    }
    Ok(seq.symbols.windows(2).all(|p| w.get(p[0], p[1])))
}

/// Perron root of `w`.
///
/// Closed form for `n <= 2`. Otherwise the matrix is split into strongly
/// connected blocks and each irreducible block `B` is handled by power
/// iteration on the primitive matrix `I + B`, stopping once the
/// Collatz–Wielandt bounds `min (Mx)_i/x_i <= ρ <= max (Mx)_i/x_i` agree to
/// `tol` relative.
pub fn spectral_radius(w: &TransitionMatrix, tol: f64) -> f64 {
    let n = w.dim();
    let e = |i, j| w.get(i, j) as u8 as f64;
    match n {
        1 => return e(0, 0),
        2 => {
            let tr = e(0, 0) + e(1, 1);
            let det = e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0);
            return (tr + (tr * tr - 4.0 * det).max(0.0).sqrt()) / 2.0;
        }
        _ => {}
    }
    let mut g = DiGraph::<(), ()>::with_capacity(n, w.ones());
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in w.successors(i) {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    let mut rho = 0.0f64;
    for comp in tarjan_scc(&g) {
        let idx: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        rho = rho.max(block_radius(w, &idx, tol));
    }
    rho
}

fn block_radius(w: &TransitionMatrix, idx: &[usize], tol: f64) -> f64 {
    let m = idx.len();
    if m == 1 {
        return w.get(idx[0], idx[0]) as u8 as f64;
    }
    let adj: Vec<Vec<usize>> = idx
        .iter()
        .map(|&i| (0..m).filter(|&b| w.get(i, idx[b])).collect())
        .collect();
    let mut x = vec![1.0; m];
    let mut y = vec![0.0; m];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for _ in 0..MAX_POWER_STEPS {
        for a in 0..m {
            y[a] = x[a] + adj[a].iter().map(|&b| x[b]).sum::<f64>();
        }
        lo = f64::INFINITY;
        hi = 0.0f64;
        for a in 0..m {
            let r = y[a] / x[a];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= tol * hi {
            break;
        }
        let s = y.iter().fold(0.0f64, |acc, v| acc.max(*v));
        for a in 0..m {
            x[a] = y[a] / s;
        }
    }
    (lo + hi) / 2.0 - 1.0
}

/// `Σ log ρ(W_k)`.
pub fn entropy_lower_bound(ws: &[TransitionMatrix]) -> f64 {
    ws.iter()
        .map(|w| spectral_radius(w, DEFAULT_RHO_TOL).ln())
        .sum()
}

/// Number of admissible words of length `len`: the entry sum of `W^{len-1}`.
/// The empty word is the only word of length zero.
pub fn count_words(w: &TransitionMatrix, len: usize) -> BigUint {
    if len == 0 {
        return BigUint::one();
    }
    let n = w.dim();
    let mut v = vec![BigUint::one(); n];
    for _ in 1..len {
        v = (0..n)
            .map(|i| {
                w.successors(i)
                    .fold(BigUint::zero(), |acc, j| acc + &v[j])
            })
            .collect();
    }
    v.into_iter().sum()
}

/// Cyclic admissible words `s_0 … s_{p-1}` (with `s_{p-1} → s_0` allowed too)
/// in lexicographic order.
pub fn closed_loops(w: &TransitionMatrix, p: usize) -> ClosedLoops<'_> {
    ClosedLoops {
        w,
        p,
        stack: Vec::with_capacity(p),
        started: false,
        done: p == 0,
    }
}

pub struct ClosedLoops<'a> {
    w: &'a TransitionMatrix,
    p: usize,
    stack: Vec<usize>,
    started: bool,
    done: bool,
}

impl ClosedLoops<'_> {
    /// Next symbol after `after` that may follow the current prefix.
    fn next_choice(&self, after: Option<usize>) -> Option<usize> {
        let start = after.map_or(0, |a| a + 1);
        (start..self.w.dim()).find(|&s| match self.stack.last() {
            None => true,
            Some(&prev) => self.w.get(prev, s),
        })
    }

    /// Depth-first advance to the next full-length admissible prefix.
    fn advance(&mut self, mut after: Option<usize>) -> bool {
        loop {
            match self.next_choice(after) {
                Some(s) => {
                    self.stack.push(s);
                    if self.stack.len() == self.p {
                        return true;
                    }
                    after = None;
                }
                None => match self.stack.pop() {
                    Some(s) => after = Some(s),
                    None => return false,
                },
            }
        }
    }
}

impl Iterator for ClosedLoops<'_> {
    type Item = SymbolSequence;

    fn next(&mut self) -> Option<SymbolSequence> {
        while !self.done {
            let found = if self.started {
                let last = self.stack.pop();
                self.advance(last)
            } else {
                self.started = true;
                self.advance(None)
            };
            if !found {
                self.done = true;
                return None;
            }
            if self.w.get(self.stack[self.p - 1], self.stack[0]) {
                return Some(SymbolSequence::new(self.stack.clone()));
            }
        }
        None
    }
}

pub fn lcm_period(dims: &[usize]) -> usize {
    dims.iter().fold(1, |acc, &d| num_integer::lcm(acc, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fib() -> TransitionMatrix {
        TransitionMatrix::new(&[vec![1, 1], vec![1, 0]]).unwrap()
    }

    fn tm(rows: &[&[u8]]) -> TransitionMatrix {
        TransitionMatrix::new(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Plain power iteration on the dense matrix, used as an oracle for
    /// irreducible aperiodic inputs.
    fn dense_power(w: &TransitionMatrix) -> f64 {
        let n = w.dim();
        let mut x = vec![1.0; n];
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let y: Vec<f64> = (0..n).map(|i| w.successors(i).map(|j| x[j]).sum()).collect();
            let s: f64 = y.iter().cloned().fold(0.0, f64::max);
            lambda = s / x.iter().cloned().fold(0.0, f64::max);
            x = y.iter().map(|v| v / s).collect();
        }
        lambda
    }

    pub(crate) fn random_transition(rng: &mut ChaCha8Rng, n: usize) -> TransitionMatrix {
        loop {
            let rows: Vec<Vec<u8>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_bool(0.45) as u8).collect())
                .collect();
            if let Ok(w) = TransitionMatrix::new(&rows) {
                return w;
            }
        }
    }

    #[test]
    fn validity() {
        assert!(matches!(
            TransitionMatrix::new(&[vec![1, 0], vec![1, 0]]),
            Err(SymbolicError::EmptyColumn(1))
        ));
        assert!(matches!(
            TransitionMatrix::new(&[vec![0, 0], vec![1, 1]]),
            Err(SymbolicError::EmptyRow(0))
        ));
        assert!(matches!(TransitionMatrix::new(&[vec![2]]), Err(SymbolicError::NotBinary(0, 0))));
        assert!(matches!(TransitionMatrix::new(&[vec![1, 1]]), Err(SymbolicError::Shape)));
    }

    #[test]
    fn spectral_radius_examples() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((spectral_radius(&fib(), 1e-12) - phi).abs() < 1e-12);
        for n in 1..6 {
            assert_eq!(spectral_radius(&TransitionMatrix::identity(n), 1e-12), 1.0);
        }
        assert_eq!(spectral_radius(&tm(&[&[1, 1], &[1, 1]]), 1e-12), 2.0);
        // three-cycle with a chord: x^3 - x - 1, plastic number
        let w = tm(&[&[0, 1, 0], &[0, 0, 1], &[1, 1, 0]]);
        let plastic = 1.324_717_957_244_746;
        assert!((spectral_radius(&w, 1e-13) - plastic).abs() < 1e-11);
    }

    #[test]
    fn reducible_matrix_takes_the_largest_block() {
        // block upper triangular: a full 2x2 block feeding a 3-cycle
        let w = tm(&[
            &[1, 1, 1, 0, 0],
            &[1, 1, 0, 0, 0],
            &[0, 0, 0, 1, 0],
            &[0, 0, 0, 0, 1],
            &[0, 0, 1, 0, 0],
        ]);
        assert!((spectral_radius(&w, 1e-12) - 2.0).abs() < 1e-11);
    }

    #[test]
    fn power_iteration_oracle_on_primitive_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        while checked < 40 {
            let n = rng.gen_range(3..=5);
            let mut w = random_transition(&mut rng, n);
            // force primitivity: irreducible with a self-loop everywhere
            w = TransitionMatrix::from_fn(n, |i, j| w.get(i, j) || i == j || j == (i + 1) % n).unwrap();
            let a = spectral_radius(&w, 1e-13);
            let b = dense_power(&w);
            assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
            checked += 1;
        }
    }

    #[test]
    fn entropy_examples() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let w2 = tm(&[&[0, 1], &[1, 1]]);
        let h = entropy_lower_bound(&[fib(), w2]);
        assert!((h - 2.0 * phi.ln()).abs() < 1e-12);
        assert!((h - 0.962_423_650_1).abs() < 1e-10);
        assert_eq!(entropy_lower_bound(&[TransitionMatrix::identity(2)]), 0.0);
        assert!((entropy_lower_bound(&[tm(&[&[1, 1], &[1, 1]])]) - 2f64.ln()).abs() < 1e-15);
    }

    fn brute_words(w: &TransitionMatrix, len: usize) -> u64 {
        let n = w.dim();
        let total = n.pow(len as u32);
        (0..total)
            .filter(|&code| {
                let mut c = code;
                let word: Vec<usize> = (0..len)
                    .map(|_| {
                        let s = c % n;
                        c /= n;
                        s
                    })
                    .collect();
                is_admissible(&SymbolSequence::new(word), w).unwrap()
            })
            .count() as u64
    }

    #[test]
    fn word_counts() {
        assert_eq!(count_words(&fib(), 3), BigUint::from(5u32));
        assert_eq!(count_words(&fib(), 1), BigUint::from(2u32));
        assert_eq!(count_words(&TransitionMatrix::identity(2), 10), BigUint::from(2u32));
        for len in 1..=10 {
            assert_eq!(count_words(&fib(), len), BigUint::from(brute_words(&fib(), len)));
        }
        let slope = (count_words(&fib(), 20).to_string().parse::<f64>().unwrap()).ln() / 19.0;
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((slope - phi.ln()).abs() < 0.05);
    }

    #[test]
    fn permutations_have_unit_radius_and_constant_counts() {
        let w = tm(&[&[0, 1, 0], &[0, 0, 1], &[1, 0, 0]]);
        assert_eq!(spectral_radius(&w, 1e-12), 1.0);
        for len in 1..12 {
            assert_eq!(count_words(&w, len), BigUint::from(3u32));
        }
    }

    #[test]
    fn admissibility() {
        let w = tm(&[&[0, 1], &[1, 1]]);
        assert!(is_admissible(&SymbolSequence::new(vec![0, 1, 0]), &w).unwrap());
        assert!(!is_admissible(&SymbolSequence::new(vec![0, 0]), &w).unwrap());
        assert!(is_admissible(&SymbolSequence::new(vec![0]), &w).unwrap());
        assert!(is_admissible(&SymbolSequence::new(vec![2]), &w).is_err());
    }

    #[test]
    fn loop_examples() {
        let swap = tm(&[&[0, 1], &[1, 0]]);
        let loops: Vec<Vec<usize>> = closed_loops(&swap, 2).map(|s| s.symbols).collect();
        assert_eq!(loops, vec![vec![0, 1], vec![1, 0]]);
        let loops: Vec<Vec<usize>> = closed_loops(&fib(), 1).map(|s| s.symbols).collect();
        assert_eq!(loops, vec![vec![0]]);
        let loops: Vec<Vec<usize>> = closed_loops(&TransitionMatrix::identity(2), 3)
            .map(|s| s.symbols)
            .collect();
        assert_eq!(loops, vec![vec![0, 0, 0], vec![1, 1, 1]]);
        assert_eq!(closed_loops(&swap, 3).count(), 0);
    }

    fn trace_of_power(w: &TransitionMatrix, p: usize) -> u64 {
        let n = w.dim();
        let mut m: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u64).collect()).collect();
        for _ in 0..p {
            m = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).filter(|&k| w.get(k, j)).map(|k| m[i][k]).sum())
                        .collect()
                })
                .collect();
        }
        (0..n).map(|i| m[i][i]).sum()
    }

    #[test]
    fn loop_count_is_the_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..30 {
            let n = rng.gen_range(1..=4);
            let w = random_transition(&mut rng, n);
            for p in 1..=6 {
                assert_eq!(closed_loops(&w, p).count() as u64, trace_of_power(&w, p));
            }
        }
    }

    #[test]
    fn lcm_examples() {
        assert_eq!(lcm_period(&[2, 3]), 6);
        assert_eq!(lcm_period(&[4]), 4);
        assert_eq!(lcm_period(&[2, 2]), 2);
    }
}
