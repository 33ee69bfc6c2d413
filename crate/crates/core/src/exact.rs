//! Brute-force ground truth for tiny instances.
//!
//! Successor laws are built by walking every destination tuple in `[n]^kappa`
//! in mixed-radix order and counting outcomes; probabilities are the integer
//! counts divided once by `n^kappa`, so they do not depend on summation order.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;

use crate::error::{RbbError, Result};
use crate::load::LoadVector;
use crate::observables::Observable;

pub const DEFAULT_STATE_CAP: u128 = 1_000_000;
pub const DEFAULT_TUPLE_CAP: u128 = 10_000_000;
/// Largest reachable class handed to the dense solver.
pub const DENSE_SOLVE_LIMIT: usize = 2000;

/// All compositions of `m` into `n` non-negative parts, in colexicographic
/// order (last coordinate most significant).
#[derive(Clone, Debug)]
pub struct StateSpace {
    pub n: usize,
    pub m: u64,
    pub states: Vec<Vec<u64>>,
    index: HashMap<Vec<u64>, usize>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &[u64]) -> Option<usize> {
        self.index.get(state).copied()
    }
}

/// `C(m + n - 1, n - 1)`, saturating.
pub fn composition_count(n: usize, m: u64) -> u128 {
    if n == 0 {
        return 0;
    }
    let k = (n - 1) as u128;
    let top = m as u128 + k;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(top - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub fn enumerate_states(n: usize, m: u64, cap: u128) -> Result<StateSpace> {
    if n == 0 {
        return Err(RbbError::InvalidConfig("n must be positive".into()));
    }
    let size = composition_count(n, m);
    if size > cap {
        return Err(RbbError::CapExceeded {
            what: "state space",
            size,
            cap,
        });
    }
    let mut states = Vec::with_capacity(size as usize);
    let mut current = vec![0u64; n];
    compositions(&mut current, 0, m, &mut states);
    states.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    Ok(StateSpace { n, m, states, index })
}

fn compositions(current: &mut Vec<u64>, pos: usize, left: u64, out: &mut Vec<Vec<u64>>) {
    if pos + 1 == current.len() {
        current[pos] = left;
        out.push(current.clone());
        return;
    }
    for v in 0..=left {
        current[pos] = v;
        compositions(current, pos + 1, left - v, out);
    }
}

/// Exact one-round law as outcome counts over `total = n^kappa` tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuccessorLaw {
    pub outcomes: BTreeMap<Vec<u64>, u64>,
    pub total: u64,
}

impl SuccessorLaw {
    pub fn probability(&self, state: &[u64]) -> f64 {
        self.outcomes.get(state).map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u64], f64)> + '_ {
        let total = self.total as f64;
        self.outcomes.iter().map(move |(s, &c)| (s.as_slice(), c as f64 / total))
    }

    pub fn expectation(&self, g: &Observable) -> f64 {
        expected_observable(self.iter(), g)
    }
}

pub fn one_step_distribution(x: &LoadVector, cap: u128) -> Result<SuccessorLaw> {
    let n = x.bins();
    let kappa = x.loads().iter().filter(|&&l| l > 0).count();
    let tuples = (n as u128).checked_pow(kappa as u32).unwrap_or(u128::MAX);
    if tuples > cap {
        return Err(RbbError::CapExceeded {
            what: "destination enumeration",
            size: tuples,
            cap,
        });
    }
    let base: Vec<u64> = x.loads().iter().map(|&l| l.saturating_sub(1)).collect();
    let mut digits = vec![0usize; kappa];
    let mut outcomes = BTreeMap::new();
    let mut next = base.clone();
    for _ in 0..tuples {
        next.copy_from_slice(&base);
        for &d in &digits {
            next[d] += 1;
        }
        *outcomes.entry(next.clone()).or_insert(0u64) += 1;
        for d in digits.iter_mut() {
            *d += 1;
            if *d < n {
                break;
            }
            *d = 0;
        }
    }
    Ok(SuccessorLaw {
        outcomes,
        total: tuples as u64,
    })
}

/// Sparse row-stochastic matrix over a [`StateSpace`].
#[derive(Clone, Debug)]
pub struct TransitionKernel {
    pub space: StateSpace,
    pub rows: Vec<Vec<(usize, f64)>>,
}

pub fn transition_kernel(space: StateSpace, tuple_cap: u128) -> Result<TransitionKernel> {
    let rows = space
        .states
        .par_iter()
        .map(|s| {
            let law = one_step_distribution(&LoadVector::new(s.clone())?, tuple_cap)?;
            let mut row: Vec<(usize, f64)> = law
                .iter()
                .map(|(t, p)| (space.index_of(t).expect("successor in state space"), p))
                .collect();
            row.sort_unstable_by_key(|&(j, _)| j);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransitionKernel { space, rows })
}

impl TransitionKernel {
    /// States reachable from `start`, ascending.
    pub fn reachable_from(&self, start: usize) -> Vec<usize> {
        let mut seen = vec![false; self.rows.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(s) = stack.pop() {
            for &(t, p) in &self.rows[s] {
                if p > 0.0 && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        (0..seen.len()).filter(|&i| seen[i]).collect()
    }

    /// `pi P` for a full-length vector.
    pub fn apply(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; pi.len()];
        for (s, row) in self.rows.iter().enumerate() {
            if pi[s] == 0.0 {
                continue;
            }
            for &(t, p) in row {
                out[t] += pi[s] * p;
            }
        }
        out
    }

    fn start_index(&self, start: &[u64]) -> Result<usize> {
        self.space.index_of(start).ok_or_else(|| {
            RbbError::Precondition(format!("start state {start:?} is not in the state space"))
        })
    }

    /// Checks that every state reachable from `start` can reach `start` again,
    /// i.e. the reachable class is closed and irreducible.
    fn irreducible_class(&self, start: usize) -> Result<Vec<usize>> {
        let class = self.reachable_from(start);
        for &s in &class {
            if !self.reachable_from(s).contains(&start) {
                return Err(RbbError::Precondition(format!(
                    "state {:?} cannot return to the start state",
                    self.space.states[s]
                )));
            }
        }
        Ok(class)
    }
}

pub fn l1_residual(kernel: &TransitionKernel, pi: &[f64]) -> f64 {
    kernel.apply(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

/// Stationary law on the class reachable from `start` by power iteration on
/// the lazy chain `(I + P) / 2`, which has the same stationary law and cannot
/// cycle. Entries outside the class are 0.
pub fn stationary_distribution(
    kernel: &TransitionKernel,
    start: &[u64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let start = kernel.start_index(start)?;
    let class = kernel.irreducible_class(start)?;
    let mut pi = vec![0.0; kernel.rows.len()];
    for &s in &class {
        pi[s] = 1.0 / class.len() as f64;
    }
    for _ in 0..max_iter {
        let next = kernel.apply(&pi);
        let residual: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        if residual <= tol {
            return Ok(pi);
        }
        for (p, q) in pi.iter_mut().zip(&next) {
            *p = 0.5 * (*p + q);
        }
    }
    Err(RbbError::NonConvergence(max_iter))
}

/// Stationary law by Gaussian elimination on `pi (P - I) = 0, sum pi = 1`
/// restricted to the class reachable from `start`.
pub fn stationary_dense(kernel: &TransitionKernel, start: &[u64]) -> Result<Vec<f64>> {
    let start = kernel.start_index(start)?;
    let class = kernel.irreducible_class(start)?;
    let k = class.len();
    if k > DENSE_SOLVE_LIMIT {
        return Err(RbbError::CapExceeded {
            what: "dense stationary solve",
            size: k as u128,
            cap: DENSE_SOLVE_LIMIT as u128,
        });
    }
    let pos: HashMap<usize, usize> = class.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    // Row j of the system: sum_i pi_i (P_ij - delta_ij) = 0; the last row is
    // replaced by normalization.
    let mut a = vec![vec![0.0; k + 1]; k];
    for (i, &s) in class.iter().enumerate() {
        a[i][i] -= 1.0;
        for &(t, p) in &kernel.rows[s] {
            a[pos[&t]][i] += p;
        }
    }
    a[k - 1].fill(1.0);
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty pivot range");
        if a[pivot][col].abs() < 1e-300 {
            return Err(RbbError::Precondition("singular stationary system".into()));
        }
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && row[col] != 0.0 {
                let f = row[col] / pivot_row[col];
                for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *v -= f * p;
                }
            }
        }
    }
    let mut pi = vec![0.0; kernel.rows.len()];
    for (i, &s) in class.iter().enumerate() {
        pi[s] = a[i][k] / a[i][i];
    }
    Ok(pi)
}

/// `sum_s p(s) g(s)`.
pub fn expected_observable<'a, I>(dist: I, g: &Observable) -> f64
where
    I: IntoIterator<Item = (&'a [u64], f64)>,
{
    dist.into_iter().map(|(s, p)| p * g.evaluate(s)).sum()
}

/// Pairs a full-length stationary vector with its states.
pub fn stationary_pairs<'a>(
    space: &'a StateSpace,
    pi: &'a [f64],
) -> impl Iterator<Item = (&'a [u64], f64)> + 'a {
    space.states.iter().map(Vec::as_slice).zip(pi.iter().copied())
}

/// `2 0 1` style label used in oracle CSV files.
pub fn state_label(state: &[u64]) -> String {
    state.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
}

pub fn write_distribution_csv<'a, W, I>(mut w: W, dist: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a [u64], f64)>,
{
    writeln!(w, "state,probability")?;
    for (s, p) in dist {
        writeln!(w, "{},{}", state_label(s), p)?;
    }
    Ok(())
}

pub fn write_kernel_csv<W: Write>(mut w: W, kernel: &TransitionKernel) -> Result<()> {
    writeln!(w, "from,to,probability")?;
    for (s, row) in kernel.rows.iter().enumerate() {
        for &(t, p) in row {
            writeln!(
                w,
                "{},{},{}",
                state_label(&kernel.space.states[s]),
                state_label(&kernel.space.states[t]),
                p
            )?;
        }
    }
    Ok(())
}
