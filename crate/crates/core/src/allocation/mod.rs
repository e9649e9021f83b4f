//! Subcarrier assignment: the binary matrix `Z`, the fitting cost it selects,
//! and the solvers that choose it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::index;

use crate::linalg::CMatrix;
use crate::rng::{self, Purpose};
use crate::{Error, Result};

mod greedy;
mod milp;

pub use greedy::{greedy_assignment, EffectiveProbe, FitProbe};
pub use milp::{brute_force, solve_branch_and_bound, MilpInstance, MilpSolution, BRUTE_FORCE_LIMIT};

/// Binary `K x N_c` matrix; `Z(k, i)` marks user `k` on subcarrier `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssignmentMatrix {
    users: usize,
    subcarriers: usize,
    /// Row-major.
    cells: Vec<bool>,
}

impl AssignmentMatrix {
    /// Unvalidated matrix; see [`AssignmentMatrix::validate`].
    pub fn new(users: usize, subcarriers: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != users * subcarriers {
            return Err(Error::Dimension(format!(
                "{} cells for a {users}x{subcarriers} assignment",
                cells.len()
            )));
        }
        Ok(Self {
            users,
            subcarriers,
            cells,
        })
    }

    pub fn zeros(users: usize, subcarriers: usize) -> Self {
        Self {
            users,
            subcarriers,
            cells: vec![false; users * subcarriers],
        }
    }

    pub fn ones(users: usize, subcarriers: usize) -> Self {
        Self {
            users,
            subcarriers,
            cells: vec![true; users * subcarriers],
        }
    }

    /// Builds from `0/1` rows and checks row sums and column coverage.
    pub fn with_quota(users: usize, subcarriers: usize, cells: Vec<bool>, k_c: usize) -> Result<Self> {
        let z = Self::new(users, subcarriers, cells)?;
        z.validate(Some(k_c))?;
        Ok(z)
    }

    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let users = rows.len();
        let subcarriers = rows.first().map_or(0, |r| r.len());
        let mut cells = Vec::with_capacity(users * subcarriers);
        for r in rows {
            if r.len() != subcarriers {
                return Err(Error::Dimension("ragged assignment rows".into()));
            }
            cells.extend(r.iter().map(|&v| v != 0));
        }
        Self::new(users, subcarriers, cells)
    }

    /// Every column covered, and every row sums to `k_c` when given.
    pub fn validate(&self, k_c: Option<usize>) -> Result<()> {
        if let Some(k_c) = k_c {
            for k in 0..self.users {
                let n = self.row_count(k);
                if n != k_c {
                    return Err(Error::Invariant(format!(
                        "row-sum constraint: user {k} holds {n} subcarriers, expected {k_c}"
                    )));
                }
            }
        }
        for i in 0..self.subcarriers {
            if self.column_count(i) == 0 {
                return Err(Error::Invariant(format!(
                    "column-coverage constraint: subcarrier {i} serves no user"
                )));
            }
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn get(&self, k: usize, i: usize) -> bool {
        self.cells[k * self.subcarriers + i]
    }

    pub fn set(&mut self, k: usize, i: usize, value: bool) {
        self.cells[k * self.subcarriers + i] = value;
    }

    pub fn row_count(&self, k: usize) -> usize {
        self.cells[k * self.subcarriers..(k + 1) * self.subcarriers]
            .iter()
            .filter(|&&v| v)
            .count()
    }

    pub fn column_count(&self, i: usize) -> usize {
        (0..self.users).filter(|&k| self.get(k, i)).count()
    }

    /// Active users `u` of subcarrier `i`, increasing.
    pub fn column_users(&self, i: usize) -> Vec<usize> {
        (0..self.users).filter(|&k| self.get(k, i)).collect()
    }

    /// Number of ones, `sum_i ||T_i||_F^2`.
    pub fn active_pairs(&self) -> usize {
        self.cells.iter().filter(|&&v| v).count()
    }

    /// Common row sum, if every row has the same count.
    pub fn uniform_row_count(&self) -> Option<usize> {
        let first = self.row_count(0);
        (1..self.users).all(|k| self.row_count(k) == first).then_some(first)
    }

    /// Row-major lexicographic order with `0 < 1`.
    pub fn lex_cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.cells.cmp(&other.cells)
    }
}

/// Checks that a `K x N_c` assignment with `K_c` subcarriers per user exists.
pub fn check_feasible(users: usize, subcarriers: usize, k_c: usize) -> Result<()> {
    if users == 0 || subcarriers == 0 {
        return Err(Error::Infeasible("empty assignment".into()));
    }
    if k_c == 0 || k_c > subcarriers {
        return Err(Error::Infeasible(format!(
            "row-sum constraint: K_c = {k_c} must lie in 1..={subcarriers}"
        )));
    }
    if users * k_c < subcarriers {
        return Err(Error::Infeasible(format!(
            "column-coverage constraint: K * K_c = {} < N_c = {subcarriers}",
            users * k_c
        )));
    }
    Ok(())
}

/// Diagonal selection matrices `T_i = diag(Z(:, i))`.
pub fn selection_matrices(z: &AssignmentMatrix) -> Vec<DMatrix<f64>> {
    (0..z.subcarriers())
        .map(|i| {
            DMatrix::from_fn(z.users(), z.users(), |r, c| {
                if r == c && z.get(r, i) {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect()
}

/// Fitting cost through the expanded Frobenius norm:
/// `sum_i [sum_p |a H_i(p,p) - 1|^2 Z(p,i) + sum_{p != q} |a H_i(p,q)|^2 Z(p,i) Z(q,i)]`.
pub fn gamma_expanded(h: &[CMatrix], alpha: f64, z: &AssignmentMatrix) -> f64 {
    let mut total = 0.0;
    for (i, hi) in h.iter().enumerate() {
        total += subcarrier_cost(hi, alpha, &z.column_users(i));
    }
    total
}

/// `||a H(u,u) - I||_F^2` for the active set `u`.
pub(crate) fn subcarrier_cost(h: &CMatrix, alpha: f64, users: &[usize]) -> f64 {
    let mut cost = 0.0;
    for &p in users {
        cost += (h[(p, p)] * alpha - 1.0).norm_sqr();
        for &q in users {
            if q != p {
                cost += (h[(p, q)] * alpha).norm_sqr();
            }
        }
    }
    cost
}

/// Uniform draw over feasible assignments: each row takes a uniform
/// `K_c`-subset and the whole matrix is redrawn until every column is covered.
pub fn random_assignment(
    users: usize,
    subcarriers: usize,
    k_c: usize,
    seed: u64,
) -> Result<AssignmentMatrix> {
    const MAX_DRAWS: u64 = 100_000_000;
    check_feasible(users, subcarriers, k_c)?;
    let mut rng = rng::stream(seed, Purpose::Assignment, 0);
    let mut z = AssignmentMatrix::zeros(users, subcarriers);
    let mut covered = vec![false; subcarriers];
    for _ in 0..MAX_DRAWS {
        z.cells.iter_mut().for_each(|c| *c = false);
        covered.iter_mut().for_each(|c| *c = false);
        for k in 0..users {
            for i in index::sample(&mut rng, subcarriers, k_c) {
                z.set(k, i, true);
                covered[i] = true;
            }
        }
        if covered.iter().all(|&c| c) {
            return Ok(z);
        }
    }
    Err(Error::Infeasible(format!(
        "no covering assignment in {MAX_DRAWS} random draws"
    )))
}

/// Fixed reference assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Every user on every subcarrier.
    Sdma,
    /// Contiguous disjoint blocks; when `K` does not divide `N_c` the first
    /// `N_c mod K` users get one extra subcarrier.
    Ofdma,
}

pub fn baseline_assignment(mode: Baseline, users: usize, subcarriers: usize) -> Result<AssignmentMatrix> {
    if users == 0 || subcarriers == 0 {
        return Err(Error::Infeasible("empty assignment".into()));
    }
    match mode {
        Baseline::Sdma => Ok(AssignmentMatrix::ones(users, subcarriers)),
        Baseline::Ofdma => {
            if users > subcarriers {
                return Err(Error::Infeasible(format!(
                    "row-sum constraint: {users} users cannot hold disjoint subcarriers out of {subcarriers}"
                )));
            }
            let (base, extra) = (subcarriers / users, subcarriers % users);
            let mut z = AssignmentMatrix::zeros(users, subcarriers);
            let mut start = 0;
            for k in 0..users {
                let len = base + usize::from(k < extra);
                for i in start..start + len {
                    z.set(k, i, true);
                }
                start += len;
            }
            Ok(z)
        }
    }
}
