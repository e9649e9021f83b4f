//! Exact assignment step as a 0-1 program.
//!
//! With fixed effective channels the cost of subcarrier `i` depends only on
//! its active set: linear terms `c_{p,i} Z(p,i)` plus pair terms
//! `d_{p,q,i} Y(p,q,i)` where `Y(p,q,i) = Z(p,i) Z(q,i)` is enforced by the
//! McCormick inequalities `Y <= Z_p`, `Y <= Z_q`, `Z_p + Z_q - Y <= 1`.
//! Because every `d >= 0`, the cheapest `Y` allowed by those inequalities is
//! exactly the product, so the program's optimum equals the quadratic one.
//!
//! The branch-and-bound solver branches on the active set of one subcarrier
//! at a time (depth-first, cheapest set first), prunes against the incumbent
//! with two relaxation bounds, and drops nodes dominated by an earlier visit
//! with the same remaining per-user quotas.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{check_feasible, AssignmentMatrix};
use crate::linalg::CMatrix;
use crate::{Error, Result};

/// Largest search space [`brute_force`] accepts.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// Users beyond this make the per-subcarrier subset tables too large.
const MAX_USERS: usize = 15;
/// Quotas are packed one byte per user in the dominance table.
const MAX_SUBCARRIERS: usize = 255;

#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    users: usize,
    subcarriers: usize,
    k_c: usize,
    /// `c_{p,i}` at `p * N_c + i`.
    linear: Vec<f64>,
    /// `d_{p,q,i}` (p < q) at `pair_index(p, q) * N_c + i`.
    pair: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub assignment: AssignmentMatrix,
    pub objective: f64,
    /// Branch-and-bound nodes expanded, including tie-breaking searches.
    pub nodes: u64,
}

impl MilpInstance {
    /// `c_{p,i} = |a H_i(p,p) - 1|^2`, `d_{p,q,i} = |a H_i(p,q)|^2 + |a H_i(q,p)|^2`.
    pub fn from_effective(h: &[CMatrix], alpha: f64, k_c: usize) -> Result<Self> {
        let users = h.first().map_or(0, |m| m.nrows());
        let subcarriers = h.len();
        if h.iter().any(|m| m.shape() != (users, users)) {
            return Err(Error::Dimension("effective channels must be K x K".into()));
        }
        let pairs = users * users.saturating_sub(1) / 2;
        let mut linear = vec![0.0; users * subcarriers];
        let mut pair = vec![0.0; pairs * subcarriers];
        for (i, hi) in h.iter().enumerate() {
            for p in 0..users {
                linear[p * subcarriers + i] = (hi[(p, p)] * alpha - 1.0).norm_sqr();
                for q in p + 1..users {
                    pair[pair_index(users, p, q) * subcarriers + i] =
                        (hi[(p, q)] * alpha).norm_sqr() + (hi[(q, p)] * alpha).norm_sqr();
                }
            }
        }
        Ok(Self {
            users,
            subcarriers,
            k_c,
            linear,
            pair,
        })
    }

    /// Instance from explicit cost tables (layouts as documented on the fields).
    pub fn from_costs(
        users: usize,
        subcarriers: usize,
        k_c: usize,
        linear: Vec<f64>,
        pair: Vec<f64>,
    ) -> Result<Self> {
        let pairs = users * users.saturating_sub(1) / 2;
        if linear.len() != users * subcarriers || pair.len() != pairs * subcarriers {
            return Err(Error::Dimension(format!(
                "cost tables of {} and {} entries for K = {users}, N_c = {subcarriers}",
                linear.len(),
                pair.len()
            )));
        }
        if linear.iter().chain(&pair).any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain {
                what: "MILP cost",
                value: linear
                    .iter()
                    .chain(&pair)
                    .copied()
                    .find(|v| !(*v >= 0.0) || !v.is_finite())
                    .unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            users,
            subcarriers,
            k_c,
            linear,
            pair,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn k_c(&self) -> usize {
        self.k_c
    }

    pub fn linear(&self, p: usize, i: usize) -> f64 {
        self.linear[p * self.subcarriers + i]
    }

    /// `d_{p,q,i}` for `p != q` (order-insensitive).
    pub fn pair(&self, p: usize, q: usize, i: usize) -> f64 {
        let (a, b) = if p < q { (p, q) } else { (q, p) };
        self.pair[pair_index(self.users, a, b) * self.subcarriers + i]
    }

    pub fn pair_count(&self) -> usize {
        self.users * self.users.saturating_sub(1) / 2
    }

    /// Cost of serving user set `mask` (bit `p` = user `p`) on subcarrier `i`.
    pub fn subset_cost(&self, i: usize, mask: u32) -> f64 {
        let mut cost = 0.0;
        for p in 0..self.users {
            if mask >> p & 1 == 1 {
                cost += self.linear(p, i);
            }
        }
        for p in 0..self.users {
            for q in p + 1..self.users {
                if mask >> p & 1 == 1 && mask >> q & 1 == 1 {
                    cost += self.pair(p, q, i);
                }
            }
        }
        cost
    }

    /// Objective at `Z` with `Y` induced as the products.
    pub fn objective(&self, z: &AssignmentMatrix) -> f64 {
        (0..self.subcarriers)
            .map(|i| self.subset_cost(i, column_mask(z, i)))
            .fold(0.0, |acc, c| acc + c)
    }

    /// Linear objective `sum c Z + sum d Y` for explicit product variables
    /// (`y` laid out like the pair costs).
    pub fn linearized_objective(&self, z: &AssignmentMatrix, y: &[bool]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.subcarriers {
            for p in 0..self.users {
                if z.get(p, i) {
                    total += self.linear(p, i);
                }
            }
            for p in 0..self.users {
                for q in p + 1..self.users {
                    if y[pair_index(self.users, p, q) * self.subcarriers + i] {
                        total += self.pair(p, q, i);
                    }
                }
            }
        }
        total
    }

    /// The three linearization inequalities for every `(p < q, i)`.
    pub fn products_feasible(&self, z: &AssignmentMatrix, y: &[bool]) -> bool {
        (0..self.subcarriers).all(|i| {
            (0..self.users).all(|p| {
                (p + 1..self.users).all(|q| {
                    let (zp, zq) = (z.get(p, i) as i8, z.get(q, i) as i8);
                    let yv = y[pair_index(self.users, p, q) * self.subcarriers + i] as i8;
                    yv <= zp && yv <= zq && zp + zq - yv <= 1
                })
            })
        })
    }

    /// Cheapest feasible `Y` for a fixed `Z`: `Y = max(0, Z_p + Z_q - 1)`.
    pub fn minimizing_products(&self, z: &AssignmentMatrix) -> Vec<bool> {
        let mut y = vec![false; self.pair_count() * self.subcarriers];
        for i in 0..self.subcarriers {
            for p in 0..self.users {
                for q in p + 1..self.users {
                    y[pair_index(self.users, p, q) * self.subcarriers + i] = z.get(p, i) && z.get(q, i);
                }
            }
        }
        y
    }

    fn subset_table(&self) -> Vec<f64> {
        let n = 1usize << self.users;
        let mut t = vec![0.0; n * self.subcarriers];
        for i in 0..self.subcarriers {
            for mask in 1..n {
                t[i * n + mask] = self.subset_cost(i, mask as u32);
            }
        }
        t
    }

    fn check_solvable(&self) -> Result<()> {
        check_feasible(self.users, self.subcarriers, self.k_c)?;
        if self.users > MAX_USERS || self.subcarriers > MAX_SUBCARRIERS {
            return Err(Error::Config(format!(
                "assignment solver supports at most {MAX_USERS} users and {MAX_SUBCARRIERS} subcarriers"
            )));
        }
        Ok(())
    }
}

fn pair_index(users: usize, p: usize, q: usize) -> usize {
    debug_assert!(p < q && q < users);
    p * (2 * users - p - 1) / 2 + (q - p - 1)
}

fn column_mask(z: &AssignmentMatrix, i: usize) -> u32 {
    (0..z.users()).fold(0, |m, k| m | ((z.get(k, i) as u32) << k))
}

fn tie_cutoff(best: f64) -> f64 {
    best + 1e-12 * (1.0 + best.abs())
}

fn assignment_from_masks(users: usize, masks: &[u32]) -> AssignmentMatrix {
    let mut z = AssignmentMatrix::zeros(users, masks.len());
    for (i, &m) in masks.iter().enumerate() {
        for k in 0..users {
            z.set(k, i, m >> k & 1 == 1);
        }
    }
    z
}

/// Exact optimum by exhaustive enumeration of per-subcarrier user sets.
///
/// Among solutions within a relative `1e-12` of the optimum the
/// lexicographically smallest (row-major, `0 < 1`) is returned.
pub fn brute_force(instance: &MilpInstance) -> Result<MilpSolution> {
    instance.check_solvable()?;
    let (users, n) = (instance.users, instance.subcarriers);
    let per_column = (1u128 << users) - 1;
    let candidates = (0..n).try_fold(1u128, |acc, _| acc.checked_mul(per_column));
    match candidates {
        Some(c) if c <= BRUTE_FORCE_LIMIT => {}
        other => {
            return Err(Error::TooLarge {
                candidates: other.unwrap_or(u128::MAX),
                limit: BRUTE_FORCE_LIMIT,
            })
        }
    }

    let table = instance.subset_table();
    let width = 1usize << users;
    let enumerate = |visit: &mut dyn FnMut(&[u32], f64)| {
        let mut masks = vec![1u32; n];
        loop {
            let rows_ok = (0..users)
                .all(|k| masks.iter().filter(|&&m| m >> k & 1 == 1).count() == instance.k_c);
            if rows_ok {
                let cost = masks
                    .iter()
                    .enumerate()
                    .fold(0.0, |acc, (i, &m)| acc + table[i * width + m as usize]);
                visit(&masks, cost);
            }
            let mut c = 0;
            loop {
                if c == n {
                    return;
                }
                masks[c] += 1;
                if masks[c] as usize == width {
                    masks[c] = 1;
                    c += 1;
                } else {
                    break;
                }
            }
        }
    };

    let mut best = f64::INFINITY;
    enumerate(&mut |_, cost| best = best.min(cost));
    if !best.is_finite() {
        return Err(Error::Infeasible("no assignment satisfies the row sums".into()));
    }
    let cutoff = tie_cutoff(best);
    let mut chosen: Option<AssignmentMatrix> = None;
    enumerate(&mut |m, cost| {
        if cost <= cutoff {
            let z = assignment_from_masks(users, m);
            if chosen.as_ref().is_none_or(|c| z.lex_cmp(c).is_lt()) {
                chosen = Some(z);
            }
        }
    });
    let assignment = chosen.expect("optimum was found in the first pass");
    Ok(MilpSolution {
        objective: instance.objective(&assignment),
        assignment,
        nodes: 0,
    })
}

/// Global optimum of the assignment program, lexicographically smallest among
/// ties (same rule as [`brute_force`]).
pub fn solve_branch_and_bound(instance: &MilpInstance) -> Result<MilpSolution> {
    instance.check_solvable()?;
    let (users, n) = (instance.users, instance.subcarriers);
    let table = instance.subset_table();
    let bounds = Bounds::new(instance);
    let mut fixed: Vec<Option<bool>> = vec![None; users * n];

    let mut search = Search::new(instance, &table, &bounds, &fixed, f64::INFINITY, false);
    search.run();
    let mut nodes = search.nodes;
    let mut masks = search
        .best_masks
        .take()
        .ok_or_else(|| Error::Infeasible("search exhausted without a feasible assignment".into()))?;
    let optimum = search.best;
    let cutoff = tie_cutoff(optimum);

    // Lexicographic tie-breaking: walk the cells in row-major order and keep a
    // zero wherever some near-optimal solution agrees with the fixed prefix.
    for k in 0..users {
        for i in 0..n {
            let cell = k * n + i;
            if masks[i] >> k & 1 == 0 {
                fixed[cell] = Some(false);
                continue;
            }
            fixed[cell] = Some(false);
            let mut probe = Search::new(instance, &table, &bounds, &fixed, cutoff, true);
            probe.run();
            nodes += probe.nodes;
            match probe.best_masks.take() {
                Some(found) => masks = found,
                None => fixed[cell] = Some(true),
            }
        }
    }

    let assignment = assignment_from_masks(users, &masks);
    Ok(MilpSolution {
        objective: instance.objective(&assignment),
        assignment,
        nodes,
    })
}

/// Relaxation bounds on the cost of completing subcarriers `j..N_c`.
struct Bounds {
    subcarriers: usize,
    /// `row[k][j]`: prefix sums of the ascending `c_{k,i}`, `i >= j`.
    row: Vec<Vec<Vec<f64>>>,
    /// `count[j][t]`: cheapest way to place `t` user slots on subcarriers
    /// `j..`, each subcarrier taking at least one user, ignoring identities.
    count: Vec<Vec<f64>>,
}

impl Bounds {
    fn new(instance: &MilpInstance) -> Self {
        let (users, n) = (instance.users, instance.subcarriers);
        let row = (0..users)
            .map(|k| {
                (0..=n)
                    .map(|j| {
                        let mut c: Vec<f64> = (j..n).map(|i| instance.linear(k, i)).collect();
                        c.sort_by(f64::total_cmp);
                        let mut prefix = Vec::with_capacity(c.len() + 1);
                        prefix.push(0.0);
                        let mut acc = 0.0;
                        for v in c {
                            acc += v;
                            prefix.push(acc);
                        }
                        prefix
                    })
                    .collect()
            })
            .collect();

        // cheapest subset of each size on each subcarrier
        let mut by_size = vec![vec![f64::INFINITY; users + 1]; n];
        for (i, sizes) in by_size.iter_mut().enumerate() {
            for mask in 1u32..(1 << users) {
                let s = mask.count_ones() as usize;
                sizes[s] = sizes[s].min(instance.subset_cost(i, mask));
            }
        }
        let slots = users * n;
        let mut count = vec![vec![f64::INFINITY; slots + 1]; n + 1];
        count[n][0] = 0.0;
        for j in (0..n).rev() {
            for t in 1..=slots {
                let mut best = f64::INFINITY;
                for s in 1..=users.min(t) {
                    let rest = count[j + 1][t - s];
                    if rest.is_finite() {
                        best = best.min(by_size[j][s] + rest);
                    }
                }
                count[j][t] = best;
            }
        }
        Self {
            subcarriers: n,
            row,
            count,
        }
    }

    fn lower(&self, j: usize, remaining: &[usize]) -> f64 {
        let by_rows: f64 = remaining
            .iter()
            .enumerate()
            .map(|(k, &r)| self.row[k][j][r])
            .sum();
        let total: usize = remaining.iter().sum();
        let by_count = if j == self.subcarriers {
            if total == 0 { 0.0 } else { f64::INFINITY }
        } else {
            self.count[j].get(total).copied().unwrap_or(f64::INFINITY)
        };
        // shave rounding so a bound never exceeds a cost it should equal
        by_rows.max(by_count) * (1.0 - 1e-14)
    }
}

struct Search<'a> {
    instance: &'a MilpInstance,
    table: &'a [f64],
    bounds: &'a Bounds,
    /// Allowed masks per subcarrier, ascending cost.
    options: Vec<Vec<u32>>,
    /// `must[k][j]` / `avail[k][j]`: cells of user `k` on subcarriers `j..`
    /// fixed to one / not fixed to zero.
    must: Vec<Vec<usize>>,
    avail: Vec<Vec<usize>>,
    /// In existence mode the first solution within the cutoff ends the search.
    existence: bool,
    best: f64,
    best_masks: Option<Vec<u32>>,
    path: Vec<u32>,
    remaining: Vec<usize>,
    memo: BTreeMap<u128, f64>,
    nodes: u64,
    done: bool,
}

impl<'a> Search<'a> {
    fn new(
        instance: &'a MilpInstance,
        table: &'a [f64],
        bounds: &'a Bounds,
        fixed: &[Option<bool>],
        cutoff: f64,
        existence: bool,
    ) -> Self {
        let (users, n) = (instance.users, instance.subcarriers);
        let width = 1usize << users;
        let options = (0..n)
            .map(|i| {
                let mut masks: Vec<u32> = (1..width as u32)
                    .filter(|&m| {
                        (0..users).all(|k| match fixed[k * n + i] {
                            Some(v) => (m >> k & 1 == 1) == v,
                            None => true,
                        })
                    })
                    .collect();
                masks.sort_by(|&a, &b| {
                    table[i * width + a as usize]
                        .total_cmp(&table[i * width + b as usize])
                        .then(a.cmp(&b))
                });
                masks
            })
            .collect();
        let tail_count = |pred: &dyn Fn(Option<bool>) -> bool| -> Vec<Vec<usize>> {
            (0..users)
                .map(|k| {
                    let mut v = vec![0; n + 1];
                    for j in (0..n).rev() {
                        v[j] = v[j + 1] + pred(fixed[k * n + j]) as usize;
                    }
                    v
                })
                .collect()
        };
        Self {
            instance,
            table,
            bounds,
            options,
            must: tail_count(&|f| f == Some(true)),
            avail: tail_count(&|f| f != Some(false)),
            existence,
            best: cutoff,
            best_masks: None,
            path: Vec::with_capacity(n),
            remaining: vec![instance.k_c; users],
            memo: BTreeMap::new(),
            nodes: 0,
            done: false,
        }
    }

    fn run(&mut self) {
        if self.quotas_ok(0) {
            self.descend(0, 0.0);
        }
    }

    fn quotas_ok(&self, j: usize) -> bool {
        let left = self.instance.subcarriers - j;
        let total: usize = self.remaining.iter().sum();
        total >= left
            && self
                .remaining
                .iter()
                .enumerate()
                .all(|(k, &r)| r >= self.must[k][j] && r <= self.avail[k][j].min(left))
    }

    fn key(&self, j: usize) -> u128 {
        self.remaining
            .iter()
            .fold(j as u128, |acc, &r| (acc << 8) | r as u128)
    }

    fn descend(&mut self, j: usize, cost: f64) {
        self.nodes += 1;
        let n = self.instance.subcarriers;
        if j == n {
            let better = if self.existence {
                cost <= self.best
            } else {
                cost < self.best
            };
            if better {
                self.best = if self.existence { self.best } else { cost };
                self.best_masks = Some(self.path.clone());
                self.done = self.existence;
            }
            return;
        }
        let bound = cost + self.bounds.lower(j, &self.remaining);
        if bound > self.best || (!self.existence && bound >= self.best) {
            return;
        }
        let key = self.key(j);
        match self.memo.get(&key) {
            Some(&seen) if cost >= seen => return,
            _ => {
                self.memo.insert(key, cost);
            }
        }
        let width = 1usize << self.instance.users;
        for idx in 0..self.options[j].len() {
            let mask = self.options[j][idx];
            if (0..self.instance.users).any(|k| mask >> k & 1 == 1 && self.remaining[k] == 0) {
                continue;
            }
            for k in 0..self.instance.users {
                self.remaining[k] -= (mask >> k & 1) as usize;
            }
            if self.quotas_ok(j + 1) {
                self.path.push(mask);
                let c = cost + self.table[j * width + mask as usize];
                self.descend(j + 1, c);
                self.path.pop();
            }
            for k in 0..self.instance.users {
                self.remaining[k] += (mask >> k & 1) as usize;
            }
            if self.done {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, users: usize, n: usize, k_c: usize) -> MilpInstance {
        let pairs = users * (users - 1) / 2;
        let linear = (0..users * n).map(|_| rng.random::<f64>()).collect();
        let pair = (0..pairs * n).map(|_| rng.random::<f64>()).collect();
        MilpInstance::from_costs(users, n, k_c, linear, pair).unwrap()
    }

    #[test]
    fn product_variables_follow_binary_products() {
        let inst = MilpInstance::from_costs(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4], vec![0.5, 0.6]).unwrap();
        for bits in 0..16u32 {
            let cells = (0..4).map(|b| bits >> b & 1 == 1).collect();
            let z = AssignmentMatrix::new(2, 2, cells).unwrap();
            let y = inst.minimizing_products(&z);
            assert!(inst.products_feasible(&z, &y));
            for i in 0..2 {
                assert_eq!(y[i], z.get(0, i) && z.get(1, i));
                // the opposite value violates (15)-(17) whenever it differs
                let mut flipped = y.clone();
                flipped[i] = !flipped[i];
                assert!(!inst.products_feasible(&z, &flipped));
            }
            assert!((inst.linearized_objective(&z, &y) - inst.objective(&z)).abs() < 1e-15);
        }
    }

    #[test]
    fn objective_equals_gamma_on_enumeration() {
        use crate::allocation::gamma_expanded;
        use crate::Complex64;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h: Vec<CMatrix> = (0..2)
            .map(|_| CMatrix::from_fn(2, 2, |_, _| Complex64::new(rng.random(), rng.random())))
            .collect();
        let inst = MilpInstance::from_effective(&h, 0.8, 1).unwrap();
        for bits in 0..16u32 {
            let cells = (0..4).map(|b| bits >> b & 1 == 1).collect();
            let z = AssignmentMatrix::new(2, 2, cells).unwrap();
            let g = gamma_expanded(&h, 0.8, &z);
            assert!((inst.objective(&z) - g).abs() <= 1e-12 * (1.0 + g));
        }
    }

    #[test]
    fn single_user_takes_every_subcarrier() {
        let inst = MilpInstance::from_costs(1, 4, 4, vec![0.3, 0.1, 0.2, 0.5], vec![]).unwrap();
        let s = solve_branch_and_bound(&inst).unwrap();
        assert_eq!(s.assignment, AssignmentMatrix::ones(1, 4));
        assert!((s.objective - 1.1).abs() < 1e-15);
        let bad = MilpInstance::from_costs(1, 4, 3, vec![0.0; 4], vec![]).unwrap();
        assert!(matches!(solve_branch_and_bound(&bad), Err(Error::Infeasible(_))));
    }

    #[test]
    fn brute_force_separates_users_on_diagonal_costs() {
        // user 0 cheap on subcarrier 0, user 1 cheap on subcarrier 1
        let inst = MilpInstance::from_costs(2, 2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![5.0, 5.0]).unwrap();
        let s = brute_force(&inst).unwrap();
        assert_eq!(s.assignment, AssignmentMatrix::from_rows(&[&[1, 0], &[0, 1]]).unwrap());
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn ties_resolve_to_lexicographic_minimum() {
        let inst = MilpInstance::from_costs(2, 2, 1, vec![1.0; 4], vec![0.0; 2]).unwrap();
        let expect = AssignmentMatrix::from_rows(&[&[0, 1], &[1, 0]]).unwrap();
        assert_eq!(brute_force(&inst).unwrap().assignment, expect);
        assert_eq!(solve_branch_and_bound(&inst).unwrap().assignment, expect);
        let zero = MilpInstance::from_costs(3, 4, 2, vec![0.0; 12], vec![0.0; 12]).unwrap();
        assert_eq!(
            brute_force(&zero).unwrap().assignment,
            solve_branch_and_bound(&zero).unwrap().assignment
        );
    }

    #[test]
    fn no_pair_costs_reduce_to_cheapest_with_coverage() {
        // K = 2, N_c = 4, K_c = 2, distinct c and d = 0
        let c = vec![0.1, 0.4, 0.2, 0.9, 0.3, 0.8, 0.05, 0.7];
        let inst = MilpInstance::from_costs(2, 4, 2, c.clone(), vec![0.0; 4]).unwrap();
        let s = solve_branch_and_bound(&inst).unwrap();
        // oracle: every split of the four subcarriers into two covering pairs
        let mut best = f64::INFINITY;
        for a in 0..4 {
            for b in a + 1..4 {
                for x in 0..4 {
                    for y in x + 1..4 {
                        let covered = (0..4).all(|i| i == a || i == b || i == x || i == y);
                        if covered {
                            best = best.min(c[a] + c[b] + c[4 + x] + c[4 + y]);
                        }
                    }
                }
            }
        }
        assert!((s.objective - best).abs() < 1e-15);
        s.assignment.validate(Some(2)).unwrap();
    }

    #[test]
    fn branch_and_bound_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..60 {
            let (users, n): (usize, usize) = [(2, 2), (2, 3), (2, 4), (3, 3), (3, 4)][trial % 5];
            let lo = n.div_ceil(users);
            for k_c in lo..=n {
                let inst = random_instance(&mut rng, users, n, k_c);
                let a = solve_branch_and_bound(&inst).unwrap();
                let b = brute_force(&inst).unwrap();
                assert_eq!(a.objective, b.objective);
                assert_eq!(a.assignment, b.assignment);
                a.assignment.validate(Some(k_c)).unwrap();
            }
        }
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let inst = MilpInstance::from_costs(4, 16, 4, vec![0.0; 64], vec![0.0; 96]).unwrap();
        assert!(matches!(brute_force(&inst), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn desk_sized_instance_solves_quickly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k_c in [4, 6, 8, 10, 12, 16] {
            let inst = random_instance(&mut rng, 4, 16, k_c);
            let s = solve_branch_and_bound(&inst).unwrap();
            s.assignment.validate(Some(k_c)).unwrap();
        }
    }
}
