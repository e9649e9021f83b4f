//! Magnitude-ranked greedy assignment baseline.

use alloc::vec;
use alloc::vec::Vec;

use super::{check_feasible, subcarrier_cost, AssignmentMatrix};
use crate::linalg::CMatrix;
use crate::{Error, Result};

/// Partial fitting cost of serving `users` on one subcarrier with the
/// current phases.
pub trait FitProbe {
    fn subcarrier_cost(&self, subcarrier: usize, users: &[usize]) -> f64;
}

/// Probe backed by effective channels `H_i` and a scaling factor.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveProbe<'a> {
    pub channels: &'a [CMatrix],
    pub alpha: f64,
}

impl FitProbe for EffectiveProbe<'_> {
    fn subcarrier_cost(&self, subcarrier: usize, users: &[usize]) -> f64 {
        subcarrier_cost(&self.channels[subcarrier], self.alpha, users)
    }
}

struct Partial<'p> {
    z: AssignmentMatrix,
    remaining: Vec<usize>,
    cost: Vec<f64>,
    probe: &'p dyn FitProbe,
}

impl Partial<'_> {
    fn increase(&self, k: usize, i: usize) -> f64 {
        let mut users = self.z.column_users(i);
        users.push(k);
        users.sort_unstable();
        self.probe.subcarrier_cost(i, &users) - self.cost[i]
    }

    fn add(&mut self, k: usize, i: usize) {
        self.z.set(k, i, true);
        self.remaining[k] -= 1;
        self.cost[i] = self.probe.subcarrier_cost(i, &self.z.column_users(i));
    }

    /// Mean cost over subcarriers that already serve someone.
    fn average_cost(&self) -> f64 {
        let served: Vec<usize> = (0..self.z.subcarriers())
            .filter(|&i| self.z.column_count(i) > 0)
            .collect();
        if served.is_empty() {
            0.0
        } else {
            served.iter().map(|&i| self.cost[i]).sum::<f64>() / served.len() as f64
        }
    }

    fn accepts(&self, increase: f64, threshold: f64) -> bool {
        threshold.is_infinite() || increase <= threshold * self.average_cost()
    }
}

/// Subcarrier-by-subcarrier greedy assignment.
///
/// On each subcarrier users are ranked by their peak channel magnitude
/// `max_m |G_i(k, m)|` and tried in that order. A user joins when the partial
/// fitting cost grows by at most `threshold` times the current average cost
/// per served subcarrier. A subcarrier nobody joined takes the user with the
/// smallest increase, so every subcarrier is covered. Extra passes repeat the
/// rule; users still short of `k_c` afterwards are placed on their cheapest
/// free subcarriers.
pub fn greedy_assignment(
    g: &[CMatrix],
    k_c: usize,
    probe: &dyn FitProbe,
    threshold: f64,
) -> Result<AssignmentMatrix> {
    let users = g.first().map_or(0, |m| m.nrows());
    let n = g.len();
    check_feasible(users, n, k_c)?;
    if !(threshold >= 0.0) {
        return Err(Error::Config("greedy threshold must be non-negative".into()));
    }

    let ranking: Vec<Vec<usize>> = g
        .iter()
        .map(|gi| {
            let peak: Vec<f64> = (0..users)
                .map(|k| gi.row(k).iter().map(|v| v.norm()).fold(0.0, f64::max))
                .collect();
            let mut order: Vec<usize> = (0..users).collect();
            order.sort_by(|&a, &b| peak[b].total_cmp(&peak[a]).then(a.cmp(&b)));
            order
        })
        .collect();

    let mut state = Partial {
        z: AssignmentMatrix::zeros(users, n),
        remaining: vec![k_c; users],
        cost: vec![0.0; n],
        probe,
    };

    for i in 0..n {
        for &k in &ranking[i] {
            // keep enough quota to cover the subcarriers still ahead
            let spare = state.remaining.iter().sum::<usize>() > n - i - 1;
            let empty = state.z.column_count(i) == 0;
            if state.remaining[k] == 0 || !(empty || spare) {
                continue;
            }
            if state.accepts(state.increase(k, i), threshold) {
                state.add(k, i);
            }
        }
        if state.z.column_count(i) == 0 {
            let k = ranking[i]
                .iter()
                .copied()
                .filter(|&k| state.remaining[k] > 0)
                .min_by(|&a, &b| state.increase(a, i).total_cmp(&state.increase(b, i)))
                .ok_or_else(|| Error::Infeasible("greedy ran out of quota for coverage".into()))?;
            state.add(k, i);
        }
    }

    loop {
        let mut changed = false;
        for i in 0..n {
            let candidate = ranking[i]
                .iter()
                .copied()
                .filter(|&k| state.remaining[k] > 0 && !state.z.get(k, i))
                .find(|&k| state.accepts(state.increase(k, i), threshold));
            if let Some(k) = candidate {
                state.add(k, i);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    for k in 0..users {
        while state.remaining[k] > 0 {
            let i = (0..n)
                .filter(|&i| !state.z.get(k, i))
                .min_by(|&a, &b| state.increase(k, a).total_cmp(&state.increase(k, b)))
                .ok_or_else(|| Error::Infeasible("no free subcarrier left".into()))?;
            state.add(k, i);
        }
    }

    state.z.validate(Some(k_c))?;
    Ok(state.z)
}
