//! Brute-force references for small instances.
//!
//! Nothing here shares code with the DP in `offline` or with the policy
//! implementations; these routines exist to certify them.

use std::collections::BTreeSet;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::star::{NodeId, Request, RequestSequence};

/// Default cap on `n^|σ|` for [`brute_force_opt`]; covers n = 6, |σ| = 12.
pub const DEFAULT_BUDGET: u128 = 6u128.pow(12);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub min_cost: u64,
    /// Optimal trajectories in enumeration order, at most `cap` of them.
    pub optimal_trajectories: Vec<Vec<NodeId>>,
    /// Set when more optima exist than were stored.
    pub overflow: bool,
    pub optimum_count: u64,
    /// Smallest reversed phase-length sequence over all optima.
    pub lexmin_reversed_phases: Vec<usize>,
}

pub fn brute_force_opt(seq: &RequestSequence, cap: usize) -> Result<OracleResult> {
    brute_force_opt_with_budget(seq, cap, DEFAULT_BUDGET)
}

/// Exhaustive depth-first search over center trajectories, centers tried in
/// ascending id order at every step. Branches whose partial cost already
/// exceeds the best complete cost are cut; with one unit per remaining
/// request as the lower bound this never removes an optimum.
pub fn brute_force_opt_with_budget(seq: &RequestSequence, cap: usize, budget: u128) -> Result<OracleResult> {
    seq.validate()?;
    let space = (seq.n as u128).checked_pow(seq.len() as u32).unwrap_or(u128::MAX);
    if space > budget {
        return Err(Error::BudgetExceeded { needed: space, budget });
    }
    let mut search = Search {
        requests: &seq.requests,
        n: seq.n,
        cap,
        best: u64::MAX,
        stored: Vec::new(),
        count: 0,
        lexmin: None,
        path: Vec::with_capacity(seq.len()),
    };
    search.dfs(seq.initial_center.0, 0);

    let min_cost = if seq.is_empty() { 0 } else { search.best };
    Ok(OracleResult {
        min_cost,
        overflow: search.count > search.stored.len() as u64,
        optimum_count: search.count,
        optimal_trajectories: search
            .stored
            .into_iter()
            .map(|t| t.into_iter().map(NodeId).collect())
            .collect(),
        lexmin_reversed_phases: search.lexmin.unwrap_or_default(),
    })
}

struct Search<'a> {
    requests: &'a [Request],
    n: usize,
    cap: usize,
    best: u64,
    stored: Vec<Vec<usize>>,
    count: u64,
    lexmin: Option<Vec<usize>>,
    path: Vec<usize>,
}

impl Search<'_> {
    fn dfs(&mut self, center: usize, cost: u64) {
        let depth = self.path.len();
        if depth == self.requests.len() {
            self.complete(cost);
            return;
        }
        let remaining = (self.requests.len() - depth) as u64;
        if cost + remaining > self.best {
            return;
        }
        let req = &self.requests[depth];
        for next in 0..self.n {
            let step = u64::from(next != center) + if req.u.0 == next || req.v.0 == next { 1 } else { 2 };
            self.path.push(next);
            self.dfs(next, cost + step);
            self.path.pop();
        }
    }

    fn complete(&mut self, cost: u64) {
        if cost > self.best {
            return;
        }
        if cost < self.best {
            self.best = cost;
            self.stored.clear();
            self.count = 0;
            self.lexmin = None;
        }
        self.count += 1;
        if self.stored.len() < self.cap {
            self.stored.push(self.path.clone());
        }
        let rev = reversed_run_lengths(&self.path);
        if self.lexmin.as_ref().is_none_or(|m| rev < *m) {
            self.lexmin = Some(rev);
        }
    }
}

fn reversed_run_lengths(path: &[usize]) -> Vec<usize> {
    let mut runs: Vec<usize> = Vec::new();
    for (i, c) in path.iter().enumerate() {
        if i > 0 && path[i - 1] == *c {
            *runs.last_mut().unwrap() += 1;
        } else {
            runs.push(1);
        }
    }
    runs.reverse();
    runs
}

/// Longest sequence accepted by [`exact_rand_expectation`].
pub const EXACT_EXPECTATION_MAX_LEN: usize = 12;

/// Exact expected cost of Randomized PivotTracking by walking every branch
/// of its coin flips: a union step splits three ways (stay, first endpoint,
/// second endpoint), an intersection with two candidates off-center splits
/// two ways.
pub fn exact_rand_expectation(seq: &RequestSequence) -> Result<Ratio<i64>> {
    seq.validate()?;
    if seq.len() > EXACT_EXPECTATION_MAX_LEN {
        return Err(Error::BudgetExceeded {
            needed: seq.len() as u128,
            budget: EXACT_EXPECTATION_MAX_LEN as u128,
        });
    }
    let start = BTreeSet::from([seq.initial_center.0]);
    Ok(branch(&seq.requests, seq.initial_center.0, &start))
}

fn branch(rest: &[Request], center: usize, cands: &BTreeSet<usize>) -> Ratio<i64> {
    let Some((req, tail)) = rest.split_first() else {
        return Ratio::from_integer(0);
    };
    let pair = BTreeSet::from([req.u.0, req.v.0]);
    let serve = |c: usize| -> i64 {
        if pair.contains(&c) {
            1
        } else {
            2
        }
    };
    let common: BTreeSet<usize> = cands.intersection(&pair).copied().collect();
    if !common.is_empty() {
        if common.contains(&center) {
            return Ratio::from_integer(serve(center)) + branch(tail, center, &common);
        }
        let weight = Ratio::new(1, common.len() as i64);
        return common
            .iter()
            .map(|&c| weight * (Ratio::from_integer(1 + serve(c)) + branch(tail, c, &common)))
            .sum();
    }
    let grown: BTreeSet<usize> = cands.union(&pair).copied().collect();
    let third = Ratio::new(1, 3);
    let stay = Ratio::from_integer(serve(center)) + branch(tail, center, &grown);
    let first = Ratio::from_integer(1 + serve(req.u.0)) + branch(tail, req.u.0, &grown);
    let second = Ratio::from_integer(1 + serve(req.v.0)) + branch(tail, req.v.0, &grown);
    third * (stay + first + second)
}
