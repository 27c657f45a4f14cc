//! Exact offline optimum and the canonical optimal solution OPT*.
//!
//! The optimum is a DP over "center while serving request i". OPT* is the
//! optimal trajectory whose phase lengths, read from the last phase
//! backwards, are lexicographically smallest. It is recovered by a
//! backward pass over the optimal-trajectory DAG, fixing the last phase
//! first, then the one before it, and so on.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::star::{replay_trajectory, serve_cost_unchecked, NodeId, RequestSequence};

/// A maximal run of requests served with the same center.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[allow(clippy::len_without_is_empty)]
pub struct Phase {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub pivot: NodeId,
}

impl Phase {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Cheap,
    Expensive,
}

impl Label {
    pub fn symbol(self) -> char {
        match self {
            Label::Cheap => 'Γ',
            Label::Expensive => 'E',
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

pub fn label_string(labels: &[Label]) -> String {
    labels.iter().map(|l| l.symbol()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptSolution {
    /// Center while serving each request.
    pub trajectory: Vec<NodeId>,
    pub total_cost: u64,
    pub phases: Vec<Phase>,
    pub labels: Vec<Label>,
}

impl OptSolution {
    pub fn reversed_phase_lengths(&self) -> Vec<usize> {
        self.phases.iter().rev().map(Phase::len).collect()
    }
}

/// One `E+ Γ+` block of a label string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[allow(clippy::len_without_is_empty)]
pub struct Block {
    pub start: usize,
    pub expensive: usize,
    pub cheap: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.expensive + self.cheap
    }

    pub fn end(&self) -> usize {
        self.start + self.len() - 1
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len()
    }

    /// Upper bound on PivotTracking's cost over this block: 2ε + γ + min(2, γ).
    pub fn det_bound(&self) -> u64 {
        (2 * self.expensive + self.cheap + self.cheap.min(2)) as u64
    }

    pub fn opt_cost(&self) -> u64 {
        (2 * self.expensive + self.cheap) as u64
    }
}

/// Decomposition of a label string as `Γ* (E+ Γ+)* E*`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDecomposition {
    pub prefix_len: usize,
    pub blocks: Vec<Block>,
    pub suffix_len: usize,
}

impl BlockDecomposition {
    pub fn expand(&self) -> Vec<Label> {
        let mut out = vec![Label::Cheap; self.prefix_len];
        for b in &self.blocks {
            out.extend(std::iter::repeat_n(Label::Expensive, b.expensive));
            out.extend(std::iter::repeat_n(Label::Cheap, b.cheap));
        }
        out.extend(std::iter::repeat_n(Label::Expensive, self.suffix_len));
        out
    }

    /// Compact form such as `1x1;2x3` (ε x γ per block).
    pub fn compact(&self) -> String {
        self.blocks
            .iter()
            .map(|b| format!("{}x{}", b.expensive, b.cheap))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Forward DP tables shared by `opt_cost` and `opt_star`.
struct Dp<'a> {
    seq: &'a RequestSequence,
    n: usize,
    /// `cost[i * n + c]`: cheapest way to serve requests `0..=i` with `c`
    /// at the center while serving request `i`.
    cost: Vec<u64>,
    /// Per layer: (smallest value, its argmin, second smallest value).
    layer_min: Vec<(u64, usize, u64)>,
    /// `hits[i * n + c]`: number of requests among `0..i` containing `c`.
    hits: Vec<u32>,
}

impl<'a> Dp<'a> {
    fn build(seq: &'a RequestSequence) -> Self {
        let n = seq.n;
        let len = seq.len();
        let mut cost = vec![0u64; len * n];
        let mut layer_min = Vec::with_capacity(len);
        let mut hits = vec![0u32; (len + 1) * n];

        for (i, req) in seq.requests.iter().enumerate() {
            let (prev_min, _, _) = if i == 0 { (0, 0, 0) } else { layer_min[i - 1] };
            for c in 0..n {
                let arrive = if i == 0 {
                    u64::from(c != seq.initial_center.0)
                } else {
                    cost[(i - 1) * n + c].min(prev_min + 1)
                };
                cost[i * n + c] = arrive + serve_cost_unchecked(NodeId(c), req);
                hits[(i + 1) * n + c] = hits[i * n + c] + u32::from(req.contains(NodeId(c)));
            }
            layer_min.push(min_two(&cost[i * n..(i + 1) * n]));
        }
        Dp {
            seq,
            n,
            cost,
            layer_min,
            hits,
        }
    }

    fn optimum(&self) -> u64 {
        self.layer_min.last().map_or(0, |m| m.0)
    }

    /// Cheapest prefix `0..=i` whose center at `i` is not `c`.
    fn best_excluding(&self, i: usize, c: usize) -> u64 {
        let (m1, arg, m2) = self.layer_min[i];
        if arg == c {
            m2
        } else {
            m1
        }
    }

    /// Cheapest cost to arrive with `c` at the center right before request
    /// `s`, given that `c` was not central while serving `s - 1`.
    fn phase_entry(&self, s: usize, c: usize) -> u64 {
        if s == 0 {
            u64::from(c != self.seq.initial_center.0)
        } else {
            self.best_excluding(s - 1, c) + 1
        }
    }

    /// Serve cost of requests `start..=end` with `c` at the center.
    fn hold_cost(&self, c: usize, start: usize, end: usize) -> u64 {
        let len = (end - start + 1) as u64;
        let hit = u64::from(self.hits[(end + 1) * self.n + c] - self.hits[start * self.n + c]);
        2 * len - hit
    }

    /// Any optimal trajectory, ties resolved towards staying put and then
    /// towards the smallest id.
    fn any_trajectory(&self) -> Vec<NodeId> {
        let len = self.seq.len();
        if len == 0 {
            return Vec::new();
        }
        let n = self.n;
        let mut traj = vec![NodeId(0); len];
        let mut c = self.layer_min[len - 1].1;
        for i in (0..len).rev() {
            traj[i] = NodeId(c);
            if i == 0 {
                break;
            }
            let arrive = self.cost[i * n + c] - serve_cost_unchecked(NodeId(c), &self.seq.requests[i]);
            if self.cost[(i - 1) * n + c] != arrive {
                c = self.layer_min[i - 1].1;
            }
        }
        traj
    }
}

fn min_two(layer: &[u64]) -> (u64, usize, u64) {
    let mut best = (u64::MAX, 0usize);
    let mut second = u64::MAX;
    for (c, &v) in layer.iter().enumerate() {
        if v < best.0 {
            second = best.0;
            best = (v, c);
        } else if v < second {
            second = v;
        }
    }
    (best.0, best.1, second)
}

/// Minimum total cost over all center trajectories, and one trajectory
/// achieving it. Runs in `O(|σ| n)`.
pub fn opt_cost(seq: &RequestSequence) -> Result<(u64, Vec<NodeId>)> {
    seq.validate()?;
    let dp = Dp::build(seq);
    Ok((dp.optimum(), dp.any_trajectory()))
}

/// The canonical optimum OPT*.
pub fn opt_star(seq: &RequestSequence) -> Result<OptSolution> {
    seq.validate()?;
    let len = seq.len();
    if len == 0 {
        return Ok(OptSolution {
            trajectory: vec![],
            total_cost: 0,
            phases: vec![],
            labels: vec![],
        });
    }
    let dp = Dp::build(seq);
    let n = seq.n;
    let optimum = dp.optimum();

    // Backward pass. `later` holds every admissible pivot of the phase that
    // starts at `end`; each such pivot extends to an optimal suffix whose
    // phase lengths are the lexicographic minimum fixed so far.
    let mut chosen: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    let mut end = len;
    let mut later: Vec<usize> = Vec::new();
    while end > 0 {
        // Required prefix cost up to `end - 1` for a phase pivoted at c.
        // A prefix ending at a center other than some later pivot l costs
        // at least best_excluding(end - 1, l) for every such l, so it can
        // only match the largest of them.
        let target: Vec<Option<u64>> = (0..n)
            .map(|c| {
                if later.is_empty() {
                    Some(optimum)
                } else {
                    later
                        .iter()
                        .filter(|&&l| l != c)
                        .map(|&l| dp.best_excluding(end - 1, l))
                        .max()
                }
            })
            .collect();

        let mut found = Vec::new();
        for start in (0..end).rev() {
            found.extend((0..n).filter(|&c| {
                target[c].is_some_and(|t| dp.phase_entry(start, c) + dp.hold_cost(c, start, end - 1) == t)
            }));
            if !found.is_empty() {
                chosen.push((start, end - 1, found.clone()));
                end = start;
                break;
            }
        }
        if found.is_empty() {
            return Err(Error::Invariant(format!(
                "no optimal phase ends at request {}",
                end - 1
            )));
        }
        later = found;
    }
    chosen.reverse();

    // Forward pass: smallest admissible pivot per phase.
    let mut phases = Vec::with_capacity(chosen.len());
    let mut prefix_cost = 0u64;
    for (k, (start, end, pivots)) in chosen.iter().enumerate() {
        let pivot = if k == 0 {
            pivots[0]
        } else {
            let prev = phases.last().map(|p: &Phase| p.pivot.0).unwrap_or_default();
            *pivots
                .iter()
                .find(|&&c| c != prev && dp.best_excluding(start - 1, c) == prefix_cost)
                .ok_or_else(|| Error::Invariant(format!("no compatible pivot for phase at {start}")))?
        };
        prefix_cost = dp.phase_entry(*start, pivot) + dp.hold_cost(pivot, *start, *end);
        phases.push(Phase {
            start: *start,
            end: *end,
            pivot: NodeId(pivot),
        });
    }
    if prefix_cost != optimum {
        return Err(Error::Invariant(format!(
            "OPT* reconstruction cost {prefix_cost} != optimum {optimum}"
        )));
    }

    let trajectory: Vec<NodeId> = phases
        .iter()
        .flat_map(|p| std::iter::repeat_n(p.pivot, p.len()))
        .collect();
    let labels = label_requests(seq, &trajectory)?;
    Ok(OptSolution {
        trajectory,
        total_cost: optimum,
        phases,
        labels,
    })
}

/// Cheap/Expensive label per request of an OPT* trajectory. A migration
/// is charged to the request it precedes; a per-request cost of 3 means
/// the trajectory is not OPT* and is reported as an invariant violation.
pub fn label_requests(seq: &RequestSequence, trajectory: &[NodeId]) -> Result<Vec<Label>> {
    let ledger = replay_trajectory(seq, trajectory)?;
    ledger
        .per_request_costs()
        .into_iter()
        .enumerate()
        .map(|(i, cost)| match cost {
            1 => Ok(Label::Cheap),
            2 => Ok(Label::Expensive),
            _ => Err(Error::Invariant(format!("per-request cost {cost} at request {i}"))),
        })
        .collect()
}

/// Maximal runs of equal center.
pub fn extract_phases(trajectory: &[NodeId]) -> Vec<Phase> {
    let mut phases: Vec<Phase> = Vec::new();
    for (i, &c) in trajectory.iter().enumerate() {
        match phases.last_mut() {
            Some(p) if p.pivot == c => p.end = i,
            _ => phases.push(Phase {
                start: i,
                end: i,
                pivot: c,
            }),
        }
    }
    phases
}

/// Greedy single pass producing the unique `Γ* (E+ Γ+)* E*` split.
pub fn block_decompose(labels: &[Label]) -> BlockDecomposition {
    let prefix_len = labels.iter().take_while(|&&l| l == Label::Cheap).count();
    let mut blocks = Vec::new();
    let mut i = prefix_len;
    let mut suffix_len = 0;
    while i < labels.len() {
        let start = i;
        while i < labels.len() && labels[i] == Label::Expensive {
            i += 1;
        }
        let expensive = i - start;
        let cheap_start = i;
        while i < labels.len() && labels[i] == Label::Cheap {
            i += 1;
        }
        let cheap = i - cheap_start;
        if cheap == 0 {
            suffix_len = expensive;
        } else {
            blocks.push(Block {
                start,
                expensive,
                cheap,
            });
        }
    }
    BlockDecomposition {
        prefix_len,
        blocks,
        suffix_len,
    }
}
