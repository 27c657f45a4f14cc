//! Star host cost model.
//!
//! A star with `n` hosts has one central host at distance 1 from every
//! leaf; two leaves are at distance 2. Since every cost depends only on
//! which guest node sits at the center, a configuration collapses to
//! `(n, center)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense guest node index in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }

    pub fn check(self, n: usize) -> Result<Self> {
        if self.0 < n {
            Ok(self)
        } else {
            Err(Error::NodeOutOfRange { id: self.0, n })
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(id: usize) -> Self {
        NodeId(id)
    }
}

/// A communication request between two distinct guest nodes.
///
/// Endpoint order is kept because some policies (and the randomized union
/// branch) refer to "the first" and "the second" endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Request {
    pub u: NodeId,
    pub v: NodeId,
}

impl Request {
    pub fn new(u: impl Into<NodeId>, v: impl Into<NodeId>) -> Self {
        Request {
            u: u.into(),
            v: v.into(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.u.check(n)?;
        self.v.check(n)?;
        if self.u == self.v {
            return Err(Error::SelfLoop(self.u.0));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, x: NodeId) -> bool {
        self.u == x || self.v == x
    }

    pub fn endpoints(&self) -> [NodeId; 2] {
        [self.u, self.v]
    }

    pub fn min_endpoint(&self) -> NodeId {
        self.u.min(self.v)
    }
}

/// Current configuration of the star: the node count and the central node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarState {
    n: usize,
    center: NodeId,
}

impl StarState {
    pub fn new(n: usize, center: NodeId) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes { n, min: 2 });
        }
        center.check(n)?;
        Ok(StarState { n, center })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn center(&self) -> NodeId {
        self.center
    }

    /// 1 if the center is an endpoint of `req`, else 2.
    pub fn serve_cost(&self, req: &Request) -> Result<u64> {
        req.validate(self.n)?;
        Ok(serve_cost_unchecked(self.center, req))
    }

    /// Moves `new_center` to the center. Returns the migration cost, which
    /// is 0 when `new_center` is already central.
    pub fn migrate(&self, new_center: NodeId) -> Result<(StarState, u64)> {
        new_center.check(self.n)?;
        let cost = u64::from(new_center != self.center);
        Ok((
            StarState {
                n: self.n,
                center: new_center,
            },
            cost,
        ))
    }
}

#[inline]
pub(crate) fn serve_cost_unchecked(center: NodeId, req: &Request) -> u64 {
    if req.contains(center) {
        1
    } else {
        2
    }
}

/// A request sequence together with the instance it runs on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestSequence {
    pub n: usize,
    pub initial_center: NodeId,
    pub requests: Vec<Request>,
}

impl RequestSequence {
    pub fn new(n: usize, initial_center: NodeId, requests: Vec<Request>) -> Result<Self> {
        let seq = RequestSequence {
            n,
            initial_center,
            requests,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Builds a sequence from raw index pairs.
    pub fn from_pairs(n: usize, initial_center: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let requests = pairs.iter().map(|&(u, v)| Request::new(u, v)).collect();
        Self::new(n, NodeId(initial_center), requests)
    }

    pub fn validate(&self) -> Result<()> {
        StarState::new(self.n, self.initial_center)?;
        self.requests.iter().try_for_each(|r| r.validate(self.n))
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn initial_state(&self) -> StarState {
        StarState {
            n: self.n,
            center: self.initial_center,
        }
    }
}

/// Cost accounting of one run over a sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    /// Serve cost per request, each 1 or 2.
    pub serve_costs: Vec<u8>,
    /// `(request index, new center)` for every migration, taken right
    /// before serving that request.
    pub migrations: Vec<(usize, NodeId)>,
    pub total: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(len: usize) -> Self {
        CostLedger {
            serve_costs: Vec::with_capacity(len),
            migrations: Vec::new(),
            total: 0,
        }
    }

    pub fn record_migration(&mut self, index: usize, to: NodeId) {
        self.migrations.push((index, to));
        self.total += 1;
    }

    pub fn record_serve(&mut self, cost: u64) {
        debug_assert!(cost == 1 || cost == 2);
        self.serve_costs.push(cost as u8);
        self.total += cost;
    }

    /// Sum of the parts, independent of the running `total`.
    pub fn recomputed_total(&self) -> u64 {
        self.serve_costs.iter().map(|&c| u64::from(c)).sum::<u64>() + self.migrations.len() as u64
    }

    /// Serve cost plus the migration (if any) taken before each request.
    pub fn per_request_costs(&self) -> Vec<u64> {
        let mut costs: Vec<u64> = self.serve_costs.iter().map(|&c| u64::from(c)).collect();
        for &(i, _) in &self.migrations {
            costs[i] += 1;
        }
        costs
    }

    pub fn is_consistent(&self) -> bool {
        self.total == self.recomputed_total() && self.serve_costs.iter().all(|&c| c == 1 || c == 2)
    }
}

/// Re-executes a decision trace. `decisions[i]`, when present, is the
/// center chosen right before serving request `i`; choosing the current
/// center is free and records nothing.
pub fn replay(seq: &RequestSequence, decisions: &[Option<NodeId>]) -> Result<CostLedger> {
    if decisions.len() != seq.len() {
        return Err(Error::LengthMismatch {
            expected: seq.len(),
            got: decisions.len(),
        });
    }
    seq.validate()?;
    let mut state = seq.initial_state();
    let mut ledger = CostLedger::with_capacity(seq.len());
    for (i, (req, decision)) in seq.requests.iter().zip(decisions).enumerate() {
        if let Some(target) = *decision {
            let (next, cost) = state.migrate(target)?;
            if cost > 0 {
                ledger.record_migration(i, target);
            }
            state = next;
        }
        ledger.record_serve(serve_cost_unchecked(state.center, req));
    }
    Ok(ledger)
}

/// Replays a center trajectory (the center while serving each request).
pub fn replay_trajectory(seq: &RequestSequence, trajectory: &[NodeId]) -> Result<CostLedger> {
    let decisions: Vec<Option<NodeId>> = trajectory.iter().copied().map(Some).collect();
    replay(seq, &decisions)
}
