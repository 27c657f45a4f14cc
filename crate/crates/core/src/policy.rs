//! Online policies.
//!
//! A policy sees requests one at a time, in order, and answers with an
//! optional migration to apply before the request is served. It never sees
//! future requests or any offline information.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::star::{NodeId, Request, StarState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub migrate_to: Option<NodeId>,
}

impl PolicyDecision {
    pub const STAY: PolicyDecision = PolicyDecision { migrate_to: None };

    pub fn to(node: NodeId) -> Self {
        PolicyDecision { migrate_to: Some(node) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Behavior {
    Intersection,
    Union,
}

/// PivotTracking's candidate set: nodes OPT* may currently hold at the center.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateSet {
    /// Sorted, nonempty.
    members: Vec<NodeId>,
}

impl CandidateSet {
    pub fn singleton(x: NodeId) -> Self {
        CandidateSet { members: vec![x] }
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: NodeId) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    /// `C ∩ {u, v}`, or `None` when empty.
    pub fn intersect(&self, req: &Request) -> Option<CandidateSet> {
        let members: Vec<NodeId> = self.members.iter().copied().filter(|&x| req.contains(x)).collect();
        (!members.is_empty()).then_some(CandidateSet { members })
    }

    pub fn union(&self, req: &Request) -> CandidateSet {
        let mut members = self.members.clone();
        for x in req.endpoints() {
            if let Err(pos) = members.binary_search(&x) {
                members.insert(pos, x);
            }
        }
        CandidateSet { members }
    }
}

impl fmt::Display for CandidateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.members.iter().map(|x| x.to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

pub trait OnlinePolicy: Send {
    fn name(&self) -> &'static str;

    fn n(&self) -> usize;

    /// Center the policy believes it has, i.e. after its last decision.
    fn center(&self) -> NodeId;

    /// Number of requests handled so far.
    fn served(&self) -> usize;

    /// Handles request number `index`. Requests must arrive in order,
    /// starting from 0.
    fn on_request(&mut self, index: usize, req: Request) -> Result<PolicyDecision>;

    fn candidates(&self) -> Option<&CandidateSet> {
        None
    }

    fn last_behavior(&self) -> Option<Behavior> {
        None
    }

    fn is_randomized(&self) -> bool {
        false
    }
}

/// Position and request counter common to every policy.
#[derive(Clone, Debug)]
struct Cursor {
    state: StarState,
    next: usize,
}

impl Cursor {
    fn new(n: usize, initial_center: NodeId) -> Result<Self> {
        Ok(Cursor {
            state: StarState::new(n, initial_center)?,
            next: 0,
        })
    }

    fn accept(&mut self, index: usize, req: &Request) -> Result<()> {
        if index != self.next {
            return Err(Error::OutOfOrder {
                expected: self.next,
                got: index,
            });
        }
        req.validate(self.state.n())?;
        self.next += 1;
        Ok(())
    }

    fn center(&self) -> NodeId {
        self.state.center()
    }

    fn move_to(&mut self, target: NodeId) -> PolicyDecision {
        if target == self.state.center() {
            return PolicyDecision::STAY;
        }
        // target was validated with the request
        self.state = self.state.migrate(target).expect("validated node").0;
        PolicyDecision::to(target)
    }
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
enum TieBreak {
    /// Smallest node id.
    Fixed,
    /// One draw per decision point from the seeded generator.
    Random(ChaCha8Rng),
}

/// Deterministic and randomized PivotTracking.
#[derive(Clone, Debug)]
pub struct PivotTracking {
    cursor: Cursor,
    cands: CandidateSet,
    last: Option<Behavior>,
    tie: TieBreak,
}

impl PivotTracking {
    pub fn deterministic(n: usize, initial_center: NodeId) -> Result<Self> {
        Ok(PivotTracking {
            cursor: Cursor::new(n, initial_center)?,
            cands: CandidateSet::singleton(initial_center),
            last: None,
            tie: TieBreak::Fixed,
        })
    }

    pub fn randomized(n: usize, initial_center: NodeId, seed: u64) -> Result<Self> {
        Ok(PivotTracking {
            cursor: Cursor::new(n, initial_center)?,
            cands: CandidateSet::singleton(initial_center),
            last: None,
            tie: TieBreak::Random(ChaCha8Rng::seed_from_u64(seed)),
        })
    }
}

impl OnlinePolicy for PivotTracking {
    fn name(&self) -> &'static str {
        match self.tie {
            TieBreak::Fixed => PolicyKind::DetPivot.as_str(),
            TieBreak::Random(_) => PolicyKind::RandPivot.as_str(),
        }
    }

    fn n(&self) -> usize {
        self.cursor.state.n()
    }

    fn center(&self) -> NodeId {
        self.cursor.center()
    }

    fn served(&self) -> usize {
        self.cursor.next
    }

    fn on_request(&mut self, index: usize, req: Request) -> Result<PolicyDecision> {
        self.cursor.accept(index, &req)?;
        if let Some(common) = self.cands.intersect(&req) {
            self.cands = common;
            self.last = Some(Behavior::Intersection);
            if self.cands.contains(self.cursor.center()) {
                return Ok(PolicyDecision::STAY);
            }
            let members = self.cands.members();
            let pick = match &mut self.tie {
                TieBreak::Fixed => members[0],
                TieBreak::Random(rng) if members.len() > 1 => members[rng.gen_range(0..members.len())],
                TieBreak::Random(_) => members[0],
            };
            return Ok(self.cursor.move_to(pick));
        }

        self.cands = self.cands.union(&req);
        self.last = Some(Behavior::Union);
        match &mut self.tie {
            TieBreak::Fixed => Ok(PolicyDecision::STAY),
            TieBreak::Random(rng) => Ok(match rng.gen_range(0..3u8) {
                0 => PolicyDecision::STAY,
                1 => self.cursor.move_to(req.u),
                _ => self.cursor.move_to(req.v),
            }),
        }
    }

    fn candidates(&self) -> Option<&CandidateSet> {
        Some(&self.cands)
    }

    fn last_behavior(&self) -> Option<Behavior> {
        self.last
    }

    fn is_randomized(&self) -> bool {
        matches!(self.tie, TieBreak::Random(_))
    }
}

pub fn det_pivot_tracking(n: usize, initial_center: NodeId) -> Result<PivotTracking> {
    PivotTracking::deterministic(n, initial_center)
}

pub fn rand_pivot_tracking(n: usize, initial_center: NodeId, seed: u64) -> Result<PivotTracking> {
    PivotTracking::randomized(n, initial_center, seed)
}

/// Never migrates.
#[derive(Clone, Debug)]
pub struct StaticPolicy {
    cursor: Cursor,
}

impl StaticPolicy {
    pub fn new(n: usize, initial_center: NodeId) -> Result<Self> {
        Ok(StaticPolicy {
            cursor: Cursor::new(n, initial_center)?,
        })
    }
}

impl OnlinePolicy for StaticPolicy {
    fn name(&self) -> &'static str {
        PolicyKind::Static.as_str()
    }
    fn n(&self) -> usize {
        self.cursor.state.n()
    }
    fn center(&self) -> NodeId {
        self.cursor.center()
    }
    fn served(&self) -> usize {
        self.cursor.next
    }
    fn on_request(&mut self, index: usize, req: Request) -> Result<PolicyDecision> {
        self.cursor.accept(index, &req)?;
        Ok(PolicyDecision::STAY)
    }
}

/// Moves the request's first endpoint to the center whenever the center is
/// not requested.
#[derive(Clone, Debug)]
pub struct GreedyMoveFirst {
    cursor: Cursor,
}

impl GreedyMoveFirst {
    pub fn new(n: usize, initial_center: NodeId) -> Result<Self> {
        Ok(GreedyMoveFirst {
            cursor: Cursor::new(n, initial_center)?,
        })
    }
}

impl OnlinePolicy for GreedyMoveFirst {
    fn name(&self) -> &'static str {
        PolicyKind::GreedyFirst.as_str()
    }
    fn n(&self) -> usize {
        self.cursor.state.n()
    }
    fn center(&self) -> NodeId {
        self.cursor.center()
    }
    fn served(&self) -> usize {
        self.cursor.next
    }
    fn on_request(&mut self, index: usize, req: Request) -> Result<PolicyDecision> {
        self.cursor.accept(index, &req)?;
        if req.contains(self.cursor.center()) {
            Ok(PolicyDecision::STAY)
        } else {
            Ok(self.cursor.move_to(req.u))
        }
    }
}

/// Moves the smaller endpoint of every request to the center.
#[derive(Clone, Debug)]
pub struct FollowLast {
    cursor: Cursor,
}

impl FollowLast {
    pub fn new(n: usize, initial_center: NodeId) -> Result<Self> {
        Ok(FollowLast {
            cursor: Cursor::new(n, initial_center)?,
        })
    }
}

impl OnlinePolicy for FollowLast {
    fn name(&self) -> &'static str {
        PolicyKind::FollowLast.as_str()
    }
    fn n(&self) -> usize {
        self.cursor.state.n()
    }
    fn center(&self) -> NodeId {
        self.cursor.center()
    }
    fn served(&self) -> usize {
        self.cursor.next
    }
    fn on_request(&mut self, index: usize, req: Request) -> Result<PolicyDecision> {
        self.cursor.accept(index, &req)?;
        Ok(self.cursor.move_to(req.min_endpoint()))
    }
}

/// Named policy constructors, as used on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    DetPivot,
    RandPivot,
    Static,
    GreedyFirst,
    FollowLast,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::DetPivot,
        PolicyKind::RandPivot,
        PolicyKind::Static,
        PolicyKind::GreedyFirst,
        PolicyKind::FollowLast,
    ];

    pub const DETERMINISTIC: [PolicyKind; 4] = [
        PolicyKind::DetPivot,
        PolicyKind::Static,
        PolicyKind::GreedyFirst,
        PolicyKind::FollowLast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::DetPivot => "det-pt",
            PolicyKind::RandPivot => "rand-pt",
            PolicyKind::Static => "static",
            PolicyKind::GreedyFirst => "greedy-first",
            PolicyKind::FollowLast => "follow-last",
        }
    }

    pub fn is_randomized(self) -> bool {
        self == PolicyKind::RandPivot
    }

    /// `seed` is ignored by deterministic policies.
    pub fn build(self, n: usize, initial_center: NodeId, seed: u64) -> Result<Box<dyn OnlinePolicy>> {
        Ok(match self {
            PolicyKind::DetPivot => Box::new(PivotTracking::deterministic(n, initial_center)?),
            PolicyKind::RandPivot => Box::new(PivotTracking::randomized(n, initial_center, seed)?),
            PolicyKind::Static => Box::new(StaticPolicy::new(n, initial_center)?),
            PolicyKind::GreedyFirst => Box::new(GreedyMoveFirst::new(n, initial_center)?),
            PolicyKind::FollowLast => Box::new(FollowLast::new(n, initial_center)?),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown policy `{s}`")))
    }
}
