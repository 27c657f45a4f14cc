//! Request sources: the adaptive three-node adversary, the two-pattern
//! random distribution behind the randomized lower bound, and plain
//! stochastic workloads.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::policy::OnlinePolicy;
use crate::star::{serve_cost_unchecked, CostLedger, NodeId, Request, RequestSequence, StarState};

/// A probability in `[0, 1]`, parsed from a decimal (`0.6667`) or a
/// fraction (`2/3`). The source text is kept for metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Probability {
    value: f64,
    text: String,
}

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidParam(format!("probability {value} outside [0, 1]")));
        }
        Ok(Probability {
            value,
            text: value.to_string(),
        })
    }

    pub fn two_thirds() -> Self {
        "2/3".parse().expect("valid fraction")
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

impl FromStr for Probability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParam(format!("cannot parse probability `{s}`"));
        let value = match s.split_once('/') {
            Some((num, den)) => {
                let num: f64 = num.trim().parse().map_err(|_| bad())?;
                let den: f64 = den.trim().parse().map_err(|_| bad())?;
                if den == 0.0 {
                    return Err(bad());
                }
                num / den
            }
            None => s.parse().map_err(|_| bad())?,
        };
        let mut p = Probability::new(value)?;
        p.text = s.to_string();
        Ok(p)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Probability {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandLbParams {
    pub n: usize,
    /// Probability that a pair (other than the first) follows pattern 1.
    pub p: Probability,
    pub pairs: usize,
    pub seed: u64,
    pub initial_center: NodeId,
    /// Keep the initial center out of the first pair entirely. When unset
    /// it may appear in the first pair, but never as its pivot.
    pub exclude_initial_center: bool,
}

impl Default for RandLbParams {
    fn default() -> Self {
        RandLbParams {
            n: 10,
            p: Probability::two_thirds(),
            pairs: 300,
            seed: 0,
            initial_center: NodeId(0),
            exclude_initial_center: false,
        }
    }
}

impl RandLbParams {
    pub const MIN_NODES: usize = 7;

    pub fn validate(&self) -> Result<()> {
        if self.n < Self::MIN_NODES {
            return Err(Error::TooFewNodes {
                n: self.n,
                min: Self::MIN_NODES,
            });
        }
        self.initial_center.check(self.n)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    /// `{a, x1}, {a, x2}` with fresh `a`, `x1`, `x2`; pivot `a`.
    P1,
    /// `{x1, x2}, {a, x3}` with fresh `x`s and `a` the previous pivot.
    P2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSequence {
    pub seq: RequestSequence,
    pub pivots: Vec<NodeId>,
    pub patterns: Vec<Pattern>,
    /// Cost of the reference algorithm that moves each pair's pivot to the
    /// center before the pair's first request: 3 per pair.
    pub off_cost: u64,
}

impl GeneratedSequence {
    /// Decision trace of the reference algorithm, for replay.
    pub fn off_decisions(&self) -> Vec<Option<NodeId>> {
        let mut d = vec![None; self.seq.len()];
        for (k, &pivot) in self.pivots.iter().enumerate() {
            d[2 * k] = Some(pivot);
        }
        d
    }
}

/// Draws `k` distinct entries of `pool` uniformly, in draw order.
fn draw_distinct(rng: &mut ChaCha8Rng, pool: &mut [NodeId], k: usize) -> Vec<NodeId> {
    debug_assert!(k <= pool.len());
    for i in 0..k {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool[..k].to_vec()
}

/// Unordered pair with a uniformly random endpoint order.
fn oriented(rng: &mut ChaCha8Rng, a: NodeId, b: NodeId) -> Request {
    if rng.gen_bool(0.5) {
        Request { u: a, v: b }
    } else {
        Request { u: b, v: a }
    }
}

/// Samples the two-pattern distribution.
///
/// Fresh nodes of a pair avoid every node of the previous pair; older
/// pairs are not excluded. Endpoint order inside each request is uniform,
/// so the pivot cannot be read off the request layout.
pub fn rand_lb_generate(params: &RandLbParams) -> Result<GeneratedSequence> {
    params.validate()?;
    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut requests = Vec::with_capacity(2 * params.pairs);
    let mut pivots = Vec::with_capacity(params.pairs);
    let mut patterns = Vec::with_capacity(params.pairs);
    let mut previous: Vec<NodeId> = Vec::new();

    for k in 0..params.pairs {
        let pattern = if k == 0 || rng.gen_bool(params.p.value()) {
            Pattern::P1
        } else {
            Pattern::P2
        };
        let mut pool: Vec<NodeId> = (0..n).map(NodeId).filter(|x| !previous.contains(x)).collect();
        if k == 0 && params.exclude_initial_center {
            pool.retain(|&x| x != params.initial_center);
        }

        let (first, second, pivot) = match pattern {
            Pattern::P1 => {
                let mut picked = draw_distinct(&mut rng, &mut pool, 3);
                if k == 0 && picked[0] == params.initial_center {
                    // a pivot already at the center would let OFF save the
                    // first migration; swap roles with x1
                    picked.swap(0, 1);
                }
                let (a, x1, x2) = (picked[0], picked[1], picked[2]);
                (oriented(&mut rng, a, x1), oriented(&mut rng, a, x2), a)
            }
            Pattern::P2 => {
                let a = *pivots.last().expect("pattern 2 never starts a sequence");
                let picked = draw_distinct(&mut rng, &mut pool, 3);
                (
                    oriented(&mut rng, picked[0], picked[1]),
                    oriented(&mut rng, a, picked[2]),
                    a,
                )
            }
        };
        previous = vec![first.u, first.v, second.u, second.v];
        previous.sort();
        previous.dedup();
        requests.push(first);
        requests.push(second);
        pivots.push(pivot);
        patterns.push(pattern);
    }

    let seq = RequestSequence::new(n, params.initial_center, requests)?;
    Ok(GeneratedSequence {
        seq,
        pivots,
        patterns,
        off_cost: 3 * params.pairs as u64,
    })
}

/// Transcript of the adaptive adversary together with the driven policy's
/// costs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryRun {
    pub seq: RequestSequence,
    pub ledger: CostLedger,
}

/// Always requests the two of `nodes` that are not at the policy's center,
/// so every request costs the policy exactly 2.
pub fn det_adversary_run(policy: &mut dyn OnlinePolicy, length: usize, nodes: [NodeId; 3]) -> Result<AdversaryRun> {
    let n = policy.n();
    for x in nodes {
        x.check(n)?;
    }
    if nodes[0] == nodes[1] || nodes[1] == nodes[2] || nodes[0] == nodes[2] {
        return Err(Error::InvalidParam("adversary nodes must be distinct".into()));
    }
    let initial_center = policy.center();
    if !nodes.contains(&initial_center) || policy.served() != 0 {
        return Err(Error::PolicyMismatch(
            "adversary needs a fresh policy centered on one of its nodes".into(),
        ));
    }

    let mut state = StarState::new(n, initial_center)?;
    let mut requests = Vec::with_capacity(length);
    let mut ledger = CostLedger::with_capacity(length);
    for i in 0..length {
        let center = policy.center();
        let mut others = nodes.iter().copied().filter(|&x| x != center);
        let (u, v) = match (others.next(), others.next()) {
            (Some(u), Some(v)) => (u, v),
            _ => return Err(Error::Invariant("policy left the adversary's node set".into())),
        };
        let req = Request { u, v };
        let decision = policy.on_request(i, req)?;
        if let Some(to) = decision.migrate_to {
            let (next, cost) = state.migrate(to)?;
            if cost > 0 {
                ledger.record_migration(i, to);
            }
            state = next;
        }
        ledger.record_serve(serve_cost_unchecked(state.center(), &req));
        requests.push(req);
    }
    let seq = RequestSequence::new(n, initial_center, requests)?;
    Ok(AdversaryRun { seq, ledger })
}

/// Most requested node of `seq`, smallest id on ties.
pub fn most_requested(seq: &RequestSequence) -> Option<NodeId> {
    let mut counts = vec![0usize; seq.n];
    for r in &seq.requests {
        counts[r.u.0] += 1;
        counts[r.v.0] += 1;
    }
    let best = counts.iter().copied().max().filter(|&m| m > 0)?;
    counts.iter().position(|&c| c == best).map(NodeId)
}

/// Cost of moving the most requested node to the center once, before the
/// first request, and never moving again. 0 on an empty sequence.
pub fn static_best_off(seq: &RequestSequence) -> u64 {
    let Some(hub) = most_requested(seq) else {
        return 0;
    };
    let migration = u64::from(hub != seq.initial_center);
    migration + seq.requests.iter().map(|r| serve_cost_unchecked(hub, r)).sum::<u64>()
}

/// Uniform random unordered pairs of distinct nodes, initial center 0.
pub fn uniform_generate(n: usize, length: usize, seed: u64) -> Result<RequestSequence> {
    if n < 2 {
        return Err(Error::TooFewNodes { n, min: 2 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let requests = (0..length)
        .map(|_| {
            let u = rng.gen_range(0..n);
            let mut v = rng.gen_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            Request::new(u, v)
        })
        .collect();
    RequestSequence::new(n, NodeId(0), requests)
}

/// Hot node used by [`hotspot_generate`].
pub fn hotspot_node(n: usize) -> NodeId {
    NodeId(n - 1)
}

/// Each request contains the hot node `n - 1` with probability
/// `hot_fraction` (partner uniform among the others); otherwise it is a
/// uniform pair of the remaining nodes. Initial center 0.
pub fn hotspot_generate(n: usize, length: usize, hot_fraction: f64, seed: u64) -> Result<RequestSequence> {
    if n < 2 {
        return Err(Error::TooFewNodes { n, min: 2 });
    }
    if !(0.0..=1.0).contains(&hot_fraction) {
        return Err(Error::InvalidParam(format!(
            "hot_fraction {hot_fraction} outside [0, 1]"
        )));
    }
    if n == 2 && hot_fraction < 1.0 {
        // only one pair exists; it always contains the hot node
        return uniform_generate(n, length, seed);
    }
    let hot = hotspot_node(n).0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let requests = (0..length)
        .map(|_| {
            if rng.gen_bool(hot_fraction) {
                let partner = rng.gen_range(0..n - 1);
                if rng.gen_bool(0.5) {
                    Request::new(hot, partner)
                } else {
                    Request::new(partner, hot)
                }
            } else {
                // uniform pair over 0..n-1, which excludes `hot`
                let u = rng.gen_range(0..n - 1);
                let mut v = rng.gen_range(0..n - 2);
                if v >= u {
                    v += 1;
                }
                Request::new(u, v)
            }
        })
        .collect();
    RequestSequence::new(n, NodeId(0), requests)
}
