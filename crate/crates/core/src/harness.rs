//! Drives policies over sequences and measures them against the offline
//! optimum, OPT*'s block structure, and the reference algorithm OFF.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{rand_lb_generate, Probability, RandLbParams};
use crate::error::{Error, Result};
use crate::offline::{block_decompose, opt_cost, opt_star, Block, BlockDecomposition, Label};
use crate::policy::{Behavior, CandidateSet, OnlinePolicy, PolicyDecision, PolicyKind};
use crate::star::{serve_cost_unchecked, CostLedger, RequestSequence};

/// z used for one-sided Monte Carlo gates (mean ± z·stderr).
pub const GATE_Z: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyTrace {
    pub policy: String,
    pub decisions: Vec<PolicyDecision>,
    /// Candidate set after each request; empty for policies without one.
    pub candidate_history: Vec<CandidateSet>,
    pub behavior_history: Vec<Behavior>,
    pub ledger: CostLedger,
}

/// Runs a fresh policy over `seq`, applying each decision before serving.
pub fn simulate(policy: &mut dyn OnlinePolicy, seq: &RequestSequence) -> Result<PolicyTrace> {
    seq.validate()?;
    if policy.n() != seq.n || policy.center() != seq.initial_center || policy.served() != 0 {
        return Err(Error::PolicyMismatch(format!(
            "policy at n={} center={} after {} requests, sequence has n={} center={}",
            policy.n(),
            policy.center(),
            policy.served(),
            seq.n,
            seq.initial_center
        )));
    }
    let len = seq.len();
    let mut trace = PolicyTrace {
        policy: policy.name().to_string(),
        decisions: Vec::with_capacity(len),
        candidate_history: Vec::new(),
        behavior_history: Vec::new(),
        ledger: CostLedger::with_capacity(len),
    };
    let mut state = seq.initial_state();
    for (i, req) in seq.requests.iter().enumerate() {
        let decision = policy.on_request(i, *req)?;
        if let Some(to) = decision.migrate_to {
            let (next, cost) = state.migrate(to)?;
            if cost > 0 {
                trace.ledger.record_migration(i, to);
            }
            state = next;
        }
        trace.ledger.record_serve(serve_cost_unchecked(state.center(), req));
        trace.decisions.push(decision);
        if let Some(c) = policy.candidates() {
            trace.candidate_history.push(c.clone());
        }
        if let Some(b) = policy.last_behavior() {
            trace.behavior_history.push(b);
        }
    }
    Ok(trace)
}

/// Total cost only, without recording a trace.
pub fn run_total(policy: &mut dyn OnlinePolicy, seq: &RequestSequence) -> Result<u64> {
    if policy.n() != seq.n || policy.center() != seq.initial_center || policy.served() != 0 {
        return Err(Error::PolicyMismatch(
            "policy does not start at the sequence's configuration".into(),
        ));
    }
    let mut center = seq.initial_center;
    let mut total = 0;
    for (i, req) in seq.requests.iter().enumerate() {
        if let Some(to) = policy.on_request(i, *req)?.migrate_to {
            total += u64::from(to != center);
            center = to;
        }
        total += serve_cost_unchecked(center, req);
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub block: Block,
    pub alg_cost: u64,
    /// 2ε + γ + min(2, γ)
    pub bound: u64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub alg_cost: u64,
    pub opt_cost: u64,
    pub off_cost: Option<u64>,
    /// `None` when the optimum is 0 (empty sequence).
    pub ratio_vs_opt: Option<f64>,
    pub ratio_vs_off: Option<f64>,
    pub labels: Vec<Label>,
    pub decomposition: BlockDecomposition,
    pub per_block: Vec<BlockCheck>,
    /// Requests where Intersection/Union disagrees with Cheap/Expensive.
    /// Empty for policies that do not track a candidate set.
    pub tracking_mismatches: Vec<usize>,
}

impl RatioReport {
    pub fn block_violations(&self) -> usize {
        self.per_block.iter().filter(|b| !b.ok).count()
    }
}

pub fn ratio(num: f64, den: u64) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

/// Block-level accounting of a trace against OPT*. Migrations are charged
/// to the request they precede, as in the labels.
pub fn ratio_report(trace: &PolicyTrace, seq: &RequestSequence, off_cost: Option<u64>) -> Result<RatioReport> {
    if trace.ledger.serve_costs.len() != seq.len() {
        return Err(Error::LengthMismatch {
            expected: seq.len(),
            got: trace.ledger.serve_costs.len(),
        });
    }
    let sol = opt_star(seq)?;
    let decomposition = block_decompose(&sol.labels);
    let per_request = trace.ledger.per_request_costs();
    let per_block = decomposition
        .blocks
        .iter()
        .map(|&block| {
            let alg_cost: u64 = per_request[block.range()].iter().sum();
            let bound = block.det_bound();
            BlockCheck {
                block,
                alg_cost,
                bound,
                ok: alg_cost <= bound,
            }
        })
        .collect();
    let tracking_mismatches = tracking_mismatches(&trace.behavior_history, &sol.labels);
    let alg = trace.ledger.total;
    Ok(RatioReport {
        alg_cost: alg,
        opt_cost: sol.total_cost,
        off_cost,
        ratio_vs_opt: ratio(alg as f64, sol.total_cost),
        ratio_vs_off: off_cost.and_then(|off| ratio(alg as f64, off)),
        labels: sol.labels,
        decomposition,
        per_block,
        tracking_mismatches,
    })
}

/// Positions where Intersection does not coincide with Cheap.
pub fn tracking_mismatches(behaviors: &[Behavior], labels: &[Label]) -> Vec<usize> {
    if behaviors.is_empty() {
        return Vec::new();
    }
    behaviors
        .iter()
        .zip(labels)
        .enumerate()
        .filter(|(_, (b, l))| (**b == Behavior::Intersection) != (**l == Label::Cheap))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    Simple,
    Ambiguous,
}

/// Simple iff the candidate set has one node right after the block's last
/// request, ambiguous iff it has two.
pub fn classify_blocks(trace: &PolicyTrace, decomposition: &BlockDecomposition) -> Result<Vec<BlockKind>> {
    decomposition
        .blocks
        .iter()
        .map(|b| {
            let cands = trace
                .candidate_history
                .get(b.end())
                .ok_or_else(|| Error::PolicyMismatch("trace has no candidate history".into()))?;
            match cands.len() {
                1 => Ok(BlockKind::Simple),
                2 => Ok(BlockKind::Ambiguous),
                k => Err(Error::Invariant(format!(
                    "|C| = {k} at end of block starting at {}",
                    b.start
                ))),
            }
        })
        .collect()
}

/// Per-run seed: a SplitMix64 hash of the master seed and run index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub runs: usize,
    pub master_seed: u64,
    pub mean: f64,
    pub stderr: f64,
    pub total_costs: Vec<u64>,
}

impl CostEstimate {
    fn from_costs(master_seed: u64, total_costs: Vec<u64>) -> Self {
        let runs = total_costs.len();
        let sum: u128 = total_costs.iter().map(|&c| u128::from(c)).sum();
        let sum_sq: u128 = total_costs.iter().map(|&c| u128::from(c) * u128::from(c)).sum();
        let mean = sum as f64 / runs as f64;
        let stderr = if runs > 1 {
            let r = runs as u128;
            // sample variance = (r Σx² − (Σx)²) / (r (r − 1)), exact up to the division
            let var = (r * sum_sq - sum * sum) as f64 / (r * (r - 1)) as f64;
            (var / runs as f64).sqrt()
        } else {
            0.0
        };
        CostEstimate {
            runs,
            master_seed,
            mean,
            stderr,
            total_costs,
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.runs as u64).map(|i| derive_seed(self.master_seed, i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

/// Mean and standard error of a policy's total cost over `runs`
/// independent simulations; run `i` uses seed `derive_seed(master_seed, i)`.
pub fn expected_cost<F>(factory: F, seq: &RequestSequence, runs: usize, master_seed: u64) -> Result<CostEstimate>
where
    F: Fn(u64) -> Result<Box<dyn OnlinePolicy>> + Sync,
{
    expected_cost_with(factory, seq, runs, master_seed, Execution::Parallel)
}

pub fn expected_cost_with<F>(
    factory: F,
    seq: &RequestSequence,
    runs: usize,
    master_seed: u64,
    execution: Execution,
) -> Result<CostEstimate>
where
    F: Fn(u64) -> Result<Box<dyn OnlinePolicy>> + Sync,
{
    if runs == 0 {
        return Err(Error::InvalidParam("runs must be at least 1".into()));
    }
    let one = |i: usize| -> Result<u64> {
        let mut policy = factory(derive_seed(master_seed, i as u64))?;
        run_total(policy.as_mut(), seq)
    };
    let costs: Result<Vec<u64>> = match execution {
        Execution::Sequential => (0..runs).map(one).collect(),
        Execution::Parallel => (0..runs).into_par_iter().map(one).collect(),
    };
    Ok(CostEstimate::from_costs(master_seed, costs?))
}

/// Convenience wrapper over [`expected_cost`] for a named policy.
pub fn expected_cost_of(
    kind: PolicyKind,
    seq: &RequestSequence,
    runs: usize,
    master_seed: u64,
) -> Result<CostEstimate> {
    let runs = if kind.is_randomized() { runs } else { 1 };
    expected_cost(
        |seed| kind.build(seq.n, seq.initial_center, seed),
        seq,
        runs,
        master_seed,
    )
}

/// One policy on one sampled sequence of the Yao experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YaoCell {
    pub policy: PolicyKind,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YaoSequence {
    pub index: usize,
    pub seed: u64,
    pub off_cost: u64,
    pub opt_cost: u64,
    pub cells: Vec<YaoCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YaoAggregate {
    pub policy: PolicyKind,
    pub cost_total: f64,
    /// Standard error of `cost_total / sequences`, from the per-sequence
    /// means; randomized policies also include their run noise.
    pub cost_stderr: f64,
    pub ratio_vs_off: f64,
    pub ratio_vs_opt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: Probability,
    pub aggregates: Vec<YaoAggregate>,
    /// Smallest aggregate cost/OFF among the deterministic policies.
    pub lower_bound_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub params: RandLbParams,
    pub sequences: Vec<YaoSequence>,
    pub runs: usize,
    pub off_total: u64,
    pub opt_total: u64,
    pub aggregates: Vec<YaoAggregate>,
    pub lower_bound_ratio: f64,
    pub sweep: Vec<SweepRow>,
}

/// Seed of sampled sequence `index` under master seed `seed`.
pub fn sequence_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

/// Samples `sequences` inputs from the two-pattern distribution and scores
/// every policy against OFF (3 per pair) and against the exact optimum.
/// Randomized policies are averaged over `runs` runs per sequence.
pub fn yao_experiment(
    policies: &[PolicyKind],
    params: &RandLbParams,
    sequences: usize,
    runs: usize,
) -> Result<MonteCarloReport> {
    params.validate()?;
    if sequences == 0 {
        return Err(Error::InvalidParam("need at least one sequence".into()));
    }
    let rows: Result<Vec<YaoSequence>> = (0..sequences)
        .into_par_iter()
        .map(|index| {
            let seed = sequence_seed(params.seed, index);
            let gen = rand_lb_generate(&RandLbParams { seed, ..params.clone() })?;
            let (opt, _) = opt_cost(&gen.seq)?;
            let cells = policies
                .iter()
                .map(|&policy| {
                    let est = expected_cost_with(
                        |s| policy.build(gen.seq.n, gen.seq.initial_center, s),
                        &gen.seq,
                        if policy.is_randomized() { runs } else { 1 },
                        derive_seed(seed, u64::MAX),
                        Execution::Sequential,
                    )?;
                    Ok(YaoCell {
                        policy,
                        mean: est.mean,
                        stderr: est.stderr,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(YaoSequence {
                index,
                seed,
                off_cost: gen.off_cost,
                opt_cost: opt,
                cells,
            })
        })
        .collect();
    let rows = rows?;

    let off_total: u64 = rows.iter().map(|r| r.off_cost).sum();
    let opt_total: u64 = rows.iter().map(|r| r.opt_cost).sum();
    let aggregates: Vec<YaoAggregate> = policies
        .iter()
        .enumerate()
        .map(|(k, &policy)| {
            let means: Vec<f64> = rows.iter().map(|r| r.cells[k].mean).collect();
            let cost_total: f64 = means.iter().sum();
            let m = means.len() as f64;
            let avg = cost_total / m;
            let cost_stderr = if means.len() > 1 {
                (means.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
            } else {
                0.0
            };
            YaoAggregate {
                policy,
                cost_total,
                cost_stderr,
                ratio_vs_off: cost_total / off_total as f64,
                ratio_vs_opt: cost_total / opt_total as f64,
            }
        })
        .collect();
    let lower_bound_ratio = lower_bound(&aggregates);
    Ok(MonteCarloReport {
        params: params.clone(),
        sequences: rows,
        runs,
        off_total,
        opt_total,
        aggregates,
        lower_bound_ratio,
        sweep: Vec::new(),
    })
}

fn lower_bound(aggregates: &[YaoAggregate]) -> f64 {
    aggregates
        .iter()
        .filter(|a| !a.policy.is_randomized())
        .map(|a| a.ratio_vs_off)
        .fold(f64::INFINITY, f64::min)
}

/// Reruns the experiment for every `p` in `ps` with the same seeds.
pub fn yao_sweep(
    policies: &[PolicyKind],
    params: &RandLbParams,
    ps: &[Probability],
    sequences: usize,
    runs: usize,
) -> Result<Vec<SweepRow>> {
    ps.iter()
        .map(|p| {
            let report = yao_experiment(
                policies,
                &RandLbParams {
                    p: p.clone(),
                    ..params.clone()
                },
                sequences,
                runs,
            )?;
            Ok(SweepRow {
                p: p.clone(),
                lower_bound_ratio: report.lower_bound_ratio,
                aggregates: report.aggregates,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{det_pivot_tracking, rand_pivot_tracking, StaticPolicy};
    use crate::star::{sample, NodeId};

    #[test]
    fn simulate_sample_det() {
        let seq = sample::sequence();
        let mut p = det_pivot_tracking(7, NodeId(sample::W)).unwrap();
        let trace = simulate(&mut p, &seq).unwrap();
        assert_eq!(trace.ledger.total, 7);
        assert!(trace.ledger.is_consistent());
        let sizes: Vec<usize> = trace.candidate_history.iter().map(CandidateSet::len).collect();
        assert_eq!(sizes, vec![3, 1, 3, 1]);
    }

    #[test]
    fn run_total_matches_simulate() {
        let seq = RequestSequence::from_pairs(5, 3, &[(0, 1), (0, 2), (1, 4), (2, 4), (0, 4)]).unwrap();
        for seed in 0..20 {
            let mut a = rand_pivot_tracking(5, NodeId(3), seed).unwrap();
            let mut b = rand_pivot_tracking(5, NodeId(3), seed).unwrap();
            assert_eq!(
                run_total(&mut a, &seq).unwrap(),
                simulate(&mut b, &seq).unwrap().ledger.total
            );
        }
    }

    #[test]
    fn simulate_static_empty() {
        let seq = RequestSequence::new(3, NodeId(0), vec![]).unwrap();
        let mut p = StaticPolicy::new(3, NodeId(0)).unwrap();
        assert_eq!(simulate(&mut p, &seq).unwrap().ledger.total, 0);
    }

    #[test]
    fn simulate_rejects_mismatched_policy() {
        let seq = sample::sequence();
        let mut p = det_pivot_tracking(7, NodeId(1)).unwrap();
        assert!(matches!(simulate(&mut p, &seq), Err(Error::PolicyMismatch(_))));
        let mut p = det_pivot_tracking(8, NodeId(0)).unwrap();
        assert!(matches!(simulate(&mut p, &seq), Err(Error::PolicyMismatch(_))));
    }

    #[test]
    fn ratio_report_sample() {
        let seq = sample::sequence();
        let mut p = det_pivot_tracking(7, NodeId(sample::W)).unwrap();
        let trace = simulate(&mut p, &seq).unwrap();
        let r = ratio_report(&trace, &seq, None).unwrap();
        assert_eq!(r.ratio_vs_opt, Some(7.0 / 6.0));
        let costs: Vec<(usize, usize, u64, u64)> = r
            .per_block
            .iter()
            .map(|b| (b.block.expensive, b.block.cheap, b.alg_cost, b.bound))
            .collect();
        assert_eq!(costs, vec![(1, 1, 3, 4), (1, 1, 4, 4)]);
        assert!(r.tracking_mismatches.is_empty());
        assert_eq!(
            classify_blocks(&trace, &r.decomposition).unwrap(),
            vec![BlockKind::Simple; 2]
        );
    }

    #[test]
    fn ratio_report_prefix_only_and_empty() {
        let seq = RequestSequence::from_pairs(3, 0, &[(0, 1)]).unwrap();
        let mut p = det_pivot_tracking(3, NodeId(0)).unwrap();
        let trace = simulate(&mut p, &seq).unwrap();
        assert_eq!(ratio_report(&trace, &seq, None).unwrap().ratio_vs_opt, Some(1.0));

        let empty = RequestSequence::new(3, NodeId(0), vec![]).unwrap();
        let mut p = det_pivot_tracking(3, NodeId(0)).unwrap();
        let trace = simulate(&mut p, &empty).unwrap();
        assert_eq!(ratio_report(&trace, &empty, Some(0)).unwrap().ratio_vs_opt, None);
    }

    #[test]
    fn classify_ambiguous_and_simple() {
        // from center 3: {0,1} union, then {0,1} again leaves C = {0,1}
        let seq = RequestSequence::from_pairs(4, 3, &[(0, 1), (0, 1)]).unwrap();
        let mut p = det_pivot_tracking(4, NodeId(3)).unwrap();
        let trace = simulate(&mut p, &seq).unwrap();
        let r = ratio_report(&trace, &seq, None).unwrap();
        assert_eq!(
            classify_blocks(&trace, &r.decomposition).unwrap(),
            vec![BlockKind::Ambiguous]
        );

        // {a,b},{a,c} from d
        let seq = RequestSequence::from_pairs(4, 3, &[(0, 1), (0, 2)]).unwrap();
        let mut p = det_pivot_tracking(4, NodeId(3)).unwrap();
        let trace = simulate(&mut p, &seq).unwrap();
        let r = ratio_report(&trace, &seq, None).unwrap();
        assert_eq!(
            classify_blocks(&trace, &r.decomposition).unwrap(),
            vec![BlockKind::Simple]
        );
    }

    #[test]
    fn classify_needs_history() {
        let seq = RequestSequence::from_pairs(4, 3, &[(0, 1), (0, 1)]).unwrap();
        let mut p = StaticPolicy::new(4, NodeId(3)).unwrap();
        let trace = simulate(&mut p, &seq).unwrap();
        let d = block_decompose(&opt_star(&seq).unwrap().labels);
        assert!(classify_blocks(&trace, &d).is_err());
    }

    #[test]
    fn expected_cost_deterministic_policy() {
        let seq = sample::sequence();
        let est = expected_cost(|_| PolicyKind::DetPivot.build(7, NodeId(sample::W), 0), &seq, 20, 1).unwrap();
        assert_eq!((est.mean, est.stderr), (7.0, 0.0));
    }

    #[test]
    fn expected_cost_union_only() {
        let seq = RequestSequence::from_pairs(4, 3, &[(0, 1)]).unwrap();
        let est = expected_cost(|s| Ok(Box::new(rand_pivot_tracking(4, NodeId(3), s)?)), &seq, 500, 9).unwrap();
        assert_eq!((est.mean, est.stderr), (2.0, 0.0));
    }

    #[test]
    fn expected_cost_is_execution_independent() {
        let seq = RequestSequence::from_pairs(5, 3, &[(0, 1), (0, 2), (1, 4), (2, 4), (0, 4)]).unwrap();
        let f = |s| PolicyKind::RandPivot.build(5, NodeId(3), s);
        let par = expected_cost_with(f, &seq, 300, 5, Execution::Parallel).unwrap();
        let seqn = expected_cost_with(f, &seq, 300, 5, Execution::Sequential).unwrap();
        assert_eq!(par, seqn);
        assert!(expected_cost(f, &seq, 0, 5).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn small_yao_run() {
        let params = RandLbParams {
            pairs: 30,
            seed: 5,
            ..Default::default()
        };
        let r = yao_experiment(&PolicyKind::ALL, &params, 4, 5).unwrap();
        assert_eq!(r.off_total, 4 * 90);
        assert!(r.sequences.iter().all(|s| s.opt_cost <= s.off_cost));
        assert_eq!(r.aggregates.len(), 5);
        assert!(r.lower_bound_ratio.is_finite());
        assert_eq!(r, yao_experiment(&PolicyKind::ALL, &params, 4, 5).unwrap());
    }
}
