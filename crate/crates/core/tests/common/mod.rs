#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starembed::{NodeId, Request, RequestSequence};

/// Random sequences with `n` in `2..=max_n`, length in `0..=max_len` and a
/// random initial center.
pub fn random_corpus(count: usize, max_n: usize, max_len: usize, seed: u64) -> Vec<RequestSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_sequence(&mut rng, max_n, max_len)).collect()
}

pub fn random_sequence(rng: &mut impl Rng, max_n: usize, max_len: usize) -> RequestSequence {
    let n = rng.gen_range(2..=max_n);
    let len = rng.gen_range(0..=max_len);
    let requests = (0..len)
        .map(|_| {
            let u = rng.gen_range(0..n);
            let v = (u + rng.gen_range(1..n)) % n;
            Request::new(u, v)
        })
        .collect();
    RequestSequence::new(n, NodeId(rng.gen_range(0..n)), requests).unwrap()
}

/// Every pair `{u, v}` with `u < v` on `n` nodes.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect()
}

/// All sequences of length `len` over the pairs of `n` nodes, as index
/// vectors in lexicographic order.
pub fn for_each_sequence(n: usize, len: usize, mut f: impl FnMut(&[(usize, usize)])) {
    let pairs = all_pairs(n);
    let mut idx = vec![0usize; len];
    let mut buf = vec![(0, 0); len];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = pairs[i];
        }
        f(&buf);
        let mut k = len;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < pairs.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Straight-line deterministic PivotTracking written against plain sets,
/// kept separate from the library implementation. Returns the center while
/// serving each request and whether each step intersected.
pub fn reference_det_pivot(seq: &RequestSequence) -> (Vec<usize>, Vec<bool>, u64) {
    let mut center = seq.initial_center.0;
    let mut cands = vec![center];
    let mut centers = Vec::new();
    let mut intersected = Vec::new();
    let mut cost = 0;
    for r in &seq.requests {
        let (u, v) = (r.u.0, r.v.0);
        let common: Vec<usize> = cands.iter().copied().filter(|&c| c == u || c == v).collect();
        if common.is_empty() {
            cands.push(u);
            cands.push(v);
            cands.sort_unstable();
            cands.dedup();
            intersected.push(false);
        } else {
            cands = common;
            intersected.push(true);
            if !cands.contains(&center) {
                center = *cands.iter().min().unwrap();
                cost += 1;
            }
        }
        cost += if center == u || center == v { 1 } else { 2 };
        centers.push(center);
    }
    (centers, intersected, cost)
}
