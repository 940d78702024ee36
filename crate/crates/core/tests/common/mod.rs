//! Independent oracles shared by the integration tests. Each one computes its
//! answer the slow, obvious way and shares no code with the library paths it checks.

#![allow(dead_code)]

use std::collections::VecDeque;

use leaps::signal::SignalVocabulary;
use leaps::world::{HouseContext, ObjectPlacement, Room};

pub fn vocab(k: usize, k_objects: usize) -> SignalVocabulary {
    SignalVocabulary::new(
        (0..k).map(|i| format!("r{i}")).collect(),
        "none".into(),
        (0..k_objects).map(|o| format!("o{o}")).collect(),
    )
    .unwrap()
}

pub fn house(
    k: usize,
    k_objects: usize,
    types: &[Option<usize>],
    edges: &[(usize, usize)],
    objects: &[(usize, usize)],
) -> HouseContext {
    let rooms = types
        .iter()
        .enumerate()
        .map(|(id, &room_type)| Room {
            id,
            room_type,
            extent: 4.0,
        })
        .collect();
    let objects = objects.iter().map(|&(object, room)| ObjectPlacement { object, room }).collect();
    HouseContext::new(k, k_objects, rooms, edges.to_vec(), objects, (0..types.len()).collect()).unwrap()
}

pub fn path_house(k: usize, types: &[Option<usize>]) -> HouseContext {
    let edges: Vec<(usize, usize)> = (1..types.len()).map(|i| (i - 1, i)).collect();
    house(k, 0, types, &edges, &[])
}

/// Marginal posteriors of every edge by summing the full joint over all
/// `2^E` assignments of the latent edge variables.
pub fn joint_posteriors(priors: &[f64], obs: &[Vec<bool>], o0: f64, o1: f64) -> Vec<f64> {
    let e = priors.len();
    let mut on = vec![0.0; e];
    let mut total = 0.0;
    for mask in 0u32..1 << e {
        let mut p = 1.0;
        for k in 0..e {
            let z = mask >> k & 1 == 1;
            p *= if z { priors[k] } else { 1.0 - priors[k] };
            for &y in &obs[k] {
                // o0 = P(y=1 | z=0), o1 = P(y=0 | z=1)
                p *= match (z, y) {
                    (true, true) => 1.0 - o1,
                    (true, false) => o1,
                    (false, true) => o0,
                    (false, false) => 1.0 - o0,
                };
            }
        }
        total += p;
        for (k, slot) in on.iter_mut().enumerate() {
            if mask >> k & 1 == 1 {
                *slot += p;
            }
        }
    }
    on.into_iter().map(|x| x / total).collect()
}

/// Best simple path from any source to `goal` by exhaustive search: maximum
/// product, then fewer edges, then lexicographically smaller path.
pub fn brute_best_path(n: usize, belief: &dyn Fn(usize, usize) -> f64, sources: &[usize], goal: usize) -> (Vec<usize>, f64) {
    fn better(a: &(Vec<usize>, f64), b: &(Vec<usize>, f64)) -> bool {
        let (ca, cb) = (-a.1.ln(), -b.1.ln());
        let tol = 1e-12 * (1.0 + ca.max(cb));
        if ca < cb - tol {
            return true;
        }
        if ca > cb + tol {
            return false;
        }
        (a.0.len(), &a.0) < (b.0.len(), &b.0)
    }
    fn dfs(
        n: usize,
        belief: &dyn Fn(usize, usize) -> f64,
        goal: usize,
        path: &mut Vec<usize>,
        score: f64,
        best: &mut Option<(Vec<usize>, f64)>,
    ) {
        let u = *path.last().unwrap();
        if u == goal {
            let cand = (path.clone(), score);
            if best.as_ref().is_none_or(|b| better(&cand, b)) {
                *best = Some(cand);
            }
            return;
        }
        for v in 0..n {
            if !path.contains(&v) {
                path.push(v);
                dfs(n, belief, goal, path, score * belief(u, v), best);
                path.pop();
            }
        }
    }
    let mut best = None;
    for &s in sources {
        dfs(n, belief, goal, &mut vec![s], 1.0, &mut best);
    }
    best.unwrap()
}

/// Probability that a uniform random walk of `moves` moves from `start`
/// visits a room whose signal is `target`, by propagating the distribution
/// with target rooms made absorbing.
pub fn hit_probability(h: &HouseContext, start: usize, target: usize, moves: usize) -> f64 {
    let n = h.num_rooms();
    let hit = |r: usize| h.room_signal(r) == target;
    if hit(start) {
        return 1.0;
    }
    let mut dist = vec![0.0; n];
    dist[start] = 1.0;
    let mut absorbed = 0.0;
    for _ in 0..moves {
        let mut next = vec![0.0; n];
        for u in 0..n {
            if dist[u] == 0.0 {
                continue;
            }
            let nb = h.neighbors(u);
            if nb.is_empty() {
                next[u] += dist[u];
                continue;
            }
            for &v in nb {
                let mass = dist[u] / nb.len() as f64;
                if hit(v) {
                    absorbed += mass;
                } else {
                    next[v] += mass;
                }
            }
        }
        dist = next;
    }
    absorbed
}

/// Hop count from `start` to the nearest room satisfying `goal`.
pub fn bfs_distance(h: &HouseContext, start: usize, goal: usize) -> Option<usize> {
    let mut seen = vec![false; h.num_rooms()];
    let mut queue = VecDeque::from([(start, 0)]);
    seen[start] = true;
    while let Some((u, d)) = queue.pop_front() {
        if h.satisfies(u, goal) {
            return Some(d);
        }
        for &v in h.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back((v, d + 1));
            }
        }
    }
    None
}
