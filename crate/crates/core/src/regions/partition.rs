//! Multilevel balanced graph partitioning: heavy-edge-matching coarsening,
//! breadth-first region growing on the coarsest graph, and greedy boundary
//! refinement honoring the (1 + epsilon) balance constraint.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Undirected weighted graph at one coarsening level.
struct Level {
    /// adjacency: (neighbor, edge weight), sorted by neighbor
    adj: Vec<Vec<(usize, u64)>>,
    node_w: Vec<u64>,
    /// fine node -> coarse node of the NEXT level (filled when coarsened)
    coarse_map: Vec<usize>,
}

impl Level {
    fn len(&self) -> usize {
        self.node_w.len()
    }

}

/// Balanced k-way partition of an undirected weighted graph given as
/// adjacency lists with node weights. Returns the per-node block assignment
/// and the cut weight. The balance cap is over node weights.
pub fn partition_graph(
    adj: Vec<Vec<(usize, u64)>>,
    node_w: Vec<u64>,
    k: usize,
    epsilon: f64,
    seed: u64,
) -> Result<(Vec<u32>, u64)> {
    let n = adj.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} nodes into {k} non-empty blocks"
        )));
    }
    if epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let total_w: u64 = node_w.iter().sum();
    let cap = balance_cap(total_w, k, epsilon);
    let max_node_w = ((total_w + 4 * k as u64 - 1) / (4 * k as u64)).max(
        node_w.iter().copied().max().unwrap_or(2),
    );

    // coarsening
    let mut levels = vec![Level { adj, node_w, coarse_map: vec![0; n] }];
    let coarsen_target = (16 * k).max(64);
    loop {
        let cur = levels.last().unwrap();
        if cur.len() <= coarsen_target {
            break;
        }
        let (next, map) = coarsen_once(cur, max_node_w, &mut rng);
        let shrunk = next.len() < (cur.len() as f64 * 0.95) as usize;
        levels.last_mut().unwrap().coarse_map = map;
        if !shrunk || next.len() < k {
            break;
        }
        levels.push(next);
    }

    // initial partition on the coarsest level
    let coarsest = levels.last().unwrap();
    let mut assignment = grow_initial(coarsest, k, cap, &mut rng)?;
    refine(coarsest, &mut assignment, k, cap);

    // project back through the levels, refining at each
    for li in (0..levels.len() - 1).rev() {
        let fine = &levels[li];
        let mut fine_assignment = vec![0u32; fine.len()];
        for (v, &c) in fine.coarse_map.iter().enumerate() {
            fine_assignment[v] = assignment[c];
        }
        assignment = fine_assignment;
        refine(fine, &mut assignment, k, cap);
    }

    let finest = &levels[0];
    repair_balance(finest, &mut assignment, k, cap);
    fix_connectivity(finest, &mut assignment, k, cap);
    let cut = cut_weight(finest, &assignment);

    // invariant checks: non-empty blocks within the balance cap
    let mut sizes = vec![0u64; k];
    for (&a, &w) in assignment.iter().zip(&finest.node_w) {
        sizes[a as usize] += w;
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::Numeric("partitioner produced an empty block".into()));
    }
    if let Some(&worst) = sizes.iter().max() {
        if worst > cap {
            return Err(Error::Numeric(format!(
                "partitioner violated the balance cap: {worst} > {cap}"
            )));
        }
    }
    Ok((assignment, cut))
}

/// Largest permitted block weight: `(1 + eps) * total / k`, never below the
/// pigeonhole minimum `ceil(total / k)`.
pub fn balance_cap(total_w: u64, k: usize, epsilon: f64) -> u64 {
    let avg = total_w as f64 / k as f64;
    let cap = ((1.0 + epsilon) * avg).floor() as u64;
    cap.max((total_w + k as u64 - 1) / k as u64)
}

fn coarsen_once(level: &Level, max_node_w: u64, rng: &mut ChaCha8Rng) -> (Level, Vec<usize>) {
    let n = level.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut mate: Vec<Option<usize>> = vec![None; n];
    for &v in &order {
        if mate[v].is_some() {
            continue;
        }
        let mut best: Option<(u64, usize)> = None;
        for &(u, w) in &level.adj[v] {
            if u == v || mate[u].is_some() {
                continue;
            }
            if level.node_w[v] + level.node_w[u] > max_node_w {
                continue;
            }
            let better = match best {
                None => true,
                Some((bw, bu)) => w > bw || (w == bw && u < bu),
            };
            if better {
                best = Some((w, u));
            }
        }
        if let Some((_, u)) = best {
            mate[v] = Some(u);
            mate[u] = Some(v);
        }
    }

    // assign coarse ids in fine index order
    let mut coarse_map = vec![usize::MAX; n];
    let mut next_id = 0usize;
    for v in 0..n {
        if coarse_map[v] != usize::MAX {
            continue;
        }
        coarse_map[v] = next_id;
        if let Some(u) = mate[v] {
            coarse_map[u] = next_id;
        }
        next_id += 1;
    }

    let mut node_w = vec![0u64; next_id];
    for v in 0..n {
        node_w[coarse_map[v]] += level.node_w[v];
    }
    let mut edge_acc: Vec<std::collections::BTreeMap<usize, u64>> =
        vec![std::collections::BTreeMap::new(); next_id];
    for v in 0..n {
        let cv = coarse_map[v];
        for &(u, w) in &level.adj[v] {
            let cu = coarse_map[u];
            if cu != cv {
                *edge_acc[cv].entry(cu).or_insert(0) += w;
            }
        }
    }
    let adj: Vec<Vec<(usize, u64)>> =
        edge_acc.into_iter().map(|m| m.into_iter().collect()).collect();
    (Level { adj, node_w, coarse_map: vec![] }, coarse_map)
}

/// Seeded breadth-first region growing with capacity; leftovers (disconnected
/// components) go to the lightest region.
fn grow_initial(level: &Level, k: usize, cap: u64, rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
    let n = level.len();
    let mut assignment = vec![u32::MAX; n];
    let mut weights = vec![0u64; k];

    // spread seeds: first at random, the rest maximizing hop distance
    let mut seeds = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    seeds.push(first);
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    let mut bfs_from = |starts: &[usize], dist: &mut Vec<usize>| {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        queue.clear();
        for &s in starts {
            dist[s] = 0;
            queue.push_back(s);
        }
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &level.adj[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
    };
    while seeds.len() < k {
        bfs_from(&seeds, &mut dist);
        // farthest node; unreachable (distance MAX) counts as farthest
        let far = (0..n)
            .filter(|v| !seeds.contains(v))
            .max_by_key(|&v| (dist[v], std::cmp::Reverse(v)))
            .unwrap();
        seeds.push(far);
    }

    let mut queues: Vec<std::collections::VecDeque<usize>> = Vec::with_capacity(k);
    for (r, &s) in seeds.iter().enumerate() {
        assignment[s] = r as u32;
        weights[r] += level.node_w[s];
        queues.push(std::collections::VecDeque::from([s]));
    }
    let mut progress = true;
    while progress {
        progress = false;
        for r in 0..k {
            if let Some(v) = queues[r].pop_front() {
                progress = true;
                for &(u, _) in &level.adj[v] {
                    if assignment[u] == u32::MAX && weights[r] + level.node_w[u] <= cap {
                        assignment[u] = r as u32;
                        weights[r] += level.node_w[u];
                        queues[r].push_back(u);
                    }
                }
            }
        }
    }
    // leftovers: lightest region, capacity permitting, else lightest overall
    for v in 0..n {
        if assignment[v] != u32::MAX {
            continue;
        }
        let r = (0..k)
            .filter(|&r| weights[r] + level.node_w[v] <= cap)
            .min_by_key(|&r| (weights[r], r))
            .or_else(|| (0..k).min_by_key(|&r| (weights[r], r)))
            .unwrap();
        assignment[v] = r as u32;
        weights[r] += level.node_w[v];
    }
    Ok(assignment)
}

/// Greedy boundary passes: move a node to the adjacent block with the largest
/// positive cut gain, respecting the cap and never emptying a block.
fn refine(level: &Level, assignment: &mut [u32], k: usize, cap: u64) {
    let n = level.len();
    let mut weights = vec![0u64; k];
    let mut counts = vec![0usize; k];
    for (v, &a) in assignment.iter().enumerate() {
        weights[a as usize] += level.node_w[v];
        counts[a as usize] += 1;
    }
    for _pass in 0..8 {
        let mut moves = 0usize;
        for v in 0..n {
            let own = assignment[v] as usize;
            if counts[own] <= 1 {
                continue;
            }
            let mut internal = 0u64;
            let mut external: std::collections::BTreeMap<usize, u64> =
                std::collections::BTreeMap::new();
            for &(u, w) in &level.adj[v] {
                let ru = assignment[u] as usize;
                if ru == own {
                    internal += w;
                } else {
                    *external.entry(ru).or_insert(0) += w;
                }
            }
            let mut best: Option<(i64, usize)> = None;
            for (&r, &ext) in &external {
                if weights[r] + level.node_w[v] > cap {
                    continue;
                }
                let gain = ext as i64 - internal as i64;
                let better = match best {
                    None => gain > 0,
                    Some((bg, br)) => gain > bg || (gain == bg && r < br),
                };
                if better && gain > 0 {
                    best = Some((gain, r));
                }
            }
            if let Some((_, r)) = best {
                weights[own] -= level.node_w[v];
                counts[own] -= 1;
                weights[r] += level.node_w[v];
                counts[r] += 1;
                assignment[v] = r as u32;
                moves += 1;
            }
        }
        if moves == 0 {
            break;
        }
    }
}

/// Moves nodes out of over-capacity blocks into the lightest block that can
/// take them. A no-op when the invariants already hold.
fn repair_balance(level: &Level, assignment: &mut [u32], k: usize, cap: u64) {
    let n = level.len();
    let mut weights = vec![0u64; k];
    let mut counts = vec![0usize; k];
    for (v, &a) in assignment.iter().enumerate() {
        weights[a as usize] += level.node_w[v];
        counts[a as usize] += 1;
    }
    for _ in 0..4 * n {
        let Some(over) = (0..k).find(|&r| weights[r] > cap) else { break };
        let target = (0..k).min_by_key(|&r| (weights[r], r)).unwrap();
        if target == over {
            break;
        }
        // prefer a boundary node adjacent to the target block
        let candidate = (0..n)
            .filter(|&v| assignment[v] as usize == over && counts[over] > 1)
            .min_by_key(|&v| {
                let touches =
                    level.adj[v].iter().any(|&(u, _)| assignment[u] as usize == target);
                (!touches, v)
            });
        let Some(v) = candidate else { break };
        weights[over] -= level.node_w[v];
        counts[over] -= 1;
        weights[target] += level.node_w[v];
        counts[target] += 1;
        assignment[v] = target as u32;
    }
}

fn cut_weight(level: &Level, assignment: &[u32]) -> u64 {
    let mut cut = 0u64;
    for (v, nbrs) in level.adj.iter().enumerate() {
        for &(u, w) in nbrs {
            if u > v && assignment[u] != assignment[v] {
                cut += w;
            }
        }
    }
    cut
}
