//! Confusability graphs over a deviator's actions and their colorings.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{MonitoringStructure, ProductDistribution, StageGame};

/// Probabilities at or below this value count as zero when testing edges.
pub const POSITIVITY_CUTOFF: f64 = 1e-12;
/// Default cutoff for membership in `Supp P*`.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-12;
/// Largest vertex count handled by the exact coloring solver.
pub const EXACT_VERTEX_LIMIT: usize = 24;

/// Which opponent profile, receiver and signal produced an edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWitness {
    pub edge: (usize, usize),
    /// Opponent actions in increasing player order.
    pub opponents: Vec<usize>,
    pub receiver: usize,
    pub signal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryGraph {
    pub player: usize,
    vertices: usize,
    edges: Vec<(usize, usize)>,
    pub witnesses: Vec<EdgeWitness>,
    #[serde(skip)]
    adjacency: Vec<Vec<bool>>,
}

impl AuxiliaryGraph {
    /// Graph with explicit edges; self-loops and duplicates are dropped.
    pub fn new(vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adjacency = vec![vec![false; vertices]; vertices];
        for (u, v) in edges {
            assert!(u < vertices && v < vertices, "edge ({u}, {v}) out of range");
            if u != v {
                adjacency[u][v] = true;
                adjacency[v][u] = true;
            }
        }
        let mut edges = vec![];
        for (u, row) in adjacency.iter().enumerate() {
            for v in u + 1..vertices {
                if row[v] {
                    edges.push((u, v));
                }
            }
        }
        Self {
            player: 0,
            vertices,
            edges,
            witnesses: vec![],
            adjacency,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    /// Edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.adjacency[u][v]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].iter().filter(|&&b| b).count()
    }

    pub fn is_proper(&self, colors: &[usize]) -> bool {
        colors.len() == self.vertices && self.edges.iter().all(|&(u, v)| colors[u] != colors[v])
    }
}

/// Builds `G_i`: actions `a_i`, `a_i'` are joined when some opponent profile
/// in the support of `P*_{-i}` lets some other player `k` receive a common
/// signal with positive probability under both.
///
/// Only receivers `k != i` are considered, since the deviator knows its own
/// action.
pub fn build_auxiliary_graph(
    game: &StageGame,
    monitoring: &MonitoringStructure,
    pstar: &ProductDistribution,
    i: usize,
    support_threshold: f64,
) -> Result<AuxiliaryGraph> {
    game.check_player(i)?;
    pstar.check_game(game)?;
    let shape = game.opponents_shape(i);
    let others: Vec<usize> = (0..game.players()).filter(|&j| j != i).collect();
    let supports: Vec<Vec<usize>> = others
        .iter()
        .map(|&j| pstar.support(j, support_threshold))
        .collect();
    let n = game.action_count(i);
    let mut edges = vec![];
    let mut witnesses = vec![];
    let mut opp = vec![0; shape.len()];
    for a in 0..n {
        for b in a + 1..n {
            'search: for x in 0..shape.size() {
                shape.digits_into(x, &mut opp);
                if opp.iter().zip(&supports).any(|(o, s)| !s.contains(o)) {
                    continue;
                }
                let pa = game.join_profile(i, a, &opp);
                let pb = game.join_profile(i, b, &opp);
                for &k in &others {
                    for s in 0..monitoring.signal_count(k) {
                        let m = monitoring
                            .signal_prob(pa, k, s)
                            .min(monitoring.signal_prob(pb, k, s));
                        if m > POSITIVITY_CUTOFF {
                            edges.push((a, b));
                            witnesses.push(EdgeWitness {
                                edge: (a, b),
                                opponents: opp.clone(),
                                receiver: k,
                                signal: s,
                            });
                            break 'search;
                        }
                    }
                }
            }
        }
    }
    let mut g = AuxiliaryGraph::new(n, edges);
    g.player = i;
    g.witnesses = witnesses;
    Ok(g)
}

/// A proper coloring. `exact` is false when `count` is only an upper bound
/// on the chromatic number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub colors: Vec<usize>,
    pub count: usize,
    pub exact: bool,
}

/// Relabels colors by first appearance so every index in `0..count` is used.
fn canonical(colors: &[usize]) -> (Vec<usize>, usize) {
    let mut map = vec![usize::MAX; colors.len().max(1) + colors.iter().copied().max().unwrap_or(0)];
    let mut next = 0;
    let out = colors
        .iter()
        .map(|&c| {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
            map[c]
        })
        .collect();
    (out, next)
}

/// DSATUR greedy coloring; ties go to the lowest-index vertex and each
/// vertex takes the lowest available color.
pub fn greedy_coloring(g: &AuxiliaryGraph) -> Coloring {
    let n = g.vertex_count();
    let mut colors = vec![usize::MAX; n];
    for _ in 0..n {
        let mut best = None;
        let mut best_key = (0usize, 0usize);
        for v in 0..n {
            if colors[v] != usize::MAX {
                continue;
            }
            let mut seen: Vec<usize> = (0..n)
                .filter(|&u| g.adjacent(u, v) && colors[u] != usize::MAX)
                .map(|u| colors[u])
                .collect();
            seen.sort_unstable();
            seen.dedup();
            let key = (seen.len(), g.degree(v));
            if best.is_none() || key > best_key {
                best = Some(v);
                best_key = key;
            }
        }
        let v = best.expect("an uncolored vertex remains");
        let mut c = 0;
        while (0..n).any(|u| g.adjacent(u, v) && colors[u] == c) {
            c += 1;
        }
        colors[v] = c;
    }
    let (colors, count) = canonical(&colors);
    Coloring {
        colors,
        count,
        exact: n <= 1,
    }
}

/// Size of a maximum clique (exact up to the vertex limit, greedy beyond).
pub fn max_clique_size(g: &AuxiliaryGraph) -> usize {
    let n = g.vertex_count();
    if n == 0 {
        return 0;
    }
    if n > EXACT_VERTEX_LIMIT {
        let mut best = 1;
        for start in 0..n {
            let mut clique = vec![start];
            for v in 0..n {
                if v != start && clique.iter().all(|&u| g.adjacent(u, v)) {
                    clique.push(v);
                }
            }
            best = best.max(clique.len());
        }
        return best;
    }
    let masks = neighbor_masks(g);
    let mut best = 0;
    bron_kerbosch(&masks, 0, (1u32 << n) - 1, 0, &mut best);
    best
}

fn neighbor_masks(g: &AuxiliaryGraph) -> Vec<u32> {
    let n = g.vertex_count();
    (0..n)
        .map(|u| (0..n).filter(|&v| g.adjacent(u, v)).fold(0u32, |m, v| m | 1 << v))
        .collect()
}

fn bron_kerbosch(masks: &[u32], r: u32, mut p: u32, mut x: u32, best: &mut usize) {
    if p == 0 && x == 0 {
        *best = (*best).max(r.count_ones() as usize);
        return;
    }
    if (r.count_ones() + p.count_ones()) as usize <= *best {
        return;
    }
    let pivot = (p | x).trailing_zeros() as usize;
    let mut cand = p & !masks[pivot];
    while cand != 0 {
        let v = cand.trailing_zeros() as usize;
        let bit = 1u32 << v;
        bron_kerbosch(masks, r | bit, p & masks[v], x & masks[v], best);
        p &= !bit;
        x |= bit;
        cand &= !bit;
    }
}

/// Tries to color with at most `k` colors by backtracking in DSATUR order.
fn k_colorable(masks: &[u32], k: usize) -> Option<Vec<usize>> {
    fn go(masks: &[u32], k: usize, colors: &mut [usize], used: usize) -> bool {
        let n = masks.len();
        // most constrained uncolored vertex
        let mut pick = None;
        let mut pick_key = (0usize, 0u32);
        for v in 0..n {
            if colors[v] != usize::MAX {
                continue;
            }
            let mut sat = 0u64;
            for u in 0..n {
                if masks[v] >> u & 1 == 1 && colors[u] != usize::MAX {
                    sat |= 1 << colors[u];
                }
            }
            let key = (sat.count_ones() as usize, masks[v].count_ones());
            if pick.is_none() || key > pick_key {
                pick = Some(v);
                pick_key = key;
            }
        }
        let Some(v) = pick else { return true };
        // a fresh color is symmetric to any other fresh color
        for c in 0..k.min(used + 1) {
            let clash = (0..n).any(|u| masks[v] >> u & 1 == 1 && colors[u] == c);
            if clash {
                continue;
            }
            colors[v] = c;
            if go(masks, k, colors, used.max(c + 1)) {
                return true;
            }
            colors[v] = usize::MAX;
        }
        false
    }
    let mut colors = vec![usize::MAX; masks.len()];
    go(masks, k, &mut colors, 0).then_some(colors)
}

/// Minimum coloring. Exact up to [`EXACT_VERTEX_LIMIT`] vertices; larger
/// graphs get the greedy coloring with `exact = false`.
pub fn minimal_coloring(g: &AuxiliaryGraph) -> Coloring {
    let n = g.vertex_count();
    let greedy = greedy_coloring(g);
    if n > EXACT_VERTEX_LIMIT {
        return Coloring {
            exact: false,
            ..greedy
        };
    }
    if n == 0 {
        return Coloring {
            colors: vec![],
            count: 0,
            exact: true,
        };
    }
    let lower = max_clique_size(g).max(1);
    let masks = neighbor_masks(g);
    for k in lower..greedy.count {
        if let Some(colors) = k_colorable(&masks, k) {
            let (colors, count) = canonical(&colors);
            return Coloring {
                colors,
                count,
                exact: true,
            };
        }
    }
    Coloring {
        exact: true,
        ..greedy
    }
}
