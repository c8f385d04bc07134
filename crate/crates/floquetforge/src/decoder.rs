//! Minimum-weight perfect-matching decoding of detector error models.
//!
//! A [`Dem`] is lowered to a [`MatchingGraph`]: mechanisms with one or two
//! detectors become weighted edges (one-detector mechanisms attach to a
//! virtual boundary, created only when such mechanisms exist), and
//! mechanisms with more detectors are decomposed over existing edges —
//! preferring an exact partition into known edges, falling back to
//! shortest-path realizations, and failing loudly when no cover exists.
//! Edge weights are `ln((1-p)/p)` in fixed point, so a `p = 1/2` erasure
//! mechanism costs nothing to traverse.
//!
//! Decoding pairs up defects by graph distance: a Dijkstra search from each
//! defect (early-exited once enough neighbours are known), a union-find
//! clustering of the candidate pairs, and an exact blossom matching per
//! cluster with boundary choices encoded by the standard mirror-vertex
//! doubling. Small syndromes skip the clustering and match over the full
//! metric, which keeps the brute-force oracle comparison honest.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use mwmatching::{Matching, SENTINEL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{BitMatrix, Dem};

/// Fixed-point scale for edge weights: weight = round(ln((1-p)/p) * 2^16).
pub const WEIGHT_SCALE: f64 = 65536.0;

/// Cap on any single accumulated cost, keeping blossom arithmetic in `i32`.
const WEIGHT_CAP: i64 = 1 << 26;

/// Sentinel "other endpoint" for boundary edges.
const BOUNDARY: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum DecoderError {
    #[error("mechanism {mechanism} with detectors {dets:?} cannot be decomposed into graph edges")]
    UndecomposableHyperedge { mechanism: usize, dets: Vec<u32> },
    #[error("defect id {0} out of range for {1} detectors")]
    DefectOutOfRange(u32, u32),
    #[error("odd number of defects ({0}) cannot be matched without a boundary")]
    OddDefectCount(usize),
    #[error("defect {0} cannot reach a mate or the boundary")]
    UnreachableDefect(u32),
    #[error("brute-force oracle limited to {limit} defects, got {got}")]
    BruteForceTooLarge { limit: usize, got: usize },
}

/// Probability-derived or uniform edge weights.
///
/// The uniform mode gives every edge the same unit weight regardless of its
/// mechanism probability; derived weights are `ln((1-p)/p)`, clamped to zero
/// for `p >= 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    #[default]
    Derived,
    Uniform,
}

/// Weight of an edge whose mechanism fires with probability `p`.
pub fn probability_weight(p: f64, mode: WeightMode) -> i64 {
    match mode {
        WeightMode::Uniform => WEIGHT_SCALE as i64,
        WeightMode::Derived => {
            if p >= 0.5 {
                0
            } else {
                (((1.0 - p) / p).ln() * WEIGHT_SCALE).round().min(WEIGHT_CAP as f64) as i64
            }
        }
    }
}

/// One directed adjacency entry. `to == BOUNDARY` marks a boundary edge.
#[derive(Debug, Clone, Copy)]
struct AdjEntry {
    to: u32,
    weight: i64,
    obs: u32,
}

/// Weighted decoding graph derived from a DEM.
///
/// Nodes are detector ids; edges carry the weight and the observable set
/// flipped when the corresponding mechanism fires. Boundary edges (from
/// one-detector mechanisms) are stored per node rather than as a node of
/// their own.
#[derive(Debug, Clone)]
pub struct MatchingGraph {
    n_dets: u32,
    n_obs: u32,
    adj: Vec<Vec<AdjEntry>>,
    obs_pool: Vec<Vec<u32>>,
    /// edge id -> (endpoint, endpoint | BOUNDARY), endpoints sorted.
    edge_endpoints: Vec<(u32, u32)>,
    /// edge id -> DEM mechanism indices that contributed probability to it.
    provenance: Vec<Vec<u32>>,
    has_boundary: bool,
    /// Mechanisms that flip observables but no detectors: invisible to any
    /// decoder, reported so callers can surface them.
    undetectable: Vec<u32>,
}

impl MatchingGraph {
    pub fn n_dets(&self) -> u32 {
        self.n_dets
    }

    pub fn n_obs(&self) -> u32 {
        self.n_obs
    }

    pub fn n_edges(&self) -> usize {
        self.edge_endpoints.len()
    }

    pub fn has_boundary(&self) -> bool {
        self.has_boundary
    }

    pub fn undetectable_mechanisms(&self) -> &[u32] {
        &self.undetectable
    }

    /// Mechanism indices that contributed to edge `e`.
    pub fn edge_provenance(&self, e: u32) -> &[u32] {
        &self.provenance[e as usize]
    }

    pub fn edge_endpoints(&self, e: u32) -> (u32, Option<u32>) {
        let (u, v) = self.edge_endpoints[e as usize];
        (u, (v != BOUNDARY).then_some(v))
    }
}

/// Running (probability, provenance) accumulator for one graph edge key.
#[derive(Debug, Clone, Default)]
struct EdgeAccum {
    p: f64,
    mechs: Vec<u32>,
}

impl EdgeAccum {
    /// Combine an independent mechanism: either-but-not-both flip parity.
    fn absorb(&mut self, p: f64, mech: u32) {
        self.p = self.p + p - 2.0 * self.p * p;
        self.mechs.push(mech);
    }
}

type EdgeKey = (u32, u32, u32); // (u, v | BOUNDARY, obs pool id)

/// Shortest edge-key path and its cost, if the endpoints connect.
type KeyPath = Option<(Vec<EdgeKey>, i64)>;

/// Matching of one cluster: total cost plus (defect, mate) pairs, where a
/// `None` mate is the boundary.
type ClusterMatching = (i64, Vec<(usize, Option<usize>)>);

/// Provisional graph used while decomposing hyperedges: adjacency over the
/// already-materialized two-detector edges.
struct Provisional {
    adj: Vec<Vec<(u32, i64, EdgeKey)>>,
    boundary: Vec<Option<(i64, EdgeKey)>>,
}

fn canonical_pair(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Enumerate all partitions of `items` into unordered pairs plus, when
/// `allow_singles` is set, singleton blocks. Deterministic order: the first
/// unplaced item is paired with each later item in turn, then (optionally)
/// left single.
fn enumerate_partitions(items: &[u32], allow_singles: bool) -> Vec<Vec<Vec<u32>>> {
    fn rec(rest: &mut Vec<u32>, cur: &mut Vec<Vec<u32>>, out: &mut Vec<Vec<Vec<u32>>>, singles: bool) {
        if rest.is_empty() {
            out.push(cur.clone());
            return;
        }
        let first = rest.remove(0);
        for j in 0..rest.len() {
            let other = rest.remove(j);
            cur.push(vec![first, other]);
            rec(rest, cur, out, singles);
            cur.pop();
            rest.insert(j, other);
        }
        if singles {
            cur.push(vec![first]);
            rec(rest, cur, out, singles);
            cur.pop();
        }
        rest.insert(0, first);
    }
    let mut rest = items.to_vec();
    let mut out = Vec::new();
    rec(&mut rest, &mut Vec::new(), &mut out, allow_singles);
    out
}

/// How one block of a hyperedge partition is realized on the graph.
#[derive(Debug, Clone)]
enum BlockPlan {
    /// An existing edge key covers the block directly.
    Edge(EdgeKey, i64),
    /// No direct edge: a shortest path of existing edges covers it.
    Path(Vec<EdgeKey>, i64),
}

impl BlockPlan {
    fn cost(&self) -> i64 {
        match self {
            BlockPlan::Edge(_, c) | BlockPlan::Path(_, c) => *c,
        }
    }
}

/// Dijkstra over the provisional graph from `src`, stopping once `goal` is
/// settled (`goal == BOUNDARY` means: stop once the cheapest boundary
/// completion can no longer improve). Returns the edge-key path.
fn provisional_path(prov: &Provisional, src: u32, goal: u32) -> KeyPath {
    let mut dist: HashMap<u32, i64> = HashMap::new();
    let mut pred: HashMap<u32, (u32, EdgeKey)> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(src, 0);
    heap.push(Reverse((0i64, src)));
    let mut best_boundary: Option<(i64, u32, EdgeKey)> = None;
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist.get(&u).copied().unwrap_or(i64::MAX) < d {
            continue;
        }
        if goal == BOUNDARY {
            if let Some((bd, _, _)) = best_boundary {
                if d >= bd {
                    break;
                }
            }
            if let Some((bw, key)) = prov.boundary[u as usize] {
                let total = d + bw;
                if best_boundary.is_none_or(|(bd, bu, _)| (total, u) < (bd, bu)) {
                    best_boundary = Some((total, u, key));
                }
            }
        } else if u == goal {
            let mut path = Vec::new();
            let mut cur = u;
            while cur != src {
                let (prev, key) = pred[&cur];
                path.push(key);
                cur = prev;
            }
            path.reverse();
            return Some((path, d));
        }
        for &(v, w, key) in &prov.adj[u as usize] {
            let nd = d.saturating_add(w);
            if nd < dist.get(&v).copied().unwrap_or(i64::MAX) {
                dist.insert(v, nd);
                pred.insert(v, (u, key));
                heap.push(Reverse((nd, v)));
            }
        }
    }
    if goal == BOUNDARY {
        let (total, node, key) = best_boundary?;
        let mut path = vec![key];
        let mut cur = node;
        while cur != src {
            let (prev, k) = pred[&cur];
            path.push(k);
            cur = prev;
        }
        path.reverse();
        return Some((path, total));
    }
    None
}

fn symdiff_ids(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut set: BTreeSet<u32> = a.iter().copied().collect();
    for x in b {
        if !set.insert(*x) {
            set.remove(x);
        }
    }
    set.into_iter().collect()
}

/// Lower a DEM to a matching graph.
///
/// Mechanisms with more than two detectors are decomposed over the edges
/// produced by the one- and two-detector mechanisms: every partition of the
/// symptom into pairs (and, when a boundary exists, singletons) is scored,
/// preferring partitions whose blocks all exist as edges and whose combined
/// observable set matches the mechanism exactly; blocks without a direct
/// edge are realized as shortest paths. Any leftover observable difference
/// is attached to the first block so no logical action is silently dropped.
/// A symptom that no combination of existing edges can reproduce is a fatal
/// [`DecoderError::UndecomposableHyperedge`].
pub fn dem_to_matching_graph(dem: &Dem, mode: WeightMode) -> Result<MatchingGraph, DecoderError> {
    let n_dets = dem.n_dets as u32;
    let mut obs_pool: Vec<Vec<u32>> = vec![Vec::new()];
    let mut obs_ids: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
    obs_ids.insert(Vec::new(), 0);
    let intern = |obs: &[u32], pool: &mut Vec<Vec<u32>>, ids: &mut BTreeMap<Vec<u32>, u32>| -> u32 {
        if let Some(&id) = ids.get(obs) {
            return id;
        }
        let id = pool.len() as u32;
        pool.push(obs.to_vec());
        ids.insert(obs.to_vec(), id);
        id
    };

    let mut accum: BTreeMap<EdgeKey, EdgeAccum> = BTreeMap::new();
    let mut hypers: Vec<u32> = Vec::new();
    let mut undetectable = Vec::new();
    let mut has_boundary = false;

    for (m, mech) in dem.mechanisms.iter().enumerate() {
        if !mech.p.is_finite() || mech.p <= 0.0 {
            continue;
        }
        match mech.dets.len() {
            0 => {
                if !mech.obs.is_empty() {
                    undetectable.push(m as u32);
                }
            }
            1 => {
                has_boundary = true;
                let o = intern(&mech.obs, &mut obs_pool, &mut obs_ids);
                accum.entry((mech.dets[0], BOUNDARY, o)).or_default().absorb(mech.p, m as u32);
            }
            2 => {
                let (u, v) = canonical_pair(mech.dets[0], mech.dets[1]);
                let o = intern(&mech.obs, &mut obs_pool, &mut obs_ids);
                accum.entry((u, v, o)).or_default().absorb(mech.p, m as u32);
            }
            _ => hypers.push(m as u32),
        }
    }

    // Decompose hyperedges against the provisional (graphlike-only) metric.
    if !hypers.is_empty() {
        let mut prov = Provisional {
            adj: vec![Vec::new(); n_dets as usize],
            boundary: vec![None; n_dets as usize],
        };
        for (&(u, v, o), acc) in &accum {
            let w = probability_weight(acc.p, mode);
            let key = (u, v, o);
            if v == BOUNDARY {
                let slot = &mut prov.boundary[u as usize];
                if slot.is_none_or(|(bw, _)| w < bw) {
                    *slot = Some((w, key));
                }
            } else {
                prov.adj[u as usize].push((v, w, key));
                prov.adj[v as usize].push((u, w, key));
            }
        }

        for &m in &hypers {
            let mech = &dem.mechanisms[m as usize];
            let fail = || DecoderError::UndecomposableHyperedge {
                mechanism: m as usize,
                dets: mech.dets.clone(),
            };
            if mech.dets.len() > 10 {
                return Err(fail());
            }
            let partitions = enumerate_partitions(&mech.dets, has_boundary);
            // Score: (# path-realized blocks, obs residual present, cost).
            let mut best: Option<(usize, usize, i64, Vec<BlockPlan>)> = None;
            let mut path_cache: BTreeMap<(u32, u32), KeyPath> = BTreeMap::new();
            for part in &partitions {
                let mut plans = Vec::with_capacity(part.len());
                let mut n_paths = 0usize;
                let mut cost = 0i64;
                let mut ok = true;
                for block in part {
                    let (u, v) = match block.as_slice() {
                        [a] => (*a, BOUNDARY),
                        [a, b] => canonical_pair(*a, *b),
                        _ => unreachable!(),
                    };
                    // Cheapest direct edge over obs variants, if any.
                    let direct = accum
                        .range((u, v, 0)..=(u, v, u32::MAX))
                        .map(|(&key, acc)| (probability_weight(acc.p, mode), key))
                        .min();
                    let plan = if let Some((w, key)) = direct {
                        BlockPlan::Edge(key, w)
                    } else {
                        let cached = path_cache
                            .entry((u, v))
                            .or_insert_with(|| provisional_path(&prov, u, v))
                            .clone();
                        match cached {
                            Some((path, w)) => {
                                n_paths += 1;
                                BlockPlan::Path(path, w)
                            }
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    };
                    cost = cost.saturating_add(plan.cost());
                    plans.push(plan);
                }
                if !ok {
                    continue;
                }
                let mut obs = Vec::new();
                for plan in &plans {
                    let keys: &[EdgeKey] = match plan {
                        BlockPlan::Edge(k, _) => std::slice::from_ref(k),
                        BlockPlan::Path(p, _) => p,
                    };
                    for k in keys {
                        obs = symdiff_ids(&obs, &obs_pool[k.2 as usize]);
                    }
                }
                let residual = usize::from(obs != mech.obs);
                if best
                    .as_ref()
                    .is_none_or(|(bp, br, bc, _)| (n_paths, residual, cost) < (*bp, *br, *bc))
                {
                    best = Some((n_paths, residual, cost, plans));
                }
            }
            let Some((_, _, _, plans)) = best else {
                return Err(fail());
            };

            // Residual observable action goes on the first covering edge.
            let mut covered = Vec::new();
            let mut keys_used: Vec<EdgeKey> = Vec::new();
            for plan in &plans {
                let keys: &[EdgeKey] = match plan {
                    BlockPlan::Edge(k, _) => std::slice::from_ref(k),
                    BlockPlan::Path(p, _) => p,
                };
                for k in keys {
                    covered = symdiff_ids(&covered, &obs_pool[k.2 as usize]);
                    keys_used.push(*k);
                }
            }
            let residual = symdiff_ids(&covered, &mech.obs);
            debug_assert!(!keys_used.is_empty());
            for (i, key) in keys_used.iter().enumerate() {
                let target = if i == 0 && !residual.is_empty() {
                    let adjusted = symdiff_ids(&obs_pool[key.2 as usize], &residual);
                    let o = intern(&adjusted, &mut obs_pool, &mut obs_ids);
                    (key.0, key.1, o)
                } else {
                    *key
                };
                accum.entry(target).or_default().absorb(mech.p, m);
            }
        }
    }

    // Materialize the final graph in deterministic key order.
    let mut adj: Vec<Vec<AdjEntry>> = vec![Vec::new(); n_dets as usize];
    let mut edge_endpoints = Vec::new();
    let mut provenance = Vec::new();
    for (&(u, v, o), acc) in &accum {
        let weight = probability_weight(acc.p, mode);
        edge_endpoints.push((u, v));
        provenance.push(acc.mechs.clone());
        adj[u as usize].push(AdjEntry { to: v, weight, obs: o });
        if v != BOUNDARY {
            adj[v as usize].push(AdjEntry { to: u, weight, obs: o });
        }
    }

    Ok(MatchingGraph {
        n_dets,
        n_obs: dem.n_obs as u32,
        adj,
        obs_pool,
        edge_endpoints,
        provenance,
        has_boundary,
        undetectable,
    })
}

/// Decoded correction for one syndrome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    /// Predicted flipped observables, sorted.
    pub obs_flips: Vec<u32>,
    /// Total weight of the matched paths.
    pub cost: i64,
    /// Matched defect pairs; `None` mates a defect with the boundary.
    pub pairs: Vec<(u32, Option<u32>)>,
}

/// Tuning knobs for [`mwpm_decode_with`].
#[derive(Debug, Clone, Copy)]
pub struct DecodeOptions {
    /// Syndromes up to this size are matched over the full graph metric.
    pub dense_limit: usize,
    /// Candidate mates collected per defect in clustered mode.
    pub neighbors: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions { dense_limit: 32, neighbors: 8 }
    }
}

/// Per-source search result: candidate mates, cheapest boundary completion,
/// and the predecessor map needed to replay paths.
struct SearchResult {
    /// (other defect index, path cost), in discovery order.
    found: Vec<(usize, i64)>,
    /// (cost, settling node, boundary obs id) of the best boundary option.
    boundary: Option<(i64, u32, u32)>,
    pred: HashMap<u32, (u32, u32)>, // node -> (previous node, obs id of edge)
}

/// Reusable distance scratch with epoch-stamped invalidation.
struct Scratch {
    dist: Vec<i64>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch { dist: vec![0; n], stamp: vec![0; n], epoch: 0 }
    }

    fn begin(&mut self) {
        self.epoch += 1;
    }

    fn get(&self, v: u32) -> i64 {
        if self.stamp[v as usize] == self.epoch {
            self.dist[v as usize]
        } else {
            i64::MAX
        }
    }

    fn set(&mut self, v: u32, d: i64) {
        self.stamp[v as usize] = self.epoch;
        self.dist[v as usize] = d;
    }
}

/// Dijkstra from one defect. With `limit = None` the whole reachable
/// component is settled (exact distances to every other defect and to the
/// boundary); otherwise the search stops once `limit` defects are found and
/// the boundary bound can no longer improve.
fn defect_search(
    g: &MatchingGraph,
    defects: &[u32],
    source_idx: usize,
    limit: Option<usize>,
    scratch: &mut Scratch,
) -> SearchResult {
    let src = defects[source_idx];
    let mut res = SearchResult { found: Vec::new(), boundary: None, pred: HashMap::new() };
    scratch.begin();
    scratch.set(src, 0);
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0i64, src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if scratch.get(u) < d {
            continue;
        }
        if let Some(k) = limit {
            if res.found.len() >= k && res.boundary.is_some_and(|(bd, _, _)| d >= bd) {
                break;
            }
        }
        if u != src {
            if let Ok(j) = defects.binary_search(&u) {
                if j != source_idx {
                    res.found.push((j, d));
                }
            }
        }
        for entry in &g.adj[u as usize] {
            if entry.to == BOUNDARY {
                let total = d.saturating_add(entry.weight);
                if res.boundary.is_none_or(|(bd, bu, _)| (total, u) < (bd, bu)) {
                    res.boundary = Some((total, u, entry.obs));
                }
                continue;
            }
            let nd = d.saturating_add(entry.weight).min(WEIGHT_CAP);
            if nd < scratch.get(entry.to) {
                scratch.set(entry.to, nd);
                res.pred.insert(entry.to, (u, entry.obs));
                heap.push(Reverse((nd, entry.to)));
            }
        }
    }
    res
}

/// Walk `search.pred` from `target` back to the search source, XORing edge
/// observable sets into `obs`.
fn replay_path(g: &MatchingGraph, search: &SearchResult, src: u32, target: u32, obs: &mut BTreeSet<u32>) {
    let mut cur = target;
    while cur != src {
        let (prev, o) = search.pred[&cur];
        for &x in &g.obs_pool[o as usize] {
            if !obs.insert(x) {
                obs.remove(&x);
            }
        }
        cur = prev;
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Decode one syndrome with default options.
pub fn mwpm_decode(g: &MatchingGraph, defects: &[u32]) -> Result<DecodeOutcome, DecoderError> {
    mwpm_decode_with(g, defects, &DecodeOptions::default())
}

/// Decode one syndrome (detector ids with nonzero deviation).
pub fn mwpm_decode_with(
    g: &MatchingGraph,
    defects: &[u32],
    opts: &DecodeOptions,
) -> Result<DecodeOutcome, DecoderError> {
    let mut defects: Vec<u32> = defects.to_vec();
    defects.sort_unstable();
    defects.dedup();
    for &d in &defects {
        if d >= g.n_dets {
            return Err(DecoderError::DefectOutOfRange(d, g.n_dets));
        }
    }
    if defects.is_empty() {
        return Ok(DecodeOutcome { obs_flips: Vec::new(), cost: 0, pairs: Vec::new() });
    }
    if defects.len() % 2 == 1 && !g.has_boundary {
        return Err(DecoderError::OddDefectCount(defects.len()));
    }

    let m = defects.len();
    let limit = if m <= opts.dense_limit { None } else { Some(opts.neighbors) };
    let mut scratch = Scratch::new(g.n_dets as usize);
    let mut searches: Vec<SearchResult> = Vec::with_capacity(m);
    for i in 0..m {
        searches.push(defect_search(g, &defects, i, limit, &mut scratch));
    }

    // Cluster defects over the candidate pairs.
    let mut uf = UnionFind::new(m);
    for (i, s) in searches.iter().enumerate() {
        for &(j, _) in &s.found {
            uf.union(i, j);
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..m {
        let r = uf.find(i);
        clusters.entry(r).or_default().push(i);
    }

    // Parity repair: an odd cluster without a boundary option must merge
    // with another cluster; rerun unlimited searches for its members until
    // a foreign defect (or the boundary) turns up.
    loop {
        let mut offender = None;
        for members in clusters.values() {
            let odd = members.len() % 2 == 1;
            let capable = members.iter().any(|&i| searches[i].boundary.is_some());
            if odd && !capable {
                offender = Some(members.clone());
                break;
            }
        }
        let Some(members) = offender else { break };
        let mut merged = false;
        for &i in &members {
            searches[i] = defect_search(g, &defects, i, None, &mut scratch);
            if let Some(&(j, _)) = searches[i].found.iter().find(|(j, _)| uf.find(*j) != uf.find(i)) {
                uf.union(i, j);
                merged = true;
                break;
            }
            if searches[i].boundary.is_some() {
                merged = true;
                break;
            }
        }
        if !merged {
            return Err(DecoderError::UnreachableDefect(defects[members[0]]));
        }
        clusters.clear();
        for i in 0..m {
            let r = uf.find(i);
            clusters.entry(r).or_default().push(i);
        }
    }

    let mut obs = BTreeSet::new();
    let mut pairs = Vec::new();
    let mut cost = 0i64;
    for members in clusters.values() {
        match solve_cluster(&searches, members) {
            Some((c, ps)) => {
                cost += c;
                for (i, j) in ps {
                    apply_match(g, &defects, &searches, i, j, &mut obs, &mut pairs);
                }
            }
            None => {
                // Candidate subgraph admits no perfect matching: retry with
                // the exact metric over this cluster.
                let mut full: Vec<SearchResult> = Vec::new();
                let mut map = Vec::new();
                for &i in members {
                    full.push(defect_search(g, &defects, i, None, &mut scratch));
                    map.push(i);
                }
                let local: Vec<usize> = (0..members.len()).collect();
                let (c, ps) = solve_cluster(&full, &local)
                    .ok_or(DecoderError::UnreachableDefect(defects[members[0]]))?;
                cost += c;
                for (i, j) in ps {
                    apply_match(
                        g,
                        &defects,
                        &full,
                        map[i],
                        j.map(|x| map[x]),
                        &mut obs,
                        &mut pairs,
                    );
                }
            }
        }
    }

    Ok(DecodeOutcome { obs_flips: obs.into_iter().collect(), cost, pairs })
}

/// XOR the path observables for one matched pair into `obs`, recording the
/// pair. `i`/`j` index `defects`; `j = None` mates `i` with the boundary.
#[allow(clippy::too_many_arguments)]
fn apply_match(
    g: &MatchingGraph,
    defects: &[u32],
    searches: &[SearchResult],
    i: usize,
    j: Option<usize>,
    obs: &mut BTreeSet<u32>,
    pairs: &mut Vec<(u32, Option<u32>)>,
) {
    match j {
        Some(j) => {
            // Replay from whichever side discovered the other.
            let (owner, target) = if searches[i].pred.contains_key(&defects[j]) || defects[i] == defects[j] {
                (i, j)
            } else {
                (j, i)
            };
            replay_path(g, &searches[owner], defects[owner], defects[target], obs);
            pairs.push((defects[i.min(j)], Some(defects[i.max(j)])));
        }
        None => {
            let (_, node, bobs) = searches[i].boundary.expect("boundary match without option");
            replay_path(g, &searches[i], defects[i], node, obs);
            for &x in &g.obs_pool[bobs as usize] {
                if !obs.insert(x) {
                    obs.remove(&x);
                }
            }
            pairs.push((defects[i], None));
        }
    }
}

/// Exact minimum-cost matching of one cluster via blossom on the candidate
/// graph, with boundary choices encoded as mirror vertices. Returns `None`
/// when the candidate edges admit no perfect matching (caller escalates to
/// the full metric).
fn solve_cluster(
    searches: &[SearchResult],
    members: &[usize],
) -> Option<ClusterMatching> {
    let m = members.len();
    let local: HashMap<usize, usize> = members.iter().enumerate().map(|(l, &i)| (i, l)).collect();
    if m == 1 {
        let i = members[0];
        let (c, _, _) = searches[i].boundary?;
        return Some((c, vec![(i, None)]));
    }

    // Candidate pair costs, deduplicated to the cheapest discovery.
    let mut pair_cost: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for (li, &i) in members.iter().enumerate() {
        for &(j, c) in &searches[i].found {
            if let Some(&lj) = local.get(&j) {
                let key = (li.min(lj), li.max(lj));
                let c = c.min(WEIGHT_CAP);
                let slot = pair_cost.entry(key).or_insert(i64::MAX);
                *slot = (*slot).min(c);
            }
        }
    }
    let bound: Vec<Option<i64>> =
        members.iter().map(|&i| searches[i].boundary.map(|(c, _, _)| c.min(WEIGHT_CAP))).collect();
    let mirrors: Vec<usize> = (0..m).filter(|&l| bound[l].is_some()).collect();

    // Node layout: defects 0..m, mirrors m..m+mb, optional phantom last.
    let mb = mirrors.len();
    let mut n_nodes = m + mb;
    let phantom = if n_nodes % 2 == 1 {
        n_nodes += 1;
        Some(n_nodes - 1)
    } else {
        None
    };

    let cbig: i64 = pair_cost
        .values()
        .copied()
        .chain(bound.iter().flatten().copied())
        .max()
        .unwrap_or(0)
        + 1;
    let mut edges: Vec<(usize, usize, i32)> = Vec::new();
    for (&(a, b), &c) in &pair_cost {
        edges.push((a, b, (cbig - c) as i32));
    }
    for (r, &l) in mirrors.iter().enumerate() {
        edges.push((l, m + r, (cbig - bound[l].unwrap()) as i32));
    }
    for r in 0..mb {
        for s in r + 1..mb {
            edges.push((m + r, m + s, cbig as i32));
        }
    }
    if let Some(p) = phantom {
        for r in 0..mb {
            edges.push((m + r, p, cbig as i32));
        }
    }
    if edges.is_empty() {
        return None;
    }

    let mates = Matching::new(edges).max_cardinality().solve();
    let mut cost = 0i64;
    let mut out = Vec::new();
    for l in 0..m {
        let mate = mates[l];
        if mate == SENTINEL {
            return None;
        }
        if mate < m {
            if l < mate {
                cost += pair_cost[&(l, mate)];
                out.push((members[l], Some(members[mate])));
            }
        } else {
            cost += bound[l].expect("mirror mate implies boundary bound");
            out.push((members[l], None));
        }
    }
    Some((cost, out))
}

/// Exhaustive minimum-weight pairing oracle for small syndromes.
///
/// Enumerates every way to partition the defects into pairs and (when a
/// boundary exists) boundary singletons, using exact all-pairs distances.
pub fn brute_force_decode(g: &MatchingGraph, defects: &[u32]) -> Result<DecodeOutcome, DecoderError> {
    const LIMIT: usize = 12;
    let mut defects: Vec<u32> = defects.to_vec();
    defects.sort_unstable();
    defects.dedup();
    if defects.len() > LIMIT {
        return Err(DecoderError::BruteForceTooLarge { limit: LIMIT, got: defects.len() });
    }
    for &d in &defects {
        if d >= g.n_dets {
            return Err(DecoderError::DefectOutOfRange(d, g.n_dets));
        }
    }
    if defects.is_empty() {
        return Ok(DecodeOutcome { obs_flips: Vec::new(), cost: 0, pairs: Vec::new() });
    }
    if defects.len() % 2 == 1 && !g.has_boundary {
        return Err(DecoderError::OddDefectCount(defects.len()));
    }

    let m = defects.len();
    let mut scratch = Scratch::new(g.n_dets as usize);
    let mut searches = Vec::with_capacity(m);
    for i in 0..m {
        searches.push(defect_search(g, &defects, i, None, &mut scratch));
    }
    let mut dist = vec![vec![i64::MAX; m]; m];
    for (i, s) in searches.iter().enumerate() {
        for &(j, c) in &s.found {
            dist[i][j] = c;
            dist[j][i] = dist[j][i].min(c);
        }
    }

    fn rec(
        remaining: &mut Vec<usize>,
        cost: i64,
        plan: &mut Vec<(usize, Option<usize>)>,
        dist: &[Vec<i64>],
        bound: &[Option<i64>],
        best: &mut Option<ClusterMatching>,
    ) {
        if let Some((bc, _)) = best {
            if cost >= *bc {
                return;
            }
        }
        let Some(&first) = remaining.first() else {
            *best = Some((cost, plan.clone()));
            return;
        };
        remaining.remove(0);
        for k in 0..remaining.len() {
            let other = remaining.remove(k);
            if dist[first][other] != i64::MAX {
                plan.push((first, Some(other)));
                rec(remaining, cost.saturating_add(dist[first][other]), plan, dist, bound, best);
                plan.pop();
            }
            remaining.insert(k, other);
        }
        if let Some(b) = bound[first] {
            plan.push((first, None));
            rec(remaining, cost.saturating_add(b), plan, dist, bound, best);
            plan.pop();
        }
        remaining.insert(0, first);
    }

    let bound: Vec<Option<i64>> = searches.iter().map(|s| s.boundary.map(|(c, _, _)| c)).collect();
    let mut best = None;
    rec(&mut (0..m).collect(), 0, &mut Vec::new(), &dist, &bound, &mut best);
    let Some((cost, plan)) = best else {
        return Err(DecoderError::UnreachableDefect(defects[0]));
    };

    let mut obs = BTreeSet::new();
    let mut pairs = Vec::new();
    for (i, j) in plan {
        apply_match(g, &defects, &searches, i, j, &mut obs, &mut pairs);
    }
    Ok(DecodeOutcome { obs_flips: obs.into_iter().collect(), cost, pairs })
}

/// Decode every row of a detector matrix, in parallel across shot blocks.
///
/// Returns the predicted observable-flip matrix (shots x observables).
pub fn decode_shots(g: &MatchingGraph, dets: &BitMatrix) -> Result<BitMatrix, DecoderError> {
    const BLOCK: usize = 256;
    let shots = dets.rows();
    let ranges = crate::exec::block_ranges(shots, BLOCK);
    let blocks = crate::exec::map_blocks(ranges.len(), |b| {
        let (start, len) = ranges[b];
        let mut out = BitMatrix::new(len, g.n_obs as usize);
        for s in start..start + len {
            let defects: Vec<u32> = dets.ones_in_row(s).map(|d| d as u32).collect();
            let outcome = mwpm_decode(g, &defects)?;
            for &o in &outcome.obs_flips {
                out.set(s - start, o as usize, true);
            }
        }
        Ok(out)
    });
    let mut preds = BitMatrix::new(shots, g.n_obs as usize);
    for (b, block) in blocks.into_iter().enumerate() {
        let block: BitMatrix = block?;
        let (start, _) = ranges[b];
        for s in 0..block.rows() {
            preds.copy_row_from(start + s, &block, s);
        }
    }
    Ok(preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_floquet_circuit, ScheduleConfig};
    use crate::fpgroup::{low_index_normal_search, GroupPresentation, SearchConfig};
    use crate::noise::{apply_phenomenological, apply_sdem3, erase_instance, erasure_pattern};
    use crate::sim::{build_dem, dem_sample, frame_sample, DemMechanism};
    use crate::tess::{color_tessellation, extract_tessellation, Tessellation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hex_torus() -> Tessellation {
        let pres = GroupPresentation::triangle_rotation(6, 3).unwrap();
        let cfg = SearchConfig { max_index: 18, ..SearchConfig::default() };
        let found = low_index_normal_search(&pres, &cfg).unwrap();
        let sub = found.iter().find(|s| s.index == 18).unwrap();
        let mut t = extract_tessellation(&sub.table, 6, 3).unwrap();
        color_tessellation(&mut t).unwrap();
        t
    }

    fn torus_dem(p: f64, periods: usize) -> Dem {
        let t = hex_torus();
        let c = build_floquet_circuit(&t, &ScheduleConfig::new(periods)).unwrap();
        build_dem(&apply_phenomenological(&c, p))
    }

    fn mechanism_dem(mechs: Vec<DemMechanism>) -> Dem {
        let n_dets = mechs.iter().flat_map(|m| m.dets.iter()).max().map_or(0, |&d| d as usize + 1);
        let n_obs = mechs.iter().flat_map(|m| m.obs.iter()).max().map_or(0, |&o| o as usize + 1);
        Dem { n_dets, n_obs, mechanisms: mechs }
    }

    #[test]
    fn weight_formula_matches_log_odds() {
        assert_eq!(probability_weight(0.5, WeightMode::Derived), 0);
        assert_eq!(probability_weight(0.9, WeightMode::Derived), 0);
        let w = probability_weight(0.01, WeightMode::Derived);
        assert_eq!(w, ((0.99f64 / 0.01).ln() * WEIGHT_SCALE).round() as i64);
        assert!(probability_weight(0.001, WeightMode::Derived) > w);
        assert_eq!(probability_weight(0.2, WeightMode::Uniform), WEIGHT_SCALE as i64);
        assert_eq!(probability_weight(0.5, WeightMode::Uniform), WEIGHT_SCALE as i64);
    }

    #[test]
    fn empty_syndrome_decodes_to_nothing() {
        let g = dem_to_matching_graph(&torus_dem(0.01, 3), WeightMode::Derived).unwrap();
        let out = mwpm_decode(&g, &[]).unwrap();
        assert!(out.obs_flips.is_empty());
        assert_eq!(out.cost, 0);
        assert!(out.pairs.is_empty());
    }

    #[test]
    fn phenomenological_graph_covers_every_mechanism() {
        let dem = torus_dem(0.01, 3);
        let g = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
        assert!(g.has_boundary(), "time-boundary mechanisms should create boundary edges");
        let mut seen = vec![false; dem.mechanisms.len()];
        for e in 0..g.n_edges() as u32 {
            for &m in g.edge_provenance(e) {
                seen[m as usize] = true;
            }
        }
        for (m, mech) in dem.mechanisms.iter().enumerate() {
            if !mech.dets.is_empty() {
                assert!(seen[m], "mechanism {m} not represented: {mech:?}");
            }
        }
    }

    #[test]
    fn sdem3_hyperedges_decompose() {
        let t = hex_torus();
        let c = build_floquet_circuit(&t, &ScheduleConfig::new(4)).unwrap();
        let dem = build_dem(&apply_sdem3(&c, 0.01));
        assert!(dem.mechanisms.iter().any(|m| m.dets.len() > 2), "expected hyperedges");
        let g = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
        assert!(g.n_edges() > 0);
    }

    #[test]
    fn fired_mechanisms_are_mostly_recovered() {
        let dem = torus_dem(0.005, 3);
        let g = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let candidates: Vec<&DemMechanism> =
            dem.mechanisms.iter().filter(|m| !m.dets.is_empty()).collect();
        let mut exact = 0;
        let total = 100;
        for _ in 0..total {
            let mech = candidates[rng.gen_range(0..candidates.len())];
            let out = mwpm_decode(&g, &mech.dets).unwrap();
            if out.obs_flips == mech.obs {
                exact += 1;
            }
            let matched: usize = out
                .pairs
                .iter()
                .map(|(_, b)| 1 + usize::from(b.is_some()))
                .sum();
            assert_eq!(matched, mech.dets.len(), "every defect matched exactly once");
        }
        assert!(exact >= 90, "only {exact}/{total} single mechanisms recovered exactly");
    }

    #[test]
    fn mwpm_matches_brute_force_on_random_syndromes() {
        let dem = torus_dem(0.01, 3);
        let g = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let k = 2 * rng.gen_range(1..=4);
            let mut defects: Vec<u32> = Vec::new();
            while defects.len() < k {
                let d = rng.gen_range(0..g.n_dets());
                if !defects.contains(&d) {
                    defects.push(d);
                }
            }
            defects.sort_unstable();
            let fast = mwpm_decode(&g, &defects).unwrap();
            let brute = brute_force_decode(&g, &defects).unwrap();
            assert_eq!(fast.cost, brute.cost, "trial {trial}: defects {defects:?}");
        }
    }

    #[test]
    fn clustered_mode_agrees_with_dense_mode() {
        let dem = torus_dem(0.01, 4);
        let g = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
        let clustered = DecodeOptions { dense_limit: 2, neighbors: 6 };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let k = 2 * rng.gen_range(2..=4);
            let mut defects: Vec<u32> = Vec::new();
            while defects.len() < k {
                let d = rng.gen_range(0..g.n_dets());
                if !defects.contains(&d) {
                    defects.push(d);
                }
            }
            defects.sort_unstable();
            let dense = mwpm_decode(&g, &defects).unwrap();
            let local = mwpm_decode_with(&g, &defects, &clustered).unwrap();
            assert_eq!(dense.cost, local.cost, "defects {defects:?}");
        }
    }

    #[test]
    fn odd_defects_need_a_boundary() {
        let dem = mechanism_dem(vec![
            DemMechanism { p: 0.1, dets: vec![0, 1], obs: vec![] },
            DemMechanism { p: 0.1, dets: vec![1, 2], obs: vec![0] },
        ]);
        let g = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
        assert!(!g.has_boundary());
        assert!(matches!(mwpm_decode(&g, &[1]), Err(DecoderError::OddDefectCount(1))));
        let out = mwpm_decode(&g, &[0, 2]).unwrap();
        assert_eq!(out.obs_flips, vec![0]);

        let with_boundary = mechanism_dem(vec![
            DemMechanism { p: 0.1, dets: vec![0, 1], obs: vec![] },
            DemMechanism { p: 0.2, dets: vec![1], obs: vec![0] },
        ]);
        let g = dem_to_matching_graph(&with_boundary, WeightMode::Derived).unwrap();
        assert!(g.has_boundary());
        let out = mwpm_decode(&g, &[0]).unwrap();
        assert_eq!(out.pairs, vec![(0, None)]);
        assert_eq!(out.obs_flips, vec![0]);
    }

    #[test]
    fn disconnected_odd_components_are_reported() {
        let dem = mechanism_dem(vec![
            DemMechanism { p: 0.1, dets: vec![0, 1], obs: vec![] },
            DemMechanism { p: 0.1, dets: vec![2, 3], obs: vec![] },
        ]);
        let g = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
        // Even total, but each component holds one defect: no pairing exists.
        assert!(matches!(
            mwpm_decode(&g, &[0, 2]),
            Err(DecoderError::UnreachableDefect(_))
        ));
    }

    #[test]
    fn odd_clusters_merge_through_the_graph() {
        // Path graph 0-1-...-13; two well-separated defect trios must merge
        // across the gap once each trio's local search comes up odd.
        let mut mechs = Vec::new();
        for i in 0..13u32 {
            mechs.push(DemMechanism { p: 0.01, dets: vec![i, i + 1], obs: vec![] });
        }
        let g = dem_to_matching_graph(&mechanism_dem(mechs), WeightMode::Derived).unwrap();
        let defects = [0, 1, 2, 11, 12, 13];
        let opts = DecodeOptions { dense_limit: 2, neighbors: 2 };
        let out = mwpm_decode_with(&g, &defects, &opts).unwrap();
        let brute = brute_force_decode(&g, &defects).unwrap();
        assert_eq!(out.cost, brute.cost);
    }

    #[test]
    fn undecomposable_hyperedge_is_fatal() {
        let dem = mechanism_dem(vec![DemMechanism { p: 0.1, dets: vec![0, 1, 2], obs: vec![] }]);
        match dem_to_matching_graph(&dem, WeightMode::Derived) {
            Err(DecoderError::UndecomposableHyperedge { dets, .. }) => {
                assert_eq!(dets, vec![0, 1, 2]);
            }
            other => panic!("expected UndecomposableHyperedge, got {other:?}"),
        }
    }

    #[test]
    fn hyperedge_decomposes_over_existing_edges() {
        // {0,1} and {2,3} exist; the 4-detector mechanism with a fresh
        // observable must land on those edges and keep its logical action.
        let dem = mechanism_dem(vec![
            DemMechanism { p: 0.01, dets: vec![0, 1], obs: vec![] },
            DemMechanism { p: 0.01, dets: vec![2, 3], obs: vec![] },
            DemMechanism { p: 0.02, dets: vec![0, 1, 2, 3], obs: vec![0] },
        ]);
        let g = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
        let out = mwpm_decode(&g, &[0, 1, 2, 3]).unwrap();
        assert_eq!(out.obs_flips, vec![0], "hyperedge observable action preserved");
        assert_eq!(out.pairs.len(), 2);
    }

    #[test]
    fn erased_syndromes_decode_at_zero_cost() {
        let t = hex_torus();
        let c = build_floquet_circuit(&t, &ScheduleConfig::new(3)).unwrap();
        let pattern = erasure_pattern(&c, 0.4, 5);
        assert!(pattern.iter().any(|&e| e), "want at least one erased check");
        let erased = erase_instance(&c, &pattern);
        let dem = build_dem(&erased);
        let g = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
        let (dets, _) = dem_sample(&dem, 32, 99);
        let mut nonempty = 0;
        for s in 0..dets.rows() {
            let defects: Vec<u32> = dets.ones_in_row(s).map(|d| d as u32).collect();
            if !defects.is_empty() {
                nonempty += 1;
            }
            let out = mwpm_decode(&g, &defects).unwrap();
            assert_eq!(out.cost, 0, "erasure-only syndromes are free to correct");
        }
        assert!(nonempty > 0, "expected some nontrivial erasure syndromes");
    }

    #[test]
    fn uniform_weights_count_matching_edges() {
        let dem = mechanism_dem(vec![
            DemMechanism { p: 0.4, dets: vec![0, 1], obs: vec![] },
            DemMechanism { p: 0.001, dets: vec![1, 2], obs: vec![] },
            DemMechanism { p: 0.4, dets: vec![2, 3], obs: vec![] },
            DemMechanism { p: 0.001, dets: vec![0, 3], obs: vec![1] },
        ]);
        // Derived weights prefer the two likely edges; uniform weights tie
        // everything, so the cost is just the scale times the edge count.
        let derived = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
        let out = mwpm_decode(&derived, &[0, 1, 2, 3]).unwrap();
        assert_eq!(out.obs_flips, Vec::<u32>::new());
        let uniform = dem_to_matching_graph(&dem, WeightMode::Uniform).unwrap();
        let out = mwpm_decode(&uniform, &[0, 1, 2, 3]).unwrap();
        assert_eq!(out.cost, 2 * WEIGHT_SCALE as i64);
    }

    proptest::proptest! {
        #[test]
        fn matching_is_optimal_on_random_graphlike_dems(
            mechs in proptest::collection::vec(
                (0u32..10, 0u32..10, 0.01f64..0.45, proptest::collection::vec(0u32..3, 0..2)),
                4..20,
            ),
            picks in proptest::collection::vec(0usize..64, 2..8),
        ) {
            let mechanisms: Vec<DemMechanism> = mechs
                .into_iter()
                .map(|(a, b, p, obs)| {
                    let mut obs = obs;
                    obs.sort_unstable();
                    obs.dedup();
                    let dets = if a == b { vec![a] } else { vec![a.min(b), a.max(b)] };
                    DemMechanism { p, dets, obs }
                })
                .collect();
            let dem = mechanism_dem(mechanisms);
            let g = dem_to_matching_graph(&dem, WeightMode::Derived).unwrap();
            let mut defects: Vec<u32> = picks.iter().map(|&i| (i as u32) % g.n_dets()).collect();
            defects.sort_unstable();
            defects.dedup();
            if defects.len() % 2 == 1 && !g.has_boundary() {
                defects.pop();
            }
            let fast = mwpm_decode(&g, &defects);
            let brute = brute_force_decode(&g, &defects);
            match (fast, brute) {
                (Ok(f), Ok(b)) => {
                    proptest::prop_assert_eq!(f.cost, b.cost);
                    let matched: usize =
                        f.pairs.iter().map(|(_, x)| 1 + usize::from(x.is_some())).sum();
                    proptest::prop_assert_eq!(matched, defects.len());
                }
                (Err(_), Err(_)) => {}
                (f, b) => {
                    return Err(proptest::test_runner::TestCaseError::fail(format!(
                        "solver disagreement: {f:?} vs {b:?}"
                    )));
                }
            }
        }
    }

    #[test]
    fn decode_shots_is_deterministic_and_monotone() {
        let low = torus_dem(0.002, 3);
        let high = torus_dem(0.03, 3);
        let g_low = dem_to_matching_graph(&low, WeightMode::Derived).unwrap();
        let g_high = dem_to_matching_graph(&high, WeightMode::Derived).unwrap();
        let t = hex_torus();
        let shots = 400;
        let mut failures = Vec::new();
        for (g, p) in [(&g_low, 0.002), (&g_high, 0.03)] {
            let c = build_floquet_circuit(&t, &ScheduleConfig::new(3)).unwrap();
            let noisy = apply_phenomenological(&c, p);
            let (dets, obs) = frame_sample(&noisy, shots, 42);
            let preds = decode_shots(g, &dets).unwrap();
            let again = decode_shots(g, &dets).unwrap();
            assert_eq!(preds.to_bytes(0), again.to_bytes(0), "decode must be deterministic");
            let mut bad = 0;
            for s in 0..shots {
                let mismatch = (0..obs.cols()).any(|o| preds.get(s, o) != obs.get(s, o));
                bad += usize::from(mismatch);
            }
            failures.push(bad);
        }
        assert!(
            failures[0] <= failures[1],
            "decoding failures should grow with the error rate: {failures:?}"
        );
    }
}
