//! Undirected weighted graphs and the shortest-path queries built on them.
//!
//! Ties between equal-weight paths are broken by the lexicographically
//! smallest sequence of node ids, so every query is reproducible regardless
//! of insertion order or thread scheduling.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::OnceLock;

use crate::{par, Error, Result};

/// Relative slack under which two path weights count as equal.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Default)]
pub struct WeightedGraph {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<Vec<(usize, f64)>>,
    edge_count: usize,
    rank: OnceLock<Vec<usize>>,
}

/// A path as node indices into its graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<usize>,
    pub total_weight: f64,
}

impl Path {
    pub fn interior(&self) -> &[usize] {
        if self.nodes.len() <= 2 {
            &[]
        } else {
            &self.nodes[1..self.nodes.len() - 1]
        }
    }

    pub fn hop_count(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn labels<'g>(&self, g: &'g WeightedGraph) -> Vec<&'g str> {
        self.nodes.iter().map(|&n| g.label(n)).collect()
    }
}

#[derive(Clone, Copy)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    // min-heap on distance
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Nodes and edges hidden from a query.
#[derive(Debug, Clone, Default)]
pub struct Exclusions {
    nodes: HashSet<usize>,
    edges: HashSet<(usize, usize)>,
}

impl Exclusions {
    pub fn node(&mut self, n: usize) {
        self.nodes.insert(n);
    }

    pub fn edge(&mut self, a: usize, b: usize) {
        self.edges.insert((a.min(b), a.max(b)));
    }

    fn blocks_node(&self, n: usize) -> bool {
        self.nodes.contains(&n)
    }

    fn blocks_edge(&self, a: usize, b: usize) -> bool {
        !self.edges.is_empty() && self.edges.contains(&(a.min(b), a.max(b)))
    }
}

impl WeightedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut g = Self::new();
        for id in ids {
            g.add_node(id)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self, id: impl Into<String>) -> Result<usize> {
        let id = id.into();
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        let n = self.labels.len();
        self.index.insert(id.clone(), n);
        self.labels.push(id);
        self.adj.push(Vec::new());
        self.rank = OnceLock::new();
        Ok(n)
    }

    /// Adds an undirected edge. A repeated edge keeps the smaller weight.
    pub fn add_edge(&mut self, a: usize, b: usize, weight: f64) -> Result<()> {
        if a >= self.labels.len() || b >= self.labels.len() {
            return Err(Error::UnknownNode(format!("#{}", a.max(b))));
        }
        if a == b {
            return Err(Error::param(format!("self-loop on `{}`", self.labels[a])));
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::param(format!("edge weight must be positive, got {weight}")));
        }
        if let Some(e) = self.adj[a].iter_mut().find(|e| e.0 == b) {
            if weight < e.1 {
                e.1 = weight;
                self.adj[b].iter_mut().find(|e| e.0 == a).unwrap().1 = weight;
            }
            return Ok(());
        }
        self.adj[a].push((b, weight));
        self.adj[b].push((a, weight));
        self.edge_count += 1;
        Ok(())
    }

    pub fn add_edge_by_id(&mut self, a: &str, b: &str, weight: f64) -> Result<()> {
        let (a, b) = (self.node(a)?, self.node(b)?);
        self.add_edge(a, b, weight)
    }

    pub fn node(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn label(&self, n: usize) -> &str {
        &self.labels[n]
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, n: usize) -> &[(usize, f64)] {
        &self.adj[n]
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adj[a].iter().find(|e| e.0 == b).map(|e| e.1)
    }

    /// Edges as `(a, b, weight)` with `a < b`, sorted by index.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<_> = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(a, nbrs)| nbrs.iter().filter(move |e| a < e.0).map(move |e| (a, e.0, e.1)))
            .collect();
        out.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        out
    }

    fn rank(&self) -> &[usize] {
        self.rank.get_or_init(|| {
            let mut order: Vec<usize> = (0..self.labels.len()).collect();
            order.sort_by(|&a, &b| self.labels[a].cmp(&self.labels[b]));
            let mut rank = vec![0; order.len()];
            for (r, n) in order.into_iter().enumerate() {
                rank[n] = r;
            }
            rank
        })
    }

    /// Single-source Dijkstra; unreachable nodes are `f64::INFINITY`.
    pub fn distances_from(&self, src: usize, ex: &Exclusions) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.labels.len()];
        if ex.blocks_node(src) {
            return dist;
        }
        dist[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem { dist: 0.0, node: src });
        while let Some(HeapItem { dist: d, node: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adj[u] {
                if ex.blocks_node(v) || ex.blocks_edge(u, v) {
                    continue;
                }
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(HeapItem { dist: nd, node: v });
                }
            }
        }
        dist
    }

    /// Minimum-weight path, or `None` when `dst` is unreachable.
    pub fn shortest_path(&self, src: usize, dst: usize) -> Option<Path> {
        self.shortest_path_excluding(src, dst, &Exclusions::default())
    }

    pub fn shortest_path_by_id(&self, src: &str, dst: &str) -> Result<Option<Path>> {
        Ok(self.shortest_path(self.node(src)?, self.node(dst)?))
    }

    pub fn shortest_path_excluding(&self, src: usize, dst: usize, ex: &Exclusions) -> Option<Path> {
        if src == dst {
            return Some(Path {
                nodes: vec![src],
                total_weight: 0.0,
            });
        }
        if ex.blocks_node(src) || ex.blocks_node(dst) {
            return None;
        }
        let to_dst = self.distances_from(dst, ex);
        let best = to_dst[src];
        if !best.is_finite() {
            return None;
        }
        // Walk forward, always stepping to the smallest-ranked neighbor that
        // still lies on some minimum-weight continuation.
        let rank = self.rank();
        let limit = best * (1.0 + TIE_EPS) + TIE_EPS;
        let mut nodes = vec![src];
        let mut walked = 0.0;
        let mut u = src;
        while u != dst {
            let next = self.adj[u]
                .iter()
                .filter(|&&(v, w)| {
                    !ex.blocks_node(v) && !ex.blocks_edge(u, v) && walked + w + to_dst[v] <= limit
                })
                .min_by_key(|&&(v, _)| rank[v])
                .copied();
            let (v, w) = next?;
            walked += w;
            nodes.push(v);
            u = v;
            if nodes.len() > self.labels.len() {
                return None;
            }
        }
        Some(Path {
            nodes,
            total_weight: walked,
        })
    }

    /// Shortest-path weights between every pair of `sites`, computed with
    /// one Dijkstra per source.
    pub fn all_pairs_site_paths(&self, sites: &[usize]) -> SiteMatrix {
        let rows = par::map_slice(sites, |&s| {
            let d = self.distances_from(s, &Exclusions::default());
            sites
                .iter()
                .map(|&t| if d[t].is_finite() { Some(d[t]) } else { None })
                .collect::<Vec<_>>()
        });
        let n = sites.len();
        let mut dist = vec![None; n * n];
        for i in 0..n {
            dist[i * n + i] = Some(0.0);
            for j in (i + 1)..n {
                // symmetrize from the lower index so both triangles agree bit for bit
                dist[i * n + j] = rows[i][j];
                dist[j * n + i] = rows[i][j];
            }
        }
        SiteMatrix {
            sites: sites.to_vec(),
            dist,
        }
    }

    /// Successively shortest paths whose interior nodes are pairwise disjoint.
    ///
    /// After each path its interior nodes are removed; a direct `src`-`dst`
    /// edge has no interior, so that edge itself is removed instead.
    pub fn tower_disjoint_paths(&self, src: usize, dst: usize, n: usize) -> Vec<Path> {
        let mut ex = Exclusions::default();
        let mut out = Vec::new();
        if src == dst {
            return out;
        }
        while out.len() < n {
            let Some(path) = self.shortest_path_excluding(src, dst, &ex) else {
                break;
            };
            if path.nodes.len() == 2 {
                ex.edge(src, dst);
            }
            for &t in path.interior() {
                ex.node(t);
            }
            out.push(path);
        }
        out
    }

    /// Whether every pair of nodes is connected.
    pub fn is_connected(&self) -> bool {
        if self.labels.is_empty() {
            return true;
        }
        let d = self.distances_from(0, &Exclusions::default());
        d.iter().all(|x| x.is_finite())
    }

    /// Edges whose removal disconnects the graph (Tarjan low-link).
    pub fn bridges(&self) -> HashSet<(usize, usize)> {
        let n = self.labels.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut timer = 0;
        let mut out = HashSet::new();
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // iterative DFS: (node, parent, next neighbor index)
            let mut stack = vec![(root, usize::MAX, 0usize)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (u, parent, ref mut i)) = stack.last_mut() {
                if *i < self.adj[u].len() {
                    let v = self.adj[u][*i].0;
                    *i += 1;
                    if v == parent {
                        continue;
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, u, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if parent != usize::MAX {
                        low[parent] = low[parent].min(low[u]);
                        if low[u] > disc[parent] {
                            out.insert((u.min(parent), u.max(parent)));
                        }
                    }
                }
            }
        }
        out
    }

    /// Copy of the graph without the edge `a`-`b`.
    pub fn without_edge(&self, a: usize, b: usize) -> Self {
        let mut g = self.clone();
        let before = g.adj[a].len();
        g.adj[a].retain(|e| e.0 != b);
        g.adj[b].retain(|e| e.0 != a);
        if g.adj[a].len() != before {
            g.edge_count -= 1;
        }
        g
    }
}

/// Dense symmetric matrix of site-to-site shortest-path weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteMatrix {
    pub sites: Vec<usize>,
    dist: Vec<Option<f64>>,
}

impl SiteMatrix {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Weight between the `i`-th and `j`-th site; `None` when disconnected.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.dist[i * self.sites.len() + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> WeightedGraph {
        let mut g = WeightedGraph::with_nodes(["a", "b", "c"]).unwrap();
        g.add_edge(0, 1, 1.0).unwrap();
        g.add_edge(1, 2, 1.0).unwrap();
        g.add_edge(0, 2, 3.0).unwrap();
        g
    }

    pub(crate) fn random_graph(n: usize, p: f64, seed: u64) -> WeightedGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = WeightedGraph::with_nodes((0..n).map(|i| format!("n{i:03}"))).unwrap();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.gen::<f64>() < p {
                    // integer weights make ties common
                    g.add_edge(a, b, rng.gen_range(1..10) as f64).unwrap();
                }
            }
        }
        g
    }

    fn bellman_ford(g: &WeightedGraph, src: usize) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; g.node_count()];
        d[src] = 0.0;
        let edges = g.edges();
        for _ in 0..g.node_count() {
            for &(a, b, w) in &edges {
                if d[a] + w < d[b] {
                    d[b] = d[a] + w;
                }
                if d[b] + w < d[a] {
                    d[a] = d[b] + w;
                }
            }
        }
        d
    }

    fn check_path(g: &WeightedGraph, p: &Path) {
        let mut sum = 0.0;
        for w in p.nodes.windows(2) {
            sum += g.edge_weight(w[0], w[1]).expect("consecutive nodes must be adjacent");
        }
        assert!((sum - p.total_weight).abs() < 1e-9);
    }

    #[test]
    fn trivial_and_triangle() {
        let g = triangle();
        let p = g.shortest_path(1, 1).unwrap();
        assert_eq!(p.nodes, vec![1]);
        assert_eq!(p.total_weight, 0.0);
        let p = g.shortest_path_by_id("a", "c").unwrap().unwrap();
        assert_eq!(p.labels(&g), vec!["a", "b", "c"]);
        assert_eq!(p.total_weight, 2.0);
        assert!(matches!(g.shortest_path_by_id("a", "zz"), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn rejects_bad_edges() {
        let mut g = triangle();
        assert!(g.add_edge(0, 0, 1.0).is_err());
        assert!(g.add_edge(0, 1, 0.0).is_err());
        assert!(g.add_edge(0, 1, f64::NAN).is_err());
        assert!(g.add_node("a").is_err());
    }

    #[test]
    fn ties_break_lexicographically() {
        // a-b-d and a-c-d both weigh 2; b < c
        let mut g = WeightedGraph::with_nodes(["d", "c", "b", "a"]).unwrap();
        g.add_edge_by_id("a", "c", 1.0).unwrap();
        g.add_edge_by_id("c", "d", 1.0).unwrap();
        g.add_edge_by_id("a", "b", 1.0).unwrap();
        g.add_edge_by_id("b", "d", 1.0).unwrap();
        let p = g.shortest_path_by_id("a", "d").unwrap().unwrap();
        assert_eq!(p.labels(&g), vec!["a", "b", "d"]);
        let p = g.shortest_path_by_id("d", "a").unwrap().unwrap();
        assert_eq!(p.labels(&g), vec!["d", "b", "a"]);
    }

    #[test]
    fn matches_bellman_ford_on_random_graphs() {
        for seed in 0..5 {
            let g = random_graph(50, 0.1, seed);
            for src in [0, 7, 23] {
                let oracle = bellman_ford(&g, src);
                for dst in 0..50 {
                    match g.shortest_path(src, dst) {
                        Some(p) => {
                            check_path(&g, &p);
                            assert!((p.total_weight - oracle[dst]).abs() < 1e-9);
                        }
                        None => assert!(oracle[dst].is_infinite()),
                    }
                }
            }
        }
    }

    #[test]
    fn all_pairs_examples() {
        let g = triangle();
        let m = g.all_pairs_site_paths(&[1]);
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(0, 0), Some(0.0));

        let mut g = WeightedGraph::with_nodes(["x", "y", "z"]).unwrap();
        g.add_edge(0, 1, 2.0).unwrap();
        let m = g.all_pairs_site_paths(&[0, 1, 2]);
        assert_eq!(m.get(0, 1), Some(2.0));
        assert_eq!(m.get(0, 2), None);
        assert_eq!(m.get(2, 2), Some(0.0));

        let g = random_graph(60, 0.08, 11);
        let sites: Vec<usize> = (0..60).step_by(3).collect();
        let m = g.all_pairs_site_paths(&sites);
        for (i, &s) in sites.iter().enumerate() {
            for (j, &t) in sites.iter().enumerate() {
                assert_eq!(m.get(i, j).is_some(), g.shortest_path(s, t).is_some());
                if let (Some(a), Some(p)) = (m.get(i, j), g.shortest_path(s, t)) {
                    assert!((a - p.total_weight).abs() < 1e-9);
                    assert_eq!(m.get(i, j), m.get(j, i));
                }
            }
        }
    }

    #[test]
    fn disjoint_single_interior() {
        let mut g = WeightedGraph::with_nodes(["s", "m", "t"]).unwrap();
        g.add_edge(0, 1, 1.0).unwrap();
        g.add_edge(1, 2, 1.0).unwrap();
        assert_eq!(g.tower_disjoint_paths(0, 2, 2).len(), 1);
    }

    #[test]
    fn disjoint_two_routes_in_order() {
        let mut g = WeightedGraph::with_nodes(["s", "a", "b", "t"]).unwrap();
        g.add_edge(0, 2, 3.0).unwrap();
        g.add_edge(2, 3, 4.0).unwrap();
        g.add_edge(0, 1, 2.0).unwrap();
        g.add_edge(1, 3, 3.0).unwrap();
        let paths = g.tower_disjoint_paths(0, 3, 5);
        let w: Vec<f64> = paths.iter().map(|p| p.total_weight).collect();
        assert_eq!(w, vec![5.0, 7.0]);
    }

    #[test]
    fn disjoint_direct_edge_used_once() {
        let mut g = WeightedGraph::with_nodes(["s", "a", "t"]).unwrap();
        g.add_edge(0, 2, 1.0).unwrap();
        g.add_edge(0, 1, 1.0).unwrap();
        g.add_edge(1, 2, 1.0).unwrap();
        let paths = g.tower_disjoint_paths(0, 2, 5);
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].nodes, vec![0, 2]);
        assert_eq!(paths[1].nodes, vec![0, 1, 2]);
    }

    #[test]
    fn disjoint_corridor_of_twenty_chains() {
        let mut g = WeightedGraph::with_nodes(["s", "t"]).unwrap();
        for c in 0..20 {
            let mut prev = 0;
            for k in 0..4 {
                let n = g.add_node(format!("c{c:02}k{k}")).unwrap();
                g.add_edge(prev, n, 10.0 + c as f64 * 0.5).unwrap();
                prev = n;
            }
            g.add_edge(prev, 1, 10.0 + c as f64 * 0.5).unwrap();
        }
        let paths = g.tower_disjoint_paths(0, 1, 25);
        assert_eq!(paths.len(), 20);
        assert!(paths.windows(2).all(|w| w[0].total_weight <= w[1].total_weight));
        let mut seen = HashSet::new();
        for p in &paths {
            for &t in p.interior() {
                assert!(seen.insert(t));
            }
        }
    }

    #[test]
    fn bridges_found() {
        // triangle plus pendant
        let mut g = triangle();
        let d = g.add_node("d").unwrap();
        g.add_edge(2, d, 1.0).unwrap();
        let b = g.bridges();
        assert_eq!(b.len(), 1);
        assert!(b.contains(&(2, 3)));
        assert!(g.is_connected());
        assert!(!g.without_edge(2, 3).is_connected());
    }

    proptest! {
        #[test]
        fn disjoint_paths_are_disjoint_and_sorted(seed in 0u64..500) {
            let g = random_graph(30, 0.2, seed);
            let paths = g.tower_disjoint_paths(0, 29, 6);
            let mut seen = HashSet::new();
            for p in &paths {
                check_path(&g, p);
                for &t in p.interior() {
                    prop_assert!(seen.insert(t));
                }
            }
            prop_assert!(paths.windows(2).all(|w| w[0].total_weight <= w[1].total_weight + 1e-9));
        }

        #[test]
        fn deterministic_under_relabeling_order(seed in 0u64..200) {
            let g = random_graph(25, 0.25, seed);
            let a = g.shortest_path(0, 24);
            let b = g.clone().shortest_path(0, 24);
            prop_assert_eq!(a, b);
        }
    }
}
