//! Dependency graphs: construction, statistics and exact clique numbers.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::cluster_model::ClusterStructure;
use crate::error::{invalid, LabError, Result};

/// Components up to this many nodes get an exact clique number.
pub const EXACT_CLIQUE_CAP: usize = 64;

/// Undirected simple graph on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct DependencyGraph {
    n: usize,
    adj: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for DependencyGraph {
    type Error = LabError;

    fn try_from(r: GraphRepr) -> Result<Self> {
        DependencyGraph::new(r.n, r.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<DependencyGraph> for GraphRepr {
    fn from(g: DependencyGraph) -> Self {
        GraphRepr {
            n: g.n,
            edges: g.edges().map(|(i, j)| [i, j]).collect(),
        }
    }
}

impl DependencyGraph {
    /// Builds a graph from an edge list; duplicate edges collapse.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return invalid(format!("edge ({i}, {j}) out of range for n = {n}"));
            }
            if i == j {
                return invalid(format!("self-loop at node {i}"));
            }
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        Ok(Self { n, adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &w in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Named deterministic (or explicitly seeded) graph families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    /// Node 0 joined to every other node.
    Star { n: usize },
    /// Disjoint cliques over consecutive ranges.
    Cluster { sizes: Vec<usize> },
    Empty { n: usize },
    Complete { n: usize },
    /// Union of `degree` uniformly random perfect matchings (one node left out
    /// of each when `n` is odd); maximum degree is at most `degree`.
    RandomMatchings { n: usize, degree: usize, seed: u64 },
}

pub fn generate_graph(kind: &GraphKind) -> Result<DependencyGraph> {
    match kind {
        GraphKind::Star { n } => {
            need_nodes(*n)?;
            DependencyGraph::new(*n, (1..*n).map(|j| (0, j)))
        }
        GraphKind::Cluster { sizes } => {
            let cs = crate::cluster_model::build_structure(sizes)?;
            Ok(cluster_graph(&cs))
        }
        GraphKind::Empty { n } => {
            need_nodes(*n)?;
            DependencyGraph::new(*n, std::iter::empty())
        }
        GraphKind::Complete { n } => {
            need_nodes(*n)?;
            let n = *n;
            DependencyGraph::new(n, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))))
        }
        GraphKind::RandomMatchings { n, degree, seed } => {
            need_nodes(*n)?;
            Ok(random_matchings(*n, *degree, *seed))
        }
    }
}

fn need_nodes(n: usize) -> Result<()> {
    if n == 0 {
        return invalid("graph needs at least one node");
    }
    Ok(())
}

/// Graph whose cliques are the clusters of `cs`.
pub fn cluster_graph(cs: &ClusterStructure) -> DependencyGraph {
    let mut adj = vec![Vec::new(); cs.n()];
    for r in cs.ranges() {
        for i in r.clone() {
            adj[i].extend(r.clone().filter(|&j| j != i));
        }
    }
    DependencyGraph { n: cs.n(), adj }
}

fn random_matchings(n: usize, degree: usize, seed: u64) -> DependencyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(degree * n / 2);
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..degree {
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        edges.extend(perm.chunks_exact(2).map(|p| (p[0], p[1])));
    }
    DependencyGraph::new(n, edges).expect("matching edges are valid")
}

/// Degree and clique statistics of a dependency graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n: usize,
    pub edges: usize,
    pub d_max: usize,
    pub d_avg: f64,
    pub clique_number: usize,
    /// False when some component exceeded [`EXACT_CLIQUE_CAP`] and
    /// `clique_number` is only a greedy lower bound.
    pub clique_exact: bool,
    /// `d_max^2 d_avg / n`.
    pub sparsity_ratio: f64,
}

pub fn graph_stats(g: &DependencyGraph) -> GraphStats {
    let n = g.n();
    let d_max = (0..n).map(|i| g.degree(i)).max().unwrap_or(0);
    let d_avg = if n == 0 {
        0.0
    } else {
        2.0 * g.edge_count() as f64 / n as f64
    };
    let (clique_number, clique_exact) = clique_number(g);
    GraphStats {
        n,
        edges: g.edge_count(),
        d_max,
        d_avg,
        clique_number,
        clique_exact,
        sparsity_ratio: (d_max * d_max) as f64 * d_avg / n.max(1) as f64,
    }
}

/// Clique number: exact per component of at most [`EXACT_CLIQUE_CAP`]
/// nodes, greedy lower bound for larger components.
pub fn clique_number(g: &DependencyGraph) -> (usize, bool) {
    let mut best = usize::from(g.n() > 0);
    let mut exact = true;
    for comp in g.components() {
        if comp.len() <= best {
            continue;
        }
        if comp.len() <= EXACT_CLIQUE_CAP {
            best = best.max(exact_clique(g, &comp));
        } else {
            exact = false;
            best = best.max(greedy_clique(g, &comp));
        }
    }
    (best, exact)
}

/// Branch and bound over 64-bit vertex sets with a greedy-colouring bound.
fn exact_clique(g: &DependencyGraph, nodes: &[usize]) -> usize {
    let k = nodes.len();
    debug_assert!(k <= 64);
    let local: std::collections::HashMap<usize, usize> =
        nodes.iter().enumerate().map(|(a, &v)| (v, a)).collect();
    let mut nbr = vec![0u64; k];
    for (a, &v) in nodes.iter().enumerate() {
        for w in g.neighbors(v) {
            if let Some(&b) = local.get(w) {
                nbr[a] |= 1u64 << b;
            }
        }
    }
    let all = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    let mut best = 1;
    expand(&nbr, 0, all, &mut best);
    best
}

fn expand(nbr: &[u64], size: usize, mut cand: u64, best: &mut usize) {
    if cand == 0 {
        *best = (*best).max(size);
        return;
    }
    let (order, colours) = colour_sort(nbr, cand);
    for idx in (0..order.len()).rev() {
        if size + colours[idx] <= *best {
            return;
        }
        let v = order[idx];
        expand(nbr, size + 1, cand & nbr[v], best);
        cand &= !(1u64 << v);
    }
}

/// Greedy sequential colouring of `cand`; returns vertices in colour order
/// with the running colour count, an upper bound on the clique within each prefix.
fn colour_sort(nbr: &[u64], cand: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order = Vec::with_capacity(cand.count_ones() as usize);
    let mut colours = Vec::with_capacity(order.capacity());
    let mut uncoloured = cand;
    let mut colour = 0;
    while uncoloured != 0 {
        colour += 1;
        let mut q = uncoloured;
        while q != 0 {
            let v = q.trailing_zeros() as usize;
            q &= !(1u64 << v);
            q &= !nbr[v];
            uncoloured &= !(1u64 << v);
            order.push(v);
            colours.push(colour);
        }
    }
    (order, colours)
}

fn greedy_clique(g: &DependencyGraph, nodes: &[usize]) -> usize {
    let mut by_degree = nodes.to_vec();
    by_degree.sort_by_key(|&v| std::cmp::Reverse(g.degree(v)));
    let mut best = 1;
    for &seed in by_degree.iter().take(256) {
        let mut clique = vec![seed];
        let mut cand: Vec<usize> = g.neighbors(seed).to_vec();
        cand.sort_by_key(|&v| std::cmp::Reverse(g.degree(v)));
        for v in cand {
            if clique.iter().all(|&u| g.has_edge(u, v)) {
                clique.push(v);
            }
        }
        best = best.max(clique.len());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster_model::build_structure;

    #[test]
    fn star_stats() {
        let g = generate_graph(&GraphKind::Star { n: 5 }).unwrap();
        let s = graph_stats(&g);
        assert_eq!((s.d_max, s.clique_number, s.clique_exact), (4, 2, true));
        assert!((s.d_avg - 1.6).abs() < 1e-15);
        assert!((s.sparsity_ratio - 16.0 * 1.6 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn complete_graph_clique() {
        for k in 1..=10 {
            let g = generate_graph(&GraphKind::Complete { n: k }).unwrap();
            assert_eq!(graph_stats(&g).clique_number, k);
            assert_eq!(g.edge_count(), k * (k - 1) / 2);
        }
        assert_eq!(generate_graph(&GraphKind::Complete { n: 4 }).unwrap().edge_count(), 6);
    }

    #[test]
    fn cluster_graph_stats() {
        let g = generate_graph(&GraphKind::Cluster { sizes: vec![3, 4] }).unwrap();
        let s = graph_stats(&g);
        assert_eq!((s.clique_number, s.d_max), (4, 3));
        let pairs = generate_graph(&GraphKind::Cluster { sizes: vec![2, 2] }).unwrap();
        assert_eq!(pairs.edges().collect::<Vec<_>>(), vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn degenerate_star_and_bad_params() {
        let g = generate_graph(&GraphKind::Star { n: 1 }).unwrap();
        assert_eq!((g.n(), g.edge_count()), (1, 0));
        assert!(generate_graph(&GraphKind::Empty { n: 0 }).is_err());
        assert!(generate_graph(&GraphKind::Cluster { sizes: vec![] }).is_err());
        assert!(DependencyGraph::new(3, [(0, 0)]).is_err());
        assert!(DependencyGraph::new(3, [(0, 3)]).is_err());
    }

    #[test]
    fn matchings_respect_degree_bound() {
        let g = generate_graph(&GraphKind::RandomMatchings { n: 1001, degree: 3, seed: 7 }).unwrap();
        assert!(graph_stats(&g).d_max <= 3);
        let again = generate_graph(&GraphKind::RandomMatchings { n: 1001, degree: 3, seed: 7 }).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn large_components_fall_back_to_greedy() {
        let g = generate_graph(&GraphKind::Complete { n: 70 }).unwrap();
        let s = graph_stats(&g);
        assert_eq!(s.clique_number, 70);
        assert!(!s.clique_exact);
        // many small components stay exact even when n is large
        let cs = build_structure(&vec![5; 40]).unwrap();
        let s = graph_stats(&cluster_graph(&cs));
        assert_eq!((s.clique_number, s.clique_exact), (5, true));
    }

    #[test]
    fn json_edge_list() {
        let g: DependencyGraph = serde_json::from_str(r#"{"n":4,"edges":[[0,1],[2,1]]}"#).unwrap();
        assert_eq!(serde_json::to_string(&g).unwrap(), r#"{"n":4,"edges":[[0,1],[1,2]]}"#);
    }
}
