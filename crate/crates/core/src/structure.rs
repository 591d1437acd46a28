//! Canonical graph extraction and block (biconnected component)
//! decomposition.

use serde::Serialize;

use crate::error::{Result, RmdpError, SupportConflict};
use crate::mdp::MdpInstance;

/// A simple undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl CanonicalGraph {
    /// Builds a simple graph; edges are stored as `(min, max)` pairs in
    /// ascending order.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list = Vec::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(RmdpError::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for {n} vertices"
                )));
            }
            if i == j {
                return Err(RmdpError::InvalidGraph(format!("self-loop at {i}")));
            }
            list.push((i.min(j), i.max(j)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(RmdpError::InvalidGraph(format!("duplicate edge {:?}", w[0])));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in &list {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            n,
            edges: list,
            adjacency,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }
}

/// Extracts the graph whose edges are the off-diagonal pairs that are
/// positive under every action.
///
/// Fails with every offending `(i, j, u, u')` when supports disagree across
/// actions, or when the support is not symmetric or not connected.
pub fn canonical_graph(inst: &MdpInstance, support_threshold: f64) -> Result<CanonicalGraph> {
    let n = inst.n_states();
    let m = inst.n_actions();
    let positive = |i: usize, j: usize, u: usize| inst.p(i, j, u) > support_threshold;

    let mut conflicts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for u in 0..m {
                for v in 0..m {
                    if positive(i, j, u) && !positive(i, j, v) {
                        conflicts.push(SupportConflict {
                            from: i,
                            to: j,
                            with_support: u,
                            without_support: v,
                        });
                    }
                }
            }
        }
    }
    if !conflicts.is_empty() {
        return Err(RmdpError::SupportMismatch(conflicts));
    }

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            match (positive(i, j, 0), positive(j, i, 0)) {
                (true, true) => edges.push((i, j)),
                (false, false) => {}
                (true, false) => return Err(RmdpError::AsymmetricSupport { from: i, to: j }),
                (false, true) => return Err(RmdpError::AsymmetricSupport { from: j, to: i }),
            }
        }
    }
    let g = CanonicalGraph::new(n, edges)?;
    if !g.is_connected() {
        return Err(RmdpError::Disconnected);
    }
    Ok(g)
}

/// Blocks, articulation points and the block-cut tree of a connected graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockStructure {
    /// Vertex sets, each ascending; blocks sorted lexicographically, so the
    /// block containing vertex 0 comes first.
    pub blocks: Vec<Vec<usize>>,
    /// Edges of each block, ascending.
    pub block_edges: Vec<Vec<(usize, usize)>>,
    pub articulation_points: Vec<usize>,
    /// Per vertex, the indices of the blocks containing it.
    pub membership: Vec<Vec<usize>>,
    /// Edges `(block, articulation point)` of the bipartite block-cut tree.
    pub tree: Vec<(usize, usize)>,
}

impl BlockStructure {
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_articulation(&self, v: usize) -> bool {
        self.membership[v].len() >= 2
    }

    /// Vertices of block `b` that are not articulation points.
    pub fn interior(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.blocks[b]
            .iter()
            .copied()
            .filter(move |&v| !self.is_articulation(v))
    }

    /// Position of `v` inside block `b`, if present.
    pub fn local_index(&self, b: usize, v: usize) -> Option<usize> {
        self.blocks[b].binary_search(&v).ok()
    }
}

type VertexEdgeSet = (Vec<usize>, Vec<(usize, usize)>);

/// Hopcroft-Tarjan lowpoint decomposition with an explicit stack.
pub fn block_decomposition(g: &CanonicalGraph) -> Result<BlockStructure> {
    let n = g.n_vertices();
    if !g.is_connected() {
        return Err(RmdpError::Disconnected);
    }
    const UNSET: usize = usize::MAX;
    let mut disc = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut edge_stack: Vec<(usize, usize)> = Vec::new();
    let mut raw_blocks: Vec<Vec<(usize, usize)>> = Vec::new();

    if n > 0 {
        let mut time = 0;
        disc[0] = time;
        low[0] = time;
        time += 1;
        // (vertex, parent, next neighbor position)
        let mut frames: Vec<(usize, usize, usize)> = vec![(0, UNSET, 0)];
        while let Some(&mut (v, parent, ref mut pos)) = frames.last_mut() {
            if let Some(&w) = g.neighbors(v).get(*pos) {
                *pos += 1;
                if disc[w] == UNSET {
                    edge_stack.push((v, w));
                    disc[w] = time;
                    low[w] = time;
                    time += 1;
                    frames.push((w, v, 0));
                } else if w != parent && disc[w] < disc[v] {
                    edge_stack.push((v, w));
                    low[v] = low[v].min(disc[w]);
                }
                continue;
            }
            frames.pop();
            if parent != UNSET {
                low[parent] = low[parent].min(low[v]);
                if low[v] >= disc[parent] {
                    let mut block = Vec::new();
                    while let Some(e) = edge_stack.pop() {
                        block.push(e);
                        if e == (parent, v) {
                            break;
                        }
                    }
                    raw_blocks.push(block);
                }
            }
        }
    }

    let mut blocks: Vec<VertexEdgeSet> = raw_blocks
        .into_iter()
        .map(|edges| {
            let mut edges: Vec<(usize, usize)> =
                edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
            edges.sort_unstable();
            let mut vertices: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
            vertices.sort_unstable();
            vertices.dedup();
            (vertices, edges)
        })
        .collect();
    if n == 1 {
        blocks.push((vec![0], Vec::new()));
    }
    blocks.sort();

    let mut membership = vec![Vec::new(); n];
    for (b, (vertices, _)) in blocks.iter().enumerate() {
        for &v in vertices {
            membership[v].push(b);
        }
    }
    let articulation_points: Vec<usize> = (0..n).filter(|&v| membership[v].len() >= 2).collect();
    let mut tree = Vec::new();
    for &a in &articulation_points {
        for &b in &membership[a] {
            tree.push((b, a));
        }
    }
    tree.sort_unstable();
    let (blocks, block_edges) = blocks.into_iter().unzip();
    Ok(BlockStructure {
        blocks,
        block_edges,
        articulation_points,
        membership,
        tree,
    })
}

pub fn is_biconnected(g: &CanonicalGraph) -> Result<bool> {
    Ok(block_decomposition(g)?.n_blocks() == 1)
}

/// `|E| = |V| - 1`; assumes `g` is connected.
pub fn is_tree(g: &CanonicalGraph) -> bool {
    g.edges().len() + 1 == g.n_vertices()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn path3() -> CanonicalGraph {
        CanonicalGraph::new(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn triangle() -> CanonicalGraph {
        CanonicalGraph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn rejects_non_simple_graphs() {
        assert!(CanonicalGraph::new(2, [(0, 0)]).is_err());
        assert!(CanonicalGraph::new(2, [(0, 1), (1, 0)]).is_err());
        assert!(CanonicalGraph::new(2, [(0, 2)]).is_err());
    }

    #[test]
    fn star_canonical_graph() {
        let g = canonical_graph(&fixtures::two_leaf_star(0.3, 0.7), 1e-12).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
    }

    #[test]
    fn support_mismatch_is_reported_in_full() {
        let inst = fixtures::two_leaf_star(0.3, 0.7);
        let mut kernels = inst.kernels().to_vec();
        // action 1 never moves 1 -> 2
        kernels[1][(0, 1)] = 0.0;
        kernels[1][(0, 2)] = 1.0;
        let bad = crate::MdpInstance::new(
            inst.states().to_vec(),
            inst.actions().to_vec(),
            kernels,
            inst.rewards().clone(),
        )
        .unwrap();
        match canonical_graph(&bad, 1e-12) {
            Err(RmdpError::SupportMismatch(list)) => {
                assert_eq!(
                    list,
                    vec![SupportConflict {
                        from: 0,
                        to: 1,
                        with_support: 0,
                        without_support: 1
                    }]
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nine_vertex_blocks() {
        let bs = block_decomposition(&fixtures::nine_vertex_graph()).unwrap();
        let expected: Vec<Vec<usize>> = fixtures::NINE_VERTEX_BLOCKS
            .iter()
            .map(|b| b.iter().map(|v| v - 1).collect())
            .collect();
        assert_eq!(bs.blocks, expected);
        assert_eq!(bs.articulation_points, vec![1, 2, 5]);
        assert_eq!(bs.membership[5], vec![2, 3, 4]);
        assert!(!is_biconnected(&fixtures::nine_vertex_graph()).unwrap());
        assert!(!is_tree(&fixtures::nine_vertex_graph()));
    }

    #[test]
    fn small_cases() {
        let edge = CanonicalGraph::new(2, [(0, 1)]).unwrap();
        let bs = block_decomposition(&edge).unwrap();
        assert_eq!(bs.blocks, vec![vec![0, 1]]);
        assert!(bs.articulation_points.is_empty());

        let bs = block_decomposition(&path3()).unwrap();
        assert_eq!(bs.blocks, vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(bs.articulation_points, vec![1]);

        assert!(is_biconnected(&triangle()).unwrap());
        assert!(!is_biconnected(&path3()).unwrap());
        assert!(is_tree(&path3()));
        assert!(!is_tree(&triangle()));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let g = CanonicalGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(block_decomposition(&g), Err(RmdpError::Disconnected));
    }

    /// Articulation points by deleting each vertex and testing connectivity.
    fn brute_force_articulation(g: &CanonicalGraph) -> Vec<usize> {
        let n = g.n_vertices();
        (0..n)
            .filter(|&v| {
                if n <= 2 {
                    return false;
                }
                let start = if v == 0 { 1 } else { 0 };
                let mut seen = vec![false; n];
                seen[v] = true;
                seen[start] = true;
                let mut stack = vec![start];
                while let Some(x) = stack.pop() {
                    for &y in g.neighbors(x) {
                        if !seen[y] {
                            seen[y] = true;
                            stack.push(y);
                        }
                    }
                }
                seen.iter().any(|s| !s)
            })
            .collect()
    }

    fn connected_graph() -> impl Strategy<Value = CanonicalGraph> {
        (2usize..=10)
            .prop_flat_map(|n| {
                (
                    Just(n),
                    proptest::collection::vec(0usize..1000, n - 1),
                    proptest::collection::vec(any::<bool>(), n * (n - 1) / 2),
                )
            })
            .prop_map(|(n, parents, extra)| {
                let mut edges = std::collections::BTreeSet::new();
                for v in 1..n {
                    let p = parents[v - 1] % v;
                    edges.insert((p, v));
                }
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        // sparse extras so cut vertices stay common
                        if extra[k] && (i * 7 + j * 3) % 4 == 0 {
                            edges.insert((i, j));
                        }
                        k += 1;
                    }
                }
                CanonicalGraph::new(n, edges).unwrap()
            })
    }

    proptest! {
        #[test]
        fn decomposition_invariants(g in connected_graph()) {
            let bs = block_decomposition(&g).unwrap();
            prop_assert_eq!(bs.articulation_points.clone(), brute_force_articulation(&g));

            // every edge in exactly one block
            let mut all: Vec<(usize, usize)> = bs.block_edges.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(&all[..], g.edges());

            // union of vertex sets is V
            let mut verts: Vec<usize> = bs.blocks.iter().flatten().copied().collect();
            verts.sort_unstable();
            verts.dedup();
            prop_assert_eq!(verts, (0..g.n_vertices()).collect::<Vec<_>>());

            // blocks meet in at most one vertex, an articulation point
            for a in 0..bs.n_blocks() {
                for b in (a + 1)..bs.n_blocks() {
                    let common: Vec<usize> = bs.blocks[a]
                        .iter()
                        .filter(|v| bs.blocks[b].contains(v))
                        .copied()
                        .collect();
                    prop_assert!(common.len() <= 1);
                    if let Some(&v) = common.first() {
                        prop_assert!(bs.is_articulation(v));
                    }
                }
            }
            if bs.n_blocks() > 1 {
                for b in 0..bs.n_blocks() {
                    prop_assert!(bs.blocks[b].iter().any(|&v| bs.is_articulation(v)));
                }
            }

            // block-cut tree: connected with (#nodes - 1) edges
            let nodes = bs.n_blocks() + bs.articulation_points.len();
            prop_assert_eq!(bs.tree.len() + 1, nodes);

            // each block induces a biconnected subgraph
            for edges in &bs.block_edges {
                let mut vs: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
                vs.sort_unstable();
                vs.dedup();
                let local = |v: usize| vs.binary_search(&v).unwrap();
                let sub = CanonicalGraph::new(
                    vs.len(),
                    edges.iter().map(|&(a, b)| (local(a), local(b))),
                ).unwrap();
                prop_assert!(brute_force_articulation(&sub).is_empty());
            }
        }

        #[test]
        fn tree_articulation_points_are_internal_vertices(
            parents in proptest::collection::vec(0usize..1000, 2..9)
        ) {
            let n = parents.len() + 1;
            let edges: Vec<(usize, usize)> =
                (1..n).map(|v| (parents[v - 1] % v, v)).collect();
            let g = CanonicalGraph::new(n, edges).unwrap();
            prop_assert!(is_tree(&g));
            let bs = block_decomposition(&g).unwrap();
            let internal: Vec<usize> = (0..n).filter(|&v| g.neighbors(v).len() >= 2).collect();
            prop_assert_eq!(bs.articulation_points, internal);
            prop_assert!(bs.blocks.iter().all(|b| b.len() == 2));
        }
    }
}
