//! Small reference instances used by tests, benches and the CLI docs.

use nalgebra::DMatrix;

use crate::mdp::MdpInstance;
use crate::structure::CanonicalGraph;

fn labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Three states, two actions: state 1 moves to 2 with probability `a`
/// (action 1) or `b` (action 2) and to 3 otherwise; states 2 and 3 always
/// return to 1. The canonical graph is the path 2 - 1 - 3, which is not
/// biconnected, yet the instance is reversible under every policy.
///
/// Rewards are `r(i, u) = 1` at state 1 and `0` elsewhere.
pub fn two_leaf_star(a: f64, b: f64) -> MdpInstance {
    let k = |p: f64| {
        DMatrix::from_row_slice(3, 3, &[0.0, p, 1.0 - p, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    };
    let rewards = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    MdpInstance::new(labels(3), labels(2), vec![k(a), k(b)], rewards)
        .expect("valid fixture")
}

/// Edges (1-based) of the nine-vertex graph with blocks
/// {1,2}, {2,3}, {3,5,6}, {4,6}, {6,7,8,9} and articulation points 2, 3, 6.
pub const NINE_VERTEX_EDGES: [(usize, usize); 10] = [
    (1, 2),
    (2, 3),
    (3, 5),
    (3, 6),
    (5, 6),
    (4, 6),
    (6, 7),
    (6, 8),
    (7, 9),
    (8, 9),
];

/// Blocks of [`NINE_VERTEX_EDGES`], 1-based.
pub const NINE_VERTEX_BLOCKS: [&[usize]; 5] = [&[1, 2], &[2, 3], &[3, 5, 6], &[4, 6], &[6, 7, 8, 9]];

pub fn nine_vertex_graph() -> CanonicalGraph {
    CanonicalGraph::new(9, NINE_VERTEX_EDGES.iter().map(|&(i, j)| (i - 1, j - 1)))
        .expect("valid fixture")
}
