//! Structural parameters of reversible MDPs.
//!
//! Every reversible MDP is determined by its block structure together with
//!
//! * a zero-diagonal irreducible reversible kernel `P0(B)` on each block,
//! * move probabilities `rho(i, u) = 1 - p_ii(u)` in `(0, 1]`,
//! * at each articulation point `a` and action `u`, a split
//!   `nu_a(u, B) > 0` of the move probability over the blocks containing `a`,
//!
//! through `p_ij(u) = rho(i, u) nu_i(u, B) p0_ij(B)` for distinct `i, j` in
//! a common block `B`. This module extracts those parameters from an
//! instance, rebuilds instances from them, and glues the blockwise
//! stationary vectors into the stationary vector of a controlled chain.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::config::{self, Tolerances};
use crate::error::{Result, RmdpError};
use crate::mdp::{self, MdpInstance, Policy};
use crate::structure::{self, BlockStructure, CanonicalGraph};

/// Detailed-balance tolerance for block kernels supplied directly.
const BLOCK_BALANCE_TOL: f64 = 1e-10;

/// A connected graph with a positive symmetric weight per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    graph: CanonicalGraph,
    weights: Vec<f64>,
}

impl WeightedGraph {
    /// `weights[k]` belongs to `graph.edges()[k]`.
    pub fn new(graph: CanonicalGraph, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != graph.edges().len() {
            return Err(RmdpError::DimensionMismatch(format!(
                "{} weights for {} edges",
                weights.len(),
                graph.edges().len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(RmdpError::InvalidConfig(format!(
                "edge weights must be positive, got {w}"
            )));
        }
        if !graph.is_connected() {
            return Err(RmdpError::Disconnected);
        }
        Ok(Self { graph, weights })
    }

    /// Reads weights `s_ij = pi0_i p0_ij` off a zero-diagonal irreducible
    /// reversible kernel.
    pub fn from_kernel(p0: &DMatrix<f64>) -> Result<Self> {
        let pi0 = mdp::stationary_distribution(p0)?;
        let n = p0.nrows();
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if p0[(i, j)] > config::SUPPORT_THRESHOLD {
                    edges.push((i, j));
                    weights.push(pi0[i] * p0[(i, j)]);
                }
            }
        }
        Self::new(CanonicalGraph::new(n, edges)?, weights)
    }

    pub fn graph(&self) -> &CanonicalGraph {
        &self.graph
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `s_i = sum_j s_ij`.
    pub fn strengths(&self) -> DVector<f64> {
        let mut s = DVector::zeros(self.graph.n_vertices());
        for (&(i, j), &w) in self.graph.edges().iter().zip(&self.weights) {
            s[i] += w;
            s[j] += w;
        }
        s
    }

    /// `p0_ij = s_ij / s_i`.
    pub fn kernel(&self) -> DMatrix<f64> {
        let n = self.graph.n_vertices();
        let s = self.strengths();
        let mut p = DMatrix::zeros(n, n);
        for (&(i, j), &w) in self.graph.edges().iter().zip(&self.weights) {
            p[(i, j)] = w / s[i];
            p[(j, i)] = w / s[j];
        }
        p
    }

    /// `pi0_i = s_i / S`.
    pub fn stationary(&self) -> DVector<f64> {
        let s = self.strengths();
        let total = s.sum();
        s / total
    }
}

/// Factors of an instance whose canonical graph is biconnected:
/// `p_ij(u) = rho(i, u) p0_ij` off the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BiconnectedFactors {
    pub graph: CanonicalGraph,
    pub p0: DMatrix<f64>,
    pub pi0: DVector<f64>,
    pub rho: DMatrix<f64>,
}

fn move_probabilities(inst: &MdpInstance) -> DMatrix<f64> {
    let n = inst.n_states();
    DMatrix::from_fn(n, inst.n_actions(), |i, u| {
        (0..n).filter(|&j| j != i).map(|j| inst.p(i, j, u)).sum()
    })
}

/// Normalizes row `i` of every kernel over `targets` (excluding `i`) and
/// checks that the result does not depend on the action. Returns the
/// normalized row of action 0 and the per-action masses.
fn action_independent_row(
    inst: &MdpInstance,
    i: usize,
    targets: &[usize],
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mass = |u: usize| -> f64 {
        targets
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| inst.p(i, j, u))
            .sum()
    };
    let masses: Vec<f64> = (0..inst.n_actions()).map(mass).collect();
    let reference: Vec<f64> = targets
        .iter()
        .map(|&j| if j == i { 0.0 } else { inst.p(i, j, 0) / masses[0] })
        .collect();
    for (u, &mass_u) in masses.iter().enumerate().skip(1) {
        for (k, &j) in targets.iter().enumerate() {
            if j == i {
                continue;
            }
            let value = inst.p(i, j, u) / mass_u;
            if (value - reference[k]).abs() > tol {
                return Err(RmdpError::RatioMismatch {
                    state: i,
                    target: j,
                    action: u,
                    reference: 0,
                    value,
                    reference_value: reference[k],
                });
            }
        }
    }
    Ok((reference, masses))
}

fn reversible_stationary(p: &DMatrix<f64>, tol: f64, what: &str) -> Result<DVector<f64>> {
    let pi = mdp::stationary_distribution(p)?;
    let (i, j, gap) = mdp::balance_gap(p, &pi);
    if gap > tol {
        return Err(RmdpError::NotRmdp(format!(
            "{what} violates detailed balance at ({i}, {j}) by {gap:e}"
        )));
    }
    Ok(pi)
}

/// Splits a biconnected instance into one zero-diagonal reversible kernel
/// and per-state move probabilities.
pub fn factorize_biconnected(inst: &MdpInstance, tol: &Tolerances) -> Result<BiconnectedFactors> {
    let graph = structure::canonical_graph(inst, tol.support)?;
    if !structure::is_biconnected(&graph)? {
        return Err(RmdpError::NotBiconnected);
    }
    let n = inst.n_states();
    let targets: Vec<usize> = (0..n).collect();
    let mut p0 = DMatrix::zeros(n, n);
    for i in 0..n {
        let (row, _) = action_independent_row(inst, i, &targets, tol.ratio)?;
        for j in 0..n {
            p0[(i, j)] = row[j];
        }
    }
    let pi0 = reversible_stationary(&p0, tol.balance, "reference kernel")?;
    Ok(BiconnectedFactors {
        graph,
        p0,
        pi0,
        rho: move_probabilities(inst),
    })
}

/// Zero-diagonal reversible kernel of one block, in the block's local
/// (ascending) vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockKernel {
    pub vertices: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub psi: DVector<f64>,
}

impl BlockKernel {
    pub fn new(vertices: Vec<usize>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.shape() != (vertices.len(), vertices.len()) {
            return Err(RmdpError::InvalidFactorization(format!(
                "block kernel is {:?} for {} vertices",
                matrix.shape(),
                vertices.len()
            )));
        }
        let psi = reversible_stationary(&matrix, BLOCK_BALANCE_TOL, "block kernel")
            .map_err(|e| RmdpError::InvalidFactorization(e.to_string()))?;
        Ok(Self {
            vertices,
            matrix,
            psi,
        })
    }
}

/// Split of the move probability of one articulation point over the
/// blocks containing it.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticulationWeights {
    pub vertex: usize,
    /// Indices of the blocks containing `vertex`, ascending.
    pub blocks: Vec<usize>,
    /// `weights[(u, k)] = nu_vertex(u, blocks[k])`.
    pub weights: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub structure: BlockStructure,
    pub block_kernels: Vec<BlockKernel>,
    /// `n x m` move probabilities `rho(i, u)`.
    pub rho: DMatrix<f64>,
    /// One entry per articulation point, ascending by vertex.
    pub nu: Vec<ArticulationWeights>,
}

impl Factorization {
    pub fn n_states(&self) -> usize {
        self.rho.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.rho.ncols()
    }

    /// `nu_i(u, B)`: the stored split at articulation points, 1 for other
    /// members of `B`, 0 for non-members.
    pub fn nu(&self, i: usize, u: usize, block: usize) -> f64 {
        if self.structure.local_index(block, i).is_none() {
            return 0.0;
        }
        match self.nu.binary_search_by_key(&i, |w| w.vertex) {
            Ok(k) => {
                let w = &self.nu[k];
                match w.blocks.binary_search(&block) {
                    Ok(col) => w.weights[(u, col)],
                    Err(_) => 0.0,
                }
            }
            Err(_) => 1.0,
        }
    }

    /// `tau_i(mu, B) = sum_u mu(u|i) rho(i, u) nu_i(u, B)`.
    pub fn tau(&self, i: usize, pol: &Policy, block: usize) -> f64 {
        (0..self.n_actions())
            .map(|u| pol.weight(i, u) * self.rho[(i, u)] * self.nu(i, u, block))
            .sum()
    }

    /// Checks every invariant needed for [`synthesize`] to produce a
    /// reversible MDP.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RmdpError::InvalidFactorization(msg));
        let n = self.n_states();
        let bs = &self.structure;
        if bs.membership.len() != n {
            return bad(format!("structure has {} vertices, rho has {n} rows", bs.membership.len()));
        }
        if let Some(v) = self.rho.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return bad(format!("rho entry {v} outside (0, 1]"));
        }
        if self.block_kernels.len() != bs.n_blocks() {
            return bad(format!(
                "{} block kernels for {} blocks",
                self.block_kernels.len(),
                bs.n_blocks()
            ));
        }
        for (b, bk) in self.block_kernels.iter().enumerate() {
            if bk.vertices != bs.blocks[b] {
                return bad(format!("kernel {b} covers {:?}, block is {:?}", bk.vertices, bs.blocks[b]));
            }
            let size = bk.vertices.len();
            if bk.matrix.shape() != (size, size) {
                return bad(format!("kernel {b} has shape {:?}", bk.matrix.shape()));
            }
            for li in 0..size {
                if bk.matrix[(li, li)] != 0.0 {
                    return bad(format!("kernel {b} has a non-zero diagonal"));
                }
                let sum: f64 = bk.matrix.row(li).iter().sum();
                if (sum - 1.0).abs() > config::STOCHASTIC_TOL {
                    return bad(format!("kernel {b} row {li} sums to {sum}"));
                }
                for lj in 0..size {
                    let v = bk.matrix[(li, lj)];
                    let edge = (bk.vertices[li].min(bk.vertices[lj]), bk.vertices[li].max(bk.vertices[lj]));
                    let is_edge = li != lj && bs.block_edges[b].binary_search(&edge).is_ok();
                    if v < 0.0 || (v > config::SUPPORT_THRESHOLD) != is_edge {
                        return bad(format!(
                            "kernel {b} support disagrees with block edges at ({li}, {lj})"
                        ));
                    }
                }
            }
            let (i, j, gap) = mdp::balance_gap(&bk.matrix, &bk.psi);
            if gap > BLOCK_BALANCE_TOL {
                return bad(format!("kernel {b} not reversible at ({i}, {j}): {gap:e}"));
            }
        }
        let points: Vec<usize> = self.nu.iter().map(|w| w.vertex).collect();
        if points != bs.articulation_points {
            return bad(format!(
                "nu covers {points:?}, articulation points are {:?}",
                bs.articulation_points
            ));
        }
        for w in &self.nu {
            if w.blocks != bs.membership[w.vertex] {
                return bad(format!("nu at {} lists blocks {:?}", w.vertex, w.blocks));
            }
            if w.weights.shape() != (self.n_actions(), w.blocks.len()) {
                return bad(format!("nu at {} has shape {:?}", w.vertex, w.weights.shape()));
            }
            for u in 0..self.n_actions() {
                let row = w.weights.row(u);
                if row.iter().any(|v| v.is_nan() || *v <= 0.0) {
                    return bad(format!("nu at {} action {u} has a non-positive weight", w.vertex));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > config::STOCHASTIC_TOL {
                    return bad(format!("nu at {} action {u} sums to {sum}", w.vertex));
                }
            }
        }
        Ok(())
    }
}

/// Extracts block kernels, move probabilities and articulation splits from
/// any instance, failing exactly when the instance is not a reversible MDP.
pub fn factorize_general(inst: &MdpInstance, tol: &Tolerances) -> Result<Factorization> {
    let graph = structure::canonical_graph(inst, tol.support)?;
    let bs = structure::block_decomposition(&graph)?;
    let rho = move_probabilities(inst);
    let m = inst.n_actions();

    let mut block_kernels = Vec::with_capacity(bs.n_blocks());
    // masses[b][local i][u] = sum_{j in B} p_ij(u)
    let mut masses: Vec<Vec<Vec<f64>>> = Vec::with_capacity(bs.n_blocks());
    for vertices in &bs.blocks {
        let size = vertices.len();
        let mut matrix = DMatrix::zeros(size, size);
        let mut block_masses = Vec::with_capacity(size);
        for (li, &i) in vertices.iter().enumerate() {
            let (row, mass) = action_independent_row(inst, i, vertices, tol.ratio)?;
            for lj in 0..size {
                matrix[(li, lj)] = row[lj];
            }
            block_masses.push(mass);
        }
        let psi = reversible_stationary(&matrix, tol.balance, "block kernel")?;
        block_kernels.push(BlockKernel {
            vertices: vertices.clone(),
            matrix,
            psi,
        });
        masses.push(block_masses);
    }

    let nu = bs
        .articulation_points
        .iter()
        .map(|&a| {
            let blocks = bs.membership[a].clone();
            let weights = DMatrix::from_fn(m, blocks.len(), |u, k| {
                let b = blocks[k];
                let li = bs.local_index(b, a).expect("member of its block");
                masses[b][li][u] / rho[(a, u)]
            });
            ArticulationWeights {
                vertex: a,
                blocks,
                weights,
            }
        })
        .collect();

    Ok(Factorization {
        structure: bs,
        block_kernels,
        rho,
        nu,
    })
}

/// Builds the kernels `p_ij(u) = rho(i,u) nu_i(u,B) p0_ij(B)`,
/// `p_ii(u) = 1 - rho(i,u)`. States and actions are labelled `1..`.
pub fn synthesize(f: &Factorization, rewards: &DMatrix<f64>) -> Result<MdpInstance> {
    f.validate()?;
    let n = f.n_states();
    let m = f.n_actions();
    let mut kernels = vec![DMatrix::zeros(n, n); m];
    for (u, kernel) in kernels.iter_mut().enumerate() {
        for i in 0..n {
            kernel[(i, i)] = 1.0 - f.rho[(i, u)];
        }
        for (b, bk) in f.block_kernels.iter().enumerate() {
            for (li, &i) in bk.vertices.iter().enumerate() {
                let scale = f.rho[(i, u)] * f.nu(i, u, b);
                for (lj, &j) in bk.vertices.iter().enumerate() {
                    if li != lj {
                        kernel[(i, j)] = scale * bk.matrix[(li, lj)];
                    }
                }
            }
        }
    }
    let labels = |k: usize| (1..=k).map(|i| i.to_string()).collect::<Vec<_>>();
    MdpInstance::new(labels(n), labels(m), kernels, rewards.clone())
}

/// Stationary vector of `P(mu)` assembled from the blockwise vectors
/// `psi_i(B) / tau_i(mu, B)`.
///
/// Block scales are fixed breadth-first over the block-cut tree from the
/// block containing vertex 0, so that every articulation point receives the
/// same value from each of its blocks, and the result is normalized.
pub fn glue_stationary(f: &Factorization, pol: &Policy) -> Result<DVector<f64>> {
    glue_stationary_from(f, pol, 0)
}

/// [`glue_stationary`] with the propagation started at block `root`.
pub fn glue_stationary_from(f: &Factorization, pol: &Policy, root: usize) -> Result<DVector<f64>> {
    if pol.n_states() != f.n_states() || pol.n_actions() != f.n_actions() {
        return Err(RmdpError::DimensionMismatch("policy does not match factorization".into()));
    }
    let bs = &f.structure;
    if root >= bs.n_blocks() || f.block_kernels.len() != bs.n_blocks() {
        return Err(RmdpError::InvalidFactorization(format!("no block {root} to start from")));
    }
    let n = f.n_states();
    let mut scale: Vec<Option<f64>> = vec![None; bs.n_blocks()];
    let mut gamma: Vec<Option<f64>> = vec![None; n];
    let local_value = |b: usize, li: usize, i: usize| -> f64 {
        f.block_kernels[b].psi[li] / f.tau(i, pol, b)
    };

    scale[root] = Some(1.0);
    let mut queue = VecDeque::from([root]);
    while let Some(b) = queue.pop_front() {
        let mb = scale[b].expect("scaled before queued");
        for (li, &i) in bs.blocks[b].iter().enumerate() {
            let value = mb * local_value(b, li, i);
            gamma[i].get_or_insert(value);
            for &other in &bs.membership[i] {
                if scale[other].is_none() {
                    let lo = bs.local_index(other, i).expect("member");
                    scale[other] = Some(value / local_value(other, lo, i));
                    queue.push_back(other);
                }
            }
        }
    }
    let gamma: Vec<f64> = gamma
        .into_iter()
        .map(|g| g.ok_or_else(|| RmdpError::InvalidFactorization("block-cut tree is disconnected".into())))
        .collect::<Result<_>>()?;
    if gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(RmdpError::InvalidFactorization("non-positive glued weight".into()));
    }
    let total: f64 = gamma.iter().sum();
    Ok(DVector::from_iterator(n, gamma.into_iter().map(|g| g / total)))
}

/// Stationary vector of a tree-structured chain, proportional to
/// `prod_{k != i} p_{k -> i}` where `p_{k -> i}` is the transition from `k`
/// to its neighbor on the path towards `i`. Uses only `P(mu)`.
pub fn tree_stationary_product(inst: &MdpInstance, pol: &Policy, tol: &Tolerances) -> Result<DVector<f64>> {
    let graph = structure::canonical_graph(inst, tol.support)?;
    if !structure::is_tree(&graph) {
        return Err(RmdpError::NotTree);
    }
    let p = mdp::controlled_kernel(inst, pol)?;
    let n = inst.n_states();
    let mut weights = DVector::<f64>::zeros(n);
    for i in 0..n {
        // next hop from every vertex towards i
        let mut toward = vec![usize::MAX; n];
        toward[i] = i;
        let mut queue = VecDeque::from([i]);
        while let Some(v) = queue.pop_front() {
            for &w in graph.neighbors(v) {
                if toward[w] == usize::MAX {
                    toward[w] = v;
                    queue.push_back(w);
                }
            }
        }
        weights[i] = (0..n)
            .filter(|&k| k != i)
            .map(|k| p[(k, toward[k])])
            .product();
    }
    let total = weights.sum();
    Ok(weights / total)
}
