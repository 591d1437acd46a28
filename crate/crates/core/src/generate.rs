//! Seeded random reversible MDPs.
//!
//! `weighted` mode draws a weighted graph and move probabilities and sets
//! `p_ij(u) = rho(i, u) s_ij / s_i`. `blocks` mode draws a block layout,
//! one weighted graph per block, move probabilities and articulation
//! splits, and assembles the kernels through [`synthesize`].
//!
//! Each ingredient has its own stream, so fixing e.g. the edge weights in
//! the config leaves the drawn move probabilities unchanged.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{Result, RmdpError};
use crate::factorize::{synthesize, ArticulationWeights, BlockKernel, Factorization, WeightedGraph};
use crate::mdp::MdpInstance;
use crate::rng::{stream, StreamDomain};
use crate::structure::{self, CanonicalGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorMode {
    #[default]
    Weighted,
    Blocks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuMode {
    #[default]
    Random,
    Uniform,
}

/// Generator input. Vertex numbers in `edges` and `blocks` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default)]
    pub mode: GeneratorMode,
    pub states: usize,
    pub actions: usize,
    /// Fixed edge list; drawn at random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize)>>,
    /// Weights aligned with `edges`; requires `edges`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Fixed block layout (blocks mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<usize>>>,
    #[serde(default = "default_rho_min")]
    pub rho_min: f64,
    /// Fixed `states x actions` move probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub nu: NuMode,
    #[serde(default = "default_reward_range")]
    pub reward_range: (f64, f64),
    /// Chord probability for randomly drawn biconnected pieces.
    #[serde(default = "default_extra_edge_prob")]
    pub extra_edge_prob: f64,
}

fn default_rho_min() -> f64 {
    config::GENERATOR_RHO_MIN
}

fn default_reward_range() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_extra_edge_prob() -> f64 {
    0.3
}

impl GeneratorConfig {
    pub fn new(mode: GeneratorMode, states: usize, actions: usize) -> Self {
        Self {
            mode,
            states,
            actions,
            edges: None,
            weights: None,
            blocks: None,
            rho_min: default_rho_min(),
            rho: None,
            nu: NuMode::default(),
            reward_range: default_reward_range(),
            extra_edge_prob: default_extra_edge_prob(),
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(RmdpError::InvalidConfig(msg));
        if self.states < 2 {
            return bad(format!("states must be at least 2, got {}", self.states));
        }
        if self.actions < 2 {
            return bad(format!("actions must be at least 2, got {}", self.actions));
        }
        if !(self.rho_min > 0.0 && self.rho_min <= 1.0) {
            return bad(format!("rho_min must lie in (0, 1], got {}", self.rho_min));
        }
        let (lo, hi) = self.reward_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("invalid reward range ({lo}, {hi})"));
        }
        if !(0.0..=1.0).contains(&self.extra_edge_prob) {
            return bad(format!("extra_edge_prob must lie in [0, 1], got {}", self.extra_edge_prob));
        }
        if self.weights.is_some() && self.edges.is_none() {
            return bad("weights require an explicit edge list".into());
        }
        if self.blocks.is_some() && self.mode == GeneratorMode::Weighted {
            return bad("a block layout needs blocks mode".into());
        }
        if let Some(rho) = &self.rho {
            if rho.len() != self.states || rho.iter().any(|r| r.len() != self.actions) {
                return bad(format!("rho must be {} x {}", self.states, self.actions));
            }
            if let Some(v) = rho.iter().flatten().find(|v| !(**v > 0.0 && **v <= 1.0)) {
                return bad(format!("rho entry {v} outside (0, 1]"));
            }
        }
        Ok(())
    }
}

fn rng(seed: u64, domain: StreamDomain) -> ChaCha8Rng {
    stream(seed, domain, 0)
}

fn zero_based(n: usize, edges: &[(usize, usize)]) -> Result<CanonicalGraph> {
    let shifted = edges
        .iter()
        .map(|&(i, j)| {
            if i == 0 || j == 0 || i > n || j > n {
                Err(RmdpError::InvalidConfig(format!("edge ({i}, {j}) outside 1..={n}")))
            } else {
                Ok((i - 1, j - 1))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    CanonicalGraph::new(n, shifted).map_err(|e| RmdpError::InvalidConfig(e.to_string()))
}

/// Cycle through `vertices` in random order plus random chords; a single
/// edge for two vertices.
fn biconnected_piece(vertices: &[usize], chord_prob: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let k = vertices.len();
    if k == 2 {
        return vec![(vertices[0], vertices[1])];
    }
    let mut order = vertices.to_vec();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = (0..k)
        .map(|t| {
            let (a, b) = (order[t], order[(t + 1) % k]);
            (a.min(b), a.max(b))
        })
        .collect();
    edges.sort_unstable();
    let cycle = edges.clone();
    for x in 0..k {
        for y in (x + 1)..k {
            let e = (vertices[x].min(vertices[y]), vertices[x].max(vertices[y]));
            if cycle.binary_search(&e).is_err() && rng.random_bool(chord_prob) {
                edges.push(e);
            }
        }
    }
    edges
}

/// Random block layout: each new block shares one existing vertex and adds
/// between one and three fresh ones.
fn random_layout(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut blocks = Vec::new();
    let mut next = 0;
    while next < n {
        let fresh = if next == 0 {
            rng.random_range(2..=n.min(4))
        } else {
            rng.random_range(1..=(n - next).min(3))
        };
        let mut block: Vec<usize> = (next..next + fresh).collect();
        if next > 0 {
            block.push(rng.random_range(0..next));
        }
        block.sort_unstable();
        blocks.push(block);
        next += fresh;
    }
    blocks
}

fn positive_weights(count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..count).map(|_| rng.random_range(0.1..1.0)).collect()
}

fn move_probabilities(cfg: &GeneratorConfig, seed: u64) -> DMatrix<f64> {
    match &cfg.rho {
        Some(rows) => DMatrix::from_fn(cfg.states, cfg.actions, |i, u| rows[i][u]),
        None => {
            let mut rng = rng(seed, StreamDomain::GeneratorRho);
            let lo = cfg.rho_min;
            DMatrix::from_fn(cfg.states, cfg.actions, |_, _| {
                if lo < 1.0 {
                    rng.random_range(lo..=1.0)
                } else {
                    1.0
                }
            })
        }
    }
}

fn rewards(cfg: &GeneratorConfig, seed: u64) -> DMatrix<f64> {
    let mut rng = rng(seed, StreamDomain::GeneratorRewards);
    let (lo, hi) = cfg.reward_range;
    DMatrix::from_fn(cfg.states, cfg.actions, |_, _| {
        if lo < hi {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    })
}

fn labels(k: usize) -> Vec<String> {
    (1..=k).map(|i| i.to_string()).collect()
}

/// Draws a reversible MDP; identical `(config, seed)` give identical output.
pub fn generate_instance(cfg: &GeneratorConfig, seed: u64) -> Result<MdpInstance> {
    cfg.check()?;
    match cfg.mode {
        GeneratorMode::Weighted => generate_weighted(cfg, seed),
        GeneratorMode::Blocks => generate_blocks(cfg, seed),
    }
}

fn weighted_graph(cfg: &GeneratorConfig, graph: CanonicalGraph, seed: u64) -> Result<WeightedGraph> {
    let weights = match &cfg.weights {
        Some(w) => w.clone(),
        None => positive_weights(graph.edges().len(), &mut rng(seed, StreamDomain::GeneratorWeights)),
    };
    WeightedGraph::new(graph, weights).map_err(|e| RmdpError::InvalidConfig(e.to_string()))
}

fn generate_weighted(cfg: &GeneratorConfig, seed: u64) -> Result<MdpInstance> {
    let n = cfg.states;
    let graph = match &cfg.edges {
        Some(edges) => zero_based(n, edges)?,
        None => {
            let all: Vec<usize> = (0..n).collect();
            let mut r = rng(seed, StreamDomain::GeneratorGraph);
            CanonicalGraph::new(n, biconnected_piece(&all, cfg.extra_edge_prob, &mut r))?
        }
    };
    let p0 = weighted_graph(cfg, graph, seed)?.kernel();
    let rho = move_probabilities(cfg, seed);
    let kernels = (0..cfg.actions)
        .map(|u| {
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    1.0 - rho[(i, u)]
                } else {
                    rho[(i, u)] * p0[(i, j)]
                }
            })
        })
        .collect();
    MdpInstance::new(labels(n), labels(cfg.actions), kernels, rewards(cfg, seed))
}

fn generate_blocks(cfg: &GeneratorConfig, seed: u64) -> Result<MdpInstance> {
    let n = cfg.states;
    let mut graph_rng = rng(seed, StreamDomain::GeneratorGraph);
    let layout: Option<Vec<Vec<usize>>> = match &cfg.blocks {
        Some(blocks) => Some(
            blocks
                .iter()
                .map(|b| {
                    let mut b: Vec<usize> = b
                        .iter()
                        .map(|&v| {
                            if v == 0 || v > n {
                                Err(RmdpError::InvalidConfig(format!("block vertex {v} outside 1..={n}")))
                            } else {
                                Ok(v - 1)
                            }
                        })
                        .collect::<Result<_>>()?;
                    b.sort_unstable();
                    Ok(b)
                })
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let graph = match (&cfg.edges, &layout) {
        (Some(edges), _) => zero_based(n, edges)?,
        (None, Some(blocks)) => {
            let mut edges = Vec::new();
            for b in blocks {
                if b.len() < 2 {
                    return Err(RmdpError::InvalidConfig(format!("block {b:?} has fewer than 2 vertices")));
                }
                edges.extend(biconnected_piece(b, cfg.extra_edge_prob, &mut graph_rng));
            }
            edges.sort_unstable();
            edges.dedup();
            CanonicalGraph::new(n, edges).map_err(|e| RmdpError::InvalidConfig(e.to_string()))?
        }
        (None, None) => {
            let mut edges = Vec::new();
            for b in random_layout(n, &mut graph_rng) {
                edges.extend(biconnected_piece(&b, cfg.extra_edge_prob, &mut graph_rng));
            }
            CanonicalGraph::new(n, edges)?
        }
    };
    if !graph.is_connected() {
        return Err(RmdpError::InvalidConfig("graph is disconnected".into()));
    }
    let bs = structure::block_decomposition(&graph)?;
    if let Some(mut blocks) = layout {
        blocks.sort();
        if blocks != bs.blocks {
            return Err(RmdpError::InvalidConfig(format!(
                "layout {blocks:?} does not match the graph's blocks {:?}",
                bs.blocks
            )));
        }
    }

    let wg = weighted_graph(cfg, graph.clone(), seed)?;
    let block_kernels = bs
        .blocks
        .iter()
        .zip(&bs.block_edges)
        .map(|(vertices, edges)| {
            let local = |v: usize| vertices.binary_search(&v).expect("block member");
            let local_graph = CanonicalGraph::new(vertices.len(), edges.iter().map(|&(i, j)| (local(i), local(j))))?;
            let weights = edges
                .iter()
                .map(|e| wg.weights()[graph.edges().binary_search(e).expect("graph edge")])
                .collect();
            let kernel = WeightedGraph::new(local_graph, weights)?.kernel();
            BlockKernel::new(vertices.clone(), kernel)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut nu_rng = rng(seed, StreamDomain::GeneratorNu);
    let nu = bs
        .articulation_points
        .iter()
        .map(|&a| {
            let blocks = bs.membership[a].clone();
            let k = blocks.len();
            let weights = DMatrix::from_fn(cfg.actions, k, |_, _| match cfg.nu {
                NuMode::Uniform => 1.0,
                NuMode::Random => nu_rng.random_range(0.1..1.0),
            });
            let mut weights = weights;
            for mut row in weights.row_iter_mut() {
                let total: f64 = row.iter().sum();
                row /= total;
            }
            ArticulationWeights { vertex: a, blocks, weights }
        })
        .collect();

    let f = Factorization {
        structure: bs,
        block_kernels,
        rho: move_probabilities(cfg, seed),
        nu,
    };
    synthesize(&f, &rewards(cfg, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mdp::{is_rmdp, RmdpCheckOptions};

    #[test]
    fn deterministic_in_seed() {
        for mode in [GeneratorMode::Weighted, GeneratorMode::Blocks] {
            let cfg = GeneratorConfig::new(mode, 6, 3);
            assert_eq!(generate_instance(&cfg, 11).unwrap(), generate_instance(&cfg, 11).unwrap());
            assert_ne!(generate_instance(&cfg, 11).unwrap(), generate_instance(&cfg, 12).unwrap());
        }
    }

    #[test]
    fn two_state_instance_is_rmdp() {
        let inst = generate_instance(&GeneratorConfig::new(GeneratorMode::Weighted, 2, 2), 1).unwrap();
        assert!(is_rmdp(&inst, &RmdpCheckOptions::default()).unwrap().rmdp);
    }

    #[test]
    fn uniform_triangle_with_unit_rho() {
        let mut cfg = GeneratorConfig::new(GeneratorMode::Weighted, 3, 2);
        cfg.edges = Some(vec![(1, 2), (2, 3), (1, 3)]);
        cfg.weights = Some(vec![1.0; 3]);
        cfg.rho_min = 1.0;
        let inst = generate_instance(&cfg, 5).unwrap();
        for u in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(inst.p(i, j, u), if i == j { 0.0 } else { 0.5 });
                }
            }
        }
    }

    #[test]
    fn nine_vertex_layout_is_reproduced() {
        let mut cfg = GeneratorConfig::new(GeneratorMode::Blocks, 9, 2);
        cfg.blocks = Some(fixtures::NINE_VERTEX_BLOCKS.iter().map(|b| b.to_vec()).collect());
        let inst = generate_instance(&cfg, 3).unwrap();
        let g = structure::canonical_graph(&inst, config::SUPPORT_THRESHOLD).unwrap();
        let bs = structure::block_decomposition(&g).unwrap();
        let want: Vec<Vec<usize>> = fixtures::NINE_VERTEX_BLOCKS
            .iter()
            .map(|b| b.iter().map(|v| v - 1).collect())
            .collect();
        assert_eq!(bs.blocks, want);
        assert_eq!(bs.articulation_points, vec![1, 2, 5]);
        assert!(is_rmdp(&inst, &RmdpCheckOptions::default()).unwrap().rmdp);
    }

    #[test]
    fn fixed_edges_and_layout_must_agree() {
        let mut cfg = GeneratorConfig::new(GeneratorMode::Blocks, 3, 2);
        cfg.edges = Some(vec![(1, 2), (2, 3), (1, 3)]);
        cfg.blocks = Some(vec![vec![1, 2], vec![2, 3]]);
        assert!(matches!(generate_instance(&cfg, 0), Err(RmdpError::InvalidConfig(_))));
    }

    #[test]
    fn config_errors() {
        let base = GeneratorConfig::new(GeneratorMode::Weighted, 3, 2);
        let mut c = base.clone();
        c.states = 1;
        assert!(matches!(generate_instance(&c, 0), Err(RmdpError::InvalidConfig(_))));
        let mut c = base.clone();
        c.rho_min = 0.0;
        assert!(matches!(generate_instance(&c, 0), Err(RmdpError::InvalidConfig(_))));
        let mut c = base.clone();
        c.edges = Some(vec![(1, 2)]);
        assert!(matches!(generate_instance(&c, 0), Err(RmdpError::InvalidConfig(_))));
        let mut c = base.clone();
        c.edges = Some(vec![(1, 4)]);
        assert!(matches!(generate_instance(&c, 0), Err(RmdpError::InvalidConfig(_))));
        let mut c = base;
        c.weights = Some(vec![1.0]);
        assert!(matches!(generate_instance(&c, 0), Err(RmdpError::InvalidConfig(_))));
    }

    #[test]
    fn config_json_defaults() {
        let cfg: GeneratorConfig = serde_json::from_str(r#"{"states": 4, "actions": 2}"#).unwrap();
        assert_eq!(cfg, GeneratorConfig::new(GeneratorMode::Weighted, 4, 2));
        assert!(serde_json::from_str::<GeneratorConfig>(r#"{"states": 4, "actions": 2, "bogus": 1}"#).is_err());
    }

    #[test]
    fn random_instances_pass_exhaustive_check() {
        for seed in 0..40 {
            for mode in [GeneratorMode::Weighted, GeneratorMode::Blocks] {
                let cfg = GeneratorConfig::new(mode, 2 + (seed as usize % 5), 2 + (seed as usize % 2));
                let inst = generate_instance(&cfg, seed).unwrap();
                let verdict = is_rmdp(&inst, &RmdpCheckOptions::default()).unwrap();
                assert!(verdict.rmdp, "seed {seed} mode {mode:?}: {:?}", verdict.witness);
            }
        }
    }
}
