//! The random-embedding game.
//!
//! A query tree `T` is mapped into a glued-trees graph starting at the
//! ENTRANCE. Each non-root node's image is a uniformly random neighbor of
//! its parent's image, excluding the grandparent's image (non-backtracking).
//! Siblings draw independently. The embedding *wins* if it reaches the EXIT
//! or is *improper*: two non-root nodes share an image while their parents'
//! images differ, which exposes a cycle.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CanonicalVertex, GluedTreesGraph, MemoryBudget, Neighbors};
use crate::rng::Stream;
use crate::stats::Estimate;
use crate::tree::{make_tree, RootedTree, TreeShape};

/// Largest number of enumeration branches `enumerate_win_probability`
/// accepts by default (`2^22`, i.e. trees of up to 23 nodes).
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1 << 22;

/// Trials per parallel work unit. Fixed so that results never depend on
/// the worker count.
const CHUNK: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Embedding {
    pub image: Vec<CanonicalVertex>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameResult {
    pub exited: bool,
    pub improper: bool,
    pub won: bool,
}

/// Per-trial seeding: graph seeds come from `master -> "graph" -> g`,
/// embedding streams from `master -> "embed" -> g -> e`.
#[derive(Clone, Debug)]
pub struct TrialSeeds {
    graph: Stream,
    embed: Stream,
}

impl TrialSeeds {
    pub fn new(master_seed: u64) -> Self {
        let root = Stream::new(master_seed);
        Self {
            graph: root.derive_named("graph"),
            embed: root.derive_named("embed"),
        }
    }

    pub fn graph_seed(&self, graph_index: u64) -> u64 {
        self.graph.seed_for(graph_index)
    }

    pub fn graph_embeddings(&self, graph_index: u64) -> Stream {
        self.embed.derive(graph_index)
    }

    pub fn embedding(&self, graph_index: u64, embed_index: u64) -> Stream {
        self.embed.derive(graph_index).derive(embed_index)
    }
}

#[inline]
fn candidates(
    g: &GluedTreesGraph,
    tree: &RootedTree,
    image: &[CanonicalVertex],
    node: usize,
) -> Neighbors {
    let parent = tree.parent(node).expect("non-root node");
    let mut nbrs = g.structural_neighbors(image[parent]);
    if let Some(grand) = tree.grandparent(node) {
        let back = image[grand];
        if let Some(pos) = nbrs.iter().position(|&u| u == back) {
            nbrs.remove(pos);
        }
    }
    nbrs
}

/// Fills `image` with a fresh embedding of `tree`.
pub fn sample_embedding_into(
    g: &GluedTreesGraph,
    tree: &RootedTree,
    rng: &mut Stream,
    image: &mut Vec<CanonicalVertex>,
) {
    image.clear();
    image.push(g.entrance());
    for node in 1..tree.len() {
        let cands = candidates(g, tree, image, node);
        let pick = if cands.len() == 1 {
            0
        } else {
            rng.below(cands.len() as u64) as usize
        };
        image.push(cands[pick]);
    }
}

pub fn sample_embedding(g: &GluedTreesGraph, tree: &RootedTree, rng: &mut Stream) -> Embedding {
    let mut image = Vec::with_capacity(tree.len());
    sample_embedding_into(g, tree, rng, &mut image);
    Embedding { image }
}

/// Checks root anchoring, adjacency and non-backtracking.
pub fn is_valid_embedding(g: &GluedTreesGraph, tree: &RootedTree, e: &Embedding) -> bool {
    if e.image.len() != tree.len() || e.image[0] != g.entrance() {
        return false;
    }
    (1..tree.len()).all(|a| {
        let p = tree.parent(a).expect("non-root");
        g.contains(e.image[a])
            && g.structural_neighbors(e.image[p]).contains(&e.image[a])
            && tree
                .grandparent(a)
                .is_none_or(|gp| e.image[gp] != e.image[a])
    })
}

fn improper_image(tree: &RootedTree, image: &[CanonicalVertex]) -> bool {
    let mut keyed: Vec<(CanonicalVertex, CanonicalVertex)> = (1..image.len())
        .map(|a| (image[a], image[tree.parent(a).expect("non-root")]))
        .collect();
    keyed.sort_unstable();
    keyed
        .windows(2)
        .any(|w| w[0].0 == w[1].0 && w[0].1 != w[1].1)
}

/// True iff two distinct non-root nodes share an image while their
/// parents' images differ.
pub fn is_improper(tree: &RootedTree, e: &Embedding) -> bool {
    improper_image(tree, &e.image)
}

pub fn reaches_exit(g: &GluedTreesGraph, e: &Embedding) -> bool {
    let exit = g.exit();
    e.image.contains(&exit)
}

fn judge(g: &GluedTreesGraph, tree: &RootedTree, image: &[CanonicalVertex]) -> GameResult {
    let exit = g.exit();
    let exited = image.contains(&exit);
    let improper = improper_image(tree, image);
    GameResult {
        exited,
        improper,
        won: exited || improper,
    }
}

pub fn play_game(g: &GluedTreesGraph, tree: &RootedTree, rng: &mut Stream) -> GameResult {
    let e = sample_embedding(g, tree, rng);
    judge(g, tree, &e.image)
}

/// Exact `P^G(T)` by enumerating every candidate choice.
pub fn enumerate_win_probability(g: &GluedTreesGraph, tree: &RootedTree) -> Result<BigRational> {
    enumerate_win_probability_with_budget(g, tree, DEFAULT_ENUMERATION_BUDGET)
}

/// As [`enumerate_win_probability`], refusing trees whose `2^{t-1}` branch
/// count exceeds `budget`.
pub fn enumerate_win_probability_with_budget(
    g: &GluedTreesGraph,
    tree: &RootedTree,
    budget: u64,
) -> Result<BigRational> {
    let choices = tree.len() as u32 - 1;
    if choices >= 64 || (1u64 << choices) > budget {
        return Err(Error::Resource(format!(
            "enumerating a {}-node tree needs 2^{choices} branches, budget is {budget}",
            tree.len()
        )));
    }
    let mut image = vec![g.entrance(); tree.len()];
    let mut numerator = 0u128;
    enumerate_from(g, tree, &mut image, 1, choices, &mut numerator);
    Ok(BigRational::new(
        BigInt::from(numerator),
        BigInt::from(1u128 << choices),
    ))
}

// Probability mass is counted in units of 2^-(t-1); a branch after `used`
// binary choices carries 2^(t-1-used) units. Winning is monotone in the set
// of embedded nodes, so a won prefix contributes its whole subtree.
fn enumerate_from(
    g: &GluedTreesGraph,
    tree: &RootedTree,
    image: &mut [CanonicalVertex],
    node: usize,
    remaining: u32,
    acc: &mut u128,
) {
    if node == tree.len() {
        return;
    }
    let cands = candidates(g, tree, image, node);
    let step = match cands.len() {
        1 => 0,
        2 => 1,
        k => unreachable!("{k} candidates; non-backtracking moves have at most 2"),
    };
    let parent_image = image[tree.parent(node).expect("non-root")];
    for &c in &cands {
        image[node] = c;
        let improper = (1..node)
            .any(|b| image[b] == c && image[tree.parent(b).expect("non-root")] != parent_image);
        if c == g.exit() || improper {
            *acc += 1u128 << (remaining - step);
        } else {
            enumerate_from(g, tree, image, node + 1, remaining - step, acc);
        }
    }
}

/// Counts wins over `trials` embeddings whose streams are `base.derive(i)`.
fn count_wins(g: &GluedTreesGraph, tree: &RootedTree, base: &Stream, trials: u64) -> u64 {
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut image = Vec::with_capacity(tree.len());
            let end = ((c + 1) * CHUNK).min(trials);
            (c * CHUNK..end)
                .filter(|&i| {
                    let mut rng = base.derive(i);
                    sample_embedding_into(g, tree, &mut rng, &mut image);
                    judge(g, tree, &image).won
                })
                .count() as u64
        })
        .sum()
}

/// Monte Carlo `P^G(T)` on a fixed graph. Trial `i` uses the stream
/// `master -> "embed" -> 0 -> i`.
pub fn estimate_win_probability(
    g: &GluedTreesGraph,
    tree: &RootedTree,
    trials: u64,
    master_seed: u64,
) -> Estimate {
    assert!(trials >= 1);
    let base = TrialSeeds::new(master_seed).graph_embeddings(0);
    Estimate::binomial(count_wins(g, tree, &base, trials), trials)
}

/// Two-level Monte Carlo for `E_G[P^G(T)]` with clustered errors.
pub fn estimate_expected_win(
    n: u32,
    tree: &RootedTree,
    graph_trials: u64,
    embed_trials_per_graph: u64,
    master_seed: u64,
) -> Result<Estimate> {
    if graph_trials < 1 || embed_trials_per_graph < 1 {
        return Err(Error::InvalidArgument(
            "trial budgets must be positive".into(),
        ));
    }
    let budget = MemoryBudget::from_env();
    budget.check(n)?;
    let seeds = TrialSeeds::new(master_seed);
    let per_graph: Vec<u64> = (0..graph_trials)
        .into_par_iter()
        .map(|gi| {
            let g = GluedTreesGraph::build_with_budget(n, seeds.graph_seed(gi), budget)?;
            Ok(count_wins(
                &g,
                tree,
                &seeds.graph_embeddings(gi),
                embed_trials_per_graph,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::clustered(&per_graph, embed_trials_per_graph))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairAudit {
    /// Keyed by `(a, b)` with `0 < a < b`.
    pub pairs: BTreeMap<(usize, usize), Estimate>,
    pub improper: Estimate,
    pub exited: Estimate,
    /// Sum of the pair means; by the union bound at least `improper.mean`.
    pub pair_sum: f64,
}

/// Per-pair frequencies of the event `image[a] = image[b]` with differing
/// parent images, over `graph_trials x embed_trials` embeddings.
pub fn improper_pair_frequency(
    n: u32,
    tree: &RootedTree,
    graph_trials: u64,
    embed_trials: u64,
    master_seed: u64,
) -> Result<PairAudit> {
    if graph_trials < 1 || embed_trials < 1 {
        return Err(Error::InvalidArgument(
            "trial budgets must be positive".into(),
        ));
    }
    let t = tree.len();
    let pair_list: Vec<(usize, usize)> = (1..t)
        .flat_map(|a| (a + 1..t).map(move |b| (a, b)))
        .collect();
    let budget = MemoryBudget::from_env();
    budget.check(n)?;
    let seeds = TrialSeeds::new(master_seed);

    struct GraphCounts {
        pairs: Vec<u64>,
        improper: u64,
        exited: u64,
    }

    let per_graph: Vec<GraphCounts> = (0..graph_trials)
        .into_par_iter()
        .map(|gi| {
            let g = GluedTreesGraph::build_with_budget(n, seeds.graph_seed(gi), budget)?;
            let base = seeds.graph_embeddings(gi);
            let mut counts = GraphCounts {
                pairs: vec![0; pair_list.len()],
                improper: 0,
                exited: 0,
            };
            let mut image = Vec::with_capacity(t);
            for ei in 0..embed_trials {
                let mut rng = base.derive(ei);
                sample_embedding_into(&g, tree, &mut rng, &mut image);
                let result = judge(&g, tree, &image);
                counts.improper += u64::from(result.improper);
                counts.exited += u64::from(result.exited);
                for (slot, &(a, b)) in counts.pairs.iter_mut().zip(&pair_list) {
                    let pa = tree.parent(a).expect("non-root");
                    let pb = tree.parent(b).expect("non-root");
                    if image[a] == image[b] && image[pa] != image[pb] {
                        *slot += 1;
                    }
                }
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;

    let column =
        |f: &dyn Fn(&GraphCounts) -> u64| -> Vec<u64> { per_graph.iter().map(f).collect() };
    let pairs: BTreeMap<(usize, usize), Estimate> = pair_list
        .iter()
        .enumerate()
        .map(|(k, &pair)| {
            (
                pair,
                Estimate::clustered(&column(&|c| c.pairs[k]), embed_trials),
            )
        })
        .collect();
    let pair_sum = pairs.values().map(|e| e.mean).sum();
    Ok(PairAudit {
        pairs,
        improper: Estimate::clustered(&column(&|c| c.improper), embed_trials),
        exited: Estimate::clustered(&column(&|c| c.exited), embed_trials),
        pair_sum,
    })
}

/// Shape used for the `index`-th candidate in [`search_worst_tree`].
pub fn candidate_tree(index: u64, t: usize, master_seed: u64) -> Result<(TreeShape, RootedTree)> {
    let shape = match index {
        0 => TreeShape::Path,
        1 => TreeShape::Caterpillar,
        2 => TreeShape::FullBinary,
        _ => TreeShape::RandomAttach,
    };
    let seed = Stream::new(master_seed)
        .derive_named("candidate-tree")
        .seed_for(index);
    Ok((shape, make_tree(shape, t, seed)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstTree {
    pub shape: TreeShape,
    pub candidate_index: u64,
    pub tree: RootedTree,
    pub estimate: Estimate,
}

/// Empirical maximiser of `E_G[P^G(T)]` over generated candidates: a path,
/// a caterpillar, a full binary tree, then random-attachment trees. The
/// result is a lower estimate of the true maximum over all trees.
pub fn search_worst_tree(
    n: u32,
    t: usize,
    candidates: u64,
    graph_trials: u64,
    embed_trials: u64,
    master_seed: u64,
) -> Result<WorstTree> {
    if candidates < 1 {
        return Err(Error::InvalidArgument("need at least one candidate".into()));
    }
    let mut best: Option<WorstTree> = None;
    for index in 0..candidates {
        let (shape, tree) = candidate_tree(index, t, master_seed)?;
        let estimate = estimate_expected_win(n, &tree, graph_trials, embed_trials, master_seed)?;
        if best
            .as_ref()
            .is_none_or(|b| estimate.mean > b.estimate.mean)
        {
            best = Some(WorstTree {
                shape,
                candidate_index: index,
                tree,
                estimate,
            });
        }
    }
    Ok(best.expect("at least one candidate"))
}
