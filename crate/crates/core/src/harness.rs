//! Adaptive classical strategies played against the black-box oracle.
//!
//! Strategies see only names and responses. An episode ends when the EXIT
//! is recognized (a degree-2 response for a name other than the ENTRANCE)
//! or the query budget runs out.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GluedTreesGraph, MemoryBudget};
use crate::oracle::{Oracle, OracleResponse, VertexName};
use crate::rng::Stream;
use crate::stats::Estimate;

/// Append-only record of queries and their answers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    entries: Vec<(VertexName, OracleResponse)>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: VertexName, response: OracleResponse) {
        self.entries.push((name, response));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&(VertexName, OracleResponse)> {
        self.entries.last()
    }

    pub fn entries(&self) -> &[(VertexName, OracleResponse)] {
        &self.entries
    }

    /// Whether some non-ENTRANCE name received a degree-2 answer.
    pub fn proves_exit(&self, entrance: VertexName) -> bool {
        self.entries
            .iter()
            .any(|(name, r)| *name != entrance && r.degree() == Some(2))
    }
}

/// A query policy. `next_query` is called once per query; returning `None`
/// ends the episode early.
pub trait Strategy: Send {
    fn id(&self) -> &'static str;

    /// Resets internal state for a new episode.
    fn start(&mut self, entrance: VertexName);

    fn next_query(&mut self, transcript: &Transcript, rng: &mut Stream) -> Option<VertexName>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub found_exit: bool,
    pub queries_used: u64,
    pub strategy_id: String,
    pub transcript: Transcript,
}

pub fn run_episode(
    oracle: &mut Oracle,
    strategy: &mut dyn Strategy,
    budget: u64,
    rng: &mut Stream,
) -> EpisodeResult {
    let entrance = oracle.entrance_name();
    let start_count = oracle.query_count();
    strategy.start(entrance);
    let mut transcript = Transcript::new();
    let mut found_exit = false;
    while (transcript.len() as u64) < budget {
        let Some(name) = strategy.next_query(&transcript, rng) else {
            break;
        };
        let response = oracle.query(name);
        found_exit = oracle.is_exit_response(name, &response);
        transcript.push(name, response);
        if found_exit {
            break;
        }
    }
    EpisodeResult {
        found_exit,
        queries_used: oracle.query_count() - start_count,
        strategy_id: strategy.id().to_string(),
        transcript,
    }
}

fn pick<T: Copy>(items: &[T], rng: &mut Stream) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0]),
        k => Some(items[rng.below(k as u64) as usize]),
    }
}

/// Neighbors of the last queried name, or `None` if nothing usable.
fn last_neighbors(transcript: &Transcript) -> Option<(VertexName, &[VertexName])> {
    transcript
        .last()
        .filter(|(_, r)| !r.is_invalid())
        .map(|(name, r)| (*name, r.neighbors()))
}

/// Simple random walk: query the current vertex, move to a uniform neighbor.
#[derive(Debug, Default)]
pub struct UniformWalk {
    entrance: Option<VertexName>,
}

impl Strategy for UniformWalk {
    fn id(&self) -> &'static str {
        "uniform-walk"
    }

    fn start(&mut self, entrance: VertexName) {
        self.entrance = Some(entrance);
    }

    fn next_query(&mut self, transcript: &Transcript, rng: &mut Stream) -> Option<VertexName> {
        match last_neighbors(transcript) {
            Some((_, nbrs)) => pick(nbrs, rng),
            None => self.entrance,
        }
    }
}

/// Random walk that never steps straight back to the previous vertex.
#[derive(Debug, Default)]
pub struct NonBacktrackingWalk {
    entrance: Option<VertexName>,
    previous: Option<VertexName>,
}

impl Strategy for NonBacktrackingWalk {
    fn id(&self) -> &'static str {
        "nonbacktracking-walk"
    }

    fn start(&mut self, entrance: VertexName) {
        self.entrance = Some(entrance);
        self.previous = None;
    }

    fn next_query(&mut self, transcript: &Transcript, rng: &mut Stream) -> Option<VertexName> {
        let Some((current, nbrs)) = last_neighbors(transcript) else {
            return self.entrance;
        };
        let forward: Vec<VertexName> = nbrs
            .iter()
            .copied()
            .filter(|&u| Some(u) != self.previous)
            .collect();
        self.previous = Some(current);
        pick(&forward, rng).or_else(|| pick(nbrs, rng))
    }
}

/// Random walk that prefers names it has never queried, falling back to
/// non-backtracking moves when boxed in.
#[derive(Debug, Default)]
pub struct Sprinter {
    entrance: Option<VertexName>,
    previous: Option<VertexName>,
    visited: HashSet<VertexName>,
}

impl Strategy for Sprinter {
    fn id(&self) -> &'static str {
        "sprinter"
    }

    fn start(&mut self, entrance: VertexName) {
        self.entrance = Some(entrance);
        self.previous = None;
        self.visited.clear();
    }

    fn next_query(&mut self, transcript: &Transcript, rng: &mut Stream) -> Option<VertexName> {
        let Some((current, nbrs)) = last_neighbors(transcript) else {
            return self.entrance;
        };
        self.visited.insert(current);
        let fresh: Vec<VertexName> = nbrs
            .iter()
            .copied()
            .filter(|u| !self.visited.contains(u))
            .collect();
        let forward: Vec<VertexName> = nbrs
            .iter()
            .copied()
            .filter(|&u| Some(u) != self.previous)
            .collect();
        self.previous = Some(current);
        pick(&fresh, rng)
            .or_else(|| pick(&forward, rng))
            .or_else(|| pick(nbrs, rng))
    }
}

/// Depth-first search over discovered names; each expansion pushes the new
/// neighbors in random order.
#[derive(Debug, Default)]
pub struct RandomDfs {
    stack: Vec<VertexName>,
    discovered: HashSet<VertexName>,
}

impl Strategy for RandomDfs {
    fn id(&self) -> &'static str {
        "random-dfs"
    }

    fn start(&mut self, entrance: VertexName) {
        self.stack.clear();
        self.discovered.clear();
        self.stack.push(entrance);
        self.discovered.insert(entrance);
    }

    fn next_query(&mut self, transcript: &Transcript, rng: &mut Stream) -> Option<VertexName> {
        if let Some((_, nbrs)) = last_neighbors(transcript) {
            let mut fresh: Vec<VertexName> = nbrs
                .iter()
                .copied()
                .filter(|u| !self.discovered.contains(u))
                .collect();
            rng.shuffle(&mut fresh);
            for u in fresh {
                self.discovered.insert(u);
                self.stack.push(u);
            }
        }
        self.stack.pop()
    }
}

/// Breadth-first search over discovered names in response order.
#[derive(Debug, Default)]
pub struct Bfs {
    queue: VecDeque<VertexName>,
    discovered: HashSet<VertexName>,
}

impl Strategy for Bfs {
    fn id(&self) -> &'static str {
        "bfs"
    }

    fn start(&mut self, entrance: VertexName) {
        self.queue.clear();
        self.discovered.clear();
        self.queue.push_back(entrance);
        self.discovered.insert(entrance);
    }

    fn next_query(&mut self, transcript: &Transcript, _rng: &mut Stream) -> Option<VertexName> {
        if let Some((_, nbrs)) = last_neighbors(transcript) {
            for &u in nbrs {
                if self.discovered.insert(u) {
                    self.queue.push_back(u);
                }
            }
        }
        self.queue.pop_front()
    }
}

pub const STRATEGY_IDS: [&str; 5] = [
    "uniform-walk",
    "nonbacktracking-walk",
    "random-dfs",
    "sprinter",
    "bfs",
];

pub fn strategy_by_id(id: &str) -> Result<Box<dyn Strategy>> {
    Ok(match id {
        "uniform-walk" => Box::new(UniformWalk::default()),
        "nonbacktracking-walk" => Box::new(NonBacktrackingWalk::default()),
        "random-dfs" => Box::new(RandomDfs::default()),
        "sprinter" => Box::new(Sprinter::default()),
        "bfs" => Box::new(Bfs::default()),
        other => return Err(Error::UnknownStrategy(other.to_string())),
    })
}

pub fn builtin_strategies() -> Vec<Box<dyn Strategy>> {
    STRATEGY_IDS
        .iter()
        .map(|id| strategy_by_id(id).expect("builtin id"))
        .collect()
}

/// Per-episode seeds: graph `master -> "episode-graph" -> e`, names
/// `master -> "episode-names" -> e`, strategy randomness
/// `master -> "episode-strategy" -> e`. Instances do not depend on the
/// strategy, so several strategies can share one oracle per episode.
#[derive(Clone, Debug)]
pub struct EpisodeSeeds {
    graph: Stream,
    names: Stream,
    strategy: Stream,
}

impl EpisodeSeeds {
    pub fn new(master_seed: u64) -> Self {
        let root = Stream::new(master_seed);
        Self {
            graph: root.derive_named("episode-graph"),
            names: root.derive_named("episode-names"),
            strategy: root.derive_named("episode-strategy"),
        }
    }

    pub fn oracle(&self, n: u32, episode: u64, budget: MemoryBudget) -> Result<Oracle> {
        let graph = GluedTreesGraph::build_with_budget(n, self.graph.seed_for(episode), budget)?;
        Ok(Oracle::new(Arc::new(graph), self.names.seed_for(episode)))
    }

    pub fn strategy_rng(&self, episode: u64) -> Stream {
        self.strategy.derive(episode)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRecord {
    pub n: u32,
    pub strategy_id: String,
    pub budget: u64,
    pub episodes: u64,
    pub successes: u64,
    pub mean: f64,
    pub ci99_upper: f64,
    pub master_seed: u64,
}

impl StrategyRecord {
    pub fn new(
        n: u32,
        strategy_id: &str,
        budget: u64,
        master_seed: u64,
        estimate: &Estimate,
    ) -> Self {
        Self {
            n,
            strategy_id: strategy_id.to_string(),
            budget,
            episodes: estimate.trials,
            successes: estimate.successes,
            mean: estimate.mean,
            ci99_upper: estimate.ci99_upper,
            master_seed,
        }
    }
}

/// Success frequencies of several strategies over `episodes` fresh oracles.
/// Each episode builds one instance and plays every strategy on it with
/// its own counter; the per-strategy counts are binomial.
pub fn success_rates(
    n: u32,
    strategy_ids: &[&str],
    budget: u64,
    episodes: u64,
    master_seed: u64,
) -> Result<Vec<Estimate>> {
    if episodes < 1 {
        return Err(Error::InvalidArgument("episodes must be positive".into()));
    }
    for id in strategy_ids {
        strategy_by_id(id)?;
    }
    if budget == 0 {
        return Ok(strategy_ids
            .iter()
            .map(|_| Estimate::binomial(0, episodes))
            .collect());
    }
    let mem = MemoryBudget::from_env();
    mem.check(n)?;
    let seeds = EpisodeSeeds::new(master_seed);
    let wins: Vec<Vec<bool>> = (0..episodes)
        .into_par_iter()
        .map(|e| {
            let oracle = seeds.oracle(n, e, mem)?;
            Ok(strategy_ids
                .iter()
                .map(|id| {
                    let mut strategy = strategy_by_id(id).expect("validated id");
                    let mut session = oracle.fresh_session();
                    let mut rng = seeds.strategy_rng(e);
                    run_episode(&mut session, strategy.as_mut(), budget, &mut rng).found_exit
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..strategy_ids.len())
        .map(|k| Estimate::binomial(wins.iter().filter(|w| w[k]).count() as u64, episodes))
        .collect())
}

pub fn success_rate(
    n: u32,
    strategy_id: &str,
    budget: u64,
    episodes: u64,
    master_seed: u64,
) -> Result<Estimate> {
    Ok(success_rates(n, &[strategy_id], budget, episodes, master_seed)?.remove(0))
}
