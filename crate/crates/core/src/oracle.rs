//! Opaque vertex naming and the query-counting black box.

use std::fmt;
use std::sync::Arc;

use arrayvec::ArrayVec;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{CanonicalVertex, GluedTreesGraph, MemoryBudget};
use crate::rng::Stream;

pub const GRAPH_FORMAT_VERSION: u32 = 1;

/// An opaque vertex name of [`name_bits`] bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexName(pub u64);

impl fmt::Debug for VertexName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VertexName({:#x})", self.0)
    }
}

impl fmt::Display for VertexName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}", self.0)
    }
}

impl std::str::FromStr for VertexName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        u64::from_str_radix(digits, 16)
            .map(VertexName)
            .map_err(|e| Error::Format(format!("bad vertex name `{s}`: {e}")))
    }
}

impl Serialize for VertexName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Name width: `2n` bits, widened to `n + 3` for `n < 3` so that names
/// outnumber vertices.
pub fn name_bits(n: u32) -> u32 {
    (2 * n).max(n + 3)
}

/// The reserved all-ones name for a given height; never assigned.
pub fn reserved_name(n: u32) -> VertexName {
    VertexName((1u64 << name_bits(n)) - 1)
}

/// Bijection between canonical vertices and opaque names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Naming {
    bits: u32,
    seed: u64,
    /// Indexed by canonical id.
    names: Vec<u64>,
    /// `(name, canonical id)` sorted by name.
    index: Vec<(u64, u32)>,
}

impl Naming {
    /// Draws names uniformly without replacement from `[0, 2^bits - 1)`.
    ///
    /// Equivalent to sequential rejection of repeated draws from one stream:
    /// the first `count` draws are sorted, later repeats of a value are
    /// dropped, and the stream continues (still rejecting repeats) until
    /// `count` names are accepted.
    pub fn sample(n: u32, vertex_count: u64, seed: u64) -> Self {
        let bits = name_bits(n);
        let space = (1u64 << bits) - 1;
        assert!(vertex_count <= space, "name space too small");
        let count = vertex_count as usize;
        let mut rng = Stream::new(seed).derive_named("names");
        let mut names: Vec<u64> = (0..count).map(|_| rng.below(space)).collect();
        let mut index = build_index(&names);
        let repeats: Vec<u32> = index
            .windows(2)
            .filter(|w| w[0].0 == w[1].0)
            .map(|w| w[1].1)
            .collect();
        if repeats.is_empty() {
            return Self {
                bits,
                seed,
                names,
                index,
            };
        }
        let mut drop = vec![false; count];
        for &id in &repeats {
            drop[id as usize] = true;
        }
        // New id of each surviving draw: its position among survivors.
        let mut new_id = vec![0u32; count];
        let mut kept = 0;
        for i in 0..count {
            if !drop[i] {
                names[kept] = names[i];
                new_id[i] = kept as u32;
                kept += 1;
            }
        }
        names.truncate(kept);
        index.dedup_by_key(|e| e.0);
        for e in index.iter_mut() {
            e.1 = new_id[e.1 as usize];
        }
        let mut extra: Vec<(u64, u32)> = Vec::new();
        while names.len() < count {
            let candidate = rng.below(space);
            let fresh = index.binary_search_by_key(&candidate, |e| e.0).is_err()
                && extra.iter().all(|e| e.0 != candidate);
            if fresh {
                extra.push((candidate, names.len() as u32));
                names.push(candidate);
            }
        }
        extra.sort_unstable();
        let mut merged = Vec::with_capacity(count);
        let mut rest = index.into_iter().peekable();
        for e in extra {
            while let Some(x) = rest.next_if(|x| x.0 < e.0) {
                merged.push(x);
            }
            merged.push(e);
        }
        merged.extend(rest);
        let index = merged;
        Self {
            bits,
            seed,
            names,
            index,
        }
    }

    /// Rebuilds a naming from stored names, checking the invariants.
    pub fn from_names(n: u32, seed: u64, names: Vec<u64>) -> Result<Self> {
        let bits = name_bits(n);
        let reserved = reserved_name(n).0;
        if let Some(bad) = names.iter().find(|&&x| x >= reserved) {
            return Err(Error::Format(format!(
                "name {bad:x} is outside the {bits}-bit space or reserved"
            )));
        }
        let index = build_index(&names);
        if let Some(w) = index.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Format(format!("duplicate name {:x}", w[0].0)));
        }
        Ok(Self {
            bits,
            seed,
            names,
            index,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name_of_id(&self, id: u64) -> VertexName {
        VertexName(self.names[id as usize])
    }

    pub fn id_of(&self, name: VertexName) -> Option<u64> {
        self.index
            .binary_search_by_key(&name.0, |&(k, _)| k)
            .ok()
            .map(|pos| u64::from(self.index[pos].1))
    }

    /// Fixed-width lowercase hex, `ceil(bits / 4)` digits.
    pub fn format_padded(&self, name: VertexName) -> String {
        let digits = self.bits.div_ceil(4) as usize;
        format!("{:0digits$x}", name.0)
    }
}

const RADIX_BITS: u32 = 11;

/// `(name, id)` pairs sorted by name then id: an LSD radix sort, stable so
/// equal names keep increasing ids. Each pass streams through memory,
/// which matters more than comparison count at these sizes.
fn build_index(names: &[u64]) -> Vec<(u64, u32)> {
    let mut index: Vec<(u64, u32)> = names
        .iter()
        .enumerate()
        .map(|(id, &x)| (x, id as u32))
        .collect();
    let width = 64 - names.iter().copied().max().unwrap_or(0).leading_zeros();
    let mut scratch = vec![(0u64, 0u32); names.len()];
    let radix = 1usize << RADIX_BITS;
    let mut shift = 0;
    while shift < width {
        let mut counts = vec![0usize; radix + 1];
        for &(x, _) in &index {
            counts[((x >> shift) as usize & (radix - 1)) + 1] += 1;
        }
        for d in 1..=radix {
            counts[d] += counts[d - 1];
        }
        for &entry in &index {
            let d = (entry.0 >> shift) as usize & (radix - 1);
            scratch[counts[d]] = entry;
            counts[d] += 1;
        }
        std::mem::swap(&mut index, &mut scratch);
        shift += RADIX_BITS;
    }
    index
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleResponse {
    Neighbors(ArrayVec<VertexName, 3>),
    Invalid,
}

impl OracleResponse {
    pub fn neighbors(&self) -> &[VertexName] {
        match self {
            OracleResponse::Neighbors(list) => list.as_slice(),
            OracleResponse::Invalid => &[],
        }
    }

    pub fn is_invalid(&self) -> bool {
        matches!(self, OracleResponse::Invalid)
    }

    pub fn degree(&self) -> Option<usize> {
        match self {
            OracleResponse::Neighbors(list) => Some(list.len()),
            OracleResponse::Invalid => None,
        }
    }
}

const INVALID_TAG: &str = "INVALID";

impl Serialize for OracleResponse {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            OracleResponse::Neighbors(list) => list.as_slice().serialize(s),
            OracleResponse::Invalid => s.serialize_str(INVALID_TAG),
        }
    }
}

impl<'de> Deserialize<'de> for OracleResponse {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Tag(String),
            List(Vec<VertexName>),
        }
        match Repr::deserialize(d)? {
            Repr::Tag(tag) if tag == INVALID_TAG => Ok(OracleResponse::Invalid),
            Repr::Tag(other) => Err(de::Error::custom(format!(
                "unexpected response tag `{other}`"
            ))),
            Repr::List(list) => {
                let list = ArrayVec::try_from(list.as_slice())
                    .map_err(|_| de::Error::custom("more than 3 neighbors"))?;
                Ok(OracleResponse::Neighbors(list))
            }
        }
    }
}

/// Black-box access to one named instance. Cloning shares the graph and
/// naming; the query counter is per clone.
#[derive(Clone, Debug)]
pub struct Oracle {
    graph: Arc<GluedTreesGraph>,
    naming: Arc<Naming>,
    query_count: u64,
}

impl Oracle {
    pub fn new(graph: Arc<GluedTreesGraph>, name_seed: u64) -> Self {
        let naming = Naming::sample(graph.n(), graph.vertex_count(), name_seed);
        Self::with_naming(graph, Arc::new(naming))
    }

    pub fn with_naming(graph: Arc<GluedTreesGraph>, naming: Arc<Naming>) -> Self {
        assert_eq!(
            naming.len() as u64,
            graph.vertex_count(),
            "naming size mismatch"
        );
        Self {
            graph,
            naming,
            query_count: 0,
        }
    }

    /// Builds the graph and its naming in one step, checking the memory
    /// budget from the environment.
    pub fn build(n: u32, seed: u64, name_seed: u64) -> Result<Self> {
        Self::build_with_budget(n, seed, name_seed, MemoryBudget::from_env())
    }

    pub fn build_with_budget(
        n: u32,
        seed: u64,
        name_seed: u64,
        budget: MemoryBudget,
    ) -> Result<Self> {
        let graph = GluedTreesGraph::build_with_budget(n, seed, budget)?;
        Ok(Self::new(Arc::new(graph), name_seed))
    }

    pub fn graph(&self) -> &GluedTreesGraph {
        &self.graph
    }

    pub fn naming(&self) -> &Naming {
        &self.naming
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    /// Same instance with the counter reset.
    pub fn fresh_session(&self) -> Self {
        Self {
            graph: Arc::clone(&self.graph),
            naming: Arc::clone(&self.naming),
            query_count: 0,
        }
    }

    pub fn entrance_name(&self) -> VertexName {
        self.name_of(self.graph.entrance())
    }

    pub fn name_of(&self, v: CanonicalVertex) -> VertexName {
        self.naming.name_of_id(self.graph.canonical_id(v))
    }

    /// Reverse lookup; for tests and audits, not for strategies.
    pub fn vertex_of(&self, name: VertexName) -> Option<CanonicalVertex> {
        self.naming
            .id_of(name)
            .and_then(|id| self.graph.vertex_at(id))
    }

    pub fn query(&mut self, name: VertexName) -> OracleResponse {
        self.query_count += 1;
        match self.vertex_of(name) {
            Some(v) => OracleResponse::Neighbors(
                self.graph
                    .structural_neighbors(v)
                    .iter()
                    .map(|&u| self.name_of(u))
                    .collect(),
            ),
            None => OracleResponse::Invalid,
        }
    }

    /// A degree-2 response for any name other than the ENTRANCE identifies
    /// the EXIT.
    pub fn is_exit_response(&self, name: VertexName, response: &OracleResponse) -> bool {
        response.degree() == Some(2) && name != self.entrance_name()
    }
}

/// Versioned on-disk form of a named instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub format_version: u32,
    pub n: u32,
    pub seed: u64,
    pub name_seed: u64,
    pub middle_cycle: Vec<u32>,
    /// Hex names indexed by canonical order.
    pub names: Vec<String>,
}

impl GraphFile {
    pub fn from_oracle(oracle: &Oracle) -> Self {
        let naming = oracle.naming();
        let graph = oracle.graph();
        Self {
            format_version: GRAPH_FORMAT_VERSION,
            n: graph.n(),
            seed: graph.seed(),
            name_seed: naming.seed(),
            middle_cycle: graph.middle_cycle(),
            names: (0..naming.len() as u64)
                .map(|id| naming.format_padded(naming.name_of_id(id)))
                .collect(),
        }
    }

    pub fn to_oracle(&self) -> Result<Oracle> {
        if self.format_version != GRAPH_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let graph = GluedTreesGraph::from_cycle(self.n, self.seed, &self.middle_cycle)?;
        if self.names.len() as u64 != graph.vertex_count() {
            return Err(Error::Format(format!(
                "{} names for {} vertices",
                self.names.len(),
                graph.vertex_count()
            )));
        }
        let names = self
            .names
            .iter()
            .map(|s| s.parse::<VertexName>().map(|v| v.0))
            .collect::<Result<Vec<_>>>()?;
        let naming = Naming::from_names(self.n, self.name_seed, names)?;
        Ok(Oracle::with_naming(Arc::new(graph), Arc::new(naming)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
