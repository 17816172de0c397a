//! The glued-trees graph: two complete binary trees of height `n` whose
//! leaves are joined by a random cycle alternating between the two trees.
//!
//! Vertices are addressed canonically by `(level, index)`. Level 0 is the
//! ENTRANCE, level `2n + 1` the EXIT; level `l` holds `2^min(l, 2n+1-l)`
//! vertices. Tree edges are arithmetic (`index / 2` toward the root,
//! `2 * index + {0, 1}` toward the leaves), so only the middle cycle is
//! stored.

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Largest supported tree height. Canonical ids must fit in `u32` and
/// names in 64 bits.
pub const MAX_HEIGHT: u32 = 29;

/// Environment variable that caps construction memory, in MiB.
pub const MAX_MEM_ENV: &str = "GLUEDTREES_MAX_MEM_MB";
pub const DEFAULT_MAX_MEM_MB: u64 = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalVertex {
    pub level: u32,
    pub index: u32,
}

impl CanonicalVertex {
    pub const fn new(level: u32, index: u32) -> Self {
        Self { level, index }
    }
}

pub type Neighbors = ArrayVec<CanonicalVertex, 3>;

/// Memory cap applied before allocating a graph and its naming table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryBudget {
    pub max_bytes: u64,
}

impl MemoryBudget {
    pub fn from_mb(mb: u64) -> Self {
        Self {
            max_bytes: mb.saturating_mul(1 << 20),
        }
    }

    /// Reads `GLUEDTREES_MAX_MEM_MB`, falling back to 2048 MiB.
    pub fn from_env() -> Self {
        let mb = std::env::var(MAX_MEM_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u64>().ok())
            .unwrap_or(DEFAULT_MAX_MEM_MB);
        Self::from_mb(mb)
    }

    /// Estimated resident bytes of a height-`n` graph plus its oracle
    /// naming table (names, sorted lookup index, cycle arrays).
    pub fn estimate_bytes(n: u32) -> u64 {
        let vertices = vertex_count(n);
        let leaves = 1u64 << n;
        16 * leaves + 24 * vertices
    }

    pub fn check(&self, n: u32) -> Result<()> {
        if n > MAX_HEIGHT {
            return Err(Error::Resource(format!(
                "height {n} exceeds the supported maximum {MAX_HEIGHT}"
            )));
        }
        let need = Self::estimate_bytes(n);
        if need > self.max_bytes {
            return Err(Error::Resource(format!(
                "height {n} needs about {} MiB, budget is {} MiB ({MAX_MEM_ENV})",
                need >> 20,
                self.max_bytes >> 20
            )));
        }
        Ok(())
    }
}

/// `2^{n+2} - 2`.
pub fn vertex_count(n: u32) -> u64 {
    (1u64 << (n + 2)) - 2
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GluedTreesGraph {
    n: u32,
    seed: u64,
    /// Cycle order: `left[0], right[0], left[1], right[1], ..., left[m-1],
    /// right[m-1]`, then back to `left[0]`.
    left_order: Vec<u32>,
    right_order: Vec<u32>,
    left_pos: Vec<u32>,
    right_pos: Vec<u32>,
    offsets: Vec<u64>,
}

impl GluedTreesGraph {
    /// Samples a uniformly random alternating middle cycle, using the memory
    /// budget from the environment.
    pub fn build(n: u32, seed: u64) -> Result<Self> {
        Self::build_with_budget(n, seed, MemoryBudget::from_env())
    }

    pub fn build_with_budget(n: u32, seed: u64, budget: MemoryBudget) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument(
                "tree height n must be at least 1".into(),
            ));
        }
        budget.check(n)?;
        let m = 1u32 << n;
        let mut rng = Stream::new(seed).derive_named("middle-cycle");
        // Left leaf 0 anchors the rotation; the remaining left leaves and all
        // right leaves are permuted uniformly. Each alternating Hamiltonian
        // cycle then arises from exactly two (left, right) orders (one per
        // direction), so the cycle is uniform.
        let mut left_order: Vec<u32> = (0..m).collect();
        rng.shuffle(&mut left_order[1..]);
        let mut right_order: Vec<u32> = (0..m).collect();
        rng.shuffle(&mut right_order);
        Ok(Self::assemble(n, seed, left_order, right_order))
    }

    /// Rebuilds a graph from a stored cycle (`[l0, r0, l1, r1, ...]`).
    pub fn from_cycle(n: u32, seed: u64, cycle: &[u32]) -> Result<Self> {
        if !(1..=MAX_HEIGHT).contains(&n) {
            return Err(Error::Format(format!("unsupported height {n}")));
        }
        let m = 1usize << n;
        if cycle.len() != 2 * m {
            return Err(Error::Format(format!(
                "middle cycle has {} entries, expected {}",
                cycle.len(),
                2 * m
            )));
        }
        let left_order: Vec<u32> = cycle.iter().step_by(2).copied().collect();
        let right_order: Vec<u32> = cycle.iter().skip(1).step_by(2).copied().collect();
        for (side, order) in [("left", &left_order), ("right", &right_order)] {
            let mut seen = vec![false; m];
            for &leaf in order.iter() {
                let slot = seen
                    .get_mut(leaf as usize)
                    .ok_or_else(|| Error::Format(format!("{side} leaf {leaf} out of range")))?;
                if std::mem::replace(slot, true) {
                    return Err(Error::Format(format!("{side} leaf {leaf} repeated")));
                }
            }
        }
        Ok(Self::assemble(n, seed, left_order, right_order))
    }

    fn assemble(n: u32, seed: u64, left_order: Vec<u32>, right_order: Vec<u32>) -> Self {
        let m = left_order.len();
        let mut left_pos = vec![0u32; m];
        let mut right_pos = vec![0u32; m];
        for (k, (&l, &r)) in left_order.iter().zip(&right_order).enumerate() {
            left_pos[l as usize] = k as u32;
            right_pos[r as usize] = k as u32;
        }
        let mut offsets = Vec::with_capacity(2 * n as usize + 3);
        let mut acc = 0u64;
        for level in 0..=(2 * n + 1) {
            offsets.push(acc);
            acc += 1u64 << level_exponent(n, level);
        }
        offsets.push(acc);
        Self {
            n,
            seed,
            left_order,
            right_order,
            left_pos,
            right_pos,
            offsets,
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vertex_count(&self) -> u64 {
        vertex_count(self.n)
    }

    pub fn exit_level(&self) -> u32 {
        2 * self.n + 1
    }

    pub fn entrance(&self) -> CanonicalVertex {
        CanonicalVertex::new(0, 0)
    }

    pub fn exit(&self) -> CanonicalVertex {
        CanonicalVertex::new(self.exit_level(), 0)
    }

    /// Number of vertices on `level`.
    pub fn width(&self, level: u32) -> u32 {
        1 << level_exponent(self.n, level)
    }

    pub fn contains(&self, v: CanonicalVertex) -> bool {
        v.level <= self.exit_level() && v.index < self.width(v.level)
    }

    pub fn level_of(&self, v: CanonicalVertex) -> u32 {
        v.level
    }

    /// Distance from `v` to a leaf of its own tree.
    pub fn height_of(&self, v: CanonicalVertex) -> u32 {
        if v.level <= self.n {
            self.n - v.level
        } else {
            v.level - self.n - 1
        }
    }

    /// The middle cycle as `[l0, r0, l1, r1, ...]` leaf indices.
    pub fn middle_cycle(&self) -> Vec<u32> {
        self.left_order
            .iter()
            .zip(&self.right_order)
            .flat_map(|(&l, &r)| [l, r])
            .collect()
    }

    /// Position of `v` in canonical order (level by level, index ascending).
    pub fn canonical_id(&self, v: CanonicalVertex) -> u64 {
        self.offsets[v.level as usize] + u64::from(v.index)
    }

    pub fn vertex_at(&self, id: u64) -> Option<CanonicalVertex> {
        if id >= self.vertex_count() {
            return None;
        }
        let level = self.offsets.partition_point(|&o| o <= id) - 1;
        Some(CanonicalVertex::new(
            level as u32,
            (id - self.offsets[level]) as u32,
        ))
    }

    /// Neighbors ordered toward the ENTRANCE first: parent or cycle
    /// neighbors on the lower level, then those on the higher level.
    #[inline]
    pub fn structural_neighbors(&self, v: CanonicalVertex) -> Neighbors {
        let n = self.n;
        let CanonicalVertex { level, index } = v;
        let mut out = Neighbors::new();
        let m = self.left_order.len();
        if level < n {
            if level > 0 {
                out.push(CanonicalVertex::new(level - 1, index / 2));
            }
            out.push(CanonicalVertex::new(level + 1, 2 * index));
            out.push(CanonicalVertex::new(level + 1, 2 * index + 1));
        } else if level == n {
            out.push(CanonicalVertex::new(level - 1, index / 2));
            let k = self.left_pos[index as usize] as usize;
            let before = self.right_order[(k + m - 1) % m];
            let after = self.right_order[k];
            out.push(CanonicalVertex::new(n + 1, before));
            out.push(CanonicalVertex::new(n + 1, after));
        } else if level == n + 1 {
            let k = self.right_pos[index as usize] as usize;
            out.push(CanonicalVertex::new(n, self.left_order[k]));
            out.push(CanonicalVertex::new(n, self.left_order[(k + 1) % m]));
            out.push(CanonicalVertex::new(n + 2, index / 2));
        } else {
            out.push(CanonicalVertex::new(level - 1, 2 * index));
            out.push(CanonicalVertex::new(level - 1, 2 * index + 1));
            if level < self.exit_level() {
                out.push(CanonicalVertex::new(level + 1, index / 2));
            }
        }
        out
    }

    /// Structural self-check used by the graph audit.
    pub fn audit(&self) -> GraphAudit {
        let total = self.vertex_count();
        let mut degree2 = 0u64;
        let mut degree3 = 0u64;
        let mut other_degree = 0u64;
        let mut symmetric = true;
        let mut in_range = true;
        for id in 0..total {
            let v = self.vertex_at(id).expect("id below vertex count");
            let nbrs = self.structural_neighbors(v);
            match nbrs.len() {
                2 => degree2 += 1,
                3 => degree3 += 1,
                _ => other_degree += 1,
            }
            for &u in &nbrs {
                if !self.contains(u) {
                    in_range = false;
                    continue;
                }
                if !self.structural_neighbors(u).contains(&v) {
                    symmetric = false;
                }
            }
        }
        let degree2_are_terminals = degree2 == 2
            && self.structural_neighbors(self.entrance()).len() == 2
            && self.structural_neighbors(self.exit()).len() == 2;
        let widths_ok = (0..=self.exit_level()).all(|l| {
            let expected = 1u64 << l.min(self.exit_level() - l);
            self.offsets[l as usize + 1] - self.offsets[l as usize] == expected
        });

        // Walk the cycle through the adjacency function alone.
        let m = 1u64 << self.n;
        let n = self.n;
        let start = CanonicalVertex::new(n, 0);
        let mut prev = start;
        let mut cur = cycle_neighbors(self, start)[1];
        let mut length = 1u64;
        let mut alternating = true;
        while cur != start && length <= 2 * m {
            let [a, b] = cycle_neighbors(self, cur);
            let next = if a == prev { b } else { a };
            if next.level == cur.level || (next.level != n && next.level != n + 1) {
                alternating = false;
            }
            prev = cur;
            cur = next;
            length += 1;
        }
        GraphAudit {
            n: self.n,
            seed: self.seed,
            vertex_count: total,
            degree2_count: degree2,
            degree3_count: degree3,
            other_degree_count: other_degree,
            widths_ok: widths_ok && in_range,
            symmetric,
            cycle_length: length,
            single_cycle: cur == start && length == 2 * m,
            alternating,
            ok: total == vertex_count(self.n)
                && degree2_are_terminals
                && degree3 == total - 2
                && other_degree == 0
                && widths_ok
                && in_range
                && symmetric
                && cur == start
                && length == 2 * m
                && alternating,
        }
    }
}

fn cycle_neighbors(g: &GluedTreesGraph, v: CanonicalVertex) -> [CanonicalVertex; 2] {
    let nbrs = g.structural_neighbors(v);
    let mut it = nbrs.iter().copied().filter(|u| {
        (u.level == g.n && v.level == g.n + 1) || (u.level == g.n + 1 && v.level == g.n)
    });
    let a = it.next().expect("leaf has two cycle neighbors");
    let b = it.next().expect("leaf has two cycle neighbors");
    [a, b]
}

fn level_exponent(n: u32, level: u32) -> u32 {
    level.min(2 * n + 1 - level)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphAudit {
    pub n: u32,
    pub seed: u64,
    pub vertex_count: u64,
    pub degree2_count: u64,
    pub degree3_count: u64,
    pub other_degree_count: u64,
    pub widths_ok: bool,
    pub symmetric: bool,
    pub cycle_length: u64,
    pub single_cycle: bool,
    pub alternating: bool,
    pub ok: bool,
}
