//! Rooted query trees and generators for them.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// A rooted tree on nodes `0..t` with root 0 and `parent(i) < i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RootedTree {
    /// `parents[i - 1]` is the parent of node `i`.
    parents: Vec<u32>,
}

impl RootedTree {
    pub fn single() -> Self {
        Self {
            parents: Vec::new(),
        }
    }

    /// `parents[i - 1]` is the parent of node `i`; each must be `< i`.
    pub fn from_parents(parents: Vec<u32>) -> Result<Self> {
        for (i, &p) in parents.iter().enumerate() {
            if p as usize > i {
                return Err(Error::InvalidArgument(format!(
                    "node {} has parent {p}; parents must precede their children",
                    i + 1
                )));
            }
        }
        Ok(Self { parents })
    }

    pub fn len(&self) -> usize {
        self.parents.len() + 1
    }

    /// Always false; a tree has at least its root.
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn parent(&self, node: usize) -> Option<usize> {
        node.checked_sub(1).map(|i| self.parents[i] as usize)
    }

    #[inline]
    pub fn grandparent(&self, node: usize) -> Option<usize> {
        self.parent(node).and_then(|p| self.parent(p))
    }

    pub fn depth(&self, node: usize) -> usize {
        let mut depth = 0;
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            cur = p;
            depth += 1;
        }
        depth
    }

    /// Parent array with `None` for the root, as stored in corpus files.
    pub fn to_parent_array(&self) -> Vec<Option<u32>> {
        std::iter::once(None)
            .chain(self.parents.iter().map(|&p| Some(p)))
            .collect()
    }

    pub fn from_parent_array(array: &[Option<u32>]) -> Result<Self> {
        match array.split_first() {
            Some((None, rest)) => {
                let parents = rest
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        p.ok_or_else(|| {
                            Error::InvalidArgument(format!("node {} has no parent", i + 1))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::from_parents(parents)
            }
            Some((Some(_), _)) => Err(Error::InvalidArgument(
                "the root must have a null parent".into(),
            )),
            None => Err(Error::InvalidArgument(
                "a tree needs at least one node".into(),
            )),
        }
    }
}

impl Serialize for RootedTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_parent_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RootedTree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let array = Vec::<Option<u32>>::deserialize(d)?;
        Self::from_parent_array(&array).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeShape {
    Path,
    /// A spine of `ceil(t / 2)` nodes with one leg on each of the first
    /// `floor(t / 2)` spine nodes.
    Caterpillar,
    /// Each node attaches to a uniformly random earlier node.
    RandomAttach,
    /// Heap order: `parent(i) = (i - 1) / 2`.
    FullBinary,
}

impl TreeShape {
    pub const ALL: [TreeShape; 4] = [
        TreeShape::Path,
        TreeShape::Caterpillar,
        TreeShape::RandomAttach,
        TreeShape::FullBinary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TreeShape::Path => "path",
            TreeShape::Caterpillar => "caterpillar",
            TreeShape::RandomAttach => "random_attach",
            TreeShape::FullBinary => "full_binary",
        }
    }
}

impl fmt::Display for TreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TreeShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|shape| shape.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown tree shape `{s}`")))
    }
}

pub fn make_tree(shape: TreeShape, t: usize, seed: u64) -> Result<RootedTree> {
    if t < 1 {
        return Err(Error::InvalidArgument(
            "a tree needs at least one node".into(),
        ));
    }
    if t > u32::MAX as usize {
        return Err(Error::InvalidArgument(format!("tree size {t} too large")));
    }
    let parents: Vec<u32> = match shape {
        TreeShape::Path => (0..t as u32 - 1).collect(),
        TreeShape::FullBinary => (1..t as u32).map(|i| (i - 1) / 2).collect(),
        TreeShape::Caterpillar => {
            let spine = t.div_ceil(2) as u32;
            (1..spine)
                .map(|i| i - 1)
                .chain(0..(t as u32 - spine))
                .collect()
        }
        TreeShape::RandomAttach => {
            let mut rng = Stream::new(seed).derive_named("random-attach");
            (1..t as u64).map(|i| rng.below(i) as u32).collect()
        }
    };
    RootedTree::from_parents(parents)
}

/// Reads a corpus: one JSON parent array per line; blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<RootedTree>> {
    let mut trees = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tree: RootedTree = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidArgument(format!("corpus line {}: {e}", lineno + 1)))?;
        trees.push(tree);
    }
    Ok(trees)
}

pub fn write_corpus<W: Write>(mut writer: W, trees: &[RootedTree]) -> Result<()> {
    for tree in trees {
        serde_json::to_writer(&mut writer, tree)?;
        writeln!(writer)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn array(tree: &RootedTree) -> Vec<Option<u32>> {
        tree.to_parent_array()
    }

    #[test]
    fn shapes() {
        assert_eq!(
            array(&make_tree(TreeShape::Path, 3, 0).unwrap()),
            vec![None, Some(0), Some(1)]
        );
        assert_eq!(
            array(&make_tree(TreeShape::FullBinary, 7, 0).unwrap()),
            vec![None, Some(0), Some(0), Some(1), Some(1), Some(2), Some(2)]
        );
        assert_eq!(
            array(&make_tree(TreeShape::Caterpillar, 6, 0).unwrap()),
            vec![None, Some(0), Some(1), Some(0), Some(1), Some(2)]
        );
        assert_eq!(make_tree(TreeShape::Caterpillar, 1, 0).unwrap().len(), 1);
        assert!(make_tree(TreeShape::Path, 0, 0).is_err());
    }

    #[test]
    fn random_attach_is_deterministic() {
        let a = make_tree(TreeShape::RandomAttach, 5, 9).unwrap();
        let b = make_tree(TreeShape::RandomAttach, 5, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn rejects_forward_parents() {
        assert!(RootedTree::from_parents(vec![0, 2]).is_err());
        assert!(RootedTree::from_parent_array(&[Some(0)]).is_err());
        assert!(RootedTree::from_parent_array(&[]).is_err());
    }

    #[test]
    fn corpus_round_trip() {
        let trees: Vec<RootedTree> = TreeShape::ALL
            .iter()
            .map(|&s| make_tree(s, 6, 1).unwrap())
            .chain([RootedTree::single()])
            .collect();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &trees).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("[null,0,1,2,3,4]\n"));
        assert_eq!(read_corpus(buf.as_slice()).unwrap(), trees);
        assert!(read_corpus("[null,0]\n[0]\n".as_bytes()).is_err());
    }

    #[test]
    fn depth_and_grandparent() {
        let t = make_tree(TreeShape::FullBinary, 7, 0).unwrap();
        assert_eq!(t.depth(0), 0);
        assert_eq!(t.depth(6), 2);
        assert_eq!(t.grandparent(6), Some(0));
        assert_eq!(t.grandparent(1), None);
        assert_eq!(t.parent(0), None);
    }
}
