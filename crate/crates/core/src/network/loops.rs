//! Fundamental loops of the tie branches and their overlapping loop sets.

use std::collections::BTreeSet;

use super::{build_tree, Network};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FundamentalLoop {
    /// The normally-open branch that closes the loop.
    pub tie: usize,
    /// All branches of the loop including the tie, ascending.
    pub branches: Vec<usize>,
}

/// A maximal group of loops connected through shared branches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapSet {
    /// Indices into [`LoopStructure::fundamental_loops`].
    pub loops: Vec<usize>,
    /// Union of the member loops' branches, ascending.
    pub branches: Vec<usize>,
}

impl OverlapSet {
    /// Number of branches in the set.
    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    /// Number of links, i.e. branches that must be open in any radial configuration.
    pub fn n_links(&self) -> usize {
        self.loops.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoopStructure {
    pub fundamental_loops: Vec<FundamentalLoop>,
    pub overlap_sets: Vec<OverlapSet>,
}

impl LoopStructure {
    pub fn is_empty(&self) -> bool {
        self.fundamental_loops.is_empty()
    }

    /// Overlap set containing `branch`, if any.
    pub fn set_of(&self, branch: usize) -> Option<usize> {
        self.overlap_sets.iter().position(|s| s.branches.binary_search(&branch).is_ok())
    }
}

/// Finds one fundamental loop per normally-open branch, relative to the
/// normally-closed tree, and merges loops that share branches.
pub fn loop_structure<T: Scalar>(network: &Network<T>) -> Result<LoopStructure> {
    let tree = build_tree(network, &network.normal_closed())?;
    let mut loops = Vec::new();
    for (l, br) in network.branches().iter().enumerate() {
        if !br.normally_open {
            continue;
        }
        let (a, b) = network.ends(l);
        let pa: BTreeSet<usize> = tree.path(a).into_iter().collect();
        let pb: BTreeSet<usize> = tree.path(b).into_iter().collect();
        let mut branches: BTreeSet<usize> = pa.symmetric_difference(&pb).copied().collect();
        branches.insert(l);
        loops.push(FundamentalLoop { tie: l, branches: branches.into_iter().collect() });
    }

    // union-find over loops sharing a branch
    let mut parent: Vec<usize> = (0..loops.len()).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let mut owner = vec![None; network.n_branches()];
    for (k, lp) in loops.iter().enumerate() {
        for &l in &lp.branches {
            match owner[l] {
                None => owner[l] = Some(k),
                Some(j) => {
                    let (ra, rb) = (find(&mut parent, j), find(&mut parent, k));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
    }
    let mut sets: Vec<OverlapSet> = Vec::new();
    let mut set_of_root = vec![None; loops.len()];
    for k in 0..loops.len() {
        let r = find(&mut parent, k);
        let idx = *set_of_root[r].get_or_insert_with(|| {
            sets.push(OverlapSet { loops: Vec::new(), branches: Vec::new() });
            sets.len() - 1
        });
        sets[idx].loops.push(k);
    }
    for set in &mut sets {
        let union: BTreeSet<usize> = set.loops.iter().flat_map(|&k| loops[k].branches.iter().copied()).collect();
        set.branches = union.into_iter().collect();
    }
    Ok(LoopStructure { fundamental_loops: loops, overlap_sets: sets })
}
