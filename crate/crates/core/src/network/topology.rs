//! Rooted spanning trees and the path-branch incidence matrix.

use std::collections::VecDeque;

use super::Network;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parent link of a non-root bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parent {
    pub bus: usize,
    pub branch: usize,
}

/// A radial operating configuration rooted at the supply point.
///
/// Columns of the incidence matrix are the non-root buses in network order;
/// row `k` is the parent branch of column bus `k`, so the matrix is square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadialTopology {
    root: usize,
    closed: Vec<bool>,
    parent: Vec<Option<Parent>>,
    children: Vec<Vec<usize>>,
    depth_order: Vec<usize>,
    depth: Vec<usize>,
    columns: Vec<usize>,
    column_of: Vec<Option<usize>>,
    sending: Vec<Option<usize>>,
}

impl RadialTopology {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn n_buses(&self) -> usize {
        self.parent.len()
    }

    pub fn closed(&self) -> &[bool] {
        &self.closed
    }

    pub fn parent(&self, bus: usize) -> Option<Parent> {
        self.parent[bus]
    }

    pub fn children(&self, bus: usize) -> &[usize] {
        &self.children[bus]
    }

    /// Buses sorted root-outward (breadth-first).
    pub fn depth_order(&self) -> &[usize] {
        &self.depth_order
    }

    pub fn depth(&self, bus: usize) -> usize {
        self.depth[bus]
    }

    /// Non-root buses in network order (incidence-matrix columns).
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn column_of(&self, bus: usize) -> Option<usize> {
        self.column_of[bus]
    }

    /// In-tree branches in incidence-matrix row order.
    pub fn rows(&self) -> Vec<usize> {
        self.columns.iter().map(|&b| self.parent[b].expect("non-root bus has a parent").branch).collect()
    }

    pub fn in_tree(&self, branch: usize) -> bool {
        self.sending[branch].is_some()
    }

    /// Parent-side bus of an in-tree branch.
    pub fn sending_bus(&self, branch: usize) -> Option<usize> {
        self.sending[branch]
    }

    /// Branches on the root path of `bus` (set Psi), ordered root-outward.
    pub fn path(&self, bus: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.depth[bus]);
        let mut u = bus;
        while let Some(p) = self.parent[u] {
            out.push(p.branch);
            u = p.bus;
        }
        out.reverse();
        out
    }

    pub fn path_incidence<T: Scalar>(&self) -> DenseMatrix<T> {
        let n = self.columns.len();
        let mut t = DenseMatrix::zeros(n, n);
        for (k, &bus) in self.columns.iter().enumerate() {
            let mut u = bus;
            while let Some(p) = self.parent[u] {
                let row = self.column_of[u].expect("non-root bus has a column");
                t[(row, k)] = T::one();
                u = p.bus;
            }
        }
        t
    }
}

/// Builds the rooted tree spanned by the `closed` branches.
pub fn build_tree<T: Scalar>(network: &Network<T>, closed: &[bool]) -> Result<RadialTopology> {
    let n = network.n_buses();
    if closed.len() != network.n_branches() {
        return Err(Error::Validation(format!(
            "branch-state vector has {} entries for {} branches",
            closed.len(),
            network.n_branches()
        )));
    }
    let root = network.root();
    let adj = network.adjacency(closed);
    let mut parent: Vec<Option<Parent>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut depth = vec![0; n];
    let mut depth_order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        depth_order.push(u);
        let via = parent[u].map(|p| p.branch);
        for &(v, l) in &adj[u] {
            if Some(l) == via {
                continue;
            }
            if seen[v] {
                return Err(Error::NotRadial { branch: network.branch_label(l) });
            }
            seen[v] = true;
            parent[v] = Some(Parent { bus: u, branch: l });
            depth[v] = depth[u] + 1;
            queue.push_back(v);
        }
    }
    if let Some(bus) = seen.iter().position(|s| !s) {
        return Err(Error::Disconnected { bus: network.buses()[bus].id.0 });
    }
    let mut children = vec![Vec::new(); n];
    let mut sending = vec![None; network.n_branches()];
    for &u in &depth_order[1..] {
        let p = parent[u].expect("reached bus has a parent");
        children[p.bus].push(u);
        sending[p.branch] = Some(p.bus);
    }
    let columns: Vec<usize> = (0..n).filter(|&b| b != root).collect();
    let mut column_of = vec![None; n];
    for (k, &b) in columns.iter().enumerate() {
        column_of[b] = Some(k);
    }
    Ok(RadialTopology {
        root,
        closed: closed.to_vec(),
        parent,
        children,
        depth_order,
        depth,
        columns,
        column_of,
        sending,
    })
}

/// Path-branch incidence matrix `T` of a radial topology.
pub fn path_incidence<T: Scalar>(topology: &RadialTopology) -> DenseMatrix<T> {
    topology.path_incidence()
}
