//! Tensor-network graphs and their exact contraction.
//!
//! A network owns a list of nodes (each a [`Tensor`] whose axes are "slots")
//! and a list of edges. Every slot is bound to exactly one edge. An internal
//! edge joins two slots; an open edge has a single endpoint. Edge orientation
//! is fixed at construction: endpoint `a` is the first slot passed to
//! [`NetworkBuilder::connect`], and the *forward* direction runs `a -> b`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{contract_pair, outer, Tensor};

/// Node label: lattice cell coordinate plus site index within the cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub cell: [i32; 2],
    pub site: usize,
}

impl NodeId {
    pub const fn new(cell: [i32; 2], site: usize) -> Self {
        NodeId { cell, site }
    }

    /// Label for ad-hoc networks that do not live on a lattice.
    pub const fn plain(k: usize) -> Self {
        NodeId { cell: [0, 0], site: k }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Endpoint {
    pub node: usize,
    pub slot: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub a: Endpoint,
    /// `None` for an open (dangling) edge.
    pub b: Option<Endpoint>,
    pub dim: usize,
}

impl Edge {
    pub fn is_open(&self) -> bool {
        self.b.is_none()
    }

    /// The endpoint opposite to `e`, if any.
    pub fn other(&self, e: Endpoint) -> Option<Endpoint> {
        if self.a == e {
            self.b
        } else if self.b == Some(e) {
            Some(self.a)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub id: NodeId,
    pub tensor: Tensor,
    /// Edge index bound to each axis.
    pub slots: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TensorNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: BTreeMap<NodeId, usize>,
}

/// Incremental construction of a [`TensorNetwork`].
#[derive(Default)]
pub struct NetworkBuilder {
    nodes: Vec<(NodeId, Tensor)>,
    bound: Vec<Vec<Option<usize>>>,
    edges: Vec<Edge>,
    index: BTreeMap<NodeId, usize>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: NodeId, tensor: Tensor) -> Result<usize> {
        if self.index.contains_key(&id) {
            return Err(Error::InvalidArgument(format!("duplicate node {id:?}")));
        }
        let k = self.nodes.len();
        self.bound.push(vec![None; tensor.rank()]);
        self.nodes.push((id, tensor));
        self.index.insert(id, k);
        Ok(k)
    }

    fn check_slot(&self, node: usize, slot: usize) -> Result<usize> {
        let (_, t) = self
            .nodes
            .get(node)
            .ok_or_else(|| Error::UnknownNode(format!("{node}")))?;
        if slot >= t.rank() {
            return Err(Error::AxisOutOfRange {
                axis: slot,
                rank: t.rank(),
            });
        }
        if self.bound[node][slot].is_some() {
            return Err(Error::InvalidArgument(format!(
                "slot {slot} of node {node} is already bound"
            )));
        }
        Ok(t.dims()[slot])
    }

    /// Joins two slots with a new internal edge oriented `(n1, s1) -> (n2, s2)`.
    pub fn connect(&mut self, n1: usize, s1: usize, n2: usize, s2: usize) -> Result<usize> {
        let d1 = self.check_slot(n1, s1)?;
        let d2 = self.check_slot(n2, s2)?;
        if n1 == n2 && s1 == s2 {
            return Err(Error::InvalidArgument("edge joins a slot to itself".into()));
        }
        if d1 != d2 {
            return Err(Error::DimensionMismatch(format!("slot sizes {d1} and {d2} differ")));
        }
        let e = self.edges.len();
        self.edges.push(Edge {
            a: Endpoint { node: n1, slot: s1 },
            b: Some(Endpoint { node: n2, slot: s2 }),
            dim: d1,
        });
        self.bound[n1][s1] = Some(e);
        self.bound[n2][s2] = Some(e);
        Ok(e)
    }

    /// Declares a slot as an open edge.
    pub fn open(&mut self, node: usize, slot: usize) -> Result<usize> {
        let d = self.check_slot(node, slot)?;
        let e = self.edges.len();
        self.edges.push(Edge {
            a: Endpoint { node, slot },
            b: None,
            dim: d,
        });
        self.bound[node][slot] = Some(e);
        Ok(e)
    }

    pub fn build(self) -> Result<TensorNetwork> {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (k, (id, tensor)) in self.nodes.into_iter().enumerate() {
            let slots = self.bound[k]
                .iter()
                .enumerate()
                .map(|(s, b)| b.ok_or_else(|| Error::InvalidArgument(format!("slot {s} of node {id:?} is unbound"))))
                .collect::<Result<Vec<_>>>()?;
            nodes.push(Node { id, tensor, slots });
        }
        Ok(TensorNetwork {
            nodes,
            edges: self.edges,
            index: self.index,
        })
    }
}

impl TensorNetwork {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, k: usize) -> &Node {
        &self.nodes[k]
    }

    pub fn edge(&self, e: usize) -> Result<&Edge> {
        self.edges.get(e).ok_or(Error::UnknownEdge(e))
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_index(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn open_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].is_open()).collect()
    }

    pub fn internal_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| !self.edges[e].is_open()).collect()
    }

    pub fn is_closed(&self) -> bool {
        self.edges.iter().all(|e| !e.is_open())
    }

    /// Replaces a node's tensor by one with identical dims.
    pub fn set_tensor(&mut self, k: usize, tensor: Tensor) -> Result<()> {
        if tensor.dims() != self.nodes[k].tensor.dims() {
            return Err(Error::DimensionMismatch(format!(
                "replacement dims {:?} differ from {:?}",
                tensor.dims(),
                self.nodes[k].tensor.dims()
            )));
        }
        self.nodes[k].tensor = tensor;
        Ok(())
    }

    /// Whether two nodes share at least one edge.
    pub fn adjacent(&self, n1: usize, n2: usize) -> bool {
        self.nodes[n1].slots.iter().any(|&e| {
            let edge = &self.edges[e];
            match edge.b {
                Some(b) => (edge.a.node == n1 && b.node == n2) || (edge.a.node == n2 && b.node == n1),
                None => false,
            }
        })
    }

    /// Splits an internal edge into two open edges of the same dimension.
    ///
    /// The `a` side keeps index `e`; the `b` side becomes a new open edge
    /// appended at the end. Returns the network and `(a_edge, b_edge)`.
    pub fn cut_edge(&self, e: usize) -> Result<(TensorNetwork, usize, usize)> {
        let edge = self.edge(e)?.clone();
        let b = edge.b.ok_or(Error::NotInternal(e))?;
        let mut net = self.clone();
        let nb = net.edges.len();
        net.edges[e].b = None;
        net.edges.push(Edge {
            a: b,
            b: None,
            dim: edge.dim,
        });
        net.nodes[b.node].slots[b.slot] = nb;
        Ok((net, e, nb))
    }

    /// Joins two open edges; the result keeps the lower index and removes the
    /// higher one (later edge indices shift down by one).
    pub fn glue(&self, e1: usize, e2: usize) -> Result<TensorNetwork> {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        if lo == hi {
            return Err(Error::InvalidArgument("cannot glue an edge to itself".into()));
        }
        let a = self.edge(lo)?.clone();
        let b = self.edge(hi)?.clone();
        if !a.is_open() {
            return Err(Error::InvalidArgument(format!("edge {lo} is not open")));
        }
        if !b.is_open() {
            return Err(Error::InvalidArgument(format!("edge {hi} is not open")));
        }
        if a.dim != b.dim {
            return Err(Error::DimensionMismatch("glued edges differ in size".into()));
        }
        let mut net = self.clone();
        net.edges[lo].b = Some(b.a);
        net.edges.remove(hi);
        for node in net.nodes.iter_mut() {
            for s in node.slots.iter_mut() {
                if *s == hi {
                    *s = lo;
                } else if *s > hi {
                    *s -= 1;
                }
            }
        }
        Ok(net)
    }

    /// Replaces node `k` by a tensor carrying `extra` additional trailing axes,
    /// each exposed as a new open edge (appended in axis order).
    pub fn replace_with_open_axes(
        &self,
        k: usize,
        tensor: Tensor,
        extra: usize,
    ) -> Result<(TensorNetwork, Vec<usize>)> {
        let old = &self.nodes[k].tensor;
        if tensor.rank() != old.rank() + extra || tensor.dims()[..old.rank()] != *old.dims() {
            return Err(Error::DimensionMismatch(format!(
                "impurity dims {:?} incompatible with {:?} plus {extra} open axes",
                tensor.dims(),
                old.dims()
            )));
        }
        let mut net = self.clone();
        let base = old.rank();
        let mut added = Vec::with_capacity(extra);
        for j in 0..extra {
            let e = net.edges.len();
            net.edges.push(Edge {
                a: Endpoint {
                    node: k,
                    slot: base + j,
                },
                b: None,
                dim: tensor.dims()[base + j],
            });
            net.nodes[k].slots.push(e);
            added.push(e);
        }
        net.nodes[k].tensor = tensor;
        Ok((net, added))
    }

    /// Exact contraction. The result carries one axis per open edge, in edge
    /// index order; closed networks give a rank-0 tensor.
    pub fn contract(&self) -> Result<Tensor> {
        self.contract_bounded(usize::MAX)
    }

    /// Exact contraction refusing any intermediate larger than `max_entries`.
    ///
    /// Clusters are merged greedily, always picking the connected pair whose
    /// merged tensor is smallest (ties broken by lowest indices), so the
    /// result is deterministic.
    pub fn contract_bounded(&self, max_entries: usize) -> Result<Tensor> {
        let items = self.nodes.iter().map(|n| (n.tensor.clone(), n.slots.clone())).collect();
        Ok(contract_labeled(items, max_entries)?.0)
    }
}

/// Greedy exact contraction of tensors whose axes carry integer labels.
///
/// A label shared by two axes is summed over (also within one tensor); a
/// label seen once stays open. Pairs of clusters are merged smallest-result
/// first, ties broken by lowest index, so the result is deterministic.
/// Returns the tensor with open axes sorted by label, and those labels.
pub fn contract_labeled(items: Vec<(Tensor, Vec<usize>)>, max_entries: usize) -> Result<(Tensor, Vec<usize>)> {
    if items.is_empty() {
        return Ok((Tensor::scalar(crate::C64::new(1.0, 0.0)), Vec::new()));
    }
    let mut clusters: Vec<Option<Cluster>> = items
        .into_iter()
        .map(|(t, l)| Cluster::new(t, l).map(Some))
        .collect::<Result<_>>()?;
    loop {
        let live: Vec<usize> = (0..clusters.len()).filter(|&i| clusters[i].is_some()).collect();
        if live.len() == 1 {
            break;
        }
        let mut best: Option<(usize, usize, usize)> = None;
        for (x, &i) in live.iter().enumerate() {
            let ci = clusters[i].as_ref().unwrap();
            for &j in &live[x + 1..] {
                let cj = clusters[j].as_ref().unwrap();
                if !ci.labels.iter().any(|l| cj.labels.contains(l)) {
                    continue;
                }
                let size = ci.merged_size(cj);
                if best.map_or(true, |(s, _, _)| size < s) {
                    best = Some((size, i, j));
                }
            }
        }
        let (size, i, j) = match best {
            Some(b) => b,
            None => {
                // disconnected: outer product of the two smallest clusters
                let mut by_size = live.clone();
                by_size.sort_by_key(|&k| (clusters[k].as_ref().unwrap().tensor.len(), k));
                let (i, j) = (by_size[0].min(by_size[1]), by_size[0].max(by_size[1]));
                let s = clusters[i].as_ref().unwrap().tensor.len() * clusters[j].as_ref().unwrap().tensor.len();
                (s, i, j)
            }
        };
        if size > max_entries {
            return Err(Error::SizeBoundExceeded(size));
        }
        let cj = clusters[j].take().unwrap();
        let ci = clusters[i].take().unwrap();
        clusters[i] = Some(ci.merge(cj)?);
    }
    let last = clusters.into_iter().flatten().next().unwrap();
    let mut order: Vec<usize> = (0..last.labels.len()).collect();
    order.sort_by_key(|&k| last.labels[k]);
    let labels = order.iter().map(|&k| last.labels[k]).collect();
    Ok((last.tensor.permute(&order)?, labels))
}

struct Cluster {
    tensor: Tensor,
    labels: Vec<usize>,
}

impl Cluster {
    fn new(mut tensor: Tensor, mut labels: Vec<usize>) -> Result<Self> {
        if labels.len() != tensor.rank() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a rank-{} tensor",
                labels.len(),
                tensor.rank()
            )));
        }
        // trace out self-loops
        loop {
            let mut pair = None;
            'find: for x in 0..labels.len() {
                for y in x + 1..labels.len() {
                    if labels[x] == labels[y] {
                        pair = Some((x, y));
                        break 'find;
                    }
                }
            }
            match pair {
                Some((x, y)) => {
                    tensor = tensor.trace_axes(x, y)?;
                    labels.remove(y);
                    labels.remove(x);
                }
                None => break,
            }
        }
        Ok(Cluster { tensor, labels })
    }

    fn merged_size(&self, other: &Cluster) -> usize {
        let mut size = 1usize;
        for (k, l) in self.labels.iter().enumerate() {
            if !other.labels.contains(l) {
                size = size.saturating_mul(self.tensor.dims()[k]);
            }
        }
        for (k, l) in other.labels.iter().enumerate() {
            if !self.labels.contains(l) {
                size = size.saturating_mul(other.tensor.dims()[k]);
            }
        }
        size
    }

    fn merge(self, other: Cluster) -> Result<Cluster> {
        let mut ax_a = Vec::new();
        let mut ax_b = Vec::new();
        for (k, l) in self.labels.iter().enumerate() {
            if let Some(p) = other.labels.iter().position(|m| m == l) {
                ax_a.push(k);
                ax_b.push(p);
            }
        }
        let tensor = if ax_a.is_empty() {
            outer(&self.tensor, &other.tensor)
        } else {
            contract_pair(&self.tensor, &ax_a, &other.tensor, &ax_b)?
        };
        let mut labels: Vec<usize> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(k, _)| !ax_a.contains(k))
            .map(|(_, &l)| l)
            .collect();
        labels.extend(
            other
                .labels
                .iter()
                .enumerate()
                .filter(|(k, _)| !ax_b.contains(k))
                .map(|(_, &l)| l),
        );
        Ok(Cluster { tensor, labels })
    }
}
