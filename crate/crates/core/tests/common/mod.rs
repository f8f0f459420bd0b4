#![allow(dead_code)]

use loopseries::bp::{converge_and_normalize, BpFixedPoint};
use loopseries::{NetworkBuilder, NodeId, Tensor, TensorNetwork, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Entries uniform on `[0.1, 1]`, real.
pub fn positive_tensor(r: &mut ChaCha8Rng, dims: &[usize]) -> Tensor {
    Tensor::from_fn(dims, |_| c(r.gen_range(0.1..1.0)))
}

pub fn complex_tensor(r: &mut ChaCha8Rng, dims: &[usize]) -> Tensor {
    Tensor::from_fn(dims, |_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Builds a network from an edge list `(u, v, dim)` with positive random
/// tensors; slots follow edge order at each node.
pub fn network_from_edges(r: &mut ChaCha8Rng, n: usize, edges: &[(usize, usize, usize)]) -> TensorNetwork {
    let mut dims = vec![Vec::new(); n];
    let mut slot_of = Vec::new();
    for &(u, v, d) in edges {
        slot_of.push((dims[u].len(), dims[v].len()));
        dims[u].push(d);
        dims[v].push(d);
    }
    let mut b = NetworkBuilder::new();
    for (k, ds) in dims.iter().enumerate() {
        b.add_node(NodeId::plain(k), positive_tensor(r, ds)).unwrap();
    }
    for (&(u, v, _), &(su, sv)) in edges.iter().zip(&slot_of) {
        b.connect(u, su, v, sv).unwrap();
    }
    b.build().unwrap()
}

/// Connected graph with at most `max_edges` edges, node degree at most 5 and
/// node tensors of at most 1024 entries.
pub fn random_closed_network(r: &mut ChaCha8Rng, max_edges: usize, max_dim: usize) -> TensorNetwork {
    let n = r.gen_range(3..=7);
    let target = r.gen_range(n..=max_edges);
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut deg = vec![0usize; n];
    let mut size = vec![1usize; n];
    let mut try_add = |u: usize, v: usize, edges: &mut Vec<(usize, usize, usize)>, r: &mut ChaCha8Rng| {
        if deg[u] >= 5 || deg[v] >= 5 {
            return false;
        }
        let mut d = r.gen_range(1..=max_dim);
        if size[u] * d > 1024 || size[v] * d > 1024 {
            d = 1;
        }
        deg[u] += 1;
        deg[v] += 1;
        size[u] *= d;
        size[v] *= d;
        edges.push((u, v, d));
        true
    };
    for v in 1..n {
        let u = r.gen_range(0..v);
        // spanning tree edges never exceed the degree cap for n <= 7
        try_add(u, v, &mut edges, r);
    }
    let mut attempts = 0;
    while edges.len() < target && attempts < 200 {
        attempts += 1;
        let u = r.gen_range(0..n);
        let v = r.gen_range(0..n);
        if u != v {
            try_add(u.min(v), u.max(v), &mut edges, r);
        }
    }
    network_from_edges(r, n, &edges)
}

pub fn random_tree(r: &mut ChaCha8Rng, max_nodes: usize, max_dim: usize) -> TensorNetwork {
    let n = r.gen_range(2..=max_nodes);
    let mut edges = Vec::new();
    let mut deg = vec![0usize; n];
    for v in 1..n {
        let mut u = r.gen_range(0..v);
        while deg[u] >= 4 {
            u = r.gen_range(0..v);
        }
        deg[u] += 1;
        deg[v] += 1;
        edges.push((u, v, r.gen_range(1..=max_dim)));
    }
    network_from_edges(r, n, &edges)
}

/// Two squares sharing a rung: a 2x3 grid graph with 7 edges.
pub fn domino(r: &mut ChaCha8Rng, dim: usize) -> TensorNetwork {
    let e = [(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)];
    let edges: Vec<_> = e.iter().map(|&(u, v)| (u, v, dim)).collect();
    network_from_edges(r, 6, &edges)
}

pub fn converge(net: &TensorNetwork) -> (TensorNetwork, BpFixedPoint) {
    converge_and_normalize(net).expect("bp converges")
}

/// Plain element-wise contraction of two tensors over paired axes.
pub fn naive_contract(a: &Tensor, axes_a: &[usize], b: &Tensor, axes_b: &[usize]) -> Tensor {
    let free_a: Vec<usize> = (0..a.rank()).filter(|x| !axes_a.contains(x)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|x| !axes_b.contains(x)).collect();
    let mut out_dims: Vec<usize> = free_a.iter().map(|&x| a.dims()[x]).collect();
    out_dims.extend(free_b.iter().map(|&x| b.dims()[x]));
    let sum_dims: Vec<usize> = axes_a.iter().map(|&x| a.dims()[x]).collect();
    let total: usize = sum_dims.iter().product();
    Tensor::from_fn(&out_dims, |idx| {
        let mut acc = C64::new(0.0, 0.0);
        let mut ia = vec![0; a.rank()];
        let mut ib = vec![0; b.rank()];
        for (k, &x) in free_a.iter().enumerate() {
            ia[x] = idx[k];
        }
        for (k, &x) in free_b.iter().enumerate() {
            ib[x] = idx[free_a.len() + k];
        }
        for mut flat in 0..total {
            for j in (0..sum_dims.len()).rev() {
                let v = flat % sum_dims[j];
                flat /= sum_dims[j];
                ia[axes_a[j]] = v;
                ib[axes_b[j]] = v;
            }
            acc += a.get(&ia) * b.get(&ib);
        }
        acc
    })
}

/// Sum over every index assignment of a closed network.
pub fn brute_force_value(net: &TensorNetwork) -> C64 {
    let dims: Vec<usize> = net.edges().iter().map(|e| e.dim).collect();
    let total: usize = dims.iter().product();
    let mut acc = C64::new(0.0, 0.0);
    let mut assign = vec![0; dims.len()];
    for mut flat in 0..total {
        for j in (0..dims.len()).rev() {
            assign[j] = flat % dims[j];
            flat /= dims[j];
        }
        let mut p = C64::new(1.0, 0.0);
        for node in net.nodes() {
            let idx: Vec<usize> = node.slots.iter().map(|&e| assign[e]).collect();
            p *= node.tensor.get(&idx);
        }
        acc += p;
    }
    acc
}
