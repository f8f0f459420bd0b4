//! Belief propagation on closed tensor networks.
//!
//! Messages are stored per edge: `forward[e]` travels from endpoint `a` to
//! endpoint `b` and is therefore the message *arriving* at `b`'s slot;
//! `backward[e]` arrives at `a`'s slot. All products between messages are
//! bilinear (no complex conjugation).

use alloc::vec::Vec;

use num_complex::ComplexFloat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{boundary_cap, unit_cell_network, DoubleLayerCell};
use crate::linalg::{dot, inner, vec_norm};
use crate::network::{Endpoint, TensorNetwork};
use crate::tensor::Tensor;
use crate::C64;

pub const DEFAULT_DAMPING: f64 = 0.2;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SWEEPS: usize = 5000;

/// Sweeps in the plateau window.
const PLATEAU_WINDOW: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitStrategy {
    Identity,
    Random(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MessageSet {
    pub forward: Vec<Vec<C64>>,
    pub backward: Vec<Vec<C64>>,
}

impl MessageSet {
    pub fn get(&self, edge: usize, dir: Direction) -> &[C64] {
        match dir {
            Direction::Forward => &self.forward[edge],
            Direction::Backward => &self.backward[edge],
        }
    }

    pub fn get_mut(&mut self, edge: usize, dir: Direction) -> &mut Vec<C64> {
        match dir {
            Direction::Forward => &mut self.forward[edge],
            Direction::Backward => &mut self.backward[edge],
        }
    }

    /// Message arriving at a given slot of the network.
    pub fn incoming(&self, net: &TensorNetwork, node: usize, slot: usize) -> &[C64] {
        let e = net.node(node).slots[slot];
        if net.edges()[e].a == (Endpoint { node, slot }) {
            &self.backward[e]
        } else {
            &self.forward[e]
        }
    }

    /// Bilinear overlap `forward . backward` on an edge.
    pub fn overlap(&self, edge: usize) -> C64 {
        dot(&self.forward[edge], &self.backward[edge])
    }
}

/// Converged (and possibly normalized) BP state.
#[derive(Clone, Debug)]
pub struct BpFixedPoint {
    pub messages: MessageSet,
    pub residual: f64,
    pub sweeps: usize,
    /// Vacuum scalar of every node for the current messages and tensors.
    pub vacuum: Vec<C64>,
    /// Sum of complex logs absorbed into tensor and message rescaling.
    pub log_scale: C64,
    pub normalized: bool,
}

fn check_closed(net: &TensorNetwork) -> Result<()> {
    let open = net.open_edges().len();
    if open > 0 {
        return Err(Error::NotClosed(open));
    }
    Ok(())
}

pub fn init_messages(net: &TensorNetwork, strategy: InitStrategy) -> Result<MessageSet> {
    check_closed(net)?;
    let ne = net.num_edges();
    let mut forward = Vec::with_capacity(ne);
    let mut backward = Vec::with_capacity(ne);
    match strategy {
        InitStrategy::Identity => {
            for e in net.edges() {
                forward.push(boundary_cap(e.dim));
                backward.push(boundary_cap(e.dim));
            }
        }
        InitStrategy::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = |n: usize| {
                let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen::<f64>(), 0.0)).collect();
                let nrm = vec_norm(&v);
                if nrm > 0.0 {
                    v.iter_mut().for_each(|z| *z /= nrm);
                } else {
                    v[0] = C64::new(1.0, 0.0);
                }
                v
            };
            for e in net.edges() {
                forward.push(draw(e.dim));
                backward.push(draw(e.dim));
            }
        }
    }
    Ok(MessageSet { forward, backward })
}

/// Contracts node `k` with its incoming messages on every slot except those
/// in `open`; the result keeps the open slots in increasing slot order.
pub fn node_environment(net: &TensorNetwork, msgs: &MessageSet, k: usize, open: &[usize]) -> Result<Tensor> {
    let node = net.node(k);
    let mut t = node.tensor.clone();
    for slot in (0..node.slots.len()).rev() {
        if open.contains(&slot) {
            continue;
        }
        t = t.contract_vector(slot, msgs.incoming(net, k, slot))?;
    }
    Ok(t)
}

/// Vacuum scalar of node `k`: its tensor capped with all incoming messages.
pub fn vacuum_scalar(net: &TensorNetwork, msgs: &MessageSet, k: usize) -> Result<C64> {
    Ok(node_environment(net, msgs, k, &[])?.to_scalar())
}

/// Raw outgoing message from `node` through `slot`, not normalized.
pub fn outgoing_message(net: &TensorNetwork, msgs: &MessageSet, node: usize, slot: usize) -> Result<Vec<C64>> {
    Ok(node_environment(net, msgs, node, &[slot])?.into_data())
}

/// One synchronous damped sweep. Returns the new messages and the largest
/// change (2-norm) of any unit-normalized directed message.
pub fn bp_sweep(net: &TensorNetwork, msgs: &MessageSet, damping: f64) -> Result<(MessageSet, f64)> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::InvalidArgument("damping must lie in [0, 1)".into()));
    }
    let mut next = msgs.clone();
    let mut residual: f64 = 0.0;
    for (e, edge) in net.edges().iter().enumerate() {
        let b = edge.b.ok_or(Error::NotClosed(1))?;
        for (dir, src) in [(Direction::Forward, edge.a), (Direction::Backward, b)] {
            let raw = outgoing_message(net, msgs, src.node, src.slot)?;
            let nrm = vec_norm(&raw);
            if !(nrm >= 1e-300) || !nrm.is_finite() {
                return Err(Error::DegenerateMessage(e));
            }
            let old = msgs.get(e, dir);
            let mut new: Vec<C64> = raw.iter().map(|z| z / nrm).collect();
            // align the arbitrary phase with the previous message
            let ov = inner(&new, old);
            if ov.abs() > 0.0 {
                let ph = ov / ov.abs();
                new.iter_mut().for_each(|z| *z *= ph);
            }
            if damping > 0.0 {
                for (z, o) in new.iter_mut().zip(old) {
                    *z = *z * (1.0 - damping) + o * damping;
                }
                let n2 = vec_norm(&new);
                if n2 < 1e-300 {
                    return Err(Error::DegenerateMessage(e));
                }
                new.iter_mut().for_each(|z| *z /= n2);
            }
            let change = vec_norm(&new.iter().zip(old).map(|(x, y)| x - y).collect::<Vec<_>>());
            residual = residual.max(change);
            *next.get_mut(e, dir) = new;
        }
    }
    Ok((next, residual))
}

fn vacua(net: &TensorNetwork, msgs: &MessageSet) -> Result<Vec<C64>> {
    (0..net.num_nodes()).map(|k| vacuum_scalar(net, msgs, k)).collect()
}

/// Iterates sweeps from `init` until the residual drops below `tol`.
///
/// Fails with [`Error::BpNonConvergence`] after `max_sweeps`, or earlier if
/// the best residual of the last 200 sweeps is no better than 0.9 times the
/// best residual seen before them.
pub fn find_fixed_point(
    net: &TensorNetwork,
    init: &MessageSet,
    damping: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<BpFixedPoint> {
    check_closed(net)?;
    let mut msgs = init.clone();
    let mut history: Vec<f64> = Vec::new();
    let mut residual = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        let (next, r) = bp_sweep(net, &msgs, damping)?;
        msgs = next;
        residual = r;
        if r < tol {
            return Ok(BpFixedPoint {
                vacuum: vacua(net, &msgs)?,
                messages: msgs,
                residual: r,
                sweeps: sweep,
                log_scale: C64::new(0.0, 0.0),
                normalized: false,
            });
        }
        history.push(r);
        if history.len() >= 2 * PLATEAU_WINDOW {
            let split = history.len() - PLATEAU_WINDOW;
            let before = history[..split].iter().cloned().fold(f64::INFINITY, f64::min);
            let recent = history[split..].iter().cloned().fold(f64::INFINITY, f64::min);
            if recent >= 0.9 * before {
                return Err(Error::BpNonConvergence {
                    sweeps: sweep,
                    residual: r,
                });
            }
        }
    }
    Err(Error::BpNonConvergence {
        sweeps: max_sweeps,
        residual,
    })
}

/// Translation-invariant BP on an infinite lattice, run on the unit-cell
/// network (edge `k` carries the messages of bond `k`).
pub fn find_fixed_point_unitcell(
    cell: &DoubleLayerCell,
    init: InitStrategy,
    damping: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<(TensorNetwork, BpFixedPoint)> {
    let net = unit_cell_network(cell)?;
    let msgs = init_messages(&net, init)?;
    let fp = find_fixed_point(&net, &msgs, damping, tol, max_sweeps)?;
    Ok((net, fp))
}

/// Rescales messages so every bilinear overlap is 1 and tensors so every
/// vacuum scalar is 1. Returns the rescaled network with the new state.
pub fn normalize_fixed_point(net: &TensorNetwork, fp: &BpFixedPoint) -> Result<(TensorNetwork, BpFixedPoint)> {
    let mut msgs = fp.messages.clone();
    let mut log_scale = fp.log_scale;
    // Z_BP = prod vacuum / prod overlap stays fixed throughout
    for e in 0..net.num_edges() {
        let o = msgs.overlap(e);
        if o.abs() < 1e-12 {
            return Err(Error::GaugeDegenerate(e));
        }
        let s = 1.0 / libm::sqrt(o.abs());
        msgs.forward[e].iter_mut().for_each(|z| *z *= s);
        let ph = o.abs() / o;
        msgs.backward[e].iter_mut().for_each(|z| *z *= ph * s);
    }
    let mut out = net.clone();
    let mut vacuum = Vec::with_capacity(net.num_nodes());
    for k in 0..net.num_nodes() {
        let v = vacuum_scalar(net, &msgs, k)?;
        if v.abs() == 0.0 {
            return Err(Error::ZeroVacuum(k));
        }
        log_scale += v.ln();
        out.set_tensor(k, net.node(k).tensor.scale(v.inv()))?;
        vacuum.push(C64::new(1.0, 0.0));
    }
    // recompute so tiny round-off is visible rather than hidden
    for (k, slot) in vacuum.iter_mut().enumerate() {
        *slot = vacuum_scalar(&out, &msgs, k)?;
    }
    Ok((
        out,
        BpFixedPoint {
            messages: msgs,
            residual: fp.residual,
            sweeps: fp.sweeps,
            vacuum,
            log_scale,
            normalized: true,
        },
    ))
}

/// Complex `log Z_BP = log_scale + sum log vacuum - sum log overlap`.
pub fn log_bp_partition(fp: &BpFixedPoint) -> Result<C64> {
    let mut acc = fp.log_scale;
    for (k, v) in fp.vacuum.iter().enumerate() {
        if v.abs() == 0.0 {
            return Err(Error::ZeroVacuum(k));
        }
        acc += v.ln();
    }
    for e in 0..fp.messages.forward.len() {
        let o = fp.messages.overlap(e);
        if o.abs() == 0.0 {
            return Err(Error::GaugeDegenerate(e));
        }
        acc -= o.ln();
    }
    Ok(acc)
}

/// Bethe free energy `-Re log Z_BP` of the whole network.
pub fn bethe_free_energy(fp: &BpFixedPoint) -> Result<f64> {
    Ok(-log_bp_partition(fp)?.re)
}

/// Convenience: identity init, default schedule, then normalization.
pub fn converge_and_normalize(net: &TensorNetwork) -> Result<(TensorNetwork, BpFixedPoint)> {
    let init = init_messages(net, InitStrategy::Identity)?;
    let fp = find_fixed_point(net, &init, DEFAULT_DAMPING, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
    normalize_fixed_point(net, &fp)
}

/// Largest deviation of overlaps and vacuum scalars from 1.
pub fn normalization_defect(net: &TensorNetwork, fp: &BpFixedPoint) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for e in 0..net.num_edges() {
        worst = worst.max((fp.messages.overlap(e) - 1.0).abs());
    }
    for k in 0..net.num_nodes() {
        worst = worst.max((vacuum_scalar(net, &fp.messages, k)? - 1.0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetworkBuilder, NodeId};
    use alloc::vec;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn pair() -> TensorNetwork {
        let mut b = NetworkBuilder::new();
        let x = b
            .add_node(NodeId::plain(0), Tensor::vector(vec![c(1.0), c(2.0)]))
            .unwrap();
        let y = b
            .add_node(NodeId::plain(1), Tensor::vector(vec![c(3.0), c(4.0)]))
            .unwrap();
        b.connect(x, 0, y, 0).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn identity_init_on_dim_four() {
        let mut b = NetworkBuilder::new();
        let x = b.add_node(NodeId::plain(0), Tensor::vector(vec![c(1.0); 4])).unwrap();
        let y = b.add_node(NodeId::plain(1), Tensor::vector(vec![c(1.0); 4])).unwrap();
        b.connect(x, 0, y, 0).unwrap();
        let net = b.build().unwrap();
        let m = init_messages(&net, InitStrategy::Identity).unwrap();
        let r = 1.0 / libm::sqrt(2.0);
        assert_eq!(m.forward[0], vec![c(r), c(0.0), c(0.0), c(r)]);
    }

    #[test]
    fn random_init_deterministic() {
        let net = pair();
        let a = init_messages(&net, InitStrategy::Random(7)).unwrap();
        let b = init_messages(&net, InitStrategy::Random(7)).unwrap();
        assert_eq!(a, b);
        assert!(a.forward[0].iter().all(|z| z.re >= 0.0 && z.re <= 1.0 && z.im == 0.0));
    }

    #[test]
    fn two_node_one_sweep() {
        let net = pair();
        let init = init_messages(&net, InitStrategy::Identity).unwrap();
        let (m, _) = bp_sweep(&net, &init, 0.0).unwrap();
        let n = libm::sqrt(5.0);
        assert!((m.forward[0][0] - c(1.0 / n)).norm() < 1e-15);
        assert!((m.forward[0][1] - c(2.0 / n)).norm() < 1e-15);
        let (_, r) = bp_sweep(&net, &m, 0.0).unwrap();
        assert!(r < 1e-15);
    }

    #[test]
    fn two_node_bethe_is_exact() {
        let net = pair();
        let init = init_messages(&net, InitStrategy::Identity).unwrap();
        let fp = find_fixed_point(&net, &init, 0.0, 1e-12, 10).unwrap();
        assert!((bethe_free_energy(&fp).unwrap() + libm::log(11.0)).abs() < 1e-13);
        let (nnet, nfp) = normalize_fixed_point(&net, &fp).unwrap();
        assert!(normalization_defect(&nnet, &nfp).unwrap() < 1e-13);
        assert!((bethe_free_energy(&nfp).unwrap() + libm::log(11.0)).abs() < 1e-13);
        assert!((nfp.log_scale.exp() - c(11.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_open_network() {
        let mut b = NetworkBuilder::new();
        let x = b.add_node(NodeId::plain(0), Tensor::vector(vec![c(1.0)])).unwrap();
        b.open(x, 0).unwrap();
        let net = b.build().unwrap();
        assert_eq!(
            init_messages(&net, InitStrategy::Identity).unwrap_err(),
            Error::NotClosed(1)
        );
    }
}
