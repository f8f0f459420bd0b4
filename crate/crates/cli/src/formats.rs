//! JSON layouts. Complex numbers are `[re, im]` pairs; tensors are row-major.

use loopseries::bp::{BpFixedPoint, MessageSet};
use loopseries::lattice::{Geometry, LatticeSpec, PepsCell};
use loopseries::loops::ExcitationCatalog;
use loopseries::{NetworkBuilder, NodeId, Tensor, TensorNetwork, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub type ComplexJson = [f64; 2];

fn to_pairs(v: &[C64]) -> Vec<ComplexJson> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(v: &[ComplexJson]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub dims: Vec<usize>,
    pub data: Vec<ComplexJson>,
}

impl TensorJson {
    pub fn from_tensor(t: &Tensor) -> Self {
        TensorJson {
            dims: t.dims().to_vec(),
            data: to_pairs(t.data()),
        }
    }

    pub fn to_tensor(&self) -> CliResult<Tensor> {
        Ok(Tensor::new(self.dims.clone(), from_pairs(&self.data))?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeJson {
    pub cell: [i32; 2],
    pub site: usize,
    pub tensor: TensorJson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointJson {
    pub node: usize,
    pub slot: usize,
}

/// Edge `k` of the layout is edge `k` of the network; `b` is absent for an
/// open edge. Messages called "forward" travel from `a` to `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub a: EndpointJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<EndpointJson>,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkJson {
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<EdgeJson>,
}

impl NetworkJson {
    pub fn from_network(net: &TensorNetwork) -> Self {
        NetworkJson {
            nodes: net
                .nodes()
                .iter()
                .map(|n| NodeJson {
                    cell: n.id.cell,
                    site: n.id.site,
                    tensor: TensorJson::from_tensor(&n.tensor),
                })
                .collect(),
            edges: net
                .edges()
                .iter()
                .map(|e| EdgeJson {
                    a: EndpointJson {
                        node: e.a.node,
                        slot: e.a.slot,
                    },
                    b: e.b.map(|b| EndpointJson {
                        node: b.node,
                        slot: b.slot,
                    }),
                    dim: e.dim,
                })
                .collect(),
        }
    }

    pub fn to_network(&self) -> CliResult<TensorNetwork> {
        let mut b = NetworkBuilder::new();
        for n in &self.nodes {
            b.add_node(NodeId::new(n.cell, n.site), n.tensor.to_tensor()?)?;
        }
        for e in &self.edges {
            let id = match e.b {
                Some(end) => b.connect(e.a.node, e.a.slot, end.node, end.slot)?,
                None => b.open(e.a.node, e.a.slot)?,
            };
            let _ = id;
        }
        let net = b.build()?;
        for (k, e) in self.edges.iter().enumerate() {
            if net.edge(k)?.dim != e.dim {
                return Err(CliError::Config(format!(
                    "edge {k}: declared dim {} does not match tensors",
                    e.dim
                )));
            }
        }
        Ok(net)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionJson {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageJson {
    pub edge: usize,
    pub direction: DirectionJson,
    pub data: Vec<ComplexJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointJson {
    pub network: NetworkJson,
    pub messages: Vec<MessageJson>,
    pub residual: f64,
    pub sweeps: usize,
    pub vacuum: Vec<ComplexJson>,
    pub log_scale: ComplexJson,
    pub normalized: bool,
}

impl FixedPointJson {
    pub fn new(net: &TensorNetwork, fp: &BpFixedPoint) -> Self {
        let mut messages = Vec::with_capacity(2 * fp.messages.forward.len());
        for e in 0..fp.messages.forward.len() {
            messages.push(MessageJson {
                edge: e,
                direction: DirectionJson::Forward,
                data: to_pairs(&fp.messages.forward[e]),
            });
            messages.push(MessageJson {
                edge: e,
                direction: DirectionJson::Backward,
                data: to_pairs(&fp.messages.backward[e]),
            });
        }
        FixedPointJson {
            network: NetworkJson::from_network(net),
            messages,
            residual: fp.residual,
            sweeps: fp.sweeps,
            vacuum: to_pairs(&fp.vacuum),
            log_scale: [fp.log_scale.re, fp.log_scale.im],
            normalized: fp.normalized,
        }
    }

    pub fn to_parts(&self) -> CliResult<(TensorNetwork, BpFixedPoint)> {
        let net = self.network.to_network()?;
        let m = net.num_edges();
        let mut forward = vec![Vec::new(); m];
        let mut backward = vec![Vec::new(); m];
        for msg in &self.messages {
            if msg.edge >= m {
                return Err(loopseries::Error::UnknownEdge(msg.edge).into());
            }
            let slot = match msg.direction {
                DirectionJson::Forward => &mut forward[msg.edge],
                DirectionJson::Backward => &mut backward[msg.edge],
            };
            *slot = from_pairs(&msg.data);
        }
        for e in 0..m {
            let dim = net.edge(e)?.dim;
            if forward[e].len() != dim || backward[e].len() != dim {
                return Err(CliError::Config(format!("edge {e}: missing or mis-sized message")));
            }
        }
        let fp = BpFixedPoint {
            messages: MessageSet { forward, backward },
            residual: self.residual,
            sweeps: self.sweeps,
            vacuum: from_pairs(&self.vacuum),
            log_scale: C64::new(self.log_scale[0], self.log_scale[1]),
            normalized: self.normalized,
        };
        Ok((net, fp))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellJson {
    pub geometry: String,
    pub d: usize,
    pub m: usize,
    /// Per site, axes `[physical, slot0, slot1, ...]`.
    pub tensors: Vec<TensorJson>,
}

pub fn geometry_name(g: Geometry) -> &'static str {
    match g {
        Geometry::Hexagonal => "hexagonal",
        Geometry::Square => "square",
        Geometry::Kagome => "kagome",
    }
}

impl CellJson {
    pub fn from_cell(cell: &PepsCell) -> Self {
        CellJson {
            geometry: geometry_name(cell.spec.geometry).into(),
            d: cell.d,
            m: cell.m,
            tensors: cell.tensors.iter().map(TensorJson::from_tensor).collect(),
        }
    }

    pub fn to_cell(&self) -> CliResult<PepsCell> {
        let spec = match self.geometry.as_str() {
            "hexagonal" => LatticeSpec::hexagonal(),
            "square" => LatticeSpec::square(),
            "kagome" => LatticeSpec::kagome(),
            other => return Err(CliError::Config(format!("unknown geometry {other}"))),
        };
        let tensors = self
            .tensors
            .iter()
            .map(TensorJson::to_tensor)
            .collect::<CliResult<Vec<_>>>()?;
        Ok(PepsCell::new(spec, tensors)?)
    }
}

/// One catalog entry: edges as `[cell x, cell y, bond]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogRowJson {
    pub degree: usize,
    pub edges: Vec<[i64; 3]>,
    pub l: [u32; 2],
    pub s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<ComplexJson>,
}

pub fn catalog_rows(cat: &ExcitationCatalog) -> Vec<CatalogRowJson> {
    cat.entries
        .iter()
        .map(|e| CatalogRowJson {
            degree: e.degree,
            edges: e
                .edges
                .iter()
                .map(|x| [x.cell[0] as i64, x.cell[1] as i64, x.bond as i64])
                .collect(),
            l: [e.multiplicity.0, e.multiplicity.1],
            s: e.support,
            weight: e.weight.map(|w| [w.re, w.im]),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use loopseries::bp::{find_fixed_point, init_messages, InitStrategy};

    fn ring() -> TensorNetwork {
        let mut b = NetworkBuilder::new();
        let t = Tensor::from_fn(&[2, 2], |i| C64::new(1.0 + i[0] as f64, 0.5 * i[1] as f64));
        for k in 0..3 {
            b.add_node(NodeId::plain(k), t.clone()).unwrap();
        }
        for k in 0..3 {
            b.connect(k, 1, (k + 1) % 3, 0).unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn network_roundtrip() {
        let net = ring();
        let js = serde_json::to_string(&NetworkJson::from_network(&net)).unwrap();
        let back: NetworkJson = serde_json::from_str(&js).unwrap();
        let net2 = back.to_network().unwrap();
        assert_eq!(net.edges(), net2.edges());
        let (z1, z2) = (
            net.contract().unwrap().to_scalar(),
            net2.contract().unwrap().to_scalar(),
        );
        assert_eq!(z1, z2);
    }

    #[test]
    fn fixed_point_roundtrip() {
        let net = ring();
        let m = init_messages(&net, InitStrategy::Identity).unwrap();
        let fp = find_fixed_point(&net, &m, 0.2, 1e-12, 5000).unwrap();
        let js = serde_json::to_string(&FixedPointJson::new(&net, &fp)).unwrap();
        let back: FixedPointJson = serde_json::from_str(&js).unwrap();
        let (_, fp2) = back.to_parts().unwrap();
        assert_eq!(fp.messages.forward, fp2.messages.forward);
        assert_eq!(fp.messages.backward, fp2.messages.backward);
        assert_eq!(fp.log_scale, fp2.log_scale);
    }

    #[test]
    fn open_edges_survive() {
        let mut b = NetworkBuilder::new();
        b.add_node(NodeId::plain(0), Tensor::zeros(&[2, 3])).unwrap();
        b.open(0, 0).unwrap();
        b.open(0, 1).unwrap();
        let net = b.build().unwrap();
        let back = NetworkJson::from_network(&net).to_network().unwrap();
        assert_eq!(back.open_edges(), vec![0, 1]);
    }
}
