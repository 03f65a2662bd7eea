//! Tensor-network specifications and their contraction.
//!
//! A [`NetworkSpec`] is a static description of a network: nodes with
//! named legs, bonds joining pairs of legs, open input legs that
//! receive feature vectors, and exactly one open output leg. The spec
//! validates its own wiring once at construction; contraction then
//! executes against a map of node values.
//!
//! Internally every bond is assigned a unique name shared by both of
//! its endpoint legs, so merging two partial contractions via
//! [`contract_pair`] automatically sums over all bonds between them
//! (including parallel bonds, which MERA layouts produce).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{contract_pair, DenseTensor, Scalar};

/// One tensor slot in a network.
#[derive(Debug, Clone)]
pub struct NodeSpec {
    pub id: String,
    pub legs: Vec<String>,
    pub shape: Vec<usize>,
    /// Whether gradients are taken with respect to this node.
    pub trainable: bool,
}

impl NodeSpec {
    pub fn new(id: &str, legs: &[&str], shape: &[usize], trainable: bool) -> Self {
        Self {
            id: id.to_string(),
            legs: legs.iter().map(|s| s.to_string()).collect(),
            shape: shape.to_vec(),
            trainable,
        }
    }

    /// Number of entries in this node's tensor.
    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }
}

/// A bond joins one leg on each of two distinct nodes.
#[derive(Debug, Clone)]
pub struct Bond {
    pub node_a: String,
    pub leg_a: String,
    pub node_b: String,
    pub leg_b: String,
}

impl Bond {
    pub fn new(node_a: &str, leg_a: &str, node_b: &str, leg_b: &str) -> Self {
        Self {
            node_a: node_a.to_string(),
            leg_a: leg_a.to_string(),
            node_b: node_b.to_string(),
            leg_b: leg_b.to_string(),
        }
    }
}

/// An open leg: either an input slot fed with a feature vector, or the
/// single output leg.
#[derive(Debug, Clone)]
pub struct OpenLeg {
    pub node: String,
    pub leg: String,
    pub dim: usize,
}

impl OpenLeg {
    pub fn new(node: &str, leg: &str, dim: usize) -> Self {
        Self {
            node: node.to_string(),
            leg: leg.to_string(),
            dim,
        }
    }
}

/// Validated description of a contractible tensor network.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    nodes: Vec<NodeSpec>,
    bonds: Vec<Bond>,
    inputs: Vec<OpenLeg>,
    output: OpenLeg,
    order: Vec<usize>,
}

impl NetworkSpec {
    /// Builds and validates a network.
    ///
    /// Checks that ids and legs are distinct, every bond joins two legs
    /// of equal dimension on distinct existing nodes, every node leg is
    /// covered exactly once by a bond or an open leg, open leg names
    /// are globally unique, the bond graph is connected, and `order`
    /// (when given) lists every bond index exactly once. When `order`
    /// is `None` a greedy order minimizing intermediate sizes is
    /// precomputed.
    pub fn new(
        nodes: Vec<NodeSpec>,
        bonds: Vec<Bond>,
        inputs: Vec<OpenLeg>,
        output: OpenLeg,
        order: Option<Vec<usize>>,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Structure("network has no nodes".into()));
        }
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.as_str(), i).is_some() {
                return Err(Error::Structure(format!("duplicate node id {:?}", n.id)));
            }
            if n.legs.len() != n.shape.len() {
                return Err(Error::Structure(format!(
                    "node {:?} lists {} legs but {} dimensions",
                    n.id,
                    n.legs.len(),
                    n.shape.len()
                )));
            }
            for (k, leg) in n.legs.iter().enumerate() {
                if n.legs[k + 1..].contains(leg) {
                    return Err(Error::Structure(format!(
                        "node {:?} repeats leg {leg:?}",
                        n.id
                    )));
                }
            }
            if n.shape.iter().any(|&d| d == 0) {
                return Err(Error::Structure(format!(
                    "node {:?} has a zero dimension",
                    n.id
                )));
            }
        }
        let leg_dim = |node: &str, leg: &str| -> Option<usize> {
            let &i = index.get(node)?;
            let k = nodes[i].legs.iter().position(|l| l == leg)?;
            Some(nodes[i].shape[k])
        };

        // Each (node, leg) must be covered exactly once.
        let mut covered: BTreeMap<(String, String), &'static str> = BTreeMap::new();
        let mut cover = |node: &str, leg: &str, role: &'static str| -> Result<()> {
            if leg_dim(node, leg).is_none() {
                return Err(Error::Structure(format!(
                    "{role} references missing leg {leg:?} on node {node:?}"
                )));
            }
            if let Some(prev) = covered.insert((node.to_string(), leg.to_string()), role) {
                return Err(Error::Structure(format!(
                    "leg {leg:?} on node {node:?} used by both {prev} and {role}"
                )));
            }
            Ok(())
        };

        for b in &bonds {
            if b.node_a == b.node_b {
                return Err(Error::Structure(format!(
                    "bond joins node {:?} to itself (traces unsupported)",
                    b.node_a
                )));
            }
            cover(&b.node_a, &b.leg_a, "bond")?;
            cover(&b.node_b, &b.leg_b, "bond")?;
            let da = leg_dim(&b.node_a, &b.leg_a).unwrap();
            let db = leg_dim(&b.node_b, &b.leg_b).unwrap();
            if da != db {
                return Err(Error::Shape(format!(
                    "bond joins leg {:?} on {:?} (dim {da}) to leg {:?} on {:?} (dim {db})",
                    b.leg_a, b.node_a, b.leg_b, b.node_b
                )));
            }
        }
        let mut open_names: Vec<&str> = Vec::new();
        for (ol, role) in inputs
            .iter()
            .map(|o| (o, "input leg"))
            .chain(std::iter::once((&output, "output leg")))
        {
            cover(&ol.node, &ol.leg, if role == "input leg" { "input" } else { "output" })?;
            let d = leg_dim(&ol.node, &ol.leg).unwrap();
            if d != ol.dim {
                return Err(Error::Shape(format!(
                    "{role} {:?} declares dim {} but node {:?} has dim {d}",
                    ol.leg, ol.dim, ol.node
                )));
            }
            if open_names.contains(&ol.leg.as_str()) {
                return Err(Error::Structure(format!(
                    "open leg name {:?} is not unique",
                    ol.leg
                )));
            }
            open_names.push(&ol.leg);
        }
        for n in &nodes {
            for leg in &n.legs {
                if !covered.contains_key(&(n.id.clone(), leg.clone())) {
                    return Err(Error::Structure(format!(
                        "leg {leg:?} on node {:?} is neither bonded nor open",
                        n.id
                    )));
                }
            }
        }

        // Connectivity through bonds.
        let mut dsu = Dsu::new(nodes.len());
        for b in &bonds {
            dsu.union(index[b.node_a.as_str()], index[b.node_b.as_str()]);
        }
        let root = dsu.find(0);
        if (1..nodes.len()).any(|i| dsu.find(i) != root) {
            return Err(Error::Structure("network is disconnected".into()));
        }

        let order = match order {
            Some(o) => {
                let mut seen = vec![false; bonds.len()];
                if o.len() != bonds.len() {
                    return Err(Error::Structure(format!(
                        "order lists {} bonds, network has {}",
                        o.len(),
                        bonds.len()
                    )));
                }
                for &k in &o {
                    if k >= bonds.len() || seen[k] {
                        return Err(Error::Structure(format!(
                            "order must list every bond index exactly once (bad entry {k})"
                        )));
                    }
                    seen[k] = true;
                }
                o
            }
            None => greedy_order(&nodes, &bonds, &inputs, &index),
        };

        Ok(Self {
            nodes,
            bonds,
            inputs,
            output,
            order,
        })
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn input_legs(&self) -> &[OpenLeg] {
        &self.inputs
    }

    pub fn output_leg(&self) -> &OpenLeg {
        &self.output
    }

    pub fn contraction_order(&self) -> &[usize] {
        &self.order
    }

    /// Total entry count over trainable nodes.
    pub fn trainable_size(&self) -> usize {
        self.nodes.iter().filter(|n| n.trainable).map(|n| n.size()).sum()
    }

    fn node_index(&self, id: &str) -> usize {
        self.nodes.iter().position(|n| n.id == id).unwrap()
    }

    /// Clones node values, checks them against the spec, and renames
    /// bonded legs to their unified per-bond names.
    fn prepare<T: Scalar>(
        &self,
        values: &BTreeMap<String, DenseTensor<T>>,
    ) -> Result<Vec<DenseTensor<T>>> {
        for id in values.keys() {
            if !self.nodes.iter().any(|n| &n.id == id) {
                return Err(Error::Structure(format!("value for unknown node {id:?}")));
            }
        }
        let mut work = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let t = values.get(&n.id).ok_or_else(|| {
                Error::Structure(format!("missing value for node {:?}", n.id))
            })?;
            if t.legs() != n.legs.as_slice() || t.shape() != n.shape.as_slice() {
                return Err(Error::Shape(format!(
                    "value for node {:?} has legs {:?} shape {:?}, spec says {:?} {:?}",
                    n.id,
                    t.legs(),
                    t.shape(),
                    n.legs,
                    n.shape
                )));
            }
            work.push(t.clone());
        }
        for (k, b) in self.bonds.iter().enumerate() {
            let name = bond_name(k);
            work[self.node_index(&b.node_a)].rename_leg(&b.leg_a, &name)?;
            work[self.node_index(&b.node_b)].rename_leg(&b.leg_b, &name)?;
        }
        Ok(work)
    }

    fn check_inputs<T: Scalar>(&self, inputs: &BTreeMap<String, Vec<T>>) -> Result<()> {
        for key in inputs.keys() {
            if !self.inputs.iter().any(|o| &o.leg == key) {
                return Err(Error::Structure(format!("input for unknown leg {key:?}")));
            }
        }
        for ol in &self.inputs {
            match inputs.get(&ol.leg) {
                Some(v) if v.len() == ol.dim => {}
                Some(v) => {
                    return Err(Error::Shape(format!(
                        "input {:?} has length {}, leg dim is {}",
                        ol.leg,
                        v.len(),
                        ol.dim
                    )))
                }
                None => {
                    return Err(Error::Structure(format!("missing input for leg {:?}", ol.leg)))
                }
            }
        }
        Ok(())
    }

    /// Runs the bond order over prepared tensors, merging components.
    fn run<T: Scalar>(&self, mut work: Vec<Option<DenseTensor<T>>>) -> Result<DenseTensor<T>> {
        let mut dsu = Dsu::new(work.len());
        for &k in &self.order {
            let b = &self.bonds[k];
            let ra = dsu.find(self.node_index(&b.node_a));
            let rb = dsu.find(self.node_index(&b.node_b));
            if ra == rb {
                continue;
            }
            let ta = work[ra].take().unwrap();
            let tb = work[rb].take().unwrap();
            let merged = contract_pair(&ta, &tb)?;
            let root = dsu.union(ra, rb);
            work[root] = Some(merged);
        }
        let mut remaining = work.into_iter().flatten();
        let first = remaining
            .next()
            .ok_or_else(|| Error::Structure("nothing to contract".into()))?;
        if remaining.next().is_some() {
            return Err(Error::Structure("contraction left disconnected pieces".into()));
        }
        Ok(first)
    }

    /// Contracts the network with every input leg fed a vector, keyed
    /// by input leg name. Returns the output-leg vector.
    pub fn contract<T: Scalar>(
        &self,
        values: &BTreeMap<String, DenseTensor<T>>,
        inputs: &BTreeMap<String, Vec<T>>,
    ) -> Result<DenseTensor<T>> {
        self.check_inputs(inputs)?;
        let mut work = self.prepare(values)?;
        for ol in &self.inputs {
            let v = DenseTensor::new(
                vec![ol.leg.clone()],
                vec![ol.dim],
                inputs[&ol.leg].clone(),
            )?;
            let i = self.node_index(&ol.node);
            work[i] = contract_pair(&work[i], &v)?;
        }
        let out = self.run(work.into_iter().map(Some).collect())?;
        out.permute(std::slice::from_ref(&self.output.leg))
    }

    /// Contracts all bonds but leaves every input leg open. The result
    /// carries the input legs in declaration order followed by the
    /// output leg.
    pub fn contract_open<T: Scalar>(
        &self,
        values: &BTreeMap<String, DenseTensor<T>>,
    ) -> Result<DenseTensor<T>> {
        let work = self.prepare(values)?;
        let out = self.run(work.into_iter().map(Some).collect())?;
        let mut order: Vec<String> = self.inputs.iter().map(|o| o.leg.clone()).collect();
        order.push(self.output.leg.clone());
        out.permute(&order)
    }

    /// Gradient of `<cotangent, contract(...)>` with respect to every
    /// trainable node, as tensors matching each node's legs and shape.
    ///
    /// Each gradient is the contraction of the whole network with the
    /// differentiated node removed and the cotangent attached to the
    /// output leg.
    pub fn contract_adjoint<T: Scalar>(
        &self,
        values: &BTreeMap<String, DenseTensor<T>>,
        inputs: &BTreeMap<String, Vec<T>>,
        cotangent: &[T],
    ) -> Result<BTreeMap<String, DenseTensor<T>>> {
        self.check_inputs(inputs)?;
        if cotangent.len() != self.output.dim {
            return Err(Error::Shape(format!(
                "cotangent has length {}, output dim is {}",
                cotangent.len(),
                self.output.dim
            )));
        }
        let work = self.prepare(values)?;
        let mut grads = BTreeMap::new();
        for (ti, node) in self.nodes.iter().enumerate() {
            if !node.trainable {
                continue;
            }
            let mut parts: Vec<DenseTensor<T>> = Vec::new();
            for (i, w) in work.iter().enumerate() {
                if i == ti {
                    continue;
                }
                let mut t = w.clone();
                for ol in self.inputs.iter().filter(|o| o.node == self.nodes[i].id) {
                    let v = DenseTensor::new(
                        vec![ol.leg.clone()],
                        vec![ol.dim],
                        inputs[&ol.leg].clone(),
                    )?;
                    t = contract_pair(&t, &v)?;
                }
                parts.push(t);
            }
            for ol in self.inputs.iter().filter(|o| o.node == node.id) {
                parts.push(DenseTensor::new(
                    vec![ol.leg.clone()],
                    vec![ol.dim],
                    inputs[&ol.leg].clone(),
                )?);
            }
            parts.push(DenseTensor::new(
                vec![self.output.leg.clone()],
                vec![self.output.dim],
                cotangent.to_vec(),
            )?);
            let mut cof = contract_all(parts)?;
            for (k, b) in self.bonds.iter().enumerate() {
                if b.node_a == node.id {
                    cof.rename_leg(&bond_name(k), &b.leg_a)?;
                } else if b.node_b == node.id {
                    cof.rename_leg(&bond_name(k), &b.leg_b)?;
                }
            }
            grads.insert(node.id.clone(), cof.permute(&node.legs)?);
        }
        Ok(grads)
    }
}

fn bond_name(k: usize) -> String {
    format!("__bond{k}")
}

/// Contracts an arbitrary list of tensors down to one, greedily
/// merging the pair with the smallest result first (pairs sharing a
/// leg before outer products). Disconnected pieces end up outer
/// multiplied, so the result is the full product over all open legs.
pub fn contract_all<T: Scalar>(mut parts: Vec<DenseTensor<T>>) -> Result<DenseTensor<T>> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument("contract_all over no tensors".into()));
    }
    while parts.len() > 1 {
        let mut best: Option<(usize, usize, bool, usize)> = None;
        for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                let shared: usize = parts[i]
                    .legs()
                    .iter()
                    .filter(|l| parts[j].legs().contains(l))
                    .map(|l| parts[i].leg_dim(l).unwrap())
                    .product();
                let shares = parts[i].legs().iter().any(|l| parts[j].legs().contains(l));
                let size = parts[i].size() / shared * (parts[j].size() / shared);
                let cand = (i, j, shares, size);
                let better = match best {
                    None => true,
                    Some((_, _, bs, bsize)) => {
                        (shares && !bs) || (shares == bs && size < bsize)
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (i, j, _, _) = best.unwrap();
        let merged = contract_pair(&parts[i], &parts[j])?;
        parts.swap_remove(j);
        parts[i] = merged;
    }
    Ok(parts.pop().unwrap())
}

/// Greedy contraction order: repeatedly pick the unused bond whose
/// component merge yields the smallest intermediate (inputs counted as
/// already fed). Bonds made internal by earlier merges are appended at
/// the end; execution skips them.
fn greedy_order(
    nodes: &[NodeSpec],
    bonds: &[Bond],
    inputs: &[OpenLeg],
    index: &BTreeMap<&str, usize>,
) -> Vec<usize> {
    let mut comp_legs: Vec<BTreeMap<String, usize>> = Vec::with_capacity(nodes.len());
    for n in nodes {
        let mut legs = BTreeMap::new();
        for (leg, &dim) in n.legs.iter().zip(&n.shape) {
            let fed = inputs.iter().any(|o| o.node == n.id && &o.leg == leg);
            if !fed {
                legs.insert(leg.clone(), dim);
            }
        }
        comp_legs.push(legs);
    }
    for (k, b) in bonds.iter().enumerate() {
        let name = bond_name(k);
        let ia = index[b.node_a.as_str()];
        let ib = index[b.node_b.as_str()];
        let da = comp_legs[ia].remove(&b.leg_a).unwrap();
        comp_legs[ia].insert(name.clone(), da);
        let db = comp_legs[ib].remove(&b.leg_b).unwrap();
        comp_legs[ib].insert(name, db);
    }

    let mut dsu = Dsu::new(nodes.len());
    let mut used = vec![false; bonds.len()];
    let mut order = Vec::with_capacity(bonds.len());
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (k, b) in bonds.iter().enumerate() {
            if used[k] {
                continue;
            }
            let ra = dsu.find(index[b.node_a.as_str()]);
            let rb = dsu.find(index[b.node_b.as_str()]);
            if ra == rb {
                continue;
            }
            let mut size = 1usize;
            for (leg, dim) in comp_legs[ra].iter() {
                if !comp_legs[rb].contains_key(leg) {
                    size *= dim;
                }
            }
            for (leg, dim) in comp_legs[rb].iter() {
                if !comp_legs[ra].contains_key(leg) {
                    size *= dim;
                }
            }
            if best.map_or(true, |(_, s)| size < s) {
                best = Some((k, size));
            }
        }
        let Some((k, _)) = best else { break };
        used[k] = true;
        order.push(k);
        let b = &bonds[k];
        let ra = dsu.find(index[b.node_a.as_str()]);
        let rb = dsu.find(index[b.node_b.as_str()]);
        let legs_b = std::mem::take(&mut comp_legs[rb]);
        let mut merged = std::mem::take(&mut comp_legs[ra]);
        for (leg, dim) in legs_b {
            if merged.remove(&leg).is_none() {
                merged.insert(leg, dim);
            }
        }
        let root = dsu.union(ra, rb);
        comp_legs[root] = merged;
    }
    for (k, u) in used.iter().enumerate() {
        if !u {
            order.push(k);
        }
    }
    order
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let ra = self.find(a);
        let rb = self.find(b);
        self.parent[rb] = ra;
        ra
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn legs(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn seeded(entries: usize, offset: f64) -> Vec<f64> {
        (0..entries)
            .map(|i| ((i as f64) * 0.37 + offset).sin())
            .collect()
    }

    /// Three-site chain with a 2-dim output leg on the last node:
    /// s0(p0, b0) - s1(b0, p1, b1) - s2(b1, p2, out).
    fn chain_spec() -> NetworkSpec {
        NetworkSpec::new(
            vec![
                NodeSpec::new("s0", &["p0", "b0"], &[2, 3], true),
                NodeSpec::new("s1", &["b0", "p1", "b1"], &[3, 2, 3], true),
                NodeSpec::new("s2", &["b1", "p2", "out"], &[3, 2, 2], true),
            ],
            vec![
                Bond::new("s0", "b0", "s1", "b0"),
                Bond::new("s1", "b1", "s2", "b1"),
            ],
            vec![
                OpenLeg::new("s0", "p0", 2),
                OpenLeg::new("s1", "p1", 2),
                OpenLeg::new("s2", "p2", 2),
            ],
            OpenLeg::new("s2", "out", 2),
            None,
        )
        .unwrap()
    }

    fn chain_values() -> BTreeMap<String, DenseTensor<f64>> {
        let mut m = BTreeMap::new();
        m.insert(
            "s0".into(),
            DenseTensor::new(legs(&["p0", "b0"]), vec![2, 3], seeded(6, 0.1)).unwrap(),
        );
        m.insert(
            "s1".into(),
            DenseTensor::new(legs(&["b0", "p1", "b1"]), vec![3, 2, 3], seeded(18, 1.1)).unwrap(),
        );
        m.insert(
            "s2".into(),
            DenseTensor::new(legs(&["b1", "p2", "out"]), vec![3, 2, 2], seeded(12, 2.3)).unwrap(),
        );
        m
    }

    fn chain_inputs() -> BTreeMap<String, Vec<f64>> {
        let mut m = BTreeMap::new();
        m.insert("p0".to_string(), vec![0.6, 0.8]);
        m.insert("p1".to_string(), vec![1.0, -0.5]);
        m.insert("p2".to_string(), vec![0.3, 0.9]);
        m
    }

    /// Literal nested sum over all bond and input indices.
    fn chain_oracle(
        values: &BTreeMap<String, DenseTensor<f64>>,
        inputs: &BTreeMap<String, Vec<f64>>,
    ) -> [f64; 2] {
        let s0 = &values["s0"];
        let s1 = &values["s1"];
        let s2 = &values["s2"];
        let (p0, p1, p2) = (&inputs["p0"], &inputs["p1"], &inputs["p2"]);
        let mut out = [0.0; 2];
        for l in 0..2 {
            for a in 0..3 {
                for b in 0..3 {
                    for i in 0..2 {
                        for j in 0..2 {
                            for k in 0..2 {
                                out[l] += s0.get(&[i, a])
                                    * s1.get(&[a, j, b])
                                    * s2.get(&[b, k, l])
                                    * p0[i]
                                    * p1[j]
                                    * p2[k];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn chain_contract_matches_nested_sum() {
        let spec = chain_spec();
        let values = chain_values();
        let inputs = chain_inputs();
        let got = spec.contract(&values, &inputs).unwrap();
        let want = chain_oracle(&values, &inputs);
        assert_eq!(got.legs(), &["out".to_string()]);
        assert_abs_diff_eq!(got.entries()[0], want[0], epsilon = 1e-12);
        assert_abs_diff_eq!(got.entries()[1], want[1], epsilon = 1e-12);
    }

    #[test]
    fn contraction_order_does_not_change_result() {
        let values = chain_values();
        let inputs = chain_inputs();
        let reference = chain_spec().contract(&values, &inputs).unwrap();
        for order in [vec![0, 1], vec![1, 0]] {
            let spec = NetworkSpec::new(
                chain_spec().nodes.clone(),
                chain_spec().bonds.clone(),
                chain_spec().inputs.clone(),
                chain_spec().output.clone(),
                Some(order),
            )
            .unwrap();
            let got = spec.contract(&values, &inputs).unwrap();
            for (g, r) in got.entries().iter().zip(reference.entries()) {
                assert_abs_diff_eq!(g, r, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn parallel_bonds_contract_together() {
        // a(x, y, out) doubly bonded to b(x, y): a loop of two bonds.
        let spec = NetworkSpec::new(
            vec![
                NodeSpec::new("a", &["x", "y", "out"], &[2, 3, 2], true),
                NodeSpec::new("b", &["x", "y"], &[2, 3], true),
            ],
            vec![Bond::new("a", "x", "b", "x"), Bond::new("a", "y", "b", "y")],
            vec![],
            OpenLeg::new("a", "out", 2),
            None,
        )
        .unwrap();
        let mut values = BTreeMap::new();
        values.insert(
            "a".into(),
            DenseTensor::new(legs(&["x", "y", "out"]), vec![2, 3, 2], seeded(12, 0.4)).unwrap(),
        );
        values.insert(
            "b".into(),
            DenseTensor::new(legs(&["x", "y"]), vec![2, 3], seeded(6, 5.0)).unwrap(),
        );
        let got = spec.contract(&values, &BTreeMap::new()).unwrap();
        let a = &values["a"];
        let b = &values["b"];
        let mut want = [0.0; 2];
        for l in 0..2 {
            for x in 0..2 {
                for y in 0..3 {
                    want[l] += a.get(&[x, y, l]) * b.get(&[x, y]);
                }
            }
        }
        assert_abs_diff_eq!(got.entries()[0], want[0], epsilon = 1e-12);
        assert_abs_diff_eq!(got.entries()[1], want[1], epsilon = 1e-12);
    }

    #[test]
    fn adjoint_matches_central_differences() {
        let spec = chain_spec();
        let values = chain_values();
        let inputs = chain_inputs();
        let cotangent = vec![0.7, -1.2];
        let grads = spec.contract_adjoint(&values, &inputs, &cotangent).unwrap();
        let f = |vals: &BTreeMap<String, DenseTensor<f64>>| {
            let out = spec.contract(vals, &inputs).unwrap();
            out.entries()[0] * cotangent[0] + out.entries()[1] * cotangent[1]
        };
        let h = 1e-5;
        for id in ["s0", "s1", "s2"] {
            let g = &grads[id];
            for e in 0..values[id].size() {
                let mut plus = values.clone();
                plus.get_mut(id).unwrap().entries_mut()[e] += h;
                let mut minus = values.clone();
                minus.get_mut(id).unwrap().entries_mut()[e] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                let got = g.entries()[e];
                let tol = 1e-6 * fd.abs().max(got.abs()).max(1e-3);
                assert!(
                    (fd - got).abs() <= tol,
                    "node {id} entry {e}: adjoint {got} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn adjoint_skips_frozen_nodes() {
        let mut nodes = chain_spec().nodes.clone();
        nodes[1].trainable = false;
        let spec = NetworkSpec::new(
            nodes,
            chain_spec().bonds.clone(),
            chain_spec().inputs.clone(),
            chain_spec().output.clone(),
            None,
        )
        .unwrap();
        let grads = spec
            .contract_adjoint(&chain_values(), &chain_inputs(), &[1.0, 0.0])
            .unwrap();
        assert!(grads.contains_key("s0"));
        assert!(!grads.contains_key("s1"));
        assert!(grads.contains_key("s2"));
    }

    #[test]
    fn contract_open_keeps_input_legs() {
        let spec = chain_spec();
        let values = chain_values();
        let open = spec.contract_open(&values).unwrap();
        assert_eq!(
            open.legs(),
            &["p0".to_string(), "p1".into(), "p2".into(), "out".into()]
        );
        assert_eq!(open.shape(), &[2, 2, 2, 2]);
        // Feeding the kept legs afterwards must agree with contract().
        let inputs = chain_inputs();
        let fed = spec.contract(&values, &inputs).unwrap();
        let mut want = [0.0; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        want[l] += open.get(&[i, j, k, l])
                            * inputs["p0"][i]
                            * inputs["p1"][j]
                            * inputs["p2"][k];
                    }
                }
            }
        }
        assert_abs_diff_eq!(fed.entries()[0], want[0], epsilon = 1e-12);
        assert_abs_diff_eq!(fed.entries()[1], want[1], epsilon = 1e-12);
    }

    #[test]
    fn validation_rejects_bad_wiring() {
        let node = |id: &str| NodeSpec::new(id, &["x", "out"], &[2, 2], true);
        // Dangling bond leg.
        assert!(matches!(
            NetworkSpec::new(
                vec![node("a"), NodeSpec::new("b", &["x"], &[2], true)],
                vec![Bond::new("a", "nope", "b", "x")],
                vec![],
                OpenLeg::new("a", "out", 2),
                None,
            ),
            Err(Error::Structure(_))
        ));
        // Bond dimension mismatch names both legs.
        let err = NetworkSpec::new(
            vec![
                NodeSpec::new("a", &["x", "out"], &[2, 2], true),
                NodeSpec::new("b", &["y"], &[3], true),
            ],
            vec![Bond::new("a", "x", "b", "y")],
            vec![],
            OpenLeg::new("a", "out", 2),
            None,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("\"x\"") && msg.contains("\"y\""), "{msg}");
        // Disconnected graph.
        assert!(matches!(
            NetworkSpec::new(
                vec![
                    NodeSpec::new("a", &["out"], &[2], true),
                    NodeSpec::new("b", &["x"], &[2], true),
                ],
                vec![],
                vec![OpenLeg::new("b", "x", 2)],
                OpenLeg::new("a", "out", 2),
                None,
            ),
            Err(Error::Structure(_))
        ));
        // Uncovered leg.
        assert!(matches!(
            NetworkSpec::new(
                vec![node("a")],
                vec![],
                vec![],
                OpenLeg::new("a", "out", 2),
                None,
            ),
            Err(Error::Structure(_))
        ));
        // Order must be a permutation.
        assert!(matches!(
            NetworkSpec::new(
                chain_spec().nodes.clone(),
                chain_spec().bonds.clone(),
                chain_spec().inputs.clone(),
                chain_spec().output.clone(),
                Some(vec![0, 0]),
            ),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn contract_rejects_bad_values_and_inputs() {
        let spec = chain_spec();
        let mut values = chain_values();
        let inputs = chain_inputs();
        // Wrong shape.
        values.insert(
            "s0".into(),
            DenseTensor::new(legs(&["p0", "b0"]), vec![2, 2], vec![0.0; 4]).unwrap(),
        );
        assert!(matches!(spec.contract(&values, &inputs), Err(Error::Shape(_))));
        // Missing input.
        let values = chain_values();
        let mut missing = inputs.clone();
        missing.remove("p1");
        assert!(matches!(spec.contract(&values, &missing), Err(Error::Structure(_))));
        // Wrong input length.
        let mut bad = inputs.clone();
        bad.insert("p1".into(), vec![1.0; 3]);
        assert!(matches!(spec.contract(&values, &bad), Err(Error::Shape(_))));
    }
}
