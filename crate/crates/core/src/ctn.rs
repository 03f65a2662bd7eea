//! Classical tensor-network classifiers.
//!
//! Builders assemble MPS, TTN and MERA networks over `n_sites` feature
//! legs of dimension `phys_dim` with bond dimension `bond_dim` and a
//! label leg of dimension `label_dim`, plus the two hybrid front
//! layers that condense a 6x6 image into four scalars for a quantum
//! circuit. A model owns one flat parameter vector; node tensors are
//! views into contiguous segments of it.
//!
//! Feature vectors are expected to be hypersphere-mapped angles (see
//! [`crate::encode::hypersphere_map`]); scores become probabilities
//! through the Born rule [`born_probability`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Bond, NetworkSpec, NodeSpec, OpenLeg};
use crate::tensor::{random_init, DenseTensor, InitScheme};

/// Network families the crate can build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Mps,
    Ttn,
    Mera,
    HybridTtnFront,
    HybridMpsFront,
}

#[derive(Debug, Clone)]
struct NodeSlot {
    part: usize,
    node: String,
    offset: usize,
    len: usize,
}

/// A classical tensor-network model with a flat trainable parameter
/// vector.
///
/// Plain architectures hold one contractible network whose output leg
/// has dimension `label_dim`; the hybrid fronts hold four disjoint
/// networks, each producing one scalar.
#[derive(Debug, Clone)]
pub struct CtnModel {
    arch: Architecture,
    n_sites: usize,
    phys_dim: usize,
    bond_dim: usize,
    label_dim: usize,
    parts: Vec<NetworkSpec>,
    part_inputs: Vec<Vec<(String, usize)>>,
    slots: Vec<NodeSlot>,
    theta: Vec<f64>,
}

impl CtnModel {
    fn assemble(
        arch: Architecture,
        n_sites: usize,
        phys_dim: usize,
        bond_dim: usize,
        label_dim: usize,
        parts: Vec<NetworkSpec>,
    ) -> Result<Self> {
        let mut slots = Vec::new();
        let mut offset = 0usize;
        for (pi, part) in parts.iter().enumerate() {
            for node in part.nodes() {
                if !node.trainable {
                    continue;
                }
                slots.push(NodeSlot {
                    part: pi,
                    node: node.id.clone(),
                    offset,
                    len: node.size(),
                });
                offset += node.size();
            }
        }
        let mut part_inputs = Vec::with_capacity(parts.len());
        for part in &parts {
            let mut legs = Vec::new();
            for ol in part.input_legs() {
                let site: usize = ol.leg.strip_prefix('p').and_then(|s| s.parse().ok()).ok_or_else(
                    || Error::Structure(format!("input leg {:?} is not a site leg", ol.leg)),
                )?;
                if site >= n_sites {
                    return Err(Error::Structure(format!(
                        "input leg {:?} beyond {} sites",
                        ol.leg, n_sites
                    )));
                }
                legs.push((ol.leg.clone(), site));
            }
            part_inputs.push(legs);
        }
        let mut model = Self {
            arch,
            n_sites,
            phys_dim,
            bond_dim,
            label_dim,
            parts,
            part_inputs,
            slots,
            theta: vec![0.0; offset],
        };
        model.init_params(0);
        Ok(model)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    /// Number of feature slots the model consumes (36 for hybrids).
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn label_dim(&self) -> usize {
        self.label_dim
    }

    pub fn parts(&self) -> &[NetworkSpec] {
        &self.parts
    }

    /// Length of the score vector `forward` produces.
    pub fn output_dim(&self) -> usize {
        self.parts.iter().map(|p| p.output_leg().dim).sum()
    }

    /// Total number of trainable entries.
    pub fn parameter_count(&self) -> usize {
        self.theta.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(Error::Shape(format!(
                "model has {} parameters, got {}",
                self.theta.len(),
                theta.len()
            )));
        }
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    /// Redraws every node as identity-plus-noise (sigma 0.1), which
    /// keeps initial contractions O(1). Deterministic in `seed`; each
    /// node uses a seed derived from its slot index.
    pub fn init_params(&mut self, seed: u64) {
        let schemes: Vec<(usize, Vec<String>, Vec<usize>)> = self
            .slots
            .iter()
            .map(|s| {
                let node = self.parts[s.part]
                    .nodes()
                    .iter()
                    .find(|n| n.id == s.node)
                    .unwrap();
                (s.offset, node.legs.clone(), node.shape.clone())
            })
            .collect();
        for (k, (offset, legs, shape)) in schemes.into_iter().enumerate() {
            let node_seed = seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let t = random_init(legs, shape, node_seed, InitScheme::IdentityPlusNoise { sigma: 0.1 })
                .expect("builder shapes are valid");
            let len = t.size();
            self.theta[offset..offset + len].copy_from_slice(t.entries());
        }
    }

    /// Materializes node tensors from the parameter vector, one value
    /// map per part. Reuse across a batch: values depend only on
    /// parameters.
    pub fn node_values(&self) -> Vec<BTreeMap<String, DenseTensor<f64>>> {
        let mut maps: Vec<BTreeMap<String, DenseTensor<f64>>> =
            vec![BTreeMap::new(); self.parts.len()];
        for s in &self.slots {
            let node = self.parts[s.part]
                .nodes()
                .iter()
                .find(|n| n.id == s.node)
                .unwrap();
            let t = DenseTensor::new(
                node.legs.clone(),
                node.shape.clone(),
                self.theta[s.offset..s.offset + s.len].to_vec(),
            )
            .expect("slot layout matches node shape");
            maps[s.part].insert(s.node.clone(), t);
        }
        maps
    }

    fn inputs_for_part(
        &self,
        part: usize,
        features: &[Vec<f64>],
    ) -> Result<BTreeMap<String, Vec<f64>>> {
        if features.len() != self.n_sites {
            return Err(Error::Shape(format!(
                "model consumes {} feature vectors, got {}",
                self.n_sites,
                features.len()
            )));
        }
        let mut inputs = BTreeMap::new();
        for (leg, site) in &self.part_inputs[part] {
            inputs.insert(leg.clone(), features[*site].clone());
        }
        Ok(inputs)
    }

    /// Contracts the model against per-site feature vectors and
    /// returns the raw label scores (length [`Self::output_dim`]).
    pub fn forward(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.forward_with(&self.node_values(), features)
    }

    /// `forward` with node values already materialized.
    pub fn forward_with(
        &self,
        values: &[BTreeMap<String, DenseTensor<f64>>],
        features: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        let mut scores = Vec::with_capacity(self.output_dim());
        for (pi, part) in self.parts.iter().enumerate() {
            let inputs = self.inputs_for_part(pi, features)?;
            let out = part.contract(&values[pi], &inputs)?;
            scores.extend_from_slice(out.entries());
        }
        Ok(scores)
    }

    /// Gradient of `<cotangent, scores>` with respect to the flat
    /// parameter vector.
    pub fn backward(&self, features: &[Vec<f64>], cotangent: &[f64]) -> Result<Vec<f64>> {
        self.backward_with(&self.node_values(), features, cotangent)
    }

    /// `backward` with node values already materialized.
    pub fn backward_with(
        &self,
        values: &[BTreeMap<String, DenseTensor<f64>>],
        features: &[Vec<f64>],
        cotangent: &[f64],
    ) -> Result<Vec<f64>> {
        if cotangent.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "cotangent length {} does not match output dim {}",
                cotangent.len(),
                self.output_dim()
            )));
        }
        let mut grad = vec![0.0; self.theta.len()];
        let mut cursor = 0usize;
        for (pi, part) in self.parts.iter().enumerate() {
            let inputs = self.inputs_for_part(pi, features)?;
            let dim = part.output_leg().dim;
            let cot = &cotangent[cursor..cursor + dim];
            cursor += dim;
            let grads = part.contract_adjoint(&values[pi], &inputs, cot)?;
            for s in self.slots.iter().filter(|s| s.part == pi) {
                let g = &grads[&s.node];
                grad[s.offset..s.offset + s.len].copy_from_slice(g.entries());
            }
        }
        Ok(grad)
    }

    /// Dense amplitude vector of a single-part model whose label leg
    /// has dimension 1, flattened with site 0 most significant.
    pub fn wavefunction(&self) -> Result<Vec<f64>> {
        if self.parts.len() != 1 || self.label_dim != 1 {
            return Err(Error::InvalidArgument(
                "wavefunction needs a single-part model with label dim 1".into(),
            ));
        }
        let size = self.phys_dim.checked_pow(self.n_sites as u32);
        if !matches!(size, Some(s) if s <= 1 << 20) {
            return Err(Error::InvalidArgument(format!(
                "state over {} sites of dim {} is too large",
                self.n_sites, self.phys_dim
            )));
        }
        let open = self.parts[0].contract_open(&self.node_values()[0])?;
        Ok(open.into_entries())
    }
}

/// Born probabilities `p_l = f_l^2 / sum_k f_k^2`.
pub fn born_probability(scores: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = scores.iter().map(|s| s * s).sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateData(format!(
            "Born normalization is {total}; all scores zero or invalid"
        )));
    }
    Ok(scores.iter().map(|s| s * s / total).collect())
}

/// Adjoint of [`born_probability`]: given `d loss / d p`, returns
/// `d loss / d scores`.
pub fn born_probability_grad(scores: &[f64], gprob: &[f64]) -> Result<Vec<f64>> {
    if gprob.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} probability cotangents for {} scores",
            gprob.len(),
            scores.len()
        )));
    }
    let total: f64 = scores.iter().map(|s| s * s).sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateData(format!(
            "Born normalization is {total}; all scores zero or invalid"
        )));
    }
    // p_l = f_l^2 / S with S = sum f^2, so the chain rule assembles
    // to c_m = (2 f_m / S) (g_m - sum_l g_l p_l).
    let weighted: f64 = scores
        .iter()
        .zip(gprob)
        .map(|(f, g)| g * f * f / total)
        .sum();
    Ok(scores
        .iter()
        .zip(gprob)
        .map(|(f, g)| 2.0 * f / total * (g - weighted))
        .collect())
}

/// Sum of trainable node sizes.
pub fn parameter_count(model: &CtnModel) -> usize {
    model.parameter_count()
}

fn check_dims(phys_dim: usize, bond_dim: usize, label_dim: usize) -> Result<()> {
    if phys_dim == 0 || bond_dim == 0 || label_dim == 0 {
        return Err(Error::InvalidArgument(
            "dimensions must be positive".into(),
        ));
    }
    Ok(())
}

/// Open-boundary MPS classifier: first node `(D, chi)`, interior nodes
/// `(chi, D, chi)`, last node `(chi, D, L)` carrying the label leg.
pub fn build_mps(n_sites: usize, phys_dim: usize, bond_dim: usize, label_dim: usize) -> Result<CtnModel> {
    check_dims(phys_dim, bond_dim, label_dim)?;
    if n_sites < 2 {
        return Err(Error::InvalidArgument(format!(
            "MPS needs at least 2 sites, got {n_sites}"
        )));
    }
    let (d, chi, l) = (phys_dim, bond_dim, label_dim);
    let mut nodes = Vec::new();
    let mut bonds = Vec::new();
    let mut inputs = Vec::new();
    for i in 0..n_sites {
        let id = format!("s{i}");
        let p = format!("p{i}");
        if i == 0 {
            nodes.push(NodeSpec::new(&id, &[&p, "b0"], &[d, chi], true));
        } else if i + 1 < n_sites {
            nodes.push(NodeSpec::new(
                &id,
                &[&format!("b{}", i - 1), &p, &format!("b{i}")],
                &[chi, d, chi],
                true,
            ));
        } else {
            nodes.push(NodeSpec::new(
                &id,
                &[&format!("b{}", i - 1), &p, "lbl"],
                &[chi, d, l],
                true,
            ));
        }
        inputs.push(OpenLeg::new(&id, &p, d));
        if i > 0 {
            let b = format!("b{}", i - 1);
            bonds.push(Bond::new(&format!("s{}", i - 1), &b, &id, &b));
        }
    }
    let last = format!("s{}", n_sites - 1);
    let spec = NetworkSpec::new(nodes, bonds, inputs, OpenLeg::new(&last, "lbl", l), None)?;
    CtnModel::assemble(Architecture::Mps, n_sites, d, chi, l, vec![spec])
}

/// Binary-tree TTN classifier: level-1 condensers `(D, D, chi)` pair
/// adjacent sites, higher levels pair adjacent chi-wires with
/// `(chi, chi, chi)` condensers (an odd wire is carried upward), and a
/// top node `(chi, chi, L)` joins the last two wires.
pub fn build_ttn(n_sites: usize, phys_dim: usize, bond_dim: usize, label_dim: usize) -> Result<CtnModel> {
    check_dims(phys_dim, bond_dim, label_dim)?;
    if n_sites % 2 != 0 || n_sites < 4 {
        return Err(Error::InvalidArgument(format!(
            "TTN needs an even site count of at least 4, got {n_sites}"
        )));
    }
    let (d, chi, l) = (phys_dim, bond_dim, label_dim);
    let mut nodes = Vec::new();
    let mut bonds = Vec::new();
    let mut inputs = Vec::new();
    let mut wires: Vec<(String, String)> = Vec::new();
    for k in 0..n_sites / 2 {
        let id = format!("cond1_{k}");
        let (pa, pb) = (format!("p{}", 2 * k), format!("p{}", 2 * k + 1));
        let w = format!("w1_{k}");
        nodes.push(NodeSpec::new(&id, &[&pa, &pb, &w], &[d, d, chi], true));
        inputs.push(OpenLeg::new(&id, &pa, d));
        inputs.push(OpenLeg::new(&id, &pb, d));
        wires.push((id, w));
    }
    let mut level = 2;
    while wires.len() > 2 {
        let mut next = Vec::new();
        let mut i = 0;
        let mut k = 0;
        while i + 1 < wires.len() {
            let id = format!("cond{level}_{k}");
            let (na, wa) = wires[i].clone();
            let (nb, wb) = wires[i + 1].clone();
            let w = format!("w{level}_{k}");
            nodes.push(NodeSpec::new(&id, &[&wa, &wb, &w], &[chi, chi, chi], true));
            bonds.push(Bond::new(&na, &wa, &id, &wa));
            bonds.push(Bond::new(&nb, &wb, &id, &wb));
            next.push((id, w));
            i += 2;
            k += 1;
        }
        if i < wires.len() {
            next.push(wires[i].clone());
        }
        wires = next;
        level += 1;
    }
    let (na, wa) = wires[0].clone();
    let (nb, wb) = wires[1].clone();
    nodes.push(NodeSpec::new("top", &[&wa, &wb, "lbl"], &[chi, chi, l], true));
    bonds.push(Bond::new(&na, &wa, "top", &wa));
    bonds.push(Bond::new(&nb, &wb, "top", &wb));
    let spec = NetworkSpec::new(nodes, bonds, inputs, OpenLeg::new("top", "lbl", l), None)?;
    CtnModel::assemble(Architecture::Ttn, n_sites, d, chi, l, vec![spec])
}

/// MERA classifier for 4 or 6 sites: rank-4 disentanglers between the
/// condenser layers of the corresponding TTN.
pub fn build_mera(n_sites: usize, phys_dim: usize, bond_dim: usize, label_dim: usize) -> Result<CtnModel> {
    check_dims(phys_dim, bond_dim, label_dim)?;
    let (d, chi, l) = (phys_dim, bond_dim, label_dim);
    let mut nodes = Vec::new();
    let mut bonds = Vec::new();
    let mut inputs = Vec::new();
    match n_sites {
        4 => {
            // Disentangler across the middle pair, condensers on the
            // flanks, label on top.
            nodes.push(NodeSpec::new("dis", &["p1", "p2", "m0", "m1"], &[d, d, chi, chi], true));
            nodes.push(NodeSpec::new("c0", &["p0", "m0", "w0"], &[d, chi, chi], true));
            nodes.push(NodeSpec::new("c1", &["m1", "p3", "w1"], &[chi, d, chi], true));
            nodes.push(NodeSpec::new("top", &["w0", "w1", "lbl"], &[chi, chi, l], true));
            bonds.push(Bond::new("dis", "m0", "c0", "m0"));
            bonds.push(Bond::new("dis", "m1", "c1", "m1"));
            bonds.push(Bond::new("c0", "w0", "top", "w0"));
            bonds.push(Bond::new("c1", "w1", "top", "w1"));
            for (node, leg) in [("c0", "p0"), ("dis", "p1"), ("dis", "p2"), ("c1", "p3")] {
                inputs.push(OpenLeg::new(node, leg, d));
            }
        }
        6 => {
            nodes.push(NodeSpec::new("d0", &["p1", "p2", "m0", "m1"], &[d, d, chi, chi], true));
            nodes.push(NodeSpec::new("d1", &["p3", "p4", "m2", "m3"], &[d, d, chi, chi], true));
            nodes.push(NodeSpec::new("c0", &["p0", "m0", "w0"], &[d, chi, chi], true));
            nodes.push(NodeSpec::new("c1", &["m1", "m2", "w1"], &[chi, chi, chi], true));
            nodes.push(NodeSpec::new("c2", &["m3", "p5", "w2"], &[chi, d, chi], true));
            nodes.push(NodeSpec::new("dm", &["w0", "w1", "u0", "u1"], &[chi, chi, chi, chi], true));
            nodes.push(NodeSpec::new("c3", &["u0", "u1", "t"], &[chi, chi, chi], true));
            nodes.push(NodeSpec::new("top", &["t", "w2", "lbl"], &[chi, chi, l], true));
            bonds.push(Bond::new("d0", "m0", "c0", "m0"));
            bonds.push(Bond::new("d0", "m1", "c1", "m1"));
            bonds.push(Bond::new("d1", "m2", "c1", "m2"));
            bonds.push(Bond::new("d1", "m3", "c2", "m3"));
            bonds.push(Bond::new("c0", "w0", "dm", "w0"));
            bonds.push(Bond::new("c1", "w1", "dm", "w1"));
            bonds.push(Bond::new("dm", "u0", "c3", "u0"));
            bonds.push(Bond::new("dm", "u1", "c3", "u1"));
            bonds.push(Bond::new("c3", "t", "top", "t"));
            bonds.push(Bond::new("c2", "w2", "top", "w2"));
            for (node, leg) in [
                ("c0", "p0"),
                ("d0", "p1"),
                ("d0", "p2"),
                ("d1", "p3"),
                ("d1", "p4"),
                ("c2", "p5"),
            ] {
                inputs.push(OpenLeg::new(node, leg, d));
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "MERA layouts exist for 4 or 6 sites, got {other}"
            )))
        }
    }
    let spec = NetworkSpec::new(nodes, bonds, inputs, OpenLeg::new("top", "lbl", l), None)?;
    CtnModel::assemble(Architecture::Mera, n_sites, d, chi, l, vec![spec])
}

/// Hybrid TTN front over a 6x6 image: nine rank-5 pooling nodes on the
/// 2x2 pixel blocks, condensers merging the resulting 3x3 wire grid
/// pairwise (the ninth wire joins the fourth pair's output), and a
/// `(chi -> 1)` projection on each of the four surviving wires.
///
/// `forward` consumes the 36 pixels row-major and returns 4 scalars.
pub fn build_hybrid_ttn_front(phys_dim: usize, bond_dim: usize) -> Result<CtnModel> {
    check_dims(phys_dim, bond_dim, 1)?;
    let (d, chi) = (phys_dim, bond_dim);
    let pool_legs = |k: usize| -> [String; 4] {
        let (br, bc) = (k / 3, k % 3);
        let idx = |dr: usize, dc: usize| (2 * br + dr) * 6 + (2 * bc + dc);
        [
            format!("p{}", idx(0, 0)),
            format!("p{}", idx(0, 1)),
            format!("p{}", idx(1, 0)),
            format!("p{}", idx(1, 1)),
        ]
    };
    let mut parts = Vec::new();
    for j in 0..4 {
        let mut nodes = Vec::new();
        let mut bonds = Vec::new();
        let mut inputs = Vec::new();
        let blocks: Vec<usize> = if j < 3 { vec![2 * j, 2 * j + 1] } else { vec![6, 7, 8] };
        for &k in &blocks {
            let id = format!("pool{k}");
            let pl = pool_legs(k);
            let w = format!("w{k}");
            let legs: Vec<&str> = pl.iter().map(|s| s.as_str()).chain([w.as_str()]).collect();
            nodes.push(NodeSpec::new(&id, &legs, &[d, d, d, d, chi], true));
            for leg in &pl {
                inputs.push(OpenLeg::new(&id, leg, d));
            }
        }
        let (wa, wb) = (format!("w{}", blocks[0]), format!("w{}", blocks[1]));
        let cid = format!("cond{j}");
        let c = format!("c{j}");
        nodes.push(NodeSpec::new(&cid, &[&wa, &wb, &c], &[chi, chi, chi], true));
        bonds.push(Bond::new(&format!("pool{}", blocks[0]), &wa, &cid, &wa));
        bonds.push(Bond::new(&format!("pool{}", blocks[1]), &wb, &cid, &wb));
        let (proj_src, proj_leg) = if j == 3 {
            // The ninth wire joins the fourth pair's output first.
            nodes.push(NodeSpec::new("cond3b", &[&c, "w8", "c4"], &[chi, chi, chi], true));
            bonds.push(Bond::new(&cid, &c, "cond3b", &c));
            bonds.push(Bond::new("pool8", "w8", "cond3b", "w8"));
            ("cond3b".to_string(), "c4".to_string())
        } else {
            (cid.clone(), c.clone())
        };
        let pid = format!("proj{j}");
        let o = format!("o{j}");
        nodes.push(NodeSpec::new(&pid, &[&proj_leg, &o], &[chi, 1], true));
        bonds.push(Bond::new(&proj_src, &proj_leg, &pid, &proj_leg));
        parts.push(NetworkSpec::new(
            nodes,
            bonds,
            inputs,
            OpenLeg::new(&pid, &o, 1),
            None,
        )?);
    }
    CtnModel::assemble(Architecture::HybridTtnFront, 36, d, chi, 1, parts)
}

/// Hybrid MPS front over a 6x6 image s-ordered to 36 features: four
/// independent nine-site open-boundary chains (features 0-8, 9-17,
/// 18-26, 27-35), each with a dimension-1 output leg on its centre
/// site.
///
/// `forward` consumes the 36 s-ordered features and returns 4 scalars.
pub fn build_hybrid_mps_front(phys_dim: usize, bond_dim: usize) -> Result<CtnModel> {
    check_dims(phys_dim, bond_dim, 1)?;
    let (d, chi) = (phys_dim, bond_dim);
    let mut parts = Vec::new();
    for c in 0..4 {
        let mut nodes = Vec::new();
        let mut bonds = Vec::new();
        let mut inputs = Vec::new();
        for j in 0..9usize {
            let id = format!("m{c}_{j}");
            let p = format!("p{}", 9 * c + j);
            let bl = format!("b{c}_{}", j.wrapping_sub(1));
            let br = format!("b{c}_{j}");
            match j {
                0 => nodes.push(NodeSpec::new(&id, &[&p, &br], &[d, chi], true)),
                4 => nodes.push(NodeSpec::new(
                    &id,
                    &[&bl, &p, &br, &format!("o{c}")],
                    &[chi, d, chi, 1],
                    true,
                )),
                8 => nodes.push(NodeSpec::new(&id, &[&bl, &p], &[chi, d], true)),
                _ => nodes.push(NodeSpec::new(&id, &[&bl, &p, &br], &[chi, d, chi], true)),
            }
            inputs.push(OpenLeg::new(&id, &p, d));
            if j > 0 {
                bonds.push(Bond::new(&format!("m{c}_{}", j - 1), &bl, &id, &bl));
            }
        }
        parts.push(NetworkSpec::new(
            nodes,
            bonds,
            inputs,
            OpenLeg::new(&format!("m{c}_4"), &format!("o{c}"), 1),
            None,
        )?);
    }
    CtnModel::assemble(Architecture::HybridMpsFront, 36, d, chi, 1, parts)
}
