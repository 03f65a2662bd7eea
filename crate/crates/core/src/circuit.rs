//! Variational circuit ansaetze whose connectivity mirrors the
//! classical tensor networks: Q-MPS (chain), Q-TTN (binary tree) and
//! Q-MERA (tree plus disentanglers).
//!
//! A circuit is a sequence of two-qubit blocks. Each block applies a
//! parameterised single-qubit gate to both wires followed by a CNOT
//! from `wire_a` to `wire_b`. The readout is sigma_z on the target of
//! the final block.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::contract_all;
use crate::qsim::{cnot, encode_ry, expval_z, ry, sample_shots, u3, Statevector, MAX_QUBITS};
use crate::tensor::DenseTensor;

type C = Complex64;

/// Which single-qubit gate family the blocks use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GateSet {
    /// `R_y(theta)`: one parameter per gate, real amplitudes.
    #[default]
    RyOnly,
    /// `U(theta, phi, lambda)`: three parameters per gate.
    Full,
}

/// Boundary handling for the Q-MERA disentangler layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeraLayout {
    #[default]
    Open,
    /// Adds a wrap-around disentangler when a level has at least four
    /// surviving wires.
    Periodic,
}

/// Parameter slots of one single-qubit gate, as indices into the
/// flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateParams {
    Ry { theta: usize },
    Full { theta: usize, phi: usize, lambda: usize },
}

impl GateParams {
    fn indices(&self) -> Vec<usize> {
        match *self {
            GateParams::Ry { theta } => vec![theta],
            GateParams::Full { theta, phi, lambda } => vec![theta, phi, lambda],
        }
    }
}

/// One two-qubit block: gates on both wires, then CNOT(a -> b).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub wire_a: usize,
    pub wire_b: usize,
    pub params_a: GateParams,
    pub params_b: GateParams,
}

/// A validated circuit layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    n_qubits: usize,
    blocks: Vec<Block>,
    measure_wire: usize,
    gate_set: GateSet,
    n_params: usize,
}

impl CircuitSpec {
    pub fn new(
        n_qubits: usize,
        blocks: Vec<Block>,
        measure_wire: usize,
        gate_set: GateSet,
    ) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        if measure_wire >= n_qubits {
            return Err(Error::Structure(format!(
                "measure wire {measure_wire} out of range for {n_qubits} qubits"
            )));
        }
        let mut indices = Vec::new();
        for (k, b) in blocks.iter().enumerate() {
            if b.wire_a >= n_qubits || b.wire_b >= n_qubits {
                return Err(Error::Structure(format!(
                    "block {k} touches a wire outside 0..{n_qubits}"
                )));
            }
            if b.wire_a == b.wire_b {
                return Err(Error::Structure(format!(
                    "block {k} uses wire {} twice",
                    b.wire_a
                )));
            }
            for gp in [&b.params_a, &b.params_b] {
                let ok = matches!(
                    (gate_set, gp),
                    (GateSet::RyOnly, GateParams::Ry { .. })
                        | (GateSet::Full, GateParams::Full { .. })
                );
                if !ok {
                    return Err(Error::Structure(format!(
                        "block {k} parameter slots do not match the {gate_set:?} gate set"
                    )));
                }
                indices.extend(gp.indices());
            }
        }
        if let Some(last) = blocks.last() {
            if last.wire_b != measure_wire {
                return Err(Error::Structure(format!(
                    "measure wire {measure_wire} must be the target of the final block ({})",
                    last.wire_b
                )));
            }
        }
        let n_params = indices.len();
        let mut seen = vec![false; n_params];
        for i in &indices {
            if *i >= n_params || seen[*i] {
                return Err(Error::Structure(format!(
                    "parameter indices must cover 0..{n_params} exactly once"
                )));
            }
            seen[*i] = true;
        }
        Ok(Self {
            n_qubits,
            blocks,
            measure_wire,
            gate_set,
            n_params,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn measure_wire(&self) -> usize {
        self.measure_wire
    }

    pub fn gate_set(&self) -> GateSet {
        self.gate_set
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Rebuilds the same layout with the other gate family, assigning
    /// fresh sequential parameter indices.
    pub fn with_gate_set(&self, gate_set: GateSet) -> CircuitSpec {
        let pairs: Vec<(usize, usize)> =
            self.blocks.iter().map(|b| (b.wire_a, b.wire_b)).collect();
        build_from_pairs(self.n_qubits, &pairs, self.measure_wire, gate_set)
            .expect("relabelling a valid layout cannot fail")
    }
}

fn build_from_pairs(
    n_qubits: usize,
    pairs: &[(usize, usize)],
    measure_wire: usize,
    gate_set: GateSet,
) -> Result<CircuitSpec> {
    let mut next = 0usize;
    let mut take = |k: usize| {
        let base = next;
        next += k;
        base
    };
    let blocks = pairs
        .iter()
        .map(|&(a, b)| {
            let (pa, pb) = match gate_set {
                GateSet::RyOnly => (
                    GateParams::Ry { theta: take(1) },
                    GateParams::Ry { theta: take(1) },
                ),
                GateSet::Full => {
                    let i = take(3);
                    let j = take(3);
                    (
                        GateParams::Full {
                            theta: i,
                            phi: i + 1,
                            lambda: i + 2,
                        },
                        GateParams::Full {
                            theta: j,
                            phi: j + 1,
                            lambda: j + 2,
                        },
                    )
                }
            };
            Block {
                wire_a: a,
                wire_b: b,
                params_a: pa,
                params_b: pb,
            }
        })
        .collect();
    CircuitSpec::new(n_qubits, blocks, measure_wire, gate_set)
}

fn check_width(n_qubits: usize) -> Result<()> {
    if n_qubits < 2 || n_qubits > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "circuit builders need 2..={MAX_QUBITS} qubits, got {n_qubits}"
        )));
    }
    Ok(())
}

/// Chain of blocks `(0,1), (1,2), ..., (n-2, n-1)`; readout on the
/// last wire.
pub fn build_qmps(n_qubits: usize) -> Result<CircuitSpec> {
    check_width(n_qubits)?;
    let pairs: Vec<(usize, usize)> = (0..n_qubits - 1).map(|i| (i, i + 1)).collect();
    build_from_pairs(n_qubits, &pairs, n_qubits - 1, GateSet::RyOnly)
}

/// One coarse-graining sweep: pair adjacent surviving wires, keep each
/// block's target, carry an unpaired last wire upward.
fn tree_level(survivors: &[usize], pairs: &mut Vec<(usize, usize)>) -> Vec<usize> {
    let mut next = Vec::new();
    let mut i = 0;
    while i + 1 < survivors.len() {
        pairs.push((survivors[i], survivors[i + 1]));
        next.push(survivors[i + 1]);
        i += 2;
    }
    if i < survivors.len() {
        next.push(survivors[i]);
    }
    next
}

/// Binary-tree circuit: repeated coarse-graining until one wire
/// remains.
pub fn build_qttn(n_qubits: usize) -> Result<CircuitSpec> {
    check_width(n_qubits)?;
    let mut pairs = Vec::new();
    let mut v: Vec<usize> = (0..n_qubits).collect();
    while v.len() > 1 {
        v = tree_level(&v, &mut pairs);
    }
    build_from_pairs(n_qubits, &pairs, v[0], GateSet::RyOnly)
}

/// Tree circuit with a disentangler layer straddling the block
/// boundaries before every coarse-graining sweep.
pub fn build_qmera_with(n_qubits: usize, layout: MeraLayout) -> Result<CircuitSpec> {
    check_width(n_qubits)?;
    let mut pairs = Vec::new();
    let mut v: Vec<usize> = (0..n_qubits).collect();
    while v.len() > 1 {
        let mut i = 1;
        while i + 1 < v.len() {
            pairs.push((v[i], v[i + 1]));
            i += 2;
        }
        if layout == MeraLayout::Periodic && v.len() >= 4 && v.len() % 2 == 0 {
            pairs.push((v[v.len() - 1], v[0]));
        }
        v = tree_level(&v, &mut pairs);
    }
    build_from_pairs(n_qubits, &pairs, v[0], GateSet::RyOnly)
}

/// [`build_qmera_with`] using the open layout.
pub fn build_qmera(n_qubits: usize) -> Result<CircuitSpec> {
    build_qmera_with(n_qubits, MeraLayout::Open)
}

fn gate_matrix(gp: &GateParams, theta: &[f64]) -> [[C; 2]; 2] {
    match *gp {
        GateParams::Ry { theta: i } => ry(theta[i]),
        GateParams::Full { theta: i, phi: j, lambda: k } => u3(theta[i], theta[j], theta[k]),
    }
}

/// Derivative of the gate with respect to its parameter slot holding
/// flat index `target`, or None when the gate does not use it.
fn gate_matrix_deriv(gp: &GateParams, theta: &[f64], target: usize) -> Option<[[C; 2]; 2]> {
    match *gp {
        GateParams::Ry { theta: i } if i == target => {
            let (c, s) = ((theta[i] / 2.0).cos(), (theta[i] / 2.0).sin());
            Some([
                [C::new(-s / 2.0, 0.0), C::new(-c / 2.0, 0.0)],
                [C::new(c / 2.0, 0.0), C::new(-s / 2.0, 0.0)],
            ])
        }
        GateParams::Full { theta: i, phi: j, lambda: k }
            if i == target || j == target || k == target =>
        {
            let (t, p, l) = (theta[i], theta[j], theta[k]);
            let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
            let half = C::new(0.5, 0.0);
            let eip = C::new(0.0, p).exp();
            let eil = C::new(0.0, l).exp();
            let eilp = C::new(0.0, l + p).exp();
            let im = C::new(0.0, 1.0);
            let z = C::new(0.0, 0.0);
            Some(if target == i {
                [
                    [-half * s, -half * eil * c],
                    [half * eip * c, -half * eilp * s],
                ]
            } else if target == j {
                [[z, z], [im * eip * s, im * eilp * c]]
            } else {
                [[z, -im * eil * s], [z, im * eilp * c]]
            })
        }
        _ => None,
    }
}

fn check_args(circuit: &CircuitSpec, angles: &[f64], theta: &[f64]) -> Result<()> {
    if angles.len() != circuit.n_qubits {
        return Err(Error::Shape(format!(
            "expected {} encoding angles, got {}",
            circuit.n_qubits,
            angles.len()
        )));
    }
    if theta.len() != circuit.n_params {
        return Err(Error::Shape(format!(
            "expected {} parameters, got {}",
            circuit.n_params,
            theta.len()
        )));
    }
    Ok(())
}

/// Runs encoding plus all blocks; when `deriv_target` is set, the gate
/// owning that parameter index is replaced by its derivative matrix,
/// yielding the (unnormalised) derivative of the state.
fn run(
    circuit: &CircuitSpec,
    angles: &[f64],
    theta: &[f64],
    deriv_target: Option<usize>,
) -> Result<Statevector> {
    let mut state = encode_ry(angles)?;
    for b in &circuit.blocks {
        for (wire, gp) in [(b.wire_a, &b.params_a), (b.wire_b, &b.params_b)] {
            let g = match deriv_target.and_then(|t| gate_matrix_deriv(gp, theta, t)) {
                Some(d) => d,
                None => gate_matrix(gp, theta),
            };
            state.apply_one_in_place(&g, wire);
        }
        state.apply_two_in_place(&cnot(), b.wire_a, b.wire_b);
    }
    Ok(state)
}

/// Prepares the circuit state for one encoded input.
pub fn evaluate(circuit: &CircuitSpec, angles: &[f64], theta: &[f64]) -> Result<Statevector> {
    check_args(circuit, angles, theta)?;
    run(circuit, angles, theta, None)
}

/// `<sigma_z>` on the measurement wire.
pub fn expectation(circuit: &CircuitSpec, angles: &[f64], theta: &[f64]) -> Result<f64> {
    let state = evaluate(circuit, angles, theta)?;
    expval_z(&state, circuit.measure_wire)
}

/// Shot-noise estimate of [`expectation`].
pub fn expectation_sampled(
    circuit: &CircuitSpec,
    angles: &[f64],
    theta: &[f64],
    n_shots: u64,
    seed: u64,
) -> Result<f64> {
    let state = evaluate(circuit, angles, theta)?;
    sample_shots(&state, circuit.measure_wire, n_shots, seed)
}

/// Exact gradient of [`expectation`] in the trainable parameters via
/// the two-point shift rule `(E(t + pi/2) - E(t - pi/2)) / 2`.
pub fn param_shift_grad(circuit: &CircuitSpec, angles: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    check_args(circuit, angles, theta)?;
    let mut shifted = theta.to_vec();
    let mut grad = vec![0.0; circuit.n_params];
    for i in 0..circuit.n_params {
        shifted[i] = theta[i] + std::f64::consts::FRAC_PI_2;
        let plus = expectation(circuit, angles, &shifted)?;
        shifted[i] = theta[i] - std::f64::consts::FRAC_PI_2;
        let minus = expectation(circuit, angles, &shifted)?;
        shifted[i] = theta[i];
        grad[i] = (plus - minus) / 2.0;
    }
    Ok(grad)
}

/// Gradient of [`expectation`] in the encoding angles; the encoding
/// gates are rotations, so the same shift rule applies.
pub fn encoding_shift_grad(
    circuit: &CircuitSpec,
    angles: &[f64],
    theta: &[f64],
) -> Result<Vec<f64>> {
    check_args(circuit, angles, theta)?;
    let mut shifted = angles.to_vec();
    let mut grad = vec![0.0; circuit.n_qubits];
    for i in 0..circuit.n_qubits {
        shifted[i] = angles[i] + std::f64::consts::FRAC_PI_2;
        let plus = expectation(circuit, &shifted, theta)?;
        shifted[i] = angles[i] - std::f64::consts::FRAC_PI_2;
        let minus = expectation(circuit, &shifted, theta)?;
        shifted[i] = angles[i];
        grad[i] = (plus - minus) / 2.0;
    }
    Ok(grad)
}

/// Fubini-Study metric from a state and its parameter derivatives:
/// `g_ij = Re<d_i psi|d_j psi> - Re(<d_i psi|psi><psi|d_j psi>)`.
pub fn fubini_study_metric(psi: &[C], derivs: &[Vec<C>]) -> Result<DMatrix<f64>> {
    for d in derivs {
        if d.len() != psi.len() {
            return Err(Error::Shape(format!(
                "derivative state length {} does not match state length {}",
                d.len(),
                psi.len()
            )));
        }
    }
    let dot = |a: &[C], b: &[C]| -> C { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let overlaps: Vec<C> = derivs.iter().map(|d| dot(psi, d)).collect();
    let n = derivs.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let val = (dot(&derivs[i], &derivs[j]) - overlaps[i].conj() * overlaps[j]).re;
            g[(i, j)] = val;
            g[(j, i)] = val;
        }
    }
    Ok(g)
}

/// Fubini-Study metric of the circuit state in its trainable
/// parameters, from exact derivative states.
pub fn metric_tensor(
    circuit: &CircuitSpec,
    angles: &[f64],
    theta: &[f64],
) -> Result<DMatrix<f64>> {
    check_args(circuit, angles, theta)?;
    let psi = run(circuit, angles, theta, None)?;
    let derivs: Vec<Vec<C>> = (0..circuit.n_params)
        .map(|i| Ok(run(circuit, angles, theta, Some(i))?.amplitudes().to_vec()))
        .collect::<Result<_>>()?;
    fubini_study_metric(psi.amplitudes(), &derivs)
}

fn wire_leg(wire: usize, version: usize) -> String {
    format!("q{wire}_v{version}")
}

/// Contracts the circuit as a tensor network and returns the final
/// amplitudes in the simulator's basis ordering. Independent of the
/// statevector path: gates become rank-2/rank-4 tensors wired by
/// versioned legs and the network is contracted pairwise.
pub fn circuit_as_network(
    circuit: &CircuitSpec,
    angles: &[f64],
    theta: &[f64],
) -> Result<Vec<C>> {
    check_args(circuit, angles, theta)?;
    let n = circuit.n_qubits;
    let mut version = vec![0usize; n];
    let mut parts: Vec<DenseTensor<C>> = Vec::new();
    for (w, &x) in angles.iter().enumerate() {
        let v = vec![
            C::new((x / 2.0).cos(), 0.0),
            C::new((x / 2.0).sin(), 0.0),
        ];
        parts.push(DenseTensor::new(vec![wire_leg(w, 0)], vec![2], v)?);
    }
    for b in &circuit.blocks {
        for (wire, gp) in [(b.wire_a, &b.params_a), (b.wire_b, &b.params_b)] {
            let g = gate_matrix(gp, theta);
            let in_leg = wire_leg(wire, version[wire]);
            version[wire] += 1;
            let out_leg = wire_leg(wire, version[wire]);
            parts.push(DenseTensor::new(
                vec![out_leg, in_leg],
                vec![2, 2],
                vec![g[0][0], g[0][1], g[1][0], g[1][1]],
            )?);
        }
        let (a, bb) = (b.wire_a, b.wire_b);
        let (a_in, b_in) = (wire_leg(a, version[a]), wire_leg(bb, version[bb]));
        version[a] += 1;
        version[bb] += 1;
        let (a_out, b_out) = (wire_leg(a, version[a]), wire_leg(bb, version[bb]));
        let m = cnot();
        let mut entries = Vec::with_capacity(16);
        for ao in 0..2 {
            for bo in 0..2 {
                for ai in 0..2 {
                    for bi in 0..2 {
                        entries.push(m[ao * 2 + bo][ai * 2 + bi]);
                    }
                }
            }
        }
        parts.push(DenseTensor::new(
            vec![a_out, b_out, a_in, b_in],
            vec![2, 2, 2, 2],
            entries,
        )?);
    }
    let result = contract_all(parts)?;
    let wanted: Vec<String> = (0..n).map(|w| wire_leg(w, version[w])).collect();
    Ok(result.permute(&wanted)?.into_entries())
}
