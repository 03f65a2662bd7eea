//! End-to-end training of classical, quantum, and hybrid classifiers
//! on featurized events, with Adam for tensor-network parameters and
//! metric-preconditioned descent for circuit parameters.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    build_qmera_with, build_qmps, build_qttn, encoding_shift_grad, evaluate as circuit_state,
    expectation, param_shift_grad, metric_tensor, CircuitSpec, GateSet, MeraLayout,
};
use crate::ctn::{
    born_probability, born_probability_grad, build_hybrid_mps_front, build_hybrid_ttn_front,
    build_mera, build_mps, build_ttn, CtnModel,
};
use crate::diag::{roc_auc, BornModel};
use crate::encode::hypersphere_map;
use crate::error::{Error, Result};
use crate::optim::{adam_step, cross_entropy, cross_entropy_grad, qngd_step, AdamState};
use crate::qsim::sample_shots;

/// User-facing architecture selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArch {
    Mps,
    Ttn,
    Mera,
    Qmps,
    Qttn,
    Qmera,
    HybridTtn,
    HybridMps,
}

impl ModelArch {
    pub fn is_classical(self) -> bool {
        matches!(self, ModelArch::Mps | ModelArch::Ttn | ModelArch::Mera)
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, ModelArch::Qmps | ModelArch::Qttn | ModelArch::Qmera)
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, ModelArch::HybridTtn | ModelArch::HybridMps)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelArch::Mps => "mps",
            ModelArch::Ttn => "ttn",
            ModelArch::Mera => "mera",
            ModelArch::Qmps => "qmps",
            ModelArch::Qttn => "qttn",
            ModelArch::Qmera => "qmera",
            ModelArch::HybridTtn => "hybrid-ttn",
            ModelArch::HybridMps => "hybrid-mps",
        }
    }
}

impl std::fmt::Display for ModelArch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelArch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mps" => ModelArch::Mps,
            "ttn" => ModelArch::Ttn,
            "mera" => ModelArch::Mera,
            "qmps" => ModelArch::Qmps,
            "qttn" => ModelArch::Qttn,
            "qmera" => ModelArch::Qmera,
            "hybrid-ttn" => ModelArch::HybridTtn,
            "hybrid-mps" => ModelArch::HybridMps,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown architecture {other:?} (expected mps|ttn|mera|qmps|qttn|qmera|hybrid-ttn|hybrid-mps)"
                )))
            }
        })
    }
}

/// Circuit family used for the quantum stage of a hybrid model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuantumArch {
    #[default]
    Qmps,
    Qttn,
    Qmera,
}

fn build_circuit(arch: QuantumArch, n_qubits: usize, layout: MeraLayout) -> Result<CircuitSpec> {
    match arch {
        QuantumArch::Qmps => build_qmps(n_qubits),
        QuantumArch::Qttn => build_qttn(n_qubits),
        QuantumArch::Qmera => build_qmera_with(n_qubits, layout),
    }
}

/// Structural knobs shared by all architectures. Fields that do not
/// apply to the selected architecture are ignored (hybrids fix the
/// front at 6x6 images and four circuit qubits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ModelOptions {
    /// Chain/tree sites for classical models, qubits for quantum ones.
    pub n_sites: usize,
    pub phys_dim: usize,
    pub bond_dim: usize,
    pub gate_set: GateSet,
    /// Circuit family behind a hybrid front.
    pub quantum_arch: QuantumArch,
    pub mera_layout: MeraLayout,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            n_sites: 6,
            phys_dim: 2,
            bond_dim: 5,
            gate_set: GateSet::RyOnly,
            quantum_arch: QuantumArch::default(),
            mera_layout: MeraLayout::default(),
        }
    }
}

#[derive(Debug, Clone)]
enum Body {
    Classical(CtnModel),
    Quantum {
        circuit: CircuitSpec,
        theta: Vec<f64>,
    },
    Hybrid {
        front: CtnModel,
        circuit: CircuitSpec,
        theta: Vec<f64>,
    },
}

/// A classifier of any of the supported families, with a uniform
/// predict/gradient interface. Parameters are split into a classical
/// part (tensor networks) and a quantum part (circuit angles); plain
/// models leave one side empty.
#[derive(Debug, Clone)]
pub struct Model {
    arch: ModelArch,
    options: ModelOptions,
    body: Body,
}

pub const LABEL_CLASSES: usize = 2;

impl Model {
    /// Builds an untrained model; parameters start at the seeded
    /// defaults of [`Model::init_params`] with seed 0.
    pub fn build(arch: ModelArch, options: &ModelOptions) -> Result<Model> {
        let mut options = options.clone();
        let body = match arch {
            ModelArch::Mps => Body::Classical(build_mps(
                options.n_sites,
                options.phys_dim,
                options.bond_dim,
                LABEL_CLASSES,
            )?),
            ModelArch::Ttn => Body::Classical(build_ttn(
                options.n_sites,
                options.phys_dim,
                options.bond_dim,
                LABEL_CLASSES,
            )?),
            ModelArch::Mera => Body::Classical(build_mera(
                options.n_sites,
                options.phys_dim,
                options.bond_dim,
                LABEL_CLASSES,
            )?),
            ModelArch::Qmps | ModelArch::Qttn | ModelArch::Qmera => {
                let qarch = match arch {
                    ModelArch::Qmps => QuantumArch::Qmps,
                    ModelArch::Qttn => QuantumArch::Qttn,
                    _ => QuantumArch::Qmera,
                };
                let mut circuit = build_circuit(qarch, options.n_sites, options.mera_layout)?;
                if options.gate_set == GateSet::Full {
                    circuit = circuit.with_gate_set(GateSet::Full);
                }
                let theta = vec![0.0; circuit.n_params()];
                Body::Quantum { circuit, theta }
            }
            ModelArch::HybridTtn | ModelArch::HybridMps => {
                let front = if arch == ModelArch::HybridTtn {
                    build_hybrid_ttn_front(options.phys_dim, options.bond_dim)?
                } else {
                    build_hybrid_mps_front(options.phys_dim, options.bond_dim)?
                };
                let mut circuit = build_circuit(
                    options.quantum_arch,
                    front.output_dim(),
                    options.mera_layout,
                )?;
                if options.gate_set == GateSet::Full {
                    circuit = circuit.with_gate_set(GateSet::Full);
                }
                options.n_sites = front.n_sites();
                let theta = vec![0.0; circuit.n_params()];
                Body::Hybrid {
                    front,
                    circuit,
                    theta,
                }
            }
        };
        let mut model = Model {
            arch,
            options,
            body,
        };
        model.init_params(0);
        Ok(model)
    }

    pub fn arch(&self) -> ModelArch {
        self.arch
    }

    pub fn options(&self) -> &ModelOptions {
        &self.options
    }

    /// Length of the per-event feature vector this model consumes.
    pub fn n_features(&self) -> usize {
        match &self.body {
            Body::Classical(net) => net.n_sites(),
            Body::Quantum { circuit, .. } => circuit.n_qubits(),
            Body::Hybrid { front, .. } => front.n_sites(),
        }
    }

    pub fn n_classical_params(&self) -> usize {
        match &self.body {
            Body::Classical(net) => net.parameter_count(),
            Body::Quantum { .. } => 0,
            Body::Hybrid { front, .. } => front.parameter_count(),
        }
    }

    pub fn n_quantum_params(&self) -> usize {
        match &self.body {
            Body::Classical(_) => 0,
            Body::Quantum { theta, .. } | Body::Hybrid { theta, .. } => theta.len(),
        }
    }

    pub fn classical_params(&self) -> &[f64] {
        match &self.body {
            Body::Classical(net) => net.params(),
            Body::Quantum { .. } => &[],
            Body::Hybrid { front, .. } => front.params(),
        }
    }

    pub fn quantum_params(&self) -> &[f64] {
        match &self.body {
            Body::Classical(_) => &[],
            Body::Quantum { theta, .. } | Body::Hybrid { theta, .. } => theta,
        }
    }

    pub fn set_classical_params(&mut self, params: &[f64]) -> Result<()> {
        match &mut self.body {
            Body::Classical(net) => net.set_params(params),
            Body::Hybrid { front, .. } => front.set_params(params),
            Body::Quantum { .. } if params.is_empty() => Ok(()),
            Body::Quantum { .. } => Err(Error::Shape(
                "quantum model has no classical parameters".into(),
            )),
        }
    }

    pub fn set_quantum_params(&mut self, params: &[f64]) -> Result<()> {
        match &mut self.body {
            Body::Classical(_) if params.is_empty() => Ok(()),
            Body::Classical(_) => Err(Error::Shape(
                "classical model has no quantum parameters".into(),
            )),
            Body::Quantum { theta, .. } | Body::Hybrid { theta, .. } => {
                if params.len() != theta.len() {
                    return Err(Error::Shape(format!(
                        "expected {} circuit parameters, got {}",
                        theta.len(),
                        params.len()
                    )));
                }
                theta.copy_from_slice(params);
                Ok(())
            }
        }
    }

    /// All trainable parameters, classical first.
    pub fn stacked_params(&self) -> Vec<f64> {
        let mut out = self.classical_params().to_vec();
        out.extend_from_slice(self.quantum_params());
        out
    }

    pub fn set_stacked_params(&mut self, params: &[f64]) -> Result<()> {
        let nc = self.n_classical_params();
        if params.len() != nc + self.n_quantum_params() {
            return Err(Error::Shape(format!(
                "expected {} stacked parameters, got {}",
                nc + self.n_quantum_params(),
                params.len()
            )));
        }
        self.set_classical_params(&params[..nc])?;
        self.set_quantum_params(&params[nc..])
    }

    /// Reseeds all parameters: tensor networks get identity-plus-noise
    /// cores, circuit angles start uniformly in [-0.1, 0.1].
    pub fn init_params(&mut self, seed: u64) {
        let qseed = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        match &mut self.body {
            Body::Classical(net) => net.init_params(seed),
            Body::Quantum { theta, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(qseed);
                for t in theta.iter_mut() {
                    *t = rng.random_range(-0.1..0.1);
                }
            }
            Body::Hybrid { front, theta, .. } => {
                front.init_params(seed);
                let mut rng = ChaCha8Rng::seed_from_u64(qseed);
                for t in theta.iter_mut() {
                    *t = rng.random_range(-0.1..0.1);
                }
            }
        }
    }

    fn site_features(net: &CtnModel, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != net.n_sites() {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                net.n_sites(),
                x.len()
            )));
        }
        x.iter()
            .map(|&v| hypersphere_map(v, net.phys_dim()))
            .collect()
    }

    /// Two-class probability vector for one event. Classical nets
    /// normalize their squared scores; circuits map `p = <sigma_z>^2`
    /// to `[p, 1 - p]`.
    pub fn predict(&self, x: &[f64]) -> Result<[f64; 2]> {
        match &self.body {
            Body::Classical(net) => {
                let scores = net.forward(&Self::site_features(net, x)?)?;
                let p = born_probability(&scores)?;
                Ok([p[0], p[1]])
            }
            Body::Quantum { circuit, theta } => {
                let e = expectation(circuit, x, theta)?;
                Ok([e * e, 1.0 - e * e])
            }
            Body::Hybrid {
                front,
                circuit,
                theta,
            } => {
                let angles = front.forward(&Self::site_features(front, x)?)?;
                let e = expectation(circuit, &angles, theta)?;
                Ok([e * e, 1.0 - e * e])
            }
        }
    }

    /// Like [`Model::predict`], but estimates circuit expectations
    /// from `n_shots` measurement samples. Classical predictions have
    /// no shot noise and are returned exactly.
    pub fn predict_sampled(&self, x: &[f64], n_shots: u64, seed: u64) -> Result<[f64; 2]> {
        match &self.body {
            Body::Classical(_) => self.predict(x),
            Body::Quantum { circuit, theta } => {
                let state = circuit_state(circuit, x, theta)?;
                let e = sample_shots(&state, circuit.measure_wire(), n_shots, seed)?;
                Ok([e * e, 1.0 - e * e])
            }
            Body::Hybrid {
                front,
                circuit,
                theta,
            } => {
                let angles = front.forward(&Self::site_features(front, x)?)?;
                let state = circuit_state(circuit, &angles, theta)?;
                let e = sample_shots(&state, circuit.measure_wire(), n_shots, seed)?;
                Ok([e * e, 1.0 - e * e])
            }
        }
    }

    /// Probabilities for a batch, evaluated in parallel with a stable
    /// output order.
    pub fn batch_probabilities(&self, xs: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
        match &self.body {
            Body::Classical(net) => {
                let values = net.node_values();
                xs.par_iter()
                    .map(|x| {
                        let scores = net.forward_with(&values, &Self::site_features(net, x)?)?;
                        let p = born_probability(&scores)?;
                        Ok([p[0], p[1]])
                    })
                    .collect()
            }
            Body::Quantum { .. } => xs.par_iter().map(|x| self.predict(x)).collect(),
            Body::Hybrid {
                front,
                circuit,
                theta,
            } => {
                let values = front.node_values();
                xs.par_iter()
                    .map(|x| {
                        let angles =
                            front.forward_with(&values, &Self::site_features(front, x)?)?;
                        let e = expectation(circuit, &angles, theta)?;
                        Ok([e * e, 1.0 - e * e])
                    })
                    .collect()
            }
        }
    }

    /// Sums per-event parameter gradients of `sum_l gprob_l * p_l`
    /// over the batch. Returns `(classical, quantum)` gradients.
    pub fn batch_gradients(
        &self,
        xs: &[Vec<f64>],
        gprobs: &[[f64; 2]],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if xs.len() != gprobs.len() {
            return Err(Error::Shape(format!(
                "{} events with {} probability cotangents",
                xs.len(),
                gprobs.len()
            )));
        }
        let per_event: Vec<(Vec<f64>, Vec<f64>)> = match &self.body {
            Body::Classical(net) => {
                let values = net.node_values();
                xs.par_iter()
                    .zip(gprobs)
                    .map(|(x, g)| {
                        let feats = Self::site_features(net, x)?;
                        let scores = net.forward_with(&values, &feats)?;
                        let cot = born_probability_grad(&scores, g)?;
                        Ok((net.backward_with(&values, &feats, &cot)?, Vec::new()))
                    })
                    .collect::<Result<_>>()?
            }
            Body::Quantum { circuit, theta } => xs
                .par_iter()
                .zip(gprobs)
                .map(|(x, g)| {
                    let e = expectation(circuit, x, theta)?;
                    let dlde = (g[0] - g[1]) * 2.0 * e;
                    let shift = param_shift_grad(circuit, x, theta)?;
                    Ok((Vec::new(), shift.iter().map(|s| dlde * s).collect()))
                })
                .collect::<Result<_>>()?,
            Body::Hybrid {
                front,
                circuit,
                theta,
            } => {
                let values = front.node_values();
                xs.par_iter()
                    .zip(gprobs)
                    .map(|(x, g)| {
                        let feats = Self::site_features(front, x)?;
                        let angles = front.forward_with(&values, &feats)?;
                        let e = expectation(circuit, &angles, theta)?;
                        let dlde = (g[0] - g[1]) * 2.0 * e;
                        let shift = param_shift_grad(circuit, &angles, theta)?;
                        let qgrad: Vec<f64> = shift.iter().map(|s| dlde * s).collect();
                        let enc = encoding_shift_grad(circuit, &angles, theta)?;
                        let cot: Vec<f64> = enc.iter().map(|d| dlde * d).collect();
                        let cgrad = front.backward_with(&values, &feats, &cot)?;
                        Ok((cgrad, qgrad))
                    })
                    .collect::<Result<_>>()?
            }
        };
        let mut classical = vec![0.0; self.n_classical_params()];
        let mut quantum = vec![0.0; self.n_quantum_params()];
        for (c, q) in &per_event {
            for (acc, v) in classical.iter_mut().zip(c) {
                *acc += v;
            }
            for (acc, v) in quantum.iter_mut().zip(q) {
                *acc += v;
            }
        }
        Ok((classical, quantum))
    }

    /// Mean Fubini-Study metric of the circuit part over the batch,
    /// or None for purely classical models.
    pub fn batch_metric(&self, xs: &[Vec<f64>]) -> Result<Option<DMatrix<f64>>> {
        let metrics: Vec<DMatrix<f64>> = match &self.body {
            Body::Classical(_) => return Ok(None),
            Body::Quantum { circuit, theta } => xs
                .par_iter()
                .map(|x| metric_tensor(circuit, x, theta))
                .collect::<Result<_>>()?,
            Body::Hybrid {
                front,
                circuit,
                theta,
            } => {
                let values = front.node_values();
                xs.par_iter()
                    .map(|x| {
                        let angles =
                            front.forward_with(&values, &Self::site_features(front, x)?)?;
                        metric_tensor(circuit, &angles, theta)
                    })
                    .collect::<Result<_>>()?
            }
        };
        if metrics.is_empty() {
            return Err(Error::InvalidArgument("empty batch for metric".into()));
        }
        let d = self.n_quantum_params();
        let mut mean = DMatrix::zeros(d, d);
        for m in &metrics {
            mean += m;
        }
        mean /= metrics.len() as f64;
        Ok(Some(mean))
    }

}

impl BornModel for Model {
    fn n_params(&self) -> usize {
        self.n_classical_params() + self.n_quantum_params()
    }

    fn n_features(&self) -> usize {
        Model::n_features(self)
    }

    fn probability(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        let mut at = self.clone();
        at.set_stacked_params(theta)?;
        match &at.body {
            Body::Classical(net) => {
                let scores = net.forward(&Self::site_features(net, x)?)?;
                Ok(born_probability(&scores)?[1])
            }
            _ => {
                let p = at.predict(x)?;
                Ok(p[0])
            }
        }
    }

    fn probability_grad(&self, x: &[f64], theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut at = self.clone();
        at.set_stacked_params(theta)?;
        match &at.body {
            Body::Classical(net) => {
                let feats = Self::site_features(net, x)?;
                let scores = net.forward(&feats)?;
                let p = born_probability(&scores)?[1];
                let cot = born_probability_grad(&scores, &[0.0, 1.0])?;
                Ok((p, net.backward(&feats, &cot)?))
            }
            Body::Quantum { circuit, theta } => {
                let e = expectation(circuit, x, theta)?;
                let shift = param_shift_grad(circuit, x, theta)?;
                Ok((e * e, shift.iter().map(|s| 2.0 * e * s).collect()))
            }
            Body::Hybrid {
                front,
                circuit,
                theta,
            } => {
                let feats = Self::site_features(front, x)?;
                let angles = front.forward(&feats)?;
                let e = expectation(circuit, &angles, theta)?;
                let shift = param_shift_grad(circuit, &angles, theta)?;
                let enc = encoding_shift_grad(circuit, &angles, theta)?;
                let cot: Vec<f64> = enc.iter().map(|d| 2.0 * e * d).collect();
                let mut grad = front.backward(&feats, &cot)?;
                grad.extend(shift.iter().map(|s| 2.0 * e * s));
                Ok((e * e, grad))
            }
        }
    }
}

/// Featurized events ready for training: per-event feature vectors
/// (angles in [0, pi]) with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl FeatureSet {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature vectors for {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(first) = features.first() {
            let width = first.len();
            for (k, f) in features.iter().enumerate() {
                if f.len() != width {
                    return Err(Error::Shape(format!(
                        "event {k} has {} features, expected {width}",
                        f.len()
                    )));
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::DegenerateData(format!(
                        "event {k} contains non-finite features"
                    )));
                }
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= LABEL_CLASSES) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside the two-class range"
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Hyperparameters of the training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lr_classical: f64,
    pub lr_quantum: f64,
    /// Multiplier applied to both learning rates on decay.
    pub decay_factor: f64,
    /// Epochs of stalled validation loss before a decay (or the fixed
    /// period when `periodic_decay` is set).
    pub decay_patience: usize,
    /// Epochs of stalled validation loss before stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
    /// Ridge added to the metric in the natural-gradient solve.
    pub qngd_regularizer: f64,
    /// Shots for evaluation-time sampling; training always uses exact
    /// expectations.
    pub shots: Option<u64>,
    /// Decay on a fixed schedule instead of on validation stalls.
    pub periodic_decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            max_epochs: 200,
            lr_classical: 1e-4,
            lr_quantum: 1e-2,
            decay_factor: 0.5,
            decay_patience: 25,
            early_stop_patience: 50,
            seed: 0,
            qngd_regularizer: 1e-6,
            shots: None,
            periodic_decay: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1");
        }
        if self.max_epochs == 0 {
            problems.push("max_epochs must be at least 1");
        }
        if !(self.lr_classical >= 0.0 && self.lr_classical.is_finite()) {
            problems.push("lr_classical must be finite and non-negative");
        }
        if !(self.lr_quantum >= 0.0 && self.lr_quantum.is_finite()) {
            problems.push("lr_quantum must be finite and non-negative");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            problems.push("decay_factor must lie in (0, 1)");
        }
        if self.decay_patience == 0 {
            problems.push("decay_patience must be at least 1");
        }
        if self.early_stop_patience == 0 {
            problems.push("early_stop_patience must be at least 1");
        }
        if !(self.qngd_regularizer >= 0.0 && self.qngd_regularizer.is_finite()) {
            problems.push("qngd_regularizer must be finite and non-negative");
        }
        if self.shots == Some(0) {
            problems.push("shots, when set, must be at least 1");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

/// One epoch's entries in the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: f64,
    pub lr_classical: f64,
    pub lr_quantum: f64,
}

/// Full training history plus which epoch the returned parameters
/// come from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_auc,lr_classical,lr_quantum\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.train_loss, r.val_loss, r.val_auc, r.lr_classical, r.lr_quantum
            ));
        }
        out
    }
}

fn check_set(model: &Model, set: &FeatureSet, name: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} set is empty")));
    }
    if set.features[0].len() != model.n_features() {
        return Err(Error::Shape(format!(
            "{name} set has {} features per event, model expects {}",
            set.features[0].len(),
            model.n_features()
        )));
    }
    Ok(())
}

fn probs_and_loss(model: &Model, set: &FeatureSet) -> Result<(Vec<[f64; 2]>, f64)> {
    let probs = model.batch_probabilities(&set.features)?;
    let as_vecs: Vec<Vec<f64>> = probs.iter().map(|p| p.to_vec()).collect();
    let loss = cross_entropy(&as_vecs, &set.labels)?;
    Ok((probs, loss))
}

/// Trains in place: shuffled seeded batches, Adam on the classical
/// parameters, natural gradient on the circuit parameters, shared
/// learning-rate decay, early stopping, and best-validation restore.
pub fn train(
    model: &mut Model,
    train_set: &FeatureSet,
    val_set: &FeatureSet,
    config: &TrainConfig,
) -> Result<TrainLog> {
    config.validate()?;
    check_set(model, train_set, "training")?;
    check_set(model, val_set, "validation")?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model.n_classical_params());
    let mut lr_c = config.lr_classical;
    let mut lr_q = config.lr_quantum;
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = (
        model.classical_params().to_vec(),
        model.quantum_params().to_vec(),
    );
    let mut since_improve = 0usize;
    let mut since_decay = 0usize;
    let mut records = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let xs: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&i| train_set.features[i].clone())
                .collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| train_set.labels[i]).collect();
            let probs = model.batch_probabilities(&xs)?;
            let as_vecs: Vec<Vec<f64>> = probs.iter().map(|p| p.to_vec()).collect();
            let batch_loss = cross_entropy(&as_vecs, &ys)?;
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss became {batch_loss} in epoch {epoch}; aborting"
                )));
            }
            loss_sum += batch_loss * chunk.len() as f64;
            let grads = cross_entropy_grad(&as_vecs, &ys)?;
            let gprobs: Vec<[f64; 2]> = grads.iter().map(|g| [g[0], g[1]]).collect();
            let (cgrad, qgrad) = model.batch_gradients(&xs, &gprobs)?;
            if model.n_classical_params() > 0 {
                let mut params = model.classical_params().to_vec();
                adam_step(&mut adam, &mut params, &cgrad, lr_c)?;
                model.set_classical_params(&params)?;
            }
            if model.n_quantum_params() > 0 {
                let metric = model
                    .batch_metric(&xs)?
                    .expect("quantum parameters imply a metric");
                let mut params = model.quantum_params().to_vec();
                qngd_step(&mut params, &qgrad, &metric, lr_q, config.qngd_regularizer)?;
                model.set_quantum_params(&params)?;
            }
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (val_probs, val_loss) = probs_and_loss(model, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "validation loss became {val_loss} in epoch {epoch}; aborting"
            )));
        }
        let scores: Vec<f64> = val_probs.iter().map(|p| p[1]).collect();
        let val_auc = roc_auc(&scores, &val_set.labels)?.auc;
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_auc,
            lr_classical: lr_c,
            lr_quantum: lr_q,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = (
                model.classical_params().to_vec(),
                model.quantum_params().to_vec(),
            );
            since_improve = 0;
            since_decay = 0;
        } else {
            since_improve += 1;
            since_decay += 1;
        }
        let decay_due = if config.periodic_decay {
            (epoch + 1) % config.decay_patience == 0
        } else {
            since_decay >= config.decay_patience
        };
        if decay_due {
            lr_c *= config.decay_factor;
            lr_q *= config.decay_factor;
            since_decay = 0;
        }
        if since_improve >= config.early_stop_patience {
            stopped_early = true;
            break;
        }
    }
    model.set_classical_params(&best_params.0)?;
    model.set_quantum_params(&best_params.1)?;
    Ok(TrainLog {
        records,
        best_epoch,
        best_val_loss: best_val,
        stopped_early,
    })
}

/// Loss and AUC of a model on a feature set. With `shots`, circuit
/// expectations are sampled; classical scores stay exact.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub loss: f64,
    pub auc: f64,
    pub n_events: usize,
    pub shots: Option<u64>,
}

pub fn evaluate(
    model: &Model,
    set: &FeatureSet,
    shots: Option<u64>,
    seed: u64,
) -> Result<EvalReport> {
    check_set(model, set, "evaluation")?;
    let probs: Vec<[f64; 2]> = match shots {
        None => model.batch_probabilities(&set.features)?,
        Some(n) => set
            .features
            .par_iter()
            .enumerate()
            .map(|(i, x)| model.predict_sampled(x, n, seed.wrapping_add(i as u64)))
            .collect::<Result<_>>()?,
    };
    let as_vecs: Vec<Vec<f64>> = probs.iter().map(|p| p.to_vec()).collect();
    let loss = cross_entropy(&as_vecs, &set.labels)?;
    let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
    let auc = roc_auc(&scores, &set.labels)?.auc;
    Ok(EvalReport {
        loss,
        auc,
        n_events: set.len(),
        shots,
    })
}
