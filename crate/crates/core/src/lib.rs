//! Tensor-network classifiers and tensor-network-inspired quantum circuits.
//!
//! The crate implements two families of binary classifiers for small
//! image-like inputs and the machinery to train and compare them:
//!
//! * classical tensor networks (matrix product states, tree tensor
//!   networks, MERA) contracted as Born machines over locally encoded
//!   pixel features, plus hybrid variants that feed a classical front
//!   end into a small quantum circuit;
//! * variational quantum circuits whose entangling layout mirrors the
//!   same networks (Q-MPS, Q-TTN, Q-MERA), simulated exactly as
//!   statevectors.
//!
//! Module map:
//!
//! * [`tensor`] / [`network`]: dense tensors with named legs, tensor
//!   network specifications, contraction and contraction adjoints.
//! * [`encode`]: image standardization, cropping/downsampling, pixel
//!   selection and the hypersphere feature map.
//! * [`ctn`]: classical tensor-network model builders and Born-rule
//!   evaluation.
//! * [`qsim`] / [`circuit`]: statevector simulation, circuit builders,
//!   parameter-shift gradients and the Fubini-Study metric.
//! * [`optim`] / [`train`]: loss, Adam, quantum natural gradient
//!   descent and the training loop.
//! * [`diag`]: Fisher information, effective dimension, entanglement
//!   entropy, ROC curves.
//! * [`data`]: dataset container and binary format, synthetic event
//!   generation, splits and checkpoints.

pub mod circuit;
pub mod ctn;
pub mod data;
pub mod diag;
pub mod encode;
pub mod error;
pub mod network;
pub mod optim;
pub mod qsim;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
