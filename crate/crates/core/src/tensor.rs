//! Dense tensors with named legs.
//!
//! A [`DenseTensor`] stores its entries contiguously in row-major order
//! together with one name per leg. Contraction is driven purely by leg
//! names: [`contract_pair`] sums over every leg the two operands share,
//! which lets network-level code wire tensors together without index
//! bookkeeping.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Entry types tensors can hold (`f64` for trainable networks,
/// `Complex64` for circuit amplitudes).
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + PartialEq
    + num_traits::Zero
    + num_traits::One
    + std::ops::Sub<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> f64 {
        x
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }
}

/// Dense tensor with named legs and row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    legs: Vec<String>,
    shape: Vec<usize>,
    entries: Vec<T>,
}

impl<T: Scalar> DenseTensor<T> {
    /// Builds a tensor from legs, shape and row-major entries.
    ///
    /// Legs must be pairwise distinct, every dimension at least 1, and
    /// `entries.len()` equal to the shape product.
    pub fn new(legs: Vec<String>, shape: Vec<usize>, entries: Vec<T>) -> Result<Self> {
        if legs.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} legs but {} dimensions",
                legs.len(),
                shape.len()
            )));
        }
        for (i, a) in legs.iter().enumerate() {
            if legs[i + 1..].contains(a) {
                return Err(Error::Shape(format!("duplicate leg {a:?}")));
            }
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("zero dimension in shape {shape:?}")));
        }
        let size: usize = shape.iter().product();
        if entries.len() != size {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {size} entries, got {}",
                entries.len()
            )));
        }
        Ok(Self { legs, shape, entries })
    }

    /// All-zero tensor with the given legs and shape.
    pub fn zeros(legs: Vec<String>, shape: Vec<usize>) -> Result<Self> {
        let size = shape.iter().product();
        Self::new(legs, shape, vec![T::zero(); size])
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar(value: T) -> Self {
        Self {
            legs: Vec::new(),
            shape: Vec::new(),
            entries: vec![value],
        }
    }

    pub fn legs(&self) -> &[String] {
        &self.legs
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.legs.len()
    }

    /// Number of entries.
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [T] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    /// Position of a leg in the leg list.
    pub fn leg_index(&self, leg: &str) -> Option<usize> {
        self.legs.iter().position(|l| l == leg)
    }

    /// Dimension of a named leg.
    pub fn leg_dim(&self, leg: &str) -> Option<usize> {
        self.leg_index(leg).map(|i| self.shape[i])
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut flat = 0;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[k]);
            flat = flat * self.shape[k] + i;
        }
        flat
    }

    /// Entry at a multi-index.
    pub fn get(&self, idx: &[usize]) -> T {
        self.entries[self.flat_index(idx)]
    }

    /// Overwrites the entry at a multi-index.
    pub fn set(&mut self, idx: &[usize], value: T) {
        let flat = self.flat_index(idx);
        self.entries[flat] = value;
    }

    /// Renames one leg; the new name must not collide with another leg.
    pub fn rename_leg(&mut self, from: &str, to: &str) -> Result<()> {
        if from == to {
            return Ok(());
        }
        if self.legs.iter().any(|l| l == to) {
            return Err(Error::Shape(format!("leg {to:?} already present")));
        }
        match self.leg_index(from) {
            Some(i) => {
                self.legs[i] = to.to_string();
                Ok(())
            }
            None => Err(Error::Shape(format!("no leg {from:?}"))),
        }
    }

    /// Returns a copy with legs reordered to `new_order`, which must be
    /// a permutation of the current legs.
    pub fn permute(&self, new_order: &[String]) -> Result<Self> {
        if new_order.len() != self.legs.len() {
            return Err(Error::Shape(format!(
                "permutation lists {} legs, tensor has {}",
                new_order.len(),
                self.legs.len()
            )));
        }
        let mut perm = Vec::with_capacity(new_order.len());
        for leg in new_order {
            match self.leg_index(leg) {
                Some(i) if !perm.contains(&i) => perm.push(i),
                Some(_) => return Err(Error::Shape(format!("leg {leg:?} repeated"))),
                None => return Err(Error::Shape(format!("no leg {leg:?}"))),
            }
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let rank = self.rank();
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let mut in_strides = vec![1usize; rank];
        for k in (0..rank.saturating_sub(1)).rev() {
            in_strides[k] = in_strides[k + 1] * self.shape[k + 1];
        }
        let mut out = vec![T::zero(); self.entries.len()];
        let mut idx = vec![0usize; rank];
        for slot in out.iter_mut() {
            let mut flat = 0;
            for (k, &i) in idx.iter().enumerate() {
                flat += i * in_strides[perm[k]];
            }
            *slot = self.entries[flat];
            for k in (0..rank).rev() {
                idx[k] += 1;
                if idx[k] < out_shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self {
            legs: new_order.to_vec(),
            shape: out_shape,
            entries: out,
        })
    }
}

/// Contracts two tensors over every leg they share.
///
/// Shared legs must agree in dimension. The result carries `a`'s free
/// legs followed by `b`'s free legs, in their original order; when the
/// operands share no leg this is the outer product, and when no free
/// leg remains the result has rank 0.
pub fn contract_pair<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let shared: Vec<String> = a
        .legs
        .iter()
        .filter(|l| b.legs.contains(l))
        .cloned()
        .collect();
    for leg in &shared {
        let da = a.leg_dim(leg).unwrap();
        let db = b.leg_dim(leg).unwrap();
        if da != db {
            return Err(Error::Shape(format!(
                "leg {leg:?} has dimension {da} on one side and {db} on the other"
            )));
        }
    }
    let a_free: Vec<String> = a.legs.iter().filter(|l| !shared.contains(l)).cloned().collect();
    let b_free: Vec<String> = b.legs.iter().filter(|l| !shared.contains(l)).cloned().collect();

    let mut a_order = a_free.clone();
    a_order.extend(shared.iter().cloned());
    let mut b_order = shared.clone();
    b_order.extend(b_free.iter().cloned());
    let ap = a.permute(&a_order)?;
    let bp = b.permute(&b_order)?;

    let k: usize = shared.iter().map(|l| a.leg_dim(l).unwrap()).product();
    let m = ap.size() / k;
    let n = bp.size() / k;
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &ap.entries[i * k..(i + 1) * k];
        for (kk, &av) in row.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let brow = &bp.entries[kk * n..(kk + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                let mut term = av;
                term = term * bv;
                *o += term;
            }
        }
    }

    let mut legs = a_free.clone();
    legs.extend(b_free.iter().cloned());
    let mut shape: Vec<usize> = a_free.iter().map(|l| a.leg_dim(l).unwrap()).collect();
    shape.extend(b_free.iter().map(|l| b.leg_dim(l).unwrap()));
    DenseTensor::new(legs, shape, out)
}

/// Initialization schemes for trainable tensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Independent N(0, sigma^2) entries; `sigma = 0` gives zeros.
    Gaussian { sigma: f64 },
    /// The tensor is matricized at the leg split making the matrix
    /// squarest (ties resolved toward fewer rows), ones are placed on
    /// the main diagonal, and N(0, sigma^2) noise is added everywhere.
    IdentityPlusNoise { sigma: f64 },
}

impl InitScheme {
    fn sigma(&self) -> f64 {
        match *self {
            InitScheme::Gaussian { sigma } => sigma,
            InitScheme::IdentityPlusNoise { sigma } => sigma,
        }
    }
}

/// Draws a fresh trainable tensor. Deterministic in `seed`.
pub fn random_init(
    legs: Vec<String>,
    shape: Vec<usize>,
    seed: u64,
    scheme: InitScheme,
) -> Result<DenseTensor<f64>> {
    let sigma = scheme.sigma();
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "init sigma must be finite and non-negative, got {sigma}"
        )));
    }
    let mut t = DenseTensor::<f64>::zeros(legs, shape)?;
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidArgument(format!("bad init width: {e}")))?;
        for v in t.entries_mut() {
            *v = normal.sample(&mut rng);
        }
    }
    if let InitScheme::IdentityPlusNoise { .. } = scheme {
        let (rows, cols) = squarest_split(t.shape());
        let diag = rows.min(cols);
        for i in 0..diag {
            t.entries_mut()[i * cols + i] += 1.0;
        }
    }
    Ok(t)
}

/// Splits a shape into (rows, cols) = (prod of the first `s` dims,
/// prod of the rest) at the `s` minimizing |rows - cols|; ties pick the
/// split with fewer rows.
fn squarest_split(shape: &[usize]) -> (usize, usize) {
    let total: usize = shape.iter().product();
    let mut best = (1usize, total);
    let mut rows = 1usize;
    for s in 0..=shape.len() {
        if s > 0 {
            rows *= shape[s - 1];
        }
        let cols = total / rows;
        let better = rows.abs_diff(cols) < best.0.abs_diff(best.1)
            || (rows.abs_diff(cols) == best.0.abs_diff(best.1) && rows < best.0);
        if better {
            best = (rows, cols);
        }
    }
    best
}
