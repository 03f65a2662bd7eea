//! Landscape and performance diagnostics: Fisher information and its
//! spectrum, effective dimension, entanglement entropy, ROC/AUC, and
//! background-rejection ratios.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::optim::PROB_FLOOR;

/// Input features are sampled uniformly from this range.
pub const FISHER_INPUT_RANGE: (f64, f64) = (0.0, PI);
/// Trainable parameters are sampled uniformly from this range.
pub const FISHER_PARAM_RANGE: (f64, f64) = (-PI, PI);

/// A classifier exposing its scalar Born probability and the gradient
/// of that probability in the trainable parameters, evaluated at an
/// externally supplied parameter vector.
pub trait BornModel {
    fn n_params(&self) -> usize;
    fn n_features(&self) -> usize;
    fn probability(&self, x: &[f64], theta: &[f64]) -> Result<f64>;
    /// Returns `(p, dp/dtheta)`.
    fn probability_grad(&self, x: &[f64], theta: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Mean Fisher matrix with its spectrum and the sampling setup that
/// produced it.
#[derive(Debug, Clone)]
pub struct FisherReport {
    pub d: usize,
    pub matrix: DMatrix<f64>,
    /// Ascending eigenvalues of `matrix`.
    pub eigenvalues: Vec<f64>,
    pub n_draws: usize,
    pub input_range: (f64, f64),
    pub param_range: (f64, f64),
    pub seed: u64,
    /// Draws whose probability hit the clamp floor.
    pub clamped: usize,
}

/// `(1/|X|) sum_x grad log p(x) grad log p(x)^T`. Probabilities below
/// the loss floor are clamped; the second return counts those events.
pub fn fisher_matrix(
    model: &(impl BornModel + ?Sized),
    inputs: &[Vec<f64>],
    theta: &[f64],
) -> Result<(DMatrix<f64>, usize)> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no inputs for Fisher matrix".into()));
    }
    let d = model.n_params();
    let mut fisher = DMatrix::zeros(d, d);
    let mut clamped = 0usize;
    for x in inputs {
        let (p, dp) = model.probability_grad(x, theta)?;
        if dp.len() != d {
            return Err(Error::Shape(format!(
                "model returned {} gradient entries for {d} parameters",
                dp.len()
            )));
        }
        if p < PROB_FLOOR {
            clamped += 1;
        }
        let denom = p.max(PROB_FLOOR);
        for i in 0..d {
            for j in 0..d {
                fisher[(i, j)] += dp[i] * dp[j] / (denom * denom);
            }
        }
    }
    fisher /= inputs.len() as f64;
    Ok((fisher, clamped))
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, range: (f64, f64)) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(range.0..=range.1)).collect()
}

/// Averages rank-1 Fisher contributions over `n_draws` independent
/// (input, parameter) pairs drawn uniformly from the module ranges.
pub fn mean_fisher_sampled(
    model: &(impl BornModel + Sync + ?Sized),
    n_draws: usize,
    seed: u64,
) -> Result<FisherReport> {
    if n_draws == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..n_draws)
        .map(|_| {
            (
                uniform_vec(&mut rng, model.n_features(), FISHER_INPUT_RANGE),
                uniform_vec(&mut rng, model.n_params(), FISHER_PARAM_RANGE),
            )
        })
        .collect();
    let per_draw: Vec<(DMatrix<f64>, usize)> = draws
        .par_iter()
        .map(|(x, theta)| fisher_matrix(model, std::slice::from_ref(x), theta))
        .collect::<Result<_>>()?;
    let d = model.n_params();
    let mut matrix = DMatrix::zeros(d, d);
    let mut clamped = 0usize;
    for (m, c) in &per_draw {
        matrix += m;
        clamped += c;
    }
    matrix /= n_draws as f64;
    let mut eigenvalues: Vec<f64> = matrix.symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(FisherReport {
        d,
        matrix,
        eigenvalues,
        n_draws,
        input_range: FISHER_INPUT_RANGE,
        param_range: FISHER_PARAM_RANGE,
        seed,
        clamped,
    })
}

/// One Fisher matrix per parameter draw, each averaged over its own
/// fresh batch of `n_inputs` sampled inputs. These are the raw
/// samples that [`normalize_fisher`] and [`effective_dimension`]
/// consume.
pub fn fisher_theta_samples(
    model: &(impl BornModel + Sync + ?Sized),
    n_param_draws: usize,
    n_inputs: usize,
    seed: u64,
) -> Result<Vec<DMatrix<f64>>> {
    if n_param_draws == 0 || n_inputs == 0 {
        return Err(Error::InvalidArgument(
            "need at least one parameter draw and one input".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..n_param_draws)
        .map(|_| {
            let theta = uniform_vec(&mut rng, model.n_params(), FISHER_PARAM_RANGE);
            let inputs = (0..n_inputs)
                .map(|_| uniform_vec(&mut rng, model.n_features(), FISHER_INPUT_RANGE))
                .collect();
            (inputs, theta)
        })
        .collect();
    draws
        .par_iter()
        .map(|(inputs, theta)| Ok(fisher_matrix(model, inputs, theta)?.0))
        .collect()
}

/// Rescales Fisher samples so their mean trace equals the parameter
/// count: `F_hat_k = d * F_k * M / sum_m tr F_m`.
pub fn normalize_fisher(samples: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("no Fisher samples".into()))?;
    let d = first.nrows();
    for s in samples {
        if s.nrows() != d || s.ncols() != d {
            return Err(Error::Shape(format!(
                "Fisher samples must all be {d}x{d}, found {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
    }
    let total_trace: f64 = samples.iter().map(|s| s.trace()).sum();
    if total_trace <= 0.0 || !total_trace.is_finite() {
        return Err(Error::DegenerateData(format!(
            "total Fisher trace {total_trace} is not positive"
        )));
    }
    let scale = d as f64 * samples.len() as f64 / total_trace;
    Ok(samples.iter().map(|s| s * scale).collect())
}

/// Effective dimension of a model from normalized Fisher samples at
/// sample size `n`:
/// `2 log( mean_k sqrt(det(I + kappa F_hat_k)) ) / (d log kappa)` with
/// `kappa = n / (2 pi log n)`, evaluated in the log domain.
pub fn effective_dimension(samples: &[DMatrix<f64>], n: f64, d: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no Fisher samples".into()));
    }
    if !(n > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sample size {n} must exceed 1"
        )));
    }
    let kappa = n / (2.0 * PI * n.ln());
    if kappa <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "kappa = {kappa} <= 1 (sample size {n} too small), log kappa is not positive"
        )));
    }
    // log of sqrt(det(I + kappa F)) per sample, via eigenvalues.
    let half_logdets: Vec<f64> = samples
        .iter()
        .map(|s| {
            if s.nrows() != d || s.ncols() != d {
                return Err(Error::Shape(format!(
                    "expected {d}x{d} Fisher samples, found {}x{}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            let lambdas = s.symmetric_eigenvalues();
            Ok(0.5
                * lambdas
                    .iter()
                    .map(|l| (1.0 + kappa * l.max(0.0)).ln())
                    .sum::<f64>())
        })
        .collect::<Result<_>>()?;
    let max = half_logdets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_mean = max
        + (half_logdets.iter().map(|s| (s - max).exp()).sum::<f64>()
            / half_logdets.len() as f64)
            .ln();
    Ok(2.0 * log_mean / (d as f64 * kappa.ln()))
}

/// Von Neumann entropy, in bits, of the reduced state of the first
/// `cut` factors of an `amps` vector shaped by `dims`.
pub fn entanglement_entropy(amps: &[Complex64], dims: &[usize], cut: usize) -> Result<f64> {
    let total = dims.iter().try_fold(1usize, |acc, &d| {
        if d == 0 {
            None
        } else {
            acc.checked_mul(d)
        }
    });
    let total = match total {
        Some(t) if t == amps.len() => t,
        _ => {
            return Err(Error::Shape(format!(
                "dims {dims:?} do not describe {} amplitudes",
                amps.len()
            )))
        }
    };
    if cut == 0 || cut >= dims.len() {
        return Err(Error::InvalidArgument(format!(
            "cut {cut} must split {} factors into two non-empty parts",
            dims.len()
        )));
    }
    let rows: usize = dims[..cut].iter().product();
    let cols = total / rows;
    if rows.min(cols) > 4096 {
        return Err(Error::InvalidArgument(format!(
            "reduced density matrix of side {} is too large",
            rows.min(cols)
        )));
    }
    let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if norm_sq < 1e-300 {
        return Err(Error::DegenerateData("state has zero norm".into()));
    }
    // Gram matrix on the smaller side; its nonzero spectrum equals the
    // reduced density matrix spectrum on either side.
    let gram = if rows <= cols {
        DMatrix::from_fn(rows, rows, |r, rp| {
            (0..cols)
                .map(|c| amps[r * cols + c] * amps[rp * cols + c].conj())
                .sum::<Complex64>()
                / norm_sq
        })
    } else {
        DMatrix::from_fn(cols, cols, |c, cp| {
            (0..rows)
                .map(|r| amps[r * cols + c] * amps[r * cols + cp].conj())
                .sum::<Complex64>()
                / norm_sq
        })
    };
    let lambdas = gram.symmetric_eigenvalues();
    Ok(lambdas
        .iter()
        .filter(|&&l| l > 1e-14)
        .map(|&l| -l * l.log2())
        .sum())
}

/// [`entanglement_entropy`] for real amplitude vectors.
pub fn entanglement_entropy_real(amps: &[f64], dims: &[usize], cut: usize) -> Result<f64> {
    let complex: Vec<Complex64> = amps.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    entanglement_entropy(&complex, dims, cut)
}

/// ROC curve points (including the (0,0) start) and the trapezoid
/// area under them. Label 1 is signal; higher scores mean more
/// signal-like.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

/// Sweeps thresholds over the unique scores in descending order,
/// grouping ties, and integrates TPR over FPR.
pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<RocCurve> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.iter().filter(|&&l| l == 0).count();
    if positives + negatives != labels.len() {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateData(
            "ROC needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut fpr = vec![0.0];
    let mut tpr = vec![0.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        // Consume the whole tie group before emitting a point.
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            match labels[order[i]] {
                1 => tp += 1,
                _ => fp += 1,
            }
            i += 1;
        }
        fpr.push(fp as f64 / negatives as f64);
        tpr.push(tp as f64 / positives as f64);
    }
    let auc = (1..fpr.len())
        .map(|k| (fpr[k] - fpr[k - 1]) * (tpr[k] + tpr[k - 1]) / 2.0)
        .sum();
    Ok(RocCurve { fpr, tpr, auc })
}

/// A background-rejection comparison point: classical FPR over
/// quantum FPR at one signal efficiency. `None` marks a grid point
/// dropped because the quantum FPR vanished there.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioPoint {
    pub signal_efficiency: f64,
    pub ratio: Option<f64>,
}

fn interpolate_fpr(curve: &RocCurve, eps: f64) -> f64 {
    // First point at or above the requested TPR; ties resolved toward
    // the smallest FPR reaching it.
    let i = curve.tpr.partition_point(|&t| t < eps);
    if i == 0 {
        return curve.fpr[0];
    }
    if i == curve.tpr.len() {
        return *curve.fpr.last().unwrap();
    }
    if curve.tpr[i] == eps {
        return curve.fpr[i];
    }
    let (t0, t1) = (curve.tpr[i - 1], curve.tpr[i]);
    let (f0, f1) = (curve.fpr[i - 1], curve.fpr[i]);
    f0 + (f1 - f0) * (eps - t0) / (t1 - t0)
}

/// Ratio of interpolated classical to quantum false-positive rates on
/// a signal-efficiency grid; values above 1 mean the quantum model
/// rejects more background.
pub fn fpr_ratio(
    classical: &RocCurve,
    quantum: &RocCurve,
    grid: &[f64],
) -> Result<Vec<RatioPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty efficiency grid".into()));
    }
    grid.iter()
        .map(|&eps| {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::InvalidArgument(format!(
                    "signal efficiency {eps} outside [0, 1]"
                )));
            }
            let fc = interpolate_fpr(classical, eps);
            let fq = interpolate_fpr(quantum, eps);
            Ok(RatioPoint {
                signal_efficiency: eps,
                ratio: if fq > 0.0 { Some(fc / fq) } else { None },
            })
        })
        .collect()
}
