//! Loss and parameter-update rules: cross-entropy, Adam, and
//! metric-preconditioned (natural) gradient steps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Floor applied to probabilities inside the loss so that events the
/// model assigns probability zero keep the loss finite.
pub const PROB_FLOOR: f64 = 1e-12;

fn check_batch(probs: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} probability vectors for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    for (k, (p, &y)) in probs.iter().zip(labels).enumerate() {
        if y >= p.len() {
            return Err(Error::InvalidArgument(format!(
                "event {k}: label {y} out of range for {} classes",
                p.len()
            )));
        }
    }
    Ok(())
}

/// Mean categorical cross-entropy `-(1/N) sum log p[y]` with the
/// probability of the true class clamped to `[PROB_FLOOR, 1]`.
pub fn cross_entropy(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    check_batch(probs, labels)?;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| -p[y].clamp(PROB_FLOOR, 1.0).ln())
        .sum();
    Ok(total / probs.len() as f64)
}

/// Gradient of [`cross_entropy`] in the probabilities: for each event
/// the true-class entry gets `-1 / (N max(p, floor))`, others zero.
pub fn cross_entropy_grad(probs: &[Vec<f64>], labels: &[usize]) -> Result<Vec<Vec<f64>>> {
    check_batch(probs, labels)?;
    let n = probs.len() as f64;
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            let mut g = vec![0.0; p.len()];
            g[y] = -1.0 / (n * p[y].max(PROB_FLOOR));
            g
        })
        .collect())
}

/// First/second moment accumulators for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grad: &[f64],
    lr: f64,
) -> Result<()> {
    if params.len() != state.dim() || grad.len() != state.dim() {
        return Err(Error::Shape(format!(
            "Adam state over {} parameters got {} params / {} gradients",
            state.dim(),
            params.len(),
            grad.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grad[i];
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

/// Natural-gradient update: solves `(M + reg I) lambda = grad` and
/// steps `params -= lr * lambda`. Tries Cholesky first (M is expected
/// symmetric PSD), falling back to LU; if both fail the error carries
/// a condition estimate of the regularized matrix.
pub fn qngd_step(
    params: &mut [f64],
    grad: &[f64],
    metric: &DMatrix<f64>,
    lr: f64,
    reg: f64,
) -> Result<()> {
    let d = params.len();
    if grad.len() != d || metric.nrows() != d || metric.ncols() != d {
        return Err(Error::Shape(format!(
            "natural-gradient step over {d} parameters got {} gradients and a {}x{} metric",
            grad.len(),
            metric.nrows(),
            metric.ncols()
        )));
    }
    let mut a = metric.clone();
    for i in 0..d {
        a[(i, i)] += reg;
    }
    let g = DVector::from_column_slice(grad);
    let solution = nalgebra::Cholesky::new(a.clone())
        .map(|ch| ch.solve(&g))
        .or_else(|| a.clone().lu().solve(&g));
    let lambda = solution.ok_or_else(|| {
        let eig = a.symmetric_eigenvalues();
        let max = eig.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
        let min = eig.iter().fold(f64::INFINITY, |acc, e| acc.min(e.abs()));
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        Error::Numerical(format!(
            "metric solve failed even with regularizer {reg:e}; condition estimate {cond:.3e}"
        ))
    })?;
    for i in 0..d {
        params[i] -= lr * lambda[i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cross_entropy_hand_values() {
        assert_abs_diff_eq!(
            cross_entropy(&[vec![1.0, 0.0]], &[0]).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            cross_entropy(&[vec![0.5, 0.5]], &[0]).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        // Mean over a batch of two identical events equals one event.
        let one = cross_entropy(&[vec![0.3, 0.7]], &[1]).unwrap();
        let two = cross_entropy(&[vec![0.3, 0.7], vec![0.3, 0.7]], &[1, 1]).unwrap();
        assert_abs_diff_eq!(one, two, epsilon = 1e-15);
        // Zero probability hits the floor rather than infinity.
        let clamped = cross_entropy(&[vec![0.0, 1.0]], &[0]).unwrap();
        assert_abs_diff_eq!(clamped, -PROB_FLOOR.ln(), epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_is_nonnegative_and_zero_iff_onehot() {
        let exact = cross_entropy(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0, 1]).unwrap();
        assert_eq!(exact, 0.0);
        let off = cross_entropy(&[vec![0.999, 0.001]], &[0]).unwrap();
        assert!(off > 0.0);
    }

    #[test]
    fn cross_entropy_validates() {
        assert!(cross_entropy(&[], &[]).is_err());
        assert!(cross_entropy(&[vec![1.0, 0.0]], &[0, 1]).is_err());
        assert!(cross_entropy(&[vec![1.0, 0.0]], &[2]).is_err());
    }

    #[test]
    fn cross_entropy_grad_matches_finite_differences() {
        let probs = vec![vec![0.3, 0.7], vec![0.6, 0.4]];
        let labels = vec![1, 0];
        let grad = cross_entropy_grad(&probs, &labels).unwrap();
        let h = 1e-7;
        for e in 0..2 {
            for c in 0..2 {
                let mut plus = probs.clone();
                plus[e][c] += h;
                let mut minus = probs.clone();
                minus[e][c] -= h;
                let fd = (cross_entropy(&plus, &labels).unwrap()
                    - cross_entropy(&minus, &labels).unwrap())
                    / (2.0 * h);
                assert_abs_diff_eq!(grad[e][c], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters() {
        let mut st = AdamState::new(3);
        let mut p = [1.0, -2.0, 0.5];
        adam_step(&mut st, &mut p, &[0.0; 3], 0.1).unwrap();
        assert_eq!(p, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let mut st = AdamState::new(2);
        let mut p = [0.0, 0.0];
        adam_step(&mut st, &mut p, &[0.3, -700.0], 0.01).unwrap();
        // Bias correction makes the first step lr * sign(g) up to eps.
        assert_abs_diff_eq!(p[0], -0.01, epsilon = 1e-6);
        assert_abs_diff_eq!(p[1], 0.01, epsilon = 1e-6);
    }

    #[test]
    fn adam_treats_equal_gradients_equally() {
        let mut st = AdamState::new(2);
        let mut p = [0.5, 0.5];
        for _ in 0..10 {
            adam_step(&mut st, &mut p, &[0.7, 0.7], 0.05).unwrap();
            assert_eq!(p[0], p[1]);
        }
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut st = AdamState::new(2);
        let mut p = [3.0, -2.0];
        for _ in 0..2000 {
            let g = [2.0 * p[0], 2.0 * p[1]];
            adam_step(&mut st, &mut p, &g, 0.01).unwrap();
        }
        assert!(p[0].abs() < 1e-3 && p[1].abs() < 1e-3, "ended at {p:?}");
    }

    #[test]
    fn adam_rejects_dimension_mismatch() {
        let mut st = AdamState::new(2);
        let mut p = [0.0];
        assert!(adam_step(&mut st, &mut p, &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn qngd_identity_metric_is_plain_descent() {
        let metric = DMatrix::identity(2, 2);
        let mut p = [1.0, 2.0];
        let grad = [0.5, -0.25];
        qngd_step(&mut p, &grad, &metric, 0.1, 1e-6).unwrap();
        // Regularized solve deviates from plain descent by at most reg*|G|.
        assert_abs_diff_eq!(p[0], 1.0 - 0.1 * 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(p[1], 2.0 + 0.1 * 0.25, epsilon = 1e-6);
    }

    #[test]
    fn qngd_diagonal_metric_hand_case() {
        // M = diag(4,1), G = (4,1): lambda = (1,1), a uniform step.
        let metric = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0]));
        let mut p = [0.0, 0.0];
        qngd_step(&mut p, &[4.0, 1.0], &metric, 0.3, 0.0).unwrap();
        assert_abs_diff_eq!(p[0], -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], -0.3, epsilon = 1e-12);
    }

    #[test]
    fn qngd_zero_gradient_leaves_parameters() {
        let metric = DMatrix::identity(3, 3);
        let mut p = [0.4, 0.5, 0.6];
        qngd_step(&mut p, &[0.0; 3], &metric, 0.1, 1e-6).unwrap();
        assert_eq!(p, [0.4, 0.5, 0.6]);
    }

    #[test]
    fn qngd_reports_condition_on_singular_metric() {
        let metric = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let mut p = [0.0, 0.0];
        let err = qngd_step(&mut p, &[1.0, 0.0], &metric, 0.1, 0.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("condition"), "message was: {msg}");
    }
}
