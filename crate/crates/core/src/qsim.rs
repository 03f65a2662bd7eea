//! Statevector simulation for small qubit registers.
//!
//! Amplitudes are stored with qubit 0 as the most significant basis
//! bit: amplitude index `i` assigns qubit `w` the bit
//! `(i >> (n - 1 - w)) & 1`. The convention is fixed and recorded in
//! checkpoints so amplitudes stay bit-comparable.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 20;

type C = Complex64;

/// Pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<C>,
}

impl Statevector {
    /// The all-zeros computational basis state.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amps = vec![C::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = C::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes; the length must be a power of two and the
    /// norm must be 1 within 1e-10.
    pub fn from_amplitudes(amps: Vec<C>) -> Result<Self> {
        let n_qubits = amps.len().trailing_zeros() as usize;
        if amps.len() < 2 || !amps.len().is_power_of_two() || n_qubits > MAX_QUBITS {
            return Err(Error::Shape(format!(
                "amplitude count {} is not a supported power of two",
                amps.len()
            )));
        }
        let state = Self { n_qubits, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "state norm {norm} deviates from 1 beyond 1e-10"
            )));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product `<self|other>`.
    pub fn dot(&self, other: &Statevector) -> C {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn bit_pos(&self, wire: usize) -> usize {
        self.n_qubits - 1 - wire
    }

    pub(crate) fn apply_one_in_place(&mut self, g: &[[C; 2]; 2], wire: usize) {
        let s = 1usize << self.bit_pos(wire);
        for i in 0..self.amps.len() {
            if i & s == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | s];
                self.amps[i] = g[0][0] * a0 + g[0][1] * a1;
                self.amps[i | s] = g[1][0] * a0 + g[1][1] * a1;
            }
        }
    }

    pub(crate) fn apply_two_in_place(&mut self, g: &[[C; 4]; 4], wire_a: usize, wire_b: usize) {
        let sa = 1usize << self.bit_pos(wire_a);
        let sb = 1usize << self.bit_pos(wire_b);
        for i in 0..self.amps.len() {
            if i & sa == 0 && i & sb == 0 {
                let idx = [i, i | sb, i | sa, i | sa | sb];
                let old = idx.map(|k| self.amps[k]);
                for (x, &k) in idx.iter().enumerate() {
                    self.amps[k] = (0..4).map(|y| g[x][y] * old[y]).sum();
                }
            }
        }
    }
}

/// General single-qubit unitary
/// `[[cos(t/2), -e^{il} sin(t/2)], [e^{ip} sin(t/2), e^{i(l+p)} cos(t/2)]]`.
pub fn u3(theta: f64, phi: f64, lambda: f64) -> [[C; 2]; 2] {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    [
        [C::new(c, 0.0), -(C::new(0.0, lambda).exp()) * s],
        [
            C::new(0.0, phi).exp() * s,
            C::new(0.0, lambda + phi).exp() * c,
        ],
    ]
}

/// Rotation about y: `R_y(t) = u3(t, 0, 0)` (real matrix).
pub fn ry(theta: f64) -> [[C; 2]; 2] {
    u3(theta, 0.0, 0.0)
}

/// CNOT with the first wire as control.
pub fn cnot() -> [[C; 4]; 4] {
    let o = C::new(1.0, 0.0);
    let z = C::new(0.0, 0.0);
    [
        [o, z, z, z],
        [z, o, z, z],
        [z, z, z, o],
        [z, z, o, z],
    ]
}

/// A gate matrix for [`apply_gate`]: 2x2 on one wire or 4x4 on two.
#[derive(Debug, Clone, PartialEq)]
pub enum GateMatrix {
    One([[C; 2]; 2]),
    Two([[C; 4]; 4]),
}

/// Applies a gate on the given wires, returning the new state.
pub fn apply_gate(state: &Statevector, gate: &GateMatrix, wires: &[usize]) -> Result<Statevector> {
    for &w in wires {
        if w >= state.n_qubits() {
            return Err(Error::InvalidArgument(format!(
                "wire {w} out of range for {} qubits",
                state.n_qubits()
            )));
        }
    }
    let mut out = state.clone();
    match (gate, wires) {
        (GateMatrix::One(g), [w]) => out.apply_one_in_place(g, *w),
        (GateMatrix::Two(g), [a, b]) if a != b => out.apply_two_in_place(g, *a, *b),
        (GateMatrix::Two(_), [a, b]) if a == b => {
            return Err(Error::InvalidArgument(format!("repeated wire {a}")))
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "gate arity does not match {} wires",
                wires.len()
            )))
        }
    }
    Ok(out)
}

/// Product encoding `⊗_i R_y(x_i)|0>`, one angle per qubit.
pub fn encode_ry(angles: &[f64]) -> Result<Statevector> {
    let mut state = Statevector::zero(angles.len())?;
    for (w, &x) in angles.iter().enumerate() {
        state.apply_one_in_place(&ry(x), w);
    }
    Ok(state)
}

/// Expectation of sigma_z on one wire: sum of `(+-1)|amplitude|^2`.
pub fn expval_z(state: &Statevector, wire: usize) -> Result<f64> {
    if wire >= state.n_qubits() {
        return Err(Error::InvalidArgument(format!(
            "wire {wire} out of range for {} qubits",
            state.n_qubits()
        )));
    }
    let s = 1usize << state.bit_pos(wire);
    let mut e = 0.0;
    for (i, a) in state.amps.iter().enumerate() {
        let sign = if i & s == 0 { 1.0 } else { -1.0 };
        e += sign * a.norm_sqr();
    }
    Ok(e)
}

/// Born probability of the quantum classifier: `p = |<sigma_z>|^2`.
/// The two-class distribution is `[p, 1 - p]`.
pub fn born_probability_q(expval: f64) -> f64 {
    expval * expval
}

/// Estimates `<sigma_z>` on a wire from `n_shots` sampled outcomes,
/// each +1 with probability `(1 + <sigma_z>)/2`. Deterministic per
/// seed.
pub fn sample_shots(state: &Statevector, wire: usize, n_shots: u64, seed: u64) -> Result<f64> {
    if n_shots == 0 {
        return Err(Error::InvalidArgument("need at least one shot".into()));
    }
    let e = expval_z(state, wire)?;
    let p_up = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ups = 0u64;
    for _ in 0..n_shots {
        if rng.random::<f64>() < p_up {
            ups += 1;
        }
    }
    let n = n_shots as f64;
    Ok((2.0 * ups as f64 - n) / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn assert_c_eq(a: C, b: C, eps: f64) {
        assert_abs_diff_eq!(a.re, b.re, epsilon = eps);
        assert_abs_diff_eq!(a.im, b.im, epsilon = eps);
    }

    #[test]
    fn u3_special_values() {
        let id = u3(0.0, 0.0, 0.0);
        assert_c_eq(id[0][0], C::new(1.0, 0.0), 1e-15);
        assert_c_eq(id[0][1], C::new(0.0, 0.0), 1e-15);
        assert_c_eq(id[1][0], C::new(0.0, 0.0), 1e-15);
        assert_c_eq(id[1][1], C::new(1.0, 0.0), 1e-15);
        let x = u3(PI, 0.0, 0.0);
        assert_c_eq(x[0][0], C::new(0.0, 0.0), 1e-15);
        assert_c_eq(x[0][1], C::new(-1.0, 0.0), 1e-15);
        assert_c_eq(x[1][0], C::new(1.0, 0.0), 1e-15);
        assert_c_eq(x[1][1], C::new(0.0, 0.0), 1e-15);
        let h = u3(PI / 2.0, 0.0, 0.0);
        for (got, want) in [
            (h[0][0], FRAC_1_SQRT_2),
            (h[0][1], -FRAC_1_SQRT_2),
            (h[1][0], FRAC_1_SQRT_2),
            (h[1][1], FRAC_1_SQRT_2),
        ] {
            assert_c_eq(got, C::new(want, 0.0), 1e-15);
        }
    }

    #[test]
    fn u3_is_unitary() {
        let g = u3(1.234, -0.721, 2.5);
        // Columns orthonormal.
        for col in 0..2 {
            let n: f64 = (0..2).map(|r| g[r][col].norm_sqr()).sum();
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-14);
        }
        let dot: C = (0..2).map(|r| g[r][0].conj() * g[r][1]).sum();
        assert_c_eq(dot, C::new(0.0, 0.0), 1e-14);
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        // |10> -> |11>, qubit 0 most significant.
        let mut amps = vec![C::new(0.0, 0.0); 4];
        amps[2] = C::new(1.0, 0.0);
        let state = Statevector::from_amplitudes(amps).unwrap();
        let out = apply_gate(&state, &GateMatrix::Two(cnot()), &[0, 1]).unwrap();
        assert_c_eq(out.amplitudes()[3], C::new(1.0, 0.0), 1e-15);
        // |00> untouched.
        let zero = Statevector::zero(2).unwrap();
        let out = apply_gate(&zero, &GateMatrix::Two(cnot()), &[0, 1]).unwrap();
        assert_c_eq(out.amplitudes()[0], C::new(1.0, 0.0), 1e-15);
    }

    #[test]
    fn ry_rotates_zero_state() {
        let state = Statevector::zero(1).unwrap();
        let out = apply_gate(&state, &GateMatrix::One(ry(PI / 2.0)), &[0]).unwrap();
        assert_c_eq(out.amplitudes()[0], C::new(FRAC_1_SQRT_2, 0.0), 1e-15);
        assert_c_eq(out.amplitudes()[1], C::new(FRAC_1_SQRT_2, 0.0), 1e-15);
    }

    #[test]
    fn encode_ry_hand_cases() {
        let z = encode_ry(&[0.0, 0.0, 0.0]).unwrap();
        assert_c_eq(z.amplitudes()[0], C::new(1.0, 0.0), 1e-15);
        let one = encode_ry(&[PI]).unwrap();
        assert_c_eq(one.amplitudes()[0], C::new(0.0, 0.0), 1e-15);
        assert_c_eq(one.amplitudes()[1], C::new(1.0, 0.0), 1e-15);
        // Qubit 0 most significant: [pi/2, 0] spreads over |00>, |10>.
        let s = encode_ry(&[PI / 2.0, 0.0]).unwrap();
        let a = s.amplitudes();
        assert_c_eq(a[0], C::new(FRAC_1_SQRT_2, 0.0), 1e-15);
        assert_c_eq(a[1], C::new(0.0, 0.0), 1e-15);
        assert_c_eq(a[2], C::new(FRAC_1_SQRT_2, 0.0), 1e-15);
        assert_c_eq(a[3], C::new(0.0, 0.0), 1e-15);
    }

    #[test]
    fn gates_preserve_norm() {
        let mut state = encode_ry(&[0.3, 1.2, 2.2]).unwrap();
        for k in 0..10 {
            let g = u3(0.3 * k as f64, 0.11 * k as f64, -0.7);
            state.apply_one_in_place(&g, k % 3);
            state.apply_two_in_place(&cnot(), k % 3, (k + 1) % 3);
            assert_abs_diff_eq!(state.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn apply_gate_rejects_bad_wires() {
        let state = Statevector::zero(2).unwrap();
        assert!(apply_gate(&state, &GateMatrix::One(ry(0.1)), &[2]).is_err());
        assert!(apply_gate(&state, &GateMatrix::Two(cnot()), &[1, 1]).is_err());
        assert!(apply_gate(&state, &GateMatrix::Two(cnot()), &[0]).is_err());
    }

    #[test]
    fn from_amplitudes_validates() {
        assert!(Statevector::from_amplitudes(vec![C::new(1.0, 0.0); 3]).is_err());
        assert!(
            Statevector::from_amplitudes(vec![C::new(0.9, 0.0), C::new(0.0, 0.0)]).is_err()
        );
    }

    #[test]
    fn expval_z_hand_cases() {
        let zero = Statevector::zero(1).unwrap();
        assert_abs_diff_eq!(expval_z(&zero, 0).unwrap(), 1.0, epsilon = 1e-15);
        let one = encode_ry(&[PI]).unwrap();
        assert_abs_diff_eq!(expval_z(&one, 0).unwrap(), -1.0, epsilon = 1e-15);
        let plus = encode_ry(&[PI / 2.0]).unwrap();
        assert_abs_diff_eq!(expval_z(&plus, 0).unwrap(), 0.0, epsilon = 1e-15);
        // <sigma_z> = cos(theta) for R_y(theta)|0>.
        let t = 0.87;
        let s = encode_ry(&[t]).unwrap();
        assert_abs_diff_eq!(expval_z(&s, 0).unwrap(), t.cos(), epsilon = 1e-14);
    }

    #[test]
    fn born_probability_q_squares() {
        assert_eq!(born_probability_q(1.0), 1.0);
        assert_eq!(born_probability_q(0.0), 0.0);
        assert_eq!(born_probability_q(-1.0), 1.0);
    }

    #[test]
    fn shots_on_basis_state_are_exact() {
        let zero = Statevector::zero(2).unwrap();
        assert_eq!(sample_shots(&zero, 0, 100, 7).unwrap(), 1.0);
        let e1 = sample_shots(&encode_ry(&[PI / 2.0]).unwrap(), 0, 5000, 42).unwrap();
        let e2 = sample_shots(&encode_ry(&[PI / 2.0]).unwrap(), 0, 5000, 42).unwrap();
        assert_eq!(e1, e2);
        // Different seeds should not all collide.
        let estimates: Vec<f64> = (0..10)
            .map(|s| sample_shots(&encode_ry(&[PI / 2.0]).unwrap(), 0, 5000, s).unwrap())
            .collect();
        assert!(estimates.iter().any(|&e| e != estimates[0]));
    }

    #[test]
    fn shots_concentrate_around_expval() {
        let state = encode_ry(&[1.1]).unwrap();
        let exact = expval_z(&state, 0).unwrap();
        let mut close = 0;
        let trials = 200;
        for seed in 0..trials {
            let est = sample_shots(&state, 0, 5000, seed).unwrap();
            if (est - exact).abs() < 3.0 / (5000f64).sqrt() {
                close += 1;
            }
        }
        assert!(close >= trials * 98 / 100, "only {close}/{trials} close");
    }
}
