//! Ideal quantum Fourier transform and its Coppersmith gate decomposition.
//!
//! Qubit indices here count from the least significant bit of the basis
//! label: qubit `q` of an `n`-qubit register is spin `n − 1 − q` in the
//! spin-ordered modules. The lead bit `n − 1` is spin 0.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{c, embed, Operator};

pub const MAX_QFT_QUBITS: usize = 10;

/// Amplitudes `f(x)` over basis labels `x ∈ [0, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let q = amplitudes.len();
        if q < 2 || !q.is_power_of_two() {
            return Err(Error::InvalidDimension(q));
        }
        Ok(Self { amplitudes })
    }

    pub fn basis(q: usize, x: usize) -> Result<Self> {
        let mut a = vec![c(0.0); q];
        if x >= q {
            return Err(Error::InvalidDimension(q));
        }
        a[x] = c(1.0);
        Self::new(a)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < 1e-10
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&self, u: &Operator) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.dim(),
            });
        }
        let out = (0..self.dim())
            .map(|r| {
                (0..self.dim())
                    .map(|k| u.get(r, k) * self.amplitudes[k])
                    .sum()
            })
            .collect();
        Ok(Self { amplitudes: out })
    }
}

/// `e^{2πi·k/q}`, exact at quarter turns.
fn root_of_unity(k: usize, q: usize) -> Complex64 {
    if (4 * k).is_multiple_of(q) {
        const QUARTERS: [Complex64; 4] = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        return QUARTERS[4 * k / q % 4];
    }
    Complex64::from_polar(1.0, 2.0 * PI * k as f64 / q as f64)
}

/// Unitary with entry `(p, x) = e^{2πi·x·p/q}/√q`, `q = 2^n`.
pub fn ideal_qft(n: usize) -> Result<Operator> {
    if n == 0 || n > MAX_QFT_QUBITS {
        return Err(Error::UnsupportedQubitCount(n));
    }
    let q = 1usize << n;
    let norm = 1.0 / (q as f64).sqrt();
    let entries: Vec<Complex64> = (0..q)
        .flat_map(|p| (0..q).map(move |x| (p, x)))
        .map(|(p, x)| root_of_unity((x * p) % q, q) * norm)
        .collect();
    Operator::from_row_major(q, &entries)
}

/// Direct summation `f̃(p) = (1/√q) Σ_x e^{2πi·x·p/q} f(x)`.
pub fn apply_qft(state: &StateVector) -> StateVector {
    let q = state.dim();
    let norm = 1.0 / (q as f64).sqrt();
    let amplitudes = (0..q)
        .map(|p| {
            let sum: Complex64 = state
                .amplitudes
                .iter()
                .enumerate()
                .map(|(x, f)| root_of_unity((x * p) % q, q) * f)
                .sum();
            sum * norm
        })
        .collect();
    StateVector { amplitudes }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Gate {
    /// Hadamard on qubit `j`.
    A { j: usize },
    /// Controlled phase `e^{iθ}` on `|1⟩_j|1⟩_k`.
    B { j: usize, k: usize, theta: f64 },
}

impl Gate {
    /// B gate with the QFT phase `θ_jk = π/2^{k−j}`.
    pub fn b(j: usize, k: usize) -> Result<Self> {
        if j >= k {
            return Err(Error::InvalidGate(format!(
                "B gate needs j < k, got j={j}, k={k}"
            )));
        }
        Ok(Gate::B {
            j,
            k,
            theta: PI / (1u64 << (k - j)) as f64,
        })
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::A { j } => vec![j],
            Gate::B { j, k, .. } => vec![j, k],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSequence {
    pub n: usize,
    /// Chronological order.
    pub gates: Vec<Gate>,
}

impl GateSequence {
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            if let Some(&bad) = g.qubits().iter().find(|&&q| q >= n) {
                return Err(Error::InvalidGate(format!(
                    "qubit {bad} out of range for n={n}"
                )));
            }
        }
        Ok(Self { n, gates })
    }

    /// Product of the gate matrices, later gates on the left.
    pub fn unitary(&self) -> Result<Operator> {
        let mut u = Operator::identity(1 << self.n);
        for g in &self.gates {
            u = &gate_matrix(g, self.n)? * &u;
        }
        Ok(u)
    }

    pub fn count_a(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::A { .. }))
            .count()
    }

    pub fn count_b(&self) -> usize {
        self.gates.len() - self.count_a()
    }
}

/// Full `2^n` matrix of a gate.
pub fn gate_matrix(g: &Gate, n: usize) -> Result<Operator> {
    match *g {
        Gate::A { j } => {
            if j >= n {
                return Err(Error::InvalidGate(format!("A_{j} out of range for n={n}")));
            }
            Ok(embed(&Operator::hadamard(), n - 1 - j, n))
        }
        Gate::B { j, k, theta } => {
            if j >= n || k >= n || j == k {
                return Err(Error::InvalidGate(format!(
                    "B_{{{j},{k}}} invalid for n={n}"
                )));
            }
            let phase = Complex64::from_polar(1.0, theta);
            let diag: Vec<Complex64> = (0..1usize << n)
                .map(|b| {
                    if (b >> j) & 1 == 1 && (b >> k) & 1 == 1 {
                        phase
                    } else {
                        c(1.0)
                    }
                })
                .collect();
            Operator::from_diagonal(&diag)
        }
    }
}

/// Coppersmith gate list in chronological order.
///
/// For the lead bit `j = n − 1` down to 0: the B gates `B_{j,k}` for every
/// `k > j` (all diagonal, so their relative order is immaterial), then
/// `A_j`. The B gates must precede `A_j`; the composed unitary is then
/// `P_rev · QFT`.
pub fn coppersmith_sequence(n: usize) -> Result<GateSequence> {
    if n == 0 || n > MAX_QFT_QUBITS {
        return Err(Error::UnsupportedQubitCount(n));
    }
    let mut gates = Vec::with_capacity(n * (n + 1) / 2);
    for j in (0..n).rev() {
        for k in j + 1..n {
            gates.push(Gate::b(j, k)?);
        }
        gates.push(Gate::A { j });
    }
    GateSequence::new(n, gates)
}

pub(crate) fn reverse_bits(b: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, i| acc | (((b >> i) & 1) << (n - 1 - i)))
}

/// Permutation taking basis label `b_{n−1}…b_0` to `b_0…b_{n−1}`.
pub fn bit_reversal(n: usize) -> Result<Operator> {
    if n == 0 || n > MAX_QFT_QUBITS {
        return Err(Error::UnsupportedQubitCount(n));
    }
    let q = 1usize << n;
    let mut p = Operator::zeros(q);
    for b in 0..q {
        p.set(reverse_bits(b, n), b, c(1.0));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::I;

    #[test]
    fn qft_one_qubit_is_hadamard() {
        assert!(ideal_qft(1).unwrap().max_abs_diff(&Operator::hadamard()) < 1e-15);
    }

    #[test]
    fn qft_two_qubits_matches_published_matrix() {
        let h = c(0.5);
        let rows = vec![
            vec![h, h, h, h],
            vec![h, h * I, -h, -h * I],
            vec![h, -h, h, -h],
            vec![h, -h * I, -h, h * I],
        ];
        let want = Operator::from_rows(&rows).unwrap();
        assert!(ideal_qft(2).unwrap().max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn qft_range_errors() {
        assert!(ideal_qft(0).is_err());
        assert!(ideal_qft(11).is_err());
        assert!(ideal_qft(10).is_ok());
    }

    #[test]
    fn qft_zero_column_uniform() {
        let u = ideal_qft(3).unwrap();
        for p in 0..8 {
            assert!((u.get(p, 0) - c(1.0 / 8f64.sqrt())).norm() < 1e-15);
        }
    }

    #[test]
    fn apply_qft_basis_states() {
        let out = apply_qft(&StateVector::basis(4, 0).unwrap());
        for a in out.amplitudes() {
            assert!((a - c(0.5)).norm() < 1e-15);
        }
        let out = apply_qft(&StateVector::basis(4, 1).unwrap());
        let want = [c(0.5), I * 0.5, c(-0.5), -I * 0.5];
        for (a, w) in out.amplitudes().iter().zip(want) {
            assert!((a - w).norm() < 1e-15);
        }
    }

    #[test]
    fn apply_qft_period_two() {
        let mut amp = vec![c(0.0); 8];
        for x in [0, 2, 4, 6] {
            amp[x] = c(0.5);
        }
        let out = apply_qft(&StateVector::new(amp).unwrap());
        // brute-force DFT oracle over all eight outcomes
        for p in 0..8 {
            let mut s = c(0.0);
            for x in [0usize, 2, 4, 6] {
                s += Complex64::from_polar(0.5, 2.0 * PI * (x * p) as f64 / 8.0);
            }
            let oracle = (s / 8f64.sqrt()).norm_sqr();
            assert!((out.probabilities()[p] - oracle).abs() < 1e-12);
        }
        let probs = out.probabilities();
        assert!((probs[0] - 0.5).abs() < 1e-12 && (probs[4] - 0.5).abs() < 1e-12);
        assert!(probs
            .iter()
            .enumerate()
            .all(|(p, v)| p == 0 || p == 4 || v.abs() < 1e-12));
    }

    #[test]
    fn state_vector_rejects_bad_dimension() {
        assert!(StateVector::new(vec![c(1.0); 3]).is_err());
    }

    #[test]
    fn gate_matrix_cases() {
        assert!(
            gate_matrix(&Gate::A { j: 0 }, 1)
                .unwrap()
                .max_abs_diff(&Operator::hadamard())
                < 1e-15
        );
        let b0 = gate_matrix(
            &Gate::B {
                j: 0,
                k: 1,
                theta: 0.0,
            },
            2,
        )
        .unwrap();
        assert!(b0.max_abs_diff(&Operator::identity(4)) < 1e-15);
        let b = gate_matrix(&Gate::b(0, 1).unwrap(), 2).unwrap();
        let want = Operator::from_diagonal(&[c(1.0), c(1.0), c(1.0), I]).unwrap();
        assert!(b.max_abs_diff(&want) < 1e-15);
        assert!(Gate::b(1, 1).is_err());
        assert!(gate_matrix(&Gate::A { j: 2 }, 2).is_err());
    }

    #[test]
    fn coppersmith_counts() {
        for n in 1..=6 {
            let seq = coppersmith_sequence(n).unwrap();
            assert_eq!(seq.count_a(), n);
            assert_eq!(seq.count_b(), n * (n - 1) / 2);
        }
        assert_eq!(coppersmith_sequence(3).unwrap().gates.len(), 6);
        assert_eq!(
            coppersmith_sequence(1).unwrap().gates,
            vec![Gate::A { j: 0 }]
        );
    }

    #[test]
    fn coppersmith_two_qubits_with_swap() {
        let u = coppersmith_sequence(2).unwrap().unitary().unwrap();
        let swapped = &bit_reversal(2).unwrap() * &u;
        assert!(swapped.phase_aligned_diff(&ideal_qft(2).unwrap()) < 1e-10);
    }

    #[test]
    fn bit_reversal_cases() {
        assert!(
            bit_reversal(1)
                .unwrap()
                .max_abs_diff(&Operator::identity(2))
                < 1e-15
        );
        let s = bit_reversal(2).unwrap();
        assert_eq!(s.get(2, 1), c(1.0));
        assert_eq!(s.get(1, 2), c(1.0));
        assert_eq!(s.get(0, 0), c(1.0));
        assert_eq!(s.get(3, 3), c(1.0));
        let p = bit_reversal(3).unwrap();
        assert!((&p * &p).max_abs_diff(&Operator::identity(8)) < 1e-15);
    }
}
