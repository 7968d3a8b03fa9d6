//! Full deviation-matrix readout from single-spin transverse observables.
//!
//! Each readout setting applies one of {nothing, (π/2)_x, (π/2)_y} to every
//! spin, giving `3^n` settings. After a setting, the spectrum of spin `i`
//! resolves its multiplet lines by the z-states of the other spins, which is
//! equivalent to measuring `I_x^i·Π_{k∈S} 2I_z^k` and `I_y^i·Π_{k∈S} 2I_z^k`
//! for every subset `S` of the other spins: `n·2^n` real values per setting.
//! The deviation matrix is expanded in the `4^n − 1` non-identity Pauli
//! products and recovered by least squares.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nmr::SpinSystem;
use crate::operator::{kron, spin_operator, Axis, DeviationMatrix, Operator};
use crate::pulse::{program_unitary, PulseProgram};

pub const MAX_TOMOGRAPHY_SPINS: usize = 4;

/// Singular values below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutRotation {
    Identity,
    X90,
    Y90,
}

/// `I_axis^spin · Π_{k ∈ z_spins} 2 I_z^k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observable {
    pub spin: usize,
    pub axis: Axis,
    pub z_spins: Vec<usize>,
}

impl Observable {
    pub fn operator(&self, n: usize) -> Result<Operator> {
        let mut op = spin_operator(self.axis, self.spin, n)?;
        for &k in &self.z_spins {
            op = &op * &spin_operator(Axis::Z, k, n)?.scale_re(2.0);
        }
        Ok(op)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_TOMOGRAPHY_SPINS {
        return Err(Error::UnsupportedQubitCount(n));
    }
    Ok(())
}

/// All `3^n` per-spin rotation choices, spin 0 varying slowest.
pub fn readout_rotations(n: usize) -> Result<Vec<Vec<ReadoutRotation>>> {
    check_n(n)?;
    const CHOICES: [ReadoutRotation; 3] = [
        ReadoutRotation::Identity,
        ReadoutRotation::X90,
        ReadoutRotation::Y90,
    ];
    Ok((0..3usize.pow(n as u32))
        .map(|mut idx| {
            let mut v = vec![ReadoutRotation::Identity; n];
            for slot in v.iter_mut().rev() {
                *slot = CHOICES[idx % 3];
                idx /= 3;
            }
            v
        })
        .collect())
}

/// Readout programs, one per setting of [`readout_rotations`]. Spins sharing
/// a rotation are pulsed together.
pub fn tomography_readout_set(n: usize) -> Result<Vec<PulseProgram>> {
    Ok(readout_rotations(n)?
        .into_iter()
        .map(|setting| {
            let mut p = PulseProgram::new(n);
            for (rot, phase) in [
                (ReadoutRotation::X90, 0.0),
                (ReadoutRotation::Y90, FRAC_PI_2),
            ] {
                let targets: Vec<usize> = (0..n).filter(|&i| setting[i] == rot).collect();
                if !targets.is_empty() {
                    p.pulse(&targets, FRAC_PI_2, phase);
                }
            }
            p
        })
        .collect())
}

/// Observables recorded after every setting, in a fixed order.
pub fn readout_observables(n: usize) -> Vec<Observable> {
    let mut out = Vec::new();
    for spin in 0..n {
        let others: Vec<usize> = (0..n).filter(|&k| k != spin).collect();
        for mask in 0..1usize << others.len() {
            let z_spins: Vec<usize> = others
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, &k)| k)
                .collect();
            for axis in [Axis::X, Axis::Y] {
                out.push(Observable {
                    spin,
                    axis,
                    z_spins: z_spins.clone(),
                });
            }
        }
    }
    out
}

/// Non-identity Pauli products `σ_{p_0} ⊗ … ⊗ σ_{p_{n−1}}`, with digit `0`
/// meaning identity and `1, 2, 3` meaning x, y, z.
fn pauli_basis(n: usize) -> Vec<Operator> {
    let single = [
        Operator::identity(2),
        Operator::pauli(Axis::X),
        Operator::pauli(Axis::Y),
        Operator::pauli(Axis::Z),
    ];
    (1..4usize.pow(n as u32))
        .map(|mut idx| {
            let mut digits = vec![0; n];
            for d in digits.iter_mut().rev() {
                *d = idx % 4;
                idx /= 4;
            }
            digits[1..]
                .iter()
                .fold(single[digits[0]].clone(), |acc, &d| kron(&acc, &single[d]))
        })
        .collect()
}

fn pulse_only_system(n: usize) -> SpinSystem {
    SpinSystem::ideal(vec![0.0; n], vec![vec![0.0; n]; n]).expect("valid trivial system")
}

/// Linear readout map for `n` spins, with a precomputed pseudo-inverse.
#[derive(Debug, Clone)]
pub struct Tomography {
    n: usize,
    settings: Vec<Operator>,
    observables: Vec<Operator>,
    basis: Vec<Operator>,
    map: DMatrix<f64>,
    rank: usize,
    inverse: DMatrix<f64>,
}

impl Tomography {
    pub fn new(n: usize) -> Result<Self> {
        let programs = tomography_readout_set(n)?;
        let sys = pulse_only_system(n);
        let settings = programs
            .iter()
            .map(|p| program_unitary(p, &sys))
            .collect::<Result<Vec<_>>>()?;
        let observables = readout_observables(n)
            .iter()
            .map(|o| o.operator(n))
            .collect::<Result<Vec<_>>>()?;
        let basis = pauli_basis(n);
        let scale = 1.0 / (1usize << n) as f64;
        let rows = settings.len() * observables.len();
        let mut map = DMatrix::zeros(rows, basis.len());
        for (s, u) in settings.iter().enumerate() {
            for (o, obs) in observables.iter().enumerate() {
                // Tr(U ρ U† O) = Tr(ρ · U† O U)
                let heis = obs.conjugate_by(&u.adjoint());
                for (b, p) in basis.iter().enumerate() {
                    map[(s * observables.len() + o, b)] = heis.trace_product(p).re * scale;
                }
            }
        }
        let svd = map.clone().svd(true, true);
        let largest = svd.singular_values.max();
        let eps = RANK_TOLERANCE * largest;
        let rank = svd.rank(eps);
        let inverse = svd
            .pseudo_inverse(eps)
            .map_err(|e| Error::InvalidSystem(e.to_string()))?;
        Ok(Self {
            n,
            settings,
            observables,
            basis,
            map,
            rank,
            inverse,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Numerical rank of the readout map; complete when `4^n − 1`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn unknowns(&self) -> usize {
        self.basis.len()
    }

    pub fn map(&self) -> &DMatrix<f64> {
        &self.map
    }

    /// Noiseless expectation values, indexed `[setting][observable]`.
    pub fn measure(&self, rho: &DeviationMatrix) -> Result<Vec<Vec<f64>>> {
        if rho.dim() != 1 << self.n {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.n,
                found: rho.dim(),
            });
        }
        Ok(self
            .settings
            .iter()
            .map(|u| {
                let rotated = rho.operator().conjugate_by(u);
                self.observables
                    .iter()
                    .map(|o| rotated.trace_product(o).re)
                    .collect()
            })
            .collect())
    }

    pub fn reconstruct(&self, measurements: &[Vec<f64>]) -> Result<DeviationMatrix> {
        if self.rank < self.unknowns() {
            return Err(Error::RankDeficient {
                rank: self.rank,
                needed: self.unknowns(),
            });
        }
        let per = self.observables.len();
        if measurements.len() != self.settings.len() || measurements.iter().any(|m| m.len() != per)
        {
            return Err(Error::DimensionMismatch {
                expected: self.settings.len() * per,
                found: measurements.iter().map(Vec::len).sum(),
            });
        }
        let y = DVector::from_iterator(self.map.nrows(), measurements.iter().flatten().copied());
        let coeffs = &self.inverse * y;
        let scale = 1.0 / (1usize << self.n) as f64;
        let mut rho = Operator::zeros(1 << self.n);
        for (p, &cf) in self.basis.iter().zip(coeffs.iter()) {
            rho = &rho + &p.scale_re(cf * scale);
        }
        DeviationMatrix::new(rho)
    }
}

/// Convenience wrapper building the readout map for `n` spins.
pub fn reconstruct(measurements: &[Vec<f64>], n: usize) -> Result<DeviationMatrix> {
    Tomography::new(n)?.reconstruct(measurements)
}
