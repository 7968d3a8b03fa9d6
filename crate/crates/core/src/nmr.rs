//! Weakly coupled spin-1/2 system in the rotating frame.
//!
//! Offsets are rotating-frame chemical shifts in Hz (for 13C at 9.4 T the
//! carrier sits near 100.617 MHz, which never enters the dynamics). All
//! internal Hamiltonian terms are `I_z` products, so every operator built
//! here is diagonal in the computational basis.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{c, spin_z_value, DeviationMatrix, Operator};

/// Bundled alanine parameters, the default system.
pub const ALANINE_JSON: &str = include_str!("../data/alanine.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    pub n: usize,
    pub offsets_hz: Vec<f64>,
    /// Symmetric scalar couplings, zero diagonal.
    pub j_hz: Vec<Vec<f64>>,
    pub t1_s: Vec<f64>,
    pub t2_s: Vec<f64>,
    pub labels: Vec<String>,
}

impl SpinSystem {
    pub fn new(
        offsets_hz: Vec<f64>,
        j_hz: Vec<Vec<f64>>,
        t1_s: Vec<f64>,
        t2_s: Vec<f64>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let sys = Self {
            n: offsets_hz.len(),
            offsets_hz,
            j_hz,
            t1_s,
            t2_s,
            labels,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Three 13C spins of alanine: carbonyl, Cα, Cβ.
    pub fn alanine() -> Self {
        Self::from_json(ALANINE_JSON).expect("bundled alanine config is valid")
    }

    /// Uncoupled-relaxation-free system with the given offsets and couplings.
    pub fn ideal(offsets_hz: Vec<f64>, j_hz: Vec<Vec<f64>>) -> Result<Self> {
        let n = offsets_hz.len();
        Self::new(
            offsets_hz,
            j_hz,
            vec![f64::INFINITY; n],
            vec![f64::INFINITY; n],
            (1..=n).map(|i| format!("s{i}")).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let bad = |m: String| Err(Error::InvalidSystem(m));
        if n == 0 || n > 10 {
            return bad(format!("spin count {n} unsupported"));
        }
        if self.offsets_hz.len() != n
            || self.t1_s.len() != n
            || self.t2_s.len() != n
            || self.labels.len() != n
            || self.j_hz.len() != n
            || self.j_hz.iter().any(|r| r.len() != n)
        {
            return bad("field lengths do not match n".into());
        }
        for i in 0..n {
            if self.j_hz[i][i] != 0.0 {
                return bad(format!("J[{i}][{i}] must be zero"));
            }
            for k in 0..n {
                if self.j_hz[i][k] != self.j_hz[k][i] {
                    return bad(format!("J not symmetric at ({i},{k})"));
                }
                if !self.j_hz[i][k].is_finite() {
                    return bad(format!("J[{i}][{k}] not finite"));
                }
            }
            if !self.offsets_hz[i].is_finite() {
                return bad(format!("offset {i} not finite"));
            }
            let (t1, t2) = (self.t1_s[i], self.t2_s[i]);
            if t1.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
                || t2.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            {
                return bad(format!("relaxation times of spin {i} must be positive"));
            }
            if t2 > 2.0 * t1 {
                return bad(format!("T2 > 2·T1 for spin {i}"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sys: SpinSystem = serde_json::from_str(text)?;
        sys.validate()?;
        Ok(sys)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        self.j_hz[a][b]
    }

    /// Spin pairs `(a, b)`, `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |a| (a + 1..self.n).map(move |b| (a, b)))
    }

    /// Same system with every relaxation time set to infinity.
    pub fn without_relaxation(&self) -> Self {
        Self {
            t1_s: vec![f64::INFINITY; self.n],
            t2_s: vec![f64::INFINITY; self.n],
            ..self.clone()
        }
    }

    /// Diagonal of the selected Hamiltonian terms, rad/s.
    pub fn energies(&self, terms: &EvolutionTerms) -> Vec<f64> {
        let n = self.n;
        (0..self.dim())
            .map(|b| {
                let z = |i: usize| spin_z_value(b, i, n);
                let mut e = 0.0;
                if matches!(terms, EvolutionTerms::Full) {
                    e += (0..n)
                        .map(|i| 2.0 * PI * self.offsets_hz[i] * z(i))
                        .sum::<f64>();
                }
                let coupling_sum =
                    |(a, k): (usize, usize)| 2.0 * PI * self.j_hz[a][k] * z(a) * z(k);
                e += match terms {
                    EvolutionTerms::Full | EvolutionTerms::Couplings => {
                        self.pairs().map(coupling_sum).sum::<f64>()
                    }
                    EvolutionTerms::Subset(list) => {
                        list.iter().map(|&(a, k)| coupling_sum((a, k))).sum::<f64>()
                    }
                };
                e
            })
            .collect()
    }
}

/// Which internal-Hamiltonian terms act during a delay.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionTerms {
    /// Chemical shifts and all couplings.
    #[default]
    Full,
    /// All couplings, no shifts.
    Couplings,
    /// Only the listed couplings `(a, b)`, `a < b`.
    Subset(Vec<(usize, usize)>),
}

impl EvolutionTerms {
    pub fn subset(pairs: &[(usize, usize)]) -> Self {
        let mut v: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        v.sort_unstable();
        v.dedup();
        EvolutionTerms::Subset(v)
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if let EvolutionTerms::Subset(list) = self {
            for &(a, b) in list {
                if a >= n || b >= n || a == b {
                    return Err(Error::InvalidSystem(format!(
                        "coupling ({a},{b}) invalid for {n} spins"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `H = Σ 2π·offset_i·I_z^i + Σ_{i<j} 2π·J_ij·I_z^i I_z^j` (rad/s).
pub fn internal_hamiltonian(sys: &SpinSystem) -> Operator {
    let diag: Vec<Complex64> = sys
        .energies(&EvolutionTerms::Full)
        .into_iter()
        .map(c)
        .collect();
    Operator::from_diagonal(&diag).expect("valid system dimension")
}

/// `exp(−i·H_selected·t)`; diagonal.
pub fn free_evolution(sys: &SpinSystem, t: f64, terms: &EvolutionTerms) -> Result<Operator> {
    if t < 0.0 {
        return Err(Error::NegativeDuration(t));
    }
    terms.check(sys.n)?;
    let diag: Vec<Complex64> = sys
        .energies(terms)
        .into_iter()
        .map(|e| Complex64::from_polar(1.0, -e * t))
        .collect();
    Operator::from_diagonal(&diag)
}

/// Thermal deviation `Σ_i I_z^i`.
pub fn thermal_state(sys: &SpinSystem) -> DeviationMatrix {
    let n = sys.n;
    let diag: Vec<Complex64> = (0..sys.dim())
        .map(|b| c((0..n).map(|i| spin_z_value(b, i, n)).sum()))
        .collect();
    DeviationMatrix::from_operator_unchecked(
        Operator::from_diagonal(&diag).expect("valid dimension"),
    )
}

fn parity(x: usize) -> f64 {
    if x.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Phenomenological relaxation over `t` seconds.
///
/// Coherence `(a, b)` decays as `exp(−t Σ_i 1/T2_i)` over the spins whose
/// bits differ between `a` and `b`. The diagonal is expanded in z-product
/// operators `Π_{i∈S} 2I_z^i`; each component decays as
/// `exp(−t Σ_{i∈S} 1/T1_i)` toward zero. Every component only shrinks, so
/// the map is contractive and `relax(t)∘relax(s) = relax(t + s)`.
pub fn relax(rho: &DeviationMatrix, sys: &SpinSystem, t: f64) -> Result<DeviationMatrix> {
    if t < 0.0 {
        return Err(Error::NegativeDuration(t));
    }
    let dim = sys.dim();
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho.dim(),
        });
    }
    let n = sys.n;
    // bit mask position of spin i within a basis label
    let mask = |i: usize| 1usize << (n - 1 - i);
    let rate = |diff: usize, times: &[f64]| -> f64 {
        (0..n)
            .filter(|&i| diff & mask(i) != 0)
            .map(|i| 1.0 / times[i])
            .sum()
    };

    let mut out = rho.operator().clone();
    for a in 0..dim {
        for b in 0..dim {
            if a != b {
                let decay = (-t * rate(a ^ b, &sys.t2_s)).exp();
                out.set(a, b, rho.operator().get(a, b) * decay);
            }
        }
    }

    let diag: Vec<f64> = rho.operator().diagonal().iter().map(|z| z.re).collect();
    for (b, value) in (0..dim).map(|b| {
        let v: f64 = (0..dim)
            .map(|s| {
                let coeff: f64 =
                    (0..dim).map(|x| diag[x] * parity(x & s)).sum::<f64>() / dim as f64;
                coeff * (-t * rate(s, &sys.t1_s)).exp() * parity(b & s)
            })
            .sum();
        (b, v)
    }) {
        out.set(b, b, c(value));
    }
    Ok(DeviationMatrix::from_operator_unchecked(out))
}
