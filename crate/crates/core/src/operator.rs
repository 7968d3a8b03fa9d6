//! Dense complex operators on the spin Hilbert space.
//!
//! The computational basis is ordered `|00…0⟩ … |11…1⟩` with spin 0 as the
//! most significant bit of the basis label. A bit value of 0 is spin-up
//! (`I_z = +1/2`). Unitaries, Hamiltonians and density matrices all share the
//! [`Operator`] representation.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Cartesian axis of a spin operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Square complex matrix whose dimension is a power of two.
#[derive(Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<Complex64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim(), self.dim())?;
        for r in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|col| {
                    let z = self.m[(r, col)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim >= 2 && dim.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::InvalidDimension(dim))
    }
}

impl Operator {
    /// Wraps a matrix, checking that it is square with a power-of-two size.
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        check_dim(m.nrows())?;
        Ok(Self { m })
    }

    /// Builds an operator from row-major entries.
    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self {
            m: DMatrix::from_row_slice(dim, dim, entries),
        })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        let flat: Vec<Complex64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(dim, &flat)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Result<Self> {
        check_dim(diag.len())?;
        let mut m = DMatrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        Ok(Self { m })
    }

    pub fn pauli(axis: Axis) -> Self {
        let z0 = c(0.0);
        let entries = match axis {
            Axis::X => [z0, c(1.0), c(1.0), z0],
            Axis::Y => [z0, -I, I, z0],
            Axis::Z => [c(1.0), z0, z0, c(-1.0)],
        };
        Self {
            m: DMatrix::from_row_slice(2, 2, &entries),
        }
    }

    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            m: DMatrix::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)]),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Number of spins (qubits) this operator acts on.
    pub fn n_spins(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.m[(row, col)] = value;
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<Complex64> {
        let d = self.dim();
        (0..d)
            .flat_map(|r| (0..d).map(move |col| (r, col)))
            .map(|(r, col)| self.m[(r, col)])
            .collect()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.m[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { m: &self.m * s }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(c(s))
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> Complex64 {
        let d = self.dim();
        let mut acc = c(0.0);
        for i in 0..d {
            for k in 0..d {
                acc += self.m[(i, k)] * other.m[(k, i)];
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `[self, other] = self·other − other·self`
    pub fn commutator(&self, other: &Operator) -> Self {
        self * other - other * self
    }

    /// `U ρ U†`
    pub fn conjugate_by(&self, u: &Operator) -> Self {
        Self {
            m: &u.m * &self.m * u.m.adjoint(),
        }
    }

    /// `max |U†U − 1|`
    pub fn unitarity_error(&self) -> f64 {
        let p = self.m.adjoint() * &self.m;
        (p - DMatrix::<Complex64>::identity(self.dim(), self.dim()))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|r| (0..d).all(|col| r == col || self.m[(r, col)].norm() <= tol))
    }

    /// Max entrywise deviation after removing a global phase.
    ///
    /// The phase is taken from the ratio at the largest-magnitude entry of
    /// `reference`, then the entries are compared directly.
    pub fn phase_aligned_diff(&self, reference: &Operator) -> f64 {
        assert_eq!(self.dim(), reference.dim(), "dimension mismatch");
        let (idx, _) = reference
            .m
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, z)| {
                if z.norm() > best.1 {
                    (i, z.norm())
                } else {
                    best
                }
            });
        let a = self.m.as_slice()[idx];
        let b = reference.m.as_slice()[idx];
        if a.norm() == 0.0 || b.norm() == 0.0 {
            return self.max_abs_diff(reference);
        }
        let phase = b / a;
        let phase = phase / phase.norm();
        self.scale(phase).max_abs_diff(reference)
    }

    /// Tensor product `self ⊗ other`.
    pub fn kron(&self, other: &Operator) -> Self {
        Self {
            m: self.m.kronecker(&other.m),
        }
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Operator {
            m: &self.m * &rhs.m,
        }
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        Operator {
            m: &self.m + &rhs.m,
        }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        Operator {
            m: &self.m - &rhs.m,
        }
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -&self.m }
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        -&self
    }
}

/// Tensor product `a ⊗ b`.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kron(b)
}

/// `σ_axis / 2` on `spin`, identity on the other `n − 1` spins.
pub fn spin_operator(axis: Axis, spin: usize, n: usize) -> Result<Operator> {
    if spin >= n {
        return Err(Error::SpinOutOfRange { index: spin, n });
    }
    let half = Operator::pauli(axis).scale_re(0.5);
    Ok(embed(&half, spin, n))
}

/// Places a single-spin 2×2 operator on `spin` of an `n`-spin register.
pub(crate) fn embed(single: &Operator, spin: usize, n: usize) -> Operator {
    let id = Operator::identity(2);
    let mut acc: Option<Operator> = None;
    for k in 0..n {
        let factor = if k == spin { single } else { &id };
        acc = Some(match acc {
            None => factor.clone(),
            Some(a) => a.kron(factor),
        });
    }
    acc.expect("n >= 1")
}

/// Single-spin rotation `exp(−iθ(cos φ σx + sin φ σy)/2)`.
pub(crate) fn single_rotation(angle: f64, phase: f64) -> Operator {
    let (s, co) = (angle / 2.0).sin_cos();
    let off = Complex64::new(0.0, -1.0) * s;
    // cos φ σx + sin φ σy = [[0, e^{-iφ}], [e^{iφ}, 0]]
    let e_minus = Complex64::from_polar(1.0, -phase);
    let e_plus = Complex64::from_polar(1.0, phase);
    Operator {
        m: DMatrix::from_row_slice(2, 2, &[c(co), off * e_minus, off * e_plus, c(co)]),
    }
}

/// RF rotation `exp(−i·angle·Σ_{j∈targets}(cos φ I_x^j + sin φ I_y^j))`.
///
/// The single-spin generators commute, so the result is the tensor product
/// of closed-form 2×2 rotations.
pub fn rotation(targets: &[usize], angle: f64, phase: f64, n: usize) -> Result<Operator> {
    if targets.is_empty() {
        return Err(Error::InvalidGate("rotation with no target spins".into()));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= n) {
        return Err(Error::SpinOutOfRange { index: bad, n });
    }
    let r = single_rotation(angle, phase);
    let id = Operator::identity(2);
    let mut acc: Option<Operator> = None;
    for k in 0..n {
        let factor = if targets.contains(&k) { &r } else { &id };
        acc = Some(match acc {
            None => factor.clone(),
            Some(a) => a.kron(factor),
        });
    }
    Ok(acc.expect("n >= 1"))
}

/// Diagonal z-rotation `exp(−i Σ_i angles[i]·I_z^i)`.
pub fn z_rotation(angles: &[f64]) -> Operator {
    let n = angles.len();
    let dim = 1usize << n;
    let diag: Vec<Complex64> = (0..dim)
        .map(|b| {
            let phase: f64 = angles
                .iter()
                .enumerate()
                .map(|(i, a)| a * spin_z_value(b, i, n))
                .sum();
            Complex64::from_polar(1.0, -phase)
        })
        .collect();
    Operator::from_diagonal(&diag).expect("power-of-two dimension")
}

/// Eigenvalue of `I_z^spin` (±1/2) on basis state `basis`.
#[inline]
pub(crate) fn spin_z_value(basis: usize, spin: usize, n: usize) -> f64 {
    if (basis >> (n - 1 - spin)) & 1 == 0 {
        0.5
    } else {
        -0.5
    }
}

/// `exp(−i·h·t)` for Hermitian `h`.
///
/// Computed through the Hermitian eigendecomposition `h = V Λ V†`, so the
/// result is `V e^{−iΛt} V†`, unitary to rounding.
pub fn matrix_exponential(h: &Operator, t: f64) -> Result<Operator> {
    let scale = h.max_abs().max(1.0);
    let herr = h.hermiticity_error();
    if herr > 1e-10 * scale {
        return Err(Error::NotHermitian(herr));
    }
    if h.is_diagonal(0.0) {
        let diag: Vec<Complex64> = h
            .diagonal()
            .iter()
            .map(|e| Complex64::from_polar(1.0, -e.re * t))
            .collect();
        return Operator::from_diagonal(&diag);
    }
    // symmetrize before decomposing so rounding asymmetry cannot leak in
    let sym = (&h.m + h.m.adjoint()) * c(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let phases =
        DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * t)));
    let v = eig.eigenvectors;
    Ok(Operator {
        m: &v * phases * v.adjoint(),
    })
}

/// Traceless (deviation) density matrix: Hermitian with zero trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationMatrix(Operator);

impl DeviationMatrix {
    /// Validates Hermiticity and tracelessness to `1e-12` relative to the
    /// largest entry.
    pub fn new(op: Operator) -> Result<Self> {
        let tol = 1e-12 * op.max_abs().max(1.0);
        let herr = op.hermiticity_error();
        if herr > tol {
            return Err(Error::NotHermitian(herr));
        }
        let tr = op.trace().norm();
        if tr > tol * op.dim() as f64 {
            return Err(Error::InvalidSystem(format!(
                "deviation matrix has nonzero trace {tr:e}"
            )));
        }
        Ok(Self(op))
    }

    pub(crate) fn from_operator_unchecked(op: Operator) -> Self {
        Self(op)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(Operator::zeros(dim))
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn n_spins(&self) -> usize {
        self.0.n_spins()
    }

    pub fn conjugate_by(&self, u: &Operator) -> Self {
        Self(self.0.conjugate_by(u))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale_re(s))
    }
}

/// `rho − (Tr(rho)/dim)·1`.
pub fn traceless_part(rho: &Operator) -> DeviationMatrix {
    let shift = rho.trace() / c(rho.dim() as f64);
    let mut m = rho.m.clone();
    for i in 0..rho.dim() {
        m[(i, i)] -= shift;
    }
    DeviationMatrix(Operator { m })
}

/// JSON shape `{ "re": [[..]], "im": [[..]] }` used for exported matrices.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComplexMatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&Operator> for ComplexMatrixJson {
    fn from(op: &Operator) -> Self {
        let d = op.dim();
        let re = (0..d)
            .map(|r| (0..d).map(|col| op.get(r, col).re).collect())
            .collect();
        let im = (0..d)
            .map(|r| (0..d).map(|col| op.get(r, col).im).collect())
            .collect();
        Self { re, im }
    }
}

impl TryFrom<&ComplexMatrixJson> for Operator {
    type Error = Error;
    fn try_from(j: &ComplexMatrixJson) -> Result<Operator> {
        let d = j.re.len();
        if j.im.len() != d || j.re.iter().chain(j.im.iter()).any(|row| row.len() != d) {
            return Err(Error::Json(
                "re/im must be square matrices of equal size".into(),
            ));
        }
        let entries: Vec<Complex64> = (0..d)
            .flat_map(|r| (0..d).map(move |col| (r, col)))
            .map(|(r, col)| Complex64::new(j.re[r][col], j.im[r][col]))
            .collect();
        Operator::from_row_major(d, &entries)
    }
}
