#![allow(dead_code)]

use num_complex::Complex64;
use qftsim::nmr::SpinSystem;
use qftsim::operator::{DeviationMatrix, Operator};
use rand::Rng;

/// Random traceless Hermitian matrix from `2·dim²` reals in `[-1, 1]`.
pub fn deviation_from(dim: usize, raw: &[f64]) -> DeviationMatrix {
    let a: Vec<Complex64> = (0..dim * dim)
        .map(|k| Complex64::new(raw[2 * k], raw[2 * k + 1]))
        .collect();
    let a = Operator::from_row_major(dim, &a).unwrap();
    let h = (&a + &a.adjoint()).scale_re(0.5);
    qftsim::operator::traceless_part(&h)
}

pub fn random_deviation<R: Rng>(rng: &mut R, dim: usize) -> DeviationMatrix {
    let raw: Vec<f64> = (0..2 * dim * dim)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    deviation_from(dim, &raw)
}

/// Random unitary `exp(−iH)` for Hermitian `H`.
pub fn unitary_from(dim: usize, raw: &[f64]) -> Operator {
    let h = deviation_from(dim, raw).into_operator();
    qftsim::operator::matrix_exponential(&h, 1.0).unwrap()
}

pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> Operator {
    let raw: Vec<f64> = (0..2 * dim * dim)
        .map(|_| rng.gen_range(-2.0..2.0))
        .collect();
    unitary_from(dim, &raw)
}

/// Fully coupled test system with distinct couplings.
pub fn coupled_system(n: usize) -> SpinSystem {
    let offsets = [310.0, -125.0, 47.0, 82.0, -9.0];
    let j = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    if a == b {
                        0.0
                    } else {
                        11.0 + 6.5 * (a + b) as f64
                    }
                })
                .collect()
        })
        .collect();
    let mut sys = SpinSystem::ideal(offsets[..n].to_vec(), j).unwrap();
    sys.t1_s = vec![1.2; n];
    sys.t2_s = (0..n).map(|i| 0.3 + 0.1 * i as f64).collect();
    sys
}
