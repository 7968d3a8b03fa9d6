//! FID synthesis, Fourier transform and peak picking.

use std::fmt::Write as _;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nmr::{EvolutionTerms, SpinSystem};
use crate::operator::DeviationMatrix;

/// Peaks below this fraction of the largest magnitude are ignored.
pub const PEAK_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    pub dwell_s: f64,
    pub points: usize,
    /// Multiply the FID by `exp(−t/T2)` of the observed spin.
    pub broadening: bool,
}

impl Default for Acquisition {
    /// ±16384 Hz window at 1 Hz resolution.
    fn default() -> Self {
        Self {
            dwell_s: 1.0 / 32768.0,
            points: 32768,
            broadening: true,
        }
    }
}

impl Acquisition {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidAcquisition(format!(
                "need at least 2 points, got {}",
                self.points
            )));
        }
        if !(self.dwell_s.is_finite() && self.dwell_s > 0.0) {
            return Err(Error::InvalidAcquisition(format!(
                "dwell must be positive, got {}",
                self.dwell_s
            )));
        }
        Ok(())
    }

    pub fn acquisition_time(&self) -> f64 {
        self.dwell_s * self.points as f64
    }

    pub fn resolution_hz(&self) -> f64 {
        1.0 / self.acquisition_time()
    }
}

/// `s(m) = Tr(ρ(m·dwell)·(I_x + i I_y))` for `spin`, free evolution under
/// the full Hamiltonian.
///
/// The Hamiltonian is diagonal, so only the elements `ρ_ba` with spin up in
/// `a` and down in `b` (all other bits equal) contribute, each rotating at
/// `E_a − E_b`. A spin with positive offset gives a positive frequency.
pub fn simulate_fid(
    rho: &DeviationMatrix,
    sys: &SpinSystem,
    spin: usize,
    acq: &Acquisition,
) -> Result<Vec<Complex64>> {
    acq.validate()?;
    if spin >= sys.n {
        return Err(Error::SpinOutOfRange {
            index: spin,
            n: sys.n,
        });
    }
    if rho.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: rho.dim(),
        });
    }
    let energies = sys.energies(&EvolutionTerms::Full);
    let bit = 1usize << (sys.n - 1 - spin);
    let lines: Vec<(Complex64, f64)> = (0..sys.dim())
        .filter(|a| a & bit == 0)
        .map(|a| {
            let b = a | bit;
            (rho.operator().get(b, a), energies[a] - energies[b])
        })
        .filter(|(amp, _)| *amp != Complex64::new(0.0, 0.0))
        .collect();
    let rate = if acq.broadening {
        1.0 / sys.t2_s[spin]
    } else {
        0.0
    };
    Ok((0..acq.points)
        .map(|m| {
            let t = m as f64 * acq.dwell_s;
            let s: Complex64 = lines
                .iter()
                .map(|(amp, w)| amp * Complex64::from_polar(1.0, w * t))
                .sum();
            s * (-t * rate).exp()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq_hz: f64,
    pub height: f64,
    /// Full width at half height, linearly interpolated.
    pub width_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub spin: usize,
    pub freqs: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    pub peaks: Vec<Peak>,
}

impl SpectrumResult {
    /// `freq_hz,re,im,magnitude` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,re,im,magnitude\n");
        for (f, a) in self.freqs.iter().zip(&self.amplitude) {
            let _ = writeln!(out, "{f},{},{},{}", a.re, a.im, a.norm());
        }
        out
    }

    pub fn peaks_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.peaks)?)
    }
}

/// Unnormalized DFT of `fid`, reordered so frequencies run from
/// `−1/(2·dwell)` upward in steps of `1/(points·dwell)`. With this
/// normalization `Σ|fid|² = Σ|spectrum|² / points`.
pub fn spectrum(fid: &[Complex64], acq: &Acquisition, spin: usize) -> Result<SpectrumResult> {
    acq.validate()?;
    if fid.len() != acq.points {
        return Err(Error::InvalidAcquisition(format!(
            "FID has {} points, acquisition expects {}",
            fid.len(),
            acq.points
        )));
    }
    let n = fid.len();
    let mut buf = fid.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // bin k < n/2 is +k, the rest wrap to negative frequencies
    let half = n / 2;
    let amplitude: Vec<Complex64> = buf[n - half..]
        .iter()
        .chain(&buf[..n - half])
        .copied()
        .collect();
    let step = acq.resolution_hz();
    let freqs: Vec<f64> = (0..n).map(|i| (i as f64 - half as f64) * step).collect();
    let magnitude: Vec<f64> = amplitude.iter().map(|a| a.norm()).collect();
    let peaks = find_peaks(&magnitude, &freqs, PEAK_THRESHOLD);
    Ok(SpectrumResult {
        spin,
        freqs,
        amplitude,
        peaks,
    })
}

/// Local maxima of `magnitude` above `threshold · max`, located to sub-bin
/// precision by a parabola through the three samples around the maximum.
pub fn find_peaks(magnitude: &[f64], freqs: &[f64], threshold: f64) -> Vec<Peak> {
    let max = magnitude.iter().copied().fold(0.0, f64::max);
    if max == 0.0 || magnitude.len() < 3 {
        return Vec::new();
    }
    let cut = threshold * max;
    let step = freqs[1] - freqs[0];
    (1..magnitude.len() - 1)
        .filter(|&i| {
            let m = magnitude[i];
            m > cut && m > magnitude[i - 1] && m >= magnitude[i + 1]
        })
        .map(|i| Peak {
            freq_hz: freqs[i]
                + vertex_offset(magnitude[i - 1], magnitude[i], magnitude[i + 1]) * step,
            height: magnitude[i],
            width_hz: half_height_width(magnitude, i) * step,
        })
        .collect()
}

/// Vertex of the parabola through `(−1, l), (0, m), (1, r)`, within half a bin.
fn vertex_offset(l: f64, m: f64, r: f64) -> f64 {
    let curvature = l - 2.0 * m + r;
    if curvature >= 0.0 {
        return 0.0;
    }
    (0.5 * (l - r) / curvature).clamp(-0.5, 0.5)
}

/// Width in bins between the half-height crossings around `i`.
fn half_height_width(magnitude: &[f64], i: usize) -> f64 {
    let half = magnitude[i] / 2.0;
    let mut left = i as f64;
    let mut k = i;
    while k > 0 {
        if magnitude[k - 1] <= half {
            left = (k - 1) as f64 + (half - magnitude[k - 1]) / (magnitude[k] - magnitude[k - 1]);
            break;
        }
        k -= 1;
        left = k as f64;
    }
    let mut right = i as f64;
    let mut k = i;
    while k + 1 < magnitude.len() {
        if magnitude[k + 1] <= half {
            right = k as f64 + (magnitude[k] - half) / (magnitude[k] - magnitude[k + 1]);
            break;
        }
        k += 1;
        right = k as f64;
    }
    right - left
}

/// Partitions the peaks into resolved groups. Neighbouring peaks stay in one
/// group unless the magnitude between them falls below half the height of
/// the lower one, i.e. they are not separated at half height.
pub fn resolved_groups(result: &SpectrumResult) -> Vec<Vec<Peak>> {
    let mut groups: Vec<Vec<Peak>> = Vec::new();
    if result.freqs.len() < 2 {
        return groups;
    }
    let step = result.freqs[1] - result.freqs[0];
    let bin = |f: f64| ((f - result.freqs[0]) / step).round() as usize;
    for p in &result.peaks {
        if let Some(prev) = groups.last().and_then(|g| g.last()) {
            let valley = result.amplitude[bin(prev.freq_hz)..=bin(p.freq_hz)]
                .iter()
                .map(|a| a.norm())
                .fold(f64::INFINITY, f64::min);
            if valley >= 0.5 * prev.height.min(p.height) {
                groups.last_mut().expect("nonempty").push(p.clone());
                continue;
            }
        }
        groups.push(vec![p.clone()]);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{spin_operator, Axis};

    fn acq(points: usize, dwell_s: f64) -> Acquisition {
        Acquisition {
            dwell_s,
            points,
            broadening: false,
        }
    }

    #[test]
    fn z_magnetization_is_silent() {
        let sys = SpinSystem::alanine();
        let rho = crate::nmr::thermal_state(&sys);
        let fid = simulate_fid(&rho, &sys, 1, &acq(256, 1e-4)).unwrap();
        assert!(fid.iter().all(|s| s.norm() == 0.0));
        let spec = spectrum(&fid, &acq(256, 1e-4), 1).unwrap();
        assert!(spec.peaks.is_empty());
    }

    #[test]
    fn single_spin_rotates_positively() {
        let f = 37.0;
        let sys = SpinSystem::ideal(vec![f], vec![vec![0.0]]).unwrap();
        let rho = DeviationMatrix::new(spin_operator(Axis::X, 0, 1).unwrap()).unwrap();
        let a = acq(64, 1e-3);
        let fid = simulate_fid(&rho, &sys, 0, &a).unwrap();
        for (m, s) in fid.iter().enumerate() {
            let t = m as f64 * 1e-3;
            let want = Complex64::from_polar(0.5, 2.0 * std::f64::consts::PI * f * t);
            assert!((s - want).norm() < 1e-12);
        }
    }

    #[test]
    fn coupled_pair_beats_at_half_j() {
        let (f, j) = (20.0, 6.0);
        let sys = SpinSystem::ideal(vec![f, -50.0], vec![vec![0.0, j], vec![j, 0.0]]).unwrap();
        let rho = DeviationMatrix::new(spin_operator(Axis::X, 0, 2).unwrap()).unwrap();
        let fid = simulate_fid(&rho, &sys, 0, &acq(50, 2e-3)).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        for (m, s) in fid.iter().enumerate() {
            let t = m as f64 * 2e-3;
            let want = (Complex64::from_polar(1.0, two_pi * (f + j / 2.0) * t)
                + Complex64::from_polar(1.0, two_pi * (f - j / 2.0) * t))
                * 0.5;
            assert!((s - want).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_tone_peak() {
        let a = acq(1024, 1e-3);
        let f = 123.4;
        let fid: Vec<Complex64> = (0..1024)
            .map(|m| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * m as f64 * 1e-3))
            .collect();
        let s = spectrum(&fid, &a, 0).unwrap();
        assert_eq!(s.peaks.len(), 1);
        assert!((s.peaks[0].freq_hz - f).abs() <= a.resolution_hz());
        assert_eq!(s.freqs[0], -500.0);
        let steps: Vec<f64> = s.freqs.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(steps.iter().all(|d| (d - a.resolution_hz()).abs() < 1e-9));
    }

    #[test]
    fn csv_header_and_rows() {
        let a = acq(4, 0.25);
        let fid = vec![Complex64::new(1.0, 0.0); 4];
        let s = spectrum(&fid, &a, 0).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("freq_hz,re,im,magnitude\n"));
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("\n0,4,0,4\n"));
    }

    #[test]
    fn half_height_grouping() {
        let freqs: Vec<f64> = (0..9).map(f64::from).collect();
        let mags = [0.0, 1.0, 10.0, 6.0, 9.0, 1.0, 8.0, 1.0, 0.0];
        let result = SpectrumResult {
            spin: 0,
            peaks: find_peaks(&mags, &freqs, PEAK_THRESHOLD),
            amplitude: mags.iter().map(|&m| Complex64::new(m, 0.0)).collect(),
            freqs,
        };
        assert_eq!(result.peaks.len(), 3);
        let groups = resolved_groups(&result);
        assert_eq!(groups.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1]);
    }

    #[test]
    fn invalid_acquisition() {
        let sys = SpinSystem::alanine();
        let rho = crate::nmr::thermal_state(&sys);
        assert!(simulate_fid(&rho, &sys, 0, &acq(1, 1e-3)).is_err());
        assert!(simulate_fid(&rho, &sys, 0, &acq(8, 0.0)).is_err());
        assert!(simulate_fid(&rho, &sys, 3, &acq(8, 1e-3)).is_err());
    }
}
