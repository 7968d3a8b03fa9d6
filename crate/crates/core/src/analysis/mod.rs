//! Readout and comparison of final deviation matrices.

mod fidelity;
mod spectrum;
mod tomography;

pub use fidelity::{align_frame, estimate_attenuation, fidelity, FidelityReport};
pub use spectrum::{
    find_peaks, resolved_groups, simulate_fid, spectrum, Acquisition, Peak, SpectrumResult,
    PEAK_THRESHOLD,
};
pub use tomography::{
    readout_observables, readout_rotations, reconstruct, tomography_readout_set, Observable,
    ReadoutRotation, Tomography, MAX_TOMOGRAPHY_SPINS,
};
