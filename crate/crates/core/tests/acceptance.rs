//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use qftsim::analysis::{
    estimate_attenuation, fidelity, resolved_groups, simulate_fid, spectrum, Acquisition,
    FidelityReport, Tomography,
};
use qftsim::compiler::{
    compile_a, compile_b, compile_qft, interval_target, load_published_program, CompileOptions,
};
use qftsim::nmr::{free_evolution, thermal_state, EvolutionTerms, SpinSystem};
use qftsim::operator::{rotation, DeviationMatrix, Operator};
use qftsim::pulse::{program_unitary, simulate, PulseProgram, SimulationMode};
use qftsim::qft::{bit_reversal, coppersmith_sequence, ideal_qft};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_deviation, random_unitary};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `diag(1, 1, 1, e^{iθ})`.
fn controlled_phase(theta: f64) -> Operator {
    Operator::from_diagonal(&[
        c(1.0, 0.0),
        c(1.0, 0.0),
        c(1.0, 0.0),
        Complex64::from_polar(1.0, theta),
    ])
    .unwrap()
}

/// `(P_rev · DFT)` with the DFT built entry by entry from `e^{2πi·x·p/q}`.
fn reordered_dft(n: usize) -> Operator {
    let q = 1usize << n;
    let rev = |v: usize| (0..n).fold(0, |acc, b| acc | (((v >> b) & 1) << (n - 1 - b)));
    let mut m = Operator::zeros(q);
    for p in 0..q {
        for x in 0..q {
            let angle = 2.0 * PI * (x as f64) * (p as f64) / q as f64;
            m.set(
                rev(p),
                x,
                Complex64::from_polar(1.0 / (q as f64).sqrt(), angle),
            );
        }
    }
    m
}

fn reference_qft2_matrix() -> Operator {
    let i = c(0.0, 1.0);
    let one = c(1.0, 0.0);
    let rows = vec![
        vec![one, one, one, one],
        vec![one, i, -one, -i],
        vec![one, -one, one, -one],
        vec![one, -i, -one, i],
    ];
    Operator::from_rows(&rows).unwrap().scale_re(0.5)
}

fn criterion_1() -> Outcome {
    let (u, t) = timed(|| ideal_qft(2).unwrap());
    let dev = u.max_abs_diff(&reference_qft2_matrix());
    outcome(
        dev < 1e-12 && t < Duration::from_millis(1),
        format!("max deviation {dev:.1e}, {t:?}"),
    )
}

fn criterion_2() -> Outcome {
    let (devs, t) = timed(|| {
        (1..=5)
            .map(|n| {
                let u = coppersmith_sequence(n).unwrap().unitary().unwrap();
                u.phase_aligned_diff(&reordered_dft(n))
            })
            .collect::<Vec<f64>>()
    });
    let worst = devs.iter().copied().fold(0.0, f64::max);
    outcome(
        worst < 1e-10 && t < Duration::from_secs(1),
        format!("worst deviation over n=1..5 {worst:.1e}, {t:?}"),
    )
}

fn criterion_3() -> Outcome {
    // (π/2)_y then (π)_x, chronological
    let literal =
        &rotation(&[0], PI, 0.0, 1).unwrap() * &rotation(&[0], PI / 2.0, PI / 2.0, 1).unwrap();
    let hadamard = Operator::hadamard();
    let dev_literal = literal.phase_aligned_diff(&hadamard);
    let sys = SpinSystem::ideal(vec![0.0], vec![vec![0.0]]).unwrap();
    let compiled = compile_a(0, 1, false)
        .unwrap()
        .corrected_unitary(&sys)
        .unwrap();
    let dev_compiled = compiled.phase_aligned_diff(&hadamard);
    let worst = dev_literal.max(dev_compiled);
    outcome(
        worst < 1e-12,
        format!("two-pulse product {dev_literal:.1e}, compiled {dev_compiled:.1e}"),
    )
}

fn criterion_4() -> Outcome {
    let j_hz = 54.0;
    let sys = SpinSystem::ideal(vec![0.0, 0.0], vec![vec![0.0, j_hz], vec![j_hz, 0.0]]).unwrap();
    let mut worst: f64 = 0.0;
    for theta in [PI / 2.0, PI / 4.0, PI / 8.0] {
        let target = controlled_phase(theta);
        // six factors, chronological: (π)_x^j, delay, (π)_x^j, (π/2)_y^{jk}, (θ/2)_x^{jk}, (π/2)_{−y}^{jk}
        let tau = theta / (2.0 * PI * j_hz);
        let factors = [
            rotation(&[0], PI, 0.0, 2).unwrap(),
            free_evolution(&sys, tau, &EvolutionTerms::Couplings).unwrap(),
            rotation(&[0], PI, 0.0, 2).unwrap(),
            rotation(&[0, 1], PI / 2.0, PI / 2.0, 2).unwrap(),
            rotation(&[0, 1], theta / 2.0, 0.0, 2).unwrap(),
            rotation(&[0, 1], PI / 2.0, -PI / 2.0, 2).unwrap(),
        ];
        let literal = factors
            .iter()
            .fold(Operator::identity(4), |acc, f| f * &acc);
        worst = worst.max(literal.phase_aligned_diff(&target));
        for emit_z in [true, false] {
            let block = compile_b(0, 1, theta, &sys, emit_z).unwrap();
            worst = worst.max(
                block
                    .corrected_unitary(&sys)
                    .unwrap()
                    .phase_aligned_diff(&target),
            );
        }
    }
    outcome(
        worst < 1e-10,
        format!("worst deviation over θ ∈ {{π/2, π/4, π/8}} {worst:.1e}"),
    )
}

fn criterion_5() -> Outcome {
    let sys = SpinSystem::alanine();
    let mut worst: f64 = 0.0;
    let mut intervals = 0;
    for opts in [CompileOptions::input_aware(), CompileOptions::exact()] {
        let block = compile_qft(&sys, &opts).unwrap();
        for d in &block.delays {
            let events = block.program.events[d.first_event..d.end_event].to_vec();
            let p = PulseProgram::with_events(3, events).unwrap();
            let physical = program_unitary(&p, &sys).unwrap();
            worst = worst.max(physical.phase_aligned_diff(&interval_target(&sys, d).unwrap()));
            intervals += 1;
        }
    }
    outcome(
        worst < 1e-9 && intervals == 6,
        format!("{intervals} intervals under the full Hamiltonian, worst deviation {worst:.1e}"),
    )
}

fn reordered_qft_action(rho: &DeviationMatrix) -> DeviationMatrix {
    let u = &bit_reversal(3).unwrap() * &ideal_qft(3).unwrap();
    rho.conjugate_by(&u)
}

fn criterion_6() -> Outcome {
    let sys = SpinSystem::alanine();
    let rho = thermal_state(&sys);
    let ideal = reordered_qft_action(&rho);
    let (compiled_f, t) = timed(|| {
        let block = compile_qft(&sys, &CompileOptions::input_aware()).unwrap();
        let out = simulate(&block.program, &sys, &rho, SimulationMode::Unitary).unwrap();
        fidelity(&ideal, &out).unwrap()
    });
    let published = simulate(
        &load_published_program(),
        &sys,
        &rho,
        SimulationMode::Unitary,
    )
    .unwrap();
    let report = FidelityReport::compute(&ideal, &published).unwrap();
    outcome(
        compiled_f >= 0.999 && report.fidelity_aligned >= 0.99 && t < Duration::from_secs(1),
        format!(
            "compiled F = {compiled_f:.12} ({t:?}); published program F = {:.6}, aligned {:.12}",
            report.fidelity, report.fidelity_aligned
        ),
    )
}

fn alanine_readout_spectra(acq: &Acquisition) -> Vec<qftsim::analysis::SpectrumResult> {
    let sys = SpinSystem::alanine();
    let readout = rotation(&[0, 1, 2], PI / 2.0, PI / 2.0, 3).unwrap();
    let rho = thermal_state(&sys).conjugate_by(&readout);
    (0..3)
        .map(|spin| spectrum(&simulate_fid(&rho, &sys, spin, acq).unwrap(), acq, spin).unwrap())
        .collect()
}

fn criterion_7() -> Outcome {
    let acq = Acquisition::default();
    let (spectra, t) = timed(|| alanine_readout_spectra(&acq));
    let bin = acq.resolution_hz();
    let peaks: Vec<f64> = spectra[1].peaks.iter().map(|p| p.freq_hz).collect();
    let expected = [
        -(54.0 + 35.0) / 2.0,
        -(54.0 - 35.0) / 2.0,
        (54.0 - 35.0) / 2.0,
        (54.0 + 35.0) / 2.0,
    ];
    let positions_ok = peaks.len() == 4
        && peaks
            .iter()
            .zip(expected)
            .all(|(p, e)| (p - e).abs() <= bin);
    let groups: Vec<usize> = spectra.iter().map(|s| resolved_groups(s).len()).collect();
    outcome(
        positions_ok && groups[0] == 2 && groups[2] == 2 && t < Duration::from_secs(5),
        format!(
            "spin 2 peaks {peaks:.2?} Hz; resolved groups per spin {groups:?} at {bin} Hz; local maxima per spin {:?}; {t:?}",
            spectra.iter().map(|s| s.peaks.len()).collect::<Vec<_>>()
        ),
    )
}

fn criterion_8() -> Outcome {
    let sys = SpinSystem::alanine();
    let rho = thermal_state(&sys);
    let ideal = reordered_qft_action(&rho);
    let program = load_published_program();
    let total = program.total_delay();
    let relaxed = simulate(&program, &sys, &rho, SimulationMode::Relaxing).unwrap();
    let alpha = estimate_attenuation(&ideal, &relaxed).unwrap();
    let relaxed_report = FidelityReport::compute(&ideal, &relaxed).unwrap();

    // uniform decay across coherence orders: the whole matrix shrinks by one factor
    let unitary = simulate(&program, &sys, &rho, SimulationMode::Unitary).unwrap();
    let base = FidelityReport::compute(&ideal, &unitary).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_shift: f64 = 0.0;
    let mut min_f = f64::INFINITY;
    let mut alpha_ok = true;
    for _ in 0..200 {
        let t2: f64 = rand::Rng::gen_range(&mut rng, 0.01..5.0);
        let attenuated = unitary.scale((-total / t2).exp());
        let r = FidelityReport::compute(&ideal, &attenuated).unwrap();
        worst_shift = worst_shift.max((r.fidelity_aligned - base.fidelity_aligned).abs());
        min_f = min_f.min(r.fidelity_aligned);
        alpha_ok &= r.attenuation > 0.0 && r.attenuation < 1.0;
    }
    let pass = alpha > 0.0 && alpha < 1.0 && alpha_ok && worst_shift < 1e-6 && min_f >= 0.99;
    outcome(
        pass,
        format!(
            "relaxing run over {total:.4} s: α = {alpha:.4} (after frame alignment {:.4}), aligned F = {:.4}; uniform decay: F shift {worst_shift:.1e}, min aligned F {min_f:.6}",
            relaxed_report.attenuation_after_frame_alignment, relaxed_report.fidelity_aligned
        ),
    )
}

fn criterion_9() -> Outcome {
    let (result, t) = timed(|| {
        let tomo = Tomography::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let rho = random_deviation(&mut rng, 8);
            let back = tomo.reconstruct(&tomo.measure(&rho).unwrap()).unwrap();
            worst = worst.max(back.operator().max_abs_diff(rho.operator()));
        }
        (tomo.rank(), worst)
    });
    let (rank, worst) = result;
    outcome(
        rank == 63 && worst < 1e-8 && t < Duration::from_secs(30),
        format!("rank {rank}, worst element error {worst:.1e} over 100 matrices, {t:?}"),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = [0.0f64; 5];
    let mut in_range = true;
    for _ in 0..200 {
        let a = random_deviation(&mut rng, 8);
        let b = random_deviation(&mut rng, 8);
        let u = random_unitary(&mut rng, 8);
        let s: f64 = rand::Rng::gen_range(&mut rng, 1e-3..1e3);
        let t: f64 = rand::Rng::gen_range(&mut rng, 1e-3..1e3);
        let f = fidelity(&a, &b).unwrap();
        in_range &= (0.0..=1.0).contains(&f);
        worst[0] = worst[0].max((fidelity(&a, &a).unwrap() - 1.0).abs());
        worst[1] = worst[1].max(fidelity(&a, &a.scale(-1.0)).unwrap().abs());
        worst[2] = worst[2].max((fidelity(&a.scale(s), &b.scale(t)).unwrap() - f).abs());
        worst[3] =
            worst[3].max((fidelity(&a.conjugate_by(&u), &b.conjugate_by(&u)).unwrap() - f).abs());
        worst[4] = worst[4].max((fidelity(&b, &a).unwrap() - f).abs());
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    outcome(
        in_range && max < 1e-12,
        format!("self {:.1e}, negation {:.1e}, scaling {:.1e}, conjugation {:.1e}, symmetry {:.1e}, all in [0,1]: {in_range}",
            worst[0], worst[1], worst[2], worst[3], worst[4]),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("two-qubit QFT matrix", criterion_1),
        ("gate decomposition equivalence", criterion_2),
        ("A-gate pulses", criterion_3),
        ("B-gate pulses", criterion_4),
        ("refocused intervals", criterion_5),
        ("end-to-end three-qubit QFT", criterion_6),
        ("spectrum structure", criterion_7),
        ("relaxation and attenuation", criterion_8),
        ("tomography round trip", criterion_9),
        ("fidelity measure", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict}: {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
