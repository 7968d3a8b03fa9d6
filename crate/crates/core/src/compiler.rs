//! Gate-to-pulse compilation.
//!
//! Every compiled block carries a per-spin z-frame. The physical program
//! `P` and the intended unitary `U` are related by
//!
//! ```text
//! U ≅ Z(trailing_z) · P · Z(leading_z),    Z(a) = exp(−i Σ a_i I_z^i)
//! ```
//!
//! up to global phase. Z-rotations are never emitted as pulses: they are
//! absorbed into the frame and applied lazily by shifting the phase of
//! later pulses (`Z(α) R_φ(θ) = R_{φ+α}(θ) Z(α)`). Folding moves the
//! trailing frame to the front, where it acts trivially on any z-diagonal
//! input such as the thermal state.
//!
//! Spin indices are physical (0 = most significant bit). A QFT qubit `q`
//! lives on spin `n − 1 − q`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nmr::{free_evolution, EvolutionTerms, SpinSystem};
use crate::operator::{z_rotation, Operator};
use crate::pulse::{parse_program, program_unitary, PulseEvent, PulseProgram};
use crate::qft::{coppersmith_sequence, Gate};

/// The published three-spin QFT pulse program for alanine, as text.
pub const PUBLISHED_QFT3_PROGRAM: &str = include_str!("../data/published_qft3.qp");

/// Largest register the compiler accepts.
pub const MAX_COMPILE_QUBITS: usize = 5;

/// Most Walsh sign patterns used to decouple spectators in one interval.
const MAX_WALSH_ORDER: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayDerivation {
    /// Index of the first event of the interval in the final program.
    pub first_event: usize,
    /// One past the last event of the interval.
    pub end_event: usize,
    pub gate: String,
    /// Active coupling as 0-based spins, if any.
    pub active: Option<(usize, usize)>,
    pub j_hz: f64,
    pub theta: f64,
    pub duration_s: f64,
    pub formula: String,
    /// Per-spin z-angle left by the interval (absorbed into the frame).
    pub z_phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledBlock {
    pub program: PulseProgram,
    /// Frame correction applied after the program.
    pub trailing_z: Vec<f64>,
    /// Frame correction applied before the program (produced by folding).
    pub leading_z: Vec<f64>,
    /// `bit_map[q]` is the physical qubit that carries logical output qubit `q`.
    pub bit_map: Vec<usize>,
    /// Origin of each program event.
    pub provenance: Vec<String>,
    pub delays: Vec<DelayDerivation>,
}

impl CompiledBlock {
    pub fn empty(n: usize) -> Self {
        Self {
            program: PulseProgram::new(n),
            trailing_z: vec![0.0; n],
            leading_z: vec![0.0; n],
            bit_map: (0..n).collect(),
            provenance: Vec::new(),
            delays: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.program.n
    }

    fn push(&mut self, event: PulseEvent, origin: &str) {
        self.program.push(event);
        self.provenance.push(origin.to_string());
    }

    /// `Z(trailing) · P · Z(leading)`, the unitary the block stands for.
    pub fn corrected_unitary(&self, sys: &SpinSystem) -> Result<Operator> {
        let p = program_unitary(&self.program, sys)?;
        Ok(&(&z_rotation(&self.trailing_z) * &p) * &z_rotation(&self.leading_z))
    }

    /// Appends `next` chronologically, commuting this block's trailing frame
    /// through `next`'s pulses.
    pub fn append(&mut self, next: CompiledBlock) -> Result<()> {
        if next.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: next.n(),
            });
        }
        if next.leading_z.iter().any(|&a| a != 0.0) {
            return Err(Error::InvalidGate(
                "cannot append a block with a leading frame".into(),
            ));
        }
        let offset = self.program.len();
        let shift: Vec<f64> = self.trailing_z.iter().map(|a| -a).collect();
        let (events, provenance, index_map) =
            shift_phases(&next.program.events, &next.provenance, &shift);
        self.program.events.extend(events);
        self.provenance.extend(provenance);
        for mut d in next.delays {
            d.first_event = offset + index_map[d.first_event];
            d.end_event = offset + index_map[d.end_event];
            self.delays.push(d);
        }
        for (t, a) in self.trailing_z.iter_mut().zip(next.trailing_z) {
            *t += a;
        }
        Ok(())
    }

    pub fn sidecar_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            n: usize,
            provenance: &'a [String],
            trailing_z: &'a [f64],
            leading_z: &'a [f64],
            bit_map: &'a [usize],
            delays: &'a [DelayDerivation],
        }
        Ok(serde_json::to_string_pretty(&Sidecar {
            n: self.n(),
            provenance: &self.provenance,
            trailing_z: &self.trailing_z,
            leading_z: &self.leading_z,
            bit_map: &self.bit_map,
            delays: &self.delays,
        })?)
    }
}

/// Adds `shift[spin]` to the phase of every pulse on that spin. Multi-spin
/// pulses whose spins receive different shifts are split into simultaneous
/// single-spin pulses. Returns the new events, their provenance, and a map
/// from old event index (plus the end) to new index.
fn shift_phases(
    events: &[PulseEvent],
    provenance: &[String],
    shift: &[f64],
) -> (Vec<PulseEvent>, Vec<String>, Vec<usize>) {
    let mut out = Vec::with_capacity(events.len());
    let mut prov = Vec::with_capacity(events.len());
    let mut map = Vec::with_capacity(events.len() + 1);
    for (e, origin) in events.iter().zip(provenance) {
        map.push(out.len());
        match e {
            PulseEvent::Pulse {
                targets,
                angle,
                phase,
            } => {
                let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
                for &t in targets {
                    let s = shift[t];
                    match groups.iter_mut().find(|g| g.0 == s) {
                        Some(g) => g.1.push(t),
                        None => groups.push((s, vec![t])),
                    }
                }
                for (s, ts) in groups {
                    out.push(PulseEvent::pulse(&ts, *angle, wrap_phase(phase + s)));
                    prov.push(origin.clone());
                }
            }
            d => {
                out.push(d.clone());
                prov.push(origin.clone());
            }
        }
    }
    map.push(out.len());
    (out, prov, map)
}

/// Maps a phase outside `[−π, π]` back into it; in-range values are untouched.
fn wrap_phase(phase: f64) -> f64 {
    if phase.abs() <= PI {
        phase
    } else {
        (phase + PI).rem_euclid(2.0 * PI) - PI
    }
}

/// Hadamard on `spin`.
///
/// Exact mode emits `(π/2)_y` then `(π)_x`, which is `−i·H`. The
/// input-aware form keeps only `(π/2)_y`; it acts like `H` on any state
/// that has no coherence on `spin`.
pub fn compile_a(spin: usize, n: usize, input_aware: bool) -> Result<CompiledBlock> {
    if spin >= n {
        return Err(Error::SpinOutOfRange { index: spin, n });
    }
    let mut b = CompiledBlock::empty(n);
    let origin = format!("A s{}", spin + 1);
    b.push(PulseEvent::pulse(&[spin], PI / 2.0, PI / 2.0), &origin);
    if !input_aware {
        b.push(PulseEvent::pulse(&[spin], PI, 0.0), &origin);
    }
    Ok(b)
}

/// Controlled phase `e^{iθ}` on `|1⟩_j|1⟩_k`.
///
/// `(π)_x^j − τ − (π)_{−x}^j` with `τ = θ/(2πJ_jk)` gives
/// `exp(+iθ I_z^j I_z^k)`; the remaining `z(θ/2)` on both spins is either
/// emitted as `(π/2)_y − (θ/2)_x − (π/2)_{−y}` on `{j, k}` or left in
/// `trailing_z`. The delay only evolves `J_jk`; other terms are handled by
/// [`insert_refocusing`].
pub fn compile_b(
    j: usize,
    k: usize,
    theta: f64,
    sys: &SpinSystem,
    emit_z: bool,
) -> Result<CompiledBlock> {
    let n = sys.n;
    for s in [j, k] {
        if s >= n {
            return Err(Error::SpinOutOfRange { index: s, n });
        }
    }
    if j == k {
        return Err(Error::InvalidGate(format!(
            "B gate on a single spin s{}",
            j + 1
        )));
    }
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::InvalidGate(format!(
            "B gate angle {theta} outside [0, π]"
        )));
    }
    let jhz = sys.coupling(j, k);
    if jhz == 0.0 {
        return Err(Error::ZeroCoupling(j, k));
    }
    // a negative coupling already has the sign the sandwich would supply
    let sandwich = jhz > 0.0;
    let tau = (theta / (2.0 * PI * jhz)).abs();
    let (lo, hi) = (j.min(k), j.max(k));
    let origin = format!("B s{},s{}", j + 1, k + 1);
    let mut b = CompiledBlock::empty(n);
    if sandwich {
        b.push(PulseEvent::pulse(&[j], PI, 0.0), &origin);
    }
    let first = b.program.len();
    b.push(
        PulseEvent::Delay {
            duration: tau,
            terms: EvolutionTerms::subset(&[(lo, hi)]),
            expr: None,
        },
        &origin,
    );
    b.delays.push(DelayDerivation {
        first_event: first,
        end_event: first + 1,
        gate: origin.clone(),
        active: Some((lo, hi)),
        j_hz: jhz,
        theta,
        duration_s: tau,
        formula: format!(
            "|theta/(2*pi*J{}{})| = |{theta}/(2*pi*{jhz})|",
            lo + 1,
            hi + 1
        ),
        z_phases: vec![0.0; n],
    });
    if sandwich {
        b.push(PulseEvent::pulse(&[j], PI, PI), &origin);
    }
    if emit_z {
        let z = format!("{origin} z");
        b.push(PulseEvent::pulse(&[j, k], PI / 2.0, PI / 2.0), &z);
        b.push(PulseEvent::pulse(&[j, k], theta / 2.0, 0.0), &z);
        b.push(PulseEvent::pulse(&[j, k], PI / 2.0, -PI / 2.0), &z);
    } else {
        b.trailing_z[j] = theta / 2.0;
        b.trailing_z[k] = theta / 2.0;
    }
    Ok(b)
}

/// Moves the trailing frame to the front of the block.
pub fn fold_z_rotations(block: &CompiledBlock) -> CompiledBlock {
    let (events, provenance, map) =
        shift_phases(&block.program.events, &block.provenance, &block.trailing_z);
    let delays = block
        .delays
        .iter()
        .cloned()
        .map(|mut d| {
            d.first_event = map[d.first_event];
            d.end_event = map[d.end_event];
            d
        })
        .collect();
    CompiledBlock {
        program: PulseProgram {
            n: block.n(),
            events,
        },
        trailing_z: vec![0.0; block.n()],
        leading_z: block
            .leading_z
            .iter()
            .zip(&block.trailing_z)
            .map(|(l, t)| l + t)
            .collect(),
        bit_map: block.bit_map.clone(),
        provenance,
        delays,
    }
}

/// Events for one interval of length `duration` in which only `active`
/// couples, evolving under `physical` terms, plus the per-spin z-angles it
/// leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct RefocusedInterval {
    pub events: Vec<PulseEvent>,
    pub z_phases: Vec<f64>,
}

/// Builds a refocused interval.
///
/// The active pair keeps a constant sign; each spectator follows its own
/// non-constant Walsh sign pattern over `2^r` equal segments, switched by
/// alternating `(π)_x`/`(π)_{−x}` pulses and closed with a final flip when
/// needed. Every product of two distinct patterns integrates to zero, so
/// spectator couplings and spectator shifts cancel exactly. The active
/// spins' shifts are reported in `z_phases`.
pub fn refocus_interval(
    sys: &SpinSystem,
    duration: f64,
    active: Option<(usize, usize)>,
    physical: &EvolutionTerms,
) -> Result<RefocusedInterval> {
    let n = sys.n;
    if duration < 0.0 {
        return Err(Error::NegativeDuration(duration));
    }
    if let Some((a, b)) = active {
        if a >= n || b >= n || a == b {
            return Err(Error::InvalidGate(format!(
                "active coupling ({a},{b}) invalid"
            )));
        }
    }
    let z_sign = |spin: usize| -> f64 {
        match active {
            Some((a, b)) if spin == a || spin == b => 1.0,
            _ => 0.0,
        }
    };
    let z_phases: Vec<f64> = (0..n)
        .map(|i| match physical {
            EvolutionTerms::Full => z_sign(i) * 2.0 * PI * sys.offsets_hz[i] * duration,
            _ => 0.0,
        })
        .collect();

    let spectators: Vec<usize> = (0..n)
        .filter(|&i| !matches!(active, Some((a, b)) if i == a || i == b))
        .filter(|&i| {
            // a spectator needs refocusing only if something it carries would evolve
            let couples = (0..n).any(|o| o != i && sys.coupling(i, o) != 0.0);
            let shifts = matches!(physical, EvolutionTerms::Full) && sys.offsets_hz[i] != 0.0;
            couples || shifts
        })
        .collect();
    if spectators.is_empty() || duration == 0.0 {
        return Ok(RefocusedInterval {
            events: vec![PulseEvent::delay(duration, physical.clone())],
            z_phases,
        });
    }
    let mut order = 0u32;
    while (1usize << order) - 1 < spectators.len() {
        order += 1;
    }
    if order > MAX_WALSH_ORDER {
        return Err(Error::InfeasibleRefocusing(format!(
            "{} spectator spins exceed the {}-segment sign patterns",
            spectators.len(),
            1 << MAX_WALSH_ORDER
        )));
    }
    let segments = 1usize << order;
    let seg = duration / segments as f64;
    let sign = |walsh: usize, g: usize| (walsh & g).count_ones() % 2 == 1;
    let mut flips = vec![0usize; spectators.len()];
    let mut events = Vec::new();
    let emit_flips = |events: &mut Vec<PulseEvent>, which: Vec<usize>, flips: &mut Vec<usize>| {
        // group simultaneous flips that share a phase
        let mut by_phase: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for s in which {
            by_phase[flips[s] % 2].push(spectators[s]);
            flips[s] += 1;
        }
        for (parity, spins) in by_phase.iter().enumerate() {
            if !spins.is_empty() {
                events.push(PulseEvent::pulse(
                    spins,
                    PI,
                    if parity == 0 { 0.0 } else { PI },
                ));
            }
        }
    };
    let mut pending = 0.0;
    for g in 0..segments {
        pending += seg;
        let which: Vec<usize> = if g + 1 < segments {
            (0..spectators.len())
                .filter(|&s| sign(s + 1, g) != sign(s + 1, g + 1))
                .collect()
        } else {
            (0..spectators.len())
                .filter(|&s| flips[s] % 2 == 1)
                .collect()
        };
        if which.is_empty() && g + 1 < segments {
            continue;
        }
        events.push(PulseEvent::delay(pending, physical.clone()));
        pending = 0.0;
        emit_flips(&mut events, which, &mut flips);
    }
    if pending > 0.0 {
        events.push(PulseEvent::delay(pending, physical.clone()));
    }
    Ok(RefocusedInterval { events, z_phases })
}

/// Replaces every delay annotated with a coupling subset by a refocused
/// interval evolving under `physical` terms.
///
/// Delays with `Full` or `Couplings` terms pass through untouched. The
/// z-angles the intervals leave behind are absorbed into the frame, so the
/// corrected unitary of the result equals that of the input.
pub fn insert_refocusing(
    block: &CompiledBlock,
    sys: &SpinSystem,
    physical: &EvolutionTerms,
) -> Result<CompiledBlock> {
    let n = block.n();
    if n != sys.n {
        return Err(Error::DimensionMismatch {
            expected: sys.n,
            found: n,
        });
    }
    if matches!(physical, EvolutionTerms::Subset(_)) {
        return Err(Error::InvalidGate(
            "refocused intervals evolve under full or couplings-only terms".into(),
        ));
    }
    let mut out = CompiledBlock {
        program: PulseProgram::new(n),
        trailing_z: vec![0.0; n],
        leading_z: block.leading_z.clone(),
        bit_map: block.bit_map.clone(),
        provenance: Vec::new(),
        delays: Vec::new(),
    };
    // frame: physical-so-far = Z(frame) · logical-so-far
    let mut frame = vec![0.0; n];
    let mut index_map = Vec::with_capacity(block.program.len() + 1);
    for (e, origin) in block.program.events.iter().zip(&block.provenance) {
        index_map.push(out.program.len());
        match e {
            PulseEvent::Pulse { .. } => {
                let (evs, provs, _) = shift_phases(
                    std::slice::from_ref(e),
                    std::slice::from_ref(origin),
                    &frame,
                );
                out.program.events.extend(evs);
                out.provenance.extend(provs);
            }
            PulseEvent::Delay {
                duration,
                terms: EvolutionTerms::Subset(active),
                ..
            } => {
                let pair = match active.as_slice() {
                    [] => None,
                    [p] => Some(*p),
                    _ => {
                        return Err(Error::InfeasibleRefocusing(format!(
                            "{} couplings active in one interval",
                            active.len()
                        )))
                    }
                };
                let interval = refocus_interval(sys, *duration, pair, physical)?;
                let label = match pair {
                    Some((a, b)) => format!("{origin} refocus J{}{}", a + 1, b + 1),
                    None => format!("{origin} decouple"),
                };
                let provs = vec![label; interval.events.len()];
                let (evs, provs, _) = shift_phases(&interval.events, &provs, &frame);
                out.program.events.extend(evs);
                out.provenance.extend(provs);
                for (f, z) in frame.iter_mut().zip(&interval.z_phases) {
                    *f += z;
                }
            }
            d => {
                out.program.push(d.clone());
                out.provenance.push(origin.clone());
            }
        }
    }
    index_map.push(out.program.len());
    for d in &block.delays {
        let mut d = d.clone();
        d.first_event = index_map[d.first_event];
        d.end_event = index_map[d.end_event];
        out.delays.push(d);
    }
    // recompute the z-phases each interval left, from the physical terms
    for d in &mut out.delays {
        if let Some(pair) = d.active {
            d.z_phases = refocus_interval(sys, d.duration_s, Some(pair), physical)?.z_phases;
        }
    }
    out.trailing_z = block
        .trailing_z
        .iter()
        .zip(&frame)
        .map(|(t, f)| t - f)
        .collect();
    Ok(out)
}

/// Options for [`compile_qft`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    /// Use `(π/2)_y` for the first and last A gates (valid on z-diagonal
    /// inputs) and fold the final frame to the front.
    pub input_aware: bool,
    /// Terms that evolve during emitted delays. `Subset` keeps each B-gate
    /// delay restricted to its own coupling and skips refocusing.
    pub delay_terms: EvolutionTerms,
    /// Emit the B-gate z-composites as pulses instead of tracking them in the frame.
    pub emit_z: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            input_aware: false,
            delay_terms: EvolutionTerms::Full,
            emit_z: false,
        }
    }
}

impl CompileOptions {
    pub fn input_aware() -> Self {
        Self {
            input_aware: true,
            ..Self::default()
        }
    }

    pub fn exact() -> Self {
        Self::default()
    }
}

/// Compiles one logical gate (qubit indices) onto the physical spins.
pub fn compile_gate(
    g: &Gate,
    sys: &SpinSystem,
    input_aware_a: bool,
    emit_z: bool,
) -> Result<CompiledBlock> {
    let n = sys.n;
    let spin = |q: usize| -> Result<usize> {
        if q >= n {
            Err(Error::InvalidGate(format!(
                "qubit {q} out of range for n={n}"
            )))
        } else {
            Ok(n - 1 - q)
        }
    };
    let mut block = match *g {
        Gate::A { j } => compile_a(spin(j)?, n, input_aware_a)?,
        Gate::B { j, k, theta } => compile_b(spin(j)?, spin(k)?, theta, sys, emit_z)?,
    };
    let label = match *g {
        Gate::A { j } => format!("A_{j}"),
        Gate::B { j, k, .. } => format!("B_{j}{k}"),
    };
    for p in &mut block.provenance {
        *p = format!("{label}: {p}");
    }
    for d in &mut block.delays {
        d.gate = format!("{label}: {}", d.gate);
    }
    Ok(block)
}

/// Full QFT pulse program for `sys.n` spins following the Coppersmith
/// order, with the output bit reversal left as a relabeling.
pub fn compile_qft(sys: &SpinSystem, opts: &CompileOptions) -> Result<CompiledBlock> {
    let n = sys.n;
    if n == 0 || n > MAX_COMPILE_QUBITS {
        return Err(Error::UnsupportedQubitCount(n));
    }
    let seq = coppersmith_sequence(n)?;
    let a_positions: Vec<usize> = seq
        .gates
        .iter()
        .enumerate()
        .filter(|(_, g)| matches!(g, Gate::A { .. }))
        .map(|(i, _)| i)
        .collect();
    let first_a = a_positions.first().copied();
    let last_a = a_positions.last().copied();

    let mut block = CompiledBlock::empty(n);
    for (i, g) in seq.gates.iter().enumerate() {
        let shortcut = opts.input_aware && (Some(i) == first_a || Some(i) == last_a);
        block.append(compile_gate(g, sys, shortcut, opts.emit_z)?)?;
    }
    if !matches!(opts.delay_terms, EvolutionTerms::Subset(_)) {
        block = insert_refocusing(&block, sys, &opts.delay_terms)?;
    }
    if opts.input_aware {
        block = fold_z_rotations(&block);
    }
    block.bit_map = (0..n).rev().collect();
    Ok(block)
}

/// The transcribed published program, resolved against the alanine system.
pub fn load_published_program() -> PulseProgram {
    load_published_program_for(&SpinSystem::alanine()).expect("bundled program parses")
}

/// The transcribed program with its `J` references resolved against `sys`.
pub fn load_published_program_for(sys: &SpinSystem) -> Result<PulseProgram> {
    parse_program(PUBLISHED_QFT3_PROGRAM, sys)
}

/// Intended unitary of an interval: active-coupling evolution followed by
/// the recorded z-angles.
pub fn interval_target(sys: &SpinSystem, d: &DelayDerivation) -> Result<Operator> {
    let terms = match d.active {
        Some((a, b)) => EvolutionTerms::subset(&[(a, b)]),
        None => EvolutionTerms::Subset(Vec::new()),
    };
    Ok(&z_rotation(&d.z_phases) * &free_evolution(sys, d.duration_s, &terms)?)
}
