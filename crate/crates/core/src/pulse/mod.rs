//! Pulse programs and their execution against a [`SpinSystem`].
//!
//! Events are chronological; the net unitary is the product with the first
//! event on the right. Pulses are instantaneous, so relaxation only acts
//! during delays.

mod expr;
mod text;

pub use expr::{eval_expr, parse_expr, Expr};
pub use text::{format_program, parse_program};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nmr::{free_evolution, relax, EvolutionTerms, SpinSystem};
use crate::operator::{rotation, DeviationMatrix, Operator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PulseEvent {
    /// Simultaneous rotation of `targets` by `angle` about `cos φ x + sin φ y`.
    Pulse {
        targets: Vec<usize>,
        angle: f64,
        phase: f64,
    },
    Delay {
        duration: f64,
        #[serde(default)]
        terms: EvolutionTerms,
        /// Symbolic source of the duration, e.g. `1/(8*J12)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expr: Option<String>,
    },
}

impl PulseEvent {
    pub fn pulse(targets: &[usize], angle: f64, phase: f64) -> Self {
        let mut targets = targets.to_vec();
        targets.sort_unstable();
        targets.dedup();
        PulseEvent::Pulse {
            targets,
            angle,
            phase,
        }
    }

    pub fn delay(duration: f64, terms: EvolutionTerms) -> Self {
        PulseEvent::Delay {
            duration,
            terms,
            expr: None,
        }
    }

    pub fn is_delay(&self) -> bool {
        matches!(self, PulseEvent::Delay { .. })
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            PulseEvent::Pulse {
                targets,
                angle,
                phase,
            } => {
                if targets.is_empty() {
                    return Err(Error::InvalidGate("pulse without targets".into()));
                }
                if let Some(&t) = targets.iter().find(|&&t| t >= n) {
                    return Err(Error::SpinOutOfRange { index: t, n });
                }
                if !(angle.is_finite() && phase.is_finite())
                    || *angle <= -2.0 * PI
                    || *angle > 2.0 * PI
                {
                    return Err(Error::InvalidGate(format!(
                        "pulse angle {angle} outside (-2π, 2π]"
                    )));
                }
                Ok(())
            }
            PulseEvent::Delay {
                duration, terms, ..
            } => {
                if !duration.is_finite() || *duration < 0.0 {
                    return Err(Error::NegativeDuration(*duration));
                }
                terms.check(n)
            }
        }
    }

    /// Unitary of this event alone.
    pub fn unitary(&self, sys: &SpinSystem) -> Result<Operator> {
        match self {
            PulseEvent::Pulse {
                targets,
                angle,
                phase,
            } => rotation(targets, *angle, *phase, sys.n),
            PulseEvent::Delay {
                duration, terms, ..
            } => free_evolution(sys, *duration, terms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    pub n: usize,
    pub events: Vec<PulseEvent>,
}

impl PulseProgram {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            events: Vec::new(),
        }
    }

    pub fn with_events(n: usize, events: Vec<PulseEvent>) -> Result<Self> {
        let p = Self { n, events };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.events.iter().try_for_each(|e| e.validate(self.n))
    }

    pub fn push(&mut self, event: PulseEvent) {
        self.events.push(event);
    }

    pub fn pulse(&mut self, targets: &[usize], angle: f64, phase: f64) {
        self.push(PulseEvent::pulse(targets, angle, phase));
    }

    pub fn delay(&mut self, duration: f64, terms: EvolutionTerms) {
        self.push(PulseEvent::delay(duration, terms));
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn pulse_count(&self) -> usize {
        self.events.iter().filter(|e| !e.is_delay()).count()
    }

    pub fn total_delay(&self) -> f64 {
        self.events
            .iter()
            .map(|e| match e {
                PulseEvent::Delay { duration, .. } => *duration,
                PulseEvent::Pulse { .. } => 0.0,
            })
            .sum()
    }

    /// Time-reversed program with every pulse angle negated. For programs
    /// without delays this is the inverse.
    pub fn reversed_inverse(&self) -> Self {
        let events = self
            .events
            .iter()
            .rev()
            .map(|e| match e {
                PulseEvent::Pulse {
                    targets,
                    angle,
                    phase,
                } => PulseEvent::Pulse {
                    targets: targets.clone(),
                    angle: -angle,
                    phase: *phase,
                },
                d => d.clone(),
            })
            .collect();
        Self { n: self.n, events }
    }

    /// Copy with every delay's term selector replaced.
    pub fn with_delay_terms(&self, terms: &EvolutionTerms) -> Self {
        let events = self
            .events
            .iter()
            .map(|e| match e {
                PulseEvent::Delay { duration, expr, .. } => PulseEvent::Delay {
                    duration: *duration,
                    terms: terms.clone(),
                    expr: expr.clone(),
                },
                p => p.clone(),
            })
            .collect();
        Self { n: self.n, events }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.events)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Exactly unitary evolution.
    #[default]
    Unitary,
    /// Delays are followed by phenomenological T1/T2 relaxation.
    Relaxing,
}

fn check_system(p: &PulseProgram, sys: &SpinSystem) -> Result<()> {
    if p.n != sys.n {
        return Err(Error::DimensionMismatch {
            expected: sys.n,
            found: p.n,
        });
    }
    p.validate()
}

/// Net unitary of the program, events composed right to left.
pub fn program_unitary(p: &PulseProgram, sys: &SpinSystem) -> Result<Operator> {
    check_system(p, sys)?;
    let mut u = Operator::identity(sys.dim());
    for e in &p.events {
        u = &e.unitary(sys)? * &u;
    }
    Ok(u)
}

/// Event-by-event evolution of a deviation matrix.
pub fn simulate(
    p: &PulseProgram,
    sys: &SpinSystem,
    rho0: &DeviationMatrix,
    mode: SimulationMode,
) -> Result<DeviationMatrix> {
    check_system(p, sys)?;
    if rho0.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: rho0.dim(),
        });
    }
    let mut rho = rho0.clone();
    for e in &p.events {
        rho = rho.conjugate_by(&e.unitary(sys)?);
        if let (SimulationMode::Relaxing, PulseEvent::Delay { duration, .. }) = (mode, e) {
            rho = relax(&rho, sys, *duration)?;
        }
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_spin() -> SpinSystem {
        SpinSystem::ideal(vec![3.0], vec![vec![0.0]]).unwrap()
    }

    #[test]
    fn empty_program_is_identity() {
        let sys = SpinSystem::alanine();
        let p = PulseProgram::new(3);
        assert!(
            program_unitary(&p, &sys)
                .unwrap()
                .max_abs_diff(&Operator::identity(8))
                < 1e-15
        );
        let rho = crate::nmr::thermal_state(&sys);
        assert_eq!(
            simulate(&p, &sys, &rho, SimulationMode::Relaxing).unwrap(),
            rho
        );
    }

    #[test]
    fn two_pulse_hadamard() {
        let mut p = PulseProgram::new(1);
        p.pulse(&[0], PI / 2.0, PI / 2.0);
        p.pulse(&[0], PI, 0.0);
        let u = program_unitary(&p, &one_spin()).unwrap();
        assert!(u.max_abs_diff(&Operator::hadamard().scale(-crate::operator::I)) < 1e-12);
    }

    #[test]
    fn single_delay_matches_free_evolution() {
        let sys = SpinSystem::alanine();
        let mut p = PulseProgram::new(3);
        p.delay(0.0123, EvolutionTerms::Full);
        let want = free_evolution(&sys, 0.0123, &EvolutionTerms::Full).unwrap();
        assert!(program_unitary(&p, &sys).unwrap().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn validation() {
        let sys = SpinSystem::alanine();
        let mut p = PulseProgram::new(3);
        p.pulse(&[3], PI, 0.0);
        assert!(program_unitary(&p, &sys).is_err());
        let mut p = PulseProgram::new(3);
        p.pulse(&[0], -2.0 * PI, 0.0);
        assert!(p.validate().is_err());
        let mut p = PulseProgram::new(3);
        p.delay(-1.0, EvolutionTerms::Full);
        assert!(matches!(p.validate(), Err(Error::NegativeDuration(_))));
        assert!(program_unitary(&PulseProgram::new(2), &sys).is_err());
    }

    #[test]
    fn refocusing_two_spin_couplings() {
        let sys =
            SpinSystem::ideal(vec![100.0, -40.0], vec![vec![0.0, 54.0], vec![54.0, 0.0]]).unwrap();
        let t = 0.0173;
        let mut p = PulseProgram::new(2);
        p.delay(t / 2.0, EvolutionTerms::Couplings);
        p.pulse(&[1], PI, 0.0);
        p.delay(t / 2.0, EvolutionTerms::Couplings);
        p.pulse(&[1], PI, 0.0);
        let u = program_unitary(&p, &sys).unwrap();
        assert!(u.phase_aligned_diff(&Operator::identity(4)) < 1e-12);
    }

    #[test]
    fn relaxing_with_infinite_times_matches_unitary() {
        let sys = SpinSystem::alanine().without_relaxation();
        let mut p = PulseProgram::new(3);
        p.pulse(&[0, 2], PI / 2.0, 0.3);
        p.delay(0.01, EvolutionTerms::Full);
        p.pulse(&[1], PI, PI / 2.0);
        let rho = crate::nmr::thermal_state(&sys);
        let a = simulate(&p, &sys, &rho, SimulationMode::Unitary).unwrap();
        let b = simulate(&p, &sys, &rho, SimulationMode::Relaxing).unwrap();
        assert!(a.operator().max_abs_diff(b.operator()) < 1e-15);
    }
}
