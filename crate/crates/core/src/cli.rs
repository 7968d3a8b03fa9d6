//! Command-line front end.
//!
//! Every command computes all of its outputs in memory before touching the
//! file system, so a failing command leaves no partial files behind.
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 a requested
//! numerical check failed.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    resolved_groups, simulate_fid, spectrum, Acquisition, FidelityReport, Peak, Tomography,
    MAX_TOMOGRAPHY_SPINS,
};
use crate::compiler::{
    compile_qft, load_published_program_for, CompileOptions, CompiledBlock, MAX_COMPILE_QUBITS,
};
use crate::error::Error;
use crate::nmr::{thermal_state, EvolutionTerms, SpinSystem};
use crate::operator::{rotation, ComplexMatrixJson, DeviationMatrix, Operator};
use crate::pulse::{
    format_program, parse_program, simulate, PulseEvent, PulseProgram, SimulationMode,
};
use crate::qft::{bit_reversal, ideal_qft, StateVector, MAX_QFT_QUBITS};

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Verification(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Verification(_) => EXIT_VERIFICATION,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Verification(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(m) => Failure::Io(m),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(
    name = "qftsim",
    version,
    about = "Pulse-level NMR simulator for the quantum Fourier transform"
)]
struct Cli {
    /// Spin-system JSON; the bundled alanine system when omitted.
    #[arg(long, global = true, env = "QFTSIM_SYSTEM")]
    system: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the ideal QFT matrix and optionally apply it to a state.
    Ideal(IdealArgs),
    /// Compile the QFT into a pulse program with a JSON sidecar.
    Compile(CompileArgs),
    /// Simulate a program and export the final deviation matrix.
    Run(RunArgs),
    /// Acquire a spectrum of one spin after an optional program.
    Spectrum(SpectrumArgs),
    /// Compare two deviation matrices.
    Fidelity(FidelityArgs),
    /// Read out the full final deviation matrix with rotated spectra.
    Tomography(TomographyArgs),
}

#[derive(Args, Debug)]
struct IdealArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=MAX_QFT_QUBITS as i64))]
    n: u32,
    /// Amplitudes as a JSON array of reals or `{"re": [..], "im": [..]}`.
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompilerMode {
    /// Every gate is exact; the output carries a trailing z-frame.
    Exact,
    /// Shortened first and last Hadamards, valid for z-diagonal inputs.
    InputAware,
    /// The bundled published program for alanine.
    Published,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DelayTerms {
    /// Refocus against shifts and all couplings.
    Full,
    /// Refocus against couplings only.
    Couplings,
    /// Delays evolve only the active coupling; no refocusing.
    Active,
}

#[derive(Args, Debug)]
struct CompileArgs {
    /// Register size; must match the spin system.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value_t = CompilerMode::InputAware)]
    mode: CompilerMode,
    #[arg(long, value_enum, default_value_t = DelayTerms::Full)]
    delay_terms: DelayTerms,
    /// Emit z-rotations as pulses instead of tracking them in the frame.
    #[arg(long)]
    emit_z: bool,
    /// Check the program against the ideal QFT; exit 3 on failure.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulationArgs {
    /// `none`, `exact`, `input-aware`, `published`, or a program file
    /// (`.json` event list or pulse text). Defaults to `input-aware`, or
    /// `none` for `spectrum`.
    #[arg(long)]
    program: Option<String>,
    /// `thermal` or a deviation-matrix JSON file.
    #[arg(long, default_value = "thermal")]
    init: String,
    #[arg(long, value_enum, default_value_t = Mode::Unitary)]
    mode: Mode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Unitary,
    Relaxing,
}

impl From<Mode> for SimulationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Unitary => SimulationMode::Unitary,
            Mode::Relaxing => SimulationMode::Relaxing,
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    sim: SimulationArgs,
    /// Exit 3 when the frame-aligned fidelity falls below this value.
    #[arg(long)]
    min_fidelity: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Readout {
    None,
    X,
    Y,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    sim: SimulationArgs,
    /// Observed spin, counting from 1.
    #[arg(long)]
    spin: usize,
    /// Hard (π/2) pulse on all spins before acquisition.
    #[arg(long, value_enum, default_value_t = Readout::Y)]
    readout: Readout,
    #[arg(long, default_value_t = Acquisition::default().dwell_s)]
    dwell: f64,
    #[arg(long, default_value_t = Acquisition::default().points)]
    points: usize,
    /// Disable exp(−t/T2) line broadening.
    #[arg(long)]
    no_broadening: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script next to the data.
    #[arg(long, requires = "out")]
    gnuplot: bool,
}

#[derive(Args, Debug)]
struct FidelityArgs {
    theory: PathBuf,
    experiment: PathBuf,
    #[arg(long)]
    min_fidelity: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TomographyArgs {
    #[command(flatten)]
    sim: SimulationArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, requires = "out")]
    gnuplot: bool,
}

/// Where the program for a simulation comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProgramSource {
    None,
    Compiled(CompilerMode),
    File(PathBuf),
}

impl ProgramSource {
    fn parse(s: &str) -> CliResult<Self> {
        Ok(match s {
            "none" => ProgramSource::None,
            "exact" => ProgramSource::Compiled(CompilerMode::Exact),
            "input-aware" => ProgramSource::Compiled(CompilerMode::InputAware),
            "published" => ProgramSource::Compiled(CompilerMode::Published),
            path => {
                let p = PathBuf::from(path);
                if !p.is_file() {
                    return Err(Failure::Usage(format!(
                        "program `{path}` is neither a known name nor a file"
                    )));
                }
                ProgramSource::File(p)
            }
        })
    }
}

/// Initial deviation matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Thermal,
    File(PathBuf),
}

/// Fully validated inputs of a simulation command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: SpinSystem,
    pub mode: SimulationMode,
    pub program: ProgramSource,
    pub init: InitialState,
    pub acquisition: Acquisition,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    fn from_args(
        system: SpinSystem,
        sim: &SimulationArgs,
        default_program: &str,
        output: Option<PathBuf>,
    ) -> CliResult<Self> {
        let init = match sim.init.as_str() {
            "thermal" => InitialState::Thermal,
            path => {
                let p = PathBuf::from(path);
                if !p.is_file() {
                    return Err(Failure::Usage(format!(
                        "initial state file `{path}` not found"
                    )));
                }
                InitialState::File(p)
            }
        };
        if let Some(dir) = &output {
            check_output_dir(dir)?;
        }
        Ok(Self {
            system,
            mode: sim.mode.into(),
            program: ProgramSource::parse(sim.program.as_deref().unwrap_or(default_program))?,
            init,
            acquisition: Acquisition::default(),
            output,
        })
    }

    fn initial_state(&self) -> CliResult<DeviationMatrix> {
        match &self.init {
            InitialState::Thermal => Ok(thermal_state(&self.system)),
            InitialState::File(p) => {
                let rho = read_matrix(p)?;
                if rho.dim() != self.system.dim() {
                    return Err(Failure::Usage(format!(
                        "initial state is {0}x{0}, system needs {1}x{1}",
                        rho.dim(),
                        self.system.dim()
                    )));
                }
                Ok(rho)
            }
        }
    }

    /// The program and, for QFT programs, the ideal unitary it implements.
    fn program(&self) -> CliResult<(PulseProgram, Option<Operator>)> {
        let sys = &self.system;
        match &self.program {
            ProgramSource::None => Ok((PulseProgram::new(sys.n), None)),
            ProgramSource::Compiled(mode) => {
                let block = build_block(sys, *mode, &CompileOptions::default())?;
                Ok((block.program, Some(reordered_qft(sys.n)?)))
            }
            ProgramSource::File(path) => Ok((read_program(path, sys)?, None)),
        }
    }
}

fn check_output_dir(dir: &Path) -> CliResult<()> {
    if dir.exists() && !dir.is_dir() {
        return Err(Failure::Usage(format!(
            "output path `{}` is not a directory",
            dir.display()
        )));
    }
    if let Some(ro) = std::fs::metadata(dir)
        .ok()
        .map(|m| m.permissions().readonly())
    {
        if ro {
            return Err(Failure::Usage(format!(
                "output directory `{}` is not writable",
                dir.display()
            )));
        }
    }
    Ok(())
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read `{}`: {e}", path.display())))
}

fn read_matrix(path: &Path) -> CliResult<DeviationMatrix> {
    let json: ComplexMatrixJson = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let op = Operator::try_from(&json)?;
    Ok(DeviationMatrix::new(op)?)
}

fn read_program(path: &Path, sys: &SpinSystem) -> CliResult<PulseProgram> {
    let text = read_text(path)?;
    let program = if path.extension().is_some_and(|e| e == "json") {
        let events: Vec<PulseEvent> = serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        PulseProgram::with_events(sys.n, events)?
    } else {
        parse_program(&text, sys)?
    };
    Ok(program)
}

fn load_system(path: Option<&Path>) -> CliResult<SpinSystem> {
    match path {
        None => Ok(SpinSystem::alanine()),
        Some(p) => {
            let text = read_text(p)?;
            Ok(SpinSystem::from_json(&text)?)
        }
    }
}

/// `P_rev · QFT`: the operation the compiled programs implement on the
/// physical register.
fn reordered_qft(n: usize) -> CliResult<Operator> {
    Ok(&bit_reversal(n)? * &ideal_qft(n)?)
}

fn build_block(
    sys: &SpinSystem,
    mode: CompilerMode,
    base: &CompileOptions,
) -> CliResult<CompiledBlock> {
    match mode {
        CompilerMode::Published => {
            if sys.n != 3 {
                return Err(Failure::Usage(format!(
                    "the published program needs 3 spins, system has {}",
                    sys.n
                )));
            }
            let program = load_published_program_for(sys)?;
            let mut block = CompiledBlock::empty(3);
            block.provenance = vec!["published program".to_string(); program.len()];
            block.program = program;
            block.bit_map = vec![2, 1, 0];
            Ok(block)
        }
        CompilerMode::Exact | CompilerMode::InputAware => {
            if sys.n > MAX_COMPILE_QUBITS {
                return Err(Failure::Usage(format!(
                    "compilation supports at most {MAX_COMPILE_QUBITS} spins"
                )));
            }
            let opts = CompileOptions {
                input_aware: mode == CompilerMode::InputAware,
                ..base.clone()
            };
            Ok(compile_qft(sys, &opts)?)
        }
    }
}

/// Files to write once every computation has succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, String)>,
    stdout: String,
}

impl Outputs {
    fn file(&mut self, dir: &Option<PathBuf>, name: &str, content: String) {
        if let Some(d) = dir {
            self.files.push((d.join(name), content));
        }
    }

    fn commit(self, stdout: &mut dyn Write) -> CliResult<()> {
        let mut written: Vec<PathBuf> = Vec::new();
        for (path, content) in &self.files {
            let result = (|| -> std::io::Result<()> {
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                let tmp = path.with_extension("partial");
                std::fs::write(&tmp, content)?;
                std::fs::rename(&tmp, path)
            })();
            if let Err(e) = result {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                let _ = std::fs::remove_file(path.with_extension("partial"));
                return Err(Failure::Io(format!(
                    "cannot write `{}`: {e}",
                    path.display()
                )));
            }
            written.push(path.clone());
        }
        stdout
            .write_all(self.stdout.as_bytes())
            .map_err(|e| Failure::Io(e.to_string()))
    }
}

fn json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn matrix_json(op: &Operator) -> CliResult<String> {
    json(&ComplexMatrixJson::from(op))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StateJson {
    Real(Vec<f64>),
    Complex { re: Vec<f64>, im: Vec<f64> },
}

fn read_state(path: &Path, n: usize) -> CliResult<StateVector> {
    let parsed: StateJson = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let amps: Vec<Complex64> = match parsed {
        StateJson::Real(v) => v.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
        StateJson::Complex { re, im } => {
            if re.len() != im.len() {
                return Err(Failure::Usage(
                    "state `re` and `im` differ in length".into(),
                ));
            }
            re.into_iter()
                .zip(im)
                .map(|(r, i)| Complex64::new(r, i))
                .collect()
        }
    };
    if amps.len() != 1 << n {
        return Err(Failure::Usage(format!(
            "state has {} amplitudes, expected {}",
            amps.len(),
            1 << n
        )));
    }
    let state = StateVector::new(amps)?;
    if !state.is_normalized() {
        return Err(Failure::Usage(format!(
            "state is not normalized (norm² = {})",
            state.norm_sqr()
        )));
    }
    Ok(state)
}

fn cmd_ideal(args: &IdealArgs) -> CliResult<Outputs> {
    #[derive(Serialize)]
    struct StateOut {
        re: Vec<f64>,
        im: Vec<f64>,
        probabilities: Vec<f64>,
    }
    #[derive(Serialize)]
    struct IdealOut {
        n: usize,
        matrix: ComplexMatrixJson,
        #[serde(skip_serializing_if = "Option::is_none")]
        output_state: Option<StateOut>,
    }
    let n = args.n as usize;
    if let Some(dir) = &args.out {
        check_output_dir(dir)?;
    }
    let state = args
        .state
        .as_deref()
        .map(|p| read_state(p, n))
        .transpose()?;
    let u = ideal_qft(n)?;
    let output_state = match state {
        Some(s) => {
            let out = s.apply(&u)?;
            Some(StateOut {
                re: out.amplitudes().iter().map(|a| a.re).collect(),
                im: out.amplitudes().iter().map(|a| a.im).collect(),
                probabilities: out.probabilities(),
            })
        }
        None => None,
    };
    let text = json(&IdealOut {
        n,
        matrix: ComplexMatrixJson::from(&u),
        output_state,
    })?;
    let mut out = Outputs::default();
    out.file(&args.out, &format!("qft{n}.json"), text.clone());
    out.stdout = text;
    Ok(out)
}

fn delay_terms(t: DelayTerms) -> EvolutionTerms {
    match t {
        DelayTerms::Full => EvolutionTerms::Full,
        DelayTerms::Couplings => EvolutionTerms::Couplings,
        DelayTerms::Active => EvolutionTerms::Subset(Vec::new()),
    }
}

/// Worst-case check of a compiled block against the reordered QFT.
fn verify_block(block: &CompiledBlock, sys: &SpinSystem, mode: CompilerMode) -> CliResult<String> {
    let target = reordered_qft(sys.n)?;
    match mode {
        CompilerMode::Exact => {
            let dev = block.corrected_unitary(sys)?.phase_aligned_diff(&target);
            if dev > 1e-9 {
                return Err(Failure::Verification(format!(
                    "compiled unitary deviates by {dev:e}"
                )));
            }
            Ok(format!("max deviation from reordered QFT: {dev:e}\n"))
        }
        CompilerMode::InputAware | CompilerMode::Published => {
            let rho = thermal_state(sys);
            let out = simulate(&block.program, sys, &rho, SimulationMode::Unitary)?;
            let report = FidelityReport::compute(&rho.conjugate_by(&target), &out)?;
            let (value, bound) = if mode == CompilerMode::InputAware {
                (report.fidelity, 0.999)
            } else {
                (report.fidelity_aligned, 0.99)
            };
            if value < bound {
                return Err(Failure::Verification(format!(
                    "thermal-state fidelity {value} below {bound}"
                )));
            }
            Ok(format!("thermal-state fidelity: {value}\n"))
        }
    }
}

fn cmd_compile(args: &CompileArgs, sys: &SpinSystem) -> CliResult<Outputs> {
    if let Some(n) = args.n {
        if n != sys.n {
            return Err(Failure::Usage(format!(
                "--n {n} does not match the {}-spin system",
                sys.n
            )));
        }
    }
    if let Some(dir) = &args.out {
        check_output_dir(dir)?;
    }
    let base = CompileOptions {
        input_aware: false,
        delay_terms: delay_terms(args.delay_terms),
        emit_z: args.emit_z,
    };
    let block = build_block(sys, args.mode, &base)?;
    let report = if args.verify {
        Some(verify_block(&block, sys, args.mode)?)
    } else {
        None
    };
    let text = format_program(&block.program);
    let sidecar = block.sidecar_json()? + "\n";
    let stem = format!("qft{}", sys.n);
    let mut out = Outputs::default();
    out.file(&args.out, &format!("{stem}.qp"), text.clone());
    out.file(&args.out, &format!("{stem}.sidecar.json"), sidecar);
    out.stdout = match report {
        Some(r) if args.out.is_some() => r,
        Some(r) => text + &r,
        None if args.out.is_some() => String::new(),
        None => text,
    };
    Ok(out)
}

struct Simulated {
    initial: DeviationMatrix,
    final_state: DeviationMatrix,
    theory: Option<DeviationMatrix>,
}

fn run_simulation(cfg: &RunConfig) -> CliResult<Simulated> {
    let initial = cfg.initial_state()?;
    let (program, ideal) = cfg.program()?;
    let final_state = simulate(&program, &cfg.system, &initial, cfg.mode)?;
    let theory = ideal.map(|u| initial.conjugate_by(&u));
    Ok(Simulated {
        initial,
        final_state,
        theory,
    })
}

fn check_min_fidelity(report: &FidelityReport, min: Option<f64>) -> CliResult<()> {
    match min {
        Some(m) if report.fidelity_aligned < m => Err(Failure::Verification(format!(
            "frame-aligned fidelity {} below {m}",
            report.fidelity_aligned
        ))),
        _ => Ok(()),
    }
}

fn cmd_run(args: &RunArgs, sys: SpinSystem) -> CliResult<Outputs> {
    let cfg = RunConfig::from_args(sys, &args.sim, "input-aware", args.out.clone())?;
    let sim = run_simulation(&cfg)?;
    let mut out = Outputs::default();
    out.file(
        &cfg.output,
        "rho_final.json",
        matrix_json(sim.final_state.operator())?,
    );
    match &sim.theory {
        Some(theory) => {
            let report = FidelityReport::compute(theory, &sim.final_state)?;
            let report_text = json(&report)?;
            out.file(
                &cfg.output,
                "rho_theory.json",
                matrix_json(theory.operator())?,
            );
            out.file(&cfg.output, "report.json", report_text.clone());
            check_min_fidelity(&report, args.min_fidelity)?;
            out.stdout = report_text;
        }
        None => {
            if args.min_fidelity.is_some() {
                return Err(Failure::Usage(
                    "--min-fidelity needs a QFT program with a known target".into(),
                ));
            }
            out.stdout = matrix_json(sim.final_state.operator())?;
        }
    }
    Ok(out)
}

fn readout_pulse(readout: Readout, n: usize) -> CliResult<Option<Operator>> {
    let phase = match readout {
        Readout::None => return Ok(None),
        Readout::X => 0.0,
        Readout::Y => std::f64::consts::FRAC_PI_2,
    };
    let all: Vec<usize> = (0..n).collect();
    Ok(Some(rotation(&all, std::f64::consts::FRAC_PI_2, phase, n)?))
}

#[derive(Serialize)]
struct PeaksOut<'a> {
    spin: usize,
    resolution_hz: f64,
    peaks: &'a [Peak],
    /// Peaks grouped by half-height resolution.
    groups: Vec<Vec<f64>>,
}

fn cmd_spectrum(args: &SpectrumArgs, sys: SpinSystem) -> CliResult<Outputs> {
    let mut cfg = RunConfig::from_args(sys, &args.sim, "none", args.out.clone())?;
    cfg.acquisition = Acquisition {
        dwell_s: args.dwell,
        points: args.points,
        broadening: !args.no_broadening,
    };
    cfg.acquisition.validate()?;
    if args.spin == 0 || args.spin > cfg.system.n {
        return Err(Failure::Usage(format!(
            "--spin must be in 1..={}",
            cfg.system.n
        )));
    }
    let spin = args.spin - 1;
    let mut rho = run_simulation(&cfg)?.final_state;
    if let Some(u) = readout_pulse(args.readout, cfg.system.n)? {
        rho = rho.conjugate_by(&u);
    }
    let fid = simulate_fid(&rho, &cfg.system, spin, &cfg.acquisition)?;
    let result = spectrum(&fid, &cfg.acquisition, spin)?;
    let groups = resolved_groups(&result)
        .into_iter()
        .map(|g| g.iter().map(|p| p.freq_hz).collect())
        .collect();
    let peaks = json(&PeaksOut {
        spin: args.spin,
        resolution_hz: cfg.acquisition.resolution_hz(),
        peaks: &result.peaks,
        groups,
    })?;
    let stem = format!("spectrum_s{}", args.spin);
    let mut out = Outputs::default();
    out.file(&cfg.output, &format!("{stem}.csv"), result.to_csv());
    out.file(
        &cfg.output,
        &format!("peaks_s{}.json", args.spin),
        peaks.clone(),
    );
    if args.gnuplot {
        out.file(
            &cfg.output,
            &format!("{stem}.gp"),
            spectrum_gnuplot(&stem, args.spin),
        );
    }
    out.stdout = peaks;
    Ok(out)
}

fn spectrum_gnuplot(stem: &str, spin: usize) -> String {
    format!(
        "set datafile separator ','\n\
         set key off\n\
         set xlabel 'frequency (Hz)'\n\
         set ylabel 'magnitude'\n\
         set title 'spin {spin}'\n\
         plot '{stem}.csv' every ::1 using 1:4 with lines\n"
    )
}

fn cmd_fidelity(args: &FidelityArgs) -> CliResult<Outputs> {
    if let Some(file) = &args.out {
        if file.is_dir() {
            return Err(Failure::Usage(format!(
                "`{}` is a directory",
                file.display()
            )));
        }
    }
    let theory = read_matrix(&args.theory)?;
    let exp = read_matrix(&args.experiment)?;
    let report = FidelityReport::compute(&theory, &exp)?;
    let text = json(&report)?;
    let mut out = Outputs::default();
    if let Some(file) = &args.out {
        out.files.push((file.clone(), text.clone()));
    }
    check_min_fidelity(&report, args.min_fidelity)?;
    out.stdout = text;
    Ok(out)
}

/// Matrix as whitespace-separated rows, for gnuplot `matrix` plots.
fn matrix_dat(op: &Operator, part: fn(Complex64) -> f64) -> String {
    let mut s = String::new();
    for r in 0..op.dim() {
        let row: Vec<String> = (0..op.dim())
            .map(|c| part(op.get(r, c)).to_string())
            .collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

fn tomography_gnuplot() -> String {
    let mut s =
        String::from("set key off\nset hidden3d\nset xyplane 0\nset multiplot layout 3,2\n");
    for name in ["theory", "reconstructed", "difference"] {
        for part in ["re", "im"] {
            let _ = writeln!(
                s,
                "set title '{name} ({part})'\nsplot '{name}_{part}.dat' matrix with lines"
            );
        }
    }
    s.push_str("unset multiplot\n");
    s
}

fn cmd_tomography(args: &TomographyArgs, sys: SpinSystem) -> CliResult<Outputs> {
    #[derive(Serialize)]
    struct TomographyOut {
        settings: usize,
        rank: usize,
        max_error_vs_simulated: f64,
        reconstructed: ComplexMatrixJson,
        #[serde(skip_serializing_if = "Option::is_none")]
        theory: Option<ComplexMatrixJson>,
        #[serde(skip_serializing_if = "Option::is_none")]
        report: Option<FidelityReport>,
    }
    let cfg = RunConfig::from_args(sys, &args.sim, "input-aware", args.out.clone())?;
    if cfg.system.n > MAX_TOMOGRAPHY_SPINS {
        return Err(Failure::Usage(format!(
            "tomography supports at most {MAX_TOMOGRAPHY_SPINS} spins"
        )));
    }
    let sim = run_simulation(&cfg)?;
    let tomo = Tomography::new(cfg.system.n)?;
    let measured = tomo.measure(&sim.final_state)?;
    let rec = tomo.reconstruct(&measured)?;
    let err = rec.operator().max_abs_diff(sim.final_state.operator());
    let theory = sim.theory.clone().unwrap_or_else(|| sim.initial.clone());
    let report = sim
        .theory
        .as_ref()
        .map(|t| FidelityReport::compute(t, &rec))
        .transpose()?;
    let text = json(&TomographyOut {
        settings: measured.len(),
        rank: tomo.rank(),
        max_error_vs_simulated: err,
        reconstructed: ComplexMatrixJson::from(rec.operator()),
        theory: sim
            .theory
            .as_ref()
            .map(|t| ComplexMatrixJson::from(t.operator())),
        report,
    })?;
    let mut out = Outputs::default();
    out.file(&cfg.output, "tomography.json", text.clone());
    if args.gnuplot {
        let diff = rec.operator() - theory.operator();
        for (name, op) in [
            ("theory", theory.operator()),
            ("reconstructed", rec.operator()),
            ("difference", &diff),
        ] {
            out.file(
                &cfg.output,
                &format!("{name}_re.dat"),
                matrix_dat(op, |z| z.re),
            );
            out.file(
                &cfg.output,
                &format!("{name}_im.dat"),
                matrix_dat(op, |z| z.im),
            );
        }
        out.file(&cfg.output, "tomography.gp", tomography_gnuplot());
    }
    out.stdout = text;
    Ok(out)
}

fn dispatch(cli: &Cli) -> CliResult<Outputs> {
    let system = || load_system(cli.system.as_deref());
    match &cli.command {
        Command::Ideal(a) => cmd_ideal(a),
        Command::Compile(a) => cmd_compile(a, &system()?),
        Command::Run(a) => cmd_run(a, system()?),
        Command::Spectrum(a) => cmd_spectrum(a, system()?),
        Command::Fidelity(a) => cmd_fidelity(a),
        Command::Tomography(a) => cmd_tomography(a, system()?),
    }
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match dispatch(&cli).and_then(|out| out.commit(stdout)) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.code()
        }
    }
}
