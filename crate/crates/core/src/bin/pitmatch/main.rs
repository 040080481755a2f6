//! `pitmatch` command-line front end.
//!
//! Exit codes: 0 success, 2 input error, 3 guard or limit exceeded, 4 I/O
//! failure. Machine-readable output goes to stdout; stderr carries only
//! diagnostics.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pitmatch::assignment::{AssignmentError, CostMatrix, SinkhornConfig, Solver, DEFAULT_GUARD};
use pitmatch::bench::{self, BenchError, SweepOptions};
use pitmatch::metrics::{
    hungarian_loss, pit_loss_guarded, si_sdr_improvement, MetricError, SeparationInstance,
};
use pitmatch::mixture::{
    generate_sources, mix, read_wav, truncate_to_min, write_wav, MixError, MixSpec, SnrRange,
    SourceKind, WavError,
};
use pitmatch::signal::AudioSignal;

#[derive(Parser)]
#[command(
    name = "pitmatch",
    version,
    about = "Optimal permutation matching for source separation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an assignment problem from a matrix file (text or JSON).
    Solve {
        matrix: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverArg::Hungarian)]
        solver: SolverArg,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Largest C the brute-force solver accepts.
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: usize,
        #[arg(long, default_value_t = 200)]
        sinkhorn_iterations: usize,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
    },
    /// Match estimate WAVs to target WAVs and report SI-SNR / SI-SDRi.
    Evaluate {
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        targets: Vec<PathBuf>,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        estimates: Vec<PathBuf>,
        #[arg(long)]
        mixture: PathBuf,
        /// `bruteforce` evaluates classic PIT; sinkhorn is not offered here.
        #[arg(long, value_enum, default_value_t = SolverArg::Hungarian)]
        solver: SolverArg,
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: usize,
    },
    /// Generate synthetic sources, mix them and write WAVs plus a manifest.
    Mix {
        #[arg(long, short = 'c')]
        num_sources: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        duration: f64,
        #[arg(long, default_value_t = 8000)]
        sample_rate: u32,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        snr_low: f64,
        #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
        snr_high: f64,
        /// Source kinds (sine, chirp, noise, file:PATH), cycled over the
        /// sources. Defaults to sine,chirp,noise.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<SourceKind>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Time the solvers over random matrices, or profile Hungarian iterations.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
        c_values: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Report mean Hungarian iterations against difficulty instead of timings.
        #[arg(long)]
        profile: bool,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        difficulties: Vec<f64>,
    },
    /// Reorder a matrix by matched-pair cost and export it as JSON (and PGM).
    Confusion {
        matrix: PathBuf,
        /// Also write a binary PGM image here.
        #[arg(long)]
        pgm: Option<PathBuf>,
        /// Pixels per matrix cell in the PGM.
        #[arg(long, default_value_t = 16)]
        cell: usize,
    },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SolverArg {
    Hungarian,
    Bruteforce,
    Sinkhorn,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Limit(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Limit(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Limit(m) | CliError::Io(m) => m,
        }
    }
}

impl From<AssignmentError> for CliError {
    fn from(e: AssignmentError) -> Self {
        match e {
            AssignmentError::TooLarge { .. } | AssignmentError::CountOutOfRange { .. } => {
                CliError::Limit(e.to_string())
            }
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Assignment(a) => a.into(),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<MixError> for CliError {
    fn from(e: MixError) -> Self {
        match e {
            MixError::SourceFile {
                source: WavError::Io(_),
                ..
            } => CliError::Io(e.to_string()),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io(_) | BenchError::Csv(_) => CliError::Io(e.to_string()),
            BenchError::Solver { source, .. } => source.into(),
            e => CliError::Input(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn wav_error(path: &Path, e: WavError) -> CliError {
    match e {
        WavError::Io(io) => io_error(path, io),
        e => CliError::Input(format!("{}: {e}", path.display())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve {
            matrix,
            solver,
            format,
            guard,
            sinkhorn_iterations,
            temperature,
        } => cmd_solve(
            &matrix,
            solver,
            format,
            guard,
            sinkhorn_iterations,
            temperature,
        ),
        Command::Evaluate {
            targets,
            estimates,
            mixture,
            solver,
            guard,
        } => cmd_evaluate(&targets, &estimates, &mixture, solver, guard),
        Command::Mix {
            num_sources,
            seed,
            duration,
            sample_rate,
            snr_low,
            snr_high,
            kinds,
            out_dir,
        } => {
            let spec = MixSpec {
                num_sources,
                sample_rate,
                duration,
                snr_range: SnrRange {
                    low: snr_low,
                    high: snr_high,
                },
                seed,
            };
            cmd_mix(&spec, &kinds, &out_dir)
        }
        Command::Bench {
            c_values,
            trials,
            seed,
            guard,
            format,
            profile,
            difficulties,
        } => {
            if profile {
                cmd_profile(&c_values, &difficulties, trials, seed, format)
            } else {
                cmd_bench(&c_values, trials, seed, guard, format)
            }
        }
        Command::Confusion { matrix, pgm, cell } => cmd_confusion(&matrix, pgm.as_deref(), cell),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn emit(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| {
            if text.ends_with('\n') {
                Ok(())
            } else {
                out.write_all(b"\n")
            }
        })
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn emit_json(value: &impl Serialize) -> Result<(), CliError> {
    emit(&serde_json::to_string(value).expect("output serialises"))
}

fn load_matrix(path: &Path) -> Result<CostMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    CostMatrix::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn cmd_solve(
    path: &Path,
    solver: SolverArg,
    format: Format,
    guard: usize,
    sinkhorn_iterations: usize,
    temperature: f64,
) -> Result<(), CliError> {
    let matrix = load_matrix(path)?;
    let solver = match solver {
        SolverArg::Hungarian => Solver::Hungarian,
        SolverArg::Bruteforce => Solver::BruteForce { guard },
        SolverArg::Sinkhorn => {
            Solver::Sinkhorn(SinkhornConfig::new(sinkhorn_iterations, temperature)?)
        }
    };
    let result = solver.solve(&matrix)?;
    match format {
        Format::Json => emit(&result.to_json()),
        Format::Text => emit(&format!(
            "solver: {}\npermutation: {:?}\ntotal_cost: {}\niterations: {}\nelapsed_ns: {}\n",
            solver.name(),
            result.permutation.as_slice(),
            result.total_cost,
            result.iterations,
            result.elapsed_ns
        )),
        Format::Csv => emit(&format!(
            "permutation,total_cost,iterations,elapsed_ns\n{},{},{},{}\n",
            result
                .permutation
                .as_slice()
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" "),
            result.total_cost,
            result.iterations,
            result.elapsed_ns
        )),
    }
}

#[derive(Serialize)]
struct EvaluationReport {
    solver: &'static str,
    sample_rate: u32,
    samples: usize,
    /// `permutation[i]` is the estimate matched to target `i`.
    permutation: Vec<usize>,
    si_snr: Vec<f64>,
    si_sdri: Vec<f64>,
    mean_si_snr: f64,
    mean_si_sdri: f64,
    mean_loss: f64,
}

fn cmd_evaluate(
    targets: &[PathBuf],
    estimates: &[PathBuf],
    mixture: &Path,
    solver: SolverArg,
    guard: usize,
) -> Result<(), CliError> {
    if targets.len() != estimates.len() {
        return Err(CliError::Input(format!(
            "{} target files but {} estimate files",
            targets.len(),
            estimates.len()
        )));
    }
    let read = |p: &PathBuf| read_wav(p).map_err(|e| wav_error(p, e));
    let mut signals: Vec<AudioSignal> = targets
        .iter()
        .chain(estimates)
        .map(read)
        .collect::<Result<_, _>>()?;
    signals.push(read(&mixture.to_path_buf())?);

    let paths: Vec<&Path> = targets
        .iter()
        .chain(estimates)
        .map(PathBuf::as_path)
        .chain([mixture])
        .collect();
    let rate = signals[0].sample_rate();
    for (s, p) in signals.iter().zip(&paths) {
        if s.sample_rate() != rate {
            return Err(CliError::Input(format!(
                "sample rate mismatch: {} is {} Hz, {} is {rate} Hz",
                p.display(),
                s.sample_rate(),
                paths[0].display()
            )));
        }
    }

    let mut signals = truncate_to_min(&signals)?;
    let mixture = signals.pop().expect("mixture was pushed last");
    let estimates = signals.split_off(targets.len());
    let instance = SeparationInstance::new(signals, estimates, mixture)?;

    let (name, loss) = match solver {
        SolverArg::Hungarian => ("hungarian", hungarian_loss(&instance)?),
        SolverArg::Bruteforce => ("bruteforce", pit_loss_guarded(&instance, guard)?),
        SolverArg::Sinkhorn => {
            return Err(CliError::Input(
                "evaluate needs an exact solver (hungarian or bruteforce)".into(),
            ))
        }
    };
    let si_sdri = si_sdr_improvement(&instance, &loss.permutation)?;
    let si_snr: Vec<f64> = loss.per_pair.iter().map(|l| -l).collect();
    let c = si_snr.len() as f64;
    emit_json(&EvaluationReport {
        solver: name,
        sample_rate: rate,
        samples: instance.mixture().len(),
        permutation: loss.permutation.as_slice().to_vec(),
        mean_si_snr: si_snr.iter().sum::<f64>() / c,
        mean_si_sdri: si_sdri.iter().sum::<f64>() / c,
        si_snr,
        si_sdri,
        mean_loss: loss.mean_loss,
    })
}

/// Offset separating the mixing RNG from the per-source generators.
const MIX_SEED_OFFSET: u64 = 0x6D69_7865;

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    mix_seed: u64,
    num_sources: usize,
    sample_rate: u32,
    duration: f64,
    samples: usize,
    snr_low: f64,
    snr_high: f64,
    kinds: Vec<SourceKind>,
    /// `mixture = Σ gains[i] · sources[i]` on the written 16-bit samples.
    gains: Vec<f64>,
    snr_db: Vec<f64>,
    rescale: f64,
    sources: Vec<String>,
    mixture: String,
}

fn cmd_mix(spec: &MixSpec, kinds: &[SourceKind], out_dir: &Path) -> Result<(), CliError> {
    let palette: &[SourceKind] = if kinds.is_empty() {
        &SourceKind::SYNTHETIC
    } else {
        kinds
    };
    let kinds: Vec<SourceKind> = palette
        .iter()
        .cloned()
        .cycle()
        .take(spec.num_sources)
        .collect();
    let sources: Vec<AudioSignal> = generate_sources(spec, &kinds)?
        .iter()
        .map(AudioSignal::quantized_pcm16)
        .collect();
    let mix_seed = spec.seed.wrapping_add(MIX_SEED_OFFSET);
    let mixed = mix(&sources, spec.snr_range, mix_seed)?;

    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let width = spec.num_sources.saturating_sub(1).to_string().len().max(2);
    let mut names = Vec::with_capacity(sources.len());
    for (i, s) in sources.iter().enumerate() {
        let name = format!("source_{i:0width$}.wav");
        let path = out_dir.join(&name);
        write_wav(&path, s).map_err(|e| wav_error(&path, e))?;
        names.push(name);
    }
    let mixture_path = out_dir.join("mixture.wav");
    write_wav(&mixture_path, &mixed.mixture).map_err(|e| wav_error(&mixture_path, e))?;

    let manifest = Manifest {
        seed: spec.seed,
        mix_seed,
        num_sources: spec.num_sources,
        sample_rate: spec.sample_rate,
        duration: spec.duration,
        samples: spec.num_samples(),
        snr_low: spec.snr_range.low,
        snr_high: spec.snr_range.high,
        kinds,
        gains: mixed.gains,
        snr_db: mixed.snr_db,
        rescale: mixed.rescale,
        sources: names,
        mixture: "mixture.wav".into(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, &json).map_err(|e| io_error(&manifest_path, e))?;
    emit(&serde_json::to_string(&manifest).expect("manifest serialises"))
}

fn cmd_bench(
    c_values: &[usize],
    trials: usize,
    seed: u64,
    guard: usize,
    format: Format,
) -> Result<(), CliError> {
    let options = SweepOptions {
        solvers: vec![
            Solver::Hungarian,
            Solver::Sinkhorn(SinkhornConfig::default()),
            Solver::BruteForce { guard },
        ],
    };
    let reports = bench::sweep_solvers(c_values, trials, seed, &options)?;
    let mut buf = Vec::new();
    match format {
        Format::Csv => bench::write_csv(&reports, &mut buf)?,
        Format::Json | Format::Text => bench::write_jsonl(&reports, &mut buf)?,
    }
    emit(&String::from_utf8(buf).expect("reports are UTF-8"))
}

#[derive(Serialize)]
struct ProfileRow {
    c: usize,
    trials: usize,
    difficulty: f64,
    mean_iterations: f64,
}

fn cmd_profile(
    c_values: &[usize],
    difficulties: &[f64],
    trials: usize,
    seed: u64,
    format: Format,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &c in c_values {
        for p in bench::iteration_profile(difficulties, c, trials, seed)? {
            rows.push(ProfileRow {
                c,
                trials,
                difficulty: p.difficulty,
                mean_iterations: p.mean_iterations,
            });
        }
    }
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("c,trials,difficulty,mean_iterations\n");
            for r in &rows {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    r.c, r.trials, r.difficulty, r.mean_iterations
                ));
            }
        }
        Format::Json | Format::Text => {
            for r in &rows {
                out.push_str(&serde_json::to_string(r).expect("row serialises"));
                out.push('\n');
            }
        }
    }
    emit(&out)
}

fn cmd_confusion(path: &Path, pgm: Option<&Path>, cell: usize) -> Result<(), CliError> {
    let matrix = load_matrix(path)?;
    let export = bench::export_confusion(&matrix);
    if let Some(pgm) = pgm {
        fs::write(pgm, export.to_pgm(cell)).map_err(|e| io_error(pgm, e))?;
    }
    emit(&export.to_json())
}
