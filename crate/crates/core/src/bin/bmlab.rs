use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bmlab::barthe::{self, BartheInstance};
use bmlab::harness::{
    self, case_by_name, default_suite, fast_suite, InequalityCase, ReportFormat, RunConfig,
    Status,
};
use bmlab::means::{check_triple_properties, GeneralizedMeanTriple};
use bmlab::measure::{Budget, MeasureSpec};
use bmlab::polytope::{difference_body, format_f64, Polytope};
use bmlab::stepfn::LayeredFunction;
use bmlab::supconv::{integrate_supconv, supconv_layered, ConstraintFamily, SupConvolutionSpec};

#[derive(Parser)]
#[command(name = "bmlab", about = "Numerical laboratory for Brunn-Minkowski type inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run the inequality verification suite.
    Verify {
        /// Named suite to run.
        #[arg(long, default_value = "default")]
        suite: String,
        /// Run a single case by name instead of a whole suite.
        #[arg(long)]
        case: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        instances: usize,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        /// Write the report rows to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Evaluate a sup-convolution of layered functions and its integral.
    Supconv {
        /// Family: affine | lp | schneider | heisenberg, or a path to a
        /// family JSON file (general linear maps go through the file form).
        #[arg(long)]
        family: String,
        /// Layered-function JSON files, one per input.
        #[arg(long, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        /// L_p exponent for the level-set family.
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        /// Shift order for the shift family.
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Estimate the reverse Brascamp-Lieb constant of an instance.
    Barthe {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 8)]
        starts: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Difference-body ratio report for a body.
    Schneider {
        #[arg(long)]
        body: PathBuf,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Check the properties of a generalized mean triple.
    Means {
        /// Triple JSON: {"w": ..., "m": ..., "n": ..., "bounds": [...]}.
        #[arg(long)]
        check: PathBuf,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Dump function samples of a case instance as CSV.
    Plotdata {
        #[arg(long)]
        case: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run() -> bmlab::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify { suite, case, seed, instances, samples, tolerance, out, format } => {
            let cases: Vec<InequalityCase> = match &case {
                Some(name) => {
                    let c = case_by_name(name).ok_or_else(|| {
                        bmlab::Error::InvalidParameter(format!("unknown case {name:?}"))
                    })?;
                    vec![c]
                }
                None => match suite.as_str() {
                    "default" => default_suite(),
                    "fast" => fast_suite(),
                    other => {
                        return Err(bmlab::Error::InvalidParameter(format!(
                            "unknown suite {other:?} (expected default or fast)"
                        )))
                    }
                },
            };
            let config = RunConfig {
                seed,
                instances,
                samples,
                grid_resolution: 64,
                tolerance,
            };
            let summary = harness::run_suite(&cases, &config);
            for r in &summary.reports {
                println!(
                    "{:<42} lhs {:>13.6e} rhs {:>13.6e} margin {:>13.6e} [{}]",
                    r.case,
                    r.lhs,
                    r.rhs,
                    r.margin,
                    match r.status {
                        Status::Pass => "pass",
                        Status::Fail => "FAIL",
                        Status::Evidence => "evidence",
                        Status::Error => "ERROR",
                    }
                );
            }
            println!(
                "suite: {} reports, {} failures, {} errors",
                summary.reports.len(),
                summary.failures,
                summary.errors
            );
            if let Some(path) = out {
                let fmt = match format {
                    Format::Json => ReportFormat::Json,
                    Format::Csv => ReportFormat::Csv,
                };
                harness::emit_report(&summary.reports, fmt, &path)?;
                println!("wrote {}", path.display());
            }
            Ok(if summary.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Supconv { family, inputs, alpha, t, p, m, out, samples, seed } => {
            let fs: Vec<LayeredFunction> = inputs
                .iter()
                .map(|path| LayeredFunction::from_json(&std::fs::read_to_string(path)?))
                .collect::<bmlab::Result<_>>()?;
            let dim = fs.first().map(|f| f.dim()).unwrap_or(2);
            let spec = match family.as_str() {
                "affine" => SupConvolutionSpec::affine(dim, t, alpha)?,
                "lp" => SupConvolutionSpec::level_set_lp(p, t, alpha, 720)?,
                "schneider" => SupConvolutionSpec::schneider(dim, m)?,
                "heisenberg" => SupConvolutionSpec::heisenberg(t, alpha, 64)?,
                path => {
                    let fam = ConstraintFamily::from_json(&std::fs::read_to_string(path)?)?;
                    let weights = match &fam {
                        ConstraintFamily::GeneralLinear { coeffs, .. } => {
                            let total: f64 = coeffs.iter().sum();
                            coeffs.iter().map(|c| c / total).collect()
                        }
                        _ => vec![1.0 - t, t],
                    };
                    SupConvolutionSpec::new(
                        fam,
                        bmlab::means::MeanSpec::new(
                            bmlab::means::Exponent::Finite(alpha),
                            bmlab::means::WeightVector::new(weights)?,
                        ),
                    )?
                }
            };
            let h = supconv_layered(&spec, &fs)?;
            let lebesgue = MeasureSpec::lebesgue(h.target_dim());
            let budget = if h.target_dim() <= 2
                && matches!(
                    spec.family,
                    ConstraintFamily::AffineCombination { .. }
                        | ConstraintFamily::GeneralLinear { .. }
                        | ConstraintFamily::LevelSetLp { .. }
                        | ConstraintFamily::SchneiderShift { .. }
                ) {
                Budget::Exact
            } else {
                Budget::MonteCarlo { samples, seed }
            };
            let integral = integrate_supconv(&h, &lebesgue, budget)?;
            let payload = format!(
                "{{\"pieces\":{},\"integral\":{{\"value\":{},\"stderr\":{},\"outer_value\":{}}}}}",
                h.to_json(),
                format_f64(integral.lower.value),
                format_f64(integral.lower.stderr),
                format_f64(integral.outer_value)
            );
            match out {
                Some(path) => {
                    std::fs::write(&path, payload)?;
                    println!("wrote {}", path.display());
                }
                None => println!("{payload}"),
            }
            println!(
                "pieces: {}  integral: {} (stderr {}, outer {})",
                h.pieces.len(),
                integral.lower.value,
                integral.lower.stderr,
                integral.outer_value
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Barthe { instance, starts, seed } => {
            let inst = BartheInstance::from_json(&std::fs::read_to_string(&instance)?)?;
            let report = barthe::constant_estimate(&inst, starts, seed)?;
            println!("constant estimate: {}", report.constant);
            println!("best objective:    {}", report.best_objective);
            println!("sampling floor:    {}", report.sampling_floor);
            for s in &report.starts {
                println!(
                    "  start {:>2}: value {:.12e} grad {:.3e} iters {:>4} converged {}",
                    s.start_index, s.final_value, s.gradient_norm, s.iterations, s.converged
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Schneider { body, m, mc_samples, seed } => {
            let k = Polytope::from_json(&std::fs::read_to_string(&body)?)?;
            let vol = k.exact_volume()?;
            let d = difference_body(&k, m)?;
            let (value, stderr) = if d.target_dim() <= 3 {
                (d.exact_volume()?, 0.0)
            } else {
                d.mc_volume(mc_samples, seed)?
            };
            let ratio = value / vol.powi(m as i32);
            println!("|K| = {vol}");
            println!("|D^{m}(K)| = {value} (stderr {stderr})");
            println!("ratio |D^{m}(K)| / |K|^{m} = {ratio}");
            println!("planar lower bound (m+1)^2 = {}", ((m + 1) * (m + 1)) as f64);
            Ok(ExitCode::SUCCESS)
        }
        Command::Means { check, samples, seed } => {
            let triple: GeneralizedMeanTriple =
                serde_json::from_str(&std::fs::read_to_string(&check)?)
                    .map_err(|e| bmlab::Error::Format(e.to_string()))?;
            let report = check_triple_properties(&triple, samples, seed)?;
            let line = |name: &str, check: &bmlab::means::PropertyCheck| {
                println!(
                    "{name:<24} {}  worst margin {:?}",
                    if check.passed { "pass" } else { "FAIL" },
                    check.worst.as_ref().map(|w| w.margin)
                );
            };
            line("reverse minkowski (M)", &report.reverse_minkowski);
            line("radial superadd. (N)", &report.radial_superadditivity);
            line("holder pairing", &report.holder_pairing);
            line("duality", &report.duality);
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Plotdata { case, out, seed } => {
            let c = case_by_name(&case).ok_or_else(|| {
                bmlab::Error::InvalidParameter(format!("unknown case {case:?}"))
            })?;
            let config = RunConfig { seed, ..Default::default() };
            let csv = harness::plot_data(&c, &config)?;
            std::fs::write(&out, csv)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
