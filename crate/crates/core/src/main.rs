//! `descred`: command-line front end over the library.
//!
//! Subcommands mirror the library surface: `analyze`, `reduce`,
//! `standard`, `qw`, `switch-reduce` and `check`. Inputs are system JSON
//! files; outputs are reduction JSON files with exact (hex-float) payloads
//! and provenance. Exit codes: 0 success, 2 unreadable/invalid input,
//! 3 singular pencil, 4 pure system, 5 no fast part, 6 switched range
//! mismatch, 7 check residual above threshold, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use descred::io::{
    self, IndexReportData, Provenance, QwData, ReducedData, ReductionFile, ReductionPayload,
    StandardData, SwitchedData,
};
use descred::{
    analyze_with, check_discrete, check_residual, check_unforced_reduction, qw_decompose,
    reduce_switching_at, reduce_via_corange, reduce_via_range, shift, to_standard, CMatrix,
    DescriptorSystem, Error, PolynomialInput, RankTolerance, Result, Side,
    SwitchedDescriptorSystem, UnforcedReduction,
};

/// Trial seed for the randomized trajectory checks; override with the
/// `DESCRED_SEED` environment variable.
const DEFAULT_SEED: u64 = 7;

#[derive(Parser)]
#[command(
    name = "descred",
    version,
    about = "Analysis and exact order/index reduction for linear descriptor systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the index, rank sequence and consistency dimension.
    Analyze {
        /// System JSON file.
        input: PathBuf,
        /// Shift as "re" or "re,im"; picked automatically when omitted.
        #[arg(long)]
        lambda: Option<String>,
        /// Rank tolerance: "machine", "rel:<x>" or "abs:<x>".
        #[arg(long, default_value = "machine")]
        tol: String,
        /// Write the report as JSON here as well.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Reduce onto a basis of range(F^k) (or its corange).
    Reduce {
        input: PathBuf,
        /// Reduction depth; defaults to max(k*, 1).
        #[arg(long)]
        k: Option<usize>,
        /// "range" or "corange".
        #[arg(long, default_value = "range")]
        side: String,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long, default_value = "machine")]
        tol: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Produce the explicit ODE on the consistency space.
    Standard {
        input: PathBuf,
        #[arg(long, default_value = "range")]
        side: String,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long, default_value = "machine")]
        tol: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Full slow/fast decoupling.
    Qw {
        input: PathBuf,
        /// Splitting power; defaults to the index k*.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long, default_value = "machine")]
        tol: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Reduce all modes of a switched family through one shared basis.
    SwitchReduce {
        /// System JSON file with a "modes" array.
        input: PathBuf,
        /// Per-mode depths "k1,k2,..."; defaults to each mode's index.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        /// Shared shift; picked automatically when omitted.
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long, default_value = "machine")]
        tol: String,
        /// Largest acceptable principal angle between mode ranges.
        #[arg(long, default_value_t = 1e-8)]
        angle_tol: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Verify a reduction file against its system file.
    Check {
        /// System JSON file.
        system: PathBuf,
        /// Reduction JSON file produced by reduce/standard/qw/switch-reduce.
        reduction: PathBuf,
        /// Residuals above this fail the check (exit 7).
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        #[arg(long, default_value_t = 2.0)]
        t_end: f64,
        #[arg(long, default_value_t = 9)]
        samples: usize,
        /// Steps of the discrete recursion check.
        #[arg(long, default_value_t = 8)]
        steps: usize,
        /// Random initial states per trajectory check.
        #[arg(long, default_value_t = 3)]
        trials: usize,
        /// Polynomial input "poly:c0;c1;..." (each c comma-separated per
        /// channel), used by the decoupling check.
        #[arg(long)]
        input: Option<String>,
        /// Slow initial state "v1,v2,..." for the decoupling check
        /// (defaults to all ones).
        #[arg(long)]
        z1: Option<String>,
    },
}

fn parse_lambda(text: &str) -> Result<Complex64> {
    let bad = || Error::Parse(format!("lambda must be \"re\" or \"re,im\", got {text:?}"));
    let mut parts = text.split(',');
    let re: f64 = parts
        .next()
        .ok_or_else(bad)?
        .trim()
        .parse()
        .map_err(|_| bad())?;
    let im: f64 = match parts.next() {
        Some(t) => t.trim().parse().map_err(|_| bad())?,
        None => 0.0,
    };
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

fn parse_tol(text: &str) -> Result<RankTolerance> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("machine") {
        return Ok(RankTolerance::Machine);
    }
    let parse_value = |v: &str| -> Result<f64> {
        v.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("invalid tolerance value {v:?}")))
    };
    let tol = if let Some(v) = t.strip_prefix("rel:") {
        RankTolerance::Relative(parse_value(v)?)
    } else if let Some(v) = t.strip_prefix("abs:") {
        RankTolerance::Absolute(parse_value(v)?)
    } else {
        return Err(Error::Parse(format!(
            "tolerance must be \"machine\", \"rel:<x>\" or \"abs:<x>\", got {text:?}"
        )));
    };
    tol.validate()?;
    Ok(tol)
}

fn parse_side(text: &str) -> Result<Side> {
    match text.trim() {
        "range" => Ok(Side::Range),
        "corange" => Ok(Side::Corange),
        other => Err(Error::Parse(format!(
            "side must be \"range\" or \"corange\", got {other:?}"
        ))),
    }
}

fn parse_reals(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid {what} entry {v:?}")))
        })
        .collect()
}

fn parse_poly(text: &str) -> Result<PolynomialInput> {
    let body = text.strip_prefix("poly:").ok_or_else(|| {
        Error::Parse(format!(
            "input must look like \"poly:c0;c1;...\", got {text:?}"
        ))
    })?;
    let coefficients = body
        .split(';')
        .map(|c| parse_reals(c, "input coefficient"))
        .collect::<Result<Vec<_>>>()?;
    PolynomialInput::from_real(&coefficients)
}

fn parse_lambda_opt(text: &Option<String>) -> Result<Option<Complex64>> {
    text.as_deref().map(parse_lambda).transpose()
}

fn seed_from_env() -> Result<u64> {
    match std::env::var("DESCRED_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("DESCRED_SEED must be an integer, got {text:?}"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn fmt_c(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

fn load_single(path: &Path) -> Result<(DescriptorSystem, String)> {
    let (loaded, digest) = io::read_system_file(path)?;
    match loaded {
        io::LoadedSystem::Single(sys) => Ok((sys, digest)),
        io::LoadedSystem::Switched(_) => Err(Error::Schema(
            "this command needs a single system, the file contains switched modes".into(),
        )),
    }
}

fn load_switched(path: &Path) -> Result<(Vec<DescriptorSystem>, String)> {
    let (loaded, digest) = io::read_system_file(path)?;
    match loaded {
        io::LoadedSystem::Switched(modes) => Ok((modes, digest)),
        io::LoadedSystem::Single(_) => Err(Error::Schema(
            "this command needs switched modes, the file contains a single system".into(),
        )),
    }
}

fn write_reduction(
    output: &Option<PathBuf>,
    digest: String,
    tol: &RankTolerance,
    payload: ReductionPayload,
) -> Result<()> {
    if let Some(path) = output {
        let file = ReductionFile::new(Provenance::new(digest, tol.clone(), None), payload);
        io::write_json(path, &file)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze {
            input,
            lambda,
            tol,
            output,
        } => {
            let tol = parse_tol(&tol)?;
            let (sys, _) = load_single(&input)?;
            let report = analyze_with(&sys, parse_lambda_opt(&lambda)?, &tol)?;
            let data = IndexReportData::new(&report);
            let text = serde_json::to_string_pretty(&data)
                .map_err(|err| Error::Computation(format!("serialization failed: {err}")))?;
            println!("{text}");
            if let Some(path) = output {
                io::write_json(&path, &data)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reduce {
            input,
            k,
            side,
            lambda,
            tol,
            output,
        } => {
            let tol = parse_tol(&tol)?;
            let side = parse_side(&side)?;
            let (sys, digest) = load_single(&input)?;
            let report = analyze_with(&sys, parse_lambda_opt(&lambda)?, &tol)?;
            let shifted = shift(&sys, report.lambda)?;
            // Depth 0 means "no reduction", which the library rejects;
            // index-0 systems still reduce meaningfully at depth 1.
            let k = k.unwrap_or(report.k_star.max(1));
            let red = match side {
                Side::Range => reduce_via_range(&shifted, k, None, &tol)?,
                Side::Corange => reduce_via_corange(&shifted, k, None, &tol)?,
            };
            let g_tilde = shifted.g().map(|g| &red.proj * g);
            println!("side: {side}");
            println!("k: {k}");
            println!("order: {}", red.f_tilde.rows());
            println!("index: {}", red.index);
            println!("lambda: {}", fmt_c(red.lambda));
            write_reduction(
                &output,
                digest,
                &tol,
                ReductionPayload::Reduced(ReducedData::new(&red, g_tilde.as_ref())),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Standard {
            input,
            side,
            lambda,
            tol,
            output,
        } => {
            let tol = parse_tol(&tol)?;
            let side = parse_side(&side)?;
            let (sys, digest) = load_single(&input)?;
            let report = analyze_with(&sys, parse_lambda_opt(&lambda)?, &tol)?;
            let shifted = shift(&sys, report.lambda)?;
            let std_form = to_standard(&shifted, side, &tol)?;
            // B~ = F~^-1 proj G, and F~^-1 = A~ - lambda I.
            let b_tilde = shifted.g().map(|g| {
                let lambda_eye = CMatrix::identity(std_form.a_tilde.rows()).scale(report.lambda);
                &(&std_form.a_tilde - &lambda_eye) * &(&std_form.proj * g)
            });
            println!("side: {side}");
            println!("order: {}", std_form.a_tilde.rows());
            println!("lambda: {}", fmt_c(report.lambda));
            write_reduction(
                &output,
                digest,
                &tol,
                ReductionPayload::Standard(StandardData::new(
                    &std_form,
                    side,
                    report.lambda,
                    b_tilde.as_ref(),
                )),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Qw {
            input,
            k,
            lambda,
            tol,
            output,
        } => {
            let tol = parse_tol(&tol)?;
            let (sys, digest) = load_single(&input)?;
            let qw = qw_decompose(&sys, parse_lambda_opt(&lambda)?, k, &tol)?;
            println!("lambda: {}", fmt_c(qw.lambda));
            println!("slow order: {}", qw.slow_dim());
            println!("fast order: {}", qw.fast_dim());
            println!("nilpotency power: {}", qw.k_nilpotent);
            write_reduction(
                &output,
                digest,
                &tol,
                ReductionPayload::Qw(QwData::new(&qw)),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::SwitchReduce {
            input,
            k,
            lambda,
            tol,
            angle_tol,
            output,
        } => {
            let tol = parse_tol(&tol)?;
            let (modes, digest) = load_switched(&input)?;
            let switched = match parse_lambda_opt(&lambda)? {
                Some(l) => SwitchedDescriptorSystem::new(modes, l)?,
                None => SwitchedDescriptorSystem::with_auto_lambda(modes, &tol)?,
            };
            let red = reduce_switching_at(&switched, k.as_deref(), &tol, angle_tol)?;
            let worst = red.pairs.iter().map(|p| p.angle).fold(0.0, f64::max);
            println!("modes: {}", red.modes.len());
            println!("order: {}", red.order());
            println!("lambda: {}", fmt_c(red.lambda));
            println!("mode depths: {:?}", red.indices);
            println!("worst pair angle: {worst:.3e}");
            write_reduction(
                &output,
                digest,
                &tol,
                ReductionPayload::Switched(SwitchedData::new(&red, angle_tol)),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            system,
            reduction,
            threshold,
            t_end,
            samples,
            steps,
            trials,
            input,
            z1,
        } => run_check(
            &system, &reduction, threshold, t_end, samples, steps, trials, &input, &z1,
        ),
    }
}

/// One named residual with its verdict.
struct CheckLine {
    name: &'static str,
    value: f64,
}

fn print_verdict(lines: &[CheckLine], threshold: f64) -> ExitCode {
    let mut pass = true;
    for line in lines {
        let ok = line.value <= threshold;
        pass &= ok;
        println!(
            "{}: {:.3e} (threshold {:.3e}) {}",
            line.name,
            line.value,
            threshold,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if pass {
        println!("CHECK PASSED");
        ExitCode::SUCCESS
    } else {
        println!("CHECK FAILED");
        ExitCode::from(7)
    }
}

fn relative_diff(lhs: &CMatrix, rhs: &CMatrix) -> f64 {
    (lhs - rhs).norm() / (lhs.norm() + rhs.norm()).max(1.0)
}

#[allow(clippy::too_many_arguments)]
fn run_check(
    system: &Path,
    reduction: &Path,
    threshold: f64,
    t_end: f64,
    samples: usize,
    steps: usize,
    trials: usize,
    input: &Option<String>,
    z1: &Option<String>,
) -> Result<ExitCode> {
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::Parse(format!(
            "threshold must be finite and positive, got {threshold}"
        )));
    }
    let seed = seed_from_env()?;
    let (loaded, digest) = io::read_system_file(system)?;
    let file = io::read_reduction(reduction)?;
    if file.provenance.source_sha256 != digest {
        eprintln!(
            "warning: reduction was produced from a different system file \
             (sha256 {} vs {})",
            file.provenance.source_sha256, digest
        );
    }
    let input = input.as_deref().map(parse_poly).transpose()?;

    match &file.reduction {
        ReductionPayload::Reduced(data) => {
            let sys = match loaded {
                io::LoadedSystem::Single(sys) => sys,
                io::LoadedSystem::Switched(_) => {
                    return Err(Error::Schema(
                        "reduction is for a single system, file contains modes".into(),
                    ))
                }
            };
            let red = data.to_system()?;
            let shifted = shift(&sys, red.lambda)?;
            // Algebraic certificates hold at any k, index zero or not.
            let commutation = match red.side {
                Side::Range => {
                    relative_diff(&(shifted.f() * &red.lift), &(&red.lift * &red.f_tilde))
                }
                Side::Corange => {
                    relative_diff(&(&red.proj * shifted.f()), &(&red.f_tilde * &red.proj))
                }
            };
            let proj_lift = relative_diff(
                &(&red.proj * &red.lift),
                &CMatrix::identity(red.f_tilde.rows()),
            );
            let mut lines = vec![
                CheckLine {
                    name: "reduction commutation residual",
                    value: commutation,
                },
                CheckLine {
                    name: "projection of lift residual",
                    value: proj_lift,
                },
            ];
            if let Some(g_tilde) = data.g_tilde_matrix()? {
                let expected = match sys.b() {
                    Some(_) => &red.proj * shifted.g().expect("B present implies G"),
                    None => {
                        return Err(Error::Schema(
                            "reduction stores an input block but the system has no B".into(),
                        ))
                    }
                };
                lines.push(CheckLine {
                    name: "reduced input block residual",
                    value: relative_diff(&g_tilde, &expected),
                });
            }
            if red.index == 0 {
                let unforced = UnforcedReduction::Reduced(&red);
                let cont = check_unforced_reduction(&sys, &unforced, t_end, samples, trials, seed)?;
                let disc = check_discrete(&sys, &unforced, steps, trials, seed)?;
                lines.push(CheckLine {
                    name: "trajectory residual",
                    value: cont.max_residual,
                });
                lines.push(CheckLine {
                    name: "discrete recursion residual",
                    value: disc.max_residual,
                });
                lines.push(CheckLine {
                    name: "ODE identity residual",
                    value: cont.identity_residual,
                });
            } else {
                println!(
                    "note: reduction has index {}, checking algebraic identities only",
                    red.index
                );
            }
            Ok(print_verdict(&lines, threshold))
        }
        ReductionPayload::Standard(data) => {
            let sys = match loaded {
                io::LoadedSystem::Single(sys) => sys,
                io::LoadedSystem::Switched(_) => {
                    return Err(Error::Schema(
                        "reduction is for a single system, file contains modes".into(),
                    ))
                }
            };
            let std_form = data.to_system()?;
            let unforced = UnforcedReduction::Standard(&std_form);
            let cont = check_unforced_reduction(&sys, &unforced, t_end, samples, trials, seed)?;
            let disc = check_discrete(&sys, &unforced, steps, trials, seed)?;
            let lines = vec![
                CheckLine {
                    name: "trajectory residual",
                    value: cont.max_residual,
                },
                CheckLine {
                    name: "discrete recursion residual",
                    value: disc.max_residual,
                },
                CheckLine {
                    name: "ODE identity residual",
                    value: cont.identity_residual,
                },
            ];
            Ok(print_verdict(&lines, threshold))
        }
        ReductionPayload::Qw(data) => {
            let sys = match loaded {
                io::LoadedSystem::Single(sys) => sys,
                io::LoadedSystem::Switched(_) => {
                    return Err(Error::Schema(
                        "reduction is for a single system, file contains modes".into(),
                    ))
                }
            };
            let qw = data.to_decomposition()?;
            let z1_0 = match z1 {
                Some(text) => CMatrix::real_column(&parse_reals(text, "z1")?)?,
                None => CMatrix::from_fn(qw.slow_dim(), 1, |_, _| Complex64::new(1.0, 0.0))?,
            };
            let report = check_residual(&sys, &qw, &z1_0, input.as_ref(), t_end, samples)?;
            let lines = vec![
                CheckLine {
                    name: "trajectory residual",
                    value: report.max_residual,
                },
                CheckLine {
                    name: "identity resolution residual",
                    value: report.identity_residual,
                },
            ];
            Ok(print_verdict(&lines, threshold))
        }
        ReductionPayload::Switched(data) => {
            let modes = match loaded {
                io::LoadedSystem::Switched(modes) => modes,
                io::LoadedSystem::Single(_) => {
                    return Err(Error::Schema(
                        "reduction is switched, system file holds a single system".into(),
                    ))
                }
            };
            let red = data.to_reduction()?;
            if red.modes.len() != modes.len() {
                return Err(Error::Schema(format!(
                    "reduction has {} modes, system file has {}",
                    red.modes.len(),
                    modes.len()
                )));
            }
            let mut worst_commutation = 0.0_f64;
            for (mode, reduced) in modes.iter().zip(&red.modes) {
                let shifted = shift(mode, red.lambda)?;
                worst_commutation = worst_commutation.max(relative_diff(
                    &(shifted.f() * &red.basis),
                    &(&red.basis * &reduced.f_tilde),
                ));
            }
            let proj_lift =
                relative_diff(&(&red.proj * &red.basis), &CMatrix::identity(red.order()));
            let lines = vec![
                CheckLine {
                    name: "worst mode commutation residual",
                    value: worst_commutation,
                },
                CheckLine {
                    name: "projection of basis residual",
                    value: proj_lift,
                },
            ];
            Ok(print_verdict(&lines, threshold))
        }
    }
}
