use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use qgspec_core::asymptotics::{fit_branches, predict, sweep, verify, SweepOptions};
use qgspec_core::error::{AsymptoticsError, ConfigError, SolverError, SubspaceError};
use qgspec_core::graph::MetricGraph;
use qgspec_core::output::{
    fmt_num, nrc_line, prediction_json, verdict_json, write_branches_csv, write_spectrum_csv, write_summary_csv,
};
use qgspec_core::random::{random_conditions, random_resonant_conditions, seeded_rng};
use qgspec_core::secular::{find_eigenvalues, spectral_lower_bound, SolverWarning, Window};
use qgspec_core::subspaces::check_nrc_equivalence_for;
use qgspec_core::{MatchingConditions, Problem, ProblemConfig};

#[derive(Parser)]
#[command(name = "qgspec", version, about = "Spectra of metric graphs and their shrinking-edge asymptotics")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the projector and Lambda axioms and print the measured defects.
    Validate { config: PathBuf },
    /// Predict fast/slow/exotic counts, slopes and fast coefficients as JSON.
    Classify {
        config: PathBuf,
        /// Number of fast coefficients (defaults to sweep.num_fast).
        #[arg(long)]
        num_fast: Option<usize>,
    },
    /// Eigenvalues of the graph with lengths scaled by EPSILON, as CSV.
    Spectrum(SpectrumArgs),
    /// Follow the lowest eigenvalues as the graph shrinks and verify the prediction.
    Sweep(SweepArgs),
    /// Compare the non-resonance dimension with the nullity of the form on F0.
    Nrc(NrcArgs),
}

#[derive(Args)]
struct SpectrumArgs {
    config: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Eigenvalue window as LO,HI (defaults to solver.window, else the lowest levels).
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the predicted counts as N_MINUS,N_ZERO,N_PLUS.
    #[arg(long)]
    expect: Option<String>,
    #[arg(long)]
    num_fast: Option<usize>,
}

#[derive(Args)]
struct NrcArgs {
    /// Problem file; omit when using --random.
    config: Option<PathBuf>,
    /// Check this many random conditions instead of a file.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of edges for --random.
    #[arg(long, default_value_t = 3)]
    edges: usize,
}

/// An error with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const INPUT: u8 = 1;
const VERIFICATION: u8 = 2;
const NUMERICAL: u8 = 3;

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: INPUT,
        error: e.into(),
    }
}

fn numerical(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: NUMERICAL,
        error: e.into(),
    }
}

fn io_failure(e: impl Into<anyhow::Error>) -> Failure {
    numerical(e)
}

fn asymptotics_failure(e: AsymptoticsError) -> Failure {
    match e {
        AsymptoticsError::Model(_)
        | AsymptoticsError::InvalidGrid(_)
        | AsymptoticsError::Solver(SolverError::InvalidWindow { .. } | SolverError::InvalidOption(_)) => input(e),
        AsymptoticsError::Subspace(SubspaceError::EquivalenceViolation { .. }) => Failure {
            code: VERIFICATION,
            error: e.into(),
        },
        _ => numerical(e),
    }
}

fn load(path: &Path) -> Result<Problem, Failure> {
    Problem::load(path).map_err(|e: ConfigError| input(anyhow!(e).context(format!("loading {}", path.display()))))
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let config = ProblemConfig::load(path).map_err(input)?;
    let problem = config.build().map_err(|e| input(anyhow!("invalid conditions: {e}")))?;
    let cond = &problem.conditions;
    let d = cond.defects();
    let (r_d, r_n, r_r) = cond.ranks();
    println!(
        "valid: {} edges, boundary dimension {}",
        problem.graph.num_edges(),
        problem.graph.boundary_dim()
    );
    println!("ranks: p_d {r_d}, p_n {r_n}, p_r {r_r}");
    let names = ["p_d", "p_n", "p_r"];
    for (i, name) in names.iter().enumerate() {
        println!(
            "{name}: hermiticity {}, idempotency {}",
            fmt_num(d.hermiticity[i]),
            fmt_num(d.idempotency[i])
        );
    }
    println!("completeness {}", fmt_num(d.completeness));
    println!("mutual orthogonality {}", fmt_num(d.mutual));
    match d.lambda_margin {
        Some(m) => println!("lambda margin {}", fmt_num(m)),
        None => println!("lambda margin n/a (p_r = 0)"),
    }
    println!("lambda discarded {}", fmt_num(d.lambda_discarded));
    Ok(())
}

fn cmd_classify(path: &Path, num_fast: Option<usize>) -> Result<(), Failure> {
    let p = load(path)?;
    let prediction =
        predict(&p.graph, &p.conditions, num_fast.unwrap_or(p.num_fast), &p.solver).map_err(asymptotics_failure)?;
    println!("{}", prediction_json(&prediction));
    Ok(())
}

fn parse_window(text: &str) -> Result<Window, Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    let bad = || input(anyhow!("window must be LO,HI with LO < HI, got {text:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok(Window::new(lo, hi))
}

/// From a rigorous lower bound up to roughly the tenth level.
fn default_window(graph: &MetricGraph, cond: &MatchingConditions) -> Window {
    let omega0 = graph.num_edges() as f64 / graph.total_length();
    let lo = 1.05 * spectral_lower_bound(graph, cond) - 1e-4 * omega0 * omega0;
    let hi = ((10 + graph.boundary_dim()) as f64 * std::f64::consts::PI / graph.total_length()).powi(2);
    Window::new(lo, hi)
}

fn cmd_spectrum(args: &SpectrumArgs) -> Result<(), Failure> {
    let p = load(&args.config)?;
    let graph = p.graph.scaled(args.epsilon).map_err(input)?;
    let window = match (&args.window, p.window) {
        (Some(text), _) => parse_window(text)?,
        (None, Some(w)) => w,
        (None, None) => default_window(&graph, &p.conditions),
    };
    let spectrum = find_eigenvalues(&graph, &p.conditions, window, &p.solver).map_err(|e| match e {
        SolverError::InvalidWindow { .. } | SolverError::InvalidOption(_) => input(e),
        other => numerical(other),
    })?;
    for w in &spectrum.warnings {
        let SolverWarning::WindowTooCoarse {
            max_deviation,
            at_lambda,
            suggested_step,
        } = w;
        log::warn!(
            "eigenvalue count deviates from the Weyl estimate by {max_deviation:.1} near {at_lambda:.6e}; \
             try solver.scan_step = {suggested_step:.3e}"
        );
    }
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display())).map_err(io_failure)?;
            write_spectrum_csv(BufWriter::new(file), &spectrum).map_err(io_failure)?;
        }
        None => write_spectrum_csv(io::stdout().lock(), &spectrum).map_err(io_failure)?,
    }
    Ok(())
}

fn parse_expect(text: &str) -> Result<(usize, usize, usize), Failure> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| input(anyhow!("--expect must be N_MINUS,N_ZERO,N_PLUS, got {text:?}")))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(input(anyhow!("--expect must have three counts, got {text:?}"))),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(io_failure)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let p = load(&args.config)?;
    if !p.has_sweep {
        return Err(input(anyhow!("{} has no \"sweep\" section", args.config.display())));
    }
    let expect = args.expect.as_deref().map(parse_expect).transpose()?;
    let num_fast = args.num_fast.unwrap_or(p.num_fast);
    let mut prediction = predict(&p.graph, &p.conditions, num_fast, &p.solver).map_err(asymptotics_failure)?;
    if let Some((a, b, c)) = expect {
        prediction = prediction.with_counts(a, b, c);
    }
    let opts = SweepOptions {
        num_branches: prediction.m0 + num_fast,
        solver: p.solver.clone(),
    };
    let table = sweep(&p.graph, &p.conditions, &p.epsilons, &opts).map_err(asymptotics_failure)?;
    let table = fit_branches(&table);
    for a in &table.ambiguities {
        log::warn!(
            "branches {} and {} coincide at epsilon {:.3e} (lambda {:.6e}); matched by index",
            a.branches.0,
            a.branches.1,
            a.epsilon,
            a.lambda
        );
    }

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))
        .map_err(io_failure)?;
    let create = |name: &str| {
        let path = args.out_dir.join(name);
        File::create(&path)
            .with_context(|| format!("creating {}", path.display()))
            .map(BufWriter::new)
            .map_err(io_failure)
    };
    write_branches_csv(create("branches.csv")?, &table).map_err(io_failure)?;
    write_summary_csv(create("summary.csv")?, &table).map_err(io_failure)?;
    write_file(&args.out_dir.join("prediction.json"), &(prediction_json(&prediction) + "\n"))?;

    let (report, passed) = match verify(&prediction, &table) {
        Ok(r) => (r, true),
        Err(f) => (f.report, false),
    };
    write_file(&args.out_dir.join("verdict.json"), &(verdict_json(&report, &table) + "\n"))?;
    print!("{report}");
    if passed {
        println!("verdict: PASS");
        Ok(())
    } else {
        println!("verdict: FAIL");
        Err(Failure {
            code: VERIFICATION,
            error: anyhow!("verification failed"),
        })
    }
}

fn cmd_nrc(args: &NrcArgs) -> Result<(), Failure> {
    let cases: Vec<(String, MetricGraph, MatchingConditions)> = match (&args.config, args.random) {
        (Some(path), None) => {
            let p = load(path)?;
            vec![(path.display().to_string(), p.graph, p.conditions)]
        }
        (None, Some(count)) => {
            if args.edges == 0 {
                return Err(input(anyhow!("--edges must be positive")));
            }
            let graph = MetricGraph::from_lengths(&vec![1.0; args.edges]).map_err(input)?;
            let mut rng = seeded_rng(args.seed);
            (0..count)
                .map(|i| {
                    let cond = if i % 2 == 0 {
                        random_conditions(args.edges, &mut rng)
                    } else {
                        random_resonant_conditions(args.edges, &mut rng)
                    };
                    (format!("random {i}"), graph.clone(), cond)
                })
                .collect()
        }
        _ => return Err(input(anyhow!("give either a config file or --random N"))),
    };
    let mut mismatches = 0;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (name, graph, cond) in &cases {
        let (d, n) = match check_nrc_equivalence_for(graph, cond) {
            Ok(r) => (r.nrc_dimension, r.n_zero),
            Err(SubspaceError::EquivalenceViolation { nrc_dimension, n_zero }) => (nrc_dimension, n_zero),
            Err(e) => return Err(numerical(e)),
        };
        mismatches += usize::from(d != n);
        writeln!(out, "{name}: {}", nrc_line(d, n)).map_err(io_failure)?;
    }
    if mismatches > 0 {
        return Err(Failure {
            code: VERIFICATION,
            error: anyhow!("{mismatches} of {} cases mismatch", cases.len()),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Validate { config } => cmd_validate(config),
        Command::Classify { config, num_fast } => cmd_classify(config, *num_fast),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Nrc(args) => cmd_nrc(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
