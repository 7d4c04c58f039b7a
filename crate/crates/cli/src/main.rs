use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};
use fluxlim_core::harness::suites::{run_suite, Suite, CROSSCHECK_MIN_REDUCTION};
use fluxlim_core::harness::{
    output_root, run_single, run_sweep, write_run, write_sweep, RunConfig, SweepConfig, Verdict,
};
use fluxlim_core::model::{critical_alpha, gamma_window, odi_exponents, quadratic_q, Params};
use fluxlim_core::solver_primal::crosscheck;
use fluxlim_core::{Error, InitialProfile, ProfileKind, RunStatus, SolverControls};

const EXIT_USAGE: u8 = 1;
const EXIT_RUN: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "fluxlim",
    version,
    about = "Radial flux-limited Keller-Segel simulator and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one configuration and write snapshots, series and checks.
    Simulate {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `$FLUXLIM_OUT/<label>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a list of limiter exponents or bisect for the transition.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the admissible moment-exponent window.
    Gamma {
        #[arg(long)]
        n: u32,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
    },
    /// Run property suites: lemma2, window, lemma4, lemma6, lemmas, crosscheck, all.
    Validate {
        #[arg(long, default_value = "lemmas")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the primal and mass-variable solvers under refinement.
    Crosscheck {
        #[arg(long, default_value_t = 3)]
        n: u32,
        #[arg(long, default_value_t = 0.45)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        t: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [64, 128, 256])]
        cells: Vec<usize>,
        #[arg(long, default_value_t = 0.3)]
        r0: f64,
        #[arg(long, default_value_t = 2.0)]
        sharpness: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_RUN,
            };
            ExitCode::from(code)
        }
    }
}

fn out_dir(out: Option<PathBuf>, label: &str) -> PathBuf {
    out.unwrap_or_else(|| output_root().join(label))
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Sweep { config, out } => sweep(&config, out),
        Command::Gamma { n, alpha } => gamma(n, alpha),
        Command::Validate { suite, seed } => validate(&suite, seed),
        Command::Crosscheck {
            n,
            alpha,
            t,
            cells,
            r0,
            sharpness,
        } => cross(n, alpha, t, &cells, r0, sharpness),
    }
}

fn simulate(config: &Path, out: Option<PathBuf>) -> Result<u8, Error> {
    let cfg = RunConfig::load(config)?;
    let bundle = run_single(&cfg)?;
    let dir = out_dir(out, &cfg.label);
    let manifest = write_run(&bundle, &dir)?;
    let v = bundle.verdicts();
    println!(
        "status: {}",
        serde_json::to_string(&v.status).unwrap_or_default()
    );
    println!("sup_u max: {:e}", bundle.outcome.sup_u_max());
    println!("(i1) holds: {}", v.i1_holds);
    if let Some(m) = v.moments {
        println!("moments: gamma={:.6} s0={:e}", m.gamma, m.s0);
        println!(
            "lemma4 checks: {} ({})",
            bundle.lemma4.len(),
            pass(v.lemma4_pass)
        );
        println!(
            "lemma6 checks: {} ({})",
            bundle.lemma6.len(),
            pass(v.lemma6_pass)
        );
    }
    if let Some(g) = &v.growth {
        println!(
            "growth fit: {}",
            serde_json::to_string(g).unwrap_or_default()
        );
    }
    println!(
        "wrote {} files to {}",
        manifest.files.len() + 1,
        dir.display()
    );
    if matches!(v.status, RunStatus::StepFailure { .. }) {
        return Ok(EXIT_RUN);
    }
    Ok(if v.lemma4_pass && v.lemma6_pass {
        0
    } else {
        EXIT_CHECK
    })
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn sweep(config: &Path, out: Option<PathBuf>) -> Result<u8, Error> {
    let cfg = SweepConfig::load(config)?;
    let report = run_sweep(&cfg)?;
    let dir = out_dir(out, &cfg.label);
    write_sweep(&cfg, &report, &dir)?;
    for r in &report.results {
        let verdict = match &r.verdict {
            Verdict::Blowup {
                t_est,
                refinement_delta,
                r0,
            } => format!(
                "blowup t_est={t_est:e} delta={:.2}% r0={}",
                refinement_delta * 100.0,
                r0.map_or("-".into(), |r| format!("{r:e}"))
            ),
            Verdict::Bounded { sup_u_max } => format!("bounded sup_u_max={sup_u_max:e}"),
            Verdict::Inconclusive { reason } => format!("inconclusive ({reason})"),
        };
        println!("alpha={:.6}  {verdict}", r.alpha);
    }
    if let Some((lo, hi)) = report.bracket {
        println!("critical alpha bracket: [{lo:.6}, {hi:.6}]");
    }
    if let Some(note) = &report.note {
        println!("note: {note}");
    }
    println!("report written to {}", dir.display());
    Ok(0)
}

fn gamma(n: u32, alpha: f64) -> Result<u8, Error> {
    let window = gamma_window(n, alpha).map_err(|e| Error::Config(e.to_string()))?;
    let ac = critical_alpha(n)?;
    println!("n={n} alpha={alpha} critical alpha={ac:.6}");
    println!("quadratic Q={:.6}", quadratic_q(n, alpha)?);
    if window.empty {
        println!("gamma window: empty (alpha ≥ critical {ac})");
        return Ok(0);
    }
    println!("gamma window: ({:.6}, {:.6})", window.lower, window.upper);
    match window.midpoint() {
        Some(g) => {
            let odi = odi_exponents(n, alpha, g)?;
            println!(
                "ODI exponents at gamma={g:.6}: phi power {:.6}, s0 power a1={:.6}, lambda={:.6}",
                2.0 - 2.0 * alpha,
                odi.a1,
                odi.lambda
            );
        }
        None => println!("window narrower than double precision; no representable gamma"),
    }
    Ok(0)
}

fn validate(suite: &str, seed: u64) -> Result<u8, Error> {
    let suite = Suite::parse(suite)?;
    let results = run_suite(suite, seed)?;
    let mut ok = true;
    for r in &results {
        ok &= r.passed();
        println!(
            "{:<10} {:<4} samples={} violations={}  {}",
            r.name,
            pass(r.passed()),
            r.samples,
            r.violations,
            r.detail
        );
    }
    Ok(if ok { 0 } else { EXIT_CHECK })
}

fn cross(
    n: u32,
    alpha: f64,
    t: f64,
    cells: &[usize],
    r0: f64,
    sharpness: f64,
) -> Result<u8, Error> {
    if cells.len() < 2 {
        return Err(Error::Config("need at least two cell counts".into()));
    }
    let params = Params::prototype(n, 1.0, 1.0, alpha)?;
    let profile = InitialProfile::new(ProfileKind::SmoothBump { r0, sharpness });
    let report = crosscheck(&profile, &params, t, cells, &SolverControls::default())?;
    println!("cells  steps  discrepancy");
    for l in &report.levels {
        println!("{:<6} {:<6} {:.4e}", l.cells, l.steps, l.discrepancy);
    }
    let factors = report.reduction_factors();
    println!(
        "reduction per refinement: {}",
        factors
            .iter()
            .map(|f| format!("{f:.2}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let ok = factors.iter().all(|&f| f >= CROSSCHECK_MIN_REDUCTION);
    Ok(if ok { 0 } else { EXIT_CHECK })
}
