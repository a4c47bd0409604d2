use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ddbound::bounds::BoundConstants;
use ddbound_experiments::calibrate::{calibrate, load_constants, write_constants};
use ddbound_experiments::config::{ScenarioConfig, SweepSpec};
use ddbound_experiments::report::{append_csv, print_summary, write_json};
use ddbound_experiments::runner::run_scenario;
use ddbound_experiments::suites::{run_suite, Suite};
use ddbound_experiments::sweep::run_sweep;
use ddbound_experiments::thread_pool;

/// Dynamical-decoupling simulator and bound checker.
#[derive(Parser)]
#[command(name = "ddbound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and check every bound; exit 0 iff all pass.
    Simulate {
        config: PathBuf,
        /// Directory for report.json and report.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Bound constants file (defaults to the built-in calibration).
        #[arg(long)]
        constants: Option<PathBuf>,
    },
    /// Run a scaling sweep, skipping grid points already in the output.
    Sweep {
        spec: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        constants: Option<PathBuf>,
    },
    /// Run a property suite with fixed seeds.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Recompute the bound constants.
    Calibrate {
        #[arg(long, default_value = "constants.json")]
        out: PathBuf,
    },
}

/// Exit codes: 0 success, 1 bound violation or failed property, 2 bad input,
/// 3 outside the convergence domain.
fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate {
            config,
            out,
            constants,
        } => simulate(&config, &out, constants.as_deref()),
        Command::Sweep {
            spec,
            out,
            constants,
        } => sweep(&spec, &out, constants.as_deref()),
        Command::Verify { suite } => verify(suite),
        Command::Calibrate { out } => recalibrate(&out),
    };
    ExitCode::from(code)
}

fn constants(path: Option<&Path>) -> anyhow::Result<BoundConstants> {
    match path {
        Some(p) => load_constants(p),
        None => Ok(BoundConstants::default()),
    }
}

fn fail(code: u8, err: impl std::fmt::Display) -> u8 {
    eprintln!("error: {err:#}");
    code
}

fn simulate(config: &Path, out: &Path, consts: Option<&Path>) -> u8 {
    let cfg = match ScenarioConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(2, format!("{e:#}")),
    };
    let consts = match constants(consts) {
        Ok(c) => c,
        Err(e) => return fail(2, format!("{e:#}")),
    };
    let report = match run_scenario(&cfg, &consts) {
        Ok(r) => r,
        Err(e) => return fail(e.exit_code() as u8, &e),
    };
    if let Err(e) = std::fs::create_dir_all(out)
        .map_err(anyhow::Error::from)
        .and_then(|_| write_json(&out.join("report.json"), &cfg, &consts, &report))
        .and_then(|_| append_csv(&out.join("report.csv"), &report))
    {
        return fail(2, format!("{e:#}"));
    }
    let _ = print_summary(&mut std::io::stdout().lock(), &report);
    if report.all_pass {
        0
    } else {
        eprintln!("bound violations: {}", report.checks.failures().join(", "));
        1
    }
}

fn sweep(spec: &Path, out: &Path, consts: Option<&Path>) -> u8 {
    let spec = match SweepSpec::load(spec) {
        Ok(s) => s,
        Err(e) => return fail(2, format!("{e:#}")),
    };
    let run = constants(consts)
        .and_then(|c| Ok((c, thread_pool()?)))
        .and_then(|(c, pool)| run_sweep(&spec, out, &c, &pool));
    let outcome = match run {
        Ok(o) => o,
        Err(e) => return fail(2, format!("{e:#}")),
    };
    println!(
        "{} points computed, {} already present; rows in {}, fits in {}",
        outcome.computed,
        outcome.skipped,
        outcome.points_csv.display(),
        outcome.fit_csv.display()
    );
    for f in &outcome.fits {
        let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        println!(
            "tau = {} m = {} replicate = {}: slope(m_star) = {}, slope(m_hat) = {}, J linearity = {} [{}]",
            f.tau,
            f.m,
            f.replicate,
            show(f.slope_m_star),
            show(f.slope_m_hat),
            show(f.j_linearity),
            f.status
        );
    }
    let failed = outcome.rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!("{failed} grid points failed; see the status column");
        1
    } else {
        0
    }
}

fn verify(suite: Suite) -> u8 {
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => return fail(2, format!("{e:#}")),
    };
    let mut out = std::io::stdout().lock();
    let results = run_suite(suite, &pool, &mut |r| {
        let _ = writeln!(out, "{r}");
    });
    let failed = results.iter().filter(|r| !r.pass()).count();
    let _ = writeln!(out, "{} properties, {} failed", results.len(), failed);
    u8::from(failed > 0)
}

fn recalibrate(out: &Path) -> u8 {
    let run = thread_pool()
        .and_then(|pool| calibrate(&pool))
        .and_then(|file| {
            write_constants(out, &file)?;
            Ok(file)
        });
    match run {
        Ok(file) => {
            let c = file.constants;
            println!(
                "c = {:?}\nd = {:?}\nc_prime = {:?}\na2 = {:?}\na3 = {:?}\nwritten to {}",
                c.c,
                c.d,
                c.c_prime,
                c.a2,
                c.a3,
                out.display()
            );
            0
        }
        Err(e) => fail(1, format!("{e:#}")),
    }
}
