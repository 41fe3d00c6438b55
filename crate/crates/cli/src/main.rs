use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use keyhole_core::certify::run_props;
use keyhole_core::design_dump::DesignDump;
use keyhole_core::evaluation::{
    design_links, dipole_sweep, dof_from_links, muxg_slope, nested_subsets, placement_links,
    rate_curve, UserLink, SNR_HI, SNR_LO,
};
use keyhole_core::geometry::DEFAULT_MIN_ANGLE_SEP;
use keyhole_core::report::write_csv;
use keyhole_core::scenario_file::{ScenarioFile, Scheme};
use keyhole_core::zfdesign::{auto_assignment, design_zf, optimal_placement_design};
use keyhole_core::{Error, Scenario};

#[derive(Parser)]
#[command(
    name = "keyhole",
    version,
    about = "Polarimetric line-of-sight interference-channel simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design precoders and combiners for a scenario and dump them.
    Design {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the random-placement seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check the certificate of a dumped design.
    Verify { design: PathBuf },
    /// Sum rate over the scenario's SNR grid, as CSV.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = SNR_LO)]
        snr_lo: f64,
        #[arg(long, default_value_t = SNR_HI)]
        snr_hi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certified DOF against dipole component count for 5 users.
    Fig5 {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiplexing-gain checks for each configuration family.
    Props {
        /// Restrict to one user count.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SNR_LO)]
        snr_lo: f64,
        #[arg(long, default_value_t = SNR_HI)]
        snr_hi: f64,
        /// Write result records as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Error(Error),
    Certificate(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::InvalidScenario { .. }
        | Error::InvalidComponents(_)
        | Error::DegenerateGeometry { .. }
        | Error::IndexOutOfRange { .. }
        | Error::Unsupported(_) => 2,
        Error::InfeasibleNulling { .. }
        | Error::IncompleteAssignment { .. }
        | Error::DegenerateDirections { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Error(e) => (exit_code(&e), e.to_string()),
                Failure::Certificate(m) => (4, format!("certificate violated: {m}")),
                Failure::Usage(m) => (2, m),
            };
            eprintln!("keyhole: {}", msg.replace('\n', " "));
            ExitCode::from(code)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| {
            Failure::Error(Error::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<(ScenarioFile, Scenario), Failure> {
    let mut file = ScenarioFile::load(path)?;
    if let Some(seed) = seed {
        if file.placement.is_explicit() {
            return Err(Failure::Usage(
                "--seed only applies to random placement".into(),
            ));
        }
        file.placement.seed = seed;
    }
    let scenario = file.to_scenario()?;
    Ok((file, scenario))
}

/// Designs according to the file's scheme; also returns the post-beamforming links.
fn build(file: &ScenarioFile, scenario: &Scenario) -> Result<(DesignDump, Vec<UserLink>), Failure> {
    match file.scheme {
        Scheme::FixedZf => {
            let assignment = auto_assignment(scenario)?;
            let design = design_zf(scenario, &assignment)?;
            let links = design_links(&design, scenario)?;
            Ok((
                DesignDump::from_design(scenario, file.snr_grid.clone(), &design),
                links,
            ))
        }
        Scheme::OptimalPlacement => {
            let placement = optimal_placement_design(scenario)?;
            let links = placement_links(&placement, scenario)?;
            Ok((
                DesignDump::from_placement(scenario, file.snr_grid.clone(), &placement)?,
                links,
            ))
        }
    }
}

fn check_snr_pair(lo: f64, hi: f64) -> Result<(), Failure> {
    if lo > 0.0 && hi > lo && hi.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "need 0 < --snr-lo < --snr-hi, got {lo} and {hi}"
        )))
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Design {
            scenario,
            seed,
            out,
        } => {
            let (file, scenario) = load_scenario(&scenario, seed)?;
            let (dump, _) = build(&file, &scenario)?;
            let verdict = dump.verify()?;
            emit(out.as_deref(), &dump.to_text())?;
            if out.is_some() {
                println!("leakage_max {:e}", verdict.check.leakage_max);
            }
            if !verdict.is_certified() {
                return Err(Failure::Certificate(describe(&verdict)));
            }
            Ok(())
        }
        Command::Verify { design } => {
            let text = std::fs::read_to_string(&design).map_err(|e| Error::Io {
                path: design.display().to_string(),
                message: e.to_string(),
            })?;
            let dump = DesignDump::parse(&text)?;
            let verdict = dump.verify()?;
            if !verdict.is_certified() {
                return Err(Failure::Certificate(describe(&verdict)));
            }
            println!("certified leakage_max {:e}", verdict.check.leakage_max);
            Ok(())
        }
        Command::Sweep {
            scenario,
            seed,
            snr_lo,
            snr_hi,
            out,
        } => {
            check_snr_pair(snr_lo, snr_hi)?;
            let (file, scenario) = load_scenario(&scenario, seed)?;
            let (_, links) = build(&file, &scenario)?;
            let mut grid = file.snr_grid.clone();
            grid.extend([snr_lo, snr_hi]);
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let curve = rate_curve(file.scheme.token(), &links, &grid);
            let mut csv = String::from("snr,sum_rate\n");
            for (snr, rate) in curve
                .points
                .iter()
                .filter(|(s, _)| file.snr_grid.contains(s))
            {
                let _ = writeln!(csv, "{snr:e},{rate}");
            }
            emit(out.as_deref(), &csv)?;
            if out.is_some() {
                let est = muxg_slope(&curve, snr_lo, snr_hi)?;
                println!("gamma_hat {} dof {}", est.gamma_hat, dof_from_links(&links));
            }
            Ok(())
        }
        Command::Fig5 { trials, seed, out } => {
            if trials == 0 {
                return Err(Failure::Usage("--trials must be at least 1".into()));
            }
            let rows = dipole_sweep(5, &nested_subsets(), trials, seed, DEFAULT_MIN_ANGLE_SEP)?;
            let mut csv = String::from("size,components,trials,dof,min_dof,max_dof\n");
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    r.components.len(),
                    r.components.tokens(),
                    r.trials,
                    r.mean_dof,
                    r.min_dof,
                    r.max_dof
                );
            }
            emit(out.as_deref(), &csv)
        }
        Command::Props {
            k,
            seed,
            snr_lo,
            snr_hi,
            out,
        } => {
            check_snr_pair(snr_lo, snr_hi)?;
            let checks = run_props(k, seed, (snr_lo, snr_hi))?;
            for c in &checks {
                println!("{}", c.summary());
            }
            if let Some(path) = out {
                let records: Vec<_> = checks.iter().map(|c| c.record.clone()).collect();
                emit(Some(&path), &write_csv(&records))?;
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(Failure::Certificate(format!(
                    "{failed} of {} checks failed",
                    checks.len()
                )));
            }
            Ok(())
        }
    }
}

fn describe(v: &keyhole_core::design_dump::Verification) -> String {
    let low_rank: Vec<String> = v
        .check
        .effective
        .iter()
        .filter(|e| e.rank() < 2)
        .map(|e| format!("user {} rank {}", e.user, e.rank()))
        .collect();
    let mut msg = format!(
        "leakage_max {:e}, orthonormality defect {:e}",
        v.check.leakage_max, v.orthonormality_defect
    );
    if !low_rank.is_empty() {
        msg.push_str(&format!(", {}", low_rank.join(", ")));
    }
    msg
}
