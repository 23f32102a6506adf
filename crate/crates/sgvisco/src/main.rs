//! Command-line driver: runs, limit studies, refinement studies,
//! manufactured-solution verification and model checking.
//!
//! Exit codes: 0 success, 1 validation/configuration error, 2 runtime
//! blow-up, 3 failed acceptance check (check-model, --assert-inequalities).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sgvisco::config::RunConfig;
use sgvisco::diagnostics::{check_energy_inequality, check_structure_inequality, InequalitySlack};
use sgvisco::energy::{EnergyKind, EnergyModel, verify_hypotheses};
use sgvisco::error::Error;
use sgvisco::evolution::{run, RunOutcome};
use sgvisco::experiments::{
    galerkin_refinement_study, mms_study, run_limit_study, SweepParam,
};
use sgvisco::forcing::ManufacturedCase;
use sgvisco::reports;

#[derive(Parser)]
#[command(name = "sgvisco", about = "Pseudo-spectral strain-gradient viscoelasticity solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write diagnostics + snapshots
    Run {
        #[arg(long)]
        config: PathBuf,
        /// override [output].out_dir
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// check the energy and structure inequalities; exit 3 on failure
        #[arg(long)]
        assert_inequalities: bool,
    },
    /// Capillarity limit study (delta -> 0) against the delta = 0 system
    StudyDelta {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Viscosity limit study (nu -> 0) against the nu = 0 system
    StudyNu {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Galerkin cutoff refinement against the largest cutoff
    StudyGalerkin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// override [study].cutoffs
        #[arg(long, value_delimiter = ',')]
        cutoffs: Option<Vec<usize>>,
    },
    /// Manufactured-solution verification (temporal order + spatial errors)
    Mms {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// decreasing dt list
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-2, 5e-3, 2.5e-3, 1.25e-3])]
        dts: Vec<f64>,
        /// increasing grid list
        #[arg(long, value_delimiter = ',', default_values_t = vec![16, 32])]
        grids: Vec<usize>,
    },
    /// Verify the stored-energy hypotheses on sampled matrices
    CheckModel {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 3.0)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// override the semiconvexity shift K (negative control)
        #[arg(long)]
        k_override: Option<f64>,
    },
    /// Parse a config, apply defaults, print the canonical form
    PrintConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::BlowUp { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load(config: &PathBuf, out_dir: &Option<PathBuf>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::parse_file(config)?;
    if let Some(dir) = out_dir {
        cfg.output.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run { config, out_dir, assert_inequalities } => {
            let cfg = load(&config, &out_dir)?;
            let solver = cfg.solver_config()?;
            let init = cfg.initial_state()?;
            let mut trajectory = run(
                &solver,
                &init.state,
                cfg.output.record_every,
                cfg.output.snapshot_every,
                &cfg.output.lr_exponents,
            )?;
            if init.dropped_mean > 0.0 {
                let warning = format!(
                    "dropped nonzero mean of F0 (norm {:.3e})",
                    init.dropped_mean
                );
                eprintln!("warning: {warning}");
                trajectory.meta.warnings.push(warning);
            }
            reports::write_run(
                &cfg.output.out_dir,
                &solver,
                &cfg.to_config_string(),
                &trajectory,
                &cfg.output.lr_exponents,
                cfg.output.snapshot_every > 0,
            )?;
            let last = trajectory.records.last().expect("at least the initial record");
            println!(
                "run: {} records to t = {}, E = {:.6e}, curl residual {:.3e}",
                trajectory.records.len(),
                last.t,
                last.energy,
                last.curl_res
            );
            if let RunOutcome::BlewUp { t, norm } = trajectory.outcome {
                return Err(Error::BlowUp { t, norm });
            }
            if assert_inequalities {
                let slack =
                    InequalitySlack { rel_tol: 1e-4, c_slack: 10.0, dt: solver.dt };
                let energy = check_energy_inequality(&trajectory.records, &slack)?;
                let structure = check_structure_inequality(&trajectory.records, &slack)?;
                println!(
                    "energy inequality: {} (worst margin {:.3e} at t = {})",
                    if energy.passed { "pass" } else { "FAIL" },
                    energy.worst_margin,
                    energy.worst_t
                );
                println!(
                    "structure inequality: {} (worst margin {:.3e} at t = {})",
                    if structure.passed { "pass" } else { "FAIL" },
                    structure.worst_margin,
                    structure.worst_t
                );
                if !energy.passed || !structure.passed {
                    return Ok(ExitCode::from(3));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::StudyDelta { config, out_dir } => {
            run_study(SweepParam::Delta, &config, &out_dir)
        }
        Command::StudyNu { config, out_dir } => run_study(SweepParam::Nu, &config, &out_dir),
        Command::StudyGalerkin { config, out_dir, cutoffs } => {
            let cfg = load(&config, &out_dir)?;
            let solver = cfg.solver_config()?;
            let section = cfg
                .study
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("config has no [study] section".into()))?;
            let cutoffs = cutoffs.unwrap_or_else(|| section.cutoffs.clone());
            let grid = cfg.spectral_grid()?;
            let preset = preset_of(&cfg)?;
            let data = sgvisco::experiments::build_initial_fields(&preset, grid);
            let result =
                galerkin_refinement_study(&solver, &cutoffs, &data, &section.sample_times)?;
            reports::write_galerkin(&cfg.output.out_dir, &result)?;
            for row in &result.rows {
                println!(
                    "cutoff {:3} t = {:<5} |F - F_ref|_2 = {:.6e}",
                    row.cutoff, row.t, row.error_f
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Mms { config, out_dir, dts, grids } => {
            let cfg = load(&config, &out_dir)?;
            let solver = cfg.solver_config()?;
            let case = ManufacturedCase::standard(cfg.grid.d);
            let report = mms_study(&case, &solver, &dts, &grids)?;
            reports::write_mms(&cfg.output.out_dir, &report)?;
            for row in &report.temporal {
                println!("dt = {:9.3e}  e_y = {:.6e}  e_u = {:.6e}", row.dt, row.error_y, row.error_u);
            }
            if let Some(fit) = &report.temporal_fit {
                println!("temporal order: {:.3} (r^2 = {:.4})", fit.slope, fit.r_squared);
            }
            for row in &report.spatial {
                println!(
                    "n = {:3}  e_y = {:.6e}  e_u = {:.6e}{}",
                    row.n,
                    row.error_y,
                    row.error_u,
                    if row.resolved { "" } else { "  (under-resolved)" }
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckModel { model, d, samples, radius, seed, k_override } => {
            let kind = EnergyKind::parse(&model)?;
            let mut model = EnergyModel::new(kind, d);
            if let Some(k) = k_override {
                model = model.with_k(k);
            }
            let report = verify_hypotheses(&model, samples, radius, seed)?;
            println!(
                "model {} (d = {}, p = {}, K = {}): {} samples in |F| <= {}, seed {}",
                kind.name(),
                d,
                model.p,
                model.k,
                samples,
                radius,
                seed
            );
            for check in &report.checks {
                println!(
                    "  {:32} {}  worst margin {:+.6e} at |F| = {:.3}{}",
                    check.name,
                    if check.passed { "pass" } else { "FAIL" },
                    check.worst_margin,
                    check.worst_at,
                    match check.fitted_constant {
                        Some(c) => format!("  (fitted constant {c:.6})"),
                        None => String::new(),
                    }
                );
            }
            if report.all_passed() {
                println!("all hypotheses satisfied (worst margin {:+.3e})", report.worst_margin());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("hypothesis check FAILED");
                Ok(ExitCode::from(3))
            }
        }
        Command::PrintConfig { config } => {
            let cfg = RunConfig::parse_file(&config)?;
            print!("{}", cfg.to_config_string());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn preset_of(cfg: &RunConfig) -> Result<sgvisco::experiments::InitialPreset, Error> {
    use sgvisco::config::InitialKind;
    use sgvisco::experiments::InitialPreset;
    Ok(match cfg.initial.kind {
        InitialKind::Zero => InitialPreset::Zero,
        InitialKind::TwoMode => InitialPreset::TwoMode {
            amplitude: cfg.initial.amplitude,
            u_amplitude: cfg.initial.u_amplitude,
        },
        InitialKind::GaussianBump => InitialPreset::GaussianBump {
            amplitude: cfg.initial.amplitude,
            width: cfg.initial.width,
        },
        InitialKind::File => {
            return Err(Error::InvalidParameter(
                "file-based initial data is not supported for refinement studies".into(),
            ))
        }
    })
}

fn run_study(
    sweep: SweepParam,
    config: &PathBuf,
    out_dir: &Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let cfg = load(config, out_dir)?;
    let mut study = cfg.limit_study()?;
    study.sweep = sweep;
    if sweep == SweepParam::Nu {
        study.roughen = None;
    }
    let init = cfg.initial_state()?;
    let result = run_limit_study(&study, &init.state)?;
    reports::write_study(&cfg.output.out_dir, &result)?;
    for fit in &result.fits {
        println!(
            "r = {:<4} t = {:<5} slope = {:+.4} (r^2 = {:.4})",
            fit.r, fit.t, fit.fit.slope, fit.fit.r_squared
        );
    }
    if let Some(bound) = &result.rate_bound {
        println!(
            "rate bound: C1 = {:.4e}, C2 = {}, calibrated at t = {}, dominates later times: {}",
            bound.c1, bound.c2, bound.calibrated_at, bound.dominates
        );
    }
    Ok(ExitCode::SUCCESS)
}
