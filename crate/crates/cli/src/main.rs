//! `mmflow`: command-line front end.
//!
//! Exit status: 0 when every invoked check passes, 1 when some check fails,
//! 2 on bad usage or unreadable input, 3 when a solver gives up.

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use mmflow_core::curves::{benamou_brenier, verify_main_theorem, w2_derivative, CurveFile};
use mmflow_core::geodesics::{displacement_interpolation, uniform_times, verify_geodesic, BundleFile};
use mmflow_core::heatflow::{check_invariants, run_heat_flow};
use mmflow_core::hopflax::{trajectory, uniform_grid, verify_hl};
use mmflow_core::paths::{is_test_plan, lift_from_couplings, DEFAULT_PATH_CAP};
use mmflow_core::suite::{battery, run_all, smooth_battery};
use mmflow_core::transport::{solve_w2, OtFile};
use mmflow_core::{generate, CalculusKind, CurveSample, GeodesicBundle, Plan, Space, SpaceSpec, VerificationReport};

use io::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "mmflow", version, about = "Curves of measures, optimal transport and heat flow on finite metric measure spaces")]
struct Cli {
    /// Tolerances file (JSON); absent keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Record wall time in reports (makes them irreproducible byte-wise).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a space from a spec such as `path_grid_1d(32)`.
    Gen {
        #[arg(long)]
        spec: String,
        /// Overrides the seed of random specs.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact W2 with optimal coupling and Kantorovich potentials.
    W2 {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hopf-Lax trajectory on a uniform time grid, as CSV.
    Hopflax {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        f: PathBuf,
        /// Number of positive grid times.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Last grid time; defaults to half the squared diameter.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also verify the semigroup and write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Implicit Euler heat flow, as CSV.
    Heat {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        rho0: PathBuf,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also check the step-wise invariants and write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Displacement interpolation with potentials and lifting.
    Geodesic {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mu0: PathBuf,
        #[arg(long)]
        mu1: PathBuf,
        #[arg(long, default_value_t = 16)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plans on path space.
    Plan {
        #[command(subcommand)]
        action: PlanCommand,
    },
    /// Run verifiers and write a report.
    Verify {
        #[command(subcommand)]
        target: VerifyCommand,
    },
    /// Merge report files into one CSV summary.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PlanCommand {
    /// Lift a curve by chaining optimal couplings of consecutive samples.
    Lift {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a plan is a test plan, optionally lifting a given curve.
    Check {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Compression bound; defaults to the curve's, or unbounded.
        #[arg(long)]
        compression: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Operator norms against metric speed, action bound and Kuwada duality.
    Main {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value = "quadratic")]
        calculus: CalculusKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benamou-Brenier: no candidate curve has action below W2 squared.
    Bb {
        #[arg(long)]
        space: PathBuf,
        /// Candidate curves sharing their endpoints; repeatable.
        #[arg(long, required = true)]
        curve: Vec<PathBuf>,
        #[arg(long, default_value = "quadratic")]
        calculus: CalculusKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derivative of half W2 squared to a fixed measure along a curve.
    Derw2 {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Geodesic bundle: parametrization, potentials, lifting.
    Geodesic {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "quadratic")]
        calculus: CalculusKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every built-in suite.
    All {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("mmflow: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// `Ok(false)` when some check failed.
fn run(cli: Cli) -> CliResult<bool> {
    let tol = io::read_tolerances(cli.config.as_deref())?;
    let start = Instant::now();
    let finish = |mut report: VerificationReport, out: Option<&Path>| -> CliResult<bool> {
        if cli.timing {
            report.wall_time = Some(start.elapsed().as_secs_f64());
        }
        io::write_json(out, &report)?;
        io::summarize(&report);
        Ok(report.passed())
    };

    match cli.command {
        Command::Gen { spec, seed, out } => {
            let mut spec: SpaceSpec = spec.parse()?;
            if let Some(s) = seed {
                spec = spec.with_seed(s);
            }
            io::write_json(out.as_deref(), &generate::generate(spec)?.to_file())?;
            Ok(true)
        }
        Command::W2 { space, mu, nu, out } => {
            let space = io::read_space(&space)?;
            let mu = io::read_measure(&space, &mu)?;
            let nu = io::read_measure(&space, &nu)?;
            let ot = solve_w2(&space, &mu, &nu)?;
            io::write_json(out.as_deref(), &OtFile::from(&ot))?;
            Ok(true)
        }
        Command::Hopflax { space, f, grid, horizon, out, report } => {
            let space = io::read_space(&space)?;
            let f = io::read_values(&f)?;
            space.check_len("f", f.len())?;
            let horizon = horizon.unwrap_or(0.5 * space.diameter().powi(2));
            if !(horizon > 0.0) || grid == 0 {
                return Err(CliError::Usage("need a positive horizon and grid".into()));
            }
            let times = uniform_grid(grid, horizon);
            let traj = trajectory(&space, &f, &times)?;
            let mut w = io::csv_writer(out.as_deref())?;
            w.write_record(["t", "point", "Q_tf", "lip"]).map_err(io::csv_err)?;
            for (k, t) in traj.times.iter().enumerate() {
                for x in 0..space.len() {
                    let row = [t.to_string(), x.to_string(), traj.values[k][x].to_string(), traj.lips[k][x].to_string()];
                    w.write_record(&row).map_err(io::csv_err)?;
                }
            }
            w.flush().map_err(|e| CliError::Usage(e.to_string()))?;
            match report {
                Some(path) if grid >= 3 => {
                    let mut r = verify_hl(&space, &f, &times)?.to_report();
                    r.env("N", space.len());
                    r.env("grid", grid);
                    r.env("horizon", horizon);
                    finish(r, Some(&path))
                }
                Some(_) => Err(CliError::Usage("verification needs --grid of at least 3".into())),
                None => Ok(true),
            }
        }
        Command::Heat { space, rho0, horizon, dt, out, report } => {
            let space = io::read_space(&space)?;
            let rho0 = io::read_values(&rho0)?;
            let traj = run_heat_flow(&space, &rho0, horizon, dt)?;
            let mut w = io::csv_writer(out.as_deref())?;
            w.write_record(["t", "point", "rho", "laplacian", "energy"]).map_err(io::csv_err)?;
            for (k, t) in traj.times.iter().enumerate() {
                for x in 0..space.len() {
                    let row = [
                        t.to_string(),
                        x.to_string(),
                        traj.densities[k][x].to_string(),
                        traj.laplacians[k][x].to_string(),
                        traj.energies[k].to_string(),
                    ];
                    w.write_record(&row).map_err(io::csv_err)?;
                }
            }
            w.flush().map_err(|e| CliError::Usage(e.to_string()))?;
            match report {
                Some(path) => {
                    let inv = check_invariants(&space, &traj, &battery(&space, 4, 0));
                    let mut r = inv.to_report(&tol);
                    r.env("N", space.len());
                    r.env("dt", dt);
                    r.env("T", horizon);
                    finish(r, Some(&path))
                }
                None => Ok(true),
            }
        }
        Command::Geodesic { space, mu0, mu1, steps, out } => {
            let space = io::read_space(&space)?;
            let mu0 = io::read_measure(&space, &mu0)?;
            let mu1 = io::read_measure(&space, &mu1)?;
            if steps == 0 {
                return Err(CliError::Usage("--steps must be positive".into()));
            }
            let bundle = displacement_interpolation(&space, &mu0, &mu1, &uniform_times(steps))?;
            io::write_json(out.as_deref(), &bundle.to_file(&space))?;
            Ok(true)
        }
        Command::Plan { action } => match action {
            PlanCommand::Lift { space, curve, cap, out } => {
                let space = io::read_space(&space)?;
                let curve = read_curve(&space, &curve)?;
                let couplings = (0..curve.steps())
                    .map(|k| solve_w2(&space, &curve.measures[k], &curve.measures[k + 1]).map(|r| r.coupling))
                    .collect::<mmflow_core::Result<Vec<_>>>()?;
                let plan = lift_from_couplings(&space, &curve, &couplings, cap)?;
                io::write_json(out.as_deref(), &plan)?;
                Ok(true)
            }
            PlanCommand::Check { space, plan, curve, compression, out } => {
                let space = io::read_space(&space)?;
                let plan: Plan = io::read_json(&plan)?;
                let plan = Plan::new(plan.times, plan.paths, plan.weights)?;
                plan.validate_on(&space)?;
                let curve = curve.map(|c| read_curve(&space, &c)).transpose()?;
                let bound = compression.or(curve.as_ref().map(|c| c.compression)).unwrap_or(f64::INFINITY);
                let test = is_test_plan(&space, &plan, bound);
                let mut r = VerificationReport::new("plan");
                r.check("compression", "bounded compression", test.max_density, bound, bound * 1e-12);
                r.check("action", "finite kinetic action", if test.action.is_finite() { 0.0 } else { 1.0 }, 0.0, 0.0);
                if let Some(c) = &curve {
                    if c.times.len() != plan.times.len() {
                        return Err(CliError::Usage("plan and curve use different time grids".into()));
                    }
                    let mut dev: f64 = 0.0;
                    for k in 0..c.times.len() {
                        let want = c.measures[k].masses(&space);
                        for (a, b) in plan.marginal(&space, k).iter().zip(&want) {
                            dev = dev.max((a - b).abs());
                        }
                    }
                    r.check("marginals", "time marginals reproduce the curve", dev, 0.0, tol.exact);
                }
                r.diagnostic("action", test.action);
                r.diagnostic("max-density", test.max_density);
                r.env("paths", plan.paths.len());
                finish(r, out.as_deref())
            }
        },
        Command::Verify { target } => match target {
            VerifyCommand::Main { space, curve, calculus, seed, out } => {
                let space = io::read_space(&space)?;
                let curve = read_curve(&space, &curve)?;
                let mut r = verify_main_theorem(&space, &curve, calculus, &tol, seed)?.to_report();
                describe(&mut r, &space, &curve);
                r.env("seed", seed);
                finish(r, out.as_deref())
            }
            VerifyCommand::Bb { space, curve, calculus, out } => {
                let space = io::read_space(&space)?;
                let curves = curve.iter().map(|c| read_curve(&space, c)).collect::<CliResult<Vec<_>>>()?;
                let first = &curves[0];
                let (mu0, mu1) = (&first.measures[0], &first.measures[first.steps()]);
                let bb = benamou_brenier(&space, mu0, mu1, &curves, calculus, &tol)?;
                let h = mmflow_core::heatflow::resolution(&space);
                let dt = curves.iter().map(CurveSample::max_dt).fold(0.0, f64::max);
                let mut r = bb.to_report(tol.discretization(dt, h));
                r.env("N", space.len());
                r.env("candidates", curves.len());
                r.env("calculus", calculus);
                finish(r, out.as_deref())
            }
            VerifyCommand::Derw2 { space, curve, nu, out } => {
                let space = io::read_space(&space)?;
                let curve = read_curve(&space, &curve)?;
                let nu = io::read_measure(&space, &nu)?;
                let der = w2_derivative(&space, &curve, &nu)?;
                let h = mmflow_core::heatflow::resolution(&space);
                let mut r = VerificationReport::new("derw2");
                let t = tol.discretization(curve.max_dt(), h);
                r.check("residual", "derivative of W2 squared along the curve", der.max_residual, 0.0, t);
                describe(&mut r, &space, &curve);
                finish(r, out.as_deref())
            }
            VerifyCommand::Geodesic { bundle, calculus, out } => {
                let (space, bundle) = GeodesicBundle::from_file(io::read_json::<BundleFile>(&bundle)?)?;
                let fns = smooth_battery(&space, 3);
                let mut r = verify_geodesic(&space, &bundle, calculus, &fns, &tol)?.to_report();
                describe(&mut r, &space, &bundle.curve);
                r.env("calculus", calculus);
                finish(r, out.as_deref())
            }
            VerifyCommand::All { out } => {
                let r = run_all(&tol)?;
                finish(r, out.as_deref())
            }
        },
        Command::Report { files, out } => {
            let mut w = io::csv_writer(out.as_deref())?;
            w.write_record(["suite", "id", "anchor", "value", "bound", "tolerance", "pass"]).map_err(io::csv_err)?;
            for path in &files {
                let r: VerificationReport = io::read_json(path)?;
                for c in &r.checks {
                    let row = [
                        r.suite.clone(),
                        c.id.clone(),
                        c.anchor.clone(),
                        c.value.to_string(),
                        c.bound.to_string(),
                        c.tolerance.to_string(),
                        c.pass.to_string(),
                    ];
                    w.write_record(&row).map_err(io::csv_err)?;
                }
            }
            w.flush().map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(true)
        }
    }
}

fn read_curve(space: &Space, path: &Path) -> CliResult<CurveSample> {
    Ok(CurveSample::from_file(space, io::read_json::<CurveFile>(path)?)?)
}

fn describe(r: &mut VerificationReport, space: &Space, curve: &CurveSample) {
    r.env("N", space.len());
    r.env("K", curve.steps());
    r.env("dt", curve.max_dt());
}
