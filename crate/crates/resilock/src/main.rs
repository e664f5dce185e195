use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use std::path::PathBuf;
use std::process::ExitCode;

use resilock::error::{Error, Result};
use resilock::io::SystemFile;
use resilock::linalg::Tolerance;
use resilock::reachability::{
    max_g, min_reach_time, reachable_at_time, reachable_by_time, Decision, ReachQuery,
    SphereMaxConfig, TargetBall,
};
use resilock::resilience::{
    check_p_resilience, degree_of_resilience, split, LossScenario, DEFAULT_COMBINATION_CAP,
};
use resilock::robust::{
    build_control_ellipsoid, build_disturbance_ellipsoid, min_guaranteed_radius, RobustComparison,
    RobustConfig,
};
use resilock::simulator::{
    generate_w, integrate, run_admire, Controller, JetController, JetScenario, SystemModel,
    DEFAULT_DWELL,
};
use resilock::synthesis::{ResilientController, SynthesisGains};

#[derive(Parser)]
#[command(
    name = "resilock",
    about = "Loss-of-control-authority analysis and resilient control synthesis for linear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check tolerance to actuator losses and report per-combination verdicts
    Analyze(AnalyzeArgs),
    /// Reachability verdicts for a given actuator loss
    Reach(ReachArgs),
    /// Closed-loop simulation with the resilient or LQR controller
    Simulate(SimulateArgs),
    /// Emit a generated control matrix as a system file
    Generate(GenerateArgs),
    /// Robust-control baseline: smallest guaranteed target radius
    Robust(RobustArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    file: PathBuf,
    /// Number of simultaneously lost actuators to enumerate
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Also search for the largest tolerated loss count
    #[arg(long)]
    degree: bool,
    /// Cap on the number of enumerated combinations
    #[arg(long, default_value_t = DEFAULT_COMBINATION_CAP)]
    cap: u128,
}

#[derive(Args)]
struct ReachArgs {
    file: PathBuf,
    /// Comma-separated 1-based lost actuator indices
    #[arg(long, value_delimiter = ',', required = true)]
    loss: Vec<usize>,
    /// Decide reachability exactly at this horizon
    #[arg(long)]
    at: Option<f64>,
    /// Decide reachability at some time within this horizon
    #[arg(long)]
    by: Option<f64>,
    /// Locate the smallest guaranteed reach time
    #[arg(long)]
    min_time: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// System file; omit when using a built-in jet scenario
    file: Option<PathBuf>,
    /// Built-in jet scenario: canard, elevon or rudder
    #[arg(long)]
    scenario: Option<String>,
    /// Controller: resilient, lqr or lqr-published
    #[arg(long, default_value = "resilient")]
    controller: String,
    /// Lost actuator indices for file-based simulation
    #[arg(long, value_delimiter = ',')]
    loss: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    dt: Option<f64>,
    /// Write the trajectory as CSV to this path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Family: identity-stack or sign-orthogonal
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Embedded fixture name: 6x24, 8x32 or 12x46
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RobustArgs {
    file: PathBuf,
    /// 1-based lost actuator index (single loss)
    #[arg(long, required = true)]
    loss: usize,
    #[arg(long, default_value_t = 25.0)]
    t_final: f64,
    /// Write per-step minimal eigenvalues of the shape matrix as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Reach(args) => cmd_reach(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Robust(args) => cmd_robust(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let file = SystemFile::load(&args.file)?;
    let cm = file.control_matrix()?;
    let tol = Tolerance::default();
    let mut report = check_p_resilience(&cm, args.p, &tol, args.cap)?;
    if args.degree {
        report.degree = Some(degree_of_resilience(&cm, &tol, args.cap)?);
    }
    eprintln!("lost actuators | min eig F | tolerable");
    for v in &report.verdicts {
        let names: Vec<String> = v.scenario.iter().map(|&j| cm.label(j)).collect();
        eprintln!(
            "{:<30} | {:>10.4} | {}",
            names.join(", "),
            v.min_eig,
            if v.indeterminate {
                "indeterminate"
            } else if v.tolerable {
                "yes"
            } else {
                "no"
            }
        );
    }
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

fn cmd_reach(args: ReachArgs) -> Result<()> {
    let file = SystemFile::load(&args.file)?;
    let cm = file.control_matrix()?;
    let scenario = LossScenario::new(&args.loss, cm.m())?;
    let sys = split(&cm, &scenario)?;
    let tol = Tolerance::default();
    let cfg = SphereMaxConfig {
        seed: args.seed,
        ..Default::default()
    };
    let x0 = file.x0_vector();
    let target = TargetBall::new(file.x_goal_vector(), file.epsilon.unwrap_or(0.1))?;
    let gmax = max_g(&sys, &cfg)?;
    let mut out = serde_json::json!({
        "loss": scenario.indices(),
        "max_g": gmax.value,
        "max_g_certified": gmax.certified,
    });
    let status = |d: Decision| match d {
        Decision::Yes => "reachable",
        Decision::No => "unreachable",
        Decision::Indeterminate => "indeterminate",
    };
    if let Some(t) = args.at {
        let q = ReachQuery::new(sys.clone(), x0.clone(), target.clone(), t)?;
        let (d, res) = reachable_at_time(&q, &cfg)?;
        out["at"] = serde_json::json!({
            "horizon": t,
            "status": status(d),
            "value": res.value,
            "argmax": res.argmax.as_slice(),
        });
    } else if let Some(t) = args.by {
        let q = ReachQuery::new(sys.clone(), x0.clone(), target.clone(), t)?;
        let (d, best_t) = reachable_by_time(&q, &cfg)?;
        out["by"] = serde_json::json!({
            "horizon": t,
            "status": status(d),
            "best_t": best_t,
        });
    } else if args.min_time {
        let t_star = min_reach_time(&sys, &x0, &target, &cfg, &tol)?;
        out["min_time"] = serde_json::json!(t_star);
    }
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    Ok(())
}

fn parse_jet_scenario(name: &str) -> Result<JetScenario> {
    match name {
        "canard" => Ok(JetScenario::CanardLoss),
        "elevon" => Ok(JetScenario::ElevonLoss),
        "rudder" => Ok(JetScenario::RudderLoss),
        other => Err(Error::InvalidInput(format!("unknown scenario {other:?}"))),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (traj, summary) = if let Some(name) = &args.scenario {
        let scenario = parse_jet_scenario(name)?;
        let controller = match args.controller.as_str() {
            "resilient" => JetController::Resilient,
            "lqr" => JetController::Lqr,
            "lqr-published" => JetController::LqrPublished,
            other => {
                return Err(Error::InvalidInput(format!("unknown controller {other:?}")))
            }
        };
        run_admire(scenario, controller, args.seed, args.dt)?
    } else {
        let path = args.file.as_ref().ok_or_else(|| {
            Error::InvalidInput("either a system file or --scenario is required".into())
        })?;
        if args.loss.is_empty() {
            return Err(Error::InvalidInput("--loss is required with a file".into()));
        }
        let file = SystemFile::load(path)?;
        let cm = file.control_matrix()?;
        let scenario = LossScenario::new(&args.loss, cm.m())?;
        let sys = split(&cm, &scenario)?;
        let ranges = sys
            .uncontrolled_ranges()
            .ok_or_else(|| Error::InvalidInput("ranges are required for simulation".into()))?
            .to_vec();
        let tol = Tolerance::default();
        let dt = args.dt.unwrap_or(tol.ode_step);
        let t_final = file.horizon.unwrap_or(25.0);
        let x0 = file.x0_vector();
        let x_goal = file.x_goal_vector();
        let model = match file.drift() {
            Some(a) => SystemModel::new(a, cm.clone(), false)?,
            None => SystemModel::driftless_from(cm.clone()),
        };
        let w = generate_w(&ranges, args.seed, t_final, DEFAULT_DWELL)?;
        let gains = SynthesisGains::compute(&sys, &x0, &x_goal, None)?;
        let sat = sys.controlled_ranges().map(|r| r.to_vec());
        let ctrl = Controller::Resilient(ResilientController::new(
            sys.clone(),
            gains,
            x_goal.clone(),
            sat.clone(),
        )?);
        let traj = integrate(&model, &sys, &ctrl, &w, &x0, &x_goal, t_final, dt)?;
        let summary = resilock::simulator::RunSummary {
            final_distance: traj.final_distance(),
            control_l2: traj.control_l2(),
            disturbance_l2: traj.disturbance_l2(),
            saturation_fraction: sat.map(|r| traj.saturation_fraction(&r)),
        };
        (traj, summary)
    };
    if let Some(path) = &args.out {
        let mut f = std::fs::File::create(path)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        traj.write_csv(&mut f)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let cm = if let Some(fixture) = &args.fixture {
        resilock::generators::appendix_fixture(fixture)?
    } else {
        let family = args
            .family
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("--family or --fixture is required".into()))?;
        let n = args
            .n
            .ok_or_else(|| Error::InvalidInput("--n is required".into()))?;
        match family {
            "identity-stack" => {
                let p = args
                    .p
                    .ok_or_else(|| Error::InvalidInput("--p is required".into()))?;
                resilock::generators::gen_identity_stack(n, p)?
            }
            "sign-orthogonal" => {
                let m = args.m.unwrap_or(2 * n + 1);
                resilock::generators::gen_sign_orthogonal(n, m)?
            }
            other => return Err(Error::InvalidInput(format!("unknown family {other:?}"))),
        }
    };
    let file = SystemFile::from_control_matrix(&cm);
    let text = serde_json::to_string_pretty(&file).unwrap();
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_robust(args: RobustArgs) -> Result<()> {
    let file = SystemFile::load(&args.file)?;
    let cm = file.control_matrix()?;
    let scenario = LossScenario::new(&[args.loss], cm.m())?;
    let sys = split(&cm, &scenario)?;
    let a = file
        .drift()
        .unwrap_or_else(|| nalgebra::DMatrix::zeros(cm.n(), cm.n()));
    let dist_range = sys
        .uncontrolled_ranges()
        .ok_or_else(|| Error::InvalidInput("ranges are required for the robust baseline".into()))?
        [0];
    let disturbance = build_disturbance_ellipsoid(dist_range)?;
    let q = disturbance.shape.as_matrix()[(0, 0)];
    let control = build_control_ellipsoid(sys.controlled_ranges().unwrap(), q)?;
    let x0 = file.x0_vector();
    let cfg = RobustConfig {
        t_final: args.t_final,
        ..Default::default()
    };
    let mut candidates: Vec<DVector<f64>> = (0..cm.n())
        .map(|i| {
            let mut v = DVector::zeros(cm.n());
            v[i] = 1.0;
            v
        })
        .collect();
    if x0.norm() > 1e-12 {
        candidates.push(x0.normalize());
    }
    let (mu, best_l) =
        min_guaranteed_radius(&a, &sys, &control, &disturbance, &candidates, &x0, &cfg)?;
    if let Some(path) = &args.out {
        let run = resilock::robust::integrate_internal_approx(
            &a, &sys, &control, &disturbance, &best_l, mu, &x0, &cfg,
        )?;
        let mut text = String::from("t,min_eig\n");
        for (t, e) in run.times.iter().zip(&run.min_eigs) {
            text.push_str(&format!("{t:.4},{e:.9e}\n"));
        }
        std::fs::write(path, text)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    }
    let report = RobustComparison {
        mu,
        best_direction: best_l.as_slice().to_vec(),
        initial_state_norm: x0.norm(),
        resilient_target_radius: resilock::admire::TARGET_RADIUS,
    };
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}
