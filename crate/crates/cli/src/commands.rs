use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use quadwalk::body_planner::ara_star;
use quadwalk::footstep_planner::{plan_footsteps, FootholdPlan};
use quadwalk::sim::{
    corridor_params, run_pipeline, summarize, BuiltinTerrain, RunOutput, RunReport, Scenario, SimError, TrackingNoise,
};
use quadwalk::terrain::{HeightGrid, TerrainServer};
use quadwalk::traj_opt::{optimize, SLACK_TOL};
use rayon::prelude::*;

use crate::config::Overrides;
use crate::error::CliError;

/// Parse `x,y,theta`.
pub fn parse_pose(s: &str) -> Result<(f64, f64, f64), String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, th] if v.iter().all(|c| c.is_finite()) => Ok((x, y, th)),
        _ => Err(format!("expected x,y,theta with three finite numbers, got `{s}`")),
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Height grid file.
    #[arg(long)]
    pub terrain: PathBuf,
    /// Start body pose `x,y,theta`.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub start: (f64, f64, f64),
    /// Goal body pose `x,y,theta`.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub goal: (f64, f64, f64),
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Foothold plan file written by `plan`.
    #[arg(long)]
    pub footholds: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in scenario: flat, pallet, two_pallets, gap or stepping_stones.
    pub scenario: Option<String>,
    /// Height grid file to walk on instead of a built-in scenario.
    #[arg(long, conflicts_with = "scenario", requires_all = ["start", "goal"])]
    pub terrain: Option<PathBuf>,
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub start: Option<(f64, f64, f64)>,
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub goal: Option<(f64, f64, f64)>,
    /// Seed of the tracking noise; trial k uses seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent runs, executed in parallel.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Track the plan perfectly instead of adding seeded noise.
    #[arg(long)]
    pub no_noise: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run report JSON files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Also write the summary as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_grid(path: &Path) -> Result<HeightGrid, CliError> {
    let text = fs::read_to_string(path).map_err(|e| SimError::Scenario(format!("{}: {e}", path.display())))?;
    Ok(HeightGrid::from_text(&text).map_err(SimError::Terrain)?)
}

/// Body plan and footholds for the whole route; prints one line per anytime
/// iteration.
pub fn plan(args: &PlanArgs) -> Result<(), CliError> {
    let config = args.overrides.resolve()?;
    let grid = read_grid(&args.terrain)?;
    let server = TerrainServer::new(grid, config.cost).map_err(SimError::Terrain)?;
    let map = server.snapshot();
    let lattice = config.planner.lattice;
    let start = lattice.snap(args.start.0, args.start.1, args.start.2);
    let goal = lattice.snap(args.goal.0, args.goal.1, args.goal.2);
    let params = corridor_params(&config, &start, &goal);
    let outcome = ara_star(&start, &goal, &map, &params, config.schedule, |_| {}).map_err(SimError::BodyPlan)?;
    let best = outcome.best();
    let mut steps = config.footsteps;
    steps.horizon = (4 * best.actions.len()).max(1);
    let footholds =
        plan_footsteps(best, &lattice, &map, &steps).map_err(|source| SimError::Footstep { chunk: 0, source })?;

    write(&args.out, "actions.txt", &best.to_text(&lattice))?;
    write(&args.out, "footholds.txt", &footholds.to_text())?;
    write(&args.out, "costmap.txt", &map.to_text())?;
    for it in &outcome.iterations {
        println!("epsilon {:.2} expansions {} cost {:.6}", it.epsilon, it.expansions, it.cost);
    }
    println!(
        "{} actions, {} footholds, cost {:.6}{}",
        best.actions.len(),
        footholds.steps.len(),
        best.total_cost,
        if outcome.budget_exhausted { " (budget exhausted)" } else { "" }
    );
    Ok(())
}

/// Optimize the CoG trajectory for a foothold file and write the sampled
/// trajectory plus a per-phase slack summary.
pub fn optimize_cmd(args: &OptimizeArgs) -> Result<(), CliError> {
    let config = args.overrides.resolve()?;
    let stage = |source| SimError::Trajectory { chunk: 0, source };
    let footholds = FootholdPlan::from_text(&read(&args.footholds)?)
        .map_err(|source| SimError::Footstep { chunk: 0, source })?;
    let traj = optimize(&footholds, &config.trajectory).map_err(stage)?;
    let text = traj.solution.trajectory.to_text(config.export_rate).map_err(stage)?;
    write(&args.out, "trajectory.txt", &text)?;
    let summary = slack_summary(&traj, config.trajectory.dt);
    write(&args.out, "slack.txt", &summary)?;
    // Per-phase rows stay in the file; the totals go to the terminal.
    for line in summary.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_alphabetic())) {
        println!("{line}");
    }
    Ok(())
}

fn slack_summary(traj: &quadwalk::traj_opt::OptimizedTrajectory, dt: f64) -> String {
    let mut out = String::from("# phase kind duration samples min_slack\n");
    let mut min = f64::INFINITY;
    for (i, (p, slacks)) in traj.phases.phases.iter().zip(traj.sampled_slacks(dt)).enumerate() {
        let m = slacks.iter().copied().fold(f64::INFINITY, f64::min);
        min = min.min(m);
        let kind = format!("{:?}", p.kind).to_lowercase();
        let _ = writeln!(out, "{i} {kind} {:.6} {} {m:e}", p.duration, slacks.len());
    }
    let _ = writeln!(out, "duration {:.6}", traj.duration());
    let _ = writeln!(out, "scale {:.6}", traj.scale);
    let _ = writeln!(out, "junction_residual {:e}", traj.solution.junction_residual);
    let _ = writeln!(out, "min_slack {min:e}");
    let _ = writeln!(out, "stable {}", min >= -SLACK_TOL);
    let _ = writeln!(out, "inserted_quads {}", traj.phases.inserted_quads());
    out
}

fn scenario_for(args: &SimulateArgs) -> Result<Scenario, CliError> {
    match (&args.scenario, &args.terrain) {
        (Some(name), None) => {
            let kind: BuiltinTerrain = name.parse().map_err(|_| {
                let known: Vec<&str> = BuiltinTerrain::ALL.iter().map(|b| b.name()).collect();
                CliError::Usage(format!("unknown scenario `{name}`; expected one of {}", known.join(", ")))
            })?;
            Ok(Scenario::builtin(kind))
        }
        (None, Some(path)) => {
            let grid = read_grid(path)?;
            let name = path.file_stem().map_or("terrain".into(), |s| s.to_string_lossy().into_owned());
            Ok(Scenario::from_grid(&name, grid, args.start.unwrap_or_default(), args.goal.unwrap_or_default()))
        }
        _ => Err(CliError::Usage("give either a scenario name or --terrain".into())),
    }
}

/// Run one or more trials. A single trial writes every artifact; several
/// trials write one report each plus the aggregate table.
pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = args.overrides.resolve()?;
    let scenario = scenario_for(args)?;
    let noise = |k: u64| (!args.no_noise).then(|| TrackingNoise::with_seed(args.seed.wrapping_add(k)));
    if args.trials == 1 {
        let RunOutput {
            report,
            artifacts,
            error,
        } = run_pipeline(&scenario, &config, noise(0));
        artifacts.write_to(&args.out).map_err(|e| CliError::io(&args.out, e))?;
        write(&args.out, "report.json", &report.to_json())?;
        print_report(&report);
        return match error {
            Some(e) => Err(e.into()),
            None => Ok(()),
        };
    }
    let reports: Vec<RunReport> = (0..args.trials)
        .into_par_iter()
        .map(|k| run_pipeline(&scenario, &config, noise(k)).report)
        .collect();
    for (k, r) in reports.iter().enumerate() {
        write(&args.out, &format!("report_{k:03}.json"), &r.to_json())?;
    }
    let summary = summarize(&reports);
    write(&args.out, "summary.txt", &summary.to_table())?;
    print!("{}", summary.to_table());
    Ok(())
}

fn print_report(r: &RunReport) {
    println!(
        "{}: success {} duration {:.2} s speed {:.2} cm/s goal error {:.3} m min slack {:e} violations {} quads {} replans {}",
        r.scenario,
        r.success,
        r.duration,
        100.0 * r.traversal_speed,
        r.goal_error,
        r.min_zmp_slack,
        r.zmp_violations,
        r.quad_phase_count,
        r.replans
    );
    if let Some(f) = &r.failure {
        println!("failure: {f}");
    }
}

/// Aggregate reports into one row per scenario.
pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let reports = args
        .reports
        .iter()
        .map(|p| RunReport::from_json(&read(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = summarize(&reports);
    print!("{}", summary.to_table());
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}
