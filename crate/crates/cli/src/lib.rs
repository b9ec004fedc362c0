//! Command implementations behind the `fbs` binary.

pub mod expr;
pub mod grid;
pub mod output;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fuzzy_backstep::feasibility::{evaluate_grid, select_best, verify_prerequisites};
use fuzzy_backstep::{check_constraints, simulate, Error};
use thiserror::Error as ThisError;

use crate::output::{feasibility_json, feasibility_text, plot_script, write_csv, RunSummary};
use crate::scenario::{Scenario, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BARRIER: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_EMPTY_FEASIBLE_SET: i32 = 5;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ScenarioError),
    #[error("{0}")]
    Run(Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Run(Error::BarrierViolation { .. }) => EXIT_BARRIER,
            Self::Run(Error::SimulationDiverged { .. }) => EXIT_DIVERGED,
            Self::Run(Error::EmptyFeasibleSet { .. }) => EXIT_EMPTY_FEASIBLE_SET,
            Self::Run(_) => EXIT_CONFIG,
            Self::Write { .. } => EXIT_IO,
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

/// `--out`, else the scenario's `out_dir`, else `out/<name>`.
pub fn output_dir(scenario: &Scenario, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| scenario.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name))
}

/// Runs one scenario and writes `trajectory.csv`, `report.txt`,
/// `report.json` and `plot.py`. Returns the summary and the output directory.
pub fn run_simulation(
    path: &Path,
    stride: Option<usize>,
    out: Option<&Path>,
) -> Result<(RunSummary, PathBuf), CliError> {
    let scenario = Scenario::load(path)?;
    let cfg = &scenario.config;
    let dir = output_dir(&scenario, out);

    let started = Instant::now();
    let traj = simulate(cfg).map_err(CliError::Run)?;
    let runtime = started.elapsed().as_secs_f64();

    let k_c = cfg.plant.constraint_bounds();
    let constraints = check_constraints(&traj, k_c, &cfg.gains.k_b);
    let rho: Vec<f64> = constraints.rows.iter().map(|r| r.rho).collect();
    let prerequisites =
        verify_prerequisites(cfg, Some(&rho), cfg.horizon).map_err(CliError::Run)?;
    let summary = RunSummary::new(&scenario.name, &traj, constraints, prerequisites, runtime);

    prepare_dir(&dir)?;
    let csv_path = dir.join("trajectory.csv");
    let file = fs::File::create(&csv_path).map_err(|source| CliError::Write {
        path: csv_path.clone(),
        source,
    })?;
    write_csv(
        &traj,
        stride.unwrap_or(scenario.stride),
        std::io::BufWriter::new(file),
    )
    .map_err(|source| CliError::Write {
        path: csv_path.clone(),
        source,
    })?;
    write_file(&dir.join("report.txt"), summary.text())?;
    let json = serde_json::to_string_pretty(&summary.json()).expect("json values serialize");
    write_file(&dir.join("report.json"), json)?;
    write_file(
        &dir.join("plot.py"),
        plot_script(traj.n, k_c, &cfg.gains.k_b),
    )?;
    Ok((summary, dir))
}

/// Runs the grid search and writes `feasibility.txt` and `feasibility.json`.
/// The report text is returned alongside the outcome of the selection.
pub fn run_feasibility(
    path: &Path,
    grid: &Path,
    out: Option<&Path>,
) -> Result<(String, PathBuf), (CliError, Option<String>)> {
    let scenario = Scenario::load(path).map_err(|e| (e.into(), None))?;
    let cfg = &scenario.config;
    let problem = grid::load_problem(grid, cfg).map_err(|e| (e.into(), None))?;
    let dir = output_dir(&scenario, out);
    let n = cfg.order();

    let base_prereq =
        verify_prerequisites(cfg, None, problem.horizon).map_err(|e| (CliError::Run(e), None))?;
    let outcomes = evaluate_grid(&problem).map_err(|e| (CliError::Run(e), None))?;
    let selection = select_best(&outcomes);
    let best = selection.as_ref().ok().copied();
    let best_prereq = match best {
        Some(b) => {
            let c = problem
                .config_for(&b.sigma)
                .map_err(|e| (CliError::Run(e), None))?;
            Some(
                verify_prerequisites(&c, Some(&b.estimate.rho), problem.horizon)
                    .map_err(|e| (CliError::Run(e), None))?,
            )
        }
        None => None,
    };

    let text = feasibility_text(n, &outcomes, best, &base_prereq, best_prereq.as_ref());
    let json = feasibility_json(n, &outcomes, best, &base_prereq, best_prereq.as_ref());
    let write = || -> Result<(), CliError> {
        prepare_dir(&dir)?;
        write_file(&dir.join("feasibility.txt"), &text)?;
        write_file(
            &dir.join("feasibility.json"),
            serde_json::to_string_pretty(&json).expect("json values serialize"),
        )
    };
    write().map_err(|e| (e, Some(text.clone())))?;
    match selection {
        Ok(_) => Ok((text, dir)),
        Err(e) => Err((CliError::Run(e), Some(text))),
    }
}

/// Loads a scenario and describes the derived quantities without simulating.
pub fn validate_report(path: &Path) -> Result<String, CliError> {
    let scenario = Scenario::load(path)?;
    let cfg = &scenario.config;
    let default_lambda = fuzzy_backstep::ControllerGains::pade_lambda(cfg.delay);
    let mut s = format!("scenario: {} ({})\n", scenario.name, path.display());
    s.push_str(&format!(
        "plant: {} (n = {})\n",
        cfg.plant.name(),
        cfg.order()
    ));
    match scenario.lambda_given {
        Some(l) => s.push_str(&format!(
            "lambda: {l} given; 2/tau default = {default_lambda}\n"
        )),
        None => s.push_str(&format!(
            "lambda: not given; using 2/tau default = {default_lambda}\n"
        )),
    }
    s.push_str(&format!(
        "A0 = sup|y_d| on [0, {}]: {:.6}\n",
        cfg.horizon,
        cfg.reference.amplitude_bound(cfg.horizon)
    ));
    s.push_str(&format!(
        "delay steps m = tau/h: {} (tau = {}, h = {})\n",
        cfg.delay_steps().map_err(CliError::Run)?,
        cfg.delay,
        cfg.step
    ));
    s.push_str(&format!("steps: {}\n", cfg.step_count()));
    let rules: Vec<String> = cfg
        .bases
        .iter()
        .map(|b| b.rule_count().to_string())
        .collect();
    s.push_str(&format!(
        "FLS rules per level: {} ({} per input dimension)\n",
        rules.join(", "),
        scenario.fls_rules
    ));
    let prereq = verify_prerequisites(cfg, None, cfg.horizon).map_err(CliError::Run)?;
    s.push_str(&output::prerequisites_text(&prereq));
    let warnings = prereq.violations().count();
    if warnings > 0 {
        s.push_str(&format!(
            "ok ({warnings} prerequisite warning(s); the scenario is runnable)\n"
        ));
    } else {
        s.push_str("ok\n");
    }
    Ok(s)
}
