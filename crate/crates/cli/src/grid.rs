//! Grid files for the gain search: `K1..K{n-1}` and `kb2..kbn` value lists,
//! a sampling `horizon`, and optional `samples` (absolute `x(0)`) or
//! `z_samples` (fractions of `k_b`).

use std::path::Path;

use fuzzy_backstep::feasibility::{FeasibilityProblem, InitialSample};
use fuzzy_backstep::SimConfig;

use crate::scenario::ScenarioError;

pub fn load_problem(path: &Path, base: &SimConfig) -> Result<FeasibilityProblem, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_problem(&table, base).map_err(ScenarioError::Invalid)
}

fn number_list(v: &toml::Value) -> Option<Vec<f64>> {
    v.as_array()?
        .iter()
        .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
        .collect()
}

fn nested_list(v: &toml::Value) -> Option<Vec<Vec<f64>>> {
    v.as_array()?.iter().map(number_list).collect()
}

pub fn parse_problem(
    table: &toml::Table,
    base: &SimConfig,
) -> Result<FeasibilityProblem, Vec<String>> {
    let n = base.order();
    let mut problems = Vec::new();
    let k_keys: Vec<String> = (1..n).map(|j| format!("K{j}")).collect();
    let kb_keys: Vec<String> = (2..=n).map(|j| format!("kb{j}")).collect();

    let mut grids = |keys: &[String]| -> Vec<Vec<f64>> {
        keys.iter()
            .map(|key| match table.get(key) {
                None => {
                    problems.push(format!("missing key `{key}`"));
                    Vec::new()
                }
                Some(v) => number_list(v).unwrap_or_else(|| {
                    problems.push(format!("`{key}` must be a list of numbers"));
                    Vec::new()
                }),
            })
            .collect()
    };
    let k_grid = grids(&k_keys);
    let kb_grid = grids(&kb_keys);

    let horizon = match table.get("horizon") {
        None => base.horizon,
        Some(v) => v
            .as_float()
            .or_else(|| v.as_integer().map(|i| i as f64))
            .unwrap_or_else(|| {
                problems.push("`horizon` must be a number".into());
                base.horizon
            }),
    };
    let mut samples = Vec::new();
    for (key, make) in [
        (
            "samples",
            InitialSample::State as fn(Vec<f64>) -> InitialSample,
        ),
        ("z_samples", InitialSample::ZFraction),
    ] {
        if let Some(v) = table.get(key) {
            match nested_list(v) {
                Some(list) => samples.extend(list.into_iter().map(make)),
                None => problems.push(format!("`{key}` must be a list of number lists")),
            }
        }
    }
    for key in table.keys() {
        let known = k_keys.contains(key)
            || kb_keys.contains(key)
            || ["horizon", "samples", "z_samples"].contains(&key.as_str());
        if !known {
            problems.push(format!("unknown key `{key}`"));
        }
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    let mut problem = FeasibilityProblem::new(base.clone(), k_grid, kb_grid, horizon);
    if !samples.is_empty() {
        problem.samples = samples;
    }
    problem.validate().map_err(|e| vec![e.to_string()])?;
    Ok(problem)
}
