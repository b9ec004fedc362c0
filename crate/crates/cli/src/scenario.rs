//! Scenario files: flat TOML with one key per parameter. Unknown keys are
//! rejected and missing required keys are reported together.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use fuzzy_backstep::plant::{DisturbanceFn, DynamicsFn};
use fuzzy_backstep::sim::{default_bases, InitialConditions, DEFAULT_RULES_PER_DIM};
use fuzzy_backstep::{
    example_plant, null_plant, ControllerGains, PlantModel, ReferenceSignal, SimConfig,
};
use serde::Deserialize;
use thiserror::Error;

use crate::expr::Expr;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{}", itemize(.0))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Model(#[from] fuzzy_backstep::Error),
}

fn itemize(items: &[String]) -> String {
    let mut s = format!("{} problem(s) in scenario:", items.len());
    for item in items {
        s.push_str("\n  - ");
        s.push_str(item);
    }
    s
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    /// `"example"`, `"null"` or `"custom"`.
    pub plant: Option<String>,
    /// Custom dynamics: `f[i]` may use `x1..x{i+1}`, with `u` in place of `x{n+1}`.
    pub f: Option<Vec<String>>,
    /// Custom disturbances in `t`.
    pub d: Option<Vec<String>>,
    pub d_bound: Option<Vec<f64>>,
    pub k_c: Option<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Option<Vec<f64>>,
    pub k_b: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub upsilon: Option<Vec<f64>>,
    pub filter_tau: Option<Vec<f64>>,
    pub a: Option<Vec<f64>>,
    pub kappa: Option<f64>,
    pub lambda: Option<f64>,
    pub reference_offset: Option<f64>,
    pub reference_sin: Option<f64>,
    pub reference_cos: Option<f64>,
    pub reference_omega: Option<f64>,
    pub tau: Option<f64>,
    pub h: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub delta_hat0: Option<Vec<f64>>,
    pub theta_hat0: Option<Vec<f64>>,
    pub u0: Option<f64>,
    pub chi0: Option<f64>,
    pub fls_rules: Option<usize>,
    pub out_dir: Option<String>,
    pub stride: Option<usize>,
}

/// A fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub config: SimConfig,
    /// `lambda` as written in the file, if any.
    pub lambda_given: Option<f64>,
    pub fls_rules: usize,
    /// Output directory from the file, resolved against the file's directory.
    pub out_dir: Option<PathBuf>,
    pub stride: usize,
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

impl Scenario {
    /// Loads, resolves and validates a scenario file.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = read_toml(path)?;
        let default_name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        let mut s = Self::from_file(file, default_name)?;
        if let Some(dir) = &s.out_dir {
            if dir.is_relative() {
                s.out_dir = Some(path.parent().unwrap_or(Path::new(".")).join(dir));
            }
        }
        s.config.validate()?;
        Ok(s)
    }

    /// Resolves every key without running the closed-loop initial checks.
    pub fn from_file(f: ScenarioFile, default_name: String) -> Result<Self, ScenarioError> {
        let mut problems = Vec::new();
        let plant_kind = f.plant.clone().unwrap_or_else(|| "example".into());

        macro_rules! need {
            ($field:ident, $key:literal) => {
                match &f.$field {
                    Some(v) => Some(v.clone()),
                    None => {
                        problems.push(format!("missing key `{}`", $key));
                        None
                    }
                }
            };
        }

        let k = need!(k, "K");
        let k_b = need!(k_b, "k_b");
        let sigma = need!(sigma, "sigma");
        let gamma = need!(gamma, "gamma");
        let beta = need!(beta, "beta");
        let upsilon = need!(upsilon, "upsilon");
        let filter_tau = need!(filter_tau, "filter_tau");
        let kappa = need!(kappa, "kappa");
        let ref_sin = need!(reference_sin, "reference_sin");
        let ref_cos = need!(reference_cos, "reference_cos");
        let ref_omega = need!(reference_omega, "reference_omega");
        let tau = need!(tau, "tau");
        let h = need!(h, "h");
        let horizon = need!(horizon, "T");
        let x0 = need!(x0, "x0");
        let delta_hat0 = need!(delta_hat0, "delta_hat0");
        let theta_hat0 = need!(theta_hat0, "theta_hat0");

        let plant = match plant_kind.as_str() {
            "example" => {
                let p = example_plant();
                if let Some(kc) = &f.k_c {
                    if kc.as_slice() != p.constraint_bounds() {
                        problems.push(format!(
                            "`k_c` = {kc:?} differs from the example plant's fixed bounds {:?}",
                            p.constraint_bounds()
                        ));
                    }
                }
                for (key, present) in [
                    ("f", f.f.is_some()),
                    ("d", f.d.is_some()),
                    ("d_bound", f.d_bound.is_some()),
                ] {
                    if present {
                        problems.push(format!("`{key}` is only allowed with plant = \"custom\""));
                    }
                }
                Some(p)
            }
            "null" => match need!(k_c, "k_c") {
                Some(kc) => match null_plant(kc) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        problems.push(e.to_string());
                        None
                    }
                },
                None => None,
            },
            "custom" => {
                let kc = need!(k_c, "k_c");
                let fs = need!(f, "f");
                match (kc, fs) {
                    (Some(kc), Some(fs)) => {
                        match custom_plant(&fs, f.d.as_deref(), f.d_bound.as_deref(), kc) {
                            Ok(p) => Some(p),
                            Err(mut e) => {
                                problems.append(&mut e);
                                None
                            }
                        }
                    }
                    _ => None,
                }
            }
            other => {
                problems.push(format!(
                    "unknown plant `{other}` (expected \"example\", \"null\" or \"custom\")"
                ));
                None
            }
        };

        if let Some(plant) = &plant {
            let n = plant.order();
            let mut check = |key: &str, v: &Option<Vec<f64>>, expected: usize| {
                if let Some(v) = v {
                    if v.len() != expected {
                        problems.push(format!(
                            "`{key}` has {} entries, expected {expected}",
                            v.len()
                        ));
                    }
                }
            };
            check("K", &k, n + 1);
            for (key, v) in [
                ("k_b", &k_b),
                ("sigma", &sigma),
                ("gamma", &gamma),
                ("beta", &beta),
                ("upsilon", &upsilon),
                ("filter_tau", &filter_tau),
                ("x0", &x0),
                ("delta_hat0", &delta_hat0),
                ("theta_hat0", &theta_hat0),
                ("a", &f.a),
            ] {
                check(key, v, n);
            }
        }
        if f.fls_rules == Some(0) {
            problems.push("`fls_rules` must be at least 1".into());
        }
        if f.stride == Some(0) {
            problems.push("`stride` must be at least 1".into());
        }
        if !problems.is_empty() {
            return Err(ScenarioError::Invalid(problems));
        }

        // every required value is present from here on
        let plant = plant.expect("checked");
        let n = plant.order();
        let tau = tau.expect("checked");
        let horizon = horizon.expect("checked");
        let reference = ReferenceSignal::trig(
            f.reference_offset.unwrap_or(0.0),
            vec![fuzzy_backstep::reference::Harmonic {
                sin_amp: ref_sin.expect("checked"),
                cos_amp: ref_cos.expect("checked"),
                omega: ref_omega.expect("checked"),
            }],
        );
        let fls_rules = f.fls_rules.unwrap_or(DEFAULT_RULES_PER_DIM);
        let bases = default_bases(plant.constraint_bounds(), &reference, horizon, fls_rules)?;
        let gains = ControllerGains {
            k: k.expect("checked"),
            k_b: k_b.expect("checked"),
            sigma: sigma.expect("checked"),
            gamma: gamma.expect("checked"),
            beta: beta.expect("checked"),
            upsilon: upsilon.expect("checked"),
            filter_tau: filter_tau.expect("checked"),
            kappa: kappa.expect("checked"),
            lambda: f
                .lambda
                .unwrap_or_else(|| ControllerGains::pade_lambda(tau)),
            a: f.a.clone().unwrap_or_else(|| vec![1.0; n]),
        };
        let config = SimConfig {
            plant,
            gains,
            reference,
            bases,
            step: h.expect("checked"),
            horizon,
            delay: tau,
            initial: InitialConditions {
                x: x0.expect("checked"),
                delta_hat: delta_hat0.expect("checked"),
                theta_hat: theta_hat0.expect("checked"),
                u: f.u0.unwrap_or(0.0),
                chi: f.chi0,
            },
        };
        Ok(Self {
            name: f.name.unwrap_or(default_name),
            config,
            lambda_given: f.lambda,
            fls_rules,
            out_dir: f.out_dir.map(PathBuf::from),
            stride: f.stride.unwrap_or(1),
        })
    }
}

/// Plant from expression strings. Level `i` (1-based) sees `x1..xi` and its
/// successor `x{i+1}`, written `u` at the last level; disturbances see `t`.
pub fn custom_plant(
    f: &[String],
    d: Option<&[String]>,
    d_bound: Option<&[f64]>,
    k_c: Vec<f64>,
) -> Result<PlantModel, Vec<String>> {
    let n = f.len();
    let mut problems = Vec::new();
    if k_c.len() != n {
        problems.push(format!(
            "`k_c` has {} entries, expected {n} (one per `f`)",
            k_c.len()
        ));
    }
    let mut dynamics: Vec<DynamicsFn> = Vec::new();
    for (i, expr) in f.iter().enumerate() {
        let mut allowed: Vec<String> = (1..=i + 1).map(|j| format!("x{j}")).collect();
        allowed.push(if i + 1 == n {
            "u".into()
        } else {
            format!("x{}", i + 2)
        });
        match Expr::parse(expr, &allowed) {
            Ok(ex) => dynamics.push(Arc::new(move |x: &[f64], next: f64| {
                let mut args = x.to_vec();
                args.push(next);
                ex.eval(&args)
            })),
            Err(e) => problems.push(format!("f[{}]: {e}", i + 1)),
        }
    }
    let mut disturbances: Vec<DisturbanceFn> = Vec::new();
    match (d, d_bound) {
        (Some(d), Some(b)) => {
            if d.len() != n || b.len() != n {
                problems.push(format!("`d` and `d_bound` need {n} entries each"));
            }
            for (i, expr) in d.iter().enumerate() {
                match Expr::parse(expr, &["t".to_string()]) {
                    Ok(ex) => disturbances.push(Arc::new(move |t: f64| ex.eval(&[t]))),
                    Err(e) => problems.push(format!("d[{}]: {e}", i + 1)),
                }
            }
        }
        (None, None) => {}
        _ => problems.push("`d` and `d_bound` must be given together".into()),
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    let plant = PlantModel::new("custom", dynamics, k_c).map_err(|e| vec![e.to_string()])?;
    match (d, d_bound) {
        (Some(_), Some(b)) => plant
            .with_disturbances(disturbances, b.to_vec())
            .map_err(|e| vec![e.to_string()]),
        _ => Ok(plant),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_file() -> ScenarioFile {
        toml::from_str(include_str!("../../../scenarios/example.toml")).unwrap()
    }

    #[test]
    fn shipped_example_matches_builtin_config() {
        let s = Scenario::from_file(example_file(), "example".into()).unwrap();
        let builtin = SimConfig::example();
        assert_eq!(s.config.gains, builtin.gains);
        assert_eq!(s.config.initial, builtin.initial);
        assert_eq!(s.config.step, builtin.step);
        assert_eq!(s.config.delay, builtin.delay);
        assert_eq!(s.config.horizon, builtin.horizon);
        assert_eq!(s.lambda_given, Some(100.0));
    }

    #[test]
    fn missing_keys_are_itemized() {
        let mut f = example_file();
        f.k = None;
        f.sigma = None;
        f.tau = None;
        match Scenario::from_file(f, "x".into()) {
            Err(ScenarioError::Invalid(items)) => {
                assert_eq!(items.len(), 3, "{items:?}");
                assert!(items.iter().any(|i| i.contains("`K`")));
                assert!(items.iter().any(|i| i.contains("`sigma`")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!(
            "{}\nbogus = 1\n",
            include_str!("../../../scenarios/example.toml")
        );
        assert!(toml::from_str::<ScenarioFile>(&text).is_err());
    }

    #[test]
    fn lambda_defaults_to_pade_value() {
        let mut f = example_file();
        f.lambda = None;
        let s = Scenario::from_file(f, "x".into()).unwrap();
        assert_eq!(s.config.gains.lambda, 200.0);
        assert_eq!(s.lambda_given, None);
    }

    #[test]
    fn custom_plant_reproduces_example() {
        let f = vec![
            "0.2*x1 + 10*x2".to_string(),
            "0.6*exp(-x1^4*x2^2) + (10 + 0.5*exp(-x2^2))*u + 0.4*sin(u)".to_string(),
        ];
        let custom = custom_plant(&f, None, None, vec![3.8, 6.0]).unwrap();
        let builtin = example_plant();
        for (x, u) in [([0.0, 0.0], 0.0), ([0.3, -1.2], 0.7), ([1.5, 2.0], -3.0)] {
            let a = custom.eval_dynamics(&x, u, 0.0).unwrap();
            let b = builtin.eval_dynamics(&x, u, 0.0).unwrap();
            for (a, b) in a.iter().zip(&b) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn custom_plant_rejects_lookahead_variables() {
        let f = vec!["x3".to_string(), "u".to_string()];
        let err = custom_plant(&f, None, None, vec![1.0, 1.0]).unwrap_err();
        assert!(err[0].contains("unknown variable `x3`"), "{err:?}");
    }

    #[test]
    fn custom_disturbances() {
        let f = vec!["u".to_string()];
        let d = vec!["0.1*sin(t)".to_string()];
        let p = custom_plant(&f, Some(&d), Some(&[0.1]), vec![1.0]).unwrap();
        assert!((p.disturbance(0, 1.0) - 0.1 * 1f64.sin()).abs() < 1e-15);
    }
}
