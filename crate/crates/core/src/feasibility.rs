//! Gain feasibility: prerequisite checks and an exhaustive grid search that
//! maximizes `N = sum K_j + sum k_bj` over the tunable gains
//! `[K_1..K_{n-1}, k_b2..k_bn]`, with the filter excursions
//! `rho_i = sup|w_i|` estimated by simulation over a finite set of initial states.

use std::fmt;

use rayon::prelude::*;

use crate::controller::tracking_errors;
use crate::error::{Error, Result};
use crate::sim::{check_constraints, simulate, SimConfig};

/// One initial condition of the sampled set.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSample {
    /// Absolute plant state `x(0)`.
    State(Vec<f64>),
    /// `z_i(0) = f_i k_bi` for the candidate's barrier widths; the plant
    /// state is reconstructed level by level from the virtual controls.
    ZFraction(Vec<f64>),
}

impl InitialSample {
    /// Corners and center of the `z(0)` box at `fraction` of `k_b`.
    pub fn default_set(n: usize, fraction: f64) -> Vec<Self> {
        let mut out: Vec<Self> = (0..1usize << n)
            .map(|mask| {
                Self::ZFraction(
                    (0..n)
                        .map(|i| {
                            if mask >> i & 1 == 1 {
                                fraction
                            } else {
                                -fraction
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        out.push(Self::ZFraction(vec![0.0; n]));
        out
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    /// Plant, reference, step, delay, FLS bases, initial estimates and every
    /// gain that is not searched.
    pub base: SimConfig,
    /// Candidate values for `K_1..K_{n-1}`.
    pub k_grid: Vec<Vec<f64>>,
    /// Candidate values for `k_b2..k_bn`.
    pub kb_grid: Vec<Vec<f64>>,
    pub samples: Vec<InitialSample>,
    /// Horizon of each sampling run.
    pub horizon: f64,
}

impl FeasibilityProblem {
    /// Default sample set: corners and center of the `z(0)` box at 50% of `k_b`.
    pub fn new(
        base: SimConfig,
        k_grid: Vec<Vec<f64>>,
        kb_grid: Vec<Vec<f64>>,
        horizon: f64,
    ) -> Self {
        let n = base.order();
        Self {
            base,
            k_grid,
            kb_grid,
            samples: InitialSample::default_set(n, 0.5),
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.base.order();
        let tunable = n.saturating_sub(1);
        if self.k_grid.len() != tunable {
            return Err(Error::DimensionMismatch {
                what: "K grid",
                expected: tunable,
                got: self.k_grid.len(),
            });
        }
        if self.kb_grid.len() != tunable {
            return Err(Error::DimensionMismatch {
                what: "k_b grid",
                expected: tunable,
                got: self.kb_grid.len(),
            });
        }
        for (prefix, offset, grids) in [("K", 1, &self.k_grid), ("k_b", 2, &self.kb_grid)] {
            for (j, g) in grids.iter().enumerate() {
                let name = format!("{prefix}{} grid", j + offset);
                if g.is_empty() {
                    return Err(Error::invalid(name, "no candidate values"));
                }
                if let Some(v) = g.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::invalid(
                        name,
                        format!("value {v} is not a positive number"),
                    ));
                }
            }
        }
        if self.samples.is_empty() {
            return Err(Error::invalid(
                "samples",
                "at least one initial state is required",
            ));
        }
        for s in &self.samples {
            let len = match s {
                InitialSample::State(v) | InitialSample::ZFraction(v) => v.len(),
            };
            if len != n {
                return Err(Error::DimensionMismatch {
                    what: "initial sample",
                    expected: n,
                    got: len,
                });
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        Ok(())
    }

    /// Every candidate `[K_1..K_{n-1}, k_b2..k_bn]` in lexicographic order of
    /// the grid indices.
    pub fn candidates(&self) -> Vec<Vec<f64>> {
        let axes: Vec<&Vec<f64>> = self.k_grid.iter().chain(&self.kb_grid).collect();
        let mut out = vec![Vec::new()];
        for axis in axes {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<f64>| {
                    axis.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push(*v);
                        c
                    })
                })
                .collect();
        }
        out
    }

    /// Base configuration with the candidate gains substituted and the
    /// sampling horizon applied.
    pub fn config_for(&self, sigma: &[f64]) -> Result<SimConfig> {
        let n = self.base.order();
        let tunable = n.saturating_sub(1);
        if sigma.len() != 2 * tunable {
            return Err(Error::DimensionMismatch {
                what: "candidate",
                expected: 2 * tunable,
                got: sigma.len(),
            });
        }
        let mut cfg = self.base.clone();
        cfg.gains.k[..tunable].copy_from_slice(&sigma[..tunable]);
        cfg.gains.k_b[1..].copy_from_slice(&sigma[tunable..]);
        cfg.horizon = self.horizon;
        Ok(cfg)
    }

    /// Plant state realizing the sample under `cfg`'s gains.
    pub fn initial_state(&self, sample: &InitialSample, cfg: &SimConfig) -> Result<Vec<f64>> {
        match sample {
            InitialSample::State(x) => Ok(x.clone()),
            InitialSample::ZFraction(f) => {
                let n = cfg.order();
                let controller = cfg.controller()?;
                let mut trial = cfg.initial_state()?;
                let mut x = vec![0.0; n];
                let y_d = cfg.reference.value(0.0);
                for i in 0..n {
                    let anchor = if i == 0 { y_d } else { trial.adaptive.w[i - 1] };
                    x[i] = anchor + f[i] * cfg.gains.k_b[i];
                    controller.initialize_filters(&x, &mut trial.adaptive, &cfg.reference, 0.0)?;
                }
                Ok(x)
            }
        }
    }
}

/// `|z_i(0)|` for `x(0)` after the filters are initialized from the virtual controls.
pub fn initial_tracking_errors(cfg: &SimConfig, x0: &[f64]) -> Result<Vec<f64>> {
    let mut cfg = cfg.clone();
    cfg.initial.x = x0.to_vec();
    let st = cfg.initial_state()?;
    let z = tracking_errors(x0, &st.adaptive, cfg.reference.value(0.0));
    Ok(z[..cfg.order()].iter().map(|z| z.abs()).collect())
}

/// Sampled filter excursions for one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoEstimate {
    /// `rho_1..rho_n` with `rho_1 = sup|y_d|`; empty when the candidate was
    /// rejected before or during simulation.
    pub rho: Vec<f64>,
    /// `max_s |z_i(0)|` over the sample set.
    pub z0: Vec<f64>,
    /// Initial states actually simulated.
    pub states: Vec<Vec<f64>>,
    pub rejection: Option<String>,
}

impl RhoEstimate {
    pub fn is_rejected(&self) -> bool {
        self.rejection.is_some()
    }
}

/// Runs the closed loop from every sample and takes `sup|w_i|` across runs.
/// Samples with `|z_i(0)| >= k_bi` or `|x_i(0)| >= k_ci` reject the candidate
/// before any simulation; a run ending in an error rejects it afterwards.
pub fn estimate_rho(sigma: &[f64], problem: &FeasibilityProblem) -> RhoEstimate {
    let rejected = |z0, states, reason: String| RhoEstimate {
        rho: Vec::new(),
        z0,
        states,
        rejection: Some(reason),
    };
    let cfg = match problem.config_for(sigma) {
        Ok(c) => c,
        Err(e) => return rejected(Vec::new(), Vec::new(), e.to_string()),
    };
    let n = cfg.order();
    let k_c = cfg.plant.constraint_bounds().to_vec();

    let mut states = Vec::with_capacity(problem.samples.len());
    let mut z0 = vec![0.0; n];
    for sample in &problem.samples {
        let x = match problem.initial_state(sample, &cfg) {
            Ok(x) => x,
            Err(e) => return rejected(z0, states, e.to_string()),
        };
        let z = match initial_tracking_errors(&cfg, &x) {
            Ok(z) => z,
            Err(e) => {
                // filter initialization evaluates every barrier, so this is the z(0) precheck failing
                if let Error::BarrierViolation { index, z_abs, .. } = e {
                    z0[index - 1] = z0[index - 1].max(z_abs);
                }
                let reason = format!("sample {}: initial {e}", states.len() + 1);
                return rejected(z0, states, reason);
            }
        };
        for i in 0..n {
            z0[i] = z0[i].max(z[i]);
        }
        states.push(x);
    }
    for (s, x) in states.iter().enumerate() {
        if let Some(i) = (0..n).find(|&i| x[i].abs() >= k_c[i] || x[i].is_nan()) {
            let reason = format!(
                "sample {}: |x{}(0)| = {:.6} is not below k_c{} = {}",
                s + 1,
                i + 1,
                x[i].abs(),
                i + 1,
                k_c[i]
            );
            return rejected(z0, states, reason);
        }
    }
    if let Some(i) = (0..n).find(|&i| z0[i] >= cfg.gains.k_b[i] || z0[i].is_nan()) {
        let reason = format!(
            "|z{}(0)| = {:.6} is not below k_b{} = {}",
            i + 1,
            z0[i],
            i + 1,
            cfg.gains.k_b[i]
        );
        return rejected(z0, states, reason);
    }

    let runs: Vec<Result<Vec<f64>>> = states
        .par_iter()
        .map(|x| {
            let mut run = cfg.clone();
            run.initial.x = x.clone();
            let traj = simulate(&run)?;
            let report = check_constraints(&traj, &k_c, &run.gains.k_b);
            Ok(report.rows.iter().map(|r| r.rho).collect())
        })
        .collect();

    let mut rho = vec![0.0f64; n];
    for (s, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => {
                for i in 0..n {
                    rho[i] = rho[i].max(r[i]);
                }
            }
            Err(e) => return rejected(z0, states, format!("sample {}: {e}", s + 1)),
        }
    }
    RhoEstimate {
        rho,
        z0,
        states,
        rejection: None,
    }
}

/// One constraint of the program, satisfied when `margin > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMargin {
    pub label: String,
    pub margin: f64,
}

impl ConstraintMargin {
    pub fn holds(&self) -> bool {
        self.margin > 0.0
    }
}

impl fmt::Display for ConstraintMargin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {:.6}", self.label, self.margin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateOutcome {
    /// `[K_1..K_{n-1}, k_b2..k_bn]`.
    pub sigma: Vec<f64>,
    pub objective: f64,
    pub estimate: RhoEstimate,
    /// `k_ci - rho_i - k_bi` for `i >= 2`, then `k_bi - |z_i(0)|` for every `i`.
    pub margins: Vec<ConstraintMargin>,
}

impl CandidateOutcome {
    pub fn feasible(&self) -> bool {
        !self.estimate.is_rejected() && self.margins.iter().all(ConstraintMargin::holds)
    }

    /// The constraint closest to holding among those that fail.
    pub fn tightest_violation(&self) -> Option<String> {
        if let Some(r) = &self.estimate.rejection {
            return Some(r.clone());
        }
        self.margins
            .iter()
            .filter(|m| !m.holds())
            .max_by(|a, b| a.margin.total_cmp(&b.margin))
            .map(ToString::to_string)
    }
}

pub fn objective(sigma: &[f64]) -> f64 {
    sigma.iter().sum()
}

/// Evaluates one candidate against both constraint families.
pub fn evaluate_candidate(sigma: &[f64], problem: &FeasibilityProblem) -> CandidateOutcome {
    let estimate = estimate_rho(sigma, problem);
    let mut margins = Vec::new();
    if let Ok(cfg) = problem.config_for(sigma) {
        let k_c = cfg.plant.constraint_bounds();
        let k_b = &cfg.gains.k_b;
        if !estimate.rho.is_empty() {
            for i in 1..cfg.order() {
                margins.push(ConstraintMargin {
                    label: format!("k_c{0} - rho_{0} - k_b{0}", i + 1),
                    margin: k_c[i] - estimate.rho[i] - k_b[i],
                });
            }
        }
        for (i, z) in estimate.z0.iter().enumerate() {
            margins.push(ConstraintMargin {
                label: format!("k_b{0} - |z{0}(0)|", i + 1),
                margin: k_b[i] - z,
            });
        }
    }
    CandidateOutcome {
        sigma: sigma.to_vec(),
        objective: objective(sigma),
        estimate,
        margins,
    }
}

/// Evaluates every grid candidate concurrently; the result keeps the
/// lexicographic candidate order.
pub fn evaluate_grid(problem: &FeasibilityProblem) -> Result<Vec<CandidateOutcome>> {
    problem.validate()?;
    Ok(problem
        .candidates()
        .par_iter()
        .map(|c| evaluate_candidate(c, problem))
        .collect())
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Highest objective among feasible outcomes; ties go to the
/// lexicographically smallest candidate.
pub fn select_best(outcomes: &[CandidateOutcome]) -> Result<&CandidateOutcome> {
    let best = outcomes.iter().filter(|o| o.feasible()).reduce(|best, o| {
        match o.objective.total_cmp(&best.objective) {
            std::cmp::Ordering::Greater => o,
            std::cmp::Ordering::Equal if lex_cmp(&o.sigma, &best.sigma).is_lt() => o,
            _ => best,
        }
    });
    best.ok_or_else(|| {
        let tightest = outcomes
            .iter()
            .filter_map(|o| {
                let worst = o
                    .margins
                    .iter()
                    .map(|m| m.margin)
                    .fold(f64::INFINITY, f64::min);
                o.tightest_violation().map(|msg| (o, worst, msg))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(o, _, msg)| format!("{msg} at candidate {:?}", o.sigma))
            .unwrap_or_else(|| "no candidates".to_string());
        Error::EmptyFeasibleSet { tightest }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityResult {
    pub best: CandidateOutcome,
    pub candidates: Vec<CandidateOutcome>,
    /// Prerequisites of the selected candidate, including the `k_b1` check
    /// against the reference amplitude, which the search does not gate on.
    pub prerequisites: PrerequisiteReport,
}

pub fn feasibility_search(problem: &FeasibilityProblem) -> Result<FeasibilityResult> {
    let candidates = evaluate_grid(problem)?;
    let best = select_best(&candidates)?.clone();
    let cfg = problem.config_for(&best.sigma)?;
    let prerequisites = verify_prerequisites(&cfg, Some(&best.estimate.rho), problem.horizon)?;
    Ok(FeasibilityResult {
        best,
        candidates,
        prerequisites,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrerequisiteCheck {
    pub label: String,
    pub margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrerequisiteReport {
    /// `A_0 = sup|y_d|` over the horizon.
    pub a0: f64,
    pub checks: Vec<PrerequisiteCheck>,
}

impl PrerequisiteReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn violations(&self) -> impl Iterator<Item = &PrerequisiteCheck> {
        self.checks.iter().filter(|c| !c.ok)
    }
}

/// Checks `k_b1 <= k_c1 - A_0`, `k_bi <= k_ci - rho_i` for `i >= 2` when
/// `rho` (indexed from level 1) is supplied, and `|z_i(0)| < k_bi` at `cfg`'s
/// initial state.
pub fn verify_prerequisites(
    cfg: &SimConfig,
    rho: Option<&[f64]>,
    horizon: f64,
) -> Result<PrerequisiteReport> {
    let n = cfg.order();
    let k_c = cfg.plant.constraint_bounds();
    let k_b = &cfg.gains.k_b;
    let a0 = cfg.reference.amplitude_bound(horizon);
    let mut checks = Vec::new();

    let m = k_c[0] - a0 - k_b[0];
    checks.push(PrerequisiteCheck {
        label: format!("k_c1 - A0 - k_b1 = {} - {:.6} - {}", k_c[0], a0, k_b[0]),
        margin: m,
        ok: m >= 0.0,
    });
    if let Some(rho) = rho.filter(|r| r.len() == n) {
        for i in 1..n {
            let m = k_c[i] - rho[i] - k_b[i];
            checks.push(PrerequisiteCheck {
                label: format!(
                    "k_c{0} - rho_{0} - k_b{0} = {1} - {2:.6} - {3}",
                    i + 1,
                    k_c[i],
                    rho[i],
                    k_b[i]
                ),
                margin: m,
                ok: m >= 0.0,
            });
        }
    }
    let z0 = initial_tracking_errors(cfg, &cfg.initial.x)?;
    for i in 0..n {
        let m = k_b[i] - z0[i];
        checks.push(PrerequisiteCheck {
            label: format!("k_b{0} - |z{0}(0)| = {1} - {2:.6}", i + 1, k_b[i], z0[i]),
            margin: m,
            ok: m > 0.0,
        });
    }
    Ok(PrerequisiteReport { a0, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControllerGains;
    use crate::plant::null_plant;
    use crate::reference::ReferenceSignal;
    use crate::sim::{default_bases, InitialConditions};
    use approx::assert_abs_diff_eq;

    fn null_problem() -> FeasibilityProblem {
        let plant = null_plant(vec![3.8, 6.0]).unwrap();
        let reference = ReferenceSignal::constant(0.0);
        let bases = default_bases(plant.constraint_bounds(), &reference, 1.0, 3).unwrap();
        let base = SimConfig {
            plant,
            gains: ControllerGains::example(),
            reference,
            bases,
            step: 1e-3,
            horizon: 0.2,
            delay: 0.01,
            initial: InitialConditions {
                x: vec![0.0, 0.0],
                delta_hat: vec![0.1; 2],
                theta_hat: vec![0.1; 2],
                u: 0.0,
                chi: None,
            },
        };
        let mut p = FeasibilityProblem::new(base, vec![vec![4.9]], vec![vec![5.0]], 0.2);
        p.samples = vec![InitialSample::State(vec![0.0, 0.0])];
        p
    }

    #[test]
    fn candidate_order_is_lexicographic() {
        let mut p = null_problem();
        p.k_grid = vec![vec![1.0, 2.0]];
        p.kb_grid = vec![vec![3.0, 4.0, 5.0]];
        let c = p.candidates();
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], vec![1.0, 3.0]);
        assert_eq!(c[1], vec![1.0, 4.0]);
        assert_eq!(c[5], vec![2.0, 5.0]);
    }

    #[test]
    fn default_sample_set() {
        let s = InitialSample::default_set(2, 0.5);
        assert_eq!(s.len(), 5);
        assert!(s.contains(&InitialSample::ZFraction(vec![-0.5, 0.5])));
        assert_eq!(s[4], InitialSample::ZFraction(vec![0.0, 0.0]));
    }

    #[test]
    fn zero_problem_has_zero_rho() {
        let p = null_problem();
        let est = estimate_rho(&[4.9, 5.0], &p);
        assert!(!est.is_rejected());
        assert_eq!(est.rho, vec![0.0, 0.0]);
        assert_eq!(est.z0, vec![0.0, 0.0]);
    }

    #[test]
    fn tiny_barrier_is_rejected_before_simulation() {
        let mut p = null_problem();
        p.samples = vec![InitialSample::State(vec![0.0, 1.0])];
        let est = estimate_rho(&[4.9, 0.5], &p);
        assert!(est.rejection.as_deref().unwrap().contains("k_b2"));
        assert!(est.rho.is_empty());
    }

    #[test]
    fn z_fraction_sample_reproduces_requested_errors() {
        let p =
            FeasibilityProblem::new(SimConfig::example(), vec![vec![4.9]], vec![vec![5.0]], 1.0);
        let cfg = p.config_for(&[4.9, 5.0]).unwrap();
        let x = p
            .initial_state(&InitialSample::ZFraction(vec![0.25, -0.1]), &cfg)
            .unwrap();
        let z = initial_tracking_errors(&cfg, &x).unwrap();
        assert_abs_diff_eq!(z[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_passing_candidate_is_selected() {
        let r = feasibility_search(&null_problem()).unwrap();
        assert_eq!(r.best.sigma, vec![4.9, 5.0]);
        assert_eq!(r.candidates.len(), 1);
    }

    fn outcome(sigma: Vec<f64>, margin: f64) -> CandidateOutcome {
        CandidateOutcome {
            objective: objective(&sigma),
            sigma,
            estimate: RhoEstimate {
                rho: vec![0.0, 0.0],
                z0: vec![0.0, 0.0],
                states: Vec::new(),
                rejection: None,
            },
            margins: vec![ConstraintMargin {
                label: "m".into(),
                margin,
            }],
        }
    }

    #[test]
    fn selection_maximizes_objective() {
        let o = vec![
            outcome(vec![2.0, 3.0], 1.0),
            outcome(vec![3.0, 4.0], 1.0),
            outcome(vec![9.0, 9.0], -0.1),
        ];
        assert_eq!(select_best(&o).unwrap().objective, 7.0);
    }

    #[test]
    fn ties_break_lexicographically() {
        let o = vec![outcome(vec![4.0, 3.0], 1.0), outcome(vec![3.0, 4.0], 1.0)];
        assert_eq!(select_best(&o).unwrap().sigma, vec![3.0, 4.0]);
    }

    #[test]
    fn empty_set_names_tightest_constraint() {
        let mut a = outcome(vec![1.0, 1.0], -2.0);
        a.margins[0].label = "loose".into();
        let mut b = outcome(vec![2.0, 2.0], -0.01);
        b.margins[0].label = "tight".into();
        match select_best(&[a, b]) {
            Err(Error::EmptyFeasibleSet { tightest }) => {
                assert!(tightest.starts_with("tight"), "{tightest}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn example_prerequisites_flag_reference_margin() {
        let r = verify_prerequisites(&SimConfig::example(), None, 20.0).unwrap();
        assert_abs_diff_eq!(r.a0, 3.25f64.sqrt(), epsilon = 1e-9);
        let first = &r.checks[0];
        assert!(!first.ok);
        assert_abs_diff_eq!(first.margin, 3.8 - 3.25f64.sqrt() - 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(first.margin, -0.00278, epsilon = 5e-6);
        // z1(0) = 0.5 - y_d(0) = -0.5
        let z1 = r
            .checks
            .iter()
            .find(|c| c.label.starts_with("k_b1 - |z1(0)|"))
            .unwrap();
        assert!(z1.ok);
        assert_abs_diff_eq!(z1.margin, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn grid_validation() {
        let mut p = null_problem();
        p.kb_grid = vec![vec![]];
        assert!(p.validate().is_err());
        let mut p = null_problem();
        p.k_grid = vec![vec![-1.0]];
        assert!(p.validate().is_err());
        let mut p = null_problem();
        p.samples.clear();
        assert!(p.validate().is_err());
    }
}
