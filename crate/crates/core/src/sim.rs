//! Fixed-step closed-loop simulation: the plant is driven by the exactly
//! delayed input `u(t - tau)` from a [`DelayLine`] while the controller,
//! Pade intermediate, input filter, DSC filters and adaptation laws are
//! integrated together with classical RK4.

use crate::controller::{AdaptiveState, ControlPass, Controller, ControllerGains};
use crate::error::{check_len, check_positive, Error, Result};
use crate::fls::{make_grid_basis, FuzzyBasis};
use crate::plant::{delay_depth, example_plant, DelayLine, PlantModel};
use crate::reference::ReferenceSignal;

/// Default fuzzy rules per input dimension.
pub const DEFAULT_RULES_PER_DIM: usize = 5;

/// Initial values of the controller-side states. DSC filters are always
/// initialized from the virtual controls.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub x: Vec<f64>,
    pub delta_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub u: f64,
    /// Defaults to `2 u(0)`, the Pade steady state.
    pub chi: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub plant: PlantModel,
    pub gains: ControllerGains,
    pub reference: ReferenceSignal,
    pub bases: Vec<FuzzyBasis>,
    pub step: f64,
    pub horizon: f64,
    pub delay: f64,
    pub initial: InitialConditions,
}

/// One Gaussian grid per level over `Z_i = [x_1..x_{i+1}, w'_{i+1}]`.
/// State axes span `+-k_c`; the `w'_1 = y_d'` axis spans the sampled
/// derivative bound of the reference, and `w'_{i+1}` for `i >= 1` spans `+-k_c(i+1)`.
pub fn default_bases(
    k_c: &[f64],
    reference: &ReferenceSignal,
    horizon: f64,
    rules_per_dim: usize,
) -> Result<Vec<FuzzyBasis>> {
    let a1 = reference.derivative_bound(horizon.max(1e-3));
    let a1 = if a1 > 1e-9 { a1 } else { 1.0 };
    (0..k_c.len())
        .map(|i| {
            let mut ranges: Vec<(f64, f64)> = k_c[..=i].iter().map(|k| (-k, *k)).collect();
            let wd = if i == 0 { a1 } else { k_c[i] };
            ranges.push((-wd, wd));
            make_grid_basis(&ranges, &vec![rules_per_dim; i + 2])
        })
        .collect()
}

impl SimConfig {
    /// The two-state benchmark: example plant and gains, `y_d = 1.5 sin t + cos t`,
    /// `tau = 0.01 s`, `h = 1e-4 s`, `T = 20 s`, `x(0) = (0.5, 0)`,
    /// `delta_hat(0) = theta_hat(0) = 0.01`, `u(0) = 0`.
    pub fn example() -> Self {
        let plant = example_plant();
        let reference = ReferenceSignal::example();
        let horizon = 20.0;
        let bases = default_bases(
            plant.constraint_bounds(),
            &reference,
            horizon,
            DEFAULT_RULES_PER_DIM,
        )
        .expect("static basis definition");
        Self {
            plant,
            gains: ControllerGains::example(),
            reference,
            bases,
            step: 1e-4,
            horizon,
            delay: 0.01,
            initial: InitialConditions {
                x: vec![0.5, 0.0],
                delta_hat: vec![0.01; 2],
                theta_hat: vec![0.01; 2],
                u: 0.0,
                chi: None,
            },
        }
    }

    pub fn order(&self) -> usize {
        self.plant.order()
    }

    pub fn delay_steps(&self) -> Result<usize> {
        delay_depth(self.delay, self.step)
    }

    pub fn step_count(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn controller(&self) -> Result<Controller<'_>> {
        Controller::new(&self.gains, &self.bases)
    }

    /// Controller state at `t = 0` with the DSC filters set to `w_{i+1}(0) = alpha_i(0)`.
    pub fn initial_state(&self) -> Result<ClosedLoopState> {
        let init = &self.initial;
        let mut adaptive = AdaptiveState::new(
            init.delta_hat.clone(),
            init.theta_hat.clone(),
            init.u,
            init.chi.unwrap_or(2.0 * init.u),
        );
        self.controller()?
            .initialize_filters(&init.x, &mut adaptive, &self.reference, 0.0)?;
        Ok(ClosedLoopState {
            x: init.x.clone(),
            adaptive,
        })
    }

    /// Checks dimensions, positivity, `|x_i(0)| < k_ci`, the delay grid and
    /// `|z_i(0)| < k_bi` after filter initialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.order();
        self.gains.validate()?;
        check_len("gains", n, self.gains.order())?;
        check_len("x0", n, self.initial.x.len())?;
        check_len("delta_hat0", n, self.initial.delta_hat.len())?;
        check_len("theta_hat0", n, self.initial.theta_hat.len())?;
        check_positive("delta_hat0", &self.initial.delta_hat)?;
        check_positive("theta_hat0", &self.initial.theta_hat)?;
        check_positive("h", &[self.step])?;
        check_positive("T", &[self.horizon])?;
        self.delay_steps()?;
        for (i, (x, k)) in self
            .initial
            .x
            .iter()
            .zip(self.plant.constraint_bounds())
            .enumerate()
        {
            if x.abs() >= *k || x.is_nan() {
                return Err(Error::invalid(
                    format!("x0[{}]", i + 1),
                    format!(
                        "|x{}(0)| = {} must be < k_c{} = {}",
                        i + 1,
                        x.abs(),
                        i + 1,
                        k
                    ),
                ));
            }
        }
        let state = self.initial_state()?;
        self.controller()?
            .evaluate(&state.x, &state.adaptive, &self.reference, 0.0)?;
        Ok(())
    }
}

/// Plant state plus controller state.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopState {
    pub x: Vec<f64>,
    pub adaptive: AdaptiveState,
}

impl ClosedLoopState {
    /// Layout `[x (n), chi, u, w (n), delta_hat (n), theta_hat (n)]`.
    pub fn pack(&self) -> Vec<f64> {
        let a = &self.adaptive;
        let mut v = Vec::with_capacity(4 * self.x.len() + 2);
        v.extend_from_slice(&self.x);
        v.push(a.chi);
        v.push(a.u);
        v.extend_from_slice(&a.w);
        v.extend_from_slice(&a.delta_hat);
        v.extend_from_slice(&a.theta_hat);
        v
    }

    /// Name of entry `i` of the packed layout.
    pub fn component_name(n: usize, i: usize) -> String {
        match i {
            i if i < n => format!("x{}", i + 1),
            i if i == n => "chi".into(),
            i if i == n + 1 => "u".into(),
            i if i < 2 * n + 2 => format!("w{}", i - n),
            i if i < 3 * n + 2 => format!("delta_hat{}", i - 2 * n - 1),
            i => format!("theta_hat{}", i - 3 * n - 1),
        }
    }

    pub fn unpack(n: usize, v: &[f64]) -> Result<Self> {
        check_len("packed closed-loop state", 4 * n + 2, v.len())?;
        Ok(Self {
            x: v[..n].to_vec(),
            adaptive: AdaptiveState {
                chi: v[n],
                u: v[n + 1],
                w: v[n + 2..2 * n + 2].to_vec(),
                delta_hat: v[2 * n + 2..3 * n + 2].to_vec(),
                theta_hat: v[3 * n + 2..].to_vec(),
            },
        })
    }
}

fn pack_derivative(plant_dot: &[f64], pass: &ControlPass) -> Vec<f64> {
    let mut d = Vec::with_capacity(4 * plant_dot.len() + 2);
    d.extend_from_slice(plant_dot);
    d.push(pass.chi_dot);
    d.push(pass.u_dot);
    d.extend_from_slice(&pass.w_dot);
    d.extend_from_slice(&pass.delta_hat_dot);
    d.extend_from_slice(&pass.theta_hat_dot);
    d
}

/// Time derivative of the packed closed-loop state with the plant driven by
/// `u_delayed`, plus the controller pass it was computed from.
pub fn closed_loop_deriv(
    state: &ClosedLoopState,
    t: f64,
    u_delayed: f64,
    cfg: &SimConfig,
) -> Result<(Vec<f64>, ControlPass)> {
    let controller = cfg.controller()?;
    deriv_with(&controller, state, t, u_delayed, cfg)
}

fn deriv_with(
    controller: &Controller<'_>,
    state: &ClosedLoopState,
    t: f64,
    u_delayed: f64,
    cfg: &SimConfig,
) -> Result<(Vec<f64>, ControlPass)> {
    let pass = controller
        .evaluate(&state.x, &state.adaptive, &cfg.reference, t)
        .map_err(|e| e.at(t))?;
    let plant_dot = cfg.plant.eval_dynamics(&state.x, u_delayed, t)?;
    Ok((pack_derivative(&plant_dot, &pass), pass))
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(y: &[f64], t: f64, h: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let k1 = f(t, y)?;
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(y, k)| y + 0.5 * h * k).collect();
    let k2 = f(t + 0.5 * h, &y2)?;
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(y, k)| y + 0.5 * h * k).collect();
    let k3 = f(t + 0.5 * h, &y3)?;
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(y, k)| y + h * k).collect();
    let k4 = f(t + h, &y4)?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// One recorded time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub y_d: f64,
    pub x: Vec<f64>,
    /// `z_1..z_{n+1}`.
    pub z: Vec<f64>,
    /// `e_2..e_{n+1}`.
    pub e: Vec<f64>,
    /// `w_2..w_{n+1}`.
    pub w: Vec<f64>,
    pub chi: f64,
    pub u: f64,
    pub u_delayed: f64,
    pub alpha: Vec<f64>,
    pub v: f64,
    pub delta_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub barrier_margins: Vec<f64>,
    pub vs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub k_b: Vec<f64>,
    pub step: f64,
    pub delay_steps: usize,
    pub samples: Vec<Sample>,
    pub fls_fallbacks: usize,
}

/// `sum_i ln(k_bi^2 / (k_bi^2 - z_i^2)) + z_{n+1}^2 + sum_i e_i^2`.
pub fn lyapunov_surrogate_at(z: &[f64], e: &[f64], k_b: &[f64]) -> f64 {
    let n = k_b.len();
    let barrier: f64 = k_b
        .iter()
        .zip(z)
        .map(|(kb, z)| {
            let kb2 = kb * kb;
            (kb2 / (kb2 - z * z)).ln()
        })
        .sum();
    barrier + z[n] * z[n] + e.iter().map(|e| e * e).sum::<f64>()
}

/// `V_s(t)` for every sample.
pub fn lyapunov_surrogate(traj: &Trajectory) -> Vec<f64> {
    traj.samples
        .iter()
        .map(|s| lyapunov_surrogate_at(&s.z, &s.e, &traj.k_b))
        .collect()
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// `sup f(sample)` over samples with `t0 <= t <= t1`; `-inf` for an empty window.
    pub fn sup_over(&self, t0: f64, t1: f64, f: impl Fn(&Sample) -> f64) -> f64 {
        let eps = 1e-9 * self.step;
        self.samples
            .iter()
            .filter(|s| s.t >= t0 - eps && s.t <= t1 + eps)
            .map(f)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }
}

fn record(
    t: f64,
    state: &ClosedLoopState,
    u_delayed: f64,
    pass: &ControlPass,
    k_b: &[f64],
) -> Sample {
    let out = &pass.output;
    Sample {
        t,
        y_d: pass.y_d,
        x: state.x.clone(),
        z: out.z.clone(),
        e: out.e.clone(),
        w: state.adaptive.w.clone(),
        chi: state.adaptive.chi,
        u: state.adaptive.u,
        u_delayed,
        alpha: out.alpha.clone(),
        v: out.v,
        delta_hat: state.adaptive.delta_hat.clone(),
        theta_hat: state.adaptive.theta_hat.clone(),
        barrier_margins: out.barrier_margins.clone(),
        vs: lyapunov_surrogate_at(&out.z, &out.e, k_b),
    }
}

/// Integrates the closed loop over `[0, T]`, recording every grid point.
///
/// The delayed input is read once per step and held across the RK4 stages.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.order();
    let controller = cfg.controller()?;
    let h = cfg.step;
    let steps = cfg.step_count();
    let mut state = cfg.initial_state()?;
    let mut line = DelayLine::new(cfg.delay, h, state.adaptive.u)?;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut fls_fallbacks = 0;

    for k in 0..=steps {
        let t = k as f64 * h;
        line.push(state.adaptive.u);
        let u_delayed = line.read();
        let (k1, pass) = deriv_with(&controller, &state, t, u_delayed, cfg)?;
        fls_fallbacks += pass.fls_fallbacks;
        samples.push(record(t, &state, u_delayed, &pass, &cfg.gains.k_b));
        if k == steps {
            break;
        }

        let y = state.pack();
        let mut first = Some(k1);
        let next = rk4_step(&y, t, h, |ts, ys| {
            if let Some(d) = first.take() {
                return Ok(d);
            }
            let st = ClosedLoopState::unpack(n, ys)?;
            Ok(deriv_with(&controller, &st, ts, u_delayed, cfg)?.0)
        })?;
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::SimulationDiverged {
                component: ClosedLoopState::component_name(n, i),
                t: Some(t + h),
            });
        }
        state = ClosedLoopState::unpack(n, &next)?;
        state
            .adaptive
            .check_estimates_positive()
            .map_err(|e| match e {
                Error::InvalidParameter { name, reason } => Error::InvalidParameter {
                    name,
                    reason: format!(
                        "{reason} at t = {:.6} s (adaptive estimate lost positivity)",
                        t + h
                    ),
                },
                other => other,
            })?;
    }

    Ok(Trajectory {
        n,
        k_b: cfg.gains.k_b.clone(),
        step: h,
        delay_steps: cfg.delay_steps()?,
        samples,
        fls_fallbacks,
    })
}

/// Per-level constraint summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    /// 1-based level.
    pub index: usize,
    pub sup_x: f64,
    pub k_c: f64,
    pub x_margin: f64,
    pub x_ok: bool,
    pub sup_z: f64,
    pub k_b: f64,
    pub z_margin: f64,
    pub z_ok: bool,
    /// `rho_i = sup|w_i|` with `w_1 = y_d`.
    pub rho: f64,
    /// `|x_i| <= |z_i| + |w_i|` held at every sample.
    pub triangle_ok: bool,
    /// `k_bi + rho_i`, the bound the chain guarantees on `|x_i|`.
    pub chain_bound: f64,
    /// `k_bi + rho_i <= k_ci`.
    pub chain_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub rows: Vec<ConstraintRow>,
}

impl ConstraintReport {
    /// State and barrier constraints hold strictly for every level.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.x_ok && r.z_ok)
    }
}

fn filter_output(s: &Sample, i: usize) -> f64 {
    if i == 0 {
        s.y_d
    } else {
        s.w[i - 1]
    }
}

pub fn check_constraints(traj: &Trajectory, k_c: &[f64], k_b: &[f64]) -> ConstraintReport {
    let rows = (0..traj.n)
        .map(|i| {
            let sup_x = traj
                .samples
                .iter()
                .map(|s| s.x[i].abs())
                .fold(0.0, f64::max);
            let sup_z = traj
                .samples
                .iter()
                .map(|s| s.z[i].abs())
                .fold(0.0, f64::max);
            let rho = traj
                .samples
                .iter()
                .map(|s| filter_output(s, i).abs())
                .fold(0.0, f64::max);
            let triangle_ok = traj.samples.iter().all(|s| {
                let bound = s.z[i].abs() + filter_output(s, i).abs();
                s.x[i].abs() <= bound * (1.0 + 1e-12) + 1e-15
            });
            let chain_bound = k_b[i] + rho;
            ConstraintRow {
                index: i + 1,
                sup_x,
                k_c: k_c[i],
                x_margin: k_c[i] - sup_x,
                x_ok: sup_x < k_c[i],
                sup_z,
                k_b: k_b[i],
                z_margin: k_b[i] - sup_z,
                z_ok: sup_z < k_b[i],
                rho,
                triangle_ok,
                chain_bound,
                chain_ok: chain_bound <= k_c[i],
            }
        })
        .collect();
    ConstraintReport { rows }
}
