//! Pure-feedback plants `x_i' = f_i(x_1..x_i, x_{i+1}) + d_i(t)` with the last
//! level driven by the delayed input, and the exact transport-delay line that
//! produces `u(t - tau)` on a fixed step grid.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, check_positive, Error, Result};

/// `f_i(xbar_i, next)`: `xbar_i` holds `x_1..x_i`, `next` is `x_{i+1}` (or the
/// effective input at the last level).
pub type DynamicsFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Bounded external disturbance `d_i(t)`.
pub type DisturbanceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct PlantModel {
    name: String,
    dynamics: Vec<DynamicsFn>,
    disturbances: Vec<DisturbanceFn>,
    constraint_bounds: Vec<f64>,
    disturbance_bounds: Vec<f64>,
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("name", &self.name)
            .field("n", &self.order())
            .field("constraint_bounds", &self.constraint_bounds)
            .field("disturbance_bounds", &self.disturbance_bounds)
            .finish()
    }
}

impl PlantModel {
    /// Builds a disturbance-free plant. `constraint_bounds[i]` is `k_c(i+1)`.
    pub fn new(
        name: impl Into<String>,
        dynamics: Vec<DynamicsFn>,
        constraint_bounds: Vec<f64>,
    ) -> Result<Self> {
        if dynamics.is_empty() {
            return Err(Error::invalid("n", "plant order must be at least 1"));
        }
        check_len("constraint_bounds", dynamics.len(), constraint_bounds.len())?;
        check_positive("k_c", &constraint_bounds)?;
        let n = dynamics.len();
        let zero: DisturbanceFn = Arc::new(|_| 0.0);
        Ok(Self {
            name: name.into(),
            dynamics,
            disturbances: vec![zero; n],
            constraint_bounds,
            disturbance_bounds: vec![0.0; n],
        })
    }

    /// Replaces the disturbance generators and their declared bounds `d_M`.
    pub fn with_disturbances(
        mut self,
        disturbances: Vec<DisturbanceFn>,
        bounds: Vec<f64>,
    ) -> Result<Self> {
        check_len("disturbances", self.order(), disturbances.len())?;
        check_len("disturbance_bounds", self.order(), bounds.len())?;
        if let Some((i, b)) = bounds
            .iter()
            .enumerate()
            .find(|(_, b)| !(b.is_finite() && **b >= 0.0))
        {
            return Err(Error::invalid(
                format!("d_M[{}]", i + 1),
                format!("must be finite and >= 0, got {b}"),
            ));
        }
        self.disturbances = disturbances;
        self.disturbance_bounds = bounds;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.dynamics.len()
    }

    pub fn constraint_bounds(&self) -> &[f64] {
        &self.constraint_bounds
    }

    pub fn disturbance_bounds(&self) -> &[f64] {
        &self.disturbance_bounds
    }

    pub fn disturbance(&self, i: usize, t: f64) -> f64 {
        (self.disturbances[i])(t)
    }

    /// Evaluates `[f_1(x1,x2)+d_1, ..., f_n(x1..xn, u_eff)+d_n]`.
    pub fn eval_dynamics(&self, x: &[f64], u_eff: f64, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.order()];
        self.eval_dynamics_into(x, u_eff, t, &mut out)?;
        Ok(out)
    }

    pub fn eval_dynamics_into(&self, x: &[f64], u_eff: f64, t: f64, out: &mut [f64]) -> Result<()> {
        let n = self.order();
        check_len("plant state", n, x.len())?;
        check_len("plant derivative buffer", n, out.len())?;
        for i in 0..n {
            let next = if i + 1 < n { x[i + 1] } else { u_eff };
            let value = (self.dynamics[i])(&x[..=i], next) + (self.disturbances[i])(t);
            if !value.is_finite() {
                return Err(Error::SimulationDiverged {
                    component: format!("x{}' (derivative of x{})", i + 1, i + 1),
                    t: Some(t),
                });
            }
            out[i] = value;
        }
        Ok(())
    }

    /// Samples every disturbance on `times` and returns the first index (1-based)
    /// whose magnitude exceeds its declared bound, if any.
    pub fn check_disturbance_bounds(&self, times: impl IntoIterator<Item = f64>) -> Option<usize> {
        for t in times {
            for i in 0..self.order() {
                if (self.disturbances[i])(t).abs() > self.disturbance_bounds[i] {
                    return Some(i + 1);
                }
            }
        }
        None
    }
}

/// The second-order benchmark plant
///
/// ```text
/// x1' = 0.2 x1 + 10 x2
/// x2' = 0.6 exp(-x1^4 x2^2) + (10 + 0.5 exp(-x2^2)) u + 0.4 sin(u)
/// ```
///
/// with state constraints `|x1| <= 3.8`, `|x2| <= 6` and no disturbances.
pub fn example_plant() -> PlantModel {
    let f1: DynamicsFn = Arc::new(|x: &[f64], x2: f64| 0.2 * x[0] + 10.0 * x2);
    let f2: DynamicsFn = Arc::new(|x: &[f64], u: f64| {
        let (x1, x2) = (x[0], x[1]);
        0.6 * (-(x1.powi(4) * x2 * x2)).exp() + (10.0 + 0.5 * (-x2 * x2).exp()) * u + 0.4 * u.sin()
    });
    PlantModel::new("example", vec![f1, f2], vec![3.8, 6.0]).expect("static plant definition")
}

/// Order-`n` plant with `f_i == 0`.
pub fn null_plant(constraint_bounds: Vec<f64>) -> Result<PlantModel> {
    let zero: DynamicsFn = Arc::new(|_, _| 0.0);
    PlantModel::new(
        "null",
        vec![zero; constraint_bounds.len()],
        constraint_bounds,
    )
}

/// Fixed-depth ring buffer realizing `u(t - tau)` exactly on a grid of step `h`
/// with `tau = m h`.
#[derive(Debug, Clone)]
pub struct DelayLine {
    delay: f64,
    step: f64,
    buffer: Vec<f64>,
    head: usize,
}

impl DelayLine {
    pub fn new(delay: f64, step: f64, fill_value: f64) -> Result<Self> {
        let depth = delay_depth(delay, step)?;
        Ok(Self {
            delay,
            step,
            buffer: vec![fill_value; depth + 1],
            head: 0,
        })
    }

    /// Number of steps `m` between a push and the read that returns it.
    pub fn depth(&self) -> usize {
        self.buffer.len() - 1
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn push(&mut self, u: f64) {
        self.head = (self.head + 1) % self.buffer.len();
        self.buffer[self.head] = u;
    }

    /// Value pushed `m` pushes before the most recent one, or the fill value
    /// while the history is shorter than that.
    pub fn read(&self) -> f64 {
        self.buffer[(self.head + 1) % self.buffer.len()]
    }
}

/// `m = tau / h`, rejecting non-integer ratios.
pub fn delay_depth(delay: f64, step: f64) -> Result<usize> {
    check_positive("tau", &[delay])?;
    check_positive("h", &[step])?;
    let ratio = delay / step;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::DelayNotMultiple { delay, step });
    }
    Ok(m as usize)
}
