//! Adaptive fuzzy backstepping controller with barrier-shaped virtual
//! controls, dynamic-surface filters, a Pade intermediate for the input delay
//! and a low-pass filtered actual input.
//!
//! [`Controller::evaluate`] performs one consistent pass over all levels and
//! returns the control signals together with the time derivatives of every
//! controller-side state.

pub mod laws;

use crate::error::{check_len, check_positive, Error, Result};
use crate::fls::FuzzyBasis;
use crate::reference::ReferenceSignal;

pub use laws::*;

/// Design constants. Vectors indexed by level hold `n` entries except `k`,
/// which holds `K_1..K_{n+1}`. `filter_tau[i]` is the time constant of the
/// filter producing `w_{i+2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub k: Vec<f64>,
    pub k_b: Vec<f64>,
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub filter_tau: Vec<f64>,
    pub kappa: f64,
    pub lambda: f64,
    /// Young's-inequality constants; absorbed into `theta` and never used at runtime.
    pub a: Vec<f64>,
}

impl ControllerGains {
    /// The gain set used for the two-state benchmark, with DSC filter
    /// constants `tau_2 = tau_3 = 0.002 s` and `lambda = 100`.
    pub fn example() -> Self {
        Self {
            k: vec![4.9, 10.2, 20.0],
            k_b: vec![2.0, 5.0],
            sigma: vec![10.0, 8.0],
            gamma: vec![10.0, 10.0],
            beta: vec![10.0, 10.0],
            upsilon: vec![0.1, 0.1],
            filter_tau: vec![0.002, 0.002],
            kappa: 1e-4,
            lambda: 100.0,
            a: vec![1.0, 1.0],
        }
    }

    /// `lambda = 2 / tau` from the first-order Pade approximant.
    pub fn pade_lambda(delay: f64) -> f64 {
        2.0 / delay
    }

    pub fn order(&self) -> usize {
        self.k_b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.order();
        if n == 0 {
            return Err(Error::invalid("k_b", "at least one level is required"));
        }
        check_len("K", n + 1, self.k.len())?;
        for (name, v) in [
            ("sigma", &self.sigma),
            ("gamma", &self.gamma),
            ("beta", &self.beta),
            ("upsilon", &self.upsilon),
            ("filter_tau", &self.filter_tau),
            ("a", &self.a),
        ] {
            check_len(name, n, v.len())?;
            check_positive(name, v)?;
        }
        check_positive("K", &self.k)?;
        check_positive("k_b", &self.k_b)?;
        check_positive("lambda", &[self.lambda])?;
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::invalid(
                "kappa",
                format!("must be finite and >= 0, got {}", self.kappa),
            ));
        }
        Ok(())
    }
}

/// Controller-side dynamic state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    pub delta_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    /// DSC filter outputs `w_2..w_{n+1}`.
    pub w: Vec<f64>,
    pub chi: f64,
    pub u: f64,
}

impl AdaptiveState {
    pub fn new(delta_hat: Vec<f64>, theta_hat: Vec<f64>, u: f64, chi: f64) -> Self {
        let n = delta_hat.len();
        Self {
            delta_hat,
            theta_hat,
            w: vec![0.0; n],
            chi,
            u,
        }
    }

    /// Fails unless every `delta_hat_i` and `theta_hat_i` is strictly positive.
    pub fn check_estimates_positive(&self) -> Result<()> {
        check_positive("delta_hat", &self.delta_hat)?;
        check_positive("theta_hat", &self.theta_hat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub alpha: Vec<f64>,
    pub v: f64,
    /// `z_1..z_{n+1}`.
    pub z: Vec<f64>,
    /// `e_2..e_{n+1}`.
    pub e: Vec<f64>,
    /// `k_bi^2 - z_i^2`, all strictly positive.
    pub barrier_margins: Vec<f64>,
}

/// Everything one controller evaluation produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPass {
    pub output: ControlOutput,
    pub y_d: f64,
    pub xi_norms: Vec<f64>,
    pub w_dot: Vec<f64>,
    pub delta_hat_dot: Vec<f64>,
    pub theta_hat_dot: Vec<f64>,
    pub chi_dot: f64,
    pub u_dot: f64,
    pub fls_fallbacks: usize,
}

/// Gains plus one fuzzy basis per level; basis `i` takes `Z_i = [x_1..x_{i+1}, w'_{i+1}]`
/// with `w'_1 = y_d'`.
#[derive(Debug, Clone, Copy)]
pub struct Controller<'a> {
    gains: &'a ControllerGains,
    bases: &'a [FuzzyBasis],
}

struct Level {
    alpha: f64,
    xi_norm: f64,
    fallback: bool,
}

impl<'a> Controller<'a> {
    pub fn new(gains: &'a ControllerGains, bases: &'a [FuzzyBasis]) -> Result<Self> {
        gains.validate()?;
        let n = gains.order();
        check_len("fuzzy bases", n, bases.len())?;
        for (i, b) in bases.iter().enumerate() {
            if b.dim() != i + 2 {
                return Err(Error::invalid(
                    format!("fls basis {}", i + 1),
                    format!("expects input dimension {}, got {}", i + 2, b.dim()),
                ));
            }
        }
        Ok(Self { gains, bases })
    }

    pub fn gains(&self) -> &ControllerGains {
        self.gains
    }

    /// Virtual control at level `i` given `z_i`, `z_{i-1}` and the filter
    /// derivative entering `Z_i`.
    fn level(
        &self,
        i: usize,
        x: &[f64],
        z: &[f64],
        w_dot: f64,
        s: &AdaptiveState,
        buf: &mut Vec<f64>,
    ) -> Result<Level> {
        let n = self.gains.order();
        buf.clear();
        buf.extend_from_slice(&x[..=i]);
        buf.push(w_dot);
        let (xi_norm, fallback) = self.bases[i].norm_sq(buf)?;
        let alpha = if i == 0 {
            virtual_control_first(z[0], xi_norm, s, self.gains)?
        } else if i == n - 1 {
            virtual_control_last(z[i - 1], z[i], xi_norm, s, self.gains)?
        } else {
            virtual_control_mid(i, z[i - 1], z[i], xi_norm, s, self.gains)?
        };
        Ok(Level {
            alpha,
            xi_norm,
            fallback,
        })
    }

    /// Sets `w_{i+1}(t0) = alpha_i(t0)` level by level.
    pub fn initialize_filters(
        &self,
        x: &[f64],
        s: &mut AdaptiveState,
        reference: &ReferenceSignal,
        t0: f64,
    ) -> Result<()> {
        let n = self.gains.order();
        check_len("plant state", n, x.len())?;
        check_len("filter states", n, s.w.len())?;
        let y_d = reference.value(t0);
        let mut buf = Vec::with_capacity(n + 1);
        for i in 0..n {
            let z = tracking_errors(x, s, y_d);
            let w_dot = if i == 0 {
                reference.derivative(t0)
            } else {
                0.0
            };
            s.w[i] = self.level(i, x, &z, w_dot, s, &mut buf)?.alpha;
        }
        Ok(())
    }

    pub fn evaluate(
        &self,
        x: &[f64],
        s: &AdaptiveState,
        reference: &ReferenceSignal,
        t: f64,
    ) -> Result<ControlPass> {
        let g = self.gains;
        let n = g.order();
        check_len("plant state", n, x.len())?;
        check_len("filter states", n, s.w.len())?;
        check_len("delta_hat", n, s.delta_hat.len())?;
        check_len("theta_hat", n, s.theta_hat.len())?;

        let y_d = reference.value(t);
        let z = tracking_errors(x, s, y_d);
        let mut alpha = Vec::with_capacity(n);
        let mut xi_norms = Vec::with_capacity(n);
        let mut barrier_margins = Vec::with_capacity(n);
        let mut delta_hat_dot = Vec::with_capacity(n);
        let mut theta_hat_dot = Vec::with_capacity(n);
        let mut fls_fallbacks = 0;
        let mut buf = Vec::with_capacity(n + 1);
        for i in 0..n {
            let w_dot = if i == 0 {
                reference.derivative(t)
            } else {
                dsc_filter_deriv(s.w[i - 1], alpha[i - 1], g.filter_tau[i - 1])
            };
            let lvl = self.level(i, x, &z, w_dot, s, &mut buf)?;
            let (dd, dt) = adaptation_derivs(i, z[i], lvl.xi_norm, s, g)?;
            barrier_margins.push(barrier_margin(i, z[i], g.k_b[i])?);
            fls_fallbacks += usize::from(lvl.fallback);
            alpha.push(lvl.alpha);
            xi_norms.push(lvl.xi_norm);
            delta_hat_dot.push(dd);
            theta_hat_dot.push(dt);
        }
        let w_dot: Vec<f64> = (0..n)
            .map(|i| dsc_filter_deriv(s.w[i], alpha[i], g.filter_tau[i]))
            .collect();
        let e = filter_errors(&s.w, &alpha);
        let v = control_v(z[n], e[n - 1], s, g);
        Ok(ControlPass {
            chi_dot: pade_intermediate_deriv(s.chi, s.u, g.lambda),
            u_dot: input_filter_deriv(s.u, v, g.kappa),
            output: ControlOutput {
                alpha,
                v,
                z,
                e,
                barrier_margins,
            },
            y_d,
            xi_norms,
            w_dot,
            delta_hat_dot,
            theta_hat_dot,
            fls_fallbacks,
        })
    }
}
