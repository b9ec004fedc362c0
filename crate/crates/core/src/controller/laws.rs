//! Individual control and adaptation laws. Level indices are 0-based: level
//! `i` owns `z[i]`, `alpha[i]`, `delta_hat[i]`, `theta_hat[i]` and feeds the
//! DSC filter whose output is `w[i]` (the mathematical `w_{i+2}`).

use super::{AdaptiveState, ControllerGains};
use crate::error::{Error, Result};

/// Relative guard on `k_b^2 - z^2` below which a barrier counts as violated.
pub const BARRIER_GUARD: f64 = 1e-9;

/// `k_b^2 - z^2`, or `BarrierViolation` when it is within the guard band.
/// A non-finite `z` is reported as divergence.
pub fn barrier_margin(level: usize, z: f64, k_b: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::SimulationDiverged {
            component: format!("z{}", level + 1),
            t: None,
        });
    }
    let kb2 = k_b * k_b;
    let margin = kb2 - z * z;
    if margin <= BARRIER_GUARD * kb2 {
        return Err(Error::BarrierViolation {
            index: level + 1,
            z_abs: z.abs(),
            bound: k_b,
            t: None,
        });
    }
    Ok(margin)
}

/// `tanh(p / upsilon)`.
pub fn robust_tanh_term(p: f64, upsilon: f64) -> f64 {
    (p / upsilon).tanh()
}

/// Terms shared by every virtual control at level `i`:
/// `-K z - z theta xi'xi / m - delta tanh((z/m)/upsilon)`.
fn common_terms(
    i: usize,
    z: f64,
    margin: f64,
    xi_norm: f64,
    s: &AdaptiveState,
    g: &ControllerGains,
) -> f64 {
    let p = z / margin;
    -g.k[i] * z
        - z * s.theta_hat[i] * xi_norm / margin
        - s.delta_hat[i] * robust_tanh_term(p, g.upsilon[i])
}

/// First-level virtual control
/// `alpha_1 = -K1 z1 - z1 th1 xi'xi/m1 - dl1 tanh((z1/m1)/v1) - z1/m1`.
pub fn virtual_control_first(
    z: f64,
    xi_norm: f64,
    s: &AdaptiveState,
    g: &ControllerGains,
) -> Result<f64> {
    let margin = barrier_margin(0, z, g.k_b[0])?;
    Ok(common_terms(0, z, margin, xi_norm, s, g) - z / margin)
}

/// Intermediate virtual control for `1 <= i <= n-2`, adding `-z_i/m_i` and the
/// coupling `-m_i z_{i-1} / m_{i-1}`.
pub fn virtual_control_mid(
    i: usize,
    z_prev: f64,
    z: f64,
    xi_norm: f64,
    s: &AdaptiveState,
    g: &ControllerGains,
) -> Result<f64> {
    debug_assert!(i >= 1);
    let prev_margin = barrier_margin(i - 1, z_prev, g.k_b[i - 1])?;
    let margin = barrier_margin(i, z, g.k_b[i])?;
    Ok(common_terms(i, z, margin, xi_norm, s, g) - z / margin - margin * z_prev / prev_margin)
}

/// Last virtual control `alpha_n`; it carries the coupling term but no `-z_n/m_n`.
pub fn virtual_control_last(
    z_prev: f64,
    z: f64,
    xi_norm: f64,
    s: &AdaptiveState,
    g: &ControllerGains,
) -> Result<f64> {
    let i = g.order() - 1;
    debug_assert!(i >= 1);
    let prev_margin = barrier_margin(i - 1, z_prev, g.k_b[i - 1])?;
    let margin = barrier_margin(i, z, g.k_b[i])?;
    Ok(common_terms(i, z, margin, xi_norm, s, g) - margin * z_prev / prev_margin)
}

/// Final law `v = -K_{n+1} z_{n+1} + lambda chi - (2 lambda + kappa) u - e_{n+1}/tau_{n+1}`.
pub fn control_v(z_last: f64, e_last: f64, s: &AdaptiveState, g: &ControllerGains) -> f64 {
    let n = g.order();
    let tau = g.filter_tau[n - 1];
    -g.k[n] * z_last + g.lambda * s.chi - (2.0 * g.lambda + g.kappa) * s.u - e_last / tau
}

/// `(delta_hat', theta_hat')` at level `i`:
/// `gamma (z/m) tanh((z/m)/upsilon) - sigma gamma delta_hat` and
/// `beta z^2 xi'xi / m - sigma beta theta_hat`.
pub fn adaptation_derivs(
    i: usize,
    z: f64,
    xi_norm: f64,
    s: &AdaptiveState,
    g: &ControllerGains,
) -> Result<(f64, f64)> {
    let margin = barrier_margin(i, z, g.k_b[i])?;
    let p = z / margin;
    let delta_dot = g.gamma[i] * p * robust_tanh_term(p, g.upsilon[i])
        - g.sigma[i] * g.gamma[i] * s.delta_hat[i];
    let theta_dot = g.beta[i] * z * z * xi_norm / margin - g.sigma[i] * g.beta[i] * s.theta_hat[i];
    Ok((delta_dot, theta_dot))
}

/// First-order DSC filter `tau w' + w = alpha`.
pub fn dsc_filter_deriv(w: f64, alpha: f64, tau: f64) -> f64 {
    (alpha - w) / tau
}

/// Pade intermediate `chi' = -lambda chi + 2 lambda u`; `chi - u` approximates `u(t - tau)`.
pub fn pade_intermediate_deriv(chi: f64, u: f64, lambda: f64) -> f64 {
    -lambda * chi + 2.0 * lambda * u
}

/// Input low-pass filter `u' = -kappa u + v`.
pub fn input_filter_deriv(u: f64, v: f64, kappa: f64) -> f64 {
    -kappa * u + v
}

/// `z_1 = x_1 - y_d`, `z_i = x_i - w_i`, `z_{n+1} = chi - u - w_{n+1}`.
pub fn tracking_errors(x: &[f64], s: &AdaptiveState, y_d: f64) -> Vec<f64> {
    let n = x.len();
    let mut z = Vec::with_capacity(n + 1);
    z.push(x[0] - y_d);
    z.extend(x[1..].iter().zip(&s.w).map(|(x, w)| x - w));
    z.push(s.chi - s.u - s.w[n - 1]);
    z
}

/// `e_{i+1} = w_{i+1} - alpha_i`.
pub fn filter_errors(w: &[f64], alpha: &[f64]) -> Vec<f64> {
    w.iter().zip(alpha).map(|(w, a)| w - a).collect()
}

/// Both coordinate sets for a given set of virtual controls.
pub fn tracking_coordinates(
    x: &[f64],
    s: &AdaptiveState,
    y_d: f64,
    alpha: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    (tracking_errors(x, s, y_d), filter_errors(&s.w, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gains() -> ControllerGains {
        ControllerGains::example()
    }

    fn state(delta: f64, theta: f64) -> AdaptiveState {
        AdaptiveState {
            delta_hat: vec![delta; 2],
            theta_hat: vec![theta; 2],
            w: vec![0.0; 2],
            chi: 0.0,
            u: 0.0,
        }
    }

    #[test]
    fn tanh_term() {
        assert_eq!(robust_tanh_term(0.0, 0.1), 0.0);
        assert_abs_diff_eq!(robust_tanh_term(1e6, 0.1), 1.0);
        assert_abs_diff_eq!(robust_tanh_term(1.0 / 3.0, 0.1), 0.99746, epsilon = 5e-6);
    }

    #[test]
    fn coordinates() {
        let mut s = state(0.0, 0.0);
        s.w = vec![0.4, 0.1];
        s.chi = 0.5;
        s.u = 0.2;
        let z = tracking_errors(&[1.3, 0.4], &s, 1.3);
        assert_eq!(z[0], 0.0);
        assert_eq!(z[1], 0.0);
        assert_abs_diff_eq!(z[2], 0.2, epsilon = 1e-15);

        let s = state(0.0, 0.0);
        let (z, e) = tracking_coordinates(&[1.0, 0.0], &s, 0.0, &[0.0, -0.5]);
        assert_eq!(&z[..2], &[1.0, 0.0]);
        assert_eq!(e, vec![0.0, 0.5]);
    }

    #[test]
    fn first_virtual_control() {
        let g = gains();
        let s = state(0.7, 0.9);
        assert_eq!(virtual_control_first(0.0, 0.3, &s, &g).unwrap(), 0.0);
        let s = state(0.0, 0.0);
        assert_abs_diff_eq!(
            virtual_control_first(1.0, 1.0, &s, &g).unwrap(),
            -5.23333,
            epsilon = 5e-6
        );
        let s = state(1.0, 0.0);
        assert_abs_diff_eq!(
            virtual_control_first(1.0, 1.0, &s, &g).unwrap(),
            -6.23079,
            epsilon = 5e-6
        );
    }

    #[test]
    fn mid_virtual_control() {
        let mut g = gains();
        g.k = vec![4.9, 10.2, 10.2, 20.0];
        g.k_b = vec![2.0, 5.0, 5.0];
        g.sigma = vec![10.0; 3];
        g.gamma = vec![10.0; 3];
        g.beta = vec![10.0; 3];
        g.upsilon = vec![0.1; 3];
        g.filter_tau = vec![0.002; 3];
        g.a = vec![1.0; 3];
        let s = AdaptiveState {
            delta_hat: vec![0.0; 3],
            theta_hat: vec![0.0; 3],
            w: vec![0.0; 3],
            chi: 0.0,
            u: 0.0,
        };
        assert_eq!(virtual_control_mid(1, 0.0, 0.0, 0.5, &s, &g).unwrap(), 0.0);
        assert_abs_diff_eq!(
            virtual_control_mid(1, 1.0, 0.0, 0.5, &s, &g).unwrap(),
            -25.0 / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            virtual_control_mid(1, 0.0, 1.0, 0.5, &s, &g).unwrap(),
            -10.24167,
            epsilon = 5e-6
        );
    }

    #[test]
    fn last_virtual_control() {
        let g = gains();
        let s = state(0.0, 0.0);
        assert_eq!(virtual_control_last(0.0, 0.0, 0.5, &s, &g).unwrap(), 0.0);
        assert_abs_diff_eq!(
            virtual_control_last(0.0, 1.0, 0.5, &s, &g).unwrap(),
            -10.2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            virtual_control_last(1.0, 0.0, 0.5, &s, &g).unwrap(),
            -25.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn barrier_guard_trips() {
        let g = gains();
        let s = state(0.1, 0.1);
        assert!(matches!(
            virtual_control_first(2.0, 0.5, &s, &g),
            Err(Error::BarrierViolation { index: 1, .. })
        ));
        assert!(matches!(
            virtual_control_last(0.0, -5.0, 0.5, &s, &g),
            Err(Error::BarrierViolation { index: 2, .. })
        ));
        assert!(matches!(
            virtual_control_last(2.5, 0.0, 0.5, &s, &g),
            Err(Error::BarrierViolation { index: 1, .. })
        ));
        assert!(adaptation_derivs(0, 2.0 * (1.0 - 1e-11), 0.5, &s, &g).is_err());
        assert!(adaptation_derivs(0, 2.0 * (1.0 - 1e-6), 0.5, &s, &g).is_ok());
        assert!(matches!(
            barrier_margin(1, f64::NAN, 5.0),
            Err(Error::SimulationDiverged { ref component, .. }) if component == "z2"
        ));
    }

    #[test]
    fn final_law() {
        let g = gains();
        let s = state(0.0, 0.0);
        assert_eq!(control_v(0.0, 0.0, &s, &g), 0.0);
        let mut s2 = s.clone();
        s2.chi = 0.5;
        s2.u = 0.2;
        assert_abs_diff_eq!(control_v(0.1, 0.0, &s2, &g), 7.99998, epsilon = 1e-9);
        assert_abs_diff_eq!(
            control_v(0.0, g.filter_tau[1], &s, &g),
            -1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn adaptation_laws() {
        let g = gains();
        let s = state(0.0, 0.0);
        assert_eq!(adaptation_derivs(0, 0.0, 0.4, &s, &g).unwrap(), (0.0, 0.0));
        let (dd, dt) = adaptation_derivs(0, 1.0, 1.0, &s, &g).unwrap();
        assert_abs_diff_eq!(dd, 3.32486, epsilon = 5e-6);
        assert_abs_diff_eq!(dt, 10.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn filters() {
        assert_eq!(dsc_filter_deriv(0.3, 0.3, 0.1), 0.0);
        assert_abs_diff_eq!(dsc_filter_deriv(0.0, 1.0, 0.1), 10.0);
        assert_abs_diff_eq!(dsc_filter_deriv(1.0, 0.0, 0.5), -2.0);
        assert_eq!(pade_intermediate_deriv(0.0, 0.0, 200.0), 0.0);
        assert_eq!(pade_intermediate_deriv(0.0, 1.0, 200.0), 400.0);
        assert_eq!(pade_intermediate_deriv(1.4, 0.7, 200.0), 0.0);
        assert_eq!(input_filter_deriv(0.0, 0.0, 1e-4), 0.0);
        assert_abs_diff_eq!(input_filter_deriv(1.0, 0.0, 1e-4), -1e-4);
        assert_eq!(input_filter_deriv(2.0, 2.0 * 1e-4, 1e-4), 0.0);
    }

    #[test]
    fn first_control_grows_near_barrier() {
        let g = gains();
        let s = state(0.2, 0.3);
        let mut prev = 0.0;
        for k in 1..200 {
            let z = 2.0 * (1.0 - 0.5f64.powi(k / 10 + 1) * (1.0 - (k % 10) as f64 * 0.05));
            let a = virtual_control_first(z, 0.5, &s, &g).unwrap().abs();
            assert!(a > prev);
            prev = a;
        }
        assert!(prev > 1e5);
    }

    proptest! {
        #[test]
        fn lemma_tanh_bounds(p in -1e3f64..1e3, ups in 1e-3f64..10.0) {
            let pt = p * robust_tanh_term(p, ups);
            prop_assert!(pt >= 0.0);
            let gap = p.abs() - pt;
            prop_assert!(gap >= 0.0);
            prop_assert!(gap < 0.2785 * ups);
        }

        #[test]
        fn first_control_is_odd(z in -1.99f64..1.99, xi in 0.04f64..1.0,
                                d in 0.0f64..2.0, th in 0.0f64..2.0) {
            let g = gains();
            let s = state(d, th);
            let a = virtual_control_first(z, xi, &s, &g).unwrap();
            let b = virtual_control_first(-z, xi, &s, &g).unwrap();
            prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
            let c = virtual_control_last(0.0, 2.5 * z, xi, &s, &g).unwrap();
            let e = virtual_control_last(0.0, -2.5 * z, xi, &s, &g).unwrap();
            prop_assert!((c + e).abs() <= 1e-12 * c.abs().max(1.0));
        }

        #[test]
        fn adaptation_drive_is_nonnegative(z in -1.99f64..1.99, xi in 0.0f64..1.0) {
            let g = gains();
            let s = state(0.0, 0.0);
            let (dd, dt) = adaptation_derivs(0, z, xi, &s, &g).unwrap();
            prop_assert!(dd >= 0.0 && dt >= 0.0);
        }
    }
}
