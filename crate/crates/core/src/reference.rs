//! Desired output trajectories `y_d(t)` with analytic first and second
//! derivatives, and the sampled bounds `A_0 = sup|y_d|`, `C_0 = sup(y_d^2 + y_d'^2 + y_d''^2)`.

use std::fmt;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One `a sin(w t) + b cos(w t)` component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub sin_amp: f64,
    pub cos_amp: f64,
    pub omega: f64,
}

#[derive(Clone)]
enum Kind {
    Trig {
        offset: f64,
        terms: Vec<Harmonic>,
    },
    Custom {
        y: ScalarFn,
        dy: ScalarFn,
        ddy: ScalarFn,
    },
}

#[derive(Clone)]
pub struct ReferenceSignal {
    kind: Kind,
}

impl fmt::Debug for ReferenceSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Trig { offset, terms } => f
                .debug_struct("ReferenceSignal")
                .field("offset", offset)
                .field("terms", terms)
                .finish(),
            Kind::Custom { .. } => f.write_str("ReferenceSignal(custom)"),
        }
    }
}

impl ReferenceSignal {
    /// `offset + sum_k (a_k sin(w_k t) + b_k cos(w_k t))`.
    pub fn trig(offset: f64, terms: Vec<Harmonic>) -> Self {
        Self {
            kind: Kind::Trig { offset, terms },
        }
    }

    pub fn sinusoid(sin_amp: f64, cos_amp: f64, omega: f64) -> Self {
        Self::trig(
            0.0,
            vec![Harmonic {
                sin_amp,
                cos_amp,
                omega,
            }],
        )
    }

    pub fn constant(value: f64) -> Self {
        Self::trig(value, Vec::new())
    }

    /// Caller-supplied trajectory; the three closures must be consistent.
    pub fn custom(y: ScalarFn, dy: ScalarFn, ddy: ScalarFn) -> Self {
        Self {
            kind: Kind::Custom { y, dy, ddy },
        }
    }

    /// `y_d = 1.5 sin t + cos t`.
    pub fn example() -> Self {
        Self::sinusoid(1.5, 1.0, 1.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Trig { offset, terms } => {
                offset
                    + terms
                        .iter()
                        .map(|h| h.sin_amp * (h.omega * t).sin() + h.cos_amp * (h.omega * t).cos())
                        .sum::<f64>()
            }
            Kind::Custom { y, .. } => y(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Trig { terms, .. } => terms
                .iter()
                .map(|h| {
                    h.omega * (h.sin_amp * (h.omega * t).cos() - h.cos_amp * (h.omega * t).sin())
                })
                .sum(),
            Kind::Custom { dy, .. } => dy(t),
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Trig { terms, .. } => terms
                .iter()
                .map(|h| {
                    -h.omega
                        * h.omega
                        * (h.sin_amp * (h.omega * t).sin() + h.cos_amp * (h.omega * t).cos())
                })
                .sum(),
            Kind::Custom { ddy, .. } => ddy(t),
        }
    }

    /// `A_0 = sup_{[0, horizon]} |y_d|`.
    pub fn amplitude_bound(&self, horizon: f64) -> f64 {
        sup_on_interval(|t| self.value(t).abs(), 0.0, horizon)
    }

    /// `sup_{[0, horizon]} |y_d'|`.
    pub fn derivative_bound(&self, horizon: f64) -> f64 {
        sup_on_interval(|t| self.derivative(t).abs(), 0.0, horizon)
    }

    /// `C_0 = sup_{[0, horizon]} (y_d^2 + y_d'^2 + y_d''^2)`.
    pub fn compact_radius(&self, horizon: f64) -> f64 {
        sup_on_interval(
            |t| {
                let (a, b, c) = (self.value(t), self.derivative(t), self.second_derivative(t));
                a * a + b * b + c * c
            },
            0.0,
            horizon,
        )
    }
}

/// Supremum of a smooth function on `[t0, t1]`: dense sampling at <= 1 ms
/// spacing, then golden-section refinement around the best sample.
pub fn sup_on_interval(f: impl Fn(f64) -> f64, t0: f64, t1: f64) -> f64 {
    if t1 <= t0 {
        return f(t0);
    }
    let samples = (((t1 - t0) / 1e-3).ceil() as usize).max(2000);
    let dt = (t1 - t0) / samples as f64;
    let (mut best_k, mut best) = (0, f64::NEG_INFINITY);
    for k in 0..=samples {
        let v = f(t0 + dt * k as f64);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let center = t0 + dt * best_k as f64;
    let (mut a, mut b) = ((center - dt).max(t0), (center + dt).min(t1));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    best.max(fc).max(fd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn example_amplitude_is_sqrt_325() {
        let r = ReferenceSignal::example();
        assert_abs_diff_eq!(r.amplitude_bound(20.0), 3.25f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.derivative_bound(20.0), 3.25f64.sqrt(), epsilon = 1e-12);
        // y'' = -y, so y^2 + y'^2 + y''^2 = (a^2 + b^2) + y^2, peaking at 2 * 3.25
        assert_abs_diff_eq!(r.compact_radius(20.0), 6.5, epsilon = 1e-10);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let r = ReferenceSignal::trig(
            0.3,
            vec![
                Harmonic {
                    sin_amp: 1.5,
                    cos_amp: 1.0,
                    omega: 1.0,
                },
                Harmonic {
                    sin_amp: -0.2,
                    cos_amp: 0.4,
                    omega: 3.0,
                },
            ],
        );
        let h = 1e-5;
        for k in 0..50 {
            let t = k as f64 * 0.37;
            let fd = (r.value(t + h) - r.value(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(r.derivative(t), fd, epsilon = 1e-8);
            let fd2 = (r.derivative(t + h) - r.derivative(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(r.second_derivative(t), fd2, epsilon = 1e-8);
        }
    }

    #[test]
    fn constant_reference() {
        let r = ReferenceSignal::constant(-0.7);
        assert_eq!(r.value(3.0), -0.7);
        assert_eq!(r.derivative(3.0), 0.0);
        assert_abs_diff_eq!(r.amplitude_bound(5.0), 0.7);
    }
}
