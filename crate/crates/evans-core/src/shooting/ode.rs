//! ODE stepping kernels: an embedded Dormand-Prince 5(4) pair with
//! error-per-unit-step control, plus fixed-step drivers.
//!
//! The adaptive controller targets truncation error per unit step,
//! `|est| <= h * (atol + rtol |y|)`, so the accepted step size scales like
//! the fourth root of the tolerance. That matches the step-count model used
//! by the mesh studies and is the natural control for long one-sided
//! integrations toward an equilibrium.

use crate::error::{EvansError, Result};
use crate::scalar::{Cx, Scalar};

/// State vector interface for the generic steppers.
pub trait OdeState<T: Scalar>: Clone {
    /// self += coef * other
    fn add_scaled(&mut self, coef: T, other: &Self);
    /// Zero state of the same shape.
    fn zero_like(&self) -> Self;
    fn norm_inf(&self) -> T;
    /// max_i |est_i| / (atol + rtol * max(|a_i|, |b_i|))
    fn error_ratio(est: &Self, a: &Self, b: &Self, atol: T, rtol: T) -> T;
}

impl<T: Scalar> OdeState<T> for Vec<Cx<T>> {
    fn add_scaled(&mut self, coef: T, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (s, o) in self.iter_mut().zip(other) {
            *s = *s + o.scale(coef);
        }
    }

    fn zero_like(&self) -> Self {
        vec![crate::scalar::czero(); self.len()]
    }

    fn norm_inf(&self) -> T {
        self.iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
    }

    fn error_ratio(est: &Self, a: &Self, b: &Self, atol: T, rtol: T) -> T {
        let mut worst = T::zero();
        for i in 0..est.len() {
            let scale = atol + rtol * a[i].norm().max(b[i].norm());
            if scale > T::zero() {
                worst = worst.max(est[i].norm() / scale);
            }
        }
        worst
    }
}

/// Adaptive controller parameters.
#[derive(Debug, Clone)]
pub struct AdaptiveOpts<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub h_min: T,
    /// `None` leaves the step size unbounded, which is the right default for
    /// one-sided problems that become equilibria toward infinity.
    pub h_max: Option<T>,
    pub max_steps: usize,
}

impl<T: Scalar> AdaptiveOpts<T> {
    pub fn new(abs_tol: T, rel_tol: T, h_min: T, h_max: Option<T>) -> Self {
        Self {
            abs_tol,
            rel_tol,
            h_min,
            h_max,
            max_steps: 5_000_000,
        }
    }
}

/// Counters reported alongside every integration.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
}

struct Dopri5<T> {
    a: [[T; 6]; 6],
    b5: [T; 7],
    d: [T; 7], // b5 - b4: error estimate weights
    c: [T; 6],
}

fn tableau<T: Scalar>() -> Dopri5<T> {
    let r = crate::scalar::real::<T>;
    let z = T::zero();
    let mut a = [[z; 6]; 6];
    a[0][0] = r(1.0 / 5.0);
    a[1][0] = r(3.0 / 40.0);
    a[1][1] = r(9.0 / 40.0);
    a[2][0] = r(44.0 / 45.0);
    a[2][1] = r(-56.0 / 15.0);
    a[2][2] = r(32.0 / 9.0);
    a[3][0] = r(19372.0 / 6561.0);
    a[3][1] = r(-25360.0 / 2187.0);
    a[3][2] = r(64448.0 / 6561.0);
    a[3][3] = r(-212.0 / 729.0);
    a[4][0] = r(9017.0 / 3168.0);
    a[4][1] = r(-355.0 / 33.0);
    a[4][2] = r(46732.0 / 5247.0);
    a[4][3] = r(49.0 / 176.0);
    a[4][4] = r(-5103.0 / 18656.0);
    a[5][0] = r(35.0 / 384.0);
    a[5][1] = z;
    a[5][2] = r(500.0 / 1113.0);
    a[5][3] = r(125.0 / 192.0);
    a[5][4] = r(-2187.0 / 6784.0);
    a[5][5] = r(11.0 / 84.0);
    let b5 = [
        r(35.0 / 384.0),
        z,
        r(500.0 / 1113.0),
        r(125.0 / 192.0),
        r(-2187.0 / 6784.0),
        r(11.0 / 84.0),
        z,
    ];
    let b4 = [
        r(5179.0 / 57600.0),
        z,
        r(7571.0 / 16695.0),
        r(393.0 / 640.0),
        r(-92097.0 / 339200.0),
        r(187.0 / 2100.0),
        r(1.0 / 40.0),
    ];
    let mut d = [z; 7];
    for i in 0..7 {
        d[i] = b5[i] - b4[i];
    }
    let c = [
        r(1.0 / 5.0),
        r(3.0 / 10.0),
        r(4.0 / 5.0),
        r(8.0 / 9.0),
        r(1.0),
        r(1.0),
    ];
    Dopri5 { a, b5, d, c }
}

/// One Dormand-Prince step from (x, y) with signed step h.
/// Returns (y_new, error_estimate).
fn dopri_step<T: Scalar, S: OdeState<T>>(
    tab: &Dopri5<T>,
    f: &impl Fn(T, &S) -> S,
    x: T,
    y: &S,
    h: T,
) -> (S, S) {
    let mut k: Vec<S> = Vec::with_capacity(7);
    k.push(f(x, y));
    for stage in 0..6 {
        let mut yi = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let coef = tab.a[stage][j];
            if !coef.is_zero() {
                yi.add_scaled(h * coef, kj);
            }
        }
        k.push(f(x + tab.c[stage] * h, &yi));
    }
    let mut y_new = y.clone();
    for (j, kj) in k.iter().enumerate() {
        if !tab.b5[j].is_zero() {
            y_new.add_scaled(h * tab.b5[j], kj);
        }
    }
    let mut est = y.zero_like();
    for (j, kj) in k.iter().enumerate() {
        if !tab.d[j].is_zero() {
            est.add_scaled(h * tab.d[j], kj);
        }
    }
    (y_new, est)
}

/// Integrate y' = f(x, y) from x0 to x1 (either direction) with adaptive
/// steps. Calls `observer` after the initial point and after every accepted
/// step.
pub fn integrate_adaptive<T: Scalar, S: OdeState<T>>(
    f: impl Fn(T, &S) -> S,
    x0: T,
    x1: T,
    y0: S,
    opts: &AdaptiveOpts<T>,
    mut observer: Option<&mut dyn FnMut(T, &S)>,
) -> Result<(S, IntegrationStats)> {
    let tab = tableau::<T>();
    let span = x1 - x0;
    let mut stats = IntegrationStats::default();
    if span.is_zero() {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let span_abs = span.abs();
    let ten = crate::scalar::real::<T>(10.0);
    let mut h_abs = (span_abs / ten).min(opts.h_max.unwrap_or(T::infinity()));
    let mut x = x0;
    let mut y = y0;
    if let Some(obs) = observer.as_deref_mut() {
        obs(x, &y);
    }
    let safety = crate::scalar::real::<T>(0.9);
    let grow = crate::scalar::real::<T>(5.0);
    let shrink = crate::scalar::real::<T>(0.1);
    let quarter = crate::scalar::real::<T>(0.25);

    loop {
        let remaining = (x1 - x).abs();
        if remaining <= T::epsilon() * span_abs {
            break;
        }
        if h_abs >= remaining {
            h_abs = remaining;
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(EvansError::Nonconvergence {
                x: x.to_f64().unwrap_or(f64::NAN),
                message: format!("step budget of {} exhausted", opts.max_steps),
            });
        }
        let h = dir * h_abs;
        let (y_new, est) = dopri_step(&tab, &f, x, &y, h);
        if !y_new.norm_inf().is_finite() {
            // blow-up inside a trial step: shrink hard
            stats.rejected += 1;
            h_abs = h_abs * shrink;
            if h_abs < opts.h_min {
                return Err(EvansError::Nonconvergence {
                    x: x.to_f64().unwrap_or(f64::NAN),
                    message: "state became non-finite and the step size underflowed".into(),
                });
            }
            continue;
        }
        // error per unit step
        let ratio = S::error_ratio(&est, &y, &y_new, opts.abs_tol, opts.rel_tol);
        let q = ratio / h_abs;
        if q <= T::one() {
            x = x + h;
            y = y_new;
            stats.accepted += 1;
            if let Some(obs) = observer.as_deref_mut() {
                obs(x, &y);
            }
            let factor = if q.is_zero() {
                grow
            } else {
                (safety * q.powf(-quarter)).min(grow).max(shrink)
            };
            h_abs = (h_abs * factor).min(opts.h_max.unwrap_or(T::infinity()));
        } else {
            stats.rejected += 1;
            let factor = (safety * q.powf(-quarter)).min(T::one()).max(shrink);
            h_abs = h_abs * factor;
            if h_abs < opts.h_min {
                return Err(EvansError::Nonconvergence {
                    x: x.to_f64().unwrap_or(f64::NAN),
                    message: format!(
                        "adaptive step underflowed below h_min = {:e}",
                        opts.h_min.to_f64().unwrap_or(f64::NAN)
                    ),
                });
            }
        }
    }
    Ok((y, stats))
}

/// Fixed-step Dormand-Prince driver (no error control); `h_abs` must divide
/// the span. Calls the observer after the initial point and each step.
pub fn integrate_fixed_rk<T: Scalar, S: OdeState<T>>(
    f: impl Fn(T, &S) -> S,
    x0: T,
    x1: T,
    y0: S,
    h_abs: T,
    mut observer: Option<&mut dyn FnMut(T, &S)>,
) -> Result<(S, IntegrationStats)> {
    let tab = tableau::<T>();
    let span = x1 - x0;
    let steps_f = (span.abs() / h_abs).round();
    let steps = steps_f.to_usize().ok_or_else(|| {
        EvansError::Usage("fixed step count does not fit in usize".into())
    })?;
    let dir = if span >= T::zero() { T::one() } else { -T::one() };
    let h = dir * h_abs;
    let mut y = y0;
    let mut stats = IntegrationStats::default();
    if let Some(obs) = observer.as_deref_mut() {
        obs(x0, &y);
    }
    for i in 0..steps {
        let x = x0 + h * T::from_usize(i).unwrap();
        let (y_new, _) = dopri_step(&tab, &f, x, &y, h);
        y = y_new;
        stats.accepted += 1;
        if !y.norm_inf().is_finite() {
            return Err(EvansError::Nonconvergence {
                x: (x + h).to_f64().unwrap_or(f64::NAN),
                message: "state became non-finite during fixed-step integration".into(),
            });
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs(x + h, &y);
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn adaptive_matches_exponential() {
        // y' = -y from 0 to 3: y(3) = e^{-3}
        let f = |_x: f64, y: &Vec<Cx<f64>>| vec![-y[0]];
        let opts = AdaptiveOpts::new(1e-10, 1e-10, 1e-14, None);
        let (y, stats) =
            integrate_adaptive(f, 0.0, 3.0, vec![cx(1.0, 0.0)], &opts, None).unwrap();
        assert!((y[0].re - (-3.0f64).exp()).abs() < 1e-8);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn adaptive_handles_backward_direction() {
        // y' = y integrated from 3 down to 0 with y(3) = e^3 gives y(0) = 1
        let f = |_x: f64, y: &Vec<Cx<f64>>| vec![y[0]];
        let opts = AdaptiveOpts::new(1e-10, 1e-10, 1e-14, None);
        let (y, _) =
            integrate_adaptive(f, 3.0, 0.0, vec![cx(3.0f64.exp(), 0.0)], &opts, None).unwrap();
        assert!((y[0].re - 1.0).abs() < 1e-7);
    }

    #[test]
    fn equilibrium_costs_almost_nothing() {
        let f = |_x: f64, y: &Vec<Cx<f64>>| vec![y[0] * cx(0.0, 0.0)];
        let opts = AdaptiveOpts::new(1e-8, 1e-8, 1e-12, None);
        let (y, stats) =
            integrate_adaptive(f, 0.0, 1000.0, vec![cx(2.0, -1.0)], &opts, None).unwrap();
        assert_eq!(y[0], cx(2.0, -1.0));
        assert!(stats.accepted <= 10, "took {} steps", stats.accepted);
    }

    #[test]
    fn fixed_step_matches_exponential() {
        let f = |_x: f64, y: &Vec<Cx<f64>>| vec![-y[0]];
        let (y, stats) =
            integrate_fixed_rk(f, 0.0, 2.0, vec![cx(1.0, 0.0)], 0.01, None).unwrap();
        assert_eq!(stats.accepted, 200);
        assert!((y[0].re - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn observer_sees_every_accepted_point() {
        let f = |_x: f64, y: &Vec<Cx<f64>>| vec![-y[0]];
        let mut xs = Vec::new();
        let mut obs = |x: f64, _y: &Vec<Cx<f64>>| xs.push(x);
        integrate_fixed_rk(f, 0.0, 1.0, vec![cx(1.0, 0.0)], 0.25, Some(&mut obs)).unwrap();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
