//! One-sided integration from the truncation boundary toward x = 0:
//! centered exterior-product propagation, continuous orthogonalization in
//! polar coordinates (Drury flow, with the Davey generalized-inverse variant
//! as a comparison baseline), and orthonormality diagnostics.
//!
//! Integration always runs from the far boundary toward zero; in that
//! direction the centered systems have no decaying modes, so Dirichlet data
//! at the boundary is all that is needed. The only forward-in-x entry point
//! is [`polar_flow_between`], the building block for stability experiments.

pub mod ode;

use crate::error::{EvansError, Result};
use crate::exterior::{centered_drift, leibniz_lift, WedgeVector};
use crate::linalg::ComplexMatrix;
use crate::problems::EvansSystem;
use crate::scalar::{real, Cx, Scalar};
use crate::Side;

pub use ode::{AdaptiveOpts, IntegrationStats, OdeState};

/// Spatial discretization policy for one shot.
#[derive(Debug, Clone)]
pub struct MeshSpec<T> {
    /// Truncation length M > 0; the shot runs on [0, M] or [-M, 0].
    pub truncation: T,
    pub mode: StepMode<T>,
    pub scheme: Scheme,
}

#[derive(Debug, Clone)]
pub enum StepMode<T> {
    FixedStep { h: T },
    Adaptive { abs_tol: T, rel_tol: T, h_min: T, h_max: Option<T> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    BackwardEuler,
    Midpoint,
    Erk4Embedded,
}

impl<T: Scalar> MeshSpec<T> {
    /// Default policy: embedded adaptive Runge-Kutta with equal absolute and
    /// relative tolerances 1e-8, unbounded step growth toward the boundary,
    /// and a floor of 1e-10 * M.
    pub fn default_adaptive(truncation: T) -> Self {
        Self {
            truncation,
            mode: StepMode::Adaptive {
                abs_tol: real(1e-8),
                rel_tol: real(1e-8),
                h_min: real::<T>(1e-10) * truncation,
                h_max: None,
            },
            scheme: Scheme::Erk4Embedded,
        }
    }

    pub fn fixed(truncation: T, h: T, scheme: Scheme) -> Self {
        Self {
            truncation,
            mode: StepMode::FixedStep { h },
            scheme,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation <= T::zero() {
            return Err(EvansError::Usage("truncation M must be positive".into()));
        }
        match &self.mode {
            StepMode::FixedStep { h } => {
                if *h <= T::zero() {
                    return Err(EvansError::Usage("fixed step h must be positive".into()));
                }
                let ratio = self.truncation / *h;
                if (ratio - ratio.round()).abs() > real::<T>(1e-12) * ratio.max(T::one()) {
                    return Err(EvansError::Usage(format!(
                        "fixed step {} does not divide the truncation {}",
                        h, self.truncation
                    )));
                }
            }
            StepMode::Adaptive { abs_tol, rel_tol, h_min, h_max } => {
                if *abs_tol <= T::zero() || *rel_tol < T::zero() {
                    return Err(EvansError::Usage("tolerances must be positive".into()));
                }
                if let Some(hm) = h_max {
                    if *h_min > *hm {
                        return Err(EvansError::Usage("h_min exceeds h_max".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// M = max over both sides of (1/theta) log(C / target), with C estimated
/// from the coefficient deviation at x = 0. Clamped below by 1.
pub fn default_truncation<T: Scalar>(
    system: &EvansSystem<T>,
    lambda: Cx<T>,
    target_error: T,
) -> T {
    let mut m = T::one();
    for side in [Side::Plus, Side::Minus] {
        let c = system
            .coefficient(T::zero(), lambda)
            .sub(&system.limit(side, lambda))
            .norm_fro();
        if c > target_error {
            let candidate = (c / target_error).ln() / system.decay_rate;
            m = m.max(candidate);
        }
    }
    m
}

/// Near-orthonormal frame plus centered radial coordinate (Omega, log gamma).
#[derive(Debug, Clone)]
pub struct PolarState<T> {
    pub omega: ComplexMatrix<T>,
    pub log_gamma: Cx<T>,
}

impl<T: Scalar> PolarState<T> {
    /// The wedge this polar pair represents: exp(log gamma) times the wedge
    /// of the frame columns.
    pub fn represented_wedge(&self) -> Result<WedgeVector<T>> {
        let w = crate::exterior::wedge_columns(&self.omega)?;
        Ok(w.scale(self.log_gamma.exp()))
    }
}

/// Frobenius norm of Omega* Omega - I.
pub fn stiefel_error<T: Scalar>(omega: &ComplexMatrix<T>) -> T {
    let k = omega.cols();
    omega
        .adjoint()
        .matmul(omega)
        .sub(&ComplexMatrix::identity(k))
        .norm_fro()
}

/// Orthogonalization flow variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarVariant {
    /// Omega' = (I - Omega Omega~) A Omega, integrated as a doubled system in
    /// (Omega, Omega~). Damps orthonormality errors in the direction of
    /// travel when tracking the correct subspace.
    Drury,
    /// Omega' = (I - Omega Omega^dagger) A Omega with the generalized inverse
    /// Omega^dagger = (Omega* Omega)^{-1} Omega*. Orthonormality errors are
    /// neutral; kept as a comparison baseline only.
    Davey,
}

/// Counters and diagnostics attached to every shot.
#[derive(Debug, Clone, Copy)]
pub struct ShotStats<T> {
    pub accepted: usize,
    pub rejected: usize,
    pub max_stiefel_error: Option<T>,
    /// Set when the orthonormality error exceeded 1e-3 along the trajectory.
    pub instability_warning: bool,
}

impl<T: Scalar> Default for ShotStats<T> {
    fn default() -> Self {
        Self {
            accepted: 0,
            rejected: 0,
            max_stiefel_error: None,
            instability_warning: false,
        }
    }
}

/// One sampled point of a trajectory dump.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint<T> {
    pub x: T,
    pub state: Vec<Cx<T>>,
    pub stiefel_error: Option<T>,
}

/// Centered exterior-product state: a wedge plus the drift it was centered by.
#[derive(Debug, Clone)]
pub struct CenteredWedgeState<T> {
    pub z: WedgeVector<T>,
    pub drift: Cx<T>,
}

/// One implicit Euler step toward the boundary-opposite direction:
/// solves (I + h a) w = w_next. Fails with a step-size hint when the matrix
/// is numerically singular.
pub fn backward_euler_step<T: Scalar>(
    a: &ComplexMatrix<T>,
    w_next: &[Cx<T>],
    h: T,
) -> Result<Vec<Cx<T>>> {
    if h <= T::zero() {
        return Err(EvansError::Usage("backward Euler step needs h > 0".into()));
    }
    let n = a.rows();
    let lhs = ComplexMatrix::identity(n).add(&a.scale(Cx::new(h, T::zero())));
    let lu = lhs.lu()?;
    if lu.min_pivot_ratio() < real::<T>(1e-14) {
        return Err(EvansError::Numerical(format!(
            "I + h a is numerically singular at h = {}; reduce the step size",
            h
        )));
    }
    lu.solve_vec(w_next)
}

/// One two-step midpoint update: returns the state at the new node,
/// w_new = w_far + span * a_mid * w_mid, where `span` is the signed distance
/// from the far known node to the new node and `a_mid` is the ODE matrix at
/// the middle node.
pub fn midpoint_step<T: Scalar>(
    a_mid: &ComplexMatrix<T>,
    w_far: &[Cx<T>],
    w_mid: &[Cx<T>],
    span: T,
) -> Vec<Cx<T>> {
    let aw = a_mid.matvec(w_mid);
    w_far
        .iter()
        .zip(&aw)
        .map(|(f, d)| *f + d.scale(span))
        .collect()
}

/// Linear fixed-step march of y' = B(x) y from x0 to x1 (either direction).
fn march_linear<T: Scalar>(
    scheme: Scheme,
    b: &impl Fn(T) -> ComplexMatrix<T>,
    x0: T,
    x1: T,
    y0: Vec<Cx<T>>,
    h_abs: T,
) -> Result<(Vec<Cx<T>>, IntegrationStats)> {
    let span = x1 - x0;
    let steps = (span.abs() / h_abs)
        .round()
        .to_usize()
        .ok_or_else(|| EvansError::Usage("step count overflow".into()))?;
    let dir = if span >= T::zero() { T::one() } else { -T::one() };
    let h = dir * h_abs;
    let node = |i: usize| x0 + h * T::from_usize(i).unwrap();
    let mut stats = IntegrationStats::default();

    match scheme {
        Scheme::BackwardEuler => {
            let mut y = y0;
            for i in 0..steps {
                let x_target = node(i + 1);
                // (I - h_signed B(x_target)) y_target = y_source
                let a = b(x_target).scale(Cx::new(-dir, T::zero()));
                y = backward_euler_step(&a, &y, h_abs)?;
                stats.accepted += 1;
            }
            Ok((y, stats))
        }
        Scheme::Midpoint => {
            if steps == 0 {
                return Ok((y0, stats));
            }
            // bootstrap one implicit Euler step, then two-step midpoint
            let mut prev = y0;
            let a1 = b(node(1)).scale(Cx::new(-dir, T::zero()));
            let mut cur = backward_euler_step(&a1, &prev, h_abs)?;
            stats.accepted += 1;
            for i in 1..steps {
                let next = midpoint_step(&b(node(i)), &prev, &cur, h + h);
                prev = cur;
                cur = next;
                stats.accepted += 1;
            }
            Ok((cur, stats))
        }
        Scheme::Erk4Embedded => {
            let f = |x: T, y: &Vec<Cx<T>>| b(x).matvec(y);
            ode::integrate_fixed_rk(f, x0, x1, y0, h_abs, None)
        }
    }
}

/// Propagate a centered wedge from the truncation boundary to x = 0.
///
/// The system is lifted to the exterior power matching the wedge degree and
/// centered by the drift of the tracked subspace, so for constant
/// coefficients the boundary data is an exact equilibrium.
pub fn shoot_exterior<T: Scalar>(
    system: &EvansSystem<T>,
    lambda: Cx<T>,
    side: Side,
    init: &WedgeVector<T>,
    mesh: &MeshSpec<T>,
) -> Result<(CenteredWedgeState<T>, ShotStats<T>)> {
    mesh.validate()?;
    let degree = match side {
        Side::Plus => system.k,
        Side::Minus => system.unstable_rank(),
    };
    if init.basis().n() != system.n || init.basis().k() != degree {
        return Err(EvansError::Dimension(format!(
            "init wedge has degree {} over n = {}, expected degree {} over n = {}",
            init.basis().k(),
            init.basis().n(),
            degree,
            system.n
        )));
    }
    let limit = system.limit(side, lambda);
    let drift = centered_drift(&limit, system.k, side)?;
    let b = |x: T| -> ComplexMatrix<T> {
        let lifted = leibniz_lift(&system.coefficient(x, lambda), degree)
            .expect("lift dimensions fixed by construction");
        let dim = lifted.rows();
        lifted.sub(&ComplexMatrix::diagonal(&vec![drift; dim]))
    };
    let m = mesh.truncation;
    let (x0, x1) = match side {
        Side::Plus => (m, T::zero()),
        Side::Minus => (-m, T::zero()),
    };
    let y0 = init.coords().to_vec();
    let (coords, stats) = match (&mesh.mode, mesh.scheme) {
        (StepMode::FixedStep { h }, scheme) => march_linear(scheme, &b, x0, x1, y0, *h)?,
        (StepMode::Adaptive { abs_tol, rel_tol, h_min, h_max }, Scheme::Erk4Embedded) => {
            let opts = AdaptiveOpts::new(*abs_tol, *rel_tol, *h_min, *h_max);
            let f = |x: T, y: &Vec<Cx<T>>| b(x).matvec(y);
            ode::integrate_adaptive(f, x0, x1, y0, &opts, None)?
        }
        (StepMode::Adaptive { .. }, _) => {
            return Err(EvansError::Usage(
                "implicit schemes run on fixed meshes; use erk4embedded for adaptive shots"
                    .into(),
            ));
        }
    };
    let wedge = WedgeVector::new(init.basis_arc(), coords)?;
    Ok((
        CenteredWedgeState { z: wedge, drift },
        ShotStats {
            accepted: stats.accepted,
            rejected: stats.rejected,
            max_stiefel_error: None,
            instability_warning: false,
        },
    ))
}

fn pack_polar<T: Scalar>(
    omega: &ComplexMatrix<T>,
    omega_tilde: Option<&ComplexMatrix<T>>,
    log_gamma: Cx<T>,
) -> Vec<Cx<T>> {
    let mut out = Vec::with_capacity(
        omega.rows() * omega.cols()
            + omega_tilde.map_or(0, |t| t.rows() * t.cols())
            + 1,
    );
    out.extend_from_slice(omega.data());
    if let Some(t) = omega_tilde {
        out.extend_from_slice(t.data());
    }
    out.push(log_gamma);
    out
}

fn unpack_omega<T: Scalar>(state: &[Cx<T>], n: usize, r: usize) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(n, r, |i, j| state[i * r + j])
}

fn unpack_omega_tilde<T: Scalar>(state: &[Cx<T>], n: usize, r: usize) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(r, n, |i, j| state[n * r + i * n + j])
}

/// Orthogonalization flow between two arbitrary stations. This is the raw
/// engine used by the stability experiments; Evans computations should call
/// [`shoot_polar`], which always integrates from the boundary toward zero.
#[allow(clippy::too_many_arguments)]
pub fn polar_flow_between<T: Scalar>(
    system: &EvansSystem<T>,
    lambda: Cx<T>,
    x0: T,
    x1: T,
    init: &PolarState<T>,
    centering: Cx<T>,
    mesh: &MeshSpec<T>,
    variant: PolarVariant,
    mut trajectory: Option<&mut Vec<TrajectoryPoint<T>>>,
) -> Result<(PolarState<T>, ShotStats<T>)> {
    mesh.validate()?;
    let n = init.omega.rows();
    let r = init.omega.cols();

    let y0 = match variant {
        PolarVariant::Drury => pack_polar(&init.omega, Some(&init.omega.adjoint()), init.log_gamma),
        PolarVariant::Davey => pack_polar(&init.omega, None, init.log_gamma),
    };

    let rhs = move |x: T, state: &Vec<Cx<T>>| -> Vec<Cx<T>> {
        let a = system.coefficient(x, lambda);
        let omega = unpack_omega(state, n, r);
        let a_omega = a.matmul(&omega);
        match variant {
            PolarVariant::Drury => {
                let omega_tilde = unpack_omega_tilde(state, n, r);
                let g = omega_tilde.matmul(&a_omega); // r x r
                let omega_dot = a_omega.sub(&omega.matmul(&g));
                let ta = omega_tilde.matmul(&a.adjoint()); // r x n
                let tao = ta.matmul(&omega); // r x r
                let tilde_dot = ta.sub(&tao.matmul(&omega_tilde));
                let lg_dot = g.trace() - centering;
                let mut out = Vec::with_capacity(state.len());
                out.extend_from_slice(omega_dot.data());
                out.extend_from_slice(tilde_dot.data());
                out.push(lg_dot);
                out
            }
            PolarVariant::Davey => {
                let gram = omega.adjoint().matmul(&omega);
                let g = match gram.solve(&omega.adjoint().matmul(&a_omega)) {
                    Ok(g) => g,
                    Err(_) => {
                        // poison the state; the driver reports nonconvergence
                        let bad = Cx::new(T::nan(), T::zero());
                        return vec![bad; state.len()];
                    }
                };
                let omega_dot = a_omega.sub(&omega.matmul(&g));
                let lg_dot = g.trace() - centering;
                let mut out = Vec::with_capacity(state.len());
                out.extend_from_slice(omega_dot.data());
                out.push(lg_dot);
                out
            }
        }
    };

    let mut max_stiefel = T::zero();
    let mut observer = |x: T, state: &Vec<Cx<T>>| {
        let omega = unpack_omega(state, n, r);
        let err = stiefel_error(&omega);
        if err > max_stiefel {
            max_stiefel = err;
        }
        if let Some(dump) = trajectory.as_deref_mut() {
            dump.push(TrajectoryPoint {
                x,
                state: state.clone(),
                stiefel_error: Some(err),
            });
        }
    };

    let (final_state, stats) = match (&mesh.mode, mesh.scheme) {
        (StepMode::Adaptive { abs_tol, rel_tol, h_min, h_max }, Scheme::Erk4Embedded) => {
            let opts = AdaptiveOpts::new(*abs_tol, *rel_tol, *h_min, *h_max);
            ode::integrate_adaptive(rhs, x0, x1, y0, &opts, Some(&mut observer))?
        }
        (StepMode::FixedStep { h }, Scheme::Erk4Embedded) => {
            ode::integrate_fixed_rk(rhs, x0, x1, y0, *h, Some(&mut observer))?
        }
        (StepMode::FixedStep { h }, Scheme::Midpoint) => {
            march_midpoint_nonlinear(&rhs, x0, x1, y0, *h, &mut observer)?
        }
        _ => {
            return Err(EvansError::Usage(
                "polar shots support erk4embedded (fixed or adaptive) and fixed-step midpoint"
                    .into(),
            ));
        }
    };

    let omega = unpack_omega(&final_state, n, r);
    let log_gamma = final_state[final_state.len() - 1];
    Ok((
        PolarState { omega, log_gamma },
        ShotStats {
            accepted: stats.accepted,
            rejected: stats.rejected,
            max_stiefel_error: Some(max_stiefel),
            instability_warning: max_stiefel > real::<T>(1e-3),
        },
    ))
}

/// Explicit two-step midpoint march for a nonlinear right side, bootstrapped
/// with one fixed Runge-Kutta step.
fn march_midpoint_nonlinear<T: Scalar>(
    f: &impl Fn(T, &Vec<Cx<T>>) -> Vec<Cx<T>>,
    x0: T,
    x1: T,
    y0: Vec<Cx<T>>,
    h_abs: T,
    observer: &mut impl FnMut(T, &Vec<Cx<T>>),
) -> Result<(Vec<Cx<T>>, IntegrationStats)> {
    let span = x1 - x0;
    let steps = (span.abs() / h_abs)
        .round()
        .to_usize()
        .ok_or_else(|| EvansError::Usage("step count overflow".into()))?;
    let dir = if span >= T::zero() { T::one() } else { -T::one() };
    let h = dir * h_abs;
    let mut stats = IntegrationStats::default();
    observer(x0, &y0);
    if steps == 0 {
        return Ok((y0, stats));
    }
    let (mut cur, s) = ode::integrate_fixed_rk(f, x0, x0 + h, y0.clone(), h_abs, None)?;
    stats.accepted += s.accepted;
    observer(x0 + h, &cur);
    let mut prev = y0;
    for i in 1..steps {
        let x_mid = x0 + h * T::from_usize(i).unwrap();
        let fm = f(x_mid, &cur);
        let mut next = prev.clone();
        next.add_scaled(h + h, &fm);
        prev = cur;
        cur = next;
        stats.accepted += 1;
        observer(x_mid + h, &cur);
        if !cur.norm_inf().is_finite() {
            return Err(EvansError::Nonconvergence {
                x: (x_mid + h).to_f64().unwrap_or(f64::NAN),
                message: "midpoint march produced a non-finite state".into(),
            });
        }
    }
    Ok((cur, stats))
}

/// Integrate the polar system from the truncation boundary to x = 0.
///
/// The init must come from the analytic initialization at the boundary: its
/// frame is required to be orthonormal to 1e-10. The centering constant is
/// trace(Omega* A_limit Omega) of the init frame, so boundary data of a
/// constant-coefficient system is an exact equilibrium.
pub fn shoot_polar<T: Scalar>(
    system: &EvansSystem<T>,
    lambda: Cx<T>,
    side: Side,
    init: &PolarState<T>,
    mesh: &MeshSpec<T>,
    variant: PolarVariant,
    trajectory: Option<&mut Vec<TrajectoryPoint<T>>>,
) -> Result<(PolarState<T>, ShotStats<T>)> {
    let err0 = stiefel_error(&init.omega);
    if err0 > real::<T>(1e-10) {
        return Err(EvansError::Usage(format!(
            "polar init frame is not orthonormal: |Omega*Omega - I| = {:e}",
            err0.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let expected_r = match side {
        Side::Plus => system.k,
        Side::Minus => system.unstable_rank(),
    };
    if init.omega.rows() != system.n || init.omega.cols() != expected_r {
        return Err(EvansError::Dimension(format!(
            "polar init frame is {}x{}, expected {}x{}",
            init.omega.rows(),
            init.omega.cols(),
            system.n,
            expected_r
        )));
    }
    let limit = system.limit(side, lambda);
    let centering = init
        .omega
        .adjoint()
        .matmul(&limit.matmul(&init.omega))
        .trace();
    let m = mesh.truncation;
    let (x0, x1) = match side {
        Side::Plus => (m, T::zero()),
        Side::Minus => (-m, T::zero()),
    };
    let (state, stats) = polar_flow_between(
        system, lambda, x0, x1, init, centering, mesh, variant, trajectory,
    )?;
    if stats.instability_warning {
        log::warn!(
            "polar shot at lambda = {} on side {:?}: orthonormality error reached {:e}",
            lambda,
            side,
            stats
                .max_stiefel_error
                .map(|e| e.to_f64().unwrap_or(f64::NAN))
                .unwrap_or(f64::NAN)
        );
    }
    Ok((state, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::wedge_columns;
    use crate::problems::{burgers_shock, constant_coefficient, exact_truncation_error, ScalarTestbed};
    use crate::scalar::cx;

    type M = ComplexMatrix<f64>;

    #[test]
    fn backward_euler_scalar_examples() {
        // (1 + h a)^{-1} w_next with a = 1, h = 1, w = 1 gives 0.5
        let a = M::from_real_rows(&[&[1.0]]);
        let w = backward_euler_step(&a, &[cx(1.0, 0.0)], 1.0).unwrap();
        assert!((w[0].re - 0.5).abs() < 1e-15);
        // a = 0 reproduces the state exactly
        let z = M::from_real_rows(&[&[0.0]]);
        let w0 = backward_euler_step(&z, &[cx(0.7, -0.3)], 2.0).unwrap();
        assert_eq!(w0[0], cx(0.7, -0.3));
        // contraction for any h > 0 when Re a >= 0
        let a2 = M::from_real_rows(&[&[2.0]]);
        for h in [0.1, 1.0, 10.0, 1e4] {
            let w = backward_euler_step(&a2, &[cx(1.0, 0.0)], h).unwrap();
            assert!(w[0].norm() <= 1.0);
        }
    }

    #[test]
    fn midpoint_step_characteristic_roots() {
        // scalar w' = -a w: the two-step recurrence has roots
        // -ah +- sqrt((ah)^2 + 1), straddling 1 in modulus
        let a = 1.3;
        let h = 0.2;
        let ode = M::from_real_rows(&[&[-a]]);
        // verify the recurrence reproduces rho^2 + 2 a h rho - 1 = 0 roots
        for sign in [1.0, -1.0] {
            let rho = -a * h + sign * ((a * h) * (a * h) + 1.0).sqrt();
            // states w_{j-1} = 1, w_j = rho, w_{j+1} = rho^2
            let got = midpoint_step(&ode, &[cx(1.0, 0.0)], &[cx(rho, 0.0)], 2.0 * h);
            assert!((got[0].re - rho * rho).abs() < 1e-12);
        }
        // constant state with a = 0 has zero residual
        let z = M::from_real_rows(&[&[0.0]]);
        let got = midpoint_step(&z, &[cx(1.0, 0.0)], &[cx(1.0, 0.0)], 0.4);
        assert_eq!(got[0], cx(1.0, 0.0));
    }

    #[test]
    fn fixed_rk_reproduces_constant_slope_exactly() {
        let c = cx(0.3, -0.1);
        let f = |_x: f64, _y: &Vec<Cx<f64>>| vec![c];
        let (y, _) = ode::integrate_fixed_rk(f, 0.0, 1.0, vec![cx(0.0, 0.0)], 0.1, None).unwrap();
        assert!((y[0] - c).norm() < 1e-14);
    }

    #[test]
    fn exterior_equilibrium_is_exact_for_all_schemes() {
        let sys = constant_coefficient(M::from_real_rows(&[&[-1.0, 0.0], &[0.0, 1.0]]), 1).unwrap();
        let frame = M::from_real_rows(&[&[1.0], &[0.0]]);
        let init = wedge_columns(&frame).unwrap();
        for m in [10.0, 100.0] {
            for scheme in [Scheme::BackwardEuler, Scheme::Midpoint, Scheme::Erk4Embedded] {
                let mesh = MeshSpec::fixed(m, 1.0, scheme);
                let (out, _) = shoot_exterior(&sys, cx(0.0, 0.0), Side::Plus, &init, &mesh).unwrap();
                let diff = out.z.sub(&init).norm();
                assert!(diff < 1e-12, "scheme {:?} drift {}", scheme, diff);
            }
            let mesh = MeshSpec::default_adaptive(m);
            let (out, _) = shoot_exterior(&sys, cx(0.0, 0.0), Side::Plus, &init, &mesh).unwrap();
            assert!(out.z.sub(&init).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_testbed_matches_closed_form() {
        let tb = ScalarTestbed::new(1.0, 1.0, 1.0).unwrap();
        let sys = tb.system();
        let basis = std::sync::Arc::new(crate::exterior::MultiIndexBasis::new(1, 1).unwrap());
        let init = WedgeVector::new(basis, vec![cx(1.0, 0.0)]).unwrap();
        for m in [4.0, 8.0] {
            let mesh = MeshSpec {
                truncation: m,
                mode: StepMode::Adaptive {
                    abs_tol: 1e-12,
                    rel_tol: 1e-12,
                    h_min: 1e-13,
                    h_max: None,
                },
                scheme: Scheme::Erk4Embedded,
            };
            let (out, _) = shoot_exterior(&sys, cx(0.0, 0.0), Side::Plus, &init, &mesh).unwrap();
            let expect = exact_truncation_error(&tb, m).unwrap();
            assert!(
                (out.z.coords()[0] - expect).norm() < 1e-10,
                "m = {}: {} vs {}",
                m,
                out.z.coords()[0],
                expect
            );
        }
    }

    #[test]
    fn polar_equilibrium_for_constant_coefficients() {
        let a = M::from_real_rows(&[&[-1.0, 0.0, 0.0], &[0.0, -2.0, 0.0], &[0.0, 0.0, 3.0]]);
        let sys = constant_coefficient(a, 2).unwrap();
        let omega = M::from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);
        let init = PolarState {
            omega,
            log_gamma: cx(0.0, 0.0),
        };
        let mesh = MeshSpec::default_adaptive(50.0);
        let (out, stats) = shoot_polar(
            &sys,
            cx(0.0, 0.0),
            Side::Plus,
            &init,
            &mesh,
            PolarVariant::Drury,
            None,
        )
        .unwrap();
        assert!(out.omega.sub(&init.omega).norm_fro() < 1e-12);
        assert!(out.log_gamma.norm() < 1e-12);
        assert!(stats.max_stiefel_error.unwrap() < 1e-12);
    }

    #[test]
    fn polar_represented_wedge_matches_exterior_on_burgers() {
        let sys = burgers_shock::<f64>();
        let lambda = cx(1.0, 0.0);
        let m = 14.0;
        // stable Schur frame of the plus limit
        let frame = crate::linalg::invariant_subspace_basis(
            &sys.limit(Side::Plus, lambda),
            1,
            crate::linalg::SpectralEnd::SmallestReal,
        )
        .unwrap();
        let wedge_init = wedge_columns(&frame).unwrap();
        let polar_init = PolarState {
            omega: frame.clone(),
            log_gamma: cx(0.0, 0.0),
        };
        let mesh = MeshSpec {
            truncation: m,
            mode: StepMode::Adaptive {
                abs_tol: 1e-10,
                rel_tol: 1e-10,
                h_min: 1e-12,
                h_max: None,
            },
            scheme: Scheme::Erk4Embedded,
        };
        let (ext, _) = shoot_exterior(&sys, lambda, Side::Plus, &wedge_init, &mesh).unwrap();
        let (pol, stats) = shoot_polar(
            &sys,
            lambda,
            Side::Plus,
            &polar_init,
            &mesh,
            PolarVariant::Drury,
            None,
        )
        .unwrap();
        let rep = pol.represented_wedge().unwrap();
        let diff = rep.sub(&ext.z).norm() / ext.z.norm();
        assert!(diff < 1e-6, "relative deviation {}", diff);
        assert!(stats.max_stiefel_error.unwrap() < 1e-6);
    }

    #[test]
    fn davey_keeps_orthonormality_error_flat() {
        // perturb the init and watch the Stiefel error stay put
        let a = M::from_real_rows(&[&[-1.0, 0.0, 0.0], &[0.0, -2.0, 0.0], &[0.0, 0.0, 3.0]]);
        let sys = constant_coefficient(a, 2).unwrap();
        let eps = 1e-3;
        let omega = M::from_fn(3, 2, |i, j| {
            let base = if i == j { 1.0 } else { 0.0 };
            let bump = if i == 0 && j == 0 { eps } else { 0.0 };
            cx(base + bump, 0.0)
        });
        let e0 = stiefel_error(&omega);
        let init = PolarState {
            omega,
            log_gamma: cx(0.0, 0.0),
        };
        let mesh = MeshSpec::fixed(6.0, 0.01, Scheme::Erk4Embedded);
        let centering = cx(-3.0, 0.0);
        let (out, _) = polar_flow_between(
            &sys,
            cx(0.0, 0.0),
            6.0,
            0.0,
            &init,
            centering,
            &mesh,
            PolarVariant::Davey,
            None,
        )
        .unwrap();
        let e1 = stiefel_error(&out.omega);
        assert!((e1 - e0).abs() < 1e-8 * e0.max(1e-12) + 1e-12);
    }

    #[test]
    fn stiefel_error_examples() {
        let omega = M::from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);
        assert!(stiefel_error(&omega) < 1e-14);
        let scaled = omega.scale(cx(2.0, 0.0));
        assert!((stiefel_error(&scaled) - 3.0 * 2.0f64.sqrt()).abs() < 1e-12);
    }
}
