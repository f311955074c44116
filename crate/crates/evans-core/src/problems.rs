//! Problem definitions: the first-order eigenvalue system W' = A(x, lambda) W
//! with asymptotically constant coefficients, plus a catalog of built-in test
//! problems with analytic oracles.

use std::sync::Arc;

use crate::error::{EvansError, Result};
use crate::linalg::{eigenvalues, ComplexMatrix};
use crate::scalar::{cx, real, Cx, Scalar};
use crate::Side;

type CoefficientFn<T> = dyn Fn(T, Cx<T>) -> ComplexMatrix<T> + Send + Sync;
type LimitFn<T> = dyn Fn(Cx<T>) -> ComplexMatrix<T> + Send + Sync;

/// A problem instance: coefficient evaluator, limits at spatial infinity,
/// exponential decay rate of the coefficient toward its limits, and the
/// dimensions (n, k) of the phase space and of the tracked stable subspace
/// of the plus-side limit.
///
/// Systems are immutable after construction; the evaluators are pure, so a
/// system can be shared freely across worker threads.
#[derive(Clone)]
pub struct EvansSystem<T> {
    pub n: usize,
    /// Dimension of the stable subspace of the plus-side limit matrix.
    pub k: usize,
    pub coefficient: Arc<CoefficientFn<T>>,
    pub limit_plus: Arc<LimitFn<T>>,
    pub limit_minus: Arc<LimitFn<T>>,
    /// Rate theta > 0 in |A(x, .) - A_pm| <= C exp(-theta |x|).
    pub decay_rate: T,
    pub description: String,
    /// Declared lambda values where the stable/unstable split degenerates
    /// (branch points, essential-spectrum touch points). Contour nodes must
    /// keep a configurable distance from these.
    pub singular_points: Vec<Cx<T>>,
    /// True when A(x, conj(lambda)) = conj(A(x, lambda)) entrywise.
    pub real_coefficients: bool,
}

impl<T: Scalar> std::fmt::Debug for EvansSystem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EvansSystem")
            .field("n", &self.n)
            .field("k", &self.k)
            .field("decay_rate", &self.decay_rate)
            .field("description", &self.description)
            .finish()
    }
}

impl<T: Scalar> EvansSystem<T> {
    pub fn coefficient(&self, x: T, lambda: Cx<T>) -> ComplexMatrix<T> {
        (self.coefficient)(x, lambda)
    }

    pub fn limit(&self, side: Side, lambda: Cx<T>) -> ComplexMatrix<T> {
        match side {
            Side::Plus => (self.limit_plus)(lambda),
            Side::Minus => (self.limit_minus)(lambda),
        }
    }

    /// Dimension of the tracked unstable subspace of the minus-side limit.
    pub fn unstable_rank(&self) -> usize {
        self.n - self.k
    }

    /// Spot-check the exponential decay hypothesis at a few x stations, with
    /// the constant estimated at x = 0 and a fixed slack factor of 4.
    pub fn verify_decay(&self, lambda: Cx<T>) -> Result<()> {
        let slack = real::<T>(4.0);
        for side in [Side::Plus, Side::Minus] {
            let limit = self.limit(side, lambda);
            let sgn = match side {
                Side::Plus => T::one(),
                Side::Minus => -T::one(),
            };
            let c0 = self
                .coefficient(T::zero(), lambda)
                .sub(&limit)
                .norm_fro();
            if c0 <= T::epsilon() {
                continue; // constant-coefficient side
            }
            for station in [2.0, 5.0, 10.0] {
                let x = real::<T>(station) * sgn;
                let dev = self.coefficient(x, lambda).sub(&limit).norm_fro();
                let bound = slack * c0 * (-self.decay_rate * real::<T>(station)).exp();
                if dev > bound {
                    return Err(EvansError::Numerical(format!(
                        "decay spot-check failed on side {:?} at |x| = {}: deviation {} exceeds {}",
                        side, station, dev, bound
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether the sign-based splitting is consistent at this lambda: k
    /// stable eigenvalues of the plus limit and n - k unstable eigenvalues of
    /// the minus limit, counted by real-part sign.
    pub fn consistent_splitting_at(&self, lambda: Cx<T>) -> Result<bool> {
        let plus = eigenvalues(&self.limit(Side::Plus, lambda))?;
        let minus = eigenvalues(&self.limit(Side::Minus, lambda))?;
        let stable_plus = plus.iter().filter(|z| z.re < T::zero()).count();
        let unstable_minus = minus.iter().filter(|z| z.re > T::zero()).count();
        Ok(stable_plus == self.k && unstable_minus == self.n - self.k)
    }
}

/// x-independent system W' = A W.
pub fn constant_coefficient<T: Scalar>(a: ComplexMatrix<T>, k: usize) -> Result<EvansSystem<T>> {
    if !a.is_square() {
        return Err(EvansError::Dimension(format!(
            "constant-coefficient system needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if k == 0 || k > n {
        return Err(EvansError::Dimension(format!(
            "stable rank {} out of range for dimension {}",
            k, n
        )));
    }
    let a1 = a.clone();
    let a2 = a.clone();
    let a3 = a.clone();
    let real_coefficients = a.data().iter().all(|z| z.im.is_zero());
    Ok(EvansSystem {
        n,
        k,
        coefficient: Arc::new(move |_x, _l| a1.clone()),
        limit_plus: Arc::new(move |_l| a2.clone()),
        limit_minus: Arc::new(move |_l| a3.clone()),
        decay_rate: T::one(),
        description: "constant-coefficient system".into(),
        singular_points: Vec::new(),
        real_coefficients,
    })
}

/// Scalar convected heat equation lambda u + eta u' = u'' as a first-order
/// system with coefficient matrix [[0, 1], [lambda, eta]].
///
/// x-independent; its stable eigenvalue family eta/2 - sqrt(eta^2/4 + lambda)
/// has a square-root branch point at lambda = -eta^2/4, which makes it the
/// canonical stress test for analytic eigenbasis continuation.
pub fn convected_heat<T: Scalar>(eta: T) -> EvansSystem<T> {
    let build = move |l: Cx<T>| {
        ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => cx(1.0, 0.0),
            (1, 0) => l,
            (1, 1) => Cx::new(eta, T::zero()),
            _ => cx(0.0, 0.0),
        })
    };
    EvansSystem {
        n: 2,
        k: 1,
        coefficient: Arc::new(move |_x, l| build(l)),
        limit_plus: Arc::new(move |l| build(l)),
        limit_minus: Arc::new(move |l| build(l)),
        decay_rate: T::one(),
        description: format!("convected heat equation, eta = {}", eta),
        singular_points: vec![Cx::new(-eta * eta / real::<T>(4.0), T::zero())],
        real_coefficients: true,
    }
}

/// System with coefficient A(x) = A_inf + exp(-theta |x|) B on both sides.
pub fn exp_perturbed<T: Scalar>(
    a_limit: ComplexMatrix<T>,
    b: ComplexMatrix<T>,
    theta: T,
    k: usize,
) -> Result<EvansSystem<T>> {
    if theta <= T::zero() {
        return Err(EvansError::Usage("decay rate theta must be positive".into()));
    }
    if a_limit.rows() != b.rows() || a_limit.cols() != b.cols() || !a_limit.is_square() {
        return Err(EvansError::Dimension(
            "limit and perturbation matrices must be square of equal size".into(),
        ));
    }
    let n = a_limit.rows();
    let al = a_limit.clone();
    let al2 = a_limit.clone();
    let al3 = a_limit.clone();
    let real_coefficients = a_limit
        .data()
        .iter()
        .chain(b.data().iter())
        .all(|z| z.im.is_zero());
    Ok(EvansSystem {
        n,
        k,
        coefficient: Arc::new(move |x: T, _l| {
            let damp = (-theta * x.abs()).exp();
            al.add(&b.scale(Cx::new(damp, T::zero())))
        }),
        limit_plus: Arc::new(move |_l| al2.clone()),
        limit_minus: Arc::new(move |_l| al3.clone()),
        decay_rate: theta,
        description: "exponentially perturbed constant-coefficient system".into(),
        singular_points: Vec::new(),
        real_coefficients,
    })
}

/// Linearization of Burgers' equation about its standing viscous shock
/// u(x) = -tanh(x/2), in flux variables W = (u, u' - u_bar u):
///
/// ```text
/// A(x, lambda) = [[u_bar(x), 1], [lambda, 0]],
/// A_pm(lambda) = [[ -+1, 1], [lambda, 0]].
/// ```
///
/// n = 2, k = 1, decay rate theta = 1. Translation invariance puts an
/// eigenvalue at lambda = 0, embedded in the essential spectrum boundary, so
/// lambda = 0 is declared singular.
pub fn burgers_shock<T: Scalar>() -> EvansSystem<T> {
    let profile = |x: T| -(x / real::<T>(2.0)).tanh();
    let at = move |u: T, l: Cx<T>| {
        ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => Cx::new(u, T::zero()),
            (0, 1) => cx(1.0, 0.0),
            (1, 0) => l,
            _ => cx(0.0, 0.0),
        })
    };
    EvansSystem {
        n: 2,
        k: 1,
        coefficient: Arc::new(move |x, l| at(profile(x), l)),
        limit_plus: Arc::new(move |l| at(-T::one(), l)),
        limit_minus: Arc::new(move |l| at(T::one(), l)),
        decay_rate: T::one(),
        description: "Burgers standing shock linearization".into(),
        singular_points: vec![cx(0.0, 0.0)],
        real_coefficients: true,
    }
}

/// Scalar testbed w' = (-a_inf + b exp(-theta x)) w whose centered truncation
/// error has a closed form, used as the oracle for convergence-rate studies.
#[derive(Debug, Clone, Copy)]
pub struct ScalarTestbed<T> {
    pub a_inf: T,
    pub b: T,
    pub theta: T,
}

impl<T: Scalar> ScalarTestbed<T> {
    pub fn new(a_inf: T, b: T, theta: T) -> Result<Self> {
        if a_inf <= T::zero() || theta <= T::zero() {
            return Err(EvansError::Usage(
                "scalar testbed needs a_inf > 0 and theta > 0".into(),
            ));
        }
        Ok(Self { a_inf, b, theta })
    }

    /// Embed as a 1x1 system.
    pub fn system(&self) -> EvansSystem<T> {
        let ScalarTestbed { a_inf, b, theta } = *self;
        EvansSystem {
            n: 1,
            k: 1,
            coefficient: Arc::new(move |x: T, _l| {
                ComplexMatrix::from_fn(1, 1, |_, _| {
                    Cx::new(-a_inf + b * (-theta * x.abs()).exp(), T::zero())
                })
            }),
            limit_plus: Arc::new(move |_l| {
                ComplexMatrix::from_fn(1, 1, |_, _| Cx::new(-a_inf, T::zero()))
            }),
            limit_minus: Arc::new(move |_l| {
                ComplexMatrix::from_fn(1, 1, |_, _| Cx::new(-a_inf, T::zero()))
            }),
            decay_rate: theta,
            description: format!(
                "scalar testbed: w' = (-{} + {} exp(-{} x)) w",
                a_inf, b, theta
            ),
            singular_points: Vec::new(),
            real_coefficients: true,
        }
    }
}

/// Exact value z(0) of the centered scalar problem z' = b exp(-theta x) z
/// with z(M) = 1:
///
/// ```text
/// z(0) = exp((b/theta)(exp(-theta M) - 1)).
/// ```
///
/// Relative to the M = infinity value exp(-b/theta), the truncation error is
/// exp((b/theta) exp(-theta M)) - 1, approximately (b/theta) exp(-theta M).
pub fn exact_truncation_error<T: Scalar>(tb: &ScalarTestbed<T>, m: T) -> Result<Cx<T>> {
    if m < T::zero() {
        return Err(EvansError::Usage("truncation length must be >= 0".into()));
    }
    let ratio = tb.b / tb.theta;
    Ok(Cx::new(
        (ratio * ((-tb.theta * m).exp() - T::one())).exp(),
        T::zero(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigenvalues;

    type M = ComplexMatrix<f64>;

    #[test]
    fn convected_heat_eigenvalues() {
        // characteristic polynomial mu^2 = eta mu + lambda
        let sys = convected_heat::<f64>(0.0);
        let ev = eigenvalues(&sys.limit(Side::Plus, cx(1.0, 0.0))).unwrap();
        assert!((ev[0] - cx(-1.0, 0.0)).norm() < 1e-12);
        assert!((ev[1] - cx(1.0, 0.0)).norm() < 1e-12);

        let sys2 = convected_heat::<f64>(2.0);
        let ev2 = eigenvalues(&sys2.limit(Side::Plus, cx(0.0, 0.0))).unwrap();
        assert!(ev2[0].norm() < 1e-12);
        assert!((ev2[1] - cx(2.0, 0.0)).norm() < 1e-12);
        // branch point of the stable family declared at lambda = -eta^2/4
        assert!((sys2.singular_points[0] - cx(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn exp_perturbed_decay_profile() {
        let a = M::from_real_rows(&[&[-1.0, 0.0], &[0.0, -2.0]]);
        let b = M::from_real_rows(&[&[0.3, 0.1], &[0.0, 0.2]]);
        let theta = 0.7;
        let sys = exp_perturbed(a.clone(), b.clone(), theta, 2).unwrap();
        let dev = sys.coefficient(5.0, cx(0.0, 0.0)).sub(&a).norm_fro() / b.norm_fro();
        assert!((dev - (-5.0 * theta).exp()).abs() < 1e-14);
        sys.verify_decay(cx(0.3, 0.0)).unwrap();

        // b = 0 reduces to the constant-coefficient system
        let sys0 = exp_perturbed(a.clone(), M::zeros(2, 2), 1.0, 2).unwrap();
        assert!(sys0.coefficient(3.0, cx(0.0, 0.0)).sub(&a).norm_fro() < 1e-15);
    }

    #[test]
    fn burgers_basics() {
        let sys = burgers_shock::<f64>();
        let l = cx(0.7, 0.2);
        // u_bar(0) = 0
        let a0 = sys.coefficient(0.0, l);
        assert!(a0[(0, 0)].norm() < 1e-15);
        assert!((a0[(1, 0)] - l).norm() < 1e-15);
        // profile oddness: trace A(x) + trace A(-x) = 0
        for x in [0.3, 1.0, 2.7, 8.0] {
            let t = sys.coefficient(x, l).trace() + sys.coefficient(-x, l).trace();
            assert!(t.norm() < 1e-12);
        }
        sys.verify_decay(l).unwrap();
        assert!(sys.consistent_splitting_at(cx(1.0, 0.0)).unwrap());
    }

    #[test]
    fn scalar_testbed_truncation_error() {
        let tb = ScalarTestbed::new(1.0, 1.0, 1.0).unwrap();
        // b = 0: no error at all
        let tb0 = ScalarTestbed::new(1.0, 0.0, 1.0).unwrap();
        assert!((exact_truncation_error(&tb0, 5.0).unwrap() - cx(1.0, 0.0)).norm() < 1e-15);
        // large M tends to the closed-form integral exp(-b/theta)
        let z = exact_truncation_error(&tb, 700.0).unwrap();
        assert!((z.re - (-1.0f64).exp()).abs() < 1e-14);
        // theta = 1, b = 1, M = 10: relative error exp(exp(-10)) - 1
        let z10 = exact_truncation_error(&tb, 10.0).unwrap();
        let rel = (z10.re / (-1.0f64).exp() - 1.0).abs();
        let expect = ((-10.0f64).exp().exp() - 1.0).abs();
        assert!((rel - expect).abs() < 1e-12);
        assert!((expect - 4.54e-5).abs() < 1e-7);
    }

    #[test]
    fn catalog_systems_pass_decay_check() {
        burgers_shock::<f64>().verify_decay(cx(0.5, 0.1)).unwrap();
        ScalarTestbed::new(1.0, 1.0, 2.0)
            .unwrap()
            .system()
            .verify_decay(cx(0.0, 0.0))
            .unwrap();
        convected_heat::<f64>(1.0).verify_decay(cx(1.0, 0.0)).unwrap();
    }
}
