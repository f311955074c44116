//! Evans function assembly, contour sampling, and winding numbers.
//!
//! D(lambda) is assembled at x = 0 from whichever propagation method is in
//! use; analyticity in lambda is inherited from the continued eigenbases, so
//! winding numbers over closed contours count eigenvalues inside. The
//! argument-principle step control keeps the relative change of D between
//! consecutive samples below 0.1, bisecting contour segments until it does;
//! by Rouche's theorem a relative change below one already leaves the
//! winding number intact, so 0.1 is conservative.

use rayon::prelude::*;

use crate::bvp::{solve_conjugator, solve_polar_bvp, HomotopySchedule};
use crate::error::{EvansError, Result};
use crate::exterior::{coordinatize_top, WedgeVector};
use crate::kato::{init_exterior, init_polar, second_order_step, Contour};
use crate::linalg::{invariant_subspace_basis, ComplexMatrix, SpectralEnd};
use crate::problems::EvansSystem;
use crate::scalar::{real, Cx, Scalar};
use crate::shooting::{
    shoot_exterior, shoot_polar, MeshSpec, PolarState, PolarVariant, Scheme, StepMode,
};
use crate::Side;

/// How D(lambda) is produced at each contour node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExteriorShooting,
    PolarShooting(PolarVariant),
    PolarBvp,
    Conjugation,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::ExteriorShooting => write!(f, "exterior"),
            Method::PolarShooting(PolarVariant::Drury) => write!(f, "polar"),
            Method::PolarShooting(PolarVariant::Davey) => write!(f, "polar-davey"),
            Method::PolarBvp => write!(f, "polar-bvp"),
            Method::Conjugation => write!(f, "conjugation"),
        }
    }
}

/// D from the two one-sided wedges at x = 0.
pub fn evans_from_exterior<T: Scalar>(
    w_plus: &WedgeVector<T>,
    w_minus: &WedgeVector<T>,
) -> Result<Cx<T>> {
    coordinatize_top(w_plus, w_minus)
}

/// D from the two polar states at x = 0:
/// exp(log gamma_+ + log gamma_-) det(Omega_+, Omega_-).
pub fn evans_from_polar<T: Scalar>(
    plus: &PolarState<T>,
    minus: &PolarState<T>,
) -> Result<Cx<T>> {
    let n = plus.omega.rows();
    if minus.omega.rows() != n || plus.omega.cols() + minus.omega.cols() != n {
        return Err(EvansError::Dimension(format!(
            "polar frames {}x{} and {}x{} do not concatenate to a square matrix",
            plus.omega.rows(),
            plus.omega.cols(),
            minus.omega.rows(),
            minus.omega.cols()
        )));
    }
    let stacked = plus.omega.hstack(&minus.omega)?;
    Ok((plus.log_gamma + minus.log_gamma).exp() * stacked.det()?)
}

/// D from the conjugators and continued frames:
/// det(P_+(0) R_+, P_-(0) R_-).
pub fn evans_from_conjugators<T: Scalar>(
    p_plus_at_zero: &ComplexMatrix<T>,
    p_minus_at_zero: &ComplexMatrix<T>,
    r_plus: &ComplexMatrix<T>,
    r_minus: &ComplexMatrix<T>,
) -> Result<Cx<T>> {
    let left = p_plus_at_zero.matmul(r_plus);
    let right = p_minus_at_zero.matmul(r_minus);
    if left.rows() != right.rows() || left.cols() + right.cols() != left.rows() {
        return Err(EvansError::Dimension(format!(
            "conjugated frames {}x{} and {}x{} do not concatenate to a square matrix",
            left.rows(),
            left.cols(),
            right.rows(),
            right.cols()
        )));
    }
    left.hstack(&right)?.det()
}

/// Per-sample bookkeeping.
#[derive(Debug, Clone)]
pub struct SampleDiagnostics<T> {
    pub truncation: T,
    pub steps: usize,
    pub rejected: usize,
    pub max_stiefel_error: Option<T>,
    /// False when the sign-counted splitting disagrees with the declared
    /// ranks, which happens inside the essential spectrum; the run proceeds
    /// but is flagged.
    pub sign_split_consistent: bool,
}

/// One Evans function sample.
#[derive(Debug, Clone)]
pub struct EvansSample<T> {
    /// Contour parameter in [0, 1).
    pub t: T,
    pub lambda: Cx<T>,
    pub value: Cx<T>,
    pub method: Method,
    pub diagnostics: SampleDiagnostics<T>,
}

/// Node outcome of an open-contour sweep; failures are kept as gap markers
/// so partial results stay usable.
#[derive(Debug, Clone)]
pub enum SampleOutcome<T> {
    Ok(EvansSample<T>),
    Failed { t: T, lambda: Cx<T>, error: String },
}

impl<T> SampleOutcome<T> {
    pub fn is_ok(&self) -> bool {
        matches!(self, SampleOutcome::Ok(_))
    }
}

/// Method selection plus the meshes it needs.
#[derive(Debug, Clone)]
pub struct MethodConfig<T> {
    pub method: Method,
    /// Mesh for the shooting methods.
    pub shoot_mesh: MeshSpec<T>,
    /// Fixed-step mesh for the boundary-value methods.
    pub bvp_mesh: MeshSpec<T>,
    pub schedule: HomotopySchedule<T>,
}

impl<T: Scalar> MethodConfig<T> {
    /// Defaults: adaptive shooting at tolerance 1e-8; boundary-value meshes
    /// with steps of about 5e-3 (second-order accurate to ~1e-5 over unit
    /// scale coefficients); a 10-stage homotopy.
    pub fn new(method: Method, truncation: T) -> Self {
        let target_h = real::<T>(5e-3);
        let steps = (truncation / target_h).ceil().max(real::<T>(8.0));
        let h = truncation / steps;
        Self {
            method,
            shoot_mesh: MeshSpec::default_adaptive(truncation),
            bvp_mesh: MeshSpec {
                truncation,
                mode: StepMode::FixedStep { h },
                scheme: Scheme::Midpoint,
            },
            schedule: HomotopySchedule::uniform(10),
        }
    }

    pub fn truncation(&self) -> T {
        self.shoot_mesh.truncation
    }
}

/// Kato data pinned at a contour parameter.
#[derive(Debug, Clone)]
struct CursorNode<T> {
    t: T,
    lambda: Cx<T>,
    pi_plus: ComplexMatrix<T>,
    pi_minus: ComplexMatrix<T>,
    frame_plus: ComplexMatrix<T>,
    frame_minus: ComplexMatrix<T>,
}

/// Samples D along a contour, extending the analytic eigenbases to refined
/// nodes on demand. Frames at a node never change once created, so late
/// refinements stay consistent with earlier samples.
pub struct ContourSampler<'a, T: Scalar> {
    system: &'a EvansSystem<T>,
    contour: Contour<T>,
    config: MethodConfig<T>,
    nodes: Vec<CursorNode<T>>,
}

impl<'a, T: Scalar> ContourSampler<'a, T> {
    /// Build the sampler and run the initial analytic continuation over the
    /// contour nodes. Fails if the very first node has no valid splitting;
    /// later node failures surface during evaluation instead.
    pub fn new(
        system: &'a EvansSystem<T>,
        contour: &Contour<T>,
        config: MethodConfig<T>,
    ) -> Result<Self> {
        let params: Vec<T> = if contour.is_closed() {
            // drop the duplicate closing parameter; sampling wraps to t = 0
            let p = contour.params();
            p[..p.len() - 1].to_vec()
        } else {
            contour.params().to_vec()
        };
        let mut sampler = Self {
            system,
            contour: contour.clone(),
            config,
            nodes: Vec::new(),
        };
        let first = sampler.fresh_node(params[0], None)?;
        sampler.nodes.push(first);
        for &t in &params[1..] {
            let prev = sampler.nodes.last().unwrap().clone();
            match sampler.fresh_node(t, Some(&prev)) {
                Ok(node) => sampler.nodes.push(node),
                Err(err) => {
                    // leave a gap; evaluation at this t reports the failure
                    log::warn!("contour node t = {} skipped: {}", t, err);
                }
            }
        }
        Ok(sampler)
    }

    fn projectors_at(&self, lambda: Cx<T>) -> Result<(ComplexMatrix<T>, ComplexMatrix<T>)> {
        let k = self.system.k;
        let plus = crate::linalg::eigenprojections(&self.system.limit(Side::Plus, lambda), k)
            .map_err(|e| EvansError::Split(format!("at lambda = {}: {}", lambda, e)))?;
        let minus = crate::linalg::eigenprojections(&self.system.limit(Side::Minus, lambda), k)
            .map_err(|e| EvansError::Split(format!("at lambda = {}: {}", lambda, e)))?;
        Ok((plus.stable, minus.unstable))
    }

    fn fresh_node(&self, t: T, from: Option<&CursorNode<T>>) -> Result<CursorNode<T>> {
        let lambda = self.contour.at(t);
        let (pi_plus, pi_minus) = self.projectors_at(lambda)?;
        let (frame_plus, frame_minus) = match from {
            None => {
                let fp = invariant_subspace_basis(
                    &self.system.limit(Side::Plus, lambda),
                    self.system.k,
                    SpectralEnd::SmallestReal,
                )?;
                let fm = invariant_subspace_basis(
                    &self.system.limit(Side::Minus, lambda),
                    self.system.unstable_rank(),
                    SpectralEnd::LargestReal,
                )?;
                (fp, fm)
            }
            Some(prev) => (
                second_order_step(&prev.pi_plus, &pi_plus, &prev.frame_plus),
                second_order_step(&prev.pi_minus, &pi_minus, &prev.frame_minus),
            ),
        };
        Ok(CursorNode {
            t,
            lambda,
            pi_plus,
            pi_minus,
            frame_plus,
            frame_minus,
        })
    }

    fn position(&self, t: T) -> std::result::Result<usize, usize> {
        self.nodes
            .binary_search_by(|node| node.t.partial_cmp(&t).unwrap())
    }

    /// Extend the continued bases onto new parameters (each new node steps
    /// from its nearest existing left neighbour).
    pub fn ensure(&mut self, ts: &[T]) -> Result<()> {
        let mut sorted = ts.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for t in sorted {
            match self.position(t) {
                Ok(_) => {}
                Err(idx) => {
                    if idx == 0 {
                        return Err(EvansError::Usage(
                            "cannot extend the eigenbasis before the base point".into(),
                        ));
                    }
                    let prev = self.nodes[idx - 1].clone();
                    let node = self.fresh_node(t, Some(&prev))?;
                    self.nodes.insert(idx, node);
                }
            }
        }
        Ok(())
    }

    /// Evaluate D at an already-prepared parameter.
    pub fn eval(&self, t: T) -> Result<EvansSample<T>> {
        let idx = self.position(t).map_err(|_| {
            EvansError::Usage(format!(
                "parameter {} has no continued eigenbasis",
                t.to_f64().unwrap_or(f64::NAN)
            ))
        })?;
        let node = &self.nodes[idx];
        self.eval_node(node)
    }

    fn eval_node(&self, node: &CursorNode<T>) -> Result<EvansSample<T>> {
        let lambda = node.lambda;
        let sign_split_consistent = self
            .system
            .consistent_splitting_at(lambda)
            .unwrap_or(false);
        let m = self.config.truncation();
        let (value, steps, rejected, stiefel): (Cx<T>, usize, usize, Option<T>) =
            match self.config.method {
                Method::ExteriorShooting => {
                    let (wp, wm) = init_exterior(&node.frame_plus, &node.frame_minus)?;
                    let (zp, sp) =
                        shoot_exterior(self.system, lambda, Side::Plus, &wp, &self.config.shoot_mesh)?;
                    let (zm, sm) =
                        shoot_exterior(self.system, lambda, Side::Minus, &wm, &self.config.shoot_mesh)?;
                    let d = evans_from_exterior(&zp.z, &zm.z)?;
                    (d, sp.accepted + sm.accepted, sp.rejected + sm.rejected, None)
                }
                Method::PolarShooting(variant) => {
                    let (ip, im) = self.polar_inits(node)?;
                    let (pp, sp) = shoot_polar(
                        self.system,
                        lambda,
                        Side::Plus,
                        &ip,
                        &self.config.shoot_mesh,
                        variant,
                        None,
                    )?;
                    let (pm, sm) = shoot_polar(
                        self.system,
                        lambda,
                        Side::Minus,
                        &im,
                        &self.config.shoot_mesh,
                        variant,
                        None,
                    )?;
                    let d = evans_from_polar(&pp, &pm)?;
                    let worst = match (sp.max_stiefel_error, sm.max_stiefel_error) {
                        (Some(a), Some(b)) => Some(a.max(b)),
                        (a, b) => a.or(b),
                    };
                    (d, sp.accepted + sm.accepted, sp.rejected + sm.rejected, worst)
                }
                Method::PolarBvp => {
                    let (ip, im) = self.polar_inits(node)?;
                    let (pp, rp) = solve_polar_bvp(
                        self.system,
                        lambda,
                        Side::Plus,
                        &ip,
                        &self.config.bvp_mesh,
                        &self.config.schedule,
                    )?;
                    let (pm, rm) = solve_polar_bvp(
                        self.system,
                        lambda,
                        Side::Minus,
                        &im,
                        &self.config.bvp_mesh,
                        &self.config.schedule,
                    )?;
                    let d = evans_from_polar(&pp, &pm)?;
                    let iters: usize = rp
                        .homotopy
                        .stages
                        .iter()
                        .chain(rm.homotopy.stages.iter())
                        .map(|(_, i)| *i)
                        .sum();
                    (
                        d,
                        iters,
                        0,
                        Some(rp.max_stiefel_error.max(rm.max_stiefel_error)),
                    )
                }
                Method::Conjugation => {
                    let (pp, _) = solve_conjugator(
                        self.system,
                        lambda,
                        Side::Plus,
                        &self.config.bvp_mesh,
                        &self.config.schedule,
                    )?;
                    let (pm, _) = solve_conjugator(
                        self.system,
                        lambda,
                        Side::Minus,
                        &self.config.bvp_mesh,
                        &self.config.schedule,
                    )?;
                    // The solved transformation maps solutions of the full
                    // problem onto limit-system solutions; the frame of
                    // decaying solutions at x = 0 is its inverse applied to
                    // the continued eigenbasis.
                    let d = evans_from_conjugators(
                        &pp.at_zero().inverse()?,
                        &pm.at_zero().inverse()?,
                        &node.frame_plus,
                        &node.frame_minus,
                    )?;
                    (d, pp.nodes.len() + pm.nodes.len(), 0, None)
                }
            };
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(EvansError::Numerical(format!(
                "Evans value not finite at lambda = {}",
                lambda
            )));
        }
        Ok(EvansSample {
            t: node.t,
            lambda,
            value,
            method: self.config.method,
            diagnostics: SampleDiagnostics {
                truncation: m,
                steps,
                rejected,
                max_stiefel_error: stiefel,
                sign_split_consistent,
            },
        })
    }

    fn polar_inits(&self, node: &CursorNode<T>) -> Result<(PolarState<T>, PolarState<T>)> {
        let omega_plus = invariant_subspace_basis(
            &self.system.limit(Side::Plus, node.lambda),
            self.system.k,
            SpectralEnd::SmallestReal,
        )?;
        let omega_minus = invariant_subspace_basis(
            &self.system.limit(Side::Minus, node.lambda),
            self.system.unstable_rank(),
            SpectralEnd::LargestReal,
        )?;
        Ok((
            init_polar(&node.frame_plus, &omega_plus)?,
            init_polar(&node.frame_minus, &omega_minus)?,
        ))
    }

    /// Parameters with prepared eigenbases, in contour order.
    pub fn prepared_params(&self) -> Vec<T> {
        self.nodes.iter().map(|n| n.t).collect()
    }

    /// Evaluate many parameters concurrently (frames must be prepared).
    pub fn eval_batch(&self, ts: &[T]) -> Vec<Result<EvansSample<T>>> {
        ts.par_iter().map(|&t| self.eval(t)).collect()
    }
}

/// Sample D at every contour node; failures become gap markers.
pub fn sample_contour<T: Scalar>(
    system: &EvansSystem<T>,
    contour: &Contour<T>,
    config: MethodConfig<T>,
) -> Result<Vec<SampleOutcome<T>>> {
    let sampler = ContourSampler::new(system, contour, config)?;
    let params: Vec<T> = if contour.is_closed() {
        let p = contour.params();
        p[..p.len() - 1].to_vec()
    } else {
        contour.params().to_vec()
    };
    let prepared = sampler.prepared_params();
    let results = sampler.eval_batch(&prepared);
    let mut by_param: std::collections::BTreeMap<u64, SampleOutcome<T>> = Default::default();
    let key = |t: T| t.to_f64().unwrap().to_bits();
    for (t, res) in prepared.iter().zip(results) {
        let outcome = match res {
            Ok(s) => SampleOutcome::Ok(s),
            Err(e) => SampleOutcome::Failed {
                t: *t,
                lambda: contour.at(*t),
                error: e.to_string(),
            },
        };
        by_param.insert(key(*t), outcome);
    }
    Ok(params
        .iter()
        .map(|&t| {
            by_param.remove(&key(t)).unwrap_or(SampleOutcome::Failed {
                t,
                lambda: contour.at(t),
                error: "eigenbasis continuation skipped this node".into(),
            })
        })
        .collect())
}

/// Step-control options for winding computations.
#[derive(Debug, Clone)]
pub struct WindingOpts<T> {
    /// Maximum allowed relative change between consecutive samples.
    pub max_rel_step: T,
    /// Total sample budget per contour.
    pub budget: usize,
    /// |D| below this times the largest sample magnitude aborts the run.
    pub zero_floor: T,
}

impl<T: Scalar> Default for WindingOpts<T> {
    fn default() -> Self {
        Self {
            max_rel_step: real(0.1),
            budget: 1 << 12,
            zero_floor: real(1e-13),
        }
    }
}

/// Evans samples along a closed contour with the resulting winding number.
#[derive(Debug, Clone)]
pub struct WindingResult<T> {
    pub samples: Vec<EvansSample<T>>,
    pub winding: i64,
    pub max_rel_step: T,
    /// Sample count after the initial pass and after each refinement pass.
    pub refinement_history: Vec<usize>,
}

/// Anything that can evaluate D over contour parameters, batch-wise.
pub trait BatchSampler<T: Scalar> {
    /// Make the listed parameters evaluable (e.g. extend continued bases).
    fn prepare(&mut self, ts: &[T]) -> Result<()>;
    fn eval_batch(&self, ts: &[T]) -> Vec<Result<EvansSample<T>>>;
}

impl<'a, T: Scalar> BatchSampler<T> for ContourSampler<'a, T> {
    fn prepare(&mut self, ts: &[T]) -> Result<()> {
        self.ensure(ts)
    }

    fn eval_batch(&self, ts: &[T]) -> Vec<Result<EvansSample<T>>> {
        ContourSampler::eval_batch(self, ts)
    }
}

/// Adapter for closed-form functions of lambda (step-control tests and
/// synthetic winding checks).
pub struct FunctionSampler<'a, T: Scalar> {
    pub contour: &'a Contour<T>,
    pub f: Box<dyn Fn(Cx<T>) -> Cx<T> + Sync + 'a>,
}

impl<'a, T: Scalar> BatchSampler<T> for FunctionSampler<'a, T> {
    fn prepare(&mut self, _ts: &[T]) -> Result<()> {
        Ok(())
    }

    fn eval_batch(&self, ts: &[T]) -> Vec<Result<EvansSample<T>>> {
        ts.iter()
            .map(|&t| {
                let lambda = self.contour.at(t);
                let value = (self.f)(lambda);
                Ok(EvansSample {
                    t,
                    lambda,
                    value,
                    method: Method::ExteriorShooting,
                    diagnostics: SampleDiagnostics {
                        truncation: T::zero(),
                        steps: 0,
                        rejected: 0,
                        max_stiefel_error: None,
                        sign_split_consistent: true,
                    },
                })
            })
            .collect()
    }
}

fn rel_step<T: Scalar>(a: &Cx<T>, b: &Cx<T>) -> T {
    let denom = a.norm().min(b.norm());
    if denom.is_zero() {
        T::infinity()
    } else {
        (*b - *a).norm() / denom
    }
}

/// Winding number of the sampled function around a closed contour, with
/// adaptive bisection until every consecutive pair of samples satisfies the
/// relative-step rule.
pub fn winding_with_sampler<T: Scalar>(
    sampler: &mut dyn BatchSampler<T>,
    contour: &Contour<T>,
    opts: &WindingOpts<T>,
) -> Result<WindingResult<T>> {
    if !contour.is_closed() {
        return Err(EvansError::Usage(
            "winding numbers need a closed contour".into(),
        ));
    }
    let p = contour.params();
    let ts: Vec<T> = p[..p.len() - 1].to_vec();
    sampler.prepare(&ts)?;
    let mut samples: Vec<EvansSample<T>> = sampler
        .eval_batch(&ts)
        .into_iter()
        .collect::<Result<_>>()?;
    let mut history = vec![samples.len()];

    loop {
        // zero screen
        let max_mag = samples
            .iter()
            .fold(T::zero(), |a, s| a.max(s.value.norm()));
        for s in &samples {
            if s.value.norm() <= opts.zero_floor * max_mag {
                return Err(EvansError::NearZeroOnContour {
                    lambda: format!("{}", s.lambda),
                    magnitude: s.value.norm().to_f64().unwrap_or(f64::NAN),
                    threshold: (opts.zero_floor * max_mag).to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        // find violating segments (cyclic)
        let mut new_ts: Vec<T> = Vec::new();
        let mut worst = (T::zero(), T::zero(), T::zero()); // (rel, t_left, t_right)
        for i in 0..samples.len() {
            let a = &samples[i];
            let wrap = i + 1 == samples.len();
            let b = if wrap { &samples[0] } else { &samples[i + 1] };
            let r = rel_step(&a.value, &b.value);
            let t_right = if wrap { T::one() } else { b.t };
            if r > worst.0 {
                worst = (r, a.t, t_right);
            }
            if r > opts.max_rel_step {
                new_ts.push((a.t + t_right) * real::<T>(0.5));
            }
        }
        if new_ts.is_empty() {
            break;
        }
        if samples.len() + new_ts.len() > opts.budget {
            return Err(EvansError::RefinementBudget {
                budget: opts.budget,
                t_left: worst.1.to_f64().unwrap_or(f64::NAN),
                t_right: worst.2.to_f64().unwrap_or(f64::NAN),
                rel_step: worst.0.to_f64().unwrap_or(f64::NAN),
            });
        }
        sampler.prepare(&new_ts)?;
        let fresh = sampler.eval_batch(&new_ts);
        for res in fresh {
            samples.push(res?);
        }
        samples.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
        history.push(samples.len());
    }

    // phase increments from consecutive ratios; each is well inside
    // (-pi, pi) once the step rule holds
    let mut total_phase = T::zero();
    let mut max_rel = T::zero();
    for i in 0..samples.len() {
        let a = &samples[i];
        let b = if i + 1 == samples.len() {
            &samples[0]
        } else {
            &samples[i + 1]
        };
        max_rel = max_rel.max(rel_step(&a.value, &b.value));
        let ratio = b.value / a.value;
        total_phase = total_phase + ratio.arg();
    }
    let two_pi = T::PI() + T::PI();
    let raw = total_phase / two_pi;
    let winding = raw.round();
    if (raw - winding).abs() > real::<T>(0.25) {
        return Err(EvansError::Numerical(format!(
            "winding sum {:?} is not near an integer; refinement too coarse",
            raw.to_f64()
        )));
    }
    Ok(WindingResult {
        samples,
        winding: winding.to_f64().map(|w| w as i64).unwrap_or(0),
        max_rel_step: max_rel,
        refinement_history: history,
    })
}

/// Winding number of D for a problem/method over a closed contour.
pub fn winding_number<T: Scalar>(
    system: &EvansSystem<T>,
    contour: &Contour<T>,
    config: MethodConfig<T>,
    opts: &WindingOpts<T>,
) -> Result<WindingResult<T>> {
    let mut sampler = ContourSampler::new(system, contour, config)?;
    winding_with_sampler(&mut sampler, contour, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::constant_coefficient;
    use crate::scalar::cx;
    use rand::{Rng, SeedableRng};

    type M = ComplexMatrix<f64>;

    fn unit_wedge(n: usize, cols: &[usize]) -> WedgeVector<f64> {
        let m = M::from_fn(n, cols.len(), |i, j| {
            if i == cols[j] {
                cx(1.0, 0.0)
            } else {
                cx(0.0, 0.0)
            }
        });
        crate::exterior::wedge_columns(&m).unwrap()
    }

    #[test]
    fn exterior_assembly_examples() {
        let wp = unit_wedge(2, &[0]);
        let wm = unit_wedge(2, &[1]);
        assert!((evans_from_exterior(&wp, &wm).unwrap() - cx(1.0, 0.0)).norm() < 1e-14);
        let wm_same = unit_wedge(2, &[0]);
        assert!(evans_from_exterior(&wp, &wm_same).unwrap().norm() < 1e-14);
    }

    #[test]
    fn polar_assembly_matches_exterior_identity() {
        // gamma_+ gamma_- det(O+, O-) equals the top coordinate of the
        // represented wedges, on random inputs
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 4;
            let k = 2;
            let rand_mat = |rng: &mut rand_chacha::ChaCha8Rng, r: usize, c: usize| {
                M::from_fn(r, c, |_, _| {
                    cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            };
            let op = rand_mat(&mut rng, n, k);
            let om = rand_mat(&mut rng, n, n - k);
            let gp = cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let gm = cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let plus = PolarState {
                omega: op.clone(),
                log_gamma: gp,
            };
            let minus = PolarState {
                omega: om.clone(),
                log_gamma: gm,
            };
            let direct = evans_from_polar(&plus, &minus).unwrap();
            let wp = crate::exterior::wedge_columns(&op).unwrap().scale(gp.exp());
            let wm = crate::exterior::wedge_columns(&om).unwrap().scale(gm.exp());
            let via_wedge = evans_from_exterior(&wp, &wm).unwrap();
            assert!(
                (direct - via_wedge).norm() <= 1e-10 * direct.norm().max(1.0),
                "{} vs {}",
                direct,
                via_wedge
            );
        }
    }

    #[test]
    fn conjugator_assembly_with_identity_conjugators() {
        let rp = M::from_real_rows(&[&[1.0], &[0.0]]);
        let rm = M::from_real_rows(&[&[0.0], &[1.0]]);
        let id = M::identity(2);
        let d = evans_from_conjugators(&id, &id, &rp, &rm).unwrap();
        assert!((d - cx(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn constant_coefficient_sampling_is_constant() {
        let sys = constant_coefficient(M::from_real_rows(&[&[-1.0, 0.0], &[0.0, 1.0]]), 1).unwrap();
        let contour = Contour::circle(cx(5.0, 0.0), 1.0, 8).unwrap();
        let config = MethodConfig::new(Method::ExteriorShooting, 10.0);
        let outcomes = sample_contour(&sys, &contour, config).unwrap();
        let values: Vec<Cx<f64>> = outcomes
            .iter()
            .map(|o| match o {
                SampleOutcome::Ok(s) => s.value,
                SampleOutcome::Failed { error, .. } => panic!("failed: {}", error),
            })
            .collect();
        for v in &values {
            assert!((v - values[0]).norm() < 1e-10);
        }
        // D = det(e1 | e2) = 1 up to the Schur basis phase
        assert!((values[0].norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn synthetic_winding_examples() {
        let contour = Contour::circle(cx(0.0, 0.0), 1.0, 16).unwrap();
        let opts = WindingOpts::default();
        // D = lambda: winding 1
        let mut s1 = FunctionSampler {
            contour: &contour,
            f: Box::new(|l| l),
        };
        let r1 = winding_with_sampler(&mut s1, &contour, &opts).unwrap();
        assert_eq!(r1.winding, 1);
        assert!(r1.max_rel_step <= 0.1 + 1e-12);
        // D = (lambda - 0.3)^2 (lambda + 2): two roots inside
        let mut s2 = FunctionSampler {
            contour: &contour,
            f: Box::new(|l| {
                let a = l - cx(0.3, 0.0);
                a * a * (l + cx(2.0, 0.0))
            }),
        };
        let r2 = winding_with_sampler(&mut s2, &contour, &opts).unwrap();
        assert_eq!(r2.winding, 2);
        // constant function: winding 0, no refinement needed
        let mut s3 = FunctionSampler {
            contour: &contour,
            f: Box::new(|_| cx(1.0, 0.0)),
        };
        let r3 = winding_with_sampler(&mut s3, &contour, &opts).unwrap();
        assert_eq!(r3.winding, 0);
        assert_eq!(r3.refinement_history.len(), 1);
    }

    #[test]
    fn winding_detects_zero_on_contour() {
        let contour = Contour::circle(cx(0.0, 0.0), 1.0, 8).unwrap();
        let opts = WindingOpts::default();
        // vanishes at lambda = 1, which is a contour node
        let mut s = FunctionSampler {
            contour: &contour,
            f: Box::new(|l| l - cx(1.0, 0.0)),
        };
        match winding_with_sampler(&mut s, &contour, &opts) {
            Err(EvansError::NearZeroOnContour { .. }) => {}
            other => panic!("expected near-zero error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn refinement_budget_is_enforced() {
        let contour = Contour::circle(cx(0.0, 0.0), 1.0, 8).unwrap();
        let opts = WindingOpts {
            budget: 16,
            ..WindingOpts::default()
        };
        // high-order zero far exceeds what 16 samples can resolve
        let mut s = FunctionSampler {
            contour: &contour,
            f: Box::new(|l| l.powi(37)),
        };
        match winding_with_sampler(&mut s, &contour, &opts) {
            Err(EvansError::RefinementBudget { .. }) => {}
            other => panic!("expected budget error, got {:?}", other.map(|_| ())),
        }
    }
}
