//! Named experiments reproducing the toolkit's quantitative claims:
//! truncation-length convergence rates, orthonormality-error dynamics of
//! continuous orthogonalization, adaptive step-count scaling, continuation
//! scheme orders, and cross-method agreement.

use anyhow::{anyhow, bail, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::Serialize;

use evans_core::evans::{sample_contour, EvansSample, Method, MethodConfig, SampleOutcome};
use evans_core::exterior::{MultiIndexBasis, WedgeVector};
use evans_core::fitting::linear_fit;
use evans_core::kato::{
    continue_first_order, continue_second_order, kato_path, loop_closure_error, projector_path,
    Contour, KatoScheme,
};
use evans_core::linalg::sylvester_spectrum;
use evans_core::problems::{convected_heat, ScalarTestbed};
use evans_core::shooting::ode::{integrate_adaptive, AdaptiveOpts};
use evans_core::shooting::{
    default_truncation, polar_flow_between, shoot_exterior, MeshSpec, PolarState, PolarVariant,
    Scheme, StepMode, TrajectoryPoint,
};
use evans_core::{C64, Matrix64, Side, System64};

/// Abscissa/error table with a least-squares rate fit. The residual of the
/// fit is always reported alongside the rate.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub abscissae: Vec<f64>,
    pub errors: Vec<f64>,
    pub fitted_rate: f64,
    pub fit_residual: f64,
    /// Set when the data sits at the floating-point floor and the fit is
    /// meaningless.
    pub degenerate: bool,
}

fn fit_rate(abscissae: &[f64], errors: &[f64], floor: f64) -> (f64, f64, bool) {
    let usable: Vec<(f64, f64)> = abscissae
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > floor)
        .map(|(&a, &e)| (a, e.ln()))
        .collect();
    if usable.len() < 3 {
        return (f64::NAN, f64::NAN, true);
    }
    let xs: Vec<f64> = usable.iter().map(|(a, _)| *a).collect();
    let ys: Vec<f64> = usable.iter().map(|(_, l)| *l).collect();
    let (slope, _icpt, resid) = linear_fit(&xs, &ys);
    (-slope, resid, false)
}

/// Truncation-length convergence of the centered exterior shot on the scalar
/// testbed, against the closed-form infinite-interval value exp(-b/theta).
/// The spatial mesh tolerance is pushed two orders below the smallest
/// expected truncation error so the fit sees only the boundary effect.
pub fn converge_in_m(tb: &ScalarTestbed<f64>, m_list: &[f64]) -> Result<ConvergenceReport> {
    if m_list.len() < 2 {
        bail!("converge-m needs at least two truncation lengths");
    }
    let sys = tb.system();
    let basis = std::sync::Arc::new(MultiIndexBasis::new(1, 1)?);
    let init = WedgeVector::new(basis, vec![C64::new(1.0, 0.0)])?;
    let reference = (-tb.b / tb.theta).exp();
    let m_max = m_list.iter().cloned().fold(0.0, f64::max);
    let smallest_expected =
        (tb.b / tb.theta).abs().max(1e-6) * (-tb.theta * m_max).exp() * reference.abs();
    let tol = (1e-2 * smallest_expected).clamp(1e-14, 1e-10);
    let mut errors = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let mesh = MeshSpec {
            truncation: m,
            mode: StepMode::Adaptive {
                abs_tol: tol,
                rel_tol: tol,
                h_min: 1e-14 * m.max(1.0),
                h_max: None,
            },
            scheme: Scheme::Erk4Embedded,
        };
        let (out, _) = shoot_exterior(&sys, C64::new(0.0, 0.0), Side::Plus, &init, &mesh)?;
        errors.push((out.z.coords()[0].re - reference).abs());
    }
    let (rate, resid, degenerate) = fit_rate(m_list, &errors, 1e-14 * reference.abs());
    Ok(ConvergenceReport {
        abscissae: m_list.to_vec(),
        errors,
        fitted_rate: rate,
        fit_residual: resid,
        degenerate,
    })
}

/// One leg of the orthogonalization stability experiment.
#[derive(Debug, Clone, Serialize)]
pub struct StiefelLeg {
    pub label: String,
    /// Fitted slope of log |E| against distance travelled.
    pub slope: f64,
    pub fit_residual: f64,
    #[serde(skip)]
    pub trajectory: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StiefelReport {
    /// Smallest real part of the orthonormality-error spectrum; the
    /// theoretical decay/growth rate.
    pub predicted_rate: f64,
    pub backward: StiefelLeg,
    pub forward: StiefelLeg,
    pub davey: StiefelLeg,
}

fn stiefel_samples(points: &[TrajectoryPoint<f64>], n: usize, r: usize) -> Vec<(f64, f64)> {
    let _ = (n, r);
    points
        .iter()
        .map(|p| (p.x, p.stiefel_error.unwrap_or(f64::NAN)))
        .collect()
}

fn fit_window(samples: &[(f64, f64)], map_x: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, e)| *e > 1e-14)
        .map(|&(x, e)| (map_x(x), e.ln()))
        .filter(|(s, _)| *s >= lo && *s <= hi)
        .collect();
    let xs: Vec<f64> = pts.iter().map(|(x, _)| *x).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, y)| *y).collect();
    let (slope, _icpt, resid) = linear_fit(&xs, &ys);
    (slope, resid)
}

/// Orthonormality-error dynamics of the continuous-orthogonalization flow
/// about an invariant-subspace equilibrium.
///
/// The orthonormal frame of the stable subspace is perturbed at x = M by a
/// seeded random Hermitian right factor scaled so |Omega*Omega - I| = eps,
/// then integrated backward to 0 under the Drury flow (error decays at the
/// smallest rate of the error spectrum), forward again from the backward
/// endpoint (error regrows along the same slow mode at the same rate), and
/// backward once more under the Davey flow (error frozen).
pub fn stiefel_experiment(
    system: &System64,
    seed: u64,
    eps: f64,
    h: f64,
    m: f64,
) -> Result<StiefelReport> {
    let n = system.n;
    let k = system.k;
    let a = system.limit(Side::Plus, C64::new(0.0, 0.0));
    let omega0 = evans_core::linalg::invariant_subspace_basis(
        &a,
        k,
        evans_core::linalg::SpectralEnd::SmallestReal,
    )?;
    // error-spectrum prediction from the restricted matrix
    let alpha = omega0.adjoint().matmul(&a.matmul(&omega0));
    let spectrum = sylvester_spectrum(&alpha)?;
    let predicted = spectrum
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);

    // seeded Hermitian perturbation, rescaled so the initial error is eps
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = Matrix64::from_fn(k, k, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let herm = g.add(&g.adjoint()).scale(C64::new(0.5, 0.0));
    let mut c = eps / (2.0 * herm.norm_fro());
    let mut omega = omega0.clone();
    for _ in 0..4 {
        omega = omega0.matmul(
            &Matrix64::identity(k).add(&herm.scale(C64::new(c, 0.0))),
        );
        let e = evans_core::shooting::stiefel_error(&omega);
        if (e - eps).abs() <= 1e-12 {
            break;
        }
        c *= eps / e;
    }
    let init = PolarState {
        omega,
        log_gamma: C64::new(0.0, 0.0),
    };
    let centering = init
        .omega
        .adjoint()
        .matmul(&a.matmul(&init.omega))
        .trace();
    let mesh = MeshSpec::fixed(m, h, Scheme::Erk4Embedded);
    let lambda = C64::new(0.0, 0.0);

    // backward: attracting at the predicted rate
    let mut dump = Vec::new();
    let (end_state, _) = polar_flow_between(
        system,
        lambda,
        m,
        0.0,
        &init,
        centering,
        &mesh,
        PolarVariant::Drury,
        Some(&mut dump),
    )?;
    let backward_samples = stiefel_samples(&dump, n, k);
    // fit log|E| against s = m - x, skipping the initial transient where
    // faster modes still contribute
    let (bslope, bres) = fit_window(&backward_samples, |x| m - x, 2.0, m - 0.5);

    // forward: repelling; replay from the backward endpoint so the slow mode
    // dominates throughout the window
    let mut dump_f = Vec::new();
    let (_, _) = polar_flow_between(
        system,
        lambda,
        0.0,
        m,
        &end_state,
        centering,
        &mesh,
        PolarVariant::Drury,
        Some(&mut dump_f),
    )?;
    let forward_samples = stiefel_samples(&dump_f, n, k);
    let (fslope, fres) = fit_window(&forward_samples, |x| x, 0.5, m - 3.0);

    // Davey: neutral
    let mut dump_d = Vec::new();
    let (_, _) = polar_flow_between(
        system,
        lambda,
        m,
        0.0,
        &init,
        centering,
        &mesh,
        PolarVariant::Davey,
        Some(&mut dump_d),
    )?;
    let davey_samples = stiefel_samples(&dump_d, n, k);
    let (dslope, dres) = fit_window(&davey_samples, |x| m - x, 0.5, m - 0.5);

    Ok(StiefelReport {
        predicted_rate: predicted,
        backward: StiefelLeg {
            label: "backward-drury".into(),
            slope: bslope,
            fit_residual: bres,
            trajectory: backward_samples,
        },
        forward: StiefelLeg {
            label: "forward-drury".into(),
            slope: fslope,
            fit_residual: fres,
            trajectory: forward_samples,
        },
        davey: StiefelLeg {
            label: "backward-davey".into(),
            slope: dslope,
            fit_residual: dres,
            trajectory: davey_samples,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshStudyRow {
    pub a: f64,
    pub steps_uncentered: usize,
    pub steps_centered: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshStudyReport {
    pub rows: Vec<MeshStudyRow>,
    /// Fitted exponent of steps against the decay rate a.
    pub fitted_exponent: f64,
    pub fit_residual: f64,
    pub max_centered_steps: usize,
}

/// Accepted-step counts of the adaptive integrator on w' = -a w under an
/// absolute error-per-unit-step tolerance, for a range of rates a; the
/// centered counterpart (drift removed) runs at the solver floor.
///
/// Each rate integrates over [0, min(M, 25/a)], i.e. until the mode has
/// decayed by 25 e-folds (about 1e-11, far below any tolerance in use).
/// Past that point the exact solution is numerically dead and an explicit
/// integrator is limited by its stability boundary h ~ 3.3/a rather than by
/// accuracy, which would add ~ a M / 3.3 parasitic steps and mask the
/// accuracy-limited count the study measures.
pub fn mesh_count_study(tol: f64, a_list: &[f64], m: f64) -> Result<MeshStudyReport> {
    if a_list.len() < 2 {
        bail!("mesh study needs at least two rates");
    }
    let mut rows = Vec::with_capacity(a_list.len());
    for &a in a_list {
        let interval = m.min(25.0 / a.max(1e-300));
        let opts = AdaptiveOpts::new(tol, 0.0, 1e-13, None);
        let f = move |_x: f64, y: &Vec<C64>| vec![-y[0].scale(a)];
        let (_, stats) =
            integrate_adaptive(f, 0.0, interval, vec![C64::new(1.0, 0.0)], &opts, None)?;
        let centered = |_x: f64, y: &Vec<C64>| vec![y[0] * C64::new(0.0, 0.0)];
        let (_, cstats) =
            integrate_adaptive(centered, 0.0, interval, vec![C64::new(1.0, 0.0)], &opts, None)?;
        rows.push(MeshStudyRow {
            a,
            steps_uncentered: stats.accepted,
            steps_centered: cstats.accepted,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.a.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.steps_uncentered as f64).ln()).collect();
    let (slope, _icpt, resid) = linear_fit(&xs, &ys);
    let max_centered = rows.iter().map(|r| r.steps_centered).max().unwrap_or(0);
    Ok(MeshStudyReport {
        rows,
        fitted_exponent: slope,
        fit_residual: resid,
        max_centered_steps: max_centered,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KatoOrderRow {
    pub nodes: usize,
    pub closure_first: f64,
    pub closure_second: f64,
    pub path_error_first: f64,
    pub path_error_second: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KatoOrderReport {
    pub rows: Vec<KatoOrderRow>,
    /// Orders fitted from the loop-closure errors on a graded-density circle.
    pub closure_order_first: f64,
    pub closure_order_second: f64,
    /// Orders fitted from the endpoint error of an open half-loop against
    /// the closed-form continuation.
    pub path_order_first: f64,
    pub path_order_second: f64,
    pub max_projection_defect: f64,
}

/// Circle discretized with a kinked node density (first half of the nodes on
/// 35% of the circumference). Uniformly sampled analytic contours make every
/// accumulation term of the closure error a closed integral of an analytic
/// function, which vanishes by Cauchy's theorem, so closure converges
/// spectrally there; the kink restores the scheme's generic power law.
pub fn graded_circle(center: C64, radius: f64, nodes: usize) -> Result<Contour<f64>> {
    let p = 0.35;
    let mut pts: Vec<C64> = (0..=nodes)
        .map(|i| {
            let u = i as f64 / nodes as f64;
            let t = if u <= 0.5 {
                2.0 * p * u
            } else {
                p + (u - 0.5) * 2.0 * (1.0 - p)
            };
            let phi = 2.0 * std::f64::consts::PI * t;
            center + C64::new(radius * phi.cos(), radius * phi.sin())
        })
        .collect();
    let first = pts[0];
    *pts.last_mut().unwrap() = first;
    Ok(Contour::polyline(pts)?)
}

/// Closed-form minimal-variation basis of the convected heat problem,
/// continued from `lambda0`:
/// ((eta^2/4 + lambda0) / (eta^2/4 + lambda))^{1/4} (1, eta/2 - sqrt(eta^2/4 + lambda)).
fn convected_heat_exact(eta: f64, lambda0: C64, lambda: C64) -> Matrix64 {
    let q0 = C64::new(eta * eta / 4.0, 0.0) + lambda0;
    let q = C64::new(eta * eta / 4.0, 0.0) + lambda;
    let pre = (q0 / q).powf(0.25);
    let mu = C64::new(eta / 2.0, 0.0) - q.sqrt();
    Matrix64::from_fn(2, 1, |i, _| if i == 0 { pre } else { pre * mu })
}

/// Continuation-scheme convergence study on the convected heat problem:
/// loop-closure errors around a circle and endpoint errors of an open
/// half-loop against the closed form, with step-halving order fits.
pub fn kato_order_study(
    eta: f64,
    center: C64,
    radius: f64,
    j_list: &[usize],
) -> Result<KatoOrderReport> {
    if j_list.len() < 2 {
        bail!("order study needs at least two node counts");
    }
    let sys = convected_heat::<f64>(eta);
    let mut rows = Vec::with_capacity(j_list.len());
    let mut max_defect: f64 = 0.0;
    for &j in j_list {
        let contour = graded_circle(center, radius, j)?;
        let path1 = kato_path(&sys, &contour, Side::Plus, KatoScheme::FirstOrder)?;
        let path2 = kato_path(&sys, &contour, Side::Plus, KatoScheme::SecondOrder)?;
        max_defect = max_defect
            .max(path1.max_projection_defect())
            .max(path2.max_projection_defect());
        let closure_first = loop_closure_error(&path1)?;
        let closure_second = loop_closure_error(&path2)?;

        // open upper half-loop from center+radius to center-radius
        let pts: Vec<C64> = (0..=j)
            .map(|i| {
                let th = std::f64::consts::PI * i as f64 / j as f64;
                center + C64::new(radius * th.cos(), radius * th.sin())
            })
            .collect();
        let half = Contour::polyline(pts)?;
        let lambda0 = half.at(0.0);
        let lambda1 = half.at(1.0);
        let projs = projector_path(&sys, &half, Side::Plus)?;
        let tracked: Vec<Matrix64> = projs.iter().map(|p| p.stable.clone()).collect();
        let r0 = convected_heat_exact(eta, lambda0, lambda0);
        let target = convected_heat_exact(eta, lambda0, lambda1);
        let f1 = continue_first_order(&tracked, &r0)?;
        let f2 = continue_second_order(&tracked, &r0)?;
        let path_error_first =
            f1.last().unwrap().sub(&target).norm_fro() / target.norm_fro();
        let path_error_second =
            f2.last().unwrap().sub(&target).norm_fro() / target.norm_fro();
        rows.push(KatoOrderRow {
            nodes: j,
            closure_first,
            closure_second,
            path_error_first,
            path_error_second,
        });
    }
    let ln_h: Vec<f64> = rows.iter().map(|r| -(r.nodes as f64).ln()).collect();
    let order_of = |pick: &dyn Fn(&KatoOrderRow) -> f64| -> f64 {
        let ys: Vec<f64> = rows.iter().map(|r| pick(r).max(1e-300).ln()).collect();
        let (slope, _icpt, _res) = linear_fit(&ln_h, &ys);
        slope
    };
    Ok(KatoOrderReport {
        closure_order_first: order_of(&|r| r.closure_first),
        closure_order_second: order_of(&|r| r.closure_second),
        path_order_first: order_of(&|r| r.path_error_first),
        path_order_second: order_of(&|r| r.path_error_second),
        rows,
        max_projection_defect: max_defect,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub values: Vec<(String, f64, f64)>,
    pub max_pairwise_rel_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub max_pairwise_rel_diff: f64,
}

/// Evaluate D with several methods at shared contour nodes and report the
/// worst pairwise relative disagreement.
pub fn compare_methods(
    system: &System64,
    contour: &Contour<f64>,
    methods: &[Method],
    truncation: f64,
    configure: impl Fn(Method) -> MethodConfig<f64>,
) -> Result<CompareReport> {
    let mut per_method: Vec<(Method, Vec<EvansSample<f64>>)> = Vec::new();
    for &method in methods {
        let config = configure(method);
        let outcomes = sample_contour(system, contour, config)?;
        let samples: Vec<EvansSample<f64>> = outcomes
            .into_iter()
            .map(|o| match o {
                SampleOutcome::Ok(s) => Ok(s),
                SampleOutcome::Failed { lambda, error, .. } => Err(anyhow!(
                    "method {} failed at lambda = {}: {}",
                    method,
                    lambda,
                    error
                )),
            })
            .collect::<Result<_>>()?;
        per_method.push((method, samples));
    }
    let _ = truncation;
    let node_count = per_method
        .first()
        .map(|(_, s)| s.len())
        .ok_or_else(|| anyhow!("no methods requested"))?;
    let mut rows = Vec::with_capacity(node_count);
    let mut overall: f64 = 0.0;
    for i in 0..node_count {
        let lambda = per_method[0].1[i].lambda;
        let mut values = Vec::new();
        for (method, samples) in &per_method {
            let v = samples[i].value;
            values.push((method.to_string(), v.re, v.im));
        }
        let mut worst: f64 = 0.0;
        for a in 0..values.len() {
            for b in (a + 1)..values.len() {
                let va = C64::new(values[a].1, values[a].2);
                let vb = C64::new(values[b].1, values[b].2);
                let denom = va.norm().max(vb.norm());
                if denom > 0.0 {
                    worst = worst.max((va - vb).norm() / denom);
                }
            }
        }
        overall = overall.max(worst);
        rows.push(CompareRow {
            lambda_re: lambda.re,
            lambda_im: lambda.im,
            values,
            max_pairwise_rel_diff: worst,
        });
    }
    Ok(CompareReport {
        rows,
        max_pairwise_rel_diff: overall,
    })
}

/// Build a method configuration from tolerances and meshes in the run config.
pub fn method_config(
    method: Method,
    system: &System64,
    probe_lambda: C64,
    m: f64,
    abs_tol: f64,
    rel_tol: f64,
    bvp_step: f64,
    homotopy_stages: usize,
) -> MethodConfig<f64> {
    let truncation = if m > 0.0 {
        m
    } else {
        default_truncation(system, probe_lambda, 1e-8)
    };
    let mut config = MethodConfig::new(method, truncation);
    config.shoot_mesh = MeshSpec {
        truncation,
        mode: StepMode::Adaptive {
            abs_tol,
            rel_tol,
            h_min: 1e-10 * truncation,
            h_max: None,
        },
        scheme: Scheme::Erk4Embedded,
    };
    if bvp_step > 0.0 {
        let steps = (truncation / bvp_step).round().max(8.0);
        config.bvp_mesh = MeshSpec {
            truncation,
            mode: StepMode::FixedStep {
                h: truncation / steps,
            },
            scheme: Scheme::Midpoint,
        };
    }
    config.schedule = evans_core::bvp::HomotopySchedule::uniform(homotopy_stages);
    config
}
