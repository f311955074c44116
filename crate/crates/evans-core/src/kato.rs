//! Analytic continuation of eigenbases along lambda-contours.
//!
//! The frame R(lambda) spanning the tracked invariant subspace is continued
//! by discretizing Kato's ODE R' = Pi' R, which characterizes the basis of
//! minimal variation (Pi R' = 0). Two explicit schemes are provided:
//!
//! ```text
//! first order:   R_{j+1} = Pi_{j+1} R_j
//! second order:  R_{j+1} = Pi_{j+1} [I + (1/2) Pi_j (I - Pi_{j+1})] R_j
//! ```
//!
//! Both preserve Pi_j R_j = R_j exactly. Around a closed contour that
//! avoids branch points the continued frame returns to its initial value up
//! to scheme error; around a branch point it does not (monodromy), which is
//! detected by the loop-closure error.

use crate::error::{EvansError, Result};
use crate::exterior::{wedge_columns, WedgeVector};
use crate::linalg::{
    eigenprojections, sval_extremes, ComplexMatrix, ProjectorPair,
};
use crate::problems::EvansSystem;
use crate::scalar::{cx, real, Cx, Scalar};
use crate::shooting::PolarState;
use crate::Side;

/// Continuation scheme order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KatoScheme {
    FirstOrder,
    SecondOrder,
}

/// Underlying curve of a contour; nodes live at parameters in [0, 1].
#[derive(Debug, Clone)]
pub enum ContourGeometry<T> {
    Circle { center: Cx<T>, radius: T },
    Polyline { vertices: Vec<Cx<T>> },
}

/// Discretized contour in the spectral parameter.
#[derive(Debug, Clone)]
pub struct Contour<T> {
    geometry: ContourGeometry<T>,
    /// Node parameters, strictly increasing, starting at 0 and ending at 1.
    ts: Vec<T>,
    closed: bool,
}

impl<T: Scalar> Contour<T> {
    /// Closed circle with `nodes` equal arcs; the stored point list repeats
    /// the first point at the end so that closure is exact by construction.
    pub fn circle(center: Cx<T>, radius: T, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(EvansError::Usage("a contour needs at least 2 nodes".into()));
        }
        if radius <= T::zero() {
            return Err(EvansError::Usage("circle radius must be positive".into()));
        }
        let ts = (0..=nodes)
            .map(|j| T::from_usize(j).unwrap() / T::from_usize(nodes).unwrap())
            .collect();
        Ok(Self {
            geometry: ContourGeometry::Circle { center, radius },
            ts,
            closed: true,
        })
    }

    /// Open or closed polyline through the given vertices; closed when the
    /// first and last vertices coincide exactly. Each vertex is a node.
    pub fn polyline(vertices: Vec<Cx<T>>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(EvansError::Usage("a contour needs at least 2 points".into()));
        }
        for w in vertices.windows(2) {
            if (w[0] - w[1]).norm().is_zero() {
                return Err(EvansError::Usage(
                    "consecutive contour points must be distinct".into(),
                ));
            }
        }
        let closed = vertices.first() == vertices.last();
        let n = vertices.len() - 1;
        let ts = (0..=n)
            .map(|j| T::from_usize(j).unwrap() / T::from_usize(n).unwrap())
            .collect();
        Ok(Self {
            geometry: ContourGeometry::Polyline { vertices },
            ts,
            closed,
        })
    }

    /// Resample to `nodes` uniform parameter intervals, keeping the geometry.
    pub fn with_nodes(&self, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(EvansError::Usage("a contour needs at least 2 nodes".into()));
        }
        let ts = (0..=nodes)
            .map(|j| T::from_usize(j).unwrap() / T::from_usize(nodes).unwrap())
            .collect();
        Ok(Self {
            geometry: self.geometry.clone(),
            ts,
            closed: self.closed,
        })
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn params(&self) -> &[T] {
        &self.ts
    }

    /// Point on the underlying curve at parameter t in [0, 1]. For closed
    /// contours t = 1 returns the stored t = 0 value exactly.
    pub fn at(&self, t: T) -> Cx<T> {
        match &self.geometry {
            ContourGeometry::Circle { center, radius } => {
                if self.closed && (t == T::one() || t.is_zero()) {
                    return *center + Cx::new(*radius, T::zero());
                }
                let two_pi = T::PI() + T::PI();
                let angle = two_pi * t;
                *center + Cx::new(*radius * angle.cos(), *radius * angle.sin())
            }
            ContourGeometry::Polyline { vertices } => {
                let segs = vertices.len() - 1;
                let scaled = t * T::from_usize(segs).unwrap();
                let idx = scaled
                    .floor()
                    .to_usize()
                    .unwrap_or(0)
                    .min(segs - 1);
                let frac = scaled - T::from_usize(idx).unwrap();
                let a = vertices[idx];
                let b = vertices[idx + 1];
                a + (b - a).scale(frac)
            }
        }
    }

    /// Materialized node points; for closed contours the final point is the
    /// same stored value as the first.
    pub fn points(&self) -> Vec<Cx<T>> {
        let mut pts: Vec<Cx<T>> = self.ts.iter().map(|&t| self.at(t)).collect();
        if self.closed {
            let first = pts[0];
            *pts.last_mut().unwrap() = first;
        }
        pts
    }

    /// Smallest distance from any node to any of the given points.
    pub fn min_distance_to(&self, points: &[Cx<T>]) -> T {
        let mut best = T::infinity();
        for p in self.points() {
            for s in points {
                best = best.min((p - *s).norm());
            }
        }
        best
    }
}

/// Refuse contours that come within `radius` of a declared singular point.
pub fn check_exclusion_radius<T: Scalar>(
    contour: &Contour<T>,
    singular_points: &[Cx<T>],
    radius: T,
) -> Result<()> {
    if singular_points.is_empty() {
        return Ok(());
    }
    let d = contour.min_distance_to(singular_points);
    if d < radius {
        return Err(EvansError::Singularity(format!(
            "contour node within {:e} of a declared singular point (exclusion radius {:e})",
            d.to_f64().unwrap_or(f64::NAN),
            radius.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

/// Projector pairs of the relevant limit matrix at every contour node.
///
/// The tracked projector is the stable one of the plus-side limit or the
/// unstable one of the minus-side limit; failures are tagged with the
/// offending lambda, which usually means the contour touches the essential
/// spectrum or a branch point.
pub fn projector_path<T: Scalar>(
    system: &EvansSystem<T>,
    contour: &Contour<T>,
    side: Side,
) -> Result<Vec<ProjectorPair<T>>> {
    let mut out = Vec::with_capacity(contour.params().len());
    for lambda in contour.points() {
        let limit = system.limit(side, lambda);
        let pair = if system.k == system.n {
            // whole-space tracking (scalar problems): trivial projectors
            ProjectorPair {
                stable: ComplexMatrix::identity(system.n),
                unstable: ComplexMatrix::zeros(system.n, system.n),
                stable_rank: system.n,
            }
        } else {
            eigenprojections(&limit, system.k).map_err(|e| {
                EvansError::Split(format!("at lambda = {}: {}", lambda, e))
            })?
        };
        out.push(pair);
    }
    Ok(out)
}

/// The projector actually tracked on a given side.
pub fn tracked_projector<'a, T: Scalar>(pair: &'a ProjectorPair<T>, side: Side) -> &'a ComplexMatrix<T> {
    match side {
        Side::Plus => &pair.stable,
        Side::Minus => &pair.unstable,
    }
}

fn check_start_frame<T: Scalar>(pi0: &ComplexMatrix<T>, r0: &ComplexMatrix<T>) -> Result<()> {
    let residual = pi0.matmul(r0).sub(r0).norm_fro();
    let scale = r0.norm_fro().max(T::min_positive_value());
    if residual > real::<T>(1e-8) * scale {
        return Err(EvansError::Usage(format!(
            "start frame does not lie in the range of the first projector: residual {:e}",
            (residual / scale).to_f64().unwrap_or(f64::NAN)
        )));
    }
    let (smin, smax) = sval_extremes(r0)?;
    if smin < real::<T>(1e-10) * smax {
        return Err(EvansError::Degenerate(
            "start frame is rank deficient".into(),
        ));
    }
    Ok(())
}

fn check_rank<T: Scalar>(r: &ComplexMatrix<T>, node: usize) -> Result<()> {
    let (smin, smax) = sval_extremes(r)?;
    if smax.is_zero() || smin < real::<T>(1e-10) * smax {
        return Err(EvansError::Degenerate(format!(
            "continued frame lost rank at node {} (singular values {:e} .. {:e})",
            node,
            smin.to_f64().unwrap_or(f64::NAN),
            smax.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

/// First-order greedy continuation R_{j+1} = Pi_{j+1} R_j.
pub fn continue_first_order<T: Scalar>(
    projectors: &[ComplexMatrix<T>],
    r0: &ComplexMatrix<T>,
) -> Result<Vec<ComplexMatrix<T>>> {
    if projectors.is_empty() {
        return Err(EvansError::Usage("empty projector path".into()));
    }
    check_start_frame(&projectors[0], r0)?;
    let mut frames = Vec::with_capacity(projectors.len());
    frames.push(r0.clone());
    for j in 1..projectors.len() {
        let next = projectors[j].matmul(frames.last().unwrap());
        check_rank(&next, j)?;
        frames.push(next);
    }
    Ok(frames)
}

/// Reduced second-order continuation
/// R_{j+1} = Pi_{j+1} [I + (1/2) Pi_j (I - Pi_{j+1})] R_j.
pub fn continue_second_order<T: Scalar>(
    projectors: &[ComplexMatrix<T>],
    r0: &ComplexMatrix<T>,
) -> Result<Vec<ComplexMatrix<T>>> {
    if projectors.is_empty() {
        return Err(EvansError::Usage("empty projector path".into()));
    }
    check_start_frame(&projectors[0], r0)?;
    let mut frames = Vec::with_capacity(projectors.len());
    frames.push(r0.clone());
    for j in 1..projectors.len() {
        let next = second_order_step(&projectors[j - 1], &projectors[j], frames.last().unwrap());
        check_rank(&next, j)?;
        frames.push(next);
    }
    Ok(frames)
}

/// Single step of the second-order scheme; also used to extend a path onto
/// refined contour nodes.
pub fn second_order_step<T: Scalar>(
    pi_from: &ComplexMatrix<T>,
    pi_to: &ComplexMatrix<T>,
    r: &ComplexMatrix<T>,
) -> ComplexMatrix<T> {
    let n = pi_to.rows();
    let half = cx::<T>(0.5, 0.0);
    let id = ComplexMatrix::identity(n);
    let inner = id.add(&pi_from.matmul(&id.sub(pi_to)).scale(half));
    pi_to.matmul(&inner.matmul(r))
}

/// Analytically continued eigenbasis along one side of a contour.
#[derive(Debug, Clone)]
pub struct KatoPath<T> {
    pub side: Side,
    pub points: Vec<Cx<T>>,
    pub projectors: Vec<ProjectorPair<T>>,
    pub frames: Vec<ComplexMatrix<T>>,
    pub closed: bool,
}

impl<T: Scalar> KatoPath<T> {
    /// Largest relative defect of the scheme-preserved identity
    /// Pi_j R_j = R_j over all nodes.
    pub fn max_projection_defect(&self) -> T {
        let mut worst = T::zero();
        for (pair, frame) in self.projectors.iter().zip(&self.frames) {
            let pi = tracked_projector(pair, self.side);
            let defect = pi.matmul(frame).sub(frame).norm_fro()
                / frame.norm_fro().max(T::min_positive_value());
            worst = worst.max(defect);
        }
        worst
    }
}

/// Build a continued eigenbasis along the contour, starting from the
/// orthonormal Schur basis of the tracked subspace at the first node.
pub fn kato_path<T: Scalar>(
    system: &EvansSystem<T>,
    contour: &Contour<T>,
    side: Side,
    scheme: KatoScheme,
) -> Result<KatoPath<T>> {
    let projectors = projector_path(system, contour, side)?;
    let rank = match side {
        Side::Plus => system.k,
        Side::Minus => system.unstable_rank(),
    };
    let points = contour.points();
    let limit0 = system.limit(side, points[0]);
    let r0 = if rank == system.n {
        ComplexMatrix::identity(system.n)
    } else {
        crate::linalg::invariant_subspace_basis(
            &limit0,
            rank,
            match side {
                Side::Plus => crate::linalg::SpectralEnd::SmallestReal,
                Side::Minus => crate::linalg::SpectralEnd::LargestReal,
            },
        )?
    };
    let tracked: Vec<ComplexMatrix<T>> = projectors
        .iter()
        .map(|p| tracked_projector(p, side).clone())
        .collect();
    let frames = match scheme {
        KatoScheme::FirstOrder => continue_first_order(&tracked, &r0)?,
        KatoScheme::SecondOrder => continue_second_order(&tracked, &r0)?,
    };
    Ok(KatoPath {
        side,
        points,
        projectors,
        frames,
        closed: contour.is_closed(),
    })
}

/// Relative distance between the final and initial frames of a closed path.
pub fn loop_closure_error<T: Scalar>(path: &KatoPath<T>) -> Result<T> {
    if !path.closed {
        return Err(EvansError::Usage(
            "loop closure error is defined for closed contours only".into(),
        ));
    }
    let first = path.frames.first().ok_or_else(|| {
        EvansError::Usage("empty path".into())
    })?;
    let last = path.frames.last().unwrap();
    Ok(last.sub(first).norm_fro() / first.norm_fro().max(T::min_positive_value()))
}

/// Rescale frames by (eta^2 + 4 lambda_j)^{1/4} (principal branch), trading
/// the fourth-root blowup of the minimal-variation basis near the square-root
/// branch point lambda = -eta^2/4 for a family that stays bounded across the
/// characteristic value eta = 0.
pub fn branch_rescale<T: Scalar>(
    frames: &[ComplexMatrix<T>],
    eta: T,
    points: &[Cx<T>],
) -> Result<Vec<ComplexMatrix<T>>> {
    if frames.len() != points.len() {
        return Err(EvansError::Dimension(format!(
            "{} frames vs {} contour points",
            frames.len(),
            points.len()
        )));
    }
    let four = real::<T>(4.0);
    let quarter = real::<T>(0.25);
    let mut out = Vec::with_capacity(frames.len());
    for (frame, &lambda) in frames.iter().zip(points) {
        let arg = Cx::new(eta * eta, T::zero()) + lambda.scale(four);
        if arg.norm().is_zero() {
            return Err(EvansError::Singularity(format!(
                "branch rescale evaluated exactly at the branch point lambda = {}",
                lambda
            )));
        }
        out.push(frame.scale(arg.powf(quarter)));
    }
    Ok(out)
}

/// Initializing wedges for the exterior method: the wedge of the plus-side
/// frame columns and of the minus-side frame columns.
pub fn init_exterior<T: Scalar>(
    frame_plus: &ComplexMatrix<T>,
    frame_minus: &ComplexMatrix<T>,
) -> Result<(WedgeVector<T>, WedgeVector<T>)> {
    for (name, frame) in [("plus", frame_plus), ("minus", frame_minus)] {
        let (smin, smax) = sval_extremes(frame)?;
        if smax.is_zero() || smin < real::<T>(1e-10) * smax {
            return Err(EvansError::Degenerate(format!(
                "{}-side frame is rank deficient",
                name
            )));
        }
    }
    Ok((wedge_columns(frame_plus)?, wedge_columns(frame_minus)?))
}

/// Polar initialization: keep the orthonormal frame Omega and store the
/// determinant of its change of basis to the analytic frame in the radial
/// coordinate, gamma = det(Omega* R). The represented wedge then equals the
/// analytic frame's wedge, so it stays analytic in lambda even though Omega
/// and gamma individually are not.
pub fn init_polar<T: Scalar>(
    frame: &ComplexMatrix<T>,
    omega: &ComplexMatrix<T>,
) -> Result<PolarState<T>> {
    if frame.rows() != omega.rows() || frame.cols() != omega.cols() {
        return Err(EvansError::Dimension(format!(
            "frame is {}x{}, orthonormal basis is {}x{}",
            frame.rows(),
            frame.cols(),
            omega.rows(),
            omega.cols()
        )));
    }
    let ortho = crate::shooting::stiefel_error(omega);
    if ortho > real::<T>(1e-8) {
        return Err(EvansError::Usage(format!(
            "polar basis is not orthonormal: |Omega*Omega - I| = {:e}",
            ortho.to_f64().unwrap_or(f64::NAN)
        )));
    }
    // span check: (I - Omega Omega*) frame must vanish
    let n = frame.rows();
    let proj = ComplexMatrix::identity(n).sub(&omega.matmul(&omega.adjoint()));
    let mismatch = proj.matmul(frame).norm_fro();
    if mismatch > real::<T>(1e-8) * frame.norm_fro().max(T::min_positive_value()) {
        return Err(EvansError::Subspace(format!(
            "frame and orthonormal basis span different subspaces: defect {:e}",
            (mismatch / frame.norm_fro()).to_f64().unwrap_or(f64::NAN)
        )));
    }
    let gamma = omega.adjoint().matmul(frame).det()?;
    if gamma.norm().is_zero() {
        return Err(EvansError::Degenerate(
            "change-of-basis determinant vanished in polar initialization".into(),
        ));
    }
    Ok(PolarState {
        omega: omega.clone(),
        log_gamma: gamma.ln(),
    })
}
