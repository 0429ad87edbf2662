//! Enumeration of critical points on a level by deflated Newton multistart,
//! and Morse data from the Hessian spectrum.
//!
//! Deflation multiplies the gradient by
//! `M(v) = Π_i (‖v − v_i‖_W^{-p} + s)` over already-found points `v_i`, which
//! makes each known root repel the iteration. The deflated Newton step is a
//! rescaling of the plain step `δ = −H⁻¹g` by `1 / (1 − δ·∇log M)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galerkin::{CoefficientVector, GalerkinError, LevelSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriticalError {
    #[error(transparent)]
    Galerkin(#[from] GalerkinError),
    #[error("symmetric eigensolver did not converge on the {0}x{0} Hessian")]
    EigenFailure(usize),
    #[error("empty window: need a < b, got a = {0}, b = {1}")]
    Window(f64, f64),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol_grad: f64,
    pub max_newton_iter: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub deflation_power: f64,
    pub deflation_shift: f64,
    /// Minimum W-distance between distinct points.
    pub distinct_tol: f64,
    pub eig_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_grad: 1e-10,
            max_newton_iter: 100,
            n_starts: 50,
            seed: 0,
            deflation_power: 2.0,
            deflation_shift: 1.0,
            distinct_tol: 1e-6,
            eig_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), CriticalError> {
        let positive = [
            ("tol_grad", self.tol_grad),
            ("deflation_power", self.deflation_power),
            ("distinct_tol", self.distinct_tol),
            ("eig_tol", self.eig_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CriticalError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.deflation_shift.is_finite() && self.deflation_shift >= 0.0) {
            return Err(CriticalError::InvalidConfig("deflation_shift must be nonnegative".into()));
        }
        if self.n_starts == 0 {
            return Err(CriticalError::InvalidConfig("n_starts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub coeffs: CoefficientVector,
    pub value: f64,
    pub grad_norm: f64,
    /// Hessian eigenvalues in ascending order.
    pub spectrum: Vec<f64>,
    pub morse_index: usize,
    pub nondegenerate: bool,
    pub min_abs_eig: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorseData {
    pub morse_index: usize,
    pub nondegenerate: bool,
    pub spectrum: Vec<f64>,
    pub min_abs_eig: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NewtonFailure {
    MaxIterations,
    Singular,
    Diverged,
    /// Converged, but onto an already deflated point.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NewtonOutcome {
    Converged { point: CriticalPoint, iterations: usize },
    Failed(NewtonFailure),
}

const DIVERGENCE_NORM: f64 = 1e8;
const TIKHONOV: f64 = 1e-8;
const TIKHONOV_RETRIES: usize = 3;

/// Full symmetric eigendecomposition of the Hessian at `v`.
pub fn morse_data(level: &LevelSpace, v: &CoefficientVector, cfg: &SolverConfig) -> Result<MorseData, CriticalError> {
    let h = level.hessian(v)?;
    spectrum_data(h, cfg.eig_tol)
}

fn spectrum_data(h: DMatrix<f64>, eig_tol: f64) -> Result<MorseData, CriticalError> {
    let n = h.nrows();
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000).ok_or(CriticalError::EigenFailure(n))?;
    let mut spectrum: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    spectrum.sort_by(f64::total_cmp);
    let morse_index = spectrum.iter().filter(|&&l| l < -eig_tol).count();
    let min_abs_eig = spectrum.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
    Ok(MorseData { morse_index, nondegenerate: min_abs_eig > eig_tol, spectrum, min_abs_eig })
}

fn norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `∇ log M(v)` for the deflation operator over `known`.
fn deflation_log_gradient(
    level: &LevelSpace,
    v: &CoefficientVector,
    known: &[CriticalPoint],
    cfg: &SolverConfig,
) -> Vec<f64> {
    let n = v.dim();
    let p = cfg.deflation_power;
    let mut out = vec![0.0; n];
    for k in known {
        let d = level.w_distance(v, &k.coeffs);
        if d == 0.0 {
            continue;
        }
        let dp = d.powf(-p);
        let m = dp + cfg.deflation_shift;
        // ∇(d^-p) = −p d^(-p-2) W (v − v_i)
        let scale = -p * dp / (d * d) / m;
        for (j, o) in out.iter_mut().enumerate() {
            let w = level.frequency(j + 1).powi(2);
            *o += scale * w * (v.coeffs[j] - k.coeffs.coeffs[j]);
        }
    }
    out
}

fn solve_regularized(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = h.amax().max(1.0);
    for attempt in 0..=TIKHONOV_RETRIES {
        let m = if attempt == 0 {
            h.clone()
        } else {
            h + DMatrix::identity(n, n) * (TIKHONOV * scale * 10f64.powi(attempt as i32 - 1))
        };
        if let Some(x) = m.lu().solve(rhs) {
            if x.iter().all(|v| v.is_finite()) {
                if attempt > 0 {
                    log::debug!("Newton system regularized (attempt {attempt})");
                }
                return Some(x);
            }
        }
    }
    None
}

/// Deflated Newton iteration from `start`.
pub fn newton_solve(
    level: &LevelSpace,
    start: &CoefficientVector,
    cfg: &SolverConfig,
    deflated_against: &[CriticalPoint],
) -> Result<NewtonOutcome, CriticalError> {
    if start.dim() != level.dim() {
        return Err(GalerkinError::DimensionMismatch { expected: level.dim(), got: start.dim() }.into());
    }
    let mut v = start.clone();
    for iter in 0..=cfg.max_newton_iter {
        let g = match level.gradient(&v) {
            Ok(g) => g,
            Err(GalerkinError::NonFinite { .. }) => return Ok(NewtonOutcome::Failed(NewtonFailure::Diverged)),
            Err(e) => return Err(e.into()),
        };
        let gn = norm(&g);
        if gn < cfg.tol_grad {
            if deflated_against.iter().any(|k| level.w_distance(&v, &k.coeffs) <= cfg.distinct_tol) {
                return Ok(NewtonOutcome::Failed(NewtonFailure::Duplicate));
            }
            let data = morse_data(level, &v, cfg)?;
            let value = level.energy(&v)?;
            let point = CriticalPoint {
                coeffs: v,
                value,
                grad_norm: gn,
                spectrum: data.spectrum,
                morse_index: data.morse_index,
                nondegenerate: data.nondegenerate,
                min_abs_eig: data.min_abs_eig,
            };
            return Ok(NewtonOutcome::Converged { point, iterations: iter });
        }
        if iter == cfg.max_newton_iter {
            break;
        }
        let h = level.hessian(&v)?;
        let rhs = -DVector::from_vec(g);
        let Some(mut step) = solve_regularized(&h, &rhs) else {
            return Ok(NewtonOutcome::Failed(NewtonFailure::Singular));
        };
        if !deflated_against.is_empty() {
            let dlog = deflation_log_gradient(level, &v, deflated_against, cfg);
            let proj: f64 = dlog.iter().zip(step.iter()).map(|(a, b)| a * b).sum();
            let denom = 1.0 - proj;
            if denom.abs() < f64::EPSILON {
                return Ok(NewtonOutcome::Failed(NewtonFailure::Singular));
            }
            step /= denom;
        }
        for (c, s) in v.coeffs.iter_mut().zip(step.iter()) {
            *c += s;
        }
        if !v.coeffs.iter().all(|c| c.is_finite()) || norm(&v.coeffs) > DIVERGENCE_NORM {
            return Ok(NewtonOutcome::Failed(NewtonFailure::Diverged));
        }
    }
    Ok(NewtonOutcome::Failed(NewtonFailure::MaxIterations))
}

/// Deterministic start vectors: the zero vector, then `n_starts` draws with
/// `c_k ~ N(0, 1) / k`.
pub fn start_vectors(n: usize, cfg: &SolverConfig) -> Vec<CoefficientVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = Vec::with_capacity(cfg.n_starts + 1);
    starts.push(CoefficientVector::zeros(n));
    for _ in 0..cfg.n_starts {
        let coeffs = (1..=n)
            .map(|k| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z / k as f64
            })
            .collect();
        starts.push(CoefficientVector::new(coeffs));
    }
    starts
}

/// Multistart deflated Newton; returns distinct critical points sorted by value.
pub fn deflated_search(level: &LevelSpace, cfg: &SolverConfig) -> Result<Vec<CriticalPoint>, CriticalError> {
    cfg.validate()?;
    let mut found: Vec<CriticalPoint> = Vec::new();
    for (i, start) in start_vectors(level.dim(), cfg).iter().enumerate() {
        match newton_solve(level, start, cfg, &found)? {
            NewtonOutcome::Converged { point, iterations } => {
                // first-found wins; deflation normally prevents this branch
                if let Some(j) =
                    found.iter().position(|k| level.w_distance(&point.coeffs, &k.coeffs) <= cfg.distinct_tol)
                {
                    log::warn!("start {i}: duplicate of point {j} merged");
                    continue;
                }
                log::debug!(
                    "n={} start {i}: J = {:.6}, index {} after {iterations} iterations",
                    level.dim(),
                    point.value,
                    point.morse_index
                );
                found.push(point);
            }
            NewtonOutcome::Failed(reason) => log::trace!("start {i}: {reason:?}"),
        }
    }
    sort_points(&mut found);
    Ok(found)
}

/// Ascending value, ties broken lexicographically on coefficients.
pub fn sort_points(points: &mut [CriticalPoint]) {
    points.sort_by(|a, b| {
        a.value.total_cmp(&b.value).then_with(|| {
            a.coeffs
                .coeffs
                .iter()
                .zip(&b.coeffs.coeffs)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

/// Points with `a < value ≤ b`, order preserved.
pub fn filter_window(points: &[CriticalPoint], a: f64, b: f64) -> Result<Vec<CriticalPoint>, CriticalError> {
    if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
        return Err(CriticalError::Window(a, b));
    }
    Ok(points.iter().filter(|p| a < p.value && p.value <= b).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{build_level, QuadratureSpec};
    use crate::problem::{chafee_infante, ProblemSource};

    fn level(mu: f64, n: usize) -> LevelSpace {
        build_level(&chafee_infante(mu).unwrap().spec, n, QuadratureSpec::default_for(n)).unwrap()
    }

    #[test]
    fn zero_start_is_already_critical() {
        let lvl = level(2.5, 8);
        let out = newton_solve(&lvl, &CoefficientVector::zeros(8), &SolverConfig::default(), &[]).unwrap();
        match out {
            NewtonOutcome::Converged { point, iterations } => {
                assert!(iterations <= 1);
                assert_eq!(point.coeffs, CoefficientVector::zeros(8));
                assert_eq!(point.morse_index, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deflation_excludes_known_point() {
        let lvl = level(2.5, 8);
        let cfg = SolverConfig::default();
        let zero = match newton_solve(&lvl, &CoefficientVector::zeros(8), &cfg, &[]).unwrap() {
            NewtonOutcome::Converged { point, .. } => point,
            other => panic!("{other:?}"),
        };
        match newton_solve(&lvl, &CoefficientVector::zeros(8), &cfg, std::slice::from_ref(&zero)).unwrap() {
            NewtonOutcome::Converged { point, .. } => {
                assert!(lvl.w_distance(&point.coeffs, &zero.coeffs) > cfg.distinct_tol)
            }
            NewtonOutcome::Failed(_) => {}
        }
    }

    #[test]
    fn positive_start_reaches_positive_branch() {
        let lvl = level(2.5, 8);
        let start = CoefficientVector::unit(8, 1).scaled(2.0);
        match newton_solve(&lvl, &start, &SolverConfig::default(), &[]).unwrap() {
            NewtonOutcome::Converged { point, .. } => {
                assert!(point.value < 0.0);
                assert!(point.coeffs.coeffs[0] > 0.0);
                assert_eq!(point.morse_index, 0);
                assert!(point.nondegenerate);
                assert!(point.grad_norm < 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn search_counts() {
        let cfg = SolverConfig::default();
        let pts = deflated_search(&level(2.5, 8), &cfg).unwrap();
        assert_eq!(pts.len(), 3);
        assert!((pts[0].value - pts[1].value).abs() < 1e-12);
        assert_eq!(pts[2].value, 0.0);

        let pts = deflated_search(&level(0.5, 8), &cfg).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].morse_index, 0);
        assert!((pts[0].spectrum[0] - 0.5).abs() < 1e-9);

        let dirichlet = ProblemSource::expression("0.5*p^2").build().unwrap();
        let lvl = build_level(&dirichlet, 8, QuadratureSpec::default_for(8)).unwrap();
        let pts = deflated_search(&lvl, &cfg).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(lvl.w_norm(&pts[0].coeffs) < 1e-12);
    }

    #[test]
    fn morse_indices_at_zero() {
        let cfg = SolverConfig::default();
        let d = morse_data(&level(2.5, 4), &CoefficientVector::zeros(4), &cfg).unwrap();
        assert_eq!(d.morse_index, 1);
        for (l, k) in d.spectrum.iter().zip([1.0f64, 2.0, 3.0, 4.0]) {
            assert!((l - (k * k - 2.5)).abs() < 1e-9);
        }
        let d = morse_data(&level(5.0, 4), &CoefficientVector::zeros(4), &cfg).unwrap();
        assert_eq!(d.morse_index, 2);
        assert!(d.nondegenerate);
        let d = morse_data(&level(1.0, 4), &CoefficientVector::zeros(4), &cfg).unwrap();
        assert!(!d.nondegenerate);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SolverConfig { seed: 7, ..SolverConfig::default() };
        let a = deflated_search(&level(5.0, 8), &cfg).unwrap();
        let b = deflated_search(&level(5.0, 8), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn window_filter() {
        let pts = deflated_search(&level(2.5, 8), &SolverConfig::default()).unwrap();
        let lo = pts[0].value - 1.0;
        assert_eq!(filter_window(&pts, lo, 1.0).unwrap().len(), 3);
        // J(u₁) ≈ -1.2227 at μ = 2.5
        let nontrivial = filter_window(&pts, -2.0, -1e-6).unwrap();
        assert_eq!(nontrivial.len(), 2);
        assert!(nontrivial.iter().all(|p| p.value < 0.0));
        assert!(filter_window(&pts, 5.0, 6.0).unwrap().is_empty());
        assert_eq!(filter_window(&pts, 1.0, 1.0).unwrap_err(), CriticalError::Window(1.0, 1.0));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { n_starts: 0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig { tol_grad: -1.0, ..SolverConfig::default() }.validate().is_err());
    }
}
