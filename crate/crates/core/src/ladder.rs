//! Runs the level pipeline over an increasing chain of dimensions, tracks
//! critical points across levels, and decides when counts, indices and the
//! Morse polynomial have settled.
//!
//! A value is claimed as the limit only when it is literally constant on a
//! tail of the configured ladder of at least two levels.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critical::{deflated_search, filter_window, CriticalError, CriticalPoint, SolverConfig};
use crate::galerkin::{build_level, w_distance, GalerkinError, QuadratureSpec};
use crate::morse::{
    default_betti, morse_polynomial, verify_morse_relation, MorseError, MorseRelationReport, NatPoly, WindowKind,
};
use crate::problem::FunctionalSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// Last W-increment below which a family counts as Cauchy.
pub const PSU_LAST_INCREMENT: f64 = 1e-4;

/// Increments at or below this are treated as exact zeros when checking
/// monotone decay, so roundoff at converged levels does not count as growth.
pub const PSU_NOISE_FLOOR: f64 = 1e-12;

// below half the gap, so a fine point is near at most one coarse point
const MATCH_TOL_FACTOR: f64 = 0.25;
const MATCH_TOL_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LadderError {
    #[error("invalid ladder configuration: {0}")]
    InvalidConfig(String),
    #[error("level {level}: {source}")]
    Galerkin { level: usize, source: GalerkinError },
    #[error("level {level}: {source}")]
    Critical { level: usize, source: CriticalError },
    #[error(transparent)]
    Morse(#[from] MorseError),
}

/// Value window `(a, b]` for the critical set, with the Betti polynomial of
/// the sublevel pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Window {
    FullCoercive,
    Range {
        a: f64,
        b: f64,
        betti: Option<NatPoly>,
    },
    /// One `(a, b)` per configured level.
    PerLevel {
        bounds: Vec<(f64, f64)>,
        betti: Option<NatPoly>,
    },
}

impl Window {
    fn bounds(&self, i: usize) -> (f64, f64) {
        match self {
            Window::FullCoercive => (f64::NEG_INFINITY, f64::INFINITY),
            Window::Range { a, b, .. } => (*a, *b),
            Window::PerLevel { bounds, .. } => bounds[i],
        }
    }

    pub fn betti(&self) -> Result<NatPoly, MorseError> {
        match self {
            Window::FullCoercive => default_betti(WindowKind::FullCoercive, None),
            Window::Range { betti, .. } | Window::PerLevel { betti, .. } => {
                default_betti(WindowKind::Custom, betti.as_ref())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub levels: Vec<usize>,
    pub window: Window,
    pub solver: SolverConfig,
    /// Fixed matching tolerance; derived from point gaps when absent.
    pub match_tol: Option<f64>,
    /// Quadrature panels per mode (`m = factor · n`).
    pub panels_per_mode: usize,
    pub points_per_panel: usize,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            levels: vec![4, 8, 16, 32],
            window: Window::FullCoercive,
            solver: SolverConfig::default(),
            match_tol: None,
            panels_per_mode: 2,
            points_per_panel: 10,
        }
    }
}

impl LadderConfig {
    pub fn validate(&self) -> Result<(), LadderError> {
        let bad = |m: String| Err(LadderError::InvalidConfig(m));
        if self.levels.len() < 2 {
            return bad(format!("need at least 2 levels, got {}", self.levels.len()));
        }
        if self.levels[0] == 0 || self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("levels must be positive and strictly increasing: {:?}", self.levels));
        }
        if self.panels_per_mode == 0 || self.points_per_panel == 0 {
            return bad("quadrature panels and points must be positive".into());
        }
        if let Some(t) = self.match_tol {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("match_tol must be positive, got {t}"));
            }
        }
        match &self.window {
            Window::FullCoercive => {}
            Window::Range { a, b, .. } => {
                if a.partial_cmp(b) != Some(Ordering::Less) {
                    return bad(format!("window needs a < b, got a = {a}, b = {b}"));
                }
            }
            Window::PerLevel { bounds, .. } => {
                if bounds.len() != self.levels.len() {
                    return bad(format!("{} per-level windows for {} levels", bounds.len(), self.levels.len()));
                }
                if let Some((a, b)) = bounds.iter().find(|(a, b)| a.partial_cmp(b) != Some(Ordering::Less)) {
                    return bad(format!("window needs a < b, got a = {a}, b = {b}"));
                }
            }
        }
        self.window.betti()?;
        self.solver.validate().map_err(|e| LadderError::InvalidConfig(e.to_string()))
    }

    fn quadrature(&self, n: usize) -> QuadratureSpec {
        QuadratureSpec { panels: self.panels_per_mode * n, points: self.points_per_panel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub window: (f64, f64),
    /// Critical points found on the level before windowing.
    pub total_found: usize,
    /// Points in the window, ascending by value.
    pub points: Vec<CriticalPoint>,
    pub morse: Option<NatPoly>,
    pub relation: Option<MorseRelationReport>,
    /// Positions in `points` of degenerate critical points.
    pub degenerate: Vec<usize>,
    pub gram_residual: f64,
}

impl LevelReport {
    pub fn is_degenerate(&self) -> bool {
        !self.degenerate.is_empty()
    }

    pub fn index_multiset(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.points.iter().map(|p| p.morse_index).collect();
        idx.sort_unstable();
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsuStatus {
    Converged,
    NotConverged,
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsuDiagnostic {
    pub status: PsuStatus,
    /// Least-squares slope of `log(increment)` against `log(level)`.
    pub rate: Option<f64>,
}

impl PsuDiagnostic {
    pub fn converged(&self) -> bool {
        self.status == PsuStatus::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub level: usize,
    /// Position in that level's `points`.
    pub point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedFamily {
    pub id: usize,
    pub members: Vec<FamilyMember>,
    /// `‖u_{n_i} − u_{n_{i−1}}‖_W` between consecutive members.
    pub w_increments: Vec<f64>,
    pub index_history: Vec<usize>,
    /// The family lost its continuation before the finest level.
    pub terminated: bool,
    pub psu: PsuDiagnostic,
}

impl MatchedFamily {
    pub fn converged(&self) -> bool {
        self.psu.converged()
    }

    pub fn first_level(&self) -> usize {
        self.members[0].level
    }

    pub fn last_level(&self) -> usize {
        self.members[self.members.len() - 1].level
    }
}

/// Cauchy test on a family's W-increments.
pub fn psu_diagnostic(family: &MatchedFamily) -> PsuDiagnostic {
    psu_from_increments(&family.members.iter().map(|m| m.level).collect::<Vec<_>>(), &family.w_increments)
}

fn psu_from_increments(levels: &[usize], increments: &[f64]) -> PsuDiagnostic {
    if increments.len() < 2 {
        return PsuDiagnostic { status: PsuStatus::InsufficientData, rate: None };
    }
    let decreasing = increments.windows(2).all(|w| w[1] < w[0] || (w[0] <= PSU_NOISE_FLOOR && w[1] <= PSU_NOISE_FLOOR));
    let last = increments[increments.len() - 1];
    if !(decreasing && last < PSU_LAST_INCREMENT) {
        return PsuDiagnostic { status: PsuStatus::NotConverged, rate: None };
    }
    // increment i belongs to the finer level of its pair
    let samples: Vec<(f64, f64)> = levels[1..]
        .iter()
        .zip(increments)
        .filter(|(_, &d)| d > PSU_NOISE_FLOOR)
        .map(|(&n, &d)| ((n as f64).ln(), d.ln()))
        .collect();
    PsuDiagnostic { status: PsuStatus::Converged, rate: least_squares_slope(&samples) }
}

fn least_squares_slope(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pairing {
    /// `(coarse, fine, W-distance)`, in assignment order.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Fine points that start new families.
    pub unmatched_fine: Vec<usize>,
    /// Coarse points without a continuation.
    pub terminated: Vec<usize>,
}

/// Greedy nearest-neighbour pairing in the W-norm after embedding.
pub fn match_points(coarse: &[CriticalPoint], fine: &[CriticalPoint], tol: f64, domain_length: f64) -> Pairing {
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for (i, c) in coarse.iter().enumerate() {
        for (j, f) in fine.iter().enumerate() {
            let d = w_distance(&c.coeffs, &f.coeffs, domain_length);
            if d <= tol {
                candidates.push((i, j, d));
            }
        }
    }
    candidates.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut coarse_used = vec![false; coarse.len()];
    let mut fine_used = vec![false; fine.len()];
    let mut pairing = Pairing::default();
    for (i, j, d) in candidates {
        if coarse_used[i] || fine_used[j] {
            continue;
        }
        coarse_used[i] = true;
        fine_used[j] = true;
        pairing.pairs.push((i, j, d));
    }
    pairing.unmatched_fine = (0..fine.len()).filter(|&j| !fine_used[j]).collect();
    pairing.terminated = (0..coarse.len()).filter(|&i| !coarse_used[i]).collect();
    for &i in &pairing.terminated {
        log::warn!("coarse point {i} has no continuation within W-distance {tol:.3e}");
    }
    pairing
}

/// `0.25 ×` the smallest W-gap inside either list, at least `1e-4`.
pub fn default_match_tol(coarse: &[CriticalPoint], fine: &[CriticalPoint], domain_length: f64) -> f64 {
    let min_gap = |pts: &[CriticalPoint]| {
        let mut gap = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                gap = gap.min(w_distance(&pts[i].coeffs, &pts[j].coeffs, domain_length));
            }
        }
        gap
    };
    let gap = min_gap(coarse).min(min_gap(fine));
    let gap = if gap.is_finite() { gap } else { 1.0 };
    (MATCH_TOL_FACTOR * gap).max(MATCH_TOL_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationTrace {
    pub schema: u32,
    pub problem: String,
    pub levels: Vec<usize>,
    pub betti: NatPoly,
    pub per_level: Vec<LevelReport>,
    pub families: Vec<MatchedFamily>,
    pub stable_from: Option<usize>,
    pub m_limit: Option<NatPoly>,
}

impl StabilizationTrace {
    pub fn level(&self, n: usize) -> Option<&LevelReport> {
        self.per_level.iter().find(|l| l.level == n)
    }

    pub fn has_violation(&self) -> bool {
        self.per_level.iter().any(|l| l.relation.as_ref().is_some_and(|r| !r.holds()))
    }

    pub fn has_degenerate_level(&self) -> bool {
        self.per_level.iter().any(LevelReport::is_degenerate)
    }

    /// The finest member of each family.
    pub fn family_point(&self, family: &MatchedFamily, level: usize) -> Option<&CriticalPoint> {
        let m = family.members.iter().find(|m| m.level == level)?;
        self.level(level).map(|l| &l.points[m.point])
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Rows `level, point_id, value, index, grad_norm, increment`, where
    /// `point_id` names the matched family.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "point_id", "value", "index", "grad_norm", "increment"])?;
        for report in &self.per_level {
            for (j, p) in report.points.iter().enumerate() {
                let (id, inc) = self
                    .families
                    .iter()
                    .find_map(|f| {
                        let pos = f.members.iter().position(|m| m.level == report.level && m.point == j)?;
                        Some((f.id, pos.checked_sub(1).map(|k| f.w_increments[k])))
                    })
                    .map_or((String::new(), String::new()), |(id, inc)| {
                        (format!("F{id}"), inc.map(|d| d.to_string()).unwrap_or_default())
                    });
                w.write_record([
                    report.level.to_string(),
                    id,
                    p.value.to_string(),
                    p.morse_index.to_string(),
                    p.grad_norm.to_string(),
                    inc,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Full pipeline on every level, then matching and stabilization.
pub fn run_ladder(spec: &FunctionalSpec, cfg: &LadderConfig) -> Result<StabilizationTrace, LadderError> {
    cfg.validate()?;
    let betti = cfg.window.betti()?;
    let mut per_level = Vec::with_capacity(cfg.levels.len());
    for (i, &n) in cfg.levels.iter().enumerate() {
        let level =
            build_level(spec, n, cfg.quadrature(n)).map_err(|source| LadderError::Galerkin { level: n, source })?;
        let all = deflated_search(&level, &cfg.solver).map_err(|source| LadderError::Critical { level: n, source })?;
        let (a, b) = cfg.window.bounds(i);
        let points = filter_window(&all, a, b).map_err(|source| LadderError::Critical { level: n, source })?;
        let (morse, relation, degenerate) = match morse_polynomial(&points) {
            Ok(m) => {
                let rel = verify_morse_relation(&m, &betti);
                if !rel.holds() {
                    log::warn!("level {n}: Morse relation violated: M = {m}, P = {betti}");
                }
                (Some(m), Some(rel), Vec::new())
            }
            Err(MorseError::Degenerate(idx)) => {
                log::warn!("level {n}: {} degenerate critical point(s); level excluded", idx.len());
                (None, None, idx)
            }
            Err(e) => return Err(e.into()),
        };
        log::info!("level {n}: {} critical point(s) in window", points.len());
        per_level.push(LevelReport {
            level: n,
            window: (a, b),
            total_found: all.len(),
            points,
            morse,
            relation,
            degenerate,
            gram_residual: level.gram_residual(),
        });
    }

    let families = build_families(&per_level, cfg.match_tol, spec.length());
    let stable_from = stable_from(&per_level);
    let m_limit = stable_from.and_then(|n| per_level.iter().find(|l| l.level == n)).and_then(|l| l.morse.clone());
    Ok(StabilizationTrace {
        schema: SCHEMA_VERSION,
        problem: spec.label().to_string(),
        levels: cfg.levels.clone(),
        betti,
        per_level,
        families,
        stable_from,
        m_limit,
    })
}

fn build_families(per_level: &[LevelReport], match_tol: Option<f64>, length: f64) -> Vec<MatchedFamily> {
    let mut families: Vec<MatchedFamily> = Vec::new();
    let new_family = |id: usize, level: usize, point: usize, index: usize| MatchedFamily {
        id,
        members: vec![FamilyMember { level, point }],
        w_increments: Vec::new(),
        index_history: vec![index],
        terminated: false,
        psu: PsuDiagnostic { status: PsuStatus::InsufficientData, rate: None },
    };
    let Some(first) = per_level.first() else {
        return families;
    };
    for (j, p) in first.points.iter().enumerate() {
        families.push(new_family(families.len(), first.level, j, p.morse_index));
    }
    for pair in per_level.windows(2) {
        let (coarse, fine) = (&pair[0], &pair[1]);
        let tol = match_tol.unwrap_or_else(|| default_match_tol(&coarse.points, &fine.points, length));
        let pairing = match_points(&coarse.points, &fine.points, tol, length);
        for &(i, j, d) in &pairing.pairs {
            let fam = families
                .iter_mut()
                .find(|f| !f.terminated && f.members.last() == Some(&FamilyMember { level: coarse.level, point: i }))
                .expect("every coarse point belongs to a live family");
            fam.members.push(FamilyMember { level: fine.level, point: j });
            fam.w_increments.push(d);
            fam.index_history.push(fine.points[j].morse_index);
        }
        for &i in &pairing.terminated {
            if let Some(fam) =
                families.iter_mut().find(|f| f.members.last() == Some(&FamilyMember { level: coarse.level, point: i }))
            {
                fam.terminated = true;
            }
        }
        for &j in &pairing.unmatched_fine {
            families.push(new_family(families.len(), fine.level, j, fine.points[j].morse_index));
        }
    }
    for f in &mut families {
        f.psu = psu_diagnostic(f);
    }
    families
}

/// First level from which count, index multiset and `M_t` stay identical
/// through the finest level, over a tail of at least two nondegenerate levels.
pub fn stable_from(per_level: &[LevelReport]) -> Option<usize> {
    let signature = |l: &LevelReport| {
        l.morse.as_ref().filter(|_| !l.is_degenerate()).map(|m| (l.points.len(), l.index_multiset(), m.clone()))
    };
    let last = signature(per_level.last()?)?;
    let mut start = per_level.len() - 1;
    while start > 0 && signature(&per_level[start - 1]).as_ref() == Some(&last) {
        start -= 1;
    }
    (per_level.len() - start >= 2).then(|| per_level[start].level)
}
