//! Variational functionals `J(u) = ∫ F(x, u, u') dx` on an interval with
//! homogeneous Dirichlet data, and the shipped model problems.

mod expr;

pub use expr::{Expr, ExprError, Func, Var};

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("unsupported parameter mu = {0}: presets require mu > 0")]
    UnsupportedParameter(f64),
    #[error("invalid domain [{0}, {1}]: need finite x0 < x1")]
    InvalidDomain(f64, f64),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("problem source must name exactly one of `preset` or `expression`")]
    AmbiguousSource,
    #[error("preset '{0}' requires `mu`")]
    MissingParameter(String),
    #[error(transparent)]
    Expression(#[from] ExprError),
    #[error("partials of '{label}' are inconsistent with F: {detail}")]
    Inconsistent { label: String, detail: String },
}

/// The integrand `F(x, u, p)` together with its first and second partials.
pub trait Integrand: Send + Sync {
    fn f(&self, x: f64, u: f64, p: f64) -> f64;
    fn f_u(&self, x: f64, u: f64, p: f64) -> f64;
    fn f_p(&self, x: f64, u: f64, p: f64) -> f64;
    fn f_uu(&self, x: f64, u: f64, p: f64) -> f64;
    fn f_up(&self, x: f64, u: f64, p: f64) -> f64;
    fn f_pp(&self, x: f64, u: f64, p: f64) -> f64;
}

/// A functional on `[x0, x1]` with zero boundary values.
#[derive(Clone)]
pub struct FunctionalSpec {
    domain: (f64, f64),
    integrand: Arc<dyn Integrand>,
    label: String,
}

impl fmt::Debug for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalSpec")
            .field("domain", &self.domain)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl FunctionalSpec {
    /// Wraps an integrand without checking its partials; see [`validate_spec`].
    pub fn new(
        domain: (f64, f64),
        integrand: Arc<dyn Integrand>,
        label: impl Into<String>,
    ) -> Result<Self, ProblemError> {
        let (x0, x1) = domain;
        if !(x0.is_finite() && x1.is_finite() && x0 < x1) {
            return Err(ProblemError::InvalidDomain(x0, x1));
        }
        Ok(Self { domain, integrand, label: label.into() })
    }

    /// Like [`FunctionalSpec::new`] but rejects specs that fail [`validate_spec`].
    pub fn new_validated(
        domain: (f64, f64),
        integrand: Arc<dyn Integrand>,
        label: impl Into<String>,
    ) -> Result<Self, ProblemError> {
        let spec = Self::new(domain, integrand, label)?;
        let report = validate_spec(&spec);
        if !report.passed {
            return Err(ProblemError::Inconsistent { label: spec.label.clone(), detail: report.summary() });
        }
        Ok(spec)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn length(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn integrand(&self) -> &dyn Integrand {
        self.integrand.as_ref()
    }
}

/// `F = ½p² − (μ/2)u² + ¼u⁴`.
#[derive(Debug, Clone, Copy)]
pub struct ChafeeInfante {
    pub mu: f64,
}

impl Integrand for ChafeeInfante {
    fn f(&self, _x: f64, u: f64, p: f64) -> f64 {
        0.5 * p * p - 0.5 * self.mu * u * u + 0.25 * u * u * u * u
    }
    fn f_u(&self, _x: f64, u: f64, _p: f64) -> f64 {
        -self.mu * u + u * u * u
    }
    fn f_p(&self, _x: f64, _u: f64, p: f64) -> f64 {
        p
    }
    fn f_uu(&self, _x: f64, u: f64, _p: f64) -> f64 {
        -self.mu + 3.0 * u * u
    }
    fn f_up(&self, _x: f64, _u: f64, _p: f64) -> f64 {
        0.0
    }
    fn f_pp(&self, _x: f64, _u: f64, _p: f64) -> f64 {
        1.0
    }
}

/// Integrand given as an expression; partials are derived symbolically.
#[derive(Debug, Clone)]
pub struct ExpressionIntegrand {
    f: Expr,
    fu: Expr,
    fp: Expr,
    fuu: Expr,
    fup: Expr,
    fpp: Expr,
}

impl ExpressionIntegrand {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let f = Expr::parse(src)?;
        let fu = f.diff(Var::U);
        let fp = f.diff(Var::P);
        Ok(Self { fuu: fu.diff(Var::U), fup: fu.diff(Var::P), fpp: fp.diff(Var::P), f, fu, fp })
    }
}

impl Integrand for ExpressionIntegrand {
    fn f(&self, x: f64, u: f64, p: f64) -> f64 {
        self.f.eval(x, u, p)
    }
    fn f_u(&self, x: f64, u: f64, p: f64) -> f64 {
        self.fu.eval(x, u, p)
    }
    fn f_p(&self, x: f64, u: f64, p: f64) -> f64 {
        self.fp.eval(x, u, p)
    }
    fn f_uu(&self, x: f64, u: f64, p: f64) -> f64 {
        self.fuu.eval(x, u, p)
    }
    fn f_up(&self, x: f64, u: f64, p: f64) -> f64 {
        self.fup.eval(x, u, p)
    }
    fn f_pp(&self, x: f64, u: f64, p: f64) -> f64 {
        self.fpp.eval(x, u, p)
    }
}

/// Expected results for a preset, used by tests and reports only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KnownFacts {
    pub count: usize,
    pub indices: Vec<usize>,
    pub morse_coeffs: Vec<u64>,
    pub quotient_coeffs: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct ModelProblem {
    pub spec: FunctionalSpec,
    pub mu: f64,
    pub known_facts: Option<KnownFacts>,
}

/// Chafee–Infante on `(0, π)`. Critical points solve `−u'' = μu − u³`; for
/// `μ ∈ (k², (k+1)²)` there are `2k + 1` of them.
pub fn chafee_infante(mu: f64) -> Result<ModelProblem, ProblemError> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(ProblemError::UnsupportedParameter(mu));
    }
    let spec = FunctionalSpec::new((0.0, PI), Arc::new(ChafeeInfante { mu }), format!("chafee_infante(mu={mu})"))?;
    let known_facts = if mu > 0.0 && mu < 1.0 {
        Some(KnownFacts { count: 1, indices: vec![0], morse_coeffs: vec![1], quotient_coeffs: vec![] })
    } else if mu > 1.0 && mu < 4.0 {
        Some(KnownFacts { count: 3, indices: vec![0, 0, 1], morse_coeffs: vec![2, 1], quotient_coeffs: vec![1] })
    } else if mu > 4.0 && mu < 9.0 {
        Some(KnownFacts {
            count: 5,
            indices: vec![0, 0, 1, 1, 2],
            morse_coeffs: vec![2, 2, 1],
            quotient_coeffs: vec![1, 1],
        })
    } else {
        None
    };
    Ok(ModelProblem { spec, mu, known_facts })
}

/// Serializable description of a problem: a preset with `mu`, or an
/// expression for `F` on an optional domain (default `[0, π]`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSource {
    pub preset: Option<String>,
    pub mu: Option<f64>,
    pub expression: Option<String>,
    pub domain: Option<[f64; 2]>,
    pub label: Option<String>,
}

impl ProblemSource {
    pub fn preset(name: &str, mu: f64) -> Self {
        Self { preset: Some(name.to_string()), mu: Some(mu), ..Self::default() }
    }

    pub fn expression(src: &str) -> Self {
        Self { expression: Some(src.to_string()), ..Self::default() }
    }

    /// Builds the spec; expression sources are validated against finite differences.
    pub fn build(&self) -> Result<FunctionalSpec, ProblemError> {
        match (&self.preset, &self.expression) {
            (Some(name), None) => match name.as_str() {
                "chafee_infante" => {
                    let mu = self.mu.ok_or_else(|| ProblemError::MissingParameter(name.clone()))?;
                    if self.domain.is_some_and(|d| d != [0.0, PI]) {
                        log::warn!("chafee_infante is defined on (0, pi); ignoring configured domain");
                    }
                    Ok(chafee_infante(mu)?.spec)
                }
                other => Err(ProblemError::UnknownPreset(other.to_string())),
            },
            (None, Some(src)) => {
                let integrand = ExpressionIntegrand::parse(src)?;
                let [x0, x1] = self.domain.unwrap_or([0.0, PI]);
                let label = self.label.clone().unwrap_or_else(|| format!("F = {src}"));
                FunctionalSpec::new_validated((x0, x1), Arc::new(integrand), label)
            }
            _ => Err(ProblemError::AmbiguousSource),
        }
    }
}

pub const PARTIAL_NAMES: [&str; 5] = ["F_u", "F_p", "F_uu", "F_up", "F_pp"];

/// Worst disagreement of one analytic partial with its finite difference.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDeviation {
    pub name: &'static str,
    pub max_abs: f64,
    pub max_rel: f64,
    /// `(x, u, p)` where `max_rel` was attained.
    pub worst_sample: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub deviations: Vec<PartialDeviation>,
    pub passed: bool,
    /// First sample at which an evaluator returned a non-finite value.
    pub non_finite: Option<(&'static str, (f64, f64, f64))>,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        if let Some((name, s)) = self.non_finite {
            return format!("{name} is not finite at (x, u, p) = {s:?}");
        }
        self.deviations
            .iter()
            .filter(|d| d.max_rel > VALIDATION_TOL)
            .map(|d| format!("{} deviates by {:.3e} (rel) at {:?}", d.name, d.max_rel, d.worst_sample))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

pub const VALIDATION_TOL: f64 = 1e-5;
const VALIDATION_SAMPLES: usize = 50;
const SAMPLE_RANGE: f64 = 2.0;

/// Compares each analytic partial with central differences of `F` at 50
/// Halton points in `domain × [-2, 2] × [-2, 2]`.
pub fn validate_spec(spec: &FunctionalSpec) -> ValidationReport {
    let g = spec.integrand();
    let (x0, x1) = spec.domain();
    let mut devs: Vec<PartialDeviation> = PARTIAL_NAMES
        .iter()
        .map(|&name| PartialDeviation { name, max_abs: 0.0, max_rel: 0.0, worst_sample: (x0, 0.0, 0.0) })
        .collect();
    let mut non_finite = None;

    for i in 1..=VALIDATION_SAMPLES {
        let x = x0 + (x1 - x0) * halton(i, 2);
        let u = SAMPLE_RANGE * (2.0 * halton(i, 3) - 1.0);
        let p = SAMPLE_RANGE * (2.0 * halton(i, 5) - 1.0);
        let f = |u: f64, p: f64| g.f(x, u, p);

        let analytic = [g.f_u(x, u, p), g.f_p(x, u, p), g.f_uu(x, u, p), g.f_up(x, u, p), g.f_pp(x, u, p)];
        if non_finite.is_none() {
            if !g.f(x, u, p).is_finite() {
                non_finite = Some(("F", (x, u, p)));
            } else if let Some(k) = analytic.iter().position(|v| !v.is_finite()) {
                non_finite = Some((PARTIAL_NAMES[k], (x, u, p)));
            }
        }

        let h1u = 1e-5 * u.abs().max(1.0);
        let h1p = 1e-5 * p.abs().max(1.0);
        let h2u = 1e-4 * u.abs().max(1.0);
        let h2p = 1e-4 * p.abs().max(1.0);
        let f0 = f(u, p);
        let numeric = [
            (f(u + h1u, p) - f(u - h1u, p)) / (2.0 * h1u),
            (f(u, p + h1p) - f(u, p - h1p)) / (2.0 * h1p),
            (f(u + h2u, p) - 2.0 * f0 + f(u - h2u, p)) / (h2u * h2u),
            (f(u + h2u, p + h2p) - f(u + h2u, p - h2p) - f(u - h2u, p + h2p) + f(u - h2u, p - h2p)) / (4.0 * h2u * h2p),
            (f(u, p + h2p) - 2.0 * f0 + f(u, p - h2p)) / (h2p * h2p),
        ];
        for ((d, a), n) in devs.iter_mut().zip(analytic).zip(numeric) {
            let abs = (a - n).abs();
            let rel = abs / a.abs().max(n.abs()).max(1.0);
            d.max_abs = d.max_abs.max(abs);
            if rel > d.max_rel || rel.is_nan() {
                d.max_rel = rel;
                d.worst_sample = (x, u, p);
            }
        }
    }
    let passed = non_finite.is_none() && devs.iter().all(|d| d.max_rel <= VALIDATION_TOL);
    ValidationReport { deviations: devs, passed, non_finite }
}

/// Radical inverse of `i` in the given base.
fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}
