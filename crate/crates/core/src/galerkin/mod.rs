//! Spectral sine levels `V_n = span{φ_1, …, φ_n}` and the functional, its
//! gradient and its Hessian on coefficient vectors.
//!
//! The basis `φ_k(x) = √(2/L) sin(kπ(x − x0)/L)` is orthonormal in L², so the
//! L² product of two functions is the dot product of their coefficients and
//! levels nest: the first `n` functions of any finer level are exactly the
//! basis of level `n`.

mod quadrature;

pub use quadrature::{gauss_legendre, CompositeRule};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::FunctionalSpec;

/// Largest tolerated entry of `Gram − I`.
pub const GRAM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GalerkinError {
    #[error("level dimension must be at least 1")]
    EmptyLevel,
    #[error("quadrature with {nodes} nodes cannot resolve dimension {n}: need panels*points >= {}", 2 * n)]
    UnderResolved { n: usize, nodes: usize },
    #[error("Gram matrix entry ({row}, {col}) deviates from identity by {deviation:.3e}")]
    QuadratureResolution { row: usize, col: usize, deviation: f64 },
    #[error("coefficient vector has length {got}, level has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point x = {0} lies outside the domain")]
    OutsideDomain(f64),
    #[error("integrand is not finite at node x = {x} (u = {u}, u' = {p})")]
    NonFinite { x: f64, u: f64, p: f64 },
}

/// Panels × points of the composite Gauss–Legendre rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub points: usize,
}

impl QuadratureSpec {
    /// `2n` panels of 10 points.
    pub fn default_for(n: usize) -> Self {
        Self { panels: 2 * n, points: 10 }
    }
}

/// Sine coefficients of a function in some level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector {
    pub coeffs: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![0.0; n] }
    }

    /// Unit vector `e_k` (1-based mode number).
    pub fn unit(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.coeffs[k - 1] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    /// First `n` coefficients.
    pub fn truncate(&self, n: usize) -> Self {
        Self { coeffs: self.coeffs[..n.min(self.coeffs.len())].to_vec() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| s * c).collect() }
    }
}

/// L² product; shorter vectors are zero-padded, which is exact by nesting.
pub fn l2_inner(v: &CoefficientVector, w: &CoefficientVector) -> f64 {
    v.coeffs.iter().zip(&w.coeffs).map(|(a, b)| a * b).sum()
}

/// One level of the ladder: basis values and derivatives tabulated at the
/// quadrature nodes.
#[derive(Debug, Clone)]
pub struct LevelSpace {
    spec: FunctionalSpec,
    n: usize,
    rule: CompositeRule,
    /// `phi[(i, k)]` = φ_{k+1}(x_i)
    phi: DMatrix<f64>,
    dphi: DMatrix<f64>,
    phi_t: DMatrix<f64>,
    dphi_t: DMatrix<f64>,
    gram_residual: f64,
}

pub fn build_level(spec: &FunctionalSpec, n: usize, quad: QuadratureSpec) -> Result<LevelSpace, GalerkinError> {
    LevelSpace::build(spec, n, quad)
}

impl LevelSpace {
    pub fn build(spec: &FunctionalSpec, n: usize, quad: QuadratureSpec) -> Result<Self, GalerkinError> {
        if n == 0 {
            return Err(GalerkinError::EmptyLevel);
        }
        let nodes = quad.panels * quad.points;
        if nodes < 2 * n {
            return Err(GalerkinError::UnderResolved { n, nodes });
        }
        let (x0, x1) = spec.domain();
        let rule = CompositeRule::new(x0, x1, quad.panels, quad.points);
        let l = x1 - x0;
        let amp = (2.0 / l).sqrt();
        let freq = |k: usize| (k + 1) as f64 * std::f64::consts::PI / l;
        let phi = DMatrix::from_fn(nodes, n, |i, k| amp * (freq(k) * (rule.nodes[i] - x0)).sin());
        let dphi = DMatrix::from_fn(nodes, n, |i, k| amp * freq(k) * (freq(k) * (rule.nodes[i] - x0)).cos());
        let mut level = Self {
            spec: spec.clone(),
            n,
            rule,
            phi_t: phi.transpose(),
            dphi_t: dphi.transpose(),
            phi,
            dphi,
            gram_residual: 0.0,
        };
        level.check_gram()?;
        Ok(level)
    }

    fn check_gram(&mut self) -> Result<(), GalerkinError> {
        let n = self.n;
        let gram = self.gram_matrix();
        let mut worst = (0, 0, 0.0f64);
        for j in 0..n {
            for k in j..n {
                let dev = (gram[(j, k)] - if j == k { 1.0 } else { 0.0 }).abs();
                if dev > worst.2 {
                    worst = (j + 1, k + 1, dev);
                }
            }
        }
        self.gram_residual = worst.2;
        if worst.2 > GRAM_TOL {
            return Err(GalerkinError::QuadratureResolution { row: worst.0, col: worst.1, deviation: worst.2 });
        }
        log::debug!("level n={n}: Gram residual {:.3e}", worst.2);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &FunctionalSpec {
        &self.spec
    }

    pub fn rule(&self) -> &CompositeRule {
        &self.rule
    }

    /// Max |Gram − I| entry observed at build time.
    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let weighted = DMatrix::from_fn(self.phi.nrows(), self.n, |i, k| self.rule.weights[i] * self.phi[(i, k)]);
        self.phi.tr_mul(&weighted)
    }

    /// `φ_k(x)` for a 1-based mode `k`.
    pub fn basis(&self, k: usize, x: f64) -> f64 {
        let (x0, x1) = self.spec.domain();
        let l = x1 - x0;
        (2.0 / l).sqrt() * (k as f64 * std::f64::consts::PI * (x - x0) / l).sin()
    }

    pub fn basis_derivative(&self, k: usize, x: f64) -> f64 {
        let (x0, x1) = self.spec.domain();
        let l = x1 - x0;
        let freq = k as f64 * std::f64::consts::PI / l;
        (2.0 / l).sqrt() * freq * (freq * (x - x0)).cos()
    }

    /// `kπ/L`, the H¹₀ weight of mode `k`.
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * std::f64::consts::PI / self.spec.length()
    }

    fn check(&self, v: &CoefficientVector) -> Result<(), GalerkinError> {
        if v.dim() != self.n {
            return Err(GalerkinError::DimensionMismatch { expected: self.n, got: v.dim() });
        }
        Ok(())
    }

    fn check_x(&self, x: f64) -> Result<(), GalerkinError> {
        let (x0, x1) = self.spec.domain();
        if !(x0..=x1).contains(&x) {
            return Err(GalerkinError::OutsideDomain(x));
        }
        Ok(())
    }

    pub fn eval_u(&self, v: &CoefficientVector, x: f64) -> Result<f64, GalerkinError> {
        self.check(v)?;
        self.check_x(x)?;
        Ok(v.coeffs.iter().enumerate().map(|(k, c)| c * self.basis(k + 1, x)).sum())
    }

    pub fn eval_du(&self, v: &CoefficientVector, x: f64) -> Result<f64, GalerkinError> {
        self.check(v)?;
        self.check_x(x)?;
        Ok(v.coeffs.iter().enumerate().map(|(k, c)| c * self.basis_derivative(k + 1, x)).sum())
    }

    /// `(u(x_i), u'(x_i))` at every quadrature node.
    fn node_values(&self, v: &CoefficientVector) -> Vec<(f64, f64)> {
        let c = DVector::from_column_slice(&v.coeffs);
        let u = &self.phi * &c;
        let p = &self.dphi * &c;
        u.iter().copied().zip(p.iter().copied()).collect()
    }

    pub fn energy(&self, v: &CoefficientVector) -> Result<f64, GalerkinError> {
        self.check(v)?;
        let g = self.spec.integrand();
        let mut total = 0.0;
        for ((&x, &w), (u, p)) in self.rule.nodes.iter().zip(&self.rule.weights).zip(self.node_values(v)) {
            let f = g.f(x, u, p);
            if !f.is_finite() {
                return Err(GalerkinError::NonFinite { x, u, p });
            }
            total += w * f;
        }
        Ok(total)
    }

    /// `g_k = ∫ F_p φ_k' + F_u φ_k`.
    pub fn gradient(&self, v: &CoefficientVector) -> Result<Vec<f64>, GalerkinError> {
        self.check(v)?;
        let g = self.spec.integrand();
        let nodes = self.rule.nodes.len();
        let mut wfu = DVector::zeros(nodes);
        let mut wfp = DVector::zeros(nodes);
        for (i, ((&x, &w), (u, p))) in
            self.rule.nodes.iter().zip(&self.rule.weights).zip(self.node_values(v)).enumerate()
        {
            let fu = g.f_u(x, u, p);
            let fp = g.f_p(x, u, p);
            if !(fu.is_finite() && fp.is_finite()) {
                return Err(GalerkinError::NonFinite { x, u, p });
            }
            wfu[i] = w * fu;
            wfp[i] = w * fp;
        }
        let grad = &self.dphi_t * &wfp + &self.phi_t * &wfu;
        Ok(grad.iter().copied().collect())
    }

    /// `H_jk = ∫ F_pp φ_j'φ_k' + F_up (φ_j φ_k' + φ_j' φ_k) + F_uu φ_j φ_k`,
    /// assembled as `Φ'ᵀ(F_pp Φ' + F_up Φ) + Φᵀ(F_uu Φ + F_up Φ')` and then
    /// symmetrized by averaging.
    pub fn hessian(&self, v: &CoefficientVector) -> Result<DMatrix<f64>, GalerkinError> {
        self.check(v)?;
        let n = self.n;
        let g = self.spec.integrand();
        let nodes = self.rule.nodes.len();
        let mut wuu = DVector::zeros(nodes);
        let mut wup = DVector::zeros(nodes);
        let mut wpp = DVector::zeros(nodes);
        for (i, ((&x, &w), (u, p))) in
            self.rule.nodes.iter().zip(&self.rule.weights).zip(self.node_values(v)).enumerate()
        {
            wuu[i] = w * g.f_uu(x, u, p);
            wup[i] = w * g.f_up(x, u, p);
            wpp[i] = w * g.f_pp(x, u, p);
            if !(wuu[i].is_finite() && wup[i].is_finite() && wpp[i].is_finite()) {
                return Err(GalerkinError::NonFinite { x, u, p });
            }
        }
        let mut a = DMatrix::zeros(nodes, n);
        let mut b = DMatrix::zeros(nodes, n);
        for k in 0..n {
            let (phi, dphi) = (self.phi.column(k), self.dphi.column(k));
            a.set_column(k, &(wpp.component_mul(&dphi) + wup.component_mul(&phi)));
            b.set_column(k, &(wuu.component_mul(&phi) + wup.component_mul(&dphi)));
        }
        let h = &self.dphi_t * &a + &self.phi_t * &b;
        Ok((&h + h.transpose()) * 0.5)
    }

    /// Zero-pads `v` into `target`.
    pub fn embed(&self, v: &CoefficientVector, target: &LevelSpace) -> Result<CoefficientVector, GalerkinError> {
        self.check(v)?;
        embed(v, target.dim())
    }

    /// H¹₀ norm `(Σ (kπ/L)² c_k²)^{1/2}`.
    pub fn w_norm(&self, v: &CoefficientVector) -> f64 {
        w_norm(v, self.spec.length())
    }

    /// W-distance between vectors of possibly different levels.
    pub fn w_distance(&self, a: &CoefficientVector, b: &CoefficientVector) -> f64 {
        w_distance(a, b, self.spec.length())
    }
}

pub fn embed(v: &CoefficientVector, target_dim: usize) -> Result<CoefficientVector, GalerkinError> {
    if target_dim < v.dim() {
        return Err(GalerkinError::DimensionMismatch { expected: target_dim, got: v.dim() });
    }
    let mut coeffs = v.coeffs.clone();
    coeffs.resize(target_dim, 0.0);
    Ok(CoefficientVector { coeffs })
}

pub fn w_norm(v: &CoefficientVector, length: f64) -> f64 {
    let base = std::f64::consts::PI / length;
    v.coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let f = (k + 1) as f64 * base;
            f * f * c * c
        })
        .sum::<f64>()
        .sqrt()
}

pub fn w_distance(a: &CoefficientVector, b: &CoefficientVector, length: f64) -> f64 {
    let n = a.dim().max(b.dim());
    let base = std::f64::consts::PI / length;
    (0..n)
        .map(|k| {
            let d = a.coeffs.get(k).copied().unwrap_or(0.0) - b.coeffs.get(k).copied().unwrap_or(0.0);
            let f = (k + 1) as f64 * base;
            f * f * d * d
        })
        .sum::<f64>()
        .sqrt()
}
