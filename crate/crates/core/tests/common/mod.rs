//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ultramorse::morse::Quotient;
use ultramorse::nonarch::{infinitely_close, Exponent, DEFAULT_ORDER};
use ultramorse::{
    classify, shadow, verify_morse_relation, Classification, CoefficientVector, LevelSpace, LeviCivitaNumber, NatPoly,
};

/// Pass/fail bookkeeping for sampled property checks.
#[derive(Debug, Default)]
pub struct Tally {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl Tally {
    pub fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.failures.len() < 20 {
            self.failures.push(msg());
        } else if !ok {
            self.failures.push(String::new());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn report(&self) -> String {
        let shown: Vec<&str> = self.failures.iter().filter(|s| !s.is_empty()).take(5).map(String::as_str).collect();
        format!("{} checks, {} failures {:?}", self.checked, self.failures.len(), shown)
    }
}

// ---------------------------------------------------------------------------
// Shooting for −u'' = μu − u³, u(0) = u(π) = 0.

fn rk4(mu: f64, (u, p): (f64, f64), h: f64) -> (f64, f64) {
    let f = |u: f64, p: f64| (p, -mu * u + u * u * u);
    let k1 = f(u, p);
    let k2 = f(u + 0.5 * h * k1.0, p + 0.5 * h * k1.1);
    let k3 = f(u + 0.5 * h * k2.0, p + 0.5 * h * k2.1);
    let k4 = f(u + h * k3.0, p + h * k3.1);
    (u + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0), p + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1))
}

const SHOOT_STEPS: usize = 1 << 15;

/// First positive zero of the solution with `u(0) = 0, u'(0) = s`, or
/// infinity if none before `t_max`.
fn first_zero(mu: f64, s: f64, t_max: f64) -> f64 {
    let h = PI / SHOOT_STEPS as f64;
    let mut state = (0.0, s);
    let mut t = 0.0;
    while t < t_max {
        let next = rk4(mu, state, h);
        if next.0 < 0.0 {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if rk4(mu, state, mid).0 < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return t + 0.5 * (lo + hi);
        }
        state = next;
        t += h;
    }
    f64::INFINITY
}

/// Positive-slope profile with `humps` sign-constant arcs on `(0, π)`;
/// values on the uniform grid of `SHOOT_STEPS + 1` points.
pub fn shooting_profile(mu: f64, humps: usize) -> Vec<f64> {
    let target = PI / humps as f64;
    assert!(mu > (humps * humps) as f64, "no {humps}-hump solution for mu = {mu}");
    // half-period grows from π/√μ (s → 0) to ∞ at the separatrix s = μ/√2
    let (mut lo, mut hi) = (0.0, mu / 2f64.sqrt());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if first_zero(mu, mid, target + 1.0) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let h = PI / SHOOT_STEPS as f64;
    let mut state = (0.0, s);
    let mut values = Vec::with_capacity(SHOOT_STEPS + 1);
    values.push(0.0);
    for _ in 0..SHOOT_STEPS {
        state = rk4(mu, state, h);
        values.push(state.0);
    }
    values
}

/// `u(x) = Σ c_k √(2/π) sin(kx)` on `(0, π)`.
pub fn sine_series(coeffs: &[f64], x: f64) -> f64 {
    let norm = (2.0 / PI).sqrt();
    coeffs.iter().enumerate().map(|(k, c)| c * norm * ((k + 1) as f64 * x).sin()).sum()
}

/// L² distance between a sine-series point and a shooting profile, minimised
/// over the sign of the profile.
pub fn profile_distance(coeffs: &[f64], profile: &[f64]) -> f64 {
    let stride = 8;
    let h = PI / (profile.len() - 1) as f64 * stride as f64;
    let mut plus = 0.0;
    let mut minus = 0.0;
    let samples = (profile.len() - 1) / stride;
    for i in 0..=samples {
        let x = i as f64 * h;
        let g = sine_series(coeffs, x);
        let s = profile[i * stride];
        let w = if i == 0 || i == samples { 0.5 * h } else { h };
        plus += w * (g - s).powi(2);
        minus += w * (g + s).powi(2);
    }
    plus.min(minus).sqrt()
}

// ---------------------------------------------------------------------------
// Finite differences.

pub fn random_coeffs(rng: &mut ChaCha8Rng, n: usize) -> CoefficientVector {
    CoefficientVector::new((1..=n).map(|k| rng.sample::<f64, _>(StandardNormal) * 2.0 / k as f64).collect())
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

fn shifted(v: &CoefficientVector, k: usize, h: f64) -> CoefficientVector {
    let mut c = v.as_slice().to_vec();
    c[k] += h;
    CoefficientVector::new(c)
}

/// `‖g − g_fd‖ / ‖g‖` with central differences of the energy.
pub fn gradient_rel_error(level: &LevelSpace, v: &CoefficientVector) -> f64 {
    let h = 1e-5;
    let g = level.gradient(v).unwrap();
    let fd: Vec<f64> = (0..v.dim())
        .map(|k| (level.energy(&shifted(v, k, h)).unwrap() - level.energy(&shifted(v, k, -h)).unwrap()) / (2.0 * h))
        .collect();
    norm(g.iter().zip(&fd).map(|(a, b)| a - b)) / norm(g.iter().copied())
}

/// `‖H − H_fd‖_F / ‖H‖_F` with central differences of the gradient.
pub fn hessian_rel_error(level: &LevelSpace, v: &CoefficientVector) -> f64 {
    let h = 1e-5;
    let hess = level.hessian(v).unwrap();
    let n = v.dim();
    let mut diff = 0.0;
    for j in 0..n {
        let gp = level.gradient(&shifted(v, j, h)).unwrap();
        let gm = level.gradient(&shifted(v, j, -h)).unwrap();
        for i in 0..n {
            diff += (hess[(i, j)] - (gp[i] - gm[i]) / (2.0 * h)).powi(2);
        }
    }
    diff.sqrt() / hess.norm()
}

// ---------------------------------------------------------------------------
// Morse-relation round trip.

pub fn random_natpoly(rng: &mut ChaCha8Rng, max_degree: usize, max_coeff: u64) -> NatPoly {
    let deg = rng.random_range(0..=max_degree);
    NatPoly::new((0..=deg).map(|_| rng.random_range(0..=max_coeff)).collect())
}

fn value_at_minus_one(p: &NatPoly) -> i64 {
    p.coeffs().iter().enumerate().map(|(d, &c)| if d % 2 == 0 { c as i64 } else { -(c as i64) }).sum()
}

/// `verify(P + (1+t)Q, P)` must return exactly `Q`.
pub fn morse_round_trip(samples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    for _ in 0..samples {
        let p = random_natpoly(&mut rng, 6, 9);
        let q = random_natpoly(&mut rng, 6, 9);
        // M = P + Q + tQ, assembled coefficientwise
        let len = p.coeffs().len().max(q.coeffs().len() + 1);
        let m =
            NatPoly::new((0..len).map(|d| p.coeff(d) + q.coeff(d) + if d > 0 { q.coeff(d - 1) } else { 0 }).collect());
        let report = verify_morse_relation(&m, &p);
        tally.check(report.quotient == Quotient::Natural(q.clone()), || {
            format!("P = {p}, Q = {q}: {:?}", report.quotient)
        });
        let euler = value_at_minus_one(&m) == value_at_minus_one(&p);
        tally.check(euler && report.euler_ok, || format!("euler flag for P = {p}, Q = {q}"));
    }
    tally
}

// ---------------------------------------------------------------------------
// Levi-Civita samples. Coefficients are small integers so every sum and
// product below is exact in f64.

fn sample_series(rng: &mut ChaCha8Rng, exponent_step: i32, lo: i32, hi: i32, unit_coeffs: bool) -> LeviCivitaNumber {
    let n_terms = rng.random_range(1..=4);
    let mut terms = Vec::new();
    for _ in 0..n_terms {
        let q = rng.random_range(lo / exponent_step..=hi / exponent_step) * exponent_step;
        let a = if unit_coeffs {
            if rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        } else {
            let m = rng.random_range(1..=5) as f64;
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        };
        if terms.iter().all(|&(e, _): &(Exponent, f64)| e.twelfths() != q) {
            terms.push((Exponent::from_twelfths(q), a));
        }
    }
    LeviCivitaNumber::from_terms(terms, DEFAULT_ORDER).unwrap()
}

/// Exponents on the 1/12 grid in `[-2, 3]`.
pub fn sample_general(rng: &mut ChaCha8Rng) -> LeviCivitaNumber {
    let step = if rng.random_bool(0.5) { 3 } else { 4 };
    sample_series(rng, step, -24, 36, false)
}

/// Finite: exponents in `[0, 3]`.
pub fn sample_finite(rng: &mut ChaCha8Rng) -> LeviCivitaNumber {
    sample_series(rng, 3, 0, 36, false)
}

/// Unit coefficients, half-integer exponents: the geometric series of the
/// inverse stays in exactly representable integers.
pub fn sample_invertible(rng: &mut ChaCha8Rng) -> LeviCivitaNumber {
    sample_series(rng, 6, -24, 36, true)
}

fn infinitesimal(rng: &mut ChaCha8Rng) -> LeviCivitaNumber {
    sample_series(rng, 3, 3, 36, false)
}

fn lead(x: &LeviCivitaNumber) -> i32 {
    x.leading_exponent().map_or(0, Exponent::twelfths)
}

fn agree_through(a: &LeviCivitaNumber, b: &LeviCivitaNumber, order: Exponent) -> bool {
    a.truncate(order) == b.truncate(order)
}

/// Field and order axioms, classification/inverse duality, shadow as a ring
/// homomorphism on finite samples, and infinitely_close as an equivalence.
pub fn nonarch_suite(triples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    let zero = LeviCivitaNumber::zero();
    let one = LeviCivitaNumber::one();
    let k = DEFAULT_ORDER.twelfths();
    for _ in 0..triples {
        let (x, y, z) = (sample_general(&mut rng), sample_general(&mut rng), sample_general(&mut rng));
        let ctx = || format!("x = {x}, y = {y}, z = {z}");

        t.check(&(&x + &y) + &z == &x + &(&y + &z), || format!("add assoc: {}", ctx()));
        t.check(&x + &y == &y + &x, || format!("add comm: {}", ctx()));
        t.check(&x * &y == &y * &x, || format!("mul comm: {}", ctx()));
        t.check(&x + &zero == x && &x * &one == x, || format!("identities: {}", ctx()));
        t.check((&x + &(-&x)).is_zero(), || format!("additive inverse: {}", ctx()));
        t.check(&x * &(&y + &z) == &(&x * &y) + &(&x * &z), || format!("distributivity: {}", ctx()));
        let exact = Exponent::from_twelfths(k + 0.min(lead(&x)).min(lead(&y)).min(lead(&z)));
        t.check(agree_through(&(&(&x * &y) * &z), &(&x * &(&y * &z)), exact), || format!("mul assoc: {}", ctx()));

        // order
        let ord = x.cmp(&y);
        t.check((&x - &y).signum() == ord as i32, || format!("cmp vs sign of difference: {}", ctx()));
        if x < y {
            t.check(&x + &z < &y + &z, || format!("x < y ⇒ x+z < y+z: {}", ctx()));
        }
        if x > zero && y > zero {
            t.check(&x * &y > zero, || format!("x, y > 0 ⇒ xy > 0: {}", ctx()));
        }
        if x < y && y < z {
            t.check(x < z, || format!("transitivity: {}", ctx()));
        }

        // inverse and classification duality
        let w = sample_invertible(&mut rng);
        let inv = w.checked_inv().unwrap();
        let exact = Exponent::from_twelfths(k + 0.min(lead(&w)));
        t.check(agree_through(&(&w * &inv), &one, exact), || format!("w · w⁻¹ = 1 for w = {w}: {inv}"));
        for v in [&x, &y, &z, &w] {
            let c = classify(&v.checked_inv().unwrap());
            let expected = match classify(v) {
                Classification::Infinitesimal => Classification::Infinite,
                Classification::Infinite => Classification::Infinitesimal,
                Classification::FiniteNonInfinitesimal => Classification::FiniteNonInfinitesimal,
            };
            t.check(c == expected, || format!("classify(1/{v}) = {c}"));
        }

        // shadow homomorphism
        let (a, b) = (sample_finite(&mut rng), sample_finite(&mut rng));
        let (sa, sb) = (a.coefficient(Exponent::ZERO), b.coefficient(Exponent::ZERO));
        t.check(shadow(&(&a + &b)) == sa + sb, || format!("shadow(a+b), a = {a}, b = {b}"));
        t.check(shadow(&(&a * &b)) == sa * sb, || format!("shadow(ab), a = {a}, b = {b}"));

        // infinitely_close equivalence on chains that often share a monad
        let p = sample_general(&mut rng);
        let q = if rng.random_bool(0.6) { &p + &infinitesimal(&mut rng) } else { sample_general(&mut rng) };
        let r = if rng.random_bool(0.6) { &q + &infinitesimal(&mut rng) } else { sample_general(&mut rng) };
        t.check(infinitely_close(&p, &p), || format!("reflexive: {p}"));
        t.check(infinitely_close(&p, &q) == infinitely_close(&q, &p), || format!("symmetric: {p}, {q}"));
        if infinitely_close(&p, &q) && infinitely_close(&q, &r) {
            t.check(infinitely_close(&p, &r), || format!("transitive: {p}, {q}, {r}"));
        }
    }
    t
}
