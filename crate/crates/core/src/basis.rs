//! One-dimensional harmonic-oscillator functions and the quadrature rules
//! used throughout the crate.
//!
//! A basis function of scale `s` is `phi_n(x) = sqrt(s) psi_n(s x)` where
//! `psi_n(y) = (2^n n! sqrt(pi))^{-1/2} H_n(y) exp(-y^2/2)` is the normalized
//! Hermite function. Everything is evaluated through the three-term recurrence
//! of the normalized functions, never through raw Hermite polynomials.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest supported Gauss-Hermite order.
pub const MAX_HERMITE_ORDER: usize = 300;
/// Largest supported Gauss-Legendre order.
pub const MAX_LEGENDRE_ORDER: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// Weight `exp(-x^2)` on the real line.
    GaussHermite,
    /// Unit weight on `[-1, 1]`.
    GaussLegendre,
    /// Equally spaced nodes with equal weights.
    Uniform,
}

/// Nodes in increasing order with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: QuadratureKind,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `n` equally spaced points on `[-half_width, half_width]`, each with weight equal to the spacing.
    pub fn uniform(half_width: f64, n: usize) -> Result<Self> {
        if n < 2 || !(half_width > 0.0) {
            return Err(Error::Config(format!(
                "uniform rule needs at least 2 points and a positive half width, got n={n}, L={half_width}"
            )));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        let nodes = (0..n).map(|i| -half_width + h * i as f64).collect();
        Ok(Self {
            nodes,
            weights: vec![h; n],
            kind: QuadratureKind::Uniform,
        })
    }
}

const NEWTON_MAX_ITER: usize = 200;

/// Gauss-Hermite rule for the weight `exp(-x^2)`, exact for polynomials up to
/// degree `2 order - 1`.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_HERMITE_ORDER {
        return Err(Error::Config(format!(
            "Gauss-Hermite order must be in 1..={MAX_HERMITE_ORDER}, got {order}"
        )));
    }
    let n = order;
    let nf = n as f64;
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Golub-Welsch eigenvalues seed a Newton polish on the normalized recurrence.
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut seeds: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    seeds.sort_by(|a, b| b.total_cmp(a));
    for i in 0..(n + 1) / 2 {
        let mut z = seeds[i];
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p1, p2) = hermite_pair(n, z, pim4);
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                let (_, p2) = hermite_pair(n, z, pim4);
                pp = (2.0 * nf).sqrt() * p2;
                converged = true;
                break;
            }
        }
        if !converged || (z - seeds[i]).abs() > 1e-6 * z.abs().max(1.0) {
            return Err(Error::Numeric(format!(
                "Gauss-Hermite root {i} of order {n} did not converge"
            )));
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    nodes.reverse();
    weights.reverse();
    Ok(QuadratureRule {
        nodes,
        weights,
        kind: QuadratureKind::GaussHermite,
    })
}

/// Normalized Hermite polynomials `(p_n(z), p_{n-1}(z))` with `p_0 = pi^{-1/4}`.
fn hermite_pair(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_LEGENDRE_ORDER {
        return Err(Error::Config(format!(
            "Gauss-Legendre order must be in 1..={MAX_LEGENDRE_ORDER}, got {order}"
        )));
    }
    let n = order;
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p1, p2) = legendre_pair(n, z);
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                let (p1, p2) = legendre_pair(n, z);
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numeric(format!(
                "Gauss-Legendre root {i} of order {n} did not converge"
            )));
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        kind: QuadratureKind::GaussLegendre,
    })
}

fn legendre_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
    }
    (p1, p2)
}

/// Normalized oscillator function `phi_n` of the given scale at `x`.
pub fn eval_ho(n: usize, scale: f64, x: f64) -> f64 {
    let mut out = vec![0.0; n + 1];
    ho_values(scale, x, &mut out);
    out[n]
}

/// Fills `out[k] = phi_k(x)` for `k < out.len()`.
pub fn ho_values(scale: f64, x: f64, out: &mut [f64]) {
    let y = scale * x;
    let damp = (-0.5 * y * y).exp();
    hermite_function_recurrence(y, PI.powf(-0.25) * damp * scale.sqrt(), out);
}

/// Fills `out[k] = psi_k(y) exp(y^2 / 2)`, the polynomial part of the
/// normalized Hermite functions. Used inside Gauss-Hermite sums, where the
/// Gaussian factor is carried by the weights.
pub fn hermite_polys(y: f64, out: &mut [f64]) {
    hermite_function_recurrence(y, PI.powf(-0.25), out);
}

fn hermite_function_recurrence(y: f64, first: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = first;
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * y * first;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * y * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// `int phi_m(x) phi_n(x) exp(-u^2 x^2) dx` for basis functions of the given scale.
pub fn gaussian_damped_overlap(m: usize, n: usize, scale: f64, u: f64) -> f64 {
    if (m + n) % 2 == 1 {
        return 0.0;
    }
    let rule = gauss_hermite((m + n) / 2 + 2).expect("order within cap for supported indices");
    let c = (1.0 + (u / scale).powi(2)).sqrt();
    let mut buf = vec![0.0; m.max(n) + 1];
    let mut acc = 0.0;
    for (t, w) in rule.iter() {
        hermite_polys(t / c, &mut buf);
        acc += w * buf[m] * buf[n];
    }
    acc / c
}

/// Gauss-Hermite rules of every order up to a maximum.
#[derive(Debug, Clone)]
pub struct HermiteRuleCache {
    rules: Vec<QuadratureRule>,
}

impl HermiteRuleCache {
    /// Holds rules of every order up to `max_order`.
    pub fn new(max_order: usize) -> Result<Self> {
        let rules = (1..=max_order).map(gauss_hermite).collect::<Result<Vec<_>>>()?;
        Ok(Self { rules })
    }

    pub fn rule(&self, order: usize) -> &QuadratureRule {
        &self.rules[order - 1]
    }

    pub fn max_order(&self) -> usize {
        self.rules.len()
    }
}

/// Damped overlaps for every pair `m, n <= n_max` at one value of `u`.
///
/// Entries with `m + n` odd vanish by parity. Each entry uses a rule of order
/// `(m + n) / 2 + 2` from `cache`, so a value does not depend on the size of
/// the table it was computed in.
pub fn damped_overlap_table(n_max: usize, scale: f64, u: f64, cache: &HermiteRuleCache) -> DMatrix<f64> {
    let size = n_max + 1;
    let mut table = DMatrix::zeros(size, size);
    let c = (1.0 + (u / scale).powi(2)).sqrt();
    let mut buf = vec![0.0; size];
    // Group pairs by the rule order they need.
    for order in 2..=(n_max + 2) {
        let rule = cache.rule(order);
        let s = 2 * (order - 2);
        if s > 2 * n_max {
            break;
        }
        let mut sums = vec![0.0; size];
        // Pairs with m + n = s use rule order s/2 + 2.
        let lo = s.saturating_sub(n_max);
        let hi = s.min(n_max);
        if lo > hi {
            continue;
        }
        for (t, w) in rule.iter() {
            hermite_polys(t / c, &mut buf[..=hi]);
            for m in lo..=hi {
                sums[m] += w * buf[m] * buf[s - m];
            }
        }
        for m in lo..=hi {
            table[(m, s - m)] = sums[m] / c;
        }
    }
    table
}
