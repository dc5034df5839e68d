//! Strong-coupling limit: harmonic wavefunction around the classical
//! configuration, its Schmidt decomposition and the resulting entropies.
//!
//! The relative and centre-of-mass Gaussians factor into two one-dimensional
//! kernels `exp(-[alpha (z - z')^2 + beta (z + z')^2] / 2)`, one per axis. Their
//! Schmidt coefficients are found by a Nystrom discretization and, independently,
//! from the Mehler decomposition of a Gaussian kernel.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classical_geometry, TrapParams};

/// Anisotropies closer to one than this are refused.
pub const MIN_EPSILON_OFFSET: f64 = 1e-6;
/// Largest kernel value allowed on the boundary of the Nystrom square, relative to its maximum.
pub const COVERAGE_TOLERANCE: f64 = 1e-12;
/// Default number of Nystrom points per kernel.
pub const DEFAULT_NYSTROM_POINTS: usize = 400;
/// Allowed deviation of `2 sum lambda` from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;
const WIDEN_FACTOR: f64 = 1.25;
const MAX_WIDENINGS: usize = 60;

/// `exp(-[alpha (z - z')^2 + beta (z + z')^2] / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl KernelSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "kernel coefficients must be positive, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Relative-times-centre-of-mass kernel along the axis of the pair.
    pub fn q_tilde() -> Self {
        Self {
            alpha: 3f64.sqrt(),
            beta: 1.0,
        }
    }

    /// Transverse kernel at anisotropy `epsilon > 1`.
    pub fn transverse(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Self::new((epsilon * epsilon - 1.0).sqrt(), epsilon)
    }

    pub fn eval(&self, z: f64, zp: f64) -> f64 {
        let d = z - zp;
        let s = z + zp;
        (-0.5 * (self.alpha * d * d + self.beta * s * s)).exp()
    }

    /// Largest kernel value on the boundary of `[-L, L]^2`.
    pub fn boundary_maximum(&self, half_width: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        (-2.0 * a * b * half_width * half_width / (a + b)).exp()
    }

    /// `sum_n k_n^2 = int int K^2`.
    pub fn schmidt_norm_squared(&self) -> f64 {
        PI / (2.0 * (self.alpha * self.beta).sqrt())
    }
}

/// Ratio `z` of consecutive Schmidt coefficients of a Gaussian kernel.
pub fn mehler_ratio(spec: &KernelSpec) -> f64 {
    let (a, b) = (spec.alpha.sqrt(), spec.beta.sqrt());
    (a - b) / (a + b)
}

/// Exact Schmidt coefficients `k_n = k_0 z^n` with `k_0 = sqrt(2 pi) / (sqrt(alpha) + sqrt(beta))`.
pub fn mehler_coefficients(spec: &KernelSpec, count: usize) -> Vec<f64> {
    let z = mehler_ratio(spec);
    let k0 = (2.0 * PI).sqrt() / (spec.alpha.sqrt() + spec.beta.sqrt());
    (0..count).map(|n| k0 * z.powi(n as i32)).collect()
}

/// Oscillator scale of the kernel's Schmidt orbitals, `(4 alpha beta)^(1/4)`.
pub fn mehler_scale(spec: &KernelSpec) -> f64 {
    (4.0 * spec.alpha * spec.beta).powf(0.25)
}

/// Equally spaced points on `[-L, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NystromGrid {
    pub half_width: f64,
    pub points: usize,
}

impl NystromGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Grid(format!("half-width must be positive, got {half_width}")));
        }
        if points < 2 {
            return Err(Error::Grid(format!("need at least two points, got {points}")));
        }
        Ok(Self { half_width, points })
    }

    /// `6 max(alpha, beta)^(-1/4)`, widened until the coverage gate passes.
    pub fn for_kernel(spec: &KernelSpec, points: usize) -> Result<Self> {
        let mut grid = Self::new(6.0 * spec.alpha.max(spec.beta).powf(-0.25), points)?;
        for _ in 0..MAX_WIDENINGS {
            if grid.covers(spec) {
                return Ok(grid);
            }
            grid.half_width *= WIDEN_FACTOR;
        }
        Err(Error::Grid(format!(
            "no half-width up to {:.3e} covers the kernel",
            grid.half_width
        )))
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        // Symmetric construction keeps z_i = -z_(N-1-i) exactly.
        (0..self.points)
            .map(|i| {
                let j = self.points - 1 - i;
                0.5 * (i as f64 - j as f64) * h
            })
            .collect()
    }

    pub fn covers(&self, spec: &KernelSpec) -> bool {
        spec.boundary_maximum(self.half_width) < COVERAGE_TOLERANCE
    }

    pub fn doubled(&self) -> Self {
        Self {
            half_width: self.half_width,
            points: 2 * self.points - 1,
        }
    }
}

/// One Schmidt coefficient with its orbital sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtMode {
    pub k: f64,
    /// Unit norm under the grid weights; largest-magnitude sample positive.
    pub orbital: Vec<f64>,
}

/// The `count` largest-magnitude eigenpairs of `A_rs = K(z_r, z_s) dz`.
pub fn nystrom_schmidt(spec: &KernelSpec, grid: &NystromGrid, count: usize) -> Result<Vec<SchmidtMode>> {
    if !grid.covers(spec) {
        return Err(Error::Grid(format!(
            "half-width {} leaves boundary kernel value {:.3e}; widen the grid",
            grid.half_width,
            spec.boundary_maximum(grid.half_width)
        )));
    }
    if count > grid.points {
        return Err(Error::Config(format!(
            "requested {count} modes from a {}-point grid",
            grid.points
        )));
    }
    let z = grid.nodes();
    let h = grid.spacing();
    let n = grid.points;
    // The eigensolver can break down on the large exactly-degenerate null space of a
    // nearly separable kernel; a diagonal shift removes the degeneracy at zero.
    let shift = h;
    let a = DMatrix::from_fn(n, n, |r, s| spec.eval(z[r], z[s]) * h + if r == s { shift } else { 0.0 });
    let mut eig = SymmetricEigen::try_new(a, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("Nystrom eigensolver did not converge".into()))?;
    eig.eigenvalues.iter_mut().for_each(|v| *v -= shift);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("Nystrom eigensolver produced non-finite values".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].abs().total_cmp(&eig.eigenvalues[i].abs()));
    let norm = h.sqrt().recip();
    Ok(order
        .into_iter()
        .take(count)
        .map(|i| {
            let col = eig.eigenvectors.column(i);
            let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            let sign = if pivot < 0.0 { -norm } else { norm };
            SchmidtMode {
                k: eig.eigenvalues[i],
                orbital: col.iter().map(|v| v * sign).collect(),
            }
        })
        .collect())
}

/// Source of the kernel Schmidt coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OccupancyMode {
    /// Nystrom discretization with the given number of points.
    #[default]
    Nystrom,
    /// Exact geometric law of the Gaussian kernels.
    Analytic,
}

/// One distinct asymptotic occupancy; each is shared by the `u` and `v` orbitals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticOccupancy {
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticSpectrum {
    pub epsilon: f64,
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    /// Distinct occupancies, nonincreasing.
    pub occupancies: Vec<AsymptoticOccupancy>,
    /// Every occupancy appears this many times in the full spectrum.
    pub multiplicity: usize,
    /// `C^2 = 2 3^(1/4) epsilon^(1/2) (epsilon^2 - 1)^(1/4) / pi^2` of the infinite-g wavefunction.
    pub norm_constant_squared: f64,
}

impl AsymptoticSpectrum {
    /// `multiplicity * sum lambda`.
    pub fn total(&self) -> f64 {
        self.multiplicity as f64 * self.occupancies.iter().map(|o| o.lambda).sum::<f64>()
    }

    /// The first `count` distinct occupancies, zero-padded.
    pub fn leading(&self, count: usize) -> Vec<f64> {
        (0..count)
            .map(|i| self.occupancies.get(i).map_or(0.0, |o| o.lambda))
            .collect()
    }

    /// `1 - (1/2) sum lambda^2` over the full spectrum, singlet spin factor included.
    pub fn linear_entropy(&self) -> f64 {
        let purity: f64 = self.occupancies.iter().map(|o| o.lambda * o.lambda).sum();
        1.0 - 0.5 * self.multiplicity as f64 * purity
    }

    /// Spin bit plus the spatial von Neumann entropy of the listed occupancies.
    pub fn vn_entropy(&self) -> f64 {
        let spatial: f64 = self
            .occupancies
            .iter()
            .filter(|o| o.lambda > 0.0)
            .map(|o| -o.lambda * o.lambda.log2())
            .sum();
        1.0 + self.multiplicity as f64 * spatial
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon >= 1.0 + MIN_EPSILON_OFFSET) {
        return Err(Error::Domain(format!(
            "asymptotic occupancies need epsilon > 1 + {MIN_EPSILON_OFFSET:e}, got {epsilon}; \
             as epsilon -> 1+ all occupancies tend to zero and the linear entropy tends to one"
        )));
    }
    Ok(())
}

/// `C^2` at infinite coupling.
pub fn asymptotic_norm_squared(epsilon: f64) -> f64 {
    2.0 * 3f64.powf(0.25) * epsilon.sqrt() * (epsilon * epsilon - 1.0).powf(0.25) / (PI * PI)
}

/// Kernel coefficients for one axis.
fn kernel_coefficients(spec: &KernelSpec, count: usize, mode: OccupancyMode, points: usize) -> Result<Vec<f64>> {
    match mode {
        OccupancyMode::Analytic => Ok(mehler_coefficients(spec, count)),
        OccupancyMode::Nystrom => {
            let grid = NystromGrid::for_kernel(spec, points)?;
            Ok(nystrom_schmidt(spec, &grid, count)?.into_iter().map(|m| m.k).collect())
        }
    }
}

/// `lambda_nm = C^2 (k_n^(1) k_m^(2))^2` for `n < n_cut`, `m < m_cut`.
pub fn asymptotic_occupancies(epsilon: f64, n_cut: usize, m_cut: usize, mode: OccupancyMode) -> Result<AsymptoticSpectrum> {
    asymptotic_occupancies_with(epsilon, n_cut, m_cut, mode, DEFAULT_NYSTROM_POINTS)
}

pub fn asymptotic_occupancies_with(
    epsilon: f64,
    n_cut: usize,
    m_cut: usize,
    mode: OccupancyMode,
    points: usize,
) -> Result<AsymptoticSpectrum> {
    check_epsilon(epsilon)?;
    if n_cut == 0 || m_cut == 0 {
        return Err(Error::Config("occupancy cutoffs must be positive".into()));
    }
    let kx = kernel_coefficients(&KernelSpec::q_tilde(), n_cut, mode, points)?;
    let ky = kernel_coefficients(&KernelSpec::transverse(epsilon)?, m_cut, mode, points)?;
    let c2 = asymptotic_norm_squared(epsilon);
    let mut occupancies: Vec<AsymptoticOccupancy> = kx
        .iter()
        .enumerate()
        .flat_map(|(n, a)| {
            ky.iter().enumerate().map(move |(m, b)| AsymptoticOccupancy {
                n,
                m,
                lambda: c2 * (a * b) * (a * b),
            })
        })
        .collect();
    occupancies.sort_by(|a, b| b.lambda.total_cmp(&a.lambda).then((a.n, a.m).cmp(&(b.n, b.m))));
    let spectrum = AsymptoticSpectrum {
        epsilon,
        kx,
        ky,
        occupancies,
        multiplicity: 2,
        norm_constant_squared: c2,
    };
    let total = spectrum.total();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Accuracy {
            what: format!("occupancies at epsilon = {epsilon} sum to {total:.9}; raise the cutoffs or widen the grid"),
            estimate: (total - 1.0).abs(),
            tolerance: NORMALIZATION_TOLERANCE,
        });
    }
    Ok(spectrum)
}

/// Squared Mehler ratios `(q_x, q_y)`: the geometric occupancy decay along each axis.
pub fn occupancy_ratios(epsilon: f64) -> Result<(f64, f64)> {
    let qx = mehler_ratio(&KernelSpec::q_tilde()).powi(2);
    let qy = mehler_ratio(&KernelSpec::transverse(epsilon)?).powi(2);
    Ok((qx, qy))
}

/// Closed-form infinite-g linear entropy of the lowest singlet.
pub fn asymptotic_linear_entropy(epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 1.0) {
        return Err(Error::Domain(format!("closed-form linear entropy needs epsilon > 1, got {epsilon}")));
    }
    let root = (epsilon * epsilon - 1.0).sqrt();
    let num = 3f64.powf(0.25) * root.sqrt() * (epsilon * (1.0 - 3f64.sqrt() / 2.0)).sqrt();
    Ok(1.0 - num / (epsilon + root))
}

/// Linear entropy summed over the geometric spectrum,
/// `1 - (1 - q_x)(1 - q_y) / (4 (1 + q_x)(1 + q_y))`.
pub fn asymptotic_linear_entropy_spectrum(epsilon: f64) -> Result<f64> {
    let (qx, qy) = occupancy_ratios(epsilon)?;
    Ok(1.0 - 0.25 * (1.0 - qx) * (1.0 - qy) / ((1.0 + qx) * (1.0 + qy)))
}

/// Entropy value with a bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub value: f64,
    pub tail_bound: f64,
}

/// Tail of a geometric distribution `p_k = (1 - q) q^k` beyond `n`: probability and entropy (bits).
fn geometric_tail(q: f64, n: usize) -> (f64, f64) {
    if q == 0.0 {
        return (0.0, 0.0);
    }
    let mass = q.powi(n as i32);
    let entropy = mass * (-(1.0 - q).log2() - (n as f64 + q / (1.0 - q)) * q.log2());
    (mass, entropy)
}

const MAX_ENTROPY_TERMS: usize = 200_000;

/// Infinite-g von Neumann entropy of the lowest singlet, in bits.
///
/// Terms `-2 lambda log2 lambda` are summed over the doubled product spectrum
/// until the neglected probability falls below `tail_tolerance`; the exact
/// entropy of the neglected geometric tails bounds the truncation error.
pub fn asymptotic_vn_entropy_estimate(epsilon: f64, tail_tolerance: f64) -> Result<EntropyEstimate> {
    check_epsilon(epsilon)?;
    if !(tail_tolerance > 0.0 && tail_tolerance < 1.0) {
        return Err(Error::Config(format!("tail tolerance must lie in (0, 1), got {tail_tolerance}")));
    }
    let (qx, qy) = occupancy_ratios(epsilon)?;
    let cut = |q: f64| -> Result<usize> {
        if q == 0.0 {
            return Ok(1);
        }
        let n = ((0.5 * tail_tolerance).ln() / q.ln()).ceil().max(1.0) as usize;
        if n > MAX_ENTROPY_TERMS {
            return Err(Error::Accuracy {
                what: format!("entropy tail at epsilon = {epsilon} not bounded within {MAX_ENTROPY_TERMS} terms"),
                estimate: q.powi(MAX_ENTROPY_TERMS as i32),
                tolerance: tail_tolerance,
            });
        }
        Ok(n)
    };
    let (nx, ny) = (cut(qx)?, cut(qy)?);
    let px: Vec<f64> = (0..nx).map(|n| (1.0 - qx) * qx.powi(n as i32)).collect();
    let py: Vec<f64> = (0..ny).map(|m| (1.0 - qy) * qy.powi(m as i32)).collect();
    let mut spatial = 0.0;
    for a in &px {
        for b in &py {
            let lambda = 0.5 * a * b;
            if lambda > 0.0 {
                spatial -= 2.0 * lambda * lambda.log2();
            }
        }
    }
    let (mx, hx) = geometric_tail(qx, nx);
    let (my, hy) = geometric_tail(qy, ny);
    // Neglected pairs have n >= nx or m >= ny; with lambda = p_n p_m / 2 their
    // entropy is at most mass + (tail entropy of one axis) + (tail mass) * (full entropy of the other).
    let (full_x, full_y) = (geometric_tail(qx, 0).1, geometric_tail(qy, 0).1);
    let mass = mx + my;
    let tail_bound = mass + hx + mx * full_y + hy + my * full_x;
    if mass > tail_tolerance {
        return Err(Error::Accuracy {
            what: format!("entropy tail at epsilon = {epsilon}"),
            estimate: mass,
            tolerance: tail_tolerance,
        });
    }
    Ok(EntropyEstimate {
        value: 1.0 + spatial,
        tail_bound,
    })
}

pub fn asymptotic_vn_entropy(epsilon: f64, tail_tolerance: f64) -> Result<f64> {
    Ok(asymptotic_vn_entropy_estimate(epsilon, tail_tolerance)?.value)
}

/// Exchange symmetry of the asymptotic spatial wavefunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSign {
    Plus,
    Minus,
}

/// `C_+-(g, epsilon)` including the finite-g overlap correction.
pub fn norm_constant(t: &TrapParams, sign: PairSign) -> Result<f64> {
    check_epsilon(t.epsilon)?;
    let geo = classical_geometry(t)?;
    let overlap = (-3f64.sqrt() * geo.x_cl * geo.x_cl).exp();
    let factor = match sign {
        PairSign::Plus => 1.0 + overlap,
        PairSign::Minus => 1.0 - overlap,
    };
    if factor <= 0.0 {
        return Err(Error::Domain("antisymmetric asymptotic state vanishes at this coupling".into()));
    }
    Ok(asymptotic_norm_squared(t.epsilon).sqrt() / factor.sqrt())
}

/// `C_+- h(y1, y2) [q(x1, x2) +- q(x2, x1)]` at `r1 = (x1, y1)`, `r2 = (x2, y2)`.
pub fn asymptotic_wavefunction(t: &TrapParams, r1: (f64, f64), r2: (f64, f64), sign: PairSign) -> Result<f64> {
    let c = norm_constant(t, sign)?;
    let x_cl = classical_geometry(t)?.x_cl;
    let eps = t.epsilon;
    let q = |a: f64, b: f64| {
        let d = b - a - x_cl;
        let s = a + b;
        (-0.5 * (3f64.sqrt() * d * d + s * s)).exp()
    };
    let h = KernelSpec::transverse(eps)?.eval(r1.1, r2.1);
    let x = match sign {
        PairSign::Plus => q(r1.0, r2.0) + q(r2.0, r1.0),
        PairSign::Minus => q(r1.0, r2.0) - q(r2.0, r1.0),
    };
    Ok(c * h * x)
}
