//! Matrix elements of `1/r` in the two-dimensional oscillator product basis
//! and assembly of the relative-motion Hamiltonian
//! `H = -Laplacian + x^2 + epsilon^2 y^2 + g / r`.
//!
//! The Coulomb term uses `1/r = (2/sqrt(pi)) int_0^inf exp(-u^2 r^2) du`, which
//! factorizes every `u`-slice into one-dimensional damped overlaps. The outer
//! integral is mapped to `[0, pi/2)` by `u = tan(theta)` and integrated with
//! Gauss-Legendre quadrature.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{damped_overlap_table, gauss_legendre, HermiteRuleCache};
use crate::error::{Error, Result};
use crate::model::{SectorLabel, TrapParams};

/// Default Gauss-Legendre order of the outer `theta` integral.
pub const DEFAULT_OUTER_ORDER: usize = 96;
/// Absolute accuracy target for a single Coulomb element.
pub const ELEMENT_TOLERANCE: f64 = 1e-10;

/// Quantum numbers `(nx, ny)` of a product function `phi_nx(x) phi_ny(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisIndex2D {
    pub nx: usize,
    pub ny: usize,
}

impl BasisIndex2D {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self { nx, ny }
    }

    pub fn quanta(&self) -> usize {
        self.nx + self.ny
    }
}

/// Oscillator scales of the relative basis along x and y.
///
/// The matched choice `(1, sqrt(epsilon))` diagonalizes the `g = 0`
/// Hamiltonian. A dilation `b > 1` divides both scales by `b`, which widens
/// the basis for the strongly correlated states that sit at `|x| ~ (g/2)^{1/3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisScales {
    pub x: f64,
    pub y: f64,
}

impl BasisScales {
    pub fn matched(epsilon: f64) -> Self {
        Self {
            x: 1.0,
            y: epsilon.sqrt(),
        }
    }

    pub fn dilated(epsilon: f64, dilation_x: f64, dilation_y: f64) -> Self {
        Self {
            x: 1.0 / dilation_x,
            y: epsilon.sqrt() / dilation_y,
        }
    }
}

/// Product functions of one parity sector with `nx + ny <= cutoff`,
/// ordered by `(nx + ny, nx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    sector: SectorLabel,
    cutoff: usize,
    scales: BasisScales,
    members: Vec<BasisIndex2D>,
}

impl SectorBasis {
    pub fn new(sector: SectorLabel, cutoff: usize, scales: BasisScales) -> Result<Self> {
        if !(scales.x > 0.0 && scales.y > 0.0) {
            return Err(Error::Config(format!("basis scales must be positive, got {scales:?}")));
        }
        let mut members = Vec::new();
        for total in 0..=cutoff {
            for nx in 0..=total {
                let ny = total - nx;
                if sector.x_parity().matches(nx) && sector.y_parity().matches(ny) {
                    members.push(BasisIndex2D { nx, ny });
                }
            }
        }
        if members.is_empty() {
            return Err(Error::Config(format!(
                "sector {sector} has no basis functions with nx + ny <= {cutoff}"
            )));
        }
        Ok(Self {
            sector,
            cutoff,
            scales,
            members,
        })
    }

    /// Basis with the matched scales for this anisotropy.
    pub fn matched(sector: SectorLabel, cutoff: usize, epsilon: f64) -> Result<Self> {
        Self::new(sector, cutoff, BasisScales::matched(epsilon))
    }

    pub fn sector(&self) -> SectorLabel {
        self.sector
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn scales(&self) -> BasisScales {
        self.scales
    }

    pub fn members(&self) -> &[BasisIndex2D] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn max_nx(&self) -> usize {
        self.members.iter().map(|m| m.nx).max().unwrap_or(0)
    }

    pub fn max_ny(&self) -> usize {
        self.members.iter().map(|m| m.ny).max().unwrap_or(0)
    }

    pub fn position(&self, idx: BasisIndex2D) -> Option<usize> {
        self.members.iter().position(|&m| m == idx)
    }
}

/// Quadrature settings for the Coulomb elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoulombQuadrature {
    /// Gauss-Legendre order of the outer integral.
    pub outer_order: usize,
}

impl Default for CoulombQuadrature {
    fn default() -> Self {
        Self {
            outer_order: DEFAULT_OUTER_ORDER,
        }
    }
}

impl CoulombQuadrature {
    pub fn with_order(outer_order: usize) -> Self {
        Self { outer_order }
    }

    pub fn doubled(self) -> Self {
        Self {
            outer_order: 2 * self.outer_order,
        }
    }
}

/// Damped-overlap tables at every outer quadrature node.
#[derive(Debug, Clone)]
pub struct CoulombTables {
    weights: Vec<f64>,
    x: Vec<DMatrix<f64>>,
    y: Vec<DMatrix<f64>>,
}

impl CoulombTables {
    pub fn new(scales: BasisScales, nx_max: usize, ny_max: usize, quad: CoulombQuadrature) -> Result<Self> {
        let rule = gauss_legendre(quad.outer_order)?;
        let cache = HermiteRuleCache::new(nx_max.max(ny_max) + 2)?;
        let mut weights = Vec::with_capacity(rule.order());
        let mut x = Vec::with_capacity(rule.order());
        let mut y = Vec::with_capacity(rule.order());
        for (t, w) in rule.iter() {
            let theta = 0.25 * PI * (t + 1.0);
            let u = theta.tan();
            let sec2 = 1.0 + u * u;
            weights.push(2.0 / PI.sqrt() * 0.25 * PI * w * sec2);
            x.push(damped_overlap_table(nx_max, scales.x, u, &cache));
            y.push(damped_overlap_table(ny_max, scales.y, u, &cache));
        }
        Ok(Self { weights, x, y })
    }

    /// `<a| 1/r |b>`; indices must lie within the table ranges.
    pub fn element(&self, a: BasisIndex2D, b: BasisIndex2D) -> f64 {
        if (a.nx + b.nx) % 2 == 1 || (a.ny + b.ny) % 2 == 1 {
            return 0.0;
        }
        self.weights
            .iter()
            .zip(self.x.iter().zip(&self.y))
            .map(|(w, (tx, ty))| w * tx[(a.nx, b.nx)] * ty[(a.ny, b.ny)])
            .sum()
    }
}

/// `<a| 1/sqrt(x^2 + y^2) |b>` in the matched basis for anisotropy `epsilon`.
///
/// The result is checked against a rule of twice the order; a difference
/// above [`ELEMENT_TOLERANCE`] is reported as an accuracy error.
pub fn coulomb_element(a: BasisIndex2D, b: BasisIndex2D, epsilon: f64, quad: CoulombQuadrature) -> Result<f64> {
    if !(epsilon >= 1.0) {
        return Err(Error::Domain(format!(
            "Coulomb elements use the canonical form epsilon >= 1, got {epsilon}"
        )));
    }
    let scales = BasisScales::matched(epsilon);
    let nx = a.nx.max(b.nx);
    let ny = a.ny.max(b.ny);
    let value = CoulombTables::new(scales, nx, ny, quad)?.element(a, b);
    let check = CoulombTables::new(scales, nx, ny, quad.doubled())?.element(a, b);
    let estimate = (value - check).abs();
    if estimate > ELEMENT_TOLERANCE {
        return Err(Error::Accuracy {
            what: format!("Coulomb element <{a:?}|1/r|{b:?}> at outer order {}", quad.outer_order),
            estimate,
            tolerance: ELEMENT_TOLERANCE,
        });
    }
    Ok(value)
}

/// Coulomb matrix over a sector basis.
///
/// The most oscillatory diagonal entries are recomputed with a doubled outer
/// order; the assembly fails if they move by more than [`ELEMENT_TOLERANCE`].
pub fn coulomb_matrix(basis: &SectorBasis, quad: CoulombQuadrature) -> Result<DMatrix<f64>> {
    let nx = basis.max_nx();
    let ny = basis.max_ny();
    let tables = CoulombTables::new(basis.scales(), nx, ny, quad)?;
    let members = basis.members();
    let n = members.len();
    let mut vc = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = tables.element(members[i], members[j]);
            vc[(i, j)] = v;
            vc[(j, i)] = v;
        }
    }

    let probes = probe_indices(members);
    let check = CoulombTables::new(basis.scales(), nx, ny, quad.doubled())?;
    for &i in &probes {
        let m = members[i];
        let estimate = (check.element(m, m) - vc[(i, i)]).abs();
        if estimate > ELEMENT_TOLERANCE {
            return Err(Error::Accuracy {
                what: format!(
                    "Coulomb diagonal element {m:?} at outer order {}; raise the quadrature order",
                    quad.outer_order
                ),
                estimate,
                tolerance: ELEMENT_TOLERANCE,
            });
        }
    }
    Ok(vc)
}

fn probe_indices(members: &[BasisIndex2D]) -> Vec<usize> {
    let arg = |key: fn(&BasisIndex2D) -> usize| {
        members
            .iter()
            .enumerate()
            .max_by_key(|(_, m)| key(m))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let mut probes = vec![0, arg(|m| m.nx), arg(|m| m.ny), members.len() - 1];
    probes.sort_unstable();
    probes.dedup();
    probes
}

/// One-dimensional `-d^2/dx^2 + omega^2 x^2` in oscillator functions of scale `s`.
fn oscillator_1d(m: usize, n: usize, scale: f64, omega: f64) -> f64 {
    let s2 = scale * scale;
    let kin = s2;
    let pot = omega * omega / s2;
    if m == n {
        0.5 * (2.0 * n as f64 + 1.0) * (kin + pot)
    } else if m + 2 == n || n + 2 == m {
        let k = m.min(n) as f64;
        0.5 * ((k + 1.0) * (k + 2.0)).sqrt() * (pot - kin)
    } else {
        0.0
    }
}

/// Confinement part `-Laplacian + x^2 + epsilon^2 y^2` over a sector basis.
pub fn oscillator_matrix(epsilon: f64, basis: &SectorBasis) -> DMatrix<f64> {
    let members = basis.members();
    let scales = basis.scales();
    let n = members.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (members[i], members[j]);
        let mut v = 0.0;
        if a.ny == b.ny {
            v += oscillator_1d(a.nx, b.nx, scales.x, 1.0);
        }
        if a.nx == b.nx {
            v += oscillator_1d(a.ny, b.ny, scales.y, epsilon);
        }
        v
    })
}

/// Confinement and Coulomb parts of the relative Hamiltonian, kept apart so
/// the coupling can be varied without re-integrating.
#[derive(Debug, Clone)]
pub struct RelativeHamiltonian {
    pub oscillator: DMatrix<f64>,
    pub coulomb: DMatrix<f64>,
}

impl RelativeHamiltonian {
    pub fn build(epsilon: f64, basis: &SectorBasis, quad: CoulombQuadrature) -> Result<Self> {
        Ok(Self {
            oscillator: oscillator_matrix(epsilon, basis),
            coulomb: coulomb_matrix(basis, quad)?,
        })
    }

    pub fn at_coupling(&self, g: f64) -> DMatrix<f64> {
        &self.oscillator + &self.coulomb * g
    }
}

/// `H = D + g Vc` over the sector basis.
pub fn assemble_relative_hamiltonian(
    t: &TrapParams,
    basis: &SectorBasis,
    quad: CoulombQuadrature,
) -> Result<DMatrix<f64>> {
    if !t.is_canonical() {
        return Err(Error::Domain(format!(
            "relative Hamiltonian expects epsilon >= 1, got {}; use TrapParams::canonical",
            t.epsilon
        )));
    }
    Ok(RelativeHamiltonian::build(t.epsilon, basis, quad)?.at_coupling(t.g))
}
