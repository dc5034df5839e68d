//! Natural-orbital occupancies and entanglement entropies of two-electron
//! eigenstates.
//!
//! The spatial wavefunction is expanded as `psi(r1, r2) = sum_ab C_ab chi_a(r1) chi_b(r2)`
//! over a product basis of single-particle oscillator functions. The spatial
//! reduced density matrix is `C C^T`, so the occupancies are the squared
//! singular values of `C`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::{gauss_hermite, hermite_polys};
use crate::coulomb::BasisIndex2D;
use crate::error::{Error, Result};
use crate::model::{slater_rank_rule, SectorLabel, SlaterRank};
use crate::relative::TwoBodyState;

/// Minimum captured norm of the single-particle expansion.
pub const COMPLETENESS_GATE: f64 = 0.999;
/// Largest deviation of the occupancy sum from one that is renormalized away.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-3;
/// Occupancies below this fraction of the largest count as zero for the Slater rank.
pub const ZERO_OCCUPANCY: f64 = 1e-6;
const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Behaviour of the spatial wavefunction under exchange of the electrons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exchange {
    Symmetric,
    Antisymmetric,
}

impl Exchange {
    pub fn of(sector: &SectorLabel) -> Self {
        if sector.is_singlet() {
            Exchange::Symmetric
        } else {
            Exchange::Antisymmetric
        }
    }

    fn sign(self) -> f64 {
        match self {
            Exchange::Symmetric => 1.0,
            Exchange::Antisymmetric => -1.0,
        }
    }
}

/// Single-particle product functions `phi_ax(x) phi_ay(y)` with `ax + ay <= cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleParticleBasis {
    pub cutoff: usize,
    pub scale_x: f64,
    pub scale_y: f64,
    pub members: Vec<BasisIndex2D>,
}

impl SingleParticleBasis {
    pub fn new(cutoff: usize, scale_x: f64, scale_y: f64) -> Result<Self> {
        if !(scale_x > 0.0 && scale_y > 0.0) {
            return Err(Error::Config("single-particle scales must be positive".into()));
        }
        let members = (0..=cutoff)
            .flat_map(|total| (0..=total).map(move |ax| BasisIndex2D::new(ax, total - ax)))
            .collect();
        Ok(Self {
            cutoff,
            scale_x,
            scale_y,
            members,
        })
    }

    /// Scales of the one-particle confinement `2 x^2 + 2 epsilon^2 y^2`, divided by
    /// the dilation factors.
    pub fn matched(cutoff: usize, epsilon: f64, dilation: (f64, f64)) -> Result<Self> {
        Self::new(
            cutoff,
            2f64.sqrt() / dilation.0,
            (2.0 * epsilon).sqrt() / dilation.1,
        )
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Settings of the single-particle expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpOptions {
    /// Total-quanta cutoff of the single-particle basis.
    pub cutoff: usize,
    /// Single-particle dilation factors; `None` reuses the relative basis dilation.
    pub dilation: Option<(f64, f64)>,
}

impl SpOptions {
    pub fn with_cutoff(cutoff: usize) -> Self {
        Self { cutoff, dilation: None }
    }
}

/// Expansion coefficients of a two-electron spatial wavefunction.
#[derive(Debug, Clone)]
pub struct CoefficientMatrix {
    pub matrix: DMatrix<f64>,
    pub symmetry: Exchange,
    /// Captured norm `sum C^2`.
    pub completeness: f64,
    /// Single-particle functions labelling rows and columns, when known.
    pub sp_basis: Option<SingleParticleBasis>,
    /// Index groups that `C` never couples to each other (parity classes).
    blocks: Vec<Vec<usize>>,
}

impl CoefficientMatrix {
    /// Wraps a raw matrix, checking the declared exchange symmetry.
    pub fn from_matrix(matrix: DMatrix<f64>, symmetry: Exchange) -> Result<Self> {
        let n = matrix.nrows();
        Self::with_blocks(matrix, symmetry, vec![(0..n).collect()], None)
    }

    fn with_blocks(
        matrix: DMatrix<f64>,
        symmetry: Exchange,
        blocks: Vec<Vec<usize>>,
        sp_basis: Option<SingleParticleBasis>,
    ) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Data(format!(
                "coefficient matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (&matrix - matrix.transpose() * symmetry.sign()).amax();
        if asym > SYMMETRY_TOLERANCE * scale.max(1.0) {
            return Err(Error::Data(format!(
                "coefficient matrix is not {symmetry:?} (deviation {asym:.3e})"
            )));
        }
        let completeness = matrix.norm_squared();
        Ok(Self {
            matrix,
            symmetry,
            completeness,
            sp_basis,
            blocks,
        })
    }

    /// `1 - w Tr[(C C^T)^2] / (sum C^2)^2` without diagonalizing anything.
    pub fn linear_entropy(&self, sector: &SectorLabel) -> f64 {
        let rho = &self.matrix * self.matrix.transpose();
        1.0 - spin_purity(sector) * rho.norm_squared() / (self.completeness * self.completeness)
    }
}

/// `T[n][(a, b)] = int int chi_a(x1) chi_b(x2) Phi_0(X) phi_n(x2 - x1) dx1 dx2`
/// with `X = (x1 + x2) / 2`, for one Cartesian direction.
///
/// In the coordinates `u = (x1 + x2)/sqrt2`, `v = (x2 - x1)/sqrt2` the
/// Gaussian factors combine into `exp(-A u^2 - B v^2)`, so a tensor Gauss-Hermite
/// rule integrates every entry exactly.
fn pair_tensor(rel_max: usize, rel_scale: f64, cm_scale: f64, sp_max: usize, sp_scale: f64) -> Result<Vec<DMatrix<f64>>> {
    let a = 0.5 * (sp_scale * sp_scale + 0.5 * cm_scale * cm_scale);
    let b = 0.5 * (sp_scale * sp_scale + 2.0 * rel_scale * rel_scale);
    let order = (2 * sp_max + rel_max) / 2 + 2;
    let rule = gauss_hermite(order)?;
    let k = rule.order();
    let nodes = k * k;
    let mut h1 = DMatrix::zeros(nodes, sp_max + 1);
    let mut h2 = DMatrix::zeros(nodes, sp_max + 1);
    let mut hn = DMatrix::zeros(nodes, rel_max + 1);
    let mut w = vec![0.0; nodes];
    let mut buf_sp = vec![0.0; sp_max + 1];
    let mut buf_rel = vec![0.0; rel_max + 1];
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    for (i, (tu, wu)) in rule.iter().enumerate() {
        let u = tu / a.sqrt();
        for (j, (tv, wv)) in rule.iter().enumerate() {
            let v = tv / b.sqrt();
            let row = i * k + j;
            w[row] = wu * wv;
            let x1 = s2 * (u - v);
            let x2 = s2 * (u + v);
            let rel = 2f64.sqrt() * v;
            hermite_polys(sp_scale * x1, &mut buf_sp);
            h1.row_mut(row).iter_mut().zip(&buf_sp).for_each(|(d, s)| *d = *s);
            hermite_polys(sp_scale * x2, &mut buf_sp);
            h2.row_mut(row).iter_mut().zip(&buf_sp).for_each(|(d, s)| *d = *s);
            hermite_polys(rel_scale * rel, &mut buf_rel);
            hn.row_mut(row).iter_mut().zip(&buf_rel).for_each(|(d, s)| *d = *s);
        }
    }
    let prefactor =
        sp_scale * (cm_scale * rel_scale).sqrt() * std::f64::consts::PI.powf(-0.25) / (a * b).sqrt();
    let h1t = h1.transpose();
    let mut out = Vec::with_capacity(rel_max + 1);
    for n in 0..=rel_max {
        let mut scaled = h2.clone();
        for (row, mut r) in scaled.row_iter_mut().enumerate() {
            r *= w[row] * hn[(row, n)] * prefactor;
        }
        let mut t = &h1t * scaled;
        // Exact zeros where the integrand is odd.
        for i in 0..=sp_max {
            for j in 0..=sp_max {
                if (i + j + n) % 2 == 1 {
                    t[(i, j)] = 0.0;
                }
            }
        }
        out.push(t);
    }
    Ok(out)
}

/// `C_ab = <chi_a(r1) chi_b(r2) | psi>` for the state with its centre of mass
/// in the ground state, with the completeness gate enforced.
pub fn single_particle_coefficients(state: &TwoBodyState, sp_cutoff: usize) -> Result<CoefficientMatrix> {
    single_particle_coefficients_with(state, &SpOptions::with_cutoff(sp_cutoff))
}

pub fn single_particle_coefficients_with(state: &TwoBodyState, opts: &SpOptions) -> Result<CoefficientMatrix> {
    let c = coefficients_ungated(state, opts)?;
    if c.completeness < COMPLETENESS_GATE {
        return Err(Error::Truncation {
            completeness: c.completeness,
            required: COMPLETENESS_GATE,
        });
    }
    Ok(c)
}

/// As [`single_particle_coefficients_with`] but without the completeness gate;
/// used by convergence studies that report the captured norm.
pub fn coefficients_ungated(state: &TwoBodyState, opts: &SpOptions) -> Result<CoefficientMatrix> {
    if state.cm_quanta != (0, 0) {
        return Err(Error::Config("single-particle expansion supports the centre-of-mass ground state only".into()));
    }
    let basis = &state.basis;
    let rel_scales = basis.scales();
    let eps = state.trap.epsilon;
    let dilation = opts.dilation.unwrap_or((1.0 / rel_scales.x, eps.sqrt() / rel_scales.y));
    let sp = SingleParticleBasis::matched(opts.cutoff, eps, dilation)?;
    let sp_max = opts.cutoff;
    let tx = pair_tensor(basis.max_nx(), rel_scales.x, 2.0, sp_max, sp.scale_x)?;
    let ty = pair_tensor(basis.max_ny(), rel_scales.y, 2.0 * eps.sqrt(), sp_max, sp.scale_y)?;

    // G[nx][(ay, by)] = sum_ny c_(nx, ny) Ty[ny][(ay, by)]
    let mut g: Vec<Option<DMatrix<f64>>> = vec![None; basis.max_nx() + 1];
    for (m, &coef) in basis.members().iter().zip(state.rel_coefficients.iter()) {
        let entry = g[m.nx].get_or_insert_with(|| DMatrix::zeros(sp_max + 1, sp_max + 1));
        *entry += &ty[m.ny] * coef;
    }
    let active: Vec<(usize, &DMatrix<f64>)> = g.iter().enumerate().filter_map(|(nx, m)| m.as_ref().map(|m| (nx, m))).collect();

    let sector = state.sector;
    let px = sector.x_parity().bit();
    let py = sector.y_parity().bit();
    let n = sp.len();
    let mut matrix = DMatrix::zeros(n, n);
    for (i, a) in sp.members.iter().enumerate() {
        for (j, b) in sp.members.iter().enumerate() {
            if (a.nx + b.nx) % 2 != px || (a.ny + b.ny) % 2 != py {
                continue;
            }
            matrix[(i, j)] = active
                .iter()
                .map(|(nx, gm)| tx[*nx][(a.nx, b.nx)] * gm[(a.ny, b.ny)])
                .sum();
        }
    }

    // Parity classes p and p + sector parity are coupled; everything else is not.
    let class = |m: &BasisIndex2D| (m.nx % 2, m.ny % 2);
    let mut blocks = Vec::new();
    for cx in 0..2 {
        for cy in 0..2 {
            let partner = ((cx + px) % 2, (cy + py) % 2);
            if partner < (cx, cy) {
                continue;
            }
            let idx: Vec<usize> = sp
                .members
                .iter()
                .enumerate()
                .filter(|(_, m)| class(m) == (cx, cy) || class(m) == partner)
                .map(|(i, _)| i)
                .collect();
            if !idx.is_empty() {
                blocks.push(idx);
            }
        }
    }
    // Symmetrize away rounding before the symmetry check.
    let sign = Exchange::of(&sector).sign();
    let matrix = (&matrix + matrix.transpose() * sign) * 0.5;
    CoefficientMatrix::with_blocks(matrix, Exchange::of(&sector), blocks, Some(sp))
}

/// Ordered occupancies of the spatial reduced density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    /// Nonincreasing occupancies `lambda_l`.
    pub occupancies: Vec<f64>,
    /// Schmidt coefficients `k_l` (signed, symmetric case) or Slater pair
    /// coefficients with `lambda = k^2 / 2` per orbital (antisymmetric case).
    pub coefficients: Vec<f64>,
    /// Antisymmetric case: occupancies come in degenerate pairs.
    pub paired: bool,
    pub completeness: f64,
}

impl SchmidtSpectrum {
    /// Spectrum built directly from occupancies.
    pub fn from_occupancies(mut occupancies: Vec<f64>, paired: bool) -> Self {
        occupancies.sort_by(|a, b| b.total_cmp(a));
        let completeness = occupancies.iter().sum();
        let coefficients = if paired {
            occupancies.iter().step_by(2).map(|l| (2.0 * l).sqrt()).collect()
        } else {
            occupancies.iter().map(|l| l.sqrt()).collect()
        };
        Self {
            occupancies,
            coefficients,
            paired,
            completeness,
        }
    }

    pub fn sum(&self) -> f64 {
        self.occupancies.iter().sum()
    }

    /// Number of occupancies above [`ZERO_OCCUPANCY`] times the largest.
    pub fn nonzero_count(&self) -> usize {
        let Some(&l0) = self.occupancies.first() else {
            return 0;
        };
        self.occupancies.iter().filter(|&&l| l >= ZERO_OCCUPANCY * l0).count()
    }

    pub fn slater_rank(&self, sector: &SectorLabel) -> Result<SlaterRank> {
        slater_rank_rule(sector, self.nonzero_count())
    }

    /// Occupancies scaled to unit sum, after checking the deviation.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        let total = self.sum();
        if !((total - 1.0).abs() <= NORMALIZATION_TOLERANCE) {
            return Err(Error::Data(format!(
                "occupancies sum to {total:.9}, more than {NORMALIZATION_TOLERANCE:e} away from one"
            )));
        }
        Ok(self.occupancies.iter().map(|l| l / total).collect())
    }
}

/// Occupancies and coefficients of `C` from its independent blocks.
pub fn schmidt_spectrum(c: &CoefficientMatrix) -> Result<SchmidtSpectrum> {
    let mut occupancies = Vec::new();
    let mut coefficients = Vec::new();
    for idx in &c.blocks {
        let sub = c.matrix.select_rows(idx).select_columns(idx);
        match c.symmetry {
            Exchange::Symmetric => {
                let eig = SymmetricEigen::try_new(sub, f64::EPSILON, 0)
                    .ok_or_else(|| Error::Numeric("eigensolver failed on a coefficient block".into()))?;
                for &k in eig.eigenvalues.iter() {
                    occupancies.push(k * k);
                    coefficients.push(k);
                }
            }
            Exchange::Antisymmetric => {
                let svd = sub
                    .try_svd(false, false, f64::EPSILON, 0)
                    .ok_or_else(|| Error::Numeric("SVD failed on a coefficient block".into()))?;
                let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
                sv.sort_by(|a, b| b.total_cmp(a));
                for pair in sv.chunks(2) {
                    // Exact degeneracy holds in exact arithmetic; average the rounding away.
                    let s = pair.iter().sum::<f64>() / pair.len() as f64;
                    for _ in pair {
                        occupancies.push(s * s);
                    }
                    coefficients.push(s * 2f64.sqrt());
                }
            }
        }
    }
    occupancies.sort_by(|a, b| b.total_cmp(a));
    coefficients.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    Ok(SchmidtSpectrum {
        occupancies,
        coefficients,
        paired: c.symmetry == Exchange::Antisymmetric,
        completeness: c.completeness,
    })
}

fn spin_entropy(sector: &SectorLabel) -> f64 {
    if sector.spin_projection() == 0 {
        1.0
    } else {
        0.0
    }
}

/// `Tr rho_spin^2`: 1/2 for `s_z = 0`, 1 for `s_z = +-1`.
fn spin_purity(sector: &SectorLabel) -> f64 {
    if sector.spin_projection() == 0 {
        0.5
    } else {
        1.0
    }
}

/// Von Neumann entropy in bits, spin part included.
pub fn vn_entropy(spec: &SchmidtSpectrum, sector: &SectorLabel) -> Result<f64> {
    let lambdas = spec.normalized()?;
    let spatial: f64 = lambdas.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.log2()).sum();
    Ok(spin_entropy(sector) + spatial)
}

/// `1 - Tr rho^2` of the full (spin times space) reduced density matrix.
pub fn linear_entropy(spec: &SchmidtSpectrum, sector: &SectorLabel) -> Result<f64> {
    let lambdas = spec.normalized()?;
    let purity: f64 = lambdas.iter().map(|l| l * l).sum();
    Ok(1.0 - spin_purity(sector) * purity)
}

/// Occupancies and entropies of one eigenstate.
#[derive(Debug, Clone, PartialEq)]
pub struct Entanglement {
    pub sector: SectorLabel,
    pub spectrum: SchmidtSpectrum,
    pub vn_entropy: f64,
    pub linear_entropy: f64,
}

pub fn entanglement_of(state: &TwoBodyState, opts: &SpOptions) -> Result<Entanglement> {
    let c = single_particle_coefficients_with(state, opts)?;
    let spectrum = schmidt_spectrum(&c)?;
    Ok(Entanglement {
        sector: state.sector,
        vn_entropy: vn_entropy(&spectrum, &state.sector)?,
        linear_entropy: linear_entropy(&spectrum, &state.sector)?,
        spectrum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrapParams;
    use crate::relative::{eigensolve_sector, eigensolve_sector_with, Dilation, SolverOptions};
    use proptest::prelude::*;

    fn sector(code: &str) -> SectorLabel {
        SectorLabel::parse(code).unwrap()
    }

    #[test]
    fn product_state_spectrum() {
        let c = CoefficientMatrix::from_matrix(DMatrix::from_element(1, 1, 1.0), Exchange::Symmetric).unwrap();
        let s = schmidt_spectrum(&c).unwrap();
        assert_eq!(s.occupancies, vec![1.0]);
        assert_eq!(s.slater_rank(&sector("ee")).unwrap(), SlaterRank(1));
    }

    #[test]
    fn single_determinant_spectrum() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = DMatrix::from_row_slice(2, 2, &[0.0, h, -h, 0.0]);
        let c = CoefficientMatrix::from_matrix(m, Exchange::Antisymmetric).unwrap();
        let s = schmidt_spectrum(&c).unwrap();
        assert!(s.paired);
        assert!((s.occupancies[0] - 0.5).abs() < 1e-15 && (s.occupancies[1] - 0.5).abs() < 1e-15);
        assert!((s.coefficients[0] - 1.0).abs() < 1e-15);
        let up = sector("oe").with_spin_projection(1).unwrap();
        assert_eq!(s.slater_rank(&up).unwrap(), SlaterRank(1));
        assert_eq!(s.slater_rank(&sector("oe")).unwrap(), SlaterRank(2));
    }

    #[test]
    fn constructed_diagonal_spectrum() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.9f64.sqrt(), -(0.1f64.sqrt())]));
        let c = CoefficientMatrix::from_matrix(m, Exchange::Symmetric).unwrap();
        let s = schmidt_spectrum(&c).unwrap();
        assert!((s.occupancies[0] - 0.9).abs() < 1e-15 && (s.occupancies[1] - 0.1).abs() < 1e-15);
        assert!((s.coefficients[0] - 0.9f64.sqrt()).abs() < 1e-15);
        assert!((s.coefficients[1] + 0.1f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetry_violation_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.1, 0.5]);
        assert!(matches!(CoefficientMatrix::from_matrix(m, Exchange::Symmetric), Err(Error::Data(_))));
    }

    #[test]
    fn entropy_examples() {
        let pure = SchmidtSpectrum::from_occupancies(vec![1.0], false);
        let up = sector("oe").with_spin_projection(1).unwrap();
        assert_eq!(vn_entropy(&pure, &up).unwrap(), 0.0);
        assert_eq!(vn_entropy(&pure, &sector("ee")).unwrap(), 1.0);
        assert_eq!(linear_entropy(&pure, &sector("ee")).unwrap(), 0.5);

        let half = SchmidtSpectrum::from_occupancies(vec![0.5, 0.5], false);
        assert!((vn_entropy(&half, &sector("ee")).unwrap() - 2.0).abs() < 1e-15);
        let pair = SchmidtSpectrum::from_occupancies(vec![0.5, 0.5], true);
        assert!((linear_entropy(&pair, &up).unwrap() - 0.5).abs() < 1e-15);

        let quarters = SchmidtSpectrum::from_occupancies(vec![0.25; 4], false);
        assert!((vn_entropy(&quarters, &sector("ee")).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_spectrum_is_rejected() {
        let s = SchmidtSpectrum::from_occupancies(vec![0.7, 0.2], false);
        assert!(matches!(vn_entropy(&s, &sector("ee")), Err(Error::Data(_))));
        assert!(linear_entropy(&s, &sector("ee")).is_err());
        // Within tolerance the spectrum is renormalized.
        let s = SchmidtSpectrum::from_occupancies(vec![0.9995], false);
        assert!((linear_entropy(&s, &sector("ee")).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn noninteracting_singlet_is_a_product() {
        let t = TrapParams::new(0.0, 1.3).unwrap();
        let st = &eigensolve_sector(&t, sector("ee"), 8, 1).unwrap()[0];
        let c = single_particle_coefficients(st, 8).unwrap();
        let big: Vec<f64> = c.matrix.iter().copied().filter(|v| v.abs() > 1e-12).collect();
        assert_eq!(big.len(), 1);
        assert!((big[0] - 1.0).abs() < 1e-12);
        let e = entanglement_of(st, &SpOptions::with_cutoff(8)).unwrap();
        assert!((e.spectrum.occupancies[0] - 1.0).abs() < 1e-10);
        assert!((e.vn_entropy - 1.0).abs() < 1e-10);
        assert!((e.linear_entropy - 0.5).abs() < 1e-10);
    }

    #[test]
    fn noninteracting_triplet_is_one_determinant() {
        let t = TrapParams::new(0.0, 1.6).unwrap();
        let st = &eigensolve_sector(&t, sector("oe"), 8, 1).unwrap()[0];
        let c = single_particle_coefficients(st, 8).unwrap();
        let mut big: Vec<f64> = c.matrix.iter().copied().filter(|v| v.abs() > 1e-12).collect();
        big.sort_by(f64::total_cmp);
        assert_eq!(big.len(), 2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((big[0] + h).abs() < 1e-12 && (big[1] - h).abs() < 1e-12);
        let s = schmidt_spectrum(&c).unwrap();
        assert!((s.occupancies[0] - 0.5).abs() < 1e-12 && (s.occupancies[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matched_expansion_is_complete() {
        let t = TrapParams::new(6.0, 1.4).unwrap();
        for code in ["ee", "oo", "eo", "oe"] {
            let st = &eigensolve_sector(&t, sector(code), 16, 1).unwrap()[0];
            let c = single_particle_coefficients(st, 16).unwrap();
            assert!((c.completeness - 1.0).abs() < 1e-10, "{code}: {}", c.completeness);
            assert!(c.completeness <= 1.0 + 1e-12);
            let s = schmidt_spectrum(&c).unwrap();
            assert!((s.sum() - c.completeness).abs() < 1e-8);
            // Two routes to the linear entropy.
            let l1 = linear_entropy(&s, &st.sector).unwrap();
            let l2 = c.linear_entropy(&st.sector);
            assert!((l1 - l2).abs() < 1e-10);
        }
    }

    #[test]
    fn triplet_occupancies_are_paired() {
        let t = TrapParams::new(20.0, 1.2).unwrap();
        for code in ["eo", "oe"] {
            let st = &eigensolve_sector(&t, sector(code), 18, 1).unwrap()[0];
            let s = schmidt_spectrum(&single_particle_coefficients(st, 18).unwrap()).unwrap();
            for pair in s.occupancies.chunks(2) {
                assert!((pair[0] - pair[1]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn dilated_expansion_is_gated() {
        let t = TrapParams::new(30.0, 1.3).unwrap();
        let opts = SolverOptions {
            n_max: 20,
            dilation: Dilation::Fixed { x: 1.3, y: 1.2 },
            ..SolverOptions::with_n_max(20)
        };
        let st = &eigensolve_sector_with(&t, sector("ee"), &opts, 1).unwrap()[0];
        let low = coefficients_ungated(st, &SpOptions::with_cutoff(4)).unwrap();
        assert!(low.completeness < COMPLETENESS_GATE);
        assert!(matches!(
            single_particle_coefficients(st, 4),
            Err(Error::Truncation { .. })
        ));
        let high = coefficients_ungated(st, &SpOptions::with_cutoff(30)).unwrap();
        assert!(high.completeness > low.completeness);
        assert!(high.completeness <= 1.0 + 1e-10);
    }

    #[test]
    fn oracle_coefficients_by_direct_quadrature() {
        // Brute-force C_ab on a grid from the relative wavefunction.
        use crate::basis::{ho_values, gauss_legendre};
        let t = TrapParams::new(3.0, 1.5).unwrap();
        let st = &eigensolve_sector(&t, sector("ee"), 10, 1).unwrap()[0];
        let c = single_particle_coefficients(st, 10).unwrap();
        let sp = SingleParticleBasis::matched(10, 1.5, (1.0, 1.0)).unwrap();
        let pick = [(0usize, 0usize), (1, 4), (3, 3)];
        let rule = gauss_legendre(48).unwrap();
        let half = 4.5;
        let pts: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (half * x, half * w)).collect();
        for &(i, j) in &pick {
            let (a, b) = (sp.members[i], sp.members[j]);
            let mut acc = 0.0;
            let mut fa = vec![0.0; 11];
            let mut fb = vec![0.0; 11];
            for &(x1, w1) in &pts {
                for &(x2, w2) in &pts {
                    for &(y1, w3) in &pts {
                        for &(y2, w4) in &pts {
                            ho_values(sp.scale_x, x1, &mut fa);
                            let chi_a = fa[a.nx];
                            ho_values(sp.scale_x, x2, &mut fb);
                            let chi_b = fb[b.nx];
                            ho_values(sp.scale_y, y1, &mut fa);
                            let chi_a = chi_a * fa[a.ny];
                            ho_values(sp.scale_y, y2, &mut fb);
                            let chi_b = chi_b * fb[b.ny];
                            let (cx, cy) = (0.5 * (x1 + x2), 0.5 * (y1 + y2));
                            let cm = 2.0 / std::f64::consts::PI.sqrt()
                                * 1.5f64.powf(0.25)
                                * (-2.0 * cx * cx - 2.0 * 1.5 * cy * cy).exp();
                            let psi = cm * st.relative_amplitude(x2 - x1, y2 - y1);
                            acc += w1 * w2 * w3 * w4 * chi_a * chi_b * psi;
                        }
                    }
                }
            }
            assert!((acc - c.matrix[(i, j)]).abs() < 1e-6, "({i},{j}): {acc} vs {}", c.matrix[(i, j)]);
        }
    }

    proptest! {
        #[test]
        fn occupancies_invariant_under_basis_rotation(angle in 0.0f64..6.28, seed in 0usize..4) {
            let t = TrapParams::new(2.0 + seed as f64, 1.2).unwrap();
            let st = &eigensolve_sector(&t, sector("ee"), 8, 1).unwrap()[0];
            let c = single_particle_coefficients(st, 8).unwrap();
            let n = c.matrix.nrows();
            // Givens rotation between two single-particle functions.
            let (p, q) = (seed, seed + 3);
            let mut r = DMatrix::<f64>::identity(n, n);
            r[(p, p)] = angle.cos();
            r[(q, q)] = angle.cos();
            r[(p, q)] = -angle.sin();
            r[(q, p)] = angle.sin();
            let rotated = &r * &c.matrix * r.transpose();
            let a = schmidt_spectrum(&CoefficientMatrix::from_matrix(c.matrix.clone(), Exchange::Symmetric).unwrap()).unwrap();
            let b = schmidt_spectrum(&CoefficientMatrix::from_matrix(rotated, Exchange::Symmetric).unwrap()).unwrap();
            for (x, y) in a.occupancies.iter().zip(&b.occupancies) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
