//! Finite-coupling eigenstates of the relative motion, total energies with
//! the centre-of-mass ground state, and the harmonic-approximation spectrum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::ho_values;
use crate::coulomb::{BasisScales, CoulombQuadrature, RelativeHamiltonian, SectorBasis};
use crate::error::{Error, Result};
use crate::model::{classical_geometry, SectorLabel, TrapParams};

/// Relative cutoff used up to `g = 200`.
pub const DEFAULT_N_MAX: usize = 28;
/// Relative cutoff used for `100 < g <= 1000`.
pub const DEFAULT_N_MAX_STRONG: usize = 40;
/// Relative cutoff used for `1000 < g <= 3000`.
pub const DEFAULT_N_MAX_VERY_STRONG: usize = 52;
/// Relative cutoff used above `g = 3000`.
pub const DEFAULT_N_MAX_EXTREME: usize = 76;
/// Couplings from which the default options dilate the basis.
pub const DILATION_THRESHOLD: f64 = 20.0;

/// How the oscillator scales of the relative basis are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Dilation {
    /// Scales `(1, sqrt(epsilon))`: the `g = 0` problem is diagonal.
    #[default]
    Matched,
    /// Matched scales divided by explicit factors.
    Fixed { x: f64, y: f64 },
    /// Factors from the size of the harmonic-approximation ground state,
    /// never below 1.
    Auto,
}

impl Dilation {
    /// Dilation factors `(b_x, b_y)` for a parameter point.
    pub fn factors(&self, t: &TrapParams) -> (f64, f64) {
        match *self {
            Dilation::Matched => (1.0, 1.0),
            Dilation::Fixed { x, y } => (x, y),
            Dilation::Auto => auto_dilation(t),
        }
    }

    pub fn scales(&self, t: &TrapParams) -> BasisScales {
        let (bx, by) = self.factors(t);
        BasisScales::dilated(t.epsilon, bx, by)
    }
}

/// A basis of `N` quanta and length unit `b` spans positions up to about
/// `b sqrt(2N)` and momenta up to `sqrt(2N) / b`; balancing the two against the
/// extent of the localized state gives `b^2 ~ extent / momentum`.
fn auto_dilation(t: &TrapParams) -> (f64, f64) {
    let Ok(geo) = classical_geometry(t) else {
        return (1.0, 1.0);
    };
    // Harmonic widths around the minimum: sqrt(3) along x, sqrt(eps^2 - 1) along y.
    let sigma_x = 1.0 / (2.0 * 3f64.sqrt()).sqrt();
    let extent_x = geo.x_cl + 4.0 * sigma_x;
    let momentum_x = 2.0 / sigma_x;
    let bx = (extent_x / momentum_x).sqrt().max(1.0);

    let curvature_y = (t.epsilon * t.epsilon - 1.0).max(0.0).sqrt();
    let by = if curvature_y > 0.0 {
        let sigma_y = 1.0 / (2.0 * curvature_y).sqrt();
        // Lengths along y are measured in units of 1/sqrt(epsilon).
        let unit = 1.0 / t.epsilon.sqrt();
        let extent = (4.0 * sigma_y).min(geo.x_cl + 4.0 * sigma_x);
        let momentum = 2.0 / sigma_y;
        ((extent / momentum).sqrt() / unit).max(1.0)
    } else {
        bx
    };
    (bx, by)
}

/// Basis and quadrature settings of one eigensolve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub n_max: usize,
    pub dilation: Dilation,
    pub quad: CoulombQuadrature,
}

impl SolverOptions {
    /// Cutoff from [`default_n_max`]; matched scales below
    /// [`DILATION_THRESHOLD`], automatic dilation from there on.
    pub fn for_params(t: &TrapParams) -> Self {
        Self {
            n_max: default_n_max(t.g),
            dilation: if t.g < DILATION_THRESHOLD {
                Dilation::Matched
            } else {
                Dilation::Auto
            },
            quad: CoulombQuadrature::default(),
        }
    }

    pub fn with_n_max(n_max: usize) -> Self {
        Self {
            n_max,
            dilation: Dilation::Matched,
            quad: CoulombQuadrature::default(),
        }
    }
}

pub fn default_n_max(g: f64) -> usize {
    if g > 3000.0 {
        DEFAULT_N_MAX_EXTREME
    } else if g > 1000.0 {
        DEFAULT_N_MAX_VERY_STRONG
    } else if g > 100.0 {
        DEFAULT_N_MAX_STRONG
    } else {
        DEFAULT_N_MAX
    }
}

/// An eigenstate `psi^R_nm(R) psi^r(r)` of the two-electron problem.
#[derive(Debug, Clone)]
pub struct TwoBodyState {
    pub trap: TrapParams,
    pub sector: SectorLabel,
    pub basis: SectorBasis,
    /// Unit-norm coefficients over `basis.members()`.
    pub rel_coefficients: DVector<f64>,
    pub rel_energy: f64,
    pub cm_quanta: (usize, usize),
}

impl TwoBodyState {
    /// Centre-of-mass energy `2(n + 1/2) + 2 epsilon (m + 1/2)`.
    pub fn cm_energy(&self) -> f64 {
        let (n, m) = self.cm_quanta;
        2.0 * (n as f64 + 0.5) + 2.0 * self.trap.epsilon * (m as f64 + 0.5)
    }

    pub fn total_energy(&self) -> f64 {
        self.rel_energy + self.cm_energy()
    }

    /// Relative wavefunction `psi^r(x, y)`.
    pub fn relative_amplitude(&self, x: f64, y: f64) -> f64 {
        let scales = self.basis.scales();
        let mut fx = vec![0.0; self.basis.max_nx() + 1];
        let mut fy = vec![0.0; self.basis.max_ny() + 1];
        ho_values(scales.x, x, &mut fx);
        ho_values(scales.y, y, &mut fy);
        self.basis
            .members()
            .iter()
            .zip(self.rel_coefficients.iter())
            .map(|(m, c)| c * fx[m.nx] * fy[m.ny])
            .sum()
    }
}

/// The `k` lowest states of a sector with the centre of mass in its ground state.
pub fn eigensolve_sector(t: &TrapParams, sector: SectorLabel, n_max: usize, k: usize) -> Result<Vec<TwoBodyState>> {
    eigensolve_sector_with(t, sector, &SolverOptions::with_n_max(n_max), k)
}

pub fn eigensolve_sector_with(
    t: &TrapParams,
    sector: SectorLabel,
    opts: &SolverOptions,
    k: usize,
) -> Result<Vec<TwoBodyState>> {
    if !t.is_canonical() {
        return Err(Error::Domain(format!(
            "eigensolve expects epsilon >= 1, got {}; use TrapParams::canonical",
            t.epsilon
        )));
    }
    let basis = SectorBasis::new(sector, opts.n_max, opts.dilation.scales(t))?;
    if k == 0 || k > basis.len() {
        return Err(Error::Config(format!(
            "requested {k} levels but sector {sector} has {} basis functions at n_max = {}",
            basis.len(),
            opts.n_max
        )));
    }
    let h = RelativeHamiltonian::build(t.epsilon, &basis, opts.quad)?.at_coupling(t.g);
    solve_lowest(t, basis, h, k)
}

fn solve_lowest(t: &TrapParams, basis: SectorBasis, h: DMatrix<f64>, k: usize) -> Result<Vec<TwoBodyState>> {
    let n = h.nrows();
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric(format!("symmetric eigensolver failed for a {n}x{n} sector matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let states = order
        .into_iter()
        .take(k)
        .map(|i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            v /= v.norm();
            fix_phase(&mut v);
            TwoBodyState {
                trap: *t,
                sector: basis.sector(),
                basis: basis.clone(),
                rel_coefficients: v,
                rel_energy: eig.eigenvalues[i],
                cm_quanta: (0, 0),
            }
        })
        .collect();
    Ok(states)
}

/// Makes the entry of largest magnitude positive.
pub(crate) fn fix_phase(v: &mut DVector<f64>) {
    let imax = v.iamax();
    if v[imax] < 0.0 {
        v.neg_mut();
    }
}

/// `V_min + 2 sqrt(3) (n + 1/2) + 2 (m + 1/2) sqrt(epsilon^2 - 1)`.
pub fn harmonic_energy(n: usize, m: usize, t: &TrapParams) -> Result<f64> {
    if !(t.epsilon > 1.0) {
        return Err(Error::Domain(format!(
            "the harmonic approximation needs epsilon > 1, got {}",
            t.epsilon
        )));
    }
    let geo = classical_geometry(t)?;
    Ok(geo.v_min
        + 2.0 * 3f64.sqrt() * (n as f64 + 0.5)
        + 2.0 * (m as f64 + 0.5) * (t.epsilon * t.epsilon - 1.0).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub g: f64,
    pub epsilon: f64,
    pub sector: SectorLabel,
    pub level: usize,
    pub e_rel: f64,
    /// `e_rel` minus the lowest relative energy over all sectors at this point.
    pub gap: f64,
}

/// Rows ordered by `(epsilon, g, sector, level)`.
#[derive(Debug, Clone, Default)]
pub struct SpectrumTable {
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumTable {
    pub fn levels(&self, g: f64, sector: SectorLabel) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.g == g && r.sector == sector)
            .map(|r| r.e_rel)
            .collect()
    }
}

/// Relative spectra of several sectors over a grid of couplings.
///
/// `options` picks the solver settings for each parameter point.
pub fn spectrum_sweep<F>(
    g_grid: &[f64],
    epsilon: f64,
    sectors: &[SectorLabel],
    k: usize,
    options: F,
) -> Result<SpectrumTable>
where
    F: Fn(&TrapParams) -> SolverOptions + Sync,
{
    if g_grid.is_empty() {
        return Err(Error::Config("empty coupling grid".into()));
    }
    if sectors.is_empty() {
        return Err(Error::Config("no sectors requested".into()));
    }
    let points: Vec<Vec<SpectrumRow>> = g_grid
        .par_iter()
        .map(|&g| {
            let t = TrapParams::new(g, epsilon)?;
            let opts = options(&t);
            let mut rows = Vec::new();
            for &sector in sectors {
                let states = eigensolve_sector_with(&t, sector, &opts, k).map_err(|e| e.at_point(g, epsilon))?;
                for (level, s) in states.iter().enumerate() {
                    rows.push(SpectrumRow {
                        g,
                        epsilon,
                        sector,
                        level,
                        e_rel: s.rel_energy,
                        gap: 0.0,
                    });
                }
            }
            let e0 = rows.iter().map(|r| r.e_rel).fold(f64::INFINITY, f64::min);
            for r in &mut rows {
                r.gap = r.e_rel - e0;
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<SpectrumRow> = points.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then(a.g.total_cmp(&b.g))
            .then(a.sector.order_key().cmp(&b.sector.order_key()))
            .then(a.level.cmp(&b.level))
    });
    Ok(SpectrumTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Parity;

    fn sector(code: &str) -> SectorLabel {
        SectorLabel::parse(code).unwrap()
    }

    #[test]
    fn noninteracting_energies() {
        let t = TrapParams::new(0.0, 1.0).unwrap();
        let s = eigensolve_sector(&t, sector("ee"), 10, 3).unwrap();
        assert!((s[0].rel_energy - 2.0).abs() < 1e-10);
        assert!((s[0].total_energy() - 4.0).abs() < 1e-10);
        for code in ["oe", "eo"] {
            let s = eigensolve_sector(&t, sector(code), 10, 1).unwrap();
            assert!((s[0].rel_energy - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn interaction_raises_the_ground_state() {
        for g in [0.1, 1.0, 10.0] {
            let t = TrapParams::new(g, 1.3).unwrap();
            let e = eigensolve_sector(&t, sector("ee"), 16, 1).unwrap()[0].rel_energy;
            assert!(e > 1.0 + 1.3);
        }
    }

    #[test]
    fn states_are_normalized_with_fixed_phase() {
        let t = TrapParams::new(5.0, 1.5).unwrap();
        for s in eigensolve_sector(&t, sector("oo"), 14, 4).unwrap() {
            assert!((s.rel_coefficients.norm() - 1.0).abs() < 1e-12);
            let imax = s.rel_coefficients.iamax();
            assert!(s.rel_coefficients[imax] > 0.0);
        }
    }

    #[test]
    fn levels_are_sorted_and_k_is_checked() {
        let t = TrapParams::new(3.0, 1.2).unwrap();
        let s = eigensolve_sector(&t, sector("eo"), 12, 6).unwrap();
        assert!(s.windows(2).all(|w| w[0].rel_energy <= w[1].rel_energy));
        assert!(matches!(eigensolve_sector(&t, sector("eo"), 2, 50), Err(Error::Config(_))));
    }

    #[test]
    fn variational_monotonicity_in_cutoff() {
        for code in ["ee", "oe", "eo", "oo"] {
            let t = TrapParams::new(10.0, 1.5).unwrap();
            let mut prev = f64::INFINITY;
            for n_max in (8..=24).step_by(2) {
                let e = eigensolve_sector(&t, sector(code), n_max, 1).unwrap()[0].rel_energy;
                assert!(e <= prev + 1e-12, "{code} n_max {n_max}: {e} > {prev}");
                prev = e;
            }
        }
    }

    #[test]
    fn relative_wavefunction_parity() {
        let t = TrapParams::new(4.0, 1.7).unwrap();
        for s in SectorLabel::all() {
            let st = &eigensolve_sector(&t, s, 14, 1).unwrap()[0];
            let sx = s.x_parity().sign();
            let sy = s.y_parity().sign();
            for &(x, y) in &[(0.3, 0.7), (1.2, -0.4), (-2.0, 0.9)] {
                let f = st.relative_amplitude(x, y);
                let scale = f.abs().max(1e-3);
                assert!((st.relative_amplitude(-x, y) - sx * f).abs() <= 1e-10 * scale);
                assert!((st.relative_amplitude(x, -y) - sy * f).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn harmonic_energy_examples() {
        let t = TrapParams::new(2.0, 2.0).unwrap();
        let e = harmonic_energy(0, 0, &t).unwrap();
        assert!((e - (3.0 + 2.0 * 3f64.sqrt())).abs() < 1e-12);
        assert!((e - 6.464101615137754).abs() < 1e-12);
        for g in [1.0, 50.0, 1e4] {
            let t = TrapParams::new(g, 1.7).unwrap();
            let d = harmonic_energy(1, 0, &t).unwrap() - harmonic_energy(0, 0, &t).unwrap();
            assert!((d - 2.0 * 3f64.sqrt()).abs() < 1e-9);
            let d = harmonic_energy(0, 1, &t).unwrap() - harmonic_energy(0, 0, &t).unwrap();
            assert!((d - 2.7495454169735038).abs() < 1e-9);
        }
        assert!(harmonic_energy(0, 0, &TrapParams::new(2.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn noninteracting_sweep_row_is_analytic() {
        let sectors = SectorLabel::all();
        let table = spectrum_sweep(&[0.0], 1.0, &sectors, 3, |_| SolverOptions::with_n_max(8)).unwrap();
        for r in &table.rows {
            let par = r.sector.x_parity().bit() + r.sector.y_parity().bit();
            // Lowest level of a sector carries one quantum per odd direction.
            if r.level == 0 {
                assert!((r.e_rel - (2.0 + 2.0 * par as f64)).abs() < 1e-10);
            }
        }
        let ee = table.levels(0.0, SectorLabel::from_parities(Parity::Even, Parity::Even));
        assert!((ee[1] - 6.0).abs() < 1e-10 && (ee[2] - 6.0).abs() < 1e-10);
        assert!(table.rows.iter().all(|r| r.gap >= 0.0));
    }

    #[test]
    fn sweep_rows_are_ordered() {
        let sectors = [sector("oo"), sector("ee")];
        let table = spectrum_sweep(&[2.0, 0.5], 1.2, &sectors, 2, |_| SolverOptions::with_n_max(8)).unwrap();
        let keys: Vec<(f64, &str, usize)> = table.rows.iter().map(|r| (r.g, r.sector.code(), r.level)).collect();
        assert_eq!(keys[0], (0.5, "ee", 0));
        assert_eq!(keys.last().unwrap(), &(2.0, "oo", 1));
        assert!(spectrum_sweep(&[], 1.2, &sectors, 2, |_| SolverOptions::with_n_max(8)).is_err());
    }
}
