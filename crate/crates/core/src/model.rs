//! Trap parameters, symmetry sectors and the classical geometry of the
//! strongly interacting limit.
//!
//! Lengths are measured in units of `sqrt(2 hbar / (m* omega_x))` and energies
//! in units of `hbar omega_x / 2`. In these units the two-electron Hamiltonian
//! reads `sum_i [-1/2 Laplacian_i + 2 x_i^2 + 2 epsilon^2 y_i^2] + g / |r_2 - r_1|`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Material and trap constants in a consistent (arbitrary) unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub effective_mass: f64,
    pub dielectric: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub elementary_charge: f64,
    pub hbar: f64,
}

/// Dimensionless coupling `g` and anisotropy `epsilon = omega_y / omega_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub g: f64,
    pub epsilon: f64,
}

impl TrapParams {
    pub fn new(g: f64, epsilon: f64) -> Result<Self> {
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::Domain(format!("coupling g must be finite and >= 0, got {g}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Domain(format!(
                "anisotropy epsilon must be finite and > 0, got {epsilon}"
            )));
        }
        Ok(Self { g, epsilon })
    }

    /// Maps `epsilon < 1` onto the equivalent problem with the axes swapped.
    ///
    /// Rescaling to the tighter axis gives `(g, epsilon) -> (g / sqrt(epsilon), 1 / epsilon)`;
    /// energies of the swapped problem are in units of `hbar omega_y / 2`.
    pub fn canonical(self) -> Canonical {
        if self.epsilon >= 1.0 {
            Canonical {
                params: self,
                axes_swapped: false,
            }
        } else {
            Canonical {
                params: TrapParams {
                    g: self.g / self.epsilon.sqrt(),
                    epsilon: 1.0 / self.epsilon,
                },
                axes_swapped: true,
            }
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.epsilon >= 1.0
    }
}

/// Result of [`TrapParams::canonical`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canonical {
    pub params: TrapParams,
    pub axes_swapped: bool,
}

/// `g = (e^2 / eps*) sqrt(2 m* / (omega_x hbar^3))`, `epsilon = omega_y / omega_x`.
pub fn physical_to_dimensionless(p: &PhysicalParams) -> Result<TrapParams> {
    let fields = [
        ("effective_mass", p.effective_mass),
        ("dielectric", p.dielectric),
        ("omega_x", p.omega_x),
        ("omega_y", p.omega_y),
        ("elementary_charge", p.elementary_charge),
        ("hbar", p.hbar),
    ];
    for (name, v) in fields {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    let g = p.elementary_charge.powi(2) / p.dielectric
        * (2.0 * p.effective_mass / (p.omega_x * p.hbar.powi(3))).sqrt();
    TrapParams::new(g, p.omega_y / p.omega_x)
}

/// Converts a scaled energy (units of `hbar omega_x / 2`) to physical units.
pub fn scaled_energy_to_physical(e_scaled: f64, hbar: f64, omega_x: f64) -> f64 {
    e_scaled * hbar * omega_x / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn matches(self, n: usize) -> bool {
        Parity::of(n) == self
    }

    pub fn bit(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinCharacter {
    Singlet,
    Triplet,
}

/// Parity of the relative wavefunction under `x -> -x` and `y -> -y`,
/// together with the spin projection of the two-electron state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SectorLabel {
    x_parity: Parity,
    y_parity: Parity,
    spin_projection: i8,
}

impl SectorLabel {
    pub fn new(x_parity: Parity, y_parity: Parity, spin_projection: i8) -> Result<Self> {
        if !(-1..=1).contains(&spin_projection) {
            return Err(Error::Domain(format!(
                "spin projection must be -1, 0 or +1, got {spin_projection}"
            )));
        }
        let label = Self {
            x_parity,
            y_parity,
            spin_projection,
        };
        if label.spin_character() == SpinCharacter::Singlet && spin_projection != 0 {
            return Err(Error::Domain(format!(
                "parity ({}) is a singlet sector and needs s_z = 0",
                label.code()
            )));
        }
        Ok(label)
    }

    /// The `s_z = 0` member of a parity sector.
    pub fn from_parities(x_parity: Parity, y_parity: Parity) -> Self {
        Self {
            x_parity,
            y_parity,
            spin_projection: 0,
        }
    }

    /// The four parity sectors with `s_z = 0`, ordered ee, eo, oe, oo.
    pub fn all() -> [SectorLabel; 4] {
        use Parity::*;
        [
            Self::from_parities(Even, Even),
            Self::from_parities(Even, Odd),
            Self::from_parities(Odd, Even),
            Self::from_parities(Odd, Odd),
        ]
    }

    pub fn x_parity(&self) -> Parity {
        self.x_parity
    }

    pub fn y_parity(&self) -> Parity {
        self.y_parity
    }

    pub fn spin_projection(&self) -> i8 {
        self.spin_projection
    }

    /// Inversion parity of the relative wavefunction decides the spin state.
    pub fn spin_character(&self) -> SpinCharacter {
        if self.x_parity == self.y_parity {
            SpinCharacter::Singlet
        } else {
            SpinCharacter::Triplet
        }
    }

    pub fn is_singlet(&self) -> bool {
        self.spin_character() == SpinCharacter::Singlet
    }

    /// Same parities, different spin projection.
    pub fn with_spin_projection(self, s_z: i8) -> Result<Self> {
        Self::new(self.x_parity, self.y_parity, s_z)
    }

    /// Two-letter code, x parity first: `ee`, `eo`, `oe`, `oo`.
    pub fn code(&self) -> &'static str {
        use Parity::*;
        match (self.x_parity, self.y_parity) {
            (Even, Even) => "ee",
            (Even, Odd) => "eo",
            (Odd, Even) => "oe",
            (Odd, Odd) => "oo",
        }
    }

    pub fn parse(code: &str) -> Result<Self> {
        use Parity::*;
        let (xp, yp) = match code.trim() {
            "ee" => (Even, Even),
            "eo" => (Even, Odd),
            "oe" => (Odd, Even),
            "oo" => (Odd, Odd),
            other => {
                return Err(Error::Config(format!(
                    "unknown sector '{other}', expected one of ee, eo, oe, oo"
                )))
            }
        };
        Ok(Self::from_parities(xp, yp))
    }

    /// Sort key used for deterministic output ordering.
    pub fn order_key(&self) -> (usize, usize, i8) {
        (self.x_parity.bit(), self.y_parity.bit(), self.spin_projection)
    }
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Location of the relative-potential minimum and its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalGeometry {
    pub x_cl: f64,
    pub v_min: f64,
}

/// Minimum of `V(x) = x^2 + g / x` on the positive axis.
pub fn classical_geometry(t: &TrapParams) -> Result<ClassicalGeometry> {
    if !(t.g > 0.0) {
        return Err(Error::Domain(
            "classical geometry needs g > 0 (no interior minimum at g = 0)".into(),
        ));
    }
    let x_cl = (t.g / 2.0).cbrt();
    Ok(ClassicalGeometry {
        x_cl,
        v_min: x_cl * x_cl + t.g / x_cl,
    })
}

/// Number of Slater determinants in the minimal decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SlaterRank(pub usize);

/// Slater rank from the number of nonvanishing spatial RDM eigenvalues.
pub fn slater_rank_rule(sector: &SectorLabel, nonzero_spatial_eigs: usize) -> Result<SlaterRank> {
    if sector.spin_projection() == 0 {
        return Ok(SlaterRank(nonzero_spatial_eigs));
    }
    if nonzero_spatial_eigs % 2 != 0 {
        return Err(Error::Inconsistent(format!(
            "a triplet with s_z = {} needs paired spatial eigenvalues, got {nonzero_spatial_eigs}",
            sector.spin_projection()
        )));
    }
    Ok(SlaterRank(nonzero_spatial_eigs / 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn phys(omega_x: f64, omega_y: f64, dielectric: f64) -> PhysicalParams {
        PhysicalParams {
            effective_mass: 0.067,
            dielectric,
            omega_x,
            omega_y,
            elementary_charge: 1.0,
            hbar: 1.0,
        }
    }

    #[test]
    fn anisotropy_is_frequency_ratio() {
        let t = physical_to_dimensionless(&phys(1.3, 1.3, 12.0)).unwrap();
        assert_eq!(t.epsilon, 1.0);
        let t = physical_to_dimensionless(&phys(1.3, 2.6, 12.0)).unwrap();
        assert_eq!(t.epsilon, 2.0);
    }

    #[test]
    fn coupling_is_inverse_in_dielectric() {
        let a = physical_to_dimensionless(&phys(0.7, 1.1, 5.0)).unwrap();
        let b = physical_to_dimensionless(&phys(0.7, 1.1, 10.0)).unwrap();
        assert_relative_eq!(b.g, a.g / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn coupling_scales_with_frequency() {
        let a = physical_to_dimensionless(&phys(0.7, 1.1, 5.0)).unwrap();
        let f = 3.7;
        let b = physical_to_dimensionless(&phys(0.7 * f, 1.1 * f, 5.0)).unwrap();
        assert_relative_eq!(b.epsilon, a.epsilon, max_relative = 1e-15);
        assert_relative_eq!(b.g, a.g * f.powf(-0.5), max_relative = 1e-14);
    }

    #[test]
    fn nonpositive_physical_input_is_rejected() {
        let mut p = phys(1.0, 1.0, 1.0);
        p.hbar = 0.0;
        assert!(matches!(physical_to_dimensionless(&p), Err(Error::Domain(_))));
        p.hbar = 1.0;
        p.omega_y = -1.0;
        assert!(physical_to_dimensionless(&p).is_err());
    }

    #[test]
    fn classical_geometry_examples() {
        let c = classical_geometry(&TrapParams::new(2.0, 1.5).unwrap()).unwrap();
        assert_relative_eq!(c.x_cl, 1.0, max_relative = 1e-15);
        assert_relative_eq!(c.v_min, 3.0, max_relative = 1e-15);
        let c = classical_geometry(&TrapParams::new(16.0, 1.5).unwrap()).unwrap();
        assert_relative_eq!(c.x_cl, 2.0, max_relative = 1e-15);
        assert_relative_eq!(c.v_min, 12.0, max_relative = 1e-15);
        assert!(classical_geometry(&TrapParams::new(0.0, 1.5).unwrap()).is_err());
    }

    #[test]
    fn classical_minimum_is_stationary() {
        for &g in &[0.01, 0.5, 2.0, 37.0, 1e3, 1e5] {
            let c = classical_geometry(&TrapParams::new(g, 1.0).unwrap()).unwrap();
            assert_relative_eq!(c.v_min / (g / 2.0).powf(2.0 / 3.0), 3.0, max_relative = 1e-13);
            let v = |x: f64| x * x + g / x;
            let h = 1e-5 * c.x_cl;
            let dv = (v(c.x_cl + h) - v(c.x_cl - h)) / (2.0 * h);
            assert!(dv.abs() < 1e-10 * c.v_min + 1e-9, "g={g}: V'={dv}");
        }
    }

    #[test]
    fn sector_spin_mapping() {
        use Parity::*;
        let cases = [
            (Even, Even, SpinCharacter::Singlet),
            (Odd, Odd, SpinCharacter::Singlet),
            (Even, Odd, SpinCharacter::Triplet),
            (Odd, Even, SpinCharacter::Triplet),
        ];
        for (xp, yp, spin) in cases {
            assert_eq!(SectorLabel::from_parities(xp, yp).spin_character(), spin);
        }
        assert!(SectorLabel::new(Even, Even, 1).is_err());
        assert!(SectorLabel::new(Odd, Even, 1).is_ok());
        assert!(SectorLabel::new(Odd, Even, 2).is_err());
        for s in SectorLabel::all() {
            assert_eq!(SectorLabel::parse(s.code()).unwrap(), s);
        }
    }

    #[test]
    fn slater_rank_examples() {
        use Parity::*;
        let singlet = SectorLabel::from_parities(Even, Even);
        let triplet0 = SectorLabel::from_parities(Odd, Even);
        let triplet_up = triplet0.with_spin_projection(1).unwrap();
        assert_eq!(slater_rank_rule(&singlet, 1).unwrap(), SlaterRank(1));
        assert_eq!(slater_rank_rule(&triplet_up, 2).unwrap(), SlaterRank(1));
        assert_eq!(slater_rank_rule(&triplet0, 2).unwrap(), SlaterRank(2));
        assert!(matches!(slater_rank_rule(&triplet_up, 3), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn canonical_form_swaps_axes() {
        let t = TrapParams::new(4.0, 0.25).unwrap().canonical();
        assert!(t.axes_swapped);
        assert_relative_eq!(t.params.epsilon, 4.0);
        assert_relative_eq!(t.params.g, 8.0);
        let t = TrapParams::new(4.0, 1.5).unwrap().canonical();
        assert!(!t.axes_swapped);
        assert_eq!(t.params.g, 4.0);
    }
}
