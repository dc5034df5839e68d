//! The four CLI computations, each producing one CSV table.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Command, LadderParameter, RunConfig};
use super::format::{num, Table};
use crate::asymptotic::{
    asymptotic_linear_entropy, asymptotic_occupancies_with, asymptotic_vn_entropy, occupancy_ratios, OccupancyMode,
    DEFAULT_NYSTROM_POINTS,
};
use crate::coulomb::CoulombQuadrature;
use crate::error::{Error, Result};
use crate::model::{SectorLabel, TrapParams};
use crate::rdm::{coefficients_ungated, entanglement_of, SpOptions};
use crate::relative::{eigensolve_sector_with, spectrum_sweep, SolverOptions};

pub const SPECTRUM_HEADER: [&str; 6] = ["g", "epsilon", "sector", "level", "E_rel", "gap"];
pub const ENTANGLEMENT_HEADER: [&str; 14] = [
    "g", "epsilon", "sector", "lambda0", "lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6", "lambda7",
    "S_vn", "L_lin", "completeness",
];
pub const ASYMPTOTIC_HEADER: [&str; 12] = [
    "epsilon", "lambda0", "lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6", "lambda7", "L_closed",
    "L_spectrum", "S_vn",
];
pub const CONVERGENCE_HEADER: [&str; 5] = ["parameter", "value", "E_rel0", "delta_from_previous", "completeness"];

const REPORTED_OCCUPANCIES: usize = 8;
const DEFAULT_LEVELS: usize = 4;
const DEFAULT_N_CUT: usize = 12;
const ENTROPY_TAIL: f64 = 1e-12;
/// Ground energies may rise by at most this much along a cutoff ladder.
pub const VARIATIONAL_TOLERANCE: f64 = 1e-12;

/// Result of a run: the table, notes for the sidecar, and a failed check if any.
#[derive(Debug)]
pub struct Output {
    pub table: Table,
    pub notes: Vec<String>,
    pub violation: Option<Error>,
}

/// A parameter point mapped to `epsilon >= 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Point {
    pub g: f64,
    pub epsilon: f64,
    pub axes_swapped: bool,
}

fn canonical_point(g: f64, epsilon: f64) -> Result<Point> {
    let c = TrapParams::new(g, epsilon)?.canonical();
    Ok(Point {
        g: c.params.g,
        epsilon: c.params.epsilon,
        axes_swapped: c.axes_swapped,
    })
}

fn swap_axes(s: SectorLabel) -> SectorLabel {
    SectorLabel::new(s.y_parity(), s.x_parity(), s.spin_projection()).expect("swapping keeps a valid label")
}

fn canonical_sector(s: SectorLabel, p: &Point) -> SectorLabel {
    if p.axes_swapped {
        swap_axes(s)
    } else {
        s
    }
}

/// Solver settings shared by the finite-coupling commands.
#[derive(Debug, Clone, Serialize)]
pub struct SolverSettings {
    pub n_max: Option<usize>,
    pub dilation: Option<crate::relative::Dilation>,
    pub quad_order: Option<usize>,
    pub sp_cutoff: Option<usize>,
}

impl SolverSettings {
    fn from_config(cfg: &RunConfig) -> Result<Self> {
        if cfg.n_max == Some(0) {
            return Err(Error::Config("n_max must be positive".into()));
        }
        if cfg.quad_order.is_some_and(|q| q < 2) {
            return Err(Error::Config("quad_order must be at least 2".into()));
        }
        Ok(Self {
            n_max: cfg.n_max,
            dilation: cfg.dilation,
            quad_order: cfg.quad_order,
            sp_cutoff: cfg.sp_cutoff,
        })
    }

    fn options(&self, t: &TrapParams) -> SolverOptions {
        let mut o = SolverOptions::for_params(t);
        if let Some(n) = self.n_max {
            o.n_max = n;
        }
        if let Some(d) = self.dilation {
            o.dilation = d;
        }
        if let Some(q) = self.quad_order {
            o.quad = CoulombQuadrature::with_order(q);
        }
        o
    }

    fn sp_cutoff(&self, opts: &SolverOptions) -> usize {
        self.sp_cutoff.unwrap_or(opts.n_max + 4)
    }
}

/// A validated run.
#[derive(Debug, Clone)]
pub enum Plan {
    Spectrum {
        g: Vec<f64>,
        epsilon: Vec<f64>,
        sectors: Vec<SectorLabel>,
        levels: usize,
        solver: SolverSettings,
    },
    Entanglement {
        g: Vec<f64>,
        epsilon: Vec<f64>,
        sectors: Vec<SectorLabel>,
        solver: SolverSettings,
    },
    Asymptotic {
        epsilon: Vec<f64>,
        mode: OccupancyMode,
        points: usize,
        n_cut: usize,
        m_cut: Option<usize>,
    },
    Convergence {
        g: f64,
        epsilon: f64,
        sector: SectorLabel,
        parameter: LadderParameter,
        values: Vec<usize>,
        solver: SolverSettings,
    },
}

impl Plan {
    /// Validates the configuration; failures here are usage errors.
    pub fn from_config(command: Command, cfg: &RunConfig) -> Result<Self> {
        let solver = || SolverSettings::from_config(cfg);
        match command {
            Command::Spectrum => {
                let levels = cfg.levels.unwrap_or(DEFAULT_LEVELS);
                if levels == 0 {
                    return Err(Error::Config("levels must be positive".into()));
                }
                Ok(Plan::Spectrum {
                    g: cfg.g_grid()?,
                    epsilon: cfg.epsilon_grid()?,
                    sectors: cfg.sector_labels(&["ee", "eo", "oe", "oo"])?,
                    levels,
                    solver: solver()?,
                })
            }
            Command::Entanglement => Ok(Plan::Entanglement {
                g: cfg.g_grid()?,
                epsilon: cfg.epsilon_grid()?,
                sectors: cfg.sector_labels(&["ee"])?,
                solver: solver()?,
            }),
            Command::Asymptotic => {
                let epsilon = cfg.epsilon_grid()?;
                let points = cfg.nystrom_points.unwrap_or(DEFAULT_NYSTROM_POINTS);
                if points < 2 {
                    return Err(Error::Config("nystrom_points must be at least 2".into()));
                }
                let n_cut = cfg.n_cut.unwrap_or(DEFAULT_N_CUT);
                if n_cut == 0 || cfg.m_cut == Some(0) {
                    return Err(Error::Config("occupancy cutoffs must be positive".into()));
                }
                Ok(Plan::Asymptotic {
                    epsilon,
                    mode: cfg.mode.unwrap_or_default(),
                    points,
                    n_cut,
                    m_cut: cfg.m_cut,
                })
            }
            Command::Convergence => {
                let g = cfg.g_grid()?;
                let epsilon = cfg.epsilon_grid()?;
                let sectors = cfg.sector_labels(&["ee"])?;
                if g.len() != 1 || epsilon.len() != 1 || sectors.len() != 1 {
                    return Err(Error::Config(
                        "convergence needs exactly one coupling, one anisotropy and one sector".into(),
                    ));
                }
                let parameter = cfg
                    .parameter
                    .ok_or_else(|| Error::Config("convergence needs --parameter".into()))?;
                if cfg.values.is_empty() {
                    return Err(Error::Config("convergence needs a ladder of --values".into()));
                }
                if cfg.values.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("ladder values must be strictly increasing".into()));
                }
                Ok(Plan::Convergence {
                    g: g[0],
                    epsilon: epsilon[0],
                    sector: sectors[0],
                    parameter,
                    values: cfg.values.clone(),
                    solver: solver()?,
                })
            }
        }
    }

    /// Runs the computation; failures here are numeric errors.
    pub fn execute(&self) -> Result<Output> {
        match self {
            Plan::Spectrum {
                g,
                epsilon,
                sectors,
                levels,
                solver,
            } => spectrum(g, epsilon, sectors, *levels, solver),
            Plan::Entanglement {
                g,
                epsilon,
                sectors,
                solver,
            } => entanglement(g, epsilon, sectors, solver),
            Plan::Asymptotic {
                epsilon,
                mode,
                points,
                n_cut,
                m_cut,
            } => asymptotic(epsilon, *mode, *points, *n_cut, *m_cut),
            Plan::Convergence {
                g,
                epsilon,
                sector,
                parameter,
                values,
                solver,
            } => convergence(*g, *epsilon, *sector, *parameter, values, solver),
        }
    }
}

fn swap_note(original: (f64, f64), p: &Point) -> String {
    format!(
        "epsilon = {} < 1: axes swapped, (g, epsilon) = ({}, {}) reported as ({}, {}); sector codes refer to the swapped axes",
        original.1, original.0, original.1, p.g, p.epsilon
    )
}

fn spectrum(g: &[f64], eps: &[f64], sectors: &[SectorLabel], levels: usize, solver: &SolverSettings) -> Result<Output> {
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for &e in eps {
        let pts = g.iter().map(|&gi| canonical_point(gi, e)).collect::<Result<Vec<_>>>()?;
        let swapped = pts[0].axes_swapped;
        if swapped {
            notes.extend(g.iter().zip(&pts).map(|(&gi, p)| swap_note((gi, e), p)));
        }
        let grid: Vec<f64> = pts.iter().map(|p| p.g).collect();
        let secs: Vec<SectorLabel> = sectors.iter().map(|&s| canonical_sector(s, &pts[0])).collect();
        let table = spectrum_sweep(&grid, pts[0].epsilon, &secs, levels, |t| solver.options(t))?;
        rows.extend(table.rows);
    }
    rows.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then(a.g.total_cmp(&b.g))
            .then(a.sector.order_key().cmp(&b.sector.order_key()))
            .then(a.level.cmp(&b.level))
    });
    let mut table = Table::new(&SPECTRUM_HEADER);
    table.rows = rows
        .iter()
        .map(|r| {
            vec![
                num(r.g),
                num(r.epsilon),
                r.sector.code().to_string(),
                r.level.to_string(),
                num(r.e_rel),
                num(r.gap),
            ]
        })
        .collect();
    Ok(Output {
        table,
        notes,
        violation: None,
    })
}

fn padded(values: &[f64], count: usize) -> impl Iterator<Item = f64> + '_ {
    (0..count).map(move |i| values.get(i).copied().unwrap_or(0.0))
}

fn entanglement(g: &[f64], eps: &[f64], sectors: &[SectorLabel], solver: &SolverSettings) -> Result<Output> {
    let mut jobs = Vec::new();
    let mut notes = Vec::new();
    for &e in eps {
        for &gi in g {
            let p = canonical_point(gi, e)?;
            if p.axes_swapped {
                notes.push(swap_note((gi, e), &p));
            }
            for &s in sectors {
                jobs.push((p, canonical_sector(s, &p)));
            }
        }
    }
    let mut results = jobs
        .par_iter()
        .map(|&(p, sector)| -> Result<(Point, SectorLabel, Vec<String>)> {
            let t = TrapParams::new(p.g, p.epsilon)?;
            let opts = solver.options(&t);
            let run = || -> Result<Vec<String>> {
                let state = eigensolve_sector_with(&t, sector, &opts, 1)?.remove(0);
                let e = entanglement_of(&state, &SpOptions::with_cutoff(solver.sp_cutoff(&opts)))?;
                let mut row = vec![num(p.g), num(p.epsilon), sector.code().to_string()];
                row.extend(padded(&e.spectrum.occupancies, REPORTED_OCCUPANCIES).map(num));
                row.extend([num(e.vn_entropy), num(e.linear_entropy), num(e.spectrum.completeness)]);
                Ok(row)
            };
            Ok((p, sector, run().map_err(|e| e.at_point(p.g, p.epsilon))?))
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| {
        a.0.epsilon
            .total_cmp(&b.0.epsilon)
            .then(a.0.g.total_cmp(&b.0.g))
            .then(a.1.order_key().cmp(&b.1.order_key()))
    });
    let mut table = Table::new(&ENTANGLEMENT_HEADER);
    table.rows = results.into_iter().map(|r| r.2).collect();
    Ok(Output {
        table,
        notes,
        violation: None,
    })
}

/// Cutoff along `y` that leaves a geometric tail below `1e-12`.
fn transverse_cutoff(epsilon: f64, points: usize) -> Result<usize> {
    let (_, qy) = occupancy_ratios(epsilon)?;
    let m = if qy <= 0.0 {
        1
    } else {
        ((1e-12f64).ln() / qy.ln()).ceil() as usize + 1
    };
    Ok(m.clamp(1, points))
}

fn asymptotic(eps: &[f64], mode: OccupancyMode, points: usize, n_cut: usize, m_cut: Option<usize>) -> Result<Output> {
    let mut notes = Vec::new();
    let mut canon = Vec::new();
    for &e in eps {
        let c = if e < 1.0 { 1.0 / e } else { e };
        if e < 1.0 {
            notes.push(format!("epsilon = {e} < 1: axes swapped, reported as epsilon = {c}"));
        }
        canon.push(c);
    }
    let mut rows = canon
        .par_iter()
        .map(|&e| -> Result<(f64, Vec<String>)> {
            let run = || -> Result<Vec<String>> {
                let m = match m_cut {
                    Some(m) => m,
                    None => transverse_cutoff(e, points)?,
                };
                let spec = asymptotic_occupancies_with(e, n_cut.min(points), m, mode, points)?;
                let mut row = vec![num(e)];
                row.extend(spec.leading(REPORTED_OCCUPANCIES).into_iter().map(num));
                row.extend([
                    num(asymptotic_linear_entropy(e)?),
                    num(spec.linear_entropy()),
                    num(asymptotic_vn_entropy(e, ENTROPY_TAIL)?),
                ]);
                Ok(row)
            };
            Ok((e, run()?))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    rows.dedup_by(|a, b| a.0 == b.0);
    let mut table = Table::new(&ASYMPTOTIC_HEADER);
    table.rows = rows.into_iter().map(|r| r.1).collect();
    Ok(Output {
        table,
        notes,
        violation: None,
    })
}

fn convergence(
    g: f64,
    eps: f64,
    sector: SectorLabel,
    parameter: LadderParameter,
    values: &[usize],
    solver: &SolverSettings,
) -> Result<Output> {
    let p = canonical_point(g, eps)?;
    let mut notes = Vec::new();
    if p.axes_swapped {
        notes.push(swap_note((g, eps), &p));
    }
    let sector = canonical_sector(sector, &p);
    let t = TrapParams::new(p.g, p.epsilon)?;
    let base = solver.options(&t);
    let steps = values
        .par_iter()
        .map(|&v| -> Result<(f64, f64)> {
            let mut opts = base;
            let mut sp = solver.sp_cutoff(&base);
            match parameter {
                LadderParameter::NMax => {
                    opts.n_max = v;
                    sp = solver.sp_cutoff.unwrap_or(v + 4);
                }
                LadderParameter::QuadOrder => opts.quad = CoulombQuadrature::with_order(v),
                LadderParameter::SpCutoff => sp = v,
            }
            let state = eigensolve_sector_with(&t, sector, &opts, 1)?.remove(0);
            let c = coefficients_ungated(&state, &SpOptions::with_cutoff(sp))?;
            Ok((state.rel_energy, c.completeness))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_point(p.g, p.epsilon))?;

    let mut table = Table::new(&CONVERGENCE_HEADER);
    let mut violation = None;
    for (i, (&v, &(e, compl))) in values.iter().zip(&steps).enumerate() {
        let delta = (i > 0).then(|| e - steps[i - 1].0);
        if let Some(d) = delta {
            if parameter == LadderParameter::NMax && d > VARIATIONAL_TOLERANCE && violation.is_none() {
                violation = Some(Error::Accuracy {
                    what: format!("ground energy rose from n_max = {} to {v}", values[i - 1]),
                    estimate: d,
                    tolerance: VARIATIONAL_TOLERANCE,
                });
            }
            let dc = compl - steps[i - 1].1;
            if parameter == LadderParameter::SpCutoff && dc < -VARIATIONAL_TOLERANCE && violation.is_none() {
                violation = Some(Error::Accuracy {
                    what: format!("completeness fell from sp_cutoff = {} to {v}", values[i - 1]),
                    estimate: -dc,
                    tolerance: VARIATIONAL_TOLERANCE,
                });
            }
        }
        table.rows.push(vec![
            parameter.name().to_string(),
            v.to_string(),
            num(e),
            delta.map(num).unwrap_or_default(),
            num(compl),
        ]);
    }
    Ok(Output {
        table,
        notes,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(json: &str) -> RunConfig {
        RunConfig::from_json(json).unwrap()
    }

    fn column(t: &Table, name: &str) -> Vec<f64> {
        let i = t.header.iter().position(|h| h == name).unwrap();
        t.rows.iter().map(|r| r[i].parse().unwrap()).collect()
    }

    #[test]
    fn noninteracting_spectrum() {
        let c = cfg(r#"{"g": [0], "epsilon": [1], "n_max": 8, "levels": 3}"#);
        let out = Plan::from_config(Command::Spectrum, &c).unwrap().execute().unwrap();
        let e = column(&out.table, "E_rel");
        // ee: 2, 6, 6 (two states at 6); eo, oe: 4, 8, 8; oo: 6, 10, 10.
        assert_eq!(e, vec![2.0, 6.0, 6.0, 4.0, 8.0, 8.0, 4.0, 8.0, 8.0, 6.0, 10.0, 10.0]);
        assert_eq!(column(&out.table, "gap")[0], 0.0);
    }

    #[test]
    fn swapped_axes_are_reported() {
        let c = cfg(r#"{"g": [2], "epsilon": [0.5], "n_max": 6, "levels": 1, "sectors": ["eo"]}"#);
        let out = Plan::from_config(Command::Spectrum, &c).unwrap().execute().unwrap();
        assert_eq!(out.table.rows[0][2], "oe");
        assert_eq!(column(&out.table, "epsilon"), vec![2.0]);
        assert!((column(&out.table, "g")[0] - 2.0 / 0.5f64.sqrt()).abs() < 1e-9);
        assert_eq!(out.notes.len(), 1);
    }

    #[test]
    fn asymptotic_row() {
        let c = cfg(r#"{"epsilon": [10, 2]}"#);
        let out = Plan::from_config(Command::Asymptotic, &c).unwrap().execute().unwrap();
        assert_eq!(column(&out.table, "epsilon"), vec![2.0, 10.0]);
        let l = column(&out.table, "L_closed");
        let s = column(&out.table, "S_vn");
        assert!((l[1] - 0.759142).abs() < 2e-5 && (s[1] - 2.13618).abs() < 1e-4);
        let ls = column(&out.table, "L_spectrum");
        assert!((ls[0] - l[0]).abs() < 1e-9);
    }

    #[test]
    fn convergence_ladders() {
        let c = cfg(r#"{"g": [10], "epsilon": [1.5], "parameter": "n_max", "values": [8, 12, 16, 20]}"#);
        let out = Plan::from_config(Command::Convergence, &c).unwrap().execute().unwrap();
        assert!(out.violation.is_none());
        assert_eq!(out.table.rows[0][3], "");
        for r in &out.table.rows[1..] {
            assert!(r[3].parse::<f64>().unwrap() <= 0.0);
        }
        let c = cfg(r#"{"g": [10], "epsilon": [1.5], "n_max": 16, "parameter": "quad_order", "values": [96, 128]}"#);
        let out = Plan::from_config(Command::Convergence, &c).unwrap().execute().unwrap();
        assert!(out.table.rows[1][3].parse::<f64>().unwrap().abs() < 1e-9);
        let c = cfg(r#"{"g": [10], "epsilon": [1.5], "n_max": 16, "dilation": {"mode": "fixed", "x": 1.2, "y": 1.1}, "parameter": "sp_cutoff", "values": [4, 8, 16]}"#);
        let out = Plan::from_config(Command::Convergence, &c).unwrap().execute().unwrap();
        assert!(out.violation.is_none());
        let compl = column(&out.table, "completeness");
        assert!(compl.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn invalid_plans() {
        assert!(Plan::from_config(Command::Spectrum, &cfg(r#"{"epsilon": [1]}"#)).is_err());
        assert!(Plan::from_config(Command::Convergence, &cfg(r#"{"g": [1, 2], "epsilon": [1], "parameter": "n_max", "values": [4]}"#)).is_err());
        assert!(Plan::from_config(Command::Convergence, &cfg(r#"{"g": [1], "epsilon": [1], "parameter": "n_max", "values": [8, 4]}"#)).is_err());
        assert!(Plan::from_config(Command::Asymptotic, &cfg(r#"{"epsilon": [2], "nystrom_points": 1}"#)).is_err());
    }
}
