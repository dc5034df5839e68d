//! Run configuration: a JSON file merged with command-line overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::asymptotic::OccupancyMode;
use crate::error::{Error, Result};
use crate::model::SectorLabel;
use crate::relative::Dilation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Entanglement,
    Asymptotic,
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum LadderParameter {
    NMax,
    QuadOrder,
    SpCutoff,
}

impl LadderParameter {
    pub fn name(self) -> &'static str {
        match self {
            LadderParameter::NMax => "n_max",
            LadderParameter::QuadOrder => "quad_order",
            LadderParameter::SpCutoff => "sp_cutoff",
        }
    }
}

/// Every setting of a run. Unset fields take per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Explicit couplings.
    pub g: Vec<f64>,
    pub g_min: Option<f64>,
    pub g_max: Option<f64>,
    pub g_points: Option<usize>,
    /// Adds `g = 0` to a log-spaced grid.
    pub include_g_zero: bool,
    /// Explicit anisotropies.
    pub epsilon: Vec<f64>,
    /// Log-spaced grid in `epsilon - 1`.
    pub eps_min: Option<f64>,
    pub eps_max: Option<f64>,
    pub eps_points: Option<usize>,
    /// Sector codes such as `ee`.
    pub sectors: Vec<String>,
    pub levels: Option<usize>,
    pub n_max: Option<usize>,
    pub dilation: Option<Dilation>,
    pub quad_order: Option<usize>,
    pub sp_cutoff: Option<usize>,
    pub mode: Option<OccupancyMode>,
    pub nystrom_points: Option<usize>,
    pub n_cut: Option<usize>,
    pub m_cut: Option<usize>,
    pub parameter: Option<LadderParameter>,
    pub values: Vec<usize>,
    pub output: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    /// Fields set in `other` replace those of `self`.
    pub fn overridden_by(mut self, other: RunConfig) -> Self {
        macro_rules! take_opt {
            ($($f:ident),*) => {$( if other.$f.is_some() { self.$f = other.$f; } )*};
        }
        macro_rules! take_vec {
            ($($f:ident),*) => {$( if !other.$f.is_empty() { self.$f = other.$f; } )*};
        }
        take_opt!(
            g_min, g_max, g_points, eps_min, eps_max, eps_points, levels, n_max, dilation, quad_order, sp_cutoff,
            mode, nystrom_points, n_cut, m_cut, parameter, output, jobs
        );
        take_vec!(g, epsilon, sectors, values);
        self.include_g_zero |= other.include_g_zero;
        self
    }

    /// Explicit couplings plus the log-spaced grid, sorted and deduplicated.
    pub fn g_grid(&self) -> Result<Vec<f64>> {
        let mut grid = self.g.clone();
        match (self.g_min, self.g_max, self.g_points) {
            (None, None, None) => {}
            (Some(lo), Some(hi), Some(n)) => grid.extend(log_grid(lo, hi, n, "g")?),
            _ => return Err(Error::Config("g_min, g_max and g_points must be given together".into())),
        }
        if self.include_g_zero {
            grid.push(0.0);
        }
        if let Some(bad) = grid.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::Config(format!("couplings must be finite and nonnegative, got {bad}")));
        }
        finish_grid(grid, "coupling")
    }

    /// Explicit anisotropies plus `1 + ` a log-spaced grid in `epsilon - 1`.
    pub fn epsilon_grid(&self) -> Result<Vec<f64>> {
        let mut grid = self.epsilon.clone();
        match (self.eps_min, self.eps_max, self.eps_points) {
            (None, None, None) => {}
            (Some(lo), Some(hi), Some(n)) => {
                if !(lo > 1.0 && hi > 1.0) {
                    return Err(Error::Config("eps_min and eps_max must exceed 1".into()));
                }
                grid.extend(log_grid(lo - 1.0, hi - 1.0, n, "epsilon - 1")?.into_iter().map(|d| 1.0 + d));
            }
            _ => return Err(Error::Config("eps_min, eps_max and eps_points must be given together".into())),
        }
        if let Some(bad) = grid.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Config(format!("anisotropies must be finite and positive, got {bad}")));
        }
        finish_grid(grid, "anisotropy")
    }

    pub fn sector_labels(&self, default: &[&str]) -> Result<Vec<SectorLabel>> {
        let codes: Vec<&str> = if self.sectors.is_empty() {
            default.to_vec()
        } else {
            self.sectors.iter().map(String::as_str).collect()
        };
        let mut labels = codes
            .iter()
            .map(|c| SectorLabel::parse(c).map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        labels.sort_by_key(|s| s.order_key());
        labels.dedup();
        Ok(labels)
    }
}

fn log_grid(lo: f64, hi: f64, n: usize, what: &str) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::Config(format!(
            "log-spaced {what} grid needs 0 < min <= max, got [{lo}, {hi}]; request zero explicitly"
        )));
    }
    if n == 0 {
        return Err(Error::Config(format!("{what} grid needs at least one point")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            // Rounded to the printed precision so that the CSV reproduces the grid exactly.
            _ => round_to_printed((a + (b - a) * i as f64 / (n - 1) as f64).exp()),
        })
        .collect())
}

fn round_to_printed(x: f64) -> f64 {
    super::format::num(x).parse().expect("formatted number parses")
}

fn finish_grid(mut grid: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::Config(format!("empty {what} grid")));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let c = RunConfig {
            g_min: Some(1.0),
            g_max: Some(100.0),
            g_points: Some(3),
            include_g_zero: true,
            g: vec![10.0, 5.0],
            ..Default::default()
        };
        assert_eq!(c.g_grid().unwrap(), vec![0.0, 1.0, 5.0, 10.0, 100.0]);
        let bad = RunConfig {
            g_min: Some(0.0),
            g_max: Some(1.0),
            g_points: Some(3),
            ..Default::default()
        };
        assert!(bad.g_grid().is_err());
        assert!(RunConfig::default().g_grid().is_err());
        let partial = RunConfig {
            g_min: Some(1.0),
            ..Default::default()
        };
        assert!(partial.g_grid().is_err());
        let e = RunConfig {
            eps_min: Some(1.01),
            eps_max: Some(11.0),
            eps_points: Some(3),
            ..Default::default()
        };
        let grid = e.epsilon_grid().unwrap();
        assert_eq!(grid.len(), 3);
        assert!((grid[1] - 1.0 - 0.1f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn json_and_overrides() {
        let file = RunConfig::from_json(r#"{"g": [1, 2], "epsilon": [1.5], "n_max": 20, "dilation": {"mode": "auto"}}"#).unwrap();
        assert_eq!(file.dilation, Some(Dilation::Auto));
        let flags = RunConfig {
            n_max: Some(12),
            epsilon: vec![2.0],
            ..Default::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.n_max, Some(12));
        assert_eq!(merged.epsilon, vec![2.0]);
        assert_eq!(merged.g, vec![1.0, 2.0]);
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn sectors() {
        let c = RunConfig {
            sectors: vec!["oo".into(), "ee".into(), "ee".into()],
            ..Default::default()
        };
        let codes: Vec<&str> = c.sector_labels(&[]).unwrap().iter().map(|s| s.code()).collect();
        assert_eq!(codes, vec!["ee", "oo"]);
        let bad = RunConfig {
            sectors: vec!["xx".into()],
            ..Default::default()
        };
        assert!(matches!(bad.sector_labels(&[]), Err(Error::Config(_))));
    }
}
