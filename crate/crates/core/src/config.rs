//! Run configuration documents and shipped presets.

use serde::{Deserialize, Serialize};

use crate::balance::Configuration;
use crate::error::{Error, Result};

/// Discretization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    /// Cylindrical grid nodes per Delaunay period in each ball.
    pub tgrid_per_period: usize,
    /// Chebyshev degree of the radial grid on each exterior shell.
    pub n_cheb: usize,
    /// Number of periods covered by the ball grid beyond `log R`.
    pub periods: f64,
    /// Extra cylindrical length appended after the periods.
    pub t_extra: f64,
}

impl Default for Grids {
    fn default() -> Self {
        Self { tgrid_per_period: 2048, n_cheb: 32, periods: 3.0, t_extra: 10.0 }
    }
}

/// Tolerances of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub energy: f64,
    pub linear: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { energy: 1e-9, linear: 1e-10, max_iter: 10 }
    }
}

/// Configuration document: `dim, points, q, eps, lmax, grids, tolerances`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub eps: f64,
    #[serde(default = "default_lmax")]
    pub lmax: usize,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Weight of the function spaces near the singular points.
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_lmax() -> usize {
    8
}

fn default_nu() -> f64 {
    1.5
}

/// Names of the shipped presets.
pub const PRESETS: [&str; 4] = ["triangle-N3", "square-N3", "tetrahedron-N3", "pair-N3"];

impl RunConfig {
    fn with_points(points: Vec<Vec<f64>>) -> Self {
        let n = points.len();
        Self {
            dim: 3,
            points,
            q: vec![1.0; n],
            eps: 1e-2,
            lmax: default_lmax(),
            grids: Grids::default(),
            tolerances: Tolerances::default(),
            nu: default_nu(),
            seed: 0,
        }
    }

    /// Looks up a preset by name. Points are given at unit scale and are dilated
    /// when the configuration is built.
    pub fn preset(name: &str) -> Result<Self> {
        let pts = match name {
            "triangle-N3" => (0..3)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                    vec![th.cos() / 3f64.sqrt(), th.sin() / 3f64.sqrt(), 0.0]
                })
                .collect(),
            "square-N3" => vec![
                vec![0.5, 0.5, 0.0],
                vec![-0.5, 0.5, 0.0],
                vec![-0.5, -0.5, 0.0],
                vec![0.5, -0.5, 0.0],
            ],
            "tetrahedron-N3" => {
                let s = 1.0 / 8f64.sqrt();
                vec![vec![s, s, s], vec![s, -s, -s], vec![-s, s, -s], vec![-s, -s, s]]
            }
            "pair-N3" => vec![vec![0.0, 0.0, 0.5], vec![0.0, 0.0, -0.5]],
            _ => {
                return Err(Error::Config(format!(
                    "unknown preset '{name}', expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Self::with_points(pts))
    }

    /// Parses a JSON document, reporting the offending line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(Error::Config(format!("key 'dim': {} < 3", self.dim)));
        }
        if self.points.len() != self.q.len() {
            return Err(Error::Config("keys 'points' and 'q' differ in length".into()));
        }
        if let Some(p) = self.points.iter().find(|p| p.len() != self.dim) {
            return Err(Error::Config(format!("key 'points': entry {p:?} is not {}-dimensional", self.dim)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("key 'eps': {} is not positive", self.eps)));
        }
        let t = &self.tolerances;
        if !(t.energy > 0.0 && t.linear > 0.0) || t.max_iter == 0 {
            return Err(Error::Config("key 'tolerances': all tolerances must be positive".into()));
        }
        if !(self.nu > 1.0 && self.nu < 2.0) {
            return Err(Error::Config(format!("key 'nu': {} outside (1, 2)", self.nu)));
        }
        Ok(())
    }

    /// Balanced, dilated configuration.
    pub fn configuration(&self) -> Result<Configuration> {
        self.validate()?;
        Configuration::balanced_normalized(self.dim, self.points.clone(), self.q.clone(), self.eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for name in PRESETS {
            let c = RunConfig::preset(name).unwrap();
            let back = RunConfig::from_json(&c.to_json().unwrap()).unwrap();
            assert_eq!(c, back);
        }
        assert!(RunConfig::preset("hexagon").is_err());
    }

    #[test]
    fn malformed_document_reports_location() {
        let err = RunConfig::from_json("{\n \"dim\": 3,\n \"points\": 7\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"));
    }
}
