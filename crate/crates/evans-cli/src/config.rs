//! Run configuration: defaults, config-file loading (JSON or key=value
//! lines), and command-line overrides. The fully resolved configuration is
//! embedded in every JSON summary for provenance.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Problem spec, e.g. "burgers", "convected-heat:0.0",
    /// "scalar:1,1,1", "const-diag:2;-1,-2,3".
    pub problem: String,
    /// "exterior", "polar", "polar-davey", "polar-bvp", "conjugation".
    pub method: String,
    /// Contour DSL: "circle:center,radius" or "polyline:l1;l2;...".
    pub contour: String,
    /// Node count for circle contours (and resampling of polylines).
    pub nodes: usize,
    /// Truncation length; 0 selects it automatically from the decay rate.
    pub m: f64,
    pub output: String,
    pub seed: u64,
    /// Contours must keep this distance from declared singular points.
    pub exclusion_radius: f64,
    /// Winding refinement budget (total samples).
    pub budget: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Fixed step for boundary-value meshes; 0 picks a default.
    pub bvp_step: f64,
    pub homotopy_stages: usize,
    /// converge-m abscissae.
    pub m_list: Vec<f64>,
    /// mesh-study decay rates.
    pub a_list: Vec<f64>,
    /// mesh-study error-per-unit-step tolerance.
    pub tol: f64,
    /// kato-order node counts.
    pub j_list: Vec<usize>,
    /// stiefel experiment: perturbation size, fixed step, and interval.
    pub eps: f64,
    pub h: f64,
    pub stiefel_m: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "burgers".into(),
            method: "exterior".into(),
            contour: "circle:0.5,0.25".into(),
            nodes: 64,
            m: 0.0,
            output: "evans-out".into(),
            seed: 42,
            exclusion_radius: 1e-4,
            budget: 1 << 12,
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            bvp_step: 0.0,
            homotopy_stages: 10,
            m_list: (4..=12).map(|m| m as f64).collect(),
            a_list: (0..=8).map(|p| (1u32 << p) as f64).collect(),
            tol: 1e-6,
            j_list: vec![64, 128, 256, 512],
            eps: 1e-3,
            h: 0.004,
            stiefel_m: 6.0,
        }
    }
}

impl RunConfig {
    /// Load from a JSON file or from simple `key = value` lines.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let trimmed = text.trim_start();
        let value: serde_json::Value = if trimmed.starts_with('{') {
            serde_json::from_str(&text).context("config file is not valid JSON")?
        } else {
            let mut map = serde_json::Map::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, raw)) = line.split_once('=') else {
                    bail!("config line {} is not `key = value`: {:?}", lineno + 1, line);
                };
                let key = key.trim().to_string();
                let raw = raw.trim();
                // accept JSON scalars/arrays, fall back to a string
                let parsed = serde_json::from_str::<serde_json::Value>(raw)
                    .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
                map.insert(key, parsed);
            }
            serde_json::Value::Object(map)
        };
        serde_json::from_value(value).context("config file has invalid or unknown fields")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_config_parses() {
        let dir = std::env::temp_dir().join("evans-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(
            &path,
            "# comment\nproblem = burgers\nnodes = 32\nm_list = [4, 6, 8]\ntol = 1e-7\n",
        )
        .unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.problem, "burgers");
        assert_eq!(cfg.nodes, 32);
        assert_eq!(cfg.m_list, vec![4.0, 6.0, 8.0]);
        assert_eq!(cfg.tol, 1e-7);
        // untouched fields keep defaults
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = std::env::temp_dir().join("evans-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.conf");
        std::fs::write(&path, "no_such_option = 1\n").unwrap();
        assert!(RunConfig::from_file(&path).is_err());
    }
}
