use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fail::Failure;

/// Parameters shared by every command. Each may come from `--config file.json` or from a
/// flag; flags win.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// JSON file with any of these options (flags override it).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Field definition file, or one of translation, rotation, shear, vortex, cex:N,
    /// cex-mollified:N.
    #[arg(long)]
    pub field: Option<String>,
    /// Flow time.
    #[arg(long)]
    pub t: Option<f64>,
    /// Nodes per side of the flow or sample grid (a power of two).
    #[arg(long)]
    pub grid: Option<usize>,
    /// levelset, rk or both.
    #[arg(long)]
    pub method: Option<String>,
    /// Construction depth.
    #[arg(long)]
    pub n: Option<u32>,
    /// Sobolev exponent.
    #[arg(long)]
    pub p: Option<f64>,
    /// Uniform samples of T(y).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Random pairs for the estimate verifiers.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Index of the set Ω_k.
    #[arg(long)]
    pub k: Option<u32>,
    /// Last mollification level.
    #[arg(long)]
    pub l_max: Option<u32>,
    /// Depths compared by tv-refinement, e.g. 4,6,8.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<u32>>,
    /// Window x_lo,x_hi,y_lo,y_hi.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
    /// Direction e of the transversality bound, as x,y.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,
    /// Runge–Kutta local error tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed of the pair sampler.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid rows per oscillation s_n in tv-refinement.
    #[arg(long)]
    pub rows_per_s: Option<f64>,
    /// Worker threads (does not change outputs).
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    /// The file named by `--config`, overridden by the flags.
    pub fn resolve(flags: &RunConfig) -> Result<RunConfig, Failure> {
        let mut cfg = match &flags.config {
            Some(path) => load(path)?,
            None => RunConfig::default(),
        };
        overlay!(cfg, flags; field, t, grid, method, n, p, samples, pairs, k, l_max, depths, window,
            direction, tol, seed, rows_per_s, threads, out);
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        for (name, v) in [("t", self.t), ("p", self.p), ("tol", self.tol), ("rows-per-s", self.rows_per_s)] {
            if let Some(v) = v {
                if !v.is_finite() || (name != "t" && v <= 0.0) || v < 0.0 {
                    return Err(Failure::config(format!("--{name} must be a finite positive number, got {v}")));
                }
            }
        }
        if let Some(g) = self.grid {
            if g < 2 || !g.is_power_of_two() {
                return Err(Failure::config(format!("--grid must be a power of two, got {g}")));
            }
        }
        if let Some(w) = &self.window {
            if w.len() != 4 {
                return Err(Failure::config("--window takes x_lo,x_hi,y_lo,y_hi"));
            }
        }
        if let Some(d) = &self.direction {
            if d.len() != 2 {
                return Err(Failure::config("--direction takes x,y"));
            }
        }
        if self.threads == Some(0) {
            return Err(Failure::config("--threads must be at least 1"));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// SHA-256 of the command and the resolved options that affect results.
    pub fn hash(&self, command: &str) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(body.as_bytes());
        hex::encode(h.finalize())
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("bad config {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_hash_ignores_threads() {
        let dir = std::env::temp_dir().join(format!("hamflow-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"t": 1.0, "grid": 64, "field": "rotation"}"#).unwrap();
        let flags = RunConfig { config: Some(path), t: Some(2.0), threads: Some(8), ..Default::default() };
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!((cfg.t, cfg.grid, cfg.field.as_deref()), (Some(2.0), Some(64), Some("rotation")));
        let single = RunConfig { threads: Some(1), ..cfg.clone() };
        assert_eq!(cfg.hash("flow"), single.hash("flow"));
        assert_ne!(cfg.hash("flow"), cfg.hash("field sample"));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = RunConfig { grid: Some(100), ..Default::default() };
        assert!(RunConfig::resolve(&bad).is_err());
        let bad = RunConfig { window: Some(vec![0.0, 1.0]), ..Default::default() };
        assert!(RunConfig::resolve(&bad).is_err());
    }
}
