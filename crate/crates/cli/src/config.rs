use std::path::PathBuf;

use loopseries::bp::{InitStrategy, DEFAULT_DAMPING, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use loopseries::lattice::{Geometry, LatticeSpec};
use loopseries::observables::{DEFAULT_SERIES_MAX_ITER, DEFAULT_SERIES_TOL};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryName {
    Hexagonal,
    Square,
    Kagome,
}

impl GeometryName {
    pub fn geometry(self) -> Geometry {
        match self {
            GeometryName::Hexagonal => Geometry::Hexagonal,
            GeometryName::Square => Geometry::Square,
            GeometryName::Kagome => Geometry::Kagome,
        }
    }

    /// Lattice the series runs on (kagome is restructured onto the honeycomb).
    pub fn series_lattice(self) -> LatticeSpec {
        match self {
            GeometryName::Square => LatticeSpec::square(),
            _ => LatticeSpec::hexagonal(),
        }
    }

    /// Length of the shortest closed excitation on the series lattice.
    pub fn girth(self) -> usize {
        match self {
            GeometryName::Square => 4,
            _ => 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Aklt,
    Random {
        d: usize,
        m: usize,
        seed: u64,
    },
    /// Bond dimension one; every site carries the same normalized vector.
    Product {
        amplitudes: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitConfig {
    Identity,
    Random { seed: u64 },
}

impl InitConfig {
    pub fn strategy(self) -> InitStrategy {
        match self {
            InitConfig::Identity => InitStrategy::Identity,
            InitConfig::Random { seed } => InitStrategy::Random(seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub init: InitConfig,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            damping: DEFAULT_DAMPING,
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            init: InitConfig::Identity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMethodName {
    BoundaryMps,
    Strip,
    Torus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub method: ReferenceMethodName,
    /// Bond dimension, strip width or torus size.
    pub resolution: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Standard output when absent.
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            tol: DEFAULT_SERIES_TOL,
            max_iter: DEFAULT_SERIES_MAX_ITER,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub geometry: GeometryName,
    pub model: ModelConfig,
    pub max_degree: usize,
    pub bp: BpConfig,
    pub series: SeriesConfig,
    /// The first entry scores the series; `oracle` runs all of them.
    pub references: Vec<ReferenceConfig>,
    /// Bond of cell (0, 0) used for the transfer and density matrices.
    pub bond: usize,
    /// Singular-value cutoff of the kagome restructuring.
    pub kagome_cutoff: f64,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn aklt_hexagonal() -> Self {
        ExperimentConfig {
            geometry: GeometryName::Hexagonal,
            model: ModelConfig::Aklt,
            max_degree: 12,
            bp: BpConfig::default(),
            series: SeriesConfig::default(),
            references: vec![ReferenceConfig {
                method: ReferenceMethodName::BoundaryMps,
                resolution: 30,
            }],
            bond: 0,
            kagome_cutoff: 0.0,
            output: OutputConfig {
                path: None,
                format: OutputFormat::Csv,
            },
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.max_degree < self.geometry.girth() {
            return Err(CliError::Config(format!(
                "max_degree {} is below the lattice girth {}",
                self.max_degree,
                self.geometry.girth()
            )));
        }
        if !(0.0..1.0).contains(&self.bp.damping) {
            return Err(CliError::Config("bp.damping must lie in [0, 1)".into()));
        }
        if self.bond >= self.geometry.series_lattice().bonds.len() {
            return Err(CliError::Config(format!("bond {} is not in the unit cell", self.bond)));
        }
        for r in &self.references {
            if r.resolution == 0 {
                return Err(CliError::Config("reference resolution must be positive".into()));
            }
            if r.method == ReferenceMethodName::Torus && self.geometry != GeometryName::Square && r.resolution % 2 != 0
            {
                return Err(CliError::Config("honeycomb torus size must be even".into()));
            }
        }
        if let ModelConfig::Product { amplitudes } = &self.model {
            if amplitudes.is_empty() || amplitudes.iter().all(|&a| a == 0.0) {
                return Err(CliError::Config("product amplitudes must be nonzero".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.path = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Overlays `patch` onto `base`: objects merge key by key, anything else
/// replaces.
pub fn merge_json(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_json(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Applies a JSON config file on top of a flag-derived config.
pub fn overlay_file(cfg: &ExperimentConfig, text: &str) -> CliResult<ExperimentConfig> {
    let mut base = serde_json::to_value(cfg)?;
    let patch: serde_json::Value = serde_json::from_str(text)?;
    if !patch.is_object() {
        return Err(CliError::Config("config file must hold a JSON object".into()));
    }
    merge_json(&mut base, patch);
    Ok(serde_json::from_value(base)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_flags() {
        let cfg = ExperimentConfig::aklt_hexagonal();
        let out = overlay_file(&cfg, r#"{"max_degree": 10, "bp": {"damping": 0.5}}"#).unwrap();
        assert_eq!(out.max_degree, 10);
        assert_eq!(out.bp.damping, 0.5);
        assert_eq!(out.bp.tol, cfg.bp.tol);
    }

    #[test]
    fn hash_ignores_output_path() {
        let a = ExperimentConfig::aklt_hexagonal();
        let mut b = a.clone();
        b.output.path = Some("x.csv".into());
        assert_eq!(a.hash(), b.hash());
        b.max_degree = 10;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn degree_below_girth_rejected() {
        let mut c = ExperimentConfig::aklt_hexagonal();
        c.max_degree = 4;
        assert!(c.validate().is_err());
    }
}
