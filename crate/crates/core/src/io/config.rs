//! Run configuration: parsing, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::admissibility::{BoundaryConditions, Gamma0Spec, ShellConfig};
use crate::energy::{EnergySpec, EnergyVariant, LoadSpec};
use crate::error::{Result, ShellError};
use crate::geometry::{SurfaceConfiguration, Vec3};
use crate::grid::{build_grid, ParamGrid, Rect};
use crate::minimize::SolverConfig;
use crate::surfaces::SurfacePreset;

use super::format::parse_obj_vertices;

/// Grid resolution and parameter domain. `rect` defaults to the preset's
/// natural rectangle (unit square for the plate), `periodic` to the preset's
/// natural periodicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<[bool; 2]>,
}

/// Constant densities `f`, `m` (default zero), or a JSON file holding
/// per-node arrays `{"f": [[..]; N], "m": [[..]; N]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    pub gamma0: Gamma0Spec,
    /// Default 1e3.
    #[serde(default = "default_penalty")]
    pub normal_penalty_weight: f64,
}

fn default_penalty() -> f64 {
    1e3
}

/// Probe sizes; 0 skips a probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Segment tests, default 10000.
    pub polyconvexity: usize,
    /// Sampled states, default 10000.
    pub coercivity: usize,
    /// Points per blow-up path, default 40.
    pub blowup: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { polyconvexity: 10_000, coercivity: 10_000, blowup: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Obj,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Default `out`, relative to the working directory.
    pub dir: PathBuf,
    /// Default all three.
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), formats: vec![Format::Json, Format::Csv, Format::Obj] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    /// Preset object (`{"kind": "torus", "R": 2, "r": 0.5}`) or a bare name
    /// for parameter-free presets. Default `plate`.
    #[serde(default = "plate", deserialize_with = "preset_or_name")]
    pub reference_surface: SurfacePreset,
    pub epsilon: f64,
    /// `{"helfrich": {..}}` or `{"poly_family": {..}}`.
    pub energy: EnergyVariant,
    #[serde(default)]
    pub loads: LoadConfig,
    /// No clamped boundary when absent (`minimize` requires one).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<BcConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    /// Default 0.
    #[serde(default)]
    pub seed: u64,
    /// OBJ file with the deformed midsurface (vertex order = node order).
    /// Default: the reference midsurface itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deformation: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn plate() -> SurfacePreset {
    SurfacePreset::Plate
}

fn preset_or_name<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<SurfacePreset, D::Error> {
    let v = serde_json::Value::deserialize(d)?;
    let v = match v {
        serde_json::Value::String(s) => serde_json::json!({ "kind": s }),
        other => other,
    };
    SurfacePreset::deserialize(v).map_err(serde::de::Error::custom)
}

/// Parse and validate a JSON configuration. Parse errors carry the JSON path
/// and line/column; constraint violations name the field.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = if path == "." { String::new() } else { format!("`{path}`: ") };
        ShellError::Parse { line: inner.line(), column: inner.column(), message: format!("{at}{inner}") }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn energy_spec(&self) -> EnergySpec {
        EnergySpec { variant: self.energy.clone(), epsilon: self.epsilon }
    }

    /// Field constraints that do not need the grid.
    pub fn validate(&self) -> Result<()> {
        if self.grid.nx < 3 || self.grid.ny < 3 {
            return Err(ShellError::validation("grid", "nx and ny must be at least 3"));
        }
        self.reference_surface.validate()?;
        self.energy_spec().validate()?;
        self.solver.validate()?;
        if self.verify.blowup != 0 && self.verify.blowup < 4 {
            return Err(ShellError::validation("verify.blowup", "needs at least 4 steps (or 0 to skip)"));
        }
        if self.loads.file.is_some() && (self.loads.f.is_some() || self.loads.m.is_some()) {
            return Err(ShellError::validation("loads", "give either constant f/m or a file, not both"));
        }
        if let Some(bc) = &self.bc {
            if !(bc.normal_penalty_weight >= 0.0) {
                return Err(ShellError::validation("bc.normal_penalty_weight", "must be >= 0"));
            }
        }
        if self.output.formats.is_empty() {
            return Err(ShellError::validation("output.formats", "at least one format is required"));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<ParamGrid> {
        let p = &self.reference_surface;
        let rect = self.grid.rect.or_else(|| p.default_rect()).unwrap_or_else(Rect::unit);
        build_grid(rect, self.grid.nx, self.grid.ny, self.grid.periodic.unwrap_or_else(|| p.default_periodic()))
    }

    /// Everything a command needs, with all cross-references (file sizes,
    /// boundary nodes, reference admissibility) checked up front. Relative
    /// paths resolve against `base`.
    pub fn prepare(&self, base: &Path) -> Result<Problem> {
        let grid = self.build_grid()?;
        let reference = self.reference_surface.discrete_config(&grid)?;
        let shell = ShellConfig::new(self.epsilon, reference)?;
        let loads = match &self.loads.file {
            Some(f) => {
                let text = std::fs::read_to_string(base.join(f))?;
                let l: LoadSpec = serde_json::from_str(&text)?;
                l.validate(&grid).map_err(|e| ShellError::validation("loads.file", e.to_string()))?;
                l
            }
            None => {
                let l = LoadSpec::uniform(grid.len(), self.loads.f.unwrap_or([0.0; 3]), self.loads.m.unwrap_or([0.0; 3]));
                l.validate(&grid)?;
                l
            }
        };
        let bc = match &self.bc {
            Some(b) => Some(BoundaryConditions::clamped(&b.gamma0, &shell.reference, b.normal_penalty_weight)?),
            None => None,
        };
        let deformed = match &self.deformation {
            Some(f) => {
                let psi = parse_obj_vertices(&std::fs::read_to_string(base.join(f))?)?;
                if psi.len() != grid.len() {
                    return Err(ShellError::validation(
                        "deformation",
                        format!("{} vertices for a grid of {} nodes", psi.len(), grid.len()),
                    ));
                }
                SurfaceConfiguration::from_psi(&grid, psi)?
            }
            None => shell.reference.clone(),
        };
        Ok(Problem { spec: self.energy_spec(), shell, loads, bc, deformed })
    }
}

/// Validated, grid-resolved inputs of a run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: EnergySpec,
    pub shell: ShellConfig,
    pub loads: LoadSpec,
    pub bc: Option<BoundaryConditions>,
    pub deformed: SurfaceConfiguration,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"grid": {"nx": 5, "ny": 5}, "reference_surface": "plate", "epsilon": 0.1, "energy": {"helfrich": {}}}"#;

    #[test]
    fn minimal_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.reference_surface, SurfacePreset::Plate);
        assert_eq!(c.seed, 0);
        assert_eq!(c.verify, VerifyConfig::default());
        assert_eq!(c.solver, SolverConfig::default());
        assert!(c.bc.is_none());
        assert_eq!(c.output.formats.len(), 3);
        let p = c.prepare(Path::new(".")).unwrap();
        assert_eq!(p.loads.f.len(), 25);
    }

    #[test]
    fn unknown_key_is_located() {
        let text = "{\"grid\": {\"nx\": 5, \"ny\": 5, \"nz\": 2},\n \"epsilon\": 0.1, \"energy\": {\"helfrich\": {}}}";
        match parse_config(text).unwrap_err() {
            ShellError::Parse { line, message, .. } => {
                assert_eq!(line, 1);
                assert!(message.contains("grid.nz") || message.contains("`grid`"), "{message}");
                assert!(message.contains("nz"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        match parse_config("{\n  \"grid\": {\"nx\": 5,, }\n}").unwrap_err() {
            ShellError::Parse { line, column, .. } => assert_eq!((line, column > 0), (2, true)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn preset_object_form() {
        let text = r#"{"grid": {"nx": 8, "ny": 8}, "reference_surface": {"kind": "torus", "R": 2, "r": 0.5},
                       "epsilon": 0.1, "energy": {"helfrich": {"k_c": 2}}}"#;
        let c = parse_config(text).unwrap();
        assert!(c.build_grid().unwrap().periodic1);
    }
}
