//! Run configuration in TOML.
//!
//! ```toml
//! seed = 7
//!
//! [problem]
//! name = "poisson_peak"          # poisson_peak | magnetostatic_horseshoe | custom
//! degree = 2
//! elements = 8                   # initial elements per direction
//! # geometry = "my.geo"          # required for custom, optional for the horseshoe
//! # reference_depth = 4          # uniform refinements of the reference solution
//!
//! [adaptivity]
//! theta = 0.5
//! max_iterations = 5
//! max_levels = 6
//! marking = "estimator"          # estimator | true-error | all
//! tolerance = 1e-8
//!
//! [materials.iron]
//! mu_r = 2000.0
//!
//! [export]
//! resolution = 9
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptivity::{AdaptiveConfig, MarkingMode};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    PoissonPeak,
    MagnetostaticHorseshoe,
    /// Magnetostatics on a user geometry file with user materials.
    Custom,
}

impl ProblemKind {
    pub const NAMES: [&'static str; 3] = ["poisson_peak", "magnetostatic_horseshoe", "custom"];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "poisson_peak" => Some(Self::PoissonPeak),
            "magnetostatic_horseshoe" => Some(Self::MagnetostaticHorseshoe),
            "custom" => Some(Self::Custom),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: String,
    #[serde(default)]
    pub geometry: Option<PathBuf>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub elements: Option<usize>,
    #[serde(default)]
    pub reference_depth: Option<usize>,
}

fn default_degree() -> usize {
    2
}

/// Material overrides; unset fields keep the built-in value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialOverride {
    pub mu_r: Option<f64>,
    pub br: Option<[f64; 2]>,
    pub jz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSection {
    /// Sample points per direction per patch in the field export.
    pub resolution: usize,
    pub fields: bool,
    pub mesh: bool,
}

impl Default for ExportSection {
    fn default() -> Self {
        Self {
            resolution: 9,
            fields: true,
            mesh: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemSection,
    #[serde(default)]
    pub adaptivity: AdaptiveConfig,
    #[serde(default)]
    pub materials: BTreeMap<String, MaterialOverride>,
    #[serde(default)]
    pub export: ExportSection,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::config(format!("{field}: {msg}"))
}

impl RunConfig {
    /// Parse and validate. `file` is used in diagnostics.
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                file: file.to_string(),
                line,
                message: e.message().to_string(),
            }
        })?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kind(&self) -> Result<ProblemKind> {
        ProblemKind::parse(&self.problem.name).ok_or_else(|| {
            field_error(
                "problem.name",
                format!(
                    "unknown problem '{}' (expected one of {})",
                    self.problem.name,
                    ProblemKind::NAMES.join(", ")
                ),
            )
        })
    }

    /// Geometry path resolved against the config directory.
    pub fn geometry_path(&self) -> Option<PathBuf> {
        self.problem.geometry.as_ref().map(|g| {
            if g.is_absolute() {
                g.clone()
            } else {
                self.base_dir.join(g)
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let p = &self.problem;
        if !(1..=crate::spline::MAX_DEGREE).contains(&p.degree) {
            return Err(field_error(
                "problem.degree",
                format!("{} is outside 1..={}", p.degree, crate::spline::MAX_DEGREE),
            ));
        }
        if p.elements == Some(0) {
            return Err(field_error("problem.elements", "must be at least 1"));
        }
        match (kind, self.geometry_path()) {
            (ProblemKind::Custom, None) => {
                return Err(field_error(
                    "problem.geometry",
                    "required for custom problems",
                ))
            }
            (ProblemKind::PoissonPeak, Some(_)) => {
                return Err(field_error(
                    "problem.geometry",
                    "poisson_peak runs on the unit square",
                ))
            }
            (_, Some(path)) if !path.is_file() => {
                return Err(field_error(
                    "problem.geometry",
                    format!("{} does not exist", path.display()),
                ))
            }
            _ => {}
        }
        if kind != ProblemKind::PoissonPeak && p.degree != 2 && p.geometry.is_none() {
            return Err(field_error(
                "problem.degree",
                "the bundled horseshoe geometry is biquadratic",
            ));
        }
        let a = &self.adaptivity;
        if !(a.theta > 0.0 && a.theta < 1.0) {
            return Err(field_error(
                "adaptivity.theta",
                format!("{} must lie in (0, 1)", a.theta),
            ));
        }
        if a.max_levels == 0 {
            return Err(field_error("adaptivity.max_levels", "must be at least 1"));
        }
        if !(a.tolerance >= 0.0) {
            return Err(field_error("adaptivity.tolerance", "must be nonnegative"));
        }
        if let Some(d) = p.reference_depth {
            if d + 1 < a.max_levels {
                return Err(field_error(
                    "problem.reference_depth",
                    format!(
                        "{d} is coarser than adaptivity.max_levels = {}",
                        a.max_levels
                    ),
                ));
            }
        }
        for (name, m) in &self.materials {
            if let Some(mu) = m.mu_r {
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(field_error(
                        &format!("materials.{name}.mu_r"),
                        format!("{mu} must be positive"),
                    ));
                }
            }
        }
        if self.export.resolution < 2 {
            return Err(field_error("export.resolution", "must be at least 2"));
        }
        if a.marking == MarkingMode::TrueError
            && kind != ProblemKind::PoissonPeak
            && p.reference_depth.is_none()
        {
            return Err(field_error(
                "problem.reference_depth",
                "true-error marking needs a reference depth",
            ));
        }
        Ok(())
    }

    /// The config as TOML text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_valid(text: &str) -> Result<RunConfig> {
        let c = RunConfig::parse(text, "test.toml")?;
        c.validate()?;
        Ok(c)
    }

    #[test]
    fn minimal_and_defaults() {
        let c = parse_valid("[problem]\nname = \"poisson_peak\"\n").unwrap();
        assert_eq!(c.kind().unwrap(), ProblemKind::PoissonPeak);
        assert_eq!(c.problem.degree, 2);
        assert_eq!(c.adaptivity, AdaptiveConfig::default());
        assert_eq!(c.export.resolution, 9);
        let again = RunConfig::parse(&c.to_toml(), "again").unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn field_specific_messages() {
        let cases = [
            ("[problem]\nname = \"poisson\"\n", "problem.name"),
            ("[problem]\nname = \"poisson_peak\"\ndegree = 0\n", "problem.degree"),
            ("[problem]\nname = \"poisson_peak\"\nelements = 0\n", "problem.elements"),
            ("[problem]\nname = \"custom\"\n", "problem.geometry"),
            ("[problem]\nname = \"custom\"\ngeometry = \"/nonexistent.geo\"\n", "problem.geometry"),
            ("[problem]\nname = \"poisson_peak\"\n[adaptivity]\ntheta = 1.0\n", "adaptivity.theta"),
            ("[problem]\nname = \"poisson_peak\"\n[adaptivity]\nmax_levels = 0\n", "adaptivity.max_levels"),
            ("[problem]\nname = \"poisson_peak\"\n[export]\nresolution = 1\n", "export.resolution"),
            (
                "[problem]\nname = \"magnetostatic_horseshoe\"\n[materials.iron]\nmu_r = -1.0\n",
                "materials.iron.mu_r",
            ),
            (
                "[problem]\nname = \"magnetostatic_horseshoe\"\n[adaptivity]\nmarking = \"true-error\"\n",
                "problem.reference_depth",
            ),
        ];
        for (text, field) in cases {
            let msg = parse_valid(text).unwrap_err().to_string();
            assert!(msg.contains(field), "{msg} should name {field}");
        }
    }

    #[test]
    fn syntax_errors_report_lines() {
        match RunConfig::parse(
            "[problem]\nname = \"poisson_peak\"\ndegree = \"two\"\n",
            "x.toml",
        ) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            RunConfig::parse("[problem]\nname = \"poisson_peak\"\ncolour = 1\n", "x.toml"),
            Err(Error::Parse { .. })
        ));
    }
}
