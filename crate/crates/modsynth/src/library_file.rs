//! Library configuration files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "actuators": { "H": { "mass": 0.57, "rated_speed_rpm": 12.2, "nominal_torque": 12,
//!                         "max_torque": 30.5, "epsilon": 3 }, "L": { ... } },
//!   "links": { "S1": { "length": 0.10, "bend_angle": 0, "mass": 0.08, "radius": 0.025 }, ... },
//!   "geometry": { "module_body_length": { "H": 0.12, "L": 0.09 },
//!                 "module_body_radius": { "H": 0.035, "L": 0.03 },
//!                 "twist_unit_offset": { "H": 0.05, "L": 0.04 },
//!                 "collision_padding": 0.005,
//!                 "joint_limit_deg": { "H": 180, "L": 180 } }
//! }
//! ```
//!
//! Every key except `format_version` is optional; missing entries take the
//! built-in defaults.

use std::path::{Path, PathBuf};

use modsynth_core::library::{ActuatorSpec, LinkSpec, LinkTable, ModuleGeometry, PerVariant};
use modsynth_core::LibraryConfig;
use serde::{Deserialize, Serialize};

use crate::error::{check_version, from_json, read, FileError};

/// Environment variable naming a library file to use instead of the defaults.
pub const LIBRARY_ENV: &str = "MODSYNTH_LIBRARY";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialVariant<T> {
    #[serde(rename = "H")]
    heavy: Option<T>,
    #[serde(rename = "L")]
    light: Option<T>,
}

impl<T> Default for PartialVariant<T> {
    fn default() -> Self {
        PartialVariant { heavy: None, light: None }
    }
}

impl<T: Copy> PartialVariant<T> {
    fn fill(&self, default: PerVariant<T>) -> PerVariant<T> {
        PerVariant {
            heavy: self.heavy.unwrap_or(default.heavy),
            light: self.light.unwrap_or(default.light),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialLinks {
    #[serde(rename = "S1")]
    s1: Option<LinkSpec>,
    #[serde(rename = "S2")]
    s2: Option<LinkSpec>,
    #[serde(rename = "C1")]
    c1: Option<LinkSpec>,
    #[serde(rename = "C2")]
    c2: Option<LinkSpec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialGeometry {
    module_body_length: Option<PartialVariant<f64>>,
    module_body_radius: Option<PartialVariant<f64>>,
    twist_unit_offset: Option<PartialVariant<f64>>,
    collision_padding: Option<f64>,
    joint_limit_deg: Option<PartialVariant<f64>>,
}

/// The library file as written on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryDocument {
    format_version: u32,
    #[serde(default)]
    actuators: PartialVariant<ActuatorSpec>,
    #[serde(default)]
    links: PartialLinks,
    #[serde(default)]
    geometry: PartialGeometry,
}

impl LibraryDocument {
    /// Fills missing entries with defaults. Does not validate.
    pub fn into_config(self) -> LibraryConfig {
        let d = LibraryConfig::default();
        let g = self.geometry;
        let dg = d.geometry;
        let pv = |p: Option<PartialVariant<f64>>, def: PerVariant<f64>| p.unwrap_or_default().fill(def);
        let limits_deg = PerVariant {
            heavy: dg.joint_limit.heavy.to_degrees(),
            light: dg.joint_limit.light.to_degrees(),
        };
        let limits = pv(g.joint_limit_deg, limits_deg);
        LibraryConfig {
            actuators: self.actuators.fill(d.actuators),
            links: LinkTable {
                s1: self.links.s1.unwrap_or(d.links.s1),
                s2: self.links.s2.unwrap_or(d.links.s2),
                c1: self.links.c1.unwrap_or(d.links.c1),
                c2: self.links.c2.unwrap_or(d.links.c2),
            },
            geometry: ModuleGeometry {
                body_length: pv(g.module_body_length, dg.body_length),
                body_radius: pv(g.module_body_radius, dg.body_radius),
                twist_unit_offset: pv(g.twist_unit_offset, dg.twist_unit_offset),
                collision_padding: g.collision_padding.unwrap_or(dg.collision_padding),
                joint_limit: PerVariant {
                    heavy: limits.heavy.to_radians(),
                    light: limits.light.to_radians(),
                },
            },
        }
    }

    /// Fully populated document.
    pub fn from_config(c: &LibraryConfig) -> Self {
        let full = |p: PerVariant<f64>| PartialVariant {
            heavy: Some(p.heavy),
            light: Some(p.light),
        };
        let g = &c.geometry;
        LibraryDocument {
            format_version: crate::FORMAT_VERSION,
            actuators: PartialVariant {
                heavy: Some(c.actuators.heavy),
                light: Some(c.actuators.light),
            },
            links: PartialLinks {
                s1: Some(c.links.s1),
                s2: Some(c.links.s2),
                c1: Some(c.links.c1),
                c2: Some(c.links.c2),
            },
            geometry: PartialGeometry {
                module_body_length: Some(full(g.body_length)),
                module_body_radius: Some(full(g.body_radius)),
                twist_unit_offset: Some(full(g.twist_unit_offset)),
                collision_padding: Some(g.collision_padding),
                joint_limit_deg: Some(full(PerVariant {
                    heavy: g.joint_limit.heavy.to_degrees(),
                    light: g.joint_limit.light.to_degrees(),
                })),
            },
        }
    }
}

/// Parses library JSON; `origin` is used in error messages only.
pub fn parse_library(text: &str, origin: &Path) -> Result<LibraryConfig, FileError> {
    let doc: LibraryDocument = from_json(origin, text)?;
    check_version(origin, doc.format_version)?;
    let config = doc.into_config();
    config
        .validate()
        .map_err(|e| FileError::schema(origin, rename_field(&e.field), e.reason))?;
    Ok(config)
}

/// Maps internal field paths to the names used in the file.
fn rename_field(field: &str) -> String {
    field
        .replace("geometry.body_length", "geometry.module_body_length")
        .replace("geometry.body_radius", "geometry.module_body_radius")
        .replace("geometry.joint_limit", "geometry.joint_limit_deg")
}

pub fn load_library(path: &Path) -> Result<LibraryConfig, FileError> {
    parse_library(&read(path)?, path)
}

/// Fully populated library JSON.
pub fn library_to_json(config: &LibraryConfig) -> String {
    serde_json::to_string_pretty(&LibraryDocument::from_config(config)).expect("library serializes")
}

/// Picks the library: an explicit path first, then [`LIBRARY_ENV`], then the
/// built-in defaults. Returns the path that was read, if any.
pub fn resolve_library(explicit: Option<&Path>) -> Result<(LibraryConfig, Option<PathBuf>), FileError> {
    let path = explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(LIBRARY_ENV).map(PathBuf::from));
    match path {
        Some(p) => Ok((load_library(&p)?, Some(p))),
        None => Ok((LibraryConfig::default(), None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LibraryConfig, FileError> {
        parse_library(text, Path::new("lib.json"))
    }

    #[test]
    fn defaults_round_trip() {
        let text = library_to_json(&LibraryConfig::default());
        let back = parse(&text).unwrap();
        assert_eq!(back, LibraryConfig::default());
        assert_eq!(back.actuators.heavy.mass, 0.57);
    }

    #[test]
    fn missing_geometry_takes_defaults() {
        let c = parse(r#"{"format_version": 1, "geometry": {"collision_padding": 0.01}}"#).unwrap();
        assert_eq!(c.geometry.body_length, LibraryConfig::default().geometry.body_length);
        assert_eq!(c.geometry.collision_padding, 0.01);
    }

    #[test]
    fn negative_link_length_names_the_field() {
        let err = parse(r#"{"format_version": 1, "links": {"S2": {"length": -0.1, "mass": 0.08}}}"#).unwrap_err();
        assert_eq!(err.field(), Some("links.S2.length"));
    }

    #[test]
    fn type_errors_name_the_field() {
        let err = parse(r#"{"format_version": 1, "actuators": {"H": {"mass": "heavy"}}}"#).unwrap_err();
        assert_eq!(err.field(), Some("actuators.H.mass"));
        let err = parse(r#"{"format_version": 1, "geometry": {"module_body_length": {"H": 0.1, "X": 1}}}"#).unwrap_err();
        assert!(err.field().unwrap().starts_with("geometry.module_body_length"));
    }

    #[test]
    fn version_is_checked() {
        let err = parse(r#"{"format_version": 7}"#).unwrap_err();
        assert_eq!(err.field(), Some("format_version"));
    }
}
