//! Case configuration: JSON schema, validation, bundled cases, and
//! construction of the discretization.
//!
//! ```json
//! {
//!   "name": "...",
//!   "geometry": {"type": "rectangle", "x0": 0, "y0": 0, "width": 300, "height": 100,
//!                "labels": ["G4", "G2", "G3", "G1"]},
//!   "cloud": {"type": "cartesian", "dx": 5, "dy": 5},
//!   "rm_mult": 1.6,
//!   "virtual_offset_mult": 1.0,
//!   "properties": {...},
//!   "boundary_conditions": {"G1": {"pressure": {...}, "temperature": {...}}, ...},
//!   "schedule": {"dt": 0.5, "t_end": 100, "snapshot_times": [20, 50, 100],
//!                "convection_time": "implicit"},
//!   "sources": [{"x": 10, "y": 10, "q": 0.0, "q_h": 0.0}],
//!   "output": {"directory": "out", "vtk": false}
//! }
//! ```
//!
//! Rectangle labels are listed bottom, right, top, left. Polygon labels are
//! one per edge, edge `i` running from vertex `i` to vertex `i + 1`. Cloud
//! alternatives are `{"type": "scattered", "spacing", "seed"}` and
//! `{"type": "file", "path"}`. Relative paths resolve against the config
//! file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::{Discretization, SegmentBc, SourceTerm};
use crate::cloud::{self, BoundaryKind, DomainGeometry, Point, PointCloud};
use crate::error::{Error, Result};
use crate::march::ScheduleConfig;
use crate::props::{Permeability, PropertySet};

/// Smallest accepted r_m / spacing; below it Cartesian interior stencils
/// lose their diagonal neighbors.
pub const MIN_RM_MULT: f64 = 1.3;

const CASE_3_1: &str = include_str!("../../../cases/case_3_1.json");
const CASE_3_2: &str = include_str!("../../../cases/case_3_2.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub geometry: GeometrySpec,
    pub cloud: CloudSpec,
    pub rm_mult: f64,
    #[serde(default = "default_offset_mult")]
    pub virtual_offset_mult: f64,
    pub properties: PropertySet,
    pub boundary_conditions: BTreeMap<String, SegmentBc>,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub sources: Vec<PointSource>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_offset_mult() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Rectangle {
        x0: f64,
        y0: f64,
        width: f64,
        height: f64,
        /// Bottom, right, top, left.
        labels: [String; 4],
    },
    Polygon {
        vertices: Vec<Point>,
        labels: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CloudSpec {
    Cartesian { dx: f64, dy: f64 },
    Scattered { spacing: f64, seed: u64 },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSource {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub q_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub directory: PathBuf,
    #[serde(default)]
    pub vtk: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("output")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: default_out_dir(),
            vtk: false,
        }
    }
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub rm_mult: Option<f64>,
    /// Node spacing: dx = dy for Cartesian clouds, the target spacing for
    /// scattered ones.
    pub dx: Option<f64>,
    pub out: Option<PathBuf>,
}

/// Names of the bundled cases.
pub const BUNDLED: [&str; 2] = ["case_3_1", "case_3_2"];

/// Parses and validates a bundled case by name (with or without `.json`).
pub fn bundled(name: &str) -> Result<CaseConfig> {
    let text = match name.trim_end_matches(".json") {
        "case_3_1" => CASE_3_1,
        "case_3_2" => CASE_3_2,
        other => return Err(Error::Argument(format!("unknown bundled case `{other}`; available: {BUNDLED:?}"))),
    };
    parse_config_str(text, Path::new("."))
}

pub fn parse_config(path: &Path) -> Result<CaseConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<CaseConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: CaseConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
    })?;
    cfg.base_dir = base_dir.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

fn at(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::config(path, e.to_string())
}

impl CaseConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply_overrides(&mut self, o: &Overrides) -> Result<()> {
        if let Some(dt) = o.dt {
            self.schedule.dt = dt;
        }
        if let Some(t) = o.t_end {
            self.schedule.t_end = t;
            self.schedule.snapshot_times.retain(|&s| s <= t);
        }
        if let Some(r) = o.rm_mult {
            self.rm_mult = r;
        }
        if let Some(dx) = o.dx {
            match &mut self.cloud {
                CloudSpec::Cartesian { dx: x, dy: y } => {
                    *x = dx;
                    *y = dx;
                }
                CloudSpec::Scattered { spacing, .. } => *spacing = dx,
                CloudSpec::File { .. } => {
                    return Err(Error::config("cloud", "--dx cannot override a cloud loaded from a file"));
                }
            }
        }
        if let Some(out) = &o.out {
            self.output.directory = out.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rm_mult >= MIN_RM_MULT && self.rm_mult.is_finite()) {
            return Err(Error::config(
                "rm_mult",
                format!("must be at least {MIN_RM_MULT}, got {}", self.rm_mult),
            ));
        }
        if !(self.virtual_offset_mult > 0.0 && self.virtual_offset_mult <= self.rm_mult) {
            return Err(Error::config(
                "virtual_offset_mult",
                format!("must lie in (0, rm_mult = {}], got {}", self.rm_mult, self.virtual_offset_mult),
            ));
        }
        match &self.cloud {
            CloudSpec::Cartesian { dx, dy } if !(*dx > 0.0 && *dy > 0.0) => {
                return Err(Error::config("cloud", format!("dx and dy must be positive, got {dx}, {dy}")));
            }
            CloudSpec::Scattered { spacing, .. } if !(*spacing > 0.0) => {
                return Err(Error::config("cloud.spacing", format!("must be positive, got {spacing}")));
            }
            _ => {}
        }
        let geom = self.bare_geometry().map_err(at("geometry"))?;
        for label in geom.labels() {
            if !self.boundary_conditions.contains_key(label) {
                return Err(Error::config(
                    format!("boundary_conditions.{label}"),
                    "missing conditions for this boundary segment",
                ));
            }
        }
        for (label, bc) in &self.boundary_conditions {
            if geom.kind_of_label(label).is_none() {
                return Err(Error::config(
                    format!("boundary_conditions.{label}"),
                    "no geometry edge carries this label",
                ));
            }
            bc.pressure
                .validate()
                .map_err(|e| Error::config(format!("boundary_conditions.{label}.pressure"), e.to_string()))?;
            bc.temperature
                .validate()
                .map_err(|e| Error::config(format!("boundary_conditions.{label}.temperature"), e.to_string()))?;
            if bc.pressure.is_dirichlet() != bc.temperature.is_dirichlet() {
                return Err(Error::config(
                    format!("boundary_conditions.{label}"),
                    "pressure and temperature must both be Dirichlet or both derivative conditions",
                ));
            }
        }
        self.properties.validate().map_err(at("properties"))?;
        self.schedule.validate().map_err(at("schedule"))?;
        for (i, s) in self.sources.iter().enumerate() {
            if ![s.x, s.y, s.q, s.q_h].iter().all(|v| v.is_finite()) {
                return Err(Error::config(format!("sources[{i}]"), "values must be finite"));
            }
        }
        Ok(())
    }

    fn bare_geometry(&self) -> Result<DomainGeometry> {
        match &self.geometry {
            GeometrySpec::Rectangle {
                x0,
                y0,
                width,
                height,
                labels,
            } => DomainGeometry::rectangle(*x0, *y0, *width, *height, [labels[0].as_str(), labels[1].as_str(), labels[2].as_str(), labels[3].as_str()]),
            GeometrySpec::Polygon { vertices, labels } => DomainGeometry::polygon(vertices.clone(), labels.clone()),
        }
    }

    /// Domain polygon with boundary kinds taken from the pressure conditions.
    pub fn geometry(&self) -> Result<DomainGeometry> {
        let kinds: BTreeMap<String, BoundaryKind> = self
            .boundary_conditions
            .iter()
            .map(|(l, bc)| {
                let k = if bc.pressure.is_dirichlet() {
                    BoundaryKind::Dirichlet
                } else {
                    BoundaryKind::Derivative
                };
                (l.clone(), k)
            })
            .collect();
        self.bare_geometry()?.with_boundary_kinds(&kinds)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Nodes with virtual nodes added, before index sets are built.
    pub fn point_cloud(&self) -> Result<PointCloud> {
        let geom = self.geometry()?;
        match &self.cloud {
            CloudSpec::Cartesian { dx, dy } => {
                let c = cloud::generate_cartesian_cloud(&geom, *dx, *dy)?;
                let offset = self.virtual_offset_mult * c.spacing();
                cloud::add_virtual_nodes(c, &geom, offset)
            }
            CloudSpec::Scattered { spacing, seed } => {
                let c = cloud::generate_scattered_cloud(&geom, *spacing, *seed)?;
                let offset = self.virtual_offset_mult * c.spacing();
                cloud::add_virtual_nodes(c, &geom, offset)
            }
            CloudSpec::File { path } => cloud::io::load_cloud(&self.resolve(path)),
        }
    }

    /// Cloud with index sets at r_m = rm_mult × spacing.
    pub fn indexed_cloud(&self) -> Result<PointCloud> {
        let c = self.point_cloud()?;
        let r_m = self.rm_mult * c.spacing();
        c.build_index_sets(r_m)
    }

    pub fn discretization(&self) -> Result<Discretization> {
        let c = self.indexed_cloud()?;
        let perm = Permeability::resolve(&self.properties.permeability, &self.base_dir)?;
        let sources = self.source_term(&c)?;
        Discretization::new(c, self.properties.clone(), &perm, &self.boundary_conditions, sources)
    }

    /// Point sources go to the nearest node that carries a PDE row.
    fn source_term(&self, c: &PointCloud) -> Result<SourceTerm> {
        let mut s = SourceTerm::zeros(c.len());
        for (k, src) in self.sources.iter().enumerate() {
            let p = Point::new(src.x, src.y);
            let target = c
                .nodes()
                .iter()
                .filter(|n| n.has_pde_row())
                .min_by(|a, b| a.position.dist2(p).total_cmp(&b.position.dist2(p)))
                .ok_or_else(|| Error::config(format!("sources[{k}]"), "cloud has no PDE nodes"))?;
            s.q[target.id] += src.q;
            s.q_h[target.id] += src.q_h;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::BoundaryCondition;

    #[test]
    fn bundled_cases_parse() {
        let a = bundled("case_3_1").unwrap();
        assert_eq!(a.rm_mult, 1.6);
        assert_eq!(a.boundary_conditions["G1"].pressure, BoundaryCondition::Dirichlet { value: 25.0 });
        assert_eq!(a.boundary_conditions["G2"].temperature, BoundaryCondition::Dirichlet { value: 60.0 });
        assert_eq!(a.boundary_conditions["G3"].temperature, BoundaryCondition::neumann(0.0));
        let b = bundled("case_3_2.json").unwrap();
        assert!(matches!(b.geometry, GeometrySpec::Polygon { .. }));
        assert_eq!(b.properties.c_t, 1e-5);
        assert_eq!(b.properties.alpha_t, 0.05);
        assert!(bundled("nope").is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        for name in BUNDLED {
            let a = bundled(name).unwrap();
            let b = parse_config_str(&a.to_json(), Path::new(".")).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn missing_segment_condition_names_path() {
        let mut v: serde_json::Value = serde_json::from_str(CASE_3_1).unwrap();
        v["boundary_conditions"].as_object_mut().unwrap().remove("G3");
        match parse_config_str(&v.to_string(), Path::new(".")) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "boundary_conditions.G3"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_names_path() {
        let mut v: serde_json::Value = serde_json::from_str(CASE_3_1).unwrap();
        v["schedule"]["dtt"] = 1.into();
        match parse_config_str(&v.to_string(), Path::new(".")) {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "schedule.dtt");
                assert!(message.contains("dtt"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_radius_rejected() {
        let mut c = bundled("case_3_1").unwrap();
        assert!(c.apply_overrides(&Overrides { rm_mult: Some(1.2), ..Default::default() }).is_err());
    }
}
