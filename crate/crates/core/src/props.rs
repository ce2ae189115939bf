//! Rock and fluid property models in field units: MPa, days, meters, mD,
//! mPa·s, J/s/m/°C.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cloud::{Point, SpatialGrid};
use crate::error::{Error, Result};

/// Darcy unit conversion factor (mD·MPa/(mPa·s·m) to m/day).
pub const ALPHA: f64 = 0.0864;
/// Seconds per day, applied to the conduction term.
pub const BETA: f64 = 86400.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySet {
    pub phi_0: f64,
    /// Compressibility, 1/MPa.
    pub c_t: f64,
    /// Thermal expansion coefficient, 1/°C.
    pub c_temp: f64,
    pub p_0: f64,
    pub t_0: f64,
    pub mu_0: f64,
    pub alpha_t: f64,
    pub lambda_l: f64,
    pub lambda_r: f64,
    pub rho_l: f64,
    pub rho_r: f64,
    pub c_l: f64,
    pub c_r: f64,
    pub permeability: PermeabilityField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PermeabilityField {
    Uniform { value: f64 },
    /// `k0·exp(−x/length)`.
    Exponential { k0: f64, length: f64 },
    /// CSV file of `x,y,k` rows, sampled by nearest point.
    Tabulated { path: PathBuf },
}

impl PropertySet {
    /// Table 1 style homogeneous rock with no compressibility, thermal
    /// expansion or viscosity-temperature coupling.
    pub fn rectangle_benchmark() -> Self {
        Self {
            phi_0: 0.3,
            c_t: 0.0,
            c_temp: 0.0,
            p_0: 10.0,
            t_0: 60.0,
            mu_0: 5.0,
            alpha_t: 0.0,
            lambda_l: 0.2,
            lambda_r: 3.0,
            rho_l: 1000.0,
            rho_r: 2700.0,
            c_l: 4200.0,
            c_r: 200.0,
            permeability: PermeabilityField::Uniform { value: 500.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("phi_0", self.phi_0),
            ("c_t", self.c_t),
            ("c_temp", self.c_temp),
            ("p_0", self.p_0),
            ("t_0", self.t_0),
            ("alpha_t", self.alpha_t),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Physicality(format!("{name} must be finite, got {v}")));
            }
        }
        if !(self.phi_0 > 0.0 && self.phi_0 < 1.0) {
            return Err(Error::Physicality(format!("phi_0 must lie in (0, 1), got {}", self.phi_0)));
        }
        let positive = [
            ("mu_0", self.mu_0),
            ("lambda_l", self.lambda_l),
            ("lambda_r", self.lambda_r),
            ("rho_l", self.rho_l),
            ("rho_r", self.rho_r),
            ("c_l", self.c_l),
            ("c_r", self.c_r),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Physicality(format!("{name} must be positive, got {v}")));
            }
        }
        match &self.permeability {
            PermeabilityField::Uniform { value } if !(*value > 0.0 && value.is_finite()) => {
                Err(Error::Physicality(format!("permeability must be positive, got {value}")))
            }
            PermeabilityField::Exponential { k0, length } if !(*k0 > 0.0 && k0.is_finite() && length.is_finite() && *length != 0.0) => {
                Err(Error::Physicality(format!(
                    "exponential permeability needs k0 > 0 and a non-zero length, got k0={k0}, length={length}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Volumetric heat capacity (1−φ)ρ_rC_r + φρ_lC_l.
    pub fn heat_capacity(&self, phi: f64) -> f64 {
        (1.0 - phi) * self.rho_r * self.c_r + phi * self.rho_l * self.c_l
    }

    /// Pressure accumulation factor 1 + ((1−φ₀)/φ₀)·C_Temp·(T − T₀).
    pub fn thermal_factor(&self, t: f64) -> f64 {
        1.0 + (1.0 - self.phi_0) / self.phi_0 * self.c_temp * (t - self.t_0)
    }
}

/// φ(p, T) = [φ₀ + C_t(p − p₀)]·[1 + ((1−φ₀)/φ₀)·C_Temp·(T − T₀)].
pub fn porosity(p: f64, t: f64, props: &PropertySet) -> Result<f64> {
    let phi = (props.phi_0 + props.c_t * (p - props.p_0)) * props.thermal_factor(t);
    if phi > 0.0 && phi < 1.0 {
        Ok(phi)
    } else {
        Err(Error::Physicality(format!("porosity {phi} at p={p}, T={t} is outside (0, 1)")))
    }
}

/// Porosity-weighted conduction coefficient φλ_l + (1−φ)λ_r.
pub fn lambda_c(p: f64, t: f64, props: &PropertySet) -> Result<f64> {
    let phi = porosity(p, t, props)?;
    Ok(phi * props.lambda_l + (1.0 - phi) * props.lambda_r)
}

/// μ(T) = μ₀·exp(−α_T(T − T₀)).
pub fn viscosity(t: f64, props: &PropertySet) -> f64 {
    props.mu_0 * (-props.alpha_t * (t - props.t_0)).exp()
}

fn check_positive(name: &str, a: f64, b: f64) -> Result<()> {
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} averaging needs positive inputs, got {a} and {b}")))
    }
}

pub fn harmonic_perm(k_i: f64, k_j: f64) -> Result<f64> {
    check_positive("permeability", k_i, k_j)?;
    Ok(harmonic(k_i, k_j))
}

pub fn arithmetic_visc(mu_i: f64, mu_j: f64) -> Result<f64> {
    check_positive("viscosity", mu_i, mu_j)?;
    Ok(0.5 * (mu_i + mu_j))
}

pub fn harmonic_lambda(l_i: f64, l_j: f64) -> Result<f64> {
    check_positive("conduction coefficient", l_i, l_j)?;
    Ok(harmonic(l_i, l_j))
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a == b {
        a
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Permeability field ready for point queries.
#[derive(Clone, Debug)]
pub enum Permeability {
    Uniform(f64),
    Exponential { k0: f64, length: f64 },
    Table(PermeabilityTable),
}

#[derive(Clone, Debug)]
pub struct PermeabilityTable {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl PermeabilityTable {
    pub fn new(points: Vec<Point>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(Error::Argument(format!(
                "permeability table needs matching non-empty point and value lists ({} vs {})",
                points.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Physicality(format!("tabulated permeability must be positive, got {v}")));
        }
        let bb = crate::cloud::geometry::bbox_of(&points);
        let cell = (bb.width() * bb.height() / points.len() as f64).sqrt().max(bb.diagonal() * 1e-6).max(1e-12);
        Ok(Self {
            grid: SpatialGrid::new(&points, cell),
            values,
        })
    }

    /// Reads `x,y,k` rows; a non-numeric first line is taken as a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut values = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let nums: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
            match nums {
                Some(v) if v.len() == 3 => {
                    points.push(Point::new(v[0], v[1]));
                    values.push(v[2]);
                }
                None if points.is_empty() && k == 0 => continue,
                _ => {
                    return Err(Error::Parse {
                        line: k + 1,
                        message: format!("expected `x,y,k`, found `{line}`"),
                    })
                }
            }
        }
        Self::new(points, values)
    }

    pub fn lookup(&self, p: Point, max_distance: f64) -> Result<f64> {
        match self.grid.nearest(p, None) {
            Some((j, d)) if d <= max_distance => Ok(self.values[j]),
            Some((_, d)) => Err(Error::Lookup(format!(
                "no tabulated permeability within {max_distance} of {p} (nearest at {d})"
            ))),
            None => Err(Error::Lookup("empty permeability table".into())),
        }
    }
}

impl Permeability {
    /// Resolves a field description; table paths are relative to `base`.
    pub fn resolve(field: &PermeabilityField, base: &Path) -> Result<Self> {
        Ok(match field {
            PermeabilityField::Uniform { value } => Permeability::Uniform(*value),
            PermeabilityField::Exponential { k0, length } => Permeability::Exponential {
                k0: *k0,
                length: *length,
            },
            PermeabilityField::Tabulated { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", full.display())))
                })?;
                Permeability::Table(PermeabilityTable::from_csv(&text)?)
            }
        })
    }
}

/// Permeability at a point. Tabulated fields use the nearest sample, which
/// must lie within `h_avg`.
pub fn permeability_at(p: Point, field: &Permeability, h_avg: f64) -> Result<f64> {
    match field {
        Permeability::Uniform(k) => Ok(*k),
        Permeability::Exponential { k0, length } => Ok(k0 * (-p.x / length).exp()),
        Permeability::Table(t) => t.lookup(p, h_avg),
    }
}
