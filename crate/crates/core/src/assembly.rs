//! Linear systems for one sequential step.
//!
//! Every node is an unknown and row `i` belongs to node `i`:
//!
//! * interior and derivative-boundary nodes carry the discretized PDE;
//! * Dirichlet nodes carry `u_i = value`;
//! * virtual nodes carry their owner's derivative condition
//!   `h·u_b + l·(d·∇u)_b = q`, with the gradient taken from the owner's
//!   stencil.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{NodeKind, Point, PointCloud};
use crate::error::{Error, Result};
use crate::props::{self, Permeability, PropertySet, ALPHA, BETA};
use crate::sparse::CsrMatrix;
use crate::stencil::{StencilSet, DX, DY};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryCondition {
    Dirichlet {
        value: f64,
    },
    /// `h·u + l·∂u/∂d = q`. Without a direction the derivative is taken
    /// along the outward direction of each virtual node.
    Derivative {
        h: f64,
        l: f64,
        q: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Point>,
    },
}

impl BoundaryCondition {
    pub fn neumann(q: f64) -> Self {
        BoundaryCondition::Derivative {
            h: 0.0,
            l: 1.0,
            q,
            direction: None,
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::Dirichlet { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BoundaryCondition::Dirichlet { value } if !value.is_finite() => {
                Err(Error::Argument(format!("Dirichlet value must be finite, got {value}")))
            }
            BoundaryCondition::Derivative { h, l, q, direction } => {
                if !(h.is_finite() && l.is_finite() && q.is_finite()) {
                    return Err(Error::Argument("derivative condition coefficients must be finite".into()));
                }
                if *h == 0.0 && *l == 0.0 {
                    return Err(Error::Argument("derivative condition needs h and l not both zero".into()));
                }
                if let Some(d) = direction {
                    if d.normalized().is_none() {
                        return Err(Error::Argument("derivative direction must be a non-zero vector".into()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Pressure and temperature conditions of one boundary segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentBc {
    pub pressure: BoundaryCondition,
    pub temperature: BoundaryCondition,
}

/// Nodal mass (1/day) and heat (J/m³/day) sources.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceTerm {
    pub q: Vec<f64>,
    pub q_h: Vec<f64>,
}

impl SourceTerm {
    pub fn zeros(n: usize) -> Self {
        Self {
            q: vec![0.0; n],
            q_h: vec![0.0; n],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvectionTime {
    /// Donor temperature at the new time level.
    #[default]
    Implicit,
    /// Donor temperature lagged at the old time level.
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeRow {
    pub h: f64,
    pub l: f64,
    pub q: f64,
    pub direction: Point,
}

/// Equation type of each unknown.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowKind {
    Pde,
    Dirichlet { p: f64, t: f64 },
    Virtual { owner: usize, p: DerivativeRow, t: DerivativeRow },
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn size(&self) -> usize {
        self.rhs.len()
    }
}

/// Geometry-dependent data shared by all steps.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub cloud: PointCloud,
    pub stencils: StencilSet,
    pub props: PropertySet,
    /// Nodal permeability; virtual nodes take their owner's value.
    pub perm: Vec<f64>,
    pub rows: Vec<RowKind>,
    pub sources: SourceTerm,
}

impl Discretization {
    /// `cloud` must already have its index sets.
    pub fn new(
        cloud: PointCloud,
        props: PropertySet,
        permeability: &Permeability,
        bcs: &BTreeMap<String, SegmentBc>,
        sources: SourceTerm,
    ) -> Result<Self> {
        props.validate()?;
        let n = cloud.len();
        if sources.q.len() != n || sources.q_h.len() != n {
            return Err(Error::Argument(format!("source vectors must have {n} entries")));
        }
        let stencils = StencilSet::build(&cloud)?;
        let mut perm = vec![0.0; n];
        for node in cloud.nodes().iter().filter(|n| !n.is_virtual()) {
            let k = props::permeability_at(node.position, permeability, cloud.h_avg())
                .map_err(|e| match e {
                    Error::Lookup(m) => Error::Lookup(format!("node {}: {m}", node.id)),
                    e => e,
                })?;
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Physicality(format!("permeability {k} at node {} is not positive", node.id)));
            }
            perm[node.id] = k;
        }
        for node in cloud.nodes().iter().filter(|n| n.is_virtual()) {
            perm[node.id] = perm[node.owner.unwrap()];
        }
        let rows = resolve_rows(&cloud, bcs)?;
        Ok(Self {
            cloud,
            stencils,
            props,
            perm,
            rows,
            sources,
        })
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }
}

fn segment<'a>(bcs: &'a BTreeMap<String, SegmentBc>, label: Option<&str>, node: usize) -> Result<&'a SegmentBc> {
    let label = label.ok_or_else(|| Error::Argument(format!("boundary node {node} has no segment label")))?;
    bcs.get(label)
        .ok_or_else(|| Error::Argument(format!("no boundary conditions for segment {label} (node {node})")))
}

fn resolve_rows(cloud: &PointCloud, bcs: &BTreeMap<String, SegmentBc>) -> Result<Vec<RowKind>> {
    for (label, bc) in bcs {
        bc.pressure.validate()?;
        bc.temperature.validate()?;
        if bc.pressure.is_dirichlet() != bc.temperature.is_dirichlet() {
            return Err(Error::Argument(format!(
                "segment {label} mixes Dirichlet and derivative conditions between pressure and temperature"
            )));
        }
    }
    cloud
        .nodes()
        .iter()
        .map(|node| match node.kind {
            NodeKind::Interior | NodeKind::DerivativeBoundary => Ok(RowKind::Pde),
            NodeKind::DirichletBoundary => {
                let seg = segment(bcs, node.label.as_deref(), node.id)?;
                match (&seg.pressure, &seg.temperature) {
                    (BoundaryCondition::Dirichlet { value: p }, BoundaryCondition::Dirichlet { value: t }) => {
                        Ok(RowKind::Dirichlet { p: *p, t: *t })
                    }
                    _ => Err(Error::Argument(format!(
                        "node {} lies on Dirichlet segment {:?} but the segment's conditions are not Dirichlet",
                        node.id, node.label
                    ))),
                }
            }
            NodeKind::Virtual => {
                let owner = node.owner.unwrap();
                let seg = segment(bcs, node.label.as_deref(), node.id)?;
                let outward = (node.position - cloud.node(owner).position)
                    .normalized()
                    .ok_or_else(|| Error::Geometry(format!("virtual node {} coincides with its owner", node.id)))?;
                let row = |bc: &BoundaryCondition| match bc {
                    BoundaryCondition::Derivative { h, l, q, direction } => Ok(DerivativeRow {
                        h: *h,
                        l: *l,
                        q: *q,
                        direction: direction.and_then(Point::normalized).unwrap_or(outward),
                    }),
                    BoundaryCondition::Dirichlet { .. } => Err(Error::Argument(format!(
                        "virtual node {} serves segment {:?}, which has no derivative condition",
                        node.id, node.label
                    ))),
                };
                Ok(RowKind::Virtual {
                    owner,
                    p: row(&seg.pressure)?,
                    t: row(&seg.temperature)?,
                })
            }
        })
        .collect()
}

/// Donor temperature of the pair: `t_j` when `p_j ≥ p_i`, else `t_i`.
pub fn upwind_select(p_i: f64, p_j: f64, t_i: f64, t_j: f64) -> f64 {
    if p_j >= p_i {
        t_j
    } else {
        t_i
    }
}

/// `(k_ij/μ_ij)·(m3+m4)` and `λ_ij·(m3+m4)` for neighbor slot `slot` of
/// node `i`, from nodal viscosities and conduction coefficients.
pub fn transmissibility(disc: &Discretization, i: usize, slot: usize, mu: &[f64], lambda: &[f64]) -> Result<(f64, f64)> {
    let s = disc
        .stencils
        .get(i)
        .ok_or_else(|| Error::Argument(format!("node {i} has no stencil")))?;
    let j = s.neighbors[slot];
    let lap = s.laplacian_coeff(slot);
    let k = props::harmonic_perm(disc.perm[i], disc.perm[j])?;
    let m = props::arithmetic_visc(mu[i], mu[j])?;
    let l = props::harmonic_lambda(lambda[i], lambda[j])?;
    Ok((k / m * lap, l * lap))
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("time step must be positive, got {dt}")))
    }
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} has {} values, expected {n}", v.len())))
    }
}

fn nodal_viscosity(disc: &Discretization, t: &[f64]) -> Vec<f64> {
    t.iter().map(|&t| props::viscosity(t, &disc.props)).collect()
}

/// Row of a derivative condition at virtual node `v` owned by `owner`.
fn derivative_row(disc: &Discretization, v: usize, owner: usize, bc: &DerivativeRow) -> Result<(Vec<(usize, f64)>, f64)> {
    let s = disc
        .stencils
        .get(owner)
        .ok_or_else(|| Error::Argument(format!("owner {owner} of virtual node {v} has no stencil")))?;
    let mut row = Vec::with_capacity(s.neighbors.len() + 1);
    let mut centre = bc.h;
    for (slot, &j) in s.neighbors.iter().enumerate() {
        let g = bc.l * (bc.direction.x * s.rows[DX][slot] + bc.direction.y * s.rows[DY][slot]);
        row.push((j, g));
        centre -= g;
    }
    row.push((owner, centre));
    if !row.iter().any(|&(j, c)| j == v && c != 0.0) {
        return Err(Error::Solvability(format!(
            "virtual node {v} has no weight in its boundary equation; reduce the virtual offset"
        )));
    }
    Ok((row, bc.q))
}

fn gather(n: usize, rows: Vec<Result<(Vec<(usize, f64)>, f64)>>) -> Result<LinearSystem> {
    let mut entries = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for r in rows {
        let (row, b) = r?;
        entries.push(row);
        rhs.push(b);
    }
    Ok(LinearSystem {
        matrix: CsrMatrix::from_rows(entries)?,
        rhs,
    })
}

/// Implicit pressure system with viscosity and accumulation at level n.
pub fn assemble_pressure(disc: &Discretization, p_n: &[f64], t_n: &[f64], dt: f64) -> Result<LinearSystem> {
    let n = disc.len();
    check_dt(dt)?;
    check_len("pressure", p_n, n)?;
    check_len("temperature", t_n, n)?;
    let pr = &disc.props;
    let has_anchor = disc.rows.iter().any(|r| match r {
        RowKind::Dirichlet { .. } => true,
        RowKind::Virtual { p, .. } => p.h != 0.0,
        RowKind::Pde => false,
    });
    if !has_anchor && (pr.c_t == 0.0 || dt.is_infinite()) {
        return Err(Error::Solvability(
            "pressure is fixed only up to a constant: no Dirichlet or Robin pressure condition and no accumulation term"
                .into(),
        ));
    }
    let mu = nodal_viscosity(disc, t_n);
    let rows: Vec<Result<(Vec<(usize, f64)>, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| match &disc.rows[i] {
            RowKind::Dirichlet { p, .. } => Ok((vec![(i, 1.0)], *p)),
            RowKind::Virtual { owner, p, .. } => derivative_row(disc, i, *owner, p),
            RowKind::Pde => {
                let s = disc.stencils.get(i).unwrap();
                let mut row = Vec::with_capacity(s.neighbors.len() + 1);
                let mut diag = 0.0;
                for (slot, &j) in s.neighbors.iter().enumerate() {
                    let k = props::harmonic_perm(disc.perm[i], disc.perm[j])?;
                    let m = props::arithmetic_visc(mu[i], mu[j])?;
                    let a = ALPHA * k / m * s.laplacian_coeff(slot);
                    row.push((j, a));
                    diag -= a;
                }
                let acc = pr.thermal_factor(t_n[i]) * pr.c_t / dt;
                row.push((i, diag - acc));
                Ok((row, -acc * p_n[i] - disc.sources.q[i]))
            }
        })
        .collect();
    gather(n, rows)
}

/// Temperature system given the new pressure, with single-point-upstream
/// convection.
pub fn assemble_temperature(
    disc: &Discretization,
    p_n: &[f64],
    t_n: &[f64],
    p_next: &[f64],
    dt: f64,
    convection: ConvectionTime,
) -> Result<LinearSystem> {
    let n = disc.len();
    check_dt(dt)?;
    check_len("pressure", p_n, n)?;
    check_len("temperature", t_n, n)?;
    check_len("new pressure", p_next, n)?;
    let pr = &disc.props;
    let mu = nodal_viscosity(disc, t_n);
    let lambda: Vec<f64> = (0..n)
        .map(|i| {
            props::lambda_c(p_next[i], t_n[i], pr).map_err(|e| match e {
                Error::Physicality(m) => Error::Physicality(format!("node {i}: {m}")),
                e => e,
            })
        })
        .collect::<Result<_>>()?;
    let conv_scale = ALPHA * pr.rho_l * pr.c_l;
    let rows: Vec<Result<(Vec<(usize, f64)>, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| match &disc.rows[i] {
            RowKind::Dirichlet { t, .. } => Ok((vec![(i, 1.0)], *t)),
            RowKind::Virtual { owner, t, .. } => derivative_row(disc, i, *owner, t),
            RowKind::Pde => {
                let s = disc.stencils.get(i).unwrap();
                let mut row = Vec::with_capacity(s.neighbors.len() + 1);
                let mut diag = 0.0;
                let mut rhs = 0.0;
                for (slot, &j) in s.neighbors.iter().enumerate() {
                    let lap = s.laplacian_coeff(slot);
                    let k = props::harmonic_perm(disc.perm[i], disc.perm[j])?;
                    let m = props::arithmetic_visc(mu[i], mu[j])?;
                    let l = props::harmonic_lambda(lambda[i], lambda[j])?;
                    let cond = BETA * l * lap;
                    row.push((j, cond));
                    diag -= cond;
                    let flux = conv_scale * k / m * lap * (p_next[j] - p_next[i]);
                    let donor = if p_next[j] >= p_next[i] { j } else { i };
                    match convection {
                        ConvectionTime::Implicit => {
                            if donor == i {
                                diag += flux;
                            } else {
                                row.push((j, flux));
                            }
                        }
                        ConvectionTime::Explicit => rhs -= flux * t_n[donor],
                    }
                }
                let phi_next = props::porosity(p_next[i], t_n[i], pr)?;
                let phi_n = props::porosity(p_n[i], t_n[i], pr)?;
                row.push((i, diag - pr.heat_capacity(phi_next) / dt));
                rhs += -pr.heat_capacity(phi_n) * t_n[i] / dt - disc.sources.q_h[i];
                Ok((row, rhs))
            }
        })
        .collect();
    gather(n, rows)
}
