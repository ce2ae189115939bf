//! Point-cloud discretization of the domain: node generation, boundary
//! classification, virtual nodes for derivative conditions, and the
//! influence-domain index sets.

mod generate;
pub mod geometry;
pub mod io;
pub mod neighbors;
mod virtual_nodes;

pub use generate::{generate_cartesian_cloud, generate_scattered_cloud};
pub use geometry::{BBox, BoundaryKind, DomainGeometry, Point};
pub use neighbors::{brute_force_index_sets, SpatialGrid};
pub use virtual_nodes::add_virtual_nodes;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Interior,
    DirichletBoundary,
    DerivativeBoundary,
    Virtual,
}

impl NodeKind {
    /// Single-letter code used in cloud and snapshot files.
    pub fn code(self) -> char {
        match self {
            NodeKind::Interior => 'I',
            NodeKind::DirichletBoundary => 'D',
            NodeKind::DerivativeBoundary => 'N',
            NodeKind::Virtual => 'V',
        }
    }

    pub fn from_code(c: &str) -> Option<Self> {
        match c {
            "I" => Some(NodeKind::Interior),
            "D" => Some(NodeKind::DirichletBoundary),
            "N" => Some(NodeKind::DerivativeBoundary),
            "V" => Some(NodeKind::Virtual),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: usize,
    pub position: Point,
    pub kind: NodeKind,
    /// Boundary node whose derivative condition this virtual node carries.
    pub owner: Option<usize>,
    pub outward_normal: Option<Point>,
    /// Boundary segment label: the prescribing segment for Dirichlet nodes,
    /// the served segment for virtual nodes.
    pub label: Option<String>,
}

impl Node {
    pub fn is_virtual(&self) -> bool {
        self.kind == NodeKind::Virtual
    }

    /// Interior and derivative-boundary nodes carry a discretized PDE row.
    pub fn has_pde_row(&self) -> bool {
        matches!(self.kind, NodeKind::Interior | NodeKind::DerivativeBoundary)
    }
}

#[derive(Clone, Debug)]
pub struct PointCloud {
    nodes: Vec<Node>,
    /// Nominal node spacing the cloud was generated with; influence radii
    /// are expressed as multiples of it.
    spacing: f64,
    h_avg: f64,
    radius: Option<f64>,
    index_sets: Vec<Vec<usize>>,
    virtuals_of: Vec<Vec<usize>>,
}

impl PointCloud {
    /// Wraps a node list, validating the node invariants.
    pub fn from_nodes(nodes: Vec<Node>, spacing: Option<f64>) -> Result<Self> {
        let h_avg = average_nearest_spacing(&nodes);
        let spacing = spacing.unwrap_or(h_avg);
        Self::with_spacing(nodes, spacing, h_avg)
    }

    pub(crate) fn with_spacing(nodes: Vec<Node>, spacing: f64, h_avg: f64) -> Result<Self> {
        validate_nodes(&nodes)?;
        let mut virtuals_of = vec![Vec::new(); nodes.len()];
        for n in &nodes {
            if let Some(o) = n.owner {
                virtuals_of[o].push(n.id);
            }
        }
        Ok(Self {
            index_sets: vec![Vec::new(); nodes.len()],
            nodes,
            spacing,
            h_avg,
            radius: None,
            virtuals_of,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Average nearest-neighbor distance over non-virtual nodes.
    pub fn h_avg(&self) -> f64 {
        self.h_avg
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    /// Λ_i: ids of the other nodes inside the influence disk of node `i`,
    /// sorted ascending. Empty for virtual nodes and before
    /// [`Self::build_index_sets`] runs.
    pub fn index_set(&self, i: usize) -> &[usize] {
        &self.index_sets[i]
    }

    pub fn virtuals_of(&self, owner: usize) -> &[usize] {
        &self.virtuals_of[owner]
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Nodes that need a derivative stencil of their own: PDE-row nodes and
    /// Dirichlet nodes that own virtual nodes (their derivative condition is
    /// discretized with their stencil).
    pub fn needs_stencil(&self, i: usize) -> bool {
        let n = &self.nodes[i];
        n.has_pde_row() || (n.kind == NodeKind::DirichletBoundary && !self.virtuals_of[i].is_empty())
    }

    pub fn has_index_sets(&self) -> bool {
        self.radius.is_some()
    }

    /// Populates Λ_i for every non-virtual node with a uniform radius using
    /// spatial binning.
    pub fn build_index_sets(mut self, r_m: f64) -> Result<Self> {
        if !(r_m > 0.0 && r_m.is_finite()) {
            return Err(Error::Argument(format!("influence radius must be positive, got {r_m}")));
        }
        let positions = self.positions();
        let grid = SpatialGrid::new(&positions, r_m);
        let r2 = r_m * r_m;
        let mut sets = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            if node.is_virtual() {
                sets.push(Vec::new());
                continue;
            }
            let mut set = Vec::new();
            grid.for_each_within(node.position, r_m, |j, d2| {
                if j != node.id && d2 <= r2 {
                    set.push(j);
                }
            });
            set.sort_unstable();
            sets.push(set);
        }
        for node in &self.nodes {
            if let Some(owner) = node.owner {
                if sets[owner].binary_search(&node.id).is_err() {
                    return Err(Error::Geometry(format!(
                        "virtual node {} lies {:.6} from its owner {owner}, outside the influence radius {r_m}; use a smaller virtual offset",
                        node.id,
                        node.position.dist(self.nodes[owner].position)
                    )));
                }
            }
        }
        for node in &self.nodes {
            if node.has_pde_row() && sets[node.id].len() < 5 {
                return Err(Error::StencilDeficiency {
                    node: node.id,
                    count: sets[node.id].len(),
                });
            }
        }
        self.index_sets = sets;
        self.radius = Some(r_m);
        Ok(self)
    }

    pub fn index_set_size_range(&self) -> Option<(usize, usize)> {
        let sizes = self
            .nodes
            .iter()
            .filter(|n| !n.is_virtual())
            .map(|n| self.index_sets[n.id].len());
        sizes.fold(None, |acc, s| match acc {
            None => Some((s, s)),
            Some((lo, hi)) => Some((lo.min(s), hi.max(s))),
        })
    }
}

fn validate_nodes(nodes: &[Node]) -> Result<()> {
    for (i, n) in nodes.iter().enumerate() {
        if n.id != i {
            return Err(Error::Geometry(format!("node ids must be 0..n in order; found {} at position {i}", n.id)));
        }
        if !(n.position.x.is_finite() && n.position.y.is_finite()) {
            return Err(Error::Geometry(format!("node {i} has a non-finite position")));
        }
        match (n.kind, n.owner) {
            (NodeKind::Virtual, None) => {
                return Err(Error::Geometry(format!("virtual node {i} has no owner")));
            }
            (NodeKind::Virtual, Some(o)) => {
                let ok = nodes.get(o).is_some_and(|on| {
                    matches!(on.kind, NodeKind::DirichletBoundary | NodeKind::DerivativeBoundary)
                });
                if !ok {
                    return Err(Error::Geometry(format!(
                        "virtual node {i} must be owned by a boundary node, owner is {o}"
                    )));
                }
            }
            (_, Some(_)) => {
                return Err(Error::Geometry(format!("non-virtual node {i} has an owner")));
            }
            _ => {}
        }
        if n.kind == NodeKind::DerivativeBoundary {
            let ok = n
                .outward_normal
                .is_some_and(|v| v.x.is_finite() && v.y.is_finite() && (v.norm() - 1.0).abs() <= 1e-12);
            if !ok {
                return Err(Error::Geometry(format!(
                    "derivative-boundary node {i} needs a unit outward normal"
                )));
            }
        }
    }
    Ok(())
}

fn average_nearest_spacing(nodes: &[Node]) -> f64 {
    let pts: Vec<Point> = nodes
        .iter()
        .filter(|n| !n.is_virtual())
        .map(|n| n.position)
        .collect();
    neighbors::average_nearest_distance(&pts)
}
