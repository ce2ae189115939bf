use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geometry::{BoundaryKind, DomainGeometry, Point};
use super::{Node, NodeKind, PointCloud};
use crate::error::{Error, Result};

/// Lattice cloud on an axis-aligned rectangle, boundary included. Nodes are
/// numbered row by row from the bottom-left corner.
pub fn generate_cartesian_cloud(rect: &DomainGeometry, dx: f64, dy: f64) -> Result<PointCloud> {
    let bb = rect
        .as_rectangle()
        .ok_or_else(|| Error::Geometry("cartesian clouds need an axis-aligned rectangle".into()))?;
    if !(dx > 0.0 && dy > 0.0) {
        return Err(Error::Geometry(format!("spacing must be positive, got dx={dx}, dy={dy}")));
    }
    let nx = divisions(bb.width(), dx, "width")?;
    let ny = divisions(bb.height(), dy, "height")?;
    let tol = rect.tolerance();
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { bb.max.y } else { bb.min.y + j as f64 * dy };
        for i in 0..=nx {
            let x = if i == nx { bb.max.x } else { bb.min.x + i as f64 * dx };
            let p = Point::new(x, y);
            nodes.push(classify(rect, nodes.len(), p, tol));
        }
    }
    PointCloud::with_spacing(nodes, dx.min(dy), dx.min(dy))
}

fn divisions(length: f64, step: f64, what: &str) -> Result<usize> {
    let n = (length / step).round();
    if n < 1.0 || (n * step - length).abs() > 1e-9 * length.max(step) {
        return Err(Error::Geometry(format!(
            "spacing {step} does not divide the rectangle {what} {length}"
        )));
    }
    Ok(n as usize)
}

/// Boundary nodes at uniform arc-length spacing along every edge (polygon
/// vertices always included) plus a seeded jittered lattice inside the
/// polygon. Interior candidates closer than half a spacing to the boundary
/// are dropped.
pub fn generate_scattered_cloud(geom: &DomainGeometry, spacing: f64, seed: u64) -> Result<PointCloud> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Geometry(format!("spacing must be positive, got {spacing}")));
    }
    let bb = geom.bbox();
    if spacing > bb.width().min(bb.height()) {
        return Err(Error::Geometry(format!(
            "spacing {spacing} exceeds the domain extent {} × {}",
            bb.width(),
            bb.height()
        )));
    }
    let tol = geom.tolerance();
    let mut nodes = Vec::new();
    for e in 0..geom.edge_count() {
        let (a, b) = geom.edge(e);
        let m = (geom.edge_length(e) / spacing).round().max(1.0) as usize;
        for k in 0..m {
            let p = a + (b - a) * (k as f64 / m as f64);
            nodes.push(classify(geom, nodes.len(), p, tol));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = (bb.width() / spacing).ceil() as usize;
    let ny = (bb.height() / spacing).ceil() as usize;
    let amp = 0.25 * spacing;
    let mut interior = 0;
    for j in 0..ny {
        for i in 0..nx {
            // Draw the jitter for every lattice site, kept or not, so the
            // sequence depends only on the bounding box and the seed.
            let jx: f64 = rng.random_range(-amp..=amp);
            let jy: f64 = rng.random_range(-amp..=amp);
            let p = Point::new(
                bb.min.x + (i as f64 + 0.5) * spacing + jx,
                bb.min.y + (j as f64 + 0.5) * spacing + jy,
            );
            if geom.contains(p) && geom.distance_to_boundary(p) >= 0.5 * spacing {
                nodes.push(Node {
                    id: nodes.len(),
                    position: p,
                    kind: NodeKind::Interior,
                    owner: None,
                    outward_normal: None,
                    label: None,
                });
                interior += 1;
            }
        }
    }
    if interior < 5 {
        return Err(Error::Geometry(format!(
            "spacing {spacing} leaves only {interior} interior nodes; at least 5 are needed"
        )));
    }
    let h_avg = super::average_nearest_spacing(&nodes);
    PointCloud::with_spacing(nodes, spacing, h_avg)
}

/// Classifies a generated node by the boundary edges passing through it.
pub(crate) fn classify(geom: &DomainGeometry, id: usize, p: Point, tol: f64) -> Node {
    let edges = geom.incident_edges(p, tol);
    let mut node = Node {
        id,
        position: p,
        kind: NodeKind::Interior,
        owner: None,
        outward_normal: None,
        label: None,
    };
    if edges.is_empty() {
        return node;
    }
    let normal_sum = edges
        .iter()
        .fold(Point::default(), |acc, &e| acc + geom.edge_normal(e));
    node.outward_normal = Some(normal_sum.normalized().unwrap_or_else(|| geom.edge_normal(edges[0])));
    match edges.iter().find(|&&e| geom.edge_kind(e) == BoundaryKind::Dirichlet) {
        Some(&e) => {
            node.kind = NodeKind::DirichletBoundary;
            node.label = Some(geom.edge_label(e).to_string());
        }
        None => {
            node.kind = NodeKind::DerivativeBoundary;
            node.label = Some(geom.edge_label(edges[0]).to_string());
        }
    }
    node
}
