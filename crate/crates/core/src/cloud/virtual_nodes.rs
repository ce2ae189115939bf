use super::geometry::{BoundaryKind, DomainGeometry, Point};
use super::{Node, NodeKind, PointCloud};
use crate::error::{Error, Result};

/// Places one virtual node per derivative condition attached to a boundary
/// node, `offset` outside the boundary:
///
/// * edge node on a derivative segment: along the edge normal;
/// * corner between a Dirichlet and a derivative segment: along the
///   derivative segment's normal (the node keeps its Dirichlet row);
/// * corner between two different derivative segments: one per normal;
/// * corner inside one derivative segment: on the exterior bisector.
///
/// Virtual nodes are appended after the existing nodes, ordered by owner.
pub fn add_virtual_nodes(cloud: PointCloud, geom: &DomainGeometry, offset: f64) -> Result<PointCloud> {
    if !(offset > 0.0 && offset.is_finite()) {
        return Err(Error::Geometry(format!("virtual node offset must be positive, got {offset}")));
    }
    if cloud.nodes().iter().any(Node::is_virtual) {
        return Err(Error::Geometry("cloud already contains virtual nodes".into()));
    }
    let tol = geom.tolerance();
    let spacing = cloud.spacing();
    let h_avg = cloud.h_avg();
    let mut nodes = cloud.nodes;
    let base = nodes.len();
    for owner in 0..base {
        let p = nodes[owner].position;
        if nodes[owner].kind == NodeKind::Interior {
            continue;
        }
        for (dir, label) in virtual_directions(geom, p, tol) {
            let q = p + dir * offset;
            if geom.contains(q) || geom.distance_to_boundary(q) <= tol {
                return Err(Error::Geometry(format!(
                    "virtual node for boundary node {owner} at {q} falls inside the domain; use a smaller offset than {offset}"
                )));
            }
            let id = nodes.len();
            nodes.push(Node {
                id,
                position: q,
                kind: NodeKind::Virtual,
                owner: Some(owner),
                outward_normal: None,
                label: Some(label),
            });
        }
    }
    PointCloud::with_spacing(nodes, spacing, h_avg)
}

/// Directions (unit, outward) and served segment labels of the virtual
/// nodes a boundary point needs.
fn virtual_directions(geom: &DomainGeometry, p: Point, tol: f64) -> Vec<(Point, String)> {
    let edges = geom.incident_edges(p, tol);
    let derivative: Vec<usize> = edges
        .iter()
        .copied()
        .filter(|&e| geom.edge_kind(e) == BoundaryKind::Derivative)
        .collect();
    if derivative.is_empty() {
        return Vec::new();
    }
    let label = |e: usize| geom.edge_label(e).to_string();
    let corner = geom.vertex_at(p, tol).is_some_and(|v| geom.is_corner(v));
    match derivative.as_slice() {
        [e] => vec![(geom.edge_normal(*e), label(*e))],
        [a, b] => {
            let bisector = (geom.edge_normal(*a) + geom.edge_normal(*b))
                .normalized()
                .unwrap_or_else(|| geom.edge_normal(*a));
            if !corner || geom.edge_label(*a) == geom.edge_label(*b) {
                vec![(bisector, label(*a))]
            } else {
                vec![(geom.edge_normal(*a), label(*a)), (geom.edge_normal(*b), label(*b))]
            }
        }
        _ => unreachable!("a boundary point touches at most two edges of a simple polygon"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{generate_cartesian_cloud, Point};
    use std::collections::BTreeMap;

    fn kinds(pairs: &[(&str, BoundaryKind)]) -> BTreeMap<String, BoundaryKind> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn rect(k: &[(&str, BoundaryKind)]) -> DomainGeometry {
        DomainGeometry::rectangle(0.0, 0.0, 300.0, 100.0, ["G4", "G2", "G3", "G1"])
            .unwrap()
            .with_boundary_kinds(&kinds(k))
            .unwrap()
    }

    use BoundaryKind::{Derivative as N, Dirichlet as D};

    #[test]
    fn benchmark_rectangle_virtual_layout() {
        let g = rect(&[("G1", D), ("G2", D), ("G3", N), ("G4", N)]);
        let c = generate_cartesian_cloud(&g, 5.0, 5.0).unwrap();
        let base = c.len();
        let c = add_virtual_nodes(c, &g, 5.0).unwrap();
        // 61 nodes on each of top and bottom, corners included.
        assert_eq!(c.len() - base, 122);
        for n in c.nodes().iter().filter(|n| n.is_virtual()) {
            let owner = c.node(n.owner.unwrap());
            if owner.position.y == 100.0 {
                assert_eq!(n.position, Point::new(owner.position.x, 105.0));
            } else {
                assert_eq!(owner.position.y, 0.0);
                assert_eq!(n.position, Point::new(owner.position.x, -5.0));
            }
        }
        // Corner (0,100): left Dirichlet, top Neumann -> exactly one virtual at (0,105).
        let corner = c
            .nodes()
            .iter()
            .position(|n| n.position == Point::new(0.0, 100.0))
            .unwrap();
        assert_eq!(c.node(corner).kind, NodeKind::DirichletBoundary);
        let v = c.virtuals_of(corner);
        assert_eq!(v.len(), 1);
        assert_eq!(c.node(v[0]).position, Point::new(0.0, 105.0));
        assert_eq!(c.node(v[0]).label.as_deref(), Some("G3"));
    }

    #[test]
    fn all_dirichlet_adds_nothing() {
        let g = rect(&[("G1", D), ("G2", D), ("G3", D), ("G4", D)]);
        let c = generate_cartesian_cloud(&g, 10.0, 10.0).unwrap();
        let n = c.len();
        assert_eq!(add_virtual_nodes(c, &g, 10.0).unwrap().len(), n);
    }

    #[test]
    fn two_derivative_segments_give_two_virtuals() {
        let g = rect(&[("G1", N), ("G2", D), ("G3", D), ("G4", N)]);
        let c = generate_cartesian_cloud(&g, 10.0, 10.0).unwrap();
        let c = add_virtual_nodes(c, &g, 10.0).unwrap();
        let v = c.virtuals_of(0);
        let pos: Vec<Point> = v.iter().map(|&i| c.node(i).position).collect();
        assert_eq!(pos, vec![Point::new(0.0, -10.0), Point::new(-10.0, 0.0)]);
        assert_eq!(c.node(0).kind, NodeKind::DerivativeBoundary);
    }

    #[test]
    fn same_segment_corner_uses_bisector() {
        let g = DomainGeometry::rectangle(0.0, 0.0, 10.0, 10.0, ["W"; 4])
            .unwrap()
            .with_boundary_kinds(&kinds(&[("W", N)]))
            .unwrap();
        let c = generate_cartesian_cloud(&g, 1.0, 1.0).unwrap();
        let c = add_virtual_nodes(c, &g, 1.0).unwrap();
        let v = c.virtuals_of(0);
        assert_eq!(v.len(), 1);
        let q = c.node(v[0]).position;
        let s = -std::f64::consts::FRAC_1_SQRT_2;
        assert!((q.x - s).abs() < 1e-12 && (q.y - s).abs() < 1e-12);
    }

    #[test]
    fn reflex_corner_with_large_offset_is_rejected() {
        // U shape with a slot of width 1: offsetting across the slot lands
        // in the opposite arm.
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(10.0, 10.0),
            Point::new(5.5, 10.0),
            Point::new(5.5, 2.0),
            Point::new(4.5, 2.0),
            Point::new(4.5, 10.0),
            Point::new(0.0, 10.0),
        ];
        let g = DomainGeometry::polygon(v, vec!["W".into(); 8])
            .unwrap()
            .with_boundary_kinds(&kinds(&[("W", N)]))
            .unwrap();
        let mut nodes = Vec::new();
        for (i, p) in g.vertices().iter().enumerate() {
            nodes.push(crate::cloud::generate::classify(&g, i, *p, g.tolerance()));
        }
        let c = PointCloud::from_nodes(nodes, Some(1.0)).unwrap();
        assert!(matches!(add_virtual_nodes(c, &g, 3.0), Err(Error::Geometry(_))));
    }

    #[test]
    fn virtual_nodes_lie_outside() {
        let g = rect(&[("G1", N), ("G2", N), ("G3", N), ("G4", N)]);
        let c = generate_cartesian_cloud(&g, 10.0, 10.0).unwrap();
        let c = add_virtual_nodes(c, &g, 5.0).unwrap();
        for n in c.nodes().iter().filter(|n| n.is_virtual()) {
            assert!(!g.contains_closed(n.position));
        }
    }
}
