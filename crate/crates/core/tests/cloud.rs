use std::collections::BTreeMap;

use gfdm_core::cloud::{
    add_virtual_nodes, brute_force_index_sets, generate_cartesian_cloud, generate_scattered_cloud, io, BoundaryKind,
    DomainGeometry, NodeKind, Point,
};
use proptest::prelude::*;

fn rect(w: f64, h: f64) -> DomainGeometry {
    let kinds: BTreeMap<String, BoundaryKind> = [
        ("G1", BoundaryKind::Dirichlet),
        ("G2", BoundaryKind::Dirichlet),
        ("G3", BoundaryKind::Derivative),
        ("G4", BoundaryKind::Derivative),
    ]
    .into_iter()
    .map(|(l, k)| (l.to_string(), k))
    .collect();
    DomainGeometry::rectangle(0.0, 0.0, w, h, ["G4", "G2", "G3", "G1"])
        .unwrap()
        .with_boundary_kinds(&kinds)
        .unwrap()
}

#[test]
fn interior_index_set_sizes() {
    let g = rect(300.0, 100.0);
    let c = add_virtual_nodes(generate_cartesian_cloud(&g, 5.0, 5.0).unwrap(), &g, 5.0).unwrap();
    let mid = c
        .nodes()
        .iter()
        .find(|n| n.position == Point::new(150.0, 50.0))
        .unwrap()
        .id;
    let a = c.clone().build_index_sets(8.0).unwrap();
    assert_eq!(a.index_set(mid).len(), 8);
    let b = c.build_index_sets(2.9 * 5.0).unwrap();
    assert_eq!(b.index_set(mid).len(), 24);
}

#[test]
fn index_sets_match_brute_force() {
    let g = rect(120.0, 60.0);
    for (c, r) in [
        (generate_cartesian_cloud(&g, 5.0, 5.0).unwrap(), 8.0),
        (generate_scattered_cloud(&g, 6.0, 7).unwrap(), 13.0),
    ] {
        let c = add_virtual_nodes(c, &g, 3.0).unwrap().build_index_sets(r).unwrap();
        let brute = brute_force_index_sets(&c.positions(), r);
        for n in c.nodes().iter().filter(|n| !n.is_virtual()) {
            assert_eq!(c.index_set(n.id), brute[n.id].as_slice(), "node {}", n.id);
        }
    }
}

#[test]
fn index_sets_are_symmetric_among_physical_nodes() {
    let g = rect(120.0, 60.0);
    let c = add_virtual_nodes(generate_scattered_cloud(&g, 6.0, 11).unwrap(), &g, 3.0)
        .unwrap()
        .build_index_sets(13.0)
        .unwrap();
    for n in c.nodes().iter().filter(|n| !n.is_virtual()) {
        for &j in c.index_set(n.id) {
            if !c.node(j).is_virtual() {
                assert!(c.index_set(j).contains(&n.id), "{} in Λ_{} but not vice versa", j, n.id);
            }
        }
    }
}

#[test]
fn virtual_nodes_sit_outside_along_normals() {
    let g = rect(100.0, 50.0);
    let c = add_virtual_nodes(generate_cartesian_cloud(&g, 5.0, 5.0).unwrap(), &g, 5.0).unwrap();
    // One virtual per derivative condition: top and bottom rows, corners included.
    assert_eq!(c.count(NodeKind::Virtual), 2 * 21);
    for v in c.nodes().iter().filter(|n| n.is_virtual()) {
        assert!(!g.contains(v.position));
        let o = c.node(v.owner.unwrap());
        assert_eq!(v.position.x, o.position.x);
        assert_eq!((v.position.y - o.position.y).abs(), 5.0);
    }
}

#[test]
fn cloud_file_round_trip() {
    let g = rect(60.0, 30.0);
    let c = add_virtual_nodes(generate_scattered_cloud(&g, 5.0, 3).unwrap(), &g, 2.5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    io::save_cloud(&c, &path).unwrap();
    let back = io::load_cloud(&path).unwrap();
    assert_eq!(back.len(), c.len());
    for (a, b) in c.nodes().iter().zip(back.nodes()) {
        assert_eq!((a.position, a.kind, a.owner, &a.label), (b.position, b.kind, b.owner, &b.label));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scattered_nodes_lie_in_domain(seed in any::<u64>(), spacing in 4.0f64..12.0) {
        let g = DomainGeometry::polygon(
            vec![
                Point::new(0.0, 0.0), Point::new(90.0, -12.0), Point::new(190.0, -4.0), Point::new(300.0, -10.0),
                Point::new(300.0, 95.0), Point::new(220.0, 108.0), Point::new(120.0, 96.0), Point::new(0.0, 100.0),
            ],
            ["G4", "G4", "G4", "G2", "G3", "G3", "G3", "G1"].map(String::from).to_vec(),
        ).unwrap();
        let c = generate_scattered_cloud(&g, spacing, seed).unwrap();
        for n in c.nodes() {
            prop_assert!(g.contains_closed(n.position), "{:?}", n.position);
            if n.kind == NodeKind::Interior {
                prop_assert!(g.distance_to_boundary(n.position) > 0.0);
            }
        }
        let again = generate_scattered_cloud(&g, spacing, seed).unwrap();
        prop_assert_eq!(c.positions(), again.positions());
    }
}
