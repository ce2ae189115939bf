use gfdm_core::cloud::{generate_cartesian_cloud, BoundaryKind, DomainGeometry, Point};
use gfdm_core::stencil::{apply, build_stencil, Stencil, StencilSet, DX, DXX, DXY, DY, DYY};
use proptest::prelude::*;

/// 8-neighbor lattice around the origin, ids 1..=8, row-major from (-1,-1).
fn lattice8(h: f64) -> Vec<(usize, Point)> {
    let mut v = Vec::new();
    for j in -1..=1 {
        for i in -1..=1 {
            if i != 0 || j != 0 {
                v.push((v.len() + 1, Point::new(i as f64 * h, j as f64 * h)));
            }
        }
    }
    v
}

fn coeff(s: &Stencil, k: usize, nb: &[(usize, Point)], at: (f64, f64), h: f64) -> f64 {
    let slot = nb
        .iter()
        .position(|(_, p)| p.x == at.0 * h && p.y == at.1 * h)
        .unwrap();
    s.rows[k][slot]
}

// Reference rows from an independent numpy weighted-least-squares fit.
#[test]
fn eight_neighbor_rows_match_reference_fit() {
    for h in [1.0, 5.0, 0.1] {
        let nb = lattice8(h);
        let s = build_stencil(0, Point::default(), &nb, 1.6 * h).unwrap();
        let h2 = h * h;
        let cases = [
            (DXX, (1.0, 0.0), 0.9971722170022231 / h2),
            (DXX, (0.0, 1.0), -0.002827782997776967 / h2),
            (DXX, (1.0, 1.0), 0.0014138914988884837 / h2),
            (DYY, (0.0, 1.0), 0.9971722170022229 / h2),
            (DX, (1.0, 0.0), 0.49858209898472805 / h),
            (DX, (1.0, 1.0), 0.0007089505076360003 / h),
            (DX, (-1.0, 1.0), -0.0007089505076360003 / h),
            (DY, (0.0, 1.0), 0.498582098984728 / h),
            (DXY, (1.0, 1.0), 0.25 / h2),
            (DXY, (-1.0, 1.0), -0.25 / h2),
        ];
        for (k, at, want) in cases {
            let got = coeff(&s, k, &nb, at, h);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0 / h2), "h={h} k={k} at={at:?}: {got} vs {want}");
        }
    }
}

#[test]
fn printed_closed_form_magnitudes_hold_at_wider_radius() {
    let nb = lattice8(1.0);
    let s = build_stencil(0, Point::default(), &nb, 1.8).unwrap();
    assert!((coeff(&s, DXX, &nb, (1.0, 0.0), 1.0) - 0.96308).abs() < 1e-5);
    assert!((coeff(&s, DXX, &nb, (0.0, 1.0), 1.0) + 0.036917).abs() < 1e-6);
    assert!((coeff(&s, DXX, &nb, (1.0, 1.0), 1.0) - 0.018459).abs() < 1e-6);
}

#[test]
fn laplacian_column_sums_equal_inverse_spacing_squared() {
    for rm in [1.5, 1.6, 1.8, 1.99] {
        let h = 5.0;
        let nb = lattice8(h);
        let s = build_stencil(0, Point::default(), &nb, rm * h).unwrap();
        for col in [-1.0, 1.0] {
            let sum: f64 = nb
                .iter()
                .enumerate()
                .filter(|(_, (_, p))| p.x == col * h)
                .map(|(slot, _)| s.laplacian_coeff(slot))
                .sum();
            assert!((sum * h * h - 1.0).abs() < 1e-9, "rm={rm} col={col}: {}", sum * h * h);
        }
    }
}

#[test]
fn sine_gradient_on_fine_lattice() {
    let g = DomainGeometry::rectangle(0.0, 0.0, 2.0, 1.0, ["a"; 4]).unwrap();
    let c = generate_cartesian_cloud(&g, 0.1, 0.1).unwrap().build_index_sets(0.16).unwrap();
    let set = StencilSet::build(&c).unwrap();
    let u: Vec<f64> = c.nodes().iter().map(|n| n.position.x.sin()).collect();
    let mut checked = 0;
    for n in c.nodes().iter().filter(|n| n.kind == gfdm_core::cloud::NodeKind::Interior) {
        let d = apply(set.get(n.id).unwrap(), &u).unwrap();
        assert!((d[DX] - n.position.x.cos()).abs() < 5e-3, "node {}", n.id);
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn second_derivative_error_shrinks_with_spacing() {
    let err = |h: f64| {
        let g = DomainGeometry::rectangle(0.0, 0.0, 1.0, 1.0, ["a"; 4]).unwrap();
        let c = generate_cartesian_cloud(&g, h, h).unwrap().build_index_sets(1.6 * h).unwrap();
        let set = StencilSet::build(&c).unwrap();
        let f = |p: Point| (2.0 * p.x).sin() * (1.5 * p.y).cos();
        let u: Vec<f64> = c.nodes().iter().map(|n| f(n.position)).collect();
        c.nodes()
            .iter()
            .filter(|n| n.kind == gfdm_core::cloud::NodeKind::Interior)
            .map(|n| {
                let d = apply(set.get(n.id).unwrap(), &u).unwrap();
                (d[DXX] + 4.0 * f(n.position)).abs()
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(0.1), err(0.05));
    assert!(e2 < e1, "{e2} !< {e1}");
}

#[test]
fn dirichlet_corner_owner_gets_widened_stencil() {
    let kinds = [
        ("G1", BoundaryKind::Dirichlet),
        ("G2", BoundaryKind::Dirichlet),
        ("G3", BoundaryKind::Derivative),
        ("G4", BoundaryKind::Derivative),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let g = DomainGeometry::rectangle(0.0, 0.0, 300.0, 100.0, ["G4", "G2", "G3", "G1"])
        .unwrap()
        .with_boundary_kinds(&kinds)
        .unwrap();
    let c = generate_cartesian_cloud(&g, 5.0, 5.0).unwrap();
    let c = gfdm_core::cloud::add_virtual_nodes(c, &g, 5.0).unwrap().build_index_sets(8.0).unwrap();
    let set = StencilSet::build(&c).unwrap();
    let corners: Vec<usize> = set.widened().to_vec();
    assert_eq!(corners.len(), 4);
    for i in corners {
        let s = set.get(i).unwrap();
        assert!(s.radius > 8.0);
        // Gradient rows still reproduce a linear field exactly.
        let u: Vec<f64> = c.nodes().iter().map(|n| 3.0 * n.position.x - 2.0 * n.position.y).collect();
        let d = apply(s, &u).unwrap();
        assert!((d[DX] - 3.0).abs() < 1e-9 && (d[DY] + 2.0).abs() < 1e-9);
    }
}

fn quadratic(c: &[f64; 6], p: Point) -> f64 {
    c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.x * p.x + c[4] * p.y * p.y + c[5] * p.x * p.y
}

fn neighbors_strategy() -> impl Strategy<Value = (Point, f64, Vec<(f64, f64)>)> {
    neighbors_in(1e3, 0.01)
}

fn neighbors_in(extent: f64, rm_min: f64) -> impl Strategy<Value = (Point, f64, Vec<(f64, f64)>)> {
    (
        (-extent..extent, -extent..extent),
        rm_min..100.0f64,
        prop::collection::vec((0.05..1.0f64, 0.0..std::f64::consts::TAU), 6..20),
    )
        .prop_map(|((cx, cy), rm, polar)| (Point::new(cx, cy), rm, polar))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn quadratics_are_reproduced(
        (center, rm, polar) in neighbors_strategy(),
        coef in prop::array::uniform6(-5.0..5.0f64),
    ) {
        let nb: Vec<(usize, Point)> = polar
            .iter()
            .enumerate()
            .map(|(i, &(s, t))| (i + 1, center + Point::new(t.cos(), t.sin()) * (s * rm * 0.999)))
            .collect();
        let s = build_stencil(0, center, &nb, rm);
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        let mut field = vec![quadratic(&coef, center)];
        field.extend(nb.iter().map(|&(_, p)| quadratic(&coef, p)));
        let d = apply(&s, &field).unwrap();
        let (x, y) = (center.x, center.y);
        let exact = [
            coef[1] + 2.0 * coef[3] * x + coef[5] * y,
            coef[2] + 2.0 * coef[4] * y + coef[5] * x,
            2.0 * coef[3],
            2.0 * coef[4],
            coef[5],
        ];
        for k in 0..5 {
            let scale: f64 = s.rows[k].iter().zip(&field[1..]).map(|(m, u)| (m * (u - field[0])).abs()).sum();
            prop_assert!((d[k] - exact[k]).abs() <= 1e-9 * scale.max(exact[k].abs()).max(1e-300),
                "k={} got {} want {} scale {}", k, d[k], exact[k], scale);
        }
    }

    #[test]
    fn translation_leaves_rows_unchanged(
        (center, rm, polar) in neighbors_in(10.0, 0.5),
        shift in (-64i32..64, -64i32..64),
    ) {
        // Dyadic coordinates keep every difference vector exact, so any
        // change in the rows would come from the translation itself.
        let snap = |v: f64| (v * 256.0).round() / 256.0;
        let center = Point::new(snap(center.x), snap(center.y));
        let nb: Vec<(usize, Point)> = polar
            .iter()
            .enumerate()
            .map(|(i, &(s, t))| {
                let off = Point::new(t.cos(), t.sin()) * (s * rm * 0.99);
                (i + 1, center + Point::new(snap(off.x), snap(off.y)))
            })
            .collect();
        let a = build_stencil(0, center, &nb, rm);
        prop_assume!(a.is_ok());
        let a = a.unwrap();
        let d = Point::new(shift.0 as f64, shift.1 as f64);
        let moved: Vec<(usize, Point)> = nb.iter().map(|&(j, p)| (j, p + d)).collect();
        let b = build_stencil(0, center + d, &moved, rm).unwrap();
        for k in 0..5 {
            let mag = a.rows[k].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.rows[k].iter().zip(&b.rows[k]) {
                prop_assert!((x - y).abs() <= 1e-12 * mag.max(1e-300));
            }
        }
    }

    #[test]
    fn constants_give_exact_zero(
        (center, rm, polar) in neighbors_strategy(),
        c in -1e6..1e6f64,
    ) {
        let nb: Vec<(usize, Point)> = polar
            .iter()
            .enumerate()
            .map(|(i, &(s, t))| (i + 1, center + Point::new(t.cos(), t.sin()) * (s * rm * 0.999)))
            .collect();
        let s = build_stencil(0, center, &nb, rm);
        prop_assume!(s.is_ok());
        let d = apply(&s.unwrap(), &vec![c; nb.len() + 1]).unwrap();
        prop_assert_eq!(d, [0.0; 5]);
    }
}
