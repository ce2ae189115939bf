use gfdm_core::config::{bundled, parse_config, CaseConfig, Overrides, PointSource};
use gfdm_core::march::Simulator;
use gfdm_core::output::{read_snapshot_csv, run_case, simulate, snapshot_name, write_snapshot_vtk};
use gfdm_core::Error;

fn small(dir: &std::path::Path) -> CaseConfig {
    let mut cfg = bundled("case_3_1").unwrap();
    cfg.apply_overrides(&Overrides {
        dx: Some(10.0),
        t_end: Some(10.0),
        out: Some(dir.to_path_buf()),
        ..Default::default()
    })
    .unwrap();
    cfg.schedule.snapshot_times = vec![0.0, 5.0];
    cfg
}

#[test]
fn zero_end_time_gives_initial_state() {
    let mut cfg = bundled("case_3_2").unwrap();
    cfg.schedule.t_end = 0.0;
    cfg.schedule.snapshot_times.clear();
    let sim = simulate(&cfg).unwrap();
    assert_eq!(sim.output.snapshots.len(), 1);
    let s = &sim.output.snapshots[0];
    assert_eq!(s.time, 0.0);
    assert!(s.p.iter().all(|&p| p == 10.0) && s.t.iter().all(|&t| t == 60.0));
    assert_eq!(sim.output.summary.steps, 0);
}

#[test]
fn run_writes_snapshots_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let r = run_case(&cfg).unwrap();
    for t in [0.0, 5.0, 10.0] {
        let text = std::fs::read_to_string(dir.path().join(snapshot_name(t))).unwrap();
        let rows = read_snapshot_csv(&text).unwrap();
        assert_eq!(rows.len(), r.cloud.len());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["files"].as_array().unwrap().len(), 7);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 20);
    assert_eq!(summary["snapshots"].as_array().unwrap().len(), 3);
    // The pressure matrix never changes in an incompressible run.
    assert_eq!(summary["pressure_factorizations"], 1);

    let echoed = parse_config(&dir.path().join("config.json")).unwrap();
    assert_eq!(echoed.schedule, cfg.schedule);
    assert_eq!(echoed.boundary_conditions, cfg.boundary_conditions);
}

#[test]
fn failing_step_leaves_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    // A compressibility this large drives porosity past 1 once pressure rises.
    cfg.properties.c_t = 0.1;
    let err = run_case(&cfg).unwrap_err();
    assert!(matches!(err, Error::Physicality(_)), "{err}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "partial");
    assert_eq!(manifest["failed_step"], 1);
    assert!(manifest["files"].as_array().unwrap().iter().any(|f| f == "snap_t000000.000.csv"));
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn vtk_output_has_one_vertex_per_node() {
    let mut cfg = bundled("case_3_1").unwrap();
    cfg.schedule.t_end = 0.0;
    cfg.schedule.snapshot_times.clear();
    let sim = simulate(&cfg).unwrap();
    let mut buf = Vec::new();
    write_snapshot_vtk(&sim.disc.cloud, &sim.output.snapshots[0], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let n = sim.disc.len();
    assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(text.contains(&format!("POINTS {n} double")));
    assert!(text.contains(&format!("CELLS {n} {}", 2 * n)));
    assert!(text.contains("SCALARS temperature double 1"));
}

#[test]
fn point_source_raises_pressure_nearby() {
    let mut cfg = bundled("case_3_1").unwrap();
    cfg.schedule.t_end = 1.0;
    cfg.schedule.snapshot_times.clear();
    let base = simulate(&cfg).unwrap();
    cfg.sources.push(PointSource {
        x: 150.0,
        y: 50.0,
        q: 0.5,
        q_h: 0.0,
    });
    let with = simulate(&cfg).unwrap();
    let id = with
        .disc
        .cloud
        .nodes()
        .iter()
        .find(|n| n.position.x == 150.0 && n.position.y == 50.0)
        .unwrap()
        .id;
    let (a, b) = (base.output.snapshots[0].p[id], with.output.snapshots[0].p[id]);
    assert!(b > a + 1e-3, "injection did not raise pressure: {a} -> {b}");
}

#[test]
fn schedule_snapshots_follow_requested_times() {
    let cfg = bundled("case_3_1").unwrap();
    let disc = cfg.discretization().unwrap();
    let sim = Simulator::new(&disc, cfg.schedule.clone()).unwrap();
    let mut times = Vec::new();
    let out = sim
        .run(|s| {
            times.push(s.time);
            Ok(())
        })
        .unwrap();
    assert_eq!(times, vec![20.0, 50.0, 100.0]);
    assert_eq!(out.summary.steps, 200);
}
