//! Run driver and file outputs: snapshot CSV, legacy VTK, summary report
//! and run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::assembly::Discretization;
use crate::cloud::{self, PointCloud};
use crate::config::CaseConfig;
use crate::error::{Error, Result};
use crate::march::{RunOutput, RunSummary, Simulator, State};

/// An in-memory run with no file output.
#[derive(Debug)]
pub struct Simulation {
    pub disc: Discretization,
    pub output: RunOutput,
}

pub fn simulate(cfg: &CaseConfig) -> Result<Simulation> {
    let disc = cfg.discretization()?;
    let output = Simulator::new(&disc, cfg.schedule.clone())?
        .run(|_| Ok(()))
        .map_err(|e| e.error)?;
    Ok(Simulation { disc, output })
}

pub fn snapshot_name(time: f64) -> String {
    format!("snap_t{time:010.3}.csv")
}

pub fn write_snapshot_csv(cloud: &PointCloud, state: &State, mut out: impl Write) -> Result<()> {
    writeln!(out, "x,y,kind,p,T")?;
    for n in cloud.nodes() {
        writeln!(
            out,
            "{},{},{},{},{}",
            n.position.x,
            n.position.y,
            n.kind.code(),
            state.p[n.id],
            state.t[n.id]
        )?;
    }
    Ok(())
}

/// Legacy ASCII VTK unstructured grid with one vertex cell per node.
pub fn write_snapshot_vtk(cloud: &PointCloud, state: &State, mut out: impl Write) -> Result<()> {
    let n = cloud.len();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "gfdm snapshot t={}", state.time)?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n} double")?;
    for node in cloud.nodes() {
        writeln!(out, "{} {} 0", node.position.x, node.position.y)?;
    }
    writeln!(out, "CELLS {n} {}", 2 * n)?;
    for i in 0..n {
        writeln!(out, "1 {i}")?;
    }
    writeln!(out, "CELL_TYPES {n}")?;
    for _ in 0..n {
        writeln!(out, "1")?;
    }
    writeln!(out, "POINT_DATA {n}")?;
    for (name, values) in [("pressure", &state.p), ("temperature", &state.t)] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in values.iter() {
            writeln!(out, "{v}")?;
        }
    }
    writeln!(out, "SCALARS kind int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for node in cloud.nodes() {
        let k = match node.kind {
            cloud::NodeKind::Interior => 0,
            cloud::NodeKind::DirichletBoundary => 1,
            cloud::NodeKind::DerivativeBoundary => 2,
            cloud::NodeKind::Virtual => 3,
        };
        writeln!(out, "{k}")?;
    }
    Ok(())
}

/// Reads a snapshot CSV back into (x, y, kind, p, T) rows.
pub fn read_snapshot_csv(text: &str) -> Result<Vec<(f64, f64, char, f64, f64)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "x,y,kind,p,T")) => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `x,y,kind,p,T`".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |m: &str| Error::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 columns"));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
            let kind = f[2].trim().chars().next().ok_or_else(|| bad("empty kind"))?;
            Ok((num(f[0])?, num(f[1])?, kind, num(f[3])?, num(f[4])?))
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    status: &'a str,
    case: Option<&'a str>,
    files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failed_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Result of a completed case run.
#[derive(Debug)]
pub struct CaseRun {
    pub cloud: PointCloud,
    pub output: RunOutput,
    pub directory: PathBuf,
    pub files: Vec<PathBuf>,
}

pub fn summary_text(cfg: &CaseConfig, s: &RunSummary) -> String {
    let mut t = String::new();
    t.push_str(&format!("case: {}\n", cfg.name.as_deref().unwrap_or("(unnamed)")));
    t.push_str(&format!("nodes: {}\n", s.nodes));
    t.push_str(&format!("steps: {} x dt {} d = {} d\n", s.steps, s.dt, s.t_end));
    t.push_str(&format!(
        "factorizations: pressure {}, temperature {}\n",
        s.pressure_factorizations, s.temperature_factorizations
    ));
    t.push_str(&format!("wall time: {:.3} s\n", s.wall_seconds));
    t.push_str("time p_min p_max T_min T_max pore_volume heat_content\n");
    for st in &s.snapshots {
        t.push_str(&format!(
            "{} {:.6} {:.6} {:.6} {:.6} {:.6e} {:.6e}\n",
            st.time, st.p_min, st.p_max, st.t_min, st.t_max, st.pore_volume, st.heat_content
        ));
    }
    t
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let f = File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), m).map_err(std::io::Error::from)?;
    Ok(())
}

fn rel(dir: &Path, files: &[PathBuf]) -> Vec<String> {
    files
        .iter()
        .map(|f| f.strip_prefix(dir).unwrap_or(f).display().to_string())
        .collect()
}

/// Builds the case, marches to `t_end` and writes everything into the
/// configured output directory. A failing step leaves a partial manifest
/// listing the snapshots written so far.
pub fn run_case(cfg: &CaseConfig) -> Result<CaseRun> {
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();

    let echo = dir.join("config.json");
    fs::write(&echo, cfg.to_json())?;
    files.push(echo);

    let disc = match cfg.discretization() {
        Ok(d) => d,
        Err(e) => {
            write_manifest(
                &dir,
                &Manifest {
                    status: "partial",
                    case: cfg.name.as_deref(),
                    files: rel(&dir, &files),
                    failed_step: None,
                    error: Some(e.to_string()),
                },
            )?;
            return Err(e);
        }
    };
    let cloud_file = dir.join("cloud.txt");
    cloud::io::save_cloud(&disc.cloud, &cloud_file)?;
    files.push(cloud_file);

    let sim = Simulator::new(&disc, cfg.schedule.clone())?;
    let vtk = cfg.output.vtk;
    let mut written = Vec::new();
    let result = sim.run(|state| {
        let csv = dir.join(snapshot_name(state.time));
        write_snapshot_csv(&disc.cloud, state, BufWriter::new(File::create(&csv)?))?;
        written.push(csv);
        if vtk {
            let v = dir.join(snapshot_name(state.time).replace(".csv", ".vtk"));
            write_snapshot_vtk(&disc.cloud, state, BufWriter::new(File::create(&v)?))?;
            written.push(v);
        }
        Ok(())
    });
    files.extend(written);

    match result {
        Ok(output) => {
            let sj = dir.join("summary.json");
            let f = File::create(&sj)?;
            serde_json::to_writer_pretty(BufWriter::new(f), &output.summary).map_err(std::io::Error::from)?;
            let st = dir.join("summary.txt");
            fs::write(&st, summary_text(cfg, &output.summary))?;
            files.push(sj);
            files.push(st);
            write_manifest(
                &dir,
                &Manifest {
                    status: "complete",
                    case: cfg.name.as_deref(),
                    files: rel(&dir, &files),
                    failed_step: None,
                    error: None,
                },
            )?;
            Ok(CaseRun {
                cloud: disc.cloud.clone(),
                output,
                directory: dir,
                files,
            })
        }
        Err(e) => {
            write_manifest(
                &dir,
                &Manifest {
                    status: "partial",
                    case: cfg.name.as_deref(),
                    files: rel(&dir, &files),
                    failed_step: Some(e.failed_step),
                    error: Some(e.error.to_string()),
                },
            )?;
            Err(e.error)
        }
    }
}
