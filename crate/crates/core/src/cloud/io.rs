//! Plain-text cloud files.
//!
//! One record per line: `id x y kind label`, with `kind` one of `I D N V` and
//! `-` for a missing label. Virtual records carry a sixth column, the id of
//! the owning boundary node. Blank lines and lines starting with `#` are
//! skipped.
//!
//! The outward normal of a derivative-boundary node is not stored; on load it
//! is recovered from the directions to the node's virtual nodes.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use super::{Node, NodeKind, Point, PointCloud};
use crate::error::{Error, Result};

pub fn write_cloud(cloud: &PointCloud, mut out: impl Write) -> Result<()> {
    let mut buf = String::new();
    writeln!(buf, "# id x y kind label [owner]").unwrap();
    for n in cloud.nodes() {
        write!(
            buf,
            "{} {} {} {} {}",
            n.id,
            n.position.x,
            n.position.y,
            n.kind.code(),
            n.label.as_deref().unwrap_or("-")
        )
        .unwrap();
        if let Some(o) = n.owner {
            write!(buf, " {o}").unwrap();
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn save_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_cloud(cloud, std::io::BufWriter::new(f))
}

pub fn read_cloud(input: impl BufRead) -> Result<PointCloud> {
    let mut nodes: Vec<Node> = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: lineno, message };
        let cols: Vec<&str> = text.split_whitespace().collect();
        if !(5..=6).contains(&cols.len()) {
            return Err(err(format!("expected 5 or 6 columns, found {}", cols.len())));
        }
        let id: usize = cols[0].parse().map_err(|_| err(format!("bad node id `{}`", cols[0])))?;
        if id != nodes.len() {
            return Err(err(format!("node ids must be consecutive from 0; expected {}, found {id}", nodes.len())));
        }
        let coord = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| err(format!("bad coordinate `{s}`")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(format!("non-finite coordinate `{s}`")))
            }
        };
        let position = Point::new(coord(cols[1])?, coord(cols[2])?);
        let kind = NodeKind::from_code(cols[3]).ok_or_else(|| err(format!("unknown node kind `{}`", cols[3])))?;
        let label = (cols[4] != "-").then(|| cols[4].to_string());
        let owner = match (kind, cols.get(5)) {
            (NodeKind::Virtual, Some(s)) => Some(s.parse().map_err(|_| err(format!("bad owner id `{s}`")))?),
            (NodeKind::Virtual, None) => return Err(err("virtual node without owner column".into())),
            (_, Some(_)) => return Err(err("only virtual nodes may have an owner column".into())),
            (_, None) => None,
        };
        nodes.push(Node {
            id,
            position,
            kind,
            owner,
            outward_normal: None,
            label,
        });
    }
    if nodes.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "cloud file contains no nodes".into(),
        });
    }

    let mut sums = vec![Point::default(); nodes.len()];
    for n in &nodes {
        if let Some(o) = n.owner {
            if o >= nodes.len() {
                return Err(Error::Geometry(format!("virtual node {} refers to missing owner {o}", n.id)));
            }
            if let Some(d) = (n.position - nodes[o].position).normalized() {
                sums[o] = sums[o] + d;
            }
        }
    }
    for n in &mut nodes {
        if matches!(n.kind, NodeKind::DerivativeBoundary | NodeKind::DirichletBoundary) {
            n.outward_normal = sums[n.id].normalized();
        }
        if n.kind == NodeKind::DerivativeBoundary && n.outward_normal.is_none() {
            return Err(Error::Geometry(format!(
                "derivative-boundary node {} has no virtual node to define its outward normal",
                n.id
            )));
        }
    }
    PointCloud::from_nodes(nodes, None)
}

pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    let f = std::fs::File::open(path)?;
    read_cloud(std::io::BufReader::new(f))
}
