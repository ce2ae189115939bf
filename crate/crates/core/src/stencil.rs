//! Weighted-least-squares derivative stencils.
//!
//! For a node 0 with neighbors j the five derivatives
//! (∂x, ∂y, ∂xx, ∂yy, ∂xy) are approximated as Σ_j m_kj (u_j − u_0). The
//! coefficients come from the second-order Taylor basis
//! (Δx, Δy, Δx²/2, Δy²/2, ΔxΔy) with Δx = x_j − x_0, weighted by the
//! squared quartic spline.

use std::io::Write;

use nalgebra::{DMatrix, SMatrix, SVector};
use rayon::prelude::*;

use crate::cloud::{Point, PointCloud, SpatialGrid};
use crate::error::{Error, Result};

type Mat5 = SMatrix<f64, 5, 5>;
type Vec5 = SVector<f64, 5>;

/// Largest accepted condition number of the (scaled) normal matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Row indices into [`Stencil::rows`].
pub const DX: usize = 0;
pub const DY: usize = 1;
pub const DXX: usize = 2;
pub const DYY: usize = 3;
pub const DXY: usize = 4;

/// Quartic spline weight `1 − 6s² + 8s³ − 3s⁴`, `s = r/r_m`, zero outside.
pub fn weight(r: f64, r_m: f64) -> Result<f64> {
    if !(r >= 0.0) || !(r_m > 0.0) {
        return Err(Error::Argument(format!("weight needs r ≥ 0 and r_m > 0, got r={r}, r_m={r_m}")));
    }
    if r > r_m {
        return Ok(0.0);
    }
    let s = r / r_m;
    let s2 = s * s;
    Ok(1.0 - 6.0 * s2 + 8.0 * s2 * s - 3.0 * s2 * s2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub node: usize,
    pub neighbors: Vec<usize>,
    /// Influence radius the stencil was built with.
    pub radius: f64,
    /// `rows[k][j]` multiplies `u_{neighbors[j]} − u_node` for derivative k.
    pub rows: [Vec<f64>; 5],
}

impl Stencil {
    /// Σ_j rows[k][j]·(u_j − u_0) for one derivative.
    pub fn derivative(&self, k: usize, field: &[f64]) -> f64 {
        let u0 = field[self.node];
        self.neighbors
            .iter()
            .zip(&self.rows[k])
            .map(|(&j, &m)| m * (field[j] - u0))
            .sum()
    }

    /// Coefficient of the Laplacian, m3 + m4, for neighbor slot `j`.
    pub fn laplacian_coeff(&self, j: usize) -> f64 {
        self.rows[DXX][j] + self.rows[DYY][j]
    }
}

/// Builds the stencil of `node` at `center` from its neighbors.
pub fn build_stencil(node: usize, center: Point, neighbors: &[(usize, Point)], r_m: f64) -> Result<Stencil> {
    if !(r_m > 0.0 && r_m.is_finite()) {
        return Err(Error::Argument(format!("influence radius must be positive, got {r_m}")));
    }
    if neighbors.len() < 5 {
        return Err(Error::StencilDeficiency {
            node,
            count: neighbors.len(),
        });
    }
    // Rows w_j·l_j of the weighted basis matrix B; the normal matrix is BᵀB.
    let mut b = DMatrix::zeros(neighbors.len(), 5);
    let mut a = Mat5::zeros();
    let mut weights = Vec::with_capacity(neighbors.len());
    for (i, &(j, p)) in neighbors.iter().enumerate() {
        let d = p - center;
        let r = d.norm();
        if r == 0.0 {
            return Err(Error::Argument(format!("neighbor {j} of node {node} coincides with it")));
        }
        let (x, y) = (d.x / r_m, d.y / r_m);
        let l = Vec5::new(x, y, 0.5 * x * x, 0.5 * y * y, x * y);
        let w = weight(r, r_m)?;
        a += (l * (w * w)) * l.transpose();
        b.row_mut(i).copy_from(&(l * w).transpose());
        weights.push(w);
    }

    let eig = a.symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DegenerateStencil { node, condition });
    }
    // (BᵀB)⁻¹BᵀW = R⁻¹QᵀW, solved through QR to avoid squaring the conditioning.
    let qr = b.qr();
    let mut m = qr.q().transpose();
    for (i, w) in weights.iter().enumerate() {
        m.column_mut(i).scale_mut(*w);
    }
    if !qr.r().solve_upper_triangular_mut(&mut m) {
        return Err(Error::DegenerateStencil { node, condition });
    }
    let scale = [1.0 / r_m, 1.0 / r_m, 1.0 / (r_m * r_m), 1.0 / (r_m * r_m), 1.0 / (r_m * r_m)];
    let rows: [Vec<f64>; 5] = std::array::from_fn(|k| m.row(k).iter().map(|v| v * scale[k]).collect());
    Ok(Stencil {
        node,
        neighbors: neighbors.iter().map(|&(j, _)| j).collect(),
        radius: r_m,
        rows,
    })
}

/// The five derivative approximations of `field` at the stencil's node.
pub fn apply(stencil: &Stencil, field: &[f64]) -> Result<[f64; 5]> {
    let needed = stencil.neighbors.iter().copied().chain([stencil.node]).max().unwrap_or(0);
    if needed >= field.len() {
        return Err(Error::Argument(format!(
            "field has {} values but the stencil of node {} references node {needed}",
            field.len(),
            stencil.node
        )));
    }
    Ok(std::array::from_fn(|k| stencil.derivative(k, field)))
}

/// Stencils for every node that needs one, indexed by node id.
#[derive(Clone, Debug)]
pub struct StencilSet {
    stencils: Vec<Option<Stencil>>,
    widened: Vec<usize>,
}

/// Radius growth per retry for Dirichlet owners, as a fraction of r_m.
const WIDEN_STEP: f64 = 0.25;
const WIDEN_TRIES: usize = 8;

impl StencilSet {
    /// Builds all stencils in parallel. PDE-row nodes use their index set
    /// as is. Dirichlet nodes owning virtual nodes only need the gradient
    /// rows for the virtual node's boundary equation; when their local
    /// cloud is too lopsided (typically at a corner) the radius is grown
    /// until the fit is well posed.
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        let r_m = cloud
            .radius()
            .ok_or_else(|| Error::Argument("index sets must be built before stencils".into()))?;
        let positions = cloud.positions();
        let grid = SpatialGrid::new(&positions, r_m);
        let results: Vec<Result<(Option<Stencil>, bool)>> = (0..cloud.len())
            .into_par_iter()
            .map(|i| {
                if !cloud.needs_stencil(i) {
                    return Ok((None, false));
                }
                let nb: Vec<(usize, Point)> = cloud.index_set(i).iter().map(|&j| (j, positions[j])).collect();
                match build_stencil(i, positions[i], &nb, r_m) {
                    Ok(s) => Ok((Some(s), false)),
                    Err(e) if cloud.node(i).has_pde_row() => Err(e),
                    Err(e) => {
                        for k in 1..=WIDEN_TRIES {
                            let r = r_m * (1.0 + WIDEN_STEP * k as f64);
                            let nb: Vec<(usize, Point)> = grid
                                .within(positions[i], r)
                                .into_iter()
                                .filter(|&j| j != i)
                                .map(|j| (j, positions[j]))
                                .collect();
                            if let Ok(s) = build_stencil(i, positions[i], &nb, r) {
                                return Ok((Some(s), true));
                            }
                        }
                        Err(e)
                    }
                }
            })
            .collect();
        let mut stencils = Vec::with_capacity(results.len());
        let mut widened = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            let (s, w) = r?;
            if w {
                widened.push(i);
            }
            stencils.push(s);
        }
        Ok(Self { stencils, widened })
    }

    pub fn get(&self, i: usize) -> Option<&Stencil> {
        self.stencils.get(i).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    /// Ids of nodes whose stencil needed an enlarged radius.
    pub fn widened(&self) -> &[usize] {
        &self.widened
    }

    pub fn iter(&self) -> impl Iterator<Item = &Stencil> {
        self.stencils.iter().flatten()
    }

    /// Text dump, one line per (node, neighbor): `node neighbor m1 m2 m3 m4 m5`.
    pub fn dump(&self, mut out: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(&mut out);
        writeln!(w, "# node neighbor m_x m_y m_xx m_yy m_xy")?;
        for s in self.iter() {
            for (slot, j) in s.neighbors.iter().enumerate() {
                write!(w, "{} {}", s.node, j)?;
                for row in &s.rows {
                    write!(w, " {:e}", row[slot])?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
