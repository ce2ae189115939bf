//! Uniform-grid spatial binning for radius queries.

use super::geometry::{bbox_of, Point};

/// Dense bucket grid over the bounding box of a point set. Buckets hold
/// point indices in insertion order, so query results are deterministic.
#[derive(Clone, Debug)]
pub struct SpatialGrid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<usize>,
    points: Vec<Point>,
}

impl SpatialGrid {
    pub fn new(points: &[Point], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell size must be positive");
        let bb = if points.is_empty() {
            super::geometry::BBox {
                min: Point::default(),
                max: Point::default(),
            }
        } else {
            bbox_of(points)
        };
        // Cap the bucket count so a tiny cell on a large domain stays cheap.
        let max_cells = (4 * points.len()).max(16) as f64;
        let mut cell = cell;
        while (bb.width() / cell + 1.0) * (bb.height() / cell + 1.0) > max_cells {
            cell *= 2.0;
        }
        let nx = (bb.width() / cell).floor() as usize + 1;
        let ny = (bb.height() / cell).floor() as usize + 1;
        let mut counts = vec![0usize; nx * ny + 1];
        let key = |p: Point| -> usize {
            let i = (((p.x - bb.min.x) / cell).floor() as usize).min(nx - 1);
            let j = (((p.y - bb.min.y) / cell).floor() as usize).min(ny - 1);
            j * nx + i
        };
        for &p in points {
            counts[key(p) + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; points.len()];
        for (idx, &p) in points.iter().enumerate() {
            let k = key(p);
            items[fill[k]] = idx;
            fill[k] += 1;
        }
        Self {
            origin: bb.min,
            cell,
            nx,
            ny,
            start: counts,
            items,
            points: points.to_vec(),
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Calls `visit(index, squared_distance)` for every point within
    /// `radius` of `p` (inclusive).
    pub fn for_each_within(&self, p: Point, radius: f64, mut visit: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let lo_i = ((p.x - radius - self.origin.x) / self.cell).floor();
        let hi_i = ((p.x + radius - self.origin.x) / self.cell).floor();
        let lo_j = ((p.y - radius - self.origin.y) / self.cell).floor();
        let hi_j = ((p.y + radius - self.origin.y) / self.cell).floor();
        if hi_i < 0.0 || hi_j < 0.0 {
            return;
        }
        let clamp = |v: f64, n: usize| -> Option<usize> {
            if v < 0.0 {
                Some(0)
            } else if v as usize >= n {
                None
            } else {
                Some(v as usize)
            }
        };
        let (Some(i0), Some(j0)) = (clamp(lo_i, self.nx), clamp(lo_j, self.ny)) else {
            return;
        };
        let i1 = (hi_i as usize).min(self.nx - 1);
        let j1 = (hi_j as usize).min(self.ny - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let k = j * self.nx + i;
                for &idx in &self.items[self.start[k]..self.start[k + 1]] {
                    let d2 = self.points[idx].dist2(p);
                    if d2 <= r2 {
                        visit(idx, d2);
                    }
                }
            }
        }
    }

    /// Indices within `radius` of `p`, sorted ascending.
    pub fn within(&self, p: Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(p, radius, |j, _| out.push(j));
        out.sort_unstable();
        out
    }

    /// Nearest point other than `exclude`, as `(index, distance)`.
    pub fn nearest(&self, p: Point, exclude: Option<usize>) -> Option<(usize, f64)> {
        if self.points.len() <= usize::from(exclude.is_some()) {
            return None;
        }
        let mut radius = self.cell;
        loop {
            let mut best: Option<(usize, f64)> = None;
            self.for_each_within(p, radius, |j, d2| {
                if Some(j) == exclude {
                    return;
                }
                match best {
                    Some((bj, bd)) if bd < d2 || (bd == d2 && bj < j) => {}
                    _ => best = Some((j, d2)),
                }
            });
            if let Some((j, d2)) = best {
                return Some((j, d2.sqrt()));
            }
            radius *= 2.0;
        }
    }
}

/// Mean distance from each point to its nearest other point.
pub(crate) fn average_nearest_distance(points: &[Point]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let bb = bbox_of(points);
    let cell = (bb.width() * bb.height() / points.len() as f64).sqrt().max(bb.diagonal() * 1e-6);
    let grid = SpatialGrid::new(points, cell.max(f64::MIN_POSITIVE));
    let total: f64 = (0..points.len())
        .map(|i| grid.nearest(points[i], Some(i)).map_or(0.0, |(_, d)| d))
        .sum();
    total / points.len() as f64
}

/// O(N²) reference neighbor search: for every point, the sorted ids of the
/// other points with distance ≤ `radius`.
pub fn brute_force_index_sets(points: &[Point], radius: f64) -> Vec<Vec<usize>> {
    let r2 = radius * radius;
    (0..points.len())
        .map(|i| {
            (0..points.len())
                .filter(|&j| j != i && points[i].dist2(points[j]) <= r2)
                .collect()
        })
        .collect()
}
