//! Compressed-row matrices and a banded direct solver.
//!
//! The factorization reorders the unknowns with reverse Cuthill–McKee,
//! equilibrates the rows, and runs LU with partial pivoting inside the band.
//! GFDM matrices are local, so the band stays narrow after reordering.

use std::collections::VecDeque;
use std::io::Write;

use crate::error::{Error, Result};

/// Relative residual bound every accepted solution must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a square matrix from per-row `(column, value)` lists.
    /// Duplicate columns are summed and exact zeros dropped, except on the
    /// diagonal, which is always stored.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let start = col_idx.len();
            for (j, v) in row {
                if j >= n {
                    return Err(Error::Argument(format!("column {j} out of range in row {i} of a {n}×{n} matrix")));
                }
                if col_idx.len() > start && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            let mut w = start;
            for r in start..col_idx.len() {
                if values[r] != 0.0 || col_idx[r] == i {
                    col_idx[w] = col_idx[r];
                    values[w] = values[r];
                    w += 1;
                }
            }
            col_idx.truncate(w);
            values.truncate(w);
            row_ptr.push(w);
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(columns, values)` of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// Coordinate text dump, one `row col value` triplet per line.
    pub fn write_coo(&self, mut out: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(&mut out);
        writeln!(w, "% {} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(w, "{i} {j} {v:e}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reverse Cuthill–McKee order of the symmetrized pattern, as a list
    /// of old indices in new order.
    pub fn rcm_order(&self) -> Vec<usize> {
        let n = self.n;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for &j in self.row(i).0 {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut by_degree: Vec<usize> = (0..n).collect();
        by_degree.sort_by_key(|&i| (degree[i], i));
        for &seed in &by_degree {
            if visited[seed] {
                continue;
            }
            let start = pseudo_peripheral(seed, &adj, &degree);
            visited[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
                next.sort_by_key(|&u| (degree[u], u));
                for u in next {
                    visited[u] = true;
                    queue.push_back(u);
                }
            }
        }
        order.reverse();
        order
    }
}

/// Endpoint of a few BFS sweeps from `seed`: a node of (nearly) maximal
/// eccentricity in its component, which keeps RCM level sets thin.
fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut level = vec![usize::MAX; adj.len()];
    let mut touched = Vec::new();
    let mut current = seed;
    let mut best_depth = 0;
    for _ in 0..4 {
        for &t in &touched {
            level[t] = usize::MAX;
        }
        touched.clear();
        level[current] = 0;
        touched.push(current);
        let mut queue = VecDeque::from([current]);
        let mut last = current;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &u in &adj[v] {
                if level[u] == usize::MAX {
                    level[u] = level[v] + 1;
                    touched.push(u);
                    queue.push_back(u);
                }
            }
        }
        let depth = level[last];
        // Among the deepest level pick the smallest degree.
        let candidate = touched
            .iter()
            .copied()
            .filter(|&v| level[v] == depth)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(last);
        if depth <= best_depth && best_depth > 0 {
            break;
        }
        best_depth = depth;
        current = candidate;
    }
    current
}

/// Banded LU factors of a reordered, row-equilibrated matrix.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    piv: Vec<usize>,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// Row scaling applied to old row indices.
    scale: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let perm = a.rcm_order();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut scale = vec![1.0; n];
        for (i, s) in scale.iter_mut().enumerate() {
            let m = a.row(i).1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !m.is_finite() {
                return Err(Error::Solver {
                    node: i,
                    detail: "matrix row contains a non-finite entry".into(),
                });
            }
            if m == 0.0 {
                return Err(Error::Solver {
                    node: i,
                    detail: "matrix row is identically zero".into(),
                });
            }
            *s = 1.0 / m;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for old in 0..n {
            let i = inv[old];
            for &c in a.row(old).0 {
                let j = inv[c];
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![0.0; n * width],
            piv: vec![0; n],
            perm,
            scale,
        };
        for old in 0..n {
            let i = inv[old];
            let (cols, vals) = a.row(old);
            for (&c, &v) in cols.iter().zip(vals) {
                let k = lu.idx(i, inv[c]);
                lu.band[k] = v * lu.scale[old];
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let n = self.n;
        let tiny = n.max(1) as f64 * f64::EPSILON;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.band[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::Solver {
                    node: self.perm[k],
                    detail: format!("zero pivot (|pivot| = {best:.3e}); the system is singular"),
                });
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.band.swap(a, b);
                }
            }
            let d = self.band[self.idx(k, k)];
            let row_k = self.idx(k, k);
            let span = last_col - k;
            for r in k + 1..=last_row {
                let rk = self.idx(r, k);
                let l = self.band[rk] / d;
                self.band[rk] = l;
                if l == 0.0 {
                    continue;
                }
                for t in 1..=span {
                    let v = self.band[row_k + t];
                    self.band[rk + t] -= l * v;
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b` with the stored factors (no refinement).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old] * self.scale[old]).collect();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                for r in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                    y[r] -= self.band[self.idx(r, k)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = y[k];
            let base = self.idx(k, k);
            for j in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                s -= self.band[base + (j - k)] * y[j];
            }
            y[k] = s / self.band[base];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves with existing factors, one refinement step, and the residual
/// check ‖Ax − b‖₂ ≤ 1e-10·‖b‖₂.
pub fn solve_factored(a: &CsrMatrix, lu: &BandedLu, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n() {
        return Err(Error::Argument(format!("rhs has {} entries for a {}-row matrix", b.len(), a.n())));
    }
    let mut x = lu.solve(b);
    let residual = |x: &[f64]| -> Vec<f64> { a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let r = residual(&x);
    let bn = norm2(b);
    if norm2(&r) > 0.0 {
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    let r = residual(&x);
    let rn = norm2(&r);
    if !(rn <= RESIDUAL_TOL * bn) && !(bn == 0.0 && rn == 0.0) {
        let worst = r
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map_or(0, |(i, _)| i);
        return Err(Error::Solver {
            node: worst,
            detail: format!("relative residual {:.3e} exceeds {RESIDUAL_TOL:e}", rn / bn.max(f64::MIN_POSITIVE)),
        });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Solver {
            node: i,
            detail: "solution is not finite".into(),
        });
    }
    Ok(x)
}

/// Factor-and-solve for a single system.
pub fn solve_linear(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let lu = BandedLu::factor(a)?;
    solve_factored(a, &lu, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(4);
        let b = [1.5, -2.0, 0.0, 1e300];
        assert_eq!(solve_linear(&a, &b).unwrap(), b.to_vec());
    }

    #[test]
    fn duplicates_merge_and_zeros_drop() {
        let a = CsrMatrix::from_rows(vec![vec![(1, 2.0), (0, 1.0), (1, -2.0)], vec![(1, 0.0), (0, 3.0)]]).unwrap();
        assert_eq!(a.row(0).0, &[0]);
        assert_eq!(a.row(1).0, &[0, 1]);
        assert_eq!(a.get(1, 0), 3.0);
        assert!(CsrMatrix::from_rows(vec![vec![(5, 1.0)]]).is_err());
    }

    #[test]
    fn three_point_laplacian_gives_linear_profile() {
        let n = 50;
        let rows = (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    vec![(i, 1.0)]
                } else {
                    vec![(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)]
                }
            })
            .collect();
        let a = CsrMatrix::from_rows(rows).unwrap();
        let mut b = vec![0.0; n];
        b[0] = 3.0;
        b[n - 1] = -1.0;
        let x = solve_linear(&a, &b).unwrap();
        for (i, v) in x.iter().enumerate() {
            let exact = 3.0 - 4.0 * i as f64 / (n - 1) as f64;
            assert!((v - exact).abs() < 1e-12, "{i}: {v} vs {exact}");
        }
    }

    #[test]
    fn pure_neumann_is_singular() {
        let n = 6;
        let rows = (0..n)
            .map(|i| {
                if i == 0 {
                    vec![(0, -1.0), (1, 1.0)]
                } else if i == n - 1 {
                    vec![(i - 1, 1.0), (i, -1.0)]
                } else {
                    vec![(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)]
                }
            })
            .collect();
        let a = CsrMatrix::from_rows(rows).unwrap();
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        assert!(matches!(solve_linear(&a, &b), Err(Error::Solver { .. })));
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let a = CsrMatrix::from_rows(vec![vec![(1, 1.0)], vec![(0, 2.0), (1, 1.0)]]).unwrap();
        let x = solve_linear(&a, &[3.0, 4.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn coo_dump_lists_triplets() {
        let a = CsrMatrix::from_rows(vec![vec![(0, 1.0), (1, 2.0)], vec![(1, 3.0)]]).unwrap();
        let mut out = Vec::new();
        a.write_coo(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("0 1 2e0"));
    }
}
