//! Verification oracles and error metrics.
//!
//! The 1D upwind finite-difference solver here is deliberately independent
//! of the meshless path: it shares no assembly, stencil or solver code.

use std::io::Write;

use nalgebra::{Matrix6, Vector6};
use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::BoundaryCondition;
use crate::cloud::{Point, PointCloud, SpatialGrid};
use crate::config::{CaseConfig, CloudSpec, GeometrySpec, Overrides};
use crate::error::{Error, Result};
use crate::march::State;
use crate::output::{simulate, write_snapshot_csv};
use crate::props::{PermeabilityField, ALPHA, BETA};

/// Steady pressure of the rectangle benchmark: 25 MPa on the left edge,
/// 10 MPa on the right edge, 300 m apart.
pub fn analytical_pressure(x: f64) -> f64 {
    25.0 - x / 20.0
}

/// Leading dissipation term of first-order upwinding, (dx/2)·|v·T''|.
pub fn dissipation_estimate(dx: f64, v_x: f64, d2t_dx2: f64) -> f64 {
    0.5 * dx * (v_x * d2t_dx2).abs()
}

/// Coefficients of `a·T'' − b·T' = c·∂T/∂t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdmCoeffs {
    pub diffusion: f64,
    pub convection: f64,
    pub accumulation: f64,
}

/// Implicit 1D upwind finite differences on `nx` nodes, Dirichlet ends,
/// flow in +x. Returns `(time, profile)` for every step in `keep_steps`
/// (step 0 is the initial profile).
#[allow(clippy::too_many_arguments)]
pub fn fdm1d_upwind(
    nx: usize,
    dx: f64,
    dt: f64,
    steps: usize,
    coeffs: FdmCoeffs,
    ends: (f64, f64),
    initial: f64,
    keep_steps: &[usize],
) -> Result<Vec<(f64, Vec<f64>)>> {
    let FdmCoeffs {
        diffusion: a,
        convection: b,
        accumulation: c,
    } = coeffs;
    if nx < 3 {
        return Err(Error::Argument(format!("need at least 3 nodes, got {nx}")));
    }
    if !(a >= 0.0 && b >= 0.0 && c > 0.0 && dx > 0.0 && dt > 0.0) {
        return Err(Error::Argument(format!(
            "invalid finite-difference inputs: a={a}, b={b}, c={c}, dx={dx}, dt={dt}"
        )));
    }
    let lower = a / (dx * dx) + b / dx;
    let upper = a / (dx * dx);
    let diag = -2.0 * a / (dx * dx) - b / dx - c / dt;
    let m = nx - 2;
    let mut t = vec![initial; nx];
    let mut out = Vec::new();
    if keep_steps.contains(&0) {
        out.push((0.0, t.clone()));
    }
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for step in 1..=steps {
        // Thomas sweep over the interior unknowns.
        for k in 0..m {
            let i = k + 1;
            let mut rhs = -c / dt * t[i];
            if i == 1 {
                rhs -= lower * ends.0;
            }
            if i == nx - 2 {
                rhs -= upper * ends.1;
            }
            let (l, prev_c, prev_d) = if k == 0 { (0.0, 0.0, 0.0) } else { (lower, cp[k - 1], dp[k - 1]) };
            let piv = diag - l * prev_c;
            if piv.abs() < f64::EPSILON * diag.abs() {
                return Err(Error::Solver {
                    node: i,
                    detail: "zero pivot in tridiagonal sweep".into(),
                });
            }
            cp[k] = if k + 1 < m { upper / piv } else { 0.0 };
            dp[k] = (rhs - l * prev_d) / piv;
        }
        let mut next = vec![0.0; nx];
        next[0] = ends.0;
        next[nx - 1] = ends.1;
        for k in (0..m).rev() {
            next[k + 1] = dp[k] - if k + 1 < m { cp[k] * next[k + 2] } else { 0.0 };
        }
        t = next;
        if keep_steps.contains(&step) {
            out.push((step as f64 * dt, t.clone()));
        }
    }
    Ok(out)
}

/// ‖computed − reference‖₂ / ‖reference‖₂.
pub fn l2_relative_error(computed: &[f64], reference: &[f64]) -> Result<f64> {
    if computed.len() != reference.len() {
        return Err(Error::Argument(format!(
            "node sets differ: {} computed values, {} reference values",
            computed.len(),
            reference.len()
        )));
    }
    let num: f64 = computed.iter().zip(reference).map(|(c, r)| (c - r) * (c - r)).sum();
    let den: f64 = reference.iter().map(|r| r * r).sum();
    if den == 0.0 {
        return Err(Error::Argument("reference has zero norm".into()));
    }
    Ok((num / den).sqrt())
}

fn linf(computed: &[f64], reference: &[f64]) -> f64 {
    computed.iter().zip(reference).map(|(c, r)| (c - r).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub field: String,
    pub time: f64,
    pub l2_relative: f64,
    pub linf_absolute: f64,
    pub node_count: usize,
    pub r_m_over_dx: f64,
    pub dx: f64,
}

impl ErrorReport {
    pub fn new(field: &str, time: f64, computed: &[f64], reference: &[f64], r_m_over_dx: f64, dx: f64) -> Result<Self> {
        Ok(Self {
            field: field.to_string(),
            time,
            l2_relative: l2_relative_error(computed, reference)?,
            linf_absolute: linf(computed, reference),
            node_count: computed.len(),
            r_m_over_dx,
            dx,
        })
    }
}

/// Values of non-virtual nodes with `|y − y0| ≤ tol`, ordered by x.
pub fn section_profile(cloud: &PointCloud, values: &[f64], y0: f64, tol: f64) -> Vec<(f64, f64)> {
    let mut s: Vec<(f64, f64)> = cloud
        .nodes()
        .iter()
        .filter(|n| !n.is_virtual() && (n.position.y - y0).abs() <= tol)
        .map(|n| (n.position.x, values[n.id]))
        .collect();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    s
}

/// Linear interpolation of a uniform profile starting at `x0`.
pub fn sample_profile(x0: f64, dx: f64, profile: &[f64], x: f64) -> f64 {
    let s = ((x - x0) / dx).clamp(0.0, (profile.len() - 1) as f64);
    let i = (s.floor() as usize).min(profile.len() - 2);
    let f = s - i as f64;
    profile[i] * (1.0 - f) + profile[i + 1] * f
}

/// Exact value of a decimal parameter: the shortest round-trip decimal
/// string of `v`, read as a fraction.
pub fn exact_decimal(v: f64) -> Result<Ratio<i128>> {
    let s = format!("{v}");
    let bad = || Error::Argument(format!("{v} has no exact decimal form within range"));
    let (neg, digits) = match s.strip_prefix('-') {
        Some(d) => (true, d),
        None => (false, s.as_str()),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if frac.len() > 30 {
        return Err(bad());
    }
    let num: i128 = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let den = 10i128.checked_pow(frac.len() as u32).ok_or_else(bad)?;
    let r = Ratio::new(num, den);
    Ok(if neg { -r } else { r })
}

/// Convection-diffusion coefficients of the rectangle benchmark, computed
/// exactly from the decimal property values.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientAudit {
    pub diffusion: Ratio<i128>,
    pub convection: Ratio<i128>,
    pub accumulation: Ratio<i128>,
}

impl CoefficientAudit {
    pub fn as_f64(&self) -> FdmCoeffs {
        let f = |r: &Ratio<i128>| *r.numer() as f64 / *r.denom() as f64;
        FdmCoeffs {
            diffusion: f(&self.diffusion),
            convection: f(&self.convection),
            accumulation: f(&self.accumulation),
        }
    }
}

/// Steady 1D reduction of a rectangle case: uniform permeability,
/// incompressible and temperature-independent, Dirichlet left/right and
/// closed top/bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct RectangleOracle {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
    pub p_left: f64,
    pub p_right: f64,
    pub t_left: f64,
    pub t_right: f64,
    pub t_init: f64,
    pub coeffs: FdmCoeffs,
    pub audit: CoefficientAudit,
}

impl RectangleOracle {
    pub fn from_case(cfg: &CaseConfig) -> Result<Self> {
        let unsupported = |m: &str| Error::Argument(format!("no 1D oracle for this case: {m}"));
        let GeometrySpec::Rectangle {
            x0,
            y0,
            width,
            height,
            labels,
        } = &cfg.geometry
        else {
            return Err(unsupported("geometry is not a rectangle"));
        };
        let pr = &cfg.properties;
        let PermeabilityField::Uniform { value: k } = pr.permeability else {
            return Err(unsupported("permeability is not uniform"));
        };
        if pr.c_t != 0.0 || pr.c_temp != 0.0 || pr.alpha_t != 0.0 {
            return Err(unsupported("compressibility, thermal expansion and viscosity coupling must be zero"));
        }
        let bc = |l: &String| &cfg.boundary_conditions[l];
        let dirichlet = |b: &BoundaryCondition| match b {
            BoundaryCondition::Dirichlet { value } => Some(*value),
            _ => None,
        };
        let closed = |b: &BoundaryCondition| {
            matches!(b, BoundaryCondition::Derivative { h, q, direction: None, .. } if *h == 0.0 && *q == 0.0)
        };
        let [bottom, right, top, left] = [bc(&labels[0]), bc(&labels[1]), bc(&labels[2]), bc(&labels[3])];
        if ![bottom, top].iter().all(|b| closed(&b.pressure) && closed(&b.temperature)) {
            return Err(unsupported("top and bottom must be closed"));
        }
        let (Some(p_left), Some(t_left), Some(p_right), Some(t_right)) = (
            dirichlet(&left.pressure),
            dirichlet(&left.temperature),
            dirichlet(&right.pressure),
            dirichlet(&right.temperature),
        ) else {
            return Err(unsupported("left and right edges must be Dirichlet"));
        };
        if p_left < p_right {
            return Err(unsupported("flow must run in +x"));
        }
        let e = exact_decimal;
        let one = Ratio::from_integer(1);
        let phi = e(pr.phi_0)?;
        let lambda = (one - phi) * e(pr.lambda_r)? + phi * e(pr.lambda_l)?;
        let gradient = (e(p_left)? - e(p_right)?) / e(*width)?;
        let audit = CoefficientAudit {
            diffusion: e(BETA)? * lambda,
            convection: e(ALPHA)? * e(pr.rho_l)? * e(pr.c_l)? * e(k)? / e(pr.mu_0)? * gradient,
            accumulation: (one - phi) * e(pr.rho_r)? * e(pr.c_r)? + phi * e(pr.rho_l)? * e(pr.c_l)?,
        };
        Ok(Self {
            x0: *x0,
            y0: *y0,
            width: *width,
            height: *height,
            p_left,
            p_right,
            t_left,
            t_right,
            t_init: pr.t_0,
            coeffs: audit.as_f64(),
            audit,
        })
    }

    pub fn pressure(&self, x: f64) -> f64 {
        self.p_left - (self.p_left - self.p_right) * (x - self.x0) / self.width
    }

    pub fn mid_height(&self) -> f64 {
        self.y0 + 0.5 * self.height
    }

    /// Profiles at `times` on a grid of spacing `dx`.
    pub fn temperature(&self, dx: f64, dt: f64, times: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
        let cells = self.width / dx;
        if (cells - cells.round()).abs() > 1e-9 * cells {
            return Err(Error::Argument(format!("width {} is not a multiple of dx {dx}", self.width)));
        }
        let keep: Vec<usize> = times.iter().map(|t| ((t / dt) - 1e-9).ceil().max(0.0) as usize).collect();
        let steps = keep.iter().copied().max().unwrap_or(0);
        fdm1d_upwind(
            cells.round() as usize + 1,
            dx,
            dt,
            steps,
            self.coeffs,
            (self.t_left, self.t_right),
            self.t_init,
            &keep,
        )
    }
}

/// Temperature bounds implied by the initial value and every Dirichlet
/// temperature.
pub fn temperature_bounds(cfg: &CaseConfig) -> (f64, f64) {
    cfg.boundary_conditions
        .values()
        .filter_map(|b| match b.temperature {
            BoundaryCondition::Dirichlet { value } => Some(value),
            _ => None,
        })
        .fold((cfg.properties.t_0, cfg.properties.t_0), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Largest excursion of T outside `[lo, hi]` over all states, split into
/// (non-virtual nodes, virtual nodes).
pub fn bound_violation(cloud: &PointCloud, states: &[State], lo: f64, hi: f64) -> (f64, f64) {
    let mut worst = (0.0f64, 0.0f64);
    for s in states {
        for n in cloud.nodes() {
            let t = s.t[n.id];
            let e = (lo - t).max(t - hi).max(0.0);
            if n.is_virtual() {
                worst.1 = worst.1.max(e);
            } else {
                worst.0 = worst.0.max(e);
            }
        }
    }
    worst
}

/// Solution fields of a run, restricted to non-virtual nodes.
fn physical(cloud: &PointCloud, values: &[f64]) -> Vec<f64> {
    cloud.nodes().iter().filter(|n| !n.is_virtual()).map(|n| values[n.id]).collect()
}

fn physical_positions(cloud: &PointCloud) -> Vec<Point> {
    cloud.nodes().iter().filter(|n| !n.is_virtual()).map(|n| n.position).collect()
}

fn nominal_spacing(cfg: &CaseConfig) -> f64 {
    match &cfg.cloud {
        CloudSpec::Cartesian { dx, .. } => *dx,
        CloudSpec::Scattered { spacing, .. } => *spacing,
        CloudSpec::File { .. } => f64::NAN,
    }
}

#[derive(Debug, Default)]
pub struct StudyTable {
    pub rows: Vec<ErrorReport>,
    /// Cells that failed: (dx, r_m multiplier, error).
    pub failures: Vec<(f64, f64, String)>,
}

impl StudyTable {
    pub fn find(&self, field: &str, dx: f64, rm: f64, time: f64) -> Option<&ErrorReport> {
        self.rows
            .iter()
            .find(|r| r.field == field && r.dx == dx && r.r_m_over_dx == rm && r.time == time)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "dx,r_m_mult,field,l2_rel,linf")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{}@{},{:e},{:e}",
                r.dx, r.r_m_over_dx, r.field, r.time, r.l2_relative, r.linf_absolute
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&format!(
                "dx={:<5} r_m={:<4}dx  {:<6} t={:<6} L2={:.4e}  Linf={:.4e}\n",
                r.dx, r.r_m_over_dx, r.field, r.time, r.l2_relative, r.linf_absolute
            ));
        }
        for (dx, rm, e) in &self.failures {
            s.push_str(&format!("dx={dx} r_m={rm}dx FAILED: {e}\n"));
        }
        s
    }
}

/// Fine reference resolution relative to the tested spacing.
pub const FINE_FACTOR: f64 = 10.0;

/// Errors of one rectangle run: pressure against the analytical solution
/// and temperature against the matched-resolution oracle (`T_fdm`, mid-height
/// section) and the fine oracle (`T_ref`, every non-virtual node).
pub fn rectangle_errors(cfg: &CaseConfig) -> Result<Vec<ErrorReport>> {
    let oracle = RectangleOracle::from_case(cfg)?;
    let dx = nominal_spacing(cfg);
    let rm = cfg.rm_mult;
    let sim = simulate(cfg)?;
    let cloud = &sim.disc.cloud;
    let states: Vec<&State> = sim.output.snapshots.iter().filter(|s| s.time > 0.0).collect();
    let times: Vec<f64> = states.iter().map(|s| s.time).collect();
    let matched = oracle.temperature(dx, cfg.schedule.dt, &times)?;
    let fine_dx = dx / FINE_FACTOR;
    let fine = oracle.temperature(fine_dx, cfg.schedule.dt, &times)?;
    let pos = physical_positions(cloud);
    let mut rows = Vec::new();
    for ((s, (_, m)), (_, f)) in states.iter().zip(&matched).zip(&fine) {
        let p = physical(cloud, &s.p);
        let p_ref: Vec<f64> = pos.iter().map(|q| oracle.pressure(q.x)).collect();
        rows.push(ErrorReport::new("p", s.time, &p, &p_ref, rm, dx)?);

        let sec = section_profile(cloud, &s.t, oracle.mid_height(), 1e-9 * dx);
        let sec_t: Vec<f64> = sec.iter().map(|v| v.1).collect();
        let sec_ref: Vec<f64> = sec.iter().map(|v| sample_profile(oracle.x0, dx, m, v.0)).collect();
        if sec.len() != m.len() {
            return Err(Error::Argument(format!(
                "mid-height section has {} nodes, oracle has {}",
                sec.len(),
                m.len()
            )));
        }
        rows.push(ErrorReport::new("T_fdm", s.time, &sec_t, &sec_ref, rm, dx)?);

        let t = physical(cloud, &s.t);
        let t_ref: Vec<f64> = pos.iter().map(|q| sample_profile(oracle.x0, fine_dx, f, q.x)).collect();
        rows.push(ErrorReport::new("T_ref", s.time, &t, &t_ref, rm, dx)?);
    }
    Ok(rows)
}

/// Runs every (dx, r_m multiplier) cell of a rectangle case in parallel.
pub fn convergence_study(template: &CaseConfig, dx_list: &[f64], rm_mults: &[f64]) -> Result<StudyTable> {
    if dx_list.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Argument("dx list must be sorted in descending order".into()));
    }
    RectangleOracle::from_case(template)?;
    let cells: Vec<(f64, f64)> = dx_list
        .iter()
        .flat_map(|&dx| rm_mults.iter().map(move |&rm| (dx, rm)))
        .collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(dx, rm)| {
            let mut cfg = template.clone();
            cfg.apply_overrides(&Overrides {
                dx: Some(dx),
                rm_mult: Some(rm),
                ..Default::default()
            })?;
            rectangle_errors(&cfg)
        })
        .collect();
    let mut table = StudyTable::default();
    for (&(dx, rm), r) in cells.iter().zip(results) {
        match r {
            Ok(rows) => table.rows.extend(rows),
            Err(e) => table.failures.push((dx, rm, e.to_string())),
        }
    }
    Ok(table)
}

/// Mid-height profile `x,T_gfdm,T_fdm,T_ref` of a rectangle run at its
/// final snapshot.
pub fn write_section_profile(cfg: &CaseConfig, mut out: impl Write) -> Result<()> {
    let oracle = RectangleOracle::from_case(cfg)?;
    let dx = nominal_spacing(cfg);
    let sim = simulate(cfg)?;
    let last = sim.output.snapshots.last().expect("at least one snapshot");
    let m = &oracle.temperature(dx, cfg.schedule.dt, &[last.time])?[0].1;
    let fdx = dx / FINE_FACTOR;
    let f = &oracle.temperature(fdx, cfg.schedule.dt, &[last.time])?[0].1;
    writeln!(out, "x,T_gfdm,T_fdm,T_ref")?;
    for (x, t) in section_profile(&sim.disc.cloud, &last.t, oracle.mid_height(), 1e-9 * dx) {
        writeln!(
            out,
            "{x},{t},{},{}",
            sample_profile(oracle.x0, dx, m, x),
            sample_profile(oracle.x0, fdx, f, x)
        )?;
    }
    Ok(())
}

/// Weighted least-squares quadratic interpolation from scattered samples.
pub struct WlsInterpolator {
    grid: SpatialGrid,
    values: Vec<f64>,
    spacing: f64,
}

impl WlsInterpolator {
    pub fn new(points: &[Point], values: Vec<f64>, spacing: f64) -> Result<Self> {
        if points.len() != values.len() || points.len() < 6 {
            return Err(Error::Argument("interpolation needs at least 6 samples, one value each".into()));
        }
        Ok(Self {
            grid: SpatialGrid::new(points, spacing),
            values,
            spacing,
        })
    }

    pub fn eval(&self, q: Point) -> Result<f64> {
        let pts = self.grid.points();
        let mut r = 2.2 * self.spacing;
        for _ in 0..8 {
            let mut near = Vec::new();
            self.grid.for_each_within(q, r, |j, d2| near.push((j, d2)));
            if near.len() >= 10 {
                let mut m = Matrix6::<f64>::zeros();
                let mut rhs = Vector6::<f64>::zeros();
                for &(j, d2) in &near {
                    let w = (1.0 - d2 / (r * r)).powi(2) + 1e-12;
                    let u = (pts[j].x - q.x) / r;
                    let v = (pts[j].y - q.y) / r;
                    let b = Vector6::new(1.0, u, v, u * u, u * v, v * v);
                    m += w * b * b.transpose();
                    rhs += w * self.values[j] * b;
                }
                if let Some(c) = m.cholesky() {
                    return Ok(c.solve(&rhs)[0]);
                }
            }
            r *= 1.5;
        }
        Err(Error::Argument(format!("no well-posed quadratic fit near ({}, {})", q.x, q.y)))
    }
}

/// Self-convergence: each coarser run is compared with the finest run,
/// interpolated onto the coarse non-virtual nodes.
pub fn self_convergence(template: &CaseConfig, spacings: &[f64]) -> Result<Vec<ErrorReport>> {
    if spacings.len() < 2 || spacings.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Argument("spacings must be strictly descending, at least two".into()));
    }
    let runs: Vec<_> = spacings
        .par_iter()
        .map(|&h| {
            let mut cfg = template.clone();
            cfg.apply_overrides(&Overrides {
                dx: Some(h),
                ..Default::default()
            })?;
            simulate(&cfg)
        })
        .collect::<Result<_>>()?;
    let (fine, coarse) = runs.split_last().expect("at least two runs");
    let fine_pos = physical_positions(&fine.disc.cloud);
    let h_ref = *spacings.last().unwrap();
    let mut rows = Vec::new();
    for (run, &h) in coarse.iter().zip(spacings) {
        let pos = physical_positions(&run.disc.cloud);
        for (s, sf) in run.output.snapshots.iter().zip(&fine.output.snapshots) {
            if s.time == 0.0 {
                continue;
            }
            for (name, vals, fvals) in [("p", &s.p, &sf.p), ("T", &s.t, &sf.t)] {
                let interp = WlsInterpolator::new(&fine_pos, physical(&fine.disc.cloud, fvals), h_ref)?;
                let reference: Vec<f64> = pos.iter().map(|&q| interp.eval(q)).collect::<Result<_>>()?;
                let computed = physical(&run.disc.cloud, vals);
                rows.push(ErrorReport::new(name, s.time, &computed, &reference, template.rm_mult, h)?);
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Bitwise reproducibility of every snapshot CSV across two runs.
pub fn deterministic(cfg: &CaseConfig) -> Result<bool> {
    let render = || -> Result<Vec<Vec<u8>>> {
        let sim = simulate(cfg)?;
        sim.output
            .snapshots
            .iter()
            .map(|s| {
                let mut buf = Vec::new();
                write_snapshot_csv(&sim.disc.cloud, s, &mut buf)?;
                Ok(buf)
            })
            .collect()
    };
    Ok(render()? == render()?)
}

/// Oracle comparisons and invariants for one case. Rectangle cases that
/// reduce to 1D also get the analytical-pressure, finite-difference
/// equivalence and coefficient checks.
pub fn verify_case(cfg: &CaseConfig) -> Result<VerifyReport> {
    let mut rep = VerifyReport::default();
    let sim = simulate(cfg)?;
    let (lo, hi) = temperature_bounds(cfg);
    let (v, ghost) = bound_violation(&sim.disc.cloud, &sim.output.snapshots, lo, hi);
    rep.push(
        "temperature bounds",
        v <= 1e-6,
        format!("T within [{lo}, {hi}] up to {v:.3e} (tolerance 1e-6); virtual nodes up to {ghost:.3e}"),
    );

    if let Ok(oracle) = RectangleOracle::from_case(cfg) {
        let rows = rectangle_errors(cfg)?;
        let worst = |field: &str| {
            rows.iter()
                .filter(|r| r.field == field)
                .map(|r| r.l2_relative)
                .fold(0.0, f64::max)
        };
        let p = worst("p");
        rep.push("analytical pressure", p <= 1e-6, format!("max L2 relative {p:.3e} (tolerance 1e-6)"));
        // Only the 3x3 neighbourhood stencil collapses to the 1D scheme.
        let square = matches!(cfg.cloud, CloudSpec::Cartesian { dx, dy } if dx == dy);
        if square && cfg.rm_mult < 5f64.sqrt() {
            let t = worst("T_fdm");
            rep.push(
                "finite-difference equivalence",
                t <= 1e-6,
                format!("max L2 relative at mid-height {t:.3e} (tolerance 1e-6)"),
            );
        }
        let a = &oracle.audit;
        let ints = [&a.diffusion, &a.convection, &a.accumulation];
        rep.push(
            "coefficient audit",
            ints.iter().all(|r| r.is_integer()),
            format!("a = {}, b = {}, c = {}", a.diffusion, a.convection, a.accumulation),
        );
        let t_ref = worst("T_ref");
        rep.push(
            "fine reference",
            true,
            format!("max L2 relative temperature error against the {FINE_FACTOR}x oracle {t_ref:.3e}"),
        );
    }

    let det = deterministic(cfg)?;
    rep.push("determinism", det, "two runs give bit-identical snapshot CSVs".into());
    Ok(rep)
}
