//! Sequential time stepping: pressure first with lagged temperature, then
//! temperature with the new pressure.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_pressure, assemble_temperature, ConvectionTime, Discretization, LinearSystem};
use crate::error::{Error, Result};
use crate::props;
use crate::sparse::{solve_factored, BandedLu, CsrMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub time: f64,
    pub p: Vec<f64>,
    pub t: Vec<f64>,
}

impl State {
    pub fn uniform(n: usize, p: f64, t: f64) -> Self {
        Self {
            time: 0.0,
            p: vec![p; n],
            t: vec![t; n],
        }
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.p.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: i, field: "pressure" });
        }
        if let Some(i) = self.t.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: i,
                field: "temperature",
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub convection_time: ConvectionTime,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Argument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Argument(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return Err(Error::Argument(format!("dt {} exceeds t_end {}", self.dt, self.t_end)));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Argument(format!("t_end {} is not a whole number of steps of {}", self.t_end, self.dt)));
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| !(0.0..=self.t_end).contains(&t)) {
            return Err(Error::Argument(format!("snapshot time {t} lies outside [0, {}]", self.t_end)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Step indices at which snapshots are taken: the first step reaching
    /// each requested time, plus the final step.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self
            .snapshot_times
            .iter()
            .map(|&t| ((t / self.dt) - 1e-9).ceil().max(0.0) as usize)
            .chain([self.steps()])
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Direct solver that keeps the last factorization and reuses it while the
/// matrix stays bitwise identical.
#[derive(Debug, Default)]
pub struct CachedSolver {
    cached: Option<(CsrMatrix, BandedLu)>,
    factorizations: usize,
}

impl CachedSolver {
    pub fn solve(&mut self, sys: &LinearSystem) -> Result<Vec<f64>> {
        let reuse = matches!(&self.cached, Some((m, _)) if *m == sys.matrix);
        if !reuse {
            let lu = BandedLu::factor(&sys.matrix)?;
            self.factorizations += 1;
            self.cached = Some((sys.matrix.clone(), lu));
        }
        let (m, lu) = self.cached.as_ref().unwrap();
        solve_factored(m, lu, &sys.rhs)
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotStats {
    pub time: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Σ φ·V over non-virtual nodes, V = h_avg² per node.
    pub pore_volume: f64,
    /// Σ [(1−φ)ρ_rC_r + φρ_lC_l]·T·V over non-virtual nodes.
    pub heat_content: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub nodes: usize,
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub pressure_factorizations: usize,
    pub temperature_factorizations: usize,
    pub snapshots: Vec<SnapshotStats>,
    pub wall_seconds: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub snapshots: Vec<State>,
    pub summary: RunSummary,
}

/// A failed run: the error plus everything completed before it.
#[derive(Debug)]
pub struct RunError {
    pub error: Error,
    pub failed_step: usize,
    pub snapshots: Vec<State>,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step {} failed: {}", self.failed_step, self.error)
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub struct Simulator<'a> {
    pub disc: &'a Discretization,
    pub schedule: ScheduleConfig,
    pressure: CachedSolver,
    temperature: CachedSolver,
}

impl<'a> Simulator<'a> {
    pub fn new(disc: &'a Discretization, schedule: ScheduleConfig) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            disc,
            schedule,
            pressure: CachedSolver::default(),
            temperature: CachedSolver::default(),
        })
    }

    /// Uniform initial condition p₀, T₀ (boundary rows take over at the
    /// first solve).
    pub fn initial_state(&self) -> State {
        State::uniform(self.disc.len(), self.disc.props.p_0, self.disc.props.t_0)
    }

    pub fn step(&mut self, state: &State) -> Result<State> {
        let dt = self.schedule.dt;
        let psys = assemble_pressure(self.disc, &state.p, &state.t, dt)?;
        let p = self.pressure.solve(&psys)?;
        let tsys = assemble_temperature(self.disc, &state.p, &state.t, &p, dt, self.schedule.convection_time)?;
        let t = self.temperature.solve(&tsys)?;
        let next = State {
            time: state.time + dt,
            p,
            t,
        };
        next.check_finite()?;
        Ok(next)
    }

    pub fn stats(&self, s: &State) -> Result<SnapshotStats> {
        let cloud = &self.disc.cloud;
        let pr = &self.disc.props;
        let vol = cloud.h_avg() * cloud.h_avg();
        let mut st = SnapshotStats {
            time: s.time,
            p_min: f64::INFINITY,
            p_max: f64::NEG_INFINITY,
            t_min: f64::INFINITY,
            t_max: f64::NEG_INFINITY,
            pore_volume: 0.0,
            heat_content: 0.0,
        };
        for node in cloud.nodes().iter().filter(|n| !n.is_virtual()) {
            let (p, t) = (s.p[node.id], s.t[node.id]);
            st.p_min = st.p_min.min(p);
            st.p_max = st.p_max.max(p);
            st.t_min = st.t_min.min(t);
            st.t_max = st.t_max.max(t);
            let phi = props::porosity(p, t, pr)?;
            st.pore_volume += phi * vol;
            st.heat_content += pr.heat_capacity(phi) * t * vol;
        }
        Ok(st)
    }

    /// Runs to `t_end`, handing each snapshot to `sink` as it is produced.
    pub fn run(mut self, mut sink: impl FnMut(&State) -> Result<()>) -> std::result::Result<RunOutput, RunError> {
        let start = Instant::now();
        let wanted = self.schedule.snapshot_steps();
        let steps = self.schedule.steps();
        let mut snapshots = Vec::new();
        let mut stats = Vec::new();
        let mut state = self.initial_state();
        let fail = |error: Error, step: usize, snapshots: Vec<State>| RunError {
            error,
            failed_step: step,
            snapshots,
        };
        for k in 0..=steps {
            if k > 0 {
                match self.step(&state) {
                    Ok(mut next) => {
                        // Whole-step times avoid accumulating round-off.
                        next.time = k as f64 * self.schedule.dt;
                        state = next;
                    }
                    Err(e) => return Err(fail(e, k, snapshots)),
                }
            }
            if wanted.binary_search(&k).is_ok() {
                match self.stats(&state).and_then(|s| sink(&state).map(|_| s)) {
                    Ok(s) => stats.push(s),
                    Err(e) => return Err(fail(e, k, snapshots)),
                }
                snapshots.push(state.clone());
            }
        }
        Ok(RunOutput {
            snapshots,
            summary: RunSummary {
                nodes: self.disc.len(),
                steps,
                dt: self.schedule.dt,
                t_end: self.schedule.t_end,
                pressure_factorizations: self.pressure.factorizations(),
                temperature_factorizations: self.temperature.factorizations(),
                snapshots: stats,
                wall_seconds: start.elapsed().as_secs_f64(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(dt: f64, t_end: f64, snaps: &[f64]) -> ScheduleConfig {
        ScheduleConfig {
            dt,
            t_end,
            snapshot_times: snaps.to_vec(),
            convection_time: ConvectionTime::Implicit,
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(sched(0.5, 100.0, &[20.0]).validate().is_ok());
        assert!(sched(0.0, 1.0, &[]).validate().is_err());
        assert!(sched(2.0, 1.0, &[]).validate().is_err());
        assert!(sched(0.3, 1.0, &[]).validate().is_err());
        assert!(sched(0.5, 1.0, &[2.0]).validate().is_err());
        assert!(sched(0.5, 0.0, &[]).validate().is_ok());
    }

    #[test]
    fn snapshot_steps_include_final() {
        let s = sched(0.5, 100.0, &[20.0, 50.0, 0.0, 100.0]);
        assert_eq!(s.snapshot_steps(), vec![0, 40, 100, 200]);
        assert_eq!(sched(0.5, 0.0, &[]).snapshot_steps(), vec![0]);
    }
}
