//! Classical fixed-step RK4 and the reference-solution oracle.
//!
//! The oracle is the closed form when a model has one, otherwise RK4 at a
//! step small enough that halving it changes the answer by less than the
//! tolerances the harness measures against.

use crate::error::{Error, Result};
use crate::models::{CountingRhs, DynamicalSystem};

/// Default oracle step.
pub const ORACLE_STEP: f64 = 1e-4;
/// Oracle step for the Lorenz system past `t = 10`.
pub const LORENZ_LONG_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rk4Config {
    pub steps: usize,
}

/// States at the `M + 1` uniform nodes `t_m = m T / M`.
#[derive(Debug, Clone)]
pub struct Rk4Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub f_calls: u64,
}

impl Rk4Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one node")
    }
}

struct Stepper<'a> {
    rhs: CountingRhs<'a>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(system: &'a DynamicalSystem) -> Self {
        let d = system.dim();
        Self {
            rhs: CountingRhs::new(system),
            k: [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]],
            tmp: vec![0.0; d],
        }
    }

    fn step(&mut self, x: &mut [f64], h: f64) -> Result<()> {
        let [k1, k2, k3, k4] = &mut self.k;
        self.rhs.eval(x, k1)?;
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        self.rhs.eval(&self.tmp, k2)?;
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        self.rhs.eval(&self.tmp, k3)?;
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * k3[i];
        }
        self.rhs.eval(&self.tmp, k4)?;
        for i in 0..x.len() {
            x[i] += h * (k1[i] / 6.0 + k2[i] / 3.0 + k3[i] / 3.0 + k4[i] / 6.0);
        }
        Ok(())
    }
}

fn diverged(err: Error, time: f64) -> Error {
    match err {
        Error::SingularInput { .. } => Error::Divergence { time },
        other => other,
    }
}

/// Fixed-step RK4 over `[0, horizon]` with `config.steps` steps.
pub fn rk4_solve(system: &DynamicalSystem, x0: &[f64], horizon: f64, config: Rk4Config) -> Result<Rk4Trajectory> {
    if config.steps == 0 || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "RK4 needs steps >= 1 and a positive horizon (steps = {}, T = {horizon})",
            config.steps
        )));
    }
    if x0.len() != system.dim() {
        return Err(Error::ShapeMismatch {
            context: "initial state",
            expected: system.dim(),
            found: x0.len(),
        });
    }
    let h = horizon / config.steps as f64;
    let mut stepper = Stepper::new(system);
    let mut x = x0.to_vec();
    let mut times = Vec::with_capacity(config.steps + 1);
    let mut states = Vec::with_capacity(config.steps + 1);
    times.push(0.0);
    states.push(x.clone());
    for m in 1..=config.steps {
        let t = m as f64 * h;
        stepper.step(&mut x, h).map_err(|e| diverged(e, t))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t });
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(Rk4Trajectory {
        times,
        states,
        f_calls: stepper.rhs.calls(),
    })
}

/// RK4 from `x0` at `t = 0` to each requested time, with steps no larger
/// than `max_step`. Each interval between consecutive targets is split into
/// equal steps so every target is hit exactly.
pub fn rk4_at_times(system: &DynamicalSystem, x0: &[f64], times: &[f64], max_step: f64) -> Result<Vec<Vec<f64>>> {
    if !(max_step > 0.0) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {max_step}")));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidConfig("reference times must be finite and non-negative".into()));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut stepper = Stepper::new(system);
    let mut x = x0.to_vec();
    let mut now = 0.0;
    let mut out = vec![Vec::new(); times.len()];
    for idx in order {
        let target = times[idx];
        let span = target - now;
        if span > 0.0 {
            let steps = (span / max_step - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for m in 1..=steps {
                stepper.step(&mut x, h).map_err(|e| diverged(e, now + m as f64 * h))?;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { time: target });
            }
            now = target;
        }
        out[idx] = x.clone();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceSource {
    ClosedForm,
    HighResRk4,
}

/// Reference states on a time grid.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub source: ReferenceSource,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl ReferenceSolution {
    /// State at a grid time (exact match).
    pub fn at(&self, t: f64) -> Option<&[f64]> {
        self.times.iter().position(|&s| s == t).map(|i| self.states[i].as_slice())
    }
}

/// Oracle RK4 step for a model integrated up to `t_max`.
pub fn oracle_step(system: &DynamicalSystem, t_max: f64) -> f64 {
    if system.name() == "lorenz" && t_max > 10.0 {
        LORENZ_LONG_STEP
    } else {
        ORACLE_STEP
    }
}

/// Reference solution from the model's own initial state.
pub fn reference_solve(system: &DynamicalSystem, t_grid: &[f64]) -> Result<ReferenceSolution> {
    if let Some(&bad) = t_grid.iter().find(|&&t| !(0.0..=system.horizon()).contains(&t)) {
        return Err(Error::TimeOutOfRange {
            t: bad,
            horizon: system.horizon(),
        });
    }
    if system.has_closed_form() {
        let states = t_grid
            .iter()
            .map(|&t| system.closed_form(t).expect("closed form present"))
            .collect();
        return Ok(ReferenceSolution {
            source: ReferenceSource::ClosedForm,
            times: t_grid.to_vec(),
            states,
        });
    }
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let states = rk4_at_times(system, system.x0(), t_grid, oracle_step(system, t_max))?;
    Ok(ReferenceSolution {
        source: ReferenceSource::HighResRk4,
        times: t_grid.to_vec(),
        states,
    })
}

/// Largest per-component difference between RK4 at step `h` and at `h / 2`
/// at time `t`.
pub fn step_halving_gap(system: &DynamicalSystem, t: f64, h: f64) -> Result<f64> {
    let coarse = rk4_at_times(system, system.x0(), &[t], h)?;
    let fine = rk4_at_times(system, system.x0(), &[t], h / 2.0)?;
    Ok(coarse[0]
        .iter()
        .zip(&fine[0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
