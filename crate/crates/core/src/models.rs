//! Benchmark dynamical systems and the per-solve function-call counter.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, FRAC_PI_8, PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Right-hand side `f(x)` writing into `out`.
pub type RhsFn = dyn Fn(&[f64], &mut [f64]) -> Result<()> + Send + Sync;
/// Exact solution `x(t)` from the model's own initial state.
pub type ClosedFormFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// Solver parameters a model was benchmarked with.
///
/// `order` is kept as published; [`ModelDefaults::even_order`] gives the
/// value the solver actually uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelDefaults {
    pub order: usize,
    pub check_count: usize,
    pub radius: f64,
    pub gamma: f64,
}

impl ModelDefaults {
    pub fn even_order(&self) -> usize {
        round_up_to_even(self.order)
    }
}

/// Smallest even order `>= order`, and at least 2.
pub fn round_up_to_even(order: usize) -> usize {
    (order + order % 2).max(2)
}

/// An autonomous ODE system `dx/dt = f(x)` with its benchmark setup.
#[derive(Clone)]
pub struct DynamicalSystem {
    name: String,
    dim: usize,
    rhs: Arc<RhsFn>,
    x0: Vec<f64>,
    horizon: f64,
    closed_form: Option<Arc<ClosedFormFn>>,
    defaults: ModelDefaults,
}

impl fmt::Debug for DynamicalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DynamicalSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("x0", &self.x0)
            .field("horizon", &self.horizon)
            .field("closed_form", &self.closed_form.is_some())
            .field("defaults", &self.defaults)
            .finish()
    }
}

impl DynamicalSystem {
    pub fn new<F>(name: impl Into<String>, x0: Vec<f64>, horizon: f64, rhs: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim: x0.len(),
            rhs: Arc::new(rhs),
            x0,
            horizon,
            closed_form: None,
            defaults: ModelDefaults {
                order: 8,
                check_count: 100,
                radius: 0.1,
                gamma: 0.2,
            },
        }
    }

    pub fn with_closed_form<F>(mut self, closed_form: F) -> Self
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        self.closed_form = Some(Arc::new(closed_form));
        self
    }

    pub fn with_defaults(mut self, defaults: ModelDefaults) -> Self {
        self.defaults = defaults;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn defaults(&self) -> ModelDefaults {
        self.defaults
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    pub fn closed_form(&self, t: f64) -> Option<Vec<f64>> {
        self.closed_form.as_ref().map(|cf| cf(t))
    }

    /// One evaluation of `f`, checked for finiteness.
    pub fn rhs_eval(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.rhs_into(state, &mut out)?;
        Ok(out)
    }

    pub fn rhs_into(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        if state.len() != self.dim || out.len() != self.dim {
            return Err(Error::ShapeMismatch {
                context: "state dimension",
                expected: self.dim,
                found: state.len(),
            });
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularInput { state: state.to_vec() });
        }
        (self.rhs)(state, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularInput { state: state.to_vec() });
        }
        Ok(())
    }
}

/// Counts evaluations of `f` within a single solve.
pub struct CountingRhs<'a> {
    system: &'a DynamicalSystem,
    calls: Cell<u64>,
}

impl<'a> CountingRhs<'a> {
    pub fn new(system: &'a DynamicalSystem) -> Self {
        Self {
            system,
            calls: Cell::new(0),
        }
    }

    pub fn system(&self) -> &DynamicalSystem {
        self.system
    }

    pub fn eval(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        self.calls.set(self.calls.get() + 1);
        self.system.rhs_into(state, out)
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }
}

pub const APPENDIX_ALPHA: f64 = -0.05;
pub const APPENDIX_BETA: f64 = -1.0;

pub fn cosine() -> DynamicalSystem {
    let x0 = FRAC_PI_4;
    DynamicalSystem::new("cosine", vec![x0], 20.0, |x, out| {
        out[0] = -0.5 * x[0].cos().powi(2);
        Ok(())
    })
    .with_closed_form(move |t| vec![(-0.5 * t + x0.tan()).atan()])
    .with_defaults(ModelDefaults {
        order: 8,
        check_count: 200,
        radius: PI / 20.0,
        gamma: 0.2,
    })
}

pub fn lotka_volterra() -> DynamicalSystem {
    DynamicalSystem::new("lotka_volterra", vec![10.0, 5.0], 20.0, |x, out| {
        out[0] = 1.1 * x[0] - 0.4 * x[0] * x[1];
        out[1] = 0.1 * x[0] * x[1] - 0.4 * x[1];
        Ok(())
    })
    .with_defaults(ModelDefaults {
        order: 5,
        check_count: 200,
        radius: 1.5,
        gamma: 0.5,
    })
}

/// Pendulum with `g / L = 1`.
pub fn simple_pendulum() -> DynamicalSystem {
    DynamicalSystem::new("simple_pendulum", vec![-FRAC_PI_4, FRAC_PI_6], 20.0, |x, out| {
        out[0] = x[1];
        out[1] = -x[0].sin();
        Ok(())
    })
    .with_defaults(ModelDefaults {
        order: 7,
        check_count: 200,
        radius: FRAC_PI_8,
        gamma: 0.2,
    })
}

pub fn limit_cycle() -> DynamicalSystem {
    let x0 = vec![SQRT_2 / 2.0, -SQRT_2 / 2.0];
    let phase = x0[1].atan2(x0[0]);
    DynamicalSystem::new("limit_cycle", x0, 20.0, |x, out| {
        let rho = x[0].hypot(x[1]);
        if rho == 0.0 {
            return Err(Error::SingularInput { state: x.to_vec() });
        }
        out[0] = -x[0] - x[1] + x[0] / rho;
        out[1] = x[0] - x[1] + x[1] / rho;
        Ok(())
    })
    .with_closed_form(move |t| vec![(t + phase).cos(), (t + phase).sin()])
    .with_defaults(ModelDefaults {
        order: 7,
        check_count: 200,
        radius: SQRT_2 / 6.0,
        gamma: 0.2,
    })
}

pub fn kraichnan_orszag() -> DynamicalSystem {
    DynamicalSystem::new("kraichnan_orszag", vec![1.0, 2.0, -3.0], 20.0, |x, out| {
        out[0] = x[1] * x[2];
        out[1] = x[0] * x[2];
        out[2] = -2.0 * x[0] * x[1];
        Ok(())
    })
    .with_defaults(ModelDefaults {
        order: 3,
        check_count: 400,
        radius: 0.1,
        gamma: 0.15,
    })
}

/// Settings of the long Lorenz run compared against RK4 over `[0, 20]`. The
/// sweep defaults (`n = 500`) check too rarely for this field and diverge.
pub const LORENZ_LONG_RUN: ModelDefaults = ModelDefaults {
    order: 5,
    check_count: 2000,
    radius: 1.0,
    gamma: 0.75,
};

/// Lorenz system with `σ = 10`, `ρ = 28`, `β = 3`.
pub fn lorenz() -> DynamicalSystem {
    DynamicalSystem::new("lorenz", vec![5.0, 5.0, 5.0], 20.0, |x, out| {
        out[0] = 10.0 * (x[1] - x[0]);
        out[1] = x[0] * (28.0 - x[2]) - x[1];
        out[2] = x[0] * x[1] - 3.0 * x[2];
        Ok(())
    })
    .with_defaults(ModelDefaults {
        order: 5,
        check_count: 500,
        radius: 1.0,
        gamma: 0.5,
    })
}

/// `dx1/dt = α x1`, `dx2/dt = β (x2 − x1²)` from `x(0) = (1, 1)`, which the
/// observable `(x1, x2, x1²)` turns into a linear system.
pub fn appendix_lifted() -> DynamicalSystem {
    appendix_lifted_with(APPENDIX_ALPHA, APPENDIX_BETA)
}

pub fn appendix_lifted_with(alpha: f64, beta: f64) -> DynamicalSystem {
    let denom = beta - 2.0 * alpha;
    DynamicalSystem::new("appendix_lifted", vec![1.0, 1.0], 20.0, move |x, out| {
        out[0] = alpha * x[0];
        out[1] = beta * (x[1] - x[0] * x[0]);
        Ok(())
    })
    .with_closed_form(move |t| {
        vec![
            (alpha * t).exp(),
            -2.0 * alpha / denom * (beta * t).exp() + beta / denom * (2.0 * alpha * t).exp(),
        ]
    })
    .with_defaults(ModelDefaults {
        order: 6,
        check_count: 100,
        radius: 0.2,
        gamma: 0.2,
    })
}

/// The seven benchmark systems, addressable by name.
#[derive(Debug, Clone)]
pub struct ModelRegistry {
    models: Vec<DynamicalSystem>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self {
            models: vec![
                cosine(),
                lotka_volterra(),
                simple_pendulum(),
                limit_cycle(),
                kraichnan_orszag(),
                lorenz(),
                appendix_lifted(),
            ],
        }
    }

    pub fn get(&self, name: &str) -> Result<&DynamicalSystem> {
        self.models
            .iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::UnknownModel(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &DynamicalSystem> {
        self.models.iter()
    }

    pub fn names(&self) -> Vec<&str> {
        self.models.iter().map(|m| m.name()).collect()
    }
}

/// Looks up a model in the default registry.
pub fn by_name(name: &str) -> Result<DynamicalSystem> {
    ModelRegistry::new().get(name).cloned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn cosine_rhs_values() {
        let m = cosine();
        assert_eq!(m.rhs_eval(&[0.0]).unwrap(), vec![-0.5]);
        assert!(m.rhs_eval(&[PI / 2.0]).unwrap()[0].abs() < 1e-32);
        assert!((m.closed_form(20.0).unwrap()[0] - (-9f64).atan()).abs() < 1e-15);
        assert!((m.closed_form(20.0).unwrap()[0] + 1.460_139_1).abs() < 1e-7);
    }

    #[test]
    fn lotka_volterra_values() {
        let m = lotka_volterra();
        assert_eq!(m.rhs_eval(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(close(&m.rhs_eval(&[10.0, 5.0]).unwrap(), &[-9.0, 3.0], 1e-12));
        assert!(close(&m.rhs_eval(&[4.0, 2.75]).unwrap(), &[0.0, 0.0], 1e-12));
    }

    #[test]
    fn pendulum_values() {
        let m = simple_pendulum();
        assert_eq!(m.rhs_eval(&[0.0, 0.0]).unwrap(), vec![0.0, -0.0]);
        assert!(close(&m.rhs_eval(&[PI / 2.0, 0.0]).unwrap(), &[0.0, -1.0], 1e-15));
    }

    #[test]
    fn limit_cycle_values() {
        let m = limit_cycle();
        assert!(close(&m.rhs_eval(&[1.0, 0.0]).unwrap(), &[0.0, 1.0], 1e-15));
        assert!(close(&m.closed_form(0.0).unwrap(), m.x0(), 1e-15));
        let end = m.closed_form(20.0).unwrap();
        assert!(close(&end, &[(20.0 - FRAC_PI_4).cos(), (20.0 - FRAC_PI_4).sin()], 1e-14));
        assert!(close(&end, &[0.934107, 0.356992], 1e-6));
        assert!(matches!(m.rhs_eval(&[0.0, 0.0]), Err(Error::SingularInput { .. })));
    }

    #[test]
    fn kraichnan_orszag_values() {
        let m = kraichnan_orszag();
        assert!(close(&m.rhs_eval(&[1.0, 2.0, -3.0]).unwrap(), &[-6.0, -3.0, -4.0], 0.0));
        assert!(close(&m.rhs_eval(&[0.0, 1.7, 0.0]).unwrap(), &[0.0, 0.0, 0.0], 0.0));
    }

    #[test]
    fn lorenz_values() {
        let m = lorenz();
        assert!(close(&m.rhs_eval(&[0.0, 0.0, 0.0]).unwrap(), &[0.0, 0.0, 0.0], 0.0));
        assert!(close(&m.rhs_eval(&[5.0, 5.0, 5.0]).unwrap(), &[0.0, 110.0, 10.0], 1e-12));
        assert!(close(&m.rhs_eval(&[9.0, 9.0, 27.0]).unwrap(), &[0.0, 0.0, 0.0], 1e-12));
        assert!(close(&m.rhs_eval(&[-9.0, -9.0, 27.0]).unwrap(), &[0.0, 0.0, 0.0], 1e-12));
    }

    #[test]
    fn appendix_values() {
        let m = appendix_lifted();
        assert!(close(&m.closed_form(0.0).unwrap(), &[1.0, 1.0], 1e-15));
        assert!(close(&m.rhs_eval(&[1.0, 1.0]).unwrap(), &[APPENDIX_ALPHA, 0.0], 0.0));
        assert!((m.closed_form(20.0).unwrap()[0] - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn registry_names_are_unique_and_resolvable() {
        let reg = ModelRegistry::new();
        let mut names = reg.names();
        assert_eq!(names.len(), 7);
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 7);
        for name in reg.names() {
            assert_eq!(reg.get(name).unwrap().name(), name);
        }
        assert!(matches!(reg.get("Lorenz"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn counter_increments_once_per_call() {
        let m = lorenz();
        let counter = CountingRhs::new(&m);
        let mut out = [0.0; 3];
        for k in 1..=5 {
            counter.eval(&[1.0, 2.0, 3.0], &mut out).unwrap();
            assert_eq!(counter.calls(), k);
        }
    }

    #[test]
    fn even_order_rounding() {
        assert_eq!(round_up_to_even(9), 10);
        assert_eq!(round_up_to_even(8), 8);
        assert_eq!(round_up_to_even(0), 2);
        assert_eq!(lorenz().defaults().even_order(), 6);
    }
}
