//! The adaptive solver loop.
//!
//! A segment is built on the box `[x0 − r, x0 + r]^d` centered on the current
//! state. At equidistant check points `τ_k = k T / (n + 1)` the state is
//! reconstructed from the most recent segment; if any component has left
//! the shrunken range `[L + γ r, U − γ r]`, every axis is re-centered on the
//! reconstructed state and a new segment is built there.

use faer::Mat;

use crate::collocation::{diff_matrix, lobatto_points};
use crate::error::{Error, Result};
use crate::generator::{build_generator, FieldSamples, TensorGrid};
use crate::models::{CountingRhs, DynamicalSystem};
use crate::spectral::{compute_modes, eigendecompose, SpectralSegment};

/// Per-axis box `[L_i, U_i]` with the rebuild threshold `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    lower: Vec<f64>,
    upper: Vec<f64>,
    radius: Vec<f64>,
    gamma: f64,
}

impl Neighborhood {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, gamma: f64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::ShapeMismatch {
                context: "neighborhood bounds",
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        for (&l, &u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite()) || l >= u {
                return Err(Error::InvalidInterval { lower: l, upper: u });
            }
        }
        let radius = lower.iter().zip(&upper).map(|(l, u)| (u - l) / 2.0).collect();
        Ok(Self {
            lower,
            upper,
            radius,
            gamma,
        })
    }

    /// Isotropic box of radius `radius` around `center`.
    pub fn centered(center: &[f64], radius: f64, gamma: f64) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
            gamma,
        )
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Acceptable range `R_i = [L_i + γ r_i, U_i − γ r_i]`.
    pub fn acceptable_range(&self, i: usize) -> (f64, f64) {
        let shrink = self.gamma * self.radius[i];
        (self.lower[i] + shrink, self.upper[i] - shrink)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| (l + u) / 2.0).collect()
    }
}

/// True iff every component lies in its closed acceptable range.
pub fn accept_check(state: &[f64], nbhd: &Neighborhood) -> bool {
    assert_eq!(state.len(), nbhd.dim(), "state and neighborhood dimensions differ");
    state.iter().enumerate().all(|(i, &x)| {
        let (lo, hi) = nbhd.acceptable_range(i);
        lo <= x && x <= hi
    })
}

/// Solver parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AskConfig {
    /// Polynomial order `N` per axis (even).
    pub order: usize,
    /// Number of interior check points `n`.
    pub check_count: usize,
    pub radius: f64,
    pub gamma: f64,
    pub horizon: f64,
}

impl AskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 || !self.order.is_multiple_of(2) {
            return Err(Error::InvalidOrder(self.order));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        Ok(())
    }

    /// Check points `τ_1 < … < τ_n`, all strictly inside `(0, T)`.
    pub fn check_times(&self) -> Vec<f64> {
        let spacing = self.horizon / (self.check_count + 1) as f64;
        (1..=self.check_count).map(|k| k as f64 * spacing).collect()
    }

    /// Collocation points per segment, `(N + 1)^d`.
    pub fn points_per_segment(&self, dim: usize) -> u64 {
        (self.order as u64 + 1).pow(dim as u32)
    }

    /// The model's published parameters, with the order rounded up to even.
    pub fn from_defaults(system: &DynamicalSystem) -> Self {
        let d = system.defaults();
        Self {
            order: d.even_order(),
            check_count: d.check_count,
            radius: d.radius,
            gamma: d.gamma,
            horizon: system.horizon(),
        }
    }
}

/// Result of an adaptive solve: one segment per build, in time order.
#[derive(Debug, Clone)]
pub struct AskSolution {
    segments: Vec<SpectralSegment>,
    neighborhoods: Vec<Neighborhood>,
    final_state: Vec<f64>,
    f_calls: u64,
    horizon: f64,
}

impl AskSolution {
    pub fn segments(&self) -> &[SpectralSegment] {
        &self.segments
    }

    pub fn neighborhoods(&self) -> &[Neighborhood] {
        &self.neighborhoods
    }

    /// Adaptive rebuilds, excluding the initial build.
    pub fn rebuild_count(&self) -> usize {
        self.segments.len() - 1
    }

    pub fn final_state(&self) -> &[f64] {
        &self.final_state
    }

    pub fn f_calls(&self) -> u64 {
        self.f_calls
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Index of the segment with the largest anchor `<= t`.
    fn segment_for(&self, t: f64) -> usize {
        self.segments.partition_point(|s| s.anchor_time() <= t).saturating_sub(1)
    }

    /// Mesh-free evaluation at any `t ∈ [0, T]`.
    pub fn evaluate_at(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        let seg = &self.segments[self.segment_for(t)];
        seg.evaluate(t - seg.anchor_time()).map_err(|e| with_context(e, seg.anchor_time()))
    }
}

fn with_context(err: Error, anchor_time: f64) -> Error {
    match err {
        Error::Segment { .. } => err,
        other => Error::Segment {
            anchor_time,
            source: Box::new(other),
        },
    }
}

/// Builds the spectral segment for `nbhd`, anchored at its midpoint.
pub fn build_segment(
    rhs: &CountingRhs<'_>,
    nbhd: &Neighborhood,
    order: usize,
    anchor_time: f64,
) -> Result<SpectralSegment> {
    let dim = nbhd.dim();
    let mut axes = Vec::with_capacity(dim);
    let mut diffs = Vec::with_capacity(dim);
    for i in 0..dim {
        axes.push(lobatto_points(order, nbhd.lower()[i], nbhd.upper()[i])?);
        diffs.push(diff_matrix(order, nbhd.lower()[i], nbhd.upper()[i])?);
    }
    let grid = TensorGrid::new(axes)?;
    let m = grid.len();

    let mut field = Mat::<f64>::zeros(m, dim);
    let mut point = vec![0.0; dim];
    let mut value = vec![0.0; dim];
    for p in 0..m {
        grid.point(p, &mut point);
        rhs.eval(&point, &mut value)?;
        for k in 0..dim {
            field[(p, k)] = value[k];
        }
    }
    let diff_refs: Vec<_> = diffs.iter().collect();
    let k = build_generator(&FieldSamples::new(field)?, &diff_refs)?;
    let eigen = eigendecompose(&k)?;
    let modes = compute_modes(&eigen, &grid.coordinates())?;
    let center = grid.center_index();
    let mut anchor_state = vec![0.0; dim];
    grid.point(center, &mut anchor_state);
    SpectralSegment::new(&eigen, modes, center, anchor_time, anchor_state)
}

/// Solves `dx/dt = f(x)`, `x(0) = x0` on `[0, config.horizon]`.
pub fn ask_solve(system: &DynamicalSystem, x0: &[f64], config: &AskConfig) -> Result<AskSolution> {
    config.validate()?;
    let dim = system.dim();
    if !(1..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    if x0.len() != dim {
        return Err(Error::ShapeMismatch {
            context: "initial state",
            expected: dim,
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { time: 0.0 });
    }

    let rhs = CountingRhs::new(system);
    let mut nbhd = Neighborhood::centered(x0, config.radius, config.gamma)?;
    let first = build_segment(&rhs, &nbhd, config.order, 0.0).map_err(|e| with_context(e, 0.0))?;
    let mut segments = vec![first];
    let mut neighborhoods = vec![nbhd.clone()];

    for tau in config.check_times() {
        let seg = segments.last().expect("at least one segment");
        let state = seg
            .evaluate(tau - seg.anchor_time())
            .map_err(|e| with_context(e, seg.anchor_time()))?;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: tau });
        }
        if !accept_check(&state, &nbhd) {
            log::debug!("rebuild at t = {tau}: state {state:?}");
            nbhd = Neighborhood::centered(&state, config.radius, config.gamma)?;
            let next = build_segment(&rhs, &nbhd, config.order, tau).map_err(|e| with_context(e, tau))?;
            segments.push(next);
            neighborhoods.push(nbhd.clone());
        }
    }

    let last = segments.last().expect("at least one segment");
    let final_state = last
        .evaluate(config.horizon - last.anchor_time())
        .map_err(|e| with_context(e, last.anchor_time()))?;
    if final_state.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { time: config.horizon });
    }
    Ok(AskSolution {
        segments,
        neighborhoods,
        final_state,
        f_calls: rhs.calls(),
        horizon: config.horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nbhd(l: f64, u: f64, gamma: f64) -> Neighborhood {
        Neighborhood::new(vec![l], vec![u], gamma).unwrap()
    }

    #[test]
    fn accept_check_interval_arithmetic() {
        let n = nbhd(0.0, 2.0, 0.5);
        assert_eq!(n.radius(), &[1.0]);
        assert!(accept_check(&[1.2], &n));
        assert!(!accept_check(&[1.7], &n));
        assert!(accept_check(&[0.5], &n));
        assert!(accept_check(&[1.5], &n));
    }

    #[test]
    fn gamma_one_collapses_to_center() {
        let n = nbhd(0.0, 2.0, 1.0);
        assert!(accept_check(&[1.0], &n));
        assert!(!accept_check(&[1.0 + 1e-12], &n));
        assert!(!accept_check(&[1.0 - 1e-12], &n));
    }

    #[test]
    fn multi_dimensional_check_needs_every_component() {
        let n = Neighborhood::centered(&[0.0, 10.0], 1.0, 0.2).unwrap();
        assert!(accept_check(&[0.7, 10.8], &n));
        assert!(!accept_check(&[0.7, 10.81], &n));
    }

    #[test]
    fn config_validation() {
        let good = AskConfig {
            order: 4,
            check_count: 3,
            radius: 0.1,
            gamma: 0.2,
            horizon: 1.0,
        };
        assert!(good.validate().is_ok());
        assert!(AskConfig { order: 5, ..good }.validate().is_err());
        assert!(AskConfig { radius: 0.0, ..good }.validate().is_err());
        assert!(AskConfig { gamma: 0.0, ..good }.validate().is_err());
        assert!(AskConfig { gamma: 1.5, ..good }.validate().is_err());
        assert!(AskConfig { horizon: -1.0, ..good }.validate().is_err());
    }

    #[test]
    fn check_times_are_equidistant_and_interior() {
        let cfg = AskConfig {
            order: 4,
            check_count: 4,
            radius: 0.1,
            gamma: 0.2,
            horizon: 10.0,
        };
        assert_eq!(cfg.check_times(), vec![2.0, 4.0, 6.0, 8.0]);
        assert!(AskConfig { check_count: 0, ..cfg }.check_times().is_empty());
    }

    #[test]
    fn neighborhood_rejects_bad_gamma() {
        assert!(Neighborhood::centered(&[0.0], 1.0, 0.0).is_err());
        assert!(Neighborhood::centered(&[0.0], 1.0, 1.01).is_err());
    }
}
