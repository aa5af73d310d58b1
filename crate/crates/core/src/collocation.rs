//! Chebyshev–Gauss–Lobatto nodes and spectral differentiation matrices.
//!
//! Nodes are stored in ascending order so that index `N/2` is the interval
//! midpoint. The reference matrix on `[-1, 1]` is built once per order and
//! cached; interval matrices are scaled copies of it.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use faer::Mat;

use crate::error::{Error, Result};

/// Gauss–Lobatto nodes on `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    points: Vec<f64>,
    lower: f64,
    upper: f64,
    order: usize,
}

impl Grid1D {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn midpoint(&self) -> f64 {
        self.points[self.order / 2]
    }
}

/// Spectral differentiation matrix on the nodes of a [`Grid1D`].
#[derive(Debug, Clone)]
pub struct DiffMatrix {
    entries: Mat<f64>,
    order: usize,
    interval: (f64, f64),
}

impl DiffMatrix {
    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn size(&self) -> usize {
        self.order + 1
    }

    /// Applies the matrix to node samples.
    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        let n = self.size();
        assert_eq!(samples.len(), n, "sample count must equal N + 1");
        (0..n)
            .map(|i| (0..n).map(|j| self.entries[(i, j)] * samples[j]).sum())
            .collect()
    }
}

fn check_args(order: usize, lower: f64, upper: f64) -> Result<()> {
    if order < 2 || !order.is_multiple_of(2) {
        return Err(Error::InvalidOrder(order));
    }
    if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
        return Err(Error::InvalidInterval { lower, upper });
    }
    Ok(())
}

/// Ascending reference nodes `-cos(jπ/N)` on `[-1, 1]`.
///
/// Evaluated as `sin(π(2j - N)/(2N))`, which is exactly antisymmetric about
/// the midpoint and hits `-1, 0, 1` exactly.
fn reference_points(order: usize) -> Vec<f64> {
    let n = order as f64;
    (0..=order)
        .map(|j| (PI * (2.0 * j as f64 - n) / (2.0 * n)).sin())
        .collect()
}

/// Maps reference nodes onto `[lower, upper]`.
///
/// Endpoints and the midpoint are pinned to `lower`, `upper` and
/// `(lower + upper) / 2` so the center state sits exactly on a node.
fn scale_points(reference: &[f64], lower: f64, upper: f64) -> Vec<f64> {
    let half = (upper - lower) / 2.0;
    let order = reference.len() - 1;
    let mut points: Vec<f64> = reference.iter().map(|&xi| half * (xi + 1.0) + lower).collect();
    points[0] = lower;
    points[order / 2] = (lower + upper) / 2.0;
    points[order] = upper;
    points
}

/// Chebyshev–Gauss–Lobatto points of order `order` on `[lower, upper]`.
pub fn lobatto_points(order: usize, lower: f64, upper: f64) -> Result<Grid1D> {
    check_args(order, lower, upper)?;
    Ok(Grid1D {
        points: scale_points(&reference_points(order), lower, upper),
        lower,
        upper,
        order,
    })
}

fn build_reference_matrix(order: usize) -> Mat<f64> {
    let x = reference_points(order);
    let n = order + 1;
    let weight = |i: usize| if i == 0 || i == order { 2.0 } else { 1.0 };
    let mut d = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let value = weight(i) / weight(j) * sign / (x[i] - x[j]);
            d[(i, j)] = value;
            row_sum += value;
        }
        // negative-sum trick: rows annihilate constants to round-off
        d[(i, i)] = -row_sum;
    }
    d
}

type MatrixCache = RwLock<HashMap<usize, Arc<Mat<f64>>>>;

fn reference_matrix(order: usize) -> Arc<Mat<f64>> {
    static CACHE: OnceLock<MatrixCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(found) = cache.read().expect("matrix cache poisoned").get(&order) {
        return Arc::clone(found);
    }
    let built = Arc::new(build_reference_matrix(order));
    let mut writer = cache.write().expect("matrix cache poisoned");
    Arc::clone(writer.entry(order).or_insert(built))
}

/// Chebyshev differentiation matrix of order `order` on `[lower, upper]`,
/// i.e. the reference `[-1, 1]` matrix times `2 / (upper - lower)`.
pub fn diff_matrix(order: usize, lower: f64, upper: f64) -> Result<DiffMatrix> {
    check_args(order, lower, upper)?;
    let reference = reference_matrix(order);
    let scale = 2.0 / (upper - lower);
    let n = order + 1;
    Ok(DiffMatrix {
        entries: Mat::from_fn(n, n, |i, j| reference[(i, j)] * scale),
        order,
        interval: (lower, upper),
    })
}

/// Grid and differentiation matrix for one direction of a neighborhood.
pub fn grid_and_matrix(order: usize, lower: f64, upper: f64) -> Result<(Grid1D, DiffMatrix)> {
    Ok((lobatto_points(order, lower, upper)?, diff_matrix(order, lower, upper)?))
}
