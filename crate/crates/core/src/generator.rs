//! Dense discretization of the Koopman generator `f · ∇` on tensor-product
//! collocation grids.
//!
//! Grid values are vectorized column-major (first index fastest), so for
//! `d = 2` the operator is `diag(vec F1)(I ⊗ D1) + diag(vec F2)(D2 ⊗ I)` and
//! for `d = 3` the Kronecker factors extend the same way.

use faer::Mat;

use crate::collocation::{DiffMatrix, Grid1D};
use crate::error::{Error, Result};

/// Tensor-product collocation grid built from one [`Grid1D`] per dimension.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    axes: Vec<Grid1D>,
}

impl TensorGrid {
    pub fn new(axes: Vec<Grid1D>) -> Result<Self> {
        if !(1..=3).contains(&axes.len()) {
            return Err(Error::UnsupportedDimension(axes.len()));
        }
        let n = axes[0].len();
        if let Some(bad) = axes.iter().find(|g| g.len() != n) {
            return Err(Error::ShapeMismatch {
                context: "tensor grid axes",
                expected: n,
                found: bad.len(),
            });
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[Grid1D] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Nodes per axis, `N + 1`.
    pub fn nodes_per_axis(&self) -> usize {
        self.axes[0].len()
    }

    /// Total number of collocation points, `(N + 1)^d`.
    pub fn len(&self) -> usize {
        self.nodes_per_axis().pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis indices of a column-major linear index.
    pub fn multi_index(&self, mut linear: usize) -> [usize; 3] {
        let n = self.nodes_per_axis();
        let mut idx = [0; 3];
        for slot in idx.iter_mut().take(self.dim()) {
            *slot = linear % n;
            linear /= n;
        }
        idx
    }

    /// Coordinates of the point with the given linear index.
    pub fn point(&self, linear: usize, out: &mut [f64]) {
        let idx = self.multi_index(linear);
        for (k, axis) in self.axes.iter().enumerate() {
            out[k] = axis.points()[idx[k]];
        }
    }

    /// Linear index of the point sitting at the center of every axis.
    pub fn center_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// Identity observable sampled on the grid, `M × d`.
    pub fn coordinates(&self) -> Mat<f64> {
        let mut buf = [0.0; 3];
        let mut out = Mat::zeros(self.len(), self.dim());
        for p in 0..self.len() {
            self.point(p, &mut buf);
            for k in 0..self.dim() {
                out[(p, k)] = buf[k];
            }
        }
        out
    }
}

/// Values of each component of `f` at every collocation point, `M × d`,
/// rows in column-major grid order.
#[derive(Debug, Clone)]
pub struct FieldSamples {
    values: Mat<f64>,
}

impl FieldSamples {
    pub fn new(values: Mat<f64>) -> Result<Self> {
        if values.col_iter().flat_map(|c| c.iter().copied()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("field samples must be finite".into()));
        }
        Ok(Self { values })
    }

    /// Builds samples from per-component vectors.
    pub fn from_components(components: &[Vec<f64>]) -> Result<Self> {
        let rows = components.first().map_or(0, Vec::len);
        for c in components {
            if c.len() != rows {
                return Err(Error::ShapeMismatch {
                    context: "field sample components",
                    expected: rows,
                    found: c.len(),
                });
            }
        }
        Self::new(Mat::from_fn(rows, components.len(), |i, k| components[k][i]))
    }

    pub fn values(&self) -> &Mat<f64> {
        &self.values
    }

    pub fn points(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// Discretized generator `K`, an `(N+1)^d × (N+1)^d` dense matrix.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    entries: Mat<f64>,
    dim: usize,
    order: usize,
}

impl GeneratorMatrix {
    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let m = self.size();
        assert_eq!(v.len(), m);
        (0..m)
            .map(|i| (0..m).map(|j| self.entries[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.size())
            .map(|i| (0..self.size()).map(|j| self.entries[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `K = diag(f(ξ)) · D`.
pub fn build_generator_1d(fvals: &[f64], d: &DiffMatrix) -> Result<GeneratorMatrix> {
    let samples = FieldSamples::from_components(&[fvals.to_vec()])?;
    build_generator(&samples, &[d])
}

/// `K = diag(vec F1)(I ⊗ D1) + diag(vec F2)(D2 ⊗ I)`.
pub fn build_generator_2d(f: &FieldSamples, d1: &DiffMatrix, d2: &DiffMatrix) -> Result<GeneratorMatrix> {
    build_generator(f, &[d1, d2])
}

/// `K = diag(vec F1)(I ⊗ I ⊗ D1) + diag(vec F2)(I ⊗ D2 ⊗ I) + diag(vec F3)(D3 ⊗ I ⊗ I)`.
pub fn build_generator_3d(
    f: &FieldSamples,
    d1: &DiffMatrix,
    d2: &DiffMatrix,
    d3: &DiffMatrix,
) -> Result<GeneratorMatrix> {
    build_generator(f, &[d1, d2, d3])
}

/// Assembles `K` for any supported dimension, one differentiation matrix per
/// axis.
///
/// The Kronecker products are never formed: row `p` of the `k`-th term only
/// couples to points that share every grid index of `p` except the `k`-th.
pub fn build_generator(f: &FieldSamples, diffs: &[&DiffMatrix]) -> Result<GeneratorMatrix> {
    let dim = diffs.len();
    if !(1..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let n = diffs[0].size();
    if let Some(bad) = diffs.iter().find(|d| d.size() != n) {
        return Err(Error::ShapeMismatch {
            context: "differentiation matrix order",
            expected: n,
            found: bad.size(),
        });
    }
    let m = n.pow(dim as u32);
    if f.points() != m {
        return Err(Error::ShapeMismatch {
            context: "field sample rows",
            expected: m,
            found: f.points(),
        });
    }
    if f.dim() != dim {
        return Err(Error::ShapeMismatch {
            context: "field sample columns",
            expected: dim,
            found: f.dim(),
        });
    }

    let mut k = Mat::<f64>::zeros(m, m);
    for p in 0..m {
        let mut stride = 1;
        for (axis, d) in diffs.iter().enumerate() {
            let fp = f.values()[(p, axis)];
            let i = (p / stride) % n;
            let base = p - i * stride;
            if fp != 0.0 {
                for j in 0..n {
                    k[(p, base + j * stride)] += fp * d.entries()[(i, j)];
                }
            }
            stride *= n;
        }
    }
    Ok(GeneratorMatrix {
        entries: k,
        dim,
        order: n - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collocation::{diff_matrix, lobatto_points};
    use std::f64::consts::PI;

    #[test]
    fn zero_field_gives_zero_matrix() {
        let d = diff_matrix(4, 0.0, 1.0).unwrap();
        let k = build_generator_1d(&[0.0; 5], &d).unwrap();
        assert!(k.entries().col_iter().all(|c| c.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn unit_field_reproduces_diff_matrix() {
        let d = diff_matrix(6, -2.0, 1.0).unwrap();
        let k = build_generator_1d(&[1.0; 7], &d).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(k.entries()[(i, j)], d.entries()[(i, j)]);
            }
        }
    }

    #[test]
    fn cosine_field_rows_scale_diff_matrix() {
        let (lo, hi) = (PI / 4.0 - PI / 20.0, PI / 4.0 + PI / 20.0);
        let grid = lobatto_points(2, lo, hi).unwrap();
        let d = diff_matrix(2, lo, hi).unwrap();
        let f: Vec<f64> = grid.points().iter().map(|x| -0.5 * x.cos().powi(2)).collect();
        let k = build_generator_1d(&f, &d).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.entries()[(i, j)], f[i] * d.entries()[(i, j)]);
            }
        }
        assert!(k.apply(&[1.0; 3]).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let d = diff_matrix(4, 0.0, 1.0).unwrap();
        assert!(matches!(build_generator_1d(&[1.0; 4], &d), Err(Error::ShapeMismatch { .. })));
        let f = FieldSamples::from_components(&[vec![1.0; 25], vec![1.0; 25]]).unwrap();
        let d2 = diff_matrix(2, 0.0, 1.0).unwrap();
        assert!(build_generator_2d(&f, &d, &d2).is_err());
        let g = FieldSamples::from_components(&[vec![1.0; 24], vec![1.0; 24]]).unwrap();
        assert!(build_generator_2d(&g, &d, &d).is_err());
    }

    #[test]
    fn sizes_for_order_two() {
        let d = diff_matrix(2, -1.0, 1.0).unwrap();
        let f2 = FieldSamples::from_components(&[vec![1.0; 9], vec![0.5; 9]]).unwrap();
        assert_eq!(build_generator_2d(&f2, &d, &d).unwrap().size(), 9);
        let f3 = FieldSamples::from_components(&[vec![0.0; 27], vec![0.0; 27], vec![0.0; 27]]).unwrap();
        let k3 = build_generator_3d(&f3, &d, &d, &d).unwrap();
        assert_eq!(k3.size(), 27);
        assert!(k3.entries().col_iter().all(|c| c.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn center_index_is_center_of_every_axis() {
        for order in [2usize, 4, 6] {
            for dim in [2usize, 3] {
                let axes = vec![lobatto_points(order, 0.0, 1.0).unwrap(); dim];
                let grid = TensorGrid::new(axes).unwrap();
                let idx = grid.multi_index(grid.center_index());
                assert!(idx[..dim].iter().all(|&i| i == order / 2), "{order} {dim} {idx:?}");
                assert_eq!(grid.center_index(), ((order + 1).pow(dim as u32) - 1) / 2);
            }
        }
    }

    #[test]
    fn rejects_unsupported_dimension() {
        let d = diff_matrix(2, 0.0, 1.0).unwrap();
        let f = FieldSamples::from_components(&vec![vec![0.0; 81]; 4]).unwrap();
        assert!(matches!(build_generator(&f, &[&d, &d, &d, &d]), Err(Error::UnsupportedDimension(4))));
    }
}
