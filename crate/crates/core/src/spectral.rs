//! Eigendecomposition of the discretized generator, Koopman modes, and the
//! exponential-sum reconstruction of the observable.
//!
//! With eigenpairs `K V = V Λ` and modes `C` solving `V C = g(Ξ)`, the
//! observable at elapsed time `Δt` from the anchor is
//! `Σ_j C[j, :] ν_j exp(λ_j Δt)`, where `ν_j` is the entry of `v_j` at the
//! grid point that coincides with the anchor state.

use faer::linalg::evd::EvdError;
use faer::linalg::solvers::{DenseSolveCore, Eigen, Solve};
use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::generator::GeneratorMatrix;

/// Eigenpair residual bound, relative to `‖K‖∞`.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Bound on `‖V C − G‖∞ / ‖G‖∞`.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Relative bound on the discarded imaginary part of a reconstruction.
pub const REALNESS_TOL: f64 = 1e-8;
/// Condition estimate above which the eigenvector basis is rejected.
pub const MAX_CONDITION: f64 = 1e22;

/// Full eigendecomposition of a real matrix.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    values: Vec<c64>,
    vectors: Mat<c64>,
    residual: f64,
    pairing_defect: f64,
    pairs: Vec<(usize, usize)>,
}

impl EigenPairs {
    pub fn values(&self) -> &[c64] {
        &self.values
    }

    /// Eigenvectors as columns, each with unit 2-norm.
    pub fn vectors(&self) -> &Mat<c64> {
        &self.vectors
    }

    /// `max_j ‖K v_j − λ_j v_j‖∞ / ‖v_j‖∞`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Largest `|λ_k − conj(λ_j)|` over matched pairs before symmetrization.
    pub fn pairing_defect(&self) -> f64 {
        self.pairing_defect
    }

    /// Index pairs `(j, k)` with `Im λ_j > 0` and `λ_k = conj(λ_j)`.
    pub fn conjugate_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rescales eigenvector `j` by a nonzero complex factor. The conjugate
    /// partner, if any, is rescaled by `conj(factor)` so pairs stay exact.
    pub fn rescale_vector(&mut self, j: usize, factor: c64) {
        let partner = self
            .pairs
            .iter()
            .find_map(|&(a, b)| if a == j { Some(b) } else if b == j { Some(a) } else { None });
        for i in 0..self.vectors.nrows() {
            self.vectors[(i, j)] *= factor;
            if let Some(k) = partner {
                self.vectors[(i, k)] = self.vectors[(i, j)].conj();
            }
        }
    }
}

fn norm_inf_real(a: &Mat<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigendecomposition of the generator matrix.
pub fn eigendecompose(k: &GeneratorMatrix) -> Result<EigenPairs> {
    eigendecompose_dense(k.entries())
}

/// Eigendecomposition of an arbitrary dense real square matrix.
///
/// Non-real eigenvalues are matched greedily into conjugate pairs, and each
/// pair is then made exactly conjugate (values and vectors) so that
/// reconstructions of real observables are real to round-off. Eigenvectors
/// of real eigenvalues are rotated to be real.
pub fn eigendecompose_dense(a: &Mat<f64>) -> Result<EigenPairs> {
    let m = a.nrows();
    if a.ncols() != m {
        return Err(Error::ShapeMismatch {
            context: "eigendecomposition input (square)",
            expected: m,
            found: a.ncols(),
        });
    }
    if (0..m).any(|i| (0..m).any(|j| !a[(i, j)].is_finite())) {
        return Err(Error::InvalidConfig("matrix entries must be finite".into()));
    }
    let norm = norm_inf_real(a);
    let evd = Eigen::new_from_real(a.as_ref()).map_err(|e| match e {
        EvdError::NoConvergence => Error::DecompositionFailed {
            residual: f64::INFINITY,
        },
    })?;
    let mut values: Vec<c64> = evd.S().column_vector().iter().copied().collect();
    let mut vectors = evd.U().to_owned();

    for j in 0..m {
        let scale = (0..m).map(|i| vectors[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if scale > 0.0 {
            for i in 0..m {
                vectors[(i, j)] /= scale;
            }
        }
    }

    let real_cutoff = 64.0 * f64::EPSILON * norm.max(f64::MIN_POSITIVE);
    let is_real: Vec<bool> = values.iter().map(|v| v.im.abs() <= real_cutoff).collect();

    for j in (0..m).filter(|&j| is_real[j]) {
        values[j].im = 0.0;
        let pivot = (0..m)
            .max_by(|&x, &y| vectors[(x, j)].norm().total_cmp(&vectors[(y, j)].norm()))
            .unwrap_or(0);
        let p = vectors[(pivot, j)];
        if p.norm() > 0.0 {
            let phase = p.conj() / p.norm();
            for i in 0..m {
                let v = vectors[(i, j)] * phase;
                vectors[(i, j)] = c64::new(v.re, 0.0);
            }
        }
    }

    let mut pairs = Vec::new();
    let mut matched = vec![false; m];
    let mut pairing_defect: f64 = 0.0;
    for j in 0..m {
        if is_real[j] || values[j].im < 0.0 {
            continue;
        }
        let target = values[j].conj();
        let best = (0..m)
            .filter(|&k| !is_real[k] && !matched[k] && values[k].im < 0.0)
            .min_by(|&x, &y| (values[x] - target).norm().total_cmp(&(values[y] - target).norm()));
        match best {
            Some(k) => {
                matched[k] = true;
                pairing_defect = pairing_defect.max((values[k] - target).norm());
                values[k] = target;
                for i in 0..m {
                    vectors[(i, k)] = vectors[(i, j)].conj();
                }
                pairs.push((j, k));
            }
            None => pairing_defect = f64::INFINITY,
        }
    }
    if (0..m).any(|k| !is_real[k] && values[k].im < 0.0 && !matched[k]) {
        pairing_defect = f64::INFINITY;
    }

    let residual = eigen_residual(a, &values, &vectors);
    if !(residual <= RESIDUAL_TOL * norm) {
        return Err(Error::DecompositionFailed { residual });
    }
    Ok(EigenPairs {
        values,
        vectors,
        residual,
        pairing_defect,
        pairs,
    })
}

fn eigen_residual(a: &Mat<f64>, values: &[c64], vectors: &Mat<c64>) -> f64 {
    let m = a.nrows();
    let re = Mat::from_fn(m, m, |i, j| vectors[(i, j)].re);
    let im = Mat::from_fn(m, m, |i, j| vectors[(i, j)].im);
    let a_re = a * &re;
    let a_im = a * &im;
    (0..m)
        .map(|j| {
            let lam = values[j];
            let mut worst: f64 = 0.0;
            let mut size: f64 = 0.0;
            for i in 0..m {
                let av = c64::new(a_re[(i, j)], a_im[(i, j)]);
                worst = worst.max((av - lam * vectors[(i, j)]).norm());
                size = size.max(vectors[(i, j)].norm());
            }
            if size > 0.0 {
                worst / size
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Koopman modes: column `l` holds the expansion coefficients of observable
/// component `l`.
#[derive(Debug, Clone)]
pub struct KoopmanModes {
    coefficients: Mat<c64>,
    residual: f64,
    condition: f64,
}

impl KoopmanModes {
    pub fn coefficients(&self) -> &Mat<c64> {
        &self.coefficients
    }

    /// `‖V C − G‖∞` relative to `‖G‖∞`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// 1-norm condition estimate of the eigenvector basis.
    pub fn condition(&self) -> f64 {
        self.condition
    }
}

/// Solves `V C = G` with one pivoted factorization.
///
/// Because `V` is real-structured (real columns for real eigenvalues, exact
/// conjugate column pairs otherwise), the system is solved in the
/// equivalent real basis: `Re v_j` for a real `λ_j`, `[Re v_j, Im v_j]` for
/// a pair. Writing `G = b_j Re v_j + b_k Im v_j = c v_j + conj(c) conj(v_j)`
/// gives `c = (b_j − i b_k) / 2`, so paired rows of `C` come out exactly
/// conjugate.
pub fn compute_modes(eigen: &EigenPairs, observable: &Mat<f64>) -> Result<KoopmanModes> {
    let v = eigen.vectors();
    let m = v.nrows();
    if observable.nrows() != m {
        return Err(Error::ShapeMismatch {
            context: "observable samples rows",
            expected: m,
            found: observable.nrows(),
        });
    }
    let dim = observable.ncols();

    // partner[j] = Some((k, true)) when j leads a pair, Some((k, false)) when it trails
    let mut partner: Vec<Option<(usize, bool)>> = vec![None; m];
    for &(j, k) in eigen.conjugate_pairs() {
        partner[j] = Some((k, true));
        partner[k] = Some((j, false));
    }

    // unit phase of each real-eigenvalue column, so that v_j / phase is real
    let mut phase = vec![c64::new(1.0, 0.0); m];
    let mut basis = Mat::<f64>::zeros(m, m);
    for j in 0..m {
        match partner[j] {
            Some((k, true)) => {
                for i in 0..m {
                    basis[(i, j)] = v[(i, j)].re;
                    basis[(i, k)] = v[(i, j)].im;
                }
            }
            Some((_, false)) => {}
            None => {
                let pivot = (0..m)
                    .max_by(|&a, &b| v[(a, j)].norm().total_cmp(&v[(b, j)].norm()))
                    .unwrap_or(0);
                let p = v[(pivot, j)];
                if p.norm() > 0.0 {
                    phase[j] = p / p.norm();
                }
                for i in 0..m {
                    basis[(i, j)] = (v[(i, j)] / phase[j]).re;
                }
            }
        }
    }

    let lu = basis.partial_piv_lu();
    let condition = norm_one_real(&basis) * norm_one_real(&lu.inverse());
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditionedBasis { condition });
    }
    let mut real_coeffs = observable.to_owned();
    lu.solve_in_place(real_coeffs.as_mut());

    let recon = &basis * &real_coeffs;
    let g_norm = max_abs(observable);
    let err = (0..m)
        .flat_map(|i| (0..dim).map(move |l| (i, l)))
        .map(|(i, l)| (recon[(i, l)] - observable[(i, l)]).abs())
        .fold(0.0, f64::max);
    let residual = if g_norm > 0.0 { err / g_norm } else { err };
    if !(residual <= RECONSTRUCTION_TOL) {
        return Err(Error::IllConditionedBasis { condition });
    }

    let mut coefficients = Mat::<c64>::zeros(m, dim);
    for j in 0..m {
        match partner[j] {
            Some((k, true)) => {
                for l in 0..dim {
                    let c = c64::new(real_coeffs[(j, l)], -real_coeffs[(k, l)]) * 0.5;
                    coefficients[(j, l)] = c;
                    coefficients[(k, l)] = c.conj();
                }
            }
            Some((_, false)) => {}
            None => {
                for l in 0..dim {
                    coefficients[(j, l)] = c64::new(real_coeffs[(j, l)], 0.0) / phase[j];
                }
            }
        }
    }
    Ok(KoopmanModes {
        coefficients,
        residual,
        condition,
    })
}

fn norm_one_real(a: &Mat<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn max_abs(a: &Mat<f64>) -> f64 {
    (0..a.nrows())
        .flat_map(|i| (0..a.ncols()).map(move |j| a[(i, j)].abs()))
        .fold(0.0, f64::max)
}

/// Spectral data of one neighborhood, frozen until the next rebuild.
///
/// Only the anchor row of the eigenvector matrix is retained; the full
/// basis is discarded once the modes are known.
#[derive(Debug, Clone)]
pub struct SpectralSegment {
    eigenvalues: Vec<c64>,
    center_row: Vec<c64>,
    modes: KoopmanModes,
    weights: Vec<c64>,
    anchor_time: f64,
    anchor_state: Vec<f64>,
    residual: f64,
    pairing_defect: f64,
}

impl SpectralSegment {
    /// `center_index` is the linear grid index of the anchor state.
    pub fn new(
        eigen: &EigenPairs,
        modes: KoopmanModes,
        center_index: usize,
        anchor_time: f64,
        anchor_state: Vec<f64>,
    ) -> Result<Self> {
        let m = eigen.len();
        let dim = modes.coefficients().ncols();
        if center_index >= m || modes.coefficients().nrows() != m {
            return Err(Error::ShapeMismatch {
                context: "segment center index / modes",
                expected: m,
                found: center_index.max(modes.coefficients().nrows()),
            });
        }
        if anchor_state.len() != dim {
            return Err(Error::ShapeMismatch {
                context: "segment anchor state",
                expected: dim,
                found: anchor_state.len(),
            });
        }
        let center_row: Vec<c64> = (0..m).map(|j| eigen.vectors()[(center_index, j)]).collect();
        let mut weights = Vec::with_capacity(m * dim);
        for (j, nu) in center_row.iter().enumerate() {
            for l in 0..dim {
                weights.push(modes.coefficients()[(j, l)] * nu);
            }
        }
        Ok(Self {
            eigenvalues: eigen.values().to_vec(),
            center_row,
            modes,
            weights,
            anchor_time,
            anchor_state,
            residual: eigen.residual(),
            pairing_defect: eigen.pairing_defect(),
        })
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigenvalues
    }

    /// Anchor-row entries `ν_j` of the eigenvectors.
    pub fn center_row(&self) -> &[c64] {
        &self.center_row
    }

    pub fn modes(&self) -> &KoopmanModes {
        &self.modes
    }

    pub fn anchor_time(&self) -> f64 {
        self.anchor_time
    }

    pub fn anchor_state(&self) -> &[f64] {
        &self.anchor_state
    }

    pub fn dim(&self) -> usize {
        self.anchor_state.len()
    }

    pub fn eigen_residual(&self) -> f64 {
        self.residual
    }

    pub fn pairing_defect(&self) -> f64 {
        self.pairing_defect
    }

    /// Complex exponential sum before the imaginary part is discarded.
    pub fn reconstruct(&self, elapsed: f64) -> Result<Vec<c64>> {
        if !elapsed.is_finite() || elapsed < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "elapsed time must be finite and non-negative, got {elapsed}"
            )));
        }
        let dim = self.dim();
        let mut out = vec![c64::new(0.0, 0.0); dim];
        for (j, lam) in self.eigenvalues.iter().enumerate() {
            let growth = (lam * elapsed).exp();
            for (l, acc) in out.iter_mut().enumerate() {
                *acc += self.weights[j * dim + l] * growth;
            }
        }
        Ok(out)
    }

    /// State at `anchor_time + elapsed`.
    pub fn evaluate(&self, elapsed: f64) -> Result<Vec<f64>> {
        self.reconstruct(elapsed)?
            .into_iter()
            .enumerate()
            .map(|(component, z)| {
                if z.im.abs() <= REALNESS_TOL * (1.0 + z.re.abs()) || !z.re.is_finite() {
                    Ok(z.re)
                } else {
                    Err(Error::RealnessViolation {
                        component,
                        real: z.re,
                        imag: z.im,
                    })
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> Mat<f64> {
        Mat::from_fn(values.len(), values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    #[test]
    fn diagonal_matrix_has_unit_eigenvectors() {
        let eig = eigendecompose_dense(&diag(&[1.0, 2.0, 3.0])).unwrap();
        let mut vals: Vec<f64> = eig.values().iter().map(|v| v.re).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        for (j, lam) in eig.values().iter().enumerate() {
            let idx = lam.re as usize - 1;
            for i in 0..3 {
                let expected = if i == idx { 1.0 } else { 0.0 };
                assert!((eig.vectors()[(i, j)].norm() - expected).abs() < 1e-14);
            }
        }
        assert!(eig.conjugate_pairs().is_empty());
    }

    #[test]
    fn rotation_generator_has_conjugate_pair() {
        let mut k = Mat::<f64>::zeros(2, 2);
        k[(0, 1)] = 1.0;
        k[(1, 0)] = -1.0;
        let eig = eigendecompose_dense(&k).unwrap();
        let (j, l) = eig.conjugate_pairs()[0];
        assert!((eig.values()[j] - c64::new(0.0, 1.0)).norm() < 1e-14);
        assert_eq!(eig.values()[l], eig.values()[j].conj());
        for i in 0..2 {
            assert_eq!(eig.vectors()[(i, l)], eig.vectors()[(i, j)].conj());
        }
        assert!(eig.residual() < 1e-14);
    }

    #[test]
    fn zero_matrix_decomposes() {
        let eig = eigendecompose_dense(&Mat::zeros(4, 4)).unwrap();
        assert!(eig.values().iter().all(|v| v.norm() == 0.0));
        assert_eq!(eig.residual(), 0.0);
    }

    #[test]
    fn rejects_non_square_and_non_finite() {
        assert!(matches!(eigendecompose_dense(&Mat::zeros(2, 3)), Err(Error::ShapeMismatch { .. })));
        let mut a = Mat::<f64>::zeros(2, 2);
        a[(0, 0)] = f64::NAN;
        assert!(eigendecompose_dense(&a).is_err());
    }

    #[test]
    fn identity_basis_gives_observable_as_modes() {
        let eig = eigendecompose_dense(&diag(&[-1.0, -2.0, -3.0])).unwrap();
        let g = Mat::from_fn(3, 2, |i, l| (i + 10 * l) as f64 + 0.5);
        let modes = compute_modes(&eig, &g).unwrap();
        // V is a permutation of the identity here
        for (j, lam) in eig.values().iter().enumerate() {
            let row = (-lam.re) as usize - 1;
            for l in 0..2 {
                assert!((modes.coefficients()[(j, l)] - c64::new(g[(row, l)], 0.0)).norm() < 1e-14);
            }
        }
        assert!(modes.residual() < 1e-15);
    }

    #[test]
    fn singular_basis_is_rejected() {
        // Jordan block: a single eigenvector, so V is numerically singular
        let mut a = Mat::<f64>::zeros(3, 3);
        a[(0, 1)] = 1.0;
        a[(1, 2)] = 1.0;
        let eig = eigendecompose_dense(&a).unwrap();
        let g = Mat::from_fn(3, 1, |i, _| i as f64);
        assert!(matches!(compute_modes(&eig, &g), Err(Error::IllConditionedBasis { .. })));
    }

    #[test]
    fn evaluate_rejects_negative_elapsed() {
        let eig = eigendecompose_dense(&diag(&[0.0])).unwrap();
        let modes = compute_modes(&eig, &Mat::from_fn(1, 1, |_, _| 2.0)).unwrap();
        let seg = SpectralSegment::new(&eig, modes, 0, 0.0, vec![2.0]).unwrap();
        assert!(seg.evaluate(-1.0).is_err());
        assert!(seg.evaluate(f64::NAN).is_err());
        assert_eq!(seg.evaluate(3.0).unwrap(), vec![2.0]);
    }
}
