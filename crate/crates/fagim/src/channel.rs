//! Spatially correlated Rayleigh channel model.
//!
//! The transmit-side correlation between two ports is the 3D rich-scattering
//! kernel `J_{i,j} = sinc(k‖t_i − t_j‖)` with `k = 2π/λ`. The resulting `N×N`
//! matrix `J_t` is eigendecomposed once, `J_t = U_t Λ_t U_tᵀ`, and channel
//! realizations are drawn as `H = G √Λ_t U_tᵀ` with `G` holding i.i.d. CN(0,1)
//! entries. Receive-side correlation is not modeled (identity).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::GroupingPlan;

/// Relative tolerance for the eigendecomposition reconstruction check.
const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Correlation coefficient `sinc(k‖t_i − t_j‖)` between two port positions.
///
/// Returns exactly 1 for coincident ports; the sinc kernel otherwise, whose
/// range is about `[−0.217, 1]`.
pub fn correlation_coefficient(t_i: (f64, f64), t_j: (f64, f64), wavelength: f64) -> f64 {
    let dx = t_i.0 - t_j.0;
    let dy = t_i.1 - t_j.1;
    let dist = (dx * dx + dy * dy).sqrt();
    if dist == 0.0 {
        return 1.0;
    }
    let z = 2.0 * std::f64::consts::PI / wavelength * dist;
    z.sin() / z
}

/// Transmit-side spatial correlation matrix with its cached eigendecomposition
/// and the coloring factor `√Λ_t U_tᵀ` used for sampling.
///
/// Immutable after construction; shareable across worker threads.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    j_t: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    coloring: DMatrix<Complex64>,
}

impl CorrelationMatrix {
    /// Builds `J_t` from the port coordinates of a grouping plan.
    pub fn build(plan: &GroupingPlan) -> Result<Self> {
        let n = plan.num_ports();
        let coords = plan.coordinates();
        let lambda = plan.geometry().wavelength();
        let mut j_t = DMatrix::identity(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let c = correlation_coefficient(coords[i], coords[j], lambda);
                j_t[(i, j)] = c;
                j_t[(j, i)] = c;
            }
        }
        Self::from_matrix(j_t)
    }

    /// Wraps an explicit symmetric correlation matrix (unit diagonal) and
    /// computes its eigendecomposition.
    pub fn from_matrix(j_t: DMatrix<f64>) -> Result<Self> {
        let n = j_t.nrows();
        if n == 0 || j_t.ncols() != n {
            return Err(Error::config("correlation matrix must be square and nonempty"));
        }
        for i in 0..n {
            if (j_t[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::config("correlation matrix diagonal must be 1"));
            }
            for j in 0..i {
                if j_t[(i, j)] != j_t[(j, i)] {
                    return Err(Error::config("correlation matrix must be symmetric"));
                }
            }
        }

        let eig = nalgebra::linalg::SymmetricEigen::try_new(j_t.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::numerical("eigendecomposition did not converge"))?;

        // Reconstruction check before any clamping.
        let recon = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues)
            * eig.eigenvectors.transpose();
        let err = (&recon - &j_t).norm() / j_t.norm();
        if err > RECONSTRUCTION_TOL {
            return Err(Error::numerical(format!(
                "eigendecomposition reconstruction error {err:.3e} exceeds {RECONSTRUCTION_TOL:.0e}"
            )));
        }

        // Order eigenpairs by decreasing eigenvalue, then clamp the tiny
        // negative values the sinc kernel can produce in floating point.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite eigenvalues")
        });
        let clamp_floor = -1e-10 * n as f64;
        let mut eigenvalues = DVector::zeros(n);
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (k, &src) in order.iter().enumerate() {
            let lam = eig.eigenvalues[src];
            if lam < clamp_floor {
                return Err(Error::numerical(format!(
                    "correlation matrix eigenvalue {lam:.3e} below PSD clamp floor {clamp_floor:.3e}"
                )));
            }
            eigenvalues[k] = lam.max(0.0);
            eigenvectors.set_column(k, &eig.eigenvectors.column(src));
        }

        // Coloring factor √Λ·Uᵀ, cached as complex for H = G·coloring.
        let mut coloring = DMatrix::zeros(n, n);
        for r in 0..n {
            let s = eigenvalues[r].sqrt();
            for c in 0..n {
                coloring[(r, c)] = Complex64::new(s * eigenvectors[(c, r)], 0.0);
            }
        }

        Ok(Self { j_t, eigenvalues, eigenvectors, coloring })
    }

    /// Identity correlation (uncorrelated ports), mainly for baselines and
    /// tests.
    pub fn identity(n: usize) -> Self {
        Self::from_matrix(DMatrix::identity(n, n)).expect("identity is a valid correlation matrix")
    }

    pub fn dim(&self) -> usize {
        self.j_t.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.j_t
    }

    /// Clamped eigenvalues, ordered decreasing.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, columns aligned with [`eigenvalues`](Self::eigenvalues).
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Real quadratic form `ψᴴ J_t ψ` (nonnegative for any ψ since `J_t` is
    /// positive semidefinite).
    pub fn quadratic_form(&self, psi: &DVector<Complex64>) -> f64 {
        let n = self.dim();
        debug_assert_eq!(psi.len(), n);
        let mut acc = 0.0;
        for a in 0..n {
            let pa = psi[a];
            if pa == Complex64::ZERO {
                continue;
            }
            for b in 0..n {
                let pb = psi[b];
                if pb == Complex64::ZERO {
                    continue;
                }
                acc += self.j_t[(a, b)] * (pa.conj() * pb).re;
            }
        }
        acc
    }
}

/// Draws one channel realization `H = G √Λ_t U_tᵀ` of size `n_r × N`.
///
/// The pre-coloring matrix `G` has i.i.d. CN(0,1) entries (real and imaginary
/// parts N(0, 1/2) each), drawn column by column so a fixed RNG stream yields
/// a bit-identical realization.
pub fn sample_channel(
    corr: &CorrelationMatrix,
    n_r: usize,
    rng: &mut impl Rng,
) -> DMatrix<Complex64> {
    let n = corr.dim();
    let mut g = DMatrix::zeros(n_r, n);
    for c in 0..n {
        for r in 0..n_r {
            g[(r, c)] = complex_gaussian(rng);
        }
    }
    g * &corr.coloring
}

/// One CN(0,1) draw: real and imaginary parts each N(0, 1/2).
pub fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FluidAntennaGeometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plan_1d_4ports_tenth_lambda() -> GroupingPlan {
        // D1 = 0.1λ: W1 = 0.3 over N1 = 4
        let geom = FluidAntennaGeometry::new(1.0, 0.3, 0.0, 4, 1).unwrap();
        GroupingPlan::new(geom, 2, 1).unwrap()
    }

    #[test]
    fn sinc_values() {
        assert_eq!(correlation_coefficient((0.0, 0.0), (0.0, 0.0), 1.0), 1.0);
        // d = λ/2 -> sinc(π) = 0 up to the floating-point sin(π)
        let half = correlation_coefficient((0.0, 0.0), (0.5, 0.0), 1.0);
        assert!(half.abs() < 1e-15, "sinc(π) = {half}");
        // d = λ/4 -> sin(π/2)/(π/2) = 2/π
        let quarter = correlation_coefficient((0.0, 0.0), (0.0, 0.25), 1.0);
        assert!((quarter - 2.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!((quarter - 0.636_619_772_367_581_4).abs() < 1e-12);
    }

    #[test]
    fn sinc_is_symmetric() {
        let a = (0.13, 2.7);
        let b = (1.9, 0.41);
        assert_eq!(correlation_coefficient(a, b, 0.7), correlation_coefficient(b, a, 0.7));
    }

    #[test]
    fn build_matches_closed_form() {
        let plan = plan_1d_4ports_tenth_lambda();
        let corr = CorrelationMatrix::build(&plan).unwrap();
        // J[1][2] = sinc(0.2π)
        let expected = 0.935_489_283_788_639;
        assert!((corr.matrix()[(0, 1)] - expected).abs() < 1e-12);
        assert_eq!(corr.matrix()[(0, 1)], corr.matrix()[(1, 0)]);
        for i in 0..4 {
            assert_eq!(corr.matrix()[(i, i)], 1.0);
        }
    }

    #[test]
    fn single_port_matrix() {
        let geom = FluidAntennaGeometry::new(1.0, 0.0, 0.0, 1, 1).unwrap();
        let plan = GroupingPlan::new(geom, 1, 1).unwrap();
        let corr = CorrelationMatrix::build(&plan).unwrap();
        assert_eq!(corr.matrix()[(0, 0)], 1.0);
        assert_eq!(corr.eigenvalues()[0], 1.0);
    }

    #[test]
    fn half_wavelength_ports_are_uncorrelated() {
        let geom = FluidAntennaGeometry::new(1.0, 0.5, 0.0, 2, 1).unwrap();
        let plan = GroupingPlan::new(geom, 2, 1).unwrap();
        let corr = CorrelationMatrix::build(&plan).unwrap();
        assert!(corr.matrix()[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_sum_to_trace() {
        let plan = plan_1d_4ports_tenth_lambda();
        let corr = CorrelationMatrix::build(&plan).unwrap();
        let sum: f64 = corr.eigenvalues().iter().sum();
        assert!((sum - 4.0).abs() / 4.0 < 1e-8);
        assert!(corr.eigenvalues().iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn eigendecomposition_reconstructs() {
        let geom = FluidAntennaGeometry::new(1.0, 1.6, 1.6, 4, 4).unwrap();
        let plan = GroupingPlan::new(geom, 2, 2).unwrap();
        let corr = CorrelationMatrix::build(&plan).unwrap();
        let recon = corr.eigenvectors()
            * DMatrix::from_diagonal(corr.eigenvalues())
            * corr.eigenvectors().transpose();
        let err = (&recon - corr.matrix()).norm() / corr.matrix().norm();
        assert!(err < 1e-8, "reconstruction error {err}");
    }

    #[test]
    fn from_matrix_rejects_asymmetric() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 0.5;
        assert!(CorrelationMatrix::from_matrix(m).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let plan = plan_1d_4ports_tenth_lambda();
        let corr = CorrelationMatrix::build(&plan).unwrap();
        let h1 = sample_channel(&corr, 3, &mut ChaCha8Rng::seed_from_u64(7));
        let h2 = sample_channel(&corr, 3, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(h1, h2);
        let h3 = sample_channel(&corr, 3, &mut ChaCha8Rng::seed_from_u64(8));
        assert_ne!(h1, h3);
    }

    #[test]
    fn identity_correlation_gives_iid_entries() {
        let corr = CorrelationMatrix::identity(4);
        let rows = 20_000;
        let h = sample_channel(&corr, rows, &mut ChaCha8Rng::seed_from_u64(11));
        let cov = h.adjoint() * &h / Complex64::new(rows as f64, 0.0);
        let tol = 3.0 / (rows as f64).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov[(i, j)].re - expected).abs() < tol && cov[(i, j)].im.abs() < tol,
                    "cov[{i}][{j}] = {}",
                    cov[(i, j)]
                );
            }
        }
    }

    #[test]
    fn correlated_rows_match_j_t() {
        let plan = plan_1d_4ports_tenth_lambda();
        let corr = CorrelationMatrix::build(&plan).unwrap();
        let rows = 30_000;
        let h = sample_channel(&corr, rows, &mut ChaCha8Rng::seed_from_u64(21));
        let cov = h.adjoint() * &h / Complex64::new(rows as f64, 0.0);
        let tol = 3.0 / (rows as f64).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (cov[(i, j)].re - corr.matrix()[(i, j)]).abs() < tol,
                    "cov[{i}][{j}] = {} vs J = {}",
                    cov[(i, j)].re,
                    corr.matrix()[(i, j)]
                );
            }
        }
    }

    #[test]
    fn quadratic_form_matches_dense_product() {
        let plan = plan_1d_4ports_tenth_lambda();
        let corr = CorrelationMatrix::build(&plan).unwrap();
        let psi = DVector::from_vec(vec![
            Complex64::new(1.0, -0.5),
            Complex64::ZERO,
            Complex64::new(-0.25, 0.75),
            Complex64::new(0.0, 1.0),
        ]);
        let jc = corr.matrix().map(|v| Complex64::new(v, 0.0));
        let dense = (psi.adjoint() * &jc * &psi)[(0, 0)];
        let q = corr.quadratic_form(&psi);
        assert!((q - dense.re).abs() < 1e-12);
        assert!(dense.im.abs() < 1e-12);
        assert!(q >= 0.0);
    }
}
