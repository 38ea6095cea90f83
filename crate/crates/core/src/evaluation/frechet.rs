//! Fréchet distance between Gaussians fitted to two embedding sets.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Added to both covariance diagonals before the matrix square root.
pub const SHRINKAGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FrechetReport {
    pub distance: f64,
    pub embedding: String,
    pub size_a: usize,
    pub size_b: usize,
}

fn moments(set: &[Vec<f64>], dim: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = set.len() as f64;
    let mut mean = DVector::zeros(dim);
    for v in set {
        mean += DVector::from_column_slice(v);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(dim, dim);
    for v in set {
        let d = DVector::from_column_slice(v) - &mean;
        cov += &d * d.transpose();
    }
    cov /= n - 1.0;
    for i in 0..dim {
        cov[(i, i)] += SHRINKAGE;
    }
    (mean, cov)
}

/// Square root of a symmetric positive semi-definite matrix, with negative
/// eigenvalues clamped to zero.
fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖μa − μb‖² + tr(Σa + Σb − 2 (Σa Σb)^½)`.
///
/// The trace of the product root is taken as `tr((Σa^½ Σb Σa^½)^½)`, whose
/// argument is symmetric.
pub fn frechet_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(format!(
            "Fréchet distance needs at least 2 vectors per set, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dim = a[0].len();
    if dim == 0 || a.iter().chain(b).any(|v| v.len() != dim) {
        return Err(Error::shape("frechet_distance", "embeddings differ in dimension"));
    }
    let (mu_a, cov_a) = moments(a, dim);
    let (mu_b, cov_b) = moments(b, dim);
    let root_a = sqrt_psd(&cov_a);
    let inner = &root_a * &cov_b * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = inner
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    let d = (mu_a - mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, dim: usize, shift: &[f64], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                (0..dim)
                    .map(|i| {
                        let z: f64 = StandardNormal.sample(rng);
                        z + shift.get(i).copied().unwrap_or(0.0)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn identical_sets_are_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(200, 6, &[], &mut rng);
        assert!(frechet_distance(&x, &x).unwrap() < 1e-6);
    }

    #[test]
    fn symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = gaussian(50, 5, &[], &mut rng);
        let b = gaussian(60, 5, &[0.5, 0.0, 1.0], &mut rng);
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-9, "{ab} vs {ba}");
    }

    #[test]
    fn rejects_tiny_or_ragged_sets() {
        let one = vec![vec![0.0, 1.0]];
        let two = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(frechet_distance(&one, &two).is_err());
        assert!(frechet_distance(&two, &[vec![0.0], vec![1.0]]).is_err());
    }
}
