//! Small dense linear-algebra helpers shared by the geometry, problem and
//! diagnostics modules.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Symmetric part `(A + Aᵀ)/2` of a square matrix.
pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Frobenius inner product `tr(AᵀB)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Thin SVD pieces `(U, σ, Vᵀ)` of an `m × k` matrix, with singular values
/// sorted in decreasing order.
pub struct ThinSvd {
    pub u: Mat,
    pub singular_values: Vec<f64>,
    pub v_t: Mat,
}

pub fn thin_svd(a: &Mat) -> ThinSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd computed with U");
    let v_t = svd.v_t.expect("svd computed with Vᵀ");
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    if order.iter().enumerate().all(|(pos, &i)| pos == i) {
        return ThinSvd {
            u,
            singular_values: s,
            v_t,
        };
    }
    let u = Mat::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_t = Mat::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]);
    let singular_values = order.iter().map(|&i| s[i]).collect();
    ThinSvd {
        u,
        singular_values,
        v_t,
    }
}

/// Orthogonal polar factor `U·Vᵀ` of a tall matrix, together with its
/// smallest singular value.
pub fn polar_factor(y: &Mat) -> (Mat, f64) {
    let svd = y.clone().svd(true, true);
    let sigma_min = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let u = svd.u.expect("svd computed with U");
    let v_t = svd.v_t.expect("svd computed with Vᵀ");
    (u * v_t, sigma_min)
}

/// Eigenvalues of a symmetric matrix, sorted in decreasing order.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    let mut ev: Vec<f64> = a
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Leading `k` eigenvectors (as columns) of a symmetric matrix.
pub fn top_eigenvectors(a: &Mat, k: usize) -> Mat {
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    Mat::from_fn(a.nrows(), k, |r, c| eig.eigenvectors[(r, order[c])])
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &Mat) -> f64 {
    a.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// Deterministic generator for a named stream under a user seed, so data,
/// topology and initialization draws never share randomness.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn require_finite(a: &Mat, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} contains non-finite entries"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_svd_sorted_and_reconstructs() {
        let mut rng = stream_rng(3, 0);
        let a = gaussian(12, 4, &mut rng);
        let svd = thin_svd(&a);
        assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let s = Mat::from_diagonal(&nalgebra::DVector::from_vec(svd.singular_values.clone()));
        let rebuilt = &svd.u * s * &svd.v_t;
        assert!((rebuilt - a).norm() < 1e-12);
    }

    #[test]
    fn polar_factor_of_scaled_orthonormal() {
        let mut rng = stream_rng(4, 0);
        let (q, _) = polar_factor(&gaussian(6, 3, &mut rng));
        let (p, smin) = polar_factor(&(&q * 3.0));
        assert!((p - &q).norm() < 1e-13);
        assert!((smin - 3.0).abs() < 1e-12);
    }

    #[test]
    fn streams_are_independent() {
        let a: f64 = stream_rng(7, 1).random();
        let b: f64 = stream_rng(7, 2).random();
        let c: f64 = stream_rng(7, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
