//! Geometry of compact matrix submanifolds embedded in `ℝ^{d×r}` with the
//! Euclidean (Frobenius) metric.
//!
//! Two kinds are supported:
//!
//! * **Stiefel** `St(d, r) = {x : xᵀx = I_r}`. The nearest-point projection is
//!   the polar factor `U·Vᵀ` of the thin SVD `y = UΣVᵀ`, the tangent projection
//!   is `u − x·sym(xᵀu)`, and the set is 1-proximally smooth, so projections
//!   are unique for `dist(y, St) < 1`.
//! * **Euclidean** `ℝ^{d×r}` itself. Every projection is the identity; this
//!   turns the Riemannian solvers into their classical Euclidean counterparts.
//!
//! The Grassmann manifold used by matrix completion is handled through its
//! Stiefel total space.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Smallest singular value below which the polar factor is treated as not
/// unique.
pub const SINGULAR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    Stiefel,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ManifoldSpec {
    kind: ManifoldKind,
    rows: usize,
    cols: usize,
}

impl ManifoldSpec {
    pub fn new(kind: ManifoldKind, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "manifold dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if kind == ManifoldKind::Stiefel && cols > rows {
            return Err(Error::InvalidArgument(format!(
                "Stiefel manifold needs r <= d, got d={rows}, r={cols}"
            )));
        }
        Ok(Self { kind, rows, cols })
    }

    pub fn stiefel(d: usize, r: usize) -> Result<Self> {
        Self::new(ManifoldKind::Stiefel, d, r)
    }

    pub fn euclidean(d: usize, r: usize) -> Result<Self> {
        Self::new(ManifoldKind::Euclidean, d, r)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Same ambient shape, Euclidean geometry.
    pub fn flattened(&self) -> Self {
        Self {
            kind: ManifoldKind::Euclidean,
            ..*self
        }
    }

    /// Proximal-smoothness radius `R`.
    pub fn proximal_radius(&self) -> f64 {
        match self.kind {
            ManifoldKind::Stiefel => 1.0,
            ManifoldKind::Euclidean => f64::INFINITY,
        }
    }

    /// Lipschitz constant of `x ↦ P_{T_x}` over the convex hull.
    pub fn tangent_projection_lipschitz(&self) -> f64 {
        match self.kind {
            ManifoldKind::Stiefel => 2.0,
            ManifoldKind::Euclidean => 0.0,
        }
    }

    /// Curvature constant bounding `‖x̄ − x̂‖` by the squared consensus error.
    pub fn mean_curvature_constant(&self) -> f64 {
        match self.kind {
            ManifoldKind::Stiefel => 2.0 * (self.cols as f64).sqrt(),
            ManifoldKind::Euclidean => 0.0,
        }
    }

    fn check(&self, m: &Mat) -> Result<()> {
        Error::check_shape(self.shape(), m.shape())
    }

    /// Nearest-point projection onto the manifold.
    pub fn project(&self, y: &Mat) -> Result<Mat> {
        self.check(y)?;
        match self.kind {
            ManifoldKind::Euclidean => Ok(y.clone()),
            ManifoldKind::Stiefel => {
                linalg::require_finite(y, "projection input")?;
                let (p, sigma_min) = linalg::polar_factor(y);
                if sigma_min <= SINGULAR_FLOOR {
                    return Err(Error::SingularProjection { sigma_min });
                }
                Ok(p)
            }
        }
    }

    /// Orthogonal projection of `u` onto the tangent space at `base`.
    pub fn project_tangent(&self, base: &Mat, u: &Mat) -> Result<Mat> {
        self.check(base)?;
        self.check(u)?;
        Ok(match self.kind {
            ManifoldKind::Euclidean => u.clone(),
            ManifoldKind::Stiefel => u - base * linalg::sym(&(base.transpose() * u)),
        })
    }

    /// Riemannian gradient under the embedded metric.
    pub fn riemannian_gradient(&self, base: &Mat, euclidean_grad: &Mat) -> Result<Mat> {
        self.project_tangent(base, euclidean_grad)
    }

    /// `‖xᵀx − I‖_F` for Stiefel, 0 for Euclidean.
    pub fn feasibility_residual(&self, x: &Mat) -> f64 {
        match self.kind {
            ManifoldKind::Euclidean => 0.0,
            ManifoldKind::Stiefel => (x.transpose() * x - linalg::identity(self.cols)).norm(),
        }
    }

    /// Distance from `y` to the manifold.
    pub fn distance(&self, y: &Mat) -> Result<f64> {
        self.check(y)?;
        Ok(match self.kind {
            ManifoldKind::Euclidean => 0.0,
            ManifoldKind::Stiefel => y
                .clone()
                .singular_values()
                .iter()
                .map(|s| (s - 1.0).powi(2))
                .sum::<f64>()
                .sqrt(),
        })
    }

    /// A random point: projection of a Gaussian matrix (Haar-distributed on
    /// Stiefel).
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Mat {
        let g = linalg::gaussian(self.rows, self.cols, rng);
        match self.kind {
            ManifoldKind::Euclidean => g,
            ManifoldKind::Stiefel => linalg::polar_factor(&g).0,
        }
    }

    /// Empirical second-order projection ratio
    /// `‖P(x + u) − x − P_{T_x}(u)‖ / ‖u‖²`, defined as 0 for `u = 0`.
    pub fn quadratic_projection_ratio(&self, base: &Mat, u: &Mat) -> Result<f64> {
        self.check(base)?;
        self.check(u)?;
        let norm = u.norm();
        let radius = self.proximal_radius() / 2.0;
        if norm > radius {
            return Err(Error::TubeViolation { norm, radius });
        }
        if norm == 0.0 || self.kind == ManifoldKind::Euclidean {
            return Ok(0.0);
        }
        let moved = self.project(&(base + u))?;
        let residual = moved - base - self.project_tangent(base, u)?;
        Ok(residual.norm() / (norm * norm))
    }

    /// Empirical Lipschitz ratio `‖P(x) − P(y)‖ / ‖x − y‖` for two points in
    /// the closed `tau`-tube. Coincident points return 1.
    pub fn lipschitz_projection_ratio(&self, x: &Mat, y: &Mat, tau: f64) -> Result<f64> {
        let radius = self.proximal_radius();
        if !(tau > 0.0 && tau < radius) {
            return Err(Error::InvalidArgument(format!(
                "tube radius {tau} must lie in (0, {radius})"
            )));
        }
        for p in [x, y] {
            let dist = self.distance(p)?;
            if dist > tau {
                return Err(Error::TubeViolation {
                    norm: dist,
                    radius: tau,
                });
            }
        }
        let gap = (x - y).norm();
        if gap == 0.0 {
            return Ok(1.0);
        }
        Ok((self.project(x)? - self.project(y)?).norm() / gap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian, stream_rng};
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn st(d: usize, r: usize) -> ManifoldSpec {
        ManifoldSpec::stiefel(d, r).unwrap()
    }

    #[test]
    fn rejects_wide_stiefel() {
        assert!(ManifoldSpec::stiefel(2, 3).is_err());
        assert!(ManifoldSpec::euclidean(2, 3).is_ok());
        assert!(ManifoldSpec::stiefel(0, 0).is_err());
    }

    #[test]
    fn identity_is_fixed() {
        let i2 = Mat::identity(2, 2);
        assert_abs_diff_eq!(st(2, 2).project(&i2).unwrap(), i2, epsilon = 1e-15);
    }

    #[test]
    fn positive_scaling_keeps_polar_factor() {
        let m = st(7, 3);
        let x = m.random_point(&mut stream_rng(1, 0));
        assert!((m.project(&(&x * 3.0)).unwrap() - &x).norm() < 1e-14);
    }

    #[test]
    fn sphere_projection_normalizes() {
        let p = st(2, 1).project(&dmatrix![3.0; 4.0]).unwrap();
        assert_abs_diff_eq!(p, dmatrix![0.6; 0.8], epsilon = 1e-15);
    }

    #[test]
    fn singular_input_is_an_error() {
        let y = dmatrix![1.0, 1.0; 1.0, 1.0; 0.0, 0.0];
        assert!(matches!(
            st(3, 2).project(&y),
            Err(Error::SingularProjection { .. })
        ));
        assert!(matches!(
            st(3, 2).project(&Mat::zeros(3, 2)),
            Err(Error::SingularProjection { .. })
        ));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let m = st(3, 2);
        let x = m.random_point(&mut stream_rng(0, 0));
        assert!(matches!(
            m.project_tangent(&x, &Mat::zeros(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tangent_projection_examples() {
        let m = st(6, 3);
        let x = m.random_point(&mut stream_rng(2, 0));
        assert!(m.project_tangent(&x, &x).unwrap().norm() < 1e-14);

        let e1 = dmatrix![1.0; 0.0];
        let t = st(2, 1).project_tangent(&e1, &dmatrix![1.0; 1.0]).unwrap();
        assert_abs_diff_eq!(t, dmatrix![0.0; 1.0], epsilon = 1e-15);
    }

    #[test]
    fn riemannian_gradient_examples() {
        let e1 = dmatrix![1.0; 0.0];
        let g = st(2, 1).riemannian_gradient(&e1, &(-&e1)).unwrap();
        assert!(g.norm() < 1e-15);

        let eu = ManifoldSpec::euclidean(3, 2).unwrap();
        let mut rng = stream_rng(5, 0);
        let b = gaussian(3, 2, &mut rng);
        let g = gaussian(3, 2, &mut rng);
        assert_eq!(eu.riemannian_gradient(&b, &g).unwrap(), g);

        let m = st(5, 2);
        let x = m.random_point(&mut rng);
        let s = linalg::sym(&gaussian(2, 2, &mut rng));
        assert!(m.riemannian_gradient(&x, &(&x * s)).unwrap().norm() < 1e-14);
    }

    #[test]
    fn quadratic_ratio_conventions() {
        let m = st(4, 2);
        let x = m.random_point(&mut stream_rng(9, 0));
        assert_eq!(
            m.quadratic_projection_ratio(&x, &Mat::zeros(4, 2)).unwrap(),
            0.0
        );
        let eu = m.flattened();
        let u = Mat::from_element(4, 2, 0.1);
        assert_eq!(eu.quadratic_projection_ratio(&x, &u).unwrap(), 0.0);
        let big = Mat::from_element(4, 2, 1.0);
        assert!(matches!(
            m.quadratic_projection_ratio(&x, &big),
            Err(Error::TubeViolation { .. })
        ));
    }

    #[test]
    fn lipschitz_ratio_conventions() {
        let m = st(4, 2);
        let mut rng = stream_rng(10, 0);
        let x = m.random_point(&mut rng);
        assert_eq!(m.lipschitz_projection_ratio(&x, &x, 0.25).unwrap(), 1.0);
        let y = m.random_point(&mut rng);
        let ratio = m.lipschitz_projection_ratio(&x, &y, 1e-6).unwrap();
        assert_abs_diff_eq!(ratio, 1.0, epsilon = 1e-12);
        assert!(matches!(
            m.lipschitz_projection_ratio(&(&x * 2.0), &y, 0.25),
            Err(Error::TubeViolation { .. })
        ));
        assert!(m.lipschitz_projection_ratio(&x, &y, 1.5).is_err());
    }

    #[test]
    fn distance_of_scaled_point() {
        let m = st(5, 3);
        let x = m.random_point(&mut stream_rng(11, 0));
        assert_abs_diff_eq!(
            m.distance(&(&x * 1.2)).unwrap(),
            0.2 * 3f64.sqrt(),
            epsilon = 1e-13
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projection_idempotent_and_feasible(seed in any::<u64>(), d in 1usize..9, r_frac in 0.0f64..1.0) {
            let r = 1 + ((d - 1) as f64 * r_frac) as usize;
            let m = st(d, r);
            let y = gaussian(d, r, &mut stream_rng(seed, 0));
            if let Ok(p) = m.project(&y) {
                prop_assert!(m.feasibility_residual(&p) <= 1e-12);
                let pp = m.project(&p).unwrap();
                prop_assert!((pp - &p).amax() <= 1e-12);
            }
        }

        #[test]
        fn tangent_projection_is_orthogonal_split(seed in any::<u64>()) {
            let m = st(7, 3);
            let mut rng = stream_rng(seed, 0);
            let x = m.random_point(&mut rng);
            let u = gaussian(7, 3, &mut rng);
            let v = gaussian(7, 3, &mut rng);
            let pu = m.project_tangent(&x, &u).unwrap();
            let pv = m.project_tangent(&x, &v).unwrap();
            // idempotent
            prop_assert!((m.project_tangent(&x, &pu).unwrap() - &pu).amax() <= 1e-12);
            // self-adjoint
            prop_assert!((linalg::inner(&pu, &v) - linalg::inner(&u, &pv)).abs() <= 1e-10);
            // orthogonal split
            let normal = &u - &pu;
            prop_assert!(linalg::inner(&pu, &normal).abs() <= 1e-10);
            // tangent condition
            prop_assert!(linalg::sym(&(x.transpose() * &pu)).norm() <= 1e-12);
        }
    }
}
