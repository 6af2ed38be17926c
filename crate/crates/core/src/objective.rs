//! Objectives minimized by the descent framework.
//!
//! `SmoothQuadratic` is `f(x) = ½‖b − Ax‖²` and `L0LeastSquares` adds
//! `λ‖x‖₀`. Both report `dist(0, ∂Φ(x))` in closed form: for the smooth loss
//! it is `‖∇f(x)‖`, for the ℓ0 problem the subdifferential of `‖·‖₀` is the
//! whole real line on zero coordinates, so only the gradient restricted to
//! the support survives.

use crate::error::{invalid, Error, Result};
use crate::linalg::{spectral_norm_sq, DenseMatrix, Vector, POWER_MAX_ITERS, POWER_TOL, SAFETY_FACTOR};

/// The function a base step descends on.
pub trait Objective {
    /// Number of unknowns.
    fn dim(&self) -> usize;

    fn eval(&self, x: &Vector) -> Result<f64>;

    /// `dist(0, ∂Φ(x))`.
    fn residual(&self, x: &Vector) -> Result<f64>;

    /// True when `Φ` is differentiable everywhere.
    fn is_smooth(&self) -> bool;

    /// Lipschitz constant of the gradient of the smooth part.
    fn lipschitz(&self) -> f64;

    /// Support threshold used when counting nonzeros.
    fn zero_tol(&self) -> f64 {
        0.0
    }
}

/// `f(x) = ½‖b − Ax‖²` with a cached bound on `‖A‖²₂`.
#[derive(Clone, Debug)]
pub struct SmoothQuadratic {
    a: DenseMatrix,
    b: Vector,
    lipschitz: f64,
}

impl SmoothQuadratic {
    /// Estimates the Lipschitz constant by power iteration, inflated by
    /// [`SAFETY_FACTOR`].
    pub fn new(a: DenseMatrix, b: Vector) -> Result<Self> {
        let est = spectral_norm_sq(&a, POWER_TOL, POWER_MAX_ITERS)?;
        Self::with_lipschitz(a, b, est * SAFETY_FACTOR)
    }

    /// Uses a known Lipschitz constant.
    pub fn with_lipschitz(a: DenseMatrix, b: Vector, lipschitz: f64) -> Result<Self> {
        if a.rows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                actual: b.len(),
            });
        }
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(invalid("lipschitz", "must be finite and non-negative"));
        }
        Ok(Self { a, b, lipschitz })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &Vector {
        &self.b
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `Ax − b`.
    fn misfit(&self, x: &Vector) -> Result<Vector> {
        self.a.matvec(x)?.sub(&self.b)
    }

    pub fn eval(&self, x: &Vector) -> Result<f64> {
        Ok(0.5 * self.misfit(x)?.norm_sq())
    }

    /// `Aᵀ(Ax − b)`.
    pub fn grad(&self, x: &Vector) -> Result<Vector> {
        self.a.transpose_matvec(&self.misfit(x)?)
    }

    /// `‖∇f(x)‖₂`.
    pub fn residual_smooth(&self, x: &Vector) -> Result<f64> {
        Ok(self.grad(x)?.norm())
    }
}

impl Objective for SmoothQuadratic {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn eval(&self, x: &Vector) -> Result<f64> {
        SmoothQuadratic::eval(self, x)
    }

    fn residual(&self, x: &Vector) -> Result<f64> {
        self.residual_smooth(x)
    }

    fn is_smooth(&self) -> bool {
        true
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// `Φ⁰(x) = ½‖b − Ax‖² + λ‖x‖₀`.
#[derive(Clone, Debug)]
pub struct L0LeastSquares {
    quad: SmoothQuadratic,
    lambda: f64,
    zero_tol: f64,
}

impl L0LeastSquares {
    pub fn new(quad: SmoothQuadratic, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", "must be positive and finite"));
        }
        Ok(Self {
            quad,
            lambda,
            zero_tol: 0.0,
        })
    }

    /// Entries with `|x_i| <= zero_tol` count as zero. The hard-threshold map
    /// produces exact zeros, so the default of 0 is right for its iterates.
    pub fn with_zero_tol(mut self, zero_tol: f64) -> Result<Self> {
        if !(zero_tol >= 0.0 && zero_tol.is_finite()) {
            return Err(invalid("zero_tol", "must be finite and non-negative"));
        }
        self.zero_tol = zero_tol;
        Ok(self)
    }

    pub fn quad(&self) -> &SmoothQuadratic {
        &self.quad
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval_l0(&self, x: &Vector) -> Result<f64> {
        let loss = self.quad.eval(x)?;
        Ok(loss + self.lambda * support(x, self.zero_tol).len() as f64)
    }

    /// `‖[∇f(x)]_{supp(x)}‖₂`.
    pub fn residual_l0(&self, x: &Vector) -> Result<f64> {
        let g = self.quad.grad(x)?;
        Ok(support(x, self.zero_tol)
            .into_iter()
            .map(|i| g[i] * g[i])
            .sum::<f64>()
            .sqrt())
    }
}

impl Objective for L0LeastSquares {
    fn dim(&self) -> usize {
        self.quad.dim()
    }

    fn eval(&self, x: &Vector) -> Result<f64> {
        self.eval_l0(x)
    }

    fn residual(&self, x: &Vector) -> Result<f64> {
        self.residual_l0(x)
    }

    fn is_smooth(&self) -> bool {
        false
    }

    fn lipschitz(&self) -> f64 {
        self.quad.lipschitz
    }

    fn zero_tol(&self) -> f64 {
        self.zero_tol
    }
}

/// Zero-based indices `i` with `|x_i| > zero_tol`, ascending.
pub fn support(x: &Vector, zero_tol: f64) -> Vec<usize> {
    x.as_slice()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > zero_tol)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn worked_quad() -> SmoothQuadratic {
        SmoothQuadratic::with_lipschitz(DenseMatrix::identity(2), v(&[3.0, 0.5]), 1.0).unwrap()
    }

    fn worked_l0() -> L0LeastSquares {
        L0LeastSquares::new(worked_quad(), 1.0).unwrap()
    }

    #[test]
    fn quadratic_values() {
        let q = worked_quad();
        assert_eq!(q.eval(&v(&[3.0, 0.5])).unwrap(), 0.0);
        assert_eq!(q.eval(&v(&[0.0, 0.0])).unwrap(), 4.625);
        assert_eq!(q.eval(&v(&[1.5, 0.0])).unwrap(), 1.25);
    }

    #[test]
    fn gradient_values() {
        let q = worked_quad();
        assert_eq!(q.grad(&v(&[3.0, 0.5])).unwrap(), v(&[0.0, 0.0]));
        assert_eq!(q.grad(&v(&[0.0, 0.0])).unwrap(), v(&[-3.0, -0.5]));
        assert_eq!(q.grad(&v(&[1.5, 0.0])).unwrap(), v(&[-1.5, -0.5]));
    }

    #[test]
    fn l0_values() {
        let p = worked_l0();
        assert_eq!(p.eval_l0(&v(&[0.0, 0.0])).unwrap(), 4.625);
        assert_eq!(p.eval_l0(&v(&[3.0, 0.5])).unwrap(), 2.0);
        assert_eq!(p.eval_l0(&v(&[1.5, 0.0])).unwrap(), 2.25);
    }

    #[test]
    fn support_examples() {
        assert_eq!(support(&v(&[1.5, 0.0]), 0.0), vec![0]);
        assert!(support(&v(&[0.0, 0.0]), 0.0).is_empty());
        assert_eq!(support(&v(&[3.0, 0.5]), 0.0), vec![0, 1]);
        assert_eq!(support(&v(&[3.0, 0.5]), 0.5), vec![0]);
    }

    #[test]
    fn residual_examples() {
        let p = worked_l0();
        assert_eq!(p.residual_l0(&v(&[1.5, 0.0])).unwrap(), 1.5);
        assert_eq!(p.residual_l0(&v(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(p.residual_l0(&v(&[3.0, 0.0])).unwrap(), 0.0);

        let q = worked_quad();
        assert_eq!(q.residual_smooth(&v(&[3.0, 0.5])).unwrap(), 0.0);
        assert_eq!(q.residual_smooth(&v(&[0.0, 0.0])).unwrap(), 9.25f64.sqrt());
        let d = SmoothQuadratic::new(DenseMatrix::diag(&[2.0, 1.0]), v(&[0.0, 0.0])).unwrap();
        assert_eq!(d.residual_smooth(&v(&[1.0, 0.0])).unwrap(), 4.0);
    }

    #[test]
    fn validation() {
        assert!(L0LeastSquares::new(worked_quad(), 0.0).is_err());
        assert!(L0LeastSquares::new(worked_quad(), -1.0).is_err());
        assert!(worked_l0().with_zero_tol(-1.0).is_err());
        assert!(SmoothQuadratic::new(DenseMatrix::identity(2), v(&[1.0])).is_err());
        assert!(worked_quad().eval(&v(&[1.0])).is_err());
    }

    #[test]
    fn estimated_lipschitz_carries_safety_factor() {
        let q = SmoothQuadratic::new(DenseMatrix::identity(3), v(&[1.0, 2.0, 3.0])).unwrap();
        assert!((q.lipschitz() - SAFETY_FACTOR).abs() < 1e-12);
    }
}
