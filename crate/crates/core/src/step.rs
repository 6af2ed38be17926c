//! Base steps `x ↦ y` that the line search wraps.
//!
//! Each step certifies two constants: a sufficient-decrease constant `ν` with
//! `Φ(y) ≤ Φ(x) − ν‖y − x‖²` and a relative-error constant `β` with
//! `dist(0, ∂Φ(y)) ≤ β‖y − x‖`. The diagnostics module checks both against
//! every iterate instead of trusting them.
//!
//! Step-size conventions differ per type and are documented on each.

use crate::error::{invalid, Result};
use crate::linalg::Vector;
use crate::objective::{L0LeastSquares, Objective, SmoothQuadratic};

/// Default ratio of the IHT parameter `h` to the Lipschitz bound.
pub const DEFAULT_H_FACTOR: f64 = 1.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepCertificate {
    pub nu: f64,
    pub beta: f64,
}

impl StepCertificate {
    pub fn new(nu: f64, beta: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(invalid("nu", format!("must be positive and finite, got {nu}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be positive and finite, got {beta}")));
        }
        Ok(Self { nu, beta })
    }
}

/// A deterministic descent map with certified constants.
pub trait BaseStep {
    fn objective(&self) -> &dyn Objective;

    /// Produces `y` from `x`.
    fn apply(&self, x: &Vector) -> Result<Vector>;

    fn certificate(&self) -> StepCertificate;
}

/// `H(t)`: keeps `t` when `|t| ≥ √(2λ/h)`, otherwise 0.
pub fn hard_threshold(t: f64, lambda: f64, h: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "must be positive"));
    }
    if !(h > 0.0) {
        return Err(invalid("h", "must be positive"));
    }
    Ok(keep_above(t, (2.0 * lambda / h).sqrt()))
}

#[inline]
fn keep_above(t: f64, threshold: f64) -> f64 {
    if t.abs() >= threshold {
        t
    } else {
        0.0
    }
}

/// Iterative hard thresholding, `y = H(x − (1/h)Aᵀ(Ax − b))`.
///
/// Here `h` divides the gradient and must exceed the Lipschitz bound.
#[derive(Clone, Debug)]
pub struct IhtStep {
    prob: L0LeastSquares,
    h: f64,
    threshold: f64,
}

impl IhtStep {
    pub fn new(prob: L0LeastSquares, h: f64) -> Result<Self> {
        let lip = prob.quad().lipschitz();
        if !(h.is_finite() && h > lip) {
            return Err(invalid("h", format!("must exceed ‖A‖²₂ = {lip}, got {h}")));
        }
        let threshold = (2.0 * prob.lambda() / h).sqrt();
        Ok(Self { prob, h, threshold })
    }

    /// `h = h_factor · L` with `L` the cached Lipschitz bound.
    pub fn with_h_factor(prob: L0LeastSquares, h_factor: f64) -> Result<Self> {
        if !(h_factor > 1.0) {
            return Err(invalid("h_factor", "must be greater than 1"));
        }
        let h = h_factor * prob.quad().lipschitz();
        Self::new(prob, h)
    }

    pub fn problem(&self) -> &L0LeastSquares {
        &self.prob
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `√(2λ/h)`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `ν = (h − L)/2`, `β = h + L`.
    pub fn certificate_iht(&self) -> Result<StepCertificate> {
        let lip = self.prob.quad().lipschitz();
        StepCertificate::new((self.h - lip) / 2.0, self.h + lip)
    }
}

impl BaseStep for IhtStep {
    fn objective(&self) -> &dyn Objective {
        &self.prob
    }

    fn apply(&self, x: &Vector) -> Result<Vector> {
        let g = self.prob.quad().grad(x)?;
        let forward = x.add_scaled(-1.0 / self.h, &g)?;
        Ok(forward.map(|t| keep_above(t, self.threshold)))
    }

    fn certificate(&self) -> StepCertificate {
        self.certificate_iht()
            .expect("h > L is enforced at construction")
    }
}

/// Forward-backward splitting on `Φ⁰` with the step size multiplying the
/// gradient: `y = prox_{γλ‖·‖₀}(x − γ∇f(x))`, which hard-thresholds at
/// `√(2λγ)`. Equivalent to [`IhtStep`] with `h = 1/γ`.
#[derive(Clone, Debug)]
pub struct ForwardBackwardStep {
    prob: L0LeastSquares,
    gamma: f64,
    threshold: f64,
}

impl ForwardBackwardStep {
    pub fn new(prob: L0LeastSquares, gamma: f64) -> Result<Self> {
        let lip = prob.quad().lipschitz();
        if !(gamma > 0.0 && gamma * lip < 1.0) {
            return Err(invalid("gamma", format!("must lie in (0, 1/L) with L = {lip}")));
        }
        let threshold = (2.0 * prob.lambda() * gamma).sqrt();
        Ok(Self {
            prob,
            gamma,
            threshold,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl BaseStep for ForwardBackwardStep {
    fn objective(&self) -> &dyn Objective {
        &self.prob
    }

    fn apply(&self, x: &Vector) -> Result<Vector> {
        let g = self.prob.quad().grad(x)?;
        let forward = x.add_scaled(-self.gamma, &g)?;
        Ok(forward.map(|t| keep_above(t, self.threshold)))
    }

    fn certificate(&self) -> StepCertificate {
        let lip = self.prob.quad().lipschitz();
        StepCertificate::new((1.0 / self.gamma - lip) / 2.0, 1.0 / self.gamma + lip)
            .expect("gamma < 1/L is enforced at construction")
    }
}

/// Plain gradient descent `y = x − τ∇f(x)`; `τ` multiplies the gradient.
#[derive(Clone, Debug)]
pub struct GradientDescentStep {
    quad: SmoothQuadratic,
    tau: f64,
}

impl GradientDescentStep {
    /// Requires `0 < τ < 2/L`.
    pub fn new(quad: SmoothQuadratic, tau: f64) -> Result<Self> {
        let lip = quad.lipschitz();
        if !(tau > 0.0 && tau.is_finite() && tau * lip < 2.0) {
            return Err(invalid("tau", format!("must lie in (0, 2/L) with L = {lip}")));
        }
        Ok(Self { quad, tau })
    }

    /// `τ = 1/L`.
    pub fn with_default_tau(quad: SmoothQuadratic) -> Result<Self> {
        let lip = quad.lipschitz();
        if !(lip > 0.0) {
            return Err(invalid("lipschitz", "default step needs L > 0"));
        }
        Self::new(quad, 1.0 / lip)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl BaseStep for GradientDescentStep {
    fn objective(&self) -> &dyn Objective {
        &self.quad
    }

    fn apply(&self, x: &Vector) -> Result<Vector> {
        let g = self.quad.grad(x)?;
        x.add_scaled(-self.tau, &g)
    }

    /// `ν = 1/τ − L/2`, `β = 1/τ + L` from the descent lemma.
    fn certificate(&self) -> StepCertificate {
        let lip = self.quad.lipschitz();
        StepCertificate::new(1.0 / self.tau - lip / 2.0, 1.0 / self.tau + lip)
            .expect("tau < 2/L is enforced at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn worked_iht() -> IhtStep {
        let quad =
            SmoothQuadratic::with_lipschitz(DenseMatrix::identity(2), v(&[3.0, 0.5]), 1.0).unwrap();
        IhtStep::new(L0LeastSquares::new(quad, 1.0).unwrap(), 2.0).unwrap()
    }

    #[test]
    fn hard_threshold_examples() {
        assert_eq!(hard_threshold(0.0, 1.0, 2.0).unwrap(), 0.0);
        assert_eq!(hard_threshold(1.5, 1.0, 2.0).unwrap(), 1.5);
        assert_eq!(hard_threshold(0.9, 1.0, 2.0).unwrap(), 0.0);
        assert_eq!(hard_threshold(-1.0, 1.0, 2.0).unwrap(), -1.0);
        assert!(hard_threshold(1.0, 0.0, 2.0).is_err());
        assert!(hard_threshold(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn iht_examples() {
        let s = worked_iht();
        assert_eq!(s.apply(&v(&[0.0, 0.0])).unwrap(), v(&[1.5, 0.0]));
        assert_eq!(s.apply(&v(&[1.5, 0.0])).unwrap(), v(&[2.25, 0.0]));
        assert_eq!(s.apply(&v(&[3.0, 0.0])).unwrap(), v(&[3.0, 0.0]));
        assert!(s.apply(&v(&[1.0])).is_err());
    }

    #[test]
    fn gd_examples() {
        let q = SmoothQuadratic::with_lipschitz(DenseMatrix::identity(1), v(&[0.0]), 1.0).unwrap();
        let s = GradientDescentStep::new(q, 0.5).unwrap();
        assert_eq!(s.apply(&v(&[1.0])).unwrap(), v(&[0.5]));
        assert_eq!(s.apply(&v(&[0.0])).unwrap(), v(&[0.0]));

        let q =
            SmoothQuadratic::with_lipschitz(DenseMatrix::identity(2), v(&[3.0, 0.5]), 1.0).unwrap();
        let s = GradientDescentStep::new(q, 1.0).unwrap();
        assert_eq!(s.apply(&v(&[0.0, 0.0])).unwrap(), v(&[3.0, 0.5]));
    }

    #[test]
    fn certificate_examples() {
        let cert = worked_iht().certificate_iht().unwrap();
        assert_eq!(cert, StepCertificate { nu: 0.5, beta: 3.0 });

        let quad =
            SmoothQuadratic::with_lipschitz(DenseMatrix::diag(&[2.0, 1.0]), v(&[0.0, 0.0]), 4.0)
                .unwrap();
        let prob = L0LeastSquares::new(quad, 1.0).unwrap();
        let cert = IhtStep::new(prob.clone(), 4.04).unwrap().certificate();
        assert!((cert.nu - 0.02).abs() < 1e-12);
        assert!((cert.beta - 8.04).abs() < 1e-12);

        assert!(IhtStep::new(prob.clone(), 4.0).is_err());
        assert!(IhtStep::with_h_factor(prob, 1.0).is_err());
    }

    #[test]
    fn forward_backward_matches_iht_with_reciprocal_step() {
        let iht = worked_iht();
        let fb = ForwardBackwardStep::new(iht.problem().clone(), 0.5).unwrap();
        for x in [[0.0, 0.0], [1.5, 0.0], [-2.0, 4.0]] {
            assert_eq!(fb.apply(&v(&x)).unwrap(), iht.apply(&v(&x)).unwrap());
        }
        assert_eq!(fb.certificate(), iht.certificate());
        assert!(ForwardBackwardStep::new(iht.problem().clone(), 1.0).is_err());
    }

    #[test]
    fn gd_rejects_long_steps() {
        let q = SmoothQuadratic::with_lipschitz(DenseMatrix::identity(1), v(&[0.0]), 1.0).unwrap();
        assert!(GradientDescentStep::new(q.clone(), 2.0).is_err());
        assert!(GradientDescentStep::new(q, 0.0).is_err());
    }
}
