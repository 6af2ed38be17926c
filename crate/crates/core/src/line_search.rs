//! Capped Armijo extrapolation around a base step, and the iteration loops.
//!
//! Each iteration computes `y = B(x)`, `d = y − x`, then searches for the
//! smallest `m ≤ M` with `Φ(y + ηᵐd) ≤ Φ(y) − αηᵐ‖d‖²`. On success the next
//! iterate is `y + ηᵐd`, which equals `x + (1 + ηᵐ)d`; on failure it is `y`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Vector;
use crate::objective::{support, Objective};
use crate::step::BaseStep;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchParams {
    alpha: f64,
    eta: f64,
    cap: u32,
}

impl LineSearchParams {
    pub fn new(alpha: f64, eta: f64, cap: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", "must be positive and finite"));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(invalid("eta", "must lie in (0, 1)"));
        }
        Ok(Self { alpha, eta, cap })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            eta: 0.5,
            cap: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopCriteria {
    max_iters: usize,
    d_tol: f64,
    residual_tol: Option<f64>,
    bound_guard: f64,
}

impl StopCriteria {
    pub fn new(max_iters: usize, d_tol: f64) -> Result<Self> {
        if max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if !(d_tol >= 0.0) {
            return Err(invalid("d_tol", "must be non-negative"));
        }
        Ok(Self {
            max_iters,
            d_tol,
            ..Self::default()
        })
    }

    pub fn with_residual_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0) {
            return Err(invalid("residual_tol", "must be non-negative"));
        }
        self.residual_tol = Some(tol);
        Ok(self)
    }

    pub fn with_bound_guard(mut self, guard: f64) -> Result<Self> {
        if !(guard > 0.0) {
            return Err(invalid("bound_guard", "must be positive"));
        }
        self.bound_guard = guard;
        Ok(self)
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters
    }

    pub fn d_tol(&self) -> f64 {
        self.d_tol
    }

    pub fn residual_tol(&self) -> Option<f64> {
        self.residual_tol
    }

    pub fn bound_guard(&self) -> f64 {
        self.bound_guard
    }
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            d_tol: 1e-10,
            residual_tol: None,
            bound_guard: 1e12,
        }
    }
}

/// Outcome of the capped search: the accepted exponent, or failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchStep {
    Accepted(u32),
    Failed,
}

#[derive(Clone, Debug)]
pub struct ArmijoResult {
    pub step: SearchStep,
    /// `ηᵐ` on success, 0 on failure.
    pub eta_k: f64,
    /// The accepted trial point `y + ηᵐd` and its objective value.
    pub trial: Option<(Vector, f64)>,
}

/// Finds the smallest `m ∈ {0, …, M}` with
/// `Φ(y + ηᵐd) ≤ Φ(y) − αηᵐ‖d‖²`, where `phi_y = Φ(y)` is supplied by the
/// caller. Evaluates `Φ` at most `M + 1` times; a zero direction is accepted
/// at `m = 0` without evaluating.
pub fn armijo_search(
    obj: &dyn Objective,
    y: &Vector,
    d: &Vector,
    phi_y: f64,
    params: &LineSearchParams,
) -> Result<ArmijoResult> {
    let d_sq = d.norm_sq();
    if d_sq == 0.0 {
        return Ok(ArmijoResult {
            step: SearchStep::Accepted(0),
            eta_k: 1.0,
            trial: Some((y.clone(), phi_y)),
        });
    }
    for m in 0..=params.cap {
        let eta_m = params.eta.powi(m as i32);
        let trial = y.add_scaled(eta_m, d)?;
        let phi_t = obj.eval(&trial)?;
        if phi_t <= phi_y - params.alpha * eta_m * d_sq {
            return Ok(ArmijoResult {
                step: SearchStep::Accepted(m),
                eta_k: eta_m,
                trial: Some((trial, phi_t)),
            });
        }
    }
    Ok(ArmijoResult {
        step: SearchStep::Failed,
        eta_k: 0.0,
        trial: None,
    })
}

/// One row of a run trace. `residual` and `support_size` describe `x^{k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub phi_x: f64,
    pub phi_y: f64,
    pub d_norm: f64,
    /// `None` for runs without line search.
    pub m_k: Option<SearchStep>,
    pub eta_k: Option<f64>,
    pub residual: f64,
    pub support_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    DTol,
    ResidualTol,
    MaxIters,
    UnboundedGuard,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::DTol => "D_TOL",
            Self::ResidualTol => "RESIDUAL_TOL",
            Self::MaxIters => "MAX_ITERS",
            Self::UnboundedGuard => "UNBOUNDED_GUARD",
        };
        f.write_str(s)
    }
}

/// A completed run.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub final_x: Vector,
    /// `Φ(final_x)`.
    pub final_phi: f64,
    pub stop_reason: StopReason,
    /// `supp(x^k)` for `k = 0..=records.len()`.
    pub supports: Vec<Vec<usize>>,
    /// `‖x^{k+1} − x^k‖` per record.
    pub step_norms: Vec<f64>,
    /// True when the run used the line search.
    pub line_search: bool,
}

impl RunTrace {
    /// `Φ(x^0), …, Φ(x^K), Φ(final_x)`.
    pub fn phi_path(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.phi_x)
            .chain(std::iter::once(self.final_phi))
            .collect()
    }

    /// Index of the first record with `‖d^k‖ ≤ tol`.
    pub fn iterations_to_d_tol(&self, tol: f64) -> Option<usize> {
        self.records.iter().position(|r| r.d_norm <= tol)
    }

    /// First `j` with `Φ(x^j) − Φ(final_x) ≤ tol`.
    pub fn iterations_to_final_phi(&self, tol: f64) -> usize {
        let path = self.phi_path();
        path.iter()
            .position(|p| p - self.final_phi <= tol)
            .unwrap_or(path.len() - 1)
    }
}

struct Advance {
    x_next: Vector,
    phi_next: f64,
    record: IterationRecord,
}

fn advance(
    k: usize,
    x: &Vector,
    phi_x: f64,
    step: &dyn BaseStep,
    params: Option<&LineSearchParams>,
) -> Result<Advance> {
    let obj = step.objective();
    let y = step.apply(x)?;
    if !y.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: k });
    }
    let phi_y = obj.eval(&y)?;
    if !phi_y.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: k });
    }
    let d = y.sub(x)?;

    let (x_next, phi_next, m_k, eta_k) = match params {
        Some(params) => {
            let found = armijo_search(obj, &y, &d, phi_y, params)?;
            match found.trial {
                Some((trial, phi_t)) => (trial, phi_t, Some(found.step), Some(found.eta_k)),
                None => (y, phi_y, Some(found.step), Some(found.eta_k)),
            }
        }
        None => (y, phi_y, None, None),
    };

    let residual = obj.residual(&x_next)?;
    let record = IterationRecord {
        k,
        phi_x,
        phi_y,
        d_norm: d.norm(),
        m_k,
        eta_k,
        residual,
        support_size: support(&x_next, obj.zero_tol()).len(),
    };
    Ok(Advance {
        x_next,
        phi_next,
        record,
    })
}

/// One line-search iteration from `x`.
pub fn iterate(
    x: &Vector,
    step: &dyn BaseStep,
    params: &LineSearchParams,
) -> Result<(Vector, IterationRecord)> {
    let phi_x = step.objective().eval(x)?;
    let out = advance(0, x, phi_x, step, Some(params))?;
    Ok((out.x_next, out.record))
}

/// Base step with the capped Armijo extrapolation.
pub fn run(
    x0: &Vector,
    step: &dyn BaseStep,
    params: &LineSearchParams,
    stop: &StopCriteria,
) -> Result<RunTrace> {
    drive(x0, step, Some(params), stop)
}

/// Base step alone, `x^{k+1} = B(x^k)`.
pub fn run_plain(x0: &Vector, step: &dyn BaseStep, stop: &StopCriteria) -> Result<RunTrace> {
    drive(x0, step, None, stop)
}

fn drive(
    x0: &Vector,
    step: &dyn BaseStep,
    params: Option<&LineSearchParams>,
    stop: &StopCriteria,
) -> Result<RunTrace> {
    let obj = step.objective();
    if x0.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            actual: x0.len(),
        });
    }
    if !x0.is_finite() {
        return Err(invalid("x0", "must be finite"));
    }
    let zero_tol = obj.zero_tol();

    let mut x = x0.clone();
    let mut phi = obj.eval(&x)?;
    if !phi.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut records = Vec::new();
    let mut supports = vec![support(&x, zero_tol)];
    let mut step_norms = Vec::new();

    let stop_reason = loop {
        let k = records.len();
        let out = advance(k, &x, phi, step, params)?;
        if !out.x_next.is_finite() || !out.phi_next.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: k });
        }
        step_norms.push(out.x_next.sub(&x)?.norm());
        supports.push(support(&out.x_next, zero_tol));
        let d_norm = out.record.d_norm;
        let residual = out.record.residual;
        records.push(out.record);
        x = out.x_next;
        phi = out.phi_next;

        if d_norm <= stop.d_tol {
            break StopReason::DTol;
        }
        if stop.residual_tol.is_some_and(|tol| residual <= tol) {
            break StopReason::ResidualTol;
        }
        if x.norm() > stop.bound_guard {
            break StopReason::UnboundedGuard;
        }
        if records.len() >= stop.max_iters {
            break StopReason::MaxIters;
        }
    };

    Ok(RunTrace {
        records,
        final_x: x,
        final_phi: phi,
        stop_reason,
        supports,
        step_norms,
        line_search: params.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::objective::{L0LeastSquares, SmoothQuadratic};
    use crate::step::IhtStep;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn half_square() -> SmoothQuadratic {
        SmoothQuadratic::with_lipschitz(DenseMatrix::identity(1), v(&[0.0]), 1.0).unwrap()
    }

    fn worked_iht() -> IhtStep {
        let quad =
            SmoothQuadratic::with_lipschitz(DenseMatrix::identity(2), v(&[3.0, 0.5]), 1.0).unwrap();
        IhtStep::new(L0LeastSquares::new(quad, 1.0).unwrap(), 2.0).unwrap()
    }

    fn params() -> LineSearchParams {
        LineSearchParams::new(0.1, 0.5, 10).unwrap()
    }

    #[test]
    fn armijo_accepts_first_trial() {
        let f = half_square();
        let r = armijo_search(&f, &v(&[0.5]), &v(&[-0.5]), 0.125, &params()).unwrap();
        assert_eq!(r.step, SearchStep::Accepted(0));
        assert_eq!(r.eta_k, 1.0);
        assert_eq!(r.trial.unwrap().0, v(&[0.0]));
    }

    #[test]
    fn armijo_fails_at_minimizer() {
        let f = half_square();
        let r = armijo_search(&f, &v(&[0.0]), &v(&[-1.0]), 0.0, &params()).unwrap();
        assert_eq!(r.step, SearchStep::Failed);
        assert_eq!(r.eta_k, 0.0);
        assert!(r.trial.is_none());
    }

    #[test]
    fn armijo_on_l0_instance() {
        let s = worked_iht();
        let y = v(&[2.25, 0.0]);
        let phi_y = s.objective().eval(&y).unwrap();
        assert_eq!(phi_y, 1.40625);
        let r = armijo_search(s.objective(), &y, &v(&[0.75, 0.0]), phi_y, &params()).unwrap();
        assert_eq!(r.step, SearchStep::Accepted(0));
        assert_eq!(r.trial.unwrap(), (v(&[3.0, 0.0]), 1.125));
    }

    #[test]
    fn armijo_zero_direction() {
        let f = half_square();
        let r = armijo_search(&f, &v(&[2.0]), &v(&[0.0]), 2.0, &params()).unwrap();
        assert_eq!((r.step, r.eta_k), (SearchStep::Accepted(0), 1.0));
    }

    #[test]
    fn iterate_examples() {
        let s = worked_iht();
        let (x1, rec) = iterate(&v(&[0.0, 0.0]), &s, &params()).unwrap();
        assert_eq!(x1, v(&[3.0, 0.0]));
        assert_eq!(rec.phi_x, 4.625);
        assert_eq!(rec.phi_y, 2.25);
        assert_eq!(rec.d_norm, 1.5);
        assert_eq!(rec.m_k, Some(SearchStep::Accepted(0)));
        assert_eq!(rec.eta_k, Some(1.0));
        assert_eq!(rec.residual, 0.0);
        assert_eq!(rec.support_size, 1);

        let (x2, rec) = iterate(&x1, &s, &params()).unwrap();
        assert_eq!(x2, x1);
        assert_eq!(rec.d_norm, 0.0);
    }

    #[test]
    fn failed_search_lands_on_base_step() {
        // From the minimizer of ½x² every extrapolation is uphill.
        let q = SmoothQuadratic::with_lipschitz(DenseMatrix::identity(1), v(&[1.0]), 1.0).unwrap();
        let s = crate::step::GradientDescentStep::new(q, 1.0).unwrap();
        let (x1, rec) = iterate(&v(&[0.0]), &s, &params()).unwrap();
        assert_eq!(rec.m_k, Some(SearchStep::Failed));
        assert_eq!(rec.eta_k, Some(0.0));
        assert_eq!(x1, v(&[1.0]));
    }

    #[test]
    fn run_reaches_critical_point_in_one_step() {
        let s = worked_iht();
        let stop = StopCriteria::new(100, 1e-10).unwrap();
        let trace = run(&v(&[0.0, 0.0]), &s, &params(), &stop).unwrap();
        assert_eq!(trace.records.len(), 2);
        assert_eq!(trace.final_x, v(&[3.0, 0.0]));
        assert_eq!(trace.stop_reason, StopReason::DTol);
        assert_eq!(trace.records[0].residual, 0.0);
        assert_eq!(trace.iterations_to_d_tol(1e-6), Some(1));
        assert_eq!(trace.supports, vec![vec![], vec![0], vec![0]]);
        assert_eq!(trace.step_norms, vec![3.0, 0.0]);
    }

    #[test]
    fn run_from_fixed_point_stops_immediately() {
        let s = worked_iht();
        let stop = StopCriteria::default();
        let trace = run(&v(&[3.0, 0.0]), &s, &params(), &stop).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.stop_reason, StopReason::DTol);
        let plain = run_plain(&v(&[3.0, 0.0]), &s, &stop).unwrap();
        assert_eq!(plain.records.len(), 1);
        assert_eq!(plain.iterations_to_d_tol(1e-6), Some(0));
    }

    #[test]
    fn plain_run_halves_the_gap() {
        let s = worked_iht();
        let stop = StopCriteria::new(1000, 1e-6).unwrap();
        let trace = run_plain(&v(&[0.0, 0.0]), &s, &stop).unwrap();
        for (k, rec) in trace.records.iter().enumerate() {
            assert_eq!(rec.d_norm, 3.0 * 0.5f64.powi(k as i32 + 1));
            assert_eq!(rec.m_k, None);
            assert_eq!(rec.eta_k, None);
        }
        assert_eq!(trace.iterations_to_d_tol(1e-6), Some(21));
        assert_eq!(trace.records.len(), 22);
    }

    #[test]
    fn stop_criteria_validation() {
        assert!(StopCriteria::new(0, 1e-10).is_err());
        assert!(StopCriteria::new(1, -1.0).is_err());
        assert!(StopCriteria::default().with_bound_guard(0.0).is_err());
        assert!(LineSearchParams::new(0.1, 1.0, 3).is_err());
        assert!(LineSearchParams::new(0.0, 0.5, 3).is_err());
    }

    #[test]
    fn max_iters_and_guard() {
        let s = worked_iht();
        let stop = StopCriteria::new(3, 0.0).unwrap();
        let trace = run_plain(&v(&[0.0, 0.0]), &s, &stop).unwrap();
        assert_eq!(trace.stop_reason, StopReason::MaxIters);
        assert_eq!(trace.records.len(), 3);

        let stop = StopCriteria::new(100, 0.0)
            .unwrap()
            .with_bound_guard(2.0)
            .unwrap();
        let trace = run_plain(&v(&[0.0, 0.0]), &s, &stop).unwrap();
        assert_eq!(trace.stop_reason, StopReason::UnboundedGuard);

        let stop = StopCriteria::new(100, 0.0)
            .unwrap()
            .with_residual_tol(1e-3)
            .unwrap();
        let trace = run(&v(&[0.0, 0.0]), &s, &params(), &stop).unwrap();
        assert_eq!(trace.stop_reason, StopReason::ResidualTol);
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let s = worked_iht();
        assert!(run_plain(&v(&[0.0]), &s, &StopCriteria::default()).is_err());
    }
}
