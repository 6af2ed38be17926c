//! Executable checks of the descent inequalities against a finished run.
//!
//! Every check scans the trace, records the most negative slack it sees and
//! passes when that slack is no worse than `-CHECK_TOL`. Objective-valued
//! slacks are divided by `max(1, |Φ|)`; residual slacks are absolute.
//!
//! Constants, with `ν, β` from the base step, `L` the Lipschitz bound,
//! `η₊ = min_k η_k` and `η̂ = max(η, max_k η_k)` the largest extrapolation
//! factor in force (0 for plain runs):
//!
//! * `a = ν + αη₊` (plain runs: `a = ν`),
//! * `b = β + Lη̂`,
//! * `ā = a / (1 + η̂)²`, `b̄ = (1 + η̂) b`.
//!
//! The search starts at `m = 0`, so `η_k = 1` is possible and `η̂` can exceed
//! the backtracking ratio `η`. Since `‖x^{k+1} − x^k‖ = (1 + η_k)‖d^k‖`, the
//! increment form of the decrease needs the square in `ā`.

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{invalid, Result};
use crate::line_search::{LineSearchParams, RunTrace, SearchStep, StopCriteria, StopReason};
use crate::step::StepCertificate;

pub const CHECK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Most negative (scaled) slack; 0 when nothing was checked.
    pub worst_violation: f64,
    pub at_iteration: Option<usize>,
    pub constant_used: f64,
    /// The check did not apply to this trace.
    pub inconclusive: bool,
}

/// Tracks the worst slack seen while scanning.
struct Worst {
    slack: f64,
    at: Option<usize>,
}

impl Worst {
    fn new() -> Self {
        Self {
            slack: f64::INFINITY,
            at: None,
        }
    }

    fn see(&mut self, k: usize, slack: f64) {
        // NaN slack counts as a violation.
        let slack = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
        if slack < self.slack {
            self.slack = slack;
            self.at = Some(k);
        }
    }

    fn report(self, name: &str, constant_used: f64) -> CheckReport {
        let worst = if self.slack.is_finite() || self.slack < 0.0 {
            self.slack
        } else {
            0.0
        };
        CheckReport {
            name: name.to_string(),
            passed: worst >= -CHECK_TOL,
            worst_violation: worst.max(f64::MIN),
            at_iteration: self.at,
            constant_used,
            inconclusive: false,
        }
    }
}

fn scale(phi: f64) -> f64 {
    phi.abs().max(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub nu: f64,
    pub beta: f64,
    pub lipschitz: f64,
    pub alpha: f64,
    /// Backtracking ratio, 0 for plain runs.
    pub eta: f64,
    /// `min_k η_k`; `None` for plain runs.
    pub eta_plus: Option<f64>,
    /// `max(η, max_k η_k)`.
    pub eta_hat: f64,
    pub a: f64,
    pub b: f64,
    pub a_bar: f64,
    pub b_bar: f64,
}

impl DerivedConstants {
    pub fn new(
        trace: &RunTrace,
        cert: &StepCertificate,
        lipschitz: f64,
        params: Option<&LineSearchParams>,
    ) -> Self {
        let (alpha, eta) = params.map_or((0.0, 0.0), |p| (p.alpha(), p.eta()));
        let eta_plus = params.map(|_| {
            trace
                .records
                .iter()
                .filter_map(|r| r.eta_k)
                .fold(f64::INFINITY, f64::min)
        });
        let eta_plus = eta_plus.map(|e| if e.is_finite() { e } else { 0.0 });
        let eta_hat = trace
            .records
            .iter()
            .filter_map(|r| r.eta_k)
            .fold(eta, f64::max);
        let a = cert.nu + alpha * eta_plus.unwrap_or(0.0);
        let b = cert.beta + lipschitz * eta_hat;
        Self {
            nu: cert.nu,
            beta: cert.beta,
            lipschitz,
            alpha,
            eta,
            eta_plus,
            eta_hat,
            a,
            b,
            a_bar: a / ((1.0 + eta_hat) * (1.0 + eta_hat)),
            b_bar: (1.0 + eta_hat) * b,
        }
    }
}

/// `Φ(x^{k+1})` for record `k`.
fn phi_next(trace: &RunTrace, k: usize) -> f64 {
    trace
        .records
        .get(k + 1)
        .map_or(trace.final_phi, |r| r.phi_x)
}

/// `Φ(x^{k+1}) ≤ Φ(x^k) − a‖d^k‖²` and `ā‖x^{k+1} − x^k‖² ≤ Φ(x^k) − Φ(x^{k+1})`.
pub fn check_sufficient_decrease(trace: &RunTrace, c: &DerivedConstants) -> CheckReport {
    let mut worst = Worst::new();
    for (k, r) in trace.records.iter().enumerate() {
        let next = phi_next(trace, k);
        let s = scale(r.phi_x);
        worst.see(k, (r.phi_x - c.a * r.d_norm * r.d_norm - next) / s);
        let step = trace.step_norms[k];
        worst.see(k, (r.phi_x - next - c.a_bar * step * step) / s);
    }
    worst.report("sufficient_decrease", c.a)
}

/// `a Σ_{i≤k} ‖d^i‖² ≤ Φ(x⁰) − Φ(x^{k+1})` for every `k`.
pub fn check_summability(trace: &RunTrace, c: &DerivedConstants) -> CheckReport {
    let mut worst = Worst::new();
    let Some(first) = trace.records.first() else {
        return worst.report("summability", c.a);
    };
    let phi0 = first.phi_x;
    let mut partial = 0.0;
    for (k, r) in trace.records.iter().enumerate() {
        partial += r.d_norm * r.d_norm;
        worst.see(k, (phi0 - phi_next(trace, k) - c.a * partial) / scale(phi0));
    }
    worst.report("summability", c.a)
}

/// `‖d^k‖ ≤ ‖x^{k+1} − x^k‖ ≤ (1 + η̂)‖d^k‖`, and `‖x^{k+1} − x^k‖ = (1 + η_k)‖d^k‖`.
/// Slacks are absolute: near convergence `‖d^k‖` is tiny and the ratio
/// carries the rounding of `x^{k+1} − x^k` relative to `‖x^k‖`.
pub fn check_step_sandwich(trace: &RunTrace, c: &DerivedConstants) -> CheckReport {
    let mut worst = Worst::new();
    for (k, r) in trace.records.iter().enumerate() {
        let step = trace.step_norms[k];
        worst.see(k, step - r.d_norm);
        worst.see(k, (1.0 + c.eta_hat) * r.d_norm - step);
        let expected = 1.0 + r.eta_k.unwrap_or(0.0);
        worst.see(k, -(step - expected * r.d_norm).abs());
    }
    worst.report("step_sandwich", 1.0 + c.eta_hat)
}

/// Per-iteration bookkeeping of the search: the base-step decrease
/// `Φ(y^k) ≤ Φ(x^k) − ν‖d^k‖²`, the Armijo acceptance
/// `Φ(x^{k+1}) ≤ Φ(y^k) − αη_k‖d^k‖²`, and `η_k = ηᵐ` (or 0 on failure).
pub fn check_step_consistency(
    trace: &RunTrace,
    c: &DerivedConstants,
    params: Option<&LineSearchParams>,
) -> CheckReport {
    let mut worst = Worst::new();
    for (k, r) in trace.records.iter().enumerate() {
        let s = scale(r.phi_x);
        let d_sq = r.d_norm * r.d_norm;
        let next = phi_next(trace, k);
        worst.see(k, (r.phi_x - c.nu * d_sq - r.phi_y) / s);

        match (params, r.m_k, r.eta_k) {
            (Some(p), Some(m_k), Some(eta_k)) => {
                let expected = match m_k {
                    SearchStep::Accepted(m) if m <= p.cap() => p.eta().powi(m as i32),
                    SearchStep::Accepted(_) => f64::NAN,
                    SearchStep::Failed => 0.0,
                };
                worst.see(k, -(eta_k - expected).abs());
                match m_k {
                    SearchStep::Failed => worst.see(k, -(next - r.phi_y).abs() / s),
                    SearchStep::Accepted(_) => {
                        worst.see(k, (r.phi_y - p.alpha() * eta_k * d_sq - next) / s)
                    }
                }
            }
            (None, None, None) => worst.see(k, -(next - r.phi_y).abs() / s),
            _ => worst.see(k, f64::NEG_INFINITY),
        }
    }
    worst.report("step_consistency", c.nu)
}

/// Finds the support-stabilization index and checks support bookkeeping.
///
/// `K_stab` is the first iterate index of the longest suffix of constant
/// support; it is `None` when the support changed on the final recorded
/// step. When `leave_threshold` (the hard threshold `√(2λ/h)`) is given,
/// a step that drops an index from the support must have
/// `‖d^k‖ ≥ leave_threshold − CHECK_TOL`.
///
/// That bound needs the dropped entry to be at least the threshold in
/// magnitude, which holds when `x^k` is itself a thresholded point (plain
/// runs, `k = 0`, or the previous search failed so `x^k = y^{k−1}`), and when
/// the search succeeded at step `k` (then `|d_i| = |y_i|/η_k`). An
/// extrapolated `x^k` followed by a failed search can drop an entry of any
/// size, so those steps are not asserted.
pub fn check_support(trace: &RunTrace, leave_threshold: Option<f64>) -> (Option<usize>, CheckReport) {
    let supports = &trace.supports;
    let records = &trace.records;
    let mut worst = Worst::new();
    for (k, r) in records.iter().enumerate() {
        worst.see(k, -(r.support_size.abs_diff(supports[k + 1].len()) as f64));
        let Some(thr) = leave_threshold else { continue };
        let leaves = supports[k]
            .iter()
            .any(|i| supports[k + 1].binary_search(i).is_err());
        let thresholded_start = k == 0 || records[k - 1].eta_k.is_none_or(|e| e == 0.0);
        let extrapolated = r.eta_k.is_some_and(|e| e > 0.0);
        if leaves && (thresholded_start || extrapolated) {
            worst.see(k, r.d_norm - thr);
        }
    }

    let last = supports.len() - 1;
    let mut start = last;
    while start > 0 && supports[start - 1] == supports[last] {
        start -= 1;
    }
    let k_stab = (start < last || last == 0).then_some(start);

    let mut report = worst.report("support", leave_threshold.unwrap_or(0.0));
    if k_stab.is_none() {
        report.passed = false;
        report.at_iteration = Some(last);
    }
    (k_stab, report)
}

/// `dist(0, ∂Φ(x^{k+1})) ≤ b‖d^k‖` and `≤ b̄‖x^{k+1} − x^k‖`.
///
/// Smooth objectives are checked at every `k`; ℓ0 objectives only from
/// `k_stab` on, and not at all (inconclusive) when the support never settled.
pub fn check_residual_bound(
    trace: &RunTrace,
    c: &DerivedConstants,
    smooth: bool,
    k_stab: Option<usize>,
) -> CheckReport {
    let start = if smooth { Some(0) } else { k_stab };
    let mut worst = Worst::new();
    if let Some(start) = start {
        for (k, r) in trace.records.iter().enumerate().skip(start) {
            worst.see(k, c.b * r.d_norm - r.residual);
            worst.see(k, c.b_bar * trace.step_norms[k] - r.residual);
        }
    }
    let mut report = worst.report("residual_bound", c.b);
    report.inconclusive = start.is_none();
    report
}

/// Empirical convergence certificate: the tail sums
/// `T_K = Σ_{k≥K} (1 + η_k)‖d^k‖` are non-increasing in `K` and the final
/// residual is below `10·b̄·d_tol` (or `residual_tol` for residual stops).
/// Runs that stopped for another reason are inconclusive.
pub fn check_cauchy(trace: &RunTrace, c: &DerivedConstants, stop: &StopCriteria) -> CheckReport {
    let threshold = match trace.stop_reason {
        StopReason::DTol => 10.0 * c.b_bar * stop.d_tol(),
        StopReason::ResidualTol => stop.residual_tol().unwrap_or(0.0),
        StopReason::MaxIters | StopReason::UnboundedGuard => {
            let mut report = Worst::new().report("cauchy", 0.0);
            report.inconclusive = true;
            return report;
        }
    };
    let mut worst = Worst::new();
    let n = trace.records.len();
    let mut tails = vec![0.0; n + 1];
    for k in (0..n).rev() {
        let r = &trace.records[k];
        tails[k] = tails[k + 1] + (1.0 + r.eta_k.unwrap_or(0.0)) * r.d_norm;
    }
    for k in 0..n {
        worst.see(k, tails[k] - tails[k + 1]);
    }
    if let Some(last) = trace.records.last() {
        worst.see(n - 1, threshold - last.residual);
    }
    worst.report("cauchy", threshold)
}

/// Everything needed to verify a trace besides the trace itself.
#[derive(Clone, Debug)]
pub struct VerifyContext {
    pub cert: StepCertificate,
    pub lipschitz: f64,
    pub smooth: bool,
    /// `None` for plain runs.
    pub params: Option<LineSearchParams>,
    pub stop: StopCriteria,
    /// `√(2λ/h)` for hard-thresholding steps.
    pub leave_threshold: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub reports: Vec<CheckReport>,
    pub constants: DerivedConstants,
    pub k_stab: Option<usize>,
    pub stop_reason: StopReason,
}

/// Runs every check on `trace`.
pub fn verify(trace: &RunTrace, ctx: &VerifyContext) -> Result<VerificationReport> {
    let params = ctx.params.as_ref();
    let c = DerivedConstants::new(trace, &ctx.cert, ctx.lipschitz, params);
    let mut reports = vec![
        check_sufficient_decrease(trace, &c),
        check_summability(trace, &c),
        check_step_sandwich(trace, &c),
        check_step_consistency(trace, &c, params),
    ];
    let k_stab = if ctx.smooth {
        None
    } else {
        let (k_stab, report) = check_support(trace, ctx.leave_threshold);
        reports.push(report);
        k_stab
    };
    reports.push(check_residual_bound(trace, &c, ctx.smooth, k_stab));
    reports.push(check_cauchy(trace, &c, &ctx.stop));
    summarize(reports, c, k_stab, trace.stop_reason)
}

/// Bundles reports; an empty list is an error.
pub fn summarize(
    reports: Vec<CheckReport>,
    constants: DerivedConstants,
    k_stab: Option<usize>,
    stop_reason: StopReason,
) -> Result<VerificationReport> {
    if reports.is_empty() {
        return Err(invalid("reports", "nothing to summarize"));
    }
    Ok(VerificationReport {
        reports,
        constants,
        k_stab,
        stop_reason,
    })
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.reports
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name.as_str())
            .collect()
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }

    pub fn get(&self, name: &str) -> Option<&CheckReport> {
        self.reports.iter().find(|r| r.name == name)
    }

    /// `{check: {passed, worst_violation, at_iteration, constant_used,
    /// inconclusive}, constants: {...}, stop_reason, all_passed}`.
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        for r in &self.reports {
            root.insert(
                r.name.clone(),
                json!({
                    "passed": r.passed,
                    "worst_violation": r.worst_violation,
                    "at_iteration": r.at_iteration,
                    "constant_used": r.constant_used,
                    "inconclusive": r.inconclusive,
                }),
            );
        }
        let c = &self.constants;
        root.insert(
            "constants".into(),
            json!({
                "nu": c.nu,
                "beta": c.beta,
                "lipschitz": c.lipschitz,
                "alpha": c.alpha,
                "eta": c.eta,
                "eta_plus": c.eta_plus,
                "eta_hat": c.eta_hat,
                "a": c.a,
                "b": c.b,
                "a_bar": c.a_bar,
                "b_bar": c.b_bar,
                "k_stab": self.k_stab,
            }),
        );
        root.insert("stop_reason".into(), json!(self.stop_reason.to_string()));
        root.insert("all_passed".into(), json!(self.all_passed()));
        Value::Object(root)
    }

    pub fn human(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            let status = match (r.passed, r.inconclusive) {
                (_, true) => "SKIP",
                (true, false) => "PASS",
                (false, false) => "FAIL",
            };
            let at = r.at_iteration.map_or("-".to_string(), |k| k.to_string());
            out.push_str(&format!(
                "{status} {:<20} worst slack {:>12.4e} at {:>6}  constant {:.6e}\n",
                r.name, r.worst_violation, at, r.constant_used
            ));
        }
        let c = &self.constants;
        out.push_str(&format!(
            "nu={:.6e} beta={:.6e} a={:.6e} b={:.6e} a_bar={:.6e} b_bar={:.6e} eta_plus={} eta_hat={} k_stab={} stop={}\n",
            c.nu,
            c.beta,
            c.a,
            c.b,
            c.a_bar,
            c.b_bar,
            c.eta_plus.map_or("-".into(), |e| format!("{e:.6e}")),
            c.eta_hat,
            self.k_stab.map_or("NONE".into(), |k| k.to_string()),
            self.stop_reason,
        ));
        out
    }
}
